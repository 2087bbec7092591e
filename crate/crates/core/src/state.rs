use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};

/// Coordinates of a point of the truncated Hilbert space in the eigenbasis of
/// the generator. The Hilbert norm is the Euclidean norm of the coordinates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if let Some(k) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid("state", format!("coordinate {k} is not finite")));
        }
        Ok(Self(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn filled(dim: usize, value: f64) -> Self {
        Self(vec![value; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm_sq(&self) -> f64 {
        norm_sq(&self.0)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dot(&self, other: &StateVector) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn distance_sq(&self, other: &StateVector) -> f64 {
        distance_sq(&self.0, &other.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl From<Vec<f64>> for StateVector {
    fn from(coords: Vec<f64>) -> Self {
        Self(coords)
    }
}

impl Deref for StateVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for StateVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

pub(crate) fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub(crate) fn distance_sq(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
