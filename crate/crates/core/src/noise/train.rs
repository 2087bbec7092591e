use rand_distr::{Distribution, Exp1};

use super::{MarkMeasure, RngStream};
use crate::error::{Error, Result};

/// Jump times and marks of one realization of the Poisson random measure on
/// `(0, T] × mark space`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpTrain {
    horizon: f64,
    times: Vec<f64>,
    marks: Vec<f64>,
    mark_dim: usize,
}

impl JumpTrain {
    pub fn empty(horizon: f64, mark_dim: usize) -> Self {
        Self { horizon, times: Vec::new(), marks: Vec::new(), mark_dim }
    }

    /// Builds a train from explicit jumps; times must be strictly increasing in `(0, T]`.
    pub fn from_jumps(horizon: f64, jumps: Vec<(f64, Vec<f64>)>) -> Result<Self> {
        let mark_dim = jumps.first().map(|(_, m)| m.len()).unwrap_or(1);
        let mut train = Self::empty(horizon, mark_dim);
        let mut last = 0.0;
        for (t, m) in jumps {
            if !(t > last && t <= horizon) {
                return Err(Error::invalid("jumps", "times must be strictly increasing in (0, T]"));
            }
            if m.len() != mark_dim {
                return Err(Error::Dimension { expected: mark_dim, got: m.len() });
            }
            last = t;
            train.times.push(t);
            train.marks.extend(m);
        }
        Ok(train)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn mark_dim(&self) -> usize {
        self.mark_dim
    }

    pub fn mark(&self, j: usize) -> &[f64] {
        &self.marks[j * self.mark_dim..(j + 1) * self.mark_dim]
    }

    pub fn jumps(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.times.iter().enumerate().map(move |(j, &t)| (t, self.mark(j)))
    }

    /// `N((0, t] × B)` for the mark set `B` given as a predicate.
    pub fn count<P: Fn(&[f64]) -> bool>(&self, t: f64, in_set: P) -> usize {
        self.jumps().take_while(|(s, _)| *s <= t).filter(|(_, u)| in_set(u)).count()
    }

    /// Index range of jumps with time in `(t0, t1]`.
    pub fn window(&self, t0: f64, t1: f64) -> std::ops::Range<usize> {
        let start = self.times.partition_point(|&s| s <= t0);
        let end = self.times.partition_point(|&s| s <= t1);
        start..end
    }

    /// FNV-1a hash of the exact bit patterns of times and marks.
    pub fn fingerprint(&self) -> u64 {
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |bits: u64| {
            for byte in bits.to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(PRIME);
            }
        };
        feed(self.horizon.to_bits());
        for v in self.times.iter().chain(&self.marks) {
            feed(v.to_bits());
        }
        h
    }
}

/// Samples the jumps of a Poisson random measure with intensity `dt ⊗ β` on
/// `(0, T]`, using exponential inter-arrival times at rate `β(mark space)`.
pub fn sample_jump_train(measure: &MarkMeasure, horizon: f64, rng: RngStream) -> Result<JumpTrain> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::invalid("T", "horizon must be positive and finite"));
    }
    let mut train = JumpTrain::empty(horizon, measure.dim());
    let rate = measure.rate();
    if rate == 0.0 {
        return Ok(train);
    }
    let mut g = rng.generator();
    let mut t = 0.0;
    loop {
        let gap: f64 = Exp1.sample(&mut g);
        let next = t + gap / rate;
        if next > horizon {
            break;
        }
        if next > t {
            train.times.push(next);
            measure.sample_mark(&mut g, &mut train.marks);
        }
        t = next;
    }
    Ok(train)
}
