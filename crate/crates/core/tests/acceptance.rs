//! Acceptance criteria 1 to 11. Each test prints one status line on stdout
//! (bypassing the test harness capture) and then asserts.

use std::io::Write;
use std::time::{Duration, Instant};

use spde_lab::harness::{execute_config, parse_config, ResultTable};
use spde_lab::integrator::{
    mild_moments, simulate_yosida_path, yosida_gap_estimate, CoefficientSet, Drift, Jump, Model, SimulationGrid,
};
use spde_lab::noise::{
    martingale_check, maximal_inequality_check, maximal_report, ito_isometry_check, poisson_count_check, Integrand,
};
use spde_lab::operator::{
    generator_identity_suite, hille_yosida_verify, semigroup_axiom_residual, yosida_limits,
};
use spde_lab::stability::{
    dissipativity_estimate, exp_stability_check, generator_gap, lyapunov_check, mean_square_decay,
    standard_probe_pairs, standard_probe_states, InitialLaw, LyapunovFunction,
};
use spde_lab::transport::{
    assignment, contraction_estimate, invariant_measure_sampler, wasserstein2_1d, wasserstein2_exact,
    EmpiricalMeasure,
};
use spde_lab::{DiagonalGenerator, MarkMeasure, StateVector};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: u32, name: &str, pass: bool, elapsed: Duration, limit_s: Option<f64>, detail: &str) -> bool {
    let in_time = limit_s.is_none_or(|l| elapsed.as_secs_f64() < l);
    let ok = pass && in_time;
    let limit = limit_s.map(|l| format!(" < {l} s")).unwrap_or_default();
    let line = format!(
        "acceptance {id:>2} {name}: {} ({:.2} s{limit}; {detail})\n",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    ok
}

fn scalar(a: f64) -> DiagonalGenerator {
    DiagonalGenerator::new(vec![a]).unwrap()
}

fn additive(m: &MarkMeasure) -> CoefficientSet {
    CoefficientSet::new(1, Drift::Zero, Jump::Additive { map: vec![vec![1.0]] }, m).unwrap()
}

fn multiplicative(dim: usize, m: &MarkMeasure, scale: f64) -> CoefficientSet {
    CoefficientSet::new(dim, Drift::Zero, Jump::Multiplicative { scale }, m).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn criterion_01_operator_certification() {
    let start = Instant::now();
    let g = DiagonalGenerator::laplacian_dirichlet(8).unwrap();
    let x: StateVector = (1..=8).map(|k| 1.0 / k as f64).collect::<Vec<_>>().into();
    let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.05).collect();
    let axioms = semigroup_axiom_residual(&g, &x, &times).unwrap();

    let lambdas = [1.0, 10.0, 100.0];
    let hy = hille_yosida_verify(&g, &lambdas, 5).unwrap();
    let alpha = -std::f64::consts::PI.powi(2);
    let mut oracle_gap: f64 = 0.0;
    for row in &hy.rows {
        let r = row.power as i32;
        let norm = (1..=8)
            .map(|k| (row.lambda + (k as f64 * std::f64::consts::PI).powi(2)).powi(-r))
            .fold(0.0, f64::max);
        let bound = (row.lambda - alpha).powi(-r);
        oracle_gap = oracle_gap.max(rel(row.norm, norm)).max(rel(row.bound, bound));
    }
    let identities = generator_identity_suite(&g, 1.0, 1.0, &x, 100_000).unwrap();
    let pass = axioms <= 1e-12
        && hy.passed()
        && hy.rows.len() == 15
        && oracle_gap <= 1e-12
        && identities.laplace <= 1e-6;
    let detail = format!(
        "axioms {axioms:.1e}, worst HY slack {:.1e}, oracle gap {oracle_gap:.1e}, Laplace residual {:.1e}",
        hy.worst_slack, identities.laplace
    );
    assert!(report(1, "operator certification", pass, start.elapsed(), Some(1.0), &detail), "{detail}");
}

/// The first/last ratio of the two gaps is `(10 + |a|)/(10⁴ + |a|) > 1e-3`
/// modewise for any `a < 0`, so that clause cannot hold. It is checked
/// literally and reported; the monotonicity clauses are asserted.
#[test]
fn criterion_02_yosida_limits() {
    let start = Instant::now();
    let g = DiagonalGenerator::laplacian_dirichlet(8).unwrap();
    let x = StateVector::filled(8, 1.0);
    let times: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
    let rows = yosida_limits(&g, &x, &[10.0, 1e2, 1e3, 1e4], &times).unwrap();
    let decreasing = |f: fn(&spde_lab::operator::YosidaLimitRow) -> f64| rows.windows(2).all(|w| f(&w[1]) < f(&w[0]));
    let monotone =
        decreasing(|r| r.resolvent_gap) && decreasing(|r| r.generator_gap) && decreasing(|r| r.semigroup_gap);
    let (first, last) = (&rows[0], &rows[rows.len() - 1]);
    let resolvent_ratio = last.resolvent_gap / first.resolvent_gap;
    let generator_ratio = last.generator_gap / first.generator_gap;
    let ratios_ok = resolvent_ratio <= 1e-3 && generator_ratio <= 1e-3;
    let floor = (1..=8)
        .map(|k| {
            let a = (k as f64 * std::f64::consts::PI).powi(2);
            (10.0 + a) / (1e4 + a)
        })
        .fold(f64::INFINITY, f64::min);
    let detail = format!(
        "monotone {monotone}, final/first resolvent {resolvent_ratio:.3e}, generator {generator_ratio:.3e}, \
         required <= 1e-3, modewise floor {floor:.3e}"
    );
    report(2, "Yosida limits", monotone && ratios_ok, start.elapsed(), Some(1.0), &detail);
    assert!(monotone, "{detail}");
    assert!(floor > 1e-3 && resolvent_ratio > floor * (1.0 - 1e-12), "{detail}");
}

/// The literal clause of criterion 2 on the final/first ratio. Ignored: it
/// fails for every generator with negative eigenvalues, see the test above.
#[test]
#[ignore = "final/first ratio is bounded below by (10 + |a|)/(1e4 + |a|) > 1e-3"]
fn criterion_02_ratio_clause() {
    let g = DiagonalGenerator::laplacian_dirichlet(8).unwrap();
    let x = StateVector::filled(8, 1.0);
    let rows = yosida_limits(&g, &x, &[10.0, 1e2, 1e3, 1e4], &[0.0, 1.0]).unwrap();
    assert!(rows[3].resolvent_gap <= 1e-3 * rows[0].resolvent_gap);
    assert!(rows[3].generator_gap <= 1e-3 * rows[0].generator_gap);
}

#[test]
fn criterion_03_noise_validation() {
    let start = Instant::now();
    let (rate, horizon, paths) = (2.0, 1.0, 100_000);
    let m = MarkMeasure::symmetric_pair(rate, 1.0).unwrap();
    let f = Integrand::linear_mark(vec![vec![1.0]], 1.0).unwrap();

    let counts = poisson_count_check(&m, horizon, paths, 31).unwrap();
    let count_err = rel(counts.mean, rate * horizon);
    let iso = ito_isometry_check(&f, &m, horizon, paths, 32).unwrap();
    let iso_oracle = rate * (1.0 - (-2.0 * horizon).exp()) / 2.0;
    let iso_err = rel(iso.second_moment, iso_oracle);

    let times: Vec<f64> = (1..=50).map(|k| horizon * k as f64 / 50.0).collect();
    let mart = martingale_check(&f, &m, &times, paths, 33).unwrap();
    let worst_sigma = mart.rows.iter().map(|r| r.max_sigmas).fold(0.0, f64::max);

    let a = 0.5;
    let g = scalar(a);
    let eps = [0.5, 1.0, 2.0];
    let first = maximal_inequality_check(&g, &f, &m, horizon, eps[0], 20_000, 500, 34).unwrap();
    let mut maximal_ok = true;
    let mut worst_slack = f64::INFINITY;
    for &e in &eps {
        let r = maximal_report(&g, &f, &m, horizon, e, first.suprema.clone()).unwrap();
        let bound = 4.0 * (2.0 * a * horizon).exp() / (e * e) * iso_oracle;
        maximal_ok &= rel(r.bound, bound) <= 1e-9 && r.probability <= r.bound + r.band;
        worst_slack = worst_slack.min(r.bound + r.band - r.probability);
    }
    let pass = count_err <= 0.05 && iso_err <= 0.05 && worst_sigma <= 4.0 && maximal_ok;
    let detail = format!(
        "count err {count_err:.2e}, isometry err {iso_err:.2e}, martingale max {worst_sigma:.2} sigma, \
         maximal slack {worst_slack:.3}"
    );
    assert!(report(3, "noise validation", pass, start.elapsed(), Some(30.0), &detail), "{detail}");
}

#[test]
fn criterion_04_mild_moments() {
    let start = Instant::now();
    let m = MarkMeasure::symmetric_pair(2.0, 1.0).unwrap();
    let g = scalar(-1.0);
    let c = additive(&m);
    let model = Model::new(&g, &c, &m).unwrap();
    let grid = SimulationGrid::new(2.0, 1000).unwrap();
    let xi = 2.0;
    let curve = mild_moments(model, &grid, &StateVector::from(vec![xi]), 100_000, 41).unwrap();
    let (mut mean_err, mut second_err): (f64, f64) = (0.0, 0.0);
    for (k, &t) in curve.times.iter().enumerate() {
        // d/dt E X = -E X,  d/dt E X² = -2 E X² + ∫u² β
        let mean = (-t).exp() * xi;
        let second = xi * xi * (-2.0 * t).exp() + 2.0 * (1.0 - (-2.0 * t).exp()) / 2.0;
        mean_err = mean_err.max(rel(curve.mean[k][0], mean));
        second_err = second_err.max(rel(curve.second_moment[k], second));
    }
    let pass = mean_err <= 0.05 && second_err <= 0.05;
    let detail = format!("max rel err mean {mean_err:.2e}, second moment {second_err:.2e}");
    assert!(report(4, "mild solution moments", pass, start.elapsed(), Some(60.0), &detail), "{detail}");
}

#[test]
fn criterion_05_yosida_gap() {
    let start = Instant::now();
    let ns = [4.0, 16.0, 64.0, 256.0];
    let m = MarkMeasure::symmetric_pair(2.0, 1.0).unwrap();
    let g = scalar(-1.0);
    let zero = CoefficientSet::zero(1, &m).unwrap();
    let linear = Model::new(&g, &zero, &m).unwrap();
    let xi = StateVector::from(vec![2.0]);
    let grid = SimulationGrid::new(1.0, 200).unwrap();
    let exact = yosida_gap_estimate(linear, &grid, &xi, 8, &ns, 51).unwrap();
    let exact_err = exact
        .rows
        .iter()
        .map(|r| (r.gap - (2.0 / (r.n + 1.0)).powi(2)).abs())
        .fold(0.0, f64::max);

    let grid = SimulationGrid::new(1.0, 500).unwrap();
    let add = additive(&m);
    let ou = Model::new(&g, &add, &m).unwrap();
    let additive_curve = yosida_gap_estimate(ou, &grid, &xi, 10_000, &ns, 52).unwrap();
    let mult = multiplicative(1, &m, 1.0);
    let mou = Model::new(&g, &mult, &m).unwrap();
    let multiplicative_curve = yosida_gap_estimate(mou, &grid, &xi, 10_000, &ns, 53).unwrap();
    let pass =
        exact_err <= 1e-10 && additive_curve.strictly_decreasing() && multiplicative_curve.strictly_decreasing();
    let detail = format!(
        "closed form err {exact_err:.1e}, slopes {:.2} (additive) {:.2} (multiplicative)",
        additive_curve.log_slope(),
        multiplicative_curve.log_slope()
    );
    assert!(report(5, "Yosida gap", pass, start.elapsed(), Some(120.0), &detail), "{detail}");
}

#[test]
fn criterion_06_generator_gap() {
    let start = Instant::now();
    let m = MarkMeasure::symmetric_pair(2.0, 1.0).unwrap();
    let g = scalar(-1.0);
    let c = additive(&m);
    let model = Model::new(&g, &c, &m).unwrap();
    let grid = SimulationGrid::new(1.0, 1000).unwrap();
    let xi = StateVector::from(vec![1.0]);
    let h = LyapunovFunction::norm_squared(1);
    let mut gaps = Vec::new();
    for n in [4.0, 16.0, 64.0, 256.0, 1e6] {
        let path = simulate_yosida_path(model, &grid, &xi, spde_lab::RngStream::new(61, 0), n).unwrap();
        gaps.push((n, generator_gap(model, &h, &path, n).unwrap()));
    }
    let decreasing = gaps.windows(2).all(|w| w[1].1 < w[0].1);
    let m2 = m.moment(2).unwrap();
    let last = gaps[gaps.len() - 1].1;
    // additive noise: only the jump term changes, by (1 - r²) ∫u² β with r = n/(n+1)
    let oracle_err = gaps
        .iter()
        .map(|&(n, gap)| rel(gap, (1.0 - (n / (n + 1.0)).powi(2)) * 2.0))
        .fold(0.0, f64::max);
    let pass = decreasing && last <= 1e-5 * m2 && oracle_err <= 1e-6;
    let detail = format!("gap at n=1e6 {last:.3e} vs {:.3e}, oracle rel err {oracle_err:.1e}", 1e-5 * m2);
    assert!(report(6, "generator gap", pass, start.elapsed(), Some(30.0), &detail), "{detail}");
}

#[test]
fn criterion_07_dissipative_stability() {
    let start = Instant::now();
    let g = scalar(-1.0);
    let grid = SimulationGrid::new(1.0, 1000).unwrap();
    let (xi, eta) = (StateVector::from(vec![2.0]), StateVector::from(vec![0.0]));

    let m = MarkMeasure::symmetric_pair(2.0, 1.0).unwrap();
    let add = additive(&m);
    let model = Model::new(&g, &add, &m).unwrap();
    let r = mean_square_decay(model, &xi, &eta, &grid, 2_000, 71).unwrap();
    let coupling_err = r.times.iter().zip(&r.decay).map(|(t, d)| rel(*d, 4.0 * (-2.0 * t).exp())).fold(0.0, f64::max);
    let coupling_variance = r.max_variance;
    let additive_ok = coupling_err <= 1e-12 && coupling_variance <= 1e-24 && r.pass;

    let m1 = MarkMeasure::symmetric_pair(1.0, 1.0).unwrap();
    let mult = multiplicative(1, &m1, 1.0);
    let model = Model::new(&g, &mult, &m1).unwrap();
    let r = mean_square_decay(model, &xi, &eta, &grid, 100_000, 72).unwrap();
    // d/dt D = (2a + λ s² E u²) D with a = -1, λ = s = E u² = 1
    let (a, lambda, s, u2) = (-1.0, 1.0, 1.0, 1.0);
    let oracle_rate = -(2.0 * a + lambda * s * s * u2);
    let rate_err = rel(r.fitted_rate, oracle_rate);
    let mult_ok = rel(r.epsilon, oracle_rate) <= 1e-12 && rate_err <= 0.1 && r.pass;
    let detail = format!(
        "additive err {coupling_err:.1e} var {coupling_variance:.1e}; multiplicative rate {:.4} vs {oracle_rate}",
        r.fitted_rate
    );
    assert!(report(7, "dissipative stability", additive_ok && mult_ok, start.elapsed(), Some(120.0), &detail), "{detail}");
}

#[test]
fn criterion_08_lyapunov_stability() {
    let start = Instant::now();
    let m = MarkMeasure::symmetric_pair(1.0, 1.0).unwrap();
    let lap = DiagonalGenerator::laplacian_dirichlet(4).unwrap();
    let one = scalar(-1.0);
    let catalogue = [
        ("zero", &lap, CoefficientSet::zero(4, &m).unwrap()),
        ("multiplicative", &one, multiplicative(1, &m, 1.0)),
        ("saturating", &lap, CoefficientSet::new(4, Drift::Saturating(-1.0), Jump::Saturating { scale: 1.0 }, &m).unwrap()),
    ];
    let grid = SimulationGrid::new(1.0, 500).unwrap();
    let mut pass = true;
    let mut notes = Vec::new();
    for (name, g, c) in &catalogue {
        let model = Model::new(g, c, &m).unwrap();
        let dim = g.dim();
        let h = LyapunovFunction::norm_squared(dim);
        let ly = lyapunov_check(model, &h, &standard_probe_states(dim, 81)).unwrap();
        let law = InitialLaw::Dirac { point: vec![1.0; dim] };
        let e = exp_stability_check(model, &h, &ly, &law, &grid, 20_000, 82).unwrap();
        let ok = (0..e.times.len())
            .all(|k| e.second_moment[k] <= (e.c2 / e.c1) * (-e.c3 * e.times[k]).exp() * dim as f64 + 3.0 * e.std_err[k]);
        pass &= ly.passed() && e.pass && ok;
        notes.push(format!("{name} c3 {:.3}", e.c3));
    }
    let detail = notes.join(", ");
    assert!(report(8, "Lyapunov stability", pass, start.elapsed(), Some(120.0), &detail), "{detail}");
}

fn brute_force(n: usize, cost: &[f64]) -> f64 {
    fn go(k: usize, n: usize, used: &mut [bool], acc: f64, cost: &[f64], best: &mut f64) {
        if k == n {
            *best = best.min(acc);
            return;
        }
        for j in 0..n {
            if !used[j] {
                used[j] = true;
                go(k + 1, n, used, acc + cost[k * n + j], cost, best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(0, n, &mut vec![false; n], 0.0, cost, &mut best);
    best
}

#[test]
fn criterion_09_transport_exactness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(91);
    let mut worst: f64 = 0.0;
    for instance in 0..100 {
        let n = 1 + instance % 7;
        let cost: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>() * 10.0).collect();
        let a = assignment::solve(n, &cost);
        let best = brute_force(n, &cost);
        let realised: f64 = a.columns.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
        worst = worst.max((a.total_cost - best).abs()).max((realised - best).abs());
    }
    let mut worst_1d: f64 = 0.0;
    for n in [1, 5, 64, 300] {
        let a: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 3.0).collect();
        let mu = EmpiricalMeasure::new(a.iter().map(|v| StateVector::from(vec![*v])).collect()).unwrap();
        let nu = EmpiricalMeasure::new(b.iter().map(|v| StateVector::from(vec![*v])).collect()).unwrap();
        let exact = wasserstein2_exact(&mu, &nu).unwrap();
        worst_1d = worst_1d.max((wasserstein2_1d(&a, &b).unwrap() - exact.cost).abs());
    }
    let pass = worst <= 1e-12 && worst_1d <= 1e-12;
    let detail = format!("assignment vs brute force {worst:.1e}, 1-d vs exact {worst_1d:.1e}");
    assert!(report(9, "transport exactness", pass, start.elapsed(), Some(10.0), &detail), "{detail}");
}

#[test]
fn criterion_10_wasserstein_contraction() {
    let start = Instant::now();
    let m = MarkMeasure::symmetric_pair(2.0, 1.0).unwrap();
    let g = scalar(-1.0);
    let c = additive(&m);
    let model = Model::new(&g, &c, &m).unwrap();
    let d = dissipativity_estimate(model, &standard_probe_pairs(1, 20, 101)).unwrap();
    let epsilon = 2.0 * d.analytic - c.lipschitz_jump;
    let rho = InitialLaw::Dirac { point: vec![2.0] };
    let rho_tilde = InitialLaw::Dirac { point: vec![0.0] };
    let t_list = [0.0, 0.5, 1.0, 1.5, 2.0, 3.0];
    let r = contraction_estimate(model, &rho, &rho_tilde, &t_list, 256, 0.01, epsilon, 102).unwrap();
    let coupled_err = r.rows.iter().map(|row| rel(row.coupled, 2.0 * (-row.time).exp())).fold(0.0, f64::max);
    let independent_ok = r.rows.iter().all(|row| row.passed());

    let sample = invariant_measure_sampler(model, &StateVector::from(vec![0.0]), 10.0, 1.0, 20_000, 0.01, 103).unwrap();
    // stationary E X² = ∫u² β / (2|a|)
    let oracle = 2.0 / 2.0;
    let second = sample.measure.second_moment();
    let inv_err = rel(second, oracle);
    let pass = (epsilon - 2.0).abs() <= 1e-12 && coupled_err <= 1e-9 && independent_ok && inv_err <= 0.1;
    let detail = format!(
        "coupled vs 2e^-t {coupled_err:.1e}, independent rows within bands {independent_ok}, \
         invariant E X^2 {second:.4} vs {oracle}"
    );
    assert!(report(10, "Wasserstein contraction", pass, start.elapsed(), Some(300.0), &detail), "{detail}");
}

const CATALOGUE: &[&str] = &[
    r#"{"experiment":"certify_operator","model":{"family":"laplacian_dirichlet","n":4}}"#,
    r#"{"experiment":"noise_checks","model":{"family":"explicit","eigenvalues":[-1]},
        "noise":{"rate":2,"marks":{"family":"atoms","points":[[1],[-1]],"weights":[1,1]}},"mc":{"paths":2000}}"#,
    r#"{"experiment":"simulate","model":{"family":"laplacian_dirichlet","n":2},
        "coefficients":{"preset":"saturating","scale":1},
        "noise":{"rate":1,"marks":{"family":"gaussian","mean":[0],"variance":[1]}},
        "grid":{"T":1,"steps":100},"mc":{"paths":700,"seed":5},"params":{"report_points":10}}"#,
    r#"{"experiment":"yosida_gap","model":{"family":"explicit","eigenvalues":[-1]},
        "coefficients":{"preset":"linear","drift_scale":0,"jump_scale":1},
        "noise":{"rate":1,"marks":{"family":"atoms","points":[[1],[-1]],"weights":[1,1]}},
        "grid":{"T":1,"steps":100},"mc":{"paths":700}}"#,
    r#"{"experiment":"stability","model":{"family":"explicit","eigenvalues":[-1]},
        "coefficients":{"preset":"linear","drift_scale":0,"jump_scale":1},
        "noise":{"rate":1,"marks":{"family":"atoms","points":[[1],[-1]],"weights":[1,1]}},
        "grid":{"T":1,"steps":100},"mc":{"paths":700},"params":{"report_points":10}}"#,
    r#"{"experiment":"contraction","model":{"family":"explicit","eigenvalues":[-1]},
        "coefficients":{"preset":"additive","mark_map":[[1]]},
        "noise":{"rate":2,"marks":{"family":"atoms","points":[[1],[-1]],"weights":[1,1]}},
        "grid":{"T":1,"steps":100},"params":{"points":64,"initial":[2],"eta":[0]}}"#,
    r#"{"experiment":"invariant","model":{"family":"explicit","eigenvalues":[-1]},
        "coefficients":{"preset":"additive","mark_map":[[1]]},
        "noise":{"rate":2,"marks":{"family":"atoms","points":[[1],[-1]],"weights":[1,1]}},
        "grid":{"T":1,"steps":100},"params":{"samples":400,"burn_in":5,"gap":0.5,"t_list":[0,0.5,1]}}"#,
];

fn run_in(text: &str, dir: &std::path::Path, threads: usize) -> (String, String) {
    let mut config = parse_config(text).unwrap();
    config.output.directory = dir.to_path_buf();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let summary = pool.install(|| execute_config(config)).unwrap();
    let csv = std::fs::read_to_string(&summary.csv).unwrap();
    ResultTable::parse_csv(&csv).unwrap();
    let mut echo: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("config.json")).unwrap()).unwrap();
    echo["output"]["directory"] = serde_json::Value::Null;
    (csv, echo.to_string())
}

#[test]
fn criterion_11_reproducibility() {
    let start = Instant::now();
    let root = tempfile::tempdir().unwrap();
    let mut pass = true;
    let mut mismatched = Vec::new();
    for (i, text) in CATALOGUE.iter().enumerate() {
        let a = run_in(text, &root.path().join(format!("{i}a")), 4);
        let b = run_in(text, &root.path().join(format!("{i}b")), 4);
        let c = run_in(text, &root.path().join(format!("{i}c")), 1);
        if a != b || a != c {
            pass = false;
            mismatched.push(i);
        }
    }
    let detail = format!("{} experiments, byte mismatches {mismatched:?}", CATALOGUE.len());
    assert!(report(11, "reproducibility", pass, start.elapsed(), None, &detail), "{detail}");
}
