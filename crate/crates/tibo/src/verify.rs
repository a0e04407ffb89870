//! Independent verification utilities.
//!
//! Two tools live here, both deliberately *not* sharing code with the
//! fast paths they certify:
//!
//! * a central finite-difference gradient oracle plus a randomized check
//!   of the solver's analytic gradient against it (the authoritative
//!   arbiter for every FFT-assembled gradient constant in this crate), and
//! * an empirical convergence-order study of odd trigonometric
//!   interpolation on closed-form test functions of known smoothness.

use crate::harness::{BcType, ExampleFamily};
use crate::solver::{gradient, objective, SolverError, SolverState};
use crate::trig::{odd_interpolate, GridSamples, TrigError};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

/// Central finite-difference gradient of a scalar function.
pub fn finite_difference_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    (0..x.len())
        .map(|t| {
            let mut plus = x.to_vec();
            plus[t] += step;
            let mut minus = x.to_vec();
            minus[t] -= step;
            (f(&plus) - f(&minus)) / (2.0 * step)
        })
        .collect()
}

/// Guarded per-coordinate relative mismatch between an analytic gradient
/// and its finite-difference estimate:
/// `|g_t - fd_t| / max(|g_t|, |fd_t|, 1e-3·‖fd‖∞, 1e-12)`.
/// Returns the worst value and its coordinate.
pub fn relative_mismatch(analytic: &[f64], fd: &[f64]) -> (f64, usize) {
    let inf: f64 = fd.iter().fold(0.0, |a: f64, b| a.max(b.abs()));
    let floor = (1e-3 * inf).max(1e-12);
    let mut worst = (0.0_f64, 0_usize);
    for (t, (&g, &gfd)) in analytic.iter().zip(fd).enumerate() {
        let denom = g.abs().max(gfd.abs()).max(floor);
        let rel = (g - gfd).abs() / denom;
        if rel > worst.0 {
            worst = (rel, t);
        }
    }
    worst
}

/// Per-coordinate relative tolerance of the gradient check.
pub const GRAD_CHECK_TOL: f64 = 1e-6;
/// Step of the central difference.
pub const GRAD_CHECK_STEP: f64 = 1e-6;

/// Outcome of a randomized gradient check.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Number of optimization variables (`M = 2^q`).
    pub modes: usize,
    /// Number of random states audited.
    pub trials: usize,
    /// Relative-mismatch threshold the check ran with.
    pub tolerance: f64,
    /// Largest relative mismatch over all trials and coordinates.
    pub worst_rel: f64,
    /// Trial index of the worst mismatch.
    pub worst_trial: usize,
    /// Coordinate index of the worst mismatch.
    pub worst_coord: usize,
    /// Whether the worst mismatch stayed below the tolerance.
    pub passed: bool,
}

impl GradCheckReport {
    /// One-line human-readable summary.
    pub fn line(&self) -> String {
        format!(
            "gradcheck m={} trials={}: worst rel {:.3e} at trial {} coord {} -> {}",
            self.modes,
            self.trials,
            self.worst_rel,
            self.worst_trial,
            self.worst_coord,
            if self.passed { "pass" } else { "FAIL" }
        )
    }
}

/// Checks the analytic solver gradient against central finite differences
/// on the benchmark family at θ = π/2, cycling through the three boundary
/// families across trials. States are drawn uniformly from `[-1, 1]^M`
/// with a seeded generator, so runs are reproducible.
pub fn run_gradient_check(
    q: u32,
    trials: usize,
    seed: u64,
) -> Result<GradCheckReport, SolverError> {
    let family = ExampleFamily::new(FRAC_PI_2);
    let problem = family.problem();
    let grid = family.grid(q)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = (0.0_f64, 0_usize, 0_usize);
    for trial in 0..trials {
        let bc_type = [BcType::Neumann, BcType::Dirichlet, BcType::Mix][trial % 3];
        let bc = family.boundary(bc_type);
        let z: Vec<f64> = (0..grid.modes).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let state = SolverState::new(z.clone())?;
        let analytic = gradient(&state, &problem, &bc, &grid)?;
        let value = |zz: &[f64]| {
            objective(
                &SolverState::new(zz.to_vec()).expect("perturbed state is finite"),
                &problem,
                &bc,
                &grid,
            )
            .expect("objective is finite near a finite state")
        };
        let fd = finite_difference_gradient(&value, &z, GRAD_CHECK_STEP);
        let (rel, coord) = relative_mismatch(&analytic, &fd);
        if rel > worst.0 {
            worst = (rel, trial, coord);
        }
    }
    Ok(GradCheckReport {
        modes: grid.modes,
        trials,
        tolerance: GRAD_CHECK_TOL,
        worst_rel: worst.0,
        worst_trial: worst.1,
        worst_coord: worst.2,
        passed: worst.0 <= GRAD_CHECK_TOL,
    })
}

/// One resolution row of the convergence study.
#[derive(Debug, Clone, Copy)]
pub struct OrderRow {
    /// Sample count `N`.
    pub n: usize,
    /// Max interpolation error over a dense sweep of the period.
    pub max_err: f64,
}

/// Empirical interpolation convergence for one test function.
#[derive(Debug, Clone)]
pub struct OrderStudy {
    /// Human-readable name of the test function.
    pub label: &'static str,
    /// Smoothness exponent `K`: the function has a bounded `(K+1)`-th
    /// derivative, so the error should shrink like `N^-K`.
    pub expected_order: f64,
    /// True for the pure-trig witness that interpolation must resolve to
    /// rounding once `M` exceeds its bandwidth.
    pub spectral: bool,
    /// One row per sample count, coarsest first.
    pub rows: Vec<OrderRow>,
    /// `log2(err_i / err_{i+1})` between consecutive (doubled) rows.
    pub observed_orders: Vec<f64>,
}

fn bernoulli3(t: f64) -> f64 {
    t * t * t - 1.5 * t * t + 0.5 * t
}

fn bernoulli5(t: f64) -> f64 {
    let t2 = t * t;
    t2 * t2 * t - 2.5 * t2 * t2 + 5.0 / 3.0 * t2 * t - t / 6.0
}

/// Closed form of `Σ_j (-1)^j sin(jπx/b)/j³` on `[-b, b]`: an odd periodic
/// function with two bounded derivatives (its second derivative jumps at
/// the seam), so `K = 2`.
pub fn sine_series_cubic(b: f64, x: f64) -> f64 {
    let t = (x + b) / (2.0 * b);
    2.0 * PI.powi(3) / 3.0 * bernoulli3(t)
}

/// Closed form of `Σ_j (-1)^j sin(jπx/b)/j⁵`: four bounded derivatives,
/// `K = 4`.
pub fn sine_series_quintic(b: f64, x: f64) -> f64 {
    let t = (x + b) / (2.0 * b);
    -2.0 * PI.powi(5) / 15.0 * bernoulli5(t)
}

/// `sin³(πx/b) = (3sin(πx/b) - sin(3πx/b))/4`: inside the interpolation
/// space once `M ≥ 4`.
pub fn sine_cubed(b: f64, x: f64) -> f64 {
    (PI * x / b).sin().powi(3)
}

fn dense_max_error(f: &dyn Fn(f64) -> f64, n: usize, half_period: f64) -> Result<f64, TrigError> {
    let samples = GridSamples::from_fn(n, half_period, f)?;
    let poly = odd_interpolate(&samples, half_period)?;
    // Dense sweep with a spacing incommensurate with the grid so off-node
    // behavior dominates.
    let sweeps = 1237;
    let mut worst = 0.0_f64;
    for i in 0..=sweeps {
        let x = -half_period + 2.0 * half_period * i as f64 / sweeps as f64;
        worst = worst.max((poly.eval(x) - f(x)).abs());
    }
    Ok(worst)
}

type SweepFn = Box<dyn Fn(f64) -> f64>;

/// Runs the convergence study over the given sample counts (each a power
/// of two; consecutive entries are expected to double).
pub fn interpolation_order_study(sizes: &[usize]) -> Result<Vec<OrderStudy>, TrigError> {
    let b = 2.0;
    let cases: [(&'static str, f64, bool, SweepFn); 3] = [
        (
            "cubic-decay series (K=2)",
            2.0,
            false,
            Box::new(move |x| sine_series_cubic(b, x)),
        ),
        (
            "quintic-decay series (K=4)",
            4.0,
            false,
            Box::new(move |x| sine_series_quintic(b, x)),
        ),
        (
            "sin^3 witness (exact)",
            f64::INFINITY,
            true,
            Box::new(move |x| sine_cubed(b, x)),
        ),
    ];
    let mut studies = Vec::with_capacity(cases.len());
    for (label, expected_order, spectral, f) in &cases {
        let mut rows = Vec::with_capacity(sizes.len());
        for &n in sizes {
            rows.push(OrderRow {
                n,
                max_err: dense_max_error(f, n, b)?,
            });
        }
        let observed_orders: Vec<f64> = rows
            .windows(2)
            .map(|w| (w[0].max_err / w[1].max_err).log2())
            .collect();
        studies.push(OrderStudy {
            label,
            expected_order: *expected_order,
            spectral: *spectral,
            rows,
            observed_orders,
        });
    }
    Ok(studies)
}

/// Renders the study as an aligned text table.
pub fn order_table(studies: &[OrderStudy]) -> String {
    let mut out = String::new();
    for study in studies {
        writeln!(out, "{}", study.label).expect("writing to a String cannot fail");
        writeln!(out, "  {:>6} {:>13} {:>9}", "N", "max_err", "order")
            .expect("writing to a String cannot fail");
        for (i, row) in study.rows.iter().enumerate() {
            let order = if i == 0 {
                "-".to_string()
            } else {
                format!("{:.2}", study.observed_orders[i - 1])
            };
            writeln!(out, "  {:>6} {:>13.3e} {:>9}", row.n, row.max_err, order)
                .expect("writing to a String cannot fail");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms_match_truncated_series() {
        let b = 2.0;
        for &x in &[-1.3, -0.5, 0.4, 1.9] {
            let mut s3 = 0.0;
            let mut s5 = 0.0;
            for j in 1..20_000usize {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                let term = (j as f64 * PI * x / b).sin();
                s3 += sign * term / (j as f64).powi(3);
                s5 += sign * term / (j as f64).powi(5);
            }
            assert!((s3 - sine_series_cubic(b, x)).abs() < 1e-7, "cubic at {x}");
            assert!(
                (s5 - sine_series_quintic(b, x)).abs() < 1e-10,
                "quintic at {x}"
            );
        }
    }

    #[test]
    fn cubic_series_frozen_value() {
        // At x = -b/2 the cubic series equals Σ_{k odd} (-1)^((k-1)/2)/k³
        // ≈ 0.9689461463 (the classic alternating odd-cube sum).
        let b = 2.0;
        assert!((sine_series_cubic(b, -b / 2.0) - 0.968_946_146_3).abs() < 1e-9);
    }

    #[test]
    fn spectral_witness_interpolates_exactly() {
        let err = dense_max_error(&|x| sine_cubed(2.0, x), 16, 2.0).unwrap();
        assert!(err < 1e-13, "sin^3 error {err}");
    }

    #[test]
    fn study_orders_match_smoothness() {
        let studies = interpolation_order_study(&[32, 64, 128]).unwrap();
        let cubic = &studies[0];
        for &p in &cubic.observed_orders {
            assert!(p >= cubic.expected_order - 0.5, "cubic order {p}");
        }
        let quintic = &studies[1];
        for &p in &quintic.observed_orders {
            assert!(p >= quintic.expected_order - 0.5, "quintic order {p}");
        }
        assert!(studies[2].rows[0].max_err < 1e-12);
    }

    #[test]
    fn finite_differences_recover_quadratic_gradient() {
        let f = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let x = vec![0.3, -1.7, 2.2];
        let fd = finite_difference_gradient(&f, &x, 1e-6);
        for (g, want) in fd.iter().zip([0.6, -3.4, 4.4]) {
            assert!((g - want).abs() < 1e-8);
        }
    }

    #[test]
    fn mismatch_guards_handle_zero_gradients() {
        let (rel, _) = relative_mismatch(&[0.0, 0.0], &[0.0, 0.0]);
        assert_eq!(rel, 0.0);
        // A coordinate that is tiny relative to the gradient scale is
        // judged against the guarded floor, not its own magnitude.
        let (rel, coord) = relative_mismatch(&[1.0, 1e-15], &[1.0, 0.0]);
        assert!(rel < 1e-11);
        assert_eq!(coord, 1);
    }

    #[test]
    fn quick_gradient_check_passes() {
        let report = run_gradient_check(3, 6, 42).unwrap();
        assert!(report.passed, "{}", report.line());
        assert_eq!(report.modes, 8);
    }
}
