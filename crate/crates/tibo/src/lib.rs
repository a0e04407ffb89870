//! Spectral solver for nonlinear two-point boundary-value problems.
//!
//! Given a second-order ODE `v″ = f(x, v, v′)` on an interval `[s, e]`
//! with affine two-point boundary conditions, the solver represents the
//! *second derivative* of the unknown as an odd trigonometric polynomial
//! on a padded symmetric interval, integrates that representation twice
//! in closed form, fixes the two integration constants from the boundary
//! conditions, and minimizes the mean squared collocation residual over
//! the trig-polynomial values at the grid nodes. All series assembly runs
//! through FFTs, so one objective/gradient evaluation costs `O(N log N)`.
//!
//! What you get out is not a table of values but a smooth closed-form
//! object: [`TiboSolution`] evaluates the solution, its derivative, and
//! its second derivative anywhere in the interval.
//!
//! # Quick start
//!
//! ```
//! use std::f64::consts::FRAC_PI_2;
//! use tibo::{
//!     make_grid_default_delta, solve, BoundaryConditions, OdeProblem, OptimizerOptions,
//!     SolverState,
//! };
//!
//! // v″ = -v on [0, π/2] with v(0) = 0 and v(π/2) = 1; exact solution sin(x).
//! let problem = OdeProblem::new(
//!     (0.0, FRAC_PI_2),
//!     |_x, v, _u| -v,
//!     |_x, _v, _u| -1.0,
//!     |_x, _v, _u| 0.0,
//! );
//! let bc = BoundaryConditions::new([[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]], 0.0, 1.0)?;
//! let grid = make_grid_default_delta(0.0, FRAC_PI_2, 5)?;
//! let init = SolverState::zeros(grid.modes);
//! let sol = solve(&problem, &bc, &grid, &init, None, &OptimizerOptions::default())?;
//!
//! assert!((sol.value(1.0) - 1.0_f64.sin()).abs() < 1e-4);
//! assert!(sol.value(0.0).abs() < 1e-9); // boundary rows hold by construction
//! assert!((sol.value(FRAC_PI_2) - 1.0).abs() < 1e-9);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```
//!
//! # Module map
//!
//! * [`trig`] — odd trigonometric polynomials, their exact derivatives and
//!   antiderivatives, and FFT-based interpolation from grid samples.
//! * [`extension`] — grid geometry on the padded symmetric interval and the
//!   smooth cutoff that extends the right-hand side off the problem domain.
//! * [`solver`] — the core pipeline: series coefficients, boundary sums,
//!   integration constants, objective, analytic gradient, and [`solve`].
//! * [`optimizer`] — L-BFGS with Armijo backtracking plus the quadratic
//!   penalty layer for affine inequality constraints.
//! * [`shooting`] — a classic RK4 + shooting solver used as an independent
//!   benchmark.
//! * [`harness`] — the reproducible experiment harness: manufactured
//!   problem families, scenario grids, run classification, CSV reports.
//! * [`verify`] — finite-difference gradient oracle and interpolation
//!   convergence studies.

#![forbid(unsafe_code)]
#![warn(missing_docs)]

mod fft;

pub mod extension;
pub mod harness;
pub mod optimizer;
pub mod shooting;
pub mod solver;
pub mod trig;
pub mod verify;

pub use extension::{
    extend_rhs, make_grid, make_grid_default_delta, CutoffFn, ExtendedRhs, GridError, GridSpec,
};
pub use harness::{
    build_example, classify, emit_report, make_scenarios, run_batch, run_scenario, summary_text,
    to_csv, BatchConfig, BatchReport, BcType, ExampleFamily, RunReport, RunStatus, ScenarioSpec,
    BENCH_STEPS,
};
pub use optimizer::{
    minimize, penalized, AffineScalar, ClosureObjective, Constraint, ConstraintMaps, ConstraintSet,
    MinimizeResult, Objective, OptimStatus, OptimizeError, OptimizerOptions,
};
pub use shooting::{rk4_ivp, shoot_dirichlet, shoot_mixed, IvpResult, Rhs, ShootingError};
pub use solver::{
    boundary_sums, coeffs_from_z, constraint_maps, gradient, gradient_terms, objective,
    reconstruct_u, reconstruct_v, residual_max, solve, BoundaryConditions, BoundarySums,
    OdeProblem, SolverError, SolverState, TiboSolution,
};
pub use trig::{odd_interpolate, GridSamples, TrigError, TrigPolyOdd};
pub use verify::{
    finite_difference_gradient, interpolation_order_study, order_table, relative_mismatch,
    run_gradient_check, GradCheckReport, OrderRow, OrderStudy,
};

// Compile and run every fenced Rust snippet in the guide as a doc test so
// the book can never drift from the API.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            mod $name {}
        };
    }

    chapter!(introduction, "../../../book/src/introduction.md");
    chapter!(interpolation, "../../../book/src/interpolation.md");
    chapter!(solver_pipeline, "../../../book/src/solver-pipeline.md");
    chapter!(constraints, "../../../book/src/constraints.md");
    chapter!(benchmarks, "../../../book/src/benchmarks.md");
    chapter!(cli, "../../../book/src/cli.md");
}
