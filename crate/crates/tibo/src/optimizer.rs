//! Deterministic unconstrained minimization and a quadratic-penalty layer
//! for the two constraint shapes the solver supports.
//!
//! The minimizer is a limited-memory quasi-Newton method (two-loop recursion
//! over a bounded history of curvature pairs) with an Armijo backtracking
//! line search. It is deterministic: no randomness, no parallelism, and a
//! fixed evaluation order, so identical inputs produce identical iterates.
//!
//! Constraints are handled by an exterior quadratic penalty. Both supported
//! constraints are affine in the optimization variables, and the caller
//! supplies those affine maps explicitly, so the penalty needs no access to
//! solver internals. When every constraint is strictly satisfied the
//! penalized objective returns the base value unchanged (no `+ 0.0`
//! arithmetic), so constrained and unconstrained runs follow bitwise
//! identical trajectories until a constraint activates.

use std::collections::VecDeque;
use thiserror::Error;

/// Errors from the minimizer.
#[derive(Debug, Error, PartialEq)]
pub enum OptimizeError {
    /// The objective must be finite at the initial point.
    #[error("objective is not finite at the initial point (value {0})")]
    NonFiniteInitial(f64),
    /// The initial point may not be empty.
    #[error("initial point may not be empty")]
    EmptyInitialPoint,
}

/// Termination status of a minimization run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimStatus {
    /// Gradient infinity norm reached `grad_tol`.
    Converged,
    /// Progress exhausted: the line search failed or the objective decrease
    /// fell below `obj_tol` before the gradient tolerance was met.
    Stalled,
    /// Iteration budget exhausted.
    IterationCap,
}

impl std::fmt::Display for OptimStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OptimStatus::Converged => "converged",
            OptimStatus::Stalled => "stalled",
            OptimStatus::IterationCap => "iteration_cap",
        })
    }
}

/// Tuning knobs for [`minimize`].
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerOptions {
    /// Iteration budget.
    pub max_iters: usize,
    /// Terminate (converged) when `‖∇f‖_∞` falls to this level.
    pub grad_tol: f64,
    /// Terminate (stalled) when the relative objective decrease of an
    /// accepted step falls below this level.
    pub obj_tol: f64,
    /// Number of curvature pairs retained by the two-loop recursion.
    pub memory: usize,
    /// Armijo sufficient-decrease constant.
    pub armijo_c: f64,
    /// Step shrink factor of the backtracking line search.
    pub backtrack_factor: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            max_iters: 50_000,
            grad_tol: 1e-12,
            obj_tol: 1e-16,
            memory: 10,
            armijo_c: 1e-4,
            backtrack_factor: 0.5,
        }
    }
}

/// Result of a minimization run.
#[derive(Debug, Clone)]
pub struct MinimizeResult {
    /// Final iterate.
    pub x: Vec<f64>,
    /// Objective at the final iterate.
    pub value: f64,
    /// Gradient infinity norm at the final iterate.
    pub grad_inf: f64,
    /// Number of accepted iterations.
    pub iterations: usize,
    /// Why the run stopped.
    pub status: OptimStatus,
    /// Objective value at the start and after each accepted step
    /// (non-increasing by construction).
    pub objective_trace: Vec<f64>,
}

/// A differentiable objective. `value` may return `+∞` to signal an
/// infeasible trial point; the line search treats that as a rejected step.
pub trait Objective {
    /// Objective value.
    fn value(&self, x: &[f64]) -> f64;
    /// Objective value and gradient together (they usually share work).
    fn value_grad(&self, x: &[f64]) -> (f64, Vec<f64>);
}

/// Adapts a pair of closures to [`Objective`].
pub struct ClosureObjective<F, G>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    value_fn: F,
    grad_fn: G,
}

impl<F, G> ClosureObjective<F, G>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    /// Wraps `value` and `gradient` closures.
    pub fn new(value_fn: F, grad_fn: G) -> Self {
        Self { value_fn, grad_fn }
    }
}

impl<F, G> Objective for ClosureObjective<F, G>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    fn value(&self, x: &[f64]) -> f64 {
        (self.value_fn)(x)
    }

    fn value_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        ((self.value_fn)(x), (self.grad_fn)(x))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |a, &x| a.max(x.abs()))
}

fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Two-loop recursion: applies the implicit inverse-Hessian estimate to `g`.
fn two_loop(history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, g: &[f64]) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
        let beta = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - beta) * si;
        }
    }
    q
}

const MIN_STEP: f64 = 1e-20;
const CURVATURE_FLOOR: f64 = 1e-10;

/// Minimizes `obj` from `x0`.
///
/// Terminates as `Converged` when the gradient infinity norm reaches
/// `grad_tol`, as `Stalled` when an accepted step improves the objective by
/// less than `obj_tol` (relative) or the line search cannot find an
/// acceptable step, and as `IterationCap` when the budget runs out.
/// Non-finite trial values during the line search force step rejection;
/// a non-finite value at `x0` is an error.
pub fn minimize<O: Objective + ?Sized>(
    obj: &O,
    x0: &[f64],
    opts: &OptimizerOptions,
) -> Result<MinimizeResult, OptimizeError> {
    if x0.is_empty() {
        return Err(OptimizeError::EmptyInitialPoint);
    }
    let mut x = x0.to_vec();
    let (mut f, mut g) = obj.value_grad(&x);
    if !f.is_finite() {
        return Err(OptimizeError::NonFiniteInitial(f));
    }
    let mut trace = vec![f];
    let mut grad_inf = inf_norm(&g);
    if grad_inf <= opts.grad_tol {
        return Ok(MinimizeResult {
            x,
            value: f,
            grad_inf,
            iterations: 0,
            status: OptimStatus::Converged,
            objective_trace: trace,
        });
    }

    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    for iter in 1..=opts.max_iters {
        // Search direction, falling back to steepest descent whenever the
        // quasi-Newton direction is unusable.
        let mut used_fallback = history.is_empty();
        let mut dir = {
            let mut d = two_loop(&history, &g);
            for di in d.iter_mut() {
                *di = -*di;
            }
            d
        };
        let mut slope = dot(&g, &dir);
        if slope >= 0.0 || !slope.is_finite() {
            history.clear();
            used_fallback = true;
            dir = g.iter().map(|v| -v).collect();
            slope = dot(&g, &dir);
        }

        // Armijo backtracking, with one retry along steepest descent if the
        // quasi-Newton direction finds no acceptable step.
        let mut accepted: Option<(Vec<f64>, f64)> = None;
        loop {
            let mut alpha = if used_fallback {
                (1.0 / grad_inf).min(1.0)
            } else {
                1.0
            };
            while alpha >= MIN_STEP {
                let xt: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + alpha * d).collect();
                let ft = obj.value(&xt);
                if ft.is_finite() && ft <= f + opts.armijo_c * alpha * slope {
                    accepted = Some((xt, ft));
                    break;
                }
                alpha *= opts.backtrack_factor;
            }
            if accepted.is_some() || used_fallback {
                break;
            }
            history.clear();
            used_fallback = true;
            dir = g.iter().map(|v| -v).collect();
            slope = dot(&g, &dir);
        }

        let Some((xt, ft)) = accepted else {
            return Ok(MinimizeResult {
                x,
                value: f,
                grad_inf,
                iterations: iter,
                status: OptimStatus::Stalled,
                objective_trace: trace,
            });
        };

        let (_, gt) = obj.value_grad(&xt);
        let s: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy.is_finite() && sy > CURVATURE_FLOOR * norm2(&s) * norm2(&y) {
            history.push_back((s, y, 1.0 / sy));
            if history.len() > opts.memory {
                history.pop_front();
            }
        }

        let f_prev = f;
        x = xt;
        f = ft;
        g = gt;
        grad_inf = inf_norm(&g);
        trace.push(f);

        if grad_inf <= opts.grad_tol {
            return Ok(MinimizeResult {
                x,
                value: f,
                grad_inf,
                iterations: iter,
                status: OptimStatus::Converged,
                objective_trace: trace,
            });
        }
        if f_prev - f <= opts.obj_tol * f_prev.abs().max(1.0) {
            return Ok(MinimizeResult {
                x,
                value: f,
                grad_inf,
                iterations: iter,
                status: OptimStatus::Stalled,
                objective_trace: trace,
            });
        }
    }

    Ok(MinimizeResult {
        x,
        value: f,
        grad_inf,
        iterations: opts.max_iters,
        status: OptimStatus::IterationCap,
        objective_trace: trace,
    })
}

/// A scalar quantity that is affine in the optimization variables:
/// `value(z) = constant + gradient·z`.
#[derive(Debug, Clone)]
pub struct AffineScalar {
    /// Value at `z = 0`.
    pub constant: f64,
    /// Constant gradient vector.
    pub gradient: Vec<f64>,
}

impl AffineScalar {
    /// Evaluates the affine map.
    pub fn value(&self, z: &[f64]) -> f64 {
        self.constant + dot(&self.gradient, z)
    }
}

/// The affine maps a constrained solve needs: the solution derivative at the
/// left boundary and the solution values at the grid nodes inside `[s, e]`.
/// Produced by the solver, consumed by the penalty layer.
#[derive(Debug, Clone)]
pub struct ConstraintMaps {
    /// `u(s)` as an affine function of the optimization variables.
    pub derivative_at_s: AffineScalar,
    /// `v(x_k)` at each grid node of `[s, e]`, each affine in the variables.
    pub interval_values: Vec<AffineScalar>,
}

/// One constraint on the solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Constraint {
    /// `|u(s) - center| <= radius`: confine the solution derivative at the
    /// left boundary to a window.
    DerivativeWindow {
        /// Window center.
        center: f64,
        /// Window half-width (must be positive).
        radius: f64,
    },
    /// `v(x_k) >= level` at every grid node inside `[s, e]`.
    LowerBound {
        /// The floor imposed on solution values.
        level: f64,
    },
}

/// A set of constraints plus the exterior-penalty schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    /// The constraints to enforce.
    pub constraints: Vec<Constraint>,
    /// Initial quadratic penalty weight.
    pub penalty_weight: f64,
    /// Multiplier applied to the weight while violations persist
    /// (never below 1, so the weight never decreases).
    pub weight_growth: f64,
}

impl ConstraintSet {
    /// A set with the default penalty schedule (weight `1e4`, growth `10`).
    pub fn new(constraints: Vec<Constraint>) -> Self {
        Self {
            constraints,
            penalty_weight: 1e4,
            weight_growth: 10.0,
        }
    }

    /// Largest violation across all constraints at `z` (0 when feasible).
    pub fn max_violation(&self, maps: &ConstraintMaps, z: &[f64]) -> f64 {
        let mut worst = 0.0_f64;
        for c in &self.constraints {
            match *c {
                Constraint::DerivativeWindow { center, radius } => {
                    let u = maps.derivative_at_s.value(z);
                    worst = worst.max((u - center).abs() - radius);
                }
                Constraint::LowerBound { level } => {
                    for row in &maps.interval_values {
                        worst = worst.max(level - row.value(z));
                    }
                }
            }
        }
        worst.max(0.0)
    }
}

/// The base objective plus `weight · Σ violation²`.
pub struct PenalizedObjective<'a, O: Objective + ?Sized> {
    base: &'a O,
    maps: &'a ConstraintMaps,
    constraints: &'a [Constraint],
    weight: f64,
}

/// Wraps `base` with a quadratic penalty at a fixed weight. The affine maps
/// describe how the constrained quantities depend on the variables.
pub fn penalized<'a, O: Objective + ?Sized>(
    base: &'a O,
    maps: &'a ConstraintMaps,
    constraints: &'a [Constraint],
    weight: f64,
) -> PenalizedObjective<'a, O> {
    PenalizedObjective {
        base,
        maps,
        constraints,
        weight,
    }
}

impl<O: Objective + ?Sized> PenalizedObjective<'_, O> {
    /// Penalty value and, when requested, its gradient contribution.
    fn penalty(&self, z: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let mut total = 0.0;
        for c in self.constraints {
            match *c {
                Constraint::DerivativeWindow { center, radius } => {
                    let u = self.maps.derivative_at_s.value(z);
                    let excess = (u - center).abs() - radius;
                    if excess > 0.0 {
                        total += excess * excess;
                        if let Some(g) = grad.as_deref_mut() {
                            let sign = if u >= center { 1.0 } else { -1.0 };
                            let scale = 2.0 * self.weight * excess * sign;
                            for (gi, wi) in g.iter_mut().zip(&self.maps.derivative_at_s.gradient) {
                                *gi += scale * wi;
                            }
                        }
                    }
                }
                Constraint::LowerBound { level } => {
                    for row in &self.maps.interval_values {
                        let shortfall = level - row.value(z);
                        if shortfall > 0.0 {
                            total += shortfall * shortfall;
                            if let Some(g) = grad.as_deref_mut() {
                                let scale = -2.0 * self.weight * shortfall;
                                for (gi, wi) in g.iter_mut().zip(&row.gradient) {
                                    *gi += scale * wi;
                                }
                            }
                        }
                    }
                }
            }
        }
        total
    }
}

impl<O: Objective + ?Sized> Objective for PenalizedObjective<'_, O> {
    fn value(&self, x: &[f64]) -> f64 {
        let base = self.base.value(x);
        let p = self.penalty(x, None);
        // Strictly feasible points return the base value unchanged so the
        // penalized and unpenalized objectives are indistinguishable there.
        if p == 0.0 {
            base
        } else {
            base + self.weight * p
        }
    }

    fn value_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let (base, mut g) = self.base.value_grad(x);
        let p = self.penalty(x, Some(&mut g));
        if p == 0.0 {
            (base, g)
        } else {
            (base + self.weight * p, g)
        }
    }
}
