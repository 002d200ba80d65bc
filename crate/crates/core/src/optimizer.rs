//! Control parametrizations, bound projection, and descent loops.
//!
//! Controls are linear in their parameters: piecewise-constant values on a
//! uniform partition of [0, T], or a real truncated trigonometric series.
//! Two solvers are provided — projected gradient descent with Armijo
//! backtracking (works with box bounds) and limited-memory BFGS (unbounded
//! runs only).

use std::collections::VecDeque;
use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::propagator::ControlSignal;

/// A differentiable scalar objective over a fixed-length parameter vector.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn cost(&self, theta: &[f64]) -> Result<f64>;
    fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>>;
    /// Optional physical figure of merit reported alongside the cost.
    fn fidelity(&self, _theta: &[f64]) -> Result<Option<f64>> {
        Ok(None)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ParamKind {
    /// Constant value on each of `intervals` equal subintervals of [0, T].
    PiecewiseConstant { intervals: usize },
    /// c0 + sum_m a_m cos(2 pi m t / period) + b_m sin(2 pi m t / period).
    TruncatedFourier { harmonics: usize, period: f64 },
}

/// Where the control acts in space; realized by the potential's control
/// profile, recorded here as part of the problem description.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpatialProfile {
    Global,
    Window { x_l: f64, x_r: f64 },
}

#[derive(Clone, Debug)]
pub struct ControlParametrization {
    pub kind: ParamKind,
    pub bounds: (f64, f64),
    pub profile: SpatialProfile,
}

impl ControlParametrization {
    pub fn new(kind: ParamKind, bounds: (f64, f64), profile: SpatialProfile) -> Result<Self> {
        if !(bounds.0 < bounds.1) {
            return Err(CoreError::InvalidArgument(format!(
                "empty bounds interval [{}, {}]",
                bounds.0, bounds.1
            )));
        }
        match &kind {
            ParamKind::PiecewiseConstant { intervals } => {
                if *intervals == 0 {
                    return Err(CoreError::InvalidArgument(
                        "need at least one control interval".into(),
                    ));
                }
            }
            ParamKind::TruncatedFourier { period, .. } => {
                if !(*period > 0.0) {
                    return Err(CoreError::InvalidArgument(format!(
                        "series period must be positive, got {period}"
                    )));
                }
            }
        }
        if let SpatialProfile::Window { x_l, x_r } = profile {
            if !(x_l < x_r) {
                return Err(CoreError::InvalidArgument(format!(
                    "empty control window [{x_l}, {x_r}]"
                )));
            }
        }
        Ok(Self { kind, bounds, profile })
    }

    pub fn param_count(&self) -> usize {
        match &self.kind {
            ParamKind::PiecewiseConstant { intervals } => *intervals,
            ParamKind::TruncatedFourier { harmonics, .. } => 2 * harmonics + 1,
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.bounds.0.is_finite() && self.bounds.1.is_finite()
    }

    /// Value of the i-th basis function at time t (the control is linear in
    /// its parameters: eta(t) = sum_i theta_i * basis_i(t)).
    pub fn basis_value(&self, i: usize, t: f64, t_total: f64) -> f64 {
        match &self.kind {
            ParamKind::PiecewiseConstant { intervals } => {
                let idx = ((t / t_total) * *intervals as f64).floor() as isize;
                let idx = idx.clamp(0, *intervals as isize - 1) as usize;
                if idx == i {
                    1.0
                } else {
                    0.0
                }
            }
            ParamKind::TruncatedFourier { harmonics, period } => {
                let k = *harmonics;
                let w = std::f64::consts::TAU / period;
                if i == 0 {
                    1.0
                } else if i <= k {
                    (i as f64 * w * t).cos()
                } else {
                    ((i - k) as f64 * w * t).sin()
                }
            }
        }
    }

    /// Materialize the parameter vector as a control signal.
    pub fn signal(&self, theta: &[f64]) -> Result<ControlSignal> {
        if theta.len() != self.param_count() {
            return Err(CoreError::InvalidArgument(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                theta.len()
            )));
        }
        match &self.kind {
            ParamKind::PiecewiseConstant { .. } => {
                Ok(ControlSignal::PiecewiseConstant(theta.to_vec()))
            }
            ParamKind::TruncatedFourier { harmonics, period } => {
                let k = *harmonics;
                let w = std::f64::consts::TAU / period;
                let coeffs = theta.to_vec();
                Ok(ControlSignal::Smooth(Arc::new(move |t| {
                    let mut v = coeffs[0];
                    for m in 1..=k {
                        v += coeffs[m] * (m as f64 * w * t).cos();
                        v += coeffs[k + m] * (m as f64 * w * t).sin();
                    }
                    v
                })))
            }
        }
    }
}

/// Componentwise clamp into [lo, hi]; idempotent.
pub fn project(params: &[f64], bounds: (f64, f64)) -> Vec<f64> {
    params.iter().map(|&p| p.clamp(bounds.0, bounds.1)).collect()
}

/// Starting parameters: zero control (projected), or with a seed, uniform
/// draws within 10% of the bounds interval around its midpoint.
pub fn initial_params(par: &ControlParametrization, seed: Option<u64>) -> Vec<f64> {
    let n = par.param_count();
    match seed {
        None => project(&vec![0.0; n], par.bounds),
        Some(s) => {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let (lo, hi) = par.bounds;
            let (mid, half) = if lo.is_finite() && hi.is_finite() {
                (0.5 * (lo + hi), 0.05 * (hi - lo))
            } else {
                (0.0, 0.1)
            };
            (0..n).map(|_| rng.gen_range(mid - half..=mid + half)).collect()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method {
    GdArmijo,
    Lbfgs { memory: usize },
}

#[derive(Clone, Debug)]
pub struct OptOpts {
    pub max_iter: usize,
    pub tol: f64,
    pub method: Method,
}

impl Default for OptOpts {
    fn default() -> Self {
        Self { max_iter: 200, tol: 1e-8, method: Method::GdArmijo }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    LineSearchFailure,
}

#[derive(Clone, Debug)]
pub struct IterationRecord {
    pub iter: usize,
    pub cost: f64,
    pub grad_norm: f64,
    pub step: f64,
    pub fidelity: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct OptResult {
    pub params: Vec<f64>,
    pub cost: f64,
    pub cost_history: Vec<f64>,
    pub fidelity: Option<f64>,
    pub iterations: usize,
    pub termination: Termination,
    pub records: Vec<IterationRecord>,
}

impl OptResult {
    pub fn write_iterations_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "iter,cost,grad_norm,step_size,fidelity")?;
        for r in &self.records {
            let fid = r.fidelity.map_or(String::new(), |f| format!("{f:.17e}"));
            writeln!(
                w,
                "{},{:.17e},{:.17e},{:.17e},{}",
                r.iter, r.cost, r.grad_norm, r.step, fid
            )?;
        }
        Ok(())
    }
}

fn check_finite(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(CoreError::NumericalAbort(format!("{what} became {value}")))
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Norm of the projected-gradient step: ||theta - P(theta - g)||. Zero only
/// at a stationary point of the bounded problem; equals ||g|| when no bound
/// is active.
fn projected_grad_norm(theta: &[f64], g: &[f64], bounds: (f64, f64)) -> f64 {
    theta
        .iter()
        .zip(g)
        .map(|(&t, &gi)| {
            let moved = (t - gi).clamp(bounds.0, bounds.1);
            (t - moved) * (t - moved)
        })
        .sum::<f64>()
        .sqrt()
}

/// Minimize the objective within the parametrization's bounds.
pub fn optimize(
    obj: &dyn Objective,
    par: &ControlParametrization,
    theta0: &[f64],
    opts: &OptOpts,
) -> Result<OptResult> {
    if obj.dim() != par.param_count() || theta0.len() != par.param_count() {
        return Err(CoreError::InvalidArgument(format!(
            "dimension mismatch: objective {}, parametrization {}, start {}",
            obj.dim(),
            par.param_count(),
            theta0.len()
        )));
    }
    match opts.method {
        Method::GdArmijo => gd_armijo(obj, par, theta0, opts),
        Method::Lbfgs { memory } => {
            if par.is_bounded() {
                return Err(CoreError::Unsupported(
                    "quasi-Newton path is unbounded-only; use the projected gradient method"
                        .into(),
                ));
            }
            lbfgs(obj, theta0, opts, memory)
        }
    }
}

fn finish(
    obj: &dyn Objective,
    params: Vec<f64>,
    cost: f64,
    cost_history: Vec<f64>,
    iterations: usize,
    termination: Termination,
    records: Vec<IterationRecord>,
) -> Result<OptResult> {
    let fidelity = obj.fidelity(&params)?;
    Ok(OptResult { params, cost, cost_history, fidelity, iterations, termination, records })
}

fn gd_armijo(
    obj: &dyn Objective,
    par: &ControlParametrization,
    theta0: &[f64],
    opts: &OptOpts,
) -> Result<OptResult> {
    const SHRINK: f64 = 0.5;
    const GROW: f64 = 2.0;
    const C1: f64 = 1e-4;
    const MIN_STEP: f64 = 1e-18;

    let bounds = par.bounds;
    let mut theta = project(theta0, bounds);
    let mut cost = check_finite(obj.cost(&theta)?, "cost")?;
    let mut history = vec![cost];
    let mut records = Vec::new();
    let mut step = 1.0_f64;
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;

    for iter in 1..=opts.max_iter {
        let g = obj.gradient(&theta)?;
        for gi in &g {
            check_finite(*gi, "gradient entry")?;
        }
        let pg = projected_grad_norm(&theta, &g, bounds);
        if pg < opts.tol {
            termination = Termination::GradientTolerance;
            break;
        }

        let mut tau = step * GROW;
        let accepted = loop {
            let cand: Vec<f64> = theta
                .iter()
                .zip(&g)
                .map(|(&t, &gi)| (t - tau * gi).clamp(bounds.0, bounds.1))
                .collect();
            let moved: f64 =
                theta.iter().zip(&cand).map(|(&a, &b)| (a - b) * (a - b)).sum();
            if moved > 0.0 {
                let trial = check_finite(obj.cost(&cand)?, "cost")?;
                if trial <= cost - C1 / tau * moved {
                    break Some((cand, trial, tau));
                }
            }
            tau *= SHRINK;
            if tau < MIN_STEP {
                break None;
            }
        };
        let Some((cand, trial, used)) = accepted else {
            termination = Termination::LineSearchFailure;
            break;
        };
        theta = cand;
        cost = trial;
        step = used;
        iterations = iter;
        history.push(cost);
        records.push(IterationRecord {
            iter,
            cost,
            grad_norm: pg,
            step: used,
            fidelity: obj.fidelity(&theta)?,
        });
    }
    finish(obj, theta, cost, history, iterations, termination, records)
}

fn lbfgs(
    obj: &dyn Objective,
    theta0: &[f64],
    opts: &OptOpts,
    memory: usize,
) -> Result<OptResult> {
    const C1: f64 = 1e-4;
    const SHRINK: f64 = 0.5;
    const MIN_STEP: f64 = 1e-18;

    let mut theta = theta0.to_vec();
    let mut cost = check_finite(obj.cost(&theta)?, "cost")?;
    let mut g = obj.gradient(&theta)?;
    let mut history = vec![cost];
    let mut records = Vec::new();
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;

    for iter in 1..=opts.max_iter {
        for gi in &g {
            check_finite(*gi, "gradient entry")?;
        }
        let gnorm = l2(&g);
        if gnorm < opts.tol {
            termination = Termination::GradientTolerance;
            break;
        }

        // two-loop recursion for the quasi-Newton direction
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(pairs.len());
        for (s, y, rho) in pairs.iter().rev() {
            let alpha = rho * s.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>();
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= alpha * yi;
            }
            alphas.push(alpha);
        }
        if let Some((s, y, _)) = pairs.back() {
            let sy: f64 = s.iter().zip(y).map(|(a, b)| a * b).sum();
            let yy: f64 = y.iter().map(|a| a * a).sum();
            let gamma = sy / yy;
            for qi in q.iter_mut() {
                *qi *= gamma;
            }
        }
        for ((s, y, rho), alpha) in pairs.iter().zip(alphas.iter().rev()) {
            let beta = rho * y.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>();
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (alpha - beta) * si;
            }
        }
        let mut dir: Vec<f64> = q.iter().map(|x| -x).collect();
        let mut slope: f64 = dir.iter().zip(&g).map(|(d, gi)| d * gi).sum();
        if slope >= 0.0 {
            dir = g.iter().map(|x| -x).collect();
            slope = -gnorm * gnorm;
        }

        let mut tau = 1.0_f64;
        let accepted = loop {
            let cand: Vec<f64> =
                theta.iter().zip(&dir).map(|(t, d)| t + tau * d).collect();
            let trial = check_finite(obj.cost(&cand)?, "cost")?;
            if trial <= cost + C1 * tau * slope {
                break Some((cand, trial, tau));
            }
            tau *= SHRINK;
            if tau < MIN_STEP {
                break None;
            }
        };
        let Some((cand, trial, used)) = accepted else {
            termination = Termination::LineSearchFailure;
            break;
        };
        let g_new = obj.gradient(&cand)?;
        let s: Vec<f64> = cand.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-10 * l2(&s) * l2(&y) {
            if pairs.len() == memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        theta = cand;
        cost = trial;
        g = g_new;
        iterations = iter;
        history.push(cost);
        records.push(IterationRecord {
            iter,
            cost,
            grad_norm: gnorm,
            step: used,
            fidelity: obj.fidelity(&theta)?,
        });
    }
    finish(obj, theta, cost, history, iterations, termination, records)
}

/// Central-difference gradient; parallel across parameters.
pub fn fd_gradient(obj: &dyn Objective, theta: &[f64], eps: f64) -> Result<Vec<f64>> {
    if !(eps > 0.0) {
        return Err(CoreError::InvalidArgument(format!(
            "difference step must be positive, got {eps}"
        )));
    }
    (0..theta.len())
        .into_par_iter()
        .map(|k| {
            let mut plus = theta.to_vec();
            plus[k] += eps;
            let mut minus = theta.to_vec();
            minus[k] -= eps;
            Ok((obj.cost(&plus)? - obj.cost(&minus)?) / (2.0 * eps))
        })
        .collect()
}

/// Independent seeded runs; returns the lowest-cost result (ties broken by
/// seed order).
pub fn multistart(
    obj: &dyn Objective,
    par: &ControlParametrization,
    opts: &OptOpts,
    seeds: &[u64],
) -> Result<OptResult> {
    if seeds.is_empty() {
        return Err(CoreError::InvalidArgument("need at least one seed".into()));
    }
    let runs: Vec<Result<OptResult>> = seeds
        .par_iter()
        .map(|&seed| optimize(obj, par, &initial_params(par, Some(seed)), opts))
        .collect();
    let mut best: Option<OptResult> = None;
    for run in runs {
        let run = run?;
        let better = match &best {
            None => true,
            Some(b) => run.cost < b.cost,
        };
        if better {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one run"))
}
