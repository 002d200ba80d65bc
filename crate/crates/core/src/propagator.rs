//! Crank–Nicolson time evolution of `iψ_t = −ψ_xx + V(x,t)ψ` with Dirichlet
//! walls or transparent boundary closures.
//!
//! Each step solves the Cayley system
//! `(I + i·dt/2·H)ψ^{n+1} = (I − i·dt/2·H)ψ^n` with `H = −D₂ + diag(V)`
//! evaluated at the step midpoint. The matrix stays tridiagonal: Dirichlet
//! pins the edge rows, and the transparent closure writes
//! `u_edge − ℓ_0·u_inner = Σ_{k≥1} ℓ_k·u_inner(n+1−k)` into them.

use std::io::Write;
use std::sync::Arc;

use crate::error::{CoreError, Result};
use crate::grid::{Grid, Wavefunction};
use crate::potential::Potential;
use crate::tbc::{discrete_tbc_kernel, TbcKernel};
use crate::C64;

/// Scalar control as a function of time on `[0, T]`.
#[derive(Clone)]
pub enum ControlSignal {
    Constant(f64),
    /// Equal-width constant pieces spanning `[0, T]`.
    PiecewiseConstant(Vec<f64>),
    /// Continuous signal.
    Smooth(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for ControlSignal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ControlSignal::Constant(c) => write!(f, "Constant({c})"),
            ControlSignal::PiecewiseConstant(v) => write!(f, "PiecewiseConstant({} pieces)", v.len()),
            ControlSignal::Smooth(_) => write!(f, "Smooth(..)"),
        }
    }
}

impl ControlSignal {
    pub fn value(&self, t: f64, t_total: f64) -> f64 {
        match self {
            ControlSignal::Constant(c) => *c,
            ControlSignal::PiecewiseConstant(v) => {
                let idx = ((t / t_total) * v.len() as f64).floor() as isize;
                v[idx.clamp(0, v.len() as isize - 1) as usize]
            }
            ControlSignal::Smooth(f) => f(t),
        }
    }
}

/// Boundary handling for a whole evolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Dirichlet,
    Transparent,
}

/// Boundary handling for a single step.
pub enum StepBc<'a> {
    Dirichlet,
    Transparent {
        left: &'a TbcKernel,
        right: &'a TbcKernel,
        /// Inner-node values `(u^m_1, u^m_{J−2})` for `m = 0..=n` when the
        /// step produces `u^{n+1}`.
        history: &'a [(C64, C64)],
    },
}

/// Recorded evolution: states at every step plus the boundary-value traces
/// needed for exterior reconstruction.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Wavefunction>,
    /// `ψ(x_l, t_n)`
    pub left_trace: Vec<C64>,
    /// `ψ(x_r, t_n)`
    pub right_trace: Vec<C64>,
}

impl Trajectory {
    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    pub fn final_state(&self) -> &Wavefunction {
        self.states.last().unwrap()
    }

    /// Rows `t, x, Re ψ, Im ψ`, keeping every `stride`-th time level plus the
    /// final one.
    pub fn write_snapshots_csv(&self, mut w: impl Write, stride: usize) -> Result<()> {
        let stride = stride.max(1);
        writeln!(w, "t,x,re,im")?;
        let last = self.states.len() - 1;
        for (n, state) in self.states.iter().enumerate() {
            if n % stride != 0 && n != last {
                continue;
            }
            let t = self.times[n];
            for (i, z) in state.values.iter().enumerate() {
                writeln!(w, "{:.12e},{:.12e},{:.12e},{:.12e}", t, state.grid.x(i), z.re, z.im)?;
            }
        }
        Ok(())
    }
}

pub(crate) fn thomas_solve(
    lower: &[C64],
    diag: &[C64],
    upper: &[C64],
    rhs: &[C64],
) -> Result<Vec<C64>> {
    let n = diag.len();
    let mut c = vec![C64::new(0.0, 0.0); n];
    let mut d = vec![C64::new(0.0, 0.0); n];
    let mut pivot = diag[0];
    if pivot.norm_sqr() == 0.0 {
        return Err(CoreError::NumericalAbort("tridiagonal pivot vanished".into()));
    }
    c[0] = upper[0] / pivot;
    d[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - lower[i - 1] * c[i - 1];
        if pivot.norm_sqr() == 0.0 {
            return Err(CoreError::NumericalAbort("tridiagonal pivot vanished".into()));
        }
        if i < n - 1 {
            c[i] = upper[i] / pivot;
        }
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / pivot;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] -= c[i] * next;
    }
    Ok(x)
}

/// Left-hand Cayley matrix of one step: interior rows `1 + i·dt/2·(2/dx²+v_i)`
/// with off-diagonals `−i·dt/2·/dx²`; the edge rows pin the value, and a
/// transparent closure adds `−s₀` next to each pinned edge.
pub(crate) struct StepMatrix {
    pub lower: Vec<C64>,
    pub diag: Vec<C64>,
    pub upper: Vec<C64>,
}

pub(crate) fn step_matrix(grid: &Grid, v: &[f64], dt: f64, s0: Option<(C64, C64)>) -> StepMatrix {
    let j = grid.j;
    let c = C64::new(0.0, dt / 2.0);
    let inv_dx2 = 1.0 / (grid.dx * grid.dx);
    let off = -c * inv_dx2;
    let mut lower = vec![C64::new(0.0, 0.0); j - 1];
    let mut diag = vec![C64::new(1.0, 0.0); j];
    let mut upper = vec![C64::new(0.0, 0.0); j - 1];
    for i in 1..j - 1 {
        diag[i] = 1.0 + c * (2.0 * inv_dx2 + v[i]);
        lower[i - 1] = off;
        upper[i] = off;
    }
    if let Some((s0_l, s0_r)) = s0 {
        upper[0] = -s0_l;
        lower[j - 2] = -s0_r;
    }
    StepMatrix { lower, diag, upper }
}

/// One Crank–Nicolson step of length `dt`. `eta_mid` must be the control
/// value at the step midpoint; with a transparent closure the kernels must
/// hold at least `history.len() + 2` weights.
pub fn cn_step(
    psi: &Wavefunction,
    pot: &Potential,
    eta_mid: f64,
    dt: f64,
    bc: StepBc,
) -> Result<Wavefunction> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(CoreError::InvalidArgument(format!("cn_step needs dt > 0, got {dt}")));
    }
    let grid = psi.grid;
    let j = grid.j;
    let v = pot.values_on(&grid, 0.0, eta_mid)?;
    let c = C64::new(0.0, dt / 2.0);
    let inv_dx2 = 1.0 / (grid.dx * grid.dx);

    let s0 = match &bc {
        StepBc::Dirichlet => None,
        StepBc::Transparent { left, right, .. } => {
            if left.coeff(0).norm_sqr() == 0.0 || right.coeff(0).norm_sqr() == 0.0 {
                return Err(CoreError::SingularBoundaryClosure);
            }
            Some((left.coeff(0), right.coeff(0)))
        }
    };
    let m = step_matrix(&grid, &v, dt, s0);

    let mut rhs = vec![C64::new(0.0, 0.0); j];
    for i in 1..j - 1 {
        let h_diag = 2.0 * inv_dx2 + v[i];
        rhs[i] = psi.values[i] * (1.0 - c * h_diag)
            + c * inv_dx2 * (psi.values[i + 1] + psi.values[i - 1]);
    }

    if let StepBc::Transparent { left, right, history } = bc {
        // producing u^{n+1} from history m = 0..=n pairs entry m with
        // lag n+1−m = history.len()−m
        let max_lag = history.len();
        if left.len() <= max_lag || right.len() <= max_lag {
            return Err(CoreError::InvalidArgument(format!(
                "boundary kernel too short: {} weights for lag {max_lag}",
                left.len().min(right.len())
            )));
        }
        let mut acc_l = C64::new(0.0, 0.0);
        let mut acc_r = C64::new(0.0, 0.0);
        for (m, &(ul, ur)) in history.iter().enumerate() {
            let lag = max_lag - m;
            acc_l += left.coeff(lag) * ul;
            acc_r += right.coeff(lag) * ur;
        }
        rhs[0] = acc_l;
        rhs[j - 1] = acc_r;
    }

    let out = thomas_solve(&m.lower, &m.diag, &m.upper, &rhs)?;
    Wavefunction::new(grid, out)
}

/// Exact free-space evolution of `Wavefunction::gaussian(grid, x0, sigma, k0)`
/// to time `t`: complex-width spreading with group velocity `2·k0`.
pub fn free_gaussian(grid: Grid, x0: f64, sigma: f64, k0: f64, t: f64) -> Wavefunction {
    if t == 0.0 {
        return Wavefunction::gaussian(grid, x0, sigma, k0);
    }
    let s2 = sigma * sigma;
    let norm = (2.0 * std::f64::consts::PI * s2).powf(-0.25);
    let front = (C64::new(s2, 0.0) / C64::new(s2, t)).sqrt();
    Wavefunction::from_fn(grid, |x| {
        let xi = x - x0;
        let phase = C64::new(0.0, xi * xi / (4.0 * t));
        let shifted = C64::new(k0 - xi / (2.0 * t), 0.0);
        let spread = -s2 * t * shifted * shifted / C64::new(t, -s2);
        norm * front * (phase + spread).exp()
    })
}

/// Evolve `psi0` for `n` steps of `t_total/n` under the control signal,
/// recording every state and the boundary traces. Transparent closures
/// require x-constant, time-constant tail potentials: the tails are checked
/// at the first, middle, and last control samples before stepping.
pub fn evolve(
    psi0: &Wavefunction,
    pot: &Potential,
    eta: &ControlSignal,
    t_total: f64,
    n: usize,
    bc: Boundary,
) -> Result<Trajectory> {
    if n < 1 {
        return Err(CoreError::InvalidArgument("evolve needs at least one step".into()));
    }
    if !(t_total > 0.0 && t_total.is_finite()) {
        return Err(CoreError::InvalidArgument(format!(
            "evolve needs a positive horizon, got {t_total}"
        )));
    }
    let grid = psi0.grid;
    let dt = t_total / n as f64;

    let kernels = match bc {
        Boundary::Dirichlet => None,
        Boundary::Transparent => {
            if pot.is_periodic() {
                return Err(CoreError::Unsupported(
                    "transparent boundaries are undefined on a periodic domain".into(),
                ));
            }
            if grid.x_l > pot.x_l || grid.x(grid.j - 1) < pot.x_r {
                return Err(CoreError::Unsupported(format!(
                    "transparent boundaries need the grid edges at or outside \
                     the potential window [{}, {}]",
                    pot.x_l, pot.x_r
                )));
            }
            let probes = [
                eta.value(0.5 * dt, t_total),
                eta.value(0.5 * t_total, t_total),
                eta.value(t_total - 0.5 * dt, t_total),
            ];
            let (v_l, v_r) = pot.tail_constants(probes[0]).unwrap();
            for &p in &probes[1..] {
                let (a, b) = pot.tail_constants(p).unwrap();
                if (a - v_l).abs() > 1e-12 || (b - v_r).abs() > 1e-12 {
                    return Err(CoreError::Unsupported(
                        "transparent boundaries require time-constant tail potentials"
                            .into(),
                    ));
                }
            }
            let report = pot.validate_tail_condition(&grid, &probes);
            if !report.ok {
                return Err(CoreError::Unsupported(format!(
                    "potential deviates from its tail constants by {:.2e} outside the window",
                    report.max_deviation
                )));
            }
            Some((
                discrete_tbc_kernel(dt, grid.dx, v_l, n + 2)?,
                discrete_tbc_kernel(dt, grid.dx, v_r, n + 2)?,
            ))
        }
    };

    let mut states = Vec::with_capacity(n + 1);
    let mut times = Vec::with_capacity(n + 1);
    let mut history: Vec<(C64, C64)> = Vec::with_capacity(n + 1);
    states.push(psi0.clone());
    times.push(0.0);
    history.push((psi0.values[1], psi0.values[grid.j - 2]));

    for step in 0..n {
        let t_mid = (step as f64 + 0.5) * dt;
        let eta_mid = eta.value(t_mid, t_total);
        let step_bc = match &kernels {
            None => StepBc::Dirichlet,
            Some((left, right)) => StepBc::Transparent { left, right, history: &history },
        };
        let next = cn_step(states.last().unwrap(), pot, eta_mid, dt, step_bc)?;
        history.push((next.values[1], next.values[grid.j - 2]));
        times.push((step + 1) as f64 * dt);
        states.push(next);
    }

    let left_trace = states.iter().map(|s| s.values[0]).collect();
    let right_trace = states.iter().map(|s| s.values[grid.j - 1]).collect();
    Ok(Trajectory { times, states, left_trace, right_trace })
}
