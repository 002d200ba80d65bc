//! JSON run configuration: serde model, whole-file validation (every error
//! reported, not just the first), and construction of the core objects.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use statesynth_core::control::{CostSpec, FiniteLevelObjective, ProblemSpec, TerminalKind};
use statesynth_core::eigen::{eigenstates, hamiltonian_matrix, phase_grid, BoundaryKind, EigenBasis};
use statesynth_core::grid::{Grid, Wavefunction};
use statesynth_core::magnus::{FiniteLevelSystem, MagnusOrder};
use statesynth_core::optimizer::{
    initial_params, ControlParametrization, Method, OptOpts, ParamKind, SpatialProfile,
};
use statesynth_core::potential::{BaseProfile, Potential, PotentialKind};
use statesynth_core::propagator::{Boundary, ControlSignal};
use statesynth_core::target::superposition_target;
use statesynth_core::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Solve,
    Gradcheck,
    Spectrum,
    Simulate,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Solve => "solve",
            Mode::Gradcheck => "gradcheck",
            Mode::Spectrum => "spectrum",
            Mode::Simulate => "simulate",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    #[serde(default)]
    pub problem: ProblemFamily,
    pub grid: Option<GridSpec>,
    pub potential: Option<PotentialSpec>,
    pub initial_state: Option<StateSpec>,
    pub target_state: Option<StateSpec>,
    pub boundary: Option<BoundarySpec>,
    pub horizon: Option<HorizonSpec>,
    pub cost: Option<CostSection>,
    pub control: Option<ControlSpec>,
    pub optimizer: Option<OptimizerSpec>,
    /// Two-level problems: drift splitting (h0 = splitting/2 * sigma_z).
    pub splitting: Option<f64>,
    pub magnus_order: Option<u8>,
    pub seed: Option<u64>,
    pub emit: Option<EmitSpec>,
    pub gradcheck: Option<GradcheckSpec>,
    pub spectrum: Option<SpectrumSpec>,
    pub signal: Option<SignalSpec>,
    pub exit_time: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemFamily {
    #[default]
    Grid,
    TwoLevel,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_l: Option<f64>,
    pub x_r: Option<f64>,
    pub j: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    FreeWindow {
        #[serde(default)]
        v_l: f64,
        #[serde(default)]
        v_r: f64,
        x_l: f64,
        x_r: f64,
        base: Option<BaseSpec>,
        eta_bounds: Option<[f64; 2]>,
    },
    HarmonicDriven {
        mass: f64,
        omega: f64,
        #[serde(default = "default_true")]
        corrected: bool,
        x_l: f64,
        x_r: f64,
        eta_bounds: Option<[f64; 2]>,
    },
    Transmon {
        e_c: f64,
        e_j: f64,
        #[serde(default)]
        n_g: f64,
        eta_bounds: Option<[f64; 2]>,
    },
    Fluxonium {
        e_c: f64,
        e_j: f64,
        e_l: f64,
        #[serde(default)]
        n_g: f64,
        #[serde(default)]
        phi_ext: f64,
        x_l: f64,
        x_r: f64,
        eta_bounds: Option<[f64; 2]>,
    },
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseSpec {
    Zero,
    Harmonic { mass: f64, omega: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateSpec {
    Gaussian { x0: f64, sigma: f64, k0: f64 },
    Eigenstate { index: usize },
    EigenSuperposition { coeffs: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundarySpec {
    Dirichlet,
    Transparent,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonSpec {
    pub t_total: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSection {
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default = "two")]
    pub p: f64,
    #[serde(default = "two")]
    pub q: f64,
    #[serde(default)]
    pub terminal: TerminalSpec,
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalSpec {
    #[default]
    Lp,
    Overlap,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControlSpec {
    PiecewiseConstant {
        intervals: usize,
        /// Omit for an unbounded parametrization (quasi-Newton runs).
        bounds: Option<[f64; 2]>,
        window: Option<[f64; 2]>,
    },
    TruncatedFourier {
        harmonics: usize,
        period: Option<f64>,
        bounds: Option<[f64; 2]>,
        window: Option<[f64; 2]>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSpec {
    #[serde(default)]
    pub method: MethodSpec,
    #[serde(default = "ten")]
    pub memory: usize,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    pub multistart_seeds: Option<Vec<u64>>,
}

fn ten() -> usize {
    10
}

fn default_max_iter() -> usize {
    200
}

fn default_tol() -> f64 {
    1e-8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodSpec {
    #[default]
    GdArmijo,
    Lbfgs,
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        OptimizerSpec {
            method: MethodSpec::GdArmijo,
            memory: 10,
            max_iter: default_max_iter(),
            tol: default_tol(),
            multistart_seeds: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitSpec {
    pub snapshot_stride: Option<usize>,
    /// Simulate only: reconstruct ψ at a point beyond the right edge from the
    /// recorded boundary trace.
    pub exterior: Option<ExteriorSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExteriorSpec {
    pub x: f64,
    /// Number of s-grid points (inversion-contour nodes for t = T).
    pub nodes: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradcheckSpec {
    pub eps: Option<Vec<f64>>,
    pub theta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSpec {
    #[serde(default = "default_levels")]
    pub levels: usize,
}

fn default_levels() -> usize {
    6
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalSpec {
    Constant { value: f64 },
    Piecewise { values: Vec<f64> },
}

/// Everything a run needs, fully constructed and validated.
pub enum Built {
    SolveGrid {
        spec: ProblemSpec,
        par: ControlParametrization,
        opts: OptOpts,
        seeds: Option<Vec<u64>>,
        theta0: Vec<f64>,
        stride: usize,
    },
    SolveTwoLevel {
        obj: FiniteLevelObjective,
        par: ControlParametrization,
        opts: OptOpts,
        seeds: Option<Vec<u64>>,
        theta0: Vec<f64>,
        t_total: f64,
        steps: usize,
    },
    Gradcheck {
        spec: ProblemSpec,
        theta: Vec<f64>,
        eps: Vec<f64>,
    },
    Spectrum {
        potential: Potential,
        grid: Grid,
        bc: BoundaryKind,
        levels: usize,
    },
    Simulate {
        potential: Potential,
        psi0: Wavefunction,
        signal: ControlSignal,
        t_total: f64,
        steps: usize,
        boundary: Boundary,
        stride: usize,
        exit_time: Option<f64>,
        exterior: Option<(f64, usize)>,
    },
}

pub fn parse(raw: &serde_json::Value) -> Result<RunConfig, Vec<String>> {
    serde_json::from_value(raw.clone()).map_err(|e| vec![format!("config: {e}")])
}

/// Validate the whole configuration for `mode`, collecting every problem.
pub fn build(cfg: &RunConfig, mode: Mode, seed_override: Option<u64>) -> Result<Built, Vec<String>> {
    let mut errs = Vec::new();
    if let Some(m) = cfg.mode {
        if m != mode {
            errs.push(format!(
                "mode: config says \"{}\" but the {} subcommand was invoked",
                m.name(),
                mode.name()
            ));
        }
    }
    let seed = seed_override.or(cfg.seed);

    let built = match (mode, cfg.problem) {
        (Mode::Solve, ProblemFamily::TwoLevel) => build_two_level(cfg, seed, &mut errs),
        (Mode::Solve, ProblemFamily::Grid) => build_grid_solve(cfg, seed, &mut errs),
        (Mode::Gradcheck, ProblemFamily::Grid) => build_gradcheck(cfg, seed, &mut errs),
        (Mode::Gradcheck, ProblemFamily::TwoLevel) => {
            errs.push("problem: gradient checks run on grid problems".into());
            None
        }
        (Mode::Spectrum, ProblemFamily::Grid) => build_spectrum(cfg, &mut errs),
        (Mode::Spectrum, ProblemFamily::TwoLevel) => {
            errs.push("problem: spectra are computed for grid potentials".into());
            None
        }
        (Mode::Simulate, ProblemFamily::Grid) => build_simulate(cfg, &mut errs),
        (Mode::Simulate, ProblemFamily::TwoLevel) => {
            errs.push("problem: simulation runs on grid problems".into());
            None
        }
    };

    match built {
        Some(b) if errs.is_empty() => Ok(b),
        _ => {
            if errs.is_empty() {
                errs.push("config: invalid for unknown reasons (internal)".into());
            }
            Err(errs)
        }
    }
}

fn build_potential(cfg: &RunConfig, errs: &mut Vec<String>) -> Option<Potential> {
    let Some(spec) = &cfg.potential else {
        errs.push("potential: missing section".into());
        return None;
    };
    let result = match spec.clone() {
        PotentialSpec::FreeWindow { v_l, v_r, x_l, x_r, base, eta_bounds } => {
            let base = match base {
                None | Some(BaseSpec::Zero) => BaseProfile::Zero,
                Some(BaseSpec::Harmonic { mass, omega }) => BaseProfile::Harmonic { mass, omega },
            };
            let eb = pair(eta_bounds, (-10.0, 10.0));
            Potential::new(PotentialKind::PiecewiseCustom { v_l, v_r, base }, x_l, x_r, eb)
        }
        PotentialSpec::HarmonicDriven { mass, omega, corrected, x_l, x_r, eta_bounds } => {
            let eb = pair(eta_bounds, (-10.0, 10.0));
            Potential::new(PotentialKind::HarmonicDriven { mass, omega, corrected }, x_l, x_r, eb)
        }
        PotentialSpec::Transmon { e_c, e_j, n_g, eta_bounds } => {
            let eb = pair(eta_bounds, (0.0, 0.0));
            Potential::new(PotentialKind::Transmon { e_c, e_j, n_g }, -PI, PI, eb)
        }
        PotentialSpec::Fluxonium { e_c, e_j, e_l, n_g, phi_ext, x_l, x_r, eta_bounds } => {
            let eb = pair(eta_bounds, (0.0, 0.0));
            Potential::new(
                PotentialKind::Fluxonium { e_c, e_j, e_l, n_g, phi_ext },
                x_l,
                x_r,
                eb,
            )
        }
    };
    match result {
        Ok(p) => Some(p),
        Err(e) => {
            errs.push(format!("potential: {e}"));
            None
        }
    }
}

fn pair(opt: Option<[f64; 2]>, default: (f64, f64)) -> (f64, f64) {
    opt.map_or(default, |b| (b[0], b[1]))
}

fn build_grid(cfg: &RunConfig, periodic: bool, errs: &mut Vec<String>) -> Option<Grid> {
    let Some(g) = &cfg.grid else {
        errs.push("grid: missing section".into());
        return None;
    };
    if g.j < 3 {
        errs.push(format!("grid.j: need at least 3 nodes, got {}", g.j));
        return None;
    }
    if periodic {
        for (name, v, want) in [("grid.x_l", g.x_l, -PI), ("grid.x_r", g.x_r, PI)] {
            if let Some(v) = v {
                if (v - want).abs() > 1e-9 {
                    errs.push(format!("{name}: a phase-basis grid spans [-pi, pi], got {v}"));
                }
            }
        }
        match phase_grid(g.j) {
            Ok(grid) => Some(grid),
            Err(e) => {
                errs.push(format!("grid: {e}"));
                None
            }
        }
    } else {
        let (Some(x_l), Some(x_r)) = (g.x_l, g.x_r) else {
            errs.push("grid.x_l / grid.x_r: required for a line-domain run".into());
            return None;
        };
        match Grid::new(x_l, x_r, g.j) {
            Ok(grid) => Some(grid),
            Err(e) => {
                errs.push(format!("grid: {e}"));
                None
            }
        }
    }
}

fn build_state(
    which: &str,
    spec: Option<&StateSpec>,
    grid: Grid,
    potential: &Potential,
    basis: &mut Option<EigenBasis>,
    errs: &mut Vec<String>,
) -> Option<Wavefunction> {
    let Some(spec) = spec else {
        errs.push(format!("{which}: missing section"));
        return None;
    };
    let bc = if potential.is_periodic() { BoundaryKind::Periodic } else { BoundaryKind::Dirichlet };
    let mut ensure_basis = |k: usize, errs: &mut Vec<String>| -> bool {
        let have = basis.as_ref().map_or(0, |b| b.states.len());
        if have >= k {
            return true;
        }
        let h = match hamiltonian_matrix(potential, &grid, bc, 0.0) {
            Ok(h) => h,
            Err(e) => {
                errs.push(format!("{which}: {e}"));
                return false;
            }
        };
        match eigenstates(&h, &grid, bc, k) {
            Ok(b) => {
                *basis = Some(b);
                true
            }
            Err(e) => {
                errs.push(format!("{which}: {e}"));
                false
            }
        }
    };
    match spec {
        StateSpec::Gaussian { x0, sigma, k0 } => {
            if !(*sigma > 0.0) {
                errs.push(format!("{which}.sigma: need a positive width, got {sigma}"));
                return None;
            }
            Some(Wavefunction::gaussian(grid, *x0, *sigma, *k0))
        }
        StateSpec::Eigenstate { index } => {
            if !ensure_basis(index + 1, errs) {
                return None;
            }
            Some(basis.as_ref().unwrap().states[*index].clone())
        }
        StateSpec::EigenSuperposition { coeffs } => {
            if coeffs.is_empty() {
                errs.push(format!("{which}.coeffs: need at least one coefficient"));
                return None;
            }
            if !ensure_basis(coeffs.len(), errs) {
                return None;
            }
            let c: Vec<C64> = coeffs.iter().map(|a| C64::new(a[0], a[1])).collect();
            match superposition_target(&c, basis.as_ref().unwrap()) {
                Ok(w) => Some(w),
                Err(e) => {
                    errs.push(format!("{which}: {e}"));
                    None
                }
            }
        }
    }
}

fn build_cost(cfg: &RunConfig, errs: &mut Vec<String>) -> Option<CostSpec> {
    let Some(c) = &cfg.cost else {
        errs.push("cost: missing section".into());
        return None;
    };
    match CostSpec::new(c.alpha, c.beta, c.p, c.q) {
        Ok(spec) => Some(match c.terminal {
            TerminalSpec::Lp => spec,
            TerminalSpec::Overlap => spec.with_terminal(TerminalKind::Overlap),
        }),
        Err(e) => {
            errs.push(format!("cost: {e}"));
            None
        }
    }
}

fn build_control(
    cfg: &RunConfig,
    t_total: Option<f64>,
    errs: &mut Vec<String>,
) -> Option<ControlParametrization> {
    let Some(c) = &cfg.control else {
        errs.push("control: missing section".into());
        return None;
    };
    let (kind, bounds, window) = match c.clone() {
        ControlSpec::PiecewiseConstant { intervals, bounds, window } => {
            (ParamKind::PiecewiseConstant { intervals }, bounds, window)
        }
        ControlSpec::TruncatedFourier { harmonics, period, bounds, window } => {
            let period = match (period, t_total) {
                (Some(p), _) => p,
                (None, Some(t)) => t,
                (None, None) => {
                    errs.push("control.period: required when no horizon is given".into());
                    return None;
                }
            };
            (ParamKind::TruncatedFourier { harmonics, period }, bounds, window)
        }
    };
    let bounds = pair(bounds, (f64::NEG_INFINITY, f64::INFINITY));
    let profile = match window {
        None => SpatialProfile::Global,
        Some([x_l, x_r]) => SpatialProfile::Window { x_l, x_r },
    };
    match ControlParametrization::new(kind, bounds, profile) {
        Ok(par) => Some(par),
        Err(e) => {
            errs.push(format!("control: {e}"));
            None
        }
    }
}

fn build_opts(cfg: &RunConfig, par: Option<&ControlParametrization>, errs: &mut Vec<String>) -> OptOpts {
    let o = cfg.optimizer.clone().unwrap_or_default();
    if o.max_iter == 0 {
        errs.push("optimizer.max_iter: need at least one iteration".into());
    }
    if !(o.tol > 0.0 && o.tol.is_finite()) {
        errs.push(format!("optimizer.tol: need a positive tolerance, got {}", o.tol));
    }
    let method = match o.method {
        MethodSpec::GdArmijo => Method::GdArmijo,
        MethodSpec::Lbfgs => {
            if par.is_some_and(|p| p.is_bounded()) {
                errs.push(
                    "optimizer.method: the quasi-Newton path runs unbounded; omit control.bounds"
                        .into(),
                );
            }
            if o.memory == 0 {
                errs.push("optimizer.memory: need a positive history length".into());
            }
            Method::Lbfgs { memory: o.memory }
        }
    };
    OptOpts { max_iter: o.max_iter, tol: o.tol, method }
}

fn build_horizon(cfg: &RunConfig, errs: &mut Vec<String>) -> Option<(f64, usize)> {
    let Some(h) = &cfg.horizon else {
        errs.push("horizon: missing section".into());
        return None;
    };
    let mut ok = true;
    if !(h.t_total > 0.0 && h.t_total.is_finite()) {
        errs.push(format!("horizon.t_total: need a positive finite horizon, got {}", h.t_total));
        ok = false;
    }
    if h.steps == 0 {
        errs.push("horizon.steps: need at least one step".into());
        ok = false;
    }
    ok.then_some((h.t_total, h.steps))
}

fn reject_periodic_evolution(pot: &Potential, errs: &mut Vec<String>) -> bool {
    if pot.is_periodic() {
        errs.push(
            "potential: time evolution runs on line domains; periodic potentials are spectrum-only"
                .into(),
        );
        false
    } else {
        true
    }
}

// Each section is checked independently before any combining, so one bad
// field never hides problems elsewhere in the file.
fn grid_problem_parts(
    cfg: &RunConfig,
    errs: &mut Vec<String>,
) -> Option<(ProblemSpec, ControlParametrization)> {
    let potential = build_potential(cfg, errs);
    let periodic = potential.as_ref().is_some_and(Potential::is_periodic);
    if let Some(p) = &potential {
        reject_periodic_evolution(p, errs);
    }
    let grid = build_grid(cfg, periodic, errs);
    let horizon = build_horizon(cfg, errs);
    let cost = build_cost(cfg, errs);
    let par = build_control(cfg, horizon.map(|h| h.0), errs);
    let (psi_ini, target) = build_state_pair(cfg, grid, potential.as_ref(), errs);
    let boundary = match cfg.boundary {
        Some(BoundarySpec::Transparent) => Boundary::Transparent,
        _ => Boundary::Dirichlet,
    };
    if !errs.is_empty() {
        return None;
    }
    let ((t_total, steps), cost, par, psi_ini, target) =
        (horizon?, cost?, par?, psi_ini?, target?);
    match ProblemSpec::new(
        grid?,
        potential?,
        psi_ini,
        target,
        t_total,
        steps,
        cost,
        boundary,
        par.clone(),
    ) {
        Ok(spec) => Some((spec, par)),
        Err(e) => {
            errs.push(format!("problem: {e}"));
            None
        }
    }
}

/// Build initial and target states when their prerequisites exist; always
/// report missing sections so those errors surface regardless.
fn build_state_pair(
    cfg: &RunConfig,
    grid: Option<Grid>,
    potential: Option<&Potential>,
    errs: &mut Vec<String>,
) -> (Option<Wavefunction>, Option<Wavefunction>) {
    if let (Some(grid), Some(pot)) = (grid, potential) {
        let mut basis = None;
        let psi_ini =
            build_state("initial_state", cfg.initial_state.as_ref(), grid, pot, &mut basis, errs);
        let target =
            build_state("target_state", cfg.target_state.as_ref(), grid, pot, &mut basis, errs);
        (psi_ini, target)
    } else {
        for (name, present) in [
            ("initial_state", cfg.initial_state.is_some()),
            ("target_state", cfg.target_state.is_some()),
        ] {
            if !present {
                errs.push(format!("{name}: missing section"));
            }
        }
        (None, None)
    }
}

fn build_grid_solve(cfg: &RunConfig, seed: Option<u64>, errs: &mut Vec<String>) -> Option<Built> {
    let parts = grid_problem_parts(cfg, errs);
    let opts = build_opts(cfg, parts.as_ref().map(|p| &p.1), errs);
    let (spec, par) = parts?;
    let stride = cfg.emit.as_ref().and_then(|e| e.snapshot_stride).unwrap_or(0);
    let theta0 = initial_params(&par, seed);
    let seeds = cfg.optimizer.as_ref().and_then(|o| o.multistart_seeds.clone());
    Some(Built::SolveGrid { spec, par, opts, seeds, theta0, stride })
}

fn build_two_level(cfg: &RunConfig, seed: Option<u64>, errs: &mut Vec<String>) -> Option<Built> {
    for (name, present) in [
        ("grid", cfg.grid.is_some()),
        ("potential", cfg.potential.is_some()),
        ("boundary", cfg.boundary.is_some()),
    ] {
        if present {
            errs.push(format!("{name}: not used by a two-level problem"));
        }
    }
    let horizon = build_horizon(cfg, errs);
    let par = build_control(cfg, horizon.map(|h| h.0), errs);
    let opts = build_opts(cfg, par.as_ref(), errs);
    let beta = cfg.cost.as_ref().map_or(0.0, |c| c.beta);
    let order = match cfg.magnus_order.unwrap_or(2) {
        1 => Some(MagnusOrder::One),
        2 => Some(MagnusOrder::Two),
        o => {
            errs.push(format!("magnus_order: supported orders are 1 and 2, got {o}"));
            None
        }
    };
    let splitting = cfg.splitting.unwrap_or(0.0);
    if !splitting.is_finite() {
        errs.push(format!("splitting: must be finite, got {splitting}"));
        return None;
    }
    let ((t_total, steps), par, order) = (horizon?, par?, order?);
    let half = C64::new(0.5, 0.0);
    let drift = DMatrix::from_row_slice(
        2,
        2,
        &[
            half * splitting,
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            -half * splitting,
        ],
    );
    let sigma_x_half =
        DMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), half, half, C64::new(0.0, 0.0)]);
    let sys = match FiniteLevelSystem::new(drift, vec![sigma_x_half]) {
        Ok(s) => s,
        Err(e) => {
            errs.push(format!("problem: {e}"));
            return None;
        }
    };
    let e0 = DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
    let e1 = DVector::from_vec(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
    let obj = match FiniteLevelObjective::new(sys, e0, e1, t_total, steps, order, par.clone(), beta)
    {
        Ok(o) => o,
        Err(e) => {
            errs.push(format!("problem: {e}"));
            return None;
        }
    };
    let theta0 = initial_params(&par, seed);
    let seeds = cfg.optimizer.as_ref().and_then(|o| o.multistart_seeds.clone());
    Some(Built::SolveTwoLevel { obj, par, opts, seeds, theta0, t_total, steps })
}

fn build_gradcheck(cfg: &RunConfig, seed: Option<u64>, errs: &mut Vec<String>) -> Option<Built> {
    let parts = grid_problem_parts(cfg, errs);
    let gc = cfg.gradcheck.clone().unwrap_or(GradcheckSpec { eps: None, theta: None });
    let eps = gc.eps.unwrap_or_else(|| vec![1e-3, 1e-4, 1e-5]);
    for e in &eps {
        if !(*e > 0.0 && e.is_finite()) {
            errs.push(format!("gradcheck.eps: steps must be positive and finite, got {e}"));
        }
    }
    let (spec, par) = parts?;
    let theta = match gc.theta {
        Some(t) => {
            if t.len() != par.param_count() {
                errs.push(format!(
                    "gradcheck.theta: expected {} parameters, got {}",
                    par.param_count(),
                    t.len()
                ));
                return None;
            }
            t
        }
        None => initial_params(&par, Some(seed.unwrap_or(1))),
    };
    if !errs.is_empty() {
        return None;
    }
    Some(Built::Gradcheck { spec, theta, eps })
}

fn build_spectrum(cfg: &RunConfig, errs: &mut Vec<String>) -> Option<Built> {
    let potential = build_potential(cfg, errs);
    let periodic = potential.as_ref().is_some_and(Potential::is_periodic);
    let bc = if periodic { BoundaryKind::Periodic } else { BoundaryKind::Dirichlet };
    let grid = build_grid(cfg, periodic, errs);
    let levels = cfg.spectrum.as_ref().map_or_else(default_levels, |s| s.levels);
    if levels == 0 {
        errs.push("spectrum.levels: need at least one level".into());
    } else if let Some(g) = &grid {
        if levels + 2 > g.j {
            errs.push(format!(
                "spectrum.levels: {} levels need a denser grid than j = {}",
                levels, g.j
            ));
        }
    }
    if !errs.is_empty() {
        return None;
    }
    Some(Built::Spectrum { potential: potential?, grid: grid?, bc, levels })
}

fn build_simulate(cfg: &RunConfig, errs: &mut Vec<String>) -> Option<Built> {
    let potential = build_potential(cfg, errs);
    let periodic = potential.as_ref().is_some_and(Potential::is_periodic);
    if let Some(p) = &potential {
        reject_periodic_evolution(p, errs);
    }
    let grid = build_grid(cfg, periodic, errs);
    let horizon = build_horizon(cfg, errs);
    let psi0 = if let (Some(grid), Some(pot)) = (grid, potential.as_ref()) {
        let mut basis = None;
        build_state("initial_state", cfg.initial_state.as_ref(), grid, pot, &mut basis, errs)
    } else {
        if cfg.initial_state.is_none() {
            errs.push("initial_state: missing section".into());
        }
        None
    };
    let signal = match &cfg.signal {
        None => {
            errs.push("signal: missing section".into());
            None
        }
        Some(SignalSpec::Constant { value }) => Some(ControlSignal::Constant(*value)),
        Some(SignalSpec::Piecewise { values }) => {
            if values.is_empty() {
                errs.push("signal.values: need at least one value".into());
                None
            } else {
                Some(ControlSignal::PiecewiseConstant(values.clone()))
            }
        }
    };
    let boundary = match cfg.boundary {
        Some(BoundarySpec::Transparent) => Boundary::Transparent,
        _ => Boundary::Dirichlet,
    };
    if let (Some((t_total, _)), Some(t_exit)) = (horizon, cfg.exit_time) {
        if !(t_exit > 0.0 && t_exit <= t_total) {
            errs.push(format!(
                "exit_time: must lie inside the horizon (0, {t_total}], got {t_exit}"
            ));
        }
    }
    let stride = cfg.emit.as_ref().and_then(|e| e.snapshot_stride).unwrap_or(8);
    let exterior = match cfg.emit.as_ref().and_then(|e| e.exterior.as_ref()) {
        None => None,
        Some(ext) => {
            let mut ok = true;
            if boundary != Boundary::Transparent {
                errs.push(
                    "emit.exterior: reconstruction assumes an open right boundary; \
                     set boundary to \"transparent\""
                        .into(),
                );
                ok = false;
            }
            if let Some(g) = &grid {
                let edge = g.x(g.j - 1);
                if ext.x < edge {
                    errs.push(format!(
                        "emit.exterior.x: must lie at or beyond the right grid edge {edge}, got {}",
                        ext.x
                    ));
                    ok = false;
                }
            }
            let nodes = ext.nodes.unwrap_or(64);
            if nodes < 4 {
                errs.push(format!(
                    "emit.exterior.nodes: need at least 4 contour nodes, got {nodes}"
                ));
                ok = false;
            }
            ok.then_some((ext.x, nodes))
        }
    };
    if !errs.is_empty() {
        return None;
    }
    let ((t_total, steps), psi0, signal) = (horizon?, psi0?, signal?);
    Some(Built::Simulate {
        potential: potential?,
        psi0,
        signal,
        t_total,
        steps,
        boundary,
        stride,
        exit_time: cfg.exit_time,
        exterior,
    })
}
