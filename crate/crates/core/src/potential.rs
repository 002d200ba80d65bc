//! Potential families with constant spatial tails and a scalar control coupling.
//!
//! Every family exposes the same contract: `eval(x, t, eta)` is the total
//! potential, `control_profile(x)` is its derivative with respect to the
//! control value, and outside the window `[x_l, x_r]` the potential is
//! constant in `x` so that artificial-boundary closures stay valid.

use crate::error::{CoreError, Result};
use crate::grid::Grid;

/// Config names of the built-in families, in registration order.
pub const REGISTERED_NAMES: [&str; 4] = [
    "piecewise_custom",
    "harmonic_driven",
    "transmon",
    "fluxonium",
];

/// Static interior profile used by the piecewise family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaseProfile {
    Zero,
    /// ω²x²/(2m)
    Harmonic { mass: f64, omega: f64 },
}

impl BaseProfile {
    fn eval(&self, x: f64) -> f64 {
        match *self {
            BaseProfile::Zero => 0.0,
            BaseProfile::Harmonic { mass, omega } => omega * omega * x * x / (2.0 * mass),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    /// Fixed tail constants, a static interior profile, and an additive
    /// control that acts only strictly inside the window (vanishing-tail
    /// control class).
    PiecewiseCustom { v_l: f64, v_r: f64, base: BaseProfile },
    /// Driven harmonic oscillator ω²x²/(2m) − η·x. With `corrected` the
    /// flattening term is added outside the window so each tail sits at the
    /// window-edge value; without it the tails grow and boundary closures
    /// must reject the potential.
    HarmonicDriven { mass: f64, omega: f64, corrected: bool },
    /// Phase-basis qubit potential −(E_J+η)cos(φ) with kinetic prefactor
    /// 4E_C; lives on a 2π-periodic domain.
    Transmon { e_c: f64, e_j: f64, n_g: f64 },
    /// −(E_J+η)cos(φ+φ_ext) + ½E_L·φ² with kinetic prefactor 4E_C; the
    /// inductive term confines, so a truncated box with zero boundary
    /// conditions is appropriate.
    Fluxonium { e_c: f64, e_j: f64, e_l: f64, n_g: f64, phi_ext: f64 },
}

/// A potential family together with its spatial window and control bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    pub kind: PotentialKind,
    /// Left edge of the window outside which the potential is x-constant.
    pub x_l: f64,
    /// Right edge of that window.
    pub x_r: f64,
    eta_lo: f64,
    eta_hi: f64,
}

/// Outcome of sampling the constant-tail requirement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailReport {
    pub ok: bool,
    pub max_deviation: f64,
    /// Worst offending sample `(x, eta)`, when any tail node was checked.
    pub worst: Option<(f64, f64)>,
}

/// Flattening term for the driven oscillator: zero inside `(x_l, x_r)`,
/// and on each tail the constant that pins the total potential to its
/// window-edge value for the current drive strength.
pub fn oscillator_correction(
    mass: f64,
    omega: f64,
    x_l: f64,
    x_r: f64,
    x: f64,
    drive: f64,
) -> f64 {
    let raw = |x: f64| omega * omega * x * x / (2.0 * mass) - drive * x;
    if x > x_l && x < x_r {
        0.0
    } else if x <= x_l {
        raw(x_l) - raw(x)
    } else {
        raw(x_r) - raw(x)
    }
}

impl Potential {
    pub fn new(kind: PotentialKind, x_l: f64, x_r: f64, eta_bounds: (f64, f64)) -> Result<Self> {
        if !(x_l.is_finite() && x_r.is_finite() && x_l < x_r) {
            return Err(CoreError::InvalidArgument(format!(
                "window must satisfy x_l < x_r with finite values, got [{x_l}, {x_r}]"
            )));
        }
        let (eta_lo, eta_hi) = eta_bounds;
        if eta_lo.is_nan() || eta_hi.is_nan() || eta_lo > eta_hi {
            return Err(CoreError::InvalidArgument(format!(
                "control bounds must satisfy lo <= hi, got [{eta_lo}, {eta_hi}]"
            )));
        }
        match kind {
            PotentialKind::PiecewiseCustom { v_l, v_r, base } => {
                if !(v_l.is_finite() && v_r.is_finite()) {
                    return Err(CoreError::InvalidArgument(
                        "tail constants must be finite".into(),
                    ));
                }
                if let BaseProfile::Harmonic { mass, .. } = base {
                    if mass <= 0.0 {
                        return Err(CoreError::InvalidArgument(
                            "harmonic base requires mass > 0".into(),
                        ));
                    }
                }
            }
            PotentialKind::HarmonicDriven { mass, omega, .. } => {
                if mass <= 0.0 || !omega.is_finite() {
                    return Err(CoreError::InvalidArgument(
                        "driven oscillator requires mass > 0 and finite omega".into(),
                    ));
                }
            }
            PotentialKind::Transmon { e_c, e_j, .. } => {
                if e_c <= 0.0 || e_j <= 0.0 {
                    return Err(CoreError::InvalidArgument(
                        "transmon requires E_C > 0 and E_J > 0".into(),
                    ));
                }
                if eta_lo.is_finite() && e_j + eta_lo <= 0.0 {
                    return Err(CoreError::InvalidArgument(format!(
                        "control lower bound {eta_lo} would drive E_J nonpositive"
                    )));
                }
            }
            PotentialKind::Fluxonium { e_c, e_j, e_l, .. } => {
                if e_c <= 0.0 || e_j <= 0.0 || e_l <= 0.0 {
                    return Err(CoreError::InvalidArgument(
                        "fluxonium requires E_C, E_J, E_L > 0".into(),
                    ));
                }
                if eta_lo.is_finite() && e_j + eta_lo <= 0.0 {
                    return Err(CoreError::InvalidArgument(format!(
                        "control lower bound {eta_lo} would drive E_J nonpositive"
                    )));
                }
            }
        }
        Ok(Potential { kind, x_l, x_r, eta_lo, eta_hi })
    }

    pub fn eta_bounds(&self) -> (f64, f64) {
        (self.eta_lo, self.eta_hi)
    }

    pub fn check_control(&self, eta: f64) -> Result<()> {
        if eta.is_nan() || eta < self.eta_lo || eta > self.eta_hi {
            return Err(CoreError::ControlOutOfBounds {
                value: eta,
                lo: self.eta_lo,
                hi: self.eta_hi,
            });
        }
        Ok(())
    }

    /// True for families living on a periodic phase domain (no tails).
    pub fn is_periodic(&self) -> bool {
        matches!(self.kind, PotentialKind::Transmon { .. })
    }

    /// Coefficient of −∂²/∂x² in the Hamiltonian (4E_C for the qubit
    /// families, 1 otherwise).
    pub fn kinetic_coeff(&self) -> f64 {
        match self.kind {
            PotentialKind::Transmon { e_c, .. } | PotentialKind::Fluxonium { e_c, .. } => 4.0 * e_c,
            _ => 1.0,
        }
    }

    /// Offset charge, when the family has one.
    pub fn offset_charge(&self) -> f64 {
        match self.kind {
            PotentialKind::Transmon { n_g, .. } | PotentialKind::Fluxonium { n_g, .. } => n_g,
            _ => 0.0,
        }
    }

    fn eval_raw(&self, x: f64, eta: f64) -> f64 {
        match self.kind {
            PotentialKind::PiecewiseCustom { v_l, v_r, base } => {
                if x <= self.x_l {
                    v_l
                } else if x >= self.x_r {
                    v_r
                } else {
                    base.eval(x) + eta
                }
            }
            PotentialKind::HarmonicDriven { mass, omega, corrected } => {
                let raw = |x: f64| omega * omega * x * x / (2.0 * mass) - eta * x;
                if corrected {
                    raw(x.clamp(self.x_l, self.x_r))
                } else {
                    raw(x)
                }
            }
            PotentialKind::Transmon { e_j, .. } => -(e_j + eta) * x.cos(),
            PotentialKind::Fluxonium { e_j, e_l, phi_ext, .. } => {
                -(e_j + eta) * (x + phi_ext).cos() + 0.5 * e_l * x * x
            }
        }
    }

    /// Total potential at position `x` and time `t` for control value `eta`.
    /// `t` enters only through `eta`; it is accepted so callers can keep a
    /// uniform signature for time-dependent drives.
    pub fn eval(&self, x: f64, _t: f64, eta: f64) -> Result<f64> {
        self.check_control(eta)?;
        Ok(self.eval_raw(x, eta))
    }

    /// Potential sampled on every grid node (single bounds check).
    pub fn values_on(&self, grid: &Grid, _t: f64, eta: f64) -> Result<Vec<f64>> {
        self.check_control(eta)?;
        Ok((0..grid.j).map(|i| self.eval_raw(grid.x(i), eta)).collect())
    }

    /// ∂V/∂η at `x`; time-independent for every built-in family.
    pub fn control_profile(&self, x: f64) -> f64 {
        match self.kind {
            PotentialKind::PiecewiseCustom { .. } => {
                if x > self.x_l && x < self.x_r {
                    1.0
                } else {
                    0.0
                }
            }
            PotentialKind::HarmonicDriven { corrected, .. } => {
                if corrected {
                    -x.clamp(self.x_l, self.x_r)
                } else {
                    -x
                }
            }
            PotentialKind::Transmon { .. } => -x.cos(),
            PotentialKind::Fluxonium { phi_ext, .. } => -(x + phi_ext).cos(),
        }
    }

    /// Tail constants `(V_l, V_r)` for control value `eta`; `None` on a
    /// periodic domain where no tails exist.
    pub fn tail_constants(&self, eta: f64) -> Option<(f64, f64)> {
        if self.is_periodic() {
            return None;
        }
        Some((self.eval_raw(self.x_l, eta), self.eval_raw(self.x_r, eta)))
    }

    /// Sample the potential on the grid nodes outside the window for each
    /// control value and report the worst deviation from the tail constants.
    pub fn validate_tail_condition(&self, grid: &Grid, etas: &[f64]) -> TailReport {
        if self.is_periodic() {
            return TailReport { ok: true, max_deviation: 0.0, worst: None };
        }
        let mut max_deviation = 0.0;
        let mut worst = None;
        for &eta in etas {
            let (v_l, v_r) = self.tail_constants(eta).unwrap();
            for i in 0..grid.j {
                let x = grid.x(i);
                let target = if x <= self.x_l {
                    v_l
                } else if x >= self.x_r {
                    v_r
                } else {
                    continue;
                };
                let dev = (self.eval_raw(x, eta) - target).abs();
                if dev > max_deviation {
                    max_deviation = dev;
                    worst = Some((x, eta));
                }
            }
        }
        TailReport { ok: max_deviation < 1e-12, max_deviation, worst }
    }
}
