//! Transparent boundary closures for the Crank–Nicolson scheme.
//!
//! On a tail where the potential is a constant `V_c`, the Laplace transform
//! of the free exterior problem gives the derivative relation
//! `∂_x ŵ = −√(−is + V_c)·ŵ` at the right edge. The discrete counterpart is
//! a convolution in time: the Z-transform of the exterior difference scheme
//! has a decaying characteristic root `r(z)`, and expanding it in powers of
//! `z⁻¹` yields weights `ℓ_k` with
//!
//! `u^n_boundary = Σ_{k=0}^{n} ℓ_k · u^{n−k}_inner`,
//!
//! where `inner` is the node one spacing inside the boundary. The same
//! coefficient sequence closes both ends (the scheme is reflection
//! symmetric); sidedness enters only through the tail constant and through
//! which node pair the relation is applied to.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::io::Write;
use std::sync::{Arc, Mutex};

use once_cell::sync::Lazy;
use rustfft::FftPlanner;

use crate::error::{CoreError, Result};
use crate::grid::Wavefunction;
use crate::spectral::{laplace_sample, LaplaceSample};
use crate::C64;

/// Boundary symbol `−√(−is + V_c)` with the branch fixed by decay of the
/// exterior solution: `Re √(−is+V_c) > 0`. Errors when the radicand lies on
/// the branch cut (negative real axis); the degenerate tip `s = −i·V_c`
/// returns 0.
pub fn tbc_symbol(s: C64, v_c: f64) -> Result<C64> {
    let radicand = -C64::i() * s + v_c;
    if radicand.im == 0.0 && radicand.re < 0.0 {
        return Err(CoreError::BranchError(format!(
            "radicand {radicand} lies on the branch cut"
        )));
    }
    // principal sqrt has Re ≥ 0, and Re = 0 only on the cut handled above
    Ok(-radicand.sqrt())
}

/// Convolution weights closing one boundary of the Crank–Nicolson system.
#[derive(Debug, Clone)]
pub struct TbcKernel {
    pub v_c: f64,
    pub dt: f64,
    pub dx: f64,
    coeffs: Arc<Vec<C64>>,
}

impl TbcKernel {
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, lag: usize) -> C64 {
        self.coeffs[lag]
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    /// Columns `lag, Re(ℓ), Im(ℓ)`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "lag,re,im")?;
        for (k, c) in self.coeffs.iter().enumerate() {
            writeln!(w, "{},{:.17e},{:.17e}", k, c.re, c.im)?;
        }
        Ok(())
    }
}

/// Decaying characteristic root of the exterior Crank–Nicolson recursion for
/// a zero tail potential: `r² − (2+κ)r + 1 = 0` with
/// `κ(z) = −(2i·dx²/dt)(z−1)/(z+1)`. The larger root is computed without
/// cancellation and inverted (the roots multiply to 1).
fn decaying_root(z: C64, dt: f64, dx: f64) -> C64 {
    let kappa = -C64::new(0.0, 2.0 * dx * dx / dt) * (z - 1.0) / (z + 1.0);
    decaying_root_of(kappa)
}

/// Root of `r² − (2+κ)r + 1 = 0` with `|r| ≤ 1`, via the larger root to avoid
/// cancellation (the roots multiply to 1).
pub(crate) fn decaying_root_of(kappa: C64) -> C64 {
    let b = 1.0 + kappa / 2.0;
    let disc = (b * b - 1.0).sqrt();
    let big = if (b + disc).norm_sqr() >= (b - disc).norm_sqr() { b + disc } else { b - disc };
    1.0 / big
}

type KernelKey = (u64, u64, usize);
static BASE_KERNELS: Lazy<Mutex<HashMap<KernelKey, Arc<Vec<C64>>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

/// Coefficients for the zero-potential tail, extracted from `r(z)` sampled on
/// a circle of radius ρ > 1 by an inverse FFT. The radius satisfies
/// ρ^M = 1e8, and M ≥ 4N keeps the ρ^k round-off amplification below 100
/// while the aliasing error stays near 1e−8·|ℓ_{k+M}|.
fn base_kernel(dt: f64, dx: f64, n: usize) -> Arc<Vec<C64>> {
    let key = (dt.to_bits(), dx.to_bits(), n);
    if let Some(hit) = BASE_KERNELS.lock().unwrap().get(&key) {
        return hit.clone();
    }
    let m = (4 * n.next_power_of_two()).max(1024);
    let rho = 1e8_f64.powf(1.0 / m as f64);
    let mut samples: Vec<C64> = (0..m)
        .map(|j| decaying_root(C64::from_polar(rho, TAU * j as f64 / m as f64), dt, dx))
        .collect();
    FftPlanner::new().plan_fft_inverse(m).process(&mut samples);
    let coeffs: Vec<C64> = (0..n).map(|k| samples[k] * (rho.powi(k as i32) / m as f64)).collect();
    let arc = Arc::new(coeffs);
    BASE_KERNELS.lock().unwrap().insert(key, arc.clone());
    arc
}

/// Kernel of `n` convolution weights for time step `dt`, spacing `dx`, and
/// tail constant `v_c`. A constant tail is a gauge phase on the exterior
/// solution, so the weights are exactly the zero-potential weights modulated
/// by `e^{−i·v_c·k·dt}`; this keeps the boundary rows gauge covariant.
pub fn discrete_tbc_kernel(dt: f64, dx: f64, v_c: f64, n: usize) -> Result<TbcKernel> {
    if !(dt > 0.0 && dt.is_finite()) || !(dx > 0.0 && dx.is_finite()) {
        return Err(CoreError::InvalidArgument(format!(
            "kernel requires dt > 0 and dx > 0, got dt={dt}, dx={dx}"
        )));
    }
    if n < 2 {
        return Err(CoreError::InvalidArgument(format!(
            "kernel needs at least 2 weights, got {n}"
        )));
    }
    if !v_c.is_finite() {
        return Err(CoreError::InvalidArgument("tail constant must be finite".into()));
    }
    let base = base_kernel(dt, dx, n);
    let coeffs = if v_c == 0.0 {
        base
    } else {
        Arc::new(
            base.iter()
                .enumerate()
                .map(|(k, c)| c * C64::from_polar(1.0, -v_c * k as f64 * dt))
                .collect(),
        )
    };
    Ok(TbcKernel { v_c, dt, dx, coeffs })
}

/// Laplace-domain exterior values `ŵ(x, s) = e^{−√(−is+V_r)(x−x_r)}·v̂(x_r, s)`
/// from a recorded boundary trace: the decaying branch extends the solution
/// past the computational edge without ever solving there.
pub fn exterior_reconstruct(
    trace: &[C64],
    dt: f64,
    x: f64,
    x_r: f64,
    v_r: f64,
    s_grid: &[C64],
) -> Result<Vec<LaplaceSample>> {
    if x < x_r {
        return Err(CoreError::InvalidArgument(format!(
            "exterior point {x} lies inside the boundary {x_r}"
        )));
    }
    s_grid
        .iter()
        .map(|&s| {
            let symbol = tbc_symbol(s, v_r)?;
            let boundary = laplace_sample(trace, dt, s)?;
            Ok(LaplaceSample { s, value: (symbol * (x - x_r)).exp() * boundary })
        })
        .collect()
}

/// Largest interior-norm ratio `‖ψ(t)‖/‖ψ(0)‖` over all recorded times
/// `t ≥ t_exit`: near zero once a packet has left through a transparent
/// boundary, near one for a reflecting wall.
pub fn reflection_measure(traj: &[Wavefunction], dt: f64, t_exit: f64) -> Result<f64> {
    if traj.is_empty() || dt <= 0.0 {
        return Err(CoreError::InvalidArgument(
            "reflection measure needs a nonempty trajectory and dt > 0".into(),
        ));
    }
    let t_end = (traj.len() - 1) as f64 * dt;
    if t_exit > t_end {
        return Err(CoreError::InvalidArgument(format!(
            "t_exit {t_exit} beyond recorded trajectory end {t_end}"
        )));
    }
    let norm0 = traj[0].norm();
    if norm0 == 0.0 {
        return Err(CoreError::InvalidArgument("initial state has zero norm".into()));
    }
    let start = if t_exit <= 0.0 { 0 } else { (t_exit / dt).ceil() as usize };
    Ok(traj[start..].iter().map(|w| w.norm() / norm0).fold(0.0, f64::max))
}
