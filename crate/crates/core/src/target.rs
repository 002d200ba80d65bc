//! Discrete target states: register states, the quantum Fourier transform,
//! and the flexible-representation image encoding, plus projection of
//! abstract targets onto a grid eigenbasis.

use nalgebra::DMatrix;
use rustfft::FftPlanner;

use crate::eigen::EigenBasis;
use crate::error::{CoreError, Result};
use crate::grid::Wavefunction;
use crate::C64;

/// Amplitudes of an `n`-qubit register, unit norm in ℓ².
#[derive(Debug, Clone, PartialEq)]
pub struct QubitState {
    n: usize,
    amps: Vec<C64>,
}

impl QubitState {
    pub fn new(n: usize, amps: Vec<C64>) -> Result<Self> {
        if n == 0 {
            return Err(CoreError::InvalidArgument("need at least one qubit".into()));
        }
        let dim = 1usize << n;
        if amps.len() != dim {
            return Err(CoreError::InvalidArgument(format!(
                "{n} qubits need {dim} amplitudes, got {}",
                amps.len()
            )));
        }
        let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(CoreError::NotNormalized { norm });
        }
        Ok(QubitState { n, amps })
    }

    /// Computational basis state `|j⟩`.
    pub fn basis(n: usize, j: usize) -> Result<Self> {
        if n == 0 || j >= (1usize << n) {
            return Err(CoreError::InvalidArgument(format!(
                "basis index {j} outside an {n}-qubit register"
            )));
        }
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
        amps[j] = C64::new(1.0, 0.0);
        Ok(QubitState { n, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// `2^{−n/2}·Σ_j |j⟩` — every amplitude equal and real.
pub fn even_superposition(n: usize) -> Result<QubitState> {
    if n == 0 {
        return Err(CoreError::InvalidArgument("need at least one qubit".into()));
    }
    let dim = 1usize << n;
    let a = (dim as f64).sqrt().recip();
    Ok(QubitState { n, amps: vec![C64::new(a, 0.0); dim] })
}

/// Dense transform matrix `F_{jk} = ω^{jk}/2^{n/2}` with `ω = e^{2πi/2^n}`.
/// Capped at 10 qubits; use [`apply_qft`] to act on larger registers.
pub fn qft_matrix(n: usize) -> Result<DMatrix<C64>> {
    if n == 0 || n > 10 {
        return Err(CoreError::InvalidArgument(format!(
            "dense transform supports 1..=10 qubits, got {n}"
        )));
    }
    let dim = 1usize << n;
    let scale = (dim as f64).sqrt().recip();
    Ok(DMatrix::from_fn(dim, dim, |j, k| {
        // reduce j·k modulo the dimension before forming the angle
        let phase = std::f64::consts::TAU * ((j * k) % dim) as f64 / dim as f64;
        scale * C64::new(phase.cos(), phase.sin())
    }))
}

/// Apply the transform to a register state via the fast algorithm
/// (`ω^{+jk}` convention, unitary normalization).
pub fn apply_qft(state: &QubitState) -> Result<QubitState> {
    let dim = state.dim();
    let mut buf = state.amps.clone();
    FftPlanner::new().plan_fft_inverse(dim).process(&mut buf);
    let scale = (dim as f64).sqrt().recip();
    for z in &mut buf {
        *z *= scale;
    }
    Ok(QubitState { n: state.n, amps: buf })
}

/// A `2^n × 2^n` grayscale image as pixel angles `θ ∈ [0, π/2]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FrqiImage {
    n: usize,
    thetas: Vec<f64>,
}

impl FrqiImage {
    pub fn new(n: usize, thetas: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(CoreError::InvalidArgument(
                "image needs at least one qubit per axis".into(),
            ));
        }
        let pixels = 1usize << (2 * n);
        if thetas.len() != pixels {
            return Err(CoreError::InvalidArgument(format!(
                "a side-2^{n} image needs {pixels} pixels, got {}",
                thetas.len()
            )));
        }
        const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;
        for (i, &t) in thetas.iter().enumerate() {
            if !((-1e-12..=HALF_PI + 1e-12).contains(&t)) {
                return Err(CoreError::InvalidArgument(format!(
                    "pixel {i} angle {t} outside [0, π/2]"
                )));
            }
        }
        Ok(FrqiImage { n, thetas })
    }

    /// Grayscale values in `[0, 1]`, row-major, mapped to `θ = (π/2)·value`.
    pub fn from_grayscale(n: usize, values: &[f64]) -> Result<Self> {
        for (i, &v) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(CoreError::InvalidArgument(format!(
                    "pixel {i} grayscale {v} outside [0, 1]"
                )));
            }
        }
        FrqiImage::new(n, values.iter().map(|v| v * std::f64::consts::FRAC_PI_2).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Pixels per side, `2^n`.
    pub fn side(&self) -> usize {
        1 << self.n
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn theta(&self, row: usize, col: usize) -> f64 {
        self.thetas[row * self.side() + col]
    }
}

/// Encode an image into a `2n+1`-qubit register: for pixel `i` the color
/// qubit (most significant) carries `cos θ_i` on `|0⟩` and `sin θ_i` on
/// `|1⟩`, each scaled by `2^{−n}`; positions are row-major.
pub fn frqi_encode(img: &FrqiImage) -> Result<QubitState> {
    let pixels = img.thetas.len();
    let scale = 1.0 / (1usize << img.n) as f64;
    let mut amps = vec![C64::new(0.0, 0.0); 2 * pixels];
    for (i, &t) in img.thetas.iter().enumerate() {
        amps[i] = C64::new(scale * t.cos(), 0.0);
        amps[pixels + i] = C64::new(scale * t.sin(), 0.0);
    }
    QubitState::new(2 * img.n + 1, amps)
}

/// Recover the pixel angles from an encoded register. Each pixel's two-entry
/// block must carry the weight `2^{−n}` the encoding gives it (within 1e−6);
/// phases are discarded, folding every angle into `[0, π/2]`.
pub fn frqi_decode(state: &QubitState) -> Result<FrqiImage> {
    let qubits = state.n_qubits();
    if qubits < 3 || qubits % 2 == 0 {
        return Err(CoreError::InvalidArgument(format!(
            "an encoded image has an odd register of at least 3 qubits, got {qubits}"
        )));
    }
    let n = (qubits - 1) / 2;
    let pixels = 1usize << (2 * n);
    let expected = 1.0 / (1usize << n) as f64;
    let mut thetas = Vec::with_capacity(pixels);
    for i in 0..pixels {
        let c = state.amps[i].norm();
        let s = state.amps[pixels + i].norm();
        let block = (c * c + s * s).sqrt();
        if (block - expected).abs() > 1e-6 {
            return Err(CoreError::InvalidArgument(format!(
                "pixel {i} block norm {block:.3e} deviates from {expected:.3e}; \
                 not a valid image encoding"
            )));
        }
        thetas.push(s.atan2(c));
    }
    FrqiImage::new(n, thetas)
}

/// `Σ_i c_i·φ_i` over the lowest eigenbasis states; the coefficients must be
/// unit-norm (within 1e−9), so orthonormality of the basis makes the result
/// a unit-norm grid state.
pub fn superposition_target(coeffs: &[C64], basis: &EigenBasis) -> Result<Wavefunction> {
    if coeffs.is_empty() || coeffs.len() > basis.states.len() {
        return Err(CoreError::InvalidArgument(format!(
            "{} coefficients for a {}-state basis",
            coeffs.len(),
            basis.states.len()
        )));
    }
    let norm = coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(CoreError::NotNormalized { norm });
    }
    let mut padded = coeffs.to_vec();
    padded.resize(basis.states.len(), C64::new(0.0, 0.0));
    basis.reconstruct(&padded)
}
