//! Magnus-expansion propagation for finite-level systems.
//!
//! A system is a Hermitian drift plus Hermitian control matrices with scalar
//! amplitude signals. Each time step exponentiates a truncated Magnus exponent
//! (midpoint rule at order one, two-point Gauss plus the leading commutator at
//! order two); the propagator is the ordered product of the step exponentials.

use nalgebra::DMatrix;

use crate::eigen::hermitian_eigen;
use crate::error::{CoreError, Result};
use crate::propagator::ControlSignal;
use crate::C64;

/// Dense-exponential methods are only trusted up to this dimension.
pub const MAX_DENSE_DIM: usize = 64;

const GAUSS_LO: f64 = 0.211_324_865_405_187_12;
const GAUSS_HI: f64 = 0.788_675_134_594_812_9;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum MagnusOrder {
    One,
    Two,
}

impl MagnusOrder {
    /// Quadrature node offsets within a step, in units of the step length.
    pub fn node_offsets(self) -> &'static [f64] {
        match self {
            MagnusOrder::One => &[0.5],
            MagnusOrder::Two => &[GAUSS_LO, GAUSS_HI],
        }
    }
}

/// Drift plus control Hamiltonians sharing one dimension.
#[derive(Clone, Debug)]
pub struct FiniteLevelSystem {
    h0: DMatrix<C64>,
    controls: Vec<DMatrix<C64>>,
}

fn check_hermitian(m: &DMatrix<C64>, what: &str) -> Result<()> {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    if worst > 1e-12 {
        return Err(CoreError::NotHermitian(worst));
    }
    let _ = what;
    Ok(())
}

impl FiniteLevelSystem {
    pub fn new(h0: DMatrix<C64>, controls: Vec<DMatrix<C64>>) -> Result<Self> {
        let d = h0.nrows();
        if d < 2 || h0.ncols() != d {
            return Err(CoreError::InvalidArgument(format!(
                "drift must be square with dimension >= 2, got {}x{}",
                h0.nrows(),
                h0.ncols()
            )));
        }
        if d > MAX_DENSE_DIM {
            return Err(CoreError::Unsupported(format!(
                "dimension {d} exceeds dense limit {MAX_DENSE_DIM}"
            )));
        }
        check_hermitian(&h0, "drift")?;
        for (idx, c) in controls.iter().enumerate() {
            if c.nrows() != d || c.ncols() != d {
                return Err(CoreError::InvalidArgument(format!(
                    "control {idx} has shape {}x{}, expected {d}x{d}",
                    c.nrows(),
                    c.ncols()
                )));
            }
            check_hermitian(c, "control")?;
        }
        Ok(Self { h0, controls })
    }

    pub fn dim(&self) -> usize {
        self.h0.nrows()
    }

    pub fn drift(&self) -> &DMatrix<C64> {
        &self.h0
    }

    pub fn controls(&self) -> &[DMatrix<C64>] {
        &self.controls
    }

    /// H = H0 + sum_j amps[j] * H_j.
    pub fn hamiltonian(&self, amps: &[f64]) -> Result<DMatrix<C64>> {
        if amps.len() != self.controls.len() {
            return Err(CoreError::InvalidArgument(format!(
                "expected {} control amplitudes, got {}",
                self.controls.len(),
                amps.len()
            )));
        }
        let mut h = self.h0.clone();
        for (a, c) in amps.iter().zip(&self.controls) {
            h += c * C64::new(*a, 0.0);
        }
        Ok(h)
    }
}

/// Truncated Magnus exponent over one step of length `delta`.
///
/// `node_amps` holds the control amplitudes sampled at the quadrature nodes
/// of the requested order (see [`MagnusOrder::node_offsets`]).
pub fn magnus_omega(
    sys: &FiniteLevelSystem,
    node_amps: &[Vec<f64>],
    delta: f64,
    order: MagnusOrder,
) -> Result<DMatrix<C64>> {
    if !(delta > 0.0) {
        return Err(CoreError::InvalidArgument(format!(
            "step length must be positive, got {delta}"
        )));
    }
    let nodes = order.node_offsets().len();
    if node_amps.len() != nodes {
        return Err(CoreError::InvalidArgument(format!(
            "expected {nodes} node samples, got {}",
            node_amps.len()
        )));
    }
    match order {
        MagnusOrder::One => {
            let h = sys.hamiltonian(&node_amps[0])?;
            Ok(h * C64::new(0.0, -delta))
        }
        MagnusOrder::Two => {
            let a1 = sys.hamiltonian(&node_amps[0])? * C64::new(0.0, -1.0);
            let a2 = sys.hamiltonian(&node_amps[1])? * C64::new(0.0, -1.0);
            let mean = (&a1 + &a2) * C64::new(delta / 2.0, 0.0);
            let comm = (&a2 * &a1 - &a1 * &a2)
                * C64::new(3.0_f64.sqrt() * delta * delta / 12.0, 0.0);
            Ok(mean + comm)
        }
    }
}

/// Matrix exponential by Pade-13 scaling and squaring.
pub fn expm(a: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let d = a.nrows();
    if d == 0 || a.ncols() != d {
        return Err(CoreError::InvalidArgument("exponential needs a square matrix".into()));
    }
    if d > MAX_DENSE_DIM {
        return Err(CoreError::Unsupported(format!(
            "dimension {d} exceeds dense limit {MAX_DENSE_DIM}"
        )));
    }
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA13: f64 = 5.371920351148152;

    let norm1 = (0..d)
        .map(|j| (0..d).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let s = if norm1 > THETA13 { (norm1 / THETA13).log2().ceil() as u32 } else { 0 };
    let scaled = a * C64::new(0.5_f64.powi(s as i32), 0.0);

    let id = DMatrix::<C64>::identity(d, d);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;

    let w1 = &a6 * C64::new(B[13], 0.0) + &a4 * C64::new(B[11], 0.0) + &a2 * C64::new(B[9], 0.0);
    let w2 = &a6 * C64::new(B[7], 0.0)
        + &a4 * C64::new(B[5], 0.0)
        + &a2 * C64::new(B[3], 0.0)
        + &id * C64::new(B[1], 0.0);
    let u = &scaled * (&a6 * &w1 + w2);

    let z1 = &a6 * C64::new(B[12], 0.0) + &a4 * C64::new(B[10], 0.0) + &a2 * C64::new(B[8], 0.0);
    let v = &a6 * &z1
        + &a6 * C64::new(B[6], 0.0)
        + &a4 * C64::new(B[4], 0.0)
        + &a2 * C64::new(B[2], 0.0)
        + &id * C64::new(B[0], 0.0);

    let rhs = &v + &u;
    let lhs = &v - &u;
    let mut result = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| CoreError::NumericalAbort("singular Pade denominator".into()))?;
    for _ in 0..s {
        result = &result * &result;
    }
    Ok(result)
}

/// exp(-i H t) for Hermitian H, via eigendecomposition.
pub fn exact_expm(h: &DMatrix<C64>, t: f64) -> Result<DMatrix<C64>> {
    let d = h.nrows();
    if d == 0 || h.ncols() != d {
        return Err(CoreError::InvalidArgument("exponential needs a square matrix".into()));
    }
    if d > MAX_DENSE_DIM {
        return Err(CoreError::Unsupported(format!(
            "dimension {d} exceeds dense limit {MAX_DENSE_DIM}"
        )));
    }
    check_hermitian(h, "exponent")?;
    let (energies, states) = hermitian_eigen(h)?;
    let mut u = DMatrix::<C64>::zeros(d, d);
    for (e, v) in energies.iter().zip(&states) {
        let phase = C64::from_polar(1.0, -e * t);
        for i in 0..d {
            for j in 0..d {
                u[(i, j)] += phase * v[i] * v[j].conj();
            }
        }
    }
    Ok(u)
}

/// Accumulated propagation result; `u == exp(omega)` with anti-Hermitian
/// `omega` (the principal logarithm of the step-exponential product).
#[derive(Clone, Debug)]
pub struct MagnusResult {
    pub omega: DMatrix<C64>,
    pub order: MagnusOrder,
    pub u: DMatrix<C64>,
}

fn unitary_log(u: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let d = u.nrows();
    let schur = u
        .clone()
        .try_schur(1e-13, 100_000)
        .ok_or_else(|| CoreError::EigenFailure("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();
    let mut log_t = DMatrix::<C64>::zeros(d, d);
    for i in 0..d {
        log_t[(i, i)] = C64::new(0.0, t[(i, i)].arg());
    }
    Ok(&q * log_t * q.adjoint())
}

/// Ordered product of per-step Magnus exponentials over [0, t_total].
///
/// One amplitude signal per control matrix; signals are sampled at the
/// quadrature nodes inside each step.
pub fn magnus_propagate(
    sys: &FiniteLevelSystem,
    signals: &[ControlSignal],
    t_total: f64,
    steps: usize,
    order: MagnusOrder,
) -> Result<MagnusResult> {
    if steps == 0 {
        return Err(CoreError::InvalidArgument("step count must be at least 1".into()));
    }
    if !(t_total > 0.0) {
        return Err(CoreError::InvalidArgument(format!(
            "total time must be positive, got {t_total}"
        )));
    }
    if signals.len() != sys.controls.len() {
        return Err(CoreError::InvalidArgument(format!(
            "expected {} amplitude signals, got {}",
            sys.controls.len(),
            signals.len()
        )));
    }
    let d = sys.dim();
    let dt = t_total / steps as f64;
    let offsets = order.node_offsets();
    let mut u = DMatrix::<C64>::identity(d, d);
    let mut node_amps = vec![vec![0.0; signals.len()]; offsets.len()];
    for n in 0..steps {
        let t0 = n as f64 * dt;
        for (amps, c) in node_amps.iter_mut().zip(offsets) {
            let t_node = t0 + c * dt;
            for (slot, sig) in amps.iter_mut().zip(signals) {
                *slot = sig.value(t_node, t_total);
            }
        }
        let omega = magnus_omega(sys, &node_amps, dt, order)?;
        u = expm(&omega)? * u;
    }
    let defect = (u.adjoint() * &u - DMatrix::<C64>::identity(d, d)).norm();
    if defect > 1e-10 {
        return Err(CoreError::NumericalAbort(format!(
            "propagator lost unitarity: defect {defect:.3e}"
        )));
    }
    let omega = unitary_log(&u)?;
    Ok(MagnusResult { omega, order, u })
}

/// Frobenius distance between two matrices.
pub fn frobenius_distance(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    (a - b).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagator::ControlSignal;
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn sigma_x() -> DMatrix<C64> {
        DMatrix::from_row_slice(2, 2, &[
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
        ])
    }

    fn sigma_y() -> DMatrix<C64> {
        DMatrix::from_row_slice(2, 2, &[
            C64::new(0.0, 0.0),
            C64::new(0.0, -1.0),
            C64::new(0.0, 1.0),
            C64::new(0.0, 0.0),
        ])
    }

    fn sigma_z() -> DMatrix<C64> {
        DMatrix::from_row_slice(2, 2, &[
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(-1.0, 0.0),
        ])
    }

    fn random_hermitian(d: usize, seed: u64) -> DMatrix<C64> {
        let mut state = seed;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 33) as f64 / (1u64 << 31) as f64 - 1.0
        };
        let mut m = DMatrix::<C64>::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = C64::new(next(), next());
            }
        }
        (&m + m.adjoint()) * C64::new(0.5, 0.0)
    }

    #[test]
    fn constant_hamiltonian_is_exponentiated_exactly() {
        let h = sigma_z() + sigma_x() * C64::new(0.3, 0.0);
        let sys = FiniteLevelSystem::new(h.clone(), vec![]).unwrap();
        let t = 1.7;
        let reference = exact_expm(&h, t).unwrap();
        for order in [MagnusOrder::One, MagnusOrder::Two] {
            let run = magnus_propagate(&sys, &[], t, 7, order).unwrap();
            assert!(frobenius_distance(&run.u, &reference) < 1e-12);
            assert!(frobenius_distance(&expm(&run.omega).unwrap(), &run.u) < 1e-10);
        }
    }

    #[test]
    fn commuting_family_integrates_the_amplitude() {
        // H(t) = sin(t) * H0: the exponent is -i H0 * integral of sin
        let h0 = sigma_x() * C64::new(0.8, 0.0) + sigma_z() * C64::new(0.4, 0.0);
        let sys =
            FiniteLevelSystem::new(DMatrix::zeros(2, 2), vec![h0.clone()]).unwrap();
        let signal = ControlSignal::Smooth(Arc::new(|t| t.sin()));
        let t_total = 2.0;
        let run = magnus_propagate(&sys, &[signal], t_total, 100, MagnusOrder::Two).unwrap();
        let weight = 1.0 - t_total.cos();
        let reference = exact_expm(&h0, weight).unwrap();
        assert!(frobenius_distance(&run.u, &reference) < 1e-8);
    }

    #[test]
    fn resonant_circular_drive_follows_rabi_flopping() {
        // circularly polarized resonant drive is exactly solvable in the
        // rotating frame: P(0->1) = sin^2(rabi * t / 2)
        let omega0 = 5.0;
        let rabi = 1.0;
        let sys = FiniteLevelSystem::new(
            sigma_z() * C64::new(omega0 / 2.0, 0.0),
            vec![sigma_x() * C64::new(0.5, 0.0), sigma_y() * C64::new(0.5, 0.0)],
        )
        .unwrap();
        let sig_x = ControlSignal::Smooth(Arc::new(move |t| rabi * (omega0 * t).cos()));
        let sig_y = ControlSignal::Smooth(Arc::new(move |t| rabi * (omega0 * t).sin()));
        let t_total = 2.7;
        let run =
            magnus_propagate(&sys, &[sig_x, sig_y], t_total, 400, MagnusOrder::Two).unwrap();
        let p_excited = run.u[(1, 0)].norm_sqr();
        let expected = (rabi * t_total / 2.0).sin().powi(2);
        assert_abs_diff_eq!(p_excited, expected, epsilon = 1e-4);
    }

    #[test]
    fn second_term_flips_sign_when_the_drive_reverses() {
        let sys =
            FiniteLevelSystem::new(sigma_z(), vec![sigma_x()]).unwrap();
        let delta = 0.3;
        let forward = vec![vec![0.2], vec![0.9]];
        let reversed = vec![vec![0.9], vec![0.2]];
        let omega_f = magnus_omega(&sys, &forward, delta, MagnusOrder::Two).unwrap();
        let omega_r = magnus_omega(&sys, &reversed, delta, MagnusOrder::Two).unwrap();
        let sym = (&omega_f + &omega_r) * C64::new(0.5, 0.0);
        let anti_f = &omega_f - &sym;
        let anti_r = &omega_r - &sym;
        assert!(anti_f.norm() > 1e-4, "commutator term should be nonzero");
        assert!((&anti_f + &anti_r).norm() < 1e-14);
        // equal samples leave no commutator: pure first term
        let omega_flat =
            magnus_omega(&sys, &vec![vec![0.5], vec![0.5]], delta, MagnusOrder::Two).unwrap();
        let h_flat = sys.hamiltonian(&[0.5]).unwrap();
        assert!(
            frobenius_distance(&omega_flat, &(h_flat * C64::new(0.0, -delta))) < 1e-14
        );
    }

    #[test]
    fn step_refinement_matches_the_advertised_orders() {
        let sys = FiniteLevelSystem::new(sigma_z(), vec![sigma_x()]).unwrap();
        let make_signal = || ControlSignal::Smooth(Arc::new(|t: f64| (1.3 * t).sin() + 0.4));
        let t_total = 2.0;
        let reference = magnus_propagate(&sys, &[make_signal()], t_total, 10_000, MagnusOrder::Two)
            .unwrap()
            .u;
        let slope = |order: MagnusOrder, steps: &[usize]| {
            let points: Vec<(f64, f64)> = steps
                .iter()
                .map(|&n| {
                    let u = magnus_propagate(&sys, &[make_signal()], t_total, n, order)
                        .unwrap()
                        .u;
                    ((n as f64).ln(), frobenius_distance(&u, &reference).ln())
                })
                .collect();
            let m = points.len() as f64;
            let sx: f64 = points.iter().map(|p| p.0).sum();
            let sy: f64 = points.iter().map(|p| p.1).sum();
            let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
            let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
            -(m * sxy - sx * sy) / (m * sxx - sx * sx)
        };
        let s1 = slope(MagnusOrder::One, &[8, 16, 32, 64]);
        assert!((1.8..=2.5).contains(&s1), "order-1 slope {s1}");
        let s2 = slope(MagnusOrder::Two, &[4, 8, 16, 32]);
        assert!((3.6..=4.5).contains(&s2), "order-2 slope {s2}");
    }

    #[test]
    fn exact_exponential_special_values() {
        let zero = DMatrix::<C64>::zeros(3, 3);
        let id = DMatrix::<C64>::identity(3, 3);
        assert!(frobenius_distance(&exact_expm(&zero, 1.0).unwrap(), &id) < 1e-15);

        let flip = exact_expm(&sigma_z(), std::f64::consts::PI).unwrap();
        let minus_id = DMatrix::<C64>::identity(2, 2) * C64::new(-1.0, 0.0);
        assert!(frobenius_distance(&flip, &minus_id) < 1e-13);

        let h = random_hermitian(4, 7);
        let forward = exact_expm(&h, 1.0).unwrap();
        let backward = exact_expm(&h, -1.0).unwrap();
        assert!(
            frobenius_distance(&(&forward * &backward), &DMatrix::identity(4, 4)) < 1e-12
        );

        let mut skew = DMatrix::<C64>::zeros(2, 2);
        skew[(0, 1)] = C64::new(1.0, 0.0);
        assert!(matches!(exact_expm(&skew, 1.0), Err(CoreError::NotHermitian(_))));
    }

    #[test]
    fn pade_exponential_agrees_with_the_eigen_route() {
        let h = random_hermitian(6, 42);
        let direct = expm(&(h.clone() * C64::new(0.0, -1.0))).unwrap();
        let eig = exact_expm(&h, 1.0).unwrap();
        assert!(frobenius_distance(&direct, &eig) < 1e-12);
        // large norm exercises the scaling-and-squaring branch
        let big = random_hermitian(5, 9) * C64::new(40.0, 0.0);
        let a = big.clone() * C64::new(0.0, -1.0);
        let direct = expm(&a).unwrap();
        let eig = exact_expm(&big, 1.0).unwrap();
        assert!(frobenius_distance(&direct, &eig) < 1e-10);
    }

    #[test]
    fn accumulated_exponent_reproduces_the_propagator() {
        let sys = FiniteLevelSystem::new(
            sigma_z(),
            vec![sigma_x() * C64::new(0.5, 0.0)],
        )
        .unwrap();
        let signal = ControlSignal::Smooth(Arc::new(|t: f64| (2.0 * t).cos()));
        let run = magnus_propagate(&sys, &[signal], 1.5, 50, MagnusOrder::Two).unwrap();
        // omega is anti-Hermitian and exponentiates back to u
        let defect = (&run.omega + run.omega.adjoint()).norm();
        assert!(defect < 1e-12, "anti-Hermiticity defect {defect}");
        assert!(frobenius_distance(&expm(&run.omega).unwrap(), &run.u) < 1e-10);
    }

    #[test]
    fn frobenius_objective_vanishes_only_at_the_target() {
        let sys = FiniteLevelSystem::new(sigma_z(), vec![sigma_x()]).unwrap();
        let signal = ControlSignal::Constant(0.7);
        let run = magnus_propagate(&sys, &[signal.clone()], 1.0, 64, MagnusOrder::Two).unwrap();
        let target = run.u.clone();
        assert_abs_diff_eq!(frobenius_distance(&run.u, &target), 0.0, epsilon = 1e-15);
        let other = magnus_propagate(&sys, &[signal], 1.1, 64, MagnusOrder::Two).unwrap();
        assert!(frobenius_distance(&other.u, &target) > 1e-3);
    }

    #[test]
    fn malformed_systems_and_requests_are_rejected() {
        assert!(matches!(
            FiniteLevelSystem::new(DMatrix::zeros(1, 1), vec![]),
            Err(CoreError::InvalidArgument(_))
        ));
        let mut skew = DMatrix::<C64>::zeros(2, 2);
        skew[(0, 1)] = C64::new(0.0, 1.0);
        assert!(matches!(
            FiniteLevelSystem::new(skew, vec![]),
            Err(CoreError::NotHermitian(_))
        ));
        assert!(matches!(
            FiniteLevelSystem::new(DMatrix::zeros(2, 2), vec![DMatrix::zeros(3, 3)]),
            Err(CoreError::InvalidArgument(_))
        ));
        let sys = FiniteLevelSystem::new(sigma_z(), vec![sigma_x()]).unwrap();
        assert!(matches!(
            magnus_propagate(&sys, &[], 1.0, 10, MagnusOrder::One),
            Err(CoreError::InvalidArgument(_))
        ));
        assert!(matches!(
            magnus_propagate(&sys, &[ControlSignal::Constant(0.0)], 1.0, 0, MagnusOrder::One),
            Err(CoreError::InvalidArgument(_))
        ));
        assert!(matches!(
            magnus_omega(&sys, &[vec![0.1]], 0.1, MagnusOrder::Two),
            Err(CoreError::InvalidArgument(_))
        ));
    }
}
