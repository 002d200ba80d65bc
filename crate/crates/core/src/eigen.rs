//! Stationary eigenproblems of the discretized Hamiltonian.
//!
//! The Hamiltonian is `k_c(−i∂_x − n_g)² + V(x)` with `k_c` the kinetic
//! prefactor of the potential family (1, or 4E_C for the qubit families).
//! Offset charge enters through phase factors on the hopping terms, which
//! keeps the matrix Hermitian and makes the periodic spectrum exactly
//! invariant under integer shifts of `n_g`.

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};
use crate::grid::{Grid, Wavefunction};
use crate::potential::Potential;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    Dirichlet,
    Periodic,
}

/// Lowest eigenpairs of a discretized Hamiltonian, states on the full grid.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    pub energies: Vec<f64>,
    pub states: Vec<Wavefunction>,
    pub bc: BoundaryKind,
}

/// Uniform grid covering one period `[−π, π)` of the phase variable: the last
/// node stops one spacing short of π so that wrap-around hops close the circle
/// with `dx = 2π/j` exactly.
pub fn phase_grid(j: usize) -> Result<Grid> {
    let dphi = 2.0 * std::f64::consts::PI / j as f64;
    Grid::new(-std::f64::consts::PI, std::f64::consts::PI - dphi, j)
}

/// Second-order finite-difference Hamiltonian for the potential at control
/// value `eta`. Dirichlet eliminates the boundary nodes (dimension J−2);
/// periodic keeps all J nodes and adds corner hops.
pub fn hamiltonian_matrix(
    pot: &Potential,
    grid: &Grid,
    bc: BoundaryKind,
    eta: f64,
) -> Result<DMatrix<C64>> {
    if pot.is_periodic() && bc == BoundaryKind::Dirichlet {
        return Err(CoreError::InvalidArgument(
            "transmon potential requires periodic boundary conditions".into(),
        ));
    }
    let v = pot.values_on(grid, 0.0, eta)?;
    let k_c = pot.kinetic_coeff();
    let n_g = pot.offset_charge();
    let dx = grid.dx;
    let diag = 2.0 * k_c / (dx * dx);
    // hop to the right carries e^{−i n_g dx}, to the left its conjugate
    let hop = -k_c / (dx * dx) * C64::from_polar(1.0, -n_g * dx);

    match bc {
        BoundaryKind::Dirichlet => {
            let n = grid.j - 2;
            if n == 0 {
                return Err(CoreError::InvalidGrid(
                    "Dirichlet Hamiltonian needs at least one interior node".into(),
                ));
            }
            let mut h = DMatrix::zeros(n, n);
            for i in 0..n {
                h[(i, i)] = C64::new(diag + v[i + 1], 0.0);
                if i + 1 < n {
                    h[(i, i + 1)] = hop;
                    h[(i + 1, i)] = hop.conj();
                }
            }
            Ok(h)
        }
        BoundaryKind::Periodic => {
            let n = grid.j;
            let mut h = DMatrix::zeros(n, n);
            for i in 0..n {
                h[(i, i)] = C64::new(diag + v[i], 0.0);
                let next = (i + 1) % n;
                h[(i, next)] += hop;
                h[(next, i)] += hop.conj();
            }
            Ok(h)
        }
    }
}

fn check_hermitian(h: &DMatrix<C64>) -> Result<()> {
    let scale = h.iter().map(|z| z.norm()).fold(0.0_f64, f64::max).max(1.0);
    let mut worst = 0.0_f64;
    for i in 0..h.nrows() {
        for j in i..h.ncols() {
            worst = worst.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    if worst > 1e-12 * scale {
        return Err(CoreError::NotHermitian(worst));
    }
    Ok(())
}

/// Hermitian eigendecomposition returning all pairs sorted ascending. Uses a
/// real symmetric solve when the matrix has no imaginary part (roughly 3×
/// faster at J ~ 1000).
pub(crate) fn hermitian_eigen(h: &DMatrix<C64>) -> Result<(Vec<f64>, Vec<DVector<C64>>)> {
    check_hermitian(h)?;
    let n = h.nrows();
    let all_real = h.iter().all(|z| z.im.abs() < 1e-14);

    let (vals, vecs): (Vec<f64>, Vec<DVector<C64>>) = if all_real {
        let hr = DMatrix::from_fn(n, n, |i, j| h[(i, j)].re);
        let eig = nalgebra::SymmetricEigen::try_new(hr, f64::EPSILON, 200_000)
            .ok_or_else(|| CoreError::EigenFailure("symmetric QR did not converge".into()))?;
        let vecs = (0..n)
            .map(|k| DVector::from_fn(n, |i, _| C64::new(eig.eigenvectors[(i, k)], 0.0)))
            .collect();
        (eig.eigenvalues.iter().copied().collect(), vecs)
    } else {
        let eig = nalgebra::SymmetricEigen::try_new(h.clone(), f64::EPSILON, 200_000)
            .ok_or_else(|| CoreError::EigenFailure("hermitian QR did not converge".into()))?;
        let vecs = (0..n).map(|k| eig.eigenvectors.column(k).into_owned()).collect();
        (eig.eigenvalues.iter().copied().collect(), vecs)
    };

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let sorted_vals = order.iter().map(|&i| vals[i]).collect();
    let mut sorted_vecs: Vec<DVector<C64>> = order.into_iter().map(|i| vecs[i].clone()).collect();

    // deterministic phase: largest-magnitude component made real positive
    for v in &mut sorted_vecs {
        let mut best = 0;
        for i in 1..n {
            if v[i].norm_sqr() > v[best].norm_sqr() {
                best = i;
            }
        }
        let pivot = v[best];
        if pivot.norm() > 0.0 {
            let phase = pivot.conj() / pivot.norm();
            for z in v.iter_mut() {
                *z *= phase;
            }
        }
    }
    Ok((sorted_vals, sorted_vecs))
}

/// The `k` lowest eigenpairs of `h` as grid wavefunctions, normalized so the
/// grid inner product is orthonormal. For Dirichlet matrices the states are
/// padded with the zero boundary values.
pub fn eigenstates(
    h: &DMatrix<C64>,
    grid: &Grid,
    bc: BoundaryKind,
    k: usize,
) -> Result<EigenBasis> {
    let expected = match bc {
        BoundaryKind::Dirichlet => grid.j - 2,
        BoundaryKind::Periodic => grid.j,
    };
    if h.nrows() != expected || h.ncols() != expected {
        return Err(CoreError::InvalidArgument(format!(
            "matrix dimension {} does not match grid/boundary (expected {expected})",
            h.nrows()
        )));
    }
    if k == 0 || k > expected {
        return Err(CoreError::InvalidArgument(format!(
            "requested {k} eigenpairs from a dimension-{expected} problem"
        )));
    }
    let (vals, vecs) = hermitian_eigen(h)?;
    let scale = 1.0 / grid.dx.sqrt();
    let states = vecs[..k]
        .iter()
        .map(|v| {
            let values = match bc {
                BoundaryKind::Dirichlet => {
                    let mut padded = vec![C64::new(0.0, 0.0); grid.j];
                    for (i, z) in v.iter().enumerate() {
                        padded[i + 1] = z * scale;
                    }
                    padded
                }
                BoundaryKind::Periodic => v.iter().map(|z| z * scale).collect(),
            };
            Wavefunction::new(*grid, values)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EigenBasis { energies: vals[..k].to_vec(), states, bc })
}

/// Asymptotic transmon level `E_n = ω₀(n+½) − (E_C/12)(6n²+6n+3)` with
/// `ω₀ = √(8 E_J E_C)` (valid for E_J ≫ E_C).
pub fn transmon_asymptotic_levels(e_c: f64, e_j: f64, n: usize) -> f64 {
    let omega0 = (8.0 * e_j * e_c).sqrt();
    let nf = n as f64;
    omega0 * (nf + 0.5) - e_c / 12.0 * (6.0 * nf * nf + 6.0 * nf + 3.0)
}

impl EigenBasis {
    fn inner(&self, a: &Wavefunction, b: &Wavefunction) -> Result<C64> {
        match self.bc {
            BoundaryKind::Dirichlet => a.inner_product(b),
            BoundaryKind::Periodic => a.inner_product_uniform(b),
        }
    }

    /// Expansion coefficients a_i = ⟨φ_i, ψ⟩.
    pub fn expand(&self, psi: &Wavefunction) -> Result<Vec<C64>> {
        self.states.iter().map(|phi| self.inner(phi, psi)).collect()
    }

    /// Σ a_i φ_i on the basis grid.
    pub fn reconstruct(&self, coeffs: &[C64]) -> Result<Wavefunction> {
        if coeffs.len() != self.states.len() {
            return Err(CoreError::InvalidArgument(format!(
                "{} coefficients for a {}-state basis",
                coeffs.len(),
                self.states.len()
            )));
        }
        let grid = self.states[0].grid;
        let mut values = vec![C64::new(0.0, 0.0); grid.j];
        for (a, phi) in coeffs.iter().zip(&self.states) {
            for (v, p) in values.iter_mut().zip(&phi.values) {
                *v += a * p;
            }
        }
        Wavefunction::new(grid, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{BaseProfile, PotentialKind};

    fn free_pot(x_l: f64, x_r: f64) -> Potential {
        Potential::new(
            PotentialKind::PiecewiseCustom { v_l: 0.0, v_r: 0.0, base: BaseProfile::Zero },
            x_l,
            x_r,
            (0.0, 0.0),
        )
        .unwrap()
    }

    fn transmon_pot(e_c: f64, e_j: f64, n_g: f64) -> Potential {
        Potential::new(
            PotentialKind::Transmon { e_c, e_j, n_g },
            -std::f64::consts::PI,
            std::f64::consts::PI,
            (0.0, 0.0),
        )
        .unwrap()
    }

    /// ω²x²/(2m) with m=2, ω=1 gives V = x²/4 and levels n + ½.
    fn harmonic_basis(k: usize) -> EigenBasis {
        let grid = Grid::new(-12.0, 12.0, 601).unwrap();
        let pot = Potential::new(
            PotentialKind::PiecewiseCustom {
                v_l: 36.0,
                v_r: 36.0,
                base: BaseProfile::Harmonic { mass: 2.0, omega: 1.0 },
            },
            -12.0,
            12.0,
            (0.0, 0.0),
        )
        .unwrap();
        let h = hamiltonian_matrix(&pot, &grid, BoundaryKind::Dirichlet, 0.0).unwrap();
        eigenstates(&h, &grid, BoundaryKind::Dirichlet, k).unwrap()
    }

    #[test]
    fn particle_in_box_ground_energy() {
        let grid = Grid::new(0.0, std::f64::consts::PI, 401).unwrap();
        let pot = free_pot(0.0, std::f64::consts::PI);
        let h = hamiltonian_matrix(&pot, &grid, BoundaryKind::Dirichlet, 0.0).unwrap();
        let basis = eigenstates(&h, &grid, BoundaryKind::Dirichlet, 2).unwrap();
        assert!((basis.energies[0] - 1.0).abs() < 1e-3);
        assert!((basis.energies[1] - 4.0).abs() < 4e-3);
    }

    #[test]
    fn hamiltonian_is_hermitian_with_offset_charge() {
        let grid = phase_grid(64).unwrap();
        let pot = transmon_pot(0.25, 5.0, 0.37);
        let h = hamiltonian_matrix(&pot, &grid, BoundaryKind::Periodic, 0.0).unwrap();
        let mut worst = 0.0_f64;
        for i in 0..h.nrows() {
            for j in 0..h.ncols() {
                worst = worst.max((h[(i, j)] - h[(j, i)].conj()).norm());
            }
        }
        assert!(worst < 1e-12);
    }

    #[test]
    fn transmon_rejects_dirichlet() {
        let grid = phase_grid(32).unwrap();
        let pot = transmon_pot(0.25, 5.0, 0.0);
        assert!(hamiltonian_matrix(&pot, &grid, BoundaryKind::Dirichlet, 0.0).is_err());
    }

    #[test]
    fn eigenstate_contract_on_harmonic_fixture() {
        let basis = harmonic_basis(6);
        // equal spacing of 1 within 1%
        for n in 0..5 {
            let gap = basis.energies[n + 1] - basis.energies[n];
            assert!((gap - 1.0).abs() < 0.01, "gap {n}: {gap}");
        }
        // orthonormality
        for i in 0..6 {
            for j in 0..6 {
                let ip = basis.states[i].inner_product(&basis.states[j]).unwrap();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((ip - C64::new(expect, 0.0)).norm() < 1e-8);
            }
        }
        // ground state has no sign change away from the clamped boundary
        let interior: Vec<f64> = basis.states[0].values[1..600].iter().map(|z| z.re).collect();
        let signs = interior.windows(2).filter(|w| w[0] * w[1] < -1e-20).count();
        assert_eq!(signs, 0);
    }

    #[test]
    fn eigenpairs_satisfy_the_matrix_equation() {
        let grid = phase_grid(96).unwrap();
        let pot = transmon_pot(0.3, 6.0, 0.21);
        let h = hamiltonian_matrix(&pot, &grid, BoundaryKind::Periodic, 0.0).unwrap();
        let (vals, vecs) = hermitian_eigen(&h).unwrap();
        for k in 0..4 {
            let residual = (&h * &vecs[k] - &vecs[k] * C64::new(vals[k], 0.0)).norm();
            assert!(residual < 1e-6 * vals[k].abs().max(1.0));
        }
    }

    #[test]
    fn offset_charge_shift_by_one_preserves_spectrum() {
        let grid = phase_grid(128).unwrap();
        let spectrum = |n_g: f64| {
            let pot = transmon_pot(0.4, 2.0, n_g);
            let h = hamiltonian_matrix(&pot, &grid, BoundaryKind::Periodic, 0.0).unwrap();
            hermitian_eigen(&h).unwrap().0
        };
        let a = spectrum(0.3);
        let b = spectrum(1.3);
        for n in 0..6 {
            assert!((a[n] - b[n]).abs() < 1e-8, "level {n}: {} vs {}", a[n], b[n]);
        }
        // a fractional shift must change the low-E_J/E_C spectrum
        let c = spectrum(0.0);
        assert!((a[0] - c[0]).abs() > 1e-6);
    }

    #[test]
    fn asymptotic_formula_special_values() {
        let (e_c, e_j) = (0.3_f64, 17.0_f64);
        let omega0 = (8.0 * e_j * e_c).sqrt();
        let e0 = transmon_asymptotic_levels(e_c, e_j, 0);
        assert!((e0 - (omega0 / 2.0 - e_c / 4.0)).abs() < 1e-14);
        let gap = transmon_asymptotic_levels(e_c, e_j, 1) - e0;
        assert!((gap - (omega0 - e_c)).abs() < 1e-14);
    }

    #[test]
    fn transmon_gap_matches_asymptotics_in_deep_well() {
        let (e_c, e_j) = (0.25, 12.5); // E_J/E_C = 50
        let grid = phase_grid(401).unwrap();
        let pot = transmon_pot(e_c, e_j, 0.0);
        let h = hamiltonian_matrix(&pot, &grid, BoundaryKind::Periodic, 0.0).unwrap();
        let basis = eigenstates(&h, &grid, BoundaryKind::Periodic, 2).unwrap();
        let num = basis.energies[1] - basis.energies[0];
        let formula =
            transmon_asymptotic_levels(e_c, e_j, 1) - transmon_asymptotic_levels(e_c, e_j, 0);
        assert!((num - formula).abs() / num.abs() < 0.03);
    }

    #[test]
    fn expansion_round_trips_states_in_span() {
        let basis = harmonic_basis(8);
        let grid = basis.states[0].grid;

        let a = basis.expand(&basis.states[2]).unwrap();
        for (i, c) in a.iter().enumerate() {
            let expect = if i == 2 { 1.0 } else { 0.0 };
            assert!((c - C64::new(expect, 0.0)).norm() < 1e-8);
        }

        let mix = {
            let inv = std::f64::consts::FRAC_1_SQRT_2;
            let values: Vec<C64> = basis.states[0]
                .values
                .iter()
                .zip(&basis.states[1].values)
                .map(|(p, q)| (p + q) * inv)
                .collect();
            Wavefunction::new(grid, values).unwrap()
        };
        let a = basis.expand(&mix).unwrap();
        assert!((a[0] - C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0)).norm() < 1e-8);
        assert!((a[1] - C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0)).norm() < 1e-8);

        // random member of the span reconstructs, and Parseval holds
        let coeffs: Vec<C64> = (0..8)
            .map(|k| C64::new((0.3 + k as f64).sin(), (1.7 * k as f64).cos()))
            .collect();
        let psi = basis.reconstruct(&coeffs).unwrap();
        let back = basis.expand(&psi).unwrap();
        let err: f64 = coeffs.iter().zip(&back).map(|(x, y)| (x - y).norm()).sum();
        assert!(err < 1e-8);
        let parseval: f64 = back.iter().map(|c| c.norm_sqr()).sum();
        assert!((parseval - psi.norm().powi(2)).abs() < 1e-8);
    }

    #[test]
    fn eigenstates_rejects_bad_requests() {
        let grid = Grid::new(0.0, 1.0, 11).unwrap();
        let pot = free_pot(0.0, 1.0);
        let h = hamiltonian_matrix(&pot, &grid, BoundaryKind::Dirichlet, 0.0).unwrap();
        assert!(eigenstates(&h, &grid, BoundaryKind::Dirichlet, 10).is_err());
        assert!(eigenstates(&h, &grid, BoundaryKind::Periodic, 2).is_err());

        let mut bad = h.clone();
        bad[(0, 1)] += C64::new(0.5, 0.0);
        assert!(matches!(
            eigenstates(&bad, &grid, BoundaryKind::Dirichlet, 2),
            Err(CoreError::NotHermitian(_))
        ));
    }
}
