//! Uniform spatial grids and discrete wavefunctions.
//!
//! All quadrature on a grid is trapezoidal: interior nodes carry weight `dx`,
//! the two endpoints carry `dx/2`. Inner products are conjugate-linear in the
//! first argument.

use crate::error::{CoreError, Result};
use crate::C64;

/// Uniform grid over `[x_l, x_r]`, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub x_l: f64,
    pub x_r: f64,
    pub j: usize,
    pub dx: f64,
}

impl Grid {
    /// Build a grid with `j >= 3` nodes and spacing `dx = (x_r - x_l) / (j - 1)`.
    pub fn new(x_l: f64, x_r: f64, j: usize) -> Result<Grid> {
        if !x_l.is_finite() || !x_r.is_finite() {
            return Err(CoreError::InvalidGrid(format!(
                "bounds must be finite, got [{x_l}, {x_r}]"
            )));
        }
        if x_l >= x_r {
            return Err(CoreError::InvalidGrid(format!(
                "x_l = {x_l} must be strictly below x_r = {x_r}"
            )));
        }
        if j < 3 {
            return Err(CoreError::InvalidGrid(format!("need at least 3 nodes, got {j}")));
        }
        let dx = (x_r - x_l) / (j - 1) as f64;
        Ok(Grid { x_l, x_r, j, dx })
    }

    /// Node coordinate `x_l + i * dx`.
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_l + i as f64 * self.dx
    }

    /// All node coordinates.
    pub fn nodes(&self) -> Vec<f64> {
        (0..self.j).map(|i| self.x(i)).collect()
    }

    /// Trapezoid weight of node `i`.
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.j - 1 {
            0.5 * self.dx
        } else {
            self.dx
        }
    }
}

/// Complex-valued state sampled on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Wavefunction {
    pub grid: Grid,
    pub values: Vec<C64>,
}

impl Wavefunction {
    pub fn new(grid: Grid, values: Vec<C64>) -> Result<Wavefunction> {
        if values.len() != grid.j {
            return Err(CoreError::InvalidGrid(format!(
                "value count {} does not match grid size {}",
                values.len(),
                grid.j
            )));
        }
        Ok(Wavefunction { grid, values })
    }

    pub fn zeros(grid: Grid) -> Wavefunction {
        Wavefunction { grid, values: vec![C64::new(0.0, 0.0); grid.j] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> C64) -> Wavefunction {
        let values = (0..grid.j).map(|i| f(grid.x(i))).collect();
        Wavefunction { grid, values }
    }

    /// Gaussian packet `(2 pi sigma^2)^(-1/4) exp(-(x-x0)^2 / (4 sigma^2)) exp(i k0 (x-x0))`.
    ///
    /// Continuum-normalized; on a grid wide enough to hold the tails the
    /// trapezoid norm is 1 up to quadrature error.
    pub fn gaussian(grid: Grid, x0: f64, sigma: f64, k0: f64) -> Wavefunction {
        let amp = (2.0 * std::f64::consts::PI * sigma * sigma).powf(-0.25);
        Wavefunction::from_fn(grid, |x| {
            let d = x - x0;
            let modulus = amp * (-d * d / (4.0 * sigma * sigma)).exp();
            modulus * C64::from_polar(1.0, k0 * d)
        })
    }

    /// Trapezoid inner product, conjugate-linear in `self`.
    pub fn inner_product(&self, other: &Wavefunction) -> Result<C64> {
        if self.grid != other.grid {
            return Err(CoreError::GridMismatch);
        }
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..self.grid.j {
            acc += self.grid.weight(i) * self.values[i].conj() * other.values[i];
        }
        Ok(acc)
    }

    /// Plain Riemann inner product (every node weighted `dx`); the natural
    /// metric on periodic grids, where each node owns a full cell.
    pub fn inner_product_uniform(&self, other: &Wavefunction) -> Result<C64> {
        if self.grid != other.grid {
            return Err(CoreError::GridMismatch);
        }
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..self.grid.j {
            acc += self.values[i].conj() * other.values[i];
        }
        Ok(acc * self.grid.dx)
    }

    /// Trapezoid L2 norm.
    pub fn norm(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.grid.j {
            acc += self.grid.weight(i) * self.values[i].norm_sqr();
        }
        acc.sqrt()
    }

    /// Rescale to unit trapezoid norm.
    pub fn normalized(&self) -> Result<Wavefunction> {
        let n = self.norm();
        if n <= 0.0 || !n.is_finite() {
            return Err(CoreError::NumericalAbort(format!("cannot normalize, norm = {n}")));
        }
        let inv = 1.0 / n;
        Ok(Wavefunction {
            grid: self.grid,
            values: self.values.iter().map(|v| v * inv).collect(),
        })
    }

    /// L2 distance `|self - other|`.
    pub fn l2_distance(&self, other: &Wavefunction) -> Result<f64> {
        if self.grid != other.grid {
            return Err(CoreError::GridMismatch);
        }
        let mut acc = 0.0;
        for i in 0..self.grid.j {
            acc += self.grid.weight(i) * (self.values[i] - other.values[i]).norm_sqr();
        }
        Ok(acc.sqrt())
    }
}

/// Overlap fidelity `|<a, b>|^2` of two unit-norm states.
///
/// Both inputs must be normalized within `1e-6`.
pub fn fidelity(a: &Wavefunction, b: &Wavefunction) -> Result<f64> {
    for w in [a, b] {
        let n = w.norm();
        if (n - 1.0).abs() > 1e-6 {
            return Err(CoreError::NotNormalized { norm: n });
        }
    }
    Ok(a.inner_product(b)?.norm_sqr())
}
