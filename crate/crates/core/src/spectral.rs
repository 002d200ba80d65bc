//! Truncated Fourier series, Toeplitz convolution algebra, and Laplace
//! transform sampling/inversion.
//!
//! A series with cutoff `K` stores coefficients `c_k` for `k = -K..=K` against
//! the basis `exp(+2 pi i k t / T)`. Convolution is never silently
//! re-truncated: products carry their full enlarged support.

use crate::error::{CoreError, Result};
use crate::C64;
use std::f64::consts::{PI, TAU};
use std::io::Write;

/// One Laplace-domain sample `(s, F(s))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceSample {
    pub s: C64,
    pub value: C64,
}

/// Truncated Fourier series on a fixed period.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierSeries {
    period: f64,
    k_max: usize,
    /// Coefficient of harmonic `k` lives at index `k + k_max`.
    coeffs: Vec<C64>,
}

impl FourierSeries {
    pub fn new(period: f64, coeffs: Vec<C64>) -> Result<FourierSeries> {
        if !(period > 0.0) || !period.is_finite() {
            return Err(CoreError::InvalidArgument(format!("period must be positive, got {period}")));
        }
        if coeffs.is_empty() || coeffs.len() % 2 == 0 {
            return Err(CoreError::InvalidArgument(format!(
                "coefficient count must be odd (got {}), indices run -K..=K",
                coeffs.len()
            )));
        }
        let k_max = (coeffs.len() - 1) / 2;
        Ok(FourierSeries { period, k_max, coeffs })
    }

    pub fn zero(period: f64, k_max: usize) -> FourierSeries {
        FourierSeries { period, k_max, coeffs: vec![C64::new(0.0, 0.0); 2 * k_max + 1] }
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Coefficient of harmonic `k`; zero outside the stored support.
    pub fn coeff(&self, k: i64) -> C64 {
        let kk = self.k_max as i64;
        if k < -kk || k > kk {
            C64::new(0.0, 0.0)
        } else {
            self.coeffs[(k + kk) as usize]
        }
    }

    pub fn coeff_mut(&mut self, k: i64) -> &mut C64 {
        let kk = self.k_max as i64;
        assert!(k >= -kk && k <= kk, "harmonic {k} outside stored support {kk}");
        &mut self.coeffs[(k + kk) as usize]
    }

    /// Evaluate the series at time `t`.
    pub fn synthesize(&self, t: f64) -> C64 {
        let kk = self.k_max as i64;
        let mut acc = C64::new(0.0, 0.0);
        for k in -kk..=kk {
            let phase = TAU * k as f64 * t / self.period;
            acc += self.coeff(k) * C64::from_polar(1.0, phase);
        }
        acc
    }

    /// Columns `k, Re(c_k), Im(c_k)`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "k,re,im")?;
        let kk = self.k_max as i64;
        for k in -kk..=kk {
            let c = self.coeff(k);
            writeln!(w, "{},{:.17e},{:.17e}", k, c.re, c.im)?;
        }
        Ok(())
    }
}

/// Analysis coefficients of a real signal sampled uniformly over one period:
/// `c_k = (1/N) sum_n f(t_n) exp(-2 pi i k n / N)` with `t_n = n T / N`.
///
/// Exact for trigonometric polynomials of degree `<= k_max` once
/// `N >= 2 k_max + 1`; fewer samples alias and are rejected.
pub fn fourier_coeffs(samples: &[f64], period: f64, k_max: usize) -> Result<FourierSeries> {
    let n = samples.len();
    if n < 2 * k_max + 1 {
        return Err(CoreError::Aliasing { samples: n, k_max });
    }
    let mut out = FourierSeries::zero(period, k_max);
    let kk = k_max as i64;
    for k in -kk..=kk {
        let mut acc = C64::new(0.0, 0.0);
        for (i, &y) in samples.iter().enumerate() {
            let phase = -TAU * k as f64 * i as f64 / n as f64;
            acc += y * C64::from_polar(1.0, phase);
        }
        *out.coeff_mut(k) = acc / n as f64;
    }
    Ok(out)
}

/// Toeplitz convolution `gamma_r = sum_s alpha_{r-s} beta_s`, the coefficient
/// rule for pointwise products. Output support is `K_alpha + K_beta`.
pub fn toeplitz_convolve(alpha: &FourierSeries, beta: &FourierSeries) -> Result<FourierSeries> {
    if alpha.period != beta.period {
        return Err(CoreError::PeriodMismatch(alpha.period, beta.period));
    }
    let kg = alpha.k_max + beta.k_max;
    let mut out = FourierSeries::zero(alpha.period, kg);
    let (ka, kb) = (alpha.k_max as i64, beta.k_max as i64);
    for r in -(kg as i64)..=(kg as i64) {
        let mut acc = C64::new(0.0, 0.0);
        let s_lo = (-kb).max(r - ka);
        let s_hi = kb.min(r + ka);
        for s in s_lo..=s_hi {
            acc += alpha.coeff(r - s) * beta.coeff(s);
        }
        *out.coeff_mut(r) = acc;
    }
    Ok(out)
}

/// `p`-fold convolution power (coefficients of `y(t)^p`). `p >= 1`.
pub fn conv_power(alpha: &FourierSeries, p: usize) -> Result<FourierSeries> {
    if p < 1 {
        return Err(CoreError::InvalidArgument("convolution power needs p >= 1".into()));
    }
    let mut acc = alpha.clone();
    for _ in 1..p {
        acc = toeplitz_convolve(&acc, alpha)?;
    }
    Ok(acc)
}

/// Plancherel pairing `sum_k f_k conj(g_k)`, equal to `(1/T) int_0^T f(t) conj(g(t)) dt`.
pub fn plancherel_inner(f: &FourierSeries, g: &FourierSeries) -> Result<C64> {
    if f.period != g.period {
        return Err(CoreError::PeriodMismatch(f.period, g.period));
    }
    let kk = f.k_max.max(g.k_max) as i64;
    let mut acc = C64::new(0.0, 0.0);
    for k in -kk..=kk {
        acc += f.coeff(k) * g.coeff(k).conj();
    }
    Ok(acc)
}

/// Push a constant-free real polynomial `h(y) = sum_{r=1}^{p} h[r-1] y^r`
/// through the coefficient algebra: returns the coefficients of `h(y(t))`
/// with full enlarged support `p * K`.
pub fn poly_pushforward(h: &[f64], y: &FourierSeries) -> Result<FourierSeries> {
    if h.is_empty() {
        return Err(CoreError::InvalidArgument("polynomial has no terms".into()));
    }
    let p = h.len();
    let mut out = FourierSeries::zero(y.period, y.k_max * p);
    let mut power = y.clone();
    for (r, &hr) in h.iter().enumerate() {
        if r > 0 {
            power = toeplitz_convolve(&power, y)?;
        }
        let kk = power.k_max as i64;
        for k in -kk..=kk {
            *out.coeff_mut(k) += hr * power.coeff(k);
        }
    }
    Ok(out)
}

/// Time average `(1/T) int_0^T h(y(t)) dt` evaluated purely in coefficient
/// space: `h_1 y_0 + sum_{s>=2} h_s <y^(s-1), y>` with the conjugate on the
/// plain series factor.
pub fn time_average_poly(h: &[f64], y: &FourierSeries) -> Result<C64> {
    if h.is_empty() {
        return Err(CoreError::InvalidArgument("polynomial has no terms".into()));
    }
    let mut acc = h[0] * y.coeff(0);
    let mut power: Option<FourierSeries> = None;
    for &hs in &h[1..] {
        let p = match power.take() {
            None => y.clone(),
            Some(p) => toeplitz_convolve(&p, y)?,
        };
        acc += hs * plancherel_inner(&p, y)?;
        power = Some(p);
    }
    Ok(acc)
}

/// Composite-Simpson estimate of the one-sided transform
/// `int_0^{T} f(t) exp(-s t) dt` from uniform samples with spacing `dt`
/// (`f[i]` at `t = i dt`). Fourth-order accurate for smooth integrands; an odd
/// interval count ends with a 3/8 panel to keep the order.
///
/// The window must cover the support of `f` (or `Re(s)` must be large enough
/// that the discarded tail is negligible) for this to approximate the full
/// transform.
pub fn laplace_sample(f: &[C64], dt: f64, s: C64) -> Result<C64> {
    if f.len() < 3 {
        return Err(CoreError::InvalidArgument(format!(
            "need at least 3 samples for Simpson quadrature, got {}",
            f.len()
        )));
    }
    if !(dt > 0.0) {
        return Err(CoreError::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let g = |i: usize| f[i] * (-s * (i as f64 * dt)).exp();
    let n_int = f.len() - 1;
    // peel a trailing 3/8 panel when the interval count is odd
    let (simpson_end, tail) = if n_int % 2 == 0 { (n_int, false) } else { (n_int - 3, true) };
    let mut acc = C64::new(0.0, 0.0);
    let mut i = 0;
    while i + 2 <= simpson_end {
        acc += (g(i) + 4.0 * g(i + 1) + g(i + 2)) * (dt / 3.0);
        i += 2;
    }
    if tail {
        let b = n_int - 3;
        acc += (g(b) + 3.0 * g(b + 1) + 3.0 * g(b + 2) + g(b + 3)) * (3.0 * dt / 8.0);
    }
    Ok(acc)
}

/// Nodes and weights of a fixed-parameter Talbot contour for inverting a
/// Laplace transform at time `t`: `f(t) ~= sum_k w_k F(s_k)`.
///
/// The contour is `s(theta) = r theta (cot theta + i)` with `r = 2n / (5t)`,
/// discretized by the midpoint rule over `(-pi, pi)`. The full contour is kept
/// (no conjugate-symmetry folding) so complex-valued signals invert correctly.
pub fn talbot_nodes(t: f64, n: usize) -> Result<Vec<(C64, C64)>> {
    if !(t > 0.0) {
        return Err(CoreError::InvalidArgument(format!("inversion time must be positive, got {t}")));
    }
    if n < 4 {
        return Err(CoreError::InvalidArgument("need at least 4 contour nodes".into()));
    }
    let r = 2.0 * n as f64 / (5.0 * t);
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let theta = -PI + (k as f64 + 0.5) * TAU / n as f64;
        let cot = theta.cos() / theta.sin();
        let s = C64::new(r * theta * cot, r * theta);
        // s'(theta) = r (cot - theta / sin^2) + i r
        let ds = C64::new(r * (cot - theta / (theta.sin() * theta.sin())), r);
        let w = (s * t).exp() * ds / C64::new(0.0, n as f64);
        out.push((s, w));
    }
    Ok(out)
}

/// Invert a Laplace transform at time `t` with a 32-node Talbot contour.
pub fn talbot_invert(transform: impl Fn(C64) -> C64, t: f64) -> Result<C64> {
    let nodes = talbot_nodes(t, 32)?;
    Ok(nodes.iter().map(|&(s, w)| w * transform(s)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cosine_series() -> FourierSeries {
        // cos(2 pi t / T) with T = 2 pi
        let mut s = FourierSeries::zero(TAU, 1);
        *s.coeff_mut(1) = C64::new(0.5, 0.0);
        *s.coeff_mut(-1) = C64::new(0.5, 0.0);
        s
    }

    #[test]
    fn laplace_of_constant() {
        let dt = 0.01;
        let f: Vec<C64> = (0..=5000).map(|_| C64::new(1.0, 0.0)).collect();
        let v = laplace_sample(&f, dt, C64::new(1.0, 0.0)).unwrap();
        assert_relative_eq!(v.re, 1.0, epsilon = 1e-6);
        assert_relative_eq!(v.im, 0.0, epsilon = 1e-6);
    }

    #[test]
    fn laplace_of_decaying_exponential() {
        let dt = 0.01;
        let f: Vec<C64> = (0..=5000).map(|i| C64::new((-(i as f64) * dt).exp(), 0.0)).collect();
        let v = laplace_sample(&f, dt, C64::new(1.0, 0.0)).unwrap();
        assert_relative_eq!(v.re, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn laplace_of_sine_with_odd_interval_count() {
        let dt = 0.01;
        let f: Vec<C64> = (0..=4999).map(|i| C64::new((i as f64 * dt).sin(), 0.0)).collect();
        let v = laplace_sample(&f, dt, C64::new(2.0, 0.0)).unwrap();
        assert_relative_eq!(v.re, 0.2, epsilon = 1e-6);
        assert_relative_eq!(v.im, 0.0, epsilon = 1e-6);
    }

    #[test]
    fn laplace_rejects_degenerate_input() {
        let f = [C64::new(1.0, 0.0); 2];
        assert!(laplace_sample(&f, 0.1, C64::new(1.0, 0.0)).is_err());
        let f3 = [C64::new(1.0, 0.0); 3];
        assert!(laplace_sample(&f3, 0.0, C64::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn cosine_coefficients() {
        let period = TAU;
        let n = 64;
        let samples: Vec<f64> = (0..n).map(|i| (TAU * i as f64 / n as f64).cos()).collect();
        let s = fourier_coeffs(&samples, period, 3).unwrap();
        assert_relative_eq!(s.coeff(1).re, 0.5, epsilon = 1e-12);
        assert_relative_eq!(s.coeff(-1).re, 0.5, epsilon = 1e-12);
        for k in [-3i64, -2, 0, 2, 3] {
            assert!(s.coeff(k).norm() < 1e-12, "leakage at k={k}");
        }
    }

    #[test]
    fn aliasing_is_rejected() {
        let samples = [0.0; 8];
        assert!(matches!(
            fourier_coeffs(&samples, 1.0, 4),
            Err(CoreError::Aliasing { samples: 8, k_max: 4 })
        ));
    }

    #[test]
    fn analysis_synthesis_round_trip() {
        // random trig polynomial of degree 8, N = 2K+1 samples exactly
        let period = 3.0;
        let k_max = 8usize;
        let mut reference = FourierSeries::zero(period, k_max);
        let mut seed = 0x9e3779b97f4a7c15u64;
        let mut rng = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for k in 1..=k_max as i64 {
            let c = C64::new(rng(), rng());
            *reference.coeff_mut(k) = c;
            *reference.coeff_mut(-k) = c.conj();
        }
        *reference.coeff_mut(0) = C64::new(rng(), 0.0);
        let n = 2 * k_max + 1;
        let samples: Vec<f64> =
            (0..n).map(|i| reference.synthesize(i as f64 * period / n as f64).re).collect();
        let recovered = fourier_coeffs(&samples, period, k_max).unwrap();
        for k in -(k_max as i64)..=k_max as i64 {
            assert!((recovered.coeff(k) - reference.coeff(k)).norm() < 1e-10);
        }
    }

    #[test]
    fn cosine_squared_coefficients() {
        let c = cosine_series();
        let sq = toeplitz_convolve(&c, &c).unwrap();
        assert_eq!(sq.k_max(), 2);
        assert_relative_eq!(sq.coeff(0).re, 0.5, epsilon = 1e-15);
        assert_relative_eq!(sq.coeff(2).re, 0.25, epsilon = 1e-15);
        assert_relative_eq!(sq.coeff(-2).re, 0.25, epsilon = 1e-15);
        assert!(sq.coeff(1).norm() < 1e-15);
    }

    #[test]
    fn convolve_rejects_period_mismatch() {
        let a = FourierSeries::zero(1.0, 2);
        let b = FourierSeries::zero(2.0, 2);
        assert!(toeplitz_convolve(&a, &b).is_err());
        assert!(plancherel_inner(&a, &b).is_err());
    }

    #[test]
    fn cosine_cubed_coefficients() {
        // cos^3 = (3/4) cos + (1/4) cos 3t
        let c = cosine_series();
        let cubed = conv_power(&c, 3).unwrap();
        assert_relative_eq!(cubed.coeff(1).re, 0.375, epsilon = 1e-15);
        assert_relative_eq!(cubed.coeff(3).re, 0.125, epsilon = 1e-15);
        assert!(cubed.coeff(0).norm() < 1e-15);
        assert!(cubed.coeff(2).norm() < 1e-15);
    }

    #[test]
    fn delta_convolution_power_shifts() {
        let mut d = FourierSeries::zero(1.0, 1);
        *d.coeff_mut(1) = C64::new(1.0, 0.0);
        let p4 = conv_power(&d, 4).unwrap();
        assert_eq!(p4.k_max(), 4);
        for k in -4i64..=4 {
            let expect = if k == 4 { 1.0 } else { 0.0 };
            assert_relative_eq!(p4.coeff(k).re, expect, epsilon = 1e-15);
            assert_relative_eq!(p4.coeff(k).im, 0.0, epsilon = 1e-15);
        }
        assert!(conv_power(&d, 0).is_err());
    }

    #[test]
    fn plancherel_matches_time_quadrature() {
        let period = 2.0;
        let mut f = FourierSeries::zero(period, 5);
        let mut g = FourierSeries::zero(period, 3);
        for k in -5i64..=5 {
            *f.coeff_mut(k) = C64::new(0.1 * k as f64 + 0.3, 0.07 * k as f64);
        }
        for k in -3i64..=3 {
            *g.coeff_mut(k) = C64::new(0.2 - 0.05 * k as f64, 0.11 * (k * k) as f64);
        }
        let lhs = plancherel_inner(&f, &g).unwrap();
        let n = 4096;
        let mut quad = C64::new(0.0, 0.0);
        for i in 0..n {
            let t = i as f64 * period / n as f64;
            quad += f.synthesize(t) * g.synthesize(t).conj();
        }
        quad /= n as f64;
        assert!((lhs - quad).norm() < 1e-10);
    }

    #[test]
    fn pushforward_matches_time_domain() {
        // h(y) = 2 y + 0.5 y^2 - 0.25 y^3 applied to a random degree-2 signal
        let h = [2.0, 0.5, -0.25];
        let period = 1.7;
        let mut y = FourierSeries::zero(period, 2);
        *y.coeff_mut(0) = C64::new(0.2, 0.0);
        *y.coeff_mut(1) = C64::new(0.3, -0.1);
        *y.coeff_mut(-1) = C64::new(0.3, 0.1);
        *y.coeff_mut(2) = C64::new(-0.05, 0.2);
        *y.coeff_mut(-2) = C64::new(-0.05, -0.2);
        let g = poly_pushforward(&h, &y).unwrap();
        assert_eq!(g.k_max(), 6);
        // oracle: sample h(y(t)) and re-analyze
        let n = 64;
        let samples: Vec<f64> = (0..n)
            .map(|i| {
                let yv = y.synthesize(i as f64 * period / n as f64).re;
                h[0] * yv + h[1] * yv * yv + h[2] * yv * yv * yv
            })
            .collect();
        let oracle = fourier_coeffs(&samples, period, 6).unwrap();
        for k in -6i64..=6 {
            assert!(
                (g.coeff(k) - oracle.coeff(k)).norm() < 1e-9,
                "mismatch at k={k}: {} vs {}",
                g.coeff(k),
                oracle.coeff(k)
            );
        }
    }

    #[test]
    fn mean_of_cosine_squared() {
        let h = [0.0, 1.0]; // h(y) = y^2
        let v = time_average_poly(&h, &cosine_series()).unwrap();
        assert_relative_eq!(v.re, 0.5, epsilon = 1e-12);
        assert_relative_eq!(v.im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn time_average_matches_pushforward_mean() {
        let h = [1.0, -0.4, 0.9, 0.3];
        let mut y = FourierSeries::zero(2.5, 2);
        *y.coeff_mut(0) = C64::new(-0.1, 0.0);
        *y.coeff_mut(1) = C64::new(0.4, 0.2);
        *y.coeff_mut(-1) = C64::new(0.4, -0.2);
        *y.coeff_mut(2) = C64::new(0.15, -0.3);
        *y.coeff_mut(-2) = C64::new(0.15, 0.3);
        let avg = time_average_poly(&h, &y).unwrap();
        let mean = poly_pushforward(&h, &y).unwrap().coeff(0);
        assert!((avg - mean).norm() < 1e-12);
    }

    #[test]
    fn talbot_inverts_simple_transforms() {
        // 1/s -> 1 and 1/(s+a) -> exp(-a t)
        let one = talbot_invert(|s| 1.0 / s, 0.8).unwrap();
        assert!((one - C64::new(1.0, 0.0)).norm() < 1e-6);
        let a = C64::new(0.7, 1.3);
        let t = 1.9;
        let decay = talbot_invert(|s| 1.0 / (s + a), t).unwrap();
        assert!((decay - (-a * t).exp()).norm() < 1e-6);
        assert!(talbot_invert(|s| 1.0 / s, 0.0).is_err());
    }

    #[test]
    fn csv_layout() {
        let c = cosine_series();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("k,re,im"));
        assert!(lines.next().unwrap().starts_with("-1,5"));
    }

    proptest! {
        #[test]
        fn convolution_matches_pointwise_product(
            av in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 5),
            bv in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 7),
            t in 0.0f64..4.0,
        ) {
            let period = 4.0;
            let a = FourierSeries::new(period, av.iter().map(|&(r, i)| C64::new(r, i)).collect()).unwrap();
            let b = FourierSeries::new(period, bv.iter().map(|&(r, i)| C64::new(r, i)).collect()).unwrap();
            let c = toeplitz_convolve(&a, &b).unwrap();
            let lhs = c.synthesize(t);
            let rhs = a.synthesize(t) * b.synthesize(t);
            prop_assert!((lhs - rhs).norm() < 1e-12);
        }

        #[test]
        fn parseval_norm_is_nonnegative(
            fv in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 9),
        ) {
            let f = FourierSeries::new(1.0, fv.iter().map(|&(r, i)| C64::new(r, i)).collect()).unwrap();
            let p = plancherel_inner(&f, &f).unwrap();
            prop_assert!(p.re >= 0.0);
            prop_assert!(p.im.abs() < 1e-12);
        }
    }
}
