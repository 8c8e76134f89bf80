//! Truncated Fourier representation of real periodic fields on [-π, π).
//!
//! A field with `n_modes = N` carries complex coefficients for k = -N..=N and
//! is sampled on the 2N+1 collocation points `x_j = 2π(j - N)/(2N+1)`.
//! Nonlinear pointwise maps (exp, ln, products) are done by collocation.

use std::cell::RefCell;
use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Relative tolerance used for Hermitian-symmetry and imaginary-residue checks.
pub const HERMITIAN_TOL: f64 = 1e-12;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Collocation points for a field with `n_modes` modes.
pub fn collocation_points(n_modes: usize) -> Vec<f64> {
    let m = 2 * n_modes + 1;
    (0..m)
        .map(|j| 2.0 * PI * (j as f64 - n_modes as f64) / m as f64)
        .collect()
}

/// Complex Fourier coefficients of a real periodic field.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    n_modes: usize,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(n_modes: usize) -> Self {
        Self {
            n_modes,
            coeffs: vec![Complex64::new(0.0, 0.0); 2 * n_modes + 1],
        }
    }

    pub fn constant(n_modes: usize, value: f64) -> Self {
        let mut f = Self::zeros(n_modes);
        f.coeffs[n_modes] = Complex64::new(value, 0.0);
        f
    }

    /// Builds a field from coefficients ordered k = -N..=N, rejecting
    /// coefficient sets that do not describe a real field.
    pub fn from_coeffs(n_modes: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != 2 * n_modes + 1 {
            return Err(Error::Dimension(format!(
                "expected {} coefficients for N_T = {}, got {}",
                2 * n_modes + 1,
                n_modes,
                coeffs.len()
            )));
        }
        let f = Self { n_modes, coeffs };
        f.check_hermitian()?;
        Ok(f)
    }

    /// Samples `f` on the collocation grid and transforms to modes.
    pub fn from_fn(n_modes: usize, f: impl Fn(f64) -> f64) -> Self {
        let values: Vec<f64> = collocation_points(n_modes).into_iter().map(f).collect();
        to_spectral(&values).expect("grid length is consistent by construction")
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// Number of coefficients, 2N+1.
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Coefficient of mode k; zero outside the truncation.
    pub fn coeff(&self, k: i64) -> Complex64 {
        if k.unsigned_abs() as usize > self.n_modes {
            return Complex64::new(0.0, 0.0);
        }
        self.coeffs[(k + self.n_modes as i64) as usize]
    }

    /// Sets mode k and its conjugate partner -k. For k = 0 only the real part is kept.
    pub fn set_mode(&mut self, k: i64, value: Complex64) {
        let n = self.n_modes as i64;
        assert!(k.abs() <= n, "mode {k} outside truncation {n}");
        if k == 0 {
            self.coeffs[n as usize] = Complex64::new(value.re, 0.0);
        } else {
            self.coeffs[(k + n) as usize] = value;
            self.coeffs[(n - k) as usize] = value.conj();
        }
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn check_hermitian(&self) -> Result<()> {
        let scale = self.max_abs_coeff();
        let tol = HERMITIAN_TOL * scale;
        let n = self.n_modes as i64;
        let c0 = self.coeff(0);
        if c0.im.abs() > tol {
            return Err(Error::NotHermitian {
                mode: 0,
                residue: c0.im.abs(),
            });
        }
        for k in 1..=n {
            let residue = (self.coeff(-k) - self.coeff(k).conj()).norm();
            if residue > tol {
                return Err(Error::NotHermitian { mode: k, residue });
            }
        }
        Ok(())
    }

    /// Field values on the collocation grid.
    pub fn to_physical(&self) -> Result<Vec<f64>> {
        to_physical(self)
    }

    /// Direct evaluation of the truncated series at an arbitrary point.
    pub fn eval(&self, x: f64) -> f64 {
        let mut v = self.coeff(0).re;
        for k in 1..=self.n_modes as i64 {
            let c = self.coeff(k);
            let kx = k as f64 * x;
            v += 2.0 * (c.re * kx.cos() - c.im * kx.sin());
        }
        v
    }

    /// Spectral x-derivative: coefficients multiplied by ik.
    pub fn derivative(&self) -> Self {
        let n = self.n_modes as i64;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(idx, c)| Complex64::new(0.0, (idx as i64 - n) as f64) * c)
            .collect();
        Self {
            n_modes: self.n_modes,
            coeffs,
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            n_modes: self.n_modes,
            coeffs: self.coeffs.iter().map(|c| c * a).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n_modes, other.n_modes);
        Self {
            n_modes: self.n_modes,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scaled(-1.0))
    }

    /// Applies a per-mode map `c_k -> g(k, c_k)`. The caller is responsible
    /// for keeping the result Hermitian.
    pub fn map_modes(&self, g: impl Fn(i64, Complex64) -> Complex64) -> Self {
        let n = self.n_modes as i64;
        Self {
            n_modes: self.n_modes,
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(idx, &c)| g(idx as i64 - n, c))
                .collect(),
        }
    }

    /// Pointwise product by collocation (exact up to aliasing of the top modes).
    pub fn collocated_product(&self, other: &Self) -> Result<Self> {
        let a = self.to_physical()?;
        let b = other.to_physical()?;
        let prod: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        to_spectral(&prod)
    }

    /// Zero-pads or truncates to `n_modes`.
    pub fn resized(&self, n_modes: usize) -> Self {
        let mut out = Self::zeros(n_modes);
        let m = n_modes.min(self.n_modes) as i64;
        for k in -m..=m {
            out.coeffs[(k + n_modes as i64) as usize] = self.coeff(k);
        }
        out
    }

    /// Pointwise product truncated to `N` modes, computed on a grid fine
    /// enough that no aliasing occurs.
    pub fn dealiased_product(&self, other: &Self) -> Result<Self> {
        let n = self.n_modes.max(other.n_modes);
        let fine = 2 * n;
        let a = self.resized(fine).to_physical()?;
        let b = other.resized(fine).to_physical()?;
        let prod: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        Ok(to_spectral(&prod)?.resized(n))
    }

    /// Real packing used as the filter state block:
    /// `[Re c_0, Re c_1, Im c_1, ..., Re c_N, Im c_N]`.
    pub fn pack(&self) -> DVector<f64> {
        let mut out = DVector::zeros(self.len());
        self.pack_into(out.as_mut_slice());
        out
    }

    pub fn pack_into(&self, out: &mut [f64]) {
        out[0] = self.coeff(0).re;
        for k in 1..=self.n_modes {
            let c = self.coeff(k as i64);
            out[2 * k - 1] = c.re;
            out[2 * k] = c.im;
        }
    }

    /// Inverse of [`SpectralField::pack`].
    pub fn unpack(n_modes: usize, packed: &[f64]) -> Self {
        assert_eq!(packed.len(), 2 * n_modes + 1, "packed length mismatch");
        let mut f = Self::zeros(n_modes);
        f.coeffs[n_modes] = Complex64::new(packed[0], 0.0);
        for k in 1..=n_modes {
            f.set_mode(k as i64, Complex64::new(packed[2 * k - 1], packed[2 * k]));
        }
        f
    }

    /// Root-mean-square of the field over the period (Parseval).
    pub fn rms(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }
}

fn with_fft<R>(len: usize, inverse: bool, f: impl FnOnce(&dyn rustfft::Fft<f64>) -> R) -> R {
    PLANNER.with(|p| {
        let mut planner = p.borrow_mut();
        let plan = if inverse {
            planner.plan_fft_inverse(len)
        } else {
            planner.plan_fft_forward(len)
        };
        f(plan.as_ref())
    })
}

/// Values of the field on the collocation grid: `v_j = Σ_k c_k exp(i k x_j)`.
pub fn to_physical(field: &SpectralField) -> Result<Vec<f64>> {
    field.check_hermitian()?;
    let n = field.n_modes as i64;
    let m = field.len();
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for k in -n..=n {
        buf[k.rem_euclid(m as i64) as usize] = field.coeff(k);
    }
    with_fft(m, true, |fft| fft.process(&mut buf));
    let bound: f64 = field.coeffs.iter().map(|c| c.norm()).sum();
    let tol = HERMITIAN_TOL * bound.max(f64::MIN_POSITIVE);
    let mut out = Vec::with_capacity(m);
    for j in 0..m as i64 {
        let v = buf[(j - n).rem_euclid(m as i64) as usize];
        if v.im.abs() > tol {
            return Err(Error::NotHermitian {
                mode: j - n,
                residue: v.im.abs(),
            });
        }
        out.push(v.re);
    }
    Ok(out)
}

/// Largest imaginary part of the synthesized grid values, before it is discarded.
pub fn imaginary_residue(field: &SpectralField) -> f64 {
    let n = field.n_modes as i64;
    let m = field.len();
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for k in -n..=n {
        buf[k.rem_euclid(m as i64) as usize] = field.coeff(k);
    }
    with_fft(m, true, |fft| fft.process(&mut buf));
    buf.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
}

/// Exact inverse of [`to_physical`] on the collocation grid.
pub fn to_spectral(values: &[f64]) -> Result<SpectralField> {
    let m = values.len();
    if m == 0 || m % 2 == 0 {
        return Err(Error::Dimension(format!(
            "collocation grid needs an odd length 2N+1, got {m}"
        )));
    }
    let n = (m / 2) as i64;
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for j in 0..m as i64 {
        buf[(j - n).rem_euclid(m as i64) as usize] = Complex64::new(values[j as usize], 0.0);
    }
    with_fft(m, false, |fft| fft.process(&mut buf));
    let scale = 1.0 / m as f64;
    let mut field = SpectralField::zeros(n as usize);
    field.coeffs[n as usize] = Complex64::new(buf[0].re * scale, 0.0);
    for k in 1..=n {
        let c = buf[k as usize] * scale;
        field.set_mode(k, c);
    }
    Ok(field)
}

/// θ = ln κ by collocation.
pub fn log_diffusivity(kappa: &SpectralField) -> Result<SpectralField> {
    let values = kappa.to_physical()?;
    let mut logs = Vec::with_capacity(values.len());
    for (index, &value) in values.iter().enumerate() {
        if !(value > 0.0) {
            return Err(Error::Domain { index, value });
        }
        logs.push(value.ln());
    }
    to_spectral(&logs)
}

/// κ = exp θ by collocation.
pub fn exp_diffusivity(theta: &SpectralField) -> Result<SpectralField> {
    let values: Vec<f64> = theta.to_physical()?.into_iter().map(f64::exp).collect();
    to_spectral(&values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(n: usize, rng: &mut impl Rng) -> SpectralField {
        let mut f = SpectralField::zeros(n);
        f.set_mode(0, Complex64::new(rng.random_range(-1.0..1.0), 0.0));
        for k in 1..=n as i64 {
            f.set_mode(
                k,
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            );
        }
        f
    }

    // Direct O(N^2) synthesis, independent of the FFT path.
    fn dft_synthesis(f: &SpectralField) -> Vec<f64> {
        let n = f.n_modes() as i64;
        collocation_points(f.n_modes())
            .iter()
            .map(|&x| {
                let mut s = Complex64::new(0.0, 0.0);
                for k in -n..=n {
                    s += f.coeff(k) * Complex64::from_polar(1.0, k as f64 * x);
                }
                s.re
            })
            .collect()
    }

    #[test]
    fn constant_field_is_all_ones() {
        let v = SpectralField::constant(5, 1.0).to_physical().unwrap();
        assert!(v.iter().all(|x| (x - 1.0).abs() < 1e-14));
    }

    #[test]
    fn half_amplitude_pair_is_cosine() {
        let mut f = SpectralField::zeros(6);
        f.set_mode(1, Complex64::new(0.5, 0.0));
        let v = f.to_physical().unwrap();
        for (x, y) in collocation_points(6).iter().zip(&v) {
            assert!((x.cos() - y).abs() < 1e-14);
        }
    }

    #[test]
    fn spectral_of_cosine_and_ones() {
        let xs = collocation_points(7);
        let f = to_spectral(&xs.iter().map(|x| x.cos()).collect::<Vec<_>>()).unwrap();
        assert!((f.coeff(1) - Complex64::new(0.5, 0.0)).norm() < 1e-14);
        assert!((f.coeff(-1) - Complex64::new(0.5, 0.0)).norm() < 1e-14);
        assert!(f.coeff(0).norm() < 1e-14);
        let g = to_spectral(&vec![1.0; xs.len()]).unwrap();
        assert!((g.coeff(0).re - 1.0).abs() < 1e-14);
        assert!(g.coeffs().iter().enumerate().all(|(i, c)| i == 7 || c.norm() < 1e-14));
    }

    #[test]
    fn fft_matches_direct_synthesis() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = random_field(8, &mut rng);
        let fast = f.to_physical().unwrap();
        let slow = dft_synthesis(&f);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-12);
        }
        let back = to_spectral(&fast).unwrap();
        for (a, b) in back.coeffs().iter().zip(f.coeffs()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 5];
        coeffs[3] = Complex64::new(1.0, 0.0);
        let err = SpectralField::from_coeffs(2, coeffs).unwrap_err();
        assert!(matches!(err, Error::NotHermitian { mode: 1, .. }));
    }

    #[test]
    fn even_grid_length_rejected() {
        assert!(matches!(to_spectral(&[1.0, 2.0]), Err(Error::Dimension(_))));
    }

    #[test]
    fn log_exp_examples() {
        let k = SpectralField::constant(4, 2.5);
        let th = log_diffusivity(&k).unwrap();
        assert!((th.coeff(0).re - 2.5f64.ln()).abs() < 1e-14);
        let one = exp_diffusivity(&SpectralField::zeros(4)).unwrap();
        assert!((one.coeff(0).re - 1.0).abs() < 1e-14);

        let kappa = SpectralField::from_fn(16, |x| 1.0 + 0.3 * x.sin());
        let round = exp_diffusivity(&log_diffusivity(&kappa).unwrap()).unwrap();
        let a = round.to_physical().unwrap();
        for (x, v) in collocation_points(16).iter().zip(&a) {
            assert!((v - (1.0 + 0.3 * x.sin())).abs() < 1e-10);
        }
    }

    #[test]
    fn log_reports_grid_index() {
        let kappa = SpectralField::from_fn(4, |x| x);
        match log_diffusivity(&kappa) {
            Err(Error::Domain { index, .. }) => assert_eq!(index, 0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn derivative_of_sine() {
        let f = SpectralField::from_fn(5, |x| (2.0 * x).sin());
        let d = f.derivative().to_physical().unwrap();
        for (x, v) in collocation_points(5).iter().zip(&d) {
            assert!((v - 2.0 * (2.0 * x).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn dealiased_product_matches_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = random_field(6, &mut rng);
        let b = random_field(6, &mut rng);
        let p = a.dealiased_product(&b).unwrap();
        for k in -6i64..=6 {
            let direct: Complex64 = (-6i64..=6).map(|j| a.coeff(k - j) * b.coeff(j)).sum();
            assert!((p.coeff(k) - direct).norm() < 1e-13);
        }
        assert_eq!(a.resized(9).resized(6), a);
        assert!(imaginary_residue(&a) < 1e-14);
        let mut bad = a.clone();
        bad.coeffs[7] += Complex64::new(0.0, 0.1);
        assert!(imaginary_residue(&bad) > 0.01);
    }

    proptest! {
        #[test]
        fn transform_round_trip(seed in 0u64..1000, n in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_field(n, &mut rng);
            let back = to_spectral(&f.to_physical().unwrap()).unwrap();
            for (a, b) in back.coeffs().iter().zip(f.coeffs()) {
                prop_assert!((a - b).norm() < 1e-12);
            }
            let packed = f.pack();
            prop_assert_eq!(SpectralField::unpack(n, packed.as_slice()), f.clone());
            let x = rng.random_range(-PI..PI);
            let direct: Complex64 = (-(n as i64)..=n as i64)
                .map(|k| f.coeff(k) * Complex64::from_polar(1.0, k as f64 * x))
                .sum();
            prop_assert!((f.eval(x) - direct.re).abs() < 1e-12);
        }
    }
}
