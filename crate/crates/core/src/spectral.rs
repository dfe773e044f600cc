//! Periodic grids, Fourier multipliers and Sobolev norms.
//!
//! Fourier coefficients are normalized so that `u(x) = sum_k u_hat(k) e^{i xi_k x}`
//! with `xi_k = 2 pi k / L`; integrals use the trapezoid rule, which is exact
//! for band-limited fields.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::output::{csv_table, parse_csv};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if forward {
            p.plan_fft_forward(n)
        } else {
            p.plan_fft_inverse(n)
        }
    })
}

/// Unnormalized forward DFT scaled by `1/N`.
pub fn forward_transform(values: &[f64]) -> Vec<Complex64> {
    let n = values.len();
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan(n, true).process(&mut buf);
    let inv = 1.0 / n as f64;
    buf.iter_mut().for_each(|c| *c *= inv);
    buf
}

/// Inverse of [`forward_transform`], complex output.
pub fn inverse_transform_complex(coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut buf = coeffs.to_vec();
    plan(buf.len(), false).process(&mut buf);
    buf
}

/// Inverse of [`forward_transform`], keeping the real part.
pub fn inverse_transform(coeffs: &[Complex64]) -> Vec<f64> {
    inverse_transform_complex(coeffs).into_iter().map(|c| c.re).collect()
}

/// Equispaced periodic grid on `[0, L)` with an even number of nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicGrid {
    length: f64,
    n: usize,
}

impl PeriodicGrid {
    pub const MIN_NODES: usize = 16;

    pub fn new(length: f64, n: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Domain(format!("period must be positive, got {length}")));
        }
        if n < Self::MIN_NODES || n & 1 == 1 {
            return Err(Error::Domain(format!("node count must be even and >= 16, got {n}")));
        }
        Ok(Self { length, n })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.node(j)).collect()
    }

    /// Integer wavenumber stored at FFT index `i`; index `N/2` holds `-N/2`.
    pub fn wavenumber(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i < n / 2 { i } else { i - n }
    }

    /// Physical frequency `2 pi k / L` at FFT index `i`.
    pub fn frequency(&self, i: usize) -> f64 {
        2.0 * PI * self.wavenumber(i) as f64 / self.length
    }

    /// Frequency used for odd operators (derivative, translation): the
    /// Nyquist entry is zeroed.
    pub fn odd_frequency(&self, i: usize) -> f64 {
        if i == self.n / 2 { 0.0 } else { self.frequency(i) }
    }

    pub fn nyquist_index(&self) -> usize {
        self.n / 2
    }

    pub fn check_same(&self, other: &PeriodicGrid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!(
                "(L = {}, N = {}) vs (L = {}, N = {})",
                self.length, self.n, other.length, other.n
            )));
        }
        Ok(())
    }
}

/// Built-in dispersion symbols.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SymbolKind {
    /// `M = -d^2/dx^2`.
    SecondDerivative,
    /// `M = H d/dx` (Benjamin-Ono).
    HilbertDerivative,
    /// `M = T_delta d/dx - 1/delta` (intermediate long wave).
    Ilw { delta: f64 },
    /// `|xi|^order`.
    Power { order: f64 },
}

/// Fourier multiplier `theta` with the growth bounds
/// `lower |k|^order <= theta(k) <= upper |k|^order` for `|k| >= threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionSymbol {
    pub kind: SymbolKind,
    pub order: f64,
    pub lower: f64,
    pub upper: f64,
    pub threshold: u64,
}

fn coth_times(x: f64) -> f64 {
    // x coth(x) for x > 0 without overflow
    x * (1.0 + 2.0 / (2.0 * x).exp_m1())
}

impl DispersionSymbol {
    /// Symbol with the growth bounds appropriate for period `length`.
    pub fn new(kind: SymbolKind, length: f64) -> Result<Self> {
        let base = 2.0 * PI / length;
        Ok(match kind {
            SymbolKind::SecondDerivative => Self { kind, order: 2.0, lower: base * base, upper: base * base, threshold: 1 },
            SymbolKind::HilbertDerivative => Self { kind, order: 1.0, lower: base, upper: base, threshold: 1 },
            SymbolKind::Power { order } => {
                if !(order > 0.0) {
                    return Err(Error::Domain(format!("power symbol order must be positive, got {order}")));
                }
                let c = base.powf(order);
                Self { kind, order, lower: c, upper: c, threshold: 1 }
            }
            SymbolKind::Ilw { delta } => {
                if !(delta > 0.0 && delta.is_finite()) {
                    return Err(Error::Domain(format!("ILW depth must be positive, got {delta}")));
                }
                let threshold = ilw_threshold(delta, length);
                let margin = base - 2.0 / (threshold as f64 * delta);
                Self { kind, order: 1.0, lower: 0.99 * margin, upper: base, threshold }
            }
        })
    }

    pub fn second_derivative(length: f64) -> Self {
        Self::new(SymbolKind::SecondDerivative, length).expect("valid symbol")
    }

    pub fn hilbert_derivative(length: f64) -> Self {
        Self::new(SymbolKind::HilbertDerivative, length).expect("valid symbol")
    }

    pub fn ilw(delta: f64, length: f64) -> Result<Self> {
        Self::new(SymbolKind::Ilw { delta }, length)
    }

    /// `theta(kappa)` on period `length`.
    pub fn value(&self, kappa: i64, length: f64) -> f64 {
        let xi = (2.0 * PI * kappa as f64 / length).abs();
        match self.kind {
            SymbolKind::SecondDerivative => xi * xi,
            SymbolKind::HilbertDerivative => xi,
            SymbolKind::Power { order } => xi.powf(order),
            SymbolKind::Ilw { delta } => {
                if kappa == 0 {
                    0.0
                } else {
                    coth_times(xi * delta) / delta - 1.0 / delta
                }
            }
        }
    }

    /// Symbol values in FFT order on `grid`.
    pub fn values_on(&self, grid: &PeriodicGrid) -> Vec<f64> {
        (0..grid.len()).map(|i| self.value(grid.wavenumber(i), grid.length())).collect()
    }

    pub fn name(&self) -> String {
        match self.kind {
            SymbolKind::SecondDerivative => "second_derivative".into(),
            SymbolKind::HilbertDerivative => "hilbert_derivative".into(),
            SymbolKind::Ilw { delta } => format!("ilw(delta={delta})"),
            SymbolKind::Power { order } => format!("power(m={order})"),
        }
    }
}

/// Smallest threshold with `delta > L / (threshold pi)`, plus one.
pub fn ilw_threshold(delta: f64, length: f64) -> u64 {
    (length / (PI * delta)).ceil() as u64 + 1
}

/// `theta(kappa)` as a free function.
pub fn symbol_value(s: &DispersionSymbol, kappa: i64, length: f64) -> f64 {
    s.value(kappa, length)
}

/// Outcome of enumerating the growth bounds of a symbol on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolBoundsReport {
    pub tightest_lower: f64,
    pub tightest_upper: f64,
    pub threshold: u64,
    pub even: bool,
    pub pass: bool,
}

/// Checks the stored bounds for every `|k|` in `[threshold, N/2]`.
pub fn verify_symbol_bounds(s: &DispersionSymbol, grid: &PeriodicGrid) -> SymbolBoundsReport {
    let l = grid.length();
    let kmax = (grid.len() / 2) as i64;
    let k0 = (s.threshold as i64).max(1);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut even = true;
    for k in 0..=kmax {
        even &= s.value(k, l) == s.value(-k, l);
        if k >= k0 {
            let r = s.value(k, l) / (k as f64).powf(s.order);
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    let tol = 1e-12;
    let pass = even && lo.is_finite() && s.lower <= lo * (1.0 + tol) && s.upper >= hi * (1.0 - tol) && s.lower > 0.0;
    SymbolBoundsReport { tightest_lower: lo, tightest_upper: hi, threshold: s.threshold, even, pass }
}

/// Real field sampled on a periodic grid; Fourier coefficients are computed
/// on first use and cached.
#[derive(Debug, Clone)]
pub struct Field {
    grid: PeriodicGrid,
    values: Vec<f64>,
    spectrum: OnceLock<Vec<Complex64>>,
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.values == other.values
    }
}

impl Field {
    pub fn new(grid: PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} samples for {} nodes", values.len(), grid.len())));
        }
        Ok(Self { grid, values, spectrum: OnceLock::new() })
    }

    pub fn from_fn(grid: PeriodicGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().into_iter().map(f).collect();
        Self { grid, values, spectrum: OnceLock::new() }
    }

    pub fn constant(grid: PeriodicGrid, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()], spectrum: OnceLock::new() }
    }

    /// Field from coefficients in FFT order (imaginary residue discarded).
    pub fn from_spectrum(grid: PeriodicGrid, coeffs: &[Complex64]) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} coefficients for {} nodes", coeffs.len(), grid.len())));
        }
        Ok(Self { grid, values: inverse_transform(coeffs), spectrum: OnceLock::new() })
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn spectrum(&self) -> &[Complex64] {
        self.spectrum.get_or_init(|| forward_transform(&self.values))
    }

    fn with_multiplier(&self, m: impl Fn(usize) -> Complex64) -> Field {
        let coeffs: Vec<Complex64> = self.spectrum().iter().enumerate().map(|(i, c)| c * m(i)).collect();
        Field { grid: self.grid, values: inverse_transform(&coeffs), spectrum: OnceLock::new() }
    }

    /// `M u` for the Fourier multiplier `s`.
    pub fn apply_multiplier(&self, s: &DispersionSymbol) -> Field {
        let theta = s.values_on(&self.grid);
        self.with_multiplier(|i| Complex64::new(theta[i], 0.0))
    }

    /// Applies an arbitrary even real multiplier given in FFT order.
    pub fn apply_even_multiplier(&self, weights: &[f64]) -> Field {
        self.with_multiplier(|i| Complex64::new(weights[i], 0.0))
    }

    pub fn derivative(&self) -> Field {
        let g = self.grid;
        self.with_multiplier(|i| Complex64::new(0.0, g.odd_frequency(i)))
    }

    /// `u(. + r)` via exact phase factors (Nyquist mode dropped).
    pub fn translate(&self, r: f64) -> Field {
        let g = self.grid;
        self.with_multiplier(|i| {
            if i == g.nyquist_index() {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::from_polar(1.0, g.frequency(i) * r)
            }
        })
    }

    /// `u(. + g h)` by rotating samples.
    pub fn shift_nodes(&self, g: isize) -> Field {
        let n = self.values.len() as isize;
        let values = (0..n).map(|j| self.values[(j + g).rem_euclid(n) as usize]).collect();
        Field { grid: self.grid, values, spectrum: OnceLock::new() }
    }

    /// `int_0^L u dx`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.spacing()
    }

    /// Average value `(1/L) int u`.
    pub fn average(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// `int_0^L u v dx`.
    pub fn inner(&self, other: &Field) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>() * self.grid.spacing())
    }

    /// `H^s` norm; `s = 0` is the `L^2` norm.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        self.sobolev_inner(self, s).max(0.0).sqrt()
    }

    /// `H^s` inner product (grids assumed equal).
    pub fn sobolev_inner(&self, other: &Field, s: f64) -> f64 {
        let w = sobolev_weights(&self.grid, s);
        let a = self.spectrum();
        let b = other.spectrum();
        self.grid.length() * a.iter().zip(b).zip(&w).map(|((x, y), w)| w * (x.conj() * y).re).sum::<f64>()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect(), spectrum: OnceLock::new() }
    }

    pub fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.grid.check_same(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Field { grid: self.grid, values, spectrum: OnceLock::new() })
    }

    pub fn scaled(&self, a: f64) -> Field {
        self.map(|v| a * v)
    }

    /// `self + a other`.
    pub fn add_scaled(&self, a: f64, other: &Field) -> Result<Field> {
        self.zip_with(other, |x, y| x + a * y)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |x, y| x - y)
    }

    /// CSV with columns `x,u`.
    pub fn to_csv(&self) -> String {
        csv_table(&["x", "u"], self.grid.nodes().into_iter().zip(&self.values).map(|(x, &u)| vec![x, u]))
    }

    /// Reads a field written by [`Field::to_csv`]; the period must be supplied.
    pub fn from_csv(text: &str, length: f64) -> Result<Field> {
        let (_, rows) = parse_csv(text)?;
        let grid = PeriodicGrid::new(length, rows.len())?;
        if rows.iter().any(|r| r.len() < 2) {
            return Err(Error::Parse("field CSV needs two columns".into()));
        }
        Field::new(grid, rows.into_iter().map(|r| r[1]).collect())
    }

    /// CSV with columns `kappa,re,im`, wavenumbers ascending from `-N/2`.
    pub fn spectrum_csv(&self) -> String {
        let n = self.grid.len();
        let spec = self.spectrum();
        let rows = (0..n).map(|j| {
            let i = (j + n / 2) % n;
            vec![self.grid.wavenumber(i) as f64, spec[i].re, spec[i].im]
        });
        csv_table(&["kappa", "re", "im"], rows)
    }
}

/// `(1 + xi^2)^s` in FFT order.
pub fn sobolev_weights(grid: &PeriodicGrid, s: f64) -> Vec<f64> {
    (0..grid.len()).map(|i| (1.0 + grid.frequency(i).powi(2)).powf(s)).collect()
}

/// Real circulant matrix of an even real multiplier given in FFT order.
pub fn even_multiplier_matrix(grid: &PeriodicGrid, weights: &[f64]) -> DMatrix<f64> {
    let n = grid.len();
    let coeffs: Vec<Complex64> = weights.iter().map(|&w| Complex64::new(w / n as f64, 0.0)).collect();
    let col = inverse_transform(&coeffs);
    DMatrix::from_fn(n, n, |i, j| col[(i + n - j) % n])
}

/// Collocation matrix of the multiplier `s`.
pub fn multiplier_matrix(s: &DispersionSymbol, grid: &PeriodicGrid) -> DMatrix<f64> {
    even_multiplier_matrix(grid, &s.values_on(grid))
}

/// Collocation matrix of `d/dx` (Nyquist mode zeroed).
pub fn derivative_matrix(grid: &PeriodicGrid) -> DMatrix<f64> {
    let n = grid.len();
    let coeffs: Vec<Complex64> = (0..n).map(|i| Complex64::new(0.0, grid.odd_frequency(i) / n as f64)).collect();
    let col = inverse_transform(&coeffs);
    DMatrix::from_fn(n, n, |i, j| col[(i + n - j) % n])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> PeriodicGrid {
        PeriodicGrid::new(2.0 * PI, 64).unwrap()
    }

    fn random_field(g: PeriodicGrid, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Field::new(g, (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn symbols(l: f64) -> Vec<DispersionSymbol> {
        vec![
            DispersionSymbol::second_derivative(l),
            DispersionSymbol::hilbert_derivative(l),
            DispersionSymbol::ilw(0.7, l).unwrap(),
            DispersionSymbol::new(SymbolKind::Power { order: 1.5 }, l).unwrap(),
        ]
    }

    #[test]
    fn grid_validation() {
        assert!(PeriodicGrid::new(1.0, 15).is_err());
        assert!(PeriodicGrid::new(1.0, 17).is_err());
        assert!(PeriodicGrid::new(0.0, 32).is_err());
        let g = PeriodicGrid::new(3.0, 32).unwrap();
        assert_eq!(g.wavenumber(16), -16);
        assert_eq!(g.wavenumber(15), 15);
        assert_eq!(g.wavenumber(31), -1);
    }

    #[test]
    fn symbol_values_at_zero_and_limits() {
        let l = 2.0 * PI;
        for s in symbols(l) {
            assert_eq!(s.value(0, l), 0.0, "{}", s.name());
        }
        let s = DispersionSymbol::ilw(1.0, l).unwrap();
        // continuous limit: theta(k) ~ xi^2 delta / 3 for small xi
        let tiny = s.value(1, 1e6);
        let xi = 2.0 * PI / 1e6;
        assert!((tiny - xi * xi / 3.0).abs() < 1e-6 * xi * xi);
        assert!(DispersionSymbol::ilw(0.0, l).is_err());
        assert!(DispersionSymbol::ilw(-1.0, l).is_err());
    }

    #[test]
    fn ilw_coth_bound() {
        let l = 2.0 * PI;
        let delta = l;
        let s = DispersionSymbol::ilw(delta, l).unwrap();
        for k in [8i64, -8] {
            let t = s.value(k, l);
            let xi = 2.0 * PI * (k as f64).abs() / l;
            assert!(-1.0 / delta + xi <= t + 1.0 / delta);
            assert!(t + 1.0 / delta <= 1.0 / delta + xi);
        }
    }

    #[test]
    fn symbols_are_even() {
        let l = 5.0;
        for s in symbols(l) {
            for k in 0..200 {
                assert_eq!(s.value(k, l), s.value(-k, l));
            }
        }
    }

    #[test]
    fn multiplier_of_constant_vanishes() {
        let g = grid();
        let u = Field::constant(g, 3.0);
        for s in symbols(g.length()) {
            assert!(u.apply_multiplier(&s).max_abs() < 1e-13);
        }
    }

    #[test]
    fn second_derivative_on_single_mode() {
        let g = PeriodicGrid::new(3.0, 32).unwrap();
        let c = 2.0 * PI / 3.0;
        let u = Field::from_fn(g, |x| (c * x).cos());
        let mu = u.apply_multiplier(&DispersionSymbol::second_derivative(3.0));
        for (x, v) in g.nodes().iter().zip(mu.values()) {
            assert!((v - c * c * (c * x).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn multiplier_matches_dense_matrix() {
        let g = grid();
        let u = random_field(g, 3);
        for s in symbols(g.length()) {
            let m = multiplier_matrix(&s, &g);
            let dense = &m * nalgebra::DVector::from_column_slice(u.values());
            let spectral = u.apply_multiplier(&s);
            let scale = dense.amax().max(1.0);
            for (a, b) in dense.iter().zip(spectral.values()) {
                assert!((a - b).abs() < 1e-12 * scale, "{}", s.name());
            }
            assert!((&m - m.transpose()).amax() < 1e-12 * scale);
        }
    }

    #[test]
    fn derivative_checks() {
        let g = PeriodicGrid::new(4.0, 32).unwrap();
        let c = 2.0 * PI / 4.0;
        let du = Field::from_fn(g, |x| (c * x).sin()).derivative();
        for (x, v) in g.nodes().iter().zip(du.values()) {
            assert!((v - c * (c * x).cos()).abs() < 1e-13);
        }
        assert!(Field::constant(g, 2.0).derivative().max_abs() < 1e-14);
        let d = derivative_matrix(&g);
        let u = random_field(g, 1);
        let dense = &d * nalgebra::DVector::from_column_slice(u.values());
        for (a, b) in dense.iter().zip(u.derivative().values()) {
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn integrals_and_norms() {
        let g = grid();
        assert!((Field::constant(g, 1.0).integral() - 2.0 * PI).abs() < 1e-14);
        assert_eq!(Field::constant(g, 0.0).sobolev_norm(1.0), 0.0);
        assert!((Field::constant(g, 1.0).sobolev_norm(0.0) - (2.0 * PI).sqrt()).abs() < 1e-13);
        let u = random_field(g, 9);
        let l2 = u.inner(&u).unwrap();
        assert!((l2 - u.sobolev_norm(0.0).powi(2)).abs() < 1e-12 * l2);
        // derivative oracle for s = 1; Nyquist content is excluded from u'
        let smooth = Field::from_fn(g, |x| (x.sin() + 0.3 * (3.0 * x).cos()).exp());
        let du = smooth.derivative();
        let oracle = (smooth.inner(&smooth).unwrap() + du.inner(&du).unwrap()).sqrt();
        assert!((smooth.sobolev_norm(1.0) - oracle).abs() < 1e-10 * oracle);
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let a = Field::constant(grid(), 1.0);
        let b = Field::constant(PeriodicGrid::new(1.0, 64).unwrap(), 1.0);
        assert!(matches!(a.inner(&b), Err(Error::GridMismatch(_))));
        assert!(Field::new(grid(), vec![0.0; 3]).is_err());
    }

    #[test]
    fn bounds_report() {
        let l = 2.0 * PI;
        let g = PeriodicGrid::new(l, 128).unwrap();
        let r = verify_symbol_bounds(&DispersionSymbol::second_derivative(l), &g);
        assert!(r.pass);
        assert!((r.tightest_lower - 1.0).abs() < 1e-14 && (r.tightest_upper - 1.0).abs() < 1e-14);
        assert!(verify_symbol_bounds(&DispersionSymbol::hilbert_derivative(l), &g).pass);
        for delta in [0.3, 1.0, 4.0] {
            let s = DispersionSymbol::ilw(delta, l).unwrap();
            assert_eq!(s.upper, 1.0);
            assert!(s.lower < 1.0 - 2.0 / (s.threshold as f64 * delta));
            assert!(verify_symbol_bounds(&s, &g).pass, "delta = {delta}");
        }
        let mut bad = DispersionSymbol::second_derivative(l);
        bad.lower = 1.5;
        assert!(!verify_symbol_bounds(&bad, &g).pass);
    }

    #[test]
    fn csv_round_trips() {
        let g = grid();
        let u = random_field(g, 4);
        let back = Field::from_csv(&u.to_csv(), g.length()).unwrap();
        assert_eq!(back, u);
        let spec = u.spectrum_csv();
        assert!(spec.starts_with("kappa,re,im\n-3.2"));
    }

    proptest! {
        #[test]
        fn transform_round_trip(seed in 0u64..1000) {
            let u = random_field(grid(), seed);
            let back = inverse_transform(u.spectrum());
            for (a, b) in back.iter().zip(u.values()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            let s = u.spectrum();
            let n = s.len();
            for i in 1..n / 2 {
                prop_assert!((s[i] - s[n - i].conj()).norm() < 1e-14);
            }
        }

        #[test]
        fn multiplier_commutes_with_shift(seed in 0u64..1000, shift in -70isize..70) {
            let g = grid();
            let u = random_field(g, seed);
            for s in symbols(g.length()) {
                let a = u.shift_nodes(shift).apply_multiplier(&s);
                let b = u.apply_multiplier(&s).shift_nodes(shift);
                let scale = b.max_abs().max(1.0);
                for (x, y) in a.values().iter().zip(b.values()) {
                    prop_assert!((x - y).abs() < 1e-12 * scale);
                }
            }
        }
    }
}
