//! Traveling-wave profiles: nonlinearities, the profile equation
//! `M phi + omega phi - f(phi) + A = 0` (or its regularized form
//! `omega M phi + (omega - 1) phi - f(phi) + A = 0`), Newton solves on the
//! even subspace, closed-form KdV and ILW waves, and natural continuation.
//!
//! # Cnoidal relations
//!
//! Substituting `phi = beta (dn^2(lambda x, k) - E/K)`, `lambda = 2K/L`, into
//! `-phi'' + omega phi - phi^2/2 + A = 0` and using
//! `(dn^2)'' = -6 dn^4 + 4(2 - k^2) dn^2 - 2 k'^2` gives, term by term,
//!
//! * `dn^4`: `beta = 12 lambda^2`,
//! * `dn^2`: `omega = 4 (2 - k^2) lambda^2 - 12 lambda^2 E/K`,
//! * `1`:    `A = -2 k'^2 beta lambda^2 + omega beta E/K + beta^2 (E/K)^2 / 2`,
//!
//! and the last one coincides with `A = (1/2L) int phi^2`. The residual check in
//! [`cnoidal_wave`] certifies the three relations numerically.
//!
//! # ILW profile
//!
//! With `Z(u) = sum_n b_n sin(n pi u / K)` the combination
//! `(2K i/L) [Z(lambda (x - i delta)) - Z(lambda (x + i delta))]` collapses to
//! the real cosine series `(4K/L) sum_n b_n sinh(2 pi n delta / L) cos(2 pi n x / L)`,
//! which converges while `q exp(2 pi delta / L) < 1`.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::elliptic::{jacobi_sn_cn_dn, zeta_fourier_coefficients, EllipticModulus};
use crate::error::{Error, Result};
use crate::linop::LinearizedOperator;
use crate::output::{to_json_string, write_atomic};
use crate::spectral::{multiplier_matrix, DispersionSymbol, Field, PeriodicGrid, SymbolKind};

/// Residual bound certified for the closed-form cnoidal wave.
pub const CNOIDAL_TOL: f64 = 1e-9;
/// Residual bound certified for the closed-form ILW wave.
pub const ILW_TOL: f64 = 1e-8;

/// Nonlinear flux `f` with derivative and primitive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Nonlinearity {
    /// `f(u) = c u^{p+1} / (p+1)`.
    Power { p: u32, c: f64 },
    /// `f(u) = u^2`.
    QuadraticIlw,
}

impl Nonlinearity {
    pub fn kdv() -> Self {
        Nonlinearity::Power { p: 1, c: 1.0 }
    }

    pub fn gkdv(p: u32) -> Self {
        Nonlinearity::Power { p, c: 1.0 }
    }

    pub fn value(&self, u: f64) -> f64 {
        match *self {
            Nonlinearity::Power { p, c } => c * u.powi(p as i32 + 1) / (p as f64 + 1.0),
            Nonlinearity::QuadraticIlw => u * u,
        }
    }

    pub fn derivative(&self, u: f64) -> f64 {
        match *self {
            Nonlinearity::Power { p, c } => c * u.powi(p as i32),
            Nonlinearity::QuadraticIlw => 2.0 * u,
        }
    }

    /// `W` with `W' = f` and `W(0) = 0`.
    pub fn primitive(&self, u: f64) -> f64 {
        match *self {
            Nonlinearity::Power { p, c } => {
                let p = p as f64;
                c * u.powi(p as i32 + 2) / ((p + 1.0) * (p + 2.0))
            }
            Nonlinearity::QuadraticIlw => u * u * u / 3.0,
        }
    }

    /// Polynomial degree of `f`.
    pub fn degree(&self) -> u32 {
        match *self {
            Nonlinearity::Power { p, .. } => p + 1,
            Nonlinearity::QuadraticIlw => 2,
        }
    }

    /// True for `f(v) = v^2 / 2`.
    pub fn is_half_square(&self) -> bool {
        matches!(*self, Nonlinearity::Power { p: 1, c } if c == 1.0)
    }

    pub fn name(&self) -> String {
        match *self {
            Nonlinearity::Power { p, c } => format!("power(p={p}, c={c})"),
            Nonlinearity::QuadraticIlw => "quadratic_ilw".into(),
        }
    }
}

/// Which member of the equation class is meant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `u_t + (f(u))_x - (M u)_x = 0`.
    #[default]
    Standard,
    /// `u_t + u_x + (f(u))_x + (M u)_t = 0`.
    Regularized,
}

/// Symbol, nonlinearity and variant of the evolution equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equation {
    pub symbol: DispersionSymbol,
    pub nonlinearity: Nonlinearity,
    #[serde(default)]
    pub variant: Variant,
}

impl Equation {
    pub fn new(symbol: DispersionSymbol, nonlinearity: Nonlinearity, variant: Variant) -> Self {
        Self { symbol, nonlinearity, variant }
    }

    /// Coefficients `(a, b)` such that the profile equation reads
    /// `a M phi + b phi - f(phi) + A = 0`.
    pub fn profile_coefficients(&self, omega: f64) -> (f64, f64) {
        match self.variant {
            Variant::Standard => (1.0, omega),
            Variant::Regularized => (omega, omega - 1.0),
        }
    }

    /// Residual of the profile equation.
    pub fn residual(&self, phi: &Field, omega: f64, a: f64) -> Field {
        let (cm, c0) = self.profile_coefficients(omega);
        let m_phi = phi.apply_multiplier(&self.symbol);
        let nl = self.nonlinearity;
        m_phi
            .zip_with(phi, |m, p| cm * m + c0 * p - nl.value(p) + a)
            .expect("same grid")
    }

    /// `-d/d omega` of the profile equation's linear part applied to `phi`:
    /// `phi` (standard) or `M phi + phi` (regularized).
    pub fn speed_forcing(&self, phi: &Field) -> Field {
        match self.variant {
            Variant::Standard => phi.clone(),
            Variant::Regularized => phi.apply_multiplier(&self.symbol).add_scaled(1.0, phi).expect("same grid"),
        }
    }
}

/// How the integration constant `A` is handled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Constraint {
    /// `A` is prescribed.
    FixedA { a: f64 },
    /// `A` is unknown and `int phi = 0`.
    ZeroMean,
    /// `A` is unknown and the average of `phi` is prescribed.
    FixedMean { mean: f64 },
}

impl Constraint {
    fn target_average(&self) -> Option<f64> {
        match *self {
            Constraint::FixedA { .. } => None,
            Constraint::ZeroMean => Some(0.0),
            Constraint::FixedMean { mean } => Some(mean),
        }
    }
}

/// A solved periodic profile with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TravelingWave {
    pub profile: Field,
    pub speed: f64,
    pub constant: f64,
    pub equation: Equation,
    pub constraint: Constraint,
    pub residual_norm: f64,
}

impl TravelingWave {
    /// Builds a wave after checking its residual against `tol`.
    pub fn certified(
        profile: Field,
        speed: f64,
        constant: f64,
        equation: Equation,
        constraint: Constraint,
        tol: f64,
    ) -> Result<Self> {
        let residual_norm = equation.residual(&profile, speed, constant).max_abs();
        if !(residual_norm <= tol) {
            return Err(Error::Resolution(format!("profile residual {residual_norm:.3e} exceeds {tol:.1e}")));
        }
        Ok(Self { profile, speed, constant, equation, constraint, residual_norm })
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.profile.grid()
    }

    pub fn residual(&self) -> Field {
        residual(self)
    }

    /// `phi'`.
    pub fn translation_mode(&self) -> Field {
        self.profile.derivative()
    }

    /// Largest Fourier modulus over the top octave relative to the largest overall.
    pub fn spectral_tail(&self) -> f64 {
        let g = self.grid();
        let spec = self.profile.spectrum();
        let n = g.len() as i64;
        let mut top = 0.0f64;
        let mut all = 0.0f64;
        for (i, c) in spec.iter().enumerate() {
            let k = g.wavenumber(i).abs();
            all = all.max(c.norm());
            if k >= n / 4 {
                top = top.max(c.norm());
            }
        }
        if all == 0.0 { 0.0 } else { top / all }
    }

    /// Sidecar metadata for the wave CSV.
    pub fn sidecar(&self) -> WaveSidecar {
        WaveSidecar {
            length: self.grid().length(),
            nodes: self.grid().len(),
            omega: self.speed,
            a: self.constant,
            symbol: self.equation.symbol,
            nonlinearity: self.equation.nonlinearity,
            variant: self.equation.variant,
            residual_norm: self.residual_norm,
            constraint: self.constraint,
        }
    }

    /// Writes `<stem>.csv` (columns `x,u`) and `<stem>.json`.
    pub fn write_files(&self, dir: &Path, stem: &str) -> Result<()> {
        write_atomic(&dir.join(format!("{stem}.csv")), &self.profile.to_csv())?;
        write_atomic(&dir.join(format!("{stem}.json")), &to_json_string(&self.sidecar())?)
    }

    /// Reads a wave from its sidecar; the CSV is expected next to it with the
    /// same stem. The residual is recomputed.
    pub fn read_files(sidecar_path: &Path) -> Result<Self> {
        let meta: WaveSidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path)?)?;
        let csv = std::fs::read_to_string(sidecar_path.with_extension("csv"))?;
        let profile = Field::from_csv(&csv, meta.length)?;
        if profile.grid().len() != meta.nodes {
            return Err(Error::Parse(format!("sidecar says N = {}, CSV has {}", meta.nodes, profile.grid().len())));
        }
        let equation = Equation::new(meta.symbol, meta.nonlinearity, meta.variant);
        let residual_norm = equation.residual(&profile, meta.omega, meta.a).max_abs();
        Ok(Self { profile, speed: meta.omega, constant: meta.a, equation, constraint: meta.constraint, residual_norm })
    }
}

/// JSON sidecar of a wave file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveSidecar {
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "N")]
    pub nodes: usize,
    pub omega: f64,
    #[serde(rename = "A")]
    pub a: f64,
    pub symbol: DispersionSymbol,
    pub nonlinearity: Nonlinearity,
    #[serde(default)]
    pub variant: Variant,
    pub residual_norm: f64,
    pub constraint: Constraint,
}

/// Pointwise residual of the profile equation.
pub fn residual(w: &TravelingWave) -> Field {
    w.equation.residual(&w.profile, w.speed, w.constant)
}

/// Newton stopping rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 40 }
    }
}

/// Per-iteration record of a Newton solve.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NewtonTrace {
    /// Residual sup-norm before each update (last entry is the converged one).
    pub residuals: Vec<f64>,
    /// Sup-norm of each profile update.
    pub steps: Vec<f64>,
}

enum SpeedMode {
    Fixed(f64),
    /// Speed unknown, first cosine coefficient pinned.
    Pinned { amplitude: f64, guess: f64 },
}

struct EvenLayout {
    n: usize,
    half: usize,
}

impl EvenLayout {
    fn expand(&self, c: &[f64]) -> Vec<f64> {
        (0..self.n).map(|j| c[if j <= self.half { j } else { self.n - j }]).collect()
    }

    fn symmetrize(&self, v: &[f64]) -> Vec<f64> {
        (0..=self.half).map(|j| 0.5 * (v[j] + v[(self.n - j) % self.n])).collect()
    }

    /// Multiplicity of reduced unknown `j` on the full grid.
    fn weight(&self, j: usize) -> f64 {
        if j == 0 || j == self.half { 1.0 } else { 2.0 }
    }
}

fn amplitude_of(values: &[f64]) -> f64 {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    hi - lo
}

fn newton_core(
    guess: &Field,
    speed: SpeedMode,
    constraint: Constraint,
    eq: &Equation,
    opts: SolveOptions,
) -> Result<(TravelingWave, NewtonTrace)> {
    if !(opts.tol > 0.0) {
        return Err(Error::Usage("tolerance must be positive".into()));
    }
    let grid = *guess.grid();
    let layout = EvenLayout { n: grid.len(), half: grid.len() / 2 };
    let mut c = layout.symmetrize(guess.values());
    let scale = c.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if amplitude_of(&c) <= 1e-12 * scale {
        return Err(Error::DegenerateBranch { amplitude: amplitude_of(&c) });
    }

    let mean_target = constraint.target_average();
    let (mut omega, pinned) = match speed {
        SpeedMode::Fixed(w) => (w, None),
        SpeedMode::Pinned { amplitude, guess } => (guess, Some(amplitude)),
    };
    let nl = eq.nonlinearity;
    let mut a = match constraint {
        Constraint::FixedA { a } => a,
        _ => {
            let phi = layout.expand(&c);
            let (_, c0) = eq.profile_coefficients(omega);
            -phi.iter().map(|&p| c0 * p - nl.value(p)).sum::<f64>() / phi.len() as f64
        }
    };

    let mmat = multiplier_matrix(&eq.symbol, &grid);
    let m = layout.half + 1;
    let extra_a = mean_target.is_some() as usize;
    let extra_w = pinned.is_some() as usize;
    let dim = m + extra_a + extra_w;
    let cos1: Vec<f64> = (0..=layout.half)
        .map(|j| layout.weight(j) * (2.0 * PI * j as f64 / layout.n as f64).cos() * 2.0 / layout.n as f64)
        .collect();

    let mut trace = NewtonTrace::default();
    for iter in 0..=opts.max_iter {
        let phi = Field::new(grid, layout.expand(&c))?;
        let r = eq.residual(&phi, omega, a);
        let rnorm = r.max_abs();
        if !rnorm.is_finite() {
            return Err(Error::Convergence { iterations: iter, residual: rnorm });
        }
        let mean_defect = mean_target.map(|t| phi.average() - t).unwrap_or(0.0);
        let pin_defect = pinned.map(|amp| c.iter().zip(&cos1).map(|(x, w)| x * w).sum::<f64>() - amp).unwrap_or(0.0);
        trace.residuals.push(rnorm);
        if rnorm <= opts.tol && mean_defect.abs() <= 1e-14 * (1.0 + scale) && pin_defect.abs() <= 1e-13 * (1.0 + scale) {
            if amplitude_of(phi.values()) <= 1e-8 * phi.max_abs().max(1.0) {
                return Err(Error::DegenerateBranch { amplitude: amplitude_of(phi.values()) });
            }
            let wave = TravelingWave { profile: phi, speed: omega, constant: a, equation: *eq, constraint, residual_norm: rnorm };
            return Ok((wave, trace));
        }
        if iter == opts.max_iter {
            break;
        }

        let (cm, c0) = eq.profile_coefficients(omega);
        let diag: Vec<f64> = phi.values().iter().map(|&p| c0 - nl.derivative(p)).collect();
        let mut jac = DMatrix::<f64>::zeros(dim, dim);
        for i in 0..m {
            for j in 0..m {
                let mut v = cm * mmat[(i, j)] + if i == j { diag[i] } else { 0.0 };
                if j != 0 && j != layout.half {
                    let jj = layout.n - j;
                    v += cm * mmat[(i, jj)] + if i == jj { diag[i] } else { 0.0 };
                }
                jac[(i, j)] = v;
            }
        }
        let mut rhs = DVector::<f64>::zeros(dim);
        for i in 0..m {
            rhs[i] = -r.values()[i];
        }
        let mut row = m;
        if extra_a == 1 {
            for i in 0..m {
                jac[(i, m)] = 1.0;
            }
            for j in 0..m {
                jac[(row, j)] = layout.weight(j) / layout.n as f64;
            }
            rhs[row] = -mean_defect;
            row += 1;
        }
        if extra_w == 1 {
            let forcing = eq.speed_forcing(&phi);
            let col = dim - 1;
            for i in 0..m {
                jac[(i, col)] = forcing.values()[i];
            }
            for j in 0..m {
                jac[(row, j)] = cos1[j];
            }
            rhs[row] = -pin_defect;
        }

        let lu = jac.full_piv_lu();
        let u = lu.u();
        let dmax = (0..dim).map(|i| u[(i, i)].abs()).fold(0.0, f64::max);
        let dmin = (0..dim).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min);
        if !(dmin > 1e-13 * dmax) {
            return Err(Error::Bifurcation { omega });
        }
        let delta = lu.solve(&rhs).ok_or(Error::Bifurcation { omega })?;
        let step = (0..m).map(|i| delta[i].abs()).fold(0.0, f64::max);
        trace.steps.push(step);
        for i in 0..m {
            c[i] += delta[i];
        }
        if extra_a == 1 {
            a += delta[m];
        }
        if extra_w == 1 {
            omega += delta[dim - 1];
        }
    }
    Err(Error::Convergence { iterations: opts.max_iter, residual: *trace.residuals.last().unwrap_or(&f64::NAN) })
}

/// Newton iteration for the profile equation at speed `omega` on the even
/// (cosine) subspace.
pub fn solve_newton(
    guess: &Field,
    omega: f64,
    constraint: Constraint,
    eq: &Equation,
    opts: SolveOptions,
) -> Result<TravelingWave> {
    solve_newton_traced(guess, omega, constraint, eq, opts).map(|(w, _)| w)
}

/// [`solve_newton`] returning the iteration history as well.
pub fn solve_newton_traced(
    guess: &Field,
    omega: f64,
    constraint: Constraint,
    eq: &Equation,
    opts: SolveOptions,
) -> Result<(TravelingWave, NewtonTrace)> {
    newton_core(guess, SpeedMode::Fixed(omega), constraint, eq, opts)
}

/// Solves with the speed as an unknown and the first cosine coefficient of the
/// profile pinned to `amplitude`; used to seed branches near a bifurcation
/// where the speed barely moves with amplitude.
pub fn solve_pinned_amplitude(
    guess: &Field,
    amplitude: f64,
    omega_guess: f64,
    constraint: Constraint,
    eq: &Equation,
    opts: SolveOptions,
) -> Result<TravelingWave> {
    newton_core(guess, SpeedMode::Pinned { amplitude, guess: omega_guess }, constraint, eq, opts).map(|(w, _)| w)
}

/// Closed-form zero-mean KdV wave `beta (dn^2(2K x / L, k) - E/K)`.
pub fn cnoidal_wave(length: f64, k: EllipticModulus, n: usize) -> Result<TravelingWave> {
    if !(k.k() > 0.0) {
        return Err(Error::Domain("cnoidal wave needs 0 < k < 1".into()));
    }
    let grid = PeriodicGrid::new(length, n)?;
    let (kk, ee) = (k.big_k(), k.big_e());
    let ratio = ee / kk;
    let lambda = 2.0 * kk / length;
    let l2 = lambda * lambda;
    let beta = 12.0 * l2;
    let k2 = k.k() * k.k();
    let omega = 4.0 * (2.0 - k2) * l2 - 12.0 * l2 * ratio;
    let kp2 = (1.0 - k.k()) * (1.0 + k.k());
    let a = -2.0 * kp2 * beta * l2 + omega * beta * ratio + 0.5 * beta * beta * ratio * ratio;
    let profile = Field::from_fn(grid, |x| {
        let dn = jacobi_sn_cn_dn(lambda * x, k).2;
        beta * (dn * dn - ratio)
    });
    let eq = Equation::new(DispersionSymbol::second_derivative(length), Nonlinearity::kdv(), Variant::Standard);
    TravelingWave::certified(profile, omega, a, eq, Constraint::ZeroMean, CNOIDAL_TOL)
}

/// Cosine coefficients `c_n`, `n >= 1`, of the zero-mean ILW profile.
pub fn ilw_cosine_coefficients(length: f64, delta: f64, k: EllipticModulus, n_max: usize) -> Result<Vec<f64>> {
    let q = k.nome();
    let alpha = 2.0 * PI * delta / length;
    if !(q.ln() + alpha < 0.0) {
        return Err(Error::Domain(format!(
            "ILW series diverges: need delta < L K'/(2K) (delta = {delta}, L = {length}, k = {})",
            k.k()
        )));
    }
    let b = zeta_fourier_coefficients(k, n_max)?;
    let kk = k.big_k();
    let lq = q.ln();
    Ok(b
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let n = (i + 1) as f64;
            // (2 pi / K) q^n sinh(n alpha) / (1 - q^{2n}) without overflow
            let num = 0.5 * ((n * (lq + alpha)).exp() - (n * (lq - alpha)).exp());
            (4.0 * kk / length) * (2.0 * PI / kk) * num / (1.0 - (2.0 * n * lq).exp())
        })
        .collect())
}

/// Closed-form zero-mean ILW wave; the speed is the least-squares minimizer
/// of the profile residual with `A = (1/L) int phi^2`.
pub fn ilw_wave(length: f64, delta: f64, k: EllipticModulus, n: usize) -> Result<TravelingWave> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("ILW depth must be positive, got {delta}")));
    }
    if !(k.k() > 0.0) {
        return Err(Error::Domain("ILW wave needs 0 < k < 1".into()));
    }
    let grid = PeriodicGrid::new(length, n)?;
    let half = n / 2;
    let coeffs = ilw_cosine_coefficients(length, delta, k, half + 8)?;
    let tail = coeffs[half - 1..].iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if tail > 1e-12 {
        return Err(Error::Resolution(format!("ILW series tail {tail:.2e} beyond N/2 = {half}")));
    }
    let mut spec = vec![Complex64::new(0.0, 0.0); n];
    for (i, &c) in coeffs.iter().take(half - 1).enumerate() {
        spec[i + 1] = Complex64::new(0.5 * c, 0.0);
        spec[n - i - 1] = Complex64::new(0.5 * c, 0.0);
    }
    let profile = Field::from_spectrum(grid, &spec)?;
    let symbol = DispersionSymbol::new(SymbolKind::Ilw { delta }, length)?;
    let eq = Equation::new(symbol, Nonlinearity::QuadraticIlw, Variant::Standard);
    let a = profile.map(|p| p * p).average();
    let base = eq.residual(&profile, 0.0, a);
    let omega = -base.inner(&profile)? / profile.inner(&profile)?;
    TravelingWave::certified(profile, omega, a, eq, Constraint::ZeroMean, ILW_TOL)
}

/// Parameter along which a family is continued.
#[derive(Clone)]
pub enum Sweep {
    /// Values are speeds; the family constraint applies to every member.
    Speed,
    /// Values are `A` at the seed's speed.
    Constant,
    /// Values are `xi` with `(omega, A) = map(xi)`, solved with fixed `A`.
    Curve(Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>),
}

impl std::fmt::Debug for Sweep {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Sweep::Speed => write!(f, "Speed"),
            Sweep::Constant => write!(f, "Constant"),
            Sweep::Curve(_) => write!(f, "Curve(..)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyMember {
    pub parameter: f64,
    pub wave: TravelingWave,
}

/// Ordered waves along a one-parameter path.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFamily {
    pub members: Vec<FamilyMember>,
    pub constraint: Constraint,
}

impl WaveFamily {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Largest sup-norm difference between consecutive profiles.
    pub fn max_jump(&self) -> f64 {
        self.members
            .windows(2)
            .map(|w| w[1].wave.profile.sub(&w[0].wave.profile).map(|d| d.max_abs()).unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max)
    }
}

/// Natural-parameter continuation; stops at the first failing member and
/// returns what was computed so far together with the error.
pub fn continue_family_partial(
    seed: &TravelingWave,
    sweep: &Sweep,
    values: &[f64],
    constraint: Constraint,
    opts: SolveOptions,
) -> (WaveFamily, Option<Error>) {
    let mut members: Vec<FamilyMember> = Vec::with_capacity(values.len());
    for &p in values {
        let guess = match members.len() {
            0 => seed.profile.clone(),
            1 => members[0].wave.profile.clone(),
            len => {
                let (a, b) = (&members[len - 2], &members[len - 1]);
                let t = if b.parameter != a.parameter { (p - b.parameter) / (b.parameter - a.parameter) } else { 0.0 };
                b.wave.profile.add_scaled(t, &b.wave.profile.sub(&a.wave.profile).expect("same grid")).expect("same grid")
            }
        };
        let solved = match sweep {
            // the seed itself already solves the first point
            Sweep::Speed if members.is_empty() && p == seed.speed && constraint == seed.constraint => Ok(seed.clone()),
            Sweep::Speed => solve_newton(&guess, p, constraint, &seed.equation, opts),
            Sweep::Constant => solve_newton(&guess, seed.speed, Constraint::FixedA { a: p }, &seed.equation, opts),
            Sweep::Curve(map) => {
                let (w, a) = map(p);
                solve_newton(&guess, w, Constraint::FixedA { a }, &seed.equation, opts)
            }
        };
        match solved {
            Ok(wave) => members.push(FamilyMember { parameter: p, wave }),
            Err(e) => {
                return (
                    WaveFamily { members, constraint },
                    Some(Error::Continuation { parameter: p, source: Box::new(e) }),
                )
            }
        }
    }
    (WaveFamily { members, constraint }, None)
}

/// Natural-parameter continuation: each solve seeds the next.
pub fn continue_family(
    seed: &TravelingWave,
    sweep: &Sweep,
    values: &[f64],
    constraint: Constraint,
    opts: SolveOptions,
) -> Result<WaveFamily> {
    match continue_family_partial(seed, sweep, values, constraint, opts) {
        (family, None) => Ok(family),
        (_, Some(e)) => Err(e),
    }
}

/// `eta = d phi / d omega` and `beta = d phi / d A` from `L eta = -phi`
/// (regularized: `-(M phi + phi)`) and `L beta = -1` on the complement of the
/// kernel.
pub fn param_derivatives(w: &TravelingWave, lin: &LinearizedOperator) -> Result<(Field, Field)> {
    lin.check_invertible_on_complement()?;
    let forcing = w.equation.speed_forcing(&w.profile);
    let eta = lin.solve_on_complement(&forcing.scaled(-1.0))?;
    let beta = lin.solve_on_complement(&Field::constant(*w.grid(), -1.0))?;
    Ok((eta, beta))
}

/// `eta` and `beta` by central differences of re-solved fixed-`A` neighbours.
pub fn param_derivatives_fd(w: &TravelingWave, rel_step: f64, opts: SolveOptions) -> Result<(Field, Field)> {
    let h = rel_step * w.speed.abs().max(1.0);
    let fixed = Constraint::FixedA { a: w.constant };
    let plus = solve_newton(&w.profile, w.speed + h, fixed, &w.equation, opts)?;
    let minus = solve_newton(&w.profile, w.speed - h, fixed, &w.equation, opts)?;
    let eta = plus.profile.sub(&minus.profile)?.scaled(0.5 / h);
    let ha = rel_step * w.constant.abs().max(1.0);
    let plus = solve_newton(&w.profile, w.speed, Constraint::FixedA { a: w.constant + ha }, &w.equation, opts)?;
    let minus = solve_newton(&w.profile, w.speed, Constraint::FixedA { a: w.constant - ha }, &w.equation, opts)?;
    let beta = plus.profile.sub(&minus.profile)?.scaled(0.5 / ha);
    Ok((eta, beta))
}

/// Regularized wave from a standard one with a quadratic flux: if
/// `M psi + w psi - f(psi) + a = 0` then `phi = psi / (1 - w)` solves
/// `omega M phi + (omega - 1) phi - f(phi) + A = 0` with `omega = 1 / (1 - w)`
/// and `A = a omega^2`.
pub fn regularized_from_standard(w: &TravelingWave) -> Result<TravelingWave> {
    if w.equation.variant != Variant::Standard || w.equation.nonlinearity.degree() != 2 {
        return Err(Error::Usage("rescaling needs a standard wave with a quadratic flux".into()));
    }
    if !(w.speed < 1.0) {
        return Err(Error::Domain(format!("rescaling needs speed < 1, got {}", w.speed)));
    }
    let omega = 1.0 / (1.0 - w.speed);
    let mut equation = w.equation;
    equation.variant = Variant::Regularized;
    let constraint = match w.constraint {
        Constraint::FixedA { a } => Constraint::FixedA { a: a * omega * omega },
        Constraint::FixedMean { mean } => Constraint::FixedMean { mean: mean * omega },
        Constraint::ZeroMean => Constraint::ZeroMean,
    };
    let tol = 10.0 * omega * omega * w.residual_norm.max(1e-14);
    TravelingWave::certified(w.profile.scaled(omega), omega, w.constant * omega * omega, equation, constraint, tol)
}

/// Speed at which the first cosine mode bifurcates from the zero state, where
/// `cm(omega) theta(1) + c0(omega) = 0`.
pub fn bifurcation_speed(eq: &Equation, length: f64) -> Result<f64> {
    let theta = eq.symbol.value(1, length);
    let at = |w: f64| {
        let (cm, c0) = eq.profile_coefficients(w);
        cm * theta + c0
    };
    let (g0, g1) = (at(0.0), at(1.0));
    if g1 == g0 {
        return Err(Error::Domain("linearization at zero does not depend on the speed".into()));
    }
    Ok(g0 / (g0 - g1))
}

/// Zero-mean wave of first-mode amplitude `amplitude`, reached from the
/// bifurcation point in `steps` pinned-amplitude solves and then re-solved at
/// the final speed.
pub fn branch_from_bifurcation(
    eq: &Equation,
    grid: PeriodicGrid,
    amplitude: f64,
    steps: usize,
    opts: SolveOptions,
) -> Result<TravelingWave> {
    if steps == 0 || !(amplitude.is_finite() && amplitude != 0.0) {
        return Err(Error::Usage(format!("need steps >= 1 and a nonzero amplitude, got {steps}, {amplitude}")));
    }
    let mut guess = cosine_guess(grid, 0.0, amplitude / steps as f64);
    let mut omega = bifurcation_speed(eq, grid.length())?;
    for i in 1..=steps {
        let a = amplitude * i as f64 / steps as f64;
        let w = solve_pinned_amplitude(&guess, a, omega, Constraint::ZeroMean, eq, opts)?;
        omega = w.speed;
        guess = w.profile;
    }
    solve_newton(&guess, omega, Constraint::ZeroMean, eq, opts)
}

/// Even random-free guess `base + amplitude cos(2 pi x / L)`.
pub fn cosine_guess(grid: PeriodicGrid, base: f64, amplitude: f64) -> Field {
    let c = 2.0 * PI / grid.length();
    Field::from_fn(grid, |x| base + amplitude * (c * x).cos())
}
