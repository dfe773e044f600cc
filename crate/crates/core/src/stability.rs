//! Stability criteria for a solved wave: surface derivatives of mass and
//! momentum, the quadratic form `Delta`, the verdict with its precedence
//! rules, the index count for the unstable case, the mean and curve
//! criteria, and the spectrum of the Hamiltonian linearization `d/dx L`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linop::{assemble, check_h0, constrained_min_rayleigh, h1_constants, H1Constants, LinearizedOperator, SpectralReport};
use crate::spectral::{derivative_matrix, verify_symbol_bounds, Field, SymbolBoundsReport};
use crate::waves::{param_derivatives, param_derivatives_fd, SolveOptions, TravelingWave, Variant, WaveFamily};

/// Derivatives of `M` and `F` along the `(omega, A)` wave surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceDerivatives {
    #[serde(rename = "M_omega")]
    pub m_omega: f64,
    #[serde(rename = "M_A")]
    pub m_a: f64,
    #[serde(rename = "F_omega")]
    pub f_omega: f64,
    #[serde(rename = "F_A")]
    pub f_a: f64,
}

impl SurfaceDerivatives {
    pub fn new(m_omega: f64, m_a: f64, f_omega: f64, f_a: f64) -> Self {
        Self { m_omega, m_a, f_omega, f_a }
    }

    /// `M_omega^2 - F_omega M_A`.
    pub fn det_condition(&self) -> f64 {
        self.m_omega * self.m_omega - self.f_omega * self.m_a
    }

    /// `|F_A - M_omega| / (1 + |M_omega|)`.
    pub fn symmetry_defect(&self) -> f64 {
        (self.f_a - self.m_omega).abs() / (1.0 + self.m_omega.abs())
    }

    /// Largest relative deviation of `(M_omega, M_A, F_omega)` from `other`.
    /// Entries below `1e-6` of the largest reference entry (zero by symmetry,
    /// e.g. for odd fluxes) are measured against that floor.
    pub fn max_relative_deviation(&self, other: &SurfaceDerivatives) -> f64 {
        let floor = 1e-6 * other.m_omega.abs().max(other.m_a.abs()).max(other.f_omega.abs());
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(floor).max(1e-300);
        rel(self.m_omega, other.m_omega).max(rel(self.m_a, other.m_a)).max(rel(self.f_omega, other.f_omega))
    }
}

/// `phi` for the standard variant, `M phi + phi` for the regularized one.
fn momentum_density(w: &TravelingWave) -> Field {
    w.equation.speed_forcing(&w.profile)
}

/// Surface derivatives from `eta = d phi / d omega` and `beta = d phi / d A`.
pub fn surface_derivatives(w: &TravelingWave, eta: &Field, beta: &Field) -> Result<SurfaceDerivatives> {
    let psi = momentum_density(w);
    Ok(SurfaceDerivatives {
        m_omega: eta.integral(),
        m_a: beta.integral(),
        f_omega: psi.inner(eta)?,
        f_a: psi.inner(beta)?,
    })
}

/// Surface derivatives through the linear solves for `eta` and `beta`.
pub fn compute_surface_derivatives(w: &TravelingWave, lin: &LinearizedOperator) -> Result<SurfaceDerivatives> {
    let (eta, beta) = param_derivatives(w, lin)?;
    surface_derivatives(w, &eta, &beta)
}

/// Surface derivatives through re-solved neighbouring waves.
pub fn fd_surface_derivatives(w: &TravelingWave, rel_step: f64, opts: SolveOptions) -> Result<SurfaceDerivatives> {
    let (eta, beta) = param_derivatives_fd(w, rel_step, opts)?;
    surface_derivatives(w, &eta, &beta)
}

/// Resolvent forms `-(L^{-1} 1, 1)`, `-(L^{-1} psi, 1)`, `-(L^{-1} psi, psi)`
/// compared with given surface derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventReport {
    #[serde(rename = "M_A")]
    pub m_a: f64,
    #[serde(rename = "M_omega")]
    pub m_omega: f64,
    #[serde(rename = "F_omega")]
    pub f_omega: f64,
    /// `(L^{-1} 1, 1)`.
    pub inverse_one_one: f64,
    pub max_relative_deviation: f64,
}

pub fn resolvent_consistency(
    w: &TravelingWave,
    lin: &LinearizedOperator,
    sd: &SurfaceDerivatives,
) -> Result<ResolventReport> {
    let one = Field::constant(*w.grid(), 1.0);
    let psi = momentum_density(w);
    let l_one = lin.solve_on_complement(&one)?;
    let l_psi = lin.solve_on_complement(&psi)?;
    let inverse_one_one = l_one.inner(&one)?;
    let forms = SurfaceDerivatives {
        m_a: -inverse_one_one,
        m_omega: -l_psi.inner(&one)?,
        f_omega: -l_psi.inner(&psi)?,
        f_a: -l_one.inner(&psi)?,
    };
    Ok(ResolventReport {
        m_a: forms.m_a,
        m_omega: forms.m_omega,
        f_omega: forms.f_omega,
        inverse_one_one,
        max_relative_deviation: forms.max_relative_deviation(sd),
    })
}

/// `Delta(x, y) = x^2 M_A + x y (M_omega + F_A) + y^2 F_omega`.
pub fn delta_form(sd: &SurfaceDerivatives, x: f64, y: f64) -> f64 {
    x * x * sd.m_a + x * y * (sd.m_omega + sd.f_a) + y * y * sd.f_omega
}

/// Unit maximizer of `Delta` when its maximum is positive.
pub fn find_delta_witness(sd: &SurfaceDerivatives) -> Option<(f64, f64)> {
    let (a, b, c) = (sd.m_a, 0.5 * (sd.m_omega + sd.f_a), sd.f_omega);
    let mean = 0.5 * (a + c);
    let radius = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let top = mean + radius;
    if !(top > 0.0) {
        return None;
    }
    // eigenvector of [[a, b], [b, c]] for `top`, from the better-conditioned row
    let (x, y) = if (a - top).abs() + b.abs() >= (c - top).abs() + b.abs() { (b, top - a) } else { (top - c, b) };
    let norm = x.hypot(y);
    let (x, y) = if norm > 0.0 { (x / norm, y / norm) } else if a >= c { (1.0, 0.0) } else { (0.0, 1.0) };
    let (x, y) = if x < 0.0 || (x == 0.0 && y < 0.0) { (-x, -y) } else { (x, y) };
    (delta_form(sd, x, y) > 0.0).then_some((x, y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conclusion {
    OrbitallyStable,
    SpectrallyUnstable,
    Inconclusive,
}

/// Which sufficient condition established stability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FiredCriterion {
    #[serde(rename = "M_A")]
    MassA,
    #[serde(rename = "F_omega")]
    MomentumOmega,
    #[serde(rename = "det_condition")]
    Determinant,
    #[serde(rename = "delta_witness")]
    Witness,
}

/// Hypothesis checks feeding the verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prerequisites {
    pub h0_pass: bool,
    pub h1_pass: bool,
    /// Number of negative eigenvalues of `L`.
    pub n_neg: usize,
}

impl Prerequisites {
    pub fn from_reports(spectral: &SpectralReport, h1: &H1Constants) -> Self {
        Self { h0_pass: spectral.h0_pass, h1_pass: h1.pass, n_neg: spectral.n_neg }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriteriaValues {
    #[serde(rename = "M_A")]
    pub m_a: f64,
    #[serde(rename = "F_omega")]
    pub f_omega: f64,
    #[serde(rename = "M_omega")]
    pub m_omega: f64,
    #[serde(rename = "F_A")]
    pub f_a: f64,
    pub det_condition: f64,
    pub criterion_i: bool,
    pub criterion_ii: bool,
    pub criterion_iii: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub criteria: CriteriaValues,
    pub delta_witness: Option<(f64, f64)>,
    #[serde(rename = "D")]
    pub d: Option<f64>,
    #[serde(rename = "K_Ham")]
    pub k_ham: Option<i64>,
    pub k_r: Option<usize>,
    pub conclusion: Conclusion,
    pub fired_criterion: Option<FiredCriterion>,
    /// `(mu, nu)` of the auxiliary quantity `Q = mu M + nu F`.
    pub mu_nu: Option<(f64, f64)>,
    pub prerequisites: Prerequisites,
    pub reason: String,
}

fn negativity(s: f64) -> i64 {
    (s < 0.0) as i64
}

/// Verdict from surface derivatives and prerequisites alone.
pub fn classify(sd: &SurfaceDerivatives, prereq: Prerequisites) -> StabilityVerdict {
    let det = sd.det_condition();
    let criteria = CriteriaValues {
        m_a: sd.m_a,
        f_omega: sd.f_omega,
        m_omega: sd.m_omega,
        f_a: sd.f_a,
        det_condition: det,
        criterion_i: sd.m_a > 0.0,
        criterion_ii: sd.f_omega > 0.0,
        criterion_iii: det > 0.0,
    };
    let witness = find_delta_witness(sd);
    let d = (sd.m_a != 0.0).then(|| det / sd.m_a);
    let mut v = StabilityVerdict {
        criteria,
        delta_witness: witness,
        d,
        k_ham: None,
        k_r: None,
        conclusion: Conclusion::Inconclusive,
        fired_criterion: None,
        mu_nu: None,
        prerequisites: prereq,
        reason: String::new(),
    };
    if ![sd.m_a, sd.m_omega, sd.f_omega, sd.f_a].iter().all(|x| x.is_finite()) {
        v.reason = "surface derivatives are not finite".into();
        return v;
    }
    if !prereq.h0_pass || !prereq.h1_pass {
        v.reason = format!("prerequisites failed (h0_pass = {}, h1_pass = {})", prereq.h0_pass, prereq.h1_pass);
        return v;
    }
    let fired = if criteria.criterion_i {
        Some((FiredCriterion::MassA, (1.0, 0.0)))
    } else if criteria.criterion_ii {
        Some((FiredCriterion::MomentumOmega, (0.0, 1.0)))
    } else {
        witness.map(|w| (if criteria.criterion_iii { FiredCriterion::Determinant } else { FiredCriterion::Witness }, w))
    };
    if let Some((c, mu_nu)) = fired {
        v.conclusion = Conclusion::OrbitallyStable;
        v.fired_criterion = Some(c);
        v.mu_nu = Some(mu_nu);
        v.reason = "Delta is positive at the recorded (mu, nu)".into();
        return v;
    }
    let inverse_one_one = -sd.m_a;
    if inverse_one_one == 0.0 {
        v.reason = "(L^-1 1, 1) = 0: index count undefined".into();
        return v;
    }
    let premises = sd.m_a < 0.0 && sd.f_omega < 0.0 && det < 0.0 && prereq.n_neg == 1;
    if premises {
        let d = det / sd.m_a;
        let k = prereq.n_neg as i64 - negativity(inverse_one_one) - negativity(d);
        v.k_ham = Some(k);
        if k == 1 {
            v.conclusion = Conclusion::SpectrallyUnstable;
            v.reason = "K_Ham = 1 under M_A < 0, F_omega < 0, det < 0, n(L) = 1".into();
            return v;
        }
    }
    v.reason = "no criterion fired and the instability premises do not hold".into();
    v
}

/// Verdict for a wave: runs the hypothesis checks on `lin` and classifies.
pub fn verdict(w: &TravelingWave, lin: &LinearizedOperator, sd: &SurfaceDerivatives) -> StabilityVerdict {
    let spectral = check_h0(lin, w, None);
    let h1 = h1_constants(lin, &w.equation.symbol);
    classify(sd, Prerequisites::from_reports(&spectral, &h1))
}

/// `M(phi) - omega L` and whether it is positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCriterion {
    pub value: f64,
    pub fires: bool,
    pub mu_nu: (f64, f64),
}

/// Stability from `M(phi) > omega L`, valid for `f(v) = v^2 / 2`.
pub fn mean_criterion(w: &TravelingWave) -> Result<MeanCriterion> {
    if !w.equation.nonlinearity.is_half_square() || w.equation.variant != Variant::Standard {
        return Err(Error::NotApplicable(format!(
            "mean criterion needs f(v) = v^2/2 and the standard variant, got {}",
            w.equation.nonlinearity.name()
        )));
    }
    let value = w.profile.integral() - w.speed * w.grid().length();
    Ok(MeanCriterion { value, fires: value > 0.0, mu_nu: (w.speed, -1.0) })
}

/// `(L Phi, Phi)` at one interior family member.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub xi: f64,
    pub value: f64,
    /// `(dA/dxi, domega/dxi)`.
    pub mu_nu: (f64, f64),
}

/// Mass and momentum of a wave, with the variant's momentum.
pub fn mass_and_momentum(w: &TravelingWave) -> (f64, f64) {
    let m = w.profile.integral();
    let psi = momentum_density(w);
    (m, 0.5 * psi.inner(&w.profile).unwrap_or(f64::NAN))
}

/// `-A' M(phi)' - omega' F(phi)'` by central differences at interior members.
pub fn curve_criterion(fam: &WaveFamily) -> Result<Vec<CurvePoint>> {
    if fam.members.len() < 3 {
        return Err(Error::Usage("curve criterion needs at least three family members".into()));
    }
    let data: Vec<(f64, f64, f64, f64, f64)> = fam
        .members
        .iter()
        .map(|m| {
            let (mass, mom) = mass_and_momentum(&m.wave);
            (m.parameter, m.wave.speed, m.wave.constant, mass, mom)
        })
        .collect();
    let mut out = Vec::with_capacity(data.len() - 2);
    for i in 1..data.len() - 1 {
        let (x0, w0, a0, m0, f0) = data[i - 1];
        let (x2, w2, a2, m2, f2) = data[i + 1];
        let h = x2 - x0;
        if h == 0.0 {
            return Err(Error::Usage("repeated family parameter".into()));
        }
        let (da, dw, dm, df) = ((a2 - a0) / h, (w2 - w0) / h, (m2 - m0) / h, (f2 - f0) / h);
        out.push(CurvePoint { xi: data[i].0, value: -da * dm - dw * df, mu_nu: (da, dw) });
    }
    Ok(out)
}

/// Eigenvalues of `d/dx L` with the classification counts.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSpectrum {
    pub eigenvalues: Vec<Complex64>,
    /// Real eigenvalues in the open right half plane.
    pub k_r: usize,
    pub max_real_part: f64,
    /// Largest distance from `-lambda` and `conj(lambda)` to the spectrum,
    /// relative to the matrix norm.
    pub quadruple_defect: f64,
    pub re_tol: f64,
    pub im_tol: f64,
    pub norm: f64,
}

/// JSON view of [`HamiltonianSpectrum`] without the eigenvalue list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSummary {
    pub k_r: usize,
    pub max_real_part: f64,
    pub quadruple_defect: f64,
    pub re_tol: f64,
    pub im_tol: f64,
}

impl HamiltonianSpectrum {
    pub fn summary(&self) -> HamiltonianSummary {
        HamiltonianSummary {
            k_r: self.k_r,
            max_real_part: self.max_real_part,
            quadruple_defect: self.quadruple_defect,
            re_tol: self.re_tol,
            im_tol: self.im_tol,
        }
    }
}

fn nearest(target: Complex64, set: &[Complex64]) -> f64 {
    set.iter().map(|z| (z - target).norm()).fold(f64::INFINITY, f64::min)
}

/// Spectrum of `d/dx L`; tolerances are relative to the norm of that matrix.
pub fn hamiltonian_spectrum(lin: &LinearizedOperator, re_tol_rel: f64, im_tol_rel: f64) -> Result<HamiltonianSpectrum> {
    if lin.variant() != Variant::Standard {
        return Err(Error::NotApplicable("Hamiltonian spectrum is implemented for the standard variant".into()));
    }
    let j: DMatrix<f64> = derivative_matrix(lin.grid()) * lin.matrix();
    let norm = j.row_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    let eigenvalues: Vec<Complex64> = j.complex_eigenvalues().iter().map(|z| Complex64::new(z.re, z.im)).collect();
    let (re_tol, im_tol) = (re_tol_rel * norm, im_tol_rel * norm);
    let k_r = eigenvalues.iter().filter(|z| z.re > re_tol && z.im.abs() < im_tol).count();
    let max_real_part = eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let quadruple_defect = eigenvalues
        .iter()
        .map(|&z| nearest(-z, &eigenvalues).max(nearest(z.conj(), &eigenvalues)))
        .fold(0.0, f64::max)
        / norm.max(f64::MIN_POSITIVE);
    Ok(HamiltonianSpectrum { eigenvalues, k_r, max_real_part, quadruple_defect, re_tol, im_tol, norm })
}

/// Knobs of the full certification pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    pub zero_tol: Option<f64>,
    pub re_tol: f64,
    pub im_tol: f64,
    /// Relative step of the finite-difference cross-check; `None` skips it.
    pub fd_step: Option<f64>,
    pub hamiltonian: bool,
    pub solve: SolveOptions,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self { zero_tol: None, re_tol: 1e-6, im_tol: 1e-6, fd_step: Some(1e-4), hamiltonian: true, solve: SolveOptions::default() }
    }
}

/// Constrained Rayleigh minimum on `{phi', Q'(phi)}^perp`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct H2Certificate {
    pub c3: f64,
    pub mu_nu: (f64, f64),
}

/// `Q'(phi) = mu + nu psi` with `psi` the momentum density, and the least
/// Rayleigh quotient orthogonal to it and to `phi'`.
pub fn h2_certificate(w: &TravelingWave, lin: &LinearizedOperator, mu: f64, nu: f64) -> Result<H2Certificate> {
    let q = momentum_density(w).scaled(nu).add_scaled(mu, &Field::constant(*w.grid(), 1.0))?;
    let (c3, _) = constrained_min_rayleigh(lin, &[w.translation_mode(), q])?;
    Ok(H2Certificate { c3, mu_nu: (mu, nu) })
}

/// Everything computed for one wave.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certification {
    pub residual_norm: f64,
    pub symbol_bounds: SymbolBoundsReport,
    pub spectral: SpectralReport,
    pub h1: H1Constants,
    pub surface: Option<SurfaceDerivatives>,
    pub resolvent: Option<ResolventReport>,
    pub finite_difference: Option<SurfaceDerivatives>,
    pub fd_relative_deviation: Option<f64>,
    pub h2: Option<H2Certificate>,
    pub hamiltonian: Option<HamiltonianSummary>,
    pub mean_criterion: Option<MeanCriterion>,
    pub verdict: StabilityVerdict,
}

/// Assembly, hypothesis checks, surface derivatives, cross-checks and verdict.
pub fn certify(w: &TravelingWave, opts: &CertifyOptions) -> Certification {
    let mut lin = assemble(w, None);
    if let Some(t) = opts.zero_tol {
        lin = lin.with_zero_tol(t);
    }
    let spectral = check_h0(&lin, w, opts.zero_tol);
    let h1 = h1_constants(&lin, &w.equation.symbol);
    let prereq = Prerequisites::from_reports(&spectral, &h1);
    let surface = compute_surface_derivatives(w, &lin);
    let mut verdict = match &surface {
        Ok(sd) => classify(sd, prereq),
        Err(e) => {
            let nan = SurfaceDerivatives::new(f64::NAN, f64::NAN, f64::NAN, f64::NAN);
            let mut v = classify(&nan, prereq);
            v.reason = format!("surface derivatives unavailable: {e}");
            v
        }
    };
    let surface = surface.ok();
    let resolvent = surface.as_ref().and_then(|sd| resolvent_consistency(w, &lin, sd).ok());
    let finite_difference = opts.fd_step.and_then(|h| fd_surface_derivatives(w, h, opts.solve).ok());
    let fd_relative_deviation = match (&surface, &finite_difference) {
        (Some(a), Some(b)) => Some(a.max_relative_deviation(b)),
        _ => None,
    };
    let h2 = verdict.mu_nu.and_then(|(mu, nu)| h2_certificate(w, &lin, mu, nu).ok());
    let hamiltonian = if opts.hamiltonian && w.equation.variant == Variant::Standard {
        hamiltonian_spectrum(&lin, opts.re_tol, opts.im_tol).ok().map(|h| h.summary())
    } else {
        None
    };
    verdict.k_r = hamiltonian.map(|h| h.k_r);
    Certification {
        residual_norm: w.residual_norm,
        symbol_bounds: verify_symbol_bounds(&w.equation.symbol, w.grid()),
        spectral,
        h1,
        surface,
        resolvent,
        finite_difference,
        fd_relative_deviation,
        h2,
        hamiltonian,
        mean_criterion: mean_criterion(w).ok(),
        verdict,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::EllipticModulus;
    use crate::spectral::{DispersionSymbol, PeriodicGrid};
    use crate::waves::{cnoidal_wave, continue_family, ilw_wave, Constraint, Equation, Nonlinearity, Sweep};
    use std::f64::consts::PI;

    fn ok_prereq() -> Prerequisites {
        Prerequisites { h0_pass: true, h1_pass: true, n_neg: 1 }
    }

    fn constant_wave(c: f64, omega: f64) -> TravelingWave {
        let l = 2.0 * PI;
        let g = PeriodicGrid::new(l, 32).unwrap();
        let eq = Equation::new(DispersionSymbol::second_derivative(l), Nonlinearity::kdv(), Variant::Standard);
        TravelingWave {
            profile: Field::constant(g, c),
            speed: omega,
            constant: eq.nonlinearity.value(c) - omega * c,
            equation: eq,
            constraint: Constraint::FixedA { a: 0.0 },
            residual_norm: 0.0,
        }
    }

    #[test]
    fn delta_form_special_points() {
        let sd = SurfaceDerivatives::new(0.3, -2.0, 1.5, 0.3);
        assert_eq!(delta_form(&sd, 1.0, 0.0), sd.m_a);
        assert_eq!(delta_form(&sd, 0.0, 1.0), sd.f_omega);
        let (x, y) = (0.7, -1.1);
        let sym = x * x * sd.m_a + 2.0 * x * y * sd.m_omega + y * y * sd.f_omega;
        assert!((delta_form(&sd, x, y) - sym).abs() < 1e-15);
        for t in [-3.0, 0.5, 2.0] {
            assert!((delta_form(&sd, t * x, t * y) - t * t * delta_form(&sd, x, y)).abs() < 1e-12);
        }
    }

    #[test]
    fn witness_cases() {
        let pos = SurfaceDerivatives::new(0.0, 1.0, -5.0, 0.0);
        let (a, b) = find_delta_witness(&pos).unwrap();
        assert!(delta_form(&pos, a, b) > 0.0);
        let indefinite = SurfaceDerivatives::new(2.0, -1.0, -1.0, 2.0);
        assert!(indefinite.det_condition() > 0.0);
        let (a, b) = find_delta_witness(&indefinite).unwrap();
        assert!(delta_form(&indefinite, a, b) > 0.0);
        assert!(find_delta_witness(&SurfaceDerivatives::new(0.0, -1.0, -1.0, 0.0)).is_none());
    }

    #[test]
    fn verdict_precedence() {
        let v = classify(&SurfaceDerivatives::new(0.0, 1.0, 1.0, 0.0), ok_prereq());
        assert_eq!(v.fired_criterion, Some(FiredCriterion::MassA));
        assert_eq!(v.mu_nu, Some((1.0, 0.0)));
        let v = classify(&SurfaceDerivatives::new(0.0, -1.0, 1.0, 0.0), ok_prereq());
        assert_eq!(v.fired_criterion, Some(FiredCriterion::MomentumOmega));
        assert_eq!(v.mu_nu, Some((0.0, 1.0)));
        let v = classify(&SurfaceDerivatives::new(2.0, -1.0, -1.0, 2.0), ok_prereq());
        assert_eq!(v.fired_criterion, Some(FiredCriterion::Determinant));
        assert_eq!(v.conclusion, Conclusion::OrbitallyStable);
        let failed = Prerequisites { h0_pass: false, ..ok_prereq() };
        let v = classify(&SurfaceDerivatives::new(0.0, 1.0, 1.0, 0.0), failed);
        assert_eq!(v.conclusion, Conclusion::Inconclusive);
    }

    #[test]
    fn index_count_in_unstable_case() {
        let v = classify(&SurfaceDerivatives::new(0.0, -1.0, -1.0, 0.0), ok_prereq());
        assert_eq!(v.d, Some(1.0));
        assert_eq!(v.k_ham, Some(1));
        assert_eq!(v.conclusion, Conclusion::SpectrallyUnstable);
        let two_neg = Prerequisites { n_neg: 2, ..ok_prereq() };
        let v = classify(&SurfaceDerivatives::new(0.0, -1.0, -1.0, 0.0), two_neg);
        assert_eq!(v.conclusion, Conclusion::Inconclusive);
        assert!(v.k_ham.is_none());
        let v = classify(&SurfaceDerivatives::new(0.0, 0.0, -1.0, 0.0), ok_prereq());
        assert_eq!(v.conclusion, Conclusion::Inconclusive);
    }

    #[test]
    fn constant_state_surface_derivatives() {
        let (c, omega) = (0.4, 1.5);
        let w = constant_wave(c, omega);
        let lin = assemble(&w, None);
        let sd = compute_surface_derivatives(&w, &lin).unwrap();
        let l = 2.0 * PI;
        let den = omega - c;
        assert!((sd.m_a + l / den).abs() < 1e-10);
        assert!((sd.m_omega + c * l / den).abs() < 1e-10);
        assert!((sd.f_a + c * l / den).abs() < 1e-10);
        assert!((sd.f_omega + c * c * l / den).abs() < 1e-10);
        let r = resolvent_consistency(&w, &lin, &sd).unwrap();
        assert!(r.max_relative_deviation < 1e-10);
        let h = hamiltonian_spectrum(&lin, 1e-6, 1e-6).unwrap();
        assert_eq!(h.k_r, 0);
        assert!(h.eigenvalues.iter().all(|z| z.re.abs() < 1e-10));
    }

    #[test]
    fn cnoidal_is_certified_stable() {
        let w = cnoidal_wave(2.0 * PI, EllipticModulus::new(0.6).unwrap(), 128).unwrap();
        let cert = certify(&w, &CertifyOptions::default());
        assert!(cert.spectral.h0_pass);
        let sd = cert.surface.unwrap();
        assert!(sd.symmetry_defect() < 1e-5);
        assert!(cert.resolvent.unwrap().max_relative_deviation < 1e-8);
        assert!(cert.fd_relative_deviation.unwrap() < 1e-4);
        assert_eq!(cert.verdict.conclusion, Conclusion::OrbitallyStable);
        assert!(cert.h2.unwrap().c3 > 0.0);
        let h = cert.hamiltonian.unwrap();
        assert_eq!(h.k_r, 0);
        assert!(h.quadruple_defect < 1e-6, "{}", h.quadruple_defect);
        let mc = cert.mean_criterion.unwrap();
        assert!(!mc.fires || w.speed < 0.0);
    }

    #[test]
    fn ilw_is_certified_stable() {
        let w = ilw_wave(2.0 * PI, 1.0, EllipticModulus::new(0.5).unwrap(), 128).unwrap();
        let cert = certify(&w, &CertifyOptions::default());
        assert_eq!(cert.verdict.conclusion, Conclusion::OrbitallyStable);
        assert!(cert.symbol_bounds.pass);
        assert!(cert.mean_criterion.is_none());
    }

    #[test]
    fn mean_criterion_cases() {
        let w = constant_wave(2.0, 1.0);
        let m = mean_criterion(&w).unwrap();
        assert!(m.fires);
        assert!((m.value - (2.0 - 1.0) * 2.0 * PI).abs() < 1e-12);
        let mut cubic = w.clone();
        cubic.equation.nonlinearity = Nonlinearity::gkdv(2);
        assert!(matches!(mean_criterion(&cubic), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn curve_criterion_on_cnoidal_family() {
        let seed = cnoidal_wave(2.0 * PI, EllipticModulus::new(0.6).unwrap(), 64).unwrap();
        let omegas: Vec<f64> = (0..6).map(|i| seed.speed + 0.02 * i as f64).collect();
        let fam = continue_family(&seed, &Sweep::Speed, &omegas, Constraint::ZeroMean, SolveOptions::default()).unwrap();
        let pts = curve_criterion(&fam).unwrap();
        assert_eq!(pts.len(), 4);
        for p in &pts {
            assert!(p.value < 0.0, "{p:?}");
        }
        let short = WaveFamily { members: fam.members[..2].to_vec(), constraint: fam.constraint };
        assert!(curve_criterion(&short).is_err());
    }
}
