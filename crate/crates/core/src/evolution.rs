//! Time integration of the standard and regularized equations in Fourier
//! space, conserved quantities, the Lyapunov function, orbital distance and
//! perturbation experiments.
//!
//! In Fourier variables both equations read `v_t = lambda v + g(v)` with
//!
//! * standard:    `lambda = i xi theta`, `g = -i xi f^`,
//! * regularized: `lambda = -i xi / (1 + theta)`, `g = -i xi f^ / (1 + theta)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linop::LinearizedOperator;
use crate::output::csv_table;
use crate::spectral::{forward_transform, inverse_transform, inverse_transform_complex, DispersionSymbol, Field, PeriodicGrid};
use crate::waves::{Equation, Nonlinearity, TravelingWave, Variant};

/// `int (u M u / 2 - W(u))`.
pub fn conserved_p(u: &Field, s: &DispersionSymbol, nl: &Nonlinearity) -> f64 {
    let mu = u.apply_multiplier(s);
    let h = u.grid().spacing();
    u.values().iter().zip(mu.values()).map(|(&a, &m)| 0.5 * a * m - nl.primitive(a)).sum::<f64>() * h
}

/// `int u^2 / 2`, or `int (u M u + u^2) / 2` for the regularized variant.
pub fn conserved_f(u: &Field, s: &DispersionSymbol, variant: Variant) -> f64 {
    let l2 = u.values().iter().map(|a| a * a).sum::<f64>() * u.grid().spacing();
    match variant {
        Variant::Standard => 0.5 * l2,
        Variant::Regularized => 0.5 * (l2 + u.inner(&u.apply_multiplier(s)).unwrap_or(f64::NAN)),
    }
}

/// `int u`.
pub fn conserved_m(u: &Field) -> f64 {
    u.integral()
}

/// `G = P + c F + A M` with `c = omega` (standard) or `omega - 1` (regularized).
pub fn constrained_energy_g(u: &Field, eq: &Equation, omega: f64, a: f64) -> f64 {
    let c = match eq.variant {
        Variant::Standard => omega,
        Variant::Regularized => omega - 1.0,
    };
    conserved_p(u, &eq.symbol, &eq.nonlinearity) + c * conserved_f(u, &eq.symbol, eq.variant) + a * conserved_m(u)
}

/// `Q = mu M + nu F`.
pub fn auxiliary_q(u: &Field, eq: &Equation, mu: f64, nu: f64) -> f64 {
    mu * conserved_m(u) + nu * conserved_f(u, &eq.symbol, eq.variant)
}

/// Parameters of the Lyapunov function around a wave.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovParams {
    pub sigma: f64,
    pub mu: f64,
    pub nu: f64,
}

/// `V(v) = G(v) - G(phi) + sigma (Q(v) - Q(phi))^2`.
pub fn lyapunov_v(v: &Field, w: &TravelingWave, p: LyapunovParams) -> f64 {
    let eq = &w.equation;
    let dg = constrained_energy_g(v, eq, w.speed, w.constant) - constrained_energy_g(&w.profile, eq, w.speed, w.constant);
    let dq = auxiliary_q(v, eq, p.mu, p.nu) - auxiliary_q(&w.profile, eq, p.mu, p.nu);
    dg + p.sigma * dq * dq
}

/// Scale against which drifts of `V` are measured: `|G(phi)| + sigma Q(phi)^2`.
pub fn lyapunov_scale(w: &TravelingWave, p: LyapunovParams) -> f64 {
    let q = auxiliary_q(&w.profile, &w.equation, p.mu, p.nu);
    constrained_energy_g(&w.profile, &w.equation, w.speed, w.constant).abs() + p.sigma * q * q
}

/// A `sigma` making the second variation of `V` positive on `{phi'}^perp`,
/// with a safety factor of four over the smallest such value found by
/// bisection. Errors when no `sigma` up to `1e12` works.
pub fn suggest_sigma(lin: &LinearizedOperator, w: &TravelingWave, mu: f64, nu: f64) -> Result<f64> {
    let n = w.grid().len();
    let h = w.grid().spacing();
    let psi = w.equation.speed_forcing(&w.profile);
    let q = DVector::from_iterator(n, psi.values().iter().map(|p| mu + nu * p));
    let d = w.translation_mode();
    let d = DVector::from_column_slice(d.values()).normalize();
    let proj = DMatrix::<f64>::identity(n, n) - &d * d.transpose();
    let big = 2.0 * lin.norm() + 1.0;
    let min_eig = |sigma: f64| {
        let m = &proj * (lin.matrix() * 0.5 + &q * q.transpose() * (sigma * h)) * &proj + &d * d.transpose() * big;
        SymmetricEigen::new((&m + m.transpose()) * 0.5).eigenvalues.min()
    };
    let mut hi = 1.0;
    while min_eig(hi) <= 0.0 {
        hi *= 4.0;
        if hi > 1e12 {
            return Err(Error::NotApplicable("no sigma makes the Lyapunov function coercive".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if min_eig(mid) > 0.0 { hi = mid } else { lo = mid }
    }
    Ok(4.0 * hi)
}

/// `h(r) = |v - phi(. + r)|_s^2` and its first two derivatives, from
/// precomputed weighted cross spectra.
struct ShiftObjective {
    base: f64,
    // (xi, w conj(v^) phi^) per mode, Nyquist excluded
    modes: Vec<(f64, Complex64)>,
    length: f64,
}

impl ShiftObjective {
    fn new(v: &Field, phi: &Field, s: f64) -> Self {
        let g = *v.grid();
        let (a, b) = (v.spectrum(), phi.spectrum());
        let mut base = 0.0;
        let mut modes = Vec::with_capacity(g.len());
        for i in 0..g.len() {
            let w = (1.0 + g.frequency(i).powi(2)).powf(s);
            let pb = if i == g.nyquist_index() { 0.0 } else { b[i].norm_sqr() };
            base += w * (a[i].norm_sqr() + pb);
            if i != g.nyquist_index() {
                modes.push((g.frequency(i), a[i].conj() * b[i] * w));
            }
        }
        Self { base, modes, length: g.length() }
    }

    fn eval(&self, r: f64) -> (f64, f64, f64) {
        let (mut c0, mut c1, mut c2) = (0.0, 0.0, 0.0);
        for &(xi, m) in &self.modes {
            let z = m * Complex64::from_polar(1.0, xi * r);
            c0 += z.re;
            c1 -= xi * z.im;
            c2 -= xi * xi * z.re;
        }
        let l = self.length;
        ((l * (self.base - 2.0 * c0)).max(0.0), -2.0 * l * c1, -2.0 * l * c2)
    }
}

/// `inf_r |v - phi(. + r)|_s` and the minimizing shift in `[0, L)`.
pub fn orbital_distance(v: &Field, phi: &Field, s: f64) -> Result<(f64, f64)> {
    v.grid().check_same(phi.grid())?;
    let g = *v.grid();
    let obj = ShiftObjective::new(v, phi, s);
    // coarse scan: correlation at every node through one inverse transform
    let n = g.len();
    let mut corr = vec![Complex64::new(0.0, 0.0); n];
    let (a, b) = (v.spectrum(), phi.spectrum());
    for i in 0..n {
        if i != g.nyquist_index() {
            corr[i] = a[i].conj() * b[i] * (1.0 + g.frequency(i).powi(2)).powf(s);
        }
    }
    let c = inverse_transform_complex(&corr);
    let best = (0..n).max_by(|&i, &j| c[i].re.total_cmp(&c[j].re)).unwrap_or(0);
    let h = g.spacing();
    // golden section on the neighbouring cells
    let (mut lo, mut hi) = (g.node(best) - h, g.node(best) + h);
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - gr * (hi - lo);
    let mut x2 = lo + gr * (hi - lo);
    let (mut f1, mut f2) = (obj.eval(x1).0, obj.eval(x2).0);
    for _ in 0..40 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = obj.eval(x1).0;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = obj.eval(x2).0;
        }
    }
    let mut r = 0.5 * (lo + hi);
    // Newton polish on h'(r) = 0
    for _ in 0..8 {
        let (_, d1, d2) = obj.eval(r);
        if !(d2 > 0.0) || d1.abs() < 1e-13 * (1.0 + obj.base * g.length()) {
            break;
        }
        let step = d1 / d2;
        if step.abs() > h {
            break;
        }
        r -= step;
    }
    let l = g.length();
    let r = r.rem_euclid(l);
    Ok((obj.eval(r).0.sqrt(), r))
}

/// `(v - phi(. + r), phi'(. + r))_s`, zero at the optimal shift.
pub fn orbital_optimality_residual(v: &Field, phi: &Field, s: f64, r: f64) -> Result<f64> {
    let shifted = phi.translate(r);
    Ok(v.sub(&shifted)?.sobolev_inner(&shifted.derivative(), s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    Etdrk4,
    ImplicitMidpoint,
}

/// Time stepping controls. The step actually used is `T / round(T / dt)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default)]
    pub dealias: bool,
    #[serde(default)]
    pub variant: Variant,
    /// Time between recorded samples.
    #[serde(default = "default_sample_interval")]
    pub sample_interval: f64,
}

fn default_sample_interval() -> f64 {
    0.5
}

impl EvolutionConfig {
    pub fn new(dt: f64, t_final: f64) -> Self {
        Self { dt, t_final, integrator: Integrator::Etdrk4, dealias: false, variant: Variant::Standard, sample_interval: 0.5 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.t_final > 0.0 && self.dt <= self.t_final) {
            return Err(Error::Usage(format!("need 0 < dt <= T, got dt = {}, T = {}", self.dt, self.t_final)));
        }
        if !(self.sample_interval > 0.0) {
            return Err(Error::Usage("sample interval must be positive".into()));
        }
        Ok(())
    }
}

/// Right-hand side `lambda v + g(v)` in Fourier variables.
struct Rhs {
    grid: PeriodicGrid,
    lambda: Vec<Complex64>,
    // multiplier of f^ in g
    coupling: Vec<Complex64>,
    nl: Nonlinearity,
    pad: Option<usize>,
}

impl Rhs {
    fn new(grid: PeriodicGrid, s: &DispersionSymbol, nl: Nonlinearity, variant: Variant, dealias: bool) -> Self {
        let theta = s.values_on(&grid);
        let n = grid.len();
        let mut lambda = Vec::with_capacity(n);
        let mut coupling = Vec::with_capacity(n);
        for (i, &th) in theta.iter().enumerate() {
            let ixi = Complex64::new(0.0, grid.odd_frequency(i));
            match variant {
                Variant::Standard => {
                    lambda.push(ixi * th);
                    coupling.push(-ixi);
                }
                Variant::Regularized => {
                    let m = 1.0 / (1.0 + th);
                    lambda.push(-ixi * m);
                    coupling.push(-ixi * m);
                }
            }
        }
        let pad = dealias.then(|| {
            let d = nl.degree() as usize;
            let m = ((d + 1) * n).div_ceil(2);
            m + m % 2
        });
        Self { grid, lambda, coupling, nl, pad }
    }

    fn flux_hat(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.grid.len();
        match self.pad {
            None => {
                let u = inverse_transform(v);
                forward_transform(&u.iter().map(|&x| self.nl.value(x)).collect::<Vec<_>>())
            }
            Some(m) => {
                let half = n / 2;
                let mut big = vec![Complex64::new(0.0, 0.0); m];
                big[..half].copy_from_slice(&v[..half]);
                big[m - n + half + 1..].copy_from_slice(&v[half + 1..]);
                let u = inverse_transform(&big);
                let fb = forward_transform(&u.iter().map(|&x| self.nl.value(x)).collect::<Vec<_>>());
                let mut out = vec![Complex64::new(0.0, 0.0); n];
                out[..half].copy_from_slice(&fb[..half]);
                out[half + 1..].copy_from_slice(&fb[m - n + half + 1..]);
                out
            }
        }
    }

    fn nonlinear(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.flux_hat(v).iter().zip(&self.coupling).map(|(f, c)| f * c).collect()
    }
}

struct Etdrk4 {
    e: Vec<Complex64>,
    e2: Vec<Complex64>,
    q: Vec<Complex64>,
    f1: Vec<Complex64>,
    f2: Vec<Complex64>,
    f3: Vec<Complex64>,
}

impl Etdrk4 {
    const CONTOUR_POINTS: usize = 32;

    fn new(lambda: &[Complex64], h: f64) -> Self {
        let m = Self::CONTOUR_POINTS;
        let roots: Vec<Complex64> =
            (0..m).map(|j| Complex64::from_polar(1.0, 2.0 * PI * (j as f64 + 0.5) / m as f64)).collect();
        let mut s = Self { e: vec![], e2: vec![], q: vec![], f1: vec![], f2: vec![], f3: vec![] };
        for &l in lambda {
            let hl = l * h;
            s.e.push(hl.exp());
            s.e2.push((hl * 0.5).exp());
            let (mut q, mut f1, mut f2, mut f3) = (Complex64::default(), Complex64::default(), Complex64::default(), Complex64::default());
            for r in &roots {
                let z = hl + r;
                let ez = z.exp();
                let z3 = z * z * z;
                q += ((z * 0.5).exp() - 1.0) / z;
                f1 += (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3;
                f2 += (2.0 + z + ez * (z - 2.0)) / z3;
                f3 += (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3;
            }
            let scale = h / m as f64;
            s.q.push(q * scale);
            s.f1.push(f1 * scale);
            s.f2.push(f2 * scale);
            s.f3.push(f3 * scale);
        }
        s
    }

    fn step(&self, rhs: &Rhs, v: &[Complex64]) -> Vec<Complex64> {
        let n = v.len();
        let nv = rhs.nonlinear(v);
        let a: Vec<Complex64> = (0..n).map(|i| self.e2[i] * v[i] + self.q[i] * nv[i]).collect();
        let na = rhs.nonlinear(&a);
        let b: Vec<Complex64> = (0..n).map(|i| self.e2[i] * v[i] + self.q[i] * na[i]).collect();
        let nb = rhs.nonlinear(&b);
        let c: Vec<Complex64> = (0..n).map(|i| self.e2[i] * a[i] + self.q[i] * (nb[i] * 2.0 - nv[i])).collect();
        let nc = rhs.nonlinear(&c);
        (0..n)
            .map(|i| self.e[i] * v[i] + self.f1[i] * nv[i] + self.f2[i] * (na[i] + nb[i]) * 2.0 + self.f3[i] * nc[i])
            .collect()
    }
}

fn midpoint_step(rhs: &Rhs, v: &[Complex64], h: f64) -> Result<Vec<Complex64>> {
    let n = v.len();
    let fwd: Vec<Complex64> = (0..n).map(|i| (1.0 + rhs.lambda[i] * (0.5 * h)) * v[i]).collect();
    let inv: Vec<Complex64> = (0..n).map(|i| 1.0 / (1.0 - rhs.lambda[i] * (0.5 * h))).collect();
    let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut next = v.to_vec();
    for _ in 0..100 {
        let mid: Vec<Complex64> = (0..n).map(|i| 0.5 * (v[i] + next[i])).collect();
        let g = rhs.nonlinear(&mid);
        let cand: Vec<Complex64> = (0..n).map(|i| inv[i] * (fwd[i] + g[i] * h)).collect();
        let change = cand.iter().zip(&next).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        next = cand;
        if change <= 1e-15 * scale {
            return Ok(next);
        }
    }
    Err(Error::Convergence { iterations: 100, residual: f64::NAN })
}

/// Samples of a computed trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Field>,
    /// Time of the first non-finite or runaway state.
    pub blowup: Option<f64>,
    pub dt: f64,
}

impl Trajectory {
    pub fn last(&self) -> &Field {
        self.states.last().expect("trajectory has the initial state")
    }
}

/// Integrates from `u0` to `T`, recording samples every `sample_interval`.
pub fn integrate(u0: &Field, cfg: &EvolutionConfig, s: &DispersionSymbol, nl: &Nonlinearity) -> Result<Trajectory> {
    cfg.validate()?;
    let grid = *u0.grid();
    let steps = (cfg.t_final / cfg.dt).round().max(1.0) as usize;
    let h = cfg.t_final / steps as f64;
    let every = ((cfg.sample_interval / h).round() as usize).max(1);
    let rhs = Rhs::new(grid, s, *nl, cfg.variant, cfg.dealias);
    let etd = (cfg.integrator == Integrator::Etdrk4).then(|| Etdrk4::new(&rhs.lambda, h));
    let limit = 1e3 * (1.0 + u0.max_abs());
    let mut v: Vec<Complex64> = u0.spectrum().to_vec();
    let mut traj = Trajectory { times: vec![0.0], states: vec![u0.clone()], blowup: None, dt: h };
    for k in 1..=steps {
        v = match &etd {
            Some(e) => e.step(&rhs, &v),
            None => match midpoint_step(&rhs, &v, h) {
                Ok(x) => x,
                Err(_) => {
                    traj.blowup = Some(k as f64 * h);
                    return Ok(traj);
                }
            },
        };
        let t = k as f64 * h;
        // sum |v_k| bounds the sup norm, so the transform is only needed when it is large
        let bound: f64 = v.iter().map(|c| c.norm()).sum();
        if !bound.is_finite() || (bound > limit && Field::new(grid, inverse_transform(&v))?.max_abs() > limit) {
            traj.blowup = Some(t);
            return Ok(traj);
        }
        if k % every == 0 || k == steps {
            traj.times.push(t);
            traj.states.push(Field::new(grid, inverse_transform(&v))?);
        }
    }
    Ok(traj)
}

/// Smooth mean-free random field with unit `H^s` norm: independent normal
/// Fourier coefficients on `1 <= |kappa| <= kmax` damped by `(1 + kappa^2)^-1`.
pub fn random_perturbation(grid: PeriodicGrid, s: f64, kmax: usize, rng: &mut impl Rng) -> Field {
    let n = grid.len();
    let kmax = kmax.clamp(1, n / 2 - 1);
    let mut spec = vec![Complex64::new(0.0, 0.0); n];
    for k in 1..=kmax {
        let damp = 1.0 / (1.0 + (k * k) as f64);
        let re: f64 = rng.gen_range(-1.0..1.0);
        let im: f64 = rng.gen_range(-1.0..1.0);
        let c = Complex64::new(re, im) * damp;
        spec[k] = c;
        spec[n - k] = c.conj();
    }
    let f = Field::from_spectrum(grid, &spec).expect("grid size");
    let norm = f.sobolev_norm(s);
    f.scaled(1.0 / norm)
}

/// The perturbation drawn by [`stability_experiment`] for `seed`.
pub fn seeded_perturbation(grid: PeriodicGrid, s: f64, kmax: usize, seed: u64) -> Field {
    random_perturbation(grid, s, kmax, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Orbital distance, conserved quantities and `V` over time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvolutionTrace {
    pub times: Vec<f64>,
    pub d_orbit: Vec<f64>,
    pub r_star: Vec<f64>,
    pub p: Vec<f64>,
    pub f: Vec<f64>,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl EvolutionTrace {
    pub fn from_trajectory(traj: &Trajectory, w: &TravelingWave, s_norm: f64, lyap: LyapunovParams, variant: Variant) -> Result<Self> {
        let mut eq = w.equation;
        eq.variant = variant;
        let wave = TravelingWave { equation: eq, ..w.clone() };
        let mut tr = EvolutionTrace::default();
        for (t, u) in traj.times.iter().zip(&traj.states) {
            let (d, r) = orbital_distance(u, &w.profile, s_norm)?;
            tr.times.push(*t);
            tr.d_orbit.push(d);
            tr.r_star.push(r);
            tr.p.push(conserved_p(u, &eq.symbol, &eq.nonlinearity));
            tr.f.push(conserved_f(u, &eq.symbol, variant));
            tr.m.push(conserved_m(u));
            tr.v.push(lyapunov_v(u, &wave, lyap));
        }
        Ok(tr)
    }

    pub fn to_csv(&self) -> String {
        let rows = (0..self.times.len())
            .map(|i| vec![self.times[i], self.d_orbit[i], self.r_star[i], self.p[i], self.f[i], self.m[i], self.v[i]]);
        csv_table(&["t", "d_orbit", "r_star", "P", "F", "M", "V"], rows)
    }
}

/// `max_t |x(t) - x(0)| / max(|x(0)|, reference)`.
pub fn relative_drift(series: &[f64], reference: f64) -> f64 {
    let Some(&x0) = series.first() else { return 0.0 };
    let scale = x0.abs().max(reference).max(f64::MIN_POSITIVE);
    series.iter().map(|x| (x - x0).abs()).fold(0.0, f64::max) / scale
}

/// Outcome of evolving one perturbed wave.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub amplitude: f64,
    pub seed: u64,
    pub d0: f64,
    pub initial_distance: f64,
    pub sup_distance: f64,
    pub sup_ratio: Option<f64>,
    pub drift_p: f64,
    pub drift_f: f64,
    pub drift_m: f64,
    pub drift_v: f64,
    pub blowup_time: Option<f64>,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub integrator: Integrator,
    pub sobolev_index: f64,
    pub lyapunov: LyapunovParams,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub summary: ExperimentSummary,
    pub trace: EvolutionTrace,
}

/// Settings shared by all amplitudes of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSetup {
    pub seed: u64,
    /// Highest wavenumber in the random perturbation.
    pub kmax: usize,
    pub lyapunov: LyapunovParams,
}

/// Evolves `phi + a p` for each amplitude with one seeded mean-free `p`.
pub fn stability_experiment(
    w: &TravelingWave,
    amplitudes: &[f64],
    cfg: &EvolutionConfig,
    setup: &ExperimentSetup,
) -> Result<Vec<ExperimentResult>> {
    let s_norm = 0.5 * w.equation.symbol.order;
    let p = seeded_perturbation(*w.grid(), s_norm, setup.kmax, setup.seed);
    let mut out = Vec::with_capacity(amplitudes.len());
    for &a in amplitudes {
        if !(a >= 0.0) {
            return Err(Error::Usage(format!("amplitude must be nonnegative, got {a}")));
        }
        let u0 = w.profile.add_scaled(a, &p)?;
        let traj = integrate(&u0, cfg, &w.equation.symbol, &w.equation.nonlinearity)?;
        let trace = EvolutionTrace::from_trajectory(&traj, w, s_norm, setup.lyapunov, cfg.variant)?;
        let d0 = u0.sub(&w.profile)?.sobolev_norm(s_norm);
        let sup_distance = trace.d_orbit.iter().copied().fold(0.0, f64::max);
        let mass_ref = u0.map(f64::abs).integral();
        let mut wave = w.clone();
        wave.equation.variant = cfg.variant;
        let summary = ExperimentSummary {
            amplitude: a,
            seed: setup.seed,
            d0,
            initial_distance: trace.d_orbit[0],
            sup_distance,
            sup_ratio: (d0 > 0.0).then(|| sup_distance / d0),
            drift_p: relative_drift(&trace.p, 0.0),
            drift_f: relative_drift(&trace.f, 0.0),
            drift_m: relative_drift(&trace.m, mass_ref),
            drift_v: relative_drift(&trace.v, lyapunov_scale(&wave, setup.lyapunov)),
            blowup_time: traj.blowup,
            dt: traj.dt,
            t_final: cfg.t_final,
            integrator: cfg.integrator,
            sobolev_index: s_norm,
            lyapunov: setup.lyapunov,
            note: "finite-time falsification test; bounded orbital distance over [0, T] is evidence, not proof".into(),
        };
        out.push(ExperimentResult { summary, trace });
    }
    Ok(out)
}
