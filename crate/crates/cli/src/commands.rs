use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::anyhow;
use periwave_core::elliptic::EllipticModulus;
use periwave_core::evolution::{
    integrate, seeded_perturbation, stability_experiment, suggest_sigma, EvolutionConfig, ExperimentSetup,
    LyapunovParams,
};
use periwave_core::linop::assemble;
use periwave_core::output::{fmt_f64, to_json_string, write_atomic};
use periwave_core::spectral::{DispersionSymbol, PeriodicGrid, SymbolKind};
use periwave_core::stability::{certify, curve_criterion, mass_and_momentum, CertifyOptions, Conclusion};
use periwave_core::waves::{
    branch_from_bifurcation, cnoidal_wave, continue_family_partial, cosine_guess, ilw_wave,
    regularized_from_standard, solve_newton, Equation, Nonlinearity, SolveOptions, Sweep, TravelingWave, Variant,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{sha256_hex, GuessSpec, RunConfig, SweepParameter};

pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_SOLVE: u8 = 2;
pub const EXIT_PREREQUISITES: u8 = 3;
pub const EXIT_SWEEP_PARTIAL: u8 = 4;
pub const EXIT_BLOWUP: u8 = 5;

/// An error tagged with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(code: u8, msg: impl Display) -> Self {
        Self { code, error: anyhow!("{msg}") }
    }
}

pub trait Stage<T> {
    fn stage(self, code: u8, what: &str) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Stage<T> for Result<T, E> {
    fn stage(self, code: u8, what: &str) -> Result<T, Failure> {
        self.map_err(|e| Failure { code, error: e.into().context(what.to_string()) })
    }
}

/// Resolved inputs shared by all commands.
pub struct Run {
    pub cfg: RunConfig,
    pub out: PathBuf,
    pub wave_file: Option<PathBuf>,
    pub hash: String,
}

impl Run {
    pub fn new(cfg: RunConfig, out: Option<PathBuf>, wave_file: Option<PathBuf>) -> Result<Self, Failure> {
        let mut material = cfg.canonical_json().into_bytes();
        if let Some(p) = &wave_file {
            material.extend(std::fs::read(p).stage(EXIT_CONFIG, "reading wave file")?);
            material.extend(std::fs::read(p.with_extension("csv")).stage(EXIT_CONFIG, "reading wave profile")?);
        }
        let out = out.unwrap_or_else(|| PathBuf::from(&cfg.output.directory));
        Ok(Self { hash: sha256_hex(&material), cfg, out, wave_file })
    }

    fn envelope(&self, command: &str, payload: Value) -> Value {
        let mut v = json!({
            "tool": "periwave",
            "version": env!("CARGO_PKG_VERSION"),
            "config_hash": self.hash,
            "command": command,
        });
        if let Value::Object(extra) = payload {
            v.as_object_mut().expect("object").extend(extra);
        }
        v
    }

    fn write(&self, rel: &str, contents: &str) -> Result<(), Failure> {
        let path = self.out.join(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).stage(EXIT_CONFIG, "creating output directory")?;
        }
        write_atomic(&path, contents).stage(EXIT_CONFIG, &format!("writing {}", path.display()))
    }

    fn write_json(&self, rel: &str, command: &str, payload: Value) -> Result<(), Failure> {
        let text = to_json_string(&self.envelope(command, payload)).stage(EXIT_CONFIG, "serializing output")?;
        self.write(rel, &text)
    }

    /// Wave CSV plus sidecar; the sidecar also carries the run metadata.
    fn write_wave(&self, stem: &str, w: &TravelingWave) -> Result<(), Failure> {
        self.write(&format!("{stem}.csv"), &w.profile.to_csv())?;
        let sidecar = serde_json::to_value(w.sidecar()).stage(EXIT_CONFIG, "serializing wave")?;
        self.write_json(&format!("{stem}.json"), "wave", sidecar)
    }

    fn solve_options(&self) -> SolveOptions {
        self.cfg.solve.map(|s| SolveOptions { tol: s.tol, max_iter: s.max_iter }).unwrap_or_default()
    }

    fn certify_options(&self) -> CertifyOptions {
        CertifyOptions { solve: self.solve_options(), ..Default::default() }
    }

    /// The wave from `--wave` or from the solve section; the flag says
    /// whether it was solved here.
    fn wave(&self) -> Result<(TravelingWave, bool), Failure> {
        match &self.wave_file {
            Some(p) => Ok((TravelingWave::read_files(p).stage(EXIT_CONFIG, "reading wave file")?, false)),
            None => Ok((build_wave(&self.cfg)?, true)),
        }
    }
}

fn label<T: Serialize>(t: &T) -> String {
    match serde_json::to_value(t) {
        Ok(Value::String(s)) => s,
        Ok(v) => v.to_string(),
        Err(_) => "?".into(),
    }
}

fn config_error(msg: impl Display) -> Failure {
    Failure::new(EXIT_CONFIG, msg)
}

/// Solves the profile equation described by the config.
pub fn build_wave(cfg: &RunConfig) -> Result<TravelingWave, Failure> {
    let eqc = cfg.equation.ok_or_else(|| config_error("config has no equation section"))?;
    let gc = cfg.grid.ok_or_else(|| config_error("config has no grid section"))?;
    let sc = cfg.solve.ok_or_else(|| config_error("config has no solve section"))?;
    let grid = PeriodicGrid::new(gc.length, gc.nodes).stage(EXIT_CONFIG, "grid")?;
    let symbol = DispersionSymbol::new(eqc.symbol, gc.length).stage(EXIT_CONFIG, "symbol")?;
    let eq = Equation::new(symbol, eqc.nonlinearity, eqc.variant);
    let opts = SolveOptions { tol: sc.tol, max_iter: sc.max_iter };
    let wave = match sc.guess {
        GuessSpec::Cnoidal { k } => {
            if eqc.symbol != SymbolKind::SecondDerivative || !eqc.nonlinearity.is_half_square() {
                return Err(config_error("cnoidal guess needs symbol second_derivative and f = u^2/2"));
            }
            let k = EllipticModulus::new(k).stage(EXIT_CONFIG, "solve.guess.k")?;
            let w = cnoidal_wave(gc.length, k, gc.nodes).stage(EXIT_SOLVE, "cnoidal construction")?;
            match eqc.variant {
                Variant::Standard => w,
                Variant::Regularized => regularized_from_standard(&w).stage(EXIT_SOLVE, "regularized rescaling")?,
            }
        }
        GuessSpec::Ilw { k } => {
            let SymbolKind::Ilw { delta } = eqc.symbol else {
                return Err(config_error("ilw guess needs symbol ilw"));
            };
            if eqc.nonlinearity != Nonlinearity::QuadraticIlw || eqc.variant != Variant::Standard {
                return Err(config_error("ilw guess needs nonlinearity quadratic_ilw and the standard variant"));
            }
            let k = EllipticModulus::new(k).stage(EXIT_CONFIG, "solve.guess.k")?;
            ilw_wave(gc.length, delta, k, gc.nodes).stage(EXIT_SOLVE, "ILW construction")?
        }
        GuessSpec::Branch { amplitude, steps } => {
            branch_from_bifurcation(&eq, grid, amplitude, steps, opts).stage(EXIT_SOLVE, "branch continuation")?
        }
        GuessSpec::Cosine { omega, base, amplitude } => {
            solve_newton(&cosine_guess(grid, base, amplitude), omega, sc.constraint, &eq, opts)
                .stage(EXIT_SOLVE, "Newton solve")?
        }
    };
    if wave.constraint == sc.constraint {
        return Ok(wave);
    }
    solve_newton(&wave.profile, wave.speed, sc.constraint, &wave.equation, opts).stage(EXIT_SOLVE, "Newton re-solve")
}

fn wave_summary(w: &TravelingWave) -> Value {
    let (m, f) = mass_and_momentum(w);
    json!({
        "L": w.grid().length(),
        "N": w.grid().len(),
        "omega": w.speed,
        "A": w.constant,
        "M": m,
        "F": f,
        "residual_norm": w.residual_norm,
        "spectral_tail": w.spectral_tail(),
        "constraint": w.constraint,
        "symbol": w.equation.symbol.name(),
        "nonlinearity": w.equation.nonlinearity.name(),
        "variant": w.equation.variant,
    })
}

pub fn solve(run: &Run) -> Result<(), Failure> {
    let w = build_wave(&run.cfg)?;
    run.write_wave("wave", &w)?;
    if run.cfg.output.json() {
        run.write_json("solve.json", "solve", json!({ "wave": wave_summary(&w) }))?;
    }
    println!("residual {} (omega = {}, A = {})", fmt_f64(w.residual_norm), fmt_f64(w.speed), fmt_f64(w.constant));
    Ok(())
}

pub fn certify_cmd(run: &Run) -> Result<(), Failure> {
    let (w, solved) = run.wave()?;
    if solved {
        run.write_wave("wave", &w)?;
    }
    let cert = certify(&w, &run.certify_options());
    if run.cfg.output.csv() {
        run.write("spectrum.csv", &assemble(&w, None).spectrum_csv())?;
    }
    if run.cfg.output.json() {
        let cert_value = serde_json::to_value(&cert).stage(EXIT_CONFIG, "serializing certification")?;
        run.write_json("certify.json", "certify", json!({ "wave": wave_summary(&w), "certification": cert_value }))?;
    }
    let v = &cert.verdict;
    let fired = v.fired_criterion.as_ref().map(label).unwrap_or_else(|| "none".into());
    println!("conclusion: {} (fired: {fired})", label(&v.conclusion));
    if v.conclusion == Conclusion::Inconclusive {
        return Err(Failure::new(EXIT_PREREQUISITES, format!("verdict inconclusive: {}", v.reason)));
    }
    Ok(())
}

pub fn sweep(run: &Run) -> Result<(), Failure> {
    let sc = run.cfg.sweep.ok_or_else(|| config_error("config has no sweep section"))?;
    let (seed, _) = run.wave()?;
    let opts = run.solve_options();
    let (sweep, origin) = match sc.parameter {
        SweepParameter::Omega => (Sweep::Speed, seed.speed),
        SweepParameter::A => (Sweep::Constant, seed.constant),
        SweepParameter::Xi => {
            let m = sc.xi_map.ok_or_else(|| config_error("sweep.parameter = xi needs sweep.xi_map"))?;
            let map = move |xi: f64| (m.omega[0] + m.omega[1] * xi, m.a[0] + m.a[1] * xi);
            (Sweep::Curve(Arc::new(map)), 0.0)
        }
    };
    let values = sc.values(origin);
    let (family, failure) = continue_family_partial(&seed, &sweep, &values, seed.constraint, opts);
    let copts = CertifyOptions { fd_step: None, hamiltonian: false, ..run.certify_options() };
    let certs: Vec<_> = family.members.par_iter().map(|m| certify(&m.wave, &copts)).collect();
    let curve = if family.len() >= 3 { curve_criterion(&family).ok() } else { None };
    let curve_at = |xi: f64| curve.as_ref().and_then(|c| c.iter().find(|p| p.xi == xi)).map(|p| p.value);

    let mut csv = String::from("xi,omega,A,M,F,verdict,curve_value\n");
    let mut members = Vec::with_capacity(family.len());
    for (i, (m, cert)) in family.members.iter().zip(&certs).enumerate() {
        let (mass, mom) = mass_and_momentum(&m.wave);
        let conclusion = label(&cert.verdict.conclusion);
        let cv = curve_at(m.parameter);
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_f64(m.parameter),
            fmt_f64(m.wave.speed),
            fmt_f64(m.wave.constant),
            fmt_f64(mass),
            fmt_f64(mom),
            conclusion,
            cv.map(fmt_f64).unwrap_or_default()
        ));
        run.write_wave(&format!("family/member_{i:03}"), &m.wave)?;
        members.push(json!({
            "xi": m.parameter,
            "omega": m.wave.speed,
            "A": m.wave.constant,
            "M": mass,
            "F": mom,
            "curve_value": cv,
            "verdict": serde_json::to_value(&cert.verdict).stage(EXIT_CONFIG, "serializing verdict")?,
        }));
        println!("xi = {}: {conclusion}", fmt_f64(m.parameter));
    }
    if run.cfg.output.csv() {
        run.write("family.csv", &csv)?;
    }
    if run.cfg.output.json() {
        let payload = json!({
            "parameter": sc.parameter,
            "requested": values.len(),
            "completed": family.len(),
            "max_jump": family.max_jump(),
            "members": members,
            "curve_criterion": curve,
            "failure": failure.as_ref().map(|e| e.to_string()),
        });
        run.write_json("sweep.json", "sweep", payload)?;
    }
    match failure {
        Some(e) => Err(Failure {
            code: EXIT_SWEEP_PARTIAL,
            error: anyhow::Error::new(e).context(format!("sweep stopped after {} of {} members", family.len(), values.len())),
        }),
        None => Ok(()),
    }
}

/// Final-time differences of one run at dt, dt/2, dt/4.
fn dt_halving(w: &TravelingWave, cfg: &EvolutionConfig, amplitude: f64, setup: &ExperimentSetup) -> Result<Value, Failure> {
    let p = seeded_perturbation(*w.grid(), 0.5 * w.equation.symbol.order, setup.kmax, setup.seed);
    let u0 = w.profile.add_scaled(amplitude, &p).stage(EXIT_CONFIG, "initial state")?;
    let mut finals = Vec::with_capacity(3);
    for div in [1.0, 2.0, 4.0] {
        let c = EvolutionConfig { dt: cfg.dt / div, sample_interval: cfg.t_final, ..*cfg };
        let traj = integrate(&u0, &c, &w.equation.symbol, &w.equation.nonlinearity).stage(EXIT_CONFIG, "evolution")?;
        finals.push(traj.last().clone());
    }
    let diff = |a: usize, b: usize| finals[a].sub(&finals[b]).map(|d| d.max_abs()).unwrap_or(f64::NAN);
    let (e1, e2) = (diff(0, 1), diff(1, 2));
    let ratio = e1 / e2;
    // differences this small are rounding noise and say nothing about the order
    let roundoff_limited = e2 < 1e-11 * finals[2].max_abs().max(1.0);
    if roundoff_limited {
        println!("dt-halving differences {} and {} are at rounding level", fmt_f64(e1), fmt_f64(e2));
    } else {
        println!("dt-halving error ratio {} (observed order {})", fmt_f64(ratio), fmt_f64(ratio.log2()));
    }
    Ok(json!({
        "differences": [e1, e2],
        "ratio": ratio,
        "observed_order": ratio.log2(),
        "roundoff_limited": roundoff_limited,
    }))
}

pub fn evolve(run: &Run) -> Result<(), Failure> {
    let ec = run.cfg.evolve.clone().ok_or_else(|| config_error("config has no evolve section"))?;
    let (w, solved) = run.wave()?;
    if solved {
        run.write_wave("wave", &w)?;
    }
    let (mu, nu) = match ec.mu_nu {
        Some([mu, nu]) => (mu, nu),
        None => {
            let copts = CertifyOptions { fd_step: None, hamiltonian: false, ..run.certify_options() };
            let v = certify(&w, &copts).verdict;
            v.mu_nu.ok_or_else(|| {
                Failure::new(EXIT_PREREQUISITES, format!("no Lyapunov direction (set evolve.mu_nu): {}", v.reason))
            })?
        }
    };
    let sigma = match ec.sigma {
        Some(s) => s,
        None => suggest_sigma(&assemble(&w, None), &w, mu, nu).stage(EXIT_PREREQUISITES, "choosing sigma")?,
    };
    let setup = ExperimentSetup { seed: ec.seed, kmax: ec.kmax, lyapunov: LyapunovParams { sigma, mu, nu } };
    let cfg = EvolutionConfig {
        dt: ec.dt,
        t_final: ec.t_final,
        integrator: ec.integrator,
        dealias: ec.dealias,
        variant: w.equation.variant,
        sample_interval: ec.sample_interval,
    };
    let results = stability_experiment(&w, &ec.amplitudes, &cfg, &setup).stage(EXIT_CONFIG, "evolution")?;
    let convergence = if ec.convergence_check { Some(dt_halving(&w, &cfg, ec.amplitudes[0], &setup)?) } else { None };

    let mut blowup = None;
    for (i, r) in results.iter().enumerate() {
        if run.cfg.output.csv() {
            run.write(&format!("trace_{i:02}.csv"), &r.trace.to_csv())?;
        }
        let s = &r.summary;
        let ratio = s.sup_ratio.map(fmt_f64).unwrap_or_else(|| "n/a".into());
        println!(
            "a = {}: sup d = {}, sup ratio = {ratio}, drifts P {} F {} M {} V {}",
            fmt_f64(s.amplitude),
            fmt_f64(s.sup_distance),
            fmt_f64(s.drift_p),
            fmt_f64(s.drift_f),
            fmt_f64(s.drift_m),
            fmt_f64(s.drift_v)
        );
        if let (None, Some(t)) = (blowup, s.blowup_time) {
            blowup = Some((s.amplitude, t));
        }
    }
    if run.cfg.output.json() {
        let summaries: Vec<_> = results.iter().map(|r| &r.summary).collect();
        let payload = json!({
            "wave": wave_summary(&w),
            "lyapunov": setup.lyapunov,
            "results": summaries,
            "convergence": convergence,
        });
        run.write_json("evolve.json", "evolve", payload)?;
    }
    match blowup {
        Some((a, t)) => Err(Failure::new(EXIT_BLOWUP, format!("blowup at t = {} for amplitude {}", fmt_f64(t), fmt_f64(a)))),
        None => Ok(()),
    }
}

pub fn wave_file_path(p: &Path) -> PathBuf {
    if p.extension().is_some_and(|e| e == "csv") {
        p.with_extension("json")
    } else {
        p.to_path_buf()
    }
}
