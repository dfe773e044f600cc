use std::f64::consts::PI;
use std::sync::Arc;

use periwave_core::elliptic::EllipticModulus;
use periwave_core::evolution::{stability_experiment, suggest_sigma, EvolutionConfig, ExperimentSetup, LyapunovParams};
use periwave_core::linop::assemble;
use periwave_core::output::{parse_csv, to_json_string};
use periwave_core::stability::{certify, curve_criterion, CertifyOptions, Conclusion};
use periwave_core::waves::{
    cnoidal_wave, continue_family, ilw_wave, Constraint, SolveOptions, Sweep, TravelingWave,
};
use periwave_core::{Field, PeriodicGrid};

#[test]
fn wave_file_round_trip_then_certify() {
    let dir = tempfile::tempdir().unwrap();
    let w = cnoidal_wave(2.0 * PI, EllipticModulus::new(0.9).unwrap(), 128).unwrap();
    w.write_files(dir.path(), "wave").unwrap();
    let back = TravelingWave::read_files(&dir.path().join("wave.json")).unwrap();
    assert_eq!(back.profile.values(), w.profile.values());
    assert_eq!((back.speed, back.constant), (w.speed, w.constant));
    assert_eq!(back.constraint, w.constraint);
    let a = certify(&back, &CertifyOptions::default());
    let b = certify(&TravelingWave::read_files(&dir.path().join("wave.json")).unwrap(), &CertifyOptions::default());
    assert_eq!(to_json_string(&a).unwrap(), to_json_string(&b).unwrap());
    assert_eq!(a.verdict.conclusion, Conclusion::OrbitallyStable);
}

#[test]
fn verdict_json_has_audit_fields() {
    let w = ilw_wave(2.0 * PI, 2.0, EllipticModulus::new(0.5).unwrap(), 64).unwrap();
    let cert = certify(&w, &CertifyOptions::default());
    let v: serde_json::Value = serde_json::from_str(&to_json_string(&cert.verdict).unwrap()).unwrap();
    for key in ["criteria", "delta_witness", "D", "K_Ham", "k_r", "conclusion", "fired_criterion", "prerequisites"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    for key in ["M_A", "F_omega", "M_omega", "det_condition"] {
        assert!(v["criteria"].get(key).is_some(), "{key}");
    }
    assert_eq!(v["conclusion"], "orbitally_stable");
}

#[test]
fn speed_family_is_stable_with_negative_curve_value() {
    let seed = cnoidal_wave(2.0 * PI, EllipticModulus::new(0.8).unwrap(), 64).unwrap();
    let omegas: Vec<f64> = (0..10).map(|i| seed.speed + 0.05 * i as f64).collect();
    let fam = continue_family(&seed, &Sweep::Speed, &omegas, Constraint::ZeroMean, SolveOptions::default()).unwrap();
    let opts = CertifyOptions { fd_step: None, hamiltonian: false, ..Default::default() };
    for m in &fam.members {
        assert_eq!(certify(&m.wave, &opts).verdict.conclusion, Conclusion::OrbitallyStable);
    }
    let mut prev = f64::NEG_INFINITY;
    for m in &fam.members {
        let f = 0.5 * m.wave.profile.inner(&m.wave.profile).unwrap();
        assert!(f > prev);
        prev = f;
    }
    assert!(curve_criterion(&fam).unwrap().iter().all(|p| p.value < 0.0));
}

#[test]
fn curve_sweep_with_solitary_convention() {
    // xi = omega with A held at the seed value
    let seed = cnoidal_wave(2.0 * PI, EllipticModulus::new(0.8).unwrap(), 64).unwrap();
    let (w0, a0) = (seed.speed, seed.constant);
    let map = Arc::new(move |xi: f64| (xi, a0));
    let xis: Vec<f64> = (0..5).map(|i| w0 + 0.01 * i as f64).collect();
    let fam = continue_family(&seed, &Sweep::Curve(map), &xis, Constraint::FixedA { a: a0 }, SolveOptions::default())
        .unwrap();
    for m in &fam.members {
        assert!((m.wave.constant - a0).abs() < 1e-15);
    }
    assert_eq!(curve_criterion(&fam).unwrap().len(), 3);
}

#[test]
fn experiment_is_reproducible() {
    let w = cnoidal_wave(2.0 * PI, EllipticModulus::new(0.6).unwrap(), 64).unwrap();
    let lin = assemble(&w, None);
    let (mu, nu) = certify(&w, &CertifyOptions::default()).verdict.mu_nu.unwrap();
    let sigma = suggest_sigma(&lin, &w, mu, nu).unwrap();
    let setup = ExperimentSetup { seed: 3, kmax: 8, lyapunov: LyapunovParams { sigma, mu, nu } };
    let cfg = EvolutionConfig::new(1e-2, 3.0);
    let a = stability_experiment(&w, &[1e-3], &cfg, &setup).unwrap();
    let b = stability_experiment(&w, &[1e-3], &cfg, &setup).unwrap();
    assert_eq!(a[0].trace.to_csv(), b[0].trace.to_csv());
    assert_eq!(to_json_string(&a[0].summary).unwrap(), to_json_string(&b[0].summary).unwrap());
    let (header, rows) = parse_csv(&a[0].trace.to_csv()).unwrap();
    assert_eq!(header.len(), 7);
    assert_eq!(rows.len(), a[0].trace.times.len());
}

#[test]
fn constant_state_is_inconclusive() {
    let grid = PeriodicGrid::new(2.0 * PI, 32).unwrap();
    let seed = cnoidal_wave(2.0 * PI, EllipticModulus::new(0.5).unwrap(), 32).unwrap();
    let w = TravelingWave {
        profile: Field::constant(grid, 0.2),
        speed: 1.0,
        constant: 0.02 - 0.2,
        ..seed
    };
    let cert = certify(&w, &CertifyOptions::default());
    assert!(!cert.spectral.h0_pass);
    assert_eq!(cert.verdict.conclusion, Conclusion::Inconclusive);
}
