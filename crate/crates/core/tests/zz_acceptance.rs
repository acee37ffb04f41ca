// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fail.

use std::fs;
use std::time::{Duration, Instant};

use clap::Parser;
use coldspin::analysis::{
    compute_od, fit_column_density, fit_tof_temperature, fit_two_body_decay, photon_budget, snr_report, DecaySample,
    FitResult, N_C,
};
use coldspin::cli::{run, Cli};
use coldspin::detector::{DetectorSpec, TransmissionSpec};
use coldspin::dynamics::{
    dipole_trap_depth, effective_volume, evolve_trap_population, evolve_trap_population_rk4, light_shift,
    peak_density, synthetic_decay_samples, synthetic_tof_samples, TrapPopulationParams, FWHM_PER_SIGMA,
};
use coldspin::experiment::{
    averaged_train_snr, child_stream, linspace, run_detuning_scan, run_pulse_train, DestructionModel, ScanConfig,
    ScanSetup,
};
use coldspin::spin_optics::{coupling_constant, qnd_interact, single_atom_pseudospin, CouplingOptions};
use coldspin::{AtomSpec, CollectiveSpinState, StokesState, TrapSpec};
use nalgebra::Vector3;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn spec() -> AtomSpec {
    AtomSpec::rubidium87_d2()
}

const N_ATOMS: f64 = 1e6;
const N_C_TRUE: f64 = 2.65e14;

fn c1_od() -> Outcome {
    let spec = spec();
    let fit = FitResult {
        params: [(N_C.to_string(), N_C_TRUE)].into(),
        sigmas: [(N_C.to_string(), 0.07e14)].into(),
        chi2: 0.0,
        dof: 0,
        converged: true,
    };
    let (od, _) = compute_od(&fit, &spec).map_err(err)?;
    check((od - 51.4).abs() <= 1.5, format!("OD = {od:.2} (target 51.4 ± 1.5)"))
}

fn c2_scan_fit() -> Outcome {
    let spec = spec();
    let atoms = CollectiveSpinState::pumped_z(N_ATOMS, 1.0);
    let setup = ScanSetup {
        atoms: &atoms,
        spec: &spec,
        area_m2: N_ATOMS / N_C_TRUE,
        detector: &DetectorSpec::default(),
        transmission: &TransmissionSpec::default(),
        destruction: &DestructionModel::default(),
        coupling: &CouplingOptions::default(),
    };
    let data = run_detuning_scan(&ScanConfig::default(), &setup).map_err(err)?;
    let fit = fit_column_density(&data, &spec).map_err(err)?;
    let (n_c, sigma) = (fit.param(N_C).map_err(err)?, fit.sigma(N_C).map_err(err)?);
    let rel = sigma / n_c;
    check(
        (n_c - N_C_TRUE).abs() <= 2.0 * sigma && (0.01..=0.05).contains(&rel),
        format!(
            "n_c = {n_c:.4e} ± {sigma:.2e} ({:.2}%), off by {:.2} σ",
            100.0 * rel,
            (n_c - N_C_TRUE).abs() / sigma
        ),
    )
}

fn c3_snr() -> Outcome {
    let spec = spec();
    let c = coupling_constant(-1.6e9, N_ATOMS / N_C_TRUE, &spec, &CouplingOptions::default()).map_err(err)?;
    let atoms = CollectiveSpinState::pumped_z(N_ATOMS, 1.0);
    let light = StokesState::coherent_x(4.3e6, 1e-6);
    let det = DetectorSpec::default();
    let theta = c.g * atoms.mean.z;
    let closed = snr_report(theta, light.n_photons, &det, 20);
    let mc = averaged_train_snr(
        20,
        1000,
        &atoms,
        &c,
        &light,
        &DestructionModel::default(),
        &det,
        &TransmissionSpec::default(),
        0,
    )
    .map_err(err)?;
    let band = 150.0..=300.0;
    check(
        band.contains(&closed) && band.contains(&mc),
        format!("closed form {closed:.0}, Monte Carlo {mc:.0} (band [150, 300])"),
    )
}

fn c4_budget() -> Outcome {
    let spec = spec();
    let c = coupling_constant(-1.6e9, N_ATOMS / N_C_TRUE, &spec, &CouplingOptions::default()).map_err(err)?;
    let theta = c.g * N_ATOMS / 2.0;
    let n_p = photon_budget(1.0, N_ATOMS, theta).map_err(err)?;
    let pulses = (n_p / 4.3e6).ceil();
    check(
        (3e8..=3e9).contains(&n_p) && (100.0..=1000.0).contains(&pulses),
        format!("N_p = {n_p:.3e}, {pulses} pulses at 4.3e6"),
    )
}

fn c5_destruction() -> Outcome {
    let spec = spec();
    let c = coupling_constant(-1.6e9, N_ATOMS / N_C_TRUE, &spec, &CouplingOptions::default()).map_err(err)?;
    let atoms = CollectiveSpinState::pumped_z(N_ATOMS, 1.0);
    let light = StokesState::coherent_x(4.3e6, 1e-6);
    let mut rng = child_stream(0, 0, 0);
    let (outcomes, _) = run_pulse_train(
        1000,
        &atoms,
        &c,
        &light,
        &DestructionModel::default(),
        &DetectorSpec::default(),
        &TransmissionSpec::default(),
        &mut rng,
    )
    .map_err(err)?;
    let first = outcomes[0].theta_true;
    let last = outcomes[outcomes.len() - 1].theta_true;
    let loss = 1.0 - last / first;
    check((0.05..=0.10).contains(&loss), format!("signal loss over 1000 pulses {:.2}%", 100.0 * loss))
}

fn c6_qnd() -> Outcome {
    let mut rng = child_stream(6, 0, 0);
    let mut random_moments = |n: f64| {
        let dir = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let unit = if dir.norm() > 1e-9 { dir / dir.norm() } else { Vector3::z() };
        let mean = unit * rng.random_range(0.0..1.0) * n / 2.0;
        let var = Vector3::from_fn(|_, _| rng.random_range(0.0..1.0) * n / 4.0);
        (mean, var)
    };
    for _ in 0..10_000 {
        let na = 10f64.powf(random_moments(2.0).0.x + 5.0);
        let np = 10f64.powf(random_moments(2.0).0.y + 6.0);
        let (am, av) = random_moments(na);
        let (lm, lv) = random_moments(np);
        let atoms = CollectiveSpinState::new(am, av, na).map_err(err)?;
        let light = StokesState::new(lm, lv, np, 1e-6).map_err(err)?;
        let g = random_moments(2e-6).0.z;
        let (lo, ao) = qnd_interact(&light, &atoms, g).map_err(err)?;
        if lo.mean.z != light.mean.z || lo.var.z != light.var.z || ao.mean.z != atoms.mean.z || ao.var.z != atoms.var.z
        {
            return Err(format!("conservation broken for {light:?} / {atoms:?}"));
        }
    }

    let g = 5.4e-8;
    let light = StokesState::coherent_x(4.3e6, 1e-6);
    let atoms = CollectiveSpinState::coherent_x(N_ATOMS, 1.0);
    let (out, _) = qnd_interact(&light, &atoms, g).map_err(err)?;
    let mut rng = child_stream(6, 1, 0);
    let mut normal = |m: f64, v: f64| m + v.sqrt() * rng.sample::<f64, _>(StandardNormal);
    let samples: Vec<f64> = (0..100_000)
        .map(|_| {
            let sy = normal(light.mean.y, light.var.y);
            let sx = normal(light.mean.x, light.var.x);
            let jz = normal(atoms.mean.z, atoms.var.z);
            sy + g * jz * sx
        })
        .collect();
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let m2 = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = samples.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let var = m2 * n / (n - 1.0);
    let se = ((m4 - m2 * m2) / n).sqrt();
    let z = (var - out.var.y).abs() / se;
    check(
        z < 5.0,
        format!("10⁴ states conserve S_z, J_z moments; var(S_y) sampled/predicted = {:.5}, {z:.2} SE", var / out.var.y),
    )
}

fn c7_pseudospin() -> Outcome {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let cases = [
        ([c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)], [0.0, 0.0, 0.5]),
        ([c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)], [0.0, 0.0, -0.5]),
        ([c(h, 0.0), c(0.0, 0.0), c(h, 0.0)], [0.5, 0.0, 0.0]),
        ([c(h, 0.0), c(0.0, 0.0), c(-h, 0.0)], [-0.5, 0.0, 0.0]),
    ];
    let mut worst: f64 = 0.0;
    for (amps, want) in &cases {
        let j = single_atom_pseudospin(amps).map_err(err)?;
        for k in 0..3 {
            worst = worst.max((j[k] - want[k]).abs());
        }
    }
    check(worst <= 1e-12, format!("max deviation {worst:.1e}"))
}

fn c8_decay() -> Outcome {
    let v = effective_volume(8.5e-3 / FWHM_PER_SIGMA, 20e-6 / FWHM_PER_SIGMA);
    let p = TrapPopulationParams {
        n0: 1.2e6,
        lifetime_s: 1500.0,
        beta_m3_s: 8e-20,
        v_eff_m3: v,
    };
    let mut worst_ode: f64 = 0.0;
    for t in linspace(0.0, 90.0, 10) {
        let a = evolve_trap_population(&p, t).map_err(err)?;
        let b = evolve_trap_population_rk4(&p, t, 2000).map_err(err)?;
        worst_ode = worst_ode.max((a / b - 1.0).abs());
    }

    let exact: Vec<DecaySample> = linspace(0.0, 90.0, 31)
        .into_iter()
        .map(|t| {
            let n = evolve_trap_population(&p, t).unwrap();
            DecaySample { t_s: t, n_atoms: n, sigma_n: 0.02 * n }
        })
        .collect();
    let clean = fit_two_body_decay(&exact, v).map_err(err)?.param("beta_cm3_s").map_err(err)?;

    let mut rng = child_stream(0, 0, 0);
    let noisy = synthetic_decay_samples(&p, &linspace(0.0, 90.0, 91), 25, 0.02, &mut rng).map_err(err)?;
    let fit = fit_two_body_decay(&noisy, v).map_err(err)?;
    let beta = fit.param("beta_cm3_s").map_err(err)?;
    let tau = fit.param("tau_s").map_err(err)?;
    let tau_sigma = fit.sigma("tau_s").map_err(err)?;

    let (d_noisy, d_clean) = ((beta / 8e-14 - 1.0).abs(), (clean / 8e-14 - 1.0).abs());
    check(
        d_noisy <= 0.10 && d_clean <= 0.01 && worst_ode <= 1e-6 && fit.converged,
        format!(
            "β noisy {beta:.3e} ({:.1}%), noiseless {:.2e}%, τ = {tau:.0} ± {tau_sigma:.0} s, closed form vs RK4 {worst_ode:.1e}",
            100.0 * d_noisy,
            100.0 * d_clean
        ),
    )
}

fn c9_tof() -> Outcome {
    let mass = spec().mass_kg;
    let mut rng = child_stream(0, 0, 0);
    let samples = synthetic_tof_samples(8.5e-6, 25e-6, mass, &linspace(0.0, 4e-3, 17), 0.01, &mut rng).map_err(err)?;
    let fit = fit_tof_temperature(&samples, mass).map_err(err)?;
    let t = fit.param("temperature_k").map_err(err)? * 1e6;
    let dt = fit.sigma("temperature_k").map_err(err)? * 1e6;
    check((t - 25.0).abs() <= 0.5, format!("T = {t:.2} ± {dt:.2} µK"))
}

fn c10_trap() -> Outcome {
    let spec = spec();
    let trap = TrapSpec::new(1030e-9, 7.0, 50e-6).map_err(err)?;
    let depth = dipole_trap_depth(&trap, &spec).map_err(err)? * 1e6;
    let shift = light_shift(&trap, &spec).map_err(err)? / 1e6;
    let depth_ok = (depth / 260.0 - 1.0).abs() <= 0.3;
    let shift_ok = (shift / 12.0 - 1.0).abs() <= 0.3;
    check(
        depth_ok && shift_ok,
        format!(
            "depth {depth:.1} µK ({}), light shift {shift:.2} MHz ({}; band [8.4, 15.6])",
            if depth_ok { "ok" } else { "out of band" },
            if shift_ok { "ok" } else { "out of band" }
        ),
    )
}

fn c11_density() -> Outcome {
    let n = peak_density(1.2e6, 8.5e-3 / FWHM_PER_SIGMA, 20e-6 / FWHM_PER_SIGMA).map_err(err)? * 1e-6;
    let ratio = n / 5e11;
    check((0.5..=2.0).contains(&ratio), format!("peak density {n:.3e} cm⁻³ ({ratio:.2}× 5e11)"))
}

fn c12_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let run_scan = |name: &str, threads: &str| -> Result<Vec<u8>, String> {
        let out = dir.path().join(name);
        let cli = Cli::try_parse_from([
            "coldspin",
            "--threads",
            threads,
            "--seed",
            "12",
            "scan",
            "--out",
            out.to_str().unwrap(),
        ])
        .map_err(err)?;
        run(&cli).map_err(err)?;
        fs::read(&out).map_err(err)
    };
    let a = run_scan("a.csv", "1")?;
    let b = run_scan("b.csv", "1")?;
    let c = run_scan("c.csv", "4")?;
    check(
        a == b && a == c && !a.is_empty(),
        format!("{} bytes, identical across two runs and 1 vs 4 threads", a.len()),
    )
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("OD from column density", Duration::from_secs(1), c1_od),
        ("column-density fit round trip", Duration::from_secs(30), c2_scan_fit),
        ("SNR closed form and Monte Carlo", Duration::from_secs(10), c3_snr),
        ("photon budget", Duration::from_secs(1), c4_budget),
        ("destruction over 1000 pulses", Duration::from_secs(5), c5_destruction),
        ("QND conservation and variance", Duration::from_secs(60), c6_qnd),
        ("pseudo-spin oracle", Duration::from_secs(1), c7_pseudospin),
        ("two-body decay fit", Duration::from_secs(10), c8_decay),
        ("TOF temperature", Duration::from_secs(5), c9_tof),
        ("trap depth and light shift", Duration::from_secs(1), c10_trap),
        ("peak density", Duration::from_secs(1), c11_density),
        ("scan determinism", Duration::from_secs(30), c12_determinism),
    ];
    let mut failed = 0;
    for (i, (name, budget, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let in_time = elapsed <= *budget;
        let (pass, detail) = match outcome {
            Ok(d) => (in_time, d),
            Err(d) => (false, d),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} [{:>2}] {name}: {detail} ({:.3} s{})",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64(),
            if in_time { String::new() } else { format!(", over {} s budget", budget.as_secs()) }
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
