//! Synthetic experiments: pulse trains on one sample and detuning scans over
//! many independently prepared samples.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atomic::AtomSpec;
use crate::detector::{extract_angle, simulate_pulse_detection, DetectorSpec, NoiseSource, TransmissionSpec};
use crate::error::{Error, Result};
use crate::format_sci;
use crate::spin_optics::{coupling_constant, detuning_factor, faraday_angle, CollectiveSpinState, CouplingOptions, CouplingParams, StokesState};
use crate::atomic::ExcitedLevel;

/// Loss of ⟨J_z⟩ per probe pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DestructionModel {
    pub per_pulse_decay: f64,
}

impl Default for DestructionModel {
    /// 1000 pulses leave (1 − 10⁻⁴)¹⁰⁰⁰ ≈ 90.5 % of the signal.
    fn default() -> Self {
        DestructionModel { per_pulse_decay: 1e-4 }
    }
}

impl DestructionModel {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.per_pulse_decay) {
            return Err(Error::validation(
                "per_pulse_decay",
                format!("must lie in [0, 1), got {}", self.per_pulse_decay),
            ));
        }
        Ok(())
    }

    /// Fraction of the initial signal remaining on pulse `index` (0-based).
    pub fn remaining(&self, index: usize) -> f64 {
        (1.0 - self.per_pulse_decay).powi(index as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseOutcome {
    pub index: usize,
    /// Rotation imprinted by the ensemble on this pulse.
    pub theta_true: f64,
    /// Measured photon-number imbalance ΔN′.
    pub delta_n: f64,
    pub theta_hat: f64,
}

/// Probes one sample `n_pulses` times. The ensemble loses a fraction ε of
/// ⟨J_z⟩ after each pulse; the decayed state is returned with the outcomes.
#[allow(clippy::too_many_arguments)]
pub fn run_pulse_train<N: NoiseSource + ?Sized>(
    n_pulses: usize,
    atoms: &CollectiveSpinState,
    coupling: &CouplingParams,
    light: &StokesState,
    destruction: &DestructionModel,
    det: &DetectorSpec,
    tr: &TransmissionSpec,
    noise: &mut N,
) -> Result<(Vec<PulseOutcome>, CollectiveSpinState)> {
    atoms.validate()?;
    light.validate()?;
    destruction.validate()?;
    det.validate()?;
    tr.validate()?;

    let mut state = *atoms;
    let mut outcomes = Vec::with_capacity(n_pulses);
    for index in 0..n_pulses {
        let theta_true = faraday_angle(&state, coupling.g);
        let delta_n = simulate_pulse_detection(theta_true, light.n_photons, det, tr, noise)?;
        let theta_hat = extract_angle(delta_n, light.n_photons, tr)?;
        outcomes.push(PulseOutcome {
            index,
            theta_true,
            delta_n,
            theta_hat,
        });
        state.mean.z *= 1.0 - destruction.per_pulse_decay;
    }
    Ok((outcomes, state))
}

/// Signal-to-noise ratio of a train averaged over `n_runs` independent runs.
///
/// Signal is the mean run-averaged θ̂; noise is the spread of the averaged θ̂
/// about the noiseless decaying signal, so the slow destruction drift is not
/// counted as noise.
#[allow(clippy::too_many_arguments)]
pub fn averaged_train_snr(
    n_runs: usize,
    n_pulses: usize,
    atoms: &CollectiveSpinState,
    coupling: &CouplingParams,
    light: &StokesState,
    destruction: &DestructionModel,
    det: &DetectorSpec,
    tr: &TransmissionSpec,
    seed: u64,
) -> Result<f64> {
    if n_runs == 0 || n_pulses < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: n_pulses.min(n_runs),
        });
    }
    let mut averaged = vec![0.0; n_pulses];
    let mut truth = vec![0.0; n_pulses];
    for run in 0..n_runs {
        let mut rng = child_stream(seed, 0, run as u64);
        let (outcomes, _) = run_pulse_train(n_pulses, atoms, coupling, light, destruction, det, tr, &mut rng)?;
        for ((acc, t), o) in averaged.iter_mut().zip(truth.iter_mut()).zip(&outcomes) {
            *acc += o.theta_hat / n_runs as f64;
            *t += o.theta_true / n_runs as f64;
        }
    }
    let residuals: Vec<f64> = averaged.iter().zip(&truth).map(|(a, t)| a - t).collect();
    let (mean, _) = mean_and_std(&averaged);
    let (_, noise) = mean_and_std(&residuals);
    Ok(mean / noise)
}

/// Independent random stream for (detuning index, run index) under `seed`.
pub fn child_stream(seed: u64, point: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((point << 32) | (run & 0xffff_ffff));
    rng
}

/// Sample mean and (n − 1) standard deviation.
pub fn mean_and_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n)
            .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub detunings_hz: Vec<f64>,
    pub photons_per_pulse: f64,
    pub pulse_duration_s: f64,
    pub pulse_period_s: f64,
    pub pulses_per_sample: usize,
    pub runs_per_point: usize,
    /// Relative spread of the loaded atom number from one sample to the next.
    pub atom_number_rel_sigma: f64,
    pub seed: u64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            detunings_hz: linspace(-2.3e9, -0.8e9, 15),
            photons_per_pulse: 4e6,
            pulse_duration_s: 1e-6,
            pulse_period_s: 20e-6,
            pulses_per_sample: 10,
            runs_per_point: 40,
            atom_number_rel_sigma: 0.1,
            seed: 0,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.detunings_hz.is_empty() {
            return Err(Error::validation("detunings_hz", "at least one detuning required"));
        }
        if self.detunings_hz.iter().any(|d| !d.is_finite()) {
            return Err(Error::validation("detunings_hz", "detunings must be finite"));
        }
        if !(self.photons_per_pulse.is_finite() && self.photons_per_pulse >= 1.0) {
            return Err(Error::validation("photons_per_pulse", "must be >= 1"));
        }
        if !(self.pulse_duration_s > 0.0 && self.pulse_period_s > self.pulse_duration_s) {
            return Err(Error::validation(
                "pulse_period_s",
                format!(
                    "period {} must exceed duration {} > 0",
                    self.pulse_period_s, self.pulse_duration_s
                ),
            ));
        }
        if self.pulses_per_sample == 0 {
            return Err(Error::validation("pulses_per_sample", "must be >= 1"));
        }
        if self.runs_per_point == 0 {
            return Err(Error::validation("runs_per_point", "must be >= 1"));
        }
        if !(self.atom_number_rel_sigma.is_finite() && self.atom_number_rel_sigma >= 0.0) {
            return Err(Error::validation("atom_number_rel_sigma", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub detuning_hz: f64,
    pub theta_mean_rad: f64,
    /// Standard error of the mean over runs.
    pub theta_stderr_rad: f64,
    /// Sample standard deviation of the per-run angles.
    pub theta_stddev_rad: f64,
    pub n_runs: usize,
    /// Pulses per run.
    pub n_pulses: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScanDataset {
    pub records: Vec<ScanRecord>,
}

pub const SCAN_CSV_HEADER: &str =
    "detuning_hz,theta_mean_rad,theta_stderr_rad,theta_stddev_rad,n_runs,n_pulses";

impl ScanDataset {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{SCAN_CSV_HEADER}")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                format_sci(r.detuning_hz),
                format_sci(r.theta_mean_rad),
                format_sci(r.theta_stderr_rad),
                format_sci(r.theta_stddev_rad),
                r.n_runs,
                r.n_pulses
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }

    /// Parses the CSV layout written by [`ScanDataset::write_csv`]. Row numbers
    /// in errors are 1-based file lines.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Csv {
            row: 1,
            reason: "empty file".into(),
        })?;
        let columns: Vec<&str> = header.split(',').map(str::trim).collect();
        let expected: Vec<&str> = SCAN_CSV_HEADER.split(',').collect();
        if columns != expected {
            return Err(Error::Csv {
                row: 1,
                reason: format!("expected header `{SCAN_CSV_HEADER}`, got `{header}`"),
            });
        }
        let mut records = Vec::new();
        for (i, line) in lines {
            let row = i + 1;
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != expected.len() {
                return Err(Error::Csv {
                    row,
                    reason: format!("expected {} fields, got {}", expected.len(), fields.len()),
                });
            }
            let float = |k: usize| -> Result<f64> {
                fields[k]
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Csv {
                        row,
                        reason: format!("column `{}`: cannot parse `{}`", expected[k], fields[k]),
                    })
            };
            let count = |k: usize| -> Result<usize> {
                fields[k].parse::<usize>().map_err(|_| Error::Csv {
                    row,
                    reason: format!("column `{}`: cannot parse `{}`", expected[k], fields[k]),
                })
            };
            let record = ScanRecord {
                detuning_hz: float(0)?,
                theta_mean_rad: float(1)?,
                theta_stderr_rad: float(2)?,
                theta_stddev_rad: float(3)?,
                n_runs: count(4)?,
                n_pulses: count(5)?,
            };
            if record.theta_stderr_rad < 0.0 || record.theta_stddev_rad < 0.0 {
                return Err(Error::Csv {
                    row,
                    reason: "negative uncertainty".into(),
                });
            }
            records.push(record);
        }
        if records.is_empty() {
            return Err(Error::Csv {
                row: 2,
                reason: "no data rows".into(),
            });
        }
        Ok(ScanDataset { records })
    }
}

/// Everything a detuning scan needs besides the scan grid itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSetup<'a> {
    /// Sample prepared before probing; rescaled per run by the atom-number fluctuation.
    pub atoms: &'a CollectiveSpinState,
    pub spec: &'a AtomSpec,
    pub area_m2: f64,
    pub detector: &'a DetectorSpec,
    pub transmission: &'a TransmissionSpec,
    pub destruction: &'a DestructionModel,
    pub coupling: &'a CouplingOptions,
}

/// Detuning scan: for each detuning, `runs_per_point` freshly prepared
/// samples each probed `pulses_per_sample` times. Runs execute in parallel;
/// each owns a stream derived from (seed, detuning index, run index).
pub fn run_detuning_scan(cfg: &ScanConfig, setup: &ScanSetup<'_>) -> Result<ScanDataset> {
    cfg.validate()?;
    let mut detunings = cfg.detunings_hz.clone();
    detunings.sort_by(f64::total_cmp);

    let couplings = detunings
        .iter()
        .map(|&d| coupling_constant(d, setup.area_m2, setup.spec, setup.coupling))
        .collect::<Result<Vec<_>>>()?;
    let light = StokesState::coherent_x(cfg.photons_per_pulse, cfg.pulse_duration_s);

    let jobs: Vec<(usize, usize)> = (0..detunings.len())
        .flat_map(|p| (0..cfg.runs_per_point).map(move |r| (p, r)))
        .collect();
    let per_run = jobs
        .par_iter()
        .map(|&(point, run)| {
            let mut rng = child_stream(cfg.seed, point as u64, run as u64);
            let z: f64 = rng.sample(StandardNormal);
            let factor = (1.0 + cfg.atom_number_rel_sigma * z).max(0.0);
            let atoms = scale_atoms(setup.atoms, factor);
            let (outcomes, _) = run_pulse_train(
                cfg.pulses_per_sample,
                &atoms,
                &couplings[point],
                &light,
                setup.destruction,
                setup.detector,
                setup.transmission,
                &mut rng,
            )?;
            Ok(outcomes.iter().map(|o| o.theta_hat).sum::<f64>() / outcomes.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;

    let records = per_run
        .chunks(cfg.runs_per_point)
        .zip(&detunings)
        .map(|(thetas, &detuning_hz)| {
            let (mean, std) = mean_and_std(thetas);
            ScanRecord {
                detuning_hz,
                theta_mean_rad: mean,
                theta_stderr_rad: std / (thetas.len() as f64).sqrt(),
                theta_stddev_rad: std,
                n_runs: thetas.len(),
                n_pulses: cfg.pulses_per_sample,
            }
        })
        .collect();
    Ok(ScanDataset { records })
}

fn scale_atoms(atoms: &CollectiveSpinState, factor: f64) -> CollectiveSpinState {
    CollectiveSpinState {
        mean: atoms.mean * factor,
        var: atoms.var * factor,
        n_atoms: atoms.n_atoms * factor,
    }
}

/// Per-atom, per-pulse photon scattering estimate N_L·σ₀·(Γ/2Δ)²/A.
///
/// An upper bound on the destruction rate; the measured loss is well below it.
pub fn scattering_probability(
    detuning_hz: f64,
    n_photons: f64,
    area_m2: f64,
    spec: &AtomSpec,
    opts: &CouplingOptions,
) -> Result<f64> {
    for level in ExcitedLevel::ALL {
        detuning_factor(detuning_hz, level, spec, opts)?;
    }
    if !(area_m2 > 0.0) {
        return Err(Error::validation("area_m2", format!("must be > 0, got {area_m2}")));
    }
    let x = spec.linewidth_hz / (2.0 * detuning_hz);
    Ok(n_photons * spec.cross_section_m2() * x * x / area_m2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use crate::detector::Noiseless;

    const AREA: f64 = 1e6 / 2.65e14;

    fn coupling(delta: f64) -> CouplingParams {
        coupling_constant(delta, AREA, &AtomSpec::rubidium87_d2(), &CouplingOptions::default()).unwrap()
    }

    #[test]
    fn train_without_destruction_is_flat() {
        let atoms = CollectiveSpinState::pumped_z(1e6, 1.0);
        let light = StokesState::coherent_x(4.3e6, 1e-6);
        let dm = DestructionModel { per_pulse_decay: 0.0 };
        let (out, after) = run_pulse_train(
            50,
            &atoms,
            &coupling(-1.6e9),
            &light,
            &dm,
            &DetectorSpec::default(),
            &TransmissionSpec::default(),
            &mut Noiseless,
        )
        .unwrap();
        assert_eq!(out.len(), 50);
        assert!(out.iter().all(|o| o.theta_hat == out[0].theta_hat));
        assert_eq!(after, atoms);
    }

    #[test]
    fn train_destruction_over_1000_pulses() {
        let atoms = CollectiveSpinState::pumped_z(1e6, 1.0);
        let light = StokesState::coherent_x(4.3e6, 1e-6);
        let (out, after) = run_pulse_train(
            1000,
            &atoms,
            &coupling(-1.6e9),
            &light,
            &DestructionModel::default(),
            &DetectorSpec::default(),
            &TransmissionSpec::default(),
            &mut Noiseless,
        )
        .unwrap();
        let ratio = after.mean.z / atoms.mean.z;
        assert_relative_eq!(ratio, (1.0 - 1e-4_f64).powi(1000), max_relative = 1e-12);
        assert!((ratio - 0.905).abs() < 1e-3);
        assert_relative_eq!(out[999].theta_true / out[0].theta_true, DestructionModel::default().remaining(999), max_relative = 1e-12);
    }

    #[test]
    fn empty_train() {
        let atoms = CollectiveSpinState::pumped_z(1e6, 1.0);
        let (out, after) = run_pulse_train(
            0,
            &atoms,
            &coupling(-1.6e9),
            &StokesState::coherent_x(4.3e6, 1e-6),
            &DestructionModel::default(),
            &DetectorSpec::default(),
            &TransmissionSpec::default(),
            &mut Noiseless,
        )
        .unwrap();
        assert!(out.is_empty());
        assert_eq!(after, atoms);
    }

    #[test]
    fn destruction_bounds() {
        assert!(DestructionModel { per_pulse_decay: 1.0 }.validate().is_err());
        assert!(DestructionModel { per_pulse_decay: -0.1 }.validate().is_err());
    }

    #[test]
    fn scattering_probability_values() {
        let spec = AtomSpec::rubidium87_d2();
        let opts = CouplingOptions::default();
        assert_eq!(scattering_probability(-1.6e9, 0.0, 3.77e-9, &spec, &opts).unwrap(), 0.0);
        let p = scattering_probability(-1.6e9, 4.3e6, 3.77e-9, &spec, &opts).unwrap();
        assert!((p - 8e-4).abs() < 0.3e-4, "p = {p}");
        let q = scattering_probability(-6.4e9, 4.3e6, 3.77e-9, &spec, &opts).unwrap();
        assert_relative_eq!(p / q, 16.0, max_relative = 1e-12);
        assert!(scattering_probability(1e6, 4.3e6, 3.77e-9, &spec, &opts).is_err());
    }

    #[test]
    fn scan_config_validation() {
        let mut cfg = ScanConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.pulse_period_s = 0.5e-6;
        assert!(cfg.validate().is_err());
        let cfg = ScanConfig {
            runs_per_point: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let ds = ScanDataset {
            records: vec![ScanRecord {
                detuning_hz: -1.6e9,
                theta_mean_rad: 0.0268,
                theta_stderr_rad: 4e-4,
                theta_stddev_rad: 2.5e-3,
                n_runs: 40,
                n_pulses: 10,
            }],
        };
        let text = ds.to_csv_string();
        assert_eq!(ScanDataset::from_csv_str(&text).unwrap(), ds);
        assert!(text.contains("-1.60000000000e9"));

        assert!(matches!(ScanDataset::from_csv_str(""), Err(Error::Csv { row: 1, .. })));
        let bad = format!("{SCAN_CSV_HEADER}\n-1e9,0.01,1e-4,1e-3,40,10\n-1e9,abc,1e-4,1e-3,40,10\n");
        match ScanDataset::from_csv_str(&bad) {
            Err(Error::Csv { row, .. }) => assert_eq!(row, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
