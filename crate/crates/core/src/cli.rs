//! Command-line front end.
//!
//! Every command resolves its inputs into one serializable [`Invocation`],
//! runs it, writes its output files and then a [`RunManifest`] recording the
//! invocation, seed, tool version and SHA-256 of every input and output.
//! Running with `--manifest PATH` and no subcommand replays a manifest and
//! checks that the outputs are byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    compute_od, fit_column_density_with, fit_tof_temperature, fit_two_body_decay, photon_budget,
    rotation_model, ColumnDensityFitOptions, DecaySample, TofSample, Weighting, OD,
};
use crate::atomic::{load_atom_spec, AtomSpec};
use crate::detector::{
    extract_angle, simulate_pulse_detection, synthesize_waveform, DetectorSpec, Noiseless, TransmissionSpec,
};
use crate::dynamics::{
    effective_volume, synthetic_decay_samples, synthetic_tof_samples, TrapPopulationParams, FWHM_PER_SIGMA,
};
use crate::error::Error;
use crate::experiment::{child_stream, linspace, run_detuning_scan, DestructionModel, ScanConfig, ScanDataset, ScanSetup};
use crate::format_sci;
use crate::spin_optics::{CollectiveSpinState, CouplingOptions};

/// Environment variable naming an atomic-data JSON file that replaces the built-in constants.
pub const ATOM_DATA_ENV: &str = "COLDSPIN_ATOM_DATA";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Points in the model curve written next to a scan.
const CURVE_POINTS: usize = 200;

#[derive(Debug, Parser)]
#[command(name = "coldspin", version, about = "Faraday-rotation probe simulator and analysis tools")]
pub struct Cli {
    /// JSON configuration for the chosen command.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured RNG seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Primary output file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// With a command: where to write the manifest. Alone: manifest to replay.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Worker threads for parallel scans (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a detuning scan and write the mean rotation per detuning.
    Scan {
        /// Atoms per sample.
        #[arg(long)]
        atoms: Option<f64>,
        /// Column density n_c in m⁻²; sets the probed area to atoms/n_c.
        #[arg(long)]
        column_density: Option<f64>,
    },
    /// Fit the column density to a scan CSV.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        weighting: Option<WeightingArg>,
    },
    /// Photons needed to resolve an angle at atom-noise-limited SNR.
    Budget {
        /// Required ratio of atomic projection noise to photon shot noise.
        #[arg(long)]
        a: f64,
        #[arg(long)]
        atoms: f64,
        #[arg(long)]
        theta: f64,
        #[arg(long, default_value_t = 4.3e6)]
        photons_per_pulse: f64,
    },
    /// Trap-loss data: simulate or fit.
    Decay {
        #[command(subcommand)]
        mode: DecayMode,
    },
    /// Time-of-flight thermometry: simulate or fit.
    Tof {
        #[command(subcommand)]
        mode: TofMode,
    },
    /// Write the detector waveform of one probe pulse.
    Pulse {
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        photons: Option<f64>,
        /// Disable shot and electronic noise.
        #[arg(long)]
        noiseless: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum DecayMode {
    Simulate,
    Fit {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum TofMode {
    Simulate,
    Fit {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum WeightingArg {
    Stddev,
    Stderr,
    Unweighted,
}

impl From<WeightingArg> for Weighting {
    fn from(w: WeightingArg) -> Self {
        match w {
            WeightingArg::Stddev => Weighting::StandardDeviation,
            WeightingArg::Stderr => Weighting::StandardError,
            WeightingArg::Unweighted => Weighting::Unweighted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanRunConfig {
    pub scan: ScanConfig,
    pub n_atoms: f64,
    pub area_m2: f64,
    /// +1 or −1: which stretched state the ensemble is pumped into.
    pub pumping_sign: f64,
    pub detector: DetectorSpec,
    pub transmission: TransmissionSpec,
    pub destruction: DestructionModel,
    pub coupling: CouplingOptions,
}

impl Default for ScanRunConfig {
    fn default() -> Self {
        ScanRunConfig {
            scan: ScanConfig::default(),
            n_atoms: 1e6,
            area_m2: 1e6 / 2.65e14,
            pumping_sign: 1.0,
            detector: DetectorSpec::default(),
            transmission: TransmissionSpec::default(),
            destruction: DestructionModel::default(),
            coupling: CouplingOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitRunConfig {
    pub input: PathBuf,
    pub options: ColumnDensityFitOptions,
}

impl Default for FitRunConfig {
    fn default() -> Self {
        FitRunConfig {
            input: PathBuf::from("scan.csv"),
            options: ColumnDensityFitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetConfig {
    pub a: f64,
    pub n_atoms: f64,
    pub theta_rad: f64,
    pub photons_per_pulse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecayConfig {
    pub n0: f64,
    /// Background-limited lifetime; `null` in JSON means no one-body loss.
    pub lifetime_s: Option<f64>,
    pub beta_cm3_s: f64,
    pub fwhm_z_m: f64,
    pub fwhm_r_m: f64,
    pub t_max_s: f64,
    pub n_times: usize,
    pub shots_per_time: usize,
    pub rel_noise: f64,
    pub seed: u64,
    /// Data to fit; unused when simulating.
    pub input: Option<PathBuf>,
}

impl Default for DecayConfig {
    fn default() -> Self {
        DecayConfig {
            n0: 1.2e6,
            lifetime_s: Some(1500.0),
            beta_cm3_s: 8e-14,
            fwhm_z_m: 8.5e-3,
            fwhm_r_m: 20e-6,
            t_max_s: 90.0,
            n_times: 91,
            shots_per_time: 25,
            rel_noise: 0.02,
            seed: 0,
            input: None,
        }
    }
}

impl DecayConfig {
    pub fn v_eff_m3(&self) -> f64 {
        effective_volume(self.fwhm_z_m / FWHM_PER_SIGMA, self.fwhm_r_m / FWHM_PER_SIGMA)
    }

    pub fn population_params(&self) -> TrapPopulationParams {
        TrapPopulationParams {
            n0: self.n0,
            lifetime_s: self.lifetime_s.unwrap_or(f64::INFINITY),
            beta_m3_s: self.beta_cm3_s * 1e-6,
            v_eff_m3: self.v_eff_m3(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TofConfig {
    pub temperature_k: f64,
    pub sigma0_m: f64,
    pub t_max_s: f64,
    pub n_times: usize,
    pub rel_noise: f64,
    pub seed: u64,
    pub input: Option<PathBuf>,
}

impl Default for TofConfig {
    fn default() -> Self {
        TofConfig {
            temperature_k: 25e-6,
            sigma0_m: 8.5e-6,
            t_max_s: 4e-3,
            n_times: 17,
            rel_noise: 0.01,
            seed: 0,
            input: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseConfig {
    pub theta_rad: f64,
    pub n_photons: f64,
    pub pulse_duration_s: f64,
    pub noisy: bool,
    pub detector: DetectorSpec,
    pub transmission: TransmissionSpec,
    pub seed: u64,
}

impl Default for PulseConfig {
    fn default() -> Self {
        PulseConfig {
            theta_rad: 0.0268,
            n_photons: 4.3e6,
            pulse_duration_s: 1e-6,
            noisy: true,
            detector: DetectorSpec::default(),
            transmission: TransmissionSpec::default(),
            seed: 0,
        }
    }
}

/// A fully resolved command, as stored in a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "config", rename_all = "snake_case")]
pub enum Invocation {
    Scan(ScanRunConfig),
    Fit(FitRunConfig),
    Budget(BudgetConfig),
    DecaySimulate(DecayConfig),
    DecayFit(DecayConfig),
    TofSimulate(TofConfig),
    TofFit(TofConfig),
    Pulse(PulseConfig),
}

impl Invocation {
    fn seed(&self) -> Option<u64> {
        match self {
            Invocation::Scan(c) => Some(c.scan.seed),
            Invocation::DecaySimulate(c) => Some(c.seed),
            Invocation::TofSimulate(c) => Some(c.seed),
            Invocation::Pulse(c) if c.noisy => Some(c.seed),
            _ => None,
        }
    }

    fn default_out(&self) -> &'static str {
        match self {
            Invocation::Scan(_) => "scan.csv",
            Invocation::Fit(_) => "fit.json",
            Invocation::Budget(_) => "budget.json",
            Invocation::DecaySimulate(_) => "decay.csv",
            Invocation::DecayFit(_) => "decay_fit.json",
            Invocation::TofSimulate(_) => "tof.csv",
            Invocation::TofFit(_) => "tof_fit.json",
            Invocation::Pulse(_) => "pulse.csv",
        }
    }

    fn input(&self) -> Option<&Path> {
        match self {
            Invocation::Fit(c) => Some(&c.input),
            Invocation::DecayFit(c) => c.input.as_deref(),
            Invocation::TofFit(c) => c.input.as_deref(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub atom_data: serde_json::Value,
    #[serde(flatten)]
    pub invocation: Invocation,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

/// Failure of a CLI run, carrying the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config { .. }
            | Error::Validation { .. }
            | Error::NearResonance { .. }
            | Error::Csv { .. }
            | Error::Io(_)
            | Error::Json(_) => EXIT_CONFIG,
            Error::InsufficientData { .. }
            | Error::Degenerate(_)
            | Error::Unphysical(_)
            | Error::MissingParameter(_) => EXIT_NUMERIC,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn config_error(message: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_CONFIG,
        message: message.into(),
    }
}

fn numeric_error(message: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_NUMERIC,
        message: message.into(),
    }
}

/// What a successful run produced.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub manifest_path: PathBuf,
    pub manifest: RunManifest,
    /// One human-readable line per output.
    pub summary: Vec<String>,
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(report) => {
            for line in &report.summary {
                println!("{line}");
            }
            println!("manifest: {}", report.manifest_path.display());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

pub fn run(cli: &Cli) -> Result<RunReport, CliError> {
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = cli.threads {
            if n == 0 {
                return Err(config_error("--threads must be >= 1"));
            }
            b = b.num_threads(n);
        }
        b.build().map_err(|e| config_error(format!("thread pool: {e}")))?
    };
    pool.install(|| run_in_pool(cli))
}

fn run_in_pool(cli: &Cli) -> Result<RunReport, CliError> {
    let atom = resolve_atom_spec()?;
    match &cli.command {
        None => {
            let path = cli
                .manifest
                .as_ref()
                .ok_or_else(|| config_error("no command given; pass a subcommand or --manifest PATH to replay"))?;
            replay(path, cli.out.as_deref(), &atom)
        }
        Some(cmd) => {
            let invocation = resolve(cmd, cli)?;
            let out = cli
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from(invocation.default_out()));
            let manifest_path = cli.manifest.clone().unwrap_or_else(|| manifest_path_for(&out));
            execute(invocation, &out, &manifest_path, &atom)
        }
    }
}

/// `<out>.manifest.json`.
pub fn manifest_path_for(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// `<stem>_curve.csv` next to a scan output.
pub fn curve_path_for(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "scan".into());
    out.with_file_name(format!("{stem}_curve.csv"))
}

fn resolve_atom_spec() -> Result<AtomSpec, CliError> {
    match std::env::var_os(ATOM_DATA_ENV) {
        Some(path) => {
            let text = fs::read_to_string(&path)
                .map_err(|e| config_error(format!("{ATOM_DATA_ENV}={}: {e}", Path::new(&path).display())))?;
            Ok(load_atom_spec(&text)?)
        }
        None => Ok(AtomSpec::default()),
    }
}

fn load_config<T: Default + for<'de> Deserialize<'de>>(path: Option<&Path>) -> Result<T, CliError> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| config_error(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", p.display())))
        }
    }
}

fn resolve(cmd: &Command, cli: &Cli) -> Result<Invocation, CliError> {
    let cfg_path = cli.config.as_deref();
    let inv = match cmd {
        Command::Scan { atoms, column_density } => {
            let mut c: ScanRunConfig = load_config(cfg_path)?;
            if let Some(n) = atoms {
                c.n_atoms = *n;
            }
            if let Some(nc) = column_density {
                if !(*nc > 0.0 && nc.is_finite()) {
                    return Err(config_error("--column-density must be > 0"));
                }
                c.area_m2 = c.n_atoms.max(1.0) / nc;
            }
            if let Some(s) = cli.seed {
                c.scan.seed = s;
            }
            Invocation::Scan(c)
        }
        Command::Fit { input, weighting } => {
            let mut c: FitRunConfig = load_config(cfg_path)?;
            c.input = input.clone();
            if let Some(w) = weighting {
                c.options.weighting = (*w).into();
            }
            Invocation::Fit(c)
        }
        Command::Budget {
            a,
            atoms,
            theta,
            photons_per_pulse,
        } => Invocation::Budget(BudgetConfig {
            a: *a,
            n_atoms: *atoms,
            theta_rad: *theta,
            photons_per_pulse: *photons_per_pulse,
        }),
        Command::Decay { mode } => {
            let mut c: DecayConfig = load_config(cfg_path)?;
            if let Some(s) = cli.seed {
                c.seed = s;
            }
            match mode {
                DecayMode::Simulate => Invocation::DecaySimulate(c),
                DecayMode::Fit { input } => {
                    c.input = Some(input.clone());
                    Invocation::DecayFit(c)
                }
            }
        }
        Command::Tof { mode } => {
            let mut c: TofConfig = load_config(cfg_path)?;
            if let Some(s) = cli.seed {
                c.seed = s;
            }
            match mode {
                TofMode::Simulate => Invocation::TofSimulate(c),
                TofMode::Fit { input } => {
                    c.input = Some(input.clone());
                    Invocation::TofFit(c)
                }
            }
        }
        Command::Pulse {
            theta,
            photons,
            noiseless,
        } => {
            let mut c: PulseConfig = load_config(cfg_path)?;
            if let Some(t) = theta {
                c.theta_rad = *t;
            }
            if let Some(n) = photons {
                c.n_photons = *n;
            }
            if *noiseless {
                c.noisy = false;
            }
            if let Some(s) = cli.seed {
                c.seed = s;
            }
            Invocation::Pulse(c)
        }
    };
    Ok(inv)
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read_input(path: &Path) -> Result<(String, FileDigest), CliError> {
    let bytes = fs::read(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    let digest = FileDigest {
        path: path.to_path_buf(),
        sha256: sha256_hex(&bytes),
    };
    let text = String::from_utf8(bytes).map_err(|_| config_error(format!("{}: not UTF-8", path.display())))?;
    Ok((text, digest))
}

/// Runs the invocation and returns (path, contents, summary) per output file.
fn produce(inv: &Invocation, out: &Path, atom: &AtomSpec) -> Result<Vec<(PathBuf, Vec<u8>, String)>, CliError> {
    match inv {
        Invocation::Scan(c) => {
            if !(c.n_atoms >= 0.0 && c.n_atoms.is_finite()) {
                return Err(config_error("n_atoms must be finite and >= 0"));
            }
            if c.pumping_sign != 1.0 && c.pumping_sign != -1.0 {
                return Err(config_error("pumping_sign must be +1 or -1"));
            }
            let atoms = CollectiveSpinState::pumped_z(c.n_atoms, c.pumping_sign);
            let setup = ScanSetup {
                atoms: &atoms,
                spec: atom,
                area_m2: c.area_m2,
                detector: &c.detector,
                transmission: &c.transmission,
                destruction: &c.destruction,
                coupling: &c.coupling,
            };
            let data = run_detuning_scan(&c.scan, &setup)?;
            let scan_csv = data.to_csv_string();

            let lo = c.scan.detunings_hz.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = c.scan.detunings_hz.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let n_c = c.pumping_sign * c.n_atoms / c.area_m2;
            let mut curve = String::from("detuning_hz,theta_model_rad\n");
            let points = if lo == hi { 1 } else { CURVE_POINTS };
            for d in linspace(lo, hi, points) {
                let theta = rotation_model(n_c, d, atom, &c.coupling)?;
                curve.push_str(&format!("{},{}\n", format_sci(d), format_sci(theta)));
            }
            Ok(vec![
                (
                    out.to_path_buf(),
                    scan_csv.into_bytes(),
                    format!("{}: {} detunings", out.display(), data.records.len()),
                ),
                (
                    curve_path_for(out),
                    curve.into_bytes(),
                    format!("{}: model curve, {points} points", curve_path_for(out).display()),
                ),
            ])
        }
        Invocation::Fit(c) => {
            let (text, _) = read_input(&c.input)?;
            let data = ScanDataset::from_csv_str(&text)?;
            let mut fit = fit_column_density_with(&data, atom, &c.options)?;
            let (od, od_sigma) = compute_od(&fit, atom)?;
            fit.params.insert(OD.into(), od);
            fit.sigmas.insert(OD.into(), od_sigma);
            let line = format!(
                "n_c = {} ± {} m^-2, OD = {:.3}",
                format_sci(fit.params["n_c"]),
                format_sci(fit.sigmas["n_c"]),
                od
            );
            Ok(vec![(out.to_path_buf(), json_bytes(&fit), line)])
        }
        Invocation::Budget(c) => {
            let n_photons = photon_budget(c.a, c.n_atoms, c.theta_rad)?;
            if !(c.photons_per_pulse > 0.0) {
                return Err(config_error("--photons-per-pulse must be > 0"));
            }
            let n_pulses = (n_photons / c.photons_per_pulse).ceil();
            let value = serde_json::json!({
                "a": c.a,
                "n_atoms": c.n_atoms,
                "theta_rad": c.theta_rad,
                "n_photons": n_photons,
                "photons_per_pulse": c.photons_per_pulse,
                "n_pulses": n_pulses,
            });
            let line = format!("N_p = {} ({} pulses)", format_sci(n_photons), n_pulses);
            Ok(vec![(out.to_path_buf(), json_bytes(&value), line)])
        }
        Invocation::DecaySimulate(c) => {
            let times = decay_times(c)?;
            let mut rng = child_stream(c.seed, 0, 0);
            let samples =
                synthetic_decay_samples(&c.population_params(), &times, c.shots_per_time, c.rel_noise, &mut rng)?;
            let mut csv = String::from("t_s,n_atoms,sigma_n\n");
            for s in &samples {
                csv.push_str(&format!("{},{},{}\n", format_sci(s.t_s), format_sci(s.n_atoms), format_sci(s.sigma_n)));
            }
            let line = format!("{}: {} time points", out.display(), samples.len());
            Ok(vec![(out.to_path_buf(), csv.into_bytes(), line)])
        }
        Invocation::DecayFit(c) => {
            let input = c.input.as_deref().ok_or_else(|| config_error("decay fit needs an input file"))?;
            let (text, _) = read_input(input)?;
            let rows = parse_numeric_csv(&text, &["t_s", "n_atoms", "sigma_n"])?;
            let samples: Vec<DecaySample> = rows
                .iter()
                .map(|r| DecaySample {
                    t_s: r[0],
                    n_atoms: r[1],
                    sigma_n: r[2],
                })
                .collect();
            let fit = fit_two_body_decay(&samples, c.v_eff_m3())?;
            if !fit.converged {
                return Err(numeric_error("decay fit did not converge"));
            }
            let line = format!(
                "beta = {} ± {} cm^3/s, tau = {:.0} s",
                format_sci(fit.params["beta_cm3_s"]),
                format_sci(fit.sigmas["beta_cm3_s"]),
                fit.params["tau_s"]
            );
            Ok(vec![(out.to_path_buf(), json_bytes(&fit), line)])
        }
        Invocation::TofSimulate(c) => {
            if c.n_times < 3 || !(c.t_max_s > 0.0) {
                return Err(config_error("tof needs n_times >= 3 and t_max_s > 0"));
            }
            let mut rng = child_stream(c.seed, 0, 0);
            let samples = synthetic_tof_samples(
                c.sigma0_m,
                c.temperature_k,
                atom.mass_kg,
                &linspace(0.0, c.t_max_s, c.n_times),
                c.rel_noise,
                &mut rng,
            )?;
            let mut csv = String::from("t_s,sigma_m\n");
            for s in &samples {
                csv.push_str(&format!("{},{}\n", format_sci(s.t_s), format_sci(s.sigma_m)));
            }
            let line = format!("{}: {} expansion times", out.display(), samples.len());
            Ok(vec![(out.to_path_buf(), csv.into_bytes(), line)])
        }
        Invocation::TofFit(c) => {
            let input = c.input.as_deref().ok_or_else(|| config_error("tof fit needs an input file"))?;
            let (text, _) = read_input(input)?;
            let rows = parse_numeric_csv(&text, &["t_s", "sigma_m"])?;
            let samples: Vec<TofSample> = rows.iter().map(|r| TofSample { t_s: r[0], sigma_m: r[1] }).collect();
            let fit = fit_tof_temperature(&samples, atom.mass_kg)?;
            let line = format!(
                "T = {:.3} ± {:.3} uK",
                fit.params["temperature_k"] * 1e6,
                fit.sigmas["temperature_k"] * 1e6
            );
            Ok(vec![(out.to_path_buf(), json_bytes(&fit), line)])
        }
        Invocation::Pulse(c) => {
            c.detector.validate()?;
            c.transmission.validate()?;
            let delta_n = if c.noisy {
                let mut rng = child_stream(c.seed, 0, 0);
                simulate_pulse_detection(c.theta_rad, c.n_photons, &c.detector, &c.transmission, &mut rng)?
            } else {
                simulate_pulse_detection(c.theta_rad, c.n_photons, &c.detector, &c.transmission, &mut Noiseless)?
            };
            let record = synthesize_waveform(delta_n, c.n_photons, &c.detector, c.pulse_duration_s)?;
            let mut csv = Vec::new();
            record.write_csv(&mut csv)?;
            let theta_hat = extract_angle(delta_n, c.n_photons, &c.transmission)?;
            let line = format!(
                "{}: {} samples, window [{}, {}), theta_hat = {}",
                out.display(),
                record.samples.len(),
                record.window_start,
                record.window_end,
                format_sci(theta_hat)
            );
            Ok(vec![(out.to_path_buf(), csv, line)])
        }
    }
}

fn decay_times(c: &DecayConfig) -> Result<Vec<f64>, CliError> {
    if c.n_times < 4 || !(c.t_max_s > 0.0) {
        return Err(config_error("decay needs n_times >= 4 and t_max_s > 0"));
    }
    Ok(linspace(0.0, c.t_max_s, c.n_times))
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s.into_bytes()
}

/// Parses a headed CSV of finite numbers; errors name the 1-based line.
pub fn parse_numeric_csv(text: &str, header: &[&str]) -> Result<Vec<Vec<f64>>, Error> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or_else(|| Error::Csv {
        row: 1,
        reason: "empty file".into(),
    })?;
    let got: Vec<&str> = first.split(',').map(str::trim).collect();
    if got != header {
        return Err(Error::Csv {
            row: 1,
            reason: format!("expected header `{}`, got `{first}`", header.join(",")),
        });
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let row = i + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != header.len() {
            return Err(Error::Csv {
                row,
                reason: format!("expected {} fields, got {}", header.len(), fields.len()),
            });
        }
        let values = fields
            .iter()
            .zip(header)
            .map(|(f, name)| match f.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Csv {
                    row,
                    reason: format!("column `{name}`: `{f}` is not a finite number"),
                }),
            })
            .collect::<Result<Vec<f64>, Error>>()?;
        rows.push(values);
    }
    Ok(rows)
}

fn execute(inv: Invocation, out: &Path, manifest_path: &Path, atom: &AtomSpec) -> Result<RunReport, CliError> {
    let inputs = match inv.input() {
        Some(p) => vec![read_input(p)?.1],
        None => Vec::new(),
    };
    let files = produce(&inv, out, atom)?;
    let mut outputs = Vec::with_capacity(files.len());
    let mut summary = Vec::with_capacity(files.len());
    for (path, bytes, line) in files {
        write_file(&path, &bytes)?;
        outputs.push(FileDigest {
            path,
            sha256: sha256_hex(&bytes),
        });
        summary.push(line);
    }
    let manifest = RunManifest {
        tool: "coldspin".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        seed: inv.seed(),
        atom_data: serde_json::to_value(atom).map_err(Error::from)?,
        invocation: inv,
        inputs,
        outputs,
    };
    write_file(manifest_path, &json_bytes(&manifest))?;
    Ok(RunReport {
        manifest_path: manifest_path.to_path_buf(),
        manifest,
        summary,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| config_error(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| config_error(format!("{}: {e}", path.display())))
}

/// Re-runs a manifest. Outputs go to their recorded paths, or under the
/// directory of `out_override` when given; every digest must match.
fn replay(manifest_path: &Path, out_override: Option<&Path>, atom: &AtomSpec) -> Result<RunReport, CliError> {
    let text = fs::read_to_string(manifest_path).map_err(|e| config_error(format!("{}: {e}", manifest_path.display())))?;
    let recorded: RunManifest =
        serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", manifest_path.display())))?;
    if recorded.atom_data != serde_json::to_value(atom).map_err(Error::from)? {
        return Err(config_error("atomic data differ from the manifest's; check COLDSPIN_ATOM_DATA"));
    }
    for input in &recorded.inputs {
        let (_, now) = read_input(&input.path)?;
        if now.sha256 != input.sha256 {
            return Err(numeric_error(format!("input {} changed since the recorded run", input.path.display())));
        }
    }
    let primary = recorded
        .outputs
        .first()
        .ok_or_else(|| config_error("manifest lists no outputs"))?;
    let out = out_override.map(Path::to_path_buf).unwrap_or_else(|| primary.path.clone());
    let files = produce(&recorded.invocation, &out, atom)?;
    if files.len() != recorded.outputs.len() {
        return Err(numeric_error("replay produced a different set of outputs"));
    }
    let mut summary = Vec::new();
    let mut outputs = Vec::new();
    for ((path, bytes, _), expected) in files.into_iter().zip(&recorded.outputs) {
        let digest = sha256_hex(&bytes);
        if digest != expected.sha256 {
            return Err(numeric_error(format!(
                "replayed {} differs from the recorded output (sha256 {digest} vs {})",
                path.display(),
                expected.sha256
            )));
        }
        write_file(&path, &bytes)?;
        summary.push(format!("{}: reproduced, sha256 {digest}", path.display()));
        outputs.push(FileDigest { path, sha256: digest });
    }
    let manifest = RunManifest { outputs, ..recorded };
    Ok(RunReport {
        manifest_path: manifest_path.to_path_buf(),
        manifest,
        summary,
    })
}
