// Simulated detuning scan from −2.3 to −0.8 GHz (40 samples × 10 pulses per
// point) and the weighted fit of the column density back out of it.

use coldspin::analysis::{compute_od, fit_column_density, N_C};
use coldspin::detector::{DetectorSpec, TransmissionSpec};
use coldspin::experiment::{run_detuning_scan, DestructionModel, ScanConfig, ScanSetup};
use coldspin::{AtomSpec, CollectiveSpinState, CouplingOptions};

pub struct ScanFitSummary {
    pub n_c: f64,
    pub n_c_sigma: f64,
    pub od: f64,
    pub points: usize,
}

pub fn run_example() -> coldspin::Result<ScanFitSummary> {
    let spec = AtomSpec::rubidium87_d2();
    let n_atoms = 1e6;
    let atoms = CollectiveSpinState::pumped_z(n_atoms, 1.0);
    let setup = ScanSetup {
        atoms: &atoms,
        spec: &spec,
        area_m2: n_atoms / 2.65e14,
        detector: &DetectorSpec::default(),
        transmission: &TransmissionSpec::default(),
        destruction: &DestructionModel::default(),
        coupling: &CouplingOptions::default(),
    };
    let data = run_detuning_scan(&ScanConfig::default(), &setup)?;
    for r in &data.records {
        println!("{:>8.3} GHz  θ = {:.5} ± {:.5}", r.detuning_hz / 1e9, r.theta_mean_rad, r.theta_stddev_rad);
    }

    let fit = fit_column_density(&data, &spec)?;
    let (od, od_sigma) = compute_od(&fit, &spec)?;
    let (n_c, sigma) = (fit.param(N_C)?, fit.sigma(N_C)?);
    println!("n_c = {n_c:.4e} ± {sigma:.2e} m⁻² ({:.1}%), OD = {od:.1} ± {od_sigma:.1}", 100.0 * sigma / n_c);
    println!("χ²/dof = {:.2}", fit.reduced_chi2());
    Ok(ScanFitSummary {
        n_c,
        n_c_sigma: sigma,
        od,
        points: data.records.len(),
    })
}

fn main() -> coldspin::Result<()> {
    run_example().map(|_| ())
}
