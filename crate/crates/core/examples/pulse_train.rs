// A 1000-pulse train on one pumped sample at −1.6 GHz. Each pulse removes a
// fraction 1e-4 of ⟨J_z⟩; averaging 20 trains gives the SNR of the mean signal.

use coldspin::analysis::snr_report;
use coldspin::detector::{DetectorSpec, TransmissionSpec};
use coldspin::experiment::{averaged_train_snr, child_stream, run_pulse_train, DestructionModel};
use coldspin::spin_optics::{coupling_constant, CouplingOptions};
use coldspin::{AtomSpec, CollectiveSpinState, StokesState};

pub struct TrainSummary {
    pub signal_loss: f64,
    pub snr_monte_carlo: f64,
    pub snr_closed_form: f64,
}

pub fn run_example() -> coldspin::Result<TrainSummary> {
    let spec = AtomSpec::rubidium87_d2();
    let n_atoms = 1e6;
    let coupling = coupling_constant(-1.6e9, n_atoms / 2.65e14, &spec, &CouplingOptions::default())?;
    let atoms = CollectiveSpinState::pumped_z(n_atoms, 1.0);
    let light = StokesState::coherent_x(4.3e6, 1e-6);
    let (det, tr, dm) = (DetectorSpec::default(), TransmissionSpec::default(), DestructionModel::default());

    let mut rng = child_stream(1, 0, 0);
    let (outcomes, after) = run_pulse_train(1000, &atoms, &coupling, &light, &dm, &det, &tr, &mut rng)?;
    let first = outcomes.first().map(|o| o.theta_true).unwrap_or(0.0);
    let last = outcomes.last().map(|o| o.theta_true).unwrap_or(0.0);
    let loss = 1.0 - last / first;
    println!("θ first/last pulse: {first:.5} / {last:.5} rad, loss {:.1}%", 100.0 * loss);
    println!("⟨J_z⟩ after train: {:.4e}", after.mean.z);

    let snr_mc = averaged_train_snr(20, 1000, &atoms, &coupling, &light, &dm, &det, &tr, 1)?;
    let snr_cf = snr_report(first, light.n_photons, &det, 20);
    println!("SNR over 20 runs: Monte Carlo {snr_mc:.0}, closed form {snr_cf:.0}");
    Ok(TrainSummary {
        signal_loss: loss,
        snr_monte_carlo: snr_mc,
        snr_closed_form: snr_cf,
    })
}

fn main() -> coldspin::Result<()> {
    run_example().map(|_| ())
}
