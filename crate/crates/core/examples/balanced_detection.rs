// Balanced polarimeter: a 26.8 mrad rotation on a 4.3e6-photon pulse, the
// noisy imbalance it produces, and the shaped waveform the digitizer sees.

use coldspin::detector::{
    angle_variance, extract_angle, integrate_window, simulate_pulse_detection, synthesize_waveform, DetectorSpec,
    TransmissionSpec,
};
use coldspin::experiment::{child_stream, mean_and_std};

pub fn run_example() -> coldspin::Result<(f64, f64)> {
    let det = DetectorSpec::default();
    let tr = TransmissionSpec::default();
    let theta = 0.0268;
    let n = 4.3e6;

    let mut rng = child_stream(7, 0, 0);
    let mut estimates = Vec::with_capacity(5000);
    for _ in 0..5000 {
        let dn = simulate_pulse_detection(theta, n, &det, &tr, &mut rng)?;
        estimates.push(extract_angle(dn, n, &tr)?);
    }
    let (mean, std) = mean_and_std(&estimates);
    println!("θ̂ = {mean:.5} ± {std:.2e} rad (predicted spread {:.2e})", angle_variance(n, &det, &tr).sqrt());

    let dn = simulate_pulse_detection(theta, n, &det, &tr, &mut rng)?;
    let rec = synthesize_waveform(dn, n, &det, 1e-6)?;
    let integrated = integrate_window(&rec, &det)?;
    println!(
        "waveform: {} samples, window [{}, {}), ∫ = {:.1} (ΔN = {:.1})",
        rec.samples.len(),
        rec.window_start,
        rec.window_end,
        integrated,
        dn
    );
    Ok((mean, std))
}

fn main() -> coldspin::Result<()> {
    run_example().map(|_| ())
}
