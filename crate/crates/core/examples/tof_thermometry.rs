// Temperature from ballistic expansion: σ²(t) = σ₀² + (k_BT/m)t² sampled
// over 4 ms with 1% radius noise.

use coldspin::analysis::fit_tof_temperature;
use coldspin::dynamics::synthetic_tof_samples;
use coldspin::experiment::{child_stream, linspace};
use coldspin::AtomSpec;

pub fn run_example() -> coldspin::Result<(f64, f64)> {
    let mass = AtomSpec::rubidium87_d2().mass_kg;
    let mut rng = child_stream(0, 0, 0);
    let samples = synthetic_tof_samples(8.5e-6, 25e-6, mass, &linspace(0.0, 4e-3, 17), 0.01, &mut rng)?;
    for s in samples.iter().step_by(4) {
        println!("t = {:.2} ms  σ = {:.1} µm", s.t_s * 1e3, s.sigma_m * 1e6);
    }
    let fit = fit_tof_temperature(&samples, mass)?;
    let t = fit.param("temperature_k")? * 1e6;
    let dt = fit.sigma("temperature_k")? * 1e6;
    println!("T = {t:.2} ± {dt:.2} µK");
    Ok((t, dt))
}

fn main() -> coldspin::Result<()> {
    run_example().map(|_| ())
}
