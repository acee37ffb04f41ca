// Coupling strength of the Faraday probe across the red side of the F=1 → F′ manifold.
//
// Prints G̃(Δ) and the per-atom coupling G = G̃/A for a 1e6-atom sample at
// n_c = 2.65e14 m⁻², then the optical depth that column density implies.

use coldspin::spin_optics::{area_coupling, coupling_constant, od_from_angle, CouplingOptions};
use coldspin::AtomSpec;

pub fn run_example() -> coldspin::Result<Vec<(f64, f64)>> {
    let spec = AtomSpec::rubidium87_d2();
    let opts = CouplingOptions::default();
    let area = 1e6 / 2.65e14;

    println!("{:>12} {:>14} {:>14}", "Δ (GHz)", "G̃ (m²)", "G");
    let mut table = Vec::new();
    for i in 0..7 {
        let detuning = -2.3e9 + 0.25e9 * i as f64;
        let c = coupling_constant(detuning, area, &spec, &opts)?;
        println!("{:>12.3} {:>14.4e} {:>14.4e}", detuning / 1e9, c.g_tilde, c.g);
        table.push((detuning, c.g_tilde));
    }

    // θ = G̃ n_c / 2 at −1.6 GHz, and the OD recovered from it
    let g_tilde = area_coupling(-1.6e9, &spec, &opts)?;
    let theta = g_tilde * 2.65e14 / 2.0;
    let od = od_from_angle(theta, -1.6e9, &spec, &opts)?;
    println!("θ(−1.6 GHz) = {theta:.4} rad, OD = {od:.1}");
    Ok(table)
}

fn main() -> coldspin::Result<()> {
    run_example().map(|_| ())
}
