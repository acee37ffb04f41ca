// One QND pass: the probe's S_y picks up G·J_z·S_x, so its variance grows
// from shot noise N_p/4 by the atomic projection noise G²(N_p/2)²(N_a/4).

use coldspin::spin_optics::{coupling_constant, output_variance, qnd_interact, CouplingOptions};
use coldspin::{AtomSpec, CollectiveSpinState, StokesState};

pub struct QndSummary {
    pub shot_noise: f64,
    pub output_variance: f64,
    pub projection_to_shot: f64,
}

pub fn run_example() -> coldspin::Result<QndSummary> {
    let spec = AtomSpec::rubidium87_d2();
    let n_atoms = 1e6;
    let n_photons = 4.3e6;
    let c = coupling_constant(-1.6e9, n_atoms / 2.65e14, &spec, &CouplingOptions::default())?;

    // atoms along x so ⟨J_z⟩ = 0 and only its fluctuations rotate the light
    let atoms = CollectiveSpinState::coherent_x(n_atoms, 1.0);
    let light = StokesState::coherent_x(n_photons, 1e-6);
    let (light_out, atoms_out) = qnd_interact(&light, &atoms, c.g)?;

    let shot = n_photons / 4.0;
    let v = output_variance(n_photons, n_atoms, c.g);
    println!("G = {:.4e}", c.g);
    println!("var(S_y) in  = {:.4e}", light.var.y);
    println!("var(S_y) out = {:.4e} (closed form {:.4e})", light_out.var.y, v);
    println!("var(J_z) before/after = {:.4e} / {:.4e}", atoms.var.z, atoms_out.var.z);
    println!("projection / shot noise = {:.3}", (v - shot) / shot);
    Ok(QndSummary {
        shot_noise: shot,
        output_variance: light_out.var.y,
        projection_to_shot: (v - shot) / shot,
    })
}

fn main() -> coldspin::Result<()> {
    run_example().map(|_| ())
}
