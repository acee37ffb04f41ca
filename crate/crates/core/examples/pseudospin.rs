// Pseudo-spin of a single F=1 atom. Stretched states point along ±z; equal
// superpositions of m = ±1 point along ±x, and with a relative phase of i along ±y.

use coldspin::spin_optics::{PseudoSpinOperators, single_atom_pseudospin};
use coldspin::CollectiveSpinState;
use num_complex::Complex64;

pub fn run_example() -> coldspin::Result<Vec<[f64; 3]>> {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let states = [
        ("m = +1", [c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]),
        ("m = -1", [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]),
        ("(|-1> + |+1>)/√2", [c(h, 0.0), c(0.0, 0.0), c(h, 0.0)]),
        ("(|-1> - |+1>)/√2", [c(h, 0.0), c(0.0, 0.0), c(-h, 0.0)]),
        ("(|-1> + i|+1>)/√2", [c(h, 0.0), c(0.0, 0.0), c(0.0, h)]),
        ("m = 0", [c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]),
    ];
    let ops = PseudoSpinOperators::new();
    let mut out = Vec::new();
    for (label, amps) in &states {
        let j = single_atom_pseudospin(amps)?;
        let var = ops.moments(amps)?.var;
        println!("{label:<20} j = ({:+.3}, {:+.3}, {:+.3})  var_z = {:.3}", j.x, j.y, j.z, var.z);
        out.push([j.x, j.y, j.z]);
    }

    let ensemble = CollectiveSpinState::from_identical_atoms(&states[2].1, 1e6)?;
    println!("1e6 atoms along x: <J> = {:.3e}, var(J_z) = {:.3e}", ensemble.mean.x, ensemble.var.z);
    Ok(out)
}

fn main() -> coldspin::Result<()> {
    run_example().map(|_| ())
}
