// Depth and ground-state light shift of a 7 W, 50 µm-waist dipole trap at 1030 nm.

use coldspin::dynamics::{dipole_trap_depth, light_shift};
use coldspin::{AtomSpec, TrapSpec};

pub fn run_example() -> coldspin::Result<(f64, f64)> {
    let spec = AtomSpec::rubidium87_d2();
    let trap = TrapSpec::yb_yag_1030();
    let depth = dipole_trap_depth(&trap, &spec)?;
    let shift = light_shift(&trap, &spec)?;
    println!("peak intensity {:.3e} W/m²", trap.peak_intensity_w_m2());
    println!("depth {:.1} µK, light shift {:.2} MHz", depth * 1e6, shift / 1e6);

    for power in [1.0, 3.0, 7.0, 10.0] {
        let t = TrapSpec::new(trap.wavelength_m, power, trap.waist_m)?;
        println!("  {power:>4} W -> {:.0} µK", dipole_trap_depth(&t, &spec)? * 1e6);
    }
    Ok((depth, shift))
}

fn main() -> coldspin::Result<()> {
    run_example().map(|_| ())
}
