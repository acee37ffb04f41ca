//! Forward models of the dipole-trapped cloud: two-body trap loss, ballistic
//! expansion, peak density and the dipole potential.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::analysis::{DecaySample, TofSample};

use crate::atomic::constants::{BOLTZMANN, PLANCK, SPEED_OF_LIGHT};
use crate::atomic::{AtomSpec, TrapSpec};
use crate::error::{Error, Result};

/// FWHM = 2√(2 ln 2) σ.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

/// Trap wavelengths closer than this many linewidths to the probe line are rejected.
const TRAP_GUARD_LINEWIDTHS: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapPopulationParams {
    pub n0: f64,
    /// One-body (background) lifetime; `f64::INFINITY` for pure two-body loss.
    pub lifetime_s: f64,
    /// Volume-independent two-body rate constant.
    pub beta_m3_s: f64,
    /// Effective two-body volume, N/⟨n⟩.
    pub v_eff_m3: f64,
}

impl TrapPopulationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.n0.is_finite() && self.n0 > 0.0) {
            return Err(Error::validation("n0", format!("must be > 0, got {}", self.n0)));
        }
        if !(self.lifetime_s > 0.0) {
            return Err(Error::validation("lifetime_s", format!("must be > 0, got {}", self.lifetime_s)));
        }
        if !(self.beta_m3_s.is_finite() && self.beta_m3_s >= 0.0) {
            return Err(Error::validation("beta_m3_s", format!("must be >= 0, got {}", self.beta_m3_s)));
        }
        if !(self.v_eff_m3.is_finite() && self.v_eff_m3 > 0.0) {
            return Err(Error::validation("v_eff_m3", format!("must be > 0, got {}", self.v_eff_m3)));
        }
        Ok(())
    }

    fn loss_rate(&self) -> f64 {
        self.lifetime_s.recip()
    }

    fn pair_rate(&self) -> f64 {
        self.beta_m3_s / self.v_eff_m3
    }
}

/// Effective two-body volume of a Gaussian cloud, (4π)^{3/2} σ_z σ_r².
///
/// Equal to N/⟨n⟩ with the density-weighted mean ⟨n⟩ = n₀/(2√2).
pub fn effective_volume(sigma_z_m: f64, sigma_r_m: f64) -> f64 {
    (4.0 * PI).powf(1.5) * sigma_z_m * sigma_r_m * sigma_r_m
}

/// N(t) for dN/dt = −N/τ − (β/V_eff)N², closed form.
pub fn evolve_trap_population(p: &TrapPopulationParams, t_s: f64) -> Result<f64> {
    p.validate()?;
    if !(t_s >= 0.0) {
        return Err(Error::validation("t_s", format!("must be >= 0, got {t_s}")));
    }
    Ok(population_closed_form(p.n0, p.loss_rate(), p.pair_rate(), t_s))
}

pub(crate) fn population_closed_form(n0: f64, gamma: f64, pair_rate: f64, t: f64) -> f64 {
    // (1 − e^{−γt})/γ, tending to t as γ → 0
    let gt = gamma * t;
    let effective_time = if gt.abs() < 1e-300 { t } else { -(-gt).exp_m1() / gamma };
    n0 * (-gt).exp() / (1.0 + n0 * pair_rate * effective_time)
}

/// Same ODE integrated with `steps` fixed classical Runge–Kutta steps.
pub fn evolve_trap_population_rk4(p: &TrapPopulationParams, t_s: f64, steps: usize) -> Result<f64> {
    p.validate()?;
    if !(t_s >= 0.0) || steps == 0 {
        return Err(Error::validation("t_s", "need t >= 0 and at least one step"));
    }
    let (gamma, k2) = (p.loss_rate(), p.pair_rate());
    let rhs = |n: f64| -gamma * n - k2 * n * n;
    let h = t_s / steps as f64;
    let mut n = p.n0;
    for _ in 0..steps {
        let a = rhs(n);
        let b = rhs(n + 0.5 * h * a);
        let c = rhs(n + 0.5 * h * b);
        let d = rhs(n + h * c);
        n += h / 6.0 * (a + 2.0 * b + 2.0 * c + d);
    }
    Ok(n)
}

/// Central density n₀ = N / ((2π)^{3/2} σ_z σ_r²), in m⁻³.
pub fn peak_density(n_atoms: f64, sigma_z_m: f64, sigma_r_m: f64) -> Result<f64> {
    if !(sigma_z_m > 0.0 && sigma_r_m > 0.0) || !(n_atoms >= 0.0) {
        return Err(Error::validation("cloud", "sizes must be > 0 and atom number >= 0"));
    }
    Ok(n_atoms / ((2.0 * PI).powf(1.5) * sigma_z_m * sigma_r_m * sigma_r_m))
}

/// Cloud rms radius after free expansion, σ(t) = √(σ₀² + (k_BT/m)t²).
pub fn tof_radius(sigma0_m: f64, temperature_k: f64, t_s: f64, mass_kg: f64) -> Result<f64> {
    if !(sigma0_m >= 0.0 && temperature_k >= 0.0 && t_s >= 0.0 && mass_kg > 0.0) {
        return Err(Error::validation("tof", "radius, temperature and time must be >= 0, mass > 0"));
    }
    Ok((sigma0_m * sigma0_m + BOLTZMANN * temperature_k / mass_kg * t_s * t_s).sqrt())
}

/// Ground-state dipole potential at the trap focus, in joules (negative when red-detuned).
///
/// Two-level far-detuned form including the counter-rotating term:
/// U = −(3πc²/2ω₀³)(Γ/(ω₀−ω) + Γ/(ω₀+ω))·I₀, with I₀ = 2P/(πw²).
pub fn dipole_potential(trap: &TrapSpec, spec: &AtomSpec) -> Result<f64> {
    let omega0 = 2.0 * PI * SPEED_OF_LIGHT / spec.wavelength_m;
    let omega = 2.0 * PI * SPEED_OF_LIGHT / trap.wavelength_m;
    let gamma = 2.0 * PI * spec.linewidth_hz;
    if (omega0 - omega).abs() < TRAP_GUARD_LINEWIDTHS * gamma {
        return Err(Error::validation(
            "trap.wavelength_m",
            format!("{} m is too close to the atomic resonance", trap.wavelength_m),
        ));
    }
    let prefactor = 3.0 * PI * SPEED_OF_LIGHT * SPEED_OF_LIGHT / (2.0 * omega0.powi(3));
    let detuning_sum = gamma / (omega0 - omega) + gamma / (omega0 + omega);
    Ok(-prefactor * detuning_sum * trap.peak_intensity_w_m2())
}

/// Trap depth |U|/k_B in kelvin.
pub fn dipole_trap_depth(trap: &TrapSpec, spec: &AtomSpec) -> Result<f64> {
    Ok(dipole_potential(trap, spec)?.abs() / BOLTZMANN)
}

/// Ground-state light shift |U|/h in hertz.
pub fn light_shift(trap: &TrapSpec, spec: &AtomSpec) -> Result<f64> {
    Ok(dipole_potential(trap, spec)?.abs() / PLANCK)
}

/// Synthetic recapture measurements of a decaying trap population.
///
/// Each time point is the mean of `shots` recaptures with independent
/// multiplicative noise of relative size `rel_noise`; the reported
/// uncertainty is rel_noise·N̄/√shots.
pub fn synthetic_decay_samples<R: Rng + ?Sized>(
    p: &TrapPopulationParams,
    times_s: &[f64],
    shots: usize,
    rel_noise: f64,
    rng: &mut R,
) -> Result<Vec<DecaySample>> {
    if shots == 0 {
        return Err(Error::validation("shots_per_time", "must be >= 1"));
    }
    if !(rel_noise.is_finite() && rel_noise > 0.0) {
        return Err(Error::validation("rel_noise", "must be > 0"));
    }
    times_s
        .iter()
        .map(|&t| {
            let n = evolve_trap_population(p, t)?;
            let mean = (0..shots)
                .map(|_| n * (1.0 + rel_noise * rng.sample::<f64, _>(StandardNormal)))
                .sum::<f64>()
                / shots as f64;
            Ok(DecaySample {
                t_s: t,
                n_atoms: mean,
                sigma_n: rel_noise * mean.abs() / (shots as f64).sqrt(),
            })
        })
        .collect()
}

/// Synthetic time-of-flight radii with multiplicative noise `rel_noise`.
pub fn synthetic_tof_samples<R: Rng + ?Sized>(
    sigma0_m: f64,
    temperature_k: f64,
    mass_kg: f64,
    times_s: &[f64],
    rel_noise: f64,
    rng: &mut R,
) -> Result<Vec<TofSample>> {
    if !(rel_noise.is_finite() && rel_noise >= 0.0) {
        return Err(Error::validation("rel_noise", "must be >= 0"));
    }
    times_s
        .iter()
        .map(|&t| {
            let r = tof_radius(sigma0_m, temperature_k, t, mass_kg)?;
            Ok(TofSample {
                t_s: t,
                sigma_m: r * (1.0 + rel_noise * rng.sample::<f64, _>(StandardNormal)),
            })
        })
        .collect()
}
