//! Gaussian-moment algebra of the dispersive spin–light interface.
//!
//! Atoms are described by the collective pseudo-spin `J` built from the
//! F=1, m=±1 sublevels, light by the Stokes vector `S`. Both are carried as
//! means plus per-component variances; light–atom covariances are not kept
//! after an interaction.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::atomic::{AtomSpec, ExcitedLevel};
use crate::error::{Error, Result};

const NORM_TOLERANCE: f64 = 1e-12;

/// Mean and variances of the collective pseudo-spin of `n_atoms` atoms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollectiveSpinState {
    pub mean: Vector3<f64>,
    pub var: Vector3<f64>,
    pub n_atoms: f64,
}

impl CollectiveSpinState {
    pub fn new(mean: Vector3<f64>, var: Vector3<f64>, n_atoms: f64) -> Result<Self> {
        let state = CollectiveSpinState { mean, var, n_atoms };
        state.validate()?;
        Ok(state)
    }

    /// All atoms in m=+1 (`sign > 0`) or m=−1 (`sign < 0`).
    pub fn pumped_z(n_atoms: f64, sign: f64) -> Self {
        let s = sign.signum();
        CollectiveSpinState {
            mean: Vector3::new(0.0, 0.0, s * n_atoms / 2.0),
            var: Vector3::new(n_atoms / 4.0, n_atoms / 4.0, 0.0),
            n_atoms,
        }
    }

    /// Coherent spin state along ±x, i.e. every atom in (|+1⟩ ± |−1⟩)/√2.
    pub fn coherent_x(n_atoms: f64, sign: f64) -> Self {
        let s = sign.signum();
        CollectiveSpinState {
            mean: Vector3::new(s * n_atoms / 2.0, 0.0, 0.0),
            var: Vector3::new(0.0, n_atoms / 4.0, n_atoms / 4.0),
            n_atoms,
        }
    }

    /// Product state of `n_atoms` atoms each with the given m=−1,0,+1 amplitudes.
    pub fn from_identical_atoms(amplitudes: &[Complex64; 3], n_atoms: f64) -> Result<Self> {
        let moments = PseudoSpinOperators::new().moments(amplitudes)?;
        Ok(CollectiveSpinState {
            mean: moments.mean * n_atoms,
            var: moments.var * n_atoms,
            n_atoms,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n_atoms.is_finite() && self.n_atoms >= 0.0) {
            return Err(Error::validation("n_atoms", format!("must be >= 0, got {}", self.n_atoms)));
        }
        check_moments("spin", &self.mean, &self.var, self.n_atoms)
    }
}

/// Mean and variances of the Stokes vector of one probe pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StokesState {
    pub mean: Vector3<f64>,
    pub var: Vector3<f64>,
    pub n_photons: f64,
    pub pulse_duration_s: f64,
}

impl StokesState {
    pub fn new(mean: Vector3<f64>, var: Vector3<f64>, n_photons: f64, pulse_duration_s: f64) -> Result<Self> {
        let state = StokesState {
            mean,
            var,
            n_photons,
            pulse_duration_s,
        };
        state.validate()?;
        Ok(state)
    }

    /// Coherent pulse linearly polarized along x.
    pub fn coherent_x(n_photons: f64, pulse_duration_s: f64) -> Self {
        StokesState {
            mean: Vector3::new(n_photons / 2.0, 0.0, 0.0),
            var: Vector3::new(0.0, n_photons / 4.0, n_photons / 4.0),
            n_photons,
            pulse_duration_s,
        }
    }

    /// Coherent circularly polarized pulse, σ⁺ for `sign > 0`.
    pub fn circular(n_photons: f64, pulse_duration_s: f64, sign: f64) -> Self {
        StokesState {
            mean: Vector3::new(0.0, 0.0, sign.signum() * n_photons / 2.0),
            var: Vector3::new(n_photons / 4.0, n_photons / 4.0, 0.0),
            n_photons,
            pulse_duration_s,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n_photons.is_finite() && self.n_photons >= 0.0) {
            return Err(Error::validation("n_photons", format!("must be >= 0, got {}", self.n_photons)));
        }
        if !(self.pulse_duration_s.is_finite() && self.pulse_duration_s > 0.0) {
            return Err(Error::validation(
                "pulse_duration_s",
                format!("must be > 0, got {}", self.pulse_duration_s),
            ));
        }
        check_moments("stokes", &self.mean, &self.var, self.n_photons)
    }
}

fn check_moments(what: &'static str, mean: &Vector3<f64>, var: &Vector3<f64>, number: f64) -> Result<()> {
    if mean.iter().chain(var.iter()).any(|x| !x.is_finite()) {
        return Err(Error::validation(what, "moments must be finite"));
    }
    if var.iter().any(|&v| v < 0.0) {
        return Err(Error::validation(what, format!("negative variance {var:?}")));
    }
    let bound = number / 2.0;
    if mean.norm() > bound * (1.0 + 1e-9) + 1e-9 {
        return Err(Error::validation(
            what,
            format!("|mean| = {} exceeds N/2 = {bound}", mean.norm()),
        ));
    }
    Ok(())
}

/// Which sign the hyperfine offsets enter the detuning factors with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetuningConvention {
    /// δ_F′ = (Δ − Δ₀,F′)⁻¹ with Δ measured from F=1 → F′=0: each pole sits
    /// on its physical resonance.
    #[default]
    Physical,
    /// δ_F′ = (Δ + Δ₀,F′)⁻¹: poles mirrored to positive Δ, equivalent to flipping the sign of Δ.
    Mirrored,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingOptions {
    pub convention: DetuningConvention,
    /// Minimum allowed distance to any F′ resonance, in units of Γ.
    pub guard_linewidths: f64,
}

impl Default for CouplingOptions {
    fn default() -> Self {
        CouplingOptions {
            convention: DetuningConvention::Physical,
            guard_linewidths: 10.0,
        }
    }
}

/// Coupling between one probe pulse and the ensemble at a given detuning and area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingParams {
    pub detuning_hz: f64,
    pub area_m2: f64,
    /// Dimensionless G.
    pub g: f64,
    /// G̃ = A·G, independent of the area.
    pub g_tilde: f64,
}

/// δ_F′(Δ): reciprocal detuning from the F=1 → F′ line, in 1/Hz.
pub fn detuning_factor(
    detuning_hz: f64,
    level: ExcitedLevel,
    spec: &AtomSpec,
    opts: &CouplingOptions,
) -> Result<f64> {
    let offset = spec.hf_splitting_hz(level);
    let denominator = match opts.convention {
        DetuningConvention::Physical => detuning_hz - offset,
        DetuningConvention::Mirrored => detuning_hz + offset,
    };
    let guard = opts.guard_linewidths * spec.linewidth_hz;
    if !denominator.is_finite() || denominator.abs() < guard {
        return Err(Error::NearResonance {
            detuning_hz,
            level: level.f(),
            distance_hz: denominator.abs(),
            guard_hz: guard,
        });
    }
    Ok(denominator.recip())
}

/// G̃(Δ) = (Γλ²/16π)(−4δ₀ − 5δ₁ + 5δ₂), in m².
pub fn area_coupling(detuning_hz: f64, spec: &AtomSpec, opts: &CouplingOptions) -> Result<f64> {
    let d0 = detuning_factor(detuning_hz, ExcitedLevel::F0, spec, opts)?;
    let d1 = detuning_factor(detuning_hz, ExcitedLevel::F1, spec, opts)?;
    let d2 = detuning_factor(detuning_hz, ExcitedLevel::F2, spec, opts)?;
    let prefactor = spec.linewidth_hz * spec.wavelength_m * spec.wavelength_m / (16.0 * PI);
    Ok(prefactor * (-4.0 * d0 - 5.0 * d1 + 5.0 * d2))
}

pub fn coupling_constant(
    detuning_hz: f64,
    area_m2: f64,
    spec: &AtomSpec,
    opts: &CouplingOptions,
) -> Result<CouplingParams> {
    if !(area_m2.is_finite() && area_m2 > 0.0) {
        return Err(Error::validation("area_m2", format!("must be > 0, got {area_m2}")));
    }
    let g_tilde = area_coupling(detuning_hz, spec, opts)?;
    Ok(CouplingParams {
        detuning_hz,
        area_m2,
        g: g_tilde / area_m2,
        g_tilde,
    })
}

/// Variance of a product `a·b` of independent Gaussian factors.
fn product_variance(mean_a: f64, var_a: f64, mean_b: f64, var_b: f64) -> f64 {
    mean_a * mean_a * var_b + mean_b * mean_b * var_a + var_a * var_b
}

/// One pass of the probe through the ensemble under H = ħ(G/τ)S_z J_z, to first order in G.
///
/// S_x is rotated onto S_y in proportion to J_z and J_x onto J_y in
/// proportion to S_z. S_z and J_z are untouched.
pub fn qnd_interact(
    light: &StokesState,
    atoms: &CollectiveSpinState,
    g: f64,
) -> Result<(StokesState, CollectiveSpinState)> {
    light.validate()?;
    atoms.validate()?;
    let mut light_out = *light;
    let mut atoms_out = *atoms;

    light_out.mean.y += g * atoms.mean.z * light.mean.x;
    light_out.var.y +=
        g * g * product_variance(light.mean.x, light.var.x, atoms.mean.z, atoms.var.z);

    atoms_out.mean.y += g * light.mean.z * atoms.mean.x;
    atoms_out.var.y +=
        g * g * product_variance(atoms.mean.x, atoms.var.x, light.mean.z, light.var.z);

    Ok((light_out, atoms_out))
}

/// var(S_y) after the interaction for coherent x-polarized light and atoms:
/// N_p/4 + G²(N_p²/4)(N_a/4).
pub fn output_variance(n_photons: f64, n_atoms: f64, g: f64) -> f64 {
    n_photons / 4.0 + g * g * (n_photons * n_photons / 4.0) * (n_atoms / 4.0)
}

/// Polarization rotation θ = G⟨J_z⟩.
pub fn faraday_angle(atoms: &CollectiveSpinState, g: f64) -> f64 {
    g * atoms.mean.z
}

/// OD = 2σ₀θ/G̃(Δ).
pub fn od_from_angle(theta: f64, detuning_hz: f64, spec: &AtomSpec, opts: &CouplingOptions) -> Result<f64> {
    let g_tilde = area_coupling(detuning_hz, spec, opts)?;
    Ok(2.0 * spec.cross_section_m2() * theta / g_tilde)
}

/// Rank-2 (alignment) interaction ∝ S_xJ_x + S_yJ_y, first order in `kappa2`:
/// a circularly polarized probe has S_z rotated onto S_y by κ₂⟨J_x⟩.
pub fn alignment_interact(light: &StokesState, atoms: &CollectiveSpinState, kappa2: f64) -> Result<StokesState> {
    light.validate()?;
    atoms.validate()?;
    let mut out = *light;
    out.mean.y += kappa2 * atoms.mean.x * light.mean.z;
    out.var.y += kappa2 * kappa2 * product_variance(light.mean.z, light.var.z, atoms.mean.x, atoms.var.x);
    Ok(out)
}

/// Single-atom expectation values and variances of (j_x, j_y, j_z).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudoSpinMoments {
    pub mean: Vector3<f64>,
    pub var: Vector3<f64>,
}

/// Spin-1 pseudo-spin operators in the m = −1, 0, +1 basis:
/// j_x = (F_x² − F_y²)/2, j_y = (F_xF_y + F_yF_x)/2, j_z = F_z/2.
#[derive(Debug, Clone)]
pub struct PseudoSpinOperators {
    pub jx: Matrix3<Complex64>,
    pub jy: Matrix3<Complex64>,
    pub jz: Matrix3<Complex64>,
}

impl PseudoSpinOperators {
    pub fn new() -> Self {
        let ms = [-1.0_f64, 0.0, 1.0];
        // F₊|m⟩ = √(2 − m(m+1)) |m+1⟩ for F = 1
        let mut raise = Matrix3::<Complex64>::zeros();
        for col in 0..2 {
            let m = ms[col];
            raise[(col + 1, col)] = Complex64::new((2.0 - m * (m + 1.0)).sqrt(), 0.0);
        }
        let lower = raise.adjoint();
        let half = Complex64::new(0.5, 0.0);
        let fx = (raise + lower) * half;
        let fy = (raise - lower) * Complex64::new(0.0, -0.5);
        let fz = Matrix3::from_diagonal(&ms.map(|m| Complex64::new(m, 0.0)).into());

        PseudoSpinOperators {
            jx: (fx * fx - fy * fy) * half,
            jy: (fx * fy + fy * fx) * half,
            jz: fz * half,
        }
    }

    pub fn moments(&self, amplitudes: &[Complex64; 3]) -> Result<PseudoSpinMoments> {
        let psi = nalgebra::Vector3::from_column_slice(amplitudes);
        let norm = psi.norm_squared();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::validation(
                "amplitudes",
                format!("state must be normalized, |ψ|² = {norm}"),
            ));
        }
        let expect = |op: &Matrix3<Complex64>| psi.dotc(&(op * psi)).re;
        let ops = [&self.jx, &self.jy, &self.jz];
        let mean = Vector3::from_fn(|i, _| expect(ops[i]));
        let var = Vector3::from_fn(|i, _| (expect(&(ops[i] * ops[i])) - mean[i] * mean[i]).max(0.0));
        Ok(PseudoSpinMoments { mean, var })
    }
}

impl Default for PseudoSpinOperators {
    fn default() -> Self {
        Self::new()
    }
}

/// Single-atom pseudo-spin expectation (j_x, j_y, j_z) for amplitudes over m = −1, 0, +1.
pub fn single_atom_pseudospin(amplitudes: &[Complex64; 3]) -> Result<Vector3<f64>> {
    Ok(PseudoSpinOperators::new().moments(amplitudes)?.mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rb() -> AtomSpec {
        AtomSpec::rubidium87_d2()
    }

    #[test]
    fn detuning_factor_values() {
        let opts = CouplingOptions::default();
        let d0 = detuning_factor(-1.6e9, ExcitedLevel::F0, &rb(), &opts).unwrap();
        assert_relative_eq!(d0, -6.25e-10, max_relative = 1e-15);
        let d2 = detuning_factor(-1.6e9, ExcitedLevel::F2, &rb(), &opts).unwrap();
        assert_relative_eq!(d2, 1.0 / -1.829_165e9, max_relative = 1e-15);
        assert_relative_eq!(d2, -5.467e-10, max_relative = 1e-3);
        for level in ExcitedLevel::ALL {
            assert!(detuning_factor(-1e15, level, &rb(), &opts).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn near_resonance_guard() {
        let opts = CouplingOptions::default();
        let err = detuning_factor(72.218e6 + 5.0 * 6.0666e6, ExcitedLevel::F1, &rb(), &opts).unwrap_err();
        assert!(matches!(err, Error::NearResonance { level: 1, .. }));
        // 10 Γ is exactly the guard distance; just outside passes
        assert!(detuning_factor(-61e6, ExcitedLevel::F0, &rb(), &opts).is_ok());
        assert!(coupling_constant(0.0, 1e-9, &rb(), &opts).is_err());
    }

    #[test]
    fn mirrored_convention_moves_poles() {
        let opts = CouplingOptions {
            convention: DetuningConvention::Mirrored,
            ..Default::default()
        };
        assert!(detuning_factor(-229.165e6, ExcitedLevel::F2, &rb(), &opts).is_err());
        assert!(detuning_factor(229.165e6, ExcitedLevel::F2, &rb(), &CouplingOptions::default()).is_err());
        // mirrored form at −Δ equals physical form at +Δ, negated
        let lit = area_coupling(-1.6e9, &rb(), &opts).unwrap();
        let phys = area_coupling(1.6e9, &rb(), &CouplingOptions::default()).unwrap();
        assert_relative_eq!(lit, -phys, max_relative = 1e-14);
    }

    #[test]
    fn coupling_area_scaling() {
        let opts = CouplingOptions::default();
        let a = coupling_constant(-1.6e9, 3.77e-9, &rb(), &opts).unwrap();
        let b = coupling_constant(-1.6e9, 3.77e-9 / 2.0, &rb(), &opts).unwrap();
        assert_relative_eq!(b.g, 2.0 * a.g, max_relative = 1e-15);
        assert_eq!(a.g_tilde, b.g_tilde);
        assert!(coupling_constant(-1.6e9, 0.0, &rb(), &opts).is_err());
        let far = coupling_constant(-1e16, 3.77e-9, &rb(), &opts).unwrap();
        assert!(far.g.abs() < 1e-6 * a.g.abs());
    }

    #[test]
    fn qnd_zero_coupling_is_identity() {
        let light = StokesState::coherent_x(4e6, 1e-6);
        let atoms = CollectiveSpinState::coherent_x(1e6, 1.0);
        let (l, a) = qnd_interact(&light, &atoms, 0.0).unwrap();
        assert_eq!(l, light);
        assert_eq!(a, atoms);
    }

    #[test]
    fn qnd_mean_matches_faraday_angle() {
        let n_p = 4.3e6;
        let n_a = 1e6;
        let g = 2.0 * 0.0268 / n_a;
        let light = StokesState::coherent_x(n_p, 1e-6);
        let atoms = CollectiveSpinState::pumped_z(n_a, 1.0);
        let (l, _) = qnd_interact(&light, &atoms, g).unwrap();
        let theta = faraday_angle(&atoms, g);
        assert_relative_eq!(l.mean.y, g * (n_a / 2.0) * (n_p / 2.0), max_relative = 1e-14);
        assert_relative_eq!(l.mean.y, theta * light.mean.x, max_relative = 1e-14);
    }

    #[test]
    fn qnd_variance_reduces_to_output_variance() {
        let (n_p, n_a, g) = (4e6, 1e6, 3e-7);
        let light = StokesState::coherent_x(n_p, 1e-6);
        let atoms = CollectiveSpinState::coherent_x(n_a, 1.0);
        let (l, a) = qnd_interact(&light, &atoms, g).unwrap();
        let expected = n_p / 4.0 + g * g * (n_p * n_p / 4.0) * (n_a / 4.0);
        assert_relative_eq!(l.var.y, expected, max_relative = 1e-14);
        assert_relative_eq!(l.var.y, output_variance(n_p, n_a, g), max_relative = 1e-14);
        assert_eq!(a.var.z, atoms.var.z);
    }

    #[test]
    fn output_variance_limits() {
        assert_eq!(output_variance(4.3e6, 0.0, 1e-3), 4.3e6 / 4.0);
        let (n_p, n_a, theta) = (4.3e6, 1e6, 0.0268);
        let g = 2.0 * theta / n_a;
        let ratio = (output_variance(n_p, n_a, g) - n_p / 4.0) / (n_p / 4.0);
        assert_relative_eq!(ratio, g * g * n_p * n_a / 4.0, max_relative = 1e-10);
        assert!((ratio - 0.003).abs() < 5e-4, "ratio {ratio}");
    }

    #[test]
    fn faraday_angle_sign_flip_and_linearity() {
        let g = 5.36e-8;
        let up = CollectiveSpinState::pumped_z(1e6, 1.0);
        let down = CollectiveSpinState::pumped_z(1e6, -1.0);
        assert_eq!(faraday_angle(&up, g), -faraday_angle(&down, g));
        assert_eq!(faraday_angle(&CollectiveSpinState::pumped_z(0.0, 1.0), g), 0.0);
        let twice = CollectiveSpinState::pumped_z(2e6, 1.0);
        assert_eq!(faraday_angle(&twice, g), 2.0 * faraday_angle(&up, g));
        assert_eq!(faraday_angle(&up, 2.0 * g), 2.0 * faraday_angle(&up, g));
    }

    #[test]
    fn od_from_angle_cancels_detuning() {
        let opts = CouplingOptions::default();
        let n_c = 2.65e14;
        assert_eq!(od_from_angle(0.0, -1.6e9, &rb(), &opts).unwrap(), 0.0);
        for k in 0..10 {
            let delta = -2.3e9 + k as f64 * 1.5e9 / 9.0;
            let theta = n_c * area_coupling(delta, &rb(), &opts).unwrap() / 2.0;
            let od = od_from_angle(theta, delta, &rb(), &opts).unwrap();
            assert_relative_eq!(od, rb().cross_section_m2() * n_c, max_relative = 1e-13);
            assert!((od - 51.4).abs() < 0.05);
        }
    }

    #[test]
    fn alignment_rotation() {
        let light = StokesState::circular(1e6, 1e-6, 1.0);
        let atoms = CollectiveSpinState::coherent_x(1e4, 1.0);
        assert_eq!(alignment_interact(&light, &atoms, 0.0).unwrap(), light);
        let k = 1e-9;
        let out = alignment_interact(&light, &atoms, k).unwrap();
        assert_relative_eq!(out.mean.y / light.mean.z, k * 1e4 / 2.0, max_relative = 1e-14);
        let flipped = CollectiveSpinState::coherent_x(1e4, -1.0);
        let out_f = alignment_interact(&light, &flipped, k).unwrap();
        assert_eq!(out_f.mean.y, -out.mean.y);
    }

    #[test]
    fn invalid_states_rejected() {
        let bad = CollectiveSpinState::new(Vector3::new(0.0, 0.0, 1.0), Vector3::zeros(), 1.0);
        assert!(bad.is_err());
        let neg = StokesState::new(Vector3::zeros(), Vector3::new(-1.0, 0.0, 0.0), 1.0, 1e-6);
        assert!(neg.is_err());
    }

    #[test]
    fn pseudospin_rejects_unnormalized() {
        let c = |re: f64| Complex64::new(re, 0.0);
        assert!(single_atom_pseudospin(&[c(1.0), c(0.0), c(1.0)]).is_err());
    }

    #[test]
    fn collective_from_identical_atoms() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let amps = [Complex64::new(r, 0.0), Complex64::new(0.0, 0.0), Complex64::new(r, 0.0)];
        let j = single_atom_pseudospin(&amps).unwrap();
        let n = 1234.0;
        let collective = CollectiveSpinState::from_identical_atoms(&amps, n).unwrap();
        assert_relative_eq!(collective.mean, j * n, epsilon = 1e-9);
        let coherent = CollectiveSpinState::coherent_x(n, 1.0);
        assert_relative_eq!(collective.mean, coherent.mean, epsilon = 1e-9);
        assert_relative_eq!(collective.var, coherent.var, epsilon = 1e-9);
        let up = [Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        let pumped = CollectiveSpinState::from_identical_atoms(&up, n).unwrap();
        assert_relative_eq!(pumped.var, CollectiveSpinState::pumped_z(n, 1.0).var, epsilon = 1e-9);
    }
}
