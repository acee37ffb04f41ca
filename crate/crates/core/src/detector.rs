//! Balanced polarimeter: shot noise, electronic noise, dichroic losses, and the
//! integrated pulse waveform.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format_sci;

/// Source of standard-normal deviates for the noise model.
pub trait NoiseSource {
    fn standard_normal(&mut self) -> f64;
}

impl<R: Rng> NoiseSource for R {
    fn standard_normal(&mut self) -> f64 {
        self.sample(StandardNormal)
    }
}

/// A noise source that always returns zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct Noiseless;

impl NoiseSource for Noiseless {
    fn standard_normal(&mut self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSpec {
    /// Electronic noise as the variance of an equivalent photon-number imbalance.
    pub electronic_noise_var: f64,
    /// Signal units per photon.
    pub calibration_factor: f64,
    /// Width of the shaping filter's Gaussian output.
    pub filter_sigma_s: f64,
    pub sample_rate_hz: f64,
}

impl Default for DetectorSpec {
    fn default() -> Self {
        DetectorSpec {
            electronic_noise_var: 1e5,
            calibration_factor: 1.0,
            filter_sigma_s: 0.2e-6,
            sample_rate_hz: 100e6,
        }
    }
}

impl DetectorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.electronic_noise_var.is_finite() && self.electronic_noise_var >= 0.0) {
            return Err(Error::validation("electronic_noise_var", "must be finite and >= 0"));
        }
        if !(self.calibration_factor.is_finite() && self.calibration_factor != 0.0) {
            return Err(Error::validation("calibration_factor", "must be finite and non-zero"));
        }
        if !(self.filter_sigma_s > 0.0 && self.sample_rate_hz > 0.0) {
            return Err(Error::validation("filter_sigma_s", "filter width and sample rate must be > 0"));
        }
        if self.sample_rate_hz * self.filter_sigma_s < 4.0 {
            return Err(Error::validation(
                "sample_rate_hz",
                format!(
                    "pulse unresolved: sample_rate * filter_sigma = {} < 4",
                    self.sample_rate_hz * self.filter_sigma_s
                ),
            ));
        }
        Ok(())
    }
}

/// Amplitude transmission of the two output polarizations through the dichroic optics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransmissionSpec {
    pub t_h: f64,
    pub t_v: f64,
}

impl Default for TransmissionSpec {
    fn default() -> Self {
        TransmissionSpec { t_h: 1.0, t_v: 1.0 }
    }
}

impl TransmissionSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, t) in [("t_h", self.t_h), ("t_v", self.t_v)] {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::Validation {
                    field: if name == "t_h" { "t_h" } else { "t_v" },
                    reason: format!("must lie in (0, 1], got {t}"),
                });
            }
        }
        Ok(())
    }

    pub fn product(&self) -> f64 {
        self.t_h * self.t_v
    }
}

/// Measured imbalance ΔN′ for a pulse of `n_photons` rotated by `theta`.
///
/// The mean signal is θ·N·t_h·t_v; the noise is Gaussian with variance
/// N + electronic_noise_var.
pub fn simulate_pulse_detection<N: NoiseSource + ?Sized>(
    theta: f64,
    n_photons: f64,
    det: &DetectorSpec,
    tr: &TransmissionSpec,
    noise: &mut N,
) -> Result<f64> {
    if !(n_photons.is_finite() && n_photons > 0.0) {
        return Err(Error::validation("n_photons", format!("must be > 0, got {n_photons}")));
    }
    let sigma = (n_photons + det.electronic_noise_var).sqrt();
    Ok(theta * n_photons * tr.product() + sigma * noise.standard_normal())
}

/// θ = ΔN′ / (N·t_h·t_v).
pub fn extract_angle(delta_n: f64, n_photons: f64, tr: &TransmissionSpec) -> Result<f64> {
    if !(n_photons.is_finite() && n_photons > 0.0) {
        return Err(Error::validation("n_photons", format!("must be > 0, got {n_photons}")));
    }
    let t = tr.product();
    if t == 0.0 {
        return Err(Error::validation("transmission", "t_h * t_v must be non-zero"));
    }
    Ok(delta_n / (n_photons * t))
}

/// Variance of a single extracted angle: (N + electronic)/(N·t_h·t_v)².
pub fn angle_variance(n_photons: f64, det: &DetectorSpec, tr: &TransmissionSpec) -> f64 {
    let scale = n_photons * tr.product();
    (n_photons + det.electronic_noise_var) / (scale * scale)
}

/// Sampled detector output for one pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseRecord {
    pub samples: Vec<f64>,
    /// First sample of the integration window.
    pub window_start: usize,
    /// One past the last sample of the integration window.
    pub window_end: usize,
    /// Photon-number imbalance ΔN′ the window integrates to.
    pub integrated_imbalance: f64,
    pub n_photons_in: f64,
}

impl PulseRecord {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "sample_index,value")?;
        for (i, v) in self.samples.iter().enumerate() {
            writeln!(out, "{i},{}", format_sci(*v))?;
        }
        Ok(())
    }
}

/// Gaussian-shaped detector trace whose window sum is ΔN′ × calibration.
///
/// The shaped pulse peaks 4σ after the end of the optical pulse; the window
/// spans ±4σ around the peak and the trace runs 6σ past it.
pub fn synthesize_waveform(delta_n: f64, n_photons: f64, det: &DetectorSpec, tau_s: f64) -> Result<PulseRecord> {
    det.validate()?;
    if !(tau_s.is_finite() && tau_s > 0.0) {
        return Err(Error::validation("tau_s", format!("must be > 0, got {tau_s}")));
    }
    let dt = det.sample_rate_hz.recip();
    let sigma = det.filter_sigma_s;
    let peak_t = tau_s + 4.0 * sigma;
    let n_samples = ((peak_t + 6.0 * sigma) / dt).ceil() as usize + 1;
    let window_start = ((peak_t - 4.0 * sigma) / dt).floor().max(0.0) as usize;
    let window_end = (((peak_t + 4.0 * sigma) / dt).ceil() as usize + 1).min(n_samples);

    let shape: Vec<f64> = (0..n_samples)
        .map(|k| {
            let x = (k as f64 * dt - peak_t) / sigma;
            (-0.5 * x * x).exp()
        })
        .collect();
    let window_weight: f64 = shape[window_start..window_end].iter().sum();
    let amplitude = delta_n * det.calibration_factor / window_weight;
    let samples = shape.into_iter().map(|s| amplitude * s).collect();

    Ok(PulseRecord {
        samples,
        window_start,
        window_end,
        integrated_imbalance: delta_n,
        n_photons_in: n_photons,
    })
}

/// Window sum of the trace converted back to photon number.
pub fn integrate_window(record: &PulseRecord, det: &DetectorSpec) -> Result<f64> {
    if record.window_start > record.window_end || record.window_end > record.samples.len() {
        return Err(Error::validation(
            "window",
            format!(
                "[{}, {}) outside {} samples",
                record.window_start,
                record.window_end,
                record.samples.len()
            ),
        ));
    }
    let sum: f64 = record.samples[record.window_start..record.window_end].iter().sum();
    Ok(sum / det.calibration_factor)
}
