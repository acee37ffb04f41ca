//! Parameter estimation: column density from a detuning scan, optical depth,
//! photon budget and SNR, two-body trap loss and time-of-flight temperature.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::atomic::constants::BOLTZMANN;
use crate::atomic::AtomSpec;
use crate::detector::DetectorSpec;
use crate::dynamics::population_closed_form;
use crate::error::{Error, Result};
use crate::experiment::ScanDataset;
use crate::spin_optics::{area_coupling, CouplingOptions};

pub const N_C: &str = "n_c";
pub const OD: &str = "od";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: BTreeMap<String, f64>,
    /// One-standard-deviation uncertainties, same keys as `params`.
    pub sigmas: BTreeMap<String, f64>,
    pub chi2: f64,
    pub dof: usize,
    pub converged: bool,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Result<f64> {
        self.params
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingParameter(name.to_string()))
    }

    pub fn sigma(&self, name: &str) -> Result<f64> {
        self.sigmas
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingParameter(name.to_string()))
    }

    pub fn reduced_chi2(&self) -> f64 {
        self.chi2 / self.dof as f64
    }

    fn insert(&mut self, name: &str, value: f64, sigma: f64) {
        self.params.insert(name.to_string(), value);
        self.sigmas.insert(name.to_string(), sigma.abs());
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain numbers serialize")
    }
}

/// Which per-point error weights the column-density fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// 1/σ² with σ the run-to-run standard deviation (the plotted error bars).
    #[default]
    StandardDeviation,
    /// 1/σ² with σ the standard error of the mean.
    StandardError,
    /// Equal weights; the uncertainty comes from the residual scatter.
    Unweighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ColumnDensityFitOptions {
    pub weighting: Weighting,
    pub coupling: CouplingOptions,
}

/// θ(Δ) = n_c·G̃(Δ)/2, the forward model the column-density fit inverts.
pub fn rotation_model(n_c: f64, detuning_hz: f64, spec: &AtomSpec, opts: &CouplingOptions) -> Result<f64> {
    Ok(n_c * area_coupling(detuning_hz, spec, opts)? / 2.0)
}

/// Single-point inversion n_c = 2θ/G̃(Δ).
pub fn column_density_from_angle(theta: f64, detuning_hz: f64, spec: &AtomSpec, opts: &CouplingOptions) -> Result<f64> {
    Ok(2.0 * theta / area_coupling(detuning_hz, spec, opts)?)
}

pub fn fit_column_density(data: &ScanDataset, spec: &AtomSpec) -> Result<FitResult> {
    fit_column_density_with(data, spec, &ColumnDensityFitOptions::default())
}

/// Weighted linear least squares for the single parameter n_c:
/// n̂_c = Σwθg / Σwg², σ = (Σwg²)^(−1/2), g = G̃(Δ)/2.
///
/// Points whose selected error is zero are dropped.
pub fn fit_column_density_with(
    data: &ScanDataset,
    spec: &AtomSpec,
    opts: &ColumnDensityFitOptions,
) -> Result<FitResult> {
    let mut points = Vec::with_capacity(data.records.len());
    for r in &data.records {
        let sigma = match opts.weighting {
            Weighting::StandardDeviation => r.theta_stddev_rad,
            Weighting::StandardError => r.theta_stderr_rad,
            Weighting::Unweighted => 1.0,
        };
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::validation("theta_sigma", format!("invalid uncertainty {sigma} at Δ = {}", r.detuning_hz)));
        }
        if sigma == 0.0 {
            continue;
        }
        let g = area_coupling(r.detuning_hz, spec, &opts.coupling)? / 2.0;
        points.push((r.theta_mean_rad, g, sigma.powi(-2)));
    }
    if points.is_empty() && !data.records.is_empty() {
        return Err(Error::Degenerate("all points have zero weight".into()));
    }
    if points.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: points.len(),
        });
    }

    let sum_wgg: f64 = points.iter().map(|(_, g, w)| w * g * g).sum();
    if sum_wgg == 0.0 || !sum_wgg.is_finite() {
        return Err(Error::Degenerate("model is identically zero on the scan grid".into()));
    }
    let n_c = points.iter().map(|(th, g, w)| w * th * g).sum::<f64>() / sum_wgg;
    let ssr: f64 = points.iter().map(|(th, g, w)| w * (th - n_c * g).powi(2)).sum();
    let dof = points.len() - 1;

    let sigma = match opts.weighting {
        Weighting::Unweighted => (ssr / dof as f64 / sum_wgg).sqrt(),
        _ => sum_wgg.sqrt().recip(),
    };
    let mut fit = FitResult {
        params: BTreeMap::new(),
        sigmas: BTreeMap::new(),
        chi2: ssr,
        dof,
        converged: true,
    };
    fit.insert(N_C, n_c, sigma);
    Ok(fit)
}

/// OD = σ₀·n_c with linear error propagation.
pub fn compute_od(fit: &FitResult, spec: &AtomSpec) -> Result<(f64, f64)> {
    let n_c = fit.param(N_C)?;
    let sigma = fit.sigma(N_C)?;
    let s0 = spec.cross_section_m2();
    Ok((s0 * n_c, s0 * sigma))
}

/// Photons per pulse for atomic projection noise to exceed shot noise by `a`:
/// N_L = a·N_a/θ².
pub fn photon_budget(a: f64, n_atoms: f64, theta: f64) -> Result<f64> {
    if theta == 0.0 || !theta.is_finite() {
        return Err(Error::validation("theta", "rotation angle must be finite and non-zero"));
    }
    Ok(a * n_atoms / (theta * theta))
}

/// θ·N_L·√n_avg / √(N_L + electronic noise).
pub fn snr_report(theta: f64, n_photons: f64, det: &DetectorSpec, n_avg: usize) -> f64 {
    theta * n_photons * (n_avg as f64).sqrt() / (n_photons + det.electronic_noise_var).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecaySample {
    pub t_s: f64,
    pub n_atoms: f64,
    pub sigma_n: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussNewtonOptions {
    pub max_iterations: usize,
    /// Stop when every scaled parameter moves by less than this.
    pub rel_tolerance: f64,
    pub jacobian_step: f64,
}

impl Default for GaussNewtonOptions {
    fn default() -> Self {
        GaussNewtonOptions {
            max_iterations: 200,
            rel_tolerance: 1e-10,
            jacobian_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GaussNewtonOutcome {
    pub params: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub chi2: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Gauss–Newton with backtracking for weighted residuals `residuals(p)`.
///
/// Parameters are rescaled by `scale` internally; the Jacobian uses central
/// differences with a relative step. The best point seen is always returned;
/// `converged` is set only when the step criterion is met.
pub fn gauss_newton<F>(
    residuals: F,
    initial: &DVector<f64>,
    scale: &DVector<f64>,
    opts: &GaussNewtonOptions,
) -> Result<GaussNewtonOutcome>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = initial.len();
    let unscale = |q: &DVector<f64>| q.component_mul(scale);
    let eval = |q: &DVector<f64>| residuals(&unscale(q));
    let cost = |r: &DVector<f64>| r.norm_squared();

    let mut q = initial.component_div(scale);
    let mut r = eval(&q);
    if r.len() <= n {
        return Err(Error::InsufficientData { needed: n + 1, got: r.len() });
    }
    if r.iter().any(|x| !x.is_finite()) {
        return Err(Error::Degenerate("residuals not finite at the initial point".into()));
    }
    let mut chi2 = cost(&r);
    let mut converged = false;
    let mut iterations = 0;

    let m = r.len();
    let jacobian = |q: &DVector<f64>| {
        let mut jac = DMatrix::zeros(m, n);
        for j in 0..n {
            let h = opts.jacobian_step * q[j].abs().max(1.0);
            let mut plus = q.clone();
            let mut minus = q.clone();
            plus[j] += h;
            minus[j] -= h;
            let column = (eval(&plus) - eval(&minus)) / (2.0 * h);
            jac.set_column(j, &column);
        }
        jac
    };

    while iterations < opts.max_iterations {
        iterations += 1;
        let jac = jacobian(&q);
        let normal = jac.transpose() * &jac;
        let rhs = -(jac.transpose() * &r);
        let step = normal
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Degenerate("singular normal matrix".into()))?;

        let rel_change = step
            .iter()
            .zip(q.iter())
            .map(|(s, x)| s.abs() / x.abs().max(1.0))
            .fold(0.0, f64::max);
        if rel_change < opts.rel_tolerance {
            converged = true;
            break;
        }

        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial = &q + &step * alpha;
            let r_trial = eval(&trial);
            let c = cost(&r_trial);
            if c.is_finite() && c < chi2 {
                q = trial;
                r = r_trial;
                chi2 = c;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // No downhill step at machine precision: stationary if the step was already tiny.
            converged = rel_change < 1e-7;
            break;
        }
    }

    let jac = jacobian(&q);
    let normal = jac.transpose() * &jac;
    let cov_scaled = normal
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("singular normal matrix at solution".into()))?;
    let s = DMatrix::from_diagonal(scale);
    Ok(GaussNewtonOutcome {
        params: unscale(&q),
        covariance: &s * cov_scaled * &s,
        chi2,
        iterations,
        converged,
    })
}

/// Fits N(t) = N₀e^{−t/τ} / (1 + N₀(β/V_eff)(1 − e^{−t/τ})τ) to trap-loss data.
///
/// Reported parameters: `n0`, `loss_rate_per_s` (1/τ), `tau_s`, `beta_m3_s`
/// and `beta_cm3_s`.
pub fn fit_two_body_decay(samples: &[DecaySample], v_eff_m3: f64) -> Result<FitResult> {
    fit_two_body_decay_with(samples, v_eff_m3, &GaussNewtonOptions::default())
}

pub fn fit_two_body_decay_with(
    samples: &[DecaySample],
    v_eff_m3: f64,
    opts: &GaussNewtonOptions,
) -> Result<FitResult> {
    if samples.len() < 4 {
        return Err(Error::InsufficientData {
            needed: 4,
            got: samples.len(),
        });
    }
    if !(v_eff_m3 > 0.0) {
        return Err(Error::validation("v_eff_m3", "must be > 0"));
    }
    for s in samples {
        if !(s.sigma_n > 0.0 && s.n_atoms > 0.0 && s.t_s >= 0.0) {
            return Err(Error::validation(
                "decay_sample",
                format!("need t >= 0, N > 0, sigma > 0; got {s:?}"),
            ));
        }
    }

    // 1/N ≈ 1/N₀ + k t for pure two-body loss; its linear fit seeds the search.
    let (intercept, slope) = linear_fit(samples.iter().map(|s| (s.t_s, 1.0 / s.n_atoms)));
    let t_span = samples.iter().map(|s| s.t_s).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let n0_guess = if intercept > 0.0 { intercept.recip() } else { samples[0].n_atoms };
    let total = (slope * n0_guess).max(1e-3 / t_span);
    let initial = DVector::from_vec(vec![n0_guess, 0.1 * total, 0.9 * total / n0_guess * v_eff_m3]);
    let scale = DVector::from_vec(vec![n0_guess, t_span.recip(), v_eff_m3 / (n0_guess * t_span)]);

    let residuals = |p: &DVector<f64>| {
        DVector::from_iterator(
            samples.len(),
            samples.iter().map(|s| {
                let model = population_closed_form(p[0], p[1], p[2] / v_eff_m3, s.t_s);
                (s.n_atoms - model) / s.sigma_n
            }),
        )
    };
    let out = gauss_newton(residuals, &initial, &scale, opts)?;

    let sig = |i: usize| out.covariance[(i, i)].max(0.0).sqrt();
    let (n0, gamma, beta) = (out.params[0], out.params[1], out.params[2]);
    let mut fit = FitResult {
        params: BTreeMap::new(),
        sigmas: BTreeMap::new(),
        chi2: out.chi2,
        dof: samples.len() - 3,
        converged: out.converged,
    };
    fit.insert("n0", n0, sig(0));
    fit.insert("loss_rate_per_s", gamma, sig(1));
    fit.insert("tau_s", gamma.recip(), sig(1) / (gamma * gamma));
    fit.insert("beta_m3_s", beta, sig(2));
    fit.insert("beta_cm3_s", beta * 1e6, sig(2) * 1e6);
    Ok(fit)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TofSample {
    pub t_s: f64,
    pub sigma_m: f64,
}

/// Linear fit of σ² against t²; the slope is k_BT/m.
///
/// Reported parameters: `temperature_k`, `slope_m2_s2`, `sigma0_m`.
pub fn fit_tof_temperature(samples: &[TofSample], mass_kg: f64) -> Result<FitResult> {
    if samples.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: samples.len(),
        });
    }
    if !(mass_kg > 0.0) {
        return Err(Error::validation("mass_kg", "must be > 0"));
    }
    let xy: Vec<(f64, f64)> = samples.iter().map(|s| (s.t_s * s.t_s, s.sigma_m * s.sigma_m)).collect();
    let n = xy.len() as f64;
    let mean_x = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all samples taken at the same expansion time".into()));
    }
    let (intercept, slope) = linear_fit(xy.iter().copied());
    if slope < 0.0 {
        return Err(Error::Unphysical(format!("negative expansion slope {slope:e} m²/s²")));
    }
    let ssr: f64 = xy.iter().map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let dof = xy.len() - 2;
    let s2 = ssr / dof as f64;
    let sigma_slope = (s2 / sxx).sqrt();
    let sigma_intercept = (s2 * (1.0 / n + mean_x * mean_x / sxx)).sqrt();

    let to_kelvin = mass_kg / BOLTZMANN;
    let mut fit = FitResult {
        params: BTreeMap::new(),
        sigmas: BTreeMap::new(),
        chi2: ssr,
        dof,
        converged: true,
    };
    fit.insert("temperature_k", slope * to_kelvin, sigma_slope * to_kelvin);
    fit.insert("slope_m2_s2", slope, sigma_slope);
    let sigma0 = intercept.max(0.0).sqrt();
    let sigma0_err = if sigma0 > 0.0 { sigma_intercept / (2.0 * sigma0) } else { sigma_intercept.sqrt() };
    fit.insert("sigma0_m", sigma0, sigma0_err);
    Ok(fit)
}

/// Ordinary least-squares line, returning (intercept, slope).
fn linear_fit(points: impl Iterator<Item = (f64, f64)> + Clone) -> (f64, f64) {
    let n = points.clone().count() as f64;
    let (sx, sy) = points.clone().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let (sxy, sxx) = points.fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx) * (x - mx)));
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - slope * mx, slope)
}
