//! Atomic and trap-laser constants.
//!
//! Everything atom-specific lives in [`AtomSpec`] and [`TrapSpec`], loaded
//! from a JSON document so the rest of the crate never hard-codes a line
//! parameter. The shipped defaults are the ⁸⁷Rb D₂ values from D. A. Steck,
//! *Rubidium 87 D Line Data* (revision 2.2 and later):
//!
//! | quantity                         | value              |
//! |----------------------------------|--------------------|
//! | vacuum wavelength λ              | 780.241209686 nm   |
//! | natural linewidth Γ/2π           | 6.0666 MHz         |
//! | F′=0 → F′=1 splitting            | 72.2180 MHz        |
//! | F′=0 → F′=2 splitting            | 229.1650 MHz       |
//! | atomic mass                      | 1.443160648e-25 kg |
//!
//! Frequencies are linear (Hz) throughout.
//!
//! Document schema:
//!
//! ```json
//! {
//!   "wavelength_m": 780.241209686e-9,
//!   "linewidth_hz": 6.0666e6,
//!   "hf_splitting_f1_hz": 72.218e6,
//!   "hf_splitting_f2_hz": 229.165e6,
//!   "mass_kg": 1.443160648e-25,
//!   "trap": { "wavelength_m": 1030e-9, "power_w": 7.0, "waist_m": 50e-6 }
//! }
//! ```

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// Fundamental constants (CODATA 2018, exact where defined).
pub mod constants {
    pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
    pub const PLANCK: f64 = 6.626_070_15e-34;
    pub const BOLTZMANN: f64 = 1.380_649e-23;
}

/// Excited hyperfine level F′ reached from the F=1 ground manifold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExcitedLevel {
    F0,
    F1,
    F2,
}

impl ExcitedLevel {
    pub const ALL: [ExcitedLevel; 3] = [ExcitedLevel::F0, ExcitedLevel::F1, ExcitedLevel::F2];

    pub fn f(self) -> u8 {
        match self {
            ExcitedLevel::F0 => 0,
            ExcitedLevel::F1 => 1,
            ExcitedLevel::F2 => 2,
        }
    }
}

/// Atomic constants of the probed F=1 → F′ manifold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomSpec {
    pub wavelength_m: f64,
    pub linewidth_hz: f64,
    /// Splittings of F′=1 and F′=2 above F′=0.
    pub hf_splitting_f1_hz: f64,
    pub hf_splitting_f2_hz: f64,
    pub mass_kg: f64,
    cross_section_m2: f64,
}

impl AtomSpec {
    pub fn new(
        wavelength_m: f64,
        linewidth_hz: f64,
        hf_splitting_f1_hz: f64,
        hf_splitting_f2_hz: f64,
        mass_kg: f64,
    ) -> Result<Self> {
        positive("wavelength_m", wavelength_m)?;
        positive("linewidth_hz", linewidth_hz)?;
        positive("mass_kg", mass_kg)?;
        if !hf_splitting_f1_hz.is_finite() || hf_splitting_f1_hz < 0.0 {
            return Err(Error::Config {
                field: "hf_splitting_f1_hz".into(),
                reason: format!("must be finite and >= 0, got {hf_splitting_f1_hz}"),
            });
        }
        positive("hf_splitting_f2_hz", hf_splitting_f2_hz)?;
        if hf_splitting_f1_hz >= hf_splitting_f2_hz {
            return Err(Error::Config {
                field: "hf_splitting_f2_hz".into(),
                reason: format!(
                    "must exceed hf_splitting_f1_hz ({hf_splitting_f1_hz}), got {hf_splitting_f2_hz}"
                ),
            });
        }
        Ok(AtomSpec {
            wavelength_m,
            linewidth_hz,
            hf_splitting_f1_hz,
            hf_splitting_f2_hz,
            mass_kg,
            cross_section_m2: wavelength_m * wavelength_m / PI,
        })
    }

    /// ⁸⁷Rb D₂ line, F=1 ground manifold.
    pub fn rubidium87_d2() -> Self {
        AtomSpec::new(780.241_209_686e-9, 6.0666e6, 72.218e6, 229.165e6, 1.443_160_648e-25)
            .expect("built-in constants are valid")
    }

    /// Position of the F=1 → F′ resonance relative to F=1 → F′=0.
    pub fn hf_splitting_hz(&self, level: ExcitedLevel) -> f64 {
        match level {
            ExcitedLevel::F0 => 0.0,
            ExcitedLevel::F1 => self.hf_splitting_f1_hz,
            ExcitedLevel::F2 => self.hf_splitting_f2_hz,
        }
    }

    /// Summed on-resonance cross section σ₀ = λ²/π.
    pub fn cross_section_m2(&self) -> f64 {
        self.cross_section_m2
    }

    pub fn transition_frequency_hz(&self) -> f64 {
        constants::SPEED_OF_LIGHT / self.wavelength_m
    }
}

impl Default for AtomSpec {
    fn default() -> Self {
        AtomSpec::rubidium87_d2()
    }
}

/// Far-off-resonance dipole trap beam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapSpec {
    pub wavelength_m: f64,
    pub power_w: f64,
    /// 1/e² intensity radius.
    pub waist_m: f64,
}

impl TrapSpec {
    pub fn new(wavelength_m: f64, power_w: f64, waist_m: f64) -> Result<Self> {
        positive("trap.wavelength_m", wavelength_m)?;
        positive("trap.power_w", power_w)?;
        positive("trap.waist_m", waist_m)?;
        Ok(TrapSpec {
            wavelength_m,
            power_w,
            waist_m,
        })
    }

    /// 7 W Yb:YAG at 1030 nm focused to a 50 µm waist.
    pub fn yb_yag_1030() -> Self {
        TrapSpec {
            wavelength_m: 1030e-9,
            power_w: 7.0,
            waist_m: 50e-6,
        }
    }

    pub fn peak_intensity_w_m2(&self) -> f64 {
        2.0 * self.power_w / (PI * self.waist_m * self.waist_m)
    }
}

impl Default for TrapSpec {
    fn default() -> Self {
        TrapSpec::yb_yag_1030()
    }
}

/// Parses and validates the atomic section of a configuration document.
pub fn load_atom_spec(document: &str) -> Result<AtomSpec> {
    let root = parse_object(document)?;
    atom_from_object(&root)
}

/// Parses and validates the `trap` section of a configuration document.
pub fn load_trap_spec(document: &str) -> Result<TrapSpec> {
    let root = parse_object(document)?;
    let trap = match root.get("trap") {
        Some(Value::Object(map)) => map,
        Some(_) => {
            return Err(Error::Config {
                field: "trap".into(),
                reason: "must be an object".into(),
            })
        }
        None => {
            return Err(Error::Config {
                field: "trap".into(),
                reason: "missing required key".into(),
            })
        }
    };
    TrapSpec::new(
        number(trap, "wavelength_m", "trap.")?,
        number(trap, "power_w", "trap.")?,
        number(trap, "waist_m", "trap.")?,
    )
}

/// JSON document for the given constants, in the schema [`load_atom_spec`] reads.
pub fn to_document(atom: &AtomSpec, trap: &TrapSpec) -> String {
    let value = serde_json::json!({
        "wavelength_m": atom.wavelength_m,
        "linewidth_hz": atom.linewidth_hz,
        "hf_splitting_f1_hz": atom.hf_splitting_f1_hz,
        "hf_splitting_f2_hz": atom.hf_splitting_f2_hz,
        "mass_kg": atom.mass_kg,
        "trap": trap,
    });
    serde_json::to_string_pretty(&value).expect("plain numbers serialize")
}

/// σ₀ = λ²/π.
pub fn resonant_cross_section(spec: &AtomSpec) -> f64 {
    spec.cross_section_m2()
}

fn parse_object(document: &str) -> Result<Map<String, Value>> {
    match serde_json::from_str::<Value>(document)? {
        Value::Object(map) => Ok(map),
        _ => Err(Error::Config {
            field: "<root>".into(),
            reason: "expected a JSON object".into(),
        }),
    }
}

fn atom_from_object(root: &Map<String, Value>) -> Result<AtomSpec> {
    AtomSpec::new(
        number(root, "wavelength_m", "")?,
        number(root, "linewidth_hz", "")?,
        number(root, "hf_splitting_f1_hz", "")?,
        number(root, "hf_splitting_f2_hz", "")?,
        number(root, "mass_kg", "")?,
    )
}

fn number(map: &Map<String, Value>, key: &str, prefix: &str) -> Result<f64> {
    match map.get(key) {
        Some(v) => v.as_f64().ok_or_else(|| Error::Config {
            field: format!("{prefix}{key}"),
            reason: format!("expected a number, got {v}"),
        }),
        None => Err(Error::Config {
            field: format!("{prefix}{key}"),
            reason: "missing required key".into(),
        }),
    }
}

fn positive(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::Config {
            field: field.into(),
            reason: format!("must be finite and > 0, got {value}"),
        })
    }
}
