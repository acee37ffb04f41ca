#![allow(dead_code)]

use coldspin::detector::{DetectorSpec, TransmissionSpec};
use coldspin::experiment::DestructionModel;
use coldspin::{AtomSpec, CollectiveSpinState, CouplingOptions};

pub const N_ATOMS: f64 = 1e6;
pub const COLUMN_DENSITY: f64 = 2.65e14;

pub fn spec() -> AtomSpec {
    AtomSpec::rubidium87_d2()
}

pub fn area() -> f64 {
    N_ATOMS / COLUMN_DENSITY
}

pub fn pumped() -> CollectiveSpinState {
    CollectiveSpinState::pumped_z(N_ATOMS, 1.0)
}

pub struct Bench {
    pub spec: AtomSpec,
    pub atoms: CollectiveSpinState,
    pub detector: DetectorSpec,
    pub transmission: TransmissionSpec,
    pub destruction: DestructionModel,
    pub coupling: CouplingOptions,
}

impl Default for Bench {
    fn default() -> Self {
        Bench {
            spec: spec(),
            atoms: pumped(),
            detector: DetectorSpec::default(),
            transmission: TransmissionSpec::default(),
            destruction: DestructionModel::default(),
            coupling: CouplingOptions::default(),
        }
    }
}

impl Bench {
    pub fn setup(&self) -> coldspin::experiment::ScanSetup<'_> {
        coldspin::experiment::ScanSetup {
            atoms: &self.atoms,
            spec: &self.spec,
            area_m2: area(),
            detector: &self.detector,
            transmission: &self.transmission,
            destruction: &self.destruction,
            coupling: &self.coupling,
        }
    }
}
