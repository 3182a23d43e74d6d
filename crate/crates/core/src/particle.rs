//! Particle species known to the QED rule table.
//!
//! Natural units with energies in MeV. Charges are in units of the
//! elementary charge (electron = -1).

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

pub const ELECTRON_MASS: f64 = 0.510_998_950_00;
pub const MUON_MASS: f64 = 105.658_375_5;
pub const TAUON_MASS: f64 = 1_776.86;

/// Fine-structure constant used when no override is configured.
pub const DEFAULT_ALPHA: f64 = 1.0 / 137.035_999;

/// Elementary charge `e = sqrt(4 pi alpha)` for a given fine-structure constant.
pub fn coupling_from_alpha(alpha: f64) -> f64 {
    (4.0 * std::f64::consts::PI * alpha).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistics {
    Fermion,
    Boson,
}

/// Declaration order doubles as the canonical ordering of out-particle slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ParticleType {
    Electron,
    Positron,
    Muon,
    Antimuon,
    Tauon,
    Antitauon,
    Photon,
}

impl ParticleType {
    pub const ALL: [ParticleType; 7] = [
        ParticleType::Electron,
        ParticleType::Positron,
        ParticleType::Muon,
        ParticleType::Antimuon,
        ParticleType::Tauon,
        ParticleType::Antitauon,
        ParticleType::Photon,
    ];

    pub fn charge(self) -> i32 {
        use ParticleType::*;
        match self {
            Electron | Muon | Tauon => -1,
            Positron | Antimuon | Antitauon => 1,
            Photon => 0,
        }
    }

    pub fn mass(self) -> f64 {
        use ParticleType::*;
        match self {
            Electron | Positron => ELECTRON_MASS,
            Muon | Antimuon => MUON_MASS,
            Tauon | Antitauon => TAUON_MASS,
            Photon => 0.0,
        }
    }

    pub fn statistics(self) -> Statistics {
        match self {
            ParticleType::Photon => Statistics::Boson,
            _ => Statistics::Fermion,
        }
    }

    pub fn is_fermion(self) -> bool {
        self.statistics() == Statistics::Fermion
    }

    /// True for the negatively charged member of a lepton pair.
    pub fn is_antifermion(self) -> bool {
        self.is_fermion() && self.charge() > 0
    }

    pub fn antiparticle(self) -> ParticleType {
        use ParticleType::*;
        match self {
            Electron => Positron,
            Positron => Electron,
            Muon => Antimuon,
            Antimuon => Muon,
            Tauon => Antitauon,
            Antitauon => Tauon,
            Photon => Photon,
        }
    }

    /// Short ASCII symbol used in rule tables, scenarios and records.
    pub fn symbol(self) -> &'static str {
        use ParticleType::*;
        match self {
            Electron => "e-",
            Positron => "e+",
            Muon => "mu-",
            Antimuon => "mu+",
            Tauon => "tau-",
            Antitauon => "tau+",
            Photon => "gamma",
        }
    }
}

impl fmt::Display for ParticleType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for ParticleType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        use ParticleType::*;
        Ok(match s.trim() {
            "e-" | "electron" | "e⁻" => Electron,
            "e+" | "positron" | "e⁺" => Positron,
            "mu-" | "muon" | "μ⁻" => Muon,
            "mu+" | "antimuon" | "μ⁺" => Antimuon,
            "tau-" | "tauon" | "τ⁻" => Tauon,
            "tau+" | "antitauon" | "τ⁺" => Antitauon,
            "gamma" | "photon" | "γ" => Photon,
            other => return Err(Error::Config(format!("unknown particle type `{other}`"))),
        })
    }
}
