//! Built-in coil sets for the flat and bent secondary.

use std::fmt;
use std::str::FromStr;

use crate::link_model::{
    designed_capacitance, CoilParams, LinkScenario, PrimaryTank, SecondaryTank,
};

pub const DRIVE_FREQUENCY_HZ: f64 = 40.68e6;
pub const SOURCE_AMPLITUDE_V: f64 = 1.0;
pub const R_LOAD_OHMS: f64 = 12.5e3;
pub const R_SW_OHMS: f64 = 500.0;

pub const PRIMARY_INDUCTANCE: f64 = 895e-9;
pub const PRIMARY_RESISTANCE: f64 = 1.114;
pub const SECONDARY_RESISTANCE: f64 = 2.333;
pub const FLAT_SECONDARY_INDUCTANCE: f64 = 564e-9;
pub const BENDED_SECONDARY_INDUCTANCE: f64 = 562e-9;
pub const FLAT_COUPLING: f64 = 0.05;
pub const BENDED_COUPLING: f64 = 0.042;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preset {
    #[default]
    Flat,
    Bended,
}

impl Preset {
    pub const ALL: [Preset; 2] = [Preset::Flat, Preset::Bended];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Flat => "flat",
            Preset::Bended => "bended",
        }
    }

    /// Both tanks tuned to the drive frequency, no parasitic capacitance.
    pub fn scenario(self) -> LinkScenario {
        let (l2, k) = match self {
            Preset::Flat => (FLAT_SECONDARY_INDUCTANCE, FLAT_COUPLING),
            Preset::Bended => (BENDED_SECONDARY_INDUCTANCE, BENDED_COUPLING),
        };
        let omega = 2.0 * std::f64::consts::PI * DRIVE_FREQUENCY_HZ;
        LinkScenario {
            primary_coil: CoilParams {
                inductance: PRIMARY_INDUCTANCE,
                series_resistance: PRIMARY_RESISTANCE,
                label: "primary".into(),
            },
            secondary_coil: CoilParams {
                inductance: l2,
                series_resistance: SECONDARY_RESISTANCE,
                label: "secondary".into(),
            },
            primary_tank: PrimaryTank {
                c_s1: designed_capacitance(PRIMARY_INDUCTANCE, omega),
                source_amplitude: SOURCE_AMPLITUDE_V,
                drive_frequency: DRIVE_FREQUENCY_HZ,
            },
            secondary_tank: SecondaryTank {
                c_s2: designed_capacitance(l2, omega),
                c_p: 0.0,
                r_load: R_LOAD_OHMS,
                r_sw: R_SW_OHMS,
            },
            coupling: k,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "flat" => Ok(Preset::Flat),
            "bended" | "bent" => Ok(Preset::Bended),
            other => Err(format!("unknown preset '{other}' (expected flat or bended)")),
        }
    }
}
