//! Physical constants and the unit conversions used at the I/O boundary.
//!
//! Everything inside the library is SI (tesla, metre, ampere). Gauss,
//! millimetres and G/cm only appear when reading configs or writing reports.

use std::f64::consts::PI;

/// Vacuum permeability, fixed at 4π·10⁻⁷ T·m/A.
pub const MU0: f64 = 4.0 * PI * 1e-7;

/// μ₀/4π, the Biot–Savart prefactor for segments.
pub const MU0_OVER_4PI: f64 = 1e-7;

/// μ₀/2π, the prefactor for infinite straight wires.
pub const MU0_OVER_2PI: f64 = 2e-7;

/// One gauss in tesla.
pub const GAUSS: f64 = 1e-4;

/// One millimetre in metres.
pub const MM: f64 = 1e-3;

/// One G/cm in T/m.
pub const GAUSS_PER_CM: f64 = 1e-2;

/// One G/cm² in T/m².
pub const GAUSS_PER_CM2: f64 = 1.0;

/// Unit system used for config input and report output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Units {
    #[default]
    #[serde(rename = "si")]
    Si,
    GaussMm,
}

impl Units {
    /// Multiplier taking a length in these units to metres.
    pub fn length(self) -> f64 {
        match self {
            Units::Si => 1.0,
            Units::GaussMm => MM,
        }
    }

    /// Multiplier taking a field in these units to tesla.
    pub fn field(self) -> f64 {
        match self {
            Units::Si => 1.0,
            Units::GaussMm => GAUSS,
        }
    }

    /// Multiplier taking a gradient in these units (T/m or G/cm) to T/m.
    pub fn gradient(self) -> f64 {
        match self {
            Units::Si => 1.0,
            Units::GaussMm => GAUSS_PER_CM,
        }
    }

    /// Multiplier taking a curvature in these units (T/m² or G/cm²) to T/m².
    pub fn curvature(self) -> f64 {
        match self {
            Units::Si => 1.0,
            Units::GaussMm => GAUSS_PER_CM2,
        }
    }

    pub fn length_label(self) -> &'static str {
        match self {
            Units::Si => "m",
            Units::GaussMm => "mm",
        }
    }

    pub fn field_label(self) -> &'static str {
        match self {
            Units::Si => "T",
            Units::GaussMm => "G",
        }
    }

    pub fn gradient_label(self) -> &'static str {
        match self {
            Units::Si => "T/m",
            Units::GaussMm => "G/cm",
        }
    }

    pub fn curvature_label(self) -> &'static str {
        match self {
            Units::Si => "T/m^2",
            Units::GaussMm => "G/cm^2",
        }
    }
}

impl std::str::FromStr for Units {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "si" | "SI" => Ok(Units::Si),
            "gauss-mm" => Ok(Units::GaussMm),
            other => Err(format!("unknown unit system `{other}` (expected si or gauss-mm)")),
        }
    }
}

impl std::fmt::Display for Units {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Units::Si => f.write_str("si"),
            Units::GaussMm => f.write_str("gauss-mm"),
        }
    }
}
