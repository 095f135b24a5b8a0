//! Physical constants, unit conversions and unit-tagged quantity parsing.
//!
//! Everything inside the engine is SI: angular frequency in rad/s, lengths in
//! metres, times in seconds. Spectroscopic units (cm⁻¹, nm of bandwidth) only
//! exist at the configuration boundary and are converted here.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Speed of light in vacuum, m/s (exact).
pub const C_LIGHT: f64 = 299_792_458.0;

/// ν̃ [cm⁻¹] → Ω [rad/s] via Ω = 2πc·100·ν̃.
pub fn wavenumber_to_angular(nu_cm: f64) -> f64 {
    2.0 * PI * C_LIGHT * 100.0 * nu_cm
}

pub fn angular_to_wavenumber(omega: f64) -> f64 {
    omega / (2.0 * PI * C_LIGHT * 100.0)
}

pub fn wavelength_to_angular(lambda: f64) -> f64 {
    2.0 * PI * C_LIGHT / lambda
}

pub fn angular_to_wavelength(omega: f64) -> f64 {
    2.0 * PI * C_LIGHT / omega
}

/// Spectral width Δλ at centre λ₀ → Δω, using |dω/dλ| = 2πc/λ₀².
pub fn wavelength_width_to_angular(delta_lambda: f64, lambda0: f64) -> f64 {
    2.0 * PI * C_LIGHT * delta_lambda / (lambda0 * lambda0)
}

pub fn angular_width_to_wavelength(delta_omega: f64, lambda0: f64) -> f64 {
    delta_omega * lambda0 * lambda0 / (2.0 * PI * C_LIGHT)
}

/// Physical dimension of a tagged quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dimension {
    Length,
    AngularFrequency,
    Angle,
    Time,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Dimension::Length => "length",
            Dimension::AngularFrequency => "frequency",
            Dimension::Angle => "angle",
            Dimension::Time => "time",
        };
        f.write_str(s)
    }
}

/// Units accepted in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unit {
    Metre,
    Centimetre,
    Millimetre,
    Micrometre,
    Nanometre,
    RadPerSecond,
    InverseCentimetre,
    Terahertz,
    Radian,
    Degree,
    Second,
    Picosecond,
    Femtosecond,
}

impl Unit {
    pub fn dimension(self) -> Dimension {
        use Unit::*;
        match self {
            Metre | Centimetre | Millimetre | Micrometre | Nanometre => Dimension::Length,
            RadPerSecond | InverseCentimetre | Terahertz => Dimension::AngularFrequency,
            Radian | Degree => Dimension::Angle,
            Second | Picosecond | Femtosecond => Dimension::Time,
        }
    }

    /// Multiply a value in this unit to get SI (m, rad/s, rad, s).
    /// THz is an ordinary frequency: 1 THz = 2π·10¹² rad/s.
    pub fn to_si(self, value: f64) -> f64 {
        use Unit::*;
        match self {
            Metre | Radian | Second | RadPerSecond => value,
            Centimetre => value * 1e-2,
            Millimetre => value * 1e-3,
            Micrometre => value * 1e-6,
            Nanometre => value * 1e-9,
            InverseCentimetre => wavenumber_to_angular(value),
            Terahertz => 2.0 * PI * 1e12 * value,
            Degree => value.to_radians(),
            Picosecond => value * 1e-12,
            Femtosecond => value * 1e-15,
        }
    }

    pub fn symbol(self) -> &'static str {
        use Unit::*;
        match self {
            Metre => "m",
            Centimetre => "cm",
            Millimetre => "mm",
            Micrometre => "um",
            Nanometre => "nm",
            RadPerSecond => "rad/s",
            InverseCentimetre => "cm^-1",
            Terahertz => "THz",
            Radian => "rad",
            Degree => "deg",
            Second => "s",
            Picosecond => "ps",
            Femtosecond => "fs",
        }
    }

    fn parse_symbol(s: &str) -> Option<Unit> {
        use Unit::*;
        Some(match s {
            "m" => Metre,
            "cm" => Centimetre,
            "mm" => Millimetre,
            "um" | "µm" | "μm" | "micron" => Micrometre,
            "nm" => Nanometre,
            "rad/s" => RadPerSecond,
            "cm^-1" | "cm-1" | "1/cm" | "cm⁻¹" => InverseCentimetre,
            "THz" => Terahertz,
            "rad" => Radian,
            "deg" | "°" => Degree,
            "s" => Second,
            "ps" => Picosecond,
            "fs" => Femtosecond,
            _ => return None,
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantityError {
    #[error("`{0}` has no unit tag (write e.g. \"8 mm\", \"11.0 cm^-1\", \"7 nm\")")]
    Untagged(String),
    #[error("`{input}`: unknown unit `{unit}`")]
    UnknownUnit { input: String, unit: String },
    #[error("`{0}`: not a number")]
    BadNumber(String),
    #[error("`{input}`: expected a {expected}, got a {found}")]
    WrongDimension {
        input: String,
        expected: String,
        found: Dimension,
    },
}

/// A number carrying its unit, e.g. `"746.6 cm^-1"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantity {
    pub value: f64,
    pub unit: Unit,
}

impl Quantity {
    pub fn si(&self) -> f64 {
        self.unit.to_si(self.value)
    }

    pub fn dimension(&self) -> Dimension {
        self.unit.dimension()
    }

    /// SI value, insisting on the given dimension.
    pub fn si_as(&self, dim: Dimension, input: &str) -> Result<f64, QuantityError> {
        if self.dimension() != dim {
            return Err(QuantityError::WrongDimension {
                input: input.to_string(),
                expected: dim.to_string(),
                found: self.dimension(),
            });
        }
        Ok(self.si())
    }
}

impl FromStr for Quantity {
    type Err = QuantityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        // split at the first character that cannot belong to a float literal
        let split = t
            .char_indices()
            .find(|&(i, c)| {
                !(c.is_ascii_digit()
                    || c == '.'
                    || c == '+'
                    || c == '-'
                    || ((c == 'e' || c == 'E')
                        && i > 0
                        && t[i + c.len_utf8()..]
                            .chars()
                            .next()
                            .is_some_and(|n| n.is_ascii_digit() || n == '-' || n == '+')))
            })
            .map(|(i, _)| i)
            .unwrap_or(t.len());
        let (num, unit) = t.split_at(split);
        let unit = unit.trim();
        if unit.is_empty() {
            return Err(QuantityError::Untagged(s.to_string()));
        }
        let value: f64 = num
            .trim()
            .parse()
            .map_err(|_| QuantityError::BadNumber(s.to_string()))?;
        let unit = Unit::parse_symbol(unit).ok_or_else(|| QuantityError::UnknownUnit {
            input: s.to_string(),
            unit: unit.to_string(),
        })?;
        Ok(Quantity { value, unit })
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.value, self.unit.symbol())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_tagged_quantities() {
        let q: Quantity = "8 mm".parse().unwrap();
        assert_eq!(q.si(), 8e-3);
        let q: Quantity = "11.0 cm^-1".parse().unwrap();
        assert!((q.si() - wavenumber_to_angular(11.0)).abs() < 1e-3);
        let q: Quantity = "1.5e-3 m".parse().unwrap();
        assert_eq!(q.si(), 1.5e-3);
        let q: Quantity = "90 deg".parse().unwrap();
        assert!((q.si() - PI / 2.0).abs() < 1e-15);
        let q: Quantity = "-2.5e+2fs".parse().unwrap();
        assert!((q.si() + 250e-15).abs() < 1e-27);
    }

    #[test]
    fn rejects_untagged_and_unknown() {
        assert!(matches!(
            "8".parse::<Quantity>(),
            Err(QuantityError::Untagged(_))
        ));
        assert!(matches!(
            "8 furlong".parse::<Quantity>(),
            Err(QuantityError::UnknownUnit { .. })
        ));
        let q: Quantity = "8 mm".parse().unwrap();
        assert!(q.si_as(Dimension::Angle, "8 mm").is_err());
    }

    #[test]
    fn raman_shift_conversion() {
        // 746.6 cm⁻¹ ↔ 2πc·100·746.6 rad/s
        let w = wavenumber_to_angular(746.6);
        assert!((w - 1.406_334_260_152_79e14).abs() / w < 1e-12);
        assert!((angular_to_wavenumber(w) - 746.6).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn nm_round_trip(lambda_nm in 200.0f64..5000.0, width_nm in 0.01f64..50.0) {
            let l = lambda_nm * 1e-9;
            let back = angular_to_wavelength(wavelength_to_angular(l));
            prop_assert!(((back - l) / l).abs() < 1e-12);
            let dw = wavelength_width_to_angular(width_nm * 1e-9, l);
            let dl = angular_width_to_wavelength(dw, l);
            prop_assert!(((dl - width_nm * 1e-9) / (width_nm * 1e-9)).abs() < 1e-12);
        }

        #[test]
        fn wavenumber_round_trip(nu in 1.0f64..5000.0) {
            let back = angular_to_wavenumber(wavenumber_to_angular(nu));
            prop_assert!(((back - nu) / nu).abs() < 1e-12);
        }
    }
}
