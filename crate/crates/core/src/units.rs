//! Decibel conversions and the bounded/unbounded level type shared by the
//! cascade and sweep modules.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;

/// Boltzmann constant, J/K (exact SI value).
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Standard noise temperature T0 in kelvin.
pub const T0_KELVIN: f64 = 290.0;

/// Offset between degrees Celsius and kelvin.
pub const CELSIUS_OFFSET: f64 = 273.15;

/// Reference temperature for stage datasheet values, °C.
pub const REF_TEMP_DEGC: f64 = 25.0;

/// Power ratio from decibels.
#[inline]
pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Decibels from a power ratio.
#[inline]
pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

#[inline]
pub fn dbm_to_mw(dbm: f64) -> f64 {
    db_to_lin(dbm)
}

#[inline]
pub fn mw_to_dbm(mw: f64) -> f64 {
    lin_to_db(mw)
}

#[inline]
pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_lin(dbm) * 1e-3
}

#[inline]
pub fn watts_to_dbm(w: f64) -> f64 {
    lin_to_db(w * 1e3)
}

/// A dB-scaled quantity that may be unbounded.
///
/// An all-linear chain has no third-order intercept, and therefore no upper
/// limit on its dynamic range. That case is carried as [`Level::Unbounded`]
/// rather than as a large float so that it can never leak into arithmetic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Level {
    Finite(f64),
    Unbounded,
}

impl Level {
    pub fn finite(self) -> Option<f64> {
        match self {
            Level::Finite(v) => Some(v),
            Level::Unbounded => None,
        }
    }

    pub fn is_unbounded(self) -> bool {
        matches!(self, Level::Unbounded)
    }

    /// Applies `f` to a finite value; unbounded stays unbounded.
    pub fn map(self, f: impl FnOnce(f64) -> f64) -> Level {
        match self {
            Level::Finite(v) => Level::Finite(f(v)),
            Level::Unbounded => Level::Unbounded,
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Level::Finite(v) => fmt::Display::fmt(v, f),
            Level::Unbounded => write!(f, "{:>w$}", "unbounded", w = f.width().unwrap_or(0)),
        }
    }
}

impl Serialize for Level {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Level::Finite(v) => s.serialize_f64(*v),
            Level::Unbounded => s.serialize_str("unbounded"),
        }
    }
}

impl<'de> Deserialize<'de> for Level {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Level::Finite(v)),
            Raw::Str(s) if s == "unbounded" => Ok(Level::Unbounded),
            Raw::Str(s) => Err(serde::de::Error::custom(format!(
                "expected a number or \"unbounded\", got {s:?}"
            ))),
        }
    }
}
