//! Unit-suffixed quantities.
//!
//! Configuration values carry explicit units (`"2 MHz"`, `"40 ns"`,
//! `"0.00296 MHz^2/Hz"`). Parsing normalizes every quantity to the unit its
//! consuming type stores: Hz, s, Hz²/Hz for spectra, mV for sensor voltages,
//! nm, mT/nm and MHz/mT for transduction.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dimension {
    Frequency,
    Time,
    Voltage,
    SpectralDensity,
    Length,
    FieldGradient,
    GyromagneticRatio,
}

impl Dimension {
    /// Unit the parsed value is expressed in.
    pub fn canonical_unit(self) -> &'static str {
        match self {
            Dimension::Frequency => "Hz",
            Dimension::Time => "s",
            Dimension::Voltage => "mV",
            Dimension::SpectralDensity => "Hz^2/Hz",
            Dimension::Length => "nm",
            Dimension::FieldGradient => "mT/nm",
            Dimension::GyromagneticRatio => "MHz/mT",
        }
    }

    fn example(self) -> &'static str {
        match self {
            Dimension::Frequency => "2 MHz",
            Dimension::Time => "40 ns",
            Dimension::Voltage => "-6 mV",
            Dimension::SpectralDensity => "0.00296 MHz^2/Hz",
            Dimension::Length => "0.33 nm",
            Dimension::FieldGradient => "0.184 mT/nm",
            Dimension::GyromagneticRatio => "28.025 MHz/mT",
        }
    }

    fn scale(self, unit: &str) -> Option<f64> {
        let unit = unit.replace('²', "^2").replace(['μ', 'µ'], "u");
        let s = match (self, unit.as_str()) {
            (Dimension::Frequency, "mHz") => 1e-3,
            (Dimension::Frequency, "Hz") => 1.0,
            (Dimension::Frequency, "kHz") => 1e3,
            (Dimension::Frequency, "MHz") => 1e6,
            (Dimension::Frequency, "GHz") => 1e9,
            (Dimension::Time, "s") => 1.0,
            (Dimension::Time, "ms") => 1e-3,
            (Dimension::Time, "us") => 1e-6,
            (Dimension::Time, "ns") => 1e-9,
            (Dimension::Time, "min") => 60.0,
            (Dimension::Voltage, "mV") => 1.0,
            (Dimension::Voltage, "uV") => 1e-3,
            (Dimension::Voltage, "V") => 1e3,
            (Dimension::SpectralDensity, "Hz^2/Hz" | "Hz2/Hz" | "Hz") => 1.0,
            (Dimension::SpectralDensity, "kHz^2/Hz" | "kHz2/Hz") => 1e6,
            (Dimension::SpectralDensity, "MHz^2/Hz" | "MHz2/Hz") => 1e12,
            (Dimension::Length, "nm") => 1.0,
            (Dimension::Length, "pm") => 1e-3,
            (Dimension::Length, "um") => 1e3,
            (Dimension::FieldGradient, "mT/nm") => 1.0,
            (Dimension::FieldGradient, "T/m") => 1e-6,
            (Dimension::GyromagneticRatio, "MHz/mT" | "GHz/T") => 1.0,
            (Dimension::GyromagneticRatio, "kHz/mT") => 1e-3,
            _ => return None,
        };
        Some(s)
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Dimension::Frequency => "frequency",
            Dimension::Time => "time",
            Dimension::Voltage => "voltage",
            Dimension::SpectralDensity => "spectral density",
            Dimension::Length => "length",
            Dimension::FieldGradient => "field gradient",
            Dimension::GyromagneticRatio => "gyromagnetic ratio",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UnitError {
    #[error("missing unit suffix (expected a {dimension}, e.g. \"{example}\")")]
    MissingUnit {
        dimension: Dimension,
        example: &'static str,
    },
    #[error("unknown {dimension} unit `{unit}`")]
    UnknownUnit { dimension: Dimension, unit: String },
    #[error("cannot parse number in `{0}`")]
    BadNumber(String),
}

/// Parses `"<number> <unit>"` into the dimension's canonical unit.
pub fn parse_quantity(text: &str, dimension: Dimension) -> Result<f64, UnitError> {
    let text = text.trim();
    let split = (1..=text.len())
        .rev()
        .filter(|&i| text.is_char_boundary(i))
        .find(|&i| text[..i].trim_end().parse::<f64>().is_ok());
    let Some(split) = split else {
        return Err(UnitError::BadNumber(text.to_string()));
    };
    let value: f64 = text[..split].trim_end().parse().expect("checked above");
    let unit = text[split..].trim();
    if unit.is_empty() {
        return Err(UnitError::MissingUnit {
            dimension,
            example: dimension.example(),
        });
    }
    let scale = dimension.scale(unit).ok_or_else(|| UnitError::UnknownUnit {
        dimension,
        unit: unit.to_string(),
    })?;
    Ok(value * scale)
}

/// Error for a bare number supplied where a unit-suffixed string is required.
pub fn missing_unit(dimension: Dimension) -> UnitError {
    UnitError::MissingUnit {
        dimension,
        example: dimension.example(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_common_units() {
        let f = parse_quantity("2 MHz", Dimension::Frequency).unwrap();
        assert_eq!(f, 2e6);
        let t = parse_quantity("40ns", Dimension::Time).unwrap();
        assert!((t - 40e-9).abs() < 1e-24);
        assert_eq!(parse_quantity("60 µs", Dimension::Time).unwrap(), 60.0 * 1e-6);
        assert_eq!(
            parse_quantity("0.00296 MHz^2/Hz", Dimension::SpectralDensity).unwrap(),
            0.00296 * 1e12
        );
        assert_eq!(parse_quantity("1e-3 s", Dimension::Time).unwrap(), 1e-3);
        assert_eq!(parse_quantity("-6 mV", Dimension::Voltage).unwrap(), -6.0);
        assert_eq!(parse_quantity("1553 kHz²/Hz", Dimension::SpectralDensity).unwrap(), 1.553e9);
    }

    #[test]
    fn bare_number_is_missing_unit() {
        let err = parse_quantity("2", Dimension::Frequency).unwrap_err();
        assert!(matches!(err, UnitError::MissingUnit { .. }));
        assert!(err.to_string().contains("missing unit"));
    }

    #[test]
    fn wrong_dimension_is_unknown_unit() {
        let err = parse_quantity("2 ns", Dimension::Frequency).unwrap_err();
        assert_eq!(
            err,
            UnitError::UnknownUnit {
                dimension: Dimension::Frequency,
                unit: "ns".into()
            }
        );
        assert!(matches!(
            parse_quantity("MHz", Dimension::Frequency),
            Err(UnitError::BadNumber(_))
        ));
    }
}
