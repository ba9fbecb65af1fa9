//! Version-1 Touchstone files for two-port S parameters.
//!
//! Supported: `Hz`/`kHz`/`MHz`/`GHz`, parameter type `S`, formats `RI`,
//! `MA` and `DB`, reference `R <ohm>`. Data rows hold nine numbers in the
//! order `f S11 S21 S12 S22`. Values are kept as printed, so writing a
//! parsed file and parsing it again reproduces every number exactly.

use std::fmt::Write as _;

use num_complex::Complex64;

use super::{Form, Matrix, TwoPortNetwork};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreqUnit {
    Hz,
    KHz,
    MHz,
    GHz,
}

impl FreqUnit {
    pub fn scale(self) -> f64 {
        match self {
            Self::Hz => 1.0,
            Self::KHz => 1e3,
            Self::MHz => 1e6,
            Self::GHz => 1e9,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Self::Hz => "Hz",
            Self::KHz => "kHz",
            Self::MHz => "MHz",
            Self::GHz => "GHz",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    /// Real and imaginary parts.
    Ri,
    /// Magnitude and angle in degrees.
    Ma,
    /// Magnitude in dB and angle in degrees.
    Db,
}

impl DataFormat {
    fn label(self) -> &'static str {
        match self {
            Self::Ri => "RI",
            Self::Ma => "MA",
            Self::Db => "DB",
        }
    }

    fn to_complex(self, a: f64, b: f64) -> Complex64 {
        match self {
            Self::Ri => Complex64::new(a, b),
            Self::Ma => Complex64::from_polar(a, b.to_radians()),
            Self::Db => Complex64::from_polar(10f64.powf(a / 20.0), b.to_radians()),
        }
    }

    fn from_complex(self, z: Complex64) -> (f64, f64) {
        match self {
            Self::Ri => (z.re, z.im),
            Self::Ma => (z.norm(), z.arg().to_degrees()),
            Self::Db => (20.0 * z.norm().log10(), z.arg().to_degrees()),
        }
    }
}

/// File contents with numbers exactly as printed.
#[derive(Debug, Clone, PartialEq)]
pub struct Touchstone {
    pub unit: FreqUnit,
    pub format: DataFormat,
    pub z0: f64,
    /// Frequencies in `unit`.
    pub freqs: Vec<f64>,
    /// Value pairs of S11, S21, S12, S22 in file order.
    pub data: Vec<[f64; 8]>,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_options(tokens: &[&str], line: usize) -> Result<(FreqUnit, DataFormat, f64)> {
    let (mut unit, mut format, mut z0) = (FreqUnit::GHz, DataFormat::Ma, 50.0);
    let mut k = 0;
    while k < tokens.len() {
        let tok = tokens[k].to_ascii_uppercase();
        match tok.as_str() {
            "HZ" => unit = FreqUnit::Hz,
            "KHZ" => unit = FreqUnit::KHz,
            "MHZ" => unit = FreqUnit::MHz,
            "GHZ" => unit = FreqUnit::GHz,
            "S" => {}
            "Y" | "Z" | "H" | "G" => {
                return Err(parse_err(line, format!("parameter type {tok} is not supported")))
            }
            "RI" => format = DataFormat::Ri,
            "MA" => format = DataFormat::Ma,
            "DB" => format = DataFormat::Db,
            "R" => {
                k += 1;
                let v = tokens
                    .get(k)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| parse_err(line, "R must be followed by a number"))?;
                if !(v > 0.0 && v.is_finite()) {
                    return Err(parse_err(line, "reference impedance must be > 0"));
                }
                z0 = v;
            }
            _ => return Err(parse_err(line, format!("unknown option '{}'", tokens[k]))),
        }
        k += 1;
    }
    Ok((unit, format, z0))
}

impl Touchstone {
    pub fn parse(text: &str) -> Result<Self> {
        let mut options = None;
        let mut freqs: Vec<f64> = Vec::new();
        let mut data = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('!').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(rest) = body.strip_prefix('#') {
                if options.is_some() {
                    return Err(parse_err(line, "second option line"));
                }
                if !freqs.is_empty() {
                    return Err(parse_err(line, "option line after data"));
                }
                let tokens: Vec<&str> = rest.split_whitespace().collect();
                options = Some(parse_options(&tokens, line)?);
                continue;
            }
            if options.is_none() {
                return Err(parse_err(line, "data before the option line"));
            }
            let values = body
                .split_whitespace()
                .map(|s| {
                    s.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| parse_err(line, format!("bad number '{s}'")))
                })
                .collect::<Result<Vec<f64>>>()?;
            if values.len() != 9 {
                return Err(parse_err(line, format!("expected 9 columns, found {}", values.len())));
            }
            let f = values[0];
            if f < 0.0 {
                return Err(parse_err(line, "negative frequency"));
            }
            if let Some(&prev) = freqs.last() {
                if f <= prev {
                    return Err(parse_err(line, "frequencies must be strictly increasing"));
                }
            }
            freqs.push(f);
            let mut row = [0.0; 8];
            row.copy_from_slice(&values[1..]);
            data.push(row);
        }
        let (unit, format, z0) = options.ok_or_else(|| parse_err(0, "missing option line"))?;
        if freqs.is_empty() {
            return Err(parse_err(0, "no data"));
        }
        Ok(Self { unit, format, z0, freqs, data })
    }

    /// Text with the shortest decimal form of every number that reads
    /// back to the same value.
    pub fn write(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {} S {} R {}", self.unit.label(), self.format.label(), self.z0);
        for (f, row) in self.freqs.iter().zip(&self.data) {
            let _ = write!(out, "{f:e}");
            for v in row {
                let _ = write!(out, " {v:e}");
            }
            out.push('\n');
        }
        out
    }

    pub fn to_network(&self) -> Result<TwoPortNetwork> {
        let scale = self.unit.scale();
        let params: Vec<Matrix> = self
            .data
            .iter()
            .map(|r| {
                let z = |k: usize| self.format.to_complex(r[2 * k], r[2 * k + 1]);
                [[z(0), z(2)], [z(1), z(3)]]
            })
            .collect();
        TwoPortNetwork::new(self.freqs.iter().map(|f| f * scale).collect(), params, Form::S, self.z0)
    }

    /// Fails in DB format if a parameter is zero, which has no finite
    /// decibel value.
    pub fn from_network(net: &TwoPortNetwork, unit: FreqUnit, format: DataFormat) -> Result<Self> {
        let s = net.to_s()?;
        if format == DataFormat::Db && s.params.iter().flatten().flatten().any(|z| z.norm() == 0.0) {
            return Err(Error::Domain("DB format cannot represent a zero parameter".into()));
        }
        let data = s
            .params
            .iter()
            .map(|m| {
                let mut row = [0.0; 8];
                for (k, z) in [m[0][0], m[1][0], m[0][1], m[1][1]].into_iter().enumerate() {
                    let (a, b) = format.from_complex(z);
                    row[2 * k] = a;
                    row[2 * k + 1] = b;
                }
                row
            })
            .collect();
        Ok(Self {
            unit,
            format,
            z0: s.z0,
            freqs: s.freqs.iter().map(|f| f / unit.scale()).collect(),
            data,
        })
    }
}

/// Network in S form from Touchstone text.
pub fn parse_touchstone(text: &str) -> Result<TwoPortNetwork> {
    Touchstone::parse(text)?.to_network()
}

/// Touchstone text of `net` in the given unit and format.
pub fn write_touchstone(net: &TwoPortNetwork, unit: FreqUnit, format: DataFormat) -> Result<String> {
    Ok(Touchstone::from_network(net, unit, format)?.write())
}
