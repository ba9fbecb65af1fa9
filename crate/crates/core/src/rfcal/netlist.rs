//! Device netlist seen from the source port, and its input reflection.

use std::io::Write;

use num_complex::Complex64;

use super::{load_impedance, matmul, Matrix, TwoPortNetwork};
use crate::circuit::CircuitParams;
use crate::error::{domain, Error, Result};

/// One ladder element between the source port and the termination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Section {
    SeriesL(f64),
    ShuntC(f64),
    SeriesR(f64),
    ShuntR(f64),
}

impl Section {
    fn abcd(self, f: f64) -> Matrix {
        let w = std::f64::consts::TAU * f;
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let series = |z: Complex64| [[one, z], [zero, one]];
        let shunt = |y: Complex64| [[one, zero], [y, one]];
        match self {
            Self::SeriesL(l) => series(Complex64::new(0.0, w * l)),
            Self::ShuntC(c) => shunt(Complex64::new(0.0, w * c)),
            Self::SeriesR(r) => series(Complex64::new(r, 0.0)),
            Self::ShuntR(r) => shunt(Complex64::new(1.0 / r, 0.0)),
        }
    }

    fn validate(self) -> Result<()> {
        let (name, v, strict) = match self {
            Self::SeriesL(v) => ("series L", v, false),
            Self::ShuntC(v) => ("shunt C", v, false),
            Self::SeriesR(v) => ("series R", v, false),
            Self::ShuntR(v) => ("shunt R", v, true),
        };
        if !v.is_finite() || v < 0.0 || (strict && v == 0.0) {
            return domain(format!("{name} value {v} is not allowed"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    /// Linearized device: `R_B + R_sense`, then `C_p` shunting `L_k`.
    Device(CircuitParams),
    Resistor(f64),
    Open,
    Short,
}

/// Ladder sections from the source port toward a termination.
#[derive(Debug, Clone, PartialEq)]
pub struct Netlist {
    pub sections: Vec<Section>,
    pub termination: Termination,
}

impl Netlist {
    /// The device core behind the board pad capacitance.
    pub fn device(circuit: CircuitParams) -> Self {
        Self {
            sections: vec![Section::ShuntC(circuit.pad_cap)],
            termination: Termination::Device(circuit),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for s in &self.sections {
            s.validate()?;
        }
        if let Termination::Resistor(r) = self.termination {
            if !(r >= 0.0 && r.is_finite()) {
                return domain("terminating resistance must be >= 0");
            }
        }
        Ok(())
    }

    fn chain(&self, f: f64) -> Matrix {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        self.sections
            .iter()
            .fold([[one, zero], [zero, one]], |acc, s| matmul(&acc, &s.abcd(f)))
    }

    /// `S11` at reference impedance `z0`.
    pub fn reflection(&self, f: f64, z0: f64) -> Complex64 {
        let m = self.chain(f);
        let (a, b, c, d) = (m[0][0], m[0][1], m[1][0], m[1][1]);
        // (V1, I1) per unit load current; the open case is divided through by Z
        let (v, i) = match self.termination {
            Termination::Open => (a, c),
            Termination::Short => (b, d),
            Termination::Resistor(r) => {
                let z = Complex64::new(r, 0.0);
                (a * z + b, c * z + d)
            }
            Termination::Device(p) => {
                let z = load_impedance(&p, f);
                (a * z + b, c * z + d)
            }
        };
        (v - i * z0) / (v + i * z0)
    }
}

/// `S11(f)` of `netlist` on `freqs` at a 50 ohm reference.
pub fn input_reflection(netlist: &Netlist, freqs: &[f64]) -> Result<Vec<Complex64>> {
    netlist.validate()?;
    Ok(freqs.iter().map(|&f| netlist.reflection(f, 50.0)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectionRow {
    pub freq: f64,
    pub model: f64,
    pub reference: f64,
    /// `|S11_model - S11_ref|`.
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionReport {
    pub rows: Vec<ReflectionRow>,
    /// Root-mean-square of the deviations.
    pub rms: f64,
}

impl ReflectionReport {
    /// CSV with columns `freq_Hz,s11_model,s11_ref,deviation`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let io = |e: csv::Error| Error::Precondition(format!("csv write: {e}"));
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["freq_Hz", "s11_model", "s11_ref", "deviation"]).map_err(io)?;
        for r in &self.rows {
            out.write_record([r.freq, r.model, r.reference, r.deviation].map(|v| format!("{v:.8e}")))
                .map_err(io)?;
        }
        out.flush().map_err(|e| Error::Precondition(format!("csv write: {e}")))
    }
}

/// Compares the model `S11` with the `S11` column of `reference` at every
/// reference frequency up to `cutoff`, using the reference impedance of the
/// file.
pub fn compare_reflection(netlist: &Netlist, reference: &TwoPortNetwork, cutoff: f64) -> Result<ReflectionReport> {
    netlist.validate()?;
    let s = reference.to_s()?;
    let rows: Vec<ReflectionRow> = s
        .freqs
        .iter()
        .zip(&s.params)
        .filter(|(&f, _)| f <= cutoff)
        .map(|(&f, m)| {
            let model = netlist.reflection(f, s.z0);
            ReflectionRow {
                freq: f,
                model: model.norm(),
                reference: m[0][0].norm(),
                deviation: (model - m[0][0]).norm(),
            }
        })
        .collect();
    if rows.is_empty() {
        return domain("no reference frequencies below the cutoff");
    }
    let rms = (rows.iter().map(|r| r.deviation * r.deviation).sum::<f64>() / rows.len() as f64).sqrt();
    Ok(ReflectionReport { rows, rms })
}
