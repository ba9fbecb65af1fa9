//! Bias-chain calibration: two-port networks, ABCD cascading, the
//! transconductance from source voltage to nanowire current, and input
//! reflection of a device netlist.
//!
//! Port 1 faces the source. A chain's ABCD matrix maps `(V2, I2)` at the
//! load side to `(V1, I1)` at the source side. Networks on different grids
//! are resampled linearly in the real and imaginary parts of their stored
//! form, which is an approximation between samples.

mod netlist;
mod touchstone;

pub use netlist::{compare_reflection, input_reflection, Netlist, ReflectionReport, ReflectionRow, Section, Termination};
pub use touchstone::{parse_touchstone, write_touchstone, DataFormat, FreqUnit, Touchstone};

use num_complex::Complex64;

use crate::circuit::{solve_drive, BiasWaveform, CircuitParams};
use crate::error::{domain, Error, Result};

pub type Matrix = [[Complex64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Form {
    S,
    Abcd,
}

/// Two-port parameters sampled on a frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPortNetwork {
    /// Strictly increasing frequencies (Hz).
    pub freqs: Vec<f64>,
    pub params: Vec<Matrix>,
    pub form: Form,
    /// Reference impedance of the S form (ohm).
    pub z0: f64,
}

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);

fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

/// ABCD matrix of one S matrix at reference impedance `z0`.
pub fn s_to_abcd_matrix(s: &Matrix, z0: f64) -> Result<Matrix> {
    let (s11, s12, s21, s22) = (s[0][0], s[0][1], s[1][0], s[1][1]);
    if s21.norm() == 0.0 {
        return Err(Error::DegenerateNetwork("S21 = 0 has no ABCD form".into()));
    }
    let d2 = 2.0 * s21;
    Ok([
        [
            ((C1 + s11) * (C1 - s22) + s12 * s21) / d2,
            z0 * ((C1 + s11) * (C1 + s22) - s12 * s21) / d2,
        ],
        [
            ((C1 - s11) * (C1 - s22) - s12 * s21) / (d2 * z0),
            ((C1 - s11) * (C1 + s22) + s12 * s21) / d2,
        ],
    ])
}

/// S matrix of one ABCD matrix at reference impedance `z0`.
pub fn abcd_to_s_matrix(m: &Matrix, z0: f64) -> Result<Matrix> {
    let (a, b, c, d) = (m[0][0], m[0][1], m[1][0], m[1][1]);
    let den = a + b / z0 + c * z0 + d;
    if den.norm() == 0.0 {
        return Err(Error::DegenerateNetwork("ABCD matrix has no S form".into()));
    }
    Ok([
        [(a + b / z0 - c * z0 - d) / den, 2.0 * (a * d - b * c) / den],
        [2.0 / den, (-a + b / z0 - c * z0 + d) / den],
    ])
}

impl TwoPortNetwork {
    pub fn new(freqs: Vec<f64>, params: Vec<Matrix>, form: Form, z0: f64) -> Result<Self> {
        let net = Self { freqs, params, form, z0 };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        if self.freqs.is_empty() || self.freqs.len() != self.params.len() {
            return domain("network needs one matrix per frequency and at least one point");
        }
        if !(self.z0 > 0.0 && self.z0.is_finite()) {
            return domain("reference impedance must be > 0");
        }
        if self.freqs.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
            return domain("frequencies must be finite and >= 0");
        }
        if self.freqs.windows(2).any(|w| w[1] <= w[0]) {
            return domain("frequencies must be strictly increasing");
        }
        let finite = |m: &Matrix| m.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite());
        if !self.params.iter().all(finite) {
            return domain("network parameters must be finite");
        }
        Ok(())
    }

    /// A network built by evaluating `f` at every grid point.
    pub fn from_fn(freqs: &[f64], form: Form, z0: f64, f: impl Fn(f64) -> Matrix) -> Result<Self> {
        Self::new(freqs.to_vec(), freqs.iter().map(|&x| f(x)).collect(), form, z0)
    }

    /// Identity (zero-length thru).
    pub fn thru(freqs: &[f64]) -> Result<Self> {
        Self::from_fn(freqs, Form::Abcd, 50.0, |_| [[C1, C0], [C0, C1]])
    }

    /// Series impedance `z(f)`.
    pub fn series_impedance(freqs: &[f64], z: impl Fn(f64) -> Complex64) -> Result<Self> {
        Self::from_fn(freqs, Form::Abcd, 50.0, |f| [[C1, z(f)], [C0, C1]])
    }

    /// Shunt admittance `y(f)`.
    pub fn shunt_admittance(freqs: &[f64], y: impl Fn(f64) -> Complex64) -> Result<Self> {
        Self::from_fn(freqs, Form::Abcd, 50.0, |f| [[C1, C0], [y(f), C1]])
    }

    /// Matched attenuator of `db` decibels at reference impedance `z0`.
    pub fn attenuator(freqs: &[f64], db: f64, z0: f64) -> Result<Self> {
        let k = Complex64::new(10f64.powf(-db / 20.0), 0.0);
        Self::from_fn(freqs, Form::S, z0, |_| [[C0, k], [k, C0]])
    }

    /// Lossless matched line with delay `tau` (s).
    pub fn delay_line(freqs: &[f64], tau: f64, z0: f64) -> Result<Self> {
        Self::from_fn(freqs, Form::S, z0, |f| {
            let e = Complex64::from_polar(1.0, -std::f64::consts::TAU * f * tau);
            [[C0, e], [e, C0]]
        })
    }

    pub fn lo(&self) -> f64 {
        self.freqs[0]
    }

    pub fn hi(&self) -> f64 {
        *self.freqs.last().expect("validated non-empty")
    }

    /// Stored-form matrix at `f`, linearly interpolated.
    pub fn at(&self, f: f64) -> Result<Matrix> {
        let (lo, hi) = (self.lo(), self.hi());
        if !(f >= lo && f <= hi) {
            return Err(Error::Extrapolation { freq: f, lo, hi });
        }
        let k = self.freqs.partition_point(|&x| x < f);
        if self.freqs[k] == f {
            return Ok(self.params[k]);
        }
        let (f0, f1) = (self.freqs[k - 1], self.freqs[k]);
        let w = (f - f0) / (f1 - f0);
        let (a, b) = (&self.params[k - 1], &self.params[k]);
        let mut out = [[C0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = a[i][j] * (1.0 - w) + b[i][j] * w;
            }
        }
        Ok(out)
    }

    /// The network on another grid.
    pub fn resample(&self, freqs: &[f64]) -> Result<Self> {
        let params = freqs.iter().map(|&f| self.at(f)).collect::<Result<Vec<_>>>()?;
        Self::new(freqs.to_vec(), params, self.form, self.z0)
    }

    pub fn to_abcd(&self) -> Result<Self> {
        match self.form {
            Form::Abcd => Ok(self.clone()),
            Form::S => {
                let params = self
                    .params
                    .iter()
                    .map(|s| s_to_abcd_matrix(s, self.z0))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Self { params, form: Form::Abcd, ..self.clone() })
            }
        }
    }

    pub fn to_s(&self) -> Result<Self> {
        match self.form {
            Form::S => Ok(self.clone()),
            Form::Abcd => {
                let params = self
                    .params
                    .iter()
                    .map(|m| abcd_to_s_matrix(m, self.z0))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Self { params, form: Form::S, ..self.clone() })
            }
        }
    }
}

/// ABCD form of `net`.
pub fn s_to_abcd(net: &TwoPortNetwork) -> Result<TwoPortNetwork> {
    net.to_abcd()
}

/// S form of `net`.
pub fn abcd_to_s(net: &TwoPortNetwork) -> Result<TwoPortNetwork> {
    net.to_s()
}

/// `a` followed by `b` (toward the load), in ABCD form on the grid of `a`
/// restricted to the span of `b`. `b` is resampled when the grids differ.
pub fn cascade(a: &TwoPortNetwork, b: &TwoPortNetwork) -> Result<TwoPortNetwork> {
    let a = a.to_abcd()?;
    let b_on_a = if a.freqs == b.freqs {
        b.to_abcd()?
    } else {
        let grid: Vec<f64> = a.freqs.iter().copied().filter(|&f| f >= b.lo() && f <= b.hi()).collect();
        if grid.is_empty() {
            return Err(Error::Extrapolation {
                freq: a.lo(),
                lo: b.lo(),
                hi: b.hi(),
            });
        }
        return cascade(&a.resample(&grid)?, &b.resample(&grid)?);
    };
    let params = a.params.iter().zip(&b_on_a.params).map(|(x, y)| matmul(x, y)).collect();
    TwoPortNetwork::new(a.freqs.clone(), params, Form::Abcd, a.z0)
}

/// Input impedance of the linearized device load: `R_B + R_sense` in
/// series with `C_p` shunting `L_k` (superconducting wire).
pub fn load_impedance(load: &CircuitParams, f: f64) -> Complex64 {
    let w = std::f64::consts::TAU * f;
    let zl = Complex64::new(0.0, w * load.l_k);
    let par = if load.c_p > 0.0 && w > 0.0 {
        let zc = Complex64::new(0.0, -1.0 / (w * load.c_p));
        zl * zc / (zl + zc)
    } else {
        zl
    };
    Complex64::new(load.r_b + load.r_sense, 0.0) + par
}

/// Nanowire current per source volt, `I_Lk / V_1`, for `chain` terminated
/// in the linearized device load.
pub fn transconductance(chain: &TwoPortNetwork, load: &CircuitParams, f: f64) -> Result<Complex64> {
    let m = match chain.form {
        Form::Abcd => chain.at(f)?,
        Form::S => s_to_abcd_matrix(&chain.at(f)?, chain.z0)?,
    };
    let z = load_impedance(load, f);
    let v1_per_i2 = m[0][0] * z + m[0][1];
    if v1_per_i2.norm() == 0.0 {
        return Err(Error::Singular("chain input is shorted".into()));
    }
    let w = std::f64::consts::TAU * f;
    // current divider between C_p and L_k
    let divider = C1 / Complex64::new(1.0 - w * w * load.l_k * load.c_p, 0.0);
    Ok(divider / v1_per_i2)
}

/// Sine drive through `chain` that gives current extremes `i_min` and
/// `i_max` at frequency `f`. The chain must also cover 0 Hz.
pub fn drive_through_chain(
    chain: &TwoPortNetwork,
    load: &CircuitParams,
    f: f64,
    i_min: f64,
    i_max: f64,
) -> Result<BiasWaveform> {
    let g_dc = transconductance(chain, load, 0.0)?;
    let g_f = transconductance(chain, load, f)?;
    solve_drive(g_dc.re, g_f, f, i_min, i_max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &Matrix, b: &Matrix, tol: f64) -> bool {
        a.iter().flatten().zip(b.iter().flatten()).all(|(x, y)| (x - y).norm() <= tol)
    }

    #[test]
    fn series_impedance_element() {
        let z = Complex64::new(10.0, 5.0);
        let n = TwoPortNetwork::series_impedance(&[1e9], |_| z).unwrap();
        assert!(close(&n.params[0], &[[C1, z], [C0, C1]], 0.0));
        let z2 = Complex64::new(3.0, -1.0);
        let m = TwoPortNetwork::series_impedance(&[1e9], |_| z2).unwrap();
        let c = cascade(&n, &m).unwrap();
        assert!(close(&c.params[0], &[[C1, z + z2], [C0, C1]], 1e-12));
    }

    #[test]
    fn thru_is_neutral() {
        let f = [1e8, 1e9, 2e9];
        let att = TwoPortNetwork::attenuator(&f, 20.0, 50.0).unwrap();
        let c = cascade(&TwoPortNetwork::thru(&f).unwrap(), &att).unwrap().to_s().unwrap();
        for s in &c.params {
            assert!((s[1][0].norm() - 0.1).abs() < 1e-12);
            assert!(s[0][0].norm() < 1e-12);
        }
    }

    #[test]
    fn s21_zero_is_degenerate() {
        let n = TwoPortNetwork::attenuator(&[1e9], 1e9, 50.0).unwrap();
        let open = TwoPortNetwork { params: vec![[[C1, C0], [C0, C1]]], ..n };
        assert!(matches!(open.to_abcd(), Err(Error::DegenerateNetwork(_))));
    }

    #[test]
    fn interpolation_and_extrapolation() {
        let n = TwoPortNetwork::series_impedance(&[1e9, 2e9], |f| Complex64::new(f / 1e9, 0.0)).unwrap();
        assert!((n.at(1.5e9).unwrap()[0][1].re - 1.5).abs() < 1e-12);
        assert!(matches!(n.at(3e9), Err(Error::Extrapolation { .. })));
    }

    #[test]
    fn dc_transconductance_of_ideal_chain() {
        let load = CircuitParams::default();
        let chain = TwoPortNetwork::thru(&[0.0, 1e9]).unwrap();
        let g = transconductance(&chain, &load, 0.0).unwrap();
        assert!((g.re - 1.0 / 700.0).abs() < 1e-15 && g.im == 0.0);
        assert!(transconductance(&chain, &load, 2e9).is_err());
    }

    #[test]
    fn rejects_bad_grids() {
        let m = [[C1, C0], [C0, C1]];
        assert!(TwoPortNetwork::new(vec![2.0, 1.0], vec![m, m], Form::Abcd, 50.0).is_err());
        assert!(TwoPortNetwork::new(vec![1.0, 1.0], vec![m, m], Form::Abcd, 50.0).is_err());
        assert!(TwoPortNetwork::new(vec![1.0], vec![m, m], Form::Abcd, 50.0).is_err());
    }
}
