//! Differencing readout: the sensed current minus a delayed, attenuated
//! replica of the gate drive.
//!
//! Both paths are AC-coupled through a first-order high-pass with a time
//! constant of [`HIGH_PASS_PERIODS`] gate periods. The DC transfer of the
//! bias network differs from its transfer at the gate frequency, so without
//! the coupling a fixed offset would remain in `V_d`. Each high-pass starts
//! from the quiescent DC level of its path.

use super::{Mode, SimTrace};
use crate::circuit::BiasKind;
use crate::clickstats::{ClickTrain, TrainMode};
use crate::error::{domain, Error, Result};

/// High-pass time constant in gate periods.
pub const HIGH_PASS_PERIODS: f64 = 50.0;

/// Replica settings that cancel the quiescent gate signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutCalibration {
    /// Replica delay (s), in `[0, T)`.
    pub delay: f64,
    /// Replica attenuation (V/V).
    pub atten: f64,
    /// Largest `|V_d|` of the calibration trace with these settings (V).
    pub residual: f64,
}

fn check_trace(trace: &SimTrace) -> Result<f64> {
    let cfg = &trace.config;
    match (cfg.mode, cfg.bias.kind, cfg.bias.period()) {
        (Mode::Gm, BiasKind::Sine, Some(p)) => {
            if trace.samples.len() < 2 {
                return Err(Error::Precondition("trace has no samples".into()));
            }
            Ok(p)
        }
        _ => domain("differencing readout needs a gated trace"),
    }
}

struct HighPass {
    level: f64,
    prev_t: f64,
    tau: f64,
}

impl HighPass {
    fn new(level: f64, t0: f64, tau: f64) -> Self {
        Self { level, prev_t: t0, tau }
    }

    fn apply(&mut self, t: f64, x: f64) -> f64 {
        let a = 1.0 - (-(t - self.prev_t) / self.tau).exp();
        self.level += a * (x - self.level);
        self.prev_t = t;
        x - self.level
    }
}

/// `V_d = V_2 - V_1` at every recorded sample, with
/// `V_2 = R_sense i_L` and `V_1 = atten * v_source(t - delay)`.
pub fn difference_signal(trace: &SimTrace, delay: f64, atten: f64) -> Result<Vec<f64>> {
    let period = check_trace(trace)?;
    let cfg = &trace.config;
    let bias = cfg.bias;
    let r_sense = cfg.circuit.r_sense;
    let tau = HIGH_PASS_PERIODS * period;
    let s = &trace.samples;
    let i_dc = 0.5 * (bias.target_i_min + bias.target_i_max);
    let mut hp2 = HighPass::new(r_sense * i_dc, s.t[0], tau);
    let mut hp1 = HighPass::new(atten * bias.offset, s.t[0], tau);
    Ok(s.t
        .iter()
        .zip(&s.i_l)
        .map(|(&t, &i)| {
            let v2 = hp2.apply(t, r_sense * i);
            let v1 = hp1.apply(t, atten * bias.voltage(t - delay));
            v2 - v1
        })
        .collect())
}

/// Largest `|V_d|` within each gate.
pub fn gate_maxima(trace: &SimTrace, delay: f64, atten: f64) -> Result<Vec<f64>> {
    let period = check_trace(trace)?;
    let vd = difference_signal(trace, delay, atten)?;
    let n = trace.gates.len();
    let mut out = vec![0.0f64; n];
    for (&t, v) in trace.samples.t.iter().zip(&vd) {
        // a sample on a boundary closes the gate before it
        let k = ((t / period) * (1.0 - 1e-12)).floor() as usize;
        if k < n {
            out[k] = out[k].max(v.abs());
        }
    }
    Ok(out)
}

/// Gate clicks from the difference signal: a gate is a click iff
/// `max |V_d|` within it exceeds `threshold`.
pub fn differencing_readout(trace: &SimTrace, delay: f64, atten: f64, threshold: f64) -> Result<ClickTrain> {
    if !(threshold > 0.0) {
        return domain("readout threshold must be > 0");
    }
    let period = check_trace(trace)?;
    let maxima = gate_maxima(trace, delay, atten)?;
    Ok(ClickTrain {
        bins: maxima.iter().map(|&m| m > threshold).collect(),
        bin_width: period,
        mode: TrainMode::Gm,
        phases: None,
    })
}

/// Fits the replica to a quiescent trace: least squares of `V_2` on the
/// in-phase and quadrature components of the drive, after the first gate.
pub fn calibrate_readout(trace: &SimTrace) -> Result<ReadoutCalibration> {
    let period = check_trace(trace)?;
    let cfg = &trace.config;
    let bias = cfg.bias;
    if !(bias.amplitude > 0.0) {
        return domain("calibration needs a drive with non-zero amplitude");
    }
    let omega = std::f64::consts::TAU * bias.frequency;
    let s = &trace.samples;
    let (mut ss, mut cc, mut sc, mut ys, mut yc, mut y1, mut s1, mut c1, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (&t, &i) in s.t.iter().zip(&s.i_l) {
        if t < period {
            continue;
        }
        let x = omega * t + bias.phase;
        let (sn, cs) = x.sin_cos();
        let y = cfg.circuit.r_sense * i;
        ss += sn * sn;
        cc += cs * cs;
        sc += sn * cs;
        ys += y * sn;
        yc += y * cs;
        y1 += y;
        s1 += sn;
        c1 += cs;
        n += 1.0;
    }
    if n < 8.0 {
        return Err(Error::Precondition(
            "calibration trace needs samples beyond the first gate".into(),
        ));
    }
    // centre to remove the DC term, then solve the 2x2 normal equations
    let (ss, cc, sc) = (ss - s1 * s1 / n, cc - c1 * c1 / n, sc - s1 * c1 / n);
    let (ys, yc) = (ys - y1 * s1 / n, yc - y1 * c1 / n);
    let det = ss * cc - sc * sc;
    if det.abs() < 1e-30 * (ss * cc).max(f64::MIN_POSITIVE) {
        return Err(Error::Singular("calibration fit is singular".into()));
    }
    let a = (ys * cc - yc * sc) / det;
    let b = (yc * ss - ys * sc) / det;
    // y = a sin x + b cos x = M sin(x + theta) = M sin(omega (t - delay) + phase)
    let m = a.hypot(b);
    let theta = b.atan2(a);
    let delay = (-theta / omega).rem_euclid(period);
    let atten = m / bias.amplitude;
    let residual = difference_signal(trace, delay, atten)?
        .iter()
        .zip(&s.t)
        .filter(|(_, &t)| t >= period)
        .fold(0.0f64, |acc, (v, _)| acc.max(v.abs()));
    Ok(ReadoutCalibration {
        delay,
        atten,
        residual,
    })
}
