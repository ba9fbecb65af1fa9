use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::{ClickTrain, TrainMode};
use crate::error::{domain, Result};

/// Detection probability of a single absorbed photon as a function of the
/// nanowire current.
#[derive(Debug, Clone, PartialEq)]
pub enum QeCurve {
    Constant(f64),
    /// `qe_max / (1 + exp(-(i - i_half) / width))`.
    Sigmoid { qe_max: f64, i_half: f64, width: f64 },
    /// `qe_max` for `i >= threshold`, zero below.
    Step { qe_max: f64, threshold: f64 },
    /// Piecewise linear in current, held constant beyond the ends.
    Table(Vec<(f64, f64)>),
}

impl QeCurve {
    pub fn eval(&self, i: f64) -> f64 {
        match self {
            QeCurve::Constant(q) => *q,
            QeCurve::Sigmoid { qe_max, i_half, width } => qe_max / (1.0 + (-(i - i_half) / width).exp()),
            QeCurve::Step { qe_max, threshold } => {
                if i >= *threshold {
                    *qe_max
                } else {
                    0.0
                }
            }
            QeCurve::Table(pts) => {
                if pts.is_empty() {
                    return 0.0;
                }
                if i <= pts[0].0 {
                    return pts[0].1;
                }
                for w in pts.windows(2) {
                    let ((x0, y0), (x1, y1)) = (w[0], w[1]);
                    if i <= x1 {
                        return y0 + (y1 - y0) * (i - x0) / (x1 - x0);
                    }
                }
                pts[pts.len() - 1].1
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |q: f64| (0.0..=1.0).contains(&q);
        match self {
            QeCurve::Constant(q) if !prob(*q) => domain("QE must lie in [0, 1]"),
            QeCurve::Sigmoid { qe_max, width, .. } if !prob(*qe_max) || !(*width > 0.0) => {
                domain("sigmoid QE needs qe_max in [0, 1] and width > 0")
            }
            QeCurve::Step { qe_max, .. } if !prob(*qe_max) => domain("QE must lie in [0, 1]"),
            QeCurve::Table(pts) => {
                if pts.is_empty() {
                    return domain("QE table is empty");
                }
                if pts.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return domain("QE table currents must be strictly increasing");
                }
                if pts.iter().any(|p| !prob(p.1)) {
                    return domain("QE table values must lie in [0, 1]");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Free-running dark count rate growing exponentially with bias,
/// `rate_ref * exp((i - i_ref) / i_scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcrModel {
    pub rate_ref: f64,
    pub i_ref: f64,
    pub i_scale: f64,
}

impl DcrModel {
    pub fn rate(&self, i: f64) -> f64 {
        self.rate_ref * ((i - self.i_ref) / self.i_scale).exp()
    }

    /// Probability of at least one dark event in a gate whose current
    /// follows `i_min..i_max` sinusoidally over `gate_period`.
    pub fn gated_probability(&self, i_min: f64, i_max: f64, gate_period: f64) -> f64 {
        const N: usize = 512;
        let mid = 0.5 * (i_max + i_min);
        let amp = 0.5 * (i_max - i_min);
        let integral: f64 = (0..N)
            .map(|k| {
                let phase = (k as f64 + 0.5) / N as f64;
                self.rate(mid - amp * (std::f64::consts::TAU * phase).cos())
            })
            .sum::<f64>()
            * gate_period
            / N as f64;
        -(-integral).exp_m1()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    Cw,
    /// One pulse every `pulse_divisor` gates.
    Pulsed,
}

/// Monte-Carlo stand-in for an illuminated gated detector.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceModel {
    pub kind: SourceKind,
    /// Mean photon number per gate (CW) or per pulse (pulsed).
    pub mean_photons_per_gate: f64,
    pub pulse_divisor: usize,
    /// Arrival phase of pulses within their gate, as a fraction of the period.
    pub pulse_phase: f64,
    pub qe_curve: QeCurve,
    /// Nanowire current over a gate: sinusoid between these extremes with
    /// the maximum at the gate centre. Equal values give a flat current.
    pub i_min: f64,
    pub i_max: f64,
    pub gate_period: f64,
    pub dark_prob_per_gate: f64,
    /// Probability of a spurious click in the gate right after a click.
    pub afterpulse_prob: f64,
}

impl Default for SourceModel {
    fn default() -> Self {
        Self {
            kind: SourceKind::Cw,
            mean_photons_per_gate: 0.0,
            pulse_divisor: 1,
            pulse_phase: 0.5,
            qe_curve: QeCurve::Constant(1.0),
            i_min: 0.0,
            i_max: 0.0,
            gate_period: 1.6e-9,
            dark_prob_per_gate: 0.0,
            afterpulse_prob: 0.0,
        }
    }
}

impl SourceModel {
    /// Phase-independent detector with a fixed detection probability.
    pub fn constant_qe(mu: f64, qe: f64, dark: f64, afterpulse: f64) -> Self {
        Self {
            mean_photons_per_gate: mu,
            qe_curve: QeCurve::Constant(qe),
            dark_prob_per_gate: dark,
            afterpulse_prob: afterpulse,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.qe_curve.validate()?;
        let prob = |q: f64| (0.0..=1.0).contains(&q);
        if !(self.mean_photons_per_gate >= 0.0 && self.mean_photons_per_gate.is_finite()) {
            return domain("mean photon number must be >= 0");
        }
        if self.pulse_divisor < 1 {
            return domain("pulse divisor must be >= 1");
        }
        if !(0.0..1.0).contains(&self.pulse_phase) {
            return domain("pulse phase must lie in [0, 1)");
        }
        if !prob(self.dark_prob_per_gate) || !prob(self.afterpulse_prob) {
            return domain("dark and afterpulse probabilities must lie in [0, 1]");
        }
        if !(self.gate_period > 0.0) {
            return domain("gate period must be > 0");
        }
        if self.i_min > self.i_max {
            return domain("i_min must not exceed i_max");
        }
        Ok(())
    }

    /// Nanowire current at `phase` (fraction of the gate period).
    pub fn current_at(&self, phase: f64) -> f64 {
        let mid = 0.5 * (self.i_max + self.i_min);
        let amp = 0.5 * (self.i_max - self.i_min);
        mid - amp * (std::f64::consts::TAU * phase).cos()
    }

    /// Per-gate detection probability of the light alone, averaged over
    /// the arrival phase for CW light.
    pub fn photon_click_probability(&self) -> f64 {
        let qe = match self.kind {
            SourceKind::Pulsed => self.qe_curve.eval(self.current_at(self.pulse_phase)),
            SourceKind::Cw => {
                const N: usize = 512;
                (0..N)
                    .map(|k| self.qe_curve.eval(self.current_at((k as f64 + 0.5) / N as f64)))
                    .sum::<f64>()
                    / N as f64
            }
        };
        -(-self.mean_photons_per_gate * qe).exp_m1()
    }
}

/// Draws a GM click train of `n_gates` gates. Each gate clicks on a
/// detected photon, a dark event, or an afterpulse of the previous gate;
/// the recorded phase is the earliest of those.
pub fn generate_clicks(model: &SourceModel, n_gates: usize, seed: u64) -> Result<ClickTrain> {
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let poisson = if model.mean_photons_per_gate > 0.0 {
        Some(Poisson::new(model.mean_photons_per_gate).expect("positive mean"))
    } else {
        None
    };
    let flat_current = model.i_min == model.i_max;
    let flat_qe = model.qe_curve.eval(model.i_max);
    let pulsed_qe = model.qe_curve.eval(model.current_at(model.pulse_phase));

    let mut bins = Vec::with_capacity(n_gates);
    let mut phases = Vec::with_capacity(n_gates);
    let mut prev = false;
    for k in 0..n_gates {
        let mut first: Option<f64> = None;
        let mut keep = |p: f64| {
            first = Some(first.map_or(p, |f: f64| f.min(p)));
        };
        let lit = match model.kind {
            SourceKind::Cw => true,
            SourceKind::Pulsed => k % model.pulse_divisor == 0,
        };
        if let (true, Some(poisson)) = (lit, &poisson) {
            let n = poisson.sample(&mut rng) as u64;
            for _ in 0..n {
                let (phase, qe) = match model.kind {
                    SourceKind::Pulsed => (model.pulse_phase, pulsed_qe),
                    SourceKind::Cw => {
                        let phase: f64 = rng.random();
                        let qe = if flat_current {
                            flat_qe
                        } else {
                            model.qe_curve.eval(model.current_at(phase))
                        };
                        (phase, qe)
                    }
                };
                if rng.random::<f64>() < qe {
                    keep(phase);
                }
            }
        }
        if model.dark_prob_per_gate > 0.0 && rng.random::<f64>() < model.dark_prob_per_gate {
            keep(rng.random());
        }
        if prev && model.afterpulse_prob > 0.0 && rng.random::<f64>() < model.afterpulse_prob {
            keep(0.5);
        }
        prev = first.is_some();
        bins.push(prev);
        phases.push(first.map(|p| p * model.gate_period));
    }
    Ok(ClickTrain {
        bins,
        bin_width: model.gate_period,
        mode: TrainMode::Gm,
        phases: Some(phases),
    })
}
