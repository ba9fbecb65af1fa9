//! Click-train generation and the photon-counting analysis pipeline.
//!
//! The normalized autocorrelation used throughout is
//! `Gamma(tau) = mean(x_t * x_{t+tau}) / mean(x)^2`, so a train of
//! independent events has `Gamma = 1` at every lag.

mod analysis;
mod generate;

pub use analysis::{
    afterpulse_probability, autocorrelation, band_entry_lag, estimate_qe_dcr, flat_top_width,
    gate_phase_histogram, linearity_check, renewal_gamma, wilson_interval, AfterpulseEstimate,
    Estimate, LinearityFit, QeDcrEstimate,
};
pub use generate::{generate_clicks, DcrModel, QeCurve, SourceKind, SourceModel};

use std::io::{Read, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    /// Fixed-width time bins of a free-running detector.
    Fm,
    /// One bin per gate period.
    Gm,
}

/// Binary click sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ClickTrain {
    pub bins: Vec<bool>,
    /// Bin width (FM) or gate period (GM), seconds.
    pub bin_width: f64,
    pub mode: TrainMode,
    /// Time of the detection within its gate (s), one entry per bin.
    pub phases: Option<Vec<Option<f64>>>,
}

impl ClickTrain {
    /// Bins event times at `bin_width` over `[0, duration)`.
    pub fn from_times(times: &[f64], bin_width: f64, duration: f64) -> Self {
        let n = (duration / bin_width + 1e-9).floor() as usize;
        let mut bins = vec![false; n];
        for &t in times {
            let k = (t / bin_width).floor();
            if k >= 0.0 && (k as usize) < n {
                bins[k as usize] = true;
            }
        }
        Self {
            bins,
            bin_width,
            mode: TrainMode::Fm,
            phases: None,
        }
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn clicks(&self) -> usize {
        self.bins.iter().filter(|&&b| b).count()
    }

    pub fn click_probability(&self) -> f64 {
        if self.bins.is_empty() {
            0.0
        } else {
            self.clicks() as f64 / self.bins.len() as f64
        }
    }

    /// Writes `index,click,phase_s`, one row per bin. Phases use nine
    /// significant digits; an empty field means no recorded phase.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Precondition(format!("csv write: {e}"));
        out.write_record(["index", "click", "phase_s"]).map_err(io)?;
        for (k, &b) in self.bins.iter().enumerate() {
            let phase = self
                .phases
                .as_ref()
                .and_then(|p| p[k])
                .map(|p| format!("{p:.8e}"))
                .unwrap_or_default();
            out.write_record([k.to_string(), u8::from(b).to_string(), phase])
                .map_err(io)?;
        }
        out.flush()
            .map_err(|e| Error::Precondition(format!("csv write: {e}")))
    }

    /// Reads the format produced by [`ClickTrain::write_csv`]. Phases are
    /// kept only if at least one row carries one.
    pub fn read_csv<R: Read>(r: R, bin_width: f64, mode: TrainMode) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut bins = Vec::new();
        let mut phases = Vec::new();
        let mut any_phase = false;
        for (row, rec) in rdr.records().enumerate() {
            let line = row + 2;
            let rec = rec.map_err(|e| Error::Parse {
                line,
                msg: e.to_string(),
            })?;
            let field = |i: usize| rec.get(i).unwrap_or("").trim();
            let index: usize = field(0).parse().map_err(|_| Error::Parse {
                line,
                msg: format!("bad index '{}'", field(0)),
            })?;
            if index != bins.len() {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected index {}, found {index}", bins.len()),
                });
            }
            let click = match field(1) {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("click must be 0 or 1, found '{other}'"),
                    })
                }
            };
            let phase = match field(2) {
                "" => None,
                s => Some(s.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    msg: format!("bad phase '{s}'"),
                })?),
            };
            any_phase |= phase.is_some();
            bins.push(click);
            phases.push(phase);
        }
        Ok(Self {
            bins,
            bin_width,
            mode,
            phases: any_phase.then_some(phases),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binning_times() {
        let t = ClickTrain::from_times(&[0.5e-9, 2.2e-9, 2.9e-9, 9.0e-9], 1e-9, 5e-9);
        assert_eq!(t.bins, vec![true, false, true, false, false]);
        assert_eq!(t.clicks(), 2);
    }

    #[test]
    fn csv_round_trip() {
        let t = ClickTrain {
            bins: vec![false, true, true, false],
            bin_width: 1.6e-9,
            mode: TrainMode::Gm,
            phases: Some(vec![None, Some(8.0e-10), Some(1.23456789e-10), None]),
        };
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("index,click,phase_s\n0,0,\n1,1,8.00000000e-10\n"));
        let back = ClickTrain::read_csv(&buf[..], 1.6e-9, TrainMode::Gm).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn csv_rejects_bad_click() {
        let text = "index,click,phase_s\n0,0,\n1,2,\n";
        let err = ClickTrain::read_csv(text.as_bytes(), 1.0, TrainMode::Gm).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }
}
