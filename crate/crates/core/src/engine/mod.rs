//! Coupled circuit and thermal simulation of free-running (FM) and gated
//! (GM) operation.
//!
//! Each time step advances the thermal field with the present wire current,
//! recomputes the hotspot resistance, then advances the circuit with that
//! resistance held fixed. Photon seeds are injected exactly at their
//! scheduled times by splitting the step there.

mod readout;
mod sweeps;

pub use readout::{
    calibrate_readout, difference_signal, differencing_readout, gate_maxima, ReadoutCalibration,
    HIGH_PASS_PERIODS,
};

pub use sweeps::{
    find_detection_threshold, find_max_gating_frequency, find_return_current, find_tau_e_min,
    free_running_photon_config, gate_peak_sweep, gate_peaks_after_detection, gated_config,
    gated_photon_config, max_frequency_sweep, max_temperature_next_gate, probe_frequency,
    return_current_sweep, FrequencyProbe, GatePeaks, MaxFrequencyOptions, ReturnCurrentOptions,
    ReturnCurrentPoint, TauEMin, TauEMinOptions, GATE_I_MIN, GATE_PEAK_FRACTION,
    PEAK_NORMALIZATION,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::circuit::{rk4_step, BiasKind, BiasWaveform, CircuitParams, CircuitState};
use crate::clickstats::{ClickTrain, TrainMode};
use crate::error::{domain, Error, Result};
use crate::thermal::{hotspot_resistance, ThermalParams, ThermalProfile, WireGeometry};

/// Hotspot resistance regarded as a macroscopic latch (ohm).
pub const LATCH_RESISTANCE: f64 = 500.0;
/// Fraction of a gate period `R_hs` must stay above [`LATCH_RESISTANCE`].
pub const GM_LATCH_FRACTION: f64 = 0.25;
/// Multiple of `tau_e` `R_hs` must stay above [`LATCH_RESISTANCE`] in FM.
pub const FM_LATCH_TAUS: f64 = 10.0;
/// Half-width of the gate-centre window as a fraction of the period.
pub const CENTER_WINDOW: f64 = 0.05;
/// Largest circuit sub-step measured in `L_k / (R_p + R_hs)`.
const STIFF_STEP: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Fm,
    Gm,
}

/// A photon (or photon-like dark) seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonEvent {
    pub time: f64,
    pub position: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub circuit: CircuitParams,
    pub thermal: ThermalParams,
    pub geom: WireGeometry,
    pub bias: BiasWaveform,
    pub mode: Mode,
    pub events: Vec<PhotonEvent>,
    /// Poisson rate of photon-like dark seeds (Hz).
    pub dark_rate: f64,
    pub seed: u64,
    pub duration: f64,
    /// Spacing of recorded samples; `None` records every step up to a cap
    /// of [`MAX_AUTO_SAMPLES`].
    pub sample_interval: Option<f64>,
    /// Bin width for FM click trains (s).
    pub fm_bin_width: f64,
}

/// Sample cap used when `sample_interval` is not set.
pub const MAX_AUTO_SAMPLES: usize = 200_000;

impl SimConfig {
    /// Gated configuration with no events.
    pub fn gated(circuit: CircuitParams, thermal: ThermalParams, geom: WireGeometry, bias: BiasWaveform, n_gates: usize) -> Self {
        let duration = n_gates as f64 * bias.period().unwrap_or(0.0);
        Self {
            circuit,
            thermal,
            geom,
            bias,
            mode: Mode::Gm,
            events: Vec::new(),
            dark_rate: 0.0,
            seed: 0,
            duration,
            sample_interval: None,
            fm_bin_width: 1e-9,
        }
    }

    /// Free-running configuration at DC bias current `i_bias`
    /// (short-circuit current `V / R_p`).
    pub fn free_running(circuit: CircuitParams, thermal: ThermalParams, geom: WireGeometry, i_bias: f64, duration: f64) -> Self {
        Self {
            circuit,
            thermal,
            geom,
            bias: BiasWaveform::dc(i_bias * circuit.r_p, i_bias),
            mode: Mode::Fm,
            events: Vec::new(),
            dark_rate: 0.0,
            seed: 0,
            duration,
            sample_interval: None,
            fm_bin_width: 1e-9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.circuit.validate()?;
        self.thermal.validate()?;
        self.geom.validate(&self.thermal)?;
        self.bias.validate()?;
        match (self.mode, self.bias.kind) {
            (Mode::Fm, BiasKind::Dc) => {}
            (Mode::Gm, BiasKind::Sine) => {
                if self.circuit.c_p <= 0.0 {
                    return domain("GM simulation needs C_p > 0");
                }
            }
            (Mode::Fm, _) => return domain("FM mode requires a DC bias"),
            (Mode::Gm, _) => return domain("GM mode requires a sine bias"),
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return domain("duration must be > 0");
        }
        if !(self.dark_rate >= 0.0 && self.dark_rate.is_finite()) {
            return domain("dark_rate must be >= 0");
        }
        if !(self.fm_bin_width > 0.0) {
            return domain("fm_bin_width must be > 0");
        }
        if let Some(s) = self.sample_interval {
            if !(s > 0.0) {
                return domain("sample_interval must be > 0");
            }
        }
        for e in &self.events {
            if !(e.time >= 0.0 && e.time.is_finite()) {
                return domain(format!("event time {:e} must be >= 0", e.time));
            }
            if !(0.0..=self.geom.length).contains(&e.position) {
                return domain(format!("event position {:e} outside the wire", e.position));
            }
        }
        Ok(())
    }

    pub fn gate_period(&self) -> Option<f64> {
        match self.mode {
            Mode::Gm => self.bias.period(),
            Mode::Fm => None,
        }
    }

    /// Electrical time constant `L_k / R_p`.
    pub fn tau_e(&self) -> f64 {
        self.circuit.l_k / self.circuit.r_p
    }

    /// Nominal step `min(tau_RC, tau_RL, T_gate) / 200`.
    pub fn nominal_step(&self) -> f64 {
        self.circuit.max_step(self.gate_period())
    }

    /// Configured events plus dark seeds, sorted by time.
    pub fn schedule(&self) -> Vec<PhotonEvent> {
        let mut all: Vec<PhotonEvent> = self.events.clone();
        if self.dark_rate > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            let exp = Exp::new(self.dark_rate).expect("positive rate");
            let mut t = 0.0;
            loop {
                t += exp.sample(&mut rng);
                if t >= self.duration {
                    break;
                }
                let position = rng.random::<f64>() * self.geom.length;
                all.push(PhotonEvent { time: t, position });
            }
        }
        all.sort_by(|a, b| a.time.total_cmp(&b.time));
        all
    }
}

/// Per-gate summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateRecord {
    pub index: usize,
    /// Largest nanowire current within the gate (A).
    pub peak_current: f64,
    /// `R_hs` exceeded the latch resistance for more than a quarter period.
    pub latched: bool,
    /// `R_hs` did not return to zero after the previous latched gate before
    /// this gate's maximum.
    pub relatched: bool,
    /// Hottest cell temperature within the gate-centre window (K).
    pub max_t_center: f64,
    /// Time within the gate of the triggering seed or latch onset (s).
    pub phase: Option<f64>,
}

/// Recorded waveforms.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Samples {
    pub t: Vec<f64>,
    pub i_l: Vec<f64>,
    pub v_c: Vec<f64>,
    pub r_hs: Vec<f64>,
    pub t_max: Vec<f64>,
}

impl Samples {
    fn push(&mut self, t: f64, s: &CircuitState, r_hs: f64, t_max: f64) {
        self.t.push(t);
        self.i_l.push(s.i_l);
        self.v_c.push(s.v_c);
        self.r_hs.push(r_hs);
        self.t_max.push(t_max);
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub config: SimConfig,
    pub samples: Samples,
    pub gates: Vec<GateRecord>,
    /// Upward crossings of the latch resistance (s).
    pub click_times: Vec<f64>,
    pub clicks: ClickTrain,
    /// Onset of a permanent FM latch, if one occurred.
    pub fm_latch_onset: Option<f64>,
    /// Seeds actually injected, in time order.
    pub injected: Vec<PhotonEvent>,
    /// Largest hotspot resistance seen (ohm).
    pub max_r_hs: f64,
    pub steps: usize,
}

impl SimTrace {
    pub fn latched_gates(&self) -> usize {
        self.gates.iter().filter(|g| g.latched).count()
    }
}

#[derive(Debug, Default)]
struct GateAccumulator {
    peak: f64,
    above: f64,
    max_t_center: f64,
    first_seed: Option<f64>,
    onset: Option<f64>,
    relatched: bool,
}

/// Resumable coupled integrator. [`simulate`] drives it over a whole
/// configuration; sweep drivers use it directly to vary the bias in time.
#[derive(Debug, Clone)]
pub struct Integrator {
    pub circuit: CircuitParams,
    pub thermal: ThermalParams,
    pub geom: WireGeometry,
    pub state: CircuitState,
    pub profile: ThermalProfile,
    pub r_hs: f64,
}

impl Integrator {
    pub fn new(circuit: CircuitParams, thermal: ThermalParams, geom: WireGeometry, state: CircuitState) -> Self {
        let profile = ThermalProfile::uniform(&geom, &thermal);
        Self {
            circuit,
            thermal,
            geom,
            state,
            profile,
            r_hs: 0.0,
        }
    }

    pub fn inject(&mut self, position: f64) -> Result<()> {
        self.profile.inject_photon(&self.geom, &self.thermal, position)?;
        self.r_hs = hotspot_resistance(&self.profile, &self.geom, &self.thermal);
        Ok(())
    }

    /// Thermal step, resistance update, circuit step.
    pub fn advance<F: Fn(f64) -> f64>(&mut self, source: F, h: f64) -> Result<()> {
        let t0 = self.state.t;
        self.profile
            .step(&self.geom, &self.thermal, self.state.i_l, h)
            .map_err(|e| match e {
                Error::NumericalInstability { detail, .. } => Error::NumericalInstability { time: t0, detail },
                other => other,
            })?;
        self.r_hs = hotspot_resistance(&self.profile, &self.geom, &self.thermal);
        let rate = (self.circuit.r_p + self.r_hs) / self.circuit.l_k;
        let n = ((h * rate) / STIFF_STEP).ceil().max(1.0) as usize;
        let sub = h / n as f64;
        for _ in 0..n {
            self.state = rk4_step(&self.state, &self.circuit, &source, self.r_hs, sub);
        }
        self.state.t = t0 + h;
        if !self.state.i_l.is_finite() || !self.state.v_c.is_finite() {
            return Err(Error::NumericalInstability {
                time: t0,
                detail: format!("circuit state diverged (R_hs = {:e} ohm, h = {h:e} s)", self.r_hs),
            });
        }
        Ok(())
    }
}

/// Run one coupled simulation.
pub fn simulate(config: &SimConfig) -> Result<SimTrace> {
    config.validate()?;
    let period = config.gate_period();
    let dt = config.nominal_step();
    let schedule = config.schedule();
    let bias = config.bias;
    let source = |t: f64| bias.voltage(t);

    let mut sim = Integrator::new(
        config.circuit,
        config.thermal,
        config.geom,
        config.circuit.steady_state(&bias, 0.0),
    );

    let n_gates = period.map_or(0, |p| (config.duration / p + 1e-9).floor() as usize);
    let est_steps = (config.duration / dt).ceil() as usize;
    let sample_dt = config.sample_interval.unwrap_or_else(|| {
        if est_steps > MAX_AUTO_SAMPLES {
            config.duration / MAX_AUTO_SAMPLES as f64
        } else {
            0.0
        }
    });

    let mut samples = Samples::default();
    let mut gates = Vec::with_capacity(n_gates);
    let mut acc = GateAccumulator {
        peak: f64::MIN,
        ..Default::default()
    };
    let mut click_times = Vec::new();
    let mut injected = Vec::new();
    let mut next_event = 0;
    let mut next_sample = 0.0;
    let mut above_prev = false;
    let mut above_since = 0.0;
    let mut fm_latch_onset = None;
    let fm_latch_span = FM_LATCH_TAUS * config.tau_e();
    // a latched gate must see R_hs return to zero before the next maximum
    let mut awaiting_reset = false;
    let mut max_r_hs: f64 = 0.0;
    let mut steps = 0usize;

    samples.push(0.0, &sim.state, 0.0, config.thermal.t_sub);
    if sample_dt > 0.0 {
        next_sample = sample_dt;
    }

    let mut t = 0.0;
    while t < config.duration * (1.0 - 1e-12) {
        while next_event < schedule.len() && schedule[next_event].time <= t {
            let ev = schedule[next_event];
            sim.inject(ev.position)?;
            injected.push(ev);
            acc.first_seed.get_or_insert(ev.time);
            next_event += 1;
        }
        let mut t_next = (t + dt).min(config.duration);
        if next_event < schedule.len() {
            t_next = t_next.min(schedule[next_event].time.max(t));
        }
        if let Some(p) = period {
            // land exactly on gate boundaries
            let boundary = ((t / p + 1e-9).floor() + 1.0) * p;
            t_next = t_next.min(boundary);
        }
        let h = t_next - t;
        if h <= 0.0 {
            // event scheduled at the current instant was handled above
            continue;
        }
        sim.advance(source, h)?;
        t = t_next;
        steps += 1;
        let r_hs = sim.r_hs;
        max_r_hs = max_r_hs.max(r_hs);
        let i_l = sim.state.i_l;

        let above = r_hs > LATCH_RESISTANCE;
        if above && !above_prev {
            click_times.push(t);
            above_since = t;
            acc.onset.get_or_insert(t);
        }
        if above && fm_latch_onset.is_none() && config.mode == Mode::Fm && t - above_since > fm_latch_span {
            fm_latch_onset = Some(above_since);
        }
        above_prev = above;

        let need_tmax = period.is_some() || sample_dt == 0.0 || t >= next_sample;
        let t_max = if need_tmax { sim.profile.max_temperature(&config.thermal) } else { 0.0 };

        if let Some(p) = period {
            let k = gates.len();
            let gate_start = k as f64 * p;
            if above {
                acc.above += h;
            }
            acc.peak = acc.peak.max(i_l);
            let rel = (t - gate_start) / p;
            if (rel - 0.5).abs() <= CENTER_WINDOW {
                acc.max_t_center = acc.max_t_center.max(t_max);
            }
            if awaiting_reset && r_hs == 0.0 && rel < 0.5 {
                awaiting_reset = false;
            }
            if awaiting_reset && rel >= 0.5 {
                acc.relatched = true;
                awaiting_reset = false;
            }
            if t >= (k + 1) as f64 * p * (1.0 - 1e-12) && k < n_gates {
                let latched = acc.above > GM_LATCH_FRACTION * p;
                let phase = if latched {
                    acc.first_seed
                        .map(|s| s - gate_start)
                        .or(acc.onset.map(|s| s - gate_start))
                } else {
                    None
                };
                gates.push(GateRecord {
                    index: k,
                    peak_current: acc.peak,
                    latched,
                    relatched: acc.relatched,
                    max_t_center: acc.max_t_center,
                    phase,
                });
                awaiting_reset = latched && r_hs > 0.0;
                acc = GateAccumulator {
                    peak: f64::MIN,
                    ..Default::default()
                };
            }
        }

        if sample_dt == 0.0 || t >= next_sample {
            samples.push(t, &sim.state, r_hs, t_max);
            if sample_dt > 0.0 {
                while next_sample <= t {
                    next_sample += sample_dt;
                }
            }
        }
    }

    let clicks = match config.mode {
        Mode::Gm => {
            let p = period.expect("GM has a period");
            ClickTrain {
                bins: gates.iter().map(|g| g.latched).collect(),
                bin_width: p,
                mode: TrainMode::Gm,
                phases: Some(gates.iter().map(|g| g.phase).collect()),
            }
        }
        Mode::Fm => ClickTrain::from_times(&click_times, config.fm_bin_width, config.duration),
    };

    Ok(SimTrace {
        config: config.clone(),
        samples,
        gates,
        click_times,
        clicks,
        fm_latch_onset,
        injected,
        max_r_hs,
        steps,
    })
}
