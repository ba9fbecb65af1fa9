//! Sweep drivers built on [`simulate`] and [`Integrator`].

use rayon::prelude::*;

use super::{simulate, Integrator, Mode, PhotonEvent, SimConfig};
use crate::circuit::{BiasWaveform, CircuitParams, CircuitState};
use crate::error::{domain, Error, Result};
use crate::thermal::{ThermalParams, ThermalProfile, WireGeometry};

/// Gate current minimum used by the gated drivers (A).
pub const GATE_I_MIN: f64 = -2e-6;
/// Gate current maximum as a fraction of `I_c0`.
pub const GATE_PEAK_FRACTION: f64 = 0.9;
/// Gate peaks are reported relative to this fraction of `I_c0`.
pub const PEAK_NORMALIZATION: f64 = 0.95;

/// Gated configuration with currents between [`GATE_I_MIN`] and
/// `0.9 I_c0`, one photon at the centre of the wire at the first gate
/// maximum, and `n_gates` gates.
pub fn gated_config(
    circuit: CircuitParams,
    thermal: ThermalParams,
    geom: WireGeometry,
    frequency: f64,
    n_gates: usize,
) -> Result<SimConfig> {
    let bias = circuit.drive_for(frequency, GATE_I_MIN, GATE_PEAK_FRACTION * thermal.i_c0)?;
    let mut cfg = SimConfig::gated(circuit, thermal, geom, bias, n_gates);
    cfg.events.push(PhotonEvent {
        time: 0.5 / frequency,
        position: 0.5 * geom.length,
    });
    // waveforms are not needed by the sweeps
    cfg.sample_interval = Some(0.05 / frequency);
    Ok(cfg)
}

fn require_gm(config: &SimConfig) -> Result<f64> {
    match (config.mode, config.bias.period()) {
        (Mode::Gm, Some(p)) => Ok(p),
        _ => domain("gated configuration required"),
    }
}

/// Gate peaks following the detection gate.
#[derive(Debug, Clone, PartialEq)]
pub struct GatePeaks {
    pub frequency: f64,
    /// Peak current of gates `1..=n` divided by `0.95 I_c0`.
    pub peaks: Vec<f64>,
    /// Whether each of those gates latched.
    pub latched: Vec<bool>,
    /// Whether the detection gate itself latched.
    pub detection_latched: bool,
}

/// Runs `config` for `n_gates + 1` gates and reports the normalized peak
/// current of every gate after the first. The photon schedule is taken
/// from `config` (see [`gated_config`]).
pub fn gate_peaks_after_detection(config: &SimConfig, n_gates: usize) -> Result<GatePeaks> {
    let period = require_gm(config)?;
    let mut cfg = config.clone();
    cfg.duration = (n_gates + 1) as f64 * period;
    let trace = simulate(&cfg)?;
    let norm = PEAK_NORMALIZATION * config.thermal.i_c0;
    let rest = &trace.gates[1..];
    Ok(GatePeaks {
        frequency: 1.0 / period,
        peaks: rest.iter().map(|g| g.peak_current / norm).collect(),
        latched: rest.iter().map(|g| g.latched).collect(),
        detection_latched: trace.gates[0].latched,
    })
}

/// Hottest temperature (K) over the wire within the centre window of the
/// gate after the first one.
///
/// Below the maximum gating frequency this is the residual heat of the
/// detection and does not increase with the gate period. Above it the next
/// gate latches again and the value is that of the new hotspot.
pub fn max_temperature_next_gate(config: &SimConfig) -> Result<f64> {
    let period = require_gm(config)?;
    let mut cfg = config.clone();
    cfg.duration = 2.0 * period;
    let trace = simulate(&cfg)?;
    Ok(trace.gates[1].max_t_center)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxFrequencyOptions {
    /// First frequency tried (Hz).
    pub f_start: f64,
    /// Give up above this frequency (Hz).
    pub f_limit: f64,
    /// Relative width of the final bracket.
    pub resolution: f64,
    /// Gates simulated after the detection gate.
    pub gates_after: usize,
}

impl Default for MaxFrequencyOptions {
    fn default() -> Self {
        Self {
            f_start: 50e6,
            f_limit: 50e9,
            resolution: 0.01,
            gates_after: 1,
        }
    }
}

/// Outcome of one probe of the maximum-frequency search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyProbe {
    pub frequency: f64,
    pub detection_latched: bool,
    pub spurious: bool,
    /// Hottest temperature at the centre of the gate after the detection.
    pub next_gate_t_max: f64,
}

/// Simulates one detection at `frequency` and checks the following gates
/// for a latch.
pub fn probe_frequency(
    circuit: CircuitParams,
    thermal: ThermalParams,
    geom: WireGeometry,
    frequency: f64,
    gates_after: usize,
) -> Result<FrequencyProbe> {
    let cfg = gated_config(circuit, thermal, geom, frequency, gates_after + 1)?;
    let trace = simulate(&cfg)?;
    Ok(FrequencyProbe {
        frequency,
        detection_latched: trace.gates[0].latched,
        spurious: trace.gates[1..].iter().any(|g| g.latched),
        next_gate_t_max: trace.gates[1].max_t_center,
    })
}

/// Largest gate frequency at which one detection does not latch any of the
/// following gates, for the critically damped circuit of `l_k` and `c_p`.
///
/// The frequency is doubled from `f_start` until a spurious latch appears
/// (or halved until none does), then the bracket is bisected
/// geometrically down to `resolution`.
pub fn find_max_gating_frequency(
    l_k: f64,
    c_p: f64,
    thermal: ThermalParams,
    geom: WireGeometry,
    opts: &MaxFrequencyOptions,
) -> Result<f64> {
    if !(opts.f_start > 0.0 && opts.f_limit > opts.f_start && opts.resolution > 0.0) {
        return domain("invalid frequency search options");
    }
    let circuit = CircuitParams::critically_damped(l_k, c_p)?;
    let spurious = |f: f64| probe_frequency(circuit, thermal, geom, f, opts.gates_after.max(1)).map(|p| p.spurious);

    let (mut lo, mut hi);
    if spurious(opts.f_start)? {
        hi = opts.f_start;
        lo = hi / 2.0;
        while spurious(lo)? {
            hi = lo;
            lo /= 2.0;
            if lo < 1e3 {
                return Err(Error::Precondition(
                    "detection latches the next gate at every frequency".into(),
                ));
            }
        }
    } else {
        lo = opts.f_start;
        hi = 2.0 * lo;
        while !spurious(hi)? {
            lo = hi;
            hi *= 2.0;
            if hi > opts.f_limit {
                return Ok(lo);
            }
        }
    }
    while hi / lo > 1.0 + opts.resolution {
        let mid = (lo * hi).sqrt();
        if spurious(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(lo)
}

/// Maximum gate frequency for several kinetic inductances, evaluated in
/// parallel and returned in input order.
pub fn max_frequency_sweep(
    l_values: &[f64],
    c_p: f64,
    thermal: ThermalParams,
    geom: WireGeometry,
    opts: &MaxFrequencyOptions,
) -> Vec<Result<f64>> {
    l_values
        .par_iter()
        .map(|&l| find_max_gating_frequency(l, c_p, thermal, geom, opts))
        .collect()
}

/// Gate peaks for a list of frequencies, evaluated in parallel and returned
/// in input order.
pub fn gate_peak_sweep(
    circuit: CircuitParams,
    thermal: ThermalParams,
    geom: WireGeometry,
    frequencies: &[f64],
    n_gates: usize,
) -> Vec<Result<GatePeaks>> {
    frequencies
        .par_iter()
        .map(|&f| {
            let cfg = gated_config(circuit, thermal, geom, f, n_gates + 1)?;
            gate_peaks_after_detection(&cfg, n_gates)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnCurrentOptions {
    /// Bias decrease per settling time, as a fraction of `I_c0`.
    pub ramp_fraction: f64,
    /// Settling time in units of the substrate cooling time at `T_c`.
    pub settle_cooling_times: f64,
    /// Starting bias as a fraction of `I_c0`.
    pub start_fraction: f64,
    /// Length of the initial normal domain (m).
    pub domain_length: f64,
}

impl Default for ReturnCurrentOptions {
    fn default() -> Self {
        Self {
            ramp_fraction: 0.002,
            settle_cooling_times: 10.0,
            start_fraction: 1.0,
            domain_length: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnCurrentPoint {
    pub r_l: f64,
    /// Bias `V / R_L` at the last collapse of the resistive state (A).
    pub return_current: f64,
    /// False if the wire was still resistive when the bias reached zero.
    pub collapsed: bool,
}

/// Sweeps the free-running bias downward from a latched start and returns
/// the bias at which the wire last returned to the superconducting state.
///
/// The load `R_L` is taken from `r_l`; `L_k`, the thermal constants and the
/// geometry come from `config`. The sweep starts at
/// `start_fraction * I_c0` with a hot normal domain of `domain_length` at
/// the wire centre and lowers the bias linearly at `ramp_fraction * I_c0`
/// per settling time. A collapse followed by a full settling time in the
/// superconducting state ends the sweep.
pub fn find_return_current(config: &SimConfig, r_l: f64, opts: &ReturnCurrentOptions) -> Result<ReturnCurrentPoint> {
    if !(r_l > 0.0 && r_l.is_finite()) {
        return domain("R_L must be > 0");
    }
    if !(opts.ramp_fraction > 0.0 && opts.settle_cooling_times > 0.0 && opts.start_fraction > 0.0) {
        return domain("invalid return-current options");
    }
    let th = config.thermal;
    let geom = config.geom;
    th.validate()?;
    geom.validate(&th)?;
    let circuit = CircuitParams::free_running(config.circuit.l_k, r_l);
    circuit.validate()?;

    let settle = opts.settle_cooling_times * th.cooling_time(geom.thickness);
    let rate = opts.ramp_fraction * th.i_c0 / settle;
    let i_start = opts.start_fraction * th.i_c0;
    let t_end = i_start / rate;

    // hot normal domain at the centre
    let n = geom.n_cells;
    let half = ((0.5 * opts.domain_length / geom.cell_len()).round() as usize).max(1);
    let mid = n / 2;
    let (a, b) = (mid.saturating_sub(half), (mid + half).min(n));
    let mut temperature = vec![th.t_sub; n];
    let mut normal = vec![false; n];
    for k in a..b {
        temperature[k] = th.hotspot_t;
        normal[k] = true;
    }
    let profile = ThermalProfile::from_arrays(temperature, normal)?;
    let r0 = th.r_sheet * geom.cell_len() / geom.width * (b - a) as f64;
    let state = CircuitState {
        v_c: 0.0,
        i_l: i_start * r_l / (r_l + r0),
        t: 0.0,
    };
    let mut sim = Integrator::new(circuit, th, geom, state);
    sim.profile = profile;
    sim.r_hs = r0;

    let dt = circuit.max_step(None).min(settle / 20.0);
    let source = |t: f64| r_l * (i_start - rate * t).max(0.0);
    let mut t = 0.0;
    let mut last_collapse: Option<f64> = None;
    let mut resistive = true;
    while t < t_end {
        let h = dt.min(t_end - t);
        sim.advance(source, h)?;
        t += h;
        let now_resistive = sim.r_hs > 0.0;
        if resistive && !now_resistive {
            last_collapse = Some(t);
        }
        resistive = now_resistive;
        if let Some(tc) = last_collapse {
            if !resistive && t - tc > settle {
                break;
            }
        }
    }
    match (resistive, last_collapse) {
        (false, Some(tc)) => Ok(ReturnCurrentPoint {
            r_l,
            return_current: (i_start - rate * tc).max(0.0),
            collapsed: true,
        }),
        _ => Ok(ReturnCurrentPoint {
            r_l,
            return_current: 0.0,
            collapsed: false,
        }),
    }
}

/// Return currents for several loads, in input order.
pub fn return_current_sweep(config: &SimConfig, r_values: &[f64], opts: &ReturnCurrentOptions) -> Vec<Result<ReturnCurrentPoint>> {
    r_values
        .par_iter()
        .map(|&r| find_return_current(config, r, opts))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TauEMin {
    /// Largest load whose return current stays within 1% of the plateau.
    pub r_star: f64,
    /// `L_k / r_star`.
    pub tau_e_min: f64,
    /// Return current at the smallest load.
    pub plateau: f64,
    /// Every point evaluated, sorted by load.
    pub points: Vec<ReturnCurrentPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauEMinOptions {
    pub sweep: ReturnCurrentOptions,
    /// Smallest load, defining the plateau (ohm).
    pub r_min: f64,
    /// Largest load searched (ohm).
    pub r_max: f64,
    /// Ratio between successive loads of the coarse scan.
    pub r_step: f64,
    /// Relative width of the final bracket on `R*`.
    pub resolution: f64,
    /// Relative drop from the plateau that marks the knee.
    pub plateau_tolerance: f64,
}

impl Default for TauEMinOptions {
    fn default() -> Self {
        Self {
            sweep: ReturnCurrentOptions::default(),
            r_min: 10.0,
            r_max: 1e5,
            r_step: 1.5,
            resolution: 0.002,
            plateau_tolerance: 0.01,
        }
    }
}

/// Knee of the return-current curve and the corresponding `L_k / R*`.
pub fn find_tau_e_min(config: &SimConfig, opts: &TauEMinOptions) -> Result<TauEMin> {
    if !(opts.r_min > 0.0 && opts.r_max > opts.r_min && opts.r_step > 1.0 && opts.resolution > 0.0) {
        return domain("invalid tau_e_min options");
    }
    let mut points = Vec::new();
    let first = find_return_current(config, opts.r_min, &opts.sweep)?;
    points.push(first);
    if !first.collapsed || first.return_current <= 0.0 {
        return Err(Error::NoPlateau(format!(
            "wire stays resistive at R_L = {} ohm",
            opts.r_min
        )));
    }
    let plateau = first.return_current;
    let on_plateau = |p: &ReturnCurrentPoint| p.collapsed && p.return_current >= plateau * (1.0 - opts.plateau_tolerance);

    // coarse scan in batches evaluated in parallel
    let mut grid = Vec::new();
    let mut r = opts.r_min * opts.r_step;
    while r <= opts.r_max {
        grid.push(r);
        r *= opts.r_step;
    }
    let mut bracket = None;
    let mut prev = opts.r_min;
    for chunk in grid.chunks(rayon::current_num_threads().max(2)) {
        let results = return_current_sweep(config, chunk, &opts.sweep);
        for (r, res) in chunk.iter().zip(results) {
            let p = res?;
            points.push(p);
            if bracket.is_none() && !on_plateau(&p) {
                bracket = Some((prev, *r));
            }
            if bracket.is_none() {
                prev = *r;
            }
        }
        if bracket.is_some() {
            break;
        }
    }
    let Some((mut lo, mut hi)) = bracket else {
        return Err(Error::NoPlateau(format!(
            "return current stays on its plateau up to R_L = {} ohm",
            opts.r_max
        )));
    };
    while hi / lo > 1.0 + opts.resolution {
        let mid = (lo * hi).sqrt();
        let p = find_return_current(config, mid, &opts.sweep)?;
        points.push(p);
        if on_plateau(&p) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    points.sort_by(|a, b| a.r_l.total_cmp(&b.r_l));
    Ok(TauEMin {
        r_star: lo,
        tau_e_min: config.circuit.l_k / lo,
        plateau,
        points,
    })
}

/// Smallest DC bias (A) at which a single photon at the wire centre drives
/// the hotspot resistance above the latch resistance in a free-running
/// circuit with load `r_l`. Bisection to `rel_tol` of `I_c0`.
pub fn find_detection_threshold(
    l_k: f64,
    r_l: f64,
    thermal: ThermalParams,
    geom: WireGeometry,
    rel_tol: f64,
) -> Result<f64> {
    let circuit = CircuitParams::free_running(l_k, r_l);
    let window = 20.0 * thermal.cooling_time(geom.thickness) + 5.0 * l_k / r_l;
    let clicks = |i: f64| -> Result<bool> {
        let mut cfg = SimConfig::free_running(circuit, thermal, geom, i, 1e-12 + window);
        cfg.events.push(PhotonEvent {
            time: 1e-12,
            position: 0.5 * geom.length,
        });
        cfg.sample_interval = Some(window);
        Ok(!simulate(&cfg)?.click_times.is_empty())
    };
    let (mut lo, mut hi) = (0.0, thermal.i_c0 * (1.0 - 1e-9));
    if !clicks(hi)? {
        return Err(Error::Precondition(
            "a photon does not click even just below I_c0".into(),
        ));
    }
    while hi - lo > rel_tol * thermal.i_c0 {
        let mid = 0.5 * (lo + hi);
        if clicks(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Free-running configuration driven by Poisson photon arrivals at
/// `photon_rate`, as used for count-statistics runs.
pub fn free_running_photon_config(
    l_k: f64,
    r_l: f64,
    thermal: ThermalParams,
    geom: WireGeometry,
    i_bias: f64,
    photon_rate: f64,
    duration: f64,
    seed: u64,
) -> SimConfig {
    let circuit = CircuitParams::free_running(l_k, r_l);
    let mut cfg = SimConfig::free_running(circuit, thermal, geom, i_bias, duration);
    cfg.dark_rate = photon_rate;
    cfg.seed = seed;
    cfg.sample_interval = Some(duration / 1000.0);
    cfg
}

/// Gated configuration driven by Poisson photon arrivals at `photon_rate`.
pub fn gated_photon_config(
    circuit: CircuitParams,
    thermal: ThermalParams,
    geom: WireGeometry,
    frequency: f64,
    n_gates: usize,
    photon_rate: f64,
    seed: u64,
) -> Result<SimConfig> {
    let bias: BiasWaveform = circuit.drive_for(frequency, GATE_I_MIN, GATE_PEAK_FRACTION * thermal.i_c0)?;
    let mut cfg = SimConfig::gated(circuit, thermal, geom, bias, n_gates);
    cfg.dark_rate = photon_rate;
    cfg.seed = seed;
    cfg.sample_interval = Some(cfg.duration / 1000.0);
    Ok(cfg)
}
