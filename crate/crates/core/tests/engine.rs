use snspd::circuit::{CircuitParams, CircuitState};
use snspd::engine::*;
use snspd::thermal::{ThermalParams, WireGeometry};

fn defaults() -> (CircuitParams, ThermalParams, WireGeometry) {
    (CircuitParams::default(), ThermalParams::default(), WireGeometry::default())
}

fn short_wire(n_cells: usize) -> WireGeometry {
    WireGeometry {
        length: 20e-6,
        n_cells,
        ..Default::default()
    }
}

#[test]
fn identical_configs_give_identical_traces() {
    let (c, th, g) = defaults();
    let mut cfg = gated_photon_config(c, th, g, 200e6, 30, 40e6, 7).unwrap();
    cfg.sample_interval = Some(0.1e-9);
    let a = simulate(&cfg).unwrap();
    let b = simulate(&cfg).unwrap();
    assert_eq!(a, b);
    assert!(a.injected.len() > 1);

    cfg.seed = 8;
    let c2 = simulate(&cfg).unwrap();
    assert_ne!(a.injected, c2.injected);
}

#[test]
fn no_gate_before_the_first_event_latches() {
    let (c, th, g) = defaults();
    for seed in 0..4 {
        let cfg = gated_photon_config(c, th, g, 150e6, 20, 30e6, seed).unwrap();
        let trace = simulate(&cfg).unwrap();
        let period = cfg.gate_period().unwrap();
        let first = trace.injected.first().map_or(f64::INFINITY, |e| e.time);
        for gate in &trace.gates {
            if ((gate.index + 1) as f64) * period <= first {
                assert!(!gate.latched, "seed {seed}: gate {} latched before {first:e}", gate.index);
            }
        }
    }
}

#[test]
fn quiescent_gating_is_periodic_and_never_latches() {
    let (c, th, g) = defaults();
    let mut cfg = gated_config(c, th, g, 300e6, 12).unwrap();
    cfg.events.clear();
    let trace = simulate(&cfg).unwrap();
    assert_eq!(trace.gates.len(), 12);
    assert_eq!(trace.latched_gates(), 0);
    assert_eq!(trace.max_r_hs, 0.0);
    for gate in &trace.gates[1..] {
        assert!((gate.peak_current - 18e-6).abs() < 1e-3 * 18e-6, "{}", gate.peak_current);
        assert!((gate.max_t_center - th.t_sub).abs() < 1e-12);
    }
    // periodic: one period later the state is unchanged
    let period = cfg.gate_period().unwrap();
    let s = &trace.samples;
    let nearest = |x: f64| {
        (0..s.len())
            .min_by(|&a, &b| (s.t[a] - x).abs().total_cmp(&(s.t[b] - x).abs()))
            .unwrap()
    };
    let (k0, k1) = (nearest(5.0 * period), nearest(6.0 * period));
    assert!((s.t[k1] - s.t[k0] - period).abs() < 1e-15);
    assert!((s.i_l[k0] - s.i_l[k1]).abs() < 1e-3 * 18e-6);
}

#[test]
fn photon_at_maximum_latches_and_resets() {
    let (c, th, g) = defaults();
    let f = 100e6;
    let mut cfg = gated_config(c, th, g, f, 4).unwrap();
    cfg.sample_interval = Some(0.002 / f);
    let trace = simulate(&cfg).unwrap();
    let latched: Vec<bool> = trace.gates.iter().map(|g| g.latched).collect();
    assert_eq!(latched, vec![true, false, false, false]);
    assert!(trace.max_r_hs > 1e3, "R_hs peak {}", trace.max_r_hs);
    assert!(!trace.gates[1].relatched);
    // the wire is superconducting again before the next maximum
    let s = &trace.samples;
    let next_max = 1.5 / f;
    let reset = s.t.iter().zip(&s.r_hs).position(|(&t, &r)| t > 0.5 / f && r == 0.0).unwrap();
    assert!(s.t[reset] < next_max);
    let phase = trace.gates[0].phase.unwrap();
    assert!((phase - 0.5 / f).abs() < 1e-15);
}

#[test]
fn adiabatic_limit_restores_quiescent_peaks() {
    let (c, th, g) = defaults();
    let cfg = gated_config(c, th, g, 20e6, 4).unwrap();
    let peaks = gate_peaks_after_detection(&cfg, 3).unwrap();
    assert!(peaks.detection_latched);
    let quiescent = GATE_PEAK_FRACTION / PEAK_NORMALIZATION;
    for p in &peaks.peaks {
        assert!((p - quiescent).abs() < 1e-3 * quiescent, "{p} vs {quiescent}");
    }
}

fn fm_config(l_k: f64, r_l: f64, geom: WireGeometry, duration: f64) -> SimConfig {
    let th = ThermalParams::default();
    let c = CircuitParams::free_running(l_k, r_l);
    let mut cfg = SimConfig::free_running(c, th, geom, 0.9 * th.i_c0, duration);
    cfg.events.push(PhotonEvent {
        time: 0.1e-9,
        position: 0.5 * geom.length,
    });
    cfg.sample_interval = Some(duration / 2000.0);
    cfg
}

#[test]
fn fast_reset_latches_permanently() {
    let g = short_wire(2000);
    let cfg = fm_config(49e-9, 2000.0, g, 40e-9);
    let trace = simulate(&cfg).unwrap();
    assert!(trace.fm_latch_onset.is_some());
    let tail = &trace.samples.r_hs[trace.samples.len() * 3 / 4..];
    assert!(tail.iter().all(|&r| r > LATCH_RESISTANCE));
}

#[test]
fn slow_reset_recovers() {
    let g = short_wire(2000);
    let cfg = fm_config(490e-9, 50.0, g, 60e-9);
    let trace = simulate(&cfg).unwrap();
    assert_eq!(trace.click_times.len(), 1);
    assert!(trace.fm_latch_onset.is_none());
    assert_eq!(*trace.samples.r_hs.last().unwrap(), 0.0);
}

/// Runs the coupled integrator at a fixed step, returning `(t, i_L, R_hs)`.
fn pulse(circuit: CircuitParams, geom: WireGeometry, i_b: f64, h: f64, duration: f64) -> Vec<(f64, f64, f64)> {
    let th = ThermalParams::default();
    let v = i_b * circuit.r_p;
    let start = CircuitState {
        v_c: v - circuit.r_p * i_b,
        i_l: i_b,
        t: 0.0,
    };
    let mut sim = Integrator::new(circuit, th, geom, start);
    sim.inject(0.5 * geom.length).unwrap();
    let mut out = vec![(0.0, i_b, sim.r_hs)];
    let n = (duration / h).round() as usize;
    for _ in 0..n {
        sim.advance(|_| v, h).unwrap();
        out.push((sim.state.t, sim.state.i_l, sim.r_hs));
    }
    out
}

#[test]
fn vanishing_node_capacitance_reproduces_the_free_running_pulse() {
    let (l, r) = (49e-9, 50.0);
    let g = short_wire(2000);
    let i_b = 0.9 * ThermalParams::default().i_c0;
    let h = 2e-14;
    let duration = 8e-9;
    let fm = pulse(CircuitParams::free_running(l, r), g, i_b, h, duration);
    let gm = pulse(
        CircuitParams {
            c_p: 2e-16,
            ..CircuitParams::free_running(l, r)
        },
        g,
        i_b,
        h,
        duration,
    );
    let dev = fm
        .iter()
        .zip(&gm)
        .map(|(a, b)| (a.1 - b.1).abs())
        .fold(0.0f64, f64::max);
    assert!(dev < 0.01 * i_b, "max deviation {dev:e}");

    // the drop and the exponential recovery with tau_e = L_k / R_L
    let i_min = fm.iter().map(|p| p.1).fold(f64::MAX, f64::min);
    assert!(i_min < 0.5 * i_b);
    let k0 = fm.iter().rposition(|p| p.2 > 0.0).unwrap() + 1;
    let (t0, i0, _) = fm[k0];
    let tau = l / r;
    let k1 = fm.iter().position(|p| p.0 >= t0 + tau).unwrap();
    let expect = i_b - (i_b - i0) * (-(fm[k1].0 - t0) / tau).exp();
    assert!((fm[k1].1 - expect).abs() < 0.01 * i_b, "{} vs {expect}", fm[k1].1);
}

#[test]
fn latched_resistance_converges_with_cell_size() {
    let latched_r = |n: usize| {
        let cfg = fm_config(49e-9, 2000.0, short_wire(n), 30e-9);
        let trace = simulate(&cfg).unwrap();
        assert!(trace.fm_latch_onset.is_some());
        *trace.samples.r_hs.last().unwrap()
    };
    let (coarse, fine) = (latched_r(2000), latched_r(4000));
    assert!((coarse - fine).abs() / fine < 0.02, "{coarse} vs {fine}");
}

#[test]
fn next_gate_temperature() {
    let (c, th, g) = defaults();
    let mut quiet = gated_config(c, th, g, 200e6, 2).unwrap();
    quiet.events.clear();
    assert_eq!(max_temperature_next_gate(&quiet).unwrap(), th.t_sub);

    let slow = gated_config(c, th, g, 10e6, 2).unwrap();
    let t = max_temperature_next_gate(&slow).unwrap();
    assert!((t - th.t_sub).abs() < 0.01 * th.t_sub, "{t}");

    // non-increasing in the gate period while the next gate stays
    // superconducting
    let mut prev = f64::INFINITY;
    for f in [250e6, 200e6, 150e6, 100e6, 60e6] {
        let cfg = gated_config(c, th, g, f, 2).unwrap();
        let probe = probe_frequency(c, th, g, f, 1).unwrap();
        assert!(!probe.spurious, "{f}");
        let t = max_temperature_next_gate(&cfg).unwrap();
        assert!(t <= prev * (1.0 + 1e-9), "{f}: {t} after {prev}");
        prev = t;
    }
}

#[test]
fn max_gating_frequency_is_a_clean_limit() {
    let th = ThermalParams::default();
    let g = WireGeometry::default();
    let opts = MaxFrequencyOptions::default();
    let (l, c) = (60e-9, 0.01e-12);
    let f_max = find_max_gating_frequency(l, c, th, g, &opts).unwrap();
    assert!(f_max > opts.f_start);

    // below the limit a detection leaves the following 100 gates alone
    let circuit = CircuitParams::critically_damped(l, c).unwrap();
    let probe = probe_frequency(circuit, th, g, 0.98 * f_max, 100).unwrap();
    assert!(probe.detection_latched);
    assert!(!probe.spurious);

    let better = ThermalParams {
        alpha: 2.0 * th.alpha,
        ..th
    };
    let f_better = find_max_gating_frequency(l, c, better, g, &opts).unwrap();
    assert!(f_better >= f_max * (1.0 - opts.resolution), "{f_better} < {f_max}");
}

#[test]
fn admissible_frequency_resets_before_the_next_maximum() {
    let (c, th, g) = defaults();
    let cfg = gated_photon_config(c, th, g, 150e6, 60, 60e6, 3).unwrap();
    let trace = simulate(&cfg).unwrap();
    assert!(trace.latched_gates() > 5);
    assert!(trace.gates.iter().all(|g| !g.relatched));
}

#[test]
fn return_current_plateau_then_decrease() {
    let th = ThermalParams::default();
    let cfg = fm_config(490e-9, 100.0, WireGeometry::default(), 1e-9);
    let opts = ReturnCurrentOptions::default();
    let rs = [30.0, 100.0, 500.0, 1000.0];
    let pts: Vec<ReturnCurrentPoint> = return_current_sweep(&cfg, &rs, &opts)
        .into_iter()
        .map(|p| p.unwrap())
        .collect();
    assert!(pts.iter().all(|p| p.collapsed));
    let plateau = pts[0].return_current;
    assert!(plateau > 0.9 * th.i_c0);
    assert!((pts[1].return_current - plateau).abs() < 0.01 * plateau);
    for w in pts[1..].windows(2) {
        assert!(w[1].return_current < w[0].return_current);
    }
}

#[test]
fn readout_separates_latched_gates() {
    let (c, th, g) = defaults();
    let f = 100e6;
    let mut quiet = gated_config(c, th, g, f, 6).unwrap();
    quiet.events.clear();
    quiet.sample_interval = Some(0.002 / f);
    let tq = simulate(&quiet).unwrap();
    let cal = calibrate_readout(&tq).unwrap();

    let mut lit = quiet.clone();
    lit.events.push(PhotonEvent {
        time: 2.5 / f,
        position: 0.5 * g.length,
    });
    let tl = simulate(&lit).unwrap();
    let peaks = gate_maxima(&tl, cal.delay, cal.atten).unwrap();
    let latched_peak = peaks[2];
    assert!(cal.residual < 0.05 * latched_peak);

    // a brute-force search over the replica settings does no better
    let mut best = f64::MAX;
    for i in 0..100 {
        for j in 0..41 {
            let delay = i as f64 / 100.0 / f;
            let atten = cal.atten * (0.8 + 0.01 * j as f64);
            let r = gate_maxima(&tq, delay, atten).unwrap()[1..]
                .iter()
                .fold(0.0f64, |a, &b| a.max(b));
            best = best.min(r);
        }
    }
    assert!(cal.residual <= best * (1.0 + 1e-9), "{} vs {best}", cal.residual);

    let clicks = differencing_readout(&tl, cal.delay, cal.atten, 0.5 * latched_peak).unwrap();
    let truth: Vec<bool> = tl.gates.iter().map(|g| g.latched).collect();
    assert_eq!(clicks.bins, truth);
    let none = differencing_readout(&tq, cal.delay, cal.atten, 0.5 * latched_peak).unwrap();
    assert_eq!(none.clicks(), 0);

    assert!(differencing_readout(&tl, cal.delay, cal.atten, 0.0).is_err());
}

#[test]
fn unattenuated_replica_reduces_to_the_sense_signal() {
    let (c, th, g) = defaults();
    let f = 100e6;
    let mut cfg = gated_config(c, th, g, f, 3).unwrap();
    cfg.sample_interval = Some(0.01 / f);
    let trace = simulate(&cfg).unwrap();
    let vd = difference_signal(&trace, 0.0, 0.0).unwrap();
    let r = cfg.circuit.r_sense;
    // with no replica only the AC-coupled sense voltage remains
    let dc = r * 0.5 * (cfg.bias.target_i_min + cfg.bias.target_i_max);
    assert!((vd[0] - (r * trace.samples.i_l[0] - dc)).abs() < 1e-15);
    let swing = r * (cfg.bias.target_i_max - cfg.bias.target_i_min);
    let quiet_max = gate_maxima(&trace, 0.0, 0.0).unwrap()[1];
    assert!((quiet_max - 0.5 * swing).abs() < 0.01 * swing);
    let clicks = differencing_readout(&trace, 0.0, 0.0, 1.01 * quiet_max).unwrap();
    assert_eq!(clicks.len(), 3);
}
