//! One function per subcommand. Each reads the config, runs the
//! computation and writes its CSV files into the output directory.

use std::path::Path;

use rayon::prelude::*;
use snspd::circuit::{critically_damped_rp, CircuitParams};
use snspd::clickstats::{
    afterpulse_probability, autocorrelation, estimate_qe_dcr, gate_phase_histogram, generate_clicks,
    linearity_check, QeCurve, SourceKind, SourceModel,
};
use snspd::engine::{
    find_return_current, find_tau_e_min, gate_peak_sweep, max_frequency_sweep, probe_frequency, simulate,
    MaxFrequencyOptions, Mode, PhotonEvent, ReturnCurrentOptions, SimConfig, TauEMinOptions,
};
use snspd::rfcal::{
    cascade, compare_reflection, drive_through_chain, parse_touchstone, transconductance, Netlist, Section,
    Termination, TwoPortNetwork,
};
use snspd::thermal::{ThermalParams, WireGeometry};

use crate::config::Config;
use crate::output::{Cell, OutDir};
use crate::CliError;

fn circuit(cfg: &Config) -> Result<CircuitParams, CliError> {
    let (l_k, c_p) = (cfg.num("L_k"), cfg.num("C_p"));
    let r_p = if cfg.flag("critical") {
        critically_damped_rp(l_k, c_p)?
    } else {
        cfg.num("R_p")
    };
    let c = CircuitParams {
        l_k,
        c_p,
        r_p,
        r_b: cfg.num("R_B"),
        r_sense: cfg.num("R_sense"),
        r_term: cfg.num("R_term"),
        pad_cap: cfg.num("pad_cap"),
    };
    c.validate()?;
    Ok(c)
}

fn thermal(cfg: &Config) -> Result<ThermalParams, CliError> {
    let th = ThermalParams {
        t_sub: cfg.num("T_sub"),
        t_c: cfg.num("T_c"),
        i_c0: cfg.num("I_c0"),
        r_sheet: cfg.num("R_sheet"),
        kappa0: cfg.num("kappa0"),
        c0: cfg.num("c0"),
        alpha: cfg.num("alpha"),
        n_bnd: cfg.num("n_bnd"),
        hotspot_len: cfg.num("hotspot_len"),
        hotspot_t: cfg.num("hotspot_T"),
    };
    th.validate()?;
    Ok(th)
}

fn geometry(cfg: &Config, th: &ThermalParams) -> Result<WireGeometry, CliError> {
    let g = WireGeometry {
        length: cfg.num("wire_length"),
        width: cfg.num("wire_width"),
        thickness: cfg.num("thickness"),
        n_cells: cfg.count("n_cells") as usize,
    };
    g.validate(th)?;
    Ok(g)
}

fn gate_current_max(cfg: &Config, th: &ThermalParams) -> f64 {
    cfg.num("i_max_fraction") * th.i_c0
}

/// `start, start + step, ...` up to and including `stop`.
fn frequency_grid(cfg: &Config) -> Result<Vec<f64>, CliError> {
    let (start, stop, step) = (cfg.num("f_start"), cfg.num("f_stop"), cfg.num("f_step"));
    if !(start > 0.0 && stop >= start && step > 0.0) {
        return Err(cfg.invalid("f_start", "need 0 < f_start <= f_stop and f_step > 0").into());
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|k| start + k as f64 * step).collect())
}

pub fn simulate_cmd(cfg: &Config, out: &mut OutDir) -> Result<(), CliError> {
    let th = thermal(cfg)?;
    let geom = geometry(cfg, &th)?;
    let mut sim = match cfg.text("mode") {
        "gm" => {
            let c = circuit(cfg)?;
            let bias = c.drive_for(cfg.num("frequency"), cfg.num("i_min"), gate_current_max(cfg, &th))?;
            SimConfig::gated(c, th, geom, bias, cfg.count("n_gates") as usize)
        }
        _ => {
            let c = CircuitParams::free_running(cfg.num("L_k"), cfg.num("R_L"));
            let i_bias = cfg.num("i_bias_fraction") * th.i_c0;
            let mut s = SimConfig::free_running(c, th, geom, i_bias, cfg.num("duration"));
            s.fm_bin_width = cfg.num("fm_bin");
            s
        }
    };
    sim.events = cfg
        .list("photon_times")
        .iter()
        .map(|&time| PhotonEvent {
            time,
            position: 0.5 * geom.length,
        })
        .collect();
    sim.dark_rate = cfg.num("photon_rate");
    sim.seed = cfg.count("seed");
    let dt = cfg.num("sample_interval");
    sim.sample_interval = (dt > 0.0).then_some(dt);
    log::info!("simulating {:.3e} s", sim.duration);
    let trace = simulate(&sim)?;

    let s = &trace.samples;
    out.csv(
        "trace.csv",
        &["t_s", "i_L_A", "v_c_V", "R_hs_ohm", "T_max_K"],
        (0..s.len()).map(|k| vec![s.t[k].into(), s.i_l[k].into(), s.v_c[k].into(), s.r_hs[k].into(), s.t_max[k].into()]),
    )?;
    if sim.mode == Mode::Gm {
        out.csv(
            "gates.csv",
            &["index", "peak_current_A", "latched", "relatched", "max_T_center_K"],
            trace.gates.iter().map(|g| {
                vec![
                    g.index.into(),
                    g.peak_current.into(),
                    g.latched.into(),
                    g.relatched.into(),
                    g.max_t_center.into(),
                ]
            }),
        )?;
    }
    let mut clicks = Vec::new();
    trace.clicks.write_csv(&mut clicks)?;
    out.write_bytes("clicks.csv", &clicks)
}

pub fn fig4c(cfg: &Config, out: &mut OutDir) -> Result<(), CliError> {
    let c = circuit(cfg)?;
    let th = thermal(cfg)?;
    let geom = geometry(cfg, &th)?;
    let freqs = frequency_grid(cfg)?;
    let n = cfg.count("peak_gates") as usize;
    if n == 0 {
        return Err(cfg.invalid("peak_gates", "must be >= 1").into());
    }
    log::info!("gate peaks at {} frequencies, R_p = {:.1} ohm", freqs.len(), c.r_p);
    let results = gate_peak_sweep(c, th, geom, &freqs, n)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

    let mut header = vec!["freq_MHz".to_string()];
    header.extend((1..=n).map(|k| format!("gate{k}_peak")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    out.csv(
        "fig4c.csv",
        &header,
        results.iter().map(|r| {
            let mut row = vec![Cell::from(r.frequency / 1e6)];
            row.extend(r.peaks.iter().map(|&p| Cell::from(p)));
            row
        }),
    )?;

    let mut header = vec!["freq_MHz".to_string(), "detection_latched".to_string()];
    header.extend((1..=n).map(|k| format!("gate{k}_latched")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    out.csv(
        "fig4c_latch.csv",
        &header,
        results.iter().map(|r| {
            let mut row = vec![Cell::from(r.frequency / 1e6), Cell::from(r.detection_latched)];
            row.extend(r.latched.iter().map(|&l| Cell::from(l)));
            row
        }),
    )
}

pub fn mcr_sweep(cfg: &Config, out: &mut OutDir) -> Result<(), CliError> {
    let th = thermal(cfg)?;
    let geom = geometry(cfg, &th)?;
    let c_p = cfg.num("mcr_C_p");
    let l_values = cfg.list("mcr_L_k");
    if l_values.is_empty() {
        return Err(cfg.invalid("mcr_L_k", "needs at least one inductance").into());
    }
    let opts = MaxFrequencyOptions {
        f_start: cfg.num("f_start"),
        resolution: cfg.num("mcr_resolution"),
        ..Default::default()
    };
    log::info!("maximum gate frequency for {} inductances", l_values.len());
    let f_max = max_frequency_sweep(l_values, c_p, th, geom, &opts)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let r_p = l_values
        .iter()
        .map(|&l| critically_damped_rp(l, c_p))
        .collect::<Result<Vec<_>, _>>()?;
    out.csv(
        "mcr.csv",
        &["L_k_H", "R_p_ohm", "f_max_Hz"],
        l_values
            .iter()
            .zip(&r_p)
            .zip(&f_max)
            .map(|((&l, &r), &f)| vec![l.into(), r.into(), f.into()]),
    )?;

    // temperature of the gate after a detection, on the frequency grid up
    // to each inductance's maximum gating frequency
    let grid = frequency_grid(cfg)?;
    let jobs: Vec<(f64, f64)> = l_values
        .iter()
        .zip(&f_max)
        .flat_map(|(&l, &fm)| grid.iter().filter(move |&&f| f <= fm).map(move |&f| (l, f)))
        .collect();
    log::info!("next-gate temperature at {} points", jobs.len());
    let temps = jobs
        .par_iter()
        .map(|&(l, f)| {
            let c = CircuitParams::critically_damped(l, c_p)?;
            probe_frequency(c, th, geom, f, 1)
        })
        .collect::<Result<Vec<_>, _>>()?;
    out.csv(
        "mcr_temperature.csv",
        &["L_k_H", "freq_MHz", "T_next_norm", "spurious"],
        jobs.iter()
            .zip(&temps)
            .map(|(&(l, f), p)| vec![l.into(), (f / 1e6).into(), (p.next_gate_t_max / th.t_sub).into(), p.spurious.into()]),
    )
}

pub fn tau_e_min(cfg: &Config, out: &mut OutDir) -> Result<(), CliError> {
    let th = thermal(cfg)?;
    let geom = geometry(cfg, &th)?;
    let l_k = cfg.num("L_k");
    let base = SimConfig::free_running(CircuitParams::free_running(l_k, cfg.num("R_L")), th, geom, 0.0, 1e-9);
    let sweep = ReturnCurrentOptions {
        ramp_fraction: cfg.num("rc_ramp_fraction"),
        ..Default::default()
    };
    let loads = cfg.list("rc_R_L");
    log::info!("return current at {} loads", loads.len());
    let points = loads
        .par_iter()
        .map(|&r| find_return_current(&base, r, &sweep))
        .collect::<Result<Vec<_>, _>>()?;
    out.csv(
        "return_current.csv",
        &["R_L_ohm", "tau_e_s", "return_current_A", "return_fraction", "collapsed"],
        points.iter().map(|p| {
            vec![
                p.r_l.into(),
                (l_k / p.r_l).into(),
                p.return_current.into(),
                (p.return_current / th.i_c0).into(),
                p.collapsed.into(),
            ]
        }),
    )?;
    if cfg.flag("rc_knee") {
        log::info!("locating the knee");
        let knee = find_tau_e_min(
            &base,
            &TauEMinOptions {
                sweep,
                ..Default::default()
            },
        )?;
        out.csv(
            "tau_e_min.csv",
            &["R_star_ohm", "tau_e_min_s", "plateau_A"],
            [vec![knee.r_star.into(), knee.tau_e_min.into(), knee.plateau.into()]],
        )?;
    }
    Ok(())
}

fn source_model(cfg: &Config, th: &ThermalParams) -> Result<SourceModel, CliError> {
    let pulsed = cfg.text("source") == "pulsed";
    let qe_max = cfg.num("qe_max");
    let i_half = cfg.num("qe_i_half");
    let model = SourceModel {
        kind: if pulsed { SourceKind::Pulsed } else { SourceKind::Cw },
        mean_photons_per_gate: cfg.num("mu"),
        pulse_divisor: if pulsed { cfg.count("pulse_divisor") as usize } else { 1 },
        qe_curve: if i_half == 0.0 {
            QeCurve::Constant(qe_max)
        } else {
            QeCurve::Sigmoid {
                qe_max,
                i_half,
                width: cfg.num("qe_width"),
            }
        },
        i_min: cfg.num("i_min"),
        i_max: gate_current_max(cfg, th),
        gate_period: 1.0 / cfg.num("frequency"),
        dark_prob_per_gate: cfg.num("dark_prob"),
        afterpulse_prob: cfg.num("afterpulse_prob"),
        ..Default::default()
    };
    model.validate()?;
    Ok(model)
}

pub fn stats(cfg: &Config, out: &mut OutDir) -> Result<(), CliError> {
    let th = thermal(cfg)?;
    let model = source_model(cfg, &th)?;
    let n = cfg.count("stats_gates") as usize;
    let seed = cfg.count("seed");
    let f = cfg.num("frequency");
    let mu = model.mean_photons_per_gate;

    log::info!("generating {n} illuminated and {n} dark gates");
    let light = generate_clicks(&model, n, seed)?;
    let dark_model = SourceModel {
        mean_photons_per_gate: 0.0,
        ..model.clone()
    };
    let dark = generate_clicks(&dark_model, n, seed.wrapping_add(1))?;

    let gamma = autocorrelation(&light, cfg.count("max_lag") as usize)?;
    out.csv(
        "gamma.csv",
        &["lag", "gamma"],
        gamma.iter().enumerate().map(|(k, &g)| vec![(k + 1).into(), g.into()]),
    )?;
    let bins = cfg.count("hist_bins") as usize;
    let hist = gate_phase_histogram(&light, bins)?;
    out.csv(
        "histogram.csv",
        &["phase_s", "density"],
        hist.iter()
            .enumerate()
            .map(|(k, &h)| vec![((k as f64 + 0.5) * model.gate_period / bins as f64).into(), h.into()]),
    )?;

    // photons per gate averaged over lit and unlit gates
    let est = estimate_qe_dcr(&light, &dark, mu / model.pulse_divisor as f64, f, 0.95)?;
    let ap = afterpulse_probability(&gamma, model.pulse_divisor, light.click_probability())?;
    // click rate at fractions of the configured photon number
    let rates = [0.125, 0.25, 0.5, 1.0]
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let m = SourceModel {
                mean_photons_per_gate: s * mu,
                ..model.clone()
            };
            let t = generate_clicks(&m, n, seed.wrapping_add(2 + k as u64))?;
            Ok((s * mu, t.click_probability() * f))
        })
        .collect::<Result<Vec<_>, snspd::Error>>()?;
    let lin = linearity_check(&rates)?;
    let z = 1.959963984540054;
    let rows: Vec<(&'static str, f64, f64, f64)> = vec![
        ("qe", est.qe.value, est.qe.lo, est.qe.hi),
        ("dcr_Hz", est.dcr.value, est.dcr.lo, est.dcr.hi),
        ("click_prob", est.click_prob, est.click_prob, est.click_prob),
        ("dark_prob", est.dark_prob, est.dark_prob, est.dark_prob),
        (
            "afterpulse_prob",
            ap.probability,
            ap.probability - z * ap.std_error,
            ap.probability + z * ap.std_error,
        ),
        ("afterpulse_baseline", ap.baseline, ap.baseline, ap.baseline),
        ("linearity_slope", lin.slope, lin.ci.0, lin.ci.1),
    ];
    out.csv(
        "report.csv",
        &["quantity", "value", "lo", "hi"],
        rows.iter().map(|&(name, v, lo, hi)| vec![name.into(), v.into(), lo.into(), hi.into()]),
    )?;

    if cfg.flag("write_clicks") {
        let mut bytes = Vec::new();
        light.write_csv(&mut bytes)?;
        out.write_bytes("clicks.csv", &bytes)?;
    }
    Ok(())
}

fn read_network(path: &Path) -> Result<TwoPortNetwork, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_touchstone(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn calibrate(cfg: &Config, out: &mut OutDir) -> Result<(), CliError> {
    let load = circuit(cfg)?;
    let th = thermal(cfg)?;
    let files = cfg.paths("chain");
    let Some((first, rest)) = files.split_first() else {
        return Err(cfg.invalid("chain", "needs at least one Touchstone file").into());
    };
    let mut chain = read_network(first)?;
    for p in rest {
        chain = cascade(&chain, &read_network(p)?)?;
    }
    let n = cfg.count("cal_points") as usize;
    let f_max = cfg.num("cal_f_max");
    if n < 2 || !(f_max > 0.0) {
        return Err(cfg.invalid("cal_points", "need at least 2 points and cal_f_max > 0").into());
    }
    let freqs: Vec<f64> = (0..n).map(|k| f_max * k as f64 / (n - 1) as f64).collect();
    let g = freqs
        .iter()
        .map(|&f| transconductance(&chain, &load, f))
        .collect::<Result<Vec<_>, _>>()?;
    out.csv(
        "transconductance.csv",
        &["freq_Hz", "g_re_S", "g_im_S", "g_abs_S", "g_phase_rad"],
        freqs
            .iter()
            .zip(&g)
            .map(|(&f, g)| vec![f.into(), g.re.into(), g.im.into(), g.norm().into(), g.arg().into()]),
    )?;

    let f = cfg.num("frequency");
    let (i_min, i_max) = (cfg.num("i_min"), gate_current_max(cfg, &th));
    let drive = drive_through_chain(&chain, &load, f, i_min, i_max)?;
    out.csv(
        "drive.csv",
        &["frequency_Hz", "offset_V", "amplitude_V", "phase_rad", "i_min_A", "i_max_A"],
        [vec![
            drive.frequency.into(),
            drive.offset.into(),
            drive.amplitude.into(),
            drive.phase.into(),
            i_min.into(),
            i_max.into(),
        ]],
    )
}

pub fn validate_model(cfg: &Config, out: &mut OutDir) -> Result<(), CliError> {
    let device = CircuitParams {
        r_b: cfg.num("validate_R_B"),
        ..circuit(cfg)?
    };
    let reference = match cfg.paths("reference") {
        [one] => read_network(one)?,
        _ => return Err(cfg.invalid("reference", "needs exactly one Touchstone file").into()),
    };
    let (ls, cs) = (cfg.list("netlist_L"), cfg.list("netlist_C"));
    if ls.len() != cs.len() {
        return Err(cfg.invalid("netlist_C", "needs one capacitance per netlist_L entry").into());
    }
    let mut sections: Vec<Section> = ls
        .iter()
        .zip(cs)
        .flat_map(|(&l, &c)| [Section::SeriesL(l), Section::ShuntC(c)])
        .collect();
    sections.push(Section::ShuntC(device.pad_cap));
    let netlist = Netlist {
        sections,
        termination: Termination::Device(device),
    };
    let report = compare_reflection(&netlist, &reference, cfg.num("cutoff"))?;
    log::info!("S11 rms deviation {:.3e}", report.rms);
    let mut bytes = Vec::new();
    report.write_csv(&mut bytes)?;
    out.write_bytes("s11.csv", &bytes)?;
    out.csv(
        "s11_summary.csv",
        &["cutoff_Hz", "points", "rms_deviation"],
        [vec![cfg.num("cutoff").into(), report.rows.len().into(), report.rms.into()]],
    )
}
