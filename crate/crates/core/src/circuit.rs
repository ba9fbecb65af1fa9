//! Lumped bias network of the nanowire.
//!
//! Topology: voltage source, series `R_p`, a node shunted to ground by
//! `C_p`, then the kinetic inductance `L_k` in series with the hotspot
//! resistance `R_hs(t)` to ground. With `C_p = 0` the node collapses and the
//! network reduces to the free-running load `L_k / R_L` model.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::error::{domain, Error, Result};

/// Component values of the bias network. SI units throughout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircuitParams {
    /// Kinetic inductance of the nanowire (H).
    pub l_k: f64,
    /// Shunt capacitance at the device node (F).
    pub c_p: f64,
    /// Effective source resistance seen by the RLC (ohm).
    pub r_p: f64,
    /// Bias resistor (ohm).
    pub r_b: f64,
    /// Current-sense resistor (ohm).
    pub r_sense: f64,
    /// Coax termination (ohm).
    pub r_term: f64,
    /// Board pad capacitance (F).
    pub pad_cap: f64,
}

impl Default for CircuitParams {
    fn default() -> Self {
        Self {
            l_k: 490e-9,
            c_p: 0.57e-12,
            r_p: 725.0,
            r_b: 650.0,
            r_sense: 50.0,
            r_term: 50.0,
            pad_cap: 0.14e-12,
        }
    }
}

impl CircuitParams {
    /// Free-running load `R_L = R_B + R_sense`.
    pub fn load_resistance(&self) -> f64 {
        self.r_b + self.r_sense
    }

    /// Free-running configuration: the node capacitance is removed and the
    /// nanowire sees `R_L` directly.
    pub fn free_running(l_k: f64, r_l: f64) -> Self {
        Self {
            l_k,
            c_p: 0.0,
            r_p: r_l,
            r_b: r_l,
            r_sense: 0.0,
            ..Self::default()
        }
    }

    /// Gated configuration with `R_p` chosen for critical damping.
    pub fn critically_damped(l_k: f64, c_p: f64) -> Result<Self> {
        let r_p = critically_damped_rp(l_k, c_p)?;
        Ok(Self {
            l_k,
            c_p,
            r_p,
            ..Self::default()
        })
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("L_k", self.l_k),
            ("C_p", self.c_p),
            ("R_p", self.r_p),
            ("R_B", self.r_b),
            ("R_sense", self.r_sense),
            ("R_term", self.r_term),
            ("pad_cap", self.pad_cap),
        ];
        for (name, v) in named {
            if !v.is_finite() || v < 0.0 {
                return domain(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if self.l_k <= 0.0 {
            return domain("L_k must be > 0");
        }
        if self.r_p <= 0.0 {
            return domain("R_p must be > 0");
        }
        Ok(())
    }

    /// Current transfer `I_L / V_source` of the linear (superconducting)
    /// network at frequency `f`: `1 / (R_p (1 - w^2 L C) + j w L)`.
    pub fn transconductance(&self, f: f64) -> Complex64 {
        let w = 2.0 * PI * f;
        let denom = Complex64::new(self.r_p * (1.0 - w * w * self.l_k * self.c_p), w * self.l_k);
        denom.inv()
    }

    /// Undamped natural angular frequency `1/sqrt(L_k C_p)`.
    pub fn natural_angular_frequency(&self) -> Option<f64> {
        (self.c_p > 0.0).then(|| 1.0 / (self.l_k * self.c_p).sqrt())
    }

    /// Eigenvalues of the linear 2x2 system with `R_hs = 0`.
    pub fn eigenvalues(&self) -> Result<[Complex64; 2]> {
        if self.c_p <= 0.0 {
            return Err(Error::DegenerateTopology("C_p = 0 has a single pole".into()));
        }
        // s^2 + s/(R_p C_p) + 1/(L_k C_p) = 0
        let b = 1.0 / (self.r_p * self.c_p);
        let c = 1.0 / (self.l_k * self.c_p);
        let disc = Complex64::new(b * b - 4.0 * c, 0.0).sqrt();
        Ok([(-b + disc) / 2.0, (-b - disc) / 2.0])
    }

    /// Integration step bound `min(tau_RC, tau_RL, T_gate) / 200`.
    pub fn max_step(&self, gate_period: Option<f64>) -> f64 {
        let mut tau = self.l_k / self.r_p;
        if self.c_p > 0.0 {
            tau = tau.min(self.r_p * self.c_p);
        }
        if let Some(p) = gate_period {
            tau = tau.min(p);
        }
        tau / 200.0
    }
}

/// Dynamic electrical state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CircuitState {
    /// Voltage across `C_p` (V).
    pub v_c: f64,
    /// Current through `L_k`, i.e. the nanowire current (A).
    pub i_l: f64,
    /// Time (s).
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BiasKind {
    Dc,
    Sine,
}

/// Source drive `offset + amplitude * sin(2 pi f t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasWaveform {
    pub kind: BiasKind,
    pub offset: f64,
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
    pub target_i_min: f64,
    pub target_i_max: f64,
}

impl BiasWaveform {
    /// Constant source voltage producing `i_bias` through `R_p` in the
    /// superconducting state.
    pub fn dc(offset: f64, i_bias: f64) -> Self {
        Self {
            kind: BiasKind::Dc,
            offset,
            amplitude: 0.0,
            frequency: 0.0,
            phase: 0.0,
            target_i_min: i_bias.min(0.0),
            target_i_max: i_bias.max(f64::MIN_POSITIVE),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            BiasKind::Sine if !(self.frequency > 0.0 && self.frequency.is_finite()) => {
                return domain("sine bias requires frequency > 0")
            }
            BiasKind::Dc if self.amplitude != 0.0 => {
                return domain("DC bias requires amplitude = 0")
            }
            _ => {}
        }
        if !(self.target_i_min < self.target_i_max) {
            return domain("target_i_min must be < target_i_max");
        }
        if !self.offset.is_finite() || !self.amplitude.is_finite() || !self.phase.is_finite() {
            return domain("bias values must be finite");
        }
        Ok(())
    }

    #[inline]
    pub fn voltage(&self, t: f64) -> f64 {
        match self.kind {
            BiasKind::Dc => self.offset,
            BiasKind::Sine => {
                self.offset + self.amplitude * (2.0 * PI * self.frequency * t + self.phase).sin()
            }
        }
    }

    pub fn period(&self) -> Option<f64> {
        match self.kind {
            BiasKind::Dc => None,
            BiasKind::Sine => Some(1.0 / self.frequency),
        }
    }
}

/// Electrical reset time constant `L_k / R_L`.
pub fn time_constant(l_k: f64, r_l: f64) -> Result<f64> {
    if !(l_k > 0.0) || !(r_l > 0.0) {
        return domain(format!("time_constant needs L_k > 0 and R_L > 0, got {l_k}, {r_l}"));
    }
    Ok(l_k / r_l)
}

/// Time derivatives `(dV_c/dt, dI_L/dt)` of the network.
pub fn circuit_derivative(
    state: &CircuitState,
    params: &CircuitParams,
    source_v: f64,
    r_hs: f64,
) -> Result<(f64, f64)> {
    if params.c_p <= 0.0 || params.l_k <= 0.0 {
        return Err(Error::DegenerateTopology(
            "C_p and L_k must be > 0; use the free-running path for C_p = 0".into(),
        ));
    }
    Ok(derivative_unchecked(state.v_c, state.i_l, params, source_v, r_hs))
}

#[inline]
fn derivative_unchecked(v_c: f64, i_l: f64, p: &CircuitParams, source_v: f64, r_hs: f64) -> (f64, f64) {
    let dv = ((source_v - v_c) / p.r_p - i_l) / p.c_p;
    let di = (v_c - i_l * r_hs) / p.l_k;
    (dv, di)
}

#[inline]
fn free_running_di(i_l: f64, p: &CircuitParams, source_v: f64, r_hs: f64) -> f64 {
    (source_v - i_l * (p.r_p + r_hs)) / p.l_k
}

/// One classical RK4 step of length `dt` with `R_hs` held fixed.
///
/// For `C_p = 0` the algebraic free-running reduction is integrated and
/// `v_c` is reconstructed as the node voltage `V_s - R_p I_L`.
pub fn rk4_step<F>(state: &CircuitState, params: &CircuitParams, source: F, r_hs: f64, dt: f64) -> CircuitState
where
    F: Fn(f64) -> f64,
{
    let t = state.t;
    let h2 = 0.5 * dt;
    let (vs0, vs1, vs2) = (source(t), source(t + h2), source(t + dt));
    if params.c_p <= 0.0 {
        let i = state.i_l;
        let k1 = free_running_di(i, params, vs0, r_hs);
        let k2 = free_running_di(i + h2 * k1, params, vs1, r_hs);
        let k3 = free_running_di(i + h2 * k2, params, vs1, r_hs);
        let k4 = free_running_di(i + dt * k3, params, vs2, r_hs);
        let i_new = i + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        return CircuitState {
            v_c: vs2 - params.r_p * i_new,
            i_l: i_new,
            t: t + dt,
        };
    }
    let (v, i) = (state.v_c, state.i_l);
    let (a1, b1) = derivative_unchecked(v, i, params, vs0, r_hs);
    let (a2, b2) = derivative_unchecked(v + h2 * a1, i + h2 * b1, params, vs1, r_hs);
    let (a3, b3) = derivative_unchecked(v + h2 * a2, i + h2 * b2, params, vs1, r_hs);
    let (a4, b4) = derivative_unchecked(v + dt * a3, i + dt * b3, params, vs2, r_hs);
    CircuitState {
        v_c: v + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
        i_l: i + dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4),
        t: t + dt,
    }
}

/// `zeta = sqrt(L_k / C_p) / (2 R_p)`.
pub fn damping_ratio(params: &CircuitParams) -> Result<f64> {
    if !(params.l_k > 0.0 && params.c_p > 0.0 && params.r_p > 0.0) {
        return domain("damping_ratio needs L_k, C_p, R_p > 0");
    }
    Ok((params.l_k / params.c_p).sqrt() / (2.0 * params.r_p))
}

/// Source resistance that makes the network critically damped.
pub fn critically_damped_rp(l_k: f64, c_p: f64) -> Result<f64> {
    if !(l_k > 0.0 && c_p > 0.0) {
        return domain("critically_damped_rp needs L_k, C_p > 0");
    }
    Ok((l_k / c_p).sqrt() / 2.0)
}

/// Source offset and amplitude that put the steady periodic nanowire current
/// exactly on `[i_min, i_max]`, given the DC and drive-frequency
/// transconductances of the bias chain.
///
/// The phase is chosen so the current maxima fall at the centre of each
/// gate `[k T, (k + 1) T)`.
pub fn solve_drive(
    g_dc: f64,
    g_f: Complex64,
    frequency: f64,
    i_min: f64,
    i_max: f64,
) -> Result<BiasWaveform> {
    if !(i_min < i_max) {
        return Err(Error::Precondition(format!("i_min ({i_min:e}) must be < i_max ({i_max:e})")));
    }
    if g_dc == 0.0 || g_f.norm() == 0.0 || !g_dc.is_finite() || !g_f.norm().is_finite() {
        return Err(Error::Singular("zero transconductance".into()));
    }
    if !(g_dc > 0.0) {
        return domain("g_dc must be > 0");
    }
    if !(frequency > 0.0) {
        return domain("drive frequency must be > 0");
    }
    let offset = 0.5 * (i_max + i_min) / g_dc;
    let amplitude = 0.5 * (i_max - i_min) / g_f.norm();
    Ok(BiasWaveform {
        kind: BiasKind::Sine,
        offset,
        amplitude,
        frequency,
        phase: -FRAC_PI_2 - g_f.arg(),
        target_i_min: i_min,
        target_i_max: i_max,
    })
}

impl CircuitParams {
    /// Drive for this network at `frequency` using its own transconductance.
    pub fn drive_for(&self, frequency: f64, i_min: f64, i_max: f64) -> Result<BiasWaveform> {
        solve_drive(1.0 / self.r_p, self.transconductance(frequency), frequency, i_min, i_max)
    }

    /// Periodic steady state of the superconducting network at time `t`.
    pub fn steady_state(&self, bias: &BiasWaveform, t: f64) -> CircuitState {
        let i_dc = bias.offset / self.r_p;
        match bias.kind {
            BiasKind::Dc => CircuitState { v_c: 0.0, i_l: i_dc, t },
            BiasKind::Sine => {
                let w = 2.0 * PI * bias.frequency;
                let g = self.transconductance(bias.frequency);
                // Phasor of the source is A e^{j phase}; time signal Im(. e^{j w t}).
                let i_ph = g * Complex64::from_polar(bias.amplitude, bias.phase);
                let rot = Complex64::from_polar(1.0, w * t);
                let i_ac = (i_ph * rot).im;
                // v_c = L_k dI/dt
                let v_ac = (i_ph * Complex64::new(0.0, w * self.l_k) * rot).im;
                CircuitState { v_c: v_ac, i_l: i_dc + i_ac, t }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn time_constant_values() {
        assert_relative_eq!(time_constant(490e-9, 150.0).unwrap(), 3.2666666e-9, max_relative = 1e-6);
        assert_relative_eq!(time_constant(490e-9, 100.0).unwrap(), 4.9e-9, max_relative = 1e-12);
        assert!(time_constant(1e-30, 50.0).unwrap() < 1e-30);
        assert!(time_constant(0.0, 50.0).is_err());
        assert!(time_constant(1e-9, -1.0).is_err());
    }

    #[test]
    fn derivative_initial_and_steady() {
        let p = CircuitParams::default();
        let v0 = 0.01;
        let s = CircuitState::default();
        let (dv, di) = circuit_derivative(&s, &p, v0, 0.0).unwrap();
        assert_relative_eq!(dv, v0 / (p.r_p * p.c_p), max_relative = 1e-12);
        assert_eq!(di, 0.0);

        let ss = CircuitState { v_c: 0.0, i_l: v0 / p.r_p, t: 0.0 };
        let (dv, di) = circuit_derivative(&ss, &p, v0, 0.0).unwrap();
        assert!(dv.abs() < 1e-6 * v0 / (p.r_p * p.c_p));
        assert_eq!(di, 0.0);
    }

    #[test]
    fn derivative_rejects_degenerate() {
        let p = CircuitParams { c_p: 0.0, ..Default::default() };
        assert!(matches!(
            circuit_derivative(&CircuitState::default(), &p, 1.0, 0.0),
            Err(Error::DegenerateTopology(_))
        ));
    }

    #[test]
    fn damping_of_reported_configuration() {
        let p = CircuitParams::default();
        let z = damping_ratio(&p).unwrap();
        assert!((z - 0.6394).abs() < 1e-3, "zeta = {z}");
        let ev = p.eigenvalues().unwrap();
        assert!(ev[0].im.abs() > 0.0 && ev[1].im.abs() > 0.0);

        let crit = CircuitParams::critically_damped(p.l_k, p.c_p).unwrap();
        assert_relative_eq!(damping_ratio(&crit).unwrap(), 1.0, max_relative = 1e-14);
        let big = CircuitParams { r_p: 1e12, ..p };
        assert!(damping_ratio(&big).unwrap() < 1e-6);
    }

    #[test]
    fn critical_resistance_scaling() {
        let r1 = critically_damped_rp(6e-9, 0.01e-12).unwrap();
        let r4 = critically_damped_rp(24e-9, 0.01e-12).unwrap();
        assert_relative_eq!(r4, 2.0 * r1, max_relative = 1e-14);
        assert!(critically_damped_rp(0.0, 1e-12).is_err());
        assert!(critically_damped_rp(1e-9, -1.0).is_err());
    }

    #[test]
    fn solve_drive_example() {
        let g = 1.0 / 700.0;
        let b = solve_drive(g, Complex64::new(g, 0.0), 625e6, -2e-6, 18e-6).unwrap();
        assert_relative_eq!(b.offset, 5.6e-3, max_relative = 1e-12);
        assert_relative_eq!(b.amplitude, 7.0e-3, max_relative = 1e-12);
        assert!(matches!(
            solve_drive(g, Complex64::new(g, 0.0), 625e6, 18e-6, 18e-6),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            solve_drive(0.0, Complex64::new(g, 0.0), 625e6, 0.0, 18e-6),
            Err(Error::Singular(_))
        ));
        assert!(matches!(
            solve_drive(g, Complex64::new(0.0, 0.0), 625e6, 0.0, 18e-6),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn bias_validation() {
        let mut b = BiasWaveform::dc(1e-3, 1e-6);
        assert!(b.validate().is_ok());
        b.amplitude = 1e-3;
        assert!(b.validate().is_err());
        let p = CircuitParams::default();
        let mut s = p.drive_for(100e6, -2e-6, 18e-6).unwrap();
        assert!(s.validate().is_ok());
        s.frequency = 0.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn steady_state_hits_targets_and_satisfies_ode() {
        let p = CircuitParams::default();
        let bias = p.drive_for(625e6, -2e-6, 18e-6).unwrap();
        let period = bias.period().unwrap();
        let mut lo = f64::MAX;
        let mut hi = f64::MIN;
        for k in 0..2000 {
            let t = period * k as f64 / 2000.0;
            let s = p.steady_state(&bias, t);
            lo = lo.min(s.i_l);
            hi = hi.max(s.i_l);
        }
        assert_relative_eq!(hi, 18e-6, max_relative = 1e-5);
        assert_relative_eq!(lo, -2e-6, max_relative = 1e-4);
        // maximum at gate centre
        let centre = p.steady_state(&bias, 0.5 * period);
        assert_relative_eq!(centre.i_l, 18e-6, max_relative = 1e-12);

        // consistent with the ODE: integrate one period from steady state
        let mut s = p.steady_state(&bias, 0.0);
        let dt = p.max_step(Some(period));
        let n = (period / dt).ceil() as usize;
        let h = period / n as f64;
        for _ in 0..n {
            s = rk4_step(&s, &p, |t| bias.voltage(t), 0.0, h);
        }
        let expect = p.steady_state(&bias, period);
        assert!((s.i_l - expect.i_l).abs() < 1e-9 * 20e-6 + 1e-12);
    }
}
