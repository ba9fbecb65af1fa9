//! One-dimensional electro-thermal model of the nanowire.
//!
//! The wire is split into `n_cells` equal cells. Each cell carries a
//! temperature and a normal/superconducting flag. The heat balance per unit
//! volume is
//!
//! ```text
//! c(T) dT/dt = d/dx(kappa(T) dT/dx) + j^2 rho [normal] - (alpha/d)(T^n - T_sub^n)
//! ```
//!
//! with `kappa = kappa0 T/T_c`, `c = c0 T/T_c`, insulated wire ends. Since
//! both laws are linear in `T`, the equation is linear diffusion in
//! `phi = T^2` with constant diffusivity `kappa0/c0`, which is what the
//! stepper integrates. The energy density `c0 phi / (2 T_c)` is conserved
//! exactly by the flux form.
//!
//! Only a window of cells around the hot region is updated. Cells outside
//! the window are within [`FROZEN_TOLERANCE`] of `T_sub`, superconducting,
//! and are held fixed.

use crate::error::{domain, Error, Result};

/// Temperature excess (K) below which a superconducting cell is frozen.
pub const FROZEN_TOLERANCE: f64 = 1e-9;
const WINDOW_MARGIN: usize = 2;
/// Explicit diffusion stability factor (`dt <= 0.4 dx^2 c / kappa`).
const STABILITY: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WireGeometry {
    /// Wire length (m).
    pub length: f64,
    /// Wire width (m).
    pub width: f64,
    /// Film thickness (m).
    pub thickness: f64,
    pub n_cells: usize,
}

impl Default for WireGeometry {
    fn default() -> Self {
        Self {
            length: 500e-6,
            width: 120e-9,
            thickness: 4e-9,
            n_cells: 50_000,
        }
    }
}

impl WireGeometry {
    pub fn cell_len(&self) -> f64 {
        self.length / self.n_cells as f64
    }

    pub fn cross_section(&self) -> f64 {
        self.width * self.thickness
    }

    /// Normal-state resistance of the full wire.
    pub fn full_resistance(&self, params: &ThermalParams) -> f64 {
        params.r_sheet * self.length / self.width
    }

    pub fn validate(&self, params: &ThermalParams) -> Result<()> {
        for (name, v) in [
            ("length", self.length),
            ("width", self.width),
            ("thickness", self.thickness),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return domain(format!("wire {name} must be > 0"));
            }
        }
        if self.n_cells < 50 {
            return domain(format!("n_cells must be >= 50, got {}", self.n_cells));
        }
        let per_hotspot = params.hotspot_len / self.cell_len();
        if per_hotspot < 3.0 - 1e-9 {
            return domain(format!(
                "cell length {:.3e} m gives {per_hotspot:.2} cells per hotspot; need >= 3",
                self.cell_len()
            ));
        }
        Ok(())
    }
}

/// Material and seeding constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalParams {
    /// Substrate temperature (K).
    pub t_sub: f64,
    /// Critical temperature (K).
    pub t_c: f64,
    /// Critical current at `t_sub` (A).
    pub i_c0: f64,
    /// Normal-state sheet resistance (ohm per square).
    pub r_sheet: f64,
    /// Thermal conductivity at `T_c` (W/(m K)).
    pub kappa0: f64,
    /// Heat capacity at `T_c` (J/(m^3 K)).
    pub c0: f64,
    /// Substrate boundary conductance scale (W/(m^2 K^n)).
    pub alpha: f64,
    /// Exponent of the substrate coupling.
    pub n_bnd: f64,
    /// Length of a photon-induced seed (m).
    pub hotspot_len: f64,
    /// Temperature of a photon-induced seed (K).
    pub hotspot_t: f64,
}

impl Default for ThermalParams {
    fn default() -> Self {
        Self {
            t_sub: 4.2,
            t_c: 10.5,
            i_c0: 20e-6,
            r_sheet: 400.0,
            kappa0: 0.1,
            c0: 9.8e3,
            alpha: 200.0,
            n_bnd: 3.0,
            hotspot_len: 30e-9,
            hotspot_t: 21.0,
        }
    }
}

impl ThermalParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("T_sub", self.t_sub),
            ("T_c", self.t_c),
            ("I_c0", self.i_c0),
            ("R_sheet", self.r_sheet),
            ("kappa0", self.kappa0),
            ("c0", self.c0),
            ("n_bnd", self.n_bnd),
            ("hotspot_len", self.hotspot_len),
            ("hotspot_T", self.hotspot_t),
        ];
        for (name, v) in all {
            if !(v > 0.0 && v.is_finite()) {
                return domain(format!("{name} must be > 0, got {v}"));
            }
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return domain("alpha must be >= 0");
        }
        if !(self.t_sub < self.t_c) {
            return domain("T_sub must be < T_c");
        }
        Ok(())
    }

    pub fn conductivity(&self, t: f64) -> f64 {
        self.kappa0 * t / self.t_c
    }

    pub fn heat_capacity(&self, t: f64) -> f64 {
        self.c0 * t / self.t_c
    }

    /// Linearized substrate cooling time at `T_c`: `c d / (n alpha T_c^(n-1))`.
    pub fn cooling_time(&self, thickness: f64) -> f64 {
        self.heat_capacity(self.t_c) * thickness
            / (self.n_bnd * self.alpha * self.t_c.powf(self.n_bnd - 1.0))
    }

    /// Thermal healing length at `T_c`: `sqrt(kappa d / (n alpha T_c^(n-1)))`.
    pub fn healing_length(&self, thickness: f64) -> f64 {
        (self.conductivity(self.t_c) * thickness
            / (self.n_bnd * self.alpha * self.t_c.powf(self.n_bnd - 1.0)))
        .sqrt()
    }
}

/// Critical current at temperature `t`.
///
/// Quadratic suppression `1 - (T/T_c)^2`, scaled so that the value at
/// `T_sub` equals `I_c0`, and clamped to zero above `T_c`.
pub fn ic_of_t(t: f64, params: &ThermalParams) -> f64 {
    let r = t / params.t_c;
    if r >= 1.0 {
        return 0.0;
    }
    let sub = params.t_sub / params.t_c;
    params.i_c0 * (1.0 - r * r) / (1.0 - sub * sub)
}

/// Temperature field and phase of every cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalProfile {
    pub temperature: Vec<f64>,
    pub normal: Vec<bool>,
    n_normal: usize,
    /// Inclusive range of cells updated by the stepper.
    window: Option<(usize, usize)>,
    scratch: Vec<f64>,
}

impl ThermalProfile {
    /// Wire at `T_sub`, fully superconducting.
    pub fn uniform(geom: &WireGeometry, params: &ThermalParams) -> Self {
        Self {
            temperature: vec![params.t_sub; geom.n_cells],
            normal: vec![false; geom.n_cells],
            n_normal: 0,
            window: None,
            scratch: Vec::new(),
        }
    }

    /// Profile from explicit arrays; every cell becomes active.
    pub fn from_arrays(temperature: Vec<f64>, normal: Vec<bool>) -> Result<Self> {
        if temperature.len() != normal.len() || temperature.is_empty() {
            return domain("temperature and normal arrays must have equal, non-zero length");
        }
        let n_normal = normal.iter().filter(|&&b| b).count();
        let last = temperature.len() - 1;
        Ok(Self {
            temperature,
            normal,
            n_normal,
            window: Some((0, last)),
            scratch: Vec::new(),
        })
    }

    pub fn n_cells(&self) -> usize {
        self.temperature.len()
    }

    pub fn normal_count(&self) -> usize {
        self.n_normal
    }

    pub fn is_superconducting(&self) -> bool {
        self.n_normal == 0
    }

    /// Cells currently being integrated, if any.
    pub fn active_window(&self) -> Option<(usize, usize)> {
        self.window
    }

    /// Hottest cell temperature. Frozen cells are within
    /// [`FROZEN_TOLERANCE`] of `T_sub` and are not scanned.
    pub fn max_temperature(&self, params: &ThermalParams) -> f64 {
        match self.window {
            Some((lo, hi)) => self.temperature[lo..=hi]
                .iter()
                .copied()
                .fold(params.t_sub, f64::max),
            None => params.t_sub,
        }
    }

    /// `sum c(T) T V_cell` over the wire (J).
    pub fn thermal_energy(&self, geom: &WireGeometry, params: &ThermalParams) -> f64 {
        let vol = geom.cell_len() * geom.cross_section();
        self.temperature
            .iter()
            .map(|&t| params.heat_capacity(t) * t * vol)
            .sum()
    }

    fn widen(&mut self, lo: usize, hi: usize) {
        let last = self.n_cells() - 1;
        let lo = lo.saturating_sub(WINDOW_MARGIN);
        let hi = (hi + WINDOW_MARGIN).min(last);
        self.window = Some(match self.window {
            Some((a, b)) => (a.min(lo), b.max(hi)),
            None => (lo, hi),
        });
    }

    /// Advance the field by `dt` at wire current `i_wire`, sub-stepping to
    /// respect the explicit diffusion bound.
    pub fn step(
        &mut self,
        geom: &WireGeometry,
        params: &ThermalParams,
        i_wire: f64,
        dt: f64,
    ) -> Result<()> {
        if !(dt >= 0.0) {
            return domain("thermal step needs dt >= 0");
        }
        if dt == 0.0 {
            return Ok(());
        }
        // A frozen cell switches only if the current exceeds its critical
        // current, which is at least ic(T_sub + tol).
        if i_wire.abs() > ic_of_t(params.t_sub + FROZEN_TOLERANCE, params) {
            self.widen(0, self.n_cells() - 1);
        }
        if self.window.is_none() {
            return Ok(());
        }

        let dx = geom.cell_len();
        let diffusivity = params.kappa0 / params.c0;
        let dt_max = STABILITY * dx * dx * params.heat_capacity(params.t_c)
            / params.conductivity(params.t_c);
        let n_sub = (dt / dt_max).ceil().max(1.0) as usize;
        let h = dt / n_sub as f64;

        let j = i_wire / geom.cross_section();
        let joule = j * j * params.r_sheet * geom.thickness;
        let to_phi = 2.0 * params.t_c / params.c0;
        let sub_coeff = params.alpha / geom.thickness;
        let half_n = 0.5 * params.n_bnd;
        let t_sub_n = params.t_sub.powf(params.n_bnd);
        let lambda = diffusivity * h / (dx * dx);
        let ic_abs = i_wire.abs();

        for _ in 0..n_sub {
            let Some((lo, hi)) = self.window else { break };
            let width = hi - lo + 1;
            self.scratch.clear();
            self.scratch
                .extend(self.temperature[lo..=hi].iter().map(|t| t * t));
            let phi = &self.scratch;
            for k in 0..width {
                let p = phi[k];
                // insulated at the window edges
                let left = if k > 0 { phi[k - 1] } else { p };
                let right = if k + 1 < width { phi[k + 1] } else { p };
                let lap = left - 2.0 * p + right;
                let src = if self.normal[lo + k] { joule } else { 0.0 };
                let pw = p.powf(half_n);
                let loss = sub_coeff * (pw - t_sub_n);
                let dloss = sub_coeff * half_n * pw / p;
                let rate = lambda * lap + h * to_phi * (src - loss);
                let p_new = p + rate / (1.0 + h * to_phi * dloss);
                if !(p_new > 0.0) || !p_new.is_finite() {
                    return Err(Error::NumericalInstability {
                        time: f64::NAN,
                        detail: format!(
                            "cell {} reached phi = {p_new:e} (T was {:.4} K, i = {i_wire:e} A)",
                            lo + k,
                            p.sqrt()
                        ),
                    });
                }
                self.temperature[lo + k] = p_new.sqrt();
            }

            // switching rule and window bookkeeping
            let mut first = None;
            let mut last = 0;
            for idx in lo..=hi {
                let t = self.temperature[idx];
                let is_normal = t > params.t_c || ic_abs > ic_of_t(t, params);
                if is_normal != self.normal[idx] {
                    self.normal[idx] = is_normal;
                    if is_normal {
                        self.n_normal += 1;
                    } else {
                        self.n_normal -= 1;
                    }
                }
                if is_normal || (t - params.t_sub).abs() > FROZEN_TOLERANCE {
                    first.get_or_insert(idx);
                    last = idx;
                }
            }
            self.window = None;
            if let Some(first) = first {
                self.widen(first, last);
            }
        }
        Ok(())
    }

    /// Seed a photon hotspot of `hotspot_len` centred at `position` (m),
    /// clipped at the wire ends.
    pub fn inject_photon(
        &mut self,
        geom: &WireGeometry,
        params: &ThermalParams,
        position: f64,
    ) -> Result<()> {
        if !(0.0..=geom.length).contains(&position) {
            return domain(format!(
                "photon position {position:e} m outside [0, {:e}]",
                geom.length
            ));
        }
        let dx = geom.cell_len();
        let a = (position - 0.5 * params.hotspot_len).max(0.0) / dx;
        let b = (position + 0.5 * params.hotspot_len).min(geom.length) / dx;
        // tolerate rounding when an edge falls on a cell boundary
        let first = (a + 1e-9).floor() as usize;
        let last = ((b - 1e-9).ceil() as usize).max(first + 1) - 1;
        let last = last.min(self.n_cells() - 1);
        for idx in first..=last {
            self.temperature[idx] = params.hotspot_t;
            if !self.normal[idx] {
                self.normal[idx] = true;
                self.n_normal += 1;
            }
        }
        self.widen(first, last);
        Ok(())
    }
}

/// Advance a profile by `dt`; see [`ThermalProfile::step`].
pub fn thermal_step(
    profile: &ThermalProfile,
    geom: &WireGeometry,
    params: &ThermalParams,
    i_wire: f64,
    dt: f64,
) -> Result<ThermalProfile> {
    let mut next = profile.clone();
    next.step(geom, params, i_wire, dt)?;
    Ok(next)
}

/// Seed a photon hotspot; see [`ThermalProfile::inject_photon`].
pub fn inject_photon(
    profile: &ThermalProfile,
    geom: &WireGeometry,
    params: &ThermalParams,
    position: f64,
) -> Result<ThermalProfile> {
    let mut next = profile.clone();
    next.inject_photon(geom, params, position)?;
    Ok(next)
}

/// Series resistance of all normal cells.
pub fn hotspot_resistance(
    profile: &ThermalProfile,
    geom: &WireGeometry,
    params: &ThermalParams,
) -> f64 {
    params.r_sheet * geom.cell_len() / geom.width * profile.normal_count() as f64
}
