//! Flat `key = value` configuration with unit-suffixed numbers.
//!
//! Every accepted key, its type, default and help line live in [`KEYS`];
//! the parser and the `--help` listing are both generated from it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown keys: {}", .0.join(", "))]
    Unknown(Vec<String>),
    #[error("{key}: {msg}")]
    Value { key: String, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Number with an optional SI prefix and the given unit symbol.
    Quantity(&'static str),
    /// Comma-separated quantities.
    QuantityList(&'static str),
    Count,
    Flag,
    Choice(&'static [&'static str]),
    /// Comma-separated paths, relative to the config file.
    Paths,
}

pub struct KeySpec {
    pub name: &'static str,
    pub kind: Kind,
    pub default: &'static str,
    pub help: &'static str,
}

const fn key(name: &'static str, kind: Kind, default: &'static str, help: &'static str) -> KeySpec {
    KeySpec { name, kind, default, help }
}

use Kind::*;

pub const KEYS: &[KeySpec] = &[
    // bias network
    key("L_k", Quantity("H"), "490nH", "kinetic inductance"),
    key("C_p", Quantity("F"), "0.57pF", "shunt capacitance at the device node"),
    key("R_p", Quantity("ohm"), "725ohm", "source resistance seen by the RLC"),
    key("critical", Flag, "false", "replace R_p by the critically damping value"),
    key("R_B", Quantity("ohm"), "650ohm", "bias resistor"),
    key("R_sense", Quantity("ohm"), "50ohm", "current-sense resistor"),
    key("R_term", Quantity("ohm"), "50ohm", "coax termination"),
    key("pad_cap", Quantity("F"), "0.14pF", "board pad capacitance"),
    // thermal model
    key("T_sub", Quantity("K"), "4.2K", "substrate temperature"),
    key("T_c", Quantity("K"), "10.5K", "critical temperature"),
    key("I_c0", Quantity("A"), "20uA", "critical current at T_sub"),
    key("R_sheet", Quantity("ohm"), "400ohm", "normal sheet resistance per square"),
    key("kappa0", Quantity("W/mK"), "0.1W/mK", "thermal conductivity at T_c"),
    key("c0", Quantity("J/m3K"), "9800J/m3K", "heat capacity at T_c"),
    key("alpha", Quantity("W/m2K3"), "200W/m2K3", "substrate boundary conductance scale"),
    key("n_bnd", Quantity(""), "3", "substrate coupling exponent"),
    key("hotspot_len", Quantity("m"), "30nm", "length of a photon seed"),
    key("hotspot_T", Quantity("K"), "21K", "temperature of a photon seed"),
    // wire
    key("wire_length", Quantity("m"), "500um", "nanowire length"),
    key("wire_width", Quantity("m"), "120nm", "nanowire width"),
    key("thickness", Quantity("m"), "4nm", "film thickness"),
    key("n_cells", Count, "50000", "thermal grid cells along the wire"),
    // drive
    key("frequency", Quantity("Hz"), "625MHz", "gate frequency"),
    key("i_min", Quantity("A"), "-2uA", "gate current minimum"),
    key("i_max_fraction", Quantity(""), "0.9", "gate current maximum as a fraction of I_c0"),
    key("seed", Count, "1", "random seed"),
    // simulate
    key("mode", Choice(&["gm", "fm"]), "gm", "gated or free-running simulation"),
    key("n_gates", Count, "10", "gates to simulate (gm)"),
    key("R_L", Quantity("ohm"), "100ohm", "free-running load (fm)"),
    key("i_bias_fraction", Quantity(""), "0.9", "free-running bias as a fraction of I_c0 (fm)"),
    key("duration", Quantity("s"), "50ns", "simulated time (fm)"),
    key("photon_times", QuantityList("s"), "", "photon arrival times, placed at the wire centre"),
    key("photon_rate", Quantity("Hz"), "0Hz", "Poisson rate of photon-like seeds at random positions"),
    key("sample_interval", Quantity("s"), "0s", "spacing of recorded samples; 0 picks one automatically"),
    key("fm_bin", Quantity("s"), "1ns", "click bin width (fm)"),
    // fig4c
    key("f_start", Quantity("Hz"), "50MHz", "first frequency of the gate-peak sweep"),
    key("f_stop", Quantity("Hz"), "700MHz", "last frequency of the gate-peak sweep"),
    key("f_step", Quantity("Hz"), "25MHz", "frequency step of the gate-peak sweep"),
    key("peak_gates", Count, "3", "gates reported after the detection gate"),
    // mcr-sweep
    key("mcr_L_k", QuantityList("H"), "6nH, 60nH, 600nH, 6uH", "kinetic inductances of the maximum-frequency sweep"),
    key("mcr_C_p", Quantity("F"), "0.01pF", "shunt capacitance of the maximum-frequency sweep"),
    key("mcr_resolution", Quantity(""), "0.01", "relative resolution of the frequency search"),
    // tau-e-min
    key("rc_R_L", QuantityList("ohm"), "10ohm, 30ohm, 100ohm, 150ohm, 200ohm, 300ohm, 500ohm, 1kohm, 3kohm", "loads of the return-current table"),
    key("rc_ramp_fraction", Quantity(""), "0.002", "bias decrease per settling time, fraction of I_c0"),
    key("rc_knee", Flag, "true", "also bisect for the knee R* and tau_e-min"),
    // stats
    key("source", Choice(&["cw", "pulsed"]), "cw", "illumination"),
    key("mu", Quantity(""), "0.1", "mean photons per lit gate"),
    key("pulse_divisor", Count, "20", "gates per optical pulse (pulsed)"),
    key("qe_max", Quantity(""), "0.2", "detection probability at full current"),
    key("qe_i_half", Quantity("A"), "0A", "current at half QE; 0 makes QE current-independent"),
    key("qe_width", Quantity("A"), "1uA", "width of the QE sigmoid"),
    key("dark_prob", Quantity(""), "1e-4", "dark-click probability per gate"),
    key("afterpulse_prob", Quantity(""), "0", "click probability in the gate after a click"),
    key("stats_gates", Count, "1000000", "gates per generated train"),
    key("max_lag", Count, "60", "largest autocorrelation lag"),
    key("hist_bins", Count, "40", "gate-phase histogram bins"),
    key("write_clicks", Flag, "false", "also write the illuminated click train"),
    // calibrate
    key("chain", Paths, "", "Touchstone files cascaded from the source toward the device"),
    key("cal_f_max", Quantity("Hz"), "2GHz", "top of the transconductance table"),
    key("cal_points", Count, "201", "points of the transconductance table"),
    // validate-model
    key("reference", Paths, "", "measured or synthetic Touchstone file; its S11 is compared"),
    key("validate_R_B", Quantity("ohm"), "50ohm", "bias resistor during the reflection measurement"),
    key("netlist_L", QuantityList("H"), "", "series inductances ahead of the pad, source side first"),
    key("netlist_C", QuantityList("F"), "", "shunt capacitances after each series inductance"),
    key("cutoff", Quantity("Hz"), "2GHz", "highest compared frequency"),
];

pub fn spec(name: &str) -> Option<&'static KeySpec> {
    KEYS.iter().find(|k| k.name == name)
}

/// Key listing for `--help`.
pub fn help_text() -> String {
    let width = KEYS.iter().map(|k| k.name.len()).max().unwrap_or(0);
    let mut s = String::from("Config keys (key = value; '#' starts a comment):\n");
    for k in KEYS {
        let kind = match k.kind {
            Quantity("") => "number".to_string(),
            Quantity(u) => format!("number [{u}]"),
            QuantityList(u) => format!("list [{u}]"),
            Count => "integer".into(),
            Flag => "true|false".into(),
            Choice(c) => c.join("|"),
            Paths => "paths".into(),
        };
        let default = if k.default.is_empty() { "(none)" } else { k.default };
        let _ = writeln!(s, "  {:width$}  {}; {kind}, default {default}", k.name, k.help);
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    List(Vec<f64>),
    Count(u64),
    Flag(bool),
    Text(String),
    Paths(Vec<PathBuf>),
}

fn prefix_exponent(p: &str) -> Option<i32> {
    Some(match p {
        "" => 0,
        "f" => -15,
        "p" => -12,
        "n" => -9,
        "u" => -6,
        "m" => -3,
        "k" => 3,
        "M" => 6,
        "G" => 9,
        _ => return None,
    })
}

/// Parses `490nH`, `0.57 pF`, `-2uA`, `1e-4` and similar.
pub fn parse_quantity(text: &str, unit: &str) -> Result<f64, String> {
    let t = text.trim();
    let split = t
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit() || c == '.' || c == '+' || c == '-'
                || ((c == 'e' || c == 'E') && t[i + 1..].starts_with(|d: char| d.is_ascii_digit() || d == '-' || d == '+')))
        })
        .map_or(t.len(), |(i, _)| i);
    let (num, suffix) = t.split_at(split);
    let suffix = suffix.trim().replace('Ω', "ohm").replace(['µ', 'μ'], "u");
    let suffix = suffix.as_str();
    let shift = if suffix.is_empty() || suffix == unit {
        0
    } else if let Some(p) = suffix.strip_suffix(unit).filter(|_| !unit.is_empty()) {
        prefix_exponent(p).ok_or_else(|| format!("unknown prefix '{p}' in '{t}'"))?
    } else {
        return Err(if unit.is_empty() {
            format!("'{t}' takes no unit")
        } else {
            format!("'{t}' must be in {unit}")
        });
    };
    // shift the decimal exponent so `490n` parses as exactly `490e-9`
    let (mantissa, exp) = match num.find(['e', 'E']) {
        Some(i) => (&num[..i], num[i + 1..].parse::<i32>().map_err(|_| format!("'{t}' is not a number"))?),
        None => (num, 0),
    };
    let v: f64 = format!("{mantissa}e{}", exp + shift)
        .parse()
        .map_err(|_| format!("'{t}' is not a number"))?;
    if !v.is_finite() {
        return Err(format!("'{t}' is not finite"));
    }
    Ok(v)
}

fn parse_value(spec: &KeySpec, raw: &str, base: &Path) -> Result<Value, String> {
    let raw = raw.trim();
    let items = || raw.split(',').map(str::trim).filter(|s| !s.is_empty());
    Ok(match spec.kind {
        Quantity(u) => Value::Num(parse_quantity(raw, u)?),
        QuantityList(u) => Value::List(items().map(|s| parse_quantity(s, u)).collect::<Result<_, _>>()?),
        Count => Value::Count(raw.parse().map_err(|_| format!("'{raw}' is not a non-negative integer"))?),
        Flag => Value::Flag(match raw {
            "true" | "yes" | "1" => true,
            "false" | "no" | "0" => false,
            _ => return Err(format!("'{raw}' is not true or false")),
        }),
        Choice(c) => {
            if !c.contains(&raw) {
                return Err(format!("'{raw}' is not one of {}", c.join(", ")));
            }
            Value::Text(raw.to_string())
        }
        Paths => Value::Paths(items().map(|s| base.join(s)).collect()),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    values: BTreeMap<&'static str, Value>,
    /// Keys set explicitly in the file.
    pub explicit: Vec<&'static str>,
}

impl Config {
    pub fn defaults() -> Self {
        let values = KEYS
            .iter()
            .map(|k| {
                let v = parse_value(k, k.default, Path::new("")).expect("defaults parse");
                (k.name, v)
            })
            .collect();
        Self { values, explicit: Vec::new() }
    }

    /// Parses config text; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg = Self::defaults();
        let mut unknown = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (k, v) = body.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                msg: format!("expected 'key = value', found '{body}'"),
            })?;
            let k = k.trim();
            let Some(spec) = spec(k) else {
                unknown.push(k.to_string());
                continue;
            };
            if cfg.explicit.contains(&spec.name) {
                return Err(ConfigError::Syntax {
                    line,
                    msg: format!("duplicate key '{k}'"),
                });
            }
            let value = parse_value(spec, v, base).map_err(|msg| ConfigError::Syntax { line, msg: format!("{k}: {msg}") })?;
            cfg.values.insert(spec.name, value);
            cfg.explicit.push(spec.name);
        }
        if !unknown.is_empty() {
            return Err(ConfigError::Unknown(unknown));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn get(&self, name: &str) -> &Value {
        self.values.get(name).unwrap_or_else(|| panic!("key {name} is not in the key table"))
    }

    pub fn num(&self, name: &str) -> f64 {
        match self.get(name) {
            Value::Num(v) => *v,
            other => panic!("{name} is not a quantity: {other:?}"),
        }
    }

    pub fn list(&self, name: &str) -> &[f64] {
        match self.get(name) {
            Value::List(v) => v,
            other => panic!("{name} is not a list: {other:?}"),
        }
    }

    pub fn count(&self, name: &str) -> u64 {
        match self.get(name) {
            Value::Count(v) => *v,
            other => panic!("{name} is not a count: {other:?}"),
        }
    }

    pub fn flag(&self, name: &str) -> bool {
        match self.get(name) {
            Value::Flag(v) => *v,
            other => panic!("{name} is not a flag: {other:?}"),
        }
    }

    pub fn text(&self, name: &str) -> &str {
        match self.get(name) {
            Value::Text(v) => v,
            other => panic!("{name} is not text: {other:?}"),
        }
    }

    pub fn paths(&self, name: &str) -> &[PathBuf] {
        match self.get(name) {
            Value::Paths(v) => v,
            other => panic!("{name} is not a path list: {other:?}"),
        }
    }

    pub fn set_count(&mut self, name: &'static str, v: u64) {
        self.values.insert(name, Value::Count(v));
    }

    /// Error helper for values that parse but are out of range.
    pub fn invalid(&self, key: &str, msg: impl Into<String>) -> ConfigError {
        ConfigError::Value {
            key: key.to_string(),
            msg: msg.into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantities() {
        assert_eq!(parse_quantity("490nH", "H").unwrap(), 490e-9);
        assert_eq!(parse_quantity("0.57 pF", "F").unwrap(), 0.57e-12);
        assert_eq!(parse_quantity("-2uA", "A").unwrap(), -2e-6);
        assert_eq!(parse_quantity("1kohm", "ohm").unwrap(), 1e3);
        assert_eq!(parse_quantity("650Ω", "ohm").unwrap(), 650.0);
        assert_eq!(parse_quantity("20μA", "A").unwrap(), 20e-6);
        assert_eq!(parse_quantity("20µA", "A").unwrap(), 20e-6);
        assert_eq!(parse_quantity("625MHz", "Hz").unwrap(), 625e6);
        assert_eq!(parse_quantity("500um", "m").unwrap(), 500e-6);
        assert_eq!(parse_quantity("5m", "m").unwrap(), 5.0);
        assert_eq!(parse_quantity("1e-4", "").unwrap(), 1e-4);
        assert_eq!(parse_quantity("2.5e3Hz", "Hz").unwrap(), 2.5e3);
        assert!(parse_quantity("5nF", "H").is_err());
        assert!(parse_quantity("5xH", "H").is_err());
        assert!(parse_quantity("0.9V", "").is_err());
        assert!(parse_quantity("abc", "H").is_err());
    }

    #[test]
    fn defaults_cover_every_key() {
        let c = Config::defaults();
        for k in KEYS {
            assert!(c.values.contains_key(k.name));
        }
        assert_eq!(c.num("L_k"), 490e-9);
        assert_eq!(c.list("mcr_L_k"), &[6e-9, 60e-9, 600e-9, 6e-6]);
        assert!(c.list("photon_times").is_empty());
    }

    #[test]
    fn unknown_keys_are_listed() {
        let err = Config::parse("L_k = 10nH\nfoo = 1\nbar = 2\n", Path::new(".")).unwrap_err();
        match err {
            ConfigError::Unknown(keys) => assert_eq!(keys, vec!["foo", "bar"]),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn syntax_errors_have_lines() {
        let err = Config::parse("# c\nL_k 10nH\n", Path::new(".")).unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 2, .. }));
        let err = Config::parse("L_k = 1nH\nL_k = 2nH\n", Path::new(".")).unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 2, .. }));
        let err = Config::parse("mode = xx\n", Path::new(".")).unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 1, .. }));
    }

    #[test]
    fn help_lists_every_key() {
        let h = help_text();
        for k in KEYS {
            assert!(h.contains(k.name));
        }
    }

    #[test]
    fn paths_resolve_against_the_config() {
        let c = Config::parse("chain = a.s2p, sub/b.s2p\n", Path::new("/cfg")).unwrap();
        assert_eq!(c.paths("chain"), &[PathBuf::from("/cfg/a.s2p"), PathBuf::from("/cfg/sub/b.s2p")]);
    }
}
