//! Line-oriented scenario files.
//!
//! ```text
//! # comments start with '#'
//! preset = bended          # optional, before any section
//!
//! [secondary_tank]
//! c_p = 12p
//!
//! [link]
//! coupling = 0.06
//! ```
//!
//! Values take SI suffixes (`f p n u m k M G`). Missing keys fall back to the
//! chosen preset; when `c_s1`, `c_s2` or `time_step` are omitted they are
//! derived from the file's own inductances and drive frequency.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::link_model::{designed_capacitance, LinkScenario};
use crate::lsk::{KRange, MismatchSpec, SweepScale, SweepSpec};
use crate::presets::Preset;
use crate::transient::{format_bits, parse_bits, TransientConfig, STEPS_PER_PERIOD};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("line {line}: unknown key '{key}' in section [{section}]")]
    UnknownKey {
        line: usize,
        section: String,
        key: String,
    },

    #[error("{}{key}: {message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Validation {
        key: String,
        line: Option<usize>,
        message: String,
    },

    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

/// Everything a command needs: the circuit plus analysis and transient settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: LinkScenario,
    pub mismatch: MismatchSpec,
    pub sweep: SweepSpec,
    pub transient: TransientConfig,
}

impl ScenarioConfig {
    pub fn from_preset(preset: Preset) -> Self {
        let scenario = preset.scenario();
        Self {
            mismatch: MismatchSpec::none(&scenario),
            sweep: SweepSpec::default(),
            transient: TransientConfig::for_carrier(scenario.primary_tank.drive_frequency),
            scenario,
        }
    }

    /// Renders every field; `parse_scenario` of the result reproduces `self`.
    pub fn to_text(&self) -> String {
        let s = &self.scenario;
        let mut out = String::new();
        let mut section = |name: &str, entries: &[(&str, String)]| {
            let _ = writeln!(out, "[{name}]");
            for (k, v) in entries {
                let _ = writeln!(out, "{k} = {v}");
            }
            out.push('\n');
        };
        let num = |v: f64| format!("{v:e}");
        for (name, coil) in [("primary_coil", &s.primary_coil), ("secondary_coil", &s.secondary_coil)] {
            section(
                name,
                &[
                    ("label", coil.label.clone()),
                    ("inductance", num(coil.inductance)),
                    ("series_resistance", num(coil.series_resistance)),
                ],
            );
        }
        section(
            "primary_tank",
            &[
                ("c_s1", num(s.primary_tank.c_s1)),
                ("source_amplitude", num(s.primary_tank.source_amplitude)),
                ("drive_frequency", num(s.primary_tank.drive_frequency)),
            ],
        );
        section(
            "secondary_tank",
            &[
                ("c_s2", num(s.secondary_tank.c_s2)),
                ("c_p", num(s.secondary_tank.c_p)),
                ("r_load", num(s.secondary_tank.r_load)),
                ("r_sw", num(s.secondary_tank.r_sw)),
            ],
        );
        section("link", &[("coupling", num(s.coupling))]);
        section(
            "mismatch",
            &[
                ("c_p_override", num(self.mismatch.c_p_override)),
                ("c_s1_relative_error", num(self.mismatch.c_s1_relative_error)),
            ],
        );
        section(
            "sweep",
            &[
                ("k_min", num(self.sweep.k_min)),
                ("k_max", num(self.sweep.k_max)),
                ("points", self.sweep.points.to_string()),
                ("scale", self.sweep.scale.name().to_string()),
            ],
        );
        let t = &self.transient;
        section(
            "transient",
            &[
                ("time_step", num(t.time_step)),
                ("duration", num(t.duration)),
                ("bit_period", num(t.bit_period)),
                ("settle_time", num(t.settle_time)),
                ("sw_pattern", format_bits(&t.sw_pattern)),
            ],
        );
        out
    }
}

/// Parses a number with an optional trailing SI multiplier.
pub fn parse_si(text: &str) -> Option<f64> {
    let text = text.trim();
    let (i, last) = text.char_indices().last()?;
    let exponent = match last {
        'f' => -15,
        'p' => -12,
        'n' => -9,
        'u' | 'µ' => -6,
        'm' => -3,
        'k' => 3,
        'M' => 6,
        'G' => 9,
        _ => 0,
    };
    let v: f64 = if exponent == 0 {
        text.parse().ok()?
    } else {
        let body = text[..i].trim();
        if body.is_empty() {
            return None;
        }
        // splice the multiplier into the literal so "5u" parses exactly as 5e-6
        match format!("{body}e{exponent}").parse() {
            Ok(v) if !body.contains(['e', 'E']) => v,
            _ => body.parse::<f64>().ok()? * 10f64.powi(exponent),
        }
    };
    v.is_finite().then_some(v)
}

#[derive(Clone, Copy)]
enum Rule {
    Positive,
    NonNegative,
    Coupling,
    RelativeError,
}

impl Rule {
    fn check(self, v: f64) -> Result<(), String> {
        match self {
            Rule::Positive if v <= 0.0 => Err(format!("must be > 0, got {v}")),
            Rule::NonNegative if v < 0.0 => Err(format!("must be >= 0, got {v}")),
            Rule::Coupling if !(0.0..1.0).contains(&v) => {
                Err(format!("coupling must satisfy 0 <= k < 1, got {v}"))
            }
            Rule::RelativeError if v.abs() >= 0.5 => Err(format!("must satisfy |value| < 0.5, got {v}")),
            _ => Ok(()),
        }
    }
}

fn numeric_rule(section: &str, key: &str) -> Option<Rule> {
    use Rule::*;
    let rule = match (section, key) {
        ("primary_coil" | "secondary_coil", "inductance" | "series_resistance") => Positive,
        ("primary_tank", "c_s1" | "source_amplitude" | "drive_frequency") => Positive,
        ("secondary_tank", "c_s2" | "r_load" | "r_sw") => Positive,
        ("secondary_tank", "c_p") => NonNegative,
        ("link", "coupling") => Coupling,
        ("mismatch", "c_p_override") => NonNegative,
        ("mismatch", "c_s1_relative_error") => RelativeError,
        ("sweep", "k_min" | "k_max") => Coupling,
        ("transient", "time_step" | "duration" | "bit_period") => Positive,
        ("transient", "settle_time") => NonNegative,
        _ => return None,
    };
    Some(rule)
}

fn text_key(section: &str, key: &str) -> bool {
    matches!(
        (section, key),
        ("primary_coil" | "secondary_coil", "label")
            | ("sweep", "points" | "scale")
            | ("transient", "sw_pattern")
            | ("", "preset")
    )
}

struct Entry {
    line: usize,
    raw: String,
    number: Option<f64>,
}

pub fn parse_scenario_file(path: &Path) -> Result<ScenarioConfig, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let mut entries: HashMap<(String, String), Entry> = HashMap::new();
    let mut section = String::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| ScenarioError::Syntax {
                line,
                message: format!("unterminated section header '{content}'"),
            })?;
            let name = name.trim();
            if !SECTIONS.contains(&name) {
                return Err(ScenarioError::Syntax {
                    line,
                    message: format!("unknown section [{name}]"),
                });
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ScenarioError::Syntax {
            line,
            message: format!("expected 'key = value', got '{content}'"),
        })?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || value.is_empty() {
            return Err(ScenarioError::Syntax {
                line,
                message: "empty key or value".into(),
            });
        }
        let number = match numeric_rule(&section, key) {
            Some(rule) => {
                let v = parse_si(value).ok_or_else(|| ScenarioError::Syntax {
                    line,
                    message: format!("'{key}' expects a number, got '{value}'"),
                })?;
                rule.check(v).map_err(|message| ScenarioError::Validation {
                    key: qualified(&section, key),
                    line: Some(line),
                    message,
                })?;
                Some(v)
            }
            None if text_key(&section, key) => None,
            None => {
                return Err(ScenarioError::UnknownKey {
                    line,
                    section: if section.is_empty() { "<top>".into() } else { section.clone() },
                    key: key.into(),
                })
            }
        };
        let slot = (section.clone(), key.to_string());
        if let Some(prev) = entries.get(&slot) {
            return Err(ScenarioError::Syntax {
                line,
                message: format!("duplicate key '{key}' (first set on line {})", prev.line),
            });
        }
        entries.insert(
            slot,
            Entry {
                line,
                raw: value.to_string(),
                number,
            },
        );
    }

    build(&entries)
}

const SECTIONS: [&str; 8] = [
    "primary_coil",
    "secondary_coil",
    "primary_tank",
    "secondary_tank",
    "link",
    "mismatch",
    "sweep",
    "transient",
];

fn qualified(section: &str, key: &str) -> String {
    if section.is_empty() {
        key.to_string()
    } else {
        format!("{section}.{key}")
    }
}

fn build(entries: &HashMap<(String, String), Entry>) -> Result<ScenarioConfig, ScenarioError> {
    let get = |section: &str, key: &str| entries.get(&(section.to_string(), key.to_string()));
    let num = |section: &str, key: &str| get(section, key).and_then(|e| e.number);

    let preset = match get("", "preset") {
        Some(e) => e.raw.parse::<Preset>().map_err(|message| ScenarioError::Validation {
            key: "preset".into(),
            line: Some(e.line),
            message,
        })?,
        None => Preset::Flat,
    };
    let base = preset.scenario();
    let mut s = base.clone();

    for (name, coil) in [("primary_coil", &mut s.primary_coil), ("secondary_coil", &mut s.secondary_coil)] {
        if let Some(e) = get(name, "label") {
            coil.label = e.raw.clone();
        }
        if let Some(v) = num(name, "inductance") {
            coil.inductance = v;
        }
        if let Some(v) = num(name, "series_resistance") {
            coil.series_resistance = v;
        }
    }
    if let Some(v) = num("primary_tank", "source_amplitude") {
        s.primary_tank.source_amplitude = v;
    }
    if let Some(v) = num("primary_tank", "drive_frequency") {
        s.primary_tank.drive_frequency = v;
    }
    let omega = s.omega();
    s.primary_tank.c_s1 =
        num("primary_tank", "c_s1").unwrap_or_else(|| designed_capacitance(s.primary_coil.inductance, omega));
    s.secondary_tank.c_s2 = num("secondary_tank", "c_s2")
        .unwrap_or_else(|| designed_capacitance(s.secondary_coil.inductance, omega));
    if let Some(v) = num("secondary_tank", "c_p") {
        s.secondary_tank.c_p = v;
    }
    if let Some(v) = num("secondary_tank", "r_load") {
        s.secondary_tank.r_load = v;
    }
    if let Some(v) = num("secondary_tank", "r_sw") {
        s.secondary_tank.r_sw = v;
    }
    if let Some(v) = num("link", "coupling") {
        s.coupling = v;
    }

    let mismatch = MismatchSpec {
        c_p_override: num("mismatch", "c_p_override").unwrap_or(s.secondary_tank.c_p),
        c_s1_relative_error: num("mismatch", "c_s1_relative_error").unwrap_or(0.0),
    };

    let mut sweep = SweepSpec::default();
    if let Some(v) = num("sweep", "k_min") {
        sweep.k_min = v;
    }
    if let Some(v) = num("sweep", "k_max") {
        sweep.k_max = v;
    }
    if let Some(e) = get("sweep", "points") {
        sweep.points = e.raw.parse().map_err(|_| ScenarioError::Syntax {
            line: e.line,
            message: format!("'points' expects a whole number, got '{}'", e.raw),
        })?;
    }
    if let Some(e) = get("sweep", "scale") {
        sweep.scale = match e.raw.to_ascii_lowercase().as_str() {
            "linear" => SweepScale::Linear,
            "log" => SweepScale::Log,
            other => {
                return Err(ScenarioError::Validation {
                    key: "sweep.scale".into(),
                    line: Some(e.line),
                    message: format!("expected linear or log, got '{other}'"),
                })
            }
        };
    }
    let sweep_line = ["k_min", "k_max", "points", "scale"]
        .iter()
        .filter_map(|k| get("sweep", k).map(|e| e.line))
        .min();
    sweep.validate().map_err(|e| ScenarioError::Validation {
        key: "sweep".into(),
        line: sweep_line,
        message: e.to_string(),
    })?;
    KRange::new(sweep.k_min, sweep.k_max).map_err(|e| ScenarioError::Validation {
        key: "sweep".into(),
        line: sweep_line,
        message: e.to_string(),
    })?;

    let f = s.primary_tank.drive_frequency;
    let mut transient = TransientConfig::for_carrier(f);
    transient.time_step = num("transient", "time_step").unwrap_or(1.0 / (f * STEPS_PER_PERIOD));
    if let Some(v) = num("transient", "duration") {
        transient.duration = v;
    }
    if let Some(v) = num("transient", "bit_period") {
        transient.bit_period = v;
    }
    if let Some(v) = num("transient", "settle_time") {
        transient.settle_time = v;
    }
    if let Some(e) = get("transient", "sw_pattern") {
        transient.sw_pattern = parse_bits(&e.raw).map_err(|err| ScenarioError::Validation {
            key: "transient.sw_pattern".into(),
            line: Some(e.line),
            message: err.to_string(),
        })?;
    }
    let transient_line = ["time_step", "duration", "bit_period", "settle_time", "sw_pattern"]
        .iter()
        .filter_map(|k| get("transient", k).map(|e| e.line))
        .min();
    transient.validate(f).map_err(|e| ScenarioError::Validation {
        key: "transient".into(),
        line: transient_line,
        message: e.to_string(),
    })?;

    s.validate().map_err(|e| ScenarioError::Validation {
        key: "scenario".into(),
        line: None,
        message: e.to_string(),
    })?;

    Ok(ScenarioConfig {
        scenario: s,
        mismatch,
        sweep,
        transient,
    })
}
