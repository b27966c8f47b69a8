//! Experiment configuration files.
//!
//! A config is line-oriented text. `#` starts a comment, blank lines are
//! ignored, and every other line is a `[section]` header or a `key = value`
//! pair. Lists are comma-separated.
//!
//! ```text
//! [experiment]
//! n = 100, 1000, 10000          # required, sample sizes
//! reps = 500                    # required, replications per cell
//! seed = 2024                   # required, master seed (u64)
//! kernel = gaussian             # gaussian | sinc             (default gaussian)
//! loss = density_l2             # density_l2 | cf_l2          (default density_l2)
//! estimators = kotlarski        # kotlarski, li_vuong, residual, symmetric (default kotlarski)
//! bandwidth = oracle, adaptive  # oracle, adaptive, fixed(h)  (default oracle)
//! u_max = 40                    # frequency grid half-width   (default 40)
//! step = 0.01                   # frequency grid step         (default 0.01)
//! output = results              # output directory            (default results)
//!
//! [scenario i]                  # one section per scenario; the label follows `scenario`
//! x = gamma(4,2)
//! eps = bgamma(2,2,3,3)
//! ```
//!
//! Every arm is an (estimator, bandwidth) pair from the two lists; `adaptive`
//! applies to `kotlarski` only. Model literals follow [`crate::models`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use crate::cf::FreqGrid;
use crate::error::Result;
use crate::estimators::{Estimator, KernelKind};
use crate::models::{ModelSpec, MEAN_ZERO_TOL};
use crate::risk::{Arm, BandwidthMode, LossKind, Scenario, StudySettings};

/// A problem with one key of a config file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    /// Where the problem is, e.g. `experiment.step` or `scenario i.eps`.
    pub key: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenarios: Vec<Scenario>,
    pub sample_sizes: Vec<usize>,
    pub reps: usize,
    pub kernel: KernelKind,
    pub loss: LossKind,
    pub estimators: Vec<Estimator>,
    pub bandwidth_modes: Vec<BandwidthMode>,
    pub master_seed: u64,
    pub grid: FreqGrid,
    pub output: PathBuf,
}

impl ExperimentConfig {
    pub fn settings(&self) -> StudySettings {
        StudySettings { grid: self.grid, kernel: self.kernel, loss: self.loss, master_seed: self.master_seed }
    }

    /// Estimator-major list of arms.
    pub fn arms(&self) -> Vec<Arm> {
        self.estimators
            .iter()
            .flat_map(|&e| self.bandwidth_modes.iter().map(move |&m| Arm::new(e, m)))
            .collect()
    }

    /// Parses and validates; all problems are reported together.
    pub fn parse(text: &str) -> std::result::Result<Self, Vec<Diagnostic>> {
        let mut diags = Vec::new();
        let sections = split_sections(text, &mut diags);
        let config = build(&sections, &mut diags);
        match config {
            Some(c) if diags.is_empty() => Ok(c),
            _ => Err(diags),
        }
    }

    pub fn from_file(path: &Path) -> Result<std::result::Result<Self, Vec<Diagnostic>>> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| crate::error::Error::Io(format!("cannot read {}: {e}", path.display())))?;
        Ok(Self::parse(&text))
    }
}

/// Diagnostics for the config at `path`; empty when it is valid.
pub fn validate_file(path: &Path) -> Result<Vec<Diagnostic>> {
    Ok(ExperimentConfig::from_file(path)?.err().unwrap_or_default())
}

struct Section {
    name: String,
    line: usize,
    entries: BTreeMap<String, (usize, String)>,
}

fn split_sections(text: &str, diags: &mut Vec<Diagnostic>) -> Vec<Section> {
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.split_whitespace().collect::<Vec<_>>().join(" ");
            if sections.iter().any(|s| s.name == name) {
                diags.push(diag(&name, format!("duplicate section (line {line_no})")));
            }
            sections.push(Section { name, line: line_no, entries: BTreeMap::new() });
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            diags.push(diag(&format!("line {line_no}"), "expected `key = value` or `[section]`"));
            continue;
        };
        let Some(section) = sections.last_mut() else {
            diags.push(diag(&format!("line {line_no}"), "key outside of any section"));
            continue;
        };
        let key = key.trim().to_string();
        if section.entries.insert(key.clone(), (line_no, value.trim().to_string())).is_some() {
            diags.push(diag(&format!("{}.{key}", section.name), format!("duplicate key (line {line_no})")));
        }
    }
    sections
}

fn diag(key: &str, message: impl Into<String>) -> Diagnostic {
    Diagnostic { key: key.to_string(), message: message.into() }
}

fn list(value: &str) -> Vec<String> {
    // Commas inside parentheses belong to a single item.
    let mut items = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for ch in value.chars() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                items.push(cur.trim().to_string());
                cur.clear();
                continue;
            }
            _ => {}
        }
        cur.push(ch);
    }
    items.push(cur.trim().to_string());
    items.retain(|s| !s.is_empty());
    items
}

const EXPERIMENT_KEYS: [&str; 10] = ["n", "reps", "seed", "kernel", "loss", "estimators", "bandwidth", "u_max", "step", "output"];

fn build(sections: &[Section], diags: &mut Vec<Diagnostic>) -> Option<ExperimentConfig> {
    let Some(exp) = sections.iter().find(|s| s.name == "experiment") else {
        diags.push(diag("experiment", "missing [experiment] section"));
        return None;
    };
    for s in sections {
        if s.name != "experiment" && !s.name.starts_with("scenario ") {
            diags.push(diag(&s.name, format!("unknown section (line {})", s.line)));
        }
    }
    for key in exp.entries.keys() {
        if !EXPERIMENT_KEYS.contains(&key.as_str()) {
            diags.push(diag(&format!("experiment.{key}"), "unknown key"));
        }
    }
    let get = |key: &str| exp.entries.get(key).map(|(_, v)| v.as_str());
    let at = |key: &str| format!("experiment.{key}");

    let sample_sizes: Vec<usize> = match get("n") {
        None => {
            diags.push(diag(&at("n"), "required"));
            Vec::new()
        }
        Some(v) => {
            let mut out = Vec::new();
            for item in list(v) {
                match item.parse::<usize>() {
                    Ok(n) if n >= 1 => out.push(n),
                    _ => diags.push(diag(&at("n"), format!("`{item}` is not a positive integer"))),
                }
            }
            if out.is_empty() {
                diags.push(diag(&at("n"), "needs at least one sample size"));
            }
            out
        }
    };
    let reps = match get("reps").map(str::parse::<usize>) {
        None => {
            diags.push(diag(&at("reps"), "required"));
            0
        }
        Some(Ok(r)) if r >= 1 => r,
        Some(_) => {
            diags.push(diag(&at("reps"), "must be a positive integer"));
            0
        }
    };
    let master_seed = match get("seed").map(str::parse::<u64>) {
        None => {
            diags.push(diag(&at("seed"), "required"));
            0
        }
        Some(Ok(s)) => s,
        Some(Err(_)) => {
            diags.push(diag(&at("seed"), "must be an unsigned 64-bit integer"));
            0
        }
    };
    let kernel = parse_or(get("kernel"), KernelKind::Gaussian, &at("kernel"), diags);
    let loss = parse_or(get("loss"), LossKind::DensityL2, &at("loss"), diags);
    let estimators = parse_list(get("estimators"), Estimator::Kotlarski, &at("estimators"), diags);
    let bandwidth_modes = parse_list(get("bandwidth"), BandwidthMode::Oracle, &at("bandwidth"), diags);
    let u_max = parse_or(get("u_max"), 40.0f64, &at("u_max"), diags);
    let step = parse_or(get("step"), 0.01f64, &at("step"), diags);
    let grid = match FreqGrid::new(u_max, step) {
        Ok(g) => Some(g),
        Err(e) => {
            diags.push(diag(&at("step"), e.to_string()));
            None
        }
    };
    let output = PathBuf::from(get("output").unwrap_or("results"));

    let adaptive = bandwidth_modes.contains(&BandwidthMode::Adaptive);
    if adaptive {
        for &n in &sample_sizes {
            if n < 15 {
                diags.push(diag(&at("n"), format!("n = {n} is below 15, the minimum for adaptive bandwidth")));
            }
        }
        for e in &estimators {
            if *e != Estimator::Kotlarski {
                diags.push(diag(
                    &at("bandwidth"),
                    format!("adaptive bandwidth is only available for kotlarski, not {}", e.name()),
                ));
            }
        }
    }
    let mut seen = std::collections::HashSet::new();
    for mode in &bandwidth_modes {
        if !seen.insert(mode.to_string()) {
            diags.push(diag(&at("bandwidth"), format!("`{mode}` listed twice")));
        }
    }
    let mut seen = std::collections::HashSet::new();
    for e in &estimators {
        if !seen.insert(*e) {
            diags.push(diag(&at("estimators"), format!("`{}` listed twice", e.name())));
        }
    }

    let mut scenarios = Vec::new();
    for s in sections.iter().filter(|s| s.name.starts_with("scenario ")) {
        if let Some(sc) = build_scenario(s, &estimators, diags) {
            scenarios.push(sc);
        }
    }
    if !sections.iter().any(|s| s.name.starts_with("scenario ")) {
        diags.push(diag("scenario", "at least one [scenario <label>] section is required"));
    }

    Some(ExperimentConfig {
        scenarios,
        sample_sizes,
        reps,
        kernel,
        loss,
        estimators,
        bandwidth_modes,
        master_seed,
        grid: grid?,
        output,
    })
}

fn build_scenario(s: &Section, estimators: &[Estimator], diags: &mut Vec<Diagnostic>) -> Option<Scenario> {
    let label = s.name["scenario ".len()..].trim().to_string();
    let valid_label = !label.is_empty()
        && label.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
    if !valid_label {
        diags.push(diag(&s.name, "label must be non-empty and use only letters, digits, `_`, `-` or `.`"));
    }
    for key in s.entries.keys() {
        if key != "x" && key != "eps" {
            diags.push(diag(&format!("{}.{key}", s.name), "unknown key"));
        }
    }
    let model = |key: &str, diags: &mut Vec<Diagnostic>| -> Option<ModelSpec> {
        let at = format!("{}.{key}", s.name);
        match s.entries.get(key) {
            None => {
                diags.push(diag(&at, "required"));
                None
            }
            Some((_, v)) => match v.parse::<ModelSpec>() {
                Ok(m) => Some(m),
                Err(e) => {
                    diags.push(diag(&at, e.to_string()));
                    None
                }
            },
        }
    };
    let x = model("x", diags);
    let eps = model("eps", diags);
    if let Some(e) = &eps {
        let mean = e.mean();
        if mean.abs() > MEAN_ZERO_TOL {
            diags.push(diag(&format!("{}.eps", s.name), format!("error model mean = {mean}, must be 0")));
        }
    }
    for (key, m, needed) in [
        ("x", &x, estimators.iter().any(|e| !e.targets_error())),
        ("eps", &eps, estimators.iter().any(|e| e.targets_error())),
    ] {
        if let Some(m) = m {
            if needed && !m.is_square_integrable() {
                diags.push(diag(&format!("{}.{key}", s.name), format!("{m} has no square-integrable density")));
            }
        }
    }
    if !valid_label {
        return None;
    }
    Some(Scenario::new(label, x?, eps?))
}

fn parse_or<T: std::str::FromStr>(value: Option<&str>, default: T, key: &str, diags: &mut Vec<Diagnostic>) -> T
where
    T::Err: fmt::Display,
{
    match value {
        None => default,
        Some(v) => v.parse().unwrap_or_else(|e| {
            diags.push(diag(key, format!("`{v}`: {e}")));
            default
        }),
    }
}

fn parse_list<T: std::str::FromStr>(value: Option<&str>, default: T, key: &str, diags: &mut Vec<Diagnostic>) -> Vec<T>
where
    T::Err: fmt::Display,
{
    let Some(v) = value else {
        return vec![default];
    };
    let mut out = Vec::new();
    for item in list(v) {
        match item.parse() {
            Ok(t) => out.push(t),
            Err(e) => diags.push(diag(key, T::Err::to_string(&e))),
        }
    }
    if out.is_empty() {
        diags.push(diag(key, "needs at least one entry"));
        out.push(default);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const VALID: &str = "
# two arms
[experiment]
n = 100, 1000
reps = 3
seed = 11
bandwidth = oracle, adaptive

[scenario i]
x = gamma(4,2)
eps = bgamma(2,2,3,3)
";

    #[test]
    fn parses_a_valid_config() {
        let c = ExperimentConfig::parse(VALID).unwrap();
        assert_eq!(c.sample_sizes, vec![100, 1000]);
        assert_eq!(c.reps, 3);
        assert_eq!(c.kernel, KernelKind::Gaussian);
        assert_eq!(c.loss, LossKind::DensityL2);
        assert_eq!(c.grid, FreqGrid::new(40.0, 0.01).unwrap());
        assert_eq!(c.scenarios[0].label, "i");
        assert_eq!(
            c.arms(),
            vec![
                Arm::new(Estimator::Kotlarski, BandwidthMode::Oracle),
                Arm::new(Estimator::Kotlarski, BandwidthMode::Adaptive)
            ]
        );
    }

    #[test]
    fn uncentred_error_is_named() {
        let text = VALID.replace("bgamma(2,2,3,3)", "gamma(4,2)");
        let diags = ExperimentConfig::parse(&text).unwrap_err();
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].key, "scenario i.eps");
        assert!(diags[0].message.contains("error model mean = 2, must be 0"), "{}", diags[0]);
    }

    #[test]
    fn grid_divisibility_is_checked() {
        let text = VALID.replace("seed = 11", "seed = 11\nu_max = 1\nstep = 0.3");
        let diags = ExperimentConfig::parse(&text).unwrap_err();
        assert_eq!(diags[0].key, "experiment.step");
    }

    #[test]
    fn small_n_with_adaptive_and_other_errors() {
        let text = VALID.replace("n = 100, 1000", "n = 10").replace("reps = 3", "reps = 0").replace("x = gamma(4,2)", "x = gamma(4)");
        let diags = ExperimentConfig::parse(&text).unwrap_err();
        let keys: Vec<&str> = diags.iter().map(|d| d.key.as_str()).collect();
        assert!(keys.contains(&"experiment.n"), "{keys:?}");
        assert!(keys.contains(&"experiment.reps"));
        assert!(keys.contains(&"scenario i.x"));
    }

    #[test]
    fn unknown_keys_and_sections() {
        let text = format!("{VALID}\ncolour = red\n[plot]\nx = 1\n");
        let diags = ExperimentConfig::parse(&text).unwrap_err();
        assert!(diags.iter().any(|d| d.key == "scenario i.colour"));
        assert!(diags.iter().any(|d| d.key == "plot"));
    }

    #[test]
    fn adaptive_needs_kotlarski() {
        let text = VALID.replace("seed = 11", "seed = 11\nestimators = kotlarski, symmetric");
        let diags = ExperimentConfig::parse(&text).unwrap_err();
        assert!(diags[0].message.contains("only available for kotlarski"));
    }

    #[test]
    fn list_splitting_respects_parentheses() {
        assert_eq!(list("oracle, fixed(0.5)"), vec!["oracle", "fixed(0.5)"]);
        assert_eq!(list("mixnormal(0.5:-2:1, 0.5:2:2)"), vec!["mixnormal(0.5:-2:1, 0.5:2:2)"]);
    }
}
