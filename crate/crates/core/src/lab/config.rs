//! Experiment files: flat `key = value` lines grouped under `[section]` headers.
//!
//! ```text
//! [experiment]
//! kind = crsim
//! name = decay
//! seed = 7
//! kappa_max = 1e8
//! output_dir = out
//!
//! [times]
//! dyadic = 6
//!
//! [input]
//! matrix = [-1]
//! role = generator
//! ```
//!
//! `[input]` may repeat; every other section appears at most once. Matrices are
//! written inline as `[a b; c d]` (entries `re:im` or real) or as `@path` to a
//! file in the matrix text format, resolved against the config's directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::gallery::{ModelName, ModelSpec, ParamValue};
use crate::numkit::{
    format_matrix, format_sig17, parse_matrix, read_matrix, Operator, TolerancePolicy,
};

use super::LabError;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{}{field}: {message}", line.map_or(String::new(), |l| format!("line {l}: ")))]
pub struct ConfigError {
    pub line: Option<usize>,
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, field: &str, message: impl Into<String>) -> Self {
        ConfigError {
            line: Some(line),
            field: field.into(),
            message: message.into(),
        }
    }

    fn missing(field: &str) -> Self {
        ConfigError {
            line: None,
            field: field.into(),
            message: "missing".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Analyze,
    Split,
    Interpolate,
    Gallery,
    Crsim,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::Analyze,
        ExperimentKind::Split,
        ExperimentKind::Interpolate,
        ExperimentKind::Gallery,
        ExperimentKind::Crsim,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Analyze => "analyze",
            ExperimentKind::Split => "split",
            ExperimentKind::Interpolate => "interpolate",
            ExperimentKind::Gallery => "gallery",
            ExperimentKind::Crsim => "crsim",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown experiment kind {s:?}"))
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How a matrix input is read: as the operator itself or as a semigroup generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Operator,
    Generator,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputSource {
    Matrix(Operator),
    Model(ModelSpec),
    /// Seeded random matrix of the given dimension, scaled to spectral radius
    /// `level` (operators) or spectral abscissa `level` (generators).
    Random {
        dim: usize,
        level: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputSpec {
    pub label: String,
    pub role: Role,
    pub source: InputSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub name: String,
    pub inputs: Vec<InputSpec>,
    /// Expanded, strictly increasing, nonnegative.
    pub times: Vec<f64>,
    pub kappa_max: f64,
    pub tol: TolerancePolicy,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Circle subdivision for `interpolate`.
    pub arcs: usize,
    /// Round off-grid interpolation times instead of rejecting them.
    pub snap: bool,
    /// Replace existing reports.
    pub overwrite: bool,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, name: &str, seed: u64) -> Self {
        ExperimentConfig {
            kind,
            name: name.into(),
            inputs: Vec::new(),
            times: Vec::new(),
            kappa_max: TolerancePolicy::default().kappa_max,
            tol: TolerancePolicy::default(),
            seed,
            output_dir: PathBuf::from("."),
            arcs: 16,
            snap: false,
            overwrite: false,
        }
    }

    pub fn with_input(mut self, label: &str, role: Role, source: InputSource) -> Self {
        self.inputs.push(InputSpec {
            label: label.into(),
            role,
            source,
        });
        self
    }

    pub fn with_times(mut self, times: &[f64]) -> Self {
        self.times = times.to_vec();
        self
    }

    /// Time grid with the default `[1]` when none was given.
    pub fn grid(&self) -> Vec<f64> {
        if self.times.is_empty() {
            vec![1.0]
        } else {
            self.times.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.inputs.is_empty() {
            return Err(ConfigError::missing("input"));
        }
        check_times(&self.times).map_err(|m| ConfigError {
            line: None,
            field: "times".into(),
            message: m,
        })?;
        if self.kappa_max.is_nan() || self.kappa_max < 1.0 {
            return Err(ConfigError {
                line: None,
                field: "kappa_max".into(),
                message: "must be at least 1".into(),
            });
        }
        self.tol.validate().map_err(|e| ConfigError {
            line: None,
            field: "tolerances".into(),
            message: e.to_string(),
        })?;
        if self.arcs == 0 {
            return Err(ConfigError {
                line: None,
                field: "arcs".into(),
                message: "must be positive".into(),
            });
        }
        Ok(())
    }

    /// Normalized text of every field that affects results; `overwrite` and
    /// `output_dir` are excluded.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "kind={}\nname={}\nseed={}",
            self.kind, self.name, self.seed
        );
        let _ = writeln!(out, "kappa_max={}", format_sig17(self.kappa_max));
        let t = &self.tol;
        let _ = writeln!(
            out,
            "tol_herm={} tol_psd={} tol_rel={} max_iter={}",
            format_sig17(t.tol_herm),
            format_sig17(t.tol_psd),
            format_sig17(t.tol_rel),
            t.max_iter
        );
        let _ = writeln!(out, "arcs={} snap={}", self.arcs, self.snap);
        let times: Vec<String> = self.times.iter().map(|&x| format_sig17(x)).collect();
        let _ = writeln!(out, "times={}", times.join(","));
        for input in &self.inputs {
            let _ = writeln!(out, "input label={} role={:?}", input.label, input.role);
            match &input.source {
                InputSource::Matrix(m) => out.push_str(&format_matrix(m)),
                InputSource::Random { dim, level } => {
                    let _ = writeln!(out, "random dim={dim} level={}", format_sig17(*level));
                }
                InputSource::Model(spec) => {
                    let _ = writeln!(out, "model={}", spec.name);
                    for (k, v) in &spec.params {
                        match v {
                            ParamValue::Number(x) => {
                                let _ = writeln!(out, "{k}={}", format_sig17(*x));
                            }
                            ParamValue::Label(s) => {
                                let _ = writeln!(out, "{k}={s}");
                            }
                            ParamValue::Matrix(m) => {
                                let _ = writeln!(out, "{k}=");
                                out.push_str(&format_matrix(m));
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// SHA-256 of [`canonical`](Self::canonical), hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}

fn check_times(times: &[f64]) -> Result<(), String> {
    if let Some(t) = times.iter().find(|t| !t.is_finite() || **t < 0.0) {
        return Err(format!("time {t} is negative or not finite"));
    }
    if let Some(w) = times.windows(2).find(|w| w[1] <= w[0]) {
        return Err(format!("times must increase ({} then {})", w[0], w[1]));
    }
    Ok(())
}

struct Entry {
    line: usize,
    key: String,
    value: String,
}

struct Section {
    name: String,
    line: usize,
    entries: Vec<Entry>,
}

impl Section {
    fn take(&mut self, key: &str) -> Option<Entry> {
        let k = self.entries.iter().position(|e| e.key == key)?;
        Some(self.entries.remove(k))
    }

    fn reject_rest(&self) -> Result<(), ConfigError> {
        match self.entries.first() {
            Some(e) => Err(ConfigError::at(
                e.line,
                &e.key,
                format!("unknown key in [{}]", self.name),
            )),
            None => Ok(()),
        }
    }
}

fn split_sections(text: &str) -> Result<Vec<Section>, ConfigError> {
    let mut sections: Vec<Section> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') || l.starts_with(';') {
            continue;
        }
        if let Some(rest) = l.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::at(line, "section", "unterminated section header"))?
                .trim();
            if !matches!(name, "experiment" | "times" | "tolerances" | "input") {
                return Err(ConfigError::at(line, name, "unknown section"));
            }
            if name != "input" && sections.iter().any(|s| s.name == name) {
                return Err(ConfigError::at(line, name, "duplicate section"));
            }
            sections.push(Section {
                name: name.into(),
                line,
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = l
            .split_once('=')
            .ok_or_else(|| ConfigError::at(line, l, "expected key = value"))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(ConfigError::at(line, "key", "empty key"));
        }
        let section = sections
            .last_mut()
            .ok_or_else(|| ConfigError::at(line, key, "key outside any section"))?;
        if section.entries.iter().any(|e| e.key == key) {
            return Err(ConfigError::at(line, key, "duplicate key"));
        }
        section.entries.push(Entry {
            line,
            key: key.into(),
            value: value.into(),
        });
    }
    Ok(sections)
}

fn number(e: &Entry) -> Result<f64, ConfigError> {
    e.value
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| {
            ConfigError::at(
                e.line,
                &e.key,
                format!("expected a number, got {:?}", e.value),
            )
        })
}

fn integer<T: FromStr>(e: &Entry) -> Result<T, ConfigError> {
    e.value.parse::<T>().map_err(|_| {
        ConfigError::at(
            e.line,
            &e.key,
            format!("expected an integer, got {:?}", e.value),
        )
    })
}

fn boolean(e: &Entry) -> Result<bool, ConfigError> {
    match e.value.as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        v => Err(ConfigError::at(
            e.line,
            &e.key,
            format!("expected true or false, got {v:?}"),
        )),
    }
}

fn list(e: &Entry) -> Result<Vec<f64>, ConfigError> {
    e.value
        .split(',')
        .map(|tok| {
            tok.trim().parse::<f64>().map_err(|_| {
                ConfigError::at(e.line, &e.key, format!("invalid number {:?}", tok.trim()))
            })
        })
        .collect()
}

fn inline_matrix(body: &str, e: &Entry) -> Result<Operator, ConfigError> {
    let rows: Vec<Vec<&str>> = body
        .split(';')
        .map(|r| r.split_whitespace().collect())
        .collect();
    let cols = rows.first().map_or(0, |r| r.len());
    let mut text = format!("{} {}\n", rows.len(), cols);
    for r in &rows {
        text.push_str(&r.join(" "));
        text.push('\n');
    }
    parse_matrix(&text)
        .map_err(|err| ConfigError::at(e.line, &e.key, format!("bad inline matrix: {err}")))
}

fn matrix(e: &Entry, base: &Path) -> Result<Operator, ConfigError> {
    let v = e.value.as_str();
    if let Some(body) = v.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
        inline_matrix(body, e)
    } else if let Some(path) = v.strip_prefix('@') {
        read_matrix(&base.join(path.trim()))
            .map_err(|err| ConfigError::at(e.line, &e.key, err.to_string()))
    } else {
        Err(ConfigError::at(
            e.line,
            &e.key,
            "expected [rows; ...] or @path",
        ))
    }
}

fn expand_times(section: &mut Section) -> Result<Vec<f64>, ConfigError> {
    let mut times = Vec::new();
    let entries = std::mem::take(&mut section.entries);
    for e in &entries {
        match e.key.as_str() {
            "values" => times.extend(list(e)?),
            "range" => {
                let v = list(e)?;
                let count = v.get(2).copied().unwrap_or(-1.0);
                if v.len() != 3 || count < 1.0 || count.fract() != 0.0 {
                    return Err(ConfigError::at(
                        e.line,
                        &e.key,
                        "expected start, stop, count",
                    ));
                }
                let count = count as usize;
                if count == 1 {
                    times.push(v[0]);
                } else {
                    let h = (v[1] - v[0]) / (count - 1) as f64;
                    times.extend((0..count).map(|k| {
                        if k + 1 == count {
                            v[1]
                        } else {
                            v[0] + h * k as f64
                        }
                    }));
                }
            }
            "dyadic" => {
                let k: u32 = integer(e)?;
                if k > 60 {
                    return Err(ConfigError::at(e.line, &e.key, "at most 60"));
                }
                times.extend((0..=k).rev().map(|j| 0.5f64.powi(j as i32)));
            }
            _ => return Err(ConfigError::at(e.line, &e.key, "unknown key in [times]")),
        }
        check_times(&times).map_err(|m| ConfigError::at(e.line, &e.key, m))?;
    }
    Ok(times)
}

fn parse_input(mut s: Section, index: usize, base: &Path) -> Result<InputSpec, ConfigError> {
    let role = match s.take("role") {
        None => Role::Operator,
        Some(e) => match e.value.as_str() {
            "operator" => Role::Operator,
            "generator" => Role::Generator,
            v => {
                return Err(ConfigError::at(
                    e.line,
                    "role",
                    format!("expected operator or generator, got {v:?}"),
                ))
            }
        },
    };
    let label = s.take("label").map(|e| e.value);
    let (matrix_e, model_e, random_e) = (s.take("matrix"), s.take("model"), s.take("random"));
    let given = [&matrix_e, &model_e, &random_e]
        .iter()
        .filter(|e| e.is_some())
        .count();
    if given != 1 {
        return Err(ConfigError::at(
            s.line,
            "input",
            "exactly one of matrix, model, random is required",
        ));
    }
    let (default_label, source) = if let Some(e) = matrix_e {
        let m = matrix(&e, base)?;
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(ConfigError::at(
                e.line,
                "matrix",
                "must be square and nonempty",
            ));
        }
        s.reject_rest()?;
        (format!("input{}", index + 1), InputSource::Matrix(m))
    } else if let Some(e) = random_e {
        let dim: usize = integer(&e)?;
        if dim == 0 {
            return Err(ConfigError::at(
                e.line,
                "random",
                "dimension must be positive",
            ));
        }
        let key = if role == Role::Operator {
            "radius"
        } else {
            "abscissa"
        };
        let level = match s.take(key) {
            Some(l) => number(&l)?,
            None if role == Role::Operator => 0.9,
            None => -0.5,
        };
        if role == Role::Operator && level < 0.0 {
            return Err(ConfigError::at(e.line, "radius", "must be nonnegative"));
        }
        s.reject_rest()?;
        (
            format!("random{}", index + 1),
            InputSource::Random { dim, level },
        )
    } else {
        let e = model_e.expect("one source is present");
        let name: ModelName = e
            .value
            .parse()
            .map_err(|err: crate::gallery::GalleryError| {
                ConfigError::at(e.line, "model", err.to_string())
            })?;
        let mut spec = ModelSpec::new(name);
        for p in std::mem::take(&mut s.entries) {
            let value = if p.value.starts_with('[') || p.value.starts_with('@') {
                ParamValue::Matrix(matrix(&p, base)?)
            } else if let Ok(x) = p.value.parse::<f64>() {
                ParamValue::Number(x)
            } else {
                ParamValue::Label(p.value.clone())
            };
            spec.params.insert(p.key, value);
        }
        (name.to_string(), InputSource::Model(spec))
    };
    Ok(InputSpec {
        label: label.unwrap_or(default_label),
        role,
        source,
    })
}

/// Parse config text; relative matrix paths resolve against `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<ExperimentConfig, ConfigError> {
    let mut kind = None;
    let mut name = None;
    let mut seed = None;
    let mut cfg = ExperimentConfig::new(ExperimentKind::Analyze, "", 0);
    for mut s in split_sections(text)? {
        match s.name.as_str() {
            "experiment" => {
                if let Some(e) = s.take("kind") {
                    kind = Some(
                        e.value
                            .parse()
                            .map_err(|m: String| ConfigError::at(e.line, "kind", m))?,
                    );
                }
                name = s.take("name").map(|e| e.value);
                if let Some(e) = s.take("seed") {
                    seed = Some(integer::<u64>(&e)?);
                }
                if let Some(e) = s.take("kappa_max") {
                    cfg.kappa_max = number(&e)?;
                    if cfg.kappa_max < 1.0 {
                        return Err(ConfigError::at(e.line, "kappa_max", "must be at least 1"));
                    }
                }
                if let Some(e) = s.take("output_dir") {
                    cfg.output_dir = base.join(&e.value);
                }
                if let Some(e) = s.take("arcs") {
                    cfg.arcs = integer(&e)?;
                    if cfg.arcs == 0 {
                        return Err(ConfigError::at(e.line, "arcs", "must be positive"));
                    }
                }
                if let Some(e) = s.take("snap") {
                    cfg.snap = boolean(&e)?;
                }
                s.reject_rest()?;
            }
            "times" => cfg.times = expand_times(&mut s)?,
            "tolerances" => {
                for e in std::mem::take(&mut s.entries) {
                    match e.key.as_str() {
                        "tol_herm" => cfg.tol.tol_herm = number(&e)?,
                        "tol_psd" => cfg.tol.tol_psd = number(&e)?,
                        "tol_rel" => cfg.tol.tol_rel = number(&e)?,
                        "max_iter" => cfg.tol.max_iter = integer(&e)?,
                        _ => {
                            return Err(ConfigError::at(
                                e.line,
                                &e.key,
                                "unknown key in [tolerances]",
                            ))
                        }
                    }
                }
                cfg.tol
                    .validate()
                    .map_err(|err| ConfigError::at(s.line, "tolerances", err.to_string()))?;
            }
            _ => {
                let index = cfg.inputs.len();
                cfg.inputs.push(parse_input(s, index, base)?);
            }
        }
    }
    cfg.kind = kind.ok_or_else(|| ConfigError::missing("kind"))?;
    cfg.seed = seed.ok_or_else(|| ConfigError::missing("seed"))?;
    cfg.name = name.unwrap_or_else(|| cfg.kind.to_string());
    if cfg.name.is_empty() || cfg.name.contains(['/', '\\']) {
        return Err(ConfigError::missing("name"));
    }
    cfg.tol.kappa_max = cfg.kappa_max;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, LabError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(parse_config(&text, base)?)
}
