//! TOML run configuration.
//!
//! ```toml
//! [domain]
//! L = 1.0
//! Nx = 65
//!
//! [time]
//! T = 6.283185307179586
//! M = 2
//!
//! [physics]
//! equation = "westervelt"   # linear | westervelt | kuznetsov
//! tau = 0.1
//! taubar = 0.5
//! b = 1.0
//! c2 = "c2_profile.txt"     # scalar or path to Nx numbers
//! eta = 1.0
//! eta_tilde = 0.0
//!
//! [bc.left]
//! kind = "dirichlet"
//!
//! [bc.right]
//! kind = "impedance"
//! gamma = 2.0
//!
//! [forcing]
//! profile = "sine"          # sine | constant | gaussian | hat
//! amplitudes = [0.1]        # harmonic m = 1, 2, ...
//! ```
//!
//! Instead of a profile, `case = "linear-dirichlet"` with `case_amplitude`
//! selects a manufactured solution. `[solver]` and `[study]` are optional.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{ConfigError, Error, Result};
use crate::field::HarmonicField;
use crate::harmonic::LinearizedOptions;
use crate::model::{validate_config, BcKind, BoundaryCondition, Model, Nonlinearity, RawModel, ValidatedModel};
use crate::nonlinear::FixedPointOptions;
use crate::oracle::OracleOptions;
use crate::studies::manufactured_case;

type CfgResult<T> = std::result::Result<T, ConfigError>;

const SECTIONS: &[(&str, &[&str])] = &[
    ("domain", &["L", "Nx"]),
    ("time", &["T", "M"]),
    ("physics", &["equation", "tau", "taubar", "b", "c2", "eta", "eta_tilde"]),
    ("bc.left", &["kind", "beta", "gamma"]),
    ("bc.right", &["kind", "beta", "gamma"]),
    ("forcing", &["profile", "amplitudes", "phases", "case", "case_amplitude"]),
    (
        "solver",
        &["tol", "max_iter", "relaxation", "degeneracy_floor", "ball_radius", "dense_threshold", "linear_tol"],
    ),
    (
        "study",
        &["taus", "grids", "eps", "direction", "steps_per_period", "max_periods", "period_tol", "case"],
    ),
];

/// Scalar broadcast to every node, or a file of nodal values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Scalar(f64),
    File(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "Nx")]
    pub nx: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(rename = "T")]
    pub period: f64,
    #[serde(rename = "M")]
    pub harmonics: usize,
}

fn zero() -> Coefficient {
    Coefficient::Scalar(0.0)
}

fn linear() -> Nonlinearity {
    Nonlinearity::Linear
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConfig {
    #[serde(default = "linear")]
    pub equation: Nonlinearity,
    pub tau: f64,
    pub taubar: f64,
    pub b: Coefficient,
    pub c2: Coefficient,
    #[serde(default = "zero")]
    pub eta: Coefficient,
    #[serde(default = "zero")]
    pub eta_tilde: Coefficient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcConfig {
    pub kind: BcKind,
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcPair {
    pub left: BcConfig,
    pub right: BcConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// `sin(πx/L)`
    Sine,
    Constant,
    /// `exp(−(x − L/2)² / (L/10)²)`
    Gaussian,
    /// Piecewise linear, 1 at `L/2`, 0 at the ends.
    Hat,
}

impl Profile {
    pub fn eval(self, x: f64, length: f64) -> f64 {
        match self {
            Profile::Sine => (PI * x / length).sin(),
            Profile::Constant => 1.0,
            Profile::Gaussian => (-((x - 0.5 * length) / (0.1 * length)).powi(2)).exp(),
            Profile::Hat => 1.0 - (2.0 * x / length - 1.0).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingConfig {
    pub profile: Option<Profile>,
    /// Real amplitude of harmonic `m = i + 1`.
    #[serde(default)]
    pub amplitudes: Vec<f64>,
    /// Phase in radians per harmonic; missing entries are zero.
    #[serde(default)]
    pub phases: Vec<f64>,
    pub case: Option<String>,
    pub case_amplitude: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub relaxation: Option<f64>,
    pub degeneracy_floor: Option<f64>,
    pub ball_radius: Option<f64>,
    pub dense_threshold: Option<usize>,
    pub linear_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub taus: Option<Vec<f64>>,
    pub grids: Option<Vec<usize>>,
    pub eps: Option<Vec<f64>>,
    /// Perturbation profile for the Taylor test; defaults to the forcing.
    pub direction: Option<Profile>,
    pub steps_per_period: Option<usize>,
    pub max_periods: Option<usize>,
    pub period_tol: Option<f64>,
    /// Manufactured case for `converge`.
    pub case: Option<String>,
}

/// Parsed configuration, before model validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub domain: DomainConfig,
    pub time: TimeConfig,
    pub physics: PhysicsConfig,
    pub bc: BcPair,
    #[serde(default)]
    pub forcing: ForcingConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub study: StudyConfig,
    /// Directory that coefficient files are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn syntax_line(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

/// Line of `key` inside `[section]`, for error messages.
fn key_line(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if let Some(rest) = t.strip_prefix('[') {
            current = rest.trim_end_matches(']').trim().to_string();
            if section.is_empty() && current == key {
                return Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some(rest) = t.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

fn check_keys(table: &Table, text: &str) -> CfgResult<()> {
    let known_sections: Vec<&str> = SECTIONS.iter().map(|(s, _)| *s).collect();
    for (name, value) in table {
        let unknown = |key: String, line| ConfigError::UnknownKey { key, line };
        match (name.as_str(), value) {
            ("bc", Value::Table(sides)) => {
                for (side, inner) in sides {
                    let section = format!("bc.{side}");
                    let Some((_, keys)) = SECTIONS.iter().find(|(s, _)| *s == section) else {
                        return Err(unknown(section.clone(), key_line(text, "", &section)));
                    };
                    check_section(&section, keys, inner, text)?;
                }
            }
            (section, inner) if known_sections.contains(&section) && section != "bc.left" && section != "bc.right" => {
                let keys = SECTIONS.iter().find(|(s, _)| *s == section).map(|(_, k)| *k).unwrap_or(&[]);
                check_section(section, keys, inner, text)?;
            }
            _ => return Err(unknown(name.clone(), key_line(text, "", name))),
        }
    }
    Ok(())
}

fn check_section(section: &str, keys: &[&str], value: &Value, text: &str) -> CfgResult<()> {
    let Value::Table(t) = value else {
        return Err(ConfigError::TypeMismatch { key: section.to_string(), message: "expected a table".into() });
    };
    for key in t.keys() {
        if !keys.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey {
                key: format!("{section}.{key}"),
                line: key_line(text, section, key),
            });
        }
    }
    Ok(())
}

fn parse_override_value(raw: &str) -> Value {
    let raw = raw.trim();
    if let Ok(t) = format!("v = {raw}").parse::<Table>() {
        if let Some(v) = t.get("v") {
            return v.clone();
        }
    }
    if raw.contains(',') {
        let parts: Vec<Value> = raw.split(',').map(|p| parse_override_value(p)).collect();
        return Value::Array(parts);
    }
    Value::String(raw.to_string())
}

/// Applies `section.key=value` overrides; values use TOML syntax, bare words
/// are strings and comma-separated lists become arrays.
pub fn apply_overrides(table: &mut Table, overrides: &[String]) -> CfgResult<()> {
    for o in overrides {
        let (path, raw) = o.split_once('=').ok_or_else(|| ConfigError::SyntaxError {
            line: 0,
            message: format!("override `{o}` is not of the form section.key=value"),
        })?;
        let parts: Vec<&str> = path.trim().split('.').collect();
        if parts.len() < 2 || parts.iter().any(|p| p.is_empty()) {
            return Err(ConfigError::UnknownKey { key: path.trim().to_string(), line: None });
        }
        let (key, sections) = parts.split_last().expect("nonempty");
        let mut cur = &mut *table;
        for s in sections {
            let entry = cur.entry(s.to_string()).or_insert_with(|| Value::Table(Table::new()));
            cur = match entry {
                Value::Table(t) => t,
                _ => {
                    return Err(ConfigError::TypeMismatch { key: path.to_string(), message: format!("`{s}` is not a table") })
                }
            };
        }
        cur.insert(key.to_string(), parse_override_value(raw));
    }
    Ok(())
}

fn type_error(e: toml::de::Error) -> ConfigError {
    let message = e.message().to_string();
    let key = message
        .split('`')
        .nth(1)
        .map(str::to_string)
        .unwrap_or_else(|| "config".to_string());
    ConfigError::TypeMismatch { key, message }
}

/// Parses configuration text; overrides are applied to the key tree before typing.
pub fn parse_config(text: &str, base_dir: &Path, overrides: &[String]) -> CfgResult<Config> {
    let mut table: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::SyntaxError {
        line: e.span().map(|s| syntax_line(text, s.start)).unwrap_or(0),
        message: e.message().to_string(),
    })?;
    check_keys(&table, text)?;
    apply_overrides(&mut table, overrides)?;
    check_keys(&table, "")?;
    let mut config: Config = Value::Table(table).try_into().map_err(type_error)?;
    config.base_dir = base_dir.to_path_buf();
    Ok(config)
}

/// Reads and parses a configuration file.
pub fn load_config(path: &Path, overrides: &[String]) -> CfgResult<Config> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Unreadable { path: path.display().to_string(), message: e.to_string() })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config(&text, &base, overrides)
}

fn read_coefficient(name: &str, c: &Coefficient, nx: usize, base: &Path) -> CfgResult<Vec<f64>> {
    match c {
        Coefficient::Scalar(v) => Ok(vec![*v; nx]),
        Coefficient::File(p) => {
            let path = base.join(p);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| ConfigError::Unreadable { path: path.display().to_string(), message: e.to_string() })?;
            let values = text
                .split(|ch: char| ch.is_whitespace() || ch == ',')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| ConfigError::TypeMismatch {
                    key: format!("physics.{name}"),
                    message: format!("{}: {e}", path.display()),
                })?;
            if values.len() != nx {
                return Err(ConfigError::TypeMismatch {
                    key: format!("physics.{name}"),
                    message: format!("{} has {} values, expected Nx = {nx}", path.display(), values.len()),
                });
            }
            Ok(values)
        }
    }
}

impl Config {
    /// Resolves coefficient files into nodal arrays.
    pub fn raw_model(&self) -> CfgResult<RawModel> {
        let nx = self.domain.nx;
        let base = &self.base_dir;
        let p = &self.physics;
        let bc = |c: BcConfig| BoundaryCondition { kind: c.kind, beta: c.beta, gamma: c.gamma };
        Ok(RawModel {
            length: self.domain.length,
            nx,
            period: self.time.period,
            harmonics: self.time.harmonics,
            tau: p.tau,
            taubar: p.taubar,
            b: read_coefficient("b", &p.b, nx, base)?,
            c2: read_coefficient("c2", &p.c2, nx, base)?,
            eta: read_coefficient("eta", &p.eta, nx, base)?,
            eta_tilde: read_coefficient("eta_tilde", &p.eta_tilde, nx, base)?,
            left: bc(self.bc.left),
            right: bc(self.bc.right),
        })
    }

    pub fn validate(&self) -> Result<ValidatedModel> {
        validate_config(&self.raw_model()?).map_err(Error::Validation)
    }

    pub fn model(&self) -> Result<Model> {
        Ok(self.validate()?.model)
    }

    pub fn equation(&self) -> Nonlinearity {
        self.physics.equation
    }

    /// Forcing coefficients `f̂_m` on the model grid.
    pub fn forcing(&self, model: &Model) -> Result<HarmonicField> {
        let fc = &self.forcing;
        if let Some(case) = &fc.case {
            if fc.profile.is_some() || !fc.amplitudes.is_empty() {
                return Err(Error::InvalidArgument("forcing: give either case or profile/amplitudes".into()));
            }
            let c = manufactured_case(case, model, fc.case_amplitude.unwrap_or(1e-3))?;
            if c.kind != self.equation() {
                return Err(Error::InvalidArgument(format!(
                    "forcing case {case} is for {:?}, physics.equation is {:?}",
                    c.kind,
                    self.equation()
                )));
            }
            return Ok(c.f);
        }
        let profile = fc.profile.unwrap_or(Profile::Sine);
        profile_forcing(model, profile, &fc.amplitudes, &fc.phases)
    }

    pub fn fixed_point_options(&self) -> FixedPointOptions {
        let d = FixedPointOptions::default();
        let s = &self.solver;
        FixedPointOptions {
            tol: s.tol.unwrap_or(d.tol),
            max_iter: s.max_iter.unwrap_or(d.max_iter),
            relaxation: s.relaxation.unwrap_or(d.relaxation),
            degeneracy_floor: s.degeneracy_floor.unwrap_or(d.degeneracy_floor),
            ball_radius: s.ball_radius.or(d.ball_radius),
        }
    }

    pub fn linearized_options(&self) -> LinearizedOptions {
        let d = LinearizedOptions::default();
        LinearizedOptions {
            tol: self.solver.linear_tol.unwrap_or(d.tol),
            dense_threshold: self.solver.dense_threshold.unwrap_or(d.dense_threshold),
            ..d
        }
    }

    pub fn oracle_options(&self) -> OracleOptions {
        let d = OracleOptions::default();
        let s = &self.study;
        OracleOptions {
            steps_per_period: s.steps_per_period.unwrap_or(d.steps_per_period),
            max_periods: s.max_periods.unwrap_or(d.max_periods),
            period_tol: s.period_tol.unwrap_or(d.period_tol),
            ..d
        }
    }

    /// Flat `section.key -> value` view, for run metadata.
    pub fn flatten(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        if let Ok(Value::Table(t)) = Value::try_from(self) {
            flatten_into("", &t, &mut out);
        }
        out
    }
}

fn flatten_into(prefix: &str, t: &Table, out: &mut BTreeMap<String, String>) {
    for (k, v) in t {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(inner) => flatten_into(&key, inner, out),
            other => {
                out.insert(key, other.to_string());
            }
        }
    }
}

/// `f̂_m = a_m e^{iφ_m} p(x) / 2` for `m = 1..`, zero at Dirichlet ends.
pub fn profile_forcing(model: &Model, profile: Profile, amplitudes: &[f64], phases: &[f64]) -> Result<HarmonicField> {
    if amplitudes.len() > model.harmonics() {
        return Err(Error::InvalidArgument(format!(
            "{} forcing amplitudes for M = {}",
            amplitudes.len(),
            model.harmonics()
        )));
    }
    let g = model.grid();
    let shape = g.sample(|x| profile.eval(x, g.length()));
    let dofs = model.dofs();
    let mut f = HarmonicField::zeros(model.harmonics(), g.nx());
    for (i, &a) in amplitudes.iter().enumerate() {
        let z = C64::from_polar(0.5 * a, phases.get(i).copied().unwrap_or(0.0));
        let c = f.coeff_mut(i + 1);
        for &j in &dofs {
            c[j] = z * shape[j];
        }
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[domain]
L = 1.0
Nx = 17

[time]
T = 6.283185307179586
M = 2

[physics]
tau = 0.1
taubar = 0.5
b = 1.0
c2 = 1.0

[bc.left]
kind = "dirichlet"

[bc.right]
kind = "dirichlet"
"#;

    #[test]
    fn minimal_config_validates() {
        let c = parse_config(MINIMAL, Path::new("."), &[]).unwrap();
        let v = c.validate().unwrap();
        assert_eq!(v.model.grid().nx(), 17);
        assert!((v.stability_margin - 0.5).abs() < 1e-15);
        assert_eq!(c.equation(), Nonlinearity::Linear);
    }

    #[test]
    fn misspelled_key_is_named_with_line() {
        let text = MINIMAL.replace("kind = \"dirichlet\"\n\n[bc.right]", "kind = \"dirichlet\"\ngama = 1.0\n\n[bc.right]");
        match parse_config(&text, Path::new("."), &[]) {
            Err(ConfigError::UnknownKey { key, line }) => {
                assert_eq!(key, "bc.left.gama");
                assert_eq!(line, Some(18));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_section() {
        let text = format!("{MINIMAL}\n[extra]\nx = 1\n");
        assert!(matches!(parse_config(&text, Path::new("."), &[]), Err(ConfigError::UnknownKey { key, .. }) if key == "extra"));
    }

    #[test]
    fn syntax_error_has_line() {
        let text = MINIMAL.replace("Nx = 17", "Nx = = 17");
        assert!(matches!(parse_config(&text, Path::new("."), &[]), Err(ConfigError::SyntaxError { line: 4, .. })));
    }

    #[test]
    fn type_mismatch() {
        let text = MINIMAL.replace("Nx = 17", "Nx = \"many\"");
        assert!(matches!(parse_config(&text, Path::new("."), &[]), Err(ConfigError::TypeMismatch { .. })));
    }

    #[test]
    fn overrides_apply_before_validation() {
        let c = parse_config(MINIMAL, Path::new("."), &["physics.taubar=2.0".into(), "bc.right.kind=neumann".into()])
            .unwrap();
        assert_eq!(c.physics.taubar, 2.0);
        assert_eq!(c.bc.right.kind, BcKind::Neumann);
        assert!(matches!(c.validate(), Err(Error::Validation(_))));
        let c = parse_config(MINIMAL, Path::new("."), &["study.taus=0.4,0.2,0".into()]).unwrap();
        assert_eq!(c.study.taus, Some(vec![0.4, 0.2, 0.0]));
        assert!(matches!(
            parse_config(MINIMAL, Path::new("."), &["physics.gamma=1".into()]),
            Err(ConfigError::UnknownKey { .. })
        ));
    }

    #[test]
    fn coefficient_file_length_checked() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("c2.txt"), "1\n1\n1\n").unwrap();
        let text = MINIMAL.replace("c2 = 1.0", "c2 = \"c2.txt\"");
        let c = parse_config(&text, dir.path(), &[]).unwrap();
        match c.raw_model() {
            Err(ConfigError::TypeMismatch { key, message }) => {
                assert_eq!(key, "physics.c2");
                assert!(message.contains("Nx = 17"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let values: String = (0..17).map(|j| format!("{}\n", 1.0 + 0.01 * j as f64)).collect();
        std::fs::write(dir.path().join("c2.txt"), values).unwrap();
        let raw = c.raw_model().unwrap();
        assert_eq!(raw.c2[16], 1.16);
    }

    #[test]
    fn profile_forcing_vanishes_on_dirichlet_nodes() {
        let c = parse_config(MINIMAL, Path::new("."), &["forcing.profile=constant".into(), "forcing.amplitudes=[2.0]".into()])
            .unwrap();
        let m = c.model().unwrap();
        let f = c.forcing(&m).unwrap();
        assert_eq!(f.coeff(1)[0], C64::new(0.0, 0.0));
        assert_eq!(f.coeff(1)[8], C64::new(1.0, 0.0));
        assert!(f.coeff(2).iter().all(|z| *z == C64::new(0.0, 0.0)));
    }
}
