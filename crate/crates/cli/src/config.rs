//! Flat `key = value` experiment configuration.

use std::fmt;
use std::path::PathBuf;

use fbm_harnack::{ConstantVariant, DriftFamily, DriftSpec, HurstParam, TestFunction, TimeGrid};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "FBM_HARNACK_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Covariance,
    Isometry,
    Girsanov,
    Coupling,
    Harnack,
    LogHarnack,
    StrongFeller,
    Derivative,
    Constants,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Covariance,
        Experiment::Isometry,
        Experiment::Girsanov,
        Experiment::Coupling,
        Experiment::Harnack,
        Experiment::LogHarnack,
        Experiment::StrongFeller,
        Experiment::Derivative,
        Experiment::Constants,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Covariance => "covariance",
            Experiment::Isometry => "isometry",
            Experiment::Girsanov => "girsanov",
            Experiment::Coupling => "coupling",
            Experiment::Harnack => "harnack",
            Experiment::LogHarnack => "log_harnack",
            Experiment::StrongFeller => "strong_feller",
            Experiment::Derivative => "derivative",
            Experiment::Constants => "constants",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub key: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn at(key: &str, message: impl Into<String>) -> Self {
        Self {
            key: Some(key.to_string()),
            message: message.into(),
        }
    }

    fn general(message: impl Into<String>) -> Self {
        Self {
            key: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.key {
            Some(k) => write!(f, "config key `{k}`: {}", self.message),
            None => write!(f, "config: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Keys that take numbers; only these can be swept.
pub const NUMERIC_KEYS: &[&str] = &[
    "H",
    "T",
    "K",
    "x",
    "y",
    "p",
    "drift_a",
    "drift_c",
    "f_value",
    "f_lo",
    "f_hi",
    "n_steps",
    "n_paths",
    "seed",
    "epsilon",
    "allowance",
    "tolerance",
    "threads",
];

const TEXT_KEYS: &[&str] = &["experiment", "drift", "f", "variant", "output"];

pub fn is_known_key(key: &str) -> bool {
    NUMERIC_KEYS.contains(&key) || TEXT_KEYS.contains(&key)
}

pub fn is_numeric_key(key: &str) -> bool {
    NUMERIC_KEYS.contains(&key)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Option<Experiment>,
    pub hurst: f64,
    pub horizon: f64,
    /// Lipschitz and derivative bound for `constants`; defaults to `|drift_a|`.
    pub k: Option<f64>,
    pub x: f64,
    pub y: f64,
    pub p: f64,
    pub drift: DriftFamily,
    pub drift_a: f64,
    pub drift_c: f64,
    pub f: String,
    pub f_value: f64,
    pub f_lo: f64,
    pub f_hi: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub variant: ConstantVariant,
    pub epsilon: f64,
    pub allowance: f64,
    pub tolerance: f64,
    pub output: Option<PathBuf>,
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            hurst: 0.3,
            horizon: 1.0,
            k: None,
            x: 0.0,
            y: 1.0,
            p: 2.0,
            drift: DriftFamily::Linear,
            drift_a: -1.0,
            drift_c: 0.0,
            f: "one_plus_half_sin".to_string(),
            f_value: 1.0,
            f_lo: -1e6,
            f_hi: 1e6,
            n_steps: 64,
            n_paths: 10_000,
            seed: 1,
            variant: ConstantVariant::Thm31,
            epsilon: 0.05,
            allowance: 0.02,
            tolerance: 1e-3,
            output: None,
            threads: 0,
        }
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64, ConfigError> {
    let v: f64 = value
        .parse()
        .map_err(|_| ConfigError::at(key, format!("expected a number, got `{value}`")))?;
    if !v.is_finite() {
        return Err(ConfigError::at(key, format!("expected a finite number, got `{value}`")));
    }
    Ok(v)
}

fn parse_int<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| ConfigError::at(key, format!("expected a nonnegative integer, got `{value}`")))
}

impl ExperimentConfig {
    /// Parses a config file body. Later assignments win.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError::general(format!("line {}: expected `key = value`, got `{line}`", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError::general(format!("override `{assignment}` is not key=value")))?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "experiment" => {
                self.experiment = Some(Experiment::parse(value).ok_or_else(|| {
                    let names: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
                    ConfigError::at(key, format!("unknown experiment `{value}` (one of {})", names.join(", ")))
                })?)
            }
            "H" => self.hurst = parse_f64(key, value)?,
            "T" => self.horizon = parse_f64(key, value)?,
            "K" => self.k = Some(parse_f64(key, value)?),
            "x" => self.x = parse_f64(key, value)?,
            "y" => self.y = parse_f64(key, value)?,
            "p" => self.p = parse_f64(key, value)?,
            "drift" => {
                self.drift = DriftFamily::parse(value)
                    .ok_or_else(|| ConfigError::at(key, format!("unknown drift family `{value}` (linear, sine, tanh)")))?
            }
            "drift_a" => self.drift_a = parse_f64(key, value)?,
            "drift_c" => self.drift_c = parse_f64(key, value)?,
            "f" => {
                self.f = value.to_string();
                self.test_function().map_err(|m| ConfigError::at(key, m))?;
            }
            "f_value" => self.f_value = parse_f64(key, value)?,
            "f_lo" => self.f_lo = parse_f64(key, value)?,
            "f_hi" => self.f_hi = parse_f64(key, value)?,
            "n_steps" => self.n_steps = parse_int(key, value)?,
            "n_paths" => self.n_paths = parse_int(key, value)?,
            "seed" => self.seed = parse_int(key, value)?,
            "variant" => {
                self.variant = ConstantVariant::parse(value)
                    .ok_or_else(|| ConfigError::at(key, format!("unknown variant `{value}` (thm31, rem31, cor41)")))?
            }
            "epsilon" => self.epsilon = parse_f64(key, value)?,
            "allowance" => self.allowance = parse_f64(key, value)?,
            "tolerance" => self.tolerance = parse_f64(key, value)?,
            "output" => self.output = Some(PathBuf::from(value)),
            "threads" => self.threads = parse_int(key, value)?,
            _ => return Err(ConfigError::at(key, "unknown key")),
        }
        Ok(())
    }

    pub fn experiment(&self) -> Result<Experiment, ConfigError> {
        self.experiment
            .ok_or_else(|| ConfigError::at("experiment", "missing required key"))
    }

    pub fn test_function(&self) -> Result<TestFunction, String> {
        Ok(match self.f.as_str() {
            "one_plus_half_sin" => TestFunction::OnePlusHalfSin,
            "sigmoid01" => TestFunction::Sigmoid01,
            "shifted_sigmoid" => TestFunction::ShiftedSigmoid,
            "sin" => TestFunction::Sin,
            "constant" => TestFunction::Constant(self.f_value),
            "clamped_identity" => {
                if !(self.f_lo < self.f_hi) {
                    return Err("clamped_identity needs f_lo < f_hi".to_string());
                }
                TestFunction::ClampedIdentity {
                    lo: self.f_lo,
                    hi: self.f_hi,
                }
            }
            other => {
                return Err(format!(
                    "unknown test function `{other}` (one_plus_half_sin, sigmoid01, shifted_sigmoid, sin, constant, clamped_identity)"
                ))
            }
        })
    }

    pub fn hurst_param(&self) -> Result<HurstParam, ConfigError> {
        HurstParam::new(self.hurst).map_err(|e| ConfigError::at("H", e.to_string()))
    }

    pub fn grid(&self) -> Result<TimeGrid, ConfigError> {
        if self.n_steps < 1 {
            return Err(ConfigError::at("n_steps", "must be at least 1"));
        }
        TimeGrid::new(self.horizon, self.n_steps).map_err(|e| ConfigError::at("T", e.to_string()))
    }

    pub fn drift_spec(&self) -> Result<DriftSpec, ConfigError> {
        DriftSpec::new(self.drift, self.drift_a, self.drift_c).map_err(|e| ConfigError::at("drift_a", e.to_string()))
    }

    /// Checks everything the selected experiment relies on.
    pub fn validate(&self) -> Result<Experiment, ConfigError> {
        let exp = self.experiment()?;
        let h = self.hurst_param()?;
        self.grid()?;
        let drift = self.drift_spec()?;
        self.test_function().map_err(|m| ConfigError::at("f", m))?;
        let needs_paths = !matches!(exp, Experiment::Isometry | Experiment::Constants);
        if needs_paths && self.n_paths < 2 {
            return Err(ConfigError::at("n_paths", "need at least 2 paths"));
        }
        let rough_only = matches!(
            exp,
            Experiment::Girsanov
                | Experiment::Harnack
                | Experiment::LogHarnack
                | Experiment::StrongFeller
                | Experiment::Constants
        );
        if rough_only && h.is_brownian() {
            return Err(ConfigError::at("H", "this experiment needs H < 1/2"));
        }
        let coupled = matches!(
            exp,
            Experiment::Girsanov
                | Experiment::Coupling
                | Experiment::Harnack
                | Experiment::LogHarnack
                | Experiment::StrongFeller
        );
        if coupled && !(drift.lipschitz() > 0.0) {
            return Err(ConfigError::at("drift_a", "coupling needs drift_a != 0"));
        }
        if coupled && exp != Experiment::Harnack && self.variant == ConstantVariant::Cor41 {
            return Err(ConfigError::at("variant", "cor41 only applies to the harnack experiment"));
        }
        if matches!(exp, Experiment::Harnack | Experiment::LogHarnack | Experiment::StrongFeller)
            && self.n_paths < fbm_harnack::harnack::MIN_PATHS
        {
            return Err(ConfigError::at(
                "n_paths",
                format!("inequality checks need at least {} paths", fbm_harnack::harnack::MIN_PATHS),
            ));
        }
        if exp == Experiment::Derivative && self.n_paths < fbm_harnack::harnack::MIN_PATHS {
            return Err(ConfigError::at(
                "n_paths",
                format!("derivative estimates need at least {} paths", fbm_harnack::harnack::MIN_PATHS),
            ));
        }
        if exp == Experiment::Harnack && !(self.p > 1.0) {
            return Err(ConfigError::at("p", "Harnack exponent must exceed 1"));
        }
        if exp == Experiment::Derivative && !(self.epsilon >= fbm_harnack::bismut::MIN_FD_STEP) {
            return Err(ConfigError::at("epsilon", "finite-difference step must be at least 1e-8"));
        }
        if exp == Experiment::Covariance && self.allowance < 0.0 {
            return Err(ConfigError::at("allowance", "must be nonnegative"));
        }
        if exp == Experiment::Isometry && !(self.tolerance > 0.0) {
            return Err(ConfigError::at("tolerance", "must be positive"));
        }
        if exp == Experiment::Constants {
            if let Some(k) = self.k {
                if !(k > 0.0) {
                    return Err(ConfigError::at("K", "must be positive"));
                }
            } else if !(drift.lipschitz() > 0.0) {
                return Err(ConfigError::at("K", "set K or a nonzero drift_a"));
            }
        }
        Ok(exp)
    }

    /// Output directory: `output` key, then the environment, then `out`.
    pub fn output_dir(&self) -> PathBuf {
        if let Some(p) = &self.output {
            return p.clone();
        }
        std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_overrides() {
        let mut c = ExperimentConfig::parse(
            "# demo\nexperiment = harnack\nH = 0.25  # rough\n\nx=0\ny = 0.25\n",
        )
        .unwrap();
        assert_eq!(c.experiment, Some(Experiment::Harnack));
        assert_eq!(c.hurst, 0.25);
        c.apply_override("H=0.4").unwrap();
        assert_eq!(c.hurst, 0.4);
        assert_eq!(c.validate().unwrap(), Experiment::Harnack);
    }

    #[test]
    fn unknown_keys_are_named() {
        let e = ExperimentConfig::parse("experiment = harnack\nhurst = 0.3\n").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("hurst"));
        let e = ExperimentConfig::parse("H = abc").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("H"));
        assert!(ExperimentConfig::parse("just words").is_err());
    }

    #[test]
    fn validation_names_the_key() {
        let mut c = ExperimentConfig::parse("experiment = girsanov").unwrap();
        c.set("H", "0.7").unwrap();
        assert_eq!(c.validate().unwrap_err().key.as_deref(), Some("H"));
        c.set("H", "0.3").unwrap();
        c.set("drift_a", "0").unwrap();
        assert_eq!(c.validate().unwrap_err().key.as_deref(), Some("drift_a"));
        let c = ExperimentConfig::parse("H = 0.3").unwrap();
        assert_eq!(c.validate().unwrap_err().key.as_deref(), Some("experiment"));
    }

    #[test]
    fn numeric_keys_are_known() {
        for k in NUMERIC_KEYS {
            assert!(is_known_key(k));
        }
        assert!(!is_numeric_key("drift"));
    }
}
