//! Run configuration: per-problem defaults, JSON files and dotted overrides.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::activations::ActivationKind;
use crate::loss::LossWeights;
use crate::network::{Architecture, Mode};
use crate::problems::{build_problem, LetterLayout, ProblemError, ProblemKind, ProblemSpec};
use crate::sampling::SamplingCounts;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    Adai,
    Ipinn,
}

impl ModeName {
    pub fn name(self) -> &'static str {
        match self {
            ModeName::Adai => "adai",
            ModeName::Ipinn => "ipinn",
        }
    }
}

/// Learning rate `lr · rate^(t / every)` at iteration `t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrDecay {
    pub rate: f64,
    pub every: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub problem: ProblemKind,
    pub mode: ModeName,
    /// Shared kind in `adai` mode.
    pub activation: ActivationKind,
    /// One kind per subdomain in `ipinn` mode.
    pub activations: Option<Vec<ActivationKind>>,
    pub hidden_layers: usize,
    pub neurons: usize,
    pub iterations: usize,
    pub seed: u64,
    pub scale_n: f64,
    pub lr: f64,
    pub lr_decay: Option<LrDecay>,
    pub alpha_int: f64,
    pub alpha_bc_d: f64,
    pub alpha_bc_n: f64,
    pub sampling: SamplingCounts,
    /// Evaluation points per axis, endpoints included.
    pub eval_grid: Vec<usize>,
    pub log_interval: usize,
    pub output_dir: Option<PathBuf>,
    /// Letter layout JSON replacing the built-in one (2D only).
    pub geometry_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Parse(String),
    #[error("invalid value for `{field}`: {message}")]
    Field { field: &'static str, message: String },
    #[error("override `{0}` must have the form key=value")]
    Override(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

fn field(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field { field, message: message.into() }
}

/// Alternating kinds used by the fixed-activation comparison runs.
pub fn default_ipinn_kinds(problem: ProblemKind) -> Vec<ActivationKind> {
    use ActivationKind::*;
    match problem {
        ProblemKind::Poisson1d => vec![Tanh, Swish, Tanh, Swish, Tanh],
        ProblemKind::Letters2d => vec![Tanh, Swish, Swish, Swish, Swish],
        ProblemKind::Spheres3d => {
            let mut kinds = vec![Swish];
            kinds.extend([Sigmoid; 8]);
            kinds
        }
    }
}

impl TrainConfig {
    pub fn defaults(problem: ProblemKind, mode: ModeName) -> Self {
        let (layers, neurons, alpha_int, alpha_bc, activation, iterations, eval_grid) = match problem {
            ProblemKind::Poisson1d => (3, 10, 5.0, 10.0, ActivationKind::Tanh, 60_000, vec![1001]),
            ProblemKind::Letters2d => (3, 20, 25.0, 20.0, ActivationKind::Tanh, 60_000, vec![171, 101]),
            ProblemKind::Spheres3d => (2, 50, 50.0, 40.0, ActivationKind::Sigmoid, 20_000, vec![41, 41, 41]),
        };
        Self {
            problem,
            mode,
            activation,
            activations: (mode == ModeName::Ipinn).then(|| default_ipinn_kinds(problem)),
            hidden_layers: layers,
            neurons,
            iterations,
            seed: 0,
            scale_n: 10.0,
            lr: 5e-3,
            lr_decay: None,
            alpha_int,
            alpha_bc_d: alpha_bc,
            alpha_bc_n: alpha_bc,
            sampling: SamplingCounts::defaults_for(problem),
            eval_grid,
            log_interval: 100,
            output_dir: None,
            geometry_file: None,
        }
    }

    pub fn num_subdomains(&self) -> usize {
        match self.problem {
            ProblemKind::Poisson1d => 5,
            ProblemKind::Letters2d => 5,
            ProblemKind::Spheres3d => 9,
        }
    }

    pub fn dim(&self) -> usize {
        match self.problem {
            ProblemKind::Poisson1d => 1,
            ProblemKind::Letters2d => 2,
            ProblemKind::Spheres3d => 3,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let m = self.num_subdomains();
        match (self.mode, &self.activations) {
            (ModeName::Ipinn, None) => return Err(field("activations", format!("ipinn mode needs {m} kinds"))),
            (ModeName::Ipinn, Some(k)) if k.len() != m => {
                return Err(field("activations", format!("expected {m} kinds, one per subdomain, found {}", k.len())))
            }
            (ModeName::Adai, Some(_)) => {
                return Err(field("activations", "adai mode takes a single kind in `activation`"))
            }
            _ => {}
        }
        if self.hidden_layers == 0 {
            return Err(field("hidden_layers", "must be at least 1"));
        }
        if self.neurons == 0 {
            return Err(field("neurons", "must be at least 1"));
        }
        if !(self.scale_n.is_finite() && self.scale_n > 0.0) {
            return Err(field("scale_n", "must be positive"));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(field("lr", "must be finite and non-negative"));
        }
        if let Some(d) = self.lr_decay {
            if !(d.rate.is_finite() && d.rate > 0.0) || d.every == 0 {
                return Err(field("lr_decay", "rate must be positive and every at least 1"));
            }
        }
        self.loss_weights()
            .validate()
            .map_err(|e| ConfigError::Parse(e.to_string()))?;
        let s = &self.sampling;
        for (name, v) in [
            ("interior", s.interior),
            ("boundary_per_face", s.boundary_per_face),
            ("interface_per_surface", s.interface_per_surface),
        ] {
            if v == 0 {
                return Err(field("sampling", format!("`{name}` must be positive")));
            }
        }
        if self.eval_grid.len() != self.dim() || self.eval_grid.iter().any(|&n| n < 2) {
            return Err(field("eval_grid", format!("expected {} axis counts, each at least 2", self.dim())));
        }
        if self.log_interval == 0 {
            return Err(field("log_interval", "must be at least 1"));
        }
        if self.geometry_file.is_some() && self.problem != ProblemKind::Letters2d {
            return Err(field("geometry_file", "only the letters2d problem takes a layout"));
        }
        Ok(())
    }

    pub fn architecture(&self) -> Architecture {
        let mode = match self.mode {
            ModeName::Adai => Mode::Adai { kind: self.activation },
            ModeName::Ipinn => Mode::Ipinn { kinds: self.activations.clone().unwrap_or_default() },
        };
        Architecture {
            input_dim: self.dim(),
            hidden_sizes: vec![self.neurons; self.hidden_layers],
            num_subdomains: self.num_subdomains(),
            scale_n: self.scale_n,
            mode,
        }
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights { alpha_bc_d: self.alpha_bc_d, alpha_bc_n: self.alpha_bc_n, alpha_int: self.alpha_int }
    }

    pub fn build_problem(&self) -> Result<ProblemSpec, ConfigError> {
        let layout = match &self.geometry_file {
            Some(path) => Some(LetterLayout::from_json_file(path)?),
            None => None,
        };
        Ok(build_problem(self.problem, layout)?)
    }

    /// Learning rate applied at update `t` (0-based).
    pub fn lr_at(&self, t: usize) -> f64 {
        match self.lr_decay {
            Some(d) => self.lr * d.rate.powf(t as f64 / d.every as f64),
            None => self.lr,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

/// Splits `key=value`.
pub fn parse_override(s: &str) -> Result<(String, String), ConfigError> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(ConfigError::Override(s.to_string())),
    }
}

/// JSON when it parses, a comma list when it contains commas, a string otherwise.
fn override_value(raw: &str) -> Value {
    if let Ok(v) = serde_json::from_str(raw) {
        return v;
    }
    if raw.contains(',') {
        return Value::Array(raw.split(',').map(|p| override_value(p.trim())).collect());
    }
    Value::String(raw.to_string())
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

fn set_path(root: &mut Value, path: &str, value: Value) -> Result<(), ConfigError> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = match cur {
            Value::Object(map) => map,
            _ => return Err(ConfigError::Parse(format!("`{path}`: `{}` is not an object", parts[..i].join(".")))),
        };
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}

fn pick<T: for<'de> Deserialize<'de>>(key: &str, file: Option<&Value>, overrides: &[(String, String)], default: T) -> Result<T, ConfigError> {
    let raw = overrides
        .iter()
        .rev()
        .find(|(k, _)| k == key)
        .map(|(_, v)| override_value(v))
        .or_else(|| file.and_then(|f| f.get(key)).cloned());
    match raw {
        Some(v) => serde_json::from_value(v).map_err(|e| ConfigError::Parse(format!("`{key}`: {e}"))),
        None => Ok(default),
    }
}

/// Resolves a configuration: defaults for the chosen problem and mode, then the
/// file's fields, then `key=value` overrides in order (dotted keys reach nested
/// fields), then strict validation.
pub fn resolve_config(file: Option<&Value>, overrides: &[(String, String)]) -> Result<TrainConfig, ConfigError> {
    if let Some(f) = file {
        if !f.is_object() {
            return Err(ConfigError::Parse("the config file must hold a JSON object".into()));
        }
    }
    let problem = pick("problem", file, overrides, ProblemKind::Poisson1d)?;
    let mode = pick("mode", file, overrides, ModeName::Adai)?;
    let mut merged = serde_json::to_value(TrainConfig::defaults(problem, mode)).expect("defaults serialize");
    if let Some(f) = file {
        merge(&mut merged, f.clone());
    }
    for (k, v) in overrides {
        set_path(&mut merged, k, override_value(v))?;
    }
    let config: TrainConfig = serde_json::from_value(merged).map_err(|e| ConfigError::Parse(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ov(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn problem_alone_gives_the_reference_settings() {
        let c = resolve_config(None, &ov(&[("problem", "letters2d")])).unwrap();
        assert_eq!((c.hidden_layers, c.neurons, c.iterations), (3, 20, 60_000));
        assert_eq!((c.alpha_int, c.alpha_bc_d), (25.0, 20.0));
        assert_eq!(c.sampling.interior, 3679);
        assert_eq!(c.mode, ModeName::Adai);
        let c = resolve_config(None, &ov(&[("problem", "spheres3d")])).unwrap();
        assert_eq!((c.hidden_layers, c.neurons, c.iterations, c.activation), (2, 50, 20_000, ActivationKind::Sigmoid));
        let c = resolve_config(None, &[]).unwrap();
        assert_eq!(c, TrainConfig::defaults(ProblemKind::Poisson1d, ModeName::Adai));
        assert_eq!((c.lr, c.scale_n, c.log_interval, c.alpha_int, c.alpha_bc_d), (5e-3, 10.0, 100, 5.0, 10.0));
    }

    #[test]
    fn ipinn_lists() {
        let c = resolve_config(None, &ov(&[("mode", "ipinn"), ("activations", "tanh,swish,tanh,swish,tanh")])).unwrap();
        assert_eq!(c.activations.unwrap(), default_ipinn_kinds(ProblemKind::Poisson1d));
        let err = resolve_config(None, &ov(&[("mode", "ipinn"), ("activations", "tanh,swish")])).unwrap_err();
        assert!(matches!(err, ConfigError::Field { field: "activations", .. }));
        let err = resolve_config(None, &ov(&[("activations", "tanh,swish,tanh,swish,tanh")])).unwrap_err();
        assert!(matches!(err, ConfigError::Field { field: "activations", .. }));
        let c = resolve_config(None, &ov(&[("problem", "spheres3d"), ("mode", "ipinn")])).unwrap();
        assert_eq!(c.architecture().mode, Mode::Ipinn { kinds: default_ipinn_kinds(ProblemKind::Spheres3d) });
    }

    #[test]
    fn bad_kind_lists_valid_names() {
        let err = resolve_config(None, &ov(&[("activation", "relu")])).unwrap_err().to_string();
        for kind in ActivationKind::ALL {
            assert!(err.contains(kind.name()), "{err}");
        }
    }

    #[test]
    fn file_then_overrides() {
        let file: Value = serde_json::json!({"problem": "poisson1d", "iterations": 10, "sampling": {"interior": 41}});
        let c = resolve_config(Some(&file), &ov(&[("iterations", "20"), ("sampling.boundary_per_face", "3")])).unwrap();
        assert_eq!(c.iterations, 20);
        assert_eq!(c.sampling.interior, 41);
        assert_eq!(c.sampling.boundary_per_face, 3);
        assert_eq!(c.sampling.interface_per_surface, 1);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = resolve_config(None, &ov(&[("neurns", "3")])).unwrap_err().to_string();
        assert!(err.contains("neurns"), "{err}");
        let err = resolve_config(None, &ov(&[("sampling.interior", "0")])).unwrap_err();
        assert!(matches!(err, ConfigError::Field { field: "sampling", .. }));
        assert!(parse_override("novalue").is_err());
        assert_eq!(parse_override("a.b = 3").unwrap(), ("a.b".to_string(), "3".to_string()));
    }

    #[test]
    fn echo_round_trips() {
        let c = resolve_config(None, &ov(&[("lr_decay", r#"{"rate":0.5,"every":1000}"#), ("output_dir", "out/x")])).unwrap();
        let back: TrainConfig = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(c.lr_at(2000), 5e-3 * 0.25);
    }
}
