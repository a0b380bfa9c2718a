use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use hidss_core::feedback::{AggregationConfig, CriteriaCatalog, DEFAULT_CONTESTED_THRESHOLD};
use hidss_core::learning::{CartParams, DEFAULT_HYBRID_WEIGHT, DEFAULT_K_MIN};
use hidss_core::matching::MatchWeights;
use hidss_core::ontology::PatternCatalog;
use hidss_core::repository::Catalogs;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Prefix of environment variables that override config fields. Nested
/// fields are separated by a double underscore: `HIDSS_CART__MAX_DEPTH`.
pub const ENV_PREFIX: &str = "HIDSS_";

/// `HIDSS_` variables read by the binary itself rather than the config.
const RESERVED: [&str; 2] = ["CONFIG", "LOG"];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("parsing config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unknown config override `{0}`")]
    UnknownOverride(String),
    #[error("invalid `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
    #[error("loading catalogs: {0}")]
    Catalog(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RetrainPolicy {
    #[default]
    Manual,
    /// Retrain after every recorded outcome.
    OnOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    /// Pattern catalog file. The bundled catalog is used when absent.
    pub pattern_catalog: Option<PathBuf>,
    /// Criteria catalog file. The bundled catalog is used when absent.
    pub criteria_catalog: Option<PathBuf>,
    /// Mentor list registered at startup (delimited text, see `seed`).
    pub mentors: Option<PathBuf>,
    /// Event log file. The repository lives in memory when absent.
    pub storage: Option<PathBuf>,
    pub fsync: bool,
    /// Model set loaded at startup instead of training from the log.
    pub model_set: Option<PathBuf>,
    pub hybrid_weight: f64,
    pub k_min: usize,
    pub contested_threshold: f64,
    pub trim: bool,
    pub match_weights: MatchWeights,
    pub cart: CartParams,
    pub listen: String,
    pub retrain_policy: RetrainPolicy,
    /// Return predictions to a mentor after their judgment is stored.
    /// Mentors judge blind either way.
    pub reveal_predictions_after_judging: bool,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            pattern_catalog: None,
            criteria_catalog: None,
            mentors: None,
            storage: None,
            fsync: true,
            model_set: None,
            hybrid_weight: DEFAULT_HYBRID_WEIGHT,
            k_min: DEFAULT_K_MIN,
            contested_threshold: DEFAULT_CONTESTED_THRESHOLD,
            trim: true,
            match_weights: MatchWeights::default(),
            cart: CartParams::default(),
            listen: "127.0.0.1:8080".into(),
            retrain_policy: RetrainPolicy::Manual,
            reveal_predictions_after_judging: false,
        }
    }
}

impl ServiceConfig {
    /// Reads the optional config file, applies `HIDSS_` overrides from
    /// `env`, and validates the result.
    pub fn load<I>(path: Option<&Path>, env: I) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read { path: p.into(), source })?;
                serde_json::from_str::<Value>(&text)?
            }
            None => Value::Object(Default::default()),
        };
        // start from defaults so overrides of nested fields have a parent
        let mut merged = serde_json::to_value(ServiceConfig::default())?;
        merge(&mut merged, value.take());
        for (key, raw) in env {
            let Some(name) = key.strip_prefix(ENV_PREFIX) else { continue };
            if RESERVED.contains(&name) {
                continue;
            }
            apply_override(&mut merged, name, &raw)?;
        }
        let config: ServiceConfig = serde_json::from_value(merged)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_env() -> Result<Self, ConfigError> {
        Self::load(None, std::env::vars())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.hybrid_weight) {
            return invalid("hybrid_weight", format!("{} outside [0, 1]", self.hybrid_weight));
        }
        if self.k_min == 0 {
            return invalid("k_min", "must be at least 1".into());
        }
        if self.contested_threshold.is_nan() || self.contested_threshold < 0.0 {
            return invalid("contested_threshold", format!("{} must be >= 0", self.contested_threshold));
        }
        self.match_weights.validate().map_err(|e| ConfigError::Invalid { field: "match_weights", message: e.to_string() })?;
        self.cart.validate().map_err(|e| ConfigError::Invalid { field: "cart", message: e.to_string() })?;
        self.listen_addr()?;
        Ok(())
    }

    pub fn listen_addr(&self) -> Result<SocketAddr, ConfigError> {
        self.listen
            .parse()
            .map_err(|e| ConfigError::Invalid { field: "listen", message: format!("`{}`: {e}", self.listen) })
    }

    pub fn aggregation(&self) -> AggregationConfig {
        AggregationConfig { trim: self.trim, contested_threshold: self.contested_threshold }
    }

    pub fn catalogs(&self) -> Result<Catalogs, ConfigError> {
        let patterns = match &self.pattern_catalog {
            Some(p) => PatternCatalog::load(p).map_err(|e| ConfigError::Catalog(e.to_string()))?,
            None => PatternCatalog::default_catalog(),
        };
        let criteria = match &self.criteria_catalog {
            Some(p) => CriteriaCatalog::load(p).map_err(|e| ConfigError::Catalog(e.to_string()))?,
            None => CriteriaCatalog::default_catalog(),
        };
        Ok(Catalogs { patterns, criteria })
    }
}

fn invalid<T>(field: &'static str, message: String) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid { field, message })
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(base), Value::Object(patch)) => {
            for (k, v) in patch {
                merge(base.entry(k).or_insert(Value::Null), v);
            }
        }
        (slot, v) => *slot = v,
    }
}

fn apply_override(config: &mut Value, name: &str, raw: &str) -> Result<(), ConfigError> {
    let path: Vec<String> = name.split("__").map(str::to_ascii_lowercase).collect();
    let mut slot = &mut *config;
    for key in &path {
        slot = slot
            .as_object_mut()
            .and_then(|o| o.get_mut(key))
            .ok_or_else(|| ConfigError::UnknownOverride(format!("{ENV_PREFIX}{name}")))?;
    }
    // numbers, booleans and null parse as JSON; anything else is a string
    *slot = if raw.eq_ignore_ascii_case("inf") {
        Value::from(f64::MAX)
    } else {
        serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()))
    };
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn defaults_validate() {
        let c = ServiceConfig::load(None, Vec::new()).unwrap();
        assert_eq!(c, ServiceConfig::default());
        assert_eq!(c.aggregation(), AggregationConfig::default());
    }

    #[test]
    fn file_then_env_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hidss.json");
        std::fs::write(&path, r#"{"k_min": 4, "cart": {"max_depth": 3}, "retrain_policy": "on-outcome"}"#).unwrap();
        let c = ServiceConfig::load(
            Some(&path),
            env(&[("HIDSS_CART__MIN_LEAF", "2"), ("HIDSS_LISTEN", "0.0.0.0:9000"), ("PATH", "/bin")]),
        )
        .unwrap();
        assert_eq!(c.k_min, 4);
        assert_eq!(c.cart.max_depth, 3);
        assert_eq!(c.cart.min_leaf, 2);
        assert_eq!(c.listen, "0.0.0.0:9000");
        assert_eq!(c.retrain_policy, RetrainPolicy::OnOutcome);
        assert_eq!(c.cart.min_impurity_decrease, CartParams::default().min_impurity_decrease);
    }

    #[test]
    fn infinite_threshold_disables_contested_flags() {
        let c = ServiceConfig::load(None, env(&[("HIDSS_CONTESTED_THRESHOLD", "inf")])).unwrap();
        assert_eq!(c.contested_threshold, f64::MAX);
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        for (k, v) in [
            ("HIDSS_HYBRID_WEIGHT", "1.5"),
            ("HIDSS_K_MIN", "0"),
            ("HIDSS_CONTESTED_THRESHOLD", "-1"),
            ("HIDSS_MATCH_WEIGHTS__INDUSTRY", "-2"),
            ("HIDSS_CART__MIN_LEAF", "0"),
            ("HIDSS_LISTEN", "nowhere"),
        ] {
            let err = ServiceConfig::load(None, env(&[(k, v)])).unwrap_err();
            assert!(matches!(err, ConfigError::Invalid { .. }), "{k}={v}: {err}");
        }
        assert!(matches!(
            ServiceConfig::load(None, env(&[("HIDSS_NOPE", "1")])),
            Err(ConfigError::UnknownOverride(_))
        ));
    }
}
