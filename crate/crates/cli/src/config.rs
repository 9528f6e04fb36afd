use std::path::Path;

use pignn::noise::NoiseSpec;
use pignn::trainer::{Beta, Method, TrainConfig};
use serde::Deserialize;
use serde_json::Value;

use crate::args::TrainArgs;
use crate::error::{CliError, CliResult};

pub const SEED_ENV: &str = "PIGNN_SEED";

/// Configuration file accepted by `run` and `mask-report`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub method: Option<Method>,
    /// `KIND:RATE`, e.g. `sym:0.6`.
    pub noise: Option<String>,
    pub noise_seed: Option<u64>,
    pub clean_val: Option<bool>,
    /// Partial [`TrainConfig`]; missing keys keep their defaults.
    #[serde(default)]
    pub train: Option<Value>,
}

impl RunConfigFile {
    pub fn read(path: &Path) -> CliResult<RunConfigFile> {
        read_json(path)
    }

    pub fn noise(&self) -> CliResult<Option<NoiseSpec>> {
        self.noise
            .as_deref()
            .map(|s| s.parse().map_err(CliError::from))
            .transpose()
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

/// Default seed: `$PIGNN_SEED` when set, else the built-in default.
pub fn default_seed() -> CliResult<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("{SEED_ENV}=`{v}` is not an integer seed"))),
        Err(_) => Ok(TrainConfig::default().seed),
    }
}

/// Built-in defaults, then the environment seed, then `overrides` (a partial
/// JSON object), then command-line flags.
pub fn train_config(overrides: Option<&Value>, flags: &TrainArgs) -> CliResult<TrainConfig> {
    let mut cfg = TrainConfig {
        seed: default_seed()?,
        ..TrainConfig::default()
    };
    if let Some(patch) = overrides {
        let Value::Object(patch) = patch else {
            return Err(CliError::usage("`train` must be a JSON object"));
        };
        let mut merged = serde_json::to_value(&cfg).expect("config serializes");
        let obj = merged.as_object_mut().expect("config is an object");
        for (k, v) in patch {
            obj.insert(k.clone(), v.clone());
        }
        cfg = serde_json::from_value(merged)
            .map_err(|e| CliError::usage(format!("bad `train` section: {e}")))?;
    }
    flags.apply(&mut cfg);
    Ok(cfg)
}

/// Apply the method on top of `cfg`, rejecting contradictory settings.
pub fn configure_method(method: Method, cfg: TrainConfig) -> CliResult<TrainConfig> {
    if method == Method::Vanilla {
        if let Beta::Fixed(b) = cfg.beta {
            if b != 0.0 {
                return Err(CliError::usage(format!(
                    "method vanilla has no pair loss; drop --beta {b}"
                )));
            }
        }
    }
    let cfg = method.configure(cfg);
    cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn layering() {
        let patch = json!({"epochs": 10, "pretrain_epochs": 3, "beta": 0.5});
        let flags = TrainArgs {
            epochs: Some(20),
            ..Default::default()
        };
        let cfg = train_config(Some(&patch), &flags).unwrap();
        assert_eq!(cfg.epochs, 20);
        assert_eq!(cfg.pretrain_epochs, 3);
        assert_eq!(cfg.beta, Beta::Fixed(0.5));
    }

    #[test]
    fn unknown_keys_rejected() {
        let patch = json!({"epoch": 10});
        assert!(train_config(Some(&patch), &TrainArgs::default()).is_err());
    }

    #[test]
    fn method_conflicts() {
        let cfg = TrainConfig {
            beta: Beta::Fixed(1.0),
            ..TrainConfig::default()
        };
        assert!(configure_method(Method::Vanilla, cfg.clone()).is_err());
        assert!(configure_method(Method::PiGnn, cfg).is_ok());
        let bad = TrainConfig {
            epochs: 5,
            pretrain_epochs: 6,
            ..TrainConfig::default()
        };
        let err = configure_method(Method::PiGnn, bad).unwrap_err();
        assert_eq!(err.exit_code(), crate::error::EXIT_USAGE);
    }
}
