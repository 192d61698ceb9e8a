use std::path::Path;

use clap::Args;
use dane::training::{EdgeScope, TrainConfig};

use crate::CliError;

/// Training hyperparameter flags. Each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigFlags {
    /// key=value file with training settings
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub lookback: Option<usize>,
    #[arg(long)]
    pub negatives: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub edge_scope: Option<EdgeScope>,
    #[arg(long)]
    pub max_neighbors: Option<usize>,
    #[arg(long)]
    pub fine_tune_steps: Option<usize>,
    /// Train without the activeness gate
    #[arg(long)]
    pub no_activeness: bool,
    /// Train without attention and extrapolation
    #[arg(long)]
    pub no_temporal: bool,
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("config key {key}: invalid value {value:?}")))
}

fn apply(cfg: &mut TrainConfig, key: &str, value: &str) -> Result<(), CliError> {
    match key {
        "dim" | "d" => cfg.dim = parse(key, value)?,
        "layers" | "L" => cfg.layers = parse(key, value)?,
        "lookback" | "K" => cfg.lookback = parse(key, value)?,
        "negatives" | "R" => cfg.negatives = parse(key, value)?,
        "batch_size" | "batch" => cfg.batch_size = parse(key, value)?,
        "learning_rate" | "lr" => cfg.learning_rate = parse(key, value)?,
        "epochs" => cfg.epochs = parse(key, value)?,
        "seed" => cfg.seed = parse(key, value)?,
        "no_activeness" => cfg.no_activeness = parse(key, value)?,
        "no_temporal" => cfg.no_temporal = parse(key, value)?,
        "edge_scope" => cfg.edge_scope = parse(key, value)?,
        "max_neighbors" => cfg.max_neighbors = Some(parse(key, value)?),
        "fine_tune_steps" => cfg.fine_tune_steps = parse(key, value)?,
        _ => return Err(CliError::Usage(format!("unknown config key {key:?}"))),
    }
    Ok(())
}

/// Parses `key=value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str, cfg: &mut TrainConfig) -> Result<(), CliError> {
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value, got {raw:?}", i + 1)))?;
        apply(cfg, key.trim(), value.trim())?;
    }
    Ok(())
}

/// Defaults, then the file, then flags; the result is validated.
pub fn resolve_config(file: Option<&Path>, flags: &ConfigFlags, seed: Option<u64>) -> Result<TrainConfig, CliError> {
    let mut cfg = TrainConfig::default();
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        parse_config_text(&text, &mut cfg)?;
    }
    let set = |slot: &mut usize, v: Option<usize>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    set(&mut cfg.dim, flags.dim);
    set(&mut cfg.layers, flags.layers);
    set(&mut cfg.lookback, flags.lookback);
    set(&mut cfg.negatives, flags.negatives);
    set(&mut cfg.batch_size, flags.batch_size);
    set(&mut cfg.epochs, flags.epochs);
    set(&mut cfg.fine_tune_steps, flags.fine_tune_steps);
    if let Some(lr) = flags.learning_rate {
        cfg.learning_rate = lr;
    }
    if let Some(scope) = flags.edge_scope {
        cfg.edge_scope = scope;
    }
    if flags.max_neighbors.is_some() {
        cfg.max_neighbors = flags.max_neighbors;
    }
    cfg.no_activeness |= flags.no_activeness;
    cfg.no_temporal |= flags.no_temporal;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_file(text: &str, flags: &ConfigFlags) -> Result<TrainConfig, CliError> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.cfg");
        std::fs::write(&path, text).unwrap();
        resolve_config(Some(&path), flags, None)
    }

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(with_file("", &ConfigFlags::default()).unwrap(), TrainConfig::default());
        let d = TrainConfig::default();
        assert_eq!((d.dim, d.layers, d.lookback, d.negatives, d.batch_size), (100, 3, 3, 1, 50));
        assert_eq!(d.learning_rate, 1e-4);
    }

    #[test]
    fn flags_override_file() {
        let flags = ConfigFlags {
            layers: Some(4),
            ..Default::default()
        };
        let cfg = with_file("# comment\nL=2\nlr = 0.01\n", &flags).unwrap();
        assert_eq!(cfg.layers, 4);
        assert_eq!(cfg.learning_rate, 0.01);
    }

    #[test]
    fn bad_input_is_a_usage_error() {
        let zero = ConfigFlags {
            layers: Some(0),
            ..Default::default()
        };
        assert!(matches!(resolve_config(None, &zero, None), Err(CliError::Usage(_))));
        for text in ["colour=blue", "dim=ten", "dim"] {
            assert!(matches!(with_file(text, &ConfigFlags::default()), Err(CliError::Usage(_))), "{text}");
        }
    }
}
