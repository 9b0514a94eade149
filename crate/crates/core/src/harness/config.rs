//! Run configuration: a TOML file of sections mirroring the domain types.
//!
//! Precedence per key: `--set key=value` > `AUCTION_DDPG_OUT` (output
//! directory only) > config file > built-in default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::data::{ColumnSpec, SplitSpec, WINDOW_HOURS};
use crate::ddpg::Hyperparameters;
use crate::error::{Error, Result};
use crate::market::MarketConfig;

pub const OUTPUT_ENV: &str = "AUCTION_DDPG_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Price file; relative paths resolve against the config file's directory.
    pub path: PathBuf,
    pub date_column: String,
    pub hour_column: String,
    pub price_column: String,
    pub window_hours: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        let cols = ColumnSpec::default();
        Self {
            path: PathBuf::from("pun.csv"),
            date_column: cols.date,
            hour_column: cols.hour,
            price_column: cols.price,
            window_hours: WINDOW_HOURS,
        }
    }
}

impl DataConfig {
    pub fn columns(&self) -> ColumnSpec {
        ColumnSpec {
            date: self.date_column.clone(),
            hour: self.hour_column.clone(),
            price: self.price_column.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Write `checkpoint_latest.json` every this many episodes; 0 disables.
    pub checkpoint_every: usize,
    /// When false the `wall_seconds` column is written as 0 so that runs
    /// with equal seeds produce byte-identical metrics.
    pub record_wall_time: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("runs/default"),
            checkpoint_every: 100,
            record_wall_time: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data: DataConfig,
    pub split: SplitSpec,
    pub market: MarketConfig,
    pub ddpg: Hyperparameters,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.data.window_hours == 0 {
            return Err(Error::Config("data.window_hours must be positive".into()));
        }
        self.split.validate()?;
        self.market.validate()?;
        self.ddpg.validate()
    }

    /// Reads `path`, then applies the output env var and `overrides`.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let file: Table = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let env_out = std::env::var_os(OUTPUT_ENV).map(PathBuf::from);
        let mut config = Self::resolve(file, env_out.as_deref(), overrides)?;
        if config.data.path.is_relative() {
            if let Some(dir) = path.parent() {
                config.data.path = dir.join(&config.data.path);
            }
        }
        Ok(config)
    }

    /// Layers defaults, file values, the output override and `key=value`
    /// overrides, then validates.
    pub fn resolve(file: Table, env_out: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut merged = Table::try_from(Self::default()).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut merged, file);
        if let Some(dir) = env_out {
            set_key(
                &mut merged,
                "output.dir",
                Value::String(dir.to_string_lossy().into_owned()),
            )?;
        }
        for item in overrides {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {item:?} is not key=value")))?;
            set_key(&mut merged, key.trim(), parse_value(raw.trim()))?;
        }
        let config: Self = Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn parse_value(raw: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Sets `section.key`, or a bare `key` that names exactly one section's field.
fn set_key(table: &mut Table, key: &str, value: Value) -> Result<()> {
    let (section, field) = match key.split_once('.') {
        Some((s, f)) => (s.to_string(), f.to_string()),
        None => {
            let owners: Vec<&String> = table
                .iter()
                .filter(|(_, v)| v.as_table().is_some_and(|t| t.contains_key(key)))
                .map(|(k, _)| k)
                .collect();
            match owners.as_slice() {
                [one] => ((*one).clone(), key.to_string()),
                [] => return Err(Error::Config(format!("unknown configuration key {key:?}"))),
                many => {
                    return Err(Error::Config(format!(
                        "key {key:?} is ambiguous between sections {many:?}; use section.key"
                    )))
                }
            }
        }
    };
    let sec = table
        .get_mut(&section)
        .and_then(Value::as_table_mut)
        .ok_or_else(|| Error::Config(format!("unknown configuration section {section:?}")))?;
    let value = match (sec.get(&field), value) {
        // "2" for a float field, "1e-3" parsed as float for an int field stays an error.
        (Some(Value::Float(_)), Value::Integer(i)) => Value::Float(i as f64),
        (Some(Value::String(_)), Value::Integer(i)) => Value::String(i.to_string()),
        (Some(Value::String(_)), Value::Float(f)) => Value::String(f.to_string()),
        (_, v) => v,
    };
    sec.insert(field, value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(text: &str) -> Table {
        toml::from_str(text).unwrap()
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = RunConfig::default();
        let back = RunConfig::resolve(file(&c.to_toml().unwrap()), None, &[]).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn precedence_per_key() {
        let f = file("[ddpg]\nepisodes = 50\nbatch_size = 32\n[output]\ndir = \"from_file\"\n");
        let c = RunConfig::resolve(f.clone(), None, &[]).unwrap();
        assert_eq!((c.ddpg.episodes, c.ddpg.batch_size, c.ddpg.episode_days), (50, 32, 30));
        assert_eq!(c.output.dir, PathBuf::from("from_file"));

        let c = RunConfig::resolve(f.clone(), Some(Path::new("from_env")), &["episodes=7".into()]).unwrap();
        assert_eq!((c.ddpg.episodes, c.ddpg.batch_size), (7, 32));
        assert_eq!(c.output.dir, PathBuf::from("from_env"));

        let c = RunConfig::resolve(f, Some(Path::new("from_env")), &["output.dir=from_cli".into()]).unwrap();
        assert_eq!(c.output.dir, PathBuf::from("from_cli"));
    }

    #[test]
    fn override_values_are_typed() {
        let c = RunConfig::resolve(
            Table::new(),
            None,
            &[
                "ddpg.gamma=0".into(),
                "market.costs=[5, 15]".into(),
                "market.capacities=[1.0, 2.0]".into(),
                "data.price_column=Prezzo".into(),
                "record_wall_time=false".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.ddpg.gamma, 0.0);
        assert_eq!(c.market.costs, vec![5.0, 15.0]);
        assert_eq!(c.data.price_column, "Prezzo");
        assert!(!c.output.record_wall_time);
    }

    #[test]
    fn bad_keys_and_values() {
        assert!(
            RunConfig::resolve(Table::new(), None, &["seed=3".into()]).is_err(),
            "ambiguous"
        );
        assert!(RunConfig::resolve(Table::new(), None, &["nonsense=3".into()]).is_err());
        assert!(RunConfig::resolve(Table::new(), None, &["episodes".into()]).is_err());
        assert!(RunConfig::resolve(Table::new(), None, &["ddpg.tau=0".into()]).is_err());
        assert!(RunConfig::resolve(file("[ddpg]\nunknown = 1\n"), None, &[]).is_err());
        assert!(RunConfig::resolve(Table::new(), None, &["episodes=-1".into()]).is_err());
    }
}
