//! Per-episode metrics CSV. Each row is written and flushed as soon as its
//! episode finishes, so an interrupted run leaves only complete rows.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const METRICS_HEADER: &str = "episode,mean_normalized_reward,mean_policy_loss,mean_critic_loss,wall_seconds";

/// One metrics line. `episode` counts from 1; losses are NaN for episodes
/// that ran no update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub episode: usize,
    pub mean_normalized_reward: f64,
    pub mean_policy_loss: f64,
    pub mean_critic_loss: f64,
    pub wall_seconds: f64,
}

pub struct MetricsWriter {
    out: BufWriter<File>,
}

impl MetricsWriter {
    /// Creates (truncating) `path` and writes the header.
    pub fn create(path: &Path) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{METRICS_HEADER}")?;
        out.flush()?;
        Ok(Self { out })
    }

    pub fn append(&mut self, row: &MetricsRow) -> Result<()> {
        writeln!(
            self.out,
            "{},{},{},{},{}",
            row.episode, row.mean_normalized_reward, row.mean_policy_loss, row.mean_critic_loss, row.wall_seconds
        )?;
        self.out.flush()?;
        self.out.get_ref().sync_data()?;
        Ok(())
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Parse {
        line: 0,
        reason: e.to_string(),
    })?;
    let header = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            reason: e.to_string(),
        })?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != METRICS_HEADER {
        return Err(Error::Parse {
            line: 1,
            reason: format!("expected header {METRICS_HEADER:?}, found {header:?}"),
        });
    }
    reader
        .deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| Error::Parse {
                line: i + 2,
                reason: e.to_string(),
            })
        })
        .collect()
}
