use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::experiment::{ClientBytes, RunReport};
use crate::error::{Error, Result};

/// Which channel's bytes a figure plots.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FigureChannel {
    C2c,
    C2s,
    #[default]
    Both,
}

impl FigureChannel {
    fn pick(self, c: &ClientBytes) -> u64 {
        match self {
            FigureChannel::C2c => c.c2c,
            FigureChannel::C2s => c.c2s,
            FigureChannel::Both => c.c2c + c.c2s,
        }
    }
}

impl std::str::FromStr for FigureChannel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "c2c" => Ok(FigureChannel::C2c),
            "c2s" => Ok(FigureChannel::C2s),
            "both" => Ok(FigureChannel::Both),
            _ => Err(Error::Config(format!("unknown channel {s:?} (expected c2c, c2s or both)"))),
        }
    }
}

/// File stem of a report's curve, e.g. `retexo-gcn_400` or `gcn_es`.
pub fn figure_stem(report: &RunReport) -> String {
    let suffix = if report.early_stopped() {
        "es".to_string()
    } else {
        report.config.rounds.to_string()
    };
    format!("{}_{suffix}", report.label)
}

/// Per-client megabytes of the report's first seed, largest first.
pub fn client_volumes_mb(report: &RunReport, channel: FigureChannel) -> Vec<f64> {
    let mut bytes: Vec<u64> = report
        .seeds
        .first()
        .map(|s| s.clients.iter().map(|c| channel.pick(c)).collect())
        .unwrap_or_default();
    bytes.sort_unstable_by(|a, b| b.cmp(a));
    bytes.into_iter().map(|b| b as f64 / 1e6).collect()
}

pub fn figure_csv(volumes_mb: &[f64]) -> String {
    let mut out = String::from("Sno,node\n");
    for (i, v) in volumes_mb.iter().enumerate() {
        writeln!(out, "{},{v}", i + 1).unwrap();
    }
    out
}

/// Writes one `Sno,node` CSV per report into `dir` and returns the paths.
/// An empty report list writes nothing.
pub fn emit_figures_data(reports: &[RunReport], dir: &Path, channel: FigureChannel) -> Result<Vec<PathBuf>> {
    if reports.is_empty() {
        return Ok(Vec::new());
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let mut paths = Vec::with_capacity(reports.len());
    for r in reports {
        let path = dir.join(format!("{}.csv", figure_stem(r)));
        std::fs::write(&path, figure_csv(&client_volumes_mb(r, channel))).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        paths.push(path);
    }
    Ok(paths)
}
