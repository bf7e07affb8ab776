//! Parameter grids over the filter settings and seeds, run in parallel.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::{Estimator, ExperimentConfig};
use crate::harness::experiment::run_experiment;

/// Values swept by [`run_sweep`]. Every combination is run once per seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepGrid {
    /// Kalman process noise outside detected changes.
    pub q_minus: Vec<f64>,
    /// Kalman detector thresholds.
    pub kf_threshold: Vec<f64>,
    /// Network detector thresholds.
    pub nn_threshold: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            q_minus: vec![0.0, 0.01, 0.1],
            kf_threshold: vec![30.0],
            nn_threshold: vec![20.0],
            seeds: (1..=5).collect(),
        }
    }
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        for (field, empty) in [
            ("sweep.q_minus", self.q_minus.is_empty()),
            ("sweep.kf_threshold", self.kf_threshold.is_empty()),
            ("sweep.nn_threshold", self.nn_threshold.is_empty()),
            ("sweep.seeds", self.seeds.is_empty()),
        ] {
            if empty {
                return Err(Error::config(field, "needs at least one value"));
            }
        }
        Ok(())
    }

    /// Configurations in row order: seeds vary fastest.
    pub fn configs(&self, base: &ExperimentConfig) -> Vec<ExperimentConfig> {
        let mut out = Vec::new();
        for &q in &self.q_minus {
            for &ke in &self.kf_threshold {
                for &ne in &self.nn_threshold {
                    for &seed in &self.seeds {
                        let mut cfg = base.clone().with_seed(seed);
                        cfg.kf.q_minus = q;
                        cfg.kf.cusum_e = ke;
                        cfg.nn.e_d = ne;
                        out.push(cfg);
                    }
                }
            }
        }
        out
    }
}

/// Segment-averaged results of one estimator in one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub q_minus: f64,
    pub kf_threshold: f64,
    pub nn_threshold: f64,
    pub seed: u64,
    pub estimator: Estimator,
    pub mean_rmse: f64,
    pub max_rmse: f64,
    /// Segments whose estimate converged.
    pub converged: usize,
    pub segments: usize,
    /// Mean trigger delay over segments after the first that triggered.
    pub mean_detection_delay: Option<f64>,
    pub late_triggers: usize,
}

fn summarize(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let exp = run_experiment(cfg)?;
    let rows = cfg
        .estimators
        .iter()
        .map(|&e| {
            let ms: Vec<_> = exp.metrics.iter().filter_map(|s| s.get(e)).collect();
            let rmse: Vec<f64> = ms.iter().map(|m| m.rmse_tail).collect();
            let delays: Vec<f64> = ms
                .iter()
                .skip(1)
                .filter_map(|m| m.detection_delay.map(|d| d as f64))
                .collect();
            SweepRow {
                q_minus: cfg.kf.q_minus,
                kf_threshold: cfg.kf.cusum_e,
                nn_threshold: cfg.nn.e_d,
                seed: cfg.seed,
                estimator: e,
                mean_rmse: rmse.iter().sum::<f64>() / rmse.len() as f64,
                max_rmse: rmse.iter().copied().fold(0.0, f64::max),
                converged: ms.iter().filter(|m| m.convergence_slots.is_some()).count(),
                segments: ms.len(),
                mean_detection_delay: (!delays.is_empty())
                    .then(|| delays.iter().sum::<f64>() / delays.len() as f64),
                late_triggers: ms.iter().map(|m| m.late_triggers).sum(),
            }
        })
        .collect();
    Ok(rows)
}

/// Runs every grid cell, one worker per configuration. Rows come back in
/// grid order regardless of scheduling.
pub fn run_sweep(base: &ExperimentConfig, grid: &SweepGrid) -> Result<Vec<SweepRow>> {
    grid.validate()?;
    base.validate()?;
    let cells: Vec<Vec<SweepRow>> = grid
        .configs(base)
        .par_iter()
        .map(summarize)
        .collect::<Result<_>>()?;
    Ok(cells.into_iter().flatten().collect())
}

pub fn emit_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let to_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_owned(),
            message: format!("{other:?}"),
        },
    };
    let mut w = csv::Writer::from_path(path).map_err(to_err)?;
    for r in rows {
        w.serialize(r).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dcf::LoadSchedule;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            schedule: Some(LoadSchedule {
                segments: vec![(4, 150), (8, 150)],
            }),
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn grid_order_and_size() {
        let grid = SweepGrid {
            q_minus: vec![0.0, 0.5],
            kf_threshold: vec![10.0, 30.0],
            nn_threshold: vec![20.0],
            seeds: vec![3, 4],
        };
        let cfgs = grid.configs(&small());
        assert_eq!(cfgs.len(), 8);
        assert_eq!(
            (cfgs[0].kf.q_minus, cfgs[0].kf.cusum_e, cfgs[0].seed),
            (0.0, 10.0, 3)
        );
        assert_eq!((cfgs[1].seed, cfgs[2].kf.cusum_e), (4, 30.0));
        assert_eq!(cfgs[7].kf.q_minus, 0.5);
    }

    #[test]
    fn parallel_rows_match_sequential_runs() {
        let grid = SweepGrid {
            q_minus: vec![0.0, 0.2],
            seeds: vec![1, 2],
            ..SweepGrid::default()
        };
        let rows = run_sweep(&small(), &grid).unwrap();
        assert_eq!(rows.len(), 4 * 3);
        let seq: Vec<SweepRow> = grid
            .configs(&small())
            .iter()
            .flat_map(|c| summarize(c).unwrap())
            .collect();
        assert_eq!(rows, seq);
        assert!(rows.iter().all(|r| r.segments == 2 && r.mean_rmse >= 0.0));
    }

    #[test]
    fn empty_axis_is_rejected() {
        let grid = SweepGrid {
            seeds: vec![],
            ..SweepGrid::default()
        };
        assert!(run_sweep(&small(), &grid)
            .unwrap_err()
            .to_string()
            .contains("sweep.seeds"));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let grid = SweepGrid {
            q_minus: vec![0.0],
            seeds: vec![1],
            ..SweepGrid::default()
        };
        let rows = run_sweep(&small(), &grid).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        emit_sweep_csv(&rows, &path).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert!(text.starts_with("q_minus,kf_threshold,nn_threshold,seed,estimator,"));
        assert_eq!(text.lines().count(), 1 + rows.len());
    }
}
