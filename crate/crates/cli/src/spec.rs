//! Experiment identifiers and the fully-resolved run specification.

use std::fmt;
use std::path::PathBuf;

use serde::Serialize;

use crate::config;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentId {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Table1,
    Table2,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 8] = [
        ExperimentId::Fig1,
        ExperimentId::Fig2,
        ExperimentId::Fig3,
        ExperimentId::Fig4,
        ExperimentId::Fig5,
        ExperimentId::Fig6,
        ExperimentId::Table1,
        ExperimentId::Table2,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentId::Fig1 => "fig1",
            ExperimentId::Fig2 => "fig2",
            ExperimentId::Fig3 => "fig3",
            ExperimentId::Fig4 => "fig4",
            ExperimentId::Fig5 => "fig5",
            ExperimentId::Fig6 => "fig6",
            ExperimentId::Table1 => "table1",
            ExperimentId::Table2 => "table2",
        }
    }

    pub fn parse(s: &str) -> Option<ExperimentId> {
        Self::ALL.into_iter().find(|id| id.name() == s)
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A fully-resolved experiment run. Identical specs produce byte-identical
/// output files. The optional lists fall back to per-experiment defaults
/// when not overridden on the command line.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    pub seed: u64,
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    pub epsilons: Option<Vec<f64>>,
    pub bim_steps: Option<Vec<usize>>,
    pub lambdas: Option<Vec<f64>>,
    pub train_cap: usize,
    pub test_cap: usize,
    pub classes: Vec<u8>,
}

impl ExperimentSpec {
    pub fn new(id: ExperimentId, data_dir: PathBuf, out_dir: PathBuf) -> Self {
        Self {
            id,
            seed: 7,
            data_dir,
            out_dir,
            epsilons: None,
            bim_steps: None,
            lambdas: None,
            train_cap: config::DEFAULT_TRAIN_CAP,
            test_cap: config::DEFAULT_TEST_CAP,
            classes: config::DEFAULT_CLASSES.to_vec(),
        }
    }

    pub fn epsilons_or(&self, default: &[f64]) -> Vec<f64> {
        self.epsilons.clone().unwrap_or_else(|| default.to_vec())
    }

    pub fn bim_steps_or(&self, default: &[usize]) -> Vec<usize> {
        self.bim_steps.clone().unwrap_or_else(|| default.to_vec())
    }

    pub fn lambdas_or(&self, default: &[f64]) -> Vec<f64> {
        self.lambdas.clone().unwrap_or_else(|| default.to_vec())
    }

    /// The configuration payload recorded in results and hashed into the
    /// manifest. Deliberately excludes the directories so a rerun elsewhere
    /// stays byte-identical.
    pub fn canonical(&self) -> CanonicalSpec {
        CanonicalSpec {
            experiment: self.id,
            seed: self.seed,
            epsilons: self.epsilons.clone(),
            bim_steps: self.bim_steps.clone(),
            lambdas: self.lambdas.clone(),
            train_cap: self.train_cap,
            test_cap: self.test_cap,
            classes: self.classes.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CanonicalSpec {
    pub experiment: ExperimentId,
    pub seed: u64,
    pub epsilons: Option<Vec<f64>>,
    pub bim_steps: Option<Vec<usize>>,
    pub lambdas: Option<Vec<f64>>,
    pub train_cap: usize,
    pub test_cap: usize,
    pub classes: Vec<u8>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trips_all_ids() {
        for id in ExperimentId::ALL {
            assert_eq!(ExperimentId::parse(id.name()), Some(id));
        }
        assert_eq!(ExperimentId::parse("fig9"), None);
    }
}
