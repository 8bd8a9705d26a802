use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::qos::MinMax;

pub const DATASET_NAME: &str = "chestnut";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSummary {
    /// `"synthetic"` or `"files"`.
    pub source: String,
    pub gps_path: Option<String>,
    pub stations_path: Option<String>,
    pub gps_records: usize,
    pub gps_dropped: usize,
    pub stations: usize,
    pub stations_dropped: usize,
    pub station_duplicates: usize,
    pub stations_outside_region: usize,
    pub vehicles_aligned: usize,
    pub excluded_stationary: usize,
    pub excluded_short: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub users: usize,
    pub servers: usize,
    pub services: usize,
    pub invocations: usize,
    pub user_snapshots: usize,
    pub load_rows: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnBounds {
    pub min: f64,
    pub max: f64,
    /// Constant columns normalize to all zeros.
    pub constant: bool,
}

impl From<MinMax> for ColumnBounds {
    fn from(m: MinMax) -> Self {
        ColumnBounds {
            min: m.min,
            max: m.max,
            constant: m.is_constant(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub dataset: String,
    pub version: String,
    pub seed: u64,
    pub config: SimConfig,
    pub inputs: InputSummary,
    pub counts: Counts,
    pub normalization: BTreeMap<String, ColumnBounds>,
}
