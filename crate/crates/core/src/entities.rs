//! Edge-server and service populations.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::geo::GeoPoint;
use crate::ingest::RawStationRecord;
use crate::rng;

/// Index of each resource in level and utilization triples.
pub const COMPUTING: usize = 0;
pub const STORAGE: usize = 1;
pub const BANDWIDTH: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeServer {
    pub id: u32,
    pub pos: GeoPoint,
    /// Coverage radius as a great-circle distance in whole meters.
    pub radius_m: f64,
    /// Supply level per resource, each in `[1, P]`.
    pub supply: [u32; 3],
}

impl EdgeServer {
    pub fn supply_sum(&self) -> u32 {
        self.supply.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceSpec {
    pub sid: u32,
    /// Preference (demand) level per resource, each in `[1, P]`.
    pub pref: [u32; 3],
}

impl ServiceSpec {
    pub fn pref_sum(&self) -> u32 {
        self.pref.iter().sum()
    }
}

pub fn in_region(p: GeoPoint, cfg: &SimConfig) -> bool {
    (cfg.phi_min..=cfg.phi_max).contains(&p.lat)
        && (cfg.lambda_min..=cfg.lambda_max).contains(&p.lon)
}

fn levels<R: Rng>(rng: &mut R, p: u32) -> [u32; 3] {
    [
        rng.random_range(1..=p),
        rng.random_range(1..=p),
        rng.random_range(1..=p),
    ]
}

/// Keeps the stations inside the region and gives each a radius and supply
/// levels. Ids follow input order.
pub fn make_servers(
    stations: &[RawStationRecord],
    cfg: &SimConfig,
    seed: u64,
) -> Result<Vec<EdgeServer>> {
    let mut rng = rng::stream(seed, "servers", 0);
    let servers: Vec<EdgeServer> = stations
        .iter()
        .filter(|s| in_region(s.pos, cfg))
        .enumerate()
        .map(|(id, s)| {
            let radius = rng.random_range(cfg.r_min..=cfg.r_max);
            EdgeServer {
                id: id as u32,
                pos: s.pos,
                radius_m: f64::from(radius),
                supply: levels(&mut rng, cfg.p),
            }
        })
        .collect();
    if servers.is_empty() {
        return Err(Error::Config(format!(
            "none of the {} stations lies inside the configured region",
            stations.len()
        )));
    }
    Ok(servers)
}

pub fn make_services(cfg: &SimConfig, seed: u64) -> Vec<ServiceSpec> {
    let mut rng = rng::stream(seed, "services", 0);
    (0..cfg.n_s)
        .map(|sid| ServiceSpec {
            sid: sid as u32,
            pref: levels(&mut rng, cfg.p),
        })
        .collect()
}
