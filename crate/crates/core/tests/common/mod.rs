#![allow(dead_code)]

use chestnut_core::config::SimConfig;
use chestnut_core::ingest::RawGpsRecord;
use chestnut_core::mobility::UserSnapshot;

/// 50 synthetic vehicles, `delta_t = 30`, `t_max = 3600`.
pub fn desk(seed: u64) -> SimConfig {
    SimConfig {
        seed,
        ..SimConfig::desk()
    }
}

/// Enough traffic for several thousand invocations.
pub fn medium(seed: u64) -> SimConfig {
    SimConfig {
        seed,
        n_u: 150,
        synth_vehicles: 250,
        synth_stations: 1500,
        services_per_snapshot: 3,
        ..SimConfig::default()
    }
}

/// Last record of every `delta_t` window below the cap, by direct scan over
/// window indices.
pub fn brute_align(records: &[RawGpsRecord], delta_t: i64, t_max: i64) -> Vec<(u32, f64, f64)> {
    let Some(t0) = records.iter().map(|r| r.gps_time).min() else {
        return Vec::new();
    };
    let windows = t_max / delta_t;
    let mut out = Vec::new();
    for w in 0..windows {
        let lo = t0 + w * delta_t;
        let hi = lo + delta_t;
        if let Some(r) = records
            .iter()
            .rev()
            .find(|r| r.gps_time >= lo && r.gps_time < hi)
        {
            out.push((w as u32, r.pos.lon, r.pos.lat));
        }
    }
    out
}

pub fn snapshot_keys(snaps: &[UserSnapshot]) -> Vec<(u32, f64, f64)> {
    snaps.iter().map(|s| (s.t, s.pos.lon, s.pos.lat)).collect()
}
