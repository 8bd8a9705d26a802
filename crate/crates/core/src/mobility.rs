//! Temporal alignment of raw traces and active-user selection.
//!
//! Each vehicle runs on its own clock: its first fix is local second 0 and
//! window `w` covers local seconds `[w*dt, (w+1)*dt)`. The last fix inside a
//! window becomes the snapshot for system timestamp `w`; empty windows are
//! missing data. Only windows `w < floor(t_max / dt)` are kept, so a user
//! never has more than `floor(t_max / dt)` timestamps.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::coverage::CoverageIndex;
use crate::error::{Error, Result};
use crate::geo::{GeoConstants, GeoPoint};
use crate::ingest::{RawGpsRecord, VehicleId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserSnapshot {
    pub uid: u32,
    pub t: u32,
    pub pos: GeoPoint,
    pub speed_kmh: f64,
    pub direction_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivityProfile {
    /// Number of distinct timestamps.
    pub tau: usize,
    /// Great-circle meters between the first and last position.
    pub distance_m: f64,
    /// Covering-server count summed over snapshots.
    pub sum_omega: usize,
    /// Number of snapshots covered by at least one server.
    pub sum_nu: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleTrack {
    pub vehicle: VehicleId,
    pub snapshots: Vec<UserSnapshot>,
}

/// Aligns one vehicle's time-sorted records. Snapshots carry `uid = 0`
/// until selection assigns real ids.
pub fn align(records: &[RawGpsRecord], cfg: &SimConfig) -> Vec<UserSnapshot> {
    let Some(first) = records.first() else {
        return Vec::new();
    };
    let dt = i64::from(cfg.delta_t);
    let windows = i64::from(cfg.window_count());
    let mut out: Vec<UserSnapshot> = Vec::new();
    for r in records {
        let local = r.gps_time - first.gps_time;
        debug_assert!(local >= 0, "records must be sorted by time");
        let w = local.div_euclid(dt);
        if w >= windows {
            break;
        }
        let snap = UserSnapshot {
            uid: 0,
            t: w as u32,
            pos: r.pos,
            speed_kmh: r.speed_kmh,
            direction_deg: r.direction_deg,
        };
        match out.last_mut() {
            Some(last) if last.t == snap.t => *last = snap,
            _ => out.push(snap),
        }
    }
    out
}

/// Splits a `(vehicle, time)`-sorted log into per-vehicle aligned tracks.
pub fn align_all(records: &[RawGpsRecord], cfg: &SimConfig) -> Vec<VehicleTrack> {
    records
        .chunk_by(|a, b| a.vehicle == b.vehicle)
        .map(|chunk| VehicleTrack {
            vehicle: chunk[0].vehicle.clone(),
            snapshots: align(chunk, cfg),
        })
        .filter(|t| !t.snapshots.is_empty())
        .collect()
}

pub fn profile(
    snapshots: &[UserSnapshot],
    index: &CoverageIndex<'_>,
    geo: &GeoConstants,
) -> ActivityProfile {
    let (Some(first), Some(last)) = (snapshots.first(), snapshots.last()) else {
        return ActivityProfile {
            tau: 0,
            distance_m: 0.0,
            sum_omega: 0,
            sum_nu: 0,
        };
    };
    let mut sum_omega = 0;
    let mut sum_nu = 0;
    for s in snapshots {
        let omega = index.count(s.pos);
        sum_omega += omega;
        sum_nu += usize::from(omega > 0);
    }
    ActivityProfile {
        tau: snapshots.len(),
        distance_m: geo.haversine(first.pos, last.pos),
        sum_omega,
        sum_nu,
    }
}

/// Length of the longest run of consecutive snapshots at the same position
/// (within `eps` degrees on both axes).
pub fn longest_stationary_run(snapshots: &[UserSnapshot], eps: f64) -> usize {
    let mut best = usize::from(!snapshots.is_empty());
    let mut run = best;
    for w in snapshots.windows(2) {
        let same = (w[0].pos.lon - w[1].pos.lon).abs() <= eps
            && (w[0].pos.lat - w[1].pos.lat).abs() <= eps;
        run = if same { run + 1 } else { 1 };
        best = best.max(run);
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub vehicle: VehicleId,
    pub snapshots: Vec<UserSnapshot>,
    pub profile: ActivityProfile,
}

/// Descending on `(tau, distance, sum_omega, sum_nu)`, then vehicle id
/// ascending.
pub fn rank_order(a: &Candidate, b: &Candidate) -> Ordering {
    let (pa, pb) = (&a.profile, &b.profile);
    pb.tau
        .cmp(&pa.tau)
        .then_with(|| pb.distance_m.total_cmp(&pa.distance_m))
        .then_with(|| pb.sum_omega.cmp(&pa.sum_omega))
        .then_with(|| pb.sum_nu.cmp(&pa.sum_nu))
        .then_with(|| a.vehicle.cmp(&b.vehicle))
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserTrack {
    pub uid: u32,
    pub vehicle: VehicleId,
    pub profile: ActivityProfile,
    pub snapshots: Vec<UserSnapshot>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub users: Vec<UserTrack>,
    pub candidates: usize,
    pub excluded_stationary: usize,
    pub excluded_short: usize,
}

pub fn passes_filters(c: &Candidate, cfg: &SimConfig) -> bool {
    c.profile.tau >= cfg.c_min
        && longest_stationary_run(&c.snapshots, cfg.stationary_epsilon) <= cfg.s
}

/// Drops stationary and short-lived vehicles, ranks the rest and keeps the
/// top `n_u`, renumbering them `0..n_u` in rank order.
pub fn select_users(candidates: Vec<Candidate>, cfg: &SimConfig) -> Result<Selection> {
    let total = candidates.len();
    let mut excluded_stationary = 0;
    let mut excluded_short = 0;
    let mut survivors: Vec<Candidate> = candidates
        .into_iter()
        .filter(|c| {
            if longest_stationary_run(&c.snapshots, cfg.stationary_epsilon) > cfg.s {
                excluded_stationary += 1;
                false
            } else if c.profile.tau < cfg.c_min {
                excluded_short += 1;
                false
            } else {
                true
            }
        })
        .collect();
    if survivors.len() < cfg.n_u {
        return Err(Error::Selection {
            requested: cfg.n_u,
            available: survivors.len(),
        });
    }
    survivors.sort_by(rank_order);
    let users = survivors
        .into_iter()
        .take(cfg.n_u)
        .enumerate()
        .map(|(uid, c)| {
            let uid = uid as u32;
            let snapshots = c
                .snapshots
                .into_iter()
                .map(|s| UserSnapshot { uid, ..s })
                .collect();
            UserTrack {
                uid,
                vehicle: c.vehicle,
                profile: c.profile,
                snapshots,
            }
        })
        .collect();
    Ok(Selection {
        users,
        candidates: total,
        excluded_stationary,
        excluded_short,
    })
}
