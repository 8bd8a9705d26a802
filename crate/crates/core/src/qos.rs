//! Response-time and network-jitter models for a single invocation.
//!
//! Transmission, queueing and processing delays are in abstract model units;
//! they only become seconds after dataset-wide min-max normalization and the
//! `tanh` regularization in [`simulation_delay`]. Propagation delays are in
//! seconds from the start.

use serde::{Deserialize, Serialize};

use crate::config::{DownlinkDenominator, SimConfig};
use crate::entities::{EdgeServer, ServiceSpec, BANDWIDTH, COMPUTING, STORAGE};
use crate::error::{Error, Result};
use crate::geo::{BearingConvention, GeoConstants, GeoPoint};
use crate::load::LoadState;
use crate::mobility::UserSnapshot;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawDelayComponents {
    /// Request propagation delay, seconds.
    pub pg_req: f64,
    pub uplink: f64,
    pub queueing: f64,
    pub processing: f64,
    pub downlink: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawJitterFactors {
    /// Mean signed change of bandwidth utilization over the server window.
    pub trend: f64,
    /// User-server distance over coverage radius.
    pub dist_ratio: f64,
    /// Mean absolute heading change over the user window, degrees.
    pub dir_change: f64,
    /// Bandwidth preference over remaining bandwidth supply level.
    pub bw_ratio: f64,
    pub speed_kmh: f64,
}

pub fn request_propagation(user: GeoPoint, server: GeoPoint, geo: &GeoConstants) -> f64 {
    geo.haversine(user, server) / geo.speed_of_light
}

fn check_level(level: u32, p: u32) -> Result<()> {
    if (1..=p).contains(&level) {
        Ok(())
    } else {
        Err(Error::LevelOutOfRange { level, max: p })
    }
}

/// Packet size in MB for a bandwidth preference level: `b_c * 4^(level-1)`.
pub fn packet_size(level: u32, cfg: &SimConfig) -> Result<f64> {
    check_level(level, cfg.p)?;
    Ok(cfg.b_c * 4f64.powi(level as i32 - 1))
}

/// Server bandwidth in Mbps for a supply level: `b_e * 4^(level-1)`.
pub fn server_bandwidth(level: u32, cfg: &SimConfig) -> Result<f64> {
    check_level(level, cfg.p)?;
    Ok(cfg.b_e * 4f64.powi(level as i32 - 1))
}

/// Unused bandwidth in Mbps: `(1 - rho_b) * server_bandwidth(supply_b)`.
pub fn remaining_bandwidth(server: &EdgeServer, state: &LoadState, cfg: &SimConfig) -> Result<f64> {
    Ok((1.0 - state.rho()[BANDWIDTH]) * server_bandwidth(server.supply[BANDWIDTH], cfg)?)
}

/// Share of `remaining_mbps` for a packet of `packet_mb` when all arrivals
/// split bandwidth in inverse proportion to their packet sizes.
/// `inverse_packet_sum` is the sum of `1 / L` over every arrival, the target
/// included.
pub fn bandwidth_share(remaining_mbps: f64, packet_mb: f64, inverse_packet_sum: f64) -> f64 {
    remaining_mbps * (1.0 / packet_mb) / inverse_packet_sum
}

/// Uplink bandwidth granted to `target` among the services arriving at
/// `server` in the current timestamp.
pub fn uplink_share(
    server: &EdgeServer,
    state: &LoadState,
    arrivals: &[ServiceSpec],
    target: &ServiceSpec,
    cfg: &SimConfig,
) -> Result<f64> {
    if !arrivals.iter().any(|s| s.sid == target.sid) {
        return Err(Error::Internal(format!(
            "service {} is not among the {} arrivals at server {}",
            target.sid,
            arrivals.len(),
            server.id
        )));
    }
    let mut inverse_sum = 0.0;
    for s in arrivals {
        inverse_sum += 1.0 / packet_size(s.pref[BANDWIDTH], cfg)?;
    }
    Ok(bandwidth_share(
        remaining_bandwidth(server, state, cfg)?,
        packet_size(target.pref[BANDWIDTH], cfg)?,
        inverse_sum,
    ))
}

/// `(uplink, downlink)` transmission delays for a packet of `packet_mb`.
/// Uplink uses the shared rate; downlink has the server to itself.
pub fn transmission_delays(
    packet_mb: f64,
    up_share_mbps: f64,
    state: &LoadState,
    server: &EdgeServer,
    cfg: &SimConfig,
) -> Result<(f64, f64)> {
    let bits = 8.0 * packet_mb;
    let downlink_capacity = match cfg.downlink_denominator {
        DownlinkDenominator::FullBandwidth => server_bandwidth(server.supply[BANDWIDTH], cfg)?,
        DownlinkDenominator::BandwidthUtilization => state.rho()[BANDWIDTH],
    };
    Ok((bits / up_share_mbps, bits / downlink_capacity))
}

/// M/M/1 waiting time `rho / (mu (1 - rho))`.
pub fn mm1_wait(rho: f64, mu: f64) -> f64 {
    rho / (mu * (1.0 - rho))
}

/// Sum over the three resources of the M/M/1 wait, with service rate
/// `exp(-mean |change|)` over the load window.
pub fn queueing_delay(state: &LoadState) -> f64 {
    let rho = state.rho();
    [COMPUTING, STORAGE, BANDWIDTH]
        .into_iter()
        .map(|r| mm1_wait(rho[r], (-state.mean_abs_change(r)).exp()))
        .sum()
}

pub fn processing_delay(server: &EdgeServer, service: &ServiceSpec, state: &LoadState) -> f64 {
    let rho = state.rho();
    [COMPUTING, STORAGE]
        .into_iter()
        .map(|r| {
            let fit = f64::from(server.supply[r]) * (1.0 - rho[r]) / f64::from(service.pref[r]);
            (1.0 + rho[r]) / fit
        })
        .sum()
}

/// Observed range of a column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
}

impl MinMax {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        values.into_iter().fold(None, |acc, v| {
            Some(match acc {
                None => MinMax { min: v, max: v },
                Some(m) => MinMax {
                    min: m.min.min(v),
                    max: m.max.max(v),
                },
            })
        })
    }

    pub fn is_constant(&self) -> bool {
        self.max <= self.min
    }

    /// `(x - min) / (max - min)`, or 0 for a constant column.
    pub fn apply(&self, x: f64) -> f64 {
        if self.is_constant() {
            0.0
        } else {
            (x - self.min) / (self.max - self.min)
        }
    }
}

pub fn minmax_normalize(values: &[f64]) -> Result<Vec<f64>> {
    let range = MinMax::of(values.iter().copied()).ok_or(Error::EmptyColumn)?;
    Ok(values.iter().map(|&v| range.apply(v)).collect())
}

/// `(tanh(4m - 2) + 1) * base`, mapping `m` in `[0, 1]` into
/// `[(1 - tanh 2) base, (1 + tanh 2) base]`.
pub fn regularize(m: f64, base: f64) -> f64 {
    ((4.0 * m - 2.0).tanh() + 1.0) * base
}

/// Server-side delay in seconds from the normalized sum of the normalized
/// transmission, queueing and processing delays.
pub fn simulation_delay(normalized_sum: f64, theta_rt: f64) -> f64 {
    regularize(normalized_sum, theta_rt)
}

/// Distance the user is expected to travel while the request is in flight.
pub fn travel_distance(speed_kmh: f64, pg_req: f64, sd: f64) -> f64 {
    speed_kmh / 3.6 * (pg_req + sd)
}

/// Propagation delay from the user's request position to the position
/// dead-reckoned from speed and heading over `pg_req + sd`.
pub fn response_propagation(
    snapshot: &UserSnapshot,
    pg_req: f64,
    sd: f64,
    geo: &GeoConstants,
    convention: BearingConvention,
) -> f64 {
    let d = travel_distance(snapshot.speed_kmh, pg_req, sd);
    let predicted = geo.extrapolate(snapshot.pos, snapshot.direction_deg, d, convention);
    geo.haversine(snapshot.pos, predicted) / geo.speed_of_light
}

pub fn response_time(pg_req: f64, sd: f64, pg_rep: f64) -> f64 {
    pg_req + sd + pg_rep
}

/// Mean absolute heading change across consecutive snapshots of the window.
pub fn average_direction_change(window: &[UserSnapshot]) -> f64 {
    if window.len() < 2 {
        return 0.0;
    }
    let total: f64 = window
        .windows(2)
        .map(|w| (w[1].direction_deg - w[0].direction_deg).abs())
        .sum();
    total / (window.len() - 1) as f64
}

/// Jitter factors for one invocation. `user_window` holds the user's most
/// recent snapshots up to and including the current one (at most `k`).
pub fn jitter_factors(
    user_window: &[UserSnapshot],
    server: &EdgeServer,
    service: &ServiceSpec,
    state: &LoadState,
    geo: &GeoConstants,
) -> RawJitterFactors {
    let current = user_window
        .last()
        .expect("window holds the current snapshot");
    let remaining_b = (1.0 - state.rho()[BANDWIDTH]) * f64::from(server.supply[BANDWIDTH]);
    RawJitterFactors {
        trend: state.trend(BANDWIDTH),
        dist_ratio: geo.haversine(current.pos, server.pos) / server.radius_m,
        dir_change: average_direction_change(user_window),
        bw_ratio: f64::from(service.pref[BANDWIDTH]) / remaining_b,
        speed_kmh: current.speed_kmh,
    }
}

/// Unregularized jitter score `e^(1 + trend) * (sum of normalized factors)`.
pub fn jitter_score(trend: f64, normalized_factors: [f64; 4]) -> f64 {
    (1.0 + trend).exp() * normalized_factors.iter().sum::<f64>()
}

/// Network jitter in milliseconds from the normalized jitter score.
pub fn network_jitter(normalized_score: f64, theta_nj: f64) -> f64 {
    regularize(normalized_score, theta_nj)
}

/// `0.1 (sin(t / 2) + 1)`: period 4 pi, range `[0, 0.2]`.
pub fn time_perturbation(t: f64) -> f64 {
    0.1 * ((t / 2.0).sin() + 1.0)
}

/// Applies the shared multiplier `1 + delta_edge + delta_time` to both QoS
/// values.
pub fn finalize_qos(rt: f64, jitter_ms: f64, delta_edge: f64, delta_time: f64) -> (f64, f64) {
    let m = 1.0 + delta_edge + delta_time;
    (rt * m, jitter_ms * m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    const TANH2: f64 = 0.964_027_580_075_816_9;

    fn server(supply: [u32; 3]) -> EdgeServer {
        EdgeServer {
            id: 3,
            pos: GeoPoint::new(121.4, 31.2),
            radius_m: 1000.0,
            supply,
        }
    }

    fn service(sid: u32, pref: [u32; 3]) -> ServiceSpec {
        ServiceSpec { sid, pref }
    }

    fn state(rho: [f64; 3]) -> LoadState {
        LoadState::from_history(3, 0, vec![rho], 5)
    }

    fn snap(lon: f64, lat: f64, speed: f64, dir: f64) -> UserSnapshot {
        UserSnapshot {
            uid: 0,
            t: 0,
            pos: GeoPoint::new(lon, lat),
            speed_kmh: speed,
            direction_deg: dir,
        }
    }

    #[test]
    fn tanh2_constant() {
        assert_abs_diff_eq!(2f64.tanh(), TANH2, epsilon = 1e-15);
    }

    #[test]
    fn request_propagation_cases() {
        let geo = GeoConstants::default();
        let p = GeoPoint::new(121.4, 31.2);
        assert_eq!(request_propagation(p, p, &geo), 0.0);
        // one equatorial degree is 2 pi R / 360 meters
        let d = 2.0 * PI * geo.earth_radius_m / 360.0;
        assert_abs_diff_eq!(
            request_propagation(GeoPoint::new(0.0, 0.0), GeoPoint::new(1.0, 0.0), &geo),
            d / 3e8,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(1000.0 / geo.speed_of_light, 3.3333e-6, epsilon = 1e-10);
        assert_eq!(3e8 / geo.speed_of_light, 1.0);
    }

    #[test]
    fn packet_and_bandwidth_series() {
        let cfg = SimConfig {
            p: 4,
            ..SimConfig::default()
        };
        assert_eq!(packet_size(1, &cfg).unwrap(), 0.5);
        assert_eq!(packet_size(2, &cfg).unwrap(), 2.0);
        assert_eq!(packet_size(3, &cfg).unwrap(), 8.0);
        assert_eq!(server_bandwidth(1, &cfg).unwrap(), 512.0);
        assert_eq!(server_bandwidth(2, &cfg).unwrap(), 2048.0);
        assert_eq!(server_bandwidth(4, &cfg).unwrap(), 32768.0);
        assert!(matches!(
            packet_size(0, &cfg),
            Err(Error::LevelOutOfRange { .. })
        ));
        assert!(matches!(
            server_bandwidth(5, &cfg),
            Err(Error::LevelOutOfRange { .. })
        ));
    }

    #[test]
    fn uplink_share_cases() {
        let cfg = SimConfig::default();
        let srv = server([1, 1, 1]);
        let st = state([0.5, 0.5, 0.5]);
        let full = remaining_bandwidth(&srv, &st, &cfg).unwrap();
        assert_eq!(full, 256.0);

        let a = service(0, [1, 1, 1]);
        assert_eq!(
            uplink_share(&srv, &st, std::slice::from_ref(&a), &a, &cfg).unwrap(),
            full
        );

        let b = service(1, [2, 2, 1]);
        assert_abs_diff_eq!(
            uplink_share(&srv, &st, &[a.clone(), b.clone()], &a, &cfg).unwrap(),
            full / 2.0,
            epsilon = 1e-12
        );

        let c = service(2, [1, 1, 2]);
        let share = uplink_share(&srv, &st, &[a.clone(), c.clone()], &a, &cfg).unwrap();
        assert_abs_diff_eq!(share / full, 0.8, epsilon = 1e-12);

        assert!(matches!(
            uplink_share(&srv, &st, &[], &a, &cfg),
            Err(Error::Internal(_))
        ));
    }

    #[test]
    fn transmission_cases() {
        let cfg = SimConfig::default();
        let srv = server([1, 1, 1]);
        let st = state([0.5, 0.5, 0.25]);
        let (u, _) = transmission_delays(1.0, 8.0, &st, &srv, &cfg).unwrap();
        assert_eq!(u, 1.0);
        let (u, d) = transmission_delays(0.5, 512.0, &st, &srv, &cfg).unwrap();
        assert_abs_diff_eq!(u, 7.8125e-3, epsilon = 1e-15);
        assert_abs_diff_eq!(d, 4.0 / 512.0, epsilon = 1e-15);
        let (u2, d2) = transmission_delays(1.0, 512.0, &st, &srv, &cfg).unwrap();
        assert_abs_diff_eq!(u2, 2.0 * u, epsilon = 1e-15);
        assert_abs_diff_eq!(d2, 2.0 * d, epsilon = 1e-15);

        let literal = SimConfig {
            downlink_denominator: DownlinkDenominator::BandwidthUtilization,
            ..SimConfig::default()
        };
        let (_, d) = transmission_delays(0.5, 512.0, &st, &srv, &literal).unwrap();
        assert_eq!(d, 4.0 / 0.25);
    }

    #[test]
    fn queueing_cases() {
        let flat = LoadState::from_history(0, 3, vec![[0.5; 3]; 3], 5);
        assert_eq!(flat.mean_abs_change(0), 0.0);
        assert_abs_diff_eq!(mm1_wait(0.5, 1.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(queueing_delay(&flat), 3.0, epsilon = 1e-15);
        let mut prev = 0.0;
        for i in 1..=9 {
            let rho = f64::from(i) / 10.0;
            let w = mm1_wait(rho, 0.8);
            assert!(w > prev);
            prev = w;
        }
    }

    #[test]
    fn processing_cases() {
        let p = processing_delay(&server([2, 3, 1]), &service(0, [2, 3, 1]), &state([0.0; 3]));
        assert_eq!(p, 2.0);
        // computing term alone: M_c = 2 * 0.5 / 1 = 1, term = 1.5
        let with = processing_delay(
            &server([2, 1, 1]),
            &service(0, [1, 1, 1]),
            &state([0.5, 0.0, 0.0]),
        );
        let storage_term = 1.0;
        assert_abs_diff_eq!(with - storage_term, 1.5, epsilon = 1e-15);
        let lower = processing_delay(
            &server([2, 1, 1]),
            &service(0, [1, 1, 1]),
            &state([0.4, 0.3, 0.0]),
        );
        let higher = processing_delay(
            &server([2, 1, 1]),
            &service(0, [1, 1, 1]),
            &state([0.6, 0.3, 0.0]),
        );
        assert!(higher > lower);
    }

    #[test]
    fn minmax_cases() {
        assert_eq!(minmax_normalize(&[1.0, 3.0]).unwrap(), vec![0.0, 1.0]);
        assert_eq!(minmax_normalize(&[5.0, 5.0, 5.0]).unwrap(), vec![0.0; 3]);
        let n = minmax_normalize(&[4.0, -2.0, 7.0, 1.0]).unwrap();
        assert_eq!(n[1], 0.0);
        assert_eq!(n[2], 1.0);
        assert!(matches!(minmax_normalize(&[]), Err(Error::EmptyColumn)));
    }

    #[test]
    fn simulation_delay_cases() {
        assert_abs_diff_eq!(simulation_delay(0.5, 1.6), 1.6, epsilon = 1e-15);
        assert_abs_diff_eq!(
            simulation_delay(1.0, 1.6),
            (1.0 + TANH2) * 1.6,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(simulation_delay(1.0, 1.6), 3.1424, epsilon = 1e-4);
        assert_abs_diff_eq!(simulation_delay(0.0, 1.6), 0.0576, epsilon = 5e-5);
    }

    #[test]
    fn response_propagation_cases() {
        let geo = GeoConstants::default();
        let still = snap(121.4, 31.2, 0.0, 45.0);
        assert_eq!(
            response_propagation(&still, 1e-6, 1.6, &geo, BearingConvention::EastReferenced),
            0.0
        );
        assert_abs_diff_eq!(travel_distance(36.0, 0.5, 1.5), 20.0, epsilon = 1e-12);

        let moving = snap(121.4, 31.2, 36.0, 30.0);
        let pg = response_propagation(&moving, 0.5, 1.5, &geo, BearingConvention::EastReferenced);
        assert!(pg > 0.0);
        assert!(pg <= 20.0 / geo.speed_of_light * (1.0 + 1e-9));
    }

    #[test]
    fn response_time_additive() {
        assert_eq!(response_time(0.0, 1.6, 0.0), 1.6);
        assert!(response_time(1e-6, 0.06, 1e-9) > response_time(0.0, 0.06, 1e-9));
    }

    #[test]
    fn jitter_factor_cases() {
        let geo = GeoConstants::default();
        let srv = server([1, 1, 2]);
        let svc = service(0, [1, 1, 3]);
        let at_site = snap(121.4, 31.2, 12.0, 90.0);
        let f = jitter_factors(
            std::slice::from_ref(&at_site),
            &srv,
            &svc,
            &state([0.5; 3]),
            &geo,
        );
        assert_eq!(f.dist_ratio, 0.0);
        assert_eq!(f.trend, 0.0);
        assert_eq!(f.dir_change, 0.0);
        assert_eq!(f.speed_kmh, 12.0);
        assert_abs_diff_eq!(f.bw_ratio, 3.0 / (0.5 * 2.0), epsilon = 1e-15);

        let rising = LoadState::from_history(
            3,
            4,
            (0..5).map(|i| [0.1 * f64::from(i + 1); 3]).collect(),
            5,
        );
        let window = [
            snap(121.4, 31.2, 1.0, 10.0),
            snap(121.4, 31.2, 1.0, 40.0),
            snap(121.4, 31.2, 1.0, 20.0),
        ];
        let f = jitter_factors(&window, &srv, &svc, &rising, &geo);
        assert_abs_diff_eq!(f.trend, 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(f.dir_change, 25.0, epsilon = 1e-12);
    }

    #[test]
    fn jitter_cases() {
        assert_eq!(jitter_score(0.3, [0.0; 4]), 0.0);
        assert_abs_diff_eq!(
            network_jitter(0.0, 160.0),
            (1.0 - TANH2) * 160.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(network_jitter(0.0, 160.0), 5.755, epsilon = 1e-3);
        assert_abs_diff_eq!(network_jitter(0.5, 160.0), 160.0, epsilon = 1e-12);
        assert_abs_diff_eq!(network_jitter(1.0, 160.0), 314.2, epsilon = 0.05);
        assert_abs_diff_eq!(
            jitter_score(0.0, [0.25; 4]),
            std::f64::consts::E,
            epsilon = 1e-15
        );
    }

    #[test]
    fn time_perturbation_cases() {
        assert_eq!(time_perturbation(0.0), 0.1);
        assert_abs_diff_eq!(time_perturbation(PI), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(time_perturbation(3.0 * PI), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn finalize_cases() {
        assert_eq!(finalize_qos(0.3, 20.0, 0.0, 0.0), (0.3, 20.0));
        let (rt, nj) = finalize_qos(0.1, 10.0, 0.2, 0.2);
        assert_abs_diff_eq!(rt, 0.14, epsilon = 1e-15);
        assert_abs_diff_eq!(nj / 10.0, rt / 0.1, epsilon = 1e-12);
    }
}
