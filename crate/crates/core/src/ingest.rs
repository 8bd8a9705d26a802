//! Raw input adapters: taxi-style GPS logs, base-station site lists, and a
//! synthetic generator that stands in for both when no licensed data is
//! available.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;
use std::io::Read;

use chrono::NaiveDateTime;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::geo::GeoPoint;
use crate::rng;

/// Opaque vehicle identifier. Purely numeric ids order numerically and sort
/// before non-numeric ones, which order lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VehicleId(pub String);

impl VehicleId {
    fn sort_key(&self) -> (u8, u64, &str) {
        match self.0.parse::<u64>() {
            Ok(n) => (0, n, &self.0),
            Err(_) => (1, 0, &self.0),
        }
    }
}

impl Ord for VehicleId {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl PartialOrd for VehicleId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for VehicleId {
    fn from(s: &str) -> Self {
        VehicleId(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawGpsRecord {
    pub vehicle: VehicleId,
    /// Wall-clock seconds.
    pub gps_time: i64,
    pub pos: GeoPoint,
    pub speed_kmh: f64,
    /// Degrees in `[0, 360)`.
    pub direction_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawStationRecord {
    pub pos: GeoPoint,
}

/// Column positions in a GPS log. `has_header: None` detects a header by
/// checking whether the first row parses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GpsFormat {
    pub vehicle_id: usize,
    pub gps_time: usize,
    pub lon: usize,
    pub lat: usize,
    pub speed: usize,
    pub direction: usize,
    pub has_header: Option<bool>,
}

impl Default for GpsFormat {
    fn default() -> Self {
        GpsFormat {
            vehicle_id: 0,
            gps_time: 1,
            lon: 2,
            lat: 3,
            speed: 4,
            direction: 5,
            has_header: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StationFormat {
    pub lon: usize,
    pub lat: usize,
    pub has_header: Option<bool>,
}

impl Default for StationFormat {
    fn default() -> Self {
        StationFormat {
            lon: 0,
            lat: 1,
            has_header: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    /// Rows that could not be parsed or failed validation.
    pub dropped: usize,
    /// Rows collapsed into an earlier identical record (stations only).
    pub duplicates: usize,
}

/// Accepts integer seconds or `YYYY-MM-DD HH:MM:SS` timestamps (read as UTC).
pub fn parse_gps_time(field: &str) -> Option<i64> {
    let field = field.trim();
    if let Ok(secs) = field.parse::<i64>() {
        return Some(secs);
    }
    for fmt in [
        "%Y-%m-%d %H:%M:%S",
        "%Y/%m/%d %H:%M:%S",
        "%Y-%m-%dT%H:%M:%S",
    ] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(field, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    None
}

fn parse_f64(record: &csv::StringRecord, idx: usize) -> Option<f64> {
    let v: f64 = record.get(idx)?.trim().parse().ok()?;
    v.is_finite().then_some(v)
}

fn gps_row(record: &csv::StringRecord, fmt: &GpsFormat) -> Option<RawGpsRecord> {
    let vehicle = record.get(fmt.vehicle_id)?.trim();
    if vehicle.is_empty() {
        return None;
    }
    let gps_time = parse_gps_time(record.get(fmt.gps_time)?)?;
    let pos = GeoPoint::checked(parse_f64(record, fmt.lon)?, parse_f64(record, fmt.lat)?)?;
    let speed_kmh = parse_f64(record, fmt.speed)?;
    if speed_kmh < 0.0 {
        return None;
    }
    let direction = parse_f64(record, fmt.direction)?;
    if !(0.0..=360.0).contains(&direction) {
        return None;
    }
    Some(RawGpsRecord {
        vehicle: VehicleId(vehicle.to_string()),
        gps_time,
        pos,
        speed_kmh,
        direction_deg: direction.rem_euclid(360.0),
    })
}

fn station_row(record: &csv::StringRecord, fmt: &StationFormat) -> Option<RawStationRecord> {
    let pos = GeoPoint::checked(parse_f64(record, fmt.lon)?, parse_f64(record, fmt.lat)?)?;
    Some(RawStationRecord { pos })
}

/// Streams delimited rows through `row`, counting failures. A first row that
/// does not parse is treated as a header unless `has_header` says otherwise.
fn parse_rows<R: Read, T>(
    source: R,
    has_header: Option<bool>,
    row: impl Fn(&csv::StringRecord) -> Option<T>,
) -> Result<Parsed<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let mut records = Vec::new();
    let mut dropped = 0usize;
    let mut total = 0usize;
    for (i, result) in reader.records().enumerate() {
        let record = match result {
            Ok(r) => r,
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(_) => {
                total += 1;
                dropped += 1;
                continue;
            }
        };
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if i == 0 && has_header == Some(true) {
            continue;
        }
        match row(&record) {
            Some(r) => records.push(r),
            None if i == 0 && has_header.is_none() => continue,
            None => dropped += 1,
        }
        total += 1;
    }
    if total > 0 && dropped * 2 > total {
        return Err(Error::Format {
            malformed: dropped,
            total,
        });
    }
    Ok(Parsed {
        records,
        dropped,
        duplicates: 0,
    })
}

/// Parses a GPS log and sorts it by `(vehicle, gps_time)`; rows with equal
/// keys keep their file order.
pub fn parse_gps_log<R: Read>(source: R, fmt: &GpsFormat) -> Result<Parsed<RawGpsRecord>> {
    let mut parsed = parse_rows(source, fmt.has_header, |r| gps_row(r, fmt))?;
    sort_gps(&mut parsed.records);
    Ok(parsed)
}

pub fn sort_gps(records: &mut [RawGpsRecord]) {
    records.sort_by(|a, b| {
        a.vehicle
            .cmp(&b.vehicle)
            .then_with(|| a.gps_time.cmp(&b.gps_time))
    });
}

/// Parses a station list, keeping the first occurrence of each position.
pub fn parse_stations<R: Read>(source: R, fmt: &StationFormat) -> Result<Parsed<RawStationRecord>> {
    let parsed = parse_rows(source, fmt.has_header, |r| station_row(r, fmt))?;
    let (records, duplicates) = dedup_stations(parsed.records);
    Ok(Parsed {
        records,
        dropped: parsed.dropped,
        duplicates,
    })
}

fn dedup_stations(stations: Vec<RawStationRecord>) -> (Vec<RawStationRecord>, usize) {
    let mut seen = HashSet::new();
    let before = stations.len();
    let kept: Vec<_> = stations
        .into_iter()
        .filter(|s| seen.insert((s.pos.lon.to_bits(), s.pos.lat.to_bits())))
        .collect();
    let dups = before - kept.len();
    (kept, dups)
}

// Synthetic substitutes -------------------------------------------------------

/// 2015-04-01T00:00:00Z; synthetic clocks start somewhere in the hour after.
const SYNTH_EPOCH: i64 = 1_427_846_400;
const REPORT_INTERVALS: [i64; 4] = [10, 15, 30, 60];

fn round_to(v: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    (v * scale).round() / scale
}

struct Region {
    lon_min: f64,
    lon_max: f64,
    lat_min: f64,
    lat_max: f64,
}

impl Region {
    fn of(cfg: &SimConfig) -> Self {
        Region {
            lon_min: cfg.lambda_min,
            lon_max: cfg.lambda_max,
            lat_min: cfg.phi_min,
            lat_max: cfg.phi_max,
        }
    }

    fn center(&self) -> GeoPoint {
        GeoPoint::new(
            (self.lon_min + self.lon_max) / 2.0,
            (self.lat_min + self.lat_max) / 2.0,
        )
    }

    fn clamp(&self, p: GeoPoint) -> GeoPoint {
        GeoPoint::new(
            p.lon.clamp(self.lon_min, self.lon_max),
            p.lat.clamp(self.lat_min, self.lat_max),
        )
    }

    /// Center-weighted draw: a clamped normal with `spread` times the box
    /// extent as standard deviation.
    fn sample_center_biased<R: Rng>(&self, rng: &mut R, spread: f64) -> GeoPoint {
        let c = self.center();
        let lon = Normal::new(c.lon, spread * (self.lon_max - self.lon_min)).unwrap();
        let lat = Normal::new(c.lat, spread * (self.lat_max - self.lat_min)).unwrap();
        self.clamp(GeoPoint::new(lon.sample(rng), lat.sample(rng)))
    }

    fn sample_uniform<R: Rng>(&self, rng: &mut R, margin: f64) -> GeoPoint {
        let wl = (self.lon_max - self.lon_min) * margin;
        let wa = (self.lat_max - self.lat_min) * margin;
        GeoPoint::new(
            rng.random_range(self.lon_min - wl..=self.lon_max + wl),
            rng.random_range(self.lat_min - wa..=self.lat_max + wa),
        )
    }
}

/// Flat east/north offsets in meters from `a` to `b`.
fn local_offset(a: GeoPoint, b: GeoPoint) -> (f64, f64) {
    let m = crate::geo::METERS_PER_DEGREE;
    let cos_lat = a.lat.to_radians().cos();
    ((b.lon - a.lon) * m * cos_lat, (b.lat - a.lat) * m)
}

fn step_towards(a: GeoPoint, east: f64, north: f64) -> GeoPoint {
    let m = crate::geo::METERS_PER_DEGREE;
    let cos_lat = a.lat.to_radians().cos();
    GeoPoint::new(a.lon + east / (m * cos_lat), a.lat + north / m)
}

/// Random-waypoint traces inside the configured box.
///
/// Each vehicle reports every 10, 15, 30 or 60 s from a random start in the
/// first hour, occasionally skips a report, and pauses at some waypoints.
/// About one vehicle in seven parks for several minutes at a time, which the
/// stationary filter is expected to reject. Output is sorted by
/// `(vehicle, gps_time)`.
pub fn synth_traces(cfg: &SimConfig, n_vehicles: usize, seed: u64) -> Vec<RawGpsRecord> {
    let region = Region::of(cfg);
    let mut out = Vec::new();
    for v in 0..n_vehicles {
        let mut rng = rng::stream(seed, "traces", v as u64);
        let vehicle = VehicleId((10_000 + v).to_string());
        let interval = REPORT_INTERVALS[rng.random_range(0..REPORT_INTERVALS.len())];
        let start = SYNTH_EPOCH + rng.random_range(0..3600);
        let t_max = i64::from(cfg.t_max);
        let duration = if rng.random_bool(0.8) {
            t_max + 2 * interval
        } else {
            rng.random_range(t_max / 8..=t_max)
        };
        let parker = rng.random_bool(0.15);

        let mut pos = region.sample_center_biased(&mut rng, 0.22);
        let mut target = region.sample_center_biased(&mut rng, 0.22);
        let mut speed_kmh: f64 = rng.random_range(15.0..60.0);
        let mut heading = 0.0f64;
        let mut dwell_left = 0i64;

        let mut local = 0i64;
        while local <= duration {
            let moving = dwell_left <= 0;
            if local == 0 || !rng.random_bool(0.02) {
                let fix = region.clamp(GeoPoint::new(round_to(pos.lon, 6), round_to(pos.lat, 6)));
                out.push(RawGpsRecord {
                    vehicle: vehicle.clone(),
                    gps_time: start + local,
                    pos: fix,
                    speed_kmh: if moving { round_to(speed_kmh, 1) } else { 0.0 },
                    direction_deg: heading.round().rem_euclid(360.0),
                });
            }

            // advance one report interval
            let mut budget = interval as f64;
            while budget > 0.0 {
                if dwell_left > 0 {
                    let spent = (dwell_left as f64).min(budget);
                    dwell_left -= spent as i64;
                    budget -= spent;
                    continue;
                }
                let (east, north) = local_offset(pos, target);
                let dist = east.hypot(north);
                let mps = speed_kmh / 3.6;
                if dist > mps * budget {
                    let f = mps * budget / dist;
                    pos = step_towards(pos, east * f, north * f);
                    heading = east.atan2(north).to_degrees().rem_euclid(360.0);
                    budget = 0.0;
                } else {
                    pos = target;
                    budget -= if mps > 0.0 { dist / mps } else { budget };
                    if dist > 0.0 {
                        heading = east.atan2(north).to_degrees().rem_euclid(360.0);
                    }
                    target = region.sample_center_biased(&mut rng, 0.22);
                    speed_kmh = rng.random_range(15.0..60.0);
                    if rng.random_bool(0.3) {
                        dwell_left = if parker {
                            rng.random_range(240..900)
                        } else {
                            rng.random_range(20..60)
                        };
                    }
                }
            }
            local += interval;
        }
    }
    sort_gps(&mut out);
    out
}

/// Station sites concentrated around the center of the box, with a uniform
/// share that extends a little past the box so the region filter has work to
/// do. Positions are deduplicated.
pub fn synth_stations(cfg: &SimConfig, n_stations: usize, seed: u64) -> Vec<RawStationRecord> {
    let region = Region::of(cfg);
    let mut rng = rng::stream(seed, "stations", 0);
    let stations = (0..n_stations)
        .map(|_| {
            let p = if rng.random_bool(0.75) {
                region.sample_center_biased(&mut rng, 0.18)
            } else {
                region.sample_uniform(&mut rng, 0.05)
            };
            RawStationRecord {
                pos: GeoPoint::new(round_to(p.lon, 6), round_to(p.lat, 6)),
            }
        })
        .collect();
    dedup_stations(stations).0
}
