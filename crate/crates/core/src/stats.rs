//! Dataset statistics: timestamp and coverage distributions, QoS
//! histograms and factor-vs-QoS rank correlations.
//!
//! Everything here is computed from the tables as written, so running it
//! on an output directory reproduces the files emitted at generation time.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::coverage::CoverageIndex;
use crate::entities::{EdgeServer, ServiceSpec, BANDWIDTH};
use crate::error::{Error, Result};
use crate::geo::GeoConstants;
use crate::io::{InvocationRow, LoadRow, OutputTables, STATS_DIR};
use crate::mobility::UserSnapshot;
use crate::qos::average_direction_change;

pub const TIMESTAMPS_PER_USER_FILE: &str = "timestamps_per_user.csv";
pub const TIMESTAMP_INTERVALS_FILE: &str = "timestamp_intervals.csv";
pub const SERVER_COVERAGE_FILE: &str = "server_coverage.csv";
pub const COVERAGE_HISTOGRAM_FILE: &str = "coverage_histogram.csv";
pub const RT_HISTOGRAM_FILE: &str = "rt_histogram.csv";
pub const NJ_HISTOGRAM_FILE: &str = "nj_histogram.csv";
pub const CORRELATIONS_FILE: &str = "correlations.csv";

/// Explanatory factors attached to one invocation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorRow {
    pub service_pref_sum: f64,
    pub server_load_mean: f64,
    pub server_supply_sum: f64,
    pub dist_ratio: f64,
    pub dir_change: f64,
    pub speed: f64,
    pub bw_load_trend: f64,
    pub bw_ratio: f64,
    pub rt: f64,
    pub nj: f64,
}

pub const FACTOR_NAMES: [&str; 8] = [
    "service_pref_sum",
    "server_load_mean",
    "server_supply_sum",
    "dist_ratio",
    "dir_change",
    "speed",
    "bw_load_trend",
    "bw_ratio",
];

impl FactorRow {
    pub fn factors(&self) -> [f64; 8] {
        [
            self.service_pref_sum,
            self.server_load_mean,
            self.server_supply_sum,
            self.dist_ratio,
            self.dir_change,
            self.speed,
            self.bw_load_trend,
            self.bw_ratio,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub factor: &'static str,
    pub rt: f64,
    pub nj: f64,
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation; NaN when either side is constant or the inputs
/// are shorter than two.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    if n < 2 {
        return f64::NAN;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return f64::NAN;
    }
    sxy / (sxx * syy).sqrt()
}

pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&average_ranks(x), &average_ranks(y))
}

pub fn correlations(rows: &[FactorRow]) -> Vec<Correlation> {
    let rt: Vec<f64> = rows.iter().map(|r| r.rt).collect();
    let nj: Vec<f64> = rows.iter().map(|r| r.nj).collect();
    let rt_ranks = average_ranks(&rt);
    let nj_ranks = average_ranks(&nj);
    FACTOR_NAMES
        .iter()
        .enumerate()
        .map(|(i, &factor)| {
            let col: Vec<f64> = rows.iter().map(|r| r.factors()[i]).collect();
            let ranks = average_ranks(&col);
            Correlation {
                factor,
                rt: pearson(&ranks, &rt_ranks),
                nj: pearson(&ranks, &nj_ranks),
            }
        })
        .collect()
}

/// Per-invocation factors recomputed from the dataset tables.
///
/// Server load history is read back from the load rows, so the bandwidth
/// trend uses the `k` most recent rows up to the invocation's timestamp.
pub fn factor_rows(
    servers: &[EdgeServer],
    services: &[ServiceSpec],
    snapshots: &[UserSnapshot],
    loads: &[LoadRow],
    invocations: &[InvocationRow],
    k: usize,
    geo: &GeoConstants,
) -> Result<Vec<FactorRow>> {
    let mut tracks: HashMap<u32, Vec<&UserSnapshot>> = HashMap::new();
    for s in snapshots {
        tracks.entry(s.uid).or_default().push(s);
    }
    for track in tracks.values_mut() {
        track.sort_by_key(|s| s.t);
    }
    let load_at: HashMap<(u32, u32), [f64; 3]> =
        loads.iter().map(|r| ((r.t, r.eid), r.rho)).collect();
    let k = k.max(1);

    invocations
        .iter()
        .map(|inv| {
            let missing = |what: &str| {
                Error::Internal(format!(
                    "invocation ({}, {}, {}, {}) has no {what}",
                    inv.uid, inv.eid, inv.sid, inv.t
                ))
            };
            let server = servers
                .get(inv.eid as usize)
                .ok_or_else(|| missing("server"))?;
            let service = services
                .get(inv.sid as usize)
                .ok_or_else(|| missing("service"))?;
            let track = tracks.get(&inv.uid).ok_or_else(|| missing("user"))?;
            let pos = track
                .binary_search_by_key(&inv.t, |s| s.t)
                .map_err(|_| missing("snapshot"))?;
            let window: Vec<UserSnapshot> = track[(pos + 1).saturating_sub(k)..=pos]
                .iter()
                .map(|s| **s)
                .collect();
            let snap = track[pos];
            let rho = *load_at
                .get(&(inv.t, inv.eid))
                .ok_or_else(|| missing("load row"))?;

            let n = k.min(inv.t as usize + 1);
            let bw_load_trend = if n < 2 {
                0.0
            } else {
                let first = load_at
                    .get(&(inv.t + 1 - n as u32, inv.eid))
                    .ok_or_else(|| missing("load history"))?;
                (rho[BANDWIDTH] - first[BANDWIDTH]) / (n - 1) as f64
            };
            let remaining_b = (1.0 - rho[BANDWIDTH]) * f64::from(server.supply[BANDWIDTH]);
            Ok(FactorRow {
                service_pref_sum: f64::from(service.pref_sum()),
                server_load_mean: rho.iter().sum::<f64>() / 3.0,
                server_supply_sum: f64::from(server.supply_sum()),
                dist_ratio: geo.haversine(snap.pos, server.pos) / server.radius_m,
                dir_change: average_direction_change(&window),
                speed: snap.speed_kmh,
                bw_load_trend,
                bw_ratio: f64::from(service.pref[BANDWIDTH]) / remaining_b,
                rt: inv.rt,
                nj: inv.nj,
            })
        })
        .collect()
}

/// Number of users having each timestamp count.
pub fn timestamps_per_user(snapshots: &[UserSnapshot]) -> BTreeMap<usize, usize> {
    let mut per_user: BTreeMap<u32, usize> = BTreeMap::new();
    for s in snapshots {
        *per_user.entry(s.uid).or_default() += 1;
    }
    let mut hist = BTreeMap::new();
    for n in per_user.into_values() {
        *hist.entry(n).or_default() += 1;
    }
    hist
}

/// Distribution of gaps between consecutive timestamps of the same user.
pub fn timestamp_intervals(snapshots: &[UserSnapshot]) -> BTreeMap<u32, usize> {
    let mut per_user: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for s in snapshots {
        per_user.entry(s.uid).or_default().push(s.t);
    }
    let mut hist = BTreeMap::new();
    for mut ts in per_user.into_values() {
        ts.sort_unstable();
        for w in ts.windows(2) {
            *hist.entry(w[1] - w[0]).or_default() += 1;
        }
    }
    hist
}

/// Users inside each server's coverage at each timestamp; pairs with no
/// users are left out.
pub fn server_coverage(
    servers: &[EdgeServer],
    snapshots: &[UserSnapshot],
    geo: GeoConstants,
) -> BTreeMap<(u32, u32), usize> {
    let index = CoverageIndex::new(servers, geo);
    let mut counts = BTreeMap::new();
    for s in snapshots {
        for i in index.covering(s.pos) {
            *counts.entry((s.t, servers[i].id)).or_default() += 1;
        }
    }
    counts
}

/// Fixed-width histogram keyed by bin index (`floor(x / width)`).
pub fn histogram(values: impl IntoIterator<Item = f64>, width: f64) -> BTreeMap<i64, usize> {
    let mut hist = BTreeMap::new();
    for v in values {
        *hist.entry((v / width).floor() as i64).or_default() += 1;
    }
    hist
}

fn fmt_corr(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x:.6}")
    }
}

fn write_lines(path: &Path, header: &str, lines: impl IntoIterator<Item = String>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io_at(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let mut put = |line: &str| writeln!(w, "{line}");
    put(header).map_err(|e| Error::io_at(path, e))?;
    for line in lines {
        put(&line).map_err(|e| Error::io_at(path, e))?;
    }
    w.flush().map_err(|e| Error::io_at(path, e))
}

/// Writes every statistics file into `stats_dir`.
pub fn emit_stats(tables: &OutputTables, stats_dir: &Path) -> Result<()> {
    fs::create_dir_all(stats_dir).map_err(|e| Error::io_at(stats_dir, e))?;
    let cfg = &tables.manifest.config;
    let geo = cfg.geo();

    let per_user = timestamps_per_user(&tables.users);
    write_lines(
        &stats_dir.join(TIMESTAMPS_PER_USER_FILE),
        "timestamps,users",
        per_user.iter().map(|(n, c)| format!("{n},{c}")),
    )?;
    let intervals = timestamp_intervals(&tables.users);
    write_lines(
        &stats_dir.join(TIMESTAMP_INTERVALS_FILE),
        "interval,count",
        intervals.iter().map(|(i, c)| format!("{i},{c}")),
    )?;

    let coverage = server_coverage(&tables.servers, &tables.users, geo);
    write_lines(
        &stats_dir.join(SERVER_COVERAGE_FILE),
        "timestamp,eid,users",
        coverage
            .iter()
            .map(|((t, eid), n)| format!("{t},{eid},{n}")),
    )?;
    let mut coverage_hist: BTreeMap<usize, usize> = BTreeMap::new();
    for &n in coverage.values() {
        *coverage_hist.entry(n).or_default() += 1;
    }
    write_lines(
        &stats_dir.join(COVERAGE_HISTOGRAM_FILE),
        "users,pairs",
        coverage_hist.iter().map(|(n, c)| format!("{n},{c}")),
    )?;

    for (file, width, values) in [
        (
            RT_HISTOGRAM_FILE,
            cfg.rt_bin_width,
            tables.invocations.iter().map(|r| r.rt).collect::<Vec<_>>(),
        ),
        (
            NJ_HISTOGRAM_FILE,
            cfg.nj_bin_width,
            tables.invocations.iter().map(|r| r.nj).collect(),
        ),
    ] {
        let hist = histogram(values, width);
        write_lines(
            &stats_dir.join(file),
            "bin_start,bin_end,count",
            hist.iter().map(|(&b, c)| {
                let start = b as f64 * width;
                format!("{},{},{c}", fmt_edge(start), fmt_edge(start + width))
            }),
        )?;
    }

    let rows = factor_rows(
        &tables.servers,
        &tables.services,
        &tables.users,
        &tables.loads,
        &tables.invocations,
        cfg.k,
        &geo,
    )?;
    let lines: Vec<String> = if rows.is_empty() {
        Vec::new()
    } else {
        correlations(&rows)
            .iter()
            .map(|c| format!("{},{},{}", c.factor, fmt_corr(c.rt), fmt_corr(c.nj)))
            .collect()
    };
    write_lines(&stats_dir.join(CORRELATIONS_FILE), "factor,rt,nj", lines)
}

fn fmt_edge(x: f64) -> String {
    format!("{}", (x * 1e9).round() / 1e9)
}

/// Loads the tables in `dir` and writes `dir/stats/`.
pub fn emit_stats_for_dir(dir: &Path) -> Result<()> {
    let tables = OutputTables::load(dir)?;
    emit_stats(&tables, &dir.join(STATS_DIR))
}
