//! CSV and JSON representation of a generated dataset.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::entities::{EdgeServer, ServiceSpec};
use crate::error::{Error, Result};
use crate::geo::GeoPoint;
use crate::manifest::RunManifest;
use crate::mobility::UserSnapshot;

pub const SERVERS_FILE: &str = "servers.csv";
pub const SERVICES_FILE: &str = "services.csv";
pub const USERS_FILE: &str = "users.csv";
pub const LOADS_FILE: &str = "loads.csv";
pub const INVOCATIONS_FILE: &str = "invocations.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const STATS_DIR: &str = "stats";

pub const SERVERS_HEADER: [&str; 7] = [
    "id",
    "lon",
    "lat",
    "radius",
    "computing",
    "storage",
    "bandwidth",
];
pub const SERVICES_HEADER: [&str; 4] = ["sid", "computing", "storage", "bandwidth"];
pub const USERS_HEADER: [&str; 6] = ["id", "timestamp", "lon", "lat", "speed", "direction"];
pub const LOADS_HEADER: [&str; 5] = [
    "timestamp",
    "eid",
    "computing_load",
    "storage_load",
    "bandwidth_load",
];
pub const INVOCATIONS_HEADER: [&str; 6] = ["uid", "eid", "sid", "timestamp", "rt", "nj"];

/// Utilizations of one server during one timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadRow {
    pub t: u32,
    pub eid: u32,
    pub rho: [f64; 3],
}

/// One line of `invocations.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvocationRow {
    pub uid: u32,
    pub eid: u32,
    pub sid: u32,
    pub t: u32,
    /// Response time, seconds.
    pub rt: f64,
    /// Network jitter, milliseconds.
    pub nj: f64,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io_at(path, e))
}

fn write_lines<T>(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = T>,
    mut line: impl FnMut(&mut BufWriter<File>, T) -> std::io::Result<()>,
) -> Result<usize> {
    let mut w = create(path)?;
    let mut n = 0;
    let io = |e| Error::io_at(path, e);
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for row in rows {
        line(&mut w, row).map_err(io)?;
        n += 1;
    }
    w.flush().map_err(io)?;
    Ok(n)
}

/// Formats a percentage the way the loads table shows it, e.g. `14.78%`.
pub fn format_percent(rho: f64) -> String {
    format!("{:.2}%", rho * 100.0)
}

pub fn parse_percent(field: &str) -> Option<f64> {
    let v: f64 = field.trim().strip_suffix('%')?.trim().parse().ok()?;
    Some(v / 100.0)
}

pub fn server_line(s: &EdgeServer) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        s.id, s.pos.lon, s.pos.lat, s.radius_m, s.supply[0], s.supply[1], s.supply[2]
    )
}

pub fn service_line(s: &ServiceSpec) -> String {
    format!("{},{},{},{}", s.sid, s.pref[0], s.pref[1], s.pref[2])
}

pub fn user_line(s: &UserSnapshot) -> String {
    format!(
        "{},{},{},{},{:?},{}",
        s.uid, s.t, s.pos.lon, s.pos.lat, s.speed_kmh, s.direction_deg
    )
}

pub fn load_line(r: &LoadRow) -> String {
    format!(
        "{},{},{},{},{}",
        r.t,
        r.eid,
        format_percent(r.rho[0]),
        format_percent(r.rho[1]),
        format_percent(r.rho[2])
    )
}

pub fn invocation_line(r: &InvocationRow) -> String {
    format!(
        "{},{},{},{},{:.6},{:.6}",
        r.uid, r.eid, r.sid, r.t, r.rt, r.nj
    )
}

pub fn write_servers(path: &Path, servers: &[EdgeServer]) -> Result<usize> {
    write_lines(path, &SERVERS_HEADER, servers, |w, s| {
        writeln!(w, "{}", server_line(s))
    })
}

pub fn write_services(path: &Path, services: &[ServiceSpec]) -> Result<usize> {
    write_lines(path, &SERVICES_HEADER, services, |w, s| {
        writeln!(w, "{}", service_line(s))
    })
}

/// Writes snapshots ordered by `(timestamp, id)`.
pub fn write_users<'a>(
    path: &Path,
    snapshots: impl IntoIterator<Item = &'a UserSnapshot>,
) -> Result<usize> {
    let mut rows: Vec<&UserSnapshot> = snapshots.into_iter().collect();
    rows.sort_by_key(|s| (s.t, s.uid));
    write_lines(path, &USERS_HEADER, rows, |w, s| {
        writeln!(w, "{}", user_line(s))
    })
}

pub fn write_loads(path: &Path, loads: &[LoadRow]) -> Result<usize> {
    write_lines(path, &LOADS_HEADER, loads, |w, r| {
        writeln!(w, "{}", load_line(r))
    })
}

pub fn write_invocations(path: &Path, rows: &[InvocationRow]) -> Result<usize> {
    write_lines(path, &INVOCATIONS_HEADER, rows, |w, r| {
        writeln!(w, "{}", invocation_line(r))
    })
}

pub fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, manifest)?;
    writeln!(w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io_at(path, e))
}

// Reading -----------------------------------------------------------------------

/// Header and rows of a headed CSV file.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<csv::StringRecord>,
}

pub fn read_table(path: &Path) -> Result<Table> {
    let file = File::open(path).map_err(|e| Error::io_at(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let header = reader.headers()?.iter().map(str::to_string).collect();
    let rows = reader.records().collect::<Result<Vec<_>, _>>()?;
    Ok(Table { header, rows })
}

fn field<T: std::str::FromStr>(row: &csv::StringRecord, i: usize, file: &str) -> Result<T> {
    row.get(i)
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| {
            Error::Internal(format!(
                "{file}: bad value in column {i} of row {:?}",
                row.position().map(|p| p.line())
            ))
        })
}

pub fn parse_servers(t: &Table) -> Result<Vec<EdgeServer>> {
    t.rows
        .iter()
        .map(|r| {
            Ok(EdgeServer {
                id: field(r, 0, SERVERS_FILE)?,
                pos: GeoPoint::new(field(r, 1, SERVERS_FILE)?, field(r, 2, SERVERS_FILE)?),
                radius_m: field(r, 3, SERVERS_FILE)?,
                supply: [
                    field(r, 4, SERVERS_FILE)?,
                    field(r, 5, SERVERS_FILE)?,
                    field(r, 6, SERVERS_FILE)?,
                ],
            })
        })
        .collect()
}

pub fn parse_services(t: &Table) -> Result<Vec<ServiceSpec>> {
    t.rows
        .iter()
        .map(|r| {
            Ok(ServiceSpec {
                sid: field(r, 0, SERVICES_FILE)?,
                pref: [
                    field(r, 1, SERVICES_FILE)?,
                    field(r, 2, SERVICES_FILE)?,
                    field(r, 3, SERVICES_FILE)?,
                ],
            })
        })
        .collect()
}

pub fn parse_users(t: &Table) -> Result<Vec<UserSnapshot>> {
    t.rows
        .iter()
        .map(|r| {
            Ok(UserSnapshot {
                uid: field(r, 0, USERS_FILE)?,
                t: field(r, 1, USERS_FILE)?,
                pos: GeoPoint::new(field(r, 2, USERS_FILE)?, field(r, 3, USERS_FILE)?),
                speed_kmh: field(r, 4, USERS_FILE)?,
                direction_deg: field(r, 5, USERS_FILE)?,
            })
        })
        .collect()
}

pub fn parse_loads(t: &Table) -> Result<Vec<LoadRow>> {
    t.rows
        .iter()
        .map(|r| {
            let pct = |i: usize| {
                r.get(i).and_then(parse_percent).ok_or_else(|| {
                    Error::Internal(format!("{LOADS_FILE}: bad percentage in column {i}"))
                })
            };
            Ok(LoadRow {
                t: field(r, 0, LOADS_FILE)?,
                eid: field(r, 1, LOADS_FILE)?,
                rho: [pct(2)?, pct(3)?, pct(4)?],
            })
        })
        .collect()
}

pub fn parse_invocations(t: &Table) -> Result<Vec<InvocationRow>> {
    t.rows
        .iter()
        .map(|r| {
            Ok(InvocationRow {
                uid: field(r, 0, INVOCATIONS_FILE)?,
                eid: field(r, 1, INVOCATIONS_FILE)?,
                sid: field(r, 2, INVOCATIONS_FILE)?,
                t: field(r, 3, INVOCATIONS_FILE)?,
                rt: field(r, 4, INVOCATIONS_FILE)?,
                nj: field(r, 5, INVOCATIONS_FILE)?,
            })
        })
        .collect()
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let file = File::open(path).map_err(|e| Error::io_at(path, e))?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

/// Every table of an output directory, as written.
#[derive(Debug, Clone)]
pub struct OutputTables {
    pub manifest: RunManifest,
    pub servers: Vec<EdgeServer>,
    pub services: Vec<ServiceSpec>,
    pub users: Vec<UserSnapshot>,
    pub loads: Vec<LoadRow>,
    pub invocations: Vec<InvocationRow>,
}

impl OutputTables {
    pub fn load(dir: &Path) -> Result<Self> {
        Ok(OutputTables {
            manifest: read_manifest(&dir.join(MANIFEST_FILE))?,
            servers: parse_servers(&read_table(&dir.join(SERVERS_FILE))?)?,
            services: parse_services(&read_table(&dir.join(SERVICES_FILE))?)?,
            users: parse_users(&read_table(&dir.join(USERS_FILE))?)?,
            loads: parse_loads(&read_table(&dir.join(LOADS_FILE))?)?,
            invocations: parse_invocations(&read_table(&dir.join(INVOCATIONS_FILE))?)?,
        })
    }
}
