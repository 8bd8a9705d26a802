//! Invariant checks over a written output directory.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use crate::coverage::CoverageIndex;
use crate::error::Result;
use crate::io::{self, OutputTables, Table};
use crate::mobility::{longest_stationary_run, UserSnapshot};

/// Slack for values that went through fixed-precision formatting.
const ROUNDING: f64 = 1e-4;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub checks: usize,
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.violations.push(msg());
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "violation: {v}")?;
        }
        write!(
            f,
            "{} checks, {} violations",
            self.checks,
            self.violations.len()
        )
    }
}

fn check_header(
    report: &mut ValidationReport,
    dir: &Path,
    file: &str,
    expected: &[&str],
) -> Result<()> {
    let Table { header, .. } = io::read_table(&dir.join(file))?;
    report.check(header == expected, || {
        format!("{file}: header {header:?}, expected {expected:?}")
    });
    Ok(())
}

/// Re-checks every dataset invariant on the files in `dir`.
pub fn validate_dir(dir: &Path) -> Result<ValidationReport> {
    let mut report = ValidationReport::default();
    check_header(&mut report, dir, io::SERVERS_FILE, &io::SERVERS_HEADER)?;
    check_header(&mut report, dir, io::SERVICES_FILE, &io::SERVICES_HEADER)?;
    check_header(&mut report, dir, io::USERS_FILE, &io::USERS_HEADER)?;
    check_header(&mut report, dir, io::LOADS_FILE, &io::LOADS_HEADER)?;
    check_header(
        &mut report,
        dir,
        io::INVOCATIONS_FILE,
        &io::INVOCATIONS_HEADER,
    )?;
    let tables = OutputTables::load(dir)?;
    validate_tables(&tables, &mut report);
    Ok(report)
}

pub fn validate_tables(tables: &OutputTables, report: &mut ValidationReport) {
    let cfg = &tables.manifest.config;
    let counts = &tables.manifest.counts;
    let geo = cfg.geo();

    // servers and services
    for (i, s) in tables.servers.iter().enumerate() {
        report.check(s.id as usize == i, || {
            format!("server row {i} has id {}", s.id)
        });
        report.check(
            s.radius_m >= f64::from(cfg.r_min) && s.radius_m <= f64::from(cfg.r_max),
            || {
                format!(
                    "server {} radius {} outside [{}, {}]",
                    s.id, s.radius_m, cfg.r_min, cfg.r_max
                )
            },
        );
        report.check(s.supply.iter().all(|l| (1..=cfg.p).contains(l)), || {
            format!(
                "server {} supply {:?} outside [1, {}]",
                s.id, s.supply, cfg.p
            )
        });
        report.check(
            (cfg.phi_min..=cfg.phi_max).contains(&s.pos.lat)
                && (cfg.lambda_min..=cfg.lambda_max).contains(&s.pos.lon),
            || format!("server {} outside the region", s.id),
        );
    }
    for (i, s) in tables.services.iter().enumerate() {
        report.check(s.sid as usize == i, || {
            format!("service row {i} has sid {}", s.sid)
        });
        report.check(s.pref.iter().all(|l| (1..=cfg.p).contains(l)), || {
            format!(
                "service {} preference {:?} outside [1, {}]",
                s.sid, s.pref, cfg.p
            )
        });
    }
    report.check(tables.services.len() == cfg.n_s, || {
        format!("{} services, expected {}", tables.services.len(), cfg.n_s)
    });

    // users
    let mut tracks: HashMap<u32, Vec<UserSnapshot>> = HashMap::new();
    let mut seen_snap = HashSet::new();
    for s in &tables.users {
        report.check(seen_snap.insert((s.uid, s.t)), || {
            format!("duplicate snapshot ({}, {})", s.uid, s.t)
        });
        report.check(s.t < cfg.window_count(), || {
            format!("user {} timestamp {} past the cap", s.uid, s.t)
        });
        tracks.entry(s.uid).or_default().push(*s);
    }
    report.check(tracks.len() == cfg.n_u, || {
        format!("{} users, expected {}", tracks.len(), cfg.n_u)
    });
    for (uid, track) in tracks.iter_mut() {
        track.sort_by_key(|s| s.t);
        report.check((*uid as usize) < cfg.n_u, || {
            format!("user id {uid} out of range")
        });
        report.check(track.len() >= cfg.c_min, || {
            format!(
                "user {uid} has {} timestamps, fewer than {}",
                track.len(),
                cfg.c_min
            )
        });
        let run = longest_stationary_run(track, cfg.stationary_epsilon);
        report.check(run <= cfg.s, || {
            format!("user {uid} is stationary for {run} timestamps")
        });
    }

    // loads
    let n_servers = tables.servers.len();
    let mut seen_load = HashSet::new();
    for r in &tables.loads {
        report.check(seen_load.insert((r.t, r.eid)), || {
            format!("duplicate load row ({}, {})", r.t, r.eid)
        });
        report.check((r.eid as usize) < n_servers, || {
            format!("load row for unknown server {}", r.eid)
        });
        report.check(
            r.rho
                .iter()
                .all(|&x| x >= cfg.rho_min - ROUNDING && x <= cfg.rho_max + ROUNDING),
            || {
                format!(
                    "load ({}, {}) {:?} outside [{}, {}]",
                    r.t, r.eid, r.rho, cfg.rho_min, cfg.rho_max
                )
            },
        );
    }
    report.check(
        tables.loads.len() == n_servers * cfg.window_count() as usize,
        || {
            format!(
                "{} load rows, expected {}",
                tables.loads.len(),
                n_servers * cfg.window_count() as usize
            )
        },
    );

    // invocations
    let index = CoverageIndex::new(&tables.servers, geo);
    let snapshot_at: HashMap<(u32, u32), &UserSnapshot> =
        tables.users.iter().map(|s| ((s.uid, s.t), s)).collect();
    let rt_hi = 1.4 * (1.0 + 2f64.tanh()) * cfg.theta_rt + ROUNDING;
    let nj_hi = 1.4 * (1.0 + 2f64.tanh()) * cfg.theta_nj + ROUNDING;
    let mut seen_inv = HashSet::new();
    for r in &tables.invocations {
        let key = (r.uid, r.eid, r.sid, r.t);
        report.check(seen_inv.insert(key), || {
            format!("duplicate invocation {key:?}")
        });
        report.check((r.sid as usize) < tables.services.len(), || {
            format!("invocation {key:?}: unknown service")
        });
        let server = tables.servers.get(r.eid as usize);
        report.check(server.is_some(), || {
            format!("invocation {key:?}: unknown server")
        });
        match (snapshot_at.get(&(r.uid, r.t)), server) {
            (Some(snap), Some(server)) => {
                report.check(index.covers(server, snap.pos), || {
                    format!("invocation {key:?}: user outside coverage")
                });
            }
            (None, _) => report.check(false, || format!("invocation {key:?}: no user snapshot")),
            _ => {}
        }
        report.check(r.rt > 0.0 && r.rt <= rt_hi, || {
            format!("invocation {key:?}: rt {} out of bounds", r.rt)
        });
        report.check(r.nj > 0.0 && r.nj <= nj_hi, || {
            format!("invocation {key:?}: nj {} out of bounds", r.nj)
        });
    }

    // manifest
    let rows = [
        ("users", counts.users, tracks.len()),
        ("servers", counts.servers, n_servers),
        ("services", counts.services, tables.services.len()),
        ("invocations", counts.invocations, tables.invocations.len()),
        ("user_snapshots", counts.user_snapshots, tables.users.len()),
        ("load_rows", counts.load_rows, tables.loads.len()),
    ];
    for (name, claimed, actual) in rows {
        report.check(claimed == actual, || {
            format!("manifest claims {claimed} {name}, files hold {actual}")
        });
    }
}
