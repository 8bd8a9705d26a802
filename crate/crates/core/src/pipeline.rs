//! End-to-end generation.
//!
//! Pass one walks the timestamps in order: disturb every server's load,
//! assign invocations, total the demand per server, compute the raw delay
//! and jitter components of each invocation against the loads in effect,
//! then step every server's load forward. Pass two normalizes the raw
//! columns over the whole dataset, regularizes them into seconds and
//! milliseconds, fits the edge perturbation over the observed triples and
//! applies the perturbation multiplier.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{InvocationMode, SimConfig};
use crate::coverage::CoverageIndex;
use crate::entities::{in_region, make_servers, make_services, EdgeServer, ServiceSpec, BANDWIDTH};
use crate::error::{Error, Result};
use crate::ingest::{self, GpsFormat, RawGpsRecord, RawStationRecord, StationFormat};
use crate::io::{self, InvocationRow, LoadRow};
use crate::load::{start_of_step_disturbance, step_load, DemandTotals, LoadParams, LoadState};
use crate::manifest::{ColumnBounds, Counts, InputSummary, RunManifest, DATASET_NAME};
use crate::mobility::{align_all, profile, select_users, Candidate, UserSnapshot, UserTrack};
use crate::perturbation::{IdSpace, PerturbationModel};
use crate::qos::{self, MinMax, RawDelayComponents, RawJitterFactors};
use crate::rng;
use crate::stats;

/// Where the raw vehicle traces and station sites come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Inputs {
    /// Generated from the run seed with `synth_vehicles` / `synth_stations`.
    Synthetic,
    Files {
        gps: PathBuf,
        stations: PathBuf,
        gps_format: GpsFormat,
        station_format: StationFormat,
    },
}

impl Inputs {
    pub fn files(gps: impl Into<PathBuf>, stations: impl Into<PathBuf>) -> Self {
        Inputs::Files {
            gps: gps.into(),
            stations: stations.into(),
            gps_format: GpsFormat::default(),
            station_format: StationFormat::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Invocation {
    pub uid: u32,
    pub eid: u32,
    pub sid: u32,
    pub t: u32,
}

/// A finished invocation with every intermediate value kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvocationRecord {
    pub uid: u32,
    pub eid: u32,
    pub sid: u32,
    pub t: u32,
    pub delays: RawDelayComponents,
    pub jitter: RawJitterFactors,
    /// Regularized server-side delay, seconds.
    pub sd: f64,
    /// Response propagation delay, seconds.
    pub pg_rep: f64,
    /// Unperturbed response time, seconds.
    pub rt_base: f64,
    /// Unperturbed jitter, milliseconds.
    pub nj_base: f64,
    pub delta_edge: f64,
    pub delta_time: f64,
    pub rt: f64,
    pub nj: f64,
}

impl InvocationRecord {
    pub fn multiplier(&self) -> f64 {
        1.0 + self.delta_edge + self.delta_time
    }

    pub fn row(&self) -> InvocationRow {
        InvocationRow {
            uid: self.uid,
            eid: self.eid,
            sid: self.sid,
            t: self.t,
            rt: self.rt,
            nj: self.nj,
        }
    }
}

/// A complete generated dataset held in memory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub config: SimConfig,
    pub servers: Vec<EdgeServer>,
    pub services: Vec<ServiceSpec>,
    pub users: Vec<UserTrack>,
    pub loads: Vec<LoadRow>,
    pub records: Vec<InvocationRecord>,
    pub manifest: RunManifest,
}

impl Dataset {
    pub fn snapshots(&self) -> impl Iterator<Item = &UserSnapshot> {
        self.users.iter().flat_map(|u| u.snapshots.iter())
    }
}

/// Invocations for the snapshots of one timestamp, in snapshot order.
///
/// Snapshots outside every server's coverage produce nothing. In `Full`
/// mode each service is invoked once against an independently drawn
/// covering server; in `Sampled` mode `services_per_snapshot` distinct
/// services are drawn first.
pub fn assign_invocations<R: Rng>(
    snapshots: &[&UserSnapshot],
    index: &CoverageIndex<'_>,
    n_services: usize,
    cfg: &SimConfig,
    rng: &mut R,
) -> Vec<Invocation> {
    let servers = index.servers();
    let mut out = Vec::new();
    for snap in snapshots {
        let covering = index.covering(snap.pos);
        if covering.is_empty() {
            continue;
        }
        let sids: Vec<usize> = match cfg.mode {
            InvocationMode::Full => (0..n_services).collect(),
            InvocationMode::Sampled => {
                let mut picked =
                    sample(rng, n_services, cfg.services_per_snapshot.min(n_services)).into_vec();
                picked.sort_unstable();
                picked
            }
        };
        for sid in sids {
            let server = &servers[covering[rng.random_range(0..covering.len())]];
            out.push(Invocation {
                uid: snap.uid,
                eid: server.id,
                sid: sid as u32,
                t: snap.t,
            });
        }
    }
    out
}

struct RawInputs {
    gps: Vec<RawGpsRecord>,
    stations: Vec<RawStationRecord>,
    summary: InputSummary,
}

fn read_inputs(cfg: &SimConfig, inputs: &Inputs) -> Result<RawInputs> {
    match inputs {
        Inputs::Synthetic => {
            let gps = ingest::synth_traces(cfg, cfg.synth_vehicles, cfg.seed);
            let stations = ingest::synth_stations(cfg, cfg.synth_stations, cfg.seed);
            let summary = InputSummary {
                source: "synthetic".into(),
                gps_path: None,
                stations_path: None,
                gps_records: gps.len(),
                gps_dropped: 0,
                stations: stations.len(),
                stations_dropped: 0,
                station_duplicates: cfg.synth_stations - stations.len(),
                stations_outside_region: 0,
                vehicles_aligned: 0,
                excluded_stationary: 0,
                excluded_short: 0,
            };
            Ok(RawInputs {
                gps,
                stations,
                summary,
            })
        }
        Inputs::Files {
            gps,
            stations,
            gps_format,
            station_format,
        } => {
            let open = |p: &Path| File::open(p).map_err(|e| Error::io_at(p, e));
            let g = ingest::parse_gps_log(std::io::BufReader::new(open(gps)?), gps_format)?;
            let s =
                ingest::parse_stations(std::io::BufReader::new(open(stations)?), station_format)?;
            let summary = InputSummary {
                source: "files".into(),
                gps_path: Some(gps.display().to_string()),
                stations_path: Some(stations.display().to_string()),
                gps_records: g.records.len(),
                gps_dropped: g.dropped,
                stations: s.records.len(),
                stations_dropped: s.dropped,
                station_duplicates: s.duplicates,
                stations_outside_region: 0,
                vehicles_aligned: 0,
                excluded_stationary: 0,
                excluded_short: 0,
            };
            Ok(RawInputs {
                gps: g.records,
                stations: s.records,
                summary,
            })
        }
    }
}

/// Pass-one output for one invocation.
struct Pending {
    inv: Invocation,
    user: usize,
    snapshot: usize,
    delays: RawDelayComponents,
    jitter: RawJitterFactors,
}

/// Runs the whole generation in memory.
pub fn generate(cfg: &SimConfig, inputs: &Inputs) -> Result<Dataset> {
    cfg.validate()?;
    let seed = cfg.seed;
    let geo = cfg.geo();
    let RawInputs {
        gps,
        stations,
        mut summary,
    } = read_inputs(cfg, inputs)?;

    summary.stations_outside_region = stations.iter().filter(|s| !in_region(s.pos, cfg)).count();
    let servers = make_servers(&stations, cfg, seed)?;
    let services = make_services(cfg, seed);
    let index = CoverageIndex::new(&servers, geo);

    let tracks = align_all(&gps, cfg);
    summary.vehicles_aligned = tracks.len();
    let candidates = tracks
        .into_iter()
        .map(|t| Candidate {
            profile: profile(&t.snapshots, &index, &geo),
            vehicle: t.vehicle,
            snapshots: t.snapshots,
        })
        .collect();
    let selection = select_users(candidates, cfg)?;
    summary.excluded_stationary = selection.excluded_stationary;
    summary.excluded_short = selection.excluded_short;
    let users = selection.users;

    let windows = cfg.window_count() as usize;
    let mut by_t: Vec<Vec<(usize, usize)>> = vec![Vec::new(); windows];
    for (ui, u) in users.iter().enumerate() {
        for (si, s) in u.snapshots.iter().enumerate() {
            by_t[s.t as usize].push((ui, si));
        }
    }

    let packet: Vec<f64> = services
        .iter()
        .map(|s| qos::packet_size(s.pref[BANDWIDTH], cfg))
        .collect::<Result<_>>()?;
    let params = LoadParams::from(cfg);
    let mut load_rngs: Vec<_> = servers
        .iter()
        .map(|s| rng::stream(seed, "loads", u64::from(s.id)))
        .collect();
    let mut states: Vec<LoadState> = servers
        .iter()
        .zip(load_rngs.iter_mut())
        .map(|(s, r)| LoadState::initial(s.id, &params, r))
        .collect();

    let mut loads = Vec::with_capacity(windows * servers.len());
    let mut pending: Vec<Pending> = Vec::new();

    for (t, entries) in by_t.iter().enumerate() {
        for (state, r) in states.iter_mut().zip(load_rngs.iter_mut()) {
            *state = start_of_step_disturbance(state, &params, r);
        }
        loads.extend(states.iter().map(|s| LoadRow {
            t: t as u32,
            eid: s.eid,
            rho: s.rho(),
        }));

        let snaps: Vec<&UserSnapshot> = entries
            .iter()
            .map(|&(u, s)| &users[u].snapshots[s])
            .collect();
        let mut assign_rng = rng::stream(seed, "assign", t as u64);
        let invocations = assign_invocations(&snaps, &index, services.len(), cfg, &mut assign_rng);

        let mut demand = vec![DemandTotals::default(); servers.len()];
        let mut inverse_packets = vec![0.0f64; servers.len()];
        for inv in &invocations {
            demand[inv.eid as usize].add(&services[inv.sid as usize]);
            inverse_packets[inv.eid as usize] += 1.0 / packet[inv.sid as usize];
        }

        for inv in invocations {
            let pos = entries
                .binary_search_by_key(&(inv.uid as usize), |&(u, _)| u)
                .map_err(|_| Error::Internal(format!("no snapshot for user {} at {t}", inv.uid)))?;
            let (user, snapshot) = entries[pos];
            let track = &users[user].snapshots;
            let window = &track[(snapshot + 1).saturating_sub(cfg.k)..=snapshot];
            let snap = &track[snapshot];
            let server = &servers[inv.eid as usize];
            let service = &services[inv.sid as usize];
            let state = &states[inv.eid as usize];
            let l = packet[inv.sid as usize];

            let share = qos::bandwidth_share(
                qos::remaining_bandwidth(server, state, cfg)?,
                l,
                inverse_packets[inv.eid as usize],
            );
            let (uplink, downlink) = qos::transmission_delays(l, share, state, server, cfg)?;
            let delays = RawDelayComponents {
                pg_req: qos::request_propagation(snap.pos, server.pos, &geo),
                uplink,
                queueing: qos::queueing_delay(state),
                processing: qos::processing_delay(server, service, state),
                downlink,
            };
            let jitter = qos::jitter_factors(window, server, service, state, &geo);
            pending.push(Pending {
                inv,
                user,
                snapshot,
                delays,
                jitter,
            });
        }

        for ((state, server), r) in states.iter_mut().zip(&servers).zip(load_rngs.iter_mut()) {
            *state = step_load(state, server, &demand[server.id as usize], &params, r);
        }
    }

    // pass two
    let mut normalization = BTreeMap::new();
    let mut bounds = |name: &str, values: &mut dyn Iterator<Item = f64>| -> MinMax {
        let m = MinMax::of(values).unwrap_or(MinMax { min: 0.0, max: 0.0 });
        normalization.insert(name.to_string(), ColumnBounds::from(m));
        m
    };
    let up = bounds("uplink", &mut pending.iter().map(|p| p.delays.uplink));
    let qu = bounds("queueing", &mut pending.iter().map(|p| p.delays.queueing));
    let pr = bounds(
        "processing",
        &mut pending.iter().map(|p| p.delays.processing),
    );
    let dn = bounds("downlink", &mut pending.iter().map(|p| p.delays.downlink));
    let delay_sum: Vec<f64> = pending
        .iter()
        .map(|p| {
            up.apply(p.delays.uplink)
                + qu.apply(p.delays.queueing)
                + pr.apply(p.delays.processing)
                + dn.apply(p.delays.downlink)
        })
        .collect();
    let sum_bounds = bounds("delay_sum", &mut delay_sum.iter().copied());

    let dist = bounds(
        "dist_ratio",
        &mut pending.iter().map(|p| p.jitter.dist_ratio),
    );
    let dir = bounds(
        "dir_change",
        &mut pending.iter().map(|p| p.jitter.dir_change),
    );
    let bw = bounds("bw_ratio", &mut pending.iter().map(|p| p.jitter.bw_ratio));
    let speed = bounds("speed", &mut pending.iter().map(|p| p.jitter.speed_kmh));
    let scores: Vec<f64> = pending
        .iter()
        .map(|p| {
            let j = &p.jitter;
            qos::jitter_score(
                j.trend,
                [
                    dist.apply(j.dist_ratio),
                    dir.apply(j.dir_change),
                    bw.apply(j.bw_ratio),
                    speed.apply(j.speed_kmh),
                ],
            )
        })
        .collect();
    let score_bounds = bounds("jitter_score", &mut scores.iter().copied());

    let model = PerturbationModel::fit(
        pending.iter().map(|p| (p.inv.uid, p.inv.eid, p.inv.sid)),
        IdSpace {
            users: users.len(),
            servers: servers.len(),
            services: services.len(),
        },
        seed,
    );
    if let Some(r) = model.range() {
        normalization.insert("edge_perturbation".to_string(), ColumnBounds::from(r));
    }

    let records = pending
        .iter()
        .zip(delay_sum.iter().zip(&scores))
        .map(|(p, (&sum, &score))| {
            let snap = &users[p.user].snapshots[p.snapshot];
            let sd = qos::simulation_delay(sum_bounds.apply(sum), cfg.theta_rt);
            let pg_rep =
                qos::response_propagation(snap, p.delays.pg_req, sd, &geo, cfg.bearing_convention);
            let rt_base = qos::response_time(p.delays.pg_req, sd, pg_rep);
            let nj_base = qos::network_jitter(score_bounds.apply(score), cfg.theta_nj);
            let delta_edge = model.delta(p.inv.uid, p.inv.eid, p.inv.sid)?;
            let delta_time = qos::time_perturbation(f64::from(p.inv.t));
            let (rt, nj) = qos::finalize_qos(rt_base, nj_base, delta_edge, delta_time);
            Ok(InvocationRecord {
                uid: p.inv.uid,
                eid: p.inv.eid,
                sid: p.inv.sid,
                t: p.inv.t,
                delays: p.delays,
                jitter: p.jitter,
                sd,
                pg_rep,
                rt_base,
                nj_base,
                delta_edge,
                delta_time,
                rt,
                nj,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let counts = Counts {
        users: users.len(),
        servers: servers.len(),
        services: services.len(),
        invocations: records.len(),
        user_snapshots: users.iter().map(|u| u.snapshots.len()).sum(),
        load_rows: loads.len(),
    };
    let manifest = RunManifest {
        dataset: DATASET_NAME.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        config: cfg.clone(),
        inputs: summary,
        counts,
        normalization,
    };
    Ok(Dataset {
        config: cfg.clone(),
        servers,
        services,
        users,
        loads,
        records,
        manifest,
    })
}

/// Writes every table, the manifest and the statistics into `out_dir`.
///
/// Files are staged in a temporary directory inside `out_dir` and moved into
/// place only once everything has been written, so a failure leaves no
/// partial outputs behind.
pub fn write_dataset(dataset: &Dataset, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io_at(out_dir, e))?;
    let staging = tempfile::Builder::new()
        .prefix(".chestnut-staging-")
        .tempdir_in(out_dir)
        .map_err(|e| Error::io_at(out_dir, e))?;
    let stage = staging.path();

    io::write_servers(&stage.join(io::SERVERS_FILE), &dataset.servers)?;
    io::write_services(&stage.join(io::SERVICES_FILE), &dataset.services)?;
    io::write_users(&stage.join(io::USERS_FILE), dataset.snapshots())?;
    io::write_loads(&stage.join(io::LOADS_FILE), &dataset.loads)?;
    let rows: Vec<InvocationRow> = dataset.records.iter().map(InvocationRecord::row).collect();
    io::write_invocations(&stage.join(io::INVOCATIONS_FILE), &rows)?;
    io::write_manifest(&stage.join(io::MANIFEST_FILE), &dataset.manifest)?;
    // statistics are computed from the files as written so that `stats`
    // on the output directory reproduces them exactly
    stats::emit_stats_for_dir(stage)?;

    for name in [
        io::SERVERS_FILE,
        io::SERVICES_FILE,
        io::USERS_FILE,
        io::LOADS_FILE,
        io::INVOCATIONS_FILE,
        io::MANIFEST_FILE,
        io::STATS_DIR,
    ] {
        let target = out_dir.join(name);
        if target.is_dir() {
            std::fs::remove_dir_all(&target).map_err(|e| Error::io_at(&target, e))?;
        }
        std::fs::rename(stage.join(name), &target).map_err(|e| Error::io_at(&target, e))?;
    }
    Ok(())
}

/// Generates a dataset and writes it to `out_dir`.
pub fn run(cfg: &SimConfig, inputs: &Inputs, out_dir: &Path) -> Result<RunManifest> {
    let dataset = generate(cfg, inputs)?;
    write_dataset(&dataset, out_dir)?;
    Ok(dataset.manifest)
}
