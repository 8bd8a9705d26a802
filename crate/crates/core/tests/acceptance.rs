//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Run with `cargo test -p chestnut-core --test acceptance`.

mod common;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use chestnut_core::config::SimConfig;
use chestnut_core::coverage::CoverageIndex;
use chestnut_core::entities::make_servers;
use chestnut_core::geo::{haversine_with_radius, GeoPoint, EARTH_RADIUS_M};
use chestnut_core::ingest::{synth_stations, synth_traces, RawGpsRecord, VehicleId};
use chestnut_core::io::{self, InvocationRow};
use chestnut_core::load::LoadState;
use chestnut_core::mobility::{
    align, align_all, longest_stationary_run, profile, select_users, Candidate,
};
use chestnut_core::perturbation::{IdSpace, PerturbationModel, EDGE_PERTURBATION_MAX};
use chestnut_core::pipeline::{self, Dataset, Inputs};
use chestnut_core::qos::{queueing_delay, time_perturbation, MinMax};
use chestnut_core::stats::{correlations, factor_rows};
use chestnut_core::validate::validate_dir;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

type Outcome = Result<String, String>;
type Column = fn(&pipeline::InvocationRecord) -> f64;
type Criterion = fn() -> Outcome;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn files_under(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let cfg = common::desk(2024);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut slowest = Duration::ZERO;
    for dir in [&a, &b] {
        let start = Instant::now();
        pipeline::run(&cfg, &Inputs::Synthetic, dir.path()).map_err(|e| e.to_string())?;
        slowest = slowest.max(start.elapsed());
    }
    let fa = files_under(a.path());
    let fb = files_under(b.path());
    ensure(fa.len() >= 6, || format!("only {} files written", fa.len()))?;
    ensure(fa.keys().eq(fb.keys()), || "file sets differ".into())?;
    for (name, bytes) in &fa {
        ensure(fb[name] == *bytes, || {
            format!("{name} differs between runs")
        })?;
    }
    ensure(slowest < Duration::from_secs(60), || {
        format!("a run took {slowest:?}")
    })?;
    Ok(format!(
        "{} files identical, slowest run {:.2?}",
        fa.len(),
        slowest
    ))
}

/// Great-circle distance via the atan2 form of the spherical Vincenty
/// formula.
fn reference_distance(a: GeoPoint, b: GeoPoint, r: f64) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dl = (b.lon - a.lon).to_radians();
    let y = ((p2.cos() * dl.sin()).powi(2)
        + (p1.cos() * p2.sin() - p1.sin() * p2.cos() * dl.cos()).powi(2))
    .sqrt();
    let x = p1.sin() * p2.sin() + p1.cos() * p2.cos() * dl.cos();
    r * y.atan2(x)
}

fn geodesy() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let a = GeoPoint::new(
            rng.random_range(-180.0..180.0),
            rng.random_range(-90.0..90.0),
        );
        let b = GeoPoint::new(
            rng.random_range(-180.0..180.0),
            rng.random_range(-90.0..90.0),
        );
        let got = haversine_with_radius(a, b, EARTH_RADIUS_M);
        let want = reference_distance(a, b, EARTH_RADIUS_M);
        worst = worst.max((got - want).abs() / want);
    }
    ensure(worst <= 1e-9, || format!("relative error {worst:e}"))?;
    let degree = haversine_with_radius(
        GeoPoint::new(0.0, 0.0),
        GeoPoint::new(1.0, 0.0),
        EARTH_RADIUS_M,
    );
    let want_degree = EARTH_RADIUS_M * PI / 180.0;
    ensure((degree - want_degree).abs() < 0.01, || {
        format!("equatorial degree {degree}")
    })?;
    let anti = haversine_with_radius(
        GeoPoint::new(0.0, 0.0),
        GeoPoint::new(180.0, 0.0),
        EARTH_RADIUS_M,
    );
    ensure((anti - PI * EARTH_RADIUS_M).abs() < 0.01, || {
        format!("antipodal {anti}")
    })?;
    Ok(format!("worst relative error {worst:.2e} over 1000 pairs"))
}

fn alignment() -> Outcome {
    let cfg = SimConfig {
        delta_t: 30,
        t_max: 300,
        ..SimConfig::default()
    };
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let mut snapshots = 0;
    for trace in 0..100 {
        let n = rng.random_range(1..=20);
        let mut time = rng.random_range(0..1_000_000i64);
        let mut records = Vec::with_capacity(n);
        for _ in 0..n {
            time += rng.random_range(0..70);
            records.push(RawGpsRecord {
                vehicle: VehicleId::from("1"),
                gps_time: time,
                pos: GeoPoint::new(rng.random_range(121.3..121.6), rng.random_range(31.1..31.3)),
                speed_kmh: 0.0,
                direction_deg: 0.0,
            });
        }
        let got = common::snapshot_keys(&align(&records, &cfg));
        let want = common::brute_align(&records, i64::from(cfg.delta_t), i64::from(cfg.t_max));
        ensure(got == want, || {
            format!("trace {trace}: {got:?} != {want:?}")
        })?;
        snapshots += got.len();
    }
    Ok(format!("100 traces, {snapshots} snapshots match"))
}

fn medium_dataset() -> &'static Dataset {
    static DATASET: std::sync::OnceLock<Dataset> = std::sync::OnceLock::new();
    DATASET.get_or_init(|| {
        pipeline::generate(&common::medium(99), &Inputs::Synthetic).expect("medium run")
    })
}

fn bounds() -> Outcome {
    let ds = medium_dataset();
    let cfg = &ds.config;
    ensure(ds.records.len() >= 5000, || {
        format!("only {} records", ds.records.len())
    })?;
    let t2 = 2f64.tanh();
    let (sd_lo, sd_hi) = ((1.0 - t2) * cfg.theta_rt, (1.0 + t2) * cfg.theta_rt);
    let (j_lo, j_hi) = ((1.0 - t2) * cfg.theta_nj, (1.0 + t2) * cfg.theta_nj);
    // column extremes normalize to exactly 0 and 1, so the endpoints are attained
    let mut at_endpoints = 0;
    for r in &ds.records {
        ensure(r.sd >= sd_lo && r.sd <= sd_hi, || {
            format!("sd {} outside [{sd_lo}, {sd_hi}]", r.sd)
        })?;
        ensure(r.nj_base >= j_lo && r.nj_base <= j_hi, || {
            format!("jitter {} outside [{j_lo}, {j_hi}]", r.nj_base)
        })?;
        at_endpoints += usize::from(r.sd == sd_lo || r.sd == sd_hi)
            + usize::from(r.nj_base == j_lo || r.nj_base == j_hi);
        let m = r.multiplier();
        ensure((1.0..=1.4).contains(&m), || format!("multiplier {m}"))?;
    }
    for row in &ds.loads {
        ensure(row.rho.iter().all(|x| (0.01..=0.99).contains(x)), || {
            format!("load {:?}", row.rho)
        })?;
    }
    let columns: [(&str, Column); 8] = [
        ("uplink", |r| r.delays.uplink),
        ("queueing", |r| r.delays.queueing),
        ("processing", |r| r.delays.processing),
        ("downlink", |r| r.delays.downlink),
        ("dist_ratio", |r| r.jitter.dist_ratio),
        ("dir_change", |r| r.jitter.dir_change),
        ("bw_ratio", |r| r.jitter.bw_ratio),
        ("speed", |r| r.jitter.speed_kmh),
    ];
    for (name, get) in columns {
        let values: Vec<f64> = ds.records.iter().map(get).collect();
        let m = MinMax::of(values.iter().copied()).unwrap();
        let b = ds.manifest.normalization[name];
        ensure(b.min == m.min && b.max == m.max, || {
            format!("{name}: manifest bounds disagree")
        })?;
        ensure(
            values.iter().all(|&v| (0.0..=1.0).contains(&m.apply(v))),
            || format!("{name} leaves [0, 1]"),
        )?;
    }
    Ok(format!(
        "{} records within bounds, {at_endpoints} values on an endpoint",
        ds.records.len()
    ))
}

fn correlation_signs() -> Outcome {
    let ds = medium_dataset();
    let snaps: Vec<_> = ds.snapshots().copied().collect();
    let rows: Vec<InvocationRow> = ds.records.iter().map(|r| r.row()).collect();
    let factors = factor_rows(
        &ds.servers,
        &ds.services,
        &snaps,
        &ds.loads,
        &rows,
        ds.config.k,
        &ds.config.geo(),
    )
    .map_err(|e| e.to_string())?;
    ensure(factors.len() >= 5000, || {
        format!("only {} records", factors.len())
    })?;
    let table: BTreeMap<_, _> = correlations(&factors)
        .into_iter()
        .map(|c| (c.factor, c))
        .collect();
    let expected: [(&str, bool, f64); 7] = [
        ("service_pref_sum", true, 1.0),
        ("server_load_mean", true, 1.0),
        ("server_supply_sum", true, -1.0),
        ("dist_ratio", false, 1.0),
        ("speed", false, 1.0),
        ("dir_change", false, 1.0),
        ("bw_load_trend", false, 1.0),
    ];
    let mut summary = Vec::new();
    for (factor, on_rt, sign) in expected {
        let c = table[factor];
        let rho = if on_rt { c.rt } else { c.nj };
        let target = if on_rt { "rt" } else { "nj" };
        ensure(rho * sign > 0.05, || {
            format!("spearman({target}, {factor}) = {rho:.4}")
        })?;
        summary.push(format!("{target}~{factor} {rho:+.3}"));
    }
    Ok(summary.join(", "))
}

fn queueing_monotonicity() -> Outcome {
    let history = vec![[0.3; 3], [0.35; 3], [0.25; 3], [0.3; 3]];
    let mut prev = f64::NEG_INFINITY;
    for step in 1..=9 {
        let rho = f64::from(step) / 10.0;
        let mut h = history.clone();
        h.push([rho; 3]);
        let q = queueing_delay(&LoadState::from_history(0, 4, h, 5));
        ensure(q > prev, || format!("not increasing at rho = {rho}"))?;
        prev = q;
    }
    let mut prev = f64::NEG_INFINITY;
    for amplitude in [0.0, 0.05, 0.1, 0.2, 0.3] {
        let h: Vec<[f64; 3]> = [
            0.5 - amplitude,
            0.5 + amplitude,
            0.5 - amplitude,
            0.5 + amplitude,
            0.5,
        ]
        .iter()
        .map(|&x| [x; 3])
        .collect();
        let q = queueing_delay(&LoadState::from_history(0, 4, h, 5));
        ensure(q > prev, || {
            format!("not increasing at volatility {amplitude}")
        })?;
        prev = q;
    }
    Ok("strictly increasing in load and volatility".into())
}

fn schema() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    pipeline::run(&common::desk(3), &Inputs::Synthetic, dir.path()).map_err(|e| e.to_string())?;
    let expected = [
        (
            io::SERVERS_FILE,
            "id,lon,lat,radius,computing,storage,bandwidth",
        ),
        (io::SERVICES_FILE, "sid,computing,storage,bandwidth"),
        (io::USERS_FILE, "id,timestamp,lon,lat,speed,direction"),
        (
            io::LOADS_FILE,
            "timestamp,eid,computing_load,storage_load,bandwidth_load",
        ),
        (io::INVOCATIONS_FILE, "uid,eid,sid,timestamp,rt,nj"),
    ];
    for (file, header) in expected {
        let text = fs::read_to_string(dir.path().join(file)).unwrap();
        let first = text.lines().next().unwrap_or_default();
        ensure(first == header, || format!("{file} header `{first}`"))?;
    }
    let report = validate_dir(dir.path()).map_err(|e| e.to_string())?;
    ensure(report.is_ok(), || report.to_string())?;
    Ok(format!(
        "headers exact, {} checks with 0 violations",
        report.checks
    ))
}

fn selection() -> Outcome {
    let cfg = SimConfig {
        n_u: 100,
        seed: 17,
        ..SimConfig::default()
    };
    let traces = synth_traces(&cfg, 200, cfg.seed);
    let stations = synth_stations(&cfg, 600, cfg.seed);
    let servers = make_servers(&stations, &cfg, cfg.seed).map_err(|e| e.to_string())?;
    let geo = cfg.geo();
    let index = CoverageIndex::new(&servers, geo);
    let candidates: Vec<Candidate> = align_all(&traces, &cfg)
        .into_iter()
        .map(|t| Candidate {
            profile: profile(&t.snapshots, &index, &geo),
            vehicle: t.vehicle,
            snapshots: t.snapshots,
        })
        .collect();
    ensure(candidates.len() == 200, || {
        format!("{} vehicles aligned", candidates.len())
    })?;

    let mut eligible: Vec<&Candidate> = candidates
        .iter()
        .filter(|c| {
            c.snapshots.len() >= cfg.c_min
                && longest_stationary_run(&c.snapshots, cfg.stationary_epsilon) <= cfg.s
        })
        .collect();
    // bubble sort on the plain tuple comparison
    let before = |a: &Candidate, b: &Candidate| {
        let ka = (
            a.profile.tau,
            a.profile.distance_m,
            a.profile.sum_omega,
            a.profile.sum_nu,
        );
        let kb = (
            b.profile.tau,
            b.profile.distance_m,
            b.profile.sum_omega,
            b.profile.sum_nu,
        );
        ka > kb
            || (ka == kb
                && a.vehicle.0.parse::<u64>().unwrap() < b.vehicle.0.parse::<u64>().unwrap())
    };
    for i in 0..eligible.len() {
        for j in 0..eligible.len() - 1 - i {
            if before(eligible[j + 1], eligible[j]) {
                eligible.swap(j, j + 1);
            }
        }
    }
    let chosen = select_users(candidates.clone(), &cfg).map_err(|e| e.to_string())?;
    ensure(chosen.users.len() == cfg.n_u, || {
        format!("{} users selected", chosen.users.len())
    })?;
    for (rank, user) in chosen.users.iter().enumerate() {
        ensure(user.uid as usize == rank, || {
            format!("uid {} at rank {rank}", user.uid)
        })?;
        ensure(user.vehicle == eligible[rank].vehicle, || {
            format!(
                "rank {rank}: {} selected, {} expected",
                user.vehicle, eligible[rank].vehicle
            )
        })?;
        ensure(user.snapshots.len() >= cfg.c_min, || {
            format!("user {} too short", user.uid)
        })?;
        let run = longest_stationary_run(&user.snapshots, cfg.stationary_epsilon);
        ensure(run <= cfg.s, || {
            format!("user {} stationary for {run}", user.uid)
        })?;
    }
    Ok(format!(
        "{} of {} eligible vehicles ranked as brute force",
        cfg.n_u,
        eligible.len()
    ))
}

fn perturbation() -> Outcome {
    let ds = medium_dataset();
    let model = PerturbationModel::fit(
        ds.records.iter().map(|r| (r.uid, r.eid, r.sid)),
        IdSpace {
            users: ds.users.len(),
            servers: ds.servers.len(),
            services: ds.services.len(),
        },
        ds.config.seed,
    );
    let deltas: Vec<f64> = model.deltas().map(|(_, d)| d).collect();
    let lo = deltas.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = deltas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ensure(lo == 0.0, || format!("minimum delta {lo}"))?;
    ensure((hi - EDGE_PERTURBATION_MAX).abs() < 1e-15, || {
        format!("maximum delta {hi}")
    })?;
    ensure(
        deltas
            .iter()
            .all(|d| (0.0..=EDGE_PERTURBATION_MAX).contains(d)),
        || "delta outside [0, 0.2]".into(),
    )?;
    for r in &ds.records {
        let d = model
            .delta(r.uid, r.eid, r.sid)
            .map_err(|e| e.to_string())?;
        ensure(d == r.delta_edge, || {
            "record delta disagrees with the refit model".into()
        })?;
    }
    for (t, want) in [(0.0, 0.1), (PI, 0.2), (3.0 * PI, 0.0)] {
        let got = time_perturbation(t);
        ensure((got - want).abs() < 1e-12, || {
            format!("time perturbation at {t} = {got}")
        })?;
    }
    Ok(format!(
        "{} triples span [0, 0.2]; time term exact",
        deltas.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 9] = [
        ("determinism", determinism),
        ("geodesy oracle", geodesy),
        ("alignment oracle", alignment),
        ("bound suite", bounds),
        ("correlation signs", correlation_signs),
        ("M/M/1 monotonicity", queueing_monotonicity),
        ("schema conformance", schema),
        ("selection correctness", selection),
        ("perturbation contracts", perturbation),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({detail})", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
