use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn chestnut(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chestnut"))
        .args(args)
        .output()
        .unwrap()
}

fn desk_config(dir: &Path) -> String {
    let path = dir.join("desk.toml");
    fs::write(
        &path,
        "n_u = 10\nsynth_vehicles = 30\nsynth_stations = 300\n",
    )
    .unwrap();
    path.display().to_string()
}

#[test]
fn generate_validate_stats_round_trip() {
    let work = tempfile::tempdir().unwrap();
    let config = desk_config(work.path());
    let out = work.path().join("out");
    let out_s = out.display().to_string();

    let gen = chestnut(&[
        "generate",
        "--config",
        &config,
        "--seed",
        "3",
        "--synthetic",
        "--out",
        &out_s,
    ]);
    assert!(
        gen.status.success(),
        "{}",
        String::from_utf8_lossy(&gen.stderr)
    );
    assert!(String::from_utf8_lossy(&gen.stdout).contains("10 users"));

    let val = chestnut(&["validate", "--dir", &out_s]);
    assert!(val.status.success());
    assert!(String::from_utf8_lossy(&val.stdout).contains(" 0 violations"));

    let corr = out.join("stats/correlations.csv");
    let before = fs::read(&corr).unwrap();
    fs::remove_file(&corr).unwrap();
    let stats = chestnut(&["stats", "--dir", &out_s]);
    assert!(stats.status.success());
    assert_eq!(fs::read(&corr).unwrap(), before);
}

#[test]
fn mode_and_services_flags_reach_the_manifest() {
    let work = tempfile::tempdir().unwrap();
    let config = desk_config(work.path());
    let out = work.path().join("out").display().to_string();
    let gen = chestnut(&[
        "generate",
        "--config",
        &config,
        "--synthetic",
        "--out",
        &out,
        "--mode",
        "sampled",
        "--services-per-snapshot",
        "4",
    ]);
    assert!(
        gen.status.success(),
        "{}",
        String::from_utf8_lossy(&gen.stderr)
    );
    let manifest = fs::read_to_string(Path::new(&out).join("manifest.json")).unwrap();
    assert!(manifest.contains("\"services_per_snapshot\": 4"));
}

#[test]
fn validate_exits_nonzero_on_violations() {
    let work = tempfile::tempdir().unwrap();
    let config = desk_config(work.path());
    let out = work.path().join("out");
    let out_s = out.display().to_string();
    assert!(chestnut(&[
        "generate",
        "--config",
        &config,
        "--synthetic",
        "--out",
        &out_s
    ])
    .status
    .success());
    let loads = out.join("loads.csv");
    let text = fs::read_to_string(&loads).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.pop();
    fs::write(&loads, lines.join("\n") + "\n").unwrap();
    let val = chestnut(&["validate", "--dir", &out_s]);
    assert_eq!(val.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&val.stdout).contains("violation:"));
}

#[test]
fn generate_needs_an_input_source() {
    let work = tempfile::tempdir().unwrap();
    let out = work.path().join("out").display().to_string();
    let gen = chestnut(&["generate", "--out", &out]);
    assert!(!gen.status.success());
    let both = chestnut(&[
        "generate",
        "--synthetic",
        "--gps",
        "a.csv",
        "--stations",
        "b.csv",
        "--out",
        &out,
    ]);
    assert!(!both.status.success());
}

#[test]
fn bad_config_key_is_reported() {
    let work = tempfile::tempdir().unwrap();
    let config = work.path().join("bad.toml");
    fs::write(&config, "no_such_key = 1\n").unwrap();
    let out = work.path().join("out").display().to_string();
    let gen = chestnut(&[
        "generate",
        "--config",
        &config.display().to_string(),
        "--synthetic",
        "--out",
        &out,
    ]);
    assert!(!gen.status.success());
    assert!(String::from_utf8_lossy(&gen.stderr).contains("no_such_key"));
}
