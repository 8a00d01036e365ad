//! End-to-end checks of the `vanetsim` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn vanetsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vanetsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("scenario.toml");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn default_document_lists_table_values() {
    let o = vanetsim(&["config", "dump-defaults"]);
    assert!(o.status.success());
    let doc = stdout(&o);
    for line in [
        "sim_time = 900.0",
        "packet_bytes = 512",
        "packet_interval = 0.03",
        "mac_variant = \"802.11\"",
        "queue_capacity = 50",
    ] {
        assert!(doc.lines().any(|l| l.trim() == line), "missing {line:?}");
    }
    // The dumped document is itself a valid config.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &doc);
    let out = dir.path().join("out");
    let o = vanetsim(&[
        "simulate", "--config", &cfg, "--nodes", "4", "--set", "sim_time=2", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn phy_dump_shows_both_presets() {
    let o = vanetsim(&["phy", "dump"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("preset = \"802.11\""));
    assert!(s.contains("preset = \"802.11p\""));
    assert!(s.contains("data_rate = 2e6"));
    assert!(s.contains("carrier_freq = 5.9e9"));
}

#[test]
fn analytics_table_rows() {
    let o = vanetsim(&["analytics", "--mean", "0", "--var", "1", "--rmax", "3", "--steps", "4"]);
    assert!(o.status.success());
    let s = stdout(&o);
    let lines: Vec<&str> = s.lines().collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[0], "r,pdf,cdf,efficiency,mc_cdf");
    assert!(lines[1].starts_with("0.000000,0.398942280,0.000000000,0.000000,"));

    let bad = vanetsim(&["analytics", "--mean", "0", "--var", "-1", "--rmax", "3", "--steps", "4"]);
    assert!(!bad.status.success());
}

#[test]
fn simulate_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n_nodes = 12\nsim_time = 15.0\nprotocol = \"OLSR\"\n");
    let mut csvs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = vanetsim(&[
            "simulate", "--config", &cfg, "--reps", "2", "--trace", "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        csvs.push(fs::read_to_string(out.join("metrics.csv")).unwrap());
        let trace = fs::read_to_string(out.join("trace_seed1.txt")).unwrap();
        assert!(trace.lines().any(|l| l.contains(" tx ")));
        assert!(trace.lines().any(|l| l.contains(" rx ")));
    }
    assert_eq!(csvs[0], csvs[1]);
    assert_eq!(csvs[0].lines().count(), 3);
    assert!(csvs[0].starts_with("protocol,mac_variant,n_nodes,speed_mps,seed,throughput_Bps,"));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sim_time = 5.0\n");
    let out = dir.path().join("out");
    let o = vanetsim(&[
        "simulate", "--config", &cfg, "--protocol", "mod_dymo", "--nodes", "8", "--speed", "7",
        "--mac", "802.11p", "--seed", "9", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("metrics.csv")).unwrap();
    let row = csv.lines().nth(1).unwrap();
    assert!(row.starts_with("MOD_DYMO,802.11p,8,7.000000,9,"), "{row}");
}

#[test]
fn bad_input_fails_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    for text in ["bogus_key = 1\n", "speed_mps = -3\n", "n_nodes = \n"] {
        let cfg = write_config(dir.path(), text);
        let o = vanetsim(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert!(!o.status.success(), "{text:?} accepted");
        assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
        assert!(!out.join("metrics.csv").exists());
    }
    let o = vanetsim(&["simulate", "--config", "/nonexistent.toml", "--out", "x"]);
    assert!(!o.status.success());
    let o = vanetsim(&["simulate", "--protocol", "FSR", "--out", "x"]);
    assert!(!o.status.success());
}

#[test]
fn density_sweep_writes_csv_and_charts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let o = vanetsim(&[
        "sweep", "--family", "density", "--set", "sim_time=1", "--set", "n_flows=2", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 6 * 2);
    let svgs: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".svg"))
        .collect();
    assert_eq!(svgs.len(), 3 * 2, "{svgs:?}");
    assert!(svgs.contains(&"nrl_density_80211p.svg".to_string()));
}
