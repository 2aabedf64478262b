use std::fs;
use std::path::Path;
use std::process::Command as Proc;

use spikemix_cli::{config_hash, run, Command, ExperimentKind, RunConfig, RunManifest, RunOptions};

const SMALL_TARGET: &str = r#"
kind = "sample-target"
seeds = [3, 4]
samples = 2000

[machine]
source = "random"
n_units = 4
seed = 9

[sampler]
kind = "gibbs"
"#;

fn with_out(text: &str, dir: &Path) -> RunConfig {
    let mut cfg = RunConfig::from_toml(text).unwrap();
    cfg.output_dir = dir.to_path_buf();
    cfg
}

fn bin() -> Proc {
    Proc::new(env!("CARGO_BIN_EXE_spikemix"))
}

#[test]
fn config_round_trips_through_toml() {
    let cfg = RunConfig::from_toml(SMALL_TARGET).unwrap();
    let back = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
    assert_eq!(cfg, back);
}

#[test]
fn example_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        RunConfig::from_toml(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert!(n >= 5);
}

#[test]
fn hash_ignores_field_order() {
    let reordered = r#"
samples = 2000
seeds = [3, 4]

[sampler]
kind = "gibbs"

[machine]
seed = 9
n_units = 4
source = "random"
"#;
    let a = RunConfig::from_toml(&format!("kind = \"sample-target\"\n{reordered}")).unwrap();
    let b = RunConfig::from_toml(SMALL_TARGET).unwrap();
    assert_eq!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
    let mut c = b.clone();
    c.samples += 1;
    assert_ne!(config_hash(&b).unwrap(), config_hash(&c).unwrap());
}

#[test]
fn unknown_fields_are_rejected() {
    let err = RunConfig::from_toml(&format!("{SMALL_TARGET}\nsampels = 3\n")).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn missing_section_names_the_field() {
    let err = RunConfig::from_toml("kind = \"sample-target\"\n").unwrap().validate().unwrap_err();
    assert!(err.to_string().contains("machine"), "{err}");
}

#[test]
fn subcommands_accept_matching_kinds() {
    assert!(Command::Sample.accepts(ExperimentKind::SampleTarget));
    assert!(Command::Compare.accepts(ExperimentKind::Generate));
    assert!(!Command::Train.accepts(ExperimentKind::Generate));
    assert!(!Command::Sweep.accepts(ExperimentKind::Calibrate));
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let ma = run(&with_out(SMALL_TARGET, &a), RunOptions::default()).unwrap();
    let mb = run(&with_out(SMALL_TARGET, &b), RunOptions { workers: 2, ..RunOptions::default() }).unwrap();
    assert_eq!(ma.seeds.len(), 2);
    assert_eq!(ma.failed_seeds(), Vec::<u64>::new());
    for (seed, rec) in &ma.seeds {
        assert_eq!(rec.files, mb.seeds[seed].files);
        for f in &rec.files {
            assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
        }
    }
    // different seeds give different traces
    assert_ne!(fs::read(a.join("seed-3/kl.csv")).unwrap(), fs::read(a.join("seed-4/kl.csv")).unwrap());
    let read = RunManifest::read(&a).unwrap();
    assert_eq!(read.config_hash, ma.config_hash);
}

#[test]
fn small_sweep_reports_grid_and_best() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"
kind = "sweep-stp"
samples = 3000

[machine]
source = "random"
n_units = 3
seed = 2

[sampler]
kind = "lif"
burn_in = 100.0

[sweep]
tau_rec = [0.0, 10.0]
fixed = { u0 = 1.0, tau_rec = 0.0, tau_fac = 0.0 }
"#;
    let m = run(&with_out(text, tmp.path()), RunOptions::default()).unwrap();
    assert!(m.failed_seeds().is_empty());
    let sweep = fs::read_to_string(tmp.path().join("seed-0/sweep.csv")).unwrap();
    let lines: Vec<&str> = sweep.lines().collect();
    assert_eq!(lines[0], "u0,tau_rec,tau_fac,kl");
    assert_eq!(lines.len(), 3);
    let best = fs::read_to_string(tmp.path().join("seed-0/best.csv")).unwrap();
    let best_kl: f64 = best.lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    for l in &lines[1..] {
        let kl: f64 = l.rsplit(',').next().unwrap().parse().unwrap();
        assert!(best_kl <= kl);
    }
}

#[test]
fn small_compare_writes_every_sampler() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"
kind = "generate"
samples = 300

[layout]
visible = 64
hidden = 4

[dataset]
source = "bars"
side = 8
mode = "hard"
n_per_class = 10

[machine]
source = "random"
n_units = 68
seed = 5

[sampler]
kind = "gibbs"
"#;
    let m = run(&with_out(text, tmp.path()), RunOptions { compare: true, ..RunOptions::default() }).unwrap();
    assert!(m.failed_seeds().is_empty(), "{:?}", m.seeds);
    let summary = fs::read_to_string(tmp.path().join("seed-0/compare.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    for (row, name) in rows.iter().zip(["gibbs", "ast", "lif"]) {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[0], name);
        assert_eq!(cols[1], "300", "{row}");
        assert!(cols[3].parse::<f64>().unwrap() < 0.0);
    }
    for name in ["gibbs", "ast", "lif"] {
        assert!(tmp.path().join(format!("seed-0/{name}-isl.csv")).exists());
        assert!(tmp.path().join(format!("seed-0/{name}-occupancy.csv")).exists());
    }
}

#[test]
fn binary_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, SMALL_TARGET).unwrap();
    let out = tmp.path().join("out");

    let ok = bin().args(["sample", "--config"]).arg(&cfg).arg("--out").arg(&out).args(["--seed", "7"]).status().unwrap();
    assert_eq!(ok.code(), Some(0));
    let m = RunManifest::read(&out).unwrap();
    assert_eq!(m.seeds.keys().copied().collect::<Vec<_>>(), vec![7]);

    // kind does not fit the subcommand
    let wrong = bin().args(["train", "--config"]).arg(&cfg).status().unwrap();
    assert_eq!(wrong.code(), Some(2));

    fs::write(&cfg, "kind = \"sample-target\"\nbogus = 1\n").unwrap();
    let bad = bin().args(["sample", "--config"]).arg(&cfg).status().unwrap();
    assert_eq!(bad.code(), Some(2));

    // a machine file that exists but does not parse fails at run time
    let machine = tmp.path().join("machine.toml");
    fs::write(&machine, "not a machine").unwrap();
    let text = format!(
        "kind = \"sample-target\"\n[machine]\nsource = \"file\"\npath = {:?}\n[sampler]\nkind = \"gibbs\"\n",
        machine
    );
    fs::write(&cfg, text).unwrap();
    let failed = bin().args(["sample", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert_eq!(failed.code(), Some(3));
}
