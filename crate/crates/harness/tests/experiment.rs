use std::path::Path;
use trafficlab::experiment::{run_experiment, ExperimentConfig, Mode};

fn cfg(out: &Path, mode: Mode, seeds: Vec<u64>, sequential: bool) -> ExperimentConfig {
    ExperimentConfig {
        scenario: "desk".into(),
        mode,
        seeds,
        output: out.to_path_buf(),
        duration: Some(120.0),
        sequential,
        hash_every: None,
    }
}

fn read(dir: &Path, rel: &str) -> Vec<u8> {
    std::fs::read(dir.join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

const FILES: &[&str] = &["metrics.csv", "collisions.csv", "signals.csv", "timeline.csv"];

#[test]
fn baseline_writes_one_set_per_seed() {
    let d = tempfile::tempdir().unwrap();
    let s = run_experiment(&cfg(d.path(), Mode::Baseline, vec![1, 2, 3], false)).unwrap();
    assert_eq!(s.len(), 3);
    for seed in [1, 2, 3] {
        for f in FILES {
            assert!(d.path().join(format!("seed-{seed}")).join(f).is_file());
        }
    }
    assert!(s.iter().all(|x| x.accounting_ok && x.spawned == x.alive + x.removed && x.total == x.vv + x.vnv));
    let summary = String::from_utf8(read(d.path(), "summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
}

#[test]
fn reruns_and_execution_modes_are_byte_identical() {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    run_experiment(&cfg(dirs[0].path(), Mode::Baseline, vec![5, 6], false)).unwrap();
    run_experiment(&cfg(dirs[1].path(), Mode::Baseline, vec![5, 6], false)).unwrap();
    run_experiment(&cfg(dirs[2].path(), Mode::Baseline, vec![5, 6], true)).unwrap();
    for seed in [5, 6] {
        for f in FILES {
            let rel = format!("seed-{seed}/{f}");
            let a = read(dirs[0].path(), &rel);
            assert_eq!(a, read(dirs[1].path(), &rel), "{rel}");
            assert_eq!(a, read(dirs[2].path(), &rel), "{rel}");
        }
    }
    assert_eq!(read(dirs[0].path(), "summary.csv"), read(dirs[2].path(), "summary.csv"));
}

#[test]
fn fixed_action_holds_the_speed_limit() {
    let d = tempfile::tempdir().unwrap();
    // four lights and the speed limit; -1 on the last entry is 20 units/s
    let action = vec![0.0, 0.0, 0.0, 0.0, -1.0];
    run_experiment(&cfg(d.path(), Mode::FixedAction { action }, vec![2], false)).unwrap();
    let mut r = csv::Reader::from_path(d.path().join("seed-2/timeline.csv")).unwrap();
    let col = r.headers().unwrap().iter().position(|h| h == "speed_limit").unwrap();
    let limits: Vec<String> = r.records().map(|x| x.unwrap()[col].to_string()).collect();
    assert_eq!(limits, vec!["20.000000", "20.000000"]);
}

#[test]
fn invalid_configs_are_rejected() {
    let d = tempfile::tempdir().unwrap();
    assert!(run_experiment(&cfg(d.path(), Mode::Baseline, vec![], false)).is_err());
    let missing = Mode::Policy { checkpoint: d.path().join("nope.json") };
    let err = run_experiment(&cfg(d.path(), missing, vec![1], false)).unwrap_err();
    assert!(err.to_string().contains("nope.json"));
    let short = Mode::FixedAction { action: vec![0.0] };
    assert!(run_experiment(&cfg(d.path(), short, vec![1], false)).is_err());
}

#[test]
fn config_parses_from_toml() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path().join("exp.toml");
    std::fs::write(
        &p,
        "scenario = \"desk\"\noutput = \"out\"\n[mode]\nkind = \"fixed_action\"\naction = [0.0, 0.0, 0.0, 0.0, -1.0]\n",
    )
    .unwrap();
    let c = ExperimentConfig::load(&p).unwrap();
    assert_eq!(c.seeds, vec![1, 2, 3]);
    assert_eq!(c.mode, Mode::FixedAction { action: vec![0.0, 0.0, 0.0, 0.0, -1.0] });
}

#[test]
fn hash_stride_is_recorded_and_matches_across_modes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut c = cfg(a.path(), Mode::Baseline, vec![4], false);
    c.hash_every = Some(1000);
    run_experiment(&c).unwrap();
    c.output = b.path().to_path_buf();
    c.sequential = true;
    run_experiment(&c).unwrap();
    let text = String::from_utf8(read(a.path(), "seed-4/hashes.csv")).unwrap();
    let ticks: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ticks, ["1000", "2000", "3000", "4000", "5000", "6000"]);
    assert_eq!(read(a.path(), "seed-4/hashes.csv"), read(b.path(), "seed-4/hashes.csv"));
    c.hash_every = Some(0);
    assert!(run_experiment(&c).is_err());
}
