use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use velod_cli::formats::{ChainFile, FitsFile, Manifest, StatsFile};

fn velod(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_velod")).current_dir(dir).args(args).output().expect("spawn velod")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = velod(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn csv_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(String::from).collect()
}

#[test]
fn trace_and_schedule_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["sim", "trace", "--condition", "fast", "--seed", "7", "--out", "trace.csv"]);
    let lines = csv_lines(&d.join("trace.csv"));
    assert!(lines[0].starts_with("# velod ") && lines[0].contains("seed=7"));
    assert_eq!(lines[1], "t_s,azimuth_deg,speed_deg_per_s");
    assert_eq!(lines.len(), 2 + 226);

    ok(d, &["sim", "schedule", "--trace", "trace.csv", "--mode", "binary", "--threshold", "0.5", "--peak", "157", "--out", "schedule.csv"]);
    let lines = csv_lines(&d.join("schedule.csv"));
    assert!(lines[0].contains("seed=7"), "seed inherited from the trace");
    assert_eq!(lines[1], "t_s,level_index");
    let levels: Vec<&str> = lines[2..].iter().map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(levels.len(), 226);
    assert!(levels.iter().all(|l| *l == "0" || *l == "7"));
    assert!(levels.contains(&"7") && levels.contains(&"0"));

    ok(d, &["sim", "trace", "--condition", "fast", "--seed", "7", "--out", "again.csv"]);
    assert_eq!(fs::read(d.join("trace.csv")).unwrap(), fs::read(d.join("again.csv")).unwrap());
    ok(d, &["sim", "trace", "--condition", "fast", "--model", "ideal", "--out", "ideal.csv"]);
    assert_ne!(fs::read(d.join("trace.csv")).unwrap(), fs::read(d.join("ideal.csv")).unwrap());
}

#[test]
fn experiment_fit_analyze_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("design.json"), r#"{"repetitions_per_level": 10}"#).unwrap();
    ok(d, &["sim", "run", "--design", "design.json", "--cohort", "4", "--seed", "42", "--out", "trials.csv", "--stimulus-out", "stim.csv"]);
    let lines = csv_lines(&d.join("trials.csv"));
    assert!(lines[0].contains("seed=42"));
    assert_eq!(lines[1], "participant,condition,trial,aggressiveness_pct,ref_interval,response,correct");
    assert_eq!(lines.len(), 2 + 4 * 7 * 10 * 2);
    assert_eq!(csv_lines(&d.join("stim.csv")).len(), lines.len());

    ok(d, &["fit", "--trials", "trials.csv", "--out", "fits.json"]);
    let fits: FitsFile = serde_json::from_str(&fs::read_to_string(d.join("fits.json")).unwrap()).unwrap();
    assert_eq!(fits.meta.seed, 42);
    assert_eq!(fits.fits.len(), 8);
    for f in fits.fits.iter().filter(|f| f.converged) {
        assert_eq!(f.threshold, Some(f.mu));
    }

    ok(d, &["analyze", "--fits", "fits.json", "--out", "stats.json"]);
    let stats: StatsFile = serde_json::from_str(&fs::read_to_string(d.join("stats.json")).unwrap()).unwrap();
    assert_eq!(stats.meta.seed, 42);
    assert_eq!(stats.stats.degrees_of_freedom, stats.stats.n_included as f64 - 1.0);
    assert!((0.0..=1.0).contains(&stats.stats.p_value));

    ok(d, &["report", "--fits", "fits.json", "--out", "pf.svg"]);
    let svg = fs::read_to_string(d.join("pf.svg")).unwrap();
    assert!(svg.contains("seed=42"));
    assert_eq!(svg.matches(r#"class="pf""#).count(), 8);
    assert_eq!(svg.matches(r#"class="data""#).count(), 8 * 7);
}

#[test]
fn lod_generation() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["lod", "standin", "--out", "ref.obj", "--seed", "3"]);
    ok(d, &["lod", "gen", "--input", "ref.obj", "--levels", "0.5,0.9", "--samples", "500", "--outdir", "chains", "--seed", "3"]);
    let chain: ChainFile = serde_json::from_str(&fs::read_to_string(d.join("chains/chain.json")).unwrap()).unwrap();
    assert_eq!(chain.meta.seed, 3);
    assert_eq!(chain.levels.len(), 3);
    assert_eq!(chain.levels[0].achieved_triangles, 12074);
    assert_eq!(chain.levels[1].target_triangles, 6037);
    assert!(chain.levels[2].mean_squared_deviation > 0.0);
    for i in 0..3 {
        let text = fs::read_to_string(d.join(format!("chains/lod_{i}.obj"))).unwrap();
        assert!(text.starts_with("# velod ") && text.lines().next().unwrap().contains("seed=3"));
        let faces = text.lines().filter(|l| l.starts_with("f ")).count();
        assert_eq!(faces, chain.levels[i].achieved_triangles);
    }
    assert!(!d.join("chains/lod_3.obj").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let out = velod(d, &["lod", "gen", "--input", "missing.obj"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage gen"));

    assert_eq!(velod(d, &["sim", "trace", "--condition", "sideways", "--out", "x.csv"]).status.code(), Some(2));
    assert_eq!(velod(d, &["bogus"]).status.code(), Some(2));
    let bad_threshold = velod(d, &["sim", "trace", "--condition", "slow", "--out", "t.csv"]);
    assert!(bad_threshold.status.success());
    assert_eq!(
        velod(d, &["sim", "schedule", "--trace", "t.csv", "--threshold", "1.5", "--peak", "52", "--out", "s.csv"]).status.code(),
        Some(2)
    );
    assert_eq!(velod(d, &["sim", "run", "--cohort", "1", "--out", "t.csv"]).status.code(), Some(2));

    fs::write(d.join("garbage.obj"), "v 0 0 0\nf 1 2 3\n").unwrap();
    assert_eq!(velod(d, &["lod", "gen", "--input", "garbage.obj"]).status.code(), Some(2));

    fs::write(d.join("unseeded.csv"), "participant,condition,trial,aggressiveness_pct,ref_interval,response,correct\n1,slow,0,50,1,1,1\n").unwrap();
    let out = velod(d, &["fit", "--trials", "unseeded.csv", "--out", "f.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));

    // Output path below a regular file cannot be created.
    fs::write(d.join("blocker"), "").unwrap();
    let out = velod(d, &["sim", "trace", "--condition", "slow", "--out", "blocker/t.csv"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn small_pipeline_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["lod", "standin", "--out", "ref.obj"]);
    let config = r#"{
        "mesh": "ref.obj",
        "ladder": [0.5, 0.75, 0.95],
        "deviation_samples": 300,
        "participants": 6,
        "design": {"repetitions_per_level": 10}
    }"#;
    fs::write(d.join("config.json"), config).unwrap();
    ok(d, &["pipeline", "--config", "config.json", "--seed", "11", "--outdir", "a"]);
    ok(d, &["pipeline", "--config", "config.json", "--seed", "11", "--outdir", "b"]);
    let read = |p: &str| -> Manifest { serde_json::from_str(&fs::read_to_string(d.join(p)).unwrap()).unwrap() };
    let (a, b) = (read("a/manifest.json"), read("b/manifest.json"));
    assert_eq!(a, b);
    assert_eq!(a.meta.seed, 11);
    assert!(a.files.len() >= 8);
    for f in &a.files {
        assert_eq!(fs::read(d.join("a").join(&f.path)).unwrap(), fs::read(d.join("b").join(&f.path)).unwrap());
        assert!(f.path != "manifest.json");
    }
    for expected in ["lod/lod_3.obj", "lod/chain.json", "trials.csv", "fits.json", "stats.json", "pf.svg", "schedule_fast.csv"] {
        assert!(a.files.iter().any(|f| f.path == expected), "{expected} missing from manifest");
    }

    ok(d, &["pipeline", "--config", "config.json", "--seed", "12", "--outdir", "c"]);
    assert_ne!(read("c/manifest.json").files, a.files);

    // A cohort too small to leave two fittable participants fails at analysis time.
    fs::write(d.join("tiny.json"), r#"{"mesh": "ref.obj", "ladder": [0.5], "deviation_samples": 10, "participants": 2, "population": {"mu_mean": [200.0, 200.0]}}"#).unwrap();
    let out = velod(d, &["pipeline", "--config", "tiny.json", "--outdir", "t"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage analyze"));

    fs::write(d.join("missing.json"), r#"{"mesh": "nowhere.obj"}"#).unwrap();
    let out = velod(d, &["pipeline", "--config", "missing.json", "--outdir", "m"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage gen"));
}
