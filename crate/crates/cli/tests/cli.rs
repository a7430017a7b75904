use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_crowdflow"))
}

fn spec(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../specs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn crowdflow")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "crowdflow {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: &str = r#"
[[scene]]
id = "small"
regime = "high"
fps = 10.0
duration = 30
boundary_exclusion = 2
camera = { focal_px = 100.0, resolution = [160, 64] }

[[scene.persons]]
world_speed = 0.0
heading = 0.0
depth = 5.0
head_size = 0.4
start = [10.0, 10.0]

[[scene.persons]]
world_speed = 0.3
heading = 0.0
depth = 5.0
head_size = 0.4
start = [10.0, 22.0]

[[scene.persons]]
world_speed = 1.0
heading = 0.0
depth = 5.0
head_size = 0.4
start = [10.0, 34.0]

[[scene.persons]]
world_speed = 1.8
heading = 0.0
depth = 5.0
head_size = 0.4
start = [10.0, 46.0]
"#;

fn small_scene(tmp: &TempDir) -> PathBuf {
    let spec = tmp.path().join("small.toml");
    fs::write(&spec, SMALL).unwrap();
    let dir = tmp.path().join("scene");
    ok(&["synth", "--spec", s(&spec), "-o", s(&dir)]);
    dir
}

fn events(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn plaza_train_then_infer() {
    let tmp = TempDir::new().unwrap();
    let train = tmp.path().join("train");
    let test = tmp.path().join("test");
    ok(&["synth", "--spec", s(&spec("plaza-train.toml")), "-o", s(&train)]);
    ok(&["synth", "--spec", s(&spec("plaza-test.toml")), "-o", s(&test)]);

    let model = tmp.path().join("model.json");
    let report = tmp.path().join("report.json");
    ok(&["train", "-d", s(&train), "-m", s(&model), "--report", s(&report)]);
    let r: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let regime = &r["regimes"][0];
    let k = regime["chosen_k"].as_u64().unwrap();
    assert!((4..=8).contains(&k), "chosen k {k}");
    assert_eq!(regime["curve"].as_array().unwrap().len(), 11);
    assert_eq!(regime["groups"].as_array().unwrap().len(), 4);

    // Expected walker magnitudes from the generator truth: pixel speed times
    // the unified-scale factor of the rasterized box, over training frames.
    let lo = regime["bounds"]["m_min"].as_f64().unwrap();
    let hi = regime["bounds"]["m_max"].as_f64().unwrap();
    let cover = |a: f64, b: f64| {
        (0..400)
            .filter(|&p| a <= p as f64 + 0.5 && (p as f64 + 0.5) < b)
            .count() as f64
    };
    let expected: Vec<f64> = events(&train.join("truth.jsonl"))
        .iter()
        .filter(|t| t["person"].as_u64().unwrap() < 20 && (5..55).contains(&t["frame"].as_u64().unwrap()))
        .map(|t| {
            let b: Vec<f64> = t["box"]
                .as_array()
                .unwrap()
                .iter()
                .map(|v| v.as_f64().unwrap())
                .collect();
            let area = cover(b[0], b[2]) * cover(b[1], b[3]);
            let sc = 1024.0 / area;
            t["pixel_speed"].as_f64().unwrap() * sc.max(1.0 / sc)
        })
        .collect();
    let emin = expected.iter().copied().fold(f64::INFINITY, f64::min);
    let emax = expected.iter().copied().fold(0.0, f64::max);
    assert!((lo - emin).abs() < 1e-4 * emin, "m_min {lo} vs generator {emin}");
    assert!((hi - emax).abs() < 1e-4 * emax, "m_max {hi} vs generator {emax}");

    let out = tmp.path().join("events.jsonl");
    let overlays = tmp.path().join("overlays");
    let infer = ok(&[
        "infer",
        "-d",
        s(&test),
        "-m",
        s(&model),
        "-o",
        s(&out),
        "--overlays",
        s(&overlays),
    ]);
    let stderr = String::from_utf8_lossy(&infer.stderr);
    assert!(stderr.contains("frames/s"), "{stderr}");

    let ev = events(&out);
    assert_eq!(ev.len(), 80 * 22);
    let frames: Vec<u64> = ev.iter().map(|e| e["frame"].as_u64().unwrap()).collect();
    assert!(frames.windows(2).all(|w| w[0] <= w[1]));
    // 22 persons per frame in spec order: walkers 0..20, runner 20, stopper 21.
    let cat = |frame: u64, person: usize| -> String {
        ev[(frame - 1000) as usize * 22 + person]["category"]
            .as_str()
            .unwrap()
            .to_string()
    };
    for f in 1000..1080 {
        for p in 0..20 {
            assert_eq!(cat(f, p), "normal", "walker {p} at frame {f}");
        }
        let runner = if (1020..1050).contains(&f) { "fast" } else { "normal" };
        assert_eq!(cat(f, 20), runner, "runner at {f}");
        let stopper = if (1040..1070).contains(&f) { "halt" } else { "normal" };
        assert_eq!(cat(f, 21), stopper, "stopper at {f}");
    }
    let n_overlays = fs::read_dir(&overlays).unwrap().count();
    assert_eq!(n_overlays, 50);

    let rep = ok(&["report", "-m", s(&model), "--events", s(&out)]);
    let text = String::from_utf8(rep.stdout).unwrap();
    assert!(text.contains("fast   30"), "{text}");
    assert!(text.contains("halt   30"), "{text}");
}

#[test]
fn training_and_inference_are_byte_deterministic() {
    let tmp = TempDir::new().unwrap();
    let dir = small_scene(&tmp);
    let (m1, m2) = (tmp.path().join("m1.json"), tmp.path().join("m2.json"));
    for m in [&m1, &m2] {
        ok(&[
            "train",
            "-d",
            s(&dir),
            "-m",
            s(m),
            "--report",
            s(&tmp.path().join("r.json")),
            "--k-max",
            "8",
        ]);
    }
    assert_eq!(fs::read(&m1).unwrap(), fs::read(&m2).unwrap());
    let (e1, e2) = (tmp.path().join("e1.jsonl"), tmp.path().join("e2.jsonl"));
    ok(&["infer", "-d", s(&dir), "-m", s(&m1), "-o", s(&e1), "--batch", "1"]);
    ok(&["infer", "-d", s(&dir), "-m", s(&m2), "-o", s(&e2), "--batch", "7"]);
    assert_eq!(fs::read(&e1).unwrap(), fs::read(&e2).unwrap());
}

#[test]
fn all_normal_scene_draws_nothing() {
    let tmp = TempDir::new().unwrap();
    let train = small_scene(&tmp);
    let model = tmp.path().join("m.json");
    ok(&[
        "train",
        "-d",
        s(&train),
        "-m",
        s(&model),
        "--report",
        s(&tmp.path().join("r.json")),
    ]);

    let spec = tmp.path().join("walkers.toml");
    fs::write(
        &spec,
        r#"
[[scene]]
id = "walkers"
regime = "high"
fps = 10.0
duration = 12
camera = { focal_px = 100.0, resolution = [96, 64] }

[[scene.persons]]
world_speed = 1.0
heading = 0.0
depth = 5.0
head_size = 0.4
start = [10.0, 10.0]

[[scene.persons]]
world_speed = 1.0
heading = 0.0
depth = 5.0
head_size = 0.4
start = [10.0, 40.0]
"#,
    )
    .unwrap();
    let test = tmp.path().join("walk");
    ok(&["synth", "--spec", s(&spec), "-o", s(&test)]);
    let out = tmp.path().join("e.jsonl");
    let overlays = tmp.path().join("ov");
    ok(&[
        "infer",
        "-d",
        s(&test),
        "-m",
        s(&model),
        "-o",
        s(&out),
        "--overlays",
        s(&overlays),
    ]);
    let ev = events(&out);
    assert_eq!(ev.len(), 24);
    assert!(ev.iter().all(|e| e["category"] == "normal" && e["score_pct"] == 0.0));
    assert_eq!(fs::read_dir(&overlays).unwrap().count(), 0);
}

#[test]
fn minimal_one_person_scene_trains() {
    let tmp = TempDir::new().unwrap();
    let spec = tmp.path().join("one.toml");
    fs::write(
        &spec,
        "[[scene]]\nid = \"solo\"\nregime = \"low-medium\"\nfps = 10.0\nduration = 30\nboundary_exclusion = 2\n\
         camera = { focal_px = 100.0, resolution = [64, 48] }\n\n[[scene.persons]]\nworld_speed = 1.0\n\
         heading = 0.5\ndepth = 8.0\nhead_size = 0.4\nstart = [10.0, 10.0]\n",
    )
    .unwrap();
    let dir = tmp.path().join("solo");
    ok(&["synth", "--spec", s(&spec), "-o", s(&dir)]);
    ok(&[
        "train",
        "-d",
        s(&dir),
        "-m",
        s(&tmp.path().join("m.json")),
        "--report",
        s(&tmp.path().join("r.json")),
    ]);
}

#[test]
fn seed_changes_noise_not_geometry() {
    let tmp = TempDir::new().unwrap();
    let noisy = SMALL.replace("boundary_exclusion = 2", "boundary_exclusion = 2\nnoise_sigma = 0.3");
    let spec = tmp.path().join("noisy.toml");
    fs::write(&spec, &noisy).unwrap();
    let clean = tmp.path().join("clean.toml");
    fs::write(&clean, SMALL).unwrap();
    let dirs: Vec<PathBuf> = ["n1", "n2", "c1", "c2"].iter().map(|d| tmp.path().join(d)).collect();
    ok(&["synth", "--spec", s(&spec), "-o", s(&dirs[0]), "--seed", "1"]);
    ok(&["synth", "--spec", s(&spec), "-o", s(&dirs[1]), "--seed", "2"]);
    ok(&["synth", "--spec", s(&clean), "-o", s(&dirs[2]), "--seed", "1"]);
    ok(&["synth", "--spec", s(&clean), "-o", s(&dirs[3]), "--seed", "2"]);
    let read = |d: &Path, f: &str| fs::read(d.join(f)).unwrap();
    let flo = "flows/frame_000005.flo";
    assert_ne!(read(&dirs[0], flo), read(&dirs[1], flo));
    assert_eq!(read(&dirs[0], "truth.jsonl"), read(&dirs[1], "truth.jsonl"));
    assert_eq!(read(&dirs[0], "detections.jsonl"), read(&dirs[1], "detections.jsonl"));
    assert_eq!(read(&dirs[2], flo), read(&dirs[3], flo));
    assert_eq!(read(&dirs[2], "truth.jsonl"), read(&dirs[3], "truth.jsonl"));
}

#[test]
fn diagnose_reports_tables() {
    let tmp = TempDir::new().unwrap();
    let dir = small_scene(&tmp);
    let out = ok(&["diagnose", "-d", s(&dir), "--k-max", "6"]);
    let d: Value = serde_json::from_slice(&out.stdout).unwrap();
    let table = d[0]["selection"]["table"].as_array().unwrap();
    assert_eq!(table.len(), 5);
    assert!(table
        .iter()
        .all(|r| r["silhouette"].is_number() && r["wcss"].is_number()));
    assert_eq!(d[0]["regime"], "high");
}

#[test]
fn config_file_overrides_flags() {
    let tmp = TempDir::new().unwrap();
    let dir = small_scene(&tmp);
    let cfg = tmp.path().join("run.toml");
    let model = tmp.path().join("from-config.json");
    fs::write(&cfg, format!("model = {:?}\nseed = 99\nk_max = 7\n", s(&model))).unwrap();
    ok(&[
        "train",
        "-d",
        s(&dir),
        "-m",
        s(&tmp.path().join("from-flag.json")),
        "--seed",
        "1",
        "--config",
        s(&cfg),
        "--report",
        s(&tmp.path().join("r.json")),
    ]);
    assert!(!tmp.path().join("from-flag.json").exists());
    let m: Value = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(m["fingerprint"]["seed"], 99);
    assert_eq!(m["fingerprint"]["k_range"][1], 7);
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let dir = small_scene(&tmp);
    let model = tmp.path().join("m.json");
    let report = tmp.path().join("r.json");
    ok(&["train", "-d", s(&dir), "-m", s(&model), "--report", s(&report)]);

    // Config: missing manifest, missing model flag, bad k range.
    let empty = tmp.path().join("empty");
    fs::create_dir(&empty).unwrap();
    assert_eq!(code(&["train", "-d", s(&empty), "-m", s(&model)]), 2);
    assert_eq!(code(&["infer", "-d", s(&dir)]), 2);
    assert_eq!(
        code(&["train", "-d", s(&dir), "-m", s(&model), "--k-min", "5", "--k-max", "6"]),
        2
    );

    // Model store: future version.
    let text = fs::read_to_string(&model).unwrap();
    let bad_model = tmp.path().join("v99.json");
    fs::write(
        &bad_model,
        text.replacen("\"format_version\": 1", "\"format_version\": 99", 1),
    )
    .unwrap();
    assert_eq!(
        code(&[
            "infer",
            "-d",
            s(&dir),
            "-m",
            s(&bad_model),
            "-o",
            s(&tmp.path().join("e"))
        ]),
        9
    );

    // Flow: corrupt file.
    let broken = tmp.path().join("broken");
    ok(&["synth", "--spec", s(&tmp.path().join("small.toml")), "-o", s(&broken)]);
    fs::write(broken.join("flows/frame_000004.flo"), b"not a flow").unwrap();
    assert_eq!(
        code(&[
            "infer",
            "-d",
            s(&broken),
            "-m",
            s(&model),
            "-o",
            s(&tmp.path().join("e"))
        ]),
        3
    );

    // Detections: out of order.
    let shuffled = tmp.path().join("shuffled");
    ok(&["synth", "--spec", s(&tmp.path().join("small.toml")), "-o", s(&shuffled)]);
    let det = fs::read_to_string(shuffled.join("detections.jsonl")).unwrap();
    let mut lines: Vec<&str> = det.lines().collect();
    lines.swap(3, 4);
    fs::write(shuffled.join("detections.jsonl"), lines.join("\n")).unwrap();
    assert_eq!(
        code(&[
            "infer",
            "-d",
            s(&shuffled),
            "-m",
            s(&model),
            "-o",
            s(&tmp.path().join("e"))
        ]),
        4
    );

    // Manifest: overlapping scenes.
    let overlapping = tmp.path().join("overlap.toml");
    let scene = |id: &str, a: u64, b: u64| {
        format!("[[scene]]\nid = \"{id}\"\nframes = [{a}, {b}]\nregime = \"high\"\nfps = 10.0\nresolution = [96, 64]\n")
    };
    fs::write(&overlapping, scene("a", 0, 20) + &scene("b", 10, 30)).unwrap();
    assert_eq!(
        code(&[
            "train",
            "--manifest",
            s(&overlapping),
            "--detections",
            s(&dir.join("detections.jsonl")),
            "--flows-dir",
            s(&dir.join("flows")),
            "-m",
            s(&model)
        ]),
        5
    );

    // Clustering: too little data to diagnose.
    let tiny = tmp.path().join("tiny.toml");
    fs::write(
        &tiny,
        "[[scene]]\nid = \"t\"\nregime = \"high\"\nfps = 10.0\nduration = 4\nboundary_exclusion = 1\n\
         camera = { focal_px = 100.0, resolution = [32, 32] }\n\n[[scene.persons]]\nworld_speed = 0.5\n\
         heading = 0.0\ndepth = 8.0\nhead_size = 0.4\nstart = [10.0, 10.0]\n",
    )
    .unwrap();
    let tiny_dir = tmp.path().join("tiny");
    ok(&["synth", "--spec", s(&tiny), "-o", s(&tiny_dir)]);
    let out = run(&["diagnose", "-d", s(&tiny_dir)]);
    assert_eq!(out.status.code(), Some(7));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rank deficient"));

    // Synth: person walks out of the frame.
    let escape = tmp.path().join("escape.toml");
    fs::write(&escape, SMALL.replace("world_speed = 1.8", "world_speed = 5.0")).unwrap();
    let out = run(&["synth", "--spec", s(&escape), "-o", s(&tmp.path().join("x"))]);
    assert_eq!(out.status.code(), Some(10));
    assert!(String::from_utf8_lossy(&out.stderr).contains("leaves the frame"));
}
