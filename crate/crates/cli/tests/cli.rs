use std::path::PathBuf;
use std::process::{Command, Output};

use jointbeam::{search, Algorithm, DecoderWeights, Models, SearchConfig};

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
        .display()
        .to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jointbeam"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn decode_single_frame_fixture() {
    let tdx = fixture("tdx_t1_v1.json");
    let o = run(&[
        "decode",
        "--model",
        &tdx,
        "--algorithm",
        "rnnt",
        "--k-beam",
        "1",
        "--mu-ctc",
        "0",
        "--mu-rnnt",
        "1",
        "--mu-att",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v[0]["tokens"], serde_json::json!(["a"]));
    assert!((v[0]["joint"].as_f64().unwrap() - 0.42f64.ln()).abs() < 1e-12);
}

#[test]
fn pure_attention_decode_matches_library() {
    let desk = fixture("desk_t4_v2.json");
    let o = run(&[
        "decode",
        "--model",
        &desk,
        "--algorithm",
        "att",
        "--mu-ctc",
        "0",
        "--mu-rnnt",
        "0",
        "--n-best",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let models = Models::load(&desk).unwrap();
    let w = DecoderWeights::new(0.0, 0.0, 0.4, 0.0).unwrap();
    let cfg = SearchConfig::new(Algorithm::AttentionDriven, w).n_best(3);
    let expected = search(&models, &cfg)
        .unwrap()
        .nbest
        .to_json(&models.vocab)
        .unwrap();
    assert_eq!(stdout(&o).trim_end(), expected);
}

#[test]
fn invalid_algorithm_is_usage_error() {
    let o = run(&[
        "decode",
        "--model",
        &fixture("desk_t4_v2.json"),
        "--algorithm",
        "beam",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("att") && err.contains("ctc") && err.contains("rnnt"),
        "{err}"
    );
}

#[test]
fn decode_errors() {
    // missing file
    let o = run(&[
        "decode",
        "--model",
        "/nonexistent.json",
        "--algorithm",
        "att",
    ]);
    assert_eq!(o.status.code(), Some(1));
    // neither --model nor --seed
    assert_eq!(
        run(&["decode", "--algorithm", "att"]).status.code(),
        Some(2)
    );
    // primary model absent
    let o = run(&[
        "decode",
        "--model",
        &fixture("grid_t2_v1.json"),
        "--algorithm",
        "att",
    ]);
    assert_eq!(o.status.code(), Some(2));
    // k_pre below k_beam
    let o = run(&[
        "decode",
        "--seed",
        "1",
        "--algorithm",
        "ctc",
        "--k-beam",
        "5",
        "--k-pre",
        "4",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn parallel_decode_keeps_order() {
    let desk = fixture("desk_t4_v2.json");
    let tdx = fixture("grid_t2_v1.json");
    let args = |jobs: &'static str| {
        vec![
            "decode".to_string(),
            "--model".into(),
            desk.clone(),
            "--model".into(),
            tdx.clone(),
            "--model".into(),
            desk.clone(),
            "--algorithm".into(),
            "ctc".into(),
            "--mu-rnnt".into(),
            "0".into(),
            "--mu-att".into(),
            "0".into(),
            "--jobs".into(),
            jobs.into(),
        ]
    };
    let one = Command::new(env!("CARGO_BIN_EXE_jointbeam"))
        .args(args("1"))
        .output()
        .unwrap();
    let three = Command::new(env!("CARGO_BIN_EXE_jointbeam"))
        .args(args("3"))
        .output()
        .unwrap();
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(stdout(&one).lines().count(), 3);
    assert_eq!(one.stdout, three.stdout);
}

#[test]
fn seeded_decode() {
    let o = run(&[
        "decode",
        "--seed",
        "7",
        "--frames",
        "12",
        "--vocab-size",
        "5",
        "--algorithm",
        "rnnt",
        "--n-best",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
}

#[test]
fn weights_command() {
    for (epochs, expected) in [
        ("10,10,10,70", "0.1 0.1 0.1 0.7"),
        ("1,1,1,1", "0.25 0.25 0.25 0.25"),
        ("5,10,15,20", "0.1 0.2 0.3 0.4"),
    ] {
        let o = run(&["weights", "--epochs", epochs]);
        assert_eq!(o.status.code(), Some(0));
        assert_eq!(stdout(&o).trim(), expected);
    }
    assert_eq!(
        run(&["weights", "--epochs", "0,1,1,1"]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["weights", "--epochs", "-3,1,1,1"]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["weights", "--epochs", "1,1,1"]).status.code(),
        Some(2)
    );
}

#[test]
fn oracle_on_fixtures() {
    for name in [
        "grid_t2_v1.json",
        "tdx_t1_v1.json",
        "att_v1.json",
        "desk_t4_v2.json",
    ] {
        let o = run(&["oracle", "--model", &fixture(name)]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{name}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
        for c in v["checks"].as_array().unwrap() {
            assert!(
                c["skipped"].as_bool().unwrap() || c["pass"].as_bool().unwrap(),
                "{name}: {c}"
            );
        }
    }
    let o = run(&["oracle", "--model", &fixture("grid_t2_v1.json")]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let skipped = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["skipped"] == true)
        .count();
    assert_eq!(skipped, 7);
}

#[test]
fn oracle_guard_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.json");
    Models::from_seed(1, 40, 4, 2.0)
        .unwrap()
        .save(&path)
        .unwrap();
    let o = run(&["oracle", "--model", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("exceeds limit"));
}

#[test]
fn bench_grid_rows() {
    let o = run(&[
        "bench",
        "--model",
        &fixture("desk_t4_v2.json"),
        "--grid",
        "algorithms=att,ctc,rnnt;beams=1,2,4,8",
        "--repeats",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 13);
    assert_eq!(lines[0], jointbeam::bench::CSV_HEADER);
    let records = jointbeam::bench::read_csv(text.as_bytes()).unwrap();
    assert_eq!(records[11].algorithm, Algorithm::RnntDriven);
    assert_eq!(records[11].k_beam, 8);
}

#[test]
fn bench_weight_sweep_axis() {
    let o = run(&[
        "bench",
        "--model",
        &fixture("desk_t4_v2.json"),
        "--grid",
        "algorithms=att;beams=2;weights=rnnt-sweep",
        "--repeats",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let records = jointbeam::bench::read_csv(stdout(&o).as_bytes()).unwrap();
    let rnnt: Vec<f64> = records.iter().map(|r| r.mu_rnnt).collect();
    assert_eq!(rnnt, vec![0.0, 0.1, 0.2, 0.3, 0.4]);
    assert!(records.iter().all(|r| r.mu_att == 0.5));
}

#[test]
fn bench_bad_grid_is_usage_error() {
    assert_eq!(
        run(&["bench", "--grid", "beams=zero"]).status.code(),
        Some(2)
    );
}
