use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn vineflood(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vineflood")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = vineflood(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf8")
}

fn synth(dir: &Path, preset: &str, seed: &str) {
    ok(&[
        "synth", "--preset", preset, "--train", "150", "--holdout", "20", "--m", "300", "--seed", seed, "--out",
        dir.to_str().unwrap(),
    ]);
}

#[test]
fn staged_commands_match_compare() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir, "calibration3", "4");
    let cfg = dir.join("config.json");
    let cfg = cfg.to_str().unwrap();
    let staged = dir.join("staged");
    let staged_s = staged.to_str().unwrap();

    let out = ok(&["fit-marginals", "--config", cfg, "--out", staged_s]);
    assert!(out.contains("level:"), "{out}");
    ok(&["fit-vine", "--config", cfg, "--out", staged_s, "--model", "all"]);
    ok(&["forecast", "--config", cfg, "--out", staged_s, "--model", "vine"]);
    ok(&["compare", "--config", cfg]);

    let a = fs::read(staged.join("forecast-vine.csv")).unwrap();
    let b = fs::read(dir.join("out/forecast-vine.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        fs::read(staged.join("marginals.json")).unwrap(),
        fs::read(dir.join("out/marginals.json")).unwrap()
    );
}

#[test]
fn evaluate_reports_one_row_per_variable_and_model() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir, "calibration3", "2");
    let cfg = dir.join("config.json");
    let cfg = cfg.to_str().unwrap();
    ok(&["fit-marginals", "--config", cfg]);
    ok(&["fit-vine", "--config", cfg, "--model", "all"]);
    ok(&["forecast", "--config", cfg, "--model", "all"]);
    let printed = ok(&["evaluate", "--config", cfg]);
    assert_eq!(printed.lines().count(), 1 + 9);

    let csv = fs::read_to_string(dir.join("out/evaluation.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("variable,model,n,mse,mis,nnse,dcor"));
    assert!(header.ends_with(",best"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 9);
    for var in ["level", "volatility", "flow"] {
        let mine: Vec<&&str> = rows.iter().filter(|r| r.starts_with(&format!("{var},"))).collect();
        assert_eq!(mine.len(), 3);
        // every metric has at least one best model per variable
        for m in ["mse", "mis", "nnse", "dcor"] {
            assert!(mine.iter().any(|r| r.rsplit(',').next().unwrap().split(';').any(|b| b == m)), "{var} {m}");
        }
    }
}

#[test]
fn compare_is_deterministic_and_seed_sensitive() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir, "calibration3", "3");
    let cfg = dir.join("config.json");
    let cfg = cfg.to_str().unwrap();
    let run = |out: &str, seed: &str| {
        let p = dir.join(out);
        ok(&["compare", "--config", cfg, "--out", p.to_str().unwrap(), "--seed", seed]);
        fs::read(p.join("forecast-vine.csv")).unwrap()
    };
    let a = run("a", "11");
    assert_eq!(a, run("b", "11"));
    assert_ne!(a, run("c", "12"));
}

#[test]
fn sentiment_writes_population_scaled_daily_series() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("lex.tsv"), "good\t3\nbad\t-2\nflood\t-1\n").unwrap();
    fs::write(
        dir.join("corpus.csv"),
        "date,text\n2016-01-01,good good\n2016-01-01,\"Bad flood, @someone https://t.co/x\"\n2016-01-03,GOOD!\n",
    )
    .unwrap();
    let out = dir.join("s/daily.csv");
    ok(&[
        "sentiment",
        "--corpus",
        dir.join("corpus.csv").to_str().unwrap(),
        "--lexicon",
        dir.join("lex.tsv").to_str().unwrap(),
        "--kind",
        "scored",
        "--population",
        "1000",
        "--name",
        "mood",
        "--out",
        out.to_str().unwrap(),
    ]);
    let text = fs::read_to_string(out).unwrap();
    assert_eq!(text, "date,mood\n2016-01-01,0.003\n2016-01-02,0\n2016-01-03,0.003\n");
}

#[test]
fn invalid_inputs_exit_with_validation_code() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("bad.json"), "{\"version\": 1, \"columns\": []}").unwrap();
    let out = vineflood(&["compare", "--config", dir.join("bad.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let missing = vineflood(&["fit-marginals", "--config", dir.join("nope.json").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));

    // marginals fitted on one column set, then reused with a different one
    synth(&dir.join("six"), "independent6", "1");
    synth(&dir.join("three"), "calibration3", "1");
    let six = dir.join("six/config.json");
    let three = dir.join("three/config.json");
    let shared = dir.join("shared");
    ok(&["fit-marginals", "--config", three.to_str().unwrap(), "--out", shared.to_str().unwrap()]);
    let out = vineflood(&["fit-vine", "--config", six.to_str().unwrap(), "--out", shared.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("signature"), "{}", String::from_utf8_lossy(&out.stderr));
}
