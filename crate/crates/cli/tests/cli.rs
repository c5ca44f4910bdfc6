use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn asset(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("assets").join(rel)
}

fn dtsnsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dtsnsim")).args(args).env_remove("DTSNSIM_SEED").output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn compare_prints_json_for_the_bundled_preset() {
    let o = dtsnsim(&["compare", "--scenario", s(&asset("scenarios/paper_preset.json"))]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["ratio"].as_f64().unwrap() > 100.0);
    assert!(v["difference"].as_f64().unwrap() < 0.0);
    assert_eq!(v["constraints_satisfied"], true);
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&dtsnsim(&["--version"])), 0);
    assert_eq!(code(&dtsnsim(&["frobnicate"])), 1);
    assert_eq!(code(&dtsnsim(&["compare", "--scenario", "/nonexistent.json"])), 1);

    let bad_json = dir.path().join("bad.json");
    std::fs::write(&bad_json, "{ \"name\": ").unwrap();
    let o = dtsnsim(&["compare", "--scenario", s(&bad_json)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.json:1:"));

    let text = std::fs::read_to_string(asset("scenarios/paper_preset.json")).unwrap();
    let invalid = dir.path().join("invalid.json");
    std::fs::write(&invalid, text.replace("\"delta_params\": 700000.0", "\"delta_params\": 7000000000.0")).unwrap();
    let o = dtsnsim(&["compare", "--scenario", s(&invalid)]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("|w~| < |w|"));

    let o = dtsnsim(&[
        "simulate",
        "--scenario",
        s(&asset("scenarios/paper_preset.json")),
        "--preset",
        "fig42",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn seed_override_must_be_numeric() {
    let o = Command::new(env!("CARGO_BIN_EXE_dtsnsim"))
        .args(["compare", "--scenario", s(&asset("scenarios/paper_preset.json"))])
        .env("DTSNSIM_SEED", "abc")
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("DTSNSIM_SEED"));
}

#[test]
fn bundled_scripts_pass_and_write_a_report() {
    for name in ["honest", "corrupt_a", "corrupt_b", "corrupt_c", "reverse_attack"] {
        let dir = tempfile::tempdir().unwrap();
        let o = dtsnsim(&["security", "--script", s(&asset(&format!("scripts/{name}.adv"))), "--out", s(dir.path())]);
        assert_eq!(code(&o), 0, "{name}: {}", String::from_utf8_lossy(&o.stderr));
        let report = std::fs::read_to_string(dir.path().join("security_report.csv")).unwrap();
        assert!(report.starts_with("check,kind,result,detail\n"));
        assert!(!report.contains(",fail,"), "{report}");
        assert!(report.contains("indistinguishability"));
    }
}

#[test]
fn malformed_script_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("bad.adv");
    std::fs::write(&script, "name x\ncorrupt Z\n").unwrap();
    let o = dtsnsim(&["security", "--script", s(&script), "--out", s(dir.path())]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.adv") && err.contains("line 2"), "{err}");
}

#[test]
fn reverse_attack_finds_nothing_and_forward_queries_succeed() {
    let o = dtsnsim(&["attack", "--reverse", "--trials", "1000", "--seed", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        String::from_utf8(o.stdout).unwrap(),
        "prompt_type,prompt_number,correct,incorrect\nreverse,1000,0,1000\n"
    );
    let o = dtsnsim(&["attack", "--forward", "--trials", "100"]);
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "prompt_type,prompt_number,correct,incorrect\nnormal,100,100,0\n");
    assert_eq!(code(&dtsnsim(&["attack", "--reverse", "--trials", "0"])), 1);
}

fn run_preset(preset: &str, scenario: &str, out: &Path) -> Vec<(String, Vec<u8>)> {
    let o = dtsnsim(&["simulate", "--scenario", s(&asset(scenario)), "--preset", preset, "--out", s(out)]);
    assert_eq!(code(&o), 0, "{preset}: {}", String::from_utf8_lossy(&o.stderr));
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(out)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn presets_write_csv_and_svg_and_rerun_identically() {
    for preset in ["fig5", "fig6", "fig7", "fig8", "fig9", "custom:kb_period=1,5,10"] {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let first = run_preset(preset, "scenarios/paper_preset.json", a.path());
        let second = run_preset(preset, "scenarios/paper_preset.json", b.path());
        assert_eq!(first, second, "{preset}");
        let csvs = first.iter().filter(|(n, _)| n.ends_with(".csv")).count();
        let svgs = first.iter().filter(|(n, _)| n.ends_with(".svg")).count();
        assert!(csvs >= 1 && csvs == svgs, "{preset}: {first:?}");
        for (name, bytes) in first.iter().filter(|(n, _)| n.ends_with(".csv")) {
            let text = String::from_utf8(bytes.clone()).unwrap();
            assert!(text.starts_with("sweep_value,fl_"), "{name}");
        }
    }
}

#[test]
fn case_study_writes_events_decisions_and_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let files = run_preset("casestudy", "scenarios/smart_home.json", dir.path());
    let names: Vec<&str> = files.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["casestudy_accuracy.csv", "casestudy_decisions.csv", "casestudy_events.csv"]);
    let accuracy = String::from_utf8(files[0].1.clone()).unwrap();
    assert_eq!(
        accuracy,
        "prompt_type,prompt_number,correct,incorrect\nnormal,100,100,0\nreverse,500,0,500\nreverse,1000,0,1000\n"
    );
    let decisions = String::from_utf8(files[1].1.clone()).unwrap();
    assert!(decisions.starts_with("tick,entity,decision\n"));
    assert!(decisions.lines().skip(1).all(|l| l.contains("set brightness to") || l.contains("keep")), "{decisions}");
    assert!(String::from_utf8_lossy(&files[2].1).starts_with("tick,actor,event,units,seconds,paradigm\n"));
}

#[test]
fn seeded_runs_are_reproducible() {
    let run = |seed: &str| {
        let dir = tempfile::tempdir().unwrap();
        let o = Command::new(env!("CARGO_BIN_EXE_dtsnsim"))
            .args(["simulate", "--scenario", s(&asset("scenarios/paper_preset.json")), "--preset", "fig8", "--out"])
            .arg(dir.path())
            .env("DTSNSIM_SEED", seed)
            .output()
            .unwrap();
        assert_eq!(code(&o), 0);
        std::fs::read(dir.path().join("fig8.csv")).unwrap()
    };
    assert_eq!(run("5"), run("5"));
}
