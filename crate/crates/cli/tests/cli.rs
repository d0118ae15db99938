use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pulsefeat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pulsefeat"))
        .args(args)
        .env("PULSEFEAT_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SYNTH: &str = r#"
seed = 5
duration_s = 40.0

[[couplings]]
feature = "pw_50"
component = "SBP"
gain_mmhg = 5.0
noise_std = 0.5
"#;

#[test]
fn synth_analyze_report_round() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("synth.toml");
    fs::write(&cfg, SYNTH).unwrap();
    let rec = dir.path().join("rec.csv");
    let truth = dir.path().join("truth.json");
    let out = pulsefeat(&[
        "synth",
        "--config",
        p(&cfg),
        "--seed",
        "8",
        "--out",
        p(&rec),
        "--truth",
        p(&truth),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fs::read_to_string(&rec).unwrap().starts_with("# fs=1000"));
    let t: serde_json::Value = serde_json::from_str(&fs::read_to_string(&truth).unwrap()).unwrap();
    assert_eq!(t["beats"].as_array().unwrap().len(), 50);

    let res = dir.path().join("res");
    let out = pulsefeat(&["analyze", "--record", p(&rec), "--out", p(&res)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in [
        "features.csv",
        "bp.csv",
        "association.csv",
        "ranking.json",
        "summary.json",
        "plotdata/sbp.csv",
    ] {
        assert!(res.join(f).is_file(), "{f}");
    }

    let res2 = dir.path().join("res2");
    assert_eq!(
        code(&pulsefeat(&[
            "analyze",
            "--record",
            p(&rec),
            "--out",
            p(&res2)
        ])),
        0
    );
    for f in [
        "features.csv",
        "association.csv",
        "ranking.json",
        "summary.json",
    ] {
        assert_eq!(
            fs::read(res.join(f)).unwrap(),
            fs::read(res2.join(f)).unwrap(),
            "{f}"
        );
    }

    let out = pulsefeat(&["report", "--results", p(&res)]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("| Component | Rank |"));
    assert_eq!(text.lines().filter(|l| l.starts_with("| SBP |")).count(), 5);

    let ex = dir.path().join("ex");
    assert_eq!(
        code(&pulsefeat(&[
            "extract",
            "--record",
            p(&rec),
            "--out",
            p(&ex)
        ])),
        0
    );
    assert!(ex.join("features.csv").is_file() && ex.join("fiducials.csv").is_file());
    assert!(!ex.join("association.csv").exists());
}

#[test]
fn catalog_prints_222_rows() {
    let out = pulsefeat(&["catalog"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "index,family,name,dependencies,units"
    );
    assert_eq!(text.lines().count(), 223);
    let md = String::from_utf8(pulsefeat(&["catalog", "--format", "markdown"]).stdout).unwrap();
    assert!(md.contains("pw_50"));
}

#[test]
fn exit_codes_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&pulsefeat(&["frobnicate"])), 2);
    assert_eq!(code(&pulsefeat(&["analyze"])), 2);

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "# fs=100\nt,ecg,ppg\n0,1,2\n0.05,1,2\n").unwrap();
    assert_eq!(
        code(&pulsefeat(&[
            "analyze",
            "--record",
            p(&bad),
            "--out",
            p(&dir.path().join("o"))
        ])),
        3
    );

    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "unknown_key = 1\n").unwrap();
    let rec = dir.path().join("rec.csv");
    assert_eq!(
        code(&pulsefeat(&["synth", "--out", p(&rec), "--seed", "1"])),
        0
    );
    let out = pulsefeat(&[
        "analyze",
        "--record",
        p(&rec),
        "--config",
        p(&cfg),
        "--out",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(code(&out), 4);

    let short = dir.path().join("short.toml");
    fs::write(&short, "duration_s = 8.0\n").unwrap();
    let srec = dir.path().join("short.csv");
    assert_eq!(
        code(&pulsefeat(&[
            "synth",
            "--config",
            p(&short),
            "--out",
            p(&srec)
        ])),
        0
    );
    let out = pulsefeat(&[
        "analyze",
        "--record",
        p(&srec),
        "--out",
        p(&dir.path().join("s")),
    ]);
    assert_eq!(code(&out), 5, "{}", String::from_utf8_lossy(&out.stderr));

    let missing = dir.path().join("nope.csv");
    assert_eq!(
        code(&pulsefeat(&[
            "analyze",
            "--record",
            p(&missing),
            "--out",
            p(&dir.path().join("m"))
        ])),
        6
    );
}

#[test]
fn thread_cap_must_be_positive() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("rec.csv");
    let out = Command::new(env!("CARGO_BIN_EXE_pulsefeat"))
        .args(["synth", "--out", p(&rec)])
        .env("PULSEFEAT_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&out), 4);
}
