use std::path::Path;
use std::process::{Command, Output};

fn icubench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_icubench"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("spawn icubench")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn synth_cohort_run_and_compare() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let o = icubench(&["synth", "--patients", "250", "--seed", "3", "--out", p(&data)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("250 patients"));
    assert!(data.join("patient.csv").is_file());

    let audits = tmp.path().join("audits");
    let o = icubench(&["cohort", "--data-dir", p(&data), "--out", p(&audits)]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("included stays"));
    assert!(audits.join("cohort_audit.txt").is_file());

    let config = tmp.path().join("exp.conf");
    std::fs::write(&config, "# small and quick\nhidden = 4\nann_hidden = 4\nepochs = 1\nfolds = 3\n").unwrap();
    let mut reports = Vec::new();
    for model in ["lr", "ann"] {
        let out = tmp.path().join(model);
        let o = icubench(&[
            "run", "--config", p(&config), "--task", "mortality24", "--model", model, "--data-dir", p(&data), "--out", p(&out),
            "--set", "batch_size=16",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).contains("auroc"));
        let json = std::fs::read_to_string(out.join("report.json")).unwrap();
        assert!(json.contains("\"batch_size\": \"16\""), "flag and --set values reach the report");
        reports.push(out.join("report.json"));
    }

    let o = icubench(&["compare", p(&reports[0]), p(&reports[1]), "--paired"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("Paired"));
    assert!(stdout(&o).contains("auroc"));
}

#[test]
fn exit_codes_separate_config_input_and_usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.conf");
    std::fs::write(&bad, "folds = many\n").unwrap();
    let o = icubench(&["run", "--config", p(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error:"));

    let o = icubench(&["run", "--set", "unknown_key=1"]);
    assert_eq!(o.status.code(), Some(2));

    let missing = tmp.path().join("absent");
    let o = icubench(&["run", "--data-dir", p(&missing), "--out", p(&tmp.path().join("out"))]);
    assert_eq!(o.status.code(), Some(3));

    let o = icubench(&["cohort", "--data-dir", p(&missing)]);
    assert_eq!(o.status.code(), Some(3));

    let o = icubench(&["no-such-command"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(icubench(&["--help"]).status.code(), Some(0));
}
