use std::path::Path;
use std::process::{Command, Output};

use sicma_core::experiment::{
    read_sweep, write_sweep, Source, FIGURE_FILES, SWEEP_COLUMNS, SWEEP_FILE,
};
use sicma_core::Scheme;

fn sicma(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sicma"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn small_sweep(out: &Path) -> Output {
    sicma(
        &[
            "sweep",
            "--s-grid",
            "0.002,0.2",
            "--reps",
            "2",
            "--min-slots",
            "3000",
            "--mh-samples",
            "10000",
        ],
        out,
    )
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn sweep_writes_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = small_sweep(dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let text = std::fs::read_to_string(dir.path().join(SWEEP_FILE)).unwrap();
    let meta: Vec<&str> = text.lines().take_while(|l| l.starts_with('#')).collect();
    assert!(meta
        .iter()
        .any(|l| l.starts_with("# config_hash=") && l.len() == "# config_hash=".len() + 64));
    assert!(meta.contains(&"# seed_base=1"));
    assert!(meta.iter().any(|l| l.contains("bit/s")));
    let lines = data_lines(&text);
    assert_eq!(lines[0], SWEEP_COLUMNS.join(","));
    // fixed sim, fixed analytic, adaptive sim at two points
    assert_eq!(lines.len(), 1 + 6);

    let rows = read_sweep(dir.path().join(SWEEP_FILE)).unwrap();
    let kinds: Vec<(Scheme, Source, f64)> = rows
        .iter()
        .map(|r| (r.scheme, r.source, r.s_seconds))
        .collect();
    assert_eq!(
        kinds,
        vec![
            (Scheme::Fixed, Source::Sim, 0.002),
            (Scheme::Fixed, Source::Sim, 0.2),
            (Scheme::Fixed, Source::Analytic, 0.002),
            (Scheme::Fixed, Source::Analytic, 0.2),
            (Scheme::Adaptive, Source::Sim, 0.002),
            (Scheme::Adaptive, Source::Sim, 0.2),
        ]
    );
    for r in &rows {
        assert!((0.0..=1.0).contains(&r.pdr) && (0.0..=1.0).contains(&r.cbr));
        assert!(r.mean_access_delay > 0.0 && r.mean_aoi > r.mean_access_delay);
        match r.source {
            Source::Sim => assert!(r.slots >= 3000),
            Source::Analytic => {
                assert_eq!(r.slots, 0);
                for se in [
                    r.pdr_stderr,
                    r.delay_stderr,
                    r.thr_stderr,
                    r.nthr_stderr,
                    r.aoi_stderr,
                ] {
                    assert_eq!(se, 0.0);
                }
                assert!(r.pdr_mc_stderr > 0.0);
            }
        }
    }

    for (name, value, stderr) in FIGURE_FILES {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        let lines = data_lines(&text);
        assert_eq!(
            lines[0],
            format!("scheme,source,S_seconds,{value},{stderr},censored_flag")
        );
        assert_eq!(lines.len(), 7);
        for h in lines[0].split(',') {
            assert!(SWEEP_COLUMNS.contains(&h), "{h}");
        }
    }
    assert!(dir.path().join("mh_table.csv").exists());
}

#[test]
fn compare_flags_corrupted_column() {
    let dir = tempfile::tempdir().unwrap();
    assert!(small_sweep(dir.path()).status.success());
    let rows = read_sweep(dir.path().join(SWEEP_FILE)).unwrap();

    // Simulated rows replaced by the closed form: must pass.
    let mut clean = rows.clone();
    for r in clean
        .iter_mut()
        .filter(|r| r.source == Source::Sim && r.scheme == Scheme::Fixed)
    {
        let a = rows
            .iter()
            .find(|a| a.source == Source::Analytic && a.s_seconds == r.s_seconds)
            .unwrap();
        *r = sicma_core::experiment::SweepRow {
            source: Source::Sim,
            slots: 10_000,
            ..a.clone()
        };
    }
    let ok_dir = dir.path().join("ok");
    write_sweep(&ok_dir, &clean, &[]).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_sicma"))
        .arg("compare")
        .arg(ok_dir.join(SWEEP_FILE))
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    assert!(ok_dir.join("validation.json").exists());

    // Halve one simulated delay.
    let mut bad = clean;
    let target = bad
        .iter_mut()
        .find(|r| r.source == Source::Sim && r.scheme == Scheme::Fixed && r.s_seconds == 0.2)
        .unwrap();
    target.mean_access_delay *= 0.5;
    target.delay_stderr = 1e-4;
    let bad_dir = dir.path().join("bad");
    write_sweep(&bad_dir, &bad, &[]).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_sicma"))
        .arg("compare")
        .arg(bad_dir.join(SWEEP_FILE))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        stdout.contains("FAIL mean_access_delay at S=0.2"),
        "{stdout}"
    );
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(bad_dir.join("validation.json")).unwrap())
            .unwrap();
    assert_eq!(json["pass"], false);
}

#[test]
fn mh_precompute_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mh.csv");
    let args = ["mh", "--samples", "2000", "--h-max", "4"];
    let first = sicma(&args, &path);
    assert!(
        first.status.success(),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    // 45 adaptive thresholds (the fixed one equals k = n), h = 0..=4 each
    assert!(String::from_utf8_lossy(&first.stdout).contains("sampled 225 entries"));
    let before = std::fs::read(&path).unwrap();
    let second = sicma(&args, &path);
    assert!(String::from_utf8_lossy(&second.stdout).contains("sampled 0 entries, 225 in cache"));
    assert_eq!(before, std::fs::read(&path).unwrap());

    let clash = sicma(&["mh", "--samples", "3000", "--h-max", "4"], &path);
    assert_eq!(clash.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&clash.stderr).is_empty());
}

#[test]
fn bad_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "n = 50\nl = \"500\"\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_sicma"))
        .args(["single", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn single_prints_metrics() {
    let out = Command::new(env!("CARGO_BIN_EXE_sicma"))
        .args([
            "single",
            "--scheme",
            "both",
            "--s",
            "0.05",
            "--reps",
            "2",
            "--min-slots",
            "2000",
        ])
        .args(["--analytic", "--mh-samples", "5000"])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for key in ["fixed", "adaptive"] {
        assert_eq!(json[key]["replications"], 2);
        assert!(json[key]["ledger"]["generated"].as_u64().unwrap() > 0);
    }
    assert!(json["analytic"]["t_star"].as_f64().unwrap() > 0.05);
}
