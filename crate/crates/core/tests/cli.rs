use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ionmod(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ionmod"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("IONMOD_SEED")
        .output()
        .expect("binary runs")
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let header = reader
        .headers()
        .unwrap()
        .iter()
        .map(str::to_owned)
        .collect();
    let rows = reader
        .records()
        .map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

const SMALL_PBS: [&str; 6] = ["--trials", "3", "--bins", "4", "--dt", "1e-5"];

#[test]
fn gating_traces() {
    let dir = tempfile::tempdir().unwrap();
    let out = ionmod(&["gating"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let (header, rows) = read_csv(&dir.path().join("gating_von_200.csv"));
    assert_eq!(header, ["t_ms", "p_open"]);
    // 0.01 ms samples over 40 ms plus the end point; the 20 ms switch is on the grid.
    assert_eq!(rows.len(), 4001);
    let at = |ms: f64| rows.iter().find(|r| (r[0] - ms).abs() < 1e-9).unwrap()[1];
    assert!((at(20.0) - 0.995).abs() < 1e-3);
    let (_, closed) = read_csv(&dir.path().join("gating_von_m200.csv"));
    assert!(closed.iter().all(|r| r[1] <= 1e-8));

    let out = ionmod(
        &["gating", "--segment", "2.5:100", "--segment", "1:-100"],
        dir.path(),
    );
    assert!(out.status.success());
    let (_, rows) = read_csv(&dir.path().join("gating_custom.csv"));
    // 350 uniform samples, the 2.5 ms boundary already on the grid, plus the end.
    assert_eq!(rows.len(), 351);
}

#[test]
fn analytic_and_bound_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let out = ionmod(&["analytic", "--quick"], dir.path());
    assert!(out.status.success());
    for tag in ["N100", "N500", "N1e7"] {
        let (header, rows) = read_csv(&dir.path().join(format!("analytic_{tag}.csv")));
        assert_eq!(header, ["t_s", "w_mo_per_s", "M_mo"]);
        assert_eq!(rows[0][0], 0.0);
        assert_eq!(rows[0][2], 0.0);
        assert_eq!(rows.len(), 21);
    }
    let out = ionmod(
        &[
            "bound",
            "--quick",
            "--n-terms",
            "300",
            "--tail-tol",
            "1e-13",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let (header, rows) = read_csv(&dir.path().join("bound_N100.csv"));
    assert_eq!(header, ["t_s", "w_u_mo_per_s", "M_u_mo"]);
    assert!(rows.windows(2).all(|p| p[1][2] >= p[0][2]));
}

#[test]
fn pbs_seed_and_env_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("pbs_N1e7_dt1e-5.csv");
    let mut args = vec!["pbs", "--seed", "42"];
    args.extend(SMALL_PBS);
    assert!(ionmod(&args, dir.path()).status.success());
    let first = fs::read_to_string(&file).unwrap();
    assert!(first.starts_with("t_s,w_hat_mo_per_s,ci_mo_per_s,M_hat_mo\n"));
    assert_eq!(first.lines().count(), 5);

    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ionmod"));
    cmd.arg("pbs")
        .args(SMALL_PBS)
        .arg("--out")
        .arg(dir.path())
        .env("IONMOD_SEED", "42");
    assert!(cmd.output().unwrap().status.success());
    assert_eq!(fs::read_to_string(&file).unwrap(), first);

    args[2] = "43";
    assert!(ionmod(&args, dir.path()).status.success());
    assert_ne!(fs::read_to_string(&file).unwrap(), first);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| ionmod(args, dir.path()).status.code();
    assert_eq!(code(&["analytic", "--set", "transmitter.N=3e8"]), Some(2));
    assert_eq!(
        code(&["analytic", "--set", "transmitter.nonsense=1"]),
        Some(2)
    );
    assert_eq!(code(&["pbs", "--bins", "0"]), Some(2));
    assert_eq!(code(&["gating", "--segment", "oops"]), Some(2));
    assert_eq!(
        code(&["analytic", "--config", "/nonexistent/ionmod.toml"]),
        Some(4)
    );
    assert_eq!(
        code(&["analytic", "--set", "numerics.talbot_nodes=2"]),
        Some(2)
    );

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[transmitter\n").unwrap();
    assert_eq!(
        code(&["analytic", "--config", bad.to_str().unwrap()]),
        Some(2)
    );

    // A file where the output directory should be.
    let blocker = dir.path().join("blocker");
    fs::write(&blocker, "").unwrap();
    let out = ionmod(&["gating"], &blocker);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("blocker"));
}

#[test]
fn config_file_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "[numerics]\nchannel_counts = [250.0]\ngrid_points = 12\n\n[transmitter]\nT1 = 0.01\n",
    )
    .unwrap();
    let out = ionmod(&["analytic", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success());
    let (_, rows) = read_csv(&dir.path().join("analytic_N250.csv"));
    assert_eq!(rows.len(), 13);
    assert!((rows.last().unwrap()[0] - 0.01).abs() < 1e-15);
}

#[test]
fn transfer_table_is_hidden_but_available() {
    let dir = tempfile::tempdir().unwrap();
    let help = ionmod(&["--help"], dir.path());
    assert!(!String::from_utf8_lossy(&help.stdout).contains("transfer-table"));
    assert!(ionmod(&["transfer-table"], dir.path()).status.success());
    let (header, rows) = read_csv(&dir.path().join("transfer_N100.csv"));
    assert_eq!(header[0], "s_re");
    assert!(rows.iter().filter(|r| r[1] == 0.0).all(|r| r[2] > 0.0));
}
