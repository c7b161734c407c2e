use std::process::Command;

use qldev::cli::run_with;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut argv = vec!["qldev".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run_with(&argv, None, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn metrics_example() {
    let (code, out, _) = run(&["metrics", "--family", "equatorial", "--r", "0.9", "--theta", "0.4"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!((v["j_sld"].as_f64().unwrap() - 0.81).abs() < 1e-8);
    assert!(v["j_kmb"].as_f64().unwrap() > 0.81);
}

#[test]
fn help_exits_zero() {
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("simulate"));
    let (code, _, _) = run(&["simulate", "--help"]);
    assert_eq!(code, 0);
}

#[test]
fn gaussian_number_simulation_is_byte_identical() {
    let args = [
        "simulate", "--strategy", "gaussian-number", "--nbar", "1", "--theta", "0", "--eps", "0.5", "--ngrid",
        "50:400:50",
    ];
    let (code, first, _) = run(&args);
    assert_eq!(code, 0);
    let (_, second, _) = run(&args);
    assert_eq!(first, second);
    let lines: Vec<&str> = first.lines().collect();
    assert_eq!(lines[0], "strategy,theta_true,epsilon,n,trials,hits,p_hat,wilson_lo,wilson_hi");
    assert_eq!(lines.len(), 9);
    // n = 50, ε = 0.5: (1/2)^{⌈12.5⌉}.
    let p: f64 = lines[1].split(',').nth(6).unwrap().parse().unwrap();
    assert!((p - 0.5f64.powi(13)).abs() < 1e-15);
}

#[test]
fn worker_hint_does_not_change_output() {
    let base = [
        "simulate", "--family", "equatorial", "--r", "0.8", "--strategy", "two-stage", "--theta", "0.5", "--eps",
        "0.3", "--ngrid", "20:60:20", "--trials", "400", "--seed", "9",
    ];
    let outputs: Vec<String> = ["1", "2", "8"]
        .iter()
        .map(|w| {
            let mut a = base.to_vec();
            a.extend(["--workers", w]);
            run(&a).1
        })
        .collect();
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn every_subcommand_has_a_dry_run() {
    let cases: Vec<Vec<&str>> = vec![
        vec!["metrics", "--family", "equatorial", "--theta", "0.1"],
        vec!["limits", "--family", "equatorial", "--theta", "0.3"],
        vec!["simulate", "--strategy", "fixed-sld", "--family", "equatorial", "--eps", "0.3"],
        vec!["rates", "--strategy", "fixed-sld", "--family", "equatorial", "--eps", "0.3"],
        vec!["schur", "--family", "equatorial", "--theta0", "0.5", "--theta1", "0"],
        vec!["bounds", "--family", "equatorial", "--theta", "0.4", "--eps", "0.1,0.2"],
        vec!["expfam", "--threshold", "0.6", "--rate"],
    ];
    for mut c in cases {
        c.push("--dry-run");
        let (code, out, err) = run(&c);
        assert_eq!(code, 0, "{c:?}: {err}");
        assert!(!out.is_empty(), "{c:?}");
    }
}

#[test]
fn table_subcommands() {
    let (code, out, _) = run(&["schur", "--family", "equatorial", "--theta0", "0.5", "--theta1", "0"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "m,D,lower,value,upper");
    assert_eq!(lines.len(), 7);
    for row in &lines[1..] {
        let v: Vec<f64> = row.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(v[2] <= v[3] + 1e-9 && v[3] <= v[4] + 1e-9);
    }
    let (code, out, _) = run(&["limits", "--family", "equatorial", "--theta", "0.3", "--eps", "0.001"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("eps,two_d,four_b2,affinity,j_sld,j_kmb"));
    let (code, out, _) = run(&["bounds", "--family", "equatorial", "--r", "0.9", "--theta", "0.4", "--eps", "0.3"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!((v[0]["j_half"].as_f64().unwrap() - 0.405).abs() < 1e-9);
    let (code, out, _) = run(&["expfam", "--p", "0.4", "--threshold", "0.6", "--rate"]);
    assert_eq!(code, 0);
    assert!(out.contains("0.0810"));
}

#[test]
fn error_exit_codes() {
    let (code, _, err) = run(&["metrics", "--family", "equatorial", "--r", "1.5", "--theta", "0"]);
    assert_eq!(code, 2);
    let v: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
    assert!(v["error"].is_string());
    assert_eq!(err.trim().lines().count(), 1);
    let (code, _, err) = run(&["metrics", "--family", "gaussian", "--trunc", "10", "--theta", "2"]);
    assert_eq!(code, 3);
    assert!(err.contains("use d >="));
    let (code, _, err) = run(&["metrics", "--bogus"]);
    assert_eq!(code, 2);
    assert_eq!(err.trim().lines().count(), 1);
    let (code, _, _) = run(&["simulate", "--strategy", "fixed-sld", "--eps", "0.3", "--ngrid", "10:5:1"]);
    assert_eq!(code, 2);
}

#[test]
fn seed_environment_variable() {
    let bin = env!("CARGO_BIN_EXE_qldev");
    let args = [
        "simulate", "--family", "equatorial", "--strategy", "fixed-sld", "--theta", "0.2", "--theta0", "0.2", "--eps",
        "0.2", "--ngrid", "10:30:10", "--trials", "500", "--seed", "1",
    ];
    let plain = Command::new(bin).args(args).env_remove("QLDEV_SEED").output().unwrap();
    let same = Command::new(bin).args(args).env("QLDEV_SEED", "1").output().unwrap();
    let other = Command::new(bin).args(args).env("QLDEV_SEED", "2").output().unwrap();
    assert!(plain.status.success());
    assert_eq!(plain.stdout, same.stdout);
    assert_ne!(plain.stdout, other.stdout);
    let bad = Command::new(bin).args(args).env("QLDEV_SEED", "x").output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
