use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn umco(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_umco"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

#[test]
fn fb_capacity_of_sample_bssc() {
    let path = data("bssc_1_05.json");
    let o = umco(&["fb-capacity", "--channel", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("gain: 0.321928"), "{text}");
    assert!(text.contains("[0.600000 0.400000]"));
    assert!(text.contains("bias V(b_prev): [0.000000 0.000000]"));

    let pi = umco(&["fb-capacity", "--channel", path.to_str().unwrap(), "--method", "pi"]);
    assert!(stdout(&pi).contains("gain: 0.321928"));
}

#[test]
fn json_report_parses() {
    let path = data("bibo_umco.json");
    let o = umco(&["fb-capacity", "--channel", path.to_str().unwrap(), "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["gain"].as_f64().unwrap() - 0.214975).abs() < 1e-6);
}

#[test]
fn bssc_constrained_curve_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("curve.csv");
    let o = umco(&[
        "bssc",
        "--alpha",
        "0.9",
        "--beta",
        "0.2",
        "--kappa",
        "0.5",
        "--sweep",
        "kappa=0:1:0.05",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let table = rows(&std::fs::read_to_string(&out).unwrap());
    assert_eq!(table[0][8], "capacity_bits");
    assert_eq!(table.len(), 22);
    let kappas: Vec<f64> = table[1..].iter().map(|r| r[2].parse().unwrap()).collect();
    assert_eq!(kappas[20], 1.0);
    assert_eq!(kappas[3], 0.15);
    let caps: Vec<f64> = table[1..].iter().map(|r| r[8].parse().unwrap()).collect();
    assert_eq!(caps[0], 0.0);
    for w in caps.windows(2) {
        assert!(w[1] >= w[0]);
    }
}

#[test]
fn error_exponent_rate_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("er.csv");
    let path = data("bssc_095_08.json");
    let o = umco(&[
        "error-exponent",
        "--channel",
        path.to_str().unwrap(),
        "--policy",
        "closed-form",
        "--rates",
        "0:0.4:0.01",
        "--n",
        "1000",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let table = rows(&std::fs::read_to_string(&out).unwrap());
    assert_eq!(
        table[0],
        ["rate_bits", "E_r_bits", "rho_star", "bound_at_n", "log2_raw_bound"]
    );
    assert_eq!(table.len(), 42);
    let er: Vec<f64> = table[1..].iter().map(|r| r[1].parse().unwrap()).collect();
    for w in er.windows(2) {
        assert!(w[1] <= w[0]);
    }
}

#[test]
fn closed_form_policy_needs_a_bssc() {
    let path = data("bibo_umco.json");
    let o = umco(&[
        "error-exponent",
        "--channel",
        path.to_str().unwrap(),
        "--policy",
        "closed-form",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn invalid_input_exits_1() {
    assert_eq!(umco(&["fb-capacity", "--bogus"]).status.code(), Some(1));
    assert_eq!(umco(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(umco(&["fb-capacity"]).status.code(), Some(1));
    assert_eq!(
        umco(&["bssc", "--alpha", "1.5", "--beta", "0.5"]).status.code(),
        Some(1)
    );
    assert_eq!(
        umco(&["bssc", "--alpha", "0.9", "--beta", "0.5", "--sweep", "gamma=0:1:0.5"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        umco(&["fb-capacity", "--channel", "/no/such/file.json"]).status.code(),
        Some(1)
    );

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"input_size": 2, "output_size": 2, "kernel": [[[0.5, 0.6], [0.5, 0.5]], [[0.5, 0.5], [0.5, 0.5]]]}"#,
    )
    .unwrap();
    assert_eq!(
        umco(&["fb-capacity", "--channel", bad.to_str().unwrap()]).status.code(),
        Some(1)
    );
    // a multiplier without a cost
    let path = data("bibo_umco.json");
    let o = umco(&[
        "fb-capacity",
        "--channel",
        path.to_str().unwrap(),
        "--multiplier",
        "0.5",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn help_exits_0() {
    let o = umco(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("check-conditions"));
    assert_eq!(umco(&["error-exponent", "--help"]).status.code(), Some(0));
}

#[test]
fn non_convergence_exits_2() {
    let path = data("bibo_umco.json");
    let o = umco(&["fb-capacity", "--channel", path.to_str().unwrap(), "--max-iter", "2"]);
    assert_eq!(o.status.code(), Some(2));

    // two closed classes: the relative values drift apart forever
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("two_class.json");
    let row = |base: usize, eps: f64, a: usize| {
        let mut r = vec![0.0; 4];
        r[base + a] = 1.0 - eps;
        r[base + 1 - a] = eps;
        r
    };
    let kernel: Vec<Vec<Vec<f64>>> = (0..4)
        .map(|b| {
            let (base, eps) = if b < 2 { (0, 0.1) } else { (2, 0.2) };
            vec![row(base, eps, 0), row(base, eps, 1)]
        })
        .collect();
    let doc = serde_json::json!({ "input_size": 2, "output_size": 4, "kernel": kernel });
    std::fs::write(&file, doc.to_string()).unwrap();
    let o = umco(&["fb-capacity", "--channel", file.to_str().unwrap(), "--max-iter", "500"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn failed_verification_exits_1() {
    let ok = umco(&["nofb-verify", "--alpha", "0.95", "--beta", "0.8"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).contains("holds: true"));
    let bad = umco(&["nofb-verify", "--alpha", "0.95", "--beta", "0.8", "--diagonal", "0.3"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("first violation at stage 1"));
}

#[test]
fn candidate_check() {
    let dir = tempfile::tempdir().unwrap();
    let path = data("bssc_1_05.json");
    let good = dir.path().join("good.json");
    std::fs::write(
        &good,
        r#"{"policy": [[0.6, 0.4], [0.4, 0.6]], "bias": [0, 0], "gain": 0.32192809488736235}"#,
    )
    .unwrap();
    let o = umco(&[
        "check-conditions",
        "--channel",
        path.to_str().unwrap(),
        "--candidate",
        good.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"policy": [[0.5, 0.5], [0.5, 0.5]], "bias": [0, 0], "gain": 0.3}"#,
    )
    .unwrap();
    let o = umco(&[
        "check-conditions",
        "--channel",
        path.to_str().unwrap(),
        "--candidate",
        bad.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn every_command_is_deterministic() {
    let bibo = data("bibo_umco.json");
    let bssc = data("bssc_095_08.json");
    let (bibo, bssc) = (bibo.to_str().unwrap(), bssc.to_str().unwrap());
    let invocations: Vec<Vec<&str>> = vec![
        vec!["fb-capacity", "--channel", bibo],
        vec!["finite-horizon", "--channel", bibo, "--horizon", "30"],
        vec!["constrained", "--channel", bssc, "--sweep", "kappa=0.1:0.7:0.2"],
        vec![
            "bssc",
            "--alpha",
            "0.95",
            "--beta",
            "0.8",
            "--sweep",
            "alpha=0.6:0.9:0.1",
        ],
        vec![
            "error-exponent",
            "--channel",
            bibo,
            "--rho-grid",
            "0:1:0.25",
            "--rates",
            "0:0.2:0.05",
        ],
        vec!["check-conditions", "--channel", bibo],
    ];
    for args in invocations {
        let a = umco(&args);
        let b = umco(&args);
        assert_eq!(
            a.status.code(),
            Some(0),
            "{args:?}: {}",
            String::from_utf8_lossy(&a.stderr)
        );
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}
