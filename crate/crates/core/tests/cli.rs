use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_noisy-bcast"))
}

#[test]
fn sweep_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let out = |name: &str| dir.path().join(name);
    for name in ["a.csv", "b.csv"] {
        let status = bin()
            .args([
                "sweep",
                "--protocol",
                "and",
                "--n",
                "8,20",
                "--p",
                "0.2,0.6",
                "--trials",
                "30",
                "--seed",
                "5",
            ])
            .args(["--jobs", "2", "--out"])
            .arg(out(name))
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = fs::read(out("a.csv")).unwrap();
    assert_eq!(a, fs::read(out("b.csv")).unwrap());
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 5);
}

#[test]
fn env_seed_is_a_default_only() {
    let run = |env: Option<&str>, flag: Option<&str>| {
        let mut c = bin();
        c.args([
            "run",
            "--protocol",
            "and",
            "--n",
            "6",
            "--p",
            "0.7",
            "--trials",
            "40",
        ]);
        if let Some(s) = flag {
            c.args(["--seed", s]);
        }
        match env {
            Some(e) => c.env("NOISY_BCAST_SEED", e),
            None => c.env_remove("NOISY_BCAST_SEED"),
        };
        c.output().unwrap().stdout
    };
    assert_eq!(run(Some("3"), None), run(None, Some("3")));
    assert_eq!(run(Some("99"), Some("3")), run(None, Some("3")));
}

#[test]
fn json_mirrors_csv() {
    let out = bin()
        .args([
            "run",
            "--protocol",
            "learn-input",
            "--n",
            "16",
            "--p",
            "0",
            "--trials",
            "3",
            "--format",
            "json",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v[0]["protocol"], "learn-input");
    assert_eq!(v[0]["successes"], 3);
    assert_eq!(v[0]["ci_hi"], 1.0);
}

#[test]
fn bad_configuration_exits_nonzero() {
    let out = bin()
        .args([
            "run",
            "--protocol",
            "and",
            "--n",
            "4",
            "--p",
            "1.5",
            "--trials",
            "1",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let out = bin()
        .args(["run", "--protocol", "and", "--n", "4,5", "--p", "0.1"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn failures_still_exit_zero() {
    let out = bin()
        .args([
            "run",
            "--protocol",
            "learn-input",
            "--n",
            "120",
            "--p",
            "0.7",
            "--trials",
            "2",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
}

#[test]
fn scaling_and_theta_verbs() {
    let out = bin()
        .args(["scaling", "--n", "16,128", "--p", "0"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("n,rounds,depth,log_star\n16,"));
    assert!(text.contains("\n128,") && text.lines().nth(2).unwrap().split(',').nth(2) == Some("1"));

    let out = bin()
        .args([
            "theta-table",
            "--n",
            "256",
            "--p",
            "0.5",
            "--a",
            "2",
            "--b",
            "4",
        ])
        .output()
        .unwrap();
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "l,theta\n2,0.25\n3,0.5\n4,0.6875\n"
    );
}
