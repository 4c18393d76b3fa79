use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

const SMALL_SPEED: &str = r#"
kind = "speed"

[model]
chi = 0.2
a = 1.0
b = 1.0
lambda = 1.0
mu = 1.0

[grid]
half_length = 80.0
h = 0.2

[solver]
dt = 0.05
t_end = 20.0
observer_stride = 10

[initial]
kind = "compact"
center = 0.0
width = 2.0
height = 1.0

[analysis]
fit_window = [10.0, 20.0]
"#;

fn ksfront(args: &[&str], config: Option<&str>, dir: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ksfront"));
    cmd.args(args).env("RUST_LOG", "off");
    if let Some(text) = config {
        let path = dir.join("scenario.toml");
        std::fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.output().unwrap()
}

/// Every file under `dir`, relative path to bytes.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                files.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    files
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn speed_run_writes_csv_with_fixed_format() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = ksfront(&["speed", "--out", out.to_str().unwrap()], Some(SMALL_SPEED), tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("c_hat_right"));
    assert!(stdout.contains("wall-clock"));

    let front = std::fs::read_to_string(out.join("front.csv")).unwrap();
    assert!(!front.contains('\r'));
    let mut lines = front.lines();
    assert_eq!(lines.next(), Some("t,left_pos,right_pos,theta"));
    let row: Vec<&str> = lines.nth(5).unwrap().split(',').collect();
    let mantissa = row[2].split('e').next().unwrap().trim_start_matches('-').replace('.', "");
    assert_eq!(mantissa.len(), 17, "{}", row[2]);

    let report = std::fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("[config]"));
    assert!(!report.contains("wall-clock"));
}

#[test]
fn identical_config_gives_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let sweep = SMALL_SPEED.replace("kind = \"speed\"", "kind = \"sweep\"")
        + "sweep_param = \"chi\"\nsweep_values = [0.0, 0.1, 0.2]\nsweep_kind = \"speed\"\n";
    let mut snaps = Vec::new();
    for (k, jobs) in ["1", "3"].into_iter().enumerate() {
        let out = tmp.path().join(format!("run{k}"));
        let o = ksfront(&["sweep", "--jobs", jobs, "--out", out.to_str().unwrap()], Some(&sweep), tmp.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        snaps.push(snapshot(&out));
    }
    assert!(snaps[0].contains_key("sweep.csv"));
    assert!(snaps[0].keys().any(|k| k.starts_with("point_002")));
    assert_eq!(snaps[0], snaps[1]);
}

#[test]
fn failed_assertion_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = SMALL_SPEED.to_string() + "expect_speed = 3.0\nspeed_tolerance = 0.01\n";
    let out = tmp.path().join("out");
    let o = ksfront(&["speed", "--out", out.to_str().unwrap()], Some(&cfg), tmp.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL speed"));
}

#[test]
fn bad_configs_exit_two_with_a_message() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        (SMALL_SPEED.replace("[analysis]", "[analysis]\nthetta = 0.5"), "thetta"),
        (SMALL_SPEED.replace("chi = 0.2", "chi = 1.5"), "chi"),
        (SMALL_SPEED.replace("half_length = 80.0", "half_length = 10.0"), "domain-size policy"),
        (SMALL_SPEED.replace("dt = 0.05", "dt = 5.0"), "dt"),
    ];
    for (text, needle) in cases {
        let o = ksfront(&["speed", "--out", tmp.path().join("x").to_str().unwrap()], Some(&text), tmp.path());
        assert_eq!(o.status.code(), Some(2), "{needle}: {}", stderr(&o));
        assert!(stderr(&o).contains(needle), "{needle} not in {}", stderr(&o));
    }

    let o = ksfront(&["simulate"], None, tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--config"));
}

#[test]
fn selftest_subcommand_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg =
        "[model]\nchi = 0.5\na = 1.0\nb = 1.0\nlambda = 2.0\nmu = 1.0\n[analysis]\nseed = 3\nselftest_fields = 10\nselftest_cells = 256\n";
    let out = tmp.path().join("out");
    let o = ksfront(&["kernel-selftest", "--out", out.to_str().unwrap()], Some(cfg), tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS oracle_equivalence"));
}
