use std::path::Path;
use std::process::{Command, Output};

const MINIMAL: &str = r#"{
    "scenario": {
        "num_clients": 3, "num_channels": 2,
        "reward": {"alpha": 1.0, "beta": 1},
        "latency": [{"family": "fixed", "latencies": [1.0, 2.0, 4.0]}]
    },
    "policies": [{"kind": "bsfl"}],
    "horizon": {"rounds": 10},
    "seeds": [0]
}"#;

fn bsfl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bsfl")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn files_under(root: &Path) -> Vec<String> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_string_lossy().into_owned());
            }
        }
    }
    out.sort();
    out
}

#[test]
fn minimal_run_writes_one_csv_and_one_json() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", MINIMAL);
    let out_dir = tmp.path().join("out");
    let o = bsfl(&["run", &cfg, "--output-dir", out_dir.to_str().unwrap(), "--no-plots"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let files = files_under(&out_dir);
    assert_eq!(files, vec!["metrics/bsfl_seed0.csv", "summary.json"]);
    let csv = std::fs::read_to_string(out_dir.join("metrics/bsfl_seed0.csv")).unwrap();
    assert!(csv.starts_with(
        "t,policy,seed,cumulative_regret,instantaneous_gap,realized_reward,iteration_latency,cumulative_clock,chosen_set\n"
    ));
    assert_eq!(csv.lines().count(), 11);
}

#[test]
fn rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let text = MINIMAL
        .replace("[0]", "[0, 1]")
        .replace(r#"[{"kind": "bsfl"}]"#, r#"[{"kind": "bsfl"}, {"kind": "random_proportional"}]"#);
    let cfg = write(tmp.path(), "c.json", &text);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (dir, par) in [(&a, "1"), (&b, "3")] {
        let o = bsfl(&["run", &cfg, "--output-dir", dir.to_str().unwrap(), "--parallelism", par]);
        assert!(o.status.success());
    }
    let files = files_under(&a);
    assert!(files.iter().any(|f| f.ends_with(".svg")));
    for f in files.iter().filter(|f| f.ends_with(".csv")) {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn m_above_k_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", &MINIMAL.replace("\"num_channels\": 2", "\"num_channels\": 5"));
    let o = bsfl(&["validate", &cfg]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("scenario.num_channels"));
}

#[test]
fn parse_errors_carry_a_line_number() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", &MINIMAL.replace("\"horizon\"", "\"horizn\""));
    let o = bsfl(&["run", &cfg]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("horizn") && err.contains("line 8"), "{err}");
}

#[test]
fn compare_optimizers_writes_race_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let text = MINIMAL.replace(
        "\"seeds\": [0]",
        r#""seeds": [0], "race": {"instances": 4, "num_clients": 8, "num_channels": 3, "steps": 200}"#,
    );
    let cfg = write(tmp.path(), "c.json", &text);
    let out_dir = tmp.path().join("out");
    let o = bsfl(&["compare-optimizers", &cfg, "--output-dir", out_dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        files_under(&out_dir),
        vec!["race/energy_race.svg", "race/instances.csv", "race/mean_trace.csv", "race/summary.json"]
    );
    let o = bsfl(&["compare-optimizers", &write(tmp.path(), "d.json", MINIMAL)]);
    assert!(!o.status.success());
}
