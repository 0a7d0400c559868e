use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn impulse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_impulse"))
        .args(args)
        .env_remove("IMPULSE_ENERGY_TABLE")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fc(
    in_dim: usize,
    out_dim: usize,
    neuron: &str,
    threshold: i64,
    w: impl Fn(usize, usize) -> i64,
) -> Value {
    let weights: Vec<Vec<i64>> = (0..in_dim)
        .map(|i| (0..out_dim).map(|o| w(i, o)).collect())
        .collect();
    json!({"kind": "fc", "in_dim": in_dim, "out_dim": out_dim, "neuron": neuron,
           "threshold": threshold, "weights": weights})
}

fn pseudo(i: usize, o: usize) -> i64 {
    ((i * 7 + o * 13) % 64) as i64 - 32
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        Fixture {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, text: &str) -> String {
        let p = self.path(name);
        fs::write(&p, text).unwrap();
        p.to_string_lossy().into_owned()
    }

    fn model(&self, name: &str, v: &Value) -> String {
        self.write(name, &serde_json::to_string_pretty(v).unwrap())
    }

    /// Every `period`-th input neuron spikes at each timestep.
    fn input(&self, name: &str, width: usize, timesteps: usize, period: usize) -> String {
        let mut text = String::new();
        for t in 0..timesteps {
            for n in (t % period..width).step_by(period) {
                text.push_str(&format!("{t}\t0\t{n}\n"));
            }
        }
        self.write(name, &text)
    }
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn imdb_model() -> Value {
    let mut hidden = fc(128, 128, "LIF", 30, |i, o| pseudo(o, i));
    hidden["leak"] = json!(2);
    json!({
        "timesteps": 5,
        "layers": [fc(100, 128, "RMP", 40, pseudo), hidden, fc(128, 1, "IF", 20, pseudo)]
    })
}

#[test]
fn run_reports_macros_and_matches_oracle() {
    let f = Fixture::new();
    let model = f.model("m.json", &imdb_model());
    let input = f.input("in.tsv", 100, 5, 3);
    let out = s(&f.path("out.tsv"));
    let vcsv = s(&f.path("v.csv"));
    let report = s(&f.path("cost.csv"));
    let trace = s(&f.path("trace.jsonl"));
    let o = impulse(&[
        "run",
        &model,
        &input,
        "-o",
        &out,
        "--vmem-trace",
        &vcsv,
        "--report",
        &report,
        "--instr-trace",
        &trace,
        "--oracle-check",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("macros: 23"), "{text}");
    assert!(text.contains("oracle: equal"), "{text}");

    let v = fs::read_to_string(&vcsv).unwrap();
    assert!(v.starts_with("t,layer,neuron,v_value\n"));
    assert_eq!(v.lines().count(), 1 + 5 * (128 + 128 + 1));
    let cost = fs::read_to_string(&report).unwrap();
    assert!(cost.starts_with("kind,count,energy_pj,cycles\n"));
    let spikes = fs::read_to_string(&out).unwrap();
    assert!(spikes.lines().all(|l| l.split('\t').nth(1) != Some("0")));
    let lines: Vec<Value> = fs::read_to_string(&trace)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(lines.iter().any(|e| e["kind"] == "AccW2V"));
    assert!(lines[0].get("t").is_some() && lines[0].get("macro_id").is_some());
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let f = Fixture::new();
    let model = f.model("m.json", &imdb_model());
    let input = f.input("in.tsv", 100, 5, 2);
    let mut seen = Vec::new();
    for i in 0..2 {
        let out = s(&f.path(&format!("o{i}.tsv")));
        let rep = s(&f.path(&format!("r{i}.csv")));
        assert!(
            impulse(&["run", &model, &input, "-o", &out, "--report", &rep])
                .status
                .success()
        );
        seen.push((fs::read(&out).unwrap(), fs::read(&rep).unwrap()));
    }
    assert_eq!(seen[0], seen[1]);
}

#[test]
fn outputs_chain_into_the_next_model() {
    let f = Fixture::new();
    let first = f.model(
        "a.json",
        &json!({"timesteps": 4, "layers": [fc(20, 12, "IF", 1, |_, _| 1)]}),
    );
    let second = f.model(
        "b.json",
        &json!({"timesteps": 4, "layers": [fc(12, 3, "IF", 1, |_, _| 1)]}),
    );
    let input = f.input("in.tsv", 20, 4, 2);
    let mid = s(&f.path("mid.tsv"));
    let end = s(&f.path("end.tsv"));
    assert!(impulse(&["run", &first, &input, "-o", &mid])
        .status
        .success());
    let o = impulse(&["run", &second, &mid, "-o", &end, "--input-layer", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    // every layer-1 neuron fires, so every output fires every step
    assert_eq!(fs::read_to_string(&end).unwrap().lines().count(), 4 * 3);
}

#[test]
fn bad_weight_is_a_schema_error_with_path() {
    let f = Fixture::new();
    let model = f.model("m.json", &json!({"timesteps": 1, "layers": [fc(4, 12, "IF", 3, |i, o| if (i, o) == (3, 7) { 40 } else { 1 })]}));
    let input = f.input("in.tsv", 4, 1, 1);
    let o = impulse(&["run", &model, &input, "-o", &s(&f.path("o.tsv"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("layers[0].weights[3][7]"),
        "{}",
        stderr(&o)
    );
    assert_eq!(impulse(&["map", &model]).status.code(), Some(2));

    let typo = f.write(
        "t.json",
        r#"{"timesteps": 1, "layers": [{"kind": "fc", "in_dim": 1, "out_dim": 1,
        "neuron": "IF", "threshold": 1, "leek": 1, "weights": [[1]]}]}"#,
    );
    assert_eq!(impulse(&["map", &typo]).status.code(), Some(2));
}

#[test]
fn capacity_and_io_errors() {
    let f = Fixture::new();
    // 3x3x15 = 135 rows cannot fit one macro
    let conv = json!({"timesteps": 1, "layers": [{"kind": "conv", "in_channels": 15, "in_h": 3, "in_w": 3,
        "kernel_h": 3, "kernel_w": 3, "out_channels": 1, "neuron": "RMP", "threshold": 5,
        "weights": vec![vec![vec![vec![0; 3]; 3]; 15]; 1]}]});
    let model = f.model("c.json", &conv);
    let o = impulse(&["map", &model]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));

    let missing = s(&f.path("nope.json"));
    assert_eq!(impulse(&["map", &missing]).status.code(), Some(4));
    let ok = f.model(
        "m.json",
        &json!({"timesteps": 1, "layers": [fc(2, 2, "IF", 1, |_, _| 1)]}),
    );
    let o = impulse(&["run", &ok, &missing, "-o", &s(&f.path("o.tsv"))]);
    assert_eq!(o.status.code(), Some(4));
    let bad_input = f.write("in.tsv", "0\t0\t5\n");
    let o = impulse(&["run", &ok, &bad_input, "-o", &s(&f.path("o.tsv"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oracle_mismatch_exits_one() {
    // saturating partial sums of an input-tiled layer clamp out of order
    let f = Fixture::new();
    let w = |i: usize, _| -> i64 {
        match i {
            0..=127 => 31,
            128..=255 => -31,
            _ => 31,
        }
    };
    let model = f.model(
        "m.json",
        &json!({"timesteps": 1, "saturate": true, "layers": [fc(300, 1, "IF", 1023, w)]}),
    );
    let input = f.input("in.tsv", 300, 1, 1);
    let out = s(&f.path("o.tsv"));
    let o = impulse(&["run", &model, &input, "-o", &out, "--oracle-check"]);
    assert_eq!(o.status.code(), Some(1), "{}{}", stdout(&o), stderr(&o));
    assert!(stderr(&o).contains("oracle mismatch"));
    let plain = impulse(&["run", &model, &input, "-o", &out]);
    assert!(plain.status.success());
}

#[test]
fn map_reports() {
    let f = Fixture::new();
    let m = f.model(
        "m.json",
        &json!({"timesteps": 1, "layers": [fc(128, 128, "RMP", 4, |_, _| 0)]}),
    );
    let o = impulse(&["map", &m]);
    assert!(o.status.success());
    assert!(
        stdout(&o).contains("11 macros, last uses 8/12 groups"),
        "{}",
        stdout(&o)
    );

    let m = f.model(
        "t.json",
        &json!({"timesteps": 1, "layers": [fc(300, 12, "RMP", 4, |_, _| 0)]}),
    );
    let text = stdout(&impulse(&["map", &m]));
    assert!(
        text.contains("input-tiled") && text.contains("host merge"),
        "{text}"
    );
}

#[test]
fn sweep_default_grid_and_reduction() {
    let o = impulse(&["sweep", "--at", "0.85"]);
    assert!(o.status.success());
    let csv = stdout(&o);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "sparsity,edp_pj_ns,reduction_pct");
    assert_eq!(lines.len(), 7);
    assert!(lines[1].ends_with(",0.0000"));
    let err = stderr(&o);
    let pct: f64 = err
        .split("sparsity: ")
        .nth(1)
        .and_then(|r| r.split('%').next())
        .unwrap()
        .parse()
        .unwrap();
    assert!((pct - 97.4).abs() <= 1.0, "{err}");

    let o = impulse(&["sweep", "--grid", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn energy_table_env_override() {
    let f = Fixture::new();
    let table = f.write("e.json", r#"{"instructions": {"AccW2V": {"energy_pj": 1.0}, "SpikeCheck": {"energy_pj": 0.0, "cycles": 1}}}"#);
    let model = f.model(
        "m.json",
        &json!({"timesteps": 1, "layers": [fc(12, 12, "IF", 1, |_, _| 1)]}),
    );
    let input = f.input("in.tsv", 12, 1, 1);
    let rep = s(&f.path("r.csv"));
    let o = Command::new(env!("CARGO_BIN_EXE_impulse"))
        .args([
            "run",
            &model,
            &input,
            "-o",
            &s(&f.path("o.tsv")),
            "--report",
            &rep,
        ])
        .env("IMPULSE_ENERGY_TABLE", &table)
        .output()
        .unwrap();
    // a zero-energy CIM instruction is rejected
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let table = f.write(
        "e.json",
        r#"{"instructions": {"AccW2V": {"energy_pj": 1.0}}}"#,
    );
    let o = Command::new(env!("CARGO_BIN_EXE_impulse"))
        .args([
            "run",
            &model,
            &input,
            "-o",
            &s(&f.path("o.tsv")),
            "--report",
            &rep,
        ])
        .env("IMPULSE_ENERGY_TABLE", &table)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(&rep).unwrap();
    assert!(csv.contains("AccW2V,24,24.000000,24"), "{csv}");
}

#[test]
fn selftest_passes() {
    let o = impulse(&["selftest"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("selftest: pass"));
}
