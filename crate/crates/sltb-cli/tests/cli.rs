//! End-to-end checks of the `sltb` binary: every subcommand, exit codes and
//! the exactness of the JSON round trip.

use std::process::{Command, Output};

fn sltb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sltb"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn sltb_with_stdin(args: &[&str], stdin: &str) -> Output {
    use std::io::Write;
    use std::process::Stdio;
    let mut child = Command::new(env!("CARGO_BIN_EXE_sltb"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary spawns");
    child
        .stdin
        .as_mut()
        .unwrap()
        .write_all(stdin.as_bytes())
        .unwrap();
    child.wait_with_output().unwrap()
}

fn stdout_str(out: &Output) -> String {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn gen_is_deterministic_and_round_trips() {
    let a = stdout_str(&sltb(&["gen", "--n", "5", "--seed", "9", "--p-low-fraction", "1/3"]));
    let b = stdout_str(&sltb(&["gen", "--n", "5", "--seed", "9", "--p-low-fraction", "1/3"]));
    assert_eq!(a, b);
    let doc: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(doc["n"], 5);
}

#[test]
fn solvers_agree_with_the_oracle_through_the_cli() {
    let instance = stdout_str(&sltb(&[
        "gen",
        "--n",
        "7",
        "--seed",
        "4",
        "--p-low-fraction",
        "0",
    ]));
    let oracle: serde_json::Value = serde_json::from_str(&stdout_str(&sltb_with_stdin(
        &["oracle", "--objective", "tct"],
        &instance,
    )))
    .unwrap();
    for algo in ["dp", "ptas"] {
        let solved: serde_json::Value = serde_json::from_str(&stdout_str(&sltb_with_stdin(
            &[
                "solve",
                "--objective",
                "tct",
                "--algo",
                algo,
                "--epsilon",
                "1",
            ],
            &instance,
        )))
        .unwrap();
        assert_eq!(solved["value"], oracle["value"], "algo {algo}");
    }
    let fptas: serde_json::Value = serde_json::from_str(&stdout_str(&sltb_with_stdin(
        &[
            "solve",
            "--objective",
            "makespan",
            "--algo",
            "fptas",
            "--epsilon",
            "1/10",
        ],
        &instance,
    )))
    .unwrap();
    assert!(fptas["value"].is_string());
}

#[test]
fn mixed_lower_times_are_rejected_for_the_dp() {
    let instance = stdout_str(&sltb(&[
        "gen",
        "--n",
        "4",
        "--seed",
        "2",
        "--p-low-fraction",
        "1/2",
    ]));
    let out = sltb_with_stdin(&["solve", "--objective", "tct", "--algo", "dp"], &instance);
    assert!(!out.status.success());
    let message = String::from_utf8_lossy(&out.stderr);
    assert!(message.contains("lower processing times"), "got: {message}");
}

#[test]
fn oblivious_hard_instance_reports_the_known_ratio() {
    let out = stdout_str(&sltb(&[
        "oblivious",
        "--objective",
        "tct",
        "--epsilon",
        "1/2",
        "--adversary",
        "worst",
        "--hard",
        "4",
    ]));
    let first_line = out.lines().next().unwrap();
    let report: serde_json::Value = serde_json::from_str(first_line).unwrap();
    assert_eq!(report["ratio"], "10/3");
}

#[test]
fn fixed_adversary_reads_a_hidden_vector() {
    let dir = std::env::temp_dir().join("sltb-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let instance_path = dir.join("fixed-instance.json");
    let hidden_path = dir.join("hidden.json");
    std::fs::write(
        &instance_path,
        r#"{"n":2,"p_up":["4","9"],"p_low":[null,null],"cost":["1","2"],"budget":"3"}"#,
    )
    .unwrap();
    std::fs::write(&hidden_path, r#"["4","9"]"#).unwrap();
    let out = stdout_str(&sltb(&[
        "oblivious",
        "--objective",
        "tct",
        "--epsilon",
        "1/2",
        "--adversary",
        "fixed",
        "--hidden",
        hidden_path.to_str().unwrap(),
        "--input",
        instance_path.to_str().unwrap(),
    ]));
    let report: serde_json::Value = serde_json::from_str(out.lines().next().unwrap()).unwrap();
    // Lower times equal to the upper times make testing irrelevant.
    assert_eq!(report["ratio"], "1");
}

#[test]
fn reduce_partition_verifies() {
    let out = stdout_str(&sltb(&["reduce", "partition", "--u", "2,2", "--verify"]));
    let doc: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(doc["verification"]["consistent"], true);
    assert_eq!(doc["verification"]["partition_yes"], true);
}

#[test]
fn reduce_knapsack_emits_an_instance() {
    let out = stdout_str(&sltb(&[
        "reduce",
        "knapsack",
        "--values",
        "8,6",
        "--weights",
        "5,4",
        "--capacity",
        "5",
    ]));
    let doc: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(doc["n"], 2);
    assert_eq!(doc["budget"], "5");
}

#[test]
fn bench_reports_no_violations_on_exact_algorithms() {
    let out = sltb(&[
        "bench",
        "--objective",
        "makespan",
        "--algos",
        "dp,fptas:1/2",
        "--count",
        "4",
        "--n",
        "6",
        "--p-low-fraction",
        "1/4",
    ]);
    let text = stdout_str(&out);
    assert!(text.contains("guarantee violations: 0"), "got: {text}");
}
