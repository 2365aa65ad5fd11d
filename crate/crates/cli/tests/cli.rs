use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn qcore(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcore"))
        .args(args)
        .current_dir(root())
        .env_remove("QCORE_MACHINE")
        .env_remove("QCORE_VERIFY")
        .env_remove("QCORE_MAX_EXPONENT")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn pef_containment_prints_a_hypermorphism() {
    let out = qcore(&["contains", "--fragment", "pef", "corpus/A4fix", "corpus/P110"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains('{'), "{}", stdout(&out));
}

#[test]
fn bounded_qcore_of_a4_ends_with_two_elements() {
    let out = qcore(&["qcore", "bounded", "corpus/A4fix"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("domain: 2"), "{}", stdout(&out));
}

#[test]
fn capped_exponent_gives_unknown() {
    let args = ["contains", "--fragment", "ph", "corpus/LB3_A", "corpus/LB3_B"];
    assert_eq!(code(&qcore(&args)), 0);
    let mut capped = args.to_vec();
    capped.extend(["--max-exponent", "2"]);
    assert_eq!(code(&qcore(&capped)), 2);

    let out = Command::new(env!("CARGO_BIN_EXE_qcore"))
        .args(args)
        .current_dir(root())
        .env("QCORE_MAX_EXPONENT", "2")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn exit_codes_follow_the_verdict() {
    assert_eq!(code(&qcore(&["hom", "corpus/C6", "corpus/K2"])), 0);
    assert_eq!(code(&qcore(&["hom", "corpus/C3", "corpus/K2"])), 1);
    assert_eq!(code(&qcore(&["equiv", "--fragment", "pp", "corpus/K2", "corpus/C6"])), 0);
    assert_eq!(code(&qcore(&["equiv", "--fragment", "pos", "corpus/K2", "corpus/C6"])), 1);
    assert_eq!(code(&qcore(&["equiv", "--fragment", "pef", "corpus/K2", "corpus/K1"])), 1);
}

#[test]
fn machine_records_are_stable_single_lines() {
    let args = [
        "--machine", "contains", "--fragment", "ph", "corpus/P110", "corpus/P01fix",
    ];
    let first = qcore(&args);
    let second = qcore(&args);
    assert_eq!(code(&first), 0);
    assert_eq!(first.stdout, second.stdout);
    let text = stdout(&first);
    assert_eq!(text.lines().count(), 1, "{text}");
    assert!(text.contains("kind=yes"), "{text}");

    let core = qcore(&["--machine", "qcore", "naive", "corpus/P110"]);
    assert_eq!(core.stdout, qcore(&["--machine", "qcore", "naive", "corpus/P110"]).stdout);
    assert!(stdout(&core).lines().all(|l| l.contains('=')));
}

#[test]
fn structures_can_come_from_standard_input() {
    let text = std::fs::read_to_string(root().join("corpus/C4.txt")).unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_qcore"))
        .args(["hom", "-", "corpus/K2"])
        .current_dir(root())
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(text.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(code(&out), 0);
}

#[test]
fn usage_and_input_errors() {
    let unknown = qcore(&["frobnicate"]);
    assert_eq!(code(&unknown), 64);
    assert!(unknown.stdout.is_empty());
    assert_eq!(code(&qcore(&["contains", "corpus/K2", "corpus/K1"])), 64);
    let missing = qcore(&["hom", "corpus/nothing-here", "corpus/K2"]);
    assert_eq!(code(&missing), 66);
    assert!(missing.stdout.is_empty());
    assert!(!missing.stderr.is_empty());
}

#[test]
fn fixtures_are_listed_and_shown() {
    let list = stdout(&qcore(&["fixture", "list"]));
    assert!(list.lines().any(|l| l.split('\t').next() == Some("A4fix")), "{list}");
    let shown = qcore(&["fixture", "show", "K2"]);
    assert_eq!(code(&shown), 0);
    assert!(stdout(&shown).contains("(1,2)"));
    assert_eq!(code(&qcore(&["fixture", "show", "nope"])), 66);
}

#[test]
fn model_checking_and_graph_commands() {
    let holds = qcore(&["mc", "corpus/C3", "forall x . exists y . E(x,y)"]);
    assert_eq!(code(&holds), 0);
    let fails = qcore(&["mc", "corpus/C3", "exists x . E(x,x)"]);
    assert_eq!(code(&fails), 1);
    let classify = qcore(&["graph", "classify", "corpus/C3"]);
    assert_eq!(code(&classify), 0);
    assert!(!classify.stdout.is_empty());
}
