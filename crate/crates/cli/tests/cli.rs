use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SWAP: &str = r#"{"kind":"action","group":[[0,1],[1,0]],"action":[[0,1],[1,0]]}"#;
const Z3_ON_ITSELF: &str = r#"{"kind":"action","group":[[0,1,2],[1,2,0],[2,0,1]],"action":[[0,1,2],[1,2,0],[2,0,1]]}"#;
const SWAP_SYSTEM: &str = r#"{"system":[{"object":0,"masses":[[0,1,2],[2,1,2]]},{"object":1,"masses":[[1,1,1]]}]}"#;
const SHORT_SYSTEM: &str = r#"{"system":[{"object":0,"masses":[[0,1,3],[2,1,3]]},{"object":1,"masses":[[1,1,1]]}]}"#;
const THETA: &str = r#"{"theta":[{"object":0,"masses":[[0,1,2],[1,1,2]]},{"object":1,"masses":[[1,1,1]]}]}"#;

struct Dir(TempDir);

impl Dir {
    fn new() -> Self {
        Dir(TempDir::new().unwrap())
    }

    fn file(&self, name: &str, text: &str) -> PathBuf {
        let p = self.0.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_groupoid")).args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

#[test]
fn check_accepts_an_action_groupoid() {
    let d = Dir::new();
    let g = d.file("z3.json", Z3_ON_ITSELF);
    let out = run(&["check", "--groupoid", p(&g)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("all groupoid axioms hold"));
}

#[test]
fn check_reports_broken_tables() {
    let d = Dir::new();
    let g = d.file("bad.json", r#"{"kind":"action","group":[[0,1],[1,1]],"action":[[0,1],[1,0]]}"#);
    let out = run(&["check", "--groupoid", p(&g)]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
}

#[test]
fn liouville_fixture_certificate_holds() {
    let out = run(&["construct-liouville", "--fixture", "z4"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = stdout(&out);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("stage,n_i,k_i,epsilon_i,measured,bound"));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(str::to_owned).collect()).collect();
    assert_eq!(rows.len(), 3);
    let n: Vec<u64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    let k: Vec<u64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert_eq!(n[0], 1);
    assert!(n.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(k, [1, 2, 8]);
    let frac = |s: &str| {
        let (a, b) = s.split_once('/').unwrap_or((s, "1"));
        a.parse::<f64>().unwrap() / b.parse::<f64>().unwrap()
    };
    for r in &rows {
        assert!(frac(&r[4]) <= frac(&r[5]), "row {r:?}");
    }
    assert!(stderr(&out).contains("selection recheck: 0"));
}

#[test]
fn liouville_writes_the_operator() {
    let d = Dir::new();
    let target = d.path("op.json");
    let out = run(&["construct-liouville", "--fixture", "z4", "--operator-out", p(&target)]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(target).unwrap();
    assert!(text.contains("\"system\""));
}

#[test]
fn liouville_from_files_with_powers() {
    let d = Dir::new();
    let g = d.file("z3.json", Z3_ON_ITSELF);
    let s = d.file(
        "s.json",
        r#"{"system":[{"object":0,"masses":[[0,1,2],[3,1,2]]},{"object":1,"masses":[[1,1,2],[4,1,2]]},{"object":2,"masses":[[2,1,2],[5,1,2]]}]}"#,
    );
    let check = run(&["check", "--groupoid", p(&g)]);
    assert_eq!(check.status.code(), Some(0));
    let out = run(&[
        "construct-liouville", "--groupoid", p(&g), "--system", p(&s), "--provider", "powers", "--stages", "2",
        "--horizon", "64",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout(&out), "stage,n_i,k_i,epsilon_i,measured,bound\n1,1,1,1/2,4/9,2\n2,3,2,1/4,7/48,5/4\n");
    let float = run(&[
        "construct-liouville", "--groupoid", p(&g), "--system", p(&s), "--provider", "powers", "--stages", "2",
        "--horizon", "64", "--arith", "float",
    ]);
    assert_eq!(float.status.code(), Some(0), "{}", stderr(&float));
    let n_column = |t: String| t.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().to_owned()).collect::<Vec<_>>();
    assert_eq!(n_column(stdout(&float)), ["1", "3"]);
}

#[test]
fn non_probability_systems_are_domain_errors() {
    let d = Dir::new();
    let g = d.file("swap.json", SWAP);
    let s = d.file("short.json", SHORT_SYSTEM);
    let out = run(&["discrepancy", "--groupoid", p(&g), "--system", p(&s)]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("not normalized"), "{err}");
    assert!(err.contains("2/3"), "{err}");
}

#[test]
fn discrepancy_of_a_valid_system() {
    let d = Dir::new();
    let g = d.file("swap.json", SWAP);
    let s = d.file("s.json", SWAP_SYSTEM);
    let out = run(&["discrepancy", "--groupoid", p(&g), "--system", p(&s)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).starts_with("morphism"));
    assert!(stderr(&out).contains("mean discrepancy"));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(&["check"]).status.code(), Some(2));
    assert_eq!(run(&["check", "--groupoid", "/nonexistent/g.json"]).status.code(), Some(2));
    assert_eq!(run(&["group-sweep", "--group", "q8", "--probe", "1"]).status.code(), Some(2));
    assert_eq!(run(&["construct-liouville", "--fixture", "z4", "--epsilon-base", "0.5"]).status.code(), Some(2));
    assert_eq!(run(&["construct-liouville", "--fixture", "z9"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn malformed_files_exit_with_two() {
    let d = Dir::new();
    let truncated = d.file("t.json", r#"{"kind":"#);
    assert_eq!(run(&["check", "--groupoid", p(&truncated)]).status.code(), Some(2));
    let unknown = d.file("u.json", r#"{"kind":"monoid","blocks":[[0]]}"#);
    assert_eq!(run(&["check", "--groupoid", p(&unknown)]).status.code(), Some(2));
    let g = d.file("swap.json", SWAP);
    let s = d.file("s.json", r#"{"system":[{"object":0}]}"#);
    assert_eq!(run(&["discrepancy", "--groupoid", p(&g), "--system", p(&s)]).status.code(), Some(2));
}

#[test]
fn bad_thread_counts_are_usage_errors() {
    let out = Command::new(env!("CARGO_BIN_EXE_groupoid"))
        .args(["construct-liouville", "--fixture", "z4"])
        .env("GROUPOID_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn identical_runs_are_byte_identical() {
    let d = Dir::new();
    let g = d.file("swap.json", SWAP);
    let t = d.file("theta.json", THETA);
    let args = ["rwre", "simulate", "--action", p(&g), "--theta", p(&t), "--steps", "6", "--samples", "3000"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let threaded = Command::new(env!("CARGO_BIN_EXE_groupoid")).args(args).env("GROUPOID_THREADS", "3").output().unwrap();
    assert_eq!(a.stdout, threaded.stdout);
    let reseeded = run(&[&args[..], &["--seed", "7"]].concat());
    assert_ne!(a.stdout, reseeded.stdout);

    let l1 = run(&["construct-liouville", "--fixture", "z4"]);
    let l2 = run(&["construct-liouville", "--fixture", "z4", "--arith", "exact"]);
    assert_eq!(l1.stdout, l2.stdout);
}

#[test]
fn outputs_can_go_to_files() {
    let d = Dir::new();
    let (csv, report) = (d.path("out.csv"), d.path("report.txt"));
    let out = run(&["group-sweep", "--group", "z", "--probe", "1", "--horizon", "2", "--out", p(&csv), "--report", p(&report)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert_eq!(std::fs::read_to_string(csv).unwrap(), "n,value\n1,1\n2,3/4\n");
    let report = std::fs::read_to_string(report).unwrap();
    assert!(report.starts_with("# groupoid group-sweep"));
    assert!(report.contains("seed=20240601"));
}

#[test]
fn group_sweeps_and_folner_sets() {
    let zn = run(&["group-sweep", "--group", "zn:4", "--mu", "0:1/2,1:1/2", "--probe", "1", "--horizon", "3"]);
    assert_eq!(zn.status.code(), Some(0), "{}", stderr(&zn));
    assert_eq!(stdout(&zn), "n,value\n1,1\n2,1\n3,1/2\n");

    let f2 = run(&["group-sweep", "--group", "f2", "--probe", "a", "--horizon", "10", "--cap", "100", "--arith", "float"]);
    assert_eq!(f2.status.code(), Some(0));
    assert_eq!(stdout(&f2).lines().count(), 4);
    assert!(stderr(&f2).contains("support cap 100 exceeded at n = 4"));

    let negative = run(&["group-sweep", "--group", "z", "--mu", "-1:1/2,1:1/2", "--probe", "2", "--horizon", "1"]);
    assert_eq!(stdout(&negative), "n,value\n1,1\n");

    let not_prob = run(&["group-sweep", "--group", "z", "--mu", "0:1/2", "--probe", "1"]);
    assert_eq!(not_prob.status.code(), Some(1));

    let folner = run(&["folner", "--group", "z", "--set", "0,1,2,3,4"]);
    assert_eq!(stdout(&folner), "method,value\nsymmetric_difference,1/5\ndirect,1/5\n");
    let ball = run(&["folner", "--group", "f2", "--set", "e,a,A,b,B,aa,ab,aB,AA,Ab,AB,ba,bA,bb,Ba,BA,BB"]);
    assert_eq!(stdout(&ball), "method,value\nsymmetric_difference,18/17\ndirect,18/17\n");
    assert!(stderr(&ball).contains("--set e,a,A,b,B"));
}

#[test]
fn rwre_report_and_paths_log() {
    let d = Dir::new();
    let g = d.file("swap.json", SWAP);
    let t = d.file("theta.json", THETA);
    let log = d.path("paths.csv");
    let sim = run(&["rwre", "simulate", "--action", p(&g), "--theta", p(&t), "--steps", "4", "--samples", "500", "--paths-log", p(&log)]);
    assert_eq!(sim.status.code(), Some(0), "{}", stderr(&sim));
    assert!(stdout(&sim).starts_with("element,empirical_mass,exact_mass,abs_diff\n"));
    let log = std::fs::read_to_string(log).unwrap();
    assert_eq!(log.lines().count(), 6);

    let rep = run(&["rwre", "report", "--action", p(&g), "--theta", p(&t), "--mode", "tail", "--horizon", "40"]);
    assert_eq!(rep.status.code(), Some(0));
    assert_eq!(stdout(&rep).lines().count(), 1 + 2 * 40);
    assert!(stderr(&rep).contains("verdict trivial"));

    let not_action = d.file("pair.json", r#"{"kind":"pair","blocks":[[0,1]]}"#);
    let wrong = run(&["rwre", "report", "--action", p(&not_action), "--theta", p(&t)]);
    assert_eq!(wrong.status.code(), Some(2));
}

#[test]
fn boundary_and_convolve() {
    let d = Dir::new();
    let g = d.file("swap.json", SWAP);
    let s = d.file("s.json", SWAP_SYSTEM);
    let b = run(&["boundary", "--groupoid", p(&g), "--system", p(&s), "--mode", "tail", "--horizon", "5"]);
    assert_eq!(b.status.code(), Some(0), "{}", stderr(&b));
    assert!(stdout(&b).starts_with("object,n,d_n\n"));
    assert_eq!(run(&["boundary", "--groupoid", p(&g), "--system", p(&s), "--mode", "sideways"]).status.code(), Some(2));

    let c = run(&["convolve", "--groupoid", p(&g), "--system", p(&s), "--with", p(&s), "--power", "2"]);
    assert_eq!(c.status.code(), Some(0), "{}", stderr(&c));
    let product = d.file("product.json", &stdout(&c));
    let again = run(&["discrepancy", "--groupoid", p(&g), "--system", p(&product)]);
    assert_eq!(again.status.code(), Some(0), "{}", stderr(&again));
}
