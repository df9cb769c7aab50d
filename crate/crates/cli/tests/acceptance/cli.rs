use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nbmix_cli::output::read_irr;

use crate::Check;

fn nbmix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nbmix"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &Path, n: &str, seed: &str) -> (PathBuf, Output) {
    let out = nbmix(&["simulate", "--demo", "nb", "--n", n, "--seed", seed, "--out", s(dir)]);
    (dir.join("data.csv"), out)
}

/// A fit that converges on a 1000-row demo sample.
fn fit(input: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "fit", "--input", s(input), "--out", s(out), "--kmax", "5", "--iters", "4000", "--chains", "2",
        "--seed", "11", "--categorical", "b1=0",
    ];
    args.extend_from_slice(extra);
    nbmix(&args)
}

/// Short fit for exit-code checks; two chains unless `extra` sets them.
fn quick_fit(input: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["fit", "--input", s(input), "--out", s(out), "--kmax", "3", "--iters", "200"];
    if !extra.contains(&"--chains") {
        args.extend(["--chains", "2"]);
    }
    args.extend_from_slice(extra);
    nbmix(&args)
}

pub fn determinism() -> Vec<Check> {
    let tmp = tempfile::tempdir().unwrap();
    let (data, sim) = simulate(&tmp.path().join("sim"), "500", "5");
    if code(&sim) != 0 {
        return vec![Check::new("simulate failed", false)];
    }
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let o = nbmix(&[
            "fit", "--input", s(&data), "--out", s(&out), "--kmax", "4", "--iters", "1000", "--chains", "2",
            "--seed", "99", "--rhat-threshold", "1000",
        ]);
        (code(&o), std::fs::read(out.join("summary.json")).unwrap_or_default())
    };
    let (a_code, a) = run("a");
    let (b_code, b) = run("b");
    vec![
        Check::new(format!("both fits exit {a_code}/{b_code}"), a_code == 0 && b_code == 0),
        Check::new(
            format!("summary.json byte-identical ({} bytes)", a.len()),
            !a.is_empty() && a == b,
        ),
    ]
}

fn write(path: &Path, text: &str) -> PathBuf {
    std::fs::write(path, text).unwrap();
    path.to_path_buf()
}

pub fn matrix() -> Vec<Check> {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let mut checks = Vec::new();
    let mut expect = |label: &str, out: &Output, want: i32| {
        let got = code(out);
        checks.push(Check::new(format!("{label} exit {got}"), got == want));
    };

    let (data, sim) = simulate(&root.join("sim"), "1000", "3");
    expect("simulate", &sim, 0);
    let fit_dir = root.join("fit");
    let fitted = fit(&data, &fit_dir, &[]);
    expect("fit", &fitted, 0);
    let rep = nbmix(&["report", "--dir", s(&fit_dir)]);
    expect("report", &rep, 0);

    let round_trip = match (read_irr(&fit_dir.join("irr.csv")), read_irr(&fit_dir.join("report/irr.csv"))) {
        (Ok(a), Ok(b)) => !a.is_empty() && a == b,
        _ => false,
    };
    let crosstab_ok = crosstab_sums(&fit_dir.join("report/crosstab.csv"));

    let header = "y,x1,x2,b1,b2\n";
    let good = "3,0.1,0.2,1,0\n";
    let cases = [
        ("malformed row", format!("{header}{good}4,0.5,0.1\n")),
        ("non-integer count", format!("{header}{good}2.5,0.1,0.2,0,1\n")),
        ("negative count", format!("{header}{good}-1,0.1,0.2,0,1\n")),
        ("unknown category", format!("{header}{good}5,0.1,0.2,2,1\n")),
    ];
    for (i, (label, text)) in cases.iter().enumerate() {
        let input = write(&root.join(format!("bad{i}.csv")), text);
        let out = quick_fit(&input, &root.join(format!("bad{i}")), &["--categorical", "b1=0", "--levels", "b1=0,1"]);
        expect(label, &out, 3);
    }
    expect("missing input", &quick_fit(&root.join("absent.csv"), &root.join("absent"), &[]), 1);
    expect("unknown flag", &nbmix(&["fit", "--input", s(&data), "--bogus"]), 2);
    expect("burn-in past iterations", &quick_fit(&data, &root.join("burn"), &["--burnin", "500"]), 2);
    expect("unconverged", &quick_fit(&data, &root.join("rhat"), &["--rhat-threshold", "1.0"]), 5);
    expect("nothing occupied", &quick_fit(&data, &root.join("occ"), &["--occupancy", "0.99"]), 4);

    let single = quick_fit(&data, &root.join("single"), &["--chains", "1"]);
    expect("single chain", &single, 0);
    let warned = String::from_utf8_lossy(&single.stderr).contains("only one chain");

    let trace = fit_dir.join("trace_chain0.csv");
    let mut bytes = std::fs::read(&trace).unwrap_or_default();
    let mid = bytes.len() / 2;
    if let Some(b) = bytes[mid..].iter_mut().find(|b| b.is_ascii_digit()) {
        *b = if *b == b'7' { b'8' } else { b'7' };
    }
    std::fs::write(&trace, bytes).unwrap();
    expect("tampered trace", &nbmix(&["report", "--dir", s(&fit_dir)]), 3);

    checks.push(Check::new("IRR file reads back identically", round_trip));
    checks.push(Check::new("cross-tab shares sum to 100", crosstab_ok));
    checks.push(Check::new("single-chain warning", warned));
    checks
}

fn crosstab_sums(path: &Path) -> bool {
    let Ok(mut r) = csv::Reader::from_path(path) else {
        return false;
    };
    let mut totals = std::collections::BTreeMap::<(String, String), f64>::new();
    for rec in r.records() {
        let Ok(rec) = rec else { return false };
        let pct: f64 = rec[4].parse().unwrap_or(f64::NAN);
        *totals.entry((rec[0].to_string(), rec[2].to_string())).or_default() += pct;
    }
    !totals.is_empty() && totals.values().all(|t| (t - 100.0).abs() < 1e-9)
}
