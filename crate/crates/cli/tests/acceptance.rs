//! Acceptance gate: one line per criterion, nonzero exit if any fails.
//!
//! Criteria 1-11 are read from the report of one `onephase all` run plus
//! in-process timings; criterion 12 compares that run with a second one.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use onephase::config::{ExperimentConfig, Suite};
use onephase::fields::{solve_with_data, Data};
use onephase::suites;
use onephase_core::potential::certification_margins;
use onephase_core::supersolutions::decay_bound;
use onephase_core::PotentialSpec;
use serde_json::Value;

struct Gate {
    lines: Vec<(bool, String)>,
}

impl Gate {
    fn record(&mut self, id: usize, ok: bool, detail: String) {
        let line = format!("[{}] criterion {id:>2}: {detail}", if ok { "PASS" } else { "FAIL" });
        println!("{line}");
        self.lines.push((ok, line));
    }
}

fn run_all(out: &Path) -> Duration {
    let t = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_onephase"))
        .args(["--out", out.to_str().unwrap(), "all"])
        .status()
        .expect("spawn onephase");
    let elapsed = t.elapsed();
    assert!(status.code().is_some(), "onephase was killed");
    elapsed
}

fn rows<'a>(report: &'a Value, suite: &str) -> Vec<&'a Value> {
    report["suites"]
        .as_array()
        .unwrap()
        .iter()
        .find(|s| s["suite"] == suite)
        .unwrap_or_else(|| panic!("suite {suite} missing"))["rows"]
        .as_array()
        .unwrap()
        .iter()
        .collect()
}

fn check(r: &Value) -> &str {
    r["check"].as_str().unwrap()
}

fn anchor_is(r: &Value, anchor: &str) -> bool {
    r["paper_anchor"] == anchor
}

fn passes(r: &Value) -> bool {
    r["pass"].as_bool().unwrap()
}

fn in_hyp(r: &Value) -> bool {
    r["hypothesis_ok"].as_bool().unwrap()
}

/// Every selected row passes; returns `(ok, rows, worst margin)`.
fn all_pass(rs: &[&Value]) -> (bool, usize, f64) {
    let worst = rs
        .iter()
        .filter_map(|r| r["margin"].as_f64())
        .fold(f64::INFINITY, f64::min);
    (!rs.is_empty() && rs.iter().all(|r| passes(r)), rs.len(), worst)
}

fn summary(what: &str, (ok, n, worst): (bool, usize, f64)) -> (bool, String) {
    (ok, format!("{what}: {n} rows, worst margin {worst:.3e}"))
}

fn main() {
    let mut gate = Gate { lines: Vec::new() };
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let t_all = run_all(dir_a.path());
    println!("onephase all: {:.1} s", t_all.as_secs_f64());
    let text = std::fs::read_to_string(dir_a.path().join("report.json")).unwrap();
    let report: Value = serde_json::from_str(&text).unwrap();
    let pot = PotentialSpec::polynomial();

    // 1
    let t = Instant::now();
    let cert = certification_margins(&pot, 1_000_000).unwrap();
    let dt = t.elapsed();
    let (ok, n, worst) = all_pass(&rows(&report, "certify").iter().copied().collect::<Vec<_>>());
    gate.record(
        1,
        ok && cert.passed() && n == cert.margins.len() && dt < Duration::from_secs(1),
        format!("{n} inequalities on 1e6 points, worst margin {worst:.3e}, {:.3} s", dt.as_secs_f64()),
    );

    // 2
    let profile = rows(&report, "profile");
    let ode: Vec<_> = profile.iter().copied().filter(|r| anchor_is(r, suites::anchor::ODE)).collect();
    let expected = 3 * ExperimentConfig::default_for(Suite::Profile).unwrap().eps.len() * 2;
    let (ok, msg) = summary("RK4 gap <= 1e-6 and Hamiltonian residual <= 1e-8", all_pass(&ode));
    gate.record(2, ok && ode.len() == expected, msg);

    // 3
    let bounds: Vec<_> = profile
        .iter()
        .copied()
        .filter(|r| anchor_is(r, suites::anchor::ROOT) || anchor_is(r, suites::anchor::MINIMUM))
        .collect();
    let (ok, msg) = summary("root and minimum bounds over eps x t", all_pass(&bounds));
    gate.record(3, ok && bounds.len() == 3 * 2 * 4, msg);

    // 4
    let barriers = rows(&report, "barriers");
    let diam: Vec<_> = barriers
        .iter()
        .copied()
        .filter(|r| anchor_is(r, suites::anchor::DIAMETER) && in_hyp(r))
        .collect();
    let small_eps = |r: &&Value| check(r).contains("eps=1e-4") || check(r).contains("eps=1e-5");
    let shifts: Vec<_> = barriers
        .iter()
        .copied()
        .filter(|r| anchor_is(r, suites::anchor::SHIFTS))
        .filter(small_eps)
        .collect();
    let (d_ok, dn, dw) = all_pass(&diam);
    let (s_ok, sn, sw) = all_pass(&shifts);
    gate.record(
        4,
        d_ok && s_ok && sn == 2 * 2 * 4 && shifts.iter().all(|r| in_hyp(r)),
        format!("{dn} diameters (worst {dw:.3e}), {sn} shift rows at eps <= 1e-4 (worst {sw:.3e})"),
    );

    // 5
    let radial: Vec<_> = barriers.iter().copied().filter(|r| anchor_is(r, suites::anchor::RADIAL)).collect();
    let (ok, msg) = summary("margin >= -C h^2 and order-2 trend", all_pass(&radial));
    gate.record(5, ok && radial.len() == 5, msg);

    // 6
    let decay: Vec<_> = rows(&report, "decay")
        .into_iter()
        .filter(|r| anchor_is(r, suites::anchor::DECAY))
        .collect();
    let eps = 1e-3_f64;
    // independent evaluation of 3 theta1 eps exp(-eps^(-1/4) / (4 sqrt c1))
    let oracle = 3.0 * 0.5 * eps * (-(eps.powf(-0.25)) / (4.0 * 6f64.sqrt())).exp();
    let bound = decay_bound(&pot, eps);
    let (ok, n, worst) = all_pass(&decay);
    let both = ["eps=1e-2", "eps=1e-3"].iter().all(|e| decay.iter().any(|r| check(r).contains(e)));
    gate.record(
        6,
        ok && both && (bound - oracle).abs() <= 1e-15 && (bound - 8.45e-4).abs() < 5e-7,
        format!("{n} centers strictly below the bound (worst margin {worst:.3e}); bound(1e-3) = {bound:.6e}"),
    );

    // 7
    let solve = rows(&report, "solve");
    let order: Vec<_> = solve.iter().copied().filter(|r| anchor_is(r, suites::anchor::ORDER)).collect();
    let cfg = ExperimentConfig::default_for(Suite::Solve).unwrap();
    let e = cfg.eps[0];
    let grid = suites::rung_grid(&cfg, e).unwrap();
    let data = Data::new(&pot, e, cfg.boundary).unwrap();
    let t = Instant::now();
    let solved = solve_with_data(&pot, e, &grid, &data, cfg.seed, 0.0);
    let dt = t.elapsed();
    let (o_ok, _, _) = all_pass(&order);
    let (c_ok, _, _) = all_pass(&solve.iter().copied().filter(|r| anchor_is(r, suites::anchor::SOLVE)).collect::<Vec<_>>());
    let slopes: Vec<&str> = order.iter().map(|r| check(r).rsplit("measured ").next().unwrap().trim_end_matches(')')).collect();
    gate.record(
        7,
        o_ok && c_ok && order.len() == 2 && solved.is_ok() && dt < Duration::from_secs(60),
        format!("residual slopes {slopes:?}, 256^2 solve in {:.1} s", dt.as_secs_f64()),
    );

    // 8
    let weiss = rows(&report, "weiss");
    let (ok, n, worst) = all_pass(&weiss);
    let kinds = [suites::anchor::WEISS_HALF, suites::anchor::WEISS, suites::anchor::WEISS_SCALING];
    gate.record(
        8,
        ok && kinds.iter().all(|k| weiss.iter().any(|r| anchor_is(r, k))),
        format!("half-plane, monotonicity and scaling: {n} rows, worst margin {worst:.3e}"),
    );

    // 9
    let flat = rows(&report, "flatness");
    let equiv: Vec<_> = flat.iter().copied().filter(|r| anchor_is(r, suites::anchor::EQUIVALENCE)).collect();
    let nonvacuous = equiv.iter().filter(|r| in_hyp(r)).count();
    let (ok, n, worst) = all_pass(&equiv);
    gate.record(
        9,
        ok && n == 8 && nonvacuous == n,
        format!("{n} implications, {nonvacuous} with premise and hypotheses holding, worst margin {worst:.3e}"),
    );

    // 10
    let trap: Vec<_> = flat.iter().copied().filter(|r| anchor_is(r, suites::anchor::TRAP)).collect();
    let improve: Vec<_> = flat.iter().copied().filter(|r| anchor_is(r, suites::anchor::IMPROVEMENT)).collect();
    let drift: Vec<_> = flat.iter().copied().filter(|r| anchor_is(r, suites::anchor::DRIFT)).collect();
    let in_h: Vec<_> = improve.iter().copied().filter(|r| in_hyp(r)).collect();
    let trap_ok = trap.len() == 1 && passes(trap[0]);
    let improve_ok = in_h.iter().all(|r| passes(r));
    let (drift_ok, _, _) = all_pass(&drift);
    gate.record(
        10,
        trap_ok && improve_ok && drift_ok && improve.len() == 2,
        format!(
            "{}; contraction on {} of {} level pairs in hypothesis{}; drift {} rows pass",
            trap.first().map_or("no trap row", |r| check(r).split(": ").last().unwrap()),
            in_h.len(),
            improve.len(),
            if in_h.is_empty() { " (none: eps/R < delta^2 fails at this grid size)" } else { "" },
            drift.len()
        ),
    );

    // 11
    let cfg = ExperimentConfig::default_for(Suite::Blowdown).unwrap();
    let t = Instant::now();
    let bd = suites::run(&cfg).unwrap();
    let dt = t.elapsed();
    let blow = rows(&report, "blowdown");
    let (ok, n, worst) = all_pass(&blow);
    let decreasing = blow.iter().filter(|r| check(r).contains("strictly decreasing")).count();
    let inclusions = blow.iter().filter(|r| anchor_is(r, suites::anchor::INCLUSION)).count();
    gate.record(
        11,
        ok && blow.iter().all(|r| in_hyp(r)) && decreasing == 2 && inclusions == 6
            && bd.failures().count() == 0 && dt < Duration::from_secs(300),
        format!("{n} rows (2 decreasing steps, 6 inclusions), worst margin {worst:.3e}, {:.1} s", dt.as_secs_f64()),
    );

    // 12
    run_all(dir_b.path());
    let mut names: Vec<_> = std::fs::read_dir(dir_a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    let identical = names.iter().all(|f| {
        let b = dir_b.path().join(f);
        b.exists() && std::fs::read(dir_a.path().join(f)).unwrap() == std::fs::read(b).unwrap()
    }) && std::fs::read_dir(dir_b.path()).unwrap().count() == names.len();
    gate.record(12, identical, format!("two `all` runs, {} output files bit-identical", names.len()));

    let failed = gate.lines.iter().filter(|(ok, _)| !ok).count();
    println!("acceptance: {} of {} criteria pass", gate.lines.len() - failed, gate.lines.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
