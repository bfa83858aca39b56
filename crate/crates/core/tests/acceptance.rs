//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on failure.
//!
//! Runs with a plain `main` so every line is printed regardless of test
//! output capture.

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use nudging::conditions::{self, Dimension, FlowScales};
use nudging::control::{ControllerConfig, ControllerKind};
use nudging::field::random::random_band_limited;
use nudging::harness::{self, ExperimentConfig, InitialSpec, ObserverSpec, Preset, RunOutput, TruthSpec};
use nudging::{Field, Grid, Observer};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn saturate_run(kind: ControllerKind) -> RunOutput {
    let mut cfg = Preset::Saturate.config();
    cfg.controller.kind = kind;
    harness::run_twin(&cfg).expect("saturate run")
}

/// Shared by the controller-contract and saturation criteria.
struct SaturateRuns {
    algo1: RunOutput,
    algo2: RunOutput,
    rerun_identical: bool,
}

fn saturate_runs() -> SaturateRuns {
    let kinds = [ControllerKind::Algo1, ControllerKind::Algo2, ControllerKind::Algo1, ControllerKind::Algo2];
    let mut runs: Vec<RunOutput> = kinds.par_iter().map(|&k| saturate_run(k)).collect();
    let dir = tempfile::tempdir().expect("tempdir");
    let bytes = |r: &RunOutput, name: &str| {
        let p = dir.path().join(name);
        harness::emit_csv(&r.records, &p).expect("csv");
        std::fs::read(p).expect("read back")
    };
    let rerun_identical = bytes(&runs[0], "a1.csv") == bytes(&runs[2], "b1.csv")
        && bytes(&runs[1], "a2.csv") == bytes(&runs[3], "b2.csv");
    runs.truncate(2);
    let algo2 = runs.pop().unwrap();
    let algo1 = runs.pop().unwrap();
    SaturateRuns {
        algo1,
        algo2,
        rerun_identical,
    }
}

fn temporal_order() -> Outcome {
    let cfg = Preset::Converge.config();
    let dts: Vec<f64> = (1..=5).map(|i| 0.5f64.powi(i)).collect();
    let rows = harness::run_convergence(&cfg, &dts).expect("convergence");
    let rates: Vec<f64> = rows.iter().filter(|r| r.dt <= 0.25).filter_map(|r| r.rate).collect();
    let pass = rates.len() == 4 && rates.iter().all(|r| (1.7..=2.5).contains(r));
    let shown: Vec<String> = rates.iter().map(|r| format!("{r:.3}")).collect();
    outcome(pass, format!("rates for dt <= 1/4: [{}], need [1.7, 2.5]", shown.join(", ")))
}

fn same_resolution_twin() -> Outcome {
    let n = 64;
    let cfg = ExperimentConfig {
        grid_n: n,
        truth: TruthSpec::Dns {
            grid_n_fine: n,
            substeps: 1,
        },
        observer: ObserverSpec::Fourier { k: n / 3 },
        controller: ControllerConfig::constant(1.0e4),
        v0: InitialSpec::Truth,
        t_final: 1.0,
        ..Preset::Saturate.config()
    };
    let out = harness::run_twin(&cfg).expect("same-grid twin");
    let worst = out.records.iter().map(|r| r.rel_err).fold(0.0, f64::max);
    outcome(worst < 1e-10, format!("max rel_err over t <= 1: {worst:.3e}, need < 1e-10"))
}

fn proposition_decay() -> Outcome {
    let cfg = Preset::TwinDecay.config();
    let out = harness::run_twin(&cfg).expect("twin-decay");
    let chi = cfg.controller.chi0;
    let observer = cfg.observer.build(cfg.length).unwrap();
    let (h_ok, h_slack) = conditions::h_condition(cfg.nu, observer.c1(), observer.h(), chi);
    let chi0 = chi - out.summary.avg_grad_u_sq / (2.0 * cfg.nu);
    let (chi_ok, _) = conditions::chi_condition_2d(chi, cfg.nu, out.summary.avg_grad_u_sq, 1.0);

    // least-squares slope of log ||e|| before the round-off floor
    let pts: Vec<(f64, f64)> = out
        .records
        .iter()
        .filter(|r| r.rel_err > 1e-11)
        .map(|r| (r.t, r.err_l2.ln()))
        .collect();
    let m = pts.len() as f64;
    let (st, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mt, my) = (st / m, sy / m);
    let (num, den) = pts
        .iter()
        .fold((0.0, 0.0), |a, p| (a.0 + (p.0 - mt) * (p.1 - my), a.1 + (p.0 - mt) * (p.0 - mt)));
    let rate = -num / den;

    let e0 = out.summary.initial_err;
    let e_t = out.summary.final_err;
    let bound = (-chi0 * cfg.t_final).exp() * e0;
    let pass = h_ok && chi_ok && chi0 >= 1.0 && rate >= chi0 && e_t <= 2.0 * bound;
    outcome(
        pass,
        format!(
            "H slack {h_slack:.5}, chi0 {chi0:.3}, fitted rate {rate:.3} over {} pts, ||e(T)|| {e_t:.3e} vs exp(-chi0 T)||e(0)|| {bound:.3e}",
            pts.len()
        ),
    )
}

fn controller_contracts(runs: &SaturateRuns) -> Outcome {
    let cfg = Preset::Saturate.config().controller;
    let a1 = &runs.algo1;
    let a2 = &runs.algo2;
    let mut violations = 0;
    for d in &a1.diagnostics {
        if !d.forced() && !(d.est_new < cfg.factor * d.est_prev) {
            violations += 1;
        }
    }
    for (r, d) in a2.records.iter().zip(&a2.diagnostics) {
        if !d.forced() && !(r.chi - d.band.unwrap() >= cfg.chi0) {
            violations += 1;
        }
    }
    let in_range = a1
        .records
        .iter()
        .chain(&a2.records)
        .all(|r| r.chi >= cfg.chi0 && r.chi <= 1.0e6);
    let steps = a1.records.len().min(a2.records.len());
    let pass = violations == 0 && in_range && runs.rerun_identical && steps >= 1000;
    outcome(
        pass,
        format!(
            "{steps} steps each; contract violations {violations}; chi in [chi0, 1e6]: {in_range}; bit-identical rerun: {}; forced steps algo1/algo2: {}/{}",
            runs.rerun_identical, a1.summary.forced_steps, a2.summary.forced_steps
        ),
    )
}

fn observation_suite() -> Outcome {
    let grid = Grid::new(32, 1.0).unwrap();
    let ops = [Observer::fourier(6, 1.0).unwrap(), Observer::cells(8, 1.0).unwrap()];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = [0.0f64; 5];
    let mut fails = 0;
    for op in &ops {
        let bound = op.c1() * op.h();
        for _ in 0..100 {
            let a: Field = random_band_limited(&grid, &mut rng, 15);
            let b: Field = random_band_limited(&grid, &mut rng, 15);
            let pa = op.project(&a).unwrap();
            let idem = (&op.project(&pa).unwrap() - &pa).l2_norm() / a.l2_norm();
            let adj = (pa.inner(&b) - a.inner(&op.project(&b).unwrap())).abs() / (a.l2_norm() * b.l2_norm());
            let rest = (&a - &pa).l2_norm_sq();
            let pyth = (a.l2_norm_sq() - pa.l2_norm_sq() - rest).abs() / a.l2_norm_sq();
            let contraction = pa.l2_norm() / a.l2_norm();
            let ratio = op.interp_defect_ratio(&a).unwrap() / bound;
            let checks = [idem, adj, pyth, contraction, ratio];
            for (w, c) in worst.iter_mut().zip(checks) {
                *w = w.max(c);
            }
            if idem > 1e-12 || adj > 1e-10 || pyth > 1e-10 || contraction > 1.0 + 1e-14 || ratio > 1.0 {
                fails += 1;
            }
        }
    }
    outcome(
        fails == 0,
        format!(
            "200 fields: max idempotence {:.1e}, adjointness {:.1e}, Pythagoras {:.1e}, |I_H w|/|w| {:.4}, defect/(C1 H) {:.4}",
            worst[0], worst[1], worst[2], worst[3], worst[4]
        ),
    )
}

fn saturation(runs: &SaturateRuns) -> Outcome {
    let t_final = Preset::Saturate.config().t_final;
    let mut pass = true;
    let mut parts = vec![];
    for (name, run) in [("algo1", &runs.algo1), ("algo2", &runs.algo2)] {
        let early: Vec<f64> = run.records.iter().filter(|r| r.t <= 2.0).map(|r| r.rel_err).collect();
        let peak_at = early
            .iter()
            .enumerate()
            .fold(0, |best, (i, &e)| if e > early[best] { i } else { best });
        let peak = early[peak_at].max(run.summary.initial_rel_err);
        let trough = early[peak_at..].iter().cloned().fold(f64::INFINITY, f64::min);
        let late: Vec<f64> = run
            .records
            .iter()
            .filter(|r| r.t >= 0.5 * t_final)
            .map(|r| r.rel_err)
            .collect();
        let (lo, hi) = late.iter().fold((f64::INFINITY, 0.0f64), |a, &e| (a.0.min(e), a.1.max(e)));
        let chi_max = run.summary.chi_max_observed;
        let ok = peak / trough >= 10.0 && lo > trough && lo >= 0.05 && hi <= 5.0 && chi_max >= 1.0e6;
        pass &= ok;
        parts.push(format!(
            "{name}: drop {:.1}x by t=2, late rel_err [{lo:.3}, {hi:.3}], max chi {chi_max:.3e}",
            peak / trough
        ));
    }
    outcome(pass, parts.join("; "))
}

fn initial_chi_robustness() -> Outcome {
    let chis = [1.0, 10.0, 100.0, 1000.0];
    let final_err = |kind: ControllerKind, chi: f64| {
        let mut cfg = Preset::Saturate.config();
        cfg.t_final = 2.0;
        cfg.controller.kind = kind;
        cfg.controller.chi0 = chi;
        harness::run_twin(&cfg).expect("short run").summary.final_rel_err
    };
    let jobs: Vec<(ControllerKind, f64)> = [ControllerKind::Algo2, ControllerKind::Constant]
        .iter()
        .flat_map(|&k| chis.iter().map(move |&c| (k, c)))
        .collect();
    let errs: Vec<f64> = jobs.par_iter().map(|&(k, c)| final_err(k, c)).collect();
    let (adaptive, constant) = errs.split_at(chis.len());
    let span = adaptive.iter().cloned().fold(0.0, f64::max) / adaptive.iter().cloned().fold(f64::INFINITY, f64::min);
    let monotone = constant.windows(2).all(|w| w[1] < w[0]);
    let fmt = |v: &[f64]| v.iter().map(|e| format!("{e:.4e}")).collect::<Vec<_>>().join(", ");
    outcome(
        span < 10.0 && monotone,
        format!(
            "algo2 final rel_err [{}] span {span:.3}x; constant [{}] decreasing: {monotone}",
            fmt(adaptive),
            fmt(constant)
        ),
    )
}

fn condition_evaluators() -> Outcome {
    let close = |a: f64, b: f64, tol: f64| (a - b).abs() <= tol;
    let mut checks = vec![];
    let (ok, s) = conditions::h_condition(1.0, 1.0, 0.1, 10.0);
    checks.push(ok && close(s, 0.8, 1e-15));
    let (ok, s) = conditions::h_condition(1.0, 1.0, 0.1, 50.0);
    checks.push(ok && s == 0.0);
    let limit = conditions::h_condition_chi_limit(0.01, 1.0, 1.0 / (32.0 * std::f64::consts::PI));
    checks.push(close(limit, 50.5, 0.05));
    let (ok, s) = conditions::chi_condition_2d(3.0, 0.5, 1.0, 1.0);
    checks.push(ok && s == 1.0);
    let (ok, s) = conditions::chi_condition_2d(1.0 + 2.0 / 1.0, 0.5, 2.0, 1.0);
    checks.push(ok && s == 0.0);
    checks.push(conditions::chi_condition_3d(1.0, 1.0, 0.0, 1.0) == (true, 1.0));
    let (ok, s) = conditions::chi_condition_3d(1.0, 1.0, 19683.0 / 2048.0, 1.0);
    checks.push(!ok && s == -1.0);
    let (ok, s) = conditions::refined_h_condition(2.0, 1.0, 1.0, 0.3, 0.3, 0.5);
    checks.push(!ok && s < 0.0);

    let two = conditions::re_scalings(&FlowScales::from_reynolds(100.0, Some(1.0)).unwrap(), Dimension::Two).unwrap();
    let three = conditions::re_scalings(&FlowScales::from_reynolds(10.0, None).unwrap(), Dimension::Three).unwrap();
    checks.push(close(two.chi_turnover, 2000.0, 1e-9));
    checks.push(close(two.h_over_l, 3.16e-3, 5e-6));
    checks.push(close(three.chi_turnover, 1.0e4, 1e-8));
    checks.push(close(three.h_over_l, 1.0e-3, 1e-15));
    let passed = checks.iter().filter(|&&c| c).count();
    outcome(
        passed == checks.len(),
        format!(
            "{passed}/{} worked examples; Re=100 2d: chi T* = {:.1}, H/L = {:.4e}",
            checks.len(),
            two.chi_turnover,
            two.h_over_l
        ),
    )
}

fn main() {
    let start = Instant::now();
    let mut failed = 0;
    let mut report = |id: u32, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !o.pass {
            failed += 1;
        }
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        let line = format!(
            "criterion {id} {verdict}: {name} ({:.1}s) -- {}\n",
            t.elapsed().as_secs_f64(),
            o.detail
        );
        let mut out = std::io::stdout().lock();
        out.write_all(line.as_bytes()).unwrap();
        out.flush().unwrap();
    };

    report(1, "second-order temporal convergence", &mut temporal_order);
    report(2, "same-resolution twin at round-off", &mut same_resolution_twin);
    report(3, "exponential decay under the parameter conditions", &mut proposition_decay);
    let runs = catch_unwind(saturate_runs).ok();
    let missing = || outcome(false, "saturate runs failed".into());
    report(4, "controller contracts on the saturate preset", &mut || {
        runs.as_ref().map(controller_contracts).unwrap_or_else(missing)
    });
    report(5, "observation operator properties", &mut observation_suite);
    report(6, "coarse-model error saturation", &mut || {
        runs.as_ref().map(saturation).unwrap_or_else(missing)
    });
    report(7, "insensitivity to initial chi", &mut initial_chi_robustness);
    report(8, "condition evaluators", &mut condition_evaluators);

    println!("acceptance: {} failed, {:.1}s total", failed, start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
