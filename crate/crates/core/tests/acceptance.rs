//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any criterion fails.

mod common;

use std::time::Instant;

use common::{kalman, random_observer, random_plain, riccati};
use sdnioc::bench::{self, RecoveryRow};
use sdnioc::estimator::LikelihoodKind;
use sdnioc::likelihood::{exact_plain_lqg_loglik, log_likelihood_trajectory, LikelihoodOptions};
use sdnioc::simulate::rollout_batch;
use sdnioc::solver::{solve_gains, SolverOptions};
use sdnioc::zoo::{RandomProblemParams, ReachingParams};

type Check = Result<String, String>;

fn verdict(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn exact_reduction() -> Check {
    let mut worst = 0.0f64;
    let mut count = 0;
    for seed in 0..100u64 {
        let (model, cost) = random_plain(10_000 + seed);
        let exp = random_observer(10_000 + seed, model.state_dim);
        let exp = (seed % 2 == 1).then_some(&exp);
        let sol = solve_gains(&model, &cost, SolverOptions::default()).map_err(|e| e.to_string())?;
        let data = rollout_batch(&model, &sol.gains, 3, seed, exp);
        for tr in &data.trials {
            let opts = LikelihoodOptions::default();
            let (approx, _) =
                log_likelihood_trajectory(&model, &sol.gains, tr, exp, opts).map_err(|e| e.to_string())?;
            let exact = exact_plain_lqg_loglik(&model, &sol.gains, tr, exp, opts).map_err(|e| e.to_string())?;
            worst = worst.max((approx - exact).abs());
            count += 1;
        }
    }
    verdict(worst <= 1e-8, format!("max |Δ| = {worst:.2e} over {count} trajectories (tol 1e-8)"))
}

fn separation() -> Check {
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let (model, cost) = random_plain(20_000 + seed);
        let sol = solve_gains(&model, &cost, SolverOptions::default()).map_err(|e| e.to_string())?;
        let pairs = sol.gains.l.iter().zip(riccati(&model, &cost)).chain(sol.gains.k.iter().zip(kalman(&model)));
        for (ours, oracle) in pairs {
            worst = worst.max((ours - &oracle).amax() / oracle.amax().max(1.0));
        }
    }
    verdict(worst <= 1e-10, format!("max scaled gain difference = {worst:.2e} over 100 models (tol 1e-10)"))
}

fn moment_matching() -> Check {
    let p = ReachingParams {
        r: 1e-5,
        v: 0.2,
        f: 0.02,
        ..Default::default()
    };
    let rep = bench::moment_matching(&p, 10_000, 3).map_err(|e| e.to_string())?;
    verdict(
        rep.mean_skl_analytic <= 1e-2 && rep.mean_skl_baseline >= 1.0,
        format!(
            "mean SKL {:.2e} (tol 1e-2), noise-matched baseline {:.3} (min 1.0)",
            rep.mean_skl_analytic, rep.mean_skl_baseline
        ),
    )
}

fn all_rms(rows: &[RecoveryRow]) -> f64 {
    let errs: Vec<f64> = rows.iter().flat_map(|r| r.log_err.iter().copied()).collect();
    (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt()
}

fn recovery_and_baseline() -> (Check, Check) {
    let p = ReachingParams::default();
    let run = || -> Result<(Vec<RecoveryRow>, Vec<RecoveryRow>), String> {
        let data = bench::reaching_datasets(&p, 100, 3, 4).map_err(|e| e.to_string())?;
        let full = bench::reaching_recovery(&p, &data, LikelihoodKind::MomentMatched, 10, 4).map_err(|e| e.to_string())?;
        let plain = bench::reaching_recovery(&p, &data, LikelihoodKind::PlainLqg, 10, 4).map_err(|e| e.to_string())?;
        Ok((full, plain))
    };
    match run() {
        Err(e) => (Err(e.clone()), Err(e)),
        Ok((full, plain)) => {
            let per = bench::per_param_rmse(&full);
            let c4 = verdict(
                per.iter().all(|&x| x <= 0.1),
                format!("per-parameter log RMSE (r, v, f) = {per:.4?} (tol 0.1)"),
            );
            let (f, g) = (all_rms(&full), all_rms(&plain));
            let c5 = verdict(g >= 5.0 * f, format!("plain-LQG log RMSE {g:.4} vs full {f:.4}, ratio {:.1} (min 5)", g / f));
            (c4, c5)
        }
    }
}

fn convergence() -> Check {
    let ns = [1, 3, 10, 32, 100];
    let rep = bench::sample_size_convergence(&ReachingParams::default(), &ns, 3, 10, 6).map_err(|e| e.to_string())?;
    let medians: Vec<f64> = rep.points.iter().map(|p| p.median_rmse).collect();
    let monotone = medians.windows(2).all(|w| w[1] <= w[0]);
    let slope = rep.slope.abs();
    verdict(
        monotone && (0.4..=1.0).contains(&slope),
        format!("median RMSE {medians:.3?} (non-increasing: {monotone}), |slope| {slope:.3} (range [0.4, 1.0])"),
    )
}

fn random_sweep() -> Check {
    let rows = bench::random_sweep(&RandomProblemParams::default(), 50, 100, 10, 7).map_err(|e| e.to_string())?;
    let med = bench::per_param_median_abs_err(&rows);
    let within = rows
        .iter()
        .filter(|r| r.log_err.iter().all(|e| e.abs() <= 0.3))
        .count();
    let frac = within as f64 / rows.len() as f64;
    verdict(
        med.iter().all(|&m| m <= 0.15) && frac >= 0.8,
        format!("median |log error| (r1, r2) = {med:.4?} (tol 0.15), {within}/{} within 0.3 (min 80%)", rows.len()),
    )
}

fn saccade() -> Check {
    let rs = bench::log_space(1e-6, 1e-4, 10);
    let reps = 10;
    let rows = bench::saccade_recovery(&rs, reps, 20, 10, 8).map_err(|e| e.to_string())?;
    let mut good = 0;
    let mut ratios = Vec::new();
    for (j, &r) in rs.iter().enumerate() {
        let mut est: Vec<f64> = rows[j * reps..(j + 1) * reps].iter().map(|row| row.estimate[0]).collect();
        est.sort_by(f64::total_cmp);
        let median = 0.5 * (est[reps / 2 - 1] + est[reps / 2]);
        let ratio = median / r;
        if (1.0 / 1.5..=1.5).contains(&ratio) {
            good += 1;
        }
        ratios.push(ratio);
    }
    verdict(
        good >= 9,
        format!("median estimate / truth = {ratios:.3?}; {good}/10 within ×1.5 (min 9)"),
    )
}

fn tracking() -> Check {
    let rep = bench::belief_tracking(&ReachingParams::default(), 1e-3, 20, 9).map_err(|e| e.to_string())?;
    let min_corr = rep.correlation.iter().copied().fold(f64::INFINITY, f64::min);
    verdict(
        min_corr >= 0.9 && rep.coverage >= 0.9,
        format!("min per-trial correlation {min_corr:.4} (min 0.9), ±2 SD coverage {:.3} (min 0.9)", rep.coverage),
    )
}

fn timing() -> Check {
    let rep = bench::likelihood_timing(&ReachingParams::default(), 100, 3, 10).map_err(|e| e.to_string())?;
    verdict(
        rep.seconds_total <= 2.0,
        format!(
            "gains + 100 trajectories in {:.4} s (gains {:.4} s; budget 2 s)",
            rep.seconds_total, rep.seconds_gains
        ),
    )
}

fn report(id: &str, name: &str, started: Instant, check: Check) -> bool {
    let secs = started.elapsed().as_secs_f64();
    let (tag, detail, ok) = match check {
        Ok(d) => ("PASS", d, true),
        Err(d) => ("FAIL", d, false),
    };
    println!("{tag} [{id}] {name}: {detail} [{secs:.1} s]");
    ok
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut ok = true;
    let t = Instant::now();
    ok &= report("1", "exact reduction without signal noise", t, exact_reduction());
    let t = Instant::now();
    ok &= report("2", "gains match Riccati and Kalman", t, separation());
    let t = Instant::now();
    ok &= report("3", "moment-matching fidelity", t, moment_matching());
    let t = Instant::now();
    let (c4, c5) = recovery_and_baseline();
    ok &= report("4", "reaching parameter recovery", t, c4);
    ok &= report("5", "plain-LQG baseline gap", t, c5);
    let t = Instant::now();
    ok &= report("6", "sample-size convergence", t, convergence());
    let t = Instant::now();
    ok &= report("7", "random-problem sweep", t, random_sweep());
    let t = Instant::now();
    ok &= report("8", "saccade recovery", t, saccade());
    let t = Instant::now();
    ok &= report("9", "belief tracking under partial observation", t, tracking());
    let t = Instant::now();
    ok &= report("10", "likelihood cost", t, timing());
    if !ok {
        std::process::exit(1);
    }
}
