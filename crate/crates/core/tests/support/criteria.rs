//! The acceptance criteria, each as a single check over many instances.

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use isac_ot::aibot::initial_solution;
use isac_ot::association::{iterate_labels, run_association, AssociationContext};
use isac_ot::config::ConfigFile;
use isac_ot::harness::{
    default_rmin_list, run_algorithm, run_and_write, summarize, sweep, AlgoChoice, Algorithm,
    Experiment, Summary, Sweep,
};
use isac_ot::objective::{BudgetPool, PoolKind};
use isac_ot::power::{
    grid_search_oracle, run_dual_ascent, AscentSettings, DualModel, PowerLink, PowerProblem,
    Utility,
};
use isac_ot::sensing::{crb, SensingLink, SensingParams};

use super::examples::{csv_bodies, EXAMPLES};
use super::{close, oracles, pinned_config, Outcome, Scene};

/// Criterion 1: every worked example.
pub fn formulas() -> Outcome {
    let failed = super::examples::failures();
    if failed.is_empty() {
        Ok(format!("{} examples", EXAMPLES.len()))
    } else {
        Err(format!(
            "{} of {} examples failed: {}",
            failed.len(),
            EXAMPLES.len(),
            failed.join("; ")
        ))
    }
}

/// Criterion 2: labels after every association pass equal the exhaustive
/// argmin for that pass's masses; labels cover every point once and the
/// masses sum to K.
pub fn partition() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA55);
    let instances = 100;
    let mut passes = 0;
    for case in 0..instances {
        let mut c = ConfigFile::desk();
        c.stations = rng.random_range(1..=4);
        c.cooperative_uavs = rng.random_range(1..=8);
        c.sample_count = rng.random_range(10..=200);
        c.rng_seed = rng.random();
        let scene = Scene::new(c);
        let ctx = scene.ctx();
        let m = scene.scenario.stations.len();
        let k = ctx.k();
        let init = initial_solution(&ctx).map_err(|e| e.to_string())?;
        let assoc = AssociationContext::new(&ctx, &init.partition.uav_cells, &init.powers);
        let field = assoc.field(&scene.scenario.cloud.points);
        let run = iterate_labels(&field, &init.partition.labels, k, 20, true);
        for step in &run.history {
            req!(
                step.labels.len() == scene.scenario.cloud.len()
                    && step.labels.iter().all(|&l| l < m),
                "case {case} pass {}: labels do not cover the cloud",
                step.iteration
            );
            for (i, &l) in step.labels.iter().enumerate() {
                let want = oracles::argmin_cell(field.row(i), &step.masses, k);
                req!(
                    l == want,
                    "case {case} pass {} point {i}: {l} vs {want}",
                    step.iteration
                );
            }
            let total: f64 = step.masses.iter().sum();
            req!(
                close(total, k as f64, 1e-9),
                "case {case} pass {}: masses sum to {total}",
                step.iteration
            );
            let counted: f64 = oracles::masses_of(&step.labels, m, k).iter().sum();
            req!(
                close(counted, k as f64, 1e-9),
                "case {case}: label masses sum to {counted}"
            );
            passes += 1;
        }
        let part = run_association(&ctx, &assoc, &init.partition.labels, 20);
        req!(
            part.labels == run.labels,
            "case {case}: association run differs"
        );
    }
    Ok(format!("{instances} instances, {passes} passes"))
}

fn random_link(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> PowerLink {
    let utility = if rng.random_bool(0.6) {
        Utility::Rate {
            weight: rng.random_range(0.2..2.0),
            snr_per_watt: 10f64.powf(rng.random_range(-1.0..1.5)),
        }
    } else {
        Utility::Linear {
            slope: rng.random_range(0.05..1.0),
        }
    };
    PowerLink { utility, lo, hi }
}

/// One or two pools of one to three links with random bounds that admit
/// the budget.
fn random_problem(rng: &mut ChaCha8Rng) -> PowerProblem {
    let pools = rng.random_range(1..=2);
    let mut links = Vec::new();
    let mut defs = Vec::new();
    for n in 0..pools {
        let count = rng.random_range(1..=3);
        let budget = rng.random_range(0.5..10.0);
        let share = budget / count as f64;
        let mut members = Vec::new();
        for _ in 0..count {
            let lo = if rng.random_bool(0.5) {
                0.0
            } else {
                rng.random_range(0.0..0.2 * share)
            };
            let hi = if count == 1 {
                budget * rng.random_range(1.0..2.0)
            } else {
                rng.random_range(1.05 * share..budget)
            };
            members.push(links.len());
            links.push(random_link(rng, lo, hi));
        }
        defs.push(BudgetPool {
            station: n,
            kind: if n == 0 {
                PoolKind::Communication
            } else {
                PoolKind::Sensing
            },
            links: members,
            budget,
        });
    }
    PowerProblem::from_parts(links, defs, 0).expect("bounds admit the budget")
}

/// Criterion 3: the power ascent stays within 2% of the lattice optimum and
/// its output meets the box exactly and every budget to 1e-9.
pub fn power_gap() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xB0B);
    let instances = 60;
    let mut worst: f64 = 0.0;
    for case in 0..instances {
        let p = random_problem(&mut rng);
        let levels = rng.random_range(8..=32);
        let s = run_dual_ascent(&p, &AscentSettings::default()).map_err(|e| e.to_string())?;
        let (_, best) = grid_search_oracle(&p, levels).map_err(|e| e.to_string())?;
        let gap = (best - s.g_tol) / best.abs().max(f64::MIN_POSITIVE);
        worst = worst.max(gap);
        req!(
            s.g_tol >= best - 0.02 * best.abs(),
            "case {case}: {} vs oracle {best} ({levels} levels)",
            s.g_tol
        );
        for (i, (x, l)) in s.powers.iter().zip(&p.links).enumerate() {
            req!(
                *x >= l.lo && *x <= l.hi,
                "case {case} link {i}: {x} outside [{}, {}]",
                l.lo,
                l.hi
            );
        }
        for pool in &p.pools {
            let total: f64 = pool.links.iter().map(|&i| s.powers[i]).sum();
            req!(
                (total - pool.budget).abs() <= 1e-9 * pool.budget,
                "case {case}: pool total {total} vs budget {}",
                pool.budget
            );
        }
    }
    Ok(format!(
        "{instances} instances, largest shortfall {:.3}%",
        100.0 * worst
    ))
}

/// Criterion 4: analytic pool-price gradient against central differences of
/// the dual value.
pub fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0DE);
    let instances = 20;
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for case in 0..instances {
        let p = random_problem(&mut rng);
        let model = DualModel::new(&p, 64);
        let prices: Vec<f64> = (0..p.pools.len())
            .map(|n| model.initial_price(n) * rng.random_range(0.3..3.0))
            .collect();
        let g = model.gradient(&prices);
        for n in 0..prices.len() {
            let f = |x: f64| {
                let mut q = prices.clone();
                q[n] = x;
                model.dual_value(&q)
            };
            let fd = oracles::central_difference(f, prices[n], h);
            let err = if g[n] == 0.0 {
                fd.abs()
            } else {
                (fd - g[n]).abs() / g[n].abs()
            };
            worst = worst.max(err);
            req!(
                err < 1e-4,
                "case {case} pool {n}: analytic {}, finite difference {fd}",
                g[n]
            );
        }
    }
    Ok(format!(
        "{instances} instances, largest relative error {worst:.2e}"
    ))
}

fn pinned_runs() -> Result<(Experiment, Vec<isac_ot::harness::AlgoRun>), String> {
    let exp = Experiment::new(pinned_config()).map_err(|e| e.to_string())?;
    let slots = exp.slots().map_err(|e| e.to_string())?;
    let runs = [Algorithm::Aibot, Algorithm::Baseline]
        .iter()
        .map(|&a| run_algorithm(&exp, &slots, a).map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((exp, runs))
}

/// AIBOT and baseline summaries on the pinned scenario.
pub fn pinned_pair() -> Result<(Summary, Summary), String> {
    let (exp, runs) = pinned_runs()?;
    Ok((summarize(&exp, &runs[0]), summarize(&exp, &runs[1])))
}

/// Criterion 5: the relative objective change drops below 1e-3 within five
/// outer iterations and the best-seen objective never decreases.
pub fn convergence() -> Outcome {
    let (_, runs) = pinned_runs()?;
    let records = &runs[0].slots[0].trace.records;
    let g: Vec<f64> = records.iter().map(|r| r.g_tol).collect();
    let settled = (1..g.len().min(5))
        .find(|&t| (g[t] - g[t - 1]).abs() / g[t].abs().max(g[t - 1].abs()) < 1e-3);
    req!(settled.is_some(), "objective trace {g:?}");
    let best: Vec<f64> = records.iter().map(|r| r.best_g_tol).collect();
    req!(
        best.windows(2).all(|w| w[1] >= w[0]),
        "best-seen trace {best:?}"
    );
    Ok(format!(
        "settled at iteration {} of {}, G_TOL {:.6e}",
        settled.unwrap() + 1,
        g.len(),
        g[settled.unwrap()]
    ))
}

/// Criterion 6: AIBOT's objective strictly above the baseline's and its
/// non-cooperative CRB no larger.
pub fn dominance() -> Outcome {
    let (a, b) = pinned_pair()?;
    let crb_a = a.crb_noncoop.unwrap_or(f64::INFINITY);
    let crb_b = b.crb_noncoop.unwrap_or(f64::INFINITY);
    let detail = format!(
        "G_TOL {:.6e} vs {:.6e} ({:+.2}%), non-cooperative CRB {:.6e} vs {:.6e} ({:+.2}%)",
        a.g_tol,
        b.g_tol,
        100.0 * (a.g_tol - b.g_tol) / b.g_tol,
        crb_a,
        crb_b,
        100.0 * (crb_a - crb_b) / crb_b
    );
    req!(a.g_tol > b.g_tol, "objective not above baseline: {detail}");
    req!(
        crb_a <= crb_b,
        "non-cooperative CRB above baseline: {detail}"
    );
    Ok(detail)
}

/// Criterion 7: over five increasing rate floors the sum rate never rises
/// and the non-cooperative CRB never falls.
pub fn tradeoff() -> Outcome {
    let file = pinned_config();
    let list = default_rmin_list(&file).map_err(|e| e.to_string())?;
    req!(
        list.len() == 5 && list.windows(2).all(|w| w[1] > w[0]),
        "rate floors {list:?}"
    );
    let rows =
        sweep(&file, &Sweep::RMin(list.clone()), Algorithm::Aibot).map_err(|e| e.to_string())?;
    let rates: Vec<f64> = rows.iter().map(|r| r.summary.r_sum).collect();
    let crbs: Vec<f64> = rows
        .iter()
        .map(|r| r.summary.crb_noncoop.unwrap_or(f64::INFINITY))
        .collect();
    req!(
        rates.windows(2).all(|w| w[1] <= w[0]),
        "sum rates {rates:?} over {list:?}"
    );
    req!(
        crbs.windows(2).all(|w| w[1] >= w[0]),
        "CRBs {crbs:?} over {list:?}"
    );
    Ok(format!(
        "sum rate {:.6e} -> {:.6e}, CRB {:.6e} -> {:.6e}, {} infeasible",
        rates[0],
        rates[4],
        crbs[0],
        crbs[4],
        rows.iter().filter(|r| r.infeasible).count()
    ))
}

/// Criterion 8: identical inputs give byte-identical CSVs, across repeated
/// runs and across thread counts.
pub fn determinism() -> Outcome {
    let exp = Experiment::new(pinned_config()).map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for threads in [1, 4, 4] {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| e.to_string())?;
        pool.install(|| run_and_write(&exp, AlgoChoice::Both, dir.path()))
            .map_err(|e| e.to_string())?;
        outputs.push(csv_bodies(dir.path()));
    }
    req!(!outputs[0].is_empty(), "no CSV written");
    req!(outputs[1] == outputs[2], "repeated runs differ");
    req!(
        outputs[0] == outputs[1],
        "1-thread and 4-thread runs differ"
    );
    let bytes: usize = outputs[0].iter().map(|(_, b)| b.len()).sum();
    Ok(format!(
        "{} CSV files, {bytes} bytes, 1 and 4 threads",
        outputs[0].len()
    ))
}

/// Criterion 9: doubling the sensing power halves both CRBs exactly.
pub fn crb_physics() -> Outcome {
    let mut runner = TestRunner::new(Config {
        cases: 512,
        failure_persistence: None,
        ..Config::default()
    });
    let strategy = (
        1e-6f64..1e3,
        1e-12f64..1.0,
        1e3f64..1e9,
        1e-3f64..1.0,
        1e3f64..1e9,
    );
    runner
        .run(&strategy, |(power, gain, bandwidth, beamwidth, b_rms)| {
            let params = SensingParams {
                effective_bandwidth: b_rms,
                null_to_null_beamwidth: beamwidth,
                ..SensingParams::default()
            };
            let link = SensingLink {
                target: 0,
                station: 0,
                gain,
                power,
                bandwidth,
            };
            let a = crb(&link, &params).unwrap();
            let b = crb(
                &SensingLink {
                    power: 2.0 * power,
                    ..link
                },
                &params,
            )
            .unwrap();
            prop_assert_eq!(b.crb_distance, a.crb_distance / 2.0);
            prop_assert_eq!(b.crb_angle, a.crb_angle / 2.0);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("512 random cases, exact halving".into())
}
