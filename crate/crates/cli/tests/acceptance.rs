//! Acceptance suite: one pass/fail line per criterion, nonzero exit if any fails.
//!
//! Criteria 7 and 9 drive the `muz` binary; the rest use the library directly.

use muz_core::apf;
use muz_core::dist::normal_icdf;
use muz_core::gen::{self, GenConfig, Generated};
use muz_core::infer::rng::unit;
use muz_core::lang::{self, alpha::alpha_eq_program, parse_expr, parse_program, Expr};
use muz_core::rel::{coit_rel_agree, equiv_check, grid_infer, total_variation, Rel};
use muz_core::{Apf, Dist, Interp, InferConfig, Pf, Semantics, Value};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

const DRIFT: &str = include_str!("../../../models/drift.muz");
const KALMAN: &str = include_str!("../../../models/kalman.muz");

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    normal_icdf(unit(rng.next_u64())).unwrap()
}

fn reals(xs: &[f64]) -> Vec<Value> {
    xs.iter().map(|&x| Value::Real(x)).collect()
}

/// Drift radar data: `x_t = x_{t-1} + theta + N(0, sx^2)`, `y_t = 2 x_t + N(0, sy^2)`.
fn drift_data(seed: u64, steps: usize) -> (f64, Vec<f64>) {
    let (sx, sy) = (0.5, 0.2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta = gauss(&mut rng);
    let mut x = 0.0;
    let ys = (0..steps)
        .map(|_| {
            x += theta + sx * gauss(&mut rng);
            2.0 * x + sy * gauss(&mut rng)
        })
        .collect();
    (theta, ys)
}

// 1. Fixpoint and scheduled interpreters agree on permuted generated programs.
fn schedule_invariance() -> Outcome {
    let start = Instant::now();
    let (programs, perms, steps) = (100u64, 20, 100);
    let mut failures = 0;
    for seed in 0..programs {
        let g = gen::generate(seed, &GenConfig::default()).unwrap();
        let xs = gen::inputs(seed, steps);
        let run = |p: &muz_core::Program, s: Semantics, seeds: &[Vec<f64>]| {
            let ip = Interp::new(p).unwrap().with_semantics(s);
            let m = ip.model(Generated::ENTRY).unwrap();
            let mut st = ip.init(m);
            xs.iter().zip(seeds).map(|(x, r)| ip.step(m, x, &mut st, r)).collect::<Result<Vec<_>, _>>()
        };
        let ip = Interp::new(&g.program).unwrap();
        let rv = ip.rv(ip.model(Generated::ENTRY).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let seeds: Vec<Vec<f64>> = (0..steps).map(|_| (0..rv).map(|_| unit(rng.next_u64())).collect()).collect();
        let base = run(&g.program, Semantics::Fixpoint, &seeds);
        let n_eqs = match g.program.get(Generated::ENTRY).unwrap().body() {
            Expr::Where(_, eqs) => eqs.len(),
            _ => unreachable!(),
        };
        for _ in 0..perms {
            let mut order: Vec<usize> = (0..n_eqs).collect();
            for i in (1..n_eqs).rev() {
                order.swap(i, (rng.next_u64() % (i as u64 + 1)) as usize);
            }
            let (q, perm) = gen::permute_equations(&g.program, Generated::ENTRY, &order).unwrap();
            let moved: Vec<Vec<f64>> = seeds
                .iter()
                .map(|s| {
                    let mut out = vec![0.0; rv];
                    perm.iter().enumerate().for_each(|(j, &k)| out[k] = s[j]);
                    out
                })
                .collect();
            for s in [Semantics::Fixpoint, Semantics::Scheduled] {
                if run(&q, s, &moved) != base {
                    failures += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        failures == 0 && secs < 30.0,
        format!("{programs} programs x {perms} orders x 2 semantics, {failures} mismatches, {secs:.1}s"),
    )
}

// 2. Iteration counts of the fixpoint semantics.
fn iteration_counts() -> Outcome {
    let swapped = "let x_init = 0.0\nlet theta = 0.5\nlet sx = 1.0\nlet sy = 0.5\n\
                   node f(x) = x + theta\nnode g(x) = 2.0 * x\n\
                   proba tracker(y_obs) = x where\n\
                     rec init x = x_init\n\
                     and y = g(x)\n\
                     and x = sample(gaussian(f(last x), sx))\n\
                     and () = observe(gaussian(y, sy), y_obs)";
    let ip = Interp::from_source(swapped).unwrap().with_semantics(Semantics::Fixpoint);
    let m = ip.model("tracker").unwrap();
    let mut st = ip.init(m);
    let mut tracker_iters = BTreeSet::new();
    for t in 0..10 {
        let (_, _, s) = ip.step_stats(m, &Value::Real(t as f64), &mut st, &[0.3]).unwrap();
        tracker_iters.insert(s.max_iterations);
    }
    let mut over = 0;
    let mut worst = 0;
    for seed in 0..200 {
        let g = gen::generate(seed, &GenConfig::default()).unwrap();
        let ip = Interp::new(&g.program).unwrap().with_semantics(Semantics::Fixpoint);
        let m = ip.model(Generated::ENTRY).unwrap();
        let mut st = ip.init(m);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for x in gen::inputs(seed, 20) {
            let r: Vec<f64> = (0..ip.rv(m)).map(|_| unit(rng.next_u64())).collect();
            let (_, _, s) = ip.step_stats(m, &x, &mut st, &r).unwrap();
            over += s.over_bound;
            worst = worst.max(s.max_iterations);
        }
    }
    let pass = tracker_iters == BTreeSet::from([3]) && over == 0;
    outcome(pass, format!("swapped tracker iterations {tracker_iters:?}; generated: {over} blocks over |X|+1 (max {worst})"))
}

// 3. Grid quadrature of the density semantics against hand enumeration.
fn density_kernel() -> Outcome {
    let p = lang::load("").unwrap().0;
    let rel = Rel::new(&p).unwrap();
    let micro = parse_expr("x where rec x = sample(bernoulli(0.2)) and () = factor(if x then 0.5 else 0.25)").unwrap();
    let m = grid_infer(&rel, &micro, &[], &[Value::Unit], 1000).unwrap();
    let p_true: f64 = m[0].iter().filter(|(v, _)| *v == Value::Bool(true)).map(|(_, p)| p).sum();
    let kernel = 0.2 * 0.5 / (0.2 * 0.5 + 0.8 * 0.25);
    let err = (p_true - kernel).abs();

    let ssm = lang::load(
        "proba ssm(y) = x where rec init x = false and flip = sample(bernoulli(0.3)) \
         and x = if flip then not (last x) else last x \
         and () = observe(bernoulli(if x then 0.8 else 0.1), y)",
    )
    .unwrap()
    .0;
    let ys = [true, false];
    let xs: Vec<Value> = ys.iter().map(|&y| Value::Bool(y)).collect();
    let g = grid_infer(&Rel::new(&ssm).unwrap(), &parse_expr("ssm(y)").unwrap(), &["y"], &xs, 10).unwrap();
    let lik = |x: bool, y: bool| {
        let q = if x { 0.8 } else { 0.1 };
        if y {
            q
        } else {
            1.0 - q
        }
    };
    let pr = |f: bool| if f { 0.3 } else { 0.7 };
    let mut post = [[0.0f64; 2]; 2];
    for f0 in [false, true] {
        for f1 in [false, true] {
            let (x0, x1) = (f0, f0 ^ f1);
            post[0][x0 as usize] += pr(f0) * pr(f1) * lik(x0, ys[0]);
            post[1][x1 as usize] += pr(f0) * pr(f1) * lik(x0, ys[0]) * lik(x1, ys[1]);
        }
    }
    let tv = (0..2)
        .map(|t| {
            let z = post[t][0] + post[t][1];
            let exact = [(Value::Bool(false), post[t][0] / z), (Value::Bool(true), post[t][1] / z)];
            total_variation(&g[t], &exact)
        })
        .fold(0.0, f64::max);
    outcome(err < 1e-9 && tv < 1e-9, format!("micro-model |P(true) - 1/3| = {err:.1e}; SSM max TV = {tv:.1e}"))
}

/// Exact filtering means and variances of the Kalman model.
fn kalman(ys: &[f64]) -> Vec<(f64, f64)> {
    let (a, q, c, r) = (0.9, 1.0, 1.0, 0.5);
    let (mut m, mut p) = (0.0, 0.0);
    ys.iter()
        .map(|y| {
            let (mp, pp) = (a * m, a * a * p + q);
            let k = pp * c / (c * c * pp + r);
            m = mp + k * (y - c * mp);
            p = (1.0 - k * c) * pp;
            (m, p)
        })
        .collect()
}

// 4. Particle filter against the Kalman filter.
fn pf_vs_kalman() -> Outcome {
    let start = Instant::now();
    let (n, steps, reps) = (10_000, 50, 30);
    let prog = lang::load(KALMAN).unwrap().0;
    let mut sq = vec![0.0; steps];
    let mut var_ratio = vec![0.0; steps];
    let mut bound = vec![0.0; steps];
    for rep in 0..reps {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + rep as u64);
        let mut x = 0.0;
        let ys: Vec<f64> = (0..steps)
            .map(|_| {
                x = 0.9 * x + gauss(&mut rng);
                x + 0.5f64.sqrt() * gauss(&mut rng)
            })
            .collect();
        let exact = kalman(&ys);
        let ip = Interp::new(&prog).unwrap().with_infer(InferConfig { particles: n, seed: rep as u64, ..Default::default() });
        let mut pf = Pf::new(&ip, ip.model("ssm").unwrap()).unwrap();
        for (t, y) in ys.iter().enumerate() {
            let s = pf.step(&ip, &Value::Real(*y)).unwrap().dist.summarize().unwrap();
            let (km, kv) = exact[t];
            sq[t] += (s.mean[0] - km).powi(2) / reps as f64;
            var_ratio[t] += s.var[0] / kv / reps as f64;
            bound[t] += 3.0 * kv.sqrt() / (n as f64).sqrt() / reps as f64;
        }
    }
    let rmse = sq.iter().map(|s| s.sqrt()).sum::<f64>() / steps as f64;
    let bound = bound.iter().sum::<f64>() / steps as f64;
    let worst_var = var_ratio.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        rmse < bound && worst_var < 0.1 && secs < 60.0,
        format!("mean RMSE {rmse:.4} vs bound {bound:.4}; worst variance ratio error {:.1}%; {secs:.1}s", 100.0 * worst_var),
    )
}

/// Source model vs its compiled counterpart fed with externally drawn parameters.
fn apf_equiv(p: &muz_core::Program, f: &str, xs: &[Value], trials: usize, seed: u64) -> muz_core::rel::Report {
    let a = apf::analyze(p);
    let c = apf::compile(p, &a).unwrap();
    let table = apf::permutations(p, &a).unwrap();
    let lhs = Expr::app(f, Expr::var("y"));
    let rhs = apf::expanded(&a, f, Expr::var("y"));
    let (src, out) = (Rel::new(p).unwrap(), Rel::new(&c).unwrap());
    equiv_check((&src, &lhs), (&out, &rhs), &["y"], xs, &table.models[f].perm, trials, seed).unwrap()
}

// 5. The APF compilation preserves traces under the emitted permutation.
fn apf_correctness() -> Outcome {
    let drift = lang::load(DRIFT).unwrap().0;
    let (_, ys) = drift_data(1, 50);
    let r = apf_equiv(&drift, "tracker", &reals(&ys), 100, 1);
    let mut passed = vec![format!("drift {}/{}", r.passed, r.trials)];
    let mut ok = r.pass && r.passed == 100;
    let cfg = GenConfig { params: true, ..GenConfig::default() };
    let (mut found, mut seed, mut total) = (0, 0u64, 0);
    while found < 20 {
        let g = gen::generate(seed, &cfg).unwrap();
        seed += 1;
        if apf::analyze(&g.program).get(Generated::ENTRY).map_or(true, |phi| phi.is_empty()) {
            continue;
        }
        found += 1;
        let r = apf_equiv(&g.program, Generated::ENTRY, &gen::inputs(seed, 50), 100, seed);
        ok &= r.pass && r.passed == 100;
        total += r.passed;
    }
    passed.push(format!("20 generated {total}/2000"));
    outcome(ok, passed.join(", "))
}

/// Posterior mean of theta for the drift model on a 4001-point grid, each point scored
/// exactly by a Kalman filter in `x`.
fn theta_oracle(ys: &[f64]) -> f64 {
    let (sx2, sy2) = (0.25, 0.04);
    let grid: Vec<f64> = (0..=4000).map(|i| -6.0 + 12.0 * i as f64 / 4000.0).collect();
    let logp: Vec<f64> = grid
        .iter()
        .map(|&th| {
            let (mut m, mut p) = (0.0, 0.0);
            let mut ll = -0.5 * th * th;
            for y in ys {
                let (mp, pp) = (m + th, p + sx2);
                let s = 4.0 * pp + sy2;
                let e = y - 2.0 * mp;
                ll += -0.5 * (e * e / s + s.ln());
                let k = 2.0 * pp / s;
                m = mp + k * e;
                p = (1.0 - 2.0 * k) * pp;
            }
            ll
        })
        .collect();
    let mx = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logp.iter().map(|l| (l - mx).exp()).collect();
    grid.iter().zip(&w).map(|(t, w)| t * w).sum::<f64>() / w.iter().sum::<f64>()
}

// 6. Plain PF collapses on theta; the APF keeps every cloud member and estimates better.
fn impoverishment() -> Outcome {
    let (n, k, steps, reps) = (1000, 100, 50, 30);
    let src = lang::load(DRIFT).unwrap().0;
    let a = apf::analyze(&src);
    let compiled = apf::compile(&src, &a).unwrap();
    // The plain PF runs the definition-expanded source with theta exposed in the output.
    let mut with_theta = lang::print::program(&compiled);
    with_theta.push_str(
        "\nproba exposed(y) = (theta, tracker__model(theta, y)) where \
         rec init theta = sample(tracker__prior) and theta = last theta\n",
    );
    let with_theta = lang::load(&with_theta).unwrap().0;
    let (mut apf_wins, mut pf_distinct_max, mut monotone, mut clouds_full) = (0, 0, true, true);
    for rep in 0..reps {
        let (_, ys) = drift_data(500 + rep, steps);
        let oracle = theta_oracle(&ys);
        let cfg = InferConfig { particles: n, cloud: k, seed: rep, ..Default::default() };

        let ip = Interp::new(&with_theta).unwrap().with_infer(cfg.clone());
        let mut pf = Pf::new(&ip, ip.model("exposed").unwrap()).unwrap();
        let mut prev = usize::MAX;
        let mut pf_est = 0.0;
        for y in &ys {
            let post = pf.step(&ip, &Value::Real(*y)).unwrap();
            let Dist::Empirical(e) = &post.dist else { unreachable!() };
            let distinct: BTreeSet<u64> = e.support.iter().map(|v| v.as_pair().unwrap().0.as_real().unwrap().to_bits()).collect();
            monotone &= distinct.len() <= prev;
            prev = distinct.len();
            pf_est = e.support.iter().zip(&e.weights).map(|(v, w)| w * v.as_pair().unwrap().0.as_real().unwrap()).sum();
        }
        pf_distinct_max = pf_distinct_max.max(prev);

        let ip = Interp::new(&compiled).unwrap().with_infer(cfg);
        let prior = ip.global(&apf::prior_name("tracker")).unwrap().clone();
        let mut f = Apf::new(&ip, ip.model(&apf::model_name("tracker")).unwrap(), prior).unwrap();
        let mut apf_est = 0.0;
        for y in &ys {
            apf_est = f.step(&ip, &Value::Real(*y)).unwrap().theta_mean[0];
        }
        clouds_full &= f.clouds().iter().all(|c| {
            c.thetas.iter().map(|t| t.as_real().unwrap().to_bits()).collect::<BTreeSet<_>>().len() == k
        });
        if (apf_est - oracle).abs() < (pf_est - oracle).abs() {
            apf_wins += 1;
        }
    }
    let pass = pf_distinct_max <= n / 20 && monotone && clouds_full && apf_wins >= 25;
    outcome(
        pass,
        format!(
            "PF distinct theta at t=50 at most {pf_distinct_max} (monotone: {monotone}); \
             APF clouds keep {k} values: {clouds_full}; APF closer to the grid oracle in {apf_wins}/{reps}"
        ),
    )
}

fn muz() -> Command {
    Command::new(env!("CARGO_BIN_EXE_muz"))
}

fn workdir() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

fn write_obs(dir: &Path, ys: &[f64]) -> PathBuf {
    let path = dir.join("obs.csv");
    let mut s = String::from("step,y_obs\n");
    for (t, y) in ys.iter().enumerate() {
        s.push_str(&format!("{t},{y:?}\n"));
    }
    std::fs::write(&path, s).unwrap();
    path
}

// 7. `check` and `compile-apf` on the drift example.
fn static_fidelity() -> Outcome {
    let dir = workdir();
    let model = dir.path().join("drift.muz");
    std::fs::write(&model, DRIFT).unwrap();
    let out = muz().arg("check").arg(&model).output().unwrap();
    let phi: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap_or_default();
    let params = |f: &str| -> Vec<(String, String)> {
        phi[f].as_object().map_or(Vec::new(), |o| {
            o.iter().map(|(k, v)| (k.clone(), v.as_str().unwrap_or("").to_string())).collect()
        })
    };
    let (f, tracker) = (params("f"), params("tracker"));
    let phi_ok = out.status.success()
        && phi.as_object().map_or(0, |o| o.len()) == 2
        && f.len() == 1
        && f[0].0 == "theta"
        && f[0].1.starts_with("gaussian(")
        && tracker.len() == 1
        && tracker[0].1 == apf::prior_name("f");

    let compiled = dir.path().join("drift.apf.muz");
    let status = muz().arg("compile-apf").arg(&model).arg("--out").arg(&compiled).output().unwrap().status;
    let listing = parse_program(
        "let zeros = 0.0
         let st = 1.0
         let sx = 0.5
         let sy = 0.2
         let x_init = 0.0
         node g(x) = 2.0 * x
         node controller(d) = mean(d)
         let f__prior = gaussian(zeros, st)
         proba f__model(theta, pre_x) = pre_x + theta
         let tracker__prior = f__prior
         proba tracker__model(theta, y_obs) = x where
           rec init x = x_init
           and p = f__model(theta, last x)
           and x = sample(gaussian(p, sx))
           and y = g(x)
           and () = observe(gaussian(y, sy), y_obs)
         node main(y_obs) = msg where
           rec x_dist = APF.infer(tracker__model, tracker__prior, y_obs)
           and msg = controller(x_dist)",
    )
    .unwrap();
    let listing = lang::uniquify(&listing).unwrap();
    let reparsed = std::fs::read_to_string(&compiled).ok().and_then(|s| parse_program(&s).ok());
    let listing_ok = status.success()
        && reparsed.map_or(false, |p| lang::uniquify(&p).map_or(false, |p| alpha_eq_program(&p, &listing)));
    let sidecar = dir.path().join("drift.apf.perm.json").exists();
    outcome(
        phi_ok && listing_ok && sidecar,
        format!("phi matches: {phi_ok}; compiled listing matches: {listing_ok}; sidecar written: {sidecar}"),
    )
}

// 8. Relational and co-iterative interpreters coincide on generated programs.
fn rel_coit() -> Outcome {
    let mut failures = 0;
    let mut errors = 0;
    for seed in 0..200 {
        let g = gen::generate(seed, &GenConfig::default()).unwrap();
        let rel = Rel::new(&g.program).unwrap();
        let e = parse_expr("main(y)").unwrap();
        match coit_rel_agree(&rel, &e, &[Generated::INPUT], &gen::inputs(seed, 20), Semantics::Auto, 10, seed) {
            Ok(r) => failures += r.trials - r.passed,
            Err(_) => errors += 1,
        }
    }
    outcome(failures == 0 && errors == 0, format!("200 programs x 10 prefixes, {failures} failures, {errors} errors"))
}

// 9. `infer` output is byte-identical across runs and thread counts.
fn reproducibility() -> Outcome {
    let dir = workdir();
    let model = dir.path().join("drift.muz");
    std::fs::write(&model, DRIFT).unwrap();
    let (_, ys) = drift_data(9, 50);
    let obs = write_obs(dir.path(), &ys);
    let mut ok = true;
    for algo in ["pf", "apf"] {
        let mut runs = Vec::new();
        for threads in ["1", "1", "1", "4"] {
            let out = muz()
                .env("MUZ_THREADS", threads)
                .args(["infer", "--algo", algo, "--particles", "500", "--cloud", "20", "--seed", "11", "--obs"])
                .arg(&obs)
                .arg(&model)
                .output()
                .unwrap();
            ok &= out.status.success();
            runs.push(out.stdout);
        }
        ok &= runs.iter().all(|r| r == &runs[0]) && runs[0].split(|&b| b == b'\n').count() == 52;
    }
    outcome(ok, "pf and apf: 3 runs with MUZ_THREADS=1 and 1 with MUZ_THREADS=4, identical CSV")
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("schedule invariance", schedule_invariance),
        ("fixpoint iteration count", iteration_counts),
        ("density/kernel correspondence", density_kernel),
        ("particle filter vs Kalman", pf_vs_kalman),
        ("APF compilation correctness", apf_correctness),
        ("impoverishment contrast", impoverishment),
        ("static analysis fidelity", static_fidelity),
        ("relational/co-iterative coincidence", rel_coit),
        ("reproducibility", reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        println!("criterion {}: {} [{name}] {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
