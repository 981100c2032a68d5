use muz_core::infer::resample::{normalize, resample};
use muz_core::infer::SeedGen;
use muz_core::lang::{load, parse_expr};
use muz_core::rel::{grid_infer, total_variation, Rel};
use muz_core::{apf, Apf, Dist, InferConfig, Interp, Pf, Resampling, Value};

const MICRO: &str = "proba micro(u) = x where rec x = sample(bernoulli(0.2)) and () = factor(if x then 0.5 else 0.25)";

const SSM: &str = "proba ssm(y) = x where rec init x = false \
    and flip = sample(bernoulli(0.3)) \
    and x = if flip then not (last x) else last x \
    and () = observe(bernoulli(if x then 0.8 else 0.1), y)";

const THETA: &str = "proba m(y) = theta where rec init theta = sample(uniform(0.0, 1.0)) \
    and theta = last theta and () = observe(gaussian(theta, 0.1), y)";

fn cfg(particles: usize, seed: u64) -> InferConfig {
    InferConfig { particles, seed, ..InferConfig::default() }
}

fn measure(d: &Dist) -> Vec<(Value, f64)> {
    match d {
        Dist::Empirical(e) => e.support.iter().cloned().zip(e.weights.iter().copied()).collect(),
        _ => panic!("expected an empirical posterior"),
    }
}

#[test]
fn evidence_estimate_is_unbiased_on_the_micro_model() {
    let runs = 200;
    let mut sum = 0.0;
    for r in 0..runs {
        let ip = Interp::from_source(MICRO).unwrap().with_infer(cfg(100, r));
        let m = ip.model("micro").unwrap();
        let post = Pf::new(&ip, m).unwrap().step(&ip, &Value::Unit).unwrap();
        sum += post.log_evidence.exp();
    }
    let mean = sum / runs as f64;
    // 0.2 * 0.5 + 0.8 * 0.25
    assert!((mean - 0.3).abs() < 0.02 * 0.3, "{mean}");
}

#[test]
fn particle_filter_matches_the_grid_on_discrete_models() {
    let ys = [Value::Bool(true), Value::Bool(false), Value::Bool(true)];
    for (src, name, xs) in [(MICRO, "micro", vec![Value::Unit]), (SSM, "ssm", ys.to_vec())] {
        let p = load(src).unwrap().0;
        let e = parse_expr(&format!("{name}(y)")).unwrap();
        let grid = grid_infer(&Rel::new(&p).unwrap(), &e, &["y"], &xs, 4).unwrap();
        let ip = Interp::new(&p).unwrap().with_infer(cfg(10_000, 5));
        let m = ip.model(name).unwrap();
        let mut pf = Pf::new(&ip, m).unwrap();
        for (t, x) in xs.iter().enumerate() {
            let post = pf.step(&ip, x).unwrap();
            let tv = total_variation(&measure(&post.dist), &grid[t]);
            assert!(tv < 0.02, "{name} at {t}: {tv}");
        }
    }
}

#[test]
fn parallel_and_sequential_filters_agree() {
    let src = "proba walk(y) = x where rec init x = 0.0 and x = sample(gaussian(last x, 1.0)) \
               and () = observe(gaussian(x, 0.5), y)";
    let run = |parallel: bool| {
        let ip = Interp::from_source(src).unwrap().with_infer(InferConfig { parallel, ..cfg(500, 9) });
        let m = ip.model("walk").unwrap();
        let mut pf = Pf::new(&ip, m).unwrap();
        (0..20)
            .map(|t| {
                let p = pf.step(&ip, &Value::Real((t as f64 * 0.3).cos())).unwrap();
                (p.dist, p.ess.to_bits(), p.log_evidence.to_bits())
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(run(false), run(true));
}

fn compiled_theta_filter(k: usize, seed: u64, ess_threshold: f64) -> (Interp, Apf) {
    let p = load(THETA).unwrap().0;
    let c = apf::compile(&p, &apf::analyze(&p)).unwrap();
    let ip = Interp::new(&c).unwrap().with_infer(InferConfig { cloud: k, ess_threshold, ..cfg(50, seed) });
    let m = ip.model(&apf::model_name("m")).unwrap();
    let prior = ip.global(&apf::prior_name("m")).unwrap().clone();
    let f = Apf::new(&ip, m, prior).unwrap();
    (ip, f)
}

fn entropy(logq: &[f64]) -> f64 {
    -logq.iter().filter(|q| q.is_finite()).map(|q| q.exp() * q).sum::<f64>()
}

#[test]
fn cloud_weights_follow_the_bayesian_update() {
    // No resampling, so cloud `i` keeps its lineage across steps.
    let (ip, mut f) = compiled_theta_filter(100, 3, 0.0);
    let y = 0.3;
    let mut last: Option<Vec<f64>> = None;
    for t in 1..=10 {
        f.step(&ip, &Value::Real(y)).unwrap();
        let hs: Vec<f64> = f.clouds().iter().map(|c| entropy(&c.logq)).collect();
        if let Some(prev) = &last {
            for (h0, h1) in prev.iter().zip(&hs) {
                assert!(h1 < h0, "entropy did not decrease at step {t}");
            }
        }
        last = Some(hs);
        // Grid oracle: prior weight 1/K times the likelihood of all t observations.
        for c in f.clouds() {
            let lik: Vec<f64> = c
                .thetas
                .iter()
                .map(|th| t as f64 * Dist::gaussian(th.as_real().unwrap(), 0.1).unwrap().log_pdf(&Value::Real(y)).unwrap())
                .collect();
            let w = normalize(&lik, 0).unwrap();
            for (q, w) in c.logq.iter().zip(&w) {
                assert!((q.exp() - w).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn cloud_support_is_never_modified() {
    let (ip, mut f) = compiled_theta_filter(20, 4, 0.5);
    f.step(&ip, &Value::Real(0.1)).unwrap();
    let supports: Vec<Vec<Value>> = f.clouds().iter().map(|c| c.thetas.clone()).collect();
    for t in 0..15 {
        f.step(&ip, &Value::Real(0.1 + 0.05 * t as f64)).unwrap();
        for c in f.clouds() {
            assert!(supports.contains(&c.thetas));
        }
    }
}

#[test]
fn single_member_clouds_fix_theta_per_particle() {
    let (ip, mut f) = compiled_theta_filter(1, 6, 0.5);
    for t in 0..10 {
        let post = f.step(&ip, &Value::Real(0.5)).unwrap();
        // The output is θ itself, so every particle reports its only cloud member.
        let thetas: Vec<Value> = f.clouds().iter().map(|c| c.thetas[0].clone()).collect();
        let Dist::Empirical(e) = &post.posterior.dist else { unreachable!() };
        assert_eq!(e.support, thetas, "step {t}");
        assert!(f.clouds().iter().all(|c| c.logq == [0.0]));
    }
}

#[test]
fn resampling_preserves_expectations() {
    let gen = SeedGen::new(17);
    let reps = 2000;
    for case in 0..20u32 {
        let mut rng = gen.stream(case, 0);
        let n = 2 + (case as usize % 9);
        let logw: Vec<f64> = (0..n).map(|_| 3.0 * muz_core::infer::rng::unit(rand::RngCore::next_u64(&mut rng)) - 1.5).collect();
        let h: Vec<f64> = (0..n).map(|i| (i as f64 * 1.3).sin()).collect();
        let w = normalize(&logw, 0).unwrap();
        let target: f64 = w.iter().zip(&h).map(|(w, h)| w * h).sum();
        for mode in [Resampling::Multinomial, Resampling::Systematic] {
            let means: Vec<f64> = (0..reps)
                .map(|r| {
                    let mut rng = gen.stream(1000 + case, r);
                    let idx = resample(&logw, n, mode, &mut rng, 0).unwrap();
                    idx.iter().map(|&i| h[i]).sum::<f64>() / n as f64
                })
                .collect();
            let m = means.iter().sum::<f64>() / reps as f64;
            let var = means.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (reps - 1) as f64;
            let se = (var / reps as f64).sqrt();
            assert!((m - target).abs() <= 3.0 * se + 1e-12, "case {case} {mode:?}: {m} vs {target} (se {se})");
        }
    }
}
