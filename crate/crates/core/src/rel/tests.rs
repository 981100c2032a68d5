use super::*;
use crate::coiter::Semantics;
use crate::dist::Dist;
use crate::lang::{load, parse_expr, Program};
use crate::value::Value;

fn prog(src: &str) -> Program {
    load(src).unwrap().0
}

fn units(n: usize) -> Vec<Value> {
    vec![Value::Unit; n]
}

const TRACKER: &str = "\
let x_init = 0.0
node g(x) = 2.0 * x
proba tracker(y_obs) = x where
  rec init x = x_init
  and x = sample(gaussian(last x, 1.0))
  and y = g(x)
  and () = observe(gaussian(y, 0.5), y_obs)
";

#[test]
fn constants_and_delays() {
    let p = prog("");
    let out = rel_eval(&p, &parse_expr("5.0").unwrap(), &[], &units(4), &[]).unwrap();
    assert_eq!(out, vec![(Value::Real(5.0), 0.0); 4]);
    let e = parse_expr("x where rec init x = 0.0 and x = last x + 1.0").unwrap();
    let out = rel_eval(&p, &e, &[], &units(3), &[]).unwrap();
    assert_eq!(out.iter().map(|(v, _)| v.clone()).collect::<Vec<_>>(), [1.0, 2.0, 3.0].map(Value::Real));
}

#[test]
fn tracker_prefix_matches_the_stream_table() {
    let p = prog(TRACKER);
    let r = vec![vec![0.3, 0.8, 0.55]];
    let ys = [0.1, -0.4, 0.9];
    let xs: Vec<Value> = ys.iter().map(|&y| Value::Real(y)).collect();
    let out = rel_eval(&p, &parse_expr("tracker(y)").unwrap(), &["y"], &xs, &r).unwrap();
    let mut prev = 0.0;
    for t in 0..3 {
        let x = prev + crate::dist::normal_icdf(r[0][t]).unwrap();
        let w = Dist::gaussian(2.0 * x, 0.5).unwrap().log_pdf(&Value::Real(ys[t])).unwrap();
        assert_eq!(out[t], (Value::Real(x), w), "instant {t}");
        prev = x;
    }
}

#[test]
fn non_causal_equations_are_inconsistent() {
    let p = prog("");
    let e = parse_expr("x where rec x = y + 1.0 and y = x").unwrap();
    assert!(matches!(rel_eval(&p, &e, &[], &units(1), &[]), Err(crate::error::Error::Inconsistent(_))));
}

#[test]
fn swapped_samples_are_equivalent_under_the_swap() {
    let p = prog("");
    let rel = Rel::new(&p).unwrap();
    let a = parse_expr("sample(gaussian(0.0, 1.0)) + sample(uniform(0.0, 2.0))").unwrap();
    let b = parse_expr("x1 + x2 where rec x2 = sample(uniform(0.0, 2.0)) and x1 = sample(gaussian(0.0, 1.0))")
        .unwrap();
    let r = equiv_check((&rel, &a), (&rel, &b), &[], &units(5), &[1, 0], 50, 7).unwrap();
    assert!(r.pass && r.passed == 50, "{r:?}");
    let r = equiv_check((&rel, &a), (&rel, &b), &[], &units(5), &[0, 1], 5, 7).unwrap();
    assert!(!r.pass);
    let r = equiv_check((&rel, &a), (&rel, &a), &[], &units(5), &[0, 1], 10, 7).unwrap();
    assert!(r.pass);
}

#[test]
fn sample_is_not_its_median() {
    let p = prog("");
    let rel = Rel::new(&p).unwrap();
    let a = parse_expr("sample(gaussian(0.0, 1.0))").unwrap();
    let b = parse_expr("0.0").unwrap();
    let r = equiv_check((&rel, &a), (&rel, &b), &[], &units(3), &[0], 4, 1).unwrap();
    assert!(!r.pass);
    let c = r.counterexample.unwrap();
    assert_eq!((c.trial, c.step), (0, 0));
    assert!(equiv_check((&rel, &a), (&rel, &b), &[], &units(3), &[], 1, 1).is_err());
}

#[test]
fn bernoulli_micro_model_posterior_is_one_third() {
    let p = prog("");
    let rel = Rel::new(&p).unwrap();
    let e = parse_expr("x where rec x = sample(bernoulli(0.2)) and () = factor(if x then 0.5 else 0.25)").unwrap();
    let m = grid_infer(&rel, &e, &[], &units(1), 1000).unwrap();
    let p_true: f64 = m[0].iter().filter(|(v, _)| *v == Value::Bool(true)).map(|(_, p)| p).sum();
    // 0.2 * 0.5 / (0.2 * 0.5 + 0.8 * 0.25)
    assert!((p_true - 1.0 / 3.0).abs() < 1e-9, "{p_true}");
}

#[test]
fn grid_without_factor_is_the_prior() {
    let p = prog("");
    let rel = Rel::new(&p).unwrap();
    let n = 200;
    let m = grid_infer(&rel, &parse_expr("sample(uniform(0.0, 1.0))").unwrap(), &[], &units(1), n).unwrap();
    assert_eq!(m[0].len(), n);
    let mean: f64 = m[0].iter().map(|(v, p)| v.as_real().unwrap() * p).sum();
    assert!((mean - 0.5).abs() < 1.0 / n as f64);
}

#[test]
fn bernoulli_ssm_matches_path_enumeration() {
    let p = prog(
        "proba ssm(y) = x where rec init x = false \
           and flip = sample(bernoulli(0.3)) \
           and x = if flip then not (last x) else last x \
           and () = observe(bernoulli(if x then 0.8 else 0.1), y)",
    );
    let rel = Rel::new(&p).unwrap();
    let ys = [true, false];
    let xs: Vec<Value> = ys.iter().map(|&y| Value::Bool(y)).collect();
    let m = grid_infer(&rel, &parse_expr("ssm(y)").unwrap(), &["y"], &xs, 10).unwrap();

    // Oracle: the four flip paths, weighted by prior and likelihood.
    let lik = |x: bool, y: bool| {
        let q = if x { 0.8 } else { 0.1 };
        if y {
            q
        } else {
            1.0 - q
        }
    };
    let mut post = [[0.0f64; 2]; 2];
    for f0 in [false, true] {
        for f1 in [false, true] {
            let pr = |f: bool| if f { 0.3 } else { 0.7 };
            let x0 = f0;
            let x1 = x0 ^ f1;
            post[0][x0 as usize] += pr(f0) * pr(f1) * lik(x0, ys[0]);
            post[1][x1 as usize] += pr(f0) * pr(f1) * lik(x0, ys[0]) * lik(x1, ys[1]);
        }
    }
    for t in 0..2 {
        let z = post[t][0] + post[t][1];
        let oracle = vec![(Value::Bool(false), post[t][0] / z), (Value::Bool(true), post[t][1] / z)];
        assert!(total_variation(&m[t], &oracle) < 1e-9, "instant {t}: {:?}", m[t]);
    }
}

#[test]
fn grid_budget_is_enforced() {
    let p = prog("");
    let rel = Rel::new(&p).unwrap();
    let e = parse_expr("sample(uniform(0.0, 1.0)) + sample(uniform(0.0, 1.0))").unwrap();
    assert!(matches!(
        grid_infer(&rel, &e, &[], &units(3), 100),
        Err(crate::error::Error::Budget(_))
    ));
}

#[test]
fn interpreters_agree_on_the_tracker() {
    let p = prog(TRACKER);
    let rel = Rel::new(&p).unwrap();
    let xs: Vec<Value> = (0..20).map(|t| Value::Real((t as f64 * 0.7).sin())).collect();
    for s in [Semantics::Fixpoint, Semantics::Scheduled] {
        let r = coit_rel_agree(&rel, &parse_expr("tracker(y)").unwrap(), &["y"], &xs, s, 50, 3).unwrap();
        assert!(r.pass, "{r:?}");
    }
}

#[test]
fn present_and_reset_clocks_agree() {
    let p = prog(
        "node count(u) = x where rec init x = 0.0 and x = last x + 1.0\n\
         proba walk(u) = x where rec init x = 0.0 and x = sample(gaussian(last x, 1.0))",
    );
    let rel = Rel::new(&p).unwrap();
    let cs = [true, false, false, true, true, false, true, false];
    let xs: Vec<Value> = cs.iter().map(|&c| Value::Bool(c)).collect();
    for src in [
        "present c -> count(()) else 0.0 - count(())",
        "present c -> walk(()) else walk(()) + last y where rec init y = 1.0 and y = count(())",
        "reset walk(()) + count(()) every c",
        "reset (present c -> walk(()) else count(())) every c",
        "(reset count(()) every c) + sample(uniform(0.0, 1.0))",
    ] {
        let e = parse_expr(src).unwrap();
        let r = coit_rel_agree(&rel, &e, &["c"], &xs, Semantics::Auto, 10, 11).unwrap();
        assert!(r.pass, "{src}: {r:?}");
    }
    // Firing at the first instant changes nothing.
    let e = parse_expr("reset count(()) every c").unwrap();
    let out = rel.eval(&e, &["c"], &xs, &mut Streams(&[])).unwrap();
    let vals: Vec<f64> = out.iter().map(|(v, _)| v.as_real().unwrap()).collect();
    assert_eq!(vals, [1.0, 2.0, 3.0, 1.0, 1.0, 2.0, 1.0, 2.0]);
}
