use super::*;
use crate::lang::alpha::alpha_eq_program;
use crate::lang::{kind_check, load, parse_program, print};

pub(crate) const DRIFT: &str = "\
let zeros = 0.0
let st = 1.0
let sx = 0.5
let sy = 0.2
let x_init = 0.0
node g(x) = 2.0 * x
node controller(d) = mean(d)
proba f(pre_x) = pre_x + theta where
  rec init theta = sample(gaussian(zeros, st))
  and theta = last theta
proba tracker(y_obs) = x where
  rec init x = x_init
  and p = f(last x)
  and x = sample(gaussian(p, sx))
  and y = g(x)
  and () = observe(gaussian(y, sy), y_obs)
node main(y_obs) = msg where
  rec x_dist = infer(tracker(y_obs))
  and msg = controller(x_dist)
";

fn analysed(src: &str) -> (Program, Analysis) {
    let p = load(src).unwrap().0;
    let a = analyze(&p);
    (p, a)
}

fn phi_summary(a: &Analysis, f: &str) -> Vec<(String, String)> {
    a.get(f).unwrap().iter().map(|q| (q.name.clone(), print::expr(&q.prior))).collect()
}

#[test]
fn drift_parameters() {
    let (_, a) = analysed(DRIFT);
    assert_eq!(phi_summary(&a, "f"), [("theta".to_string(), "gaussian(zeros, st)".to_string())]);
    let t = phi_summary(&a, "tracker");
    assert_eq!(t.len(), 1);
    assert!(t[0].0.starts_with("theta_f"), "{t:?}");
    assert_eq!(t[0].1, "f__prior");
}

#[test]
fn drift_compiles_to_the_expected_listing() {
    let (p, a) = analysed(DRIFT);
    let c = compile(&p, &a).unwrap();
    kind_check(&c).unwrap();
    let expected = parse_program(
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
    let expected = crate::lang::uniquify(&expected).unwrap();
    assert!(alpha_eq_program(&c, &expected), "{}", print::program(&c));
}

#[test]
fn tracker_without_drift_has_no_parameters() {
    let src = DRIFT.replace("pre_x + theta where", "pre_x").replace(
        "\n  rec init theta = sample(gaussian(zeros, st))\n  and theta = last theta",
        "",
    );
    let (_, a) = analysed(&src);
    assert!(a.get("f").unwrap().is_empty());
    assert!(a.get("tracker").unwrap().is_empty());
}

#[test]
fn calls_under_reset_are_not_lifted() {
    let src = "proba k(u) = c where rec init c = sample(gaussian(0.0, 1.0)) and c = last c\n\
               proba m(r) = reset k(()) every r";
    let (p, a) = analysed(src);
    assert_eq!(a.get("k").unwrap().len(), 1);
    assert!(a.get("m").unwrap().is_empty());
    let c = compile(&p, &a).unwrap();
    kind_check(&c).unwrap();
    let text = print::program(&c);
    assert!(text.contains("sample(k__prior)"), "{text}");
    assert!(text.contains("= last theta_k"), "{text}");
}

#[test]
fn non_hold_and_non_constant_priors_are_rejected() {
    let (_, a) = analysed(
        "proba k(u) = c where rec init c = sample(gaussian(0.0, 1.0)) and c = last c + 1.0",
    );
    assert!(a.get("k").unwrap().is_empty());
    let (_, a) = analysed("proba k(u) = c where rec init c = sample(gaussian(u, 1.0)) and c = last c");
    assert!(a.get("k").unwrap().is_empty());
    let (_, a) = analysed(
        "proba k(u) = c where rec init c = sample(gaussian(0.0, 1.0)) + 0.0 and c = last c",
    );
    assert!(a.get("k").unwrap().is_empty());
}

#[test]
fn constant_equations() {
    let c: HashSet<String> = ["a".to_string()].into();
    let p = parse_program("let q = 0.0\nnode n(u) = 0.0 where rec x = a + 1.0 and y = x and z = last z and w = u")
        .unwrap();
    let Expr::Where(_, eqs) = p.decls[1].body() else { unreachable!() };
    let d = const_eqs(&c, eqs);
    let mut d: Vec<_> = d.into_iter().collect();
    d.sort();
    assert_eq!(d, ["x", "y", "z"]);
    assert!(!const_check(&c, &Expr::var("u")));
    assert!(const_check(&c, &crate::lang::parse_expr("x where rec x = a * 2.0").unwrap()));
}

#[test]
fn empty_parameters_compile_to_a_renaming() {
    let src = "proba m(y) = x where rec init x = 0.0 and x = sample(gaussian(last x, 1.0))\n\
               node main(y) = infer(m(y))";
    let (p, a) = analysed(src);
    let c = compile(&p, &a).unwrap();
    let expected = load(
        "let m__prior = ()\n\
         proba m__model(y) = x where rec init x = 0.0 and x = sample(gaussian(last x, 1.0))\n\
         node main(y) = APF.infer(m__model, m__prior, y)",
    )
    .unwrap()
    .0;
    assert!(alpha_eq_program(&c, &expected), "{}", print::program(&c));
    let t = permutations(&p, &a).unwrap();
    assert_eq!(t.models["m"].perm, [0]);
}

#[test]
fn drift_permutation_routes_theta_last() {
    let (p, a) = analysed(DRIFT);
    let t = permutations(&p, &a).unwrap();
    // Source tracker seeds: [f's theta : x noise]; compiled: [x noise] then the prior.
    assert_eq!(t.models["f"], PermEntry { source_rv: 1, compiled_rv: 0, prior_rv: 1, perm: vec![0] });
    assert_eq!(t.models["tracker"].perm, [1, 0]);
    assert_eq!(t.models["tracker"].compiled_rv, 1);
    let c = compile(&p, &a).unwrap();
    let rv = crate::lang::RvTable::new(&c);
    assert_eq!(rv.node("tracker__model"), 1);
    assert_eq!(rv.sample_arity(&Expr::var("tracker__prior")), 1);
}

#[test]
fn local_prior_block_stays_in_the_model_layout() {
    let src = "proba k(u) = c + sample(uniform(0.0, 1.0)) where \
                 rec init c = sample(gaussian(0.0, 1.0)) and c = last c\n\
               proba m(r) = sample(gaussian(0.0, 1.0)) + (reset k(()) every r)";
    let (p, a) = analysed(src);
    let t = permutations(&p, &a).unwrap();
    let e = &t.models["m"];
    // Source: [m's gaussian : k's uniform : k's init]. The compiled reset block keeps
    // k__model's uniform and then draws the local prior.
    assert_eq!((e.source_rv, e.compiled_rv, e.prior_rv), (3, 3, 0));
    assert_eq!(e.perm, [0, 1, 2]);
    assert_eq!(t.models["k"].perm, [0, 1]);
    assert_eq!(e.apply(&[10, 11, 12]), [10, 11, 12]);
}
