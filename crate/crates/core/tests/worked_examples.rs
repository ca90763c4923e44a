//! Worked examples: fixed settings with known verdicts and chase results.

use std::collections::BTreeSet;

use chasecert_core::chase::{
    build_instance_deps, build_phi_mv, build_sigma_neq, canonical_universal_solution, chase_query,
    check_weak_acyclicity, default_budget, WeakAcyclicity,
};
use chasecert_core::decide::{
    certain_answers_staged, conditional_containment, containment_root, find_certain_answers, is_certain_answer,
    mv_expansion, plain_containment, setting_is_valid, sigma_containment, view_verified_solutions, Evidence, Method,
    Options, Stage,
};
use chasecert_core::hom::{answers_without_nulls, instances_isomorphic, rules_isomorphic, ucq_contained_in_cq};
use chasecert_core::model::setting_constants;
use chasecert_core::{parse_instance, parse_rule, Instance, Rule};
use chasecert_testkit::{c, fixture, tuple, tuples};

fn rule(text: &str) -> Rule {
    parse_rule(text).unwrap()
}

fn inst(text: &str) -> Instance {
    parse_instance(text).unwrap()
}

fn opts() -> Options {
    Options::default()
}

#[test]
fn running_example_constants_and_expansion() {
    let s = fixture("employees");
    let consts: BTreeSet<_> = ["c", "d", "f"].iter().map(|n| c(n)).collect();
    assert_eq!(setting_constants(&s), consts);
    let exp = mv_expansion(&s);
    let expected = rule("query Q1(c,f) :- H(d), E(c,d,X), E(Y,d,f).");
    let got = chasecert_core::model::make_rule("Q1", expected.head().to_vec(), exp.c_exp, []).unwrap();
    assert!(rules_isomorphic(&got, &expected), "{got}");
}

#[test]
fn running_example_weakly_acyclic() {
    let s = fixture("employees");
    assert_eq!(check_weak_acyclicity(&s.sigma), WeakAcyclicity::WeaklyAcyclic);
}

#[test]
fn running_example_universal_solution() {
    let s = fixture("employees");
    let j = canonical_universal_solution(&s, None).unwrap().unwrap();
    let expected = inst("fact E(c,d,_n1). fact E(_n2,d,f). fact H(d). fact O(c,_n3). fact O(_n2,_n4).");
    assert!(instances_isomorphic(&j, &expected), "{j}");
}

#[test]
fn running_example_certain_tuple() {
    let s = fixture("employees");
    let q = s.query("Q").unwrap();
    assert!(is_certain_answer(&s, q, &tuple(&["c", "f"]), &opts()).unwrap());
    assert!(!is_certain_answer(&s, q, &tuple(&["d", "d"]), &opts()).unwrap());
    assert!(!is_certain_answer(&s, q, &tuple(&["c", "zz"]), &opts()).unwrap());
}

#[test]
fn running_example_methods() {
    let s = fixture("employees");
    let q = s.query("Q").unwrap();
    let vv = find_certain_answers(&s, q, Method::ViewVerified, &opts()).unwrap();
    let gt = find_certain_answers(&s, q, Method::GenerateTest, &opts()).unwrap();
    let owa = find_certain_answers(&s, q, Method::OwaBaseline, &opts()).unwrap();
    assert_eq!(vv.tuples, tuples(&[&["c", "f"]]));
    assert_eq!(gt.tuples, vv.tuples);
    assert!(owa.tuples.is_empty());
    assert!(vv.valid_setting && gt.valid_setting);
}

#[test]
fn running_example_containment_of_q1() {
    let s = fixture("employees");
    let v = conditional_containment(&s, s.query("Q1").unwrap(), s.query("Q").unwrap(), &opts()).unwrap();
    assert!(v.holds);
}

#[test]
fn disjunctive_chase_components() {
    let s = fixture("repeat_vars");
    let q1 = s.query("Q1").unwrap();
    let v = conditional_containment(&s, q1, s.query("Q2").unwrap(), &opts()).unwrap();
    assert!(v.holds);
    let comps = &v.chase_result.components;
    let expected = [
        "query Q1(c) :- P(c,c), R(c).",
        "query Q1(X) :- P(X,Y), X != Y, P(c,c), R(c).",
    ];
    assert_eq!(comps.len(), expected.len(), "{comps:?}");
    for e in expected {
        let e = rule(e);
        assert!(comps.iter().any(|q| rules_isomorphic(q, &e)), "missing {e}");
    }
    let w = conditional_containment(&s, q1, s.query("Q2x").unwrap(), &opts()).unwrap();
    assert!(!w.holds);
    assert!(matches!(w.evidence, Evidence::CounterexampleComponent(_)));
}

#[test]
fn unconstrained_p_subgoal_is_not_a_chase_leaf() {
    // Q1(X) :- P(X,Y), R(X), P(c,c), R(c) still admits a tau_V step.
    let s = fixture("repeat_vars");
    let q = rule("query Q1(X) :- P(X,Y), R(X), P(c,c), R(c).");
    let mut deps = build_phi_mv(&s);
    deps.extend(build_sigma_neq(&s.sigma));
    let (_, tree) = chase_query(&q, &deps, 100).unwrap();
    assert!(tree.nodes.len() > 1);
}

#[test]
fn derived_dependencies_for_repeated_variables() {
    let s = fixture("repeat_vars");
    let neq = build_sigma_neq(&s.sigma);
    assert_eq!(neq[0].to_string(), "sigma_neq: P(X,Z_1) -> R(X) | X != Z_1");
    let phi = build_phi_mv(&s);
    assert_eq!(phi[0].to_string(), "tau_V: P(X,Z_1) -> X = c, Z_1 = c | X != Z_1");
}

#[test]
fn office_key_four_verdicts() {
    let s = fixture("office_key");
    let r = s.query("Rexp").unwrap();
    let q = s.query("Q").unwrap();
    assert!(!plain_containment(r, q).unwrap());
    assert!(!sigma_containment(&s.sigma, r, q, None).unwrap());
    assert!(
        !conditional_containment(&s.without_sigma(), r, q, &opts())
            .unwrap()
            .holds
    );
    let v = conditional_containment(&s, r, q, &opts()).unwrap();
    assert!(v.holds);
    let expected = rule("query Rexp(c,f) :- E(c,d,f), H(d), O(c,Z).");
    assert_eq!(v.chase_result.components.len(), 1);
    assert!(
        rules_isomorphic(&v.chase_result.components[0], &expected),
        "{}",
        v.chase_result.components[0]
    );
}

#[test]
fn late_view_step_single_component() {
    let s = fixture("late_view_step");
    let q1 = s.query("Q1").unwrap();
    let q2 = s.query("Q2").unwrap();
    let v = conditional_containment(&s, q1, q2, &opts()).unwrap();
    assert!(v.holds);
    let expected = rule("query Q1(X) :- S(X,f), P(f,c), R(c), P(Z,c), S(T,f).");
    assert_eq!(v.chase_result.components.len(), 1);
    assert!(
        rules_isomorphic(&v.chase_result.components[0], &expected),
        "{}",
        v.chase_result.components[0]
    );
    assert!(!plain_containment(q1, q2).unwrap());
    assert!(!sigma_containment(&s.sigma, q1, q2, None).unwrap());
}

#[test]
fn repeated_variable_components() {
    let s = fixture("view_repeat");
    let root = containment_root(&s, s.query("Q1").unwrap());
    let deps = build_phi_mv(&s);
    let (u, _) = chase_query(&root, &deps, default_budget(root.body().len(), s.mv.len())).unwrap();
    assert_eq!(u.components.len(), 2);
    for e in ["query Q1(c) :- P(c,c).", "query Q1(X) :- P(X,Y), X != Y, P(c,c)."] {
        let e = rule(e);
        assert!(u.components.iter().any(|q| rules_isomorphic(q, &e)), "missing {e}");
    }
    let s = fixture("tgd_repeat");
    let root = containment_root(&s, s.query("Q1").unwrap());
    let mut deps = build_phi_mv(&s);
    deps.extend(build_sigma_neq(&s.sigma));
    let (u, _) = chase_query(&root, &deps, 100).unwrap();
    let listed = [
        "query Q1(c) :- P(c,Y), S(c), P(c,Z).",
        "query Q1(c) :- P(c,Y), S(c), P(c,Z), Z != c.",
        "query Q1(c) :- P(c,Y), Y != c, P(c,Z), S(c).",
        "query Q1(c) :- P(c,Y), Y != c, P(c,Z), Z != c.",
    ]
    .map(rule);
    assert_eq!(u.components.len(), 3, "{u:?}");
    for q in &u.components {
        assert!(listed.iter().any(|e| rules_isomorphic(q, e)), "unexpected {q}");
    }
}

#[test]
fn owa_misses_answer_with_nulls() {
    let s = fixture("null_answers");
    let q = s.query("Q").unwrap();
    let j = canonical_universal_solution(&s, None).unwrap().unwrap();
    assert!(instances_isomorphic(&j, &inst("fact E(c,d,_n1). fact E(_n2,d,f).")));
    assert!(answers_without_nulls(q, &j).is_empty());
    let vv = find_certain_answers(&s, q, Method::ViewVerified, &opts()).unwrap();
    assert_eq!(vv.tuples, tuples(&[&["c", "f"]]));
}

#[test]
fn two_employees_view_verified() {
    let s = fixture("two_employees");
    let (st, mv) = build_instance_deps(&s);
    assert_eq!(st[0].to_string(), "st_V: V(X,Y) -> exists Z . E(X,Y,Z)");
    assert_eq!(mv[0].to_string(), "tau_V: E(X,Y,Z) -> X = c, Y = d | X = g, Y = d");
    assert_eq!(mv[1].to_string(), "tau_W: E(X,Y,Z) -> Y = d, Z = f");
    let out = view_verified_solutions(&s, Stage::Interleaved, &opts()).unwrap();
    assert_eq!(out.solutions, vec![inst("fact E(c,d,f). fact E(g,d,f).")]);
    let q = s.query("Q").unwrap();
    let vv = find_certain_answers(&s, q, Method::ViewVerified, &opts()).unwrap();
    assert_eq!(vv.tuples, tuples(&[&["c", "f"], &["g", "f"]]));
    assert!(setting_is_valid(&s, &opts()).unwrap());
}

#[test]
fn binary_choices_has_eight_solutions() {
    let s = fixture("binary_choices");
    let out = view_verified_solutions(&s, Stage::Interleaved, &opts()).unwrap();
    assert_eq!(out.solutions.len(), 8);
    for (i, a) in out.solutions.iter().enumerate() {
        for b in &out.solutions[i + 1..] {
            assert!(!instances_isomorphic(a, b));
        }
    }
}

#[test]
fn fd_refire_interleaving_finds_both() {
    let s = fixture("fd_refire");
    let q = s.query("Q").unwrap();
    let vv = find_certain_answers(&s, q, Method::ViewVerified, &opts()).unwrap();
    assert_eq!(vv.tuples, tuples(&[&["g"], &["h"]]));
    let gt = find_certain_answers(&s, q, Method::GenerateTest, &opts()).unwrap();
    assert_eq!(gt.tuples, vv.tuples);
}

#[test]
fn full_tgd_recheck_interleaving_finds_c() {
    let s = fixture("full_tgd_recheck");
    let q = s.query("Q").unwrap();
    let vv = find_certain_answers(&s, q, Method::ViewVerified, &opts()).unwrap();
    assert_eq!(vv.tuples, tuples(&[&["c"]]));
    let mv_first = certain_answers_staged(&s, q, Stage::MvFirst, &opts()).unwrap();
    assert!(mv_first.tuples.is_empty());
    assert!(mv_first.incomplete);
}

#[test]
fn fd_refire_sigma_first_result() {
    // Running the view dependencies to a fixpoint after Σ also binds the
    // null joined to S(g,c), so this staging still finds (h).
    let s = fixture("fd_refire");
    let q = s.query("Q").unwrap();
    let r = certain_answers_staged(&s, q, Stage::SigmaFirst, &opts()).unwrap();
    assert_eq!(r.tuples, tuples(&[&["g"], &["h"]]));
}

#[test]
fn invalid_setting_is_reported() {
    let s = fixture("invalid");
    assert!(!setting_is_valid(&s, &opts()).unwrap());
    let q = s.query("Q").unwrap();
    for m in [Method::ViewVerified, Method::GenerateTest] {
        let r = find_certain_answers(&s, q, m, &opts()).unwrap();
        assert!(!r.valid_setting && r.vacuous && r.tuples.is_empty(), "{m:?}");
    }
}

#[test]
fn cyclic_setting_is_rejected() {
    let s = fixture("cyclic");
    assert!(matches!(check_weak_acyclicity(&s.sigma), WeakAcyclicity::Cycle(_)));
    let q = s.query("Q").unwrap();
    assert!(find_certain_answers(&s, q, Method::ViewVerified, &opts()).is_err());
}

#[test]
fn union_containment_from_the_disjunctive_example() {
    let u = chasecert_core::UcqQuery {
        name: "Q1".into(),
        arity: 1,
        components: vec![
            rule("query Q1(c) :- P(c,c), R(c)."),
            rule("query Q1(X) :- P(X,Y), R(X), P(c,c), R(c)."),
            rule("query Q1(X) :- P(X,Y), X != Y, P(c,c), R(c)."),
        ],
    };
    assert!(ucq_contained_in_cq(&u, &rule("query Q2(X) :- P(X,Y), R(Z).")).unwrap());
    assert!(!ucq_contained_in_cq(&u, &rule("query Q2(X) :- P(X,Y), R(X).")).unwrap());
}
