//! Decision procedures against the brute-force oracle.

use std::collections::BTreeSet;

use chasecert_core::decide::{
    conditional_containment, find_certain_answers, is_certain_answer, mv_expansion, setting_is_valid, Method, Options,
};
use chasecert_core::hom::evaluate_query;
use chasecert_core::oracle::{oracle_certain_answers, OracleConfig};
use chasecert_core::{parse_rule, parse_setting, Atom, Instance, Render, Setting, Term};
use chasecert_testkit::{
    c, fixture, fixture_text, is_sigma_valid, query_over, query_parts, small_setting, test_domain, tuple, tuples,
};
use proptest::prelude::*;

fn opts() -> Options {
    Options::default()
}

fn small_oracle() -> OracleConfig {
    OracleConfig {
        extra_constants: 1,
        max_facts_per_relation: 2,
        instance_budget: 20_000,
    }
}

#[test]
fn mv_expansion_examples() {
    let exp = mv_expansion(&fixture("repeat_vars"));
    assert_eq!(exp.c_exp, parse_rule("query Q :- P(c,c).").unwrap().body());
    let (s, _) = parse_setting("schema P/2. view V(X) :- P(X,Y).");
    let exp = mv_expansion(&s);
    assert!(exp.c_mv.is_empty() && exp.c_exp.is_empty());
}

#[test]
fn oracle_examples() {
    let s = fixture("employees");
    let cfg = OracleConfig {
        extra_constants: 2,
        ..OracleConfig::default()
    };
    let r = oracle_certain_answers(&s, s.query("Q").unwrap(), &cfg);
    assert_eq!(r.tuples, tuples(&[&["c", "f"]]));
    assert!(r.instances_found > 0 && !r.truncated && !r.vacuous);

    let s = fixture("two_employees");
    let cfg = OracleConfig {
        extra_constants: 0,
        ..OracleConfig::default()
    };
    let r = oracle_certain_answers(&s, s.query("Q").unwrap(), &cfg);
    assert_eq!(r.tuples, tuples(&[&["c", "f"], &["g", "f"]]));

    let s = fixture("invalid");
    let r = oracle_certain_answers(&s, s.query("Q").unwrap(), &OracleConfig::default());
    assert_eq!(r.instances_found, 0);
    assert!(r.vacuous);
    assert_eq!(r.tuples, tuples(&[&["c"]]));
}

#[test]
fn oracle_truncation_is_flagged() {
    let s = fixture("employees");
    let cfg = OracleConfig {
        extra_constants: 2,
        max_facts_per_relation: 3,
        instance_budget: 5,
    };
    let r = oracle_certain_answers(&s, s.query("Q").unwrap(), &cfg);
    assert!(r.truncated);
    assert_eq!(r.instances_examined, 5);
}

#[test]
fn oracle_over_approximation_shrinks_with_more_constants() {
    // Over the single constant a, the only instance is {P(a,a)}.
    let (s, d) = parse_setting("schema P/2. view V(X) :- P(X,Y). fact V(a). query Q :- P(X,X).");
    assert!(d.is_empty());
    let q = s.query("Q").unwrap();
    let narrow = oracle_certain_answers(
        &s,
        q,
        &OracleConfig {
            extra_constants: 0,
            ..OracleConfig::default()
        },
    );
    let wide = oracle_certain_answers(
        &s,
        q,
        &OracleConfig {
            extra_constants: 1,
            ..OracleConfig::default()
        },
    );
    assert_eq!(narrow.tuples, [Vec::new()].into_iter().collect());
    assert!(wide.tuples.is_empty());
    let vv = find_certain_answers(&s, q, Method::ViewVerified, &opts()).unwrap();
    assert_eq!(vv.tuples, wide.tuples);
}

#[test]
fn decision_examples() {
    let s = fixture("employees");
    let q = s.query("Q").unwrap();
    assert!(is_certain_answer(&s, q, &tuple(&["c", "f"]), &opts()).unwrap());
    assert!(!is_certain_answer(&s, q, &tuple(&["d", "d"]), &opts()).unwrap());
    assert!(!is_certain_answer(&s, q, &tuple(&["c", "zz"]), &opts()).unwrap());
    assert!(setting_is_valid(&s, &opts()).unwrap());
    assert!(setting_is_valid(&fixture("two_employees"), &opts()).unwrap());
    assert!(!setting_is_valid(&fixture("invalid"), &opts()).unwrap());
}

#[test]
fn owa_is_sound_on_fixtures() {
    for name in [
        "employees",
        "null_answers",
        "two_employees",
        "fd_refire",
        "full_tgd_recheck",
        "binary_choices",
    ] {
        let s = fixture(name);
        for q in s.queries.values().filter(|q| q.is_conjunctive()) {
            let vv = find_certain_answers(&s, q, Method::ViewVerified, &opts()).unwrap();
            let gt = find_certain_answers(&s, q, Method::GenerateTest, &opts()).unwrap();
            let owa = find_certain_answers(&s, q, Method::OwaBaseline, &opts()).unwrap();
            assert_eq!(vv.tuples, gt.tuples, "{name}/{}", q.name());
            assert!(owa.tuples.is_subset(&vv.tuples), "{name}/{}", q.name());
        }
    }
}

#[test]
fn disequality_query_is_rejected_for_certain_answers() {
    let s = fixture("repeat_vars");
    let q = parse_rule("query Q(X) :- P(X,Y), X != Y.").unwrap();
    assert!(find_certain_answers(&s, &q, Method::ViewVerified, &opts()).is_err());
}

/// The ∀∃ truth value of the encoded formula, read off the clause facts.
fn forall_exists(s: &Setting) -> bool {
    let clause = |x1: u8, x2: u8, y: u8, i: u8| {
        let args = [x1, x2, y, i].iter().map(|b| c(&b.to_string())).collect::<Vec<Term>>();
        s.mv.iter().any(|f| f.pred.as_ref() == "V" && f.args == args)
    };
    (0..2u8).all(|y1| {
        (0..2u8).all(|y2| (0..2u8).any(|x1| (0..2u8).any(|x2| clause(x1, x2, y1, 1) && clause(x1, x2, y2, 2))))
    })
}

fn with_clause(text: &str, keep: impl Fn(&str) -> bool) -> Setting {
    let filtered: String = text
        .lines()
        .filter(|l| !l.starts_with("fact V(") || keep(l))
        .map(|l| format!("{l}\n"))
        .collect();
    let (s, d) = parse_setting(&filtered);
    assert!(d.is_empty(), "{d:?}");
    s
}

#[test]
fn forall_exists_encoding_matches_brute_force() {
    let text = fixture_text("forall_exists");
    let variants = [
        with_clause(&text, |_| true),
        // Clause 1 reduced to Y1 alone: false when Y1 = 0.
        with_clause(&text, |l| !l.ends_with(",1).") || l.contains(",1,1)")),
        // Clause 2 reduced to !Y2 alone: false when Y2 = 1.
        with_clause(&text, |l| !l.ends_with(",2).") || l.contains(",0,2)")),
    ];
    let expected = [true, false, false];
    for (s, want) in variants.iter().zip(expected) {
        assert_eq!(forall_exists(s), want, "{}", s.render());
        let q = s.query("Q").unwrap();
        let vv = find_certain_answers(s, q, Method::ViewVerified, &opts()).unwrap();
        assert!(vv.valid_setting);
        assert_eq!(vv.tuples.contains(&Vec::new()), want);
        assert_eq!(is_certain_answer(s, q, &[], &opts()).unwrap(), want);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn view_verified_is_within_oracle(s in small_setting()) {
        let q = s.query("Q").unwrap();
        let vv = find_certain_answers(&s, q, Method::ViewVerified, &opts()).unwrap();
        let oracle = oracle_certain_answers(&s, q, &small_oracle());
        prop_assert!(vv.tuples.is_subset(&oracle.tuples), "vv {:?} oracle {:?}", vv.tuples, oracle.tuples);
        if oracle.instances_found > 0 {
            prop_assert!(vv.valid_setting);
        }
    }

    #[test]
    fn view_verified_equals_generate_test(s in small_setting()) {
        let q = s.query("Q").unwrap();
        let vv = find_certain_answers(&s, q, Method::ViewVerified, &opts()).unwrap();
        let gt = find_certain_answers(&s, q, Method::GenerateTest, &opts()).unwrap();
        prop_assert_eq!(&vv.tuples, &gt.tuples);
        prop_assert_eq!(vv.valid_setting, gt.valid_setting);
        let owa = find_certain_answers(&s, q, Method::OwaBaseline, &opts()).unwrap();
        if vv.valid_setting {
            prop_assert!(owa.tuples.is_subset(&vv.tuples));
        }
    }

    #[test]
    fn certain_tuples_hold_on_every_enumerated_instance(s in small_setting()) {
        let q = s.query("Q").unwrap();
        let vv = find_certain_answers(&s, q, Method::ViewVerified, &opts()).unwrap();
        let oracle = oracle_certain_answers(&s, q, &small_oracle());
        for t in &vv.tuples {
            prop_assert!(t.iter().all(|x| x.is_const()));
            prop_assert!(oracle.tuples.contains(t));
        }
    }

    #[test]
    fn containment_is_reflexive_and_transitive(
        s in small_setting(),
        (b2, h2) in query_parts(),
        (b3, h3) in query_parts(),
    ) {
        let q1 = s.query("Q").unwrap().clone();
        prop_assert!(conditional_containment(&s, &q1, &q1, &opts()).unwrap().holds);
        let q2 = query_over(&s, &b2, h2, "Q");
        let q3 = query_over(&s, &b3, h3, "Q");
        let arities: BTreeSet<usize> = [q1.arity(), q2.arity(), q3.arity()].into_iter().collect();
        prop_assume!(arities.len() == 1);
        let holds = |a, b| conditional_containment(&s, a, b, &opts()).unwrap().holds;
        if holds(&q1, &q2) && holds(&q2, &q3) {
            prop_assert!(holds(&q1, &q3));
        }
    }

    #[test]
    fn contained_queries_agree_on_enumerated_instances(
        s in small_setting(),
        (b2, h2) in query_parts(),
    ) {
        let q1 = s.query("Q").unwrap().clone();
        let q2 = query_over(&s, &b2, h2, "Q");
        prop_assume!(q1.arity() == q2.arity());
        if conditional_containment(&s, &q1, &q2, &opts()).unwrap().holds {
            let domain = test_domain(&s, 1);
            for i in instances_up_to(&s, &domain, 3) {
                prop_assert!(evaluate_query(&q1, &i).is_subset(&evaluate_query(&q2, &i)));
            }
        }
    }
}

/// Σ-valid instances of at most `max` facts over `domain`.
fn instances_up_to(s: &Setting, domain: &[Term], max: usize) -> Vec<Instance> {
    let mut facts = Vec::new();
    for (p, n) in s.schema.iter() {
        let mut rows: Vec<Vec<Term>> = vec![Vec::new()];
        for _ in 0..n {
            rows = rows
                .into_iter()
                .flat_map(|r| domain.iter().map(move |t| [r.clone(), vec![t.clone()]].concat()))
                .collect();
        }
        facts.extend(rows.into_iter().map(|r| Atom::new(p, r)));
    }
    let mut out = Vec::new();
    let mut pick = Vec::new();
    fn go(s: &Setting, facts: &[Atom], from: usize, max: usize, pick: &mut Vec<Atom>, out: &mut Vec<Instance>) {
        let i = Instance::from_facts(pick.iter().cloned());
        if is_sigma_valid(s, &i) {
            out.push(i);
        }
        if pick.len() == max {
            return;
        }
        for k in from..facts.len() {
            pick.push(facts[k].clone());
            go(s, facts, k + 1, max, pick, out);
            pick.pop();
        }
    }
    go(s, &facts, 0, max, &mut pick, &mut out);
    out
}
