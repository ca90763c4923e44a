//! Model constructors, the text format and its round trip.

use std::collections::BTreeSet;

use chasecert_core::model::{canonical_database, freshen_variables, make_rule, setting_constants};
use chasecert_core::{
    parse_instance, parse_rule, parse_setting, parse_ucq, Atom, DiagnosticKind, Error, Render, Sym, Term, UcqQuery,
};
use chasecert_testkit::{c, fixture, small_setting, v};
use proptest::prelude::*;

fn atom(p: &str, args: &[Term]) -> Atom {
    Atom::new(p, args.to_vec())
}

#[test]
fn make_rule_examples() {
    let q = make_rule(
        "Q",
        vec![v("X"), v("Z")],
        vec![atom("E", &[v("X"), v("Y"), v("Z")]), atom("O", &[v("X"), v("S")])],
        [],
    )
    .unwrap();
    assert_eq!(q.to_string(), "Q(X,Z) :- E(X,Y,Z), O(X,S)");

    let q = make_rule("Q", vec![v("X")], vec![atom("P", &[v("X"), v("Y")]); 2], []).unwrap();
    assert_eq!(q.body().len(), 1);

    let err = make_rule("Q", vec![v("W")], vec![atom("P", &[v("X"), v("Y")])], []).unwrap_err();
    assert_eq!(err, Error::UnsafeRule("W".into()));
}

#[test]
fn diseq_flags_on_construction() {
    let body = vec![atom("P", &[v("X"), v("Y")])];
    let q = make_rule("Q", vec![], body.clone(), [(v("X"), v("X"))]).unwrap();
    assert!(q.is_unsatisfiable());
    let q = make_rule("Q", vec![], body, [(c("a"), c("b"))]).unwrap();
    assert!(q.diseqs().is_empty() && !q.is_unsatisfiable());
}

#[test]
fn canonical_database_examples() {
    let q = parse_rule("query Q1(c,f) :- H(d), E(c,d,X), E(Y,d,f).").unwrap();
    let (i, m) = canonical_database(&q).unwrap();
    assert_eq!(
        i,
        parse_instance("fact H(d). fact E(c,d,c_1). fact E(c_2,d,f).").unwrap()
    );
    assert_eq!(m[&Sym::from("X")], c("c_1"));

    let q = parse_rule("query Q :- P(a,b).").unwrap();
    let (i, m) = canonical_database(&q).unwrap();
    assert_eq!(i, parse_instance("fact P(a,b).").unwrap());
    assert!(m.is_empty());

    let q = parse_rule("query Q(X) :- P(X,X,Y), X != Y.").unwrap();
    let (i, _) = canonical_database(&q).unwrap();
    assert_eq!(i, parse_instance("fact P(c_1,c_1,c_2).").unwrap());

    let q = parse_rule("query Q :- P(X,Y), X != X.").unwrap();
    assert!(matches!(canonical_database(&q), Err(Error::UnsatisfiableRule(_))));
}

#[test]
fn setting_constants_examples() {
    let consts: BTreeSet<Term> = ["c", "d", "f"].iter().map(|n| c(n)).collect();
    assert_eq!(setting_constants(&fixture("employees")), consts);
    let (s, d) = parse_setting("schema P/2. view V(X) :- P(X,Y).");
    assert!(d.is_empty());
    assert!(setting_constants(&s).is_empty());
    let (s, d) = parse_setting("schema P/2. view V(X) :- P(X,b). fact V(c).");
    assert!(d.is_empty());
    assert_eq!(setting_constants(&s), [c("b"), c("c")].into_iter().collect());
}

#[test]
fn freshen_examples() {
    let q = parse_rule("query Q(X) :- P(X,Y).").unwrap();
    let xy: BTreeSet<Sym> = ["X", "Y"].iter().map(|n| Sym::from(*n)).collect();
    let expected = "Q(?v_1) :- P(?v_1,?v_2)";
    assert_eq!(freshen_variables(&q, &xy).to_string(), expected);
    assert_eq!(freshen_variables(&q, &BTreeSet::new()).to_string(), expected);
    let q = parse_rule("query Q(a) :- P(a,Z).").unwrap();
    let z: BTreeSet<Sym> = [Sym::from("Z")].into_iter().collect();
    assert_eq!(freshen_variables(&q, &z).to_string(), "Q(a) :- P(a,?v_1)");
}

#[test]
fn parse_running_example_fragment() {
    let (s, d) =
        parse_setting("schema E/3 H/1 O/2. dep E(X,Y,Z), H(Y) -> exists S . O(X,S). view U(X) :- H(X). fact U(d).");
    assert!(d.is_empty(), "{d:?}");
    assert_eq!(s.sigma.len(), 1);
    assert_eq!(s.sigma[0].to_string(), "sigma_1: E(X,Y,Z), H(Y) -> exists S . O(X,S)");
    assert_eq!(s.mv.len(), 1);
}

#[test]
fn empty_text_parses_to_empty_setting() {
    let (s, d) = parse_setting("");
    assert!(d.is_empty());
    assert_eq!(s, Default::default());
}

#[test]
fn arity_mismatch_is_located() {
    let (_, d) = parse_setting("schema P/2.\nview V(X) :- P(X,Y,Z).");
    assert_eq!(d.len(), 1);
    assert!(matches!(
        d[0].kind,
        DiagnosticKind::ArityMismatch {
            expected: 2,
            found: 3,
            ..
        }
    ));
    assert_eq!(d[0].line, 2);
}

#[test]
fn constant_in_dependency_is_rejected() {
    let (_, d) = parse_setting("schema P/2 R/1. dep P(X,a) -> R(X).");
    assert!(d
        .iter()
        .any(|d| matches!(d.kind, DiagnosticKind::ConstantInDependency(_))));
}

#[test]
fn render_examples() {
    let i = parse_instance("fact E(g,d,f). fact E(c,d,f).").unwrap();
    assert_eq!(i.render(), "fact E(c,d,f).\nfact E(g,d,f).\n");
    assert_eq!(UcqQuery::trivial("Q", 0).render(), "query Q :- false.");
    let q = parse_rule("query Q(X) :- P(X,Y), X != Y.").unwrap();
    assert_eq!(q.render(), "query Q(X) :- P(X,Y), X != Y.");
}

#[test]
fn quoted_and_numeric_constants_round_trip() {
    let q = parse_rule(r#"query Q(X) :- P(X,"50 000"), R(X,42)."#).unwrap();
    assert_eq!(parse_rule(&q.render()).unwrap(), q);
}

#[test]
fn fixtures_round_trip() {
    for name in [
        "employees",
        "repeat_vars",
        "office_key",
        "late_view_step",
        "two_employees",
        "fd_refire",
        "forall_exists",
        "cyclic",
    ] {
        let s = fixture(name);
        let (back, d) = parse_setting(&s.render());
        assert!(d.is_empty(), "{name}: {d:?}");
        assert_eq!(back, s, "{name}");
    }
}

#[test]
fn ucq_round_trip() {
    let u = parse_ucq("query Q1(c) :- P(c,c), R(c).\nquery Q1(X) :- P(X,Y), X != Y.").unwrap();
    assert_eq!(u.components.len(), 2);
    assert_eq!(parse_ucq(&u.render()).unwrap(), u);
    let t = parse_ucq("query Q(X) :- false.").unwrap();
    assert!(t.is_trivial());
    assert_eq!(t.arity, 0);
}

fn term_strategy() -> impl Strategy<Value = Term> {
    prop_oneof![
        prop::sample::select(vec!["X", "Y", "Z", "W"]).prop_map(Term::var),
        prop::sample::select(vec!["a", "b"]).prop_map(Term::constant),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn make_rule_accepts_only_safe_rules(
        head in prop::collection::vec(term_strategy(), 0..3),
        body in prop::collection::vec(prop::collection::vec(term_strategy(), 2), 0..3),
        diseqs in prop::collection::vec((term_strategy(), term_strategy()), 0..2),
    ) {
        let body: Vec<Atom> = body.into_iter().map(|args| Atom::new("P", args)).collect();
        let body_vars: BTreeSet<Term> = body.iter().flat_map(|a| a.args.iter().cloned()).filter(Term::is_var).collect();
        let needed: Vec<&Term> = head.iter().chain(diseqs.iter().flat_map(|(a, b)| [a, b])).filter(|t| t.is_var()).collect();
        let safe = needed.iter().all(|t| body_vars.contains(*t));
        match make_rule("Q", head, body, diseqs) {
            Ok(q) => {
                prop_assert!(safe);
                for t in q.head().iter().chain(q.diseqs().iter().flat_map(|(a, b)| [a, b])) {
                    prop_assert!(!t.is_var() || body_vars.contains(t));
                }
            }
            Err(e) => {
                prop_assert!(!safe);
                prop_assert!(matches!(e, Error::UnsafeRule(_)), "{}", e);
            }
        }
    }

    #[test]
    fn parse_of_render_is_identity(s in small_setting()) {
        let text = s.render();
        let (back, d) = parse_setting(&text);
        prop_assert!(d.is_empty(), "{:?}\n{}", d, text);
        prop_assert_eq!(back, s);
    }

    #[test]
    fn parsing_is_total(text in "[a-zA-Z0-9_ ,.:()=!|#\"\n>-]{0,80}") {
        let (_, d) = parse_setting(&text);
        for diag in d {
            prop_assert!(diag.line >= 1 && diag.col >= 1);
            prop_assert!(diag.offset <= text.len());
        }
        let _ = parse_rule(&text);
        let _ = parse_ucq(&text);
        let _ = parse_instance(&text);
    }

    #[test]
    fn keyword_soup_never_panics(words in prop::collection::vec(
        prop::sample::select(vec![
            "schema", "P/2", "dep", "view", "fact", "query", "exists", "X", "Y", "a", "_n1",
            "(", ")", ",", ".", ":-", "->", "=", "!=", "|", "false", "true", "Q", ":",
        ]),
        0..30,
    )) {
        let text = words.join(" ");
        let _ = parse_setting(&text);
        let _ = parse_rule(&text);
    }
}
