//! Shared test support: fixture loading, random small settings, and
//! independent checks used as oracles by the test suites.

use std::collections::BTreeSet;
use std::path::PathBuf;

use chasecert_core::chase::check_weak_acyclicity;
use chasecert_core::chase::WeakAcyclicity;
use chasecert_core::hom::apply_atom;
use chasecert_core::model::{make_rule, setting_constants};
use chasecert_core::oracle::{satisfies_all, view_image};
use chasecert_core::{parse_setting, Atom, Branch, Dependency, Instance, Rule, Schema, Setting, Sym, Term};
use proptest::prelude::*;

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture_path(name: &str) -> PathBuf {
    fixtures_dir().join(format!("{name}.mvs"))
}

pub fn fixture_text(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("fixture {name}: {e}"))
}

/// Parses a fixture, panicking on any diagnostic.
pub fn fixture(name: &str) -> Setting {
    let (s, diags) = parse_setting(&fixture_text(name));
    assert!(diags.is_empty(), "fixture {name}: {diags:?}");
    s
}

pub fn c(name: &str) -> Term {
    Term::constant(name)
}

pub fn v(name: &str) -> Term {
    Term::var(name)
}

pub fn tuple(names: &[&str]) -> Vec<Term> {
    names.iter().map(|n| c(n)).collect()
}

pub fn tuples(rows: &[&[&str]]) -> BTreeSet<Vec<Term>> {
    rows.iter().map(|r| tuple(r)).collect()
}

/// Every assignment of the rule's variables into `domain`, as
/// `(valuation image of the body, head image)`. Disequalities are respected.
pub fn valuation_images(q: &Rule, domain: &[Term]) -> Vec<(Instance, Vec<Term>)> {
    let vars: Vec<Term> = q.variables().into_iter().map(Term::Var).collect();
    let mut out = Vec::new();
    if q.is_unsatisfiable() {
        return out;
    }
    let mut idx = vec![0usize; vars.len()];
    loop {
        let m: chasecert_core::hom::Mapping = vars
            .iter()
            .cloned()
            .zip(idx.iter().map(|&i| domain[i].clone()))
            .collect();
        let ok = q
            .diseqs()
            .iter()
            .all(|(a, b)| chasecert_core::hom::apply(&m, a) != chasecert_core::hom::apply(&m, b));
        if ok {
            let img: Instance = q.body().iter().map(|a| apply_atom(&m, a)).collect();
            let head = q.head().iter().map(|t| chasecert_core::hom::apply(&m, t)).collect();
            out.push((img, head));
        }
        let mut k = 0;
        loop {
            if k == idx.len() {
                return out;
            }
            idx[k] += 1;
            if idx[k] < domain.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Ground instance satisfying Σ whose view image is exactly MV.
pub fn is_sigma_valid(s: &Setting, i: &Instance) -> bool {
    i.is_ground() && satisfies_all(i, &s.sigma) && view_image(s, i) == s.mv
}

/// Setting constants plus `extra` fresh ones named `z_1, z_2, …`.
pub fn test_domain(s: &Setting, extra: usize) -> Vec<Term> {
    let mut d: Vec<Term> = setting_constants(s).into_iter().collect();
    d.extend((1..=extra).map(|i| c(&format!("z_{i}"))));
    d
}

/// Every valuation image of a leaf, bounded to keep the search small.
pub fn leaf_images(s: &Setting, leaf: &Rule) -> Option<Vec<Instance>> {
    let n = leaf.variables().len() as u32;
    for extra in [2, 1, 0] {
        let domain = test_domain(s, extra);
        if domain.is_empty() && n > 0 {
            return None;
        }
        if (domain.len() as u64).pow(n) <= 20_000 {
            return Some(valuation_images(leaf, &domain).into_iter().map(|(i, _)| i).collect());
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Random small settings

const RELS: [&str; 2] = ["P", "R"];
const VIEWS: [&str; 2] = ["V", "W"];
const CONSTS: [&str; 3] = ["a", "b", "c"];
const VARS: [&str; 3] = ["X", "Y", "Z"];

fn term_from(code: u8, allow_const: bool) -> Term {
    let code = code as usize % if allow_const { 6 } else { 3 };
    if code < 3 {
        v(VARS[code])
    } else {
        c(CONSTS[code - 3])
    }
}

fn atom_from(schema: &[(String, usize)], rel: usize, codes: &[u8], allow_const: bool) -> Atom {
    let (name, arity) = &schema[rel % schema.len()];
    Atom::new(name, (0..*arity).map(|k| term_from(codes[k], allow_const)).collect())
}

/// Atom codes: relation index and two term codes.
pub type AtomCodes = Vec<(usize, [u8; 2])>;

/// Raw material for one setting, turned into a valid setting by
/// [`build_setting`].
#[derive(Clone, Debug)]
pub struct SettingSeed {
    pub arities: Vec<usize>,
    pub views: Vec<(AtomCodes, [u8; 2])>,
    pub mv: AtomCodes,
    pub dep: Option<(u8, AtomCodes, (usize, [u8; 2]))>,
    pub query: (AtomCodes, [u8; 2]),
}

fn atoms_strategy(max: usize) -> impl Strategy<Value = AtomCodes> {
    prop::collection::vec((0usize..2, any::<[u8; 2]>()), 1..=max)
}

pub fn setting_seed() -> impl Strategy<Value = SettingSeed> {
    (
        prop::collection::vec(1usize..=2, 1..=2),
        prop::collection::vec((atoms_strategy(2), any::<[u8; 2]>()), 1..=2),
        prop::collection::vec((0usize..2, any::<[u8; 2]>()), 0..=2),
        prop::option::of((any::<u8>(), atoms_strategy(2), (0usize..2, any::<[u8; 2]>()))),
        (atoms_strategy(2), any::<[u8; 2]>()),
    )
        .prop_map(|(arities, views, mv, dep, query)| SettingSeed {
            arities,
            views,
            mv,
            dep,
            query,
        })
}

fn head_from(body: &[Atom], codes: [u8; 2], arity: usize) -> Vec<Term> {
    let vars: Vec<Term> = {
        let mut seen = Vec::new();
        for a in body {
            for t in &a.args {
                if t.is_var() && !seen.contains(t) {
                    seen.push(t.clone());
                }
            }
        }
        seen
    };
    if vars.is_empty() {
        return Vec::new();
    }
    (0..arity.min(2))
        .map(|k| vars[codes[k] as usize % vars.len()].clone())
        .collect()
}

/// Builds a setting from a seed: at most two base relations of arity ≤ 2,
/// at most two views, at most two MV facts over three constants, at most
/// one constant-free weakly acyclic dependency and one query.
pub fn build_setting(seed: &SettingSeed) -> Setting {
    let schema_list: Vec<(String, usize)> = seed
        .arities
        .iter()
        .enumerate()
        .map(|(i, &n)| (RELS[i].to_string(), n))
        .collect();
    let mut schema = Schema::new();
    for (n, a) in &schema_list {
        schema.add(n, *a);
    }
    let mut s = Setting {
        schema,
        ..Setting::default()
    };
    for (k, (body, hcodes)) in seed.views.iter().enumerate() {
        let atoms: Vec<Atom> = body
            .iter()
            .map(|(r, cs)| atom_from(&schema_list, *r, cs, true))
            .collect();
        let arity = (hcodes[0] % 3) as usize;
        let head = head_from(&atoms, *hcodes, arity);
        let rule = make_rule(VIEWS[k], head, atoms, []).expect("generated view is safe");
        s.views.insert(Sym::from(VIEWS[k]), rule);
    }
    for (k, codes) in &seed.mv {
        let view = VIEWS[k % s.views.len()];
        let arity = s.views[view].arity();
        let args = (0..arity).map(|i| c(CONSTS[codes[i] as usize % 3])).collect();
        s.mv.insert(Atom::new(view, args));
    }
    if let Some((kind, ante, cons)) = &seed.dep {
        let ante: Vec<Atom> = ante
            .iter()
            .map(|(r, cs)| atom_from(&schema_list, *r, cs, false))
            .collect();
        let ante_vars: BTreeSet<Term> = ante.iter().flat_map(|a| a.args.iter().cloned()).collect();
        let dep = if kind % 2 == 0 {
            let vars: Vec<Term> = ante_vars.iter().cloned().collect();
            let x = vars[(kind / 2) as usize % vars.len()].clone();
            let y = vars[(kind / 4) as usize % vars.len()].clone();
            Dependency::new("sigma_1", ante, vec![Branch::Equalities(vec![(x, y)])])
        } else {
            let head = atom_from(&schema_list, cons.0, &cons.1, false);
            let ex: Vec<Sym> = head
                .args
                .iter()
                .filter(|t| !ante_vars.contains(t))
                .filter_map(|t| t.var_name().cloned())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            Dependency::new(
                "sigma_1",
                ante,
                vec![Branch::Existential {
                    vars: ex.into_iter().collect(),
                    atoms: vec![head],
                }],
            )
        };
        if let Ok(d) = dep {
            let trivial_egd = matches!(&d.branches[0], Branch::Equalities(p) if p.iter().all(|(x, y)| x == y));
            if !trivial_egd && check_weak_acyclicity(std::slice::from_ref(&d)) == WeakAcyclicity::WeaklyAcyclic {
                s.sigma.push(d);
            }
        }
    }
    let (body, hcodes) = &seed.query;
    let atoms: Vec<Atom> = body
        .iter()
        .map(|(r, cs)| atom_from(&schema_list, *r, cs, false))
        .collect();
    let head = head_from(&atoms, *hcodes, (hcodes[0] % 3) as usize);
    let q = make_rule("Q", head, atoms, []).expect("generated query is safe");
    s.queries.insert(Sym::from("Q"), q);
    s
}

pub fn small_setting() -> impl Strategy<Value = Setting> {
    setting_seed().prop_map(|seed| build_setting(&seed))
}

/// A second conjunctive query over the setting's schema.
pub fn query_over(s: &Setting, body: &[(usize, [u8; 2])], hcodes: [u8; 2], name: &str) -> Rule {
    let schema_list: Vec<(String, usize)> = s.schema.iter().map(|(n, a)| (n.to_string(), a)).collect();
    let atoms: Vec<Atom> = body
        .iter()
        .map(|(r, cs)| atom_from(&schema_list, *r, cs, true))
        .collect();
    let head = head_from(&atoms, hcodes, (hcodes[0] % 3) as usize);
    make_rule(name, head, atoms, []).expect("generated query is safe")
}

pub fn query_parts() -> impl Strategy<Value = (AtomCodes, [u8; 2])> {
    (atoms_strategy(2), any::<[u8; 2]>())
}
