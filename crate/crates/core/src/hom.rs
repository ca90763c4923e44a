//! Homomorphisms, valuations, query evaluation and unconditional containment.
//!
//! The search backtracks over source atoms in order and tries target atoms
//! of the same predicate in stored order, so enumeration is deterministic.
//! Source constants are rigid; source variables and nulls are mapped.
//! Target terms are never rewritten, even when they are variables.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::ControlFlow;

use crate::error::{Error, Result};
use crate::model::{Atom, Instance, Rule, Term, UcqQuery};

/// Assignment of source terms to target terms. Constants are implicit.
pub type Mapping = BTreeMap<Term, Term>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    All,
    First,
}

/// Image of `t` under `m`; constants and unmapped terms map to themselves.
pub fn apply(m: &Mapping, t: &Term) -> Term {
    m.get(t).cloned().unwrap_or_else(|| t.clone())
}

pub fn apply_atom(m: &Mapping, a: &Atom) -> Atom {
    a.map_terms(|t| apply(m, t))
}

struct Search<'a> {
    src: &'a [Atom],
    candidates: Vec<Vec<&'a Atom>>,
    binding: HashMap<Term, Term>,
}

impl<'a> Search<'a> {
    fn new(src: &'a [Atom], dst: &'a [Atom], seed: &Mapping) -> Search<'a> {
        let mut by_pred: HashMap<(&str, usize), Vec<&Atom>> = HashMap::new();
        for a in dst {
            by_pred.entry((&a.pred, a.arity())).or_default().push(a);
        }
        let candidates = src
            .iter()
            .map(|s| {
                by_pred
                    .get(&(&*s.pred, s.arity()))
                    .map(|c| {
                        c.iter()
                            .copied()
                            .filter(|d| s.args.iter().zip(&d.args).all(|(x, y)| !x.is_const() || x == y))
                            .collect()
                    })
                    .unwrap_or_default()
            })
            .collect();
        Search {
            src,
            candidates,
            binding: seed.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
        }
    }

    fn run(&mut self, i: usize, f: &mut dyn FnMut(&HashMap<Term, Term>) -> ControlFlow<()>) -> ControlFlow<()> {
        if i == self.src.len() {
            return f(&self.binding);
        }
        let srcs = self.src;
        let src = &srcs[i];
        for ci in 0..self.candidates[i].len() {
            let dst = self.candidates[i][ci];
            let mut added: Vec<Term> = Vec::new();
            let mut ok = true;
            for (s, d) in src.args.iter().zip(&dst.args) {
                if s.is_const() {
                    continue;
                }
                match self.binding.get(s) {
                    Some(img) if img == d => {}
                    Some(_) => {
                        ok = false;
                        break;
                    }
                    None => {
                        self.binding.insert(s.clone(), d.clone());
                        added.push(s.clone());
                    }
                }
            }
            let flow = if ok {
                self.run(i + 1, f)
            } else {
                ControlFlow::Continue(())
            };
            for s in added {
                self.binding.remove(&s);
            }
            flow?;
        }
        ControlFlow::Continue(())
    }
}

/// Calls `f` on every homomorphism from `src` into `dst` extending `seed`,
/// stopping early when `f` breaks.
pub fn for_each_homomorphism(
    src: &[Atom],
    dst: &[Atom],
    seed: &Mapping,
    mut f: impl FnMut(&Mapping) -> ControlFlow<()>,
) {
    let mut search = Search::new(src, dst, seed);
    let _ = search.run(0, &mut |b| f(&b.iter().map(|(k, v)| (k.clone(), v.clone())).collect()));
}

/// All homomorphisms (or the first) from `src` into `dst` extending `seed`.
pub fn find_homomorphisms(src: &[Atom], dst: &[Atom], mode: Mode, seed: Option<&Mapping>) -> Vec<Mapping> {
    let empty = Mapping::new();
    let mut out = Vec::new();
    for_each_homomorphism(src, dst, seed.unwrap_or(&empty), |m| {
        out.push(m.clone());
        if mode == Mode::First {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    });
    out
}

/// Valuations of `q`'s body into `facts` that respect its disequalities.
pub fn for_each_valuation(q: &Rule, facts: &[Atom], mut f: impl FnMut(&Mapping) -> ControlFlow<()>) {
    if q.is_unsatisfiable() {
        return;
    }
    for_each_homomorphism(q.body(), facts, &Mapping::new(), |m| {
        if q.diseqs().iter().all(|(a, b)| apply(m, a) != apply(m, b)) {
            f(m)
        } else {
            ControlFlow::Continue(())
        }
    });
}

/// `q(I)` under valuation semantics.
pub fn evaluate_query(q: &Rule, i: &Instance) -> BTreeSet<Vec<Term>> {
    let facts: Vec<Atom> = i.iter().cloned().collect();
    let mut out = BTreeSet::new();
    for_each_valuation(q, &facts, |m| {
        out.insert(q.head().iter().map(|t| apply(m, t)).collect());
        ControlFlow::Continue(())
    });
    out
}

/// Union of the component answers; the trivial query answers nothing.
pub fn evaluate_ucq(u: &UcqQuery, i: &Instance) -> BTreeSet<Vec<Term>> {
    u.components.iter().flat_map(|q| evaluate_query(q, i)).collect()
}

/// Answers of `q` on `i` that contain no nulls.
pub fn answers_without_nulls(q: &Rule, i: &Instance) -> BTreeSet<Vec<Term>> {
    evaluate_query(q, i)
        .into_iter()
        .filter(|t| t.iter().all(Term::is_const))
        .collect()
}

fn head_seed(container: &Rule, containee: &Rule) -> Option<Mapping> {
    if container.arity() != containee.arity() {
        return None;
    }
    let mut seed = Mapping::new();
    for (a, b) in container.head().iter().zip(containee.head()) {
        if a.is_const() {
            if a != b {
                return None;
            }
        } else if let Some(prev) = seed.insert(a.clone(), b.clone()) {
            if &prev != b {
                return None;
            }
        }
    }
    Some(seed)
}

/// A homomorphism from `container`'s body to `containee`'s body sending
/// head to head. Disequalities of the containee are ignored, which is exact
/// when the container has none.
pub fn containment_mapping(container: &Rule, containee: &Rule) -> Option<Mapping> {
    let seed = head_seed(container, containee)?;
    find_homomorphisms(container.body(), containee.body(), Mode::First, Some(&seed)).pop()
}

/// Per-component containment mappings from `q2`; `None` marks a component
/// with no mapping. Unsatisfiable components are skipped.
pub fn ucq_containment_evidence(u: &UcqQuery, q2: &Rule) -> Result<Vec<(usize, Option<Mapping>)>> {
    if !q2.is_conjunctive() {
        return Err(Error::NotConjunctive(q2.name().to_string()));
    }
    if u.arity != q2.arity() {
        return Err(Error::ArityMismatch {
            pred: q2.name().to_string(),
            expected: u.arity,
            found: q2.arity(),
        });
    }
    Ok(u.components
        .iter()
        .enumerate()
        .filter(|(_, q)| !q.is_unsatisfiable())
        .map(|(i, q)| (i, containment_mapping(q2, q)))
        .collect())
}

/// Whether every satisfiable component of `u` is contained in the CQ `q2`.
pub fn ucq_contained_in_cq(u: &UcqQuery, q2: &Rule) -> Result<bool> {
    Ok(ucq_containment_evidence(u, q2)?.iter().all(|(_, m)| m.is_some()))
}

/// Whether two rules are equal up to a bijective renaming of variables.
pub fn rules_isomorphic(a: &Rule, b: &Rule) -> bool {
    if a.body().len() != b.body().len() || a.diseqs().len() != b.diseqs().len() {
        return false;
    }
    if a.is_unsatisfiable() != b.is_unsatisfiable() {
        return false;
    }
    let Some(seed) = head_seed(a, b) else {
        return false;
    };
    let target: BTreeSet<&Atom> = b.body().iter().collect();
    let mut found = false;
    for_each_homomorphism(a.body(), b.body(), &seed, |m| {
        if is_renaming(m) {
            let image: BTreeSet<Atom> = a.body().iter().map(|x| apply_atom(m, x)).collect();
            let diseqs: BTreeSet<(Term, Term)> = a
                .diseqs()
                .iter()
                .map(|(x, y)| crate::model::diseq_pair(apply(m, x), apply(m, y)))
                .collect();
            if image.iter().collect::<BTreeSet<_>>() == target && &diseqs == b.diseqs() {
                found = true;
                return ControlFlow::Break(());
            }
        }
        ControlFlow::Continue(())
    });
    found
}

/// Whether two instances are equal up to a bijective renaming of nulls.
pub fn instances_isomorphic(a: &Instance, b: &Instance) -> bool {
    if a.len() != b.len() || a.nulls().len() != b.nulls().len() {
        return false;
    }
    let src: Vec<Atom> = a.iter().cloned().collect();
    let dst: Vec<Atom> = b.iter().cloned().collect();
    let mut found = false;
    for_each_homomorphism(&src, &dst, &Mapping::new(), |m| {
        if is_renaming(m) {
            let image: Instance = src.iter().map(|x| apply_atom(m, x)).collect();
            if &image == b {
                found = true;
                return ControlFlow::Break(());
            }
        }
        ControlFlow::Continue(())
    });
    found
}

fn is_renaming(m: &Mapping) -> bool {
    let mut seen = BTreeSet::new();
    m.iter()
        .all(|(k, v)| v.is_var() == k.is_var() && v.is_null() == k.is_null() && seen.insert(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_rule;

    fn v(n: &str) -> Term {
        Term::var(n)
    }
    fn c(n: &str) -> Term {
        Term::constant(n)
    }

    #[test]
    fn repeated_variable_needs_equal_targets() {
        let src = [Atom::new("P", vec![v("X"), v("X")])];
        let dst = [Atom::new("P", vec![c("a"), c("b")])];
        assert!(find_homomorphisms(&src, &dst, Mode::All, None).is_empty());
    }

    #[test]
    fn diseq_blocks_valuation() {
        let q = make_rule(
            "Q",
            vec![v("X")],
            vec![Atom::new("P", vec![v("X"), v("Y")])],
            [(v("X"), v("Y"))],
        )
        .unwrap();
        let i = Instance::from_facts([Atom::new("P", vec![c("a"), c("a")])]);
        assert!(evaluate_query(&q, &i).is_empty());
    }

    #[test]
    fn isomorphism_respects_head() {
        let a = make_rule("Q", vec![v("X")], vec![Atom::new("P", vec![v("X"), v("Y")])], []).unwrap();
        let b = make_rule("Q", vec![v("B")], vec![Atom::new("P", vec![v("B"), v("A")])], []).unwrap();
        let c2 = make_rule("Q", vec![v("A")], vec![Atom::new("P", vec![v("B"), v("A")])], []).unwrap();
        assert!(rules_isomorphic(&a, &b));
        assert!(!rules_isomorphic(&a, &c2));
    }
}
