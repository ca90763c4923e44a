//! Brute-force certain answers over a bounded domain.
//!
//! Candidate instances use the setting constants plus a few fresh ones.
//! They are enumerated by total size, then by relation in schema order, then
//! by tuple in lexicographic order. Views are monotone, so a partial
//! instance whose view image already leaves MV is pruned. Dependencies are
//! checked directly by homomorphism extension and never by chasing.

use std::collections::BTreeSet;
use std::ops::ControlFlow;

use crate::hom::{apply, evaluate_query, find_homomorphisms, for_each_homomorphism, Mapping, Mode};
use crate::model::{setting_constants, Atom, Branch, Dependency, Instance, Setting, Term};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleConfig {
    /// Fresh constants added to the setting constants.
    pub extra_constants: usize,
    pub max_facts_per_relation: usize,
    /// Maximum number of complete candidate instances checked.
    pub instance_budget: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            extra_constants: 1,
            max_facts_per_relation: 3,
            instance_budget: 1_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleResult {
    /// Intersection of the query answers, restricted to setting constants.
    /// With no valid instance: every tuple over the setting constants.
    pub tuples: BTreeSet<Vec<Term>>,
    pub instances_found: usize,
    pub instances_examined: usize,
    pub truncated: bool,
    pub vacuous: bool,
}

/// Whether `i` satisfies `d`.
pub fn satisfies(i: &Instance, d: &Dependency) -> bool {
    let facts: Vec<Atom> = i.iter().cloned().collect();
    let mut ok = true;
    for_each_homomorphism(&d.antecedent, &facts, &Mapping::new(), |h| {
        let holds = d.branches.iter().any(|b| match b {
            Branch::Equalities(pairs) => pairs.iter().all(|(x, y)| apply(h, x) == apply(h, y)),
            Branch::Existential { atoms, .. } => !find_homomorphisms(atoms, &facts, Mode::First, Some(h)).is_empty(),
            Branch::Diseq(x, y) => apply(h, x) != apply(h, y),
            Branch::False => false,
        });
        if holds {
            ControlFlow::Continue(())
        } else {
            ok = false;
            ControlFlow::Break(())
        }
    });
    ok
}

pub fn satisfies_all(i: &Instance, deps: &[Dependency]) -> bool {
    deps.iter().all(|d| satisfies(i, d))
}

/// V(I): the view answers over `i` as view facts.
pub fn view_image(s: &Setting, i: &Instance) -> Instance {
    let mut out = Instance::new();
    for (name, view) in &s.views {
        for t in evaluate_query(view, i) {
            out.insert(Atom {
                pred: name.clone(),
                args: t,
            });
        }
    }
    out
}

/// A ground instance satisfying Σ whose view image is exactly MV.
pub fn is_sigma_valid(s: &Setting, i: &Instance) -> bool {
    i.is_ground() && satisfies_all(i, &s.sigma) && view_image(s, i) == s.mv
}

/// Replaces each null by a distinct constant not used in `i` or `avoid`.
pub fn ground_nulls(i: &Instance, avoid: &BTreeSet<Term>) -> Instance {
    let mut taken: BTreeSet<Term> = i.adom();
    taken.extend(avoid.iter().cloned());
    let mut next = 1;
    let mut names = std::collections::BTreeMap::new();
    for n in i.nulls() {
        let c = loop {
            let c = Term::Const(format!("k_{next}").into());
            next += 1;
            if !taken.contains(&c) {
                break c;
            }
        };
        names.insert(n, c);
    }
    i.map_terms(|t| match t {
        Term::Null(n) => names[n].clone(),
        other => other.clone(),
    })
}

/// Setting constants plus `extra` fresh constants `k_1, k_2, …`.
pub fn oracle_domain(s: &Setting, extra: usize) -> Vec<Term> {
    let consts = setting_constants(s);
    let mut domain: Vec<Term> = consts.iter().cloned().collect();
    let mut next = 1;
    while domain.len() < consts.len() + extra {
        let c = Term::Const(format!("k_{next}").into());
        next += 1;
        if !consts.contains(&c) {
            domain.push(c);
        }
    }
    domain
}

fn tuples_over(domain: &[Term], arity: usize) -> Vec<Vec<Term>> {
    let mut out = vec![Vec::new()];
    for _ in 0..arity {
        out = out
            .into_iter()
            .flat_map(|t| {
                domain.iter().map(move |c| {
                    let mut t = t.clone();
                    t.push(c.clone());
                    t
                })
            })
            .collect();
    }
    out
}

struct Enumerator<'a> {
    s: &'a Setting,
    candidates: Vec<Atom>,
    relation_of: Vec<usize>,
    cap: usize,
    budget: usize,
    examined: usize,
    truncated: bool,
}

impl<'a> Enumerator<'a> {
    fn views_within_mv(&self, facts: &[Atom]) -> bool {
        let i: Instance = facts.iter().cloned().collect();
        view_image(self.s, &i).iter().all(|f| self.s.mv.contains(f))
    }

    /// Subsets of exactly `size` candidates starting at `from`.
    fn choose(
        &mut self,
        from: usize,
        size: usize,
        chosen: &mut Vec<Atom>,
        counts: &mut Vec<usize>,
        visit: &mut dyn FnMut(&Instance),
    ) -> ControlFlow<()> {
        if chosen.len() == size {
            if self.examined == self.budget {
                self.truncated = true;
                return ControlFlow::Break(());
            }
            self.examined += 1;
            visit(&chosen.iter().cloned().collect());
            return ControlFlow::Continue(());
        }
        let remaining = size - chosen.len();
        for k in from..self.candidates.len() {
            if self.candidates.len() - k < remaining {
                break;
            }
            let rel = self.relation_of[k];
            if counts[rel] == self.cap {
                continue;
            }
            chosen.push(self.candidates[k].clone());
            counts[rel] += 1;
            let flow = if self.views_within_mv(chosen) {
                self.choose(k + 1, size, chosen, counts, visit)
            } else {
                ControlFlow::Continue(())
            };
            counts[rel] -= 1;
            chosen.pop();
            flow?;
        }
        ControlFlow::Continue(())
    }
}

/// Intersects `q` over every Σ-valid instance found within the bounds.
///
/// Bounded enumeration sees fewer instances than exist, so the result can
/// only over-approximate the certain answers.
pub fn oracle_certain_answers(s: &Setting, q: &crate::model::Rule, cfg: &OracleConfig) -> OracleResult {
    let domain = oracle_domain(s, cfg.extra_constants);
    let mut candidates = Vec::new();
    let mut relation_of = Vec::new();
    for (ri, (pred, arity)) in s.schema.iter().enumerate() {
        for t in tuples_over(&domain, arity) {
            let fact = Atom {
                pred: pred.clone(),
                args: t,
            };
            let alone: Instance = [fact.clone()].into_iter().collect();
            if view_image(s, &alone).iter().all(|f| s.mv.contains(f)) {
                candidates.push(fact);
                relation_of.push(ri);
            }
        }
    }
    let consts = setting_constants(s);
    let mut result: Option<BTreeSet<Vec<Term>>> = None;
    let mut found = 0;
    let max_size = (cfg.max_facts_per_relation * s.schema.len()).min(candidates.len());
    let mut e = Enumerator {
        s,
        candidates,
        relation_of,
        cap: cfg.max_facts_per_relation,
        budget: cfg.instance_budget,
        examined: 0,
        truncated: false,
    };
    for size in 0..=max_size {
        let mut counts = vec![0; s.schema.len()];
        let flow = e.choose(0, size, &mut Vec::new(), &mut counts, &mut |i| {
            if !is_sigma_valid(s, i) {
                return;
            }
            found += 1;
            let answers: BTreeSet<Vec<Term>> = evaluate_query(q, i)
                .into_iter()
                .filter(|t| t.iter().all(|c| consts.contains(c)))
                .collect();
            result = Some(match result.take() {
                None => answers,
                Some(acc) => acc.intersection(&answers).cloned().collect(),
            });
        });
        if flow.is_break() {
            break;
        }
    }
    let vacuous = result.is_none();
    let tuples = result.unwrap_or_else(|| {
        let consts: Vec<Term> = consts.iter().cloned().collect();
        tuples_over(&consts, q.arity()).into_iter().collect()
    });
    OracleResult {
        tuples,
        instances_found: found,
        instances_examined: e.examined,
        truncated: e.truncated,
        vacuous,
    }
}
