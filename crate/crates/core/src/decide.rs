//! Conditional containment, certain answers and setting validity.

use std::collections::BTreeSet;

use crate::chase::{
    build_instance_deps, build_phi_mv, build_phi_mv_unnormalized, build_sigma_neq, chase_instance, chase_query,
    default_budget, require_weakly_acyclic, source_chase, ChaseTree,
};
use crate::error::{Error, Result};
use crate::hom::{
    answers_without_nulls, containment_mapping, find_homomorphisms, ucq_containment_evidence, Mapping, Mode,
};
use crate::model::{
    freshen_variables, make_rule, setting_constants, Atom, Dependency, Instance, Rule, Setting, Sym, Term, UcqQuery,
};

/// Knobs shared by the decision procedures.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Options {
    /// Per-path step budget; `None` uses [`default_budget`].
    pub budget: Option<usize>,
    /// Chase queries with un-normalized Φ(MV) and plain Σ, dropping every
    /// disequality. Unsound; kept to reproduce the failure it causes.
    pub strip_disequalities: bool,
}

/// C_MV and its expansion over the base schema.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MvExpansion {
    pub c_mv: Vec<Atom>,
    pub c_exp: Vec<Atom>,
}

/// Expands every MV fact by its view body, binding head variables to the
/// fact's values and giving the remaining variables fresh names `E_i`.
pub fn mv_expansion(s: &Setting) -> MvExpansion {
    let c_mv: Vec<Atom> = s.mv.iter().cloned().collect();
    let mut c_exp = Vec::new();
    let mut next = 1;
    for fact in &c_mv {
        let Some(view) = s.views.get(&fact.pred) else {
            continue;
        };
        let mut binding = Mapping::new();
        for (h, t) in view.head().iter().zip(&fact.args) {
            if h.is_var() {
                binding.entry(h.clone()).or_insert_with(|| t.clone());
            }
        }
        for v in view.variables() {
            let t = Term::Var(v);
            binding.entry(t).or_insert_with(|| {
                let fresh = Term::Var(format!("E_{next}").into());
                next += 1;
                fresh
            });
        }
        for a in view.body() {
            let image = a.map_terms(|t| crate::hom::apply(&binding, t));
            if !c_exp.contains(&image) {
                c_exp.push(image);
            }
        }
    }
    MvExpansion { c_mv, c_exp }
}

/// Υ_MΣ = Φ(MV) ∪ Σ(≠), in that order.
pub fn upsilon(s: &Setting, opts: &Options) -> Vec<Dependency> {
    if opts.strip_disequalities {
        let mut deps = build_phi_mv_unnormalized(s);
        deps.extend(s.sigma.iter().cloned());
        deps
    } else {
        let mut deps = build_phi_mv(s);
        deps.extend(build_sigma_neq(&s.sigma));
        deps
    }
}

/// `q1` with a freshened copy of C^exp_MV conjoined to its body.
pub fn containment_root(s: &Setting, q1: &Rule) -> Rule {
    let exp = mv_expansion(s);
    let carrier = Rule::raw(q1.name().clone(), Vec::new(), exp.c_exp, BTreeSet::new());
    let reserved: BTreeSet<Sym> = q1.variables().into_iter().collect();
    let fresh = freshen_variables(&carrier, &reserved);
    // A copy that already maps into the body adds nothing up to equivalence.
    if !find_homomorphisms(fresh.body(), q1.body(), Mode::First, None).is_empty() {
        return q1.clone();
    }
    q1.conjoin(fresh.body())
}

/// Runs the query chase behind conditional containment.
pub fn chase_for_containment(s: &Setting, q1: &Rule, opts: &Options) -> Result<(UcqQuery, ChaseTree)> {
    require_weakly_acyclic(&s.sigma)?;
    let root = containment_root(s, q1);
    if !s.head_conflicts().is_empty() {
        return Ok((UcqQuery::trivial(q1.name(), q1.arity()), ChaseTree::failed()));
    }
    let budget = opts
        .budget
        .unwrap_or_else(|| default_budget(root.body().len(), s.mv.len()));
    chase_query(&root, &upsilon(s, opts), budget)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Evidence {
    /// Every chase leaf failed, so no Σ-valid instance exists.
    TrivialChase,
    /// One mapping per satisfiable component, in component order.
    ContainmentMappings(Vec<Mapping>),
    /// A component with no containment mapping.
    CounterexampleComponent(Rule),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContainmentVerdict {
    pub holds: bool,
    pub evidence: Evidence,
    pub chase_result: UcqQuery,
}

fn verdict(result: UcqQuery, q2: &Rule) -> Result<ContainmentVerdict> {
    if result.components.iter().all(Rule::is_unsatisfiable) {
        return Ok(ContainmentVerdict {
            holds: true,
            evidence: Evidence::TrivialChase,
            chase_result: result,
        });
    }
    let evidence = ucq_containment_evidence(&result, q2)?;
    let mut mappings = Vec::new();
    for (i, m) in evidence {
        match m {
            Some(m) => mappings.push(m),
            None => {
                let witness = result.components[i].clone();
                return Ok(ContainmentVerdict {
                    holds: false,
                    evidence: Evidence::CounterexampleComponent(witness),
                    chase_result: result,
                });
            }
        }
    }
    Ok(ContainmentVerdict {
        holds: true,
        evidence: Evidence::ContainmentMappings(mappings),
        chase_result: result,
    })
}

fn check_pair(q1: &Rule, q2: &Rule) -> Result<()> {
    if !q2.is_conjunctive() {
        return Err(Error::NotConjunctive(q2.name().to_string()));
    }
    if q1.arity() != q2.arity() {
        return Err(Error::ArityMismatch {
            pred: q2.name().to_string(),
            expected: q1.arity(),
            found: q2.arity(),
        });
    }
    Ok(())
}

/// Decides whether `q1 ⊑ q2` on every Σ-valid base instance for the views
/// and MV of `s`.
pub fn conditional_containment(s: &Setting, q1: &Rule, q2: &Rule, opts: &Options) -> Result<ContainmentVerdict> {
    check_pair(q1, q2)?;
    let (result, _) = chase_for_containment(s, q1, opts)?;
    verdict(result, q2)
}

/// Plain containment `q1 ⊑ q2` via a containment mapping.
pub fn plain_containment(q1: &Rule, q2: &Rule) -> Result<bool> {
    check_pair(q1, q2)?;
    Ok(containment_mapping(q2, q1).is_some())
}

/// Containment under Σ alone: chase `q1` with Σ, then test each leaf.
pub fn sigma_containment(sigma: &[Dependency], q1: &Rule, q2: &Rule, budget: Option<usize>) -> Result<bool> {
    check_pair(q1, q2)?;
    require_weakly_acyclic(sigma)?;
    let budget = budget.unwrap_or_else(|| default_budget(q1.body().len(), 0));
    let (result, _) = chase_query(q1, sigma, budget)?;
    Ok(verdict(result, q2)?.holds)
}

/// Whether `t` is a certain answer to `q`, decided through containment of
/// `Q1(t) ← C^exp_MV` in `q`. Tuples using constants outside the setting
/// are never certain. On an invalid setting every tuple is (vacuously)
/// certain.
pub fn is_certain_answer(s: &Setting, q: &Rule, t: &[Term], opts: &Options) -> Result<bool> {
    if t.len() != q.arity() {
        return Err(Error::ArityMismatch {
            pred: q.name().to_string(),
            expected: q.arity(),
            found: t.len(),
        });
    }
    let consts = setting_constants(s);
    if !t.iter().all(|c| c.is_const() && consts.contains(c)) {
        return Ok(false);
    }
    let q1 = tuple_query(s, q, t);
    Ok(conditional_containment(s, &q1, q, opts)?.holds)
}

fn tuple_query(s: &Setting, q: &Rule, t: &[Term]) -> Rule {
    let exp = mv_expansion(s);
    make_rule(&format!("{}_t", q.name()), t.to_vec(), exp.c_exp, []).expect("ground head is safe")
}

/// Which certain-answer procedure produced a report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    ViewVerified,
    Containment,
    GenerateTest,
    OwaBaseline,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::ViewVerified => "vv",
            Method::Containment => "containment",
            Method::GenerateTest => "generate-test",
            Method::OwaBaseline => "owa",
        }
    }
}

/// Order in which the MV-enhanced chase applies its two dependency sets.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Stage {
    /// Σ ∪ Σ^(MΣ) together, starting from the canonical universal solution.
    #[default]
    Interleaved,
    /// Σ^(MΣ) to closure, then Σ, starting from the Σ_st-only chase.
    MvFirst,
    /// Σ to closure, then Σ^(MΣ), starting from the Σ_st-only chase.
    SigmaFirst,
}

impl Stage {
    pub fn is_complete(self) -> bool {
        self == Stage::Interleaved
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CertainAnswerReport {
    pub query: Sym,
    pub method: Method,
    /// Sorted certain tuples; empty when the setting is invalid.
    pub tuples: BTreeSet<Vec<Term>>,
    pub solutions_examined: usize,
    pub valid_setting: bool,
    /// True when no Σ-valid instance exists, so every tuple is certain by
    /// the empty-intersection reading.
    pub vacuous: bool,
    /// True for procedures that may miss certain answers.
    pub incomplete: bool,
}

/// Result of the view-verified data-exchange chase.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VvOutcome {
    /// Root of the MV-enhanced chase: the canonical universal solution, or
    /// for staged runs the Σ_st-only chase of MV. `None` if it failed.
    pub root: Option<Instance>,
    pub solutions: Vec<Instance>,
    pub trees: Vec<ChaseTree>,
    pub stage: Stage,
}

fn instance_budget(s: &Setting, root: &Instance, opts: &Options) -> usize {
    opts.budget.unwrap_or_else(|| default_budget(root.len(), s.mv.len()))
}

/// Computes the view-verified universal solutions of `s`.
pub fn view_verified_solutions(s: &Setting, stage: Stage, opts: &Options) -> Result<VvOutcome> {
    require_weakly_acyclic(&s.sigma)?;
    let (_, sigma_mv) = build_instance_deps(s);
    let root = if !s.head_conflicts().is_empty() {
        None
    } else {
        source_chase(s, stage == Stage::Interleaved, opts.budget)?
    };
    let Some(root_inst) = root.clone() else {
        return Ok(VvOutcome {
            root,
            solutions: Vec::new(),
            trees: Vec::new(),
            stage,
        });
    };
    let budget = instance_budget(s, &root_inst, opts);
    let mut trees = Vec::new();
    let solutions = match stage {
        Stage::Interleaved => {
            let mut deps = sigma_mv.clone();
            deps.extend(s.sigma.iter().cloned());
            let (sols, tree) = chase_instance(&root_inst, &deps, budget)?;
            trees.push(tree);
            sols
        }
        Stage::MvFirst | Stage::SigmaFirst => {
            let (first, second) = if stage == Stage::MvFirst {
                (sigma_mv.clone(), s.sigma.clone())
            } else {
                (s.sigma.clone(), sigma_mv.clone())
            };
            let (mid, tree) = chase_instance(&root_inst, &first, budget)?;
            trees.push(tree);
            let mut sols = Vec::new();
            for j in mid {
                let (leaves, tree) = chase_instance(&j, &second, budget)?;
                trees.push(tree);
                for l in leaves {
                    if !sols.contains(&l) {
                        sols.push(l);
                    }
                }
            }
            sols
        }
    };
    Ok(VvOutcome {
        root,
        solutions,
        trees,
        stage,
    })
}

/// True iff some Σ-valid base instance exists for the views and MV.
pub fn setting_is_valid(s: &Setting, opts: &Options) -> Result<bool> {
    Ok(!view_verified_solutions(s, Stage::Interleaved, opts)?
        .solutions
        .is_empty())
}

fn all_tuples(consts: &BTreeSet<Term>, arity: usize) -> Vec<Vec<Term>> {
    let consts: Vec<&Term> = consts.iter().collect();
    let mut out = vec![Vec::new()];
    for _ in 0..arity {
        out = out
            .into_iter()
            .flat_map(|t| {
                consts.iter().map(move |c| {
                    let mut t = t.clone();
                    t.push((*c).clone());
                    t
                })
            })
            .collect();
    }
    out
}

fn intersect(sets: impl IntoIterator<Item = BTreeSet<Vec<Term>>>) -> BTreeSet<Vec<Term>> {
    let mut it = sets.into_iter();
    let Some(first) = it.next() else {
        return BTreeSet::new();
    };
    it.fold(first, |acc, s| acc.intersection(&s).cloned().collect())
}

/// Certain answers from the leaves of a (possibly staged) MV-enhanced chase.
pub fn certain_answers_staged(s: &Setting, q: &Rule, stage: Stage, opts: &Options) -> Result<CertainAnswerReport> {
    let out = view_verified_solutions(s, stage, opts)?;
    let valid = !out.solutions.is_empty();
    let tuples = if valid {
        intersect(out.solutions.iter().map(|j| answers_without_nulls(q, j)))
    } else {
        BTreeSet::new()
    };
    Ok(CertainAnswerReport {
        query: q.name().clone(),
        method: Method::ViewVerified,
        tuples,
        solutions_examined: out.solutions.len(),
        valid_setting: valid,
        vacuous: !valid,
        incomplete: !stage.is_complete(),
    })
}

/// All certain answers to `q` by the chosen method.
pub fn find_certain_answers(s: &Setting, q: &Rule, method: Method, opts: &Options) -> Result<CertainAnswerReport> {
    if !q.is_conjunctive() {
        return Err(Error::NotConjunctive(q.name().to_string()));
    }
    match method {
        Method::ViewVerified => certain_answers_staged(s, q, Stage::Interleaved, opts),
        Method::OwaBaseline => {
            require_weakly_acyclic(&s.sigma)?;
            let j = if s.head_conflicts().is_empty() {
                source_chase(s, true, opts.budget)?
            } else {
                None
            };
            let valid = j.is_some();
            Ok(CertainAnswerReport {
                query: q.name().clone(),
                method,
                tuples: j.as_ref().map(|j| answers_without_nulls(q, j)).unwrap_or_default(),
                solutions_examined: usize::from(valid),
                valid_setting: valid,
                vacuous: !valid,
                incomplete: true,
            })
        }
        Method::GenerateTest | Method::Containment => {
            let boolean = Rule::raw(
                format!("{}_mv", q.name()).into(),
                Vec::new(),
                Vec::new(),
                BTreeSet::new(),
            );
            let (probe, _) = chase_for_containment(s, &boolean, opts)?;
            let valid = !probe.is_trivial();
            let mut tuples = BTreeSet::new();
            let mut examined = 0;
            if valid {
                for t in all_tuples(&setting_constants(s), q.arity()) {
                    examined += 1;
                    if is_certain_answer(s, q, &t, opts)? {
                        tuples.insert(t);
                    }
                }
            }
            Ok(CertainAnswerReport {
                query: q.name().clone(),
                method,
                tuples,
                solutions_examined: examined,
                valid_setting: valid,
                vacuous: !valid,
                incomplete: false,
            })
        }
    }
}

/// All tuples of the given arity over the setting constants, sorted.
pub fn candidate_tuples(s: &Setting, arity: usize) -> Vec<Vec<Term>> {
    all_tuples(&setting_constants(s), arity)
}
