//! Terms, atoms, rules, instances, dependencies and materialized-view settings.
//!
//! Every value here is immutable once built. Rules and dependencies are
//! validated on construction; the chase builds its intermediate rules
//! through crate-internal constructors that skip the checks it already
//! guarantees.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;

use crate::error::{Error, Result};

/// Shared immutable symbol.
pub type Sym = Arc<str>;

/// A constant, a labeled null, or a query variable.
///
/// The derived order puts constants first, then nulls, then variables.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Const(Sym),
    Null(u64),
    Var(Sym),
}

impl Term {
    pub fn constant(name: &str) -> Term {
        Term::Const(name.into())
    }

    pub fn var(name: &str) -> Term {
        Term::Var(name.into())
    }

    pub fn is_const(&self) -> bool {
        matches!(self, Term::Const(_))
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Term::Null(_))
    }

    /// Variables and nulls: the terms a homomorphism may move.
    pub fn is_flexible(&self) -> bool {
        !self.is_const()
    }

    pub fn var_name(&self) -> Option<&Sym> {
        match self {
            Term::Var(v) => Some(v),
            _ => None,
        }
    }
}

pub(crate) fn is_plain_constant(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => chars.all(is_ident_char),
        Some(c) if c.is_ascii_digit() => chars.all(|c| c.is_ascii_digit()),
        _ => false,
    }
}

pub(crate) fn is_plain_variable(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_uppercase()) && chars.all(is_ident_char)
}

pub(crate) fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(c) if is_plain_constant(c) => write!(f, "{c}"),
            Term::Const(c) => {
                f.write_str("\"")?;
                for ch in c.chars() {
                    match ch {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        _ => write!(f, "{ch}")?,
                    }
                }
                f.write_str("\"")
            }
            Term::Null(id) => write!(f, "_n{id}"),
            Term::Var(v) if is_plain_variable(v) => write!(f, "{v}"),
            Term::Var(v) => write!(f, "?{v}"),
        }
    }
}

/// Canonical unordered pair: smaller term first.
pub fn diseq_pair(a: Term, b: Term) -> (Term, Term) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// A relational atom `pred(args)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub pred: Sym,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: &str, args: Vec<Term>) -> Atom {
        Atom {
            pred: pred.into(),
            args,
        }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_const)
    }

    pub fn map_terms(&self, mut f: impl FnMut(&Term) -> Term) -> Atom {
        Atom {
            pred: self.pred.clone(),
            args: self.args.iter().map(&mut f).collect(),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.pred)?;
        for (i, t) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str(")")
    }
}

/// Checks that every predicate is used with one arity.
fn check_arities<'a>(atoms: impl IntoIterator<Item = &'a Atom>) -> Result<()> {
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for a in atoms {
        match seen.get(&*a.pred) {
            Some(&n) if n != a.arity() => {
                return Err(Error::ArityMismatch {
                    pred: a.pred.to_string(),
                    expected: n,
                    found: a.arity(),
                })
            }
            _ => {
                seen.insert(&a.pred, a.arity());
            }
        }
    }
    Ok(())
}

fn dedup_atoms(atoms: Vec<Atom>) -> Vec<Atom> {
    let mut seen = BTreeSet::new();
    atoms.into_iter().filter(|a| seen.insert(a.clone())).collect()
}

/// A conjunctive query with disequalities (CQ≠).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Rule {
    name: Sym,
    head: Vec<Term>,
    body: Vec<Atom>,
    diseqs: BTreeSet<(Term, Term)>,
    unsatisfiable: bool,
}

/// Builds a validated rule.
///
/// Duplicate body atoms are collapsed, `X != X` marks the rule
/// unsatisfiable and a disequality between two distinct constants is
/// dropped.
pub fn make_rule(
    name: &str,
    head: Vec<Term>,
    body: Vec<Atom>,
    diseqs: impl IntoIterator<Item = (Term, Term)>,
) -> Result<Rule> {
    let diseqs: Vec<(Term, Term)> = diseqs.into_iter().collect();
    let all_terms = head
        .iter()
        .chain(body.iter().flat_map(|a| a.args.iter()))
        .chain(diseqs.iter().flat_map(|(a, b)| [a, b]));
    for t in all_terms {
        if t.is_null() {
            return Err(Error::NullNotAllowed(t.to_string()));
        }
    }
    check_arities(&body)?;
    let body = dedup_atoms(body);
    let body_vars: BTreeSet<&Term> = body.iter().flat_map(|a| a.args.iter()).filter(|t| t.is_var()).collect();
    for t in head.iter().chain(diseqs.iter().flat_map(|(a, b)| [a, b])) {
        if t.is_var() && !body_vars.contains(t) {
            return Err(Error::UnsafeRule(t.to_string()));
        }
    }
    let mut set = BTreeSet::new();
    let mut unsatisfiable = false;
    for (a, b) in diseqs {
        if a == b {
            unsatisfiable = true;
        } else if a.is_const() && b.is_const() {
            continue;
        }
        set.insert(diseq_pair(a, b));
    }
    Ok(Rule {
        name: name.into(),
        head,
        body,
        diseqs: set,
        unsatisfiable,
    })
}

impl Rule {
    /// Unchecked constructor for rules the chase derives from valid rules.
    pub(crate) fn raw(name: Sym, head: Vec<Term>, body: Vec<Atom>, diseqs: BTreeSet<(Term, Term)>) -> Rule {
        let unsatisfiable = diseqs.iter().any(|(a, b)| a == b);
        Rule {
            name,
            head,
            body,
            diseqs,
            unsatisfiable,
        }
    }

    pub fn name(&self) -> &Sym {
        &self.name
    }

    pub fn head(&self) -> &[Term] {
        &self.head
    }

    pub fn body(&self) -> &[Atom] {
        &self.body
    }

    pub fn diseqs(&self) -> &BTreeSet<(Term, Term)> {
        &self.diseqs
    }

    pub fn is_unsatisfiable(&self) -> bool {
        self.unsatisfiable
    }

    pub fn arity(&self) -> usize {
        self.head.len()
    }

    pub fn is_conjunctive(&self) -> bool {
        self.diseqs.is_empty()
    }

    /// Variables in first-occurrence order: head, body, disequalities.
    pub fn variables(&self) -> Vec<Sym> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for t in self.all_terms() {
            if let Term::Var(v) = t {
                if seen.insert(v.clone()) {
                    out.push(v.clone());
                }
            }
        }
        out
    }

    pub fn constants(&self) -> BTreeSet<Term> {
        self.all_terms().filter(|t| t.is_const()).cloned().collect()
    }

    fn all_terms(&self) -> impl Iterator<Item = &Term> {
        self.head
            .iter()
            .chain(self.body.iter().flat_map(|a| a.args.iter()))
            .chain(self.diseqs.iter().flat_map(|(a, b)| [a, b]))
    }

    /// Applies a term substitution everywhere, keeping the rule's name.
    pub fn map_terms(&self, mut f: impl FnMut(&Term) -> Term) -> Rule {
        let head = self.head.iter().map(&mut f).collect();
        let body = dedup_atoms(self.body.iter().map(|a| a.map_terms(&mut f)).collect());
        let diseqs = self
            .diseqs
            .iter()
            .map(|(a, b)| diseq_pair(f(a), f(b)))
            .filter(|(a, b)| !(a.is_const() && b.is_const() && a != b))
            .collect();
        Rule::raw(self.name.clone(), head, body, diseqs)
    }

    pub fn with_name(&self, name: &str) -> Rule {
        let mut r = self.clone();
        r.name = name.into();
        r
    }

    /// Rule with the same name and head whose body is `body ∧ extra`.
    pub fn conjoin(&self, extra: &[Atom]) -> Rule {
        let mut body = self.body.clone();
        body.extend(extra.iter().cloned());
        Rule::raw(
            self.name.clone(),
            self.head.clone(),
            dedup_atoms(body),
            self.diseqs.clone(),
        )
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for (i, t) in self.head.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str(") :- ")?;
        let mut parts: Vec<String> = self.body.iter().map(|a| a.to_string()).collect();
        parts.extend(self.diseqs.iter().map(|(a, b)| format!("{a} != {b}")));
        if parts.is_empty() {
            f.write_str("true")
        } else {
            f.write_str(&parts.join(", "))
        }
    }
}

/// Canonical database of a satisfiable rule, with the variable mapping used.
///
/// Variables become fresh constants `c_1, c_2, …` in first-occurrence order,
/// skipping names that already occur as constants in the rule.
pub fn canonical_database(q: &Rule) -> Result<(Instance, BTreeMap<Sym, Term>)> {
    if q.is_unsatisfiable() {
        return Err(Error::UnsatisfiableRule(q.name().to_string()));
    }
    let taken: BTreeSet<Term> = q.constants();
    let mut mapping = BTreeMap::new();
    let mut next = 1;
    for v in q.variables() {
        let c = loop {
            let c = Term::Const(format!("c_{next}").into());
            next += 1;
            if !taken.contains(&c) {
                break c;
            }
        };
        mapping.insert(v, c);
    }
    let image = |t: &Term| match t {
        Term::Var(v) => mapping[v].clone(),
        other => other.clone(),
    };
    let facts = q.body().iter().map(|a| a.map_terms(image)).collect();
    Ok((Instance { facts }, mapping))
}

/// Renames every variable of `q` to `v_1, v_2, …` in first-occurrence
/// order, skipping names in `reserved`.
pub fn freshen_variables(q: &Rule, reserved: &BTreeSet<Sym>) -> Rule {
    let mut mapping: BTreeMap<Sym, Term> = BTreeMap::new();
    let mut next = 1;
    for v in q.variables() {
        let name: Sym = loop {
            let n: Sym = format!("v_{next}").into();
            next += 1;
            if !reserved.contains(&n) {
                break n;
            }
        };
        mapping.insert(v, Term::Var(name));
    }
    q.map_terms(|t| match t {
        Term::Var(v) => mapping[v].clone(),
        other => other.clone(),
    })
}

/// A union of CQ≠ rules sharing a name and head arity. Empty means trivial.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UcqQuery {
    pub name: Sym,
    pub arity: usize,
    pub components: Vec<Rule>,
}

impl UcqQuery {
    pub fn trivial(name: &str, arity: usize) -> UcqQuery {
        UcqQuery {
            name: name.into(),
            arity,
            components: Vec::new(),
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.components.is_empty()
    }
}

/// A finite set of facts over constants and labeled nulls.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Instance {
    facts: BTreeSet<Atom>,
}

impl Instance {
    pub fn new() -> Instance {
        Instance::default()
    }

    /// Panics if a fact contains a variable.
    pub fn from_facts(facts: impl IntoIterator<Item = Atom>) -> Instance {
        let facts: BTreeSet<Atom> = facts.into_iter().collect();
        assert!(
            facts.iter().flat_map(|a| a.args.iter()).all(|t| !t.is_var()),
            "instance facts may not contain variables"
        );
        Instance { facts }
    }

    pub fn insert(&mut self, fact: Atom) -> bool {
        assert!(fact.args.iter().all(|t| !t.is_var()));
        self.facts.insert(fact)
    }

    pub fn facts(&self) -> &BTreeSet<Atom> {
        &self.facts
    }

    pub fn iter(&self) -> impl Iterator<Item = &Atom> {
        self.facts.iter()
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn contains(&self, fact: &Atom) -> bool {
        self.facts.contains(fact)
    }

    pub fn is_ground(&self) -> bool {
        self.facts.iter().all(Atom::is_ground)
    }

    pub fn adom(&self) -> BTreeSet<Term> {
        self.facts.iter().flat_map(|a| a.args.iter().cloned()).collect()
    }

    pub fn nulls(&self) -> BTreeSet<u64> {
        self.facts
            .iter()
            .flat_map(|a| a.args.iter())
            .filter_map(|t| match t {
                Term::Null(n) => Some(*n),
                _ => None,
            })
            .collect()
    }

    pub fn facts_of<'a>(&'a self, pred: &'a str) -> impl Iterator<Item = &'a Atom> + 'a {
        self.facts.iter().filter(move |a| &*a.pred == pred)
    }

    /// Keeps only facts whose predicate satisfies `keep`.
    pub fn restrict(&self, keep: impl Fn(&str) -> bool) -> Instance {
        Instance {
            facts: self.facts.iter().filter(|a| keep(&a.pred)).cloned().collect(),
        }
    }

    pub fn map_terms(&self, mut f: impl FnMut(&Term) -> Term) -> Instance {
        Instance {
            facts: self.facts.iter().map(|a| a.map_terms(&mut f)).collect(),
        }
    }
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, a) in self.facts.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str("}")
    }
}

impl FromIterator<Atom> for Instance {
    fn from_iter<I: IntoIterator<Item = Atom>>(iter: I) -> Instance {
        Instance::from_facts(iter)
    }
}

/// One disjunct on the right-hand side of a dependency.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Branch {
    /// Conjunction of equalities.
    Equalities(Vec<(Term, Term)>),
    /// `∃ vars . atoms`; `vars` may be empty.
    Existential {
        vars: Vec<Sym>,
        atoms: Vec<Atom>,
    },
    Diseq(Term, Term),
    False,
}

impl Branch {
    fn terms(&self) -> Vec<&Term> {
        match self {
            Branch::Equalities(pairs) => pairs.iter().flat_map(|(a, b)| [a, b]).collect(),
            Branch::Existential { atoms, .. } => atoms.iter().flat_map(|a| a.args.iter()).collect(),
            Branch::Diseq(a, b) => vec![a, b],
            Branch::False => Vec::new(),
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Branch::Equalities(pairs) => {
                let parts: Vec<String> = pairs.iter().map(|(a, b)| format!("{a} = {b}")).collect();
                f.write_str(&parts.join(", "))
            }
            Branch::Existential { vars, atoms } => {
                if !vars.is_empty() {
                    let vs: Vec<String> = vars.iter().map(|v| Term::Var(v.clone()).to_string()).collect();
                    write!(f, "exists {} . ", vs.join(","))?;
                }
                let parts: Vec<String> = atoms.iter().map(|a| a.to_string()).collect();
                f.write_str(&parts.join(", "))
            }
            Branch::Diseq(a, b) => write!(f, "{a} != {b}"),
            Branch::False => f.write_str("false"),
        }
    }
}

/// Antecedent atoms implying a nonempty disjunction of branches.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Dependency {
    pub label: Sym,
    pub antecedent: Vec<Atom>,
    pub branches: Vec<Branch>,
}

impl Dependency {
    pub fn new(label: &str, antecedent: Vec<Atom>, branches: Vec<Branch>) -> Result<Dependency> {
        let invalid = |reason: String| Error::InvalidDependency {
            label: label.to_string(),
            reason,
        };
        if branches.is_empty() {
            return Err(invalid("no branches".into()));
        }
        if antecedent.is_empty() {
            return Err(invalid("empty antecedent".into()));
        }
        check_arities(antecedent.iter().chain(branches.iter().flat_map(|b| match b {
            Branch::Existential { atoms, .. } => atoms.iter().collect::<Vec<_>>(),
            _ => Vec::new(),
        })))?;
        let universal: BTreeSet<&Term> = antecedent
            .iter()
            .flat_map(|a| a.args.iter())
            .filter(|t| t.is_var())
            .collect();
        for t in antecedent.iter().flat_map(|a| a.args.iter()) {
            if t.is_null() {
                return Err(Error::NullNotAllowed(t.to_string()));
            }
        }
        for b in &branches {
            let bound: BTreeSet<&Sym> = match b {
                Branch::Existential { vars, .. } => vars.iter().collect(),
                _ => BTreeSet::new(),
            };
            for v in &bound {
                if universal.contains(&Term::Var((*v).clone())) {
                    return Err(invalid(format!("existential variable {v} occurs in the antecedent")));
                }
            }
            for t in b.terms() {
                match t {
                    Term::Null(_) => return Err(Error::NullNotAllowed(t.to_string())),
                    Term::Var(v) if !bound.contains(v) && !universal.contains(t) => {
                        return Err(invalid(format!("variable {t} does not occur in the antecedent")))
                    }
                    _ => {}
                }
            }
        }
        Ok(Dependency {
            label: label.into(),
            antecedent,
            branches,
        })
    }

    /// A single existential branch.
    pub fn is_tgd(&self) -> bool {
        matches!(self.branches.as_slice(), [Branch::Existential { .. }])
    }

    /// A single equalities branch.
    pub fn is_egd(&self) -> bool {
        matches!(self.branches.as_slice(), [Branch::Equalities(_)])
    }

    pub fn constants(&self) -> BTreeSet<Term> {
        self.antecedent
            .iter()
            .flat_map(|a| a.args.iter())
            .chain(self.branches.iter().flat_map(|b| b.terms()))
            .filter(|t| t.is_const())
            .cloned()
            .collect()
    }

    pub fn variables(&self) -> BTreeSet<Sym> {
        self.antecedent
            .iter()
            .flat_map(|a| a.args.iter())
            .chain(self.branches.iter().flat_map(|b| b.terms()))
            .filter_map(|t| t.var_name().cloned())
            .chain(self.branches.iter().flat_map(|b| match b {
                Branch::Existential { vars, .. } => vars.clone(),
                _ => Vec::new(),
            }))
            .collect()
    }
}

impl fmt::Display for Dependency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ante: Vec<String> = self.antecedent.iter().map(|a| a.to_string()).collect();
        let branches: Vec<String> = self.branches.iter().map(|b| b.to_string()).collect();
        write!(f, "{}: {} -> {}", self.label, ante.join(", "), branches.join(" | "))
    }
}

/// A relation position `(pred, index)`; displayed 1-based.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Position {
    pub pred: Sym,
    pub index: usize,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.pred, self.index + 1)
    }
}

/// Base relation symbols with arities, in declaration order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Schema {
    relations: IndexMap<Sym, usize>,
}

impl Schema {
    pub fn new() -> Schema {
        Schema::default()
    }

    pub fn add(&mut self, pred: &str, arity: usize) {
        self.relations.insert(pred.into(), arity);
    }

    pub fn arity(&self, pred: &str) -> Option<usize> {
        self.relations.get(pred).copied()
    }

    pub fn contains(&self, pred: &str) -> bool {
        self.relations.contains_key(pred)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Sym, usize)> {
        self.relations.iter().map(|(k, v)| (k, *v))
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }
}

impl FromIterator<(Sym, usize)> for Schema {
    fn from_iter<I: IntoIterator<Item = (Sym, usize)>>(iter: I) -> Schema {
        Schema {
            relations: iter.into_iter().collect(),
        }
    }
}

/// A materialized-view setting with its named queries.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Setting {
    /// Base schema P.
    pub schema: Schema,
    /// Σ over P: tgds and egds without constants.
    pub sigma: Vec<Dependency>,
    /// View definitions over P, keyed by view name.
    pub views: IndexMap<Sym, Rule>,
    /// Ground view extension MV.
    pub mv: Instance,
    pub queries: IndexMap<Sym, Rule>,
}

impl Setting {
    pub fn query(&self, name: &str) -> Result<&Rule> {
        self.queries
            .get(name)
            .ok_or_else(|| Error::UnknownQuery(name.to_string()))
    }

    /// MV tuples of one view, in sorted order.
    pub fn mv_tuples(&self, view: &str) -> Vec<Vec<Term>> {
        self.mv.facts_of(view).map(|a| a.args.clone()).collect()
    }

    pub fn is_view(&self, pred: &str) -> bool {
        self.views.contains_key(pred)
    }

    /// Copy of the setting with Σ removed.
    pub fn without_sigma(&self) -> Setting {
        Setting {
            sigma: Vec::new(),
            ..self.clone()
        }
    }

    /// MV facts that no instance can produce because they clash with
    /// constants or repeated variables in their view's head.
    pub fn head_conflicts(&self) -> Vec<Atom> {
        self.mv
            .iter()
            .filter(|fact| match self.views.get(&fact.pred) {
                Some(view) => !head_matches(view.head(), &fact.args),
                None => true,
            })
            .cloned()
            .collect()
    }
}

pub(crate) fn head_matches(head: &[Term], tuple: &[Term]) -> bool {
    if head.len() != tuple.len() {
        return false;
    }
    let mut binding: BTreeMap<&Term, &Term> = BTreeMap::new();
    for (h, t) in head.iter().zip(tuple) {
        if h.is_const() {
            if h != t {
                return false;
            }
        } else if let Some(prev) = binding.insert(h, t) {
            if prev != t {
                return false;
            }
        }
    }
    true
}

/// Constants of MV and of the view definitions.
pub fn setting_constants(s: &Setting) -> BTreeSet<Term> {
    let mut out = s.mv.adom();
    for view in s.views.values() {
        out.extend(view.constants());
    }
    out
}
