//! Derived dependency sets, weak acyclicity, and the disjunctive chase.
//!
//! One engine serves both the query chase and the instance chase. A node is
//! a conjunction of atoms (plus head and disequalities for queries). The
//! flexible terms are variables in the query chase and labeled nulls in the
//! instance chase.
//!
//! A step with dependency `d` and homomorphism `h` applies when no branch
//! image is already satisfied:
//!
//! * equalities: every pair is syntactically identical;
//! * existential: `h` extends to a homomorphism covering the atoms;
//! * disequality: the terms are distinct constants, or the atom is present;
//! * `false`: never.
//!
//! Every branch then yields a child unless it fails, and a step whose
//! branches all fail yields a single ε child. Dependencies are scanned in
//! the order given, and for each dependency homomorphisms are scanned in
//! enumeration order. The first applicable pair is used.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::ops::ControlFlow;

use crate::error::{Error, Result};
use crate::hom::{apply, apply_atom, find_homomorphisms, for_each_homomorphism, Mapping, Mode};
use crate::model::{diseq_pair, Atom, Branch, Dependency, Instance, Position, Rule, Setting, Sym, Term, UcqQuery};

// ---------------------------------------------------------------------------
// Weak acyclicity

/// Dependency graph over relation positions.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DependencyGraph {
    pub nodes: BTreeSet<Position>,
    pub regular_edges: BTreeSet<(Position, Position)>,
    pub special_edges: BTreeSet<(Position, Position)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WeakAcyclicity {
    WeaklyAcyclic,
    /// A cycle through a special edge, first position repeated at the end.
    Cycle(Vec<Position>),
}

fn positions_of<'a>(atoms: &'a [Atom], var: &'a Term) -> impl Iterator<Item = Position> + 'a {
    atoms.iter().flat_map(move |a| {
        a.args
            .iter()
            .enumerate()
            .filter(move |(_, t)| *t == var)
            .map(move |(i, _)| Position {
                pred: a.pred.clone(),
                index: i,
            })
    })
}

/// Builds the position graph of the existential branches of `sigma`.
pub fn dependency_graph(sigma: &[Dependency]) -> DependencyGraph {
    let mut g = DependencyGraph::default();
    for d in sigma {
        for a in &d.antecedent {
            for i in 0..a.arity() {
                g.nodes.insert(Position {
                    pred: a.pred.clone(),
                    index: i,
                });
            }
        }
        for b in &d.branches {
            let Branch::Existential { vars, atoms } = b else {
                continue;
            };
            for a in atoms {
                for i in 0..a.arity() {
                    g.nodes.insert(Position {
                        pred: a.pred.clone(),
                        index: i,
                    });
                }
            }
            let universal: BTreeSet<&Term> = d
                .antecedent
                .iter()
                .flat_map(|a| a.args.iter())
                .filter(|t| t.is_var())
                .collect();
            let existential: Vec<Term> = vars.iter().map(|v| Term::Var(v.clone())).collect();
            for x in universal {
                let targets: Vec<Position> = positions_of(atoms, x).collect();
                if targets.is_empty() {
                    continue;
                }
                for p in positions_of(&d.antecedent, x) {
                    for q in &targets {
                        g.regular_edges.insert((p.clone(), q.clone()));
                    }
                    for z in &existential {
                        for q in positions_of(atoms, z) {
                            g.special_edges.insert((p.clone(), q));
                        }
                    }
                }
            }
        }
    }
    g
}

/// Reports the first cycle through a special edge, trying special edges in
/// sorted order and closing each with a depth-first search.
pub fn check_weak_acyclicity(sigma: &[Dependency]) -> WeakAcyclicity {
    let g = dependency_graph(sigma);
    let mut adj: BTreeMap<&Position, BTreeSet<&Position>> = BTreeMap::new();
    for (p, q) in g.regular_edges.iter().chain(&g.special_edges) {
        adj.entry(p).or_default().insert(q);
    }
    for (u, v) in &g.special_edges {
        if let Some(path) = dfs_path(&adj, v, u) {
            let mut cycle = vec![u.clone()];
            cycle.extend(path);
            return WeakAcyclicity::Cycle(cycle);
        }
    }
    WeakAcyclicity::WeaklyAcyclic
}

fn dfs_path(adj: &BTreeMap<&Position, BTreeSet<&Position>>, from: &Position, to: &Position) -> Option<Vec<Position>> {
    fn go<'a>(
        adj: &BTreeMap<&'a Position, BTreeSet<&'a Position>>,
        at: &'a Position,
        to: &Position,
        seen: &mut BTreeSet<&'a Position>,
        path: &mut Vec<Position>,
    ) -> bool {
        path.push(at.clone());
        if at == to {
            return true;
        }
        if seen.insert(at) {
            if let Some(next) = adj.get(at) {
                for n in next {
                    if go(adj, n, to, seen, path) {
                        return true;
                    }
                }
            }
        }
        path.pop();
        false
    }
    let (key, _) = adj.get_key_value(from)?;
    let mut path = Vec::new();
    let mut seen = BTreeSet::new();
    go(adj, key, to, &mut seen, &mut path).then_some(path)
}

/// Fails with `NotWeaklyAcyclic` when `sigma` has a special cycle.
pub fn require_weakly_acyclic(sigma: &[Dependency]) -> Result<()> {
    match check_weak_acyclicity(sigma) {
        WeakAcyclicity::WeaklyAcyclic => Ok(()),
        WeakAcyclicity::Cycle(c) => Err(Error::NotWeaklyAcyclic(c)),
    }
}

// ---------------------------------------------------------------------------
// Derived dependencies

fn fresh_var(next: &mut usize, taken: &BTreeSet<Sym>) -> Term {
    loop {
        let name: Sym = format!("Z_{next}").into();
        *next += 1;
        if !taken.contains(&name) {
            return Term::Var(name);
        }
    }
}

/// Replaces each repeated occurrence of a term by a fresh variable `Z_i`,
/// recording `(fresh, original)` equalities left to right.
pub fn normalize_body(atoms: &[Atom]) -> (Vec<Atom>, Vec<(Term, Term)>) {
    let taken = atoms
        .iter()
        .flat_map(|a| a.args.iter())
        .filter_map(|t| t.var_name().cloned())
        .collect();
    normalize_with(atoms, &taken, false)
}

/// Normalization that avoids `taken` names. With `lift_constants`, every
/// constant occurrence is replaced, not only the repeated ones.
pub fn normalize_with(atoms: &[Atom], taken: &BTreeSet<Sym>, lift_constants: bool) -> (Vec<Atom>, Vec<(Term, Term)>) {
    let mut seen = BTreeSet::new();
    let mut next = 1;
    let mut eqs = Vec::new();
    let out = atoms
        .iter()
        .map(|a| {
            a.map_terms(|t| {
                let first = seen.insert(t.clone());
                if first && !(lift_constants && t.is_const()) {
                    t.clone()
                } else {
                    let z = fresh_var(&mut next, taken);
                    eqs.push((z.clone(), t.clone()));
                    z
                }
            })
        })
        .collect();
    (out, eqs)
}

fn diseq_branches(eqs: &[(Term, Term)]) -> impl Iterator<Item = Branch> + '_ {
    eqs.iter()
        .map(|(fresh, orig)| Branch::Diseq(orig.clone(), fresh.clone()))
}

/// Σ(≠): normalized antecedents with one disequality branch per equality
/// that normalization introduced.
pub fn build_sigma_neq(sigma: &[Dependency]) -> Vec<Dependency> {
    sigma
        .iter()
        .map(|d| {
            let (ante, eqs) = normalize_with(&d.antecedent, &d.variables(), false);
            if eqs.is_empty() {
                return d.clone();
            }
            let mut branches = d.branches.clone();
            branches.extend(diseq_branches(&eqs));
            Dependency::new(&format!("{}_neq", d.label), ante, branches)
                .expect("normalization keeps dependencies valid")
        })
        .collect()
}

/// One branch per MV tuple. `eqs` are the normalization equalities; each is
/// conjoined to the branch with head variables replaced by the tuple.
fn mv_branches(view: &Rule, tuples: &[Vec<Term>], eqs: &[(Term, Term)]) -> Vec<Branch> {
    if tuples.is_empty() {
        return vec![Branch::False];
    }
    tuples
        .iter()
        .map(|t| {
            let mut pairs: Vec<(Term, Term)> = view.head().iter().cloned().zip(t.iter().cloned()).collect();
            let bound: Mapping = pairs.iter().filter(|(h, _)| h.is_var()).cloned().collect();
            for (fresh, orig) in eqs {
                let pair = (fresh.clone(), bound.get(orig).cloned().unwrap_or_else(|| orig.clone()));
                if !pairs.contains(&pair) {
                    pairs.push(pair);
                }
            }
            Branch::Equalities(pairs)
        })
        .collect()
}

fn mv_label(view: &Sym, empty: bool) -> String {
    if empty {
        format!("iota_{view}")
    } else {
        format!("tau_{view}")
    }
}

/// Φ(MV): per view, a gic when its MV answer is empty and a gnegd when it
/// is not. Boolean views with a nonempty answer contribute nothing.
///
/// Every constant occurrence in a view body is lifted into a fresh variable,
/// so that a valuation sending a body variable onto the view's constant is
/// still covered by a disequality branch.
pub fn build_phi_mv(s: &Setting) -> Vec<Dependency> {
    let mut out = Vec::new();
    for (name, view) in &s.views {
        let tuples = s.mv_tuples(name);
        if view.arity() == 0 && !tuples.is_empty() {
            continue;
        }
        let taken: BTreeSet<Sym> = view.variables().into_iter().collect();
        let (ante, eqs) = normalize_with(view.body(), &taken, true);
        let mut branches = mv_branches(view, &tuples, &eqs);
        branches.extend(diseq_branches(&eqs));
        out.push(Dependency::new(&mv_label(name, tuples.is_empty()), ante, branches).expect("view bodies are safe"));
    }
    out
}

/// Φ(MV) without normalization and so without disequality branches. Only
/// useful for reproducing why the disequalities are needed.
pub fn build_phi_mv_unnormalized(s: &Setting) -> Vec<Dependency> {
    build_instance_deps(s).1
}

/// The source-to-target tgds `V(X̄) → ∃Ȳ body_V` and the MV-induced
/// dependencies Σ^(MΣ) over un-normalized view bodies.
pub fn build_instance_deps(s: &Setting) -> (Vec<Dependency>, Vec<Dependency>) {
    let mut st = Vec::new();
    let mut mv = Vec::new();
    for (name, view) in &s.views {
        let head_vars: BTreeSet<&Sym> = view.head().iter().filter_map(Term::var_name).collect();
        let exists: Vec<Sym> = view
            .variables()
            .into_iter()
            .filter(|v| !head_vars.contains(v))
            .collect();
        let ante = vec![Atom {
            pred: name.clone(),
            args: view.head().to_vec(),
        }];
        let branch = Branch::Existential {
            vars: exists,
            atoms: view.body().to_vec(),
        };
        st.push(Dependency::new(&format!("st_{name}"), ante, vec![branch]).expect("view bodies are safe"));

        let tuples = s.mv_tuples(name);
        if view.arity() == 0 && !tuples.is_empty() {
            continue;
        }
        let branches = mv_branches(view, &tuples, &[]);
        mv.push(
            Dependency::new(&mv_label(name, tuples.is_empty()), view.body().to_vec(), branches)
                .expect("view bodies are safe"),
        );
    }
    (st, mv)
}

// ---------------------------------------------------------------------------
// Chase trees

/// What a chase-tree node holds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NodeContent {
    Query(Rule),
    Instance(Instance),
    /// The ε marker of a step whose branches all failed.
    Failed,
}

/// Label of the edge into a non-root node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeLabel {
    pub dependency: Sym,
    pub mapping: Mapping,
    /// Index of the branch taken; `None` on the edge into ε.
    pub branch: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeNode {
    pub parent: Option<usize>,
    pub edge: Option<EdgeLabel>,
    pub content: NodeContent,
    pub children: Vec<usize>,
    pub depth: usize,
    /// Set when an identical query node was already expanded elsewhere.
    pub same_as: Option<usize>,
}

/// A chase tree; node 0 is the root.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ChaseTree {
    pub nodes: Vec<TreeNode>,
}

impl ChaseTree {
    /// A tree whose root is ε.
    pub fn failed() -> ChaseTree {
        ChaseTree {
            nodes: vec![TreeNode {
                parent: None,
                edge: None,
                content: NodeContent::Failed,
                children: Vec::new(),
                depth: 0,
                same_as: None,
            }],
        }
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn leaves(&self) -> impl Iterator<Item = (usize, &TreeNode)> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.children.is_empty() && n.same_as.is_none())
    }

    pub fn failed_leaves(&self) -> usize {
        self.leaves().filter(|(_, n)| n.content == NodeContent::Failed).count()
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Indented text dump, one node per line, children in branch order.
    pub fn render(&self) -> String {
        let mut out = String::new();
        if !self.nodes.is_empty() {
            self.render_node(0, &mut out);
        }
        out
    }

    fn render_node(&self, id: usize, out: &mut String) {
        let node = &self.nodes[id];
        let indent = "  ".repeat(node.depth);
        let label = match &node.edge {
            None => "root".to_string(),
            Some(e) => {
                let map: Vec<String> = e.mapping.iter().map(|(k, v)| format!("{k}->{v}")).collect();
                let branch = e.branch.map_or("eps".to_string(), |b| (b + 1).to_string());
                format!("{} branch {} {{{}}}", e.dependency, branch, map.join(","))
            }
        };
        let content = match &node.content {
            NodeContent::Query(r) => r.to_string(),
            NodeContent::Instance(i) => i.to_string(),
            NodeContent::Failed => "EPSILON".to_string(),
        };
        let shared = node.same_as.map_or(String::new(), |k| format!(" (as [{k}])"));
        let _ = writeln!(out, "{indent}[{id}] {label}: {content}{shared}");
        for &c in &node.children {
            self.render_node(c, out);
        }
    }
}

/// The default per-path step budget, `10·(n + m + 1)²`.
pub fn default_budget(root_atoms: usize, mv_facts: usize) -> usize {
    10 * (root_atoms + mv_facts + 1).pow(2)
}

// ---------------------------------------------------------------------------
// Engine

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Query,
    Instance,
}

#[derive(Clone, Debug)]
struct Node {
    head: Vec<Term>,
    atoms: Vec<Atom>,
    diseqs: BTreeSet<(Term, Term)>,
    next_fresh: u64,
    /// Introduction index of fresh variables; original variables rank 0.
    born: BTreeMap<Term, u64>,
}

impl Node {
    fn rank(&self, t: &Term) -> u64 {
        match t {
            Term::Null(n) => *n,
            Term::Var(_) => self.born.get(t).copied().unwrap_or(0),
            Term::Const(_) => 0,
        }
    }

    fn var_names(&self) -> BTreeSet<Sym> {
        self.head
            .iter()
            .chain(self.atoms.iter().flat_map(|a| a.args.iter()))
            .filter_map(|t| t.var_name().cloned())
            .collect()
    }
}

struct Engine<'a> {
    kind: Kind,
    deps: &'a [Dependency],
    budget: usize,
}

impl<'a> Engine<'a> {
    fn satisfied(&self, node: &Node, branch: &Branch, h: &Mapping) -> bool {
        match branch {
            Branch::Equalities(pairs) => pairs.iter().all(|(a, b)| apply(h, a) == apply(h, b)),
            Branch::Existential { atoms, .. } => {
                !find_homomorphisms(atoms, &node.atoms, Mode::First, Some(h)).is_empty()
            }
            Branch::Diseq(a, b) => {
                let (x, y) = (apply(h, a), apply(h, b));
                (x.is_const() && y.is_const() && x != y) || node.diseqs.contains(&diseq_pair(x, y))
            }
            Branch::False => false,
        }
    }

    fn find_step(&self, node: &Node) -> Option<(usize, Mapping)> {
        for (di, d) in self.deps.iter().enumerate() {
            let mut found = None;
            for_each_homomorphism(&d.antecedent, &node.atoms, &Mapping::new(), |h| {
                if d.branches.iter().any(|b| self.satisfied(node, b, h)) {
                    ControlFlow::Continue(())
                } else {
                    found = Some(h.clone());
                    ControlFlow::Break(())
                }
            });
            if let Some(h) = found {
                return Some((di, h));
            }
        }
        None
    }

    fn fresh(&self, node: &mut Node, taken: &mut BTreeSet<Sym>) -> Term {
        loop {
            let n = node.next_fresh;
            node.next_fresh += 1;
            match self.kind {
                Kind::Instance => return Term::Null(n),
                Kind::Query => {
                    let name: Sym = format!("N{n}").into();
                    if taken.insert(name.clone()) {
                        let t = Term::Var(name);
                        node.born.insert(t.clone(), n);
                        return t;
                    }
                }
            }
        }
    }

    fn apply_branch(&self, node: &Node, branch: &Branch, h: &Mapping) -> Option<Node> {
        let mut child = node.clone();
        match branch {
            Branch::False => return None,
            Branch::Diseq(a, b) => {
                let (x, y) = (apply(h, a), apply(h, b));
                if x == y {
                    return None;
                }
                child.diseqs.insert(diseq_pair(x, y));
            }
            Branch::Existential { vars, atoms } => {
                let mut ext = h.clone();
                let mut taken = child.var_names();
                for v in vars {
                    let t = self.fresh(&mut child, &mut taken);
                    ext.insert(Term::Var(v.clone()), t);
                }
                child.atoms.extend(atoms.iter().map(|a| apply_atom(&ext, a)));
            }
            Branch::Equalities(pairs) => {
                let mut subst: BTreeMap<Term, Term> = BTreeMap::new();
                let find = |subst: &BTreeMap<Term, Term>, mut t: Term| {
                    while let Some(n) = subst.get(&t) {
                        t = n.clone();
                    }
                    t
                };
                for (a, b) in pairs {
                    let x = find(&subst, apply(h, a));
                    let y = find(&subst, apply(h, b));
                    if x == y {
                        continue;
                    }
                    let (from, to) = match (x.is_const(), y.is_const()) {
                        (true, true) => return None,
                        (true, false) => (y, x),
                        (false, true) => (x, y),
                        (false, false) => {
                            if (node.rank(&x), &x) > (node.rank(&y), &y) {
                                (x, y)
                            } else {
                                (y, x)
                            }
                        }
                    };
                    subst.insert(from, to);
                }
                let image = |t: &Term| find(&subst, t.clone());
                child.head = child.head.iter().map(image).collect();
                child.atoms = child.atoms.iter().map(|a| a.map_terms(image)).collect();
                let mut diseqs = BTreeSet::new();
                for (a, b) in &child.diseqs {
                    let (x, y) = (image(a), image(b));
                    if x == y {
                        return None;
                    }
                    if !(x.is_const() && y.is_const()) {
                        diseqs.insert(diseq_pair(x, y));
                    }
                }
                child.diseqs = diseqs;
                for k in subst.keys() {
                    child.born.remove(k);
                }
            }
        }
        self.tidy(&mut child);
        Some(child)
    }

    fn tidy(&self, node: &mut Node) {
        match self.kind {
            Kind::Query => {
                let mut seen = BTreeSet::new();
                node.atoms.retain(|a| seen.insert(a.clone()));
            }
            Kind::Instance => {
                node.atoms.sort();
                node.atoms.dedup();
            }
        }
    }

    fn content(&self, node: &Node, name: &Sym) -> NodeContent {
        match self.kind {
            Kind::Query => NodeContent::Query(Rule::raw(
                name.clone(),
                node.head.clone(),
                node.atoms.clone(),
                node.diseqs.clone(),
            )),
            Kind::Instance => NodeContent::Instance(Instance::from_facts(node.atoms.iter().cloned())),
        }
    }

    /// Depth-first construction; returns non-ε leaves in tree order.
    fn run(&self, mut root: Node, name: &Sym) -> Result<(Vec<Node>, ChaseTree)> {
        self.tidy(&mut root);
        let mut tree = ChaseTree::default();
        tree.nodes.push(TreeNode {
            parent: None,
            edge: None,
            content: self.content(&root, name),
            children: Vec::new(),
            depth: 0,
            same_as: None,
        });
        let mut expanded = BTreeMap::new();
        let mut stack: Vec<(usize, Node)> = vec![(0, root)];
        let mut leaves = Vec::new();
        while let Some((id, node)) = stack.pop() {
            if self.kind == Kind::Query {
                let key = canonical_rule_key(&Rule::raw(
                    name.clone(),
                    node.head.clone(),
                    node.atoms.clone(),
                    node.diseqs.clone(),
                ));
                if let Some(&first) = expanded.get(&key) {
                    tree.nodes[id].same_as = Some(first);
                    continue;
                }
                expanded.insert(key, id);
            }
            let Some((di, h)) = self.find_step(&node) else {
                leaves.push((id, node));
                continue;
            };
            let depth = tree.nodes[id].depth + 1;
            if depth > self.budget {
                return Err(Error::BudgetExceeded(self.budget));
            }
            let d = &self.deps[di];
            let mut children: Vec<(Option<usize>, Option<Node>)> = d
                .branches
                .iter()
                .enumerate()
                .filter_map(|(bi, b)| self.apply_branch(&node, b, &h).map(|n| (Some(bi), Some(n))))
                .collect();
            if children.is_empty() {
                children.push((None, None));
            }
            let mut pending = Vec::new();
            for (branch, child) in children {
                let cid = tree.nodes.len();
                tree.nodes.push(TreeNode {
                    parent: Some(id),
                    edge: Some(EdgeLabel {
                        dependency: d.label.clone(),
                        mapping: h.clone(),
                        branch,
                    }),
                    content: child.as_ref().map_or(NodeContent::Failed, |n| self.content(n, name)),
                    children: Vec::new(),
                    depth,
                    same_as: None,
                });
                tree.nodes[id].children.push(cid);
                if let Some(n) = child {
                    pending.push((cid, n));
                }
            }
            stack.extend(pending.into_iter().rev());
        }
        leaves.sort_by_key(|(id, _)| *id);
        Ok((leaves.into_iter().map(|(_, n)| n).collect(), tree))
    }
}

/// Variables renamed in first-occurrence order, for syntactic leaf dedup.
fn canonical_rule_key(r: &Rule) -> (Vec<Term>, Vec<Atom>, BTreeSet<(Term, Term)>) {
    let mut names: BTreeMap<Term, Term> = BTreeMap::new();
    let mut image = |t: &Term| {
        if t.is_var() {
            let n = names.len();
            names
                .entry(t.clone())
                .or_insert_with(|| Term::Var(format!("X{n}").into()))
                .clone()
        } else {
            t.clone()
        }
    };
    let head = r.head().iter().map(&mut image).collect();
    let body: Vec<Atom> = r.body().iter().map(|a| a.map_terms(&mut image)).collect();
    let diseqs = r.diseqs().iter().map(|(a, b)| diseq_pair(image(a), image(b))).collect();
    (head, body, diseqs)
}

/// Nulls renumbered in first-occurrence order over the sorted facts.
pub fn canonical_instance(i: &Instance) -> Instance {
    let mut names: BTreeMap<u64, u64> = BTreeMap::new();
    i.map_terms(|t| match t {
        Term::Null(n) => {
            let next = names.len() as u64 + 1;
            Term::Null(*names.entry(*n).or_insert(next))
        }
        other => other.clone(),
    })
}

/// Chases a query. The result is the union of the non-ε leaves with
/// syntactic duplicates removed; it is trivial when every leaf is ε.
pub fn chase_query(q: &Rule, deps: &[Dependency], budget: usize) -> Result<(UcqQuery, ChaseTree)> {
    let root = Node {
        head: q.head().to_vec(),
        atoms: q.body().to_vec(),
        diseqs: q.diseqs().clone(),
        next_fresh: 1,
        born: BTreeMap::new(),
    };
    let engine = Engine {
        kind: Kind::Query,
        deps,
        budget,
    };
    if q.is_unsatisfiable() {
        return Ok((UcqQuery::trivial(q.name(), q.arity()), ChaseTree::failed()));
    }
    let (leaves, tree) = engine.run(root, q.name())?;
    let mut seen = BTreeSet::new();
    let mut components = Vec::new();
    for n in leaves {
        let r = Rule::raw(q.name().clone(), n.head, n.atoms, n.diseqs);
        if seen.insert(canonical_rule_key(&r)) {
            components.push(r);
        }
    }
    Ok((
        UcqQuery {
            name: q.name().clone(),
            arity: q.arity(),
            components,
        },
        tree,
    ))
}

/// Chases an instance, treating its nulls as variables. Returns the
/// non-ε leaves, deduplicated after canonical null renumbering.
pub fn chase_instance(i: &Instance, deps: &[Dependency], budget: usize) -> Result<(Vec<Instance>, ChaseTree)> {
    let root = Node {
        head: Vec::new(),
        atoms: i.iter().cloned().collect(),
        diseqs: BTreeSet::new(),
        next_fresh: i.nulls().last().map_or(1, |n| n + 1),
        born: BTreeMap::new(),
    };
    let engine = Engine {
        kind: Kind::Instance,
        deps,
        budget,
    };
    let (leaves, tree) = engine.run(root, &Sym::from(""))?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for n in leaves {
        let inst = Instance::from_facts(n.atoms);
        if seen.insert(canonical_instance(&inst)) {
            out.push(inst);
        }
    }
    Ok((out, tree))
}

/// Chase of MV with the source-to-target tgds, and with Σ when
/// `with_sigma`, restricted to the base schema. `None` when a step fails.
pub fn source_chase(s: &Setting, with_sigma: bool, budget: Option<usize>) -> Result<Option<Instance>> {
    let (mut deps, _) = build_instance_deps(s);
    if with_sigma {
        deps.extend(s.sigma.iter().cloned());
    }
    let budget = budget.unwrap_or_else(|| default_budget(s.mv.len(), s.mv.len()));
    let (leaves, _) = chase_instance(&s.mv, &deps, budget)?;
    Ok(leaves.into_iter().next().map(|j| j.restrict(|p| !s.is_view(p))))
}

/// The canonical universal solution of the data-exchange setting induced by
/// `s`, or `None` when no solution exists.
pub fn canonical_universal_solution(s: &Setting, budget: Option<usize>) -> Result<Option<Instance>> {
    require_weakly_acyclic(&s.sigma)?;
    source_chase(s, true, budget)
}
