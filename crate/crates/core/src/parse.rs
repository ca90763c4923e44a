//! The `.mvs` text format: parsing with diagnostics, and canonical rendering.
//!
//! A document is a sequence of statements, each ending in `.`:
//!
//! ```text
//! schema E/3 H/1 O/2.
//! dep sigma: E(X,Y,Z), H(Y) -> exists S . O(X,S).
//! view U(X) :- H(X).
//! fact U(d).
//! query Q(X,Z) :- E(X,Y,Z), O(X,S).
//! ```
//!
//! Identifiers starting with an uppercase letter are variables; lowercase
//! identifiers, integers and quoted strings are constants. `?name` writes a
//! variable whose name is not capitalized, and `_n<id>` a labeled null
//! (accepted only in instances). `#` starts a comment. The full grammar is
//! in `docs/grammar.md`.
//!
//! Parsing never stops at the first error: a statement that fails is
//! skipped up to its terminating `.`, and every problem is reported as a
//! [`Diagnostic`] with its byte offset and 1-based line and column.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::model::{make_rule, Atom, Branch, Dependency, Instance, Rule, Schema, Setting, Sym, Term, UcqQuery};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum DiagnosticKind {
    #[error("syntax error: expected {expected}")]
    SyntaxError { expected: String },
    #[error("arity mismatch for {pred}: expected {expected}, found {found}")]
    ArityMismatch {
        pred: String,
        expected: usize,
        found: usize,
    },
    #[error("unknown predicate {0}")]
    UnknownPredicate(String),
    #[error("constant {0} is not allowed in a dependency")]
    ConstantInDependency(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub offset: usize,
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.kind)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct Span {
    offset: usize,
    line: usize,
    col: usize,
}

impl Span {
    fn diag(self, kind: DiagnosticKind) -> Diagnostic {
        Diagnostic {
            kind,
            offset: self.offset,
            line: self.line,
            col: self.col,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    QVar(String),
    Null(u64),
    Str(String),
    Int(String),
    LParen,
    RParen,
    Comma,
    Dot,
    ColonDash,
    Colon,
    Arrow,
    Neq,
    Eq,
    Bar,
    Slash,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) | Tok::Int(s) => write!(f, "`{s}`"),
            Tok::QVar(s) => write!(f, "`?{s}`"),
            Tok::Null(n) => write!(f, "`_n{n}`"),
            Tok::Str(s) => write!(f, "string {s:?}"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::ColonDash => f.write_str("`:-`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Arrow => f.write_str("`->`"),
            Tok::Neq => f.write_str("`!=`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Bar => f.write_str("`|`"),
            Tok::Slash => f.write_str("`/`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

fn lex(text: &str, diags: &mut Vec<Diagnostic>) -> Vec<(Tok, Span)> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, n: usize| {
        for _ in 0..n {
            if chars[*i].1 == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        }
    };
    while i < chars.len() {
        let (off, c) = chars[i];
        let span = Span { offset: off, line, col };
        let next = chars.get(i + 1).map(|x| x.1);
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i].1 != '\n' {
                advance(&mut i, &mut line, &mut col, 1);
            }
            continue;
        }
        let word_end = |start: usize| {
            let mut j = start;
            while j < chars.len() && crate::model::is_ident_char(chars[j].1) {
                j += 1;
            }
            j
        };
        let slice = |a: usize, b: usize| chars[a..b].iter().map(|x| x.1).collect::<String>();
        let (tok, len) = match c {
            '(' => (Tok::LParen, 1),
            ')' => (Tok::RParen, 1),
            ',' => (Tok::Comma, 1),
            '.' => (Tok::Dot, 1),
            '|' => (Tok::Bar, 1),
            '/' => (Tok::Slash, 1),
            '=' => (Tok::Eq, 1),
            ':' if next == Some('-') => (Tok::ColonDash, 2),
            ':' => (Tok::Colon, 1),
            '-' if next == Some('>') => (Tok::Arrow, 2),
            '!' if next == Some('=') => (Tok::Neq, 2),
            '?' if next.is_some_and(crate::model::is_ident_char) => {
                let end = word_end(i + 1);
                (Tok::QVar(slice(i + 1, end)), end - i)
            }
            '"' => {
                let mut j = i + 1;
                let mut s = String::new();
                let mut closed = false;
                while j < chars.len() {
                    match chars[j].1 {
                        '"' => {
                            closed = true;
                            j += 1;
                            break;
                        }
                        '\\' if j + 1 < chars.len() => {
                            s.push(match chars[j + 1].1 {
                                'n' => '\n',
                                other => other,
                            });
                            j += 2;
                        }
                        other => {
                            s.push(other);
                            j += 1;
                        }
                    }
                }
                if !closed {
                    diags.push(span.diag(DiagnosticKind::SyntaxError {
                        expected: "closing `\"`".into(),
                    }));
                }
                (Tok::Str(s), j - i)
            }
            c if c.is_ascii_digit() => {
                let end = word_end(i);
                let word = slice(i, end);
                if word.chars().all(|c| c.is_ascii_digit()) {
                    (Tok::Int(word), end - i)
                } else {
                    diags.push(span.diag(DiagnosticKind::SyntaxError {
                        expected: "an integer".into(),
                    }));
                    let n = end - i;
                    advance(&mut i, &mut line, &mut col, n);
                    continue;
                }
            }
            '_' => {
                let end = word_end(i);
                let word = slice(i, end);
                match word.strip_prefix("_n").and_then(|d| d.parse::<u64>().ok()) {
                    Some(n) if word[2..].chars().all(|c| c.is_ascii_digit()) => (Tok::Null(n), end - i),
                    _ => {
                        diags.push(span.diag(DiagnosticKind::SyntaxError {
                            expected: "a null of the form `_n<id>`".into(),
                        }));
                        let n = end - i;
                        advance(&mut i, &mut line, &mut col, n);
                        continue;
                    }
                }
            }
            c if c.is_alphabetic() => {
                let end = word_end(i);
                (Tok::Ident(slice(i, end)), end - i)
            }
            other => {
                diags.push(span.diag(DiagnosticKind::SyntaxError {
                    expected: format!("a token, found `{other}`"),
                }));
                advance(&mut i, &mut line, &mut col, 1);
                continue;
            }
        };
        out.push((tok, span));
        advance(&mut i, &mut line, &mut col, len);
    }
    let end = Span {
        offset: text.len(),
        line,
        col,
    };
    out.push((Tok::Eof, end));
    out
}

// ---------------------------------------------------------------------------
// Syntax tree

#[derive(Clone, Debug)]
struct AstAtom {
    pred: String,
    args: Vec<Term>,
    span: Span,
}

#[derive(Clone, Debug)]
enum AstBranch {
    Atoms(Vec<String>, Vec<AstAtom>),
    Equalities(Vec<(Term, Term)>),
    Diseq(Term, Term),
    False,
}

#[derive(Clone, Debug)]
enum Lit {
    Atom(AstAtom),
    Diseq(Term, Term),
}

#[derive(Clone, Debug)]
enum Stmt {
    Schema(Vec<(String, usize, Span)>),
    Dep {
        label: Option<String>,
        ante: Vec<AstAtom>,
        branches: Vec<AstBranch>,
    },
    View {
        name: String,
        head: Vec<Term>,
        body: Vec<Lit>,
    },
    Fact(AstAtom),
    /// `body == None` is the trivial query `:- false`.
    Query {
        name: String,
        head: Vec<Term>,
        body: Option<Vec<Lit>>,
    },
}

const KEYWORDS: [&str; 5] = ["schema", "dep", "view", "fact", "query"];

/// Body atoms and disequalities of a rule.
type Body = (Vec<Atom>, Vec<(Term, Term)>);

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
}

type PResult<T> = Result<T, Diagnostic>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, Span) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, expected: &str) -> PResult<T> {
        Err(self.span().diag(DiagnosticKind::SyntaxError {
            expected: format!("{expected}, found {}", self.peek()),
        }))
    }

    fn expect(&mut self, tok: Tok, what: &str) -> PResult<Span> {
        if *self.peek() == tok {
            Ok(self.bump().1)
        } else {
            self.error(what)
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    /// Skips past the `.` that ends the current statement.
    fn recover(&mut self) {
        loop {
            match self.peek() {
                Tok::Eof => return,
                Tok::Dot => {
                    self.bump();
                    let next_starts = match self.peek() {
                        Tok::Eof => true,
                        Tok::Ident(s) => KEYWORDS.contains(&s.as_str()),
                        _ => false,
                    };
                    if next_starts {
                        return;
                    }
                }
                _ => {
                    self.bump();
                }
            }
        }
    }

    fn statements(&mut self, diags: &mut Vec<Diagnostic>) -> Vec<(Stmt, Span)> {
        let mut out = Vec::new();
        while *self.peek() != Tok::Eof {
            let span = self.span();
            match self.statement() {
                Ok(s) => out.push((s, span)),
                Err(d) => {
                    diags.push(d);
                    self.recover();
                }
            }
        }
        out
    }

    fn statement(&mut self) -> PResult<Stmt> {
        let kw = match self.peek() {
            Tok::Ident(s) if KEYWORDS.contains(&s.as_str()) => s.clone(),
            _ => return self.error("`schema`, `dep`, `view`, `fact` or `query`"),
        };
        self.bump();
        let stmt = match kw.as_str() {
            "schema" => {
                let mut rels = Vec::new();
                while *self.peek() != Tok::Dot {
                    let span = self.span();
                    let name = self.ident("a relation name")?;
                    self.expect(Tok::Slash, "`/`")?;
                    let arity = match self.bump() {
                        (Tok::Int(n), _) => n.parse::<usize>().map_err(|_| {
                            span.diag(DiagnosticKind::SyntaxError {
                                expected: "a small arity".into(),
                            })
                        })?,
                        _ => {
                            self.pos -= 1;
                            return self.error("an arity");
                        }
                    };
                    rels.push((name, arity, span));
                }
                Stmt::Schema(rels)
            }
            "dep" => {
                let label = if matches!(self.peek(), Tok::Ident(_)) && *self.peek_at(1) == Tok::Colon {
                    let l = self.ident("a label")?;
                    self.bump();
                    Some(l)
                } else {
                    None
                };
                let mut ante = vec![self.atom()?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    ante.push(self.atom()?);
                }
                self.expect(Tok::Arrow, "`->`")?;
                let mut branches = vec![self.branch()?];
                while *self.peek() == Tok::Bar {
                    self.bump();
                    branches.push(self.branch()?);
                }
                Stmt::Dep { label, ante, branches }
            }
            "view" => {
                let (name, head) = self.head()?;
                self.expect(Tok::ColonDash, "`:-`")?;
                let body = self.literals()?;
                Stmt::View { name, head, body }
            }
            "fact" => {
                let span = self.span();
                let (pred, args) = self.head()?;
                Stmt::Fact(AstAtom { pred, args, span })
            }
            _ => {
                let (name, head) = self.head()?;
                self.expect(Tok::ColonDash, "`:-`")?;
                let body = if self.at_keyword("false") && *self.peek_at(1) == Tok::Dot {
                    self.bump();
                    None
                } else if self.at_keyword("true") && *self.peek_at(1) == Tok::Dot {
                    self.bump();
                    Some(Vec::new())
                } else {
                    Some(self.literals()?)
                };
                Stmt::Query { name, head, body }
            }
        };
        self.expect(Tok::Dot, "`.`")?;
        Ok(stmt)
    }

    fn ident(&mut self, what: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.error(what),
        }
    }

    fn term(&mut self) -> PResult<Term> {
        let t = match self.peek().clone() {
            Tok::Ident(s) if s.starts_with(|c: char| c.is_uppercase()) => Term::Var(s.into()),
            Tok::Ident(s) if s.starts_with(|c: char| c.is_lowercase()) => Term::Const(s.into()),
            Tok::QVar(s) => Term::Var(s.into()),
            Tok::Int(s) | Tok::Str(s) => Term::Const(s.into()),
            Tok::Null(n) => Term::Null(n),
            _ => return self.error("a term"),
        };
        self.bump();
        Ok(t)
    }

    fn args(&mut self) -> PResult<Vec<Term>> {
        self.expect(Tok::LParen, "`(`")?;
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            args.push(self.term()?);
            while *self.peek() == Tok::Comma {
                self.bump();
                args.push(self.term()?);
            }
        }
        self.expect(Tok::RParen, "`)` or `,`")?;
        Ok(args)
    }

    fn atom(&mut self) -> PResult<AstAtom> {
        let span = self.span();
        let pred = self.ident("a predicate")?;
        let args = self.args()?;
        Ok(AstAtom { pred, args, span })
    }

    fn head(&mut self) -> PResult<(String, Vec<Term>)> {
        let name = self.ident("a head predicate")?;
        let args = if *self.peek() == Tok::LParen {
            self.args()?
        } else {
            Vec::new()
        };
        Ok((name, args))
    }

    fn starts_atom(&self) -> bool {
        matches!(self.peek(), Tok::Ident(_)) && *self.peek_at(1) == Tok::LParen
    }

    fn literal(&mut self) -> PResult<Lit> {
        if self.starts_atom() {
            return Ok(Lit::Atom(self.atom()?));
        }
        let a = self.term()?;
        self.expect(Tok::Neq, "an atom or `!=`")?;
        let b = self.term()?;
        Ok(Lit::Diseq(a, b))
    }

    fn literals(&mut self) -> PResult<Vec<Lit>> {
        let mut out = vec![self.literal()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            out.push(self.literal()?);
        }
        Ok(out)
    }

    fn branch(&mut self) -> PResult<AstBranch> {
        if self.at_keyword("false") && matches!(self.peek_at(1), Tok::Dot | Tok::Bar) {
            self.bump();
            return Ok(AstBranch::False);
        }
        if self.at_keyword("exists") && !matches!(self.peek_at(1), Tok::LParen) {
            self.bump();
            let mut vars = Vec::new();
            loop {
                match self.term()? {
                    Term::Var(v) => vars.push(v.to_string()),
                    _ => {
                        self.pos -= 1;
                        return self.error("an existential variable");
                    }
                }
                if *self.peek() != Tok::Comma {
                    break;
                }
                self.bump();
            }
            self.expect(Tok::Dot, "`.` after the existential variables")?;
            let mut atoms = vec![self.atom()?];
            while *self.peek() == Tok::Comma {
                self.bump();
                atoms.push(self.atom()?);
            }
            return Ok(AstBranch::Atoms(vars, atoms));
        }
        if self.starts_atom() {
            let mut atoms = vec![self.atom()?];
            while *self.peek() == Tok::Comma {
                self.bump();
                atoms.push(self.atom()?);
            }
            return Ok(AstBranch::Atoms(Vec::new(), atoms));
        }
        let a = self.term()?;
        match self.peek() {
            Tok::Neq => {
                self.bump();
                let b = self.term()?;
                Ok(AstBranch::Diseq(a, b))
            }
            Tok::Eq => {
                self.bump();
                let mut pairs = vec![(a, self.term()?)];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    let x = self.term()?;
                    self.expect(Tok::Eq, "`=`")?;
                    pairs.push((x, self.term()?));
                }
                Ok(AstBranch::Equalities(pairs))
            }
            _ => self.error("`=` or `!=`"),
        }
    }
}

fn syntax(text: &str) -> (Vec<(Stmt, Span)>, Vec<Diagnostic>) {
    let mut diags = Vec::new();
    let toks = lex(text, &mut diags);
    let mut p = Parser { toks, pos: 0 };
    let stmts = p.statements(&mut diags);
    diags.sort_by_key(|d| d.offset);
    (stmts, diags)
}

// ---------------------------------------------------------------------------
// Semantic checks

struct Resolver {
    base: BTreeMap<String, usize>,
    views: BTreeMap<String, usize>,
    diags: Vec<Diagnostic>,
}

impl Resolver {
    /// Checks an atom over the base schema; returns it when valid.
    fn base_atom(&mut self, a: &AstAtom) -> Option<Atom> {
        match self.base.get(&a.pred) {
            None => {
                self.diags
                    .push(a.span.diag(DiagnosticKind::UnknownPredicate(a.pred.clone())));
                None
            }
            Some(&n) if n != a.args.len() => {
                self.diags.push(a.span.diag(DiagnosticKind::ArityMismatch {
                    pred: a.pred.clone(),
                    expected: n,
                    found: a.args.len(),
                }));
                None
            }
            Some(_) => Some(Atom::new(&a.pred, a.args.clone())),
        }
    }

    fn body(&mut self, lits: &[Lit]) -> Option<Body> {
        let mut atoms = Vec::new();
        let mut diseqs = Vec::new();
        let mut ok = true;
        for l in lits {
            match l {
                Lit::Atom(a) => match self.base_atom(a) {
                    Some(a) => atoms.push(a),
                    None => ok = false,
                },
                Lit::Diseq(a, b) => diseqs.push((a.clone(), b.clone())),
            }
        }
        ok.then_some((atoms, diseqs))
    }
}

fn invalid(span: Span, msg: impl Into<String>) -> Diagnostic {
    span.diag(DiagnosticKind::Invalid(msg.into()))
}

fn no_nulls(terms: &[Term], span: Span, diags: &mut Vec<Diagnostic>) -> bool {
    match terms.iter().find(|t| t.is_null()) {
        Some(t) => {
            diags.push(invalid(span, format!("labeled null {t} is only allowed in instances")));
            false
        }
        None => true,
    }
}

/// Parses a setting. The setting holds every statement that checked out;
/// `diagnostics` is empty iff the whole text is valid.
pub fn parse_setting(text: &str) -> (Setting, Vec<Diagnostic>) {
    let (stmts, mut diags) = syntax(text);
    let mut r = Resolver {
        base: BTreeMap::new(),
        views: BTreeMap::new(),
        diags: Vec::new(),
    };
    let mut setting = Setting::default();
    let mut schema = Schema::new();

    for (stmt, _) in &stmts {
        if let Stmt::Schema(rels) = stmt {
            for (name, arity, span) in rels {
                match r.base.get(name) {
                    Some(&n) if n != *arity => r.diags.push(span.diag(DiagnosticKind::ArityMismatch {
                        pred: name.clone(),
                        expected: n,
                        found: *arity,
                    })),
                    Some(_) => {}
                    None => {
                        r.base.insert(name.clone(), *arity);
                        schema.add(name, *arity);
                    }
                }
            }
        }
    }
    for (stmt, span) in &stmts {
        if let Stmt::View { name, head, .. } = stmt {
            if r.base.contains_key(name) {
                r.diags
                    .push(invalid(*span, format!("view {name} clashes with a base relation")));
            } else if r.views.insert(name.clone(), head.len()).is_some() {
                r.diags.push(invalid(*span, format!("view {name} is defined twice")));
            }
        }
    }
    setting.schema = schema;

    let mut dep_index = 0;
    for (stmt, span) in &stmts {
        match stmt {
            Stmt::Schema(_) => {}
            Stmt::Dep { label, ante, branches } => {
                dep_index += 1;
                if let Some(d) = resolve_dep(&mut r, label.as_deref(), dep_index, ante, branches, *span) {
                    if !(d.is_tgd() || d.is_egd()) {
                        r.diags
                            .push(invalid(*span, "dependencies in a setting must be tgds or egds"));
                    } else if let Some(c) = d.constants().into_iter().next() {
                        r.diags
                            .push(span.diag(DiagnosticKind::ConstantInDependency(c.to_string())));
                    } else {
                        setting.sigma.push(d);
                    }
                }
            }
            Stmt::View { name, head, body } => {
                if setting.views.contains_key(name.as_str()) || r.base.contains_key(name) {
                    continue;
                }
                if !no_nulls(head, *span, &mut r.diags) {
                    continue;
                }
                let Some((atoms, diseqs)) = r.body(body) else {
                    continue;
                };
                if !diseqs.is_empty() {
                    r.diags
                        .push(invalid(*span, format!("view {name} may not contain disequalities")));
                    continue;
                }
                if atoms.is_empty() {
                    r.diags.push(invalid(*span, format!("view {name} has an empty body")));
                    continue;
                }
                match make_rule(name, head.clone(), atoms, []) {
                    Ok(rule) => {
                        setting.views.insert(name.as_str().into(), rule);
                    }
                    Err(e) => r.diags.push(invalid(*span, e.to_string())),
                }
            }
            Stmt::Fact(a) => match r.views.get(&a.pred) {
                None if r.base.contains_key(&a.pred) => r.diags.push(invalid(
                    a.span,
                    format!("fact over base relation {}; facts must be view answers", a.pred),
                )),
                None => r
                    .diags
                    .push(a.span.diag(DiagnosticKind::UnknownPredicate(a.pred.clone()))),
                Some(&n) if n != a.args.len() => r.diags.push(a.span.diag(DiagnosticKind::ArityMismatch {
                    pred: a.pred.clone(),
                    expected: n,
                    found: a.args.len(),
                })),
                Some(_) => {
                    if a.args.iter().all(Term::is_const) {
                        setting.mv.insert(Atom::new(&a.pred, a.args.clone()));
                    } else {
                        r.diags.push(invalid(a.span, "view facts must be ground"));
                    }
                }
            },
            Stmt::Query { name, head, body } => {
                if setting.queries.contains_key(name.as_str()) {
                    r.diags.push(invalid(*span, format!("query {name} is defined twice")));
                    continue;
                }
                let Some(body) = body else {
                    r.diags.push(invalid(*span, "a setting query may not be `false`"));
                    continue;
                };
                if !no_nulls(head, *span, &mut r.diags) {
                    continue;
                }
                let Some((atoms, diseqs)) = r.body(body) else {
                    continue;
                };
                match make_rule(name, head.clone(), atoms, diseqs) {
                    Ok(rule) => {
                        setting.queries.insert(name.as_str().into(), rule);
                    }
                    Err(e) => r.diags.push(invalid(*span, e.to_string())),
                }
            }
        }
    }
    diags.extend(r.diags);
    diags.sort_by_key(|d| d.offset);
    (setting, diags)
}

fn resolve_dep(
    r: &mut Resolver,
    label: Option<&str>,
    index: usize,
    ante: &[AstAtom],
    branches: &[AstBranch],
    span: Span,
) -> Option<Dependency> {
    let mut ok = true;
    let mut atoms = Vec::new();
    for a in ante {
        match r.base_atom(a) {
            Some(a) => atoms.push(a),
            None => ok = false,
        }
    }
    let mut out = Vec::new();
    for b in branches {
        out.push(match b {
            AstBranch::False => Branch::False,
            AstBranch::Diseq(a, b) => Branch::Diseq(a.clone(), b.clone()),
            AstBranch::Equalities(p) => Branch::Equalities(p.clone()),
            AstBranch::Atoms(vars, xs) => {
                let mut atoms = Vec::new();
                for a in xs {
                    match r.base_atom(a) {
                        Some(a) => atoms.push(a),
                        None => ok = false,
                    }
                }
                Branch::Existential {
                    vars: vars.iter().map(|v| Sym::from(v.as_str())).collect(),
                    atoms,
                }
            }
        });
    }
    if !ok {
        return None;
    }
    let label = label.map_or_else(|| format!("sigma_{index}"), str::to_string);
    match Dependency::new(&label, atoms, out) {
        Ok(d) => Some(d),
        Err(e) => {
            r.diags.push(invalid(span, e.to_string()));
            None
        }
    }
}

/// Parses `query` statements into a union. All statements must share one
/// name and arity; `query Q :- false.` alone gives the trivial query.
/// Predicates are not checked against a schema.
pub fn parse_ucq(text: &str) -> Result<UcqQuery, Vec<Diagnostic>> {
    let (stmts, mut diags) = syntax(text);
    let mut name: Option<String> = None;
    let mut arity: Option<usize> = None;
    let mut components: Vec<Rule> = Vec::new();
    let mut trivial = false;
    for (stmt, span) in stmts {
        let Stmt::Query { name: n, head, body } = stmt else {
            diags.push(invalid(span, "expected only query statements"));
            continue;
        };
        if name.get_or_insert_with(|| n.clone()) != &n {
            diags.push(invalid(span, "all components must share one name"));
            continue;
        }
        match body {
            None => trivial = true,
            Some(body) => {
                if *arity.get_or_insert(head.len()) != head.len() {
                    diags.push(invalid(span, "all components must share one arity"));
                    continue;
                }
                let mut atoms = Vec::new();
                let mut diseqs = Vec::new();
                for l in body {
                    match l {
                        Lit::Atom(a) => atoms.push(Atom::new(&a.pred, a.args)),
                        Lit::Diseq(a, b) => diseqs.push((a, b)),
                    }
                }
                match make_rule(&n, head, atoms, diseqs) {
                    Ok(r) => components.push(r),
                    Err(e) => diags.push(invalid(span, e.to_string())),
                }
            }
        }
    }
    if trivial && !components.is_empty() {
        diags.push(invalid(
            Span::default(),
            "a trivial query may not have other components",
        ));
    }
    if !diags.is_empty() {
        return Err(diags);
    }
    let Some(name) = name else {
        return Err(vec![invalid(Span::default(), "no query statement")]);
    };
    Ok(UcqQuery {
        name: name.into(),
        arity: arity.unwrap_or(0),
        components,
    })
}

/// Parses a single `query` statement without schema checks.
pub fn parse_rule(text: &str) -> Result<Rule, Vec<Diagnostic>> {
    let u = parse_ucq(text)?;
    match <[Rule; 1]>::try_from(u.components) {
        Ok([r]) => Ok(r),
        Err(_) => Err(vec![invalid(Span::default(), "expected exactly one rule")]),
    }
}

/// Parses `fact` statements into an instance; nulls are allowed.
pub fn parse_instance(text: &str) -> Result<Instance, Vec<Diagnostic>> {
    let (stmts, mut diags) = syntax(text);
    let mut facts = BTreeSet::new();
    for (stmt, span) in stmts {
        match stmt {
            Stmt::Fact(a) if a.args.iter().all(|t| !t.is_var()) => {
                facts.insert(Atom::new(&a.pred, a.args));
            }
            Stmt::Fact(a) => diags.push(invalid(a.span, "instance facts may not contain variables")),
            _ => diags.push(invalid(span, "expected only fact statements")),
        }
    }
    if diags.is_empty() {
        Ok(Instance::from_facts(facts))
    } else {
        Err(diags)
    }
}

// ---------------------------------------------------------------------------
// Rendering

/// Canonical text of a model value.
pub trait Render {
    fn render(&self) -> String;
}

impl Render for Instance {
    fn render(&self) -> String {
        self.iter().map(|a| format!("fact {a}.\n")).collect()
    }
}

impl Render for Rule {
    fn render(&self) -> String {
        format!("query {self}.")
    }
}

impl Render for UcqQuery {
    fn render(&self) -> String {
        if self.is_trivial() {
            return format!("query {} :- false.", self.name);
        }
        self.components
            .iter()
            .map(|r| r.render())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

impl Render for Dependency {
    fn render(&self) -> String {
        format!("dep {self}.")
    }
}

impl Render for Setting {
    fn render(&self) -> String {
        let mut out = String::new();
        if !self.schema.is_empty() {
            let rels: Vec<String> = self.schema.iter().map(|(p, n)| format!("{p}/{n}")).collect();
            out.push_str(&format!("schema {}.\n", rels.join(" ")));
        }
        for d in &self.sigma {
            out.push_str(&d.render());
            out.push('\n');
        }
        for (name, v) in &self.views {
            out.push_str(&format!("view {}.\n", v.with_name(name)));
        }
        out.push_str(&self.mv.render());
        for q in self.queries.values() {
            out.push_str(&q.render());
            out.push('\n');
        }
        out
    }
}
