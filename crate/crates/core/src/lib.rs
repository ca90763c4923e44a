//! Certain answers and conditional containment for materialized views
//! under weakly acyclic dependencies, with closed-world view semantics.
//!
//! Modules, bottom to top:
//!
//! - [`model`]: terms, atoms, rules, dependencies, instances and settings.
//! - [`parse`]: the `.mvs` text format.
//! - [`hom`]: homomorphisms, query evaluation and plain containment.
//! - [`chase`]: weak acyclicity, derived dependencies and the disjunctive chase.
//! - [`decide`]: containment and certain-answer procedures.
//! - [`oracle`]: a brute-force reference for certain answers.

pub mod chase;
pub mod decide;
pub mod error;
pub mod hom;
pub mod model;
pub mod oracle;
pub mod parse;

pub use error::{Error, Result};
pub use model::{Atom, Branch, Dependency, Instance, Rule, Schema, Setting, Sym, Term, UcqQuery};
pub use parse::{parse_instance, parse_rule, parse_setting, parse_ucq, Diagnostic, DiagnosticKind, Render};
