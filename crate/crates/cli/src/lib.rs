//! The `chasecert` command line, as a library so tests can drive it
//! without spawning processes.

mod report;

use std::ffi::OsString;

use chasecert_core::chase::{check_weak_acyclicity, WeakAcyclicity};
use chasecert_core::decide::{
    certain_answers_staged, chase_for_containment, conditional_containment, find_certain_answers, is_certain_answer,
    plain_containment, sigma_containment, view_verified_solutions, CertainAnswerReport, Evidence, Method, Options,
    Stage,
};
use chasecert_core::hom::Mapping;
use chasecert_core::oracle::{oracle_certain_answers, OracleConfig};
use chasecert_core::{parse_rule, parse_setting, Error, Rule, Setting, Term};
use clap::{Args, Parser, Subcommand, ValueEnum};

pub use report::{Format, Report};

/// Exit status and captured output of one invocation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NOT_WA: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "chasecert",
    version,
    about = "Certain answers and containment under materialized views with weakly acyclic dependencies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Setting file in the .mvs format.
    setting: String,
    /// Output format.
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Per-path chase step budget.
    #[arg(long)]
    budget: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a setting and check its invariants.
    Parse {
        #[command(flatten)]
        common: Common,
        /// Print the normalized setting text.
        #[arg(long)]
        render: bool,
    },
    /// Check that the dependencies are weakly acyclic.
    WaCheck {
        #[command(flatten)]
        common: Common,
    },
    /// Check that some base instance satisfies the dependencies and yields MV.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Decide containment of one query in another.
    Contains {
        #[command(flatten)]
        common: Common,
        /// Contained query: a query name or an inline rule.
        #[arg(long)]
        q1: String,
        /// Containing query: a query name or an inline rule.
        #[arg(long)]
        q2: String,
        /// Which constraints the containment is relative to.
        #[arg(long, value_enum, default_value = "full")]
        under: Under,
        /// Drop disequalities from the derived dependencies (unsound).
        #[arg(long)]
        strip_diseqs: bool,
    },
    /// Decide whether one tuple is a certain answer.
    Certain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        query: String,
        /// Comma-separated constants; empty for a Boolean query.
        #[arg(long, allow_hyphen_values = true)]
        tuple: String,
        /// Decision route.
        #[arg(long, value_enum, default_value = "containment")]
        via: Via,
    },
    /// Compute all certain answers.
    CertainAll {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        query: String,
        #[arg(long, value_enum, default_value = "vv")]
        method: MethodArg,
    },
    /// Run a chase and print its result.
    Chase {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        query: String,
        /// Print the chase tree.
        #[arg(long)]
        emit_tree: bool,
        /// Chase the view data instead of the query, in the given order.
        #[arg(long, value_enum)]
        stage: Option<StageArg>,
        /// Drop disequalities from the derived dependencies (unsound).
        #[arg(long)]
        strip_diseqs: bool,
    },
    /// Brute-force certain answers over a bounded domain.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        query: String,
        #[arg(long, default_value_t = OracleConfig::default().extra_constants)]
        extra_constants: usize,
        #[arg(long, default_value_t = OracleConfig::default().max_facts_per_relation)]
        max_facts: usize,
        #[arg(long, default_value_t = OracleConfig::default().instance_budget)]
        instance_budget: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Under {
    /// Dependencies and views with MV.
    Full,
    /// Views with MV, no dependencies.
    ViewsOnly,
    /// Dependencies only.
    SigmaOnly,
    /// Plain containment.
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Via {
    Containment,
    Vv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Vv,
    GenerateTest,
    Owa,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum StageArg {
    Interleaved,
    MvFirst,
    SigmaFirst,
}

impl From<StageArg> for Stage {
    fn from(s: StageArg) -> Stage {
        match s {
            StageArg::Interleaved => Stage::Interleaved,
            StageArg::MvFirst => Stage::MvFirst,
            StageArg::SigmaFirst => Stage::SigmaFirst,
        }
    }
}

/// A failed invocation: exit code plus a message for stderr.
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let code = match e {
            Error::NotWeaklyAcyclic(_) => EXIT_NOT_WA,
            Error::BudgetExceeded(_) => EXIT_BUDGET,
            _ => EXIT_INPUT,
        };
        Failure {
            code,
            message: format!("error: {e}"),
        }
    }
}

fn input_error(message: String) -> Failure {
    Failure {
        code: EXIT_INPUT,
        message,
    }
}

/// Runs one invocation. `args` includes the program name.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome {
                    code: EXIT_INPUT,
                    stdout: String::new(),
                    stderr: text,
                }
            } else {
                Outcome {
                    code: EXIT_OK,
                    stdout: text,
                    stderr: String::new(),
                }
            };
        }
    };
    let mut warnings = Vec::new();
    match dispatch(cli.command, &mut warnings) {
        Ok(stdout) => Outcome {
            code: EXIT_OK,
            stdout,
            stderr: warnings.iter().map(|w| format!("warning: {w}\n")).collect(),
        },
        Err(f) => {
            let mut stderr: String = warnings.iter().map(|w| format!("warning: {w}\n")).collect();
            stderr.push_str(&f.message);
            stderr.push('\n');
            Outcome {
                code: f.code,
                stdout: String::new(),
                stderr,
            }
        }
    }
}

fn load(path: &str) -> Result<Setting, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| input_error(format!("error: cannot read {path}: {e}")))?;
    let (s, diags) = parse_setting(&text);
    if diags.is_empty() {
        Ok(s)
    } else {
        let lines: Vec<String> = diags.iter().map(|d| format!("{path}:{d}")).collect();
        Err(input_error(lines.join("\n")))
    }
}

fn options(common: &Common, strip: bool) -> Options {
    Options {
        budget: common.budget,
        strip_disequalities: strip,
    }
}

/// A query by name, or an inline rule when the text contains `:-`.
fn query(s: &Setting, text: &str) -> Result<Rule, Failure> {
    if !text.contains(":-") {
        return Ok(s.query(text)?.clone());
    }
    let trimmed = text.trim().trim_end_matches('.');
    let source = if trimmed.starts_with("query ") {
        format!("{trimmed}.")
    } else {
        format!("query {trimmed}.")
    };
    parse_rule(&source).map_err(|d| {
        let lines: Vec<String> = d.iter().map(|d| format!("inline query:{d}")).collect();
        input_error(lines.join("\n"))
    })
}

fn parse_tuple(text: &str) -> Result<Vec<Term>, Failure> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let bad = || {
        input_error(format!(
            "error: tuple `{text}` is not a comma-separated list of constants"
        ))
    };
    let r = parse_rule(&format!("query T({text}) :- true.")).map_err(|_| bad())?;
    if r.head().iter().all(Term::is_const) {
        Ok(r.head().to_vec())
    } else {
        Err(bad())
    }
}

fn tuple_text(t: &[Term]) -> String {
    let parts: Vec<String> = t.iter().map(|x| x.to_string()).collect();
    format!("({})", parts.join(","))
}

fn mapping_text(m: &Mapping) -> String {
    let parts: Vec<String> = m.iter().map(|(k, v)| format!("{k}->{v}")).collect();
    format!("{{{}}}", parts.join(","))
}

const VACUOUS: &str = "no base instance satisfies the dependencies and yields MV; every tuple is vacuously certain";
const OWA_NOTE: &str = "open-world baseline: sound, but may miss certain answers when views are closed";
const INCOMPLETE: &str = "INCOMPLETE MODE: staged chase, may miss certain answers";

fn dispatch(command: Command, warnings: &mut Vec<String>) -> Result<String, Failure> {
    match command {
        Command::Parse { common, render } => {
            let s = load(&common.setting)?;
            let mut r = Report::new()
                .str("status", "ok")
                .int("relations", s.schema.iter().count())
                .int("dependencies", s.sigma.len())
                .int("views", s.views.len())
                .int("facts", s.mv.len())
                .int("queries", s.queries.len());
            if render {
                r = r.block("setting", chasecert_core::Render::render(&s));
            }
            Ok(r.render(common.format))
        }
        Command::WaCheck { common } => {
            let s = load(&common.setting)?;
            let r = match check_weak_acyclicity(&s.sigma) {
                WeakAcyclicity::WeaklyAcyclic => Report::new().flag("weakly acyclic", true),
                WeakAcyclicity::Cycle(c) => {
                    let path: Vec<String> = c.iter().map(|p| p.to_string()).collect();
                    Report::new()
                        .flag("weakly acyclic", false)
                        .str("cycle", path.join(" -> "))
                }
            };
            Ok(r.render(common.format))
        }
        Command::Validate { common } => {
            let s = load(&common.setting)?;
            let out = view_verified_solutions(&s, Stage::Interleaved, &options(&common, false))?;
            let valid = !out.solutions.is_empty();
            if !valid {
                warnings.push(VACUOUS.to_string());
            }
            Ok(Report::new()
                .flag("valid", valid)
                .int("solutions", out.solutions.len())
                .render(common.format))
        }
        Command::Contains {
            common,
            q1,
            q2,
            under,
            strip_diseqs,
        } => {
            let s = load(&common.setting)?;
            let (q1, q2) = (query(&s, &q1)?, query(&s, &q2)?);
            let opts = options(&common, strip_diseqs);
            let base = Report::new()
                .str("q1", q1.to_string())
                .str("q2", q2.to_string())
                .str("under", under_name(under));
            let r = match under {
                Under::None => base.flag("contained", plain_containment(&q1, &q2)?),
                Under::SigmaOnly => base.flag("contained", sigma_containment(&s.sigma, &q1, &q2, common.budget)?),
                Under::Full | Under::ViewsOnly => {
                    let target = if under == Under::Full {
                        s.clone()
                    } else {
                        s.without_sigma()
                    };
                    let v = conditional_containment(&target, &q1, &q2, &opts)?;
                    let base = base
                        .flag("contained", v.holds)
                        .list("chase result", v.chase_result.components.iter());
                    match v.evidence {
                        Evidence::TrivialChase => {
                            warnings.push(VACUOUS.to_string());
                            base.str("evidence", "every chase branch failed")
                        }
                        Evidence::ContainmentMappings(ms) => {
                            base.list("containment mappings", ms.iter().map(mapping_text))
                        }
                        Evidence::CounterexampleComponent(c) => base.str("counterexample", c.to_string()),
                    }
                }
            };
            Ok(r.render(common.format))
        }
        Command::Certain {
            common,
            query: name,
            tuple,
            via,
        } => {
            let s = load(&common.setting)?;
            let q = query(&s, &name)?;
            let t = parse_tuple(&tuple)?;
            let opts = options(&common, false);
            let yes = match via {
                Via::Containment => is_certain_answer(&s, &q, &t, &opts)?,
                Via::Vv => {
                    if t.len() != q.arity() {
                        return Err(Error::ArityMismatch {
                            pred: q.name().to_string(),
                            expected: q.arity(),
                            found: t.len(),
                        }
                        .into());
                    }
                    let rep = find_certain_answers(&s, &q, Method::ViewVerified, &opts)?;
                    if rep.vacuous {
                        warnings.push(VACUOUS.to_string());
                    }
                    rep.vacuous || rep.tuples.contains(&t)
                }
            };
            Ok(Report::new()
                .str("query", q.name().to_string())
                .str("tuple", tuple_text(&t))
                .str("via", via_name(via))
                .flag("certain", yes)
                .render(common.format))
        }
        Command::CertainAll {
            common,
            query: name,
            method,
        } => {
            let s = load(&common.setting)?;
            let q = query(&s, &name)?;
            let m = match method {
                MethodArg::Vv => Method::ViewVerified,
                MethodArg::GenerateTest => Method::GenerateTest,
                MethodArg::Owa => Method::OwaBaseline,
            };
            let rep = find_certain_answers(&s, &q, m, &options(&common, false))?;
            let mut r = answer_report(&rep, warnings);
            if m == Method::OwaBaseline {
                r = r.str("note", OWA_NOTE);
            }
            Ok(r.render(common.format))
        }
        Command::Chase {
            common,
            query: name,
            emit_tree,
            stage,
            strip_diseqs,
        } => {
            let s = load(&common.setting)?;
            let q = query(&s, &name)?;
            let opts = options(&common, strip_diseqs);
            let r = match stage {
                None => {
                    let (u, tree) = chase_for_containment(&s, &q, &opts)?;
                    if u.is_trivial() {
                        warnings.push(VACUOUS.to_string());
                    }
                    let mut r = Report::new()
                        .str("chase", "query")
                        .str("query", q.to_string())
                        .int("tree nodes", tree.nodes.len())
                        .int("failed leaves", tree.failed_leaves())
                        .list("components", u.components.iter());
                    if strip_diseqs {
                        r = r.str("note", "disequalities stripped; the result may be unsound");
                    }
                    if emit_tree {
                        r = r.block("tree", tree.render());
                    }
                    r
                }
                Some(stage) => {
                    let stage = Stage::from(stage);
                    let mut r = Report::new();
                    if !stage.is_complete() {
                        r = r.str("mode", INCOMPLETE);
                    }
                    let out = view_verified_solutions(&s, stage, &opts)?;
                    let rep = certain_answers_staged(&s, &q, stage, &opts)?;
                    if rep.vacuous {
                        warnings.push(VACUOUS.to_string());
                    }
                    r = r
                        .str("chase", "instance")
                        .str("stage", stage_name(stage))
                        .str(
                            "start",
                            out.root.as_ref().map_or("failed".to_string(), |i| i.to_string()),
                        )
                        .list("solutions", out.solutions.iter())
                        .str("query", q.name().to_string())
                        .list("certain answers", rep.tuples.iter().map(|t| tuple_text(t)));
                    if emit_tree {
                        let dumps: Vec<String> = out
                            .trees
                            .iter()
                            .enumerate()
                            .map(|(i, t)| match (stage.is_complete(), i) {
                                (true, _) => t.render(),
                                (false, 0) => format!("first stage:\n{}", t.render()),
                                (false, k) => format!("second stage from result {k}:\n{}", t.render()),
                            })
                            .collect();
                        r = r.block("tree", dumps.join(""));
                    }
                    r
                }
            };
            Ok(r.render(common.format))
        }
        Command::Oracle {
            common,
            query: name,
            extra_constants,
            max_facts,
            instance_budget,
        } => {
            let s = load(&common.setting)?;
            let q = query(&s, &name)?;
            let cfg = OracleConfig {
                extra_constants,
                max_facts_per_relation: max_facts,
                instance_budget,
            };
            let res = oracle_certain_answers(&s, &q, &cfg);
            if res.vacuous {
                warnings.push(VACUOUS.to_string());
            }
            if res.truncated {
                warnings.push("instance budget reached; the answer set may be too large".to_string());
            }
            Ok(Report::new()
                .str("query", q.name().to_string())
                .int("extra constants", extra_constants)
                .int("instances examined", res.instances_examined)
                .int("valid instances", res.instances_found)
                .flag("truncated", res.truncated)
                .list("certain answers", res.tuples.iter().map(|t| tuple_text(t)))
                .render(common.format))
        }
    }
}

fn answer_report(rep: &CertainAnswerReport, warnings: &mut Vec<String>) -> Report {
    if rep.vacuous {
        warnings.push(VACUOUS.to_string());
    }
    Report::new()
        .str("query", rep.query.to_string())
        .str("method", rep.method.name())
        .flag("valid setting", rep.valid_setting)
        .int("examined", rep.solutions_examined)
        .list("certain answers", rep.tuples.iter().map(|t| tuple_text(t)))
}

fn under_name(u: Under) -> &'static str {
    match u {
        Under::Full => "full",
        Under::ViewsOnly => "views-only",
        Under::SigmaOnly => "sigma-only",
        Under::None => "none",
    }
}

fn via_name(v: Via) -> &'static str {
    match v {
        Via::Containment => "containment",
        Via::Vv => "vv",
    }
}

fn stage_name(s: Stage) -> &'static str {
    match s {
        Stage::Interleaved => "interleaved",
        Stage::MvFirst => "mv-first",
        Stage::SigmaFirst => "sigma-first",
    }
}
