//! `qcore`: command-line access to the containment deciders and core
//! computations of the `qcore` library.

mod input;

/// `print!` that ignores write errors, so a closed pipe ends output quietly.
macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = write!(std::io::stdout(), $($t)*);
    }};
}

macro_rules! outln {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

use std::fmt::Display;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qcore::containment::{
    contains_with, equivalent_with, merge, CheckOptions, ContainmentReport, Fragment,
};
use qcore::cores::{
    core, q_core_boolean, q_core_bounded, q_core_isolated, q_core_unary, q_cores_naive, ux_core,
    CoreResult,
};
use qcore::corpus::{get_fixture, list_fixtures};
use qcore::graphs::{classify, classify_irreflexive_pseudoforest, lambda_max, q_core_pr_forest, GraphQCore, PRGraph};
use qcore::logic::{
    canonical_psi, canonical_query, canonical_theta, model_check, render_formula,
    satisfies_no_proper_ph,
};
use qcore::morphism::{find_homomorphism, find_surjective_hypermorphism, Witness};
use qcore::structure::{power, render_structure};
use qcore::{Budget, Error, Structure, Verdict, VerdictKind};

#[derive(Parser)]
#[command(name = "qcore", version, about = "Containment, equivalence and cores of finite relational structures")]
struct Cli {
    #[command(flatten)]
    opts: Opts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Opts {
    /// Search-node budget per decision.
    #[arg(long, global = true, env = "QCORE_BUDGET_NODES", default_value_t = 10_000_000,
          value_parser = clap::value_parser!(u64).range(1..))]
    budget_nodes: u64,
    /// Largest power (in elements) that may be built.
    #[arg(long, global = true, env = "QCORE_BUDGET_POWER", default_value_t = 1 << 20,
          value_parser = clap::value_parser!(u64).range(1..))]
    budget_power: u64,
    /// Largest exponent tried when searching maps from powers.
    #[arg(long, global = true, env = "QCORE_MAX_EXPONENT", default_value_t = 6,
          value_parser = clap::value_parser!(u32).range(1..))]
    max_exponent: u32,
    /// One `key=value` record per result.
    #[arg(long, global = true, env = "QCORE_MACHINE")]
    machine: bool,
    /// Cross-check answers against the canonical sentences.
    #[arg(long, global = true, env = "QCORE_VERIFY")]
    verify: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a map file (`a -> b` or `a -> {b,c}` per line) from A to B.
    Check { map: String, a: String, b: String },
    /// Find a homomorphism A -> B.
    Hom { a: String, b: String },
    /// Find a surjective homomorphism A -> B.
    Surhom { a: String, b: String },
    /// Find a surjective hypermorphism A -> B.
    Hyper { a: String, b: String },
    /// Print the m-th power of A.
    Power { a: String, m: u32 },
    /// Does every sentence of the fragment true in A hold in B?
    Contains {
        #[arg(long, value_enum)]
        fragment: FragmentArg,
        a: String,
        b: String,
    },
    /// Do A and B satisfy the same sentences of the fragment?
    Equiv {
        #[arg(long, value_enum)]
        fragment: FragmentArg,
        a: String,
        b: String,
    },
    /// Model-check a sentence (file, `-`, or literal text) on A.
    Mc { a: String, formula: String },
    /// Print a canonical sentence of A.
    Canon {
        #[arg(value_enum)]
        kind: CanonKind,
        a: String,
        /// Parameter m for theta and psi; defaults to |A|.
        m: Option<u32>,
    },
    /// Core of A.
    Core { a: String },
    /// U-X-core of A.
    Uxcore { a: String },
    /// Q-core of A.
    Qcore {
        #[arg(value_enum)]
        method: QMethod,
        a: String,
    },
    /// Partially reflexive graph tools.
    Graph {
        #[arg(value_enum)]
        action: GraphAction,
        a: String,
    },
    /// Built-in fixtures.
    Fixture {
        #[command(subcommand)]
        action: FixtureAction,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FragmentArg {
    Pp,
    Ph,
    Pef,
    Pos,
}

impl From<FragmentArg> for Fragment {
    fn from(f: FragmentArg) -> Self {
        match f {
            FragmentArg::Pp => Fragment::Pp,
            FragmentArg::Ph => Fragment::Ph,
            FragmentArg::Pef => Fragment::Pef,
            FragmentArg::Pos => Fragment::Pos,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CanonKind {
    Query,
    Theta,
    Psi,
    Proper,
}

#[derive(Clone, Copy, ValueEnum)]
enum QMethod {
    Naive,
    Bounded,
    Boolean,
    Unary,
    Isolated,
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphAction {
    Classify,
    QcoreForest,
    QcorePseudoforest,
}

#[derive(Subcommand)]
enum FixtureAction {
    List,
    Show { name: String },
}

/// A command that could not produce a result, with its exit code.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

const EX_USAGE: u8 = 64;
const EX_DATAERR: u8 = 65;
const EX_NOINPUT: u8 = 66;
const EX_SOFTWARE: u8 = 70;

impl Failure {
    pub fn io(message: String) -> Self {
        Failure {
            code: EX_NOINPUT,
            message,
        }
    }

    pub fn from_error(e: Error) -> Self {
        let code = match &e {
            Error::Unknown { .. } | Error::BudgetExceeded { .. } => 2,
            Error::Precondition(_) | Error::NotUnary => EX_USAGE,
            Error::UnknownFixture(_) => EX_NOINPUT,
            Error::InvariantViolation(_) => EX_SOFTWARE,
            _ => EX_DATAERR,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }

    pub fn context(mut self, what: &str) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::from_error(e)
    }
}

fn exit_for(kind: VerdictKind) -> u8 {
    match kind {
        VerdictKind::Yes => 0,
        VerdictKind::No => 1,
        VerdictKind::Unknown => 2,
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn one_line(s: &str) -> String {
    s.trim_end().replace('\n', ";")
}

struct Ctx {
    budget: Budget,
    machine: bool,
    verify: bool,
}

impl Ctx {
    /// Prints a verdict and returns its exit code.
    fn verdict<T>(&self, command: &str, v: &Verdict<T>, render: impl Fn(&T) -> String) -> u8 {
        if self.machine {
            let mut line = format!("command={command} kind={}", v.kind());
            match v {
                Verdict::Yes(w) => line.push_str(&format!(" witness={}", quote(&one_line(&render(w))))),
                Verdict::No(c) => line.push_str(&format!(" certificate={}", quote(&c.to_string()))),
                Verdict::Unknown(e) => line.push_str(&format!(
                    " explored={} reason={}",
                    e.explored,
                    quote(&e.reason)
                )),
            }
            outln!("{line}");
        } else {
            outln!("{}", v.kind());
            match v {
                Verdict::Yes(w) => out!("{}", render(w)),
                Verdict::No(c) => outln!("certificate: {c}"),
                Verdict::Unknown(e) => outln!("undecided after {} nodes: {}", e.explored, e.reason),
            }
        }
        exit_for(v.kind())
    }

    fn report(&self, command: &str, direction: Option<&str>, r: &ContainmentReport) {
        if self.machine {
            let dir = direction.map(|d| format!(" direction={d}")).unwrap_or_default();
            outln!("command={command}{dir} {}", r.record());
            return;
        }
        if let Some(d) = direction {
            outln!("{d}:");
        }
        outln!("{} containment: {}", r.fragment, r.verdict.kind());
        match &r.verdict {
            Verdict::Yes(w) => out!("{}", w.render()),
            Verdict::No(c) => outln!("certificate: {c}"),
            Verdict::Unknown(e) => outln!("undecided after {} nodes: {}", e.explored, e.reason),
        }
        if let Some(v) = r.verified {
            outln!("verified: {v}");
        }
        if let Some(n) = &r.note {
            outln!("note: {n}");
        }
    }

    fn core_result(&self, r: &CoreResult) -> Result<u8, Failure> {
        if self.verify {
            r.verify(&self.budget)?;
        }
        if self.machine {
            let verified = if self.verify { " verified=true" } else { "" };
            outln!("{}{verified}", r.record());
        } else {
            out!("{}", r.render());
            if self.verify {
                outln!("verified: true");
            }
        }
        Ok(if r.undecided.is_empty() { 0 } else { 2 })
    }

    fn field(&self, key: &str, value: impl Display) {
        if self.machine {
            out!(" {key}={value}");
        } else {
            outln!("{key}: {value}");
        }
    }

    fn end_record(&self) {
        if self.machine {
            outln!();
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let o = &cli.opts;
    let ctx = Ctx {
        budget: Budget::default()
            .with_nodes(o.budget_nodes)
            .with_power_elements(usize::try_from(o.budget_power).unwrap_or(usize::MAX))
            .with_max_exponent(o.max_exponent),
        machine: o.machine,
        verify: o.verify,
    };
    let budget = &ctx.budget;
    let options = CheckOptions { verify: ctx.verify };
    match cli.command {
        Command::Check { map, a, b } => {
            let (a, b) = (input::structure(&a)?, input::structure(&b)?);
            let witness = input::witness(&map)?;
            if ctx.machine {
                out!("command=check");
            }
            match witness {
                Witness::Map(m) => {
                    let f = m.check(&a, &b);
                    let flags = [
                        ("total", f.total),
                        ("homomorphism", f.homomorphism),
                        ("strong", f.strong),
                        ("surjective", f.surjective),
                        ("bijective", f.bijective),
                    ];
                    for (k, v) in flags {
                        ctx.field(k, v);
                    }
                    ctx.end_record();
                    Ok(if f.total && f.homomorphism { 0 } else { 1 })
                }
                Witness::Hyper(h) => {
                    let f = h.check(&a, &b);
                    for (k, v) in [("total", f.total), ("surjective", f.surjective), ("preserving", f.preserving)] {
                        ctx.field(k, v);
                    }
                    ctx.end_record();
                    Ok(if f.is_surjective_hypermorphism() { 0 } else { 1 })
                }
            }
        }
        Command::Hom { a, b } => {
            let (a, b) = (input::structure(&a)?, input::structure(&b)?);
            let v = find_homomorphism(&a, &b, false, budget)?;
            Ok(ctx.verdict("hom", &v, |m| m.render()))
        }
        Command::Surhom { a, b } => {
            let (a, b) = (input::structure(&a)?, input::structure(&b)?);
            let v = find_homomorphism(&a, &b, true, budget)?;
            Ok(ctx.verdict("surhom", &v, |m| m.render()))
        }
        Command::Hyper { a, b } => {
            let (a, b) = (input::structure(&a)?, input::structure(&b)?);
            let v = find_surjective_hypermorphism(&a, &b, budget)?;
            Ok(ctx.verdict("hyper", &v, |h| h.render()))
        }
        Command::Power { a, m } => {
            let a = input::structure(&a)?;
            let p = power(&a, m, budget.power_elements)?;
            if ctx.machine {
                outln!(
                    "command=power size={} tuples={} structure={}",
                    p.size(),
                    p.tuple_count(),
                    quote(&one_line(&render_structure(&p)))
                );
            } else {
                out!("{}", render_structure(&p));
            }
            Ok(0)
        }
        Command::Contains { fragment, a, b } => {
            let (a, b) = (input::structure(&a)?, input::structure(&b)?);
            let r = contains_with(fragment.into(), &a, &b, budget, options)?;
            ctx.report("contains", None, &r);
            Ok(exit_for(r.verdict.kind()))
        }
        Command::Equiv { fragment, a, b } => {
            let (a, b) = (input::structure(&a)?, input::structure(&b)?);
            let (fwd, bwd) = equivalent_with(fragment.into(), &a, &b, budget, options)?;
            ctx.report("equiv", Some("forward"), &fwd);
            ctx.report("equiv", Some("backward"), &bwd);
            let kind = merge(fwd.verdict, bwd.verdict).kind();
            if !ctx.machine {
                outln!("equivalent: {kind}");
            }
            Ok(exit_for(kind))
        }
        Command::Mc { a, formula } => {
            let a = input::structure(&a)?;
            let f = input::formula(&formula, a.signature())?;
            let out = model_check(&a, &f, budget)?;
            let truth = match out.truth {
                Some(true) => "true",
                Some(false) => "false",
                None => "unknown",
            };
            if ctx.machine {
                outln!(
                    "command=mc fragment={} truth={truth} explored={}",
                    f.fragment(),
                    out.explored
                );
            } else {
                outln!("{truth}");
                for step in &out.trace {
                    let ctx_vals: Vec<String> =
                        step.context.iter().map(|(v, e)| format!("{v}={}", e + 1)).collect();
                    outln!("  [{}] {} := {}", ctx_vals.join(" "), step.variable, step.value + 1);
                }
            }
            Ok(match out.truth {
                Some(true) => 0,
                Some(false) => 1,
                None => 2,
            })
        }
        Command::Canon { kind, a, m } => {
            let a = input::structure(&a)?;
            let m = m.unwrap_or(a.size() as u32);
            let sentence = match kind {
                CanonKind::Query => canonical_query(&a, &(0..a.size()).collect::<Vec<_>>(), true)?,
                CanonKind::Theta => canonical_theta(&a, m, budget)?,
                CanonKind::Psi => canonical_psi(&a, m, budget)?,
                CanonKind::Proper => return proper(&ctx, &a),
            };
            if ctx.machine {
                outln!(
                    "command=canon fragment={} sentence={}",
                    sentence.fragment(),
                    quote(&render_formula(&sentence))
                );
            } else {
                outln!("{}", render_formula(&sentence));
            }
            Ok(0)
        }
        Command::Core { a } => ctx.core_result(&core(&input::structure(&a)?, budget)?),
        Command::Uxcore { a } => ctx.core_result(&ux_core(&input::structure(&a)?, budget)?),
        Command::Qcore { method, a } => {
            let a = input::structure(&a)?;
            let r = match method {
                QMethod::Naive => return naive(&ctx, &a),
                QMethod::Bounded => q_core_bounded(&a, budget)?,
                QMethod::Boolean => q_core_boolean(&a, budget)?,
                QMethod::Unary => q_core_unary(&a, budget)?,
                QMethod::Isolated => q_core_isolated(&a, budget)?,
            };
            ctx.core_result(&r)
        }
        Command::Graph { action, a } => {
            let g = PRGraph::new(input::structure(&a)?)?;
            match action {
                GraphAction::Classify => {
                    let c = classify(&g);
                    let subtree = c
                        .maximal_reflexive_subtree
                        .as_ref()
                        .map(|t| t.iter().map(|v| (v + 1).to_string()).collect::<Vec<_>>().join(","))
                        .unwrap_or_else(|| "none".into());
                    if ctx.machine {
                        out!("command=graph-classify");
                    }
                    ctx.field("components", c.components);
                    ctx.field("forest", c.is_forest);
                    ctx.field("pseudoforest", c.is_pseudoforest);
                    ctx.field("bipartite", c.is_bipartite);
                    ctx.field("odd_cycle", c.has_odd_cycle);
                    ctx.field("reflexive", c.is_reflexive);
                    ctx.field("irreflexive", c.is_irreflexive);
                    ctx.field("loop_connected", c.is_loop_connected);
                    ctx.field("quasi_loop_connected", c.is_quasi_loop_connected);
                    ctx.field("lambda_max", lambda_max(&g));
                    ctx.field("maximal_reflexive_subtree", subtree);
                    ctx.field("isolated", c.isolated.len());
                    ctx.end_record();
                    Ok(0)
                }
                GraphAction::QcoreForest => graph_q_core(&ctx, &q_core_pr_forest(&g, budget)?),
                GraphAction::QcorePseudoforest => {
                    graph_q_core(&ctx, &classify_irreflexive_pseudoforest(&g, budget)?)
                }
            }
        }
        Command::Fixture { action } => {
            match action {
                FixtureAction::List => {
                    for name in list_fixtures() {
                        let f = get_fixture(name)?;
                        if ctx.machine {
                            outln!(
                                "name={name} size={} tags={}",
                                f.structure.size(),
                                quote(&f.tags.join(","))
                            );
                        } else {
                            outln!("{name}\t{}\t{}", f.structure.size(), f.tags.join(","));
                        }
                    }
                }
                FixtureAction::Show { name } => {
                    let f = get_fixture(&name)?;
                    if ctx.machine {
                        outln!(
                            "name={} structure={}",
                            f.name,
                            quote(&one_line(&render_structure(&f.structure)))
                        );
                    } else {
                        outln!("# {}", f.provenance);
                        out!("{}", render_structure(&f.structure));
                    }
                }
            }
            Ok(0)
        }
    }
}

fn proper(ctx: &Ctx, a: &Structure) -> Result<u8, Failure> {
    let r = satisfies_no_proper_ph(a, &ctx.budget)?;
    if ctx.machine {
        out!("command=canon-proper");
    }
    ctx.field("satisfies_none", r.satisfies_none);
    let falsifiers: Vec<String> = r
        .falsifiers
        .iter()
        .map(|f| f.map_or("-".to_string(), |e| (e + 1).to_string()))
        .collect();
    ctx.field("falsifiers", falsifiers.join(","));
    let iso = r
        .isolated_tuple
        .as_ref()
        .map(|t| format!("({})", t.iter().map(|e| (e + 1).to_string()).collect::<Vec<_>>().join(",")))
        .unwrap_or_else(|| "none".into());
    ctx.field("isolated_tuple", iso);
    if let Some(s) = r.source_and_sink {
        ctx.field("source_and_sink", s);
    }
    ctx.end_record();
    Ok(0)
}

fn naive(ctx: &Ctx, a: &Structure) -> Result<u8, Failure> {
    let r = q_cores_naive(a, &ctx.budget)?;
    if !ctx.machine {
        outln!("{} minimal equivalent weak substructure(s)", r.antichain.len());
    }
    for (i, member) in r.antichain.iter().enumerate() {
        if !ctx.machine {
            outln!("--- member {}", i + 1);
        }
        ctx.core_result(member)?;
    }
    for (sub, why) in &r.undecided {
        let elems: Vec<String> = sub.embedding.iter().map(|e| (e + 1).to_string()).collect();
        if ctx.machine {
            outln!("undecided={} reason={}", quote(&elems.join(" ")), quote(why));
        } else {
            outln!("undecided: {{{}}} ({why})", elems.join(","));
        }
    }
    Ok(if r.is_complete() { 0 } else { 2 })
}

fn graph_q_core(ctx: &Ctx, r: &GraphQCore) -> Result<u8, Failure> {
    if ctx.machine {
        let cert = r
            .certificate
            .as_ref()
            .map(|c| format!(" certificate={}", quote(c)))
            .unwrap_or_default();
        out!("case={} majority={}{cert} ", quote(&r.case.to_string()), r.majority);
    } else {
        outln!("case: {}", r.case);
        outln!("majority polymorphism: {}", r.majority);
        if let Some(c) = &r.certificate {
            outln!("separating sentence: {c}");
        }
    }
    ctx.core_result(&r.q_core)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EX_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("qcore: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
