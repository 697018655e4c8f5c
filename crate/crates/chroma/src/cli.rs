//! Command-line front end. Every command reads JSON files and writes one
//! JSON document; the exit code separates "no" answers (1) from bad input
//! (2) and exhausted search budgets (3).

use std::fs;
use std::path::{Path, PathBuf};

use chroma_core::amalgamation::{
    amalgamate_infinite, ap_search, dap_from_ap, dap_search, quotient_amalgam, spectra_row,
    AmalgamError, AmalgamResult, Method, SpecialSystem, SpectraMode, SpectraRow,
};
use chroma_core::constructions::{
    build_interval_splitting, build_k_splitting, build_limit_sum, build_pair_splitting,
    plan_interval_splitting, plan_k_splitting, Block, ConstructionError,
};
use chroma_core::diagrams::{Diagram, DiagramSet};
use chroma_core::rank::{InfiniteDiagram, RankTable};
use chroma_core::structures::{in_class, monochromatic_model, ColoringStructure};
use chroma_core::walpha::{walpha_verify_claim, WAlphaParams};
use chroma_core::Ordinal;
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::json::{self, FormatError};

#[derive(Debug, Parser)]
#[command(
    name = "chroma",
    version,
    about = "Existence ranks, amalgamation and model builders for coloring classes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Write the JSON result here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Search budget, in search nodes.
    #[arg(long, global = true, default_value_t = 1_000_000,
          value_parser = clap::value_parser!(u64).range(1..))]
    pub budget: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Existence rank of every member of a diagram set.
    Rank {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Membership of a structure in K(W); reports the least violating set.
    Member {
        #[arg(long)]
        structure: PathBuf,
        #[arg(long)]
        diagrams: PathBuf,
    },
    /// Amalgamates a special system.
    Amalgamate {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        diagrams: PathBuf,
        #[arg(long, value_enum, default_value_t = AmalgamMethod::Search)]
        method: AmalgamMethod,
        /// Method parameters (infinite-diagram: {"prefix": [ids], "tail": id}).
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Builds a model from a JSON parameter block.
    Build {
        #[arg(value_enum)]
        kind: BuildKind,
        #[arg(long)]
        params: PathBuf,
        /// Required by the splitting builders.
        #[arg(long)]
        diagrams: Option<PathBuf>,
    },
    /// AP/DAP verdicts for base sizes 1..=lambda-max.
    Spectra {
        #[arg(long)]
        diagrams: PathBuf,
        #[arg(long, default_value_t = 2)]
        lambda_max: usize,
        #[arg(long, value_enum, default_value_t = Mode::Exhaustive)]
        mode: Mode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Systems drawn per base size in sampled mode.
        #[arg(long, default_value_t = 100)]
        trials: u32,
    },
    /// Checks the closed-form ranks of a truncated W(α) family.
    WalphaVerify {
        /// α in Cantor normal form, e.g. "w+1".
        #[arg(long)]
        alpha: String,
        /// Comma-separated rank indices, e.g. "0,2,5".
        #[arg(long = "F")]
        f: String,
        #[arg(long)]
        max_arity: u32,
        #[arg(long, default_value_t = 2)]
        max_gamma: u32,
        #[arg(long, default_value_t = 2)]
        kappa: u32,
    },
    /// Quotient of a diagram set by a stem (given as a JSON diagram).
    Quotient {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        stem: String,
    },
    /// Members comparable with one of the given diagrams (a JSON array).
    Prune {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        keep: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AmalgamMethod {
    /// Exhaustive disjoint-amalgam search.
    Search,
    /// Amalgamation allowing the new points to be identified.
    Ap,
    /// Disjoint amalgam through the three-case construction over AP search.
    ApDap,
    InfiniteDiagram,
    Quotient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BuildKind {
    Mono,
    LimitSum,
    PairSplit,
    KSplit,
    IntervalSplit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Exhaustive,
    Sampled,
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Budget(Option<Value>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Budget(_) => 3,
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::Input(e.to_string())
    }
}

/// A JSON answer and its exit code (0 or 1).
pub struct Outcome {
    pub value: Value,
    pub code: i32,
}

fn ok(value: Value) -> Result<Outcome, CliError> {
    Ok(Outcome { value, code: 0 })
}

fn input<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Input(format!("{context}: {e}"))
}

/// Parses JSON text; syntax errors carry line and column.
pub fn parse_json(text: &str, origin: &str) -> Result<Value, CliError> {
    serde_json::from_str(text).map_err(|e| {
        CliError::Input(format!(
            "{origin}: malformed JSON at line {} column {}: {e}",
            e.line(),
            e.column()
        ))
    })
}

fn read_json(path: &Path) -> Result<Value, CliError> {
    let origin = path.display().to_string();
    let text = fs::read_to_string(path).map_err(input(&origin))?;
    parse_json(&text, &origin)
}

fn in_file<T>(path: &Path, r: Result<T, FormatError>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn read_diagrams(path: &Path) -> Result<DiagramSet, CliError> {
    let v = read_json(path)?;
    in_file(path, json::diagram_set_from_json(&v))
}

fn read_structure(path: &Path) -> Result<ColoringStructure, CliError> {
    let v = read_json(path)?;
    in_file(path, json::structure_from_json(&v, ""))
}

fn read_system(path: &Path) -> Result<SpecialSystem, CliError> {
    let v = read_json(path)?;
    in_file(path, json::system_from_json(&v, ""))
}

fn amalgam_error(e: AmalgamError) -> CliError {
    CliError::Input(e.to_string())
}

fn construction_error(e: ConstructionError) -> CliError {
    match e {
        ConstructionError::BudgetExhausted => CliError::Budget(None),
        e => CliError::Input(e.to_string()),
    }
}

/// Worker count from `CHROMA_THREADS`, if set.
pub fn thread_limit() -> Result<Option<usize>, CliError> {
    match std::env::var("CHROMA_THREADS") {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::Input(format!(
                "CHROMA_THREADS must be a positive integer, got {s:?}"
            ))),
        },
    }
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let budget = cli.budget;
    match &cli.command {
        Command::Rank { input } => {
            let w = read_diagrams(input)?;
            ok(json::rank_table_to_json(&RankTable::compute(&w)))
        }
        Command::Member {
            structure,
            diagrams,
        } => {
            let m = read_structure(structure)?;
            let w = read_diagrams(diagrams)?;
            let r = in_class(&m, &w);
            Ok(Outcome {
                code: if r.is_ok() { 0 } else { 1 },
                value: json::membership_to_json(&r),
            })
        }
        Command::Amalgamate {
            system,
            diagrams,
            method,
            params,
        } => {
            let sys = read_system(system)?;
            let w = read_diagrams(diagrams)?;
            let params = params.as_deref().map(read_json).transpose()?;
            amalgamate(&sys, &w, *method, params.as_ref(), budget)
        }
        Command::Build {
            kind,
            params,
            diagrams,
        } => {
            let p = read_json(params)?;
            let w = diagrams.as_deref().map(read_diagrams).transpose()?;
            build(*kind, &p, w.as_ref(), budget)
                .map_err(|e| match e {
                    CliError::Input(m) => CliError::Input(format!("{}: {m}", params.display())),
                    e => e,
                })
                .and_then(ok)
        }
        Command::Spectra {
            diagrams,
            lambda_max,
            mode,
            seed,
            trials,
        } => {
            let w = read_diagrams(diagrams)?;
            let mode = match mode {
                Mode::Exhaustive => SpectraMode::Exhaustive,
                Mode::Sampled => SpectraMode::Sampled {
                    seed: *seed,
                    trials: *trials,
                },
            };
            let rows = spectra(&w, *lambda_max, mode, budget)?;
            let value = json::spectra_to_json(&rows);
            use chroma_core::amalgamation::Verdict;
            let no = rows
                .iter()
                .any(|r| matches!(r.dap, Verdict::No(_)) || matches!(r.ap, Verdict::No(_)));
            Ok(Outcome {
                value,
                code: if no { 1 } else { 0 },
            })
        }
        Command::WalphaVerify {
            alpha,
            f,
            max_arity,
            max_gamma,
            kappa,
        } => {
            let alpha: Ordinal = alpha.parse().map_err(input("--alpha"))?;
            let f: Vec<Ordinal> = f
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| s.trim().parse::<Ordinal>())
                .collect::<Result<_, _>>()
                .map_err(input("--F"))?;
            let params = WAlphaParams::new(alpha, *kappa).map_err(input("--alpha/--kappa"))?;
            let report =
                walpha_verify_claim(&params, &f, *max_arity, *max_gamma).map_err(input("--F"))?;
            Ok(Outcome {
                code: if report.passed() { 0 } else { 1 },
                value: json::claim_report_to_json(&report),
            })
        }
        Command::Quotient { input, stem } => {
            let w = read_diagrams(input)?;
            let stem = parse_json(stem, "--stem")?;
            let stem = json::diagram_from_json(&stem, "--stem")?;
            let q = w.quotient(&stem).map_err(self::input("--stem"))?;
            ok(json::diagram_set_to_json(&q))
        }
        Command::Prune { input, keep } => {
            let w = read_diagrams(input)?;
            let keep = parse_json(keep, "--keep")?;
            let keep = json_list(&keep, "--keep", json::diagram_from_json)?;
            let p = w.prune(&keep).map_err(self::input("--keep"))?;
            ok(json::diagram_set_to_json(&p))
        }
    }
}

fn json_list<T>(
    v: &Value,
    path: &str,
    f: impl Fn(&Value, &str) -> Result<T, FormatError>,
) -> Result<Vec<T>, CliError> {
    let Some(items) = v.as_array() else {
        return Err(CliError::Input(format!("{path}: expected an array")));
    };
    items
        .iter()
        .enumerate()
        .map(|(i, x)| f(x, &format!("{path}[{i}]")).map_err(CliError::from))
        .collect()
}

fn amalgam_outcome(r: AmalgamResult) -> Result<Outcome, CliError> {
    let value = json::amalgam_to_json(&r);
    match r {
        AmalgamResult::BudgetExhausted => Err(CliError::Budget(Some(value))),
        AmalgamResult::Unsat { .. } => Ok(Outcome { value, code: 1 }),
        _ => ok(value),
    }
}

fn amalgamate(
    sys: &SpecialSystem,
    w: &DiagramSet,
    method: AmalgamMethod,
    params: Option<&Value>,
    budget: u64,
) -> Result<Outcome, CliError> {
    match method {
        AmalgamMethod::Search => {
            amalgam_outcome(dap_search(sys, w, budget).map_err(amalgam_error)?)
        }
        AmalgamMethod::Ap => amalgam_outcome(ap_search(sys, w, budget).map_err(amalgam_error)?),
        AmalgamMethod::Quotient => {
            amalgam_outcome(quotient_amalgam(sys, w, budget).map_err(amalgam_error)?)
        }
        AmalgamMethod::InfiniteDiagram => {
            let d = match params {
                None => InfiniteDiagram::constant_zero(),
                Some(p) => InfiniteDiagram::Periodic {
                    prefix: match p.get("prefix") {
                        Some(v) => json::u32_list(v, "params.prefix")?,
                        None => Vec::new(),
                    },
                    tail: match p.get("tail") {
                        Some(v) => json::as_u32(v, "params.tail")?,
                        None => 0,
                    },
                },
            };
            let coloring = amalgamate_infinite(sys, w, Some(&d)).map_err(amalgam_error)?;
            amalgam_outcome(AmalgamResult::Witness {
                coloring,
                method: Method::InfiniteDiagram,
            })
        }
        AmalgamMethod::ApDap => {
            let mut exhausted = false;
            let r = dap_from_ap(sys, w, &mut |s| {
                let r = ap_search(s, w, budget)?;
                exhausted |= r == AmalgamResult::BudgetExhausted;
                Ok(r)
            });
            match r {
                Ok(cw) => {
                    let mut value = json::amalgam_to_json(&AmalgamResult::Witness {
                        coloring: cw.coloring,
                        method: cw.method,
                    });
                    if let Some((set, original, temporary)) = cw.recolored {
                        value["recolored"] = json!({
                            "subset": set,
                            "original": original,
                            "temporary": temporary,
                        });
                    }
                    ok(value)
                }
                Err(_) if exhausted => Err(CliError::Budget(Some(json::amalgam_to_json(
                    &AmalgamResult::BudgetExhausted,
                )))),
                Err(e) => Err(amalgam_error(e)),
            }
        }
    }
}

fn need<'a>(p: &'a Value, key: &str) -> Result<&'a Value, CliError> {
    p.get(key)
        .ok_or_else(|| CliError::Input(format!("missing field \"{key}\"")))
}

fn need_u32(p: &Value, key: &str) -> Result<u32, CliError> {
    Ok(json::as_u32(need(p, key)?, key)?)
}

fn need_diagram(p: &Value, key: &str) -> Result<Diagram, CliError> {
    Ok(json::diagram_from_json(need(p, key)?, key)?)
}

fn structures(p: &Value, key: &str) -> Result<Vec<ColoringStructure>, CliError> {
    json_list(need(p, key)?, key, json::structure_from_json)
}

fn build(
    kind: BuildKind,
    p: &Value,
    w: Option<&DiagramSet>,
    budget: u64,
) -> Result<Value, CliError> {
    let need_w = || w.ok_or_else(|| CliError::Input("this builder needs --diagrams".into()));
    let materialize = |r: Result<Value, String>| r.map_err(CliError::Input);
    match kind {
        BuildKind::Mono => {
            let d = need_diagram(p, "diagram")?;
            let n = need_u32(p, "n")? as usize;
            Ok(json::structure_to_json(&monochromatic_model(&d, n)))
        }
        BuildKind::LimitSum => {
            let comps = structures(p, "components")?;
            let s = build_limit_sum(&comps).map_err(construction_error)?;
            materialize(json::coloring_to_json(&s))
        }
        BuildKind::PairSplit => {
            let wn = json_list(need(p, "wn")?, "wn", json::diagram_from_json)?;
            let s =
                build_pair_splitting(need_u32(p, "m")?, &need_diagram(p, "wbar")?, &wn, need_w()?)
                    .map_err(construction_error)?;
            materialize(json::coloring_to_json(&s))
        }
        BuildKind::KSplit => {
            let m = need_u32(p, "m")?;
            let wbar = need_diagram(p, "wbar")?;
            let s = match p.get("comps") {
                Some(_) => build_k_splitting(m, &wbar, structures(p, "comps")?, need_w()?),
                None => plan_k_splitting(m, &wbar, need_w()?, budget),
            }
            .map_err(construction_error)?;
            materialize(json::coloring_to_json(&s))
        }
        BuildKind::IntervalSplit => {
            let m = need_u32(p, "m")?;
            let wbar = need_diagram(p, "wbar")?;
            let blocks = need(p, "blocks")?;
            let explicit = blocks
                .as_array()
                .is_some_and(|b| b.iter().any(|x| x.get("comps").is_some()));
            let s = if explicit {
                let blocks = json_list(blocks, "blocks", |b, path| {
                    let f = |k: &str| format!("{path}.{k}");
                    let get = |k: &str| {
                        b.get(k).ok_or_else(|| FormatError {
                            path: path.to_string(),
                            message: format!("missing field \"{k}\""),
                        })
                    };
                    Ok(Block {
                        start: json::as_u32(get("start")?, &f("start"))?,
                        end: json::as_u32(get("end")?, &f("end"))?,
                        pair: json::diagram_from_json(get("pair")?, &f("pair"))?,
                        star: json::diagram_from_json(get("star")?, &f("star"))?,
                        comps: get("comps")?
                            .as_array()
                            .ok_or_else(|| FormatError {
                                path: f("comps"),
                                message: "expected an array".into(),
                            })?
                            .iter()
                            .enumerate()
                            .map(|(i, c)| {
                                json::structure_from_json(c, &format!("{path}.comps[{i}]"))
                            })
                            .collect::<Result<_, _>>()?,
                    })
                })?;
                build_interval_splitting(m, &wbar, blocks, need_w()?)
            } else {
                let bounds = json_list(blocks, "blocks", |b, path| {
                    let get = |k: &str| match b.get(k) {
                        Some(v) => json::as_u32(v, &format!("{path}.{k}")),
                        None => Err(FormatError {
                            path: path.to_string(),
                            message: format!("missing field \"{k}\""),
                        }),
                    };
                    Ok((get("start")?, get("end")?, get("k")? as usize))
                })?;
                plan_interval_splitting(m, &wbar, &bounds, need_w()?, budget)
            }
            .map_err(construction_error)?;
            materialize(json::coloring_to_json(&s))
        }
    }
}

/// Rows are independent, so they run on the pool; the output order is fixed.
fn spectra(
    w: &DiagramSet,
    lambda_max: usize,
    mode: SpectraMode,
    budget: u64,
) -> Result<Vec<SpectraRow>, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_limit()? {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Input(format!("thread pool: {e}")))?;
    let rows: Vec<Result<SpectraRow, AmalgamError>> = pool.install(|| {
        (1..=lambda_max)
            .into_par_iter()
            .map(|l| spectra_row(w, l, mode, budget))
            .collect()
    });
    rows.into_iter()
        .collect::<Result<_, _>>()
        .map_err(amalgam_error)
}

/// Runs the CLI and writes its output; returns the process exit code.
pub fn main_with(cli: &Cli) -> i32 {
    let (value, code) = match run(cli) {
        Ok(o) => (Some(o.value), o.code),
        Err(e) => {
            let code = e.exit_code();
            match e {
                CliError::Input(msg) => {
                    eprintln!("error: {msg}");
                    (None, code)
                }
                CliError::Budget(v) => {
                    eprintln!("error: search budget exhausted");
                    (v, code)
                }
            }
        }
    };
    if let Some(v) = value {
        let text = json::render(&v);
        match &cli.out {
            Some(path) => {
                if let Err(e) = fs::write(path, text) {
                    eprintln!("error: {}: {e}", path.display());
                    return 2;
                }
            }
            None => print!("{text}"),
        }
    }
    code
}
