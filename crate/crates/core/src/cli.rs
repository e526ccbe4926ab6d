//! Command-line front end: file loading, dispatch and reports.
//!
//! Exit codes: 0 separable (or success), 1 not separable (or rejected), 2 error, refusal or
//! exhausted fuel.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::automata::{AutomataError, Nfa, DETERMINIZE_CAP};
use crate::constraints::{
    functional_to_rightsided, gen_from_nfa_intersection, parse_formula_file, split, validate_sl, ConstraintError,
    Formula, SlFormula,
};
use crate::corpus::{gen_corpus, gen_knfa, write_corpus};
use crate::grammars::{Cfg, GrammarError};
use crate::ompa::{
    decode, flat_to_tuple, ompa_simulate, posptl_sep_ompa, sl_stacks, sl_to_ompa, sl_to_ompa_declared, Ompa, OmpaError,
    OmpaSepError, SimResult,
};
use crate::pda::{
    bounded_pda_to_nfa, cfg_upward_minor, pda_down, pda_up, sep_posptl_cfg, PdaError, SeparabilityVerdict, CONFIG_CAP,
};
use crate::twoway::{
    fix_last_component, min_pairs, sep_posptl_rightsided_sl, sl_to_2nft, TwoWayCaps, TwoWayError, TwoWayNft,
};
use crate::words::{Alphabet, Word, WordTuple, WordsError, DOLLAR};

pub const OMPA_FUEL: usize = 1_000_000;
pub const FUEL_ENV: &str = "SEPSTR_FUEL";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{0}")]
    Usage(String),
    #[error("fuel exhausted after {fuel} configurations; candidate minor so far: {partial:?}")]
    Fuel { fuel: usize, partial: Vec<Word> },
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Pda(#[from] PdaError),
    #[error(transparent)]
    Ompa(#[from] OmpaError),
    #[error(transparent)]
    TwoWay(#[from] TwoWayError),
    #[error(transparent)]
    Automata(#[from] AutomataError),
    #[error(transparent)]
    Words(#[from] WordsError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Text,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MinorKind {
    Cfg,
    Sl,
    #[value(name = "2nft")]
    TwoWay,
}

#[derive(Debug, Parser)]
#[command(
    name = "sepstr",
    version,
    about = "PosPTL separability for string constraints and context-free grammars"
)]
pub struct Cli {
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Separate two context-free grammars.
    SepCfg {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
        #[arg(long)]
        fuel: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Separate two right-sided straight-line formulas through two-way transducers.
    SepSl {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
        /// Rewrite formulas with functional transducers into right-sided ones first.
        #[arg(long)]
        rewrite_functional: bool,
        /// Cap on behaviours per emptiness check.
        #[arg(long)]
        fuel: Option<usize>,
        #[arg(long)]
        minor_cap: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Separate two OMPAs, or the OMPA encodings of two formulas, by bounded search.
    SepOmpa {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
        #[arg(long)]
        fuel: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regular separability is not decided; always refuses.
    SepReg {
        #[arg(long)]
        left: Option<PathBuf>,
        #[arg(long)]
        right: Option<PathBuf>,
    },
    /// Split a conjunction into two straight-line formulas.
    Split {
        #[arg(long = "in")]
        input: PathBuf,
        /// Writes `<out>.left.json` and `<out>.right.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    RewriteFunctional {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    CompileOmpa {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Encode variables in declared rather than straight-line order.
        #[arg(long)]
        declared_order: bool,
    },
    /// Run an OMPA, or a formula's encoding, on one word.
    RunOmpa {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        word: String,
        #[arg(long)]
        fuel: Option<usize>,
    },
    #[command(name = "compile-2nft")]
    Compile2nft {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Upward closure of a grammar's language as an NFA, with its minor.
    ClosureUp {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        fuel: Option<usize>,
    },
    /// Downward closure of a grammar's language as an NFA.
    ClosureDown {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        fuel: Option<usize>,
    },
    /// Minimal elements of a grammar's language, or minimal pairs of a formula or 2NFT.
    Minor {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: Option<MinorKind>,
        #[arg(long)]
        fuel: Option<usize>,
        #[arg(long)]
        minor_cap: Option<usize>,
    },
    /// Formulas that are separable iff the given automata have an empty intersection.
    GenKnfa {
        /// JSON `{"automata": [...]}`; random automata are drawn when absent.
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 3)]
        states: usize,
        /// Writes `<out>.left.json` and `<out>.right.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    GenCorpus {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

/// What a command prints and returns.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub code: i32,
    pub json: Value,
    pub text: String,
}

impl Report {
    fn ok(json: Value, text: String) -> Self {
        Report { code: 0, json, text }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => serde_json::to_string_pretty(&self.json).unwrap_or_default() + "\n",
            Format::Text => self.text.clone(),
        }
    }
}

fn fuel(flag: Option<usize>, default: usize) -> Result<usize, CliError> {
    let v = match flag {
        Some(v) => v,
        None => match std::env::var(FUEL_ENV) {
            Ok(s) => s
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("{FUEL_ENV} must be a positive integer, got {s:?}")))?,
            Err(_) => default,
        },
    };
    if v == 0 {
        return Err(CliError::Usage("fuel must be positive".into()));
    }
    Ok(v)
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_json(path: &Path) -> Result<Value, CliError> {
    serde_json::from_str(&read(path)?).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, v: &Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(v).unwrap_or_default() + "\n";
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn is_json(text: &str) -> bool {
    text.trim_start().starts_with('{')
}

fn load_sl(path: &Path) -> Result<SlFormula, CliError> {
    Ok(validate_sl(&parse_formula_file(path)?)?)
}

fn load_cfg(path: &Path) -> Result<Cfg, CliError> {
    let text = read(path)?;
    if is_json(&text) {
        let v: Value = serde_json::from_str(&text).map_err(|source| CliError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Cfg::from_json(&v)?)
    } else {
        Ok(Cfg::parse(&text)?)
    }
}

/// An OMPA file as is, or the declared-order encoding of a formula file with its arity.
fn load_ompa(path: &Path, sigma: Option<&Alphabet>) -> Result<(Ompa, Option<usize>), CliError> {
    let text = read(path)?;
    if is_json(&text) {
        let v: Value = serde_json::from_str(&text).map_err(|source| CliError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        if v.get("stacks").is_some() {
            return Ok((Ompa::from_json(&v)?, None));
        }
    }
    let mut f = load_sl(path)?;
    if let Some(s) = sigma {
        f = widen(&f, s, None)?;
    }
    Ok((sl_to_ompa_declared(&f)?, Some(f.n())))
}

/// Re-declares `f` over `sigma ⊇ Σ(f)`, optionally appending a variable fixed to `$`.
fn widen(f: &SlFormula, sigma: &Alphabet, dollar_var: Option<&str>) -> Result<SlFormula, CliError> {
    let mut g: Formula = f.to_formula();
    let wide = match dollar_var {
        Some(_) => sigma.with(DOLLAR),
        None => sigma.clone(),
    };
    let out = sigma.without(DOLLAR);
    g.alphabet = wide.clone();
    for (_, a) in g.memberships.iter_mut() {
        *a = a.with_alphabet(&wide);
    }
    for r in g.relations.iter_mut() {
        r.transducer = r.transducer.with_alphabets(&wide, &out);
    }
    if let Some(name) = dollar_var {
        g.vars.push(name.to_string());
        g.memberships
            .push((g.vars.len() - 1, Nfa::singleton(&wide, &Word::new(vec![DOLLAR]))));
    }
    Ok(validate_sl(&g)?)
}

fn words_json(ws: &[Word]) -> Value {
    json!(ws.iter().map(|w| w.to_string()).collect::<Vec<_>>())
}

fn tuples_json(ts: &[WordTuple]) -> Value {
    json!(ts.iter().map(|t| t.to_string()).collect::<Vec<_>>())
}

fn verdict_code(v: &SeparabilityVerdict) -> i32 {
    if v.is_separable() {
        0
    } else {
        1
    }
}

fn verdict_text(v: &SeparabilityVerdict) -> String {
    match v {
        SeparabilityVerdict::Separable { separator } => format!("separable\nseparator: {separator}\n"),
        SeparabilityVerdict::NotSeparable { witness, dominated } => {
            format!("not separable\nwitness: {witness}\ndominates: {dominated}\n")
        }
    }
}

fn merge(base: Value, extra: Value) -> Value {
    let mut m: Map<String, Value> = match base {
        Value::Object(m) => m,
        _ => Map::new(),
    };
    if let Value::Object(e) = extra {
        m.extend(e);
    }
    Value::Object(m)
}

/// Drops the `$` variable added by the functional rewrite.
fn drop_dollar(v: SeparabilityVerdict, sigma: &Alphabet) -> Result<SeparabilityVerdict, CliError> {
    let cut = |t: WordTuple| {
        let mut c = t.0;
        c.pop();
        WordTuple::new(c)
    };
    Ok(match v {
        SeparabilityVerdict::Separable { separator } => SeparabilityVerdict::Separable {
            separator: fix_last_component(&separator, &Word::new(vec![DOLLAR]), sigma)?,
        },
        SeparabilityVerdict::NotSeparable { witness, dominated } => SeparabilityVerdict::NotSeparable {
            witness: cut(witness),
            dominated: cut(dominated),
        },
    })
}

fn rewrite_pair(f1: &SlFormula, f2: &SlFormula) -> Result<(SlFormula, SlFormula, bool), CliError> {
    let g1 = functional_to_rightsided(f1)?;
    let g2 = functional_to_rightsided(f2)?;
    let grew = |f: &SlFormula, g: &SlFormula| g.n() > f.n();
    Ok(match (grew(f1, &g1), grew(f2, &g2)) {
        (false, false) => (g1, g2, false),
        (true, true) => (g1, g2, true),
        (true, false) => {
            let z = g1.vars().last().cloned().unwrap_or_default();
            let sigma = g2.alphabet().clone();
            (g1, widen(&g2, &sigma, Some(&z))?, true)
        }
        (false, true) => {
            let z = g2.vars().last().cloned().unwrap_or_default();
            let sigma = g1.alphabet().clone();
            (widen(&g1, &sigma, Some(&z))?, g2, true)
        }
    })
}

fn sep_cfg(left: &Path, right: &Path, fuel_flag: Option<usize>) -> Result<Report, CliError> {
    let cap = fuel(fuel_flag, CONFIG_CAP)?;
    let v = sep_posptl_cfg(&load_cfg(left)?, &load_cfg(right)?, cap)?;
    Ok(Report {
        code: verdict_code(&v),
        json: merge(json!({"command": "sep-cfg", "fuel": cap}), v.to_json()),
        text: verdict_text(&v),
    })
}

fn sep_sl(
    left: &Path,
    right: &Path,
    rewrite: bool,
    fuel_flag: Option<usize>,
    minor_cap: Option<usize>,
) -> Result<Report, CliError> {
    let defaults = TwoWayCaps::default();
    let caps = TwoWayCaps {
        visiting: fuel(fuel_flag, defaults.visiting)?,
        minor: minor_cap.unwrap_or(defaults.minor),
    };
    if caps.minor == 0 {
        return Err(CliError::Usage("minor cap must be positive".into()));
    }
    let (f1, f2) = (load_sl(left)?, load_sl(right)?);
    let sigma = f1.alphabet().union(f2.alphabet());
    let (g1, g2, rewritten) = if rewrite {
        rewrite_pair(&f1, &f2)?
    } else {
        (f1, f2, false)
    };
    for (g, p) in [(&g1, left), (&g2, right)] {
        if !g.is_right_sided() {
            return Err(CliError::Usage(format!(
                "{} is not right-sided; pass --rewrite-functional if its transducers are functional",
                p.display()
            )));
        }
    }
    let res = sep_posptl_rightsided_sl(&g1, &g2, caps)?;
    let verdict = if rewritten {
        drop_dollar(res.verdict, &sigma)?
    } else {
        res.verdict
    };
    let mut vars = g1.vars().to_vec();
    if rewritten {
        vars.pop();
    }
    let relation = match &res.relation_verdict {
        SeparabilityVerdict::Separable { separator } => json!({"separator_text": separator.to_string()}),
        SeparabilityVerdict::NotSeparable { witness, dominated } => {
            json!({"witness": witness.to_string(), "dominated": dominated.to_string()})
        }
    };
    let json = merge(
        json!({
            "command": "sep-sl",
            "vars": vars,
            "rewritten": rewritten,
            "minimal_pairs": tuples_json(&res.minor),
            "relation": relation,
            "fuel": {"visiting": caps.visiting, "minor": caps.minor},
        }),
        verdict.to_json(),
    );
    let mut text = format!("variables: {}\n", vars.join(", "));
    text += &verdict_text(&verdict);
    text += &format!("minimal pairs: {}\n", tuples_json(&res.minor));
    Ok(Report {
        code: verdict_code(&verdict),
        json,
        text,
    })
}

fn sep_ompa(left: &Path, right: &Path, fuel_flag: Option<usize>) -> Result<Report, CliError> {
    let fuel = fuel(fuel_flag, OMPA_FUEL)?;
    let sigma = |p: &Path| -> Result<Option<Alphabet>, CliError> {
        let text = read(p)?;
        if is_json(&text) && text.contains("\"stacks\"") {
            return Ok(None);
        }
        Ok(Some(load_sl(p)?.alphabet().clone()))
    };
    let union = match (sigma(left)?, sigma(right)?) {
        (Some(a), Some(b)) => Some(a.union(&b)),
        _ => None,
    };
    let (a1, n1) = load_ompa(left, union.as_ref())?;
    let (a2, n2) = load_ompa(right, union.as_ref())?;
    let v = match posptl_sep_ompa(&a1, &a2, fuel) {
        Ok(v) => v,
        Err(OmpaSepError::FuelExhausted { partial }) => return Err(CliError::Fuel { fuel, partial }),
        Err(OmpaSepError::Ompa(e)) => return Err(e.into()),
    };
    let mut json = merge(json!({"command": "sep-ompa", "fuel": fuel}), v.to_json());
    let mut text = verdict_text(&v);
    if let (Some(n), Some(m)) = (n1, n2) {
        if n == m {
            let tuple = match &v {
                SeparabilityVerdict::Separable { separator } => {
                    let t = flat_to_tuple(separator, n)?;
                    text += &format!("tuple separator: {t}\n");
                    json!({"tuple_separator": t, "tuple_separator_text": t.to_string()})
                }
                SeparabilityVerdict::NotSeparable { witness, .. } => {
                    let t = decode(&witness.components()[0]);
                    text += &format!("witness tuple: {t}\n");
                    json!({"witness_tuple": t.to_string()})
                }
            };
            json = merge(json, tuple);
        }
    }
    Ok(Report {
        code: verdict_code(&v),
        json,
        text,
    })
}

fn refuse_reg() -> Report {
    let msg = "regular separability of OMPA and 2NFT languages is undecidable in general; \
               no heuristic answer is given. Use sep-sl or sep-ompa for PosPTL separators.";
    Report {
        code: 2,
        json: json!({"command": "sep-reg", "refused": true, "reason": msg}),
        text: format!("refused: {msg}\n"),
    }
}

fn emit(out: Option<&Path>, key: &str, artifact: Value, mut report: Value) -> Result<Value, CliError> {
    match out {
        Some(p) => {
            write(p, &artifact)?;
            report[key] = json!(p.display().to_string());
        }
        None => report[key] = artifact,
    }
    Ok(report)
}

fn pair_out(out: Option<&Path>, l: &SlFormula, r: &SlFormula, mut report: Value) -> Result<Value, CliError> {
    match out {
        Some(p) => {
            let (lp, rp) = (with_suffix(p, ".left.json"), with_suffix(p, ".right.json"));
            write(&lp, &l.to_json())?;
            write(&rp, &r.to_json())?;
            report["left"] = json!(lp.display().to_string());
            report["right"] = json!(rp.display().to_string());
        }
        None => {
            report["left"] = l.to_json();
            report["right"] = r.to_json();
        }
    }
    Ok(report)
}

fn sl_summary(f: &SlFormula) -> String {
    let order: Vec<&str> = f.order().iter().map(|&v| f.vars()[v].as_str()).collect();
    format!(
        "{} variables, {} defined, straight-line order {}, right-sided: {}",
        f.n(),
        f.k(),
        order.join(" "),
        f.is_right_sided()
    )
}

fn closure(input: &Path, out: Option<&Path>, fuel_flag: Option<usize>, up: bool) -> Result<Report, CliError> {
    let cap = fuel(fuel_flag, CONFIG_CAP)?;
    let g = load_cfg(input)?.to_cnf();
    let pda = if up { pda_up(&g)? } else { pda_down(&g)? };
    let nfa = bounded_pda_to_nfa(&pda, cap)?
        .determinize(DETERMINIZE_CAP)?
        .minimize()
        .to_nfa();
    let name = if up { "closure-up" } else { "closure-down" };
    let mut report = json!({"command": name, "states": nfa.num_states()});
    let mut text = format!("{name}: {} states\n", nfa.num_states());
    if up {
        let minor = cfg_upward_minor(&g)?;
        text += &format!("minor: {}\n", words_json(&minor));
        report["minor"] = words_json(&minor);
    }
    let report = emit(out, "nfa", nfa.to_json(), report)?;
    if out.is_none() {
        text += &nfa.to_string();
    }
    Ok(Report::ok(report, text))
}

fn minor(
    input: &Path,
    kind: Option<MinorKind>,
    fuel_flag: Option<usize>,
    minor_cap: Option<usize>,
) -> Result<Report, CliError> {
    let text = read(input)?;
    let kind = match kind {
        Some(k) => k,
        None if is_json(&text) => {
            let v = read_json(input)?;
            if v.get("productions").is_some() {
                MinorKind::Cfg
            } else if v.get("input_alphabet").is_some() {
                MinorKind::TwoWay
            } else {
                MinorKind::Sl
            }
        }
        None if text.contains("->") => MinorKind::Cfg,
        None => MinorKind::Sl,
    };
    let defaults = TwoWayCaps::default();
    let caps = TwoWayCaps {
        visiting: fuel(fuel_flag, defaults.visiting)?,
        minor: minor_cap.unwrap_or(defaults.minor),
    };
    let (name, items) = match kind {
        MinorKind::Cfg => ("cfg", words_json(&cfg_upward_minor(&load_cfg(input)?.to_cnf())?)),
        MinorKind::Sl => ("sl", tuples_json(&min_pairs(&sl_to_2nft(&load_sl(input)?)?, caps)?)),
        MinorKind::TwoWay => (
            "2nft",
            tuples_json(&min_pairs(&TwoWayNft::from_json(&read_json(input)?)?, caps)?),
        ),
    };
    Ok(Report::ok(
        json!({"command": "minor", "kind": name, "minor": items}),
        format!("minor: {items}\n"),
    ))
}

fn gen_knfa_cmd(
    input: Option<&Path>,
    seed: u64,
    k: usize,
    states: usize,
    out: Option<&Path>,
) -> Result<Report, CliError> {
    let automata = match input {
        Some(p) => {
            let v = read_json(p)?;
            let list = v
                .get("automata")
                .and_then(Value::as_array)
                .ok_or_else(|| CliError::Usage(format!("{}: expected {{\"automata\": [...]}}", p.display())))?;
            list.iter().map(Nfa::from_json).collect::<Result<Vec<_>, _>>()?
        }
        None => {
            if k == 0 || states == 0 {
                return Err(CliError::Usage("k and states must be positive".into()));
            }
            gen_knfa(seed, k, states)
        }
    };
    let (l, r) = gen_from_nfa_intersection(&automata)?;
    let mut product = automata[0].clone();
    for a in &automata[1..] {
        product = product.product(a)?;
    }
    let empty = product.is_empty();
    let report = json!({
        "command": "gen-knfa",
        "k": automata.len(),
        "automata": automata.iter().map(Nfa::to_json).collect::<Vec<_>>(),
        "intersection_empty": empty,
    });
    let report = pair_out(out, &l, &r, report)?;
    Ok(Report::ok(
        report,
        format!("{} automata, intersection empty: {empty}\n", automata.len()),
    ))
}

/// Runs one command. Errors are reported with exit code 2.
pub fn run(cli: &Cli) -> Report {
    match dispatch(&cli.command) {
        Ok(r) => r,
        Err(e) => {
            let mut json = json!({"error": e.to_string()});
            if let CliError::Fuel { fuel, partial } = &e {
                json["fuel_exhausted"] = json!(fuel);
                json["partial_minor"] = words_json(partial);
            }
            Report {
                code: 2,
                json,
                text: format!("error: {e}\n"),
            }
        }
    }
}

fn dispatch(cmd: &Command) -> Result<Report, CliError> {
    match cmd {
        Command::SepCfg { left, right, fuel, out } => with_out(sep_cfg(left, right, *fuel)?, out.as_deref()),
        Command::SepSl {
            left,
            right,
            rewrite_functional,
            fuel,
            minor_cap,
            out,
        } => with_out(
            sep_sl(left, right, *rewrite_functional, *fuel, *minor_cap)?,
            out.as_deref(),
        ),
        Command::SepOmpa { left, right, fuel, out } => with_out(sep_ompa(left, right, *fuel)?, out.as_deref()),
        Command::SepReg { .. } => Ok(refuse_reg()),
        Command::Split { input, out } => {
            let f = parse_formula_file(input)?;
            let (l, r) = split(&f)?;
            let report = pair_out(out.as_deref(), &l, &r, json!({"command": "split", "vars": l.vars()}))?;
            let text = format!("left: {}\nright: {}\n", sl_summary(&l), sl_summary(&r));
            Ok(Report::ok(report, text))
        }
        Command::RewriteFunctional { input, out } => {
            let g = functional_to_rightsided(&load_sl(input)?)?;
            let report = emit(
                out.as_deref(),
                "formula",
                g.to_json(),
                json!({"command": "rewrite-functional"}),
            )?;
            Ok(Report::ok(report, format!("{}\n", sl_summary(&g))))
        }
        Command::CompileOmpa {
            input,
            out,
            declared_order,
        } => {
            let f = load_sl(input)?;
            let a = if *declared_order {
                sl_to_ompa_declared(&f)?
            } else {
                sl_to_ompa(&f)?
            };
            let term_lens: Vec<usize> = f.relations().iter().map(|r| r.inputs.len()).collect();
            let report = json!({
                "command": "compile-ompa",
                "n": f.n(),
                "k": f.k(),
                "stacks": a.num_stacks(),
                "formula_stacks": sl_stacks(f.n(), &term_lens),
                "states": a.num_states(),
                "transitions": a.num_transitions(),
            });
            let text = format!(
                "{} stacks, {} states, {} transitions\n",
                a.num_stacks(),
                a.num_states(),
                a.num_transitions()
            );
            Ok(Report::ok(emit(out.as_deref(), "ompa", a.to_json(), report)?, text))
        }
        Command::RunOmpa { input, word, fuel: f } => {
            let budget = fuel(*f, OMPA_FUEL)?;
            let (a, _) = load_ompa(input, None)?;
            let w = Word::from(word.as_str());
            let (code, result) = match ompa_simulate(&a, &w, budget) {
                SimResult::Accepted => (0, "accepted"),
                SimResult::Rejected => (1, "rejected"),
                SimResult::BudgetExhausted => (2, "budget exhausted"),
            };
            Ok(Report {
                code,
                json: json!({"command": "run-ompa", "word": word, "result": result, "fuel": budget}),
                text: format!("{result}\n"),
            })
        }
        Command::Compile2nft { input, out } => {
            let t = sl_to_2nft(&load_sl(input)?)?;
            let report = json!({
                "command": "compile-2nft",
                "states": t.num_states(),
                "transitions": t.num_transitions(),
            });
            let text = format!("{} states, {} transitions\n", t.num_states(), t.num_transitions());
            Ok(Report::ok(
                emit(out.as_deref(), "transducer", t.to_json(), report)?,
                text,
            ))
        }
        Command::ClosureUp { input, out, fuel } => closure(input, out.as_deref(), *fuel, true),
        Command::ClosureDown { input, out, fuel } => closure(input, out.as_deref(), *fuel, false),
        Command::Minor {
            input,
            kind,
            fuel,
            minor_cap,
        } => minor(input, *kind, *fuel, *minor_cap),
        Command::GenKnfa {
            input,
            seed,
            k,
            states,
            out,
        } => gen_knfa_cmd(input.as_deref(), *seed, *k, *states, out.as_deref()),
        Command::GenCorpus { seed, count, out } => {
            let entries = gen_corpus(*seed, *count);
            let paths = write_corpus(&entries, out).map_err(|source| CliError::Io {
                path: out.clone(),
                source,
            })?;
            let files: Vec<String> = entries.iter().map(|e| e.file_name()).collect();
            Ok(Report::ok(
                json!({"command": "gen-corpus", "seed": seed, "files": files}),
                format!("wrote {} files to {}\n", paths.len(), out.display()),
            ))
        }
    }
}

fn with_out(report: Report, out: Option<&Path>) -> Result<Report, CliError> {
    if let Some(p) = out {
        write(p, &report.json)?;
    }
    Ok(report)
}
