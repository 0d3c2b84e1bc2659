//! `predstop`: solve, verify and fuzz predictable optimal stopping instances.
//!
//! Machine output goes to stdout and is deterministic; diagnostics go to
//! stderr. Exit codes: 0 success, 1 property violation, 2 invalid input,
//! 3 enumeration budget exceeded.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use predstop::instance::{self, decomposition_tables, tables_to_csv, value_tables, write_atomic, Tables};
use predstop::optimal::{optimal_report, tau_hat};
use predstop::propcheck::{run_suite, Config, PropertyReport};
use predstop::{
    canonical, decompose, generate_random, value_backward, Error, GenParams, Instance, PredictableTime, Rational,
    DEFAULT_BUDGET,
};

#[derive(Parser)]
#[command(name = "predstop", version, about = "Optimal stopping over predictable times on finite two-slot filtrations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct BudgetArgs {
    /// Cap on the number of enumerated predictable times.
    #[arg(long, env = "PREDSTOP_BUDGET", default_value_t = DEFAULT_BUDGET)]
    budget: usize,
    /// Exit with status 3 when any enumeration hits the budget.
    #[arg(long)]
    strict_budget: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Args)]
struct TimeArgs {
    /// Constant time.
    #[arg(long, value_name = "TIME", conflicts_with = "at_map")]
    at: Option<usize>,
    /// JSON file mapping outcome ids to times.
    #[arg(long, value_name = "FILE")]
    at_map: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 5)]
    max_outcomes: usize,
    #[arg(long, default_value_t = 3)]
    horizon: usize,
    /// Chance of an information jump at each time, as a rational in [0, 1].
    #[arg(long, default_value = "1/2")]
    qlc_prob: Rational,
    #[arg(long, default_value_t = 10)]
    reward_max: u32,
}

#[derive(Subcommand)]
enum Command {
    /// Value tables, first contact time, optimal value and optimal times.
    Solve {
        file: PathBuf,
        #[command(flatten)]
        time: TimeArgs,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Run the property suite and print the report.
    Verify {
        file: PathBuf,
        /// Comma-separated property ids.
        #[arg(long, value_delimiter = ',')]
        props: Option<Vec<String>>,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Run the suite on generated instances, writing failing ones to DIR.
    Fuzz {
        #[arg(long)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        first_seed: u64,
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Martingale and compensator tables of the value process.
    Decompose {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Predictable stopping times from a time on, with expected rewards.
    Enumerate {
        file: PathBuf,
        /// Constant start time.
        #[arg(long, value_name = "TIME", default_value_t = 0, conflicts_with = "from_map")]
        from: usize,
        /// JSON file mapping outcome ids to the start time.
        #[arg(long, value_name = "FILE")]
        from_map: Option<PathBuf>,
        /// Only times strictly after the start where it is below the horizon.
        #[arg(long)]
        strict: bool,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Write a seeded random instance or a canonical fixture.
    Generate {
        #[arg(long, required_unless_present = "canonical")]
        seed: Option<u64>,
        /// E1, E2 or E3.
        #[arg(long, conflicts_with = "seed")]
        canonical: Option<String>,
        #[command(flatten)]
        gen: GenArgs,
        /// Output file; stdout when omitted.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

/// A failed run and its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::BudgetExceeded { .. } => 3,
            Error::Internal(_) | Error::NotMeasurable { .. } => 1,
            _ => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cmd: Command) -> Outcome {
    match cmd {
        Command::Solve { file, time, format, budget } => solve(&file, &time, format, budget),
        Command::Verify { file, props, budget } => verify(&file, props, budget),
        Command::Fuzz { seeds, first_seed, gen, out, budget } => fuzz(first_seed, seeds, &gen, out.as_deref(), budget),
        Command::Decompose { file, format } => decompose_cmd(&file, format),
        Command::Enumerate { file, from, from_map, strict, format, budget } => {
            enumerate(&file, from, from_map.as_deref(), strict, format, budget)
        }
        Command::Generate { seed, canonical, gen, out } => generate(seed, canonical.as_deref(), &gen, out.as_deref()),
    }
}

fn load(path: &Path) -> Result<Instance, Failure> {
    instance::load(path).map_err(|e| match e {
        Error::Io(io) => invalid(format!("{}: {io}", path.display())),
        other => Failure::from(other),
    })
}

fn start_time(inst: &Instance, constant: Option<usize>, map: Option<&Path>) -> Result<PredictableTime, Failure> {
    if let Some(path) = map {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        return Ok(instance::time_from_json(inst, &text)?);
    }
    let t = constant.unwrap_or(0);
    if t > inst.horizon() {
        return Err(invalid(format!("time {t} is beyond the horizon {}", inst.horizon())));
    }
    Ok(inst.constant_time(t))
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json values serialize"));
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("reports serialize")
}

fn time_string(tau: &PredictableTime, inst: &Instance) -> String {
    let space = inst.space();
    space.outcomes().map(|w| format!("{}={}", space.id(w), tau.at(w))).collect::<Vec<_>>().join(" ")
}

fn map_string(map: &serde_json::Map<String, Value>) -> String {
    map.iter().map(|(k, v)| format!("{k}={}", v.as_str().map_or_else(|| v.to_string(), str::to_string))).collect::<Vec<_>>().join(" ")
}

/// Aligned text rendering of per-time tables.
fn tables_text(tables: &Tables, inst: &Instance) -> String {
    let space = inst.space();
    let mut out = String::new();
    for (name, rows) in tables {
        let mut grid = vec![std::iter::once("t".to_string()).chain(space.outcomes().map(|w| space.id(w).to_string())).collect::<Vec<_>>()];
        for (t, row) in rows.iter().enumerate() {
            grid.push(std::iter::once(t.to_string()).chain(row.values().map(|v| v.to_string())).collect());
        }
        let widths: Vec<usize> = (0..grid[0].len()).map(|j| grid.iter().map(|r| r[j].len()).max().unwrap_or(0)).collect();
        writeln!(out, "{name}").unwrap();
        for row in grid {
            let cells: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
            writeln!(out, "  {}", cells.join("  ")).unwrap();
        }
    }
    out
}

fn solve(file: &Path, time: &TimeArgs, format: Format, budget: BudgetArgs) -> Outcome {
    let inst = load(file)?;
    let vs = value_backward(&inst);
    let s = start_time(&inst, time.at, time.at_map.as_deref())?;
    let tables = value_tables(&vs);
    let report = match optimal_report(&vs, &s, budget.budget) {
        Ok(r) => Some(r),
        Err(Error::BudgetExceeded { limit }) if !budget.strict_budget => {
            eprintln!("warning: more than {limit} predictable times; optimal sets omitted");
            None
        }
        Err(e) => return Err(e.into()),
    };
    let hat = tau_hat(&vs, &s)?;
    let value = vs.value_at(&s);
    let optimal_value = inst.space().expectation(&value);
    match format {
        Format::Json => {
            let mut doc = json!({
                "instance_digest": instance::digest(&inst),
                "s": s.time().to_map(inst.space()),
                "v": tables["v"],
                "v_plus": tables["v_plus"],
                "value_at_s": instance::var_map(inst.space(), &value),
                "value_plus_at_s": instance::var_map(inst.space(), &vs.value_plus_at(&s)),
                "tau_hat": hat.time().to_map(inst.space()),
                "optimal_value": optimal_value,
            });
            if let Some(r) = &report {
                let obj = doc.as_object_mut().expect("object");
                obj.insert("optimal_times".into(), to_value(&r.attained_by));
                obj.insert("optimal_set".into(), to_value(&r.optimal_set));
                obj.insert("tau_tilde".into(), to_value(&r.tau_tilde));
                obj.insert("tau_alpha".into(), to_value(&r.tau_alpha));
            }
            print_json(&doc);
        }
        Format::Csv => print!("{}", tables_to_csv(&tables)),
        Format::Table => {
            let mut out = tables_text(&tables, &inst);
            writeln!(out, "S              {}", time_string(&s, &inst)).unwrap();
            writeln!(out, "first contact  {}", time_string(&hat, &inst)).unwrap();
            writeln!(out, "optimal value  {optimal_value}").unwrap();
            if let Some(r) = &report {
                writeln!(out, "optimal times").unwrap();
                for tau in &r.attained_by {
                    let m = to_value(tau);
                    writeln!(out, "  {}", map_string(m.as_object().expect("map"))).unwrap();
                }
            }
            print!("{out}");
        }
    }
    Ok(0)
}

fn report_code(report: &PropertyReport, budget: BudgetArgs) -> u8 {
    if !report.all_pass() {
        1
    } else if budget.strict_budget && report.summary.skipped_budget > 0 {
        3
    } else {
        0
    }
}

fn verify(file: &Path, props: Option<Vec<String>>, budget: BudgetArgs) -> Outcome {
    let inst = load(file)?;
    let vs = value_backward(&inst);
    let report = run_suite(&vs, &Config { budget: budget.budget, props })?;
    print_json(&to_value(&report));
    for f in report.failures() {
        eprintln!("property {} failed", f.id);
    }
    if report.summary.skipped_budget > 0 {
        eprintln!("{} properties skipped: budget {} exceeded", report.summary.skipped_budget, budget.budget);
    }
    Ok(report_code(&report, budget))
}

fn gen_params(gen: &GenArgs) -> Result<GenParams, Failure> {
    if gen.qlc_prob.is_negative() || gen.qlc_prob > Rational::one() {
        return Err(invalid(format!("--qlc-prob must lie in [0, 1], got {}", gen.qlc_prob)));
    }
    if gen.max_outcomes == 0 {
        return Err(invalid("--max-outcomes must be at least 1"));
    }
    Ok(GenParams {
        max_outcomes: gen.max_outcomes,
        horizon: gen.horizon,
        qlc_violation_prob: gen.qlc_prob.to_f64(),
        reward_max: gen.reward_max,
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    write_atomic(path, text.as_bytes()).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn fuzz(first: u64, count: u64, gen: &GenArgs, out: Option<&Path>, budget: BudgetArgs) -> Outcome {
    let params = gen_params(gen)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| invalid(format!("{}: {e}", dir.display())))?;
    }
    let mut failing = Vec::new();
    let mut skipped = Vec::new();
    for seed in first..first + count {
        let inst = generate_random(seed, &params);
        let vs = value_backward(&inst);
        let report = run_suite(&vs, &Config { budget: budget.budget, props: None })?;
        if report.summary.skipped_budget > 0 {
            skipped.push(seed);
        }
        if report.all_pass() {
            continue;
        }
        let ids: Vec<&str> = report.failures().map(|f| f.id).collect();
        eprintln!("seed {seed}: {} failed", ids.join(", "));
        let mut entry = json!({ "seed": seed, "properties": ids });
        if let Some(dir) = out {
            let inst_path = dir.join(format!("seed-{seed}.json"));
            let report_path = dir.join(format!("seed-{seed}.report.json"));
            write_file(&inst_path, &instance::to_json(&inst))?;
            let mut text = serde_json::to_string_pretty(&to_value(&report)).expect("report serializes");
            text.push('\n');
            write_file(&report_path, &text)?;
            entry["instance"] = json!(inst_path.display().to_string());
            entry["report"] = json!(report_path.display().to_string());
        }
        failing.push(entry);
    }
    let code = if !failing.is_empty() {
        1
    } else if budget.strict_budget && !skipped.is_empty() {
        3
    } else {
        0
    };
    print_json(&json!({
        "first_seed": first,
        "seeds": count,
        "params": {
            "max_outcomes": params.max_outcomes,
            "horizon": params.horizon,
            "qlc_prob": gen.qlc_prob,
            "reward_max": params.reward_max,
        },
        "budget": budget.budget,
        "failing": failing,
        "skipped_budget": skipped,
    }));
    Ok(code)
}

fn decompose_cmd(file: &Path, format: Format) -> Outcome {
    let inst = load(file)?;
    let vs = value_backward(&inst);
    let d = decompose(&vs)?;
    d.check(&vs).map_err(|e| Failure { code: 1, message: e })?;
    let tables = decomposition_tables(&d, inst.space());
    match format {
        Format::Json => print_json(&to_value(&tables)),
        Format::Csv => print!("{}", tables_to_csv(&tables)),
        Format::Table => print!("{}", tables_text(&tables, &inst)),
    }
    Ok(0)
}

fn enumerate(file: &Path, from: usize, from_map: Option<&Path>, strict: bool, format: Format, budget: BudgetArgs) -> Outcome {
    let inst = load(file)?;
    let s = start_time(&inst, Some(from), from_map)?;
    let times = inst.predictable_after(&s, strict, budget.budget)?;
    let space = inst.space();
    let rows: Vec<(PredictableTime, Rational)> =
        times.into_iter().map(|t| {
            let e = space.expectation(&inst.reward().eval_at(&t));
            (t, e)
        }).collect();
    match format {
        Format::Json => {
            let list: Vec<Value> = rows
                .iter()
                .map(|(t, e)| json!({ "tau": t.time().to_map(space), "expected_reward": e }))
                .collect();
            print_json(&Value::Array(list));
        }
        Format::Csv => {
            let mut out = String::from("index,outcome,time,expected_reward\n");
            for (i, (t, e)) in rows.iter().enumerate() {
                for w in space.outcomes() {
                    writeln!(out, "{i},{},{},{e}", space.id(w), t.at(w)).unwrap();
                }
            }
            print!("{out}");
        }
        Format::Table => {
            for (t, e) in &rows {
                println!("{e:>8}  {}", time_string(t, &inst));
            }
        }
    }
    Ok(0)
}

fn generate(seed: Option<u64>, name: Option<&str>, gen: &GenArgs, out: Option<&Path>) -> Outcome {
    let inst = match (name, seed) {
        (Some(name), _) => canonical(name)?,
        (None, Some(seed)) => generate_random(seed, &gen_params(gen)?),
        (None, None) => return Err(invalid("either --seed or --canonical is required")),
    };
    let text = instance::to_json(&inst);
    match out {
        Some(path) => write_file(path, &text)?,
        None => print!("{text}"),
    }
    Ok(0)
}
