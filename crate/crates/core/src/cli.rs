//! Command-line front end. [`run`] is the whole program minus process exit,
//! so tests can drive it with in-memory streams.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::enbcds::{Context, CostMode, Enbcds, SpendVector};
use crate::io::{
    analyze, emit_curve_marked, emit_report, parse_scenario_with, Format, ParseOptions, ScenarioError, ScenarioFile,
};
use crate::optimize::{allocate_with, optimal_spend_with_mode, AllocationOptions};
use crate::sensitivity::sample;

#[derive(Debug, Parser)]
#[command(
    name = "gridcba",
    version,
    about = "Expected net benefit of cyber-defense spending on grid digital functionalities"
)]
pub struct Cli {
    /// Emit JSON instead of tables.
    #[arg(long, global = true)]
    pub json: bool,
    /// Warn about unknown scenario fields instead of rejecting them.
    #[arg(long, global = true)]
    pub lenient: bool,
    /// How spend enters the expected cyber cost.
    #[arg(long, global = true, value_enum, default_value_t = ModeArg::Additive)]
    pub cost_mode: ModeArg,
    /// Write output here (atomically) instead of stdout.
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    /// f(s) = s + sum_j P_s(x_j) L_j
    Additive,
    /// f(s) = sum_j P_s(x_j) (L_j + s)
    Literal,
}

impl From<ModeArg> for CostMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Additive => CostMode::Additive,
            ModeArg::Literal => CostMode::Literal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Svg,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a scenario file and print its violations or "OK".
    Validate { file: PathBuf },
    /// ENBCDS of one GDF at a given spend.
    Evaluate {
        file: PathBuf,
        #[arg(long)]
        gdf: String,
        #[arg(long)]
        spend: f64,
    },
    /// Sampled ENBCDS curve of one GDF.
    Curve {
        file: PathBuf,
        #[arg(long)]
        gdf: String,
        /// Upper end of the spend axis (default: zero-spend expected cyber cost).
        #[arg(long)]
        s_max: Option<f64>,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
    },
    /// Optimal spend and peak ENBCDS of one GDF.
    Optimize {
        file: PathBuf,
        #[arg(long)]
        gdf: String,
    },
    /// Split the budget across the portfolio.
    Allocate {
        file: PathBuf,
        /// Overrides the budget in the file.
        #[arg(long)]
        budget: Option<f64>,
    },
    /// Monte Carlo over the scenario's uncertain parameters.
    Sample {
        file: PathBuf,
        #[arg(long)]
        draws: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Comparison of actual, optimal and allocated spend for every GDF.
    Report {
        file: PathBuf,
        /// Also write one SVG curve per GDF into this directory.
        #[arg(long)]
        plots: Option<PathBuf>,
        #[arg(long)]
        budget: Option<f64>,
    },
}

/// Failure with its exit code.
struct Failure {
    code: i32,
    msg: String,
}

impl Failure {
    fn domain(msg: impl std::fmt::Display) -> Self {
        Self {
            code: 1,
            msg: msg.to_string(),
        }
    }

    fn usage(msg: impl std::fmt::Display) -> Self {
        Self {
            code: 2,
            msg: msg.to_string(),
        }
    }
}

/// Runs one invocation; returns the process exit code
/// (0 success, 1 domain error, 2 usage error).
pub fn run<I, A>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(stdout, "{text}")
            } else {
                write!(stderr, "{text}")
            };
            return code;
        }
    };
    let mut warnings = Vec::new();
    let result = execute(&cli, &mut warnings);
    for w in &warnings {
        let _ = writeln!(stderr, "warning: {w}");
    }
    match result.and_then(|out| deliver(&cli, &out, stdout)) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.msg);
            f.code
        }
    }
}

/// Output of a subcommand and the exit code it should produce.
struct Output {
    bytes: Vec<u8>,
    code: i32,
}

fn ok(bytes: impl Into<Vec<u8>>) -> Result<Output, Failure> {
    Ok(Output {
        bytes: bytes.into(),
        code: 0,
    })
}

fn deliver(cli: &Cli, out: &Output, stdout: &mut dyn Write) -> Result<i32, Failure> {
    match &cli.output {
        None => stdout
            .write_all(&out.bytes)
            .map_err(|e| Failure::domain(format!("writing output: {e}")))?,
        Some(path) => write_atomically(path, &out.bytes)?,
    }
    Ok(out.code)
}

fn write_atomically(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let fail = |e: &dyn std::fmt::Display| Failure::domain(format!("writing {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| fail(&e))?;
    tmp.write_all(bytes).map_err(|e| fail(&e))?;
    tmp.persist(path).map_err(|e| fail(&e.error))?;
    Ok(())
}

fn json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("outputs always serialize");
    s.push('\n');
    s.into_bytes()
}

fn load(path: &Path, cli: &Cli, warnings: &mut Vec<String>) -> Result<ScenarioFile, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::domain(format!("{}: {e}", path.display())))?;
    let parsed = parse_scenario_with(&text, ParseOptions { lenient: cli.lenient })
        .map_err(|e| Failure::domain(format!("{}: {e}", path.display())))?;
    warnings.extend(parsed.warnings);
    Ok(parsed.scenario)
}

fn thread_pool() -> Result<rayon::ThreadPool, Failure> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("ENBCDS_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| Failure::usage(format!("ENBCDS_THREADS must be a positive integer, got {v:?}")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(Failure::domain)
}

fn execute(cli: &Cli, warnings: &mut Vec<String>) -> Result<Output, Failure> {
    let mode = CostMode::from(cli.cost_mode);
    match &cli.command {
        Command::Validate { file } => validate(cli, file, warnings),
        Command::Evaluate { file, gdf, spend } => {
            let s = load(file, cli, warnings)?;
            let p = &s.portfolio;
            let mut spends = SpendVector::actual(p);
            spends.set(gdf.clone(), *spend).map_err(Failure::domain)?;
            let ctx = Context::new(p, &spends);
            let e = Enbcds::in_context(gdf, &ctx).map_err(Failure::domain)?.with_mode(mode);
            let v = e.value(*spend);
            if cli.json {
                #[derive(Serialize)]
                struct Out<'a> {
                    gdf: &'a str,
                    spend: f64,
                    enbcds: f64,
                    expected_cyber_cost: f64,
                }
                ok(json(&Out {
                    gdf,
                    spend: *spend,
                    enbcds: v,
                    expected_cyber_cost: e.cyber_cost(*spend),
                }))
            } else {
                ok(format!("{v}\n"))
            }
        }
        Command::Curve {
            file,
            gdf,
            s_max,
            samples,
            format,
        } => {
            let s = load(file, cli, warnings)?;
            let p = &s.portfolio;
            let spends = SpendVector::actual(p);
            let ctx = Context::new(p, &spends);
            let e = Enbcds::in_context(gdf, &ctx).map_err(Failure::domain)?.with_mode(mode);
            let curve = e.curve(*s_max, *samples).map_err(Failure::domain)?;
            if cli.json {
                return ok(json(&curve));
            }
            let format = match format {
                FormatArg::Csv => Format::Csv,
                FormatArg::Svg => Format::Svg,
            };
            let marker = e.gdf().actual_spend.map(|a| (a, e.value(a)));
            ok(emit_curve_marked(&curve, format, marker).map_err(Failure::domain)?)
        }
        Command::Optimize { file, gdf } => {
            let s = load(file, cli, warnings)?;
            let p = &s.portfolio;
            let spends = SpendVector::actual(p);
            let ctx = Context::new(p, &spends);
            let g = p
                .gdf(gdf)
                .ok_or_else(|| Failure::domain(crate::EvalError::UnknownGdf(gdf.clone())))?;
            let o = optimal_spend_with_mode(g, Some(&ctx), mode).map_err(Failure::domain)?;
            if cli.json {
                return ok(json(&o));
            }
            let mut out = format!("s* = {}\npeak = {}\n", o.s_star, o.value);
            if let Some(cf) = o.closed_form {
                let _ = writeln!(out, "closed form s* = {cf}");
            }
            ok(out)
        }
        Command::Allocate { file, budget } => {
            let s = load(file, cli, warnings)?;
            let opts = AllocationOptions {
                mode,
                budget: *budget,
                ..Default::default()
            };
            let r = allocate_with(&s.portfolio, &opts).map_err(Failure::domain)?;
            if cli.json {
                return ok(json(&r));
            }
            ok(allocation_table(&s, &r))
        }
        Command::Sample { file, draws, seed } => {
            let s = load(file, cli, warnings)?;
            let pool = thread_pool()?;
            let r = pool
                .install(|| sample(&s.portfolio, &s.uncertainty, *draws, *seed))
                .map_err(Failure::domain)?;
            if cli.json {
                return ok(json(&r));
            }
            ok(sample_table(&r))
        }
        Command::Report { file, plots, budget } => {
            let s = load(file, cli, warnings)?;
            let p = &s.portfolio;
            let opts = AllocationOptions {
                mode,
                budget: *budget,
                ..Default::default()
            };
            let a = analyze(p, &opts).map_err(Failure::domain)?;
            if let Some(dir) = plots {
                write_plots(&s, mode, dir)?;
            }
            if cli.json {
                return ok(json(&a));
            }
            ok(emit_report(p, &a))
        }
    }
}

fn validate(cli: &Cli, file: &Path, warnings: &mut Vec<String>) -> Result<Output, Failure> {
    let text = std::fs::read_to_string(file).map_err(|e| Failure::domain(format!("{}: {e}", file.display())))?;
    match parse_scenario_with(&text, ParseOptions { lenient: cli.lenient }) {
        Ok(parsed) => {
            warnings.extend(parsed.warnings);
            if cli.json {
                ok(json(&serde_json::json!({ "ok": true, "violations": [] })))
            } else {
                ok("OK\n")
            }
        }
        Err(ScenarioError::Validation(report)) => {
            let bytes = if cli.json {
                let v: Vec<_> = report
                    .violations
                    .iter()
                    .map(|v| serde_json::json!({ "entity": v.entity, "message": v.kind.to_string() }))
                    .collect();
                json(&serde_json::json!({ "ok": false, "violations": v }))
            } else {
                report.to_string().into_bytes()
            };
            Ok(Output { bytes, code: 1 })
        }
        Err(e) => Err(Failure::domain(format!("{}: {e}", file.display()))),
    }
}

fn write_plots(s: &ScenarioFile, mode: CostMode, dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::domain(format!("{}: {e}", dir.display())))?;
    let p = &s.portfolio;
    let spends = SpendVector::actual(p);
    let ctx = Context::new(p, &spends);
    for e in Enbcds::all_in_context(&ctx) {
        let e = e.with_mode(mode);
        let g = e.gdf();
        // GDFs with nothing at stake get a short axis so their flat curve still plots
        let s_max = if e.zero_spend_cost() > 0.0 {
            None
        } else {
            Some(g.actual_spend.unwrap_or(0.0).max(1.0))
        };
        let curve = e.curve(s_max, 200).map_err(Failure::domain)?;
        let marker = g.actual_spend.map(|a| (a, e.value(a)));
        let svg = emit_curve_marked(&curve, Format::Svg, marker).map_err(Failure::domain)?;
        write_atomically(&dir.join(format!("{}.svg", g.id)), &svg)?;
    }
    Ok(())
}

fn table(rows: &[Vec<String>]) -> String {
    let cols = rows.first().map_or(0, Vec::len);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, r) in rows.iter().enumerate() {
        let cells: Vec<String> = r
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (cell, w))| {
                if c == 0 {
                    format!("{cell:<w$}")
                } else {
                    format!("{cell:>w$}")
                }
            })
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            let _ = writeln!(out, "{}", rule.join("  "));
        }
    }
    out
}

fn allocation_table(s: &ScenarioFile, r: &crate::AllocationResult) -> String {
    let mut rows = vec![["gdf", "spend", "s*", "ENBCDS", "marginal", "status"]
        .map(String::from)
        .to_vec()];
    for g in &s.portfolio.gdfs {
        let dropped = r.dropped.contains(&g.id);
        rows.push(vec![
            g.id.clone(),
            format!("{:.2}", r.spends.get(&g.id)),
            format!("{:.2}", r.optimal[&g.id]),
            r.values.get(&g.id).map_or("-".into(), |v| format!("{v:.2}")),
            r.marginal_at_solution
                .get(&g.id)
                .map_or("-".into(), |v| format!("{v:.6}")),
            if dropped {
                "dropped"
            } else if g.mandatory {
                "mandatory"
            } else {
                "kept"
            }
            .to_string(),
        ]);
    }
    let mut out = table(&rows);
    let k = &r.kkt;
    let _ = writeln!(
        out,
        "\nbudget {:.2}  used {:.2}  objective {:.2}  method {:?}  iterations {}",
        r.budget, r.budget_used, r.objective, r.method, r.iterations
    );
    let _ = writeln!(
        out,
        "KKT: lambda {:.6}  interior [{}]  max interior gap {:.3e}  max zero excess {:.3e}  tolerance {:.3e}  {}",
        k.lambda,
        k.interior.join(", "),
        k.max_interior_gap,
        k.max_zero_excess,
        k.tolerance,
        if k.satisfied { "satisfied" } else { "NOT satisfied" }
    );
    out
}

fn sample_table(r: &crate::sensitivity::SensitivityReport) -> String {
    let head = ["quantity", "mean", "std", "p5", "p50", "p95"]
        .map(String::from)
        .to_vec();
    let row = |name: String, s: &crate::sensitivity::Stats| {
        vec![
            name,
            format!("{:.4}", s.mean),
            format!("{:.4}", s.std),
            format!("{:.4}", s.p5),
            format!("{:.4}", s.p50),
            format!("{:.4}", s.p95),
        ]
    };
    let mut rows = vec![head];
    for p in &r.params {
        rows.push(row(p.target.clone(), &p.stats));
    }
    for g in &r.gdfs {
        rows.push(row(format!("{} ENBCDS(s^A)", g.id), &g.enbcds_at_actual));
        rows.push(row(format!("{} s*", g.id), &g.s_star));
        rows.push(row(format!("{} ENBCDS(s*)", g.id), &g.peak_value));
        rows.push(row(format!("{} allocated", g.id), &g.allocated_spend));
    }
    rows.push(row("allocation objective".into(), &r.objective));
    let mut out = format!("draws {}  seed {}\n\n", r.draws, r.seed);
    out.push_str(&table(&rows));
    let drops: Vec<String> = r
        .gdfs
        .iter()
        .map(|g| format!("{} {:.4}", g.id, g.drop_frequency))
        .collect();
    let _ = writeln!(out, "\ndrop frequency: {}", drops.join(", "));
    let clamps: Vec<String> = r
        .params
        .iter()
        .filter(|p| p.clamped > 0)
        .map(|p| format!("{} {}", p.target, p.clamped))
        .collect();
    if !clamps.is_empty() {
        let _ = writeln!(out, "clamped probability draws: {}", clamps.join(", "));
    }
    out
}
