mod config;
mod report;
mod suites;
mod svg;

use anyhow::{Context as _, Result};
use clap::{Parser, Subcommand, ValueEnum};
use config::{RunConfig, SUITES};
use num_complex::Complex64;
use qcglue::numeric::log_space;
use qcglue::{GlueConfig, Variant};
use report::{Summary, SCHEMA_VERSION};
use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;
use suites::Context;

#[derive(Parser)]
#[command(name = "qcglue", version, about = "Glued entire functions: evaluation and verification suites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the suites listed in a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate G0 or G1 at one point and print a CSV row.
    Eval {
        #[arg(long)]
        sigma: f64,
        #[arg(long, value_enum, default_value = "g0")]
        variant: VariantArg,
        /// Point as RE,IM.
        #[arg(long, allow_hyphen_values = true)]
        z: String,
        /// Sector count for the power lift z ↦ G(z^N).
        #[arg(long, default_value_t = 1)]
        n: u32,
        #[arg(long, default_value_t = 512)]
        k_max: usize,
    },
    /// Run a single suite with default settings.
    Suite {
        name: String,
        #[arg(long, default_value_t = 0.75)]
        sigma: f64,
        #[arg(long, default_value = "qcglue-out")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    G0,
    G1,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::G0 => Variant::G0,
            VariantArg::G1 => Variant::G1,
        }
    }
}

enum Failure {
    Usage(String),
    Checks,
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    if let Ok(t) = std::env::var("QCGLUE_THREADS") {
        match t.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: QCGLUE_THREADS must be a positive integer, got {t:?}");
                return ExitCode::from(2);
            }
        }
    }
    let outcome = match cli.command {
        Command::Run { config } => load_config(&config).and_then(run),
        Command::Eval { sigma, variant, z, n, k_max } => eval(sigma, variant.into(), &z, n, k_max),
        Command::Suite { name, sigma, out } => run(RunConfig::with_defaults(sigma, vec![name], out)),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load_config(path: &PathBuf) -> Result<RunConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("reading {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("parsing {}: {e}", path.display())))
}

fn parse_point(s: &str) -> Result<Complex64, Failure> {
    let bad = || Failure::Usage(format!("expected --z RE,IM, got {s:?}"));
    let (re, im) = s.split_once(',').ok_or_else(bad)?;
    Ok(Complex64::new(re.trim().parse().map_err(|_| bad())?, im.trim().parse().map_err(|_| bad())?))
}

fn eval(sigma: f64, variant: Variant, z: &str, n: u32, k_max: usize) -> Result<(), Failure> {
    let z = parse_point(z)?;
    if !(sigma > 0.5 && sigma < 1.0) || n == 0 || k_max < 3 {
        return Err(Failure::Usage("need sigma in (1/2, 1), n >= 1 and k_max >= 3".into()));
    }
    let gamma = 1.0 / (2.0 * sigma - 1.0);
    let c = GlueConfig::with_k_max(sigma, k_max.min(qcglue::schedule::max_feasible_k(gamma))).context("building glue")?;
    let row = c.eval_row(z, n, variant).context("evaluating")?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    println!("z_re,z_im,region,logG_re,logG_im,zero_flag");
    println!("{},{},{},{},{},{}", row.z_re, row.z_im, row.region, opt(row.log_g_re), opt(row.log_g_im), row.zero_flag);
    Ok(())
}

fn run(cfg: RunConfig) -> Result<(), Failure> {
    cfg.validate().map_err(Failure::Usage)?;
    fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    let grid = log_space(cfg.r_grid.lo, cfg.r_grid.hi, cfg.r_grid.count);
    let start = Instant::now();
    let ctx = Context::new(cfg.sigma, cfg.k_max, cfg.sectors, grid, cfg.seed).context("building glue")?;
    eprintln!("glue built for sigma = {} with k_max = {} in {:.2?}", cfg.sigma, ctx.glue.k_max(), start.elapsed());

    let mut results = BTreeMap::new();
    let mut failing = Vec::new();
    for name in SUITES.iter().filter(|s| cfg.suites.iter().any(|c| c == *s)) {
        let t = Instant::now();
        let summary = match suites::run_suite(name, &ctx) {
            Ok(out) => report::write_suite(&cfg.out_dir, name, &out)?,
            Err(e) => {
                eprintln!("{name}: evaluation failed: {e}");
                report::SuiteSummary::errored(name, &e.to_string())
            }
        };
        eprintln!("{} {name} (worst margin {:.3e}) in {:.2?}", if summary.pass { "PASS" } else { "FAIL" }, summary.worst_margin, t.elapsed());
        for c in summary.checks.iter().filter(|c| !(c.margin >= 0.0)) {
            failing.push(format!("{name}: {} = {} (margin {:.3e})", c.name, c.value, c.margin));
        }
        if !summary.pass && summary.checks.is_empty() {
            failing.push(format!("{name}: evaluation failed"));
        }
        results.insert(name.to_string(), summary);
    }
    let pass = results.values().all(|s| s.pass);
    let summary = Summary { schema_version: SCHEMA_VERSION, config: &cfg, effective_k_max: ctx.glue.k_max(), pass, suites: results };
    report::write_summary(&cfg.out_dir, &summary)?;
    eprintln!("wrote {} in {:.2?}", cfg.out_dir.join("summary.json").display(), start.elapsed());
    if pass {
        Ok(())
    } else {
        for f in &failing {
            eprintln!("failed: {f}");
        }
        Err(Failure::Checks)
    }
}
