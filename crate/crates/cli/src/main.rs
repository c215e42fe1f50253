//! `mir`: solve, simulate and verify from the command line.
//!
//! Exit status 0 means success, 1 a failed verification, 2 a configuration
//! error or an instance the requested mechanism refuses.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mir_core::bic::{welfare_envelope, BicConfig};
use mir_core::catalog;
use mir_core::dp;
use mir_core::gmdp::{w_value, TerminalMode, TerminalRewards};
use mir_core::instance::{generate_instance, FamilyTemplate};
use mir_core::instance_file::parse_instance;
use mir_core::policies::Ogp;
use mir_core::sim::{
    convergence_bound, estimate_welfare, replication_rng, simulate, welfare_csv_header, welfare_csv_row, Mechanism,
};
use mir_core::verify::{run_suite, Suite, VerifyOptions};
use mir_core::{Instance, StateSet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Largest OGP/optimum difference `solve` accepts.
const SOLVE_TOL: f64 = 1e-9;

#[derive(Parser)]
#[command(name = "mir", version, about = "Individually rational exploration: planning, simulation and audits")]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the planning problem exactly and compare OGP with the optimum.
    Solve(SolveArgs),
    /// Estimate per-round welfare of a mechanism over several horizons.
    Simulate(SimulateArgs),
    /// Run a property suite.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct Source {
    /// Instance file (TOML), or `catalog:<name>` for a built-in instance.
    #[arg(long, conflicts_with = "generate", required_unless_present = "generate")]
    instance: Option<String>,

    /// Random instance, e.g. `--generate K=6 family=discrete seed=3`.
    #[arg(long, num_args = 1.., value_name = "KEY=VALUE")]
    generate: Option<Vec<String>>,

    /// Master seed; defaults to the instance file's seed, then 0.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    source: Source,

    /// `exact`, or `mc:<samples>` for Monte Carlo terminal rewards.
    #[arg(long, default_value = "exact")]
    terminal_mode: String,

    /// Where to write the optimal-value table (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: Source,

    #[arg(long, default_value = "iregb")]
    mechanism: String,

    /// Strictly increasing, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    horizons: Vec<u64>,

    #[arg(long, default_value_t = 1000)]
    replications: u64,

    /// CSV output path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,

    /// JSON-lines trace of replication 0 at the largest horizon.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// equivalence, mir-certificates, ogp-optimality, dominance or bic-audit.
    suite: String,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[arg(long, default_value_t = 100)]
    instances: usize,

    #[arg(long, default_value_t = 8)]
    max_k: usize,

    /// Generator for ogp-optimality, e.g. `--generate family=unordered`.
    #[arg(long, num_args = 1.., value_name = "KEY=VALUE")]
    generate: Option<Vec<String>>,

    #[arg(long, default_value_t = 10_000)]
    replications: u64,

    #[arg(long, default_value_t = 200)]
    horizon: u64,

    #[arg(long)]
    out: Option<PathBuf>,
}

struct Loaded {
    id: String,
    instance: Instance,
    seed: u64,
}

struct Generator {
    k: Option<usize>,
    family: FamilyTemplate,
    seed: Option<u64>,
}

fn parse_generator(pairs: &[String]) -> Result<Generator> {
    let mut generator = Generator { k: None, family: FamilyTemplate::ShiftedDiscrete { atoms: 4 }, seed: None };
    for pair in pairs {
        let (key, value) = pair.split_once('=').ok_or_else(|| anyhow!("expected KEY=VALUE, got `{pair}`"))?;
        match key {
            "K" | "k" => generator.k = Some(value.parse().with_context(|| format!("bad K `{value}`"))?),
            "family" => generator.family = FamilyTemplate::from_name(value)?,
            "seed" => generator.seed = Some(value.parse().with_context(|| format!("bad seed `{value}`"))?),
            other => bail!("unknown generator key `{other}` (expected K, family or seed)"),
        }
    }
    Ok(generator)
}

fn load(source: &Source) -> Result<Loaded> {
    if let Some(pairs) = &source.generate {
        let g = parse_generator(pairs)?;
        let k = g.k.ok_or_else(|| anyhow!("--generate needs K=<n>"))?;
        let seed = source.seed.or(g.seed).unwrap_or(0);
        let instance = generate_instance(k, &g.family, &mut ChaCha8Rng::seed_from_u64(seed))?;
        return Ok(Loaded { id: format!("generated-K{k}-{}-s{seed}", g.family.name()), instance, seed });
    }
    let spec = source.instance.as_deref().expect("clap requires a source");
    if let Some(name) = spec.strip_prefix("catalog:") {
        let instance = catalog::by_name(name).ok_or_else(|| anyhow!("no built-in instance named `{name}`"))?;
        return Ok(Loaded { id: name.to_string(), instance, seed: source.seed.unwrap_or(0) });
    }
    let text = fs::read_to_string(spec).with_context(|| format!("reading {spec}"))?;
    let file = parse_instance(&text).with_context(|| format!("in {spec}"))?;
    let id = Path::new(spec).file_stem().map_or(spec.to_string(), |s| s.to_string_lossy().into_owned());
    Ok(Loaded { id, instance: file.instance, seed: source.seed.or(file.seed).unwrap_or(0) })
}

fn parse_terminal_mode(text: &str, seed: u64) -> Result<TerminalMode> {
    if text == "exact" {
        return Ok(TerminalMode::Exact);
    }
    let samples = text
        .strip_prefix("mc:")
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| anyhow!("terminal mode must be `exact` or `mc:<samples>`, got `{text}`"))?;
    Ok(TerminalMode::MonteCarlo { samples, seed })
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => io::stdout().write_all(text.as_bytes()).context("writing to stdout"),
    }
}

fn solve(args: &SolveArgs) -> Result<ExitCode> {
    let loaded = load(&args.source)?;
    let inst = &loaded.instance;
    let mode = parse_terminal_mode(&args.terminal_mode, loaded.seed)?;
    let rewards = TerminalRewards::new(inst, mode)
        .context("exact terminal rewards need discrete priors; try --terminal-mode mc:<samples>")?;
    let solution = dp::solve(inst, &rewards)?;
    let full = StateSet::full(inst.k());
    let ogp = w_value(inst, &Ogp::new(inst), full, &rewards)?;
    let best = solution.value(full);
    let difference = best - ogp;
    let order = match inst.neg_stochastically_ordered() {
        Ok(true) => "holds",
        Ok(false) => "violated",
        Err(_) => "undecidable",
    };
    let header = format!("# mir solve instance={} seed={} terminal-mode={mode} stochastic-order={order}\n", loaded.id, loaded.seed);
    write_output(args.out.as_deref(), &format!("{header}{}", solution.to_text()))?;
    let mut out = io::stdout();
    if args.out.is_some() {
        write!(out, "{header}")?;
    }
    writeln!(out, "ogp-value={ogp:?}\nw-star={best:?}\ndifference={difference:?}")?;
    if difference.abs() <= SOLVE_TOL {
        writeln!(out, "status=ok")?;
        return Ok(ExitCode::SUCCESS);
    }
    if order == "holds" {
        writeln!(out, "status=failure OGP differs from the optimum although stochastic order holds")?;
    } else {
        writeln!(out, "status=failure OGP suboptimal (stochastic order {order})")?;
    }
    Ok(ExitCode::from(1))
}

fn simulate_cmd(args: &SimulateArgs) -> Result<ExitCode> {
    let mechanism: Mechanism = args.mechanism.parse()?;
    if args.horizons.is_empty() || args.horizons.windows(2).any(|w| w[0] >= w[1]) {
        bail!("--horizons must be strictly increasing, got {:?}", args.horizons);
    }
    if args.horizons[0] == 0 {
        bail!("horizons must be positive");
    }
    let loaded = load(&args.source)?;
    let inst = &loaded.instance;
    let bic = match mechanism {
        Mechanism::BicIregb => Some(BicConfig::for_instance(inst).context("bic_iregb refuses this instance")?),
        _ => None,
    };
    let w_star = if mechanism == Mechanism::Iregb {
        TerminalRewards::exact(inst).ok().and_then(|r| dp::w_star(inst, &r).ok())
    } else {
        None
    };
    let mut csv = format!(
        "# mir simulate instance={} mechanism={mechanism} replications={} seed={}\n{}\n",
        loaded.id,
        args.replications,
        loaded.seed,
        welfare_csv_header()
    );
    for &horizon in &args.horizons {
        let estimate = estimate_welfare(inst, mechanism, horizon, args.replications, loaded.seed)?;
        let bound = match (&bic, w_star) {
            (Some(cfg), _) => welfare_envelope(inst, cfg, horizon, 3.0).ok(),
            (None, Some(w)) => convergence_bound(inst, horizon, w).ok(),
            _ => None,
        };
        csv.push_str(&welfare_csv_row(&loaded.id, mechanism, &estimate, bound));
        csv.push('\n');
    }
    write_output(args.out.as_deref(), &csv)?;
    if let Some(path) = &args.trace {
        let horizon = *args.horizons.last().expect("non-empty");
        let trace = simulate(inst, mechanism, horizon, &mut replication_rng(loaded.seed, 0))?;
        let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        trace.write_jsonl(io::BufWriter::new(file)).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn verify(args: &VerifyArgs) -> Result<ExitCode> {
    let suite: Suite = args.suite.parse()?;
    let mut options = VerifyOptions {
        seed: args.seed,
        instances: args.instances,
        max_k: args.max_k,
        family: None,
        replications: args.replications,
        horizon: args.horizon,
    };
    if let Some(pairs) = &args.generate {
        let g = parse_generator(pairs)?;
        options.family = Some(g.family);
        options.max_k = g.k.unwrap_or(options.max_k);
        options.seed = g.seed.unwrap_or(options.seed);
    }
    let report = run_suite(suite, &options)?;
    write_output(args.out.as_deref(), &report.to_text())?;
    Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    match &cli.command {
        Command::Solve(args) => solve(args),
        Command::Simulate(args) => simulate_cmd(args),
        Command::Verify(args) => verify(args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
