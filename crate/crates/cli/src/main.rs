use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use arbor_admm::experiment::{compute_gap, run_experiment, solve_mode, SweepSpec};
use arbor_admm::model::{
    build_centralized_subproblem, generate_instance, parse_instance, write_instance, GenerateParams,
};
use arbor_admm::oracle::{exact_project, exact_solve, EnumerationBudget, ExactOutcome};
use arbor_admm::report::{write_summary, SummaryRow};
use arbor_admm::{central, project_tree, Instance, Mode, SolverConfig, Topology};

#[derive(Parser, Debug)]
#[command(name = "arbor-admm", version, about = "ADMM heuristics for hop-constrained tree design")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a random instance.
    Gen(GenArgs),
    /// Run the centralized solver.
    SolveCentral(SolveArgs),
    /// Run the distributed solver.
    SolveDist(SolveArgs),
    /// Exact optimum by spanning-tree enumeration.
    Oracle(OracleArgs),
    /// Project `w - mu` onto the spanning trees of an instance graph.
    Project(ProjectArgs),
    /// Sweep sizes, seeds, rho values and solver modes.
    Sweep(SweepArgs),
    /// Print the first centralized subproblem in text form.
    QpDump(QpDumpArgs),
}

#[derive(Args, Debug, Clone)]
struct InstanceArgs {
    /// Instance file; otherwise one is generated from --n/--p/--seed.
    #[arg(long, conflicts_with_all = ["n", "p"])]
    instance: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    hop_slack: usize,
    /// Defaults to floor(n/5), at least 1.
    #[arg(long)]
    commodities: Option<usize>,
}

impl InstanceArgs {
    fn load(&self) -> Result<Instance> {
        if let Some(path) = &self.instance {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let (inst, _) = parse_instance(&text).with_context(|| format!("parsing {}", path.display()))?;
            return Ok(inst);
        }
        let Some(n) = self.n else {
            bail!("give either --instance PATH or --n INT");
        };
        Ok(generate_instance(&self.params(n))?)
    }

    fn params(&self, n: usize) -> GenerateParams {
        GenerateParams {
            commodities: self.commodities,
            hop_slack: self.hop_slack,
            ..GenerateParams::new(n, self.p, self.seed)
        }
    }
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    /// Run agents one after another instead of on the thread pool.
    #[arg(long)]
    sequential: bool,
}

impl SolverArgs {
    fn config(&self, seed: u64) -> SolverConfig {
        SolverConfig {
            rho: self.rho,
            tol: self.tol,
            max_iters: self.max_iters,
            seed,
            parallel: !self.sequential,
            ..SolverConfig::default()
        }
    }
}

#[derive(Args, Debug)]
struct GenArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Output file; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Directory for trace.csv, summary.csv and solution.txt.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Distributed traces: one row per agent instead of one per round.
    #[arg(long)]
    trace_per_agent: bool,
    /// Also run the exact solver and report the gap.
    #[arg(long)]
    oracle: bool,
    #[arg(long, default_value_t = 24)]
    oracle_max_edges: usize,
    /// Record elapsed milliseconds in the summary (otherwise 0).
    #[arg(long)]
    wall_time: bool,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, default_value_t = 24)]
    max_edges: usize,
    #[arg(long, default_value_t = 10_000_000)]
    max_trees: u64,
    /// Write the instance with the optimal tree stanza here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ProjectArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Comma-separated w values, one per edge.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    w: Vec<f64>,
    /// Comma-separated mu values; zeros if omitted.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    mu: Vec<f64>,
    /// Cross-check against exhaustive enumeration.
    #[arg(long)]
    exhaustive: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Central,
    Distributed,
    Both,
}

impl ModeArg {
    fn modes(self) -> Vec<Mode> {
        match self {
            ModeArg::Central => vec![Mode::Central],
            ModeArg::Distributed => vec![Mode::Distributed],
            ModeArg::Both => vec![Mode::Central, Mode::Distributed],
        }
    }
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Comma-separated node counts.
    #[arg(long, value_delimiter = ',', default_value = "6")]
    n: Vec<usize>,
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    /// Number of seeds, counted up from --seed.
    #[arg(long, default_value_t = 3)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated penalty values.
    #[arg(long, value_delimiter = ',', default_value = "1.0")]
    rho: Vec<f64>,
    #[arg(long, value_enum, default_value_t = ModeArg::Both)]
    modes: ModeArg,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    #[arg(long, default_value_t = 2)]
    hop_slack: usize,
    #[arg(long)]
    commodities: Option<usize>,
    #[arg(long)]
    no_oracle: bool,
    #[arg(long, default_value_t = 24)]
    oracle_max_edges: usize,
    #[arg(long)]
    trace_per_agent: bool,
    /// Record elapsed milliseconds (breaks byte-identical reruns).
    #[arg(long)]
    wall_time: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct QpDumpArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => Ok(io::stdout().write_all(text.as_bytes())?),
    }
}

fn solve(args: &SolveArgs, mode: Mode) -> Result<()> {
    let inst = args.instance.load()?;
    let cfg = args.solver.config(args.instance.seed);
    let mut report = solve_mode(&inst, &cfg, mode)?;
    if args.oracle {
        let outcome = exact_solve(&inst, EnumerationBudget::with_max_edges(args.oracle_max_edges))?;
        if let ExactOutcome::Optimal { objective, .. } = outcome {
            report.oracle_obj = Some(objective);
            if report.feasible {
                report.gap_pct = Some(compute_gap(report.objective, objective)?);
            }
        }
    }
    println!(
        "{mode}: status={} iterations={} objective={} feasible={} extraction={}{}",
        report.status.as_str(),
        report.iterations,
        report.objective,
        report.feasible,
        report.extraction.as_str(),
        report.gap_pct.map_or(String::new(), |g| format!(" gap={g:.4}%"))
    );
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        let trace = BufWriter::new(File::create(dir.join("trace.csv"))?);
        report.trace.write_csv(trace, args.trace_per_agent)?;
        fs::write(dir.join("solution.txt"), write_instance(&inst, Some(&report.z)))?;
        let row = SummaryRow {
            n: inst.node_count(),
            m: inst.edge_count(),
            seed: args.instance.seed,
            rho: cfg.rho,
            mode,
            iters: report.iterations,
            objective: Some(report.objective),
            feasible: report.feasible,
            gap_pct: report.gap_pct,
            oracle_obj: report.oracle_obj,
            status: if report.feasible { "ok".into() } else { report.extraction.as_str().into() },
            wall_ms: if args.wall_time { report.wall_ms } else { 0 },
            trace_path: "trace.csv".into(),
        };
        write_summary(BufWriter::new(File::create(dir.join("summary.csv"))?), &[row])?;
    }
    Ok(())
}

fn oracle(args: &OracleArgs) -> Result<()> {
    let inst = args.instance.load()?;
    let budget = EnumerationBudget {
        max_edges: args.max_edges,
        max_trees: args.max_trees,
    };
    match exact_solve(&inst, budget)? {
        ExactOutcome::Optimal { z, objective } => {
            println!("optimum {objective}");
            let text = write_instance(&inst, Some(&z));
            match &args.out {
                Some(p) => write_text(Some(p), &text)?,
                None => print!("{text}"),
            }
        }
        ExactOutcome::Infeasible => println!("infeasible"),
    }
    Ok(())
}

fn project(args: &ProjectArgs) -> Result<()> {
    let inst = args.instance.load()?;
    let m = inst.edge_count();
    if args.w.len() != m {
        bail!("--w needs {m} values, got {}", args.w.len());
    }
    let mu = if args.mu.is_empty() { vec![0.0; m] } else { args.mu.clone() };
    if mu.len() != m {
        bail!("--mu needs {m} values, got {}", mu.len());
    }
    let z = project_tree(&args.w, &mu, Topology::Undirected(inst.graph()))?;
    let dist: f64 = (0..m)
        .map(|k| (if z.get(k) { 1.0 } else { 0.0 } - args.w[k] + mu[k]).powi(2))
        .sum();
    let bits: Vec<String> = z.bits().iter().map(|&b| u8::from(b).to_string()).collect();
    println!("z {}", bits.join(","));
    println!("distance2 {dist}");
    if args.exhaustive {
        let (_, best) = exact_project(&args.w, &mu, inst.graph(), EnumerationBudget::default())?;
        println!("exhaustive {best}");
    }
    Ok(())
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let spec = SweepSpec {
        ns: args.n.clone(),
        seeds: (args.seed..args.seed + args.seeds).collect(),
        rhos: args.rho.clone(),
        modes: args.modes.modes(),
        p: args.p,
        hop_slack: args.hop_slack,
        commodities: args.commodities,
        solver: SolverConfig {
            tol: args.tol,
            max_iters: args.max_iters,
            ..SolverConfig::default()
        },
        oracle: !args.no_oracle,
        budget: EnumerationBudget::with_max_edges(args.oracle_max_edges),
        out_dir: args.out.clone(),
        record_wall_time: args.wall_time,
        trace_per_agent: args.trace_per_agent,
    };
    let rows = run_experiment(&spec)?;
    let expected = spec.ns.len() * spec.seeds.len() * spec.rhos.len() * spec.modes.len();
    println!("{} rows written to {}", rows.len(), args.out.join("summary.csv").display());
    if rows.len() != expected {
        bail!("expected {expected} rows, got {}", rows.len());
    }
    Ok(())
}

fn qp_dump(args: &QpDumpArgs) -> Result<()> {
    let inst = args.instance.load()?;
    let cfg = SolverConfig::with_rho(args.rho);
    let s0 = central::init_state(&inst, &cfg)?;
    let p = build_centralized_subproblem(&inst, &s0.z.to_f64(), &s0.y, &s0.mu, &s0.eta, args.rho)?;
    print!("{}", p.dump());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Gen(a) => {
            let inst = a.instance.load()?;
            write_text(a.out.as_deref(), &write_instance(&inst, None))
        }
        Command::SolveCentral(a) => solve(a, Mode::Central),
        Command::SolveDist(a) => solve(a, Mode::Distributed),
        Command::Oracle(a) => oracle(a),
        Command::Project(a) => project(a),
        Command::Sweep(a) => sweep(a),
        Command::QpDump(a) => qp_dump(a),
    }
}
