use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use spinal::divergence::{
    self, DeltaGrid, DivergenceError, ProblemSpec, SolverConfig,
};
use spinal::estimate::{run_pipeline, EstimateError};
use spinal::experiment::{run_to_files, ExperimentConfig, ExperimentError};
use spinal::prob::{Distribution, ProbError, TransformFn};
use spinal::spine::{identify, SpineError};
use spinal::tree::{simulate_sst_with_budget, Tree, TreeError, DEFAULT_NODE_BUDGET};

#[derive(Parser)]
#[command(
    name = "spinal",
    version,
    about = "Simulate spinal-structured branching trees, recover the hidden spine, and evaluate the identifiability criterion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TreeFormat {
    Json,
    Flat,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one spinal-structured tree and write it to a file.
    Simulate {
        /// Birth law as comma-separated probabilities, e.g. 0.35,0.4,0.25
        #[arg(long)]
        mu: String,
        /// Tilt weights, same length, first entry 0, e.g. 0,1,3
        #[arg(long)]
        f: String,
        /// Deepest observation horizon the tree must support.
        #[arg(long)]
        hmax: u32,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = TreeFormat::Json)]
        format: TreeFormat,
        /// Abort if the tree grows past this many nodes.
        #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
        budget: u64,
    },
    /// Print the per-node type forced by an observation window, as CSV.
    Identify {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        h: u32,
    },
    /// Run the full recovery pipeline on a window and write the bundle.
    Estimate {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        h: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the constrained KL program between two laws.
    Divergence {
        /// First law (the reference), comma-separated.
        #[arg(long)]
        p: String,
        /// Second law, comma-separated.
        #[arg(long)]
        q: String,
        /// Mixing weight of one instance; omit both weights to minimize
        /// the scaled family over its grid.
        #[arg(long, conflicts_with = "delta")]
        alpha: Option<f64>,
        /// Scale weight of one family member.
        #[arg(long)]
        delta: Option<f64>,
        /// Constraint relaxation; only meaningful with --alpha.
        #[arg(long, requires = "alpha")]
        eps: Option<f64>,
    },
    /// Evaluate the identifiability criterion of a model (mu, f).
    Criterion {
        #[arg(long)]
        mu: String,
        #[arg(long)]
        f: String,
    },
    /// Run the Monte-Carlo study described by a JSON config file.
    Experiment {
        #[arg(long)]
        config: PathBuf,
    },
}

struct CliError {
    message: String,
    code: i32,
}

impl CliError {
    fn invalid(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            code: 2,
        }
    }
}

impl From<ProbError> for CliError {
    fn from(e: ProbError) -> Self {
        Self::invalid(e.to_string())
    }
}

impl From<TreeError> for CliError {
    fn from(e: TreeError) -> Self {
        Self::invalid(e.to_string())
    }
}

impl From<SpineError> for CliError {
    fn from(e: SpineError) -> Self {
        Self::invalid(e.to_string())
    }
}

impl From<EstimateError> for CliError {
    fn from(e: EstimateError) -> Self {
        Self::invalid(e.to_string())
    }
}

impl From<DivergenceError> for CliError {
    fn from(e: DivergenceError) -> Self {
        let code = match &e {
            DivergenceError::NonConvergent { .. } => 3,
            _ => 2,
        };
        Self {
            message: e.to_string(),
            code,
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        let code = match &e {
            ExperimentError::Divergence(DivergenceError::NonConvergent { .. }) => 3,
            _ => 2,
        };
        Self {
            message: e.to_string(),
            code,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::invalid(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::invalid(e.to_string())
    }
}

fn parse_reals(name: &str, s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|_| CliError::invalid(format!("--{name}: cannot parse '{part}' as a real")))
        })
        .collect()
}

fn parse_distribution(name: &str, s: &str) -> Result<Distribution, CliError> {
    Ok(Distribution::new(parse_reals(name, s)?)?)
}

fn read_tree(path: &PathBuf) -> Result<Tree, CliError> {
    let text = std::fs::read_to_string(path)?;
    if text.trim_start().starts_with('{') {
        Ok(Tree::from_json_str(&text)?)
    } else {
        Ok(Tree::read_flat(text.as_bytes())?)
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), CliError> {
    let stdout = std::io::stdout();
    match writeln!(stdout.lock(), "{}", serde_json::to_string_pretty(value)?) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate {
            mu,
            f,
            hmax,
            seed,
            out,
            format,
            budget,
        } => {
            let mu = parse_distribution("mu", &mu)?;
            let f = TransformFn::new(parse_reals("f", &f)?)?;
            let tree = simulate_sst_with_budget(&mu, &f, hmax, seed, budget)?;
            let mut file = std::fs::File::create(&out)?;
            match format {
                TreeFormat::Json => file.write_all(tree.to_json_string().as_bytes())?,
                TreeFormat::Flat => tree.write_flat(&mut file)?,
            }
            eprintln!(
                "wrote {} nodes (generated to depth {}) to {}",
                tree.len(),
                tree.generated_to(),
                out.display()
            );
            Ok(())
        }
        Command::Identify { tree, h } => {
            let tree = read_tree(&tree)?;
            let observed = tree.observe(h)?;
            let report = identify(&observed);
            let stdout = std::io::stdout();
            match report.write_csv(&observed, &mut stdout.lock()) {
                Err(SpineError::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                other => Ok(other?),
            }
        }
        Command::Estimate { tree, h, out } => {
            let tree = read_tree(&tree)?;
            // Support bound from the whole file, not just the window, so
            // estimates line up with the law that generated the tree.
            let n_max = (0..tree.len() as u32)
                .map(|v| tree.num_children(v) as usize)
                .max()
                .unwrap_or(1)
                .max(1);
            let observed = tree.observe(h)?.with_n_max(n_max)?;
            let bundle = run_pipeline(&observed)?;
            std::fs::write(&out, serde_json::to_string_pretty(&bundle)?)?;
            eprintln!("wrote estimate bundle to {}", out.display());
            Ok(())
        }
        Command::Divergence {
            p,
            q,
            alpha,
            delta,
            eps,
        } => {
            let p = parse_distribution("p", &p)?;
            let q = parse_distribution("q", &q)?;
            let config = SolverConfig::default();
            match (alpha, delta) {
                (Some(alpha), None) => {
                    let spec = ProblemSpec::new(p, q)
                        .with_alpha(alpha)
                        .with_epsilon(eps.unwrap_or(0.0));
                    print_json(&divergence::solve(&spec, &config)?)
                }
                (None, Some(delta)) => {
                    let (value, report) = divergence::delta_value(&p, &q, delta, &config)?;
                    #[derive(serde::Serialize)]
                    struct DeltaOutput {
                        delta: f64,
                        value: f64,
                        report: spinal::divergence::SolverReport,
                    }
                    print_json(&DeltaOutput {
                        delta,
                        value,
                        report,
                    })
                }
                (None, None) => print_json(&divergence::min_divergence(
                    &p,
                    &q,
                    &DeltaGrid::default(),
                    &config,
                )?),
                (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
            }
        }
        Command::Criterion { mu, f } => {
            let mu = parse_distribution("mu", &mu)?;
            let f = TransformFn::new(parse_reals("f", &f)?)?;
            print_json(&divergence::criterion(&mu, &f, &SolverConfig::default())?)
        }
        Command::Experiment { config } => {
            let text = std::fs::read_to_string(&config)?;
            let cfg: ExperimentConfig = serde_json::from_str(&text)?;
            let output = run_to_files(&cfg)?;
            println!(
                "criterion {:.6}; {} records, {} failures; outputs in {}",
                output.criterion.criterion,
                output.records.len(),
                output.failures.len(),
                cfg.output_dir.display()
            );
            Ok(())
        }
    }
}

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {}", e.message);
            std::process::exit(e.code);
        }
    }
}
