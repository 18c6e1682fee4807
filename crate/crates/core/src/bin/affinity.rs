use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use affinity_core::embedding::{sketched_embedding_with_stats, SketchParams, DEFAULT_JL_CONSTANT};
use affinity_core::expressivity::{counterexample_witness, expressivity_report};
use affinity_core::features::{
    assemble_features, augment_with_rotation, export_features, parse_families, AssembleOptions, ExportFormat,
};
use affinity_core::graph::{parse_graph_file, to_json};
use affinity_core::lapsolve::{SolverConfig, DEFAULT_ORACLE_CAP};
use affinity_core::oracle::{
    build_cycle, build_path, counterexample_pair, figure1_fixture, random_connected_graph, random_graph_with_edges,
};
use affinity_core::verify::{run_suite, Suite};
use affinity_core::AffinityError;

const EXIT_VERIFY: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser)]
#[command(
    name = "affinity",
    version,
    about = "Random-walk affinities: resistances, hitting times, resistive embeddings"
)]
struct Cli {
    #[command(flatten)]
    solver: SolverArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SolverArgs {
    /// Graphs with fewer nodes use the dense solver.
    #[arg(long, global = true, env = "AFFINITY_DENSE_THRESHOLD", default_value_t = 512)]
    dense_threshold: usize,
    /// Relative residual target of the iterative solver.
    #[arg(long, global = true, env = "AFFINITY_TOL", default_value_t = 1e-8)]
    tol: f64,
    /// Iteration cap (default 10·√n + 200).
    #[arg(long, global = true, env = "AFFINITY_MAX_ITER")]
    max_iter: Option<usize>,
    /// Largest graph accepted by exact dense computations.
    #[arg(long, global = true, env = "AFFINITY_ORACLE_CAP", default_value_t = DEFAULT_ORACLE_CAP)]
    oracle_cap: usize,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            dense_threshold: self.dense_threshold,
            rel_tolerance: self.tol,
            max_iterations: self.max_iter,
            oracle_cap: self.oracle_cap,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Compute features for a graph and export them.
    Compute {
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated subset of er, ht, node-emb, edge-emb.
        #[arg(long, default_value = "er,ht,node-emb,edge-emb")]
        features: String,
        /// Sketch accuracy; omit for the exact path.
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_JL_CONSTANT)]
        jl_constant: f64,
        /// Rotate the embedding families with this seed.
        #[arg(long)]
        rotate: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "json")]
        format: String,
    },
    /// Run invariant suites and report measured errors.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print the checks as JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Compare plain and affinity-augmented color refinement.
    DemoExpressivity {
        /// `figure1`, `pair:K`, or a graph file.
        #[arg(long)]
        graph: String,
    },
    /// Emit a generated graph in the JSON graph format.
    Gen {
        #[command(subcommand)]
        family: GenFamily,
        /// Write to a file instead of stdout.
        #[arg(long, global = true)]
        out: Option<PathBuf>,
    },
    /// Time the sketch pipeline on a random graph.
    Bench {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PairMember {
    Cycle,
    Path,
}

#[derive(Subcommand)]
enum GenFamily {
    Cycle {
        #[arg(long)]
        n: usize,
    },
    Path {
        #[arg(long)]
        n: usize,
    },
    /// Cycle on 4k+1 nodes and the path left by deleting one of its edges.
    Pair {
        #[arg(long)]
        k: usize,
        /// Emit one member only; both are emitted as `{"cycle": .., "path": ..}` otherwise.
        #[arg(long, value_enum)]
        member: Option<PairMember>,
    },
    Random {
        #[arg(long)]
        n: usize,
        /// Average degree.
        #[arg(long, default_value_t = 4.0)]
        deg: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        wmin: f64,
        #[arg(long, default_value_t = 1.0)]
        wmax: f64,
    },
}

enum Failure {
    Verify,
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<AffinityError> for Failure {
    fn from(e: AffinityError) -> Self {
        Failure::Other(e.into())
    }
}

fn emit(text: &str, out: Option<&PathBuf>) -> anyhow::Result<()> {
    match out {
        Some(p) => fs::write(p, format!("{text}\n")).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = cli.solver.config();
    cfg.validate()?;
    match cli.command {
        Command::Compute { input, features, epsilon, seed, jl_constant, rotate, out, format } => {
            let format: ExportFormat = format.parse()?;
            let families = parse_families(&features)?;
            let parsed = parse_graph_file(&input).with_context(|| format!("reading {}", input.display()))?;
            let opts = AssembleOptions { epsilon, seed, jl_constant };
            let mut fs_ = assemble_features(&parsed.graph, &families, &opts, &cfg)?;
            if let Some(r) = rotate {
                fs_ = augment_with_rotation(&fs_, r)?;
            }
            for path in export_features(&fs_, format, &out)? {
                eprintln!("wrote {}", path.display());
            }
        }
        Command::Verify { suite, seed, json } => {
            let suite: Suite = suite.parse()?;
            let checks = run_suite(suite, seed, &cfg)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&checks).context("serializing checks")?);
            } else {
                for c in &checks {
                    println!("{c}");
                }
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            eprintln!("{} checks, {failed} failed", checks.len());
            if failed > 0 {
                return Err(Failure::Verify);
            }
        }
        Command::DemoExpressivity { graph } => {
            if let Some(k) = graph.strip_prefix("pair:") {
                let k: usize = k.parse().with_context(|| format!("bad pair size `{k}`"))?;
                let w = counterexample_witness(k, &cfg)?;
                println!("cycle/path pair, k={k}, {} nodes", 4 * k + 1);
                println!("  WL colors after {k} rounds identical on the ball: {}", w.wl_colors_identical);
                println!("  resistances from v_0 differ on the ball: {}", w.resistances_differ);
                for ((i, a), b) in w.ball.iter().zip(&w.cycle_resistance).zip(&w.path_resistance) {
                    println!("    v_{i:<4} cycle={a:.6} path={b:.6}");
                }
                println!("{}", serde_json::to_string(&w).context("serializing witness")?);
            } else {
                let g = if graph == "figure1" {
                    figure1_fixture()
                } else {
                    parse_graph_file(graph.as_ref()).with_context(|| format!("reading {graph}"))?.graph
                };
                let report = expressivity_report(&g, &cfg)?;
                print!("{report}");
                println!("{}", serde_json::to_string(&report).context("serializing report")?);
            }
        }
        Command::Gen { family, out } => {
            let text = match family {
                GenFamily::Cycle { n } => to_json(&build_cycle(n)?),
                GenFamily::Path { n } => to_json(&build_path(n)?),
                GenFamily::Pair { k, member } => {
                    let (c, p) = counterexample_pair(k)?;
                    match member {
                        Some(PairMember::Cycle) => to_json(&c),
                        Some(PairMember::Path) => to_json(&p),
                        None => format!("{{\"cycle\":{},\"path\":{}}}", to_json(&c), to_json(&p)),
                    }
                }
                GenFamily::Random { n, deg, seed, wmin, wmax } => {
                    to_json(&random_connected_graph(n, deg, (wmin, wmax), seed)?)
                }
            };
            emit(&text, out.as_ref())?;
        }
        Command::Bench { n, m, epsilon, seed } => {
            if m + 1 < n {
                return Err(anyhow::anyhow!("m={m} cannot connect n={n} nodes").into());
            }
            let t0 = Instant::now();
            let g = random_graph_with_edges(n, m, (1.0, 1.0), seed)?;
            let gen_secs = t0.elapsed().as_secs_f64();
            let t1 = Instant::now();
            let (_, stats) = sketched_embedding_with_stats(&g, &SketchParams::new(epsilon, seed), &cfg)?;
            let secs = t1.elapsed().as_secs_f64();
            println!(
                "n={} m={} epsilon={epsilon} k={} solves={} pcg_iterations={} dense={} generate_s={gen_secs:.3} sketch_s={secs:.3}",
                g.num_nodes(),
                g.num_edges(),
                stats.dim,
                stats.solves,
                stats.total_iterations,
                stats.dense
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verify) => ExitCode::from(EXIT_VERIFY),
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            let solver = e
                .downcast_ref::<AffinityError>()
                .is_some_and(|a| a.is_non_convergence() || matches!(a, AffinityError::RankMismatch { .. }));
            ExitCode::from(if solver { EXIT_SOLVER } else { EXIT_INPUT })
        }
    }
}
