use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use sah_core::condition::{kappa_subtuple_max, ConditionReport};
use sah_core::grid::GridSpec;
use sah_core::linalg;
use sah_core::pipeline::{emit_result, homology_algorithm, parse_system, EmitOptions, RunMode, RunOptions};
use sah_core::polysys::scaled_homogenization;

#[derive(Parser)]
#[command(name = "sah", version, about = "Homology of basic semialgebraic sets from sphere grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Certified,
    Fixed,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and print the result document.
    Compute {
        #[arg(long)]
        input: PathBuf,
        /// Defaults to `fixed` when --r and --epsilon are given.
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        max_dim: Option<usize>,
        #[arg(long)]
        max_iterations: Option<usize>,
        #[arg(long)]
        min_r: Option<f64>,
        #[arg(long)]
        max_grid_size: Option<u128>,
        /// 0 selects the number of available cores.
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Leave wall_time_ms out so repeated runs are byte-identical.
        #[arg(long)]
        no_timing: bool,
    },
    /// Condition numbers of the homogenized equalities at a point of S^n.
    Condition {
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated coordinates x0,...,xn; normalized before use.
        #[arg(long, allow_hyphen_values = true)]
        point: String,
    },
    /// Size or points of the grid G_r on S^n.
    Grid {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        count_only: bool,
    },
}

fn parse_point(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|c| c.trim().parse::<f64>().map_err(|e| format!("bad coordinate {c:?}: {e}")))
        .collect()
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Compute {
            input,
            mode,
            r,
            epsilon,
            max_dim,
            max_iterations,
            min_r,
            max_grid_size,
            threads,
            seed,
            output,
            no_timing,
        } => {
            let sys = parse_system(&input).map_err(|e| format!("{}: {e}", input.display()))?;
            let mode = match mode {
                Some(Mode::Certified) => RunMode::Certified,
                Some(Mode::Fixed) => RunMode::Fixed,
                None if r.is_some() || epsilon.is_some() => RunMode::Fixed,
                None => RunMode::Certified,
            };
            let mut opts = RunOptions { mode, r_override: r, epsilon_override: epsilon, max_dim, threads, seed, ..Default::default() };
            if let Some(k) = max_iterations {
                opts.max_iterations = k;
            }
            if let Some(m) = min_r {
                opts.min_r = m;
            }
            if let Some(g) = max_grid_size {
                opts.max_grid_size = g;
            }
            let res = homology_algorithm(&sys, &opts).map_err(|e| e.to_string())?;
            let doc = emit_result(&res, &EmitOptions { timing: !no_timing });
            match output {
                Some(path) => std::fs::write(&path, doc).map_err(|e| format!("{}: {e}", path.display()))?,
                None => print!("{doc}"),
            }
            Ok(if res.certified { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Condition { input, point } => {
            let sys = parse_system(&input).map_err(|e| format!("{}: {e}", input.display()))?;
            let h = scaled_homogenization(&sys).map_err(|e| e.to_string())?;
            let x = parse_point(&point)?;
            if x.len() != h.num_vars() {
                return Err(format!("point needs {} coordinates, got {}", h.num_vars(), x.len()));
            }
            if linalg::norm(&x) == 0.0 {
                return Err("point must be non-zero".into());
            }
            let x = linalg::normalized(&x);
            let report = ConditionReport::compute(h.equalities(), &x, h.max_degree()).map_err(|e| e.to_string())?;
            let (k_max, sub) = kappa_subtuple_max(&h, &x).map_err(|e| e.to_string())?;
            let k_max = if k_max.is_finite() { json!(k_max) } else { json!("inf") };
            let doc = json!({ "point": x, "report": report, "kappa_subtuple_max": k_max, "subtuple": sub });
            println!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
            Ok(ExitCode::SUCCESS)
        }
        Command::Grid { n, r, count_only } => {
            let spec = GridSpec::new(n, r).map_err(|e| e.to_string())?;
            if count_only {
                println!("{}", spec.count());
            } else {
                for x in spec.stream() {
                    let row: Vec<String> = x.iter().map(|v| v.to_string()).collect();
                    println!("{}", row.join(","));
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
