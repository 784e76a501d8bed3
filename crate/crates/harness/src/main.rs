use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use starmec_agent::checkpoint;
use starmec_agent::train_with;
use starmec_harness::config::parse_grid;
use starmec_harness::oracle::{oracle_instance, oracle_search, ppo_on_instance, OracleGrid};
use starmec_harness::results::{read_rows_file, summarize, write_rows_file, write_summary, ResultRow};
use starmec_harness::sweep::{evaluate, run_sweep};
use starmec_harness::{plot, Axis, ExperimentConfig, HarnessError, PolicyStore, Result, Scheme};
use starmec_core::EpisodeTrace;

#[derive(Parser)]
#[command(name = "starmec", version, about = "Aerial STAR-RIS edge-computing experiments")]
struct Cli {
    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides STARMEC_OUTPUT_DIR and the config.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Figure {
    EnergyVsInput,
    EnergyVsElements,
    Trajectory,
}

#[derive(Subcommand)]
enum Command {
    /// Print the effective configuration as TOML.
    Config,
    /// Train a learned scheme; writes a checkpoint and its learning curve.
    Train {
        #[arg(long, default_value = "star_ppo")]
        scheme: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        elements: Option<usize>,
    },
    /// Replay a scheme; writes traces, a result row and the trajectory.
    Eval {
        #[arg(long)]
        scheme: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Required for learned schemes.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        episodes: usize,
        #[arg(long)]
        elements: Option<usize>,
    },
    /// Sweep one axis over seeds and schemes.
    Sweep {
        #[arg(long)]
        axis: String,
        /// `lo:hi:n` or a comma list; defaults to the config grid.
        #[arg(long)]
        grid: Option<String>,
        /// Comma list; defaults to the config schemes.
        #[arg(long)]
        schemes: Option<String>,
        /// Comma list; defaults to the config seeds.
        #[arg(long)]
        seeds: Option<String>,
    },
    /// Brute-force search on the single-slot, single-device instance.
    Oracle {
        /// Also train PPO on the instance and report the gap.
        #[arg(long)]
        compare_ppo: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Render a figure from sweep CSV or trace JSONL.
    Plot {
        #[arg(long, value_enum)]
        fig: Figure,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Serialize)]
struct Meta<'a> {
    command: &'a str,
    args: Vec<String>,
    elapsed_s: f64,
    finished_unix_s: u64,
}

/// Timing lives only in this sidecar so the data files stay byte-stable.
fn write_meta(path: &Path, command: &str, started: Instant) -> Result<()> {
    let meta = Meta {
        command,
        args: std::env::args().collect(),
        elapsed_s: started.elapsed().as_secs_f64(),
        finished_unix_s: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    let text = toml::to_string(&meta).map_err(|e| HarnessError::Argument(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    s.split(',')
        .map(|p| p.trim().parse().map_err(|_| HarnessError::Argument(format!("bad seed `{p}`"))))
        .collect()
}

fn write_traces(traces: &[EpisodeTrace], path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for t in traces {
        t.write_jsonl(&mut w)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let out = cfg.resolve_output_dir(cli.output_dir.as_deref());
    let started = Instant::now();
    match cli.command {
        Command::Config => {
            print!("{}", cfg.to_toml());
        }
        Command::Train {
            scheme,
            seed,
            iterations,
            elements,
        } => {
            let scheme = Scheme::parse(&scheme)?;
            if !scheme.is_learned() {
                return Err(HarnessError::Argument(format!("{scheme} has nothing to train")));
            }
            if let Some(n) = iterations {
                cfg.training.iterations = n;
            }
            if let Some(m) = elements {
                cfg.system.elements = m;
            }
            cfg.validate()?;
            std::fs::create_dir_all(&out)?;
            let sys = scheme.system(&cfg.system);
            let tc = cfg.training.train_config(seed)?;
            let result = train_with(&sys, &tc, |s| {
                if s.iteration % 10 == 0 {
                    eprintln!("iteration {:>4}  reward {:>10.3}  energy {:.4e} J", s.iteration, s.mean_reward, s.mean_energy_j);
                }
            })?;
            let stem = format!("{scheme}_seed{seed}");
            checkpoint::save_file(&result.agent.params, &out.join(format!("{stem}.ckpt")))?;
            let curve = std::fs::File::create(out.join(format!("{stem}_curve.csv")))?;
            result.curve.write_csv(std::io::BufWriter::new(curve))?;
            write_meta(&out.join(format!("{stem}.meta.toml")), "train", started)?;
            println!("{}", out.join(format!("{stem}.ckpt")).display());
        }
        Command::Eval {
            scheme,
            seed,
            checkpoint: ckpt,
            episodes,
            elements,
        } => {
            let scheme = Scheme::parse(&scheme)?;
            if let Some(m) = elements {
                cfg.system.elements = m;
            }
            cfg.validate()?;
            let params = match (&ckpt, scheme.is_learned()) {
                (Some(p), _) if !p.exists() => return Err(HarnessError::MissingCheckpoint(p.clone())),
                (Some(p), true) => Some(checkpoint::load_file(p)?),
                (None, true) => return Err(HarnessError::Argument(format!("{scheme} needs --checkpoint"))),
                (_, false) => None,
            };
            std::fs::create_dir_all(&out)?;
            let traces = evaluate(&cfg.system, scheme, params.as_ref(), seed, episodes.max(1))?;
            let stem = format!("eval_{scheme}_seed{seed}");
            let row = ResultRow::from_traces(scheme.name(), "none", 0.0, seed, &traces);
            write_rows_file(std::slice::from_ref(&row), &out.join(format!("{stem}.csv")))?;
            write_traces(&traces, &out.join(format!("{stem}.jsonl")))?;
            let tcsv = std::fs::File::create(out.join(format!("{stem}_trajectory.csv")))?;
            plot::write_trajectory_csv(&traces[..1], std::io::BufWriter::new(tcsv))?;
            write_meta(&out.join(format!("{stem}.meta.toml")), "eval", started)?;
            println!(
                "{scheme}: {:.6e} J over {} episode(s), path {:.2} m, return distance {:.3} m",
                row.total_energy_j, row.episodes, row.path_length_m, row.return_distance_m
            );
        }
        Command::Sweep {
            axis,
            grid,
            schemes,
            seeds,
        } => {
            let axis = Axis::parse(&axis)?;
            let grid = match grid {
                Some(g) => parse_grid(&g)?,
                None => match axis {
                    Axis::InputBits => cfg.sweep.input_bits_mbit.clone(),
                    Axis::Elements => cfg.sweep.elements.iter().map(|&m| m as f64).collect(),
                },
            };
            if let Some(s) = seeds {
                cfg.sweep.seeds = parse_seeds(&s)?;
            }
            let schemes = match schemes {
                Some(s) => Scheme::parse_list(&s)?,
                None => cfg.sweep.schemes.clone(),
            };
            cfg.validate()?;
            std::fs::create_dir_all(&out)?;
            let mut store = PolicyStore::new();
            let rows = run_sweep(&cfg, axis, &grid, &schemes, &mut store)?;
            let stem = format!("sweep_{}", axis.name());
            write_rows_file(&rows, &out.join(format!("{stem}.csv")))?;
            let summary = summarize(&rows);
            write_summary(&summary, std::fs::File::create(out.join(format!("{stem}_summary.csv")))?)?;
            let (fig, label) = match axis {
                Axis::InputBits => ("energy_vs_input.svg", "input size (Mbit)"),
                Axis::Elements => ("energy_vs_elements.svg", "elements M"),
            };
            plot::energy_plot(&summary, label, &out.join(fig))?;
            write_meta(&out.join(format!("{stem}.meta.toml")), "sweep", started)?;
            for s in &summary {
                println!("{:<18} {:>8} {:.6e} ± {:.2e} J", s.scheme, s.value, s.mean_energy_j, s.std_energy_j);
            }
        }
        Command::Oracle { compare_ppo, seed } => {
            let o = &cfg.oracle;
            let sys = oracle_instance(&cfg.system, o.elements);
            let grid = OracleGrid::from_settings(o, sys.max_power_w);
            let res = oracle_search(&sys, o.instance_seed, &grid)?;
            std::fs::create_dir_all(&out)?;
            let mut w = csv::Writer::from_path(out.join("oracle.csv"))?;
            let mut header = vec![
                "instance_seed",
                "elements",
                "evaluated",
                "feasible",
                "min_energy_j",
                "lambda",
                "power_w",
                "beta_r",
                "phases_rad",
                "dx_m",
                "dy_m",
            ];
            let p = &res.argmin;
            let phases: Vec<String> = p.phases.iter().map(|v| v.to_string()).collect();
            let mut record = vec![
                o.instance_seed.to_string(),
                o.elements.to_string(),
                res.evaluated.to_string(),
                res.feasible.to_string(),
                res.min_energy_j.to_string(),
                p.lambda.to_string(),
                p.power_w.to_string(),
                p.beta_r.to_string(),
                phases.join(" "),
                p.displacement[0].to_string(),
                p.displacement[1].to_string(),
            ];
            println!("oracle: {:.6e} J at lambda {} p {:.3e} W ({} of {} feasible)", res.min_energy_j, p.lambda, p.power_w, res.feasible, res.evaluated);
            if compare_ppo {
                let run = ppo_on_instance(&cfg, seed)?;
                let gap = run.energy_j / res.min_energy_j - 1.0;
                header.extend(["ppo_energy_j", "ppo_feasible", "ppo_relative_gap"]);
                record.extend([run.energy_j.to_string(), run.feasible.to_string(), gap.to_string()]);
                println!("ppo:    {:.6e} J (gap {:+.2}%, feasible {})", run.energy_j, 100.0 * gap, run.feasible);
            }
            w.write_record(&header)?;
            w.write_record(&record)?;
            w.flush()?;
            write_meta(&out.join("oracle.meta.toml"), "oracle", started)?;
        }
        Command::Plot { fig, input, output } => {
            let (default, is_traj) = match fig {
                Figure::EnergyVsInput => ("energy_vs_input.svg", false),
                Figure::EnergyVsElements => ("energy_vs_elements.svg", false),
                Figure::Trajectory => ("trajectory.svg", true),
            };
            let output = output.unwrap_or_else(|| out.join(default));
            if let Some(parent) = output.parent() {
                std::fs::create_dir_all(parent)?;
            }
            if is_traj {
                let f = std::io::BufReader::new(std::fs::File::open(&input)?);
                let traces = EpisodeTrace::read_jsonl(f)?;
                plot::trajectory_plot(&traces, cfg.system.area_side_m, &output)?;
                plot::write_trajectory_csv(&traces, std::fs::File::create(output.with_extension("csv"))?)?;
            } else {
                let rows = read_rows_file(&input)?;
                let summary = summarize(&rows);
                let label = if matches!(fig, Figure::EnergyVsInput) { "input size (Mbit)" } else { "elements M" };
                plot::energy_plot(&summary, label, &output)?;
                write_summary(&summary, std::fs::File::create(output.with_extension("csv"))?)?;
            }
            println!("{}", output.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
