use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rwre::estimators::{estimate, naive_estimator, Method};
use rwre::experiment::{
    limit_run, run_experiment, summarize, write_limit_rows, write_records, write_samples, write_summary, ExperimentConfig, SummaryRow,
};
use rwre::rng::{stream_id, substream, TAG_ENVIRONMENT, TAG_WALK};
use rwre::valley::{decompose, deep_site_event, outside_deep_ratio};
use rwre::{potential, sample_environment, simulate_walk, WalkStats};

#[derive(Parser)]
#[command(name = "rwre", version, about = "Random walks in random environment: simulation and estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat TOML configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config)
    #[arg(long)]
    seed: Option<u64>,
    /// Number of replicates (overrides the config)
    #[arg(long)]
    replicates: Option<u64>,
    /// Output path (overrides the config)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads, 0 = all cores
    #[arg(long)]
    workers: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_file(p).with_context(|| format!("reading {}", p.display()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(r) = self.replicates {
            cfg.replicates = r;
        }
        if let Some(o) = &self.out {
            cfg.output = Some(o.clone());
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one walk and dump its local-time statistics
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Walk length (default: last entry of n_grid)
        #[arg(long)]
        n: Option<u64>,
        /// Also write the environment as `x,omega`
        #[arg(long)]
        env_out: Option<PathBuf>,
    },
    /// Run the estimators on one dataset
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Statistics CSV written by `simulate`; without it a walk is simulated
        #[arg(long)]
        stats: Option<PathBuf>,
        /// Walk length when simulating (default: last entry of n_grid)
        #[arg(long)]
        n: Option<u64>,
    },
    /// Replicated estimation experiment to CSV
    Experiment {
        #[command(flatten)]
        common: Common,
    },
    /// Infinite-valley validation of the limiting criterion to CSV
    Limit {
        #[command(flatten)]
        common: Common,
        /// Directory for per-candidate `sample_id,L_inf` files
        #[arg(long)]
        samples_dir: Option<PathBuf>,
    },
    /// Boxplot statistics of an experiment CSV
    Summarize {
        csv: PathBuf,
        /// Drop 1.5 IQR outliers before computing statistics
        #[arg(long, conflicts_with = "no_trim")]
        trim: bool,
        /// Keep all estimates
        #[arg(long)]
        no_trim: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Walk of replicate 0 under the config's seed.
fn simulate_one(cfg: &ExperimentConfig, n: Option<u64>) -> Result<(rwre::Environment, WalkStats, Vec<usize>)> {
    let n = n.unwrap_or(*cfg.n_grid.last().unwrap());
    let theta = cfg.theta()?;
    let env = sample_environment(&theta, cfg.x_max, &mut substream(cfg.seed, stream_id(0, TAG_ENVIRONMENT)))?;
    let (stats, path) = simulate_walk(&env, n, substream(cfg.seed, stream_id(0, TAG_WALK)), true)?;
    Ok((env, stats, path.unwrap_or_default()))
}

fn cmd_simulate(common: &Common, n: Option<u64>, env_out: Option<&Path>) -> Result<()> {
    let cfg = common.load()?;
    let (env, stats, _) = simulate_one(&cfg, n)?;
    eprintln!("n = {}, range = {}, max site = {}", stats.n(), stats.range_size(), stats.max_site());
    match decompose(&potential(&env), stats.n(), cfg.delta) {
        Ok(d) => eprintln!(
            "valley b = {}, c = {}, deep sites = {}, all visited >= n^(delta/2): {}, outside/log^2 n = {:.3}",
            d.b,
            d.c,
            d.r_delta.len(),
            deep_site_event(&stats, &d, stats.n(), cfg.delta),
            outside_deep_ratio(&stats, &d)
        ),
        Err(e) => eprintln!("valley: {e}"),
    }
    if let Some(p) = env_out {
        env.write_csv(BufWriter::new(File::create(p)?))?;
    }
    let mut out = output(cfg.output.as_deref())?;
    stats.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn cmd_estimate(common: &Common, stats_path: Option<&Path>, n: Option<u64>) -> Result<()> {
    let cfg = common.load()?;
    let family = cfg.family()?;
    let (stats, path) = match stats_path {
        Some(p) => (WalkStats::read_csv(BufReader::new(File::open(p)?))?, None),
        None => {
            let (_, s, path) = simulate_one(&cfg, n)?;
            (s, Some(path))
        }
    };
    let mut out = output(cfg.output.as_deref())?;
    writeln!(out, "estimator,parameter,estimate,criterion,note")?;
    for m in cfg.methods()? {
        match estimate(m, &stats, path.as_deref(), &family, cfg.tol, cfg.restarts) {
            Ok(e) => {
                for (k, v) in &e.params {
                    writeln!(out, "{},{},{},{},{}", m, k, v, e.criterion_value, e.notes.join("; "))?;
                }
            }
            Err(err) => writeln!(out, "{m},,,,{err}")?,
        }
    }
    if !cfg.methods()?.contains(&Method::Naive) {
        let nv = naive_estimator(&stats);
        if !nv.sites.is_empty() {
            let (below, above) = nv.mass_split(0.5);
            writeln!(out, "Naive-mixture,mass_below_half,{below},,")?;
            writeln!(out, "Naive-mixture,mass_above_half,{above},,")?;
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_experiment(common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let rows = run_experiment(&cfg)?;
    let mut out = output(cfg.output.as_deref())?;
    write_records(&rows, &mut out)?;
    out.flush()?;
    eprintln!("{} rows", rows.len());
    Ok(())
}

fn cmd_limit(common: &Common, samples_dir: Option<&Path>) -> Result<()> {
    let cfg = common.load()?;
    let rep = limit_run(&cfg)?;
    let mut out = output(cfg.output.as_deref())?;
    write_limit_rows(&rep.rows, &mut out)?;
    out.flush()?;
    eprintln!(
        "acceptance rate {:.4}, mean truncation bound {:.3e}, noise floor {:.3e}",
        rep.acceptance_rate, rep.truncation.mean, rep.noise_floor
    );
    for (j, m) in rep.atom_mass.iter().enumerate() {
        eprintln!("atom {} mass: {:.6} (se {:.2e})", j + 1, m.mean, m.se);
    }
    if let Some(dir) = samples_dir {
        std::fs::create_dir_all(dir)?;
        for (k, xs) in rep.samples.iter().enumerate() {
            write_samples(xs, BufWriter::new(File::create(dir.join(format!("candidate_{k}.csv")))?))?;
        }
    }
    Ok(())
}

fn print_table(rows: &[SummaryRow]) {
    println!(
        "{:>8} {:>6} {:>4} {:>5} {:>5} {:>6} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
        "n", "est", "par", "count", "out", "no-sol", "min", "q1", "median", "q3", "max", "mae"
    );
    for r in rows {
        println!(
            "{:>8} {:>6} {:>4} {:>5} {:>5} {:>6} {:>9.5} {:>9.5} {:>9.5} {:>9.5} {:>9.5} {:>9.5}",
            r.n,
            r.estimator,
            r.parameter,
            r.count,
            r.outliers,
            r.no_solution,
            r.min,
            r.q1,
            r.median,
            r.q3,
            r.max,
            r.mean_abs_error.unwrap_or(f64::NAN)
        );
    }
}

fn cmd_summarize(csv: &Path, trim: bool, no_trim: bool, out: Option<&Path>) -> Result<()> {
    let variants: Vec<bool> = match (trim, no_trim) {
        (true, _) => vec![true],
        (_, true) => vec![false],
        _ => vec![false, true],
    };
    let mut all = Vec::new();
    for (i, t) in variants.into_iter().enumerate() {
        let (rows, skipped) = summarize(csv, t)?;
        if i == 0 {
            for (line, why) in &skipped {
                eprintln!("skipped line {line}: {why}");
            }
        }
        println!("{}", if t { "trimmed (1.5 IQR)" } else { "untrimmed" });
        print_table(&rows);
        all.extend(rows);
    }
    if let Some(p) = out {
        write_summary(&all, BufWriter::new(File::create(p)?))?;
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Simulate { common, n, env_out } => cmd_simulate(common, *n, env_out.as_deref()),
        Command::Estimate { common, stats, n } => cmd_estimate(common, stats.as_deref(), *n),
        Command::Experiment { common } => cmd_experiment(common),
        Command::Limit { common, samples_dir } => cmd_limit(common, samples_dir.as_deref()),
        Command::Summarize { csv, trim, no_trim, out } => cmd_summarize(csv, *trim, *no_trim, out.as_deref()),
    }
}
