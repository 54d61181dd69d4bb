//! Command-line front end. Exit status: 0 when every verdict passes, 1 when
//! a verdict fails, 2 on an error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use locball::runner::acceptance::{self, Scale};
use locball::runner::{init_threads, run_experiment, ExperimentConfig};
use locball::Error;

#[derive(Parser)]
#[command(name = "locball", version, about = "Stochastic localization and small-ball experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Symmetrize, condition to a ball and whiten a family.
    Reduce(Common),
    /// Simulate tilt-SDE paths and write one CSV row per recorded state.
    Localize(Common),
    /// Small-ball probabilities with Wilson intervals.
    Smallball(Common),
    /// Closed-form small-ball bounds over an ε grid.
    Bounds(Common),
    /// Check one property of the localization process.
    Verify {
        #[arg(value_parser = ["martingale", "covbound", "borell", "subgaussian", "shrinkage", "guan", "subspace"])]
        lemma: String,
        #[command(flatten)]
        common: Common,
    },
    /// Replay the small-ball certificate along localization paths.
    Certificate(Common),
    /// Isotropic constants and ball intersections of convex bodies.
    Slicing(Common),
    /// Run the full acceptance suite.
    ReplicateAll {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "replicate")]
        outdir: PathBuf,
        #[arg(long, default_value = "full", value_parser = ["full", "quick"])]
        scale: String,
    },
    /// Run an experiment described by a config file (TOML or JSON).
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args, Clone, Debug, Default)]
struct Common {
    /// Family kind (gaussian, uniform_cube, uniform_ball, uniform_simplex,
    /// product_laplace, zoo) or body (cube, ball, simplex, polytope).
    #[arg(long, alias = "body")]
    family: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    /// none, symmetrize, restrict, reduce or diagonal.
    #[arg(long)]
    transform: Option<String>,
    /// Radius of the `restrict` transform.
    #[arg(long)]
    restrict_radius: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    diagonal: Option<Vec<f64>>,
    #[arg(long = "T")]
    horizon: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long, alias = "N")]
    samples: Option<usize>,
    #[arg(long, alias = "epsilons", value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    c0: Option<f64>,
    #[arg(long)]
    t_star: Option<f64>,
    #[arg(long)]
    p_max: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    ps: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
    /// Radius of the region, for shrinkage.
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    record_every: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    theta: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    spectrum: Option<Vec<f64>>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    directions: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    outdir: PathBuf,
    /// Also write the main artifact here: the report as JSON for `reduce`,
    /// otherwise a copy of the CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn config(&self, experiment: &str) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(experiment, self.seed);
        c.outdir = self.outdir.clone();
        c.family.kind = self.family.clone();
        c.family.dim = self.dim;
        c.family.transform = self.transform.clone();
        c.family.radius = self.restrict_radius;
        c.family.diagonal = self.diagonal.clone();
        let p = &mut c.params;
        p.horizon = self.horizon;
        p.dt = self.dt;
        p.paths = self.paths;
        p.backend = self.backend.clone();
        p.budget = self.budget;
        p.samples = self.samples;
        p.epsilons = self.eps.clone();
        p.lambda = self.lambda;
        p.c1 = self.c1;
        p.c0_constant = self.c0;
        p.t_star = self.t_star;
        p.p_max = self.p_max;
        p.ps = self.ps.clone();
        p.times = self.times.clone();
        p.radius = self.radius;
        p.record_every = self.record_every;
        p.dims = self.dims.clone();
        p.theta = self.theta.clone();
        p.spectrum = self.spectrum.clone();
        p.b = self.b;
        p.directions = self.directions;
        p.trials = self.trials;
        c
    }
}

fn report_error(e: &Error) -> ExitCode {
    match e {
        Error::Config(list) => {
            eprintln!("error [cli]: invalid config");
            for item in list {
                eprintln!("  {item}");
            }
        }
        other => eprintln!("error [{}]: {other}", other.module()),
    }
    ExitCode::from(2)
}

fn run(config: ExperimentConfig, out: Option<PathBuf>) -> Result<bool, Error> {
    let result = run_experiment(&config)?;
    if let Some(out) = out {
        match &result.report {
            Some(report) if config.experiment == "reduce" => {
                std::fs::write(&out, serde_json::to_string_pretty(report)? + "\n")?;
            }
            _ => {
                std::fs::copy(&result.csv, &out)?;
            }
        }
    }
    for c in &result.outcome_checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("wrote {} and {}", result.csv.display(), result.json.display());
    Ok(result.pass)
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Reduce(c) => run(c.config("reduce"), c.out.clone()),
        Command::Localize(c) => run(c.config("localize"), c.out.clone()),
        Command::Smallball(c) => run(c.config("smallball"), c.out.clone()),
        Command::Bounds(c) => run(c.config("bounds"), c.out.clone()),
        Command::Verify { lemma, common } => run(common.config(&lemma), common.out.clone()),
        Command::Certificate(c) => run(c.config("certificate"), c.out.clone()),
        Command::Slicing(c) => run(c.config("slicing"), c.out.clone()),
        Command::Run { config } => ExperimentConfig::from_file(&config).and_then(|c| run(c, None)),
        Command::ReplicateAll { seed, outdir, scale } => {
            let scale = Scale::parse(&scale).unwrap_or(Scale::Full);
            acceptance::replicate_all(seed, &outdir, scale).map(|results| {
                for r in &results {
                    println!("{}", r.line());
                }
                results.iter().all(|r| r.pass())
            })
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => report_error(&e),
    }
}
