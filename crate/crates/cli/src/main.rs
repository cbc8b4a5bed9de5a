use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sparsetest::distributions::ModelConfig;
use sparsetest_cli::config::{
    Command, ConstructionKind, CumulantsConfig, EstimateConfig, LowerBoundConfig, Side, SimulateConfig,
    TestConfig, TesterKind, WeightsConfig,
};
use sparsetest_cli::output::{jsonl, write_record, OUT_DIR_ENV};
use sparsetest_cli::{run_experiment, ExperimentConfig, ExperimentRecord, FailureKind};

/// Sparsity testing for noisy linear measurements y = w·x + η.
///
/// Models are written `kind[:p1,p2][+std]`, e.g. `rademacher`, `gaussian`,
/// `uniform+std`, `mixture:0.5,0.1,1`. Exit codes: 0 success, 1 I/O error,
/// 2 invalid input, 3 numerical failure.
#[derive(Parser, Debug)]
#[command(name = "sparsetest", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Master seed; trial i uses derive_seed(seed, i).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for the .jsonl, .summary.csv and .csv files. Nothing is written without it.
    #[arg(long, env = OUT_DIR_ENV)]
    out: Option<PathBuf>,
    /// Print the equivalent TOML config and exit.
    #[arg(long)]
    dump_config: bool,
}

#[derive(Args, Debug, Clone)]
struct WeightArgs {
    /// Explicit weight vector, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    w: Option<Vec<f64>>,
    /// Draw fresh weights per trial: `yes` gives k-sparse vectors, `no` gives vectors far from k-sparse.
    #[arg(long, value_enum)]
    battery: Option<SideArg>,
    /// Dimension of battery vectors.
    #[arg(long, default_value_t = 20)]
    n: usize,
    /// ‖w‖₂ of battery vectors.
    #[arg(long, default_value_t = 1.0)]
    norm: f64,
}

impl WeightArgs {
    fn into_config(self) -> WeightsConfig {
        WeightsConfig {
            w: self.w,
            battery: self.battery.map(|b| match b {
                SideArg::Yes => Side::Yes,
                SideArg::No => Side::No,
            }),
            n: self.n,
            norm: self.norm,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum SideArg {
    Yes,
    No,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum TesterArg {
    General,
    Sympoly,
    Noiseless,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ConstructionArg {
    GaussianHidden,
    PoissonNoniid,
    PoissonUnknownNoise,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run an experiment described by a TOML config file.
    Run {
        /// Path of the config.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's `output`).
        #[arg(long, env = OUT_DIR_ENV)]
        out: Option<PathBuf>,
    },
    /// Print moments, cumulants and the cumulant upper bound of a marginal as CSV.
    Cumulants {
        /// Marginal model.
        #[arg(long)]
        model: ModelConfig,
        /// Highest order.
        #[arg(long, default_value_t = 8)]
        order: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Sample a batch (x rows and y) and print it as CSV.
    Simulate {
        #[arg(long)]
        model: ModelConfig,
        /// Noise model; zero noise when absent.
        #[arg(long)]
        noise: Option<ModelConfig>,
        /// Number of rows.
        #[arg(long)]
        m: usize,
        /// Omit the x columns.
        #[arg(long)]
        labels_only: bool,
        #[command(flatten)]
        weights: WeightArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Estimate cumulants, power sums M_ℓ and s₂ from labels; prints CSV.
    Estimate {
        /// SampleBatch CSV to read (labels are the last column). Samples fresh data when absent.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Marginal model; needed for M_ℓ.
        #[arg(long)]
        model: Option<ModelConfig>,
        #[arg(long)]
        noise: Option<ModelConfig>,
        /// Rows to sample when there is no input.
        #[arg(long)]
        m: Option<usize>,
        /// Even orders ℓ, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "2,4")]
        orders: Vec<usize>,
        /// Symmetrize labels first.
        #[arg(long)]
        symmetrize: bool,
        /// Accuracy for the sample-size calculator.
        #[arg(long)]
        eps: Option<f64>,
        /// Failure probability for the sample-size calculator.
        #[arg(long)]
        delta: Option<f64>,
        /// Bound on ‖w‖₂ for the sample-size calculator.
        #[arg(long = "C", default_value_t = 1.0)]
        norm_bound: f64,
        #[command(flatten)]
        weights: WeightArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Run a sparsity tester over trials; one JSON line per trial.
    Test {
        #[arg(long)]
        model: ModelConfig,
        #[arg(long)]
        noise: Option<ModelConfig>,
        /// Sparsity k.
        #[arg(long)]
        k: usize,
        /// Distance parameter; for the general tester the same as --c 0 --s eps.
        #[arg(long)]
        eps: Option<f64>,
        /// Completeness distance (general tester).
        #[arg(long)]
        c: Option<f64>,
        /// Soundness distance (general tester).
        #[arg(long)]
        s: Option<f64>,
        /// Bound on ‖w‖₂.
        #[arg(long = "C", default_value_t = 1.0)]
        norm_bound: f64,
        #[arg(long, value_enum, default_value = "general")]
        tester: TesterArg,
        /// `paper`, `practical` or `practical:l1,l2,...` with even orders, largest first.
        #[arg(long, default_value = "practical")]
        schedule: String,
        /// Rows per trial; the calculator's value capped at --max-samples by default.
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long, default_value_t = 10_000_000)]
        max_samples: u64,
        /// Cumulants below this magnitude count as zero.
        #[arg(long, default_value_t = sparsetest::testers::DEFAULT_CUMULANT_FLOOR)]
        cumulant_floor: f64,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[command(flatten)]
        weights: WeightArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Estimate the Bayes distinguisher's advantage on a lower-bound construction.
    Lowerbound {
        #[arg(long, value_enum)]
        construction: ConstructionArg,
        /// Dimension.
        #[arg(long)]
        n: usize,
        /// Rows per instance.
        #[arg(long, visible_alias = "m")]
        t: usize,
        /// Noise scale (gaussian_hidden).
        #[arg(long, default_value_t = 0.1)]
        c: f64,
        /// Block size (gaussian_hidden).
        #[arg(long, default_value_t = 1)]
        k: usize,
        /// Rate ratio or tuple size (Poisson constructions).
        #[arg(long, default_value_t = 2)]
        spread: u32,
        /// Instances per label.
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[command(flatten)]
        common: Common,
    },
}

fn build(cmd: Cmd) -> (ExperimentConfig, bool) {
    let with = |command: Command, common: &Common| {
        let mut c = ExperimentConfig::new(command);
        c.seed = common.seed;
        c.output = common.out.clone();
        c
    };
    match cmd {
        Cmd::Run { .. } => unreachable!("handled by caller"),
        Cmd::Cumulants { model, order, common } => {
            let mut c = with(Command::Cumulants, &common);
            c.model = Some(model);
            c.cumulants = Some(CumulantsConfig { order });
            (c, common.dump_config)
        }
        Cmd::Simulate { model, noise, m, labels_only, weights, common } => {
            let mut c = with(Command::Simulate, &common);
            c.model = Some(model);
            c.noise = noise;
            c.simulate = Some(SimulateConfig { m, weights: weights.into_config(), labels_only });
            (c, common.dump_config)
        }
        Cmd::Estimate { input, model, noise, m, orders, symmetrize, eps, delta, norm_bound, weights, common } => {
            let mut c = with(Command::Estimate, &common);
            c.model = model;
            c.noise = noise;
            c.estimate = Some(EstimateConfig {
                input,
                m,
                orders,
                weights: weights.into_config(),
                symmetrize,
                eps,
                delta,
                norm_bound,
            });
            (c, common.dump_config)
        }
        Cmd::Test {
            model,
            noise,
            k,
            eps,
            c: lo,
            s,
            norm_bound,
            tester,
            schedule,
            samples,
            max_samples,
            cumulant_floor,
            trials,
            weights,
            common,
        } => {
            let mut c = with(Command::Test, &common);
            c.model = Some(model);
            c.noise = noise;
            c.trials = trials;
            c.test = Some(TestConfig {
                k,
                eps,
                c: lo,
                s,
                norm_bound,
                tester: match tester {
                    TesterArg::General => TesterKind::General,
                    TesterArg::Sympoly => TesterKind::Sympoly,
                    TesterArg::Noiseless => TesterKind::Noiseless,
                },
                schedule,
                samples,
                max_samples,
                cumulant_floor,
                weights: weights.into_config(),
            });
            (c, common.dump_config)
        }
        Cmd::Lowerbound { construction, n, t, c: scale, k, spread, trials, common } => {
            let mut c = with(Command::Lowerbound, &common);
            c.trials = trials;
            c.lowerbound = Some(LowerBoundConfig {
                construction: match construction {
                    ConstructionArg::GaussianHidden => ConstructionKind::GaussianHidden,
                    ConstructionArg::PoissonNoniid => ConstructionKind::PoissonNoniid,
                    ConstructionArg::PoissonUnknownNoise => ConstructionKind::PoissonUnknownNoise,
                },
                n,
                t,
                c: scale,
                k,
                spread,
            });
            (c, common.dump_config)
        }
    }
}

fn emit(record: &ExperimentRecord, out: Option<&PathBuf>) -> Result<(), String> {
    let mut stdout = std::io::stdout().lock();
    let body = record.table.clone().unwrap_or_else(|| jsonl(record));
    stdout.write_all(body.as_bytes()).map_err(|e| e.to_string())?;
    if let Some(dir) = out {
        for p in write_record(record, dir).map_err(|e| format!("writing {}: {e}", dir.display()))? {
            eprintln!("wrote {}", p.display());
        }
    }
    let summary: Vec<String> = record.summary.iter().map(|(k, v)| format!("{k}={v}")).collect();
    eprintln!("{}", summary.join(" "));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match cli.command {
        Cmd::Run { config, out } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: reading {}: {e}", config.display());
                    return ExitCode::from(1);
                }
            };
            match ExperimentConfig::from_toml(&text) {
                Ok(mut c) => {
                    if out.is_some() {
                        c.output = out;
                    }
                    c
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            }
        }
        other => {
            let (cfg, dump) = build(other);
            if dump {
                return match cfg.to_toml() {
                    Ok(t) => {
                        print!("{t}");
                        ExitCode::SUCCESS
                    }
                    Err(e) => {
                        eprintln!("error: {e}");
                        ExitCode::from(2)
                    }
                };
            }
            cfg
        }
    };
    match run_experiment(&cfg) {
        Ok(record) => match emit(&record, cfg.output.as_ref()) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
        Err(err) => {
            if let Some(partial) = &err.partial {
                let _ = emit(partial, cfg.output.as_ref());
            }
            eprintln!("error: {err}");
            ExitCode::from(match err.kind {
                FailureKind::Validation => 2,
                FailureKind::Numerical => 3,
                FailureKind::Io => 1,
            })
        }
    }
}
