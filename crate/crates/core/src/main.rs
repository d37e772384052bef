use std::net::TcpListener;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use dpcorr::bench::{
    emit_report, load_csv, read_summary, run_sweep, split_features, synth_dataset, write_csv,
    Allocation, NonNumeric, Recipe, SweepConfig,
};
use dpcorr::bounds::{error_bound, BoundInputs};
use dpcorr::protocol::{alice_connect, bob_accept};
use dpcorr::{
    run_session, unbiased_dcov, DataMatrix, DvarStatistic, Error, NoiseMode, ProtocolConfig,
    Transport, Variant,
};

#[derive(Parser)]
#[command(name = "dpcorr", version, about = "Private distance correlation between two parties")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Repeated,
    Disjoint,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Repeated => Variant::Repeated,
            VariantArg::Disjoint => Variant::Disjoint,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RecipeArg {
    Independent,
    Linear,
    Quadratic,
    Sine,
}

impl From<RecipeArg> for Recipe {
    fn from(r: RecipeArg) -> Self {
        match r {
            RecipeArg::Independent => Recipe::Independent,
            RecipeArg::Linear => Recipe::Linear,
            RecipeArg::Quadratic => Recipe::Quadratic,
            RecipeArg::Sine => Recipe::Sine,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AllocationArg {
    /// --eps is the total budget
    Total,
    /// --eps is the per-projection budget
    PerProjection,
}

#[derive(Args, Clone)]
struct BudgetArgs {
    #[arg(long, default_value_t = 1e-5)]
    delta: f64,
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum)]
    variant: VariantArg,
    #[arg(long, value_enum, default_value = "total")]
    allocation: AllocationArg,
    /// Share of the budget spent on the distance variance.
    #[arg(long, default_value_t = 0.1)]
    variance_fraction: f64,
    /// Permute rows with a public seed before blocking (disjoint only).
    #[arg(long)]
    shuffle_blocks: bool,
}

impl BudgetArgs {
    fn allocation(&self) -> Allocation {
        match self.allocation {
            AllocationArg::Total => Allocation::Total {
                variance_fraction: self.variance_fraction,
            },
            AllocationArg::PerProjection => Allocation::PerProjection {
                variance_fraction: self.variance_fraction,
            },
        }
    }

    fn protocol_config(&self, eps: f64, seed: u64) -> Result<ProtocolConfig, Error> {
        let variant = Variant::from(self.variant);
        let (per, var) = self.allocation().split(eps, variant, self.k)?;
        let mut cfg = ProtocolConfig::new(self.k, variant, per, self.delta, var, seed);
        cfg.shuffle_blocks = self.shuffle_blocks;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Non-private unbiased dcov, dvar and dcorr.
    Dcor {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[arg(long)]
        no_header: bool,
    },
    /// One in-process protocol run on a split dataset.
    Private {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        split: Option<usize>,
        #[arg(long)]
        eps: f64,
        #[command(flatten)]
        budget: BudgetArgs,
        #[arg(long)]
        seed: u64,
        /// Bob's seed; derived from --seed when absent.
        #[arg(long)]
        bob_seed: Option<u64>,
        #[arg(long)]
        normalize: bool,
        #[arg(long)]
        no_header: bool,
    },
    /// Alice's role over TCP.
    Alice {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        connect: String,
        #[arg(long)]
        eps: f64,
        #[command(flatten)]
        budget: BudgetArgs,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        no_header: bool,
    },
    /// Bob's role over TCP: accepts one session and writes the result.
    Bob {
        #[arg(long)]
        y: PathBuf,
        #[arg(long)]
        listen: String,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        no_header: bool,
    },
    /// Privacy-utility sweep over an epsilon grid.
    Bench {
        #[arg(long, required_unless_present = "replay")]
        dataset: Option<PathBuf>,
        #[arg(long)]
        split: Option<usize>,
        #[arg(long, value_delimiter = ',', required_unless_present = "replay")]
        eps_grid: Vec<f64>,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, required_unless_present = "replay")]
        k: Option<usize>,
        #[arg(long, value_enum, required_unless_present = "replay")]
        variant: Option<VariantArg>,
        #[arg(long, default_value_t = 1e-5)]
        delta: f64,
        #[arg(long, value_enum, default_value = "total")]
        allocation: AllocationArg,
        #[arg(long, default_value_t = 0.1)]
        variance_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        normalize: bool,
        #[arg(long)]
        no_header: bool,
        #[arg(long)]
        out: PathBuf,
        /// Re-run the sweep described by a previous summary.json.
        #[arg(long, conflicts_with_all = ["dataset", "eps_grid", "k", "variant"])]
        replay: Option<PathBuf>,
    },
    /// Concentration bound on one projection's residual term.
    Bound {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        sigma1: f64,
        #[arg(long)]
        sigma2: f64,
        #[arg(long)]
        alpha: f64,
        /// Alice's feature dimension.
        #[arg(long, default_value_t = 1)]
        p: usize,
        /// Bob's feature dimension.
        #[arg(long, default_value_t = 1)]
        q: usize,
    },
    /// Writes a synthetic two-column dataset.
    Synth {
        #[arg(long, value_enum)]
        recipe: RecipeArg,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Budget(_) | Error::Partition { .. } | Error::Domain(_) => 2,
        Error::Protocol(_) | Error::Handshake(_) | Error::Decode(_) => 4,
        // a session that failed on its inputs is still an input failure
        Error::Session { source, .. } => match exit_code(source) {
            3 if matches!(**source, Error::Io(_)) => 4,
            code => code,
        },
        _ => 3,
    }
}

fn load_matrix(path: &PathBuf, no_header: bool) -> Result<DataMatrix, Error> {
    Ok(load_csv(path, !no_header, NonNumeric::Reject)?.table)
}

fn print_json(v: &serde_json::Value) -> Result<(), Error> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Dcor { x, y, no_header } => {
            let x = load_matrix(&x, no_header)?;
            let y = load_matrix(&y, no_header)?;
            let dcov = unbiased_dcov(&x, &y)?;
            let dvar_x = unbiased_dcov(&x, &x)?;
            let dvar_y = unbiased_dcov(&y, &y)?;
            let dcorr = dpcorr::unbiased_dcorr(&x, &y)?;
            print_json(&json!({
                "n": x.n(),
                "dcov": dcov,
                "dvar_x": dvar_x,
                "dvar_y": dvar_y,
                "dcorr": dcorr,
            }))
        }
        Command::Private {
            dataset,
            split,
            eps,
            budget,
            seed,
            bob_seed,
            normalize,
            no_header,
        } => {
            let mut ds = load_csv(&dataset, !no_header, NonNumeric::Reject)?;
            if normalize {
                ds.table = ds.table.min_max_normalized();
            }
            let j = split.unwrap_or(ds.table.d() / 2);
            let (x, y) = split_features(&ds, j)?;
            let cfg = budget.protocol_config(eps, seed)?;
            let bob_seed = bob_seed.unwrap_or_else(|| dpcorr::rng::derive_seed(seed, 0xB0B));
            let result = run_session(&x, &y, &cfg, bob_seed, Transport::InProcess)?;
            let nonprivate = dpcorr::unbiased_dcorr(&x, &y)?;
            print_json(&json!({
                "config": cfg,
                "bob_seed": bob_seed,
                "split": j,
                "normalized": normalize,
                "dropped_rows": ds.dropped_rows,
                "result": result,
                "dcorr_nonprivate": nonprivate,
            }))
        }
        Command::Alice {
            x,
            connect,
            eps,
            budget,
            seed,
            no_header,
        } => {
            let x = load_matrix(&x, no_header)?;
            let cfg = budget.protocol_config(eps, seed)?;
            let stats = alice_connect(connect.as_str(), &x, &cfg)?;
            print_json(&json!({ "config": cfg, "wire": stats }))
        }
        Command::Bob {
            y,
            listen,
            seed,
            out,
            no_header,
        } => {
            let y = load_matrix(&y, no_header)?;
            let listener = TcpListener::bind(listen.as_str())
                .map_err(|e| Error::session(dpcorr::Phase::Setup, e.into()))?;
            eprintln!("listening on {}", listener.local_addr()?);
            let result = bob_accept(&listener, &y, seed)?;
            let text = serde_json::to_string_pretty(&json!({ "seed": seed, "result": result }))?;
            std::fs::write(&out, format!("{text}\n"))?;
            println!("{text}");
            Ok(())
        }
        Command::Bench {
            dataset,
            split,
            eps_grid,
            trials,
            k,
            variant,
            delta,
            allocation,
            variance_fraction,
            seed,
            normalize,
            no_header,
            out,
            replay,
        } => {
            let (ds, cfg) = match replay {
                Some(path) => {
                    let summary = read_summary(path)?;
                    (summary.dataset.source.load()?, summary.config)
                }
                None => {
                    let dataset = dataset.expect("clap enforces --dataset");
                    let ds = load_csv(&dataset, !no_header, NonNumeric::Reject)?;
                    let split_index = split.unwrap_or(ds.table.d() / 2);
                    let allocation = match allocation {
                        AllocationArg::Total => Allocation::Total { variance_fraction },
                        AllocationArg::PerProjection => {
                            Allocation::PerProjection { variance_fraction }
                        }
                    };
                    let cfg = SweepConfig {
                        eps_grid,
                        trials,
                        k: k.expect("clap enforces --k"),
                        variant: variant.expect("clap enforces --variant").into(),
                        delta,
                        split_index,
                        seed,
                        normalize,
                        allocation,
                        shuffle_blocks: false,
                        noise: NoiseMode::Calibrated,
                        dvar_statistic: DvarStatistic::Unbiased,
                    };
                    (ds, cfg)
                }
            };
            let result = run_sweep(&ds, &cfg)?;
            let (csv_path, json_path) = emit_report(&result, &out)?;
            print_json(&json!({
                "config": result.config,
                "dataset": result.dataset,
                "dcorr_nonprivate": result.dcorr_nonprivate,
                "aggregates": result.aggregates,
                "aborted": result.aborted,
                "records_csv": csv_path,
                "summary_json": json_path,
            }))?;
            match &result.aborted {
                Some(reason) => Err(Error::Protocol(format!("sweep aborted: {reason}"))),
                None => Ok(()),
            }
        }
        Command::Bound {
            n,
            k,
            sigma1,
            sigma2,
            alpha,
            p,
            q,
        } => {
            let inputs = BoundInputs::at_threshold(n, k, p, q, sigma1, sigma2, alpha)?;
            let bound = error_bound(&inputs)?;
            if bound.vacuous {
                eprintln!("warning: confidence clamped to 0; the bound is vacuous at this n and alpha");
            }
            print_json(&json!({
                "inputs": inputs,
                "bound_value": bound.bound_value,
                "confidence": bound.confidence,
                "alpha1": bound.alpha1,
                "alpha2": bound.alpha2,
                "vacuous": bound.vacuous,
            }))
        }
        Command::Synth {
            recipe,
            n,
            noise,
            seed,
            out,
        } => {
            let ds = synth_dataset(recipe.into(), n, noise, seed)?;
            write_csv(&ds, &out)?;
            print_json(&json!({ "source": ds.source, "out": out }))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
