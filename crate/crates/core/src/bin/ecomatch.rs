//! Command-line entry point: synthetic instance generation, one-shot solves,
//! simulation experiments, and the golden verification suite.

use clap::{Args, Parser, Subcommand, ValueEnum};
use ecomatch::ecosim::{run_simulation, PolicyKind};
use ecomatch::fixtures::demo_instance;
use ecomatch::matching::{
    self, evaluate_assignment, exact_enumeration, greedy_providers, lp_rs_with, myopic_assignment,
    regret_report, LpRsOptions, MatchingPolicy,
};
use ecomatch::model::Instance;
use ecomatch::workbench::{
    apply_discounting, fmt6, gen_synthetic, load_config, load_embeddings, load_instance,
    run_experiment, save_instance, SyntheticParams, Variant,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "ecomatch",
    about = "Constrained-matching recommender workbench",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic instance file.
    Gen(GenArgs),
    /// Solve a one-shot matching on an instance file and print the results.
    Solve(SolveArgs),
    /// Run a simulation experiment from a JSON config file.
    Simulate(SimulateArgs),
    /// Run the golden demo suite and verify its known optima.
    Verify,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Uniform,
    Skewed,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum, default_value = "uniform")]
    variant: VariantArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    n_providers: usize,
    #[arg(long, default_value_t = 400)]
    n_users: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Provider embedding standard deviation per coordinate.
    #[arg(long, default_value_t = 6.0)]
    spread: f64,
    /// Baseline per-coordinate user query variance.
    #[arg(long, default_value_t = 0.1)]
    user_variance: f64,
    /// Uniform viability threshold; defaults to 8 * (users/providers) / 20.
    #[arg(long)]
    nu: Option<f64>,
    /// Output instance JSON file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Myopic,
    Stochastic,
    Greedy,
    LpRs,
    Colgen,
    Exact,
}

#[derive(Args)]
struct SolveArgs {
    /// Instance file: .json (native format) or .csv (embeddings format).
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum, default_value = "lp-rs")]
    method: Method,
    /// Discount factor applied across slate slots.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Max-regret trade-off weight (lp-rs only).
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    /// Slate size; defaults to the instance's own.
    #[arg(long)]
    slate: Option<usize>,
    /// Rounding threshold for lp-rs.
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    /// Queries per user for colgen.
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Uniform threshold override when loading an embeddings CSV.
    #[arg(long)]
    nu: Option<f64>,
    /// Seed for the stochastic method's sampled serving.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SimulateArgs {
    /// Experiment config JSON file.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config's epoch count.
    #[arg(long)]
    epochs: Option<usize>,
    /// Replace the config's seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's slate size.
    #[arg(long)]
    slate: Option<usize>,
    /// Replace the config's gamma grid with this single value.
    #[arg(long)]
    gamma: Option<f64>,
    /// Replace the config's lambda grid with this single value.
    #[arg(long)]
    lambda: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Verify => cmd_verify(),
    };
    match result {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn cmd_gen(args: GenArgs) -> Result<ExitCode, String> {
    let variant = match args.variant {
        VariantArg::Uniform => Variant::Uniform,
        VariantArg::Skewed => Variant::Skewed,
    };
    let mut params = SyntheticParams::desk_scale(variant, args.seed);
    params.n_providers = args.n_providers;
    params.n_users = args.n_users;
    params.dim = args.dim;
    params.provider_spread = args.spread;
    params.user_variance = args.user_variance;
    params.nu = args
        .nu
        .unwrap_or(8.0 * (args.n_users as f64 / args.n_providers as f64) / 20.0);
    let instance = gen_synthetic(&params).map_err(|e| e.to_string())?;
    save_instance(&args.out, &instance).map_err(|e| e.to_string())?;
    println!(
        "wrote {} ({} users, {} providers, nu {})",
        args.out.display(),
        instance.n_users(),
        instance.n_providers(),
        fmt6(params.nu)
    );
    Ok(ExitCode::SUCCESS)
}

fn load_any_instance(path: &PathBuf, nu: Option<f64>) -> Result<Instance, String> {
    let is_csv = path.extension().map(|e| e == "csv").unwrap_or(false);
    if is_csv {
        load_embeddings(path, nu).map_err(|e| e.to_string())
    } else {
        load_instance(path).map_err(|e| e.to_string())
    }
}

fn print_policy(instance: &Instance, policy: &MatchingPolicy) -> Result<(), String> {
    let report = regret_report(instance, policy).map_err(|e| e.to_string())?;
    println!("welfare: {}", fmt6(policy.welfare));
    println!(
        "viable set ({}): {:?}",
        policy.viable_set.len(),
        policy.viable_set
    );
    println!("max regret: {}", fmt6(report.max_regret));
    if policy.empty_diagnostic {
        println!("note: rounding emptied the viable set; the policy serves nobody");
    }
    Ok(())
}

fn cmd_solve(args: SolveArgs) -> Result<ExitCode, String> {
    let base = load_any_instance(&args.instance, args.nu)?;
    let slate = args.slate.unwrap_or(base.slate_size);
    let instance = apply_discounting(&base, args.gamma, slate).map_err(|e| e.to_string())?;
    let policy = match args.method {
        Method::Myopic => {
            let all: Vec<usize> = (0..instance.n_providers()).collect();
            let assign = myopic_assignment(&instance, &all).map_err(|e| e.to_string())?;
            evaluate_assignment(&instance, &assign).map_err(|e| e.to_string())?
        }
        Method::Stochastic => {
            // One simulated epoch of reward-proportional serving.
            let t = run_simulation(&instance, PolicyKind::Stochastic, 1, args.seed)
                .map_err(|e| e.to_string())?;
            let m = &t.epochs[0];
            println!("welfare: {}", fmt6(m.social_welfare));
            println!("viable count after epoch: {}", m.viable_count);
            println!("max regret: {}", fmt6(m.max_regret));
            return Ok(ExitCode::SUCCESS);
        }
        Method::Greedy => greedy_providers(&instance).map_err(|e| e.to_string())?,
        Method::LpRs => lp_rs_with(
            &instance,
            LpRsOptions {
                round_threshold: args.theta,
                lambda: args.lambda,
                ..Default::default()
            },
        )
        .map_err(|e| e.to_string())?,
        Method::Colgen => {
            ecomatch::colgen::column_generation(&instance, args.k, 1e-6, 300)
                .map_err(|e| e.to_string())?
        }
        Method::Exact => exact_enumeration(&instance, 20).map_err(|e| e.to_string())?,
    };
    print_policy(&instance, &policy)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(args: SimulateArgs) -> Result<ExitCode, String> {
    let mut config = load_config(&args.config).map_err(|e| e.to_string())?;
    if let Some(out) = args.out {
        config.out_dir = out;
    }
    if let Some(epochs) = args.epochs {
        config.epochs = epochs;
    }
    if let Some(seed) = args.seed {
        config.seeds = vec![seed];
    }
    if let Some(slate) = args.slate {
        config.slate_size = slate;
    }
    if let Some(gamma) = args.gamma {
        config.gamma_grid = vec![gamma];
    }
    if let Some(lambda) = args.lambda {
        config.lambda_grid = vec![lambda];
    }
    let output = run_experiment(&config).map_err(|e| e.to_string())?;
    for file in &output.files {
        println!("wrote {}", file.display());
    }
    println!(
        "{} cells simulated ({} summary rows)",
        output.cells.len(),
        output.summary.len()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify() -> Result<ExitCode, String> {
    let instance = demo_instance();
    let mut ok = true;
    let mut check = |label: &str, got: f64, want: f64| {
        let pass = (got - want).abs() < 1e-6;
        ok &= pass;
        println!(
            "{}: {} (expected {}) {}",
            label,
            fmt6(got),
            fmt6(want),
            if pass { "ok" } else { "MISMATCH" }
        );
    };

    let optimal = exact_enumeration(&instance, 10).map_err(|e| e.to_string())?;
    check("optimal constrained welfare", optimal.welfare, 9.9);

    let sub = matching::csw(&instance, &[0, 1]).map_err(|e| e.to_string())?;
    check("welfare keeping providers {0, 1}", sub.0, 8.1);

    let report = regret_report(&instance, &optimal).map_err(|e| e.to_string())?;
    check("max regret of the optimal policy", report.max_regret, 0.1);

    if ok {
        println!("verify: all golden values match");
        Ok(ExitCode::SUCCESS)
    } else {
        Err("golden value mismatch".into())
    }
}
