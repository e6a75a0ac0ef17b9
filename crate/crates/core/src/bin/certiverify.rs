use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use certiverify::correction::{strong_correct_max, strong_correct_sum, weak_correct_general, weak_correct_monotone};
use certiverify::dataset::{save_dataset, DatasetKind, LpSense};
use certiverify::harness::{
    emit_report, gen_adversary, parse_params, run_trials, AdversaryModel, CorrectionMode, ExperimentConfig, PlanContext, SchemeId,
    Task, TrialStats,
};
use certiverify::instopt::{check_feasibility, enumerate_violations, round_plan, solve_cert_lp, MAX_ENUMERATION};
use certiverify::lipschitz::{fractional_probabilities, steiner_weights, tsp_weights, WeightVector};
use certiverify::{load_dataset, BudgetMode, Dataset, Error, GroundTruth, Result, Verdict, VerificationOracle};

/// `println!` that exits quietly when stdout is closed early, as under `| head`.
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write;
        if let Err(e) = writeln!(std::io::stdout(), $($arg)*) {
            std::process::exit(if e.kind() == std::io::ErrorKind::BrokenPipe { 0 } else { 2 });
        }
    }};
}

#[derive(Parser)]
#[command(name = "certiverify", version, about = "Certify and correct computations over datasets with invalid records")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certify f on a dataset, once or over many planted trials.
    Certify {
        #[arg(long)]
        scheme: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Correct f despite invalid records.
    Correct {
        #[arg(long)]
        mode: String,
        /// Certifier for weak modes; defaults to sum (max for strong-max).
        #[arg(long)]
        scheme: Option<String>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Solve the instance-optimal certification LP.
    Instopt {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        epsilon: f64,
        /// Function to certify; defaults from the dataset kind.
        #[arg(long)]
        scheme: Option<String>,
        /// Also check the Lipschitz probability vector against the family.
        #[arg(long)]
        check_lipschitz: bool,
    },
    /// Write a dataset with a planted invalid mask.
    Gen {
        #[arg(long)]
        adversary: String,
        #[arg(long, num_args = 0.., value_delimiter = ',')]
        params: Vec<String>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scheme, epsilon and delta the worst-subset adversary plays against.
        #[arg(long, default_value = "sum")]
        scheme: String,
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run a seeded experiment instead of a single run.
    #[arg(long)]
    trials: Option<u64>,
    /// CSV report path for experiments.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Append to an existing report with the same header.
    #[arg(long)]
    append: bool,
    /// Planted adversary for experiments; defaults to the loaded truth.
    #[arg(long, default_value = "as-loaded")]
    adversary: String,
    #[arg(long, num_args = 0.., value_delimiter = ',')]
    params: Vec<String>,
}

fn load(input: &Option<PathBuf>) -> Result<Option<(Dataset, GroundTruth)>> {
    input.as_ref().map(load_dataset).transpose()
}

fn default_scheme(dataset: &Dataset) -> SchemeId {
    match dataset.kind() {
        DatasetKind::Scalar => SchemeId::Sum,
        DatasetKind::Points => SchemeId::LipschitzTsp,
        DatasetKind::GraphTerminals => SchemeId::LipschitzSteiner,
        DatasetKind::Lp => match dataset.lp().map(|lp| lp.sense) {
            Some(LpSense::Packing) => SchemeId::Packing,
            Some(LpSense::Covering) => SchemeId::Covering,
            _ => SchemeId::GeneralLp,
        },
    }
}

fn print_stats(s: &TrialStats) {
    out!("scheme: {}", s.scheme);
    out!("adversary: {}", s.adversary);
    out!("trials: {}", s.trials);
    out!("failure_rate: {} ({} failures, {} correction failures)", s.failure_rate, s.failures, s.correction_failures);
    out!("mean_verifications: {}", s.mean_verifications);
    out!("max_verifications: {}", s.max_verifications);
    out!("mean_invalid_found: {}", s.mean_invalid_found);
    out!("mean_rounds: {}", s.mean_rounds);
    if s.budget_violations > 0 {
        out!("weak budget violations: {}", s.budget_violations);
    }
    out!("wall_time_s: {:.3}", s.wall_time.as_secs_f64());
}

fn experiment(task: Task, run: &RunArgs, trials: u64) -> Result<()> {
    let adversary = AdversaryModel::parse(&run.adversary, &parse_params(&run.params)?)?;
    let stats = run_trials(&ExperimentConfig {
        task,
        adversary,
        eps: run.epsilon,
        delta: run.delta,
        trials,
        seed: run.seed,
        base: load(&run.input)?,
    })?;
    print_stats(&stats);
    if let Some(out) = &run.out {
        emit_report(&[stats], out, run.append)?;
    }
    Ok(())
}

fn single_input(run: &RunArgs) -> Result<(Dataset, GroundTruth)> {
    load(&run.input)?.ok_or_else(|| Error::Config("--input is required without --trials".into()))
}

fn certify(scheme: &str, run: &RunArgs) -> Result<()> {
    let scheme = SchemeId::parse(scheme)?;
    if let Some(trials) = run.trials {
        return experiment(Task::Certify(scheme), run, trials);
    }
    let (dataset, truth) = single_input(run)?;
    scheme.check_dataset(&dataset)?;
    let certifier = scheme.certifier(run.epsilon, run.delta);
    let mut oracle = VerificationOracle::new(truth, BudgetMode::Weak);
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
    let outcome = certifier.certify(&dataset, &mut oracle, &mut rng)?;
    match &outcome.verdict {
        Verdict::Certified(v) if outcome.vacuous => out!("certified (vacuous): {v}"),
        Verdict::Certified(v) => out!("certified: {v}"),
        Verdict::InvalidFound(ids) => out!("invalid records: {ids:?}"),
        Verdict::Failed => out!("failed"),
    }
    out!("verifications: {}", outcome.verifications_used);
    Ok(())
}

fn correct(mode: &str, scheme: Option<&str>, run: &RunArgs) -> Result<()> {
    let mode = CorrectionMode::parse(mode)?;
    let scheme = match scheme {
        Some(s) => SchemeId::parse(s)?,
        None if mode == CorrectionMode::StrongMax => SchemeId::Max,
        None => SchemeId::Sum,
    };
    let task = Task::Correct(mode, scheme);
    task.validate()?;
    if let Some(trials) = run.trials {
        return experiment(task, run, trials);
    }
    let (dataset, truth) = single_input(run)?;
    scheme.check_dataset(&dataset)?;
    let mut oracle = VerificationOracle::new(truth, mode.budget());
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
    match mode {
        CorrectionMode::Weak | CorrectionMode::WeakGeneral => {
            let certifier = scheme.certifier(run.epsilon, 1.0 / 3.0);
            let out = if mode == CorrectionMode::Weak {
                weak_correct_monotone(certifier.as_ref(), &dataset, &mut oracle, run.delta, &mut rng)?
            } else {
                weak_correct_general(certifier.as_ref(), &dataset, &mut oracle, run.delta, &mut rng)?
            };
            out!("value: {}", out.value);
            out!("removed: {:?}", out.removed);
            out!("rounds: {}", out.rounds);
            out!("catches: {}", out.catches);
            out!("verifications: {}", out.verifications);
        }
        CorrectionMode::StrongSum => {
            let out = strong_correct_sum(&dataset, &mut oracle, run.epsilon, run.delta, &mut rng)?;
            out!("estimate: {}", out.estimate);
            out!("samples: {}", out.samples);
            out!("verifications: {}", oracle.ledger().verifications_charged);
        }
        CorrectionMode::StrongMax => {
            let out = strong_correct_max(&dataset, &mut oracle, &mut rng)?;
            out!("value: {} (record {})", out.value, out.id);
            out!("verifications: {}", oracle.ledger().verifications_charged);
        }
    }
    Ok(())
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

fn instopt(input: &PathBuf, eps: f64, scheme: Option<&str>, check_lipschitz: bool) -> Result<()> {
    let (dataset, _) = load_dataset(input)?;
    let scheme = scheme.map_or_else(|| Ok(default_scheme(&dataset)), SchemeId::parse)?;
    scheme.check_dataset(&dataset)?;
    let certifier = scheme.certifier(eps, 0.5);
    let f = |d: &Dataset| certifier.evaluate(d);
    let family = enumerate_violations(&f, &dataset, eps, MAX_ENUMERATION, true)?;
    out!("records: {:?}", family.ids);
    out!("minimal violating sets: {}", family.sets.len());
    if family.vacuous {
        out!("f is zero on the full dataset; certification is vacuous");
    }
    let plan = solve_cert_lp(&family)?;
    let rounded = round_plan(&plan);
    out!("lp value: {:.6}", plan.objective_f64());
    out!("p: {}", fmt_vec(&plan.p_f64()));
    out!("q: {}", fmt_vec(&rounded.base));
    out!("expected verifications: {:.6}", rounded.expected_verifications());
    out!("p feasible: {}", check_feasibility(&plan.p_f64(), &family));
    if check_lipschitz {
        let weights = match scheme {
            SchemeId::LipschitzTsp => tsp_weights(&dataset)?,
            SchemeId::LipschitzSteiner => steiner_weights(&dataset)?,
            SchemeId::Sum => {
                let (ids, xs): (Vec<usize>, Vec<f64>) = dataset.scalars()?.into_iter().unzip();
                let total = xs.iter().sum();
                WeightVector::new(ids, xs, total)?
            }
            other => return Err(Error::Config(format!("no Lipschitz weights for {}", other.tag()))),
        };
        if weights.value == 0.0 {
            out!("lipschitz p feasible: vacuous");
        } else {
            let p = fractional_probabilities(&weights, eps)?;
            out!("lipschitz p: {}", fmt_vec(&p));
            out!("lipschitz p feasible: {}", check_feasibility(&p, &family));
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn gen(
    adversary: &str,
    params: &[String],
    input: &Option<PathBuf>,
    out: &PathBuf,
    seed: u64,
    scheme: &str,
    eps: f64,
    delta: f64,
) -> Result<()> {
    let model = AdversaryModel::parse(adversary, &parse_params(params)?)?;
    let base = load(input)?;
    let ctx = PlanContext {
        scheme: SchemeId::parse(scheme)?,
        eps,
        delta,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (dataset, truth) = gen_adversary(&model, base.as_ref().map(|(d, t)| (d, t)), &ctx, &mut rng)?;
    save_dataset(out, &dataset, &truth)?;
    out!("wrote {} records ({} invalid) to {}", dataset.len(), truth.invalid_ids().len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Certify { scheme, run } => certify(scheme, run),
        Command::Correct { mode, scheme, run } => correct(mode, scheme.as_deref(), run),
        Command::Instopt {
            input,
            epsilon,
            scheme,
            check_lipschitz,
        } => instopt(input, *epsilon, scheme.as_deref(), *check_lipschitz),
        Command::Gen {
            adversary,
            params,
            input,
            out,
            seed,
            scheme,
            epsilon,
            delta,
        } => gen(adversary, params, input, out, *seed, scheme, *epsilon, *delta),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::CorrectionFailure(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
