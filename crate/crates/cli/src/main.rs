use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use popinit::bench::{
    emit_report, evaluate_check, read_results, run_experiment, run_single, Artifacts, ExperimentPlan, Initializer,
    Method, ReportFormat,
};
use popinit::gating::{GatingModel, GatingTrainer, GatingTrainingConfig, Variant};
use popinit::neural::TrainConfig;
use popinit::optimizers::{BudgetMeter, Optimizer, SvmConfig};
use popinit::problems::{generate_instance, load_instance, save_instance, Instance, ProblemClass};
use popinit::repository::{build_repository, ExperienceRepository, RepositoryConfig};
use popinit::transfer::{ablation_initialize, mpi_initialize, Ablation, MpiConfig};
use popinit::{rng, Result};

#[derive(Parser)]
#[command(name = "popinit", version, about = "Experience-transfer population initialization for binary GAs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark instance file.
    GenInstance {
        #[arg(long)]
        class: ProblemClass,
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample solved instances and train one surrogate per instance.
    BuildRepo {
        #[command(flatten)]
        instances: InstanceArgs,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long, default_value_t = 300)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the gating network with PGPE.
    TrainGating {
        #[arg(long)]
        repo: PathBuf,
        #[command(flatten)]
        instances: InstanceArgs,
        #[arg(long, default_value = "max")]
        variant: Variant,
        #[arg(long, default_value_t = 100)]
        iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// TOML file overriding the pipeline settings used during training.
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build an initial population for an instance.
    Init {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        repo: PathBuf,
        #[arg(long)]
        gating: PathBuf,
        #[arg(long, default_value = "mpi")]
        variant: Initializer,
        #[command(flatten)]
        mpi: MpiArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Initialise and optimise one instance; prints a JSON run record.
    Run {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value = "rand")]
        init: Initializer,
        #[arg(long, default_value = "ga-elite")]
        optimizer: Optimizer,
        #[arg(long, default_value_t = 800)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        repo: Option<PathBuf>,
        #[arg(long)]
        gating: Option<PathBuf>,
        #[command(flatten)]
        mpi: MpiArgs,
    },
    /// Run every cell of an experiment plan (resumable).
    Bench {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        results: PathBuf,
    },
    /// Summarise a results store and evaluate the plan's checks.
    Report {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        results: PathBuf,
        #[arg(long, default_value = "text-table")]
        format: ReportFormat,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct InstanceArgs {
    /// Instance file (repeatable).
    #[arg(long = "instance")]
    files: Vec<PathBuf>,
    /// Generated instance `CLASS:DIM:SEED` (repeatable).
    #[arg(long = "generate")]
    generated: Vec<String>,
}

impl InstanceArgs {
    fn load(&self) -> Result<Vec<Instance>> {
        let mut out = Vec::new();
        for f in &self.files {
            out.push(load_instance(&fs::read(f)?)?);
        }
        for g in &self.generated {
            let parts: Vec<&str> = g.split(':').collect();
            let [class, dim, seed] = parts[..] else {
                return Err(popinit::Error::InvalidArgument(format!("`{g}` is not CLASS:DIM:SEED")));
            };
            let num = |s: &str| s.parse::<u64>().map_err(|e| popinit::Error::Parse(format!("{s}: {e}")));
            out.push(generate_instance(class.parse()?, num(dim)? as usize, num(seed)?)?);
        }
        Ok(out)
    }
}

#[derive(Args)]
struct MpiArgs {
    #[arg(long, default_value_t = 64)]
    e: usize,
    #[arg(long, default_value_t = 12)]
    k: usize,
    #[arg(long, default_value_t = 4)]
    q: usize,
    #[arg(long = "qm", default_value_t = 20)]
    q_m: usize,
    #[arg(long, default_value_t = 20)]
    p: usize,
    #[arg(long = "samples", default_value_t = 100_000)]
    candidate_sample_count: usize,
}

impl MpiArgs {
    fn config(&self) -> MpiConfig {
        MpiConfig {
            e: self.e,
            k: self.k,
            q: self.q,
            q_m: self.q_m,
            p: self.p,
            candidate_sample_count: self.candidate_sample_count,
            ..MpiConfig::default()
        }
    }
}

fn read_instance(path: &Path) -> Result<Instance> {
    load_instance(&fs::read(path)?)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::GenInstance { class, dim, seed, out } => {
            fs::write(&out, save_instance(&generate_instance(class, dim, seed)?))?;
        }
        Command::BuildRepo { instances, samples, epochs, seed, out } => {
            let config = RepositoryConfig {
                samples_per_instance: samples,
                seed,
                train: TrainConfig { epochs, ..TrainConfig::default() },
            };
            let repo = build_repository(&instances.load()?, &config)?;
            repo.save(&out)?;
            println!("{} records, fingerprint {}", repo.len(), repo.fingerprint());
        }
        Command::TrainGating { repo, instances, variant, iters, seed, profile, out } => {
            let repo = ExperienceRepository::load(&repo)?;
            let mut config = match profile {
                Some(p) => toml::from_str(&fs::read_to_string(p)?).map_err(|e| popinit::Error::Parse(e.to_string()))?,
                None => GatingTrainingConfig::default(),
            };
            config.variant = variant;
            config.seed = seed;
            config.pgpe.max_iter = iters;
            let instances = instances.load()?;
            let trainer = GatingTrainer::new(&repo, &instances, config)?;
            let (model, result) = trainer.train()?;
            model.save(&out)?;
            println!("gating objective {:.6}", result.best_value);
        }
        Command::Init { instance, repo, gating, variant, mpi, seed, out } => {
            let inst = read_instance(&instance)?;
            let repo = ExperienceRepository::load(&repo)?;
            let gating = GatingModel::load(&gating, &repo)?;
            let config = mpi.config();
            let meter = BudgetMeter::new(config.planned_fes() + config.p);
            let mut r = rng::seeded(seed);
            let result = match variant {
                Initializer::Mpi => mpi_initialize(&inst, &repo, &gating, &config, &meter, &mut r)?,
                Initializer::NoGating => ablation_initialize(Ablation::NoGating, &inst, &repo, &gating, &config, &meter, &mut r)?,
                Initializer::NoTransfer => ablation_initialize(Ablation::NoTransfer, &inst, &repo, &gating, &config, &meter, &mut r)?,
                Initializer::NoInterp => {
                    ablation_initialize(Ablation::NoInterpolation, &inst, &repo, &gating, &config, &meter, &mut r)?
                }
                other => {
                    return Err(popinit::Error::InvalidArgument(format!("`init` runs transfer variants only, not {other}")));
                }
            };
            let mut text = String::new();
            let mut tags = String::new();
            for (s, t) in result.population.iter().zip(&result.provenance) {
                text.push_str(&format!("{} {}\n", s.solution, s.objective));
                tags.push_str(&format!("{t}\n"));
            }
            fs::write(&out, text)?;
            fs::write(out.with_extension("provenance"), tags)?;
            println!("{} FEs", result.fes_consumed);
        }
        Command::Run { instance, init, optimizer, budget, seed, repo, gating, mpi } => {
            let inst = read_instance(&instance)?;
            let loaded = match (repo, gating) {
                (Some(r), Some(g)) => {
                    let repo = ExperienceRepository::load(&r)?;
                    let gating = GatingModel::load(&g, &repo)?;
                    Some((repo, gating))
                }
                _ => None,
            };
            let artifacts = loaded.as_ref().map(|(repository, gating)| Artifacts { repository, gating });
            let config = mpi.config();
            let method = Method { init, optimizer };
            let out = run_single(&inst, method, budget, artifacts.as_ref(), &config, &SvmConfig::default(), seed)?;
            let record = serde_json::json!({
                "instance": inst.id(),
                "method": method.to_string(),
                "budget": budget,
                "seed": seed,
                "fes_init": out.fes_init,
                "trace": out.trace,
                "best_solution": out.best.solution.to_bitstring(),
                "best_objective": out.best.objective,
            });
            println!("{record}");
        }
        Command::Bench { plan, results } => {
            let plan = ExperimentPlan::from_toml(&fs::read_to_string(plan)?)?;
            let loaded = load_artifacts(&plan)?;
            let artifacts = loaded.as_ref().map(|(repository, gating)| Artifacts { repository, gating });
            let records = run_experiment(&plan, artifacts.as_ref(), Some(&results))?;
            println!("{} run records", records.len());
        }
        Command::Report { plan, results, format, out } => {
            let plan = ExperimentPlan::from_toml(&fs::read_to_string(plan)?)?;
            let records = read_results(&results)?;
            for p in emit_report(&records, &plan, format, &out)? {
                println!("wrote {}", p.display());
            }
            let mut ok = true;
            for check in &plan.checks {
                let outcome = evaluate_check(&records, check, plan.alpha)?;
                println!("[{}] {}: {}", if outcome.passed { "PASS" } else { "FAIL" }, outcome.name, outcome.detail);
                ok &= outcome.passed;
            }
            return Ok(ok);
        }
    }
    Ok(true)
}

fn load_artifacts(plan: &ExperimentPlan) -> Result<Option<(ExperienceRepository, GatingModel)>> {
    match (&plan.artifacts.repository, &plan.artifacts.gating) {
        (Some(r), Some(g)) => {
            let repo = ExperienceRepository::load(r)?;
            let gating = GatingModel::load(g, &repo)?;
            Ok(Some((repo, gating)))
        }
        _ => Ok(None),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
