//! `geocover`: synthesize privacy policies and run the coverage pipeline.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use geocover_core::harness::{
    build_clients, evaluate_coverage, generate_world, parse_epsilon, profiling_auc,
    run_experiment, ExperimentConfig, PiSpec, ProfileMethod, WorldConfig,
};
use geocover_core::location::{LocationSet, TargetSet};
use geocover_core::mobility::{Period, TraceSet};
use geocover_core::privacy::{PriorDistribution, PMIN_DEFAULT};
use geocover_core::selection::{kl_divergence, run_selection, SelectionParams, SelectionResult};
use geocover_core::synthesis::{synthesize, SynthesisConfig};
use geocover_core::LocationId;

#[derive(Parser)]
#[command(name = "geocover", version, about = "Location-private crowd coverage toolkit")]
struct Cli {
    /// Master random seed.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Directory for generated files.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Experiment config file (key=value), used by `experiment`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct TraceArgs {
    /// Traces CSV (`user,timestamp,loc_id`).
    #[arg(long)]
    traces: PathBuf,
    /// Locations CSV (`id,x_km,y_km`).
    #[arg(long)]
    locations: PathBuf,
    /// Train/test split boundary (epoch seconds).
    #[arg(long)]
    split_time: i64,
    /// Period granularity.
    #[arg(long, default_value = "daily")]
    period: String,
}

impl TraceArgs {
    fn load(&self) -> anyhow::Result<(LocationSet, TraceSet)> {
        let ls = LocationSet::load_csv(&self.locations)
            .with_context(|| format!("loading {}", self.locations.display()))?;
        let period = parse_period(&self.period)?;
        let traces = TraceSet::load_csv(&self.traces, period, self.split_time)
            .with_context(|| format!("loading {}", self.traces.display()))?;
        traces.validate_against(&ls)?;
        Ok((ls, traces))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic world: locations.csv, traces.csv, world.json.
    GenWorld {
        #[arg(long, default_value_t = 5)]
        rows: usize,
        #[arg(long, default_value_t = 5)]
        cols: usize,
        #[arg(long, default_value_t = 1.0)]
        cell_km: f64,
        #[arg(long, default_value_t = 600)]
        n_users: usize,
        /// Home distribution: `uniform` or `zipf:<exponent>`.
        #[arg(long, default_value = "zipf:1.0")]
        pi: String,
        #[arg(long, default_value_t = 2.0)]
        lambda_home: f64,
        #[arg(long, default_value_t = 0.01)]
        lambda_bg: f64,
        #[arg(long, default_value_t = 40)]
        train_periods: usize,
        #[arg(long, default_value_t = 1)]
        test_periods: usize,
        #[arg(long, default_value = "daily")]
        period: String,
    },
    /// Build mobility profiles and optionally score them on the test window.
    Profile {
        #[command(flatten)]
        traces: TraceArgs,
        /// `frequency` or `poisson`.
        #[arg(long, default_value = "poisson")]
        method: String,
        /// Output JSON (map user -> per-location probabilities).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also report ROC AUC against the held-out window.
        #[arg(long)]
        roc: bool,
    },
    /// Synthesize the optimal obfuscation policy for a target set.
    Synthesize {
        #[arg(long)]
        locations: PathBuf,
        /// Prior JSON: array of per-location probabilities.
        #[arg(long)]
        prior: PathBuf,
        /// Comma-separated target location ids, e.g. "3,7,11".
        #[arg(long)]
        targets: String,
        /// Privacy budget: literal or `ln2|ln4|ln6|ln8`.
        #[arg(long)]
        epsilon: String,
        #[arg(long)]
        n_users: usize,
        /// Number of users to select.
        #[arg(long)]
        alpha: usize,
        #[arg(long, default_value_t = 0.95)]
        rho: f64,
        /// Designated report location.
        #[arg(long, default_value_t = 0)]
        l_hat: usize,
        #[arg(long, default_value_t = PMIN_DEFAULT)]
        p_min: f64,
        #[arg(long, default_value = "policy.json")]
        out: PathBuf,
    },
    /// Run group-wise estimation and user selection on traces.
    Select {
        #[command(flatten)]
        traces: TraceArgs,
        #[arg(long)]
        targets: String,
        #[arg(long)]
        epsilon: String,
        #[arg(long, default_value_t = 0.7)]
        delta: f64,
        #[arg(long, default_value_t = 6)]
        k: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha_frac: f64,
        #[arg(long, default_value_t = 0.95)]
        rho: f64,
        /// Ground-truth prior JSON; enables the KL trajectory.
        #[arg(long)]
        pi_true: Option<PathBuf>,
        #[arg(long, default_value = "selection.json")]
        report: PathBuf,
    },
    /// Coverage of a selected user list on the held-out window.
    Evaluate {
        #[command(flatten)]
        traces: TraceArgs,
        /// JSON array of selected user ids.
        #[arg(long)]
        selected: PathBuf,
        #[arg(long)]
        targets: String,
    },
    /// Multi-trial comparison of selection methods on synthetic worlds.
    Experiment {
        /// Override the configured trial count.
        #[arg(long)]
        trials: Option<usize>,
    },
}

fn parse_period(s: &str) -> anyhow::Result<Period> {
    match s {
        "daily" => Ok(Period::Daily),
        "weekly" => Ok(Period::Weekly),
        other => bail!("period must be daily or weekly, got {other:?}"),
    }
}

fn parse_targets(spec: &str, n: usize) -> anyhow::Result<TargetSet> {
    let ids: Vec<usize> = spec
        .split(',')
        .map(|s| s.trim().parse().with_context(|| format!("bad target id {s:?}")))
        .collect::<anyhow::Result<_>>()?;
    Ok(TargetSet::from_indices(n, &ids)?)
}

fn load_prior(path: &Path, n: usize) -> anyhow::Result<PriorDistribution> {
    let probs: Vec<f64> = serde_json::from_str(&std::fs::read_to_string(path)?)
        .with_context(|| format!("parsing prior {}", path.display()))?;
    if probs.len() != n {
        bail!("prior has {} entries, universe has {n}", probs.len());
    }
    Ok(PriorDistribution::from_probs(probs)?)
}

#[derive(Serialize, Deserialize)]
struct WorldMeta {
    rows: usize,
    cols: usize,
    cell_km: f64,
    n_users: usize,
    period: Period,
    split_time: i64,
    pi_true: Vec<f64>,
}

#[derive(Serialize)]
struct GroupReport {
    l_hat: usize,
    beta: f64,
    size: usize,
    nulls: usize,
    matches: usize,
}

#[derive(Serialize)]
struct SelectionReport {
    selected: Vec<String>,
    null_fraction: f64,
    groups: Vec<GroupReport>,
    final_pi: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kl_trajectory: Option<Vec<f64>>,
}

fn selection_report(result: &SelectionResult, pi_true: Option<&PriorDistribution>) -> SelectionReport {
    SelectionReport {
        selected: result.selected.clone(),
        null_fraction: result.null_fraction(),
        groups: result
            .groups
            .iter()
            .map(|g| GroupReport {
                l_hat: g.l_hat.index(),
                beta: g.beta,
                size: g.size,
                nulls: g.nulls,
                matches: g.matches,
            })
            .collect(),
        final_pi: result.final_pi.as_slice().to_vec(),
        kl_trajectory: pi_true.map(|pt| {
            result.groups.iter().map(|g| kl_divergence(&g.pi_after, pt)).collect()
        }),
    }
}

fn pi_spec(s: &str) -> anyhow::Result<PiSpec> {
    if s == "uniform" {
        Ok(PiSpec::Uniform)
    } else if let Some(exp) = s.strip_prefix("zipf:") {
        Ok(PiSpec::Zipf { exponent: exp.parse().context("bad zipf exponent")? })
    } else {
        bail!("pi must be uniform or zipf:<exponent>, got {s:?}")
    }
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    std::fs::create_dir_all(&cli.out_dir)
        .with_context(|| format!("creating {}", cli.out_dir.display()))?;

    match cli.command {
        Command::GenWorld {
            rows,
            cols,
            cell_km,
            n_users,
            pi,
            lambda_home,
            lambda_bg,
            train_periods,
            test_periods,
            period,
        } => {
            let config = WorldConfig {
                rows,
                cols,
                cell_km,
                n_users,
                pi_true: pi_spec(&pi)?,
                lambda_home,
                lambda_bg,
                train_periods,
                test_periods,
                period: parse_period(&period)?,
                seed: cli.seed,
                ..WorldConfig::default()
            };
            let (ls, traces, pi_true) = generate_world(&config)?;
            ls.write_csv(cli.out_dir.join("locations.csv"))?;
            traces.write_csv(cli.out_dir.join("traces.csv"))?;
            let meta = WorldMeta {
                rows,
                cols,
                cell_km,
                n_users,
                period: config.period,
                split_time: traces.split_time(),
                pi_true: pi_true.as_slice().to_vec(),
            };
            std::fs::write(
                cli.out_dir.join("world.json"),
                serde_json::to_string_pretty(&meta)?,
            )?;
            println!(
                "wrote {} events for {} users to {}; split_time = {}",
                traces.events().len(),
                n_users,
                cli.out_dir.display(),
                traces.split_time()
            );
        }

        Command::Profile { traces, method, out, roc } => {
            let (ls, trace_set) = traces.load()?;
            let method: ProfileMethod = method.parse()?;
            if let Some(out) = out {
                let mut profiles = serde_json::Map::new();
                for user in trace_set.users().map(str::to_string).collect::<Vec<_>>() {
                    let p = method.profile(&trace_set, &ls, &user)?;
                    profiles.insert(user, serde_json::to_value(p.probs)?);
                }
                let path = cli.out_dir.join(out);
                std::fs::write(&path, serde_json::to_string(&profiles)?)?;
                println!("wrote profiles to {}", path.display());
            }
            if roc {
                let (_, auc) = profiling_auc(&ls, &trace_set, method)?;
                println!("method={method:?} auc={auc:.4}");
            }
        }

        Command::Synthesize {
            locations,
            prior,
            targets,
            epsilon,
            n_users,
            alpha,
            rho,
            l_hat,
            p_min,
            out,
        } => {
            let ls = LocationSet::load_csv(&locations)?;
            let prior = load_prior(&prior, ls.len())?;
            let mut config = SynthesisConfig::new(
                parse_epsilon(&epsilon)?,
                parse_targets(&targets, ls.len())?,
                n_users,
                alpha,
            );
            config.rho = rho;
            config.report_loc = LocationId(l_hat);
            config.p_min = p_min;
            let result = synthesize(&ls, &prior, &config)?;
            let path = cli.out_dir.join(out);
            result.policy.save(&path)?;
            println!(
                "l_hat={} beta={:.6} objective={:.6} -> {}",
                result.report_loc,
                result.beta,
                result.objective,
                path.display()
            );
        }

        Command::Select {
            traces,
            targets,
            epsilon,
            delta,
            k,
            alpha_frac,
            rho,
            pi_true,
            report,
        } => {
            let (ls, trace_set) = traces.load()?;
            let target_set = parse_targets(&targets, ls.len())?;
            let users: Vec<String> = trace_set.users().map(str::to_string).collect();
            let n_users = users.len();
            let clients = build_clients(&ls, &trace_set, n_users, delta)?;
            let alpha = ((n_users as f64 * alpha_frac).round() as usize).max(1);
            let params = SelectionParams {
                epsilon: parse_epsilon(&epsilon)?,
                k,
                alpha,
                rho,
                p_min: PMIN_DEFAULT,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
            let result = run_selection(&ls, &target_set, &clients, &params, &mut rng)?;
            let truth = match pi_true {
                Some(path) => Some(load_prior(&path, ls.len())?),
                None => None,
            };
            let path = cli.out_dir.join(report);
            std::fs::write(
                &path,
                serde_json::to_string_pretty(&selection_report(&result, truth.as_ref()))?,
            )?;
            println!(
                "selected {} of {} requested users -> {}",
                result.selected.len(),
                alpha,
                path.display()
            );
        }

        Command::Evaluate { traces, selected, targets } => {
            let (ls, trace_set) = traces.load()?;
            let target_set = parse_targets(&targets, ls.len())?;
            let users: Vec<String> =
                serde_json::from_str(&std::fs::read_to_string(&selected)?)
                    .with_context(|| format!("parsing {}", selected.display()))?;
            let coverage = evaluate_coverage(&users, &trace_set, &target_set)?;
            println!("coverage={coverage:.4} over {} users", users.len());
        }

        Command::Experiment { trials } => {
            let mut cfg = match cli.config {
                Some(path) => ExperimentConfig::load_key_values(&path)
                    .with_context(|| format!("loading {}", path.display()))?,
                None => ExperimentConfig::default(),
            };
            cfg.master_seed = cli.seed;
            if let Some(t) = trials {
                cfg.trials = t;
            }
            let report = run_experiment(&cfg)?;
            let csv_path = cli.out_dir.join("report.csv");
            let json_path = cli.out_dir.join("report.json");
            std::fs::write(&csv_path, report.to_csv())?;
            std::fs::write(&json_path, report.to_json()?)?;
            for agg in &report.aggregates {
                println!(
                    "{:>8}: coverage {:.4} +- {:.4} ({} trials, mean selected {:.1})",
                    agg.method.as_str(),
                    agg.mean_coverage,
                    agg.stderr_coverage,
                    agg.trials,
                    agg.mean_selected
                );
            }
            if !report.errors.is_empty() {
                eprintln!("{} trial errors (see report.json)", report.errors.len());
            }
            println!("wrote {} and {}", csv_path.display(), json_path.display());
        }
    }
    Ok(())
}
