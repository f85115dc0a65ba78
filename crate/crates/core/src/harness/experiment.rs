//! End-to-end experiment orchestration: baselines, coverage evaluation,
//! trial loops and report emission.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::location::{LocationId, LocationSet, TargetSet};
use crate::mobility::{profile_frequency, profile_poisson, roc_auc, MobilityProfile, TraceSet};
use crate::privacy::{
    coverage_score, laplace_policy_scaled, PriorDistribution, LAPLACE_KERNEL_SCALE, PMIN_DEFAULT,
};
use crate::selection::{
    kl_divergence, run_pipeline, run_selection, Client, ProfileClient, SelectionParams,
    SelectionResult,
};

use super::world::{generate_world, WorldConfig};

/// Mobility profiling estimator choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfileMethod {
    Frequency,
    Poisson,
}

impl ProfileMethod {
    pub fn profile(&self, traces: &TraceSet, ls: &LocationSet, user: &str) -> Result<MobilityProfile> {
        match self {
            ProfileMethod::Frequency => profile_frequency(traces, ls, user),
            ProfileMethod::Poisson => profile_poisson(traces, ls, user),
        }
    }
}

impl FromStr for ProfileMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frequency" => Ok(ProfileMethod::Frequency),
            "poisson" => Ok(ProfileMethod::Poisson),
            other => Err(Error::invalid(format!("unknown profiling method {other:?}"))),
        }
    }
}

/// Selection strategies compared by the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Ours,
    Laplace,
    NoObfuscation,
    Random,
}

impl Method {
    pub const ALL: [Method; 4] =
        [Method::Ours, Method::Laplace, Method::NoObfuscation, Method::Random];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Ours => "ours",
            Method::Laplace => "laplace",
            Method::NoObfuscation => "no",
            Method::Random => "random",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ours" => Ok(Method::Ours),
            "laplace" => Ok(Method::Laplace),
            "no" => Ok(Method::NoObfuscation),
            "random" => Ok(Method::Random),
            other => Err(Error::invalid(format!("unknown method {other:?}"))),
        }
    }
}

/// Fraction of selected users with at least one held-out event in any
/// target location.
pub fn evaluate_coverage(
    selected: &[String],
    traces: &TraceSet,
    targets: &TargetSet,
) -> Result<f64> {
    if selected.is_empty() {
        return Err(Error::UndefinedMetric("coverage of an empty selection".into()));
    }
    let mut covered: BTreeSet<&str> = BTreeSet::new();
    for e in traces.events() {
        if e.time >= traces.split_time() && targets.contains(e.location) {
            covered.insert(e.user.as_str());
        }
    }
    let hits = selected.iter().filter(|u| covered.contains(u.as_str())).count();
    Ok(hits as f64 / selected.len() as f64)
}

/// No-obfuscation baseline: users upload a true frequent location and the
/// platform keeps up to `alpha` whose upload is a target, in random order.
pub fn run_baseline_no(
    clients: &[ProfileClient],
    targets: &TargetSet,
    alpha: usize,
    rng: &mut (impl Rng + ?Sized),
) -> Vec<String> {
    let mut candidates: Vec<String> = clients
        .iter()
        .filter_map(|c| {
            c.pick_plain(rng)
                .filter(|&l| targets.contains(l))
                .map(|_| c.id().to_string())
        })
        .collect();
    for i in (1..candidates.len()).rev() {
        candidates.swap(i, rng.random_range(0..=i));
    }
    candidates.truncate(alpha);
    candidates
}

/// Uniform random `alpha`-subset of users.
pub fn run_baseline_random(
    clients: &[ProfileClient],
    alpha: usize,
    rng: &mut (impl Rng + ?Sized),
) -> Vec<String> {
    let mut ids: Vec<String> = clients.iter().map(|c| c.id().to_string()).collect();
    for i in (1..ids.len()).rev() {
        ids.swap(i, rng.random_range(0..=i));
    }
    ids.truncate(alpha);
    ids
}

/// Laplace baseline: the same group pipeline, but every group's policy is
/// the fixed Laplace mechanism and the designated location is the column
/// with the best posterior coverage under the current prior estimate.
pub fn run_baseline_laplace<C: Client, R: Rng>(
    ls: &LocationSet,
    targets: &TargetSet,
    clients: &[C],
    params: &SelectionParams,
    rng: &mut R,
) -> Result<SelectionResult> {
    run_baseline_laplace_scaled(ls, targets, clients, params, LAPLACE_KERNEL_SCALE, rng)
}

/// Laplace baseline with an explicit kernel scale.
pub fn run_baseline_laplace_scaled<C: Client, R: Rng>(
    ls: &LocationSet,
    targets: &TargetSet,
    clients: &[C],
    params: &SelectionParams,
    kernel_scale: f64,
    rng: &mut R,
) -> Result<SelectionResult> {
    let policy = laplace_policy_scaled(ls, params.epsilon, kernel_scale)?;
    let provider = |pi: &PriorDistribution, _beta: f64| {
        let mut best = LocationId(0);
        let mut best_score = f64::NEG_INFINITY;
        for j in ls.ids() {
            let score = coverage_score(pi, &policy, j, targets)?;
            if score > best_score {
                best_score = score;
                best = j;
            }
        }
        Ok((policy.clone(), best))
    };
    run_pipeline(ls, clients, params, provider, rng)
}

/// Scores both profilers on held-out periods: samples are (score, did the
/// user visit that location in the test window) over all users with
/// training presence.
pub fn profiling_auc(
    ls: &LocationSet,
    traces: &TraceSet,
    method: ProfileMethod,
) -> Result<(Vec<(f64, f64)>, f64)> {
    let mut visited: BTreeSet<(String, usize)> = BTreeSet::new();
    for e in traces.events() {
        if e.time >= traces.split_time() {
            visited.insert((e.user.clone(), e.location.0));
        }
    }
    let mut samples = Vec::new();
    for user in traces.users().map(str::to_string).collect::<Vec<_>>() {
        let has_train = traces
            .user_events(&user)
            .map(|mut it| it.any(|e| e.time < traces.split_time()))
            .unwrap_or(false);
        if !has_train {
            continue;
        }
        let profile = method.profile(traces, ls, &user)?;
        for l in 0..ls.len() {
            samples.push((profile.probs[l], visited.contains(&(user.clone(), l))));
        }
    }
    roc_auc(&samples)
}

/// Experiment-wide parameters: the world plus the selection pipeline
/// settings swept by the paper-style comparisons.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub world: WorldConfig,
    pub epsilon: f64,
    /// Frequent-location threshold used by clients.
    pub delta: f64,
    pub k: usize,
    /// Selection quota as a fraction of the user count.
    pub alpha_frac: f64,
    pub rho: f64,
    /// Number of per-trial random targets (ignored when `targets` set).
    pub n_targets: usize,
    pub targets: Option<Vec<usize>>,
    pub methods: Vec<Method>,
    pub trials: usize,
    pub master_seed: u64,
    pub p_min: f64,
    /// Kernel scale of the Laplace baseline.
    pub laplace_kernel_scale: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            world: WorldConfig::default(),
            epsilon: 4.0f64.ln(),
            delta: 0.7,
            k: 6,
            alpha_frac: 0.05,
            rho: 0.95,
            n_targets: 4,
            targets: None,
            methods: Method::ALL.to_vec(),
            trials: 50,
            master_seed: 42,
            p_min: PMIN_DEFAULT,
            laplace_kernel_scale: LAPLACE_KERNEL_SCALE,
        }
    }
}

impl ExperimentConfig {
    pub fn alpha(&self) -> usize {
        ((self.world.n_users as f64 * self.alpha_frac).round() as usize).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid("delta must lie in (0, 1)"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("need at least one trial"));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("need at least one method"));
        }
        if self.k == 0 || self.k > self.world.n_users {
            return Err(Error::invalid("bad group count"));
        }
        let n = self.world.rows * self.world.cols;
        if let Some(t) = &self.targets {
            TargetSet::from_indices(n, t)?;
        } else if self.n_targets == 0 || self.n_targets > n {
            return Err(Error::invalid("bad target count"));
        }
        Ok(())
    }
}

/// One successful (method, trial) measurement.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRow {
    pub method: Method,
    pub epsilon: f64,
    pub delta: f64,
    pub n_targets: usize,
    pub trial: usize,
    pub coverage: f64,
    pub selected: usize,
    pub kl_final: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialError {
    pub trial: usize,
    pub method: Method,
    pub message: String,
}

/// Mean/stderr aggregate per method over successful trials.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodAggregate {
    pub method: Method,
    pub trials: usize,
    pub mean_coverage: f64,
    pub stderr_coverage: f64,
    pub mean_selected: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub rows: Vec<TrialRow>,
    pub aggregates: Vec<MethodAggregate>,
    pub errors: Vec<TrialError>,
}

impl ExperimentReport {
    /// Fixed CSV schema: `method,epsilon,delta,n_targets,trial,coverage,selected,kl_final`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,epsilon,delta,n_targets,trial,coverage,selected,kl_final\n");
        for r in &self.rows {
            let kl = r.kl_final.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{kl}\n",
                r.method, r.epsilon, r.delta, r.n_targets, r.trial, r.coverage, r.selected
            ));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn aggregate(&self, method: Method) -> Option<&MethodAggregate> {
        self.aggregates.iter().find(|a| a.method == method)
    }

    /// Per-trial coverages for one method, keyed by trial for pairing.
    pub fn coverages(&self, method: Method) -> Vec<(usize, f64)> {
        self.rows
            .iter()
            .filter(|r| r.method == method)
            .map(|r| (r.trial, r.coverage))
            .collect()
    }
}

/// SplitMix64 stream derivation so trials and methods get independent,
/// reproducible seeds regardless of scheduling.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Builds one client per generated user (Poisson profiles; users without
/// training events get an all-zero profile and will upload NULL).
pub fn build_clients(
    ls: &LocationSet,
    traces: &TraceSet,
    n_users: usize,
    delta: f64,
) -> Result<Vec<ProfileClient>> {
    let mut clients = Vec::with_capacity(n_users);
    for ui in 0..n_users {
        let user = WorldConfig::user_id(ui);
        let profile = if traces.has_user(&user) {
            profile_poisson(traces, ls, &user)?
        } else {
            MobilityProfile { user: user.clone(), probs: vec![0.0; ls.len()] }
        };
        clients.push(ProfileClient::new(profile, delta)?);
    }
    Ok(clients)
}

fn draw_targets(n: usize, count: usize, rng: &mut (impl Rng + ?Sized)) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..n).collect();
    for i in (1..ids.len()).rev() {
        ids.swap(i, rng.random_range(0..=i));
    }
    ids.truncate(count);
    ids.sort_unstable();
    ids
}

/// Runs `trials` independent worlds and compares the requested methods on
/// each. Component failures are recorded per (trial, method) and the
/// experiment continues.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let alpha = config.alpha();
    let mut rows = Vec::new();
    let mut errors = Vec::new();

    for trial in 0..config.trials {
        let world_seed = derive_seed(config.master_seed, 2 * trial as u64);
        let pipe_seed = derive_seed(config.master_seed, 2 * trial as u64 + 1);
        let world_cfg = WorldConfig { seed: world_seed, ..config.world.clone() };
        let (ls, traces, pi_true) = generate_world(&world_cfg)?;
        let n = ls.len();

        let targets = match &config.targets {
            Some(t) => TargetSet::from_indices(n, t)?,
            None => {
                let mut trng = ChaCha8Rng::seed_from_u64(derive_seed(pipe_seed, 0xFACE));
                TargetSet::from_indices(n, &draw_targets(n, config.n_targets, &mut trng))?
            }
        };
        let clients = build_clients(&ls, &traces, config.world.n_users, config.delta)?;
        let params = SelectionParams {
            epsilon: config.epsilon,
            k: config.k,
            alpha,
            rho: config.rho,
            p_min: config.p_min,
        };

        for (mi, &method) in config.methods.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(pipe_seed, 1 + mi as u64));
            let outcome: Result<(Vec<String>, Option<f64>)> = match method {
                Method::Ours => run_selection(&ls, &targets, &clients, &params, &mut rng)
                    .map(|r| {
                        let kl = kl_divergence(&r.final_pi, &pi_true);
                        (r.selected, Some(kl))
                    }),
                Method::Laplace => run_baseline_laplace_scaled(
                    &ls,
                    &targets,
                    &clients,
                    &params,
                    config.laplace_kernel_scale,
                    &mut rng,
                )
                .map(|r| {
                    let kl = kl_divergence(&r.final_pi, &pi_true);
                    (r.selected, Some(kl))
                }),
                Method::NoObfuscation => {
                    Ok((run_baseline_no(&clients, &targets, alpha, &mut rng), None))
                }
                Method::Random => Ok((run_baseline_random(&clients, alpha, &mut rng), None)),
            };
            let row = outcome.and_then(|(selected, kl_final)| {
                let coverage = evaluate_coverage(&selected, &traces, &targets)?;
                Ok(TrialRow {
                    method,
                    epsilon: config.epsilon,
                    delta: config.delta,
                    n_targets: targets.len(),
                    trial,
                    coverage,
                    selected: selected.len(),
                    kl_final,
                })
            });
            match row {
                Ok(row) => rows.push(row),
                Err(e) => errors.push(TrialError { trial, method, message: e.to_string() }),
            }
        }
    }

    let mut aggregates = Vec::new();
    for &method in &config.methods {
        let cov: Vec<f64> =
            rows.iter().filter(|r| r.method == method).map(|r| r.coverage).collect();
        if cov.is_empty() {
            continue;
        }
        let mean = cov.iter().sum::<f64>() / cov.len() as f64;
        let var = if cov.len() > 1 {
            cov.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (cov.len() - 1) as f64
        } else {
            0.0
        };
        let sel: f64 = rows
            .iter()
            .filter(|r| r.method == method)
            .map(|r| r.selected as f64)
            .sum::<f64>()
            / cov.len() as f64;
        aggregates.push(MethodAggregate {
            method,
            trials: cov.len(),
            mean_coverage: mean,
            stderr_coverage: (var / cov.len() as f64).sqrt(),
            mean_selected: sel,
        });
    }

    Ok(ExperimentReport { config: config.clone(), rows, aggregates, errors })
}
