//! Obfuscation policies, geographic differential-privacy verification,
//! posterior/coverage computations, the Laplace baseline, and the
//! analytic single-target construction with its bounds.
//!
//! A policy is a row-stochastic matrix: entry `(l, l*)` is the
//! probability of reporting `l*` when the true frequent location is `l`.
//! The privacy constraint says any two true locations map to any report
//! with probability ratio at most `exp(eps * d(l1, l2))`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::location::{LocationId, LocationSet, TargetSet};

/// Row sums and distribution sums must match 1 this tightly.
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// Default positivity floor for synthesized policy entries. Strict
/// positivity is relaxed to `>= PMIN_DEFAULT` so feasible sets are closed.
pub const PMIN_DEFAULT: f64 = 1e-9;

/// Default kernel scale for the Laplace baseline. Row normalization can
/// consume up to a factor `exp(eps*d)` of the budget, so the exponent is
/// halved to keep the verified guarantee at the claimed epsilon.
pub const LAPLACE_KERNEL_SCALE: f64 = 0.5;

/// Location count above which verification samples triples instead of
/// enumerating all of them.
const VERIFY_EXHAUSTIVE_LIMIT: usize = 64;
const VERIFY_SAMPLES: usize = 1_000_000;

/// Row-stochastic obfuscation matrix with its claimed privacy budget
/// (1/km). Whether the budget actually holds is checked separately by
/// [`verify_geo_dp`].
#[derive(Debug, Clone)]
pub struct ObfuscationPolicy {
    matrix: Vec<f64>, // row-major n x n, [true][reported]
    n: usize,
    epsilon: f64,
}

#[derive(Serialize, Deserialize)]
struct PolicyFile {
    epsilon: f64,
    locations: usize,
    rows: Vec<Vec<f64>>,
}

impl ObfuscationPolicy {
    /// Validates shape, non-negativity and row sums.
    pub fn from_rows(rows: Vec<Vec<f64>>, epsilon: f64) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::invalid("policy must have at least one row"));
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::invalid(format!("epsilon {epsilon} must be positive")));
        }
        let mut matrix = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::invalid(format!("row {i} has width {}, want {n}", row.len())));
            }
            let mut sum = 0.0;
            for &p in row {
                if !p.is_finite() || p < 0.0 {
                    return Err(Error::invalid(format!("row {i} has invalid entry {p}")));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::invalid(format!("row {i} sums to {sum}, want 1")));
            }
            matrix.extend_from_slice(row);
        }
        Ok(ObfuscationPolicy { matrix, n, epsilon })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// P(reported | true).
    #[inline]
    pub fn prob(&self, actual: LocationId, reported: LocationId) -> f64 {
        self.matrix[actual.0 * self.n + reported.0]
    }

    pub fn row(&self, actual: LocationId) -> &[f64] {
        &self.matrix[actual.0 * self.n..(actual.0 + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.matrix.chunks(self.n)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = PolicyFile {
            epsilon: self.epsilon,
            locations: self.n,
            rows: self.rows().map(|r| r.to_vec()).collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: PolicyFile = serde_json::from_str(text)?;
        if file.rows.len() != file.locations {
            return Err(Error::invalid(format!(
                "policy JSON claims {} locations but has {} rows",
                file.locations,
                file.rows.len()
            )));
        }
        Self::from_rows(file.rows, file.epsilon)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Distribution over the location universe, e.g. of users' frequent
/// locations.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorDistribution {
    probs: Vec<f64>,
}

impl PriorDistribution {
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("distribution must be non-empty"));
        }
        let mut sum = 0.0;
        for &p in &probs {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::invalid(format!("invalid probability {p}")));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::invalid(format!("distribution sums to {sum}, want 1")));
        }
        Ok(PriorDistribution { probs })
    }

    /// Normalizes arbitrary non-negative weights.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum.is_finite() && sum > 0.0) || weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::invalid("weights must be non-negative with positive sum"));
        }
        let mut probs: Vec<f64> = weights.iter().map(|w| w / sum).collect();
        // Nudge the largest entry so the sum is exactly 1 within tolerance.
        let total: f64 = probs.iter().sum();
        let imax =
            (0..probs.len()).max_by(|&a, &b| probs[a].partial_cmp(&probs[b]).unwrap()).unwrap();
        probs[imax] += 1.0 - total;
        Self::from_probs(probs)
    }

    pub fn uniform(n: usize) -> Self {
        PriorDistribution { probs: vec![1.0 / n as f64; n] }
    }

    #[inline]
    pub fn get(&self, l: LocationId) -> f64 {
        self.probs[l.0]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Result of checking a policy against the privacy constraint.
#[derive(Debug, Clone)]
pub struct DpReport {
    pub epsilon: f64,
    pub tol: f64,
    /// Largest `P(l*|l1) / (exp(eps d(l1,l2)) P(l*|l2)) - 1` seen.
    pub max_violation: f64,
    /// `(l1, l2, l*)` attaining the maximum.
    pub worst_triple: (LocationId, LocationId, LocationId),
    pub certified: bool,
    /// False when the triple space was sampled rather than enumerated.
    pub exhaustive: bool,
}

/// Checks the privacy constraint for every (or, above
/// `VERIFY_EXHAUSTIVE_LIMIT` locations, a fixed random sample of) ordered
/// triple `(l1, l2, l*)`.
pub fn verify_geo_dp(
    ls: &LocationSet,
    policy: &ObfuscationPolicy,
    epsilon: f64,
    tol: f64,
) -> Result<DpReport> {
    let n = ls.len();
    if policy.len() != n {
        return Err(Error::invalid(format!(
            "policy over {} locations checked against universe of {n}",
            policy.len()
        )));
    }
    let mut max_violation = f64::NEG_INFINITY;
    let mut worst = (LocationId(0), LocationId(0), LocationId(0));
    let mut consider = |l1: usize, l2: usize, j: usize, max_v: &mut f64| {
        let num = policy.matrix[l1 * n + j];
        let den = (epsilon * ls.d(l1, l2)).exp() * policy.matrix[l2 * n + j];
        let violation = if den > 0.0 {
            num / den - 1.0
        } else if num > 0.0 {
            f64::INFINITY
        } else {
            return;
        };
        if violation > *max_v {
            *max_v = violation;
            worst = (LocationId(l1), LocationId(l2), LocationId(j));
        }
    };
    let exhaustive = n <= VERIFY_EXHAUSTIVE_LIMIT;
    if exhaustive {
        for l1 in 0..n {
            for l2 in 0..n {
                for j in 0..n {
                    consider(l1, l2, j, &mut max_violation);
                }
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0xD9E5_C0DE);
        for _ in 0..VERIFY_SAMPLES {
            let l1 = rng.random_range(0..n);
            let l2 = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            consider(l1, l2, j, &mut max_violation);
        }
    }
    Ok(DpReport {
        epsilon,
        tol,
        max_violation,
        worst_triple: worst,
        certified: max_violation <= tol,
        exhaustive,
    })
}

/// Bayesian posterior over true locations given one observed report.
pub fn posterior(
    prior: &PriorDistribution,
    policy: &ObfuscationPolicy,
    observed: LocationId,
) -> Result<PriorDistribution> {
    let n = policy.len();
    if prior.len() != n || observed.0 >= n {
        return Err(Error::invalid("posterior: dimension mismatch"));
    }
    let mut post: Vec<f64> = prior
        .probs
        .iter()
        .enumerate()
        .map(|(l, &p)| p * policy.matrix[l * n + observed.0])
        .collect();
    let den: f64 = post.iter().sum();
    if den <= 0.0 {
        return Err(Error::DegenerateObservation(observed.0));
    }
    for v in &mut post {
        *v /= den;
    }
    // Guard against rounding drift before revalidating.
    let sum: f64 = post.iter().sum();
    let imax = (0..n).max_by(|&a, &b| post[a].partial_cmp(&post[b]).unwrap()).unwrap();
    post[imax] += 1.0 - sum;
    PriorDistribution::from_probs(post)
}

/// Posterior probability that a user reporting `observed` has a true
/// frequent location inside the target set.
pub fn coverage_score(
    prior: &PriorDistribution,
    policy: &ObfuscationPolicy,
    observed: LocationId,
    targets: &TargetSet,
) -> Result<f64> {
    let post = posterior(prior, policy, observed)?;
    Ok(targets.ids().iter().map(|&t| post.get(t)).sum())
}

/// Discretized Laplace mechanism: row `l` is proportional to
/// `exp(-scale * eps * d(l, l*))`, then normalized.
pub fn laplace_policy_scaled(ls: &LocationSet, epsilon: f64, scale: f64) -> Result<ObfuscationPolicy> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid("epsilon must be positive"));
    }
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(Error::invalid("kernel scale must lie in (0, 1]"));
    }
    let n = ls.len();
    let mut rows = Vec::with_capacity(n);
    for l in 0..n {
        let mut row: Vec<f64> = (0..n).map(|j| (-scale * epsilon * ls.d(l, j)).exp()).collect();
        let sum: f64 = row.iter().sum();
        for v in &mut row {
            *v /= sum;
        }
        let total: f64 = row.iter().sum();
        row[l] += 1.0 - total;
        rows.push(row);
    }
    ObfuscationPolicy::from_rows(rows, epsilon)
}

/// Laplace baseline at the default kernel scale.
pub fn laplace_policy(ls: &LocationSet, epsilon: f64) -> Result<ObfuscationPolicy> {
    laplace_policy_scaled(ls, epsilon, LAPLACE_KERNEL_SCALE)
}

/// Samples a reported location from the policy row of the true location.
pub fn obfuscate(
    policy: &ObfuscationPolicy,
    actual: LocationId,
    rng: &mut (impl Rng + ?Sized),
) -> LocationId {
    let row = policy.row(actual);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return LocationId(j);
        }
    }
    LocationId(row.len() - 1)
}

/// Upper bound on the achievable posterior coverage of a single target.
#[derive(Debug, Clone, Copy)]
pub struct CoverageBound {
    pub value: f64,
    /// Set when the target has zero prior mass, which forces the bound
    /// (and any achievable coverage) to 0.
    pub zero_prior_target: bool,
}

/// `pi(t) / sum_l pi(l) exp(-eps d(l, t))`: no policy can concentrate
/// more posterior mass than this on the target.
pub fn single_target_upper_bound(
    ls: &LocationSet,
    prior: &PriorDistribution,
    target: LocationId,
    epsilon: f64,
) -> CoverageBound {
    let n = ls.len();
    let den: f64 =
        (0..n).map(|l| prior.probs[l] * (-epsilon * ls.d(l, target.0)).exp()).sum();
    let pt = prior.get(target);
    CoverageBound { value: if pt > 0.0 { pt / den } else { 0.0 }, zero_prior_target: pt <= 0.0 }
}

/// Largest column scale theta for which the analytic single-target
/// construction satisfies the privacy constraint on every column.
///
/// Pairs whose constraint is vacuous (denominator of the pair bound is
/// non-positive, which happens under triangle equality) impose no limit
/// and are skipped. Returns infinity for a single-location universe.
pub fn max_column_scale(ls: &LocationSet, target: LocationId, epsilon: f64) -> f64 {
    let n = ls.len();
    if n < 2 {
        return f64::INFINITY;
    }
    let mut tau = f64::INFINITY;
    for l1 in 0..n {
        for l2 in 0..n {
            if l1 == l2 {
                continue;
            }
            let num = (epsilon * ls.d(l1, l2)).exp() - 1.0;
            let den = (-epsilon * (ls.d(l2, target.0) - ls.d(l1, l2))).exp()
                - (-epsilon * ls.d(l1, target.0)).exp();
            if den > 0.0 {
                tau = tau.min(num / den);
            }
        }
    }
    tau
}

/// Analytic optimal policy for covering one target: the designated
/// report column is `theta * exp(-eps d(l, target))` and every other
/// column shares the remaining row mass uniformly.
///
/// Any `0 < theta <= max_column_scale` keeps the policy private; the
/// default is the maximum, which maximizes the expected number of users
/// reporting the designated location.
pub fn single_target_optimal_policy(
    ls: &LocationSet,
    target: LocationId,
    epsilon: f64,
    report_loc: LocationId,
    theta: Option<f64>,
) -> Result<ObfuscationPolicy> {
    let n = ls.len();
    if target.0 >= n || report_loc.0 >= n {
        return Err(Error::invalid("target or report location out of range"));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid("epsilon must be positive"));
    }
    if n == 1 {
        return ObfuscationPolicy::from_rows(vec![vec![1.0]], epsilon);
    }
    let tau = max_column_scale(ls, target, epsilon);
    let theta = theta.unwrap_or(tau);
    if theta <= 0.0 {
        return Err(Error::invalid(format!("column scale {theta} must be positive")));
    }
    if theta > tau * (1.0 + 1e-12) {
        return Err(Error::InfeasibleTheta { theta, limit: tau });
    }
    let mut rows = Vec::with_capacity(n);
    for l in 0..n {
        let hit = theta * (-epsilon * ls.d(l, target.0)).exp();
        let rest = (1.0 - hit) / (n as f64 - 1.0);
        let mut row = vec![rest; n];
        row[report_loc.0] = hit;
        let total: f64 = row.iter().sum();
        let fix = if report_loc.0 == 0 { 1 } else { 0 };
        row[fix] += 1.0 - total;
        rows.push(row);
    }
    ObfuscationPolicy::from_rows(rows, epsilon)
}

/// Upper bound on the achievable posterior coverage of a target set:
/// `(1 + sum_{l not in T} pi(l) / sum_{t in T} pi(t) exp(eps d(l, t)))^-1`.
///
/// For a single target this reduces to [`single_target_upper_bound`].
pub fn multi_target_upper_bound(
    ls: &LocationSet,
    prior: &PriorDistribution,
    targets: &TargetSet,
    epsilon: f64,
) -> Result<f64> {
    for &t in targets.ids() {
        if prior.get(t) <= 0.0 {
            return Err(Error::invalid(format!(
                "target {t} has zero prior mass; bound undefined"
            )));
        }
    }
    let mut outer = 0.0;
    for l in targets.complement() {
        let den: f64 = targets
            .ids()
            .iter()
            .map(|&t| prior.get(t) * (epsilon * ls.d(l.0, t.0)).exp())
            .sum();
        outer += prior.get(l) / den;
    }
    Ok(1.0 / (1.0 + outer))
}

/// Necessary condition for the multi-target bound to be attainable: all
/// non-target locations must see the same difference of distances to any
/// two targets.
pub fn multi_target_bound_feasible(ls: &LocationSet, targets: &TargetSet, tol: f64) -> bool {
    if targets.len() < 2 {
        return true;
    }
    let outside: Vec<LocationId> = targets.complement().collect();
    if outside.len() < 2 {
        return true;
    }
    let t = targets.ids();
    for a in 0..t.len() {
        for b in (a + 1)..t.len() {
            for i in 0..outside.len() {
                for j in (i + 1)..outside.len() {
                    let di = ls.d(outside[i].0, t[a].0) - ls.d(outside[i].0, t[b].0);
                    let dj = ls.d(outside[j].0, t[a].0) - ls.d(outside[j].0, t[b].0);
                    if (di - dj).abs() > tol {
                        return false;
                    }
                }
            }
        }
    }
    true
}
