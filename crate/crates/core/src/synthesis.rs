//! Optimal policy synthesis for covering a set of target locations.
//!
//! The server designates a report location, fixes the overall probability
//! `beta` that a user reports it (chosen from a Binomial tail so that
//! enough users can be selected), and maximizes the posterior probability
//! that a user reporting it has a true frequent location inside the
//! target set, subject to the privacy constraint.
//!
//! Two solve routes exist. [`build_coverage_lp`] materializes the complete
//! program over all `n^2` matrix entries and is the reference path.
//! [`synthesize`] solves an equivalent reduced program over the
//! designated column only and completes the matrix by spreading each
//! row's remaining mass uniformly over the other columns: averaging the
//! non-designated columns of any feasible matrix preserves feasibility
//! (the privacy rows are linear within a column) and the objective, so
//! the two routes have identical optima. The reduction makes synthesis
//! a few orders of magnitude faster and is exercised against the full
//! program in tests.

use crate::error::{Error, Result};
use crate::location::{LocationId, LocationSet, TargetSet};
use crate::lp::{solve, LinearProgram, LpStatus};
use crate::privacy::{ObfuscationPolicy, PriorDistribution, PMIN_DEFAULT};

/// Full-matrix LP construction is capped at this many locations.
pub const FULL_LP_MAX_LOCATIONS: usize = 50;

/// Accepted LP feasibility residual; one order below the certification
/// tolerance used on finished policies.
const LP_TOL: f64 = 1e-8;

/// Parameters of one synthesis run.
#[derive(Debug, Clone)]
pub struct SynthesisConfig {
    /// Privacy budget (1/km).
    pub epsilon: f64,
    pub targets: TargetSet,
    /// Total number of candidate users.
    pub n_users: usize,
    /// Number of users the platform wants to select.
    pub alpha: usize,
    /// Required probability of finding `alpha` reporters.
    pub rho: f64,
    /// Designated report location; any choice yields the same optimum.
    pub report_loc: LocationId,
    /// Positivity floor for policy entries.
    pub p_min: f64,
}

impl SynthesisConfig {
    pub fn new(epsilon: f64, targets: TargetSet, n_users: usize, alpha: usize) -> Self {
        SynthesisConfig {
            epsilon,
            targets,
            n_users,
            alpha,
            rho: 0.95,
            report_loc: LocationId(0),
            p_min: PMIN_DEFAULT,
        }
    }

    fn validate(&self, ls: &LocationSet) -> Result<()> {
        let n = ls.len();
        if self.targets.n_locations() != n {
            return Err(Error::invalid("target set built for a different universe"));
        }
        if self.report_loc.0 >= n {
            return Err(Error::invalid("report location out of range"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        if self.alpha == 0 || self.alpha > self.n_users {
            return Err(Error::invalid(format!(
                "alpha {} must satisfy 0 < alpha <= N = {}",
                self.alpha, self.n_users
            )));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::invalid("rho must lie in (0, 1)"));
        }
        if !(self.p_min >= 0.0 && self.p_min < 1.0 / n as f64) {
            return Err(Error::invalid("p_min too large for the universe"));
        }
        Ok(())
    }
}

/// Output of a synthesis run.
#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub policy: ObfuscationPolicy,
    pub report_loc: LocationId,
    /// Overall probability that a user reports the designated location.
    pub beta: f64,
    /// Achieved posterior coverage of the target set, in [0, 1].
    pub objective: f64,
}

/// Exact Binomial upper tail `Pr(X >= k)` for `X ~ Bin(n, p)`, summed in
/// log space over the smaller side of the distribution.
pub fn binomial_tail_at_least(n: usize, k: usize, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let mut ln_fact = Vec::with_capacity(n + 1);
    ln_fact.push(0.0f64);
    for i in 1..=n {
        ln_fact.push(ln_fact[i - 1] + (i as f64).ln());
    }
    let ln_pmf = |m: usize| -> f64 {
        ln_fact[n] - ln_fact[m] - ln_fact[n - m]
            + m as f64 * p.ln()
            + (n - m) as f64 * (1.0 - p).ln()
    };
    let log_sum_exp = |range: std::ops::Range<usize>| -> f64 {
        let terms: Vec<f64> = range.map(ln_pmf).collect();
        let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return 0.0;
        }
        let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
        max.exp() * sum
    };
    if k <= n - k + 1 {
        // Few terms below the threshold: sum the CDF side.
        (1.0 - log_sum_exp(0..k)).max(0.0)
    } else {
        log_sum_exp(k..n + 1).min(1.0)
    }
}

/// Smallest report probability `beta` such that at least `alpha` of
/// `n_users` independent reporters appear with probability `rho`, found
/// by bisection (the tail is nondecreasing in `beta`) to absolute
/// precision 1e-9.
pub fn beta_from_binomial(n_users: usize, alpha: usize, rho: f64) -> Result<f64> {
    if alpha == 0 || alpha > n_users {
        return Err(Error::invalid(format!(
            "alpha {alpha} must satisfy 0 < alpha <= N = {n_users}"
        )));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::invalid(format!("rho {rho} must lie in (0, 1)")));
    }
    if binomial_tail_at_least(n_users, alpha, 1.0) < rho {
        return Err(Error::SynthesisInfeasible {
            beta: 1.0,
            msg: format!("even beta = 1 cannot deliver {alpha} of {n_users} users"),
        });
    }
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if binomial_tail_at_least(n_users, alpha, mid) >= rho {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Builds the complete synthesis program over all `n^2` policy entries:
/// privacy rows for every ordered location pair and report column, a
/// row-sum equality per true location, and the report-rate equality.
///
/// The objective places `pi(t)/beta` on the designated column of each
/// target row and zero elsewhere.
pub fn build_coverage_lp(
    ls: &LocationSet,
    prior: &PriorDistribution,
    config: &SynthesisConfig,
    beta: f64,
) -> Result<LinearProgram> {
    config.validate(ls)?;
    let n = ls.len();
    if n > FULL_LP_MAX_LOCATIONS {
        return Err(Error::invalid(format!(
            "full-matrix LP capped at {FULL_LP_MAX_LOCATIONS} locations, got {n}"
        )));
    }
    if prior.len() != n {
        return Err(Error::invalid("prior dimension mismatch"));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid(format!("beta {beta} must lie in (0, 1)")));
    }
    let var = |l: usize, j: usize| l * n + j;
    let mut lp = LinearProgram::new(n * n);
    for &t in config.targets.ids() {
        lp.objective[var(t.0, config.report_loc.0)] = prior.get(t) / beta;
    }
    for j in 0..n {
        for l1 in 0..n {
            for l2 in 0..n {
                // Scaled by 1/K = exp(-eps d) to keep coefficients in [0, 1].
                let mut row = vec![0.0; n * n];
                row[var(l1, j)] += (-config.epsilon * ls.d(l1, l2)).exp();
                row[var(l2, j)] -= 1.0;
                lp.add_ub(row, 0.0);
            }
        }
    }
    for l in 0..n {
        let mut row = vec![0.0; n * n];
        for j in 0..n {
            row[var(l, j)] = 1.0;
        }
        lp.add_eq(row, 1.0);
    }
    let mut beta_row = vec![0.0; n * n];
    for l in 0..n {
        beta_row[var(l, config.report_loc.0)] = prior.get(LocationId(l));
    }
    lp.add_eq(beta_row, beta);
    for b in &mut lp.bounds {
        *b = (config.p_min, f64::INFINITY);
    }
    Ok(lp)
}

/// Reference synthesis route: solve the full-matrix program directly.
pub fn synthesize_via_full_lp(
    ls: &LocationSet,
    prior: &PriorDistribution,
    config: &SynthesisConfig,
    beta: f64,
) -> Result<SynthesisResult> {
    let n = ls.len();
    if n == 1 {
        return degenerate_single_location(config);
    }
    let lp = build_coverage_lp(ls, prior, config, beta)?;
    let sol = solve(&lp, LP_TOL)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            return Err(Error::SynthesisInfeasible {
                beta,
                msg: "full coverage LP infeasible".into(),
            });
        }
        LpStatus::Unbounded => {
            return Err(Error::NumericalFailure("coverage LP reported unbounded".into()));
        }
    }
    let rows: Vec<Vec<f64>> = (0..n).map(|l| sol.x[l * n..(l + 1) * n].to_vec()).collect();
    let rows = renormalize_rows(rows);
    let policy = ObfuscationPolicy::from_rows(rows, config.epsilon)?;
    Ok(SynthesisResult {
        policy,
        report_loc: config.report_loc,
        beta,
        objective: sol.objective,
    })
}

/// One-location universe: the only policy is the identity and the report
/// rate is pinned to 1 by row stochasticity.
fn degenerate_single_location(config: &SynthesisConfig) -> Result<SynthesisResult> {
    Ok(SynthesisResult {
        policy: ObfuscationPolicy::from_rows(vec![vec![1.0]], config.epsilon)?,
        report_loc: LocationId(0),
        beta: 1.0,
        objective: 1.0,
    })
}

fn renormalize_rows(mut rows: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    for row in &mut rows {
        let sum: f64 = row.iter().sum();
        let imax = (0..row.len())
            .max_by(|&a, &b| row[a].partial_cmp(&row[b]).unwrap())
            .unwrap();
        row[imax] += 1.0 - sum;
    }
    rows
}

/// Synthesis per the selection pipeline: `beta` chosen by the Binomial
/// rule, then one LP solve.
pub fn synthesize(
    ls: &LocationSet,
    prior: &PriorDistribution,
    config: &SynthesisConfig,
) -> Result<SynthesisResult> {
    let beta = beta_from_binomial(config.n_users, config.alpha, config.rho)?;
    synthesize_with_beta(ls, prior, config, beta)
}

/// Synthesis at an explicitly chosen report rate.
pub fn synthesize_with_beta(
    ls: &LocationSet,
    prior: &PriorDistribution,
    config: &SynthesisConfig,
    beta: f64,
) -> Result<SynthesisResult> {
    config.validate(ls)?;
    let n = ls.len();
    if prior.len() != n {
        return Err(Error::invalid("prior dimension mismatch"));
    }
    if n == 1 {
        return degenerate_single_location(config);
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid(format!("beta {beta} must lie in (0, 1)")));
    }
    let x = solve_reduced(ls, prior, config, beta)?;
    let objective: f64 =
        config.targets.ids().iter().map(|&t| prior.get(t) * x[t.0]).sum::<f64>() / beta;
    let policy = complete_policy(ls, config, &x)?;
    Ok(SynthesisResult { policy, report_loc: config.report_loc, beta, objective })
}

/// Expands the designated column into a full matrix. Any split of the
/// remaining row mass `1 - x(l)` over the other columns leaves the
/// objective and the report rate unchanged; a distance-kernel split is
/// preferred because it keeps non-designated reports informative for the
/// prior estimation, falling back to the uniform split (feasible by
/// construction) whenever the kernel variant fails certification.
fn complete_policy(
    ls: &LocationSet,
    config: &SynthesisConfig,
    x: &[f64],
) -> Result<ObfuscationPolicy> {
    let n = ls.len();
    let j_hat = config.report_loc.0;
    let kernel_eps = config.epsilon / 4.0;
    let mut rows = Vec::with_capacity(n);
    for (l, &hit) in x.iter().enumerate() {
        let weights: Vec<f64> =
            (0..n).map(|j| (-kernel_eps * ls.d(l, j)).exp()).collect();
        let z: f64 =
            weights.iter().enumerate().filter(|&(j, _)| j != j_hat).map(|(_, w)| w).sum();
        let mut row: Vec<f64> = weights.into_iter().map(|w| (1.0 - hit) * w / z).collect();
        row[j_hat] = hit;
        rows.push(row);
    }
    let kernel = ObfuscationPolicy::from_rows(renormalize_rows(rows), config.epsilon)?;
    if crate::privacy::verify_geo_dp(ls, &kernel, config.epsilon, 1e-9)?.certified {
        return Ok(kernel);
    }
    let rows = x
        .iter()
        .map(|&hit| {
            let mut row = vec![(1.0 - hit) / (n as f64 - 1.0); n];
            row[j_hat] = hit;
            row
        })
        .collect();
    ObfuscationPolicy::from_rows(renormalize_rows(rows), config.epsilon)
}

/// Solves the designated-column program
///
/// ```text
/// max  sum_t pi(t) x(t)
/// s.t. x(l1) <= K(l1,l2) x(l2)            (designated column privacy)
///      1 - x(l1) <= K(l1,l2) (1 - x(l2))  (uniform completion privacy)
///      sum_l pi(l) x(l) = beta
///      p_min <= x(l) <= 1 - (n-1) p_min
/// ```
///
/// with `K = exp(eps d)`. Privacy rows are generated lazily: solve with
/// an active subset, scan the full family for violations, add them and
/// repeat. The returned point satisfies every row, so it is optimal for
/// the complete program.
fn solve_reduced(
    ls: &LocationSet,
    prior: &PriorDistribution,
    config: &SynthesisConfig,
    beta: f64,
) -> Result<Vec<f64>> {
    let n = ls.len();
    let eps = config.epsilon;
    let p_min = config.p_min;
    let hi = 1.0 - (n as f64 - 1.0) * p_min;

    // active[fam * n * n + l1 * n + l2]
    let mut active = vec![false; 2 * n * n];
    let mut rows: Vec<(usize, usize, usize)> = Vec::new();
    let add = |fam: usize, l1: usize, l2: usize,
                   active: &mut Vec<bool>,
                   rows: &mut Vec<(usize, usize, usize)>|
     -> bool {
        let idx = fam * n * n + l1 * n + l2;
        if active[idx] {
            return false;
        }
        active[idx] = true;
        rows.push((fam, l1, l2));
        true
    };
    // Seed with nearest-neighbor pairs, which are usually the binding ones.
    for l1 in 0..n {
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for l2 in 0..n {
            if l2 != l1 && ls.d(l1, l2) < best_d {
                best_d = ls.d(l1, l2);
                best = l2;
            }
        }
        add(0, l1, best, &mut active, &mut rows);
        add(1, l1, best, &mut active, &mut rows);
    }

    let max_rounds = 2 * n * n + 8;
    for _round in 0..max_rounds {
        let mut lp = LinearProgram::new(n);
        for &t in config.targets.ids() {
            lp.objective[t.0] = prior.get(t);
        }
        for b in &mut lp.bounds {
            *b = (p_min, hi);
        }
        for &(fam, l1, l2) in &rows {
            // Rows scaled by 1/K = exp(-eps d) for bounded coefficients.
            let kinv = (-eps * ls.d(l1, l2)).exp();
            let mut row = vec![0.0; n];
            if fam == 0 {
                row[l1] += kinv;
                row[l2] -= 1.0;
                lp.add_ub(row, 0.0);
            } else {
                row[l1] -= kinv;
                row[l2] += 1.0;
                lp.add_ub(row, 1.0 - kinv);
            }
        }
        lp.add_eq(prior.as_slice().to_vec(), beta);

        let sol = solve(&lp, LP_TOL)?;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => {
                return Err(Error::SynthesisInfeasible {
                    beta,
                    msg: format!("report rate outside [{p_min}, {hi}]"),
                });
            }
            LpStatus::Unbounded => {
                return Err(Error::NumericalFailure(
                    "bounded coverage LP reported unbounded".into(),
                ));
            }
        }

        let x = &sol.x;
        let mut found = false;
        for l1 in 0..n {
            for l2 in 0..n {
                if l1 == l2 {
                    continue;
                }
                let k = (eps * ls.d(l1, l2)).exp();
                let scale = k.max(1.0);
                if (x[l1] - k * x[l2]) / scale > 1e-10 {
                    found |= add(0, l1, l2, &mut active, &mut rows);
                }
                if (k * x[l2] - x[l1] - (k - 1.0)) / scale > 1e-10 {
                    found |= add(1, l1, l2, &mut active, &mut rows);
                }
            }
        }
        if !found {
            return Ok(sol.x);
        }
    }
    Err(Error::NumericalFailure("privacy row generation did not converge".into()))
}

/// Solves the program for each report rate in `betas` (which must be
/// ascending) and returns the objectives; larger rates can never win, so
/// the sequence is nonincreasing up to LP tolerance.
pub fn beta_sweep(
    ls: &LocationSet,
    prior: &PriorDistribution,
    config: &SynthesisConfig,
    betas: &[f64],
) -> Result<Vec<(f64, Result<f64>)>> {
    if betas.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("betas must be sorted ascending"));
    }
    Ok(betas
        .iter()
        .map(|&b| (b, synthesize_with_beta(ls, prior, config, b).map(|r| r.objective)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::privacy::{coverage_score, laplace_policy, single_target_upper_bound, verify_geo_dp};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const LN4: f64 = 1.3862943611198906;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn binomial_tail_reference_points() {
        assert_eq!(binomial_tail_at_least(10, 0, 0.3), 1.0);
        assert_eq!(binomial_tail_at_least(10, 11, 0.3), 0.0);
        // Pr(X >= 1) = 1 - (1-p)^n.
        let t = binomial_tail_at_least(100, 1, 0.02);
        assert_close(t, 1.0 - 0.98f64.powi(100), 1e-12);
        // Pr(X >= n) = p^n.
        let t = binomial_tail_at_least(12, 12, 0.9);
        assert_close(t, 0.9f64.powi(12), 1e-12);
        // Symmetric midpoint: Pr(X >= 3 | n=5, p=0.5) = 0.5.
        assert_close(binomial_tail_at_least(5, 3, 0.5), 0.5, 1e-12);
    }

    #[test]
    fn binomial_tail_matches_pascal_recursion() {
        // Independent oracle: Pr(X >= k) from the exact pmf recursion
        // pmf(m+1) = pmf(m) (n-m)/(m+1) p/(1-p).
        let oracle = |n: usize, k: usize, p: f64| -> f64 {
            let mut pmf = (1.0 - p).powi(n as i32);
            let mut tail = if k == 0 { pmf } else { 0.0 };
            for m in 0..n {
                pmf *= (n - m) as f64 / (m + 1) as f64 * p / (1.0 - p);
                if m + 1 >= k {
                    tail += pmf;
                }
            }
            tail.min(1.0)
        };
        for &n in &[5usize, 12, 40] {
            for k in 0..=n {
                for &p in &[0.03, 0.2, 0.5, 0.77] {
                    let got = binomial_tail_at_least(n, k, p);
                    let want = oracle(n, k, p);
                    assert!(
                        (got - want).abs() <= 1e-12,
                        "n={n} k={k} p={p}: {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn completion_certified_across_report_rates() {
        // Large rates push the designated column toward its ceiling,
        // where the kernel completion can fail its certification and the
        // uniform split takes over; the output must be private either way.
        let ls = LocationSet::build_grid(4, 4, 1.0).unwrap();
        let prior = PriorDistribution::uniform(16);
        for &eps in &[2.0f64.ln(), 8.0f64.ln()] {
            let cfg = SynthesisConfig::new(
                eps,
                TargetSet::from_indices(16, &[2, 9]).unwrap(),
                600,
                30,
            );
            for beta in [0.05, 0.3, 0.6, 0.9] {
                let r = synthesize_with_beta(&ls, &prior, &cfg, beta).unwrap();
                let rep = verify_geo_dp(&ls, &r.policy, eps, 1e-8).unwrap();
                assert!(
                    rep.certified,
                    "eps {eps} beta {beta}: violation {}",
                    rep.max_violation
                );
                assert!(r.objective >= 0.0 && r.objective <= 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn beta_closed_forms() {
        // alpha = N: beta^N >= rho.
        let b = beta_from_binomial(2, 2, 0.25).unwrap();
        assert_close(b, 0.5, 1e-9);
        // alpha = 1: beta = 1 - (1-rho)^(1/N).
        let b = beta_from_binomial(100, 1, 0.95).unwrap();
        assert_close(b, 1.0 - 0.05f64.powf(0.01), 1e-9);
        assert!(beta_from_binomial(10, 11, 0.9).is_err());
        assert!(beta_from_binomial(10, 0, 0.9).is_err());
        assert!(beta_from_binomial(10, 5, 1.0).is_err());
    }

    fn grid3_setup() -> (LocationSet, PriorDistribution) {
        let ls = LocationSet::build_grid(1, 3, 1.0).unwrap();
        let prior = PriorDistribution::from_probs(vec![0.5, 0.3, 0.2]).unwrap();
        (ls, prior)
    }

    #[test]
    fn full_lp_shape_counts() {
        let (ls, prior) = grid3_setup();
        let two = LocationSet::build_grid(1, 2, 1.0).unwrap();
        let p2 = PriorDistribution::uniform(2);
        let cfg = SynthesisConfig::new(
            LN4,
            TargetSet::from_indices(2, &[0]).unwrap(),
            100,
            5,
        );
        let lp = build_coverage_lp(&two, &p2, &cfg, 0.1).unwrap();
        assert_eq!(lp.n_vars, 4);
        assert_eq!(lp.a_ub.len(), 8); // all ordered pairs x columns
        assert_eq!(lp.a_eq.len(), 3); // 2 row sums + report rate
        let nontrivial =
            lp.a_ub.iter().filter(|row| row.iter().any(|&v| v != 0.0)).count();
        assert_eq!(nontrivial, 4); // n^2 (n-1)

        let cfg3 = SynthesisConfig::new(
            LN4,
            TargetSet::from_indices(3, &[1]).unwrap(),
            100,
            5,
        );
        let lp3 = build_coverage_lp(&ls, &prior, &cfg3, 0.1).unwrap();
        assert_eq!(lp3.n_vars, 9);
        assert_eq!(lp3.a_ub.len(), 27);
        let nontrivial3 =
            lp3.a_ub.iter().filter(|row| row.iter().any(|&v| v != 0.0)).count();
        assert_eq!(nontrivial3, 9 * 2);
        // Objective touches only the designated column.
        for (i, &c) in lp3.objective.iter().enumerate() {
            if c != 0.0 {
                assert_eq!(i % 3, cfg3.report_loc.0);
            }
        }
    }

    #[test]
    fn reduced_matches_full_lp() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for trial in 0..10 {
            let n = rng.random_range(2..9usize);
            let coords: Vec<(f64, f64)> =
                (0..n).map(|_| (3.0 * rng.random::<f64>(), 3.0 * rng.random::<f64>())).collect();
            let Ok(ls) = LocationSet::from_coords(coords) else { continue };
            let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.1).collect();
            let prior = PriorDistribution::from_weights(&w).unwrap();
            let n_targets = rng.random_range(1..=n.min(3));
            let mut ids: Vec<usize> = (0..n).collect();
            for i in (1..ids.len()).rev() {
                ids.swap(i, rng.random_range(0..=i));
            }
            let targets = TargetSet::from_indices(n, &ids[..n_targets]).unwrap();
            let mut cfg = SynthesisConfig::new(LN4, targets, 200, 10);
            cfg.report_loc = LocationId(rng.random_range(0..n));
            let beta = 0.05 + 0.1 * rng.random::<f64>();
            let fast = synthesize_with_beta(&ls, &prior, &cfg, beta).unwrap();
            let full = synthesize_via_full_lp(&ls, &prior, &cfg, beta).unwrap();
            assert_close(fast.objective, full.objective, 1e-8);
            assert!(fast.objective >= 0.0 && fast.objective <= 1.0 + 1e-9, "trial {trial}");
        }
    }

    #[test]
    fn full_universe_targets_give_one() {
        let (ls, prior) = grid3_setup();
        let cfg = SynthesisConfig::new(
            LN4,
            TargetSet::from_indices(3, &[0, 1, 2]).unwrap(),
            100,
            5,
        );
        for beta in [0.05, 0.3, 0.8] {
            let r = synthesize_with_beta(&ls, &prior, &cfg, beta).unwrap();
            assert_close(r.objective, 1.0, 1e-9);
        }
    }

    #[test]
    fn single_target_matches_analytic_bound() {
        let (ls, prior) = grid3_setup();
        let eps = LN4;
        let target = LocationId(1);
        let cfg = SynthesisConfig::new(
            eps,
            TargetSet::from_indices(3, &[1]).unwrap(),
            100,
            5,
        );
        let tau = crate::privacy::max_column_scale(&ls, target, eps);
        let denom: f64 =
            (0..3).map(|l| prior.get(LocationId(l)) * (-eps * ls.d(l, 1)).exp()).sum();
        let beta = 0.9 * tau * denom;
        let r = synthesize_with_beta(&ls, &prior, &cfg, beta).unwrap();
        let bound = single_target_upper_bound(&ls, &prior, target, eps).value;
        assert_close(r.objective, bound, 1e-8);
        // Report-rate equality holds at the solution.
        let mass: f64 =
            (0..3).map(|l| prior.get(LocationId(l)) * r.policy.prob(LocationId(l), r.report_loc)).sum();
        assert_close(mass, beta, 1e-9);
    }

    #[test]
    fn synthesized_policy_certified() {
        let (ls, prior) = grid3_setup();
        let cfg = SynthesisConfig::new(
            LN4,
            TargetSet::from_indices(3, &[0, 2]).unwrap(),
            100,
            5,
        );
        let r = synthesize(&ls, &prior, &cfg).unwrap();
        let rep = verify_geo_dp(&ls, &r.policy, LN4, 1e-8).unwrap();
        assert!(rep.certified, "violation {}", rep.max_violation);
        assert!(r.objective >= 0.0 && r.objective <= 1.0 + 1e-9);
    }

    #[test]
    fn report_location_choice_is_irrelevant() {
        let (ls, prior) = grid3_setup();
        let beta = 0.08;
        let mut objectives = Vec::new();
        for j in 0..3 {
            let mut cfg = SynthesisConfig::new(
                LN4,
                TargetSet::from_indices(3, &[2]).unwrap(),
                100,
                5,
            );
            cfg.report_loc = LocationId(j);
            objectives.push(synthesize_via_full_lp(&ls, &prior, &cfg, beta).unwrap().objective);
        }
        for w in objectives.windows(2) {
            assert_close(w[0], w[1], 1e-8);
        }
    }

    #[test]
    fn sweep_objectives_nonincreasing() {
        let (ls, prior) = grid3_setup();
        let cfg = SynthesisConfig::new(
            LN4,
            TargetSet::from_indices(3, &[0]).unwrap(),
            100,
            5,
        );
        let betas = [0.05, 0.05, 0.1, 0.2, 0.4];
        let sweep = beta_sweep(&ls, &prior, &cfg, &betas).unwrap();
        let values: Vec<f64> = sweep.iter().map(|(_, r)| *r.as_ref().unwrap()).collect();
        assert_close(values[0], values[1], 1e-12); // equal betas, equal objectives
        for w in values.windows(2) {
            assert!(w[1] <= w[0] + 1e-8, "{} then {}", w[0], w[1]);
        }
        assert!(beta_sweep(&ls, &prior, &cfg, &[0.2, 0.1]).is_err());
    }

    #[test]
    fn dominates_laplace_at_matched_rate() {
        let (ls, prior) = grid3_setup();
        let eps = LN4;
        let lap = laplace_policy(&ls, eps).unwrap();
        let cfg = SynthesisConfig::new(
            eps,
            TargetSet::from_indices(3, &[0, 2]).unwrap(),
            100,
            5,
        );
        let j = cfg.report_loc;
        let beta_match: f64 =
            (0..3).map(|l| prior.get(LocationId(l)) * lap.prob(LocationId(l), j)).sum();
        let r = synthesize_with_beta(&ls, &prior, &cfg, beta_match).unwrap();
        let lap_mass: f64 =
            cfg.targets.ids().iter().map(|&t| prior.get(t) * lap.prob(t, j)).sum();
        assert!(r.objective * beta_match >= lap_mass - 1e-9);
        // Same statement via the posterior route.
        let lap_cov = coverage_score(&prior, &lap, j, &cfg.targets).unwrap();
        assert!(r.objective >= lap_cov - 1e-8);
    }

    #[test]
    fn single_location_universe() {
        let one = LocationSet::build_grid(1, 1, 1.0).unwrap();
        let prior = PriorDistribution::uniform(1);
        let cfg = SynthesisConfig::new(
            LN4,
            TargetSet::from_indices(1, &[0]).unwrap(),
            10,
            2,
        );
        let r = synthesize(&one, &prior, &cfg).unwrap();
        assert_eq!(r.beta, 1.0);
        assert_close(r.objective, 1.0, 1e-12);
    }

    #[test]
    fn infeasible_beta_surfaces() {
        let (ls, prior) = grid3_setup();
        let mut cfg = SynthesisConfig::new(
            LN4,
            TargetSet::from_indices(3, &[0]).unwrap(),
            100,
            5,
        );
        cfg.p_min = 1e-4;
        // Report rate below the positivity floor cannot be met.
        let err = synthesize_with_beta(&ls, &prior, &cfg, 5e-5);
        assert!(matches!(err, Err(Error::SynthesisInfeasible { .. })));
    }
}
