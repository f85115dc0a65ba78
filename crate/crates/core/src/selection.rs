//! Group-wise user selection with iterative prior estimation.
//!
//! Users are split into `k` groups. For each group the server derives a
//! policy from the current prior estimate, the group's clients upload one
//! obfuscated frequent location each (or nothing), and the estimate is
//! replaced by the mean posterior over the group's uploads. Selection
//! finally scans groups from last to first, keeping users whose report
//! equals their group's designated location, until the quota is filled.
//!
//! The only client data that ever crosses to the server is the single
//! obfuscated report per user; profiles stay behind the [`Client`] trait.

use rand::Rng;

use crate::error::{Error, Result};
use crate::location::{LocationId, LocationSet, TargetSet};
use crate::mobility::{pick_frequent_location, MobilityProfile};
use crate::privacy::{obfuscate, ObfuscationPolicy, PriorDistribution};
use crate::synthesis::{beta_from_binomial, synthesize_with_beta, SynthesisConfig};

pub use crate::privacy::posterior as bayes_update;

/// A mobile client holding its own mobility profile. The server can only
/// ask for one obfuscated upload.
pub trait Client {
    fn id(&self) -> &str;

    /// One obfuscated frequent location, or `None` when the client has no
    /// frequent location to report.
    fn upload(&self, policy: &ObfuscationPolicy, rng: &mut (impl Rng + ?Sized))
        -> Option<LocationId>;
}

/// Standard client: picks a frequent location above the threshold
/// uniformly at random and pushes it through the policy.
#[derive(Debug, Clone)]
pub struct ProfileClient {
    profile: MobilityProfile,
    delta: f64,
}

impl ProfileClient {
    pub fn new(profile: MobilityProfile, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::invalid(format!("threshold {delta} must lie in (0, 1)")));
        }
        Ok(ProfileClient { profile, delta })
    }

    /// True frequent location without obfuscation (no-privacy baseline).
    pub fn pick_plain(&self, rng: &mut (impl Rng + ?Sized)) -> Option<LocationId> {
        pick_frequent_location(&self.profile, self.delta, rng).expect("delta validated")
    }

    pub fn profile(&self) -> &MobilityProfile {
        &self.profile
    }
}

impl Client for ProfileClient {
    fn id(&self) -> &str {
        &self.profile.user
    }

    fn upload(
        &self,
        policy: &ObfuscationPolicy,
        rng: &mut (impl Rng + ?Sized),
    ) -> Option<LocationId> {
        let actual = self.pick_plain(rng)?;
        Some(obfuscate(policy, actual, rng))
    }
}

/// Pipeline parameters shared by the optimal and baseline policies.
#[derive(Debug, Clone)]
pub struct SelectionParams {
    pub epsilon: f64,
    /// Number of user groups.
    pub k: usize,
    /// Selection quota.
    pub alpha: usize,
    /// Required probability of filling the quota.
    pub rho: f64,
    pub p_min: f64,
}

/// One client's single upload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserUpload {
    pub user: String,
    pub reported: Option<LocationId>,
    pub group: usize,
}

/// Per-group state after the group's uploads were folded into the prior.
#[derive(Debug, Clone)]
pub struct GroupRecord {
    pub l_hat: LocationId,
    pub beta: f64,
    pub size: usize,
    pub nulls: usize,
    /// Uploads equal to this group's designated location.
    pub matches: usize,
    pub pi_after: PriorDistribution,
    pub policy: ObfuscationPolicy,
}

/// Outcome of a selection run.
#[derive(Debug, Clone)]
pub struct SelectionResult {
    /// Selected user ids, later groups first; at most `alpha`.
    pub selected: Vec<String>,
    pub final_pi: PriorDistribution,
    pub groups: Vec<GroupRecord>,
    pub uploads: Vec<UserUpload>,
    /// `(group, user)` in the order users were accepted.
    pub scan_trace: Vec<(usize, String)>,
}

impl SelectionResult {
    /// Fraction of uploads that were NULL.
    pub fn null_fraction(&self) -> f64 {
        if self.uploads.is_empty() {
            return 0.0;
        }
        let nulls = self.uploads.iter().filter(|u| u.reported.is_none()).count();
        nulls as f64 / self.uploads.len() as f64
    }
}

/// Randomly partitions `items` into `k` groups whose sizes differ by at
/// most one.
pub fn split_groups<T: Clone>(
    items: &[T],
    k: usize,
    rng: &mut (impl Rng + ?Sized),
) -> Result<Vec<Vec<T>>> {
    if k == 0 {
        return Err(Error::invalid("group count must be positive"));
    }
    if k > items.len() {
        return Err(Error::invalid(format!(
            "cannot split {} users into {k} groups",
            items.len()
        )));
    }
    let mut shuffled: Vec<T> = items.to_vec();
    for i in (1..shuffled.len()).rev() {
        shuffled.swap(i, rng.random_range(0..=i));
    }
    let base = shuffled.len() / k;
    let extra = shuffled.len() % k;
    let mut groups = Vec::with_capacity(k);
    let mut it = shuffled.into_iter();
    for g in 0..k {
        let size = base + usize::from(g < extra);
        groups.push(it.by_ref().take(size).collect());
    }
    Ok(groups)
}

/// Report rate for the remaining pool, discounted by the estimated
/// fraction of users who upload NULL.
pub fn adjust_beta_for_null(
    n_remaining: usize,
    null_fraction_estimate: f64,
    alpha: usize,
    rho: f64,
) -> Result<f64> {
    if !(0.0..1.0).contains(&null_fraction_estimate) {
        return Err(Error::invalid(format!(
            "null fraction estimate {null_fraction_estimate} must lie in [0, 1)"
        )));
    }
    let n_eff = (n_remaining as f64 * (1.0 - null_fraction_estimate)).round() as usize;
    if n_eff < alpha {
        return Err(Error::SynthesisInfeasible {
            beta: 0.0,
            msg: format!(
                "effective pool {n_eff} (of {n_remaining} remaining) cannot deliver {alpha} users"
            ),
        });
    }
    beta_from_binomial(n_eff, alpha, rho)
}

/// `KL(p || q)` in nats; terms with `p = 0` contribute nothing. Returns
/// infinity when `q` lacks mass somewhere `p` has it.
pub fn kl_divergence(p: &PriorDistribution, q: &PriorDistribution) -> f64 {
    let mut kl = 0.0;
    for (&pv, &qv) in p.as_slice().iter().zip(q.as_slice()) {
        if pv > 0.0 {
            if qv <= 0.0 {
                return f64::INFINITY;
            }
            kl += pv * (pv / qv).ln();
        }
    }
    kl
}

/// Group-wise estimation/selection driver, parameterized over how each
/// group's policy and designated location are produced. `provider` is
/// called once per group with the current prior estimate and the group's
/// report rate.
pub fn run_pipeline<C, R, P>(
    ls: &LocationSet,
    clients: &[C],
    params: &SelectionParams,
    mut provider: P,
    rng: &mut R,
) -> Result<SelectionResult>
where
    C: Client,
    R: Rng,
    P: FnMut(&PriorDistribution, f64) -> Result<(ObfuscationPolicy, LocationId)>,
{
    let n = ls.len();
    if clients.is_empty() {
        return Err(Error::invalid("no clients"));
    }
    if params.alpha == 0 || params.alpha > clients.len() {
        return Err(Error::invalid(format!(
            "alpha {} must satisfy 0 < alpha <= {}",
            params.alpha,
            clients.len()
        )));
    }
    let indices: Vec<usize> = (0..clients.len()).collect();
    let groups = split_groups(&indices, params.k, rng)?;

    let mut pi_hat = PriorDistribution::uniform(n);
    let mut records: Vec<GroupRecord> = Vec::with_capacity(params.k);
    let mut uploads: Vec<Option<LocationId>> = vec![None; clients.len()];
    let mut upload_log: Vec<UserUpload> = Vec::with_capacity(clients.len());
    let mut nulls_seen = 0usize;
    let mut total_seen = 0usize;

    let mut matched_so_far = 0usize;
    for (gi, group) in groups.iter().enumerate() {
        // Selection pools matching reporters from every group, so group i
        // only has to deliver the residual quota out of the not-yet-asked
        // users, discounted by the NULL rate seen so far. The report rate
        // therefore rises when earlier groups under-delivered and falls
        // once the quota is safe.
        let remaining: usize = groups[gi..].iter().map(|g| g.len()).sum();
        let null_frac = if total_seen > 0 {
            (nulls_seen as f64 / total_seen as f64).min(1.0 - 1e-12)
        } else {
            0.0
        };
        let n_eff = ((remaining as f64) * (1.0 - null_frac)).round().max(1.0) as usize;
        let alpha_eff = params.alpha.saturating_sub(matched_so_far).clamp(1, n_eff);
        let beta = beta_from_binomial(n_eff, alpha_eff, params.rho)?;
        let (policy, l_hat) = provider(&pi_hat, beta)?;

        let mut post_sum = vec![0.0f64; n];
        let mut post_count = 0usize;
        let mut nulls = 0usize;
        let mut matches = 0usize;
        for &u in group {
            let reported = clients[u].upload(&policy, rng);
            uploads[u] = reported;
            upload_log.push(UserUpload {
                user: clients[u].id().to_string(),
                reported,
                group: gi,
            });
            match reported {
                Some(l) => {
                    if l == l_hat {
                        matches += 1;
                    }
                    // Degenerate observations are skipped, not fatal.
                    if let Ok(post) = bayes_update(&pi_hat, &policy, l) {
                        for (acc, &v) in post_sum.iter_mut().zip(post.as_slice()) {
                            *acc += v;
                        }
                        post_count += 1;
                    }
                }
                None => nulls += 1,
            }
        }
        nulls_seen += nulls;
        total_seen += group.len();
        matched_so_far += matches;
        if post_count > 0 {
            pi_hat = PriorDistribution::from_weights(&post_sum)?;
        }
        records.push(GroupRecord {
            l_hat,
            beta,
            size: group.len(),
            nulls,
            matches,
            pi_after: pi_hat.clone(),
            policy,
        });
    }

    // Later groups saw a better prior estimate, so they are scanned first.
    let mut selected = Vec::new();
    let mut scan_trace = Vec::new();
    'scan: for gi in (0..groups.len()).rev() {
        for &u in &groups[gi] {
            if uploads[u] == Some(records[gi].l_hat) {
                selected.push(clients[u].id().to_string());
                scan_trace.push((gi, clients[u].id().to_string()));
                if selected.len() == params.alpha {
                    break 'scan;
                }
            }
        }
    }

    Ok(SelectionResult {
        selected,
        final_pi: pi_hat,
        groups: records,
        uploads: upload_log,
        scan_trace,
    })
}

/// Full selection pipeline with the optimal synthesized policy per group.
pub fn run_selection<C: Client, R: Rng>(
    ls: &LocationSet,
    targets: &TargetSet,
    clients: &[C],
    params: &SelectionParams,
    rng: &mut R,
) -> Result<SelectionResult> {
    let n_users = clients.len();
    let provider = |pi: &PriorDistribution, beta: f64| {
        let mut cfg =
            SynthesisConfig::new(params.epsilon, targets.clone(), n_users, params.alpha);
        cfg.rho = params.rho;
        cfg.p_min = params.p_min;
        let r = synthesize_with_beta(ls, pi, &cfg, beta)?;
        Ok((r.policy, r.report_loc))
    };
    run_pipeline(ls, clients, params, provider, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::location::LocationSet;
    use crate::privacy::PMIN_DEFAULT;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::cell::Cell;

    const LN4: f64 = 1.3862943611198906;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn split_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ids: Vec<usize> = (0..12).collect();
        let groups = split_groups(&ids, 6, &mut rng).unwrap();
        assert!(groups.iter().all(|g| g.len() == 2));
        let one = split_groups(&ids, 1, &mut rng).unwrap();
        assert_eq!(one[0].len(), 12);
        let ids13: Vec<usize> = (0..13).collect();
        let groups13 = split_groups(&ids13, 6, &mut rng).unwrap();
        let mut sizes: Vec<usize> = groups13.iter().map(|g| g.len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![2, 2, 2, 2, 2, 3]);
        // Partition: every element exactly once.
        let mut all: Vec<usize> = groups13.into_iter().flatten().collect();
        all.sort_unstable();
        assert_eq!(all, ids13);
        assert!(split_groups(&ids, 13, &mut rng).is_err());
        assert!(split_groups(&ids, 0, &mut rng).is_err());
    }

    #[test]
    fn adjust_beta_definitions() {
        let plain = beta_from_binomial(200, 5, 0.95).unwrap();
        assert_close(adjust_beta_for_null(200, 0.0, 5, 0.95).unwrap(), plain, 0.0);
        let halved = beta_from_binomial(100, 5, 0.95).unwrap();
        assert_close(adjust_beta_for_null(200, 0.5, 5, 0.95).unwrap(), halved, 0.0);
        assert!(matches!(
            adjust_beta_for_null(8, 0.5, 5, 0.95),
            Err(Error::SynthesisInfeasible { .. })
        ));
    }

    #[test]
    fn kl_reference_values() {
        let p = PriorDistribution::from_probs(vec![1.0, 0.0]).unwrap();
        let q = PriorDistribution::uniform(2);
        assert_close(kl_divergence(&p, &q), std::f64::consts::LN_2, 1e-12);
        assert_eq!(kl_divergence(&p, &p), 0.0);
        // Absolute continuity violation.
        let q0 = PriorDistribution::from_probs(vec![0.0, 1.0]).unwrap();
        assert_eq!(kl_divergence(&p, &q0), f64::INFINITY);
        // Gibbs: nonnegative on random pairs.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let n = rng.random_range(2..6);
            let a: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.01).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.01).collect();
            let p = PriorDistribution::from_weights(&a).unwrap();
            let q = PriorDistribution::from_weights(&b).unwrap();
            assert!(kl_divergence(&p, &q) >= -1e-12);
        }
    }

    #[test]
    fn bayes_update_uniform_policy_is_noop() {
        let prior = PriorDistribution::from_probs(vec![0.2, 0.3, 0.5]).unwrap();
        let p = ObfuscationPolicy::from_rows(vec![vec![1.0 / 3.0; 3]; 3], 1.0).unwrap();
        let post = bayes_update(&prior, &p, LocationId(2)).unwrap();
        for l in 0..3 {
            assert_close(post.get(LocationId(l)), prior.get(LocationId(l)), 1e-12);
        }
    }

    fn home_profile(user: &str, n: usize, home: usize) -> MobilityProfile {
        let mut probs = vec![0.01; n];
        probs[home] = 0.95;
        MobilityProfile { user: user.to_string(), probs }
    }

    fn world_clients(n: usize, homes: &[usize], delta: f64) -> Vec<ProfileClient> {
        homes
            .iter()
            .enumerate()
            .map(|(i, &h)| {
                ProfileClient::new(home_profile(&format!("u{i:04}"), n, h), delta).unwrap()
            })
            .collect()
    }

    fn line_world() -> (LocationSet, Vec<usize>) {
        // 4 locations, home distribution heavily favoring location 1.
        let ls = LocationSet::build_grid(2, 2, 1.0).unwrap();
        let mut homes = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..120 {
            let u: f64 = rng.random();
            homes.push(if u < 0.55 {
                1
            } else if u < 0.75 {
                0
            } else if u < 0.9 {
                2
            } else {
                3
            });
        }
        (ls, homes)
    }

    #[test]
    fn estimation_moves_toward_truth() {
        let (ls, homes) = line_world();
        let clients = world_clients(4, &homes, 0.7);
        let targets = TargetSet::from_indices(4, &[1]).unwrap();
        let params = SelectionParams { epsilon: LN4, k: 6, alpha: 6, rho: 0.95, p_min: PMIN_DEFAULT };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let result = run_selection(&ls, &targets, &clients, &params, &mut rng).unwrap();

        let mut counts = vec![0.0f64; 4];
        for &h in &homes {
            counts[h] += 1.0;
        }
        let pi_true = PriorDistribution::from_weights(&counts).unwrap();
        let uniform = PriorDistribution::uniform(4);
        let kl_est = kl_divergence(&result.final_pi, &pi_true);
        let kl_uni = kl_divergence(&uniform, &pi_true);
        assert!(
            kl_est < kl_uni,
            "estimate should beat uniform: {kl_est} vs {kl_uni}"
        );
        // The estimate stays a valid distribution after every group.
        for g in &result.groups {
            let sum: f64 = g.pi_after.as_slice().iter().sum();
            assert_close(sum, 1.0, 1e-9);
            assert!(g.pi_after.as_slice().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn identical_uploads_mean_is_single_posterior() {
        // A group whose members all report the same location must leave
        // pi_hat equal to that single posterior.
        let ls = LocationSet::build_grid(1, 2, 1.0).unwrap();
        struct Fixed(String);
        impl Client for Fixed {
            fn id(&self) -> &str {
                &self.0
            }
            fn upload(
                &self,
                _policy: &ObfuscationPolicy,
                _rng: &mut (impl Rng + ?Sized),
            ) -> Option<LocationId> {
                Some(LocationId(0))
            }
        }
        let clients: Vec<Fixed> = (0..4).map(|i| Fixed(format!("u{i}"))).collect();
        let params = SelectionParams { epsilon: LN4, k: 1, alpha: 1, rho: 0.9, p_min: PMIN_DEFAULT };
        let policy = ObfuscationPolicy::from_rows(
            vec![vec![0.8, 0.2], vec![0.3, 0.7]],
            LN4,
        )
        .unwrap();
        let policy2 = policy.clone();
        let provider =
            move |_pi: &PriorDistribution, _beta: f64| Ok((policy2.clone(), LocationId(0)));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let result = run_pipeline(&ls, &clients, &params, provider, &mut rng).unwrap();
        let single = bayes_update(&PriorDistribution::uniform(2), &policy, LocationId(0)).unwrap();
        for l in 0..2 {
            assert_close(
                result.final_pi.get(LocationId(l)),
                single.get(LocationId(l)),
                1e-9,
            );
        }
    }

    #[test]
    fn selection_prefers_later_groups_and_skips_nulls() {
        let (ls, homes) = line_world();
        let mut clients = world_clients(4, &homes, 0.7);
        // A few clients with nothing frequent: they upload NULL.
        for (i, client) in clients.iter_mut().enumerate().take(10) {
            *client = ProfileClient::new(
                MobilityProfile { user: format!("u{i:04}"), probs: vec![0.1; 4] },
                0.7,
            )
            .unwrap();
        }
        let targets = TargetSet::from_indices(4, &[1]).unwrap();
        let params = SelectionParams { epsilon: LN4, k: 4, alpha: 8, rho: 0.95, p_min: PMIN_DEFAULT };
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let result = run_selection(&ls, &targets, &clients, &params, &mut rng).unwrap();

        assert!(result.selected.len() <= 8);
        // Scan groups are nonincreasing.
        for w in result.scan_trace.windows(2) {
            assert!(w[0].0 >= w[1].0);
        }
        // Null uploaders are never selected, and selected users reported
        // their group's designated location.
        for upload in &result.uploads {
            if result.selected.contains(&upload.user) {
                assert_eq!(upload.reported, Some(result.groups[upload.group].l_hat));
            }
        }
        // If the quota was not filled, every matching user was taken.
        if result.selected.len() < 8 {
            let matching = result
                .uploads
                .iter()
                .filter(|u| u.reported == Some(result.groups[u.group].l_hat))
                .count();
            assert_eq!(matching, result.selected.len());
        }
        assert!(result.null_fraction() > 0.0);
    }

    #[test]
    fn null_fraction_estimate_tracks_truth() {
        // 30% of clients have nothing frequent; after the first group the
        // running NULL estimate should sit within 5% of that.
        let ls = LocationSet::build_grid(2, 2, 1.0).unwrap();
        let mut clients = Vec::new();
        for i in 0..1000 {
            let probs = if i % 10 < 3 { vec![0.1; 4] } else { home_profile("", 4, i % 4).probs };
            clients.push(
                ProfileClient::new(MobilityProfile { user: format!("u{i:04}"), probs }, 0.7)
                    .unwrap(),
            );
        }
        let targets = TargetSet::from_indices(4, &[0]).unwrap();
        let params = SelectionParams { epsilon: LN4, k: 2, alpha: 10, rho: 0.95, p_min: PMIN_DEFAULT };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let result = run_selection(&ls, &targets, &clients, &params, &mut rng).unwrap();
        let first = &result.groups[0];
        let estimate = first.nulls as f64 / first.size as f64;
        assert!((estimate - 0.3).abs() < 0.05, "estimate {estimate}");
        assert_close(result.null_fraction(), 0.3, 0.05);
    }

    #[test]
    fn every_client_queried_exactly_once() {
        struct Counting {
            inner: ProfileClient,
            calls: Cell<usize>,
        }
        impl Client for Counting {
            fn id(&self) -> &str {
                self.inner.id()
            }
            fn upload(
                &self,
                policy: &ObfuscationPolicy,
                rng: &mut (impl Rng + ?Sized),
            ) -> Option<LocationId> {
                self.calls.set(self.calls.get() + 1);
                self.inner.upload(policy, rng)
            }
        }
        let (ls, homes) = line_world();
        let clients: Vec<Counting> = world_clients(4, &homes, 0.7)
            .into_iter()
            .map(|inner| Counting { inner, calls: Cell::new(0) })
            .collect();
        let targets = TargetSet::from_indices(4, &[0]).unwrap();
        let params = SelectionParams { epsilon: LN4, k: 5, alpha: 4, rho: 0.95, p_min: PMIN_DEFAULT };
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        run_selection(&ls, &targets, &clients, &params, &mut rng).unwrap();
        assert!(clients.iter().all(|c| c.calls.get() == 1));
    }

    #[test]
    fn single_group_fills_from_it() {
        let ls = LocationSet::build_grid(1, 2, 1.0).unwrap();
        struct Always(String);
        impl Client for Always {
            fn id(&self) -> &str {
                &self.0
            }
            fn upload(
                &self,
                _p: &ObfuscationPolicy,
                _r: &mut (impl Rng + ?Sized),
            ) -> Option<LocationId> {
                Some(LocationId(0))
            }
        }
        let clients: Vec<Always> = (0..10).map(|i| Always(format!("u{i}"))).collect();
        let params = SelectionParams { epsilon: LN4, k: 1, alpha: 5, rho: 0.9, p_min: PMIN_DEFAULT };
        let policy =
            ObfuscationPolicy::from_rows(vec![vec![0.8, 0.2], vec![0.3, 0.7]], LN4).unwrap();
        let provider = move |_: &PriorDistribution, _: f64| Ok((policy.clone(), LocationId(0)));
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let result = run_pipeline(&ls, &clients, &params, provider, &mut rng).unwrap();
        assert_eq!(result.selected.len(), 5);
        assert!(result.scan_trace.iter().all(|(g, _)| *g == 0));
    }
}
