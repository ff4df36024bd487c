//! Epoch-based ecosystem simulator: per-epoch query sampling, slate serving
//! under a policy, engagement accumulation, deterministic viability checks,
//! and permanent provider abandonment.

use crate::colgen;
use crate::matching::{self, MatchingPolicy, MatchingError};
use crate::model::{reward, Instance, UserProfile};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Matching(#[from] MatchingError),
    #[error("column generation failed: {0}")]
    ColGen(#[from] colgen::ColGenError),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

/// Which serving policy drives the simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyKind {
    /// Best immediate reward, ties to the lowest provider id.
    Myopic,
    /// Reward-proportional sampling without replacement (shifted to
    /// nonnegative weights when the kernel produces negative rewards).
    Stochastic,
    /// LP relaxation + rounding (optionally regret-tempered by lambda),
    /// recomputed on viability mismatch.
    LpRs { round_threshold: f64, lambda: f64 },
    /// Greedy provider selection, recomputed on viability mismatch.
    Greedy,
    /// Column generation with k queries per user per epoch.
    ColGen { k: usize },
}

impl PolicyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Myopic => "myopic",
            PolicyKind::Stochastic => "stochastic",
            PolicyKind::LpRs { .. } => "lp-rs",
            PolicyKind::Greedy => "greedy",
            PolicyKind::ColGen { .. } => "colgen",
        }
    }

    fn needs_plan(&self) -> bool {
        matches!(self, PolicyKind::LpRs { .. } | PolicyKind::Greedy | PolicyKind::ColGen { .. })
    }
}

/// Mutable per-run state.
#[derive(Debug, Clone)]
pub struct EcosystemState {
    pub epoch: usize,
    /// viable[c]: provider c still on the platform. Starts all-true and is
    /// monotone nonincreasing (abandonment is permanent).
    pub viable: Vec<bool>,
    /// Engagement units accumulated by each provider in the current epoch.
    pub engagement: Vec<f64>,
    pub rng: ChaCha8Rng,
}

impl EcosystemState {
    pub fn new(instance: &Instance, seed: u64) -> Self {
        EcosystemState {
            epoch: 0,
            viable: vec![true; instance.n_providers()],
            engagement: vec![0.0; instance.n_providers()],
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn viable_list(&self) -> Vec<usize> {
        (0..self.viable.len()).filter(|&c| self.viable[c]).collect()
    }

    pub fn viable_count(&self) -> usize {
        self.viable.iter().filter(|&&v| v).count()
    }
}

#[derive(Debug, Clone)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub social_welfare: f64,
    pub avg_user_utility: f64,
    pub viable_count: usize,
    pub per_user_utility: Vec<f64>,
    pub max_regret: f64,
    /// Users who issued a query while no provider was viable.
    pub stranded_users: usize,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub policy: PolicyKind,
    pub seed: u64,
    pub epochs: Vec<EpochMetrics>,
    /// Total utility per user across all epochs (histogram data).
    pub user_totals: Vec<f64>,
    /// Epochs at which the optimized policy had to be recomputed because a
    /// committed provider had abandoned.
    pub recompute_epochs: Vec<usize>,
}

/// Draws a realized query: the profile mean plus isotropic Gaussian noise.
pub fn sample_query(user: &UserProfile, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if user.variance == 0.0 {
        return user.mean.clone();
    }
    let normal = Normal::new(0.0, user.variance.sqrt()).expect("validated variance");
    user.mean.iter().map(|&m| m + normal.sample(rng)).collect()
}

fn viable_rewards(
    instance: &Instance,
    viable: &[bool],
    query: &[f64],
) -> Vec<(usize, f64)> {
    (0..instance.n_providers())
        .filter(|&c| viable[c])
        .map(|c| (c, reward(instance, query, c).expect("validated instance").0))
        .collect()
}

/// Top-s viable providers by immediate reward (ties to lowest id).
pub fn serve_myopic(instance: &Instance, viable: &[bool], query: &[f64]) -> Vec<usize> {
    let mut ranked = viable_rewards(instance, viable, query);
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked
        .into_iter()
        .take(instance.slate_size)
        .map(|(c, _)| c)
        .collect()
}

/// s draws without replacement, proportional to rewards shifted to be
/// nonnegative; uniform fallback when every weight vanishes.
pub fn serve_stochastic(
    instance: &Instance,
    viable: &[bool],
    query: &[f64],
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let ranked = viable_rewards(instance, viable, query);
    let min_r = ranked.iter().map(|&(_, r)| r).fold(f64::INFINITY, f64::min);
    let shift = if min_r < 0.0 { -min_r + 1e-9 } else { 0.0 };
    let mut pool: Vec<(usize, f64)> = ranked.into_iter().map(|(c, r)| (c, r + shift)).collect();
    let mut slate = Vec::new();
    while slate.len() < instance.slate_size && !pool.is_empty() {
        let total: f64 = pool.iter().map(|&(_, w)| w).sum();
        let idx = if total <= 1e-12 {
            rng.gen_range(0..pool.len())
        } else {
            let mut ticket = rng.gen::<f64>() * total;
            let mut chosen = pool.len() - 1;
            for (i, &(_, w)) in pool.iter().enumerate() {
                ticket -= w;
                if ticket <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        };
        slate.push(pool.remove(idx).0);
    }
    slate
}

/// Samples each slot from the policy's marginals over still-viable providers
/// not already in the slate, renormalizing after each draw; slots whose mass
/// is exhausted fall back to the best-reward remaining provider.
pub fn serve_optimized(
    instance: &Instance,
    viable: &[bool],
    policy: &MatchingPolicy,
    user: usize,
    query: &[f64],
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    if policy.viable_set.is_empty() {
        return Vec::new();
    }
    let t_cap = instance.horizon - 1;
    let mut slate: Vec<usize> = Vec::new();
    for slot in 0..instance.slate_size {
        let t = slot.min(t_cap);
        let candidates: Vec<usize> = (0..instance.n_providers())
            .filter(|&c| viable[c] && !slate.contains(&c))
            .collect();
        if candidates.is_empty() {
            break;
        }
        let weights: Vec<f64> = candidates
            .iter()
            .map(|&c| policy.pi_at(instance, user, c, t))
            .collect();
        let total: f64 = weights.iter().sum();
        let pick = if total <= 1e-12 {
            // Mass exhausted (already-served providers held it): fall back to
            // the best remaining reward, lowest id on ties.
            *candidates
                .iter()
                .max_by(|&&a, &&b| {
                    let ra = reward(instance, query, a).expect("validated").0;
                    let rb = reward(instance, query, b).expect("validated").0;
                    ra.total_cmp(&rb).then(b.cmp(&a))
                })
                .expect("nonempty")
        } else {
            let mut ticket = rng.gen::<f64>() * total;
            let mut chosen = *candidates.last().expect("nonempty");
            for (&c, &w) in candidates.iter().zip(&weights) {
                ticket -= w;
                if ticket <= 0.0 {
                    chosen = c;
                    break;
                }
            }
            chosen
        };
        slate.push(pick);
    }
    slate
}

/// One epoch: every user issues `demand` queries (each active with
/// probability `activation`), slates are served and engagement accrues; at
/// the end every viable provider below threshold abandons permanently.
pub fn step_epoch(
    state: &mut EcosystemState,
    instance: &Instance,
    kind: PolicyKind,
    plan: Option<&MatchingPolicy>,
    mu: &[f64],
) -> EpochMetrics {
    let nu = instance.n_users();
    let mut per_user = vec![0.0; nu];
    let mut stranded = 0usize;
    let EcosystemState { viable, engagement, rng, .. } = state;
    for u in 0..nu {
        let user = &instance.users[u];
        let mut issued_stranded = false;
        for _ in 0..user.demand {
            let active = user.activation >= 1.0 || rng.gen_bool(user.activation);
            if !active {
                continue;
            }
            let query = sample_query(user, rng);
            if !viable.iter().any(|&v| v) {
                issued_stranded = true;
                continue;
            }
            let slate = match kind {
                PolicyKind::Myopic => serve_myopic(instance, viable, &query),
                PolicyKind::Stochastic => serve_stochastic(instance, viable, &query, rng),
                _ => serve_optimized(
                    instance,
                    viable,
                    plan.expect("optimized kinds carry a plan"),
                    u,
                    &query,
                    rng,
                ),
            };
            if slate.is_empty() && plan.map_or(false, |p| p.viable_set.is_empty()) {
                issued_stranded = true;
                continue;
            }
            let mut slot_rewards = Vec::with_capacity(slate.len());
            for (t, &c) in slate.iter().enumerate() {
                let r = reward(instance, &query, c).expect("validated").0;
                slot_rewards.push(r);
                engagement[c] += instance.engagement_weight(u, c, t.min(instance.horizon - 1));
            }
            per_user[u] += epoch_utility_truncated(instance, &slot_rewards);
        }
        if issued_stranded {
            stranded += 1;
        }
    }
    let social_welfare: f64 = per_user.iter().sum();
    let max_regret = mu
        .iter()
        .enumerate()
        .map(|(u, &m)| instance.query_weight(u) * m - per_user[u])
        .fold(f64::NEG_INFINITY, f64::max);
    let viable_count_before = state.viable_count();
    for c in 0..instance.n_providers() {
        if state.viable[c] && state.engagement[c] < instance.providers[c].threshold - 1e-9 {
            state.viable[c] = false;
        }
    }
    state.engagement.iter_mut().for_each(|e| *e = 0.0);
    state.epoch += 1;
    EpochMetrics {
        epoch: state.epoch - 1,
        social_welfare,
        avg_user_utility: social_welfare / nu.max(1) as f64,
        viable_count: viable_count_before,
        per_user_utility: per_user,
        max_regret,
        stranded_users: stranded,
    }
}

/// Utility of a possibly short slate (fewer slots than the horizon when few
/// providers survive): additive weights are truncated to the served slots.
fn epoch_utility_truncated(instance: &Instance, slot_rewards: &[f64]) -> f64 {
    match &instance.utility_kind {
        crate::model::UtilityKind::LinearWeighted(alpha) => slot_rewards
            .iter()
            .zip(alpha.iter())
            .map(|(r, a)| r * a)
            .sum(),
        crate::model::UtilityKind::Sigmoid { .. } => instance.epoch_utility(slot_rewards),
    }
}

/// Instance restricted to the given providers (ids remapped to 0..n).
fn restrict_instance(instance: &Instance, alive: &[usize]) -> Instance {
    let mut out = instance.clone();
    out.providers = alive
        .iter()
        .enumerate()
        .map(|(new_id, &c)| {
            let mut p = instance.providers[c].clone();
            p.id = new_id;
            p
        })
        .collect();
    if let Some(table) = &instance.engagement_weight {
        let nc = instance.n_providers();
        let t_len = instance.horizon;
        let mut filtered = Vec::with_capacity(instance.n_users() * alive.len() * t_len);
        for u in 0..instance.n_users() {
            for &c in alive {
                for t in 0..t_len {
                    filtered.push(table[(u * nc + c) * t_len + t]);
                }
            }
        }
        out.engagement_weight = Some(filtered);
    }
    out.slate_size = instance.slate_size.min(alive.len()).max(1);
    out
}

/// Computes the serving plan for an optimized policy kind on the currently
/// viable providers and maps it back to full provider indices.
fn compute_plan(
    instance: &Instance,
    state: &EcosystemState,
    kind: PolicyKind,
) -> Result<MatchingPolicy, SimError> {
    let alive = state.viable_list();
    if alive.is_empty() {
        let mut p = MatchingPolicy::empty(instance);
        p.empty_diagnostic = true;
        return Ok(p);
    }
    let sub = restrict_instance(instance, &alive);
    let sub_policy = match kind {
        PolicyKind::LpRs { round_threshold, lambda } => matching::lp_rs_with(
            &sub,
            matching::LpRsOptions { round_threshold, lambda, ..Default::default() },
        )?,
        PolicyKind::Greedy => matching::greedy_providers(&sub)?,
        PolicyKind::ColGen { k } => colgen::column_generation(&sub, k, 1e-6, 300)?,
        _ => unreachable!("only optimized kinds compute plans"),
    };
    // Map back to full indices.
    let nc = instance.n_providers();
    let sub_nc = sub.n_providers();
    let t_len = instance.horizon;
    let mut pi = vec![0.0; instance.n_users() * nc * t_len];
    for u in 0..instance.n_users() {
        for (ci, &c) in alive.iter().enumerate() {
            for t in 0..t_len {
                pi[(u * nc + c) * t_len + t] = sub_policy.pi[(u * sub_nc + ci) * t_len + t];
            }
        }
    }
    Ok(MatchingPolicy {
        pi,
        viable_set: sub_policy.viable_set.iter().map(|&ci| alive[ci]).collect(),
        welfare: sub_policy.welfare,
        per_user_utility: sub_policy.per_user_utility,
        empty_diagnostic: sub_policy.empty_diagnostic,
    })
}

/// Runs `epochs` epochs under one policy kind. Deterministic given the seed.
pub fn run_simulation(
    instance: &Instance,
    kind: PolicyKind,
    epochs: usize,
    seed: u64,
) -> Result<Trajectory, SimError> {
    instance.validate()?;
    let mu = matching::ideal_utilities(instance)?;
    let mut state = EcosystemState::new(instance, seed);
    let mut plan: Option<MatchingPolicy> = if kind.needs_plan() {
        Some(compute_plan(instance, &state, kind)?)
    } else {
        None
    };
    let mut metrics = Vec::with_capacity(epochs);
    let mut recompute_epochs = Vec::new();
    let mut user_totals = vec![0.0; instance.n_users()];
    for epoch in 0..epochs {
        if let Some(p) = &plan {
            // Mismatch event: a provider the plan commits to has abandoned.
            if p.viable_set.iter().any(|&c| !state.viable[c]) {
                plan = Some(compute_plan(instance, &state, kind)?);
                recompute_epochs.push(epoch);
            }
        }
        let m = step_epoch(&mut state, instance, kind, plan.as_ref(), &mu);
        for (total, &u) in user_totals.iter_mut().zip(&m.per_user_utility) {
            *total += u;
        }
        metrics.push(m);
    }
    Ok(Trajectory { policy: kind, seed, epochs: metrics, user_totals, recompute_epochs })
}
