//! Matching solvers for additive utility: the constrained-welfare subproblem
//! cSW(C), greedy provider selection, LP relaxation plus rounding (LP-RS),
//! an exact subset-enumeration oracle, and regret accounting.
//!
//! Solvers work on one canonical query per user (the profile mean) carrying
//! that user's whole expected query mass Q = activation * demand; the
//! simulator draws realized queries around the same mean.

use crate::lp::{solve_lp, LinearProgram, LpStatus, Relation};
use crate::model::{reward, Instance, ModelError};
use thiserror::Error;

/// Problems at or below this many pi variables (users x providers x slots)
/// use the full relaxation in [`lp_rs`]; larger ones use the engagement
/// heuristic for the provider scores (see [`LpRsOptions::small_limit`]).
pub const DEFAULT_SMALL_LIMIT: usize = 2_500;

/// Tiny upward pressure on relaxed y so that, among the many optimal y for a
/// fixed matching, the solver returns the most-supported one
/// (y_c = min(1, engagement_c / threshold_c)), which is the useful rounding
/// signal.
const Y_PRESSURE: f64 = 1e-6;

/// Feasibility slack mirrored from the LP layer.
const TOL: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum MatchingError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0} providers exceeds enumeration cap {1}")]
    TooManyProviders(usize, usize),
    #[error("round threshold must lie in (0, 1], got {0}")]
    BadThreshold(f64),
    #[error("lambda must be >= 0, got {0}")]
    BadLambda(f64),
    #[error("LP solver failed: {0}")]
    Solver(String),
}

/// A stochastic matching: pi[(u, c, t)] is the probability user u's query is
/// served provider c at slot t.
#[derive(Debug, Clone)]
pub struct MatchingPolicy {
    /// Flattened [user][provider][slot] table over ALL providers (zero
    /// outside `viable_set`).
    pub pi: Vec<f64>,
    /// Sorted providers the policy commits to keeping viable.
    pub viable_set: Vec<usize>,
    /// Objective value: sum over users of query-mass-weighted utility.
    pub welfare: f64,
    /// Per-user epoch utility U(u) (per unit query mass).
    pub per_user_utility: Vec<f64>,
    /// Set when rounding emptied the viable set and the policy serves nobody.
    pub empty_diagnostic: bool,
}

impl MatchingPolicy {
    pub fn empty(instance: &Instance) -> Self {
        MatchingPolicy {
            pi: vec![0.0; instance.n_users() * instance.n_providers() * instance.horizon],
            viable_set: Vec::new(),
            welfare: 0.0,
            per_user_utility: vec![0.0; instance.n_users()],
            empty_diagnostic: false,
        }
    }

    pub fn pi_at(&self, instance: &Instance, u: usize, c: usize, t: usize) -> f64 {
        self.pi[(u * instance.n_providers() + c) * instance.horizon + t]
    }

    /// Machine check of the policy invariants: rows sum to 1 (or 0 for an
    /// empty policy), no mass outside the viable set, and every committed
    /// provider meets its threshold.
    pub fn check_invariants(&self, instance: &Instance) -> Result<(), String> {
        let nc = instance.n_providers();
        let t_len = instance.horizon;
        for u in 0..instance.n_users() {
            for t in 0..t_len {
                let total: f64 = (0..nc).map(|c| self.pi_at(instance, u, c, t)).sum();
                let want = if self.viable_set.is_empty() { 0.0 } else { 1.0 };
                if (total - want).abs() > 1e-6 {
                    return Err(format!("slot mass for user {u} slot {t} is {total}"));
                }
            }
        }
        for c in 0..nc {
            if !self.viable_set.contains(&c) {
                for u in 0..instance.n_users() {
                    for t in 0..t_len {
                        if self.pi_at(instance, u, c, t) > 1e-9 {
                            return Err(format!("mass on non-viable provider {c}"));
                        }
                    }
                }
            }
        }
        for &c in &self.viable_set {
            let eng = self.engagement(instance, c);
            if eng < instance.providers[c].threshold - 1e-6 {
                return Err(format!(
                    "provider {c} engagement {eng} below threshold {}",
                    instance.providers[c].threshold
                ));
            }
        }
        Ok(())
    }

    /// Expected engagement units provider `c` receives under this policy.
    pub fn engagement(&self, instance: &Instance, c: usize) -> f64 {
        let mut eng = 0.0;
        for u in 0..instance.n_users() {
            let q = instance.query_weight(u);
            for t in 0..instance.horizon {
                eng += instance.engagement_weight(u, c, t) * q * self.pi_at(instance, u, c, t);
            }
        }
        eng
    }
}

#[derive(Debug, Clone)]
pub struct RegretReport {
    /// Per-user ideal utility (best provider, viability ignored).
    pub mu: Vec<f64>,
    /// Per-user regret mu_u - U(u).
    pub regret: Vec<f64>,
    pub max_regret: f64,
}

/// Mean-query reward table r[(u, c)].
fn reward_table(instance: &Instance) -> Result<Vec<f64>, ModelError> {
    let nc = instance.n_providers();
    let mut table = vec![0.0; instance.n_users() * nc];
    for (u, user) in instance.users.iter().enumerate() {
        for c in 0..nc {
            table[u * nc + c] = reward(instance, &user.mean, c)?.0;
        }
    }
    Ok(table)
}

/// Builds the constrained-welfare LP over pi_{u,c,t} with c restricted to the
/// sorted subset `members`: maximize sum Q_u * alpha_t * r(u,c) * pi subject
/// to one assignment row (= 1) per (user, slot) and one viability row
/// (>= threshold) per member, engagement weighted by w and Q.
///
/// Variable layout: (u * |C| + ci) * T + t. Row layout: assignment rows
/// u * T + t, then one viability row per member in order.
pub fn build_csw_lp(instance: &Instance, members: &[usize]) -> Result<LinearProgram, MatchingError> {
    let t_len = instance.horizon;
    let nu = instance.n_users();
    let rewards = reward_table(instance)?;
    let alpha = instance.alpha();
    let nc = instance.n_providers();

    // Provably infeasible before solving: even routing every query to its
    // best-engagement member cannot cover the thresholds.
    let mut supply = 0.0;
    for u in 0..nu {
        let q = instance.query_weight(u);
        for t in 0..t_len {
            let best_w = members
                .iter()
                .map(|&c| instance.engagement_weight(u, c, t))
                .fold(0.0f64, f64::max);
            supply += q * best_w;
        }
    }
    let demand: f64 = members.iter().map(|&c| instance.providers[c].threshold).sum();
    if supply < demand - 1e-9 {
        return Err(MatchingError::Solver(format!(
            "infeasible by supply: total engagement supply {supply:.6} < total threshold {demand:.6}"
        )));
    }

    let n_assign = nu * t_len;
    let mut lp = LinearProgram::new(n_assign + members.len());
    for (i, row) in lp.rows.iter_mut().enumerate() {
        if i < n_assign {
            *row = (Relation::Eq, 1.0);
        } else {
            *row = (Relation::Ge, instance.providers[members[i - n_assign]].threshold);
        }
    }
    for u in 0..nu {
        let q = instance.query_weight(u);
        for (ci, &c) in members.iter().enumerate() {
            let r = rewards[u * nc + c];
            for t in 0..t_len {
                let col = vec![
                    (u * t_len + t, 1.0),
                    (n_assign + ci, instance.engagement_weight(u, c, t) * q),
                ];
                lp.add_var(q * alpha[t] * r, col, 0.0, 1.0);
            }
        }
    }
    Ok(lp)
}

/// Builds a policy from a cSW primal solution over `members`.
fn policy_from_csw(
    instance: &Instance,
    members: &[usize],
    primal: &[f64],
    objective: f64,
) -> MatchingPolicy {
    let nc = instance.n_providers();
    let t_len = instance.horizon;
    let nu = instance.n_users();
    let alpha = instance.alpha();
    let rewards = reward_table(instance).expect("reward table already built once");
    let mut pi = vec![0.0; nu * nc * t_len];
    let mut per_user = vec![0.0; nu];
    for u in 0..nu {
        for (ci, &c) in members.iter().enumerate() {
            for t in 0..t_len {
                let v = primal[(u * members.len() + ci) * t_len + t].clamp(0.0, 1.0);
                pi[(u * nc + c) * t_len + t] = v;
                per_user[u] += alpha[t] * rewards[u * nc + c] * v;
            }
        }
    }
    MatchingPolicy {
        pi,
        viable_set: members.to_vec(),
        welfare: objective,
        per_user_utility: per_user,
        empty_diagnostic: false,
    }
}

/// Constrained welfare g(C): the best matching keeping every provider in `c_set`
/// viable. Returns `(NEG_INFINITY, None)` when that is infeasible so callers
/// (greedy, enumeration) can skip the subset; g(empty) = 0 by the
/// outside-option convention.
pub fn csw(
    instance: &Instance,
    c_set: &[usize],
) -> Result<(f64, Option<MatchingPolicy>), MatchingError> {
    let mut members: Vec<usize> = c_set.to_vec();
    members.sort_unstable();
    members.dedup();
    if members.is_empty() {
        return Ok((0.0, Some(MatchingPolicy::empty(instance))));
    }
    let lp = match build_csw_lp(instance, &members) {
        Ok(lp) => lp,
        Err(MatchingError::Solver(_)) => return Ok((f64::NEG_INFINITY, None)),
        Err(e) => return Err(e),
    };
    let sol = solve_lp(&lp);
    match sol.status {
        LpStatus::Optimal => {
            let policy = policy_from_csw(instance, &members, &sol.primal, sol.objective_value);
            Ok((sol.objective_value, Some(policy)))
        }
        LpStatus::Infeasible => Ok((f64::NEG_INFINITY, None)),
        other => Err(MatchingError::Solver(format!("cSW solve returned {other:?}"))),
    }
}

/// Greedy provider selection: start from the empty set and repeatedly add the
/// provider that maximizes g(C + c), skipping infeasible additions, until no
/// addition improves g. Ties go to the lowest provider id.
pub fn greedy_providers(instance: &Instance) -> Result<MatchingPolicy, MatchingError> {
    instance.validate()?;
    let nc = instance.n_providers();
    let mut current: Vec<usize> = Vec::new();
    // Serving is mandatory, so the empty set is only a fallback when no
    // single provider is supportable; any feasible first pick beats it.
    let mut current_g = f64::NEG_INFINITY;
    let mut best_policy = MatchingPolicy::empty(instance);
    loop {
        let mut best: Option<(usize, f64, MatchingPolicy)> = None;
        for c in 0..nc {
            if current.contains(&c) {
                continue;
            }
            let mut cand = current.clone();
            cand.push(c);
            let (g, policy) = csw(instance, &cand)?;
            if let Some(policy) = policy {
                let better = match &best {
                    None => true,
                    Some((_, bg, _)) => g > bg + 1e-12,
                };
                if better {
                    best = Some((c, g, policy));
                }
            }
        }
        match best {
            Some((c, g, policy)) if g > current_g + 1e-9 => {
                current.push(c);
                current.sort_unstable();
                current_g = g;
                best_policy = policy;
            }
            _ => break,
        }
    }
    Ok(best_policy)
}

/// Exhaustive oracle: solves cSW for every feasible provider subset and
/// returns the best. Ground truth for the greedy-ratio and rounding tests.
pub fn exact_enumeration(
    instance: &Instance,
    max_providers: usize,
) -> Result<MatchingPolicy, MatchingError> {
    instance.validate()?;
    let nc = instance.n_providers();
    if nc > max_providers {
        return Err(MatchingError::TooManyProviders(nc, max_providers));
    }
    let mut best_g = f64::NEG_INFINITY;
    let mut best = MatchingPolicy::empty(instance);
    for mask in 1u64..(1u64 << nc) {
        let members: Vec<usize> = (0..nc).filter(|c| mask >> c & 1 == 1).collect();
        let (g, policy) = csw(instance, &members)?;
        if let Some(policy) = policy {
            if g > best_g + 1e-12 {
                best_g = g;
                best = policy;
            }
        }
    }
    Ok(best)
}

/// Layout bookkeeping for the full relaxation (pi over all providers, y in
/// [0,1], optional max-regret variable).
#[derive(Debug, Clone)]
pub struct Eq4Relaxation {
    pub lp: LinearProgram,
    n_users: usize,
    n_providers: usize,
    horizon: usize,
    /// Index of the first y variable (pi variables come first).
    y_offset: usize,
    /// Index of the max-regret variable once added.
    pub mr_index: Option<usize>,
    pub lambda: f64,
}

impl Eq4Relaxation {
    /// Builds the LP relaxation of the provider-selection program: maximize
    /// welfare over pi and y in [0,1] subject to assignment rows (= 1),
    /// linking rows pi_{u,c,t} <= y_c, and viability rows
    /// sum w*Q*pi >= threshold_c * y_c.
    pub fn build(instance: &Instance) -> Result<Self, MatchingError> {
        instance.validate()?;
        let nu = instance.n_users();
        let nc = instance.n_providers();
        let t_len = instance.horizon;
        let rewards = reward_table(instance)?;
        let alpha = instance.alpha();
        let n_pi = nu * nc * t_len;
        let n_assign = nu * t_len;
        let n_link = n_pi;
        // Rows: assignment, then linking (same order as pi), then viability.
        let mut lp = LinearProgram::new(n_assign + n_link + nc);
        for (i, row) in lp.rows.iter_mut().enumerate() {
            *row = if i < n_assign {
                (Relation::Eq, 1.0)
            } else if i < n_assign + n_link {
                (Relation::Le, 0.0)
            } else {
                (Relation::Ge, 0.0)
            };
        }
        for u in 0..nu {
            let q = instance.query_weight(u);
            for c in 0..nc {
                let r = rewards[u * nc + c];
                for t in 0..t_len {
                    let pi_idx = (u * nc + c) * t_len + t;
                    let col = vec![
                        (u * t_len + t, 1.0),
                        (n_assign + pi_idx, 1.0),
                        (n_assign + n_link + c, instance.engagement_weight(u, c, t) * q),
                    ];
                    lp.add_var(q * alpha[t] * r, col, 0.0, 1.0);
                }
            }
        }
        let y_offset = lp.n_vars();
        for c in 0..nc {
            let mut col: Vec<(usize, f64)> = Vec::with_capacity(nu * t_len + 1);
            for u in 0..nu {
                for t in 0..t_len {
                    let pi_idx = (u * nc + c) * t_len + t;
                    col.push((n_assign + pi_idx, -1.0));
                }
            }
            col.push((n_assign + n_link + c, -instance.providers[c].threshold));
            lp.add_var(Y_PRESSURE, col, 0.0, 1.0);
        }
        // Outside option: a sink per (user, slot) that keeps the relaxation
        // feasible even when no provider can be supported. Serving is
        // mandatory in the model, so the sink is priced strictly below the
        // worst real assignment and only absorbs mass when nothing else can.
        let r_min = rewards.iter().cloned().fold(f64::INFINITY, f64::min);
        let r_max = rewards.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sink_reward = r_min - (r_max - r_min) - 1.0;
        for u in 0..nu {
            let q = instance.query_weight(u);
            for t in 0..t_len {
                lp.add_var(q * alpha[t] * sink_reward, vec![(u * t_len + t, 1.0)], 0.0, 1.0);
            }
        }
        Ok(Eq4Relaxation {
            lp,
            n_users: nu,
            n_providers: nc,
            horizon: t_len,
            y_offset,
            mr_index: None,
            lambda: 0.0,
        })
    }

    /// Adds the welfare-regret trade-off: a max-regret variable MR, one row
    /// U(u) + MR >= mu_u per user, and the term -lambda * MR in the
    /// objective. With lambda = 0 the optimum is unchanged.
    pub fn add_regret_tradeoff(
        &mut self,
        instance: &Instance,
        lambda: f64,
    ) -> Result<(), MatchingError> {
        if !(lambda >= 0.0) {
            return Err(MatchingError::BadLambda(lambda));
        }
        assert!(self.mr_index.is_none(), "regret trade-off already added");
        let mu = ideal_utilities(instance)?;
        let rewards = reward_table(instance)?;
        let alpha = instance.alpha();
        let nc = self.n_providers;
        let t_len = self.horizon;
        let base_row = self.lp.n_rows();
        for &m in &mu {
            self.lp.rows.push((Relation::Ge, m));
        }
        // U(u) = sum_{c,t} alpha_t r(u,c) pi_{u,c,t} (per unit query mass).
        for u in 0..self.n_users {
            for c in 0..nc {
                for t in 0..t_len {
                    let pi_idx = (u * nc + c) * t_len + t;
                    self.lp.columns[pi_idx].push((base_row + u, alpha[t] * rewards[u * nc + c]));
                }
            }
        }
        let mr_col: Vec<(usize, f64)> = (0..self.n_users).map(|u| (base_row + u, 1.0)).collect();
        self.mr_index = Some(self.lp.add_var(-lambda, mr_col, 0.0, f64::INFINITY));
        self.lambda = lambda;
        Ok(())
    }

    pub fn y_value(&self, primal: &[f64], c: usize) -> f64 {
        primal[self.y_offset + c]
    }

    /// Welfare part of the objective at a primal point (excludes the tiny
    /// y pressure and the -lambda*MR term).
    pub fn welfare_at(&self, primal: &[f64]) -> f64 {
        let n_pi = self.y_offset;
        (0..n_pi).map(|j| self.lp.objective[j] * primal[j]).sum()
    }

    /// Per-user utilities at a primal point.
    pub fn per_user_utility_at(&self, instance: &Instance, primal: &[f64]) -> Vec<f64> {
        let rewards = reward_table(instance).expect("validated");
        let alpha = instance.alpha();
        let nc = self.n_providers;
        let t_len = self.horizon;
        (0..self.n_users)
            .map(|u| {
                let mut total = 0.0;
                for c in 0..nc {
                    for t in 0..t_len {
                        total += alpha[t]
                            * rewards[u * nc + c]
                            * primal[(u * nc + c) * t_len + t];
                    }
                }
                total
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LpRsOptions {
    /// Rounding threshold on relaxed y.
    pub round_threshold: f64,
    /// Largest pi-variable count solved via the full relaxation.
    pub small_limit: usize,
    /// Weight of the max-regret trade-off term; 0 disables it. Only affects
    /// the full-relaxation path.
    pub lambda: f64,
}

impl Default for LpRsOptions {
    fn default() -> Self {
        LpRsOptions { round_threshold: 0.5, small_limit: DEFAULT_SMALL_LIMIT, lambda: 0.0 }
    }
}

/// Per-slot myopic assignment: every (user, slot) goes to the best-reward
/// provider among `allowed` (lowest id on ties).
pub fn myopic_assignment(
    instance: &Instance,
    allowed: &[usize],
) -> Result<Vec<Vec<usize>>, MatchingError> {
    let rewards = reward_table(instance)?;
    let nc = instance.n_providers();
    let mut out = Vec::with_capacity(instance.n_users());
    for u in 0..instance.n_users() {
        let best = allowed
            .iter()
            .copied()
            .fold(None, |acc: Option<usize>, c| match acc {
                Some(b) if rewards[u * nc + b] >= rewards[u * nc + c] - 1e-15 => Some(b),
                _ => Some(c),
            })
            .expect("allowed set nonempty");
        out.push(vec![best; instance.horizon]);
    }
    Ok(out)
}

/// Engagement units each provider receives under a deterministic assignment.
pub fn assignment_engagement(instance: &Instance, assign: &[Vec<usize>]) -> Vec<f64> {
    let mut eng = vec![0.0; instance.n_providers()];
    for (u, slots) in assign.iter().enumerate() {
        let q = instance.query_weight(u);
        for (t, &c) in slots.iter().enumerate() {
            eng[c] += instance.engagement_weight(u, c, t) * q;
        }
    }
    eng
}

/// LP relaxation + rounding. Solves the relaxation (full LP at small scale,
/// engagement-scored heuristic beyond `small_limit`), keeps providers with
/// y >= threshold, prunes to feasibility, and re-solves cSW on the survivors.
pub fn lp_rs(instance: &Instance, round_threshold: f64) -> Result<MatchingPolicy, MatchingError> {
    lp_rs_with(instance, LpRsOptions { round_threshold, ..Default::default() })
}

pub fn lp_rs_with(
    instance: &Instance,
    opts: LpRsOptions,
) -> Result<MatchingPolicy, MatchingError> {
    if !(opts.round_threshold > 0.0 && opts.round_threshold <= 1.0) {
        return Err(MatchingError::BadThreshold(opts.round_threshold));
    }
    instance.validate()?;
    let nc = instance.n_providers();
    let n_pi = instance.n_users() * nc * instance.horizon;
    let y_hat: Vec<f64> = if n_pi <= opts.small_limit {
        let mut relax = Eq4Relaxation::build(instance)?;
        if opts.lambda > 0.0 {
            relax.add_regret_tradeoff(instance, opts.lambda)?;
        }
        let sol = solve_lp(&relax.lp);
        if sol.status != LpStatus::Optimal {
            return Err(MatchingError::Solver(format!(
                "relaxation solve returned {:?}",
                sol.status
            )));
        }
        (0..nc).map(|c| relax.y_value(&sol.primal, c)).collect()
    } else {
        // Engagement heuristic: score each provider by how much of its
        // threshold the unconstrained welfare-optimal (myopic) assignment
        // already covers, then apply the relaxation's keep/drop economics to
        // the deficient ones — a provider below threshold is worth keeping
        // only if the welfare its fans would lose without it exceeds the
        // cheapest subsidy that covers the deficit (engagement imported from
        // non-fans, diverted into the lowest-weighted slots first). This is a
        // first-order estimate, at the myopic matching, of the y trade-off
        // the full relaxation prices exactly; it is what makes slot
        // discounting matter for provider survival at scale.
        let assign = myopic_assignment(instance, &(0..nc).collect::<Vec<_>>())?;
        let eng = assignment_engagement(instance, &assign);
        let rewards = reward_table(instance)?;
        let alpha = instance.alpha();
        let alpha_sum: f64 = alpha.iter().sum();
        let t_len = instance.horizon;
        let n_users = instance.n_users();
        let best: Vec<usize> = assign.iter().map(|slots| slots[0]).collect();
        let second_reward: Vec<f64> = (0..n_users)
            .map(|u| {
                (0..nc)
                    .filter(|&c| c != best[u])
                    .map(|c| rewards[u * nc + c])
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        (0..nc)
            .map(|c| {
                let nu_c = instance.providers[c].threshold;
                if nu_c <= 0.0 {
                    return 1.0;
                }
                let score = (eng[c] / nu_c).min(1.0);
                let deficit = nu_c - eng[c];
                if deficit <= 1e-9 || score < opts.round_threshold {
                    return score;
                }
                // Fans fall back to their second-best provider for the whole
                // slate if c abandons.
                let benefit: f64 = (0..n_users)
                    .filter(|&u| best[u] == c)
                    .map(|u| {
                        instance.query_weight(u)
                            * alpha_sum
                            * (rewards[u * nc + c] - second_reward[u]).max(0.0)
                    })
                    .sum();
                // Candidate subsidies: each non-fan slot diverted to c yields
                // w·q engagement units at a welfare cost of q·α_t·(reward gap).
                let mut imports: Vec<(f64, f64)> = Vec::new();
                for u in (0..n_users).filter(|&u| best[u] != c) {
                    let q = instance.query_weight(u);
                    let gap = rewards[u * nc + best[u]] - rewards[u * nc + c];
                    for t in 0..t_len {
                        let units = instance.engagement_weight(u, c, t) * q;
                        if units > 0.0 {
                            let w = instance.engagement_weight(u, c, t);
                            imports.push((alpha[t] * gap / w, units));
                        }
                    }
                }
                imports.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut need = deficit;
                let mut cost = 0.0;
                for (unit_cost, units) in imports {
                    if need <= 0.0 {
                        break;
                    }
                    let take = units.min(need);
                    cost += take * unit_cost;
                    need -= take;
                }
                if need > 1e-9 || cost > benefit + 1e-12 {
                    0.0
                } else {
                    score
                }
            })
            .collect()
    };
    round_and_resolve(instance, &y_hat, opts.round_threshold)
}

/// Shared rounding pipeline for LP-RS and column generation: threshold on the
/// scores, prune providers that cannot be made viable, re-solve cSW on the
/// survivors (dropping the lowest-scored provider if the restricted problem
/// is still infeasible).
pub fn round_and_resolve(
    instance: &Instance,
    y_hat: &[f64],
    threshold: f64,
) -> Result<MatchingPolicy, MatchingError> {
    let t_len = instance.horizon;
    let mut v: Vec<usize> = (0..instance.n_providers())
        .filter(|&c| y_hat[c] >= threshold - 1e-12)
        .collect();
    loop {
        // Fixpoint prune: drop any provider whose threshold exceeds even the
        // all-queries-routed-to-it engagement.
        loop {
            let before = v.len();
            v.retain(|&c| {
                let max_eng: f64 = (0..instance.n_users())
                    .map(|u| {
                        let q = instance.query_weight(u);
                        (0..t_len)
                            .map(|t| instance.engagement_weight(u, c, t) * q)
                            .sum::<f64>()
                    })
                    .sum();
                max_eng >= instance.providers[c].threshold - 1e-9
            });
            if v.len() == before {
                break;
            }
        }
        if v.is_empty() {
            let mut policy = MatchingPolicy::empty(instance);
            policy.empty_diagnostic = true;
            return Ok(policy);
        }
        let (g, policy) = csw(instance, &v)?;
        if let Some(policy) = policy {
            debug_assert!(g.is_finite());
            return Ok(policy);
        }
        // Restricted problem jointly infeasible: drop the weakest-scored
        // provider (lowest id on ties) and retry.
        let weakest = v
            .iter()
            .copied()
            .fold(None, |acc: Option<usize>, c| match acc {
                Some(b) if y_hat[b] <= y_hat[c] + 1e-15 => Some(b),
                _ => Some(c),
            })
            .expect("nonempty");
        v.retain(|&c| c != weakest);
    }
}

/// mu_u: each user's utility when every query goes to its best provider,
/// viability ignored.
pub fn ideal_utilities(instance: &Instance) -> Result<Vec<f64>, MatchingError> {
    let rewards = reward_table(instance)?;
    let alpha = instance.alpha();
    let nc = instance.n_providers();
    let alpha_sum: f64 = alpha.iter().sum();
    Ok((0..instance.n_users())
        .map(|u| {
            let best = (0..nc)
                .map(|c| rewards[u * nc + c])
                .fold(f64::NEG_INFINITY, f64::max);
            alpha_sum * best
        })
        .collect())
}

/// Per-user regret mu_u - U(u) and its maximum over users.
pub fn regret_report(
    instance: &Instance,
    policy: &MatchingPolicy,
) -> Result<RegretReport, MatchingError> {
    let mu = ideal_utilities(instance)?;
    let regret: Vec<f64> = mu
        .iter()
        .zip(&policy.per_user_utility)
        .map(|(m, u)| m - u)
        .collect();
    let max_regret = regret.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(RegretReport { mu, regret, max_regret })
}

/// Evaluates a hand-built deterministic assignment (assign[u][t] = provider).
/// A user whose assigned slate is worse than not participating keeps the
/// outside option: per-user utility is floored at 0 (engagement still
/// accrues to the assigned providers). The committed set is every provider
/// meeting its threshold under the assignment.
pub fn evaluate_assignment(
    instance: &Instance,
    assign: &[Vec<usize>],
) -> Result<MatchingPolicy, MatchingError> {
    instance.validate()?;
    let nc = instance.n_providers();
    let t_len = instance.horizon;
    let rewards = reward_table(instance)?;
    let alpha = instance.alpha();
    let mut pi = vec![0.0; instance.n_users() * nc * t_len];
    let mut per_user = vec![0.0; instance.n_users()];
    for (u, slots) in assign.iter().enumerate() {
        assert_eq!(slots.len(), t_len, "assignment must cover every slot");
        let mut util = 0.0;
        for (t, &c) in slots.iter().enumerate() {
            pi[(u * nc + c) * t_len + t] = 1.0;
            util += alpha[t] * rewards[u * nc + c];
        }
        per_user[u] = util.max(0.0);
    }
    let eng = assignment_engagement(instance, assign);
    let viable_set: Vec<usize> = (0..nc)
        .filter(|&c| eng[c] >= instance.providers[c].threshold - TOL)
        .collect();
    let welfare = per_user
        .iter()
        .enumerate()
        .map(|(u, util)| instance.query_weight(u) * util)
        .sum();
    Ok(MatchingPolicy {
        pi,
        viable_set,
        welfare,
        per_user_utility: per_user,
        empty_diagnostic: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{demo_alternate_assignment, demo_instance, demo_optimal_assignment};
    use crate::lp::verify_solution;

    #[test]
    fn demo_csw_full_set_is_9_9() {
        let inst = demo_instance();
        let (g, policy) = csw(&inst, &[0, 1, 2]).unwrap();
        assert!((g - 9.9).abs() < 1e-6, "g = {g}");
        let policy = policy.unwrap();
        policy.check_invariants(&inst).unwrap();
        // Unique integral optimum: two users per provider.
        for (u, c) in [(0, 0), (1, 0), (2, 1), (3, 1), (4, 2), (5, 2)] {
            assert!((policy.pi_at(&inst, u, c, 0) - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn demo_csw_subsets() {
        let inst = demo_instance();
        assert!((csw(&inst, &[0, 1]).unwrap().0 - 8.1).abs() < 1e-6);
        assert!((csw(&inst, &[0]).unwrap().0 - 2.1).abs() < 1e-6);
        assert!((csw(&inst, &[1]).unwrap().0 - 4.0).abs() < 1e-6);
        assert!((csw(&inst, &[1, 2]).unwrap().0 - 5.9).abs() < 1e-6);
        assert_eq!(csw(&inst, &[]).unwrap().0, 0.0);
    }

    #[test]
    fn demo_csw_duals_verify() {
        let inst = demo_instance();
        let lp = build_csw_lp(&inst, &[0, 1, 2]).unwrap();
        let sol = solve_lp(&lp);
        assert_eq!(sol.status, LpStatus::Optimal);
        let report = verify_solution(&lp, &sol);
        assert!(report.within(1e-6, sol.objective_value), "{report:?}");
    }

    #[test]
    fn infeasible_supply_reported_before_solving() {
        let mut inst = demo_instance();
        inst.providers[0].threshold = 100.0;
        assert!(build_csw_lp(&inst, &[0]).is_err());
        let (g, policy) = csw(&inst, &[0]).unwrap();
        assert_eq!(g, f64::NEG_INFINITY);
        assert!(policy.is_none());
    }

    #[test]
    fn greedy_demo_trace() {
        let inst = demo_instance();
        let policy = greedy_providers(&inst).unwrap();
        assert_eq!(policy.viable_set, vec![0, 1, 2]);
        assert!((policy.welfare - 9.9).abs() < 1e-6);
    }

    #[test]
    fn greedy_infeasible_single_provider() {
        let mut inst = demo_instance();
        inst.providers = vec![inst.providers[0].clone()];
        inst.providers[0].threshold = 100.0;
        let policy = greedy_providers(&inst).unwrap();
        assert!(policy.viable_set.is_empty());
        assert_eq!(policy.welfare, 0.0);
    }

    #[test]
    fn exact_enumeration_demo() {
        let inst = demo_instance();
        let policy = exact_enumeration(&inst, 15).unwrap();
        assert_eq!(policy.viable_set, vec![0, 1, 2]);
        assert!((policy.welfare - 9.9).abs() < 1e-6);
    }

    #[test]
    fn exact_enumeration_with_dead_provider() {
        let mut inst = demo_instance();
        inst.providers[2].threshold = 100.0;
        let policy = exact_enumeration(&inst, 15).unwrap();
        assert_eq!(policy.viable_set, vec![0, 1]);
        assert!((policy.welfare - 8.1).abs() < 1e-6);
    }

    #[test]
    fn exact_enumeration_guards() {
        let mut inst = demo_instance();
        assert!(matches!(
            exact_enumeration(&inst, 2),
            Err(MatchingError::TooManyProviders(3, 2))
        ));
        inst.providers.clear();
        let policy = exact_enumeration(&inst, 15).unwrap();
        assert!(policy.viable_set.is_empty());
        assert_eq!(policy.welfare, 0.0);
    }

    #[test]
    fn lp_rs_demo_matches_exact() {
        let inst = demo_instance();
        let policy = lp_rs(&inst, 0.5).unwrap();
        assert_eq!(policy.viable_set, vec![0, 1, 2]);
        assert!((policy.welfare - 9.9).abs() < 1e-6);
        policy.check_invariants(&inst).unwrap();
    }

    #[test]
    fn lp_rs_empty_after_rounding_sets_diagnostic() {
        let mut inst = demo_instance();
        for p in &mut inst.providers {
            p.threshold = 100.0;
        }
        let policy = lp_rs(&inst, 0.5).unwrap();
        assert!(policy.viable_set.is_empty());
        assert!(policy.empty_diagnostic);
        assert_eq!(policy.welfare, 0.0);
    }

    #[test]
    fn ideal_utilities_demo() {
        let inst = demo_instance();
        let mu = ideal_utilities(&inst).unwrap();
        let want = [2.0, 2.0, 1.05, 2.0, 1.05, 2.0];
        for (got, want) in mu.iter().zip(want) {
            assert!((got - want).abs() < 1e-9, "{mu:?}");
        }
    }

    #[test]
    fn regret_of_demo_optimum_is_0_1() {
        let inst = demo_instance();
        let policy = exact_enumeration(&inst, 15).unwrap();
        let report = regret_report(&inst, &policy).unwrap();
        assert!((report.max_regret - 0.1).abs() < 1e-6);
    }

    #[test]
    fn alternate_assignment_welfare_and_regret() {
        let inst = demo_instance();
        let policy = evaluate_assignment(&inst, &demo_alternate_assignment()).unwrap();
        assert!((policy.welfare - 9.05).abs() < 1e-9, "welfare {}", policy.welfare);
        assert_eq!(policy.viable_set, vec![0, 1, 2]);
        let report = regret_report(&inst, &policy).unwrap();
        assert!((report.max_regret - 1.05).abs() < 1e-9);
    }

    #[test]
    fn optimal_assignment_evaluates_like_csw() {
        let inst = demo_instance();
        let policy = evaluate_assignment(&inst, &demo_optimal_assignment()).unwrap();
        assert!((policy.welfare - 9.9).abs() < 1e-9);
        assert_eq!(policy.viable_set, vec![0, 1, 2]);
    }

    #[test]
    fn ideal_matching_has_zero_regret() {
        let inst = demo_instance();
        let assign = myopic_assignment(&inst, &[0, 1, 2]).unwrap();
        let policy = evaluate_assignment(&inst, &assign).unwrap();
        let report = regret_report(&inst, &policy).unwrap();
        assert!(report.max_regret.abs() < 1e-9);
    }

    #[test]
    fn regret_tradeoff_lambda_zero_keeps_welfare() {
        let inst = demo_instance();
        let mut relax = Eq4Relaxation::build(&inst).unwrap();
        relax.add_regret_tradeoff(&inst, 0.0).unwrap();
        let sol = solve_lp(&relax.lp);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((relax.welfare_at(&sol.primal) - 9.9).abs() < 1e-5);
    }

    #[test]
    fn regret_tradeoff_mr_tight_when_lambda_positive() {
        let inst = demo_instance();
        let mut relax = Eq4Relaxation::build(&inst).unwrap();
        relax.add_regret_tradeoff(&inst, 1.0).unwrap();
        let sol = solve_lp(&relax.lp);
        assert_eq!(sol.status, LpStatus::Optimal);
        let mr = sol.primal[relax.mr_index.unwrap()];
        let mu = ideal_utilities(&inst).unwrap();
        let utils = relax.per_user_utility_at(&inst, &sol.primal);
        let max_rgrt = mu
            .iter()
            .zip(&utils)
            .map(|(m, u)| m - u)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((mr - max_rgrt).abs() < 1e-6, "mr {mr} vs {max_rgrt}");
    }

    #[test]
    fn bad_lambda_rejected() {
        let inst = demo_instance();
        let mut relax = Eq4Relaxation::build(&inst).unwrap();
        assert!(relax.add_regret_tradeoff(&inst, -1.0).is_err());
    }
}
