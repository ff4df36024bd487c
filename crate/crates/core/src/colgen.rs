//! Column generation for non-additive (sigmoidal) epoch utilities.
//!
//! The decision unit is a "star": a user paired with a multiset of k
//! providers answering that user's k queries in an epoch. The master LP
//! selects a distribution over stars per user subject to provider viability;
//! new stars are priced in from the master's duals until no column has
//! positive reduced cost.

use crate::lp::{solve_lp, LinearProgram, LpSolution, LpStatus, Relation};
use crate::matching::MatchingPolicy;
use crate::model::{reward, Instance, ModelError, UtilityKind};
use thiserror::Error;

/// Same tiny upward pressure on relaxed y as the additive solvers use, so the
/// master reports the most-supported y for rounding.
const Y_PRESSURE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ColGenError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("pricing budget exceeded: {0} candidate tuples > cap {1}; use the linearized oracle")]
    BudgetExceeded(u128, u128),
    #[error("star enumeration cap exceeded: {0} columns > cap {1}")]
    CapExceeded(u128, usize),
    #[error("invalid parameter: {0}")]
    BadParam(String),
    #[error("LP solver failed: {0}")]
    Solver(String),
}

/// A user and the multiset of providers serving that user's k epoch queries.
/// `providers` is stored sorted (slot order cannot change the utility of a
/// reward sum, so symmetric duplicates collapse into one column).
#[derive(Debug, Clone, PartialEq)]
pub struct Star {
    pub user: usize,
    pub providers: Vec<usize>,
    /// Query-mass-weighted epoch utility of this star.
    pub value: f64,
}

/// Master-LP duals, named by constraint family: beta per user (convexity),
/// gamma per (user, provider) (linking), alpha per provider (viability).
#[derive(Debug, Clone)]
pub struct DualPrices {
    pub beta: Vec<f64>,
    /// Indexed u * n_providers + c.
    pub gamma: Vec<f64>,
    pub alpha: Vec<f64>,
}

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

/// Epoch utility of a reward multiset under the instance's utility model
/// (per unit of query mass). For additive utilities the unordered rewards are
/// paired with the alpha weights best-first, which is the optimal ordering.
fn tuple_utility(instance: &Instance, slot_rewards: &[f64]) -> f64 {
    match &instance.utility_kind {
        UtilityKind::Sigmoid { beta, scale } => {
            let x = scale * (slot_rewards.iter().sum::<f64>() + beta);
            1.0 / (1.0 + (-x).exp())
        }
        UtilityKind::LinearWeighted(alpha) => {
            let mut rs = slot_rewards.to_vec();
            rs.sort_by(|a, b| b.total_cmp(a));
            let mut al = alpha.clone();
            al.sort_by(|a, b| b.total_cmp(a));
            rs.iter().zip(&al).map(|(r, a)| r * a).sum()
        }
    }
}

fn make_star(instance: &Instance, rewards: &[f64], u: usize, mut providers: Vec<usize>) -> Star {
    providers.sort_unstable();
    let nc = instance.n_providers();
    let slot_rewards: Vec<f64> = providers.iter().map(|&c| rewards[u * nc + c]).collect();
    let value = instance.query_weight(u) * tuple_utility(instance, &slot_rewards);
    Star { user: u, providers, value }
}

/// Number of size-k multisets over n providers: C(n + k - 1, k).
fn multiset_count(n: usize, k: usize) -> u128 {
    let mut num: u128 = 1;
    for i in 0..k {
        num = num.saturating_mul((n + i) as u128);
    }
    let mut den: u128 = 1;
    for i in 1..=k {
        den *= i as u128;
    }
    num / den
}

fn for_each_multiset(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for c in start..n {
            cur.push(c);
            rec(n, k, c, cur, f);
            cur.pop();
        }
    }
    rec(n, k, 0, &mut Vec::with_capacity(k), f);
}

/// Master row layout: convexity rows 0..nu (<= 1), linking rows
/// nu + u*nc + c (<= 0), viability rows nu + nu*nc + c (>= 0).
pub struct MasterProblem {
    pub lp: LinearProgram,
    n_users: usize,
    n_providers: usize,
    /// First y variable index (star columns come first).
    pub y_offset: usize,
}

impl MasterProblem {
    pub fn extract_duals(&self, sol: &LpSolution) -> DualPrices {
        let nu = self.n_users;
        let nc = self.n_providers;
        DualPrices {
            beta: sol.dual[0..nu].to_vec(),
            gamma: sol.dual[nu..nu + nu * nc].to_vec(),
            alpha: sol.dual[nu + nu * nc..nu + nu * nc + nc].to_vec(),
        }
    }

    /// Welfare part of an objective value (star columns only).
    pub fn welfare_at(&self, primal: &[f64], stars: &[Star]) -> f64 {
        stars.iter().zip(primal).map(|(s, p)| s.value * p).sum()
    }
}

/// Builds the master LP over the given stars. `y_fix` fixes each y_c to
/// 0 or 1 (the restricted re-solve); None leaves y relaxed in [0,1].
pub fn build_master_with(
    instance: &Instance,
    stars: &[Star],
    y_fix: Option<&[bool]>,
) -> MasterProblem {
    let nu = instance.n_users();
    let nc = instance.n_providers();
    let mut lp = LinearProgram::new(nu + nu * nc + nc);
    for (i, row) in lp.rows.iter_mut().enumerate() {
        *row = if i < nu {
            (Relation::Le, 1.0)
        } else if i < nu + nu * nc {
            (Relation::Le, 0.0)
        } else {
            (Relation::Ge, 0.0)
        };
    }
    let master = MasterProblem { lp, n_users: nu, n_providers: nc, y_offset: 0 };
    let mut lp = master.lp;
    for star in stars {
        let u = star.user;
        let q = instance.query_weight(u);
        let mut col: Vec<(usize, f64)> = vec![(u, 1.0)];
        let mut seen: Vec<(usize, usize)> = Vec::new(); // (provider, multiplicity)
        for &c in &star.providers {
            match seen.last_mut() {
                Some((lc, n)) if *lc == c => *n += 1,
                _ => seen.push((c, 1)),
            }
        }
        for &(c, n) in &seen {
            col.push((nu + u * nc + c, 1.0));
            // Mean engagement weight over the star's slots.
            let k = star.providers.len();
            let w_mean: f64 = (0..k)
                .map(|t| instance.engagement_weight(u, c, t.min(instance.horizon - 1)))
                .sum::<f64>()
                / k as f64;
            col.push((nu + nu * nc + c, n as f64 * q * w_mean));
        }
        // No explicit upper bound: the convexity row already caps star mass,
        // and a bound of 1 would let saturated columns keep a positive
        // reduced cost, confusing the pricing loop.
        lp.add_var(star.value, col, 0.0, f64::INFINITY);
    }
    let y_offset = lp.n_vars();
    for c in 0..nc {
        let mut col: Vec<(usize, f64)> = (0..nu).map(|u| (nu + u * nc + c, -1.0)).collect();
        col.push((nu + nu * nc + c, -instance.providers[c].threshold));
        let (lo, up, obj) = match y_fix {
            None => (0.0, 1.0, Y_PRESSURE),
            Some(fix) if fix[c] => (1.0, 1.0, 0.0),
            Some(_) => (0.0, 0.0, 0.0),
        };
        lp.add_var(obj, col, lo, up);
    }
    MasterProblem { lp, n_users: nu, n_providers: nc, y_offset }
}

/// Master LP with relaxed y, as used by the generation loop.
pub fn build_master(instance: &Instance, stars: &[Star]) -> LinearProgram {
    build_master_with(instance, stars, None).lp
}

fn star_reduced_cost(
    instance: &Instance,
    rewards: &[f64],
    duals: &DualPrices,
    u: usize,
    providers: &[usize],
) -> f64 {
    let nc = instance.n_providers();
    let q = instance.query_weight(u);
    let slot_rewards: Vec<f64> = providers.iter().map(|&c| rewards[u * nc + c]).collect();
    let value = q * tuple_utility(instance, &slot_rewards);
    let mut rc = value - duals.beta[u];
    let mut prev = usize::MAX;
    for &c in providers {
        if c != prev {
            rc -= duals.gamma[u * nc + c];
            prev = c;
        }
        rc -= q * duals.alpha[c];
    }
    rc
}

/// Default cap on exact pricing work (candidate tuples across all users).
pub const PRICING_BUDGET: u128 = 2_000_000;

/// Exact pricing oracle: enumerates every size-k provider multiset per user
/// and returns the star with the highest reduced cost. Decomposes per user,
/// so the global max is the max of per-user maxima.
pub fn price_star(
    instance: &Instance,
    duals: &DualPrices,
    k: usize,
) -> Result<(Star, f64), ColGenError> {
    let per_user = price_per_user(instance, duals, k)?;
    per_user
        .into_iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| ColGenError::BadParam("instance has no users".into()))
}

/// Best star and reduced cost for every user (exact enumeration).
pub fn price_per_user(
    instance: &Instance,
    duals: &DualPrices,
    k: usize,
) -> Result<Vec<(Star, f64)>, ColGenError> {
    if k < 1 {
        return Err(ColGenError::BadParam("k must be >= 1".into()));
    }
    let nc = instance.n_providers();
    let work = multiset_count(nc, k).saturating_mul(instance.n_users() as u128);
    if work > PRICING_BUDGET {
        return Err(ColGenError::BudgetExceeded(work, PRICING_BUDGET));
    }
    let rewards = reward_table(instance)?;
    let mut out = Vec::with_capacity(instance.n_users());
    for u in 0..instance.n_users() {
        let mut best: Option<(Vec<usize>, f64)> = None;
        for_each_multiset(nc, k, &mut |tuple| {
            let rc = star_reduced_cost(instance, &rewards, duals, u, tuple);
            if best.as_ref().is_none_or(|(_, b)| rc > *b + 1e-15) {
                best = Some((tuple.to_vec(), rc));
            }
        });
        let (tuple, rc) = best.expect("at least one provider");
        out.push((make_star(instance, &rewards, u, tuple), rc));
    }
    Ok(out)
}

/// Approximate pricing via piecewise first-order linearization of the sigmoid
/// over the attainable reward-sum range (uniform intervals, slopes at
/// midpoints). For each interval the linearized objective is optimized
/// exactly over support sets of at most k providers; all candidates are then
/// re-scored with the true reduced cost.
pub fn price_star_linearized(
    instance: &Instance,
    duals: &DualPrices,
    k: usize,
    n_intervals: usize,
) -> Result<(Star, f64), ColGenError> {
    let UtilityKind::Sigmoid { beta, scale } = instance.utility_kind else {
        return Err(ColGenError::BadParam(
            "linearized pricing requires a sigmoid utility".into(),
        ));
    };
    if k < 1 || n_intervals < 1 {
        return Err(ColGenError::BadParam("k and interval count must be >= 1".into()));
    }
    let nc = instance.n_providers();
    let rewards = reward_table(instance)?;
    let logistic = |z: f64| 1.0 / (1.0 + (-(scale * (z + beta))).exp());
    let mut best_overall: Option<(Star, f64)> = None;
    for u in 0..instance.n_users() {
        let q = instance.query_weight(u);
        let r_u = &rewards[u * nc..(u + 1) * nc];
        let (r_min, r_max) = r_u
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(r), hi.max(r)));
        let z_lo = k as f64 * r_min;
        let z_hi = k as f64 * r_max;
        let width = ((z_hi - z_lo) / n_intervals as f64).max(1e-12);
        let mut cands: Vec<Vec<usize>> = Vec::new();
        for i in 0..n_intervals {
            let m = z_lo + (i as f64 + 0.5) * width;
            let p = logistic(m);
            let slope = scale * p * (1.0 - p);
            // Per-provider linear weight and per-support penalty.
            let w: Vec<f64> = (0..nc)
                .map(|c| q * slope * r_u[c] - q * duals.alpha[c])
                .collect();
            // Optimal multiset for a fixed support D puts the mandatory one
            // copy on each member and the remaining k - |D| on the best one.
            let mut best_lin: Option<(Vec<usize>, f64)> = None;
            let supports = support_sets(nc, k);
            for d in &supports {
                let base: f64 = d.iter().map(|&c| w[c] - duals.gamma[u * nc + c]).sum();
                let top = d.iter().map(|&c| w[c]).fold(f64::NEG_INFINITY, f64::max);
                let score = base + (k - d.len()) as f64 * top;
                if best_lin.as_ref().is_none_or(|(_, b)| score > *b + 1e-15) {
                    let mut tuple = d.clone();
                    let top_c = *d
                        .iter()
                        .find(|&&c| w[c] >= top - 1e-15)
                        .expect("support nonempty");
                    tuple.extend(std::iter::repeat(top_c).take(k - d.len()));
                    best_lin = Some((tuple, score));
                }
            }
            cands.push(best_lin.expect("at least one support").0);
        }
        for tuple in cands {
            let rc = star_reduced_cost(instance, &rewards, duals, u, &tuple);
            if best_overall.as_ref().is_none_or(|(_, b)| rc > *b + 1e-15) {
                best_overall = Some((make_star(instance, &rewards, u, tuple), rc));
            }
        }
    }
    best_overall.ok_or_else(|| ColGenError::BadParam("instance has no users".into()))
}

/// All nonempty provider subsets of size <= k (candidate supports).
fn support_sets(nc: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(nc: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if !cur.is_empty() {
            out.push(cur.clone());
        }
        if cur.len() == k {
            return;
        }
        for c in start..nc {
            cur.push(c);
            rec(nc, k, c + 1, cur, out);
            cur.pop();
        }
    }
    rec(nc, k, 0, &mut cur, &mut out);
    out
}

#[derive(Debug, Clone)]
pub struct IterRecord {
    pub iteration: usize,
    pub master_objective: f64,
    pub max_reduced_cost: f64,
    pub columns_added: usize,
}

#[derive(Debug, Clone)]
pub struct ColGenOutcome {
    pub policy: MatchingPolicy,
    /// Per-iteration log, suitable for the CSV emission in the workbench.
    pub log: Vec<IterRecord>,
    /// Master objective (with relaxed y) at termination.
    pub master_objective: f64,
    /// Providers that looked viable in the relaxation but had to be dropped
    /// during rounding — the instability surfaced rather than hidden.
    pub dropped_providers: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
pub struct ColGenOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub round_threshold: f64,
}

impl Default for ColGenOptions {
    fn default() -> Self {
        ColGenOptions { tol: 1e-7, max_iter: 300, round_threshold: 0.5 }
    }
}

/// Full column-generation solve: alternate master solves and pricing until no
/// column improves by more than `tol` (or `max_iter`), then round y and
/// re-solve restricted to the committed providers.
pub fn column_generation(
    instance: &Instance,
    k: usize,
    tol: f64,
    max_iter: usize,
) -> Result<MatchingPolicy, ColGenError> {
    column_generation_detailed(instance, k, ColGenOptions { tol, max_iter, ..Default::default() })
        .map(|o| o.policy)
}

pub fn column_generation_detailed(
    instance: &Instance,
    k: usize,
    opts: ColGenOptions,
) -> Result<ColGenOutcome, ColGenError> {
    instance.validate()?;
    if k < 1 || opts.max_iter < 1 || !(opts.tol > 0.0) {
        return Err(ColGenError::BadParam("need k >= 1, max_iter >= 1, tol > 0".into()));
    }
    let nc = instance.n_providers();
    let rewards = reward_table(instance)?;
    // Initial columns: per user, the k-tuple repeating that user's best
    // provider. The master is feasible even with no columns (pi = 0, y = 0),
    // so these only warm-start the objective.
    let mut stars: Vec<Star> = (0..instance.n_users())
        .map(|u| {
            let best = (0..nc)
                .fold(0, |b, c| if rewards[u * nc + c] > rewards[u * nc + b] + 1e-15 { c } else { b });
            make_star(instance, &rewards, u, vec![best; k])
        })
        .collect();

    let mut log = Vec::new();
    let mut prev_objective = f64::NEG_INFINITY;
    let mut final_primal: Vec<f64>;
    let mut master;
    let mut iteration = 0;
    loop {
        iteration += 1;
        master = build_master_with(instance, &stars, None);
        let sol = solve_lp(&master.lp);
        if sol.status != LpStatus::Optimal {
            return Err(ColGenError::Solver(format!("master solve returned {:?}", sol.status)));
        }
        assert!(
            sol.objective_value >= prev_objective - 1e-7,
            "master objective decreased: {} -> {}",
            prev_objective,
            sol.objective_value
        );
        prev_objective = sol.objective_value;
        final_primal = sol.primal.clone();
        let duals = master.extract_duals(&sol);
        let priced = price_per_user(instance, &duals, k)?;
        let max_rc = priced.iter().map(|(_, rc)| *rc).fold(f64::NEG_INFINITY, f64::max);
        let mut added = 0;
        if max_rc > opts.tol && iteration < opts.max_iter {
            for (star, rc) in priced {
                if rc > opts.tol && !stars.iter().any(|s| s.user == star.user && s.providers == star.providers)
                {
                    stars.push(star);
                    added += 1;
                }
            }
        }
        log.push(IterRecord {
            iteration,
            master_objective: sol.objective_value,
            max_reduced_cost: max_rc,
            columns_added: added,
        });
        if added == 0 || iteration >= opts.max_iter {
            break;
        }
    }

    // Round y, prune until the restricted master is feasible, re-solve with
    // y fixed; keep pricing on the restricted problem so the final objective
    // is optimal for the committed provider set.
    let y_hat: Vec<f64> = (0..nc).map(|c| final_primal[master.y_offset + c]).collect();
    let mut members: Vec<usize> = (0..nc)
        .filter(|&c| y_hat[c] >= opts.round_threshold - 1e-12)
        .collect();
    let mut dropped = Vec::new();
    let outcome = loop {
        let y_fix: Vec<bool> = (0..nc).map(|c| members.contains(&c)).collect();
        match solve_restricted(instance, &mut stars, &y_fix, k, opts)? {
            Some((primal, objective)) => {
                let policy = policy_from_master(instance, &stars, &primal, &members, k, objective);
                break ColGenOutcome {
                    policy,
                    log,
                    master_objective: prev_objective,
                    dropped_providers: dropped,
                };
            }
            None => {
                if members.is_empty() {
                    let mut policy = MatchingPolicy::empty(instance);
                    policy.empty_diagnostic = true;
                    break ColGenOutcome {
                        policy,
                        log,
                        master_objective: prev_objective,
                        dropped_providers: dropped,
                    };
                }
                // Declining-viability instability: drop the weakest-scored
                // member and retry; the drop is reported to the caller.
                let weakest = members
                    .iter()
                    .copied()
                    .fold(None, |acc: Option<usize>, c| match acc {
                        Some(b) if y_hat[b] <= y_hat[c] + 1e-15 => Some(b),
                        _ => Some(c),
                    })
                    .expect("nonempty");
                members.retain(|&c| c != weakest);
                dropped.push(weakest);
            }
        }
    };
    Ok(outcome)
}

/// Solves the y-fixed restricted master, generating any further columns the
/// restriction needs. Returns None if infeasible.
fn solve_restricted(
    instance: &Instance,
    stars: &mut Vec<Star>,
    y_fix: &[bool],
    k: usize,
    opts: ColGenOptions,
) -> Result<Option<(Vec<f64>, f64)>, ColGenError> {
    for round in 0..opts.max_iter {
        let master = build_master_with(instance, stars, Some(y_fix));
        let sol = solve_lp(&master.lp);
        match sol.status {
            LpStatus::Optimal => {
                let duals = master.extract_duals(&sol);
                let priced = price_per_user(instance, &duals, k)?;
                let mut added = 0;
                for (star, rc) in priced {
                    if rc > opts.tol
                        && star.providers.iter().all(|&c| y_fix[c])
                        && !stars
                            .iter()
                            .any(|s| s.user == star.user && s.providers == star.providers)
                    {
                        stars.push(star);
                        added += 1;
                    }
                }
                if added == 0 || round + 1 == opts.max_iter {
                    let welfare = master.welfare_at(&sol.primal, stars);
                    return Ok(Some((sol.primal, welfare)));
                }
            }
            LpStatus::Infeasible => return Ok(None),
            other => return Err(ColGenError::Solver(format!("restricted master: {other:?}"))),
        }
    }
    unreachable!("loop returns")
}

/// Flattens a star distribution into per-slot provider marginals
/// (multiplicity / k per slot) and wraps it as a policy.
fn policy_from_master(
    instance: &Instance,
    stars: &[Star],
    primal: &[f64],
    members: &[usize],
    k: usize,
    welfare: f64,
) -> MatchingPolicy {
    let nc = instance.n_providers();
    let t_len = instance.horizon;
    let nu = instance.n_users();
    let mut pi = vec![0.0; nu * nc * t_len];
    let mut per_user = vec![0.0; nu];
    for (star, &p) in stars.iter().zip(primal) {
        if p <= 1e-12 {
            continue;
        }
        let u = star.user;
        let q = instance.query_weight(u);
        per_user[u] += p * star.value / if q > 0.0 { q } else { 1.0 };
        for &c in &star.providers {
            for t in 0..k.min(t_len) {
                pi[(u * nc + c) * t_len + t] += p / k as f64;
            }
        }
    }
    MatchingPolicy {
        pi,
        viable_set: members.to_vec(),
        welfare,
        per_user_utility: per_user,
        empty_diagnostic: false,
    }
}

/// Ground-truth oracle: builds the master with EVERY star and tries every
/// 0/1 provider subset, returning the best feasible policy.
pub fn enumerate_stars_exact(
    instance: &Instance,
    k: usize,
    cap: usize,
) -> Result<MatchingPolicy, ColGenError> {
    instance.validate()?;
    let nc = instance.n_providers();
    let nu = instance.n_users();
    // Work is columns times 2^|C| subset solves; refuse either blowup.
    let n_columns = multiset_count(nc, k).saturating_mul(nu as u128);
    if n_columns > cap as u128 || nc > 15 {
        return Err(ColGenError::CapExceeded(n_columns.max(1u128 << nc), cap));
    }
    let rewards = reward_table(instance)?;
    let mut stars = Vec::with_capacity(n_columns as usize);
    for u in 0..nu {
        for_each_multiset(nc, k, &mut |tuple| {
            stars.push(make_star(instance, &rewards, u, tuple.to_vec()));
        });
    }
    let mut best: Option<(f64, MatchingPolicy)> = None;
    for mask in 0u64..(1u64 << nc) {
        let y_fix: Vec<bool> = (0..nc).map(|c| mask >> c & 1 == 1).collect();
        let members: Vec<usize> = (0..nc).filter(|&c| y_fix[c]).collect();
        let usable: Vec<Star> = stars
            .iter()
            .filter(|s| s.providers.iter().all(|&c| y_fix[c]))
            .cloned()
            .collect();
        let master = build_master_with(instance, &usable, Some(&y_fix));
        let sol = solve_lp(&master.lp);
        match sol.status {
            LpStatus::Optimal => {
                let welfare = master.welfare_at(&sol.primal, &usable);
                if best.as_ref().is_none_or(|(b, _)| welfare > *b + 1e-12) {
                    let policy =
                        policy_from_master(instance, &usable, &sol.primal, &members, k, welfare);
                    best = Some((welfare, policy));
                }
            }
            LpStatus::Infeasible => {}
            other => return Err(ColGenError::Solver(format!("oracle subset: {other:?}"))),
        }
    }
    Ok(best.expect("empty subset always feasible").1)
}
