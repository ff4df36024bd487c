//! Canonical hand-sized instances with known-by-construction optima, used as
//! golden values across the test suites and by `ecomatch verify`.

use crate::model::{Instance, ProviderRecord, RewardKind, UserProfile, UtilityKind};

/// Offset used by the demo geometry; small enough that perturbed users stay
/// closest to their home provider, large enough to be visible in welfare.
pub const DEMO_EPSILON: f64 = 0.05;

/// The canonical 1-D demo instance: three providers on a line at 0, 2 and 4,
/// each needing 2 engagement units per epoch, and six unit-demand users at
/// 0, 0, 1-e, 2, 3-e, 4 (e = 0.05). Rewards are 2 minus the distance
/// (NegativeDistance kernel plus offset 2), one slot per epoch, slates of 1.
///
/// Derivation of the geometry from its intended behavior:
/// - Users 0 and 1 sit exactly on provider 0, user 3 on provider 1 and user
///   5 on provider 2, so four users have an undisputed best provider with
///   reward 2.
/// - User 2 at 1-e is just inside provider 0's half of the line: myopically
///   it goes to provider 0 (reward 1+e) but serving it from provider 1
///   (reward 1-e) costs only 2e. Symmetrically user 4 at 3-e prefers
///   provider 1 but can be served from provider 2.
/// - Myopic serving therefore loads providers with 3/2/1 users. Provider 2
///   misses its threshold of 2 and abandons; afterwards user 5 is served at
///   reward 0 by provider 1, for an equilibrium welfare of 8 + 2e = 8.1 per
///   epoch (first epoch: 10 + 2e = 10.1).
/// - Shifting users 2 and 4 "outward" (to providers 1 and 2) keeps every
///   provider at exactly 2 users, welfare 10 - 2e = 9.9, which is the
///   constrained optimum; the displaced users each lose 2e, so the maximum
///   regret of the optimal policy is 2e = 0.1.
pub fn demo_instance() -> Instance {
    let e = DEMO_EPSILON;
    let user_positions = [0.0, 0.0, 1.0 - e, 2.0, 3.0 - e, 4.0];
    let users = user_positions
        .iter()
        .enumerate()
        .map(|(id, &x)| UserProfile {
            id,
            mean: vec![x],
            variance: 0.0,
            activation: 1.0,
            demand: 1,
        })
        .collect();
    let providers = [0.0, 2.0, 4.0]
        .iter()
        .enumerate()
        .map(|(id, &x)| ProviderRecord { id, embedding: vec![x], threshold: 2.0 })
        .collect();
    Instance {
        users,
        providers,
        reward_kind: RewardKind::NegativeDistance,
        reward_offset: 2.0,
        query_weight: None,
        engagement_weight: None,
        horizon: 1,
        slate_size: 1,
        utility_kind: UtilityKind::LinearWeighted(vec![1.0]),
    }
}

/// The demo instance's welfare-optimal assignment: each provider keeps
/// exactly two users (users 2 and 4 are displaced outward).
pub fn demo_optimal_assignment() -> Vec<Vec<usize>> {
    vec![vec![0], vec![0], vec![1], vec![1], vec![2], vec![2]]
}

/// The "subsidize user 2 from the far side" alternate assignment: user 2 is
/// sent all the way to provider 2 while everyone else is served myopically.
/// Keeps all providers viable at welfare 9 + e but costs user 2 a regret of
/// 1 + e.
pub fn demo_alternate_assignment() -> Vec<Vec<usize>> {
    vec![vec![0], vec![0], vec![2], vec![1], vec![1], vec![2]]
}
