//! Domain types shared by the solvers and the simulator: user profiles,
//! provider records, reward kernels and epoch utility functions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("length mismatch: rewards {rewards} vs weights {weights}")]
    LengthMismatch { rewards: usize, weights: usize },
    #[error("provider index {0} out of range")]
    BadProvider(usize),
    #[error("gamma must lie in (0, 1], got {0}")]
    BadGamma(f64),
    #[error("invalid instance: {0}")]
    Invalid(String),
}

/// A platform user: query distribution parameters plus activity statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UserProfile {
    pub id: usize,
    /// Center of the user's query distribution in topic space.
    pub mean: Vec<f64>,
    /// Isotropic variance of the query noise; 0 makes queries deterministic.
    pub variance: f64,
    /// Probability the user is active at a step.
    pub activation: f64,
    /// Queries issued per epoch.
    pub demand: u32,
}

impl UserProfile {
    /// Expected query mass of this user in an epoch.
    pub fn query_weight(&self) -> f64 {
        self.activation * self.demand as f64
    }
}

/// A content provider: topic-space embedding and viability threshold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProviderRecord {
    pub id: usize,
    pub embedding: Vec<f64>,
    /// Engagement units per epoch required to stay on the platform.
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RewardKind {
    DotProduct,
    NegativeDistance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum UtilityKind {
    /// Epoch utility is the alpha-weighted sum of slot rewards.
    LinearWeighted(Vec<f64>),
    /// Epoch utility is logistic(scale * (sum of rewards + beta)).
    Sigmoid { beta: f64, scale: f64 },
}

/// Immediate reward of serving a provider for a query, in utility units.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct RewardValue(pub f64);

/// The static ecosystem an experiment runs on. Immutable after construction;
/// safe to share across concurrent solver and simulator runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Instance {
    pub users: Vec<UserProfile>,
    pub providers: Vec<ProviderRecord>,
    pub reward_kind: RewardKind,
    /// Additive constant applied to every reward. Lets the 1-D
    /// "2 minus distance" kernel be expressed as NegativeDistance + 2.
    #[serde(default)]
    pub reward_offset: f64,
    /// Per-user expected query mass; defaults to activation * demand.
    #[serde(default)]
    pub query_weight: Option<Vec<f64>>,
    /// Engagement units per impression, indexed [user][provider][slot];
    /// None means 1 everywhere.
    #[serde(default)]
    pub engagement_weight: Option<Vec<f64>>,
    /// Slots per epoch.
    pub horizon: usize,
    pub slate_size: usize,
    pub utility_kind: UtilityKind,
}

impl Instance {
    pub fn dim(&self) -> usize {
        self.users
            .first()
            .map(|u| u.mean.len())
            .or_else(|| self.providers.first().map(|c| c.embedding.len()))
            .unwrap_or(0)
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_providers(&self) -> usize {
        self.providers.len()
    }

    /// Expected query mass of user `u` in an epoch.
    pub fn query_weight(&self, u: usize) -> f64 {
        match &self.query_weight {
            Some(table) => table[u],
            None => self.users[u].query_weight(),
        }
    }

    /// Engagement units one impression of provider `c` at slot `t` contributes.
    pub fn engagement_weight(&self, u: usize, c: usize, t: usize) -> f64 {
        match &self.engagement_weight {
            Some(table) => {
                let nc = self.providers.len();
                table[(u * nc + c) * self.horizon + t]
            }
            None => 1.0,
        }
    }

    /// Slot weights for additive utility; all ones for sigmoid instances
    /// (the nonlinearity is applied to the raw reward sum).
    pub fn alpha(&self) -> Vec<f64> {
        match &self.utility_kind {
            UtilityKind::LinearWeighted(alpha) => alpha.clone(),
            UtilityKind::Sigmoid { .. } => vec![1.0; self.horizon],
        }
    }

    /// Epoch utility of a realized reward sequence under the instance's
    /// utility model.
    pub fn epoch_utility(&self, rewards: &[f64]) -> f64 {
        match &self.utility_kind {
            UtilityKind::LinearWeighted(alpha) => rewards
                .iter()
                .zip(alpha.iter())
                .map(|(r, a)| a * r)
                .sum(),
            UtilityKind::Sigmoid { beta, scale } => {
                utility_sigmoid(rewards, *beta, *scale).expect("scale validated")
            }
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let d = self.dim();
        for u in &self.users {
            if u.mean.len() != d {
                return Err(ModelError::DimensionMismatch {
                    expected: d,
                    got: u.mean.len(),
                });
            }
            if u.variance < 0.0 {
                return Err(ModelError::Invalid(format!(
                    "user {} has negative variance",
                    u.id
                )));
            }
            if !(0.0..=1.0).contains(&u.activation) {
                return Err(ModelError::Invalid(format!(
                    "user {} activation outside [0,1]",
                    u.id
                )));
            }
            if u.demand < 1 {
                return Err(ModelError::Invalid(format!("user {} has zero demand", u.id)));
            }
        }
        for c in &self.providers {
            if c.embedding.len() != d {
                return Err(ModelError::DimensionMismatch {
                    expected: d,
                    got: c.embedding.len(),
                });
            }
            if c.threshold < 0.0 {
                return Err(ModelError::Invalid(format!(
                    "provider {} has negative threshold",
                    c.id
                )));
            }
        }
        if self.horizon < 1 {
            return Err(ModelError::Invalid("horizon must be >= 1".into()));
        }
        if self.slate_size < 1 || self.slate_size > self.providers.len().max(1) {
            return Err(ModelError::Invalid(format!(
                "slate size {} outside [1, {}]",
                self.slate_size,
                self.providers.len()
            )));
        }
        if let UtilityKind::LinearWeighted(alpha) = &self.utility_kind {
            if alpha.len() != self.horizon {
                return Err(ModelError::LengthMismatch {
                    rewards: self.horizon,
                    weights: alpha.len(),
                });
            }
        }
        if let UtilityKind::Sigmoid { scale, .. } = self.utility_kind {
            if scale <= 0.0 {
                return Err(ModelError::Invalid("sigmoid scale must be > 0".into()));
            }
        }
        if let Some(q) = &self.query_weight {
            if q.len() != self.users.len() || q.iter().any(|v| *v < 0.0 || !v.is_finite()) {
                return Err(ModelError::Invalid("bad query weight table".into()));
            }
        }
        if let Some(w) = &self.engagement_weight {
            let want = self.users.len() * self.providers.len() * self.horizon;
            if w.len() != want || w.iter().any(|v| *v < 0.0 || !v.is_finite()) {
                return Err(ModelError::Invalid("bad engagement weight table".into()));
            }
        }
        Ok(())
    }
}

/// Immediate reward of provider `provider_id` for a realized query vector.
pub fn reward(instance: &Instance, query: &[f64], provider_id: usize) -> Result<RewardValue, ModelError> {
    let c = instance
        .providers
        .get(provider_id)
        .ok_or(ModelError::BadProvider(provider_id))?;
    if query.len() != c.embedding.len() {
        return Err(ModelError::DimensionMismatch {
            expected: c.embedding.len(),
            got: query.len(),
        });
    }
    let raw = match instance.reward_kind {
        RewardKind::DotProduct => query.iter().zip(&c.embedding).map(|(a, b)| a * b).sum(),
        RewardKind::NegativeDistance => {
            -query
                .iter()
                .zip(&c.embedding)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        }
    };
    Ok(RewardValue(raw + instance.reward_offset))
}

/// Alpha-weighted sum of slot rewards.
pub fn utility_linear(rewards: &[f64], alpha: &[f64]) -> Result<f64, ModelError> {
    if rewards.len() != alpha.len() {
        return Err(ModelError::LengthMismatch {
            rewards: rewards.len(),
            weights: alpha.len(),
        });
    }
    Ok(rewards.iter().zip(alpha).map(|(r, a)| r * a).sum())
}

/// Discount weights (1, gamma, gamma^2, ...) of length `t`.
pub fn discount_weights(gamma: f64, t: usize) -> Result<Vec<f64>, ModelError> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(ModelError::BadGamma(gamma));
    }
    let mut out = Vec::with_capacity(t);
    let mut w = 1.0;
    for _ in 0..t {
        out.push(w);
        w *= gamma;
    }
    Ok(out)
}

/// Sigmoidal epoch utility: logistic(scale * (sum of rewards + beta)).
pub fn utility_sigmoid(rewards: &[f64], beta: f64, scale: f64) -> Result<f64, ModelError> {
    if scale <= 0.0 {
        return Err(ModelError::Invalid("sigmoid scale must be > 0".into()));
    }
    let x = scale * (rewards.iter().sum::<f64>() + beta);
    Ok(1.0 / (1.0 + (-x).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tiny_instance(kind: RewardKind) -> Instance {
        Instance {
            users: vec![UserProfile {
                id: 0,
                mean: vec![0.0, 0.0],
                variance: 0.0,
                activation: 1.0,
                demand: 1,
            }],
            providers: vec![
                ProviderRecord { id: 0, embedding: vec![1.0, 0.0], threshold: 0.0 },
                ProviderRecord { id: 1, embedding: vec![3.0, 4.0], threshold: 0.0 },
            ],
            reward_kind: kind,
            reward_offset: 0.0,
            query_weight: None,
            engagement_weight: None,
            horizon: 1,
            slate_size: 1,
            utility_kind: UtilityKind::LinearWeighted(vec![1.0]),
        }
    }

    #[test]
    fn reward_dot_product_unit_vectors() {
        let inst = tiny_instance(RewardKind::DotProduct);
        assert_eq!(reward(&inst, &[1.0, 0.0], 0).unwrap().0, 1.0);
    }

    #[test]
    fn reward_negative_distance_345() {
        let inst = tiny_instance(RewardKind::NegativeDistance);
        assert!((reward(&inst, &[0.0, 0.0], 1).unwrap().0 - (-5.0)).abs() < 1e-12);
    }

    #[test]
    fn reward_fig1_kernel_with_offset() {
        // 1-D kernel 2 - |u - c|: NegativeDistance plus offset 2.
        let mut inst = tiny_instance(RewardKind::NegativeDistance);
        inst.providers = vec![ProviderRecord { id: 0, embedding: vec![0.0], threshold: 2.0 }];
        inst.users[0].mean = vec![0.95];
        inst.reward_offset = 2.0;
        let r = reward(&inst, &[0.95], 0).unwrap().0;
        assert!((r - 1.05).abs() < 1e-12);
    }

    #[test]
    fn reward_dimension_mismatch() {
        let inst = tiny_instance(RewardKind::DotProduct);
        assert!(matches!(
            reward(&inst, &[1.0], 0),
            Err(ModelError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn utility_linear_examples() {
        assert_eq!(utility_linear(&[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0]).unwrap(), 3.0);
        assert_eq!(utility_linear(&[2.0, 2.0], &[1.0, 0.5]).unwrap(), 3.0);
        assert_eq!(utility_linear(&[5.0], &[1.0]).unwrap(), 5.0);
        assert!(utility_linear(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn discount_weights_examples() {
        assert_eq!(discount_weights(1.0, 3).unwrap(), vec![1.0, 1.0, 1.0]);
        assert_eq!(discount_weights(0.5, 3).unwrap(), vec![1.0, 0.5, 0.25]);
        assert_eq!(discount_weights(0.1, 1).unwrap(), vec![1.0]);
        assert!(discount_weights(0.0, 3).is_err());
        assert!(discount_weights(1.5, 3).is_err());
    }

    #[test]
    fn utility_sigmoid_examples() {
        assert_eq!(utility_sigmoid(&[2.0, -1.0], -1.0, 1.0).unwrap(), 0.5);
        assert_eq!(utility_sigmoid(&[0.0], 0.0, 1.0).unwrap(), 0.5);
        let v = utility_sigmoid(&[10.0], 0.0, 1.0).unwrap();
        assert!((v - 0.9999546021312976).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn utility_linear_monotone_in_rewards(
            rewards in proptest::collection::vec(-10.0f64..10.0, 1..6),
            alpha in proptest::collection::vec(0.0f64..2.0, 6),
            bump in 0.0f64..5.0,
            idx in 0usize..6,
        ) {
            let alpha = &alpha[..rewards.len()];
            let idx = idx % rewards.len();
            let base = utility_linear(&rewards, alpha).unwrap();
            let mut bumped = rewards.clone();
            bumped[idx] += bump;
            prop_assert!(utility_linear(&bumped, alpha).unwrap() >= base - 1e-12);
        }

        #[test]
        fn utility_sigmoid_bounded_and_increasing(
            sum in -20.0f64..20.0,
            delta in 0.001f64..5.0,
            beta in -5.0f64..5.0,
            scale in 0.1f64..3.0,
        ) {
            let lo = utility_sigmoid(&[sum], beta, scale).unwrap();
            let hi = utility_sigmoid(&[sum + delta], beta, scale).unwrap();
            prop_assert!((0.0..=1.0).contains(&lo));
            prop_assert!((0.0..=1.0).contains(&hi));
            // Monotone; strictly so away from f64 saturation of the logistic.
            prop_assert!(hi >= lo);
            if scale * (sum + delta + beta).abs() < 30.0 {
                prop_assert!(hi > lo);
            }
        }

        #[test]
        fn reward_symmetric_under_swap(
            q in proptest::collection::vec(-5.0f64..5.0, 2),
            e in proptest::collection::vec(-5.0f64..5.0, 2),
            dot in proptest::prelude::any::<bool>(),
        ) {
            let kind = if dot { RewardKind::DotProduct } else { RewardKind::NegativeDistance };
            let mut inst = tiny_instance(kind);
            inst.providers[0].embedding = e.clone();
            let fwd = reward(&inst, &q, 0).unwrap().0;
            inst.providers[0].embedding = q.clone();
            let rev = reward(&inst, &e, 0).unwrap().0;
            prop_assert!((fwd - rev).abs() < 1e-12);
        }

        #[test]
        fn discount_weights_gamma_one_is_ones(t in 1usize..10) {
            let w = discount_weights(1.0, t).unwrap();
            prop_assert!(w.iter().all(|x| *x == 1.0));
        }
    }
}
