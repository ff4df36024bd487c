//! Experiment workbench: synthetic data generation, instance/embeddings file
//! I/O, the experiment harness (policy x seed x gamma x lambda cross product),
//! and result emission as CSV tables and SVG line charts.

pub mod svg;

use crate::ecosim::{run_simulation, PolicyKind, SimError, Trajectory};
use crate::model::{
    discount_weights, Instance, ModelError, ProviderRecord, RewardKind, UserProfile, UtilityKind,
};
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng as _;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorkbenchError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

fn io_err(path: &Path, source: std::io::Error) -> WorkbenchError {
    WorkbenchError::Io { path: path.to_path_buf(), source }
}

/// Formats a float with the fixed 6-decimal convention used by every emitted
/// file, so outputs are bit-identical across runs.
pub fn fmt6(x: f64) -> String {
    format!("{x:.6}")
}

// ---------------------------------------------------------------------------
// Synthetic data generation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Every provider component is equally likely; constant user variance.
    Uniform,
    /// Providers near the origin are popular: their components attract more
    /// users and those users have higher query variance. Far-from-origin
    /// providers are niche, with fewer but more loyal (lower-variance) users.
    Skewed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticParams {
    pub n_providers: usize,
    pub n_users: usize,
    pub dim: usize,
    pub variant: Variant,
    /// Standard deviation of each provider embedding coordinate.
    pub provider_spread: f64,
    /// Baseline per-coordinate query variance. Uniform: used as-is for every
    /// user. Skewed: scaled by the component's popularity, so the most
    /// popular component gets the full value and niche components less.
    pub user_variance: f64,
    /// Uniform viability threshold shared by all providers.
    pub nu: f64,
    /// Inclusive range user activation rates rho are drawn from uniformly.
    /// Heterogeneous activation spreads provider loads around the viability
    /// threshold, which is what makes provider survival policy-dependent.
    #[serde(default = "default_activation_range")]
    pub activation_range: (f64, f64),
    pub seed: u64,
}

fn default_activation_range() -> (f64, f64) {
    (0.3, 0.7)
}

impl SyntheticParams {
    /// Desk-scale defaults: 20 providers, 400 users in 2 dimensions, with
    /// nu = 8 * (users/providers) / 20.
    pub fn desk_scale(variant: Variant, seed: u64) -> Self {
        let n_providers = 20;
        let n_users = 400;
        SyntheticParams {
            n_providers,
            n_users,
            dim: 2,
            variant,
            provider_spread: 6.0,
            user_variance: 0.1,
            nu: 8.0 * (n_users as f64 / n_providers as f64) / 20.0,
            activation_range: default_activation_range(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), WorkbenchError> {
        if self.n_providers == 0 || self.n_users == 0 || self.dim == 0 {
            return Err(WorkbenchError::Config(
                "n_providers, n_users and dim must all be >= 1".into(),
            ));
        }
        if !(self.provider_spread > 0.0) {
            return Err(WorkbenchError::Config(format!(
                "provider_spread must be > 0, got {}",
                self.provider_spread
            )));
        }
        if !(self.user_variance >= 0.0) {
            return Err(WorkbenchError::Config(format!(
                "user_variance must be >= 0, got {}",
                self.user_variance
            )));
        }
        if !(self.nu >= 0.0) {
            return Err(WorkbenchError::Config(format!("nu must be >= 0, got {}", self.nu)));
        }
        let (lo, hi) = self.activation_range;
        if !(lo > 0.0 && hi <= 1.0 && lo <= hi) {
            return Err(WorkbenchError::Config(format!(
                "activation_range must satisfy 0 < lo <= hi <= 1, got ({lo}, {hi})"
            )));
        }
        Ok(())
    }
}

/// Popularity weight of a provider at Euclidean norm `dist` from the origin
/// under the skewed variant: a decreasing function of distance.
fn popularity(dist: f64) -> f64 {
    1.0 / (1.0 + dist)
}

/// Generates a mixture-of-Gaussians instance: one mixture component per
/// provider, each user drawn from one component. Deterministic under
/// `params.seed`. The reward kernel is negative Euclidean distance, so
/// welfare values are typically negative.
pub fn gen_synthetic(params: &SyntheticParams) -> Result<Instance, WorkbenchError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let coord = Normal::new(0.0, params.provider_spread).expect("validated spread");

    let providers: Vec<ProviderRecord> = (0..params.n_providers)
        .map(|id| ProviderRecord {
            id,
            embedding: (0..params.dim).map(|_| coord.sample(&mut rng)).collect(),
            threshold: params.nu,
        })
        .collect();

    // Component prior and per-component user variance.
    let norms: Vec<f64> = providers
        .iter()
        .map(|p| p.embedding.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let (weights, variances): (Vec<f64>, Vec<f64>) = match params.variant {
        Variant::Uniform => (
            vec![1.0; params.n_providers],
            vec![params.user_variance; params.n_providers],
        ),
        Variant::Skewed => {
            let pops: Vec<f64> = norms.iter().map(|&d| popularity(d)).collect();
            let max_pop = pops.iter().cloned().fold(f64::MIN, f64::max);
            let vars = pops.iter().map(|&p| params.user_variance * p / max_pop).collect();
            (pops, vars)
        }
    };
    let prior = WeightedIndex::new(&weights)
        .map_err(|e| WorkbenchError::Config(format!("bad component prior: {e}")))?;

    let users: Vec<UserProfile> = (0..params.n_users)
        .map(|id| {
            let c = prior.sample(&mut rng);
            let var = variances[c];
            let scatter = Normal::new(0.0, var.sqrt().max(f64::MIN_POSITIVE))
                .expect("finite std");
            let mean = providers[c]
                .embedding
                .iter()
                .map(|&v| if var > 0.0 { v + scatter.sample(&mut rng) } else { v })
                .collect();
            let (lo, hi) = params.activation_range;
            let activation = if lo == hi { lo } else { rng.gen_range(lo..=hi) };
            UserProfile { id, mean, variance: var, activation, demand: 1 }
        })
        .collect();

    let instance = Instance {
        users,
        providers,
        reward_kind: RewardKind::NegativeDistance,
        reward_offset: 0.0,
        query_weight: None,
        engagement_weight: None,
        horizon: 1,
        slate_size: 1,
        utility_kind: UtilityKind::LinearWeighted(vec![1.0]),
    };
    instance.validate()?;
    Ok(instance)
}

/// Empirical component assignment for generated users: each user is counted
/// toward the provider whose embedding is closest to its profile mean.
/// Exposed for distribution checks on generator output.
pub fn component_histogram(instance: &Instance) -> Vec<usize> {
    let mut counts = vec![0usize; instance.n_providers()];
    for user in &instance.users {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (c, p) in instance.providers.iter().enumerate() {
            let d: f64 = user
                .mean
                .iter()
                .zip(&p.embedding)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        counts[best] += 1;
    }
    counts
}

/// Spearman rank correlation between two equally long samples. Ties get their
/// average rank. Returns 0 for degenerate (constant) inputs.
pub fn spearman_rho(xs: &[f64], ys: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).expect("finite values"));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    assert_eq!(xs.len(), ys.len());
    let rx = ranks(xs);
    let ry = ranks(ys);
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

// ---------------------------------------------------------------------------
// File I/O: instance JSON and embeddings CSV
// ---------------------------------------------------------------------------

pub fn save_instance(path: &Path, instance: &Instance) -> Result<(), WorkbenchError> {
    let json = serde_json::to_string_pretty(instance)?;
    fs::write(path, json + "\n").map_err(|e| io_err(path, e))
}

pub fn load_instance(path: &Path) -> Result<Instance, WorkbenchError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let instance: Instance = serde_json::from_str(&text)?;
    instance.validate()?;
    Ok(instance)
}

/// Writes the embeddings CSV format: header
/// `role,id,threshold,v0,...,v{d-1},rho,demand`; provider rows leave the
/// trailing `rho,demand` cells empty; user rows carry activation (`rho`) and
/// integer demand there and a zero threshold cell.
pub fn save_embeddings(path: &Path, instance: &Instance) -> Result<(), WorkbenchError> {
    let d = instance.dim();
    let mut out = String::from("role,id,threshold");
    for i in 0..d {
        let _ = write!(out, ",v{i}");
    }
    out.push_str(",rho,demand\n");
    for p in &instance.providers {
        let _ = write!(out, "provider,{},{}", p.id, fmt6(p.threshold));
        for v in &p.embedding {
            let _ = write!(out, ",{}", fmt6(*v));
        }
        out.push_str(",,\n");
    }
    for u in &instance.users {
        let _ = write!(out, "user,{},{}", u.id, fmt6(0.0));
        for v in &u.mean {
            let _ = write!(out, ",{}", fmt6(*v));
        }
        let _ = writeln!(out, ",{},{}", fmt6(u.activation), u.demand);
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Parses the embeddings CSV format into an instance with the dot-product
/// reward kernel. `nu_override`, when set, replaces every provider threshold.
/// Malformed rows are reported with their 1-based line number.
pub fn load_embeddings(path: &Path, nu_override: Option<f64>) -> Result<Instance, WorkbenchError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(WorkbenchError::Parse {
        line: 1,
        message: "empty file, expected a header row".into(),
    })?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 6 || cols[0] != "role" || cols[1] != "id" || cols[2] != "threshold" {
        return Err(WorkbenchError::Parse {
            line: 1,
            message: format!("bad header, expected role,id,threshold,v0,...,rho,demand: {header}"),
        });
    }
    let d = cols.len() - 5;
    for (i, col) in cols[3..3 + d].iter().enumerate() {
        if *col != format!("v{i}") {
            return Err(WorkbenchError::Parse {
                line: 1,
                message: format!("expected column v{i}, found {col}"),
            });
        }
    }

    let parse_f64 = |line: usize, field: &str, what: &str| -> Result<f64, WorkbenchError> {
        field.trim().parse::<f64>().map_err(|_| WorkbenchError::Parse {
            line,
            message: format!("cannot parse {what} from {field:?}"),
        })
    };

    let mut users = Vec::new();
    let mut providers = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != d + 5 {
            return Err(WorkbenchError::Parse {
                line,
                message: format!("expected {} fields, found {}", d + 5, fields.len()),
            });
        }
        let id: usize = fields[1].trim().parse().map_err(|_| WorkbenchError::Parse {
            line,
            message: format!("cannot parse id from {:?}", fields[1]),
        })?;
        let vector: Vec<f64> = fields[3..3 + d]
            .iter()
            .enumerate()
            .map(|(i, f)| parse_f64(line, f, &format!("v{i}")))
            .collect::<Result<_, _>>()?;
        match fields[0].trim() {
            "provider" => {
                let threshold = parse_f64(line, fields[2], "threshold")?;
                providers.push(ProviderRecord {
                    id,
                    embedding: vector,
                    threshold: nu_override.unwrap_or(threshold),
                });
            }
            "user" => {
                let activation = parse_f64(line, fields[3 + d], "rho")?;
                let demand: u32 =
                    fields[4 + d].trim().parse().map_err(|_| WorkbenchError::Parse {
                        line,
                        message: format!("cannot parse demand from {:?}", fields[4 + d]),
                    })?;
                users.push(UserProfile { id, mean: vector, variance: 0.0, activation, demand });
            }
            other => {
                return Err(WorkbenchError::Parse {
                    line,
                    message: format!("unknown role {other:?}, expected user or provider"),
                });
            }
        }
    }

    let instance = Instance {
        users,
        providers,
        reward_kind: RewardKind::DotProduct,
        reward_offset: 0.0,
        query_weight: None,
        engagement_weight: None,
        horizon: 1,
        slate_size: 1,
        utility_kind: UtilityKind::LinearWeighted(vec![1.0]),
    };
    instance.validate()?;
    Ok(instance)
}

// ---------------------------------------------------------------------------
// Experiment configuration and harness
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceSource {
    /// Generate a synthetic instance in-process.
    Synthetic(SyntheticParams),
    /// Load an embeddings CSV (dot-product kernel).
    Embeddings { path: PathBuf, nu: Option<f64> },
    /// Load a previously saved instance JSON file.
    InstanceFile { path: PathBuf },
}

fn default_gamma_grid() -> Vec<f64> {
    vec![1.0]
}
fn default_lambda_grid() -> Vec<f64> {
    vec![0.0]
}
fn default_slate() -> usize {
    1
}
fn default_round_threshold() -> f64 {
    0.5
}
fn default_colgen_k() -> usize {
    2
}
fn default_colgen_max_iter() -> usize {
    300
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: InstanceSource,
    /// Policy names: myopic, stochastic, greedy, lp-rs, colgen.
    pub policies: Vec<String>,
    pub epochs: usize,
    pub seeds: Vec<u64>,
    #[serde(default = "default_gamma_grid")]
    pub gamma_grid: Vec<f64>,
    #[serde(default = "default_lambda_grid")]
    pub lambda_grid: Vec<f64>,
    #[serde(default = "default_slate")]
    pub slate_size: usize,
    #[serde(default = "default_round_threshold")]
    pub round_threshold: f64,
    #[serde(default = "default_colgen_k")]
    pub colgen_k: usize,
    #[serde(default = "default_colgen_max_iter")]
    pub colgen_max_iter: usize,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), WorkbenchError> {
        if self.policies.is_empty() {
            return Err(WorkbenchError::Config("policy list must be nonempty".into()));
        }
        if self.seeds.is_empty() {
            return Err(WorkbenchError::Config("seed list must be nonempty".into()));
        }
        if self.epochs == 0 {
            return Err(WorkbenchError::Config("epochs must be >= 1".into()));
        }
        if self.gamma_grid.is_empty() || self.lambda_grid.is_empty() {
            return Err(WorkbenchError::Config("gamma and lambda grids must be nonempty".into()));
        }
        if self.slate_size == 0 {
            return Err(WorkbenchError::Config("slate_size must be >= 1".into()));
        }
        if !(self.round_threshold > 0.0 && self.round_threshold <= 1.0) {
            return Err(WorkbenchError::Config(format!(
                "round_threshold must lie in (0, 1], got {}",
                self.round_threshold
            )));
        }
        for p in &self.policies {
            parse_policy(p, self.round_threshold, 0.0, self.colgen_k)?;
        }
        Ok(())
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, WorkbenchError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let config: ExperimentConfig = serde_json::from_str(&text)?;
    config.validate()?;
    Ok(config)
}

/// Maps a policy name to the simulator's policy kind.
pub fn parse_policy(
    name: &str,
    round_threshold: f64,
    lambda: f64,
    colgen_k: usize,
) -> Result<PolicyKind, WorkbenchError> {
    match name {
        "myopic" => Ok(PolicyKind::Myopic),
        "stochastic" => Ok(PolicyKind::Stochastic),
        "greedy" => Ok(PolicyKind::Greedy),
        "lp-rs" => Ok(PolicyKind::LpRs { round_threshold, lambda }),
        "colgen" => Ok(PolicyKind::ColGen { k: colgen_k }),
        other => Err(WorkbenchError::Config(format!(
            "unknown policy {other:?}, expected myopic|stochastic|greedy|lp-rs|colgen"
        ))),
    }
}

/// Rebuilds an instance for a slate of `s` recommendations per query with
/// discount factor `gamma`: the horizon becomes s and slot weights gamma^t.
pub fn apply_discounting(
    instance: &Instance,
    gamma: f64,
    s: usize,
) -> Result<Instance, WorkbenchError> {
    let mut out = instance.clone();
    out.slate_size = s;
    out.horizon = s;
    // Unit engagement budget per query: each impression contributes 1/s
    // engagement units, so a query carries the same total engagement mass at
    // every slate size and viability thresholds keep their meaning when the
    // slate is widened for a discounting sweep.
    out.engagement_weight = if s > 1 {
        Some(vec![1.0 / s as f64; instance.n_users() * instance.n_providers() * s])
    } else {
        None
    };
    out.utility_kind = UtilityKind::LinearWeighted(discount_weights(gamma, s)?);
    out.validate()?;
    Ok(out)
}

/// One simulated cell of the experiment cross product.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub policy: String,
    pub gamma: f64,
    pub lambda: f64,
    pub seed: u64,
    pub trajectory: Trajectory,
}

/// One row of the summary table: statistics over seeds for a fixed
/// (policy, gamma, lambda) cell group.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub policy: String,
    pub gamma: f64,
    pub lambda: f64,
    /// Mean over seeds of the per-run epoch-averaged social welfare.
    pub welfare_mean: f64,
    pub welfare_std: f64,
    /// Mean over seeds of the final-epoch viable provider count.
    pub final_viable_mean: f64,
    pub final_viable_std: f64,
    /// Mean over seeds of the per-run epoch-averaged max regret.
    pub max_regret_mean: f64,
    pub max_regret_std: f64,
    /// max_regret_mean / |welfare_mean / sum(alpha_t)| (0 when welfare is 0);
    /// the slot-mass normalization keeps the ratio comparable across gammas.
    pub regret_welfare_ratio: f64,
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub cells: Vec<CellResult>,
    pub summary: Vec<SummaryRow>,
    pub files: Vec<PathBuf>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn summarize(cells: &[CellResult], slate: usize) -> Vec<SummaryRow> {
    // Group by (policy, gamma, lambda), keyed on the fixed 6-decimal text so
    // grouping matches what the emitted files show.
    let mut groups: BTreeMap<(String, String, String), Vec<&CellResult>> = BTreeMap::new();
    for cell in cells {
        groups
            .entry((cell.policy.clone(), fmt6(cell.gamma), fmt6(cell.lambda)))
            .or_default()
            .push(cell);
    }
    let mut rows = Vec::new();
    for ((policy, _, _), group) in groups {
        let welfare: Vec<f64> = group
            .iter()
            .map(|c| {
                let t = &c.trajectory;
                t.epochs.iter().map(|m| m.social_welfare).sum::<f64>() / t.epochs.len() as f64
            })
            .collect();
        let viable: Vec<f64> = group
            .iter()
            .map(|c| c.trajectory.epochs.last().expect("epochs >= 1").viable_count as f64)
            .collect();
        let regret: Vec<f64> = group
            .iter()
            .map(|c| {
                let t = &c.trajectory;
                t.epochs.iter().map(|m| m.max_regret).sum::<f64>() / t.epochs.len() as f64
            })
            .collect();
        let (welfare_mean, welfare_std) = mean_std(&welfare);
        let (final_viable_mean, final_viable_std) = mean_std(&viable);
        let (max_regret_mean, max_regret_std) = mean_std(&regret);
        // Welfare is normalized by the total slot mass sum(alpha_t) before
        // the ratio so its mechanical scaling with gamma drops out and the
        // ratio tracks regret against per-attention-unit welfare.
        let gamma = group[0].gamma;
        let alpha_sum: f64 = (0..slate as i32).map(|t| gamma.powi(t)).sum();
        let ratio = if welfare_mean == 0.0 {
            0.0
        } else {
            max_regret_mean * alpha_sum / welfare_mean.abs()
        };
        rows.push(SummaryRow {
            policy,
            gamma: group[0].gamma,
            lambda: group[0].lambda,
            welfare_mean,
            welfare_std,
            final_viable_mean,
            final_viable_std,
            max_regret_mean,
            max_regret_std,
            regret_welfare_ratio: ratio,
        });
    }
    rows
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<PathBuf, WorkbenchError> {
    let path = dir.join(name);
    fs::write(&path, content).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

/// Resolves the configured instance source into a concrete instance.
pub fn resolve_instance(source: &InstanceSource) -> Result<Instance, WorkbenchError> {
    match source {
        InstanceSource::Synthetic(params) => gen_synthetic(params),
        InstanceSource::Embeddings { path, nu } => load_embeddings(path, *nu),
        InstanceSource::InstanceFile { path } => load_instance(path),
    }
}

/// Runs the full (policy, seed, gamma, lambda) cross product and writes
/// trajectory.csv, histogram.csv, summary.csv and two SVG charts to the
/// output directory. Fails before any simulation if the directory cannot be
/// written.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput, WorkbenchError> {
    config.validate()?;
    let base = resolve_instance(&config.source)?;

    fs::create_dir_all(&config.out_dir).map_err(|e| io_err(&config.out_dir, e))?;
    // Probe writability up front so a bad output directory fails fast.
    let probe = config.out_dir.join(".write_probe");
    fs::write(&probe, b"").map_err(|e| io_err(&probe, e))?;
    fs::remove_file(&probe).map_err(|e| io_err(&probe, e))?;

    let mut cells = Vec::new();
    for &gamma in &config.gamma_grid {
        let inst = apply_discounting(&base, gamma, config.slate_size)?;
        for &lambda in &config.lambda_grid {
            for name in &config.policies {
                let kind = parse_policy(name, config.round_threshold, lambda, config.colgen_k)?;
                for &seed in &config.seeds {
                    let trajectory = run_simulation(&inst, kind, config.epochs, seed)?;
                    cells.push(CellResult {
                        policy: name.clone(),
                        gamma,
                        lambda,
                        seed,
                        trajectory,
                    });
                }
            }
        }
    }

    let summary = summarize(&cells, config.slate_size);
    let mut files = Vec::new();

    // Trajectory CSV. The spec columns come first; gamma and lambda are
    // appended so grid cells stay distinguishable in one file.
    let mut traj = String::from(
        "epoch,policy,seed,social_welfare,avg_user_utility,viable_count,max_regret,stranded_users,gamma,lambda\n",
    );
    for cell in &cells {
        for m in &cell.trajectory.epochs {
            let _ = writeln!(
                traj,
                "{},{},{},{},{},{},{},{},{},{}",
                m.epoch,
                cell.policy,
                cell.seed,
                fmt6(m.social_welfare),
                fmt6(m.avg_user_utility),
                m.viable_count,
                fmt6(m.max_regret),
                m.stranded_users,
                fmt6(cell.gamma),
                fmt6(cell.lambda),
            );
        }
    }
    files.push(write_file(&config.out_dir, "trajectory.csv", &traj)?);

    // Per-user total-utility histogram CSV.
    let mut hist = String::from("policy,seed,user_id,total_utility,gamma,lambda\n");
    for cell in &cells {
        for (user_id, total) in cell.trajectory.user_totals.iter().enumerate() {
            let _ = writeln!(
                hist,
                "{},{},{},{},{},{}",
                cell.policy,
                cell.seed,
                user_id,
                fmt6(*total),
                fmt6(cell.gamma),
                fmt6(cell.lambda),
            );
        }
    }
    files.push(write_file(&config.out_dir, "histogram.csv", &hist)?);

    // Summary CSV (mean +- std over seeds).
    let mut sum = String::from(
        "policy,gamma,lambda,welfare_mean,welfare_std,final_viable_mean,final_viable_std,max_regret_mean,max_regret_std,regret_welfare_ratio\n",
    );
    for row in &summary {
        let _ = writeln!(
            sum,
            "{},{},{},{},{},{},{},{},{},{}",
            row.policy,
            fmt6(row.gamma),
            fmt6(row.lambda),
            fmt6(row.welfare_mean),
            fmt6(row.welfare_std),
            fmt6(row.final_viable_mean),
            fmt6(row.final_viable_std),
            fmt6(row.max_regret_mean),
            fmt6(row.max_regret_std),
            fmt6(row.regret_welfare_ratio),
        );
    }
    files.push(write_file(&config.out_dir, "summary.csv", &sum)?);

    // SVG charts: one polyline per (policy, gamma, lambda) cell group, each
    // point the mean over seeds at that epoch.
    let mut groups: BTreeMap<(String, String, String), Vec<&CellResult>> = BTreeMap::new();
    for cell in &cells {
        groups
            .entry((cell.policy.clone(), fmt6(cell.gamma), fmt6(cell.lambda)))
            .or_default()
            .push(cell);
    }
    let grid_is_trivial = config.gamma_grid.len() == 1 && config.lambda_grid.len() == 1;
    let series_for = |metric: &dyn Fn(&crate::ecosim::EpochMetrics) -> f64| {
        let mut series = Vec::new();
        for ((policy, g, l), group) in &groups {
            let label = if grid_is_trivial {
                policy.clone()
            } else {
                format!("{policy} g={g} l={l}")
            };
            let points: Vec<(f64, f64)> = (0..config.epochs)
                .map(|e| {
                    let mean = group.iter().map(|c| metric(&c.trajectory.epochs[e])).sum::<f64>()
                        / group.len() as f64;
                    (e as f64, mean)
                })
                .collect();
            series.push((label, points));
        }
        series
    };
    let welfare_svg = svg::line_chart(
        "Social welfare per epoch",
        "epoch",
        "social welfare",
        &series_for(&|m| m.social_welfare),
    );
    files.push(write_file(&config.out_dir, "welfare.svg", &welfare_svg)?);
    let viable_svg = svg::line_chart(
        "Viable providers per epoch",
        "epoch",
        "viable providers",
        &series_for(&|m| m.viable_count as f64),
    );
    files.push(write_file(&config.out_dir, "viable.svg", &viable_svg)?);

    Ok(ExperimentOutput { cells, summary, files })
}
