//! Nested search: an outer swarm over the hidden-neuron count, and for
//! every candidate architecture a fresh inner swarm over the weights.
//!
//! The inner optimizer is one of three variants:
//!
//! * [`Algorithm::PsoPso`]: plain PSO.
//! * [`Algorithm::PsoPsoSa`]: the annealed step rule with the repulsion
//!   weight forced to zero.
//! * [`Algorithm::PsoImprovedPsoSa`]: the annealed step rule with the
//!   configured repulsion weight `c3`.

use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;

use crate::anneal::{AnnealConfig, AnnealedRule};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::mlp::{mse_raw, Topology, WeightVector};
use crate::pso::{self, default_v_max, EvalSite, Objective, PsoConfig, StandardRule, Swarm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    PsoPso,
    PsoPsoSa,
    PsoImprovedPsoSa,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [
        Algorithm::PsoPso,
        Algorithm::PsoPsoSa,
        Algorithm::PsoImprovedPsoSa,
    ];

    /// Identifier used in config files and output file names.
    pub fn key(self) -> &'static str {
        match self {
            Algorithm::PsoPso => "pso_pso",
            Algorithm::PsoPsoSa => "pso_pso_sa",
            Algorithm::PsoImprovedPsoSa => "pso_improved_pso_sa",
        }
    }

    /// Display name used in reports.
    pub fn label(self) -> &'static str {
        match self {
            Algorithm::PsoPso => "PSO-PSO",
            Algorithm::PsoPsoSa => "PSO-PSO_SA",
            Algorithm::PsoImprovedPsoSa => "PSO-improvedPSO_SA",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        Algorithm::ALL
            .into_iter()
            .find(|a| a.key().replace('_', "") == norm)
            .ok_or_else(|| {
                format!(
                    "unknown algorithm `{s}` (expected one of {})",
                    Algorithm::ALL.map(Algorithm::key).join(", ")
                )
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainerConfig {
    /// Architecture swarm. Its box always equals the hidden bounds.
    pub outer: PsoConfig,
    /// Weight swarm.
    pub inner: PsoConfig,
    pub anneal: AnnealConfig,
    pub algorithm: Algorithm,
    pub hidden_low: usize,
    pub hidden_high: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            outer: PsoConfig::architecture_search(),
            inner: PsoConfig::weight_search(),
            anneal: AnnealConfig::default(),
            algorithm: Algorithm::PsoImprovedPsoSa,
            hidden_low: 7,
            hidden_high: 30,
        }
    }
}

impl TrainerConfig {
    /// Sets the hidden-count bounds together with the outer box and its
    /// default velocity clamp.
    pub fn with_hidden_bounds(mut self, low: usize, high: usize) -> Self {
        self.hidden_low = low;
        self.hidden_high = high;
        self.outer.space_low = low as f64;
        self.outer.space_high = high as f64;
        self.outer.v_max = default_v_max(low as f64, high as f64).max(f64::MIN_POSITIVE);
        self
    }

    pub fn with_algorithm(mut self, algorithm: Algorithm) -> Self {
        self.algorithm = algorithm;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_low == 0 || self.hidden_low > self.hidden_high {
            return Err(Error::invalid(
                "hidden_low",
                format!(
                    "bounds [{}, {}] are invalid",
                    self.hidden_low, self.hidden_high
                ),
            ));
        }
        if self.outer.space_low != self.hidden_low as f64
            || self.outer.space_high != self.hidden_high as f64
        {
            return Err(Error::invalid(
                "outer",
                "architecture box must equal the hidden bounds",
            ));
        }
        if self.hidden_low == self.hidden_high {
            // a single architecture; the outer box degenerates
            if self.outer.v_max.is_nan() || self.outer.v_max <= 0.0 {
                return Err(Error::invalid("v_max", "must be positive"));
            }
        } else {
            self.outer.validate()?;
        }
        self.inner.validate()?;
        self.anneal.validate()
    }

    /// Upper bound on inner fitness evaluations for one [`train`] call.
    pub fn evaluation_budget(&self) -> u64 {
        let outer = self.outer.swarm_size as u64 * (self.outer.max_iterations as u64 + 1);
        outer * inner_evaluations(&self.inner)
    }
}

fn inner_evaluations(inner: &PsoConfig) -> u64 {
    inner.swarm_size as u64 * (inner.max_iterations as u64 + 1)
}

/// Round half up, then clamp into `[hidden_low, hidden_high]`.
pub fn decode_architecture(position: f64, hidden_low: usize, hidden_high: usize) -> usize {
    if position.is_nan() {
        return hidden_low;
    }
    let rounded = (position + 0.5).floor();
    if rounded <= hidden_low as f64 {
        hidden_low
    } else if rounded >= hidden_high as f64 {
        hidden_high
    } else {
        rounded as usize
    }
}

/// Deterministic seed mixing (SplitMix64 finalizer over each part).
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    parts.iter().fold(mix(base), |h, &p| mix(h ^ mix(p)))
}

/// Outcome of one inner weight search.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSearch {
    pub weights: WeightVector,
    pub best_mse: f64,
    /// Best-so-far MSE after each inner iteration.
    pub trace: Vec<f64>,
    pub evaluations: u64,
    /// Worse moves accepted / rejected by the annealing gate (zero for plain PSO).
    pub accepted_worse: u64,
    pub rejected_worse: u64,
}

fn check_data(topology: Topology, dataset: &Dataset) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if dataset.n_features() != topology.n_inputs() {
        return Err(Error::DimensionMismatch {
            context: "dataset width",
            expected: topology.n_inputs(),
            found: dataset.n_features(),
        });
    }
    Ok(())
}

/// Trains the weights of a fixed topology with the configured inner variant.
pub fn train_weights(
    topology: Topology,
    dataset: &Dataset,
    config: &TrainerConfig,
    seed: u64,
) -> Result<WeightSearch> {
    check_data(topology, dataset)?;
    config.anneal.validate()?;
    let inner = config.inner.clone().with_seed(seed);
    let objective = |w: &[f64]| mse_raw(topology, w, dataset);
    let dim = topology.parameter_count();
    let (outcome, accepted_worse, rejected_worse) = match config.algorithm {
        Algorithm::PsoPso => (
            pso::run_with(&inner, dim, &objective, &mut StandardRule)?,
            0,
            0,
        ),
        Algorithm::PsoPsoSa | Algorithm::PsoImprovedPsoSa => {
            let c3 = if config.algorithm == Algorithm::PsoPsoSa {
                0.0
            } else {
                config.anneal.c3
            };
            let mut rule = AnnealedRule::with_c3(&config.anneal, c3);
            let out = pso::run_with(&inner, dim, &objective, &mut rule)?;
            (out, rule.accepted_worse, rule.rejected_worse)
        }
    };
    Ok(WeightSearch {
        weights: WeightVector::new(topology, outcome.gbest_position)?,
        best_mse: outcome.gbest_fitness,
        trace: outcome.trace,
        evaluations: inner_evaluations(&inner),
        accepted_worse,
        rejected_worse,
    })
}

/// Best inner MSE reachable for `hidden` neurons; the outer fitness.
pub fn evaluate_architecture(
    hidden: usize,
    dataset: &Dataset,
    config: &TrainerConfig,
    seed: u64,
) -> Result<f64> {
    if hidden < config.hidden_low || hidden > config.hidden_high {
        return Err(Error::invalid(
            "hidden",
            format!(
                "{hidden} outside [{}, {}]",
                config.hidden_low, config.hidden_high
            ),
        ));
    }
    let topology = Topology::new(dataset.n_features(), hidden)?;
    Ok(train_weights(topology, dataset, config, seed)?.best_mse)
}

/// Snapshot of one outer particle.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchitectureParticle {
    pub position: f64,
    pub velocity: f64,
    pub pbest_position: f64,
    pub pbest_fitness: f64,
    pub decoded_hidden: usize,
}

/// One inner training run launched by the outer swarm.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchitectureEvaluation {
    /// 0 for the initial swarm.
    pub outer_iter: usize,
    pub particle: usize,
    pub hidden: usize,
    pub seed: u64,
    pub best_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub outer_iter: usize,
    pub inner_iter: usize,
    /// Hidden count of the network holding `best_mse`.
    pub hidden_count: usize,
    pub best_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub topology: Topology,
    pub weights: WeightVector,
    pub train_mse: f64,
    /// For every outer iteration, the inner convergence of that iteration's
    /// best architecture, expressed as the run-wide best-so-far MSE.
    pub trace: Vec<TraceRow>,
    pub evaluations: Vec<ArchitectureEvaluation>,
    pub final_swarm: Vec<ArchitectureParticle>,
    pub inner_evaluations: u64,
}

struct Record {
    eval: ArchitectureEvaluation,
    search: WeightSearch,
}

struct ArchitectureObjective<'a> {
    dataset: &'a Dataset,
    config: &'a TrainerConfig,
    seed: u64,
    records: Mutex<Vec<Record>>,
    failure: Mutex<Option<Error>>,
}

impl Objective for ArchitectureObjective<'_> {
    fn evaluate(&self, position: &[f64], site: EvalSite) -> f64 {
        let hidden =
            decode_architecture(position[0], self.config.hidden_low, self.config.hidden_high);
        let seed = derive_seed(self.seed, &[site.iteration as u64, site.particle as u64]);
        let result = Topology::new(self.dataset.n_features(), hidden)
            .and_then(|t| train_weights(t, self.dataset, self.config, seed));
        match result {
            Ok(search) => {
                let best = search.best_mse;
                self.records.lock().expect("records lock").push(Record {
                    eval: ArchitectureEvaluation {
                        outer_iter: site.iteration,
                        particle: site.particle,
                        hidden,
                        seed,
                        best_mse: best,
                    },
                    search,
                });
                best
            }
            Err(e) => {
                self.failure.lock().expect("failure lock").get_or_insert(e);
                f64::NAN
            }
        }
    }
}

/// Runs the nested search and returns the best network ever trained.
pub fn train(dataset: &Dataset, config: &TrainerConfig, seed: u64) -> Result<TrainedModel> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut outer = config.outer.clone().with_seed(seed);
    if config.hidden_low == config.hidden_high {
        // keep the box non-empty; decoding pins every particle to the bound
        outer.space_high = outer.space_low + 1e-9;
    }
    let objective = ArchitectureObjective {
        dataset,
        config,
        seed,
        records: Mutex::new(Vec::new()),
        failure: Mutex::new(None),
    };
    let outcome = (|| {
        let mut swarm = Swarm::init(&outer, 1, &objective)?;
        for _ in 0..outer.max_iterations {
            swarm.step(&outer, &objective)?;
        }
        Ok(swarm)
    })();
    if let Some(e) = objective.failure.lock().expect("failure lock").take() {
        return Err(e);
    }
    let swarm = outcome?;

    let mut records = objective.records.into_inner().expect("records lock");
    records.sort_by_key(|r| (r.eval.outer_iter, r.eval.particle));

    let trace = assemble_trace(&records, outer.max_iterations);
    let best = records
        .iter()
        .fold(None::<&Record>, |acc, r| match acc {
            Some(b) if b.search.best_mse <= r.search.best_mse => Some(b),
            _ => Some(r),
        })
        .expect("at least one architecture evaluated");
    let final_swarm = swarm
        .particles
        .iter()
        .map(|p| ArchitectureParticle {
            position: p.position[0],
            velocity: p.velocity[0],
            pbest_position: p.pbest_position[0],
            pbest_fitness: p.pbest_fitness,
            decoded_hidden: decode_architecture(
                p.position[0],
                config.hidden_low,
                config.hidden_high,
            ),
        })
        .collect();
    Ok(TrainedModel {
        topology: best.search.weights.topology(),
        weights: best.search.weights.clone(),
        train_mse: best.search.best_mse,
        inner_evaluations: records.iter().map(|r| r.search.evaluations).sum(),
        evaluations: records.iter().map(|r| r.eval.clone()).collect(),
        trace,
        final_swarm,
    })
}

fn assemble_trace(records: &[Record], outer_iterations: usize) -> Vec<TraceRow> {
    let mut rows = Vec::new();
    let mut best = (f64::INFINITY, 0usize);
    for outer_iter in 0..=outer_iterations {
        let leader = records
            .iter()
            .filter(|r| r.eval.outer_iter == outer_iter)
            .fold(None::<&Record>, |acc, r| match acc {
                Some(b) if b.search.best_mse <= r.search.best_mse => Some(b),
                _ => Some(r),
            });
        let Some(leader) = leader else { continue };
        for (i, &mse) in leader.search.trace.iter().enumerate() {
            let (best_mse, hidden_count) = if mse < best.0 {
                (mse, leader.eval.hidden)
            } else {
                best
            };
            rows.push(TraceRow {
                outer_iter,
                inner_iter: i + 1,
                hidden_count,
                best_mse,
            });
        }
        if leader.search.best_mse < best.0 {
            best = (leader.search.best_mse, leader.eval.hidden);
        }
    }
    rows
}
