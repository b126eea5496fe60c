//! Global-best particle swarm optimizer over a box, with geometric inertia
//! decay and per-component velocity clamping. Minimizes.
//!
//! The per-particle movement and bookkeeping rules are pluggable through
//! [`StepRule`] so that the annealing hybrids reuse the same loop.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Acceleration factors used for both swarms by default.
pub const DEFAULT_ACCELERATION: f64 = 1.4960;
pub const DEFAULT_INERTIA: f64 = 0.8;
pub const DEFAULT_INERTIA_DECAY: f64 = 0.9;
/// Default clamp magnitude as a fraction of the box width.
pub const V_MAX_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct PsoConfig {
    pub swarm_size: usize,
    pub max_iterations: usize,
    /// Cognitive factor.
    pub c1: f64,
    /// Social factor.
    pub c2: f64,
    /// Initial inertia.
    pub w0: f64,
    /// Per-iteration inertia multiplier.
    pub w_decay: f64,
    pub space_low: f64,
    pub space_high: f64,
    pub v_max: f64,
    pub seed: u64,
}

impl PsoConfig {
    /// A config over `[low, high]` with the default factors and clamp.
    pub fn with_box(swarm_size: usize, max_iterations: usize, low: f64, high: f64) -> Self {
        Self {
            swarm_size,
            max_iterations,
            c1: DEFAULT_ACCELERATION,
            c2: DEFAULT_ACCELERATION,
            w0: DEFAULT_INERTIA,
            w_decay: DEFAULT_INERTIA_DECAY,
            space_low: low,
            space_high: high,
            v_max: default_v_max(low, high),
            seed: 0,
        }
    }

    /// Weight-search defaults: 50 particles, 2000 iterations, box `[-2, 2]`.
    pub fn weight_search() -> Self {
        Self::with_box(50, 2000, -2.0, 2.0)
    }

    /// Architecture-search defaults: 20 particles, 15 iterations, box `[7, 30]`.
    pub fn architecture_search() -> Self {
        Self::with_box(20, 15, 7.0, 30.0)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.swarm_size == 0 {
            return Err(Error::invalid("swarm_size", "must be at least 1"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations", "must be at least 1"));
        }
        if !(self.c1 >= 0.0 && self.c1.is_finite()) {
            return Err(Error::invalid(
                "c1",
                format!("{} is negative or not finite", self.c1),
            ));
        }
        if !(self.c2 >= 0.0 && self.c2.is_finite()) {
            return Err(Error::invalid(
                "c2",
                format!("{} is negative or not finite", self.c2),
            ));
        }
        if !self.w0.is_finite() {
            return Err(Error::invalid("w0", "must be finite"));
        }
        if !(self.w_decay > 0.0 && self.w_decay <= 1.0) {
            return Err(Error::invalid(
                "w_decay",
                format!("{} is outside (0, 1]", self.w_decay),
            ));
        }
        if !(self.space_low.is_finite() && self.space_high.is_finite())
            || self.space_low >= self.space_high
        {
            return Err(Error::invalid(
                "space_low",
                format!("box [{}, {}] is empty", self.space_low, self.space_high),
            ));
        }
        if !(self.v_max > 0.0 && self.v_max.is_finite()) {
            return Err(Error::invalid(
                "v_max",
                format!("{} is not positive", self.v_max),
            ));
        }
        Ok(())
    }
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self::weight_search()
    }
}

pub fn default_v_max(low: f64, high: f64) -> f64 {
    V_MAX_FRACTION * (high - low)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    /// Fitness at `position`, i.e. the most recent evaluation.
    pub fitness: f64,
    pub pbest_position: Vec<f64>,
    pub pbest_fitness: f64,
    /// Last accepted worse point; only the improved velocity rule reads it.
    pub pworst_position: Vec<f64>,
    pub pworst_fitness: f64,
}

impl Particle {
    pub fn new(position: Vec<f64>, velocity: Vec<f64>, fitness: f64) -> Self {
        Self {
            pbest_position: position.clone(),
            pworst_position: position.clone(),
            position,
            velocity,
            fitness,
            pbest_fitness: fitness,
            pworst_fitness: fitness,
        }
    }

    pub fn dimension(&self) -> usize {
        self.position.len()
    }
}

/// Where an evaluation happens: iteration 0 is initialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalSite {
    pub iteration: usize,
    pub particle: usize,
}

/// Fitness to minimize. Plain closures ignore the evaluation site.
pub trait Objective: Sync {
    fn evaluate(&self, position: &[f64], site: EvalSite) -> f64;
}

impl<F> Objective for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn evaluate(&self, position: &[f64], _site: EvalSite) -> f64 {
        self(position)
    }
}

/// Movement and memory rules applied to each particle during a step.
pub trait StepRule {
    /// New velocity for `particle`, already clamped.
    fn velocity(
        &mut self,
        particle: &Particle,
        gbest: &[f64],
        inertia: f64,
        config: &PsoConfig,
        rng: &mut ChaCha8Rng,
    ) -> Vec<f64>;

    /// Records a fresh evaluation at the particle's (already moved) position.
    fn observe(&mut self, particle: &mut Particle, fitness: f64, rng: &mut ChaCha8Rng);

    /// Called once after every particle has been observed.
    fn end_iteration(&mut self) {}
}

/// Standard velocity rule and strict-improvement personal best.
#[derive(Debug, Clone, Copy, Default)]
pub struct StandardRule;

pub(crate) fn draw_unit_vector(rng: &mut ChaCha8Rng, dimension: usize) -> Vec<f64> {
    (0..dimension).map(|_| rng.random::<f64>()).collect()
}

/// Replaces the personal best on strict improvement; always records the
/// latest fitness.
pub fn record_if_better(particle: &mut Particle, fitness: f64) -> bool {
    let improved = fitness < particle.pbest_fitness;
    if improved {
        particle.pbest_fitness = fitness;
        particle.pbest_position.clone_from(&particle.position);
    }
    particle.fitness = fitness;
    improved
}

impl StepRule for StandardRule {
    fn velocity(
        &mut self,
        particle: &Particle,
        gbest: &[f64],
        inertia: f64,
        config: &PsoConfig,
        rng: &mut ChaCha8Rng,
    ) -> Vec<f64> {
        let d = particle.dimension();
        let r1 = draw_unit_vector(rng, d);
        let r2 = draw_unit_vector(rng, d);
        standard_velocity(
            particle,
            gbest,
            inertia,
            config.c1,
            config.c2,
            &r1,
            &r2,
            config.v_max,
        )
    }

    fn observe(&mut self, particle: &mut Particle, fitness: f64, _rng: &mut ChaCha8Rng) {
        record_if_better(particle, fitness);
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn standard_velocity(
    p: &Particle,
    gbest: &[f64],
    w: f64,
    c1: f64,
    c2: f64,
    r1: &[f64],
    r2: &[f64],
    v_max: f64,
) -> Vec<f64> {
    (0..p.dimension())
        .map(|d| {
            let x = p.position[d];
            let v = w * p.velocity[d]
                + c1 * r1[d] * (p.pbest_position[d] - x)
                + c2 * r2[d] * (gbest[d] - x);
            v.clamp(-v_max, v_max)
        })
        .collect()
}

pub(crate) fn check_dims(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        });
    }
    Ok(())
}

/// `w*v + c1*r1*(pbest - x) + c2*r2*(gbest - x)`, clamped to `±v_max`.
pub fn update_velocity(
    particle: &Particle,
    gbest: &[f64],
    w: f64,
    config: &PsoConfig,
    r1: &[f64],
    r2: &[f64],
) -> Result<Vec<f64>> {
    let d = particle.dimension();
    check_dims("velocity", d, particle.velocity.len())?;
    check_dims("personal best", d, particle.pbest_position.len())?;
    check_dims("global best", d, gbest.len())?;
    check_dims("r1", d, r1.len())?;
    check_dims("r2", d, r2.len())?;
    Ok(standard_velocity(
        particle,
        gbest,
        w,
        config.c1,
        config.c2,
        r1,
        r2,
        config.v_max,
    ))
}

/// `x + v`, clamped into the search box.
pub fn update_position(x: &[f64], v: &[f64], config: &PsoConfig) -> Result<Vec<f64>> {
    check_dims("position", x.len(), v.len())?;
    Ok(move_clamped(x, v, config))
}

fn move_clamped(x: &[f64], v: &[f64], config: &PsoConfig) -> Vec<f64> {
    x.iter()
        .zip(v)
        .map(|(xi, vi)| (xi + vi).clamp(config.space_low, config.space_high))
        .collect()
}

#[derive(Debug, Clone)]
pub struct Swarm {
    pub particles: Vec<Particle>,
    pub gbest_position: Vec<f64>,
    pub gbest_fitness: f64,
    pub iteration: usize,
    pub inertia: f64,
    rng: ChaCha8Rng,
}

fn evaluate_all<O: Objective + ?Sized>(
    positions: &[&[f64]],
    objective: &O,
    iteration: usize,
) -> Result<Vec<f64>> {
    let values: Vec<f64> = positions
        .par_iter()
        .enumerate()
        .map(|(particle, x)| {
            objective.evaluate(
                x,
                EvalSite {
                    iteration,
                    particle,
                },
            )
        })
        .collect();
    if let Some((particle, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite {
            value,
            iteration,
            particle,
        });
    }
    Ok(values)
}

impl Swarm {
    /// Random positions in the box, random velocities in `±v_max`, each
    /// particle's memories set to its starting point.
    pub fn init<O: Objective + ?Sized>(
        config: &PsoConfig,
        dimension: usize,
        objective: &O,
    ) -> Result<Self> {
        config.validate()?;
        if dimension == 0 {
            return Err(Error::invalid("dimension", "must be at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut starts = Vec::with_capacity(config.swarm_size);
        for _ in 0..config.swarm_size {
            let x: Vec<f64> = (0..dimension)
                .map(|_| rng.random_range(config.space_low..=config.space_high))
                .collect();
            let v: Vec<f64> = (0..dimension)
                .map(|_| rng.random_range(-config.v_max..=config.v_max))
                .collect();
            starts.push((x, v));
        }
        let positions: Vec<&[f64]> = starts.iter().map(|(x, _)| x.as_slice()).collect();
        let fitness = evaluate_all(&positions, objective, 0)?;
        let particles: Vec<Particle> = starts
            .into_iter()
            .zip(fitness)
            .map(|((x, v), f)| Particle::new(x, v, f))
            .collect();
        let mut swarm = Self {
            gbest_position: particles[0].pbest_position.clone(),
            gbest_fitness: particles[0].pbest_fitness,
            particles,
            iteration: 0,
            inertia: config.w0,
            rng,
        };
        swarm.refresh_gbest();
        Ok(swarm)
    }

    /// Lowest-index particle wins ties; replaces gbest only on strict improvement.
    fn refresh_gbest(&mut self) {
        for p in &self.particles {
            if p.pbest_fitness < self.gbest_fitness {
                self.gbest_fitness = p.pbest_fitness;
                self.gbest_position.clone_from(&p.pbest_position);
            }
        }
    }

    pub fn dimension(&self) -> usize {
        self.gbest_position.len()
    }

    /// One iteration with the standard rule.
    pub fn step<O: Objective + ?Sized>(&mut self, config: &PsoConfig, objective: &O) -> Result<()> {
        self.step_with(config, objective, &mut StandardRule)
    }

    /// Moves every particle, evaluates the new positions, lets `rule`
    /// update the memories, refreshes gbest and decays the inertia.
    pub fn step_with<O, R>(&mut self, config: &PsoConfig, objective: &O, rule: &mut R) -> Result<()>
    where
        O: Objective + ?Sized,
        R: StepRule + ?Sized,
    {
        for i in 0..self.particles.len() {
            let v = rule.velocity(
                &self.particles[i],
                &self.gbest_position,
                self.inertia,
                config,
                &mut self.rng,
            );
            let p = &mut self.particles[i];
            p.position = move_clamped(&p.position, &v, config);
            p.velocity = v;
        }
        let iteration = self.iteration + 1;
        let positions: Vec<&[f64]> = self
            .particles
            .iter()
            .map(|p| p.position.as_slice())
            .collect();
        let fitness = evaluate_all(&positions, objective, iteration)?;
        for (p, f) in self.particles.iter_mut().zip(fitness) {
            rule.observe(p, f, &mut self.rng);
        }
        rule.end_iteration();
        self.refresh_gbest();
        self.inertia *= config.w_decay;
        self.iteration = iteration;
        Ok(())
    }
}

/// Result of a complete optimization run.
#[derive(Debug, Clone, PartialEq)]
pub struct PsoOutcome {
    pub gbest_position: Vec<f64>,
    pub gbest_fitness: f64,
    /// Best-so-far fitness after each iteration.
    pub trace: Vec<f64>,
}

pub fn run<O: Objective + ?Sized>(
    config: &PsoConfig,
    dimension: usize,
    objective: &O,
) -> Result<PsoOutcome> {
    run_with(config, dimension, objective, &mut StandardRule)
}

pub fn run_with<O, R>(
    config: &PsoConfig,
    dimension: usize,
    objective: &O,
    rule: &mut R,
) -> Result<PsoOutcome>
where
    O: Objective + ?Sized,
    R: StepRule + ?Sized,
{
    let mut swarm = Swarm::init(config, dimension, objective)?;
    let mut trace = Vec::with_capacity(config.max_iterations);
    for _ in 0..config.max_iterations {
        swarm.step_with(config, objective, rule)?;
        trace.push(swarm.gbest_fitness);
    }
    Ok(PsoOutcome {
        gbest_position: swarm.gbest_position,
        gbest_fitness: swarm.gbest_fitness,
        trace,
    })
}

/// Writes `iteration,gbest_fitness,inertia` rows, the inertia being the
/// value held by the swarm after that iteration.
pub fn write_trace_csv<W: Write>(out: W, trace: &[f64], config: &PsoConfig) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "gbest_fitness", "inertia"])?;
    let mut inertia = config.w0;
    for (i, f) in trace.iter().enumerate() {
        inertia *= config.w_decay;
        w.write_record([(i + 1).to_string(), f.to_string(), inertia.to_string()])?;
    }
    w.flush()
}
