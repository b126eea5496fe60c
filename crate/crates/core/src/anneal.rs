//! Simulated-annealing acceptance gate and the velocity rule that is
//! repelled by each particle's last accepted worse point.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::pso::{check_dims, draw_unit_vector, Particle, PsoConfig, StepRule};

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealConfig {
    /// Initial temperature.
    pub t0: f64,
    /// Cooling multiplier applied once per iteration, in `(0, 1)`.
    pub frac: f64,
    /// Boltzmann-style constant in `exp(-dE / (K T))`.
    pub k_const: f64,
    /// Weight of the bad-experience (repulsion) term.
    pub c3: f64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        Self {
            t0: 1.0,
            frac: 0.95,
            k_const: 1.0,
            c3: 1.4960,
        }
    }
}

impl AnnealConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return Err(Error::invalid("t0", format!("{} is not positive", self.t0)));
        }
        check_frac(self.frac)?;
        if !(self.k_const > 0.0 && self.k_const.is_finite()) {
            return Err(Error::invalid(
                "k_const",
                format!("{} is not positive", self.k_const),
            ));
        }
        if !(self.c3 >= 0.0 && self.c3.is_finite()) {
            return Err(Error::invalid(
                "c3",
                format!("{} is negative or not finite", self.c3),
            ));
        }
        Ok(())
    }
}

fn check_frac(frac: f64) -> Result<()> {
    if frac > 0.0 && frac < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("frac", format!("{frac} is outside (0, 1)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Temperature {
    pub current: f64,
    pub step_count: u32,
}

impl Temperature {
    pub fn new(t0: f64) -> Self {
        Self {
            current: t0,
            step_count: 0,
        }
    }
}

pub fn cool(temperature: Temperature, frac: f64) -> Result<Temperature> {
    check_frac(frac)?;
    Ok(Temperature {
        current: temperature.current * frac,
        step_count: temperature.step_count + 1,
    })
}

/// Metropolis probability: 1 for non-worsening moves, otherwise
/// `exp(-delta_e / (k_const * temperature))`.
pub fn acceptance_probability(delta_e: f64, temperature: f64, k_const: f64) -> Result<f64> {
    if temperature.is_nan() || temperature <= 0.0 {
        return Err(Error::invalid(
            "temperature",
            format!("{temperature} is not positive"),
        ));
    }
    if delta_e <= 0.0 {
        return Ok(1.0);
    }
    Ok((-delta_e / (k_const * temperature)).exp().min(1.0))
}

/// True iff the acceptance probability exceeds the caller's uniform draw `u`.
pub fn sa_accept(delta_e: f64, temperature: f64, k_const: f64, u: f64) -> Result<bool> {
    Ok(acceptance_probability(delta_e, temperature, k_const)? > u)
}

/// `w*v + c1*r1*(pbest - x) - c3*r3*(pworst - x) + c2*r2*(gbest - x)`,
/// clamped to `±v_max`.
#[allow(clippy::too_many_arguments)]
pub fn update_velocity_improved(
    particle: &Particle,
    gbest: &[f64],
    w: f64,
    c1: f64,
    c2: f64,
    c3: f64,
    r1: &[f64],
    r2: &[f64],
    r3: &[f64],
    v_max: f64,
) -> Result<Vec<f64>> {
    let d = particle.dimension();
    check_dims("velocity", d, particle.velocity.len())?;
    check_dims("personal best", d, particle.pbest_position.len())?;
    check_dims("personal worst", d, particle.pworst_position.len())?;
    check_dims("global best", d, gbest.len())?;
    check_dims("r1", d, r1.len())?;
    check_dims("r2", d, r2.len())?;
    check_dims("r3", d, r3.len())?;
    Ok(improved_velocity(
        particle, gbest, w, c1, c2, c3, r1, r2, r3, v_max,
    ))
}

#[allow(clippy::too_many_arguments)]
fn improved_velocity(
    p: &Particle,
    gbest: &[f64],
    w: f64,
    c1: f64,
    c2: f64,
    c3: f64,
    r1: &[f64],
    r2: &[f64],
    r3: &[f64],
    v_max: f64,
) -> Vec<f64> {
    (0..p.dimension())
        .map(|d| {
            let x = p.position[d];
            let v = w * p.velocity[d] + c1 * r1[d] * (p.pbest_position[d] - x)
                - c3 * r3[d] * (p.pworst_position[d] - x)
                + c2 * r2[d] * (gbest[d] - x);
            v.clamp(-v_max, v_max)
        })
        .collect()
}

/// Step rule for the annealed hybrids.
///
/// A strictly better evaluation replaces the personal best. Otherwise a
/// worsening move (relative to the particle's previous evaluation) is
/// offered to the Metropolis gate and, when accepted, becomes the
/// particle's personal worst. Movement is never vetoed. The temperature
/// cools once per iteration.
#[derive(Debug, Clone)]
pub struct AnnealedRule {
    pub c3: f64,
    pub k_const: f64,
    pub frac: f64,
    pub temperature: Temperature,
    pub accepted_worse: u64,
    pub rejected_worse: u64,
}

impl AnnealedRule {
    pub fn new(config: &AnnealConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self::with_c3(config, config.c3))
    }

    /// Same gate with an explicit repulsion weight (0 disables repulsion).
    pub fn with_c3(config: &AnnealConfig, c3: f64) -> Self {
        Self {
            c3,
            k_const: config.k_const,
            frac: config.frac,
            temperature: Temperature::new(config.t0),
            accepted_worse: 0,
            rejected_worse: 0,
        }
    }
}

impl StepRule for AnnealedRule {
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
        let r3 = draw_unit_vector(rng, d);
        improved_velocity(
            particle,
            gbest,
            inertia,
            config.c1,
            config.c2,
            self.c3,
            &r1,
            &r2,
            &r3,
            config.v_max,
        )
    }

    fn observe(&mut self, particle: &mut Particle, fitness: f64, rng: &mut ChaCha8Rng) {
        if fitness < particle.pbest_fitness {
            particle.pbest_fitness = fitness;
            particle.pbest_position.clone_from(&particle.position);
        } else {
            let delta_e = fitness - particle.fitness;
            // non-worsening moves are accepted without consuming a draw
            if delta_e > 0.0 {
                let u: f64 = rng.random();
                let p = (-delta_e / (self.k_const * self.temperature.current)).exp();
                if p > u {
                    particle.pworst_position.clone_from(&particle.position);
                    particle.pworst_fitness = fitness;
                    self.accepted_worse += 1;
                } else {
                    self.rejected_worse += 1;
                }
            }
        }
        particle.fitness = fitness;
    }

    fn end_iteration(&mut self) {
        self.temperature = Temperature {
            current: self.temperature.current * self.frac,
            step_count: self.temperature.step_count + 1,
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pso::update_velocity;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn particle(x: f64, v: f64, pbest: f64, pworst: f64) -> Particle {
        Particle {
            position: vec![x],
            velocity: vec![v],
            fitness: 0.0,
            pbest_position: vec![pbest],
            pbest_fitness: 0.0,
            pworst_position: vec![pworst],
            pworst_fitness: 0.0,
        }
    }

    #[test]
    fn probability_examples() {
        assert_eq!(acceptance_probability(0.0, 1.0, 1.0).unwrap(), 1.0);
        assert_eq!(acceptance_probability(-0.5, 1.0, 1.0).unwrap(), 1.0);
        let p = acceptance_probability(1.0, 1.0, 1.0).unwrap();
        assert!((p - 0.367_879_441_171_442_3).abs() < 1e-15);
        assert!(acceptance_probability(1.0, 0.0, 1.0).is_err());
        assert!(acceptance_probability(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn accept_examples() {
        assert!(sa_accept(0.0, 1.0, 1.0, 0.999).unwrap());
        assert!(!sa_accept(1.0, 1.0, 1.0, 0.5).unwrap());
        assert!(sa_accept(1.0, 1.0, 1.0, 0.1).unwrap());
    }

    #[test]
    fn cooling() {
        let t = cool(Temperature::new(1.0), 0.95).unwrap();
        assert_eq!((t.current, t.step_count), (0.95, 1));
        let t = cool(t, 0.95).unwrap();
        assert!((t.current - 0.9025).abs() < 1e-15);
        assert!(cool(t, 1.0).is_err());
        assert!(cool(t, 0.0).is_err());
        let mut t = Temperature::new(1.0);
        for _ in 0..500 {
            let next = cool(t, 0.95).unwrap();
            assert!(next.current < t.current && next.current > 0.0);
            t = next;
        }
    }

    #[test]
    fn improved_scalar_case() {
        // pbest - x = 0.2, pworst - x = -0.3, gbest - x = 0.4
        let p = particle(0.0, 0.1, 0.2, -0.3);
        let v =
            update_velocity_improved(&p, &[0.4], 0.8, 1.0, 1.0, 1.0, &[1.0], &[1.0], &[1.0], 5.0)
                .unwrap();
        let expected = 0.8 * 0.1 + 0.2 - (-0.3) + 0.4;
        assert!((v[0] - 0.98).abs() < 1e-12);
        assert!((v[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn improved_fixed_point_and_clamp() {
        let p = particle(0.7, 0.0, 0.7, 0.7);
        let v =
            update_velocity_improved(&p, &[0.7], 0.8, 1.5, 1.5, 1.5, &[0.3], &[0.9], &[0.4], 1.0)
                .unwrap();
        assert_eq!(v, vec![0.0]);
        let p = particle(0.0, 3.0, 2.0, -2.0);
        let v =
            update_velocity_improved(&p, &[2.0], 0.8, 1.5, 1.5, 1.5, &[1.0], &[1.0], &[1.0], 0.8)
                .unwrap();
        assert_eq!(v, vec![0.8]);
        assert!(
            update_velocity_improved(&p, &[2.0], 0.8, 1.5, 1.5, 1.5, &[1.0], &[1.0], &[], 0.8)
                .is_err()
        );
    }

    #[test]
    fn gate_records_worse_points_only() {
        let cfg = AnnealConfig::default();
        let mut rule = AnnealedRule::new(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p = particle(0.5, 0.0, 0.5, 0.5);
        p.fitness = 0.3;
        p.pbest_fitness = 0.2;
        p.pworst_fitness = 0.3;
        // better than pbest
        p.position = vec![0.6];
        rule.observe(&mut p, 0.1, &mut rng);
        assert_eq!((p.pbest_position[0], p.pbest_fitness), (0.6, 0.1));
        assert_eq!(p.pworst_position, vec![0.5]);
        // worse than previous with a tiny dE at T = 1 is accepted almost surely
        p.position = vec![0.9];
        rule.observe(&mut p, 0.1 + 1e-9, &mut rng);
        assert_eq!(p.pworst_position, vec![0.9]);
        assert_eq!(rule.accepted_worse, 1);
        // not better than pbest but better than previous: no draw, no update
        let before = rng.clone();
        p.position = vec![1.0];
        p.fitness = 0.5;
        rule.observe(&mut p, 0.4, &mut rng);
        assert_eq!(p.pworst_position, vec![0.9]);
        assert_eq!(rng, before);
        assert_eq!(p.fitness, 0.4);
    }

    #[test]
    fn rule_cools_per_iteration() {
        let mut rule = AnnealedRule::new(&AnnealConfig::default()).unwrap();
        rule.end_iteration();
        rule.end_iteration();
        assert!((rule.temperature.current - 0.9025).abs() < 1e-15);
        assert_eq!(rule.temperature.step_count, 2);
    }

    #[test]
    fn invalid_config() {
        let cfg = AnnealConfig {
            frac: 1.0,
            ..AnnealConfig::default()
        };
        assert!(AnnealedRule::new(&cfg).is_err());
        let cfg = AnnealConfig {
            c3: -0.1,
            ..AnnealConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    fn operands() -> impl Strategy<Value = (Vec<f64>, f64, f64, f64)> {
        (1usize..6).prop_flat_map(|d| {
            (
                prop::collection::vec(-2.0f64..2.0, d * 8),
                0.0f64..1.0,
                0.0f64..3.0,
                0.1f64..2.0,
            )
        })
    }

    proptest! {
        #[test]
        fn zero_c3_matches_standard_bitwise((buf, w, c, vmax) in operands()) {
            let d = buf.len() / 8;
            let part = |k: usize| buf[k * d..(k + 1) * d].to_vec();
            let unit = |k: usize| part(k).iter().map(|v| (v + 2.0) / 4.0).collect::<Vec<_>>();
            let p = Particle {
                position: part(0),
                velocity: part(1),
                fitness: 0.0,
                pbest_position: part(2),
                pbest_fitness: 0.0,
                pworst_position: part(3),
                pworst_fitness: 0.0,
            };
            let g = part(4);
            let (r1, r2, r3) = (unit(5), unit(6), unit(7));
            let cfg = PsoConfig {
                c1: c,
                c2: c,
                v_max: vmax,
                ..PsoConfig::default()
            };
            let a = update_velocity(&p, &g, w, &cfg, &r1, &r2).unwrap();
            let b = update_velocity_improved(&p, &g, w, c, c, 0.0, &r1, &r2, &r3, vmax).unwrap();
            prop_assert_eq!(
                a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
        }

        #[test]
        fn probability_monotone(d1 in 0.0f64..5.0, d2 in 0.0f64..5.0, t1 in 0.01f64..5.0, t2 in 0.01f64..5.0) {
            let (dl, dh) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
            prop_assert!(acceptance_probability(dl, t1, 1.0).unwrap() >= acceptance_probability(dh, t1, 1.0).unwrap());
            let (tl, th) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
            let d = dh.max(1e-3);
            prop_assert!(acceptance_probability(d, tl, 1.0).unwrap() <= acceptance_probability(d, th, 1.0).unwrap());
        }
    }
}
