//! Bounded particle swarm minimization.
//!
//! Update rule per particle `i`:
//!
//! ```text
//! V_i(k+1) = e V_i(k) + c1 r1 (h_i(k) - U_i(k)) + c2 r2 (g(k) - U_i(k))
//! U_i(k+1) = U_i(k) + V_i(k+1)
//! ```
//!
//! `r1`, `r2` are scalars drawn once per particle per step. Positions leaving the box are
//! clamped and the offending velocity component is zeroed.
//!
//! Random stream order (ChaCha8 seeded from `seed`): at initialization, for each particle in
//! index order, all position coordinates then all velocity coordinates; at each step, for each
//! particle in index order, `r1` then `r2`. Fitness evaluation happens after all draws, so the
//! execution mode cannot change results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::Exec;

#[derive(Clone, Debug, PartialEq)]
pub struct PsoConfig {
    pub swarm_size: usize,
    /// Inertia weight `e` in `[0, 1]`.
    pub inertia: f64,
    pub c1: f64,
    pub c2: f64,
    pub max_iter: usize,
    /// Stop once the global best is at or below this value.
    pub target: f64,
    pub seed: u64,
    /// Per-dimension `(lo, hi)` search box.
    pub bounds: Vec<(f64, f64)>,
    pub exec: Exec,
}

impl PsoConfig {
    /// Swarm of 300, `e = 0.9`, `c1 = c2 = 2`, at most 2000 iterations, target 0.1.
    pub fn new(bounds: Vec<(f64, f64)>) -> Self {
        Self {
            swarm_size: 300,
            inertia: 0.9,
            c1: 2.0,
            c2: 2.0,
            max_iter: 2000,
            target: 0.1,
            seed: 0,
            bounds,
            exec: Exec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.swarm_size < 2 {
            return bad(format!("swarm size {} < 2", self.swarm_size));
        }
        if !(0.0..=1.0).contains(&self.inertia) {
            return bad(format!("inertia {} outside [0, 1]", self.inertia));
        }
        if !(self.c1 >= 0.0 && self.c2 >= 0.0) {
            return bad("acceleration constants must be non-negative".into());
        }
        if self.bounds.is_empty() {
            return bad("empty search box".into());
        }
        if let Some((lo, hi)) = self
            .bounds
            .iter()
            .find(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi))
        {
            return bad(format!("bad bound [{lo}, {hi}]"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SwarmState {
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub personal_best: Vec<Vec<f64>>,
    pub personal_best_value: Vec<f64>,
    pub global_best: Vec<f64>,
    pub global_best_value: f64,
    pub iteration: usize,
    /// Global best value after initialization and after every step.
    pub history: Vec<f64>,
    rng: ChaCha8Rng,
}

#[derive(Clone, Debug)]
pub struct PsoOutcome {
    pub best_position: Vec<f64>,
    pub best_value: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
}

fn evaluate_all<F>(positions: &[Vec<f64>], fitness: &F, exec: Exec) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let values = exec.map(positions, |p| fitness(p));
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::FitnessDomain {
            particle: i,
            value: values[i],
        }),
        None => Ok(values),
    }
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

impl SwarmState {
    pub fn initialize<F>(cfg: &PsoConfig, fitness: &F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut positions = Vec::with_capacity(cfg.swarm_size);
        let mut velocities = Vec::with_capacity(cfg.swarm_size);
        for _ in 0..cfg.swarm_size {
            let pos: Vec<f64> = cfg.bounds.iter().map(|&(lo, hi)| rng.random_range(lo..hi)).collect();
            let vel: Vec<f64> = cfg
                .bounds
                .iter()
                .map(|&(lo, hi)| {
                    let span = 0.1 * (hi - lo);
                    rng.random_range(-span..span)
                })
                .collect();
            positions.push(pos);
            velocities.push(vel);
        }
        let values = evaluate_all(&positions, fitness, cfg.exec)?;
        let best = argmin(&values);
        Ok(Self {
            global_best: positions[best].clone(),
            global_best_value: values[best],
            personal_best: positions.clone(),
            personal_best_value: values,
            positions,
            velocities,
            iteration: 0,
            history: vec![],
            rng,
        }
        .with_history())
    }

    fn with_history(mut self) -> Self {
        self.history.push(self.global_best_value);
        self
    }

    /// Replaces positions and velocities, re-evaluating the bests. Used to set up states by hand.
    pub fn from_parts<F>(
        cfg: &PsoConfig,
        positions: Vec<Vec<f64>>,
        velocities: Vec<Vec<f64>>,
        fitness: &F,
    ) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        cfg.validate()?;
        let values = evaluate_all(&positions, fitness, cfg.exec)?;
        let best = argmin(&values);
        Ok(Self {
            global_best: positions[best].clone(),
            global_best_value: values[best],
            personal_best: positions.clone(),
            personal_best_value: values,
            positions,
            velocities,
            iteration: 0,
            history: vec![],
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        }
        .with_history())
    }
}

/// One synchronous update of every particle.
pub fn pso_step<F>(mut state: SwarmState, cfg: &PsoConfig, fitness: &F) -> Result<SwarmState>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let draws: Vec<(f64, f64)> = (0..state.positions.len())
        .map(|_| (state.rng.random::<f64>(), state.rng.random::<f64>()))
        .collect();
    let global = state.global_best.clone();
    for (i, &(r1, r2)) in draws.iter().enumerate() {
        let pos = &mut state.positions[i];
        let vel = &mut state.velocities[i];
        let pbest = &state.personal_best[i];
        for d in 0..pos.len() {
            let v = cfg.inertia * vel[d]
                + cfg.c1 * r1 * (pbest[d] - pos[d])
                + cfg.c2 * r2 * (global[d] - pos[d]);
            let (lo, hi) = cfg.bounds[d];
            let x = pos[d] + v;
            if x < lo {
                pos[d] = lo;
                vel[d] = 0.0;
            } else if x > hi {
                pos[d] = hi;
                vel[d] = 0.0;
            } else {
                pos[d] = x;
                vel[d] = v;
            }
        }
    }
    let values = evaluate_all(&state.positions, fitness, cfg.exec)?;
    for (i, &v) in values.iter().enumerate() {
        if v < state.personal_best_value[i] {
            state.personal_best_value[i] = v;
            state.personal_best[i] = state.positions[i].clone();
        }
    }
    let best = argmin(&state.personal_best_value);
    if state.personal_best_value[best] < state.global_best_value {
        state.global_best_value = state.personal_best_value[best];
        state.global_best = state.personal_best[best].clone();
    }
    state.iteration += 1;
    state.history.push(state.global_best_value);
    Ok(state)
}

/// Steps until the global best reaches `cfg.target` or `cfg.max_iter` steps have run.
/// A best value above the target signals non-convergence.
pub fn pso_minimize<F>(fitness: F, cfg: &PsoConfig) -> Result<PsoOutcome>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mut state = SwarmState::initialize(cfg, &fitness)?;
    while state.global_best_value > cfg.target && state.iteration < cfg.max_iter {
        state = pso_step(state, cfg, &fitness)?;
    }
    Ok(PsoOutcome {
        best_position: state.global_best,
        best_value: state.global_best_value,
        iterations: state.iteration,
        history: state.history,
    })
}

/// Iteration/best-fitness rows, header included.
pub fn history_csv(history: &[f64]) -> String {
    let mut out = String::from("iteration,best_fitness\n");
    for (i, v) in history.iter().enumerate() {
        out.push_str(&format!("{i},{v:e}\n"));
    }
    out
}
