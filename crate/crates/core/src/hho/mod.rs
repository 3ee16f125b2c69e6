//! Harris Hawks Optimization: population-based continuous minimization with
//! a decaying escaping-energy phase switch, four besiege variants, and
//! Lévy-flight rapid dives.
//!
//! Each hawk's random draws in each iteration come from a substream keyed by
//! (seed, iteration, hawk index), so evaluating hawks in parallel gives the
//! same trajectory as evaluating them serially.

pub mod binary;

pub use binary::{
    binarize, select_features, FeatureMask, FitnessParams, KnnEvaluator, SelectionError,
    SelectionResult, SubsetEvaluator, SubsetFitness,
};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{stream_rng, SubRng};

#[derive(Debug, Error)]
pub enum HhoError {
    #[error("population needs at least 2 hawks, got {0}")]
    TooFewHawks(usize),
    #[error("iteration count must be at least 1")]
    NoIterations,
    #[error("levy beta must lie in (1, 2], got {0}")]
    BadBeta(f64),
    #[error("bounds must satisfy lower < upper in every dimension")]
    BadBounds,
    #[error("dimension must be at least 1")]
    ZeroDim,
}

/// Search parameters. Defaults follow the reported configuration: 30 hawks,
/// 50 iterations, Lévy exponent 1.5.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HhoParams {
    pub n_hawks: usize,
    pub n_iterations: usize,
    pub levy_beta: f64,
    /// per-dimension (lower, upper)
    pub bounds: Vec<(f64, f64)>,
    pub seed: u64,
}

impl HhoParams {
    pub fn uniform_bounds(lower: f64, upper: f64, dim: usize, seed: u64) -> HhoParams {
        HhoParams {
            n_hawks: 30,
            n_iterations: 50,
            levy_beta: 1.5,
            bounds: vec![(lower, upper); dim],
            seed,
        }
    }

    fn validate(&self, dim: usize) -> Result<(), HhoError> {
        if dim == 0 {
            return Err(HhoError::ZeroDim);
        }
        if self.n_hawks < 2 {
            return Err(HhoError::TooFewHawks(self.n_hawks));
        }
        if self.n_iterations < 1 {
            return Err(HhoError::NoIterations);
        }
        if !(self.levy_beta > 1.0 && self.levy_beta <= 2.0) {
            return Err(HhoError::BadBeta(self.levy_beta));
        }
        // written as a negated `<` so NaN bounds also fail validation
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if self.bounds.len() != dim || self.bounds.iter().any(|(lo, hi)| !(lo < hi)) {
            return Err(HhoError::BadBounds);
        }
        Ok(())
    }
}

/// One candidate solution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Hawk {
    pub position: Vec<f64>,
    pub fitness: f64,
}

/// Population state across iterations. `rabbit` is the best-ever solution;
/// `history` records its fitness after every iteration and is monotone
/// non-increasing.
#[derive(Debug, Clone)]
pub struct HawkPopulation {
    pub hawks: Vec<Hawk>,
    pub rabbit: Hawk,
    pub iteration: usize,
    pub history: Vec<f64>,
}

/// Objective under minimization. The RNG argument carries the per-hawk
/// per-iteration substream; deterministic objectives simply ignore it.
pub trait Objective: Sync {
    fn eval(&self, x: &[f64], rng: &mut SubRng) -> f64;
}

impl<F: Fn(&[f64]) -> f64 + Sync> Objective for F {
    fn eval(&self, x: &[f64], _rng: &mut SubRng) -> f64 {
        self(x)
    }
}

fn sanitize(fitness: f64) -> f64 {
    if fitness.is_finite() {
        fitness
    } else {
        f64::INFINITY
    }
}

/// Escaping energy `2*E0*(1 - t/T)`.
///
/// Panics if `t > T`: the schedule is only defined inside the run.
pub fn escaping_energy(e0: f64, t: usize, total: usize) -> f64 {
    assert!(total >= 1, "iteration budget must be positive");
    assert!(t <= total, "iteration {t} beyond budget {total}");
    2.0 * e0 * (1.0 - t as f64 / total as f64)
}

/// Lanczos approximation of the gamma function for positive arguments.
fn gamma(x: f64) -> f64 {
    // published g=7, n=9 coefficients, kept digit-for-digit
    #[allow(clippy::excessive_precision)]
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    const PI: f64 = std::f64::consts::PI;
    if x < 0.5 {
        PI / ((PI * x).sin() * gamma(1.0 - x))
    } else {
        let x = x - 1.0;
        let t = x + 7.5;
        let mut acc = COEF[0];
        for (i, c) in COEF.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
    }
}

/// Scale factor of the Lévy-stable step approximation.
pub fn levy_sigma(beta: f64) -> f64 {
    let num = gamma(1.0 + beta) * (std::f64::consts::PI * beta / 2.0).sin();
    let den = gamma((1.0 + beta) / 2.0) * beta * 2f64.powf((beta - 1.0) / 2.0);
    (num / den).powf(1.0 / beta)
}

/// One Lévy-flight step: component-wise `0.01 * sigma * u / |v|^(1/beta)`
/// with `u, v` standard normal.
pub fn levy_step(dim: usize, beta: f64, rng: &mut SubRng) -> Vec<f64> {
    let sigma = levy_sigma(beta);
    (0..dim)
        .map(|_| {
            let u: f64 = StandardNormal.sample(rng);
            let v: f64 = StandardNormal.sample(rng);
            0.01 * sigma * u / v.abs().powf(1.0 / beta)
        })
        .collect()
}

fn clamp_to_bounds(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, (lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(*lo, *hi);
    }
}

// The four movement rules, kept as pure functions of their inputs.

fn explore_around_rand(x: &[f64], x_rand: &[f64], r1: f64, r2: f64) -> Vec<f64> {
    x_rand
        .iter()
        .zip(x)
        .map(|(xr, xi)| xr - r1 * (xr - 2.0 * r2 * xi).abs())
        .collect()
}

fn explore_from_mean(
    rabbit: &[f64],
    mean: &[f64],
    bounds: &[(f64, f64)],
    r3: f64,
    r4: f64,
) -> Vec<f64> {
    rabbit
        .iter()
        .zip(mean)
        .zip(bounds)
        .map(|((rb, m), (lo, hi))| (rb - m) - r3 * (lo + r4 * (hi - lo)))
        .collect()
}

fn soft_besiege(rabbit: &[f64], x: &[f64], energy: f64, jump: f64) -> Vec<f64> {
    rabbit
        .iter()
        .zip(x)
        .map(|(rb, xi)| (rb - xi) - energy * (jump * rb - xi).abs())
        .collect()
}

fn hard_besiege(rabbit: &[f64], x: &[f64], energy: f64) -> Vec<f64> {
    rabbit
        .iter()
        .zip(x)
        .map(|(rb, xi)| rb - energy * (rb - xi).abs())
        .collect()
}

fn dive_target(rabbit: &[f64], reference: &[f64], energy: f64, jump: f64) -> Vec<f64> {
    rabbit
        .iter()
        .zip(reference)
        .map(|(rb, re)| rb - energy * (jump * rb - re).abs())
        .collect()
}

/// Initialize hawks uniformly within bounds and evaluate them.
pub fn init_population(
    objective: &impl Objective,
    dim: usize,
    params: &HhoParams,
) -> Result<HawkPopulation, HhoError> {
    params.validate(dim)?;
    let hawks: Vec<Hawk> = (0..params.n_hawks)
        .into_par_iter()
        .map(|i| {
            let mut pos_rng = stream_rng(params.seed, "hho_init", &[i as u64]);
            let position: Vec<f64> = params
                .bounds
                .iter()
                .map(|(lo, hi)| pos_rng.gen_range(*lo..*hi))
                .collect();
            let mut eval_rng = stream_rng(params.seed, "hho_eval", &[0, i as u64]);
            let fitness = sanitize(objective.eval(&position, &mut eval_rng));
            Hawk { position, fitness }
        })
        .collect();
    let rabbit = hawks
        .iter()
        .min_by(|a, b| a.fitness.total_cmp(&b.fitness))
        .expect("n_hawks >= 2")
        .clone();
    Ok(HawkPopulation {
        hawks,
        rabbit,
        iteration: 0,
        history: Vec::new(),
    })
}

/// Advance the population by one iteration.
///
/// Every hawk reads the same iteration-start snapshot (rabbit, population
/// mean, random peer), proposes a move by its phase rule, and is re-evaluated
/// on the clamped position; the dive phases accept a candidate only if it
/// improves on the hawk's current fitness. The rabbit updates greedily.
pub fn hho_step(pop: &mut HawkPopulation, objective: &impl Objective, params: &HhoParams) {
    let t = pop.iteration;
    let total = params.n_iterations;
    // 1-based schedule: the final iteration runs at zero energy
    let round = (t + 1).min(total);
    let dim = params.bounds.len();

    let mean: Vec<f64> = (0..dim)
        .map(|j| pop.hawks.iter().map(|h| h.position[j]).sum::<f64>() / pop.hawks.len() as f64)
        .collect();
    let rabbit = pop.rabbit.clone();
    let snapshot: Vec<Hawk> = pop.hawks.clone();

    let next: Vec<Hawk> = (0..snapshot.len())
        .into_par_iter()
        .map(|i| {
            let current = &snapshot[i];
            let mut rng = stream_rng(params.seed, "hho_move", &[round as u64, i as u64]);
            let fresh_eval_rng = || stream_rng(params.seed, "hho_eval", &[round as u64, i as u64]);
            let e0: f64 = rng.gen_range(-1.0..1.0);
            let energy = escaping_energy(e0, round, total);

            let evaluate = |mut position: Vec<f64>| -> Hawk {
                clamp_to_bounds(&mut position, &params.bounds);
                let fitness = sanitize(objective.eval(&position, &mut fresh_eval_rng()));
                Hawk { position, fitness }
            };

            if energy.abs() >= 1.0 {
                let q: f64 = rng.gen();
                if q >= 0.5 {
                    let peer = &snapshot[rng.gen_range(0..snapshot.len())].position;
                    let (r1, r2) = (rng.gen(), rng.gen());
                    evaluate(explore_around_rand(&current.position, peer, r1, r2))
                } else {
                    let (r3, r4) = (rng.gen(), rng.gen());
                    evaluate(explore_from_mean(
                        &rabbit.position,
                        &mean,
                        &params.bounds,
                        r3,
                        r4,
                    ))
                }
            } else {
                let r: f64 = rng.gen();
                let jump = 2.0 * (1.0 - rng.gen::<f64>());
                if r >= 0.5 && energy.abs() >= 0.5 {
                    evaluate(soft_besiege(&rabbit.position, &current.position, energy, jump))
                } else if r >= 0.5 {
                    evaluate(hard_besiege(&rabbit.position, &current.position, energy))
                } else {
                    // progressive rapid dives; greedy acceptance
                    let reference = if energy.abs() >= 0.5 {
                        current.position.clone()
                    } else {
                        mean.clone()
                    };
                    let dive = evaluate(dive_target(&rabbit.position, &reference, energy, jump));
                    if dive.fitness < current.fitness {
                        dive
                    } else {
                        let scale: Vec<f64> = (0..dim).map(|_| rng.gen()).collect();
                        let levy = levy_step(dim, params.levy_beta, &mut rng);
                        let position = dive
                            .position
                            .iter()
                            .zip(&scale)
                            .zip(&levy)
                            .map(|((y, s), l)| y + s * l)
                            .collect();
                        let levy_hawk = evaluate(position);
                        if levy_hawk.fitness < current.fitness {
                            levy_hawk
                        } else {
                            current.clone()
                        }
                    }
                }
            }
        })
        .collect();

    pop.hawks = next;
    if let Some(best) = pop
        .hawks
        .iter()
        .min_by(|a, b| a.fitness.total_cmp(&b.fitness))
    {
        if best.fitness < pop.rabbit.fitness {
            pop.rabbit = best.clone();
        }
    }
    pop.iteration += 1;
    pop.history.push(pop.rabbit.fitness);
}

/// Outcome of a full optimization run.
#[derive(Debug, Clone)]
pub struct HhoResult {
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
    pub history: Vec<f64>,
}

/// Run the full loop: uniform initialization, then `n_iterations` steps.
pub fn minimize(
    objective: &impl Objective,
    dim: usize,
    params: &HhoParams,
) -> Result<HhoResult, HhoError> {
    let mut pop = init_population(objective, dim, params)?;
    for _ in 0..params.n_iterations {
        hho_step(&mut pop, objective, params);
    }
    Ok(HhoResult {
        best_position: pop.rabbit.position,
        best_fitness: pop.rabbit.fitness,
        history: pop.history,
    })
}
