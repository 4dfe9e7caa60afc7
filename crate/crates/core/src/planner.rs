//! One-step expected free energy planning over fixation points.
//!
//! For a candidate fixation the expected free energy is
//! `G = -(information gain) - (expected utility)`, where the information gain is
//! the mutual information between the blocks in view and their observations,
//! and the utility is the expected log-preference of the predicted "object"
//! bins. Beliefs factorize per block, so both terms are sums over the in-grid
//! cells of the field of view.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Fixation, GridSpec};
use crate::model::{BeliefState, Preferences, SensorModel};

/// Two expected free energies closer than this are treated as tied.
pub const TIE_TOLERANCE: f64 = 1e-10;

/// Evaluation of a single candidate fixation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyEvaluation {
    pub fixation: Fixation,
    /// Expected information gain, in nats.
    pub info_gain: f64,
    /// Expected utility under the preferences, in nats.
    pub utility: f64,
    /// Expected free energy, `-info_gain - utility`.
    pub efe: f64,
}

/// Mutual information between one visible block's presence and its observation, in nats.
pub fn block_info_gain(q: f64, sensor: &SensorModel) -> f64 {
    if q <= 0.0 || q >= 1.0 {
        return 0.0;
    }
    let mut gain = 0.0;
    for object_bin in [false, true] {
        let lik = |present: bool| {
            let p = sensor.p_object(present);
            if object_bin {
                p
            } else {
                1.0 - p
            }
        };
        let joint_present = q * lik(true);
        let joint_absent = (1.0 - q) * lik(false);
        let p_obs = joint_present + joint_absent;
        if p_obs <= 0.0 {
            continue;
        }
        // P(o) * KL[q(s|o) || q(s)] = sum_s P(s, o) ln(q(s|o) / q(s))
        for (joint, marginal) in [(joint_present, q), (joint_absent, 1.0 - q)] {
            if joint > 0.0 {
                gain += joint * (joint / p_obs / marginal).ln();
            }
        }
    }
    gain.max(0.0)
}

/// Evaluates the expected free energy of moving to fixation `p`.
pub fn evaluate_policy(
    belief: &BeliefState,
    p: Fixation,
    sensor: &SensorModel,
    prefs: &Preferences,
    grid: &GridSpec,
) -> Result<PolicyEvaluation> {
    grid.check(p)?;
    check_shapes(belief, prefs, grid)?;
    let q = belief.probabilities();
    Ok(evaluate_with(
        p,
        grid,
        prefs,
        |i| block_info_gain(q[i], sensor),
        |i| sensor.predicted_object(q[i]),
    ))
}

fn check_shapes(belief: &BeliefState, prefs: &Preferences, grid: &GridSpec) -> Result<()> {
    if belief.grid() != grid {
        return Err(Error::InvalidGrid("belief was built for a different grid".into()));
    }
    if prefs.compiled().len() != grid.num_fov_cells() {
        return Err(Error::InvalidGrid(format!(
            "preferences cover {} cells, field of view has {}",
            prefs.compiled().len(),
            grid.num_fov_cells()
        )));
    }
    Ok(())
}

// Sums run in field-of-view cell order so cached and direct evaluation agree bitwise.
fn evaluate_with(
    p: Fixation,
    grid: &GridSpec,
    prefs: &Preferences,
    gain: impl Fn(usize) -> f64,
    p_object: impl Fn(usize) -> f64,
) -> PolicyEvaluation {
    let compiled = prefs.compiled();
    let mut info_gain = 0.0;
    let mut utility = 0.0;
    let mut cell = 0;
    grid.for_each_cell(p, |_, _, block| {
        if let Some(b) = block {
            let i = grid.block_index(b);
            info_gain += gain(i);
            let c = compiled[cell];
            if c != 0.0 {
                utility += p_object(i) * c;
            }
        }
        cell += 1;
    });
    PolicyEvaluation {
        fixation: p,
        info_gain,
        utility,
        efe: -info_gain - utility,
    }
}

/// How the next fixation is picked from the evaluated candidates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "policy", rename_all = "lowercase", deny_unknown_fields)]
pub enum SelectionPolicy {
    /// Lowest expected free energy; ties go to the nearest fixation, then row-major order.
    #[default]
    Argmin,
    /// Sample from `softmax(-G / temperature)` with a seeded generator.
    Softmax { temperature: f64, seed: u64 },
}

impl SelectionPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SelectionPolicy::Softmax { temperature, .. } if !(temperature > 0.0 && temperature.is_finite()) => {
                Err(Error::Config {
                    path: "selection.temperature".into(),
                    message: format!("must be positive and finite, got {temperature}"),
                })
            }
            _ => Ok(()),
        }
    }

    pub fn selector(&self) -> Result<Selector> {
        self.validate()?;
        Ok(match *self {
            SelectionPolicy::Argmin => Selector::Argmin,
            SelectionPolicy::Softmax { temperature, seed } => Selector::Softmax {
                temperature,
                rng: Box::new(ChaCha8Rng::seed_from_u64(seed)),
            },
        })
    }
}

/// Runtime state of a [`SelectionPolicy`].
#[derive(Debug, Clone)]
pub enum Selector {
    Argmin,
    Softmax { temperature: f64, rng: Box<ChaCha8Rng> },
}

/// Evaluates every fixation and picks the next one.
///
/// Returns the chosen fixation and the evaluations in row-major fixation order.
pub fn select_action(
    belief: &BeliefState,
    sensor: &SensorModel,
    prefs: &Preferences,
    grid: &GridSpec,
    selector: &mut Selector,
) -> Result<(Fixation, Vec<PolicyEvaluation>)> {
    check_shapes(belief, prefs, grid)?;
    let q = belief.probabilities();
    let gains: Vec<f64> = q.iter().map(|&qi| block_info_gain(qi, sensor)).collect();
    let evals: Vec<PolicyEvaluation> = grid
        .all_fixations()
        .into_iter()
        .map(|p| evaluate_with(p, grid, prefs, |i| gains[i], |i| sensor.predicted_object(q[i])))
        .collect();

    let chosen = match selector {
        Selector::Argmin => argmin(&evals, belief.fixation),
        Selector::Softmax { temperature, rng } => sample_softmax(&evals, *temperature, rng.as_mut()),
    };
    Ok((chosen, evals))
}

/// Deterministic argmin with distance-then-row-major tie breaking.
pub fn argmin(evals: &[PolicyEvaluation], current: Fixation) -> Fixation {
    let best = evals.iter().map(|e| e.efe).fold(f64::INFINITY, f64::min);
    evals
        .iter()
        .filter(|e| e.efe <= best + TIE_TOLERANCE)
        .min_by_key(|e| e.fixation.chebyshev(&current))
        .map(|e| e.fixation)
        .unwrap_or(current)
}

fn sample_softmax(evals: &[PolicyEvaluation], temperature: f64, rng: &mut impl Rng) -> Fixation {
    let best = evals.iter().map(|e| e.efe).fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = evals.iter().map(|e| (-(e.efe - best) / temperature).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (e, w) in evals.iter().zip(&weights) {
        if u < *w {
            return e.fixation;
        }
        u -= w;
    }
    evals.last().expect("at least one fixation").fixation
}
