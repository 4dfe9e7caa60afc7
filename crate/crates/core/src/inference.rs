//! Free-energy minimizing belief update.
//!
//! For a factorized Bernoulli posterior and a soft outcome `e = P(object bin)`,
//! the minimizer of `KL[q || prior] - E_q[e ln A(1|s) + (1-e) ln A(0|s)]` is
//!
//! ```text
//! q'(s) ∝ prior(s) · A(1|s)^e · A(0|s)^(1-e)
//! ```
//!
//! which reduces to Bayes' rule for hard evidence. Blocks outside the field of
//! view see the "not visible" bin with probability one and are left untouched.

use crate::error::{Error, Result};
use crate::grid::{Block, GridSpec};
use crate::model::{BeliefState, ObservationFrame, SensorModel};

/// Floor applied to log arguments when evidence contradicts the model outright.
pub const LOG_FLOOR: f64 = 1e-12;

/// Posterior presence probability of one block after soft evidence `evidence`.
pub fn posterior_presence(prior: f64, evidence: f64, sensor: &SensorModel) -> f64 {
    let present = prior * soft_likelihood(sensor, true, evidence);
    let absent = (1.0 - prior) * soft_likelihood(sensor, false, evidence);
    let z = present + absent;
    if z > 0.0 && z.is_finite() {
        return present / z;
    }
    // Both hypotheses were ruled out exactly; fall back to floored logs.
    let floored = |p: f64| p.max(LOG_FLOOR).ln();
    let log_present = floored(prior)
        + evidence * floored(sensor.p_hit())
        + (1.0 - evidence) * floored(1.0 - sensor.p_hit());
    let log_absent = floored(1.0 - prior)
        + evidence * floored(sensor.p_fa())
        + (1.0 - evidence) * floored(1.0 - sensor.p_fa());
    1.0 / (1.0 + (log_absent - log_present).exp())
}

/// `A(1|s)^e · A(0|s)^(1-e)`, with `0^0 = 1`.
#[inline]
fn soft_likelihood(sensor: &SensorModel, present: bool, evidence: f64) -> f64 {
    let p = sensor.p_object(present);
    p.powf(evidence) * (1.0 - p).powf(1.0 - evidence)
}

fn check_frame(belief: &BeliefState, obs: &ObservationFrame, grid: &GridSpec) -> Result<()> {
    if belief.grid() != grid {
        return Err(Error::InvalidGrid("belief was built for a different grid".into()));
    }
    if obs.fixation != belief.fixation {
        return Err(Error::FixationMismatch {
            frame: obs.fixation,
            belief: belief.fixation,
        });
    }
    obs.validate(grid)
}

/// Visits `(block, evidence)` for every in-grid cell of the frame.
fn visible_evidence(obs: &ObservationFrame, grid: &GridSpec, mut f: impl FnMut(Block, f64)) {
    let mut i = 0;
    grid.for_each_cell(obs.fixation, |_, _, block| {
        if let (Some(b), Some(e)) = (block, obs.evidence[i]) {
            f(b, e);
        }
        i += 1;
    });
}

/// Returns the posterior belief after observing `obs` from the belief's fixation.
pub fn update_beliefs(
    belief: &BeliefState,
    obs: &ObservationFrame,
    sensor: &SensorModel,
    grid: &GridSpec,
) -> Result<BeliefState> {
    check_frame(belief, obs, grid)?;
    let mut next = belief.clone();
    visible_evidence(obs, grid, |b, e| {
        let i = grid.block_index(b);
        let q = next.q_mut();
        q[i] = posterior_presence(q[i], e, sensor);
        next.mark_observed(i);
    });
    Ok(next)
}

/// Variational free energy of `post` against `prior` for the evidence in `obs`, in nats.
///
/// Only in-grid visible blocks contribute; the "not visible" bin has likelihood
/// one and adds nothing.
pub fn free_energy(
    prior: &BeliefState,
    post: &BeliefState,
    obs: &ObservationFrame,
    sensor: &SensorModel,
    grid: &GridSpec,
) -> Result<f64> {
    check_frame(prior, obs, grid)?;
    if post.grid() != grid {
        return Err(Error::InvalidGrid("posterior was built for a different grid".into()));
    }
    let mut total = 0.0;
    let mut failure = None;
    visible_evidence(obs, grid, |b, e| {
        if failure.is_some() {
            return;
        }
        match block_free_energy(prior.presence(b), post.presence(b), e, sensor) {
            Some(f) => total += f,
            None => {
                failure = Some(Error::Contradiction {
                    pan: b.pan,
                    tilt: b.tilt,
                })
            }
        }
    });
    match failure {
        Some(err) => Err(err),
        None => Ok(total),
    }
}

/// Complexity minus accuracy for one block, `None` when a term diverges.
fn block_free_energy(prior: f64, post: f64, evidence: f64, sensor: &SensorModel) -> Option<f64> {
    let mut f = 0.0;
    for (qs, ps, present) in [(post, prior, true), (1.0 - post, 1.0 - prior, false)] {
        if qs <= 0.0 {
            continue;
        }
        if ps <= 0.0 {
            return None;
        }
        let p_obj = sensor.p_object(present);
        let mut log_lik = 0.0;
        for (weight, p) in [(evidence, p_obj), (1.0 - evidence, 1.0 - p_obj)] {
            if weight > 0.0 {
                if p <= 0.0 {
                    return None;
                }
                log_lik += weight * p.ln();
            }
        }
        f += qs * (qs.ln() - ps.ln()) - qs * log_lik;
    }
    Some(f)
}
