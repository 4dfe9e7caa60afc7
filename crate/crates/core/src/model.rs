//! The agent's generative model.
//!
//! Each block carries a Bernoulli presence variable. The sensor likelihood maps
//! presence to one of three observation bins for every field-of-view cell:
//! no object, object, or not visible. Prior preferences are a log-preference
//! over the "object" bin for each field-of-view cell.

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::grid::{Block, Fixation, GridSpec};

/// Observation bins for one field-of-view cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObsBin {
    NoObject = 0,
    Object = 1,
    NotVisible = 2,
}

/// Per-block presence beliefs plus the proprioceptive fixation.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    grid: GridSpec,
    /// `q[i]` is the probability that block `i` (row-major) holds an object.
    q: Vec<f64>,
    pub fixation: Fixation,
    /// True once a block has been inside an observed field of view.
    observed: Vec<bool>,
}

impl BeliefState {
    /// Uniform belief `prior` over every block.
    pub fn new(grid: GridSpec, prior: f64, start: Fixation) -> Result<Self> {
        check_probability("prior", prior)?;
        grid.check(start)?;
        Ok(Self {
            grid,
            q: vec![prior; grid.num_blocks()],
            fixation: start,
            observed: vec![false; grid.num_blocks()],
        })
    }

    /// Builds a belief from explicit per-block probabilities (row-major).
    pub fn from_probabilities(grid: GridSpec, q: Vec<f64>, fixation: Fixation) -> Result<Self> {
        if q.len() != grid.num_blocks() {
            return Err(Error::InvalidGrid(format!(
                "expected {} block probabilities, got {}",
                grid.num_blocks(),
                q.len()
            )));
        }
        for &v in &q {
            check_probability("block probability", v)?;
        }
        grid.check(fixation)?;
        Ok(Self {
            grid,
            observed: vec![false; q.len()],
            q,
            fixation,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.q
    }

    pub fn observed_mask(&self) -> &[bool] {
        &self.observed
    }

    pub fn presence(&self, b: Block) -> f64 {
        self.q[self.grid.block_index(b)]
    }

    pub fn set_presence(&mut self, b: Block, value: f64) -> Result<()> {
        self.grid.check(b)?;
        let i = self.grid.block_index(b);
        self.q[i] = check_probability("block probability", value)?;
        Ok(())
    }

    pub fn is_observed(&self, b: Block) -> bool {
        self.observed[self.grid.block_index(b)]
    }

    pub(crate) fn q_mut(&mut self) -> &mut [f64] {
        &mut self.q
    }

    pub(crate) fn mark_observed(&mut self, index: usize) {
        self.observed[index] = true;
    }

    /// Fraction of blocks observed at least once.
    pub fn coverage(&self) -> f64 {
        self.observed.iter().filter(|&&o| o).count() as f64 / self.observed.len() as f64
    }

    /// Sum of per-block Bernoulli entropies, in nats.
    pub fn total_entropy(&self) -> f64 {
        self.q.iter().map(|&q| bernoulli_entropy(q)).sum()
    }
}

/// Shorthand for [`BeliefState::new`].
pub fn init_belief(grid: GridSpec, prior: f64, start: Fixation) -> Result<BeliefState> {
    BeliefState::new(grid, prior, start)
}

/// Entropy of a Bernoulli variable, in nats.
pub fn bernoulli_entropy(q: f64) -> f64 {
    xlogx(q) + xlogx(1.0 - q)
}

#[inline]
fn xlogx(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.ln()
    } else {
        0.0
    }
}

/// Likelihood parameters: how presence maps onto the "object" bin of a visible cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSensor", into = "RawSensor")]
pub struct SensorModel {
    p_hit: f64,
    p_fa: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSensor {
    p_hit: f64,
    p_fa: f64,
}

impl TryFrom<RawSensor> for SensorModel {
    type Error = Error;

    fn try_from(raw: RawSensor) -> Result<Self> {
        SensorModel::new(raw.p_hit, raw.p_fa)
    }
}

impl From<SensorModel> for RawSensor {
    fn from(s: SensorModel) -> Self {
        Self { p_hit: s.p_hit, p_fa: s.p_fa }
    }
}

impl Default for SensorModel {
    fn default() -> Self {
        Self { p_hit: 0.9, p_fa: 0.02 }
    }
}

impl SensorModel {
    pub fn new(p_hit: f64, p_fa: f64) -> Result<Self> {
        if !(p_hit > 0.0 && p_hit <= 1.0) {
            return Err(Error::InvalidSensor(format!("p_hit must lie in (0, 1], got {p_hit}")));
        }
        if !(0.0..1.0).contains(&p_fa) {
            return Err(Error::InvalidSensor(format!("p_fa must lie in [0, 1), got {p_fa}")));
        }
        if p_hit <= p_fa {
            return Err(Error::InvalidSensor(format!(
                "p_hit ({p_hit}) must exceed p_fa ({p_fa})"
            )));
        }
        Ok(Self { p_hit, p_fa })
    }

    /// The noiseless limit: presence is always reported, absence never is.
    pub fn deterministic() -> Self {
        Self { p_hit: 1.0, p_fa: 0.0 }
    }

    pub fn p_hit(&self) -> f64 {
        self.p_hit
    }

    pub fn p_fa(&self) -> f64 {
        self.p_fa
    }

    pub fn is_deterministic(&self) -> bool {
        self.p_hit == 1.0 && self.p_fa == 0.0
    }

    /// `P(o = object | s)`.
    #[inline]
    pub fn p_object(&self, present: bool) -> f64 {
        if present {
            self.p_hit
        } else {
            self.p_fa
        }
    }

    /// Probability of the "object" bin for a visible block with presence belief `q`.
    #[inline]
    pub fn predicted_object(&self, q: f64) -> f64 {
        q * self.p_hit + (1.0 - q) * self.p_fa
    }

    /// Distribution over `[NoObject, Object, NotVisible]`.
    pub fn likelihood(&self, present: bool, visible: bool) -> [f64; 3] {
        if !visible {
            return [0.0, 0.0, 1.0];
        }
        let p = self.p_object(present);
        [1.0 - p, p, 0.0]
    }
}

/// Carries the previous posterior forward as the next prior, optionally
/// relaxing it toward maximum entropy by `leak`.
pub fn advance_prior(belief: &BeliefState, leak: f64) -> Result<BeliefState> {
    check_probability("leak", leak)?;
    let mut next = belief.clone();
    if leak > 0.0 {
        for q in next.q.iter_mut() {
            *q = (1.0 - leak) * *q + leak * 0.5;
        }
    }
    Ok(next)
}

/// Soft evidence for one observed field of view.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationFrame {
    pub t: u64,
    pub fixation: Fixation,
    /// Per cell (row-major over the field of view): probability of the "object"
    /// bin, or `None` for cells outside the grid.
    pub evidence: Vec<Option<f64>>,
}

impl ObservationFrame {
    /// A frame with zero evidence in every in-grid cell ("nothing detected").
    pub fn empty(grid: &GridSpec, fixation: Fixation, t: u64) -> Result<Self> {
        grid.check(fixation)?;
        let mut evidence = Vec::with_capacity(grid.num_fov_cells());
        grid.for_each_cell(fixation, |_, _, b| evidence.push(b.map(|_| 0.0)));
        Ok(Self { t, fixation, evidence })
    }

    pub fn get(&self, grid: &GridSpec, col: usize, row: usize) -> Option<f64> {
        self.evidence[grid.cell_index(col, row)]
    }

    pub fn set(&mut self, grid: &GridSpec, col: usize, row: usize, value: f64) {
        let i = grid.cell_index(col, row);
        if self.evidence[i].is_some() {
            self.evidence[i] = Some(value);
        }
    }

    /// Number of cells with strictly positive evidence.
    pub fn nonzero(&self) -> usize {
        self.evidence.iter().filter(|e| matches!(e, Some(v) if *v > 0.0)).count()
    }

    /// Checks shape and value ranges against `grid`.
    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        grid.check(self.fixation)?;
        if self.evidence.len() != grid.num_fov_cells() {
            return Err(Error::RejectedFrame(format!(
                "expected {} evidence cells, got {}",
                grid.num_fov_cells(),
                self.evidence.len()
            )));
        }
        let mut result = Ok(());
        let mut i = 0;
        grid.for_each_cell(self.fixation, |col, row, block| {
            if result.is_err() {
                return;
            }
            match (block, self.evidence[i]) {
                (Some(_), Some(v)) if !(0.0..=1.0).contains(&v) => {
                    result = Err(Error::RejectedFrame(format!(
                        "evidence {v} at cell ({col}, {row}) is outside [0, 1]"
                    )));
                }
                (Some(_), None) => {
                    result = Err(Error::RejectedFrame(format!(
                        "in-grid cell ({col}, {row}) is marked not visible"
                    )));
                }
                (None, Some(_)) => {
                    result = Err(Error::RejectedFrame(format!(
                        "cell ({col}, {row}) is outside the grid but carries evidence"
                    )));
                }
                _ => {}
            }
            i += 1;
        });
        result
    }
}

/// What the agent wants to see.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreferenceMode {
    /// No preference: pure information seeking.
    Explore,
    /// Prefer objects anywhere in view.
    Seek,
    /// Prefer an object at the camera center.
    Track,
}

/// Compiled log-preferences for the "object" bin of every field-of-view cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Preferences {
    mode: PreferenceMode,
    c_value: f64,
    compiled: Vec<f64>,
}

impl Preferences {
    pub fn new(mode: PreferenceMode, c_value: f64, grid: &GridSpec) -> Self {
        let mut compiled = vec![0.0; grid.num_fov_cells()];
        match mode {
            PreferenceMode::Explore => {}
            PreferenceMode::Seek => compiled.fill(c_value),
            PreferenceMode::Track => {
                let (cw, ch) = grid.center_cell();
                compiled[grid.cell_index(cw, ch)] = c_value;
            }
        }
        Self { mode, c_value, compiled }
    }

    pub fn explore(grid: &GridSpec) -> Self {
        Self::new(PreferenceMode::Explore, 1.0, grid)
    }

    pub fn mode(&self) -> PreferenceMode {
        self.mode
    }

    pub fn c_value(&self) -> f64 {
        self.c_value
    }

    /// Row-major over the field of view.
    pub fn compiled(&self) -> &[f64] {
        &self.compiled
    }

    pub fn at(&self, grid: &GridSpec, col: usize, row: usize) -> f64 {
        self.compiled[grid.cell_index(col, row)]
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::*;

    fn g9() -> GridSpec {
        GridSpec::new(9, 9, 3, 3).unwrap()
    }

    #[test]
    fn init_belief_fills_prior() {
        for prior in [0.5, 0.0, 1.0] {
            let b = init_belief(g9(), prior, Block::new(4, 4)).unwrap();
            assert!(b.probabilities().iter().all(|&q| q == prior));
            assert!(b.observed_mask().iter().all(|&o| !o));
            assert_eq!(b.fixation, Block::new(4, 4));
        }
        let b = init_belief(g9(), 0.5, Block::new(0, 0)).unwrap();
        assert_abs_diff_eq!(b.total_entropy(), 81.0 * std::f64::consts::LN_2, epsilon = 1e-12);
    }

    #[test]
    fn init_belief_rejects_bad_prior() {
        assert!(matches!(
            init_belief(g9(), 1.5, Block::new(0, 0)),
            Err(Error::InvalidProbability { .. })
        ));
        assert!(init_belief(g9(), -0.1, Block::new(0, 0)).is_err());
        assert!(init_belief(g9(), f64::NAN, Block::new(0, 0)).is_err());
        assert!(init_belief(g9(), 0.5, Block::new(9, 0)).is_err());
    }

    #[test]
    fn likelihood_cases() {
        let det = SensorModel::deterministic();
        assert_eq!(det.likelihood(true, true), [0.0, 1.0, 0.0]);
        assert_eq!(det.likelihood(false, true), [1.0, 0.0, 0.0]);
        assert_eq!(det.likelihood(true, false), [0.0, 0.0, 1.0]);
        let noisy = SensorModel::new(0.9, 0.05).unwrap();
        assert_eq!(noisy.likelihood(false, false), [0.0, 0.0, 1.0]);
        let l = noisy.likelihood(false, true);
        assert_abs_diff_eq!(l[0], 0.95, epsilon = 1e-15);
        assert_abs_diff_eq!(l[1], 0.05, epsilon = 1e-15);
        assert_eq!(l[2], 0.0);
    }

    #[test]
    fn sensor_validation() {
        assert!(SensorModel::new(0.0, 0.0).is_err());
        assert!(SensorModel::new(0.5, 0.5).is_err());
        assert!(SensorModel::new(0.9, 1.0).is_err());
        assert!(SensorModel::new(1.1, 0.0).is_err());
        assert!(SensorModel::new(1.0, 0.0).unwrap().is_deterministic());
        assert_eq!(SensorModel::default(), SensorModel::new(0.9, 0.02).unwrap());
    }

    #[test]
    fn advance_prior_examples() {
        let mut b = init_belief(g9(), 0.3, Block::new(0, 0)).unwrap();
        b.set_presence(Block::new(2, 2), 1.0).unwrap();
        assert_eq!(advance_prior(&b, 0.0).unwrap(), b);
        assert!(advance_prior(&b, 1.0).unwrap().probabilities().iter().all(|&q| q == 0.5));
        let leaked = advance_prior(&b, 0.1).unwrap();
        assert_abs_diff_eq!(leaked.presence(Block::new(2, 2)), 0.95, epsilon = 1e-15);
        assert!(advance_prior(&b, 1.1).is_err());
    }

    #[test]
    fn preferences_match_closed_form_exhaustively() {
        for w in 1..=7 {
            for h in 1..=7 {
                let g = GridSpec::new(7, 7, w, h).unwrap();
                let (cw, ch) = ((w - 1) / 2, (h - 1) / 2);
                for mode in [PreferenceMode::Explore, PreferenceMode::Seek, PreferenceMode::Track] {
                    let p = Preferences::new(mode, 1.0, &g);
                    assert_eq!(p.compiled().len(), w * h);
                    for col in 0..w {
                        for row in 0..h {
                            let expected = match mode {
                                PreferenceMode::Explore => 0.0,
                                PreferenceMode::Seek => 1.0,
                                PreferenceMode::Track if (col, row) == (cw, ch) => 1.0,
                                PreferenceMode::Track => 0.0,
                            };
                            assert_eq!(p.at(&g, col, row), expected, "{mode:?} {w}x{h} ({col},{row})");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn frame_validation() {
        let g = g9();
        let mut f = ObservationFrame::empty(&g, Block::new(0, 0), 0).unwrap();
        assert_eq!(f.evidence.iter().filter(|e| e.is_none()).count(), 5);
        f.validate(&g).unwrap();
        f.set(&g, 1, 1, 0.7);
        assert_eq!(f.get(&g, 1, 1), Some(0.7));
        // setting an outside-grid cell is ignored
        f.set(&g, 0, 0, 0.7);
        assert_eq!(f.get(&g, 0, 0), None);
        f.evidence[g.cell_index(1, 1)] = Some(1.5);
        assert!(matches!(f.validate(&g), Err(Error::RejectedFrame(_))));
    }

    proptest! {
        #[test]
        fn likelihood_is_normalized(p_hit in 0.01f64..=1.0, frac in 0.0f64..1.0, s: bool, vis: bool) {
            let sensor = SensorModel::new(p_hit, p_hit * frac).unwrap();
            let l = sensor.likelihood(s, vis);
            prop_assert!((l.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(l.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }

        #[test]
        fn advance_prior_contracts_toward_half(q in 0.0f64..=1.0, leak in 0.0f64..=1.0) {
            let b = BeliefState::from_probabilities(
                GridSpec::new(1, 1, 1, 1).unwrap(), vec![q], Block::new(0, 0)).unwrap();
            let next = advance_prior(&b, leak).unwrap();
            prop_assert!((next.probabilities()[0] - 0.5).abs() <= (q - 0.5).abs() + 1e-15);
        }
    }
}
