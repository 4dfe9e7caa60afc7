//! Seeded stand-in for the camera, the detector and the scene.
//!
//! Every random draw comes from one ChaCha8 stream seeded by the scenario, so a
//! given seed, scenario and step count always produce the same trace.

use std::io::BufRead;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, PlannerConfig};
use crate::bench::LatencyStats;
use crate::error::{parse_json, Error, Result};
use crate::grid::{Block, Fixation, GridSpec};
use crate::ingest::{tile_rect, Detection};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldObject {
    pub block: Block,
    #[serde(rename = "class", default = "default_class")]
    pub class_name: String,
    /// Probability of hopping to a random neighboring block after each step.
    #[serde(default)]
    pub move_prob: f64,
}

fn default_class() -> String {
    "person".into()
}

impl WorldObject {
    pub fn new(block: Block, class_name: impl Into<String>, move_prob: f64) -> Self {
        Self {
            block,
            class_name: class_name.into(),
            move_prob,
        }
    }
}

/// Generative detector: hit and false-alarm rates plus confidence ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSim {
    pub p_hit: f64,
    pub p_fa: f64,
    pub confidence_given_hit: [f64; 2],
    pub confidence_given_fa: [f64; 2],
    /// Class reported by false detections.
    pub false_alarm_class: String,
}

impl Default for DetectorSim {
    fn default() -> Self {
        Self {
            p_hit: 0.9,
            p_fa: 0.02,
            confidence_given_hit: [0.6, 0.95],
            confidence_given_fa: [0.25, 0.5],
            false_alarm_class: default_class(),
        }
    }
}

impl DetectorSim {
    /// Always detects present objects with full confidence and never fires falsely.
    pub fn perfect() -> Self {
        Self {
            p_hit: 1.0,
            p_fa: 0.0,
            confidence_given_hit: [1.0, 1.0],
            ..Self::default()
        }
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        let err = |field: &str, message: String| Error::Config {
            path: format!("{prefix}{field}"),
            message,
        };
        for (name, p) in [("p_hit", self.p_hit), ("p_fa", self.p_fa)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(err(name, format!("must lie in [0, 1], got {p}")));
            }
        }
        for (name, [lo, hi]) in [
            ("confidence_given_hit", self.confidence_given_hit),
            ("confidence_given_fa", self.confidence_given_fa),
        ] {
            if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
                return Err(err(name, format!("need 0 < lo <= hi <= 1, got [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    #[serde(default)]
    pub objects: Vec<WorldObject>,
    #[serde(default)]
    pub detector: DetectorSim,
    #[serde(default)]
    pub seed: u64,
    /// Largest Chebyshev camera move per step; unlimited when absent.
    #[serde(default)]
    pub max_move: Option<usize>,
}

/// A full closed-loop experiment: the planner plus the simulated world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub planner: PlannerConfig,
    pub world: WorldConfig,
}

impl Scenario {
    /// Parses and validates a scenario; errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let scenario: Scenario = parse_json(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        self.planner.validate("planner.")?;
        self.world.detector.validate("world.detector.")?;
        let grid = &self.planner.grid;
        for (i, obj) in self.world.objects.iter().enumerate() {
            if !grid.contains(obj.block) {
                return Err(Error::Config {
                    path: format!("world.objects[{i}].block"),
                    message: format!("({}, {}) is outside the grid", obj.block.pan, obj.block.tilt),
                });
            }
            if !(0.0..=1.0).contains(&obj.move_prob) {
                return Err(Error::Config {
                    path: format!("world.objects[{i}].move_prob"),
                    message: format!("must lie in [0, 1], got {}", obj.move_prob),
                });
            }
        }
        if self.world.max_move == Some(0) {
            return Err(Error::Config {
                path: "world.max_move".into(),
                message: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// Ground truth plus the random stream.
#[derive(Debug, Clone)]
pub struct WorldState {
    pub objects: Vec<WorldObject>,
    pub seed: u64,
    pub t: u64,
    pub camera: Fixation,
    rng: ChaCha8Rng,
}

/// What one simulated camera frame produced.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldStep {
    pub t: u64,
    /// Where the camera actually looked.
    pub fixation: Fixation,
    pub detections: Vec<Detection>,
    /// Object blocks at the moment the frame was taken.
    pub objects: Vec<Block>,
}

impl WorldState {
    pub fn new(objects: Vec<WorldObject>, seed: u64, camera: Fixation) -> Self {
        Self {
            objects,
            seed,
            t: 0,
            camera,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn occupant(&self, b: Block) -> Option<&WorldObject> {
        self.objects.iter().find(|o| o.block == b)
    }

    /// Moves the camera toward `action`, takes a frame and lets objects wander.
    pub fn step(
        &mut self,
        action: Fixation,
        det: &DetectorSim,
        grid: &GridSpec,
        max_move: Option<usize>,
    ) -> Result<WorldStep> {
        grid.check(action)?;
        self.camera = match max_move {
            Some(m) => step_toward(self.camera, action, m),
            None => action,
        };

        let (cols, rows) = (grid.fov_width(), grid.fov_height());
        let mut cells = Vec::with_capacity(grid.num_fov_cells());
        grid.for_each_cell(self.camera, |col, row, block| cells.push((col, row, block)));
        let mut detections = Vec::new();
        for (col, row, block) in cells {
            let Some(b) = block else { continue };
            let occupant = self.occupant(b).map(|o| o.class_name.clone());
            let (rate, [lo, hi], class) = match occupant {
                Some(class) => (det.p_hit, det.confidence_given_hit, class),
                None => (det.p_fa, det.confidence_given_fa, det.false_alarm_class.clone()),
            };
            let fire = self.rng.random::<f64>() < rate;
            let u = self.rng.random::<f64>();
            if fire {
                detections.push(Detection::new(tile_rect(col, row, cols, rows), lo + (hi - lo) * u, class));
            }
        }
        let observed_objects = self.objects.iter().map(|o| o.block).collect();

        for i in 0..self.objects.len() {
            let u = self.rng.random::<f64>();
            let pick = self.rng.random::<f64>();
            if u < self.objects[i].move_prob {
                let nbrs = neighbors(self.objects[i].block, grid);
                if !nbrs.is_empty() {
                    let j = ((pick * nbrs.len() as f64) as usize).min(nbrs.len() - 1);
                    self.objects[i].block = nbrs[j];
                }
            }
        }

        let step = WorldStep {
            t: self.t,
            fixation: self.camera,
            detections,
            objects: observed_objects,
        };
        self.t += 1;
        Ok(step)
    }
}

fn step_toward(from: Fixation, to: Fixation, max: usize) -> Fixation {
    let axis = |a: usize, b: usize| {
        if b > a {
            a + (b - a).min(max)
        } else {
            a - (a - b).min(max)
        }
    };
    Block::new(axis(from.pan, to.pan), axis(from.tilt, to.tilt))
}

/// In-grid 8-connected neighbors, row-major.
fn neighbors(b: Block, grid: &GridSpec) -> Vec<Block> {
    let mut out = Vec::with_capacity(8);
    for dk in -1isize..=1 {
        for dl in -1isize..=1 {
            if dk == 0 && dl == 0 {
                continue;
            }
            let (k, l) = (b.pan as isize + dk, b.tilt as isize + dl);
            if k >= 0 && l >= 0 {
                let n = Block::new(k as usize, l as usize);
                if grid.contains(n) {
                    out.push(n);
                }
            }
        }
    }
    out
}

/// One line of an episode trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    pub action: Fixation,
    pub evidence_nonzero: usize,
    pub entropy_total: f64,
    pub coverage: f64,
    pub latency_us: u64,
    /// True object blocks when the frame was taken.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objects: Option<Vec<Block>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    /// Presence beliefs after the update, row-major.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub belief: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed: Option<Vec<bool>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeOptions {
    /// Write measured latency into each record. When off, `latency_us` is 0
    /// and traces are byte-for-byte reproducible. The summary always carries
    /// latency statistics.
    pub record_latency: bool,
    /// Include belief snapshots in every record.
    pub snapshots: bool,
}

impl Default for EpisodeOptions {
    fn default() -> Self {
        Self {
            record_latency: true,
            snapshots: true,
        }
    }
}

impl EpisodeOptions {
    pub fn deterministic() -> Self {
        Self {
            record_latency: false,
            snapshots: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub records: Vec<StepRecord>,
    pub summary: EpisodeSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeSummary {
    pub steps: usize,
    /// Fixations needed before every block had been observed.
    pub coverage_steps: Option<usize>,
    /// Fixations until some object block was observed and believed present (q >= 0.5).
    pub steps_to_detect: Option<usize>,
    /// Mean Chebyshev distance from the camera to the nearest object, over the
    /// steps after the first detection.
    pub mean_tracking_error: Option<f64>,
    pub latency: Option<LatencyStats>,
    pub malformed_detections: usize,
}

impl EpisodeTrace {
    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("trace records serialize"));
            out.push('\n');
        }
        out
    }
}

/// Reads trace records, skipping lines that do not parse. Returns the records
/// and the number of skipped lines.
pub fn read_trace(reader: impl BufRead) -> std::io::Result<(Vec<StepRecord>, usize)> {
    let mut records = Vec::new();
    let mut skipped = 0;
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(r) => records.push(r),
            Err(e) => {
                log::warn!("trace line {}: {e}", n + 1);
                skipped += 1;
            }
        }
    }
    Ok((records, skipped))
}

/// Runs the planner against the simulated world for `steps` rounds.
///
/// Each round: plan from the current belief, move the camera, take a frame,
/// update the belief.
pub fn run_episode(scenario: &Scenario, steps: usize, options: EpisodeOptions) -> Result<EpisodeTrace> {
    if steps == 0 {
        return Err(Error::Config {
            path: "steps".into(),
            message: "must be at least 1".into(),
        });
    }
    scenario.validate()?;
    let grid = scenario.planner.grid;
    let mut agent = Agent::new(scenario.planner.clone())?;
    let mut world = WorldState::new(
        scenario.world.objects.clone(),
        scenario.world.seed,
        scenario.planner.start,
    );

    let mut records = Vec::with_capacity(steps);
    let mut coverage_steps = None;
    let mut steps_to_detect = None;
    let mut tracking = Vec::new();
    let mut latencies = Vec::new();
    let mut malformed = 0;

    for i in 0..steps {
        let started = Instant::now();
        let (action, _) = agent.plan()?;
        let planned = started.elapsed();

        let frame = world.step(action, &scenario.world.detector, &grid, scenario.world.max_move)?;

        let started = Instant::now();
        let (obs, report) = agent.observe_detections(frame.t, frame.fixation, &frame.detections)?;
        let latency = planned + started.elapsed();
        malformed += report.malformed;

        let belief = agent.belief();
        let coverage = belief.coverage();
        if coverage_steps.is_none() && coverage >= 1.0 {
            coverage_steps = Some(i + 1);
        }
        if steps_to_detect.is_none() && frame.objects.iter().any(|&b| belief.is_observed(b) && belief.presence(b) >= 0.5) {
            steps_to_detect = Some(i + 1);
        }
        if steps_to_detect.is_some() {
            if let Some(err) = frame.objects.iter().map(|b| b.chebyshev(&frame.fixation)).min() {
                tracking.push(err as f64);
            }
        }
        latencies.push(latency);
        let latency_us = if options.record_latency {
            latency.as_micros() as u64
        } else {
            0
        };

        records.push(StepRecord {
            t: frame.t,
            action,
            evidence_nonzero: obs.nonzero(),
            entropy_total: belief.total_entropy(),
            coverage,
            latency_us,
            objects: Some(frame.objects),
            grid: options.snapshots.then_some(grid),
            belief: options.snapshots.then(|| belief.probabilities().to_vec()),
            observed: options.snapshots.then(|| belief.observed_mask().to_vec()),
        });
    }

    let summary = EpisodeSummary {
        steps,
        coverage_steps,
        steps_to_detect,
        mean_tracking_error: (!tracking.is_empty()).then(|| tracking.iter().sum::<f64>() / tracking.len() as f64),
        latency: LatencyStats::from_durations(&latencies),
        malformed_detections: malformed,
    };
    Ok(EpisodeTrace { records, summary })
}
