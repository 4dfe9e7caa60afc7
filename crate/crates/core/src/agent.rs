//! The perceive-plan loop shared by the simulator and the wire-protocol server.

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, parse_json, Error, Result};
use crate::grid::{Fixation, GridSpec};
use crate::inference::update_beliefs;
use crate::ingest::{detections_to_frame, Detection, IngestConfig, IngestReport};
use crate::model::{advance_prior, BeliefState, ObservationFrame, PreferenceMode, Preferences, SensorModel};
use crate::planner::{select_action, PolicyEvaluation, SelectionPolicy, Selector};
use crate::protocol::{ActionMessage, FrameMessage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreferenceConfig {
    pub mode: PreferenceMode,
    #[serde(default = "default_c_value")]
    pub c_value: f64,
}

fn default_c_value() -> f64 {
    1.0
}

impl Default for PreferenceConfig {
    fn default() -> Self {
        Self {
            mode: PreferenceMode::Explore,
            c_value: 1.0,
        }
    }
}

/// Everything the planner needs, as read from a JSON model config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerConfig {
    pub grid: GridSpec,
    #[serde(default)]
    pub sensor: SensorModel,
    #[serde(default)]
    pub preferences: PreferenceConfig,
    #[serde(default)]
    pub selection: SelectionPolicy,
    /// Relaxation of beliefs toward 0.5 between frames.
    #[serde(default)]
    pub leak: f64,
    #[serde(default = "default_prior")]
    pub prior: f64,
    #[serde(default)]
    pub start: Fixation,
    #[serde(default)]
    pub ingest: IngestConfig,
}

fn default_prior() -> f64 {
    0.5
}

impl PlannerConfig {
    pub fn new(grid: GridSpec) -> Self {
        Self {
            grid,
            sensor: SensorModel::default(),
            preferences: PreferenceConfig::default(),
            selection: SelectionPolicy::Argmin,
            leak: 0.0,
            prior: 0.5,
            start: Fixation::new(0, 0),
            ingest: IngestConfig::default(),
        }
    }

    /// Parses and validates a planner config; errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let config: PlannerConfig = parse_json(text)?;
        config.validate("")?;
        Ok(config)
    }

    /// Semantic checks; `prefix` is prepended to reported field paths.
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let field = |name: &str, e: Error| Error::Config {
            path: format!("{prefix}{name}"),
            message: e.to_string(),
        };
        check_probability("leak", self.leak).map_err(|e| field("leak", e))?;
        check_probability("prior", self.prior).map_err(|e| field("prior", e))?;
        self.grid.check(self.start).map_err(|e| field("start", e))?;
        if !self.preferences.c_value.is_finite() {
            return Err(Error::Config {
                path: format!("{prefix}preferences.c_value"),
                message: format!("must be finite, got {}", self.preferences.c_value),
            });
        }
        let rebase = |e: Error| match e {
            Error::Config { path, message } => Error::Config {
                path: format!("{prefix}{path}"),
                message,
            },
            other => other,
        };
        self.selection.validate().map_err(rebase)?;
        self.ingest.validate().map_err(rebase)?;
        Ok(())
    }
}

/// Holds the belief and runs inference and planning for one camera.
#[derive(Debug, Clone)]
pub struct Agent {
    config: PlannerConfig,
    prefs: Preferences,
    selector: Selector,
    belief: BeliefState,
}

impl Agent {
    pub fn new(config: PlannerConfig) -> Result<Self> {
        config.validate("")?;
        let grid = config.grid;
        Ok(Self {
            prefs: Preferences::new(config.preferences.mode, config.preferences.c_value, &grid),
            selector: config.selection.selector()?,
            belief: BeliefState::new(grid, config.prior, config.start)?,
            config,
        })
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.config
    }

    pub fn grid(&self) -> &GridSpec {
        &self.config.grid
    }

    pub fn belief(&self) -> &BeliefState {
        &self.belief
    }

    pub fn preferences(&self) -> &Preferences {
        &self.prefs
    }

    /// Picks the next fixation from the current belief.
    pub fn plan(&mut self) -> Result<(Fixation, Vec<PolicyEvaluation>)> {
        select_action(
            &self.belief,
            &self.config.sensor,
            &self.prefs,
            &self.config.grid,
            &mut self.selector,
        )
    }

    /// Folds an observation frame into the belief. The frame's fixation becomes
    /// the proprioceptive state.
    pub fn observe(&mut self, frame: &ObservationFrame) -> Result<()> {
        self.config.grid.check(frame.fixation)?;
        let mut prior = advance_prior(&self.belief, self.config.leak)?;
        prior.fixation = frame.fixation;
        self.belief = update_beliefs(&prior, frame, &self.config.sensor, &self.config.grid)?;
        Ok(())
    }

    /// Converts detections into a frame and observes it.
    pub fn observe_detections(
        &mut self,
        t: u64,
        fixation: Fixation,
        detections: &[Detection],
    ) -> Result<(ObservationFrame, IngestReport)> {
        let (frame, report) = detections_to_frame(detections, fixation, t, &self.config.ingest, &self.config.grid)?;
        self.observe(&frame)?;
        Ok((frame, report))
    }

    /// Observes a wire frame without planning.
    pub fn ingest_message(&mut self, msg: &FrameMessage) -> Result<ObservationFrame> {
        Ok(self.observe_detections(msg.t, msg.fixation, &msg.detections)?.0)
    }

    /// Observes a wire frame and answers with the next action.
    pub fn handle_frame(&mut self, msg: &FrameMessage) -> Result<ActionMessage> {
        self.ingest_message(msg)?;
        let (fixation, _) = self.plan()?;
        Ok(ActionMessage { t: msg.t, fixation })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::BBox;

    fn config() -> PlannerConfig {
        let mut c = PlannerConfig::new(GridSpec::new(9, 9, 3, 3).unwrap());
        c.sensor = SensorModel::deterministic();
        c
    }

    #[test]
    fn parses_minimal_json() {
        let c: PlannerConfig =
            serde_json::from_str(r#"{"grid":{"pan_blocks":9,"tilt_blocks":9,"fov_width":3,"fov_height":3}}"#).unwrap();
        assert_eq!(c.prior, 0.5);
        assert_eq!(c.sensor, SensorModel::default());
        assert_eq!(c.preferences.mode, PreferenceMode::Explore);
        assert_eq!(c.start, Fixation::new(0, 0));
    }

    #[test]
    fn from_json_reports_paths() {
        let err = PlannerConfig::from_json(
            r#"{"grid":{"pan_blocks":9,"tilt_blocks":9,"fov_width":3,"fov_height":3},"sensor":{"p_hit":"x"}}"#,
        )
        .unwrap_err();
        match err {
            Error::Config { path, .. } => assert!(path.starts_with("sensor"), "{path}"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn validation_names_fields() {
        let mut c = config();
        c.leak = 3.0;
        match Agent::new(c).unwrap_err() {
            Error::Config { path, .. } => assert_eq!(path, "leak"),
            e => panic!("unexpected {e}"),
        }
        let mut c = config();
        c.start = Fixation::new(9, 0);
        match c.validate("planner.").unwrap_err() {
            Error::Config { path, .. } => assert_eq!(path, "planner.start"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn handle_frame_updates_and_plans() {
        let mut agent = Agent::new(config()).unwrap();
        let msg = FrameMessage {
            t: 5,
            fixation: Fixation::new(4, 4),
            detections: vec![Detection::new(BBox::new(0.4, 0.4, 0.2, 0.2), 1.0, "person")],
        };
        let action = agent.handle_frame(&msg).unwrap();
        assert_eq!(action.t, 5);
        assert_eq!(agent.belief().fixation, Fixation::new(4, 4));
        assert_eq!(agent.belief().presence(Fixation::new(4, 4)), 1.0);
        assert_eq!(agent.belief().presence(Fixation::new(3, 3)), 0.0);
        // the observed window has no information left
        assert!(action.fixation.chebyshev(&Fixation::new(4, 4)) >= 3);
    }

    #[test]
    fn rejects_out_of_grid_frame() {
        let mut agent = Agent::new(config()).unwrap();
        let msg = FrameMessage {
            t: 0,
            fixation: Fixation::new(12, 0),
            detections: vec![],
        };
        assert!(matches!(agent.handle_frame(&msg), Err(Error::OutOfBounds { .. })));
    }
}
