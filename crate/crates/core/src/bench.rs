//! Planning latency measurement.
//!
//! Each repetition folds one random observation frame into the belief and then
//! evaluates every fixation, the work done per camera frame. One warm-up
//! repetition runs first and is discarded.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::inference::update_beliefs;
use crate::model::{BeliefState, ObservationFrame, PreferenceMode, Preferences, SensorModel};
use crate::planner::{select_action, Selector};

pub const MIN_REPETITIONS: usize = 100;
pub const WARMUP_REPETITIONS: usize = 1;

/// Summary of latency samples, in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatencyStats {
    pub samples: usize,
    pub min_us: f64,
    pub median_us: f64,
    pub p99_us: f64,
    pub max_us: f64,
}

impl LatencyStats {
    pub fn from_durations(samples: &[Duration]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mut us: Vec<f64> = samples.iter().map(|d| d.as_secs_f64() * 1e6).collect();
        us.sort_by(f64::total_cmp);
        Some(Self {
            samples: us.len(),
            min_us: us[0],
            median_us: percentile(&us, 50.0),
            p99_us: percentile(&us, 99.0),
            max_us: us[us.len() - 1],
        })
    }
}

/// Nearest-rank percentile of an ascending, non-empty slice.
pub fn percentile(sorted: &[f64], pct: f64) -> f64 {
    let rank = ((pct / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Sizes of the model tables the planner keeps in memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ModelSize {
    /// One presence probability per block.
    pub belief: usize,
    /// Likelihood entries: 2 presence states x 3 observation bins.
    pub likelihood: usize,
    /// One log-preference per field-of-view cell.
    pub preferences: usize,
}

impl ModelSize {
    pub fn of(grid: &GridSpec) -> Self {
        Self {
            belief: grid.num_blocks(),
            likelihood: 6,
            preferences: grid.num_fov_cells(),
        }
    }

    pub fn total(&self) -> usize {
        self.belief + self.likelihood + self.preferences
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub grid: GridSpec,
    pub repetitions: usize,
    pub stats: LatencyStats,
    pub model: ModelSize,
    #[serde(skip)]
    pub samples: Vec<Duration>,
}

/// Times `repetitions` update-and-plan steps on `grid` after one warm-up run.
pub fn bench_grid(grid: GridSpec, repetitions: usize, seed: u64) -> Result<BenchRow> {
    if repetitions < MIN_REPETITIONS {
        return Err(Error::Config {
            path: "reps".into(),
            message: format!("need at least {MIN_REPETITIONS} repetitions, got {repetitions}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sensor = SensorModel::default();
    let prefs = Preferences::new(PreferenceMode::Seek, 1.0, &grid);
    let q = (0..grid.num_blocks()).map(|_| rng.random::<f64>()).collect();
    let mut belief = BeliefState::from_probabilities(grid, q, grid.block_at(0))?;
    let mut selector = Selector::Argmin;
    let fixations = grid.all_fixations();

    let mut samples = Vec::with_capacity(repetitions);
    for rep in 0..WARMUP_REPETITIONS + repetitions {
        let fixation = fixations[rng.random_range(0..fixations.len())];
        let mut frame = ObservationFrame::empty(&grid, fixation, rep as u64)?;
        for e in frame.evidence.iter_mut().flatten() {
            *e = if rng.random::<f64>() < 0.1 { rng.random() } else { 0.0 };
        }
        belief.fixation = fixation;

        let started = Instant::now();
        let posterior = update_beliefs(&belief, &frame, &sensor, &grid)?;
        let (next, _) = select_action(&posterior, &sensor, &prefs, &grid, &mut selector)?;
        let elapsed = started.elapsed();

        belief = posterior;
        belief.fixation = next;
        if rep >= WARMUP_REPETITIONS {
            samples.push(elapsed);
        }
    }

    Ok(BenchRow {
        grid,
        repetitions,
        stats: LatencyStats::from_durations(&samples).expect("repetitions >= 100"),
        model: ModelSize::of(&grid),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank_percentiles() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&v, 50.0), 50.0);
        assert_eq!(percentile(&v, 99.0), 99.0);
        assert_eq!(percentile(&v, 100.0), 100.0);
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&[3.0], 99.0), 3.0);
    }

    #[test]
    fn stats_from_durations() {
        let d: Vec<_> = [5u64, 1, 3].iter().map(|&u| Duration::from_micros(u)).collect();
        let s = LatencyStats::from_durations(&d).unwrap();
        assert_eq!((s.samples, s.min_us, s.median_us, s.max_us), (3, 1.0, 3.0, 5.0));
        assert!(LatencyStats::from_durations(&[]).is_none());
    }

    #[test]
    fn records_requested_samples() {
        let g = GridSpec::new(9, 9, 3, 3).unwrap();
        let row = bench_grid(g, 1000, 0).unwrap();
        assert_eq!(row.samples.len(), 1000);
        assert_eq!(row.stats.samples, 1000);
        assert_eq!(row.model.total(), 81 + 6 + 9);
        assert!(bench_grid(g, 99, 0).is_err());
    }
}
