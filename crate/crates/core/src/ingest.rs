//! Turns detector output into observation frames.
//!
//! The camera image is split into `fov_width x fov_height` uniform tiles, one
//! per field-of-view cell. Each accepted detection lends its confidence to the
//! tiles it is assigned to and every cell keeps the maximum it receives.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Fixation, GridSpec};
use crate::model::ObservationFrame;

/// Axis-aligned box in normalized image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl From<[f64; 4]> for BBox {
    fn from([x, y, width, height]: [f64; 4]) -> Self {
        Self { x, y, width, height }
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x, b.y, b.width, b.height]
    }
}

impl BBox {
    pub fn new(x: f64, y: f64, width: f64, height: f64) -> Self {
        Self { x, y, width, height }
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.width / 2.0, self.y + self.height / 2.0)
    }

    /// The box clipped to the unit square, or `None` if it is malformed or
    /// falls entirely outside the image.
    pub fn clamped(&self) -> Option<BBox> {
        let vals = [self.x, self.y, self.width, self.height];
        if vals.iter().any(|v| !v.is_finite()) || self.width <= 0.0 || self.height <= 0.0 {
            return None;
        }
        let x0 = self.x.clamp(0.0, 1.0);
        let y0 = self.y.clamp(0.0, 1.0);
        let x1 = (self.x + self.width).clamp(0.0, 1.0);
        let y1 = (self.y + self.height).clamp(0.0, 1.0);
        (x1 > x0 && y1 > y0).then(|| BBox::new(x0, y0, x1 - x0, y1 - y0))
    }

    fn intersection(&self, other: &BBox) -> f64 {
        let w = (self.x + self.width).min(other.x + other.width) - self.x.max(other.x);
        let h = (self.y + self.height).min(other.y + other.height) - self.y.max(other.y);
        if w > 0.0 && h > 0.0 {
            w * h
        } else {
            0.0
        }
    }
}

/// One detector output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BBox,
    pub confidence: f64,
    #[serde(rename = "class")]
    pub class_name: String,
}

impl Detection {
    pub fn new(bbox: BBox, confidence: f64, class_name: impl Into<String>) -> Self {
        Self {
            bbox,
            confidence,
            class_name: class_name.into(),
        }
    }
}

/// Rule for mapping a bounding box to field-of-view tiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Assignment {
    /// The tile containing the box center.
    #[default]
    Center,
    /// Every tile covering at least `overlap_threshold` of the box area.
    Overlap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub target_classes: BTreeSet<String>,
    pub assignment: Assignment,
    pub overlap_threshold: f64,
    pub confidence_floor: f64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            target_classes: BTreeSet::from(["person".to_string()]),
            assignment: Assignment::Center,
            overlap_threshold: 0.2,
            confidence_floor: 0.25,
        }
    }
}

impl IngestConfig {
    pub fn with_classes<I, S>(classes: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            target_classes: classes.into_iter().map(Into::into).collect(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("overlap_threshold", self.overlap_threshold),
            ("confidence_floor", self.confidence_floor),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config {
                    path: format!("ingest.{name}"),
                    message: format!("must lie in [0, 1], got {v}"),
                });
            }
        }
        Ok(())
    }
}

/// Counts of detections that did not contribute evidence.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub malformed: usize,
    pub other_class: usize,
    pub below_floor: usize,
}

/// Builds the observation frame for one camera image.
pub fn detections_to_frame(
    dets: &[Detection],
    fixation: Fixation,
    t: u64,
    cfg: &IngestConfig,
    grid: &GridSpec,
) -> Result<(ObservationFrame, IngestReport)> {
    cfg.validate()?;
    let mut frame = ObservationFrame::empty(grid, fixation, t)?;
    let mut report = IngestReport::default();
    let (cols, rows) = (grid.fov_width(), grid.fov_height());

    for det in dets {
        let Some(bbox) = det.bbox.clamped() else {
            report.malformed += 1;
            continue;
        };
        if !(0.0..=1.0).contains(&det.confidence) {
            report.malformed += 1;
            continue;
        }
        if !cfg.target_classes.contains(&det.class_name) {
            report.other_class += 1;
            continue;
        }
        if det.confidence < cfg.confidence_floor {
            report.below_floor += 1;
            continue;
        }
        let mut assign = |col: usize, row: usize| {
            let i = grid.cell_index(col, row);
            if let Some(e) = frame.evidence[i].as_mut() {
                *e = e.max(det.confidence);
            }
        };
        match cfg.assignment {
            Assignment::Center => {
                let (cx, cy) = bbox.center();
                let col = ((cx * cols as f64) as usize).min(cols - 1);
                let row = ((cy * rows as f64) as usize).min(rows - 1);
                assign(col, row);
            }
            Assignment::Overlap => {
                let needed = cfg.overlap_threshold * bbox.area();
                for col in 0..cols {
                    for row in 0..rows {
                        let overlap = tile_rect(col, row, cols, rows).intersection(&bbox);
                        if overlap > 0.0 && overlap >= needed {
                            assign(col, row);
                        }
                    }
                }
            }
        }
    }
    if report.malformed > 0 {
        log::warn!("frame t={t}: skipped {} malformed detection(s)", report.malformed);
    }
    Ok((frame, report))
}

/// The image rectangle of field-of-view tile `(col, row)`.
pub fn tile_rect(col: usize, row: usize, cols: usize, rows: usize) -> BBox {
    let (w, h) = (1.0 / cols as f64, 1.0 / rows as f64);
    BBox::new(col as f64 * w, row as f64 * h, w, h)
}
