//! Text renderings of episode traces.
//!
//! Belief glyphs: `?` unknown, `#` believed present, `.` believed absent. In
//! the grid view the field of view is bracketed; the separate field-of-view
//! panel has exactly `fov_width x fov_height` glyphs with `-` for cells off the
//! grid.

use std::fmt::Write;

use crate::grid::GridSpec;
use crate::sim::StepRecord;

pub const CSV_HEADER: &str = "t,action_pan,action_tilt,evidence_nonzero,entropy_total,coverage,latency_us";

fn glyph(q: f64, observed: Option<bool>) -> char {
    match observed {
        Some(false) => '?',
        Some(true) if q >= 0.5 => '#',
        Some(true) => '.',
        None if q >= 0.9 => '#',
        None if q <= 0.1 => '.',
        None => '?',
    }
}

/// Draws one record. Records without a belief snapshot render as a note.
pub fn render_step(record: &StepRecord) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "t={} action=({},{}) coverage={:.3} entropy={:.3} nats",
        record.t, record.action.pan, record.action.tilt, record.coverage, record.entropy_total
    );
    let (Some(grid), Some(belief)) = (record.grid, record.belief.as_ref()) else {
        out.push_str("  (no belief snapshot)\n");
        return out;
    };
    if belief.len() != grid.num_blocks() || !grid.contains(record.action) {
        out.push_str("  (snapshot does not match grid)\n");
        return out;
    }
    let observed = |i: usize| record.observed.as_ref().and_then(|o| o.get(i).copied());
    let fov = fov_mask(&grid, record);

    for tilt in 0..grid.tilt_blocks() {
        out.push_str("  ");
        for pan in 0..grid.pan_blocks() {
            let i = grid.block_index((pan, tilt).into());
            let g = glyph(belief[i], observed(i));
            if fov[i] {
                let _ = write!(out, "[{g}]");
            } else {
                let _ = write!(out, " {g} ");
            }
        }
        out.push('\n');
    }

    out.push_str("  fov:\n");
    let cells = grid.visible_blocks(record.action).expect("checked above");
    for row in 0..grid.fov_height() {
        out.push_str("    ");
        for col in 0..grid.fov_width() {
            let c = &cells[grid.cell_index(col, row)];
            out.push(match c.block {
                Some(b) => {
                    let i = grid.block_index(b);
                    glyph(belief[i], observed(i))
                }
                None => '-',
            });
        }
        out.push('\n');
    }
    out
}

fn fov_mask(grid: &GridSpec, record: &StepRecord) -> Vec<bool> {
    let mut mask = vec![false; grid.num_blocks()];
    if let Ok(cells) = grid.visible_blocks(record.action) {
        for b in cells.into_iter().filter_map(|c| c.block) {
            mask[grid.block_index(b)] = true;
        }
    }
    mask
}

pub fn render_ascii(records: &[StepRecord]) -> String {
    records.iter().map(render_step).collect::<Vec<_>>().join("\n")
}

pub fn render_csv(records: &[StepRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.t, r.action.pan, r.action.tilt, r.evidence_nonzero, r.entropy_total, r.coverage, r.latency_us
        );
    }
    out
}
