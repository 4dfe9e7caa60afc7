//! Grid geometry: the pan/tilt block grid, the camera field of view and the
//! fixation action space.
//!
//! Blocks are addressed by `(pan, tilt)`. A fixation is the block the camera
//! centers on; its field of view spans `fov_width x fov_height` blocks with the
//! top-left cell at `(pan - (fov_width - 1) / 2, tilt - (fov_height - 1) / 2)`.
//! Cells that fall off the grid are reported as outside-grid and carry no
//! evidence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A block position on the grid. Fixations and blocks share this type.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Block {
    pub pan: usize,
    pub tilt: usize,
}

/// The proprioceptive state: where the camera currently looks.
pub type Fixation = Block;

impl Block {
    pub const fn new(pan: usize, tilt: usize) -> Self {
        Self { pan, tilt }
    }

    /// Chebyshev distance, the number of single-block camera moves between two points.
    pub fn chebyshev(&self, other: &Block) -> usize {
        self.pan.abs_diff(other.pan).max(self.tilt.abs_diff(other.tilt))
    }
}

impl From<[usize; 2]> for Block {
    fn from([pan, tilt]: [usize; 2]) -> Self {
        Self { pan, tilt }
    }
}

impl From<Block> for [usize; 2] {
    fn from(b: Block) -> Self {
        [b.pan, b.tilt]
    }
}

impl From<(usize, usize)> for Block {
    fn from((pan, tilt): (usize, usize)) -> Self {
        Self { pan, tilt }
    }
}

/// Geometry of the block grid and camera field of view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawGridSpec", into = "RawGridSpec")]
pub struct GridSpec {
    pan_blocks: usize,
    tilt_blocks: usize,
    fov_width: usize,
    fov_height: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGridSpec {
    pan_blocks: usize,
    tilt_blocks: usize,
    fov_width: usize,
    fov_height: usize,
}

impl TryFrom<RawGridSpec> for GridSpec {
    type Error = Error;

    fn try_from(raw: RawGridSpec) -> Result<Self> {
        GridSpec::new(raw.pan_blocks, raw.tilt_blocks, raw.fov_width, raw.fov_height)
    }
}

impl From<GridSpec> for RawGridSpec {
    fn from(g: GridSpec) -> Self {
        Self {
            pan_blocks: g.pan_blocks,
            tilt_blocks: g.tilt_blocks,
            fov_width: g.fov_width,
            fov_height: g.fov_height,
        }
    }
}

/// One cell of the field of view.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FovCell {
    /// Column in the field of view, along the pan axis.
    pub col: usize,
    /// Row in the field of view, along the tilt axis.
    pub row: usize,
    /// The grid block seen through this cell, `None` when it falls outside the grid.
    pub block: Option<Block>,
}

impl GridSpec {
    pub fn new(pan_blocks: usize, tilt_blocks: usize, fov_width: usize, fov_height: usize) -> Result<Self> {
        if pan_blocks == 0 || tilt_blocks == 0 {
            return Err(Error::InvalidGrid(format!(
                "grid must have at least one block per axis, got {pan_blocks}x{tilt_blocks}"
            )));
        }
        if fov_width == 0 || fov_width > pan_blocks {
            return Err(Error::InvalidGrid(format!(
                "fov width {fov_width} must lie in [1, {pan_blocks}]"
            )));
        }
        if fov_height == 0 || fov_height > tilt_blocks {
            return Err(Error::InvalidGrid(format!(
                "fov height {fov_height} must lie in [1, {tilt_blocks}]"
            )));
        }
        Ok(Self {
            pan_blocks,
            tilt_blocks,
            fov_width,
            fov_height,
        })
    }

    pub fn pan_blocks(&self) -> usize {
        self.pan_blocks
    }

    pub fn tilt_blocks(&self) -> usize {
        self.tilt_blocks
    }

    pub fn fov_width(&self) -> usize {
        self.fov_width
    }

    pub fn fov_height(&self) -> usize {
        self.fov_height
    }

    /// Number of blocks, which is also the number of fixation points.
    pub fn num_blocks(&self) -> usize {
        self.pan_blocks * self.tilt_blocks
    }

    pub fn num_fov_cells(&self) -> usize {
        self.fov_width * self.fov_height
    }

    pub fn contains(&self, b: Block) -> bool {
        b.pan < self.pan_blocks && b.tilt < self.tilt_blocks
    }

    pub fn check(&self, b: Block) -> Result<()> {
        if self.contains(b) {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                pan: b.pan,
                tilt: b.tilt,
                pan_blocks: self.pan_blocks,
                tilt_blocks: self.tilt_blocks,
            })
        }
    }

    /// Row-major index of a block (`pan * tilt_blocks + tilt`).
    #[inline]
    pub fn block_index(&self, b: Block) -> usize {
        b.pan * self.tilt_blocks + b.tilt
    }

    #[inline]
    pub fn block_at(&self, index: usize) -> Block {
        Block::new(index / self.tilt_blocks, index % self.tilt_blocks)
    }

    /// Row-major index of a field-of-view cell (`col * fov_height + row`).
    #[inline]
    pub fn cell_index(&self, col: usize, row: usize) -> usize {
        col * self.fov_height + row
    }

    /// The cell at the camera center. Even extents round toward the top-left.
    pub fn center_cell(&self) -> (usize, usize) {
        ((self.fov_width - 1) / 2, (self.fov_height - 1) / 2)
    }

    /// Every fixation point in row-major order.
    pub fn all_fixations(&self) -> Vec<Fixation> {
        (0..self.num_blocks()).map(|i| self.block_at(i)).collect()
    }

    /// The `fov_width * fov_height` cells seen from fixation `p`, in row-major
    /// cell order.
    pub fn visible_blocks(&self, p: Fixation) -> Result<Vec<FovCell>> {
        self.check(p)?;
        let mut cells = Vec::with_capacity(self.num_fov_cells());
        self.for_each_cell(p, |col, row, block| cells.push(FovCell { col, row, block }));
        Ok(cells)
    }

    /// Visits the field of view of an in-bounds fixation without allocating.
    pub(crate) fn for_each_cell(&self, p: Fixation, mut f: impl FnMut(usize, usize, Option<Block>)) {
        let (cw, ch) = self.center_cell();
        let origin_pan = p.pan as isize - cw as isize;
        let origin_tilt = p.tilt as isize - ch as isize;
        for col in 0..self.fov_width {
            let pan = origin_pan + col as isize;
            for row in 0..self.fov_height {
                let tilt = origin_tilt + row as isize;
                let block = (pan >= 0
                    && tilt >= 0
                    && (pan as usize) < self.pan_blocks
                    && (tilt as usize) < self.tilt_blocks)
                    .then(|| Block::new(pan as usize, tilt as usize));
                f(col, row, block);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use proptest::prelude::*;

    use super::*;

    fn grid(k: usize, l: usize, w: usize, h: usize) -> GridSpec {
        GridSpec::new(k, l, w, h).unwrap()
    }

    #[test]
    fn centered_interior_fixation() {
        let g = grid(9, 9, 3, 3);
        let cells = g.visible_blocks(Block::new(4, 4)).unwrap();
        assert_eq!(cells.len(), 9);
        let blocks: HashSet<_> = cells.iter().map(|c| c.block.unwrap()).collect();
        let expected: HashSet<_> = (3..=5)
            .flat_map(|k| (3..=5).map(move |l| Block::new(k, l)))
            .collect();
        assert_eq!(blocks, expected);
    }

    #[test]
    fn corner_fixation_is_clipped() {
        let g = grid(9, 9, 3, 3);
        let cells = g.visible_blocks(Block::new(0, 0)).unwrap();
        assert_eq!(cells.len(), 9);
        assert_eq!(cells.iter().filter(|c| c.block.is_none()).count(), 5);
        let inside: HashSet<_> = cells.iter().filter_map(|c| c.block).collect();
        let expected: HashSet<_> = [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().map(Block::from).collect();
        assert_eq!(inside, expected);
    }

    #[test]
    fn degenerate_grid() {
        let g = grid(1, 1, 1, 1);
        let cells = g.visible_blocks(Block::new(0, 0)).unwrap();
        assert_eq!(cells, vec![FovCell { col: 0, row: 0, block: Some(Block::new(0, 0)) }]);
    }

    #[test]
    fn out_of_bounds_fixation() {
        let g = grid(4, 3, 2, 2);
        assert!(matches!(g.visible_blocks(Block::new(4, 0)), Err(Error::OutOfBounds { .. })));
        assert!(matches!(g.visible_blocks(Block::new(0, 3)), Err(Error::OutOfBounds { .. })));
    }

    #[test]
    fn center_cells() {
        assert_eq!(grid(9, 9, 3, 3).center_cell(), (1, 1));
        assert_eq!(grid(9, 9, 1, 1).center_cell(), (0, 0));
        assert_eq!(grid(9, 9, 5, 3).center_cell(), (2, 1));
        assert_eq!(grid(9, 9, 4, 2).center_cell(), (1, 0));
    }

    #[test]
    fn fixations_row_major() {
        let fx: Vec<[usize; 2]> = grid(2, 2, 1, 1).all_fixations().into_iter().map(Into::into).collect();
        assert_eq!(fx, vec![[0, 0], [0, 1], [1, 0], [1, 1]]);
        assert_eq!(grid(1, 3, 1, 1).all_fixations().len(), 3);
        assert_eq!(grid(9, 9, 3, 3).all_fixations().len(), 81);
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(GridSpec::new(0, 3, 1, 1).is_err());
        assert!(GridSpec::new(3, 3, 4, 1).is_err());
        assert!(GridSpec::new(3, 3, 1, 0).is_err());
    }

    #[test]
    fn serde_validates() {
        let g: GridSpec =
            serde_json::from_str(r#"{"pan_blocks":9,"tilt_blocks":9,"fov_width":3,"fov_height":3}"#).unwrap();
        assert_eq!(g, grid(9, 9, 3, 3));
        assert!(serde_json::from_str::<GridSpec>(r#"{"pan_blocks":2,"tilt_blocks":9,"fov_width":3,"fov_height":3}"#).is_err());
    }

    fn arb_grid() -> impl Strategy<Value = GridSpec> {
        (1usize..10, 1usize..10)
            .prop_flat_map(|(k, l)| (Just(k), Just(l), 1..=k, 1..=l))
            .prop_map(|(k, l, w, h)| grid(k, l, w, h))
    }

    proptest! {
        #[test]
        fn fov_is_bijective_on_in_grid_cells(g in arb_grid()) {
            for p in g.all_fixations() {
                let cells = g.visible_blocks(p).unwrap();
                prop_assert_eq!(cells.len(), g.num_fov_cells());
                let inside: Vec<_> = cells.iter().filter_map(|c| c.block).collect();
                let distinct: HashSet<_> = inside.iter().copied().collect();
                prop_assert_eq!(inside.len(), distinct.len());
                // the fixation itself is always seen at the center cell
                let (cw, ch) = g.center_cell();
                prop_assert_eq!(cells[g.cell_index(cw, ch)].block, Some(p));
            }
        }

        #[test]
        fn every_block_is_observable(g in arb_grid()) {
            let seen: HashSet<_> = g
                .all_fixations()
                .into_iter()
                .flat_map(|p| g.visible_blocks(p).unwrap())
                .filter_map(|c| c.block)
                .collect();
            prop_assert_eq!(seen.len(), g.num_blocks());
        }

        #[test]
        fn translation_consistent(g in arb_grid(), dk in 0usize..4, dl in 0usize..4) {
            for p in g.all_fixations() {
                let q = Block::new(p.pan + dk, p.tilt + dl);
                if !g.contains(q) {
                    continue;
                }
                let a = g.visible_blocks(p).unwrap();
                let b = g.visible_blocks(q).unwrap();
                for (ca, cb) in a.iter().zip(&b) {
                    if let (Some(x), Some(y)) = (ca.block, cb.block) {
                        prop_assert_eq!(Block::new(x.pan + dk, x.tilt + dl), y);
                    }
                }
            }
        }
    }
}
