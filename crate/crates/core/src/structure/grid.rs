use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::structure::operator::{GroupBlock, GroupLinearOperator};

/// A masked voxel grid. Cells are linearized i-fastest: cell `(i, j, k)` maps
/// to `i + ni·(j + nj·k)`, and in-mask cells are numbered in that scan order.
/// A 2D image uses `nk = 1`.
#[derive(Debug, Clone)]
pub struct GridMask {
    dims: (usize, usize, usize),
    inside: Vec<bool>,
    /// cell → feature index for in-mask cells.
    index_map: Vec<Option<usize>>,
    /// feature index → cell coordinates.
    cells: Vec<(usize, usize, usize)>,
}

impl GridMask {
    /// Builds a mask from per-cell flags in i-fastest order.
    pub fn from_flags(dims: (usize, usize, usize), inside: Vec<bool>) -> Result<Self> {
        let (ni, nj, nk) = dims;
        if ni == 0 || nj == 0 || nk == 0 {
            return Err(Error::InvalidParameter(
                "grid dimensions must be positive".into(),
            ));
        }
        let len = ni * nj * nk;
        if inside.len() != len {
            return Err(Error::DimensionMismatch {
                expected: len,
                actual: inside.len(),
            });
        }
        let mut index_map = vec![None; len];
        let mut cells = Vec::new();
        for k in 0..nk {
            for j in 0..nj {
                for i in 0..ni {
                    let l = i + ni * (j + nj * k);
                    if inside[l] {
                        index_map[l] = Some(cells.len());
                        cells.push((i, j, k));
                    }
                }
            }
        }
        Ok(Self {
            dims,
            inside,
            index_map,
            cells,
        })
    }

    /// All-inside grid.
    pub fn full(ni: usize, nj: usize, nk: usize) -> Result<Self> {
        Self::from_flags((ni, nj, nk), vec![true; ni * nj * nk])
    }

    /// All-inside 2D image of width `w` (i axis) and height `h` (j axis).
    pub fn full_2d(w: usize, h: usize) -> Result<Self> {
        Self::full(w, h, 1)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    /// Number of in-mask cells, i.e. the feature count.
    pub fn p(&self) -> usize {
        self.cells.len()
    }

    pub fn flags(&self) -> &[bool] {
        &self.inside
    }

    pub fn is_inside(&self, i: usize, j: usize, k: usize) -> bool {
        let (ni, nj, nk) = self.dims;
        i < ni && j < nj && k < nk && self.inside[i + ni * (j + nj * k)]
    }

    /// Feature index of an in-mask cell.
    pub fn feature_index(&self, i: usize, j: usize, k: usize) -> Option<usize> {
        let (ni, nj, nk) = self.dims;
        if i < ni && j < nj && k < nk {
            self.index_map[i + ni * (j + nj * k)]
        } else {
            None
        }
    }

    /// Cell coordinates of feature `g`.
    pub fn cell_of(&self, g: usize) -> (usize, usize, usize) {
        self.cells[g]
    }
}

/// Builds the grid TV operator: one group per in-mask voxel, whose rows are
/// the forward differences (+1 at the neighbor, −1 at the voxel) in the i, j
/// and k directions; rows whose neighbor lies outside the mask are dropped.
pub fn build_grid_tv_operator<T: Real>(mask: &GridMask) -> Result<GroupLinearOperator<T>> {
    if mask.p() == 0 {
        return Err(Error::EmptyMask);
    }
    let mut groups = Vec::with_capacity(mask.p());
    for g in 0..mask.p() {
        let (i, j, k) = mask.cell_of(g);
        let forward = [
            mask.feature_index(i + 1, j, k),
            mask.feature_index(i, j + 1, k),
            mask.feature_index(i, j, k + 1),
        ];
        let mut cols = vec![g];
        let mut data = Vec::new();
        let mut nrows = 0;
        for nbr in forward.into_iter().flatten() {
            cols.push(nbr);
            nrows += 1;
        }
        let width = cols.len();
        for (r, _) in cols.iter().enumerate().skip(1) {
            let mut row = vec![T::zero(); width];
            row[0] = -T::one();
            row[r] = T::one();
            data.extend(row);
        }
        debug_assert_eq!(data.len(), nrows * width);
        groups.push(GroupBlock::new(cols, data, nrows));
    }
    GroupLinearOperator::from_groups(mask.p(), groups)
}
