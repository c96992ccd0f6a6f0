use std::sync::OnceLock;

use ndarray::{Array1, Array2, ArrayView1};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Relative tolerance used when the spectral norm is computed implicitly
/// (Lipschitz constants, optimal smoothing parameters).
pub const SPECTRAL_TOL: f64 = 1e-12;

const POWER_ITERATION_CAP: usize = 10_000;
const POWER_ITERATION_SEED: u64 = 0x5CA1_AB1E;

/// One per-feature block `A_g`: a dense `nrows × cols.len()` matrix acting on
/// the features listed in `cols`. For grid TV, rows are forward differences;
/// for mesh TV, rows are least-squares gradient weights.
#[derive(Debug, Clone)]
pub struct GroupBlock<T> {
    cols: Vec<usize>,
    /// Row-major entries, `nrows * cols.len()` long.
    data: Vec<T>,
    nrows: usize,
}

impl<T: Real> GroupBlock<T> {
    pub fn new(cols: Vec<usize>, data: Vec<T>, nrows: usize) -> Self {
        assert_eq!(data.len(), nrows * cols.len(), "block shape mismatch");
        assert!(nrows == 0 || !cols.is_empty(), "rows need columns");
        Self { cols, data, nrows }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn cols(&self) -> &[usize] {
        &self.cols
    }

    pub fn row(&self, r: usize) -> &[T] {
        let w = self.cols.len();
        &self.data[r * w..(r + 1) * w]
    }
}

/// The stacked structure matrix `A`: an ordered list of per-feature blocks
/// whose vertical concatenation has shape `total_rows × p`. The group norms
/// `‖A_g v‖₂` define the total-variation penalty.
#[derive(Debug)]
pub struct GroupLinearOperator<T> {
    p: usize,
    groups: Vec<GroupBlock<T>>,
    /// Starting row of each group in the stacked output; last entry is total_rows.
    row_offsets: Vec<usize>,
    total_rows: usize,
    /// Largest singular value, computed on first use and reused afterwards.
    spectral: OnceLock<T>,
}

impl<T: Real> GroupLinearOperator<T> {
    /// Builds the operator from per-feature blocks. Every referenced column
    /// must lie in `[0, p)`.
    pub fn from_groups(p: usize, groups: Vec<GroupBlock<T>>) -> Result<Self> {
        let mut row_offsets = Vec::with_capacity(groups.len() + 1);
        let mut total_rows = 0;
        for block in &groups {
            row_offsets.push(total_rows);
            total_rows += block.nrows();
            if let Some(&c) = block.cols().iter().find(|&&c| c >= p) {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    actual: c + 1,
                });
            }
        }
        row_offsets.push(total_rows);
        Ok(Self {
            p,
            groups,
            row_offsets,
            total_rows,
            spectral: OnceLock::new(),
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn total_rows(&self) -> usize {
        self.total_rows
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn groups(&self) -> &[GroupBlock<T>] {
        &self.groups
    }

    /// Starting row of group `g` in the stacked vector.
    pub fn row_offset(&self, g: usize) -> usize {
        self.row_offsets[g]
    }

    /// Stacked application `A v`, the concatenation of `A_g v` in group order.
    pub fn apply(&self, v: ArrayView1<'_, T>) -> Result<Array1<T>> {
        if v.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                actual: v.len(),
            });
        }
        let mut out = Array1::zeros(self.total_rows);
        self.apply_into(v, &mut out);
        Ok(out)
    }

    pub(crate) fn apply_into(&self, v: ArrayView1<'_, T>, out: &mut Array1<T>) {
        let mut r = 0;
        for block in &self.groups {
            let w = block.cols.len();
            for row in block.data.chunks_exact(w.max(1)).take(block.nrows) {
                let mut acc = T::zero();
                for (coef, &c) in row.iter().zip(&block.cols) {
                    acc = acc + *coef * v[c];
                }
                out[r] = acc;
                r += 1;
            }
        }
        debug_assert_eq!(r, self.total_rows);
    }

    /// Adjoint application `Aᵀ y` for a stacked vector `y`.
    pub fn apply_adjoint(&self, y: ArrayView1<'_, T>) -> Result<Array1<T>> {
        if y.len() != self.total_rows {
            return Err(Error::DimensionMismatch {
                expected: self.total_rows,
                actual: y.len(),
            });
        }
        let mut out = Array1::zeros(self.p);
        self.adjoint_into(y, &mut out);
        Ok(out)
    }

    pub(crate) fn adjoint_into(&self, y: ArrayView1<'_, T>, out: &mut Array1<T>) {
        out.fill(T::zero());
        let mut r = 0;
        for block in &self.groups {
            let w = block.cols.len();
            for row in block.data.chunks_exact(w.max(1)).take(block.nrows) {
                let yr = y[r];
                for (coef, &c) in row.iter().zip(&block.cols) {
                    out[c] = out[c] + *coef * yr;
                }
                r += 1;
            }
        }
    }

    /// Largest singular value `‖A‖₂` to relative tolerance `tol`, via power
    /// iteration on `AᵀA` from a fixed seeded start. The first call decides
    /// the cached value; later calls return it regardless of `tol`.
    pub fn spectral_norm(&self, tol: T) -> Result<T> {
        if tol <= T::zero() {
            return Err(Error::InvalidParameter(
                "spectral norm tolerance must be positive".into(),
            ));
        }
        Ok(*self.spectral.get_or_init(|| self.power_iteration(tol)))
    }

    /// Cached spectral norm at the default tolerance.
    pub fn spectral_norm_cached(&self) -> T {
        *self
            .spectral
            .get_or_init(|| self.power_iteration(T::of(SPECTRAL_TOL)))
    }

    fn power_iteration(&self, tol: T) -> T {
        if self.total_rows == 0
            || self
                .groups
                .iter()
                .all(|b| b.data.iter().all(|x| x.is_zero()))
        {
            return T::zero();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(POWER_ITERATION_SEED);
        let mut x = self.random_unit(&mut rng);
        let mut ax = Array1::zeros(self.total_rows);
        let mut y = Array1::zeros(self.p);
        let mut ray_prev = T::zero();
        for iter in 0..POWER_ITERATION_CAP {
            self.apply_into(x.view(), &mut ax);
            self.adjoint_into(ax.view(), &mut y);
            let ray = x.dot(&y);
            let ny = y.dot(&y).sqrt();
            if ny == T::zero() {
                // x landed exactly in the null space; restart elsewhere.
                x = self.random_unit(&mut rng);
                continue;
            }
            if iter > 0 && (ray - ray_prev).abs() <= tol * ray {
                return ray.sqrt();
            }
            ray_prev = ray;
            x.zip_mut_with(&y, |xi, &yi| *xi = yi / ny);
        }
        ray_prev.sqrt()
    }

    fn random_unit(&self, rng: &mut ChaCha8Rng) -> Array1<T> {
        loop {
            let x = Array1::from_shape_fn(self.p, |_| T::of(StandardNormal.sample(rng)));
            let n = x.dot(&x).sqrt();
            if n > T::zero() {
                return x / n;
            }
        }
    }

    /// All nonzero entries as `(row, col, value)` triplets in stacked order.
    pub fn iter_entries(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.groups
            .iter()
            .zip(&self.row_offsets)
            .flat_map(|(block, &start)| {
                let w = block.cols.len();
                (0..block.nrows).flat_map(move |r| {
                    block.data[r * w..(r + 1) * w]
                        .iter()
                        .zip(&block.cols)
                        .filter(|(coef, _)| !coef.is_zero())
                        .map(move |(&coef, &c)| (start + r, c, coef))
                })
            })
    }

    /// Dense materialization, for oracles and small problems only.
    pub fn to_dense(&self) -> Array2<T> {
        let mut a = Array2::zeros((self.total_rows, self.p));
        for (r, c, val) in self.iter_entries() {
            a[[r, c]] = val;
        }
        a
    }
}
