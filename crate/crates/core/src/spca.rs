//! The outer machine: rank-one alternating minimization over (u, v) with the
//! CONESTA inner solver, Hotelling-style deflation across components, and a
//! model container that centers, scores and reconstructs data.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::solver::{PenaltyWeights, RidgeSmoothedProblem, SolverTrace};
use crate::structure::GroupLinearOperator;

const ALTERNATION_CAP: usize = 100;

/// Outcome of one component fit: either a converged (u, v) pair with the
/// trace of the final loading solve, or an exhausted component (the solver
/// returned an all-zero loading, or the data has no energy left).
#[derive(Debug, Clone)]
pub enum ComponentFit<T> {
    Converged {
        u: Array1<T>,
        v: Array1<T>,
        trace: SolverTrace,
    },
    Exhausted,
}

/// A fitted sparse-PCA model: column means, unit-norm components U (n × K),
/// loadings V (p × K, scale carried by v), per-component explained variance,
/// and the solver trace of each component's final loading solve.
#[derive(Debug, Clone)]
pub struct SpcaModel<T> {
    means: Array1<T>,
    u: Array2<T>,
    v: Array2<T>,
    explained_variance: Vec<T>,
    traces: Vec<SolverTrace>,
    weights: PenaltyWeights<T>,
    eps: T,
    seed: u64,
    truncated: bool,
}

/// The best unit-norm component for a fixed loading: Xv/‖Xv‖₂.
pub fn update_u<T: Real>(x: ArrayView2<'_, T>, v: ArrayView1<'_, T>) -> Result<Array1<T>> {
    if x.ncols() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            actual: v.len(),
        });
    }
    let xv = x.dot(&v);
    let norm = xv.dot(&xv).sqrt();
    if norm == T::zero() || !norm.is_finite() {
        return Err(Error::DegenerateLoading);
    }
    Ok(xv / norm)
}

/// Rank-one deflation X − u vᵀ.
pub fn deflate<T: Real>(
    x: ArrayView2<'_, T>,
    u: ArrayView1<'_, T>,
    v: ArrayView1<'_, T>,
) -> Result<Array2<T>> {
    if x.nrows() != u.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            actual: u.len(),
        });
    }
    if x.ncols() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            actual: v.len(),
        });
    }
    let mut out = x.to_owned();
    for (mut row, &ui) in out.rows_mut().into_iter().zip(u.iter()) {
        row.zip_mut_with(&v, |xij, &vj| *xij = *xij - ui * vj);
    }
    Ok(out)
}

fn frobenius_sq<T: Real>(x: ArrayView2<'_, T>) -> T {
    x.iter().fold(T::zero(), |acc, &e| acc + e * e)
}

fn residual_norm<T: Real>(x: ArrayView2<'_, T>, u: ArrayView1<'_, T>, v: ArrayView1<'_, T>) -> T {
    let mut acc = T::zero();
    for (row, &ui) in x.rows().into_iter().zip(u.iter()) {
        for (&xij, &vj) in row.iter().zip(v.iter()) {
            let d = xij - ui * vj;
            acc = acc + d * d;
        }
    }
    acc.sqrt()
}

fn random_unit<T: Real>(n: usize, rng: &mut ChaCha8Rng) -> Array1<T> {
    loop {
        let x = Array1::from_shape_fn(n, |_| T::of(StandardNormal.sample(rng)));
        let norm = x.dot(&x).sqrt();
        if norm > T::zero() {
            return x / norm;
        }
    }
}

/// Fits one component on (already centered) data by alternating
/// v ← CONESTA(Xᵀu/(nλ₂), eps) and u ← Xv/‖Xv‖ from a seeded random unit u⁰,
/// until the relative change of the reconstruction error ‖X − uvᵀ‖_F falls
/// to `eps` (or the alternation cap is reached, which returns the last pair).
pub fn fit_component<T: Real>(
    x: ArrayView2<'_, T>,
    op: &GroupLinearOperator<T>,
    weights: &PenaltyWeights<T>,
    eps: T,
    seed: u64,
) -> Result<ComponentFit<T>> {
    let (n, p) = (x.nrows(), x.ncols());
    if p != op.p() {
        return Err(Error::DimensionMismatch {
            expected: op.p(),
            actual: p,
        });
    }
    if n == 0 {
        return Err(Error::InvalidParameter(
            "data matrix needs at least one row".into(),
        ));
    }
    if eps <= T::zero() || !eps.is_finite() {
        return Err(Error::InvalidParameter(
            "precision must be positive and finite".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = random_unit(n, &mut rng);
    // v⁰ = 0 makes the initial reconstruction error ‖X‖_F.
    let mut err_prev = frobenius_sq(x).sqrt();
    let scale = T::one() / (T::of(n as f64) * weights.l2());

    let mut best = None;
    for _ in 0..ALTERNATION_CAP {
        let b = x.t().dot(&u) * scale;
        let problem = RidgeSmoothedProblem::new(b, *weights, op, n)?;
        let (v, trace) = problem.conesta(eps)?;
        if v.iter().all(|&x| x == T::zero()) {
            return Ok(ComponentFit::Exhausted);
        }
        let u_next = match update_u(x, v.view()) {
            Ok(u) => u,
            Err(Error::DegenerateLoading) => return Ok(ComponentFit::Exhausted),
            Err(e) => return Err(e),
        };
        let err = residual_norm(x, u_next.view(), v.view());
        let converged = err == T::zero() || (err - err_prev).abs() / err <= eps;
        err_prev = err;
        u = u_next.clone();
        best = Some((u_next, v, trace));
        if converged {
            break;
        }
    }
    let (u, v, trace) = best.expect("alternation loop ran at least once");
    Ok(ComponentFit::Converged { u, v, trace })
}

impl<T: Real> SpcaModel<T> {
    /// Fits K components: centers columns, then repeats fit_component and
    /// deflation, recording the explained variance
    /// (‖X_k‖_F² − ‖X_{k+1}‖_F²)/‖X₀‖_F². Component k uses seed + k. If a
    /// component exhausts early the model is truncated and flagged.
    pub fn fit(
        x: ArrayView2<'_, T>,
        op: &GroupLinearOperator<T>,
        k: usize,
        weights: PenaltyWeights<T>,
        eps: T,
        seed: u64,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter(
                "component count must be at least 1".into(),
            ));
        }
        let (n, p) = (x.nrows(), x.ncols());
        if p != op.p() {
            return Err(Error::DimensionMismatch {
                expected: op.p(),
                actual: p,
            });
        }
        if n == 0 {
            return Err(Error::InvalidParameter(
                "data matrix needs at least one row".into(),
            ));
        }

        let means = x.mean_axis(Axis(0)).expect("n > 0");
        let mut resid = x.to_owned();
        for mut row in resid.rows_mut() {
            row.zip_mut_with(&means, |xij, &mj| *xij = *xij - mj);
        }

        let total_energy = frobenius_sq(resid.view());
        let mut energy = total_energy;
        let mut us: Vec<Array1<T>> = Vec::with_capacity(k);
        let mut vs: Vec<Array1<T>> = Vec::with_capacity(k);
        let mut explained = Vec::with_capacity(k);
        let mut traces = Vec::with_capacity(k);
        let mut truncated = false;

        for comp in 0..k {
            let comp_seed = seed.wrapping_add(comp as u64);
            match fit_component(resid.view(), op, &weights, eps, comp_seed)? {
                ComponentFit::Converged { u, v, trace } => {
                    resid = deflate(resid.view(), u.view(), v.view())?;
                    let next_energy = frobenius_sq(resid.view());
                    explained.push(if total_energy > T::zero() {
                        (energy - next_energy) / total_energy
                    } else {
                        T::zero()
                    });
                    energy = next_energy;
                    us.push(u);
                    vs.push(v);
                    traces.push(trace);
                }
                ComponentFit::Exhausted => {
                    truncated = true;
                    break;
                }
            }
        }

        let fitted = us.len();
        let mut u_mat = Array2::zeros((n, fitted));
        let mut v_mat = Array2::zeros((p, fitted));
        for (j, (u, v)) in us.iter().zip(&vs).enumerate() {
            u_mat.column_mut(j).assign(u);
            v_mat.column_mut(j).assign(v);
        }

        Ok(Self {
            means,
            u: u_mat,
            v: v_mat,
            explained_variance: explained,
            traces,
            weights,
            eps,
            seed,
            truncated,
        })
    }

    pub fn k(&self) -> usize {
        self.v.ncols()
    }

    pub fn p(&self) -> usize {
        self.v.nrows()
    }

    pub fn means(&self) -> ArrayView1<'_, T> {
        self.means.view()
    }

    /// Components U, one unit-norm column per fitted component (n × K).
    pub fn components(&self) -> ArrayView2<'_, T> {
        self.u.view()
    }

    /// Loadings V, one column per fitted component (p × K).
    pub fn loadings(&self) -> ArrayView2<'_, T> {
        self.v.view()
    }

    pub fn explained_variance(&self) -> &[T] {
        &self.explained_variance
    }

    pub fn traces(&self) -> &[SolverTrace] {
        &self.traces
    }

    pub fn weights(&self) -> &PenaltyWeights<T> {
        &self.weights
    }

    pub fn eps(&self) -> T {
        self.eps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// True when a component exhausted before reaching the requested count.
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    /// Builds a model directly from its parts; used by deserialization.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        means: Array1<T>,
        u: Array2<T>,
        v: Array2<T>,
        explained_variance: Vec<T>,
        traces: Vec<SolverTrace>,
        weights: PenaltyWeights<T>,
        eps: T,
        seed: u64,
        truncated: bool,
    ) -> Self {
        Self {
            means,
            u,
            v,
            explained_variance,
            traces,
            weights,
            eps,
            seed,
            truncated,
        }
    }

    /// Scores new data by mirroring the training deflation: center, then
    /// sequentially s_k = X v_k/‖v_k‖₂² and X ← X − s_k v_kᵀ. A zero loading
    /// yields a zero score column.
    pub fn transform(&self, x_new: ArrayView2<'_, T>) -> Result<Array2<T>> {
        if x_new.ncols() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                actual: x_new.ncols(),
            });
        }
        let mut resid = x_new.to_owned();
        for mut row in resid.rows_mut() {
            row.zip_mut_with(&self.means, |xij, &mj| *xij = *xij - mj);
        }
        let mut scores = Array2::zeros((x_new.nrows(), self.k()));
        for j in 0..self.k() {
            let v = self.v.column(j);
            let vv = v.dot(&v);
            if vv == T::zero() {
                continue;
            }
            let s = resid.dot(&v) / vv;
            for (mut row, &si) in resid.rows_mut().into_iter().zip(s.iter()) {
                row.zip_mut_with(&v, |xij, &vj| *xij = *xij - si * vj);
            }
            scores.column_mut(j).assign(&s);
        }
        Ok(scores)
    }

    /// Low-rank reconstruction Σ_k s_k v_kᵀ from a score matrix.
    pub fn reconstruction_from(&self, scores: ArrayView2<'_, T>) -> Result<Array2<T>> {
        if scores.ncols() != self.k() {
            return Err(Error::DimensionMismatch {
                expected: self.k(),
                actual: scores.ncols(),
            });
        }
        Ok(scores.dot(&self.v.t()))
    }
}
