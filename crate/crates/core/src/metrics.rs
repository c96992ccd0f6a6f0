//! Evaluation metrics: held-out reconstruction error, loading mean squared
//! error against ground truth, and pairwise Dice stability across folds.
//! Components are order- and sign-ambiguous, so every comparison first runs
//! an optimal assignment on absolute cosine similarity.

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spca::SpcaModel;

/// Assignment problems beyond this many components are rejected; the exact
/// subset-DP matcher is exponential in the larger side.
const MATCH_LIMIT: usize = 20;

/// An optimal component matching: estimated-to-reference index pairs, the
/// sign of each matched cosine, and the total absolute-cosine score. When the
/// component counts differ only min(K) pairs are formed and the result is
/// flagged as truncated.
#[derive(Debug, Clone)]
pub struct MatchResult<T> {
    pairs: Vec<(usize, usize)>,
    signs: Vec<T>,
    score: T,
    truncated: bool,
}

impl<T: Real> MatchResult<T> {
    /// Matched (estimated, reference) index pairs, sorted by estimated index.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Sign (±1) of the matched cosine, aligned with `pairs`.
    pub fn signs(&self) -> &[T] {
        &self.signs
    }

    /// Σ |cos| over matched pairs.
    pub fn score(&self) -> T {
        self.score
    }

    /// True when the component counts differed.
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    /// The reference index and sign matched to estimated component `est`.
    pub fn matched_to(&self, est: usize) -> Option<(usize, T)> {
        self.pairs
            .iter()
            .position(|&(e, _)| e == est)
            .map(|i| (self.pairs[i].1, self.signs[i]))
    }
}

fn column_cosines<T: Real>(a: ArrayView2<'_, T>, b: ArrayView2<'_, T>) -> Vec<Vec<T>> {
    let norms = |m: ArrayView2<'_, T>| -> Vec<T> {
        (0..m.ncols())
            .map(|j| {
                let c = m.column(j);
                c.dot(&c).sqrt()
            })
            .collect()
    };
    let na = norms(a);
    let nb = norms(b);
    (0..a.ncols())
        .map(|i| {
            (0..b.ncols())
                .map(|j| {
                    if na[i] > T::zero() && nb[j] > T::zero() {
                        a.column(i).dot(&b.column(j)) / (na[i] * nb[j])
                    } else {
                        T::zero()
                    }
                })
                .collect()
        })
        .collect()
}

/// Optimal assignment of estimated components onto reference components,
/// maximizing the total absolute cosine. Exact via DP over subsets of the
/// larger side (component counts are small by construction).
pub fn match_components<T: Real>(
    v_est: ArrayView2<'_, T>,
    v_ref: ArrayView2<'_, T>,
) -> Result<MatchResult<T>> {
    if v_est.nrows() != v_ref.nrows() {
        return Err(Error::DimensionMismatch {
            expected: v_ref.nrows(),
            actual: v_est.nrows(),
        });
    }
    let ke = v_est.ncols();
    let kr = v_ref.ncols();
    let big = ke.max(kr);
    if big > MATCH_LIMIT {
        return Err(Error::InvalidParameter(format!(
            "cannot match more than {MATCH_LIMIT} components (got {big})"
        )));
    }
    // cos[i][j]: i runs over the smaller side, j over the larger.
    let est_is_small = ke <= kr;
    let cos = if est_is_small {
        column_cosines(v_est, v_ref)
    } else {
        column_cosines(v_ref, v_est)
    };
    let m = ke.min(kr);

    let full = 1usize << big;
    let mut dp = vec![T::neg_infinity(); full];
    let mut parent = vec![usize::MAX; full];
    dp[0] = T::zero();
    for mask in 0..full {
        let i = mask.count_ones() as usize;
        if i >= m || dp[mask] == T::neg_infinity() {
            continue;
        }
        for (j, row_cos) in cos[i].iter().enumerate() {
            let bit = 1usize << j;
            if mask & bit == 0 {
                let cand = dp[mask] + row_cos.abs();
                if cand > dp[mask | bit] {
                    dp[mask | bit] = cand;
                    parent[mask | bit] = j;
                }
            }
        }
    }
    let mut best: Option<(usize, T)> = None;
    for mask in 0..full {
        if mask.count_ones() as usize == m
            && best.map_or(true, |(_, s)| dp[mask] > s)
            && dp[mask] > T::neg_infinity()
        {
            best = Some((mask, dp[mask]));
        }
    }
    let (best_mask, score) = best.unwrap_or((0, T::zero()));

    let mut assignment = vec![usize::MAX; m]; // small index -> large index
    let mut mask = best_mask;
    for i in (0..m).rev() {
        let j = parent[mask];
        assignment[i] = j;
        mask ^= 1 << j;
    }

    let mut pairs: Vec<(usize, usize)> = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| if est_is_small { (i, j) } else { (j, i) })
        .collect();
    pairs.sort_unstable();
    let signs = pairs
        .iter()
        .map(|&(e, r)| {
            let c = if est_is_small { cos[e][r] } else { cos[r][e] };
            if c < T::zero() {
                -T::one()
            } else {
                T::one()
            }
        })
        .collect();

    Ok(MatchResult {
        pairs,
        signs,
        score,
        truncated: ke != kr,
    })
}

/// Mean squared error between matched, sign-aligned, unit-normalized loading
/// columns, averaged over reference components and features. Reference
/// components left unmatched contribute their full unit energy.
pub fn loading_mse<T: Real>(v_est: ArrayView2<'_, T>, v_ref: ArrayView2<'_, T>) -> Result<T> {
    if v_est.nrows() != v_ref.nrows() {
        return Err(Error::DimensionMismatch {
            expected: v_ref.nrows(),
            actual: v_est.nrows(),
        });
    }
    let p = v_ref.nrows();
    let kr = v_ref.ncols();
    if p == 0 || kr == 0 {
        return Err(Error::InvalidParameter(
            "loading mse needs nonempty reference loadings".into(),
        ));
    }
    let matched = match_components(v_est, v_ref)?;

    let unit = |col: ArrayView1<'_, T>| -> ndarray::Array1<T> {
        let n = col.dot(&col).sqrt();
        if n > T::zero() {
            col.map(|&x| x / n)
        } else {
            ndarray::Array1::zeros(col.len())
        }
    };

    let mut total = T::zero();
    let mut matched_refs = vec![false; kr];
    for (&(e, r), &sign) in matched.pairs().iter().zip(matched.signs()) {
        matched_refs[r] = true;
        let ue = unit(v_est.column(e));
        let ur = unit(v_ref.column(r));
        for (&a, &b) in ue.iter().zip(ur.iter()) {
            let d = sign * a - b;
            total = total + d * d;
        }
    }
    for (r, &hit) in matched_refs.iter().enumerate() {
        if !hit {
            let ur = unit(v_ref.column(r));
            total = total + ur.dot(&ur);
        }
    }
    Ok(total / (T::of(kr as f64) * T::of(p as f64)))
}

/// Dice index of the exact-nonzero supports: 2|S_a ∩ S_b|/(|S_a| + |S_b|),
/// with 1 when both supports are empty.
pub fn dice_index<T: Real>(a: ArrayView1<'_, T>, b: ArrayView1<'_, T>) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let mut inter = 0usize;
    let mut sa = 0usize;
    let mut sb = 0usize;
    for (&x, &y) in a.iter().zip(b.iter()) {
        let ax = x != T::zero();
        let by = y != T::zero();
        sa += ax as usize;
        sb += by as usize;
        inter += (ax && by) as usize;
    }
    if sa + sb == 0 {
        return Ok(T::one());
    }
    Ok(T::of(2.0 * inter as f64) / T::of((sa + sb) as f64))
}

/// Stability of loadings across folds: component-wise and overall mean
/// pairwise Dice index after matching.
#[derive(Debug, Clone)]
pub struct StabilityDice<T> {
    /// Mean pairwise Dice per component, indexed in the first fold's frame.
    pub per_component: Vec<T>,
    /// Mean over all matched fold-pair Dice values.
    pub overall: T,
}

/// Computes pairwise Dice stability across fold loadings. Each pair (i, j)
/// is matched independently; the value of a matched pair is attributed to
/// the first fold's component frame through fold i's own matching onto fold
/// 0, so the per-component means are comparable.
pub fn stability_dice<T: Real>(folds: &[Array2<T>]) -> Result<StabilityDice<T>> {
    if folds.len() < 2 {
        return Err(Error::InvalidParameter(
            "stability needs at least two folds".into(),
        ));
    }
    let p = folds[0].nrows();
    for f in folds {
        if f.nrows() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                actual: f.nrows(),
            });
        }
    }
    let k0 = folds[0].ncols();

    // Map every fold's components into fold 0's frame.
    let mut to_frame0: Vec<Vec<Option<usize>>> = Vec::with_capacity(folds.len());
    for (i, fold) in folds.iter().enumerate() {
        if i == 0 {
            to_frame0.push((0..k0).map(Some).collect());
            continue;
        }
        let m = match_components(fold.view(), folds[0].view())?;
        let mut map = vec![None; fold.ncols()];
        for &(e, r) in m.pairs() {
            map[e] = Some(r);
        }
        to_frame0.push(map);
    }

    let mut slot_sum = vec![T::zero(); k0];
    let mut slot_count = vec![0usize; k0];
    let mut all_sum = T::zero();
    let mut all_count = 0usize;
    for i in 0..folds.len() {
        for j in (i + 1)..folds.len() {
            let m = match_components(folds[j].view(), folds[i].view())?;
            for &(e, r) in m.pairs() {
                let d = dice_index(folds[j].column(e), folds[i].column(r))?;
                all_sum = all_sum + d;
                all_count += 1;
                if let Some(slot) = to_frame0[i][r] {
                    slot_sum[slot] = slot_sum[slot] + d;
                    slot_count[slot] += 1;
                }
            }
        }
    }

    let per_component = slot_sum
        .iter()
        .zip(&slot_count)
        .map(|(&s, &c)| {
            if c > 0 {
                s / T::of(c as f64)
            } else {
                T::zero()
            }
        })
        .collect();
    let overall = if all_count > 0 {
        all_sum / T::of(all_count as f64)
    } else {
        T::zero()
    };
    Ok(StabilityDice {
        per_component,
        overall,
    })
}

/// Frobenius norm of the residual between centered test data and its model
/// reconstruction through transform scores.
pub fn reconstruction_error<T: Real>(x_test: ArrayView2<'_, T>, model: &SpcaModel<T>) -> Result<T> {
    let scores = model.transform(x_test)?;
    let recon = model.reconstruction_from(scores.view())?;
    let mut acc = T::zero();
    for (row, recon_row) in x_test.rows().into_iter().zip(recon.rows()) {
        for ((&x, &m), &r) in row.iter().zip(model.means().iter()).zip(recon_row.iter()) {
            let d = (x - m) - r;
            acc = acc + d * d;
        }
    }
    Ok(acc.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::PenaltyWeights;
    use crate::spca::SpcaModel;
    use crate::structure::{build_grid_tv_operator, GridMask};
    use ndarray::{array, Array1};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_matrix(n: usize, p: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..n * p)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        Array2::from_shape_vec((n, p), data).unwrap()
    }

    fn brute_force_score(v_est: &Array2<f64>, v_ref: &Array2<f64>) -> f64 {
        // Enumerate all injections of the smaller side into the larger.
        let ke = v_est.ncols();
        let kr = v_ref.ncols();
        let cos = column_cosines(v_est.view(), v_ref.view());
        let (m, big) = (ke.min(kr), ke.max(kr));
        let idx: Vec<usize> = (0..big).collect();
        let mut best = 0.0f64;
        permute(&idx, m, &mut |sel| {
            let score: f64 = sel
                .iter()
                .enumerate()
                .map(|(i, &j)| {
                    if ke <= kr {
                        cos[i][j].abs()
                    } else {
                        cos[j][i].abs()
                    }
                })
                .sum();
            best = best.max(score);
        });
        best
    }

    fn permute(pool: &[usize], m: usize, f: &mut dyn FnMut(&[usize])) {
        fn rec(
            pool: &[usize],
            used: &mut Vec<bool>,
            cur: &mut Vec<usize>,
            m: usize,
            f: &mut dyn FnMut(&[usize]),
        ) {
            if cur.len() == m {
                f(cur);
                return;
            }
            for (i, &x) in pool.iter().enumerate() {
                if !used[i] {
                    used[i] = true;
                    cur.push(x);
                    rec(pool, used, cur, m, f);
                    cur.pop();
                    used[i] = false;
                }
            }
        }
        rec(pool, &mut vec![false; pool.len()], &mut Vec::new(), m, f);
    }

    #[test]
    fn identical_loadings_match_identically() {
        let v = random_matrix(10, 3, 1);
        let m = match_components(v.view(), v.view()).unwrap();
        assert_eq!(m.pairs(), &[(0, 0), (1, 1), (2, 2)]);
        assert!(m.signs().iter().all(|&s| s == 1.0));
        assert!((m.score() - 3.0).abs() <= 1e-12);
        assert!(!m.truncated());
    }

    #[test]
    fn swapped_and_negated_columns_are_recovered() {
        let v = random_matrix(12, 3, 2);
        let mut w = Array2::zeros((12, 3));
        w.column_mut(0).assign(&(-&v.column(2)));
        w.column_mut(1).assign(&v.column(0));
        w.column_mut(2).assign(&(-&v.column(1)));
        let m = match_components(w.view(), v.view()).unwrap();
        assert_eq!(m.pairs(), &[(0, 2), (1, 0), (2, 1)]);
        assert_eq!(m.signs(), &[-1.0, 1.0, -1.0]);
    }

    #[test]
    fn small_rotations_keep_the_identity_permutation() {
        // Orthogonal columns rotated 5° in the (0,1) plane stay closest to
        // themselves.
        let p = 8;
        let mut v = Array2::zeros((p, 3));
        v[[0, 0]] = 1.0;
        v[[1, 1]] = 1.0;
        v[[2, 2]] = 1.0;
        let th = 5.0_f64.to_radians();
        let mut w = v.clone();
        w[[0, 0]] = th.cos();
        w[[1, 0]] = th.sin();
        w[[0, 1]] = -th.sin();
        w[[1, 1]] = th.cos();
        let m = match_components(w.view(), v.view()).unwrap();
        assert_eq!(m.pairs(), &[(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn matcher_agrees_with_brute_force() {
        for (ke, kr, seed) in [(3, 3, 3), (4, 4, 4), (2, 4, 5), (4, 2, 6), (1, 3, 7)] {
            let a = random_matrix(9, ke, seed);
            let b = random_matrix(9, kr, seed + 100);
            let m = match_components(a.view(), b.view()).unwrap();
            let best = brute_force_score(&a, &b);
            assert!(
                (m.score() - best).abs() <= 1e-12,
                "ke={ke} kr={kr}: {} vs {best}",
                m.score()
            );
            assert_eq!(m.truncated(), ke != kr);
            assert_eq!(m.pairs().len(), ke.min(kr));
        }
    }

    #[test]
    fn zero_columns_match_with_zero_score_contribution() {
        let mut a = random_matrix(6, 2, 8);
        a.column_mut(1).fill(0.0);
        let b = random_matrix(6, 2, 9);
        let m = match_components(a.view(), b.view()).unwrap();
        assert_eq!(m.pairs().len(), 2);
    }

    #[test]
    fn mse_of_identical_loadings_is_zero() {
        let v = random_matrix(10, 3, 10);
        assert!(loading_mse(v.view(), v.view()).unwrap() <= 1e-15);
    }

    #[test]
    fn mse_is_invariant_to_permutation_and_signs() {
        let v = random_matrix(14, 3, 11);
        let w = random_matrix(14, 3, 12);
        let base = loading_mse(w.view(), v.view()).unwrap();
        let mut shuffled = Array2::zeros((14, 3));
        shuffled.column_mut(0).assign(&(-&w.column(1)));
        shuffled.column_mut(1).assign(&w.column(2));
        shuffled.column_mut(2).assign(&(-&w.column(0)));
        let got = loading_mse(shuffled.view(), v.view()).unwrap();
        assert!((got - base).abs() <= 1e-12, "{got} vs {base}");
    }

    #[test]
    fn orthogonal_unit_loadings_give_two_over_p() {
        let p = 10;
        let mut v = Array2::zeros((p, 2));
        v[[0, 0]] = 1.0;
        v[[1, 1]] = 1.0;
        let mut w = Array2::zeros((p, 2));
        w[[2, 0]] = 1.0;
        w[[3, 1]] = 1.0;
        let mse = loading_mse(w.view(), v.view()).unwrap();
        assert!((mse - 2.0 / p as f64).abs() <= 1e-14);
    }

    #[test]
    fn missing_components_contribute_unit_energy() {
        let p = 10;
        let mut v = Array2::zeros((p, 2));
        v[[0, 0]] = 1.0;
        v[[1, 1]] = 1.0;
        // One perfectly matched estimate, one missing.
        let w = v.slice(ndarray::s![.., ..1]).to_owned();
        let mse = loading_mse(w.view(), v.view()).unwrap();
        assert!((mse - 1.0 / (2.0 * p as f64)).abs() <= 1e-14);
    }

    #[test]
    fn dice_matches_hand_example() {
        let a: Array1<f64> = array![0.0, 1.0, 2.0, 3.0, 0.0];
        let b: Array1<f64> = array![0.0, 0.0, 1.0, 1.0, 1.0];
        let d = dice_index(a.view(), b.view()).unwrap();
        assert!((d - 2.0 / 3.0).abs() <= 1e-15);
    }

    #[test]
    fn dice_handles_degenerate_supports() {
        let z = Array1::<f64>::zeros(4);
        let a = array![1.0, 0.0, 0.0, 0.0];
        assert_eq!(dice_index(z.view(), z.view()).unwrap(), 1.0);
        assert_eq!(dice_index(a.view(), z.view()).unwrap(), 0.0);
        let b = array![0.0, 2.0, 0.0, 0.0];
        assert_eq!(dice_index(a.view(), b.view()).unwrap(), 0.0);
        assert_eq!(dice_index(a.view(), a.view()).unwrap(), 1.0);
    }

    #[test]
    fn dice_is_symmetric() {
        let a = array![1.0, 0.0, 2.0, 0.0, 3.0];
        let b = array![0.0, 1.0, 2.0, 0.0, 0.0];
        assert_eq!(
            dice_index(a.view(), b.view()).unwrap(),
            dice_index(b.view(), a.view()).unwrap()
        );
    }

    #[test]
    fn dice_rejects_length_mismatch() {
        let a = Array1::<f64>::zeros(3);
        let b = Array1::<f64>::zeros(4);
        assert!(dice_index(a.view(), b.view()).is_err());
    }

    #[test]
    fn identical_folds_have_unit_stability() {
        let v = random_matrix(12, 3, 13);
        let folds = vec![v.clone(), v.clone(), v];
        let s = stability_dice(&folds).unwrap();
        assert!((s.overall - 1.0).abs() <= 1e-15);
        for &c in &s.per_component {
            assert!((c - 1.0).abs() <= 1e-15);
        }
    }

    #[test]
    fn disjoint_folds_have_zero_stability() {
        let p = 12;
        let mut a = Array2::zeros((p, 2));
        a[[0, 0]] = 1.0;
        a[[1, 1]] = 1.0;
        let mut b = Array2::zeros((p, 2));
        b[[5, 0]] = 1.0;
        b[[6, 1]] = 1.0;
        let s = stability_dice(&[a, b]).unwrap();
        assert_eq!(s.overall, 0.0);
    }

    #[test]
    fn stability_requires_two_folds() {
        let v = random_matrix(5, 2, 14);
        assert!(stability_dice(&[v]).is_err());
    }

    fn exact_model(p: usize) -> (SpcaModel<f64>, Array2<f64>) {
        let a = Array1::from_shape_fn(8, |i| (i as f64) - 3.5);
        let b = Array1::from_shape_fn(p, |j| ((j * 7 + 3) % 5) as f64 - 2.0);
        let x = Array2::from_shape_fn((8, p), |(i, j)| a[i] * b[j]);
        let op = build_grid_tv_operator(&GridMask::full_2d(p, 1).unwrap()).unwrap();
        let w = PenaltyWeights::new(0.0, 1.0 / 16.0, 0.0).unwrap();
        let model = SpcaModel::fit(x.view(), &op, 1, w, 1e-10, 2).unwrap();
        (model, x)
    }

    #[test]
    fn exact_model_has_vanishing_reconstruction_error() {
        let (model, x) = exact_model(6);
        let err = reconstruction_error(x.view(), &model).unwrap();
        let scale = x.iter().map(|&e| e * e).sum::<f64>().sqrt();
        assert!(err <= 1e-8 * scale, "error {err}");
    }

    #[test]
    fn empty_model_error_is_the_data_norm() {
        // Zero-mean rank-1 data exhausts immediately under a huge ℓ1 weight,
        // leaving a K = 0 model whose reconstruction is identically zero.
        let x = random_matrix(6, 5, 15);
        let mut xc = x.clone();
        let means = xc.mean_axis(ndarray::Axis(0)).unwrap();
        for mut row in xc.rows_mut() {
            row.zip_mut_with(&means, |e, &m| *e -= m);
        }
        let op = build_grid_tv_operator(&GridMask::full_2d(5, 1).unwrap()).unwrap();
        let w = PenaltyWeights::new(1e6, 1.0, 0.0).unwrap();
        let model = SpcaModel::fit(xc.view(), &op, 2, w, 1e-6, 3).unwrap();
        assert_eq!(model.k(), 0);
        let err = reconstruction_error(xc.view(), &model).unwrap();
        let norm = xc.iter().map(|&e| e * e).sum::<f64>().sqrt();
        assert!((err - norm).abs() <= 1e-10 * norm);
    }

    #[test]
    fn reconstruction_error_survives_loading_sign_flips() {
        let (model, x) = exact_model(7);
        let base = reconstruction_error(x.view(), &model).unwrap();
        let flipped = SpcaModel::from_parts(
            model.means().to_owned(),
            -model.components().to_owned(),
            -model.loadings().to_owned(),
            model.explained_variance().to_vec(),
            model.traces().to_vec(),
            *model.weights(),
            model.eps(),
            model.seed(),
            model.truncated(),
        );
        let got = reconstruction_error(x.view(), &flipped).unwrap();
        assert!((got - base).abs() <= 1e-12 * (1.0 + base));
    }
}
