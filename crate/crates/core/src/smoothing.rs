//! Smoothing of the group penalty s(v) = Σ_g ‖A_g v‖₂ by a μ-strongly-concave
//! dual regularization: closed-form dual maximizer, smoothed value, gradient,
//! Lipschitz constant, and the sandwich bound s_μ ≤ s ≤ s_μ + μ·p/2.

use ndarray::{s, Array1, ArrayView1};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::solver::PenaltyWeights;
use crate::structure::GroupLinearOperator;

/// Dual state of the smoothed penalty at a point: the smoothing parameter μ,
/// the dual-ball bound M = p/2, and the stacked maximizer α*_μ(v).
#[derive(Debug, Clone)]
pub struct SmoothingState<T> {
    pub mu: T,
    pub m: T,
    pub alpha: Array1<T>,
}

impl<T: Real> SmoothingState<T> {
    /// Computes the dual maximizer at `v`.
    pub fn at(op: &GroupLinearOperator<T>, v: ArrayView1<'_, T>, mu: T) -> Result<Self> {
        let alpha = alpha_star(op, v, mu)?;
        Ok(Self {
            mu,
            m: dual_ball_bound(op),
            alpha,
        })
    }
}

/// M = p/2: the tight bound on ‖α‖²/2 over the product of per-group unit
/// balls, one ball per feature.
pub fn dual_ball_bound<T: Real>(op: &GroupLinearOperator<T>) -> T {
    T::of(op.n_groups() as f64) / T::of(2.0)
}

fn check_mu<T: Real>(mu: T) -> Result<()> {
    if mu <= T::zero() {
        return Err(Error::InvalidParameter(
            "smoothing parameter mu must be positive".into(),
        ));
    }
    Ok(())
}

/// Projection onto the unit ℓ2 ball: identity inside, radial scaling outside.
pub fn project_group_ball<T: Real>(x: ArrayView1<'_, T>) -> Array1<T> {
    let n = x.dot(&x).sqrt();
    if n <= T::one() {
        x.to_owned()
    } else {
        x.map(|&xi| xi / n)
    }
}

/// Projects each group slice of a stacked vector onto the unit ball in place.
pub(crate) fn project_groups_in_place<T: Real>(
    op: &GroupLinearOperator<T>,
    stacked: &mut Array1<T>,
) {
    for (g, block) in op.groups().iter().enumerate() {
        let start = op.row_offset(g);
        let mut slice = stacked.slice_mut(s![start..start + block.nrows()]);
        let n = slice.dot(&slice).sqrt();
        if n > T::one() {
            slice.mapv_inplace(|x| x / n);
        }
    }
}

/// The dual maximizer α*_μ(v): per-group projection of A_g v / μ onto the
/// unit ℓ2 ball.
pub fn alpha_star<T: Real>(
    op: &GroupLinearOperator<T>,
    v: ArrayView1<'_, T>,
    mu: T,
) -> Result<Array1<T>> {
    check_mu(mu)?;
    let mut alpha = op.apply(v)?;
    alpha.mapv_inplace(|x| x / mu);
    project_groups_in_place(op, &mut alpha);
    Ok(alpha)
}

/// The exact penalty value Σ_g ‖A_g v‖₂.
pub fn tv_value<T: Real>(op: &GroupLinearOperator<T>, v: ArrayView1<'_, T>) -> Result<T> {
    let av = op.apply(v)?;
    Ok(stacked_group_norm_sum(op, &av))
}

fn stacked_group_norm_sum<T: Real>(op: &GroupLinearOperator<T>, stacked: &Array1<T>) -> T {
    let mut total = T::zero();
    for (g, block) in op.groups().iter().enumerate() {
        let start = op.row_offset(g);
        let slice = stacked.slice(s![start..start + block.nrows()]);
        total = total + slice.dot(&slice).sqrt();
    }
    total
}

/// The smoothed penalty s_μ(v) = α*ᵀAv − (μ/2)‖α*‖².
pub fn smoothed_value<T: Real>(
    op: &GroupLinearOperator<T>,
    v: ArrayView1<'_, T>,
    mu: T,
) -> Result<T> {
    check_mu(mu)?;
    let av = op.apply(v)?;
    let mut alpha = av.clone();
    alpha.mapv_inplace(|x| x / mu);
    project_groups_in_place(op, &mut alpha);
    Ok(alpha.dot(&av) - mu / T::of(2.0) * alpha.dot(&alpha))
}

/// ∇s_μ(v) = Aᵀ α*_μ(v).
pub fn smoothed_gradient<T: Real>(
    op: &GroupLinearOperator<T>,
    v: ArrayView1<'_, T>,
    mu: T,
) -> Result<Array1<T>> {
    let alpha = alpha_star(op, v, mu)?;
    op.apply_adjoint(alpha.view())
}

/// Lipschitz constant of the smooth part of the reformulated objective:
/// L = 2 + (λ/λ₂)·‖A‖₂²/μ, with the cached spectral norm.
pub fn smooth_part_lipschitz<T: Real>(
    op: &GroupLinearOperator<T>,
    mu: T,
    weights: &PenaltyWeights<T>,
) -> Result<T> {
    check_mu(mu)?;
    let norm = op.spectral_norm_cached();
    Ok(T::of(2.0) + weights.gamma() * norm * norm / mu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::PenaltyWeights;
    use crate::structure::{build_grid_tv_operator, GridMask, GroupBlock};
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn grid_op(w: usize, h: usize) -> GroupLinearOperator<f64> {
        build_grid_tv_operator(&GridMask::full_2d(w, h).unwrap()).unwrap()
    }

    fn random_vec(p: usize, rng: &mut ChaCha8Rng) -> Array1<f64> {
        Array1::from_shape_fn(p, |_| StandardNormal.sample(rng))
    }

    #[test]
    fn projection_keeps_interior_points() {
        let x = array![0.3, 0.4, 0.0];
        assert_eq!(project_group_ball(x.view()), x);
    }

    #[test]
    fn projection_normalizes_exterior_points() {
        let x: Array1<f64> = array![3.0, 4.0, 0.0];
        let p = project_group_ball(x.view());
        assert!((p[0] - 0.6).abs() <= 1e-15);
        assert!((p[1] - 0.8).abs() <= 1e-15);
        assert_eq!(p[2], 0.0);
    }

    #[test]
    fn projection_fixes_origin() {
        let x = array![0.0, 0.0, 0.0];
        assert_eq!(project_group_ball(x.view()), x);
    }

    #[test]
    fn alpha_star_is_zero_at_zero() {
        let op = grid_op(3, 3);
        let v = Array1::zeros(9);
        let alpha = alpha_star(&op, v.view(), 0.5).unwrap();
        assert!(alpha.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn alpha_star_rejects_nonpositive_mu() {
        let op = grid_op(2, 2);
        let v = Array1::zeros(4);
        assert!(alpha_star(&op, v.view(), 0.0).is_err());
        assert!(alpha_star(&op, v.view(), -1.0).is_err());
    }

    #[test]
    fn large_mu_leaves_dual_unprojected() {
        let op = grid_op(3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = random_vec(9, &mut rng);
        let av = op.apply(v.view()).unwrap();
        let max_group: f64 = op
            .groups()
            .iter()
            .enumerate()
            .map(|(g, b)| {
                let s = av.slice(s![op.row_offset(g)..op.row_offset(g) + b.nrows()]);
                s.dot(&s).sqrt()
            })
            .fold(0.0, f64::max);
        let mu = max_group * 2.0;
        let alpha = alpha_star(&op, v.view(), mu).unwrap();
        for (a, x) in alpha.iter().zip(av.iter()) {
            assert!((a - x / mu).abs() <= 1e-15);
        }
        // And the smoothed value collapses to ‖Av‖²/(2μ).
        let s = smoothed_value(&op, v.view(), mu).unwrap();
        assert!((s - av.dot(&av) / (2.0 * mu)).abs() <= 1e-12);
    }

    #[test]
    fn tiny_mu_saturates_dual_to_unit_norm() {
        let op = grid_op(3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v = random_vec(9, &mut rng);
        let alpha = alpha_star(&op, v.view(), 1e-12).unwrap();
        let av = op.apply(v.view()).unwrap();
        for (g, block) in op.groups().iter().enumerate() {
            let start = op.row_offset(g);
            let ag = av.slice(s![start..start + block.nrows()]);
            let n = ag.dot(&ag).sqrt();
            if n > 1e-6 {
                let al = alpha.slice(s![start..start + block.nrows()]);
                for (a, x) in al.iter().zip(ag.iter()) {
                    assert!((a - x / n).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn alpha_slices_never_exceed_unit_norm() {
        let op = grid_op(4, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let v = random_vec(16, &mut rng);
            for mu in [1.0, 0.1, 0.01] {
                let alpha = alpha_star(&op, v.view(), mu).unwrap();
                for (g, block) in op.groups().iter().enumerate() {
                    let start = op.row_offset(g);
                    let a = alpha.slice(s![start..start + block.nrows()]);
                    assert!(a.dot(&a).sqrt() <= 1.0 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn tv_of_two_by_two_step_image_is_two() {
        let op = grid_op(2, 2);
        let v = array![0.0, 1.0, 0.0, 1.0];
        assert!((tv_value(&op, v.view()).unwrap() - 2.0).abs() <= 1e-15);
    }

    #[test]
    fn tv_is_positively_homogeneous_and_translation_invariant() {
        let op = grid_op(4, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v = random_vec(16, &mut rng);
        let tv = tv_value(&op, v.view()).unwrap();
        let tv2 = tv_value(&op, (&v * 2.0).view()).unwrap();
        assert!((tv2 - 2.0 * tv).abs() <= 1e-10 * (1.0 + tv));
        let shifted = &v + 5.0;
        let tvs = tv_value(&op, shifted.view()).unwrap();
        assert!((tvs - tv).abs() <= 1e-9 * (1.0 + tv));
    }

    #[test]
    fn smoothed_value_is_zero_at_zero() {
        let op = grid_op(3, 3);
        let v = Array1::zeros(9);
        assert_eq!(smoothed_value(&op, v.view(), 0.3).unwrap(), 0.0);
    }

    #[test]
    fn sandwich_inequality_holds() {
        let op = grid_op(4, 4);
        let m: f64 = 16.0 / 2.0;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let v = random_vec(16, &mut rng);
            for mu in [1.0, 0.1, 0.01] {
                let s = tv_value(&op, v.view()).unwrap();
                let s_mu = smoothed_value(&op, v.view(), mu).unwrap();
                assert!(s_mu <= s + 1e-12, "lower side violated");
                assert!(s <= s_mu + mu * m + 1e-12, "upper side violated");
            }
        }
    }

    #[test]
    fn smoothed_value_decreases_in_mu() {
        let op = grid_op(4, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let v = random_vec(16, &mut rng);
        let s1 = smoothed_value(&op, v.view(), 0.01).unwrap();
        let s2 = smoothed_value(&op, v.view(), 0.1).unwrap();
        let s3 = smoothed_value(&op, v.view(), 1.0).unwrap();
        assert!(s1 >= s2 && s2 >= s3);
    }

    #[test]
    fn smoothed_value_is_convex_along_segments() {
        let op = grid_op(3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let x = random_vec(9, &mut rng);
            let y = random_vec(9, &mut rng);
            let t = 0.37;
            let mid = &x * t + &y * (1.0 - t);
            let s_mid = smoothed_value(&op, mid.view(), 0.1).unwrap();
            let bound = t * smoothed_value(&op, x.view(), 0.1).unwrap()
                + (1.0 - t) * smoothed_value(&op, y.view(), 0.1).unwrap();
            assert!(s_mid <= bound + 1e-12);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let op = grid_op(4, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mu = 0.1;
        for _ in 0..5 {
            let v = random_vec(16, &mut rng);
            let grad = smoothed_gradient(&op, v.view(), mu).unwrap();
            let h = 1e-6;
            let mut fd = Array1::zeros(16);
            for j in 0..16 {
                let mut vp = v.clone();
                let mut vm = v.clone();
                vp[j] += h;
                vm[j] -= h;
                fd[j] = (smoothed_value(&op, vp.view(), mu).unwrap()
                    - smoothed_value(&op, vm.view(), mu).unwrap())
                    / (2.0 * h);
            }
            let diff = &grad - &fd;
            let rel = diff.dot(&diff).sqrt() / grad.dot(&grad).sqrt().max(1.0);
            assert!(rel <= 1e-5, "relative error {rel}");
        }
    }

    #[test]
    fn gradient_is_zero_for_constant_fields() {
        let op = grid_op(3, 3);
        let v = Array1::from_elem(9, 2.5);
        let g = smoothed_gradient(&op, v.view(), 0.2).unwrap();
        assert!(g.iter().all(|&x| x.abs() <= 1e-14));
    }

    #[test]
    fn lipschitz_constant_reduces_to_two_without_tv() {
        let op = grid_op(3, 3);
        let w = PenaltyWeights::new(0.5, 1.0, 0.0).unwrap();
        assert_eq!(smooth_part_lipschitz(&op, 0.01, &w).unwrap(), 2.0);
    }

    #[test]
    fn halving_mu_doubles_the_tv_part() {
        let op = grid_op(3, 3);
        let w = PenaltyWeights::new(0.0, 1.0, 1.0).unwrap();
        let l1 = smooth_part_lipschitz(&op, 0.2, &w).unwrap();
        let l2 = smooth_part_lipschitz(&op, 0.1, &w).unwrap();
        assert!(((l2 - 2.0) - 2.0 * (l1 - 2.0)).abs() <= 1e-9);
    }

    #[test]
    fn chain_lipschitz_matches_frozen_value() {
        // 1D chain on 4 points, λ = λ₂ = 1, μ = 1: L = 2 + (2 sin(3π/8))².
        let groups = (0..4)
            .map(|g| {
                if g + 1 < 4 {
                    GroupBlock::new(vec![g, g + 1], vec![-1.0, 1.0], 1)
                } else {
                    GroupBlock::new(vec![g], vec![], 0)
                }
            })
            .collect();
        let op = GroupLinearOperator::<f64>::from_groups(4, groups).unwrap();
        let w = PenaltyWeights::new(0.0, 1.0, 1.0).unwrap();
        let l = smooth_part_lipschitz(&op, 1.0, &w).unwrap();
        assert!((l - 5.414213562373095).abs() <= 1e-9, "got {l}");
    }

    #[test]
    fn smoothing_state_carries_ball_bound() {
        let op = grid_op(4, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let v = random_vec(16, &mut rng);
        let state = SmoothingState::at(&op, v.view(), 0.25).unwrap();
        assert_eq!(state.m, 8.0);
        assert_eq!(state.mu, 0.25);
        assert_eq!(state.alpha.len(), op.total_rows());
    }
}
