//! Inner solver for the fixed-u loading problem: soft thresholding, duality
//! gaps, FISTA with gap-based stopping, the optimal smoothing parameter, and
//! the CONESTA continuation loop that certifies a prescribed precision.

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::smoothing::{dual_ball_bound, smooth_part_lipschitz};
use crate::structure::GroupLinearOperator;

/// Smoothing floor used when the TV weight or the operator vanish and as the
/// gap-probe parameter before the first continuation.
pub const MU_MIN: f64 = 1e-8;

/// Geometric precision decay between continuations.
pub const TAU: f64 = 0.5;

const FISTA_CAP: usize = 10_000;
const CONESTA_CAP: usize = 100;
/// Gap evaluation happens every iteration up to this problem size, every 10
/// iterations above it.
const GAP_EVERY_THRESHOLD: usize = 10_000;

/// Penalty weights (λ1, λ2, λ): ℓ1, ridge and TV. λ2 must stay positive, it
/// provides the strong convexity the duality gap machinery relies on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyWeights<T> {
    l1: T,
    l2: T,
    tv: T,
}

impl<T: Real> PenaltyWeights<T> {
    pub fn new(l1: T, l2: T, tv: T) -> Result<Self> {
        if !(l1.is_finite() && l2.is_finite() && tv.is_finite()) {
            return Err(Error::InvalidParameter(
                "penalty weights must be finite".into(),
            ));
        }
        if l1 < T::zero() || tv < T::zero() {
            return Err(Error::InvalidParameter(
                "l1 and tv weights must be nonnegative".into(),
            ));
        }
        if l2 <= T::zero() {
            return Err(Error::InvalidParameter("l2 weight must be positive".into()));
        }
        Ok(Self { l1, l2, tv })
    }

    /// Converts the (global_weight, l1_ratio, tv_ratio) parametrization:
    /// λ1 = w·r1, λ = w·rtv, λ2 = w·(1 − r1 − rtv). The ratios must leave a
    /// positive ridge share.
    pub fn from_ratios(global_weight: T, l1_ratio: T, tv_ratio: T) -> Result<Self> {
        if !(global_weight.is_finite() && global_weight > T::zero()) {
            return Err(Error::InvalidParameter(
                "global weight must be positive and finite".into(),
            ));
        }
        let unit = T::zero()..=T::one();
        if !(unit.contains(&l1_ratio) && unit.contains(&tv_ratio)) {
            return Err(Error::InvalidParameter("ratios must lie in [0, 1]".into()));
        }
        let ridge_share = T::one() - l1_ratio - tv_ratio;
        if ridge_share <= T::zero() {
            return Err(Error::InvalidParameter(
                "l1_ratio + tv_ratio must be below 1 so the ridge weight stays positive".into(),
            ));
        }
        Self::new(
            global_weight * l1_ratio,
            global_weight * ridge_share,
            global_weight * tv_ratio,
        )
    }

    pub fn l1(&self) -> T {
        self.l1
    }

    pub fn l2(&self) -> T {
        self.l2
    }

    pub fn tv(&self) -> T {
        self.tv
    }

    /// γ = λ/λ₂, the weight the smoothed penalty carries in the reformulated
    /// objective.
    pub fn gamma(&self) -> T {
        self.tv / self.l2
    }

    /// λ1/λ₂, the ℓ1 weight of the reformulated objective.
    pub fn l1_scaled(&self) -> T {
        self.l1 / self.l2
    }

    pub fn l1_ratio(&self) -> T {
        self.l1 / (self.l1 + self.l2 + self.tv)
    }

    pub fn tv_ratio(&self) -> T {
        self.tv / (self.l1 + self.l2 + self.tv)
    }
}

/// The fixed-u inner problem: minimize over v
/// ½‖v − b‖² + ½‖v‖² + (λ/λ₂)s_μ(v) + (λ1/λ₂)‖v‖₁ with b = Xᵀu/(nλ₂).
#[derive(Debug)]
pub struct RidgeSmoothedProblem<'a, T> {
    target: Array1<T>,
    weights: PenaltyWeights<T>,
    op: &'a GroupLinearOperator<T>,
    n: usize,
}

/// One continuation level of a CONESTA run. `eps_target` is the precision
/// prescribed on entry; `eps_certified` the re-estimate Gap + μγM on exit.
/// The next level's target is exactly half the certified value.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub continuation: usize,
    pub mu: f64,
    pub eps_target: f64,
    pub eps_certified: f64,
    pub eps_mu: f64,
    pub eps_mu_clamped: bool,
    pub fista_iters: usize,
    pub gap: f64,
    pub objective: f64,
}

/// Per-continuation diagnostics of one CONESTA run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverTrace {
    records: Vec<TraceRecord>,
}

impl SolverTrace {
    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub(crate) fn push_record(&mut self, record: TraceRecord) {
        self.records.push(record);
    }
}

/// A FISTA run's outcome: final iterate, iterations spent, and the last
/// certified gap/objective pair.
#[derive(Debug, Clone)]
pub struct FistaRun<T> {
    pub v: Array1<T>,
    pub iterations: usize,
    pub gap: T,
    pub objective: T,
}

/// Componentwise soft threshold sign(v)·max(0, |v| − t); the exact proximal
/// operator of t·‖·‖₁.
pub fn prox_l1<T: Real>(v: ArrayView1<'_, T>, t: T) -> Result<Array1<T>> {
    if t < T::zero() || !t.is_finite() {
        return Err(Error::InvalidParameter(
            "soft-threshold level must be nonnegative".into(),
        ));
    }
    Ok(v.map(|&x| {
        let shrunk = x.abs() - t;
        if shrunk > T::zero() {
            shrunk * x.signum()
        } else {
            T::zero()
        }
    }))
}

struct GapParts<T> {
    gap: T,
    objective: T,
}

impl<'a, T: Real> RidgeSmoothedProblem<'a, T> {
    /// `target` is the already-scaled vector b = Xᵀu/(nλ₂).
    pub fn new(
        target: Array1<T>,
        weights: PenaltyWeights<T>,
        op: &'a GroupLinearOperator<T>,
        n: usize,
    ) -> Result<Self> {
        if target.len() != op.p() {
            return Err(Error::DimensionMismatch {
                expected: op.p(),
                actual: target.len(),
            });
        }
        if n == 0 {
            return Err(Error::InvalidParameter(
                "sample count must be positive".into(),
            ));
        }
        Ok(Self {
            target,
            weights,
            op,
            n,
        })
    }

    pub fn p(&self) -> usize {
        self.target.len()
    }

    pub fn target(&self) -> ArrayView1<'_, T> {
        self.target.view()
    }

    pub fn weights(&self) -> &PenaltyWeights<T> {
        &self.weights
    }

    pub fn op(&self) -> &GroupLinearOperator<T> {
        self.op
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// The non-smoothed objective ½‖v−b‖² + ½‖v‖² + (λ/λ₂)TV(v) + (λ1/λ₂)‖v‖₁.
    pub fn true_objective(&self, v: ArrayView1<'_, T>) -> Result<T> {
        let gamma = self.weights.gamma();
        let tv = if gamma > T::zero() {
            gamma * crate::smoothing::tv_value(self.op, v)?
        } else {
            T::zero()
        };
        Ok(self.quadratic_part(v) + tv + self.weights.l1_scaled() * l1_norm(v))
    }

    /// The smoothed objective f_μ(v).
    pub fn objective(&self, v: ArrayView1<'_, T>, mu: T) -> Result<T> {
        Ok(self.gap_parts(v, mu)?.objective)
    }

    /// Fenchel duality gap of the smoothed problem at `v`: an upper bound on
    /// f_μ(v) − f_μ(v*), zero at the smoothed optimum.
    pub fn duality_gap(&self, v: ArrayView1<'_, T>, mu: T) -> Result<T> {
        Ok(self.gap_parts(v, mu)?.gap)
    }

    fn quadratic_part(&self, v: ArrayView1<'_, T>) -> T {
        let half = T::of(0.5);
        let mut loss = T::zero();
        let mut ridge = T::zero();
        for (&vj, &bj) in v.iter().zip(self.target.iter()) {
            let d = vj - bj;
            loss = loss + d * d;
            ridge = ridge + vj * vj;
        }
        half * loss + half * ridge
    }

    fn gap_parts(&self, v: ArrayView1<'_, T>, mu: T) -> Result<GapParts<T>> {
        if mu <= T::zero() {
            return Err(Error::InvalidParameter(
                "smoothing parameter mu must be positive".into(),
            ));
        }
        if v.len() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                actual: v.len(),
            });
        }
        let half = T::of(0.5);
        let gamma = self.weights.gamma();
        let kappa = self.weights.l1_scaled();

        // Smoothed penalty and its dual maximizer, shared between f_μ and ψ*.
        let (s_mu, alpha_sq, ata) = if gamma > T::zero() {
            let av = self.op.apply(v)?;
            let mut alpha = av.clone();
            alpha.mapv_inplace(|x| x / mu);
            crate::smoothing::project_groups_in_place(self.op, &mut alpha);
            let alpha_sq = alpha.dot(&alpha);
            let s_mu = alpha.dot(&av) - mu * half * alpha_sq;
            let ata = self.op.apply_adjoint(alpha.view())?;
            (s_mu, alpha_sq, Some(ata))
        } else {
            (T::zero(), T::zero(), None)
        };

        let objective = self.quadratic_part(v) + gamma * s_mu + kappa * l1_norm(v);

        // σ = v − b; L*(σ) = ½‖σ‖² + σᵀb.
        let mut sigma_sq = T::zero();
        let mut sigma_dot_b = T::zero();
        for (&vj, &bj) in v.iter().zip(self.target.iter()) {
            let s = vj - bj;
            sigma_sq = sigma_sq + s * s;
            sigma_dot_b = sigma_dot_b + s * bj;
        }
        let loss_conj = half * sigma_sq + sigma_dot_b;

        // ψ*_μ(−σ) = ½Σ_j [ |−σ_j − γ(Aᵀα*)_j| − λ1/λ₂ ]₊² + (γμ/2)‖α*‖².
        let mut penalty_conj = T::zero();
        for (j, (&vj, &bj)) in v.iter().zip(self.target.iter()).enumerate() {
            let sigma_j = vj - bj;
            let shift = match &ata {
                Some(a) => gamma * a[j],
                None => T::zero(),
            };
            let inner = ((-sigma_j - shift).abs() - kappa).max(T::zero());
            penalty_conj = penalty_conj + inner * inner;
        }
        penalty_conj = half * penalty_conj + gamma * mu * half * alpha_sq;

        Ok(GapParts {
            gap: objective + loss_conj + penalty_conj,
            objective,
        })
    }

    /// FISTA on the smoothed problem at fixed `mu`, stopping as soon as the
    /// duality gap falls to `eps_mu`. Returns the final iterate with its last
    /// gap/objective evaluation. Errors with `Divergence` on a non-finite
    /// objective and `NonConvergence` when the iteration cap is exhausted.
    pub fn fista(&self, v0: ArrayView1<'_, T>, eps_mu: T, mu: T) -> Result<FistaRun<T>> {
        if eps_mu <= T::zero() {
            return Err(Error::InvalidParameter(
                "fista precision target must be positive".into(),
            ));
        }
        let parts = self.gap_parts(v0, mu)?;
        if !parts.objective.is_finite() {
            return Err(Error::Divergence);
        }
        if parts.gap <= eps_mu {
            return Ok(FistaRun {
                v: v0.to_owned(),
                iterations: 0,
                gap: parts.gap,
                objective: parts.objective,
            });
        }

        let lipschitz = smooth_part_lipschitz(self.op, mu, &self.weights)?;
        let step = T::one() / lipschitz;
        let threshold = step * self.weights.l1_scaled();
        let gamma = self.weights.gamma();
        let every = if self.p() <= GAP_EVERY_THRESHOLD {
            1
        } else {
            10
        };
        let two = T::of(2.0);

        let mut v_prev = v0.to_owned();
        let mut v = v0.to_owned();
        for k in 1..=FISTA_CAP {
            let coef = T::of((k as f64 - 2.0) / (k as f64 + 1.0));
            // z = v + coef·(v − v_prev)
            let mut z = v.clone();
            ndarray::Zip::from(&mut z).and(&v_prev).for_each(|zi, &pi| {
                *zi = *zi + coef * (*zi - pi);
            });
            // ∇(smooth part)(z) = 2z − b + γ·Aᵀα*_μ(z)
            let mut grad = &z * two - &self.target;
            if gamma > T::zero() {
                let alpha = crate::smoothing::alpha_star(self.op, z.view(), mu)?;
                let ata = self.op.apply_adjoint(alpha.view())?;
                grad = grad + ata * gamma;
            }
            let stepped = z - grad * step;
            let next = prox_l1(stepped.view(), threshold)?;
            v_prev = v;
            v = next;

            if k % every == 0 || k == FISTA_CAP {
                let parts = self.gap_parts(v.view(), mu)?;
                if !parts.objective.is_finite() {
                    return Err(Error::Divergence);
                }
                if parts.gap <= eps_mu {
                    return Ok(FistaRun {
                        v,
                        iterations: k,
                        gap: parts.gap,
                        objective: parts.objective,
                    });
                }
            }
        }
        Err(Error::NonConvergence {
            stage: "fista iterations",
            limit: FISTA_CAP,
            trace: None,
        })
    }

    /// The smoothing parameter minimizing the FISTA iteration bound for a
    /// prescribed precision, with the TV weight entering as γ = λ/λ₂:
    /// μ = (−γM‖A‖² + sqrt((γM‖A‖²)² + 2M‖A‖²·eps)) / (2M), evaluated in the
    /// cancellation-free form. Without TV (or with a zero operator) smoothing
    /// is irrelevant and the floor 1e−8 is returned.
    pub fn mu_opt(&self, eps: T) -> Result<T> {
        if eps <= T::zero() || !eps.is_finite() {
            return Err(Error::InvalidParameter(
                "precision must be positive and finite".into(),
            ));
        }
        let gamma = self.weights.gamma();
        let norm = self.op.spectral_norm_cached();
        let a2 = norm * norm;
        if gamma == T::zero() || a2 == T::zero() {
            return Ok(T::of(MU_MIN));
        }
        let m = dual_ball_bound(self.op);
        let l = T::of(2.0);
        let a = gamma * m * a2;
        let c = m * l * a2 * eps;
        // (−a + sqrt(a² + c)) / (M·L) = c / ((sqrt(a² + c) + a)·M·L)
        Ok(c / (((a * a + c).sqrt() + a) * m * l))
    }

    /// CONESTA: continuation over geometrically tightening precisions, each
    /// level running FISTA at the optimal smoothing parameter and certifying
    /// progress with the duality gap. Returns an iterate whose non-smoothed
    /// suboptimality is certified ≤ `eps`, plus the per-level trace.
    pub fn conesta(&self, eps: T) -> Result<(Array1<T>, SolverTrace)> {
        if eps <= T::zero() || !eps.is_finite() {
            return Err(Error::InvalidParameter(
                "precision must be positive and finite".into(),
            ));
        }
        let gamma = self.weights.gamma();
        let m = dual_ball_bound(self.op);
        let mu_min = T::of(MU_MIN);
        let tau = T::of(TAU);

        let mut v: Array1<T> = Array1::zeros(self.p());
        let parts = self.gap_parts(v.view(), mu_min)?;
        let certified0 = parts.gap + mu_min * gamma * m;
        let mut trace = SolverTrace::default();
        if certified0 <= eps || parts.gap <= T::zero() {
            // v⁰ is already certified: a zero gap at v = 0 means b lies inside
            // the ℓ1 subdifferential ball and 0 is the exact optimum.
            trace.push_record(TraceRecord {
                continuation: 0,
                mu: tf(mu_min),
                eps_target: tf(tau * parts.gap),
                eps_certified: tf(certified0),
                eps_mu: tf(tau * parts.gap),
                eps_mu_clamped: false,
                fista_iters: 0,
                gap: tf(parts.gap),
                objective: tf(parts.objective),
            });
            return Ok((v, trace));
        }

        let mut eps_target = tau * parts.gap;
        for i in 0..CONESTA_CAP {
            let mu = self.mu_opt(eps_target)?;
            let mut eps_mu = eps_target - mu * gamma * m;
            let mut clamped = false;
            if eps_mu <= T::zero() {
                eps_mu = eps_target * T::of(0.5);
                clamped = true;
            }
            let run = match self.fista(v.view(), eps_mu, mu) {
                Ok(run) => run,
                Err(Error::NonConvergence { stage, limit, .. }) => {
                    return Err(Error::NonConvergence {
                        stage,
                        limit,
                        trace: Some(Box::new(trace)),
                    });
                }
                Err(e) => return Err(e),
            };
            v = run.v;
            let certified = run.gap + mu * gamma * m;
            trace.push_record(TraceRecord {
                continuation: i,
                mu: tf(mu),
                eps_target: tf(eps_target),
                eps_certified: tf(certified),
                eps_mu: tf(eps_mu),
                eps_mu_clamped: clamped,
                fista_iters: run.iterations,
                gap: tf(run.gap),
                objective: tf(run.objective),
            });
            if certified <= eps {
                return Ok((v, trace));
            }
            eps_target = tau * certified;
        }
        Err(Error::NonConvergence {
            stage: "conesta continuations",
            limit: CONESTA_CAP,
            trace: Some(Box::new(trace)),
        })
    }
}

fn l1_norm<T: Real>(v: ArrayView1<'_, T>) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc + x.abs())
}

fn tf<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}
