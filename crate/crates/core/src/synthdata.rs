//! Synthetic benchmark generator: three dot-shaped ground-truth loadings on a
//! square pixel grid, standard-normal mixing coefficients, and Gaussian noise
//! scaled to hit a requested signal-to-noise ratio exactly.

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::structure::GridMask;

/// Disc centers in fractional (x, y) image coordinates, radius side/10 each.
/// The two y = 0.3 discs form the first loading, the two y = 0.7 discs the
/// second, the central disc the third.
const DISC_CENTERS: [(f64, f64); 5] = [
    (0.25, 0.3),
    (0.25, 0.7),
    (0.75, 0.3),
    (0.75, 0.7),
    (0.5, 0.5),
];
const DISC_COMPONENT: [usize; 5] = [0, 1, 0, 1, 2];
const MIN_SIDE: usize = 16;

/// One generated dataset: images X (n × side²), mixing coefficients U_true
/// (n × 3), ground-truth loadings V_true (side² × 3), and the full 2D grid
/// the images live on.
#[derive(Debug, Clone)]
pub struct SyntheticDataset<T> {
    pub x: Array2<T>,
    pub u_true: Array2<T>,
    pub v_true: Array2<T>,
    pub snr: T,
    pub seed: u64,
    pub side: usize,
    pub grid: GridMask,
}

impl<T: Real> SyntheticDataset<T> {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// First half of the rows for training, second half for testing.
    pub fn split_train_test(&self) -> (ArrayView2<'_, T>, ArrayView2<'_, T>) {
        self.x.view().split_at(ndarray::Axis(0), self.n() / 2)
    }
}

/// The three ground-truth loadings as columns of a side² × 3 matrix: value 1
/// inside each disc, 0 outside. Pixel (i, j) maps to feature i + side·j and
/// its center (i + ½, j + ½) decides disc membership.
pub fn make_loadings<T: Real>(side: usize) -> Result<Array2<T>> {
    if side < MIN_SIDE {
        return Err(Error::InvalidParameter(format!(
            "side {side} too small to separate discs (minimum {MIN_SIDE})"
        )));
    }
    let p = side * side;
    let radius = side as f64 / 10.0;
    let r_sq = radius * radius;
    let mut v = Array2::zeros((p, 3));
    for (&(fx, fy), &comp) in DISC_CENTERS.iter().zip(&DISC_COMPONENT) {
        let cx = fx * side as f64;
        let cy = fy * side as f64;
        for j in 0..side {
            for i in 0..side {
                let dx = (i as f64 + 0.5) - cx;
                let dy = (j as f64 + 0.5) - cy;
                if dx * dx + dy * dy <= r_sq {
                    v[[i + side * j, comp]] = T::one();
                }
            }
        }
    }
    Ok(v)
}

/// Generates n images from the linear model X = U_true V_trueᵀ + noise, with
/// i.i.d. standard-normal coefficients and noise scaled so that the realized
/// Frobenius ratio ‖signal‖/‖noise‖ equals `snr` exactly. An infinite `snr`
/// zeroes the noise.
pub fn generate_dataset<T: Real>(
    seed: u64,
    n: usize,
    side: usize,
    snr: T,
) -> Result<SyntheticDataset<T>> {
    if n < 2 {
        return Err(Error::InvalidParameter("need at least two samples".into()));
    }
    if !(snr > T::zero()) {
        return Err(Error::InvalidParameter("snr must be positive".into()));
    }
    let v_true = make_loadings::<T>(side)?;
    let p = side * side;
    let grid = GridMask::full_2d(side, side)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Row-major draws keep the dataset a pure function of the seed.
    let u_draws: Vec<T> = (0..n * 3)
        .map(|_| T::of(StandardNormal.sample(&mut rng)))
        .collect();
    let u_true = Array2::from_shape_vec((n, 3), u_draws).expect("shape fixed");
    let noise_draws: Vec<T> = (0..n * p)
        .map(|_| T::of(StandardNormal.sample(&mut rng)))
        .collect();
    let noise = Array2::from_shape_vec((n, p), noise_draws).expect("shape fixed");

    let signal = u_true.dot(&v_true.t());
    let scale = if snr.is_infinite() {
        T::zero()
    } else {
        let signal_norm = frobenius(&signal);
        let noise_norm = frobenius(&noise);
        if noise_norm > T::zero() {
            signal_norm / (snr * noise_norm)
        } else {
            T::zero()
        }
    };
    let x = signal + noise * scale;

    Ok(SyntheticDataset {
        x,
        u_true,
        v_true,
        snr,
        seed,
        side,
        grid,
    })
}

fn frobenius<T: Real>(x: &Array2<T>) -> T {
    x.iter().fold(T::zero(), |acc, &e| acc + e * e).sqrt()
}
