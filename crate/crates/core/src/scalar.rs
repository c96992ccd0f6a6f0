use ndarray::NdFloat;
use num_traits::FromPrimitive;
use std::iter::Sum;

/// Floating-point scalar the whole crate is generic over.
///
/// `f32` and `f64` satisfy the bound; algorithms never assume a particular
/// width beyond what the caller's tolerance asks for.
pub trait Real: NdFloat + FromPrimitive + Sum {
    /// Lossy conversion from an `f64` constant.
    ///
    /// Panics only if the target type cannot represent any finite `f64`,
    /// which no implementor of `NdFloat` does.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 must convert")
    }
}

impl<T: NdFloat + FromPrimitive + Sum> Real for T {}
