use num_traits::{Float, FromPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::fmt::Debug;
use std::iter::Sum;

/// Floating-point element type of every network. Training runs at `f32`;
/// gradient checks run at `f64`.
pub trait Scalar:
    Float + FromPrimitive + Default + Debug + Sum + Send + Sync + Serialize + DeserializeOwned + 'static
{
    fn c(x: f64) -> Self {
        Self::from_f64(x).expect("finite constant")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
