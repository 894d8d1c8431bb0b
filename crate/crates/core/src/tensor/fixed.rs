use crate::error::{Error, Result};
use crate::scalar::Real;

pub const DEFAULT_FRAC_BITS: u32 = 16;
pub const MAX_FRAC_BITS: u32 = 30;

/// Fixed-point tensor: `real = data / 2^frac_bits`, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QTensor {
    shape: Vec<usize>,
    frac_bits: u32,
    data: Vec<i32>,
}

impl QTensor {
    pub fn new(shape: Vec<usize>, frac_bits: u32, data: Vec<i32>) -> Result<Self> {
        if frac_bits > MAX_FRAC_BITS {
            return Err(Error::contract(format!("frac_bits {frac_bits} exceeds {MAX_FRAC_BITS}")));
        }
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::contract(format!("shape {shape:?} must be non-empty with positive dimensions")));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::contract(format!("shape {shape:?} holds {len} values but data has {}", data.len())));
        }
        Ok(Self { shape, frac_bits, data })
    }

    pub fn zeros(shape: Vec<usize>, frac_bits: u32) -> Result<Self> {
        let len = shape.iter().product();
        Self::new(shape, frac_bits, vec![0; len])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    pub fn data(&self) -> &[i32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [i32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<i32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Same data, new shape with the same element count.
    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.frac_bits, self.data)
    }

    pub fn zero_fraction(&self) -> f64 {
        let zeros = self.data.iter().filter(|&&v| v == 0).count();
        zeros as f64 / self.data.len() as f64
    }

    pub fn to_real<T: Real>(&self) -> Vec<T> {
        from_fixed(self)
    }
}

/// Encode one real value: round half away from zero, saturate to `i32`.
pub fn encode<T: Real>(x: T, frac_bits: u32) -> i32 {
    let x = x.to_f64_lossy();
    debug_assert!(!x.is_nan(), "encode of NaN");
    if x.is_nan() {
        return 0;
    }
    let scaled = (x * (1u64 << frac_bits) as f64).round();
    // `as` saturates for out-of-range floats
    scaled as i32
}

/// Exact decode of one fixed-point word.
pub fn decode<T: Real>(q: i32, frac_bits: u32) -> T {
    T::lit(q as f64 / (1u64 << frac_bits) as f64)
}

pub fn to_fixed<T: Real>(values: &[T], shape: Vec<usize>, frac_bits: u32) -> Result<QTensor> {
    let data = values.iter().map(|&x| encode(x, frac_bits)).collect();
    QTensor::new(shape, frac_bits, data)
}

pub fn from_fixed<T: Real>(q: &QTensor) -> Vec<T> {
    q.data.iter().map(|&v| decode(v, q.frac_bits)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn one_is_two_to_the_frac_bits() {
        let q = to_fixed(&[1.0f64], vec![1], 16).unwrap();
        assert_eq!(q.data(), &[65536]);
    }

    #[test]
    fn zero_round_trips() {
        let q = to_fixed(&[0.0f32], vec![1], 16).unwrap();
        assert_eq!(from_fixed::<f32>(&q), vec![0.0]);
    }

    #[test]
    fn rounds_half_away_from_zero() {
        let half = 0.5 / 65536.0;
        assert_eq!(encode(half, 16), 1);
        assert_eq!(encode(-half, 16), -1);
        assert_eq!(encode(half * 0.99, 16), 0);
    }

    #[test]
    fn saturates() {
        assert_eq!(encode(1e12f64, 16), i32::MAX);
        assert_eq!(encode(-1e12f64, 16), i32::MIN);
    }

    #[test]
    fn round_trip_error_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..10_000).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let q = to_fixed(&xs, vec![xs.len()], 16).unwrap();
        let back: Vec<f64> = from_fixed(&q);
        let worst = xs.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst <= 2f64.powi(-17), "worst {worst}");
    }

    #[test]
    fn shape_must_match() {
        assert!(QTensor::new(vec![2, 2], 16, vec![0; 3]).is_err());
        assert!(QTensor::new(vec![2, 0], 16, vec![]).is_err());
        assert!(QTensor::new(vec![1], 31, vec![0]).is_err());
    }
}
