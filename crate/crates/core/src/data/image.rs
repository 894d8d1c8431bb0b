use crate::error::{Error, Result};
use crate::scalar::Real;

/// Single-channel image, row-major.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Image<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Real> Image<T> {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![T::zero(); width * height] }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::contract(format!(
                "{width}x{height} image needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    /// `f(x, y)` for column `x`, row `y`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    /// Border-replicating access.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> T {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y)
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: T) {
        self.data[y * self.width + x] = v;
    }

    pub fn max(&self) -> T {
        self.data.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn mean(&self) -> T {
        let n = T::from_usize(self.data.len()).expect("length fits scalar");
        self.data.iter().copied().sum::<T>() / n
    }

    pub fn map<U: Real>(&self, f: impl Fn(T) -> U) -> Image<U> {
        Image { width: self.width, height: self.height, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn cast<U: Real>(&self) -> Image<U> {
        self.map(|v| U::from(v).expect("value representable"))
    }

    /// Mean filter over a `(2r+1)²` window with replicated borders.
    pub fn box_blur(&self, radius: usize) -> Self {
        if radius == 0 {
            return self.clone();
        }
        let r = radius as isize;
        let norm = T::from_usize(2 * radius + 1).expect("radius fits scalar");
        // separable: rows, then columns
        let horiz = Image::from_fn(self.width, self.height, |x, y| {
            (-r..=r).map(|d| self.get_clamped(x as isize + d, y as isize)).sum::<T>() / norm
        });
        Image::from_fn(self.width, self.height, |x, y| {
            (-r..=r).map(|d| horiz.get_clamped(x as isize, y as isize + d)).sum::<T>() / norm
        })
    }
}

/// Dense per-pixel motion: `u` horizontal, `v` vertical, pixels per frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlowField<T> {
    width: usize,
    height: usize,
    u: Vec<T>,
    v: Vec<T>,
}

impl<T: Real> FlowField<T> {
    pub fn new(width: usize, height: usize, u: Vec<T>, v: Vec<T>) -> Result<Self> {
        if u.len() != width * height || v.len() != width * height {
            return Err(Error::contract(format!(
                "{width}x{height} flow needs {} values per component, got u={} v={}",
                width * height,
                u.len(),
                v.len()
            )));
        }
        Ok(Self { width, height, u, v })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, u: vec![T::zero(); width * height], v: vec![T::zero(); width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn u(&self) -> &[T] {
        &self.u
    }

    pub fn v(&self) -> &[T] {
        &self.v
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> (T, T) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, u: T, v: T) {
        let i = y * self.width + x;
        self.u[i] = u;
        self.v[i] = v;
    }

    /// `sqrt(u² + v²)` per pixel.
    pub fn magnitude(&self) -> Image<T> {
        Image {
            width: self.width,
            height: self.height,
            data: self.u.iter().zip(&self.v).map(|(&a, &b)| a.hypot(b)).collect(),
        }
    }

    pub fn cast<U: Real>(&self) -> FlowField<U> {
        let c = |s: &[T]| s.iter().map(|&v| U::from(v).expect("value representable")).collect();
        FlowField { width: self.width, height: self.height, u: c(&self.u), v: c(&self.v) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn magnitude_is_hypot() {
        let f = FlowField::new(2, 1, vec![3.0f64, 0.0], vec![4.0, -2.0]).unwrap();
        assert_eq!(f.magnitude().data(), &[5.0, 2.0]);
    }

    #[test]
    fn box_blur_preserves_constant_and_mass() {
        let img = Image::from_fn(9, 7, |_, _| 2.0f64);
        assert!(img.box_blur(2).data().iter().all(|&v| (v - 2.0).abs() < 1e-12));
        let mut spike = Image::<f64>::new(11, 11);
        spike.set(5, 5, 9.0);
        let b = spike.box_blur(1);
        assert!((b.data().iter().sum::<f64>() - 9.0).abs() < 1e-12);
        assert!((b.get(5, 5) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn size_checks() {
        assert!(Image::<f32>::from_vec(2, 2, vec![0.0; 3]).is_err());
        assert!(FlowField::<f32>::new(2, 2, vec![0.0; 4], vec![0.0; 3]).is_err());
    }
}
