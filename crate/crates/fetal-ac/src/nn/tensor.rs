//! Dense rank-3 tensor in row-major height x width x channels layout.

use super::scalar::Scalar;
use crate::error::{Error, Result};

/// Feature map or image patch.
///
/// Element `(y, x, c)` lives at `data[(y * width + x) * channels + c]`, so a
/// whole pixel's channel vector is contiguous and flattening for a fully
/// connected layer is a no-op reinterpretation of `data`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3<T> {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Scalar> Tensor3<T> {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Tensor3 {
            height,
            width,
            channels,
            data: vec![T::zero(); height * width * channels],
        }
    }

    /// Builds a tensor from raw data, checking length and finiteness.
    pub fn from_vec(height: usize, width: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(Error::Dimension(format!(
                "tensor data length {} does not match {}x{}x{}",
                data.len(),
                height,
                width,
                channels
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("tensor contains non-finite values".into()));
        }
        Ok(Tensor3 {
            height,
            width,
            channels,
            data,
        })
    }

    /// Same as `from_vec` but without the finiteness scan; used on hot paths
    /// where values are finite by construction.
    pub(crate) fn from_vec_unchecked(
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<T>,
    ) -> Self {
        debug_assert_eq!(data.len(), height * width * channels);
        Tensor3 {
            height,
            width,
            channels,
            data,
        }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }
    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }
    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }
    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> T {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: T) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_validates() {
        assert!(Tensor3::<f32>::from_vec(2, 2, 1, vec![0.0; 3]).is_err());
        assert!(Tensor3::<f32>::from_vec(2, 2, 1, vec![f32::NAN; 4]).is_err());
        let t = Tensor3::<f32>::from_vec(2, 2, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(t.get(1, 0, 0), 3.0);
    }
}
