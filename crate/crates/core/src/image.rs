//! Image- and projection-domain containers.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};
use crate::Real;

/// Row-major 2-D grid of attenuation coefficients (1/mm). Row 0 is the top of the field of view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image<T> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<T>,
}

impl<T: Real> Image<T> {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![T::zero(); width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        check_len("image data", width * height, data.len())?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: T) {
        self.data[row * self.width + col] = v;
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn max_value(&self) -> T {
        self.data.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn min_value(&self) -> T {
        self.data.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn mean(&self) -> T {
        self.data.iter().copied().sum::<T>() / T::from_usize_lossy(self.data.len().max(1))
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Projection-domain measurements, indexed `[angle][ray]` in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sinogram<T> {
    pub n_angles: usize,
    pub n_rays: usize,
    pub data: Vec<T>,
}

impl<T: Real> Sinogram<T> {
    pub fn from_vec(n_angles: usize, n_rays: usize, data: Vec<T>) -> Result<Self> {
        check_len("sinogram data", n_angles * n_rays, data.len())?;
        Ok(Self {
            n_angles,
            n_rays,
            data,
        })
    }

    #[inline]
    pub fn get(&self, angle: usize, ray: usize) -> T {
        self.data[angle * self.n_rays + ray]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn total(&self) -> T {
        self.data.iter().copied().sum()
    }
}
