//! Parallel-beam acquisition geometry and the ray-path-length system matrix.
//!
//! The image occupies the square `[-fov/2, fov/2]²` (mm), pixel `(row, col)` has flat index
//! `row·n + col`, and row 0 is the top edge (largest y). View `v` is at angle
//! `θ_v = v·span/n_angles`; its rays travel along `(cos θ, sin θ)` so that angle 0 projects
//! along the image x-axis. Detector bin `k` sits at offset
//! `(k + 0.5)/n_rays·fov − fov/2` along the detector axis `(−sin θ, cos θ)`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::image::Image;
use crate::Real;

/// Direction components below this magnitude are treated as exactly axis-parallel.
const PARALLEL_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub n_pixels: usize,
    pub fov_mm: f64,
    pub n_angles: usize,
    pub angular_span_deg: f64,
    pub n_rays: usize,
}

impl Geometry {
    pub fn new(
        n_pixels: usize,
        fov_mm: f64,
        n_angles: usize,
        angular_span_deg: f64,
        n_rays: usize,
    ) -> Result<Self> {
        if n_pixels < 2 {
            return Err(Error::InvalidParameter(format!(
                "n_pixels must be at least 2, got {n_pixels}"
            )));
        }
        if n_angles == 0 || n_rays == 0 {
            return Err(Error::InvalidParameter(
                "n_angles and n_rays must be positive".into(),
            ));
        }
        if !(fov_mm > 0.0) || !fov_mm.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "fov_mm must be positive, got {fov_mm}"
            )));
        }
        if !(angular_span_deg > 0.0) || !angular_span_deg.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "angular span must be positive, got {angular_span_deg}"
            )));
        }
        Ok(Self {
            n_pixels,
            fov_mm,
            n_angles,
            angular_span_deg,
            n_rays,
        })
    }

    /// Pixel side length in mm.
    pub fn pixel_size(&self) -> f64 {
        self.fov_mm / self.n_pixels as f64
    }

    pub fn n_measurements(&self) -> usize {
        self.n_angles * self.n_rays
    }

    pub fn n_unknowns(&self) -> usize {
        self.n_pixels * self.n_pixels
    }

    pub fn angles_deg(&self) -> Vec<f64> {
        (0..self.n_angles)
            .map(|v| v as f64 * self.angular_span_deg / self.n_angles as f64)
            .collect()
    }

    pub fn detector_offsets(&self) -> Vec<f64> {
        let n = self.n_rays as f64;
        (0..self.n_rays)
            .map(|k| (k as f64 + 0.5) / n * self.fov_mm - self.fov_mm / 2.0)
            .collect()
    }

    /// Intersection lengths of one ray with the pixel grid, in traversal order.
    pub fn trace_ray(&self, angle_deg: f64, offset: f64, out: &mut Vec<(usize, f64)>) {
        out.clear();
        let n = self.n_pixels;
        let half = self.fov_mm / 2.0;
        let px = self.pixel_size();
        let theta = angle_deg.to_radians();
        let (dir_x, dir_y) = (theta.cos(), theta.sin());
        let (ox, oy) = (-offset * dir_y, offset * dir_x);

        // Slab clipping against the field-of-view box.
        let mut t_in = f64::NEG_INFINITY;
        let mut t_out = f64::INFINITY;
        for (origin, dir) in [(ox, dir_x), (oy, dir_y)] {
            if dir.abs() < PARALLEL_EPS {
                if origin < -half || origin > half {
                    return;
                }
            } else {
                let a = (-half - origin) / dir;
                let b = (half - origin) / dir;
                t_in = t_in.max(a.min(b));
                t_out = t_out.min(a.max(b));
            }
        }
        let min_len = 1e-12 * px;
        if !(t_out - t_in > min_len) {
            return;
        }

        let mut alphas = Vec::with_capacity(2 * n + 4);
        alphas.push(t_in);
        alphas.push(t_out);
        for (origin, dir) in [(ox, dir_x), (oy, dir_y)] {
            if dir.abs() < PARALLEL_EPS {
                continue;
            }
            for k in 0..=n {
                let plane = -half + k as f64 * px;
                let t = (plane - origin) / dir;
                if t > t_in && t < t_out {
                    alphas.push(t);
                }
            }
        }
        alphas.sort_by(|a, b| a.partial_cmp(b).unwrap());

        for w in alphas.windows(2) {
            let len = w[1] - w[0];
            if len <= min_len {
                continue;
            }
            let mid = 0.5 * (w[0] + w[1]);
            let xm = ox + mid * dir_x;
            let ym = oy + mid * dir_y;
            let col = ((xm + half) / px).floor();
            let row = ((half - ym) / px).floor();
            if col < 0.0 || row < 0.0 || col >= n as f64 || row >= n as f64 {
                continue;
            }
            let idx = row as usize * n + col as usize;
            match out.last_mut() {
                Some((last, acc)) if *last == idx => *acc += len,
                _ => out.push((idx, len)),
            }
        }
    }
}

/// Sparse matrix of ray/pixel intersection lengths (mm), one row per ray.
///
/// Stored twice: row-compressed for forward projection and column-compressed for back
/// projection, so both directions stream contiguously.
#[derive(Debug, Clone)]
pub struct SystemMatrix<T> {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<T>,
    col_ptr: Vec<usize>,
    row_idx: Vec<u32>,
    values_t: Vec<T>,
}

impl<T: Real> SystemMatrix<T> {
    /// Traces every ray of `g` through the pixel grid (exact line/grid intersections).
    pub fn build(g: &Geometry) -> Self {
        let n_rows = g.n_measurements();
        let n_cols = g.n_unknowns();
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut scratch = Vec::new();
        let offsets = g.detector_offsets();
        for angle in g.angles_deg() {
            for &s in &offsets {
                g.trace_ray(angle, s, &mut scratch);
                for &(c, len) in &scratch {
                    col_idx.push(c as u32);
                    values.push(T::lit(len));
                }
                row_ptr.push(col_idx.len());
            }
        }
        Self::from_csr(n_rows, n_cols, row_ptr, col_idx, values)
    }

    fn from_csr(
        n_rows: usize,
        n_cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<u32>,
        values: Vec<T>,
    ) -> Self {
        let nnz = values.len();
        let mut col_ptr = vec![0usize; n_cols + 1];
        for &c in &col_idx {
            col_ptr[c as usize + 1] += 1;
        }
        for c in 0..n_cols {
            col_ptr[c + 1] += col_ptr[c];
        }
        let mut next = col_ptr.clone();
        let mut row_idx = vec![0u32; nnz];
        let mut values_t = vec![T::zero(); nnz];
        for r in 0..n_rows {
            for k in row_ptr[r]..row_ptr[r + 1] {
                let c = col_idx[k] as usize;
                row_idx[next[c]] = r as u32;
                values_t[next[c]] = values[k];
                next[c] += 1;
            }
        }
        Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
            col_ptr,
            row_idx,
            values_t,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, value)` entries of one ray.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .zip(&self.values[span])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.n_rows)
            .map(|r| self.row(r).map(|(_, v)| v).sum())
            .collect()
    }

    /// `out ← A·x`
    pub fn forward_into(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(out.len(), self.n_rows);
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = T::zero();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k] as usize];
            }
            *o = acc;
        }
    }

    /// `out ← Aᵀ·t`
    pub fn adjoint_into(&self, t: &[T], out: &mut [T]) {
        debug_assert_eq!(t.len(), self.n_rows);
        debug_assert_eq!(out.len(), self.n_cols);
        for (c, o) in out.iter_mut().enumerate() {
            let mut acc = T::zero();
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                acc += self.values_t[k] * t[self.row_idx[k] as usize];
            }
            *o = acc;
        }
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        check_len("forward projection input", self.n_cols, x.len())?;
        let mut out = vec![T::zero(); self.n_rows];
        self.forward_into(x, &mut out);
        Ok(out)
    }

    pub fn adjoint(&self, t: &[T]) -> Result<Vec<T>> {
        check_len("back projection input", self.n_rows, t.len())?;
        let mut out = vec![T::zero(); self.n_cols];
        self.adjoint_into(t, &mut out);
        Ok(out)
    }

    /// Dense row-major copy. Intended for small validation problems only.
    pub fn to_dense(&self) -> Vec<T> {
        let mut m = vec![T::zero(); self.n_rows * self.n_cols];
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                m[r * self.n_cols + c] = v;
            }
        }
        m
    }

    /// Writes `row,col,value` triplets (zero-based) with a header line.
    pub fn write_triplets(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "row,col,value")?;
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                writeln!(w, "{r},{c},{v:e}")?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// `A·x` on an image.
pub fn forward_project<T: Real>(a: &SystemMatrix<T>, x: &Image<T>) -> Result<Vec<T>> {
    a.forward(&x.data)
}

/// `Aᵀ·t`, returned as a flat image-domain vector.
pub fn back_project<T: Real>(a: &SystemMatrix<T>, t: &[T]) -> Result<Vec<T>> {
    a.adjoint(t)
}
