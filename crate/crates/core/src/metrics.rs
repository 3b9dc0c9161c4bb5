//! Image quality measures against a known ground truth.

use crate::error::{check_len, Error, Result};
use crate::image::Image;
use crate::Real;

const WINDOW: usize = 11;
const SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

fn gaussian_window() -> [f64; WINDOW] {
    let mut w = [0.0; WINDOW];
    let c = (WINDOW / 2) as f64;
    for (i, wi) in w.iter_mut().enumerate() {
        let d = i as f64 - c;
        *wi = (-d * d / (2.0 * SIGMA * SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Separable Gaussian filter, keeping only windows that fit inside the image.
fn filter_valid(x: &[f64], w: usize, h: usize, k: &[f64; WINDOW]) -> (Vec<f64>, usize, usize) {
    let ow = w + 1 - WINDOW;
    let oh = h + 1 - WINDOW;
    let mut tmp = vec![0.0; ow * h];
    for r in 0..h {
        for c in 0..ow {
            tmp[r * ow + c] = (0..WINDOW).map(|i| k[i] * x[r * w + c + i]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = (0..WINDOW).map(|i| k[i] * tmp[(r + i) * ow + c]).sum();
        }
    }
    (out, ow, oh)
}

/// Mean structural similarity with an 11×11 Gaussian window (σ = 1.5) over all windows lying
/// fully inside the image. `data_range` is the dynamic range of the reference.
pub fn ssim<T: Real>(image: &Image<T>, reference: &Image<T>, data_range: f64) -> Result<f64> {
    check_len("image width", reference.width, image.width)?;
    check_len("image height", reference.height, image.height)?;
    if image.width < WINDOW || image.height < WINDOW {
        return Err(Error::InvalidParameter(format!(
            "SSIM needs at least {WINDOW}×{WINDOW} pixels"
        )));
    }
    if !(data_range > 0.0) {
        return Err(Error::InvalidParameter(
            "SSIM data range must be > 0".into(),
        ));
    }
    let (w, h) = (image.width, image.height);
    let x: Vec<f64> = image.data.iter().map(|v| v.as_f64()).collect();
    let y: Vec<f64> = reference.data.iter().map(|v| v.as_f64()).collect();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();
    let k = gaussian_window();
    let (mx, ow, oh) = filter_valid(&x, w, h, &k);
    let (my, _, _) = filter_valid(&y, w, h, &k);
    let (sxx, _, _) = filter_valid(&xx, w, h, &k);
    let (syy, _, _) = filter_valid(&yy, w, h, &k);
    let (sxy, _, _) = filter_valid(&xy, w, h, &k);
    let c1 = (K1 * data_range).powi(2);
    let c2 = (K2 * data_range).powi(2);
    let total: f64 = (0..ow * oh)
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cov = sxy[i] - ux * uy;
            ((2.0 * ux * uy + c1) * (2.0 * cov + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / (ow * oh) as f64)
}

/// `‖x − ref‖ / ‖ref‖`.
pub fn relative_error<T: Real>(image: &Image<T>, reference: &Image<T>) -> Result<f64> {
    check_len("image size", reference.len(), image.len())?;
    let num: f64 = image
        .data
        .iter()
        .zip(&reference.data)
        .map(|(a, b)| (a.as_f64() - b.as_f64()).powi(2))
        .sum();
    let den: f64 = reference.data.iter().map(|b| b.as_f64().powi(2)).sum();
    Ok((num / den).sqrt())
}
