//! Shepp–Logan ground truth and transmission data simulation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{check_len, Error, Result};
use crate::geometry::SystemMatrix;
use crate::image::{Image, Sinogram};
use crate::Real;

/// Ellipse parameters `(intensity, semi-axis a, semi-axis b, x0, y0, rotation in degrees)` of the
/// ten-ellipse head phantom with the contrast-enhanced intensities (values in `[0, 1]`).
pub const SHEPP_LOGAN_ELLIPSES: [[f64; 6]; 10] = [
    [1.0, 0.69, 0.92, 0.0, 0.0, 0.0],
    [-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0],
    [-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0],
    [-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0],
    [0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0],
    [0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0],
    [0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0],
    [0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0],
    [0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0],
    [0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0],
];

/// Rasterizes the Shepp–Logan phantom on an `n×n` grid whose pixel centres span `[-1, 1]`
/// (row 0 at y = +1). Values are clamped to be nonnegative.
pub fn shepp_logan<T: Real>(n: usize) -> Result<Image<T>> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "phantom size must be at least 2, got {n}"
        )));
    }
    let half = (n as f64 - 1.0) / 2.0;
    let coord = |k: usize| (k as f64 - half) / half;
    let mut img = Image::zeros(n, n);
    for row in 0..n {
        let y = -coord(row);
        for col in 0..n {
            let x = coord(col);
            let v: f64 = SHEPP_LOGAN_ELLIPSES
                .iter()
                .filter(|e| inside_ellipse(e, x, y))
                .map(|e| e[0])
                .sum();
            img.set(row, col, T::lit(v.max(0.0)));
        }
    }
    Ok(img)
}

fn inside_ellipse(e: &[f64; 6], x: f64, y: f64) -> bool {
    let [_, a, b, x0, y0, phi] = *e;
    let (s, c) = phi.to_radians().sin_cos();
    let (dx, dy) = (x - x0, y - y0);
    let u = dx * c + dy * s;
    let v = dy * c - dx * s;
    u * u / (a * a) + v * v / (b * b) <= 1.0
}

/// Rescales a raw phantom so the largest line integral through it equals `max_line_integral`.
/// Returns the scaled image and the scale factor applied (1/mm per phantom unit).
pub fn scale_to_max_line_integral<T: Real>(
    a: &SystemMatrix<T>,
    raw: &Image<T>,
    max_line_integral: T,
) -> Result<(Image<T>, T)> {
    let proj = a.forward(&raw.data)?;
    let peak = proj.iter().copied().fold(T::zero(), T::max);
    if !(peak > T::zero()) {
        return Err(Error::InvalidParameter(
            "phantom has no support inside the field of view".into(),
        ));
    }
    let s = max_line_integral / peak;
    Ok((raw.map(|v| v * s), s))
}

/// `d_j = I0·exp(−(A·x_true)_j)`.
pub fn simulate_noiseless<T: Real>(
    a: &SystemMatrix<T>,
    x_true: &Image<T>,
    i0: T,
    n_angles: usize,
    n_rays: usize,
) -> Result<Sinogram<T>> {
    if !(i0 > T::zero()) {
        return Err(Error::InvalidParameter("I0 must be positive".into()));
    }
    check_len("sinogram shape", a.n_rows(), n_angles * n_rays)?;
    let proj = a.forward(&x_true.data)?;
    let data = proj.into_iter().map(|p| i0 * (-p).exp()).collect();
    Sinogram::from_vec(n_angles, n_rays, data)
}

/// Independent Poisson draws with the noiseless sinogram as means. The generator is
/// ChaCha20 seeded from `seed`, and the sampling algorithms are fixed, so the output is
/// reproducible across platforms.
pub fn simulate_noisy<T: Real>(noiseless: &Sinogram<T>, seed: u64) -> Result<Sinogram<T>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(noiseless.len());
    for &mean in &noiseless.data {
        let m = mean.as_f64();
        if !(m >= 0.0) || !m.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "Poisson mean must be finite and nonnegative, got {m}"
            )));
        }
        data.push(T::lit(sample_poisson(&mut rng, m) as f64));
    }
    Sinogram::from_vec(noiseless.n_angles, noiseless.n_rays, data)
}

/// Mean at which sampling switches from sequential inversion to transformed rejection.
const INVERSION_LIMIT: f64 = 30.0;

/// One Poisson draw. Inversion by sequential search below a mean of 30; above it the
/// transformed rejection with squeeze of Hörmann (PTRS).
pub fn sample_poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    if mean < INVERSION_LIMIT {
        let mut k = 0u64;
        let mut p = (-mean).exp();
        let mut cdf = p;
        let u: f64 = rng.gen();
        while u > cdf {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
            // cdf has saturated below 1 due to rounding
            if p < f64::MIN_POSITIVE && k as f64 > mean {
                break;
            }
        }
        return k;
    }

    let smu = mean.sqrt();
    let b = 0.931 + 2.53 * smu;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    let log_mean = mean.ln();
    loop {
        let u: f64 = rng.gen::<f64>() - 0.5;
        let v: f64 = rng.gen();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        let rhs = -mean + k * log_mean - ln_factorial(k as u64);
        if lhs <= rhs {
            return k as u64;
        }
    }
}

/// `ln(k!)`: exact table for small `k`, Stirling series beyond.
fn ln_factorial(k: u64) -> f64 {
    const TABLE: [f64; 10] = [
        0.0,
        0.0,
        std::f64::consts::LN_2,
        1.791_759_469_228_055,
        3.178_053_830_347_146,
        4.787_491_742_782_046,
        6.579_251_212_010_101,
        8.525_161_361_065_415,
        10.604_602_902_745_25,
        12.801_827_480_081_469,
    ];
    if (k as usize) < TABLE.len() {
        return TABLE[k as usize];
    }
    let n = k as f64 + 1.0;
    let inv = 1.0 / n;
    let inv2 = inv * inv;
    (n - 0.5) * n.ln() - n
        + 0.5 * (2.0 * std::f64::consts::PI).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0))
}

/// Negative-log display of a sinogram, `min(−ln(max(d, 1)/I0), clip_max)`, laid out as an
/// image with one row per view and one column per detector bin.
pub fn negative_log_display<T: Real>(d: &Sinogram<T>, i0: T, clip_max: T) -> Result<Image<T>> {
    if !(clip_max > T::zero()) {
        return Err(Error::InvalidParameter("clip_max must be positive".into()));
    }
    let data = d
        .data
        .iter()
        .map(|&v| (-(v.max(T::one()) / i0).ln()).min(clip_max))
        .collect();
    Image::from_vec(d.n_rays, d.n_angles, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Geometry;

    #[test]
    fn phantom_support_and_range() {
        for n in [2usize, 3, 16, 64, 65] {
            let p = shepp_logan::<f64>(n).unwrap();
            assert_eq!(p.get(0, 0), 0.0);
            assert_eq!(p.get(n - 1, n - 1), 0.0);
            assert!(p.min_value() >= 0.0);
        }
        assert!(shepp_logan::<f64>(1).is_err());
    }

    #[test]
    fn phantom_max_bounded_by_ellipse_sum() {
        // Oracle: evaluate the ellipse sum directly on the same pixel centres.
        let n = 64;
        let p = shepp_logan::<f64>(n).unwrap();
        let half = (n as f64 - 1.0) / 2.0;
        let mut brute_max = f64::NEG_INFINITY;
        for r in 0..n {
            for c in 0..n {
                let x = (c as f64 - half) / half;
                let y = -(r as f64 - half) / half;
                let mut v = 0.0;
                for e in &SHEPP_LOGAN_ELLIPSES {
                    let t = e[5].to_radians();
                    let u = (x - e[3]) * t.cos() + (y - e[4]) * t.sin();
                    let w = (y - e[4]) * t.cos() - (x - e[3]) * t.sin();
                    if (u / e[1]).powi(2) + (w / e[2]).powi(2) <= 1.0 {
                        v += e[0];
                    }
                }
                brute_max = brute_max.max(v.max(0.0));
            }
        }
        assert!((p.max_value() - brute_max).abs() < 1e-12);
        assert!(p.max_value() <= 2.0);
        // background outside the skull
        assert_eq!(p.get(n / 2, 0), 0.0);
        // skull rim on the vertical axis near the top
        assert!((p.get(3, n / 2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noiseless_of_empty_object_is_i0() {
        let g = Geometry::new(8, 64.0, 6, 180.0, 7).unwrap();
        let a = SystemMatrix::<f64>::build(&g);
        let d = simulate_noiseless(&a, &Image::zeros(8, 8), 1e5, 6, 7).unwrap();
        assert!(d.data.iter().all(|&v| v == 1e5));
        assert!(simulate_noiseless(&a, &Image::zeros(8, 8), 0.0, 6, 7).is_err());
        assert!(simulate_noiseless(&a, &Image::zeros(8, 8), 1e5, 6, 6).is_err());
    }

    #[test]
    fn rays_missing_the_object_see_i0() {
        let g = Geometry::new(16, 64.0, 4, 180.0, 16).unwrap();
        let a = SystemMatrix::<f64>::build(&g);
        let mut x = Image::zeros(16, 16);
        x.set(8, 8, 0.1);
        let d = simulate_noiseless(&a, &x, 1e5, 4, 16).unwrap();
        // ray 0 of view 0 runs along an edge row
        assert_eq!(d.get(0, 0), 1e5);
        assert!(d.data.iter().any(|&v| v < 1e5));
    }

    #[test]
    fn degenerate_poisson() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(sample_poisson(&mut rng, 0.0), 0);
        }
    }

    #[test]
    fn large_mean_sample_mean() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let n = 10_000;
        let mean = 1e5;
        let s: f64 = (0..n).map(|_| sample_poisson(&mut rng, mean) as f64).sum();
        let m = s / n as f64;
        assert!((m - mean).abs() <= 3.0 * (mean / n as f64).sqrt(), "{m}");
    }

    #[test]
    fn empirical_variance_matches_mean() {
        for (mean, seed) in [(3.5, 11u64), (29.0, 12), (30.0, 13), (250.0, 14), (1e5, 15)] {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let n = 100_000;
            let xs: Vec<f64> = (0..n)
                .map(|_| sample_poisson(&mut rng, mean) as f64)
                .collect();
            let m = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            assert!((var - mean).abs() <= 0.05 * mean, "mean {mean}: var {var}");
            assert!(
                (m - mean).abs() <= 5.0 * (mean / n as f64).sqrt(),
                "mean {mean}: {m}"
            );
        }
    }

    #[test]
    fn ln_factorial_matches_product() {
        let mut acc = 0.0f64;
        for k in 1..200u64 {
            acc += (k as f64).ln();
            assert!((ln_factorial(k) - acc).abs() < 1e-10 * acc.max(1.0), "{k}");
        }
    }

    #[test]
    fn noisy_is_reproducible() {
        let d = Sinogram::from_vec(2, 3, vec![0.0f64, 1.0, 5.0, 40.0, 1e3, 1e5]).unwrap();
        let a = simulate_noisy(&d, 42).unwrap();
        let b = simulate_noisy(&d, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.data[0], 0.0);
        assert!(a.data.iter().all(|v| v.fract() == 0.0 && *v >= 0.0));
        let c = simulate_noisy(&d, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn log_display_rules() {
        let i0 = 1e5;
        let d = Sinogram::from_vec(1, 3, vec![i0, 0.0, i0 / std::f64::consts::E]).unwrap();
        let img = negative_log_display(&d, i0, 10.0).unwrap();
        assert_eq!(img.data[0], 0.0);
        assert_eq!(img.data[1], 10.0);
        assert!((img.data[2] - 1.0).abs() < 1e-12);
        assert!(negative_log_display(&d, i0, 0.0).is_err());
    }
}
