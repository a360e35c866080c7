//! Structure measure driving the dynamic search range.
//!
//! The measure is built from the greyscale plane in three steps: gradient
//! magnitude, pointwise clamp, Gaussian smoothing, then normalization by the
//! grid maximum. The result `f` lives in `[0, 1]` and is high where the image
//! has many boundaries. The radius-scaling field is `g = exp(f - mean(f))`,
//! so `g = 1` on gradient-free images and clusters in busy areas search a
//! wider window than clusters in flat areas.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imageio::Image;

/// Default smoothing standard deviation in pixels.
pub const DEFAULT_SIGMA: f64 = 20.0;
/// Default gradient clamp level.
pub const DEFAULT_CLAMP: f64 = 2.0 / 255.0;

/// Per-pixel structure fields. Planes are row major, `width * height` long.
#[derive(Debug, Clone)]
pub struct StructureMap {
    pub width: usize,
    pub height: usize,
    /// Normalized smoothed clamped gradient magnitude, in `[0, 1]`.
    pub f: Vec<f64>,
    /// Search-radius scale `exp(f - f_mean)`, strictly positive.
    pub g: Vec<f64>,
    /// Grid mean of `f`.
    pub f_mean: f64,
    pub sigma: f64,
    pub clamp: f64,
}

impl StructureMap {
    /// `g` sampled at a sub-pixel position, rounded to the nearest in-bounds
    /// pixel.
    pub fn g_at(&self, x: f64, y: f64) -> f64 {
        let xi = (x.round().max(0.0) as usize).min(self.width - 1);
        let yi = (y.round().max(0.0) as usize).min(self.height - 1);
        self.g[yi * self.width + xi]
    }
}

/// Gradient magnitude `sqrt(Dx^2 + Dy^2)` of a `[0, 1]` plane.
///
/// Central differences in the interior, one-sided at the borders; values lie
/// in `[0, sqrt(2)]`.
pub fn gradient_magnitude(grey: &[f64], width: usize, height: usize) -> Result<Vec<f64>> {
    if width < 2 || height < 2 {
        return Err(Error::InvalidImage(format!(
            "gradient needs at least 2x2 pixels, got {width}x{height}"
        )));
    }
    if grey.len() != width * height {
        return Err(Error::DimensionMismatch(format!(
            "plane has {} entries, expected {}x{}",
            grey.len(),
            width,
            height
        )));
    }
    let at = |x: usize, y: usize| grey[y * width + x];
    let mut out = vec![0.0; grey.len()];
    out.par_chunks_mut(width).enumerate().for_each(|(y, row)| {
        for (x, slot) in row.iter_mut().enumerate() {
            let dx = if x == 0 {
                at(1, y) - at(0, y)
            } else if x == width - 1 {
                at(width - 1, y) - at(width - 2, y)
            } else {
                (at(x + 1, y) - at(x - 1, y)) / 2.0
            };
            let dy = if y == 0 {
                at(x, 1) - at(x, 0)
            } else if y == height - 1 {
                at(x, height - 1) - at(x, height - 2)
            } else {
                (at(x, y + 1) - at(x, y - 1)) / 2.0
            };
            *slot = (dx * dx + dy * dy).sqrt();
        }
    });
    Ok(out)
}

/// Normalized 1-D Gaussian kernel with radius `ceil(3 * sigma)`.
fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as usize;
    let mut k: Vec<f64> = (-(radius as isize)..=radius as isize)
        .map(|i| {
            let x = i as f64;
            (-(x * x) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Separable Gaussian blur with truncated, renormalized borders.
///
/// At positions where the kernel overhangs the plane, the weights of the
/// in-bounds taps are rescaled to sum to one, so a constant plane stays
/// constant and no darkening occurs at the edges. Equivalent to dense 2-D
/// convolution with the renormalized product kernel, up to rounding.
///
/// Both passes accumulate one kernel tap at a time over contiguous slices,
/// which keeps the inner loops vectorizable; large sigmas stay cheap enough
/// that the structure measure is a small fraction of a segmentation run.
pub fn gaussian_blur(plane: &[f64], width: usize, height: usize, sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    if plane.len() != width * height {
        return Err(Error::DimensionMismatch(format!(
            "plane has {} entries, expected {}x{}",
            plane.len(),
            width,
            height
        )));
    }
    let kernel = gaussian_kernel(sigma);
    let radius = kernel.len() / 2;
    let ops = ConvOps::detect();

    // Horizontal pass.
    let mut tmp = vec![0.0; plane.len()];
    let norm_x = truncation_norms(width, &kernel);
    tmp.par_chunks_mut(width).enumerate().for_each(|(y, dst)| {
        let src = &plane[y * width..(y + 1) * width];
        convolve_line(dst, src, &kernel, &norm_x, ops);
    });
    // Vertical pass: same sweep with a row stride. Border truncation in y is
    // uniform across each row, so the single renorm factor per row applies.
    let mut out = vec![0.0; plane.len()];
    let norm_y = truncation_norms(height, &kernel);
    out.par_chunks_mut(width).enumerate().for_each(|(y, dst)| {
        let lo = radius.saturating_sub(y);
        let hi = (kernel.len() - 1).min(height - 1 + radius - y);
        let mut j = lo;
        while j <= hi {
            let block = (hi + 1 - j).min(8);
            let sy = y + j - radius;
            let src = &tmp[sy * width..(sy + block) * width];
            (ops.sweep)(dst, src, width, &kernel[j..j + block]);
            j += block;
        }
        let n = norm_y[y];
        if n != 1.0 {
            for v in dst.iter_mut() {
                *v /= n;
            }
        }
    });
    Ok(out)
}

/// One output line of 1-D convolution along a row. `dst` starts zeroed;
/// taps are accumulated in blocks of eight.
fn convolve_line(dst: &mut [f64], src: &[f64], kernel: &[f64], norms: &[f64], ops: ConvOps) {
    let len = dst.len();
    let radius = kernel.len() / 2;

    // Interior: every tap in bounds, no renormalization.
    if len > 2 * radius {
        let mid = &mut dst[radius..len - radius];
        let mut j = 0;
        while j < kernel.len() {
            let block = (kernel.len() - j).min(8);
            // For tap j the source slice starts at (x=radius) + j - radius.
            let rows = &src[j..j + (len - 2 * radius) + (block - 1)];
            (ops.sweep_strided)(mid, rows, 1, &kernel[j..j + block]);
            j += block;
        }
    }

    // Borders: per-pixel dot product over the in-bounds taps, then
    // renormalize. Border spans are at most `radius` wide on each side.
    let (b0, b1) = (radius.min(len), len.saturating_sub(radius).max(radius.min(len)));
    let mut border = |x: usize| {
        let lo = radius.saturating_sub(x);
        let hi = (kernel.len() - 1).min(len - 1 + radius - x);
        dst[x] = (ops.dot)(&kernel[lo..=hi], &src[x + lo - radius..=x + hi - radius]) / norms[x];
    };
    for x in 0..b0 {
        border(x);
    }
    for x in b1..len {
        border(x);
    }
}

/// Dot product with split accumulators so the adds pipeline.
fn dot_generic(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let mut chunks = a.chunks_exact(4).zip(b.chunks_exact(4));
    for (ka, kb) in &mut chunks {
        for i in 0..4 {
            acc[i] += ka[i] * kb[i];
        }
    }
    let mut tail = 0.0;
    let rem = a.len() - a.len() % 4;
    for (x, y) in a[rem..].iter().zip(&b[rem..]) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2", enable = "fma")]
unsafe fn dot_fma(a: &[f64], b: &[f64]) -> f64 {
    dot_generic(a, b)
}

/// Vectorizable accumulation kernels, with an FMA path picked at runtime.
#[derive(Clone, Copy)]
struct ConvOps {
    /// dst[i] += sum_t k[t] * rows[t * stride + i], up to 8 taps.
    sweep_strided: fn(&mut [f64], &[f64], usize, &[f64]),
    /// sweep_strided with stride = dst.len() (whole rows).
    sweep: fn(&mut [f64], &[f64], usize, &[f64]),
    dot: fn(&[f64], &[f64]) -> f64,
}

impl ConvOps {
    fn detect() -> Self {
        #[cfg(target_arch = "x86_64")]
        {
            if std::arch::is_x86_feature_detected!("avx2")
                && std::arch::is_x86_feature_detected!("fma")
            {
                return ConvOps {
                    sweep_strided: |d, r, st, k| unsafe { sweep_fma(d, r, st, k) },
                    sweep: |d, r, w, k| unsafe { sweep_fma(d, r, w, k) },
                    dot: |a, b| unsafe { dot_fma(a, b) },
                };
            }
        }
        ConvOps {
            sweep_strided: sweep_scalar,
            sweep: |d, r, w, k| sweep_scalar(d, r, w, k),
            dot: dot_generic,
        }
    }
}

fn sweep_scalar(dst: &mut [f64], rows: &[f64], stride: usize, k: &[f64]) {
    sweep_body(dst, rows, stride, k);
}

/// Accumulate up to eight kernel taps into `dst`. The eight-tap arm walks
/// pre-sliced rows through a zip chain so no bounds checks survive in the
/// inner loop.
#[inline(always)]
fn sweep_body(dst: &mut [f64], rows: &[f64], stride: usize, k: &[f64]) {
    let n = dst.len();
    if k.len() == 8 {
        let r0 = &rows[0..n];
        let r1 = &rows[stride..stride + n];
        let r2 = &rows[2 * stride..2 * stride + n];
        let r3 = &rows[3 * stride..3 * stride + n];
        let r4 = &rows[4 * stride..4 * stride + n];
        let r5 = &rows[5 * stride..5 * stride + n];
        let r6 = &rows[6 * stride..6 * stride + n];
        let r7 = &rows[7 * stride..7 * stride + n];
        let iter = dst
            .iter_mut()
            .zip(r0)
            .zip(r1)
            .zip(r2)
            .zip(r3)
            .zip(r4)
            .zip(r5)
            .zip(r6)
            .zip(r7);
        for ((((((((d, &a0), &a1), &a2), &a3), &a4), &a5), &a6), &a7) in iter {
            *d += k[0] * a0
                + k[1] * a1
                + k[2] * a2
                + k[3] * a3
                + k[4] * a4
                + k[5] * a5
                + k[6] * a6
                + k[7] * a7;
        }
    } else {
        for (i, d) in dst.iter_mut().enumerate() {
            let mut acc = *d;
            for (t, &kt) in k.iter().enumerate() {
                acc += kt * rows[t * stride + i];
            }
            *d = acc;
        }
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2", enable = "fma")]
unsafe fn sweep_fma(dst: &mut [f64], rows: &[f64], stride: usize, k: &[f64]) {
    sweep_body(dst, rows, stride, k);
}

/// Per-position in-bounds kernel weight sum (1.0 where the kernel fits).
fn truncation_norms(len: usize, kernel: &[f64]) -> Vec<f64> {
    let radius = kernel.len() / 2;
    let mut norm = vec![1.0f64; len];
    for (pos, slot) in norm.iter_mut().enumerate() {
        let lo = radius.saturating_sub(pos);
        let hi = (kernel.len() - 1).min(len - 1 + radius - pos);
        if lo != 0 || hi != kernel.len() - 1 {
            *slot = kernel[lo..=hi].iter().sum();
        }
    }
    norm
}

/// Compute the structure fields for an image.
pub fn compute_structure(img: &Image, sigma: f64, clamp: f64) -> Result<StructureMap> {
    structure_from_plane(&img.grey, img.width, img.height, sigma, clamp)
}

/// Same as [`compute_structure`], on a bare greyscale plane.
pub fn structure_from_plane(
    grey: &[f64],
    width: usize,
    height: usize,
    sigma: f64,
    clamp: f64,
) -> Result<StructureMap> {
    let grad = gradient_magnitude(grey, width, height)?;
    structure_from_gradient(&grad, width, height, sigma, clamp)
}

/// Same as [`compute_structure`], starting from a precomputed gradient
/// magnitude plane.
pub fn structure_from_gradient(
    grad: &[f64],
    width: usize,
    height: usize,
    sigma: f64,
    clamp: f64,
) -> Result<StructureMap> {
    if !(clamp > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "clamp must be positive, got {clamp}"
        )));
    }
    let clamped: Vec<f64> = grad.iter().map(|v| v.min(clamp)).collect();
    let mut f = gaussian_blur(&clamped, width, height, sigma)?;
    let max = f.iter().cloned().fold(0.0f64, f64::max);
    if max > 0.0 {
        f.par_chunks_mut(width).for_each(|row| {
            for v in row {
                *v /= max;
            }
        });
    } else {
        // Gradient-free image: skip the 0/0 normalization, f is identically 0
        // and g identically 1, which recovers the fixed search range.
        f.fill(0.0);
    }
    let f_mean = f.iter().sum::<f64>() / f.len() as f64;
    let mut g = vec![0.0; f.len()];
    g.par_chunks_mut(width)
        .zip(f.par_chunks(width))
        .for_each(|(dst, src)| {
            for (slot, &v) in dst.iter_mut().zip(src) {
                *slot = (v - f_mean).exp();
            }
        });
    Ok(StructureMap {
        width,
        height,
        f,
        g,
        f_mean,
        sigma,
        clamp,
    })
}
