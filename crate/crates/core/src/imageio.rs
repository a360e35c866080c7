//! Image decoding and the derived planes used by the rest of the crate.
//!
//! An [`Image`] carries three views of the same raster: the original 8-bit
//! RGB samples, a greyscale plane in `[0, 1]` (Rec.601 luma), and a CIELAB
//! plane (sRGB gamma, D65 white point). Label maps are stored as 16-bit
//! single-channel PNG so they round-trip losslessly and can be inspected
//! with ordinary image tools.

use std::path::Path;
use std::sync::OnceLock;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};

use crate::clustering::Segmentation;
use crate::error::{Error, Result};

/// sRGB -> XYZ (D65) matrix, row major.
const SRGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

// CIE constants for the Lab transfer function, as exact rationals.
const LAB_EPS: f64 = 216.0 / 24389.0;
const LAB_KAPPA: f64 = 24389.0 / 27.0;

/// A decoded raster with its derived greyscale and CIELAB planes.
///
/// All planes are row major with index `y * width + x` and hold exactly
/// `width * height` entries. The struct is immutable after construction and
/// safe to share across threads.
#[derive(Debug, Clone)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// 8-bit sRGB samples.
    pub rgb: Vec<[u8; 3]>,
    /// Luma in `[0, 1]`.
    pub grey: Vec<f64>,
    /// CIELAB triples; `L` in `[0, 100]`.
    pub lab: Vec<[f64; 3]>,
}

impl Image {
    /// Build an image from raw RGB samples, deriving the grey and Lab planes.
    pub fn from_rgb(width: usize, height: usize, rgb: Vec<[u8; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "zero dimension: {width}x{height}"
            )));
        }
        if rgb.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "{}x{} image needs {} pixels, got {}",
                width,
                height,
                width * height,
                rgb.len()
            )));
        }
        let grey = rgb.iter().map(|&p| to_greyscale(p)).collect();
        let lab = rgb.iter().map(|&p| rgb_to_lab(p)).collect();
        Ok(Self {
            width,
            height,
            rgb,
            grey,
            lab,
        })
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

/// Rec.601 luma of an 8-bit RGB pixel, scaled to `[0, 1]`.
pub fn to_greyscale(p: [u8; 3]) -> f64 {
    (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64) / 255.0
}

fn srgb_linear_lut() -> &'static [f64; 256] {
    static LUT: OnceLock<[f64; 256]> = OnceLock::new();
    LUT.get_or_init(|| {
        let mut lut = [0.0; 256];
        for (v, slot) in lut.iter_mut().enumerate() {
            let c = v as f64 / 255.0;
            *slot = if c <= 0.04045 {
                c / 12.92
            } else {
                ((c + 0.055) / 1.055).powf(2.4)
            };
        }
        lut
    })
}

/// Convert an 8-bit sRGB pixel to CIELAB (D65).
///
/// The white point is taken as the row sums of the sRGB matrix so that
/// (255,255,255) maps to exactly (100, 0, 0).
pub fn rgb_to_lab(p: [u8; 3]) -> [f64; 3] {
    let lut = srgb_linear_lut();
    let (r, g, b) = (lut[p[0] as usize], lut[p[1] as usize], lut[p[2] as usize]);
    let mut f = [0.0f64; 3];
    for (i, row) in SRGB_TO_XYZ.iter().enumerate() {
        let v = row[0] * r + row[1] * g + row[2] * b;
        let white = row[0] + row[1] + row[2];
        let t = v / white;
        f[i] = if t > LAB_EPS {
            t.cbrt()
        } else {
            (LAB_KAPPA * t + 16.0) / 116.0
        };
    }
    [
        116.0 * f[1] - 16.0,
        500.0 * (f[0] - f[1]),
        200.0 * (f[1] - f[2]),
    ]
}

/// Decode a PNG or binary PPM/PGM file into an [`Image`].
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let dynimg = open_dynamic(path)?;
    let (width, height) = (dynimg.width() as usize, dynimg.height() as usize);
    if width == 0 || height == 0 {
        return Err(Error::InvalidImage(format!(
            "{}: zero dimension",
            path.display()
        )));
    }
    let rgb8 = dynimg.into_rgb8();
    let rgb = rgb8.pixels().map(|p| [p[0], p[1], p[2]]).collect();
    Image::from_rgb(width, height, rgb)
}

fn open_dynamic(path: &Path) -> Result<DynamicImage> {
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    image::load_from_memory(&bytes).map_err(|source| match source {
        image::ImageError::Unsupported(e) => Error::UnsupportedFormat(format!(
            "{}: {e} (PNG and binary PPM/PGM are supported)",
            path.display()
        )),
        other => Error::Decode {
            path: path.to_path_buf(),
            source: other,
        },
    })
}

/// Write a label map as a 16-bit single-channel PNG, one label per pixel.
pub fn save_label_map(seg: &Segmentation, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(&max) = seg.labels.iter().max() {
        if max > u16::MAX as u32 {
            return Err(Error::TooManyLabels(max as usize + 1));
        }
    }
    let mut buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::new(seg.width as u32, seg.height as u32);
    for (px, &label) in buf.pixels_mut().zip(seg.labels.iter()) {
        *px = Luma([label as u16]);
    }
    buf.save(path).map_err(|source| Error::Encode {
        path: path.to_path_buf(),
        source,
    })
}

/// Read a label map written by [`save_label_map`].
///
/// 8-bit greyscale PNGs are accepted as well, with raw pixel values taken
/// as labels (no rescaling). The returned segmentation carries no centers.
pub fn load_label_map(path: impl AsRef<Path>) -> Result<Segmentation> {
    let path = path.as_ref();
    let dynimg = open_dynamic(path)?;
    let (width, height) = (dynimg.width() as usize, dynimg.height() as usize);
    let labels: Vec<u32> = match dynimg {
        DynamicImage::ImageLuma16(buf) => buf.pixels().map(|p| p[0] as u32).collect(),
        DynamicImage::ImageLuma8(buf) => buf.pixels().map(|p| p[0] as u32).collect(),
        _ => {
            return Err(Error::UnsupportedFormat(format!(
                "{}: label maps must be single-channel greyscale PNG",
                path.display()
            )))
        }
    };
    Segmentation::from_labels(width, height, labels)
}

/// Write one scalar plane in `[0, 1]` as an 8-bit greyscale PNG (`v * 255`
/// rounded). Used for structure-map inspection.
pub fn save_grey_png(plane: &[f64], width: usize, height: usize, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if plane.len() != width * height {
        return Err(Error::DimensionMismatch(format!(
            "plane has {} entries, expected {}x{}",
            plane.len(),
            width,
            height
        )));
    }
    let mut buf: ImageBuffer<Luma<u8>, Vec<u8>> = ImageBuffer::new(width as u32, height as u32);
    for (px, &v) in buf.pixels_mut().zip(plane.iter()) {
        *px = Luma([(v.clamp(0.0, 1.0) * 255.0).round() as u8]);
    }
    buf.save(path).map_err(|source| Error::Encode {
        path: path.to_path_buf(),
        source,
    })
}

/// Write an RGB raster as an 8-bit PNG. Used for boundary overlays.
pub fn save_rgb_png(rgb: &[[u8; 3]], width: usize, height: usize, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if rgb.len() != width * height {
        return Err(Error::DimensionMismatch(format!(
            "raster has {} entries, expected {}x{}",
            rgb.len(),
            width,
            height
        )));
    }
    let mut buf: ImageBuffer<Rgb<u8>, Vec<u8>> = ImageBuffer::new(width as u32, height as u32);
    for (px, &p) in buf.pixels_mut().zip(rgb.iter()) {
        *px = Rgb(p);
    }
    buf.save(path).map_err(|source| Error::Encode {
        path: path.to_path_buf(),
        source,
    })
}
