//! Boundary overlay rendering for visual inspection of label maps.

use dslic::Image;

pub struct OverlaySpec {
    pub boundary_color: [u8; 3],
    pub line_width: usize,
}

impl Default for OverlaySpec {
    fn default() -> Self {
        Self {
            boundary_color: [255, 255, 0],
            line_width: 1,
        }
    }
}

/// A pixel is boundary when any 4-neighbor carries a different label.
pub fn boundary_mask(labels: &[u32], width: usize, height: usize) -> Vec<bool> {
    let mut mask = vec![false; labels.len()];
    for y in 0..height {
        for x in 0..width {
            let idx = y * width + x;
            let differs = (x > 0 && labels[idx - 1] != labels[idx])
                || (x + 1 < width && labels[idx + 1] != labels[idx])
                || (y > 0 && labels[idx - width] != labels[idx])
                || (y + 1 < height && labels[idx + width] != labels[idx]);
            mask[idx] = differs;
        }
    }
    mask
}

/// Recolor boundary pixels of the input image. Line widths above one dilate
/// the mask with the 4-neighborhood.
pub fn render_overlay(img: &Image, labels: &[u32], spec: &OverlaySpec) -> Vec<[u8; 3]> {
    let (w, h) = (img.width, img.height);
    let mut mask = boundary_mask(labels, w, h);
    for _ in 1..spec.line_width.max(1) {
        let snapshot = mask.clone();
        for y in 0..h {
            for x in 0..w {
                if snapshot[y * w + x] {
                    continue;
                }
                let grown = (x > 0 && snapshot[y * w + x - 1])
                    || (x + 1 < w && snapshot[y * w + x + 1])
                    || (y > 0 && snapshot[(y - 1) * w + x])
                    || (y + 1 < h && snapshot[(y + 1) * w + x]);
                mask[y * w + x] = grown;
            }
        }
    }
    img.rgb
        .iter()
        .zip(&mask)
        .map(|(&px, &on)| if on { spec.boundary_color } else { px })
        .collect()
}
