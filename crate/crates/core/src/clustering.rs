//! Localized k-means over the joint spatial/color space.
//!
//! `slic` searches a fixed window of Chebyshev radius `2S` around each
//! cluster center. `dslic` rescales each cluster's radius by the structure
//! field `g` sampled at the center, so clusters in busy image regions search
//! wider and clusters in flat regions search narrower. Everything else —
//! seeding, assignment, center updates, connectivity — is shared.

use crate::error::{Error, Result};
use crate::imageio::Image;
use crate::structure::{gradient_magnitude, structure_from_gradient, StructureMap, DEFAULT_CLAMP, DEFAULT_SIGMA};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Slic,
    Dslic,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Slic => "slic",
            Algo::Dslic => "dslic",
        }
    }
}

impl std::str::FromStr for Algo {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "slic" => Ok(Algo::Slic),
            "dslic" => Ok(Algo::Dslic),
            other => Err(Error::InvalidParameter(format!(
                "unknown algorithm {other:?} (expected slic or dslic)"
            ))),
        }
    }
}

/// Which way the compactness weight is applied in the distance measure.
///
/// `PaperLiteral` scales the color term by `m / S`; `Canonical` scales the
/// spatial term instead (the weighting used by the original SLIC). The two
/// coincide when `m == S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceForm {
    PaperLiteral,
    Canonical,
}

impl std::str::FromStr for DistanceForm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" | "paper_literal" => Ok(DistanceForm::PaperLiteral),
            "canonical" => Ok(DistanceForm::Canonical),
            other => Err(Error::InvalidParameter(format!(
                "unknown distance form {other:?} (expected paper or canonical)"
            ))),
        }
    }
}

/// Segmentation parameters.
#[derive(Debug, Clone)]
pub struct Params {
    /// Requested superpixel count; the actual count can differ slightly.
    pub k: usize,
    /// Compactness weight.
    pub m: f64,
    /// Iteration cap.
    pub max_iters: usize,
    /// Stop once the residual drops to this level. The default 0 runs all
    /// iterations unless the centers stop moving entirely.
    pub threshold: f64,
    pub algo: Algo,
    pub distance_form: DistanceForm,
    /// Structure-measure smoothing, used by `dslic` only.
    pub sigma: f64,
    /// Structure-measure gradient clamp, used by `dslic` only.
    pub clamp: f64,
}

impl Params {
    pub fn new(k: usize, algo: Algo) -> Self {
        Self {
            k,
            m: 20.0,
            max_iters: 10,
            threshold: 0.0,
            algo,
            distance_form: DistanceForm::PaperLiteral,
            sigma: DEFAULT_SIGMA,
            clamp: DEFAULT_CLAMP,
        }
    }

    fn validate(&self, img: &Image) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if self.k > img.pixel_count() {
            return Err(Error::InvalidParameter(format!(
                "k = {} exceeds the pixel count {}",
                self.k,
                img.pixel_count()
            )));
        }
        if !(self.m > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "m must be positive, got {}",
                self.m
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// A cluster's feature: sub-pixel spatial centroid plus mean CIELAB color.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterFeature {
    pub cx: f64,
    pub cy: f64,
    pub color: [f64; 3],
    pub member_count: usize,
}

/// A per-pixel label map partitioning the grid, with the centers that
/// produced it. Label maps loaded from disk carry no centers.
#[derive(Debug, Clone)]
pub struct Segmentation {
    pub width: usize,
    pub height: usize,
    /// Row major, `width * height` entries.
    pub labels: Vec<u32>,
    pub centers: Vec<ClusterFeature>,
    /// Nominal seed spacing `S = sqrt(w * h / k)`.
    pub grid_interval: f64,
    pub iterations_run: usize,
    /// Total center displacement in the final iteration.
    pub residual: f64,
}

impl Segmentation {
    /// Wrap a bare label map (e.g. loaded ground truth).
    pub fn from_labels(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        if width == 0 || height == 0 || labels.is_empty() {
            return Err(Error::EmptySegmentation);
        }
        if labels.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for a {}x{} grid",
                labels.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
            centers: Vec::new(),
            grid_interval: 0.0,
            iterations_run: 0,
            residual: 0.0,
        })
    }

    pub fn distinct_label_count(&self) -> usize {
        let mut seen = self.labels.clone();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }
}

/// Nominal seed spacing for `k` superpixels on a `width x height` grid.
pub fn grid_interval(width: usize, height: usize, k: usize) -> f64 {
    ((width * height) as f64 / k as f64).sqrt()
}

/// Seed roughly `k` cluster centers on a regular grid, each nudged to the
/// lowest-gradient pixel in its 3x3 neighborhood (ties keep the grid point).
pub fn initialize(img: &Image, k: usize) -> Result<Vec<ClusterFeature>> {
    // Perturbation is skipped for degenerate strips where no gradient exists.
    let grad = if img.width >= 2 && img.height >= 2 {
        gradient_magnitude(&img.grey, img.width, img.height)?
    } else {
        vec![0.0; img.pixel_count()]
    };
    initialize_from_gradient(img, k, &grad)
}

/// [`initialize`] with the gradient plane supplied by the caller, so one
/// gradient pass can serve both seeding and the structure measure.
pub fn initialize_from_gradient(
    img: &Image,
    k: usize,
    grad: &[f64],
) -> Result<Vec<ClusterFeature>> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if k > img.pixel_count() {
        return Err(Error::InvalidParameter(format!(
            "k = {} exceeds the pixel count {}",
            k,
            img.pixel_count()
        )));
    }
    let (w, h) = (img.width, img.height);
    let s = grid_interval(w, h, k);
    let nx = ((w as f64 / s).round() as usize).max(1);
    let ny = ((h as f64 / s).round() as usize).max(1);

    let mut centers = Vec::with_capacity(nx * ny);
    for gy in 0..ny {
        for gx in 0..nx {
            let fx = (gx as f64 + 0.5) * w as f64 / nx as f64;
            let fy = (gy as f64 + 0.5) * h as f64 / ny as f64;
            let px = (fx.round() as usize).min(w - 1);
            let py = (fy.round() as usize).min(h - 1);

            let (mut bx, mut by) = (px, py);
            let mut best = grad[py * w + px];
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (nxp, nyp) = (px as i64 + dx, py as i64 + dy);
                    if nxp < 0 || nyp < 0 || nxp >= w as i64 || nyp >= h as i64 {
                        continue;
                    }
                    let (nxp, nyp) = (nxp as usize, nyp as usize);
                    if grad[nyp * w + nxp] < best {
                        best = grad[nyp * w + nxp];
                        bx = nxp;
                        by = nyp;
                    }
                }
            }
            centers.push(ClusterFeature {
                cx: bx as f64,
                cy: by as f64,
                color: img.lab[by * w + bx],
                member_count: 0,
            });
        }
    }
    Ok(centers)
}

/// Joint spatial/color distance between a pixel and a cluster feature.
pub fn distance(
    pixel: (f64, f64),
    color: [f64; 3],
    center: &ClusterFeature,
    s: f64,
    m: f64,
    form: DistanceForm,
) -> f64 {
    distance_squared(pixel, color, center, (m / s) * (m / s), form).sqrt()
}

#[inline]
fn distance_squared(
    pixel: (f64, f64),
    color: [f64; 3],
    center: &ClusterFeature,
    weight: f64,
    form: DistanceForm,
) -> f64 {
    let dx = pixel.0 - center.cx;
    let dy = pixel.1 - center.cy;
    let ds2 = dx * dx + dy * dy;
    let dl = color[0] - center.color[0];
    let da = color[1] - center.color[1];
    let db = color[2] - center.color[2];
    let dc2 = dl * dl + da * da + db * db;
    match form {
        DistanceForm::PaperLiteral => ds2 + dc2 * weight,
        DistanceForm::Canonical => dc2 + ds2 * weight,
    }
}

/// One assignment sweep. Each center only sees pixels inside its square
/// search window: side `2S` for `slic`, side `2S * g(center)` for `dslic`,
/// i.e. a Chebyshev bound of `S` and `S * g(center)` around the center.
///
/// Returns the label map and the per-pixel best distance. Pixels covered by
/// no window keep an infinite best distance and fall back to the spatially
/// nearest center.
pub fn assign(
    img: &Image,
    centers: &[ClusterFeature],
    smap: Option<&StructureMap>,
    s: f64,
    params: &Params,
) -> (Vec<u32>, Vec<f64>) {
    let radii = search_radii(centers, smap, s);
    assign_with_radii(img, centers, &radii, s, params)
}

/// Per-center Chebyshev search bound: half the window side, so `S` for the
/// fixed window and `S * g(center)` when a structure map is given.
pub fn search_radii(centers: &[ClusterFeature], smap: Option<&StructureMap>, s: f64) -> Vec<f64> {
    centers
        .iter()
        .map(|c| match smap {
            Some(map) => s * map.g_at(c.cx, c.cy),
            None => s,
        })
        .collect()
}

/// Assignment sweep with explicit per-center radii.
pub fn assign_with_radii(
    img: &Image,
    centers: &[ClusterFeature],
    radii: &[f64],
    s: f64,
    params: &Params,
) -> (Vec<u32>, Vec<f64>) {
    assert_eq!(centers.len(), radii.len());
    let (w, h) = (img.width, img.height);
    let weight = (params.m / s) * (params.m / s);
    let mut best = vec![f64::INFINITY; w * h];
    let mut labels = vec![u32::MAX; w * h];

    for (i, (center, &radius)) in centers.iter().zip(radii).enumerate() {
        let x0 = (center.cx - radius).ceil().max(0.0) as usize;
        let x1 = ((center.cx + radius).floor() as i64).min(w as i64 - 1);
        let y0 = (center.cy - radius).ceil().max(0.0) as usize;
        let y1 = ((center.cy + radius).floor() as i64).min(h as i64 - 1);
        if x1 < x0 as i64 || y1 < y0 as i64 {
            continue;
        }
        let (x1, y1) = (x1 as usize, y1 as usize);
        for y in y0..=y1 {
            let row = y * w;
            for x in x0..=x1 {
                let idx = row + x;
                let d2 = distance_squared(
                    (x as f64, y as f64),
                    img.lab[idx],
                    center,
                    weight,
                    params.distance_form,
                );
                if d2 < best[idx] {
                    best[idx] = d2;
                    labels[idx] = i as u32;
                }
            }
        }
    }

    // Pixels outside every window: fall back to the spatially nearest center.
    // Their recorded best distance stays infinite (it was never computed).
    for y in 0..h {
        for x in 0..w {
            let idx = y * w + x;
            if labels[idx] != u32::MAX {
                continue;
            }
            let mut nearest = 0u32;
            let mut nearest_d2 = f64::INFINITY;
            for (i, c) in centers.iter().enumerate() {
                let dx = x as f64 - c.cx;
                let dy = y as f64 - c.cy;
                let d2 = dx * dx + dy * dy;
                if d2 < nearest_d2 {
                    nearest_d2 = d2;
                    nearest = i as u32;
                }
            }
            labels[idx] = nearest;
        }
    }

    for v in &mut best {
        if v.is_finite() {
            *v = v.sqrt();
        }
    }
    (labels, best)
}

/// Recompute each cluster as the mean of its members. Clusters that lost all
/// members keep their previous feature. Returns the new centers and the
/// residual: the summed spatial displacement of the centroids.
pub fn update(img: &Image, labels: &[u32], old: &[ClusterFeature]) -> (Vec<ClusterFeature>, f64) {
    let w = img.width;
    let mut acc = vec![[0.0f64; 5]; old.len()];
    let mut counts = vec![0usize; old.len()];
    for (idx, &label) in labels.iter().enumerate() {
        let a = &mut acc[label as usize];
        a[0] += (idx % w) as f64;
        a[1] += (idx / w) as f64;
        let lab = img.lab[idx];
        a[2] += lab[0];
        a[3] += lab[1];
        a[4] += lab[2];
        counts[label as usize] += 1;
    }

    let mut residual = 0.0;
    let centers = old
        .iter()
        .enumerate()
        .map(|(i, prev)| {
            if counts[i] == 0 {
                return ClusterFeature {
                    member_count: 0,
                    ..*prev
                };
            }
            let n = counts[i] as f64;
            let next = ClusterFeature {
                cx: acc[i][0] / n,
                cy: acc[i][1] / n,
                color: [acc[i][2] / n, acc[i][3] / n, acc[i][4] / n],
                member_count: counts[i],
            };
            let (dx, dy) = (next.cx - prev.cx, next.cy - prev.cy);
            residual += (dx * dx + dy * dy).sqrt();
            next
        })
        .collect();
    (centers, residual)
}

/// Run the full pipeline: seed, iterate assignment and update until the
/// residual reaches the threshold or the iteration cap, then enforce
/// connectivity and drop empty clusters.
pub fn segment(img: &Image, params: &Params) -> Result<Segmentation> {
    params.validate(img)?;
    let (w, h) = (img.width, img.height);
    let s = grid_interval(w, h, params.k);

    // One gradient pass serves both seed perturbation and, for dslic, the
    // structure measure. Degenerate 1-pixel-wide strips have no gradient:
    // slic runs with unperturbed seeds, dslic propagates the error.
    let grad = match gradient_magnitude(&img.grey, w, h) {
        Ok(grad) => grad,
        Err(e) => match params.algo {
            Algo::Dslic => return Err(e),
            Algo::Slic => vec![0.0; img.pixel_count()],
        },
    };
    let smap = match params.algo {
        Algo::Dslic => Some(structure_from_gradient(
            &grad,
            w,
            h,
            params.sigma,
            params.clamp,
        )?),
        Algo::Slic => None,
    };

    let mut centers = initialize_from_gradient(img, params.k, &grad)?;
    drop(grad);
    let mut labels = Vec::new();
    let mut residual = 0.0;
    let mut iterations_run = 0;
    for t in 1..=params.max_iters {
        let (new_labels, _) = assign(img, &centers, smap.as_ref(), s, params);
        labels = new_labels;
        let (new_centers, e) = update(img, &labels, &centers);
        centers = new_centers;
        residual = e;
        iterations_run = t;
        if e <= params.threshold {
            break;
        }
    }

    enforce_connectivity(&mut labels, w, h, &centers);

    // Compact the surviving labels and rebuild center features from the
    // final membership, so every center describes exactly one superpixel.
    let mut remap = vec![u32::MAX; centers.len()];
    let mut survivors = Vec::new();
    for &label in labels.iter() {
        if remap[label as usize] == u32::MAX {
            remap[label as usize] = 0;
        }
    }
    for (old_idx, slot) in remap.iter_mut().enumerate() {
        if *slot != u32::MAX {
            *slot = survivors.len() as u32;
            survivors.push(centers[old_idx]);
        }
    }
    for label in &mut labels {
        *label = remap[*label as usize];
    }
    let (final_centers, _) = update(img, &labels, &survivors);

    Ok(Segmentation {
        width: w,
        height: h,
        labels,
        centers: final_centers,
        grid_interval: s,
        iterations_run,
        residual,
    })
}

/// Make every label's pixel set 4-connected.
///
/// The largest component of each label keeps the label; every smaller
/// component takes the final label of an adjacent, already resolved
/// component. When centers are given, the adjacent component with the most
/// similar center color is chosen, which keeps stray slivers from being
/// absorbed across a strong image boundary; ties and the center-less case
/// fall back to the lowest component index. Purely a relabeling: no pixel
/// is left unlabeled.
pub fn enforce_connectivity(
    labels: &mut [u32],
    width: usize,
    height: usize,
    centers: &[ClusterFeature],
) {
    let n = width * height;
    assert_eq!(labels.len(), n);

    // Flood-fill components in scan order.
    let mut comp_of = vec![usize::MAX; n];
    let mut comp_label = Vec::new();
    let mut comp_size = Vec::new();
    let mut queue = Vec::new();
    for start in 0..n {
        if comp_of[start] != usize::MAX {
            continue;
        }
        let comp = comp_label.len();
        let label = labels[start];
        comp_label.push(label);
        comp_of[start] = comp;
        queue.clear();
        queue.push(start);
        let mut size = 0usize;
        while let Some(idx) = queue.pop() {
            size += 1;
            let (x, y) = (idx % width, idx / width);
            let mut visit = |nidx: usize| {
                if comp_of[nidx] == usize::MAX && labels[nidx] == label {
                    comp_of[nidx] = comp;
                    queue.push(nidx);
                }
            };
            if x > 0 {
                visit(idx - 1);
            }
            if x + 1 < width {
                visit(idx + 1);
            }
            if y > 0 {
                visit(idx - width);
            }
            if y + 1 < height {
                visit(idx + width);
            }
        }
        comp_size.push(size);
    }

    let comp_count = comp_label.len();

    // Component adjacency from horizontal and vertical pixel neighbors.
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); comp_count];
    let note = |a: usize, b: usize, adjacency: &mut Vec<Vec<usize>>| {
        if a != b {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
    };
    for y in 0..height {
        for x in 0..width {
            let idx = y * width + x;
            if x + 1 < width {
                note(comp_of[idx], comp_of[idx + 1], &mut adjacency);
            }
            if y + 1 < height {
                note(comp_of[idx], comp_of[idx + width], &mut adjacency);
            }
        }
    }
    for list in &mut adjacency {
        list.sort_unstable();
        list.dedup();
    }

    // The largest component of each label is the keeper; scan order breaks
    // size ties.
    let mut keeper: std::collections::HashMap<u32, usize> = std::collections::HashMap::new();
    for comp in 0..comp_count {
        let entry = keeper.entry(comp_label[comp]).or_insert(comp);
        if comp_size[comp] > comp_size[*entry] {
            *entry = comp;
        }
    }

    let mut resolved: Vec<Option<u32>> = vec![None; comp_count];
    for comp in 0..comp_count {
        if keeper[&comp_label[comp]] == comp {
            resolved[comp] = Some(comp_label[comp]);
        }
    }

    // Everything else takes the label of a resolved neighbor, sweeping until
    // the component graph is exhausted. The grid is connected and at least
    // one keeper exists, so this terminates.
    let have_colors = !centers.is_empty()
        && comp_label.iter().all(|&l| (l as usize) < centers.len());
    let color_gap = |a: u32, b: u32| -> f64 {
        let (ca, cb) = (&centers[a as usize].color, &centers[b as usize].color);
        (0..3).map(|i| (ca[i] - cb[i]) * (ca[i] - cb[i])).sum()
    };
    loop {
        let mut changed = false;
        for comp in 0..comp_count {
            if resolved[comp].is_some() {
                continue;
            }
            let mut donor: Option<(f64, usize)> = None;
            for &a in &adjacency[comp] {
                let Some(label) = resolved[a] else { continue };
                let gap = if have_colors {
                    color_gap(comp_label[comp], label)
                } else {
                    0.0
                };
                match donor {
                    Some((best, _)) if gap >= best => {}
                    _ => donor = Some((gap, a)),
                }
            }
            if let Some((_, a)) = donor {
                resolved[comp] = resolved[a];
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    for idx in 0..n {
        labels[idx] = resolved[comp_of[idx]].expect("component graph is connected");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::compute_structure;

    fn constant_image(w: usize, h: usize, rgb: [u8; 3]) -> Image {
        Image::from_rgb(w, h, vec![rgb; w * h]).unwrap()
    }

    fn hash_image(w: usize, h: usize, seed: u64) -> Image {
        let rgb = (0..w * h)
            .map(|i| {
                let mut v = seed.wrapping_add(i as u64).wrapping_mul(0x9E3779B97F4A7C15);
                v ^= v >> 29;
                [(v & 0xFF) as u8, ((v >> 8) & 0xFF) as u8, ((v >> 16) & 0xFF) as u8]
            })
            .collect();
        Image::from_rgb(w, h, rgb).unwrap()
    }

    /// Flood-fill count of 4-connected components per distinct label.
    fn components_per_label(labels: &[u32], w: usize, h: usize) -> std::collections::HashMap<u32, usize> {
        let mut seen = vec![false; labels.len()];
        let mut counts = std::collections::HashMap::new();
        for start in 0..labels.len() {
            if seen[start] {
                continue;
            }
            *counts.entry(labels[start]).or_insert(0) += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(idx) = stack.pop() {
                let (x, y) = (idx % w, idx / w);
                for (nx, ny) in [
                    (x.wrapping_sub(1), y),
                    (x + 1, y),
                    (x, y.wrapping_sub(1)),
                    (x, y + 1),
                ] {
                    if nx >= w || ny >= h {
                        continue;
                    }
                    let nidx = ny * w + nx;
                    if !seen[nidx] && labels[nidx] == labels[start] {
                        seen[nidx] = true;
                        stack.push(nidx);
                    }
                }
            }
        }
        counts
    }

    #[test]
    fn initialize_lays_out_a_regular_grid() {
        let img = constant_image(100, 100, [128, 128, 128]);
        let centers = initialize(&img, 25).unwrap();
        assert_eq!(centers.len(), 25);
        for gy in 0..5 {
            for gx in 0..5 {
                let c = &centers[gy * 5 + gx];
                // Constant image: perturbation keeps the grid point.
                assert_eq!(c.cx, 10.0 + 20.0 * gx as f64);
                assert_eq!(c.cy, 10.0 + 20.0 * gy as f64);
            }
        }
    }

    #[test]
    fn initialize_perturbs_to_lowest_gradient_neighbor() {
        // Ramp along x plus a flat spot makes the gradient non-trivial.
        let (w, h) = (20, 20);
        let rgb: Vec<[u8; 3]> = (0..w * h)
            .map(|i| {
                let x = (i % w) as u64;
                let y = (i / w) as u64;
                let v = ((x * 13 + y * 7) % 256) as u8;
                [v, v, v]
            })
            .collect();
        let img = Image::from_rgb(w, h, rgb).unwrap();
        let grad = gradient_magnitude(&img.grey, w, h).unwrap();

        for c in initialize(&img, 4).unwrap() {
            let (cx, cy) = (c.cx as usize, c.cy as usize);
            // The chosen pixel must be no worse than any 3x3 neighbor.
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (nx, ny) = (cx as i64 + dx, cy as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    assert!(grad[cy * w + cx] <= grad[ny as usize * w + nx as usize]);
                }
            }
            assert_eq!(c.color, img.lab[cy * w + cx]);
        }
    }

    #[test]
    fn initialize_rejects_oversized_k() {
        let img = constant_image(4, 4, [0, 0, 0]);
        assert!(initialize(&img, 17).is_err());
        assert!(initialize(&img, 0).is_err());
        assert_eq!(initialize(&img, 16).unwrap().len(), 16);
    }

    #[test]
    fn distance_matches_direct_evaluation() {
        let center = ClusterFeature {
            cx: 0.0,
            cy: 0.0,
            color: [0.0, 0.0, 0.0],
            member_count: 1,
        };
        // Same pixel, same color.
        assert_eq!(
            distance((0.0, 0.0), [0.0, 0.0, 0.0], &center, 10.0, 10.0, DistanceForm::PaperLiteral),
            0.0
        );
        // d_s = 3, d_c = 4, S = m = 1: both forms give 5.
        for form in [DistanceForm::PaperLiteral, DistanceForm::Canonical] {
            let d = distance((3.0, 0.0), [4.0, 0.0, 0.0], &center, 1.0, 1.0, form);
            assert!((d - 5.0).abs() < 1e-12);
        }
        // S = m = 20 makes the forms coincide: d_s=10, d_c=20 and d_s=10, d_c=5
        // both evaluate to sqrt(d_s^2 + d_c^2).
        for (ds, dc) in [(10.0f64, 20.0f64), (10.0, 5.0)] {
            let want = (ds * ds + dc * dc).sqrt();
            for form in [DistanceForm::PaperLiteral, DistanceForm::Canonical] {
                let d = distance((ds, 0.0), [dc, 0.0, 0.0], &center, 20.0, 20.0, form);
                assert!((d - want).abs() < 1e-12);
            }
        }
        // m != S separates the forms: d_s=10, d_c=5, S=20, m=10.
        let paper = distance((10.0, 0.0), [5.0, 0.0, 0.0], &center, 20.0, 10.0, DistanceForm::PaperLiteral);
        let canon = distance((10.0, 0.0), [5.0, 0.0, 0.0], &center, 20.0, 10.0, DistanceForm::Canonical);
        assert!((paper - 106.25f64.sqrt()).abs() < 1e-12);
        assert!((canon - 50.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn assign_single_center_claims_everything() {
        let img = constant_image(9, 7, [10, 200, 30]);
        let centers = vec![ClusterFeature {
            cx: 4.0,
            cy: 3.0,
            color: img.lab[3 * 9 + 4],
            member_count: 0,
        }];
        let params = Params::new(1, Algo::Slic);
        let s = grid_interval(9, 7, 1);
        let (labels, dist) = assign(&img, &centers, None, s, &params);
        assert!(labels.iter().all(|&l| l == 0));
        assert!(dist.iter().all(|d| d.is_finite()));
    }

    #[test]
    fn assign_matches_global_nearest_when_windows_cover_grid() {
        // 12x12 two-color image, 4 centers, windows widened to cover the
        // whole grid: one sweep must equal brute-force nearest-center.
        let (w, h) = (12, 12);
        let rgb: Vec<[u8; 3]> = (0..w * h)
            .map(|i| if (i % w) < 6 { [20, 20, 20] } else { [240, 240, 240] })
            .collect();
        let img = Image::from_rgb(w, h, rgb).unwrap();
        let params = Params::new(4, Algo::Slic);
        let s = grid_interval(w, h, 4);
        let centers = initialize(&img, 4).unwrap();
        let (labels, _) = assign_with_radii(&img, &centers, &[w as f64; 4], s, &params);

        let weight = (params.m / s) * (params.m / s);
        for y in 0..h {
            for x in 0..w {
                let idx = y * w + x;
                let mut best = f64::INFINITY;
                let mut want = 0u32;
                for (i, c) in centers.iter().enumerate() {
                    let dx = x as f64 - c.cx;
                    let dy = y as f64 - c.cy;
                    let dl = img.lab[idx][0] - c.color[0];
                    let da = img.lab[idx][1] - c.color[1];
                    let db = img.lab[idx][2] - c.color[2];
                    let d2 = dx * dx + dy * dy + (dl * dl + da * da + db * db) * weight;
                    if d2 < best {
                        best = d2;
                        want = i as u32;
                    }
                }
                assert_eq!(labels[idx], want, "pixel ({x},{y})");
            }
        }
    }

    #[test]
    fn assign_dslic_equals_slic_on_uniform_image() {
        let img = constant_image(30, 20, [77, 77, 77]);
        let smap = compute_structure(&img, DEFAULT_SIGMA, DEFAULT_CLAMP).unwrap();
        let params = Params::new(6, Algo::Dslic);
        let s = grid_interval(30, 20, 6);
        let centers = initialize(&img, 6).unwrap();
        let with = assign(&img, &centers, Some(&smap), s, &params);
        let without = assign(&img, &centers, None, s, &params);
        assert_eq!(with.0, without.0);
        assert_eq!(with.1, without.1);
    }

    #[test]
    fn assign_falls_back_to_nearest_center() {
        // Zero radii leave every pixel uncovered.
        let img = constant_image(6, 4, [100, 100, 100]);
        let centers = vec![
            ClusterFeature { cx: 1.0, cy: 1.0, color: img.lab[0], member_count: 0 },
            ClusterFeature { cx: 4.0, cy: 2.0, color: img.lab[0], member_count: 0 },
        ];
        let params = Params::new(2, Algo::Slic);
        let (labels, dist) = assign_with_radii(&img, &centers, &[0.4, 0.4], 2.0, &params);
        assert!(dist.iter().filter(|d| d.is_infinite()).count() > 0);
        for y in 0..4 {
            for x in 0..6 {
                let idx = y * 6 + x;
                if dist[idx].is_infinite() {
                    let d0 = (x as f64 - 1.0).powi(2) + (y as f64 - 1.0).powi(2);
                    let d1 = (x as f64 - 4.0).powi(2) + (y as f64 - 2.0).powi(2);
                    let want = if d0 <= d1 { 0 } else { 1 };
                    assert_eq!(labels[idx], want);
                }
            }
        }
    }

    #[test]
    fn update_averages_members() {
        let img = constant_image(3, 1, [50, 50, 50]);
        let start = vec![ClusterFeature {
            cx: 0.0,
            cy: 0.0,
            color: img.lab[0],
            member_count: 0,
        }];
        // Members (0,0) and (2,0) with equal colors.
        let (next, e) = update(&img, &[0, 0, 0], &start);
        assert_eq!(next[0].cx, 1.0);
        assert_eq!(next[0].cy, 0.0);
        assert_eq!(next[0].member_count, 3);
        assert!((e - 1.0).abs() < 1e-12);

        // A second update from the same assignment is a fixed point.
        let (again, e2) = update(&img, &[0, 0, 0], &next);
        assert_eq!(again[0].cx, next[0].cx);
        assert_eq!(e2, 0.0);
    }

    #[test]
    fn update_matches_brute_force_means() {
        let img = hash_image(6, 6, 42);
        let labels: Vec<u32> = (0..36).map(|i| (i % 2) as u32).collect();
        let old = vec![
            ClusterFeature { cx: 0.0, cy: 0.0, color: [0.0; 3], member_count: 0 },
            ClusterFeature { cx: 5.0, cy: 5.0, color: [0.0; 3], member_count: 0 },
        ];
        let (new, _) = update(&img, &labels, &old);
        for cluster in 0..2u32 {
            let mut n = 0.0;
            let mut sx = 0.0;
            let mut sy = 0.0;
            let mut sc = [0.0f64; 3];
            for (idx, &l) in labels.iter().enumerate() {
                if l == cluster {
                    n += 1.0;
                    sx += (idx % 6) as f64;
                    sy += (idx / 6) as f64;
                    for ch in 0..3 {
                        sc[ch] += img.lab[idx][ch];
                    }
                }
            }
            let c = &new[cluster as usize];
            assert!((c.cx - sx / n).abs() < 1e-9);
            assert!((c.cy - sy / n).abs() < 1e-9);
            for ch in 0..3 {
                assert!((c.color[ch] - sc[ch] / n).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn update_keeps_empty_clusters() {
        let img = constant_image(4, 1, [10, 10, 10]);
        let old = vec![
            ClusterFeature { cx: 1.0, cy: 0.0, color: img.lab[0], member_count: 4 },
            ClusterFeature { cx: 99.0, cy: 0.0, color: [1.0, 2.0, 3.0], member_count: 0 },
        ];
        let (new, _) = update(&img, &[0, 0, 0, 0], &old);
        assert_eq!(new[1].cx, 99.0);
        assert_eq!(new[1].color, [1.0, 2.0, 3.0]);
        assert_eq!(new[1].member_count, 0);
    }

    #[test]
    fn segment_constant_image_gives_equal_tiles() {
        let img = constant_image(40, 40, [90, 90, 90]);
        let slic = segment(&img, &Params::new(16, Algo::Slic)).unwrap();
        let dslic = segment(&img, &Params::new(16, Algo::Dslic)).unwrap();
        assert_eq!(slic.labels, dslic.labels);
        assert_eq!(slic.centers.len(), 16);
        // Roughly equal 4-connected tiles.
        let comps = components_per_label(&slic.labels, 40, 40);
        assert_eq!(comps.len(), 16);
        assert!(comps.values().all(|&c| c == 1));
        for c in &slic.centers {
            assert!(c.member_count >= 50 && c.member_count <= 200);
        }
    }

    #[test]
    fn segment_respects_a_sharp_color_boundary() {
        // Left half black, right half white; the boundary sits on a grid
        // cell edge. No superpixel may straddle it.
        let (w, h) = (40, 40);
        let rgb: Vec<[u8; 3]> = (0..w * h)
            .map(|i| if (i % w) < 20 { [0, 0, 0] } else { [255, 255, 255] })
            .collect();
        let img = Image::from_rgb(w, h, rgb).unwrap();
        let seg = segment(&img, &Params::new(4, Algo::Slic)).unwrap();
        for y in 0..h {
            for x in 0..w {
                let straddles = (0..w).any(|x2| {
                    (x < 20) != (x2 < 20) && seg.labels[y * w + x] == seg.labels[y * w + x2]
                });
                assert!(!straddles, "label {} straddles at ({x},{y})", seg.labels[y * w + x]);
            }
        }
    }

    #[test]
    fn segment_is_deterministic() {
        let img = hash_image(32, 24, 5);
        let a = segment(&img, &Params::new(12, Algo::Dslic)).unwrap();
        let b = segment(&img, &Params::new(12, Algo::Dslic)).unwrap();
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.residual, b.residual);
        assert_eq!(a.iterations_run, b.iterations_run);
    }

    #[test]
    fn segment_output_is_connected_and_compact() {
        let img = hash_image(48, 32, 9);
        let seg = segment(&img, &Params::new(20, Algo::Slic)).unwrap();
        let comps = components_per_label(&seg.labels, 48, 32);
        assert_eq!(comps.len(), seg.centers.len());
        assert!(comps.values().all(|&c| c == 1));
        // Labels are compact 0..L-1 and every center has members.
        let max = *seg.labels.iter().max().unwrap() as usize;
        assert_eq!(max + 1, seg.centers.len());
        assert!(seg.centers.iter().all(|c| c.member_count > 0));
        assert!(seg.iterations_run >= 1 && seg.iterations_run <= 10);
    }

    #[test]
    fn enforce_connectivity_keeps_connected_maps() {
        let (w, h) = (8, 6);
        let mut labels: Vec<u32> = (0..w * h)
            .map(|i| if (i % w) < 4 { 0 } else { 1 })
            .collect();
        let before = labels.clone();
        enforce_connectivity(&mut labels, w, h, &[]);
        assert_eq!(labels, before);
    }

    #[test]
    fn enforce_connectivity_merges_small_split_component() {
        // Label 0 appears as a 10-pixel block and a separated 2-pixel block
        // surrounded by label 1: the small block must become label 1.
        let w = 7;
        let h = 4;
        #[rustfmt::skip]
        let mut labels: Vec<u32> = vec![
            0, 0, 0, 0, 0, 1, 1,
            0, 0, 0, 0, 0, 1, 1,
            1, 1, 1, 1, 1, 1, 1,
            1, 1, 1, 0, 0, 1, 1,
        ];
        enforce_connectivity(&mut labels, w, h, &[]);
        assert_eq!(labels[3 * w + 3], 1);
        assert_eq!(labels[3 * w + 4], 1);
        // The big block survives.
        assert_eq!(labels[0], 0);
        let comps = components_per_label(&labels, w, h);
        assert!(comps.values().all(|&c| c == 1));
    }

    #[test]
    fn enforce_connectivity_yields_one_component_per_label() {
        // Random-ish label soup.
        let (w, h) = (16, 16);
        let mut labels: Vec<u32> = (0..w * h)
            .map(|i| {
                let mut v = (i as u64).wrapping_mul(0x9E3779B97F4A7C15);
                v ^= v >> 33;
                (v % 5) as u32
            })
            .collect();
        enforce_connectivity(&mut labels, w, h, &[]);
        let comps = components_per_label(&labels, w, h);
        assert!(comps.values().all(|&c| c == 1));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            /// Enlarging every search radius can only improve (or keep) each
            /// pixel's best distance.
            #[test]
            fn windows_are_monotone(seed in any::<u64>(), grow in 1.1f64..3.0) {
                let img = hash_image(18, 14, seed);
                let params = Params::new(6, Algo::Slic);
                let s = grid_interval(18, 14, 6);
                let centers = initialize(&img, 6).unwrap();
                let base: Vec<f64> = centers.iter().map(|_| 0.9 * s).collect();
                let grown: Vec<f64> = base.iter().map(|r| r * grow).collect();
                let (_, d_small) = assign_with_radii(&img, &centers, &base, s, &params);
                let (_, d_big) = assign_with_radii(&img, &centers, &grown, s, &params);
                for (small, big) in d_small.iter().zip(&d_big) {
                    prop_assert!(big <= small);
                }
            }

            /// Every pixel ends up with a label that references a center.
            #[test]
            fn segment_partitions_the_grid(seed in any::<u64>(), k in 2usize..30) {
                let img = hash_image(24, 18, seed);
                let seg = segment(&img, &Params::new(k, Algo::Slic)).unwrap();
                prop_assert_eq!(seg.labels.len(), 24 * 18);
                for &l in &seg.labels {
                    prop_assert!((l as usize) < seg.centers.len());
                }
            }
        }
    }
}
