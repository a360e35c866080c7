//! Quantitative evaluation of a segmentation against ground truth.
//!
//! Two measures are implemented, both parameter-free:
//!
//! * **Undersegmentation error (UE)** — the min-based formulation:
//!   `UE = (1/N) * sum over superpixels P, over ground-truth regions G with
//!   P∩G nonempty, of min(|P∩G|, |P \ G|)`. It is 0 exactly when every
//!   superpixel lies inside a single ground-truth region.
//! * **Achievable segmentation accuracy (ASA)** —
//!   `ASA = (1/N) * sum over superpixels P of max over G of |P∩G|`, the
//!   accuracy of labeling each superpixel with its majority region. It is 1
//!   exactly under the same refinement condition.
//!
//! Both depend only on the partition structure, never on label values.

use crate::clustering::{Algo, Segmentation};
use crate::error::{Error, Result};

/// Evaluation results for one segmentation run.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub image_id: String,
    pub algo: Algo,
    pub k: usize,
    pub superpixel_count: usize,
    pub undersegmentation_error: f64,
    pub asa: f64,
    pub runtime_ms: f64,
}

fn paired_pixel_count(seg: &Segmentation, gt: &Segmentation) -> Result<usize> {
    if seg.labels.is_empty() || gt.labels.is_empty() {
        return Err(Error::EmptySegmentation);
    }
    if seg.width != gt.width || seg.height != gt.height {
        return Err(Error::DimensionMismatch(format!(
            "segmentation is {}x{}, ground truth is {}x{}",
            seg.width, seg.height, gt.width, gt.height
        )));
    }
    Ok(seg.labels.len())
}

/// Renumber labels to `0..L-1` in order of first appearance.
///
/// The partition is untouched, so metric values are invariant under this.
/// Centers are permuted along when the label space references them.
pub fn relabel_compact(seg: &Segmentation) -> Segmentation {
    let (labels, count) = compact_labels(&seg.labels);
    let centers = if !seg.centers.is_empty()
        && seg.labels.iter().all(|&l| (l as usize) < seg.centers.len())
    {
        // first_seen[new] = old
        let mut first_seen = vec![u32::MAX; count];
        for (&old, &new) in seg.labels.iter().zip(&labels) {
            if first_seen[new as usize] == u32::MAX {
                first_seen[new as usize] = old;
            }
        }
        first_seen
            .iter()
            .map(|&old| seg.centers[old as usize])
            .collect()
    } else {
        Vec::new()
    };
    Segmentation {
        width: seg.width,
        height: seg.height,
        labels,
        centers,
        grid_interval: seg.grid_interval,
        iterations_run: seg.iterations_run,
        residual: seg.residual,
    }
}

fn compact_labels(labels: &[u32]) -> (Vec<u32>, usize) {
    let mut map = std::collections::HashMap::new();
    let mut out = Vec::with_capacity(labels.len());
    for &l in labels {
        let next = map.len() as u32;
        out.push(*map.entry(l).or_insert(next));
    }
    (out, map.len())
}

/// Sorted (superpixel, region, overlap) triples plus per-superpixel sizes.
fn overlap_runs(seg: &[u32], gt: &[u32]) -> (Vec<(u32, u32, u64)>, Vec<u64>) {
    let (p, np) = compact_labels(seg);
    let (g, _) = compact_labels(gt);
    let mut sizes = vec![0u64; np];
    let mut keys: Vec<u64> = p
        .iter()
        .zip(&g)
        .map(|(&a, &b)| {
            sizes[a as usize] += 1;
            ((a as u64) << 32) | b as u64
        })
        .collect();
    keys.sort_unstable();
    let mut runs = Vec::new();
    let mut i = 0;
    while i < keys.len() {
        let key = keys[i];
        let mut j = i + 1;
        while j < keys.len() && keys[j] == key {
            j += 1;
        }
        runs.push(((key >> 32) as u32, (key & 0xFFFF_FFFF) as u32, (j - i) as u64));
        i = j;
    }
    (runs, sizes)
}

/// Min-based undersegmentation error; 0 means perfect refinement.
pub fn undersegmentation_error(seg: &Segmentation, gt: &Segmentation) -> Result<f64> {
    let n = paired_pixel_count(seg, gt)?;
    let (runs, sizes) = overlap_runs(&seg.labels, &gt.labels);
    let mut total = 0u64;
    for (p, _, inside) in runs {
        let outside = sizes[p as usize] - inside;
        total += inside.min(outside);
    }
    Ok(total as f64 / n as f64)
}

/// Majority-overlap accuracy upper bound, in `[0, 1]`.
pub fn achievable_segmentation_accuracy(seg: &Segmentation, gt: &Segmentation) -> Result<f64> {
    let n = paired_pixel_count(seg, gt)?;
    let (runs, sizes) = overlap_runs(&seg.labels, &gt.labels);
    let mut total = 0u64;
    let mut current = u32::MAX;
    let mut best = 0u64;
    for (p, _, inside) in runs {
        if p != current {
            total += best;
            current = p;
            best = 0;
        }
        best = best.max(inside);
    }
    total += best;
    debug_assert_eq!(sizes.iter().sum::<u64>(), n as u64);
    Ok(total as f64 / n as f64)
}
