//! Dataset-level benchmark harness.
//!
//! A dataset is a flat directory of `<id>.png` images paired with
//! `<id>.gt.png` ground-truth label maps (16-bit greyscale PNG, one label
//! per pixel). The runner sweeps superpixel counts and algorithms over a
//! seeded sample of the images, times each `segment` call, and evaluates
//! both metrics, emitting one CSV row per run plus per-(algo, k) means.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::clustering::{segment, Algo, Params};
use crate::error::{Error, Result};
use crate::imageio::{load_image, load_label_map};
use crate::metrics::{achievable_segmentation_accuracy, undersegmentation_error, MetricsReport};

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub dataset_dir: PathBuf,
    pub k_values: Vec<usize>,
    pub algos: Vec<Algo>,
    /// Base parameters; `k` and `algo` are overridden per run.
    pub params: Params,
    /// Fraction of the discovered images to benchmark, in `(0, 1]`.
    pub sample_fraction: f64,
    pub rng_seed: u64,
}

impl BenchConfig {
    pub fn new(dataset_dir: impl Into<PathBuf>) -> Self {
        Self {
            dataset_dir: dataset_dir.into(),
            k_values: (1..=10).map(|i| i * 100).collect(),
            algos: vec![Algo::Slic, Algo::Dslic],
            params: Params::new(1, Algo::Slic),
            sample_fraction: 1.0,
            rng_seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k_values.is_empty() || self.k_values.iter().any(|&k| k == 0) {
            return Err(Error::InvalidParameter(
                "k_values must be non-empty and positive".into(),
            ));
        }
        if self.algos.is_empty() {
            return Err(Error::InvalidParameter("no algorithms selected".into()));
        }
        if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "sample_fraction must be in (0, 1], got {}",
                self.sample_fraction
            )));
        }
        Ok(())
    }
}

/// One image / ground-truth pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetEntry {
    pub image_path: PathBuf,
    pub gt_path: PathBuf,
    pub image_id: String,
}

/// Find `<id>.png` + `<id>.gt.png` pairs in a directory, in lexicographic
/// id order. Images without ground truth are skipped with a warning.
pub fn discover_dataset(dir: impl AsRef<Path>) -> Result<Vec<DatasetEntry>> {
    let dir = dir.as_ref();
    let read = std::fs::read_dir(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut entries = Vec::new();
    for item in read {
        let item = item.map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let path = item.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if !name.ends_with(".png") || name.ends_with(".gt.png") {
            continue;
        }
        let id = name.trim_end_matches(".png").to_string();
        let gt_path = dir.join(format!("{id}.gt.png"));
        if gt_path.is_file() {
            entries.push(DatasetEntry {
                image_path: path,
                gt_path,
                image_id: id,
            });
        } else {
            eprintln!("warning: {} has no ground truth, skipping", path.display());
        }
    }
    entries.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    if entries.is_empty() {
        return Err(Error::EmptyDataset(dir.display().to_string()));
    }
    Ok(entries)
}

/// Seeded sample of `round(fraction * n)` entries (at least one), returned
/// in lexicographic id order.
pub fn sample_entries(entries: &[DatasetEntry], fraction: f64, seed: u64) -> Vec<DatasetEntry> {
    let n = entries.len();
    let count = ((n as f64 * fraction).round() as usize).clamp(1, n);
    if count == n {
        return entries.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, n, count).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| entries[i].clone()).collect()
}

/// Run the sweep. Per-image failures are reported on stderr and skipped;
/// the run only fails if nothing could be benchmarked at all.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<Vec<MetricsReport>> {
    cfg.validate()?;
    let entries = discover_dataset(&cfg.dataset_dir)?;
    let sampled = sample_entries(&entries, cfg.sample_fraction, cfg.rng_seed);

    let mut reports = Vec::new();
    for entry in &sampled {
        let loaded = load_image(&entry.image_path)
            .and_then(|img| load_label_map(&entry.gt_path).map(|gt| (img, gt)));
        let (img, gt) = match loaded {
            Ok(pair) => pair,
            Err(e) => {
                eprintln!("warning: skipping {}: {e}", entry.image_id);
                continue;
            }
        };
        for &algo in &cfg.algos {
            for &k in &cfg.k_values {
                let mut params = cfg.params.clone();
                params.k = k;
                params.algo = algo;
                let start = Instant::now();
                let seg = match segment(&img, &params) {
                    Ok(seg) => seg,
                    Err(e) => {
                        eprintln!(
                            "warning: {} failed ({}, k={k}): {e}",
                            entry.image_id,
                            algo.name()
                        );
                        continue;
                    }
                };
                let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
                let (ue, asa) = match undersegmentation_error(&seg, &gt)
                    .and_then(|ue| achievable_segmentation_accuracy(&seg, &gt).map(|asa| (ue, asa)))
                {
                    Ok(pair) => pair,
                    Err(e) => {
                        eprintln!("warning: metrics failed for {}: {e}", entry.image_id);
                        continue;
                    }
                };
                reports.push(MetricsReport {
                    image_id: entry.image_id.clone(),
                    algo,
                    k,
                    superpixel_count: seg.centers.len(),
                    undersegmentation_error: ue,
                    asa,
                    runtime_ms,
                });
            }
        }
    }
    if reports.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no image in {} could be benchmarked",
            cfg.dataset_dir.display()
        )));
    }

    reports.sort_by(|a, b| {
        (a.image_id.as_str(), a.algo.name(), a.k).cmp(&(b.image_id.as_str(), b.algo.name(), b.k))
    });
    let aggregates = aggregate_means(&reports);
    reports.extend(aggregates);
    Ok(reports)
}

/// Arithmetic means per (algo, k), with `image_id = "MEAN"`.
fn aggregate_means(rows: &[MetricsReport]) -> Vec<MetricsReport> {
    let mut groups: Vec<(Algo, usize)> = rows.iter().map(|r| (r.algo, r.k)).collect();
    groups.sort_by_key(|&(algo, k)| (algo.name(), k));
    groups.dedup();
    groups
        .into_iter()
        .map(|(algo, k)| {
            let matching: Vec<&MetricsReport> =
                rows.iter().filter(|r| r.algo == algo && r.k == k).collect();
            let n = matching.len() as f64;
            MetricsReport {
                image_id: "MEAN".into(),
                algo,
                k,
                superpixel_count: (matching.iter().map(|r| r.superpixel_count).sum::<usize>()
                    as f64
                    / n)
                    .round() as usize,
                undersegmentation_error: matching
                    .iter()
                    .map(|r| r.undersegmentation_error)
                    .sum::<f64>()
                    / n,
                asa: matching.iter().map(|r| r.asa).sum::<f64>() / n,
                runtime_ms: matching.iter().map(|r| r.runtime_ms).sum::<f64>() / n,
            }
        })
        .collect()
}

/// Write reports as CSV with the fixed header
/// `image_id,algo,k,superpixel_count,ue,asa,runtime_ms`.
pub fn write_csv(reports: &[MetricsReport], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if reports.is_empty() {
        return Err(Error::InvalidParameter("no reports to write".into()));
    }
    let mut out = String::from("image_id,algo,k,superpixel_count,ue,asa,runtime_ms\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{:.6},{:.6},{:.6}\n",
            r.image_id,
            r.algo.name(),
            r.k,
            r.superpixel_count,
            r.undersegmentation_error,
            r.asa,
            r.runtime_ms
        ));
    }
    let mut file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    file.write_all(out.as_bytes()).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
