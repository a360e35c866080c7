//! Command line front end: segmentation, structure-map inspection, metric
//! evaluation and dataset benchmarking.

mod overlay;

use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use dslic::bench::{run_benchmark, write_csv, BenchConfig};
use dslic::clustering::{segment, Algo, DistanceForm, Params};
use dslic::imageio::{load_image, load_label_map, save_grey_png, save_label_map, save_rgb_png};
use dslic::metrics::{achievable_segmentation_accuracy, undersegmentation_error};
use dslic::structure::compute_structure;

use overlay::{render_overlay, OverlaySpec};

#[derive(Parser)]
#[command(
    name = "dslic",
    version,
    about = "Superpixel segmentation with a fixed or structure-adaptive search range"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment an image and write the superpixel label map.
    Segment {
        /// Input image (PNG or binary PPM/PGM).
        #[arg(long)]
        input: PathBuf,
        /// Algorithm: slic or dslic.
        #[arg(long, value_parser = Algo::from_str)]
        algo: Algo,
        /// Requested superpixel count.
        #[arg(long)]
        k: usize,
        /// Compactness weight.
        #[arg(long, default_value_t = 20.0)]
        m: f64,
        /// Structure smoothing in pixels (dslic).
        #[arg(long, default_value_t = 20.0)]
        sigma: f64,
        /// Gradient clamp level (dslic).
        #[arg(long, default_value_t = 0.00784)]
        clamp: f64,
        /// Iteration cap.
        #[arg(long, default_value_t = 10)]
        iters: usize,
        /// Distance form: paper or canonical.
        #[arg(long, default_value = "paper", value_parser = DistanceForm::from_str)]
        distance: DistanceForm,
        /// Output label map (16-bit greyscale PNG).
        #[arg(long)]
        labels: PathBuf,
        /// Optional boundary overlay image.
        #[arg(long)]
        overlay: Option<PathBuf>,
    },
    /// Write the structure measure f as an 8-bit greyscale image.
    Structure {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 20.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0.00784)]
        clamp: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a label map against a ground-truth label map.
    Metrics {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        gt: PathBuf,
    },
    /// Sweep superpixel counts over a dataset directory and write CSV.
    Bench {
        /// Directory of <id>.png images with <id>.gt.png label maps.
        #[arg(long)]
        dataset: PathBuf,
        /// Superpixel counts, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<usize>,
        /// Algorithms, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "slic,dslic", value_parser = Algo::from_str)]
        algos: Vec<Algo>,
        /// Fraction of images to benchmark.
        #[arg(long, default_value_t = 0.15)]
        sample: f64,
        /// Seed for the image sample.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Segment {
            input,
            algo,
            k,
            m,
            sigma,
            clamp,
            iters,
            distance,
            labels,
            overlay,
        } => {
            let img = load_image(&input)?;
            let params = Params {
                k,
                m,
                max_iters: iters,
                threshold: 0.0,
                algo,
                distance_form: distance,
                sigma,
                clamp,
            };
            let start = Instant::now();
            let seg = segment(&img, &params).context("segmentation failed")?;
            let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
            save_label_map(&seg, &labels)?;
            if let Some(path) = overlay {
                let rgb = render_overlay(&img, &seg.labels, &OverlaySpec::default());
                save_rgb_png(&rgb, img.width, img.height, path)?;
            }
            println!(
                "superpixels={} iterations={} residual={:.6} runtime_ms={:.3}",
                seg.centers.len(),
                seg.iterations_run,
                seg.residual,
                runtime_ms
            );
        }
        Command::Structure {
            input,
            sigma,
            clamp,
            out,
        } => {
            let img = load_image(&input)?;
            let smap = compute_structure(&img, sigma, clamp)?;
            save_grey_png(&smap.f, smap.width, smap.height, out)?;
            let g_min = smap.g.iter().cloned().fold(f64::INFINITY, f64::min);
            let g_max = smap.g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            println!(
                "f_mean={:.6} g_min={:.6} g_max={:.6}",
                smap.f_mean, g_min, g_max
            );
        }
        Command::Metrics { labels, gt } => {
            let seg = load_label_map(&labels)?;
            let truth = load_label_map(&gt)?;
            let ue = undersegmentation_error(&seg, &truth)?;
            let asa = achievable_segmentation_accuracy(&seg, &truth)?;
            println!("ue={ue:.6} asa={asa:.6}");
        }
        Command::Bench {
            dataset,
            k,
            algos,
            sample,
            seed,
            out,
        } => {
            let mut cfg = BenchConfig::new(dataset);
            cfg.k_values = k;
            cfg.algos = algos;
            cfg.sample_fraction = sample;
            cfg.rng_seed = seed;
            let reports = run_benchmark(&cfg)?;
            write_csv(&reports, &out)?;
            eprintln!("wrote {} rows to {}", reports.len(), out.display());
        }
    }
    Ok(())
}
