//! Superpixel segmentation with a fixed or structure-adaptive search range.
//!
//! The crate implements two variants of localized k-means over the joint
//! spatial/CIELAB space:
//!
//! * `slic` — every cluster searches a fixed window around its center;
//! * `dslic` — each cluster's window is rescaled by a per-pixel structure
//!   measure, so flat image regions are searched less and busy regions more.
//!
//! On top of the segmenter there is an evaluation layer (undersegmentation
//! error and achievable segmentation accuracy against ground-truth label
//! maps) and a benchmark harness that sweeps superpixel counts over a
//! dataset directory and writes CSV.
//!
//! ```no_run
//! use dslic::{load_image, segment, Algo, Params};
//!
//! let img = load_image("photo.png")?;
//! let seg = segment(&img, &Params::new(400, Algo::Dslic))?;
//! println!("{} superpixels in {} iterations", seg.centers.len(), seg.iterations_run);
//! # Ok::<(), dslic::Error>(())
//! ```

pub mod bench;
pub mod clustering;
pub mod error;
pub mod imageio;
pub mod metrics;
pub mod structure;

pub use bench::{discover_dataset, run_benchmark, write_csv, BenchConfig};
pub use clustering::{
    enforce_connectivity, grid_interval, segment, Algo, ClusterFeature, DistanceForm, Params,
    Segmentation,
};
pub use error::{Error, Result};
pub use imageio::{load_image, load_label_map, save_label_map, Image};
pub use metrics::{
    achievable_segmentation_accuracy, relabel_compact, undersegmentation_error, MetricsReport,
};
pub use structure::{compute_structure, gaussian_blur, gradient_magnitude, StructureMap};
