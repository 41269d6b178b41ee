//! Workload generation, file formats and the benchmark driver.

pub mod bench;
pub mod config;
pub mod generate;
pub mod image;
pub mod io;
pub mod text;
pub mod workload;

pub use bench::{run_bench, BenchConfig, BenchOutcome, IndexReport, QueryMode};
pub use generate::{generate_synthetic, GenerateParams, SpatialModel};
pub use image::IndexImage;
pub use io::{Corpus, ObjectRecord, QueryRecord};
pub use text::{Tokenizer, Vocabulary};
pub use workload::{build_workload, Workload, WorkloadSpec};
