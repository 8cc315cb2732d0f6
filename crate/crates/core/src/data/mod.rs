//! Configuration files, datasets, synthetic tasks, checkpoints and timing.

mod bench;
mod checkpoint;
mod config;
mod dataset;
mod generators;
mod run;
mod samples;

pub use bench::{bench, log_log_slope, parse_sizes, BenchReport, BenchRow, BenchSize, GsgSlope};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use config::Config;
pub use dataset::{load_dataset, load_meta, load_split_only, save_dataset, Dataset, DatasetMeta, Record, Split, SplitCounts};
pub use generators::{
    clip_frame, clip_positions, gen_batch_median_task, gen_clip_direction_task, gen_sum_regression_task, median_labels,
    sum_target, CLIP_CHAIN, MEDIAN_OFFSET, MEDIAN_VERTEX_DIM, SUM_VERTICES,
};
pub use run::{split_samples, train_on_dataset, TrainRun};
pub use samples::{group_records, inspect_gsg, make_samples, model_dims, split_seed, targets_for, GsgReport, SampleWiring};
