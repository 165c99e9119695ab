//! Domain types for samples, labels, and splits; synthetic dataset
//! generation with a controllable emotion gap; JSONL persistence.

pub mod io;
pub mod labels;
pub mod sample;
pub mod split;
pub mod synth;

pub use io::{load_dataset, save_dataset};
pub use labels::{CoarseEmotion, CoarseMapping, FineEmotion, LabelSet};
pub use sample::MultimodalSample;
pub use split::{kfold_split, DatasetSplit};
pub use synth::{channel_means, generate_synthetic, GapSpec, SynthDims, CLASS_COUNT};
