//! Conditioning of raw eye streams: blink validity classification and
//! correction, saccade interpolation, pupil differencing, fixation
//! filtering, and uniform temporal resampling.

pub mod pipeline;
pub mod stream;

pub use pipeline::{
    correct_blinks, correct_saccades, detect_blinks, detect_blinks_with, fill_missing_pupil,
    filter_fixations, preprocess_stream, pupil_fluctuation, resample_uniform, BlinkEvidence,
    BlinkInterval, FixationFrame, PreprocessReport, BLINK_MAX_MS, BLINK_MIN_MS, CHANNELS,
};
pub use stream::{read_eye_csv, write_eye_csv, EventType, EyeRecord, RawEyeStream};
