//! Inputs and persisted artifacts: raw video, traces, scores, manifests,
//! forest models and float grids.

mod frame;
mod grid;
mod manifest;
mod model;
mod scores;
mod traces;

pub use frame::{frame_size_bytes, read_yuv_frame, write_yuv_file, Frame, FrameSource, YuvFile};
pub use grid::{decode_grid, encode_grid, encode_pgm16, load_weight_map, save_weight_map};
pub use manifest::{load_manifest, Manifest, Role, SequenceEntry, DEFAULT_FPS};
pub use model::{load_model, model_from_json, model_id, model_to_json, save_model, MODEL_VERSION};
pub use scores::{load_scores, parse_scores, ScoreEntry, ScoreTable};
pub use traces::{
    frame_of_sample, load_traces, parse_traces, save_traces, write_traces, TraceRecord, TraceSet,
};

pub(crate) use model::short_digest;
pub(crate) use scores::{parse_csv_rows, read_csv_rows};
