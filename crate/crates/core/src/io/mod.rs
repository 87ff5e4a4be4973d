//! File formats.
//!
//! * Image stacks: raw little-endian `f32`, row-major, frames concatenated,
//!   with a JSON sidecar `{"width":..,"height":..,"frames":..,"pixel_size_nm":..}`
//!   next to the raw file (same stem, `.json` extension).
//! * Emitters: CSV with header `frame,x_nm,y_nm,intensity`, 1-based frames.
//! * Configs, reports and manifests: JSON.

mod emitters_csv;
mod json;
mod manifest;
mod raw;

pub use emitters_csv::{read_emitters, write_emitters, CSV_HEADER};
pub use json::{read_json, write_json};
pub use manifest::{sha256_file, Artifact, Manifest};
pub use raw::{
    decode_stack, encode_stack, read_stack, sidecar_path, write_stack, StackHeader, StackWriter,
};
