//! Flow front end and data generation: dense optical flow, `.flo` / PGM /
//! PFM I/O, synthetic flow-magnitude frames and background-motion noise.

mod dataset;
mod farneback;
mod flo;
mod image;
mod io;
mod noise;
mod synth;

pub use dataset::{make_dataset, Dataset, Label, LabeledFrame, Split, MANIFEST_FILE};
pub use farneback::{farneback_flow, polynomial_expansion, FarnebackParams, PolyField};
pub use flo::{decode_flo, encode_flo, read_flo, write_flo, FLO_MAGIC};
pub use image::{FlowField, Image};
pub use io::{read_pfm, read_pgm, write_atomic, write_pfm, write_pgm};
pub use noise::{add_noise_blobs, render_gaussian, NoiseParams, NOISE_LEVELS};
pub use synth::{frame_rng, synth_frame, SynthParams};
