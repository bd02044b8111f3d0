//! Flow-guided video inpainting: flow completion, flow-guided pixel
//! propagation, and fill of regions no flow chain reaches.

pub mod completion;
pub mod error;
pub mod flow_io;
pub mod grid;
pub mod laplace;
pub mod losses;
pub mod maskgen;
pub mod metrics;
mod par;
pub mod pipeline;
pub mod propagation;
pub mod unseen;

pub use completion::{complete_sequence, complete_sequence_default, CompletedFlows, CompletionConfig};
pub use error::{Error, Result};
pub use grid::{FlowDirection, FlowField, Frame, Mask, Scale, SequenceBundle};
pub use propagation::{propagate, PropagationConfig};
pub use unseen::{fill_loop, DiffusionInpainter, FillLoopConfig};
