pub mod analysis;
pub mod contacts;
pub mod emitter;
pub mod geo;
pub mod matcher;
pub mod network;
pub mod pipeline;
pub mod replay;
pub mod scenario;
pub mod stats;
pub mod synth;

mod xml;
