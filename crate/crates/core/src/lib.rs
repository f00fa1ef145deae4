//! Open-system simulation of a system–ancilla qubit pair, supervised
//! prediction of the system observable from ancilla windows, and a
//! revival-count score for environmental memory.

pub mod dataset;
pub mod dynamics;
pub mod io;
pub mod linalg;
pub mod memory_metric;
pub mod mlp;
pub mod pipeline;
pub mod svg;
