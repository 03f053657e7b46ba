pub mod arith;
pub mod atr;
pub mod cycles;
pub mod embeddings;
pub mod error;
pub mod forms;
pub mod hyperbolic;
pub mod mat;
pub mod orders;
pub mod output;
pub mod padic;
pub mod stats;
pub mod tree;
