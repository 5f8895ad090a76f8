//! LDPC coding, interleaving and the iterative receiver.

pub mod interleaver;
pub mod ldpc;
pub mod spa;
pub mod turbo;

pub use interleaver::Interleaver;
pub use ldpc::{ldpc_construct, LdpcCode};
pub use spa::{spa_decode, SpaOutput};
pub use turbo::{turbo_loop, FrameObservation, Framing, TurboConfig, TurboOutput};
