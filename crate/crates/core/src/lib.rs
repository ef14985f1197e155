//! Secure two-party evaluation of max-out neural-network controllers.
//!
//! A max-out controller `g(x) = max{Kx + b} - max{Lx + c}` is evaluated by
//! two non-colluding clouds without revealing the state, the weights, or the
//! control action to either of them. The affine preactivations are computed
//! on additive secret shares over Z_{2^l} (with Beaver-triple
//! multiplications), and the max operations run inside garbled Boolean
//! circuits exchanged between the clouds. An actuator recombines the two
//! masked circuit outputs into the plaintext control input.
//!
//! Module map:
//!
//! * [`ring`]: arithmetic in Z_{2^l}, signed reinterpretation, bit vectors.
//! * [`quantize`]: real-to-integer controller scaling and overflow/error
//!   certificates.
//! * [`shares`]: additive sharing, share arithmetic, Beaver triples.
//! * [`circuit`]: the Boolean max-out neuron circuit (adders, tournament
//!   max, masking).
//! * [`garble`]: Yao garbling with free XOR and point-and-permute.
//! * [`ot`]: 1-out-of-2 oblivious transfer for evaluator input labels.
//! * [`protocol`]: the sensor / cloud / cloud / actuator runtime and wire
//!   format.
//! * [`plant`]: plaintext reference controllers, fixtures, and closed-loop
//!   simulation.
//! * [`verify`]: named self-check suites used by the CLI.

pub mod circuit;
pub mod error;
pub mod garble;
pub mod ot;
pub mod plant;
pub mod protocol;
pub mod quantize;
pub mod ring;
pub mod shares;
pub mod verify;

pub use error::{Error, Result};
