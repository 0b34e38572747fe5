//! Biometric key management: cancelable fingerprint templates whose
//! minutiae hashes regenerate a symmetric key through Reed-Solomon parity,
//! key wrapping under that key, and Shamir backup of the result.

pub mod cancelable;
pub mod encoding;
pub mod erasure;
pub mod error;
pub mod gf256;
pub mod keyvault;
pub mod recovery;
pub mod sss;
pub mod synth;
pub mod template;
pub mod vault;

pub use error::{Error, Result};
