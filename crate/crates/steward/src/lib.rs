//! Share custody for the recovery package: a small HTTP service that keeps
//! one secret share per `(recovery id, x)` on disk, and a client that
//! spreads shares over a steward list and later collects a quorum.

pub mod client;
pub mod error;
pub mod server;
pub mod store;

pub use client::{
    ClientConfig, DistributionReceipt, ReceiptEntry, Recovered, StewardClient, StewardEndpoint,
    StewardList,
};
pub use error::{Result, StewardError, StewardFailure};
pub use server::{serve, spawn, ServiceConfig, StewardHandle, MAX_BODY, TOKEN_ENV};
pub use store::{CrashPoint, ShareStore};
