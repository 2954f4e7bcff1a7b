//! Thin client of the calitrade service: a typed HTTP client and the
//! `calitrade` command line built on it.

pub mod client;
pub mod commands;
pub mod config;

pub use client::{Client, ClientError};
