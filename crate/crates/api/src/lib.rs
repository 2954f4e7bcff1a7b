//! HTTP/JSON service over the calibrated forecasting and backtest library.
//! The `wire` module holds the request and response bodies and is always
//! available; the router and binary need the `server` feature.

pub mod wire;

#[cfg(feature = "server")]
pub mod server;
