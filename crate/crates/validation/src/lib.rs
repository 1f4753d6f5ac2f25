//! Hosts the acceptance suite; see `tests/acceptance.rs`.
