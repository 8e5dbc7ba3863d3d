pub mod analysis;
pub mod app;
pub mod config;
pub mod error;
pub mod fem;
pub mod fine;
pub mod geometry;
pub mod io;
pub mod materials;
pub mod offline;
pub mod online;

pub use error::{Error, Result};
