pub mod biot_savart;
pub mod cascade;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod littlewood_paley;
pub mod output;
pub mod par;
pub mod presets;
pub mod sl2;
pub mod spectral;
pub mod validate;

pub use error::{Error, Result};
