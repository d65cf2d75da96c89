//! File formats: the DTF1 tensor codec, flat config files and CSV output.

pub mod config;
pub mod csv;
pub mod dtf1;

pub use self::config::Config;
pub use self::csv::{format_float, write_csv, write_csv_to, Field};
pub use self::dtf1::{decode_dtf1, encode_dtf1, read_dtf1, write_dtf1};
