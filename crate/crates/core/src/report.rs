//! Fixed-format CSV helpers shared by every exporter.

/// Nine significant digits in scientific notation; identical input bits
/// always give identical text.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.8e}")
}
