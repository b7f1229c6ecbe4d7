/// Formats a float with 17 significant digits so it round-trips exactly.
pub fn sci(x: f64) -> String {
    format!("{x:.16e}")
}
