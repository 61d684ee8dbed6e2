//! dB / linear conversions. Every conversion in the crate goes through here.

/// `10^(db/10)`.
#[inline]
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// `10·log10(lin)`; returns `-inf` for zero.
#[inline]
pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Sums powers given in dBm (or dB) in the linear domain.
pub fn sum_db<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    linear_to_db(values.into_iter().map(db_to_linear).sum())
}
