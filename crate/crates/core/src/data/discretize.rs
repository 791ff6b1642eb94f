//! Uniform binning of numeric columns against public bounds.

use super::DataError;

/// Default number of bins per numeric column.
pub const DEFAULT_BINS: usize = 100;

/// Bin index of `x` among `bins` equal-width bins over `[min, max]`.
/// `x == max` lands in the last bin.
pub fn discretize(x: f64, min: f64, max: f64, bins: usize) -> Result<usize, DataError> {
    if !(min <= x && x <= max) {
        return Err(DataError::ValueOutOfRange { value: x, min, max });
    }
    let bin = ((x - min) / (max - min) * bins as f64).floor() as usize;
    Ok(bin.min(bins - 1))
}

/// Midpoint of `bin`, rounded half away from zero for integer columns.
pub fn undiscretize(
    bin: usize,
    min: f64,
    max: f64,
    bins: usize,
    integer_valued: bool,
) -> Result<f64, DataError> {
    if bin >= bins {
        return Err(DataError::BinOutOfRange { bin, bins });
    }
    let mid = min + (bin as f64 + 0.5) * (max - min) / bins as f64;
    Ok(if integer_valued { mid.round() } else { mid })
}
