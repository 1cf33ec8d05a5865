//! CIE luminosity functions tabulated on the 420–890 nm / 10 nm grid.
//!
//! Values are the relative (unit-peak) CIE tabulations; [`super::LuminosityTables::cie`]
//! rescales them to absolute peaks.

use super::N_BANDS;

/// CIE 1924 photopic V(λ), 420..=890 nm.
pub const PHOTOPIC_1924: [f64; N_BANDS] = [
    0.0040, 0.0116, 0.0230, 0.0380, 0.0600, 0.0910, 0.1390, 0.2080, // 420-490
    0.3230, 0.5030, 0.7100, 0.8620, 0.9540, 0.9950, 0.9950, 0.9520, // 500-570
    0.8700, 0.7570, 0.6310, 0.5030, 0.3810, 0.2650, 0.1750, 0.1070, // 580-650
    0.0610, 0.0320, 0.0170, 0.0082, 0.0041, 0.0021, 0.00105, 0.00052, // 660-730
    0.00025, 0.00012, 0.00006, 0.00003, 0.000015, 0.0, 0.0, 0.0, // 740-810
    0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, // 820-890
];

/// CIE 1951 scotopic V'(λ), 420..=890 nm. The tabulated 700 nm value
/// (1.78e-5) is dropped so the table vanishes from 700 nm on.
pub const SCOTOPIC_1951: [f64; N_BANDS] = [
    0.0966, 0.1998, 0.3281, 0.4550, 0.5670, 0.6760, 0.7930, 0.9040, // 420-490
    0.9820, 0.9970, 0.9350, 0.8110, 0.6500, 0.4810, 0.3288, 0.2076, // 500-570
    0.1212, 0.0655, 0.03315, 0.01593, 0.00737, 0.003335, 0.001497, 0.000677, // 580-650
    0.0003129, 0.0001480, 0.0000715, 0.00003533, 0.0, 0.0, 0.0, 0.0, // 660-730
    0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, // 740-810
    0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, // 820-890
];

/// Absolute scotopic peak on the grid.
pub const SCOTOPIC_PEAK: f64 = 1700.0;

/// Absolute photopic peak (lm/W convention).
pub const PHOTOPIC_PEAK: f64 = 683.0;
