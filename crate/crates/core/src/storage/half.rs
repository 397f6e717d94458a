//! IEEE 754 binary16 conversions.
//!
//! Encoding rounds to nearest, ties to even, directly from `f64` (no
//! intermediate `f32`, so no double rounding).

const MAX_FINITE_HALFWAY: f64 = 65520.0;

pub fn f16_bits_from_f64(v: f64) -> u16 {
    let sign = ((v.to_bits() >> 48) & 0x8000) as u16;
    if v.is_nan() {
        return sign | 0x7e00;
    }
    let a = v.abs();
    if a >= MAX_FINITE_HALFWAY {
        return sign | 0x7c00;
    }
    if a < f64::powi(2.0, -14) {
        // subnormal quantum 2^-24; a carry into 1024 lands on the smallest normal
        let q = (a * f64::powi(2.0, 24)).round_ties_even() as u16;
        return sign | q;
    }
    let mut e = ((a.to_bits() >> 52) & 0x7ff) as i32 - 1023;
    let mut r = (a * f64::powi(2.0, 10 - e)).round_ties_even() as u16;
    if r == 2048 {
        e += 1;
        r = 1024;
    }
    sign | (((e + 15) as u16) << 10) | (r - 1024)
}

pub fn f64_from_f16_bits(h: u16) -> f64 {
    let sign = if h & 0x8000 != 0 { -1.0 } else { 1.0 };
    let exp = ((h >> 10) & 0x1f) as i32;
    let man = (h & 0x3ff) as f64;
    sign * match exp {
        0 => man * f64::powi(2.0, -24),
        31 if man == 0.0 => f64::INFINITY,
        31 => f64::NAN,
        _ => (1024.0 + man) * f64::powi(2.0, exp - 25),
    }
}

/// `v` after a trip through half precision.
pub fn round_to_f16(v: f64) -> f64 {
    f64_from_f16_bits(f16_bits_from_f64(v))
}
