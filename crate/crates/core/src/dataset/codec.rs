use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// Width of one direction bin.
pub const BIN_WIDTH: f64 = 0.02;
/// Bins span `[-MAX_BIN, MAX_BIN]`.
pub const MAX_BIN: i32 = 50;

/// Discretized direction: each component becomes an integer bin in
/// `[-50, 50]`, bin `b` standing for the value `0.02 * b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DirectionCode {
    pub bins: [i32; 3],
}

pub fn encode_component(v: f64) -> i32 {
    // f64::round rounds half away from zero.
    ((v / BIN_WIDTH).round() as i32).clamp(-MAX_BIN, MAX_BIN)
}

pub fn decode_component(bin: i32) -> f64 {
    f64::from(bin) * BIN_WIDTH
}

pub fn encode_direction(v: &Vector3<f64>) -> DirectionCode {
    DirectionCode {
        bins: [
            encode_component(v.x),
            encode_component(v.y),
            encode_component(v.z),
        ],
    }
}

pub fn decode_direction(code: &DirectionCode) -> Vector3<f64> {
    Vector3::new(
        decode_component(code.bins[0]),
        decode_component(code.bins[1]),
        decode_component(code.bins[2]),
    )
}

impl DirectionCode {
    /// Decoded direction rescaled to unit length; `None` for the zero code.
    pub fn to_unit(&self) -> Option<Vector3<f64>> {
        let v = decode_direction(self);
        let n = v.norm();
        (n > 0.0).then(|| v / n)
    }

    /// Components as two-decimal fixed point, e.g. `(0.00, -0.02, 1.00)`.
    pub fn format(&self) -> String {
        let [x, y, z] = self.bins.map(format_bin);
        format!("({x}, {y}, {z})")
    }
}

/// Locale-independent two-decimal rendering of a bin value.
pub fn format_bin(bin: i32) -> String {
    let hundredths = bin * 2;
    let sign = if hundredths < 0 { "-" } else { "" };
    let a = hundredths.abs();
    format!("{sign}{}.{:02}", a / 100, a % 100)
}

/// Parses a two-decimal value produced by [`format_bin`] back into its bin.
pub fn parse_bin(text: &str) -> Option<i32> {
    let (neg, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let (int, frac) = body.split_once('.')?;
    if int.is_empty() || frac.len() != 2 || !int.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let hundredths: i32 = int.parse::<i32>().ok()? * 100 + frac.parse::<i32>().ok()?;
    if hundredths % 2 != 0 {
        return None;
    }
    let bin = if neg { -hundredths / 2 } else { hundredths / 2 };
    if bin.abs() > MAX_BIN || (neg && bin == 0) {
        return None;
    }
    Some(bin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn boundary_and_zero() {
        let c = encode_direction(&Vector3::new(0.0, 0.0, 1.0));
        assert_eq!(c.bins, [0, 0, 50]);
        assert_eq!(decode_direction(&c), Vector3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn rounds_half_away_from_zero() {
        let c = encode_direction(&Vector3::new(0.013, -0.013, 0.9998));
        assert_eq!(c.bins, [1, -1, 50]);
        assert_eq!(encode_component(0.03), 2);
        assert_eq!(encode_component(-0.03), -2);
        assert_eq!(encode_component(1.5), 50);
        assert_eq!(encode_component(-1.5), -50);
    }

    #[test]
    fn hundredth_sweep() {
        for k in -100..=100 {
            let v = f64::from(k) / 100.0;
            let back = decode_component(encode_component(v));
            assert!((back - v).abs() <= 0.01 + 1e-12, "{v} -> {back}");
        }
    }

    #[test]
    fn fixed_point_text() {
        assert_eq!(format_bin(0), "0.00");
        assert_eq!(format_bin(50), "1.00");
        assert_eq!(format_bin(-50), "-1.00");
        assert_eq!(format_bin(-1), "-0.02");
        assert_eq!(format_bin(37), "0.74");
        for b in -50..=50 {
            assert_eq!(parse_bin(&format_bin(b)), Some(b));
        }
        for bad in [
            "1.0", "0.01", "-0.00", "1.02", "+0.02", "a.bc", ".50", "0.5x",
        ] {
            assert_eq!(parse_bin(bad), None, "{bad}");
        }
    }

    proptest! {
        #[test]
        fn encode_is_idempotent_after_decode(x in -1.0f64..=1.0, y in -1.0f64..=1.0, z in -1.0f64..=1.0) {
            let c = encode_direction(&Vector3::new(x, y, z));
            prop_assert_eq!(encode_direction(&decode_direction(&c)), c);
            let err = (decode_direction(&c) - Vector3::new(x, y, z)).amax();
            prop_assert!(err <= 0.01 + 1e-12);
        }
    }
}
