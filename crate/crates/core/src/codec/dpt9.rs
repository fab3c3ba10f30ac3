//! KNX 2-octet float (DPT 9.xxx), used for temperatures.
//!
//! Layout `S EEEE MMMMMMMMMMM`: value = 0.01 * M * 2^E, where the 12-bit
//! two's-complement mantissa is the sign bit followed by the 11 M bits.

use super::CodecError;

/// Reserved "invalid data" code.
pub const DPT9_INVALID: u16 = 0x7FFF;
pub const DPT9_MAX: f64 = 0.01 * 2047.0 * 32768.0;
pub const DPT9_MIN: f64 = -0.01 * 2048.0 * 32768.0;

/// Encodes with the smallest exponent whose rounded mantissa fits.
pub fn encode_dpt9(celsius: f64) -> Result<[u8; 2], CodecError> {
    if !celsius.is_finite() {
        return Err(CodecError::OutOfRange(celsius));
    }
    let hundredths = celsius * 100.0;
    for exp in 0..16u16 {
        let mantissa = (hundredths / f64::from(1u32 << exp)).round();
        if (-2048.0..=2047.0).contains(&mantissa) {
            let m = mantissa as i32;
            let code = if m < 0 { 0x8000 | ((m & 0x07FF) as u16) } else { m as u16 } | (exp << 11);
            if code == DPT9_INVALID {
                return Err(CodecError::OutOfRange(celsius));
            }
            return Ok(code.to_be_bytes());
        }
    }
    Err(CodecError::OutOfRange(celsius))
}

/// Decodes any code except [`DPT9_INVALID`].
pub fn decode_dpt9(octets: [u8; 2]) -> Result<f64, CodecError> {
    let code = u16::from_be_bytes(octets);
    if code == DPT9_INVALID {
        return Err(CodecError::InvalidDpt9);
    }
    let exp = (code >> 11) & 0x0F;
    let mut m = i32::from(code & 0x07FF);
    if code & 0x8000 != 0 {
        m -= 2048;
    }
    Ok(f64::from(m) * f64::from(1u32 << exp) / 100.0)
}

/// Exponent the encoder picks for a code's decoded value; used to bound the
/// quantization error at `0.005 * 2^E`.
pub fn dpt9_exponent(octets: [u8; 2]) -> u16 {
    (u16::from_be_bytes(octets) >> 11) & 0x0F
}

pub fn decode_dpt9_slice(data: &[u8]) -> Result<f64, CodecError> {
    let octets: [u8; 2] = data.try_into().map_err(|_| CodecError::MalformedLsdu("DPT9 payload must be two octets"))?;
    decode_dpt9(octets)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute force over all codes: the decodable codes equal to `target`,
    /// pick the one with the smallest exponent.
    fn brute_force_minimal(target: f64) -> u16 {
        (0..=u16::MAX)
            .filter(|&c| c != DPT9_INVALID)
            .filter(|&c| {
                let exp = (c >> 11) & 0x0F;
                let mut m = i32::from(c & 0x07FF);
                if c & 0x8000 != 0 {
                    m -= 2048;
                }
                (0.01 * f64::from(m) * f64::from(1u32 << exp) - target).abs() < 1e-9
            })
            .min_by_key(|c| (c >> 11) & 0x0F)
            .unwrap()
    }

    #[test]
    fn known_codes() {
        assert_eq!(encode_dpt9(0.0).unwrap(), [0x00, 0x00]);
        assert_eq!(brute_force_minimal(22.0), 0x0C4C);
        assert_eq!(encode_dpt9(22.0).unwrap(), [0x0C, 0x4C]);
        assert_eq!(decode_dpt9([0x0C, 0x4C]).unwrap(), 22.0);
        assert_eq!(decode_dpt9([0x87, 0xFF]).unwrap(), -0.01);
        assert_eq!(encode_dpt9(-0.01).unwrap(), [0x87, 0xFF]);
    }

    #[test]
    fn round_trip_within_half_quantum() {
        for x in [-10.0, 0.5, 35.27, 22.005, -273.0, 600_000.0] {
            let code = encode_dpt9(x).unwrap();
            let back = decode_dpt9(code).unwrap();
            let quantum = 0.01 * f64::from(1u32 << dpt9_exponent(code));
            assert!((back - x).abs() <= 0.5 * quantum + 1e-9, "{x} -> {back}");
        }
    }

    #[test]
    fn override_value_snaps_to_nearest_code() {
        // 22.005 needs E = 1 (step 0.02): nearest representable value is 22.00
        assert_eq!(decode_dpt9(encode_dpt9(22.005).unwrap()).unwrap(), 22.0);
    }

    #[test]
    fn exhaustive_canonical_codes() {
        for c in 0..=u16::MAX {
            if c == DPT9_INVALID {
                assert!(decode_dpt9(c.to_be_bytes()).is_err());
                continue;
            }
            let v = decode_dpt9(c.to_be_bytes()).unwrap();
            let re = encode_dpt9(v).unwrap();
            assert_eq!(decode_dpt9(re).unwrap(), v, "code {c:04x}");
            assert!(dpt9_exponent(re) <= dpt9_exponent(c.to_be_bytes()));
            assert_eq!(encode_dpt9(decode_dpt9(re).unwrap()).unwrap(), re);
        }
    }

    #[test]
    fn out_of_range() {
        assert!(encode_dpt9(f64::NAN).is_err());
        assert!(encode_dpt9(1e9).is_err());
        assert!(encode_dpt9(DPT9_MAX).is_err()); // collides with the invalid code
        assert!(encode_dpt9(DPT9_MIN).is_ok());
    }
}
