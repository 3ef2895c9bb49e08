//! C99-style hexadecimal floating point text (`0x1.8p+1`).
//!
//! Every `f64` that crosses a file boundary in this crate is written in this
//! form so that round trips are bit-exact. Parsing accepts any well-formed
//! hex float (arbitrary digit counts, optional point and exponent) and rounds
//! to nearest, ties to even.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HexFloatError {
    #[error("empty hex float")]
    Empty,
    #[error("missing 0x prefix in {0:?}")]
    MissingPrefix(String),
    #[error("no hex digits in {0:?}")]
    NoDigits(String),
    #[error("invalid character {1:?} in {0:?}")]
    InvalidChar(String, char),
    #[error("malformed exponent in {0:?}")]
    BadExponent(String),
    #[error("value {0:?} overflows f64")]
    Overflow(String),
}

/// Formats `v` as a hex float. Non-finite values become `nan`, `inf`, `-inf`.
pub fn format_hex(v: f64) -> String {
    if v.is_nan() {
        return "nan".to_string();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let bits = v.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let exp_field = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    if exp_field == 0 && frac == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, exp) = if exp_field == 0 {
        (0, -1022)
    } else {
        (1, exp_field - 1023)
    };
    let mut digits = format!("{frac:013x}");
    while digits.ends_with('0') {
        digits.pop();
    }
    let esign = if exp >= 0 { "+" } else { "-" };
    if digits.is_empty() {
        format!("{sign}0x{lead}p{esign}{}", exp.abs())
    } else {
        format!("{sign}0x{lead}.{digits}p{esign}{}", exp.abs())
    }
}

/// Parses a hex float produced by [`format_hex`] or any C99 `%a` style text.
pub fn parse_hex(text: &str) -> Result<f64, HexFloatError> {
    let s = text.trim();
    if s.is_empty() {
        return Err(HexFloatError::Empty);
    }
    let (negative, body) = match s.as_bytes()[0] {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    match body {
        "nan" | "NaN" => return Ok(f64::NAN),
        "inf" | "infinity" | "Infinity" => {
            return Ok(if negative { f64::NEG_INFINITY } else { f64::INFINITY })
        }
        _ => {}
    }
    let body = body
        .strip_prefix("0x")
        .or_else(|| body.strip_prefix("0X"))
        .ok_or_else(|| HexFloatError::MissingPrefix(text.to_string()))?;
    let (mantissa_text, exp_text) = match body.find(['p', 'P']) {
        Some(i) => (&body[..i], Some(&body[i + 1..])),
        None => (body, None),
    };

    // value = mant * 2^bin_exp, plus a sticky flag for dropped nonzero digits
    let mut mant: u64 = 0;
    let mut bin_exp: i64 = 0;
    let mut sticky = false;
    let mut seen_point = false;
    let mut any_digit = false;
    for c in mantissa_text.chars() {
        if c == '.' {
            if seen_point {
                return Err(HexFloatError::InvalidChar(text.to_string(), c));
            }
            seen_point = true;
            continue;
        }
        let d = c
            .to_digit(16)
            .ok_or_else(|| HexFloatError::InvalidChar(text.to_string(), c))?
            as u64;
        any_digit = true;
        if mant >> 56 == 0 {
            mant = (mant << 4) | d;
            if seen_point {
                bin_exp -= 4;
            }
        } else {
            sticky |= d != 0;
            if !seen_point {
                bin_exp += 4;
            }
        }
    }
    if !any_digit {
        return Err(HexFloatError::NoDigits(text.to_string()));
    }
    if let Some(e) = exp_text {
        let parsed: i64 = parse_exponent(e).ok_or_else(|| HexFloatError::BadExponent(text.to_string()))?;
        bin_exp = bin_exp.saturating_add(parsed);
    }
    let sign_bit = if negative { 1u64 << 63 } else { 0 };
    if mant == 0 {
        return Ok(f64::from_bits(sign_bit));
    }

    let len = 64 - mant.leading_zeros() as i64;
    // exponent of the least significant kept bit; subnormals pin it at -1074
    let mut shift = (len - 53).max(-1074 - bin_exp);
    let mut m: u64;
    if shift > 0 {
        if shift >= 64 {
            m = 0;
            let half_or_more = shift == 64 && mant >> 63 == 1;
            let exact_half = half_or_more && mant << 1 == 0 && !sticky;
            if half_or_more && !exact_half {
                m = 1;
            }
        } else {
            m = mant >> shift;
            let rem = mant & ((1u64 << shift) - 1);
            let half = 1u64 << (shift - 1);
            if rem > half || (rem == half && (sticky || m & 1 == 1)) {
                m += 1;
            }
        }
        if m >> 53 != 0 {
            m >>= 1;
            shift += 1;
        }
    } else {
        m = mant << (-shift);
    }
    let lsb_exp = bin_exp + shift;
    if m == 0 {
        return Ok(f64::from_bits(sign_bit));
    }
    if m >> 52 == 0 {
        // subnormal: lsb_exp == -1074
        return Ok(f64::from_bits(sign_bit | m));
    }
    let lead_exp = lsb_exp + 52;
    if lead_exp > 1023 {
        return Err(HexFloatError::Overflow(text.to_string()));
    }
    let biased = (lead_exp + 1023) as u64;
    Ok(f64::from_bits(
        sign_bit | (biased << 52) | (m & ((1u64 << 52) - 1)),
    ))
}

fn parse_exponent(e: &str) -> Option<i64> {
    let (neg, digits) = match e.as_bytes().first()? {
        b'-' => (true, &e[1..]),
        b'+' => (false, &e[1..]),
        _ => (false, e),
    };
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    // clamp absurd exponents; anything this large is already over/underflow
    let mut v: i64 = 0;
    for b in digits.bytes() {
        v = (v * 10 + (b - b'0') as i64).min(1 << 40);
    }
    Some(if neg { -v } else { v })
}

/// `serde(with = ...)` adapter for a single hex-encoded `f64`.
pub mod hex_f64 {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format_hex(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let text = String::deserialize(d)?;
        super::parse_hex(&text).map_err(D::Error::custom)
    }
}

/// `serde(with = ...)` adapter for a vector of hex-encoded `f64`.
pub mod hex_vec {
    use serde::{de::Error, ser::SerializeSeq, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for x in v {
            seq.serialize_element(&super::format_hex(*x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let texts = Vec::<String>::deserialize(d)?;
        texts
            .iter()
            .map(|t| super::parse_hex(t).map_err(D::Error::custom))
            .collect()
    }
}

/// `serde(with = ...)` adapter for a matrix (rows of hex-encoded `f64`).
pub mod hex_vecs {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(transparent)]
    struct Row(#[serde(with = "super::hex_vec")] Vec<f64>);

    pub fn serialize<S: Serializer>(v: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Row> = v.iter().map(|r| Row(r.clone())).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
        let rows = Vec::<Row>::deserialize(d)?;
        Ok(rows.into_iter().map(|r| r.0).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_values() {
        assert_eq!(format_hex(1.0), "0x1p+0");
        assert_eq!(format_hex(3.0), "0x1.8p+1");
        assert_eq!(format_hex(-0.5), "-0x1p-1");
        assert_eq!(format_hex(0.0), "0x0p+0");
        assert_eq!(format_hex(-0.0), "-0x0p+0");
        assert_eq!(format_hex(0.1), "0x1.999999999999ap-4");
        assert_eq!(format_hex(f64::MIN_POSITIVE / 2.0), "0x0.8p-1022");
        assert_eq!(parse_hex("0x1.8p+1").unwrap(), 3.0);
        assert_eq!(parse_hex("0X10").unwrap(), 16.0);
        assert_eq!(parse_hex("0x.8").unwrap(), 0.5);
        assert_eq!(parse_hex("-0x1p-1074").unwrap(), -f64::from_bits(1));
    }

    #[test]
    fn rounding_to_nearest_even() {
        // 1 + 2^-53 is a tie, rounds down to 1; 1 + 3*2^-54 rounds up
        assert_eq!(parse_hex("0x1.00000000000008p+0").unwrap(), 1.0);
        assert_eq!(
            parse_hex("0x1.0000000000000cp+0").unwrap(),
            1.0 + f64::EPSILON
        );
        // sticky digit far to the right breaks the tie
        assert_eq!(
            parse_hex("0x1.0000000000000800000000001p+0").unwrap(),
            1.0 + f64::EPSILON
        );
        // tie on odd mantissa rounds up
        assert_eq!(
            parse_hex("0x1.00000000000018p+0").unwrap(),
            1.0 + 2.0 * f64::EPSILON
        );
    }

    #[test]
    fn subnormal_and_limits() {
        assert_eq!(parse_hex("0x1p-1075").unwrap(), 0.0);
        assert_eq!(parse_hex("0x1.8p-1075").unwrap(), f64::from_bits(1));
        assert_eq!(parse_hex("0x1p-2000").unwrap(), 0.0);
        assert_eq!(parse_hex(&format_hex(f64::MAX)).unwrap(), f64::MAX);
        assert!(matches!(parse_hex("0x1p+1024"), Err(HexFloatError::Overflow(_))));
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_hex("").is_err());
        assert!(parse_hex("1.5").is_err());
        assert!(parse_hex("0x").is_err());
        assert!(parse_hex("0x1.2.3").is_err());
        assert!(parse_hex("0x1p").is_err());
        assert!(parse_hex("0x1g").is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_bitwise(bits in any::<u64>()) {
            let v = f64::from_bits(bits);
            let back = parse_hex(&format_hex(v)).unwrap();
            if v.is_nan() {
                prop_assert!(back.is_nan());
            } else {
                prop_assert_eq!(back.to_bits(), bits);
            }
        }

        #[test]
        fn never_panics(s in "\\PC*") {
            let _ = parse_hex(&s);
        }
    }
}
