//! `%.12g`-style formatting for human-readable output.

const SIG: usize = 12;

/// Twelve significant digits, fixed notation for exponents in `[-4, 12)` and
/// scientific otherwise, trailing zeros removed.
pub fn sig12(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{:.*e}", SIG - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..SIG as i32).contains(&exp) {
        let decimals = (SIG as i32 - 1 - exp) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa.to_string()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

#[cfg(test)]
mod tests {
    use super::sig12;

    #[test]
    fn matches_printf_g() {
        assert_eq!(sig12(3.0), "3");
        assert_eq!(sig12(-0.5), "-0.5");
        assert_eq!(sig12(2.735758882342884), "2.73575888234");
        assert_eq!(sig12(1.0 / 3.0), "0.333333333333");
        assert_eq!(sig12(1e-5), "1e-05");
        assert_eq!(sig12(0.0001234), "0.0001234");
        assert_eq!(sig12(123456789012345.0), "1.23456789012e+14");
        assert_eq!(sig12(999999999999.9), "1e+12");
        assert_eq!(sig12(0.0), "0");
        assert_eq!(sig12(f64::NAN), "NaN");
    }
}
