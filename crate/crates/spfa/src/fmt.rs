//! Deterministic numeric formatting for CSV and report output.

/// Format a value with 6 significant digits in plain decimal notation.
///
/// Output is locale-independent and stable across runs, which is what
/// the byte-identical output contract of the CLI relies on.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (5 - mag).clamp(0, 17) as usize;
    let s = format!("{x:.decimals$}");
    // trim trailing zeros but keep at least one digit after the point
    if s.contains('.') {
        let t = s.trim_end_matches('0');
        let t = t.strip_suffix('.').unwrap_or(t);
        t.to_string()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_six_significant_digits() {
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(1.0), "1");
        assert_eq!(sig6(0.21), "0.21");
        assert_eq!(sig6(0.123456789), "0.123457");
        assert_eq!(sig6(-0.123456789), "-0.123457");
        assert_eq!(sig6(123456.789), "123457");
        assert_eq!(sig6(1e-7), "0.0000001");
        assert_eq!(sig6(99.85), "99.85");
    }
}
