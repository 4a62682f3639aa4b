//! Deterministic number formatting for CSV and reports: fixed decimal
//! notation trimmed to six significant digits, `.` separator, no exponents.

pub fn sig6(value: f64) -> String {
    if value.is_nan() {
        return "nan".to_string();
    }
    if value == 0.0 {
        return "0".to_string();
    }
    let magnitude = value.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    let fixed = format!("{value:.decimals$}");
    if fixed.contains('.') {
        fixed
            .trim_end_matches('0')
            .trim_end_matches('.')
            .to_string()
    } else {
        fixed
    }
}

#[cfg(test)]
mod tests {
    use super::sig6;

    #[test]
    fn formatting_is_stable() {
        assert_eq!(sig6(1.0 / 3.0), "0.333333");
        assert_eq!(sig6(0.5625), "0.5625");
        assert_eq!(sig6(1.0), "1");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(27.0 / 28.0), "0.964286");
        assert_eq!(sig6(0.000322527), "0.000322527");
        assert_eq!(sig6(-0.25), "-0.25");
        assert_eq!(sig6(f64::NAN), "nan");
        assert_eq!(sig6(76.0), "76");
    }
}
