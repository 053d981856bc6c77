//! Text formats shared by the library dumps and the CLI.

use std::fmt::Write as _;

use ndarray::ArrayView2;

/// Scientific notation with 17 significant digits, enough for a lossless
/// round trip of any `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// Row-major CSV body, one matrix row per line.
pub fn matrix_csv(a: ArrayView2<'_, f64>) -> String {
    let mut out = String::new();
    for row in a.rows() {
        let line: Vec<String> = row.iter().map(|&x| fmt_f64(x)).collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_lossless() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, 0.0] {
            let back: f64 = fmt_f64(x).parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits());
        }
    }

    #[test]
    fn csv_layout() {
        let a = ndarray::array![[1.0, 2.0], [3.0, 4.0]];
        let text = matrix_csv(a.view());
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("1.0000000000000000e0,2.0000000000000000e0\n"));
    }
}
