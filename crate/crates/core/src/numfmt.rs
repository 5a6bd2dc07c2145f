//! Text encoding of floats for checkpoints: nine significant digits.

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.8e}")
}

pub fn parse_f64(s: &str) -> Option<f64> {
    s.trim().parse().ok()
}

/// Rounds to the value a checkpoint round trip would produce.
pub fn quantize(x: f64) -> f64 {
    fmt_f64(x).parse().unwrap_or(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn quantize_is_idempotent(x in -1e6f64..1e6) {
            let q = quantize(x);
            prop_assert_eq!(quantize(q), q);
            prop_assert_eq!(parse_f64(&fmt_f64(q)), Some(q));
            prop_assert!((q - x).abs() <= 1e-8 * x.abs().max(1e-300));
        }
    }
}
