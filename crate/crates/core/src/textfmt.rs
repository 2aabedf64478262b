//! Helpers for the TOML documents written by this crate.
//!
//! Floats are rendered with 17 significant digits so that every `f64`
//! survives a write/read cycle exactly.

use std::fmt::Write;

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// A TOML array of floats, eight values per line.
pub fn float_array(values: &[f64]) -> String {
    let mut out = String::from("[");
    for (i, v) in values.iter().enumerate() {
        if i % 8 == 0 {
            out.push_str("\n    ");
        } else {
            out.push(' ');
        }
        let _ = write!(out, "{},", float(*v));
    }
    if !values.is_empty() {
        out.push('\n');
    }
    out.push(']');
    out
}

pub fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(Σ exp(x_i))`, returning `-inf` for empty or all `-inf` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + neumaier_sum(values.iter().map(|&v| (v - max).exp())).ln()
}

/// Compensated summation.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_rendering_round_trips() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02e23, 0.0, -0.0, f64::MIN_POSITIVE] {
            let s = float(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn log_sum_exp_handles_large_spreads() {
        let v = [-1000.0, 0.0, -700.0];
        assert!((log_sum_exp(&v) - 0.0).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[800.0, 800.0]) - (800.0 + 2f64.ln())).abs() < 1e-9);
    }

    #[test]
    fn sigmoid_is_symmetric() {
        for x in [-800.0, -3.0, 0.0, 2.5, 800.0] {
            assert!((stable_sigmoid(x) + stable_sigmoid(-x) - 1.0).abs() < 1e-15);
        }
        assert_eq!(stable_sigmoid(0.0), 0.5);
    }
}
