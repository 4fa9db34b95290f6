//! Log-domain helpers shared by the belief and quantizer code.

/// `ln(sum(exp(xs)))` with max-shift. Returns `-inf` for an empty slice or
/// when every entry is `-inf`.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Subtracts `logsumexp(xs)` from every entry in place and returns the shift.
pub fn normalize_in_place(xs: &mut [f64]) -> f64 {
    let lse = logsumexp(xs);
    for x in xs.iter_mut() {
        *x -= lse;
    }
    lse
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_direct_sum_for_moderate_values() {
        let xs = [0.5f64.ln(), 0.25f64.ln(), 0.25f64.ln()];
        assert!(logsumexp(&xs).abs() < 1e-15);
    }

    #[test]
    fn survives_values_that_underflow_linear_domain() {
        let xs = [-5000.0, -5000.0];
        let expected = -5000.0 + 2f64.ln();
        assert!((logsumexp(&xs) - expected).abs() < 1e-12);
    }

    #[test]
    fn empty_and_all_neg_inf() {
        assert_eq!(logsumexp(&[]), f64::NEG_INFINITY);
        assert_eq!(logsumexp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
    }

    #[test]
    fn normalize_yields_unit_mass() {
        let mut xs = [-3.0, -1.0, -7.5];
        normalize_in_place(&mut xs);
        assert!(logsumexp(&xs).abs() < 1e-15);
    }
}
