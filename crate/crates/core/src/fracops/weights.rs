use super::FractionalOrder;

/// Grünwald-Letnikov coefficients `g_m = (-1)^m binom(alpha, m)` for `m < count`,
/// from the recurrence `g_0 = 1`, `g_m = g_{m-1} (m - 1 - alpha) / m`.
pub fn gl_weights(alpha: FractionalOrder, count: usize) -> Vec<f64> {
    let a = alpha.value();
    let mut g = Vec::with_capacity(count);
    if count == 0 {
        return g;
    }
    g.push(1.0);
    for m in 1..count {
        let mf = m as f64;
        g.push(g[m - 1] * (mf - 1.0 - a) / mf);
    }
    g
}

/// L1 weights `w_m = (m + 1)^(1 - alpha) - m^(1 - alpha)` for `m < count`.
pub fn l1_weights(alpha: FractionalOrder, count: usize) -> Vec<f64> {
    let e = 1.0 - alpha.value();
    (0..count)
        .map(|m| {
            let mf = m as f64;
            if m == 0 {
                1.0
            } else {
                (mf + 1.0).powf(e) - mf.powf(e)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn order(a: f64) -> FractionalOrder {
        FractionalOrder::new(a).unwrap()
    }

    #[test]
    fn gl_examples() {
        assert_eq!(gl_weights(order(0.5), 3), vec![1.0, -0.5, -0.125]);
        assert_eq!(gl_weights(order(1.0), 3), vec![1.0, -1.0, 0.0]);
        assert_eq!(gl_weights(order(0.3), 2), vec![1.0, -0.3]);
        assert!(gl_weights(order(0.3), 0).is_empty());
    }

    #[test]
    fn gl_partial_sums_decrease_to_zero() {
        for a in [0.1, 0.5, 0.9] {
            let g = gl_weights(order(a), 5000);
            let mut s = 0.0;
            let mut prev = f64::INFINITY;
            for v in g {
                s += v;
                assert!(s < prev && s > 0.0);
                prev = s;
            }
            // sum_{m<N} g_m ~ N^-alpha / Gamma(1 - alpha)
            let asymptotic = 5000f64.powf(-a) / statrs::function::gamma::gamma(1.0 - a);
            assert!((s - asymptotic).abs() < 0.01 * asymptotic, "alpha {a}: {s} vs {asymptotic}");
        }
    }

    #[test]
    fn l1_examples() {
        let w = l1_weights(order(0.5), 3);
        assert_eq!(w[0], 1.0);
        assert!((w[1] - 0.414_213_56).abs() < 1e-8);
        assert!((w[2] - 0.317_837_25).abs() < 1e-8);
        assert_eq!(l1_weights(order(1.0), 3), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn l1_positive_and_decreasing() {
        for a in [0.05, 0.4, 0.95] {
            let w = l1_weights(order(a), 2000);
            assert!(w.windows(2).all(|p| p[1] > 0.0 && p[1] < p[0]));
        }
    }
}
