//! Savitzky–Golay smoothing weights.
//!
//! The central-point weights of a least-squares polynomial fit are built
//! from discrete orthogonal (Gram) polynomials over the window abscissae,
//! which avoids forming the ill-conditioned normal equations of the
//! Vandermonde system:
//!
//! ```text
//! w_j = Σ_k P_k(0) · P_k(x_j) / ‖P_k‖²,   k = 0..=order
//! ```

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SavgolError {
    #[error("window must be odd and positive, got {0}")]
    EvenWindow(usize),
    #[error("polynomial order {order} must be smaller than the window {window}")]
    OrderTooHigh { window: usize, order: usize },
}

/// Weights `w` such that `Σ w_j · f(x_j)` is the value at the window centre
/// of the degree-`order` least-squares polynomial through the `window`
/// equally spaced samples.
pub fn savgol_weights(window: usize, order: usize) -> Result<Vec<f64>, SavgolError> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(SavgolError::EvenWindow(window));
    }
    if order >= window {
        return Err(SavgolError::OrderTooHigh { window, order });
    }
    if window == 1 {
        return Ok(vec![1.0]);
    }

    let half = (window / 2) as f64;
    // centred abscissae scaled into [-1, 1]; the centre value does not depend on scale
    let xs: Vec<f64> = (0..window).map(|j| (j as f64 - half) / half).collect();
    let center = window / 2;

    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(order + 1);
    basis.push(vec![1.0; window]);
    for k in 1..=order {
        let prev = &basis[k - 1];
        let mut next: Vec<f64> = xs.iter().zip(prev).map(|(x, p)| x * p).collect();
        // full Gram-Schmidt pass (twice) keeps the basis orthogonal to rounding
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&next, q) / dot(q, q);
                next.iter_mut().zip(q).for_each(|(n, qv)| *n -= c * qv);
            }
        }
        basis.push(next);
    }

    let mut weights = vec![0.0; window];
    for q in &basis {
        let scale = q[center] / dot(q, q);
        for (w, qv) in weights.iter_mut().zip(q) {
            *w += scale * qv;
        }
    }
    Ok(weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(got: &[f64], want: &[f64], tol: f64) {
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() <= tol, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn window3_order1_is_mean() {
        assert_close(&savgol_weights(3, 1).unwrap(), &[1.0 / 3.0; 3], 1e-15);
    }

    #[test]
    fn window5_order2_classic_table() {
        let want: Vec<f64> = [-3.0, 12.0, 17.0, 12.0, -3.0]
            .iter()
            .map(|v| v / 35.0)
            .collect();
        assert_close(&savgol_weights(5, 2).unwrap(), &want, 1e-12);
        // odd orders add nothing at the centre
        assert_close(&savgol_weights(5, 3).unwrap(), &want, 1e-12);
    }

    #[test]
    fn window7_order2_classic_table() {
        let want: Vec<f64> = [-2.0, 3.0, 6.0, 7.0, 6.0, 3.0, -2.0]
            .iter()
            .map(|v| v / 21.0)
            .collect();
        assert_close(&savgol_weights(7, 2).unwrap(), &want, 1e-12);
    }

    #[test]
    fn interpolating_order_is_identity() {
        for w in [3, 5, 7, 9, 11] {
            let mut want = vec![0.0; w];
            want[w / 2] = 1.0;
            assert_close(&savgol_weights(w, w - 1).unwrap(), &want, 1e-10);
        }
    }

    #[test]
    fn sums_to_one_and_symmetric() {
        for w in (1..=15).step_by(2) {
            for order in 0..w {
                let ws = savgol_weights(w, order).unwrap();
                assert!(
                    (ws.iter().sum::<f64>() - 1.0).abs() < 1e-10,
                    "w={w} o={order}"
                );
                for j in 0..w {
                    assert!((ws[j] - ws[w - 1 - j]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn rejects_invalid_arguments() {
        assert_eq!(savgol_weights(4, 1), Err(SavgolError::EvenWindow(4)));
        assert_eq!(savgol_weights(0, 0), Err(SavgolError::EvenWindow(0)));
        assert_eq!(
            savgol_weights(5, 5),
            Err(SavgolError::OrderTooHigh {
                window: 5,
                order: 5
            })
        );
    }
}
