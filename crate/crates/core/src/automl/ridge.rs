use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Features, RidgeParams};

/// Linear model on normalized features with an unpenalized intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeState {
    pub coef: Features,
    pub intercept: f64,
}

impl RidgeState {
    pub fn fit(x: &[Features], y: &[f64], params: &RidgeParams) -> RidgeState {
        let n = x.len() as f64;
        let mut x_mean = [0.0; 4];
        for r in x {
            for j in 0..4 {
                x_mean[j] += r[j] / n;
            }
        }
        let y_mean = y.iter().sum::<f64>() / n;
        let xc = DMatrix::from_fn(x.len(), 4, |i, j| x[i][j] - x_mean[j]);
        let yc = DVector::from_iterator(y.len(), y.iter().map(|v| v - y_mean));
        let mut gram = xc.transpose() * &xc;
        for j in 0..4 {
            gram[(j, j)] += params.lambda;
        }
        let rhs = xc.transpose() * yc;
        // SVD keeps λ = 0 well defined when a feature is constant.
        let beta = gram
            .svd(true, true)
            .solve(&rhs, 1e-12)
            .unwrap_or_else(|_| DVector::zeros(4));
        let mut coef = [0.0; 4];
        for j in 0..4 {
            coef[j] = beta[j];
        }
        let intercept = y_mean - (0..4).map(|j| coef[j] * x_mean[j]).sum::<f64>();
        RidgeState { coef, intercept }
    }

    pub fn predict(&self, x: &Features) -> f64 {
        self.intercept + (0..4).map(|j| self.coef[j] * x[j]).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shrinkage_pulls_towards_the_mean() {
        let x: Vec<Features> = (0..20).map(|i| [i as f64 / 19.0, 0.0, 0.0, 0.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| 4.0 * r[0] + 1.0).collect();
        let exact = RidgeState::fit(&x, &y, &RidgeParams { lambda: 0.0 });
        let shrunk = RidgeState::fit(&x, &y, &RidgeParams { lambda: 100.0 });
        assert!((exact.coef[0] - 4.0).abs() < 1e-9);
        assert!(shrunk.coef[0].abs() < exact.coef[0].abs());
        assert_eq!(exact.coef[1], 0.0);
    }
}
