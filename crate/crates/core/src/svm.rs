//! Linear support-vector classifier trained by stochastic subgradient
//! descent on the primal hinge objective
//! `0.5 * |w|^2 + C * sum(max(0, 1 - y (w.x + b)))`.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::model::{argmax, check_labels, check_width, Classifier, ModelError};
use crate::rng::{derive_seed, seeded};
use crate::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub c: f64,
    pub epochs: usize,
    pub eta0: f64,
    pub decay: f64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            epochs: 20,
            eta0: 0.1,
            decay: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub w: Vec<f64>,
    pub b: f64,
    pub c: f64,
    pub epochs: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Trains on labels in {-1, +1}. The sample order is reshuffled from one
/// seeded stream every epoch.
pub fn fit_linear_svm(
    x: &Matrix,
    y: &[i8],
    params: &SvmParams,
    seed: u64,
) -> Result<SvmModel, ModelError> {
    if x.rows() == 0 {
        return Err(ModelError::EmptyInput);
    }
    if y.len() != x.rows() {
        return Err(ModelError::LengthMismatch {
            rows: x.rows(),
            labels: y.len(),
        });
    }
    if let Some(&bad) = y.iter().find(|&&v| v != 1 && v != -1) {
        return Err(ModelError::BadParam(format!("svm label {bad} is not -1 or +1")));
    }
    if !y.contains(&1) || !y.contains(&-1) {
        return Err(ModelError::SingleClass);
    }
    let n = x.rows();
    let inv_n = 1.0 / n as f64;
    let mut w = vec![0.0; x.cols()];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = seeded(seed);
    let mut t = 0u64;
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let eta = params.eta0 / (1.0 + t as f64 * params.decay);
            let row = x.row(i);
            let yi = f64::from(y[i]);
            let active = yi * (dot(&w, row) + b) < 1.0;
            for (wj, xj) in w.iter_mut().zip(row) {
                let mut g = *wj * inv_n;
                if active {
                    g -= params.c * yi * xj;
                }
                *wj -= eta * g;
            }
            if active {
                b += eta * params.c * yi;
            }
            t += 1;
        }
    }
    if w.iter().any(|v| !v.is_finite()) || !b.is_finite() {
        return Err(ModelError::NonFiniteLoss {
            epoch: params.epochs,
        });
    }
    Ok(SvmModel {
        w,
        b,
        c: params.c,
        epochs: params.epochs,
    })
}

impl SvmModel {
    pub fn margin(&self, row: &[f64]) -> f64 {
        dot(&self.w, row) + self.b
    }

    /// Labels in {-1, +1} (a zero margin is +1) with the raw margins.
    pub fn predict_signed(&self, x: &Matrix) -> Result<(Vec<i8>, Vec<f64>), ModelError> {
        check_width(self.w.len(), x)?;
        let margins: Vec<f64> = x.iter_rows().map(|r| self.margin(r)).collect();
        let labels = margins.iter().map(|&m| if m >= 0.0 { 1 } else { -1 }).collect();
        Ok((labels, margins))
    }

    pub fn objective(&self, x: &Matrix, y: &[i8]) -> f64 {
        primal_objective(&self.w, self.b, self.c, x, y)
    }
}

pub fn primal_objective(w: &[f64], b: f64, c: f64, x: &Matrix, y: &[i8]) -> f64 {
    let hinge: f64 = x
        .iter_rows()
        .zip(y)
        .map(|(r, &yi)| (1.0 - f64::from(yi) * (dot(w, r) + b)).max(0.0))
        .sum();
    0.5 * dot(w, w) + c * hinge
}

/// Class index 1 is the positive side.
impl Classifier for SvmModel {
    fn n_features(&self) -> usize {
        self.w.len()
    }

    fn n_classes(&self) -> usize {
        2
    }

    fn predict(&self, x: &Matrix) -> Result<Vec<usize>, ModelError> {
        let (labels, _) = self.predict_signed(x)?;
        Ok(labels.into_iter().map(|l| usize::from(l > 0)).collect())
    }
}

/// One binary machine per class (that class against the rest); the class
/// with the largest margin wins, ties to the lower index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvrSvm {
    pub machines: Vec<SvmModel>,
}

pub fn fit_svm_classifier(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    params: &SvmParams,
    seed: u64,
) -> Result<OvrSvm, ModelError> {
    check_labels(x, y, n_classes)?;
    if n_classes == 2 {
        let signed: Vec<i8> = y.iter().map(|&c| if c == 1 { 1 } else { -1 }).collect();
        return Ok(OvrSvm {
            machines: vec![fit_linear_svm(x, &signed, params, seed)?],
        });
    }
    let machines = (0..n_classes)
        .map(|k| {
            let signed: Vec<i8> = y.iter().map(|&c| if c == k { 1 } else { -1 }).collect();
            fit_linear_svm(x, &signed, params, derive_seed(seed, &[k as u64]))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(OvrSvm { machines })
}

impl Classifier for OvrSvm {
    fn n_features(&self) -> usize {
        self.machines[0].w.len()
    }

    fn n_classes(&self) -> usize {
        if self.machines.len() == 1 {
            2
        } else {
            self.machines.len()
        }
    }

    fn predict(&self, x: &Matrix) -> Result<Vec<usize>, ModelError> {
        if self.machines.len() == 1 {
            return self.machines[0].predict(x);
        }
        check_width(self.n_features(), x)?;
        Ok(x.iter_rows()
            .map(|r| {
                let m: Vec<f64> = self.machines.iter().map(|s| s.margin(r)).collect();
                argmax(&m)
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> (Matrix, Vec<i8>) {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..20 {
            let j = i as f64 * 0.05;
            rows.push([2.0 + j, 1.0 - j]);
            y.push(1);
            rows.push([-2.0 - j, -1.0 + j]);
            y.push(-1);
        }
        (Matrix::from_rows(&rows), y)
    }

    #[test]
    fn separable_fixture_reaches_zero_hinge() {
        let (x, y) = separable();
        let m = fit_linear_svm(&x, &y, &SvmParams::default(), 3).unwrap();
        let (pred, margins) = m.predict_signed(&x).unwrap();
        assert_eq!(pred, y);
        // Support vectors sit on the margin, where the last SGD iterate
        // hovers within a step size of zero hinge.
        let hinge: f64 = margins
            .iter()
            .zip(&y)
            .map(|(m, &yi)| (1.0 - m * f64::from(yi)).max(0.0))
            .sum::<f64>()
            / y.len() as f64;
        assert!(hinge < 1e-2, "{hinge}");
    }

    #[test]
    fn label_flip_negates_the_solution() {
        let (x, y) = separable();
        let flipped: Vec<i8> = y.iter().map(|v| -v).collect();
        let a = fit_linear_svm(&x, &y, &SvmParams::default(), 8).unwrap();
        let b = fit_linear_svm(&x, &flipped, &SvmParams::default(), 8).unwrap();
        for (p, q) in a.w.iter().zip(&b.w) {
            assert!((p + q).abs() < 1e-12);
        }
        assert!((a.b + b.b).abs() < 1e-12);
    }

    #[test]
    fn contradictory_pair_gets_half() {
        let x = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]);
        let m = fit_linear_svm(&x, &[1, -1], &SvmParams::default(), 0).unwrap();
        let (p, _) = m.predict_signed(&x).unwrap();
        assert_eq!(p[0], p[1]);
    }

    #[test]
    fn margin_formula_and_boundary() {
        let m = SvmModel {
            w: vec![1.0, 0.0],
            b: 0.0,
            c: 1.0,
            epochs: 0,
        };
        let (l, mg) = m.predict_signed(&Matrix::from_rows(&[[3.0, 7.0], [0.0, 5.0]])).unwrap();
        assert_eq!(mg, vec![3.0, 0.0]);
        assert_eq!(l, vec![1, 1]);
        let m = SvmModel {
            w: vec![0.5, -0.25, 2.0],
            b: 0.125,
            c: 1.0,
            epochs: 0,
        };
        let (_, mg) = m.predict_signed(&Matrix::from_rows(&[[0.2, 0.4, 0.6]])).unwrap();
        assert!((mg[0] - (0.1 - 0.1 + 1.2 + 0.125)).abs() < 1e-12);
    }

    #[test]
    fn single_class_rejected() {
        let x = Matrix::from_rows(&[[1.0], [2.0]]);
        assert!(matches!(
            fit_linear_svm(&x, &[1, 1], &SvmParams::default(), 0),
            Err(ModelError::SingleClass)
        ));
    }

    #[test]
    fn one_vs_rest_on_three_blobs() {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        let centers = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        for i in 0..90 {
            let c = i % 3;
            let j = ((i / 3) as f64 * 0.7).sin() * 0.1;
            rows.push([centers[c][0] + j, centers[c][1] - j]);
            y.push(c);
        }
        let x = Matrix::from_rows(&rows);
        let m = fit_svm_classifier(&x, &y, 3, &SvmParams::default(), 1).unwrap();
        assert_eq!(m.machines.len(), 3);
        let acc = crate::model::accuracy(&y, &m.predict(&x).unwrap());
        assert!(acc > 0.95, "{acc}");
    }
}
