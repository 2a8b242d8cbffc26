//! Network specifications, the two reference architectures, and the
//! sequential network that runs them.

use serde::{Deserialize, Serialize};

use super::layers::{Aux, Layer, LayerSpec, Mode};
use super::ops::{elastic_net_grad, PROB_FLOOR};
use super::tensor::Tensor;
use crate::model::{argmax, check_width, Classifier, ModelError};
use crate::rng::{seeded, Rng};
use crate::Matrix;

pub const DEFAULT_L1: f64 = 1e-5;
pub const DEFAULT_L2: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_width: usize,
    pub n_classes: usize,
    pub layers: Vec<LayerSpec>,
    pub l1: f64,
    pub l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnOptions {
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub alpha: f64,
    pub l1: f64,
    pub l2: f64,
}

impl Default for AnnOptions {
    fn default() -> Self {
        Self {
            hidden: vec![128, 64, 32],
            dropout: 0.2,
            alpha: 1.0,
            l1: DEFAULT_L1,
            l2: DEFAULT_L2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CnnOptions {
    pub filters: usize,
    pub kernel: usize,
    pub pool: usize,
    pub dropout: f64,
    pub dense: usize,
    pub l1: f64,
    pub l2: f64,
}

impl Default for CnnOptions {
    fn default() -> Self {
        Self {
            filters: 32,
            kernel: 3,
            pool: 2,
            dropout: 0.25,
            dense: 64,
            l1: DEFAULT_L1,
            l2: DEFAULT_L2,
        }
    }
}

/// Hidden blocks of dense, batch-norm, ELU and dropout, then a dense,
/// batch-norm, softmax output block.
pub fn build_ann(input_width: usize, n_classes: usize, opts: &AnnOptions) -> Result<NetworkSpec, ModelError> {
    if input_width == 0 || n_classes == 0 || opts.hidden.contains(&0) {
        return Err(ModelError::ShapeMismatch("ANN widths must be at least 1".into()));
    }
    let mut layers = Vec::new();
    for &units in &opts.hidden {
        layers.extend([
            LayerSpec::Dense { units },
            LayerSpec::BatchNorm,
            LayerSpec::Elu { alpha: opts.alpha },
            LayerSpec::Dropout { rate: opts.dropout },
        ]);
    }
    layers.extend([
        LayerSpec::Dense { units: n_classes },
        LayerSpec::BatchNorm,
        LayerSpec::Softmax,
    ]);
    let spec = NetworkSpec {
        input_width,
        n_classes,
        layers,
        l1: opts.l1,
        l2: opts.l2,
    };
    spec.output_shape()?;
    Ok(spec)
}

/// One convolution block (conv, ReLU, max-pool, dropout), then flatten, a
/// ReLU dense layer and a softmax output. The input is one channel.
pub fn build_cnn(input_width: usize, n_classes: usize, opts: &CnnOptions) -> Result<NetworkSpec, ModelError> {
    if input_width < opts.kernel {
        return Err(ModelError::InputTooNarrow {
            width: input_width,
            kernel: opts.kernel,
        });
    }
    let spec = NetworkSpec {
        input_width,
        n_classes,
        layers: vec![
            LayerSpec::Conv1d {
                filters: opts.filters,
                kernel: opts.kernel,
            },
            LayerSpec::Relu,
            LayerSpec::MaxPool { window: opts.pool },
            LayerSpec::Dropout { rate: opts.dropout },
            LayerSpec::Flatten,
            LayerSpec::Dense { units: opts.dense },
            LayerSpec::Relu,
            LayerSpec::Dense { units: n_classes },
            LayerSpec::Softmax,
        ],
        l1: opts.l1,
        l2: opts.l2,
    };
    spec.output_shape()?;
    Ok(spec)
}

impl NetworkSpec {
    /// Instantiates the layers, checking that the widths chain up and the
    /// network ends in a softmax over `n_classes`.
    fn instantiate(&self, rng: &mut Rng) -> Result<Vec<Layer>, ModelError> {
        if self.l1 < 0.0 || self.l2 < 0.0 {
            return Err(ModelError::BadParam("elastic-net strengths must be >= 0".into()));
        }
        if self.layers.last() != Some(&LayerSpec::Softmax) {
            return Err(ModelError::ShapeMismatch("network must end in softmax".into()));
        }
        let mut shape = (self.input_width, 1);
        let mut layers = Vec::with_capacity(self.layers.len());
        for spec in &self.layers {
            let (layer, next) = Layer::from_spec(spec, shape, rng)?;
            layers.push(layer);
            shape = next;
        }
        if shape.0 * shape.1 != self.n_classes {
            return Err(ModelError::ShapeMismatch(format!(
                "output width {} for {} classes",
                shape.0 * shape.1,
                self.n_classes
            )));
        }
        Ok(layers)
    }

    fn output_shape(&self) -> Result<(), ModelError> {
        self.instantiate(&mut seeded(0)).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub spec: NetworkSpec,
    pub layers: Vec<Layer>,
}

/// Rows per chunk when running inference over a large matrix.
const INFER_CHUNK: usize = 1024;

impl Network {
    pub fn new(spec: &NetworkSpec, seed: u64) -> Result<Self, ModelError> {
        let layers = spec.instantiate(&mut seeded(seed))?;
        Ok(Self {
            spec: spec.clone(),
            layers,
        })
    }

    /// `(rows, cols)` of every dense weight matrix and `(filters, kernel *
    /// channels)` of every convolution, in layer order.
    pub fn weight_shapes(&self) -> Vec<(usize, usize)> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                Layer::Dense { n_in, n_out, .. } => Some((*n_in, *n_out)),
                Layer::Conv1d {
                    filters,
                    kernel,
                    in_ch,
                    ..
                } => Some((*filters, kernel * in_ch)),
                _ => None,
            })
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| l.params())
            .map(|p| p.value.len())
            .sum()
    }

    /// Sum of squared penalized weights.
    pub fn weight_sq_norm(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.params())
            .filter(|p| p.penalized)
            .flat_map(|p| p.value.iter())
            .map(|w| w * w)
            .sum()
    }

    pub fn penalty(&self) -> f64 {
        let (l1, l2) = (self.spec.l1, self.spec.l2);
        if l1 == 0.0 && l2 == 0.0 {
            return 0.0;
        }
        let weights: Vec<&[f64]> = self
            .layers
            .iter()
            .flat_map(|l| l.params())
            .filter(|p| p.penalized)
            .map(|p| p.value.as_slice())
            .collect();
        super::ops::elastic_net_penalty(&weights, l1, l2)
    }

    fn run(&self, x: &[f64], rows: usize, mode: Mode, mut rng: Option<&mut Rng>) -> (Vec<Vec<f64>>, Vec<Aux>) {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        let mut auxes = Vec::with_capacity(self.layers.len());
        acts.push(x.to_vec());
        for layer in &self.layers {
            let (out, aux) = layer.forward(acts.last().expect("input"), rows, mode, rng.as_deref_mut());
            acts.push(out);
            auxes.push(aux);
        }
        (acts, auxes)
    }

    /// Class probabilities in evaluation mode, `rows x n_classes`.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor, ModelError> {
        if input.row_width() != self.spec.input_width {
            return Err(ModelError::WidthMismatch {
                expected: self.spec.input_width,
                found: input.row_width(),
            });
        }
        let rows = input.rows();
        let mut out = Vec::with_capacity(rows * self.spec.n_classes);
        let w = self.spec.input_width;
        for chunk in input.data().chunks(INFER_CHUNK * w.max(1)) {
            let (mut acts, _) = self.run(chunk, chunk.len() / w.max(1), Mode::Eval, None);
            out.extend(acts.pop().expect("output"));
        }
        Tensor::new(vec![rows, self.spec.n_classes], out)
    }

    fn probabilities(&self, x: &Matrix) -> Result<Matrix, ModelError> {
        check_width(self.spec.input_width, x)?;
        let t = Tensor::new(vec![x.rows(), x.cols()], x.as_slice().to_vec())?;
        let p = self.forward(&t)?;
        Ok(Matrix::from_vec(x.rows(), self.spec.n_classes, p.into_data()))
    }

    /// Mean cross-entropy plus penalty, and accuracy, in evaluation mode.
    pub fn evaluate(&self, x: &Matrix, y: &[usize]) -> Result<(f64, f64), ModelError> {
        let p = self.probabilities(x)?;
        let mut ce = 0.0;
        let mut hits = 0;
        for (row, &c) in p.iter_rows().zip(y) {
            ce -= row[c].max(PROB_FLOOR).ln();
            hits += usize::from(argmax(row) == c);
        }
        let n = y.len().max(1) as f64;
        Ok((ce / n + self.penalty(), hits as f64 / n))
    }

    pub(crate) fn zero_grads(&mut self) {
        for l in &mut self.layers {
            for p in l.params_mut() {
                p.ensure_state();
                p.grad.iter_mut().for_each(|g| *g = 0.0);
            }
        }
    }

    /// Forward and backward pass over one batch. Returns mean cross-entropy
    /// plus penalty; gradients are left in the parameters. In training
    /// mode batch-norm running statistics are updated.
    pub(crate) fn loss_and_grad(
        &mut self,
        x: &[f64],
        y: &[usize],
        mode: Mode,
        rng: Option<&mut Rng>,
    ) -> f64 {
        let rows = y.len();
        self.zero_grads();
        let (acts, auxes) = self.run(x, rows, mode, rng);
        let c = self.spec.n_classes;
        let p = acts.last().expect("output");
        let mut ce = 0.0;
        let mut grad = p.clone();
        let scale = 1.0 / rows as f64;
        for (r, &label) in y.iter().enumerate() {
            ce -= p[r * c + label].max(PROB_FLOOR).ln();
            grad[r * c + label] -= 1.0;
        }
        grad.iter_mut().for_each(|g| *g *= scale);
        let n = self.layers.len();
        for i in (0..n - 1).rev() {
            grad = self.layers[i].backward(&acts[i], &auxes[i], &grad, rows);
        }
        let (l1, l2) = (self.spec.l1, self.spec.l2);
        for l in &mut self.layers {
            for p in l.params_mut() {
                if p.penalized {
                    elastic_net_grad(&p.value, l1, l2, &mut p.grad);
                }
            }
        }
        if mode == Mode::Train {
            for (l, aux) in self.layers.iter_mut().zip(&auxes) {
                l.update_running(aux);
            }
        }
        ce * scale + self.penalty()
    }
}

impl Classifier for Network {
    fn n_features(&self) -> usize {
        self.spec.input_width
    }

    fn n_classes(&self) -> usize {
        self.spec.n_classes
    }

    fn predict(&self, x: &Matrix) -> Result<Vec<usize>, ModelError> {
        Ok(self.probabilities(x)?.iter_rows().map(argmax).collect())
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Option<Matrix>, ModelError> {
        self.probabilities(x).map(Some)
    }
}
