//! Sparse ReLU networks `x ↦ (W_L η(·) + b_L) ∘ … ∘ (W_1 x + b_1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relu::matrix::CsrMatrix;

/// One affine map `W x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: CsrMatrix,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn new(weights: CsrMatrix, bias: Vec<f64>) -> Self {
        assert_eq!(weights.rows, bias.len(), "bias length differs from row count");
        Self { weights, bias }
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols
    }

    fn nonzeros(&self) -> usize {
        self.weights.nnz() + self.bias.iter().filter(|b| **b != 0.0).count()
    }

    fn max_abs(&self) -> f64 {
        self.bias.iter().fold(self.weights.max_abs(), |m, b| m.max(b.abs()))
    }
}

/// Architecture statistics `(L, W, S, B)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetStats {
    /// Number of affine layers.
    pub depth: usize,
    /// Largest layer width, the input included.
    pub width: usize,
    /// Nonzero weights and biases.
    pub nonzeros: usize,
    /// Largest absolute parameter.
    pub max_abs: f64,
}

/// A ReLU network; ReLU acts between consecutive layers, not after the last.
#[derive(Debug, Clone, PartialEq)]
pub struct ReluNetwork {
    layers: Vec<Layer>,
}

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    layers: Vec<Layer>,
    stats: NetStats,
}

impl ReluNetwork {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("a network needs at least one layer"));
        }
        for w in layers.windows(2) {
            if w[0].out_dim() != w[1].in_dim() {
                return Err(Error::Dimension {
                    what: "layer input",
                    expected: w[0].out_dim(),
                    got: w[1].in_dim(),
                });
            }
        }
        Ok(Self { layers })
    }

    fn from_layers(layers: Vec<Layer>) -> Self {
        Self::new(layers).expect("internally consistent layers")
    }

    pub fn affine(weights: CsrMatrix, bias: Vec<f64>) -> Self {
        Self::from_layers(vec![Layer::new(weights, bias)])
    }

    /// The zero map `R^d → R^out`.
    pub fn zero(d: usize, out: usize) -> Self {
        Self::affine(CsrMatrix::zeros(out, d), vec![0.0; out])
    }

    /// Coordinatewise `max(x, 0)`.
    pub fn relu(d: usize) -> Self {
        Self::from_layers(vec![
            Layer::new(CsrMatrix::identity(d), vec![0.0; d]),
            Layer::new(CsrMatrix::identity(d), vec![0.0; d]),
        ])
    }

    /// Exact identity of the given depth, via `x = η(x) − η(−x)`.
    pub fn identity(d: usize, depth: usize) -> Self {
        assert!(depth >= 1);
        if depth == 1 {
            return Self::affine(CsrMatrix::identity(d), vec![0.0; d]);
        }
        let split = CsrMatrix::from_triplets(
            2 * d,
            d,
            (0..d).flat_map(|i| [(i, i, 1.0), (d + i, i, -1.0)]),
        );
        let join = CsrMatrix::from_triplets(
            d,
            2 * d,
            (0..d).flat_map(|i| [(i, i, 1.0), (i, d + i, -1.0)]),
        );
        let mut layers = vec![Layer::new(split, vec![0.0; 2 * d])];
        for _ in 2..depth {
            layers.push(Layer::new(CsrMatrix::identity(2 * d), vec![0.0; 2 * d]));
        }
        layers.push(Layer::new(join, vec![0.0; d]));
        Self::from_layers(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").out_dim()
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Recounted from the parameters.
    pub fn stats(&self) -> NetStats {
        NetStats {
            depth: self.layers.len(),
            width: self
                .layers
                .iter()
                .map(Layer::out_dim)
                .fold(self.input_dim(), usize::max),
            nonzeros: self.layers.iter().map(Layer::nonzeros).sum(),
            max_abs: self.layers.iter().fold(0.0, |m, l| m.max(l.max_abs())),
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension {
                what: "network input",
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(self.forward(x))
    }

    /// Forward pass without the dimension check.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut h = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.weights.affine(&h, &layer.bias, &mut next);
            if i < last {
                for v in next.iter_mut() {
                    *v = v.max(0.0);
                }
            }
            std::mem::swap(&mut h, &mut next);
        }
        h
    }

    /// Scalar output of a single-output network.
    pub fn eval_scalar(&self, x: &[f64]) -> f64 {
        self.forward(x)[0]
    }

    /// `outer ∘ self`; the adjoining affine maps are merged, so the depth is
    /// `L_self + L_outer − 1`.
    pub fn then(&self, outer: &ReluNetwork) -> ReluNetwork {
        assert_eq!(self.output_dim(), outer.input_dim(), "composition dimensions differ");
        let inner_last = self.layers.last().expect("non-empty");
        let outer_first = &outer.layers[0];
        let w = outer_first.weights.matmul(&inner_last.weights);
        let mut b = outer_first.weights.mul_vec(&inner_last.bias);
        for (bi, o) in b.iter_mut().zip(&outer_first.bias) {
            *bi += o;
        }
        let mut layers = self.layers[..self.layers.len() - 1].to_vec();
        layers.push(Layer::new(w, b));
        layers.extend(outer.layers[1..].iter().cloned());
        Self::from_layers(layers)
    }

    /// `outer ∘ η ∘ self`, depth `L_self + L_outer`.
    pub fn then_relu(&self, outer: &ReluNetwork) -> ReluNetwork {
        self.then(&ReluNetwork::relu(self.output_dim())).then(outer)
    }

    /// Extends the depth by `extra` with an exact identity on the output.
    pub fn padded(&self, extra: usize) -> ReluNetwork {
        if extra == 0 {
            return self.clone();
        }
        self.then(&ReluNetwork::identity(self.output_dim(), extra + 1))
    }

    /// Networks acting on disjoint blocks of the input, outputs concatenated.
    /// Shallower members are padded to a common depth.
    pub fn stack(nets: &[ReluNetwork]) -> ReluNetwork {
        assert!(!nets.is_empty());
        let depth = nets.iter().map(ReluNetwork::depth).max().expect("non-empty");
        let padded: Vec<ReluNetwork> = nets.iter().map(|n| n.padded(depth - n.depth())).collect();
        let layers = (0..depth)
            .map(|l| {
                let blocks: Vec<&CsrMatrix> = padded.iter().map(|n| &n.layers[l].weights).collect();
                let bias = padded.iter().flat_map(|n| n.layers[l].bias.iter().copied()).collect();
                Layer::new(CsrMatrix::block_diag(&blocks), bias)
            })
            .collect();
        Self::from_layers(layers)
    }

    /// Networks sharing one input, outputs concatenated.
    pub fn parallel(nets: &[ReluNetwork]) -> ReluNetwork {
        let d = nets[0].input_dim();
        assert!(nets.iter().all(|n| n.input_dim() == d), "parallel inputs differ");
        let copies = nets.len();
        let fan = CsrMatrix::from_triplets(
            d * copies,
            d,
            (0..copies).flat_map(|c| (0..d).map(move |i| (c * d + i, i, 1.0))),
        );
        ReluNetwork::affine(fan, vec![0.0; d * copies]).then(&ReluNetwork::stack(nets))
    }

    /// `x ↦ self(Ax + b)`; the map is merged into the first layer.
    pub fn precompose(&self, a: &CsrMatrix, b: &[f64]) -> ReluNetwork {
        ReluNetwork::affine(a.clone(), b.to_vec()).then(self)
    }

    /// JSON with row-major CSR weights and a stats block. Floats use the
    /// shortest round-trip decimal form.
    pub fn to_json(&self) -> Result<String> {
        let file = NetworkFile {
            layers: self.layers.clone(),
            stats: self.stats(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    /// Parses [`ReluNetwork::to_json`] output and checks the stats block.
    pub fn from_json(s: &str) -> Result<ReluNetwork> {
        let file: NetworkFile = serde_json::from_str(s)?;
        for (i, l) in file.layers.iter().enumerate() {
            let w = &l.weights;
            let valid = w.indptr.len() == w.rows + 1
                && w.indptr.windows(2).all(|p| p[0] <= p[1])
                && w.indptr.last() == Some(&w.indices.len())
                && w.indices.len() == w.values.len()
                && w.indices.iter().all(|&c| c < w.cols)
                && w.values.iter().all(|&v| v != 0.0 && v.is_finite())
                && l.bias.len() == w.rows;
            if !valid {
                return Err(Error::config(format!("layer {i}: malformed sparse weights")));
            }
        }
        let net = ReluNetwork::new(file.layers)?;
        if net.stats() != file.stats {
            return Err(Error::config("stored network stats do not match the parameters"));
        }
        Ok(net)
    }
}
