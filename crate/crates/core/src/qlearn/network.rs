//! Dense forward/backward passes for the Q-network MLP.

use rand::Rng;
use rand_chacha::ChaCha20Rng;

use super::{NetworkConfig, QNetworkParams, QlearnError, LEAKY_SLOPE};

/// Row-major matrix used for batched network math.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map(|r| r.len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            debug_assert_eq!(row.len(), cols);
            data.extend_from_slice(row);
        }
        Mat {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_nested(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }
}

/// Dot product with four accumulators so the reduction vectorizes.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let a4 = a.chunks_exact(4);
    let b4 = b.chunks_exact(4);
    let rest: f64 = a4
        .remainder()
        .iter()
        .zip(b4.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (ca, cb) in a4.zip(b4) {
        acc[0] += ca[0] * cb[0];
        acc[1] += ca[1] * cb[1];
        acc[2] += ca[2] * cb[2];
        acc[3] += ca[3] * cb[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + rest
}

/// y += alpha * x
#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * *xi;
    }
}

fn leaky(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        LEAKY_SLOPE * z
    }
}

fn leaky_derivative(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

/// Linear layer applied to a batch: out = X W^T + b.
fn linear(layer: &super::Dense, input: &Mat) -> Mat {
    let mut out = Mat::zeros(input.rows, layer.out_dim);
    for r in 0..input.rows {
        let x = input.row(r);
        let row = out.row_mut(r);
        for (o, slot) in row.iter_mut().enumerate() {
            *slot = dot(layer.weight_row(o), x) + layer.biases[o];
        }
    }
    out
}

/// Inference-mode forward pass on raw Q-values (no dropout, no output
/// normalization).
pub(crate) fn forward_raw(params: &QNetworkParams, states: &Mat) -> Mat {
    let last = params.layers.len() - 1;
    let mut current = linear(&params.layers[0], states);
    if last > 0 {
        current.data.iter_mut().for_each(|v| *v = leaky(*v));
    }
    for (li, layer) in params.layers.iter().enumerate().skip(1) {
        current = linear(layer, &current);
        if li < last {
            current.data.iter_mut().for_each(|v| *v = leaky(*v));
        }
    }
    current
}

/// Everything the backward pass needs from a training-mode forward pass.
pub(crate) struct ForwardCache {
    /// activations[l] is the input to layer l; activations[L] is the output.
    pub activations: Vec<Mat>,
    /// Pre-activations of every layer.
    pub zs: Vec<Mat>,
    /// Inverted-dropout masks per hidden layer (empty when dropout is off).
    pub masks: Vec<Mat>,
}

impl ForwardCache {
    pub fn outputs(&self) -> &Mat {
        self.activations.last().expect("non-empty network")
    }
}

/// Training-mode forward pass caching intermediates; applies dropout to
/// hidden activations when a RNG is supplied and the rate is positive.
pub(crate) fn forward_cached(
    params: &QNetworkParams,
    config: &NetworkConfig,
    states: &Mat,
    mut dropout_rng: Option<&mut ChaCha20Rng>,
) -> ForwardCache {
    let last = params.layers.len() - 1;
    let dropout = config.dropout_rate;
    let mut activations = vec![states.clone()];
    let mut zs = Vec::with_capacity(params.layers.len());
    let mut masks = Vec::new();
    for (li, layer) in params.layers.iter().enumerate() {
        let z = linear(layer, activations.last().expect("input present"));
        let mut a = z.clone();
        if li < last {
            a.data.iter_mut().for_each(|v| *v = leaky(*v));
            if dropout > 0.0 {
                if let Some(rng) = dropout_rng.as_deref_mut() {
                    let keep = 1.0 - dropout;
                    let mut mask = Mat::zeros(a.rows, a.cols);
                    for (m, v) in mask.data.iter_mut().zip(a.data.iter_mut()) {
                        if rng.gen::<f64>() < keep {
                            *m = 1.0 / keep;
                            *v *= *m;
                        } else {
                            *m = 0.0;
                            *v = 0.0;
                        }
                    }
                    masks.push(mask);
                }
            }
        }
        zs.push(z);
        activations.push(a);
    }
    ForwardCache {
        activations,
        zs,
        masks,
    }
}

/// Per-layer parameter gradients, same layout as [`super::Dense`].
pub(crate) struct Gradients {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

/// Backpropagate `dloss_dout` (gradient of the loss w.r.t. the network
/// output, batch-major) through the cached forward pass.
pub(crate) fn backward(
    params: &QNetworkParams,
    cache: &ForwardCache,
    dloss_dout: &Mat,
) -> Gradients {
    let num_layers = params.layers.len();
    let mut grads: Vec<(Vec<f64>, Vec<f64>)> = params
        .layers
        .iter()
        .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.out_dim]))
        .collect();
    // The output layer is linear, so its pre-activation gradient is the
    // loss gradient itself.
    let mut delta = dloss_dout.clone();
    for li in (0..num_layers).rev() {
        let layer = &params.layers[li];
        let input = &cache.activations[li];
        let (dw, db) = &mut grads[li];
        for b in 0..delta.rows {
            let d_row = delta.row(b);
            let x_row = input.row(b);
            for (o, &d) in d_row.iter().enumerate() {
                if d != 0.0 {
                    axpy(d, x_row, &mut dw[o * layer.in_dim..(o + 1) * layer.in_dim]);
                    db[o] += d;
                }
            }
        }
        if li == 0 {
            break;
        }
        // Propagate to the previous layer's activations, then through
        // dropout and the leaky activation.
        let mut prev = Mat::zeros(delta.rows, layer.in_dim);
        for b in 0..delta.rows {
            let d_row = delta.row(b);
            let out_row = prev.row_mut(b);
            for (o, &d) in d_row.iter().enumerate() {
                if d != 0.0 {
                    axpy(d, layer.weight_row(o), out_row);
                }
            }
        }
        let z_prev = &cache.zs[li - 1];
        if let Some(mask) = cache.masks.get(li - 1) {
            for ((v, &m), &z) in prev.data.iter_mut().zip(&mask.data).zip(&z_prev.data) {
                *v *= m * leaky_derivative(z);
            }
        } else {
            for (v, &z) in prev.data.iter_mut().zip(&z_prev.data) {
                *v *= leaky_derivative(z);
            }
        }
        delta = prev;
    }
    Gradients { layers: grads }
}

/// Plain gradient-descent update: w <- w - lr * dw.
pub(crate) fn apply_sgd(params: &mut QNetworkParams, grads: &Gradients, lr: f64) {
    for (layer, (dw, db)) in params.layers.iter_mut().zip(&grads.layers) {
        axpy(-lr, dw, &mut layer.weights);
        axpy(-lr, db, &mut layer.biases);
    }
}

/// Lowest-index argmax.
pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    let _ = row[best];
    best
}

/// Min-max rescale each row to [0,1]; constant rows map to all zeros.
fn normalize_rows(mat: &mut Mat) {
    for r in 0..mat.rows {
        let row = mat.row_mut(r);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in row.iter() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let range = hi - lo;
        for v in row.iter_mut() {
            *v = if range == 0.0 { 0.0 } else { (*v - lo) / range };
        }
    }
}

/// Batched Q-values in inference mode: deterministic, dropout inactive.
/// With `output_normalization` each row is min-max rescaled to [0,1].
pub fn forward(
    params: &QNetworkParams,
    config: &NetworkConfig,
    states: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>, QlearnError> {
    params.check_config(config)?;
    for (i, state) in states.iter().enumerate() {
        if state.len() != config.input_dim {
            return Err(QlearnError::ShapeMismatch(format!(
                "state {i} has width {}, expected {}",
                state.len(),
                config.input_dim
            )));
        }
    }
    if states.is_empty() {
        return Ok(Vec::new());
    }
    let rows: Vec<&[f64]> = states.iter().map(|s| s.as_slice()).collect();
    let mut out = forward_raw(params, &Mat::from_rows(&rows));
    if config.output_normalization {
        normalize_rows(&mut out);
    }
    Ok(out.to_nested())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn toy_config(input: usize, hidden: Vec<usize>, output: usize) -> NetworkConfig {
        NetworkConfig {
            input_dim: input,
            hidden_layers: hidden,
            output_dim: output,
            dropout_rate: 0.0,
            output_normalization: false,
        }
    }

    /// Straightforward per-element reference forward pass.
    fn reference_forward(params: &QNetworkParams, state: &[f64]) -> Vec<f64> {
        let mut current = state.to_vec();
        let last = params.layers.len() - 1;
        for (li, layer) in params.layers.iter().enumerate() {
            let mut next = vec![0.0; layer.out_dim];
            for (o, slot) in next.iter_mut().enumerate() {
                let mut acc = layer.biases[o];
                for (i, &x) in current.iter().enumerate() {
                    acc += layer.weights[o * layer.in_dim + i] * x;
                }
                *slot = acc;
            }
            if li < last {
                for v in next.iter_mut() {
                    *v = if *v > 0.0 { *v } else { LEAKY_SLOPE * *v };
                }
            }
            current = next;
        }
        current
    }

    #[test]
    fn zero_params_give_zero_q_values() {
        let config = toy_config(4, vec![3], 2);
        let mut params = QNetworkParams::init(&config, 0);
        for layer in &mut params.layers {
            layer.weights.iter_mut().for_each(|w| *w = 0.0);
        }
        let out = forward(&params, &config, &[vec![1.0, -2.0, 3.0, 4.0]]).unwrap();
        assert_eq!(out, vec![vec![0.0, 0.0]]);
    }

    #[test]
    fn single_linear_layer_reads_weight_column() {
        let config = toy_config(3, vec![], 2);
        let mut params = QNetworkParams::init(&config, 0);
        params.layers[0].weights = vec![
            1.0, 2.0, 3.0, // unit 0
            4.0, 5.0, 6.0, // unit 1
        ];
        params.layers[0].biases = vec![0.0, 0.0];
        // basis vector e_0 picks out the first weight column
        let out = forward(&params, &config, &[vec![1.0, 0.0, 0.0]]).unwrap();
        assert_eq!(out, vec![vec![1.0, 4.0]]);
    }

    #[test]
    fn forward_matches_independent_implementation() {
        let config = toy_config(10, vec![7, 5], 3);
        let params = QNetworkParams::init(&config, 42);
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let states: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let out = forward(&params, &config, &states).unwrap();
        assert_eq!(out.len(), 4);
        for (state, row) in states.iter().zip(&out) {
            assert_eq!(row.len(), 3);
            assert!(row.iter().all(|v| v.is_finite()));
            let reference = reference_forward(&params, state);
            for (a, b) in row.iter().zip(&reference) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn forward_rejects_wrong_state_width() {
        let config = toy_config(4, vec![3], 2);
        let params = QNetworkParams::init(&config, 0);
        assert!(matches!(
            forward(&params, &config, &[vec![1.0, 2.0]]),
            Err(QlearnError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn output_normalization_rescales_rows_monotonically() {
        let config = NetworkConfig {
            output_normalization: true,
            ..toy_config(2, vec![4], 3)
        };
        let params = QNetworkParams::init(&config, 3);
        let raw_config = NetworkConfig {
            output_normalization: false,
            ..config.clone()
        };
        let state = vec![0.3, -0.7];
        let raw = forward(&params, &raw_config, &[state.clone()]).unwrap();
        let scaled = forward(&params, &config, &[state]).unwrap();
        let lo = scaled[0].iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = scaled[0].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(lo, 0.0);
        assert_eq!(hi, 1.0);
        assert_eq!(argmax(&raw[0]), argmax(&scaled[0]));
    }

    #[test]
    fn argmax_breaks_ties_to_lowest_index() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.1, 0.9, 0.3]), 1);
        assert_eq!(argmax(&[0.3, 0.9, 0.9]), 1);
    }

    #[test]
    fn dropout_scales_or_zeroes_activations() {
        let config = NetworkConfig {
            dropout_rate: 0.5,
            ..toy_config(2, vec![8], 2)
        };
        let params = QNetworkParams::init(&config, 1);
        let rows: Vec<&[f64]> = vec![&[1.0, 1.0]];
        let states = Mat::from_rows(&rows);
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let cache = forward_cached(&params, &config, &states, Some(&mut rng));
        assert_eq!(cache.masks.len(), 1);
        assert!(cache.masks[0].data.iter().all(|&m| m == 0.0 || m == 2.0));
        // inference path has no masks
        let cache = forward_cached(&params, &config, &states, None);
        assert!(cache.masks.is_empty());
    }
}
