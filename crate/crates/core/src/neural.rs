//! Two stacked LSTM layers, dropout, a dense softmax head, categorical
//! cross-entropy, backpropagation through time and RMSProp.
//!
//! Everything runs in `f64` on `ndarray` matrices. Gate blocks in every
//! kernel are laid out as `[input | forget | candidate | output]`.

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::{LexiconError, Vocabulary};

pub const DEFAULT_UNITS1: usize = 128;
pub const DEFAULT_UNITS2: usize = 64;
pub const DEFAULT_DROPOUT: f64 = 0.2;
pub const CHECKPOINT_VERSION: u32 = 1;

/// Probabilities are clamped here before taking the logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("target index {target} out of range for {size} classes")]
    TargetOutOfRange { target: usize, size: usize },
    #[error("non-finite gradient in {0}")]
    NonFiniteGradient(&'static str),
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("inconsistent checkpoint: {0}")]
    Inconsistent(String),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(#[from] serde_json::Error),
    #[error(transparent)]
    Vocabulary(#[from] LexiconError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-layer and total trainable parameter counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCount {
    pub layer1: usize,
    pub layer2: usize,
    pub dense: usize,
    pub total: usize,
}

pub fn param_count(vocab: usize, units1: usize, units2: usize) -> ParamCount {
    let lstm = |input: usize, units: usize| 4 * ((input + units) * units + units);
    let layer1 = lstm(vocab, units1);
    let layer2 = lstm(units1, units2);
    let dense = units2 * vocab + vocab;
    ParamCount {
        layer1,
        layer2,
        dense,
        total: layer1 + layer2 + dense,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayerParams {
    /// `(input_dim, 4·units)`
    pub w: Array2<f64>,
    /// `(units, 4·units)`
    pub u: Array2<f64>,
    /// `(4·units)`
    pub b: Array1<f64>,
}

impl LstmLayerParams {
    pub fn zeros(input_dim: usize, units: usize) -> Self {
        LstmLayerParams {
            w: Array2::zeros((input_dim, 4 * units)),
            u: Array2::zeros((units, 4 * units)),
            b: Array1::zeros(4 * units),
        }
    }

    /// Glorot-uniform kernels, forget-gate bias 1, other biases 0.
    pub fn glorot<R: Rng>(input_dim: usize, units: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(input_dim, units);
        let lw = (6.0 / (input_dim + 4 * units) as f64).sqrt();
        p.w.mapv_inplace(|_| rng.gen_range(-lw..lw));
        let lu = (6.0 / (units + 4 * units) as f64).sqrt();
        p.u.mapv_inplace(|_| rng.gen_range(-lu..lu));
        p.b.slice_mut(s![units..2 * units]).fill(1.0);
        p
    }

    pub fn input_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn units(&self) -> usize {
        self.u.nrows()
    }

    pub fn element_count(&self) -> usize {
        self.w.len() + self.u.len() + self.b.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    /// `(units2, vocab)`
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// Weights of the full stack. Gradients and optimizer accumulators reuse
/// [`Tensors`], which has the same shapes without the dropout rate.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub tensors: Tensors,
    pub dropout_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensors {
    pub layer1: LstmLayerParams,
    pub layer2: LstmLayerParams,
    pub dense: DenseParams,
}

impl Tensors {
    pub fn zeros(vocab: usize, units1: usize, units2: usize) -> Self {
        Tensors {
            layer1: LstmLayerParams::zeros(vocab, units1),
            layer2: LstmLayerParams::zeros(units1, units2),
            dense: DenseParams {
                w: Array2::zeros((units2, vocab)),
                b: Array1::zeros(vocab),
            },
        }
    }

    pub fn zeros_like(other: &Tensors) -> Self {
        Self::zeros(other.vocab_size(), other.layer1.units(), other.layer2.units())
    }

    pub fn vocab_size(&self) -> usize {
        self.dense.b.len()
    }

    pub fn element_count(&self) -> usize {
        self.layer1.element_count() + self.layer2.element_count() + self.dense.w.len() + self.dense.b.len()
    }

    pub const NAMES: [&'static str; 8] = [
        "lstm_1.W", "lstm_1.U", "lstm_1.b", "lstm_2.W", "lstm_2.U", "lstm_2.b", "dense_1.W", "dense_1.b",
    ];

    /// Flat views in a fixed order (see [`Tensors::NAMES`]).
    pub fn slices(&self) -> [&[f64]; 8] {
        fn v(a: Option<&[f64]>) -> &[f64] {
            a.expect("standard layout")
        }
        [
            v(self.layer1.w.as_slice()),
            v(self.layer1.u.as_slice()),
            v(self.layer1.b.as_slice()),
            v(self.layer2.w.as_slice()),
            v(self.layer2.u.as_slice()),
            v(self.layer2.b.as_slice()),
            v(self.dense.w.as_slice()),
            v(self.dense.b.as_slice()),
        ]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 8] {
        fn v(a: Option<&mut [f64]>) -> &mut [f64] {
            a.expect("standard layout")
        }
        [
            v(self.layer1.w.as_slice_mut()),
            v(self.layer1.u.as_slice_mut()),
            v(self.layer1.b.as_slice_mut()),
            v(self.layer2.w.as_slice_mut()),
            v(self.layer2.u.as_slice_mut()),
            v(self.layer2.b.as_slice_mut()),
            v(self.dense.w.as_slice_mut()),
            v(self.dense.b.as_slice_mut()),
        ]
    }

    pub fn global_norm(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for s in self.slices_mut() {
            s.iter_mut().for_each(|x| *x *= factor);
        }
    }

    fn same_shape(&self, other: &Tensors) -> bool {
        self.slices()
            .iter()
            .zip(other.slices().iter())
            .all(|(a, b)| a.len() == b.len())
            && self.layer1.w.dim() == other.layer1.w.dim()
            && self.layer2.w.dim() == other.layer2.w.dim()
    }
}

impl LstmParams {
    pub fn new<R: Rng>(vocab: usize, units1: usize, units2: usize, dropout_rate: f64, rng: &mut R) -> Self {
        let layer1 = LstmLayerParams::glorot(vocab, units1, rng);
        let layer2 = LstmLayerParams::glorot(units1, units2, rng);
        let lim = (6.0 / (units2 + vocab) as f64).sqrt();
        let mut w = Array2::zeros((units2, vocab));
        w.mapv_inplace(|_: f64| rng.gen_range(-lim..lim));
        LstmParams {
            tensors: Tensors {
                layer1,
                layer2,
                dense: DenseParams {
                    w,
                    b: Array1::zeros(vocab),
                },
            },
            dropout_rate,
        }
    }

    pub fn zeros(vocab: usize, units1: usize, units2: usize, dropout_rate: f64) -> Self {
        LstmParams {
            tensors: Tensors::zeros(vocab, units1, units2),
            dropout_rate,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.tensors.vocab_size()
    }

    pub fn element_count(&self) -> usize {
        self.tensors.element_count()
    }
}

/// Activations of one layer over a sequence; one entry per time step, each
/// `(batch, ·)`.
#[derive(Debug, Clone)]
pub struct LayerTrace {
    /// post-activation gates `(batch, 4·units)`
    pub gates: Vec<Array2<f64>>,
    pub cell: Vec<Array2<f64>>,
    pub cell_tanh: Vec<Array2<f64>>,
    pub hidden: Vec<Array2<f64>>,
}

impl LayerTrace {
    /// Hidden states of batch row `row` stacked as `(seq_len, units)`.
    pub fn hidden_sequence(&self, row: usize) -> Array2<f64> {
        stack_rows(&self.hidden, row)
    }

    pub fn cell_sequence(&self, row: usize) -> Array2<f64> {
        stack_rows(&self.cell, row)
    }
}

fn stack_rows(steps: &[Array2<f64>], row: usize) -> Array2<f64> {
    let units = steps.first().map_or(0, |a| a.ncols());
    let mut out = Array2::zeros((steps.len(), units));
    for (t, a) in steps.iter().enumerate() {
        out.row_mut(t).assign(&a.row(row));
    }
    out
}

#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub inputs: Vec<Array2<f64>>,
    pub layer1: LayerTrace,
    pub layer2: LayerTrace,
    /// Inverted-dropout multipliers on the final hidden state; all ones at inference.
    pub dropout_mask: Array2<f64>,
    pub probs: Array2<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn layer_forward(p: &LstmLayerParams, xs: &[Array2<f64>], keep: bool) -> LayerTrace {
    let units = p.units();
    let batch = xs.first().map_or(0, |x| x.nrows());
    let mut h = Array2::<f64>::zeros((batch, units));
    let mut c = Array2::<f64>::zeros((batch, units));
    let mut trace = LayerTrace {
        gates: Vec::new(),
        cell: Vec::new(),
        cell_tanh: Vec::new(),
        hidden: Vec::new(),
    };
    for x in xs {
        let mut z = x.dot(&p.w) + h.dot(&p.u);
        z += &p.b;
        z.slice_mut(s![.., 0..2 * units]).mapv_inplace(sigmoid);
        z.slice_mut(s![.., 2 * units..3 * units]).mapv_inplace(f64::tanh);
        z.slice_mut(s![.., 3 * units..]).mapv_inplace(sigmoid);
        let (i, f, g, o) = gate_views(z.view(), units);
        let mut c_next = Array2::zeros((batch, units));
        Zip::from(&mut c_next)
            .and(&c)
            .and(&i)
            .and(&f)
            .and(&g)
            .for_each(|cn, &cp, &i, &f, &g| *cn = f * cp + i * g);
        let tc = c_next.mapv(f64::tanh);
        let h_next = &o * &tc;
        if keep {
            trace.gates.push(z);
            trace.cell.push(c_next.clone());
            trace.cell_tanh.push(tc);
            trace.hidden.push(h_next.clone());
        } else if trace.hidden.is_empty() {
            trace.hidden.push(h_next.clone());
        } else {
            trace.hidden[0] = h_next.clone();
        }
        c = c_next;
        h = h_next;
    }
    trace
}

fn gate_views(z: ArrayView2<'_, f64>, units: usize) -> (ArrayView2<'_, f64>, ArrayView2<'_, f64>, ArrayView2<'_, f64>, ArrayView2<'_, f64>) {
    let (a, rest) = z.split_at(Axis(1), units);
    let (b, rest) = rest.split_at(Axis(1), units);
    let (c, d) = rest.split_at(Axis(1), units);
    (a, b, c, d)
}

/// Row-wise softmax of logits.
pub fn softmax(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

fn check_inputs(params: &LstmParams, xs: &[Array2<f64>]) -> Result<(), NeuralError> {
    let vocab = params.vocab_size();
    let batch = xs.first().map_or(0, |x| x.nrows());
    if xs.is_empty() {
        return Err(NeuralError::Shape("empty input sequence".into()));
    }
    if params.tensors.layer1.input_dim() != vocab {
        return Err(NeuralError::Shape("layer 1 input width differs from vocabulary".into()));
    }
    for x in xs {
        if x.ncols() != vocab || x.nrows() != batch {
            return Err(NeuralError::Shape(format!(
                "step input {:?}, expected ({batch}, {vocab})",
                x.dim()
            )));
        }
    }
    Ok(())
}

/// Forward pass over a batch. `xs[t]` is the `(batch, vocab)` input at step t.
/// With `training`, inverted dropout is applied to the final hidden state.
pub fn forward_batch<R: Rng>(
    params: &LstmParams,
    xs: &[Array2<f64>],
    training: bool,
    rng: &mut R,
) -> Result<ForwardTrace, NeuralError> {
    check_inputs(params, xs)?;
    let t = &params.tensors;
    let layer1 = layer_forward(&t.layer1, xs, true);
    let layer2 = layer_forward(&t.layer2, &layer1.hidden, true);
    let last = layer2.hidden.last().expect("non-empty sequence");
    let mut mask = Array2::from_elem(last.dim(), 1.0);
    if training && params.dropout_rate > 0.0 {
        let keep = 1.0 - params.dropout_rate;
        mask.mapv_inplace(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 });
    }
    let dropped = last * &mask;
    let logits = dropped.dot(&t.dense.w) + &t.dense.b;
    let probs = softmax(&logits);
    Ok(ForwardTrace {
        inputs: xs.to_vec(),
        layer1,
        layer2,
        dropout_mask: mask,
        probs,
    })
}

/// Forward pass for a single one-hot sequence of shape `(seq_len, vocab)`.
pub fn lstm_forward<R: Rng>(
    params: &LstmParams,
    input: &Array2<f64>,
    training: bool,
    rng: &mut R,
) -> Result<ForwardTrace, NeuralError> {
    let xs: Vec<Array2<f64>> = input
        .rows()
        .into_iter()
        .map(|r| r.to_owned().insert_axis(Axis(0)))
        .collect();
    forward_batch(params, &xs, training, rng)
}

/// Builds `(batch, vocab)` one-hot step inputs from equal-length index sequences.
pub fn one_hot_steps(sequences: &[&[usize]], vocab: usize) -> Vec<Array2<f64>> {
    let len = sequences.first().map_or(0, |s| s.len());
    (0..len)
        .map(|t| {
            let mut x = Array2::zeros((sequences.len(), vocab));
            for (row, seq) in sequences.iter().enumerate() {
                x[[row, seq[t]]] = 1.0;
            }
            x
        })
        .collect()
}

/// Next-symbol distributions for a batch of equal-length index sequences,
/// without dropout and without keeping intermediate activations.
pub fn predict(params: &LstmParams, sequences: &[&[usize]]) -> Result<Array2<f64>, NeuralError> {
    let vocab = params.vocab_size();
    if sequences.iter().flat_map(|s| s.iter()).any(|&i| i >= vocab) {
        return Err(NeuralError::Shape("symbol index outside the vocabulary".into()));
    }
    if sequences.is_empty() || sequences[0].is_empty() {
        // empty context: zero state straight into the head
        let mut logits = Array2::zeros((sequences.len().max(1), vocab));
        logits += &params.tensors.dense.b;
        return Ok(softmax(&logits));
    }
    let xs = one_hot_steps(sequences, vocab);
    check_inputs(params, &xs)?;
    let t = &params.tensors;
    let l1 = layer_forward(&t.layer1, &xs, true);
    let l2 = layer_forward(&t.layer2, &l1.hidden, false);
    let logits = l2.hidden[0].dot(&t.dense.w) + &t.dense.b;
    Ok(softmax(&logits))
}

/// Recurrent state of both layers for a batch of sequences advanced one
/// symbol at a time from zero.
#[derive(Debug, Clone)]
pub struct StepState {
    h1: Array2<f64>,
    c1: Array2<f64>,
    h2: Array2<f64>,
    c2: Array2<f64>,
}

impl StepState {
    pub fn zeros(params: &LstmParams, batch: usize) -> Self {
        let (u1, u2) = (params.tensors.layer1.units(), params.tensors.layer2.units());
        StepState {
            h1: Array2::zeros((batch, u1)),
            c1: Array2::zeros((batch, u1)),
            h2: Array2::zeros((batch, u2)),
            c2: Array2::zeros((batch, u2)),
        }
    }

    pub fn batch(&self) -> usize {
        self.h1.nrows()
    }

    /// Keeps only the listed rows, in the given order.
    pub fn retain_rows(&mut self, rows: &[usize]) {
        for a in [&mut self.h1, &mut self.c1, &mut self.h2, &mut self.c2] {
            *a = a.select(Axis(0), rows);
        }
    }
}

fn cell_step(p: &LstmLayerParams, x: &Array2<f64>, h: &mut Array2<f64>, c: &mut Array2<f64>) {
    let units = p.units();
    let mut z = x.dot(&p.w) + h.dot(&p.u);
    z += &p.b;
    z.slice_mut(s![.., 0..2 * units]).mapv_inplace(sigmoid);
    z.slice_mut(s![.., 2 * units..3 * units]).mapv_inplace(f64::tanh);
    z.slice_mut(s![.., 3 * units..]).mapv_inplace(sigmoid);
    let (i, f, g, o) = gate_views(z.view(), units);
    Zip::from(&mut *c)
        .and(&i)
        .and(&f)
        .and(&g)
        .for_each(|c, &i, &f, &g| *c = f * *c + i * g);
    Zip::from(&mut *h)
        .and(&o)
        .and(&*c)
        .for_each(|h, &o, &c| *h = o * c.tanh());
}

/// Feeds one symbol per row and returns the next-symbol distributions.
/// Equivalent to [`predict`] on the full prefix seen so far.
pub fn step(params: &LstmParams, state: &mut StepState, symbols: &[usize]) -> Result<Array2<f64>, NeuralError> {
    let vocab = params.vocab_size();
    if symbols.len() != state.batch() {
        return Err(NeuralError::Shape(format!("{} symbols for batch of {}", symbols.len(), state.batch())));
    }
    let mut x = Array2::zeros((symbols.len(), vocab));
    for (row, &sym) in symbols.iter().enumerate() {
        if sym >= vocab {
            return Err(NeuralError::Shape("symbol index outside the vocabulary".into()));
        }
        x[[row, sym]] = 1.0;
    }
    let t = &params.tensors;
    cell_step(&t.layer1, &x, &mut state.h1, &mut state.c1);
    cell_step(&t.layer2, &state.h1, &mut state.h2, &mut state.c2);
    let logits = state.h2.dot(&t.dense.w) + &t.dense.b;
    Ok(softmax(&logits))
}

/// `-ln p[target]`, with `p` clamped at [`PROB_FLOOR`].
pub fn cross_entropy(probs: &[f64], target: usize) -> Result<f64, NeuralError> {
    let p = probs.get(target).ok_or(NeuralError::TargetOutOfRange {
        target,
        size: probs.len(),
    })?;
    Ok(-p.max(PROB_FLOOR).ln())
}

/// Mean cross-entropy over the rows of a batch.
pub fn batch_loss(probs: &Array2<f64>, targets: &[usize]) -> Result<f64, NeuralError> {
    let mut total = 0.0;
    for (row, &t) in probs.rows().into_iter().zip(targets) {
        total += cross_entropy(row.as_slice().expect("contiguous row"), t)?;
    }
    Ok(total / targets.len() as f64)
}

fn layer_backward(
    p: &LstmLayerParams,
    trace: &LayerTrace,
    xs: &[Array2<f64>],
    dh_out: &[Option<Array2<f64>>],
    grads: &mut LstmLayerParams,
    want_dx: bool,
) -> Vec<Array2<f64>> {
    let units = p.units();
    let steps = xs.len();
    let batch = xs[0].nrows();
    let mut dh_next = Array2::<f64>::zeros((batch, units));
    let mut dc_next = Array2::<f64>::zeros((batch, units));
    let zeros = Array2::<f64>::zeros((batch, units));
    let mut dxs = vec![Array2::zeros((0, 0)); if want_dx { steps } else { 0 }];
    let mut dz = Array2::<f64>::zeros((batch, 4 * units));
    for t in (0..steps).rev() {
        let mut dh = dh_next.clone();
        if let Some(extra) = &dh_out[t] {
            dh += extra;
        }
        let a = &trace.gates[t];
        let (i, f, g, o) = gate_views(a.view(), units);
        let tc = &trace.cell_tanh[t];
        let c_prev = if t > 0 { &trace.cell[t - 1] } else { &zeros };
        let h_prev = if t > 0 { &trace.hidden[t - 1] } else { &zeros };
        let mut dc = dc_next.clone();
        Zip::from(&mut dc)
            .and(&dh)
            .and(&o)
            .and(tc)
            .for_each(|dc, &dh, &o, &tc| *dc += dh * o * (1.0 - tc * tc));
        {
            let (mut di, rest) = dz.view_mut().split_at(Axis(1), units);
            let (mut df, rest) = rest.split_at(Axis(1), units);
            let (mut dg, mut dout) = rest.split_at(Axis(1), units);
            Zip::from(&mut di)
                .and(&dc)
                .and(&i)
                .and(&g)
                .for_each(|d, &dc, &i, &g| *d = dc * g * i * (1.0 - i));
            Zip::from(&mut df)
                .and(&dc)
                .and(&f)
                .and(c_prev)
                .for_each(|d, &dc, &f, &cp| *d = dc * cp * f * (1.0 - f));
            Zip::from(&mut dg)
                .and(&dc)
                .and(&i)
                .and(&g)
                .for_each(|d, &dc, &i, &g| *d = dc * i * (1.0 - g * g));
            Zip::from(&mut dout)
                .and(&dh)
                .and(&o)
                .and(tc)
                .for_each(|d, &dh, &o, &tc| *d = dh * tc * o * (1.0 - o));
        }
        dc_next = &dc * &f;
        grads.w += &xs[t].t().dot(&dz);
        grads.u += &h_prev.t().dot(&dz);
        grads.b += &dz.sum_axis(Axis(0));
        dh_next = dz.dot(&p.u.t());
        if want_dx {
            dxs[t] = dz.dot(&p.w.t());
        }
    }
    dxs
}

/// Gradients of the mean batch cross-entropy with respect to every weight,
/// by backpropagation through time across both layers. The dropout mask
/// stored in the trace is reused.
pub fn backward(params: &LstmParams, trace: &ForwardTrace, targets: &[usize]) -> Result<Tensors, NeuralError> {
    let t = &params.tensors;
    let vocab = params.vocab_size();
    let batch = trace.probs.nrows();
    if targets.len() != batch {
        return Err(NeuralError::Shape(format!("{} targets for batch of {batch}", targets.len())));
    }
    if let Some(&bad) = targets.iter().find(|&&x| x >= vocab) {
        return Err(NeuralError::TargetOutOfRange { target: bad, size: vocab });
    }
    let mut grads = Tensors::zeros_like(t);
    let mut dlogits = trace.probs.clone();
    for (row, &target) in targets.iter().enumerate() {
        dlogits[[row, target]] -= 1.0;
    }
    dlogits /= batch as f64;
    let last = trace.layer2.hidden.last().expect("non-empty trace");
    let dropped = last * &trace.dropout_mask;
    grads.dense.w = dropped.t().dot(&dlogits);
    grads.dense.b = dlogits.sum_axis(Axis(0));
    let dh_last = dlogits.dot(&t.dense.w.t()) * &trace.dropout_mask;

    let steps = trace.inputs.len();
    let mut dh2: Vec<Option<Array2<f64>>> = vec![None; steps];
    dh2[steps - 1] = Some(dh_last);
    let dx2 = layer_backward(&t.layer2, &trace.layer2, &trace.layer1.hidden, &dh2, &mut grads.layer2, true);
    let dh1: Vec<Option<Array2<f64>>> = dx2.into_iter().map(Some).collect();
    layer_backward(&t.layer1, &trace.layer1, &trace.inputs, &dh1, &mut grads.layer1, false);
    Ok(grads)
}

/// RMSProp hyper-parameters and per-weight mean-square accumulators.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub accum: Tensors,
    pub rho: f64,
    pub epsilon: f64,
    pub learning_rate: f64,
}

impl OptimizerState {
    pub fn new(params: &LstmParams, learning_rate: f64) -> Self {
        OptimizerState {
            accum: Tensors::zeros_like(&params.tensors),
            rho: 0.9,
            epsilon: 1e-7,
            learning_rate,
        }
    }
}

/// `v ← ρ·v + (1−ρ)·g²;  p ← p − lr·g / (√v + ε)`
pub fn rmsprop_step(params: &mut LstmParams, grads: &Tensors, state: &mut OptimizerState) -> Result<(), NeuralError> {
    if !params.tensors.same_shape(grads) || !params.tensors.same_shape(&state.accum) {
        return Err(NeuralError::Shape("gradient or accumulator shape differs from parameters".into()));
    }
    for (name, g) in Tensors::NAMES.iter().zip(grads.slices()) {
        if g.iter().any(|x| !x.is_finite()) {
            return Err(NeuralError::NonFiniteGradient(name));
        }
    }
    let (rho, eps, lr) = (state.rho, state.epsilon, state.learning_rate);
    for ((p, g), v) in params
        .tensors
        .slices_mut()
        .into_iter()
        .zip(grads.slices())
        .zip(state.accum.slices_mut())
    {
        for ((p, &g), v) in p.iter_mut().zip(g).zip(v.iter_mut()) {
            *v = rho * *v + (1.0 - rho) * g * g;
            *p -= lr * g / (v.sqrt() + eps);
        }
    }
    Ok(())
}

/// Rescales gradients so that their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut Tensors, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm && norm > 0.0 {
        grads.scale(max_norm / norm);
    }
    norm
}

#[derive(Debug, Serialize, Deserialize)]
struct LayerRecord {
    name: String,
    input_dim: usize,
    units: usize,
    #[serde(rename = "W")]
    w: Vec<f64>,
    #[serde(rename = "U")]
    u: Vec<f64>,
    b: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DenseRecord {
    #[serde(rename = "W")]
    w: Vec<f64>,
    b: Vec<f64>,
}

/// How the weights were first initialized; informational.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitInfo {
    pub kernel: String,
    pub forget_bias: f64,
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointFile {
    format_version: u32,
    vocabulary: Vec<String>,
    dropout_rate: f64,
    layers: Vec<LayerRecord>,
    dense: DenseRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initialization: Option<InitInfo>,
}

fn layer_record(name: &str, p: &LstmLayerParams) -> LayerRecord {
    LayerRecord {
        name: name.to_string(),
        input_dim: p.input_dim(),
        units: p.units(),
        w: p.w.iter().copied().collect(),
        u: p.u.iter().copied().collect(),
        b: p.b.to_vec(),
    }
}

fn layer_from_record(r: &LayerRecord) -> Result<LstmLayerParams, NeuralError> {
    let g = 4 * r.units;
    let bad = |what: &str| NeuralError::Inconsistent(format!("{}: {what} has the wrong length", r.name));
    let w = Array2::from_shape_vec((r.input_dim, g), r.w.clone()).map_err(|_| bad("W"))?;
    let u = Array2::from_shape_vec((r.units, g), r.u.clone()).map_err(|_| bad("U"))?;
    if r.b.len() != g {
        return Err(bad("b"));
    }
    Ok(LstmLayerParams {
        w,
        u,
        b: Array1::from(r.b.clone()),
    })
}

/// JSON checkpoint text for `params` and the vocabulary they were trained on.
pub fn checkpoint_json(params: &LstmParams, vocab: &Vocabulary, init: Option<InitInfo>) -> String {
    let t = &params.tensors;
    let file = CheckpointFile {
        format_version: CHECKPOINT_VERSION,
        vocabulary: vocab.entries(),
        dropout_rate: params.dropout_rate,
        layers: vec![layer_record("lstm_1", &t.layer1), layer_record("lstm_2", &t.layer2)],
        dense: DenseRecord {
            w: t.dense.w.iter().copied().collect(),
            b: t.dense.b.to_vec(),
        },
        initialization: init,
    };
    serde_json::to_string(&file).expect("checkpoint serializes")
}

pub fn checkpoint_from_json(text: &str) -> Result<(LstmParams, Vocabulary), NeuralError> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let version = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| NeuralError::Inconsistent("missing format_version".into()))?;
    if version != u64::from(CHECKPOINT_VERSION) {
        return Err(NeuralError::Version(version as u32));
    }
    let file: CheckpointFile = serde_json::from_value(value)?;
    let vocab = Vocabulary::from_entries(&file.vocabulary)?;
    if file.layers.len() != 2 {
        return Err(NeuralError::Inconsistent(format!("expected 2 LSTM layers, found {}", file.layers.len())));
    }
    let layer1 = layer_from_record(&file.layers[0])?;
    let layer2 = layer_from_record(&file.layers[1])?;
    if layer1.input_dim() != vocab.len() {
        return Err(NeuralError::Inconsistent("first layer input width differs from vocabulary size".into()));
    }
    if layer2.input_dim() != layer1.units() {
        return Err(NeuralError::Inconsistent("second layer input width differs from first layer units".into()));
    }
    if file.dense.b.len() != vocab.len() {
        return Err(NeuralError::Inconsistent(format!(
            "dense output {} differs from vocabulary size {}",
            file.dense.b.len(),
            vocab.len()
        )));
    }
    let w = Array2::from_shape_vec((layer2.units(), vocab.len()), file.dense.w)
        .map_err(|_| NeuralError::Inconsistent("dense W has the wrong length".into()))?;
    if !(0.0..1.0).contains(&file.dropout_rate) {
        return Err(NeuralError::Inconsistent("dropout rate outside [0, 1)".into()));
    }
    Ok((
        LstmParams {
            tensors: Tensors {
                layer1,
                layer2,
                dense: DenseParams {
                    w,
                    b: Array1::from(file.dense.b),
                },
            },
            dropout_rate: file.dropout_rate,
        },
        vocab,
    ))
}

pub fn save_checkpoint(
    params: &LstmParams,
    vocab: &Vocabulary,
    path: &std::path::Path,
) -> Result<(), NeuralError> {
    std::fs::write(path, checkpoint_json(params, vocab, None))?;
    Ok(())
}

pub fn load_checkpoint(path: &std::path::Path) -> Result<(LstmParams, Vocabulary), NeuralError> {
    checkpoint_from_json(&std::fs::read_to_string(path)?)
}
