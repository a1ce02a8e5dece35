use super::{sigmoid, Parameter};
use crate::numeric::{gemm, gemm_view, Matrix, SeededRng};
use crate::{Error, Result};

/// Hidden and cell vectors of one layer for a batch (`B x hidden` each).
#[derive(Clone, Debug, PartialEq)]
pub struct LayerState {
    pub h: Matrix,
    pub c: Matrix,
}

impl LayerState {
    pub fn zeros(batch: usize, hidden: usize) -> Self {
        LayerState {
            h: Matrix::zeros(batch, hidden),
            c: Matrix::zeros(batch, hidden),
        }
    }
}

/// Per-layer states of a stacked LSTM.
#[derive(Clone, Debug, PartialEq)]
pub struct RecurrentState {
    pub layers: Vec<LayerState>,
}

impl RecurrentState {
    pub fn zeros(layers: usize, batch: usize, hidden: usize) -> Self {
        RecurrentState {
            layers: vec![LayerState::zeros(batch, hidden); layers],
        }
    }
}

/// One LSTM layer. Gate columns are ordered input, forget, candidate, output.
///
/// ```text
/// [i f g o] = x W_input + h_prev W_hidden + bias
/// c = σ(f) ⊙ c_prev + σ(i) ⊙ tanh(g)
/// h = σ(o) ⊙ tanh(c)
/// ```
///
/// Rows whose mask is false carry `(h_prev, c_prev)` through unchanged, which
/// makes padded positions invisible to everything downstream.
#[derive(Clone, Debug)]
pub struct LstmLayer {
    pub w_input: Parameter,
    pub w_hidden: Parameter,
    pub bias: Parameter,
    input_size: usize,
    hidden_size: usize,
}

/// Saved activations of [`LstmLayer::forward`].
#[derive(Clone, Debug)]
pub struct LstmSequenceCache {
    batch: usize,
    xs: Matrix,
    /// Post-activation gates, `(T*B) x 4H`.
    gates: Matrix,
    hs: Matrix,
    cs: Matrix,
    tanh_c: Matrix,
    init: LayerState,
    mask: Vec<bool>,
}

impl LstmLayer {
    /// Weights uniform in ±1/sqrt(fan_in), biases zero except the forget
    /// gate, which starts at 1.
    pub fn new(name: &str, input_size: usize, hidden_size: usize, rng: &mut SeededRng) -> Self {
        let h4 = 4 * hidden_size;
        let w_input = Parameter::uniform(format!("{name}.w_input"), input_size, h4, input_size, rng);
        let w_hidden = Parameter::uniform(format!("{name}.w_hidden"), hidden_size, h4, hidden_size, rng);
        let mut bias = Parameter::zeros(format!("{name}.bias"), 1, h4);
        bias.value.data_mut()[hidden_size..2 * hidden_size].fill(1.0);
        LstmLayer {
            w_input,
            w_hidden,
            bias,
            input_size,
            hidden_size,
        }
    }

    /// Builds a layer around existing parameters (checkpoint loading).
    pub fn from_parameters(w_input: Parameter, w_hidden: Parameter, bias: Parameter) -> Result<Self> {
        let hidden_size = w_hidden.value.rows();
        let h4 = 4 * hidden_size;
        if w_hidden.value.cols() != h4 || w_input.value.cols() != h4 || bias.value.shape() != (1, h4) {
            return Err(Error::Data(format!(
                "inconsistent LSTM parameter shapes: {:?} {:?} {:?}",
                w_input.value.shape(),
                w_hidden.value.shape(),
                bias.value.shape()
            )));
        }
        Ok(LstmLayer {
            input_size: w_input.value.rows(),
            hidden_size,
            w_input,
            w_hidden,
            bias,
        })
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden_size
    }

    pub fn params(&self) -> [&Parameter; 3] {
        [&self.w_input, &self.w_hidden, &self.bias]
    }

    pub fn params_mut(&mut self) -> [&mut Parameter; 3] {
        [&mut self.w_input, &mut self.w_hidden, &mut self.bias]
    }

    /// Single step for a batch with every row active.
    pub fn step(&self, x: &Matrix, prev: &LayerState) -> Result<LayerState> {
        let mask = vec![true; x.rows()];
        let (_, state, _) = self.forward(x, x.rows(), prev, &mask)?;
        Ok(state)
    }

    /// Runs the layer over a time-major sequence `xs` of `(T*B) x input`.
    /// Returns the hidden state at every position and the final state.
    pub fn forward(
        &self,
        xs: &Matrix,
        batch: usize,
        init: &LayerState,
        mask: &[bool],
    ) -> Result<(Matrix, LayerState, LstmSequenceCache)> {
        let hid = self.hidden_size;
        let rows = xs.rows();
        if batch == 0 || !rows.is_multiple_of(batch) {
            return Err(Error::InvalidArgument(format!(
                "sequence rows {rows} not a multiple of batch {batch}"
            )));
        }
        if xs.cols() != self.input_size {
            return Err(Error::Shape {
                op: "lstm input",
                left: xs.shape(),
                right: self.w_input.value.shape(),
            });
        }
        if init.h.shape() != (batch, hid) || init.c.shape() != (batch, hid) {
            return Err(Error::Shape {
                op: "lstm state",
                left: init.h.shape(),
                right: (batch, hid),
            });
        }
        if mask.len() != rows {
            return Err(Error::InvalidArgument(format!(
                "mask length {} != sequence rows {rows}",
                mask.len()
            )));
        }
        let steps = rows / batch;

        let mut gates = Matrix::zeros(rows, 4 * hid);
        gemm(1.0, xs, false, &self.w_input.value, false, 0.0, &mut gates);
        let bias = self.bias.value.data();
        for r in 0..rows {
            for (g, b) in gates.row_mut(r).iter_mut().zip(bias) {
                *g += b;
            }
        }

        let mut hs = Matrix::zeros(rows, hid);
        let mut cs = Matrix::zeros(rows, hid);
        let mut tanh_c = Matrix::zeros(rows, hid);
        let mut h_prev = init.h.clone();
        let mut c_prev = init.c.clone();
        for t in 0..steps {
            gemm_view(
                1.0,
                h_prev.view(),
                self.w_hidden.value.view(),
                1.0,
                gates.rows_view_mut(t * batch, batch),
            );
            for b in 0..batch {
                let r = t * batch + b;
                let g = gates.row_mut(r);
                for j in 0..hid {
                    g[j] = sigmoid(g[j]);
                    g[hid + j] = sigmoid(g[hid + j]);
                    g[2 * hid + j] = g[2 * hid + j].tanh();
                    g[3 * hid + j] = sigmoid(g[3 * hid + j]);
                }
                let (hp, cp) = (h_prev.row(b), c_prev.row(b));
                let (h_row, c_row, tc_row) = (hs.row_mut(r), cs.row_mut(r), tanh_c.row_mut(r));
                if mask[r] {
                    let g = gates.row(r);
                    for j in 0..hid {
                        let c = g[hid + j] * cp[j] + g[j] * g[2 * hid + j];
                        let tc = c.tanh();
                        c_row[j] = c;
                        tc_row[j] = tc;
                        h_row[j] = g[3 * hid + j] * tc;
                    }
                } else {
                    h_row.copy_from_slice(hp);
                    c_row.copy_from_slice(cp);
                }
            }
            for b in 0..batch {
                let r = t * batch + b;
                h_prev.row_mut(b).copy_from_slice(hs.row(r));
                c_prev.row_mut(b).copy_from_slice(cs.row(r));
            }
        }

        let last = LayerState { h: h_prev, c: c_prev };
        let cache = LstmSequenceCache {
            batch,
            xs: xs.clone(),
            gates,
            hs: hs.clone(),
            cs,
            tanh_c,
            init: init.clone(),
            mask: mask.to_vec(),
        };
        Ok((hs, last, cache))
    }

    /// Backpropagates through a cached sequence. `d_hs` is the loss gradient
    /// for every output position and `d_final` for the final state. Returns
    /// the gradients for the inputs and the initial state.
    pub fn backward(&mut self, cache: &LstmSequenceCache, d_hs: &Matrix, d_final: &LayerState) -> (Matrix, LayerState) {
        let hid = self.hidden_size;
        let batch = cache.batch;
        let rows = cache.xs.rows();
        let steps = rows / batch;
        assert_eq!(d_hs.shape(), (rows, hid));

        let mut d_gates = Matrix::zeros(rows, 4 * hid);
        let mut dh_next = d_final.h.clone();
        let mut dc_next = d_final.c.clone();
        for t in (0..steps).rev() {
            let mut dh_prev = Matrix::zeros(batch, hid);
            let mut dc_prev = Matrix::zeros(batch, hid);
            for b in 0..batch {
                let r = t * batch + b;
                let dh_out = d_hs.row(r);
                let (dhn, dcn) = (dh_next.row(b), dc_next.row(b));
                if !cache.mask[r] {
                    for j in 0..hid {
                        dh_prev.row_mut(b)[j] = dh_out[j] + dhn[j];
                    }
                    dc_prev.row_mut(b).copy_from_slice(dcn);
                    continue;
                }
                let g = cache.gates.row(r);
                let tc = cache.tanh_c.row(r);
                let cp = if t == 0 {
                    cache.init.c.row(b)
                } else {
                    cache.cs.row(r - batch)
                };
                let dg_row = d_gates.row_mut(r);
                let dcp = dc_prev.row_mut(b);
                for j in 0..hid {
                    let (gi, gf, gg, go) = (g[j], g[hid + j], g[2 * hid + j], g[3 * hid + j]);
                    let dh = dh_out[j] + dhn[j];
                    let dc = dcn[j] + dh * go * (1.0 - tc[j] * tc[j]);
                    let d_o = dh * tc[j];
                    dg_row[j] = dc * gg * gi * (1.0 - gi);
                    dg_row[hid + j] = dc * cp[j] * gf * (1.0 - gf);
                    dg_row[2 * hid + j] = dc * gi * (1.0 - gg * gg);
                    dg_row[3 * hid + j] = d_o * go * (1.0 - go);
                    dcp[j] = dc * gf;
                }
            }
            gemm_view(
                1.0,
                d_gates.rows_view(t * batch, batch),
                self.w_hidden.value.view().t(),
                1.0,
                dh_prev.view_mut(),
            );
            dh_next = dh_prev;
            dc_next = dc_prev;
        }

        if self.w_input.trainable {
            gemm(1.0, &cache.xs, true, &d_gates, false, 1.0, &mut self.w_input.grad);
        }
        if self.bias.trainable {
            let sums = d_gates.column_sums();
            self.bias.grad.add_scaled(1.0, &sums);
        }
        if self.w_hidden.trainable {
            let mut h_prev_all = Matrix::zeros(rows, hid);
            h_prev_all.data_mut()[..batch * hid].copy_from_slice(cache.init.h.data());
            h_prev_all.data_mut()[batch * hid..].copy_from_slice(&cache.hs.data()[..(rows - batch) * hid]);
            gemm(1.0, &h_prev_all, true, &d_gates, false, 1.0, &mut self.w_hidden.grad);
        }
        let mut d_xs = Matrix::zeros(rows, self.input_size);
        gemm(1.0, &d_gates, false, &self.w_input.value, true, 0.0, &mut d_xs);
        (d_xs, LayerState { h: dh_next, c: dc_next })
    }
}

/// Layers applied one after another; layer `l + 1` reads the hidden states
/// of layer `l`.
#[derive(Clone, Debug)]
pub struct StackedLstm {
    pub layers: Vec<LstmLayer>,
}

#[derive(Clone, Debug)]
pub struct StackedLstmCache {
    layers: Vec<LstmSequenceCache>,
}

impl StackedLstm {
    pub fn new(name: &str, input_size: usize, hidden_size: usize, depth: usize, rng: &mut SeededRng) -> Self {
        let layers = (0..depth)
            .map(|l| {
                let input = if l == 0 { input_size } else { hidden_size };
                LstmLayer::new(&format!("{name}.layer{l}"), input, hidden_size, rng)
            })
            .collect();
        StackedLstm { layers }
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn hidden_size(&self) -> usize {
        self.layers[0].hidden_size()
    }

    pub fn params(&self) -> Vec<&Parameter> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    /// Returns the top layer's hidden states and every layer's final state.
    pub fn forward(
        &self,
        xs: &Matrix,
        batch: usize,
        init: &RecurrentState,
        mask: &[bool],
    ) -> Result<(Matrix, RecurrentState, StackedLstmCache)> {
        if init.layers.len() != self.layers.len() {
            return Err(Error::InvalidArgument(format!(
                "state has {} layers, network has {}",
                init.layers.len(),
                self.layers.len()
            )));
        }
        let mut input = xs.clone();
        let mut finals = Vec::with_capacity(self.layers.len());
        let mut caches = Vec::with_capacity(self.layers.len());
        for (layer, state) in self.layers.iter().zip(&init.layers) {
            let (hs, last, cache) = layer.forward(&input, batch, state, mask)?;
            finals.push(last);
            caches.push(cache);
            input = hs;
        }
        Ok((
            input,
            RecurrentState { layers: finals },
            StackedLstmCache { layers: caches },
        ))
    }

    pub fn backward(
        &mut self,
        cache: &StackedLstmCache,
        d_top: &Matrix,
        d_final: &RecurrentState,
    ) -> (Matrix, RecurrentState) {
        let mut d_out = d_top.clone();
        let mut d_init = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter_mut().enumerate().rev() {
            let (d_in, d_state) = layer.backward(&cache.layers[l], &d_out, &d_final.layers[l]);
            d_init.push(d_state);
            d_out = d_in;
        }
        d_init.reverse();
        (d_out, RecurrentState { layers: d_init })
    }
}
