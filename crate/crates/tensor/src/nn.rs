//! Recurrent building blocks composed from tape ops.

use crate::graph::{Graph, NodeId};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::ParameterSet;
use crate::Result;

/// Node handles for one LSTM cell's parameters, gate order (i, f, g, o):
/// `w_ih` (in, 4h), `w_hh` (h, 4h), `b` (1, 4h).
#[derive(Debug, Clone, Copy)]
pub struct LstmCell {
    pub w_ih: NodeId,
    pub w_hh: NodeId,
    pub b: NodeId,
    pub hidden: usize,
}

impl LstmCell {
    /// Register the cell's parameters under `prefix`.
    pub fn init_params<S: Scalar>(
        params: &mut ParameterSet<S>,
        prefix: &str,
        in_dim: usize,
        hidden: usize,
        rng: &mut Rng,
    ) -> Result<()> {
        params.add_uniform(&format!("{prefix}.w_ih"), vec![in_dim, 4 * hidden], in_dim, rng)?;
        params.add_uniform(&format!("{prefix}.w_hh"), vec![hidden, 4 * hidden], hidden, rng)?;
        params.add_uniform(&format!("{prefix}.b"), vec![1, 4 * hidden], hidden, rng)?;
        Ok(())
    }

    /// Bring the cell's parameters onto a tape.
    pub fn load<S: Scalar>(
        graph: &mut Graph<S>,
        params: &ParameterSet<S>,
        prefix: &str,
        hidden: usize,
    ) -> Result<LstmCell> {
        Ok(LstmCell {
            w_ih: graph.param(params, &format!("{prefix}.w_ih"))?,
            w_hh: graph.param(params, &format!("{prefix}.w_hh"))?,
            b: graph.param(params, &format!("{prefix}.b"))?,
            hidden,
        })
    }
}

/// One LSTM step: x (1,in), h (1,hidden), c (1,hidden) -> (h', c').
pub fn lstm_step<S: Scalar>(
    graph: &mut Graph<S>,
    x: NodeId,
    h: NodeId,
    c: NodeId,
    cell: &LstmCell,
) -> Result<(NodeId, NodeId)> {
    let hdim = cell.hidden;
    let xi = graph.matmul(x, cell.w_ih)?;
    let hi = graph.matmul(h, cell.w_hh)?;
    let pre = graph.add(xi, hi)?;
    let gates = graph.add_bias(pre, cell.b)?;
    let i_gate = graph.slice_cols(gates, 0, hdim)?;
    let f_gate = graph.slice_cols(gates, hdim, hdim)?;
    let g_gate = graph.slice_cols(gates, 2 * hdim, hdim)?;
    let o_gate = graph.slice_cols(gates, 3 * hdim, hdim)?;
    let i_act = graph.logistic(i_gate);
    let f_act = graph.logistic(f_gate);
    let g_act = graph.tanh(g_gate);
    let o_act = graph.logistic(o_gate);
    let keep = graph.mul(f_act, c)?;
    let write = graph.mul(i_act, g_act)?;
    let c_next = graph.add(keep, write)?;
    let c_squashed = graph.tanh(c_next);
    let h_next = graph.mul(o_act, c_squashed)?;
    Ok((h_next, c_next))
}

/// Run a forward and a backward LSTM over `seq` (n, in) and concatenate the
/// hidden states per position -> (n, 2*hidden).
pub fn bilstm<S: Scalar>(
    graph: &mut Graph<S>,
    seq: NodeId,
    forward: &LstmCell,
    backward: &LstmCell,
) -> Result<NodeId> {
    let n = graph.shape(seq)[0];
    let hidden = forward.hidden;

    let run = |graph: &mut Graph<S>, cell: &LstmCell, rev: bool| -> Result<Vec<NodeId>> {
        let mut h = graph.zeros(vec![1, hidden]);
        let mut c = graph.zeros(vec![1, hidden]);
        let mut states = vec![0; n];
        let order: Vec<usize> = if rev { (0..n).rev().collect() } else { (0..n).collect() };
        for t in order {
            let x = graph.slice_rows(seq, t, 1)?;
            let (h2, c2) = lstm_step(graph, x, h, c, cell)?;
            h = h2;
            c = c2;
            states[t] = h;
        }
        Ok(states)
    };

    let fw = run(graph, forward, false)?;
    let bw = run(graph, backward, true)?;
    let fw_stack = graph.concat(0, &fw)?;
    let bw_stack = graph.concat(0, &bw)?;
    graph.concat(1, &[fw_stack, bw_stack])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_everything_gives_zero_hidden() {
        let mut g = Graph::<f64>::new();
        let x = g.zeros(vec![1, 2]);
        let h = g.zeros(vec![1, 3]);
        let c = g.zeros(vec![1, 3]);
        let w_ih = g.zeros(vec![2, 12]);
        let w_hh = g.zeros(vec![3, 12]);
        let b = g.zeros(vec![1, 12]);
        let cell = LstmCell { w_ih, w_hh, b, hidden: 3 };
        let (h2, c2) = lstm_step(&mut g, x, h, c, &cell).unwrap();
        assert_eq!(g.value(h2), &[0.0, 0.0, 0.0]);
        assert_eq!(g.value(c2), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn scalar_cell_matches_hand_arithmetic() {
        // 1-d everything so the gate algebra can be cross-checked with plain
        // scalar formulas.
        let (x, h0, c0) = (0.5, 0.1, -0.2);
        let w_ih = [0.2, -0.3, 0.4, 0.1];
        let w_hh = [0.5, 0.2, -0.1, 0.3];
        let b = [0.01, 0.02, 0.03, -0.04];

        let sigma = |z: f64| 1.0 / (1.0 + (-z).exp());
        let i = sigma(x * w_ih[0] + h0 * w_hh[0] + b[0]);
        let f = sigma(x * w_ih[1] + h0 * w_hh[1] + b[1]);
        let gg = (x * w_ih[2] + h0 * w_hh[2] + b[2]).tanh();
        let o = sigma(x * w_ih[3] + h0 * w_hh[3] + b[3]);
        let c_expect = f * c0 + i * gg;
        let h_expect = o * c_expect.tanh();

        let mut g = Graph::<f64>::new();
        let xn = g.constant(vec![1, 1], vec![x]).unwrap();
        let hn = g.constant(vec![1, 1], vec![h0]).unwrap();
        let cn = g.constant(vec![1, 1], vec![c0]).unwrap();
        let w_ih_n = g.constant(vec![1, 4], w_ih.to_vec()).unwrap();
        let w_hh_n = g.constant(vec![1, 4], w_hh.to_vec()).unwrap();
        let b_n = g.constant(vec![1, 4], b.to_vec()).unwrap();
        let cell = LstmCell { w_ih: w_ih_n, w_hh: w_hh_n, b: b_n, hidden: 1 };
        let (h2, c2) = lstm_step(&mut g, xn, hn, cn, &cell).unwrap();
        assert!((g.value(h2)[0] - h_expect).abs() < 1e-15);
        assert!((g.value(c2)[0] - c_expect).abs() < 1e-15);
    }

    #[test]
    fn bilstm_length_one_concats_both_directions() {
        let mut rng = Rng::new(11);
        let mut ps = ParameterSet::<f64>::new();
        LstmCell::init_params(&mut ps, "fw", 2, 3, &mut rng).unwrap();
        LstmCell::init_params(&mut ps, "bw", 2, 3, &mut rng).unwrap();
        let mut g = Graph::new();
        let seq = g.constant(vec![1, 2], vec![0.3, -0.6]).unwrap();
        let fw = LstmCell::load(&mut g, &ps, "fw", 3).unwrap();
        let bw = LstmCell::load(&mut g, &ps, "bw", 3).unwrap();
        let out = bilstm(&mut g, seq, &fw, &bw).unwrap();
        assert_eq!(g.shape(out), &[1, 6]);

        // both halves equal the single-step states of their cells
        let x = g.slice_rows(seq, 0, 1).unwrap();
        let h0 = g.zeros(vec![1, 3]);
        let c0 = g.zeros(vec![1, 3]);
        let (hf, _) = lstm_step(&mut g, x, h0, c0, &fw).unwrap();
        let (hb, _) = lstm_step(&mut g, x, h0, c0, &bw).unwrap();
        let out_v = g.value(out).to_vec();
        assert_eq!(&out_v[..3], g.value(hf));
        assert_eq!(&out_v[3..], g.value(hb));
    }
}
