//! Alignment-decomposition channel features: a shared Bi-LSTM encodes both
//! sides, scaled dot-product attention aligns each position against the
//! other side, and every hidden state splits into components parallel and
//! orthogonal to its alignment vector. Mean-pooled components feed a
//! one-layer MLP.

use kanchor_tensor::nn::{bilstm, LstmCell};
use kanchor_tensor::{Graph64, NodeId, ParameterSet64, Result, Rng};

use super::Dims;

pub fn iwan_feature_dim(dims: &Dims) -> usize {
    dims.hidden
}

pub fn iwan_init_params(
    params: &mut ParameterSet64,
    prefix: &str,
    dims: &Dims,
    rng: &mut Rng,
) -> Result<()> {
    LstmCell::init_params(params, &format!("{prefix}.fw"), dims.embed, dims.hidden, rng)?;
    LstmCell::init_params(params, &format!("{prefix}.bw"), dims.embed, dims.hidden, rng)?;
    let concat_dim = 8 * dims.hidden; // qp, qo, dp, do at 2*hidden each
    params.add_uniform(
        &format!("{prefix}.mlp.w"),
        vec![concat_dim, dims.hidden],
        concat_dim,
        rng,
    )?;
    params.add_uniform(&format!("{prefix}.mlp.b"), vec![1, dims.hidden], concat_dim, rng)?;
    Ok(())
}

/// Split hidden states into (parallel, orthogonal) components against their
/// alignment vectors, row by row. When an alignment row is zero the parallel
/// part is zero and the hidden state is all orthogonal.
pub fn orthogonal_decompose(
    graph: &mut Graph64,
    hidden: NodeId,
    align: NodeId,
) -> Result<(NodeId, NodeId)> {
    let parallel = graph.project_rows(hidden, align)?;
    let orthogonal = graph.sub(hidden, parallel)?;
    Ok((parallel, orthogonal))
}

fn aligned(graph: &mut Graph64, from: NodeId, to: NodeId, scale: f64) -> Result<NodeId> {
    let scores = graph.matmul_nt(from, to)?;
    let scaled = graph.scale(scores, scale);
    let attn = graph.softmax_rows(scaled)?;
    graph.matmul(attn, to)
}

/// Channel features for a pair of embedded sequences -> (1, hidden).
pub fn iwan_features(
    graph: &mut Graph64,
    params: &ParameterSet64,
    prefix: &str,
    q_embedded: NodeId,
    d_embedded: NodeId,
    dims: &Dims,
) -> Result<NodeId> {
    let fw = LstmCell::load(graph, params, &format!("{prefix}.fw"), dims.hidden)?;
    let bw = LstmCell::load(graph, params, &format!("{prefix}.bw"), dims.hidden)?;
    let q_hidden = bilstm(graph, q_embedded, &fw, &bw)?;
    let d_hidden = bilstm(graph, d_embedded, &fw, &bw)?;

    let scale = 1.0 / ((2 * dims.hidden) as f64).sqrt();
    let q_align = aligned(graph, q_hidden, d_hidden, scale)?;
    let d_align = aligned(graph, d_hidden, q_hidden, scale)?;

    let (qp, qo) = orthogonal_decompose(graph, q_hidden, q_align)?;
    let (dp, do_) = orthogonal_decompose(graph, d_hidden, d_align)?;

    let qp_bar = graph.mean_rows(qp)?;
    let qo_bar = graph.mean_rows(qo)?;
    let dp_bar = graph.mean_rows(dp)?;
    let do_bar = graph.mean_rows(do_)?;
    let cat = graph.concat(1, &[qp_bar, qo_bar, dp_bar, do_bar])?;

    let w = graph.param(params, &format!("{prefix}.mlp.w"))?;
    let b = graph.param(params, &format!("{prefix}.mlp.b"))?;
    let lin = graph.matmul(cat, w)?;
    let biased = graph.add_bias(lin, b)?;
    Ok(graph.relu(biased))
}

#[cfg(test)]
mod tests {
    use super::*;
    use kanchor_tensor::Rng;

    #[test]
    fn decomposition_identities_hold() {
        // q^p + q^o = q^h and q^o . q^a = 0, for random rows
        let mut rng = Rng::new(17);
        for _ in 0..50 {
            let n = 1 + rng.below(5);
            let k = 2 + rng.below(6);
            let hv: Vec<f64> = (0..n * k).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let av: Vec<f64> = (0..n * k).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let mut g = Graph64::new();
            let h = g.constant(vec![n, k], hv.clone()).unwrap();
            let a = g.constant(vec![n, k], av.clone()).unwrap();
            let (p, o) = orthogonal_decompose(&mut g, h, a).unwrap();
            for i in 0..n * k {
                let sum = g.value(p)[i] + g.value(o)[i];
                assert!((sum - hv[i]).abs() < 1e-9);
            }
            for row in 0..n {
                let mut dot = 0.0;
                for j in 0..k {
                    dot += g.value(o)[row * k + j] * av[row * k + j];
                }
                assert!(dot.abs() < 1e-9, "orthogonality violated: {dot}");
            }
        }
    }

    #[test]
    fn feature_shape_and_finiteness() {
        let dims = Dims { embed: 5, filters: 4, hidden: 3 };
        let mut rng = Rng::new(4);
        let mut ps = ParameterSet64::new();
        iwan_init_params(&mut ps, "tok", &dims, &mut rng).unwrap();
        let mut g = Graph64::new();
        let q = g
            .constant(vec![4, 5], (0..20).map(|i| 0.1 * i as f64 - 1.0).collect())
            .unwrap();
        let d = g.constant(vec![1, 5], vec![0.5; 5]).unwrap();
        let f = iwan_features(&mut g, &ps, "tok", q, d, &dims).unwrap();
        assert_eq!(g.shape(f), &[1, 3]);
        assert!(g.value(f).iter().all(|v| v.is_finite()));
    }
}
