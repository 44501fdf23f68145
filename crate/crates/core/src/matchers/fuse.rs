//! Channel fusion and the training objective: concatenated channel features
//! through a two-layer MLP and softmax over the three labels, trained with
//! mean cross-entropy.

use kanchor_tensor::{Graph64, NodeId, ParameterSet64, Result, Rng};

use super::Dims;

/// Hidden width of the fusion MLP.
pub fn fusion_hidden(dims: &Dims) -> usize {
    dims.hidden
}

pub fn fuse_init_params(
    params: &mut ParameterSet64,
    input_dim: usize,
    dims: &Dims,
    rng: &mut Rng,
) -> Result<()> {
    params.add_uniform("fuse.w1", vec![input_dim, dims.hidden], input_dim, rng)?;
    params.add_uniform("fuse.b1", vec![1, dims.hidden], input_dim, rng)?;
    params.add_uniform("fuse.w2", vec![dims.hidden, 3], dims.hidden, rng)?;
    params.add_uniform("fuse.b2", vec![1, 3], dims.hidden, rng)?;
    Ok(())
}

/// concat(f_w, f_e, f_t) -> 2-layer MLP -> softmax over 3 labels, (1,3).
pub fn fuse_and_classify(
    graph: &mut Graph64,
    params: &ParameterSet64,
    f_w: NodeId,
    f_e: NodeId,
    f_t: NodeId,
) -> Result<NodeId> {
    let fused = graph.concat(1, &[f_w, f_e, f_t])?;
    let w1 = graph.param(params, "fuse.w1")?;
    let b1 = graph.param(params, "fuse.b1")?;
    let h1 = graph.matmul(fused, w1)?;
    let h1b = graph.add_bias(h1, b1)?;
    let h1a = graph.relu(h1b);
    let w2 = graph.param(params, "fuse.w2")?;
    let b2 = graph.param(params, "fuse.b2")?;
    let logits = graph.matmul(h1a, w2)?;
    let biased = graph.add_bias(logits, b2)?;
    graph.softmax_rows(biased)
}

/// Mean cross-entropy over a batch of probability rows.
pub fn cross_entropy_loss(
    graph: &mut Graph64,
    probs: NodeId,
    labels: &[usize],
) -> Result<NodeId> {
    graph.cross_entropy(probs, labels)
}
