//! Interaction-matrix channel features: a cosine similarity matrix between
//! the two token sequences pushed through two conv + max-pool stages. The
//! second stage pools onto a fixed grid so the flattened feature width does
//! not depend on input lengths.

use kanchor_tensor::{Graph64, NodeId, ParameterSet64, Result, Rng};

use super::Dims;

/// Output grid of the final pooling stage.
pub const MP_POOL_GRID: usize = 4;
const KERNEL: usize = 3;

pub fn matchpyramid_feature_dim(dims: &Dims) -> usize {
    dims.filters * MP_POOL_GRID * MP_POOL_GRID
}

pub fn matchpyramid_init_params(
    params: &mut ParameterSet64,
    prefix: &str,
    dims: &Dims,
    rng: &mut Rng,
) -> Result<()> {
    let f = dims.filters;
    let fan1 = KERNEL * KERNEL;
    params.add_uniform(&format!("{prefix}.conv1.k"), vec![f, fan1], fan1, rng)?;
    params.add_uniform(&format!("{prefix}.conv1.b"), vec![1, f], fan1, rng)?;
    let fan2 = f * KERNEL * KERNEL;
    params.add_uniform(&format!("{prefix}.conv2.k"), vec![f, fan2], fan2, rng)?;
    params.add_uniform(&format!("{prefix}.conv2.b"), vec![1, f], fan2, rng)?;
    Ok(())
}

/// Channel features from the token-level interaction matrix
/// -> (1, filters * 16).
pub fn matchpyramid_features(
    graph: &mut Graph64,
    params: &ParameterSet64,
    prefix: &str,
    q_embedded: NodeId,
    d_embedded: NodeId,
) -> Result<NodeId> {
    let n = graph.shape(q_embedded)[0];
    let m = graph.shape(d_embedded)[0];
    let sim = graph.cosine_similarity_matrix(q_embedded, d_embedded)?;
    let image = graph.reshape(sim, vec![1, n, m])?;

    let k1 = graph.param(params, &format!("{prefix}.conv1.k"))?;
    let b1 = graph.param(params, &format!("{prefix}.conv1.b"))?;
    let c1 = graph.conv2d(image, k1, b1, KERNEL, KERNEL, 1)?;
    let a1 = graph.relu(c1);
    let p1 = graph.max_pool2d(a1, 2, 2)?;

    let k2 = graph.param(params, &format!("{prefix}.conv2.k"))?;
    let b2 = graph.param(params, &format!("{prefix}.conv2.b"))?;
    let c2 = graph.conv2d(p1, k2, b2, KERNEL, KERNEL, 1)?;
    let a2 = graph.relu(c2);
    let p2 = graph.adaptive_max_pool2d(a2, MP_POOL_GRID, MP_POOL_GRID)?;

    let f = graph.shape(p2)[0];
    graph.reshape(p2, vec![1, f * MP_POOL_GRID * MP_POOL_GRID])
}
