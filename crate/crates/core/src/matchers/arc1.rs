//! Siamese CNN channel features: each side is encoded by the same
//! window-2 convolution and max-over-time pool, and the two sentence vectors
//! are concatenated.

use kanchor_tensor::{Graph64, NodeId, ParameterSet64, Result, Rng};

use super::Dims;

pub const ARC1_WINDOW: usize = 2;

pub fn arc1_feature_dim(dims: &Dims) -> usize {
    2 * dims.filters
}

pub fn arc1_init_params(
    params: &mut ParameterSet64,
    prefix: &str,
    dims: &Dims,
    rng: &mut Rng,
) -> Result<()> {
    let fan_in = ARC1_WINDOW * dims.embed;
    params.add_uniform(
        &format!("{prefix}.conv.k"),
        vec![fan_in, dims.filters],
        fan_in,
        rng,
    )?;
    params.add_uniform(&format!("{prefix}.conv.b"), vec![1, dims.filters], fan_in, rng)?;
    Ok(())
}

fn encode_side(
    graph: &mut Graph64,
    params: &ParameterSet64,
    prefix: &str,
    embedded: NodeId,
) -> Result<NodeId> {
    let kernel = graph.param(params, &format!("{prefix}.conv.k"))?;
    let bias = graph.param(params, &format!("{prefix}.conv.b"))?;
    let conv = graph.conv1d(embedded, kernel, bias, ARC1_WINDOW)?;
    let act = graph.relu(conv);
    graph.max_rows(act)
}

/// Channel features for one (query, title) pair of embedded sequences:
/// query and title run through shared weights, outputs concatenated
/// -> (1, 2 * filters).
pub fn arc1_features(
    graph: &mut Graph64,
    params: &ParameterSet64,
    prefix: &str,
    q_embedded: NodeId,
    d_embedded: NodeId,
) -> Result<NodeId> {
    let q = encode_side(graph, params, prefix, q_embedded)?;
    let d = encode_side(graph, params, prefix, d_embedded)?;
    graph.concat(1, &[q, d])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(dims: &Dims) -> ParameterSet64 {
        let mut rng = Rng::new(3);
        let mut ps = ParameterSet64::new();
        arc1_init_params(&mut ps, "tok", dims, &mut rng).unwrap();
        ps
    }

    #[test]
    fn output_dim_is_twice_the_filter_count() {
        let dims = Dims { embed: 8, filters: 256, hidden: 16 };
        let ps = setup(&dims);
        let mut g = Graph64::new();
        let q = g.constant(vec![3, 8], vec![0.1; 24]).unwrap();
        let d = g.constant(vec![5, 8], vec![0.2; 40]).unwrap();
        let f = arc1_features(&mut g, &ps, "tok", q, d).unwrap();
        assert_eq!(g.shape(f), &[1, 512]);
    }

    #[test]
    fn identical_sides_give_identical_halves() {
        let dims = Dims { embed: 6, filters: 9, hidden: 4 };
        let ps = setup(&dims);
        let mut g = Graph64::new();
        let values: Vec<f64> = (0..24).map(|i| (i as f64) * 0.03 - 0.4).collect();
        let q = g.constant(vec![4, 6], values.clone()).unwrap();
        let d = g.constant(vec![4, 6], values).unwrap();
        let f = arc1_features(&mut g, &ps, "tok", q, d).unwrap();
        let v = g.value(f);
        assert_eq!(&v[..9], &v[9..]);
    }

    #[test]
    fn single_row_input_is_finite() {
        // the null-id path produces a length-1 sequence; window 2 must still
        // produce finite output via end padding
        let dims = Dims { embed: 5, filters: 7, hidden: 4 };
        let ps = setup(&dims);
        let mut g = Graph64::new();
        let q = g.constant(vec![1, 5], vec![0.3; 5]).unwrap();
        let d = g.constant(vec![2, 5], vec![0.1; 10]).unwrap();
        let f = arc1_features(&mut g, &ps, "tok", q, d).unwrap();
        assert!(g.value(f).iter().all(|v| v.is_finite()));
    }
}
