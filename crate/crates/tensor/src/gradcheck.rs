//! Central finite-difference verification of the reverse pass.

use crate::graph::{Graph, NodeId};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::ParameterSet;
use crate::Result;

/// Above this many coordinates, check a deterministic 5% sample instead of
/// every coordinate.
const EXHAUSTIVE_LIMIT: usize = 10_000;
const FD_EPSILON: f64 = 1e-5;
/// Coordinates where both gradients are this small are treated as matching;
/// finite differences carry ~1e-11 of absolute noise, so ratios of
/// sub-noise values are meaningless.
const NEGLIGIBLE: f64 = 1e-6;

/// Compare analytic gradients against central finite differences for every
/// trainable coordinate of `params` and return the maximum relative error.
///
/// `build_loss` must be deterministic: it is re-run twice per probed
/// coordinate with the perturbed parameter values.
pub fn gradient_check<S, F>(build_loss: F, params: &ParameterSet<S>) -> Result<f64>
where
    S: Scalar,
    F: Fn(&mut Graph<S>, &ParameterSet<S>) -> Result<NodeId>,
{
    let mut work = params.clone();
    work.clear_grads();

    // Analytic pass.
    let mut graph = Graph::new();
    let loss = build_loss(&mut graph, &work)?;
    graph.backward(loss)?;
    graph.export_grads(&mut work)?;
    drop(graph);

    let eval = |ps: &ParameterSet<S>| -> Result<f64> {
        let mut graph = Graph::new();
        let loss = build_loss(&mut graph, ps)?;
        Ok(graph.scalar_value(loss).to_f64())
    };

    let coords: Vec<(String, usize)> = work
        .iter()
        .filter(|(_, t)| t.requires_grad())
        .flat_map(|(name, t)| (0..t.numel()).map(move |i| (name.clone(), i)))
        .collect();
    let probed: Vec<(String, usize)> = if coords.len() > EXHAUSTIVE_LIMIT {
        let mut rng = Rng::new(0x5eed);
        let target = coords.len() / 20;
        let mut picked = coords;
        rng.shuffle(&mut picked);
        picked.truncate(target.max(1));
        picked
    } else {
        coords
    };

    let mut max_rel = 0.0f64;
    let mut probe_set = work.clone();
    for (name, i) in probed {
        let analytic = probe_set.get(&name)?.grad().map_or(0.0, |g| g[i].to_f64());
        // probe_set carries the analytic grads along; only values matter here
        let original = probe_set.get(&name)?.values()[i];
        let eps = S::from_f64(FD_EPSILON);

        probe_set.get_mut(&name)?.values_mut()[i] = original + eps;
        let plus = eval(&probe_set)?;
        probe_set.get_mut(&name)?.values_mut()[i] = original - eps;
        let minus = eval(&probe_set)?;
        probe_set.get_mut(&name)?.values_mut()[i] = original;

        let numeric = (plus - minus) / (2.0 * FD_EPSILON);
        let denom = analytic.abs().max(numeric.abs());
        if denom <= NEGLIGIBLE {
            continue;
        }
        let rel = (analytic - numeric).abs() / denom;
        if rel > max_rel {
            max_rel = rel;
        }
    }
    // `probe_set` retained the same analytic grads seen by the caller's
    // parameters; nothing to write back.
    Ok(max_rel)
}
