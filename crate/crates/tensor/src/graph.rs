use std::collections::BTreeMap;

use crate::scalar::Scalar;
use crate::tensor::ParameterSet;
use crate::{Result, TensorError};

/// Handle to a node on the tape. Only valid for the graph that created it.
pub type NodeId = usize;

#[derive(Debug, Clone)]
enum Op<S> {
    Leaf,
    Add(NodeId, NodeId),
    AddBias(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, S),
    Matmul(NodeId, NodeId),
    MatmulNt(NodeId, NodeId),
    Concat { axis: usize, inputs: Vec<NodeId> },
    SliceRows { input: NodeId, start: usize },
    SliceCols { input: NodeId, start: usize },
    Embedding { table: NodeId, ids: Vec<usize> },
    Conv1d { input: NodeId, kernel: NodeId, bias: NodeId, window: usize },
    Conv2d { input: NodeId, kernel: NodeId, bias: NodeId, kh: usize, kw: usize, pad: usize },
    MaxPool2d { input: NodeId, win_h: usize, win_w: usize },
    AdaptiveMaxPool2d { input: NodeId },
    MaxRows(NodeId),
    MeanRows(NodeId),
    Mean(NodeId),
    Relu(NodeId),
    Tanh(NodeId),
    Logistic(NodeId),
    SoftmaxRows(NodeId),
    CosineSim(NodeId, NodeId),
    ProjectRows { hidden: NodeId, align: NodeId },
    CrossEntropy { probs: NodeId, labels: Vec<usize> },
    Bce { prob: NodeId, target: S },
    Reshape(NodeId),
}

#[derive(Debug)]
struct Node<S: Scalar> {
    shape: Vec<usize>,
    values: Vec<S>,
    grad: Option<Vec<S>>,
    needs_grad: bool,
    op: Op<S>,
}

/// Eager computation tape. Ops compute their value when recorded and
/// remember enough to run the reverse pass.
#[derive(Debug, Default)]
pub struct Graph<S: Scalar> {
    nodes: Vec<Node<S>>,
    param_nodes: BTreeMap<String, NodeId>,
}

impl<S: Scalar> Graph<S> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new(), param_nodes: BTreeMap::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drop the tape. Parameter gradients already exported survive in their
    /// `ParameterSet`.
    pub fn clear(&mut self) {
        self.nodes.clear();
        self.param_nodes.clear();
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id].shape
    }

    pub fn value(&self, id: NodeId) -> &[S] {
        &self.nodes[id].values
    }

    /// Scalar convenience accessor for 1-element nodes.
    pub fn scalar_value(&self, id: NodeId) -> S {
        debug_assert_eq!(self.nodes[id].values.len(), 1);
        self.nodes[id].values[0]
    }

    /// Gradient of a node, available after `backward`.
    pub fn grad(&self, id: NodeId) -> Option<&[S]> {
        self.nodes[id].grad.as_deref()
    }

    fn push(&mut self, shape: Vec<usize>, values: Vec<S>, op: Op<S>, needs_grad: bool) -> NodeId {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        self.nodes.push(Node { shape, values, grad: None, needs_grad, op });
        self.nodes.len() - 1
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id].needs_grad
    }

    fn dims2(&self, op: &'static str, id: NodeId) -> Result<(usize, usize)> {
        match self.nodes[id].shape[..] {
            [n, k] => Ok((n, k)),
            _ => Err(TensorError::InvalidArgument {
                op,
                msg: format!("expected a 2-d tensor, got shape {:?}", self.nodes[id].shape),
            }),
        }
    }

    fn dims3(&self, op: &'static str, id: NodeId) -> Result<(usize, usize, usize)> {
        match self.nodes[id].shape[..] {
            [c, h, w] => Ok((c, h, w)),
            _ => Err(TensorError::InvalidArgument {
                op,
                msg: format!("expected a 3-d tensor, got shape {:?}", self.nodes[id].shape),
            }),
        }
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        if self.nodes[a].shape != self.nodes[b].shape {
            return Err(TensorError::ShapeMismatch {
                op,
                lhs: self.nodes[a].shape.clone(),
                rhs: self.nodes[b].shape.clone(),
            });
        }
        Ok(())
    }

    // ---- leaves ----------------------------------------------------------

    pub fn constant(&mut self, shape: Vec<usize>, values: Vec<S>) -> Result<NodeId> {
        let numel: usize = shape.iter().product();
        if numel != values.len() {
            return Err(TensorError::InvalidArgument {
                op: "constant",
                msg: format!("shape {shape:?} wants {numel} values, got {}", values.len()),
            });
        }
        Ok(self.push(shape, values, Op::Leaf, false))
    }

    pub fn scalar(&mut self, v: S) -> NodeId {
        self.push(vec![1, 1], vec![v], Op::Leaf, false)
    }

    pub fn zeros(&mut self, shape: Vec<usize>) -> NodeId {
        let numel = shape.iter().product();
        self.push(shape, vec![S::zero(); numel], Op::Leaf, false)
    }

    /// Copy a named parameter onto the tape. Repeated calls for the same name
    /// return the same node, so its gradient accumulates across every use.
    pub fn param(&mut self, params: &ParameterSet<S>, name: &str) -> Result<NodeId> {
        if let Some(&id) = self.param_nodes.get(name) {
            return Ok(id);
        }
        let tensor = params.get(name)?;
        let id = self.push(
            tensor.shape().to_vec(),
            tensor.values().to_vec(),
            Op::Leaf,
            tensor.requires_grad(),
        );
        self.param_nodes.insert(name.to_string(), id);
        Ok(id)
    }

    // ---- elementwise and linear ops --------------------------------------

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("add", a, b)?;
        let values = self.nodes[a]
            .values
            .iter()
            .zip(&self.nodes[b].values)
            .map(|(&x, &y)| x + y)
            .collect();
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(self.nodes[a].shape.clone(), values, Op::Add(a, b), needs))
    }

    /// Matrix plus a row vector broadcast over rows: (n,k) + (1,k).
    pub fn add_bias(&mut self, m: NodeId, b: NodeId) -> Result<NodeId> {
        let (n, k) = self.dims2("add_bias", m)?;
        let (bn, bk) = self.dims2("add_bias", b)?;
        if bn != 1 || bk != k {
            return Err(TensorError::ShapeMismatch {
                op: "add_bias",
                lhs: self.nodes[m].shape.clone(),
                rhs: self.nodes[b].shape.clone(),
            });
        }
        let mut values = self.nodes[m].values.clone();
        for i in 0..n {
            for j in 0..k {
                values[i * k + j] += self.nodes[b].values[j];
            }
        }
        let needs = self.needs(m) || self.needs(b);
        Ok(self.push(vec![n, k], values, Op::AddBias(m, b), needs))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("sub", a, b)?;
        let values = self.nodes[a]
            .values
            .iter()
            .zip(&self.nodes[b].values)
            .map(|(&x, &y)| x - y)
            .collect();
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(self.nodes[a].shape.clone(), values, Op::Sub(a, b), needs))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("mul", a, b)?;
        let values = self.nodes[a]
            .values
            .iter()
            .zip(&self.nodes[b].values)
            .map(|(&x, &y)| x * y)
            .collect();
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(self.nodes[a].shape.clone(), values, Op::Mul(a, b), needs))
    }

    pub fn scale(&mut self, a: NodeId, c: S) -> NodeId {
        let values = self.nodes[a].values.iter().map(|&x| x * c).collect();
        let needs = self.needs(a);
        self.push(self.nodes[a].shape.clone(), values, Op::Scale(a, c), needs)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (n, ka) = self.dims2("matmul", a)?;
        let (kb, m) = self.dims2("matmul", b)?;
        if ka != kb {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                lhs: self.nodes[a].shape.clone(),
                rhs: self.nodes[b].shape.clone(),
            });
        }
        let av = &self.nodes[a].values;
        let bv = &self.nodes[b].values;
        let mut values = vec![S::zero(); n * m];
        for i in 0..n {
            for l in 0..ka {
                let x = av[i * ka + l];
                if x == S::zero() {
                    continue;
                }
                let brow = &bv[l * m..(l + 1) * m];
                let yrow = &mut values[i * m..(i + 1) * m];
                for (y, &bj) in yrow.iter_mut().zip(brow) {
                    *y += x * bj;
                }
            }
        }
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(vec![n, m], values, Op::Matmul(a, b), needs))
    }

    /// `a @ b^T` without materializing the transpose: (n,k) x (m,k) -> (n,m).
    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (n, ka) = self.dims2("matmul_nt", a)?;
        let (m, kb) = self.dims2("matmul_nt", b)?;
        if ka != kb {
            return Err(TensorError::ShapeMismatch {
                op: "matmul_nt",
                lhs: self.nodes[a].shape.clone(),
                rhs: self.nodes[b].shape.clone(),
            });
        }
        let av = &self.nodes[a].values;
        let bv = &self.nodes[b].values;
        let mut values = vec![S::zero(); n * m];
        for i in 0..n {
            for j in 0..m {
                let mut acc = S::zero();
                for l in 0..ka {
                    acc += av[i * ka + l] * bv[j * ka + l];
                }
                values[i * m + j] = acc;
            }
        }
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(vec![n, m], values, Op::MatmulNt(a, b), needs))
    }

    /// Concatenate 2-d tensors along `axis` (0 = stack rows, 1 = widen rows).
    pub fn concat(&mut self, axis: usize, inputs: &[NodeId]) -> Result<NodeId> {
        if inputs.is_empty() || axis > 1 {
            return Err(TensorError::InvalidArgument {
                op: "concat",
                msg: format!("need >=1 input and axis in {{0,1}}, got {} inputs, axis {axis}", inputs.len()),
            });
        }
        let (n0, k0) = self.dims2("concat", inputs[0])?;
        let mut values;
        let shape;
        if axis == 0 {
            let mut rows = 0;
            for &id in inputs {
                let (n, k) = self.dims2("concat", id)?;
                if k != k0 {
                    return Err(TensorError::ShapeMismatch {
                        op: "concat",
                        lhs: vec![n0, k0],
                        rhs: vec![n, k],
                    });
                }
                rows += n;
            }
            values = Vec::with_capacity(rows * k0);
            for &id in inputs {
                values.extend_from_slice(&self.nodes[id].values);
            }
            shape = vec![rows, k0];
        } else {
            let mut cols = 0;
            for &id in inputs {
                let (n, k) = self.dims2("concat", id)?;
                if n != n0 {
                    return Err(TensorError::ShapeMismatch {
                        op: "concat",
                        lhs: vec![n0, k0],
                        rhs: vec![n, k],
                    });
                }
                cols += k;
            }
            values = vec![S::zero(); n0 * cols];
            let mut offset = 0;
            for &id in inputs {
                let (_, k) = self.dims2("concat", id)?;
                for i in 0..n0 {
                    let src = &self.nodes[id].values[i * k..(i + 1) * k];
                    values[i * cols + offset..i * cols + offset + k].copy_from_slice(src);
                }
                offset += k;
            }
            shape = vec![n0, cols];
        }
        let needs = inputs.iter().any(|&id| self.needs(id));
        Ok(self.push(shape, values, Op::Concat { axis, inputs: inputs.to_vec() }, needs))
    }

    pub fn slice_rows(&mut self, a: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let (n, k) = self.dims2("slice_rows", a)?;
        if start + len > n {
            return Err(TensorError::InvalidArgument {
                op: "slice_rows",
                msg: format!("rows {start}..{} out of 0..{n}", start + len),
            });
        }
        let values = self.nodes[a].values[start * k..(start + len) * k].to_vec();
        let needs = self.needs(a);
        Ok(self.push(vec![len, k], values, Op::SliceRows { input: a, start }, needs))
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let (n, k) = self.dims2("slice_cols", a)?;
        if start + len > k {
            return Err(TensorError::InvalidArgument {
                op: "slice_cols",
                msg: format!("cols {start}..{} out of 0..{k}", start + len),
            });
        }
        let mut values = Vec::with_capacity(n * len);
        for i in 0..n {
            values.extend_from_slice(&self.nodes[a].values[i * k + start..i * k + start + len]);
        }
        let needs = self.needs(a);
        Ok(self.push(vec![n, len], values, Op::SliceCols { input: a, start }, needs))
    }

    /// Gather rows of `table` (v,d) by index -> (ids.len(), d).
    pub fn embedding_lookup(&mut self, table: NodeId, ids: &[usize]) -> Result<NodeId> {
        let (v, d) = self.dims2("embedding_lookup", table)?;
        if let Some(&bad) = ids.iter().find(|&&i| i >= v) {
            return Err(TensorError::InvalidArgument {
                op: "embedding_lookup",
                msg: format!("id {bad} out of vocabulary 0..{v}"),
            });
        }
        let mut values = Vec::with_capacity(ids.len() * d);
        for &i in ids {
            values.extend_from_slice(&self.nodes[table].values[i * d..(i + 1) * d]);
        }
        let needs = self.needs(table);
        Ok(self.push(
            vec![ids.len(), d],
            values,
            Op::Embedding { table, ids: ids.to_vec() },
            needs,
        ))
    }

    // ---- convolution and pooling -----------------------------------------

    /// 1-d convolution over the row axis with zero padding at the end, so the
    /// output keeps the input length. Input (n,d), kernel (window*d, f),
    /// bias (1,f) -> (n,f).
    pub fn conv1d(&mut self, input: NodeId, kernel: NodeId, bias: NodeId, window: usize) -> Result<NodeId> {
        let (n, d) = self.dims2("conv1d", input)?;
        let (kd, f) = self.dims2("conv1d", kernel)?;
        if window == 0 || kd != window * d {
            return Err(TensorError::ShapeMismatch {
                op: "conv1d",
                lhs: vec![n, d],
                rhs: vec![kd, f],
            });
        }
        let (bn, bf) = self.dims2("conv1d", bias)?;
        if bn != 1 || bf != f {
            return Err(TensorError::ShapeMismatch {
                op: "conv1d",
                lhs: vec![1, f],
                rhs: vec![bn, bf],
            });
        }
        let xv = &self.nodes[input].values;
        let kv = &self.nodes[kernel].values;
        let bv = &self.nodes[bias].values;
        let mut values = vec![S::zero(); n * f];
        for i in 0..n {
            for o in 0..f {
                let mut acc = bv[o];
                for t in 0..window {
                    if i + t >= n {
                        break;
                    }
                    for j in 0..d {
                        acc += xv[(i + t) * d + j] * kv[(t * d + j) * f + o];
                    }
                }
                values[i * f + o] = acc;
            }
        }
        let needs = self.needs(input) || self.needs(kernel) || self.needs(bias);
        Ok(self.push(vec![n, f], values, Op::Conv1d { input, kernel, bias, window }, needs))
    }

    /// 2-d convolution with symmetric zero padding. Input (c,h,w), kernel
    /// (f, c*kh*kw), bias (1,f) -> (f, h+2p-kh+1, w+2p-kw+1).
    pub fn conv2d(
        &mut self,
        input: NodeId,
        kernel: NodeId,
        bias: NodeId,
        kh: usize,
        kw: usize,
        pad: usize,
    ) -> Result<NodeId> {
        let (c, h, w) = self.dims3("conv2d", input)?;
        let (f, kck) = self.dims2("conv2d", kernel)?;
        if kh == 0 || kw == 0 || kck != c * kh * kw {
            return Err(TensorError::ShapeMismatch {
                op: "conv2d",
                lhs: vec![c, h, w],
                rhs: vec![f, kck],
            });
        }
        if h + 2 * pad < kh || w + 2 * pad < kw {
            return Err(TensorError::InvalidArgument {
                op: "conv2d",
                msg: format!("kernel {kh}x{kw} larger than padded input {h}x{w} (pad {pad})"),
            });
        }
        let (bn, bf) = self.dims2("conv2d", bias)?;
        if bn != 1 || bf != f {
            return Err(TensorError::ShapeMismatch {
                op: "conv2d",
                lhs: vec![1, f],
                rhs: vec![bn, bf],
            });
        }
        let oh = h + 2 * pad - kh + 1;
        let ow = w + 2 * pad - kw + 1;
        let xv = &self.nodes[input].values;
        let kv = &self.nodes[kernel].values;
        let bv = &self.nodes[bias].values;
        let mut values = vec![S::zero(); f * oh * ow];
        for o in 0..f {
            for r in 0..oh {
                for s in 0..ow {
                    let mut acc = bv[o];
                    for ci in 0..c {
                        for u in 0..kh {
                            let ir = r + u;
                            if ir < pad || ir - pad >= h {
                                continue;
                            }
                            for v in 0..kw {
                                let ic = s + v;
                                if ic < pad || ic - pad >= w {
                                    continue;
                                }
                                acc += xv[ci * h * w + (ir - pad) * w + (ic - pad)]
                                    * kv[o * kck + ci * kh * kw + u * kw + v];
                            }
                        }
                    }
                    values[o * oh * ow + r * ow + s] = acc;
                }
            }
        }
        let needs = self.needs(input) || self.needs(kernel) || self.needs(bias);
        Ok(self.push(
            vec![f, oh, ow],
            values,
            Op::Conv2d { input, kernel, bias, kh, kw, pad },
            needs,
        ))
    }

    /// Non-overlapping max pooling with ceil semantics (border windows may be
    /// smaller). (c,h,w) -> (c, ceil(h/win_h), ceil(w/win_w)).
    pub fn max_pool2d(&mut self, input: NodeId, win_h: usize, win_w: usize) -> Result<NodeId> {
        let (c, h, w) = self.dims3("max_pool2d", input)?;
        if win_h == 0 || win_w == 0 {
            return Err(TensorError::InvalidArgument {
                op: "max_pool2d",
                msg: "zero window".into(),
            });
        }
        let oh = h.div_ceil(win_h);
        let ow = w.div_ceil(win_w);
        let xv = &self.nodes[input].values;
        let mut values = vec![S::zero(); c * oh * ow];
        for ci in 0..c {
            for r in 0..oh {
                for s in 0..ow {
                    let mut best = S::neg_infinity();
                    for ir in r * win_h..((r + 1) * win_h).min(h) {
                        for iw in s * win_w..((s + 1) * win_w).min(w) {
                            let v = xv[ci * h * w + ir * w + iw];
                            if v > best {
                                best = v;
                            }
                        }
                    }
                    values[ci * oh * ow + r * ow + s] = best;
                }
            }
        }
        let needs = self.needs(input);
        Ok(self.push(vec![c, oh, ow], values, Op::MaxPool2d { input, win_h, win_w }, needs))
    }

    /// Max pooling onto a fixed output grid; window edges follow
    /// floor(i*h/oh)..ceil((i+1)*h/oh), so any input size >= 1 works.
    pub fn adaptive_max_pool2d(&mut self, input: NodeId, out_h: usize, out_w: usize) -> Result<NodeId> {
        let (c, h, w) = self.dims3("adaptive_max_pool2d", input)?;
        if out_h == 0 || out_w == 0 {
            return Err(TensorError::InvalidArgument {
                op: "adaptive_max_pool2d",
                msg: "zero output grid".into(),
            });
        }
        let xv = &self.nodes[input].values;
        let mut values = vec![S::zero(); c * out_h * out_w];
        for ci in 0..c {
            for r in 0..out_h {
                let (r0, r1) = adaptive_window(r, h, out_h);
                for s in 0..out_w {
                    let (s0, s1) = adaptive_window(s, w, out_w);
                    let mut best = S::neg_infinity();
                    for ir in r0..r1 {
                        for iw in s0..s1 {
                            let v = xv[ci * h * w + ir * w + iw];
                            if v > best {
                                best = v;
                            }
                        }
                    }
                    values[ci * out_h * out_w + r * out_w + s] = best;
                }
            }
        }
        let needs = self.needs(input);
        Ok(self.push(
            vec![c, out_h, out_w],
            values,
            Op::AdaptiveMaxPool2d { input },
            needs,
        ))
    }

    // ---- reductions -------------------------------------------------------

    /// Column-wise max over rows ("max over time"): (n,k) -> (1,k).
    pub fn max_rows(&mut self, a: NodeId) -> Result<NodeId> {
        let (n, k) = self.dims2("max_rows", a)?;
        if n == 0 {
            return Err(TensorError::InvalidArgument { op: "max_rows", msg: "empty input".into() });
        }
        let xv = &self.nodes[a].values;
        let mut values = xv[0..k].to_vec();
        for i in 1..n {
            for j in 0..k {
                if xv[i * k + j] > values[j] {
                    values[j] = xv[i * k + j];
                }
            }
        }
        let needs = self.needs(a);
        Ok(self.push(vec![1, k], values, Op::MaxRows(a), needs))
    }

    /// Column-wise mean over rows: (n,k) -> (1,k).
    pub fn mean_rows(&mut self, a: NodeId) -> Result<NodeId> {
        let (n, k) = self.dims2("mean_rows", a)?;
        if n == 0 {
            return Err(TensorError::InvalidArgument { op: "mean_rows", msg: "empty input".into() });
        }
        let xv = &self.nodes[a].values;
        let inv = S::one() / S::from_f64(n as f64);
        let mut values = vec![S::zero(); k];
        for i in 0..n {
            for j in 0..k {
                values[j] += xv[i * k + j];
            }
        }
        for v in values.iter_mut() {
            *v *= inv;
        }
        let needs = self.needs(a);
        Ok(self.push(vec![1, k], values, Op::MeanRows(a), needs))
    }

    /// Mean over every element: (..) -> (1,1).
    pub fn mean(&mut self, a: NodeId) -> Result<NodeId> {
        let numel = self.nodes[a].values.len();
        if numel == 0 {
            return Err(TensorError::InvalidArgument { op: "mean", msg: "empty input".into() });
        }
        let sum: S = self.nodes[a].values.iter().copied().sum();
        let v = sum / S::from_f64(numel as f64);
        let needs = self.needs(a);
        Ok(self.push(vec![1, 1], vec![v], Op::Mean(a), needs))
    }

    // ---- nonlinearities ----------------------------------------------------

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let values = self.nodes[a]
            .values
            .iter()
            .map(|&x| if x > S::zero() { x } else { S::zero() })
            .collect();
        let needs = self.needs(a);
        self.push(self.nodes[a].shape.clone(), values, Op::Relu(a), needs)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let values = self.nodes[a].values.iter().map(|&x| x.tanh()).collect();
        let needs = self.needs(a);
        self.push(self.nodes[a].shape.clone(), values, Op::Tanh(a), needs)
    }

    pub fn logistic(&mut self, a: NodeId) -> NodeId {
        let values = self.nodes[a].values.iter().map(|&x| logistic_fn(x)).collect();
        let needs = self.needs(a);
        self.push(self.nodes[a].shape.clone(), values, Op::Logistic(a), needs)
    }

    /// Row-wise softmax with the usual max-shift for stability.
    pub fn softmax_rows(&mut self, a: NodeId) -> Result<NodeId> {
        let (n, k) = self.dims2("softmax_rows", a)?;
        if k == 0 {
            return Err(TensorError::InvalidArgument { op: "softmax_rows", msg: "empty rows".into() });
        }
        let xv = &self.nodes[a].values;
        let mut values = vec![S::zero(); n * k];
        for i in 0..n {
            let row = &xv[i * k..(i + 1) * k];
            let max = row.iter().copied().fold(S::neg_infinity(), S::max);
            let mut sum = S::zero();
            for j in 0..k {
                let e = (row[j] - max).exp();
                values[i * k + j] = e;
                sum += e;
            }
            for j in 0..k {
                values[i * k + j] /= sum;
            }
        }
        let needs = self.needs(a);
        Ok(self.push(vec![n, k], values, Op::SoftmaxRows(a), needs))
    }

    // ---- composite similarity ops ------------------------------------------

    /// All-pairs cosine similarity of rows: (n,k) x (m,k) -> (n,m).
    /// Rows with zero norm yield similarity 0.
    pub fn cosine_similarity_matrix(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (n, ka) = self.dims2("cosine_similarity_matrix", a)?;
        let (m, kb) = self.dims2("cosine_similarity_matrix", b)?;
        if ka != kb {
            return Err(TensorError::ShapeMismatch {
                op: "cosine_similarity_matrix",
                lhs: self.nodes[a].shape.clone(),
                rhs: self.nodes[b].shape.clone(),
            });
        }
        let av = &self.nodes[a].values;
        let bv = &self.nodes[b].values;
        let na: Vec<S> = (0..n).map(|i| row_norm(av, i, ka)).collect();
        let nb: Vec<S> = (0..m).map(|j| row_norm(bv, j, ka)).collect();
        let mut values = vec![S::zero(); n * m];
        for i in 0..n {
            for j in 0..m {
                if na[i] == S::zero() || nb[j] == S::zero() {
                    continue;
                }
                let mut dot = S::zero();
                for l in 0..ka {
                    dot += av[i * ka + l] * bv[j * ka + l];
                }
                values[i * m + j] = dot / (na[i] * nb[j]);
            }
        }
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(vec![n, m], values, Op::CosineSim(a, b), needs))
    }

    /// Row-wise projection of `hidden` onto `align`:
    /// p_i = ((h_i . a_i) / (a_i . a_i)) a_i, with p_i = 0 when a_i = 0.
    /// The orthogonal complement is `sub(hidden, project_rows(..))`.
    pub fn project_rows(&mut self, hidden: NodeId, align: NodeId) -> Result<NodeId> {
        self.same_shape("project_rows", hidden, align)?;
        let (n, k) = self.dims2("project_rows", hidden)?;
        let hv = &self.nodes[hidden].values;
        let av = &self.nodes[align].values;
        let mut values = vec![S::zero(); n * k];
        for i in 0..n {
            let h = &hv[i * k..(i + 1) * k];
            let a = &av[i * k..(i + 1) * k];
            let t: S = a.iter().map(|&x| x * x).sum();
            if t == S::zero() {
                continue;
            }
            let s: S = h.iter().zip(a).map(|(&x, &y)| x * y).sum();
            let c = s / t;
            for j in 0..k {
                values[i * k + j] = c * a[j];
            }
        }
        let needs = self.needs(hidden) || self.needs(align);
        Ok(self.push(vec![n, k], values, Op::ProjectRows { hidden, align }, needs))
    }

    // ---- losses -------------------------------------------------------------

    /// Mean negative log-likelihood of per-row probability vectors:
    /// -(1/n) sum_i ln p[i, labels[i]].
    pub fn cross_entropy(&mut self, probs: NodeId, labels: &[usize]) -> Result<NodeId> {
        let (n, k) = self.dims2("cross_entropy", probs)?;
        if labels.len() != n || n == 0 {
            return Err(TensorError::InvalidArgument {
                op: "cross_entropy",
                msg: format!("{n} prediction rows vs {} labels", labels.len()),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
            return Err(TensorError::InvalidArgument {
                op: "cross_entropy",
                msg: format!("label {bad} out of 0..{k}"),
            });
        }
        let pv = &self.nodes[probs].values;
        let mut sum = S::zero();
        for (i, &y) in labels.iter().enumerate() {
            sum -= pv[i * k + y].max(S::min_positive_value()).ln();
        }
        let v = sum / S::from_f64(n as f64);
        let needs = self.needs(probs);
        Ok(self.push(
            vec![1, 1],
            vec![v],
            Op::CrossEntropy { probs, labels: labels.to_vec() },
            needs,
        ))
    }

    /// Binary cross-entropy of a single probability against target in {0,1}.
    pub fn bce(&mut self, prob: NodeId, target: S) -> Result<NodeId> {
        if self.nodes[prob].values.len() != 1 {
            return Err(TensorError::InvalidArgument {
                op: "bce",
                msg: format!("expected scalar probability, got {:?}", self.nodes[prob].shape),
            });
        }
        let p = clamp_prob(self.nodes[prob].values[0]);
        let v = -(target * p.ln() + (S::one() - target) * (S::one() - p).ln());
        let needs = self.needs(prob);
        Ok(self.push(vec![1, 1], vec![v], Op::Bce { prob, target }, needs))
    }

    pub fn reshape(&mut self, a: NodeId, shape: Vec<usize>) -> Result<NodeId> {
        let numel: usize = shape.iter().product();
        if numel != self.nodes[a].values.len() {
            return Err(TensorError::InvalidArgument {
                op: "reshape",
                msg: format!(
                    "cannot view {:?} as {shape:?}",
                    self.nodes[a].shape
                ),
            });
        }
        let values = self.nodes[a].values.clone();
        let needs = self.needs(a);
        Ok(self.push(shape, values, Op::Reshape(a), needs))
    }

    // ---- reverse pass --------------------------------------------------------

    /// Run reverse-mode accumulation from a scalar loss. Node gradients stay
    /// on the tape for inspection; use `export_grads` to move parameter
    /// gradients into their `ParameterSet`.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if self.nodes[loss].values.len() != 1 {
            return Err(TensorError::NonScalarLoss(self.nodes[loss].shape.clone()));
        }
        let n = self.nodes.len();
        let mut grads: Vec<Option<Vec<S>>> = vec![None; n];
        grads[loss] = Some(vec![S::one()]);
        for id in (0..=loss).rev() {
            if !self.nodes[id].needs_grad {
                grads[id] = None;
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            self.backprop(id, &g, &mut grads);
            grads[id] = Some(g);
        }
        for (node, grad) in self.nodes.iter_mut().zip(grads) {
            node.grad = grad;
        }
        Ok(())
    }

    /// Add accumulated parameter gradients into `params`, then leave the tape
    /// intact (callers that are done should `clear`).
    pub fn export_grads(&self, params: &mut ParameterSet<S>) -> Result<()> {
        for (name, &id) in &self.param_nodes {
            if let Some(grad) = self.nodes[id].grad.as_deref() {
                params.get_mut(name)?.add_grad(grad);
            }
        }
        Ok(())
    }

    /// backward + export_grads + clear, the whole training-step tail.
    pub fn backward_params(&mut self, loss: NodeId, params: &mut ParameterSet<S>) -> Result<()> {
        self.backward(loss)?;
        self.export_grads(params)?;
        self.clear();
        Ok(())
    }

    fn backprop(&self, id: NodeId, g: &[S], grads: &mut [Option<Vec<S>>]) {
        macro_rules! acc {
            ($input:expr) => {{
                let input: NodeId = $input;
                let len = self.nodes[input].values.len();
                grads[input].get_or_insert_with(|| vec![S::zero(); len])
            }};
        }
        match &self.nodes[id].op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                if self.needs(*a) {
                    let ga = acc!(*a);
                    for (x, &gi) in ga.iter_mut().zip(g) {
                        *x += gi;
                    }
                }
                if self.needs(*b) {
                    let gb = acc!(*b);
                    for (x, &gi) in gb.iter_mut().zip(g) {
                        *x += gi;
                    }
                }
            }
            Op::AddBias(m, b) => {
                let k = self.nodes[*b].values.len();
                if self.needs(*m) {
                    let gm = acc!(*m);
                    for (x, &gi) in gm.iter_mut().zip(g) {
                        *x += gi;
                    }
                }
                if self.needs(*b) {
                    let gb = acc!(*b);
                    for (i, &gi) in g.iter().enumerate() {
                        gb[i % k] += gi;
                    }
                }
            }
            Op::Sub(a, b) => {
                if self.needs(*a) {
                    let ga = acc!(*a);
                    for (x, &gi) in ga.iter_mut().zip(g) {
                        *x += gi;
                    }
                }
                if self.needs(*b) {
                    let gb = acc!(*b);
                    for (x, &gi) in gb.iter_mut().zip(g) {
                        *x -= gi;
                    }
                }
            }
            Op::Mul(a, b) => {
                if self.needs(*a) {
                    let bv = &self.nodes[*b].values;
                    let ga = acc!(*a);
                    for i in 0..g.len() {
                        ga[i] += g[i] * bv[i];
                    }
                }
                if self.needs(*b) {
                    let av = &self.nodes[*a].values;
                    let gb = acc!(*b);
                    for i in 0..g.len() {
                        gb[i] += g[i] * av[i];
                    }
                }
            }
            Op::Scale(a, c) => {
                if self.needs(*a) {
                    let c = *c;
                    let ga = acc!(*a);
                    for (x, &gi) in ga.iter_mut().zip(g) {
                        *x += gi * c;
                    }
                }
            }
            Op::Matmul(a, b) => {
                let (n, ka) = (self.nodes[*a].shape[0], self.nodes[*a].shape[1]);
                let m = self.nodes[*b].shape[1];
                if self.needs(*a) {
                    let bv = &self.nodes[*b].values;
                    let ga = acc!(*a);
                    // dA = G @ B^T
                    for i in 0..n {
                        for l in 0..ka {
                            let mut s = S::zero();
                            for j in 0..m {
                                s += g[i * m + j] * bv[l * m + j];
                            }
                            ga[i * ka + l] += s;
                        }
                    }
                }
                if self.needs(*b) {
                    let av = &self.nodes[*a].values;
                    let gb = acc!(*b);
                    // dB = A^T @ G
                    for l in 0..ka {
                        for i in 0..n {
                            let x = av[i * ka + l];
                            if x == S::zero() {
                                continue;
                            }
                            for j in 0..m {
                                gb[l * m + j] += x * g[i * m + j];
                            }
                        }
                    }
                }
            }
            Op::MatmulNt(a, b) => {
                let (n, k) = (self.nodes[*a].shape[0], self.nodes[*a].shape[1]);
                let m = self.nodes[*b].shape[0];
                if self.needs(*a) {
                    let bv = &self.nodes[*b].values;
                    let ga = acc!(*a);
                    // dA = G @ B
                    for i in 0..n {
                        for j in 0..m {
                            let gi = g[i * m + j];
                            if gi == S::zero() {
                                continue;
                            }
                            for l in 0..k {
                                ga[i * k + l] += gi * bv[j * k + l];
                            }
                        }
                    }
                }
                if self.needs(*b) {
                    let av = &self.nodes[*a].values;
                    let gb = acc!(*b);
                    // dB = G^T @ A
                    for j in 0..m {
                        for i in 0..n {
                            let gi = g[i * m + j];
                            if gi == S::zero() {
                                continue;
                            }
                            for l in 0..k {
                                gb[j * k + l] += gi * av[i * k + l];
                            }
                        }
                    }
                }
            }
            Op::Concat { axis, inputs } => {
                if *axis == 0 {
                    let mut offset = 0;
                    for &inp in inputs {
                        let len = self.nodes[inp].values.len();
                        if self.needs(inp) {
                            let gi = acc!(inp);
                            for t in 0..len {
                                gi[t] += g[offset + t];
                            }
                        }
                        offset += len;
                    }
                } else {
                    let rows = self.nodes[id].shape[0];
                    let total_cols = self.nodes[id].shape[1];
                    let mut offset = 0;
                    for &inp in inputs {
                        let k = self.nodes[inp].shape[1];
                        if self.needs(inp) {
                            let gi = acc!(inp);
                            for i in 0..rows {
                                for j in 0..k {
                                    gi[i * k + j] += g[i * total_cols + offset + j];
                                }
                            }
                        }
                        offset += k;
                    }
                }
            }
            Op::SliceRows { input, start } => {
                if self.needs(*input) {
                    let k = self.nodes[*input].shape[1];
                    let gi = acc!(*input);
                    for (t, &gv) in g.iter().enumerate() {
                        gi[start * k + t] += gv;
                    }
                }
            }
            Op::SliceCols { input, start } => {
                if self.needs(*input) {
                    let k = self.nodes[*input].shape[1];
                    let len = self.nodes[id].shape[1];
                    let n = self.nodes[id].shape[0];
                    let gi = acc!(*input);
                    for i in 0..n {
                        for j in 0..len {
                            gi[i * k + start + j] += g[i * len + j];
                        }
                    }
                }
            }
            Op::Embedding { table, ids } => {
                if self.needs(*table) {
                    let d = self.nodes[*table].shape[1];
                    let gt = acc!(*table);
                    for (row, &idx) in ids.iter().enumerate() {
                        for j in 0..d {
                            gt[idx * d + j] += g[row * d + j];
                        }
                    }
                }
            }
            Op::Conv1d { input, kernel, bias, window } => {
                let (n, d) = (self.nodes[*input].shape[0], self.nodes[*input].shape[1]);
                let f = self.nodes[*kernel].shape[1];
                if self.needs(*input) {
                    let kv = &self.nodes[*kernel].values;
                    let gx = acc!(*input);
                    for i in 0..n {
                        for o in 0..f {
                            let gi = g[i * f + o];
                            if gi == S::zero() {
                                continue;
                            }
                            for t in 0..*window {
                                if i + t >= n {
                                    break;
                                }
                                for j in 0..d {
                                    gx[(i + t) * d + j] += gi * kv[(t * d + j) * f + o];
                                }
                            }
                        }
                    }
                }
                if self.needs(*kernel) {
                    let xv = &self.nodes[*input].values;
                    let gk = acc!(*kernel);
                    for i in 0..n {
                        for o in 0..f {
                            let gi = g[i * f + o];
                            if gi == S::zero() {
                                continue;
                            }
                            for t in 0..*window {
                                if i + t >= n {
                                    break;
                                }
                                for j in 0..d {
                                    gk[(t * d + j) * f + o] += gi * xv[(i + t) * d + j];
                                }
                            }
                        }
                    }
                }
                if self.needs(*bias) {
                    let gb = acc!(*bias);
                    for i in 0..n {
                        for o in 0..f {
                            gb[o] += g[i * f + o];
                        }
                    }
                }
            }
            Op::Conv2d { input, kernel, bias, kh, kw, pad } => {
                let (c, h, w) = (
                    self.nodes[*input].shape[0],
                    self.nodes[*input].shape[1],
                    self.nodes[*input].shape[2],
                );
                let f = self.nodes[*kernel].shape[0];
                let kck = self.nodes[*kernel].shape[1];
                let (oh, ow) = (self.nodes[id].shape[1], self.nodes[id].shape[2]);
                let (kh, kw, pad) = (*kh, *kw, *pad);
                if self.needs(*input) {
                    let kv = &self.nodes[*kernel].values;
                    let gx = acc!(*input);
                    for o in 0..f {
                        for r in 0..oh {
                            for s in 0..ow {
                                let gi = g[o * oh * ow + r * ow + s];
                                if gi == S::zero() {
                                    continue;
                                }
                                for ci in 0..c {
                                    for u in 0..kh {
                                        let ir = r + u;
                                        if ir < pad || ir - pad >= h {
                                            continue;
                                        }
                                        for v in 0..kw {
                                            let ic = s + v;
                                            if ic < pad || ic - pad >= w {
                                                continue;
                                            }
                                            gx[ci * h * w + (ir - pad) * w + (ic - pad)] +=
                                                gi * kv[o * kck + ci * kh * kw + u * kw + v];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                if self.needs(*kernel) {
                    let xv = &self.nodes[*input].values;
                    let gk = acc!(*kernel);
                    for o in 0..f {
                        for r in 0..oh {
                            for s in 0..ow {
                                let gi = g[o * oh * ow + r * ow + s];
                                if gi == S::zero() {
                                    continue;
                                }
                                for ci in 0..c {
                                    for u in 0..kh {
                                        let ir = r + u;
                                        if ir < pad || ir - pad >= h {
                                            continue;
                                        }
                                        for v in 0..kw {
                                            let ic = s + v;
                                            if ic < pad || ic - pad >= w {
                                                continue;
                                            }
                                            gk[o * kck + ci * kh * kw + u * kw + v] +=
                                                gi * xv[ci * h * w + (ir - pad) * w + (ic - pad)];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                if self.needs(*bias) {
                    let gb = acc!(*bias);
                    for o in 0..f {
                        for t in 0..oh * ow {
                            gb[o] += g[o * oh * ow + t];
                        }
                    }
                }
            }
            Op::MaxPool2d { input, win_h, win_w } => {
                if self.needs(*input) {
                    let (c, h, w) = (
                        self.nodes[*input].shape[0],
                        self.nodes[*input].shape[1],
                        self.nodes[*input].shape[2],
                    );
                    let (oh, ow) = (self.nodes[id].shape[1], self.nodes[id].shape[2]);
                    let xv = &self.nodes[*input].values;
                    let gx = acc!(*input);
                    for ci in 0..c {
                        for r in 0..oh {
                            for s in 0..ow {
                                let gi = g[ci * oh * ow + r * ow + s];
                                if gi == S::zero() {
                                    continue;
                                }
                                let mut best = S::neg_infinity();
                                let mut arg = 0;
                                for ir in r * win_h..((r + 1) * win_h).min(h) {
                                    for iw in s * win_w..((s + 1) * win_w).min(w) {
                                        let idx = ci * h * w + ir * w + iw;
                                        if xv[idx] > best {
                                            best = xv[idx];
                                            arg = idx;
                                        }
                                    }
                                }
                                gx[arg] += gi;
                            }
                        }
                    }
                }
            }
            Op::AdaptiveMaxPool2d { input } => {
                if self.needs(*input) {
                    let (c, h, w) = (
                        self.nodes[*input].shape[0],
                        self.nodes[*input].shape[1],
                        self.nodes[*input].shape[2],
                    );
                    let (oh, ow) = (self.nodes[id].shape[1], self.nodes[id].shape[2]);
                    let xv = &self.nodes[*input].values;
                    let gx = acc!(*input);
                    for ci in 0..c {
                        for r in 0..oh {
                            let (r0, r1) = adaptive_window(r, h, oh);
                            for s in 0..ow {
                                let gi = g[ci * oh * ow + r * ow + s];
                                if gi == S::zero() {
                                    continue;
                                }
                                let (s0, s1) = adaptive_window(s, w, ow);
                                let mut best = S::neg_infinity();
                                let mut arg = 0;
                                for ir in r0..r1 {
                                    for iw in s0..s1 {
                                        let idx = ci * h * w + ir * w + iw;
                                        if xv[idx] > best {
                                            best = xv[idx];
                                            arg = idx;
                                        }
                                    }
                                }
                                gx[arg] += gi;
                            }
                        }
                    }
                }
            }
            Op::MaxRows(a) => {
                if self.needs(*a) {
                    let (n, k) = (self.nodes[*a].shape[0], self.nodes[*a].shape[1]);
                    let xv = &self.nodes[*a].values;
                    let ga = acc!(*a);
                    for j in 0..k {
                        let mut best = xv[j];
                        let mut arg = 0;
                        for i in 1..n {
                            if xv[i * k + j] > best {
                                best = xv[i * k + j];
                                arg = i;
                            }
                        }
                        ga[arg * k + j] += g[j];
                    }
                }
            }
            Op::MeanRows(a) => {
                if self.needs(*a) {
                    let (n, k) = (self.nodes[*a].shape[0], self.nodes[*a].shape[1]);
                    let inv = S::one() / S::from_f64(n as f64);
                    let ga = acc!(*a);
                    for i in 0..n {
                        for j in 0..k {
                            ga[i * k + j] += g[j] * inv;
                        }
                    }
                }
            }
            Op::Mean(a) => {
                if self.needs(*a) {
                    let numel = self.nodes[*a].values.len();
                    let gi = g[0] / S::from_f64(numel as f64);
                    let ga = acc!(*a);
                    for x in ga.iter_mut() {
                        *x += gi;
                    }
                }
            }
            Op::Relu(a) => {
                if self.needs(*a) {
                    let xv = &self.nodes[*a].values;
                    let ga = acc!(*a);
                    for i in 0..g.len() {
                        if xv[i] > S::zero() {
                            ga[i] += g[i];
                        }
                    }
                }
            }
            Op::Tanh(a) => {
                if self.needs(*a) {
                    let yv = &self.nodes[id].values;
                    let ga = acc!(*a);
                    for i in 0..g.len() {
                        ga[i] += g[i] * (S::one() - yv[i] * yv[i]);
                    }
                }
            }
            Op::Logistic(a) => {
                if self.needs(*a) {
                    let yv = &self.nodes[id].values;
                    let ga = acc!(*a);
                    for i in 0..g.len() {
                        ga[i] += g[i] * yv[i] * (S::one() - yv[i]);
                    }
                }
            }
            Op::SoftmaxRows(a) => {
                if self.needs(*a) {
                    let (n, k) = (self.nodes[id].shape[0], self.nodes[id].shape[1]);
                    let yv = &self.nodes[id].values;
                    let ga = acc!(*a);
                    for i in 0..n {
                        let mut dot = S::zero();
                        for j in 0..k {
                            dot += g[i * k + j] * yv[i * k + j];
                        }
                        for j in 0..k {
                            ga[i * k + j] += yv[i * k + j] * (g[i * k + j] - dot);
                        }
                    }
                }
            }
            Op::CosineSim(a, b) => {
                let (n, k) = (self.nodes[*a].shape[0], self.nodes[*a].shape[1]);
                let m = self.nodes[*b].shape[0];
                let av = &self.nodes[*a].values;
                let bv = &self.nodes[*b].values;
                let yv = &self.nodes[id].values;
                let na: Vec<S> = (0..n).map(|i| row_norm(av, i, k)).collect();
                let nb: Vec<S> = (0..m).map(|j| row_norm(bv, j, k)).collect();
                if self.needs(*a) {
                    let ga = acc!(*a);
                    for i in 0..n {
                        if na[i] == S::zero() {
                            continue;
                        }
                        for j in 0..m {
                            let gi = g[i * m + j];
                            if gi == S::zero() || nb[j] == S::zero() {
                                continue;
                            }
                            let y = yv[i * m + j];
                            for l in 0..k {
                                ga[i * k + l] += gi
                                    * (bv[j * k + l] / (na[i] * nb[j])
                                        - y * av[i * k + l] / (na[i] * na[i]));
                            }
                        }
                    }
                }
                if self.needs(*b) {
                    let gb = acc!(*b);
                    for j in 0..m {
                        if nb[j] == S::zero() {
                            continue;
                        }
                        for i in 0..n {
                            let gi = g[i * m + j];
                            if gi == S::zero() || na[i] == S::zero() {
                                continue;
                            }
                            let y = yv[i * m + j];
                            for l in 0..k {
                                gb[j * k + l] += gi
                                    * (av[i * k + l] / (na[i] * nb[j])
                                        - y * bv[j * k + l] / (nb[j] * nb[j]));
                            }
                        }
                    }
                }
            }
            Op::ProjectRows { hidden, align } => {
                let (n, k) = (self.nodes[*hidden].shape[0], self.nodes[*hidden].shape[1]);
                let hv = &self.nodes[*hidden].values;
                let av = &self.nodes[*align].values;
                for i in 0..n {
                    let h = &hv[i * k..(i + 1) * k];
                    let a = &av[i * k..(i + 1) * k];
                    let gr = &g[i * k..(i + 1) * k];
                    let t: S = a.iter().map(|&x| x * x).sum();
                    if t == S::zero() {
                        continue;
                    }
                    let s: S = h.iter().zip(a).map(|(&x, &y)| x * y).sum();
                    let ga_dot: S = gr.iter().zip(a).map(|(&x, &y)| x * y).sum();
                    if self.needs(*hidden) {
                        let gh = acc!(*hidden);
                        for j in 0..k {
                            gh[i * k + j] += ga_dot / t * a[j];
                        }
                    }
                    if self.needs(*align) {
                        let gav = acc!(*align);
                        let two = S::one() + S::one();
                        for j in 0..k {
                            gav[i * k + j] += ga_dot / t * h[j] + s / t * gr[j]
                                - two * s * ga_dot / (t * t) * a[j];
                        }
                    }
                }
            }
            Op::CrossEntropy { probs, labels } => {
                if self.needs(*probs) {
                    let k = self.nodes[*probs].shape[1];
                    let n = labels.len();
                    let pv = &self.nodes[*probs].values;
                    let inv_n = S::one() / S::from_f64(n as f64);
                    let gp = acc!(*probs);
                    for (i, &y) in labels.iter().enumerate() {
                        let p = pv[i * k + y].max(S::min_positive_value());
                        gp[i * k + y] -= g[0] * inv_n / p;
                    }
                }
            }
            Op::Bce { prob, target } => {
                if self.needs(*prob) {
                    let p = clamp_prob(self.nodes[*prob].values[0]);
                    let gp = acc!(*prob);
                    gp[0] -= g[0] * (*target / p - (S::one() - *target) / (S::one() - p));
                }
            }
            Op::Reshape(a) => {
                if self.needs(*a) {
                    let ga = acc!(*a);
                    for (x, &gi) in ga.iter_mut().zip(g) {
                        *x += gi;
                    }
                }
            }
        }
    }
}

fn logistic_fn<S: Scalar>(x: S) -> S {
    S::one() / (S::one() + (-x).exp())
}

fn clamp_prob<S: Scalar>(p: S) -> S {
    let eps = S::from_f64(1e-12).max(S::min_positive_value());
    p.max(eps).min(S::one() - eps)
}

fn row_norm<S: Scalar>(values: &[S], row: usize, k: usize) -> S {
    values[row * k..(row + 1) * k]
        .iter()
        .map(|&x| x * x)
        .sum::<S>()
        .sqrt()
}

fn adaptive_window(i: usize, extent: usize, out: usize) -> (usize, usize) {
    let start = i * extent / out;
    let end = ((i + 1) * extent).div_ceil(out);
    (start, end.max(start + 1).min(extent.max(1)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn graph() -> Graph<f64> {
        Graph::new()
    }

    #[test]
    fn square_gradient() {
        // f(x) = x^2 at x = 3 -> df/dx = 6
        let mut ps = ParameterSet::new();
        ps.insert("x", Tensor::scalar(3.0)).unwrap();
        let mut g = graph();
        let x = g.param(&ps, "x").unwrap();
        let y = g.mul(x, x).unwrap();
        g.backward(y).unwrap();
        g.export_grads(&mut ps).unwrap();
        assert_eq!(ps.get("x").unwrap().grad().unwrap(), &[6.0]);
    }

    #[test]
    fn product_gradients() {
        // f(x,y) = x*y at (2,5) -> grads (5,2)
        let mut ps = ParameterSet::new();
        ps.insert("x", Tensor::scalar(2.0)).unwrap();
        ps.insert("y", Tensor::scalar(5.0)).unwrap();
        let mut g = graph();
        let x = g.param(&ps, "x").unwrap();
        let y = g.param(&ps, "y").unwrap();
        let f = g.mul(x, y).unwrap();
        g.backward(f).unwrap();
        g.export_grads(&mut ps).unwrap();
        assert_eq!(ps.get("x").unwrap().grad().unwrap(), &[5.0]);
        assert_eq!(ps.get("y").unwrap().grad().unwrap(), &[2.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut g = graph();
        let a = g.constant(vec![1, 2], vec![1.0, 2.0]).unwrap();
        assert!(matches!(g.backward(a), Err(TensorError::NonScalarLoss(_))));
    }

    #[test]
    fn shape_mismatch_names_op_and_shapes() {
        let mut g = graph();
        let a = g.constant(vec![2, 3], vec![0.0; 6]).unwrap();
        let b = g.constant(vec![2, 2], vec![0.0; 4]).unwrap();
        let err = g.matmul(a, b).unwrap_err().to_string();
        assert!(err.contains("matmul"), "{err}");
        assert!(err.contains("[2, 3]") && err.contains("[2, 2]"), "{err}");
    }

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let mut g = graph();
        let a = g.constant(vec![1, 3], vec![0.0; 3]).unwrap();
        let s = g.softmax_rows(a).unwrap();
        for &v in g.value(s) {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut g = graph();
        let a = g
            .constant(vec![2, 4], vec![0.3, -2.0, 5.0, 0.1, 100.0, 100.0, -50.0, 3.0])
            .unwrap();
        let s = g.softmax_rows(a).unwrap();
        for i in 0..2 {
            let row = &g.value(s)[i * 4..(i + 1) * 4];
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn conv2d_valid_all_ones() {
        // 2x2 ones input, single 2x2 ones kernel, no padding -> scalar 4
        let mut g = graph();
        let x = g.constant(vec![1, 2, 2], vec![1.0; 4]).unwrap();
        let k = g.constant(vec![1, 4], vec![1.0; 4]).unwrap();
        let b = g.constant(vec![1, 1], vec![0.0]).unwrap();
        let y = g.conv2d(x, k, b, 2, 2, 0).unwrap();
        assert_eq!(g.shape(y), &[1, 1, 1]);
        assert_eq!(g.value(y), &[4.0]);
    }

    #[test]
    fn max_pool_2x2() {
        let mut g = graph();
        let x = g.constant(vec![1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = g.max_pool2d(x, 2, 2).unwrap();
        assert_eq!(g.shape(y), &[1, 1, 1]);
        assert_eq!(g.value(y), &[4.0]);
    }

    #[test]
    fn cosine_identical_and_orthogonal_rows() {
        let mut g = graph();
        let a = g.constant(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let m = g.cosine_similarity_matrix(a, a).unwrap();
        let v = g.value(m);
        assert!((v[0] - 1.0).abs() < 1e-15 && (v[3] - 1.0).abs() < 1e-15);
        assert!(v[1].abs() < 1e-15 && v[2].abs() < 1e-15);
    }

    #[test]
    fn cosine_zero_row_convention() {
        let mut g = graph();
        let a = g.constant(vec![1, 2], vec![0.0, 0.0]).unwrap();
        let b = g.constant(vec![1, 2], vec![3.0, 4.0]).unwrap();
        let m = g.cosine_similarity_matrix(a, b).unwrap();
        assert_eq!(g.value(m), &[0.0]);
    }

    #[test]
    fn project_rows_parallel_and_plane_case() {
        let mut g = graph();
        // q^h = q^a -> parallel part is q^h itself
        let h = g.constant(vec![1, 2], vec![0.4, -0.7]).unwrap();
        let p = g.project_rows(h, h).unwrap();
        for (x, y) in g.value(p).iter().zip(g.value(h)) {
            assert!((x - y).abs() < 1e-12);
        }
        // q^h = (1,1), q^a = (1,0) -> parallel (1,0), orthogonal (0,1)
        let h2 = g.constant(vec![1, 2], vec![1.0, 1.0]).unwrap();
        let a2 = g.constant(vec![1, 2], vec![1.0, 0.0]).unwrap();
        let p2 = g.project_rows(h2, a2).unwrap();
        let o2 = g.sub(h2, p2).unwrap();
        assert_eq!(g.value(p2), &[1.0, 0.0]);
        assert_eq!(g.value(o2), &[0.0, 1.0]);
    }

    #[test]
    fn project_rows_zero_alignment_convention() {
        let mut g = graph();
        let h = g.constant(vec![1, 3], vec![1.0, 2.0, 3.0]).unwrap();
        let a = g.constant(vec![1, 3], vec![0.0; 3]).unwrap();
        let p = g.project_rows(h, a).unwrap();
        let o = g.sub(h, p).unwrap();
        assert_eq!(g.value(p), &[0.0, 0.0, 0.0]);
        assert_eq!(g.value(o), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn cross_entropy_known_values() {
        let mut g = graph();
        // perfect one-hot -> 0
        let p = g.constant(vec![1, 3], vec![0.0, 1.0, 0.0]).unwrap();
        let l = g.cross_entropy(p, &[1]).unwrap();
        assert!(g.scalar_value(l).abs() < 1e-12);
        // uniform -> ln 3
        let u = g.constant(vec![1, 3], vec![1.0 / 3.0; 3]).unwrap();
        let lu = g.cross_entropy(u, &[2]).unwrap();
        assert!((g.scalar_value(lu) - 3f64.ln()).abs() < 1e-12);
        // batch of 2 with p(correct) = 0.5, 0.25
        let b = g
            .constant(vec![2, 3], vec![0.5, 0.3, 0.2, 0.25, 0.5, 0.25])
            .unwrap();
        let lb = g.cross_entropy(b, &[0, 0]).unwrap();
        let expect = -(0.5f64.ln() + 0.25f64.ln()) / 2.0;
        assert!((g.scalar_value(lb) - expect).abs() < 1e-12);
    }

    #[test]
    fn embedding_rejects_out_of_vocab() {
        let mut g = graph();
        let t = g.constant(vec![3, 2], vec![0.0; 6]).unwrap();
        assert!(g.embedding_lookup(t, &[0, 3]).is_err());
    }

    #[test]
    fn param_node_deduplicated() {
        let mut ps = ParameterSet::new();
        ps.add_zeros("w", vec![1, 2]).unwrap();
        let mut g = graph();
        let a = g.param(&ps, "w").unwrap();
        let b = g.param(&ps, "w").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn frozen_param_gets_no_grad() {
        let mut ps = ParameterSet::new();
        ps.insert("w", Tensor::scalar(2.0).frozen()).unwrap();
        ps.insert("x", Tensor::scalar(3.0)).unwrap();
        let mut g = graph();
        let w = g.param(&ps, "w").unwrap();
        let x = g.param(&ps, "x").unwrap();
        let y = g.mul(w, x).unwrap();
        g.backward(y).unwrap();
        g.export_grads(&mut ps).unwrap();
        assert!(ps.get("w").unwrap().grad().is_none());
        assert_eq!(ps.get("x").unwrap().grad().unwrap(), &[2.0]);
    }

    #[test]
    fn adaptive_pool_smaller_input_than_grid() {
        let mut g = graph();
        let x = g.constant(vec![1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = g.adaptive_max_pool2d(x, 4, 4).unwrap();
        assert_eq!(g.shape(y), &[1, 4, 4]);
        // bottom-right window always sees the max element
        assert_eq!(g.value(y)[15], 4.0);
    }
}
