use ndarray::linalg::general_mat_mul;
use ndarray::{ArrayView2, ArrayViewMut2};

use super::tensor::{Real, Tensor};
use super::AutodiffError;

/// Handle into a [`Graph`]. Inputs of a node always have smaller ids, so
/// the tape is topologically ordered by construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul { a: NodeId, b: NodeId },
    Add { a: NodeId, b: NodeId },
    Sub { a: NodeId, b: NodeId },
    Mul { a: NodeId, b: NodeId },
    AddBias { m: NodeId, bias: NodeId },
    Concat { parts: Vec<NodeId> },
    SliceCols { a: NodeId, from: usize, to: usize },
    LookupRows { table: NodeId, ids: Vec<usize> },
    BlendRows { on: NodeId, off: NodeId, mask: Vec<bool> },
    Tanh { a: NodeId },
    Sigmoid { a: NodeId },
    Exp { a: NodeId },
    Ln { a: NodeId },
    Scale { a: NodeId, c: T },
    AddScalar { a: NodeId },
    Clamp { a: NodeId, lo: T, hi: T },
    SumAll { a: NodeId },
    MeanAll { a: NodeId },
    UnaryFn {
        a: NodeId,
        grad_fn: fn(f64, f64) -> f64,
    },
}

#[derive(Debug)]
struct Node<T: Real> {
    op: Op<T>,
    value: Tensor<T>,
}

/// Append-only differentiation tape. Rebuilt per batch (define-by-run);
/// confined to one thread at a time.
#[derive(Debug, Default)]
pub struct Graph<T: Real> {
    nodes: Vec<Node<T>>,
    backward_done: bool,
}

/// Per-node gradient accumulators produced by [`Graph::backward`].
#[derive(Debug)]
pub struct Gradients<T: Real> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Gradients<T> {
    /// Gradient of the backward root with respect to `id`, if `id` was
    /// reachable from the root.
    pub fn get(&self, id: NodeId) -> Option<&Tensor<T>> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    /// Moves a gradient out, leaving `None` behind.
    pub fn take(&mut self, id: NodeId) -> Option<Tensor<T>> {
        self.grads.get_mut(id.0).and_then(|g| g.take())
    }
}

fn sigmoid_scalar<T: Real>(x: T) -> T {
    if x >= T::ZERO {
        T::ONE / (T::ONE + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::ONE + e)
    }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            backward_done: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op<T>, value: Tensor<T>) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { op, value });
        id
    }

    /// Registers an input tensor (parameter or constant).
    pub fn leaf(&mut self, value: Tensor<T>) -> NodeId {
        self.push(Op::Leaf, value)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        let (m, k) = self.value(a).dims2("matmul")?;
        let (k2, n) = self.value(b).dims2("matmul")?;
        if k != k2 {
            return Err(AutodiffError::ShapeMismatch {
                op: "matmul",
                shapes: vec![vec![m, k], vec![k2, n]],
            });
        }
        let mut out = Tensor::zeros(&[m, n]);
        {
            let av = ArrayView2::from_shape((m, k), self.value(a).data()).unwrap();
            let bv = ArrayView2::from_shape((k, n), self.value(b).data()).unwrap();
            let mut cv = ArrayViewMut2::from_shape((m, n), out.data_mut()).unwrap();
            general_mat_mul(T::ONE, &av, &bv, T::ZERO, &mut cv);
        }
        Ok(self.push(Op::MatMul { a, b }, out))
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<(), AutodiffError> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(AutodiffError::ShapeMismatch {
                op,
                shapes: vec![
                    self.value(a).shape().to_vec(),
                    self.value(b).shape().to_vec(),
                ],
            });
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        self.same_shape("add", a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x + y)
            .collect();
        let shape = self.value(a).shape().to_vec();
        Ok(self.push(Op::Add { a, b }, Tensor::from_vec(shape, data)?))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        self.same_shape("sub", a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x - y)
            .collect();
        let shape = self.value(a).shape().to_vec();
        Ok(self.push(Op::Sub { a, b }, Tensor::from_vec(shape, data)?))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        self.same_shape("mul", a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x * y)
            .collect();
        let shape = self.value(a).shape().to_vec();
        Ok(self.push(Op::Mul { a, b }, Tensor::from_vec(shape, data)?))
    }

    /// Broadcast add of a bias vector `[c]` over every row of `[r, c]`.
    pub fn add_bias(&mut self, m: NodeId, bias: NodeId) -> Result<NodeId, AutodiffError> {
        let (r, c) = self.value(m).dims2("add_bias")?;
        let bshape = self.value(bias).shape();
        if bshape != [c] {
            return Err(AutodiffError::ShapeMismatch {
                op: "add_bias",
                shapes: vec![vec![r, c], bshape.to_vec()],
            });
        }
        let bdata = self.value(bias).data();
        let mut data = Vec::with_capacity(r * c);
        for row in self.value(m).data().chunks_exact(c) {
            data.extend(row.iter().zip(bdata).map(|(&x, &b)| x + b));
        }
        Ok(self.push(Op::AddBias { m, bias }, Tensor::from_vec(vec![r, c], data)?))
    }

    /// Concatenation along the last (feature) axis. All parts must share
    /// rank (1 or 2) and, for matrices, the same number of rows.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId, AutodiffError> {
        if parts.is_empty() {
            return Err(AutodiffError::EmptyInput { op: "concat" });
        }
        let rank = self.value(parts[0]).rank();
        if rank == 1 {
            let mut data = Vec::new();
            for &p in parts {
                if self.value(p).rank() != 1 {
                    return Err(AutodiffError::ShapeMismatch {
                        op: "concat",
                        shapes: parts.iter().map(|&q| self.value(q).shape().to_vec()).collect(),
                    });
                }
                data.extend_from_slice(self.value(p).data());
            }
            let t = Tensor::vector(data);
            return Ok(self.push(
                Op::Concat {
                    parts: parts.to_vec(),
                },
                t,
            ));
        }
        let (rows, _) = self.value(parts[0]).dims2("concat")?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.value(p).dims2("concat")?;
            if r != rows {
                return Err(AutodiffError::ShapeMismatch {
                    op: "concat",
                    shapes: parts.iter().map(|&q| self.value(q).shape().to_vec()).collect(),
                });
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for row in 0..rows {
            for (&p, &w) in parts.iter().zip(&widths) {
                let src = self.value(p).data();
                data.extend_from_slice(&src[row * w..(row + 1) * w]);
            }
        }
        Ok(self.push(
            Op::Concat {
                parts: parts.to_vec(),
            },
            Tensor::from_vec(vec![rows, total], data)?,
        ))
    }

    /// Column slice `[from, to)` along the last axis.
    pub fn slice_cols(
        &mut self,
        a: NodeId,
        from: usize,
        to: usize,
    ) -> Result<NodeId, AutodiffError> {
        let v = self.value(a);
        let (rows, width) = match v.rank() {
            1 => (1, v.shape()[0]),
            2 => (v.shape()[0], v.shape()[1]),
            _ => {
                return Err(AutodiffError::NotAMatrix {
                    op: "slice_cols",
                    shape: v.shape().to_vec(),
                })
            }
        };
        if from >= to || to > width {
            return Err(AutodiffError::BadSlice {
                op: "slice_cols",
                from,
                to,
                width,
            });
        }
        let w = to - from;
        let mut data = Vec::with_capacity(rows * w);
        for row in 0..rows {
            data.extend_from_slice(&v.data()[row * width + from..row * width + to]);
        }
        let shape = if v.rank() == 1 {
            vec![w]
        } else {
            vec![rows, w]
        };
        Ok(self.push(Op::SliceCols { a, from, to }, Tensor::from_vec(shape, data)?))
    }

    /// Row gather from a `[rows, cols]` table; the lookup table receives
    /// scatter-added gradients, so duplicate ids sum their contributions.
    pub fn lookup_rows(&mut self, table: NodeId, ids: &[usize]) -> Result<NodeId, AutodiffError> {
        if ids.is_empty() {
            return Err(AutodiffError::EmptyInput { op: "lookup_rows" });
        }
        let (rows, cols) = self.value(table).dims2("lookup_rows")?;
        for &id in ids {
            if id >= rows {
                return Err(AutodiffError::RowOutOfRange {
                    op: "lookup_rows",
                    index: id,
                    rows,
                });
            }
        }
        let src = self.value(table).data();
        let mut data = Vec::with_capacity(ids.len() * cols);
        for &id in ids {
            data.extend_from_slice(&src[id * cols..(id + 1) * cols]);
        }
        Ok(self.push(
            Op::LookupRows {
                table,
                ids: ids.to_vec(),
            },
            Tensor::from_vec(vec![ids.len(), cols], data)?,
        ))
    }

    /// Row-wise select: rows where `mask` is true come from `on`, the rest
    /// from `off`. Used to freeze recurrent state past a sequence's end.
    pub fn blend_rows(
        &mut self,
        on: NodeId,
        off: NodeId,
        mask: &[bool],
    ) -> Result<NodeId, AutodiffError> {
        self.same_shape("blend_rows", on, off)?;
        let (rows, cols) = self.value(on).dims2("blend_rows")?;
        if mask.len() != rows {
            return Err(AutodiffError::ShapeMismatch {
                op: "blend_rows",
                shapes: vec![vec![rows, cols], vec![mask.len()]],
            });
        }
        let on_data = self.value(on).data();
        let off_data = self.value(off).data();
        let mut data = Vec::with_capacity(rows * cols);
        for (r, &keep) in mask.iter().enumerate() {
            let src = if keep { on_data } else { off_data };
            data.extend_from_slice(&src[r * cols..(r + 1) * cols]);
        }
        Ok(self.push(
            Op::BlendRows {
                on,
                off,
                mask: mask.to_vec(),
            },
            Tensor::from_vec(vec![rows, cols], data)?,
        ))
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId, AutodiffError> {
        let out = self.value(a).map(|x| x.tanh());
        Ok(self.push(Op::Tanh { a }, out))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId, AutodiffError> {
        let out = self.value(a).map(sigmoid_scalar);
        Ok(self.push(Op::Sigmoid { a }, out))
    }

    pub fn exp(&mut self, a: NodeId) -> Result<NodeId, AutodiffError> {
        let out = self.value(a).map(|x| x.exp());
        Ok(self.push(Op::Exp { a }, out))
    }

    pub fn ln(&mut self, a: NodeId) -> Result<NodeId, AutodiffError> {
        for (i, &x) in self.value(a).data().iter().enumerate() {
            if x <= T::ZERO {
                return Err(AutodiffError::LogDomain {
                    value: x.to_f64(),
                    index: i,
                });
            }
        }
        let out = self.value(a).map(|x| x.ln());
        Ok(self.push(Op::Ln { a }, out))
    }

    pub fn scale(&mut self, a: NodeId, c: T) -> Result<NodeId, AutodiffError> {
        let out = self.value(a).map(|x| x * c);
        Ok(self.push(Op::Scale { a, c }, out))
    }

    pub fn add_scalar(&mut self, a: NodeId, c: T) -> Result<NodeId, AutodiffError> {
        let out = self.value(a).map(|x| x + c);
        Ok(self.push(Op::AddScalar { a }, out))
    }

    /// Elementwise clamp to `[lo, hi]`; the gradient passes only strictly
    /// inside the interval.
    pub fn clamp(&mut self, a: NodeId, lo: T, hi: T) -> Result<NodeId, AutodiffError> {
        assert!(lo <= hi, "clamp bounds out of order");
        let out = self.value(a).map(|x| {
            if x < lo {
                lo
            } else if x > hi {
                hi
            } else {
                x
            }
        });
        Ok(self.push(Op::Clamp { a, lo, hi }, out))
    }

    pub fn sum_all(&mut self, a: NodeId) -> Result<NodeId, AutodiffError> {
        let s: T = self.value(a).data().iter().copied().sum();
        Ok(self.push(Op::SumAll { a }, Tensor::scalar(s)))
    }

    pub fn mean_all(&mut self, a: NodeId) -> Result<NodeId, AutodiffError> {
        let n = self.value(a).numel();
        let s: T = self.value(a).data().iter().copied().sum();
        Ok(self.push(
            Op::MeanAll { a },
            Tensor::scalar(s / T::from_f64(n as f64)),
        ))
    }

    /// Custom elementwise op defined by plain function pointers:
    /// `value_fn(x)` for the forward value and `grad_fn(x, y)` for the
    /// local derivative given input `x` and output `y`. Intended for
    /// tests (e.g. deliberately wrong backward rules) and one-off ops.
    pub fn unary_fn(
        &mut self,
        a: NodeId,
        value_fn: fn(f64) -> f64,
        grad_fn: fn(f64, f64) -> f64,
    ) -> Result<NodeId, AutodiffError> {
        let out = self.value(a).map(|x| T::from_f64(value_fn(x.to_f64())));
        Ok(self.push(Op::UnaryFn { a, grad_fn }, out))
    }

    /// Reverse pass from a scalar root. Gradients accumulate by sum over
    /// all paths; the root's own gradient is 1. May be called once per
    /// graph.
    pub fn backward(&mut self, root: NodeId) -> Result<Gradients<T>, AutodiffError> {
        if self.backward_done {
            return Err(AutodiffError::BackwardAlreadyRun);
        }
        let root_shape = self.value(root).shape().to_vec();
        if self.value(root).numel() != 1 {
            return Err(AutodiffError::NonScalarRoot { shape: root_shape });
        }
        self.backward_done = true;

        let n = root.0 + 1;
        let mut grads: Vec<Option<Tensor<T>>> = (0..n).map(|_| None).collect();
        grads[root.0] = Some(Tensor::full(&root_shape, T::ONE));

        for i in (0..n).rev() {
            if grads[i].is_none() {
                continue;
            }
            let (left, right) = grads.split_at_mut(i);
            let g = right[0].as_ref().unwrap();
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}

                Op::MatMul { a, b } => {
                    let (m, k) = self.nodes[a.0].value.dims2("matmul").unwrap();
                    let (_, nn) = self.nodes[b.0].value.dims2("matmul").unwrap();
                    let gv = ArrayView2::from_shape((m, nn), g.data()).unwrap();
                    {
                        let av = ArrayView2::from_shape((k, nn), self.nodes[b.0].value.data())
                            .unwrap();
                        let da = accum(&mut left[a.0], &[m, k]);
                        let mut dav = ArrayViewMut2::from_shape((m, k), da).unwrap();
                        general_mat_mul(T::ONE, &gv, &av.t(), T::ONE, &mut dav);
                    }
                    {
                        let av = ArrayView2::from_shape((m, k), self.nodes[a.0].value.data())
                            .unwrap();
                        let db = accum(&mut left[b.0], &[k, nn]);
                        let mut dbv = ArrayViewMut2::from_shape((k, nn), db).unwrap();
                        general_mat_mul(T::ONE, &av.t(), &gv, T::ONE, &mut dbv);
                    }
                }

                Op::Add { a, b } => {
                    add_into(accum(&mut left[a.0], g.shape()), g.data());
                    add_into(accum(&mut left[b.0], g.shape()), g.data());
                }

                Op::Sub { a, b } => {
                    add_into(accum(&mut left[a.0], g.shape()), g.data());
                    sub_into(accum(&mut left[b.0], g.shape()), g.data());
                }

                Op::Mul { a, b } => {
                    {
                        let vb = self.nodes[b.0].value.data();
                        let da = accum(&mut left[a.0], g.shape());
                        for ((d, &gv), &bv) in da.iter_mut().zip(g.data()).zip(vb) {
                            *d += gv * bv;
                        }
                    }
                    {
                        let va = self.nodes[a.0].value.data();
                        let db = accum(&mut left[b.0], g.shape());
                        for ((d, &gv), &av) in db.iter_mut().zip(g.data()).zip(va) {
                            *d += gv * av;
                        }
                    }
                }

                Op::AddBias { m, bias } => {
                    let (_, c) = node.value.dims2("add_bias").unwrap();
                    add_into(accum(&mut left[m.0], g.shape()), g.data());
                    let db = accum(&mut left[bias.0], &[c]);
                    for row in g.data().chunks_exact(c) {
                        for (d, &gv) in db.iter_mut().zip(row) {
                            *d += gv;
                        }
                    }
                }

                Op::Concat { parts } => {
                    if node.value.rank() == 1 {
                        let mut offset = 0;
                        for &p in parts {
                            let w = self.nodes[p.0].value.numel();
                            let dp = accum(&mut left[p.0], self.nodes[p.0].value.shape());
                            add_into(dp, &g.data()[offset..offset + w]);
                            offset += w;
                        }
                    } else {
                        let (rows, total) = node.value.dims2("concat").unwrap();
                        let mut offset = 0;
                        for &p in parts {
                            let (_, w) = self.nodes[p.0].value.dims2("concat").unwrap();
                            let dp = accum(&mut left[p.0], &[rows, w]);
                            for row in 0..rows {
                                let src = &g.data()[row * total + offset..row * total + offset + w];
                                add_into(&mut dp[row * w..(row + 1) * w], src);
                            }
                            offset += w;
                        }
                    }
                }

                Op::SliceCols { a, from, to } => {
                    let v = &self.nodes[a.0].value;
                    let (rows, width) = match v.rank() {
                        1 => (1, v.shape()[0]),
                        _ => (v.shape()[0], v.shape()[1]),
                    };
                    let w = to - from;
                    let da = accum(&mut left[a.0], v.shape());
                    for row in 0..rows {
                        let dst = &mut da[row * width + from..row * width + to];
                        add_into(dst, &g.data()[row * w..(row + 1) * w]);
                    }
                }

                Op::LookupRows { table, ids } => {
                    let (_, cols) = self.nodes[table.0].value.dims2("lookup_rows").unwrap();
                    let dt = accum(&mut left[table.0], self.nodes[table.0].value.shape());
                    for (row, &id) in ids.iter().enumerate() {
                        let dst = &mut dt[id * cols..(id + 1) * cols];
                        add_into(dst, &g.data()[row * cols..(row + 1) * cols]);
                    }
                }

                Op::BlendRows { on, off, mask } => {
                    let (_, cols) = node.value.dims2("blend_rows").unwrap();
                    {
                        let don = accum(&mut left[on.0], g.shape());
                        for (r, &keep) in mask.iter().enumerate() {
                            if keep {
                                add_into(
                                    &mut don[r * cols..(r + 1) * cols],
                                    &g.data()[r * cols..(r + 1) * cols],
                                );
                            }
                        }
                    }
                    {
                        let doff = accum(&mut left[off.0], g.shape());
                        for (r, &keep) in mask.iter().enumerate() {
                            if !keep {
                                add_into(
                                    &mut doff[r * cols..(r + 1) * cols],
                                    &g.data()[r * cols..(r + 1) * cols],
                                );
                            }
                        }
                    }
                }

                Op::Tanh { a } => {
                    let y = node.value.data();
                    let da = accum(&mut left[a.0], g.shape());
                    for ((d, &gv), &yv) in da.iter_mut().zip(g.data()).zip(y) {
                        *d += gv * (T::ONE - yv * yv);
                    }
                }

                Op::Sigmoid { a } => {
                    let y = node.value.data();
                    let da = accum(&mut left[a.0], g.shape());
                    for ((d, &gv), &yv) in da.iter_mut().zip(g.data()).zip(y) {
                        *d += gv * yv * (T::ONE - yv);
                    }
                }

                Op::Exp { a } => {
                    let y = node.value.data();
                    let da = accum(&mut left[a.0], g.shape());
                    for ((d, &gv), &yv) in da.iter_mut().zip(g.data()).zip(y) {
                        *d += gv * yv;
                    }
                }

                Op::Ln { a } => {
                    let x = self.nodes[a.0].value.data();
                    let da = accum(&mut left[a.0], g.shape());
                    for ((d, &gv), &xv) in da.iter_mut().zip(g.data()).zip(x) {
                        *d += gv / xv;
                    }
                }

                Op::Scale { a, c } => {
                    let da = accum(&mut left[a.0], g.shape());
                    for (d, &gv) in da.iter_mut().zip(g.data()) {
                        *d += gv * *c;
                    }
                }

                Op::AddScalar { a } => {
                    add_into(accum(&mut left[a.0], g.shape()), g.data());
                }

                Op::Clamp { a, lo, hi } => {
                    let x = self.nodes[a.0].value.data();
                    let da = accum(&mut left[a.0], g.shape());
                    for ((d, &gv), &xv) in da.iter_mut().zip(g.data()).zip(x) {
                        if xv > *lo && xv < *hi {
                            *d += gv;
                        }
                    }
                }

                Op::SumAll { a } => {
                    let gv = g.item();
                    let da = accum(&mut left[a.0], self.nodes[a.0].value.shape());
                    for d in da.iter_mut() {
                        *d += gv;
                    }
                }

                Op::MeanAll { a } => {
                    let n_el = self.nodes[a.0].value.numel();
                    let gv = g.item() / T::from_f64(n_el as f64);
                    let da = accum(&mut left[a.0], self.nodes[a.0].value.shape());
                    for d in da.iter_mut() {
                        *d += gv;
                    }
                }

                Op::UnaryFn { a, grad_fn, .. } => {
                    let x = self.nodes[a.0].value.data();
                    let y = node.value.data();
                    let da = accum(&mut left[a.0], g.shape());
                    for (((d, &gv), &xv), &yv) in da.iter_mut().zip(g.data()).zip(x).zip(y) {
                        *d += gv * T::from_f64(grad_fn(xv.to_f64(), yv.to_f64()));
                    }
                }
            }
        }

        Ok(Gradients { grads })
    }
}

fn accum<'a, T: Real>(slot: &'a mut Option<Tensor<T>>, shape: &[usize]) -> &'a mut [T] {
    if slot.is_none() {
        *slot = Some(Tensor::zeros(shape));
    }
    slot.as_mut().unwrap().data_mut()
}

fn add_into<T: Real>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn sub_into<T: Real>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d -= s;
    }
}
