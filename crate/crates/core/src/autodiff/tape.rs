//! Tape-based reverse-mode differentiation.
//!
//! Every primitive evaluates eagerly and appends a node holding its value and
//! the handles of its inputs. [`Tape::backward`] walks the nodes in reverse
//! order and accumulates gradients into the inputs, finally adding the
//! gradients that reached parameter leaves into the [`ParameterStore`].
//!
//! A tape records a single forward pass and is dropped after `backward`.

use std::collections::HashMap;

use super::{ParamId, ParameterStore, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddConst(Var),
    OneMinus(Var),
    Sigmoid(Var),
    Tanh(Var),
    Exp(Var),
    LogSigmoid(Var),
    LogSoftmax(Var),
    Embedding {
        table: Var,
        ids: Vec<usize>,
    },
    ConcatCols(Vec<Var>),
    StackRows(Vec<Var>),
    Gather {
        src: Var,
        coords: Vec<(usize, usize)>,
    },
    SegmentSum {
        src: Var,
        lens: Vec<usize>,
    },
    SegmentLogSumExp {
        src: Var,
        lens: Vec<usize>,
    },
    Sum(Var),
    KlStdNormal {
        mu: Var,
        log_sigma: Var,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Ordered record of executed primitives.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(x)) without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    let s: f64 = xs.iter().map(|x| (x - m).exp()).sum();
    m + s.ln()
}

fn is_matrix(t: &Tensor) -> bool {
    t.shape().len() == 2
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Records a constant; no gradient flows into it.
    pub fn input(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Input)
    }

    /// Records a parameter leaf. Repeated calls for the same id return the same handle.
    pub fn param(&mut self, store: &ParameterStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let mut value = store.get(id).clone();
        value.clear_grad();
        let v = self.push(value, Op::Param(id));
        self.params.insert(id, v);
        v
    }

    fn dims2(&self, v: Var, op: &'static str) -> Result<(usize, usize)> {
        let t = self.value(v);
        if !is_matrix(t) {
            return Err(Error::Dimension {
                op,
                left: t.shape().to_vec(),
                right: vec![0, 0],
            });
        }
        Ok((t.shape()[0], t.shape()[1]))
    }

    fn same_shape(&self, a: Var, b: Var, op: &'static str) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::Dimension {
                op,
                left: sa.to_vec(),
                right: sb.to_vec(),
            });
        }
        Ok(())
    }

    /// `[m, k] x [k, n] -> [m, n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims2(a, "matmul")?;
        let (k2, n) = self.dims2(b, "matmul")?;
        if k != k2 {
            return Err(Error::Dimension {
                op: "matmul",
                left: vec![m, k],
                right: vec![k2, n],
            });
        }
        let (ad, bd) = (self.value(a).data(), self.value(b).data());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let x = ad[i * k + p];
                if x == 0.0 {
                    continue;
                }
                for (o, w) in row.iter_mut().zip(&bd[p * n..(p + 1) * n]) {
                    *o += x * w;
                }
            }
        }
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::MatMul(a, b)))
    }

    /// Adds a `[n]` bias to every row of a `[m, n]` matrix.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (m, n) = self.dims2(x, "add_bias")?;
        let bs = self.value(b).shape();
        if bs != [n] {
            return Err(Error::Dimension {
                op: "add_bias",
                left: vec![m, n],
                right: bs.to_vec(),
            });
        }
        let bd = self.value(b).data();
        let mut out = self.value(x).data().to_vec();
        for row in out.chunks_mut(n) {
            for (o, bb) in row.iter_mut().zip(bd) {
                *o += bb;
            }
        }
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::AddBias(x, b)))
    }

    /// `y = x W + b`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let xw = self.matmul(x, w)?;
        self.add_bias(xw, b)
    }

    fn zip_map(
        &mut self,
        a: Var,
        b: Var,
        op: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        self.same_shape(a, b, op)?;
        let (ta, tb) = (self.value(a), self.value(b));
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(x, y)| f(*x, *y))
            .collect();
        Tensor::new(ta.shape().to_vec(), data)
    }

    fn map(&self, a: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let t = self.value(a);
        Tensor::new(t.shape().to_vec(), t.data().iter().map(|x| f(*x)).collect())
            .expect("same length")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.zip_map(a, b, "add", |x, y| x + y)?;
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.zip_map(a, b, "sub", |x, y| x - y)?;
        Ok(self.push(v, Op::Sub(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.zip_map(a, b, "mul", |x, y| x * y)?;
        Ok(self.push(v, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.map(a, |x| x * c);
        self.push(v, Op::Scale(a, c))
    }

    /// Adds a constant tensor of the same shape.
    pub fn add_const(&mut self, a: Var, c: &Tensor) -> Result<Var> {
        let t = self.value(a);
        if t.shape() != c.shape() {
            return Err(Error::Dimension {
                op: "add_const",
                left: t.shape().to_vec(),
                right: c.shape().to_vec(),
            });
        }
        let data = t.data().iter().zip(c.data()).map(|(x, y)| x + y).collect();
        let v = Tensor::new(t.shape().to_vec(), data)?;
        Ok(self.push(v, Op::AddConst(a)))
    }

    /// `1 - x`.
    pub fn one_minus(&mut self, a: Var) -> Var {
        let v = self.map(a, |x| 1.0 - x);
        self.push(v, Op::OneMinus(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.map(a, sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.map(a, f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.map(a, f64::exp);
        self.push(v, Op::Exp(a))
    }

    /// `log σ(x)`, stable for large |x|.
    pub fn log_sigmoid(&mut self, a: Var) -> Var {
        let v = self.map(a, |x| -softplus(-x));
        self.push(v, Op::LogSigmoid(a))
    }

    /// Row-wise log-softmax with max subtraction.
    pub fn log_softmax(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let n = t.cols();
        if n == 0 {
            return Err(Error::contract("log_softmax over zero categories"));
        }
        let mut out = t.data().to_vec();
        for row in out.chunks_mut(n) {
            let lse = log_sum_exp(row);
            for x in row.iter_mut() {
                *x -= lse;
            }
        }
        let v = Tensor::new(t.shape().to_vec(), out)?;
        Ok(self.push(v, Op::LogSoftmax(a)))
    }

    /// Gathers rows of a `[N, d]` table.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let (n, d) = self.dims2(table, "embedding")?;
        let src = self.value(table).data();
        let mut out = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            if id >= n {
                return Err(Error::Index {
                    op: "embedding",
                    index: id,
                    size: n,
                });
            }
            out.extend_from_slice(&src[id * d..(id + 1) * d]);
        }
        let v = Tensor::new(vec![ids.len(), d], out)?;
        Ok(self.push(
            v,
            Op::Embedding {
                table,
                ids: ids.to_vec(),
            },
        ))
    }

    /// Horizontal concatenation of matrices with equal row counts.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let mut dims = Vec::with_capacity(parts.len());
        for &p in parts {
            dims.push(self.dims2(p, "concat_cols")?);
        }
        let m = dims.first().map_or(0, |d| d.0);
        if let Some(bad) = dims.iter().find(|d| d.0 != m) {
            return Err(Error::Dimension {
                op: "concat_cols",
                left: vec![m],
                right: vec![bad.0],
            });
        }
        let total: usize = dims.iter().map(|d| d.1).sum();
        let mut out = Vec::with_capacity(m * total);
        for r in 0..m {
            for (&p, &(_, c)) in parts.iter().zip(&dims) {
                out.extend_from_slice(&self.value(p).data()[r * c..(r + 1) * c]);
            }
        }
        let v = Tensor::new(vec![m, total], out)?;
        Ok(self.push(v, Op::ConcatCols(parts.to_vec())))
    }

    /// Vertical concatenation of matrices with equal column counts.
    pub fn stack_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let mut rows = 0;
        let mut cols = None;
        for &p in parts {
            let (r, c) = self.dims2(p, "stack_rows")?;
            match cols {
                None => cols = Some(c),
                Some(c0) if c0 != c => {
                    return Err(Error::Dimension {
                        op: "stack_rows",
                        left: vec![c0],
                        right: vec![c],
                    })
                }
                _ => {}
            }
            rows += r;
        }
        let cols = cols.unwrap_or(0);
        let mut out = Vec::with_capacity(rows * cols);
        for &p in parts {
            out.extend_from_slice(self.value(p).data());
        }
        let v = Tensor::new(vec![rows, cols], out)?;
        Ok(self.push(v, Op::StackRows(parts.to_vec())))
    }

    /// Picks `(row, col)` entries of a matrix into a flat vector.
    pub fn gather(&mut self, src: Var, coords: &[(usize, usize)]) -> Result<Var> {
        let (m, n) = self.dims2(src, "gather")?;
        let t = self.value(src);
        let mut out = Vec::with_capacity(coords.len());
        for &(r, c) in coords {
            if r >= m {
                return Err(Error::Index {
                    op: "gather",
                    index: r,
                    size: m,
                });
            }
            if c >= n {
                return Err(Error::Index {
                    op: "gather",
                    index: c,
                    size: n,
                });
            }
            out.push(t.data()[r * n + c]);
        }
        let v = Tensor::new(vec![coords.len()], out)?;
        Ok(self.push(
            v,
            Op::Gather {
                src,
                coords: coords.to_vec(),
            },
        ))
    }

    fn check_segments(&self, src: Var, lens: &[usize], op: &'static str) -> Result<()> {
        let total: usize = lens.iter().sum();
        let len = self.value(src).len();
        if total != len {
            return Err(Error::Dimension {
                op,
                left: vec![len],
                right: vec![total],
            });
        }
        Ok(())
    }

    /// Sums consecutive segments of a flat vector.
    pub fn segment_sum(&mut self, src: Var, lens: &[usize]) -> Result<Var> {
        self.check_segments(src, lens, "segment_sum")?;
        let data = self.value(src).data();
        let mut out = Vec::with_capacity(lens.len());
        let mut start = 0;
        for &l in lens {
            out.push(data[start..start + l].iter().fold(0.0, |acc, x| acc + x));
            start += l;
        }
        let v = Tensor::new(vec![lens.len()], out)?;
        Ok(self.push(
            v,
            Op::SegmentSum {
                src,
                lens: lens.to_vec(),
            },
        ))
    }

    /// Log-sum-exp over consecutive non-empty segments of a flat vector.
    pub fn segment_log_sum_exp(&mut self, src: Var, lens: &[usize]) -> Result<Var> {
        self.check_segments(src, lens, "segment_log_sum_exp")?;
        if lens.contains(&0) {
            return Err(Error::contract("empty segment in log-sum-exp"));
        }
        let data = self.value(src).data();
        let mut out = Vec::with_capacity(lens.len());
        let mut start = 0;
        for &l in lens {
            out.push(log_sum_exp(&data[start..start + l]));
            start += l;
        }
        let v = Tensor::new(vec![lens.len()], out)?;
        Ok(self.push(
            v,
            Op::SegmentLogSumExp {
                src,
                lens: lens.to_vec(),
            },
        ))
    }

    /// Sum of all entries, as a scalar.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().fold(0.0, |acc, x| acc + x);
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    /// Per-row KL(N(mu, diag(exp(log_sigma))²) || N(0, I)) as a `[batch]` vector.
    pub fn kl_std_normal(&mut self, mu: Var, log_sigma: Var) -> Result<Var> {
        self.same_shape(mu, log_sigma, "kl_std_normal")?;
        let (m, k) = self.dims2(mu, "kl_std_normal")?;
        let (md, ld) = (self.value(mu).data(), self.value(log_sigma).data());
        let mut out = Vec::with_capacity(m);
        for r in 0..m {
            let mut acc = 0.0;
            for j in r * k..(r + 1) * k {
                let ls = ld[j];
                acc += (2.0 * ls).exp() - 1.0 - 2.0 * ls + md[j] * md[j];
            }
            out.push(0.5 * acc);
        }
        let v = Tensor::new(vec![m], out)?;
        Ok(self.push(v, Op::KlStdNormal { mu, log_sigma }))
    }

    /// Reverse sweep from a scalar `loss`; parameter gradients are added into `store`.
    pub fn backward(&self, loss: Var, store: &mut ParameterStore) -> Result<()> {
        let grads = self.gradients(loss)?;
        for (i, node) in self.nodes.iter().enumerate() {
            if let (Op::Param(id), Some(g)) = (&node.op, &grads[i]) {
                store.get_mut(*id).accumulate_grad(g);
            }
        }
        Ok(())
    }

    /// Gradient of a scalar `loss` with respect to every recorded value.
    pub fn gradients(&self, loss: Var) -> Result<Vec<Option<Vec<f64>>>> {
        let lt = self.value(loss);
        if lt.len() != 1 || lt.shape().iter().any(|&d| d != 1) {
            return Err(Error::contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                lt.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            self.backprop_node(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(grads)
    }

    fn backprop_node(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let nodes = &self.nodes;
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            let len = nodes[v.0].value.len();
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; len]);
            f(slot);
        };
        let val = |v: Var| &nodes[v.0].value;
        let y = node.value.data();

        match &node.op {
            Op::Input | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (val(*a), val(*b));
                let (m, k) = (ta.shape()[0], ta.shape()[1]);
                let n = tb.shape()[1];
                let (ad, bd) = (ta.data(), tb.data());
                acc(*a, &mut |da| {
                    for i in 0..m {
                        let gr = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let br = &bd[p * n..(p + 1) * n];
                            da[i * k + p] += gr.iter().zip(br).map(|(x, w)| x * w).sum::<f64>();
                        }
                    }
                });
                acc(*b, &mut |db| {
                    for i in 0..m {
                        let gr = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let x = ad[i * k + p];
                            if x == 0.0 {
                                continue;
                            }
                            for (d, gv) in db[p * n..(p + 1) * n].iter_mut().zip(gr) {
                                *d += x * gv;
                            }
                        }
                    }
                });
            }
            Op::AddBias(x, b) => {
                let n = val(*b).len();
                acc(*x, &mut |dx| add_into(dx, g));
                acc(*b, &mut |db| {
                    for row in g.chunks(n) {
                        add_into(db, row);
                    }
                });
            }
            Op::Add(a, b) => {
                acc(*a, &mut |d| add_into(d, g));
                acc(*b, &mut |d| add_into(d, g));
            }
            Op::Sub(a, b) => {
                acc(*a, &mut |d| add_into(d, g));
                acc(*b, &mut |d| {
                    for (x, gv) in d.iter_mut().zip(g) {
                        *x -= gv;
                    }
                });
            }
            Op::Mul(a, b) => {
                let (ad, bd) = (val(*a).data(), val(*b).data());
                acc(*a, &mut |d| {
                    for ((x, gv), w) in d.iter_mut().zip(g).zip(bd) {
                        *x += gv * w;
                    }
                });
                acc(*b, &mut |d| {
                    for ((x, gv), w) in d.iter_mut().zip(g).zip(ad) {
                        *x += gv * w;
                    }
                });
            }
            Op::Scale(a, c) => acc(*a, &mut |d| {
                for (x, gv) in d.iter_mut().zip(g) {
                    *x += c * gv;
                }
            }),
            Op::AddConst(a) => acc(*a, &mut |d| add_into(d, g)),
            Op::OneMinus(a) => acc(*a, &mut |d| {
                for (x, gv) in d.iter_mut().zip(g) {
                    *x -= gv;
                }
            }),
            Op::Sigmoid(a) => acc(*a, &mut |d| {
                for ((x, gv), s) in d.iter_mut().zip(g).zip(y) {
                    *x += gv * s * (1.0 - s);
                }
            }),
            Op::Tanh(a) => acc(*a, &mut |d| {
                for ((x, gv), t) in d.iter_mut().zip(g).zip(y) {
                    *x += gv * (1.0 - t * t);
                }
            }),
            Op::Exp(a) => acc(*a, &mut |d| {
                for ((x, gv), e) in d.iter_mut().zip(g).zip(y) {
                    *x += gv * e;
                }
            }),
            Op::LogSigmoid(a) => {
                let ad = val(*a).data();
                acc(*a, &mut |d| {
                    for ((x, gv), v) in d.iter_mut().zip(g).zip(ad) {
                        *x += gv * sigmoid(-v);
                    }
                });
            }
            Op::LogSoftmax(a) => {
                let n = node.value.cols();
                acc(*a, &mut |d| {
                    for ((dr, gr), yr) in d.chunks_mut(n).zip(g.chunks(n)).zip(y.chunks(n)) {
                        let gs: f64 = gr.iter().sum();
                        for ((x, gv), lp) in dr.iter_mut().zip(gr).zip(yr) {
                            *x += gv - lp.exp() * gs;
                        }
                    }
                });
            }
            Op::Embedding { table, ids } => {
                let d = val(*table).cols();
                acc(*table, &mut |dt| {
                    for (r, &id) in ids.iter().enumerate() {
                        add_into(&mut dt[id * d..(id + 1) * d], &g[r * d..(r + 1) * d]);
                    }
                });
            }
            Op::ConcatCols(parts) => {
                let total = node.value.cols();
                let mut offset = 0;
                for &p in parts {
                    let c = val(p).cols();
                    acc(p, &mut |dp| {
                        for (r, row) in dp.chunks_mut(c).enumerate() {
                            add_into(row, &g[r * total + offset..r * total + offset + c]);
                        }
                    });
                    offset += c;
                }
            }
            Op::StackRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = val(p).len();
                    acc(p, &mut |dp| add_into(dp, &g[offset..offset + len]));
                    offset += len;
                }
            }
            Op::Gather { src, coords } => {
                let n = val(*src).cols();
                acc(*src, &mut |d| {
                    for (&(r, c), gv) in coords.iter().zip(g) {
                        d[r * n + c] += gv;
                    }
                });
            }
            Op::SegmentSum { src, lens } => acc(*src, &mut |d| {
                let mut start = 0;
                for (&l, gv) in lens.iter().zip(g) {
                    for x in &mut d[start..start + l] {
                        *x += gv;
                    }
                    start += l;
                }
            }),
            Op::SegmentLogSumExp { src, lens } => {
                let sd = val(*src).data();
                acc(*src, &mut |d| {
                    let mut start = 0;
                    for ((&l, gv), out) in lens.iter().zip(g).zip(y) {
                        for j in start..start + l {
                            d[j] += gv * (sd[j] - out).exp();
                        }
                        start += l;
                    }
                });
            }
            Op::Sum(a) => acc(*a, &mut |d| {
                for x in d.iter_mut() {
                    *x += g[0];
                }
            }),
            Op::KlStdNormal { mu, log_sigma } => {
                let k = val(*mu).cols();
                let (md, ld) = (val(*mu).data(), val(*log_sigma).data());
                acc(*mu, &mut |d| {
                    for (j, x) in d.iter_mut().enumerate() {
                        *x += g[j / k] * md[j];
                    }
                });
                acc(*log_sigma, &mut |d| {
                    for (j, x) in d.iter_mut().enumerate() {
                        *x += g[j / k] * ((2.0 * ld[j]).exp() - 1.0);
                    }
                });
            }
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[Vec<f64>]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn linear_examples() {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::row(&[1.0, 2.0]));
        let w = tape.input(mat(&[vec![1.0, 0.0], vec![0.0, 1.0]]));
        let b = tape.input(Tensor::new(vec![2], vec![0.0, 0.0]).unwrap());
        let y = tape.linear(x, w, b).unwrap();
        assert_eq!(tape.value(y).data(), &[1.0, 2.0]);

        let x = tape.input(Tensor::row(&[1.0, 1.0]));
        let w = tape.input(mat(&[vec![2.0], vec![3.0]]));
        let b = tape.input(Tensor::new(vec![1], vec![1.0]).unwrap());
        let y = tape.linear(x, w, b).unwrap();
        assert_eq!(tape.value(y).data(), &[6.0]);

        let x = tape.input(Tensor::zeros(&[1, 3]));
        let w = tape.input(mat(&[vec![0.3, -1.0], vec![2.0, 4.0], vec![7.0, 0.1]]));
        let b = tape.input(Tensor::new(vec![2], vec![5.0, 5.0]).unwrap());
        let y = tape.linear(x, w, b).unwrap();
        assert_eq!(tape.value(y).data(), &[5.0, 5.0]);
    }

    #[test]
    fn linear_shape_mismatch_names_both_shapes() {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::zeros(&[1, 3]));
        let w = tape.input(Tensor::zeros(&[2, 2]));
        let b = tape.input(Tensor::zeros(&[2]));
        match tape.linear(x, w, b) {
            Err(Error::Dimension { left, right, .. }) => {
                assert_eq!(left, vec![1, 3]);
                assert_eq!(right, vec![2, 2]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn log_softmax_examples() {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::row(&[0.3; 4]));
        let y = tape.log_softmax(x).unwrap();
        for v in tape.value(y).data() {
            assert!((v + 4f64.ln()).abs() < 1e-15);
        }

        let x = tape.input(Tensor::row(&[0.0, 1000.0]));
        let y = tape.log_softmax(x).unwrap();
        let d = tape.value(y).data();
        // log(1 + e^-1000) underflows to 0 in any precision worth having.
        assert_eq!(d[0], -1000.0);
        assert_eq!(d[1], 0.0);

        let x = tape.input(Tensor::row(&[42.0]));
        let y = tape.log_softmax(x).unwrap();
        assert_eq!(tape.value(y).data(), &[0.0]);
    }

    #[test]
    fn embedding_examples() {
        let mut tape = Tape::new();
        let table = tape.input(mat(&[vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, 5.0]]));
        let e = tape.embedding(table, &[2]).unwrap();
        assert_eq!(tape.value(e).data(), &[4.0, 5.0]);

        let e = tape.embedding(table, &[]).unwrap();
        assert_eq!(tape.value(e).shape(), &[0, 2]);

        assert!(matches!(
            tape.embedding(table, &[3]),
            Err(Error::Index {
                index: 3,
                size: 3,
                ..
            })
        ));
    }

    #[test]
    fn embedding_backward_accumulates_repeats() {
        let mut store = ParameterStore::new();
        let id = store
            .add(
                "table",
                mat(&[vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, 5.0]]),
            )
            .unwrap();
        let mut tape = Tape::new();
        let t = tape.param(&store, id);
        let e = tape.embedding(t, &[1, 1]).unwrap();
        let s = tape.sum(e);
        tape.backward(s, &mut store).unwrap();
        assert_eq!(
            store.get(id).grad().unwrap(),
            &[0.0, 0.0, 2.0, 2.0, 0.0, 0.0]
        );
    }

    #[test]
    fn square_has_gradient_two_w() {
        let mut store = ParameterStore::new();
        let id = store
            .add("w", Tensor::new(vec![1], vec![3.0]).unwrap())
            .unwrap();
        let mut tape = Tape::new();
        let w = tape.param(&store, id);
        let sq = tape.mul(w, w).unwrap();
        let loss = tape.sum(sq);
        tape.backward(loss, &mut store).unwrap();
        assert_eq!(store.get(id).grad().unwrap(), &[6.0]);
    }

    #[test]
    fn detached_parameter_gets_zero_grad() {
        let mut store = ParameterStore::new();
        let used = store
            .add("a", Tensor::new(vec![1], vec![2.0]).unwrap())
            .unwrap();
        let unused = store
            .add("p", Tensor::new(vec![1], vec![5.0]).unwrap())
            .unwrap();
        let mut tape = Tape::new();
        let a = tape.param(&store, used);
        let loss = tape.sum(a);
        tape.backward(loss, &mut store).unwrap();
        assert_eq!(store.get(unused).grad().unwrap(), &[0.0]);
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut store = ParameterStore::new();
        let mut tape = Tape::new();
        let x = tape.input(Tensor::zeros(&[1, 2]));
        assert!(matches!(
            tape.backward(x, &mut store),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn log_sigmoid_saturates_cleanly() {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::row(&[0.0, 800.0, -800.0]));
        let y = tape.log_sigmoid(x);
        let d = tape.value(y).data();
        assert!((d[0] + 2f64.ln()).abs() < 1e-15);
        assert_eq!(d[1], 0.0);
        assert_eq!(d[2], -800.0);
    }

    #[test]
    fn single_element_segments_are_exact() {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::new(vec![3], vec![-1.25, 0.1, -7.0]).unwrap());
        let s = tape.segment_sum(x, &[1, 1, 1]).unwrap();
        let l = tape.segment_log_sum_exp(x, &[1, 1, 1]).unwrap();
        assert_eq!(tape.value(s).data(), tape.value(x).data());
        assert_eq!(tape.value(l).data(), tape.value(x).data());
    }
}
