//! Reverse-mode automatic differentiation over a linear tape.
//!
//! Every operation appends a node holding its value and whatever the
//! backward pass needs. Nodes are created in topological order, so the
//! backward pass is a single reverse sweep.

use crate::scalar::{matmul, Scalar};

const NORM_EPS: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "shape {shape:?} does not match data");
        Self { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self {
            shape,
            data: vec![T::zero(); len],
        }
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Elements per leading index.
    pub fn row_len(&self) -> usize {
        self.shape[1..].iter().product()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeom {
    pub fn out_size(&self, size: usize) -> usize {
        (size + 2 * self.pad - self.kernel) / self.stride + 1
    }
}

enum Op<T> {
    Leaf,
    Linear { x: Var, w: Var, b: Var },
    Add(Var, Var),
    Silu(Var),
    Gather { x: Var, idx: Vec<usize> },
    Concat(Vec<Var>),
    ScatterAdd { x: Var, idx: Vec<usize> },
    SegmentMean { x: Var, seg: Vec<usize>, counts: Vec<usize>, empty: Var },
    Norm { x: Var, g: Var, b: Var, kind: NormKind, xhat: Vec<T>, rstd: Vec<T> },
    Conv { x: Var, w: Var, b: Var, geom: ConvGeom },
    Film { x: Var, gamma: Var, beta: Var },
    AvgPool(Var),
    Bce { x: Var, targets: Vec<T> },
}

/// Normalization statistics are taken per row (layer norm over features)
/// or per sample and channel group (group norm over `[N, C, H, W]`).
#[derive(Clone, Copy, Debug)]
enum NormKind {
    Layer,
    Group(usize),
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Gradients produced by [`Tape::backward`], indexed by variable.
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&[T]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    pub fn take(&mut self, v: Var) -> Option<Vec<T>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

#[derive(Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

fn softplus<T: Scalar>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Var {
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    /// A trainable leaf.
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// `x[n×k] · w[k×m] + b[m]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Var {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        let (n, k) = (xv.rows(), xv.row_len());
        assert_eq!(wv.shape.len(), 2, "linear weight must be 2-d");
        assert_eq!(wv.shape[0], k, "linear input width {k} vs weight {:?}", wv.shape);
        let m = wv.shape[1];
        assert_eq!(bv.data.len(), m);
        let mut out = Vec::with_capacity(n * m);
        for _ in 0..n {
            out.extend_from_slice(&bv.data);
        }
        matmul(n, k, m, &xv.data, false, &wv.data, false, &mut out, true);
        self.push(Tensor::new(vec![n, m], out), Op::Linear { x, w, b }, &[x, w, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.shape, bv.shape, "add shape mismatch");
        let data = av.data.iter().zip(&bv.data).map(|(&x, &y)| x + y).collect();
        let shape = av.shape.clone();
        self.push(Tensor::new(shape, data), Op::Add(a, b), &[a, b])
    }

    pub fn silu(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let data = xv.data.iter().map(|&v| v * sigmoid(v)).collect();
        let shape = xv.shape.clone();
        self.push(Tensor::new(shape, data), Op::Silu(x), &[x])
    }

    /// Row `i` of the result is row `idx[i]` of `x`.
    pub fn gather(&mut self, x: Var, idx: &[usize]) -> Var {
        let xv = self.value(x);
        let d = xv.row_len();
        let mut data = Vec::with_capacity(idx.len() * d);
        for &i in idx {
            assert!(i < xv.rows(), "gather index {i} out of range");
            data.extend_from_slice(&xv.data[i * d..(i + 1) * d]);
        }
        let mut shape = xv.shape.clone();
        shape[0] = idx.len();
        self.push(Tensor::new(shape, data), Op::Gather { x, idx: idx.to_vec() }, &[x])
    }

    /// Column-wise concatenation of 2-d tensors with equal row counts.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let n = self.value(parts[0]).rows();
        let widths: Vec<usize> = parts
            .iter()
            .map(|&p| {
                let v = self.value(p);
                assert_eq!(v.rows(), n, "concat row mismatch");
                v.row_len()
            })
            .collect();
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(n * total);
        for r in 0..n {
            for (&p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.value(p).data[r * w..(r + 1) * w]);
            }
        }
        self.push(Tensor::new(vec![n, total], data), Op::Concat(parts.to_vec()), parts)
    }

    /// Row `idx[i]` of the `rows`-row result accumulates row `i` of `x`.
    pub fn scatter_add(&mut self, x: Var, idx: &[usize], rows: usize) -> Var {
        let xv = self.value(x);
        assert_eq!(xv.rows(), idx.len());
        let d = xv.row_len();
        let mut data = vec![T::zero(); rows * d];
        for (i, &j) in idx.iter().enumerate() {
            assert!(j < rows, "scatter index {j} out of range");
            for (o, &v) in data[j * d..(j + 1) * d].iter_mut().zip(&xv.data[i * d..(i + 1) * d]) {
                *o += v;
            }
        }
        self.push(Tensor::new(vec![rows, d], data), Op::ScatterAdd { x, idx: idx.to_vec() }, &[x])
    }

    /// Mean of the rows of `x` belonging to each of `groups` segments; a
    /// segment without rows takes the single row of `empty`.
    pub fn segment_mean(&mut self, x: Var, seg: &[usize], groups: usize, empty: Var) -> Var {
        let (xv, ev) = (self.value(x), self.value(empty));
        assert_eq!(xv.rows(), seg.len());
        let d = xv.row_len();
        assert_eq!(ev.data.len(), d, "empty vector width");
        let mut counts = vec![0usize; groups];
        let mut data = vec![T::zero(); groups * d];
        for (i, &g) in seg.iter().enumerate() {
            counts[g] += 1;
            for (o, &v) in data[g * d..(g + 1) * d].iter_mut().zip(&xv.data[i * d..(i + 1) * d]) {
                *o += v;
            }
        }
        for (g, &c) in counts.iter().enumerate() {
            let row = &mut data[g * d..(g + 1) * d];
            if c == 0 {
                row.copy_from_slice(&ev.data);
            } else {
                let inv = T::one() / T::of(c as f64);
                row.iter_mut().for_each(|v| *v *= inv);
            }
        }
        let op = Op::SegmentMean {
            x,
            seg: seg.to_vec(),
            counts,
            empty,
        };
        self.push(Tensor::new(vec![groups, d], data), op, &[x, empty])
    }

    /// Per-row normalization followed by a per-feature affine map.
    pub fn layer_norm(&mut self, x: Var, g: Var, b: Var) -> Var {
        self.norm(x, g, b, NormKind::Layer)
    }

    /// Group normalization of `[N, C, H, W]` with per-channel affine map.
    pub fn group_norm(&mut self, x: Var, g: Var, b: Var, groups: usize) -> Var {
        self.norm(x, g, b, NormKind::Group(groups))
    }

    fn norm(&mut self, x: Var, g: Var, b: Var, kind: NormKind) -> Var {
        let (xv, gv, bv) = (self.value(x), self.value(g), self.value(b));
        let (n, per) = (xv.rows(), xv.row_len());
        let (channels, spatial, groups) = match kind {
            NormKind::Layer => (per, 1, 1),
            NormKind::Group(groups) => {
                assert_eq!(xv.shape.len(), 4, "group norm expects NCHW");
                let c = xv.shape[1];
                assert!(groups > 0 && c % groups == 0, "{c} channels not divisible into {groups} groups");
                (c, per / c, groups)
            }
        };
        assert_eq!(gv.data.len(), channels);
        assert_eq!(bv.data.len(), channels);
        let chunk = per / groups;
        let mut xhat = Vec::with_capacity(xv.data.len());
        let mut rstd = Vec::with_capacity(n * groups);
        let inv_m = T::one() / T::of(chunk as f64);
        for block in xv.data.chunks(chunk) {
            let mean = block.iter().copied().sum::<T>() * inv_m;
            let var = block.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv_m;
            let r = T::one() / (var + T::of(NORM_EPS)).sqrt();
            rstd.push(r);
            xhat.extend(block.iter().map(|&v| (v - mean) * r));
        }
        let data = xhat
            .iter()
            .enumerate()
            .map(|(i, &h)| {
                let c = (i % per) / spatial;
                h * gv.data[c] + bv.data[c]
            })
            .collect();
        let shape = xv.shape.clone();
        self.push(
            Tensor::new(shape, data),
            Op::Norm {
                x,
                g,
                b,
                kind,
                xhat,
                rstd,
            },
            &[x, g, b],
        )
    }

    /// 2-d convolution of `[N, C, H, W]` with weights `[O, C, k, k]`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Var, geom: ConvGeom) -> Var {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        assert_eq!(xv.shape.len(), 4, "conv expects NCHW input");
        let [n, c, h, wd] = [xv.shape[0], xv.shape[1], xv.shape[2], xv.shape[3]];
        let o = wv.shape[0];
        assert_eq!(wv.shape, vec![o, c, geom.kernel, geom.kernel], "conv weight shape");
        assert_eq!(bv.data.len(), o);
        let (ho, wo) = (geom.out_size(h), geom.out_size(wd));
        let p = ho * wo;
        let ckk = c * geom.kernel * geom.kernel;
        let col = im2col(&xv.data, [n, c, h, wd], geom, ho, wo);
        let mut tmp = vec![T::zero(); o * n * p];
        matmul(o, ckk, n * p, &wv.data, false, &col, false, &mut tmp, false);
        let mut out = vec![T::zero(); n * o * p];
        for oc in 0..o {
            let bias = bv.data[oc];
            for s in 0..n {
                let src = &tmp[oc * n * p + s * p..oc * n * p + (s + 1) * p];
                let dst = &mut out[(s * o + oc) * p..(s * o + oc + 1) * p];
                for (d, &v) in dst.iter_mut().zip(src) {
                    *d = v + bias;
                }
            }
        }
        self.push(Tensor::new(vec![n, o, ho, wo], out), Op::Conv { x, w, b, geom }, &[x, w, b])
    }

    /// `x · (1 + gamma) + beta` with per-sample, per-channel `gamma`, `beta`
    /// of shape `[N, C]`.
    pub fn film(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let (xv, gv, bv) = (self.value(x), self.value(gamma), self.value(beta));
        let (n, c) = (xv.shape[0], xv.shape[1]);
        assert_eq!(gv.data.len(), n * c, "film gamma shape");
        assert_eq!(bv.data.len(), n * c, "film beta shape");
        let p = xv.row_len() / c;
        let data = xv
            .data
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let nc = i / p;
                v * (T::one() + gv.data[nc]) + bv.data[nc]
            })
            .collect();
        let shape = xv.shape.clone();
        self.push(Tensor::new(shape, data), Op::Film { x, gamma, beta }, &[x, gamma, beta])
    }

    /// Spatial mean of `[N, C, H, W]` into `[N, C]`.
    pub fn avg_pool(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let (n, c) = (xv.shape[0], xv.shape[1]);
        let p = xv.row_len() / c;
        let inv = T::one() / T::of(p as f64);
        let data = xv.data.chunks(p).map(|ch| ch.iter().copied().sum::<T>() * inv).collect();
        self.push(Tensor::new(vec![n, c], data), Op::AvgPool(x), &[x])
    }

    /// Mean binary cross-entropy of logits against soft targets.
    pub fn bce_with_logits(&mut self, x: Var, targets: &[T]) -> Var {
        let xv = self.value(x);
        assert_eq!(xv.data.len(), targets.len(), "one target per logit");
        assert!(!targets.is_empty(), "empty loss");
        let loss = xv
            .data
            .iter()
            .zip(targets)
            .map(|(&z, &t)| softplus(z) - t * z)
            .sum::<T>()
            / T::of(targets.len() as f64);
        self.push(
            Tensor::new(vec![1], vec![loss]),
            Op::Bce {
                x,
                targets: targets.to_vec(),
            },
            &[x],
        )
    }

    /// Propagates the gradient of the scalar `root` to every node that
    /// depends on a trainable leaf.
    pub fn backward(&self, root: Var) -> Gradients<T> {
        assert_eq!(self.value(root).data.len(), 1, "backward needs a scalar root");
        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(vec![T::one()]);
        for i in (0..=root.0).rev() {
            let Some(gy) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            self.backward_node(node, &gy, &mut grads);
            if matches!(node.op, Op::Leaf) {
                grads[i] = Some(gy);
            }
        }
        Gradients { grads }
    }

    fn backward_node(&self, node: &Node<T>, gy: &[T], grads: &mut [Option<Vec<T>>]) {
        match &node.op {
            Op::Leaf => {}
            Op::Linear { x, w, b } => {
                let (xv, wv) = (self.value(*x), self.value(*w));
                let (n, k, m) = (xv.rows(), xv.row_len(), wv.shape[1]);
                if let Some(gx) = self.slot(grads, *x) {
                    matmul(n, m, k, gy, false, &wv.data, true, gx, true);
                }
                if let Some(gw) = self.slot(grads, *w) {
                    matmul(k, n, m, &xv.data, true, gy, false, gw, true);
                }
                if let Some(gb) = self.slot(grads, *b) {
                    for row in gy.chunks(m) {
                        for (g, &v) in gb.iter_mut().zip(row) {
                            *g += v;
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if let Some(g) = self.slot(grads, v) {
                        add_into(g, gy);
                    }
                }
            }
            Op::Silu(x) => {
                if let Some(gx) = self.slot(grads, *x) {
                    for ((g, &v), &d) in gx.iter_mut().zip(&self.value(*x).data).zip(gy) {
                        let s = sigmoid(v);
                        *g += d * s * (T::one() + v * (T::one() - s));
                    }
                }
            }
            Op::Gather { x, idx } => {
                let d = self.value(*x).row_len();
                if let Some(gx) = self.slot(grads, *x) {
                    for (r, &i) in idx.iter().enumerate() {
                        add_into(&mut gx[i * d..(i + 1) * d], &gy[r * d..(r + 1) * d]);
                    }
                }
            }
            Op::Concat(parts) => {
                let total = node.value.row_len();
                let mut offset = 0;
                for &p in parts {
                    let w = self.value(p).row_len();
                    if let Some(gp) = self.slot(grads, p) {
                        for (r, row) in gp.chunks_mut(w).enumerate() {
                            add_into(row, &gy[r * total + offset..r * total + offset + w]);
                        }
                    }
                    offset += w;
                }
            }
            Op::ScatterAdd { x, idx } => {
                let d = self.value(*x).row_len();
                if let Some(gx) = self.slot(grads, *x) {
                    for (i, &j) in idx.iter().enumerate() {
                        add_into(&mut gx[i * d..(i + 1) * d], &gy[j * d..(j + 1) * d]);
                    }
                }
            }
            Op::SegmentMean { x, seg, counts, empty } => {
                let d = node.value.row_len();
                if let Some(gx) = self.slot(grads, *x) {
                    for (i, &g) in seg.iter().enumerate() {
                        let inv = T::one() / T::of(counts[g] as f64);
                        for (o, &v) in gx[i * d..(i + 1) * d].iter_mut().zip(&gy[g * d..(g + 1) * d]) {
                            *o += v * inv;
                        }
                    }
                }
                if let Some(ge) = self.slot(grads, *empty) {
                    for (g, &c) in counts.iter().enumerate() {
                        if c == 0 {
                            add_into(ge, &gy[g * d..(g + 1) * d]);
                        }
                    }
                }
            }
            Op::Norm {
                x,
                g,
                b,
                kind,
                xhat,
                rstd,
            } => {
                let per = node.value.row_len();
                let (spatial, groups) = match kind {
                    NormKind::Layer => (1, 1),
                    NormKind::Group(groups) => (per / node.value.shape[1], *groups),
                };
                let gamma = &self.value(*g).data;
                if let Some(gg) = self.slot(grads, *g) {
                    for (i, (&d, &h)) in gy.iter().zip(xhat).enumerate() {
                        gg[(i % per) / spatial] += d * h;
                    }
                }
                if let Some(gb) = self.slot(grads, *b) {
                    for (i, &d) in gy.iter().enumerate() {
                        gb[(i % per) / spatial] += d;
                    }
                }
                if let Some(gx) = self.slot(grads, *x) {
                    let chunk = per / groups;
                    let inv_m = T::one() / T::of(chunk as f64);
                    let mut dxhat = vec![T::zero(); chunk];
                    for (blk, &r) in rstd.iter().enumerate() {
                        let base = blk * chunk;
                        let (mut s1, mut s2) = (T::zero(), T::zero());
                        for j in 0..chunk {
                            let c = ((base + j) % per) / spatial;
                            let v = gy[base + j] * gamma[c];
                            dxhat[j] = v;
                            s1 += v;
                            s2 += v * xhat[base + j];
                        }
                        for j in 0..chunk {
                            gx[base + j] += r * (dxhat[j] - s1 * inv_m - xhat[base + j] * s2 * inv_m);
                        }
                    }
                }
            }
            Op::Conv { x, w, b, geom } => {
                let (xv, wv) = (self.value(*x), self.value(*w));
                let [n, c, h, wd] = [xv.shape[0], xv.shape[1], xv.shape[2], xv.shape[3]];
                let (o, ho, wo) = (node.value.shape[1], node.value.shape[2], node.value.shape[3]);
                let p = ho * wo;
                let ckk = c * geom.kernel * geom.kernel;
                // Output gradient laid out as [O, N * P] to match the im2col product.
                let mut gt = vec![T::zero(); o * n * p];
                for s in 0..n {
                    for oc in 0..o {
                        gt[oc * n * p + s * p..oc * n * p + (s + 1) * p]
                            .copy_from_slice(&gy[(s * o + oc) * p..(s * o + oc + 1) * p]);
                    }
                }
                if let Some(gb) = self.slot(grads, *b) {
                    for (oc, row) in gt.chunks(n * p).enumerate() {
                        gb[oc] += row.iter().copied().sum::<T>();
                    }
                }
                let need_w = self.nodes[w.0].needs_grad;
                let need_x = self.nodes[x.0].needs_grad;
                if need_w {
                    let col = im2col(&xv.data, [n, c, h, wd], *geom, ho, wo);
                    let gw = self.slot(grads, *w).expect("weight needs grad");
                    matmul(o, n * p, ckk, &gt, false, &col, true, gw, true);
                }
                if need_x {
                    let mut dcol = vec![T::zero(); ckk * n * p];
                    matmul(ckk, o, n * p, &wv.data, true, &gt, false, &mut dcol, false);
                    let gx = self.slot(grads, *x).expect("input needs grad");
                    col2im(&dcol, gx, [n, c, h, wd], *geom, ho, wo);
                }
            }
            Op::Film { x, gamma, beta } => {
                let xv = self.value(*x);
                let c = xv.shape[1];
                let p = xv.row_len() / c;
                let gv = &self.value(*gamma).data;
                if let Some(gx) = self.slot(grads, *x) {
                    for (i, (o, &d)) in gx.iter_mut().zip(gy).enumerate() {
                        *o += d * (T::one() + gv[i / p]);
                    }
                }
                if let Some(gg) = self.slot(grads, *gamma) {
                    for (nc, (ch, xs)) in gy.chunks(p).zip(xv.data.chunks(p)).enumerate() {
                        gg[nc] += ch.iter().zip(xs).map(|(&d, &v)| d * v).sum::<T>();
                    }
                }
                if let Some(gb) = self.slot(grads, *beta) {
                    for (nc, ch) in gy.chunks(p).enumerate() {
                        gb[nc] += ch.iter().copied().sum::<T>();
                    }
                }
            }
            Op::AvgPool(x) => {
                let xv = self.value(*x);
                let p = xv.row_len() / xv.shape[1];
                let inv = T::one() / T::of(p as f64);
                if let Some(gx) = self.slot(grads, *x) {
                    for (ch, &d) in gx.chunks_mut(p).zip(gy) {
                        ch.iter_mut().for_each(|v| *v += d * inv);
                    }
                }
            }
            Op::Bce { x, targets } => {
                let scale = gy[0] / T::of(targets.len() as f64);
                let xv = &self.value(*x).data;
                if let Some(gx) = self.slot(grads, *x) {
                    for ((o, &z), &t) in gx.iter_mut().zip(xv).zip(targets) {
                        *o += (sigmoid(z) - t) * scale;
                    }
                }
            }
        }
    }

    /// Gradient accumulator of `v`, allocated on first use; `None` when `v`
    /// does not lead to any trainable leaf.
    fn slot<'g>(&self, grads: &'g mut [Option<Vec<T>>], v: Var) -> Option<&'g mut [T]> {
        if !self.nodes[v.0].needs_grad {
            return None;
        }
        let len = self.nodes[v.0].value.data.len();
        Some(grads[v.0].get_or_insert_with(|| vec![T::zero(); len]).as_mut_slice())
    }
}

fn add_into<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Unfolds `[N, C, H, W]` into `[C·k·k, N·Ho·Wo]`.
fn im2col<T: Scalar>(x: &[T], [n, c, h, w]: [usize; 4], g: ConvGeom, ho: usize, wo: usize) -> Vec<T> {
    let p = ho * wo;
    let k = g.kernel;
    let mut col = vec![T::zero(); c * k * k * n * p];
    for ch in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let row = ((ch * k + ky) * k + kx) * n * p;
                for s in 0..n {
                    let plane = &x[(s * c + ch) * h * w..(s * c + ch + 1) * h * w];
                    let dst = &mut col[row + s * p..row + (s + 1) * p];
                    for oy in 0..ho {
                        let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                        for ox in 0..wo {
                            let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                            if ix >= 0 && ix < w as isize {
                                dst[oy * wo + ox] = src[ix as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    col
}

/// Adjoint of [`im2col`], accumulating into `dx`.
fn col2im<T: Scalar>(col: &[T], dx: &mut [T], [n, c, h, w]: [usize; 4], g: ConvGeom, ho: usize, wo: usize) {
    let p = ho * wo;
    let k = g.kernel;
    for ch in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let row = ((ch * k + ky) * k + kx) * n * p;
                for s in 0..n {
                    let plane = &mut dx[(s * c + ch) * h * w..(s * c + ch + 1) * h * w];
                    let src = &col[row + s * p..row + (s + 1) * p];
                    for oy in 0..ho {
                        let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let dst = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                        for ox in 0..wo {
                            let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                            if ix >= 0 && ix < w as isize {
                                dst[ix as usize] += src[oy * wo + ox];
                            }
                        }
                    }
                }
            }
        }
    }
}
