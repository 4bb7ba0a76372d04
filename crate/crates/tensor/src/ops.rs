use matrixmultiply::dgemm;

use crate::tape::Tape;
use crate::{Result, Tensor, TensorError, Var};

/// Additive mask value for excluded attention entries; `exp` of it
/// underflows to exactly zero after max subtraction.
pub const MASKED: f64 = -1e30;

const LAYER_NORM_EPS: f64 = 1e-5;

fn mismatch(op: &'static str, lhs: &[usize], rhs: &[usize]) -> TensorError {
    TensorError::ShapeMismatch { op, lhs: lhs.to_vec(), rhs: rhs.to_vec() }
}

fn invalid(op: &'static str, reason: impl Into<String>) -> TensorError {
    TensorError::InvalidArgument { op, reason: reason.into() }
}

fn broadcast_shape(op: &'static str, a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    let rank = a.len().max(b.len());
    let dim = |s: &[usize], k: usize| if k + s.len() < rank { 1 } else { s[k + s.len() - rank] };
    (0..rank)
        .map(|k| match (dim(a, k), dim(b, k)) {
            (x, y) if x == y => Ok(x),
            (1, y) => Ok(y),
            (x, 1) => Ok(x),
            _ => Err(mismatch(op, a, b)),
        })
        .collect()
}

/// How the flat index of a broadcast output maps back to an input.
enum Mapping {
    Same,
    /// Input equals a suffix of the output shape.
    Periodic(usize),
    Explicit(Vec<usize>),
}

impl Mapping {
    fn new(out: &[usize], input: &[usize]) -> Self {
        if out == input {
            return Mapping::Same;
        }
        let len: usize = input.iter().product();
        let pad = out.len() - input.len();
        if out[pad..] == *input {
            return Mapping::Periodic(len.max(1));
        }
        let mut strides = vec![0; out.len()];
        let mut acc = 1;
        for k in (0..input.len()).rev() {
            strides[k + pad] = if input[k] == 1 { 0 } else { acc };
            acc *= input[k];
        }
        let total: usize = out.iter().product();
        let mut map = Vec::with_capacity(total);
        let mut index = vec![0; out.len()];
        let mut flat = 0;
        for _ in 0..total {
            map.push(flat);
            for k in (0..out.len()).rev() {
                index[k] += 1;
                flat += strides[k];
                if index[k] < out[k] {
                    break;
                }
                flat -= strides[k] * out[k];
                index[k] = 0;
            }
        }
        Mapping::Explicit(map)
    }

    #[inline]
    fn at(&self, i: usize) -> usize {
        match self {
            Mapping::Same => i,
            Mapping::Periodic(p) => i % p,
            Mapping::Explicit(m) => m[i],
        }
    }

    /// Sums `grad` (output shaped) into an input of shape `shape`.
    fn reduce(&self, grad: &[f64], shape: &[usize], f: impl Fn(usize, f64) -> f64) -> Tensor {
        let mut out = Tensor::zeros(shape);
        for (i, &g) in grad.iter().enumerate() {
            out.data[self.at(i)] += f(i, g);
        }
        out
    }
}

fn split_last(shape: &[usize]) -> (usize, usize) {
    let d = *shape.last().unwrap_or(&1);
    let rows = if d == 0 { 0 } else { shape.iter().product::<usize>() / d };
    (rows, d)
}

/// `c += op(a) * op(b)` for one matrix block given row/column strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    c: &mut [f64],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    if k > 0 {
        debug_assert!(a.len() > (m - 1) * rsa + (k - 1) * csa);
        debug_assert!(b.len() > (k - 1) * rsb + (n - 1) * csb);
    }
    debug_assert!(c.len() > (m - 1) * rsc + (n - 1) * csc);
    // SAFETY: the slices cover every addressed element (checked above in debug
    // builds and guaranteed by the shape checks of the callers).
    unsafe {
        dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            1.0,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

/// Shape bookkeeping for a (possibly batched) matrix product.
#[derive(Clone, Copy)]
struct MatmulPlan {
    batch: usize,
    m: usize,
    k: usize,
    n: usize,
    ta: bool,
    tb: bool,
    a_batched: bool,
    b_batched: bool,
}

impl MatmulPlan {
    fn new(a: &[usize], b: &[usize], ta: bool, tb: bool) -> Result<(Self, Vec<usize>)> {
        let op = "matmul";
        if a.len() < 2 || b.len() < 2 {
            return Err(mismatch(op, a, b));
        }
        let (ar, ac) = (a[a.len() - 2], a[a.len() - 1]);
        let (br, bc) = (b[b.len() - 2], b[b.len() - 1]);
        let (m, k) = if ta { (ac, ar) } else { (ar, ac) };
        let (k2, n) = if tb { (bc, br) } else { (br, bc) };
        if k != k2 {
            return Err(mismatch(op, a, b));
        }
        let (a_lead, b_lead) = (&a[..a.len() - 2], &b[..b.len() - 2]);
        let lead = match (a_lead.is_empty(), b_lead.is_empty()) {
            (_, true) => a_lead.to_vec(),
            (true, false) => b_lead.to_vec(),
            (false, false) if a_lead == b_lead => a_lead.to_vec(),
            _ => return Err(mismatch(op, a, b)),
        };
        let batch = lead.iter().product();
        let mut out = lead;
        out.extend([m, n]);
        let plan = MatmulPlan { batch, m, k, n, ta, tb, a_batched: !a_lead.is_empty(), b_batched: !b_lead.is_empty() };
        Ok((plan, out))
    }

    fn a_strides(&self) -> (usize, usize) {
        if self.ta {
            (1, self.m)
        } else {
            (self.k, 1)
        }
    }

    fn b_strides(&self) -> (usize, usize) {
        if self.tb {
            (1, self.k)
        } else {
            (self.n, 1)
        }
    }

    fn a_block(&self, i: usize) -> std::ops::Range<usize> {
        let s = self.m * self.k;
        let i = if self.a_batched { i } else { 0 };
        i * s..(i + 1) * s
    }

    fn b_block(&self, i: usize) -> std::ops::Range<usize> {
        let s = self.k * self.n;
        let i = if self.b_batched { i } else { 0 };
        i * s..(i + 1) * s
    }

    fn c_block(&self, i: usize) -> std::ops::Range<usize> {
        let s = self.m * self.n;
        i * s..(i + 1) * s
    }

    /// A shared, untransposed right operand lets the batch fold into rows.
    fn flat(&self) -> bool {
        !self.b_batched && self.a_batched && !self.ta
    }

    fn forward(&self, a: &[f64], b: &[f64], c: &mut [f64]) {
        if self.flat() {
            gemm(self.batch * self.m, self.k, self.n, a, self.a_strides(), b, self.b_strides(), c, (self.n, 1));
            return;
        }
        for i in 0..self.batch {
            gemm(
                self.m,
                self.k,
                self.n,
                &a[self.a_block(i)],
                self.a_strides(),
                &b[self.b_block(i)],
                self.b_strides(),
                &mut c[self.c_block(i)],
                (self.n, 1),
            );
        }
    }

    /// Gradient of `op(a)`: `dC op(b)^T`, written through `a`'s layout.
    fn grad_a(&self, dc: &[f64], b: &[f64], da: &mut [f64]) {
        let (rsb, csb) = self.b_strides();
        let (rsa, csa) = self.a_strides();
        if self.flat() {
            gemm(self.batch * self.m, self.n, self.k, dc, (self.n, 1), b, (csb, rsb), da, (rsa, csa));
            return;
        }
        for i in 0..self.batch {
            let range = self.a_block(i);
            gemm(
                self.m,
                self.n,
                self.k,
                &dc[self.c_block(i)],
                (self.n, 1),
                &b[self.b_block(i)],
                (csb, rsb),
                &mut da[range],
                (rsa, csa),
            );
        }
    }

    /// Gradient of `op(b)`: `op(a)^T dC`, written through `b`'s layout.
    fn grad_b(&self, dc: &[f64], a: &[f64], db: &mut [f64]) {
        let (rsa, csa) = self.a_strides();
        let (rsb, csb) = self.b_strides();
        if self.flat() {
            gemm(self.k, self.batch * self.m, self.n, a, (csa, rsa), dc, (self.n, 1), db, (rsb, csb));
            return;
        }
        for i in 0..self.batch {
            let range = self.b_block(i);
            gemm(
                self.k,
                self.m,
                self.n,
                &a[self.a_block(i)],
                (csa, rsa),
                &dc[self.c_block(i)],
                (self.n, 1),
                &mut db[range],
                (rsb, csb),
            );
        }
    }
}

/// Elementwise rule: value and derivative given `(x, y)`.
type Unary = (fn(f64) -> f64, fn(f64, f64) -> f64);

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

const RELU: Unary = (|x| x.max(0.0), |x, _| if x > 0.0 { 1.0 } else { 0.0 });
const SIGMOID: Unary = (sigmoid, |_, y| y * (1.0 - y));
const TANH: Unary = (f64::tanh, |_, y| 1.0 - y * y);
const EXP: Unary = (f64::exp, |_, y| y);
const LN: Unary = (f64::ln, |x, _| 1.0 / x);
const SOFTPLUS: Unary = (softplus, |x, _| sigmoid(x));
const LOG_SIGMOID: Unary = (|x| -softplus(-x), |x, _| sigmoid(-x));

/// Row-wise stable softmax of a `(rows, d)` buffer.
fn softmax_rows(x: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for (row, o) in x.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (oi, &xi) in o.iter_mut().zip(row) {
            *oi = (xi - max).exp();
            sum += *oi;
        }
        o.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

impl Tape {
    fn unary(&mut self, op: &'static str, a: Var, (f, df): Unary) -> Result<Var> {
        let x = self.value(a);
        let y = Tensor { shape: x.shape.clone(), data: x.data.iter().map(|&v| f(v)).collect() };
        self.push(
            op,
            y,
            &[a],
            Box::new(move |ins, out, g, _| {
                let data = ins[0].data.iter().zip(&out.data).zip(&g.data).map(|((&x, &y), &g)| g * df(x, y)).collect();
                vec![Some(Tensor { shape: out.shape.clone(), data })]
            }),
        )
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary("relu", a, RELU)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary("sigmoid", a, SIGMOID)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary("tanh", a, TANH)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.unary("exp", a, EXP)
    }

    pub fn ln(&mut self, a: Var) -> Result<Var> {
        self.unary("ln", a, LN)
    }

    pub fn softplus(&mut self, a: Var) -> Result<Var> {
        self.unary("softplus", a, SOFTPLUS)
    }

    /// `ln sigmoid(x)`, stable for large `|x|`.
    pub fn log_sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary("log_sigmoid", a, LOG_SIGMOID)
    }

    /// `c * a` for a constant `c`.
    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let x = self.value(a);
        let y = Tensor { shape: x.shape.clone(), data: x.data.iter().map(|v| v * c).collect() };
        self.push(
            "scale",
            y,
            &[a],
            Box::new(move |_, out, g, _| {
                vec![Some(Tensor { shape: out.shape.clone(), data: g.data.iter().map(|v| v * c).collect() })]
            }),
        )
    }

    /// `a + c` for a constant `c`.
    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        let x = self.value(a);
        let y = Tensor { shape: x.shape.clone(), data: x.data.iter().map(|v| v + c).collect() };
        self.push("add_scalar", y, &[a], Box::new(|_, _, g, _| vec![Some(g.clone())]))
    }

    /// Elementwise clamp; the gradient passes where `lo <= x <= hi`.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Result<Var> {
        if lo > hi {
            return Err(invalid("clamp", format!("lower bound {lo} above upper bound {hi}")));
        }
        let x = self.value(a);
        let y = Tensor { shape: x.shape.clone(), data: x.data.iter().map(|v| v.clamp(lo, hi)).collect() };
        self.push(
            "clamp",
            y,
            &[a],
            Box::new(move |ins, out, g, _| {
                let data = ins[0]
                    .data
                    .iter()
                    .zip(&g.data)
                    .map(|(&x, &g)| if (lo..=hi).contains(&x) { g } else { 0.0 })
                    .collect();
                vec![Some(Tensor { shape: out.shape.clone(), data })]
            }),
        )
    }

    fn binary(&mut self, op: &'static str, a: Var, b: Var, kind: Binary) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        let shape = broadcast_shape(op, &x.shape, &y.shape)?;
        let (ma, mb) = (Mapping::new(&shape, &x.shape), Mapping::new(&shape, &y.shape));
        let len: usize = shape.iter().product();
        let f = kind.forward();
        let data = (0..len).map(|i| f(x.data[ma.at(i)], y.data[mb.at(i)])).collect();
        let value = Tensor { shape: shape.clone(), data };
        self.push(
            op,
            value,
            &[a, b],
            Box::new(move |ins, _, g, needs| {
                let (x, y) = (ins[0], ins[1]);
                let ga = needs[0].then(|| match kind {
                    Binary::Add | Binary::Sub => ma.reduce(&g.data, &x.shape, |_, g| g),
                    Binary::Mul => ma.reduce(&g.data, &x.shape, |i, g| g * y.data[mb.at(i)]),
                    Binary::Min | Binary::Max => ma.reduce(&g.data, &x.shape, |i, g| {
                        let (u, v) = (x.data[ma.at(i)], y.data[mb.at(i)]);
                        if kind.picks_left(u, v) {
                            g
                        } else {
                            0.0
                        }
                    }),
                });
                let gb = needs[1].then(|| match kind {
                    Binary::Add => mb.reduce(&g.data, &y.shape, |_, g| g),
                    Binary::Sub => mb.reduce(&g.data, &y.shape, |_, g| -g),
                    Binary::Mul => mb.reduce(&g.data, &y.shape, |i, g| g * x.data[ma.at(i)]),
                    Binary::Min | Binary::Max => mb.reduce(&g.data, &y.shape, |i, g| {
                        let (u, v) = (x.data[ma.at(i)], y.data[mb.at(i)]);
                        if kind.picks_left(u, v) {
                            0.0
                        } else {
                            g
                        }
                    }),
                });
                vec![ga, gb]
            }),
        )
    }

    /// Broadcasting `a + b` (numpy rules).
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, Binary::Add)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, Binary::Sub)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, Binary::Mul)
    }

    /// Elementwise minimum; ties send the gradient to `a`.
    pub fn minimum(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("minimum", a, b, Binary::Min)
    }

    /// Elementwise maximum; ties send the gradient to `a`.
    pub fn maximum(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("maximum", a, b, Binary::Max)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_ex(a, b, false, false)
    }

    /// `op(a) @ op(b)` over the last two axes, where `op` transposes when the
    /// flag is set. Leading axes must match, or one operand is a plain matrix
    /// shared across the other's batch.
    pub fn matmul_ex(&mut self, a: Var, b: Var, ta: bool, tb: bool) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        let (plan, shape) = MatmulPlan::new(&x.shape, &y.shape, ta, tb)?;
        let mut c = Tensor::zeros(&shape);
        plan.forward(&x.data, &y.data, &mut c.data);
        self.push(
            "matmul",
            c,
            &[a, b],
            Box::new(move |ins, _, g, needs| {
                let da = needs[0].then(|| {
                    let mut da = Tensor::zeros(&ins[0].shape);
                    plan.grad_a(&g.data, &ins[1].data, &mut da.data);
                    da
                });
                let db = needs[1].then(|| {
                    let mut db = Tensor::zeros(&ins[1].shape);
                    plan.grad_b(&g.data, &ins[0].data, &mut db.data);
                    db
                });
                vec![da, db]
            }),
        )
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let (_, d) = split_last(&x.shape);
        let y = Tensor { shape: x.shape.clone(), data: softmax_rows(&x.data, d.max(1)) };
        self.push(
            "softmax",
            y,
            &[a],
            Box::new(move |_, out, g, _| {
                let mut dx = vec![0.0; g.data.len()];
                for ((y, g), dx) in out.data.chunks_exact(d).zip(g.data.chunks_exact(d)).zip(dx.chunks_exact_mut(d)) {
                    let dot: f64 = y.iter().zip(g).map(|(a, b)| a * b).sum();
                    for k in 0..d {
                        dx[k] = y[k] * (g[k] - dot);
                    }
                }
                vec![Some(Tensor { shape: out.shape.clone(), data: dx })]
            }),
        )
    }

    /// Log-softmax over the last axis.
    pub fn log_softmax(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let (_, d) = split_last(&x.shape);
        let mut data = x.data.clone();
        for row in data.chunks_exact_mut(d.max(1)) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            row.iter_mut().for_each(|v| *v -= lse);
        }
        let y = Tensor { shape: x.shape.clone(), data };
        self.push(
            "log_softmax",
            y,
            &[a],
            Box::new(move |_, out, g, _| {
                let mut dx = vec![0.0; g.data.len()];
                for ((y, g), dx) in out.data.chunks_exact(d).zip(g.data.chunks_exact(d)).zip(dx.chunks_exact_mut(d)) {
                    let total: f64 = g.iter().sum();
                    for k in 0..d {
                        dx[k] = g[k] - y[k].exp() * total;
                    }
                }
                vec![Some(Tensor { shape: out.shape.clone(), data: dx })]
            }),
        )
    }

    /// `ln sum exp` over the last axis (which is removed), stabilized by the
    /// row maximum.
    pub fn logsumexp(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if x.shape.is_empty() || x.shape[x.rank() - 1] == 0 {
            return Err(invalid("logsumexp", "needs a nonempty last axis"));
        }
        let (_, d) = split_last(&x.shape);
        let data = x
            .data
            .chunks_exact(d)
            .map(|row| {
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
            })
            .collect();
        let y = Tensor { shape: x.shape[..x.rank() - 1].to_vec(), data };
        self.push(
            "logsumexp",
            y,
            &[a],
            Box::new(move |ins, out, g, _| {
                let x = ins[0];
                let mut dx = vec![0.0; x.data.len()];
                for (r, (row, dx)) in x.data.chunks_exact(d).zip(dx.chunks_exact_mut(d)).enumerate() {
                    for k in 0..d {
                        dx[k] = g.data[r] * (row[k] - out.data[r]).exp();
                    }
                }
                vec![Some(Tensor { shape: x.shape.clone(), data: dx })]
            }),
        )
    }

    /// Layer normalization over the last axis with gain and bias of length `d`.
    pub fn layer_norm(&mut self, a: Var, gain: Var, bias: Var) -> Result<Var> {
        let (x, gv, bv) = (self.value(a), self.value(gain), self.value(bias));
        let (rows, d) = split_last(&x.shape);
        if gv.shape != [d] || bv.shape != [d] {
            return Err(mismatch("layer_norm", &x.shape, &gv.shape));
        }
        let mut xhat = vec![0.0; x.data.len()];
        let mut inv_std = vec![0.0; rows];
        for r in 0..rows {
            let row = &x.data[r * d..(r + 1) * d];
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            inv_std[r] = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            for k in 0..d {
                xhat[r * d + k] = (row[k] - mean) * inv_std[r];
            }
        }
        let data = xhat.iter().enumerate().map(|(i, &h)| h * gv.data[i % d] + bv.data[i % d]).collect();
        let y = Tensor { shape: x.shape.clone(), data };
        self.push(
            "layer_norm",
            y,
            &[a, gain, bias],
            Box::new(move |ins, _, g, needs| {
                let gv = ins[1];
                let dx = needs[0].then(|| {
                    let mut dx = vec![0.0; g.data.len()];
                    for r in 0..rows {
                        let s = r * d..(r + 1) * d;
                        let dh: Vec<f64> = g.data[s.clone()].iter().zip(&gv.data).map(|(a, b)| a * b).collect();
                        let mean_dh = dh.iter().sum::<f64>() / d as f64;
                        let mean_dh_h = dh.iter().zip(&xhat[s.clone()]).map(|(a, b)| a * b).sum::<f64>() / d as f64;
                        for k in 0..d {
                            dx[r * d + k] = inv_std[r] * (dh[k] - mean_dh - xhat[r * d + k] * mean_dh_h);
                        }
                    }
                    Tensor { shape: g.shape.clone(), data: dx }
                });
                let dg = needs[1].then(|| {
                    let mut dg = Tensor::zeros(&[d]);
                    for (i, (&gi, &h)) in g.data.iter().zip(&xhat).enumerate() {
                        dg.data[i % d] += gi * h;
                    }
                    dg
                });
                let db = needs[2].then(|| {
                    let mut db = Tensor::zeros(&[d]);
                    for (i, &gi) in g.data.iter().enumerate() {
                        db.data[i % d] += gi;
                    }
                    db
                });
                vec![dx, dg, db]
            }),
        )
    }

    /// Rows of a `(vocab, d)` table selected by `indices`, shaped `(len, d)`.
    pub fn gather_rows(&mut self, table: Var, indices: &[usize]) -> Result<Var> {
        let t = self.value(table);
        if t.rank() != 2 {
            return Err(invalid("gather_rows", format!("table must be a matrix, got {:?}", t.shape)));
        }
        let (vocab, d) = (t.shape[0], t.shape[1]);
        if let Some(&bad) = indices.iter().find(|&&i| i >= vocab) {
            return Err(invalid("gather_rows", format!("index {bad} out of range for {vocab} rows")));
        }
        let mut data = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            data.extend_from_slice(&t.data[i * d..(i + 1) * d]);
        }
        let y = Tensor { shape: vec![indices.len(), d], data };
        let indices = indices.to_vec();
        self.push(
            "gather_rows",
            y,
            &[table],
            Box::new(move |ins, _, g, _| {
                let mut dt = Tensor::zeros(&ins[0].shape);
                for (r, &i) in indices.iter().enumerate() {
                    for k in 0..d {
                        dt.data[i * d + k] += g.data[r * d + k];
                    }
                }
                vec![Some(dt)]
            }),
        )
    }

    /// Same data, new shape.
    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let x = self.value(a);
        if shape.iter().product::<usize>() != x.len() {
            return Err(mismatch("reshape", &x.shape, shape));
        }
        let y = Tensor { shape: shape.to_vec(), data: x.data.clone() };
        self.push(
            "reshape",
            y,
            &[a],
            Box::new(|ins, _, g, _| vec![Some(Tensor { shape: ins[0].shape.clone(), data: g.data.clone() })]),
        )
    }

    /// Concatenation along the last axis; leading axes must agree.
    pub fn concat_last(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else { return Err(invalid("concat_last", "no inputs")) };
        let lead = self.shape(first)[..self.shape(first).len().saturating_sub(1)].to_vec();
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let s = self.shape(p);
            if s.is_empty() || s[..s.len() - 1] != *lead {
                return Err(mismatch("concat_last", self.shape(first), s));
            }
            widths.push(s[s.len() - 1]);
        }
        let total: usize = widths.iter().sum();
        let rows: usize = lead.iter().product();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (&p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.value(p).data[r * w..(r + 1) * w]);
            }
        }
        let mut shape = lead;
        shape.push(total);
        let y = Tensor { shape, data };
        self.push(
            "concat_last",
            y,
            parts,
            Box::new(move |ins, _, g, needs| {
                let mut offset = 0;
                let mut out = Vec::with_capacity(ins.len());
                for (k, &w) in widths.iter().enumerate() {
                    out.push(needs[k].then(|| {
                        let mut data = Vec::with_capacity(rows * w);
                        for r in 0..rows {
                            data.extend_from_slice(&g.data[r * total + offset..r * total + offset + w]);
                        }
                        Tensor { shape: ins[k].shape.clone(), data }
                    }));
                    offset += w;
                }
                out
            }),
        )
    }

    /// Columns `start..start + len` of the last axis.
    pub fn slice_last(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let x = self.value(a);
        let (rows, d) = split_last(&x.shape);
        if x.shape.is_empty() || start + len > d {
            return Err(invalid("slice_last", format!("range {start}..{} outside {:?}", start + len, x.shape)));
        }
        let mut data = Vec::with_capacity(rows * len);
        for r in 0..rows {
            data.extend_from_slice(&x.data[r * d + start..r * d + start + len]);
        }
        let mut shape = x.shape.clone();
        *shape.last_mut().expect("rank checked") = len;
        let y = Tensor { shape, data };
        self.push(
            "slice_last",
            y,
            &[a],
            Box::new(move |ins, _, g, _| {
                let mut dx = Tensor::zeros(&ins[0].shape);
                for r in 0..rows {
                    dx.data[r * d + start..r * d + start + len].copy_from_slice(&g.data[r * len..(r + 1) * len]);
                }
                vec![Some(dx)]
            }),
        )
    }

    /// Stacks tensors along the first axis; trailing axes must agree.
    pub fn concat_axis0(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else { return Err(invalid("concat_axis0", "no inputs")) };
        let tail = self.shape(first).get(1..).unwrap_or(&[]).to_vec();
        let mut counts = Vec::with_capacity(parts.len());
        let mut data = Vec::new();
        for &p in parts {
            let s = self.shape(p);
            if s.is_empty() || s[1..] != *tail {
                return Err(mismatch("concat_axis0", self.shape(first), s));
            }
            counts.push(self.value(p).len());
            data.extend_from_slice(&self.value(p).data);
        }
        let mut shape = vec![parts.iter().map(|&p| self.shape(p)[0]).sum()];
        shape.extend(tail);
        let y = Tensor { shape, data };
        self.push(
            "concat_axis0",
            y,
            parts,
            Box::new(move |ins, _, g, needs| {
                let mut offset = 0;
                let mut out = Vec::with_capacity(ins.len());
                for (k, &c) in counts.iter().enumerate() {
                    out.push(
                        needs[k]
                            .then(|| Tensor { shape: ins[k].shape.clone(), data: g.data[offset..offset + c].to_vec() }),
                    );
                    offset += c;
                }
                out
            }),
        )
    }

    /// Entries `start..start + len` of the first axis.
    pub fn slice_axis0(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let x = self.value(a);
        if x.shape.is_empty() || start + len > x.shape[0] {
            return Err(invalid("slice_axis0", format!("range {start}..{} outside {:?}", start + len, x.shape)));
        }
        let inner: usize = x.shape[1..].iter().product();
        let mut shape = x.shape.clone();
        shape[0] = len;
        let y = Tensor { shape, data: x.data[start * inner..(start + len) * inner].to_vec() };
        self.push(
            "slice_axis0",
            y,
            &[a],
            Box::new(move |ins, _, g, _| {
                let mut dx = Tensor::zeros(&ins[0].shape);
                dx.data[start * inner..(start + len) * inner].copy_from_slice(&g.data);
                vec![Some(dx)]
            }),
        )
    }

    /// Exchanges the first two axes: `(a, b, rest..) -> (b, a, rest..)`.
    pub fn swap01(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if x.rank() < 2 {
            return Err(invalid("swap01", format!("needs rank >= 2, got {:?}", x.shape)));
        }
        let (p, q) = (x.shape[0], x.shape[1]);
        let inner: usize = x.shape[2..].iter().product();
        let swap = move |src: &[f64], rows: usize, cols: usize| {
            let mut dst = vec![0.0; src.len()];
            for i in 0..rows {
                for j in 0..cols {
                    let from = (i * cols + j) * inner;
                    let to = (j * rows + i) * inner;
                    dst[to..to + inner].copy_from_slice(&src[from..from + inner]);
                }
            }
            dst
        };
        let mut shape = x.shape.clone();
        shape.swap(0, 1);
        let y = Tensor { shape, data: swap(&x.data, p, q) };
        self.push(
            "swap01",
            y,
            &[a],
            Box::new(move |ins, _, g, _| vec![Some(Tensor { shape: ins[0].shape.clone(), data: swap(&g.data, q, p) })]),
        )
    }

    /// Transposes the last two axes.
    pub fn transpose_last2(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if x.rank() < 2 {
            return Err(invalid("transpose_last2", format!("needs rank >= 2, got {:?}", x.shape)));
        }
        let (m, n) = (x.shape[x.rank() - 2], x.shape[x.rank() - 1]);
        let transpose = move |src: &[f64], rows: usize, cols: usize| {
            let mut dst = vec![0.0; src.len()];
            let block = rows * cols;
            for b in 0..src.len() / block.max(1) {
                for i in 0..rows {
                    for j in 0..cols {
                        dst[b * block + j * rows + i] = src[b * block + i * cols + j];
                    }
                }
            }
            dst
        };
        let mut shape = x.shape.clone();
        let r = shape.len();
        shape.swap(r - 2, r - 1);
        let y = Tensor { shape, data: transpose(&x.data, m, n) };
        self.push(
            "transpose_last2",
            y,
            &[a],
            Box::new(move |ins, _, g, _| {
                vec![Some(Tensor { shape: ins[0].shape.clone(), data: transpose(&g.data, n, m) })]
            }),
        )
    }

    /// Sum over one axis, which is removed.
    pub fn sum_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        self.reduce_axis("sum_axis", a, axis, 1.0)
    }

    /// Mean over one axis, which is removed (mean pooling).
    pub fn mean_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        let len = *self.shape(a).get(axis).ok_or_else(|| invalid("mean_axis", "axis out of range"))?;
        if len == 0 {
            return Err(invalid("mean_axis", "mean over an empty axis"));
        }
        self.reduce_axis("mean_axis", a, axis, 1.0 / len as f64)
    }

    fn reduce_axis(&mut self, op: &'static str, a: Var, axis: usize, factor: f64) -> Result<Var> {
        let x = self.value(a);
        if axis >= x.rank() {
            return Err(invalid(op, format!("axis {axis} out of range for {:?}", x.shape)));
        }
        let outer: usize = x.shape[..axis].iter().product();
        let len = x.shape[axis];
        let inner: usize = x.shape[axis + 1..].iter().product();
        let mut data = vec![0.0; outer * inner];
        for o in 0..outer {
            for l in 0..len {
                let src = &x.data[(o * len + l) * inner..(o * len + l + 1) * inner];
                for (d, s) in data[o * inner..(o + 1) * inner].iter_mut().zip(src) {
                    *d += s;
                }
            }
        }
        data.iter_mut().for_each(|v| *v *= factor);
        let mut shape = x.shape.clone();
        shape.remove(axis);
        let y = Tensor { shape, data };
        self.push(
            op,
            y,
            &[a],
            Box::new(move |ins, _, g, _| {
                let mut dx = Tensor::zeros(&ins[0].shape);
                for o in 0..outer {
                    for l in 0..len {
                        let dst = &mut dx.data[(o * len + l) * inner..(o * len + l + 1) * inner];
                        for (d, s) in dst.iter_mut().zip(&g.data[o * inner..(o + 1) * inner]) {
                            *d = s * factor;
                        }
                    }
                }
                vec![Some(dx)]
            }),
        )
    }

    /// Sum over the last axis.
    pub fn sum_last(&mut self, a: Var) -> Result<Var> {
        let r = self.value(a).rank();
        if r == 0 {
            return Err(invalid("sum_last", "scalar input"));
        }
        self.sum_axis(a, r - 1)
    }

    /// Sum of all entries, as a scalar.
    pub fn sum_all(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let y = Tensor::scalar(x.data.iter().sum());
        self.push("sum_all", y, &[a], Box::new(|ins, _, g, _| vec![Some(Tensor::full(&ins[0].shape, g.data[0]))]))
    }

    /// Mean of all entries, as a scalar.
    pub fn mean_all(&mut self, a: Var) -> Result<Var> {
        let n = self.value(a).len();
        if n == 0 {
            return Err(invalid("mean_all", "empty tensor"));
        }
        let s = self.sum_all(a)?;
        self.scale(s, 1.0 / n as f64)
    }

    /// Attention logits `scale * q k^T` plus an optional additive mask (use
    /// [`MASKED`] for excluded entries).
    pub fn attention_scores(&mut self, q: Var, k: Var, scale: f64, mask: Option<Var>) -> Result<Var> {
        let s = self.matmul_ex(q, k, false, true)?;
        let s = self.scale(s, scale)?;
        match mask {
            Some(m) => self.add(s, m),
            None => Ok(s),
        }
    }

    /// Bernoulli log-likelihood of symmetric adjacency targets under logits.
    ///
    /// `delta` has shape `(t, k, n, n)` and holds the log-odds of an edge for
    /// each step and mixture component; `targets` has shape `(t, n, n)` with
    /// 0/1 entries. Only pairs `i < j` are read. The output `(t, k)` holds
    /// `sum_{i<j} y ln sigmoid(delta) + (1 - y) ln sigmoid(-delta)`.
    pub fn pairwise_bernoulli_loglik(&mut self, delta: Var, targets: &Tensor) -> Result<Var> {
        let op = "pairwise_bernoulli_loglik";
        let x = self.value(delta);
        if x.rank() != 4 || targets.rank() != 3 {
            return Err(mismatch(op, &x.shape, &targets.shape));
        }
        let (t, k, n) = (x.shape[0], x.shape[1], x.shape[2]);
        if x.shape[3] != n || targets.shape != [t, n, n] {
            return Err(mismatch(op, &x.shape, &targets.shape));
        }
        let mut data = vec![0.0; t * k];
        for s in 0..t {
            let y = &targets.data[s * n * n..(s + 1) * n * n];
            for c in 0..k {
                let d = &x.data[(s * k + c) * n * n..(s * k + c + 1) * n * n];
                let mut acc = 0.0;
                for i in 0..n {
                    for j in (i + 1)..n {
                        let v = d[i * n + j];
                        acc -= if y[i * n + j] > 0.5 { softplus(-v) } else { softplus(v) };
                    }
                }
                data[s * k + c] = acc;
            }
        }
        let targets = targets.clone();
        self.push(
            op,
            Tensor { shape: vec![t, k], data },
            &[delta],
            Box::new(move |ins, _, g, _| {
                let x = ins[0];
                let mut dx = Tensor::zeros(&x.shape);
                for s in 0..t {
                    let y = &targets.data[s * n * n..(s + 1) * n * n];
                    for c in 0..k {
                        let base = (s * k + c) * n * n;
                        let go = g.data[s * k + c];
                        for i in 0..n {
                            for j in (i + 1)..n {
                                let p = sigmoid(x.data[base + i * n + j]);
                                dx.data[base + i * n + j] = go * (y[i * n + j] - p);
                            }
                        }
                    }
                }
                vec![Some(dx)]
            }),
        )
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Binary {
    Add,
    Sub,
    Mul,
    Min,
    Max,
}

impl Binary {
    fn forward(self) -> fn(f64, f64) -> f64 {
        match self {
            Binary::Add => |a, b| a + b,
            Binary::Sub => |a, b| a - b,
            Binary::Mul => |a, b| a * b,
            Binary::Min => f64::min,
            Binary::Max => f64::max,
        }
    }

    fn picks_left(self, a: f64, b: f64) -> bool {
        match self {
            Binary::Min => a <= b,
            _ => a >= b,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn logsumexp_of_zeros_is_ln2() {
        let mut tape = Tape::new();
        let x = tape.input(t(&[2], &[0.0, 0.0])).unwrap();
        let y = tape.logsumexp(x).unwrap();
        assert!((tape.value(y).item() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn logsumexp_handles_large_inputs() {
        let mut tape = Tape::new();
        let x = tape.input(t(&[2], &[1000.0, 1000.0])).unwrap();
        let y = tape.logsumexp(x).unwrap();
        assert!((tape.value(y).item() - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn softmax_of_constant_is_uniform() {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::full(&[2, 5], 3.7)).unwrap();
        let y = tape.softmax(x).unwrap();
        assert!(tape.value(y).data.iter().all(|&v| (v - 0.2).abs() < 1e-15));
    }

    #[test]
    fn product_rule_at_two_three() {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::scalar(2.0)).unwrap();
        let y = tape.input(Tensor::scalar(3.0)).unwrap();
        let z = tape.mul(x, y).unwrap();
        let grads = tape.backward(z).unwrap();
        assert_eq!(grads.get(x).unwrap().item(), 3.0);
        assert_eq!(grads.get(y).unwrap().item(), 2.0);
    }

    #[test]
    fn backward_runs_once() {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::scalar(2.0)).unwrap();
        let y = tape.scale(x, 2.0).unwrap();
        tape.backward(y).unwrap();
        assert_eq!(tape.backward(y).err(), Some(TensorError::BackwardTwice));
    }

    #[test]
    fn backward_needs_scalar() {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::zeros(&[3])).unwrap();
        assert_eq!(tape.backward(x).err(), Some(TensorError::NotScalar(vec![3])));
    }

    #[test]
    fn non_finite_outputs_are_rejected() {
        let mut tape = Tape::new();
        let x = tape.input(t(&[2], &[-1.0, 1.0])).unwrap();
        let err = tape.ln(x).unwrap_err();
        assert!(matches!(err, TensorError::NonFinite { op: "ln", .. }));
        let big = tape.input(Tensor::scalar(1e3)).unwrap();
        assert!(tape.exp(big).is_err());
        assert!(tape.constant(Tensor::scalar(f64::NAN)).is_err());
    }

    #[test]
    fn shape_mismatches_are_rejected() {
        let mut tape = Tape::new();
        let a = tape.input(Tensor::zeros(&[2, 3])).unwrap();
        let b = tape.input(Tensor::zeros(&[2, 3])).unwrap();
        assert!(matches!(tape.matmul(a, b), Err(TensorError::ShapeMismatch { .. })));
        let c = tape.input(Tensor::zeros(&[4])).unwrap();
        assert!(matches!(tape.add(a, c), Err(TensorError::ShapeMismatch { .. })));
    }

    #[test]
    fn masked_attention_is_exactly_zero() {
        let mut tape = Tape::new();
        let q = tape.input(Tensor::from_fn(&[3, 2], |i| i as f64 * 0.3)).unwrap();
        let mask = Tensor::from_fn(&[3, 3], |i| if i % 3 > i / 3 { MASKED } else { 0.0 });
        let mask = tape.constant(mask).unwrap();
        let s = tape.attention_scores(q, q, 0.5, Some(mask)).unwrap();
        let p = tape.softmax(s).unwrap();
        let p = tape.value(p);
        for i in 0..3 {
            for j in (i + 1)..3 {
                assert_eq!(p.at(&[i, j]), 0.0);
            }
        }
    }

    #[test]
    fn constants_get_no_gradient() {
        let mut tape = Tape::new();
        let c = tape.constant(Tensor::scalar(2.0)).unwrap();
        let x = tape.input(Tensor::scalar(5.0)).unwrap();
        let y = tape.mul(c, x).unwrap();
        let grads = tape.backward(y).unwrap();
        assert!(grads.get(c).is_none());
        assert_eq!(grads.get(x).unwrap().item(), 2.0);
    }

    #[test]
    fn broadcast_mapping_matches_strides() {
        let m = Mapping::new(&[2, 3, 2], &[3, 1]);
        let got: Vec<usize> = (0..12).map(|i| m.at(i)).collect();
        assert_eq!(got, vec![0, 0, 1, 1, 2, 2, 0, 0, 1, 1, 2, 2]);
        let m = Mapping::new(&[2, 3], &[2, 1]);
        let got: Vec<usize> = (0..6).map(|i| m.at(i)).collect();
        assert_eq!(got, vec![0, 0, 0, 1, 1, 1]);
    }
}
