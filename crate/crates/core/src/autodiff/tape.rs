//! Tape-based reverse-mode differentiation over dense `f64` matrices.
//!
//! A [`Tape`] is built fresh for every loss evaluation. Nodes are appended in
//! evaluation order, so the tape is already topologically sorted and the
//! backward pass is a single reverse sweep.

use ndarray::{s, Array2, Axis};

use super::params::{ParamId, ParamStore};
use crate::error::{Error, Result};

pub type Mat = Array2<f64>;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    AddRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    MulCol(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Tanh(Var),
    Silu(Var),
    Sigmoid(Var),
    LogSigmoid(Var),
    Log(Var),
    Exp(Var),
    Square(Var),
    Concat(Vec<Var>),
    SliceCols(Var, usize),
    Reshape(Var),
    Sum(Var),
    Mean(Var),
    SumRows(Var),
    BroadcastRows(Var),
    SquaredNorm(Var),
    StopGradient,
}

impl Op {
    fn tag(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::AddRow(..) => "add_row",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::MulCol(..) => "mul_col",
            Op::Scale(..) => "scale",
            Op::AddScalar(..) => "add_scalar",
            Op::Tanh(..) => "tanh",
            Op::Silu(..) => "silu",
            Op::Sigmoid(..) => "sigmoid",
            Op::LogSigmoid(..) => "log_sigmoid",
            Op::Log(..) => "log",
            Op::Exp(..) => "exp",
            Op::Square(..) => "square",
            Op::Concat(..) => "concat",
            Op::SliceCols(..) => "slice_cols",
            Op::Reshape(..) => "reshape",
            Op::Sum(..) => "sum",
            Op::Mean(..) => "mean",
            Op::SumRows(..) => "sum_rows",
            Op::BroadcastRows(..) => "broadcast_rows",
            Op::SquaredNorm(..) => "squared_norm",
            Op::StopGradient => "stop_gradient",
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Mat,
    op: Op,
    needs_grad: bool,
}

/// Parameters of a [`ParamStore`] bound as leaves of one tape.
#[derive(Debug, Clone)]
pub struct Bound {
    vars: Vec<Var>,
}

impl Bound {
    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.index()]
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    /// Gradients for every bound parameter, in store order. Parameters the loss
    /// does not reach get zeros.
    pub fn collect(&self, grads: &Gradients) -> Vec<Mat> {
        self.vars.iter().map(|&v| grads.wrt(v)).collect()
    }
}

/// Result of a backward pass. Gradients are retained for leaves only;
/// intermediate accumulators are released during the sweep.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Mat>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    pub fn wrt(&self, v: Var) -> Mat {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => Mat::zeros(self.shapes[v.0]),
        }
    }
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn shape_of(m: &Mat) -> (usize, usize) {
    (m.nrows(), m.ncols())
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn log_sigmoid(x: f64) -> f64 {
    x.min(0.0) - (-x.abs()).exp().ln_1p()
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

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        shape_of(&self.nodes[v.0].value)
    }

    /// Scalar value of a 1x1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, value: Mat, op: Op, needs_grad: bool) -> Result<Var> {
        if let Some(bad) = value.iter().find(|x| !x.is_finite()) {
            return Err(Error::numerical(
                op.tag(),
                format!("non-finite value {bad} in output of shape {:?}", shape_of(&value)),
            ));
        }
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn same_shape(&self, tag: &str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Config(format!(
                "{tag}: shape mismatch {:?} vs {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        Ok(())
    }

    /// Constant input; receives no gradient.
    pub fn constant(&mut self, value: Mat) -> Result<Var> {
        self.push(value, Op::Leaf, false)
    }

    /// Differentiable leaf.
    pub fn leaf(&mut self, value: Mat) -> Result<Var> {
        self.push(value, Op::Leaf, true)
    }

    pub fn scalar_const(&mut self, x: f64) -> Result<Var> {
        self.constant(Mat::from_elem((1, 1), x))
    }

    /// Bind every parameter of `store` as a differentiable leaf.
    pub fn bind(&mut self, store: &ParamStore) -> Result<Bound> {
        let vars = store
            .iter()
            .map(|(_, value)| self.leaf(value.clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Bound { vars })
    }

    /// Bind parameters as constants (frozen copy, e.g. a reference model).
    pub fn bind_frozen(&mut self, store: &ParamStore) -> Result<Bound> {
        let vars = store
            .iter()
            .map(|(_, value)| self.constant(value.clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Bound { vars })
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(Error::Config(format!("matmul: shape mismatch {sa:?} x {sb:?}")));
        }
        let out = self.value(a).dot(self.value(b));
        let ng = self.ng(a) || self.ng(b);
        self.push(out, Op::MatMul(a, b), ng)
    }

    /// `a + row`, broadcasting a 1 x m row over the n rows of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (sa, sr) = (self.shape(a), self.shape(row));
        if sr.0 != 1 || sr.1 != sa.1 {
            return Err(Error::Config(format!("add_row: shape mismatch {sa:?} + {sr:?}")));
        }
        let out = self.value(a) + self.value(row);
        let ng = self.ng(a) || self.ng(row);
        self.push(out, Op::AddRow(a, row), ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self.value(a) + self.value(b);
        let ng = self.ng(a) || self.ng(b);
        self.push(out, Op::Add(a, b), ng)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let out = self.value(a) - self.value(b);
        let ng = self.ng(a) || self.ng(b);
        self.push(out, Op::Sub(a, b), ng)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = self.value(a) * self.value(b);
        let ng = self.ng(a) || self.ng(b);
        self.push(out, Op::Mul(a, b), ng)
    }

    /// Scale each row of `a` by the matching entry of the n x 1 column `col`.
    pub fn mul_col(&mut self, a: Var, col: Var) -> Result<Var> {
        let (sa, sc) = (self.shape(a), self.shape(col));
        if sc.1 != 1 || sc.0 != sa.0 {
            return Err(Error::Config(format!("mul_col: shape mismatch {sa:?} * {sc:?}")));
        }
        let out = self.value(a) * self.value(col);
        let ng = self.ng(a) || self.ng(col);
        self.push(out, Op::MulCol(a, col), ng)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let out = self.value(a) * c;
        let ng = self.ng(a);
        self.push(out, Op::Scale(a, c), ng)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        let out = self.value(a) + c;
        let ng = self.ng(a);
        self.push(out, Op::AddScalar(a), ng)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).mapv(f64::tanh);
        let ng = self.ng(a);
        self.push(out, Op::Tanh(a), ng)
    }

    pub fn silu(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).mapv(|x| x * sigmoid(x));
        let ng = self.ng(a);
        self.push(out, Op::Silu(a), ng)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).mapv(sigmoid);
        let ng = self.ng(a);
        self.push(out, Op::Sigmoid(a), ng)
    }

    /// Numerically stable `log σ(x)`.
    pub fn log_sigmoid(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).mapv(log_sigmoid);
        let ng = self.ng(a);
        self.push(out, Op::LogSigmoid(a), ng)
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).mapv(f64::ln);
        let ng = self.ng(a);
        self.push(out, Op::Log(a), ng)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).mapv(f64::exp);
        let ng = self.ng(a);
        self.push(out, Op::Exp(a), ng)
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).mapv(|x| x * x);
        let ng = self.ng(a);
        self.push(out, Op::Square(a), ng)
    }

    /// Column-wise concatenation of nodes with equal row counts.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = match parts.first() {
            Some(&p) => self.shape(p).0,
            None => return Err(Error::Config("concat: no operands".into())),
        };
        if let Some(&bad) = parts.iter().find(|&&p| self.shape(p).0 != rows) {
            return Err(Error::Config(format!(
                "concat: row mismatch {} vs {}",
                rows,
                self.shape(bad).0
            )));
        }
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let out = ndarray::concatenate(Axis(1), &views)
            .map_err(|e| Error::Config(format!("concat: {e}")))?;
        let ng = parts.iter().any(|&p| self.ng(p));
        self.push(out, Op::Concat(parts.to_vec()), ng)
    }

    /// Columns `start..end` of `a`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let sa = self.shape(a);
        if start > end || end > sa.1 {
            return Err(Error::Config(format!("slice_cols: {start}..{end} out of {sa:?}")));
        }
        let out = self.value(a).slice(s![.., start..end]).to_owned();
        let ng = self.ng(a);
        self.push(out, Op::SliceCols(a, start), ng)
    }

    /// Row-major reshape.
    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        let sa = self.shape(a);
        if sa.0 * sa.1 != rows * cols {
            return Err(Error::Config(format!("reshape: {sa:?} -> ({rows}, {cols})")));
        }
        let data: Vec<f64> = self.value(a).iter().copied().collect();
        let out = Mat::from_shape_vec((rows, cols), data)
            .map_err(|e| Error::Config(format!("reshape: {e}")))?;
        let ng = self.ng(a);
        self.push(out, Op::Reshape(a), ng)
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let out = Mat::from_elem((1, 1), self.value(a).sum());
        let ng = self.ng(a);
        self.push(out, Op::Sum(a), ng)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let n = self.value(a).len();
        if n == 0 {
            return Err(Error::Config("mean: empty operand".into()));
        }
        let out = Mat::from_elem((1, 1), self.value(a).sum() / n as f64);
        let ng = self.ng(a);
        self.push(out, Op::Mean(a), ng)
    }

    /// Per-row sums: n x m -> n x 1.
    pub fn sum_rows(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).sum_axis(Axis(1)).insert_axis(Axis(1));
        let ng = self.ng(a);
        self.push(out, Op::SumRows(a), ng)
    }

    /// Repeat a 1 x m row `n` times.
    pub fn broadcast_rows(&mut self, a: Var, n: usize) -> Result<Var> {
        let sa = self.shape(a);
        if sa.0 != 1 {
            return Err(Error::Config(format!("broadcast_rows: expected a row, got {sa:?}")));
        }
        let out = self
            .value(a)
            .broadcast((n, sa.1))
            .expect("row broadcast")
            .to_owned();
        let ng = self.ng(a);
        self.push(out, Op::BroadcastRows(a), ng)
    }

    /// Sum of squares of all entries.
    pub fn squared_norm(&mut self, a: Var) -> Result<Var> {
        let out = Mat::from_elem((1, 1), self.value(a).iter().map(|x| x * x).sum());
        let ng = self.ng(a);
        self.push(out, Op::SquaredNorm(a), ng)
    }

    /// Identity in value; blocks all gradient flow through this edge.
    pub fn stop_gradient(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).clone();
        self.push(out, Op::StopGradient, false)
    }

    /// Reverse sweep from a 1x1 `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.shape(loss) != (1, 1) {
            return Err(Error::Config(format!(
                "backward: loss must be 1x1, got {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Mat>> = vec![None; self.nodes.len()];
        let shapes = self.nodes.iter().map(|n| shape_of(&n.value)).collect();
        if !self.nodes[loss.0].needs_grad {
            return Ok(Gradients { grads, shapes });
        }
        grads[loss.0] = Some(Mat::ones((1, 1)));

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else {
                continue;
            };
            let y = &node.value;
            match &node.op {
                Op::Leaf | Op::StopGradient => {}
                Op::MatMul(a, b) => {
                    if self.ng(*a) {
                        let ga = g.dot(&self.value(*b).t());
                        accumulate(&mut grads, *a, ga);
                    }
                    if self.ng(*b) {
                        let gb = self.value(*a).t().dot(&g);
                        accumulate(&mut grads, *b, gb);
                    }
                }
                Op::AddRow(a, r) => {
                    if self.ng(*r) {
                        accumulate(&mut grads, *r, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    }
                    if self.ng(*a) {
                        accumulate(&mut grads, *a, g);
                    }
                }
                Op::Add(a, b) => {
                    if self.ng(*b) {
                        accumulate(&mut grads, *b, g.clone());
                    }
                    if self.ng(*a) {
                        accumulate(&mut grads, *a, g);
                    }
                }
                Op::Sub(a, b) => {
                    if self.ng(*b) {
                        accumulate(&mut grads, *b, -&g);
                    }
                    if self.ng(*a) {
                        accumulate(&mut grads, *a, g);
                    }
                }
                Op::Mul(a, b) => {
                    if self.ng(*a) {
                        accumulate(&mut grads, *a, &g * self.value(*b));
                    }
                    if self.ng(*b) {
                        accumulate(&mut grads, *b, &g * self.value(*a));
                    }
                }
                Op::MulCol(a, c) => {
                    if self.ng(*c) {
                        let gc = (&g * self.value(*a)).sum_axis(Axis(1)).insert_axis(Axis(1));
                        accumulate(&mut grads, *c, gc);
                    }
                    if self.ng(*a) {
                        accumulate(&mut grads, *a, &g * self.value(*c));
                    }
                }
                Op::Scale(a, c) => accumulate(&mut grads, *a, g * *c),
                Op::AddScalar(a) => accumulate(&mut grads, *a, g),
                Op::Tanh(a) => {
                    let ga = ndarray::Zip::from(&g)
                        .and(y)
                        .map_collect(|&g, &y| g * (1.0 - y * y));
                    accumulate(&mut grads, *a, ga);
                }
                Op::Silu(a) => {
                    let ga = ndarray::Zip::from(&g)
                        .and(self.value(*a))
                        .map_collect(|&g, &x| {
                            let s = sigmoid(x);
                            g * s * (1.0 + x * (1.0 - s))
                        });
                    accumulate(&mut grads, *a, ga);
                }
                Op::Sigmoid(a) => {
                    let ga = ndarray::Zip::from(&g)
                        .and(y)
                        .map_collect(|&g, &y| g * y * (1.0 - y));
                    accumulate(&mut grads, *a, ga);
                }
                Op::LogSigmoid(a) => {
                    let ga = ndarray::Zip::from(&g)
                        .and(self.value(*a))
                        .map_collect(|&g, &x| g * sigmoid(-x));
                    accumulate(&mut grads, *a, ga);
                }
                Op::Log(a) => {
                    let ga = ndarray::Zip::from(&g)
                        .and(self.value(*a))
                        .map_collect(|&g, &x| g / x);
                    accumulate(&mut grads, *a, ga);
                }
                Op::Exp(a) => accumulate(&mut grads, *a, &g * y),
                Op::Square(a) => {
                    let ga = ndarray::Zip::from(&g)
                        .and(self.value(*a))
                        .map_collect(|&g, &x| 2.0 * g * x);
                    accumulate(&mut grads, *a, ga);
                }
                Op::Concat(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let w = self.shape(p).1;
                        if self.ng(p) {
                            accumulate(&mut grads, p, g.slice(s![.., start..start + w]).to_owned());
                        }
                        start += w;
                    }
                }
                Op::SliceCols(a, start) => {
                    let mut ga = Mat::zeros(self.shape(*a));
                    let w = g.ncols();
                    ga.slice_mut(s![.., *start..*start + w]).assign(&g);
                    accumulate(&mut grads, *a, ga);
                }
                Op::Reshape(a) => {
                    let data: Vec<f64> = g.iter().copied().collect();
                    let ga = Mat::from_shape_vec(self.shape(*a), data).expect("reshape grad");
                    accumulate(&mut grads, *a, ga);
                }
                Op::Sum(a) => {
                    let ga = Mat::from_elem(self.shape(*a), g[[0, 0]]);
                    accumulate(&mut grads, *a, ga);
                }
                Op::Mean(a) => {
                    let n = self.value(*a).len() as f64;
                    let ga = Mat::from_elem(self.shape(*a), g[[0, 0]] / n);
                    accumulate(&mut grads, *a, ga);
                }
                Op::SumRows(a) => {
                    let ga = g.broadcast(self.shape(*a)).expect("sum_rows grad").to_owned();
                    accumulate(&mut grads, *a, ga);
                }
                Op::BroadcastRows(a) => {
                    accumulate(&mut grads, *a, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                }
                Op::SquaredNorm(a) => {
                    let ga = self.value(*a) * (2.0 * g[[0, 0]]);
                    accumulate(&mut grads, *a, ga);
                }
            }
        }
        Ok(Gradients { grads, shapes })
    }
}

fn accumulate(grads: &mut [Option<Mat>], v: Var, g: Mat) {
    match &mut grads[v.0] {
        Some(existing) => *existing += &g,
        slot @ None => *slot = Some(g),
    }
}

/// Logistic function, stable for large |x|.
pub fn logistic(x: f64) -> f64 {
    sigmoid(x)
}

/// Stable `log σ(x)`.
pub fn log_logistic(x: f64) -> f64 {
    log_sigmoid(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn logistic_at_zero_is_half() {
        let mut t = Tape::new();
        let x = t.scalar_const(0.0).unwrap();
        let y = t.sigmoid(x).unwrap();
        assert_eq!(t.scalar(y), 0.5);
    }

    #[test]
    fn squared_norm_of_zero_vector() {
        let mut t = Tape::new();
        let x = t.constant(Mat::zeros((1, 5))).unwrap();
        let y = t.squared_norm(x).unwrap();
        assert_eq!(t.scalar(y), 0.0);
    }

    #[test]
    fn identity_matmul_returns_input() {
        let mut t = Tape::new();
        let v = array![[1.5], [-2.0], [0.25]];
        let i = t.constant(Mat::eye(3)).unwrap();
        let x = t.constant(v.clone()).unwrap();
        let y = t.matmul(i, x).unwrap();
        assert_eq!(t.value(y), &v);
    }

    #[test]
    fn shape_mismatch_is_config_error() {
        let mut t = Tape::new();
        let a = t.constant(Mat::zeros((2, 3))).unwrap();
        let b = t.constant(Mat::zeros((2, 3))).unwrap();
        assert!(matches!(t.matmul(a, b), Err(Error::Config(_))));
        let r = t.constant(Mat::zeros((1, 2))).unwrap();
        assert!(matches!(t.add_row(a, r), Err(Error::Config(_))));
    }

    #[test]
    fn non_finite_output_names_op() {
        let mut t = Tape::new();
        let a = t.constant(array![[0.0]]).unwrap();
        match t.log(a) {
            Err(Error::Numerical { op, .. }) => assert_eq!(op, "log"),
            other => panic!("expected numerical error, got {other:?}"),
        }
    }

    #[test]
    fn stop_gradient_passes_value_blocks_grad() {
        let mut t = Tape::new();
        let x = t.leaf(array![[0.3, -1.2]]).unwrap();
        let sq = t.squared_norm(x).unwrap();
        let sg = t.stop_gradient(sq).unwrap();
        assert_eq!(t.value(sg), t.value(sq));
        let g = t.backward(sg).unwrap();
        assert_eq!(g.wrt(x), Mat::zeros((1, 2)));
    }

    #[test]
    fn stop_gradient_is_idempotent() {
        let mut t = Tape::new();
        let x = t.leaf(array![[0.7]]).unwrap();
        let e = t.exp(x).unwrap();
        let a = t.stop_gradient(e).unwrap();
        let b = t.stop_gradient(a).unwrap();
        assert_eq!(t.value(a), t.value(b));
        let lhs = t.add(b, x).unwrap();
        let g = t.backward(lhs).unwrap();
        assert_eq!(g.wrt(x), array![[1.0]]);
    }

    #[test]
    fn unreachable_nodes_get_zero_grad() {
        let mut t = Tape::new();
        let x = t.leaf(array![[1.0, 2.0]]).unwrap();
        let unused = t.leaf(array![[5.0]]).unwrap();
        let l = t.squared_norm(x).unwrap();
        let g = t.backward(l).unwrap();
        assert_eq!(g.wrt(unused), array![[0.0]]);
        assert_eq!(g.wrt(x), array![[2.0, 4.0]]);
    }

    #[test]
    fn log_sigmoid_is_stable() {
        assert!((log_logistic(-800.0) + 800.0).abs() < 1e-12);
        assert!(log_logistic(800.0).abs() < 1e-300);
    }
}
