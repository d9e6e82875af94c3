use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cell::RefCell;
use core::fmt;
use core::ops::{Add, Div, Mul, Neg, Sub};

use super::params::ParamVector;
use crate::error::{Error, Result};
use crate::math;

const DIV_EPS: f64 = 1e-12;

#[derive(Default)]
struct Nodes {
    values: Vec<f64>,
    /// `edge_start[i]..edge_start[i + 1]` indexes the parents of node `i`.
    edge_start: Vec<u32>,
    parents: Vec<u32>,
    partials: Vec<f64>,
}

/// Append-only record of scalar operations.
///
/// One tape per thread; `Var`s borrow the tape and cannot outlive it.
pub struct Tape {
    nodes: RefCell<Nodes>,
    fault: RefCell<Option<String>>,
    /// Adjoint buffer reused across reverse sweeps.
    adj: RefCell<Vec<f64>>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape").field("len", &self.len()).finish()
    }
}

/// A scalar recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: u32,
    val: f64,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var(#{}: {})", self.idx, self.val)
    }
}

/// The leaf variables standing for a [`ParamVector`] on one tape.
#[derive(Debug, Clone)]
pub struct ParamVars<'t> {
    pub vars: Vec<Var<'t>>,
    start: u32,
    learnable: Vec<bool>,
}

impl<'t> ParamVars<'t> {
    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }
}

/// Result of a reverse sweep.
#[derive(Debug, Clone)]
pub struct Gradient {
    /// d(output)/d(param), zero for non-learnable segments.
    pub values: Vec<f64>,
    /// Number of nodes the sweep propagated a nonzero adjoint through.
    pub touched: usize,
}

impl Tape {
    pub fn new() -> Self {
        let nodes = Nodes { edge_start: vec![0], ..Default::default() };
        Tape { nodes: RefCell::new(nodes), fault: RefCell::new(None), adj: RefCell::new(Vec::new()) }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of recorded parent edges.
    pub fn edges(&self) -> usize {
        self.nodes.borrow().parents.len()
    }

    /// First recorded domain violation or non-finite value, if any.
    pub fn fault(&self) -> Option<String> {
        self.fault.borrow().clone()
    }

    /// Drops every node and clears the fault flag.
    pub fn reset(&self) {
        self.rewind(0);
        *self.fault.borrow_mut() = None;
    }

    /// Drops all nodes recorded after `mark` (a value of [`Tape::len`]).
    /// Vars created after the mark become invalid.
    pub fn rewind(&self, mark: usize) {
        let mut n = self.nodes.borrow_mut();
        if mark >= n.values.len() {
            return;
        }
        let e = n.edge_start[mark] as usize;
        n.values.truncate(mark);
        n.edge_start.truncate(mark + 1);
        n.parents.truncate(e);
        n.partials.truncate(e);
        *self.fault.borrow_mut() = None;
    }

    fn flag(&self, msg: impl FnOnce() -> String) {
        let mut f = self.fault.borrow_mut();
        if f.is_none() {
            *f = Some(msg());
        }
    }

    #[inline]
    fn push(&self, val: f64, edges: &[(u32, f64)]) -> Var<'_> {
        if !val.is_finite() {
            self.flag(|| format!("non-finite value {val} produced"));
        }
        let mut n = self.nodes.borrow_mut();
        let idx = n.values.len() as u32;
        n.values.push(val);
        for &(p, d) in edges {
            n.parents.push(p);
            n.partials.push(d);
        }
        let end = n.parents.len() as u32;
        n.edge_start.push(end);
        Var { tape: self, idx, val }
    }

    /// A leaf node (independent variable or constant).
    pub fn var(&self, val: f64) -> Var<'_> {
        self.push(val, &[])
    }

    pub fn constant(&self, val: f64) -> Var<'_> {
        self.push(val, &[])
    }

    /// Registers every parameter value as a leaf.
    pub fn params(&self, p: &ParamVector) -> ParamVars<'_> {
        let start = self.len() as u32;
        let vars = p.values.iter().map(|&v| self.var(v)).collect();
        ParamVars { vars, start, learnable: p.learnable_mask() }
    }

    fn own(&self, v: &Var<'_>) -> bool {
        core::ptr::eq(self, v.tape) && (v.idx as usize) < self.len()
    }

    /// `a / b`, failing when `|b| < 1e-12`.
    pub fn try_div<'t>(&'t self, a: Var<'t>, b: Var<'t>) -> Result<Var<'t>> {
        if b.val.abs() < DIV_EPS {
            return Err(Error::Autodiff(format!("division by {:e}", b.val)));
        }
        Ok(a / b)
    }

    /// `sqrt(a)`, failing for negative input.
    pub fn try_sqrt<'t>(&'t self, a: Var<'t>) -> Result<Var<'t>> {
        if a.val < 0.0 {
            return Err(Error::Autodiff(format!("sqrt of negative {:e}", a.val)));
        }
        Ok(super::Real::sqrt(a))
    }

    /// Reverse sweep from `output`; returns d(output)/d(params).
    pub fn backward(&self, output: Var<'_>, params: &ParamVars<'_>) -> Result<Gradient> {
        if !self.own(&output) {
            return Err(Error::Autodiff("output is not on this tape".into()));
        }
        if let Some(f) = self.fault() {
            return Err(Error::Autodiff(f));
        }
        let n = self.nodes.borrow();
        let top = output.idx as usize;
        let mut adj = self.adj.borrow_mut();
        adj.clear();
        adj.resize(top + 1, 0.0);
        adj[top] = 1.0;
        let mut touched = 0usize;
        for i in (0..=top).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            touched += 1;
            let (s, e) = (n.edge_start[i] as usize, n.edge_start[i + 1] as usize);
            for j in s..e {
                adj[n.parents[j] as usize] += a * n.partials[j];
            }
        }
        let start = params.start as usize;
        let values = (0..params.len())
            .map(|i| {
                let k = start + i;
                if params.learnable[i] && k <= top {
                    adj[k]
                } else {
                    0.0
                }
            })
            .collect();
        Ok(Gradient { values, touched })
    }
}

impl<'t> Var<'t> {
    #[inline]
    pub fn value(&self) -> f64 {
        self.val
    }

    pub fn index(&self) -> usize {
        self.idx as usize
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    #[inline]
    fn unary(self, val: f64, d: f64) -> Var<'t> {
        self.tape.push(val, &[(self.idx, d)])
    }

    #[inline]
    fn binary(self, o: Var<'t>, val: f64, da: f64, db: f64) -> Var<'t> {
        debug_assert!(core::ptr::eq(self.tape, o.tape), "vars from different tapes");
        self.tape.push(val, &[(self.idx, da), (o.idx, db)])
    }

    pub(crate) fn sin_(self) -> Self {
        self.unary(math::sin(self.val), math::cos(self.val))
    }

    pub(crate) fn cos_(self) -> Self {
        self.unary(math::cos(self.val), -math::sin(self.val))
    }

    pub(crate) fn exp_(self) -> Self {
        let e = math::exp(self.val);
        self.unary(e, e)
    }

    pub(crate) fn sqrt_(self) -> Self {
        if self.val < 0.0 {
            self.tape.flag(|| format!("sqrt of negative {:e}", self.val));
            return self.unary(f64::NAN, 0.0);
        }
        let r = math::sqrt(self.val);
        let d = if r > 0.0 { 0.5 / r } else { 0.0 };
        self.unary(r, d)
    }

    pub(crate) fn relu_(self) -> Self {
        if self.val > 0.0 {
            self.unary(self.val, 1.0)
        } else {
            self.unary(0.0, 0.0)
        }
    }

    pub(crate) fn atan2_(self, x: Self) -> Self {
        let (y, xv) = (self.val, x.val);
        let r2 = y * y + xv * xv;
        if r2 < DIV_EPS * DIV_EPS {
            self.tape.flag(|| "atan2 at the origin".into());
            return self.binary(x, 0.0, 0.0, 0.0);
        }
        self.binary(x, math::atan2(y, xv), xv / r2, -y / r2)
    }

    pub(crate) fn detach_(self) -> Self {
        self.tape.push(self.val, &[])
    }

    pub(crate) fn dot_(w: &[Self], x: &[Self], bias: Self) -> Self {
        debug_assert_eq!(w.len(), x.len());
        let tape = bias.tape;
        let mut val = bias.val;
        let mut n = tape.nodes.borrow_mut();
        n.parents.push(bias.idx);
        n.partials.push(1.0);
        for (a, b) in w.iter().zip(x) {
            val += a.val * b.val;
            n.parents.push(a.idx);
            n.partials.push(b.val);
            n.parents.push(b.idx);
            n.partials.push(a.val);
        }
        Self::close(tape, n, val)
    }

    pub(crate) fn weighted_sum_(xs: &[Self], c: &[f64]) -> Self {
        debug_assert_eq!(xs.len(), c.len());
        let tape = xs[0].tape;
        let mut val = 0.0;
        let mut n = tape.nodes.borrow_mut();
        for (x, &k) in xs.iter().zip(c) {
            val += k * x.val;
            n.parents.push(x.idx);
            n.partials.push(k);
        }
        Self::close(tape, n, val)
    }

    pub(crate) fn mean_square_(xs: &[Self]) -> Self {
        let tape = xs[0].tape;
        let inv = 1.0 / xs.len() as f64;
        let mut val = 0.0;
        let mut n = tape.nodes.borrow_mut();
        for x in xs {
            val += x.val * x.val;
            n.parents.push(x.idx);
            n.partials.push(2.0 * x.val * inv);
        }
        Self::close(tape, n, val * inv)
    }

    fn close(tape: &'t Tape, mut n: core::cell::RefMut<'_, Nodes>, val: f64) -> Self {
        let idx = n.values.len() as u32;
        n.values.push(val);
        let end = n.parents.len() as u32;
        n.edge_start.push(end);
        drop(n);
        if !val.is_finite() {
            tape.flag(|| format!("non-finite value {val} produced"));
        }
        Var { tape, idx, val }
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn add(self, o: Self) -> Self {
        self.binary(o, self.val + o.val, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn sub(self, o: Self) -> Self {
        self.binary(o, self.val - o.val, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn mul(self, o: Self) -> Self {
        self.binary(o, self.val * o.val, o.val, self.val)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn div(self, o: Self) -> Self {
        if o.val.abs() < DIV_EPS {
            self.tape.flag(|| format!("division by {:e}", o.val));
            return self.binary(o, f64::NAN, 0.0, 0.0);
        }
        let q = self.val / o.val;
        self.binary(o, q, 1.0 / o.val, -q / o.val)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn neg(self) -> Self {
        self.unary(-self.val, -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn add(self, c: f64) -> Self {
        self.unary(self.val + c, 1.0)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn sub(self, c: f64) -> Self {
        self.unary(self.val - c, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn mul(self, c: f64) -> Self {
        self.unary(self.val * c, c)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn div(self, c: f64) -> Self {
        if c.abs() < DIV_EPS {
            self.tape.flag(|| format!("division by {c:e}"));
            return self.unary(f64::NAN, 0.0);
        }
        self.unary(self.val / c, 1.0 / c)
    }
}
