//! Expression trees for scalar functions and vector fields on ℝⁿ.
//!
//! Two families of variables exist: base coordinates `x1..xn` and, for
//! densities written in fibre-chart coordinates, `xi1..xik`. Field
//! expressions only ever see base coordinates.

mod field;
mod parse;

use std::fmt;

pub use field::{lie_bracket, parse_field, VectorFieldExpr};

use crate::error::{Error, Result};

/// A variable reference; indices are zero-based (`x1` is `Var::X(0)`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    X(usize),
    Xi(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Node {
    Const(f64),
    Var(Var),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    /// Power with a constant exponent.
    Pow(Box<Node>, f64),
    Exp(Box<Node>),
    Sin(Box<Node>),
    Cos(Box<Node>),
}

/// A scalar expression in `x1..xn` (and optionally `xi1..xik`).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarExpr {
    node: Node,
}

impl ScalarExpr {
    /// Parses an expression over base variables only.
    pub fn parse(text: &str, dim: usize) -> Result<Self> {
        Self::parse_with(text, dim, 0)
    }

    /// Parses an expression over `x1..x{dim}` and `xi1..xi{fibre_dim}`.
    pub fn parse_with(text: &str, dim: usize, fibre_dim: usize) -> Result<Self> {
        let node = parse::parse_scalar(text)?;
        let e = ScalarExpr { node };
        e.check_vars(dim, fibre_dim)?;
        Ok(e)
    }

    pub fn constant(c: f64) -> Self {
        ScalarExpr { node: Node::Const(c) }
    }

    pub fn var(v: Var) -> Self {
        ScalarExpr { node: Node::Var(v) }
    }

    pub(crate) fn from_node(node: Node) -> Self {
        ScalarExpr { node }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.node, Node::Const(c) if c == 0.0)
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self.node {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    /// Largest referenced `(x, xi)` indices, one-based (0 when unused).
    pub fn var_extent(&self) -> (usize, usize) {
        let mut ext = (0, 0);
        visit_vars(&self.node, &mut |v| match v {
            Var::X(i) => ext.0 = ext.0.max(i + 1),
            Var::Xi(i) => ext.1 = ext.1.max(i + 1),
        });
        ext
    }

    pub fn check_vars(&self, dim: usize, fibre_dim: usize) -> Result<()> {
        let (nx, nxi) = self.var_extent();
        if nx > dim {
            return Err(Error::Parse {
                pos: 0,
                msg: format!("variable x{nx} exceeds dimension {dim}"),
            });
        }
        if nxi > fibre_dim {
            return Err(Error::Parse {
                pos: 0,
                msg: format!("variable xi{nxi} exceeds fibre dimension {fibre_dim}"),
            });
        }
        Ok(())
    }

    /// Evaluates at base point `x` with fibre coordinates `xi`.
    ///
    /// Panics if a referenced variable is out of range; parsing validates that.
    #[inline]
    pub fn eval(&self, x: &[f64], xi: &[f64]) -> f64 {
        eval_node(&self.node, x, xi)
    }

    /// Like [`eval`](Self::eval) but reports non-finite results.
    pub fn try_eval(&self, x: &[f64], xi: &[f64]) -> Result<f64> {
        let v = self.eval(x, xi);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Eval(format!("`{self}` is not finite at x={x:?} xi={xi:?}")))
        }
    }

    /// Symbolic partial derivative.
    pub fn diff(&self, v: Var) -> ScalarExpr {
        ScalarExpr {
            node: diff_node(&self.node, v),
        }
    }

    pub fn add(&self, o: &ScalarExpr) -> ScalarExpr {
        ScalarExpr { node: add(self.node.clone(), o.node.clone()) }
    }

    pub fn sub(&self, o: &ScalarExpr) -> ScalarExpr {
        ScalarExpr { node: sub(self.node.clone(), o.node.clone()) }
    }

    pub fn mul(&self, o: &ScalarExpr) -> ScalarExpr {
        ScalarExpr { node: mul(self.node.clone(), o.node.clone()) }
    }

    pub fn neg(&self) -> ScalarExpr {
        ScalarExpr { node: neg(self.node.clone()) }
    }
}

fn visit_vars(n: &Node, f: &mut impl FnMut(Var)) {
    match n {
        Node::Const(_) => {}
        Node::Var(v) => f(*v),
        Node::Neg(a) | Node::Pow(a, _) | Node::Exp(a) | Node::Sin(a) | Node::Cos(a) => {
            visit_vars(a, f)
        }
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
            visit_vars(a, f);
            visit_vars(b, f);
        }
    }
}

fn eval_node(n: &Node, x: &[f64], xi: &[f64]) -> f64 {
    match n {
        Node::Const(c) => *c,
        Node::Var(Var::X(i)) => x[*i],
        Node::Var(Var::Xi(i)) => xi[*i],
        Node::Neg(a) => -eval_node(a, x, xi),
        Node::Add(a, b) => eval_node(a, x, xi) + eval_node(b, x, xi),
        Node::Sub(a, b) => eval_node(a, x, xi) - eval_node(b, x, xi),
        Node::Mul(a, b) => eval_node(a, x, xi) * eval_node(b, x, xi),
        Node::Div(a, b) => eval_node(a, x, xi) / eval_node(b, x, xi),
        Node::Pow(a, p) => {
            let base = eval_node(a, x, xi);
            if p.fract() == 0.0 && p.abs() < 64.0 {
                base.powi(*p as i32)
            } else {
                base.powf(*p)
            }
        }
        Node::Exp(a) => eval_node(a, x, xi).exp(),
        Node::Sin(a) => eval_node(a, x, xi).sin(),
        Node::Cos(a) => eval_node(a, x, xi).cos(),
    }
}

// Constant-folding constructors keep derivative trees small.

fn c(v: f64) -> Node {
    Node::Const(v)
}

fn neg(a: Node) -> Node {
    match a {
        Node::Const(v) => c(-v),
        Node::Neg(inner) => *inner,
        a => Node::Neg(Box::new(a)),
    }
}

fn add(a: Node, b: Node) -> Node {
    match (a, b) {
        (Node::Const(x), Node::Const(y)) => c(x + y),
        (Node::Const(z), b) if z == 0.0 => b,
        (a, Node::Const(z)) if z == 0.0 => a,
        (a, b) => Node::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Node, b: Node) -> Node {
    match (a, b) {
        (Node::Const(x), Node::Const(y)) => c(x - y),
        (a, Node::Const(z)) if z == 0.0 => a,
        (Node::Const(z), b) if z == 0.0 => neg(b),
        (a, b) => Node::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Node, b: Node) -> Node {
    match (a, b) {
        (Node::Const(x), Node::Const(y)) => c(x * y),
        (Node::Const(z), _) | (_, Node::Const(z)) if z == 0.0 => c(0.0),
        (Node::Const(o), b) if o == 1.0 => b,
        (a, Node::Const(o)) if o == 1.0 => a,
        (a, b) => Node::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Node, b: Node) -> Node {
    match (a, b) {
        (Node::Const(z), _) if z == 0.0 => c(0.0),
        (a, Node::Const(o)) if o == 1.0 => a,
        (a, b) => Node::Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Node, p: f64) -> Node {
    if p == 0.0 {
        c(1.0)
    } else if p == 1.0 {
        a
    } else if let Node::Const(v) = a {
        c(v.powf(p))
    } else {
        Node::Pow(Box::new(a), p)
    }
}

fn diff_node(n: &Node, v: Var) -> Node {
    match n {
        Node::Const(_) => c(0.0),
        Node::Var(w) => c(if *w == v { 1.0 } else { 0.0 }),
        Node::Neg(a) => neg(diff_node(a, v)),
        Node::Add(a, b) => add(diff_node(a, v), diff_node(b, v)),
        Node::Sub(a, b) => sub(diff_node(a, v), diff_node(b, v)),
        Node::Mul(a, b) => add(
            mul(diff_node(a, v), (**b).clone()),
            mul((**a).clone(), diff_node(b, v)),
        ),
        Node::Div(a, b) => {
            // (a'b - ab') / b^2
            let num = sub(
                mul(diff_node(a, v), (**b).clone()),
                mul((**a).clone(), diff_node(b, v)),
            );
            div(num, pow((**b).clone(), 2.0))
        }
        Node::Pow(a, p) => mul(mul(c(*p), pow((**a).clone(), p - 1.0)), diff_node(a, v)),
        Node::Exp(a) => mul(Node::Exp(a.clone()), diff_node(a, v)),
        Node::Sin(a) => mul(Node::Cos(a.clone()), diff_node(a, v)),
        Node::Cos(a) => neg(mul(Node::Sin(a.clone()), diff_node(a, v))),
    }
}

fn fmt_const(v: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    // `{:?}` is the shortest representation that parses back to the same bits.
    if v < 0.0 || (v == 0.0 && v.is_sign_negative()) {
        write!(f, "(-{:?})", -v)
    } else {
        write!(f, "{v:?}")
    }
}

fn fmt_node(n: &Node, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match n {
        Node::Const(v) => fmt_const(*v, f),
        Node::Var(Var::X(i)) => write!(f, "x{}", i + 1),
        Node::Var(Var::Xi(i)) => write!(f, "xi{}", i + 1),
        Node::Neg(a) => {
            write!(f, "(-")?;
            fmt_node(a, f)?;
            write!(f, ")")
        }
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
            let op = match n {
                Node::Add(..) => " + ",
                Node::Sub(..) => " - ",
                Node::Mul(..) => " * ",
                _ => " / ",
            };
            write!(f, "(")?;
            fmt_node(a, f)?;
            write!(f, "{op}")?;
            fmt_node(b, f)?;
            write!(f, ")")
        }
        Node::Pow(a, p) => {
            write!(f, "(")?;
            fmt_node(a, f)?;
            write!(f, "^")?;
            fmt_const(*p, f)?;
            write!(f, ")")
        }
        Node::Exp(a) | Node::Sin(a) | Node::Cos(a) => {
            let name = match n {
                Node::Exp(_) => "exp",
                Node::Sin(_) => "sin",
                _ => "cos",
            };
            write!(f, "{name}(")?;
            fmt_node(a, f)?;
            write!(f, ")")
        }
    }
}

impl fmt::Display for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_node(&self.node, f)
    }
}
