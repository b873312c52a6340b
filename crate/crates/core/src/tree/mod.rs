//! Symbolic feature trees: the primitive set, evaluation, initialization,
//! variation operators and the canonical text form.
//!
//! A tree is a prefix-ordered node sequence. The text form is an
//! s-expression, `(AQ (add x0 x1) x2)`; see [`FeatureTree::from_str`] for the
//! grammar.

mod individual;
mod init;
mod primitive;
mod variation;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::data::column;
use crate::{rng, Error, Result};

pub use individual::{Fitness, Individual};
pub use init::{grow, ramped_half_and_half, InitMethod, TreeInitializer};
pub use primitive::{clamp_output, primitive_semantics, Primitive, OUTPUT_BOUND};
pub use variation::{add_tree, crossover, delete_tree, mutate, MAX_ATTEMPTS};

pub const MAX_DEPTH: usize = 10;
pub const MAX_TREES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Op(Primitive),
    /// Input column index.
    Var(u32),
}

impl Node {
    pub fn arity(self) -> usize {
        match self {
            Node::Op(p) => p.arity(),
            Node::Var(_) => 0,
        }
    }

    fn code(self) -> u64 {
        match self {
            Node::Op(p) => 1 + p as u64,
            Node::Var(i) => (1 << 32) | i as u64,
        }
    }
}

/// A well-formed prefix expression.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureTree {
    nodes: Vec<Node>,
}

/// Structural hash of a tree. Equal trees have equal keys.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TreeKey(pub u128);

impl FeatureTree {
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self> {
        let mut need = 1usize;
        for (i, n) in nodes.iter().enumerate() {
            if need == 0 {
                return Err(Error::Parse {
                    position: i,
                    message: "trailing nodes after a complete expression".into(),
                });
            }
            need = need - 1 + n.arity();
        }
        if need != 0 || nodes.is_empty() {
            return Err(Error::Parse {
                position: nodes.len(),
                message: "incomplete expression".into(),
            });
        }
        Ok(Self { nodes })
    }

    pub fn terminal(index: usize) -> Self {
        Self {
            nodes: vec![Node::Var(index as u32)],
        }
    }

    /// Builds `op(children...)`.
    pub fn apply(op: Primitive, children: &[FeatureTree]) -> Result<Self> {
        if children.len() != op.arity() {
            return Err(Error::InvalidArgument(format!(
                "`{op}` takes {} children, got {}",
                op.arity(),
                children.len()
            )));
        }
        let mut nodes = vec![Node::Op(op)];
        for c in children {
            nodes.extend_from_slice(&c.nodes);
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Exclusive end of the subtree rooted at `start`.
    pub fn subtree_end(&self, start: usize) -> usize {
        let mut need = 1usize;
        let mut i = start;
        while need > 0 {
            need = need - 1 + self.nodes[i].arity();
            i += 1;
        }
        i
    }

    pub fn subtree(&self, start: usize) -> FeatureTree {
        FeatureTree {
            nodes: self.nodes[start..self.subtree_end(start)].to_vec(),
        }
    }

    /// Returns a copy with the subtree at `start` replaced by `with`.
    pub fn replace_subtree(&self, start: usize, with: &FeatureTree) -> FeatureTree {
        let end = self.subtree_end(start);
        let mut nodes = Vec::with_capacity(self.nodes.len() - (end - start) + with.len());
        nodes.extend_from_slice(&self.nodes[..start]);
        nodes.extend_from_slice(&with.nodes);
        nodes.extend_from_slice(&self.nodes[end..]);
        FeatureTree { nodes }
    }

    /// Depth of the tree; a lone terminal has depth 0.
    pub fn depth(&self) -> usize {
        self.node_depths().into_iter().max().unwrap_or(0)
    }

    /// Depth of every node from the root, in prefix order.
    pub fn node_depths(&self) -> Vec<usize> {
        let mut depths = Vec::with_capacity(self.nodes.len());
        // Stack of (depth, children still to visit).
        let mut stack: Vec<(usize, usize)> = Vec::new();
        for n in &self.nodes {
            let d = stack.last().map_or(0, |&(d, _)| d + 1);
            depths.push(d);
            if let Some(top) = stack.last_mut() {
                top.1 -= 1;
            }
            if n.arity() > 0 {
                stack.push((d, n.arity()));
            }
            while matches!(stack.last(), Some(&(_, 0))) {
                stack.pop();
            }
        }
        depths
    }

    pub fn max_var(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Var(i) => Some(*i as usize),
                Node::Op(_) => None,
            })
            .max()
    }

    pub fn is_internal(&self, i: usize) -> bool {
        matches!(self.nodes[i], Node::Op(_))
    }

    pub fn canonical_key(&self) -> TreeKey {
        let (mut lo, mut hi) = (0x51ED_270B_u64, 0xC0FF_EE11_u64);
        for n in &self.nodes {
            let c = n.code();
            lo = rng::mix(lo ^ c);
            hi = rng::mix(hi.rotate_left(17) ^ c.wrapping_mul(0x2545_F491_4F6C_DD1D));
        }
        lo = rng::mix(lo ^ self.nodes.len() as u64);
        TreeKey(((hi as u128) << 64) | lo as u128)
    }

    /// Semantics `φ(X)`: one output per row of `x`.
    pub fn evaluate(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        self.evaluate_with(x, |_, _| {})
    }

    /// Bottom-up evaluation that lets `visit` rewrite the output of every node
    /// (terminals included) before its parent consumes it. `visit` receives the
    /// node's prefix index.
    pub fn evaluate_with<F>(&self, x: &DMatrix<f64>, mut visit: F) -> Result<Vec<f64>>
    where
        F: FnMut(usize, &mut [f64]),
    {
        if let Some(m) = self.max_var() {
            if m >= x.ncols() {
                return Err(Error::VariableOutOfRange {
                    index: m,
                    n_vars: x.ncols(),
                });
            }
        }
        let mut stack: Vec<Vec<f64>> = Vec::with_capacity(self.depth() + 2);
        for (i, node) in self.nodes.iter().enumerate().rev() {
            let mut out = match *node {
                Node::Var(v) => column(x, v as usize).to_vec(),
                Node::Op(p) => {
                    let mut first = stack.pop().expect("well-formed tree");
                    if p.arity() == 2 {
                        let second = stack.pop().expect("well-formed tree");
                        p.apply_in_place(&mut first, &second);
                    } else {
                        p.apply_in_place(&mut first, &[]);
                    }
                    first
                }
            };
            visit(i, &mut out);
            stack.push(out);
        }
        Ok(stack.pop().expect("well-formed tree"))
    }

    /// Evaluates on a single input row.
    pub fn evaluate_row<F>(&self, row: &[f64], mut visit: F) -> f64
    where
        F: FnMut(usize, f64) -> f64,
    {
        let mut stack: Vec<f64> = Vec::with_capacity(self.depth() + 2);
        for (i, node) in self.nodes.iter().enumerate().rev() {
            let out = match *node {
                Node::Var(v) => row[v as usize],
                Node::Op(p) => {
                    let a = stack.pop().expect("well-formed tree");
                    let b = if p.arity() == 2 {
                        stack.pop().expect("well-formed tree")
                    } else {
                        0.0
                    };
                    p.apply_scalar(a, b)
                }
            };
            stack.push(visit(i, out));
        }
        stack.pop().expect("well-formed tree")
    }
}

/// Semantics of every tree, one column per tree.
pub fn construct_features(trees: &[FeatureTree], x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(x.nrows(), trees.len());
    for (j, t) in trees.iter().enumerate() {
        let v = t.evaluate(x)?;
        out.column_mut(j).copy_from_slice(&v);
    }
    Ok(out)
}

impl fmt::Display for FeatureTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(nodes: &[Node], i: usize, f: &mut fmt::Formatter<'_>) -> Result<usize, fmt::Error> {
            match nodes[i] {
                Node::Var(v) => {
                    write!(f, "x{v}")?;
                    Ok(i + 1)
                }
                Node::Op(p) => {
                    write!(f, "({p}")?;
                    let mut next = i + 1;
                    for _ in 0..p.arity() {
                        f.write_str(" ")?;
                        next = go(nodes, next, f)?;
                    }
                    f.write_str(")")?;
                    Ok(next)
                }
            }
        }
        go(&self.nodes, 0, f).map(|_| ())
    }
}

impl FromStr for FeatureTree {
    type Err = Error;

    /// Grammar:
    ///
    /// ```text
    /// expr     := terminal | "(" name expr+ ")"
    /// terminal := "x" digits
    /// name     := one of add sub mul AQ square sqrt abs log max min sin cos neg sigmoid
    /// ```
    ///
    /// Tokens are separated by whitespace or parentheses; names match
    /// case-insensitively and the operand count must equal the arity.
    fn from_str(s: &str) -> Result<Self> {
        let spaced = s.replace('(', " ( ").replace(')', " ) ");
        let tokens: Vec<&str> = spaced.split_whitespace().collect();
        let mut nodes = Vec::new();
        let mut pos = 0;
        parse_expr(&tokens, &mut pos, &mut nodes)?;
        if pos != tokens.len() {
            return Err(Error::Parse {
                position: pos,
                message: format!("unexpected `{}` after expression", tokens[pos]),
            });
        }
        FeatureTree::from_nodes(nodes)
    }
}

fn parse_expr(tokens: &[&str], pos: &mut usize, nodes: &mut Vec<Node>) -> Result<()> {
    let err = |position: usize, message: String| Error::Parse { position, message };
    let tok = *tokens
        .get(*pos)
        .ok_or_else(|| err(*pos, "unexpected end of input".into()))?;
    if tok == "(" {
        *pos += 1;
        let name = *tokens
            .get(*pos)
            .ok_or_else(|| err(*pos, "expected a primitive name".into()))?;
        let p = Primitive::from_name(name)?;
        *pos += 1;
        nodes.push(Node::Op(p));
        for _ in 0..p.arity() {
            parse_expr(tokens, pos, nodes)?;
        }
        match tokens.get(*pos) {
            Some(&")") => {
                *pos += 1;
                Ok(())
            }
            _ => Err(err(*pos, format!("expected `)` closing `{name}` (arity {})", p.arity()))),
        }
    } else if let Some(idx) = tok.strip_prefix('x').or_else(|| tok.strip_prefix('X')) {
        let v: u32 = idx
            .parse()
            .map_err(|_| err(*pos, format!("bad terminal `{tok}`")))?;
        nodes.push(Node::Var(v));
        *pos += 1;
        Ok(())
    } else {
        Err(err(*pos, format!("unexpected token `{tok}`")))
    }
}

impl Serialize for FeatureTree {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FeatureTree {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
