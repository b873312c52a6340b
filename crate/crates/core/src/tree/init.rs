use rand::Rng;

use super::{FeatureTree, Node, Primitive};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitMethod {
    /// Every branch reaches the target depth.
    Full,
    /// Branches may stop early at a terminal.
    Grow,
}

/// Ramped half-and-half initialization: each call draws a target depth
/// uniformly from the range and alternates between the full and grow methods.
#[derive(Clone, Debug)]
pub struct TreeInitializer {
    pub var_count: usize,
    pub min_depth: usize,
    pub max_depth: usize,
    next: InitMethod,
}

impl TreeInitializer {
    pub fn new(var_count: usize, min_depth: usize, max_depth: usize) -> Self {
        assert!(var_count >= 1, "need at least one input variable");
        assert!(min_depth <= max_depth);
        Self {
            var_count,
            min_depth,
            max_depth,
            next: InitMethod::Full,
        }
    }

    pub fn next_method(&self) -> InitMethod {
        self.next
    }

    pub fn generate<R: Rng + ?Sized>(&mut self, rng: &mut R) -> FeatureTree {
        let method = self.next;
        self.next = match method {
            InitMethod::Full => InitMethod::Grow,
            InitMethod::Grow => InitMethod::Full,
        };
        ramped_half_and_half(rng, self.var_count, (self.min_depth, self.max_depth), method)
    }
}

/// One ramped half-and-half draw with the given method.
pub fn ramped_half_and_half<R: Rng + ?Sized>(
    rng: &mut R,
    var_count: usize,
    depth_range: (usize, usize),
    method: InitMethod,
) -> FeatureTree {
    let depth = rng.random_range(depth_range.0..=depth_range.1);
    let mut nodes = Vec::new();
    build(rng, var_count, depth, 0, method, &mut nodes);
    FeatureTree { nodes }
}

/// A grow-method tree of depth at most `max_depth`.
pub fn grow<R: Rng + ?Sized>(rng: &mut R, var_count: usize, max_depth: usize) -> FeatureTree {
    let mut nodes = Vec::new();
    build(rng, var_count, max_depth, 0, InitMethod::Grow, &mut nodes);
    FeatureTree { nodes }
}

fn build<R: Rng + ?Sized>(
    rng: &mut R,
    var_count: usize,
    target: usize,
    depth: usize,
    method: InitMethod,
    out: &mut Vec<Node>,
) {
    let n_prims = Primitive::ALL.len();
    let terminal = depth == target
        || (method == InitMethod::Grow
            && rng.random_bool(var_count as f64 / (var_count + n_prims) as f64));
    if terminal {
        out.push(Node::Var(rng.random_range(0..var_count) as u32));
    } else {
        let p = Primitive::ALL[rng.random_range(0..n_prims)];
        out.push(Node::Op(p));
        for _ in 0..p.arity() {
            build(rng, var_count, target, depth + 1, method, out);
        }
    }
}
