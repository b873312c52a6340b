use rand::Rng;

use super::{grow, FeatureTree, Individual, TreeInitializer, MAX_DEPTH, MAX_TREES};

/// Attempts per operator before giving up and returning the parents.
pub const MAX_ATTEMPTS: usize = 3;

/// Depth of the freshly grown subtree used by mutation.
const MUTATION_DEPTH: usize = 3;

/// Subtree crossover between one uniformly chosen tree of each parent.
/// Offspring deeper than [`MAX_DEPTH`] are rejected; after
/// [`MAX_ATTEMPTS`] rejections the parents are returned unchanged.
pub fn crossover<R: Rng + ?Sized>(a: &Individual, b: &Individual, rng: &mut R) -> (Individual, Individual) {
    for _ in 0..MAX_ATTEMPTS {
        let ia = rng.random_range(0..a.trees().len());
        let ib = rng.random_range(0..b.trees().len());
        let (ta, tb) = (&a.trees()[ia], &b.trees()[ib]);
        let pa = rng.random_range(0..ta.len());
        let pb = rng.random_range(0..tb.len());
        let na = ta.replace_subtree(pa, &tb.subtree(pb));
        let nb = tb.replace_subtree(pb, &ta.subtree(pa));
        if na.depth() > MAX_DEPTH || nb.depth() > MAX_DEPTH {
            continue;
        }
        let mut ca = a.trees().to_vec();
        ca[ia] = na;
        let mut cb = b.trees().to_vec();
        cb[ib] = nb;
        return (Individual::new(ca), Individual::new(cb));
    }
    (a.clone(), b.clone())
}

/// Replaces a uniformly chosen subtree of one tree by a grown subtree.
pub fn mutate<R: Rng + ?Sized>(a: &Individual, var_count: usize, rng: &mut R) -> Individual {
    for _ in 0..MAX_ATTEMPTS {
        let i = rng.random_range(0..a.trees().len());
        let t = &a.trees()[i];
        let p = rng.random_range(0..t.len());
        let depth = rng.random_range(0..=MUTATION_DEPTH);
        let fresh = grow(rng, var_count, depth);
        let nt = t.replace_subtree(p, &fresh);
        if nt.depth() > MAX_DEPTH {
            continue;
        }
        let mut trees = a.trees().to_vec();
        trees[i] = nt;
        return Individual::new(trees);
    }
    a.clone()
}

/// Appends a new random tree; no-op at [`MAX_TREES`].
pub fn add_tree<R: Rng + ?Sized>(a: &Individual, init: &mut TreeInitializer, rng: &mut R) -> Individual {
    if a.trees().len() >= MAX_TREES {
        return a.clone();
    }
    let mut trees = a.trees().to_vec();
    trees.push(init.generate(rng));
    Individual::new(trees)
}

/// Removes a uniformly chosen tree; no-op with a single tree.
pub fn delete_tree<R: Rng + ?Sized>(a: &Individual, rng: &mut R) -> Individual {
    if a.trees().len() <= 1 {
        return a.clone();
    }
    let mut trees: Vec<FeatureTree> = a.trees().to_vec();
    trees.remove(rng.random_range(0..trees.len()));
    Individual::new(trees)
}
