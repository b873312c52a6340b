use rand::seq::SliceRandom;
use rand::Rng;

use crate::stats;

/// ε-lexicase selection over per-case errors (`errors[individual][case]`).
///
/// Cases are visited in a random order. At each case the survivors whose error
/// is within the median absolute deviation of the best survivor's error are
/// kept. Selection stops when one survivor remains or the cases run out; the
/// winner is then drawn uniformly from the survivors.
pub fn lexicase_select<R: Rng + ?Sized>(errors: &[&[f64]], rng: &mut R) -> usize {
    assert!(!errors.is_empty(), "lexicase over an empty population");
    let cases = errors[0].len();
    let mut order: Vec<usize> = (0..cases).collect();
    order.shuffle(rng);
    let mut survivors: Vec<usize> = (0..errors.len()).collect();
    let mut losses = Vec::with_capacity(errors.len());
    for &c in &order {
        if survivors.len() == 1 {
            break;
        }
        losses.clear();
        losses.extend(survivors.iter().map(|&i| errors[i][c]));
        let best = losses.iter().copied().fold(f64::INFINITY, f64::min);
        let eps = stats::mad(&losses);
        let mut w = 0;
        for k in 0..survivors.len() {
            if losses[k] <= best + eps {
                survivors[w] = survivors[k];
                w += 1;
            }
        }
        survivors.truncate(w);
    }
    survivors[rng.random_range(0..survivors.len())]
}
