use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Objective value given to individuals that cannot be evaluated.
pub const WORST: f64 = 1e15;

/// `(O₁, O₂)`, both minimized.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector {
    pub o1: f64,
    pub o2: f64,
}

impl ObjectiveVector {
    pub fn new(o1: f64, o2: f64) -> Self {
        Self { o1, o2 }
    }

    pub fn worst() -> Self {
        Self::new(WORST, WORST)
    }

    pub fn sum(&self) -> f64 {
        self.o1 + self.o2
    }

    fn get(&self, m: usize) -> f64 {
        if m == 0 {
            self.o1
        } else {
            self.o2
        }
    }

    fn total_cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.o1.total_cmp(&other.o1).then(self.o2.total_cmp(&other.o2))
    }
}

/// Pareto dominance: no worse in both objectives, strictly better in one.
pub fn dominates(a: &ObjectiveVector, b: &ObjectiveVector) -> bool {
    a.o1 <= b.o1 && a.o2 <= b.o2 && (a.o1 < b.o1 || a.o2 < b.o2)
}

/// Fast nondominated sorting. Fronts hold indices in ascending index order.
pub fn nondominated_fronts(v: &[ObjectiveVector]) -> Vec<Vec<usize>> {
    let n = v.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut count = vec![0usize; n];
    for i in 0..n {
        for j in i + 1..n {
            if dominates(&v[i], &v[j]) {
                dominated_by[i].push(j);
                count[j] += 1;
            } else if dominates(&v[j], &v[i]) {
                dominated_by[j].push(i);
                count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by[i] {
                count[j] -= 1;
                if count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Front index of every point, 0 for the nondominated set.
pub fn nondominated_ranks(v: &[ObjectiveVector]) -> Vec<usize> {
    let mut rank = vec![0; v.len()];
    for (r, front) in nondominated_fronts(v).iter().enumerate() {
        for &i in front {
            rank[i] = r;
        }
    }
    rank
}

/// Crowding distance of each member of `front` (indices into `v`), in the
/// order of `front`. Extremes of either objective get infinity.
pub fn crowding_distance(v: &[ObjectiveVector], front: &[usize]) -> Vec<f64> {
    let k = front.len();
    let mut d = vec![0.0; k];
    if k <= 2 {
        return vec![f64::INFINITY; k];
    }
    for m in 0..2 {
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| {
            v[front[a]].get(m).total_cmp(&v[front[b]].get(m)).then(v[front[a]].total_cmp(&v[front[b]]))
        });
        let lo = v[front[order[0]]].get(m);
        let hi = v[front[order[k - 1]]].get(m);
        d[order[0]] = f64::INFINITY;
        d[order[k - 1]] = f64::INFINITY;
        let range = hi - lo;
        if !(range > 0.0) || !range.is_finite() {
            continue;
        }
        for w in 1..k - 1 {
            let gap = v[front[order[w + 1]]].get(m) - v[front[order[w - 1]]].get(m);
            d[order[w]] += gap / range;
        }
    }
    d
}

/// NSGA-II environmental selection of `n` indices. Whole fronts are taken
/// while they fit; the last front is cut by descending crowding distance with
/// equal distances broken uniformly at random. The outcome depends only on
/// the multiset of objective vectors and the rng, not on input order.
pub fn nsga2_select<R: Rng + ?Sized>(v: &[ObjectiveVector], n: usize, rng: &mut R) -> Vec<usize> {
    let mut canon: Vec<usize> = (0..v.len()).collect();
    canon.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let sorted: Vec<ObjectiveVector> = canon.iter().map(|&i| v[i]).collect();

    let mut chosen = Vec::with_capacity(n);
    for front in nondominated_fronts(&sorted) {
        if chosen.len() + front.len() <= n {
            chosen.extend(front.iter().map(|&i| canon[i]));
            if chosen.len() == n {
                break;
            }
            continue;
        }
        let crowd = crowding_distance(&sorted, &front);
        let mut order: Vec<usize> = (0..front.len()).collect();
        order.shuffle(rng);
        order.sort_by(|&a, &b| crowd[b].total_cmp(&crowd[a]));
        let room = n - chosen.len();
        chosen.extend(order[..room].iter().map(|&w| canon[front[w]]));
        break;
    }
    chosen
}

/// Index of the knee point: the minimum sum of min-max normalized objectives.
/// Ties go to the lower `o1`, then the lower index. A constant objective
/// normalizes to 0.
pub fn mmd_knee(front: &[ObjectiveVector]) -> usize {
    assert!(!front.is_empty(), "knee of an empty front");
    let norm = |m: usize| -> Vec<f64> {
        let lo = front.iter().map(|p| p.get(m)).fold(f64::INFINITY, f64::min);
        let hi = front.iter().map(|p| p.get(m)).fold(f64::NEG_INFINITY, f64::max);
        let r = hi - lo;
        front.iter().map(|p| if r > 0.0 { (p.get(m) - lo) / r } else { 0.0 }).collect()
    };
    let (a, b) = (norm(0), norm(1));
    let mut best = 0;
    for i in 1..front.len() {
        let (si, sb) = (a[i] + b[i], a[best] + b[best]);
        if si < sb || (si == sb && front[i].o1 < front[best].o1) {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn ov(o1: f64, o2: f64) -> ObjectiveVector {
        ObjectiveVector::new(o1, o2)
    }

    #[test]
    fn dominance_cases() {
        assert!(dominates(&ov(1.0, 1.0), &ov(2.0, 2.0)));
        assert!(!dominates(&ov(1.0, 2.0), &ov(2.0, 1.0)));
        assert!(!dominates(&ov(2.0, 1.0), &ov(1.0, 2.0)));
        assert!(!dominates(&ov(1.0, 1.0), &ov(1.0, 1.0)));
        assert!(dominates(&ov(1.0, 1.0), &ov(1.0, 2.0)));
    }

    #[test]
    fn fronts_peel_in_order() {
        let v = [ov(3.0, 3.0), ov(1.0, 2.0), ov(2.0, 1.0), ov(2.0, 2.0), ov(4.0, 4.0)];
        assert_eq!(nondominated_fronts(&v), vec![vec![1, 2], vec![3], vec![0], vec![4]]);
        assert_eq!(nondominated_ranks(&v), vec![2, 0, 0, 1, 3]);
    }

    #[test]
    fn crowding_boundaries_are_infinite() {
        let v = [ov(0.0, 2.0), ov(1.0, 1.0), ov(2.0, 0.0)];
        let d = crowding_distance(&v, &[0, 1, 2]);
        assert!(d[0].is_infinite() && d[2].is_infinite());
        assert!((d[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn partial_front_keeps_boundaries() {
        let v = [ov(0.0, 2.0), ov(1.0, 1.0), ov(2.0, 0.0)];
        let mut s = nsga2_select(&v, 2, &mut seeded(1));
        s.sort();
        assert_eq!(s, vec![0, 2]);
    }

    #[test]
    fn dominated_half_is_dropped() {
        let mut v: Vec<ObjectiveVector> = (0..5).map(|i| ov(i as f64, 4.0 - i as f64)).collect();
        v.extend((0..5).map(|i| ov(i as f64 + 10.0, 20.0)));
        let mut s = nsga2_select(&v, 5, &mut seeded(2));
        s.sort();
        assert_eq!(s, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn selection_ignores_input_order() {
        let mut r = seeded(3);
        for _ in 0..50 {
            let v: Vec<ObjectiveVector> = (0..20)
                .map(|_| ov(r.random_range(0..6) as f64, r.random_range(0..6) as f64))
                .collect();
            let pick = |v: &[ObjectiveVector]| {
                let mut s: Vec<(u64, u64)> = nsga2_select(v, 10, &mut seeded(9))
                    .into_iter()
                    .map(|i| (v[i].o1.to_bits(), v[i].o2.to_bits()))
                    .collect();
                s.sort();
                s
            };
            let mut shuffled = v.clone();
            shuffled.shuffle(&mut r);
            assert_eq!(pick(&v), pick(&shuffled));
        }
    }

    #[test]
    fn knee_examples() {
        assert_eq!(mmd_knee(&[ov(0.0, 1.0), ov(0.5, 0.4), ov(1.0, 0.0)]), 1);
        assert_eq!(mmd_knee(&[ov(3.0, 7.0)]), 0);
        assert_eq!(mmd_knee(&[ov(1.0, 0.0), ov(0.0, 1.0)]), 1);
    }
}
