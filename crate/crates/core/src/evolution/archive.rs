use serde::Serialize;

use crate::tree::Individual;

/// The best individuals ever seen by `o1 + o2`, ascending, without duplicates.
#[derive(Clone, Debug, Default)]
pub struct Archive {
    capacity: usize,
    members: Vec<(Individual, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ArchiveEntry {
    pub individual: String,
    pub score: f64,
}

impl Archive {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1);
        Self {
            capacity,
            members: Vec::with_capacity(capacity + 1),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> impl Iterator<Item = &Individual> {
        self.members.iter().map(|(i, _)| i)
    }

    pub fn scores(&self) -> impl Iterator<Item = f64> + '_ {
        self.members.iter().map(|(_, s)| *s)
    }

    pub fn best(&self) -> Option<&Individual> {
        self.members.first().map(|(i, _)| i)
    }

    pub fn best_score(&self) -> Option<f64> {
        self.members.first().map(|(_, s)| *s)
    }

    /// Offers evaluated individuals; unevaluated ones are ignored. Among
    /// equal scores, earlier entries stay ahead.
    pub fn update<'a>(&mut self, candidates: impl IntoIterator<Item = &'a Individual>) {
        for c in candidates {
            let Some(obj) = c.objectives() else { continue };
            let score = obj.sum();
            if !score.is_finite() {
                continue;
            }
            if self.members.len() == self.capacity && score >= self.members[self.capacity - 1].1 {
                continue;
            }
            let key = c.key();
            if self.members.iter().any(|(m, _)| m.key() == key) {
                continue;
            }
            let pos = self.members.partition_point(|(_, s)| *s <= score);
            self.members.insert(pos, (c.clone(), score));
            self.members.truncate(self.capacity);
        }
    }

    pub fn entries(&self) -> Vec<ArchiveEntry> {
        self.members
            .iter()
            .map(|(i, s)| ArchiveEntry { individual: i.to_string(), score: *s })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::ObjectiveVector;
    use crate::tree::Fitness;

    fn scored(expr: &str, o1: f64, o2: f64) -> Individual {
        let mut i = Individual::new(vec![expr.parse().unwrap()]);
        i.set_fitness(Fitness {
            objectives: ObjectiveVector::new(o1, o2),
            case_errors: vec![],
            model: None,
            features: None,
            tikhonov: 0.0,
        });
        i
    }

    #[test]
    fn keeps_best_sorted_and_bounded() {
        let mut a = Archive::new(2);
        a.update(&[scored("x0", 3.0, 0.0), scored("x1", 1.0, 0.5), scored("x2", 2.0, 0.0)]);
        assert_eq!(a.scores().collect::<Vec<_>>(), vec![1.5, 2.0]);
        a.update(&[scored("x3", 5.0, 0.0)]);
        assert_eq!(a.scores().collect::<Vec<_>>(), vec![1.5, 2.0]);
        a.update(&[scored("x1", 1.0, 0.5)]);
        assert_eq!(a.len(), 2);
        assert_eq!(a.best().unwrap().to_string(), "[x1]");
    }

    #[test]
    fn unevaluated_are_ignored() {
        let mut a = Archive::new(3);
        a.update(&[Individual::new(vec!["x0".parse().unwrap()])]);
        assert!(a.is_empty());
    }
}
