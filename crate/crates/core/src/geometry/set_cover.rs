//! Set cover over small universes: exact branch and bound on bitmasks, and
//! the greedy approximation.

/// Index of each chosen set, greedy by largest number of newly covered
/// elements (lowest index on ties). `None` if the sets cannot cover
/// `universe`.
pub fn greedy_set_cover(universe: &[usize], sets: &[Vec<usize>]) -> Option<Vec<usize>> {
    let mut uncovered: std::collections::BTreeSet<usize> = universe.iter().copied().collect();
    let mut chosen = Vec::new();
    while !uncovered.is_empty() {
        let (best, gain) = sets
            .iter()
            .enumerate()
            .map(|(i, s)| (i, s.iter().filter(|e| uncovered.contains(e)).count()))
            .fold((usize::MAX, 0), |acc, (i, g)| if g > acc.1 { (i, g) } else { acc });
        if gain == 0 {
            return None;
        }
        for e in &sets[best] {
            uncovered.remove(e);
        }
        chosen.push(best);
    }
    Some(chosen)
}

struct Search<'a> {
    sets: &'a [u64],
    largest: u32,
    best: Vec<usize>,
}

impl Search<'_> {
    fn go(&mut self, uncovered: u64, chosen: &mut Vec<usize>) {
        if uncovered == 0 {
            if chosen.len() < self.best.len() {
                self.best = chosen.clone();
            }
            return;
        }
        let needed = uncovered.count_ones().div_ceil(self.largest) as usize;
        if chosen.len() + needed >= self.best.len() {
            return;
        }
        // branch on the uncovered element contained in the fewest sets
        let mut pivot = None;
        let mut fewest = usize::MAX;
        let mut rest = uncovered;
        while rest != 0 {
            let e = rest.trailing_zeros();
            rest &= rest - 1;
            let count = self.sets.iter().filter(|&&s| s >> e & 1 == 1).count();
            if count < fewest {
                fewest = count;
                pivot = Some(e);
            }
        }
        let e = pivot.expect("uncovered is nonzero");
        let mut options: Vec<usize> = (0..self.sets.len()).filter(|&i| self.sets[i] >> e & 1 == 1).collect();
        options.sort_by_key(|&i| std::cmp::Reverse((self.sets[i] & uncovered).count_ones()));
        for i in options {
            chosen.push(i);
            self.go(uncovered & !self.sets[i], chosen);
            chosen.pop();
        }
    }
}

/// Minimum set cover of `universe` (at most 64 elements) by the given sets.
/// Returns the chosen set indices, or `None` if no cover exists.
pub fn min_set_cover(universe: &[usize], sets: &[Vec<usize>]) -> Option<Vec<usize>> {
    assert!(universe.len() <= 64, "exact set cover supports at most 64 elements");
    let position = |e: &usize| universe.iter().position(|u| u == e);
    let masks: Vec<u64> = sets
        .iter()
        .map(|s| s.iter().filter_map(position).fold(0u64, |m, p| m | 1 << p))
        .collect();
    let full = if universe.len() == 64 { u64::MAX } else { (1u64 << universe.len()) - 1 };
    if masks.iter().fold(0, |a, m| a | m) & full != full {
        return None;
    }
    let greedy = greedy_set_cover(universe, sets)?;
    let largest = masks.iter().map(|m| m.count_ones()).max().unwrap_or(1).max(1);
    let mut search = Search { sets: &masks, largest, best: greedy.clone() };
    // seed the bound one above greedy so the greedy-size cover is also found
    search.best.push(usize::MAX);
    search.go(full, &mut Vec::new());
    if search.best.len() > greedy.len() {
        Some(greedy)
    } else {
        Some(search.best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_beats_greedy() {
        // classic instance where greedy picks the big middle set first
        let universe: Vec<usize> = (0..6).collect();
        let sets = vec![vec![0, 1, 3, 4], vec![0, 1, 2], vec![3, 4, 5]];
        assert_eq!(greedy_set_cover(&universe, &sets).unwrap().len(), 3);
        assert_eq!(min_set_cover(&universe, &sets).unwrap().len(), 2);
    }

    #[test]
    fn uncoverable() {
        assert_eq!(min_set_cover(&[0, 1], &[vec![0]]), None);
        assert_eq!(greedy_set_cover(&[0, 1], &[vec![0]]), None);
    }

    #[test]
    fn empty_universe() {
        assert_eq!(min_set_cover(&[], &[vec![0]]).unwrap().len(), 0);
    }
}
