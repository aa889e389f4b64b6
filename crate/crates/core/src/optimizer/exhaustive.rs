use super::ScoreTable;
use crate::domain::{Energy, SelectionSet};
use crate::error::{BsflError, Result};

/// Largest number of candidate sets `solve_exhaustive` will enumerate.
pub const DEFAULT_ENUMERATION_CAP: u128 = 2_000_000;

/// `n choose k`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Exact argmax by enumerating every `m`-subset of the available clients in
/// lexicographic order. Ties keep the lexicographically first set.
pub fn solve_exhaustive(table: &ScoreTable, cap: u128) -> Result<(SelectionSet, Energy)> {
    let avail = table.available();
    let m = table.num_channels();
    let candidates = binomial(avail.len(), m);
    if candidates > cap {
        return Err(BsflError::EnumerationCapExceeded { candidates, cap });
    }

    let mut search = Search {
        table,
        avail,
        m,
        current: Vec::with_capacity(m),
        best: None,
    };
    search.descend(0, f64::INFINITY, 0.0);
    let (members, energy) = search.best.expect("at least one candidate set");
    Ok((SelectionSet::from_sorted(members), energy))
}

struct Search<'a> {
    table: &'a ScoreTable,
    avail: &'a [usize],
    m: usize,
    current: Vec<usize>,
    best: Option<(Vec<usize>, Energy)>,
}

impl Search<'_> {
    fn descend(&mut self, start: usize, min_key: f64, gsum: f64) {
        let depth = self.current.len();
        if depth == self.m {
            let e = self.table.energy_from(min_key, gsum);
            let better = match &self.best {
                None => true,
                Some((_, b)) => e > *b,
            };
            if better {
                self.best = Some((self.current.clone(), e));
            }
            return;
        }
        let remaining = self.m - depth;
        for i in start..=self.avail.len() - remaining {
            let k = self.avail[i];
            self.current.push(k);
            self.descend(
                i + 1,
                min_key.min(self.table.score(k).key()),
                gsum + self.table.g(k),
            );
            self.current.pop();
        }
    }
}
