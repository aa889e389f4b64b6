//! Neighbor relations on the graph of `m`-subsets.
//!
//! Classic: any single swap. Lightweight: a single swap `S -> U = S - x + y`
//! is kept only if `x` is a minimizer of the score or of `g` inside `S`, or
//! `y` is a minimizer of the score or of `g` inside `U`. Minimizers are taken
//! as full argmin sets, so ties never break symmetry.

use serde::{Deserialize, Serialize};

use super::ScoreTable;
use crate::domain::{Score, SelectionSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Neighborhood {
    Classic,
    Lightweight,
}

/// Replace `out` with `incoming`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Swap {
    pub out: usize,
    pub incoming: usize,
}

fn outside(set: &[usize], table: &ScoreTable) -> Vec<usize> {
    table
        .available()
        .iter()
        .copied()
        .filter(|k| set.binary_search(k).is_err())
        .collect()
}

/// Minimum score and minimum g over `members`.
fn minima(members: &[usize], table: &ScoreTable) -> (Score, f64) {
    let mut min_s = Score::Unobserved;
    let mut min_g = f64::INFINITY;
    for &k in members {
        min_s = min_s.min(table.score(k));
        min_g = min_g.min(table.g(k));
    }
    (min_s, min_g)
}

/// Members that attain the minimum score or the minimum g.
fn weakest(members: &[usize], table: &ScoreTable, min_s: Score, min_g: f64) -> Vec<usize> {
    members
        .iter()
        .copied()
        .filter(|&k| table.score(k) == min_s || table.g(k) == min_g)
        .collect()
}

pub fn neighbors_classic(set: &SelectionSet, table: &ScoreTable) -> Vec<SelectionSet> {
    let out = outside(set.members(), table);
    let mut result = Vec::with_capacity(set.len() * out.len());
    for &x in set.members() {
        for &y in &out {
            result.push(set.swap(x, y));
        }
    }
    result
}

/// Lightweight swaps out of `members` (sorted), in `(incoming, out)` order.
///
/// An outside client `y` whose score or g is at or below the set's minimum
/// becomes a minimizer of every `S - x + y`, so it pairs with every `x`.
/// Any other `y` pairs only with the set's weakest members.
pub fn lightweight_swaps(members: &[usize], table: &ScoreTable) -> Vec<Swap> {
    let (min_s, min_g) = minima(members, table);
    let weak = weakest(members, table, min_s, min_g);
    let mut swaps = Vec::new();
    for y in outside(members, table) {
        let removable: &[usize] = if table.score(y) <= min_s || table.g(y) <= min_g {
            members
        } else {
            &weak
        };
        swaps.extend(removable.iter().map(|&x| Swap { out: x, incoming: y }));
    }
    swaps
}

pub fn neighbors_lightweight(set: &SelectionSet, table: &ScoreTable) -> Vec<SelectionSet> {
    lightweight_swaps(set.members(), table)
        .into_iter()
        .map(|s| set.swap(s.out, s.incoming))
        .collect()
}

/// Direct evaluation of the lightweight neighbor predicate.
pub fn is_lightweight_neighbor(a: &SelectionSet, b: &SelectionSet, table: &ScoreTable) -> bool {
    let Some((x, y)) = a.single_swap_to(b) else {
        return false;
    };
    let is_weakest = |set: &SelectionSet, k: usize| {
        let (min_s, min_g) = minima(set.members(), table);
        table.score(k) == min_s || table.g(k) == min_g
    };
    is_weakest(a, x) || is_weakest(b, y)
}

/// Uniform proposal over a state's neighbor list without materializing it.
pub(crate) fn sample_swap<R: rand::Rng + ?Sized>(
    members: &[usize],
    outside: &[usize],
    table: &ScoreTable,
    neighborhood: Neighborhood,
    rng: &mut R,
) -> Option<Swap> {
    if outside.is_empty() {
        return None;
    }
    match neighborhood {
        Neighborhood::Classic => {
            let r = rng.random_range(0..members.len() * outside.len());
            Some(Swap {
                out: members[r / outside.len()],
                incoming: outside[r % outside.len()],
            })
        }
        Neighborhood::Lightweight => {
            let (min_s, min_g) = minima(members, table);
            let weak = weakest(members, table, min_s, min_g);
            let low = |y: usize| table.score(y) <= min_s || table.g(y) <= min_g;
            let n_low = outside.iter().filter(|&&y| low(y)).count();
            let total = n_low * members.len() + (outside.len() - n_low) * weak.len();
            let mut r = rng.random_range(0..total);
            for &y in outside {
                let removable: &[usize] = if low(y) { members } else { &weak };
                if r < removable.len() {
                    return Some(Swap {
                        out: removable[r],
                        incoming: y,
                    });
                }
                r -= removable.len();
            }
            unreachable!("proposal index within neighbor count")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classic_degree() {
        let t = ScoreTable::from_values(&[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8], &[0.0; 8], 1.0, 4).unwrap();
        let s = SelectionSet::new(vec![0, 2, 4, 6], 8).unwrap();
        assert_eq!(neighbors_classic(&s, &t).len(), 16);
        let t = ScoreTable::from_values(&[0.1, 0.2, 0.3], &[0.0; 3], 1.0, 3).unwrap();
        let s = SelectionSet::new(vec![0, 1, 2], 3).unwrap();
        assert!(neighbors_classic(&s, &t).is_empty());
        assert!(neighbors_lightweight(&s, &t).is_empty());
    }

    #[test]
    fn outgoing_branch_bound() {
        // members 4..8 hold the high scores; outside clients are all higher
        // in both score and g than the set's minima, so only branch (a)
        // applies.
        let scores = [0.9, 0.95, 0.85, 0.99, 0.5, 0.6, 0.7, 0.8];
        let g = [0.9, 0.8, 0.7, 0.95, 0.3, 0.1, 0.4, 0.2];
        let t = ScoreTable::from_values(&scores, &g, 1.0, 4).unwrap();
        let s = SelectionSet::new(vec![4, 5, 6, 7], 8).unwrap();
        let n = neighbors_lightweight(&s, &t);
        assert_eq!(n.len(), 2 * (8 - 4));
        for u in &n {
            assert!(is_lightweight_neighbor(&s, u, &t));
        }
    }

    #[test]
    fn sampled_swaps_match_enumeration() {
        use rand::SeedableRng;
        let scores = [0.3, 0.9, 0.2, 0.75, 0.6, 0.1, 0.5];
        let g = [0.1, -0.4, 0.5, 0.0, 0.2, 0.3, -0.1];
        let t = ScoreTable::from_values(&scores, &g, 1.0, 3).unwrap();
        let members = [1, 3, 4];
        let out: Vec<usize> = (0..7).filter(|k| !members.contains(k)).collect();
        let listed = lightweight_swaps(&members, &t);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut hits = std::collections::HashMap::new();
        for _ in 0..20_000 {
            let s = sample_swap(&members, &out, &t, Neighborhood::Lightweight, &mut rng).unwrap();
            assert!(listed.contains(&s));
            *hits.entry((s.out, s.incoming)).or_insert(0usize) += 1;
        }
        assert_eq!(hits.len(), listed.len());
        let expect = 20_000.0 / listed.len() as f64;
        for &h in hits.values() {
            assert!((h as f64 - expect).abs() < 5.0 * expect.sqrt());
        }
    }
}
