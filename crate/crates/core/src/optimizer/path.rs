//! Explicit paths to the optimum in the lightweight graph.
//!
//! The constructive recipe first swaps the set's lowest-score member for
//! optimum members until the lowest-score client agrees with the optimum's,
//! then swaps the lowest-g member for the optimum's best remaining g. When a
//! step of that recipe is not a lightweight edge or makes no progress, a
//! breadth-first search over the whole graph is used instead and the result
//! is flagged.

use std::collections::{HashMap, VecDeque};

use super::neighborhood::{is_lightweight_neighbor, neighbors_lightweight};
use super::{binomial, ScoreTable};
use crate::domain::SelectionSet;
use crate::error::{BsflError, Result};

/// Largest state graph the breadth-first fallback will explore.
pub const DEFAULT_BFS_LIMIT: u128 = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    /// `path[0]` is the start, the last element the optimum.
    pub path: Vec<SelectionSet>,
    /// Whether the constructive recipe stalled and BFS produced the path.
    pub used_fallback: bool,
}

pub fn construct_path_to_optimum(
    start: &SelectionSet,
    optimum: &SelectionSet,
    table: &ScoreTable,
    bfs_limit: u128,
) -> Result<PathResult> {
    table.check_set(start)?;
    table.check_set(optimum)?;
    if let Some(path) = two_phase(start, optimum, table) {
        return Ok(PathResult {
            path,
            used_fallback: false,
        });
    }
    let path = bfs(start, optimum, table, bfs_limit)?.ok_or_else(|| {
        BsflError::InvalidInput("optimum is unreachable in the lightweight graph".into())
    })?;
    Ok(PathResult {
        path,
        used_fallback: true,
    })
}

/// Member with the smallest score (smallest id among ties).
fn argmin_score(members: &[usize], table: &ScoreTable) -> usize {
    *members
        .iter()
        .min_by(|&&a, &&b| table.score(a).cmp(&table.score(b)).then(a.cmp(&b)))
        .expect("non-empty set")
}

fn argmin_g(members: &[usize], table: &ScoreTable) -> usize {
    *members
        .iter()
        .min_by(|&&a, &&b| table.g(a).total_cmp(&table.g(b)).then(a.cmp(&b)))
        .expect("non-empty set")
}

fn two_phase(start: &SelectionSet, optimum: &SelectionSet, table: &ScoreTable) -> Option<Vec<SelectionSet>> {
    let m = start.len();
    let max_len = 2 * m + 2;
    let mut path = vec![start.clone()];
    let target_min = argmin_score(optimum.members(), table);

    let push = |path: &mut Vec<SelectionSet>, next: SelectionSet| -> Option<()> {
        let last = path.last().expect("path starts non-empty");
        if !is_lightweight_neighbor(last, &next, table) || path.len() >= max_len {
            return None;
        }
        path.push(next);
        Some(())
    };

    // Opening move: bring in the optimum's lowest-score client.
    if !start.contains(target_min) {
        let out = argmin_score(start.members(), table);
        push(&mut path, start.swap(out, target_min))?;
    }

    // Phase 1: drop the lowest-score member, add the best-score optimum
    // member still missing.
    loop {
        let current = path.last().expect("non-empty").clone();
        if current == *optimum || argmin_score(current.members(), table) == target_min {
            break;
        }
        let out = argmin_score(current.members(), table);
        let incoming = optimum
            .members()
            .iter()
            .copied()
            .filter(|&k| !current.contains(k))
            .max_by(|&a, &b| table.score(a).cmp(&table.score(b)).then(b.cmp(&a)))?;
        push(&mut path, current.swap(out, incoming))?;
    }

    // Phase 2: drop the lowest-g member, add the best-g optimum member still
    // missing.
    loop {
        let current = path.last().expect("non-empty").clone();
        if current == *optimum {
            break;
        }
        let out = argmin_g(current.members(), table);
        if optimum.contains(out) {
            return None;
        }
        let incoming = optimum
            .members()
            .iter()
            .copied()
            .filter(|&k| !current.contains(k))
            .max_by(|&a, &b| table.g(a).total_cmp(&table.g(b)).then(b.cmp(&a)))?;
        push(&mut path, current.swap(out, incoming))?;
    }
    Some(path)
}

/// Shortest lightweight path, or `None` when the optimum is unreachable.
fn bfs(
    start: &SelectionSet,
    goal: &SelectionSet,
    table: &ScoreTable,
    limit: u128,
) -> Result<Option<Vec<SelectionSet>>> {
    let states = binomial(table.available().len(), table.num_channels());
    if states > limit {
        return Err(BsflError::SearchTooLarge { states, limit });
    }
    let mut parent: HashMap<SelectionSet, Option<SelectionSet>> = HashMap::new();
    parent.insert(start.clone(), None);
    let mut queue = VecDeque::from([start.clone()]);
    while let Some(s) = queue.pop_front() {
        if s == *goal {
            let mut path = vec![s.clone()];
            let mut cur = &s;
            while let Some(Some(p)) = parent.get(cur) {
                path.push(p.clone());
                cur = p;
            }
            path.reverse();
            return Ok(Some(path));
        }
        for u in neighbors_lightweight(&s, table) {
            if !parent.contains_key(&u) {
                parent.insert(u.clone(), Some(s.clone()));
                queue.push_back(u);
            }
        }
    }
    Ok(None)
}
