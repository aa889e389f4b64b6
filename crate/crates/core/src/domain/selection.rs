use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{BsflError, Result};

/// An `m`-subset of client ids, kept strictly increasing.
///
/// The derived ordering is lexicographic over the member list, which is the
/// deterministic tie-break used by every solver.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SelectionSet {
    members: Vec<usize>,
}

impl SelectionSet {
    /// Builds a set from arbitrary ids; they are sorted and checked for
    /// duplicates and range.
    pub fn new(mut members: Vec<usize>, num_clients: usize) -> Result<Self> {
        members.sort_unstable();
        if members.windows(2).any(|w| w[0] == w[1]) {
            return Err(BsflError::InvalidInput(format!(
                "selection contains duplicate clients: {members:?}"
            )));
        }
        if let Some(&last) = members.last() {
            if last >= num_clients {
                return Err(BsflError::UnknownClient {
                    client: last,
                    num_clients,
                });
            }
        }
        Ok(Self { members })
    }

    /// Caller guarantees `members` is strictly increasing.
    pub(crate) fn from_sorted(members: Vec<usize>) -> Self {
        debug_assert!(members.windows(2).all(|w| w[0] < w[1]));
        Self { members }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, client: usize) -> bool {
        self.members.binary_search(&client).is_ok()
    }

    /// Returns the set with `out` replaced by `incoming`.
    pub fn swap(&self, out: usize, incoming: usize) -> SelectionSet {
        debug_assert!(self.contains(out) && !self.contains(incoming));
        let mut members: Vec<usize> = self
            .members
            .iter()
            .copied()
            .filter(|&c| c != out)
            .collect();
        let pos = members.partition_point(|&c| c < incoming);
        members.insert(pos, incoming);
        SelectionSet { members }
    }

    /// Number of shared members.
    pub fn overlap(&self, other: &SelectionSet) -> usize {
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < self.members.len() && j < other.members.len() {
            match self.members[i].cmp(&other.members[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    /// For two sets differing in exactly one member, returns `(out, incoming)`
    /// such that `other == self.swap(out, incoming)`.
    pub fn single_swap_to(&self, other: &SelectionSet) -> Option<(usize, usize)> {
        if self.len() != other.len() || self.overlap(other) + 1 != self.len() {
            return None;
        }
        let out = *self.members.iter().find(|c| !other.contains(**c))?;
        let incoming = *other.members.iter().find(|c| !self.contains(**c))?;
        Some((out, incoming))
    }
}

impl fmt::Display for SelectionSet {
    /// Semicolon-joined ids, the CSV encoding.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.members.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}
