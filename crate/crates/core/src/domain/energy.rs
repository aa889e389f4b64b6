use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// A per-client score: a finite value, or the "never observed" sentinel that
/// stands for an infinite UCB index. The sentinel orders above every finite
/// value and ties with itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Score {
    Finite(f64),
    Unobserved,
}

impl Score {
    pub fn finite(self) -> Option<f64> {
        match self {
            Score::Finite(v) => Some(v),
            Score::Unobserved => None,
        }
    }

    pub fn is_unobserved(self) -> bool {
        matches!(self, Score::Unobserved)
    }

    /// Internal numeric key; the sentinel becomes `+inf`. Never subtracted.
    pub(crate) fn key(self) -> f64 {
        match self {
            Score::Finite(v) => v,
            Score::Unobserved => f64::INFINITY,
        }
    }
}

impl Eq for Score {}

impl PartialOrd for Score {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Score {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Score::Finite(a), Score::Finite(b)) => a.total_cmp(b),
            (Score::Finite(_), Score::Unobserved) => Ordering::Less,
            (Score::Unobserved, Score::Finite(_)) => Ordering::Greater,
            (Score::Unobserved, Score::Unobserved) => Ordering::Equal,
        }
    }
}

/// Objective value of a candidate selection.
///
/// `g_term` is the scaled generalization contribution `(alpha/m) * sum g`.
/// For a finite energy `value` already includes it; for the infinite kind it
/// is the only thing that distinguishes two sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Energy {
    Finite { value: f64, g_term: f64 },
    UnobservedInfinite { g_term: f64 },
}

impl Energy {
    /// Combines a (possibly sentinel) minimum score with the g term.
    pub fn from_parts(min_score: Score, g_term: f64) -> Self {
        match min_score {
            Score::Finite(s) => Energy::Finite {
                value: s + g_term,
                g_term,
            },
            Score::Unobserved => Energy::UnobservedInfinite { g_term },
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Energy::Finite { .. })
    }

    pub fn value(&self) -> Option<f64> {
        match *self {
            Energy::Finite { value, .. } => Some(value),
            Energy::UnobservedInfinite { .. } => None,
        }
    }

    pub fn g_term(&self) -> f64 {
        match *self {
            Energy::Finite { g_term, .. } | Energy::UnobservedInfinite { g_term } => g_term,
        }
    }

    /// Scalar for reporting: the finite value, or `+inf` for the sentinel.
    pub fn as_f64(&self) -> f64 {
        self.value().unwrap_or(f64::INFINITY)
    }

    /// `self - other` for the Metropolis rule. A drop from the infinite kind
    /// to a finite energy is priced at `-surrogate_gap` (and a rise at
    /// `+surrogate_gap`), keeping arithmetic finite.
    pub fn difference(&self, other: &Energy, surrogate_gap: f64) -> f64 {
        match (self, other) {
            (Energy::Finite { value: a, .. }, Energy::Finite { value: b, .. }) => a - b,
            (Energy::UnobservedInfinite { g_term: a }, Energy::UnobservedInfinite { g_term: b }) => {
                a - b
            }
            (Energy::Finite { .. }, Energy::UnobservedInfinite { .. }) => -surrogate_gap,
            (Energy::UnobservedInfinite { .. }, Energy::Finite { .. }) => surrogate_gap,
        }
    }
}

impl Eq for Energy {}

impl PartialOrd for Energy {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Energy {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (
                Energy::Finite {
                    value: a,
                    g_term: ga,
                },
                Energy::Finite {
                    value: b,
                    g_term: gb,
                },
            ) => a.total_cmp(b).then_with(|| ga.total_cmp(gb)),
            (Energy::Finite { .. }, Energy::UnobservedInfinite { .. }) => Ordering::Less,
            (Energy::UnobservedInfinite { .. }, Energy::Finite { .. }) => Ordering::Greater,
            (Energy::UnobservedInfinite { g_term: a }, Energy::UnobservedInfinite { g_term: b }) => {
                a.total_cmp(b)
            }
        }
    }
}

impl fmt::Display for Energy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Energy::Finite { value, .. } => write!(f, "{value}"),
            Energy::UnobservedInfinite { g_term } => write!(f, "inf(g={g_term})"),
        }
    }
}
