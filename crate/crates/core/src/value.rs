//! Coverage tracking and value evaluation.
//!
//! The objective is `V(T) = sum_{i,j} V_ij * W(i,j,T)` where `W(i,j,T)` is the
//! probability that at least one member of `T` is in sector `i` at timestep
//! `j`. Coverage is maintained incrementally: inserting a profile `p` updates
//! every cell as `w' = 1 - (1 - p)(1 - w)`, so a full insertion costs one pass
//! over the grid instead of a product over all members.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::model::{GridSpec, MobilityProfile, ValueMatrix};

#[derive(Debug, Error)]
pub enum ValueError {
    #[error("participant {id} is already a member of the coverage state")]
    DuplicateMember { id: u64 },
    #[error("dimension mismatch: {what} has {got} cells, state has {expected}")]
    DimensionMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
}

/// Aggregate coverage probabilities of a participant set, one entry per grid
/// cell, plus the member set itself.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageState {
    w: Vec<f64>,
    members: BTreeSet<u64>,
}

impl CoverageState {
    /// Empty set: every cell has coverage 0.
    pub fn empty(grid: GridSpec) -> Self {
        CoverageState {
            w: vec![0.0; grid.cells()],
            members: BTreeSet::new(),
        }
    }

    pub fn coverage(&self) -> &[f64] {
        &self.w
    }

    pub fn members(&self) -> &BTreeSet<u64> {
        &self.members
    }

    pub fn contains(&self, id: u64) -> bool {
        self.members.contains(&id)
    }

    /// Adds a profile in place; every cell becomes `1 - (1 - p)(1 - w)`.
    pub fn insert(&mut self, profile: &MobilityProfile) -> Result<(), ValueError> {
        if self.members.contains(&profile.participant_id) {
            return Err(ValueError::DuplicateMember {
                id: profile.participant_id,
            });
        }
        if profile.probs.len() != self.w.len() {
            return Err(ValueError::DimensionMismatch {
                what: "profile",
                got: profile.probs.len(),
                expected: self.w.len(),
            });
        }
        for (w, &p) in self.w.iter_mut().zip(&profile.probs) {
            *w = 1.0 - (1.0 - p) * (1.0 - *w);
        }
        self.members.insert(profile.participant_id);
        Ok(())
    }

    /// Returns a new state with the profile added.
    pub fn inserted(&self, profile: &MobilityProfile) -> Result<CoverageState, ValueError> {
        let mut next = self.clone();
        next.insert(profile)?;
        Ok(next)
    }
}

/// `sum_{i,j} V_ij * w_ij` for the current coverage.
pub fn total_value(values: &ValueMatrix, state: &CoverageState) -> Result<f64, ValueError> {
    if values.values.len() != state.w.len() {
        return Err(ValueError::DimensionMismatch {
            what: "value matrix",
            got: values.values.len(),
            expected: state.w.len(),
        });
    }
    Ok(values
        .values
        .iter()
        .zip(&state.w)
        .map(|(v, w)| v * w)
        .sum())
}

/// Marginal value of adding `profile` to the covered set.
///
/// Uses the closed form `sum V_ij * p * (1 - w)` rather than insert-and-
/// subtract; the result equals the value difference within 1e-12 and the
/// state is not touched.
pub fn marginal_value(
    values: &ValueMatrix,
    state: &CoverageState,
    profile: &MobilityProfile,
) -> Result<f64, ValueError> {
    if state.members.contains(&profile.participant_id) {
        return Err(ValueError::DuplicateMember {
            id: profile.participant_id,
        });
    }
    if profile.probs.len() != state.w.len() || values.values.len() != state.w.len() {
        return Err(ValueError::DimensionMismatch {
            what: "profile or value matrix",
            got: profile.probs.len(),
            expected: state.w.len(),
        });
    }
    Ok(marginal_unchecked(values, state, profile))
}

/// Hot-path marginal without membership or dimension checks. Both the
/// sequential and the parallel batch evaluators call exactly this function,
/// which is what makes their results bit-identical.
#[inline]
pub(crate) fn marginal_unchecked(
    values: &ValueMatrix,
    state: &CoverageState,
    profile: &MobilityProfile,
) -> f64 {
    let mut acc = 0.0;
    for ((v, p), w) in values.values.iter().zip(&profile.probs).zip(&state.w) {
        acc += v * p * (1.0 - w);
    }
    acc
}

/// Marginal values of many candidate profiles against one shared state.
///
/// The result is a pure function of the inputs: each profile is evaluated
/// independently and sequentially over its cells, so the map is bit-identical
/// for every `jobs` value.
pub fn marginal_value_batch(
    values: &ValueMatrix,
    state: &CoverageState,
    profiles: &[&MobilityProfile],
    jobs: usize,
) -> Result<BTreeMap<u64, f64>, ValueError> {
    for p in profiles {
        if state.members.contains(&p.participant_id) {
            return Err(ValueError::DuplicateMember {
                id: p.participant_id,
            });
        }
        if p.probs.len() != state.w.len() {
            return Err(ValueError::DimensionMismatch {
                what: "profile",
                got: p.probs.len(),
                expected: state.w.len(),
            });
        }
    }
    let gains = batch_marginals(values, state, profiles, jobs);
    Ok(profiles
        .iter()
        .map(|p| p.participant_id)
        .zip(gains)
        .collect())
}

/// Order-preserving batch evaluation; `jobs <= 1` runs sequentially.
pub(crate) fn batch_marginals(
    values: &ValueMatrix,
    state: &CoverageState,
    profiles: &[&MobilityProfile],
    jobs: usize,
) -> Vec<f64> {
    #[cfg(feature = "parallel")]
    if jobs > 1 {
        use rayon::prelude::*;
        return profiles
            .par_iter()
            .map(|p| marginal_unchecked(values, state, p))
            .collect();
    }
    let _ = jobs;
    profiles
        .iter()
        .map(|p| marginal_unchecked(values, state, p))
        .collect()
}
