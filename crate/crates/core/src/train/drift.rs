use std::collections::BTreeMap;

use crate::kg::{EntityId, RelationId};

/// `(entity, query relation)`.
pub type VisitState = (EntityId, RelationId);

/// Last batch in which each state was visited.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VisitTable {
    last: BTreeMap<VisitState, usize>,
}

impl VisitTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn last_visit(&self, state: VisitState) -> Option<usize> {
        self.last.get(&state).copied()
    }

    pub fn len(&self) -> usize {
        self.last.len()
    }

    pub fn is_empty(&self) -> bool {
        self.last.is_empty()
    }

    /// R-max style revisit bonus: `r_max` when `state` was never visited or
    /// its last visit is more than `window` batches old, else 0. The visit is
    /// recorded either way.
    pub fn drift_bonus(&mut self, state: VisitState, batch: usize, window: usize, r_max: f64) -> f64 {
        let stale = match self.last.get(&state) {
            None => true,
            Some(&last) => batch.saturating_sub(last) > window,
        };
        let entry = self.last.entry(state).or_insert(batch);
        *entry = (*entry).max(batch);
        if stale {
            r_max
        } else {
            0.0
        }
    }
}
