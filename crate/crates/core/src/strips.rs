//! Propositional STRIPS tasks with packed bit-vector states.
//!
//! Every set of propositions (states, preconditions, effects, goals) is a
//! [`BitSet`] whose width is fixed by the owning [`PropositionSpace`].
//! Applicability is a word-wise subset test and application is
//! `(state & !del) | add`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StripsError {
    #[error("dimension mismatch: expected {expected} propositions, got {found}")]
    Dimension { expected: usize, found: usize },
    #[error("action `{action}` is not applicable in the given state")]
    NotApplicable { action: String },
    #[error("action `{action}` adds and deletes proposition {prop}")]
    AddDeleteOverlap { action: String, prop: String },
    #[error("proposition space must contain at least one proposition")]
    EmptySpace,
    #[error("invalid proposition name at index {index}: {reason}")]
    BadName { index: usize, reason: &'static str },
    #[error("plan step {step} refers to action {index}, but the task has {n_actions} actions")]
    ActionIndex {
        step: usize,
        index: usize,
        n_actions: usize,
    },
}

const WORD: usize = 64;

/// Fixed-width set of proposition indices, packed into 64-bit words.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitSet {
    words: Box<[u64]>,
    len: usize,
}

impl BitSet {
    pub fn new(len: usize) -> Self {
        BitSet {
            words: vec![0; len.div_ceil(WORD)].into_boxed_slice(),
            len,
        }
    }

    pub fn from_indices(len: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut set = BitSet::new(len);
        for i in indices {
            set.insert(i);
        }
        set
    }

    /// Parses a `'0'`/`'1'` string where character `i` is bit `i`.
    pub fn from_bit_str(bits: &str) -> Option<Self> {
        let mut set = BitSet::new(bits.len());
        for (i, c) in bits.chars().enumerate() {
            match c {
                '0' => {}
                '1' => set.insert(i),
                _ => return None,
            }
        }
        Some(set)
    }

    pub fn to_bit_string(&self) -> String {
        (0..self.len)
            .map(|i| if self.contains(i) { '1' } else { '0' })
            .collect()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of range for width {}", self.len);
        self.words[i / WORD] >> (i % WORD) & 1 == 1
    }

    #[inline]
    pub fn insert(&mut self, i: usize) {
        assert!(i < self.len, "bit {i} out of range for width {}", self.len);
        self.words[i / WORD] |= 1 << (i % WORD);
    }

    #[inline]
    pub fn remove(&mut self, i: usize) {
        assert!(i < self.len, "bit {i} out of range for width {}", self.len);
        self.words[i / WORD] &= !(1 << (i % WORD));
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// `self ⊆ other`. Widths must agree.
    #[inline]
    pub fn is_subset(&self, other: &BitSet) -> bool {
        debug_assert_eq!(self.len, other.len);
        self.words
            .iter()
            .zip(other.words.iter())
            .all(|(a, b)| a & !b == 0)
    }

    pub fn is_disjoint(&self, other: &BitSet) -> bool {
        self.words
            .iter()
            .zip(other.words.iter())
            .all(|(a, b)| a & b == 0)
    }

    /// Number of bits of `self` missing from `other`.
    pub fn count_missing_from(&self, other: &BitSet) -> usize {
        self.words
            .iter()
            .zip(other.words.iter())
            .map(|(a, b)| (a & !b).count_ones() as usize)
            .sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let tz = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * WORD + tz)
            })
        })
    }

    pub fn first_common(&self, other: &BitSet) -> Option<usize> {
        self.words
            .iter()
            .zip(other.words.iter())
            .enumerate()
            .find_map(|(wi, (a, b))| {
                let w = a & b;
                (w != 0).then(|| wi * WORD + w.trailing_zeros() as usize)
            })
    }
}

impl fmt::Debug for BitSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitSet({})", self.to_bit_string())
    }
}

/// A latent state: the set of true propositions.
pub type State = BitSet;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropositionSpace {
    names: Vec<String>,
}

impl PropositionSpace {
    pub fn new(names: Vec<String>) -> Result<Self, StripsError> {
        if names.is_empty() {
            return Err(StripsError::EmptySpace);
        }
        let mut seen = std::collections::HashSet::with_capacity(names.len());
        for (index, name) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(StripsError::BadName {
                    index,
                    reason: "empty name",
                });
            }
            if !seen.insert(name.as_str()) {
                return Err(StripsError::BadName {
                    index,
                    reason: "duplicate name",
                });
            }
        }
        Ok(PropositionSpace { names })
    }

    /// Propositions named `z0 .. z{n-1}`.
    pub fn numbered(n_props: usize) -> Result<Self, StripsError> {
        Self::new((0..n_props).map(|i| format!("z{i}")).collect())
    }

    pub fn n_props(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn empty_set(&self) -> BitSet {
        BitSet::new(self.n_props())
    }

    fn check(&self, set: &BitSet) -> Result<(), StripsError> {
        if set.len() != self.n_props() {
            return Err(StripsError::Dimension {
                expected: self.n_props(),
                found: set.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Action {
    pub name: String,
    pub pre: BitSet,
    pub add: BitSet,
    pub del: BitSet,
}

impl Action {
    /// Builds an action, rejecting mismatched widths and add/delete overlap.
    pub fn new(
        name: impl Into<String>,
        pre: BitSet,
        add: BitSet,
        del: BitSet,
    ) -> Result<Self, StripsError> {
        let name = name.into();
        let width = pre.len();
        for set in [&add, &del] {
            if set.len() != width {
                return Err(StripsError::Dimension {
                    expected: width,
                    found: set.len(),
                });
            }
        }
        if let Some(p) = add.first_common(&del) {
            return Err(StripsError::AddDeleteOverlap {
                action: name,
                prop: p.to_string(),
            });
        }
        Ok(Action {
            name,
            pre,
            add,
            del,
        })
    }

    pub fn width(&self) -> usize {
        self.pre.len()
    }

    fn check_width(&self, state: &State) -> Result<(), StripsError> {
        if state.len() != self.width() {
            return Err(StripsError::Dimension {
                expected: self.width(),
                found: state.len(),
            });
        }
        Ok(())
    }

    pub fn is_applicable(&self, state: &State) -> Result<bool, StripsError> {
        self.check_width(state)?;
        Ok(self.pre.is_subset(state))
    }

    /// `(state \ del) ∪ add`; fails if the action is not applicable.
    pub fn apply(&self, state: &State) -> Result<State, StripsError> {
        if !self.is_applicable(state)? {
            return Err(StripsError::NotApplicable {
                action: self.name.clone(),
            });
        }
        Ok(self.apply_unchecked(state))
    }

    /// Applies without the precondition test. Widths must already agree.
    #[inline]
    pub(crate) fn apply_unchecked(&self, state: &State) -> State {
        let words = state
            .words
            .iter()
            .zip(self.del.words.iter())
            .zip(self.add.words.iter())
            .map(|((s, d), a)| (s & !d) | a)
            .collect();
        BitSet {
            words,
            len: state.len,
        }
    }
}

/// Ordered action indices into [`PlanningTask::actions`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Plan {
    pub steps: Vec<usize>,
}

impl Plan {
    pub fn new(steps: Vec<usize>) -> Self {
        Plan { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanFailure {
    /// The action at this step was not applicable.
    Step(usize),
    /// Every step applied but the final state misses goal propositions.
    Goal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanCheck {
    pub feasible: bool,
    /// States visited, starting with the initial state. Stops at the failure.
    pub trace: Vec<State>,
    pub failure: Option<PlanFailure>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanningTask {
    pub space: PropositionSpace,
    pub actions: Vec<Action>,
    pub init: State,
    pub goal: BitSet,
}

impl PlanningTask {
    pub fn new(
        space: PropositionSpace,
        actions: Vec<Action>,
        init: State,
        goal: BitSet,
    ) -> Result<Self, StripsError> {
        space.check(&init)?;
        space.check(&goal)?;
        for a in &actions {
            space.check(&a.pre)?;
            space.check(&a.add)?;
            space.check(&a.del)?;
        }
        Ok(PlanningTask {
            space,
            actions,
            init,
            goal,
        })
    }

    pub fn n_props(&self) -> usize {
        self.space.n_props()
    }

    pub fn is_goal(&self, state: &State) -> bool {
        self.goal.is_subset(state)
    }

    /// Applicable actions in task order, with their successor states.
    pub fn successors(&self, state: &State) -> Vec<(usize, State)> {
        let mut out = Vec::new();
        self.for_each_successor(state, |i, s| out.push((i, s)));
        out
    }

    pub(crate) fn for_each_successor(&self, state: &State, mut f: impl FnMut(usize, State)) {
        for (i, a) in self.actions.iter().enumerate() {
            if a.pre.is_subset(state) {
                f(i, a.apply_unchecked(state));
            }
        }
    }

    pub fn applicable_count(&self, state: &State) -> usize {
        self.actions
            .iter()
            .filter(|a| a.pre.is_subset(state))
            .count()
    }

    /// Replays `plan` from the initial state.
    pub fn check_plan(&self, plan: &Plan) -> Result<PlanCheck, StripsError> {
        let mut trace = vec![self.init.clone()];
        for (step, &index) in plan.steps.iter().enumerate() {
            let action = self.actions.get(index).ok_or(StripsError::ActionIndex {
                step,
                index,
                n_actions: self.actions.len(),
            })?;
            let current = trace.last().expect("trace starts non-empty");
            if !action.pre.is_subset(current) {
                return Ok(PlanCheck {
                    feasible: false,
                    trace,
                    failure: Some(PlanFailure::Step(step)),
                });
            }
            let next = action.apply_unchecked(current);
            trace.push(next);
        }
        let reached = self.is_goal(trace.last().expect("trace starts non-empty"));
        Ok(PlanCheck {
            feasible: reached,
            trace,
            failure: (!reached).then_some(PlanFailure::Goal),
        })
    }
}
