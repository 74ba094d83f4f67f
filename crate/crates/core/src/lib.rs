//! Plausibility-guided STRIPS planning over learned, possibly flawed models.

pub mod decoder;
pub mod harness;
pub mod heuristics;
pub mod imaging;
pub mod lab;
pub mod pddl;
pub mod search;
pub mod strips;
