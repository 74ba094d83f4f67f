//! Synthetic ground-truth domains with controlled model corruption.
//!
//! A lab couples a latent STRIPS domain (what the planner sees) with a
//! manifest describing what every latent proposition means in the
//! ground-truth puzzle and which actions were injected as spurious. The
//! manifest is what lets [`validate_plan`] judge plans the way a
//! domain-specific validator would.

mod ground;
mod hanoi;
mod tile;

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decoder::DecoderConfig;
use crate::pddl::{ParsedDomain, ParsedProblem};
use crate::strips::{Plan, PlanningTask, State, StripsError};

pub use ground::{Configuration, GroundDomain};
pub use hanoi::synth_hanoi;
pub use tile::synth_tile;

pub const MANIFEST_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid lab specification: {0}")]
    Spec(String),
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("could not generate {wanted} instances with depth in {min}..={max} after {attempts} walks")]
    Generation {
        wanted: usize,
        min: u64,
        max: u64,
        attempts: usize,
    },
    #[error("plan is not feasible in the latent model")]
    Infeasible,
    #[error(transparent)]
    Strips(#[from] StripsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroundTruthSpec {
    /// `grid`×`grid` sliding puzzle, tiles rendered as `patch`×`patch` pixels.
    Tile { grid: usize, patch: usize, maxval: u32 },
    Hanoi {
        pegs: usize,
        disks: usize,
        disk_height: usize,
        unit_width: usize,
        maxval: u32,
    },
}

impl GroundTruthSpec {
    pub fn tile(grid: usize) -> Self {
        GroundTruthSpec::Tile {
            grid,
            patch: 6,
            maxval: 255,
        }
    }

    pub fn hanoi(pegs: usize, disks: usize) -> Self {
        GroundTruthSpec::Hanoi {
            pegs,
            disks,
            disk_height: 2,
            unit_width: 2,
            maxval: 255,
        }
    }

    pub fn ground_domain(&self) -> GroundDomain {
        match *self {
            GroundTruthSpec::Tile { grid, .. } => GroundDomain::Tile { grid },
            GroundTruthSpec::Hanoi { pegs, disks, .. } => GroundDomain::Hanoi { pegs, disks },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionConfig {
    pub seed: u64,
    /// Spurious actions added, as a fraction of the real action count.
    pub spurious_action_rate: f64,
    /// Probability a spurious action loses one precondition.
    pub weaken_pre_rate: f64,
    /// Probability a spurious action keeps its source proposition (no delete).
    pub duplicate_effect_rate: f64,
}

impl CorruptionConfig {
    pub fn none() -> Self {
        CorruptionConfig {
            seed: 0,
            spurious_action_rate: 0.0,
            weaken_pre_rate: 0.0,
            duplicate_effect_rate: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), LabError> {
        for (name, r) in [
            ("spurious_action_rate", self.spurious_action_rate),
            ("weaken_pre_rate", self.weaken_pre_rate),
            ("duplicate_effect_rate", self.duplicate_effect_rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return Err(LabError::Spec(format!("{name} must be in [0, 1], got {r}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Meaning {
    Tile { cell: usize, tile: usize },
    Hanoi { disk: usize, peg: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropositionEntry {
    pub index: usize,
    pub name: String,
    #[serde(flatten)]
    pub meaning: Meaning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionTag {
    Real,
    Spurious,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionEntry {
    pub name: String,
    pub tag: ActionTag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabManifest {
    pub format_version: u32,
    pub domain_name: String,
    pub ground_truth: GroundTruthSpec,
    pub corruption: CorruptionConfig,
    pub decoder: DecoderConfig,
    pub propositions: Vec<PropositionEntry>,
    pub actions: Vec<ActionEntry>,
}

impl LabManifest {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, LabError> {
        let m: LabManifest = toml::from_str(text).map_err(|e| LabError::Manifest(e.to_string()))?;
        m.check()?;
        Ok(m)
    }

    /// Every proposition index appears once, and every ground fact once.
    pub fn check(&self) -> Result<(), LabError> {
        if self.format_version != MANIFEST_FORMAT_VERSION {
            return Err(LabError::Manifest(format!(
                "unsupported format_version {}",
                self.format_version
            )));
        }
        let ground = self.ground_truth.ground_domain();
        let (rows, cols) = ground.fact_shape();
        if self.propositions.len() != rows * cols {
            return Err(LabError::Manifest(format!(
                "expected {} propositions, found {}",
                rows * cols,
                self.propositions.len()
            )));
        }
        let mut seen_index = vec![false; self.propositions.len()];
        let mut seen_fact = vec![false; rows * cols];
        for p in &self.propositions {
            let (r, c) = ground
                .fact_of(p.meaning)
                .ok_or_else(|| LabError::Manifest(format!("proposition {} has foreign meaning", p.index)))?;
            if p.index >= seen_index.len() || std::mem::replace(&mut seen_index[p.index], true) {
                return Err(LabError::Manifest(format!("proposition index {} repeated or out of range", p.index)));
            }
            if r >= rows || c >= cols || std::mem::replace(&mut seen_fact[r * cols + c], true) {
                return Err(LabError::Manifest(format!("proposition {} maps to a repeated fact", p.index)));
            }
        }
        if self.decoder.n_props() != self.propositions.len() {
            return Err(LabError::Manifest("decoder width differs from proposition count".into()));
        }
        Ok(())
    }

    pub fn semantics(&self) -> Semantics {
        Semantics::new(self)
    }

    pub fn n_props(&self) -> usize {
        self.propositions.len()
    }

    pub fn tag_of(&self, action_name: &str) -> Option<ActionTag> {
        self.actions.iter().find(|a| a.name == action_name).map(|a| a.tag)
    }
}

/// Bidirectional map between latent bits and ground facts.
#[derive(Debug, Clone)]
pub struct Semantics {
    ground: GroundDomain,
    fact_of_bit: Vec<(usize, usize)>,
    bit_of_fact: HashMap<(usize, usize), usize>,
}

impl Semantics {
    fn new(manifest: &LabManifest) -> Self {
        let ground = manifest.ground_truth.ground_domain();
        let mut fact_of_bit = vec![(0, 0); manifest.propositions.len()];
        let mut bit_of_fact = HashMap::new();
        for p in &manifest.propositions {
            let fact = ground.fact_of(p.meaning).expect("checked manifest");
            fact_of_bit[p.index] = fact;
            bit_of_fact.insert(fact, p.index);
        }
        Semantics {
            ground,
            fact_of_bit,
            bit_of_fact,
        }
    }

    pub fn ground(&self) -> &GroundDomain {
        &self.ground
    }

    pub fn n_props(&self) -> usize {
        self.fact_of_bit.len()
    }

    pub fn encode(&self, config: &Configuration) -> State {
        State::from_indices(
            self.n_props(),
            self.ground
                .facts(config)
                .into_iter()
                .map(|f| self.bit_of_fact[&f]),
        )
    }

    /// The ground configuration a state denotes, if its bits form exactly one.
    pub fn interpret(&self, state: &State) -> Option<Configuration> {
        if state.len() != self.n_props() {
            return None;
        }
        self.ground
            .configuration_from_facts(state.iter().map(|b| self.fact_of_bit[b]))
    }
}

#[derive(Debug, Clone)]
pub struct Lab {
    pub domain: ParsedDomain,
    pub manifest: LabManifest,
}

impl Lab {
    pub fn domain_text(&self) -> String {
        self.domain.to_string()
    }

    pub fn decoder_config(&self) -> &DecoderConfig {
        &self.manifest.decoder
    }

    pub fn semantics(&self) -> Semantics {
        self.manifest.semantics()
    }

    pub fn problem(&self, name: &str, init: &Configuration) -> ParsedProblem {
        let sem = self.semantics();
        let names = |s: &State| -> Vec<String> {
            s.iter().map(|i| self.domain.predicates[i].clone()).collect()
        };
        ParsedProblem {
            name: name.to_string(),
            domain_name: self.domain.name.clone(),
            init: names(&sem.encode(init)),
            goal: names(&sem.encode(&sem.ground().goal())),
        }
    }

    pub fn task(&self, init: &Configuration) -> PlanningTask {
        crate::pddl::link(&self.domain, &self.problem("p", init)).expect("lab domains link")
    }
}

pub fn synth(spec: &GroundTruthSpec, corruption: &CorruptionConfig) -> Result<Lab, LabError> {
    match spec {
        GroundTruthSpec::Tile { .. } => synth_tile(spec, corruption),
        GroundTruthSpec::Hanoi { .. } => synth_hanoi(spec, corruption),
    }
}

/// A latent action template over ground facts.
#[derive(Debug, Clone)]
struct FactAction {
    pre: Vec<(usize, usize)>,
    add: Vec<(usize, usize)>,
    del: Vec<(usize, usize)>,
}

/// Mutates a spurious template: maybe drop one precondition, maybe keep the
/// source fact (`del[0]` by convention) instead of deleting it.
fn corrupt(mut a: FactAction, cfg: &CorruptionConfig, rng: &mut ChaCha8Rng) -> FactAction {
    if rng.random_bool(cfg.weaken_pre_rate) && !a.pre.is_empty() {
        let i = rng.random_range(0..a.pre.len());
        a.pre.remove(i);
    }
    if rng.random_bool(cfg.duplicate_effect_rate) && !a.del.is_empty() {
        a.del.remove(0);
    }
    a
}

/// Shuffles real and spurious actions together and names them `a0..`, so
/// the domain text carries no hint of which is which.
fn assemble(
    domain_name: String,
    spec: &GroundTruthSpec,
    corruption: &CorruptionConfig,
    decoder: DecoderConfig,
    meanings: Vec<Meaning>,
    real: Vec<FactAction>,
    spurious: Vec<FactAction>,
    rng: &mut ChaCha8Rng,
) -> Lab {
    use rand::seq::SliceRandom;
    let ground = spec.ground_domain();
    let (_, cols) = ground.fact_shape();
    let bit = |f: &(usize, usize)| f.0 * cols + f.1;
    let predicates: Vec<String> = (0..meanings.len()).map(|i| format!("z{i}")).collect();
    let mut tagged: Vec<(FactAction, ActionTag)> = real
        .into_iter()
        .map(|a| (a, ActionTag::Real))
        .chain(spurious.into_iter().map(|a| (a, ActionTag::Spurious)))
        .collect();
    tagged.shuffle(rng);
    let mut actions = Vec::with_capacity(tagged.len());
    let mut entries = Vec::with_capacity(tagged.len());
    for (i, (a, tag)) in tagged.into_iter().enumerate() {
        let name = format!("a{i}");
        let names = |facts: &[(usize, usize)]| -> Vec<String> {
            let mut idx: Vec<usize> = facts.iter().map(bit).collect();
            idx.sort_unstable();
            idx.dedup();
            idx.into_iter().map(|b| predicates[b].clone()).collect()
        };
        actions.push(crate::pddl::ParsedAction {
            name: name.clone(),
            pre: names(&a.pre),
            add: names(&a.add),
            del: names(&a.del),
        });
        entries.push(ActionEntry { name, tag });
    }
    let propositions = meanings
        .into_iter()
        .enumerate()
        .map(|(index, meaning)| PropositionEntry {
            index,
            name: predicates[index].clone(),
            meaning,
        })
        .collect();
    let manifest = LabManifest {
        format_version: MANIFEST_FORMAT_VERSION,
        domain_name: domain_name.clone(),
        ground_truth: spec.clone(),
        corruption: corruption.clone(),
        decoder,
        propositions,
        actions: entries,
    };
    Lab {
        domain: ParsedDomain {
            name: domain_name,
            predicates,
            actions,
        },
        manifest,
    }
}

fn spurious_count(n_real: usize, rate: f64) -> usize {
    (n_real as f64 * rate).round() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub name: String,
    pub init: Configuration,
    pub oracle_distance: u64,
}

/// Random walks from the goal configuration, kept when their breadth-first
/// distance falls in `min_depth..=max_depth`.
pub fn gen_instances(
    manifest: &LabManifest,
    count: usize,
    min_depth: u64,
    max_depth: u64,
    seed: u64,
) -> Result<Vec<Instance>, LabError> {
    if min_depth > max_depth {
        return Err(LabError::Spec(format!("min_depth {min_depth} exceeds max_depth {max_depth}")));
    }
    let ground = manifest.ground_truth.ground_domain();
    let goal = ground.goal();
    let layers = ground.distances_from(&goal, Some(max_depth));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_walk = 2 * max_depth + 2;
    let attempts = 1000 * count.max(1);
    let mut out = Vec::with_capacity(count);
    for _ in 0..attempts {
        if out.len() == count {
            break;
        }
        let steps = rng.random_range(min_depth..=max_walk);
        let mut config = goal.clone();
        for _ in 0..steps {
            let next = ground.neighbors(&config);
            config = next[rng.random_range(0..next.len())].clone();
        }
        if let Some(&d) = layers.get(&config) {
            if (min_depth..=max_depth).contains(&d) {
                out.push(Instance {
                    name: format!("p{:02}", out.len() + 1),
                    init: config,
                    oracle_distance: d,
                });
            }
        }
    }
    if out.len() < count {
        return Err(LabError::Generation {
            wanted: count,
            min: min_depth,
            max: max_depth,
            attempts,
        });
    }
    Ok(out)
}

/// Breadth-first distance to the goal in the uncorrupted ground-truth system.
pub fn oracle_distance(manifest: &LabManifest, init: &Configuration) -> Option<u64> {
    let ground = manifest.ground_truth.ground_domain();
    ground.distance(init, &ground.goal())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub valid: bool,
    /// Index into the plan's state trace of the first state that is not a
    /// legal configuration or not reachable by one legal move.
    pub first_bad_state: Option<usize>,
    pub c_optimal: bool,
    /// `None` when the initial state is not ground-valid or cannot reach the goal.
    pub oracle_distance: Option<u64>,
}

/// Judges a latent-feasible plan against the ground truth.
pub fn validate_plan(manifest: &LabManifest, task: &PlanningTask, plan: &Plan) -> Result<Verdict, LabError> {
    let check = task.check_plan(plan)?;
    if !check.feasible {
        return Err(LabError::Infeasible);
    }
    let sem = manifest.semantics();
    if sem.n_props() != task.n_props() {
        return Err(LabError::Manifest("manifest and task widths differ".into()));
    }
    let ground = sem.ground();
    let mut first_bad = None;
    let mut prev: Option<Configuration> = None;
    for (i, s) in check.trace.iter().enumerate() {
        let config = sem.interpret(s);
        let ok = match (&prev, &config) {
            (_, None) => false,
            (None, Some(_)) => true,
            (Some(a), Some(b)) => ground.is_move(a, b),
        };
        if !ok {
            first_bad = Some(i);
            break;
        }
        prev = config;
    }
    let oracle = sem
        .interpret(&task.init)
        .and_then(|c| ground.distance(&c, &ground.goal()));
    let valid = first_bad.is_none();
    Ok(Verdict {
        valid,
        first_bad_state: first_bad,
        c_optimal: valid && oracle == Some(plan.len() as u64),
        oracle_distance: oracle,
    })
}
