//! Best-first search (A* and GBFS) over a [`PlanningTask`].
//!
//! Open-list order is `(f, h, generation)`: lower f first, then lower h, then
//! FIFO. Goals are tested when a node is popped, so `expanded` counts every
//! popped, non-stale node including the goal node itself.

use std::cmp::Reverse;
use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::heuristics::{HValue, Heuristic};
use crate::strips::{Plan, PlanningTask, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Astar,
    Gbfs,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Astar => "astar",
            Algorithm::Gbfs => "gbfs",
        })
    }
}

/// Entries kept in memory before expanded h values spill to a sidecar file.
pub const H_VALUES_IN_MEMORY: usize = 1_000_000;

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub algorithm: Algorithm,
    pub max_expansions: Option<u64>,
    pub max_seconds: Option<f64>,
    pub reopen_closed: bool,
    /// Where expanded h values go once more than [`H_VALUES_IN_MEMORY`]
    /// accumulate. Without a path they all stay in memory.
    pub h_values_sidecar: Option<PathBuf>,
}

impl SearchConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        SearchConfig {
            algorithm,
            max_expansions: None,
            max_seconds: None,
            reopen_closed: algorithm == Algorithm::Astar,
            h_values_sidecar: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Solved,
    Exhausted,
    LimitReached,
    Error,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub expanded: u64,
    pub generated: u64,
    pub evaluated: u64,
    pub reopened: u64,
    pub max_branching: u64,
    pub wall_seconds: f64,
    /// h of every expanded node in pop order (`u64::MAX` for infinite).
    pub expanded_h_values: Vec<u64>,
    /// Present when h values overflowed to a sidecar file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_values_sidecar: Option<PathBuf>,
    /// Values of the recording evaluator on expanded nodes, when one is given.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub recorded_values: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub status: Status,
    pub plan: Option<Plan>,
    pub stats: SearchStats,
    pub error: Option<String>,
}

struct NodeInfo {
    g: u64,
    h: HValue,
    parent: Option<(usize, usize)>,
    closed: bool,
}

struct HLog {
    values: Vec<u64>,
    sidecar: Option<PathBuf>,
    writer: Option<BufWriter<File>>,
}

impl HLog {
    fn push(&mut self, v: u64) -> std::io::Result<()> {
        if let Some(w) = &mut self.writer {
            return writeln!(w, "{v}");
        }
        self.values.push(v);
        if self.values.len() > H_VALUES_IN_MEMORY {
            if let Some(path) = &self.sidecar {
                let mut w = BufWriter::new(File::create(path)?);
                for v in self.values.drain(..) {
                    writeln!(w, "{v}")?;
                }
                self.writer = Some(w);
            }
        }
        Ok(())
    }

    fn finish(mut self, stats: &mut SearchStats) -> std::io::Result<()> {
        if let Some(mut w) = self.writer.take() {
            w.flush()?;
            stats.h_values_sidecar = self.sidecar;
        }
        stats.expanded_h_values = self.values;
        Ok(())
    }
}

/// Runs best-first search. `recorder`, when given, is evaluated on every
/// expanded node but never influences the search order.
pub fn search(
    task: &PlanningTask,
    config: &SearchConfig,
    heuristic: &mut dyn Heuristic,
    mut recorder: Option<&mut dyn Heuristic>,
) -> SearchOutcome {
    let start = Instant::now();
    let mut stats = SearchStats::default();
    let mut hlog = HLog {
        values: Vec::new(),
        sidecar: config.h_values_sidecar.clone(),
        writer: None,
    };
    let astar = config.algorithm == Algorithm::Astar;

    let finish = |status: Status,
                  plan: Option<Plan>,
                  error: Option<String>,
                  mut stats: SearchStats,
                  hlog: HLog| {
        stats.wall_seconds = start.elapsed().as_secs_f64();
        let mut error = error;
        let mut status = status;
        if let Err(e) = hlog.finish(&mut stats) {
            status = Status::Error;
            error = Some(format!("writing h-value sidecar: {e}"));
        }
        SearchOutcome {
            status,
            plan,
            stats,
            error,
        }
    };

    let mut states: Vec<State> = Vec::new();
    let mut nodes: Vec<NodeInfo> = Vec::new();
    let mut index: HashMap<State, usize> = HashMap::new();
    // (f, h, generation, node, g at push)
    let mut open: BinaryHeap<Reverse<(u64, u64, u64, usize, u64)>> = BinaryHeap::new();
    let mut generation = 0u64;

    let f_of = |g: u64, h: HValue| if astar { g.saturating_add(h.0) } else { h.0 };

    let h0 = match heuristic.evaluate(task, &task.init) {
        Ok(h) => h,
        Err(e) => return finish(Status::Error, None, Some(e.to_string()), stats, hlog),
    };
    stats.evaluated += 1;
    states.push(task.init.clone());
    nodes.push(NodeInfo {
        g: 0,
        h: h0,
        parent: None,
        closed: false,
    });
    index.insert(task.init.clone(), 0);
    if !h0.is_infinite() {
        open.push(Reverse((f_of(0, h0), h0.0, generation, 0, 0)));
    }

    while let Some(Reverse((_, _, _, id, g_at_push))) = open.pop() {
        {
            let node = &nodes[id];
            if node.closed || node.g != g_at_push {
                continue; // stale entry
            }
        }
        if let Some(limit) = config.max_expansions {
            if stats.expanded >= limit {
                return finish(Status::LimitReached, None, None, stats, hlog);
            }
        }
        if let Some(limit) = config.max_seconds {
            if start.elapsed().as_secs_f64() >= limit {
                return finish(Status::LimitReached, None, None, stats, hlog);
            }
        }
        nodes[id].closed = true;
        stats.expanded += 1;
        let state = states[id].clone();
        if let Err(e) = hlog.push(nodes[id].h.0) {
            return finish(Status::Error, None, Some(format!("writing h-value sidecar: {e}")), stats, hlog);
        }
        if let Some(rec) = recorder.as_deref_mut() {
            match rec.evaluate(task, &state) {
                Ok(v) => stats.recorded_values.push(v.0),
                Err(e) => return finish(Status::Error, None, Some(e.to_string()), stats, hlog),
            }
        }

        if task.is_goal(&state) {
            let plan = extract_plan(&nodes, id);
            return match task.check_plan(&plan) {
                Ok(c) if c.feasible => finish(Status::Solved, Some(plan), None, stats, hlog),
                _ => finish(
                    Status::Error,
                    None,
                    Some("internal: extracted plan failed replay".into()),
                    stats,
                    hlog,
                ),
            };
        }

        let g = nodes[id].g;
        let mut successors = Vec::new();
        task.for_each_successor(&state, |a, s| successors.push((a, s)));
        stats.max_branching = stats.max_branching.max(successors.len() as u64);

        for (action, succ) in successors {
            stats.generated += 1;
            let new_g = g + 1;
            match index.entry(succ) {
                Entry::Occupied(e) => {
                    let sid = *e.get();
                    let node = &mut nodes[sid];
                    if new_g >= node.g || node.h.is_infinite() {
                        continue;
                    }
                    if node.closed {
                        if !config.reopen_closed {
                            continue;
                        }
                        node.closed = false;
                        stats.reopened += 1;
                    }
                    node.g = new_g;
                    node.parent = Some((id, action));
                    generation += 1;
                    open.push(Reverse((f_of(new_g, node.h), node.h.0, generation, sid, new_g)));
                }
                Entry::Vacant(e) => {
                    let h = match heuristic.evaluate(task, e.key()) {
                        Ok(h) => h,
                        Err(err) => {
                            return finish(Status::Error, None, Some(err.to_string()), stats, hlog)
                        }
                    };
                    stats.evaluated += 1;
                    let sid = nodes.len();
                    states.push(e.key().clone());
                    e.insert(sid);
                    nodes.push(NodeInfo {
                        g: new_g,
                        h,
                        parent: Some((id, action)),
                        closed: false,
                    });
                    if h.is_infinite() {
                        continue; // dead end: never expanded
                    }
                    generation += 1;
                    open.push(Reverse((f_of(new_g, h), h.0, generation, sid, new_g)));
                }
            }
        }
    }
    finish(Status::Exhausted, None, None, stats, hlog)
}

fn extract_plan(nodes: &[NodeInfo], mut id: usize) -> Plan {
    let mut steps = Vec::new();
    while let Some((parent, action)) = nodes[id].parent {
        steps.push(action);
        id = parent;
    }
    steps.reverse();
    Plan::new(steps)
}

/// Breadth-first distances from the initial state over the latent model,
/// up to `max_states` distinct states. Returns `None` if the cap is hit.
pub fn bfs_distances(task: &PlanningTask, max_states: usize) -> Option<HashMap<State, u64>> {
    let mut dist = HashMap::new();
    dist.insert(task.init.clone(), 0u64);
    let mut frontier = vec![task.init.clone()];
    let mut depth = 0;
    while !frontier.is_empty() {
        depth += 1;
        let mut next = Vec::new();
        for s in &frontier {
            for (_, succ) in task.successors(s) {
                if let Entry::Vacant(e) = dist.entry(succ) {
                    next.push(e.key().clone());
                    e.insert(depth);
                    if dist.len() > max_states {
                        return None;
                    }
                }
            }
        }
        frontier = next;
    }
    Some(dist)
}

/// Shortest latent plan length to any goal state, by breadth-first search.
pub fn bfs_goal_distance(task: &PlanningTask) -> Option<u64> {
    let mut seen = std::collections::HashSet::new();
    seen.insert(task.init.clone());
    let mut frontier = vec![task.init.clone()];
    let mut depth = 0;
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for s in &frontier {
            if task.is_goal(s) {
                return Some(depth);
            }
            for (_, succ) in task.successors(s) {
                if seen.insert(succ.clone()) {
                    next.push(succ);
                }
            }
        }
        frontier = next;
        depth += 1;
    }
    None
}
