use std::collections::{HashMap, HashSet, VecDeque};

use super::Meaning;

/// A ground-truth configuration. Tile: `config[cell] = tile`.
/// Hanoi: `config[disk - 1] = peg`.
pub type Configuration = Vec<u8>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroundDomain {
    Tile { grid: usize },
    Hanoi { pegs: usize, disks: usize },
}

impl GroundDomain {
    /// Ground facts form a `rows × cols` table; fact `(r, c)` is latent bit
    /// `r * cols + c` in generated labs.
    pub fn fact_shape(&self) -> (usize, usize) {
        match *self {
            GroundDomain::Tile { grid } => (grid * grid, grid * grid),
            GroundDomain::Hanoi { pegs, disks } => (disks, pegs),
        }
    }

    pub fn fact_of(&self, meaning: Meaning) -> Option<(usize, usize)> {
        let (rows, cols) = self.fact_shape();
        let fact = match (self, meaning) {
            (GroundDomain::Tile { .. }, Meaning::Tile { cell, tile }) => (cell, tile),
            (GroundDomain::Hanoi { .. }, Meaning::Hanoi { disk, peg }) if disk >= 1 => (disk - 1, peg),
            _ => return None,
        };
        (fact.0 < rows && fact.1 < cols).then_some(fact)
    }

    pub fn meaning_of(&self, fact: (usize, usize)) -> Meaning {
        match self {
            GroundDomain::Tile { .. } => Meaning::Tile {
                cell: fact.0,
                tile: fact.1,
            },
            GroundDomain::Hanoi { .. } => Meaning::Hanoi {
                disk: fact.0 + 1,
                peg: fact.1,
            },
        }
    }

    pub fn facts(&self, config: &Configuration) -> Vec<(usize, usize)> {
        config.iter().enumerate().map(|(r, &c)| (r, c as usize)).collect()
    }

    /// Inverse of [`facts`](Self::facts): `None` unless the facts describe
    /// exactly one legal configuration (no missing or duplicated entries).
    pub fn configuration_from_facts(
        &self,
        facts: impl IntoIterator<Item = (usize, usize)>,
    ) -> Option<Configuration> {
        let (rows, cols) = self.fact_shape();
        let mut config: Vec<Option<u8>> = vec![None; rows];
        for (r, c) in facts {
            if config[r].replace(c as u8).is_some() {
                return None;
            }
        }
        let config: Configuration = config.into_iter().collect::<Option<_>>()?;
        if let GroundDomain::Tile { .. } = self {
            let mut used = vec![false; cols];
            for &t in &config {
                if std::mem::replace(&mut used[t as usize], true) {
                    return None;
                }
            }
        }
        Some(config)
    }

    pub fn goal(&self) -> Configuration {
        match *self {
            GroundDomain::Tile { grid } => (0..grid * grid).map(|t| t as u8).collect(),
            GroundDomain::Hanoi { pegs, disks } => vec![(pegs - 1) as u8; disks],
        }
    }

    /// Orthogonally adjacent cells of `cell`, in up/down/left/right order.
    pub fn tile_neighbors(grid: usize, cell: usize) -> Vec<usize> {
        let (r, c) = (cell / grid, cell % grid);
        let mut out = Vec::with_capacity(4);
        if r > 0 {
            out.push(cell - grid);
        }
        if r + 1 < grid {
            out.push(cell + grid);
        }
        if c > 0 {
            out.push(cell - 1);
        }
        if c + 1 < grid {
            out.push(cell + 1);
        }
        out
    }

    /// Smallest disk on `peg`, if any (1-based).
    fn top_disk(config: &Configuration, peg: usize) -> Option<usize> {
        config.iter().position(|&p| p as usize == peg).map(|d| d + 1)
    }

    /// Configurations one legal move away, in a fixed order.
    pub fn neighbors(&self, config: &Configuration) -> Vec<Configuration> {
        match *self {
            GroundDomain::Tile { grid } => {
                let blank = config.iter().position(|&t| t == 0).expect("tile config has a blank");
                Self::tile_neighbors(grid, blank)
                    .into_iter()
                    .map(|n| {
                        let mut next = config.clone();
                        next.swap(blank, n);
                        next
                    })
                    .collect()
            }
            GroundDomain::Hanoi { pegs, .. } => {
                let mut out = Vec::new();
                for from in 0..pegs {
                    let Some(disk) = Self::top_disk(config, from) else {
                        continue;
                    };
                    for to in 0..pegs {
                        if to == from {
                            continue;
                        }
                        if Self::top_disk(config, to).is_some_and(|t| t < disk) {
                            continue;
                        }
                        let mut next = config.clone();
                        next[disk - 1] = to as u8;
                        out.push(next);
                    }
                }
                out
            }
        }
    }

    /// Whether `b` follows from `a` by exactly one legal move.
    pub fn is_move(&self, a: &Configuration, b: &Configuration) -> bool {
        self.neighbors(a).iter().any(|n| n == b)
    }

    /// Breadth-first distances from `start`, optionally cut at `max_depth`.
    pub fn distances_from(&self, start: &Configuration, max_depth: Option<u64>) -> HashMap<Configuration, u64> {
        let mut dist = HashMap::new();
        dist.insert(start.clone(), 0);
        let mut queue = VecDeque::from([start.clone()]);
        while let Some(c) = queue.pop_front() {
            let d = dist[&c];
            if max_depth.is_some_and(|m| d >= m) {
                continue;
            }
            for n in self.neighbors(&c) {
                if !dist.contains_key(&n) {
                    dist.insert(n.clone(), d + 1);
                    queue.push_back(n);
                }
            }
        }
        dist
    }

    pub fn distance(&self, from: &Configuration, to: &Configuration) -> Option<u64> {
        let mut seen = HashSet::from([from.clone()]);
        let mut frontier = vec![from.clone()];
        let mut depth = 0;
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for c in frontier {
                if &c == to {
                    return Some(depth);
                }
                for n in self.neighbors(&c) {
                    if seen.insert(n.clone()) {
                        next.push(n);
                    }
                }
            }
            frontier = next;
            depth += 1;
        }
        None
    }
}
