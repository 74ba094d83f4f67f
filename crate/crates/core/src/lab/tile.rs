use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{assemble, corrupt, spurious_count, CorruptionConfig, FactAction, GroundDomain, GroundTruthSpec, Lab, LabError, Meaning};
use crate::decoder::{DecoderConfig, DecoderKind};

/// Sliding-tile lab: one proposition per (cell, tile). Real actions slide a
/// tile into the adjacent blank. Spurious actions start as blank swaps with
/// a non-adjacent cell and are then corrupted per `corruption`.
pub fn synth_tile(spec: &GroundTruthSpec, corruption: &CorruptionConfig) -> Result<Lab, LabError> {
    let GroundTruthSpec::Tile { grid, patch, maxval } = *spec else {
        return Err(LabError::Spec("synth_tile needs a tile spec".into()));
    };
    corruption.validate()?;
    if grid < 2 || grid * grid > 255 {
        return Err(LabError::Spec(format!("unsupported grid size {grid}")));
    }
    let decoder = DecoderConfig::new(DecoderKind::TileCompositor { grid, patch, maxval });
    decoder
        .validate()
        .map_err(|e| LabError::Spec(e.to_string()))?;

    let cells = grid * grid;
    let slide = |blank: usize, from: usize, tile: usize| FactAction {
        // del[0] is the source fact so duplication keeps the tile behind.
        pre: vec![(blank, 0), (from, tile)],
        add: vec![(blank, tile), (from, 0)],
        del: vec![(from, tile), (blank, 0)],
    };

    let mut real = Vec::new();
    for blank in 0..cells {
        for from in GroundDomain::tile_neighbors(grid, blank) {
            for tile in 1..cells {
                real.push(slide(blank, from, tile));
            }
        }
    }

    let mut far_pairs = Vec::new();
    for a in 0..cells {
        let near = GroundDomain::tile_neighbors(grid, a);
        for b in 0..cells {
            if a != b && !near.contains(&b) {
                far_pairs.push((a, b));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(corruption.seed);
    let spurious = (0..spurious_count(real.len(), corruption.spurious_action_rate))
        .map(|_| {
            let (blank, from) = far_pairs[rng.random_range(0..far_pairs.len())];
            let tile = rng.random_range(1..cells);
            corrupt(slide(blank, from, tile), corruption, &mut rng)
        })
        .collect();

    let meanings = (0..cells)
        .flat_map(|cell| (0..cells).map(move |tile| Meaning::Tile { cell, tile }))
        .collect();
    Ok(assemble(
        format!("tile{grid}x{grid}"),
        spec,
        corruption,
        decoder,
        meanings,
        real,
        spurious,
        &mut rng,
    ))
}
