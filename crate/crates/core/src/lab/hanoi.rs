use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{assemble, corrupt, spurious_count, CorruptionConfig, FactAction, GroundTruthSpec, Lab, LabError, Meaning};
use crate::decoder::{DecoderConfig, DecoderKind};

/// Move disk row `r` from peg `x` to `y` with each smaller disk `s` asserted
/// on `smaller[s]`.
fn move_action(r: usize, x: usize, y: usize, smaller: &[usize]) -> FactAction {
    let mut pre = vec![(r, x)];
    pre.extend(smaller.iter().enumerate().map(|(s, &p)| (s, p)));
    FactAction {
        pre,
        add: vec![(r, y)],
        del: vec![(r, x)],
    }
}

/// All peg assignments for `n` disks drawn from `allowed`.
fn assignments(n: usize, allowed: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                allowed.iter().map(move |&p| {
                    let mut v = prefix.clone();
                    v.push(p);
                    v
                })
            })
            .collect();
    }
    out
}

/// Towers-of-Hanoi lab: one proposition per (disk, peg). A real action moves
/// disk d from x to y and requires every smaller disk to sit elsewhere.
/// Spurious templates move a disk while a smaller one sits on the source or
/// destination peg.
pub fn synth_hanoi(spec: &GroundTruthSpec, corruption: &CorruptionConfig) -> Result<Lab, LabError> {
    let GroundTruthSpec::Hanoi {
        pegs,
        disks,
        disk_height,
        unit_width,
        maxval,
    } = *spec
    else {
        return Err(LabError::Spec("synth_hanoi needs a hanoi spec".into()));
    };
    corruption.validate()?;
    if pegs < 3 || pegs > 255 || disks < 1 {
        return Err(LabError::Spec(format!("unsupported hanoi size: {pegs} pegs, {disks} disks")));
    }
    let decoder = DecoderConfig::new(DecoderKind::HanoiRenderer {
        pegs,
        disks,
        disk_height,
        unit_width,
        maxval,
    });
    decoder
        .validate()
        .map_err(|e| LabError::Spec(e.to_string()))?;

    let mut real = Vec::new();
    for r in 0..disks {
        for x in 0..pegs {
            for y in 0..pegs {
                if x == y {
                    continue;
                }
                let others: Vec<usize> = (0..pegs).filter(|&p| p != x && p != y).collect();
                for smaller in assignments(r, &others) {
                    real.push(move_action(r, x, y, &smaller));
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(corruption.seed);
    let spurious = (0..spurious_count(real.len(), corruption.spurious_action_rate))
        .map(|_| {
            let x = rng.random_range(0..pegs);
            let mut y = rng.random_range(0..pegs - 1);
            if y >= x {
                y += 1;
            }
            let template = if disks == 1 {
                move_action(0, x, y, &[])
            } else {
                let r = rng.random_range(1..disks);
                let mut smaller: Vec<usize> = (0..r).map(|_| rng.random_range(0..pegs)).collect();
                if smaller.iter().all(|&p| p != x && p != y) {
                    let s = rng.random_range(0..r);
                    smaller[s] = if rng.random_bool(0.5) { x } else { y };
                }
                move_action(r, x, y, &smaller)
            };
            corrupt(template, corruption, &mut rng)
        })
        .collect();

    let meanings = (0..disks)
        .flat_map(|r| (0..pegs).map(move |peg| Meaning::Hanoi { disk: r + 1, peg }))
        .collect();
    Ok(assemble(
        format!("hanoi{pegs}p{disks}d"),
        spec,
        corruption,
        decoder,
        meanings,
        real,
        spurious,
        &mut rng,
    ))
}
