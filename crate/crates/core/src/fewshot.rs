//! N-way K-shot episode sampling.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FewShotEpisode {
    pub way: usize,
    pub shot: usize,
    pub queries_per_class: usize,
    /// Dataset class behind each episode class; episode class `i` is `classes[i]`.
    pub classes: Vec<usize>,
    /// `(sample index, episode class)`, `way * shot` entries.
    pub support: Vec<(usize, usize)>,
    /// `(sample index, episode class)`, `way * queries_per_class` entries.
    pub query: Vec<(usize, usize)>,
    pub seed: u64,
    pub run: usize,
}

/// Draws `runs` episodes over samples labelled by `labels`.
///
/// Run `r` uses a ChaCha8 generator seeded with `seed` on stream `r`, so each
/// episode is reproducible on its own. Within an episode, `way` classes are
/// drawn without replacement, then `shot + queries_per_class` distinct
/// samples of each; the first `shot` become support.
pub fn make_fewshot_episodes(
    labels: &[usize],
    num_classes: usize,
    way: usize,
    shot: usize,
    queries_per_class: usize,
    runs: usize,
    seed: u64,
) -> Result<Vec<FewShotEpisode>> {
    if way == 0 || shot == 0 || queries_per_class == 0 {
        return Err(Error::InvalidArgument(format!(
            "way, shot and queries must be >= 1 (got {way}, {shot}, {queries_per_class})"
        )));
    }
    if way > num_classes {
        return Err(Error::InvalidArgument(format!(
            "{way}-way episodes need at least {way} classes, dataset has {num_classes}"
        )));
    }
    let mut members = vec![Vec::new(); num_classes];
    for (i, &l) in labels.iter().enumerate() {
        let bucket = members.get_mut(l).ok_or_else(|| {
            Error::InvalidInput(format!(
                "sample {i} has label {l}, outside [0, {num_classes})"
            ))
        })?;
        bucket.push(i);
    }
    let need = shot + queries_per_class;

    let mut episodes = Vec::with_capacity(runs);
    for run in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(run as u64);
        let classes = rand::seq::index::sample(&mut rng, num_classes, way).into_vec();
        let mut support = Vec::with_capacity(way * shot);
        let mut query = Vec::with_capacity(way * queries_per_class);
        for (episode_class, &class) in classes.iter().enumerate() {
            let pool = &members[class];
            if pool.len() < need {
                return Err(Error::InsufficientSamples {
                    class,
                    available: pool.len(),
                    required: need,
                });
            }
            let picks = rand::seq::index::sample(&mut rng, pool.len(), need);
            for (n, p) in picks.iter().enumerate() {
                let entry = (pool[p], episode_class);
                if n < shot {
                    support.push(entry);
                } else {
                    query.push(entry);
                }
            }
        }
        episodes.push(FewShotEpisode {
            way,
            shot,
            queries_per_class,
            classes,
            support,
            query,
            seed,
            run,
        });
    }
    Ok(episodes)
}
