use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::event::{ensure_unique_ids, Activity, TakeoverEvent};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train: 0.8,
            val: 0.1,
            test: 0.1,
            seed: 7,
        }
    }
}

impl SplitSpec {
    pub fn ratios(&self) -> [f64; 3] {
        [self.train, self.val, self.test]
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.ratios();
        if r.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::Config(format!("split ratios {r:?} must be >= 0")));
        }
        if self.train <= 0.0 {
            return Err(Error::Config("train ratio must be positive".into()));
        }
        if (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split ratios {r:?} must sum to 1")));
        }
        Ok(())
    }
}

/// Event indices of each split, in ascending order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EventSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl EventSplit {
    pub fn parts(&self) -> [&[usize]; 3] {
        [&self.train, &self.val, &self.test]
    }

    pub fn select<'a>(events: &'a [TakeoverEvent], idx: &[usize]) -> Vec<&'a TakeoverEvent> {
        idx.iter().map(|&i| &events[i]).collect()
    }
}

/// Hamilton apportionment of `n` items over `ratios`.
fn apportion(n: usize, ratios: &[f64; 3]) -> [usize; 3] {
    let quotas = ratios.map(|r| r * n as f64);
    let mut counts = quotas.map(|q| q.floor() as usize);
    let mut left = n - counts.iter().sum::<usize>();
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &s in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if ratios[s] > 0.0 {
            counts[s] += 1;
            left -= 1;
        }
    }
    counts
}

/// Seeded split, stratified by activity.
///
/// Split sizes follow Hamilton apportionment of the whole set; each activity
/// gets `floor(n_a * ratio)` events per split plus at most one of the
/// leftover slots, so per-activity counts stay within one event of the ratio.
pub fn split_events(events: &[TakeoverEvent], spec: &SplitSpec) -> Result<EventSplit> {
    spec.validate()?;
    if events.is_empty() {
        return Err(Error::Config("cannot split an empty event set".into()));
    }
    ensure_unique_ids(events)?;
    let ratios = spec.ratios();
    let totals = apportion(events.len(), &ratios);

    let groups: Vec<Vec<usize>> = Activity::ALL
        .iter()
        .map(|a| {
            (0..events.len())
                .filter(|&i| events[i].activity == *a)
                .collect()
        })
        .collect();

    let mut alloc: Vec<[usize; 3]> = groups
        .iter()
        .map(|g| ratios.map(|r| (r * g.len() as f64).floor() as usize))
        .collect();
    let mut demand: [usize; 3] =
        std::array::from_fn(|s| totals[s] - alloc.iter().map(|a| a[s]).sum::<usize>());

    // Activities with the most leftover events pick first; each takes its
    // leftovers from distinct splits with the largest remaining demand.
    let mut order: Vec<usize> = (0..groups.len()).collect();
    let leftover =
        |a: usize, alloc: &[[usize; 3]]| groups[a].len() - alloc[a].iter().sum::<usize>();
    order.sort_by_key(|&a| std::cmp::Reverse(leftover(a, &alloc)));
    for a in order {
        let n = groups[a].len() as f64;
        let mut need = leftover(a, &alloc);
        let mut splits = [0, 1, 2];
        splits.sort_by(|&x, &y| {
            demand[y].cmp(&demand[x]).then_with(|| {
                let fx = (ratios[x] * n).fract();
                let fy = (ratios[y] * n).fract();
                fy.total_cmp(&fx)
            })
        });
        for s in splits.into_iter().chain(splits) {
            if need == 0 {
                break;
            }
            if demand[s] > 0 {
                alloc[a][s] += 1;
                demand[s] -= 1;
                need -= 1;
            }
        }
        debug_assert_eq!(need, 0);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut split = EventSplit::default();
    for (group, counts) in groups.into_iter().zip(alloc) {
        let mut group = group;
        group.shuffle(&mut rng);
        let (train, rest) = group.split_at(counts[0]);
        let (val, test) = rest.split_at(counts[1]);
        split.train.extend_from_slice(train);
        split.val.extend_from_slice(val);
        split.test.extend_from_slice(test);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// Seeded subsample of `round(fraction * len)` indices, kept in ascending order.
pub fn subsample(indices: &[usize], fraction: f64, seed: u64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!(
            "fraction {fraction} must be in (0, 1]"
        )));
    }
    let n = (fraction * indices.len() as f64).round() as usize;
    let mut picked = indices.to_vec();
    if n < picked.len() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        picked.shuffle(&mut rng);
        picked.truncate(n);
        picked.sort_unstable();
    }
    Ok(picked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::event::testing::uniform_event;
    use crate::dataset::event::ComponentTimes;

    fn events(n: usize) -> Vec<TakeoverEvent> {
        let proto = uniform_event(
            "p",
            Activity::NoActivity,
            ComponentTimes::new(0.1, 0.2, 0.3),
        );
        (0..n)
            .map(|i| TakeoverEvent {
                event_id: format!("e{i}"),
                activity: Activity::ALL[i % 8],
                ..proto.clone()
            })
            .collect()
    }

    #[test]
    fn eighty_events() {
        let ev = events(80);
        let spec = SplitSpec::default();
        let s = split_events(&ev, &spec).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (64, 8, 8));
        let mut all: Vec<usize> = s.parts().concat();
        all.sort_unstable();
        assert_eq!(all, (0..80).collect::<Vec<_>>());
        assert_eq!(split_events(&ev, &spec).unwrap(), s);
        for a in Activity::ALL {
            for part in s.parts() {
                assert!(part.iter().any(|&i| ev[i].activity == a));
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(split_events(&[], &SplitSpec::default()).is_err());
        let bad = SplitSpec {
            train: 0.5,
            ..SplitSpec::default()
        };
        assert!(split_events(&events(10), &bad).is_err());
    }

    #[test]
    fn subsample_counts() {
        let idx: Vec<usize> = (0..64).collect();
        assert_eq!(subsample(&idx, 0.75, 1).unwrap().len(), 48);
        assert_eq!(subsample(&idx, 1.0, 1).unwrap(), idx);
        assert!(subsample(&idx, 0.0, 1).is_err());
    }
}
