//! Selective Kanerva coding.
//!
//! `K` prototypes are scattered uniformly over the unit hypercube and never
//! move. A state activates its `c₁`, `c₂` and `c₃` nearest prototypes
//! (Euclidean distance) in three blocks of a `3K` binary feature vector;
//! block `m` starts at offset `m·K`. One distance scan feeds all three
//! blocks: the `c₁` nearest are partitioned to the front, the `c₂` nearest
//! are then selected inside that prefix, and so on, so the blocks nest.
//!
//! Ties in distance go to the lower prototype index, which makes the
//! selection identical to the first `c` entries of a stable sort.

use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::Rng;

use crate::error::{Error, Result};
use crate::seed::{self, stream};

#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSet {
    count: usize,
    dim: usize,
    seed: u64,
    coords: Vec<f64>,
}

impl PrototypeSet {
    /// Draws `count` prototypes i.i.d. uniform in `[0, 1]^dim`.
    pub fn random(count: usize, dim: usize, seed: u64) -> Result<Self> {
        if count == 0 || dim == 0 {
            return Err(Error::config("prototype count and dimension must be positive"));
        }
        let mut rng = seed::rng(seed, stream::PROTOTYPES);
        let coords = (0..count * dim).map(|_| rng.random::<f64>()).collect();
        Ok(PrototypeSet { count, dim, seed, coords })
    }

    /// Like [`PrototypeSet::random`], additionally checking `count >= levels.c₁`.
    pub fn for_levels(count: usize, dim: usize, seed: u64, levels: &ResolutionLevels) -> Result<Self> {
        levels.check_against(count)?;
        Self::random(count, dim, seed)
    }

    /// Rebuilds a set from stored coordinates (e.g. a checkpoint).
    pub fn from_coords(count: usize, dim: usize, seed: u64, coords: Vec<f64>) -> Result<Self> {
        if count == 0 || dim == 0 || coords.len() != count * dim {
            return Err(Error::DimensionMismatch { expected: count * dim, got: coords.len() });
        }
        if let Some(&bad) = coords.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::StateOutOfRange(bad));
        }
        Ok(PrototypeSet { count, dim, seed, coords })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn prototype(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }
}

/// Active counts per resolution block, strictly decreasing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResolutionLevels([usize; 3]);

impl ResolutionLevels {
    pub const DEFAULT: ResolutionLevels = ResolutionLevels([500, 100, 25]);

    pub fn new(c1: usize, c2: usize, c3: usize) -> Result<Self> {
        if !(c1 > c2 && c2 > c3 && c3 > 0) {
            return Err(Error::config(alloc::format!(
                "resolution levels must be strictly decreasing and positive, got ({c1}, {c2}, {c3})"
            )));
        }
        Ok(ResolutionLevels([c1, c2, c3]))
    }

    pub fn counts(&self) -> [usize; 3] {
        self.0
    }

    /// Total active bits per feature vector.
    pub fn active(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn check_against(&self, prototypes: usize) -> Result<()> {
        if self.0[0] > prototypes {
            return Err(Error::config(alloc::format!("c1 = {} exceeds the {prototypes} prototypes", self.0[0])));
        }
        Ok(())
    }
}

impl Default for ResolutionLevels {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Sparse binary feature vector: sorted indices of the one-bits.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FeatureVector {
    len: usize,
    active: Vec<u32>,
}

impl FeatureVector {
    /// `active` must be sorted, unique and below `len`.
    pub fn from_sorted(len: usize, active: Vec<u32>) -> Result<Self> {
        if active.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("feature indices must be strictly increasing"));
        }
        if let Some(&last) = active.last() {
            if last as usize >= len {
                return Err(Error::DimensionMismatch { expected: len, got: last as usize + 1 });
            }
        }
        Ok(FeatureVector { len, active })
    }

    pub fn zeros(len: usize) -> Self {
        FeatureVector { len, active: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn active(&self) -> &[u32] {
        &self.active
    }

    pub fn count_active(&self) -> usize {
        self.active.len()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.active.binary_search(&(i as u32)).is_ok()
    }

    /// Active indices of block `m` (0-based) with the block offset removed.
    pub fn block(&self, m: usize, block_len: usize) -> impl Iterator<Item = usize> + '_ {
        let (lo, hi) = (m * block_len, (m + 1) * block_len);
        self.active.iter().map(|&i| i as usize).filter(move |&i| i >= lo && i < hi).map(move |i| i - lo)
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = alloc::vec![0.0; self.len];
        for &i in &self.active {
            v[i as usize] = 1.0;
        }
        v
    }
}

#[inline]
fn key_cmp(a: &(f64, u32), b: &(f64, u32)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Rearranges `keys` so that its first `c` entries are the `c` smallest
/// under (distance, index) order. Hoare-partition quickselect with a
/// median-of-three pivot; expected linear time.
pub fn select_smallest(keys: &mut [(f64, u32)], c: usize) {
    if c == 0 || c >= keys.len() {
        return;
    }
    let target = c - 1;
    let (mut lo, mut hi) = (0usize, keys.len() - 1);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        // median of three into keys[mid]
        if key_cmp(&keys[mid], &keys[lo]) == Ordering::Less {
            keys.swap(mid, lo);
        }
        if key_cmp(&keys[hi], &keys[lo]) == Ordering::Less {
            keys.swap(hi, lo);
        }
        if key_cmp(&keys[hi], &keys[mid]) == Ordering::Less {
            keys.swap(hi, mid);
        }
        let pivot = keys[mid];
        let (mut i, mut j) = (lo, hi);
        loop {
            while key_cmp(&keys[i], &pivot) == Ordering::Less {
                i += 1;
            }
            while key_cmp(&keys[j], &pivot) == Ordering::Greater {
                j -= 1;
            }
            if i >= j {
                break;
            }
            keys.swap(i, j);
            i += 1;
            j -= 1;
        }
        // keys[lo..=j] <= pivot <= keys[j+1..=hi]
        if target <= j {
            hi = j;
        } else {
            lo = j + 1;
        }
    }
}

/// Indices of the `c` smallest entries of `distances`, ascending by index.
/// Equal distances prefer the lower index.
pub fn quickselect_indices(distances: &[f64], c: usize) -> Vec<usize> {
    let mut keys: Vec<(f64, u32)> = distances.iter().enumerate().map(|(i, &d)| (d, i as u32)).collect();
    let c = c.min(keys.len());
    select_smallest(&mut keys, c);
    let mut out: Vec<usize> = keys[..c].iter().map(|k| k.1 as usize).collect();
    out.sort_unstable();
    out
}

/// Reusable scratch space for [`encode`].
#[derive(Debug, Clone, Default)]
pub struct Scratch {
    keys: Vec<(f64, u32)>,
}

/// Encodes one state. Distances are squared Euclidean, which preserves the
/// nearest-prototype order.
pub fn encode(
    protos: &PrototypeSet,
    levels: &ResolutionLevels,
    state: &[f64],
    scratch: &mut Scratch,
) -> Result<FeatureVector> {
    if state.len() != protos.dim {
        return Err(Error::DimensionMismatch { expected: protos.dim, got: state.len() });
    }
    if let Some(&bad) = state.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::StateOutOfRange(bad));
    }
    levels.check_against(protos.count)?;

    let keys = &mut scratch.keys;
    keys.clear();
    keys.extend(protos.coords.chunks_exact(protos.dim).enumerate().map(|(i, p)| {
        let d: f64 = p.iter().zip(state).map(|(a, b)| (a - b) * (a - b)).sum();
        (d, i as u32)
    }));

    let [c1, c2, c3] = levels.counts();
    select_smallest(keys, c1);
    select_smallest(&mut keys[..c1], c2);
    select_smallest(&mut keys[..c2], c3);

    let k = protos.count as u32;
    let mut active = Vec::with_capacity(levels.active());
    active.extend(keys[..c1].iter().map(|e| e.1));
    active.extend(keys[..c2].iter().map(|e| e.1 + k));
    active.extend(keys[..c3].iter().map(|e| e.1 + 2 * k));
    active.sort_unstable();
    Ok(FeatureVector { len: 3 * protos.count, active })
}

/// Prototype set plus levels plus scratch.
#[derive(Debug, Clone)]
pub struct SkcEncoder {
    pub prototypes: PrototypeSet,
    pub levels: ResolutionLevels,
    scratch: Scratch,
}

impl SkcEncoder {
    pub fn new(prototypes: PrototypeSet, levels: ResolutionLevels) -> Result<Self> {
        levels.check_against(prototypes.count)?;
        Ok(SkcEncoder { prototypes, levels, scratch: Scratch::default() })
    }

    pub fn feature_len(&self) -> usize {
        3 * self.prototypes.count
    }

    pub fn encode(&mut self, state: &[f64]) -> Result<FeatureVector> {
        encode(&self.prototypes, &self.levels, state, &mut self.scratch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Full stable sort by distance; the first `c` indices.
    fn sorted_prefix(d: &[f64], c: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..d.len()).collect();
        idx.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
        let mut out = idx[..c].to_vec();
        out.sort_unstable();
        out
    }

    #[test]
    fn small_selections() {
        assert_eq!(quickselect_indices(&[3.0, 1.0, 2.0], 2), vec![1, 2]);
        assert_eq!(quickselect_indices(&[3.0, 1.0, 2.0], 3), vec![0, 1, 2]);
        assert_eq!(quickselect_indices(&[3.0, 1.0, 2.0], 0), Vec::<usize>::new());
        // ties prefer low index
        assert_eq!(quickselect_indices(&[1.0, 1.0, 1.0, 0.0], 2), vec![0, 3]);
    }

    #[test]
    fn matches_full_sort_on_random_and_tied_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for round in 0..50 {
            let d: Vec<f64> = if round % 2 == 0 {
                (0..5000).map(|_| rng.random::<f64>()).collect()
            } else {
                (0..5000).map(|_| rng.random_range(0..20) as f64).collect()
            };
            for c in [1, 25, 100, 500, 4999, 5000] {
                assert_eq!(quickselect_indices(&d, c), sorted_prefix(&d, c));
            }
        }
    }

    #[test]
    fn prototypes_are_uniform_and_deterministic() {
        let p = PrototypeSet::random(5000, 30, 1).unwrap();
        assert_eq!(p.coords().len(), 150_000);
        assert!(p.coords().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(p, PrototypeSet::random(5000, 30, 1).unwrap());
        let tiny = PrototypeSet::random(4, 1, 3).unwrap();
        let mean = tiny.coords().iter().sum::<f64>() / 4.0;
        assert!((0.05..=0.95).contains(&mean));
        assert!(PrototypeSet::for_levels(100, 30, 0, &ResolutionLevels::DEFAULT).is_err());
    }

    #[test]
    fn levels_must_decrease() {
        assert!(ResolutionLevels::new(500, 100, 25).is_ok());
        assert!(ResolutionLevels::new(100, 100, 25).is_err());
        assert!(ResolutionLevels::new(10, 5, 0).is_err());
    }

    #[test]
    fn prototype_state_is_active_in_all_blocks() {
        let p = PrototypeSet::random(5000, 30, 7).unwrap();
        let mut enc = SkcEncoder::new(p.clone(), ResolutionLevels::DEFAULT).unwrap();
        let i = 1234;
        let x = enc.encode(p.prototype(i)).unwrap();
        assert_eq!(x.count_active(), 625);
        assert!(x.contains(i) && x.contains(5000 + i) && x.contains(10_000 + i));
    }

    #[test]
    fn encode_rejects_bad_states() {
        let p = PrototypeSet::random(200, 3, 7).unwrap();
        let mut enc = SkcEncoder::new(p, ResolutionLevels::new(50, 10, 5).unwrap()).unwrap();
        assert!(matches!(enc.encode(&[0.5, 0.5]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(enc.encode(&[0.5, 1.5, 0.5]), Err(Error::StateOutOfRange(_))));
    }
}
