//! Shuffles, cyclic shuffles and the simplex decompositions they index.
//!
//! Permutations act on slot positions: a permutation `σ` with `map[k] = σ(k)`
//! sends the element in slot `k` to slot `σ(k)`, so the sequence
//! `(x_0, …, x_{n-1})` becomes `(x_{σ⁻¹(0)}, …, x_{σ⁻¹(n-1)})`. Indices are
//! zero-based in memory and one-based in JSON.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::random::Rng;

/// A permutation of `{0, …, n-1}` together with its signature.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SignedPermutation {
    map: Vec<usize>,
    sign: i8,
}

/// Signature of a permutation, from its cycle count.
pub fn signature(map: &[usize]) -> i8 {
    let n = map.len();
    let mut seen = vec![false; n];
    let mut transpositions = 0usize;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut k = start;
        while !seen[k] {
            seen[k] = true;
            k = map[k];
            len += 1;
        }
        transpositions += len - 1;
    }
    if transpositions % 2 == 0 {
        1
    } else {
        -1
    }
}

impl SignedPermutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        let mut hit = vec![false; n];
        for &m in &map {
            if m >= n || hit[m] {
                return Err(Error::InvalidInput(format!("{map:?} is not a permutation")));
            }
            hit[m] = true;
        }
        let sign = signature(&map);
        Ok(SignedPermutation { map, sign })
    }

    pub fn identity(n: usize) -> Self {
        SignedPermutation {
            map: (0..n).collect(),
            sign: 1,
        }
    }

    pub fn degree(&self) -> usize {
        self.map.len()
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn image(&self, k: usize) -> usize {
        self.map[k]
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &m)| i == m)
    }

    /// Moves `items[k]` to position `σ(k)`.
    pub fn apply<T: Clone>(&self, items: &[T]) -> Vec<T> {
        assert_eq!(items.len(), self.map.len(), "permutation degree mismatch");
        let mut out: Vec<Option<T>> = vec![None; items.len()];
        for (k, item) in items.iter().enumerate() {
            out[self.map[k]] = Some(item.clone());
        }
        out.into_iter().map(|x| x.expect("bijection")).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct PermutationRepr {
    images: Vec<usize>,
    sign: i8,
}

impl Serialize for SignedPermutation {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PermutationRepr {
            images: self.map.iter().map(|m| m + 1).collect(),
            sign: self.sign,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SignedPermutation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = PermutationRepr::deserialize(d)?;
        if repr.images.contains(&0) {
            return Err(serde::de::Error::custom("images are one-based"));
        }
        let p =
            SignedPermutation::new(repr.images.iter().map(|m| m - 1).collect()).map_err(serde::de::Error::custom)?;
        if p.sign != repr.sign {
            return Err(serde::de::Error::custom(format!(
                "stored sign {} disagrees with signature {}",
                repr.sign, p.sign
            )));
        }
        Ok(p)
    }
}

/// A point `0 ≤ t¹ ≤ … ≤ tⁿ ≤ 1` of the standard simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexPoint(Vec<f64>);

impl SimplexPoint {
    pub fn new(t: Vec<f64>) -> Result<Self> {
        let in_range = t.iter().all(|x| (0.0..=1.0).contains(x));
        let ordered = t.windows(2).all(|w| w[0] <= w[1]);
        if !in_range || !ordered {
            return Err(Error::SimplexOrder(t));
        }
        Ok(SimplexPoint(t))
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

pub fn factorial(n: u64) -> u128 {
    (1..=n as u128).product()
}

/// `(r + Σpᵢ)! / (r! p₁! ⋯ p_r!)`, the number of cyclic shuffles.
pub fn cyclic_shuffle_count(p: &[usize]) -> u128 {
    let total = p.len() as u64 + p.iter().map(|&x| x as u64).sum::<u64>();
    let mut count = 1u128;
    let mut placed = 0u64;
    for part in std::iter::once(p.len() as u64).chain(p.iter().map(|&x| x as u64)) {
        count *= binomial(placed + part, part);
        placed += part;
    }
    debug_assert_eq!(placed, total);
    count
}

/// All `(p, q)`-shuffles, ordered lexicographically by the positions taken by
/// the first block.
pub fn enumerate_shuffles(p: usize, q: usize) -> Vec<SignedPermutation> {
    let n = p + q;
    let mut out = Vec::with_capacity(binomial(n as u64, p as u64) as usize);
    let mut chosen = Vec::with_capacity(p);
    fn rec(start: usize, n: usize, p: usize, chosen: &mut Vec<usize>, out: &mut Vec<SignedPermutation>) {
        if chosen.len() == p {
            let mut map = chosen.clone();
            map.extend((0..n).filter(|i| !chosen.contains(i)));
            let sign = signature(&map);
            out.push(SignedPermutation { map, sign });
            return;
        }
        let remaining = p - chosen.len();
        for pos in start..=(n - remaining) {
            chosen.push(pos);
            rec(pos + 1, n, p, chosen, out);
            chosen.pop();
        }
    }
    rec(0, n, p, &mut chosen, &mut out);
    out
}

/// Offsets of each block `(0,i), …, (pᵢ,i)` in the lexicographic ordering.
fn block_offsets(p: &[usize]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(p.len() + 1);
    let mut acc = 0;
    for &pi in p {
        offsets.push(acc);
        acc += pi + 1;
    }
    offsets.push(acc);
    offsets
}

/// All `(p₁, …, p_r)`-cyclic shuffles of `r + Σpᵢ` elements.
///
/// Ordered by the interleaving pattern of blocks (lexicographic in block
/// labels), then by the rotation offsets.
pub fn enumerate_cyclic_shuffles(p: &[usize]) -> Result<Vec<SignedPermutation>> {
    let r = p.len();
    if r == 0 {
        return Err(Error::InvalidInput("cyclic shuffles need at least one block".into()));
    }
    let offsets = block_offsets(p);
    let n = offsets[r];
    let sizes: Vec<usize> = p.iter().map(|x| x + 1).collect();
    let mut out = Vec::with_capacity(cyclic_shuffle_count(p) as usize);

    let mut remaining = sizes.clone();
    let mut pattern = Vec::with_capacity(n);
    let mut rotations = vec![0usize; r];

    fn emit(
        pattern: &[usize],
        sizes: &[usize],
        offsets: &[usize],
        rotations: &mut [usize],
        out: &mut Vec<SignedPermutation>,
    ) {
        let r = sizes.len();
        loop {
            let mut map = vec![0usize; pattern.len()];
            let mut seen = vec![0usize; r];
            for (pos, &blk) in pattern.iter().enumerate() {
                let j = (rotations[blk] + seen[blk]) % sizes[blk];
                seen[blk] += 1;
                map[offsets[blk] + j] = pos;
            }
            let zero_columns_ordered = (1..r).all(|i| map[offsets[i - 1]] < map[offsets[i]]);
            if zero_columns_ordered {
                let sign = signature(&map);
                out.push(SignedPermutation { map, sign });
            }
            // odometer over rotation offsets, last block fastest
            let mut i = r;
            loop {
                if i == 0 {
                    rotations.iter_mut().for_each(|x| *x = 0);
                    return;
                }
                i -= 1;
                rotations[i] += 1;
                if rotations[i] < sizes[i] {
                    break;
                }
                rotations[i] = 0;
            }
        }
    }

    fn rec(
        remaining: &mut [usize],
        pattern: &mut Vec<usize>,
        n: usize,
        sizes: &[usize],
        offsets: &[usize],
        rotations: &mut [usize],
        out: &mut Vec<SignedPermutation>,
    ) {
        if pattern.len() == n {
            emit(pattern, sizes, offsets, rotations, out);
            return;
        }
        for blk in 0..remaining.len() {
            if remaining[blk] == 0 {
                continue;
            }
            remaining[blk] -= 1;
            pattern.push(blk);
            rec(remaining, pattern, n, sizes, offsets, rotations, out);
            pattern.pop();
            remaining[blk] += 1;
        }
    }

    rec(
        &mut remaining,
        &mut pattern,
        n,
        &sizes,
        &offsets,
        &mut rotations,
        &mut out,
    );
    Ok(out)
}

/// True if `perm` preserves the order within the first `p` and within the
/// last `q` elements.
pub fn is_shuffle(perm: &SignedPermutation, p: usize, q: usize) -> bool {
    perm.degree() == p + q
        && perm.map[..p].windows(2).all(|w| w[0] < w[1])
        && perm.map[p..].windows(2).all(|w| w[0] < w[1])
}

/// Checks both defining conditions of a `(p₁, …, p_r)`-cyclic shuffle.
pub fn is_cyclic_shuffle(perm: &SignedPermutation, p: &[usize]) -> bool {
    let offsets = block_offsets(p);
    let r = p.len();
    if r == 0 || perm.degree() != offsets[r] {
        return false;
    }
    if !(1..r).all(|i| perm.map[offsets[i - 1]] < perm.map[offsets[i]]) {
        return false;
    }
    (0..r).all(|i| {
        let block = &perm.map[offsets[i]..offsets[i + 1]];
        // a rotation of an increasing sequence has at most one descent, and
        // if it has one the last element is below the first
        let descents = block.windows(2).filter(|w| w[0] > w[1]).count();
        descents == 0 || (descents == 1 && block[block.len() - 1] < block[0])
    })
}

/// Whether `(s, t)` lies in the simplex `Σ(χ)` of the shuffle `χ`, i.e.
/// `χ(s, t)` is nondecreasing.
pub fn shuffle_region_contains(chi: &SignedPermutation, s: &SimplexPoint, t: &SimplexPoint) -> bool {
    let joined: Vec<f64> = s.coords().iter().chain(t.coords()).copied().collect();
    if joined.len() != chi.degree() {
        return false;
    }
    chi.apply(&joined).windows(2).all(|w| w[0] <= w[1])
}

/// The tuple `(s¹, s¹+t₁¹, …, s¹+t₁^{p₁}, …, s^r, …, s^r+t_r^{p_r})` mod 1.
pub fn cyclic_tuple(s: &[f64], t: &[&[f64]]) -> Vec<f64> {
    let mut out = Vec::new();
    for (si, ti) in s.iter().zip(t) {
        out.push(si.rem_euclid(1.0));
        out.extend(ti.iter().map(|x| (si + x).rem_euclid(1.0)));
    }
    out
}

/// Finds the cyclic shuffle `σ` with `(s, t₁, …, t_r) ∈ Σ(σ)`, or `None` on a
/// tie between coordinates (a measure-zero event).
pub fn cyclic_region_locate(p: &[usize], s: &SimplexPoint, t: &[SimplexPoint]) -> Option<SignedPermutation> {
    if s.degree() != p.len() || t.len() != p.len() || t.iter().zip(p).any(|(ti, &pi)| ti.degree() != pi) {
        return None;
    }
    let slices: Vec<&[f64]> = t.iter().map(|x| x.coords()).collect();
    locate_sorting_permutation(&cyclic_tuple(s.coords(), &slices)).filter(|perm| is_cyclic_shuffle(perm, p))
}

/// The permutation whose action sorts `w` ascending; `None` on ties.
fn locate_sorting_permutation(w: &[f64]) -> Option<SignedPermutation> {
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&a, &b| w[a].total_cmp(&w[b]));
    if order.windows(2).any(|pair| w[pair[0]] == w[pair[1]]) {
        return None;
    }
    let mut map = vec![0; w.len()];
    for (rank, &k) in order.iter().enumerate() {
        map[k] = rank;
    }
    let sign = signature(&map);
    Some(SignedPermutation { map, sign })
}

/// Monte-Carlo volume of one region of a simplex decomposition.
#[derive(Clone, Debug, Serialize)]
pub struct RegionVolume {
    pub permutation: SignedPermutation,
    pub hits: u64,
    pub volume: f64,
    pub std_error: f64,
    pub expected: f64,
}

/// Result of a volume-partition experiment.
#[derive(Clone, Debug, Serialize)]
pub struct PartitionStats {
    pub samples: u64,
    pub regions: Vec<RegionVolume>,
    /// Samples of the domain covered by no region or by more than one.
    pub coverage_failures: u64,
    /// Samples discarded because of ties.
    pub ties: u64,
    pub total_volume: f64,
    pub total_std_error: f64,
    pub expected_total: f64,
}

impl PartitionStats {
    /// Largest deviation of any region (and of the total) from its closed
    /// form, in units of its standard error.
    pub fn max_sigma(&self) -> f64 {
        let z = |est: f64, se: f64, exp: f64| {
            let d = (est - exp).abs();
            if se > 0.0 {
                d / se
            } else if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        };
        self.regions.iter().map(|r| z(r.volume, r.std_error, r.expected)).fold(
            z(self.total_volume, self.total_std_error, self.expected_total),
            f64::max,
        )
    }
}

fn proportion(hits: u64, samples: u64, scale: f64) -> (f64, f64) {
    if samples == 0 {
        return (0.0, 0.0);
    }
    let f = hits as f64 / samples as f64;
    (f * scale, (f * (1.0 - f) / samples as f64).sqrt() * scale)
}

/// Samples `Σᵖ × Σ^q` uniformly and records which shuffle regions contain
/// each sample. Each region should hold `1/(p+q)!` of volume.
pub fn shuffle_partition_volumes(p: usize, q: usize, samples: u64, seed: u64) -> PartitionStats {
    let shuffles = enumerate_shuffles(p, q);
    let mut hits = vec![0u64; shuffles.len()];
    let (mut failures, mut ties) = (0u64, 0u64);
    let mut rng = Rng::seeded(seed);
    for _ in 0..samples {
        let s = rng.simplex_point(p);
        let t = rng.simplex_point(q);
        let mut joined = s.clone();
        joined.extend(&t);
        let mut sorted = joined.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            ties += 1;
            continue;
        }
        let (s, t) = (SimplexPoint(s), SimplexPoint(t));
        let containing: Vec<usize> = (0..shuffles.len())
            .filter(|&k| shuffle_region_contains(&shuffles[k], &s, &t))
            .collect();
        match containing.as_slice() {
            [k] => hits[*k] += 1,
            _ => failures += 1,
        }
    }
    let domain = 1.0 / (factorial(p as u64) * factorial(q as u64)) as f64;
    let expected = 1.0 / factorial((p + q) as u64) as f64;
    let regions: Vec<RegionVolume> = shuffles
        .into_iter()
        .zip(&hits)
        .map(|(permutation, &h)| {
            let (volume, std_error) = proportion(h, samples, domain);
            RegionVolume {
                permutation,
                hits: h,
                volume,
                std_error,
                expected,
            }
        })
        .collect();
    let (total_volume, total_std_error) = proportion(hits.iter().sum(), samples, domain);
    PartitionStats {
        samples,
        regions,
        coverage_failures: failures,
        ties,
        total_volume,
        total_std_error,
        expected_total: domain,
    }
}

/// Samples the unit cube `[0,1]^{r+Σpᵢ}`, keeps the points of
/// `Σ^r × Σ^{p₁} × ⋯ × Σ^{p_r}` and locates their cyclic-shuffle region.
/// Each region should hold `1/(r+Σpᵢ)!`; the union `1/(r! p₁! ⋯ p_r!)`.
pub fn cyclic_partition_volumes(p: &[usize], samples: u64, seed: u64) -> Result<PartitionStats> {
    let perms = enumerate_cyclic_shuffles(p)?;
    let index: std::collections::HashMap<Vec<usize>, usize> = perms
        .iter()
        .enumerate()
        .map(|(k, perm)| (perm.map.clone(), k))
        .collect();
    let r = p.len();
    let n = r + p.iter().sum::<usize>();
    let mut hits = vec![0u64; perms.len()];
    let (mut failures, mut ties) = (0u64, 0u64);
    let mut rng = Rng::seeded(seed);
    for _ in 0..samples {
        let s: Vec<f64> = (0..r).map(|_| rng.uniform()).collect();
        let t: Vec<Vec<f64>> = p.iter().map(|&pi| (0..pi).map(|_| rng.uniform()).collect()).collect();
        let sorted = |v: &[f64]| v.windows(2).all(|w| w[0] <= w[1]);
        if !sorted(&s) || !t.iter().all(|ti| sorted(ti)) {
            continue;
        }
        let slices: Vec<&[f64]> = t.iter().map(|x| x.as_slice()).collect();
        match locate_sorting_permutation(&cyclic_tuple(&s, &slices)) {
            None => ties += 1,
            Some(perm) => match index.get(&perm.map) {
                Some(&k) => hits[k] += 1,
                None => failures += 1,
            },
        }
    }
    let expected = 1.0 / factorial(n as u64) as f64;
    let expected_total = 1.0
        / p.iter()
            .fold(factorial(r as u64), |acc, &pi| acc * factorial(pi as u64)) as f64;
    let regions: Vec<RegionVolume> = perms
        .into_iter()
        .zip(&hits)
        .map(|(permutation, &h)| {
            let (volume, std_error) = proportion(h, samples, 1.0);
            RegionVolume {
                permutation,
                hits: h,
                volume,
                std_error,
                expected,
            }
        })
        .collect();
    let (total_volume, total_std_error) = proportion(hits.iter().sum(), samples, 1.0);
    Ok(PartitionStats {
        samples,
        regions,
        coverage_failures: failures,
        ties,
        total_volume,
        total_std_error,
        expected_total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(t: &[f64]) -> SimplexPoint {
        SimplexPoint::new(t.to_vec()).unwrap()
    }

    #[test]
    fn shuffles_with_empty_block() {
        let s = enumerate_shuffles(0, 3);
        assert_eq!(s.len(), 1);
        assert!(s[0].is_identity());
        assert_eq!(s[0].sign(), 1);
    }

    #[test]
    fn one_one_shuffles() {
        let s = enumerate_shuffles(1, 1);
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].map(), s[0].sign()), (&[0, 1][..], 1));
        assert_eq!((s[1].map(), s[1].sign()), (&[1, 0][..], -1));
    }

    #[test]
    fn two_two_count() {
        assert_eq!(enumerate_shuffles(2, 2).len(), 6);
    }

    #[test]
    fn shuffle_counts_are_binomial() {
        for n in 0..=8 {
            for p in 0..=n {
                let s = enumerate_shuffles(p, n - p);
                assert_eq!(s.len() as u128, binomial(n as u64, p as u64));
                assert!(s
                    .iter()
                    .all(|x| is_shuffle(x, p, n - p) && x.sign() == signature(x.map())));
                let distinct: std::collections::HashSet<_> = s.iter().collect();
                assert_eq!(distinct.len(), s.len());
            }
        }
    }

    #[test]
    fn single_cyclic_shuffle() {
        let c = enumerate_cyclic_shuffles(&[0]).unwrap();
        assert_eq!(c.len(), 1);
        assert!(c[0].is_identity());
        assert!(enumerate_cyclic_shuffles(&[]).is_err());
    }

    #[test]
    fn cyclic_count_one_one() {
        assert_eq!(enumerate_cyclic_shuffles(&[1, 1]).unwrap().len(), 12);
        assert_eq!(cyclic_shuffle_count(&[1, 1]), 12);
    }

    #[test]
    fn single_block_cyclic_shuffles_are_rotations() {
        for n in 0..5usize {
            let c = enumerate_cyclic_shuffles(&[n]).unwrap();
            assert_eq!(c.len(), n + 1);
            for (j, perm) in c.iter().enumerate() {
                // rotation bringing element j to the front
                let items: Vec<usize> = (0..=n).collect();
                let rotated = perm.apply(&items);
                let start = rotated[0];
                assert!(
                    rotated.iter().enumerate().all(|(k, &x)| x == (start + k) % (n + 1)),
                    "{j}"
                );
                assert_eq!(perm.sign() as i32, if (n * start) % 2 == 0 { 1 } else { -1 });
            }
        }
    }

    #[test]
    fn cyclic_counts_are_multinomial() {
        for r in 1..=3usize {
            let mut ps = vec![0usize; r];
            loop {
                let c = enumerate_cyclic_shuffles(&ps).unwrap();
                assert_eq!(c.len() as u128, cyclic_shuffle_count(&ps), "{ps:?}");
                assert!(c.iter().all(|x| is_cyclic_shuffle(x, &ps)));
                let distinct: std::collections::HashSet<_> = c.iter().collect();
                assert_eq!(distinct.len(), c.len());
                let mut i = 0;
                loop {
                    if i == r {
                        break;
                    }
                    ps[i] += 1;
                    if ps[i] <= 2 {
                        break;
                    }
                    ps[i] = 0;
                    i += 1;
                }
                if i == r {
                    break;
                }
            }
        }
    }

    #[test]
    fn region_membership_examples() {
        let s = enumerate_shuffles(1, 1);
        assert!(shuffle_region_contains(&s[0], &pt(&[0.2]), &pt(&[0.7])));
        assert!(!shuffle_region_contains(&s[0], &pt(&[0.9]), &pt(&[0.1])));
        assert!(shuffle_region_contains(&s[1], &pt(&[0.9]), &pt(&[0.1])));
    }

    #[test]
    fn simplex_point_validation() {
        assert!(SimplexPoint::new(vec![0.5, 0.2]).is_err());
        assert!(SimplexPoint::new(vec![0.5, 1.2]).is_err());
        assert!(SimplexPoint::new(vec![]).is_ok());
    }

    #[test]
    fn locate_trivial_blocks() {
        let sigma = cyclic_region_locate(&[0, 0, 0], &pt(&[0.1, 0.4, 0.8]), &[pt(&[]), pt(&[]), pt(&[])]).unwrap();
        assert!(sigma.is_identity());
    }

    #[test]
    fn locate_wrapping_rotation() {
        // 0.8 + 0.5 = 1.3 ≡ 0.3 sorts before 0.8
        let sigma = cyclic_region_locate(&[1], &pt(&[0.8]), &[pt(&[0.5])]).unwrap();
        assert_eq!(sigma.map(), &[1, 0]);
        assert_eq!(sigma.sign(), -1);
        assert!(cyclic_region_locate(&[1], &pt(&[0.8]), &[pt(&[0.1])])
            .unwrap()
            .is_identity());
        // tie
        assert!(cyclic_region_locate(&[1], &pt(&[0.5]), &[pt(&[0.0])]).is_none());
    }

    #[test]
    fn shuffle_partition_one_one() {
        let stats = shuffle_partition_volumes(1, 1, 100_000, 42);
        assert_eq!(stats.regions.len(), 2);
        assert_eq!(stats.coverage_failures, 0);
        for r in &stats.regions {
            assert!((r.volume - 0.5).abs() <= 3.0 * r.std_error);
        }
    }

    #[test]
    fn cyclic_partition_one_one() {
        let stats = cyclic_partition_volumes(&[1, 1], 100_000, 42).unwrap();
        assert_eq!(stats.coverage_failures, 0);
        assert!((stats.total_volume - 0.5).abs() <= 3.0 * stats.total_std_error);
    }

    #[test]
    fn permutation_json() {
        let p = SignedPermutation::new(vec![1, 0, 2]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"images":[2,1,3],"sign":-1}"#);
        assert_eq!(serde_json::from_str::<SignedPermutation>(&s).unwrap(), p);
        assert!(serde_json::from_str::<SignedPermutation>(r#"{"images":[2,1,3],"sign":1}"#).is_err());
        assert!(serde_json::from_str::<SignedPermutation>(r#"{"images":[1,1],"sign":1}"#).is_err());
    }

    proptest! {
        #[test]
        fn stored_sign_matches_transposition_count(p in 0usize..4, q in 0usize..4) {
            for perm in enumerate_shuffles(p, q) {
                // count inversions independently of the cycle-based signature
                let m = perm.map();
                let inv = (0..m.len()).flat_map(|i| (i + 1..m.len()).map(move |j| (i, j))).filter(|&(i, j)| m[i] > m[j]).count();
                prop_assert_eq!(perm.sign(), if inv % 2 == 0 { 1 } else { -1 });
            }
        }

        #[test]
        fn exactly_one_shuffle_region(s in prop::collection::vec(0.0f64..1.0, 0..4), t in prop::collection::vec(0.0f64..1.0, 0..4)) {
            let mut s = s; s.sort_by(f64::total_cmp);
            let mut t = t; t.sort_by(f64::total_cmp);
            let mut all: Vec<f64> = s.iter().chain(&t).copied().collect();
            all.sort_by(f64::total_cmp);
            prop_assume!(all.windows(2).all(|w| w[0] < w[1]));
            let (sp, tp) = (pt(&s), pt(&t));
            let n = enumerate_shuffles(s.len(), t.len()).iter().filter(|c| shuffle_region_contains(c, &sp, &tp)).count();
            prop_assert_eq!(n, 1);
        }
    }
}
