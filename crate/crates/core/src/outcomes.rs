//! Photon-count outcomes `S = (s_1, ..., s_m)` and the spaces they live in.
//!
//! Spaces are enumerated in descending lexicographic order of the occupation
//! vector: for `m = 2, n = 2` the order is `(2,0), (1,1), (0,2)`. The rank of an
//! outcome is its position in that order, computed with the combinatorial
//! number system so that probability tables can be indexed without a map.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, too_large, Error, Result};

/// Largest space [`enumerate`] will materialize.
pub const MAX_ENUMERATION: u64 = 10_000_000;

/// Occupation list of `m` modes holding `n` photons in total.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Outcome {
    occupations: Vec<u32>,
}

impl Outcome {
    pub fn new(occupations: Vec<u32>) -> Self {
        Self { occupations }
    }

    /// Outcome with one photon in each listed mode (modes may repeat).
    pub fn from_modes(m: usize, modes: &[usize]) -> Self {
        let mut occupations = vec![0u32; m];
        for &h in modes {
            occupations[h] += 1;
        }
        Self { occupations }
    }

    pub fn empty(m: usize) -> Self {
        Self { occupations: vec![0; m] }
    }

    pub fn occupations(&self) -> &[u32] {
        &self.occupations
    }

    pub fn m(&self) -> usize {
        self.occupations.len()
    }

    pub fn n(&self) -> usize {
        self.occupations.iter().map(|&s| s as usize).sum()
    }

    /// Modes that hold at least one photon, each repeated by its occupation.
    pub fn occupied_modes(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n());
        for (i, &s) in self.occupations.iter().enumerate() {
            out.extend(std::iter::repeat(i).take(s as usize));
        }
        out
    }

    pub fn is_collision_free(&self) -> bool {
        self.occupations.iter().all(|&s| s <= 1)
    }

    /// `s_1! s_2! ... s_m!`
    pub fn multiplicity_factorial(&self) -> u64 {
        self.occupations.iter().map(|&s| (1..=s as u64).product::<u64>()).product()
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, s) in self.occupations.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{s}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceKind {
    /// Every occupation list summing to `n`.
    Full,
    /// Only lists with every `s_i` in `{0, 1}`.
    CollisionFree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OutcomeSpace {
    pub m: usize,
    pub n: usize,
    pub kind: SpaceKind,
}

impl OutcomeSpace {
    pub fn full(m: usize, n: usize) -> Self {
        Self { m, n, kind: SpaceKind::Full }
    }

    pub fn collision_free(m: usize, n: usize) -> Self {
        Self { m, n, kind: SpaceKind::CollisionFree }
    }

    /// `C(m+n-1, n)` for the full space, `C(m, n)` for the collision-free one.
    pub fn size(&self) -> Result<u64> {
        completions(self.kind, self.m, self.n)
    }

    pub fn contains(&self, s: &Outcome) -> bool {
        s.m() == self.m
            && s.n() == self.n
            && (self.kind == SpaceKind::Full || s.is_collision_free())
    }

    fn check_member(&self, s: &Outcome) -> Result<()> {
        if s.m() != self.m || s.n() != self.n {
            return invalid(format!(
                "outcome {s} (m={}, n={}) is not in a space with m={}, n={}",
                s.m(),
                s.n(),
                self.m,
                self.n
            ));
        }
        if self.kind == SpaceKind::CollisionFree && !s.is_collision_free() {
            return invalid(format!("outcome {s} has collisions but the space is collision-free"));
        }
        Ok(())
    }

    fn max_occupation(&self, remaining: usize) -> usize {
        match self.kind {
            SpaceKind::Full => remaining,
            SpaceKind::CollisionFree => remaining.min(1),
        }
    }

    /// Position of `s` in the canonical enumeration order.
    pub fn rank(&self, s: &Outcome) -> Result<u64> {
        self.check_member(s)?;
        let mut idx = 0u64;
        let mut remaining = self.n;
        for (i, &si) in s.occupations().iter().enumerate() {
            let si = si as usize;
            let tail = self.m - i - 1;
            for v in (si + 1..=self.max_occupation(remaining)).rev() {
                idx += completions(self.kind, tail, remaining - v)?;
            }
            remaining -= si;
        }
        Ok(idx)
    }

    /// Inverse of [`OutcomeSpace::rank`].
    pub fn unrank(&self, index: u64) -> Result<Outcome> {
        let size = self.size()?;
        if index >= size {
            return invalid(format!("index {index} out of range for space of size {size}"));
        }
        let mut idx = index;
        let mut remaining = self.n;
        let mut occ = vec![0u32; self.m];
        for (i, slot) in occ.iter_mut().enumerate() {
            let tail = self.m - i - 1;
            let mut chosen = None;
            for v in (0..=self.max_occupation(remaining)).rev() {
                let c = completions(self.kind, tail, remaining - v)?;
                if idx < c {
                    chosen = Some(v);
                    break;
                }
                idx -= c;
            }
            // Index was range-checked, so some value always fits.
            let v = chosen.ok_or_else(|| Error::InvalidArgument("unrank overflow".into()))?;
            *slot = v as u32;
            remaining -= v;
        }
        Ok(Outcome::new(occ))
    }
}

/// Number of ways to place `photons` into `modes` modes under `kind`.
fn completions(kind: SpaceKind, modes: usize, photons: usize) -> Result<u64> {
    match kind {
        SpaceKind::Full => {
            if modes == 0 {
                Ok(u64::from(photons == 0))
            } else {
                binomial(modes + photons - 1, photons)
            }
        }
        SpaceKind::CollisionFree => binomial(modes, photons),
    }
}

/// `C(n, k)`, failing when the result does not fit in 64 bits.
pub fn binomial(n: usize, k: usize) -> Result<u64> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return too_large(format!("C({n}, {k}) overflows 64 bits"));
        }
    }
    Ok(acc as u64)
}

pub fn is_collision_free(s: &Outcome) -> bool {
    s.is_collision_free()
}

pub fn multiplicity_factorial(s: &Outcome) -> u64 {
    s.multiplicity_factorial()
}

/// Every outcome of `space` in canonical order.
pub fn enumerate(space: &OutcomeSpace) -> Result<Vec<Outcome>> {
    let size = space.size()?;
    if size > MAX_ENUMERATION {
        return too_large(format!(
            "space m={}, n={} ({:?}) has {size} outcomes, above the {MAX_ENUMERATION} guard",
            space.m, space.n, space.kind
        ));
    }
    enumerate_range(space, 0, size)
}

/// `count` consecutive outcomes starting at rank `start`.
///
/// Lets callers split a space into rank ranges and fill tables chunk by chunk.
pub fn enumerate_range(space: &OutcomeSpace, start: u64, count: u64) -> Result<Vec<Outcome>> {
    let size = space.size()?;
    if count == 0 {
        return Ok(Vec::new());
    }
    if start.checked_add(count).is_none_or(|end| end > size) {
        return invalid(format!("range {start}+{count} exceeds space size {size}"));
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut cur = space.unrank(start)?;
    out.push(cur.clone());
    for _ in 1..count {
        advance(space, &mut cur);
        out.push(cur.clone());
    }
    Ok(out)
}

// Moves to the next outcome in descending lexicographic order.
fn advance(space: &OutcomeSpace, s: &mut Outcome) {
    let occ = &mut s.occupations;
    let m = occ.len();
    // Photons in the trailing block (the last mode for the full space, the
    // run of occupied modes at the end for the collision-free one), plus the
    // one we move right.
    let mut i = m - 1;
    let mut carried = occ[i];
    occ[i] = 0;
    if space.kind == SpaceKind::CollisionFree && carried == 1 {
        while i > 0 && occ[i - 1] == 1 {
            i -= 1;
            carried += 1;
            occ[i] = 0;
        }
    }
    loop {
        // Find the rightmost mode before `i` with a photon.
        i -= 1;
        if occ[i] > 0 {
            break;
        }
    }
    occ[i] -= 1;
    carried += 1;
    match space.kind {
        SpaceKind::Full => occ[i + 1] = carried,
        SpaceKind::CollisionFree => {
            for slot in occ.iter_mut().skip(i + 1).take(carried as usize) {
                *slot = 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prop_assert_eq;

    fn o(v: &[u32]) -> Outcome {
        Outcome::new(v.to_vec())
    }

    #[test]
    fn collision_free_enumeration_order() {
        let all = enumerate(&OutcomeSpace::collision_free(4, 2)).unwrap();
        assert_eq!(all.len(), 6);
        assert_eq!(all[0], o(&[1, 1, 0, 0]));
        assert_eq!(all[1], o(&[1, 0, 1, 0]));
        assert_eq!(all[5], o(&[0, 0, 1, 1]));
    }

    #[test]
    fn full_enumeration_order() {
        let all = enumerate(&OutcomeSpace::full(2, 2)).unwrap();
        assert_eq!(all, vec![o(&[2, 0]), o(&[1, 1]), o(&[0, 2])]);
        assert_eq!(enumerate(&OutcomeSpace::full(20, 3)).unwrap().len(), 1540);
    }

    #[test]
    fn enumeration_is_strictly_descending() {
        for space in [OutcomeSpace::full(5, 3), OutcomeSpace::collision_free(7, 3)] {
            let all = enumerate(&space).unwrap();
            for w in all.windows(2) {
                assert!(w[0] > w[1], "{} then {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn zero_photons_is_a_single_empty_outcome() {
        for space in [OutcomeSpace::full(3, 0), OutcomeSpace::collision_free(3, 0)] {
            assert_eq!(space.size().unwrap(), 1);
            assert_eq!(enumerate(&space).unwrap(), vec![Outcome::empty(3)]);
            assert_eq!(space.rank(&Outcome::empty(3)).unwrap(), 0);
        }
    }

    #[test]
    fn sizes_match_closed_form_exhaustively() {
        for m in 1..=12 {
            for n in 0..=5 {
                let full = enumerate(&OutcomeSpace::full(m, n)).unwrap();
                assert_eq!(full.len() as u64, binomial(m + n - 1, n).unwrap());
                let free = enumerate(&OutcomeSpace::collision_free(m, n)).unwrap();
                assert_eq!(free.len() as u64, binomial(m, n).unwrap());
                assert!(free.iter().all(Outcome::is_collision_free));
            }
        }
    }

    #[test]
    fn rank_unrank_exhaustive() {
        let space = OutcomeSpace::collision_free(6, 3);
        let all = enumerate(&space).unwrap();
        assert_eq!(all.len(), 20);
        for (i, s) in all.iter().enumerate() {
            assert_eq!(space.rank(s).unwrap(), i as u64);
            assert_eq!(&space.unrank(i as u64).unwrap(), s);
        }
        let full = OutcomeSpace::full(5, 4);
        for (i, s) in enumerate(&full).unwrap().iter().enumerate() {
            assert_eq!(full.rank(s).unwrap(), i as u64);
        }
        let last = full.size().unwrap() - 1;
        assert_eq!(full.unrank(last).unwrap(), o(&[0, 0, 0, 0, 4]));
        assert!(full.unrank(last + 1).is_err());
    }

    #[test]
    fn rank_rejects_non_members() {
        let space = OutcomeSpace::collision_free(3, 2);
        assert!(matches!(space.rank(&o(&[2, 0, 0])), Err(Error::InvalidArgument(_))));
        assert!(space.rank(&o(&[1, 1, 1])).is_err());
        assert!(space.rank(&o(&[1, 1])).is_err());
    }

    #[test]
    fn enumeration_guard_reports_size() {
        let err = enumerate(&OutcomeSpace::full(200, 6)).unwrap_err();
        match err {
            Error::ResourceLimit(msg) => assert!(msg.contains(&binomial(205, 6).unwrap().to_string())),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn collision_and_multiplicity() {
        assert!(o(&[1, 1, 0]).is_collision_free());
        assert!(!o(&[2, 0, 0]).is_collision_free());
        assert!(o(&[0, 0, 0]).is_collision_free());
        assert_eq!(o(&[1, 0, 1]).multiplicity_factorial(), 1);
        assert_eq!(o(&[3, 1, 0]).multiplicity_factorial(), 6);
        assert_eq!(o(&[2, 2, 0]).multiplicity_factorial(), 4);
    }

    #[test]
    fn collision_free_fraction_bound() {
        // |Lambda| / |Phi| >= 1 - n^2/m.
        for m in 1..=200usize {
            for n in 1..=6usize {
                let free = binomial(m, n).unwrap() as f64;
                let full = binomial(m + n - 1, n).unwrap() as f64;
                let bound = 1.0 - (n * n) as f64 / m as f64;
                assert!(free / full >= bound - 1e-12, "m={m} n={n}");
            }
        }
    }

    #[test]
    fn ranges_concatenate_to_full_enumeration() {
        let space = OutcomeSpace::full(6, 3);
        let all = enumerate(&space).unwrap();
        let mut pieces = Vec::new();
        let size = space.size().unwrap();
        let mut start = 0;
        while start < size {
            let count = 7.min(size - start);
            pieces.extend(enumerate_range(&space, start, count).unwrap());
            start += count;
        }
        assert_eq!(pieces, all);
    }

    #[test]
    fn outcome_json_is_an_integer_array() {
        let s = o(&[0, 2, 1]);
        assert_eq!(serde_json::to_string(&s).unwrap(), "[0,2,1]");
        let back: Outcome = serde_json::from_str("[0,2,1]").unwrap();
        assert_eq!(back, s);
    }

    proptest::proptest! {
        #[test]
        fn rank_unrank_round_trip(m in 1usize..40, n in 0usize..6, frac in 0.0f64..1.0, free in proptest::bool::ANY) {
            let space = if free && n <= m {
                OutcomeSpace::collision_free(m, n)
            } else {
                OutcomeSpace::full(m, n)
            };
            let size = space.size().unwrap();
            let idx = ((size as f64 * frac) as u64).min(size - 1);
            let s = space.unrank(idx).unwrap();
            prop_assert_eq!(s.n(), n);
            prop_assert_eq!(space.rank(&s).unwrap(), idx);
        }
    }
}
