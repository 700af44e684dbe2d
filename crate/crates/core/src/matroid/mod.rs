//! Matroid independence/rank oracles and greedy online contention
//! resolution schemes.

mod ocrs;

pub use ocrs::{half_point_value, GreedyOcrs, OcrsRule, OcrsState, Selectability, MIN_SELECTABILITY_TRIALS};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_capacity, Error, Result};
use crate::setfn::MarginalVector;
use crate::subset::Subset;
use crate::{ENUMERATION_LIMIT, EPS};

/// JSON form of a matroid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatroidSpec {
    Uniform {
        n: usize,
        k: usize,
    },
    Partition {
        n: usize,
        blocks: Vec<Vec<usize>>,
        capacities: Vec<usize>,
    },
    /// One ground element per edge; vertices are `0..=max endpoint`.
    Graphic {
        edges: Vec<(usize, usize)>,
    },
    /// Every independent set, as bitmasks. `n` defaults to the highest bit used.
    Explicit {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
        independent: Vec<Subset>,
    },
}

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    Uniform {
        k: usize,
    },
    Partition {
        block_of: Vec<usize>,
        capacities: Vec<usize>,
    },
    Graphic {
        edges: Vec<(usize, usize)>,
        vertices: usize,
    },
    Explicit {
        rank: Vec<u8>,
    },
}

/// A matroid over `0..n`, validated at construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatroidSpec", into = "MatroidSpec")]
pub struct Matroid {
    n: usize,
    kind: Kind,
}

impl Matroid {
    pub fn uniform(n: usize, k: usize) -> Result<Self> {
        ensure_capacity("matroid", 64, n)?;
        Ok(Matroid {
            n,
            kind: Kind::Uniform { k },
        })
    }

    /// The free matroid: every subset is independent.
    pub fn free(n: usize) -> Result<Self> {
        Self::uniform(n, n)
    }

    pub fn partition(n: usize, blocks: Vec<Vec<usize>>, capacities: Vec<usize>) -> Result<Self> {
        ensure_capacity("matroid", 64, n)?;
        if blocks.len() != capacities.len() {
            return Err(Error::Invalid("one capacity per block required".into()));
        }
        let mut block_of = vec![usize::MAX; n];
        for (b, block) in blocks.iter().enumerate() {
            for &e in block {
                if e >= n || block_of[e] != usize::MAX {
                    return Err(Error::Invalid(format!("element {e} misplaced in partition blocks")));
                }
                block_of[e] = b;
            }
        }
        if let Some(e) = block_of.iter().position(|&b| b == usize::MAX) {
            return Err(Error::Invalid(format!("element {e} belongs to no block")));
        }
        Ok(Matroid {
            n,
            kind: Kind::Partition { block_of, capacities },
        })
    }

    pub fn graphic(edges: Vec<(usize, usize)>) -> Result<Self> {
        ensure_capacity("matroid", 64, edges.len())?;
        let vertices = edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
        Ok(Matroid {
            n: edges.len(),
            kind: Kind::Graphic { edges, vertices },
        })
    }

    /// From the full list of independent sets; checks downward closure and
    /// the exchange axiom exhaustively.
    pub fn explicit(n: usize, independent: &[Subset]) -> Result<Self> {
        ensure_capacity("explicit matroid", ENUMERATION_LIMIT, n)?;
        let mut indep = vec![false; 1 << n];
        for s in independent {
            if !s.is_subset_of(Subset::full(n)) {
                return Err(Error::Invalid(format!("{s:?} exceeds the ground set")));
            }
            indep[s.index()] = true;
        }
        Self::from_independence_table(n, indep)
    }

    /// From an independence predicate evaluated on all `2^n` subsets.
    pub fn from_predicate(n: usize, mut independent: impl FnMut(Subset) -> bool) -> Result<Self> {
        ensure_capacity("explicit matroid", ENUMERATION_LIMIT, n)?;
        let indep = (0..1u64 << n).map(|s| independent(Subset(s))).collect();
        Self::from_independence_table(n, indep)
    }

    fn from_independence_table(n: usize, indep: Vec<bool>) -> Result<Self> {
        if !indep[0] {
            return Err(Error::Invalid("the empty set must be independent".into()));
        }
        for s in 1..indep.len() {
            if indep[s] {
                let set = Subset(s as u64);
                if let Some(e) = set.iter().find(|&e| !indep[set.without(e).index()]) {
                    return Err(Error::Invalid(format!(
                        "not downward closed: {set:?} independent but {:?} is not",
                        set.without(e)
                    )));
                }
            }
        }
        let mut rank = vec![0u8; indep.len()];
        for s in 1..indep.len() {
            let set = Subset(s as u64);
            rank[s] = if indep[s] {
                set.len() as u8
            } else {
                set.iter().map(|e| rank[set.without(e).index()]).max().unwrap_or(0)
            };
        }
        // I is maximal inside S iff S avoids every e with I + e independent;
        // the largest such S is the complement of that extension set, so the
        // exchange axiom reduces to one rank check per independent set.
        let full = Subset::full(n);
        for s in 0..indep.len() {
            if !indep[s] {
                continue;
            }
            let set = Subset(s as u64);
            let extensions: Subset = full
                .difference(set)
                .iter()
                .filter(|&e| indep[set.with(e).index()])
                .collect();
            if rank[full.difference(extensions).index()] as usize != set.len() {
                return Err(Error::Invalid(format!(
                    "exchange axiom fails: {set:?} is maximal in {:?} but smaller than its rank",
                    full.difference(extensions)
                )));
            }
        }
        Ok(Matroid {
            n,
            kind: Kind::Explicit { rank },
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ground(&self) -> Subset {
        Subset::full(self.n)
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            Kind::Uniform { .. } => "uniform",
            Kind::Partition { .. } => "partition",
            Kind::Graphic { .. } => "graphic",
            Kind::Explicit { .. } => "explicit",
        }
    }

    pub fn rank(&self, s: Subset) -> usize {
        debug_assert!(s.is_subset_of(self.ground()));
        match &self.kind {
            Kind::Uniform { k } => s.len().min(*k),
            Kind::Partition { block_of, capacities } => {
                let mut counts = vec![0usize; capacities.len()];
                for e in s.iter() {
                    counts[block_of[e]] += 1;
                }
                counts.iter().zip(capacities).map(|(c, cap)| (*c).min(*cap)).sum()
            }
            Kind::Graphic { edges, vertices } => {
                let mut forest = UnionFind::new(*vertices);
                s.iter().filter(|&e| forest.union(edges[e].0, edges[e].1)).count()
            }
            Kind::Explicit { rank } => rank[s.index()] as usize,
        }
    }

    pub fn is_independent(&self, s: Subset) -> bool {
        self.rank(s) == s.len()
    }

    /// `x(S) ≤ rank(S) + 1e-9` for every `S`. Uniform and partition matroids
    /// are checked through their block structure; other kinds enumerate.
    pub fn in_polytope(&self, x: &MarginalVector) -> Result<bool> {
        if x.len() != self.n {
            return Err(Error::Domain("vector length does not match ground size".into()));
        }
        let xs = x.as_slice();
        match &self.kind {
            Kind::Uniform { k } => Ok(xs.iter().sum::<f64>() <= *k as f64 + EPS),
            Kind::Partition { block_of, capacities } => {
                let mut sums = vec![0.0; capacities.len()];
                for (e, v) in xs.iter().enumerate() {
                    sums[block_of[e]] += v;
                }
                Ok(sums.iter().zip(capacities).all(|(s, &c)| *s <= c as f64 + EPS))
            }
            Kind::Graphic { .. } | Kind::Explicit { .. } => {
                ensure_capacity("matroid polytope check", ENUMERATION_LIMIT, self.n)?;
                let mut sums = vec![0.0; 1 << self.n];
                for s in 1..sums.len() {
                    let low = s.trailing_zeros() as usize;
                    sums[s] = sums[s & (s - 1)] + xs[low];
                    if sums[s] > self.rank(Subset(s as u64)) as f64 + EPS {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
        }
    }

    pub fn to_spec(&self) -> MatroidSpec {
        match &self.kind {
            Kind::Uniform { k } => MatroidSpec::Uniform { n: self.n, k: *k },
            Kind::Partition { block_of, capacities } => {
                let mut blocks = vec![Vec::new(); capacities.len()];
                for (e, &b) in block_of.iter().enumerate() {
                    blocks[b].push(e);
                }
                MatroidSpec::Partition {
                    n: self.n,
                    blocks,
                    capacities: capacities.clone(),
                }
            }
            Kind::Graphic { edges, .. } => MatroidSpec::Graphic { edges: edges.clone() },
            Kind::Explicit { rank } => MatroidSpec::Explicit {
                n: Some(self.n),
                independent: (0..rank.len() as u64)
                    .map(Subset)
                    .filter(|s| rank[s.index()] as usize == s.len())
                    .collect(),
            },
        }
    }
}

impl TryFrom<MatroidSpec> for Matroid {
    type Error = Error;

    fn try_from(spec: MatroidSpec) -> Result<Self> {
        match spec {
            MatroidSpec::Uniform { n, k } => Matroid::uniform(n, k),
            MatroidSpec::Partition { n, blocks, capacities } => Matroid::partition(n, blocks, capacities),
            MatroidSpec::Graphic { edges } => Matroid::graphic(edges),
            MatroidSpec::Explicit { n, independent } => {
                let n = n.unwrap_or_else(|| independent.iter().map(|s| s.span()).max().unwrap_or(0));
                Matroid::explicit(n, &independent)
            }
        }
    }
}

impl From<Matroid> for MatroidSpec {
    fn from(m: Matroid) -> Self {
        m.to_spec()
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            self.parent[v] = self.parent[self.parent[v]];
            v = self.parent[v];
        }
        v
    }

    /// Returns false if `a` and `b` were already connected.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Matroid {
        Matroid::graphic(vec![(0, 1), (1, 2), (2, 0)]).unwrap()
    }

    fn x(v: &[f64]) -> MarginalVector {
        MarginalVector::new(v.to_vec()).unwrap()
    }

    /// Cycle detection by depth-first search, independent of union-find.
    fn has_cycle(edges: &[(usize, usize)], s: Subset) -> bool {
        let chosen: Vec<(usize, usize)> = s.iter().map(|e| edges[e]).collect();
        let vertices = chosen.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
        let mut adj = vec![Vec::new(); vertices];
        for (i, &(u, v)) in chosen.iter().enumerate() {
            adj[u].push((v, i));
            adj[v].push((u, i));
        }
        let mut seen = vec![false; vertices];
        for start in 0..vertices {
            if seen[start] {
                continue;
            }
            let mut stack = vec![(start, usize::MAX)];
            while let Some((v, via)) = stack.pop() {
                if seen[v] {
                    return true;
                }
                seen[v] = true;
                for &(w, edge) in &adj[v] {
                    if edge != via {
                        stack.push((w, edge));
                    }
                }
            }
        }
        false
    }

    #[test]
    fn oracle_examples() {
        let u2 = Matroid::uniform(4, 2).unwrap();
        assert!(!u2.is_independent(Subset::from_elements([0, 1, 2])));
        assert!(u2.is_independent(Subset::EMPTY));
        assert_eq!(u2.rank(Subset::EMPTY), 0);

        let t = triangle();
        assert!(!t.is_independent(Subset::full(3)));
        assert_eq!(t.rank(Subset::full(3)), 2);
        for s in 0..8u64 {
            assert_eq!(
                t.is_independent(Subset(s)),
                !has_cycle(&[(0, 1), (1, 2), (2, 0)], Subset(s))
            );
        }
    }

    #[test]
    fn polytope_examples() {
        let u1 = Matroid::uniform(2, 1).unwrap();
        assert!(u1.in_polytope(&x(&[0.5, 0.5])).unwrap());
        assert!(!u1.in_polytope(&x(&[0.6, 0.6])).unwrap());
        let t = triangle();
        let third = 2.0 / 3.0;
        assert!(t.in_polytope(&x(&[third, third, third])).unwrap());
        assert!(!t.in_polytope(&x(&[0.7, 0.7, 0.7])).unwrap());
    }

    #[test]
    fn explicit_matches_structured_kinds() {
        let structured = [
            Matroid::uniform(5, 2).unwrap(),
            Matroid::partition(5, vec![vec![0, 3], vec![1, 2, 4]], vec![1, 2]).unwrap(),
            Matroid::graphic(vec![(0, 1), (1, 2), (2, 0), (2, 3), (3, 0)]).unwrap(),
        ];
        for m in structured {
            let explicit = Matroid::from_predicate(m.n(), |s| m.is_independent(s)).unwrap();
            for s in 0..1u64 << m.n() {
                assert_eq!(explicit.rank(Subset(s)), m.rank(Subset(s)));
            }
            let pt = x(&vec![0.4; m.n()]);
            assert_eq!(explicit.in_polytope(&pt).unwrap(), m.in_polytope(&pt).unwrap());
        }
    }

    #[test]
    fn explicit_rejects_non_matroids() {
        // {0,1} and {2} maximal: exchange fails
        let bad = [Subset::EMPTY, Subset(1), Subset(2), Subset(3), Subset(4)];
        assert!(matches!(Matroid::explicit(3, &bad), Err(Error::Invalid(_))));
        // not downward closed
        assert!(Matroid::explicit(2, &[Subset::EMPTY, Subset(3)]).is_err());
        assert!(Matroid::explicit(2, &[Subset(1)]).is_err());
    }

    #[test]
    fn rank_is_monotone_submodular() {
        let m = Matroid::graphic(vec![(0, 1), (1, 2), (2, 0), (2, 3), (3, 0), (1, 3)]).unwrap();
        let n = m.n();
        for s in 0..1u64 << n {
            let s = Subset(s);
            for e in (0..n).filter(|&e| !s.contains(e)) {
                assert!(m.rank(s.with(e)) >= m.rank(s));
                for g in (0..n).filter(|&g| g != e && !s.contains(g)) {
                    let small = m.rank(s.with(e)) - m.rank(s);
                    let large = m.rank(s.with(g).with(e)) - m.rank(s.with(g));
                    assert!(small >= large);
                }
            }
        }
    }

    #[test]
    fn json_forms() {
        let u: Matroid = serde_json::from_str(r#"{"kind":"uniform","n":3,"k":1}"#).unwrap();
        assert_eq!(u.rank(Subset::full(3)), 1);
        let g: Matroid = serde_json::from_str(r#"{"kind":"graphic","edges":[[0,1],[1,2],[2,0]]}"#).unwrap();
        assert_eq!(g.rank(Subset::full(3)), 2);
        let e: Matroid = serde_json::from_str(r#"{"kind":"explicit","independent":[0,1,2]}"#).unwrap();
        assert_eq!(e.n(), 2);
        assert!(!e.is_independent(Subset(3)));
        let p: Matroid =
            serde_json::from_str(r#"{"kind":"partition","n":3,"blocks":[[0,1],[2]],"capacities":[1,1]}"#).unwrap();
        let back: Matroid = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<Matroid>(r#"{"kind":"explicit","independent":[3]}"#).is_err());
    }
}
