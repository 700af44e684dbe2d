//! Explicit set functions on small ground sets and their continuous
//! relaxations.
//!
//! Values live in a dense table indexed by subset bitmask, so every
//! relaxation here is an exact enumeration. Operations that walk all `2^n`
//! subsets refuse ground sets larger than [`ENUMERATION_LIMIT`].

mod closure;
pub(crate) mod relax;
mod spec;

pub use closure::{concave_closure, ConcaveClosure};
pub use relax::{
    continuous_relaxation, f_max_table, g_star_half, gap_report, multilinear_exact, multilinear_mc, product_weights,
    GapReport, StarHalf,
};
pub use spec::{SetFunctionSpec, ORACLE_LIMIT};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_capacity, Error, Result};
use crate::subset::Subset;
use crate::{ENUMERATION_LIMIT, EPS};

/// Largest ground set an explicit table may have.
pub const TABLE_LIMIT: usize = 20;

/// Value oracle over subsets of `0..ground_size()`.
pub trait SetFunction: Sync {
    fn ground_size(&self) -> usize;

    /// `s` must be a subset of the ground set.
    fn eval(&self, s: Subset) -> f64;
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundSet {
    pub labels: Vec<String>,
}

impl GroundSet {
    pub fn indexed(n: usize) -> Self {
        GroundSet {
            labels: (0..n).map(|i| i.to_string()).collect(),
        }
    }

    pub fn labelled<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Self {
        GroundSet {
            labels: labels.into_iter().map(Into::into).collect(),
        }
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }
}

/// A point of `[0,1]^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MarginalVector(Vec<f64>);

impl MarginalVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = coords.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Domain(format!("coordinate {i} = {v} outside [0,1]")));
        }
        Ok(MarginalVector(coords))
    }

    pub fn zeros(n: usize) -> Self {
        MarginalVector(vec![0.0; n])
    }

    pub fn uniform(n: usize, p: f64) -> Result<Self> {
        Self::new(vec![p; n])
    }

    /// The indicator vector `p * 1_A`.
    pub fn indicator(n: usize, set: Subset, p: f64) -> Result<Self> {
        Self::new((0..n).map(|i| if set.contains(i) { p } else { 0.0 }).collect())
    }

    /// `c * x` for `c` in `[0,1]`.
    pub fn scaled(&self, c: f64) -> Self {
        assert!((0.0..=1.0).contains(&c), "scale {c} outside [0,1]");
        MarginalVector(self.0.iter().map(|v| v * c).collect())
    }

    pub fn halved(&self) -> Self {
        self.scaled(0.5)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn sum_over(&self, s: Subset) -> f64 {
        s.iter().map(|i| self.0[i]).sum()
    }
}

impl std::ops::Index<usize> for MarginalVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for MarginalVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        MarginalVector::new(v)
    }
}

impl From<MarginalVector> for Vec<f64> {
    fn from(v: MarginalVector) -> Vec<f64> {
        v.0
    }
}

/// A finitely supported distribution over subsets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetDistribution {
    pub atoms: Vec<(Subset, f64)>,
}

impl SubsetDistribution {
    pub fn new(atoms: Vec<(Subset, f64)>) -> Result<Self> {
        if atoms.iter().any(|&(_, w)| w.is_nan() || w < 0.0) {
            return Err(Error::Domain("negative or NaN atom weight".into()));
        }
        let total: f64 = atoms.iter().map(|&(_, w)| w).sum();
        if (total - 1.0).abs() > EPS {
            return Err(Error::Domain(format!("atom weights sum to {total}")));
        }
        Ok(SubsetDistribution { atoms })
    }

    /// Inclusion probability of each of the `n` elements.
    pub fn marginals(&self, n: usize) -> Vec<f64> {
        let mut m = vec![0.0; n];
        for &(s, w) in &self.atoms {
            for i in s.iter() {
                m[i] += w;
            }
        }
        m
    }

    pub fn expectation(&self, f: &dyn SetFunction) -> f64 {
        self.atoms.iter().map(|&(s, w)| w * f.eval(s)).sum()
    }
}

/// A total, non-negative value table over all `2^n` subsets.
#[derive(Clone, Debug, PartialEq)]
pub struct ExplicitSetFunction {
    ground: GroundSet,
    values: Vec<f64>,
}

/// A failed structural predicate, with the subsets that witness it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "property", rename_all = "snake_case")]
pub enum Violation {
    /// `f(smaller + e) - f(smaller) < f(larger + e) - f(larger)` with `smaller ⊂ larger`.
    Submodular {
        smaller: Subset,
        larger: Subset,
        element: usize,
        small_gain: f64,
        large_gain: f64,
    },
    /// `f(smaller) > f(larger)` with `smaller ⊂ larger`.
    Monotone {
        smaller: Subset,
        larger: Subset,
        small_value: f64,
        large_value: f64,
    },
    /// `f(left ∪ right) > f(left) + f(right)`.
    Subadditive {
        left: Subset,
        right: Subset,
        union_value: f64,
        sum: f64,
    },
}

impl ExplicitSetFunction {
    pub fn new(ground: GroundSet, values: Vec<f64>) -> Result<Self> {
        let n = ground.size();
        ensure_capacity("explicit set function", TABLE_LIMIT, n)?;
        if values.len() != 1usize << n {
            return Err(Error::Domain(format!(
                "table over {n} elements needs {} values, got {}",
                1usize << n,
                values.len()
            )));
        }
        if let Some((s, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Domain(format!(
                "value of subset {:?} is {v}; set functions must be finite and non-negative",
                Subset(s as u64)
            )));
        }
        Ok(ExplicitSetFunction { ground, values })
    }

    pub fn from_values(n: usize, values: Vec<f64>) -> Result<Self> {
        Self::new(GroundSet::indexed(n), values)
    }

    /// Tabulates any oracle over its ground set.
    pub fn tabulate(f: &dyn SetFunction) -> Result<Self> {
        let n = f.ground_size();
        ensure_capacity("explicit set function", TABLE_LIMIT, n)?;
        let values = (0..1u64 << n).map(|s| f.eval(Subset(s))).collect();
        Self::from_values(n, values)
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(Subset) -> f64) -> Result<Self> {
        ensure_capacity("explicit set function", TABLE_LIMIT, n)?;
        let values = (0..1u64 << n).map(|s| f(Subset(s))).collect();
        Self::from_values(n, values)
    }

    pub fn with_labels(mut self, ground: GroundSet) -> Result<Self> {
        if ground.size() != self.n() {
            return Err(Error::Domain("label count does not match ground size".into()));
        }
        self.ground = ground;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.ground.size()
    }

    pub fn ground(&self) -> &GroundSet {
        &self.ground
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn full(&self) -> Subset {
        Subset::full(self.n())
    }

    pub fn value(&self, s: Subset) -> Result<f64> {
        self.values
            .get(s.index())
            .copied()
            .filter(|_| s.is_subset_of(self.full()))
            .ok_or_else(|| Error::Domain(format!("{s:?} is not a subset of the ground set")))
    }

    #[inline]
    pub(crate) fn at(&self, s: Subset) -> f64 {
        self.values[s.index()]
    }

    /// `f(S ∪ {e}) - f(S)`; may be negative.
    pub fn marginal(&self, s: Subset, e: usize) -> Result<f64> {
        if e >= self.n() {
            return Err(Error::Domain(format!("element {e} outside ground set")));
        }
        if s.contains(e) {
            return Err(Error::Domain(format!("element {e} already in {s:?}")));
        }
        Ok(self.value(s.with(e))? - self.value(s)?)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// The subset with the largest value (smallest bitmask on ties).
    pub fn argmax(&self) -> Subset {
        let mut best = 0;
        for (s, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = s;
            }
        }
        Subset(best as u64)
    }

    /// Absolute tolerance for comparisons on this function's scale.
    pub fn tolerance(&self) -> f64 {
        let m = self.max_value();
        if m > 0.0 {
            EPS * m
        } else {
            EPS
        }
    }

    /// The restriction `h(U) = f(base ∪ U)`, viewed as a function of `U`.
    pub fn shifted(&self, base: Subset) -> Self {
        let values = (0..self.values.len())
            .map(|u| self.at(Subset(u as u64).union(base)))
            .collect();
        ExplicitSetFunction {
            ground: self.ground.clone(),
            values,
        }
    }

    fn ensure_enumerable(&self, what: &'static str) -> Result<()> {
        ensure_capacity(what, ENUMERATION_LIMIT, self.n())
    }

    /// Checks diminishing marginals on every `(S, S + g, e)`, which is
    /// equivalent to the lattice inequality over all pairs.
    pub fn submodularity_violation(&self) -> Result<Option<Violation>> {
        self.ensure_enumerable("submodularity check")?;
        let n = self.n();
        let tol = self.tolerance();
        for s in 0..1u64 << n {
            let s = Subset(s);
            for e in (0..n).filter(|&e| !s.contains(e)) {
                let small_gain = self.at(s.with(e)) - self.at(s);
                for g in (0..n).filter(|&g| g != e && !s.contains(g)) {
                    let larger = s.with(g);
                    let large_gain = self.at(larger.with(e)) - self.at(larger);
                    if small_gain < large_gain - tol {
                        return Ok(Some(Violation::Submodular {
                            smaller: s,
                            larger,
                            element: e,
                            small_gain,
                            large_gain,
                        }));
                    }
                }
            }
        }
        Ok(None)
    }

    pub fn monotonicity_violation(&self) -> Result<Option<Violation>> {
        self.ensure_enumerable("monotonicity check")?;
        let n = self.n();
        let tol = self.tolerance();
        for s in 0..1u64 << n {
            let s = Subset(s);
            for e in (0..n).filter(|&e| !s.contains(e)) {
                let larger = s.with(e);
                if self.at(s) > self.at(larger) + tol {
                    return Ok(Some(Violation::Monotone {
                        smaller: s,
                        larger,
                        small_value: self.at(s),
                        large_value: self.at(larger),
                    }));
                }
            }
        }
        Ok(None)
    }

    pub fn subadditivity_violation(&self) -> Result<Option<Violation>> {
        self.ensure_enumerable("subadditivity check")?;
        let size = 1u64 << self.n();
        let tol = self.tolerance();
        for a in 0..size {
            let fa = self.values[a as usize];
            for b in a..size {
                let union_value = self.values[(a | b) as usize];
                let sum = fa + self.values[b as usize];
                if union_value > sum + tol {
                    return Ok(Some(Violation::Subadditive {
                        left: Subset(a),
                        right: Subset(b),
                        union_value,
                        sum,
                    }));
                }
            }
        }
        Ok(None)
    }

    pub fn is_submodular(&self) -> Result<bool> {
        Ok(self.submodularity_violation()?.is_none())
    }

    pub fn is_monotone(&self) -> Result<bool> {
        Ok(self.monotonicity_violation()?.is_none())
    }

    pub fn is_subadditive(&self) -> Result<bool> {
        Ok(self.subadditivity_violation()?.is_none())
    }

    pub fn to_spec(&self) -> SetFunctionSpec {
        SetFunctionSpec::Explicit {
            n: self.n(),
            values: self.values.clone(),
        }
    }
}

impl SetFunction for ExplicitSetFunction {
    fn ground_size(&self) -> usize {
        self.n()
    }

    #[inline]
    fn eval(&self, s: Subset) -> f64 {
        self.at(s)
    }
}

impl Serialize for ExplicitSetFunction {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_spec().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ExplicitSetFunction {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let spec = SetFunctionSpec::deserialize(deserializer)?;
        spec.to_table().map_err(serde::de::Error::custom)
    }
}

/// Functions used throughout the tests and examples.
pub mod examples {
    use super::*;

    /// Directed cut of the two-vertex graph `u -> v`.
    pub fn two_vertex_cut() -> ExplicitSetFunction {
        SetFunctionSpec::directed_cut(2, &[(0, 1, 1.0)])
            .to_table()
            .and_then(|f| f.with_labels(GroundSet::labelled(["u", "v"])))
            .expect("valid cut")
    }

    /// Directed cut of the path `u -> v -> w -> x`.
    pub fn four_path_cut() -> ExplicitSetFunction {
        SetFunctionSpec::directed_cut(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)])
            .to_table()
            .and_then(|f| f.with_labels(GroundSet::labelled(["u", "v", "w", "x"])))
            .expect("valid cut")
    }
}

#[cfg(test)]
mod tests {
    use super::examples::*;
    use super::*;

    fn s(elems: &[usize]) -> Subset {
        Subset::from_elements(elems.iter().copied())
    }

    #[test]
    fn two_vertex_cut_values() {
        let f = two_vertex_cut();
        assert_eq!(f.value(s(&[0])).unwrap(), 1.0);
        assert_eq!(f.value(Subset::EMPTY).unwrap(), 0.0);
        assert_eq!(f.value(s(&[0, 1])).unwrap(), 0.0);
        assert!(matches!(f.value(s(&[2])), Err(Error::Domain(_))));
    }

    #[test]
    fn marginals() {
        let f = two_vertex_cut();
        assert_eq!(f.marginal(Subset::EMPTY, 0).unwrap(), 1.0);
        assert_eq!(f.marginal(s(&[0]), 1).unwrap(), -1.0);
        assert!(matches!(f.marginal(s(&[0]), 0), Err(Error::Domain(_))));

        let w = [0.5, 2.0, 3.5];
        let additive = SetFunctionSpec::Additive { weights: w.to_vec() }.to_table().unwrap();
        for set in 0..8u64 {
            for e in (0..3).filter(|&e| !Subset(set).contains(e)) {
                assert_eq!(additive.marginal(Subset(set), e).unwrap(), w[e]);
            }
        }
    }

    #[test]
    fn structural_predicates() {
        let cut = two_vertex_cut();
        assert!(cut.is_submodular().unwrap());
        assert!(!cut.is_monotone().unwrap());

        let zero = ExplicitSetFunction::from_values(3, vec![0.0; 8]).unwrap();
        assert!(zero.is_submodular().unwrap());
        assert!(zero.is_monotone().unwrap());
        assert!(zero.is_subadditive().unwrap());

        // f_max of the 4-path cut is monotone but not submodular
        let fmax = f_max_table(&four_path_cut()).unwrap();
        assert!(fmax.is_monotone().unwrap());
        match fmax.submodularity_violation().unwrap() {
            Some(Violation::Submodular {
                smaller,
                larger,
                element,
                small_gain,
                large_gain,
            }) => {
                assert!(smaller.is_subset_of(larger) && !larger.contains(element));
                assert_eq!(small_gain, fmax.marginal(smaller, element).unwrap());
                assert_eq!(large_gain, fmax.marginal(larger, element).unwrap());
                assert!(small_gain < large_gain);
            }
            other => panic!("expected a submodularity witness, got {other:?}"),
        }
    }

    #[test]
    fn superadditive_function_is_flagged() {
        // f(S) = |S|^2 is not subadditive
        let f = ExplicitSetFunction::from_fn(3, |s| (s.len() * s.len()) as f64).unwrap();
        assert!(matches!(
            f.subadditivity_violation().unwrap(),
            Some(Violation::Subadditive { .. })
        ));
    }

    #[test]
    fn rejects_negative_and_short_tables() {
        assert!(ExplicitSetFunction::from_values(1, vec![0.0, -1.0]).is_err());
        assert!(ExplicitSetFunction::from_values(2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn capacity_errors_above_enumeration_limit() {
        let f = ExplicitSetFunction::from_values(15, vec![0.0; 1 << 15]).unwrap();
        assert!(matches!(f.is_submodular(), Err(Error::Capacity { .. })));
    }

    #[test]
    fn subset_distribution_checks_normalization() {
        assert!(SubsetDistribution::new(vec![(Subset(1), 0.5), (Subset(2), 0.4)]).is_err());
        let d = SubsetDistribution::new(vec![(Subset(1), 0.5), (Subset(3), 0.5)]).unwrap();
        assert_eq!(d.marginals(2), vec![1.0, 0.5]);
    }
}
