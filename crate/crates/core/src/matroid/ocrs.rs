use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Kind, Matroid};
use crate::error::{Error, Result};
use crate::setfn::{relax::sample_product, ExplicitSetFunction, MarginalVector};
use crate::stats::{proportion, Accumulator, Estimate};
use crate::subset::Subset;

/// Minimum number of trials for a selectability estimate.
pub const MIN_SELECTABILITY_TRIALS: u64 = 10_000;

/// How a greedy scheme decides membership in its feasible family.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum OcrsRule {
    /// Accept while fewer than `k` elements are accepted.
    Cardinality { k: usize },
    /// Per-block counters against the partition capacities.
    BlockCounters,
    /// Accept iff the accepted set stays independent.
    Independence,
}

/// A deterministic greedy OCRS for a point inside the matroid polytope.
#[derive(Clone, Debug)]
pub struct GreedyOcrs {
    matroid: Matroid,
    vector: MarginalVector,
    rule: OcrsRule,
}

/// One run of a [`GreedyOcrs`]. Each element may be offered once.
#[derive(Clone, Debug)]
pub struct OcrsState<'a> {
    scheme: &'a GreedyOcrs,
    accepted: Subset,
    offered: Subset,
    counts: Vec<usize>,
}

/// Empirical `Pr[e accepted | e active]`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Selectability {
    pub element: usize,
    pub active: u64,
    pub accepted: u64,
    pub rate: Estimate,
}

impl GreedyOcrs {
    pub fn new(matroid: &Matroid, x: &MarginalVector) -> Result<Self> {
        if !matroid.in_polytope(x)? {
            return Err(Error::Domain("vector lies outside the matroid polytope".into()));
        }
        let rule = match &matroid.kind {
            Kind::Uniform { k } => OcrsRule::Cardinality { k: *k },
            Kind::Partition { .. } => OcrsRule::BlockCounters,
            Kind::Graphic { .. } | Kind::Explicit { .. } => OcrsRule::Independence,
        };
        Ok(GreedyOcrs {
            matroid: matroid.clone(),
            vector: x.clone(),
            rule,
        })
    }

    pub fn matroid(&self) -> &Matroid {
        &self.matroid
    }

    pub fn vector(&self) -> &MarginalVector {
        &self.vector
    }

    pub fn rule(&self) -> &OcrsRule {
        &self.rule
    }

    pub fn start(&self) -> OcrsState<'_> {
        let blocks = match &self.matroid.kind {
            Kind::Partition { capacities, .. } => capacities.len(),
            _ => 0,
        };
        OcrsState {
            scheme: self,
            accepted: Subset::EMPTY,
            offered: Subset::EMPTY,
            counts: vec![0; blocks],
        }
    }

    /// Offers `order` in sequence with activity given by `active`.
    pub fn run(&self, order: &[usize], active: Subset) -> Result<Subset> {
        let mut state = self.start();
        for &e in order {
            state.offer(e, active.contains(e))?;
        }
        Ok(state.accepted())
    }

    fn random_run(&self, order: &mut [usize], rng: &mut ChaCha8Rng) -> (Subset, Subset) {
        let active = sample_product(self.vector.as_slice(), rng);
        order.shuffle(rng);
        let accepted = self.run(order, active).expect("each element offered once");
        debug_assert!(self.matroid.is_independent(accepted));
        (active, accepted)
    }

    /// Activations drawn from the product distribution of the vector,
    /// arrivals in uniformly random order.
    pub fn selectability_estimate(&self, trials: u64, seed: u64) -> Result<Vec<Selectability>> {
        if trials < MIN_SELECTABILITY_TRIALS {
            return Err(Error::Precondition(format!(
                "selectability needs at least {MIN_SELECTABILITY_TRIALS} trials, got {trials}"
            )));
        }
        let n = self.matroid.n();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..n).collect();
        let mut active_counts = vec![0u64; n];
        let mut accepted_counts = vec![0u64; n];
        for _ in 0..trials {
            let (active, accepted) = self.random_run(&mut order, &mut rng);
            for e in active.iter() {
                active_counts[e] += 1;
            }
            for e in accepted.iter() {
                accepted_counts[e] += 1;
            }
        }
        Ok((0..n)
            .map(|e| Selectability {
                element: e,
                active: active_counts[e],
                accepted: accepted_counts[e],
                rate: proportion(accepted_counts[e], active_counts[e]),
            })
            .collect())
    }

    /// Estimates `E[F(1_T / 2)]` over OCRS outputs `T`, computing each
    /// `F(1_T / 2)` exactly as the average of `f` over subsets of `T`.
    pub fn half_value_estimate(&self, f: &ExplicitSetFunction, trials: u64, seed: u64) -> Result<Estimate> {
        if f.n() != self.matroid.n() {
            return Err(Error::Domain("objective and matroid ground sizes differ".into()));
        }
        if trials == 0 {
            return Err(Error::Precondition("at least one trial required".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..f.n()).collect();
        let mut acc = Accumulator::default();
        for _ in 0..trials {
            let (_, accepted) = self.random_run(&mut order, &mut rng);
            acc.push(half_point_value(f, accepted));
        }
        Ok(acc.estimate())
    }
}

/// `F(1_T / 2)`: the mean of `f` over the subsets of `t`.
pub fn half_point_value(f: &ExplicitSetFunction, t: Subset) -> f64 {
    let total: f64 = t.subsets().map(|u| f.at(u)).sum();
    total / (1u64 << t.len()) as f64
}

impl OcrsState<'_> {
    pub fn accepted(&self) -> Subset {
        self.accepted
    }

    pub fn offered(&self) -> Subset {
        self.offered
    }

    pub fn offer(&mut self, e: usize, active: bool) -> Result<bool> {
        let matroid = &self.scheme.matroid;
        if e >= matroid.n() {
            return Err(Error::Domain(format!(
                "element {e} outside ground of size {}",
                matroid.n()
            )));
        }
        if self.offered.contains(e) {
            return Err(Error::Protocol(format!("element {e} offered twice")));
        }
        self.offered = self.offered.with(e);
        if !active {
            return Ok(false);
        }
        let accept = match (&self.scheme.rule, &matroid.kind) {
            (OcrsRule::Cardinality { k }, _) => self.accepted.len() < *k,
            (OcrsRule::BlockCounters, Kind::Partition { block_of, capacities }) => {
                let b = block_of[e];
                if self.counts[b] < capacities[b] {
                    self.counts[b] += 1;
                    true
                } else {
                    false
                }
            }
            _ => matroid.is_independent(self.accepted.with(e)),
        };
        if accept {
            self.accepted = self.accepted.with(e);
        }
        Ok(accept)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn x(v: &[f64]) -> MarginalVector {
        MarginalVector::new(v.to_vec()).unwrap()
    }

    fn triangle() -> Matroid {
        Matroid::graphic(vec![(0, 1), (1, 2), (2, 0)]).unwrap()
    }

    #[test]
    fn offer_examples() {
        let m = Matroid::uniform(2, 1).unwrap();
        let scheme = GreedyOcrs::new(&m, &x(&[0.25, 0.25])).unwrap();
        let mut s = scheme.start();
        assert!(!s.offer(0, false).unwrap());
        assert!(s.offer(1, true).unwrap());
        assert!(matches!(s.offer(1, true), Err(Error::Protocol(_))));
        let mut s = scheme.start();
        assert!(s.offer(0, true).unwrap());
        assert!(!s.offer(1, true).unwrap());
    }

    #[test]
    fn partition_caps_respected() {
        let m = Matroid::partition(3, vec![vec![0, 1], vec![2]], vec![1, 1]).unwrap();
        let scheme = GreedyOcrs::new(&m, &x(&[0.5, 0.5, 1.0])).unwrap();
        assert_eq!(
            scheme.run(&[0, 1, 2], Subset::full(3)).unwrap(),
            Subset::from_elements([0, 2])
        );
        assert_eq!(
            scheme.run(&[1, 0, 2], Subset::from_elements([0, 1])).unwrap(),
            Subset::singleton(1)
        );
    }

    #[test]
    fn outside_polytope_rejected() {
        let m = Matroid::uniform(2, 1).unwrap();
        assert!(matches!(GreedyOcrs::new(&m, &x(&[0.6, 0.6])), Err(Error::Domain(_))));
    }

    #[test]
    fn triangle_never_accepts_cycle() {
        let m = triangle();
        let third = 1.0 / 3.0;
        let scheme = GreedyOcrs::new(&m, &x(&[third, third, third])).unwrap();
        let orders = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        for order in orders {
            for active in 0..8u64 {
                let t = scheme.run(&order, Subset(active)).unwrap();
                assert!(t.len() <= 2 && t.is_subset_of(Subset(active)));
                assert_eq!(t.len(), Subset(active).len().min(2));
            }
        }
    }

    #[test]
    fn selectability_uniform_one() {
        let m = Matroid::uniform(2, 1).unwrap();
        let scheme = GreedyOcrs::new(&m, &x(&[0.25, 0.25])).unwrap();
        let est = scheme.selectability_estimate(20_000, 3).unwrap();
        for s in &est {
            // 1 - 0.25 * 0.5
            assert!((s.rate.mean - 0.875).abs() <= 3.0 * s.rate.ci95() + 1e-3, "{s:?}");
            assert!(s.rate.mean >= 0.75);
        }
        assert!(scheme.selectability_estimate(10, 3).is_err());
    }

    #[test]
    fn selectability_nan_without_activation() {
        let m = Matroid::uniform(2, 1).unwrap();
        let scheme = GreedyOcrs::new(&m, &MarginalVector::zeros(2)).unwrap();
        let est = scheme.selectability_estimate(10_000, 1).unwrap();
        assert!(est.iter().all(|s| s.rate.mean.is_nan() && s.active == 0));
    }

    #[test]
    fn selectability_partition_half_budget() {
        let m = Matroid::partition(4, vec![vec![0, 1], vec![2, 3]], vec![1, 1]).unwrap();
        let scheme = GreedyOcrs::new(&m, &x(&[0.25, 0.25, 0.4, 0.1])).unwrap();
        let est = scheme.selectability_estimate(20_000, 9).unwrap();
        // exact: 1 - x_other / 2 within each block
        let exact = [0.875, 0.875, 0.95, 0.8];
        for (s, want) in est.iter().zip(exact) {
            assert!(s.rate.mean >= 0.5 - 3.0 * s.rate.ci95());
            assert!(
                (s.rate.mean - want).abs() <= 3.0 * s.rate.ci95() + 1e-3,
                "{s:?} vs {want}"
            );
        }
    }

    #[test]
    fn half_value_matches_exact_uniform() {
        // additive f, uniform(1) over 2 elements: E[F(1_T/2)] = (w0 Pr[T={0}] + w1 Pr[T={1}]) / 2
        let f = ExplicitSetFunction::from_fn(2, |s| s.iter().map(|e| [1.0, 3.0][e]).sum()).unwrap();
        let m = Matroid::uniform(2, 1).unwrap();
        let scheme = GreedyOcrs::new(&m, &x(&[0.5, 0.5])).unwrap();
        let est = scheme.half_value_estimate(&f, 40_000, 5).unwrap();
        // each element kept w.p. 0.5 * (1 - 0.25) = 0.375
        let exact = (1.0 + 3.0) * 0.375 / 2.0;
        assert!((est.mean - exact).abs() <= 3.0 * est.ci95(), "{} vs {exact}", est.mean);
    }

    proptest! {
        #[test]
        fn accepted_independent_and_greedy(
            edges in proptest::collection::vec((0usize..5, 0usize..5), 1..9),
            active in any::<u64>(),
            seed in any::<u64>(),
        ) {
            let m = Matroid::graphic(edges.clone()).unwrap();
            let n = m.n();
            let active = Subset(active).intersection(m.ground());
            let scheme = GreedyOcrs::new(&m, &MarginalVector::zeros(n)).unwrap();
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

            let mut state = scheme.start();
            let decisions: Vec<(usize, bool)> = order
                .iter()
                .map(|&e| (e, state.offer(e, active.contains(e)).unwrap()))
                .collect();
            prop_assert!(m.is_independent(state.accepted()));
            prop_assert!(state.accepted().is_subset_of(active));

            let mut replay = scheme.start();
            for &(e, decision) in decisions.iter().filter(|(e, _)| active.contains(*e)) {
                prop_assert_eq!(replay.offer(e, true).unwrap(), decision);
            }
            prop_assert_eq!(replay.accepted(), state.accepted());
        }

        #[test]
        fn structured_rules_match_independence(
            k in 0usize..4,
            active in any::<u64>(),
            seed in any::<u64>(),
        ) {
            let matroids = [
                Matroid::uniform(6, k).unwrap(),
                Matroid::partition(6, vec![vec![0, 1, 2], vec![3, 4], vec![5]], vec![k, 1, k.min(1)]).unwrap(),
            ];
            for m in matroids {
                let explicit = Matroid::from_predicate(6, |s| m.is_independent(s)).unwrap();
                let a = GreedyOcrs::new(&m, &MarginalVector::zeros(6)).unwrap();
                let b = GreedyOcrs::new(&explicit, &MarginalVector::zeros(6)).unwrap();
                let mut order: Vec<usize> = (0..6).collect();
                order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
                let active = Subset(active).intersection(Subset::full(6));
                prop_assert_eq!(a.run(&order, active).unwrap(), b.run(&order, active).unwrap());
            }
        }
    }
}
