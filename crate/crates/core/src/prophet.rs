//! Submodular matroid prophet: the singleton-coupling reduction that feeds
//! per-day random sets into a greedy OCRS, an online simulator, and the exact
//! offline benchmark.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_capacity, Error, Result};
use crate::matroid::{GreedyOcrs, Matroid};
use crate::setfn::relax::sample_product;
use crate::setfn::{multilinear_exact, product_weights, ExplicitSetFunction, MarginalVector};
use crate::stats::{proportion, Accumulator, Estimate};
use crate::subset::Subset;
use crate::{ENUMERATION_LIMIT, EPS};

/// Resolution of the bisection for the polytope scaling factor.
pub const SCALE_RESOLUTION: f64 = 1e-6;

/// Work budget (realizations × day subsets) for [`offline_opt`].
pub const OFFLINE_BUDGET: u64 = 20_000_000;

const REJECTION_ATTEMPTS: usize = 10_000;

#[derive(Clone, Debug, Serialize, Deserialize)]
struct InstanceSpec {
    days: usize,
    universes: Vec<Vec<usize>>,
    priors: Vec<Vec<f64>>,
    objective: ExplicitSetFunction,
    matroid: Matroid,
}

/// Days with disjoint item universes, independent priors, a submodular
/// objective over all items and a matroid over days.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "InstanceSpec", into = "InstanceSpec")]
pub struct ProphetInstance {
    universes: Vec<Vec<usize>>,
    priors: Vec<Vec<f64>>,
    objective: ExplicitSetFunction,
    matroid: Matroid,
    day_of: Vec<usize>,
}

impl ProphetInstance {
    pub fn new(
        universes: Vec<Vec<usize>>,
        priors: Vec<Vec<f64>>,
        objective: ExplicitSetFunction,
        matroid: Matroid,
    ) -> Result<Self> {
        let days = universes.len();
        if priors.len() != days || matroid.n() != days {
            return Err(Error::Invalid(format!(
                "{days} universes, {} priors, matroid over {}",
                priors.len(),
                matroid.n()
            )));
        }
        let items: usize = universes.iter().map(Vec::len).sum();
        ensure_capacity("prophet item universe", ENUMERATION_LIMIT, items)?;
        if objective.n() != items {
            return Err(Error::Invalid(format!(
                "objective over {} items, universes hold {items}",
                objective.n()
            )));
        }
        let mut day_of = vec![usize::MAX; items];
        for (day, (universe, prior)) in universes.iter().zip(&priors).enumerate() {
            if universe.is_empty() {
                return Err(Error::Invalid(format!("day {day} has an empty universe")));
            }
            if universe.len() != prior.len() {
                return Err(Error::Invalid(format!("day {day}: prior length differs from universe")));
            }
            for &e in universe {
                if e >= items || day_of[e] != usize::MAX {
                    return Err(Error::Invalid(format!("item {e} repeated or out of range")));
                }
                day_of[e] = day;
            }
            if prior.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::Invalid(format!("day {day}: probabilities must lie in [0, 1]")));
            }
            let total: f64 = prior.iter().sum();
            if (total - 1.0).abs() > EPS {
                return Err(Error::Invalid(format!("day {day}: prior sums to {total}")));
            }
        }
        if let Some(v) = objective.values().iter().find(|v| **v < -objective.tolerance()) {
            return Err(Error::Invalid(format!("objective takes negative value {v}")));
        }
        if let Some(w) = objective.submodularity_violation()? {
            return Err(Error::Invalid(format!("objective is not submodular: {w:?}")));
        }
        Ok(ProphetInstance {
            universes,
            priors,
            objective,
            matroid,
            day_of,
        })
    }

    pub fn days(&self) -> usize {
        self.universes.len()
    }

    pub fn items(&self) -> usize {
        self.day_of.len()
    }

    pub fn universes(&self) -> &[Vec<usize>] {
        &self.universes
    }

    pub fn universe(&self, day: usize) -> Subset {
        self.universes[day].iter().copied().collect()
    }

    pub fn priors(&self) -> &[Vec<f64>] {
        &self.priors
    }

    pub fn objective(&self) -> &ExplicitSetFunction {
        &self.objective
    }

    pub fn matroid(&self) -> &Matroid {
        &self.matroid
    }

    pub fn day_of(&self, item: usize) -> usize {
        self.day_of[item]
    }

    /// Item marginals `x_e = Pr[X_day(e) = e]`.
    pub fn marginals(&self) -> MarginalVector {
        let mut x = vec![0.0; self.items()];
        for (universe, prior) in self.universes.iter().zip(&self.priors) {
            for (&e, &p) in universe.iter().zip(prior) {
                x[e] = p;
            }
        }
        MarginalVector::new(x).expect("priors validated")
    }

    /// Items sets with at most one item per day whose days are independent.
    pub fn induced_matroid(&self) -> Result<Matroid> {
        Matroid::from_predicate(self.items(), |s| {
            let mut days = Subset::EMPTY;
            for e in s.iter() {
                let d = self.day_of[e];
                if days.contains(d) {
                    return false;
                }
                days = days.with(d);
            }
            self.matroid.is_independent(days)
        })
    }

    fn draw_day<R: Rng + ?Sized>(&self, day: usize, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut last = self.universes[day][0];
        for (&e, &p) in self.universes[day].iter().zip(&self.priors[day]) {
            if p > 0.0 {
                acc += p;
                last = e;
                if u < acc {
                    return e;
                }
            }
        }
        last
    }

    fn to_spec(&self) -> InstanceSpec {
        InstanceSpec {
            days: self.days(),
            universes: self.universes.clone(),
            priors: self.priors.clone(),
            objective: self.objective.clone(),
            matroid: self.matroid.clone(),
        }
    }
}

impl TryFrom<InstanceSpec> for ProphetInstance {
    type Error = Error;

    fn try_from(spec: InstanceSpec) -> Result<Self> {
        if spec.days != spec.universes.len() {
            return Err(Error::Invalid(format!(
                "days = {} but {} universes given",
                spec.days,
                spec.universes.len()
            )));
        }
        ProphetInstance::new(spec.universes, spec.priors, spec.objective, spec.matroid)
    }
}

impl From<ProphetInstance> for InstanceSpec {
    fn from(instance: ProphetInstance) -> Self {
        instance.to_spec()
    }
}

/// The vector fed to the OCRS: `y = c·x/2` for the largest `c ∈ [0, 1]`
/// (to [`SCALE_RESOLUTION`]) inside the polytope of `induced`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FeasibleVector {
    pub scale: f64,
    pub y: MarginalVector,
}

pub fn feasible_vector(x: &MarginalVector, induced: &Matroid) -> Result<FeasibleVector> {
    let half = x.halved();
    if induced.in_polytope(&half)? {
        return Ok(FeasibleVector { scale: 1.0, y: half });
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > SCALE_RESOLUTION {
        let mid = 0.5 * (lo + hi);
        if induced.in_polytope(&half.scaled(mid))? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(FeasibleVector {
        scale: lo,
        y: half.scaled(lo),
    })
}

/// `P_y({e})` for each item of one day, where `y` lists that day's coordinates.
pub fn singleton_probabilities(y: &[f64]) -> Vec<f64> {
    (0..y.len())
        .map(|j| {
            y.iter()
                .enumerate()
                .map(|(k, &v)| if k == j { v } else { 1.0 - v })
                .product()
        })
        .collect()
}

/// Per-day coupling between the realized item and the set fed to the OCRS.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingDay {
    pub day: usize,
    pub realized: usize,
    pub fed: Subset,
    pub singleton: bool,
}

/// Couples one day: `x` and `y` are that day's coordinates in universe order
/// and `realized` is the position of `X_i` within the universe. The returned
/// `fed` set is expressed in universe positions.
pub fn couple_positions<R: Rng + ?Sized>(x: &[f64], y: &[f64], realized: usize, rng: &mut R) -> Result<(Subset, bool)> {
    if x.len() != y.len() || realized >= x.len() {
        return Err(Error::Domain("day coordinates do not line up".into()));
    }
    if let Some(j) = (0..x.len()).find(|&j| y[j] > x[j] + EPS) {
        return Err(Error::Precondition(format!(
            "y = {} exceeds x = {} at position {j}",
            y[j], x[j]
        )));
    }
    if x[realized] <= 0.0 {
        return Err(Error::Precondition("realized item has zero prior mass".into()));
    }
    let singles = singleton_probabilities(y);
    if rng.gen::<f64>() < singles[realized] / x[realized] {
        return Ok((Subset::singleton(realized), true));
    }
    Ok((sample_non_singleton(y, rng), false))
}

/// Draws from the product measure of `y` conditioned on `|T| ≠ 1`.
fn sample_non_singleton<R: Rng + ?Sized>(y: &[f64], rng: &mut R) -> Subset {
    for _ in 0..REJECTION_ATTEMPTS {
        let t = sample_product(y, rng);
        if t.len() != 1 {
            return t;
        }
    }
    let weights: Vec<(Subset, f64)> = product_weights(y)
        .into_iter()
        .enumerate()
        .map(|(s, w)| (Subset(s as u64), w))
        .filter(|(s, _)| s.len() != 1)
        .collect();
    let total: f64 = weights.iter().map(|(_, w)| w).sum();
    if total <= 0.0 {
        return Subset::EMPTY;
    }
    let mut u = rng.gen::<f64>() * total;
    for &(s, w) in &weights {
        if u < w {
            return s;
        }
        u -= w;
    }
    weights.last().map_or(Subset::EMPTY, |(s, _)| *s)
}

/// Exact law of the fed set for one day (universe positions), i.e. the
/// product measure of `y`.
pub fn target_law(y: &[f64]) -> Vec<f64> {
    product_weights(y)
}

/// Everything the online algorithm needs, precomputed once per instance.
#[derive(Clone, Debug)]
pub struct ProphetPlan {
    instance: ProphetInstance,
    induced: Matroid,
    x: MarginalVector,
    feasible: FeasibleVector,
    ocrs: GreedyOcrs,
    independent_days: Vec<Subset>,
}

/// Record of one online run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProphetRun {
    /// Realized item per day.
    pub realized: Vec<usize>,
    /// Union of the fed sets, as items.
    pub fed: Subset,
    /// Days whose fed set was the realized singleton.
    pub singleton_days: Subset,
    pub s_ocrs: Subset,
    pub t_alg: Subset,
    /// Selected days.
    pub w: Subset,
    /// `f(T_ALG)`.
    pub value: f64,
    /// `f(S_OCRS)`.
    pub ocrs_value: f64,
    /// Best independent selection for this realization.
    pub opt_value: f64,
}

impl ProphetPlan {
    pub fn new(instance: ProphetInstance) -> Result<Self> {
        let induced = instance.induced_matroid()?;
        let x = instance.marginals();
        let feasible = feasible_vector(&x, &induced)?;
        let ocrs = GreedyOcrs::new(&induced, &feasible.y)?;
        let independent_days = instance
            .matroid
            .ground()
            .subsets()
            .filter(|&w| instance.matroid.is_independent(w))
            .collect();
        Ok(ProphetPlan {
            instance,
            induced,
            x,
            feasible,
            ocrs,
            independent_days,
        })
    }

    pub fn instance(&self) -> &ProphetInstance {
        &self.instance
    }

    pub fn induced_matroid(&self) -> &Matroid {
        &self.induced
    }

    pub fn x(&self) -> &MarginalVector {
        &self.x
    }

    pub fn y(&self) -> &MarginalVector {
        &self.feasible.y
    }

    pub fn scale(&self) -> f64 {
        self.feasible.scale
    }

    /// `F(y)`, the multilinear extension at the vector fed to the OCRS.
    pub fn multilinear_at_y(&self) -> Result<f64> {
        multilinear_exact(&self.instance.objective, &self.feasible.y)
    }

    fn day_coordinates(&self, day: usize) -> (Vec<f64>, Vec<f64>) {
        let universe = &self.instance.universes[day];
        (
            universe.iter().map(|&e| self.x[e]).collect(),
            universe.iter().map(|&e| self.feasible.y[e]).collect(),
        )
    }

    /// Draws `X_i` from its prior and couples it.
    pub fn couple_day<R: Rng + ?Sized>(&self, day: usize, rng: &mut R) -> Result<CouplingDay> {
        let realized = self.instance.draw_day(day, rng);
        self.couple_realized(day, realized, rng)
    }

    /// Couples a caller-supplied realization of day `day`.
    pub fn couple_realized<R: Rng + ?Sized>(&self, day: usize, realized: usize, rng: &mut R) -> Result<CouplingDay> {
        let universe = &self.instance.universes[day];
        let position = universe
            .iter()
            .position(|&e| e == realized)
            .ok_or_else(|| Error::Domain(format!("item {realized} is not in day {day}")))?;
        let (x, y) = self.day_coordinates(day);
        let (positions, singleton) = couple_positions(&x, &y, position, rng)?;
        Ok(CouplingDay {
            day,
            realized,
            fed: positions.iter().map(|p| universe[p]).collect(),
            singleton,
        })
    }

    /// Max over independent day sets of `f` on the realized items.
    pub fn realized_opt(&self, realized: &[usize]) -> f64 {
        self.independent_days
            .iter()
            .map(|w| self.instance.objective.at(w.iter().map(|d| realized[d]).collect()))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// One online run with days arriving in `order`.
    pub fn run(&self, order: &[usize], seed: u64) -> Result<ProphetRun> {
        let days = self.instance.days();
        let mut seen = Subset::EMPTY;
        for &d in order {
            if d >= days || seen.contains(d) {
                return Err(Error::Domain("arrival order is not a permutation of days".into()));
            }
            seen = seen.with(d);
        }
        if seen.len() != days {
            return Err(Error::Domain("arrival order is not a permutation of days".into()));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = self.ocrs.start();
        let mut realized = vec![0; days];
        let (mut fed, mut singleton_days, mut t_alg, mut w) =
            (Subset::EMPTY, Subset::EMPTY, Subset::EMPTY, Subset::EMPTY);
        for &day in order {
            let coupling = self.couple_day(day, &mut rng)?;
            realized[day] = coupling.realized;
            fed = fed.union(coupling.fed);
            if coupling.singleton {
                singleton_days = singleton_days.with(day);
            }
            for &e in &self.instance.universes[day] {
                let accepted = state.offer(e, coupling.fed.contains(e))?;
                if accepted && coupling.singleton {
                    t_alg = t_alg.with(e);
                    w = w.with(day);
                }
            }
        }
        let s_ocrs = state.accepted();
        assert!(
            self.instance.matroid.is_independent(w),
            "selected days {w:?} are dependent in the day matroid"
        );
        let f = &self.instance.objective;
        Ok(ProphetRun {
            value: f.at(t_alg),
            ocrs_value: f.at(s_ocrs),
            opt_value: self.realized_opt(&realized),
            realized,
            fed,
            singleton_days,
            s_ocrs,
            t_alg,
            w,
        })
    }
}

/// `E_X[max_{W independent} f(X_W)]` by enumerating every realization.
pub fn offline_opt(instance: &ProphetInstance) -> Result<f64> {
    let supports: Vec<Vec<(usize, f64)>> = instance
        .universes
        .iter()
        .zip(&instance.priors)
        .map(|(u, p)| {
            u.iter()
                .copied()
                .zip(p.iter().copied())
                .filter(|(_, p)| *p > 0.0)
                .collect()
        })
        .collect();
    let independent: Vec<Subset> = instance
        .matroid
        .ground()
        .subsets()
        .filter(|&w| instance.matroid.is_independent(w))
        .collect();
    let realizations = supports
        .iter()
        .try_fold(1u64, |acc, s| acc.checked_mul(s.len() as u64))
        .unwrap_or(u64::MAX);
    let work = realizations.saturating_mul(independent.len() as u64);
    if work > OFFLINE_BUDGET {
        return Err(Error::Capacity {
            what: "prophet offline enumeration",
            limit: OFFLINE_BUDGET as usize,
            got: work.min(usize::MAX as u64) as usize,
        });
    }

    let f = &instance.objective;
    let days = instance.days();
    let mut cursor = vec![0usize; days];
    let mut total = 0.0;
    loop {
        let mut prob = 1.0;
        let mut realized = vec![0usize; days];
        for d in 0..days {
            let (e, p) = supports[d][cursor[d]];
            realized[d] = e;
            prob *= p;
        }
        let best = independent
            .iter()
            .map(|w| f.at(w.iter().map(|d| realized[d]).collect()))
            .fold(f64::NEG_INFINITY, f64::max);
        total += prob * best;

        let mut d = 0;
        loop {
            if d == days {
                return Ok(total);
            }
            cursor[d] += 1;
            if cursor[d] < supports[d].len() {
                break;
            }
            cursor[d] = 0;
            d += 1;
        }
    }
}

/// Order-insensitive aggregate of many runs.
#[derive(Clone, Debug, Default)]
pub struct ProphetTally {
    pub value: Accumulator,
    pub ocrs_value: Accumulator,
    pub opt_value: Accumulator,
    /// Per item: runs with the item in `S_OCRS`.
    pub in_ocrs: Vec<u64>,
    /// Per item: runs with the item in `T_ALG`.
    pub kept: Vec<u64>,
    pub dependent_selections: u64,
}

/// Summary statistics derived from a [`ProphetTally`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProphetSummary {
    pub runs: u64,
    pub value: Estimate,
    pub ocrs_value: Estimate,
    pub opt_value: Estimate,
    /// `Pr[e ∈ T_ALG | e ∈ S_OCRS]` per item.
    pub keep_rates: Vec<Estimate>,
    pub dependent_selections: u64,
}

impl ProphetTally {
    pub fn new(items: usize) -> Self {
        ProphetTally {
            in_ocrs: vec![0; items],
            kept: vec![0; items],
            ..Default::default()
        }
    }

    pub fn record(&mut self, run: &ProphetRun, day_matroid: &Matroid) {
        self.value.push(run.value);
        self.ocrs_value.push(run.ocrs_value);
        self.opt_value.push(run.opt_value);
        for e in run.s_ocrs.iter() {
            self.in_ocrs[e] += 1;
        }
        for e in run.t_alg.iter() {
            self.kept[e] += 1;
        }
        if !day_matroid.is_independent(run.w) {
            self.dependent_selections += 1;
        }
    }

    pub fn merge(mut self, other: ProphetTally) -> Self {
        self.value.merge(&other.value);
        self.ocrs_value.merge(&other.ocrs_value);
        self.opt_value.merge(&other.opt_value);
        if self.in_ocrs.len() < other.in_ocrs.len() {
            self.in_ocrs.resize(other.in_ocrs.len(), 0);
            self.kept.resize(other.kept.len(), 0);
        }
        for (a, b) in self.in_ocrs.iter_mut().zip(&other.in_ocrs) {
            *a += b;
        }
        for (a, b) in self.kept.iter_mut().zip(&other.kept) {
            *a += b;
        }
        self.dependent_selections += other.dependent_selections;
        self
    }

    pub fn summary(&self) -> ProphetSummary {
        ProphetSummary {
            runs: self.value.count(),
            value: self.value.estimate(),
            ocrs_value: self.ocrs_value.estimate(),
            opt_value: self.opt_value.estimate(),
            keep_rates: self
                .kept
                .iter()
                .zip(&self.in_ocrs)
                .map(|(&k, &n)| proportion(k, n))
                .collect(),
            dependent_selections: self.dependent_selections,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setfn::SetFunctionSpec;

    fn additive(weights: &[f64]) -> ExplicitSetFunction {
        SetFunctionSpec::Additive {
            weights: weights.to_vec(),
        }
        .to_table()
        .unwrap()
    }

    fn point_mass_instance(days: usize, matroid: Matroid) -> ProphetInstance {
        ProphetInstance::new(
            (0..days).map(|d| vec![d]).collect(),
            vec![vec![1.0]; days],
            SetFunctionSpec::Coverage {
                sets: (0..days).map(|d| vec![d % 2, 2 + d]).collect(),
                weights: vec![1.0; days + 2],
            }
            .to_table()
            .unwrap(),
            matroid,
        )
        .unwrap()
    }

    #[test]
    fn induced_matroid_examples() {
        let two_by_two = ProphetInstance::new(
            vec![vec![0, 1], vec![2, 3]],
            vec![vec![0.5, 0.5]; 2],
            additive(&[1.0, 3.0, 2.0, 4.0]),
            Matroid::uniform(2, 1).unwrap(),
        )
        .unwrap();
        let m = two_by_two.induced_matroid().unwrap();
        for s in 0..16u64 {
            assert_eq!(m.is_independent(Subset(s)), Subset(s).len() <= 1);
        }

        let free = ProphetInstance::new(
            vec![vec![0, 1], vec![2, 3]],
            vec![vec![0.5, 0.5]; 2],
            additive(&[1.0; 4]),
            Matroid::free(2).unwrap(),
        )
        .unwrap();
        let m = free.induced_matroid().unwrap();
        for s in 0..16u64 {
            let s = Subset(s);
            let per_day_ok = s.intersection(Subset(0b0011)).len() <= 1 && s.intersection(Subset(0b1100)).len() <= 1;
            assert_eq!(m.is_independent(s), per_day_ok);
        }

        let triangle = Matroid::graphic(vec![(0, 1), (1, 2), (2, 0)]).unwrap();
        let inst = point_mass_instance(3, triangle.clone());
        let m = inst.induced_matroid().unwrap();
        for s in 0..8u64 {
            assert_eq!(m.is_independent(Subset(s)), triangle.is_independent(Subset(s)));
        }
    }

    #[test]
    fn instance_validation() {
        let m = Matroid::free(2).unwrap();
        let f = additive(&[1.0, 1.0]);
        assert!(ProphetInstance::new(vec![vec![0], vec![0]], vec![vec![1.0]; 2], f.clone(), m.clone()).is_err());
        assert!(
            ProphetInstance::new(vec![vec![0], vec![1]], vec![vec![0.9], vec![1.0]], f.clone(), m.clone()).is_err()
        );
        let cut = crate::setfn::examples::two_vertex_cut();
        assert!(ProphetInstance::new(vec![vec![0], vec![1]], vec![vec![1.0]; 2], cut, m.clone()).is_ok());
        let supermodular = ExplicitSetFunction::from_values(2, vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(ProphetInstance::new(vec![vec![0], vec![1]], vec![vec![1.0]; 2], supermodular, m).is_err());
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"days":2,"universes":[[0,1],[2,3]],"priors":[[0.5,0.5],[0.5,0.5]],
            "objective":{"kind":"additive","weights":[1,3,2,4]},"matroid":{"kind":"uniform","n":2,"k":1}}"#;
        let inst: ProphetInstance = serde_json::from_str(text).unwrap();
        assert_eq!(inst.items(), 4);
        let again: ProphetInstance = serde_json::from_str(&serde_json::to_string(&inst).unwrap()).unwrap();
        assert_eq!(again.objective().values(), inst.objective().values());
        assert!(serde_json::from_str::<ProphetInstance>(&text.replace("\"days\":2", "\"days\":3")).is_err());
    }

    #[test]
    fn feasible_vector_examples() {
        let free = point_mass_instance(3, Matroid::free(3).unwrap());
        let plan = ProphetPlan::new(free).unwrap();
        assert_eq!(plan.scale(), 1.0);
        assert_eq!(plan.y().as_slice(), &[0.5, 0.5, 0.5]);

        let rank_one = point_mass_instance(4, Matroid::uniform(4, 1).unwrap());
        let plan = ProphetPlan::new(rank_one).unwrap();
        assert!((plan.scale() - 0.5).abs() <= SCALE_RESOLUTION);
        assert!(plan.induced_matroid().in_polytope(plan.y()).unwrap());
        for &v in plan.y().as_slice() {
            assert!((v - 0.25).abs() <= SCALE_RESOLUTION);
        }

        let single = point_mass_instance(1, Matroid::uniform(1, 1).unwrap());
        assert_eq!(ProphetPlan::new(single).unwrap().y().as_slice(), &[0.5]);
    }

    #[test]
    fn coupling_hand_numbers() {
        let singles = singleton_probabilities(&[0.3, 0.2]);
        assert!((singles[0] - 0.24).abs() < 1e-12);
        assert!((singles[0] / 0.6 - 0.4).abs() < 1e-12);
        // Pr[T={a}] / Pr[a ∈ T]
        assert!((singles[0] / 0.3 - 0.8).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            couple_positions(&[0.2, 0.8], &[0.3, 0.2], 0, &mut rng),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn coupling_marginal_law_matches_product_measure() {
        let x = [0.6, 0.4];
        let y = [0.3, 0.2];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let trials = 200_000;
        let mut counts = [0u64; 4];
        let mut singleton_a = 0u64;
        for _ in 0..trials {
            let realized = usize::from(rng.gen::<f64>() >= x[0]);
            let (t, single) = couple_positions(&x, &y, realized, &mut rng).unwrap();
            counts[t.index()] += 1;
            if single && t == Subset::singleton(0) {
                singleton_a += 1;
            }
        }
        let law = target_law(&y);
        let tv: f64 = counts
            .iter()
            .zip(&law)
            .map(|(&c, &p)| (c as f64 / trials as f64 - p).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv <= 0.01, "tv = {tv}");
        let rate = singleton_a as f64 / trials as f64;
        assert!((rate - 0.24).abs() < 0.005, "{rate}");
    }

    #[test]
    fn single_day_single_item() {
        let inst = ProphetInstance::new(
            vec![vec![0]],
            vec![vec![1.0]],
            additive(&[1.0]),
            Matroid::uniform(1, 1).unwrap(),
        )
        .unwrap();
        assert_eq!(offline_opt(&inst).unwrap(), 1.0);
        let plan = ProphetPlan::new(inst.clone()).unwrap();
        let mut tally = ProphetTally::new(1);
        for seed in 0..40_000 {
            tally.record(&plan.run(&[0], seed).unwrap(), inst.matroid());
        }
        let s = tally.summary();
        // feed {a} w.p. P_y({a}) / x = 1/2, rank-one OCRS accepts it
        assert!((s.value.mean - 0.5).abs() <= 3.0 * s.value.ci95(), "{}", s.value.mean);
    }

    #[test]
    fn point_mass_free_matroid_matches_half_point() {
        let inst = point_mass_instance(4, Matroid::free(4).unwrap());
        let exact = multilinear_exact(inst.objective(), &MarginalVector::uniform(4, 0.5).unwrap()).unwrap();
        let plan = ProphetPlan::new(inst.clone()).unwrap();
        let mut tally = ProphetTally::new(4);
        for seed in 0..40_000 {
            tally.record(&plan.run(&[3, 1, 0, 2], seed).unwrap(), inst.matroid());
        }
        let s = tally.summary();
        assert!(
            (s.value.mean - exact).abs() <= 3.0 * s.value.ci95(),
            "{} vs {exact}",
            s.value.mean
        );
        assert_eq!(offline_opt(&inst).unwrap(), inst.objective().at(Subset::full(4)));
    }

    #[test]
    fn rank_zero_selects_nothing() {
        let inst = point_mass_instance(3, Matroid::uniform(3, 0).unwrap());
        let plan = ProphetPlan::new(inst).unwrap();
        for seed in 0..50 {
            let run = plan.run(&[0, 1, 2], seed).unwrap();
            assert!(run.w.is_empty());
            assert_eq!(run.value, 0.0);
        }
    }

    #[test]
    fn offline_two_by_two() {
        let inst = ProphetInstance::new(
            vec![vec![0, 1], vec![2, 3]],
            vec![vec![0.5, 0.5]; 2],
            additive(&[1.0, 3.0, 2.0, 4.0]),
            Matroid::uniform(2, 1).unwrap(),
        )
        .unwrap();
        // per-realization maxima 2, 4, 3, 4
        assert!((offline_opt(&inst).unwrap() - 3.25).abs() < 1e-12);
        let plan = ProphetPlan::new(inst).unwrap();
        assert_eq!(plan.realized_opt(&[1, 2]), 3.0);
    }

    #[test]
    fn run_invariants() {
        let inst = ProphetInstance::new(
            vec![vec![0, 1, 2], vec![3, 4], vec![5]],
            vec![vec![0.2, 0.3, 0.5], vec![0.9, 0.1], vec![1.0]],
            SetFunctionSpec::Coverage {
                sets: vec![vec![0, 1], vec![1], vec![2, 3], vec![0], vec![3, 4], vec![4]],
                weights: vec![1.0, 2.0, 1.5, 0.5, 1.0],
            }
            .to_table()
            .unwrap(),
            Matroid::uniform(3, 2).unwrap(),
        )
        .unwrap();
        let plan = ProphetPlan::new(inst.clone()).unwrap();
        for seed in 0..500 {
            let run = plan.run(&[2, 0, 1], seed).unwrap();
            assert!(run.t_alg.is_subset_of(run.s_ocrs));
            assert!(inst.matroid().is_independent(run.w));
            let x_w: Subset = run.w.iter().map(|d| run.realized[d]).collect();
            assert_eq!(x_w, run.t_alg);
            assert!(run.value <= run.opt_value + 1e-12);
        }
        assert!(plan.run(&[0, 0, 1], 0).is_err());
        assert_eq!(plan.run(&[2, 0, 1], 7).unwrap(), plan.run(&[2, 0, 1], 7).unwrap());
    }
}
