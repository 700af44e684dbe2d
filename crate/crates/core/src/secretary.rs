//! Monotone subadditive downward-closed secretary: price discovery on the
//! first half of the stream, a random price from a geometric grid, and a
//! unit-value subroutine run against the priced family.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_capacity, Error, Result};
use crate::setfn::{SetFunction, SetFunctionSpec};
use crate::subset::Subset;
use crate::{ENUMERATION_LIMIT, EPS};

/// Largest set whose subsets are enumerated for a price check.
pub const PRICE_CHECK_LIMIT: usize = 20;

/// Enumeration budget for [`SecretaryInstance::offline_opt`].
pub const OFFLINE_BUDGET: u64 = 1_000_000;

/// Largest ground set for [`xos_diagnostic`].
pub const DIAGNOSTIC_LIMIT: usize = 10;

const SEARCH_NODES: usize = 200_000;

/// Sets contained in some maximal set and, optionally, of bounded size.
#[derive(Clone, Debug, PartialEq)]
pub struct DownwardClosedFamily {
    n: usize,
    maximal: Vec<Subset>,
    max_size: Option<usize>,
}

impl DownwardClosedFamily {
    /// Dominated sets in `sets` are dropped.
    pub fn new(n: usize, sets: Vec<Subset>, max_size: Option<usize>) -> Result<Self> {
        ensure_capacity("secretary ground set", 64, n)?;
        let ground = Subset::full(n);
        if let Some(s) = sets.iter().find(|s| !s.is_subset_of(ground)) {
            return Err(Error::Invalid(format!("{s:?} exceeds the ground set")));
        }
        let mut sorted = sets;
        sorted.sort_by_key(|s| std::cmp::Reverse(s.len()));
        sorted.dedup();
        let mut maximal: Vec<Subset> = Vec::new();
        for s in sorted {
            if !maximal.iter().any(|m| s.is_subset_of(*m)) {
                maximal.push(s);
            }
        }
        maximal.sort();
        Ok(DownwardClosedFamily { n, maximal, max_size })
    }

    pub fn all_subsets(n: usize) -> Result<Self> {
        Self::new(n, vec![Subset::full(n)], None)
    }

    pub fn bounded_size(n: usize, k: usize) -> Result<Self> {
        Self::new(n, vec![Subset::full(n)], Some(k))
    }

    pub fn singletons(n: usize) -> Result<Self> {
        Self::new(n, (0..n).map(Subset::singleton).collect(), None)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn maximal_sets(&self) -> &[Subset] {
        &self.maximal
    }

    pub fn max_size(&self) -> Option<usize> {
        self.max_size
    }

    pub fn contains(&self, t: Subset) -> bool {
        self.max_size.is_none_or(|k| t.len() <= k) && self.maximal.iter().any(|m| t.is_subset_of(*m))
    }

    /// Size of the largest member.
    pub fn rank(&self) -> usize {
        let largest = self.maximal.iter().map(|m| m.len()).max().unwrap_or(0);
        self.max_size.map_or(largest, |k| largest.min(k))
    }
}

/// A downward-closed membership oracle queried by the unit-value subroutine.
pub trait MembershipOracle {
    fn is_member(&self, t: Subset) -> Result<bool>;

    /// Whether `member + e` is a member, given that `member` is one.
    fn can_extend(&self, member: Subset, e: usize) -> Result<bool> {
        self.is_member(member.with(e))
    }
}

impl MembershipOracle for DownwardClosedFamily {
    fn is_member(&self, t: Subset) -> Result<bool> {
        Ok(self.contains(t))
    }
}

/// Members `T` of a family with `f(S) ≥ α|S|` for every non-empty `S ⊆ T`.
pub struct PricedFamily<'a> {
    pub family: &'a DownwardClosedFamily,
    pub valuation: &'a dyn SetFunction,
    pub alpha: f64,
}

impl PricedFamily<'_> {
    fn supports(&self, s: Subset) -> bool {
        self.valuation.eval(s) >= self.alpha * s.len() as f64 - EPS
    }
}

impl MembershipOracle for PricedFamily<'_> {
    fn is_member(&self, t: Subset) -> Result<bool> {
        ensure_capacity("priced membership", PRICE_CHECK_LIMIT, t.len())?;
        Ok(self.family.contains(t) && t.subsets().filter(|s| !s.is_empty()).all(|s| self.supports(s)))
    }

    fn can_extend(&self, member: Subset, e: usize) -> Result<bool> {
        let t = member.with(e);
        ensure_capacity("priced membership", PRICE_CHECK_LIMIT, t.len())?;
        Ok(self.family.contains(t) && member.subsets().all(|s| self.supports(s.with(e))))
    }
}

/// `min_{∅≠S⊆T} f(S)/|S|`.
pub fn best_uniform_price(f: &dyn SetFunction, t: Subset) -> Result<f64> {
    if t.is_empty() {
        return Err(Error::Domain("price of the empty set is undefined".into()));
    }
    ensure_capacity("uniform price", PRICE_CHECK_LIMIT, t.len())?;
    Ok(t.subsets()
        .filter(|s| !s.is_empty())
        .map(|s| f.eval(s) / s.len() as f64)
        .fold(f64::INFINITY, f64::min))
}

/// Outcome of the classic rule on the first half of the stream.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceDiscovery {
    /// Position within the first half of the selected item.
    pub selected: Option<usize>,
    /// Largest value in the first half.
    pub max_value: f64,
    pub observed: usize,
    pub horizon: usize,
}

/// Observe `⌈n/4⌉` items, then pick the first later item (up to position
/// `⌊n/2⌋`) beating everything seen so far. `values` is the whole stream or
/// at least its first half.
pub fn classic_secretary_price(values: &[f64], n: usize) -> PriceDiscovery {
    let observed = n.div_ceil(4);
    let horizon = (n / 2).min(values.len());
    let mut best = f64::NEG_INFINITY;
    let mut selected = None;
    for (i, &v) in values[..horizon].iter().enumerate() {
        if i >= observed && selected.is_none() && v > best {
            selected = Some(i);
        }
        best = best.max(v);
    }
    PriceDiscovery {
        selected,
        max_value: if horizon == 0 { 0.0 } else { best },
        observed,
        horizon,
    }
}

/// The price grid `M / 2^t` for `t = 0..=⌊log₂ r⌋`.
pub fn alpha_grid(m: f64, r: usize) -> Result<Vec<f64>> {
    if m.is_nan() || m <= 0.0 || r == 0 {
        return Err(Error::Domain(format!(
            "grid needs M > 0 and r ≥ 1, got M = {m}, r = {r}"
        )));
    }
    let levels = r.ilog2() as i32 + 1;
    Ok((0..levels).map(|t| m / 2f64.powi(t)).collect())
}

/// Uniform draw from [`alpha_grid`].
pub fn guess_alpha<R: Rng + ?Sized>(m: f64, r: usize, rng: &mut R) -> Result<f64> {
    let grid = alpha_grid(m, r)?;
    Ok(grid[rng.gen_range(0..grid.len())])
}

/// Online unit-value downward-closed secretary used as a black box.
pub trait UnitValueSecretary: Sync {
    fn name(&self) -> &'static str;

    /// Selects a member from `stream` in arrival order. Every accepted
    /// prefix must be a member of `oracle`.
    fn select(&self, stream: &[usize], oracle: &dyn MembershipOracle, seed: u64) -> Result<Subset>;
}

/// Observe half the stream, take the largest observed member's size as a
/// target, then accept greedily until the target is met.
#[derive(Clone, Copy, Debug, Default)]
pub struct SampleGreedy;

impl UnitValueSecretary for SampleGreedy {
    fn name(&self) -> &'static str {
        "sample-greedy"
    }

    fn select(&self, stream: &[usize], oracle: &dyn MembershipOracle, _seed: u64) -> Result<Subset> {
        let (sample, rest) = stream.split_at(stream.len() / 2);
        let target = largest_member(sample, oracle)?.len().max(1);
        let mut accepted = Subset::EMPTY;
        let mut chain = Vec::new();
        for &e in rest {
            if accepted.len() >= target {
                break;
            }
            if oracle.can_extend(accepted, e)? {
                accepted = accepted.with(e);
                chain.push(accepted);
            }
        }
        for prefix in chain {
            if !oracle.is_member(prefix)? {
                return Err(Error::Protocol(format!(
                    "oracle accepted an extension to {prefix:?} but rejects it on recheck"
                )));
            }
        }
        Ok(accepted)
    }
}

/// Largest member found by depth-first search over `items`, with pruning and
/// a node budget.
fn largest_member(items: &[usize], oracle: &dyn MembershipOracle) -> Result<Subset> {
    struct Search<'a> {
        items: &'a [usize],
        oracle: &'a dyn MembershipOracle,
        best: Subset,
        nodes: usize,
    }
    impl Search<'_> {
        fn go(&mut self, current: Subset, next: usize) -> Result<()> {
            if current.len() > self.best.len() {
                self.best = current;
            }
            for i in next..self.items.len() {
                if current.len() + (self.items.len() - i) <= self.best.len() || self.nodes >= SEARCH_NODES {
                    return Ok(());
                }
                self.nodes += 1;
                let e = self.items[i];
                if self.oracle.can_extend(current, e)? {
                    self.go(current.with(e), i + 1)?;
                }
            }
            Ok(())
        }
    }
    let mut search = Search {
        items,
        oracle,
        best: Subset::EMPTY,
        nodes: 0,
    };
    search.go(Subset::EMPTY, 0)?;
    Ok(search.best)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct InstanceSpec {
    n: usize,
    valuation: SetFunctionSpec,
    maximal_sets: Vec<Subset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_size: Option<usize>,
}

/// Items with a monotone subadditive valuation and a downward-closed family.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "InstanceSpec", into = "InstanceSpec")]
pub struct SecretaryInstance {
    valuation: SetFunctionSpec,
    family: DownwardClosedFamily,
}

/// Options for one run of the reduction.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct SecretaryOptions {
    /// Fixed price instead of a draw from the grid.
    pub alpha_override: Option<f64>,
}

/// One run of the reduction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecretaryRun {
    pub w: Subset,
    pub value: f64,
    /// Largest singleton value in the first half.
    pub m: f64,
    pub alpha: Option<f64>,
    /// Item picked by the classic rule, if any.
    pub classic_pick: Option<usize>,
    /// Whether the classic pick attains the first-half maximum.
    pub classic_hit: bool,
    /// `W ∈ 𝓕` and `f(W) ≥ α|W| − 1e-9`.
    pub certified: bool,
}

impl SecretaryInstance {
    /// Accepts structurally monotone subadditive valuations, or explicit
    /// tables small enough to verify exhaustively.
    pub fn new(valuation: SetFunctionSpec, family: DownwardClosedFamily) -> Result<Self> {
        valuation.validate()?;
        if valuation.n() != family.n() {
            return Err(Error::Invalid(format!(
                "valuation over {} items, family over {}",
                valuation.n(),
                family.n()
            )));
        }
        if !valuation.is_structurally_monotone_subadditive() {
            if valuation.n() > ENUMERATION_LIMIT {
                return Err(Error::Invalid(
                    "valuation is neither a monotone subadditive kind nor small enough to verify".into(),
                ));
            }
            let table = valuation.to_table()?;
            if let Some(w) = table.monotonicity_violation()? {
                return Err(Error::Invalid(format!("valuation is not monotone: {w:?}")));
            }
            if let Some(w) = table.subadditivity_violation()? {
                return Err(Error::Invalid(format!("valuation is not subadditive: {w:?}")));
            }
        }
        Ok(SecretaryInstance { valuation, family })
    }

    pub fn n(&self) -> usize {
        self.family.n()
    }

    pub fn valuation(&self) -> &SetFunctionSpec {
        &self.valuation
    }

    pub fn family(&self) -> &DownwardClosedFamily {
        &self.family
    }

    pub fn r(&self) -> usize {
        self.family.rank()
    }

    pub fn priced(&self, alpha: f64) -> PricedFamily<'_> {
        PricedFamily {
            family: &self.family,
            valuation: &self.valuation,
            alpha,
        }
    }

    /// Exact `(T*, OPT)` over the family; the first maximizer in enumeration
    /// order wins ties.
    pub fn offline_opt(&self) -> Result<(Subset, f64)> {
        let cap = self.family.max_size.unwrap_or(usize::MAX);
        let work = self
            .family
            .maximal
            .iter()
            .map(|m| bounded_subset_count(m.len(), cap))
            .fold(0u64, u64::saturating_add);
        if work > OFFLINE_BUDGET {
            return Err(Error::Capacity {
                what: "secretary offline enumeration",
                limit: OFFLINE_BUDGET as usize,
                got: work.min(usize::MAX as u64) as usize,
            });
        }
        let mut best = (Subset::EMPTY, self.valuation.eval(Subset::EMPTY));
        for m in &self.family.maximal {
            for s in m.subsets().filter(|s| s.len() <= cap) {
                let v = self.valuation.eval(s);
                if v > best.1 {
                    best = (s, v);
                }
            }
        }
        Ok(best)
    }

    /// The full reduction on arrival order `order`.
    pub fn run(
        &self,
        order: &[usize],
        seed: u64,
        options: SecretaryOptions,
        black_box: &dyn UnitValueSecretary,
    ) -> Result<SecretaryRun> {
        let n = self.n();
        let mut seen = Subset::EMPTY;
        for &e in order {
            if e >= n || seen.contains(e) {
                return Err(Error::Domain("arrival order is not a permutation of items".into()));
            }
            seen = seen.with(e);
        }
        if seen.len() != n {
            return Err(Error::Domain("arrival order is not a permutation of items".into()));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = order
            .iter()
            .map(|&e| self.valuation.eval(Subset::singleton(e)))
            .collect();
        let discovery = classic_secretary_price(&values, n);
        let m = discovery.max_value;
        let classic_pick = discovery.selected.map(|i| order[i]);
        let classic_hit = discovery.selected.is_some_and(|i| values[i] == m);
        let empty = SecretaryRun {
            w: Subset::EMPTY,
            value: self.valuation.eval(Subset::EMPTY),
            m,
            alpha: None,
            classic_pick,
            classic_hit,
            certified: true,
        };
        let alpha = match options.alpha_override {
            Some(a) => a,
            None if m > 0.0 && self.r() > 0 => guess_alpha(m, self.r(), &mut rng)?,
            None => return Ok(empty),
        };
        let priced = self.priced(alpha);
        let w = black_box.select(&order[discovery.horizon..], &priced, rng.gen())?;
        let value = self.valuation.eval(w);
        let certified = self.family.contains(w) && value >= alpha * w.len() as f64 - EPS;
        Ok(SecretaryRun {
            w,
            value,
            alpha: Some(alpha),
            certified,
            ..empty
        })
    }
}

fn bounded_subset_count(size: usize, cap: usize) -> u64 {
    if cap >= size {
        return 1u64.checked_shl(size as u32).unwrap_or(u64::MAX);
    }
    let mut total = 0u64;
    let mut binom = 1u64;
    for j in 0..=cap {
        total = total.saturating_add(binom);
        binom = binom.saturating_mul((size - j) as u64) / (j as u64 + 1);
    }
    total
}

impl TryFrom<InstanceSpec> for SecretaryInstance {
    type Error = Error;

    fn try_from(spec: InstanceSpec) -> Result<Self> {
        let family = DownwardClosedFamily::new(spec.n, spec.maximal_sets, spec.max_size)?;
        SecretaryInstance::new(spec.valuation, family)
    }
}

impl From<SecretaryInstance> for InstanceSpec {
    fn from(instance: SecretaryInstance) -> Self {
        InstanceSpec {
            n: instance.n(),
            maximal_sets: instance.family.maximal.clone(),
            max_size: instance.family.max_size,
            valuation: instance.valuation,
        }
    }
}

/// Comparison of `f` with `v̂(S) = max_T p(T)·|T ∩ S|`, where `p(T)` is the
/// best uniform price of `T`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct XosDiagnostic {
    pub n: usize,
    /// Largest `f(S) / v̂(S)`.
    pub max_ratio: f64,
    pub argmax: Subset,
    /// Sets with `v̂(S) > f(S) + tolerance`.
    pub violations: u64,
    /// Largest `v̂(S) − f(S)`.
    pub worst_excess: f64,
    /// `1 + ln n`.
    pub harmonic_bound: f64,
    /// `ln|S| / (2e)` at the argmax.
    pub lemma_rate: f64,
}

pub fn xos_diagnostic(f: &dyn SetFunction) -> Result<XosDiagnostic> {
    let n = f.ground_size();
    ensure_capacity("xos diagnostic", DIAGNOSTIC_LIMIT, n)?;
    let size = 1usize << n;
    let values: Vec<f64> = (0..size as u64).map(|s| f.eval(Subset(s))).collect();
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let tol = EPS * scale.max(1.0);
    let mut price = vec![f64::INFINITY; size];
    for t in 1..size {
        let set = Subset(t as u64);
        price[t] = set
            .iter()
            .map(|e| price[set.without(e).index()])
            .fold(values[t] / set.len() as f64, f64::min);
    }
    let mut diag = XosDiagnostic {
        n,
        max_ratio: 1.0,
        argmax: Subset::EMPTY,
        violations: 0,
        worst_excess: f64::NEG_INFINITY,
        harmonic_bound: 1.0 + (n.max(1) as f64).ln(),
        lemma_rate: 0.0,
    };
    for (s, &value) in values.iter().enumerate() {
        let set = Subset(s as u64);
        let v_hat = (1..size)
            .map(|t| price[t] * Subset(t as u64).intersection(set).len() as f64)
            .fold(0.0, f64::max);
        let excess = v_hat - value;
        diag.worst_excess = diag.worst_excess.max(excess);
        if excess > tol {
            diag.violations += 1;
        }
        let ratio = if value <= tol { 1.0 } else { value / v_hat };
        if ratio > diag.max_ratio {
            diag.max_ratio = ratio;
            diag.argmax = set;
        }
    }
    diag.lemma_rate = (diag.argmax.len().max(1) as f64).ln() / (2.0 * std::f64::consts::E);
    Ok(diag)
}
