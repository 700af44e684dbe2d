//! Checkers for the correlation-gap inequalities and the lemmas behind them.
//!
//! Every checker reports a signed slack (`bound − value`, so `≤ 0` passes)
//! and carries a replayable witness when it fails.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_capacity, Error, Result};
use crate::setfn::relax::sample_product;
use crate::setfn::{
    examples, f_max_table, gap_report, multilinear_exact, ExplicitSetFunction, GapReport, MarginalVector,
};
use crate::stats::{proportion, Accumulator};
use crate::subset::Subset;

/// Ground-set cap for the relaxation-chain checkers.
pub const CHAIN_LIMIT: usize = 10;

/// Ground-set cap for the other exact checkers.
pub const EXACT_LIMIT: usize = 12;

/// Everything needed to replay a failing check.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Witness {
    pub f: ExplicitSetFunction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<MarginalVector>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sets: Vec<Subset>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub detail: String,
}

impl Witness {
    pub fn new(f: &ExplicitSetFunction, detail: impl Into<String>) -> Self {
        Witness {
            f: f.clone(),
            x: None,
            sets: Vec::new(),
            params: BTreeMap::new(),
            seed: None,
            detail: detail.into(),
        }
    }

    pub fn with_x(mut self, x: &MarginalVector) -> Self {
        self.x = Some(x.clone());
        self
    }

    pub fn with_sets(mut self, sets: &[Subset]) -> Self {
        self.sets = sets.to_vec();
        self
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

/// Outcome of one or more checks of the same lemma.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LemmaVerdict {
    pub lemma: String,
    pub instances: u64,
    /// Largest `bound − value` seen; `≤ 0` means the inequality held outright.
    pub worst_slack: f64,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

impl LemmaVerdict {
    /// A verdict with no instances, to fold others into.
    pub fn empty(lemma: &str) -> Self {
        LemmaVerdict {
            lemma: lemma.to_string(),
            instances: 0,
            worst_slack: f64::NEG_INFINITY,
            passed: true,
            witness: None,
        }
    }

    /// One check: passes iff `slack ≤ tolerance`. The witness is built only on failure.
    pub fn check(lemma: &str, slack: f64, tolerance: f64, witness: impl FnOnce() -> Witness) -> Self {
        let passed = slack <= tolerance;
        LemmaVerdict {
            lemma: lemma.to_string(),
            instances: 1,
            worst_slack: slack,
            passed,
            witness: (!passed).then(witness),
        }
    }

    /// Keeps the first failing witness.
    pub fn merge(mut self, other: LemmaVerdict) -> Self {
        self.instances += other.instances;
        self.worst_slack = self.worst_slack.max(other.worst_slack);
        self.passed &= other.passed;
        if self.witness.is_none() {
            self.witness = other.witness;
        }
        self
    }
}

fn require_submodular(f: &ExplicitSetFunction) -> Result<()> {
    if let Some(v) = f.submodularity_violation()? {
        return Err(Error::Precondition(format!("function is not submodular: {v:?}")));
    }
    Ok(())
}

fn require_non_negative(f: &ExplicitSetFunction) -> Result<()> {
    if let Some(v) = f.values().iter().find(|v| **v < -f.tolerance()) {
        return Err(Error::Precondition(format!("function takes negative value {v}")));
    }
    Ok(())
}

fn require_dimension(f: &ExplicitSetFunction, x: &MarginalVector) -> Result<()> {
    if x.len() != f.n() {
        return Err(Error::Domain("vector length does not match ground size".into()));
    }
    Ok(())
}

/// A random set whose elements may be dependent.
pub trait DependentSampler {
    fn n(&self) -> usize;
    fn sample(&self, rng: &mut ChaCha8Rng) -> Subset;
}

/// A shared coin lands heads with probability `coin`; on heads each element
/// enters independently with probability `marginal / coin`, on tails the set
/// is empty. Inclusions are positively correlated and the marginals are exact.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LatentCoinSampler {
    pub marginals: Vec<f64>,
    pub coin: f64,
}

impl LatentCoinSampler {
    pub fn new(marginals: Vec<f64>, coin: f64) -> Result<Self> {
        if !(coin > 0.0 && coin <= 1.0) {
            return Err(Error::Domain(format!("coin probability {coin} outside (0, 1]")));
        }
        if let Some(m) = marginals.iter().find(|&&m| !(0.0..=coin).contains(&m)) {
            return Err(Error::Domain(format!("marginal {m} outside [0, coin]")));
        }
        Ok(LatentCoinSampler { marginals, coin })
    }

    /// Exact `E[f(S)]`.
    pub fn expectation(&self, f: &ExplicitSetFunction) -> Result<f64> {
        let conditional: Vec<f64> = self.marginals.iter().map(|m| m / self.coin).collect();
        let heads = multilinear_exact(f, &MarginalVector::new(conditional)?)?;
        Ok(self.coin * heads + (1.0 - self.coin) * f.at(Subset::EMPTY))
    }
}

impl DependentSampler for LatentCoinSampler {
    fn n(&self) -> usize {
        self.marginals.len()
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Subset {
        if rng.gen::<f64>() >= self.coin {
            return Subset::EMPTY;
        }
        let conditional: Vec<f64> = self.marginals.iter().map(|m| m / self.coin).collect();
        sample_product(&conditional, rng)
    }
}

/// `E[f(S)] ≥ (1 − p)·f(∅)` for a random `S` containing each element with
/// probability at most `p`, by sampling with a `3·CI` allowance.
pub fn verify_bfns(
    f: &ExplicitSetFunction,
    sampler: &dyn DependentSampler,
    p: f64,
    trials: u64,
    seed: u64,
) -> Result<LemmaVerdict> {
    if sampler.n() != f.n() {
        return Err(Error::Domain("sampler and function ground sizes differ".into()));
    }
    if trials < 2 {
        return Err(Error::Precondition("at least two trials required".into()));
    }
    require_non_negative(f)?;
    require_submodular(f)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; f.n()];
    let mut acc = Accumulator::default();
    for _ in 0..trials {
        let s = sampler.sample(&mut rng);
        for e in s.iter() {
            counts[e] += 1;
        }
        acc.push(f.at(s));
    }
    for (e, &c) in counts.iter().enumerate() {
        let rate = proportion(c, trials);
        if rate.mean > p + 3.0 * rate.ci95() + 1e-12 {
            return Err(Error::Precondition(format!(
                "element {e} included at rate {} above cap {p}",
                rate.mean
            )));
        }
    }
    let est = acc.estimate();
    let bound = (1.0 - p) * f.at(Subset::EMPTY);
    let slack = bound - est.mean - 3.0 * est.ci95();
    Ok(LemmaVerdict::check("bfns", slack, f.tolerance(), || {
        Witness::new(f, format!("E[f(S)] = {} below (1-p) f(empty) = {bound}", est.mean))
            .with_param("p", p)
            .with_param("trials", trials as f64)
            .with_seed(seed)
    }))
}

/// `F(x) ≥ L(1 − H)·max_S f(S)` when every coordinate lies in `[L, H]`.
pub fn verify_low_high(f: &ExplicitSetFunction, x: &MarginalVector, low: f64, high: f64) -> Result<LemmaVerdict> {
    ensure_capacity("low-high check", EXACT_LIMIT, f.n())?;
    require_dimension(f, x)?;
    if !(0.0 <= low && low <= high && high <= 1.0) {
        return Err(Error::Precondition(format!(
            "need 0 ≤ L ≤ H ≤ 1, got L = {low}, H = {high}"
        )));
    }
    if let Some(v) = x.as_slice().iter().find(|&&v| v < low || v > high) {
        return Err(Error::Precondition(format!("coordinate {v} outside [{low}, {high}]")));
    }
    require_non_negative(f)?;
    require_submodular(f)?;
    let value = multilinear_exact(f, x)?;
    let bound = low * (1.0 - high) * f.max_value();
    Ok(LemmaVerdict::check("lowhigh", bound - value, f.tolerance(), || {
        Witness::new(f, format!("F(x) = {value} below L(1-H) max f = {bound}"))
            .with_x(x)
            .with_param("L", low)
            .with_param("H", high)
    }))
}

/// `F(p·1_A) ≥ p(1 − p)·max_{T⊆A} f(T)`.
pub fn verify_fmv_double(f: &ExplicitSetFunction, a: Subset, p: f64) -> Result<LemmaVerdict> {
    ensure_capacity("double-sampling check", EXACT_LIMIT, f.n())?;
    require_non_negative(f)?;
    require_submodular(f)?;
    let x = MarginalVector::indicator(f.n(), a, p)?;
    let value = multilinear_exact(f, &x)?;
    let best = a.subsets().map(|t| f.at(t)).fold(f64::NEG_INFINITY, f64::max);
    let bound = p * (1.0 - p) * best;
    Ok(LemmaVerdict::check("fmv", bound - value, f.tolerance(), || {
        Witness::new(f, format!("F(p 1_A) = {value} below p(1-p) max = {bound}"))
            .with_sets(&[a])
            .with_param("p", p)
    }))
}

/// `E[f((S∖T) ∪ T_½)] ≥ f(S)/4`, with `T_½` a uniformly random subset of `T`.
pub fn verify_aux_claim(f: &ExplicitSetFunction, s: Subset, t: Subset) -> Result<LemmaVerdict> {
    ensure_capacity("auxiliary claim", EXACT_LIMIT, f.n())?;
    if !s.union(t).is_subset_of(f.full()) {
        return Err(Error::Domain("sets exceed the ground set".into()));
    }
    require_non_negative(f)?;
    require_submodular(f)?;
    let base = s.difference(t);
    let total: f64 = t.subsets().map(|half| f.at(base.union(half))).sum();
    let value = total / (1u64 << t.len()) as f64;
    let bound = f.at(s) / 4.0;
    Ok(LemmaVerdict::check("aux", bound - value, f.tolerance(), || {
        Witness::new(f, format!("expectation {value} below f(S)/4 = {bound}")).with_sets(&[s, t])
    }))
}

fn chain_report(f: &ExplicitSetFunction, x: &MarginalVector) -> Result<GapReport> {
    ensure_capacity("relaxation chain", CHAIN_LIMIT, f.n())?;
    require_dimension(f, x)?;
    require_non_negative(f)?;
    require_submodular(f)?;
    gap_report(f, x)
}

fn chain_verdict(
    lemma: &str,
    f: &ExplicitSetFunction,
    x: &MarginalVector,
    report: &GapReport,
    links: &[(&str, f64, f64)],
) -> LemmaVerdict {
    let (name, slack) = links
        .iter()
        .map(|&(name, lhs, rhs)| (name, lhs - rhs))
        .fold(("", f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    LemmaVerdict::check(lemma, slack, f.tolerance(), || {
        Witness::new(f, format!("{name} fails by {slack}; report {report:?}")).with_x(x)
    })
}

/// `F(x) ≤ f⁺(x) ≤ f*(x) ≤ (1 − 1/e)⁻¹·F(x)` for monotone submodular `f`.
pub fn verify_monotone_gap(f: &ExplicitSetFunction, x: &MarginalVector) -> Result<LemmaVerdict> {
    if let Some(v) = f.monotonicity_violation()? {
        return Err(Error::Precondition(format!("function is not monotone: {v:?}")));
    }
    let r = chain_report(f, x)?;
    let e_factor = 1.0 / (1.0 - (-1.0f64).exp());
    Ok(chain_verdict(
        "mono",
        f,
        x,
        &r,
        &[
            ("F <= f+", r.multilinear, r.f_plus),
            ("f+ <= f*", r.f_plus, r.f_star),
            ("f* <= e/(e-1) F", r.f_star, e_factor * r.multilinear),
        ],
    ))
}

/// `f⁺(x) ≤ 4·f*½(x) ≤ 200·F(x/2)`, `F(x/2) ≤ F_max(x)`, `f⁺(x) ≤ 200·F_max(x)`
/// and `f_max⁺(x) ≤ 200·F_max(x)` for non-negative submodular `f`.
pub fn verify_nonmonotone_chain(f: &ExplicitSetFunction, x: &MarginalVector) -> Result<LemmaVerdict> {
    let r = chain_report(f, x)?;
    Ok(chain_verdict(
        "chain",
        f,
        x,
        &r,
        &[
            ("f+ <= 4 f*1/2", r.f_plus, 4.0 * r.f_star_half),
            ("f*1/2 <= 50 F(x/2)", r.f_star_half, 50.0 * r.multilinear_half),
            ("F(x/2) <= F_max(x)", r.multilinear_half, r.multilinear_max),
            ("f+ <= 200 F_max(x)", r.f_plus, 200.0 * r.multilinear_max),
            ("f_max+ <= 200 F_max(x)", r.f_max_plus, 200.0 * r.multilinear_max),
        ],
    ))
}

/// The four `f_max` values of the directed path `u → v → w → x` and the
/// marginal comparison they produce.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FmaxWitness {
    /// `f({v}), f({u,v}), f({v,w}), f({u,w})`.
    pub f_values: [f64; 4],
    /// `f_max({v}), f_max({u,v}), f_max({v,w}), f_max({u,v,w})`.
    pub f_max_values: [f64; 4],
    /// `f_max({u,v}) − f_max({v})`.
    pub smaller_gain: f64,
    /// `f_max({u,v,w}) − f_max({v,w})`.
    pub larger_gain: f64,
    pub verdict: LemmaVerdict,
}

pub fn nonsubmodularity_witness_fmax() -> Result<FmaxWitness> {
    let f = examples::four_path_cut();
    let fmax = f_max_table(&f)?;
    let (u, v, w) = (0, 1, 2);
    let set = |items: &[usize]| Subset::from_elements(items.iter().copied());
    let f_values = [set(&[v]), set(&[u, v]), set(&[v, w]), set(&[u, w])].map(|s| f.at(s));
    let f_max_values = [set(&[v]), set(&[u, v]), set(&[v, w]), set(&[u, v, w])].map(|s| fmax.at(s));
    let smaller_gain = f_max_values[1] - f_max_values[0];
    let larger_gain = f_max_values[3] - f_max_values[2];
    // passing means the violation is present: the larger set gains strictly more
    let verdict = LemmaVerdict::check("fmax", smaller_gain - larger_gain, -0.5, || {
        Witness::new(&f, "f_max marginals did not show the expected violation")
    });
    Ok(FmaxWitness {
        f_values,
        f_max_values,
        smaller_gain,
        larger_gain,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setfn::examples::two_vertex_cut;
    use crate::setfn::SetFunctionSpec;

    fn x(v: &[f64]) -> MarginalVector {
        MarginalVector::new(v.to_vec()).unwrap()
    }

    fn random_cut(n: usize, rng: &mut ChaCha8Rng) -> ExplicitSetFunction {
        let mut arcs = Vec::new();
        for u in 0..n {
            for v in 0..n {
                if u != v && rng.gen_bool(0.4) {
                    arcs.push((u, v, rng.gen_range(0.1..2.0)));
                }
            }
        }
        SetFunctionSpec::directed_cut(n, &arcs).to_table().unwrap()
    }

    #[test]
    fn bfns_examples() {
        let f = two_vertex_cut();
        let none = LatentCoinSampler::new(vec![0.0, 0.0], 1.0).unwrap();
        let v = verify_bfns(&f, &none, 0.0, 1000, 1).unwrap();
        assert!(v.passed && v.worst_slack == 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = random_cut(5, &mut rng);
        let shifted = ExplicitSetFunction::from_fn(5, |s| g.at(s) + 1.0).unwrap();
        let sampler = LatentCoinSampler::new(vec![0.3, 0.1, 0.3, 0.2, 0.0], 0.6).unwrap();
        let v = verify_bfns(&shifted, &sampler, 0.3, 20_000, 2).unwrap();
        assert!(v.passed, "{v:?}");
        assert!(sampler.expectation(&shifted).unwrap() >= 0.7 * shifted.at(Subset::EMPTY));

        let greedy = LatentCoinSampler::new(vec![0.9, 0.9], 0.95).unwrap();
        assert!(matches!(
            verify_bfns(&f, &greedy, 0.5, 5000, 0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn latent_coin_marginals_and_correlation() {
        let sampler = LatentCoinSampler::new(vec![0.2, 0.3], 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trials = 100_000;
        let mut counts = [0u64; 4];
        for _ in 0..trials {
            counts[sampler.sample(&mut rng).index()] += 1;
        }
        let p = |c: u64| c as f64 / trials as f64;
        assert!((p(counts[1] + counts[3]) - 0.2).abs() < 0.005);
        assert!((p(counts[2] + counts[3]) - 0.3).abs() < 0.005);
        // joint = 0.5 · 0.4 · 0.6 = 0.12 > 0.06
        assert!((p(counts[3]) - 0.12).abs() < 0.005);
        assert!(LatentCoinSampler::new(vec![0.7], 0.5).is_err());
    }

    #[test]
    fn low_high_examples() {
        let f = two_vertex_cut();
        let v = verify_low_high(&f, &x(&[0.5, 0.5]), 0.5, 0.5).unwrap();
        assert!(v.passed);
        assert!(v.worst_slack.abs() < 1e-15);
        assert!(verify_low_high(&f, &x(&[0.2, 0.9]), 0.0, 1.0).unwrap().passed);
        assert!(matches!(
            verify_low_high(&f, &x(&[0.2, 0.9]), 0.3, 1.0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn fmv_and_aux_examples() {
        let f = two_vertex_cut();
        let v = verify_fmv_double(&f, Subset::full(2), 0.5).unwrap();
        assert!(v.passed && v.worst_slack.abs() < 1e-15);
        assert!(verify_fmv_double(&f, Subset::full(2), 1.0).unwrap().passed);

        let a = verify_aux_claim(&f, Subset::singleton(0), Subset::full(2)).unwrap();
        assert!(a.passed && a.worst_slack.abs() < 1e-15);
        let empty_t = verify_aux_claim(&f, Subset::singleton(0), Subset::EMPTY).unwrap();
        assert!(empty_t.passed && (empty_t.worst_slack + 0.75).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let g = random_cut(6, &mut rng);
            let s = Subset(rng.gen::<u64>() & 63);
            let t = Subset(rng.gen::<u64>() & 63);
            assert!(verify_aux_claim(&g, s, t).unwrap().passed);
            for p in [0.1, 0.3, 0.5, 0.7, 0.9] {
                assert!(verify_fmv_double(&g, t, p).unwrap().passed);
            }
        }
    }

    #[test]
    fn chain_examples() {
        let f = two_vertex_cut();
        let v = verify_nonmonotone_chain(&f, &x(&[0.5, 0.5])).unwrap();
        assert!(v.passed, "{v:?}");
        let r = gap_report(&f, &x(&[0.5, 0.5])).unwrap();
        assert!((r.f_plus - 0.5).abs() < 1e-9);
        assert!((r.f_star_half - 0.25).abs() < 1e-9);
        assert!((r.multilinear_half - 0.1875).abs() < 1e-12);

        assert!(matches!(
            verify_monotone_gap(&f, &x(&[0.5, 0.5])),
            Err(Error::Precondition(_))
        ));
        let cov = SetFunctionSpec::Coverage {
            sets: vec![vec![0, 1], vec![1, 2], vec![2, 3], vec![0]],
            weights: vec![1.0, 2.0, 1.0, 0.5],
        }
        .to_table()
        .unwrap();
        for k in 0..10 {
            let t = k as f64 / 10.0;
            let pt = x(&[t, 1.0 - t, 0.5 * t, 0.3]);
            assert!(verify_monotone_gap(&cov, &pt).unwrap().passed);
        }
    }

    #[test]
    fn verdict_merge_keeps_first_witness() {
        let f = two_vertex_cut();
        let ok = LemmaVerdict::check("aux", -1.0, 0.0, || unreachable!());
        let bad1 = LemmaVerdict::check("aux", 2.0, 0.0, || Witness::new(&f, "first"));
        let bad2 = LemmaVerdict::check("aux", 3.0, 0.0, || Witness::new(&f, "second"));
        let all = LemmaVerdict::empty("aux").merge(ok).merge(bad1).merge(bad2);
        assert_eq!(all.instances, 3);
        assert!(!all.passed);
        assert_eq!(all.worst_slack, 3.0);
        assert_eq!(all.witness.unwrap().detail, "first");
    }

    #[test]
    fn fmax_example() {
        let w = nonsubmodularity_witness_fmax().unwrap();
        assert_eq!(w.f_values, [1.0, 1.0, 1.0, 2.0]);
        assert_eq!(w.f_max_values, [1.0, 1.0, 1.0, 2.0]);
        assert_eq!((w.smaller_gain, w.larger_gain), (0.0, 1.0));
        assert!(w.verdict.passed);
    }
}
