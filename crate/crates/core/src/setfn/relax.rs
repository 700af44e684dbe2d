use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{concave_closure, ExplicitSetFunction, MarginalVector, SetFunction};
use crate::error::{ensure_capacity, Error, Result};
use crate::stats::{Accumulator, Estimate};
use crate::subset::Subset;
use crate::ENUMERATION_LIMIT;

fn check_dimensions(f: &ExplicitSetFunction, x: &MarginalVector, what: &'static str, limit: usize) -> Result<()> {
    ensure_capacity(what, limit, f.n())?;
    if x.len() != f.n() {
        return Err(Error::Domain(format!(
            "vector has {} coordinates, ground set has {}",
            x.len(),
            f.n()
        )));
    }
    Ok(())
}

/// Probability of every subset under independent rounding of `x`, in bitmask order.
pub fn product_weights(x: &[f64]) -> Vec<f64> {
    let mut w = Vec::with_capacity(1 << x.len());
    w.push(1.0);
    for &p in x {
        let half = w.len();
        w.extend_from_within(..);
        for (lo, hi) in (0..half).zip(half..) {
            w[hi] *= p;
            w[lo] *= 1.0 - p;
        }
    }
    w
}

/// `F(x) = E_{S~x} f(S)` by exact enumeration.
pub fn multilinear_exact(f: &ExplicitSetFunction, x: &MarginalVector) -> Result<f64> {
    check_dimensions(f, x, "multilinear extension", ENUMERATION_LIMIT)?;
    Ok(product_weights(x.as_slice())
        .iter()
        .zip(f.values())
        .map(|(p, v)| p * v)
        .sum())
}

/// Sample-mean estimate of `F(x)` for any oracle; deterministic given `seed`.
pub fn multilinear_mc(f: &dyn SetFunction, x: &MarginalVector, trials: u64, seed: u64) -> Result<Estimate> {
    if trials == 0 {
        return Err(Error::Precondition("multilinear_mc needs at least one trial".into()));
    }
    if x.len() != f.ground_size() {
        return Err(Error::Domain("vector length does not match ground size".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = Accumulator::default();
    for _ in 0..trials {
        let s = sample_product(x.as_slice(), &mut rng);
        acc.push(f.eval(s));
    }
    Ok(acc.estimate())
}

/// Draws `S ~ x`: each element independently with probability `x_i`.
pub(crate) fn sample_product<R: Rng + ?Sized>(x: &[f64], rng: &mut R) -> Subset {
    x.iter()
        .enumerate()
        .filter(|&(_, &p)| p > 0.0 && rng.gen::<f64>() < p)
        .map(|(i, _)| i)
        .collect()
}

/// `f_max(S) = max_{T ⊆ S} f(T)`, by the recurrence
/// `f_max(S) = max(f(S), max_e f_max(S - e))`.
pub fn f_max_table(f: &ExplicitSetFunction) -> Result<ExplicitSetFunction> {
    ensure_capacity("f_max table", ENUMERATION_LIMIT, f.n())?;
    let mut table = f.values().to_vec();
    for s in 1..table.len() {
        let subset = Subset(s as u64);
        let best = subset
            .iter()
            .map(|e| table[subset.without(e).index()])
            .fold(table[s], f64::max);
        table[s] = best;
    }
    ExplicitSetFunction::new(f.ground().clone(), table)
}

/// `f*(x) = min_S { f(S) + Σ_{i∉S} f_S(i) x_i }`.
pub fn continuous_relaxation(f: &ExplicitSetFunction, x: &MarginalVector) -> Result<f64> {
    check_dimensions(f, x, "continuous relaxation", ENUMERATION_LIMIT)?;
    let n = f.n();
    let full = f.full();
    let value = (0..1u64 << n)
        .map(|s| {
            let s = Subset(s);
            let base = f.at(s);
            base + full
                .difference(s)
                .iter()
                .map(|i| (f.at(s.with(i)) - base) * x[i])
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min);
    Ok(value)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StarHalf {
    pub value: f64,
    /// The first minimizing set in bitmask order.
    pub minimizer: Subset,
}

/// Ground-set cap for `f*_{1/2}`; the cost is `n * 3^n`.
const STAR_HALF_LIMIT: usize = 12;

/// `f*_{1/2}(x) = min_S E_{T ~ 1_S/2} [ f(T) + Σ_{i∉S} f_T(i) x_i ]`.
pub fn g_star_half(f: &ExplicitSetFunction, x: &MarginalVector) -> Result<StarHalf> {
    check_dimensions(f, x, "f*_1/2", STAR_HALF_LIMIT)?;
    let n = f.n();
    let full = f.full();
    let mut best = StarHalf {
        value: f64::INFINITY,
        minimizer: Subset::EMPTY,
    };
    for s in 0..1u64 << n {
        let s = Subset(s);
        let outside: Vec<usize> = full.difference(s).iter().collect();
        let total: f64 = s
            .subsets()
            .map(|t| {
                let base = f.at(t);
                base + outside.iter().map(|&i| (f.at(t.with(i)) - base) * x[i]).sum::<f64>()
            })
            .sum();
        let value = total / (1u64 << s.len()) as f64;
        if value < best.value {
            best = StarHalf { value, minimizer: s };
        }
    }
    Ok(best)
}

/// Every relaxation of one `(f, x)` pair, with the ratios the correlation-gap
/// chain compares.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    #[serde(rename = "F_at_x")]
    pub multilinear: f64,
    #[serde(rename = "F_at_half_x")]
    pub multilinear_half: f64,
    pub f_plus: f64,
    pub f_star: f64,
    pub f_star_half: f64,
    #[serde(rename = "F_max_at_x")]
    pub multilinear_max: f64,
    /// Concave closure of `f_max` at `x`.
    pub f_max_plus: f64,
    pub star_half_minimizer: Subset,
    pub ratios: GapRatios,
}

/// Ratios of the report's fields; `None` where the denominator is zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRatios {
    pub f_plus_over_f: Option<f64>,
    pub f_plus_over_f_star_half: Option<f64>,
    pub f_star_half_over_f_half: Option<f64>,
    pub f_half_over_f_max: Option<f64>,
    pub f_plus_over_f_max: Option<f64>,
    pub f_max_plus_over_f_max: Option<f64>,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

/// Ground-set cap for the full report (the concave closure LP dominates).
const REPORT_LIMIT: usize = 12;

pub fn gap_report(f: &ExplicitSetFunction, x: &MarginalVector) -> Result<GapReport> {
    check_dimensions(f, x, "gap report", REPORT_LIMIT)?;
    let fmax = f_max_table(f)?;
    let multilinear = multilinear_exact(f, x)?;
    let multilinear_half = multilinear_exact(f, &x.halved())?;
    let f_plus = concave_closure(f, x)?.value;
    let f_star = continuous_relaxation(f, x)?;
    let star = g_star_half(f, x)?;
    let multilinear_max = multilinear_exact(&fmax, x)?;
    let f_max_plus = concave_closure(&fmax, x)?.value;
    Ok(GapReport {
        multilinear,
        multilinear_half,
        f_plus,
        f_star,
        f_star_half: star.value,
        multilinear_max,
        f_max_plus,
        star_half_minimizer: star.minimizer,
        ratios: GapRatios {
            f_plus_over_f: ratio(f_plus, multilinear),
            f_plus_over_f_star_half: ratio(f_plus, star.value),
            f_star_half_over_f_half: ratio(star.value, multilinear_half),
            f_half_over_f_max: ratio(multilinear_half, multilinear_max),
            f_plus_over_f_max: ratio(f_plus, multilinear_max),
            f_max_plus_over_f_max: ratio(f_max_plus, multilinear_max),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setfn::examples::{four_path_cut, two_vertex_cut};
    use crate::setfn::SetFunctionSpec;

    fn x(v: &[f64]) -> MarginalVector {
        MarginalVector::new(v.to_vec()).unwrap()
    }

    /// Brute-force `F` written directly from the definition.
    fn multilinear_oracle(f: &ExplicitSetFunction, x: &[f64]) -> f64 {
        (0..1u64 << f.n())
            .map(|s| {
                let p: f64 = (0..f.n())
                    .map(|i| if s >> i & 1 == 1 { x[i] } else { 1.0 - x[i] })
                    .product();
                p * f.values()[s as usize]
            })
            .sum()
    }

    #[test]
    fn multilinear_examples() {
        let f = two_vertex_cut();
        assert!((multilinear_exact(&f, &x(&[0.5, 0.5])).unwrap() - 0.25).abs() < 1e-12);
        assert!((multilinear_exact(&f, &x(&[0.25, 0.25])).unwrap() - 0.1875).abs() < 1e-12);
        for (eps, expected) in [(0.1, 0.01), (0.05, 0.0025)] {
            let v = multilinear_exact(&f, &x(&[eps, 1.0 - eps])).unwrap();
            assert!((v - expected).abs() < 1e-12);
        }
        let g = four_path_cut();
        for a in 0..16u64 {
            let ind = MarginalVector::indicator(4, Subset(a), 1.0).unwrap();
            assert_eq!(multilinear_exact(&g, &ind).unwrap(), g.values()[a as usize]);
        }
    }

    #[test]
    fn multilinear_matches_definition() {
        let f = SetFunctionSpec::Coverage {
            sets: vec![vec![0, 1], vec![1], vec![2, 3], vec![0, 3], vec![4], vec![1, 4]],
            weights: vec![1.0, 0.3, 2.0, 0.7, 1.1],
        }
        .to_table()
        .unwrap();
        let pt = [0.1, 0.9, 0.33, 0.5, 0.0, 1.0];
        let exact = multilinear_exact(&f, &x(&pt)).unwrap();
        assert!((exact - multilinear_oracle(&f, &pt)).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_agrees_with_exact() {
        let f = two_vertex_cut();
        let est = multilinear_mc(&f, &x(&[0.5, 0.5]), 100_000, 7).unwrap();
        assert!((est.mean - 0.25).abs() <= 3.0 * est.std_error);

        let zero = multilinear_mc(&f, &MarginalVector::zeros(2), 1000, 1).unwrap();
        assert_eq!(zero.mean, 0.0);
        assert_eq!(zero.std_error, 0.0);

        let cov = SetFunctionSpec::Coverage {
            sets: vec![vec![0, 1], vec![1, 2], vec![2, 3], vec![3], vec![0, 4], vec![4]],
            weights: vec![1.0, 2.0, 0.5, 1.5, 1.0],
        };
        let pt = x(&[0.3, 0.8, 0.1, 0.55, 0.42, 0.9]);
        let exact = multilinear_exact(&cov.to_table().unwrap(), &pt).unwrap();
        let est = multilinear_mc(&cov, &pt, 50_000, 11).unwrap();
        assert!((est.mean - exact).abs() <= 3.0 * est.std_error);

        // same seed, same estimate
        assert_eq!(est, multilinear_mc(&cov, &pt, 50_000, 11).unwrap());
        assert!(multilinear_mc(&cov, &pt, 0, 11).is_err());
    }

    #[test]
    fn f_max_of_four_path() {
        let fmax = f_max_table(&four_path_cut()).unwrap();
        let s = |e: &[usize]| Subset::from_elements(e.iter().copied());
        assert_eq!(fmax.value(s(&[0, 1, 2])).unwrap(), 2.0);
        assert_eq!(fmax.value(s(&[0, 1])).unwrap(), 1.0);
        assert_eq!(fmax.value(s(&[1, 2])).unwrap(), 1.0);
        assert_eq!(fmax.value(s(&[1])).unwrap(), 1.0);

        let mono = SetFunctionSpec::BudgetAdditive {
            weights: vec![1.0, 2.0, 0.5],
            budget: 2.5,
        }
        .to_table()
        .unwrap();
        assert_eq!(f_max_table(&mono).unwrap(), mono);
    }

    #[test]
    fn continuous_relaxation_examples() {
        let w = [0.5, 2.0, 1.5];
        let additive = SetFunctionSpec::Additive { weights: w.to_vec() }.to_table().unwrap();
        let pt = [0.2, 0.7, 0.4];
        let expected: f64 = w.iter().zip(pt).map(|(a, b)| a * b).sum();
        assert!((continuous_relaxation(&additive, &x(&pt)).unwrap() - expected).abs() < 1e-12);

        let cut = two_vertex_cut();
        let at_zero = continuous_relaxation(&cut, &MarginalVector::zeros(2)).unwrap();
        assert!(at_zero <= cut.values()[0]);
    }

    #[test]
    fn star_half_two_vertex_cut() {
        let r = g_star_half(&two_vertex_cut(), &x(&[0.5, 0.5])).unwrap();
        assert_eq!(r.value, 0.25);
        assert_eq!(r.minimizer, Subset::singleton(0));

        let zero = ExplicitSetFunction::from_values(3, vec![0.0; 8]).unwrap();
        assert_eq!(g_star_half(&zero, &x(&[0.3, 0.6, 0.9])).unwrap().value, 0.0);
    }

    #[test]
    fn star_half_matches_definition_by_expectation() {
        // For every S, average over T ~ 1_S/2 using product_weights as the
        // sampling law rather than uniform submask enumeration.
        let f = four_path_cut();
        let pt = [0.3, 0.6, 0.2, 0.9];
        let mut oracle = f64::INFINITY;
        for s in 0..16u64 {
            let half: Vec<f64> = (0..4).map(|i| if s >> i & 1 == 1 { 0.5 } else { 0.0 }).collect();
            let law = product_weights(&half);
            let mut v = 0.0;
            for (t, p) in law.iter().enumerate() {
                if *p == 0.0 {
                    continue;
                }
                let t = Subset(t as u64);
                let mut inner = f.eval(t);
                for i in (0..4).filter(|i| s >> i & 1 == 0) {
                    inner += (f.eval(t.with(i)) - f.eval(t)) * pt[i];
                }
                v += p * inner;
            }
            oracle = oracle.min(v);
        }
        let got = g_star_half(&f, &x(&pt)).unwrap().value;
        assert!((got - oracle).abs() < 1e-12);
    }

    #[test]
    fn gap_report_two_vertex_cut() {
        let r = gap_report(&two_vertex_cut(), &x(&[0.5, 0.5])).unwrap();
        assert!((r.multilinear - 0.25).abs() < 1e-12);
        assert!((r.f_plus - 0.5).abs() < 1e-9);
        assert!((r.f_star_half - 0.25).abs() < 1e-12);
        assert!((r.multilinear_half - 0.1875).abs() < 1e-12);
        assert!((r.multilinear_max - 0.5).abs() < 1e-12);
        assert!((r.ratios.f_plus_over_f.unwrap() - 2.0).abs() < 1e-9);

        let zero = gap_report(&two_vertex_cut(), &MarginalVector::zeros(2)).unwrap();
        for v in [
            zero.multilinear,
            zero.multilinear_half,
            zero.f_plus,
            zero.f_star,
            zero.f_star_half,
            zero.multilinear_max,
            zero.f_max_plus,
        ] {
            assert!(v.abs() < 1e-12);
        }
        assert_eq!(zero.ratios.f_plus_over_f, None);
    }

    #[test]
    fn gap_report_json_uses_relaxation_names() {
        let r = gap_report(&two_vertex_cut(), &x(&[0.5, 0.5])).unwrap();
        let json = serde_json::to_value(&r).unwrap();
        for key in ["F_at_x", "F_at_half_x", "f_plus", "f_star", "f_star_half", "F_max_at_x"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
    }
}
