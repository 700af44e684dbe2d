//! Randomized lemma suites over generated instances.

use std::fmt;
use std::str::FromStr;

use anyhow::{anyhow, ensure, Result};
use prophetlab_core::gaps::{
    nonsubmodularity_witness_fmax, verify_aux_claim, verify_bfns, verify_fmv_double, verify_low_high,
    verify_monotone_gap, verify_nonmonotone_chain, LatentCoinSampler, LemmaVerdict, CHAIN_LIMIT, EXACT_LIMIT,
};
use prophetlab_core::setfn::{ExplicitSetFunction, MarginalVector};
use prophetlab_core::Subset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::generate::{set_function_table, GeneratorSpec};
use crate::seeds::{thread_pool, trial_seed};

/// Samples per instance for the sampled check.
pub const BFNS_TRIALS: u64 = 2_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lemma {
    Bfns,
    Lowhigh,
    Fmv,
    Aux,
    Mono,
    Chain,
    Fmax,
}

impl Lemma {
    pub const ALL: [Lemma; 7] = [
        Lemma::Bfns,
        Lemma::Lowhigh,
        Lemma::Fmv,
        Lemma::Aux,
        Lemma::Mono,
        Lemma::Chain,
        Lemma::Fmax,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Lemma::Bfns => "bfns",
            Lemma::Lowhigh => "lowhigh",
            Lemma::Fmv => "fmv",
            Lemma::Aux => "aux",
            Lemma::Mono => "mono",
            Lemma::Chain => "chain",
            Lemma::Fmax => "fmax",
        }
    }

    fn cap(self) -> usize {
        match self {
            Lemma::Mono | Lemma::Chain => CHAIN_LIMIT,
            _ => EXACT_LIMIT,
        }
    }
}

impl fmt::Display for Lemma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Lemma {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Lemma::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| anyhow!("unknown lemma {s:?}; expected one of bfns, lowhigh, fmv, aux, mono, chain, fmax"))
    }
}

fn random_submodular(n: usize, rng: &mut ChaCha8Rng) -> Result<ExplicitSetFunction> {
    let family = if rng.gen_bool(0.5) { "cut-digraph" } else { "mixture" };
    let spec: GeneratorSpec = format!("{family} n={n} density={}", 0.2 + 0.5 * rng.gen::<f64>()).parse()?;
    set_function_table(&spec, rng)
}

fn random_monotone(n: usize, rng: &mut ChaCha8Rng) -> Result<ExplicitSetFunction> {
    let family = if rng.gen_bool(0.5) {
        "coverage"
    } else {
        "monotone-mixture"
    };
    set_function_table(&format!("{family} n={n}").parse()?, rng)
}

fn random_point(n: usize, rng: &mut ChaCha8Rng) -> MarginalVector {
    MarginalVector::new((0..n).map(|_| rng.gen()).collect()).expect("coordinates in [0, 1)")
}

fn random_subset(n: usize, rng: &mut ChaCha8Rng) -> Subset {
    Subset(rng.gen::<u64>()).intersection(Subset::full(n))
}

/// One generated instance of `lemma` with ground size in `2..=n`.
pub fn lemma_instance(lemma: Lemma, n: usize, seed: u64) -> Result<LemmaVerdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=n.max(2));
    let verdict = match lemma {
        Lemma::Bfns => {
            let base = random_submodular(n, &mut rng)?;
            let shift = (0.1 + rng.gen::<f64>()) * base.max_value().max(1.0);
            let f = ExplicitSetFunction::from_fn(n, |s| base.values()[s.index()] + shift)?;
            let p: f64 = rng.gen();
            let coin = p + (1.0 - p) * rng.gen::<f64>();
            let marginals = (0..n).map(|_| p * rng.gen::<f64>()).collect();
            let sampler = LatentCoinSampler::new(marginals, coin.max(f64::MIN_POSITIVE))?;
            verify_bfns(&f, &sampler, p, BFNS_TRIALS, rng.gen())?
        }
        Lemma::Lowhigh => {
            let f = random_submodular(n, &mut rng)?;
            let low: f64 = rng.gen();
            let high = low + (1.0 - low) * rng.gen::<f64>();
            let x = MarginalVector::new((0..n).map(|_| low + (high - low) * rng.gen::<f64>()).collect())?;
            verify_low_high(&f, &x, low, high)?
        }
        Lemma::Fmv => {
            let f = random_submodular(n, &mut rng)?;
            let a = random_subset(n, &mut rng);
            let p = f64::from(rng.gen_range(1..=9u32)) / 10.0;
            verify_fmv_double(&f, a, p)?
        }
        Lemma::Aux => {
            let f = random_submodular(n, &mut rng)?;
            verify_aux_claim(&f, random_subset(n, &mut rng), random_subset(n, &mut rng))?
        }
        Lemma::Mono => {
            let f = random_monotone(n, &mut rng)?;
            verify_monotone_gap(&f, &random_point(n, &mut rng))?
        }
        Lemma::Chain => {
            let f = random_submodular(n, &mut rng)?;
            verify_nonmonotone_chain(&f, &random_point(n, &mut rng))?
        }
        Lemma::Fmax => nonsubmodularity_witness_fmax()?.verdict,
    };
    Ok(verdict)
}

/// Runs `instances` generated checks of `lemma` in parallel and merges them
/// in index order. The fixed `fmax` example runs once.
pub fn run_lemma_suite(lemma: Lemma, n: usize, instances: u64, seed: u64) -> Result<LemmaVerdict> {
    ensure!(n <= lemma.cap(), "{lemma} supports n ≤ {}, got {n}", lemma.cap());
    if lemma == Lemma::Fmax {
        return lemma_instance(lemma, n, seed);
    }
    let verdicts: Vec<LemmaVerdict> = thread_pool()?.install(|| {
        (0..instances)
            .into_par_iter()
            .map(|i| {
                let s = trial_seed(seed, i);
                lemma_instance(lemma, n, s).map(|mut v| {
                    if let Some(w) = v.witness.as_mut() {
                        w.seed.get_or_insert(s);
                    }
                    v
                })
            })
            .collect::<Result<_>>()
    })?;
    Ok(verdicts
        .into_iter()
        .fold(LemmaVerdict::empty(lemma.name()), LemmaVerdict::merge))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lemma_names_round_trip() {
        for l in Lemma::ALL {
            assert_eq!(l.name().parse::<Lemma>().unwrap(), l);
        }
        assert!("nope".parse::<Lemma>().is_err());
    }

    #[test]
    fn small_suites_pass() {
        for lemma in Lemma::ALL {
            let v = run_lemma_suite(lemma, 6, 30, 1).unwrap();
            assert!(v.passed, "{lemma}: {v:?}");
            assert_eq!(v.lemma, lemma.name());
        }
        assert!(run_lemma_suite(Lemma::Chain, 11, 1, 0).is_err());
    }

    #[test]
    fn suites_are_deterministic() {
        let a = run_lemma_suite(Lemma::Bfns, 5, 20, 9).unwrap();
        let b = run_lemma_suite(Lemma::Bfns, 5, 20, 9).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
