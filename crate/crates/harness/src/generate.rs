//! Seeded instance generators addressed by strings such as
//! `"cut-digraph n=6 density=0.4"`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use anyhow::{anyhow, bail, ensure, Context, Result};
use prophetlab_core::matroid::Matroid;
use prophetlab_core::prophet::ProphetInstance;
use prophetlab_core::secretary::{DownwardClosedFamily, SecretaryInstance, PRICE_CHECK_LIMIT};
use prophetlab_core::setfn::{ExplicitSetFunction, SetFunctionSpec, ORACLE_LIMIT};
use prophetlab_core::{Subset, ENUMERATION_LIMIT};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Set-function families accepted by [`set_function`].
pub const SET_FUNCTION_FAMILIES: &[&str] = &[
    "cut-digraph",
    "coverage",
    "additive",
    "budget-additive",
    "xos",
    "unit-subadditive",
    "mixture",
    "monotone-mixture",
    "subadditive-mixture",
];

/// A family name followed by `key=value` parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratorSpec {
    pub family: String,
    pub params: BTreeMap<String, String>,
}

impl FromStr for GeneratorSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut tokens = s.split_whitespace();
        let family = tokens
            .next()
            .ok_or_else(|| anyhow!("empty generator spec"))?
            .to_string();
        let mut params = BTreeMap::new();
        for token in tokens {
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| anyhow!("expected key=value, got {token:?}"))?;
            if params.insert(key.to_string(), value.to_string()).is_some() {
                bail!("parameter {key:?} given twice");
            }
        }
        Ok(GeneratorSpec { family, params })
    }
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.family)?;
        for (k, v) in &self.params {
            write!(f, " {k}={v}")?;
        }
        Ok(())
    }
}

impl Serialize for GeneratorSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GeneratorSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

impl GeneratorSpec {
    pub fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e| anyhow!("parameter {key}={v}: {e}")),
        }
    }

    pub fn get_str<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.params.get(key).map_or(default, String::as_str)
    }

    fn with_family(&self, family: &str) -> GeneratorSpec {
        GeneratorSpec {
            family: family.to_string(),
            params: self.params.clone(),
        }
    }

    fn with_param(mut self, key: &str, value: impl ToString) -> GeneratorSpec {
        self.params.insert(key.to_string(), value.to_string());
        self
    }
}

/// Output of [`generate_instance`].
#[derive(Clone, Debug, Serialize)]
#[serde(untagged)]
pub enum GeneratedInstance {
    SetFunction(SetFunctionSpec),
    Prophet(ProphetInstance),
    Secretary(SecretaryInstance),
}

pub fn generate_instance(spec: &GeneratorSpec, seed: u64) -> Result<GeneratedInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match spec.family.as_str() {
        "prophet" => prophet_instance(spec, &mut rng).map(GeneratedInstance::Prophet),
        "secretary" => secretary_instance(spec, &mut rng).map(GeneratedInstance::Secretary),
        _ => set_function(spec, &mut rng).map(GeneratedInstance::SetFunction),
    }
}

fn positive<R: Rng + ?Sized>(rng: &mut R, max: f64) -> f64 {
    max * (1.0 - rng.gen::<f64>())
}

/// Draws a set function and verifies the properties its family promises.
pub fn set_function<R: Rng + ?Sized>(spec: &GeneratorSpec, rng: &mut R) -> Result<SetFunctionSpec> {
    let n: usize = spec.get("n", 6)?;
    ensure!(n >= 1, "n must be at least 1");
    let f = draw_set_function(spec, n, rng)?;
    verify_family(&spec.family, &f)?;
    Ok(f)
}

fn draw_set_function<R: Rng + ?Sized>(spec: &GeneratorSpec, n: usize, rng: &mut R) -> Result<SetFunctionSpec> {
    let cap = |limit: usize| -> Result<()> {
        ensure!(n <= limit, "{} supports n ≤ {limit}, got {n}", spec.family);
        Ok(())
    };
    let max_weight: f64 = spec.get("max-weight", 1.0)?;
    Ok(match spec.family.as_str() {
        "cut-digraph" => {
            cap(ENUMERATION_LIMIT)?;
            let density: f64 = spec.get("density", 0.4)?;
            let mut arcs = Vec::new();
            for u in 0..n {
                for v in (0..n).filter(|&v| v != u) {
                    if rng.gen_bool(density.clamp(0.0, 1.0)) {
                        arcs.push((u, v, positive(rng, max_weight)));
                    }
                }
            }
            SetFunctionSpec::directed_cut(n, &arcs)
        }
        "coverage" => {
            cap(ORACLE_LIMIT)?;
            let items: usize = spec.get("sets", 2 * n)?;
            ensure!((1..=128).contains(&items), "coverage needs 1 ≤ sets ≤ 128");
            let p: f64 = spec.get("p", 0.3)?;
            let sets = (0..n)
                .map(|_| {
                    let mut covered: Vec<usize> = (0..items).filter(|_| rng.gen_bool(p.clamp(0.0, 1.0))).collect();
                    if covered.is_empty() {
                        covered.push(rng.gen_range(0..items));
                    }
                    covered
                })
                .collect();
            let weights = (0..items).map(|_| positive(rng, max_weight)).collect();
            SetFunctionSpec::Coverage { sets, weights }
        }
        "additive" => {
            cap(ORACLE_LIMIT)?;
            SetFunctionSpec::Additive {
                weights: (0..n).map(|_| positive(rng, max_weight)).collect(),
            }
        }
        "budget-additive" => {
            cap(ORACLE_LIMIT)?;
            let budget: f64 = spec.get("budget", (n as f64 / 4.0).max(1.0))?;
            SetFunctionSpec::BudgetAdditive {
                weights: (0..n).map(|_| positive(rng, max_weight)).collect(),
                budget,
            }
        }
        "xos" => {
            cap(ORACLE_LIMIT)?;
            let clauses: usize = spec.get("clauses", 3)?;
            let density: f64 = spec.get("density", 0.6)?;
            SetFunctionSpec::Xos {
                clauses: (0..clauses.max(1))
                    .map(|_| {
                        (0..n)
                            .map(|_| {
                                if rng.gen_bool(density.clamp(0.0, 1.0)) {
                                    positive(rng, max_weight)
                                } else {
                                    0.0
                                }
                            })
                            .collect()
                    })
                    .collect(),
            }
        }
        "unit-subadditive" => {
            cap(ORACLE_LIMIT)?;
            SetFunctionSpec::Unit { n }
        }
        "mixture" | "monotone-mixture" | "subadditive-mixture" => {
            let kinds: &[&str] = match spec.family.as_str() {
                "mixture" => &["cut-digraph", "coverage"],
                "monotone-mixture" => &["coverage", "budget-additive", "additive"],
                _ => &["xos", "coverage", "budget-additive", "unit-subadditive"],
            };
            let parts: usize = spec.get("parts", 3)?;
            let mut drawn = Vec::new();
            for _ in 0..parts.max(1) {
                let kind = kinds[rng.gen_range(0..kinds.len())];
                let part = draw_set_function(&spec.with_family(kind), n, rng)?;
                drawn.push((0.1 + 0.9 * rng.gen::<f64>(), part));
            }
            SetFunctionSpec::Mixture { parts: drawn }
        }
        other => {
            bail!("unknown generator family {other:?}; expected one of {SET_FUNCTION_FAMILIES:?}, prophet, secretary")
        }
    })
}

fn verify_family(family: &str, f: &SetFunctionSpec) -> Result<()> {
    f.validate()?;
    let submodular = matches!(
        family,
        "cut-digraph" | "coverage" | "additive" | "budget-additive" | "mixture" | "monotone-mixture"
    );
    let monotone = family != "cut-digraph" && family != "mixture";
    if f.n() > ENUMERATION_LIMIT {
        ensure!(
            f.is_structurally_monotone_subadditive(),
            "generator bug: {family} with n = {} cannot be verified",
            f.n()
        );
        return Ok(());
    }
    let table = f.to_table()?;
    ensure!(
        table.values().iter().all(|v| *v >= 0.0),
        "generator bug: {family} produced a negative value"
    );
    if submodular {
        if let Some(v) = table.submodularity_violation()? {
            bail!("generator bug: {family} is not submodular: {v:?}");
        }
    }
    if monotone {
        if let Some(v) = table.monotonicity_violation()? {
            bail!("generator bug: {family} is not monotone: {v:?}");
        }
        if let Some(v) = table.subadditivity_violation()? {
            bail!("generator bug: {family} is not subadditive: {v:?}");
        }
    }
    Ok(())
}

/// Tabulated set function from a generator spec.
pub fn set_function_table<R: Rng + ?Sized>(spec: &GeneratorSpec, rng: &mut R) -> Result<ExplicitSetFunction> {
    let n: usize = spec.get("n", 6)?;
    ensure!(
        n <= ENUMERATION_LIMIT,
        "tabulated functions need n ≤ {ENUMERATION_LIMIT}"
    );
    Ok(set_function(spec, rng)?.to_table()?)
}

fn prophet_instance<R: Rng + ?Sized>(spec: &GeneratorSpec, rng: &mut R) -> Result<ProphetInstance> {
    let days: usize = spec.get("days", 4)?;
    let point_mass: bool = spec.get("point-mass", false)?;
    let max_items: usize = if point_mass { 1 } else { spec.get("items", 3)? };
    ensure!(days >= 1 && max_items >= 1, "days and items must be positive");
    ensure!(
        days * max_items <= ENUMERATION_LIMIT,
        "days × items must be at most {ENUMERATION_LIMIT}, got {}",
        days * max_items
    );
    let sizes: Vec<usize> = (0..days).map(|_| rng.gen_range(1..=max_items)).collect();
    let mut universes = Vec::with_capacity(days);
    let mut next = 0;
    for &size in &sizes {
        universes.push((next..next + size).collect::<Vec<usize>>());
        next += size;
    }
    let priors = sizes
        .iter()
        .map(|&size| {
            let raw: Vec<f64> = (0..size).map(|_| 0.05 + rng.gen::<f64>()).collect();
            let total: f64 = raw.iter().sum();
            raw.iter().map(|w| w / total).collect()
        })
        .collect();

    let matroid = match spec.get_str("matroid", "uniform") {
        "free" => Matroid::free(days)?,
        "uniform" => Matroid::uniform(days, spec.get("rank", days.div_ceil(2))?)?,
        "partition" => {
            let blocks: usize = spec.get("blocks", 2usize)?.clamp(1, days);
            let mut members = vec![Vec::new(); blocks];
            for d in 0..days {
                members[if d < blocks { d } else { rng.gen_range(0..blocks) }].push(d);
            }
            let capacity: usize = spec.get("capacity", 1)?;
            Matroid::partition(days, members, vec![capacity; blocks])?
        }
        "graphic" => {
            let vertices: usize = spec.get("vertices", days.div_ceil(2) + 1)?.max(2);
            let edges = (0..days)
                .map(|_| {
                    let u = rng.gen_range(0..vertices);
                    let v = (u + rng.gen_range(1..vertices)) % vertices;
                    (u, v)
                })
                .collect();
            Matroid::graphic(edges)?
        }
        other => bail!("unknown matroid kind {other:?}; expected free, uniform, partition or graphic"),
    };

    let objective_family = spec.get_str("objective", "coverage");
    let objective_spec = GeneratorSpec::from_str(objective_family)?.with_param("n", next);
    ensure!(
        matches!(
            objective_spec.family.as_str(),
            "coverage" | "cut-digraph" | "additive" | "budget-additive" | "mixture" | "monotone-mixture"
        ),
        "prophet objectives must be submodular families, got {objective_family:?}"
    );
    let objective = set_function(&objective_spec, rng)?.to_table()?;
    Ok(ProphetInstance::new(universes, priors, objective, matroid)?)
}

fn secretary_instance<R: Rng + ?Sized>(spec: &GeneratorSpec, rng: &mut R) -> Result<SecretaryInstance> {
    let n: usize = spec.get("n", 32)?;
    ensure!(
        (1..=ORACLE_LIMIT).contains(&n),
        "secretary needs 1 ≤ n ≤ {ORACLE_LIMIT}"
    );
    let count: usize = spec.get("sets", 6)?;
    let size: usize = spec.get("size", (n / 4).clamp(1, 12))?;
    ensure!(
        size <= n && size <= PRICE_CHECK_LIMIT,
        "set size must be at most min(n, {PRICE_CHECK_LIMIT})"
    );
    let sets: Vec<Subset> = (0..count.max(1))
        .map(|_| sample(rng, n, size).into_iter().collect())
        .collect();
    let max_size = spec
        .params
        .get("max-size")
        .map(|v| v.parse())
        .transpose()
        .context("max-size")?;
    let family = DownwardClosedFamily::new(n, sets, max_size)?;

    let valuation_family = spec.get_str("valuation", "coverage");
    let valuation_spec = GeneratorSpec::from_str(valuation_family)?.with_param("n", n);
    ensure!(
        matches!(
            valuation_spec.family.as_str(),
            "coverage"
                | "additive"
                | "budget-additive"
                | "xos"
                | "unit-subadditive"
                | "monotone-mixture"
                | "subadditive-mixture"
        ),
        "secretary valuations must be monotone subadditive families, got {valuation_family:?}"
    );
    let valuation = set_function(&valuation_spec, rng)?;
    Ok(SecretaryInstance::new(valuation, family)?)
}
