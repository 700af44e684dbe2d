use serde::{Deserialize, Serialize};

use super::{ExplicitSetFunction, SetFunction, TABLE_LIMIT};
use crate::error::{ensure_capacity, Error, Result};
use crate::subset::Subset;

/// Largest ground set any oracle may have (one bit per element).
pub const ORACLE_LIMIT: usize = 64;

/// Coverage universes are stored as 128-bit masks.
const COVERAGE_ITEMS: usize = 128;

/// Serializable description of a set function.
///
/// `explicit` is a raw table in bitmask order; every other kind is a compact
/// generator evaluated on demand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetFunctionSpec {
    Explicit {
        n: usize,
        values: Vec<f64>,
    },
    /// `f(S) = Σ w` over arcs `(u, v, w)` with `u ∈ S`, `v ∉ S`.
    DirectedCut {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
        arcs: Vec<(usize, usize, f64)>,
    },
    /// Element `i` covers the universe items `sets[i]`; `f(S)` is the total
    /// weight of covered items.
    Coverage {
        sets: Vec<Vec<usize>>,
        weights: Vec<f64>,
    },
    Additive {
        weights: Vec<f64>,
    },
    /// `min(Σ_{i∈S} w_i, budget)`.
    BudgetAdditive {
        weights: Vec<f64>,
        budget: f64,
    },
    /// Maximum of additive clauses.
    Xos {
        clauses: Vec<Vec<f64>>,
    },
    /// Non-negative combination `Σ c_k f_k`.
    Mixture {
        parts: Vec<(f64, SetFunctionSpec)>,
    },
    /// `f(S) = 1` for every non-empty `S`.
    Unit {
        n: usize,
    },
}

impl SetFunctionSpec {
    pub fn directed_cut(n: usize, arcs: &[(usize, usize, f64)]) -> Self {
        SetFunctionSpec::DirectedCut {
            n: Some(n),
            arcs: arcs.to_vec(),
        }
    }

    /// Ground-set size implied by the description.
    pub fn n(&self) -> usize {
        match self {
            SetFunctionSpec::Explicit { n, .. } | SetFunctionSpec::Unit { n } => *n,
            SetFunctionSpec::DirectedCut { n, arcs } => {
                n.unwrap_or_else(|| arcs.iter().map(|&(u, v, _)| u.max(v) + 1).max().unwrap_or(0))
            }
            SetFunctionSpec::Coverage { sets, .. } => sets.len(),
            SetFunctionSpec::Additive { weights } | SetFunctionSpec::BudgetAdditive { weights, .. } => weights.len(),
            SetFunctionSpec::Xos { clauses } => clauses.first().map_or(0, Vec::len),
            SetFunctionSpec::Mixture { parts } => parts.iter().map(|(_, p)| p.n()).max().unwrap_or(0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        ensure_capacity("set function", ORACLE_LIMIT, n)?;
        let non_negative = |what: &str, ws: &[f64]| -> Result<()> {
            match ws.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
                Some(w) => Err(Error::Domain(format!(
                    "{what} weight {w} must be finite and non-negative"
                ))),
                None => Ok(()),
            }
        };
        match self {
            SetFunctionSpec::Explicit { values, .. } => {
                ensure_capacity("explicit set function", TABLE_LIMIT, n)?;
                if values.len() != 1usize << n {
                    return Err(Error::Domain(format!(
                        "explicit table over {n} elements needs {} values, got {}",
                        1usize << n,
                        values.len()
                    )));
                }
                non_negative("explicit", values)
            }
            SetFunctionSpec::DirectedCut { arcs, .. } => {
                if let Some(&(u, v, _)) = arcs.iter().find(|&&(u, v, _)| u >= n || v >= n || u == v) {
                    return Err(Error::Domain(format!("arc ({u}, {v}) invalid for {n} vertices")));
                }
                let ws: Vec<f64> = arcs.iter().map(|a| a.2).collect();
                non_negative("arc", &ws)
            }
            SetFunctionSpec::Coverage { sets, weights } => {
                if weights.len() > COVERAGE_ITEMS {
                    return Err(Error::Domain(format!(
                        "coverage supports at most {COVERAGE_ITEMS} universe items"
                    )));
                }
                if sets.iter().flatten().any(|&item| item >= weights.len()) {
                    return Err(Error::Domain("coverage set names an unknown universe item".into()));
                }
                non_negative("coverage", weights)
            }
            SetFunctionSpec::Additive { weights } => non_negative("additive", weights),
            SetFunctionSpec::BudgetAdditive { weights, budget } => {
                non_negative("additive", weights)?;
                non_negative("budget", &[*budget])
            }
            SetFunctionSpec::Xos { clauses } => {
                if clauses.iter().any(|c| c.len() != n) {
                    return Err(Error::Domain("XOS clauses must share one length".into()));
                }
                clauses.iter().try_for_each(|c| non_negative("XOS", c))
            }
            SetFunctionSpec::Mixture { parts } => parts.iter().try_for_each(|(c, p)| {
                non_negative("mixture", &[*c])?;
                p.validate()
            }),
            SetFunctionSpec::Unit { .. } => Ok(()),
        }
    }

    /// Monotone and subadditive by construction (independent of the weights).
    pub fn is_structurally_monotone_subadditive(&self) -> bool {
        match self {
            SetFunctionSpec::Coverage { .. }
            | SetFunctionSpec::Additive { .. }
            | SetFunctionSpec::BudgetAdditive { .. }
            | SetFunctionSpec::Xos { .. }
            | SetFunctionSpec::Unit { .. } => true,
            SetFunctionSpec::Mixture { parts } => parts.iter().all(|(_, p)| p.is_structurally_monotone_subadditive()),
            SetFunctionSpec::Explicit { .. } | SetFunctionSpec::DirectedCut { .. } => false,
        }
    }

    pub fn to_table(&self) -> Result<ExplicitSetFunction> {
        self.validate()?;
        match self {
            SetFunctionSpec::Explicit { n, values } => ExplicitSetFunction::from_values(*n, values.clone()),
            _ => ExplicitSetFunction::tabulate(self),
        }
    }

    fn eval_checked(&self, s: Subset) -> f64 {
        match self {
            SetFunctionSpec::Explicit { values, .. } => values[s.index()],
            SetFunctionSpec::DirectedCut { arcs, .. } => arcs
                .iter()
                .filter(|&&(u, v, _)| s.contains(u) && !s.contains(v))
                .map(|a| a.2)
                .sum(),
            SetFunctionSpec::Coverage { sets, weights } => {
                let covered = s.iter().fold(0u128, |acc, e| {
                    sets[e].iter().fold(acc, |acc, &item| acc | 1u128 << item)
                });
                weights
                    .iter()
                    .enumerate()
                    .filter(|(item, _)| covered >> item & 1 == 1)
                    .map(|(_, w)| w)
                    .sum()
            }
            SetFunctionSpec::Additive { weights } => s.iter().map(|i| weights[i]).sum(),
            SetFunctionSpec::BudgetAdditive { weights, budget } => {
                s.iter().map(|i| weights[i]).sum::<f64>().min(*budget)
            }
            SetFunctionSpec::Xos { clauses } => clauses
                .iter()
                .map(|c| s.iter().map(|i| c[i]).sum::<f64>())
                .fold(0.0, f64::max),
            SetFunctionSpec::Mixture { parts } => parts
                .iter()
                .map(|(c, p)| c * p.eval_checked(s.intersection(Subset::full(p.n()))))
                .sum(),
            SetFunctionSpec::Unit { .. } => {
                if s.is_empty() {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }
}

impl SetFunction for SetFunctionSpec {
    fn ground_size(&self) -> usize {
        self.n()
    }

    fn eval(&self, s: Subset) -> f64 {
        self.eval_checked(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shapes() {
        let cut: SetFunctionSpec = serde_json::from_str(r#"{"kind":"directed_cut","arcs":[[0,1,1.0]]}"#).unwrap();
        assert_eq!(cut.n(), 2);
        assert_eq!(cut.to_table().unwrap().values(), &[0.0, 1.0, 0.0, 0.0]);

        let explicit: SetFunctionSpec =
            serde_json::from_str(r#"{"n":1,"kind":"explicit","values":[0.0,2.5]}"#).unwrap();
        assert_eq!(explicit.eval(Subset(1)), 2.5);

        let f = explicit.to_table().unwrap();
        let round: ExplicitSetFunction = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
        assert_eq!(round, f);
    }

    #[test]
    fn generator_kinds_evaluate() {
        let cov = SetFunctionSpec::Coverage {
            sets: vec![vec![0, 1], vec![1, 2], vec![]],
            weights: vec![1.0, 2.0, 4.0],
        };
        assert_eq!(cov.eval(Subset::from_elements([0, 1])), 7.0);
        assert_eq!(cov.eval(Subset::from_elements([2])), 0.0);

        let budget = SetFunctionSpec::BudgetAdditive {
            weights: vec![1.0, 2.0, 3.0],
            budget: 4.0,
        };
        assert_eq!(budget.eval(Subset::full(3)), 4.0);

        let xos = SetFunctionSpec::Xos {
            clauses: vec![vec![1.0, 0.0], vec![0.0, 3.0]],
        };
        assert_eq!(xos.eval(Subset::full(2)), 3.0);

        let unit = SetFunctionSpec::Unit { n: 4 };
        assert_eq!(unit.eval(Subset::EMPTY), 0.0);
        assert_eq!(unit.eval(Subset(6)), 1.0);

        let mix = SetFunctionSpec::Mixture {
            parts: vec![
                (2.0, unit.clone()),
                (1.0, SetFunctionSpec::directed_cut(2, &[(0, 1, 1.0)])),
            ],
        };
        assert_eq!(mix.n(), 4);
        assert_eq!(mix.eval(Subset(1)), 3.0);
    }

    #[test]
    fn structural_monotone_subadditive_kinds_pass_exhaustive_checks() {
        let kinds = [
            SetFunctionSpec::Coverage {
                sets: vec![vec![0], vec![0, 1], vec![2]],
                weights: vec![1.0, 0.5, 2.0],
            },
            SetFunctionSpec::BudgetAdditive {
                weights: vec![1.0, 2.0, 3.0],
                budget: 3.5,
            },
            SetFunctionSpec::Xos {
                clauses: vec![vec![1.0, 0.0, 2.0], vec![0.5, 3.0, 0.0]],
            },
            SetFunctionSpec::Unit { n: 3 },
        ];
        for k in kinds {
            assert!(k.is_structurally_monotone_subadditive());
            let f = k.to_table().unwrap();
            assert!(f.is_monotone().unwrap(), "{k:?}");
            assert!(f.is_subadditive().unwrap(), "{k:?}");
        }
    }

    #[test]
    fn validation_errors() {
        assert!(SetFunctionSpec::directed_cut(2, &[(0, 0, 1.0)]).validate().is_err());
        assert!(SetFunctionSpec::Additive { weights: vec![-1.0] }.validate().is_err());
        assert!(SetFunctionSpec::Explicit {
            n: 2,
            values: vec![0.0]
        }
        .validate()
        .is_err());
        assert!(SetFunctionSpec::Coverage {
            sets: vec![vec![3]],
            weights: vec![1.0]
        }
        .validate()
        .is_err());
    }
}
