use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{CmaEs, DifferentialEvolution, DualAnnealing, LocalTolerances, NelderMead, Optimizer, Pso};
use crate::error::{Error, Result};

/// The built-in algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmId {
    NelderMead,
    DifferentialEvolution,
    Pso,
    DualAnnealing,
    CmaEs,
}

impl AlgorithmId {
    pub const ALL: [AlgorithmId; 5] = [
        AlgorithmId::NelderMead,
        AlgorithmId::DifferentialEvolution,
        AlgorithmId::Pso,
        AlgorithmId::DualAnnealing,
        AlgorithmId::CmaEs,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AlgorithmId::NelderMead => "nelder_mead",
            AlgorithmId::DifferentialEvolution => "differential_evolution",
            AlgorithmId::Pso => "pso",
            AlgorithmId::DualAnnealing => "dual_annealing",
            AlgorithmId::CmaEs => "cma_es",
        }
    }
}

impl fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AlgorithmId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AlgorithmId::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = AlgorithmId::ALL.iter().map(|a| a.as_str()).collect();
                Error::config("algorithm", format!("unknown algorithm `{s}`, expected one of {}", names.join(", ")))
            })
    }
}

/// A concrete hyperparameter value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Real(f64),
}

impl ParamValue {
    pub fn as_f64(self) -> Option<f64> {
        match self {
            ParamValue::Int(v) => Some(v as f64),
            ParamValue::Real(v) => Some(v),
            ParamValue::Bool(_) => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Bool(b) => write!(f, "{b}"),
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Real(r) => write!(f, "{r}"),
        }
    }
}

pub type ParamValues = BTreeMap<String, ParamValue>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamKind {
    Log { lo: f64, hi: f64 },
    Linear { lo: f64, hi: f64 },
    Int { lo: i64, hi: i64 },
    Bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: &'static str,
    pub kind: ParamKind,
    pub default: ParamValue,
    /// Another parameter whose value replaces the lower end of the range.
    pub lower_from: Option<&'static str>,
    /// Distances in metres; rescaled with the domain.
    pub metres: bool,
}

impl ParamSpec {
    fn new(name: &'static str, kind: ParamKind, default: ParamValue) -> Self {
        Self {
            name,
            kind,
            default,
            lower_from: None,
            metres: false,
        }
    }

    fn range_text(&self, lower: Option<f64>) -> String {
        match self.kind {
            ParamKind::Log { lo, hi } | ParamKind::Linear { lo, hi } => {
                format!("[{}, {hi}]", lower.unwrap_or(lo))
            }
            ParamKind::Int { lo, hi } => format!("[{lo}, {hi}]"),
            ParamKind::Bool => "{true, false}".to_string(),
        }
    }

    /// Checks `value` against the range; `lower` overrides the lower end.
    pub fn check(&self, value: ParamValue, lower: Option<f64>) -> Result<ParamValue> {
        let bad = |what: &str| Error::config(self.name, format!("{what}, expected a value in {}", self.range_text(lower)));
        match (self.kind, value) {
            (ParamKind::Bool, ParamValue::Bool(_)) => Ok(value),
            (ParamKind::Bool, _) => Err(bad(&format!("{value} is not a boolean"))),
            (ParamKind::Int { lo, hi }, ParamValue::Int(v)) => {
                if (lo..=hi).contains(&v) {
                    Ok(value)
                } else {
                    Err(bad(&format!("{v} is out of range")))
                }
            }
            (ParamKind::Int { .. }, _) => Err(bad(&format!("{value} is not an integer"))),
            (ParamKind::Log { lo, hi } | ParamKind::Linear { lo, hi }, v) => {
                let Some(x) = v.as_f64() else {
                    return Err(bad(&format!("{value} is not a number")));
                };
                let lo = lower.unwrap_or(lo);
                if x.is_finite() && x >= lo && x <= hi {
                    Ok(ParamValue::Real(x))
                } else {
                    Err(bad(&format!("{x} is out of range")))
                }
            }
        }
    }
}

/// Hyperparameters of one algorithm with ranges and defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperparameterSpace {
    pub algorithm: AlgorithmId,
    pub entries: Vec<ParamSpec>,
}

impl HyperparameterSpace {
    /// Ranges and defaults for the full-size (700 km x 1300 km) domain.
    pub fn for_algorithm(algorithm: AlgorithmId) -> Self {
        use ParamKind::*;
        use ParamValue::{Bool as B, Int as I, Real as R};
        let sigma0 = ParamSpec {
            metres: true,
            ..ParamSpec::new("sigma0", Linear { lo: 3.5e4, hi: 3.5e5 }, R(1.2e5))
        };
        let entries = match algorithm {
            AlgorithmId::NelderMead => vec![],
            AlgorithmId::DualAnnealing => vec![
                ParamSpec::new("initial_temp", Log { lo: 0.2, hi: 5.0e4 }, R(5230.0)),
                ParamSpec::new("restart_temp_ratio", Log { lo: 1.0e-6, hi: 0.9 }, R(2.0e-5)),
                ParamSpec::new("visit", Linear { lo: 1.5, hi: 2.9 }, R(2.62)),
                ParamSpec::new("accept", Linear { lo: -5.0, hi: -1.1e-4 }, R(-5.0)),
            ],
            AlgorithmId::CmaEs => vec![sigma0, ParamSpec::new("population_size", Int { lo: 4, hi: 100 }, I(6))],
            AlgorithmId::Pso => vec![
                sigma0,
                ParamSpec::new("r", Linear { lo: 0.0, hi: 1.0 }, R(0.5)),
                ParamSpec::new("population_size", Int { lo: 1, hi: 1000 }, I(6)),
            ],
            AlgorithmId::DifferentialEvolution => vec![
                ParamSpec::new("popsize", Int { lo: 10, hi: 50 }, I(15)),
                ParamSpec::new("recombination", Linear { lo: 0.0, hi: 1.0 }, R(0.7)),
                ParamSpec::new("polish", Bool, B(false)),
                ParamSpec::new("dithering", Bool, B(true)),
                ParamSpec::new("mutation_low", Linear { lo: 0.0, hi: 2.0 }, R(0.5)),
                ParamSpec {
                    lower_from: Some("mutation_low"),
                    ..ParamSpec::new("mutation_high", Linear { lo: 0.0, hi: 2.0 }, R(1.0))
                },
            ],
        };
        Self { algorithm, entries }
    }

    /// Multiplies the ranges and defaults of distance parameters by `factor`,
    /// for domains much smaller than the full map.
    pub fn scaled(mut self, factor: f64) -> Self {
        for e in &mut self.entries {
            if !e.metres {
                continue;
            }
            e.kind = match e.kind {
                ParamKind::Linear { lo, hi } => ParamKind::Linear {
                    lo: lo * factor,
                    hi: hi * factor,
                },
                ParamKind::Log { lo, hi } => ParamKind::Log {
                    lo: lo * factor,
                    hi: hi * factor,
                },
                k => k,
            };
            if let ParamValue::Real(v) = e.default {
                e.default = ParamValue::Real(v * factor);
            }
        }
        self
    }

    pub fn get(&self, name: &str) -> Option<&ParamSpec> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn defaults(&self) -> ParamValues {
        self.entries.iter().map(|e| (e.name.to_string(), e.default)).collect()
    }

    /// Fills missing values with defaults and checks every value against its
    /// range. Integral reals are accepted for integer parameters.
    pub fn validate(&self, values: &ParamValues) -> Result<ParamValues> {
        for name in values.keys() {
            if self.get(name).is_none() {
                return Err(Error::config(
                    name.clone(),
                    format!("not a hyperparameter of {}", self.algorithm),
                ));
            }
        }
        let mut out = ParamValues::new();
        for e in &self.entries {
            let mut v = values.get(e.name).copied().unwrap_or(e.default);
            if let (ParamKind::Int { .. }, ParamValue::Real(r)) = (e.kind, v) {
                if r.fract() == 0.0 && r.abs() < 9.0e15 {
                    v = ParamValue::Int(r as i64);
                }
            }
            let lower = e.lower_from.and_then(|n| out.get(n).and_then(|p: &ParamValue| p.as_f64()));
            out.insert(e.name.to_string(), e.check(v, lower)?);
        }
        Ok(out)
    }
}

/// An algorithm with concrete hyperparameters and a base seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerInstance {
    pub algorithm: AlgorithmId,
    pub params: ParamValues,
    pub seed: u64,
}

impl OptimizerInstance {
    /// Validates `params` against `space` and fills in defaults.
    pub fn new(space: &HyperparameterSpace, params: &ParamValues, seed: u64) -> Result<Self> {
        Ok(Self {
            algorithm: space.algorithm,
            params: space.validate(params)?,
            seed,
        })
    }

    fn real(&self, name: &str) -> Result<f64> {
        self.params
            .get(name)
            .and_then(|v| v.as_f64())
            .ok_or_else(|| Error::config(name, "missing numeric value"))
    }

    fn int(&self, name: &str) -> Result<usize> {
        match self.params.get(name) {
            Some(ParamValue::Int(v)) if *v >= 0 => Ok(*v as usize),
            _ => Err(Error::config(name, "missing non-negative integer value")),
        }
    }

    fn flag(&self, name: &str) -> Result<bool> {
        match self.params.get(name) {
            Some(ParamValue::Bool(b)) => Ok(*b),
            _ => Err(Error::config(name, "missing boolean value")),
        }
    }

    /// The configured optimiser.
    pub fn build(&self, tolerances: LocalTolerances) -> Result<Box<dyn Optimizer>> {
        Ok(match self.algorithm {
            AlgorithmId::NelderMead => Box::new(NelderMead::new(tolerances)),
            AlgorithmId::DifferentialEvolution => Box::new(DifferentialEvolution::new(
                self.int("popsize")?,
                self.real("recombination")?,
                self.flag("polish")?,
                self.flag("dithering")?,
                self.real("mutation_low")?,
                self.real("mutation_high")?,
                tolerances,
            )?),
            AlgorithmId::Pso => Box::new(Pso::new(
                self.real("sigma0")?,
                self.real("r")?,
                self.int("population_size")?,
                tolerances,
            )?),
            AlgorithmId::DualAnnealing => Box::new(DualAnnealing::new(
                self.real("initial_temp")?,
                self.real("restart_temp_ratio")?,
                self.real("visit")?,
                self.real("accept")?,
                tolerances,
            )?),
            AlgorithmId::CmaEs => Box::new(CmaEs::new(self.real("sigma0")?, self.int("population_size")?, tolerances)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn values(pairs: &[(&str, ParamValue)]) -> ParamValues {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn defaults_lie_inside_ranges() {
        for a in AlgorithmId::ALL {
            let space = HyperparameterSpace::for_algorithm(a);
            let d = space.validate(&ParamValues::new()).unwrap();
            assert_eq!(d, space.defaults());
            for e in &space.entries {
                if let ParamKind::Log { lo, hi } = e.kind {
                    assert!(lo > 0.0 && hi > lo);
                }
            }
            OptimizerInstance::new(&space, &ParamValues::new(), 0)
                .unwrap()
                .build(LocalTolerances::default())
                .unwrap();
        }
    }

    #[test]
    fn tuned_instances_are_accepted() {
        use ParamValue::*;
        let cases = [
            (
                AlgorithmId::DifferentialEvolution,
                values(&[
                    ("popsize", Int(11)),
                    ("recombination", Real(0.677)),
                    ("polish", Bool(true)),
                    ("dithering", Bool(true)),
                    ("mutation_low", Real(0.750)),
                    ("mutation_high", Real(0.918)),
                ]),
            ),
            (
                AlgorithmId::Pso,
                values(&[("sigma0", Real(1.94e5)), ("r", Real(0.268)), ("population_size", Int(124))]),
            ),
            (
                AlgorithmId::DualAnnealing,
                values(&[
                    ("initial_temp", Real(2.69e4)),
                    ("restart_temp_ratio", Real(1.49e-3)),
                    ("visit", Real(2.47)),
                    ("accept", Real(-3.42)),
                ]),
            ),
            (AlgorithmId::CmaEs, values(&[("sigma0", Real(3.09e5)), ("population_size", Int(10))])),
        ];
        for (a, v) in cases {
            let space = HyperparameterSpace::for_algorithm(a);
            let inst = OptimizerInstance::new(&space, &v, 1).unwrap();
            inst.build(LocalTolerances::default()).unwrap();
        }
    }

    #[test]
    fn errors_name_parameter_and_range() {
        let space = HyperparameterSpace::for_algorithm(AlgorithmId::DifferentialEvolution);
        let err = space.validate(&values(&[("popsize", ParamValue::Int(5))])).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("popsize") && msg.contains("[10, 50]"), "{msg}");

        let err = space
            .validate(&values(&[
                ("mutation_low", ParamValue::Real(1.2)),
                ("mutation_high", ParamValue::Real(1.0)),
            ]))
            .unwrap_err();
        assert!(err.to_string().contains("mutation_high"));
        assert!(err.to_string().contains("[1.2, 2]"));

        assert!(space.validate(&values(&[("bogus", ParamValue::Int(1))])).is_err());
    }

    #[test]
    fn integral_reals_coerce_to_int() {
        let space = HyperparameterSpace::for_algorithm(AlgorithmId::CmaEs);
        let v = space.validate(&values(&[("population_size", ParamValue::Real(8.0))])).unwrap();
        assert_eq!(v["population_size"], ParamValue::Int(8));
        assert!(space.validate(&values(&[("population_size", ParamValue::Real(8.5))])).is_err());
    }

    #[test]
    fn scaling_touches_only_distances() {
        let space = HyperparameterSpace::for_algorithm(AlgorithmId::Pso).scaled(0.01);
        assert_eq!(space.get("sigma0").unwrap().default, ParamValue::Real(1.2e3));
        assert_eq!(space.get("r").unwrap().default, ParamValue::Real(0.5));
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in AlgorithmId::ALL {
            assert_eq!(a.as_str().parse::<AlgorithmId>().unwrap(), a);
        }
        assert!("mlsl".parse::<AlgorithmId>().is_err());
    }
}
