//! Multi-layer perceptrons compiled to rule programs.
//!
//! Neuron `j` of layer `k` is the rule `n(k,j)`. Input `j` arrives as the
//! event `i(X,(0,j))`; the output of neuron `(k,j)` is the fact
//! `o(Y,(k,j))`. Layer 1 is a set of ECA rules over the inputs, deeper
//! layers are if-rules over the previous layer's outputs, so one macro-step
//! computes the whole network.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use inst_core::engine::{Builtin, BuiltinRegistry, Event};
use inst_core::kernel::{Atom, Number, StateOfAffairs, Term};
use inst_core::parser::{parse_program, RuleBase};
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational;

pub const CALCULATE: &str = "calculate";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    /// 1 when the weighted sum is strictly positive, else 0.
    Step,
    Relu,
    /// Piecewise-linear interpolation of [`SIGMOID_TABLE`].
    #[serde(alias = "sigmoid-rational-approx")]
    Sigmoid,
}

/// Logistic sigmoid at -6..=6, rounded to thousandths. Values between
/// points are interpolated linearly; outside the range they are clamped.
pub const SIGMOID_TABLE: [(i64, i64); 13] = [
    (-6, 2),
    (-5, 7),
    (-4, 18),
    (-3, 47),
    (-2, 119),
    (-1, 269),
    (0, 500),
    (1, 731),
    (2, 881),
    (3, 953),
    (4, 982),
    (5, 993),
    (6, 998),
];

pub fn sigmoid_approx(x: &Number) -> Number {
    let at = |i: usize| Number::new(SIGMOID_TABLE[i].1.into(), 1000.into());
    let last = SIGMOID_TABLE.len() - 1;
    if *x <= Number::from_integer(SIGMOID_TABLE[0].0.into()) {
        return at(0);
    }
    if *x >= Number::from_integer(SIGMOID_TABLE[last].0.into()) {
        return at(last);
    }
    let lo = x.floor();
    let i = SIGMOID_TABLE.iter().position(|(k, _)| Number::from_integer((*k).into()) == lo).unwrap_or(0);
    if i == last {
        return at(last);
    }
    let frac = x - &lo;
    at(i) + (at(i + 1) - at(i)) * frac
}

impl Activation {
    pub fn apply(self, x: &Number) -> Number {
        match self {
            Activation::Step => {
                if x.is_positive() {
                    Number::one()
                } else {
                    Number::zero()
                }
            }
            Activation::Relu => {
                if x.is_positive() {
                    x.clone()
                } else {
                    Number::zero()
                }
            }
            Activation::Sigmoid => sigmoid_approx(x),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Neuron {
    #[serde(with = "rational::vec")]
    pub weights: Vec<Number>,
    #[serde(with = "rational::one")]
    pub bias: Number,
}

/// `layer_sizes[0]` is the number of inputs; `layers[k-1]` holds the
/// neurons of layer `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub layers: Vec<Vec<Neuron>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MlpError {
    #[error("invalid network: {0}")]
    SpecInvariantViolation(String),
    #[error("unknown neuron `{0}`")]
    UnknownNeuron(String),
    #[error("neuron `{neuron}` takes {expected} input(s), got {got}")]
    ArityMismatch { neuron: String, expected: usize, got: usize },
    #[error("neuron input `{0}` is not a number")]
    NotANumber(String),
}

impl MlpSpec {
    pub fn validate(&self) -> Result<(), MlpError> {
        let bad = |m: String| Err(MlpError::SpecInvariantViolation(m));
        if self.layer_sizes.len() < 2 {
            return bad("at least an input size and one layer are needed".into());
        }
        if let Some(k) = self.layer_sizes.iter().position(|&n| n == 0) {
            return bad(format!("layer {k} is empty"));
        }
        if self.layers.len() != self.layer_sizes.len() - 1 {
            return bad(format!(
                "{} layer size(s) after the inputs but {} layer(s) of neurons",
                self.layer_sizes.len() - 1,
                self.layers.len()
            ));
        }
        for (k, layer) in self.layers.iter().enumerate() {
            if layer.len() != self.layer_sizes[k + 1] {
                return bad(format!("layer {} has {} neuron(s), expected {}", k + 1, layer.len(), self.layer_sizes[k + 1]));
            }
            for (j, n) in layer.iter().enumerate() {
                if n.weights.len() != self.layer_sizes[k] {
                    return bad(format!(
                        "neuron ({},{}) has {} weight(s), expected {}",
                        k + 1,
                        j + 1,
                        n.weights.len(),
                        self.layer_sizes[k]
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }
}

fn label(k: usize, j: usize) -> Term {
    Term::tuple(vec![Term::int(k as i64), Term::int(j as i64)])
}

pub fn neuron_id(k: usize, j: usize) -> Atom {
    Atom::new("n", vec![Term::int(k as i64), Term::int(j as i64)])
}

/// The rule program computing `spec`. Needs [`Calculator`] registered as
/// `calculate`.
pub fn gen_mlp_program(spec: &MlpSpec) -> Result<RuleBase, MlpError> {
    spec.validate()?;
    let mut src = String::new();
    for (k0, layer) in spec.layers.iter().enumerate() {
        let k = k0 + 1;
        let n = spec.layer_sizes[k0];
        let xs: Vec<String> = (1..=n).map(|i| format!("X{i}")).collect();
        for j in 1..=layer.len() {
            let call = format!("builtin({CALCULATE}, n({k},{j}), {}, Y)", xs.join(", "));
            if k == 1 {
                let on: Vec<String> = xs.iter().enumerate().map(|(i, x)| format!("i({x},(0,{}))", i + 1)).collect();
                let _ = writeln!(src, "rule(n({k},{j}), on {} if {call} do add(o(Y,({k},{j})))).", on.join(", "));
            } else {
                let ifs: Vec<String> = xs.iter().enumerate().map(|(i, x)| format!("o({x},({k0},{}))", i + 1)).collect();
                let _ = writeln!(src, "rule(n({k},{j}), if {} & {call} do add(o(Y,({k},{j})))).", ifs.join(" & "));
            }
        }
    }
    parse_program(&src).map_err(|e| MlpError::SpecInvariantViolation(format!("generated program does not parse: {e}")))
}

/// The input events for one evaluation of the network.
pub fn input_events(agent: &str, inputs: &[Number]) -> Vec<Event> {
    inputs
        .iter()
        .enumerate()
        .map(|(j, x)| Event::new(agent, Atom::new("i", vec![Term::Num(x.clone()), label(0, j + 1)])))
        .collect()
}

/// The values of `o(Y,(layer,j))` facts in `state`, indexed by `j - 1`.
pub fn read_outputs(state: &StateOfAffairs, layer: usize, width: usize) -> Vec<Option<Number>> {
    let mut out = vec![None; width];
    for cf in state.iter() {
        let a = &cf.atom;
        if a.pred != "o" || a.args.len() != 2 || !cf.constraints.is_empty() {
            continue;
        }
        let Term::Compound(f, at) = &a.args[1] else { continue };
        let (Term::Num(y), ",", [Term::Num(k), Term::Num(j)]) = (&a.args[0], f.as_str(), at.as_slice()) else {
            continue;
        };
        if *k == Number::from_integer(layer.into()) && j.is_integer() && j.is_positive() {
            let j: usize = j.to_integer().try_into().unwrap_or(usize::MAX);
            if j >= 1 && j <= width {
                out[j - 1] = Some(y.clone());
            }
        }
    }
    out
}

/// The `calculate` builtin: `builtin(calculate, n(K,J), X1, ..., Xn, Y)`.
#[derive(Clone, Debug)]
pub struct Calculator {
    activation: Activation,
    neurons: BTreeMap<(usize, usize), Neuron>,
}

impl Calculator {
    pub fn new(spec: &MlpSpec) -> Result<Self, MlpError> {
        spec.validate()?;
        let mut neurons = BTreeMap::new();
        for (k, layer) in spec.layers.iter().enumerate() {
            for (j, n) in layer.iter().enumerate() {
                neurons.insert((k + 1, j + 1), n.clone());
            }
        }
        Ok(Calculator { activation: spec.activation, neurons })
    }

    pub fn calculate(&self, neuron: &Term, inputs: &[Term]) -> Result<Number, MlpError> {
        let key = match neuron {
            Term::Compound(f, args) if f == "n" && args.len() == 2 => match (&args[0], &args[1]) {
                (Term::Num(k), Term::Num(j)) if k.is_integer() && j.is_integer() => {
                    k.to_integer().try_into().ok().zip(j.to_integer().try_into().ok())
                }
                _ => None,
            },
            _ => None,
        };
        let n = key.and_then(|k| self.neurons.get(&k)).ok_or_else(|| MlpError::UnknownNeuron(neuron.to_string()))?;
        if inputs.len() != n.weights.len() {
            return Err(MlpError::ArityMismatch {
                neuron: neuron.to_string(),
                expected: n.weights.len(),
                got: inputs.len(),
            });
        }
        let mut sum = n.bias.clone();
        for (w, x) in n.weights.iter().zip(inputs) {
            let Term::Num(x) = x else {
                return Err(MlpError::NotANumber(x.to_string()));
            };
            sum += w * x;
        }
        Ok(self.activation.apply(&sum))
    }

    pub fn register(self, registry: &mut BuiltinRegistry) {
        registry.register(CALCULATE, self);
    }
}

impl Builtin for Calculator {
    fn outputs(&self) -> usize {
        1
    }

    fn call(&self, inputs: &[Term]) -> Result<Option<Vec<Term>>, String> {
        let (neuron, xs) = inputs.split_first().ok_or_else(|| "missing neuron id".to_string())?;
        self.calculate(neuron, xs).map(|y| Some(vec![Term::Num(y)])).map_err(|e| e.to_string())
    }
}
