//! Feedforward ReLU networks with exact rational parameters.
//!
//! A [`Network`] is a list of affine layers. Every layer but the last is
//! followed by ReLU; the last layer is the affine output map. Hidden neurons
//! are indexed layer-major wherever a flat index is needed.

use std::path::Path;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::rational::{self, dot, relu, Rational};
use crate::{check_dim, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layer {
    #[serde(with = "rational::serde_rational_mat")]
    pub weights: Vec<Vec<Rational>>,
    #[serde(with = "rational::serde_rational_vec")]
    pub bias: Vec<Rational>,
}

impl Layer {
    pub fn new(weights: Vec<Vec<Rational>>, bias: Vec<Rational>) -> Self {
        Self { weights, bias }
    }

    pub fn out_dim(&self) -> usize {
        self.bias.len()
    }

    pub fn in_dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    fn apply(&self, x: &[Rational]) -> Vec<Rational> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| dot(row, x) + b)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Network {
    input_dim: usize,
    layers: Vec<Layer>,
}

#[derive(Deserialize)]
struct NetworkWire {
    input_dim: usize,
    layers: Vec<Layer>,
}

impl<'de> Deserialize<'de> for Network {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = NetworkWire::deserialize(d)?;
        Network::new(wire.input_dim, wire.layers).map_err(serde::de::Error::custom)
    }
}

/// Post-ReLU activations of every hidden layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HiddenTrace {
    #[serde(serialize_with = "serialize_trace")]
    pub activations: Vec<Vec<Rational>>,
}

fn serialize_trace<S: serde::Serializer>(
    m: &[Vec<Rational>],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    rational::serde_rational_mat::serialize(m, s)
}

/// On/off state of every hidden neuron, layer-major. `true` means the
/// pre-activation is strictly positive.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActivationPattern {
    pub bits: Vec<bool>,
}

impl ActivationPattern {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Pattern `i` of `2^n` in little-endian bit order.
    pub fn from_index(index: u64, n: usize) -> Self {
        Self::new((0..n).map(|i| index >> i & 1 == 1).collect())
    }
}

impl std::fmt::Display for ActivationPattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Affine map `x -> A x + c`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffineMap {
    pub matrix: Vec<Vec<Rational>>,
    pub offset: Vec<Rational>,
}

impl AffineMap {
    pub fn identity(n: usize) -> Self {
        let matrix = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { rational::one() } else { rational::zero() })
                    .collect()
            })
            .collect();
        Self {
            matrix,
            offset: vec![rational::zero(); n],
        }
    }

    pub fn apply(&self, x: &[Rational]) -> Vec<Rational> {
        self.matrix
            .iter()
            .zip(&self.offset)
            .map(|(row, c)| dot(row, x) + c)
            .collect()
    }

    /// `layer ∘ self`.
    pub fn then(&self, layer: &Layer) -> AffineMap {
        let n = self.matrix.first().map_or(0, Vec::len);
        let matrix = layer
            .weights
            .iter()
            .map(|w| {
                (0..n)
                    .map(|j| {
                        w.iter()
                            .zip(&self.matrix)
                            .fold(rational::zero(), |acc, (wk, row)| acc + wk * &row[j])
                    })
                    .collect()
            })
            .collect();
        let offset = layer
            .weights
            .iter()
            .zip(&layer.bias)
            .map(|(w, b)| dot(w, &self.offset) + b)
            .collect();
        AffineMap { matrix, offset }
    }
}

/// Affine form `row · x + constant` of one hidden neuron's pre-activation,
/// valid on the region selected by the preceding pattern bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeuronForm {
    pub row: Vec<Rational>,
    pub constant: Rational,
}

impl NeuronForm {
    pub fn is_constant(&self) -> bool {
        self.row.iter().all(Zero::is_zero)
    }
}

impl Network {
    pub fn new(input_dim: usize, layers: Vec<Layer>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidNetwork("input_dim must be positive".into()));
        }
        if layers.is_empty() {
            return Err(Error::InvalidNetwork("at least one layer is required".into()));
        }
        let mut prev = input_dim;
        for (l, layer) in layers.iter().enumerate() {
            if layer.bias.is_empty() {
                return Err(Error::InvalidNetwork(format!("layer {l} has no neurons")));
            }
            if layer.weights.len() != layer.bias.len() {
                return Err(Error::InvalidNetwork(format!(
                    "layer {l}: {} weight rows but {} biases",
                    layer.weights.len(),
                    layer.bias.len()
                )));
            }
            if let Some(row) = layer.weights.iter().find(|r| r.len() != prev) {
                return Err(Error::InvalidNetwork(format!(
                    "layer {l}: weight row has {} columns, expected {prev}",
                    row.len()
                )));
            }
            prev = layer.bias.len();
        }
        Ok(Self { input_dim, layers })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_layer().out_dim()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn into_layers(self) -> Vec<Layer> {
        self.layers
    }

    pub fn hidden_layers(&self) -> &[Layer] {
        &self.layers[..self.layers.len() - 1]
    }

    pub fn output_layer(&self) -> &Layer {
        self.layers.last().expect("validated non-empty")
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.hidden_layers().iter().map(Layer::out_dim).collect()
    }

    /// Total hidden neuron count `N`.
    pub fn num_hidden(&self) -> usize {
        self.hidden_widths().iter().sum()
    }

    /// Total number of scalar parameters.
    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.out_dim() * (l.in_dim() + 1))
            .sum()
    }

    pub fn forward(&self, x: &[Rational]) -> Result<Vec<Rational>> {
        check_dim("forward input", self.input_dim, x.len())?;
        let mut h = x.to_vec();
        for layer in self.hidden_layers() {
            h = layer.apply(&h).iter().map(relu).collect();
        }
        Ok(self.output_layer().apply(&h))
    }

    pub fn hidden_trace(&self, x: &[Rational]) -> Result<HiddenTrace> {
        check_dim("hidden_trace input", self.input_dim, x.len())?;
        let mut h = x.to_vec();
        let mut activations = Vec::with_capacity(self.layers.len() - 1);
        for layer in self.hidden_layers() {
            h = layer.apply(&h).iter().map(relu).collect();
            activations.push(h.clone());
        }
        Ok(HiddenTrace { activations })
    }

    /// Pre-activations of every hidden layer at `x`.
    pub fn pre_activations(&self, x: &[Rational]) -> Result<Vec<Vec<Rational>>> {
        check_dim("pre_activations input", self.input_dim, x.len())?;
        let mut h = x.to_vec();
        let mut out = Vec::with_capacity(self.layers.len() - 1);
        for layer in self.hidden_layers() {
            let pre = layer.apply(&h);
            h = pre.iter().map(relu).collect();
            out.push(pre);
        }
        Ok(out)
    }

    /// Output layer applied to a trace's last entry (or to `x` when there are
    /// no hidden layers).
    pub fn output_from_trace(&self, x: &[Rational], trace: &HiddenTrace) -> Vec<Rational> {
        match trace.activations.last() {
            Some(h) => self.output_layer().apply(h),
            None => self.output_layer().apply(x),
        }
    }

    pub fn activation_pattern(&self, x: &[Rational]) -> Result<ActivationPattern> {
        let pre = self.pre_activations(x)?;
        Ok(ActivationPattern::new(
            pre.iter().flatten().map(Signed::is_positive).collect(),
        ))
    }

    /// True when every hidden pre-activation at `x` is nonzero.
    pub fn is_generic_point(&self, x: &[Rational]) -> Result<bool> {
        Ok(self
            .pre_activations(x)?
            .iter()
            .flatten()
            .all(|v| !v.is_zero()))
    }

    fn check_pattern(&self, p: &ActivationPattern) -> Result<()> {
        check_dim("activation pattern length", self.num_hidden(), p.len())
    }

    /// Pre-activation forms of all hidden neurons under pattern `p`, layer-major.
    ///
    /// The form of a neuron in layer `l` only depends on the bits of layers
    /// before `l`.
    pub fn neuron_forms(&self, p: &ActivationPattern) -> Result<Vec<NeuronForm>> {
        self.check_pattern(p)?;
        let mut forms = Vec::with_capacity(p.len());
        let mut map = AffineMap::identity(self.input_dim);
        let mut bit = 0;
        for layer in self.hidden_layers() {
            let mut pre = map.then(layer);
            for (row, c) in pre.matrix.iter_mut().zip(pre.offset.iter_mut()) {
                forms.push(NeuronForm {
                    row: row.clone(),
                    constant: c.clone(),
                });
                if !p.bits[bit] {
                    row.iter_mut().for_each(|v| v.set_zero());
                    c.set_zero();
                }
                bit += 1;
            }
            map = pre;
        }
        Ok(forms)
    }

    /// The affine map the network computes on the region indexed by `p`.
    ///
    /// Defined for every pattern, feasible or not.
    pub fn affine_map_for_pattern(&self, p: &ActivationPattern) -> Result<AffineMap> {
        self.check_pattern(p)?;
        let mut map = AffineMap::identity(self.input_dim);
        let mut bit = 0;
        for layer in self.hidden_layers() {
            map = map.then(layer);
            for (row, c) in map.matrix.iter_mut().zip(map.offset.iter_mut()) {
                if !p.bits[bit] {
                    row.iter_mut().for_each(|v| v.set_zero());
                    c.set_zero();
                }
                bit += 1;
            }
        }
        Ok(map.then(self.output_layer()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// Shorthand used throughout tests and generators: integer weights per layer.
pub fn int_layer(weights: &[&[i64]], bias: &[i64]) -> Layer {
    Layer::new(
        weights.iter().map(|r| rational::ints(r)).collect(),
        rational::ints(bias),
    )
}

/// `|x|` as a two-neuron network: hidden rows `[1]`, `[-1]`, output `[1, 1]`.
pub fn abs_net() -> Network {
    Network::new(
        1,
        vec![
            int_layer(&[&[1], &[-1]], &[0, 0]),
            int_layer(&[&[1, 1]], &[0]),
        ],
    )
    .expect("valid")
}

/// `ReLU(x + shift)` with a single hidden neuron.
pub fn relu_net(shift: Rational) -> Network {
    Network::new(
        1,
        vec![
            Layer::new(vec![vec![rational::one()]], vec![shift]),
            int_layer(&[&[1]], &[0]),
        ],
    )
    .expect("valid")
}

/// Identity `f(x) = x` with no hidden layer.
pub fn identity_net() -> Network {
    Network::new(1, vec![int_layer(&[&[1]], &[0])]).expect("valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ints, rat};

    #[test]
    fn forward_identity_layer() {
        let net = identity_net();
        assert_eq!(net.forward(&[rat(7, 2)]).unwrap(), vec![rat(7, 2)]);
    }

    #[test]
    fn forward_relu_clamps() {
        let net = relu_net(int(0));
        assert_eq!(net.forward(&[int(-1)]).unwrap(), vec![int(0)]);
    }

    #[test]
    fn forward_abs() {
        let net = abs_net();
        assert_eq!(net.forward(&[int(3)]).unwrap(), vec![int(3)]);
        assert_eq!(net.forward(&[int(-3)]).unwrap(), vec![int(3)]);
    }

    #[test]
    fn forward_dimension_mismatch() {
        let net = abs_net();
        assert!(matches!(
            net.forward(&ints(&[1, 2])),
            Err(Error::Dimension { .. })
        ));
        assert!(net.hidden_trace(&[]).is_err());
        assert!(net.activation_pattern(&ints(&[1, 1])).is_err());
    }

    #[test]
    fn trace_of_abs() {
        let net = abs_net();
        assert_eq!(
            net.hidden_trace(&[int(3)]).unwrap().activations,
            vec![ints(&[3, 0])]
        );
        assert_eq!(
            net.hidden_trace(&[int(-3)]).unwrap().activations,
            vec![ints(&[0, 3])]
        );
    }

    #[test]
    fn trace_all_negative_is_zero() {
        let net = Network::new(
            1,
            vec![
                int_layer(&[&[1], &[2]], &[-10, -10]),
                int_layer(&[&[1, 1]], &[0]),
            ],
        )
        .unwrap();
        let trace = net.hidden_trace(&[int(1)]).unwrap();
        assert!(trace.activations.iter().flatten().all(Zero::is_zero));
    }

    #[test]
    fn patterns_of_abs() {
        let net = abs_net();
        assert_eq!(net.activation_pattern(&[int(3)]).unwrap().bits, vec![true, false]);
        assert_eq!(net.activation_pattern(&[int(-3)]).unwrap().bits, vec![false, true]);
        assert_eq!(net.activation_pattern(&[int(0)]).unwrap().bits, vec![false, false]);
    }

    #[test]
    fn affine_maps_of_abs() {
        let net = abs_net();
        let m = net
            .affine_map_for_pattern(&ActivationPattern::new(vec![true, false]))
            .unwrap();
        assert_eq!(m.matrix, vec![ints(&[1])]);
        assert_eq!(m.offset, ints(&[0]));
        let m = net
            .affine_map_for_pattern(&ActivationPattern::new(vec![false, true]))
            .unwrap();
        assert_eq!(m.matrix, vec![ints(&[-1])]);
        assert_eq!(m.offset, ints(&[0]));
    }

    #[test]
    fn all_off_in_bias_free_net_is_zero_map() {
        let net = Network::new(
            2,
            vec![
                int_layer(&[&[1, 2], &[-3, 1]], &[0, 0]),
                int_layer(&[&[1, -1], &[2, 2]], &[0, 0]),
                int_layer(&[&[5, 7]], &[0]),
            ],
        )
        .unwrap();
        let m = net
            .affine_map_for_pattern(&ActivationPattern::new(vec![false; 4]))
            .unwrap();
        assert!(m.matrix.iter().flatten().all(Zero::is_zero));
        assert!(m.offset.iter().all(Zero::is_zero));
    }

    #[test]
    fn rejects_malformed_layers() {
        assert!(Network::new(0, vec![int_layer(&[&[1]], &[0])]).is_err());
        assert!(Network::new(1, vec![]).is_err());
        assert!(Network::new(2, vec![int_layer(&[&[1]], &[0])]).is_err());
        assert!(Network::new(1, vec![int_layer(&[&[1], &[1]], &[0])]).is_err());
    }

    #[test]
    fn json_wire_format() {
        let text = r#"{"input_dim": 1, "layers": [
            {"weights": [["1"], [-1]], "bias": [0, "0"]},
            {"weights": [[1, "1/1"]], "bias": [0.0]}]}"#;
        let net = Network::from_json(text).unwrap();
        assert_eq!(net, abs_net());
        let back = Network::from_json(&net.to_json()).unwrap();
        assert_eq!(back, net);
        assert!(Network::from_json(r#"{"input_dim": 2, "layers": [{"weights": [["1"]], "bias": ["0"]}]}"#).is_err());
    }
}
