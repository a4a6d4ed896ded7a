//! Function-preserving reparameterizations of ReLU networks.
//!
//! Permuting the neurons of a hidden layer, or scaling one neuron's incoming
//! weights and bias by `alpha > 0` while dividing its outgoing weights by
//! `alpha`, leaves `f` unchanged but changes the hidden trace. Anything that
//! only observes `f` cannot tell the two parameter settings apart.

use num_bigint::BigUint;
use num_traits::{One, Signed, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::network::Network;
use crate::rational::{self, Rational};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum SymmetryTransform {
    /// New neuron `i` of hidden layer `layer` is old neuron `pi[i]`.
    #[serde(rename = "perm")]
    Permutation { layer: usize, pi: Vec<usize> },
    #[serde(rename = "scale")]
    Scaling {
        layer: usize,
        neuron: usize,
        #[serde(with = "rational::serde_rational")]
        alpha: Rational,
    },
}

impl SymmetryTransform {
    pub fn is_identity(&self) -> bool {
        match self {
            SymmetryTransform::Permutation { pi, .. } => pi.iter().enumerate().all(|(i, &p)| i == p),
            SymmetryTransform::Scaling { alpha, .. } => alpha.is_one(),
        }
    }

    /// `(layer, position)` of every neuron whose parameters the transform changes.
    pub fn moved_neurons(&self) -> Vec<(usize, usize)> {
        match self {
            SymmetryTransform::Permutation { layer, pi } => pi
                .iter()
                .enumerate()
                .filter(|(i, &p)| *i != p)
                .map(|(i, _)| (*layer, i))
                .collect(),
            SymmetryTransform::Scaling { layer, neuron, alpha } if !alpha.is_one() => vec![(*layer, *neuron)],
            SymmetryTransform::Scaling { .. } => Vec::new(),
        }
    }
}

fn check_layer(net: &Network, layer: usize) -> Result<usize> {
    let widths = net.hidden_widths();
    widths.get(layer).copied().ok_or_else(|| {
        Error::InvalidTransform(format!(
            "layer {layer} is not a hidden layer (network has {})",
            widths.len()
        ))
    })
}

pub fn apply_transform(net: &Network, t: &SymmetryTransform) -> Result<Network> {
    let mut layers = net.layers().to_vec();
    match t {
        SymmetryTransform::Permutation { layer, pi } => {
            let width = check_layer(net, *layer)?;
            let mut seen = vec![false; width];
            if pi.len() != width || pi.iter().any(|&p| p >= width || std::mem::replace(&mut seen[p], true)) {
                return Err(Error::InvalidTransform(format!(
                    "{pi:?} is not a permutation of 0..{width}"
                )));
            }
            let cur = &layers[*layer];
            let weights = pi.iter().map(|&p| cur.weights[p].clone()).collect();
            let bias = pi.iter().map(|&p| cur.bias[p].clone()).collect();
            layers[*layer].weights = weights;
            layers[*layer].bias = bias;
            let next = &mut layers[*layer + 1];
            next.weights = next
                .weights
                .iter()
                .map(|row| pi.iter().map(|&p| row[p].clone()).collect())
                .collect();
        }
        SymmetryTransform::Scaling { layer, neuron, alpha } => {
            let width = check_layer(net, *layer)?;
            if *neuron >= width {
                return Err(Error::InvalidTransform(format!(
                    "neuron {neuron} out of range for width {width}"
                )));
            }
            if !alpha.is_positive() {
                return Err(Error::InvalidTransform(format!("alpha = {alpha} must be positive")));
            }
            let cur = &mut layers[*layer];
            cur.weights[*neuron].iter_mut().for_each(|w| *w *= alpha);
            cur.bias[*neuron] *= alpha;
            for row in layers[*layer + 1].weights.iter_mut() {
                row[*neuron] /= alpha;
            }
        }
    }
    Network::new(net.input_dim(), layers)
}

pub fn apply_all(net: &Network, ts: &[SymmetryTransform]) -> Result<Network> {
    ts.iter().try_fold(net.clone(), |n, t| apply_transform(&n, t))
}

const SCALES: [(i64, i64); 4] = [(1, 2), (2, 1), (3, 1), (1, 3)];

/// A function-identical partner built from a random permutation that moves
/// neuron 0 of a randomly chosen hidden layer of width >= 2, plus an optional
/// random scaling in a different hidden layer.
pub fn random_symmetric_partner(net: &Network, seed: u64) -> Result<(Network, Vec<SymmetryTransform>)> {
    let widths = net.hidden_widths();
    let eligible: Vec<usize> = (0..widths.len()).filter(|&l| widths[l] >= 2).collect();
    if eligible.is_empty() {
        return Err(Error::NoWideLayer);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layer = *eligible.choose(&mut rng).expect("non-empty");
    let mut pi: Vec<usize> = (0..widths[layer]).collect();
    while pi[0] == 0 {
        pi.shuffle(&mut rng);
    }
    let mut transforms = vec![SymmetryTransform::Permutation { layer, pi }];
    let others: Vec<usize> = (0..widths.len()).filter(|&l| l != layer).collect();
    if !others.is_empty() && rng.gen_bool(0.5) {
        let other = *others.choose(&mut rng).expect("non-empty");
        let (p, q) = *SCALES.choose(&mut rng).expect("non-empty");
        transforms.push(SymmetryTransform::Scaling {
            layer: other,
            neuron: rng.gen_range(0..widths[other]),
            alpha: rational::rat(p, q),
        });
    }
    Ok((apply_all(net, &transforms)?, transforms))
}

/// Sum over hidden layers of the L1 distance between the two hidden traces.
pub fn representation_distance(net1: &Network, net2: &Network, x: &[Rational]) -> Result<Rational> {
    if net1.input_dim() != net2.input_dim() || net1.hidden_widths() != net2.hidden_widths() {
        return Err(Error::ArchitectureMismatch(format!(
            "{:?}/{} vs {:?}/{}",
            net1.hidden_widths(),
            net1.input_dim(),
            net2.hidden_widths(),
            net2.input_dim()
        )));
    }
    let t1 = net1.hidden_trace(x)?;
    let t2 = net2.hidden_trace(x)?;
    Ok(t1
        .activations
        .iter()
        .flatten()
        .zip(t2.activations.iter().flatten())
        .fold(rational::zero(), |acc, (a, b)| acc + (a - b).abs()))
}

/// `∏ d_l!`, the order of the permutation subgroup.
pub fn group_order_lower_bound(hidden_widths: &[usize]) -> BigUint {
    hidden_widths
        .iter()
        .flat_map(|&d| 1..=d)
        .fold(BigUint::one(), |acc, k| acc * BigUint::from(k))
}

fn neuron_tuple(net: &Network, layer: usize, neuron: usize) -> Vec<&Rational> {
    let l = &net.layers()[layer];
    l.weights[neuron].iter().chain(std::iter::once(&l.bias[neuron])).collect()
}

/// 1 iff in every hidden layer, neuron 0 carries the lexicographically
/// greatest `(incoming weights, bias)` tuple of its layer.
///
/// Deliberately depends on neuron order, so it is not invariant under
/// permutations even though `f` is.
pub fn synthetic_alignment_objective(net: &Network) -> Result<u8> {
    if net.hidden_layers().is_empty() {
        return Err(Error::Precondition("network has no hidden layer".into()));
    }
    let head_is_max = net.hidden_widths().iter().enumerate().all(|(l, &w)| {
        let head = neuron_tuple(net, l, 0);
        (1..w).all(|j| head >= neuron_tuple(net, l, j))
    });
    Ok(head_is_max as u8)
}

/// True when every hidden layer's `(weights, bias)` tuples are pairwise distinct.
pub fn has_distinct_rows(net: &Network) -> bool {
    net.hidden_widths().iter().enumerate().all(|(l, &w)| {
        (0..w).all(|i| (i + 1..w).all(|j| neuron_tuple(net, l, i) != neuron_tuple(net, l, j)))
    })
}

/// Move the greatest tuple of every hidden layer to index 0 with a
/// transposition, layer by layer, since permuting a layer reorders the
/// columns of the next. The result scores 1 on [`synthetic_alignment_objective`].
pub fn canonicalize_head(net: &Network) -> Result<(Network, Vec<SymmetryTransform>)> {
    let mut current = net.clone();
    let mut transforms = Vec::new();
    for (l, &w) in net.hidden_widths().iter().enumerate() {
        let best = (1..w).fold(0, |best, j| {
            if neuron_tuple(&current, l, j) > neuron_tuple(&current, l, best) {
                j
            } else {
                best
            }
        });
        if best != 0 {
            let mut pi: Vec<usize> = (0..w).collect();
            pi.swap(0, best);
            let t = SymmetryTransform::Permutation { layer: l, pi };
            current = apply_transform(&current, &t)?;
            transforms.push(t);
        }
    }
    Ok((current, transforms))
}

/// A probe point is generic for a transformed pair when every hidden
/// pre-activation is nonzero, no two active neurons of a layer tie, and at
/// least one neuron the transforms move is active. Inactive neurons
/// contribute zeros to the trace, so permuting or scaling only dead neurons
/// cannot change it; ties let a swap of two active neurons go unseen.
pub fn is_generic_probe(net: &Network, transforms: &[SymmetryTransform], x: &[Rational]) -> Result<bool> {
    let pre = net.pre_activations(x)?;
    if pre.iter().flatten().any(Zero::is_zero) {
        return Ok(false);
    }
    for layer in &pre {
        let mut active: Vec<&Rational> = layer.iter().filter(|v| v.is_positive()).collect();
        active.sort();
        if active.windows(2).any(|w| w[0] == w[1]) {
            return Ok(false);
        }
    }
    // Transform positions refer to the network produced by the transforms
    // before them; track which source neuron sits at each position.
    let mut source: Vec<Vec<usize>> = net.hidden_widths().iter().map(|&w| (0..w).collect()).collect();
    let mut moved = Vec::new();
    for t in transforms {
        match t {
            SymmetryTransform::Permutation { layer, pi } => {
                let before = source[*layer].clone();
                source[*layer] = pi.iter().map(|&p| before[p]).collect();
            }
            SymmetryTransform::Scaling { .. } => {}
        }
        for (layer, pos) in t.moved_neurons() {
            moved.push((layer, source[layer][pos]));
        }
    }
    Ok(moved.iter().any(|&(l, j)| pre[l][j].is_positive()))
}
