//! Scaled-integer forward pass. Shares nothing with the library's rational
//! arithmetic beyond reading the parameters.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use trilemma_core::{LinearSpec, Network, Rational};

struct IntLayer {
    w: Vec<Vec<i128>>,
    b: Vec<i128>,
    /// Common denominator of the layer's weights and biases.
    den: i128,
}

pub struct IntNet {
    layers: Vec<IntLayer>,
    pub input_dim: usize,
}

fn small(v: &BigInt) -> i128 {
    v.to_i128().expect("value fits in i128")
}

fn scaled(r: &Rational, den: &BigInt) -> i128 {
    let v = r * Rational::from_integer(den.clone());
    assert!(v.is_integer());
    small(v.numer())
}

impl IntNet {
    pub fn new(net: &Network) -> Self {
        let layers = net
            .layers()
            .iter()
            .map(|l| {
                let den = l
                    .weights
                    .iter()
                    .flatten()
                    .chain(&l.bias)
                    .fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
                IntLayer {
                    w: l.weights.iter().map(|row| row.iter().map(|v| scaled(v, &den)).collect()).collect(),
                    b: l.bias.iter().map(|v| scaled(v, &den)).collect(),
                    den: small(&den),
                }
            })
            .collect();
        Self {
            layers,
            input_dim: net.input_dim(),
        }
    }

    /// Denominator of the output when inputs are numerators over `s`.
    pub fn output_den(&self, s: i128) -> i128 {
        self.layers.iter().fold(s, |acc, l| acc * l.den)
    }

    /// Output numerators over [`IntNet::output_den`] for input `x / s`.
    pub fn forward(&self, x: &[i128], s: i128) -> Vec<i128> {
        let mut v = x.to_vec();
        let mut den = s;
        let last = self.layers.len() - 1;
        for (k, l) in self.layers.iter().enumerate() {
            let mut next: Vec<i128> = l
                .w
                .iter()
                .zip(&l.b)
                .map(|(row, b)| row.iter().zip(&v).map(|(w, x)| w * x).sum::<i128>() + b * den)
                .collect();
            if k != last {
                next.iter_mut().for_each(|z| *z = (*z).max(0));
            }
            v = next;
            den *= l.den;
        }
        v
    }
}

/// `c·y <= b` over integers: `c·Y <= b_num·S / b_den` becomes
/// `b_den·c_int·Y <= b_num·S·c_den` after clearing denominators.
pub struct IntSpec {
    c: Vec<i128>,
    b: i128,
}

impl IntSpec {
    pub fn new(spec: &LinearSpec) -> Self {
        let den = spec.c.iter().chain(std::iter::once(&spec.b)).fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
        Self {
            c: spec.c.iter().map(|v| scaled(v, &den)).collect(),
            b: scaled(&spec.b, &den),
        }
    }

    /// Scaled `c·y` for output numerators `y`.
    pub fn objective(&self, y: &[i128]) -> i128 {
        self.c.iter().zip(y).map(|(c, y)| c * y).sum()
    }

    pub fn violated(&self, y: &[i128], out_den: i128) -> bool {
        self.objective(y) > self.b * out_den
    }
}

/// Points per axis for a grid of at least `min_points` points in `dim` dimensions.
pub fn grid_per_axis(dim: usize, min_points: usize) -> usize {
    let mut per_axis = (min_points as f64).powf(1.0 / dim as f64).floor() as usize;
    while per_axis.pow(dim as u32) < min_points {
        per_axis += 1;
    }
    per_axis
}

/// Visit the `per_axis^d` grid over an integer box. Points are numerators
/// over `per_axis - 1`.
pub fn for_each_grid_point(lower: &[i64], upper: &[i64], per_axis: usize, mut visit: impl FnMut(&[i128])) {
    let d = lower.len();
    let steps = (per_axis - 1) as i128;
    let mut idx = vec![0usize; d];
    let mut point = vec![0i128; d];
    loop {
        for k in 0..d {
            point[k] = lower[k] as i128 * steps + idx[k] as i128 * (upper[k] - lower[k]) as i128;
        }
        visit(&point);
        let mut k = 0;
        loop {
            if k == d {
                return;
            }
            idx[k] += 1;
            if idx[k] < per_axis {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

pub fn ratio(num: i128, den: i128) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}
