//! Seeded instance generators.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::exact::LinearSpec;
use crate::network::{Layer, Network};
use crate::rational::{self, Rational};

/// Independent stream of the master seed, one per track or suite.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Tent map `t(x) = 2·ReLU(x) - 4·ReLU(x - 1/2)` composed `depth` times.
///
/// Every hidden layer has width 2; on `[0, 1]` the composition has `2^depth`
/// linear pieces.
pub fn sawtooth(depth: usize) -> Network {
    assert!(depth >= 1, "sawtooth needs at least one hidden layer");
    let half = rational::rat(-1, 2);
    let bias = vec![rational::zero(), half];
    let mut layers = vec![Layer::new(rational_rows(&[&[1], &[1]]), bias.clone())];
    for _ in 1..depth {
        layers.push(Layer::new(rational_rows(&[&[2, -4], &[2, -4]]), bias.clone()));
    }
    layers.push(Layer::new(rational_rows(&[&[2, -4]]), vec![rational::zero()]));
    Network::new(1, layers).expect("sawtooth layers are consistent")
}

fn rational_rows(rows: &[&[i64]]) -> Vec<Vec<Rational>> {
    rows.iter().map(|r| rational::ints(r)).collect()
}

/// Architecture of a random network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shape {
    pub input_dim: usize,
    pub widths: Vec<usize>,
    pub output_dim: usize,
}

impl Shape {
    pub fn neurons(&self) -> usize {
        self.widths.iter().sum()
    }

    /// Input dimension in `1..=max_inputs`, `1..=max_depth` hidden layers of
    /// width `min_width..=max_width`, at most `max_neurons` hidden neurons.
    pub fn random(
        rng: &mut impl Rng,
        max_inputs: usize,
        max_depth: usize,
        (min_width, max_width): (usize, usize),
        max_neurons: usize,
    ) -> Shape {
        loop {
            let depth = rng.gen_range(1..=max_depth);
            let widths: Vec<usize> = (0..depth).map(|_| rng.gen_range(min_width..=max_width)).collect();
            if widths.iter().sum::<usize>() <= max_neurons {
                return Shape {
                    input_dim: rng.gen_range(1..=max_inputs),
                    widths,
                    output_dim: 1,
                };
            }
        }
    }
}

/// Halves `k/2` with `|k| <= 4`.
fn half_integer(rng: &mut impl Rng) -> Rational {
    rational::rat(rng.gen_range(-4..=4), 2)
}

fn random_row(rng: &mut impl Rng, len: usize) -> Vec<Rational> {
    loop {
        let row: Vec<Rational> = (0..len).map(|_| half_integer(rng)).collect();
        if row.iter().any(|w| *w != rational::zero()) {
            return row;
        }
    }
}

/// Weights and biases in `{-2, -3/2, ..., 2}`; no weight row is all zero.
pub fn random_network(rng: &mut impl Rng, shape: &Shape) -> Network {
    let mut dims = vec![shape.input_dim];
    dims.extend(&shape.widths);
    dims.push(shape.output_dim);
    let layers = dims
        .windows(2)
        .map(|w| {
            let weights = (0..w[1]).map(|_| random_row(rng, w[0])).collect();
            let bias = (0..w[1]).map(|_| half_integer(rng)).collect();
            Layer::new(weights, bias)
        })
        .collect();
    Network::new(shape.input_dim, layers).expect("generated layers are consistent")
}

/// `±y_i <= b` with `b` a half-integer in `[-4, 4]`.
pub fn random_spec(rng: &mut impl Rng, output_dim: usize) -> LinearSpec {
    let index = rng.gen_range(0..output_dim);
    let b = rational::rat(rng.gen_range(-8..=8), 2);
    if rng.gen_bool(0.5) {
        LinearSpec::upper(output_dim, index, b)
    } else {
        LinearSpec::lower(output_dim, index, -b)
    }
}

/// Point with coordinates `k / density`, `|k| <= radius·density`.
pub fn grid_point(rng: &mut impl Rng, dim: usize, radius: i64, density: i64) -> Vec<Rational> {
    (0..dim)
        .map(|_| rational::rat(rng.gen_range(-radius * density..=radius * density), density))
        .collect()
}

/// `count` distinct points of the half-integer grid on `[-radius, radius]`.
pub fn half_grid_support(rng: &mut impl Rng, count: usize, radius: i64) -> Vec<Rational> {
    let mut grid: Vec<i64> = (-2 * radius..=2 * radius).collect();
    grid.shuffle(rng);
    let mut picked: Vec<Rational> = grid.into_iter().take(count).map(|k| rational::rat(k, 2)).collect();
    picked.sort();
    picked
}
