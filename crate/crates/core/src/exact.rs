//! Sound and complete verification of linear output specifications.
//!
//! `verify_full` enumerates every linear region of the network over the domain
//! and maximizes `c·f(x)` on each with an exact LP. The answer is never
//! `Unknown`; the price is one LP per region, and region counts can grow
//! exponentially with depth.

use std::time::{Duration, Instant};

use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::lp::{self, LpOutcome};
use crate::network::{Layer, Network};
use crate::rational::{self, dot, Rational};
use crate::region::{self, Domain, RegionOptions, WorkStats};
use crate::{check_dim, Error, Result};

/// `∀x ∈ D: c·f(x) <= b`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearSpec {
    #[serde(with = "rational::serde_rational_vec")]
    pub c: Vec<Rational>,
    #[serde(with = "rational::serde_rational")]
    pub b: Rational,
}

impl LinearSpec {
    pub fn new(c: Vec<Rational>, b: Rational) -> Self {
        Self { c, b }
    }

    /// `y_index <= b` on an output of dimension `dim`.
    pub fn upper(dim: usize, index: usize, b: Rational) -> Self {
        let mut c = vec![rational::zero(); dim];
        c[index] = rational::one();
        Self { c, b }
    }

    /// `y_index >= b`, written as `-y_index <= -b`.
    pub fn lower(dim: usize, index: usize, b: Rational) -> Self {
        let mut c = vec![rational::zero(); dim];
        c[index] = -rational::one();
        Self { c, b: -b }
    }

    /// `c·y - b`; positive means violated.
    pub fn margin(&self, y: &[Rational]) -> Rational {
        dot(&self.c, y) - &self.b
    }

    pub fn holds(&self, y: &[Rational]) -> bool {
        !self.margin(y).is_positive()
    }

    pub fn check_against(&self, net: &Network) -> Result<()> {
        check_dim("spec vector vs network output", net.output_dim(), self.c.len())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum VerdictKind {
    Certified,
    Violated {
        #[serde(with = "rational::serde_rational_vec")]
        witness: Vec<Rational>,
        #[serde(with = "rational::serde_rational")]
        margin: Rational,
    },
    Unknown,
}

/// Binary verdict demanded by downstream reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinaryVerdict {
    Aligned,
    Unaligned,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct VerdictStats {
    pub regions_examined: u64,
    pub lp_calls: u64,
    #[serde(serialize_with = "serialize_millis")]
    pub elapsed: Duration,
}

fn serialize_millis<S: serde::Serializer>(d: &Duration, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64() * 1e3)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    #[serde(flatten)]
    pub kind: VerdictKind,
    pub stats: VerdictStats,
}

impl Verdict {
    pub fn certified(stats: VerdictStats) -> Self {
        Self {
            kind: VerdictKind::Certified,
            stats,
        }
    }

    pub fn unknown(stats: VerdictStats) -> Self {
        Self {
            kind: VerdictKind::Unknown,
            stats,
        }
    }

    pub fn is_certified(&self) -> bool {
        matches!(self.kind, VerdictKind::Certified)
    }

    pub fn is_violated(&self) -> bool {
        matches!(self.kind, VerdictKind::Violated { .. })
    }

    pub fn is_unknown(&self) -> bool {
        matches!(self.kind, VerdictKind::Unknown)
    }

    pub fn witness(&self) -> Option<&[Rational]> {
        match &self.kind {
            VerdictKind::Violated { witness, .. } => Some(witness),
            _ => None,
        }
    }

    /// Only `Certified` maps to aligned; `Unknown` is treated as unaligned.
    pub fn to_binary(&self) -> BinaryVerdict {
        match self.kind {
            VerdictKind::Certified => BinaryVerdict::Aligned,
            VerdictKind::Violated { .. } | VerdictKind::Unknown => BinaryVerdict::Unaligned,
        }
    }

    /// Verdict tag without witness or stats, for cross-verifier comparisons.
    pub fn tag(&self) -> &'static str {
        match self.kind {
            VerdictKind::Certified => "certified",
            VerdictKind::Violated { .. } => "violated",
            VerdictKind::Unknown => "unknown",
        }
    }
}

/// Decide `∀x ∈ dom: c·f(x) <= b` exactly.
pub fn verify_full(net: &Network, spec: &LinearSpec, dom: &Domain) -> Result<Verdict> {
    verify_full_with(net, spec, dom, RegionOptions::default())
}

pub fn verify_full_with(
    net: &Network,
    spec: &LinearSpec,
    dom: &Domain,
    opts: RegionOptions,
) -> Result<Verdict> {
    spec.check_against(net)?;
    let start = Instant::now();
    let mut work = WorkStats::default();
    let regions = region::enumerate_regions_with_stats(net, dom, opts, &mut work)?;
    let mut kind = VerdictKind::Certified;
    for region in &regions {
        work.regions_examined += 1;
        // c·(A x + c0) = (cᵀA)·x + c·c0
        let objective: Vec<Rational> = (0..net.input_dim())
            .map(|j| {
                spec.c
                    .iter()
                    .zip(&region.affine.matrix)
                    .fold(rational::zero(), |acc, (ci, row)| acc + ci * &row[j])
            })
            .collect();
        let constant = dot(&spec.c, &region.affine.offset);
        work.lp_calls += 1;
        let witness = match lp::solve_max(&objective, &region.constraints)? {
            LpOutcome::Optimal { value, point } => {
                if value + &constant > spec.b {
                    Some(point)
                } else {
                    None
                }
            }
            LpOutcome::Unbounded { ray, base_point } => Some(step_along_ray(net, spec, &base_point, &ray)?),
            LpOutcome::Infeasible => None,
        };
        if let Some(witness) = witness {
            let margin = spec.margin(&net.forward(&witness)?);
            assert!(margin.is_positive(), "region witness must violate the spec");
            kind = VerdictKind::Violated { witness, margin };
            break;
        }
    }
    Ok(Verdict {
        kind,
        stats: VerdictStats {
            regions_examined: work.regions_examined,
            lp_calls: work.lp_calls,
            elapsed: start.elapsed(),
        },
    })
}

/// Smallest `2^k` (k >= 0) such that `base + 2^k·ray` violates the spec.
fn step_along_ray(
    net: &Network,
    spec: &LinearSpec,
    base: &[Rational],
    ray: &[Rational],
) -> Result<Vec<Rational>> {
    for k in 0u32.. {
        let step = rational::pow2(k);
        let x: Vec<Rational> = base.iter().zip(ray).map(|(b, d)| b + &step * d).collect();
        if spec.margin(&net.forward(&x)?).is_positive() {
            return Ok(x);
        }
    }
    unreachable!("objective strictly increases along the ray")
}

/// Hidden layers of `net` extended to exactly `depth` hidden layers, plus the
/// matching output layer. Extra layers pass post-ReLU values through with an
/// identity map; a network with no hidden layer first splits `x` into
/// `ReLU(x)` and `ReLU(-x)`.
fn padded_layers(net: &Network, depth: usize) -> (Vec<Layer>, Layer) {
    let mut hidden: Vec<Layer> = net.hidden_layers().to_vec();
    let mut output = net.output_layer().clone();
    if depth == 0 {
        return (hidden, output);
    }
    if hidden.is_empty() {
        let n = net.input_dim();
        let weights = (0..2 * n)
            .map(|i| {
                (0..n)
                    .map(|j| match (i < n, i % n == j) {
                        (true, true) => rational::one(),
                        (false, true) => -rational::one(),
                        _ => rational::zero(),
                    })
                    .collect()
            })
            .collect();
        hidden.push(Layer::new(weights, vec![rational::zero(); 2 * n]));
        output.weights = output
            .weights
            .iter()
            .map(|row| row.iter().cloned().chain(row.iter().map(|v| -v)).collect())
            .collect();
    }
    while hidden.len() < depth {
        let w = hidden.last().expect("non-empty").out_dim();
        hidden.push(Layer::new(identity_rows(w), vec![rational::zero(); w]));
    }
    (hidden, output)
}

fn identity_rows(n: usize) -> Vec<Vec<Rational>> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { rational::one() } else { rational::zero() })
                .collect()
        })
        .collect()
}

/// `g(x) = f1(x) - f2(x)` as one ReLU network with block-diagonal hidden layers.
pub fn difference_network(net1: &Network, net2: &Network) -> Result<Network> {
    check_dim("equivalence input dims", net1.input_dim(), net2.input_dim())?;
    check_dim("equivalence output dims", net1.output_dim(), net2.output_dim())?;
    let depth = net1.hidden_layers().len().max(net2.hidden_layers().len());
    let (h1, o1) = padded_layers(net1, depth);
    let (h2, o2) = padded_layers(net2, depth);
    let mut layers = Vec::with_capacity(depth + 1);
    for (l, (a, b)) in h1.iter().zip(&h2).enumerate() {
        let weights = if l == 0 {
            a.weights.iter().chain(&b.weights).cloned().collect()
        } else {
            block_diag(&a.weights, &b.weights)
        };
        let bias = a.bias.iter().chain(&b.bias).cloned().collect();
        layers.push(Layer::new(weights, bias));
    }
    let out_weights = if depth == 0 {
        o1.weights
            .iter()
            .zip(&o2.weights)
            .map(|(r1, r2)| r1.iter().zip(r2).map(|(x, y)| x - y).collect())
            .collect()
    } else {
        o1.weights
            .iter()
            .zip(&o2.weights)
            .map(|(r1, r2)| r1.iter().cloned().chain(r2.iter().map(|v| -v)).collect())
            .collect()
    };
    let out_bias = o1.bias.iter().zip(&o2.bias).map(|(x, y)| x - y).collect();
    layers.push(Layer::new(out_weights, out_bias));
    Network::new(net1.input_dim(), layers)
}

fn block_diag(a: &[Vec<Rational>], b: &[Vec<Rational>]) -> Vec<Vec<Rational>> {
    let (ca, cb) = (a[0].len(), b[0].len());
    a.iter()
        .map(|r| r.iter().cloned().chain(std::iter::repeat_n(rational::zero(), cb)).collect())
        .chain(
            b.iter()
                .map(|r| std::iter::repeat_n(rational::zero(), ca).chain(r.iter().cloned()).collect()),
        )
        .collect()
}

/// Exact behavioral equivalence on `dom`. Returns an input where the outputs
/// differ when they are not equivalent.
pub fn equivalence_check(
    net1: &Network,
    net2: &Network,
    dom: &Domain,
) -> Result<(bool, Option<Vec<Rational>>)> {
    equivalence_check_with(net1, net2, dom, RegionOptions::default())
}

pub fn equivalence_check_with(
    net1: &Network,
    net2: &Network,
    dom: &Domain,
    opts: RegionOptions,
) -> Result<(bool, Option<Vec<Rational>>)> {
    let diff = difference_network(net1, net2)?;
    let m = diff.output_dim();
    for i in 0..m {
        for spec in [
            LinearSpec::upper(m, i, rational::zero()),
            LinearSpec::lower(m, i, rational::zero()),
        ] {
            if let VerdictKind::Violated { witness, .. } = verify_full_with(&diff, &spec, dom, opts)?.kind {
                debug_assert_ne!(net1.forward(&witness)?, net2.forward(&witness)?);
                return Ok((false, Some(witness)));
            }
        }
    }
    Ok((true, None))
}

/// Domain as written in spec files: `{"kind":"full"}` takes its dimension
/// from the network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DomainSpec {
    Full,
    Box {
        #[serde(with = "rational::serde_rational_vec")]
        lower: Vec<Rational>,
        #[serde(with = "rational::serde_rational_vec")]
        upper: Vec<Rational>,
    },
}

impl DomainSpec {
    pub fn resolve(&self, input_dim: usize) -> Result<Domain> {
        let dom = match self {
            DomainSpec::Full => Domain::full(input_dim),
            DomainSpec::Box { lower, upper } => Domain::new_box(lower.clone(), upper.clone())?,
        };
        check_dim("domain dimension", input_dim, dom.dimension())?;
        Ok(dom)
    }

    pub fn from_domain(dom: &Domain) -> Self {
        match dom {
            Domain::FullSpace { .. } => DomainSpec::Full,
            Domain::Box { lower, upper } => DomainSpec::Box {
                lower: lower.clone(),
                upper: upper.clone(),
            },
        }
    }
}

/// Spec file: `{"c": [...], "b": "p/q", "domain": {...}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecFile {
    #[serde(with = "rational::serde_rational_vec")]
    pub c: Vec<Rational>,
    #[serde(with = "rational::serde_rational")]
    pub b: Rational,
    pub domain: DomainSpec,
}

impl SpecFile {
    pub fn spec(&self) -> LinearSpec {
        LinearSpec::new(self.c.clone(), self.b.clone())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SpecFile = serde_json::from_str(text)?;
        if file.c.is_empty() {
            return Err(Error::InvalidValue("spec vector c is empty".into()));
        }
        Ok(file)
    }
}
