//! Sound verification restricted to a bounded box.
//!
//! Two methods: interval bound propagation (linear in network size, answers
//! `Certified` or `Unknown`) and exact region-wise verification on the box.
//! Neither says anything about inputs outside the box.

use std::time::Instant;

use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::exact::{self, LinearSpec, Verdict, VerdictStats};
use crate::network::{Layer, Network};
use crate::rational::{self, Rational};
use crate::region::{Domain, RegionOptions};
use crate::{check_dim, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Interval {
    #[serde(with = "rational::serde_rational")]
    pub lo: Rational,
    #[serde(with = "rational::serde_rational")]
    pub hi: Rational,
}

impl Interval {
    pub fn new(lo: Rational, hi: Rational) -> Self {
        debug_assert!(lo <= hi);
        Self { lo, hi }
    }

    pub fn contains(&self, v: &Rational) -> bool {
        self.lo <= *v && *v <= self.hi
    }

    pub fn encloses(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IntervalVector(pub Vec<Interval>);

impl IntervalVector {
    pub fn contains(&self, v: &[Rational]) -> bool {
        self.0.len() == v.len() && self.0.iter().zip(v).all(|(i, x)| i.contains(x))
    }

    /// Coordinate-wise containment of `other` in `self`.
    pub fn encloses(&self, other: &IntervalVector) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a.encloses(b))
    }

    /// Upper bound of `c·y` over the box.
    pub fn upper_bound(&self, c: &[Rational]) -> Rational {
        self.0.iter().zip(c).fold(rational::zero(), |acc, (iv, ci)| {
            acc + if ci.is_negative() { ci * &iv.lo } else { ci * &iv.hi }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundedMethod {
    Ibp,
    ExactOnBox,
}

fn box_bounds(dom: &Domain) -> Result<(&[Rational], &[Rational])> {
    match dom {
        Domain::Box { lower, upper } => Ok((lower, upper)),
        Domain::FullSpace { .. } => Err(Error::InvalidDomain(
            "bounded verification needs a box domain".into(),
        )),
    }
}

fn propagate(layer: &Layer, input: &[Interval], ops: &mut u64) -> Vec<Interval> {
    layer
        .weights
        .iter()
        .zip(&layer.bias)
        .map(|(row, b)| {
            let mut lo = b.clone();
            let mut hi = b.clone();
            for (w, iv) in row.iter().zip(input) {
                *ops += 1;
                if w.is_negative() {
                    lo += w * &iv.hi;
                    hi += w * &iv.lo;
                } else if w.is_positive() {
                    lo += w * &iv.lo;
                    hi += w * &iv.hi;
                }
            }
            Interval { lo, hi }
        })
        .collect()
}

/// Output enclosure over the box by layer-wise interval arithmetic.
pub fn ibp_bounds(net: &Network, dom: &Domain) -> Result<IntervalVector> {
    ibp_bounds_counted(net, dom).map(|(iv, _)| iv)
}

/// Like [`ibp_bounds`], also returning the number of weight-interval products.
pub fn ibp_bounds_counted(net: &Network, dom: &Domain) -> Result<(IntervalVector, u64)> {
    dom.validate()?;
    let (lower, upper) = box_bounds(dom)?;
    check_dim("box dimension", net.input_dim(), lower.len())?;
    let mut ops = 0;
    let mut current: Vec<Interval> = lower
        .iter()
        .zip(upper)
        .map(|(l, u)| Interval::new(l.clone(), u.clone()))
        .collect();
    for layer in net.hidden_layers() {
        current = propagate(layer, &current, &mut ops)
            .into_iter()
            .map(|iv| Interval {
                lo: rational::relu(&iv.lo),
                hi: rational::relu(&iv.hi),
            })
            .collect();
    }
    let out = propagate(net.output_layer(), &current, &mut ops);
    Ok((IntervalVector(out), ops))
}

pub fn verify_bounded(
    net: &Network,
    spec: &LinearSpec,
    dom: &Domain,
    method: BoundedMethod,
) -> Result<Verdict> {
    verify_bounded_with(net, spec, dom, method, RegionOptions::default())
}

pub fn verify_bounded_with(
    net: &Network,
    spec: &LinearSpec,
    dom: &Domain,
    method: BoundedMethod,
    opts: RegionOptions,
) -> Result<Verdict> {
    box_bounds(dom)?;
    spec.check_against(net)?;
    match method {
        BoundedMethod::Ibp => {
            let start = Instant::now();
            let bounds = ibp_bounds(net, dom)?;
            let stats = VerdictStats {
                elapsed: start.elapsed(),
                ..VerdictStats::default()
            };
            // An interval excess is not a counterexample, so never Violated.
            if bounds.upper_bound(&spec.c) <= spec.b {
                Ok(Verdict::certified(stats))
            } else {
                Ok(Verdict::unknown(stats))
            }
        }
        BoundedMethod::ExactOnBox => exact::verify_full_with(net, spec, dom, opts),
    }
}

/// A violating input outside the box for a spec that holds on the box, if
/// one exists anywhere in the input space.
pub fn generality_gap_witness(
    net: &Network,
    spec: &LinearSpec,
    dom: &Domain,
) -> Result<Option<Vec<Rational>>> {
    generality_gap_witness_with(net, spec, dom, RegionOptions::default())
}

pub fn generality_gap_witness_with(
    net: &Network,
    spec: &LinearSpec,
    dom: &Domain,
    opts: RegionOptions,
) -> Result<Option<Vec<Rational>>> {
    if !verify_bounded_with(net, spec, dom, BoundedMethod::ExactOnBox, opts)?.is_certified() {
        return Err(Error::Precondition(
            "spec is not certified on the box".into(),
        ));
    }
    let verdict = exact::verify_full_with(net, spec, &Domain::full(net.input_dim()), opts)?;
    let witness = verdict.witness().map(<[Rational]>::to_vec);
    debug_assert!(witness.as_ref().is_none_or(|w| !dom.contains(w)));
    Ok(witness)
}
