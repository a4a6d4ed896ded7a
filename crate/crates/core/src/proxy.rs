//! Finite-support proxy scoring.
//!
//! The proxy score is the exact fraction of support points at which the spec
//! holds. It is defined for every network and costs one forward pass per
//! point, but it only ever sees `{f(x) : x ∈ S}`.

use num_bigint::BigInt;
use num_traits::Signed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exact::{self, BinaryVerdict, LinearSpec};
use crate::network::Network;
use crate::rational::{self, Rational};
use crate::region::{Domain, RegionOptions};
use crate::{check_dim, Error, Result};

/// Resolution of sampled support coordinates: `2^SAMPLE_BITS` steps per box side.
pub const SAMPLE_BITS: u32 = 16;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalSupport {
    #[serde(with = "rational::serde_rational_mat")]
    pub points: Vec<Vec<Rational>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl EvalSupport {
    pub fn new(points: Vec<Vec<Rational>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySupport);
        }
        Ok(Self { points, seed: None })
    }

    /// `count` points drawn deterministically from `seed` inside a box.
    pub fn sample_box(dom: &Domain, count: usize, seed: u64) -> Result<Self> {
        let Domain::Box { lower, upper } = dom else {
            return Err(Error::InvalidDomain("support sampling needs a box".into()));
        };
        if count == 0 {
            return Err(Error::EmptySupport);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let steps = 1i64 << SAMPLE_BITS;
        let points = (0..count)
            .map(|_| {
                lower
                    .iter()
                    .zip(upper)
                    .map(|(l, u)| {
                        let k = rng.gen_range(0..=steps);
                        l + (u - l) * Rational::new(BigInt::from(k), BigInt::from(steps))
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            points,
            seed: Some(seed),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn check(&self, net: &Network) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::EmptySupport);
        }
        for p in &self.points {
            check_dim("support point", net.input_dim(), p.len())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProxyResult {
    #[serde(with = "rational::serde_rational")]
    pub score: Rational,
    #[serde(with = "rational::serde_rational")]
    pub tau: Rational,
    pub verdict: BinaryVerdict,
}

/// Fraction of support points with `c·f(x) <= b`.
pub fn proxy_score(net: &Network, spec: &LinearSpec, support: &EvalSupport) -> Result<Rational> {
    support.check(net)?;
    spec.check_against(net)?;
    let mut passed = 0i64;
    for x in &support.points {
        if spec.holds(&net.forward(x)?) {
            passed += 1;
        }
    }
    Ok(rational::rat(passed, support.len() as i64))
}

fn check_unit(name: &str, v: &Rational) -> Result<()> {
    if v.is_negative() || *v > rational::one() {
        return Err(Error::InvalidValue(format!("{name} = {v} is outside [0, 1]")));
    }
    Ok(())
}

/// Threshold rule; ties accept.
pub fn proxy_verdict(score: &Rational, tau: &Rational) -> Result<BinaryVerdict> {
    check_unit("score", score)?;
    check_unit("tau", tau)?;
    Ok(if score >= tau {
        BinaryVerdict::Aligned
    } else {
        BinaryVerdict::Unaligned
    })
}

pub fn verify_proxy(
    net: &Network,
    spec: &LinearSpec,
    support: &EvalSupport,
    tau: &Rational,
) -> Result<ProxyResult> {
    let score = proxy_score(net, spec, support)?;
    let verdict = proxy_verdict(&score, tau)?;
    Ok(ProxyResult {
        score,
        tau: tau.clone(),
        verdict,
    })
}

/// Indicator objective: 1 when the exact verifier certifies the spec on `dom`.
pub fn exact_indicator(net: &Network, spec: &LinearSpec, dom: &Domain, opts: RegionOptions) -> Result<Rational> {
    let v = exact::verify_full_with(net, spec, dom, opts)?;
    Ok(if v.is_certified() { rational::one() } else { rational::zero() })
}

/// `|A* - Â|` with `A*` the exact indicator and `Â` the proxy score.
pub fn proxy_gap(net: &Network, spec: &LinearSpec, support: &EvalSupport, dom: &Domain) -> Result<Rational> {
    proxy_gap_with(net, spec, support, dom, RegionOptions::default())
}

pub fn proxy_gap_with(
    net: &Network,
    spec: &LinearSpec,
    support: &EvalSupport,
    dom: &Domain,
    opts: RegionOptions,
) -> Result<Rational> {
    let score = proxy_score(net, spec, support)?;
    let exact = exact_indicator(net, spec, dom, opts)?;
    let gap = exact - score;
    Ok(if gap.is_negative() { -gap } else { gap })
}

/// Support file: `{"points": [[...], ...], "tau": "p/q"}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportFile {
    #[serde(with = "rational::serde_rational_mat")]
    pub points: Vec<Vec<Rational>>,
    #[serde(default, with = "rational::serde_rational_opt", skip_serializing_if = "Option::is_none")]
    pub tau: Option<Rational>,
}

impl SupportFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn support(&self) -> Result<EvalSupport> {
        EvalSupport::new(self.points.clone())
    }
}
