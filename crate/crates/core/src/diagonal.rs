//! Diagonal patching of 1-D networks.
//!
//! On one input dimension every continuous piecewise-linear function is
//! exactly a one-hidden-layer ReLU network, so a network can be patched to
//! copy `theta1` on small neighborhoods of a finite support and `theta2`
//! everywhere else, then compiled back with no approximation. A proxy that
//! only evaluates the support cannot distinguish the patched network from
//! `theta1`.

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::exact::{self, LinearSpec, Verdict};
use crate::network::{Layer, Network};
use crate::proxy::{self, EvalSupport};
use crate::rational::{self, Rational};
use crate::region::{self, Domain, RegionOptions};
use crate::{check_dim, Error, Result};

/// Continuous piecewise-linear function of one variable.
///
/// Linear between consecutive breakpoints, and extended linearly with
/// `left_slope` / `right_slope` beyond the first / last breakpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PwlFunction {
    #[serde(with = "rational::serde_rational_vec")]
    breakpoints: Vec<Rational>,
    #[serde(with = "rational::serde_rational_vec")]
    values: Vec<Rational>,
    #[serde(with = "rational::serde_rational")]
    left_slope: Rational,
    #[serde(with = "rational::serde_rational")]
    right_slope: Rational,
}

impl PwlFunction {
    pub fn new(
        breakpoints: Vec<Rational>,
        values: Vec<Rational>,
        left_slope: Rational,
        right_slope: Rational,
    ) -> Result<Self> {
        check_dim("pwl values", breakpoints.len(), values.len())?;
        if breakpoints.is_empty() {
            return Err(Error::InvalidValue("pwl needs at least one breakpoint".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidValue("pwl breakpoints must be strictly increasing".into()));
        }
        Ok(Self {
            breakpoints,
            values,
            left_slope,
            right_slope,
        })
    }

    /// `slope·x + intercept`, anchored at a single breakpoint at 0.
    pub fn affine(slope: Rational, intercept: Rational) -> Self {
        Self {
            breakpoints: vec![rational::zero()],
            values: vec![intercept],
            left_slope: slope.clone(),
            right_slope: slope,
        }
    }

    pub fn constant(v: Rational) -> Self {
        Self::affine(rational::zero(), v)
    }

    pub fn breakpoints(&self) -> &[Rational] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    pub fn left_slope(&self) -> &Rational {
        &self.left_slope
    }

    pub fn right_slope(&self) -> &Rational {
        &self.right_slope
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        let bp = &self.breakpoints;
        let last = bp.len() - 1;
        if *x <= bp[0] {
            return &self.values[0] + &self.left_slope * (x - &bp[0]);
        }
        if *x >= bp[last] {
            return &self.values[last] + &self.right_slope * (x - &bp[last]);
        }
        // First breakpoint strictly greater than x; 1 <= k <= last.
        let k = bp.partition_point(|b| b <= x);
        let t = (x - &bp[k - 1]) / (&bp[k] - &bp[k - 1]);
        &self.values[k - 1] + t * (&self.values[k] - &self.values[k - 1])
    }

    /// Slope on the piece to the right of breakpoint `k`.
    fn slope_after(&self, k: usize) -> Rational {
        if k + 1 == self.breakpoints.len() {
            self.right_slope.clone()
        } else {
            (&self.values[k + 1] - &self.values[k]) / (&self.breakpoints[k + 1] - &self.breakpoints[k])
        }
    }

    fn slope_before(&self, k: usize) -> Rational {
        if k == 0 {
            self.left_slope.clone()
        } else {
            self.slope_after(k - 1)
        }
    }

    /// Drop breakpoints with no slope change, keeping at least one.
    fn simplified(self) -> Self {
        let keep: Vec<usize> = (0..self.breakpoints.len())
            .filter(|&k| self.slope_before(k) != self.slope_after(k))
            .collect();
        let keep = if keep.is_empty() { vec![0] } else { keep };
        Self {
            breakpoints: keep.iter().map(|&k| self.breakpoints[k].clone()).collect(),
            values: keep.iter().map(|&k| self.values[k].clone()).collect(),
            left_slope: self.left_slope,
            right_slope: self.right_slope,
        }
    }
}

fn check_scalar_net(net: &Network) -> Result<()> {
    check_dim("diagonal construction input dim", 1, net.input_dim())?;
    check_dim("diagonal construction output dim", 1, net.output_dim())
}

/// Exact piecewise-linear form of a 1-D network on `dom`.
pub fn pwl_from_network_1d(net: &Network, dom: &Domain, opts: RegionOptions) -> Result<PwlFunction> {
    check_scalar_net(net)?;
    let regions = region::enumerate_regions(net, dom, opts)?;
    let mut points: Vec<Rational> = Vec::new();
    // (lower end, slope) of each region; None is -inf.
    let mut leftmost: Option<(Option<Rational>, Rational)> = None;
    let mut rightmost: Option<(Option<Rational>, Rational)> = None;
    for r in &regions {
        let mut lo: Option<Rational> = None;
        let mut hi: Option<Rational> = None;
        for (a, b) in r.constraints.rows() {
            let a = &a[0];
            if a.is_positive() {
                let v = b / a;
                hi = Some(hi.map_or(v.clone(), |h: Rational| h.min(v)));
            } else if a.is_negative() {
                let v = b / a;
                lo = Some(lo.map_or(v.clone(), |l: Rational| l.max(v)));
            }
        }
        points.extend(lo.iter().cloned());
        points.extend(hi.iter().cloned());
        let slope = r.affine.matrix[0][0].clone();
        let further_left = match (&leftmost, &lo) {
            (None, _) => true,
            (Some((Some(_), _)), None) => true,
            (Some((Some(cur), _)), Some(l)) => l < cur,
            (Some((None, _)), _) => false,
        };
        if further_left {
            leftmost = Some((lo.clone(), slope.clone()));
        }
        let further_right = match (&rightmost, &hi) {
            (None, _) => true,
            (Some((Some(_), _)), None) => true,
            (Some((Some(cur), _)), Some(h)) => h > cur,
            (Some((None, _)), _) => false,
        };
        if further_right {
            rightmost = Some((hi, slope));
        }
    }
    let (Some((_, left_slope)), Some((_, right_slope))) = (leftmost, rightmost) else {
        return Err(Error::InvalidDomain("domain contains no region".into()));
    };
    points.sort();
    points.dedup();
    if points.is_empty() {
        points.push(rational::zero());
    }
    let values = points
        .iter()
        .map(|x| net.forward(std::slice::from_ref(x)).map(|y| y[0].clone()))
        .collect::<Result<Vec<_>>>()?;
    Ok(PwlFunction::new(points, values, left_slope, right_slope)?.simplified())
}

/// Where and how wide the patch is.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchPlan {
    #[serde(with = "rational::serde_rational_vec")]
    pub support: Vec<Rational>,
    /// Half-width of each patched neighborhood.
    #[serde(with = "rational::serde_rational")]
    pub epsilon: Rational,
    /// Half-width of the exact-copy plateau inside each neighborhood.
    #[serde(with = "rational::serde_rational")]
    pub plateau: Rational,
}

impl PatchPlan {
    /// Plan with `plateau = epsilon / 2`.
    pub fn new(support: Vec<Rational>, epsilon: Rational) -> Result<Self> {
        let plateau = &epsilon / rational::int(2);
        Self::with_plateau(support, epsilon, plateau)
    }

    pub fn with_plateau(mut support: Vec<Rational>, epsilon: Rational, plateau: Rational) -> Result<Self> {
        support.sort();
        let plan = Self {
            support,
            epsilon,
            plateau,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.epsilon.is_positive() {
            return Err(Error::InvalidPlan("epsilon must be positive".into()));
        }
        if !self.plateau.is_positive() || self.plateau >= self.epsilon {
            return Err(Error::InvalidPlan("plateau must lie strictly between 0 and epsilon".into()));
        }
        let mut sorted = self.support.clone();
        sorted.sort();
        let gap = &self.epsilon * rational::int(2);
        if let Some(w) = sorted.windows(2).find(|w| &w[1] - &w[0] <= gap) {
            return Err(Error::InvalidPlan(format!(
                "support points {} and {} are not separated by more than 2*epsilon",
                w[0], w[1]
            )));
        }
        Ok(())
    }

    /// True when `x` lies in some closed neighborhood `[s - epsilon, s + epsilon]`.
    pub fn in_neighborhood(&self, x: &Rational) -> bool {
        self.support.iter().any(|s| (x - s).abs() <= self.epsilon)
    }

    pub fn eval_support(&self) -> Result<EvalSupport> {
        EvalSupport::new(self.support.iter().map(|s| vec![s.clone()]).collect())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Wire {
            #[serde(with = "rational::serde_rational_vec")]
            support: Vec<Rational>,
            #[serde(with = "rational::serde_rational")]
            epsilon: Rational,
            #[serde(default, with = "rational::serde_rational_opt")]
            plateau: Option<Rational>,
        }
        let w: Wire = serde_json::from_str(text)?;
        match w.plateau {
            Some(p) => Self::with_plateau(w.support, w.epsilon, p),
            None => Self::new(w.support, w.epsilon),
        }
    }
}

/// Copy `f1` on every plateau `[s - plateau, s + plateau]`, `f2` outside every
/// neighborhood `[s - epsilon, s + epsilon]`. On each transition band the
/// offset `g - f2` is interpolated linearly, so `g` stays continuous and
/// patching a function with itself changes nothing.
pub fn patch(f1: &PwlFunction, f2: &PwlFunction, plan: &PatchPlan) -> Result<PwlFunction> {
    plan.validate()?;
    let eps = &plan.epsilon;
    let p = &plan.plateau;
    let band = eps - p;
    let mut nodes: Vec<(Rational, Rational)> = Vec::new();
    for x in f2.breakpoints() {
        if !plan.in_neighborhood(x) {
            nodes.push((x.clone(), f2.eval(x)));
        }
    }
    for s in &plan.support {
        let (l_out, l_in, r_in, r_out) = (s - eps, s - p, s + p, s + eps);
        let left_offset = f1.eval(&l_in) - f2.eval(&l_in);
        let right_offset = f1.eval(&r_in) - f2.eval(&r_in);
        for x in f2.breakpoints() {
            if *x > l_out && *x < l_in {
                let mu = (x - &l_out) / &band;
                nodes.push((x.clone(), f2.eval(x) + &left_offset * mu));
            } else if *x > r_in && *x < r_out {
                let mu = (&r_out - x) / &band;
                nodes.push((x.clone(), f2.eval(x) + &right_offset * mu));
            }
        }
        for x in f1.breakpoints() {
            if *x > l_in && *x < r_in {
                nodes.push((x.clone(), f1.eval(x)));
            }
        }
        let v = f2.eval(&l_out);
        nodes.push((l_out, v));
        nodes.push((l_in.clone(), f1.eval(&l_in)));
        nodes.push((r_in.clone(), f1.eval(&r_in)));
        nodes.push((r_out.clone(), f2.eval(&r_out)));
    }
    nodes.sort_by(|a, b| a.0.cmp(&b.0));
    nodes.dedup_by(|a, b| a.0 == b.0);
    let (breakpoints, values) = nodes.into_iter().unzip();
    Ok(PwlFunction::new(breakpoints, values, f2.left_slope.clone(), f2.right_slope.clone())?.simplified())
}

/// One-hidden-layer ReLU network computing `f` exactly:
/// `f(x) = m·x + q + Σ_k Δ_k·ReLU(x - b_k)`, with `m·x` written as
/// `m·ReLU(x) - m·ReLU(-x)`.
pub fn compile_pwl_to_network(f: &PwlFunction) -> Network {
    let m = f.left_slope.clone();
    let q = &f.values[0] - &m * &f.breakpoints[0];
    let mut weights: Vec<Vec<Rational>> = Vec::new();
    let mut bias = Vec::new();
    let mut out = Vec::new();
    if !m.is_zero() {
        weights.push(vec![rational::one()]);
        bias.push(rational::zero());
        out.push(m.clone());
        weights.push(vec![-rational::one()]);
        bias.push(rational::zero());
        out.push(-m);
    }
    for (k, b) in f.breakpoints.iter().enumerate() {
        let delta = f.slope_after(k) - f.slope_before(k);
        if !delta.is_zero() {
            weights.push(vec![rational::one()]);
            bias.push(-b.clone());
            out.push(delta);
        }
    }
    if weights.is_empty() {
        weights.push(vec![rational::zero()]);
        bias.push(rational::zero());
        out.push(rational::zero());
    }
    Network::new(1, vec![Layer::new(weights, bias), Layer::new(vec![out], vec![q])])
        .expect("compiled layers are consistent")
}

/// A point outside every plan neighborhood where `net` violates `spec`, found
/// by checking the pieces of `f` (the network's PWL form) on each gap between
/// neighborhoods. Margins are re-evaluated on `net` itself.
pub fn violation_outside(net: &Network, f: &PwlFunction, spec: &LinearSpec, plan: &PatchPlan) -> Result<Option<Vec<Rational>>> {
    let mut candidates: Vec<Rational> = f
        .breakpoints()
        .iter()
        .filter(|x| !plan.in_neighborhood(x))
        .cloned()
        .collect();
    // Near both ends of every gap between neighborhoods, and far out on the tails.
    let mut hoods: Vec<(Rational, Rational)> =
        plan.support.iter().map(|s| (s - &plan.epsilon, s + &plan.epsilon)).collect();
    hoods.sort();
    for w in hoods.windows(2) {
        let (a, b) = (&w[0].1, &w[1].0);
        for k in 1..=48u32 {
            let d = (b - a) / rational::pow2(k);
            candidates.push(a + &d);
            candidates.push(b - &d);
        }
    }
    if let (Some(first), Some(last)) = (hoods.first(), hoods.last()) {
        for k in 0..=48u32 {
            let d = &plan.epsilon / rational::pow2(k);
            candidates.push(&first.0 - &d);
            candidates.push(&last.1 + &d);
        }
        for k in 0..64u32 {
            let d = rational::pow2(k);
            candidates.push(&first.0 - &d);
            candidates.push(&last.1 + &d);
        }
    }
    for x in candidates {
        if plan.in_neighborhood(&x) {
            continue;
        }
        let point = vec![x];
        if spec.margin(&net.forward(&point)?).is_positive() {
            return Ok(Some(point));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AssertionResult {
    pub name: &'static str,
    pub passed: bool,
    pub evidence: String,
}

/// Machine-checked record of one diagonal construction.
#[derive(Debug, Clone, Serialize)]
pub struct DemonstrationReport {
    pub theta1: Network,
    pub theta2: Network,
    pub patched: Network,
    pub plan: PatchPlan,
    pub spec: LinearSpec,
    #[serde(with = "rational::serde_rational")]
    pub tau: Rational,
    #[serde(with = "rational::serde_rational")]
    pub score_theta1: Rational,
    #[serde(with = "rational::serde_rational")]
    pub score_patched: Rational,
    pub exact_patched: Verdict,
    #[serde(with = "rational::serde_rational_vec")]
    pub off_support_witness: Vec<Rational>,
    #[serde(with = "rational::serde_rational")]
    pub proxy_gap: Rational,
    pub assertions: Vec<AssertionResult>,
}

impl DemonstrationReport {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }
}

/// Build `theta' = compile(patch(pwl(theta1), pwl(theta2), plan))` and check
/// that the proxy cannot tell it from `theta1` while the exact verifier finds
/// a violation away from the support.
pub fn build_unsound_pair(
    theta1: &Network,
    theta2: &Network,
    plan: &PatchPlan,
    spec: &LinearSpec,
    tau: &Rational,
    opts: RegionOptions,
) -> Result<DemonstrationReport> {
    check_scalar_net(theta1)?;
    check_scalar_net(theta2)?;
    spec.check_against(theta1)?;
    plan.validate()?;
    let support = plan.eval_support()?;
    let full = Domain::full(1);

    if !exact::verify_full_with(theta1, spec, &full, opts)?.is_certified() {
        return Err(Error::Precondition("theta1 is not certified on the full input space".into()));
    }
    let f1 = pwl_from_network_1d(theta1, &full, opts)?;
    let f2 = pwl_from_network_1d(theta2, &full, opts)?;
    if violation_outside(theta2, &f2, spec, plan)?.is_none() {
        return Err(Error::Precondition(
            "theta2 satisfies the spec everywhere outside the plan neighborhoods".into(),
        ));
    }

    let patched = compile_pwl_to_network(&patch(&f1, &f2, plan)?);
    let mut assertions = Vec::new();

    let mismatches: Vec<String> = plan
        .support
        .iter()
        .filter_map(|s| {
            let x = vec![s.clone()];
            let (a, b) = (patched.forward(&x).ok()?, theta1.forward(&x).ok()?);
            (a != b).then(|| format!("x={s}: {} vs {}", a[0], b[0]))
        })
        .collect();
    let score_theta1 = proxy::proxy_score(theta1, spec, &support)?;
    let score_patched = proxy::proxy_score(&patched, spec, &support)?;
    assertions.push(AssertionResult {
        name: "on_support_agreement",
        passed: mismatches.is_empty() && score_theta1 == score_patched,
        evidence: format!(
            "{} support points, {} mismatches, scores {score_theta1} / {score_patched}",
            plan.support.len(),
            mismatches.len()
        ),
    });

    let v1 = proxy::proxy_verdict(&score_theta1, tau)?;
    let v2 = proxy::proxy_verdict(&score_patched, tau)?;
    assertions.push(AssertionResult {
        name: "proxy_verdict_parity",
        passed: v1 == v2 && v1 == exact::BinaryVerdict::Aligned,
        evidence: format!("theta1 {v1:?}, patched {v2:?} at tau {tau}"),
    });

    let exact_patched = exact::verify_full_with(&patched, spec, &full, opts)?;
    let f_patched = pwl_from_network_1d(&patched, &full, opts)?;
    let off = violation_outside(&patched, &f_patched, spec, plan)?;
    assertions.push(AssertionResult {
        name: "exact_violation_off_support",
        passed: exact_patched.is_violated() && off.is_some(),
        evidence: match &off {
            Some(w) => format!(
                "exact verdict {}, off-support witness x={} margin {}",
                exact_patched.tag(),
                w[0],
                spec.margin(&patched.forward(w)?)
            ),
            None => format!("exact verdict {}, no off-support witness", exact_patched.tag()),
        },
    });

    let gap = proxy::proxy_gap_with(&patched, spec, &support, &full, opts)?;
    assertions.push(AssertionResult {
        name: "proxy_gap_is_one",
        passed: gap == rational::one(),
        evidence: format!("gap {gap}"),
    });

    Ok(DemonstrationReport {
        theta1: theta1.clone(),
        theta2: theta2.clone(),
        patched,
        plan: plan.clone(),
        spec: spec.clone(),
        tau: tau.clone(),
        score_theta1,
        score_patched,
        exact_patched,
        off_support_witness: off.unwrap_or_default(),
        proxy_gap: gap,
        assertions,
    })
}
