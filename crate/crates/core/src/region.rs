//! Linear-region enumeration.
//!
//! A region is the closure of the set of domain points sharing one activation
//! pattern, kept only when that set has nonempty interior relative to the
//! domain. Measure-zero patterns (for `|x|`, the all-off pattern at `x = 0`)
//! are excluded.
//!
//! [`enumerate_regions`] refines cells breadth-first, one hidden neuron at a
//! time in layer-major order, and keeps each half whose interior is LP
//! feasible. [`enumerate_regions_exhaustive`] tests all `2^N` patterns and is
//! only used as an oracle.

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::lp::{self, ConstraintSystem, LpOutcome};
use crate::network::{ActivationPattern, AffineMap, Network, NeuronForm};
use crate::rational::{self, Rational};
use crate::{check_dim, Error, Result};

pub const DEFAULT_REGION_CAP: usize = 1_000_000;
pub const DEFAULT_ORACLE_CAP: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Domain {
    #[serde(rename = "full")]
    FullSpace { dimension: usize },
    Box {
        #[serde(with = "rational::serde_rational_vec")]
        lower: Vec<Rational>,
        #[serde(with = "rational::serde_rational_vec")]
        upper: Vec<Rational>,
    },
}

impl Domain {
    pub fn full(dimension: usize) -> Self {
        Domain::FullSpace { dimension }
    }

    pub fn new_box(lower: Vec<Rational>, upper: Vec<Rational>) -> Result<Self> {
        check_dim("box bounds", lower.len(), upper.len())?;
        if lower.is_empty() {
            return Err(Error::InvalidDomain("box has dimension 0".into()));
        }
        if let Some(i) = (0..lower.len()).find(|&i| lower[i] > upper[i]) {
            return Err(Error::InvalidDomain(format!(
                "lower[{i}] = {} exceeds upper[{i}] = {}",
                lower[i], upper[i]
            )));
        }
        Ok(Domain::Box { lower, upper })
    }

    /// `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: Rational, hi: Rational) -> Result<Self> {
        Self::new_box(vec![lo; dim], vec![hi; dim])
    }

    pub fn dimension(&self) -> usize {
        match self {
            Domain::FullSpace { dimension } => *dimension,
            Domain::Box { lower, .. } => lower.len(),
        }
    }

    pub fn is_box(&self) -> bool {
        matches!(self, Domain::Box { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Domain::FullSpace { dimension } if *dimension == 0 => {
                Err(Error::InvalidDomain("dimension 0".into()))
            }
            Domain::FullSpace { .. } => Ok(()),
            Domain::Box { lower, upper } => Self::new_box(lower.clone(), upper.clone()).map(|_| ()),
        }
    }

    pub fn contains(&self, x: &[Rational]) -> bool {
        match self {
            Domain::FullSpace { dimension } => x.len() == *dimension,
            Domain::Box { lower, upper } => {
                x.len() == lower.len()
                    && x.iter().zip(lower.iter().zip(upper)).all(|(v, (l, u))| l <= v && v <= u)
            }
        }
    }

    pub fn constraints(&self) -> ConstraintSystem {
        let n = self.dimension();
        let mut cs = ConstraintSystem::new(n);
        if let Domain::Box { lower, upper } = self {
            for i in 0..n {
                let mut e = vec![rational::zero(); n];
                e[i] = rational::one();
                cs.push(e.clone(), upper[i].clone()).expect("dimension");
                e[i] = -rational::one();
                cs.push(e, -lower[i].clone()).expect("dimension");
            }
        }
        cs
    }
}

/// One feasible linear region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    pub pattern: ActivationPattern,
    /// Closed pattern inequalities intersected with the domain.
    pub constraints: ConstraintSystem,
    pub affine: AffineMap,
    /// A point of the region at which every non-constant pattern inequality is strict.
    pub interior_point: Vec<Rational>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionOptions {
    pub cap: usize,
    pub oracle_cap: usize,
}

impl Default for RegionOptions {
    fn default() -> Self {
        Self {
            cap: DEFAULT_REGION_CAP,
            oracle_cap: DEFAULT_ORACLE_CAP,
        }
    }
}

impl RegionOptions {
    pub fn with_cap(cap: usize) -> Self {
        Self {
            cap,
            ..Self::default()
        }
    }
}

/// Work counters for enumeration and verification.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkStats {
    pub lp_calls: u64,
    pub regions_examined: u64,
}

/// Rows of a cell under construction. Closure rows are non-strict; `strict`
/// marks rows that must hold with positive slack somewhere in the cell.
#[derive(Clone)]
struct Cell {
    bits: Vec<bool>,
    closure: ConstraintSystem,
    strict: Vec<bool>,
    input_map: AffineMap,
    interior_point: Vec<Rational>,
}

/// Side of a neuron's hyperplane as a closure row plus whether it is constant.
/// Returns `None` when a constant form contradicts the requested side.
fn side_row(form: &NeuronForm, on: bool) -> Option<Option<(Vec<Rational>, Rational)>> {
    if form.is_constant() {
        let active = form.constant.is_positive();
        return if active == on { Some(None) } else { None };
    }
    Some(Some(if on {
        // row·x + c >= 0
        (form.row.iter().map(|v| -v).collect(), form.constant.clone())
    } else {
        // row·x + c <= 0
        (form.row.clone(), -form.constant.clone())
    }))
}

/// Maximize a common slack `t <= 1` on the strict rows; the interior is
/// nonempty iff the optimum is positive. Returns an interior point.
fn interior_point(closure: &ConstraintSystem, strict: &[bool], stats: &mut WorkStats) -> Option<Vec<Rational>> {
    let n = closure.dimension();
    if n == 1 {
        stats.lp_calls += 1;
        return interior_point_on_line(closure, strict);
    }
    let mut lifted = ConstraintSystem::new(n + 1);
    for ((a, b), &s) in closure.rows().iter().zip(strict) {
        let mut row = a.clone();
        row.push(if s { rational::one() } else { rational::zero() });
        lifted.push(row, b.clone()).expect("dimension");
    }
    let mut cap = vec![rational::zero(); n + 1];
    cap[n] = rational::one();
    lifted.push(cap.clone(), rational::one()).expect("dimension");
    stats.lp_calls += 1;
    match lp::solve_max(&cap, &lifted).expect("dimension") {
        LpOutcome::Optimal { value, mut point } if value.is_positive() => {
            point.truncate(n);
            Some(point)
        }
        LpOutcome::Optimal { .. } | LpOutcome::Infeasible => None,
        LpOutcome::Unbounded { .. } => unreachable!("slack is capped at 1"),
    }
}

/// One input: strict rows must be strict at the returned point, so a
/// degenerate interval survives only when every row pinning it is non-strict.
fn interior_point_on_line(closure: &ConstraintSystem, strict: &[bool]) -> Option<Vec<Rational>> {
    let (lo, hi) = lp::line_interval(closure)?;
    let blocked = closure.rows().iter().zip(strict).any(|((a, b), &s)| s && a[0].is_zero() && !b.is_positive());
    if blocked {
        return None;
    }
    let x = match (lo, hi) {
        (Some(l), Some(h)) if l == h => {
            let pinned = closure
                .rows()
                .iter()
                .zip(strict)
                .any(|((a, b), &s)| s && !a[0].is_zero() && (b / &a[0]) == l);
            if pinned {
                return None;
            }
            l
        }
        (Some(l), Some(h)) => (l + h) / rational::int(2),
        (Some(l), None) => l + rational::one(),
        (None, Some(h)) => h - rational::one(),
        (None, None) => rational::zero(),
    };
    Some(vec![x])
}

fn check_domain(net: &Network, dom: &Domain) -> Result<()> {
    dom.validate()?;
    check_dim("domain dimension", net.input_dim(), dom.dimension())
}

fn domain_cell(net: &Network, dom: &Domain, stats: &mut WorkStats) -> Option<Cell> {
    let closure = dom.constraints();
    let strict = vec![false; closure.len()];
    let point = if closure.is_empty() {
        vec![rational::zero(); net.input_dim()]
    } else {
        stats.lp_calls += 1;
        lp::feasible(&closure).1?
    };
    Some(Cell {
        bits: Vec::new(),
        closure,
        strict,
        input_map: AffineMap::identity(net.input_dim()),
        interior_point: point,
    })
}

fn finish(net: &Network, cell: Cell) -> Region {
    let pattern = ActivationPattern::new(cell.bits);
    let affine = net
        .affine_map_for_pattern(&pattern)
        .expect("pattern has one bit per neuron");
    Region {
        pattern,
        constraints: cell.closure,
        affine,
        interior_point: cell.interior_point,
    }
}

/// Breadth-first enumeration of all feasible regions of `net` over `dom`.
pub fn enumerate_regions(net: &Network, dom: &Domain, opts: RegionOptions) -> Result<Vec<Region>> {
    enumerate_regions_with_stats(net, dom, opts, &mut WorkStats::default())
}

pub fn enumerate_regions_with_stats(
    net: &Network,
    dom: &Domain,
    opts: RegionOptions,
    stats: &mut WorkStats,
) -> Result<Vec<Region>> {
    check_domain(net, dom)?;
    let Some(root) = domain_cell(net, dom, stats) else {
        return Ok(Vec::new());
    };
    let mut cells = vec![root];
    for layer in net.hidden_layers() {
        let mut staged: Vec<(Cell, AffineMap)> = cells
            .into_iter()
            .map(|c| {
                let pre = c.input_map.then(layer);
                (c, pre)
            })
            .collect();
        for j in 0..layer.out_dim() {
            let mut next = Vec::with_capacity(staged.len() * 2);
            for (cell, pre) in staged {
                let form = NeuronForm {
                    row: pre.matrix[j].clone(),
                    constant: pre.offset[j].clone(),
                };
                for on in [true, false] {
                    let Some(row) = side_row(&form, on) else {
                        continue;
                    };
                    let mut child = cell.clone();
                    child.bits.push(on);
                    if let Some((a, b)) = row {
                        child.closure.push(a, b).expect("dimension");
                        child.strict.push(true);
                        match interior_point(&child.closure, &child.strict, stats) {
                            Some(p) => child.interior_point = p,
                            None => continue,
                        }
                    }
                    next.push((child, pre.clone()));
                }
                if next.len() > opts.cap {
                    return Err(Error::RegionCap { cap: opts.cap });
                }
            }
            staged = next;
        }
        cells = staged
            .into_iter()
            .map(|(mut cell, mut pre)| {
                let offset = cell.bits.len() - layer.out_dim();
                for (k, (row, c)) in pre.matrix.iter_mut().zip(pre.offset.iter_mut()).enumerate() {
                    if !cell.bits[offset + k] {
                        row.iter_mut().for_each(|v| v.set_zero());
                        c.set_zero();
                    }
                }
                cell.input_map = pre;
                cell
            })
            .collect();
    }
    if cells.len() > opts.cap {
        return Err(Error::RegionCap { cap: opts.cap });
    }
    Ok(cells.into_iter().map(|c| finish(net, c)).collect())
}

pub fn count_regions(net: &Network, dom: &Domain, opts: RegionOptions) -> Result<usize> {
    enumerate_regions(net, dom, opts).map(|r| r.len())
}

/// Test every one of the `2^N` patterns independently. Oracle only.
pub fn enumerate_regions_exhaustive(
    net: &Network,
    dom: &Domain,
    opts: RegionOptions,
) -> Result<Vec<Region>> {
    check_domain(net, dom)?;
    let n = net.num_hidden();
    if n > opts.oracle_cap {
        return Err(Error::OracleCap {
            cap: opts.oracle_cap,
            neurons: n,
        });
    }
    let mut stats = WorkStats::default();
    let mut out = Vec::new();
    for index in 0..(1u64 << n) {
        let pattern = ActivationPattern::from_index(index, n);
        let forms = net.neuron_forms(&pattern)?;
        let mut closure = dom.constraints();
        let mut strict = vec![false; closure.len()];
        let mut consistent = true;
        for (form, &on) in forms.iter().zip(&pattern.bits) {
            match side_row(form, on) {
                None => {
                    consistent = false;
                    break;
                }
                Some(None) => {}
                Some(Some((a, b))) => {
                    closure.push(a, b)?;
                    strict.push(true);
                }
            }
        }
        if !consistent {
            continue;
        }
        let point = if strict.iter().any(|&s| s) {
            interior_point(&closure, &strict, &mut stats)
        } else if closure.is_empty() {
            Some(vec![rational::zero(); net.input_dim()])
        } else {
            lp::feasible(&closure).1
        };
        if let Some(interior_point) = point {
            let affine = net.affine_map_for_pattern(&pattern)?;
            out.push(Region {
                pattern,
                constraints: closure,
                affine,
                interior_point,
            });
        }
    }
    Ok(out)
}

/// `(n/L)^(L(d-1))`, the reference growth curve for region counts.
pub fn montufar_expression(n: u32, depth: u32, d: u32) -> Rational {
    assert!(n >= 1 && depth >= 1 && d >= 1, "arguments must be positive");
    let base = rational::rat(n as i64, depth as i64);
    num_traits::pow(base, (depth * (d - 1)) as usize)
}
