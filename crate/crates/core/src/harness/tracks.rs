//! The three tracks. Each holds two of soundness, generality and tractability
//! fixed and exhibits the failure of the third.

use std::hint::black_box;
use std::time::Instant;

use num_traits::Signed;
use rand::Rng;
use serde::Serialize;

use super::config::TrilemmaConfig;
use super::generators::{self, Shape};
use crate::bounded::{self, BoundedMethod};
use crate::diagonal::{self, DemonstrationReport, PatchPlan, PwlFunction};
use crate::exact::{self, BinaryVerdict, LinearSpec, Verdict};
use crate::lp::{self, LpOutcome};
use crate::network::{abs_net, relu_net, Network};
use crate::proxy::{self, EvalSupport};
use crate::rational::{self, dot, format_rational, Rational};
use crate::region::{self, Domain, RegionOptions};
use crate::symmetry::{self, SymmetryTransform};
use crate::{Error, Result};

/// IBP time may grow at most this factor faster than the neuron count.
pub const IBP_TIME_SLACK: f64 = 4.0;
const IBP_BATCH: usize = 200;
const IBP_BATCHES: usize = 7;

const PAIR_BOX_RADIUS: i64 = 2;
const PROBE_RADIUS: i64 = 4;
const PROXY_SUPPORT: usize = 16;
const MAX_ATTEMPTS: usize = 200;
const DIAGONAL_RADIUS: i64 = 8;

const STREAM_PAIRS: u64 = 1;
const STREAM_DIAGONAL: u64 = 2;

fn strings(v: &[Rational]) -> Vec<String> {
    v.iter().map(format_rational).collect()
}

/// One verdict as it appears in a binary report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerdictRecord {
    pub verifier: &'static str,
    pub tag: &'static str,
    pub binary: BinaryVerdict,
}

impl VerdictRecord {
    fn exact(verifier: &'static str, v: &Verdict) -> Self {
        Self {
            verifier,
            tag: v.tag(),
            binary: v.to_binary(),
        }
    }

    fn proxy(binary: BinaryVerdict) -> Self {
        Self {
            verifier: "proxy",
            tag: match binary {
                BinaryVerdict::Aligned => "aligned",
                BinaryVerdict::Unaligned => "unaligned",
            },
            binary,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingRow {
    pub depth: u32,
    pub neurons: usize,
    pub expected_regions: u64,
    pub regions: Option<usize>,
    pub lp_calls: Option<u64>,
    pub exact_ms: Option<f64>,
    pub exact_verdict: Option<VerdictRecord>,
    pub ibp_ops: u64,
    pub ibp_ns: f64,
    pub montufar: String,
    pub truncated: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingTable {
    pub rows: Vec<ScalingRow>,
    pub truncated_at: Option<u32>,
    pub regions_match: bool,
    pub regions_double: bool,
    pub lp_calls_double: bool,
    pub ibp_ops_linear: bool,
    pub ibp_time_ratio: f64,
    pub neuron_ratio: f64,
    pub ibp_time_linear: bool,
    pub passed: bool,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn time_ibp(net: &Network, dom: &Domain) -> Result<(u64, f64)> {
    let (_, ops) = bounded::ibp_bounds_counted(net, dom)?;
    let mut samples = Vec::with_capacity(IBP_BATCHES);
    for _ in 0..IBP_BATCHES {
        let start = Instant::now();
        for _ in 0..IBP_BATCH {
            black_box(bounded::ibp_bounds_counted(black_box(net), dom)?);
        }
        samples.push(start.elapsed().as_nanos() as f64 / IBP_BATCH as f64);
    }
    Ok((ops, median(samples)))
}

/// Region counts and verification work of the sawtooth family across depths.
pub fn experiment_sg_not_t(cfg: &TrilemmaConfig) -> Result<ScalingTable> {
    cfg.validate()?;
    let unit = Domain::cube(1, rational::zero(), rational::one())?;
    // The tent-map composition stays inside [0, 1].
    let spec = LinearSpec::upper(1, 0, rational::one());
    let opts = RegionOptions::with_cap(cfg.region_cap);
    let mut rows = Vec::new();
    let mut truncated_at = None;
    for &depth in &cfg.depth_sweep {
        let net = generators::sawtooth(depth as usize);
        let neurons = net.num_hidden();
        let (ibp_ops, ibp_ns) = time_ibp(&net, &unit)?;
        let mut row = ScalingRow {
            depth,
            neurons,
            expected_regions: 1 << depth,
            regions: None,
            lp_calls: None,
            exact_ms: None,
            exact_verdict: None,
            ibp_ops,
            ibp_ns,
            montufar: format_rational(&region::montufar_expression(neurons as u32, depth, 2)),
            truncated: false,
        };
        let counted = region::count_regions(&net, &unit, opts).and_then(|n| {
            let v = exact::verify_full_with(&net, &spec, &unit, opts)?;
            Ok((n, v))
        });
        match counted {
            Ok((n, v)) => {
                row.regions = Some(n);
                row.lp_calls = Some(v.stats.lp_calls);
                row.exact_ms = Some(v.stats.elapsed.as_secs_f64() * 1e3);
                row.exact_verdict = Some(VerdictRecord::exact("full", &v));
                rows.push(row);
            }
            Err(Error::RegionCap { .. }) => {
                row.truncated = true;
                rows.push(row);
                truncated_at = Some(depth);
                break;
            }
            Err(e) => return Err(e),
        }
    }

    let done: Vec<&ScalingRow> = rows.iter().filter(|r| !r.truncated).collect();
    let regions_match = done.iter().all(|r| r.regions == Some(r.expected_regions as usize));
    let grows = |get: fn(&ScalingRow) -> u64| {
        done.windows(2)
            .all(|w| get(w[1]) >= get(w[0]) << (w[1].depth - w[0].depth))
    };
    let regions_double = grows(|r| r.regions.unwrap_or(0) as u64);
    let lp_calls_double = grows(|r| r.lp_calls.unwrap_or(0));
    let ibp_ops_linear = rows
        .windows(2)
        .all(|w| w[1].ibp_ops * w[0].neurons as u64 == w[0].ibp_ops * w[1].neurons as u64);
    let (first, last) = (&rows[0], &rows[rows.len() - 1]);
    let ibp_time_ratio = last.ibp_ns / first.ibp_ns;
    let neuron_ratio = last.neurons as f64 / first.neurons as f64;
    let ibp_time_linear = ibp_time_ratio <= IBP_TIME_SLACK * neuron_ratio;
    Ok(ScalingTable {
        passed: regions_match && regions_double && lp_calls_double && ibp_ops_linear && ibp_time_linear,
        rows,
        truncated_at,
        regions_match,
        regions_double,
        lp_calls_double,
        ibp_ops_linear,
        ibp_time_ratio,
        neuron_ratio,
        ibp_time_linear,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct VerdictPair {
    pub net: VerdictRecord,
    pub partner: VerdictRecord,
    pub identical: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeneralityExhibit {
    pub domain: Domain,
    pub spec: LinearSpec,
    pub box_verdict: &'static str,
    pub witness: Option<Vec<String>>,
    pub witness_outside_box: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairExhibit {
    pub index: usize,
    pub net: Network,
    pub transforms: Vec<SymmetryTransform>,
    pub equivalent: bool,
    pub counterexample: Option<Vec<String>>,
    pub generic_probes: usize,
    pub positive_distance_probes: usize,
    pub min_distance: Option<String>,
    pub distinct_rows: bool,
    pub objective: [u8; 2],
    pub spec: LinearSpec,
    pub verdicts: Vec<VerdictPair>,
    /// Box maximum of the spec direction, checked against the whole input space.
    pub generality: Option<GeneralityExhibit>,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityControl {
    pub objective_unchanged: bool,
    pub partner_identical: bool,
    /// No neuron moves, so no probe is generic and the distance exhibits are skipped.
    pub exhibits_skipped: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairTrack {
    pub abs_swap: PairExhibit,
    pub pairs: Vec<PairExhibit>,
    pub passed_pairs: usize,
    pub identity_control: IdentityControl,
    pub bounded_exhibit: GeneralityExhibit,
    /// `floor(log10(512!))`, the permutation-group size of one 512-wide layer.
    pub group_order_log10_512: usize,
    pub passed: bool,
}

/// Maximum of `c·f` over a box, by region-wise LP.
pub fn box_maximum(net: &Network, c: &[Rational], dom: &Domain, opts: RegionOptions) -> Result<Rational> {
    let mut best: Option<Rational> = None;
    for r in region::enumerate_regions(net, dom, opts)? {
        let objective: Vec<Rational> = (0..net.input_dim())
            .map(|j| c.iter().zip(&r.affine.matrix).fold(rational::zero(), |acc, (ci, row)| acc + ci * &row[j]))
            .collect();
        let value = match lp::solve_max(&objective, &r.constraints)? {
            LpOutcome::Optimal { value, .. } => value + dot(c, &r.affine.offset),
            _ => return Err(Error::InvalidDomain("box maximum needs a bounded domain".into())),
        };
        if best.as_ref().is_none_or(|b| value > *b) {
            best = Some(value);
        }
    }
    best.ok_or_else(|| Error::InvalidDomain("domain contains no region".into()))
}

fn generality_exhibit(net: &Network, spec: LinearSpec, dom: &Domain) -> Result<GeneralityExhibit> {
    let box_verdict = bounded::verify_bounded(net, &spec, dom, BoundedMethod::ExactOnBox)?;
    let witness = if box_verdict.is_certified() {
        bounded::generality_gap_witness(net, &spec, dom)?
    } else {
        None
    };
    Ok(GeneralityExhibit {
        domain: dom.clone(),
        box_verdict: box_verdict.tag(),
        witness_outside_box: witness.as_ref().is_some_and(|w| !dom.contains(w)),
        witness: witness.as_deref().map(strings),
        spec,
    })
}

/// Inputs for checking one function-identical pair.
struct PairInstance<'a> {
    index: usize,
    net: &'a Network,
    partner: &'a Network,
    transforms: Vec<SymmetryTransform>,
    spec: LinearSpec,
    probe_seed: u64,
    support_seed: u64,
}

fn verdicts_for(net: &Network, spec: &LinearSpec, dom: &Domain, support: &EvalSupport, tau: &Rational) -> Result<Vec<VerdictRecord>> {
    let full = Domain::full(net.input_dim());
    Ok(vec![
        VerdictRecord::exact("full", &exact::verify_full(net, spec, &full)?),
        VerdictRecord::exact("exact_on_box", &bounded::verify_bounded(net, spec, dom, BoundedMethod::ExactOnBox)?),
        VerdictRecord::exact("ibp", &bounded::verify_bounded(net, spec, dom, BoundedMethod::Ibp)?),
        VerdictRecord::proxy(proxy::verify_proxy(net, spec, support, tau)?.verdict),
    ])
}

fn exhibit_pair(p: PairInstance, cfg: &TrilemmaConfig) -> Result<PairExhibit> {
    let d = p.net.input_dim();
    let full = Domain::full(d);
    let dom = Domain::cube(d, rational::int(-PAIR_BOX_RADIUS), rational::int(PAIR_BOX_RADIUS))?;
    let (equivalent, counterexample) = exact::equivalence_check(p.net, p.partner, &full)?;

    let mut rng = generators::stream_rng(p.probe_seed, 0);
    let density = cfg.grid_density as i64;
    let mut generic_probes = 0;
    let mut positive = 0;
    let mut min_distance: Option<Rational> = None;
    for _ in 0..cfg.probes * 1000 {
        if generic_probes == cfg.probes {
            break;
        }
        let x = generators::grid_point(&mut rng, d, PROBE_RADIUS, density);
        if !symmetry::is_generic_probe(p.net, &p.transforms, &x)? {
            continue;
        }
        generic_probes += 1;
        let dist = symmetry::representation_distance(p.net, p.partner, &x)?;
        if dist.is_positive() {
            positive += 1;
        }
        if min_distance.as_ref().is_none_or(|m| dist < *m) {
            min_distance = Some(dist);
        }
    }

    let distinct_rows = symmetry::has_distinct_rows(p.net);
    let objective = [
        symmetry::synthetic_alignment_objective(p.net)?,
        symmetry::synthetic_alignment_objective(p.partner)?,
    ];
    let support = EvalSupport::sample_box(&dom, PROXY_SUPPORT, p.support_seed)?;
    let verdicts: Vec<VerdictPair> = verdicts_for(p.net, &p.spec, &dom, &support, &cfg.tau)?
        .into_iter()
        .zip(verdicts_for(p.partner, &p.spec, &dom, &support, &cfg.tau)?)
        .map(|(a, b)| VerdictPair {
            identical: a.tag == b.tag,
            net: a,
            partner: b,
        })
        .collect();

    let top = box_maximum(p.net, &p.spec.c, &dom, RegionOptions::default())?;
    let generality = Some(generality_exhibit(p.net, LinearSpec::new(p.spec.c.clone(), top), &dom)?);

    let passed = equivalent
        && generic_probes == cfg.probes
        && positive == cfg.probes
        && (!distinct_rows || objective[0] != objective[1])
        && verdicts.iter().all(|v| v.identical);
    Ok(PairExhibit {
        index: p.index,
        net: p.net.clone(),
        transforms: p.transforms,
        equivalent,
        counterexample: counterexample.as_deref().map(strings),
        generic_probes,
        positive_distance_probes: positive,
        min_distance: min_distance.as_ref().map(format_rational),
        distinct_rows,
        objective,
        spec: p.spec,
        verdicts,
        generality,
        passed,
    })
}

/// True when every hidden neuron is active at some probe.
fn all_neurons_live(net: &Network, probes: &[Vec<Rational>]) -> Result<bool> {
    let mut live: Vec<Vec<bool>> = net.hidden_widths().iter().map(|&w| vec![false; w]).collect();
    for x in probes {
        for (l, pre) in net.pre_activations(x)?.iter().enumerate() {
            for (j, v) in pre.iter().enumerate() {
                live[l][j] |= v.is_positive();
            }
        }
    }
    Ok(live.iter().flatten().all(|&b| b))
}

/// Random network for the symmetry suite: 1 or 2 inputs, up to two hidden
/// layers of width 2 or 3, distinct rows, every neuron live on the probe box,
/// and the head of each layer moved to index 0.
pub fn symmetry_suite_network(rng: &mut impl Rng, density: i64) -> Result<Network> {
    for _ in 0..MAX_ATTEMPTS {
        let shape = Shape::random(rng, 2, 2, (2, 3), 6);
        let (net, _) = symmetry::canonicalize_head(&generators::random_network(rng, &shape))?;
        let probes: Vec<Vec<Rational>> = (0..256)
            .map(|_| generators::grid_point(rng, shape.input_dim, PROBE_RADIUS, density))
            .collect();
        if symmetry::has_distinct_rows(&net) && all_neurons_live(&net, &probes)? {
            return Ok(net);
        }
    }
    Err(Error::Precondition(format!("no usable symmetry-suite network in {MAX_ATTEMPTS} attempts")))
}

/// Function-identical pairs that differ in representation and in `A*`.
pub fn experiment_st_not_g(cfg: &TrilemmaConfig) -> Result<PairTrack> {
    cfg.validate()?;
    let mut rng = generators::stream_rng(cfg.seed, STREAM_PAIRS);
    let density = cfg.grid_density as i64;

    let abs = abs_net();
    let swap = vec![SymmetryTransform::Permutation { layer: 0, pi: vec![1, 0] }];
    let abs_partner = symmetry::apply_all(&abs, &swap)?;
    let abs_swap = exhibit_pair(
        PairInstance {
            index: 0,
            net: &abs,
            partner: &abs_partner,
            transforms: swap,
            spec: LinearSpec::lower(1, 0, rational::zero()),
            probe_seed: rng.gen(),
            support_seed: rng.gen(),
        },
        cfg,
    )?;

    let mut pairs = Vec::with_capacity(cfg.pairs);
    let mut first_net = None;
    for index in 0..cfg.pairs {
        let net = symmetry_suite_network(&mut rng, density)?;
        let (partner, transforms) = symmetry::random_symmetric_partner(&net, rng.gen())?;
        let spec = generators::random_spec(&mut rng, net.output_dim());
        pairs.push(exhibit_pair(
            PairInstance {
                index,
                net: &net,
                partner: &partner,
                transforms,
                spec,
                probe_seed: rng.gen(),
                support_seed: rng.gen(),
            },
            cfg,
        )?);
        first_net.get_or_insert(net);
    }

    let control_net = first_net.unwrap_or(abs);
    let identity = SymmetryTransform::Permutation {
        layer: 0,
        pi: (0..control_net.hidden_widths()[0]).collect(),
    };
    let control_partner = symmetry::apply_transform(&control_net, &identity)?;
    let identity_control = IdentityControl {
        objective_unchanged: symmetry::synthetic_alignment_objective(&control_net)?
            == symmetry::synthetic_alignment_objective(&control_partner)?,
        partner_identical: control_partner == control_net,
        exhibits_skipped: identity.moved_neurons().is_empty(),
    };

    let bounded_exhibit = generality_exhibit(
        &relu_net(rational::int(-1)),
        LinearSpec::upper(1, 0, rational::zero()),
        &Domain::cube(1, rational::int(-1), rational::one())?,
    )?;
    let group_order_log10_512 = symmetry::group_order_lower_bound(&[512]).to_string().len() - 1;

    let passed_pairs = pairs.iter().filter(|p| p.passed).count();
    let passed = abs_swap.passed
        && passed_pairs == pairs.len()
        && identity_control.objective_unchanged
        && identity_control.partner_identical
        && bounded_exhibit.box_verdict == "certified"
        && bounded_exhibit.witness_outside_box;
    Ok(PairTrack {
        abs_swap,
        pairs,
        passed_pairs,
        identity_control,
        bounded_exhibit,
        group_order_log10_512,
        passed,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagonalInstance {
    pub index: usize,
    pub support_size: usize,
    pub attempts: usize,
    pub report: DemonstrationReport,
    pub gap_exceeds_delta: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SupportSweepRow {
    pub support_size: usize,
    pub instances: usize,
    pub passed: usize,
    pub gaps: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagonalTrack {
    pub baseline: DemonstrationReport,
    pub instances: Vec<DiagonalInstance>,
    pub generation_failures: Vec<String>,
    pub support_sweep: Vec<SupportSweepRow>,
    pub passed_instances: usize,
    pub all_gaps_one: bool,
    pub passed: bool,
}

fn random_scalar_net(rng: &mut impl Rng) -> Network {
    let shape = Shape::random(rng, 1, 2, (1, 3), 5);
    generators::random_network(rng, &shape)
}

/// `theta1` with a spec it satisfies on the whole line: `c·f` must not grow
/// on either tail, and `b` is its largest breakpoint value.
fn certified_theta1(rng: &mut impl Rng, opts: RegionOptions) -> Result<Option<(Network, LinearSpec)>> {
    let net = random_scalar_net(rng);
    let f = diagonal::pwl_from_network_1d(&net, &Domain::full(1), opts)?;
    let c = if rng.gen_bool(0.5) { rational::one() } else { -rational::one() };
    if (&c * f.right_slope()).is_positive() || (&c * f.left_slope()).is_negative() {
        return Ok(None);
    }
    let b = f.values().iter().map(|v| &c * v).max().expect("at least one breakpoint");
    Ok(Some((net, LinearSpec::new(vec![c], b))))
}

fn diagonal_instance(
    rng: &mut impl Rng,
    index: usize,
    support_size: usize,
    cfg: &TrilemmaConfig,
) -> Result<DiagonalInstance> {
    let opts = RegionOptions::default();
    let full = Domain::full(1);
    let mut attempts = 0;
    let (theta1, spec) = loop {
        attempts += 1;
        if attempts > MAX_ATTEMPTS {
            return Err(Error::Precondition(format!("instance {index}: no certified theta1 in {MAX_ATTEMPTS} attempts")));
        }
        if let Some(found) = certified_theta1(rng, opts)? {
            break found;
        }
    };
    let support = generators::half_grid_support(rng, support_size, DIAGONAL_RADIUS);
    let plan = PatchPlan::new(support, rational::rat(1, 8))?;
    let theta2 = loop {
        attempts += 1;
        if attempts > 2 * MAX_ATTEMPTS {
            return Err(Error::Precondition(format!("instance {index}: no violating theta2 in {MAX_ATTEMPTS} attempts")));
        }
        let net = random_scalar_net(rng);
        let f = diagonal::pwl_from_network_1d(&net, &full, opts)?;
        if diagonal::violation_outside(&net, &f, &spec, &plan)?.is_some() {
            break net;
        }
    };
    let report = diagonal::build_unsound_pair(&theta1, &theta2, &plan, &spec, &cfg.tau, opts)?;
    let gap_exceeds_delta = report.proxy_gap > cfg.delta;
    Ok(DiagonalInstance {
        index,
        support_size,
        attempts,
        passed: report.passed() && gap_exceeds_delta,
        gap_exceeds_delta,
        report,
    })
}

/// The zero network patched toward the constant 1 around the origin.
pub fn baseline_demonstration(tau: &Rational) -> Result<DemonstrationReport> {
    let theta1 = diagonal::compile_pwl_to_network(&PwlFunction::constant(rational::zero()));
    let theta2 = diagonal::compile_pwl_to_network(&PwlFunction::constant(rational::one()));
    let plan = PatchPlan::new(vec![rational::zero()], rational::rat(1, 4))?;
    let spec = LinearSpec::upper(1, 0, rational::zero());
    diagonal::build_unsound_pair(&theta1, &theta2, &plan, &spec, tau, RegionOptions::default())
}

/// Diagonal constructions that fool the finite-support proxy.
pub fn experiment_gt_not_s(cfg: &TrilemmaConfig) -> Result<DiagonalTrack> {
    cfg.validate()?;
    let mut rng = generators::stream_rng(cfg.seed, STREAM_DIAGONAL);
    let baseline = baseline_demonstration(&cfg.tau)?;
    let mut instances = Vec::new();
    let mut generation_failures = Vec::new();
    for index in 0..cfg.diagonal_instances {
        let size = cfg.support_sizes[index % cfg.support_sizes.len()];
        match diagonal_instance(&mut rng, index, size, cfg) {
            Ok(inst) => instances.push(inst),
            Err(Error::Precondition(msg)) => generation_failures.push(msg),
            Err(e) => return Err(e),
        }
    }
    let support_sweep = cfg
        .support_sizes
        .iter()
        .map(|&size| {
            let of_size: Vec<&DiagonalInstance> = instances.iter().filter(|i| i.support_size == size).collect();
            SupportSweepRow {
                support_size: size,
                instances: of_size.len(),
                passed: of_size.iter().filter(|i| i.passed).count(),
                gaps: of_size.iter().map(|i| format_rational(&i.report.proxy_gap)).collect(),
            }
        })
        .collect();
    let passed_instances = instances.iter().filter(|i| i.passed).count();
    let all_gaps_one = instances.iter().all(|i| i.report.proxy_gap == rational::one())
        && baseline.proxy_gap == rational::one();
    let passed = baseline.passed()
        && generation_failures.is_empty()
        && passed_instances == cfg.diagonal_instances
        && all_gaps_one;
    Ok(DiagonalTrack {
        baseline,
        instances,
        generation_failures,
        support_sweep,
        passed_instances,
        all_gaps_one,
        passed,
    })
}
