use proptest::prelude::*;
use rand::Rng;
use trilemma_core::diagonal::{self, PatchPlan};
use trilemma_core::exact::difference_network;
use trilemma_core::harness::generators::{grid_point, random_network, stream_rng, Shape};
use trilemma_core::rational::{self, format_rational, parse_rational, Rational};
use trilemma_core::region::RegionOptions;
use trilemma_core::{ibp_bounds, symmetry, Domain, Network};

fn net_from_seed(seed: u64, max_inputs: usize) -> Network {
    net_with_widths(seed, max_inputs, 1)
}

fn net_with_widths(seed: u64, max_inputs: usize, min_width: usize) -> Network {
    let mut rng = stream_rng(seed, 0);
    let shape = Shape::random(&mut rng, max_inputs, 3, (min_width, 4), 8);
    random_network(&mut rng, &shape)
}

fn points(seed: u64, dim: usize, count: usize) -> Vec<Vec<Rational>> {
    let mut rng = stream_rng(seed, 1);
    (0..count).map(|_| grid_point(&mut rng, dim, 4, 16)).collect()
}

fn arb_rational() -> impl Strategy<Value = Rational> {
    (any::<i64>(), 1i64..=1_000_000).prop_map(|(n, d)| rational::rat(n, d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rational_text_round_trip(r in arb_rational()) {
        prop_assert_eq!(parse_rational(&format_rational(&r)).unwrap(), r);
    }

    #[test]
    fn network_json_round_trip(seed in any::<u64>()) {
        let net = net_from_seed(seed, 3);
        prop_assert_eq!(Network::from_json(&net.to_json()).unwrap(), net);
    }

    #[test]
    fn symmetric_partner_computes_same_function(seed in any::<u64>(), partner_seed in any::<u64>()) {
        let net = net_with_widths(seed, 3, 2);
        let (partner, _) = symmetry::random_symmetric_partner(&net, partner_seed).unwrap();
        for x in points(seed, net.input_dim(), 20) {
            prop_assert_eq!(net.forward(&x).unwrap(), partner.forward(&x).unwrap());
        }
    }

    #[test]
    fn difference_network_subtracts(seed in any::<u64>(), other in any::<u64>()) {
        let a = net_from_seed(seed, 2);
        let mut rng = stream_rng(other, 0);
        let shape = Shape { input_dim: a.input_dim(), widths: vec![3, 2], output_dim: 1 };
        let b = random_network(&mut rng, &shape);
        let d = difference_network(&a, &b).unwrap();
        for x in points(other, a.input_dim(), 20) {
            let expected = &a.forward(&x).unwrap()[0] - &b.forward(&x).unwrap()[0];
            prop_assert_eq!(d.forward(&x).unwrap(), vec![expected]);
        }
    }

    #[test]
    fn ibp_encloses_outputs(seed in any::<u64>(), lo in -3i64..=2, width in 1i64..=3) {
        let net = net_from_seed(seed, 3);
        let dom = Domain::cube(net.input_dim(), rational::int(lo), rational::int(lo + width)).unwrap();
        let bounds = ibp_bounds(&net, &dom).unwrap();
        let mut rng = stream_rng(seed, 2);
        for _ in 0..30 {
            let x: Vec<Rational> = (0..net.input_dim())
                .map(|_| rational::rat(rng.gen_range(lo * 8..=(lo + width) * 8), 8))
                .collect();
            prop_assert!(bounds.contains(&net.forward(&x).unwrap()));
        }
    }

    #[test]
    fn compiled_pwl_matches_network(seed in any::<u64>()) {
        let net = net_from_seed(seed, 1);
        let f = diagonal::pwl_from_network_1d(&net, &Domain::full(1), RegionOptions::default()).unwrap();
        let compiled = diagonal::compile_pwl_to_network(&f);
        for x in points(seed, 1, 40) {
            let y = net.forward(&x).unwrap();
            prop_assert_eq!(&f.eval(&x[0]), &y[0]);
            prop_assert_eq!(compiled.forward(&x).unwrap(), y);
        }
    }

    #[test]
    fn patching_a_function_with_itself_is_identity(seed in any::<u64>(), centre in -6i64..=6) {
        let net = net_from_seed(seed, 1);
        let f = diagonal::pwl_from_network_1d(&net, &Domain::full(1), RegionOptions::default()).unwrap();
        let plan = PatchPlan::new(vec![rational::rat(centre, 2), rational::int(7)], rational::rat(1, 4)).unwrap();
        let g = diagonal::patch(&f, &f, &plan).unwrap();
        for x in points(seed, 1, 40) {
            prop_assert_eq!(g.eval(&x[0]), f.eval(&x[0]));
        }
    }
}

