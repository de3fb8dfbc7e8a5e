use approx::assert_relative_eq;
use proptest::prelude::*;

use xdiff::harness::config::{parse_config, serialize};
use xdiff::harness::scenarios::scenario;
use xdiff::pairlab::pair_energy;
use xdiff::transform::w_gradient_identity_check;
use xdiff::{rhs, Field, FluxMean, Grid, ModelParams, State, TaxisScheme};

fn field(n: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, n)
}

fn two_fields(lo: f64, hi: f64) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..64).prop_flat_map(move |n| (field(n, lo, hi), field(n, lo, hi)))
}

fn params() -> impl Strategy<Value = ModelParams> {
    (any::<bool>(), any::<bool>()).prop_map(|(harmonic, upwind)| ModelParams {
        flux_mean: if harmonic { FluxMean::Harmonic } else { FluxMean::Arithmetic },
        taxis_scheme: if upwind { TaxisScheme::Upwind } else { TaxisScheme::Centered },
        ..ModelParams::default()
    })
}

fn f(v: Vec<f64>) -> Field {
    Field::from_vec(v).unwrap()
}

proptest! {
    #[test]
    fn integral_is_linear((a, b) in two_fields(-10.0, 10.0), s in -3.0f64..3.0) {
        let g = Grid::new(a.len()).unwrap();
        let fa = f(a);
        let fb = f(b);
        let combo = fa.axpby(s, &fb, 1.0);
        let lhs = g.integrate(&combo).unwrap();
        let rhs = s * g.integrate(&fa).unwrap() + g.integrate(&fb).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
    }

    #[test]
    fn summation_by_parts((a, b) in two_fields(-5.0, 5.0)) {
        let g = Grid::new(a.len()).unwrap();
        let fa = f(a);
        let fb = f(b);
        let flux = g.face_gradient(&fa).unwrap();
        let div = g.divergence(&flux).unwrap();
        let grad_b = g.face_gradient(&fb).unwrap();
        let lhs: f64 = fb.iter().zip(div.iter()).map(|(x, y)| x * y).sum::<f64>() * g.h();
        let rhs: f64 = -flux.iter().zip(grad_b.iter()).map(|(x, y)| x * y).sum::<f64>() * g.h();
        assert_relative_eq!(lhs, rhs, epsilon = 1e-9, max_relative = 1e-9);
    }

    #[test]
    fn right_hand_side_conserves_total_mass((u, v) in two_fields(0.01, 3.0), p in params()) {
        let g = Grid::new(u.len()).unwrap();
        let (u, v) = (f(u), f(v));
        let r = rhs(&u, &v, &g, &p).unwrap();
        let total = g.integrate(&r.du_dt.axpby(1.0, &r.dv_dt, 1.0)).unwrap();
        let scale: f64 = r.du_dt.iter().chain(r.dv_dt.iter()).map(|x| x.abs()).sum::<f64>() * g.h();
        prop_assert!(total.abs() <= 1e-13 * (1.0 + scale), "{total} vs {scale}");
    }

    #[test]
    fn pair_energy_is_symmetric_and_vanishes_on_the_diagonal(
        (u, v) in two_fields(0.0, 2.0),
        shift in -0.5f64..0.5,
    ) {
        let g = Grid::new(u.len()).unwrap();
        let v = v.iter().map(|x| x + 0.1).collect::<Vec<_>>();
        let a = State::new(f(u.clone()), f(v.clone()), 0.0).unwrap();
        let b = State::new(f(u.iter().map(|x| x + shift.abs()).collect()), f(v), 0.0).unwrap();
        let ab = pair_energy(&a, &b, &g).unwrap();
        let ba = pair_energy(&b, &a, &g).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert_eq!(pair_energy(&a, &a, &g).unwrap().total(), 0.0);
        prop_assert!(ab.total() >= 0.0);
    }

    #[test]
    fn antiderivative_differentiates_back((u, v) in two_fields(0.0, 10.0)) {
        let g = Grid::new(u.len()).unwrap();
        let v = v.iter().map(|x| x + 1e-3).collect::<Vec<_>>();
        let s = State::new(f(u), f(v), 0.0).unwrap();
        let scale = s.u.max() + s.v.max();
        prop_assert!(w_gradient_identity_check(&s, &g).unwrap() <= 16.0 * f64::EPSILON * scale);
    }

    #[test]
    fn config_round_trips(
        n in 4usize..4096,
        t_end in 1e-3f64..10.0,
        outputs in 1usize..1000,
        seed in any::<u64>(),
        name in prop::sample::select(vec!["logistic", "bump-taxis", "degenerate-dip", "mms"]),
    ) {
        let mut cfg = scenario(name).unwrap();
        cfg.n_cells = n;
        cfg.t_end = t_end;
        cfg.output_count = outputs;
        cfg.seed = seed;
        prop_assert_eq!(parse_config(&serialize(&cfg)).unwrap(), cfg);
    }
}
