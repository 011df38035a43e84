mod common;

use common::{random_path, seeded};
use proptest::prelude::*;
use regcalc::catalog::SCENARIOS;
use regcalc::jumps::{self, CompensatorSpec, IntegrandField, JumpLaw};
use regcalc::regularize::{covariation, forward_integral};
use regcalc::simulate::{simulate, ProcessKind, SimSpec};
use regcalc::CadlagPath;

fn pair(seed: u64, n: usize) -> (CadlagPath, CadlagPath) {
    let mut rng = seeded(seed);
    let x = random_path(&mut rng, n, None);
    let y = random_path(&mut rng, n, Some(x.grid().to_vec()));
    (x, y)
}

fn close(a: &CadlagPath, b: &CadlagPath, rel: f64) -> bool {
    let scale = a.sup_norm().max(b.sup_norm()).max(1.0);
    a.sup_distance(b).unwrap() <= rel * scale
}

fn law() -> impl Strategy<Value = JumpLaw> {
    prop_oneof![
        (-2.0..2.0f64).prop_map(|at| JumpLaw::Dirac { at }),
        (-1.0..1.0f64, 0.1..2.0f64).prop_map(|(mean, sd)| JumpLaw::Normal { mean, sd }),
        (-2.0..0.0f64, 0.1..2.0f64).prop_map(|(lo, w)| JumpLaw::Uniform { lo, hi: lo + w }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn covariation_is_symmetric_and_polarizes(seed in any::<u64>(), n in 20usize..200, eps in 0.01..0.3f64) {
        let (x, y) = pair(seed, n);
        let xy = covariation(&x, &y, eps).unwrap();
        prop_assert!(close(&xy, &covariation(&y, &x, eps).unwrap(), 1e-12));
        let plus = x.add(&y).unwrap();
        let minus = x.sub(&y).unwrap();
        let polar = covariation(&plus, &plus, eps).unwrap().sub(&covariation(&minus, &minus, eps).unwrap()).unwrap().scale(0.25);
        prop_assert!(close(&xy, &polar, 1e-10));
    }

    #[test]
    fn covariation_is_bilinear(seed in any::<u64>(), n in 20usize..200, eps in 0.01..0.3f64, a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let (x, y) = pair(seed, n);
        let (z, _) = pair(seed.wrapping_add(1), n);
        let (x, z) = x.align(&z).unwrap();
        let (x, y) = x.align(&y).unwrap();
        let (z, _) = z.align(&y).unwrap();
        let combo = CadlagPath::linear_combination(a, &x, b, &z).unwrap();
        let lhs = covariation(&combo, &y, eps).unwrap();
        let rhs = CadlagPath::linear_combination(a, &covariation(&x, &y, eps).unwrap(), b, &covariation(&z, &y, eps).unwrap()).unwrap();
        prop_assert!(close(&lhs, &rhs, 1e-10));
    }

    #[test]
    fn forward_integral_is_linear_in_the_integrand(seed in any::<u64>(), n in 20usize..200, eps in 0.01..0.3f64, a in -3.0..3.0f64) {
        let (x, y) = pair(seed, n);
        let lhs = forward_integral(&y.scale(a).map(|_, v| v + 1.0), &x, eps).unwrap();
        let rhs = forward_integral(&y, &x, eps).unwrap().scale(a).add(&forward_integral(&y.map(|_, _| 1.0), &x, eps).unwrap()).unwrap();
        prop_assert!(close(&lhs, &rhs, 1e-10));
    }

    #[test]
    fn refining_a_linear_path_changes_nothing(seed in any::<u64>(), n in 50usize..150, eps in 0.05..0.3f64, extra in prop::collection::vec(0.0..1.0f64, 1..30)) {
        let sim = simulate(&SimSpec::new(ProcessKind::Brownian { sigma: 1.0 }, n, seed)).unwrap();
        let x = sim.path;
        let fine = x.refine(&extra).unwrap();
        let coarse = covariation(&x, &x, eps).unwrap();
        let refined = covariation(&fine, &fine, eps).unwrap();
        for (i, &t) in x.grid().iter().enumerate() {
            let j = fine.grid().binary_search_by(|g| g.total_cmp(&t)).expect("original points survive refinement");
            prop_assert!((refined.values()[j] - coarse.values()[i]).abs() <= 1e-10 * coarse.sup_norm().max(1.0));
        }
    }

    #[test]
    fn jump_log_matches_path(seed in any::<u64>(), rate in 0.5..20.0f64, law in law(), n in 10usize..500) {
        let s = simulate(&SimSpec::new(ProcessKind::CompoundPoisson { rate, law }, n, seed)).unwrap();
        let observed = s.path.jumps_of();
        let logged: Vec<_> = s.truth.jumps.iter().filter(|j| j.1 != 0.0).copied().collect();
        prop_assert_eq!(observed.len(), logged.len());
        for (o, l) in observed.iter().zip(&logged) {
            prop_assert_eq!(o.0, l.0);
            prop_assert!((o.1 - l.1).abs() <= 1e-12 * l.1.abs().max(1.0));
        }
        let measure = jumps::jump_measure(&s.path);
        prop_assert_eq!(measure.atoms.len(), observed.len());
    }

    #[test]
    fn simulation_is_deterministic(seed in any::<u64>(), idx in 0usize..9) {
        let sc = &SCENARIOS[idx];
        let spec = SimSpec::new(sc.kind, 256, seed);
        let a = simulate(&spec).unwrap();
        let b = simulate(&spec).unwrap();
        prop_assert_eq!(a.path, b.path);
        prop_assert_eq!(a.truth.jumps, b.truth.jumps);
    }

    #[test]
    fn truncation_partitions_mu_and_nu(seed in any::<u64>(), rate in 0.5..10.0f64, law in law(), c in 0.1..2.0f64) {
        let s = simulate(&SimSpec::new(ProcessKind::CompoundPoisson { rate, law }, 200, seed)).unwrap();
        let nu = &s.truth.compensator;
        let field = || IntegrandField::of_size(|x| x * x.sin());
        let whole = jumps::integrate_mu(&field(), &s.path).unwrap();
        let split = jumps::integrate_mu(&field().small(c), &s.path).unwrap().add(&jumps::integrate_mu(&field().big(c), &s.path).unwrap()).unwrap();
        prop_assert!(close(&whole, &split, 1e-12));
        let whole = jumps::integrate_nu(&field(), nu, &s.path).unwrap();
        let split = jumps::integrate_nu(&field().small(c), nu, &s.path).unwrap().add(&jumps::integrate_nu(&field().big(c), nu, &s.path).unwrap()).unwrap();
        prop_assert!(close(&whole, &split, 1e-7));
    }

    #[test]
    fn mu_and_nu_are_linear(seed in any::<u64>(), rate in 0.5..10.0f64, a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let law = JumpLaw::Normal { mean: 0.3, sd: 0.7 };
        let s = simulate(&SimSpec::new(ProcessKind::CompoundPoisson { rate, law }, 200, seed)).unwrap();
        let nu = CompensatorSpec::CompoundPoisson { rate, law };
        let f = |x: f64| x.powi(2);
        let g = |x: f64| x.cos() - 1.0;
        let combo = IntegrandField::of_size(move |x| a * f(x) + b * g(x));
        for integrate in [
            |w: &IntegrandField, x: &CadlagPath, _: &CompensatorSpec| jumps::integrate_mu(w, x).unwrap(),
            |w: &IntegrandField, x: &CadlagPath, nu: &CompensatorSpec| jumps::integrate_nu(w, nu, x).unwrap(),
        ] {
            let lhs = integrate(&combo, &s.path, &nu);
            let rhs = CadlagPath::linear_combination(
                a, &integrate(&IntegrandField::of_size(f), &s.path, &nu),
                b, &integrate(&IntegrandField::of_size(g), &s.path, &nu),
            ).unwrap();
            prop_assert!(close(&lhs, &rhs, 1e-8));
        }
    }

    #[test]
    fn csv_round_trip_is_bit_exact(seed in any::<u64>(), n in 2usize..300) {
        let (x, _) = pair(seed, n);
        let mut first = Vec::new();
        x.to_csv(&mut first).unwrap();
        let back = CadlagPath::from_csv(first.as_slice()).unwrap();
        let mut second = Vec::new();
        back.to_csv(&mut second).unwrap();
        prop_assert_eq!(first, second);
        prop_assert_eq!(back.values(), x.values());
        prop_assert_eq!(back.left_values(), x.left_values());
    }
}
