mod common;

use common::*;
use rand::Rng;
use regcalc::regularize::{covariation, forward_integral};

#[test]
fn fast_kernels_match_quadratic_transcription() {
    let mut rng = seeded(7);
    for case in 0..12 {
        let n = rng.random_range(30..400);
        let x = random_path(&mut rng, n, None);
        let y = random_path(&mut rng, n, Some(x.grid().to_vec()));
        let eps = rng.random_range(0.02..0.4);
        let f = forward_integral(&y, &x, eps).unwrap();
        let c = covariation(&x, &y, eps).unwrap();
        let e1 = rel_sup_err(f.values(), &brute_forward(&y, &x, eps, Side::Right));
        let e2 = rel_sup_err(f.left_values(), &brute_forward(&y, &x, eps, Side::Left));
        let e3 = rel_sup_err(c.values(), &brute_covariation(&x, &y, eps, Side::Right));
        let e4 = rel_sup_err(c.left_values(), &brute_covariation(&x, &y, eps, Side::Left));
        for e in [e1, e2, e3, e4] {
            assert!(e < 1e-12, "case {case}: n={n} eps={eps} errors {e1:.2e} {e2:.2e} {e3:.2e} {e4:.2e}");
        }
    }
}
