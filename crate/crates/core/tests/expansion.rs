mod common;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use tyler_core::expansion::{
    cheeger_constant, infty_expansion_exact, infty_expansion_sampled, infty_implies_quantum_check,
    infty_to_pseudo_bounds, infty_to_pseudo_halving, pseudo_to_infty_bounds, pseudorandom_check,
    quantum_expansion_exact, weighted_op_norm, Beta, Mode,
};
use tyler_core::sampler::{normalize_columns, sample_gaussian_frame, sample_sphere_frame};
use tyler_core::subsets::par_fold_subsets;
use tyler_core::{error_report, size, solve_scaling, Frame, Method, SeedSpec, SolverConfig};

const ONE_MINUS_ROOT_HALF: f64 = 1.0 - std::f64::consts::FRAC_1_SQRT_2;

fn seed(i: u64) -> SeedSpec {
    SeedSpec::new(1234, i)
}

/// Seeded exactly balanced frames with d ≤ 3 and even n ≤ 12.
fn balanced_battery() -> Vec<Frame> {
    let shapes = [(2, 4), (2, 6), (3, 6), (2, 8), (3, 8), (2, 10), (3, 10), (2, 12), (3, 12), (3, 4)];
    let mut out = Vec::new();
    for (i, &(d, n)) in shapes.iter().cycle().take(20).enumerate() {
        let raw = sample_sphere_frame(d, n, SeedSpec::new(900, i as u64)).unwrap();
        let sol = solve_scaling(&raw, &SolverConfig::new(1e-13, 100_000).unwrap(), Method::FlipFlop).unwrap();
        assert!(sol.converged);
        out.push(sol.frame);
    }
    out
}

#[test]
fn closed_form_values() {
    let mb = quantum_expansion_exact(&common::mercedes_benz()).unwrap();
    assert!((mb.sup - 3f64.sqrt() / 2.0).abs() < 1e-12);
    assert!((mb.lambda - ONE_MINUS_ROOT_HALF).abs() < 1e-12);

    let eq = common::equiangular4();
    let q = quantum_expansion_exact(&eq).unwrap();
    assert!((q.lambda - ONE_MINUS_ROOT_HALF).abs() < 1e-12);
    let inf = infty_expansion_exact(&eq).unwrap();
    assert!((inf.sup - 2f64.sqrt()).abs() < 1e-12);
    assert!((inf.lambda - ONE_MINUS_ROOT_HALF).abs() < 1e-12);
    assert_eq!(inf.witness.subset, vec![0, 1]);

    let p = pseudorandom_check(&eq, Beta::HALF, Mode::Exact, 0, seed(0)).unwrap();
    assert!((p.alpha_min - 4.0 * ONE_MINUS_ROOT_HALF).abs() < 1e-12);
    assert!((p.alpha_max - 4.0 * (1.0 + std::f64::consts::FRAC_1_SQRT_2)).abs() < 1e-12);
    // The forward bound is tight here.
    let lower = pseudo_to_infty_bounds(p.alpha_min, p.alpha_max, 4.0, 0.0);
    assert!((lower - ONE_MINUS_ROOT_HALF).abs() < 1e-12);
}

/// Brute-force Cheeger quantity for d = 2: subspaces are 0, a line at angle φ, or the plane.
fn cheeger_oracle_2d(frame: &Frame) -> f64 {
    let v = frame.matrix();
    let n = frame.n();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        let b: Vec<usize> = (0..n).filter(|j| mask >> j & 1 == 1).collect();
        let in_b = |j: usize| mask >> j & 1 == 1;
        let vb: f64 = b.iter().map(|&j| v.column(j).norm_squared()).sum();
        let ratio_for = |p: &DMatrix<f64>| {
            let mut num = 0.0;
            let mut den = vb;
            for j in 0..n {
                let c = v.column(j);
                let pc = p * c;
                den += pc.norm_squared();
                num += if in_b(j) { (c - &pc).norm_squared() } else { pc.norm_squared() };
            }
            num / den
        };
        for k in 0..=2usize {
            if (k == 0 && b.is_empty()) || k * n + b.len() * 2 > 2 * n {
                continue;
            }
            match k {
                0 => best = best.min(ratio_for(&DMatrix::zeros(2, 2))),
                2 => best = best.min(ratio_for(&DMatrix::identity(2, 2))),
                _ => {
                    let steps = 20_000;
                    let mut phi_best = (f64::INFINITY, 0.0);
                    for i in 0..steps {
                        let phi = std::f64::consts::PI * i as f64 / steps as f64;
                        let u = DVector::from_vec(vec![phi.cos(), phi.sin()]);
                        let r = ratio_for(&(&u * u.transpose()));
                        if r < phi_best.0 {
                            phi_best = (r, phi);
                        }
                    }
                    // Golden-section refinement around the grid minimum.
                    let h = std::f64::consts::PI / steps as f64;
                    let (mut lo, mut hi) = (phi_best.1 - h, phi_best.1 + h);
                    let f = |phi: f64| {
                        let u = DVector::from_vec(vec![phi.cos(), phi.sin()]);
                        ratio_for(&(&u * u.transpose()))
                    };
                    for _ in 0..100 {
                        let m1 = hi - (hi - lo) * 0.618_033_988_75;
                        let m2 = lo + (hi - lo) * 0.618_033_988_75;
                        if f(m1) < f(m2) {
                            hi = m2;
                        } else {
                            lo = m1;
                        }
                    }
                    best = best.min(f(0.5 * (lo + hi))).min(phi_best.0);
                }
            }
        }
    }
    best
}

#[test]
fn cheeger_matches_brute_force_in_the_plane() {
    for frame in [common::mercedes_benz(), common::equiangular4(), Frame::identity(2)] {
        let fast = cheeger_constant(&frame).unwrap();
        let slow = cheeger_oracle_2d(&frame);
        assert!((fast.ch - slow).abs() < 1e-9, "{} vs {}", fast.ch, slow);
    }
    let mb = cheeger_constant(&common::mercedes_benz()).unwrap();
    assert!(mb.ch > 0.0);
    let q = quantum_expansion_exact(&common::mercedes_benz()).unwrap();
    assert!(q.lambda >= mb.ch * mb.ch);
}

#[test]
fn chain_holds_on_equiangular_frame() {
    let r = infty_implies_quantum_check(&common::equiangular4()).unwrap();
    assert!(r.holds(), "{r:?}");
    assert!(r.cheeger > 0.0);
}

#[test]
fn chain_holds_on_balanced_battery() {
    for (i, frame) in balanced_battery().iter().enumerate() {
        let r = infty_implies_quantum_check(frame).unwrap();
        assert!(r.holds(), "frame {i}: {r:?}");
    }
}

#[test]
fn pseudorandom_infty_relation_both_ways() {
    for (i, frame) in balanced_battery().iter().enumerate() {
        let s = size(frame);
        let eps = error_report(frame).balance_ratio();
        let lam = infty_expansion_exact(frame).unwrap().lambda;
        let p = pseudorandom_check(frame, Beta::HALF, Mode::Exact, 0, seed(0)).unwrap();
        let slack = 1e-9 * s;
        let forward = (s * (1.0 + eps) - p.alpha_min).min(p.alpha_max - s * (1.0 - eps));
        assert!(s * (1.0 - lam) <= forward + slack, "frame {i}");
        assert!(lam >= pseudo_to_infty_bounds(p.alpha_min, p.alpha_max, s, eps) - 1e-9);
        let (lo, hi) = infty_to_pseudo_bounds(lam, s, eps);
        assert!(lo <= p.alpha_min + slack && p.alpha_min <= p.alpha_max && p.alpha_max <= hi + slack, "frame {i}");
    }
}

#[test]
fn vertices_dominate_the_polytope() {
    let mut rng = SeedSpec::new(5, 5).rng();
    for (t, n) in [4usize, 6, 8, 10].into_iter().enumerate() {
        let frame = sample_sphere_frame(3, n, seed(t as u64)).unwrap();
        let exact = infty_expansion_exact(&frame).unwrap();
        let at_witness = weighted_op_norm(&frame, &exact.witness.y).unwrap();
        assert!((at_witness - exact.sup).abs() <= 1e-9);
        for _ in 0..10_000 {
            let mut y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mean = y.iter().sum::<f64>() / n as f64;
            y.iter_mut().for_each(|v| *v -= mean);
            let peak = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
            y.iter_mut().for_each(|v| *v /= peak);
            assert!(weighted_op_norm(&frame, &y).unwrap() <= exact.sup + 1e-12);
        }
    }
}

#[test]
fn subset_averaging() {
    let frame = sample_sphere_frame(2, 8, seed(3)).unwrap();
    let (d, n) = (2, 8);
    let p = pseudorandom_check(&frame, Beta::QUARTER, Mode::Exact, 0, seed(0)).unwrap();
    let v = frame.matrix();
    for k in 2..=n {
        let ok = par_fold_subsets(
            n,
            k,
            || true,
            |acc, b| {
                let mut g = DMatrix::<f64>::zeros(d, d);
                for &j in b {
                    g += v.column(j) * v.column(j).transpose();
                }
                let e = g.symmetric_eigenvalues();
                let scale = k as f64 / (n * d) as f64;
                acc && e.min() >= p.alpha_min * scale - 1e-12 && e.max() <= p.alpha_max * scale + 1e-12
            },
            |a, b| a && b,
        );
        assert!(ok, "subset size {k}");
    }
}

#[test]
fn sampling_is_one_sided() {
    for t in 0..5 {
        let frame = sample_sphere_frame(3, 14, seed(t)).unwrap();
        let exact = pseudorandom_check(&frame, Beta::HALF, Mode::Exact, 0, seed(0)).unwrap();
        let sampled = pseudorandom_check(&frame, Beta::HALF, Mode::Sampled, 200, seed(t)).unwrap();
        assert_eq!(sampled.mode, Mode::Sampled);
        assert!(sampled.alpha_min >= exact.alpha_min && sampled.alpha_max <= exact.alpha_max);

        let lam = infty_expansion_exact(&frame).unwrap();
        let upper = infty_expansion_sampled(&frame, 300, seed(t)).unwrap();
        assert_eq!(upper.mode, Mode::Sampled);
        assert!(upper.lambda >= lam.lambda);
    }
    let frame = sample_sphere_frame(3, 8, seed(9)).unwrap();
    let all = infty_expansion_sampled(&frame, 70, seed(1)).unwrap();
    assert_eq!(all.mode, Mode::Exact);
    assert_eq!(all.lambda, infty_expansion_exact(&frame).unwrap().lambda);
    let all = pseudorandom_check(&frame, Beta::HALF, Mode::Sampled, 70, seed(1)).unwrap();
    assert_eq!(all.mode, Mode::Exact);
}

#[test]
fn halving_bound_small_exact() {
    for t in 0..10 {
        let g = sample_gaussian_frame(2, 8, 1.0 / 16.0, seed(t)).unwrap();
        let pg = pseudorandom_check(&g, Beta::QUARTER, Mode::Exact, 0, seed(0)).unwrap();
        let v = normalize_columns(g.matrix()).unwrap();
        let pv = pseudorandom_check(&v, Beta::HALF, Mode::Exact, 0, seed(0)).unwrap();
        let bound = infty_to_pseudo_halving(pg.alpha_min, pg.alpha_max, Beta::QUARTER, 8);
        assert_eq!(bound.beta, Beta::HALF);
        assert!(pv.alpha_min >= bound.alpha_min_bound - 1e-12, "trial {t}");
    }
}

#[test]
fn halving_bound_sampled_gaussian() {
    let (d, n) = (6, 48);
    let g = sample_gaussian_frame(d, n, 1.0 / (n * d) as f64, seed(42)).unwrap();
    let pg = pseudorandom_check(&g, Beta::QUARTER, Mode::Sampled, 5000, seed(1)).unwrap();
    let v = normalize_columns(g.matrix()).unwrap();
    let pv = pseudorandom_check(&v, Beta::HALF, Mode::Sampled, 5000, seed(2)).unwrap();
    let bound = infty_to_pseudo_halving(pg.alpha_min, pg.alpha_max, Beta::QUARTER, n);
    assert!(pv.alpha_min >= bound.alpha_min_bound);
}

#[test]
fn reports_are_rotation_and_permutation_invariant() {
    let frame = &balanced_battery()[3];
    let q = common::random_orthogonal(frame.d(), 17);
    let rotated = frame.transformed(&q, &DVector::from_element(frame.n(), 1.0));
    let perm: Vec<usize> = (0..frame.n()).rev().collect();
    let permuted = frame.permuted(&perm);
    let base = infty_implies_quantum_check(frame).unwrap();
    let pb = pseudorandom_check(frame, Beta::HALF, Mode::Exact, 0, seed(0)).unwrap();
    for other in [rotated, permuted] {
        let r = infty_implies_quantum_check(&other).unwrap();
        assert!((r.lambda_infty - base.lambda_infty).abs() <= 1e-10);
        assert!((r.lambda_quantum - base.lambda_quantum).abs() <= 1e-10);
        assert!((r.cheeger - base.cheeger).abs() <= 1e-10);
        let p = pseudorandom_check(&other, Beta::HALF, Mode::Exact, 0, seed(0)).unwrap();
        assert!((p.alpha_min - pb.alpha_min).abs() <= 1e-10);
        assert!((p.alpha_max - pb.alpha_max).abs() <= 1e-10);
    }
}

#[test]
fn witnesses_are_well_formed_and_deterministic() {
    let frame = sample_sphere_frame(3, 12, seed(77)).unwrap();
    let a = infty_expansion_exact(&frame).unwrap();
    let b = infty_expansion_exact(&frame).unwrap();
    assert_eq!(a.witness, b.witness);
    assert!(a.witness.y.iter().sum::<f64>().abs() <= 1e-12);
    assert_eq!(a.witness.subset.len(), 6);
    let q = quantum_expansion_exact(&frame).unwrap();
    assert!(q.witness.y.iter().sum::<f64>().abs() <= 1e-12);
    let s1 = infty_expansion_sampled(&sample_sphere_frame(4, 40, seed(1)).unwrap(), 500, seed(3)).unwrap();
    let s2 = infty_expansion_sampled(&sample_sphere_frame(4, 40, seed(1)).unwrap(), 500, seed(3)).unwrap();
    assert_eq!(s1.lambda.to_bits(), s2.lambda.to_bits());
    assert_eq!(s1.witness, s2.witness);
}
