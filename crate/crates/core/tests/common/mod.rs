#![allow(dead_code)]

use nalgebra::{dmatrix, DMatrix, DVector};
use tyler_core::sampler::{sample_gaussian_frame, sample_sphere_frame, sample_sphere_matrix, Gaussian};
use tyler_core::{Frame, SeedSpec};

pub fn unit_at(degrees: &[f64]) -> Frame {
    let cols: Vec<DVector<f64>> = degrees
        .iter()
        .map(|a| {
            let r = a.to_radians();
            DVector::from_vec(vec![r.cos(), r.sin()])
        })
        .collect();
    Frame::from_columns(&cols).unwrap()
}

pub fn mercedes_benz() -> Frame {
    unit_at(&[90.0, 210.0, 330.0])
}

pub fn equiangular4() -> Frame {
    unit_at(&[0.0, 45.0, 90.0, 135.0])
}

pub fn e1e1e2() -> Frame {
    Frame::new(dmatrix![1.0, 1.0, 0.0; 0.0, 0.0, 1.0]).unwrap()
}

pub fn random_orthogonal(d: usize, seed: u64) -> DMatrix<f64> {
    let mut g = Gaussian::new(SeedSpec::new(seed, 999).rng());
    let m = DMatrix::from_fn(d, d, |_, _| g.next());
    m.qr().q()
}

pub fn random_invertible(d: usize, seed: u64) -> DMatrix<f64> {
    let mut g = Gaussian::new(SeedSpec::new(seed, 998).rng());
    DMatrix::from_fn(d, d, |i, j| g.next() + if i == j { 2.0 } else { 0.0 })
}

/// Frames for the derivative and flow batteries: degenerate, balanced, scaled and random members.
pub fn frame_battery() -> Vec<(String, Frame)> {
    let mut out = vec![
        ("e1e1e2".to_string(), e1e1e2()),
        ("identity3".to_string(), Frame::identity(3)),
        ("mercedes".to_string(), mercedes_benz()),
        ("equiangular".to_string(), equiangular4()),
        ("scaled_e1e1e2".to_string(), e1e1e2().scaled(10.0)),
        ("stretched".to_string(), Frame::new(dmatrix![3.0, 0.0, 1.0; 0.0, 0.5, 1.0]).unwrap()),
    ];
    for t in 0..2 {
        out.push((format!("sphere_{t}"), sample_sphere_frame(3, 7, SeedSpec::new(11, t)).unwrap()));
    }
    for t in 0..2 {
        out.push((
            format!("gaussian_{t}"),
            sample_gaussian_frame(4, 9, 1.0, SeedSpec::new(12, t)).unwrap(),
        ));
    }
    out
}

/// Seeded sphere-uniform data, `n = 4d`.
pub fn sphere_battery(count: u64) -> Vec<DMatrix<f64>> {
    (0..count)
        .map(|t| {
            let d = 2 + (t % 3) as usize;
            sample_sphere_matrix(d, 4 * d, SeedSpec::new(2718, t)).unwrap()
        })
        .collect()
}

/// Damped fixed-point oracle for Tyler's estimator, independent of the library:
/// `Σ ← ½Σ + ½·(d/n)·Σ_j x x ᵀ/(xᵀΣ⁻¹x)`, renormalized to trace d, until the
/// fixed-point residual is at most `tol`.
pub fn damped_tyler_oracle(x: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let (d, n) = x.shape();
    let mut sigma = DMatrix::<f64>::identity(d, d);
    for _ in 0..200_000 {
        let inv = sigma.clone().try_inverse().unwrap();
        let mut w = DMatrix::<f64>::zeros(d, d);
        for j in 0..n {
            let c = x.column(j);
            let q = (c.transpose() * &inv * c)[(0, 0)];
            w += c * c.transpose() / q;
        }
        w *= d as f64 / n as f64;
        let residual = (&w - &sigma).norm();
        if residual <= tol {
            return sigma;
        }
        let next = (&sigma + &w) * 0.5;
        let next = (&next + next.transpose()) * 0.5;
        sigma = &next * (d as f64 / next.trace());
    }
    panic!("oracle did not reach tolerance {tol}");
}
