//! Euler curvature, quantum metric and the bounds relating them.
//!
//! Everything derives from the unit vector `n_hat(k)`: the dispersive band is
//! `n_hat` itself and the flat bands span its orthogonal complement, so
//! `g_ij = d_i n_hat . d_j n_hat` and
//! `Eu = n_hat . (d_a n_hat x d_b n_hat)` with `(a, b)` fixed by [`Orientation`].

use nalgebra::{Matrix2, Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::bloch::{band_solution, bz_grid, n_hat, n_vector, KPoint};
use crate::error::{Error, Result};
use crate::io::csv_from_rows;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "analytic-n")]
    AnalyticN,
    #[serde(rename = "finite-difference")]
    FiniteDifference { step: f64 },
    #[serde(rename = "closed-form")]
    ClosedForm,
}

impl Method {
    /// Central differences with step `h` in `[1e-6, 1e-3]`.
    pub fn finite_difference(h: f64) -> Result<Method> {
        if !(1e-6..=1e-3).contains(&h) {
            return Err(Error::InvalidParameter {
                name: "fd_step",
                reason: format!("step {h} outside [1e-6, 1e-3]"),
            });
        }
        Ok(Method::FiniteDifference { step: h })
    }
}

/// Order of the two momentum derivatives in the cross product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Orientation {
    /// `n_hat . (d2 n_hat x d1 n_hat)`; gives `chi = +1` for this model.
    #[default]
    #[serde(rename = "d2xd1")]
    D2CrossD1,
    /// `n_hat . (d1 n_hat x d2 n_hat)`.
    #[serde(rename = "d1xd2")]
    D1CrossD2,
}

impl Orientation {
    /// Sign relative to `d1 x d2`.
    pub fn sign(self) -> f64 {
        match self {
            Orientation::D2CrossD1 => -1.0,
            Orientation::D1CrossD2 => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryPoint {
    pub k1: f64,
    pub k2: f64,
    pub eu: f64,
    pub g11: f64,
    pub g12: f64,
    pub g22: f64,
    pub det_g: f64,
    pub tr_g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometrySummary {
    pub chi: f64,
    pub quantum_volume: f64,
    pub min_trace_margin: f64,
    pub max_ideal_violation: f64,
}

/// `n_hat` and its two partial derivatives from the analytic cosine partials.
fn analytic_frame(k: KPoint) -> [Vector3<f64>; 3] {
    let n = n_vector(k);
    let s3 = ((k.k1 + k.k2) / 2.0).sin();
    let d1 = Vector3::new(-0.5 * (k.k1 / 2.0).sin(), 0.0, -0.5 * s3);
    let d2 = Vector3::new(0.0, -0.5 * (k.k2 / 2.0).sin(), -0.5 * s3);
    let norm = n.norm();
    let nh = n / norm;
    let proj = |d: Vector3<f64>| (d - nh * nh.dot(&d)) / norm;
    [nh, proj(d1), proj(d2)]
}

fn fd_frame(k: KPoint, h: f64) -> [Vector3<f64>; 3] {
    let d1 = (n_hat(KPoint::new(k.k1 + h, k.k2)) - n_hat(KPoint::new(k.k1 - h, k.k2))) / (2.0 * h);
    let d2 = (n_hat(KPoint::new(k.k1, k.k2 + h)) - n_hat(KPoint::new(k.k1, k.k2 - h))) / (2.0 * h);
    [n_hat(k), d1, d2]
}

fn frame(k: KPoint, method: Method) -> [Vector3<f64>; 3] {
    match method {
        Method::FiniteDifference { step } => fd_frame(k, step),
        _ => analytic_frame(k),
    }
}

/// Shorthands `c1 = cos k1`, `c2 = cos k2`, `c12 = cos(k1 + k2)` and `3 + sum`.
fn cosines(k: KPoint) -> (f64, f64, f64, f64) {
    let (c1, c2, c12) = (k.k1.cos(), k.k2.cos(), (k.k1 + k.k2).cos());
    (c1, c2, c12, 3.0 + c1 + c2 + c12)
}

/// Closed-form curvature in the `d1 x d2` orientation.
fn closed_form_curvature(k: KPoint) -> f64 {
    let (c1, c2, c12, d) = cosines(k);
    (-3.0 + c1 + c2 + c12) / (4.0 * 2f64.sqrt() * d.powf(1.5))
}

fn closed_form_metric(k: KPoint) -> (f64, f64, f64) {
    let (k1, k2) = (k.k1, k.k2);
    let (c1, c2, c12, d) = cosines(k);
    let g11 = (8.0 - 3.0 * c1 - 3.0 * c12 - (k1 - k2).cos() - (k1 + 2.0 * k2).cos()) / (8.0 * d * d);
    let g22 = (8.0 - 3.0 * c2 - 3.0 * c12 - (k1 - k2).cos() - (2.0 * k1 + k2).cos()) / (8.0 * d * d);
    let g12 = (2.0 - 2.0 * c1 * c2 + k1.sin() * k2.sin()) / (4.0 * d * d);
    (g11, g12, g22)
}

/// Closed-form trace, written independently of the three metric entries.
pub fn closed_form_trace(k: KPoint) -> f64 {
    let (k1, k2) = (k.k1, k.k2);
    let (c1, c2, c12, d) = cosines(k);
    (16.0 - 3.0 * c1 - 3.0 * c2 - 6.0 * c12 - 2.0 * (k1 - k2).cos() - (2.0 * k1 + k2).cos()
        - (k1 + 2.0 * k2).cos())
        / (8.0 * d * d)
}

pub fn euler_curvature(k: KPoint, method: Method, orientation: Orientation) -> f64 {
    match method {
        Method::ClosedForm => orientation.sign() * closed_form_curvature(k),
        _ => {
            let [nh, d1, d2] = frame(k, method);
            match orientation {
                Orientation::D2CrossD1 => nh.dot(&d2.cross(&d1)),
                Orientation::D1CrossD2 => nh.dot(&d1.cross(&d2)),
            }
        }
    }
}

/// `(g11, g12, g22)`.
pub fn quantum_metric(k: KPoint, method: Method) -> (f64, f64, f64) {
    match method {
        Method::ClosedForm => closed_form_metric(k),
        _ => {
            let [_, d1, d2] = frame(k, method);
            (d1.dot(&d1), d1.dot(&d2), d2.dot(&d2))
        }
    }
}

/// Metric as `Tr[dP_i dP_j] / 2` with `P` built numerically from the band
/// eigenvectors, differentiated by central differences.
pub fn projector_metric(k: KPoint, h: f64, occupied: bool) -> (f64, f64, f64) {
    let proj = |k: KPoint| -> Matrix3<f64> {
        let b = band_solution(k, 0.0);
        if occupied {
            b.occupied_projector()
        } else {
            b.unoccupied_projector()
        }
    };
    let d1 = (proj(KPoint::new(k.k1 + h, k.k2)) - proj(KPoint::new(k.k1 - h, k.k2))) / (2.0 * h);
    let d2 = (proj(KPoint::new(k.k1, k.k2 + h)) - proj(KPoint::new(k.k1, k.k2 - h))) / (2.0 * h);
    (
        0.5 * (d1 * d1).trace(),
        0.5 * (d1 * d2).trace(),
        0.5 * (d2 * d2).trace(),
    )
}

pub fn geometry_point(k: KPoint, method: Method, orientation: Orientation) -> GeometryPoint {
    let eu = euler_curvature(k, method, orientation);
    let (g11, g12, g22) = quantum_metric(k, method);
    GeometryPoint {
        k1: k.k1,
        k2: k.k2,
        eu,
        g11,
        g12,
        g22,
        det_g: (g11 * g22 - g12 * g12).max(0.0),
        tr_g: g11 + g22,
    }
}

/// Grid sweep in fixed `k1`-major order.
pub fn geometry_field(g: usize, method: Method, orientation: Orientation) -> Vec<GeometryPoint> {
    let ks: Vec<KPoint> = bz_grid(g).collect();
    ks.par_iter()
        .map(|&k| geometry_point(k, method, orientation))
        .collect()
}

/// Kahan-compensated sum in the given order.
fn ordered_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// `(1 / 2 pi) sum Eu dk1 dk2` on the `g x g` grid.
pub fn euler_class(g: usize, method: Method, orientation: Orientation) -> f64 {
    let dk = 2.0 * PI / g as f64;
    let ks: Vec<KPoint> = bz_grid(g).collect();
    let vals: Vec<f64> = ks
        .par_iter()
        .map(|&k| euler_curvature(k, method, orientation))
        .collect();
    ordered_sum(vals.into_iter()) * dk * dk / (2.0 * PI)
}

pub fn bounds_report(g: usize, method: Method, orientation: Orientation) -> GeometrySummary {
    let field = geometry_field(g, method, orientation);
    let dk = 2.0 * PI / g as f64;
    let chi = ordered_sum(field.iter().map(|p| p.eu)) * dk * dk / (2.0 * PI);
    let quantum_volume = ordered_sum(field.iter().map(|p| p.det_g.sqrt())) * dk * dk;
    let min_trace_margin = field
        .iter()
        .map(|p| p.tr_g - 2.0 * p.eu.abs())
        .fold(f64::INFINITY, f64::min);
    let max_ideal_violation = field
        .iter()
        .map(|p| (p.det_g.sqrt() - p.eu.abs()).abs())
        .fold(0.0, f64::max);
    GeometrySummary {
        chi,
        quantum_volume,
        min_trace_margin,
        max_ideal_violation,
    }
}

/// Quantum Fisher information of the dispersive-band state, `F = 4 g`.
pub fn qfi_matrix(k: KPoint) -> Matrix2<f64> {
    let (g11, g12, g22) = quantum_metric(k, Method::AnalyticN);
    Matrix2::new(g11, g12, g12, g22) * 4.0
}

/// Cramer-Rao lower bound `1 / (M |Eu|)` on `sqrt det` of the covariance.
pub fn qcr_bound(k: KPoint, m: u32) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidParameter {
            name: "M",
            reason: "number of repetitions must be positive".into(),
        });
    }
    let eu = euler_curvature(k, Method::AnalyticN, Orientation::default());
    if eu.abs() < 1e-14 {
        return Err(Error::SingularBound { curvature: eu });
    }
    Ok(1.0 / (m as f64 * eu.abs()))
}

/// CSV with columns `k1,k2,Eu,g11,g12,g22,det_g,tr_g`.
pub fn geometry_csv(field: &[GeometryPoint]) -> String {
    csv_from_rows(
        &["k1", "k2", "Eu", "g11", "g12", "g22", "det_g", "tr_g"],
        field
            .iter()
            .map(|p| vec![p.k1, p.k2, p.eu, p.g11, p.g12, p.g22, p.det_g, p.tr_g]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const ALL: [Method; 3] = [
        Method::AnalyticN,
        Method::FiniteDifference { step: 1e-4 },
        Method::ClosedForm,
    ];

    #[test]
    fn curvature_special_points() {
        let gamma = KPoint::new(0.0, 0.0);
        let m = KPoint::new(PI, PI);
        for method in ALL {
            assert!(euler_curvature(gamma, method, Orientation::D2CrossD1).abs() < 1e-8);
            assert!((euler_curvature(m, method, Orientation::D2CrossD1) - 0.25).abs() < 1e-8);
            assert!((euler_curvature(m, method, Orientation::D1CrossD2) + 0.25).abs() < 1e-8);
        }
        // printed closed form: (-3 - 1 - 1 + 1) / (4 sqrt2 * 2^{3/2})
        let printed = (-3.0 - 1.0 - 1.0 + 1.0) / (4.0 * 2f64.sqrt() * 2f64.powf(1.5));
        assert!((closed_form_curvature(m) - printed).abs() < 1e-15);
    }

    // Triple-product oracle built from a direct determinant, no cross product.
    #[test]
    fn curvature_matches_determinant_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let k = KPoint::new(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
            let h = 1e-5;
            let nh = n_hat(k);
            let d1 = (n_hat(KPoint::new(k.k1 + h, k.k2)) - n_hat(KPoint::new(k.k1 - h, k.k2))) / (2.0 * h);
            let d2 = (n_hat(KPoint::new(k.k1, k.k2 + h)) - n_hat(KPoint::new(k.k1, k.k2 - h))) / (2.0 * h);
            let det = Matrix3::from_columns(&[nh, d2, d1]).determinant();
            let eu = euler_curvature(k, Method::AnalyticN, Orientation::D2CrossD1);
            assert!((det - eu).abs() < 1e-8);
        }
    }

    #[test]
    fn methods_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for h in [1e-3f64, 1e-4, 1e-5] {
            let tol = (10.0f64 * h * h).max(1e-8);
            let fd = Method::finite_difference(h).unwrap();
            for _ in 0..300 {
                let k = KPoint::new(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
                let vals: Vec<f64> = ALL
                    .iter()
                    .chain(std::iter::once(&fd))
                    .map(|&m| euler_curvature(k, m, Orientation::D2CrossD1))
                    .collect();
                let metrics: Vec<(f64, f64, f64)> = [Method::AnalyticN, Method::ClosedForm, fd]
                    .iter()
                    .map(|&m| quantum_metric(k, m))
                    .collect();
                for v in &vals {
                    assert!((v - vals[0]).abs() <= tol, "{vals:?}");
                }
                for g in &metrics {
                    assert!((g.0 - metrics[0].0).abs() <= tol);
                    assert!((g.1 - metrics[0].1).abs() <= tol);
                    assert!((g.2 - metrics[0].2).abs() <= tol);
                }
            }
        }
        assert!(Method::finite_difference(1e-2).is_err());
        assert!(Method::finite_difference(1e-7).is_err());
    }

    #[test]
    fn metric_special_points() {
        let (g11, _, _) = quantum_metric(KPoint::new(PI, PI), Method::AnalyticN);
        assert!((g11 - 0.25).abs() < 1e-12);
        let (_, g12, _) = quantum_metric(KPoint::new(0.0, 0.0), Method::ClosedForm);
        assert!(g12.abs() < 1e-15);
        let (g11c, _, _) = closed_form_metric(KPoint::new(PI, PI));
        assert!((g11c - 8.0 / 32.0).abs() < 1e-15);
    }

    #[test]
    fn determinant_equals_curvature_squared() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let k = KPoint::new(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
            for method in [Method::AnalyticN, Method::ClosedForm] {
                let (g11, g12, g22) = quantum_metric(k, method);
                let eu = euler_curvature(k, method, Orientation::D2CrossD1);
                assert!((g11 * g22 - g12 * g12 - eu * eu).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn closed_form_trace_consistent() {
        for k in bz_grid(23) {
            let (g11, _, g22) = closed_form_metric(k);
            assert!((g11 + g22 - closed_form_trace(k)).abs() < 1e-12);
        }
    }

    #[test]
    fn curvature_sign_is_uniform() {
        for k in bz_grid(101) {
            let (c1, c2, c12, _) = cosines(k);
            assert!(-3.0 + c1 + c2 + c12 <= 1e-15);
            assert!(euler_curvature(k, Method::ClosedForm, Orientation::D2CrossD1) >= -1e-15);
        }
    }

    #[test]
    fn euler_class_and_orientation() {
        let chi = euler_class(401, Method::AnalyticN, Orientation::D2CrossD1);
        assert!((chi - 1.0).abs() < 1e-4, "{chi}");
        let flipped = euler_class(401, Method::AnalyticN, Orientation::D1CrossD2);
        assert!((chi + flipped).abs() < 1e-12);
        let closed = euler_class(401, Method::ClosedForm, Orientation::D2CrossD1);
        assert!((closed - chi).abs() < 1e-10);
    }

    #[test]
    fn euler_class_convergence() {
        let e = |g| euler_class(g, Method::AnalyticN, Orientation::D2CrossD1);
        let d1 = (e(101) - e(202)).abs();
        let d2 = (e(201) - e(402)).abs();
        // already at the round-off floor counts as converged
        assert!(d2 * 3.0 <= d1 || (d1 < 1e-12 && d2 < 1e-12), "{d1} {d2}");
    }

    #[test]
    fn bounds_on_grid() {
        let closed = bounds_report(401, Method::ClosedForm, Orientation::default());
        assert!(closed.max_ideal_violation <= 1e-10);
        assert!(closed.min_trace_margin >= -1e-12);
        assert!((closed.quantum_volume - 2.0 * PI).abs() < 1e-3);
        assert!((closed.chi.abs() - 1.0).abs() < 1e-4);
        let analytic = bounds_report(101, Method::AnalyticN, Orientation::default());
        assert!(analytic.max_ideal_violation <= 1e-6);
        assert!(analytic.min_trace_margin >= -1e-12);
    }

    #[test]
    fn projector_metrics_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let k = KPoint::new(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
            let (a11, a12, a22) = quantum_metric(k, Method::AnalyticN);
            for occupied in [false, true] {
                let (p11, p12, p22) = projector_metric(k, 1e-5, occupied);
                assert!((a11 - p11).abs() < 1e-8);
                assert!((a12 - p12).abs() < 1e-8);
                assert!((a22 - p22).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn qfi_values() {
        let f = qfi_matrix(KPoint::new(PI, PI));
        assert!((f[(0, 0)] - 1.0).abs() < 1e-12);
        let f0 = qfi_matrix(KPoint::new(0.0, 0.0));
        assert!(f0[(0, 1)].abs() < 1e-15);
    }

    // Fidelity-susceptibility oracle: 1 - |<n(k)|n(k + dk)>|^2 ~ dk^T g dk.
    #[test]
    fn qfi_matches_fidelity_susceptibility() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = 1e-4;
        let infid = |k: KPoint, d1: f64, d2: f64| {
            let o = n_hat(k).dot(&n_hat(KPoint::new(k.k1 + d1, k.k2 + d2)));
            1.0 - o * o
        };
        for _ in 0..100 {
            let k = KPoint::new(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
            let f = qfi_matrix(k);
            let sym = |d1: f64, d2: f64| (infid(k, d1, d2) + infid(k, -d1, -d2)) / (2.0 * h * h);
            let q11 = sym(h, 0.0);
            let q22 = sym(0.0, h);
            let q12 = (sym(h, h) - q11 - q22) / 2.0;
            assert!((4.0 * q11 - f[(0, 0)]).abs() < 1e-6);
            assert!((4.0 * q22 - f[(1, 1)]).abs() < 1e-6);
            assert!((4.0 * q12 - f[(0, 1)]).abs() < 1e-6);
        }
    }

    #[test]
    fn qcr_values() {
        let m = KPoint::new(PI, PI);
        assert!((qcr_bound(m, 1).unwrap() - 4.0).abs() < 1e-12);
        assert!((qcr_bound(m, 4).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(
            qcr_bound(KPoint::new(0.0, 0.0), 3),
            Err(Error::SingularBound { .. })
        ));
        assert!(qcr_bound(m, 0).is_err());
    }

    #[test]
    fn csv_columns() {
        let field = geometry_field(3, Method::ClosedForm, Orientation::default());
        let csv = geometry_csv(&field);
        assert!(csv.starts_with("k1,k2,Eu,g11,g12,g22,det_g,tr_g\n"));
        assert_eq!(csv.lines().count(), 10);
    }

    proptest! {
        #[test]
        fn metric_psd_and_periodic(k1 in -PI..PI, k2 in -PI..PI) {
            let k = KPoint::new(k1, k2);
            let p = geometry_point(k, Method::AnalyticN, Orientation::default());
            prop_assert!(p.g11 >= 0.0 && p.g22 >= 0.0);
            prop_assert!(p.g11 * p.g22 - p.g12 * p.g12 >= -1e-12);
            prop_assert!(p.tr_g + 1e-12 >= 2.0 * p.det_g.sqrt());
            let shifted = euler_curvature(KPoint::new(k1 + 2.0 * PI, k2), Method::AnalyticN, Orientation::default());
            prop_assert!((shifted - p.eu).abs() < 1e-10);
        }
    }
}
