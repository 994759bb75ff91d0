//! Three-band Bloch Hamiltonian in the real gauge.
//!
//! `H(k) = (-mu - 2) I + 4 n(k) n(k)^T` with
//! `n(k) = (cos(k1/2), cos(k2/2), cos((k1 + k2)/2))`. The two lowest bands
//! are exactly flat; the third band is `E3 = -2 - mu + 4 |n|^2`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::io::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KPoint {
    pub k1: f64,
    pub k2: f64,
}

impl KPoint {
    pub fn new(k1: f64, k2: f64) -> Self {
        KPoint { k1, k2 }
    }
}

/// Coordinate of grid index `i` on a `g`-point half-open grid over `(-pi, pi]`.
pub fn grid_coord(i: usize, g: usize) -> f64 {
    -PI + (i as f64 + 1.0) * 2.0 * PI / g as f64
}

/// All points of the `g x g` grid, `k1`-major.
pub fn bz_grid(g: usize) -> impl Iterator<Item = KPoint> {
    (0..g).flat_map(move |i| (0..g).map(move |j| KPoint::new(grid_coord(i, g), grid_coord(j, g))))
}

/// Discrete momenta `2 pi (m1/L1, m2/L2)` of an `l1 x l2` torus.
pub fn torus_momenta(l1: usize, l2: usize) -> Vec<KPoint> {
    let mut out = Vec::with_capacity(l1 * l2);
    for m1 in 0..l1 {
        for m2 in 0..l2 {
            out.push(KPoint::new(
                2.0 * PI * m1 as f64 / l1 as f64,
                2.0 * PI * m2 as f64 / l2 as f64,
            ));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochMatrix {
    pub h: Matrix3<f64>,
    pub mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandSolution {
    /// `E1 <= E2 <= E3`.
    pub energies: [f64; 3],
    /// Eigenvectors as columns, in the order of `energies`.
    pub vectors: Matrix3<f64>,
}

impl BandSolution {
    /// Projector onto the two flat bands.
    pub fn occupied_projector(&self) -> Matrix3<f64> {
        let u1 = self.vectors.column(0);
        let u2 = self.vectors.column(1);
        u1 * u1.transpose() + u2 * u2.transpose()
    }

    /// Projector onto the dispersive band.
    pub fn unoccupied_projector(&self) -> Matrix3<f64> {
        let u3 = self.vectors.column(2);
        u3 * u3.transpose()
    }
}

/// Matrix elements written out term by term.
pub fn bloch_hamiltonian(k: KPoint, mu: f64) -> BlochMatrix {
    let (k1, k2) = (k.k1, k.k2);
    let aa = -mu + 2.0 * k1.cos();
    let bb = -mu + 2.0 * k2.cos();
    let cc = -mu + 2.0 * (k1 + k2).cos();
    let ab = 2.0 * (k1 / 2.0 + k2 / 2.0).cos() + 2.0 * (k1 / 2.0 - k2 / 2.0).cos();
    let ac = 2.0 * (k2 / 2.0).cos() + 2.0 * (k1 + k2 / 2.0).cos();
    let bc = 2.0 * (k1 / 2.0).cos() + 2.0 * (k1 / 2.0 + k2).cos();
    BlochMatrix {
        h: Matrix3::new(aa, ab, ac, ab, bb, bc, ac, bc, cc),
        mu,
    }
}

pub fn n_vector(k: KPoint) -> Vector3<f64> {
    Vector3::new(
        (k.k1 / 2.0).cos(),
        (k.k2 / 2.0).cos(),
        ((k.k1 + k.k2) / 2.0).cos(),
    )
}

pub fn n_hat(k: KPoint) -> Vector3<f64> {
    n_vector(k).normalize()
}

/// Rank-one form `(-mu - 2) I + 4 n n^T`.
pub fn rank_one_hamiltonian(k: KPoint, mu: f64) -> Matrix3<f64> {
    let n = n_vector(k);
    Matrix3::identity() * (-mu - 2.0) + 4.0 * n * n.transpose()
}

/// Closed-form eigensystem. The flat-band basis is fixed by Gram-Schmidt
/// over the Cartesian axes in order, skipping the axis most parallel to `n`.
pub fn band_solution(k: KPoint, mu: f64) -> BandSolution {
    let n = n_vector(k);
    let norm2 = n.norm_squared();
    let nh = n / norm2.sqrt();
    let skip = (0..3)
        .max_by(|&a, &b| nh[a].abs().total_cmp(&nh[b].abs()))
        .expect("three axes");
    let mut basis: Vec<Vector3<f64>> = Vec::with_capacity(2);
    for axis in (0..3).filter(|&a| a != skip) {
        let mut v = Vector3::zeros();
        v[axis] = 1.0;
        v -= nh * nh.dot(&v);
        for b in &basis {
            v -= *b * b.dot(&v);
        }
        basis.push(v.normalize());
    }
    let flat = -2.0 - mu;
    BandSolution {
        energies: [flat, flat, flat + 4.0 * norm2],
        vectors: Matrix3::from_columns(&[basis[0], basis[1], nh]),
    }
}

/// Minimum of `E3 - E1 = 4 |n|^2` over the `g x g` grid.
pub fn spectral_gap(g: usize) -> f64 {
    bz_grid(g)
        .map(|k| 4.0 * n_vector(k).norm_squared())
        .fold(f64::INFINITY, f64::min)
}

/// CSV with columns `k1,k2,E1,E2,E3,n1,n2,n3`.
pub fn bands_csv(g: usize, mu: f64) -> String {
    let mut out = String::from("k1,k2,E1,E2,E3,n1,n2,n3\n");
    for k in bz_grid(g) {
        let b = band_solution(k, mu);
        let n = n_vector(k);
        let cols = [k.k1, k.k2, b.energies[0], b.energies[1], b.energies[2], n[0], n[1], n[2]];
        let line: Vec<String> = cols.iter().map(|&x| fmt_f64(x)).collect();
        writeln!(out, "{}", line.join(",")).expect("write to string");
    }
    out
}

/// Band statistics from a numerical eigensolver, independent of the closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSummary {
    pub grid: usize,
    pub mu: f64,
    /// Standard deviation of `E1` and `E2` over the grid.
    pub std: [f64; 2],
    /// Largest `|E_b + 2 + mu|` over both flat bands.
    pub max_deviation: f64,
    pub min_gap: f64,
}

pub fn numeric_bands(k: KPoint, mu: f64) -> [f64; 3] {
    let mut e: Vec<f64> = nalgebra::SymmetricEigen::new(bloch_hamiltonian(k, mu).h)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    e.sort_by(f64::total_cmp);
    [e[0], e[1], e[2]]
}

pub fn band_summary(g: usize, mu: f64) -> BandSummary {
    let bands: Vec<[f64; 3]> = bz_grid(g).map(|k| numeric_bands(k, mu)).collect();
    let n = bands.len() as f64;
    let mut std = [0.0; 2];
    for (b, s) in std.iter_mut().enumerate() {
        let mean = bands.iter().map(|x| x[b]).sum::<f64>() / n;
        *s = (bands.iter().map(|x| (x[b] - mean).powi(2)).sum::<f64>() / n).sqrt();
    }
    let max_deviation = bands
        .iter()
        .flat_map(|x| [x[0], x[1]])
        .map(|e| (e + 2.0 + mu).abs())
        .fold(0.0, f64::max);
    let min_gap = bands.iter().map(|x| x[2] - x[0]).fold(f64::INFINITY, f64::min);
    BandSummary { grid: g, mu, std, max_deviation, min_gap }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;
    use proptest::prelude::*;

    fn sorted_eigs(m: Matrix3<f64>) -> Vec<f64> {
        let mut e: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        e
    }

    #[test]
    fn gamma_point() {
        let h = bloch_hamiltonian(KPoint::new(0.0, 0.0), 0.0).h;
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 2.0 } else { 4.0 };
                assert!((h[(i, j)] - want).abs() < 1e-14);
            }
        }
        let e = sorted_eigs(h);
        for (a, b) in e.iter().zip([-2.0, -2.0, 10.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn corner_point() {
        let k = KPoint::new(PI, PI);
        let h = bloch_hamiltonian(k, 0.0).h;
        let mut want = Matrix3::identity() * -2.0;
        want[(2, 2)] += 4.0;
        assert!((h - want).abs().max() < 1e-14);
        let e = sorted_eigs(h);
        for (a, b) in e.iter().zip([-2.0, -2.0, 2.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let n = n_vector(k);
        assert!((n - Vector3::new(0.0, 0.0, -1.0)).abs().max() < 1e-15);
        assert_eq!(n_vector(KPoint::new(0.0, 0.0)), Vector3::new(1.0, 1.0, 1.0));
    }

    #[test]
    fn decomposition_identity_on_grid() {
        let mut worst: f64 = 0.0;
        for k in bz_grid(101) {
            for mu in [-2.0, 0.0, 0.7] {
                let h = bloch_hamiltonian(k, mu).h;
                worst = worst.max((h - rank_one_hamiltonian(k, mu)).abs().max());
                assert_eq!(h, h.transpose());
            }
        }
        assert!(worst <= 1e-12, "{worst}");
    }

    #[test]
    fn band_solution_matches_numerical_eigensystem() {
        for k in bz_grid(17) {
            let b = band_solution(k, 0.3);
            let e = sorted_eigs(bloch_hamiltonian(k, 0.3).h);
            for i in 0..3 {
                assert!((b.energies[i] - e[i]).abs() < 1e-9);
            }
            let gram = b.vectors.transpose() * b.vectors;
            assert!((gram - Matrix3::identity()).abs().max() < 1e-12);
            let h = bloch_hamiltonian(k, 0.3).h;
            for i in 0..3 {
                let v = b.vectors.column(i);
                assert!((h * v - v * b.energies[i]).abs().max() < 1e-9);
            }
            let nh = n_hat(k);
            assert!((b.vectors.column(2).dot(&nh).abs() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_bands_at_zero_for_mu_minus_two() {
        for k in bz_grid(9) {
            let b = band_solution(k, -2.0);
            assert!(b.energies[0].abs() < 1e-15 && b.energies[1].abs() < 1e-15);
        }
    }

    #[test]
    fn minimum_norm_at_two_thirds_pi() {
        let k = KPoint::new(-2.0 * PI / 3.0, -2.0 * PI / 3.0);
        assert!((n_vector(k).norm_squared() - 0.75).abs() < 1e-14);
        let g = 600;
        let min = bz_grid(g)
            .map(|k| n_vector(k).norm_squared())
            .fold(f64::INFINITY, f64::min);
        assert!((min - 0.75).abs() < 1e-12);
    }

    #[test]
    fn gap_values() {
        assert!((spectral_gap(6) - 3.0).abs() < 1e-12);
        assert!((spectral_gap(301) - 3.0).abs() < 1e-3);
        for g in [3, 4, 5, 7, 10] {
            assert!(spectral_gap(g) > 0.0);
            assert!(spectral_gap(g) >= 3.0 - 1e-12);
        }
    }

    #[test]
    fn grid_is_half_open() {
        let g = 8;
        assert!((grid_coord(g - 1, g) - PI).abs() < 1e-15);
        assert!(grid_coord(0, g) > -PI);
        assert_eq!(bz_grid(g).count(), 64);
    }

    #[test]
    fn csv_header_and_rows() {
        let csv = bands_csv(3, 0.0);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "k1,k2,E1,E2,E3,n1,n2,n3");
        assert_eq!(lines.len(), 10);
        assert_eq!(lines[1].split(',').count(), 8);
    }

    proptest! {
        #[test]
        fn real_symmetric_and_flat(k1 in -PI..PI, k2 in -PI..PI, mu in -3.0f64..3.0) {
            let k = KPoint::new(k1, k2);
            let h = bloch_hamiltonian(k, mu).h;
            prop_assert!((h - h.transpose()).abs().max() == 0.0);
            let e = sorted_eigs(h);
            prop_assert!((e[0] + 2.0 + mu).abs() < 1e-9);
            prop_assert!((e[1] + 2.0 + mu).abs() < 1e-9);
            prop_assert!((e[2] - (-2.0 - mu + 4.0 * n_vector(k).norm_squared())).abs() < 1e-9);
            prop_assert!(n_vector(k).norm() > 0.0);
        }
    }
}
