//! Single-particle Hamiltonians on finite lattices.
//!
//! `H = sum_bonds (a_i^dag a_j + h.c.) - mu sum_i n_i` over NN, NNN and
//! third-in-hexagon bonds, or equivalently
//! `H = 6 sum_hex a_hex^dag a_hex - (mu + 2) N_op` with hexagon weights.
//! Twist angles enter as phases on the hopping elements.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::bloch::torus_momenta;
use crate::error::{Error, Result};
use crate::geometry::{quantum_metric, Method};
use crate::lattice::{Boundary, Lattice, HEXAGON_OFFSETS};
use crate::linalg::{hermitian_eigh, hermitian_eigenvalues, symmetric_eigenvalues, C64};

/// Area of the unit cell spanned by `e1`, `e2`.
pub const CELL_AREA: f64 = 0.866_025_403_784_438_6;

/// Hexagon weights `beta_1..beta_6` at local positions 1..6.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HexWeights(pub [C64; 6]);

impl HexWeights {
    pub fn uniform() -> HexWeights {
        HexWeights([C64::new(1.0 / 6f64.sqrt(), 0.0); 6])
    }

    pub fn new(beta: [C64; 6]) -> Result<HexWeights> {
        let norm = beta.iter().map(|b| b.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::BetaNormalization { norm });
        }
        Ok(HexWeights(beta))
    }

    /// Weights with `beta_{i+3} = conj(beta_i)` from three free amplitudes,
    /// normalised.
    pub fn c2t_from_half(half: [C64; 3]) -> HexWeights {
        let full = [half[0], half[1], half[2], half[0].conj(), half[1].conj(), half[2].conj()];
        let norm = full.iter().map(|b| b.norm_sqr()).sum::<f64>().sqrt();
        HexWeights(full.map(|b| b / norm))
    }

    /// Distance from the nearest `beta_{i+3} = e^{i phi} conj(beta_i)` with a
    /// common phase; zero for symmetric weights.
    pub fn c2t_defect(&self) -> f64 {
        let b = &self.0;
        // best common phase from the least-squares fit
        let s: C64 = (0..3).map(|i| b[i + 3] * b[i]).sum();
        let phase = if s.norm() > 0.0 { s / s.norm() } else { C64::new(1.0, 0.0) };
        (0..3)
            .map(|i| (b[i + 3] - phase * b[i].conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|b| b.norm_sqr()).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TwistGauge {
    /// Phase spread uniformly along every bond, `exp(i theta . d / L)`.
    #[default]
    Uniform,
    /// Phase `exp(i theta . w)` only on bonds with winding `w` across the seam.
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist {
    pub theta1: f64,
    pub theta2: f64,
    pub gauge: TwistGauge,
}

impl Twist {
    pub fn new(theta1: f64, theta2: f64) -> Twist {
        Twist {
            theta1,
            theta2,
            gauge: TwistGauge::Uniform,
        }
    }

    pub fn with_gauge(self, gauge: TwistGauge) -> Twist {
        Twist { gauge, ..self }
    }

    /// Phase on the coefficient of `a_i^dag a_j` for a hop from `i` to the
    /// site at unwrapped displacement `disp` (half-cell units).
    fn phase(&self, lat: &Lattice, i: usize, disp: [i64; 2]) -> C64 {
        let arg = match self.gauge {
            TwistGauge::Uniform => {
                self.theta1 * disp[0] as f64 / (2 * lat.l1()) as f64
                    + self.theta2 * disp[1] as f64 / (2 * lat.l2()) as f64
            }
            TwistGauge::Boundary => {
                let w = lat.winding(i, disp);
                self.theta1 * w[0] as f64 + self.theta2 * w[1] as f64
            }
        };
        C64::from_polar(1.0, arg)
    }
}

#[derive(Debug, Clone)]
pub struct HoppingMatrix {
    pub matrix: DMatrix<C64>,
    pub mu: f64,
    pub twist: Twist,
    pub beta: Option<HexWeights>,
    /// Non-fatal: nonzero when the weights break `C2T`.
    pub c2t_defect: f64,
}

impl HoppingMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_real(&self) -> bool {
        self.matrix.iter().all(|v| v.im == 0.0)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint())
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Option<DMatrix<C64>>,
}

/// Builds the hopping matrix. Without `beta` the bond form is used; with
/// `beta` the hexagon form `6 sum beta_p^* beta_q a_p^dag a_q - (mu + 2)`.
pub fn build_hamiltonian(
    lat: &Lattice,
    mu: f64,
    beta: Option<&HexWeights>,
    twist: Option<Twist>,
) -> Result<HoppingMatrix> {
    let n = lat.num_sites();
    let twist = twist.unwrap_or_default();
    let mut h = DMatrix::<C64>::zeros(n, n);
    let mut c2t_defect = 0.0;
    match beta {
        None => {
            for (_, b) in lat.all_bonds() {
                let p = twist.phase(lat, b.a, b.disp);
                h[(b.a, b.b)] += p;
                h[(b.b, b.a)] += p.conj();
            }
            for i in 0..n {
                h[(i, i)] -= C64::new(mu, 0.0);
            }
        }
        Some(w) => {
            let norm = w.norm();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(Error::BetaNormalization { norm });
            }
            c2t_defect = w.c2t_defect();
            for hex in lat.hexagons() {
                for p in 0..6 {
                    for q in 0..6 {
                        let d = [
                            HEXAGON_OFFSETS[q][0] - HEXAGON_OFFSETS[p][0],
                            HEXAGON_OFFSETS[q][1] - HEXAGON_OFFSETS[p][1],
                        ];
                        let (sp, sq) = (hex.sites[p], hex.sites[q]);
                        h[(sp, sq)] += w.0[p].conj() * w.0[q] * 6.0 * twist.phase(lat, sp, d);
                    }
                }
            }
            for i in 0..n {
                h[(i, i)] -= C64::new(mu + 2.0, 0.0);
            }
        }
    }
    Ok(HoppingMatrix {
        matrix: h,
        mu,
        twist,
        beta: beta.copied(),
        c2t_defect,
    })
}

/// `6 sum_hex a_hex^dag a_hex` with uniform weights, assembled directly
/// from the hexagon membership table.
pub fn hexagon_projector_sum(lat: &Lattice) -> DMatrix<C64> {
    let n = lat.num_sites();
    let mut h = DMatrix::<C64>::zeros(n, n);
    for hex in lat.hexagons() {
        for &i in &hex.sites {
            for &j in &hex.sites {
                h[(i, j)] += C64::new(1.0, 0.0);
            }
        }
    }
    h
}

pub fn single_particle_spectrum(h: &HoppingMatrix, with_vectors: bool) -> SpectrumResult {
    if with_vectors {
        let (eigenvalues, vecs) = hermitian_eigh(h.matrix.clone());
        return SpectrumResult {
            eigenvalues,
            eigenvectors: Some(vecs),
        };
    }
    let eigenvalues = if h.is_real() {
        symmetric_eigenvalues(h.matrix.map(|v| v.re))
    } else {
        hermitian_eigenvalues(h.matrix.clone())
    };
    SpectrumResult {
        eigenvalues,
        eigenvectors: None,
    }
}

/// Sorted multiset `{E_i(k)}` over the discrete momenta of an `l1 x l2` torus.
pub fn bloch_multiset(l1: usize, l2: usize, mu: f64) -> Vec<f64> {
    let mut e: Vec<f64> = torus_momenta(l1, l2)
        .into_iter()
        .flat_map(|k| crate::bloch::band_solution(k, mu).energies)
        .collect();
    e.sort_by(f64::total_cmp);
    e
}

/// Hamiltonian block at transverse momentum `k2` in the basis `(m1, sublattice)`.
/// Works for cylinders and tori; in the latter `m1` wraps.
pub fn sector_hamiltonian(lat: &Lattice, mu: f64, k2: f64) -> DMatrix<C64> {
    let dim = 3 * lat.l1();
    let mut h = DMatrix::<C64>::zeros(dim, dim);
    let local = |s: usize| {
        let site = lat.site(s);
        3 * site.cell.0 + site.sublattice.ordinal()
    };
    // one representative per a2-translation class
    for (_, b) in lat.all_bonds().filter(|(_, b)| lat.site(b.a).cell.1 == 0) {
        let xa = lat.half_position(b.a);
        let sb = lat.site(b.b);
        let y_target = xa[1] + b.disp[1];
        let sub_off = [0, 1, 1][sb.sublattice.ordinal()];
        let dm2 = (y_target - sub_off).div_euclid(2) - lat.site(b.a).cell.1 as i64;
        let p = C64::from_polar(1.0, k2 * dm2 as f64);
        h[(local(b.a), local(b.b))] += p;
        h[(local(b.b), local(b.a))] += p.conj();
    }
    for i in 0..dim {
        h[(i, i)] -= C64::new(mu, 0.0);
    }
    h
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectorSpectrum {
    /// Transverse momentum index `m2`; `k2 = 2 pi m2 / L2`.
    pub m2: usize,
    pub k2: f64,
    pub energies: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CylinderReport {
    pub sectors: Vec<SectorSpectrum>,
    pub mid_gap: f64,
    /// Levels below `mid_gap`, per sector.
    pub below_mid: Vec<usize>,
    /// Smallest `|E - mid_gap|` over all sectors.
    pub closest_to_mid: f64,
    /// Smallest gap between levels `2 L1` and `2 L1 + 1` over sectors.
    pub min_sector_gap: f64,
    /// Largest `|E + 2 + mu|` over the lowest `2 L1` levels of every sector.
    pub valence_flatness: f64,
    /// Levels within `FLAT_TOL` of `-2 - mu`, per sector.
    pub flat_count: Vec<usize>,
    /// Smallest distance from the flat energy to any level above it.
    pub flat_detachment: f64,
    /// True when the count below `mid_gap` changes between sectors or a level
    /// sits within `FLAT_TOL` of it.
    pub mid_gap_crossed: bool,
}

/// Tolerance used to classify cylinder levels as flat.
pub const FLAT_TOL: f64 = 1e-9;

pub fn cylinder_spectrum(lat: &Lattice, mu: f64) -> Result<CylinderReport> {
    if lat.boundary() != Boundary::Cylinder {
        return Err(Error::RequiresCylinder);
    }
    let l2 = lat.l2();
    let sectors: Vec<SectorSpectrum> = (0..l2)
        .into_par_iter()
        .map(|m2| {
            let k2 = 2.0 * PI * m2 as f64 / l2 as f64;
            SectorSpectrum {
                m2,
                k2,
                energies: hermitian_eigenvalues(sector_hamiltonian(lat, mu, k2)),
            }
        })
        .collect();
    let mid_gap = ((-2.0 - mu) + (1.0 - mu)) / 2.0;
    let nval = 2 * lat.l1();
    let below_mid: Vec<usize> = sectors
        .iter()
        .map(|s| s.energies.iter().filter(|&&e| e < mid_gap).count())
        .collect();
    let closest_to_mid = sectors
        .iter()
        .flat_map(|s| s.energies.iter().map(|e| (e - mid_gap).abs()))
        .fold(f64::INFINITY, f64::min);
    let min_sector_gap = sectors
        .iter()
        .map(|s| s.energies[nval] - s.energies[nval - 1])
        .fold(f64::INFINITY, f64::min);
    let valence_flatness = sectors
        .iter()
        .flat_map(|s| s.energies[..nval].iter().map(|e| (e + 2.0 + mu).abs()))
        .fold(0.0, f64::max);
    let flat = -2.0 - mu;
    let flat_count: Vec<usize> = sectors
        .iter()
        .map(|s| s.energies.iter().filter(|&&e| (e - flat).abs() <= FLAT_TOL).count())
        .collect();
    let flat_detachment = sectors
        .iter()
        .flat_map(|s| s.energies.iter().filter(|&&e| e > flat + FLAT_TOL).map(|e| e - flat))
        .fold(f64::INFINITY, f64::min);
    let mid_gap_crossed = below_mid.windows(2).any(|w| w[0] != w[1]) || closest_to_mid <= FLAT_TOL;
    Ok(CylinderReport {
        sectors,
        mid_gap,
        below_mid,
        closest_to_mid,
        min_sector_gap,
        valence_flatness,
        flat_count,
        flat_detachment,
        mid_gap_crossed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManyBodyMetricResult {
    /// `[[g11, g12], [g12, g22]]` at zero twist.
    pub g: [[f64; 2]; 2],
    pub trace: f64,
    /// `(1 / L1 L2) sum_k Tr g(k)` over the torus momenta.
    pub rhs: f64,
    /// `4 pi A |chi| / (L1 L2)`.
    pub bound: f64,
    pub particle_number: usize,
    pub step: f64,
}

/// Occupied orbitals (columns) of the twisted Hamiltonian.
fn slater_orbitals(lat: &Lattice, mu: f64, twist: Twist, nocc: usize) -> Result<DMatrix<C64>> {
    let h = build_hamiltonian(lat, mu, None, Some(twist))?;
    let (vals, vecs) = hermitian_eigh(h.matrix);
    let gap = vals[nocc] - vals[nocc - 1];
    if gap < 1e-8 {
        return Err(Error::GapClosed {
            gap,
            theta1: twist.theta1,
            theta2: twist.theta2,
        });
    }
    Ok(vecs.columns(0, nocc).into_owned())
}

/// Many-body metric of the filled flat bands from determinant overlaps.
///
/// With `F(v) = -ln |<psi(0)|psi(h v)>|^2` the symmetric quotient
/// `q(v) = (F(v) + F(-v)) / (2 h^2)` equals `v^T g v` up to `O(h^2)`; the
/// three directions `e1`, `e2`, `e1 + e2` fix all entries. The logarithm of
/// the modulus is insensitive to the arbitrary phases of the eigenvectors.
pub fn many_body_metric(lat: &Lattice, mu: f64, step: f64) -> Result<ManyBodyMetricResult> {
    if !lat.is_torus() {
        return Err(Error::RequiresTorus);
    }
    if !(mu > -2.0 && mu < 1.0) {
        return Err(Error::InvalidParameter {
            name: "mu",
            reason: format!("{mu} outside (-2, 1)"),
        });
    }
    if !(1e-4..=1e-2).contains(&step) {
        return Err(Error::InvalidParameter {
            name: "step",
            reason: format!("{step} outside [1e-4, 1e-2]"),
        });
    }
    let nocc = 2 * lat.num_sites() / 3;
    let psi0 = slater_orbitals(lat, mu, Twist::default(), nocc)?;
    let neg_log_fid = |t1: f64, t2: f64| -> Result<f64> {
        let psi = slater_orbitals(lat, mu, Twist::new(t1, t2), nocc)?;
        let overlap = (psi0.adjoint() * psi).determinant();
        Ok(-overlap.norm_sqr().ln())
    };
    let q = |v: [f64; 2]| -> Result<f64> {
        let plus = neg_log_fid(step * v[0], step * v[1])?;
        let minus = neg_log_fid(-step * v[0], -step * v[1])?;
        Ok((plus + minus) / (2.0 * step * step))
    };
    let g11 = q([1.0, 0.0])?;
    let g22 = q([0.0, 1.0])?;
    let g12 = (q([1.0, 1.0])? - g11 - g22) / 2.0;

    let (l1, l2) = (lat.l1(), lat.l2());
    let rhs = torus_momenta(l1, l2)
        .into_iter()
        .map(|k| {
            let (a, _, b) = quantum_metric(k, Method::AnalyticN);
            a + b
        })
        .sum::<f64>()
        / (l1 * l2) as f64;
    Ok(ManyBodyMetricResult {
        g: [[g11, g12], [g12, g22]],
        trace: g11 + g22,
        rhs,
        bound: 4.0 * PI * CELL_AREA / (l1 * l2) as f64,
        particle_number: nocc,
        step,
    })
}

/// Smallest positive eigenvalue of `6 sum_hex a~^dag a~` and the dimension of
/// its kernel.
pub fn hexagon_gap(lat: &Lattice, beta: &HexWeights) -> Result<(f64, usize)> {
    let h = build_hamiltonian(lat, -2.0, Some(beta), None)?;
    let e = hermitian_eigenvalues(h.matrix);
    let kernel = e.iter().filter(|v| v.abs() < 1e-9).count();
    let gap = e.iter().copied().filter(|v| *v >= 1e-9).fold(f64::INFINITY, f64::min);
    Ok((gap, kernel))
}

/// CSV with columns `ky,index,energy`.
pub fn cylinder_csv(report: &CylinderReport) -> String {
    let mut out = String::from("ky,index,energy\n");
    for s in &report.sectors {
        for (i, e) in s.energies.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", crate::io::fmt_f64(s.k2), i, crate::io::fmt_f64(*e)));
        }
    }
    out
}
