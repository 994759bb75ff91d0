//! Depth-one diagonal phase circuit `U(alpha)`.
//!
//! Each nearest-neighbour bond carries the gate `exp(i sigma alpha n_a n_b)`.
//! Bonds are owned by the hexagon in which they are an edge; the edge leaving
//! local position `p` gets `sigma = +1` for `p = 0, 1, 2` and `-1` for
//! `p = 3, 4, 5`, so opposite edges carry conjugate gates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{ladder_on_basis, BasisState, FockBasis, Ladder, ManyBodyOperator, SparseState};
use crate::lattice::{Lattice, NeighborKind};
use crate::linalg::{CsrMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gate {
    pub a: usize,
    pub b: usize,
    pub hexagon: usize,
    /// Local position of `a`; `b` sits at `position + 1 mod 6`.
    pub position: usize,
    /// `+1`, `-1`, or `0` for a removed gate.
    pub sign: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateLayout {
    n_sites: usize,
    gates: Vec<Gate>,
}

/// Sign of the edge leaving local position `p`.
pub fn edge_sign(p: usize) -> i8 {
    if p < 3 {
        1
    } else {
        -1
    }
}

impl GateLayout {
    pub fn new(lat: &Lattice) -> GateLayout {
        let gates = lat
            .hexagons()
            .iter()
            .flat_map(|h| {
                (0..6).map(move |p| Gate {
                    a: h.sites[p],
                    b: h.sites[(p + 1) % 6],
                    hexagon: h.id,
                    position: p,
                    sign: edge_sign(p),
                })
            })
            .collect();
        GateLayout {
            n_sites: lat.num_sites(),
            gates,
        }
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Copy with the sign of gate `index` negated.
    pub fn with_flipped(&self, index: usize) -> GateLayout {
        let mut out = self.clone();
        out.gates[index].sign = -out.gates[index].sign;
        out
    }

    /// Copy with every gate joining the two sides of `in_a` removed.
    pub fn without_crossing(&self, in_a: impl Fn(usize) -> bool) -> GateLayout {
        let mut out = self.clone();
        for g in &mut out.gates {
            if in_a(g.a) != in_a(g.b) {
                g.sign = 0;
            }
        }
        out
    }

    /// `sum_bonds sigma n_a n_b` on a basis state.
    pub fn phase_count(&self, bits: BasisState) -> i64 {
        self.gates
            .iter()
            .filter(|g| bits >> g.a & 1 == 1 && bits >> g.b & 1 == 1)
            .map(|g| i64::from(g.sign))
            .sum()
    }

    /// `(neighbour, sigma)` for every gate touching `site`.
    pub fn incident(&self, site: usize) -> Vec<(usize, i8)> {
        self.gates
            .iter()
            .filter_map(|g| {
                if g.a == site {
                    Some((g.b, g.sign))
                } else if g.b == site {
                    Some((g.a, g.sign))
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "n_sites": self.n_sites,
            "gates": self.gates,
        })
    }
}

pub fn apply_circuit(lat: &Lattice, state: &SparseState, alpha: f64) -> SparseState {
    apply_layout(&GateLayout::new(lat), state, alpha)
}

pub fn apply_layout(layout: &GateLayout, state: &SparseState, alpha: f64) -> SparseState {
    if alpha == 0.0 {
        return state.clone();
    }
    state.map_diagonal(|b| C64::from_polar(1.0, alpha * layout.phase_count(b) as f64))
}

/// Phase `exp(i alpha sum_j sigma_ij n_j)` picked up by dressing site `i`.
fn dressing_phase(incident: &[(usize, i8)], bits: BasisState, alpha: f64) -> f64 {
    alpha
        * incident
            .iter()
            .filter(|(j, _)| bits >> j & 1 == 1)
            .map(|&(_, s)| f64::from(s))
            .sum::<f64>()
}

fn check_dense_size(n: usize) -> Result<()> {
    if n > 14 {
        return Err(Error::SizeLimit {
            what: "modes for dense operator checks",
            size: n,
            limit: 14,
        });
    }
    Ok(())
}

/// `a_i^dag prod_j (1 - (1 - e^{i sigma_ij alpha}) n_j)` on the full space.
pub fn dressed_creation(layout: &GateLayout, site: usize, alpha: f64) -> Result<ManyBodyOperator> {
    let n = layout.n_sites();
    check_dense_size(n)?;
    if site >= n {
        return Err(Error::InvalidSite { site, count: n });
    }
    let incident = layout.incident(site);
    let basis = FockBasis::full(n)?;
    let matrix = basis.operator_matrix(|b| {
        let Some((t, s)) = ladder_on_basis(b, site, Ladder::Create) else {
            return Vec::new();
        };
        // the number operators act on b; none of them is site i itself
        let factor: C64 = incident
            .iter()
            .map(|&(j, sg)| {
                let nj = (b >> j & 1) as f64;
                C64::new(1.0, 0.0) - (C64::new(1.0, 0.0) - C64::from_polar(1.0, f64::from(sg) * alpha)) * nj
            })
            .product();
        vec![(t, factor * f64::from(s))]
    })?;
    Ok(ManyBodyOperator { basis, matrix })
}

/// `U a_i^dag U^dag` from explicit matrices.
pub fn conjugated_creation(layout: &GateLayout, site: usize, alpha: f64) -> Result<ManyBodyOperator> {
    let n = layout.n_sites();
    check_dense_size(n)?;
    if site >= n {
        return Err(Error::InvalidSite { site, count: n });
    }
    let basis = FockBasis::full(n)?;
    let u = basis.operator_matrix(|b| vec![(b, C64::from_polar(1.0, alpha * layout.phase_count(b) as f64))])?;
    let create = basis.operator_matrix(|b| {
        ladder_on_basis(b, site, Ladder::Create)
            .map(|(t, s)| vec![(t, C64::new(f64::from(s), 0.0))])
            .unwrap_or_default()
    })?;
    let matrix: CsrMatrix = u.product(&create).product(&u.adjoint());
    Ok(ManyBodyOperator { basis, matrix })
}

/// `max |formula - U a^dag U^dag|` for one site.
pub fn dressed_operator_defect(layout: &GateLayout, site: usize, alpha: f64) -> Result<f64> {
    let f = dressed_creation(layout, site, alpha)?;
    let c = conjugated_creation(layout, site, alpha)?;
    Ok(f.matrix.max_abs_diff(&c.matrix))
}

/// One-body terms `(i, j, multiplicity)` of `sum_hex sum_{p,q} a_p^dag a_q`.
fn hexagon_terms(lat: &Lattice) -> Vec<(usize, usize, f64)> {
    let mut terms: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for h in lat.hexagons() {
        for &i in &h.sites {
            for &j in &h.sites {
                *terms.entry((i, j)).or_insert(0.0) += 1.0;
            }
        }
    }
    terms.into_iter().map(|((i, j), c)| (i, j, c)).collect()
}

/// `sum_hex sum_{i,j in hex} a'_i^dag a'_j - (mu + 2) sum_i n_i` with the
/// default layout.
pub fn transformed_hamiltonian(lat: &Lattice, basis: &FockBasis, mu: f64, alpha: f64) -> Result<ManyBodyOperator> {
    transformed_hamiltonian_with(lat, &GateLayout::new(lat), basis, mu, alpha)
}

pub fn transformed_hamiltonian_with(
    lat: &Lattice,
    layout: &GateLayout,
    basis: &FockBasis,
    mu: f64,
    alpha: f64,
) -> Result<ManyBodyOperator> {
    if basis.n_modes() != lat.num_sites() {
        return Err(Error::InvalidParameter {
            name: "basis",
            reason: format!("{} modes for {} sites", basis.n_modes(), lat.num_sites()),
        });
    }
    let incident: Vec<Vec<(usize, i8)>> = (0..lat.num_sites()).map(|i| layout.incident(i)).collect();
    let terms = hexagon_terms(lat);
    let shift = mu + 2.0;
    let matrix = basis.operator_matrix(|b| {
        let mut out: Vec<(BasisState, C64)> = terms
            .iter()
            .filter_map(|&(i, j, c)| {
                let (mid, s1) = ladder_on_basis(b, j, Ladder::Annihilate)?;
                let (t, s2) = ladder_on_basis(mid, i, Ladder::Create)?;
                let phase = if i == j {
                    0.0
                } else {
                    dressing_phase(&incident[i], mid, alpha) - dressing_phase(&incident[j], mid, alpha)
                };
                Some((t, C64::from_polar(c * f64::from(s1 * s2), phase)))
            })
            .collect();
        out.push((b, C64::new(-shift * b.count_ones() as f64, 0.0)));
        out
    })?;
    Ok(ManyBodyOperator {
        basis: basis.clone(),
        matrix,
    })
}

/// Sites whose occupation can enter the `a'_i^dag a'_j` matrix element.
pub fn term_support(layout: &GateLayout, i: usize, j: usize) -> Vec<usize> {
    let mut s: Vec<usize> = [i, j]
        .into_iter()
        .chain(layout.incident(i).into_iter().map(|x| x.0))
        .chain(layout.incident(j).into_iter().map(|x| x.0))
        .collect();
    s.sort_unstable();
    s.dedup();
    s
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalityReport {
    pub terms: usize,
    /// Terms whose support leaves the hexagon and its corner triangles.
    pub violations: usize,
    pub max_support: usize,
}

/// Checks that every `a'^dag a'` term stays on its hexagon plus the
/// triangles attached to the hexagon's corners.
pub fn locality_report(lat: &Lattice, layout: &GateLayout) -> LocalityReport {
    let mut terms = 0;
    let mut violations = 0;
    let mut max_support = 0;
    for h in lat.hexagons() {
        let mut region: Vec<usize> = h.sites.to_vec();
        for &s in &h.sites {
            region.extend(lat.nn_neighbors(s));
        }
        for &i in &h.sites {
            for &j in &h.sites {
                let support = term_support(layout, i, j);
                terms += 1;
                max_support = max_support.max(support.len());
                if support.iter().any(|s| !region.contains(s)) {
                    violations += 1;
                }
            }
        }
    }
    LocalityReport {
        terms,
        violations,
        max_support,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayoutReport {
    pub hexagons: usize,
    pub gates: usize,
    pub nn_bonds: usize,
}

/// Verifies `u_{p,p+1} = conj(u_{p+3,p+4})` on every hexagon and that the
/// gates cover each nearest-neighbour bond exactly once.
pub fn c2t_layout_check(lat: &Lattice, layout: &GateLayout) -> Result<LayoutReport> {
    let mut by_hex: BTreeMap<usize, [i8; 6]> = BTreeMap::new();
    for g in layout.gates() {
        by_hex.entry(g.hexagon).or_insert([0; 6])[g.position] = g.sign;
    }
    for (&h, signs) in &by_hex {
        for p in 0..3 {
            if signs[p] == 0 || signs[p] != -signs[p + 3] {
                return Err(Error::LayoutViolation {
                    rule: "conjugate opposite gates",
                    hexagon: h,
                });
            }
        }
    }
    let key = |a: usize, b: usize| (a.min(b), a.max(b));
    let mut count: BTreeMap<(usize, usize), i64> = BTreeMap::new();
    for b in lat.neighbor_pairs(NeighborKind::Nearest) {
        *count.entry(key(b.a, b.b)).or_insert(0) += 1;
    }
    for g in layout.gates() {
        match count.get_mut(&key(g.a, g.b)) {
            Some(c) => *c -= 1,
            None => {
                return Err(Error::LayoutViolation {
                    rule: "gate on a non-bond",
                    hexagon: g.hexagon,
                })
            }
        }
    }
    if let Some((&(a, _), _)) = count.iter().find(|(_, &c)| c != 0) {
        let hexagon = lat.memberships(a).first().map(|m| m.0).unwrap_or(0);
        return Err(Error::LayoutViolation {
            rule: "each bond covered exactly once",
            hexagon,
        });
    }
    Ok(LayoutReport {
        hexagons: by_hex.len(),
        gates: layout.gates().len(),
        nn_bonds: lat.neighbor_pairs(NeighborKind::Nearest).len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{build_ground_state, many_body_hamiltonian, Representation};
    use crate::lattice::{build_lattice, Boundary};
    use std::f64::consts::PI;

    fn torus(l1: usize, l2: usize) -> Lattice {
        build_lattice(l1, l2, Boundary::Torus).unwrap()
    }

    #[test]
    fn sign_pattern() {
        assert_eq!((0..6).map(edge_sign).collect::<Vec<_>>(), vec![1, 1, 1, -1, -1, -1]);
    }

    #[test]
    fn default_layout_passes_and_mutation_fails() {
        for (l1, l2) in [(2, 2), (3, 2), (3, 3)] {
            let lat = torus(l1, l2);
            let layout = GateLayout::new(&lat);
            let r = c2t_layout_check(&lat, &layout).unwrap();
            assert_eq!(r.gates, r.nn_bonds);
            assert_eq!(r.gates, 2 * lat.num_sites());
        }
        let lat = torus(3, 2);
        let bad = GateLayout::new(&lat).with_flipped(4);
        assert!(matches!(
            c2t_layout_check(&lat, &bad),
            Err(Error::LayoutViolation { hexagon: 0, .. })
        ));
    }

    #[test]
    fn single_positive_bond_gives_one_phase() {
        let lat = torus(3, 3);
        let layout = GateLayout::new(&lat);
        let g = layout.gates().iter().find(|g| g.sign == 1).unwrap();
        let psi = SparseState::basis(27, (1 << g.a) | (1 << g.b));
        let out = apply_circuit(&lat, &psi, 0.7);
        let amp = out.amplitude((1 << g.a) | (1 << g.b));
        assert!((amp - C64::from_polar(1.0, 0.7)).norm() < 1e-15);
    }

    #[test]
    fn circuit_is_unitary_and_invertible() {
        let lat = torus(3, 2);
        let psi = build_ground_state(&lat, None).unwrap();
        assert_eq!(apply_circuit(&lat, &psi, 0.0), psi);
        let fwd = apply_circuit(&lat, &psi, 1.3);
        assert!((fwd.norm() - psi.norm()).abs() < 1e-15 * psi.len() as f64);
        let back = apply_circuit(&lat, &fwd, -1.3);
        for (b, a) in psi.iter() {
            assert!((back.amplitude(b) - a).norm() < 1e-15);
        }
        assert_eq!(fwd.particle_numbers(), psi.particle_numbers());
    }

    #[test]
    fn dressed_operator_matches_conjugation() {
        let lat = torus(2, 2);
        let layout = GateLayout::new(&lat);
        for site in 0..12 {
            assert!(dressed_operator_defect(&layout, site, 0.4).unwrap() <= 1e-12);
        }
        let plain = dressed_creation(&layout, 0, 0.0).unwrap();
        let bare = conjugated_creation(&layout, 0, 0.0).unwrap();
        assert_eq!(plain.matrix.max_abs_diff(&bare.matrix), 0.0);
        let d = dressed_creation(&layout, 5, 0.4).unwrap();
        assert_eq!(d.matrix.product(&d.matrix).nnz(), 0);
    }

    #[test]
    fn zero_angle_reproduces_quadratic_hamiltonian() {
        let lat = torus(2, 2);
        let basis = FockBasis::fixed(12, 7).unwrap();
        let hp = transformed_hamiltonian(&lat, &basis, 0.3, 0.0).unwrap();
        let h = many_body_hamiltonian(&lat, 0.3, 0.0, Representation::FixedNumber(7)).unwrap();
        assert!(hp.matrix.max_abs_diff(&h.matrix) < 1e-14);
    }

    #[test]
    fn transformed_hamiltonian_is_conjugated_hamiltonian() {
        let lat = torus(2, 2);
        let basis = FockBasis::fixed(12, 6).unwrap();
        let layout = GateLayout::new(&lat);
        let alpha = 0.9;
        let hp = transformed_hamiltonian(&lat, &basis, 0.0, alpha).unwrap();
        assert!(hp.matrix.hermiticity_defect() < 1e-14);
        let h = many_body_hamiltonian(&lat, 0.0, 0.0, Representation::FixedNumber(6)).unwrap();
        let u = basis
            .operator_matrix(|b| vec![(b, C64::from_polar(1.0, alpha * layout.phase_count(b) as f64))])
            .unwrap();
        let conj = u.product(&h.matrix).product(&u.adjoint());
        assert!(conj.max_abs_diff(&hp.matrix) < 1e-13);
    }

    #[test]
    fn spectrum_independent_of_angle() {
        let lat = torus(2, 2);
        let basis = FockBasis::fixed(12, 5).unwrap();
        let reference = transformed_hamiltonian(&lat, &basis, 0.0, 0.0).unwrap().eigenvalues();
        for alpha in [0.3, 1.0, PI / 2.0, 2.5, PI] {
            let e = transformed_hamiltonian(&lat, &basis, 0.0, alpha).unwrap().eigenvalues();
            assert!(crate::linalg::spectrum_distance(&reference, &e) < 1e-9);
        }
    }

    #[test]
    fn terms_are_local() {
        let lat = torus(3, 3);
        let layout = GateLayout::new(&lat);
        let r = locality_report(&lat, &layout);
        assert_eq!(r.violations, 0);
        assert_eq!(r.terms, 9 * 36);
        // the matrix element of a'^dag_i a'_j ignores every site outside its support
        let (i, j) = (lat.hexagons()[0].sites[0], lat.hexagons()[0].sites[3]);
        let support = term_support(&layout, i, j);
        let incident_i = layout.incident(i);
        let incident_j = layout.incident(j);
        let base: u64 = 1 << j;
        let element = |bits: u64| {
            let mid = bits & !(1 << j);
            dressing_phase(&incident_i, mid, 0.8) - dressing_phase(&incident_j, mid, 0.8)
        };
        let e0 = element(base);
        for s in 0..27 {
            if s != i && s != j && !support.contains(&s) {
                assert_eq!(element(base | 1 << s), e0);
            }
        }
    }

    #[test]
    fn cut_crossing_removal() {
        let lat = torus(3, 2);
        let layout = GateLayout::new(&lat);
        let in_a = |s: usize| lat.site(s).cell.0 == 0;
        let inner = layout.without_crossing(in_a);
        assert!(inner
            .gates()
            .iter()
            .all(|g| g.sign == 0 || in_a(g.a) == in_a(g.b)));
        assert!(inner.gates().iter().any(|g| g.sign == 0));
    }
}
