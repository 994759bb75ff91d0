//! Entanglement spectra: free-fermion correlation-matrix spectra on thin tori
//! and exact Schmidt spectra of Fock states, resolved by transverse momentum.
//!
//! Subsystem A is always the first `cut` cell columns (`m1 < cut`). Because
//! the flat site order is column-major in `m1`, every A mode precedes every B
//! mode and a basis state splits as `|x_A>|x_B>` without a fermionic sign.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::f64::consts::PI;

use crate::bloch::{n_hat, KPoint};
use crate::error::{Error, Result};
use crate::fock::{BasisState, SparseState};
use crate::io::{csv_from_cells, fmt_f64};
use crate::lattice::{Lattice, Sublattice};
use crate::linalg::{hermitian_eigenvalues, C64};

pub const EPS_CLAMP: f64 = 1e-12;
pub const DEFAULT_EPS_MAX: f64 = 12.0;
/// Hard cap on enumerated many-body levels.
pub const MAX_LEVELS: usize = 200_000;
pub const MAX_SCHMIDT_MODES: usize = 24;
/// A cusp margin must exceed this to count as strict.
pub const CUSP_TOL: f64 = 1e-9;

/// Column offset of each sublattice along `a1`, in cell units.
fn column_offset(sub: usize) -> f64 {
    match sub {
        1 => 0.5,
        _ => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationModes {
    pub l1: usize,
    pub l2: usize,
    pub cut: usize,
    /// `lambda[m2]`: ascending eigenvalues of `G^A` at `k2 = 2 pi m2 / L2`.
    pub lambda: Vec<Vec<f64>>,
}

impl CorrelationModes {
    pub fn all(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.lambda
            .iter()
            .enumerate()
            .flat_map(|(m2, v)| v.iter().map(move |&x| (m2, x)))
    }

    pub fn mode_count(&self) -> usize {
        self.lambda.iter().map(Vec::len).sum()
    }

    /// Modes with `|Lambda - 1/2| < window`.
    pub fn in_gap(&self, window: f64) -> usize {
        self.all().filter(|(_, x)| (x - 0.5).abs() < window).count()
    }

    /// `(near 0, near 1)` counts with threshold `tol`.
    pub fn extremal_counts(&self, tol: f64) -> (usize, usize) {
        let zeros = self.all().filter(|(_, x)| *x < tol).count();
        let ones = self.all().filter(|(_, x)| *x > 1.0 - tol).count();
        (zeros, ones)
    }

    pub fn entropy(&self) -> f64 {
        self.all()
            .map(|(_, x)| {
                let x = x.clamp(EPS_CLAMP, 1.0 - EPS_CLAMP);
                -x * x.ln() - (1.0 - x) * (1.0 - x).ln()
            })
            .sum()
    }

    pub fn to_csv(&self) -> String {
        let mut index = vec![0usize; self.l2];
        let body: Vec<Vec<String>> = self
            .all()
            .map(|(m2, x)| {
                let row = vec![
                    fmt_f64(2.0 * PI * m2 as f64 / self.l2 as f64),
                    index[m2].to_string(),
                    fmt_f64(x),
                ];
                index[m2] += 1;
                row
            })
            .collect();
        csv_from_cells(&["k2", "index", "Lambda"], body)
    }
}

/// Reduced one-body correlation matrix `G^A(k2)` built from the flat-band
/// projector `P(k) = 1 - n_hat n_hat^T` on the torus `k1` grid.
pub fn reduced_correlation(l1: usize, l2: usize, cut: usize, m2: usize) -> Result<DMatrix<C64>> {
    if l1 == 0 || l2 == 0 {
        return Err(Error::DegenerateSize { l1, l2 });
    }
    if cut == 0 || cut > l1 {
        return Err(Error::InvalidParameter {
            name: "cut",
            reason: format!("must lie in 1..={l1}, got {cut}"),
        });
    }
    let k2 = 2.0 * PI * m2 as f64 / l2 as f64;
    let projectors: Vec<_> = (0..l1)
        .map(|m1| {
            let k1 = 2.0 * PI * m1 as f64 / l1 as f64;
            let n = n_hat(KPoint::new(k1, k2));
            (k1, nalgebra::Matrix3::identity() - n * n.transpose())
        })
        .collect();
    let dim = 3 * cut;
    let mut g = DMatrix::<C64>::zeros(dim, dim);
    for r in 0..dim {
        for c in 0..dim {
            let (n, a) = (r / 3, r % 3);
            let (m, b) = (c / 3, c % 3);
            let dx = n as f64 + column_offset(a) - m as f64 - column_offset(b);
            let sum: C64 = projectors
                .iter()
                .map(|(k1, p)| C64::from_polar(p[(a, b)], k1 * dx))
                .sum();
            g[(r, c)] = sum / l1 as f64;
        }
    }
    Ok(g)
}

pub fn correlation_spectrum(l1: usize, l2: usize, cut: usize) -> Result<CorrelationModes> {
    let lambda = (0..l2)
        .into_par_iter()
        .map(|m2| reduced_correlation(l1, l2, cut, m2).map(hermitian_eigenvalues))
        .collect::<Result<Vec<_>>>()?;
    Ok(CorrelationModes { l1, l2, cut, lambda })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ESLevel {
    /// Momentum in units of `2 pi / L2`, mapped to `(-L2/2, L2/2]`.
    pub k: i64,
    /// `N_A - N_ref`.
    pub channel: i64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeSpectrum {
    pub l2: usize,
    pub levels: Vec<ESLevel>,
    /// Absolute entanglement energy of the reference configuration.
    pub offset: f64,
    /// True if the ceiling was not reached before `MAX_LEVELS`.
    pub truncated: bool,
}

pub fn wrap_momentum(k: i64, l2: usize) -> i64 {
    let l = l2 as i64;
    let r = k.rem_euclid(l);
    if 2 * r > l {
        r - l
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    cost: f64,
    last: usize,
    k: i64,
    n: i64,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // min-heap on cost, ties broken by index
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.last.cmp(&self.last))
            .then_with(|| other.k.cmp(&self.k))
            .then_with(|| other.n.cmp(&self.n))
    }
}

/// Many-body levels `eps = -sum_occ log L - sum_unocc log(1 - L)` with
/// `eps <= eps_max` above the reference, which fills the largest
/// `num/den` fraction of modes.
pub fn free_many_body_es(modes: &CorrelationModes, filling: (usize, usize), eps_max: f64) -> Result<FreeSpectrum> {
    let (num, den) = filling;
    if den == 0 || num > den {
        return Err(Error::InvalidParameter {
            name: "filling",
            reason: format!("{num}/{den} is not in [0, 1]"),
        });
    }
    let mut all: Vec<(usize, f64)> = modes
        .all()
        .map(|(m2, x)| (m2, x.clamp(EPS_CLAMP, 1.0 - EPS_CLAMP)))
        .collect();
    all.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let total = all.len();
    let n_ref = total * num / den;

    // optimum: occupy every mode with Lambda > 1/2
    let mut k_opt = 0i64;
    let mut k_ref = 0i64;
    let mut n_opt = 0i64;
    let mut eps_opt = 0.0;
    let mut eps_ref = 0.0;
    let mut flips = Vec::with_capacity(total);
    for (i, &(m2, x)) in all.iter().enumerate() {
        let occ_opt = x > 0.5;
        let occ_ref = i < n_ref;
        eps_opt -= if occ_opt { x.ln() } else { (1.0 - x).ln() };
        eps_ref -= if occ_ref { x.ln() } else { (1.0 - x).ln() };
        if occ_opt {
            k_opt += m2 as i64;
            n_opt += 1;
        }
        if occ_ref {
            k_ref += m2 as i64;
        }
        let (dk, dn) = if occ_opt { (-(m2 as i64), -1) } else { (m2 as i64, 1) };
        flips.push(((x / (1.0 - x)).ln().abs(), dk, dn));
    }
    flips.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let shift = eps_ref - eps_opt;
    let ceiling = eps_max + shift;
    let dk0 = k_opt - k_ref;
    let dn0 = n_opt - n_ref as i64;

    let mut levels = Vec::new();
    let emit = |cost: f64, k: i64, n: i64| ESLevel {
        k: wrap_momentum(dk0 + k, modes.l2),
        channel: dn0 + n,
        epsilon: cost - shift,
    };
    levels.push(emit(0.0, 0, 0));
    let mut heap = BinaryHeap::new();
    let mut truncated = false;
    if let Some(&(c, dk, dn)) = flips.first() {
        heap.push(Node { cost: c, last: 0, k: dk, n: dn });
    }
    while let Some(node) = heap.pop() {
        if node.cost > ceiling {
            break;
        }
        if levels.len() >= MAX_LEVELS {
            truncated = true;
            break;
        }
        levels.push(emit(node.cost, node.k, node.n));
        if let Some(&(c, dk, dn)) = flips.get(node.last + 1) {
            heap.push(Node { cost: node.cost + c, last: node.last + 1, k: node.k + dk, n: node.n + dn });
            let (c0, dk0, dn0) = flips[node.last];
            heap.push(Node {
                cost: node.cost - c0 + c,
                last: node.last + 1,
                k: node.k - dk0 + dk,
                n: node.n - dn0 + dn,
            });
        }
    }
    levels.sort_by(|a, b| a.k.cmp(&b.k).then(a.epsilon.total_cmp(&b.epsilon)).then(a.channel.cmp(&b.channel)));
    Ok(FreeSpectrum { l2: modes.l2, levels, offset: eps_ref, truncated })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchmidtLevel {
    /// Momentum relative to the dominant level, units of `2 pi / L2`;
    /// `None` without momentum resolution.
    pub k: Option<i64>,
    pub n_a: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchmidtSpectrum {
    pub l2: usize,
    pub levels: Vec<SchmidtLevel>,
    /// `-log` of the largest Schmidt probability.
    pub offset: f64,
    /// Particle number in A of the dominant level.
    pub n_ref: usize,
}

pub const SCHMIDT_FLOOR: f64 = 1e-14;

impl SchmidtSpectrum {
    pub fn epsilon(&self, level: &SchmidtLevel) -> f64 {
        -level.lambda.ln() - self.offset
    }

    pub fn total(&self) -> f64 {
        self.levels.iter().map(|l| l.lambda).sum()
    }

    pub fn entropy(&self) -> f64 {
        self.levels
            .iter()
            .filter(|l| l.lambda > 0.0)
            .map(|l| -l.lambda * l.lambda.ln())
            .sum()
    }

    /// Levels above `SCHMIDT_FLOOR` as `(K, channel, eps)`.
    pub fn es_levels(&self) -> Vec<ESLevel> {
        self.levels
            .iter()
            .filter(|l| l.lambda > SCHMIDT_FLOOR)
            .map(|l| ESLevel {
                k: l.k.unwrap_or(0),
                channel: l.n_a as i64 - self.n_ref as i64,
                epsilon: self.epsilon(l),
            })
            .collect()
    }
}

/// Signed image of an occupation pattern under a mode permutation.
fn permute_bits(bits: BasisState, perm: &[usize]) -> (BasisState, i8) {
    let mut out = 0;
    let mut targets = Vec::with_capacity(bits.count_ones() as usize);
    let mut b = bits;
    while b != 0 {
        let i = b.trailing_zeros() as usize;
        b &= b - 1;
        out |= 1 << perm[i];
        targets.push(perm[i]);
    }
    let mut inversions = 0usize;
    for i in 0..targets.len() {
        for j in i + 1..targets.len() {
            if targets[i] > targets[j] {
                inversions += 1;
            }
        }
    }
    (out, if inversions.is_multiple_of(2) { 1 } else { -1 })
}

fn translation_perm(lat: &Lattice) -> Vec<usize> {
    (0..lat.num_sites()).map(|s| lat.translate(s, 0, 1)).collect()
}

/// `<psi|T psi> / <psi|psi>` for the `a2` translation.
pub fn translation_overlap(lat: &Lattice, state: &SparseState) -> Result<C64> {
    let perm = translation_perm(lat);
    let norm2 = state.norm().powi(2);
    if norm2 == 0.0 {
        return Err(Error::ZeroState);
    }
    let mut acc = C64::new(0.0, 0.0);
    for (bits, amp) in state.iter() {
        let (img, s) = permute_bits(bits, &perm);
        acc += state.amplitude(img).conj() * amp * f64::from(s);
    }
    Ok(acc / norm2)
}

/// Exact Schmidt spectrum across the cut between columns `cut - 1` and `cut`
/// (and, on a torus, the wrap-around boundary).
pub fn schmidt_es(state: &SparseState, lat: &Lattice, cut: usize, use_momentum: bool) -> Result<SchmidtSpectrum> {
    let n = lat.num_sites();
    if n > MAX_SCHMIDT_MODES {
        return Err(Error::SizeLimit { what: "schmidt modes", size: n, limit: MAX_SCHMIDT_MODES });
    }
    if state.n_modes() != n {
        return Err(Error::InvalidParameter {
            name: "state",
            reason: format!("{} modes for a {n}-site lattice", state.n_modes()),
        });
    }
    if cut == 0 || cut >= lat.l1() {
        return Err(Error::InvalidParameter {
            name: "cut",
            reason: format!("must lie in 1..{}, got {cut}", lat.l1()),
        });
    }
    let state = state.normalized()?;
    let n_a = 3 * cut * lat.l2();
    let mask_a: BasisState = (1 << n_a) - 1;
    let perm = translation_perm(lat);
    let phase = if use_momentum {
        let overlap = translation_overlap(lat, &state)?;
        if (overlap.norm() - 1.0).abs() > 1e-8 {
            return Err(Error::NotTranslationInvariant { overlap: overlap.norm() });
        }
        Some(overlap)
    } else {
        None
    };

    // blocks by particle number in A
    let mut blocks: BTreeMap<u32, Vec<(BasisState, BasisState, C64)>> = BTreeMap::new();
    for (bits, amp) in state.iter() {
        let a = bits & mask_a;
        blocks.entry(a.count_ones()).or_default().push((a, bits >> n_a, amp));
    }
    let l2 = lat.l2();
    let perm_a = &perm[..n_a];
    let blocks: Vec<_> = blocks.into_iter().collect();
    let per_block: Vec<Vec<(Option<i64>, usize, f64)>> = blocks
        .par_iter()
        .map(|(na, entries)| {
            let mut rows: Vec<BasisState> = entries.iter().map(|e| e.0).collect();
            let mut cols: Vec<BasisState> = entries.iter().map(|e| e.1).collect();
            if phase.is_some() {
                // close the row set under translation
                let mut extra = Vec::new();
                for &r in &rows {
                    let mut x = r;
                    for _ in 0..l2 {
                        x = permute_bits(x, perm_a).0;
                        extra.push(x);
                    }
                }
                rows.extend(extra);
            }
            rows.sort_unstable();
            rows.dedup();
            cols.sort_unstable();
            cols.dedup();
            let row_of: HashMap<BasisState, usize> = rows.iter().enumerate().map(|(i, &r)| (r, i)).collect();
            let mut m = DMatrix::<C64>::zeros(rows.len(), cols.len());
            for &(a, b, amp) in entries {
                let c = cols.binary_search(&b).expect("column present");
                m[(row_of[&a], c)] = amp;
            }
            let rho = &m * m.adjoint();
            let na = *na as usize;
            match phase {
                None => hermitian_eigenvalues(rho).into_iter().map(|l| (None, na, l)).collect(),
                Some(_) => momentum_blocks(&rows, &row_of, perm_a, l2, &rho)
                    .into_iter()
                    .flat_map(|(k, ev)| ev.into_iter().map(move |l| (Some(k), na, l)))
                    .collect(),
            }
        })
        .collect();

    let mut levels: Vec<SchmidtLevel> = per_block
        .into_iter()
        .flatten()
        .map(|(k, n_a, lambda)| SchmidtLevel { k, n_a, lambda: lambda.max(0.0) })
        .collect();
    let dominant = *levels
        .iter()
        .max_by(|a, b| a.lambda.total_cmp(&b.lambda))
        .ok_or(Error::ZeroState)?;
    if let Some(k0) = dominant.k {
        for l in &mut levels {
            l.k = l.k.map(|k| wrap_momentum(k - k0, l2));
        }
    }
    levels.sort_by(|a, b| {
        a.k.cmp(&b.k)
            .then(b.lambda.total_cmp(&a.lambda))
            .then(a.n_a.cmp(&b.n_a))
    });
    Ok(SchmidtSpectrum { l2, levels, offset: -dominant.lambda.ln(), n_ref: dominant.n_a })
}

/// Eigenvalues of `rho` in each translation-momentum block of the row space.
fn momentum_blocks(
    rows: &[BasisState],
    row_of: &HashMap<BasisState, usize>,
    perm_a: &[usize],
    l2: usize,
    rho: &DMatrix<C64>,
) -> Vec<(i64, Vec<f64>)> {
    // orbit of each representative: (row index, accumulated sign) for T^j
    let mut seen = vec![false; rows.len()];
    let mut orbits: Vec<Vec<(usize, f64)>> = Vec::new();
    for (i, &r) in rows.iter().enumerate() {
        if seen[i] {
            continue;
        }
        let mut orbit = Vec::with_capacity(l2);
        let (mut x, mut s) = (r, 1.0);
        for _ in 0..l2 {
            let idx = row_of[&x];
            seen[idx] = true;
            orbit.push((idx, s));
            let (y, t) = permute_bits(x, perm_a);
            x = y;
            s *= f64::from(t);
        }
        orbits.push(orbit);
    }
    (0..l2 as i64)
        .map(|m| {
            let kk = 2.0 * PI * m as f64 / l2 as f64;
            let mut basis: Vec<Vec<(usize, C64)>> = Vec::new();
            for orbit in &orbits {
                let mut v: BTreeMap<usize, C64> = BTreeMap::new();
                for (j, &(idx, s)) in orbit.iter().enumerate() {
                    *v.entry(idx).or_default() += C64::from_polar(s, -kk * j as f64);
                }
                let norm = v.values().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
                if norm > 1e-8 {
                    basis.push(v.into_iter().map(|(i, c)| (i, c / norm)).collect());
                }
            }
            let d = basis.len();
            if d == 0 {
                return (wrap_momentum(m, l2), Vec::new());
            }
            let mut block = DMatrix::<C64>::zeros(d, d);
            for p in 0..d {
                for q in p..d {
                    let mut acc = C64::new(0.0, 0.0);
                    for &(i, ci) in &basis[p] {
                        for &(j, cj) in &basis[q] {
                            acc += ci.conj() * rho[(i, j)] * cj;
                        }
                    }
                    block[(p, q)] = acc;
                    block[(q, p)] = acc.conj();
                }
            }
            (wrap_momentum(m, l2), hermitian_eigenvalues(block))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuspEntry {
    pub alpha: f64,
    pub min_k0: Option<f64>,
    /// Smallest nonzero `|K|` present, units of `2 pi / L2`.
    pub nearest_k: Option<i64>,
    pub min_nearest: Option<f64>,
    /// `min_nearest - min_k0`; positive when the cusp is present.
    pub margin: Option<f64>,
    pub present: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuspReport {
    pub entries: Vec<CuspEntry>,
}

impl CuspReport {
    pub fn all_present(&self) -> bool {
        !self.entries.is_empty() && self.entries.iter().all(|e| e.present)
    }
}

pub fn cusp_entry(alpha: f64, levels: &[ESLevel]) -> CuspEntry {
    let min_at = |k: i64| {
        levels
            .iter()
            .filter(|l| l.k.abs() == k)
            .map(|l| l.epsilon)
            .min_by(f64::total_cmp)
    };
    let min_k0 = min_at(0);
    let nearest_k = levels.iter().map(|l| l.k.abs()).filter(|&k| k > 0).min();
    let min_nearest = nearest_k.and_then(min_at);
    let margin = match (min_k0, min_nearest) {
        (Some(a), Some(b)) => Some(b - a),
        _ => None,
    };
    CuspEntry {
        alpha,
        min_k0,
        nearest_k,
        min_nearest,
        margin,
        present: margin.is_some_and(|m| m > CUSP_TOL),
    }
}

pub fn cusp_report(spectra: &[(f64, Vec<ESLevel>)]) -> CuspReport {
    CuspReport {
        entries: spectra.iter().map(|(a, l)| cusp_entry(*a, l)).collect(),
    }
}

/// `alpha,K,channel,epsilon` rows; `K` in radians.
pub fn es_csv(spectra: &[(f64, usize, Vec<ESLevel>)]) -> String {
    let rows: Vec<Vec<String>> = spectra
        .iter()
        .flat_map(|(alpha, l2, levels)| {
            levels.iter().map(move |l| {
                vec![
                    fmt_f64(*alpha),
                    fmt_f64(2.0 * PI * l.k as f64 / *l2 as f64),
                    l.channel.to_string(),
                    fmt_f64(l.epsilon),
                ]
            })
        })
        .collect();
    csv_from_cells(&["alpha", "K", "channel", "epsilon"], rows)
}

/// Sites of the first `cut` columns.
pub fn subsystem_mask(lat: &Lattice, cut: usize) -> impl Fn(usize) -> bool + '_ {
    move |s| lat.site(s).cell.0 < cut
}

pub fn sublattice_of(index: usize) -> Sublattice {
    [Sublattice::A, Sublattice::B, Sublattice::C][index % 3]
}
