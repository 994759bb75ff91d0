//! Tensor data of the hexagon-simplex PEPS and the operator-formalism
//! evaluation of the state it encodes.
//!
//! Each hexagon carries six virtual fermions `c_{hex,p}` in a single-hole
//! W state. Every site sits in two hexagons; the map
//! `M_j = a_j^dag c'_j c_j + c'_j - c_j` turns the pair of virtual modes at `j`
//! into one physical mode, after which the virtual vacuum is projected out.
//! `c'_j` is the virtual mode of the hexagon in which `j` has local position
//! 2, 3 or 4 (0-based), `c_j` the one where it has 5, 0 or 1.
//!
//! Global fermionic order: virtual mode `6 hex + p` first, then physical
//! site `j` at `6 H + j`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::edge_sign;
use crate::error::{Error, Result};
use crate::fock::SparseState;
use crate::lattice::{Lattice, Sublattice};
use crate::linalg::{C64, ZERO};
use crate::realspace::HexWeights;

/// Upper bound on hexagons for the `6^H` enumeration.
pub const MAX_PEPS_HEXAGONS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WVariant {
    D2,
    D6,
}

/// Matrix-product form of the six-mode single-hole state,
/// `amp(n_1..n_6) = Tr(A^{n_1} ... A^{n_6} Q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WTensor {
    pub variant: WVariant,
    /// `A^0` and `A^1`, indexed `[left][right]`.
    pub a: [DMatrix<f64>; 2],
    pub q: DMatrix<f64>,
}

impl WTensor {
    pub fn new(variant: WVariant) -> WTensor {
        let w = 1.0 / 6f64.sqrt();
        match variant {
            WVariant::D2 => {
                let mut a0 = DMatrix::zeros(2, 2);
                a0[(0, 1)] = w;
                let a1 = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0]));
                let mut q = DMatrix::zeros(2, 2);
                q[(1, 0)] = 1.0;
                WTensor { variant, a: [a0, a1], q }
            }
            WVariant::D6 => {
                let mut a0 = DMatrix::zeros(6, 6);
                a0[(5, 0)] = w;
                let mut a1 = DMatrix::zeros(6, 6);
                for l in 0..5 {
                    a1[(l, l + 1)] = 1.0;
                }
                WTensor {
                    variant,
                    a: [a0, a1],
                    q: DMatrix::identity(6, 6),
                }
            }
        }
    }

    pub fn bond_dim(&self) -> usize {
        self.q.nrows()
    }

    /// Plain matrix-product trace for occupations `bits` (mode `k` on bit `k`).
    pub fn ring_trace(&self, bits: u8) -> f64 {
        let mut m = DMatrix::identity(self.bond_dim(), self.bond_dim());
        for k in 0..6 {
            m *= &self.a[usize::from(bits >> k & 1)];
        }
        (m * &self.q).trace()
    }

    /// Sign turning the ring trace into the fermionic amplitude of
    /// `(1/sqrt 6) sum_k c_k |111111>`. The D2 ring carries the hole parity
    /// itself up to an overall `-1`; the D6 ring is bosonic and needs the
    /// Jordan-Wigner string of the hole.
    pub fn grading(&self, bits: u8) -> f64 {
        match self.variant {
            WVariant::D2 => -1.0,
            WVariant::D6 => {
                let hole = (!bits & 0x3f).trailing_zeros();
                let below = (bits & ((1u8 << hole.min(7)) - 1)).count_ones();
                if below.is_multiple_of(2) {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

/// All 64 fermionic amplitudes of the hexagon simplex state, index = bits.
pub fn contract_w_ring(variant: WVariant) -> [f64; 64] {
    let w = WTensor::new(variant);
    let mut out = [0.0; 64];
    for bits in 0..64u8 {
        out[usize::from(bits)] = w.ring_trace(bits) * w.grading(bits);
    }
    out
}

/// `M^i_{ab}` for `(a^dag)^i (c')^a c^b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapTensor {
    pub entries: [[[f64; 2]; 2]; 2],
}

impl Default for MapTensor {
    fn default() -> Self {
        let mut entries = [[[0.0; 2]; 2]; 2];
        entries[1][1][1] = 1.0;
        entries[0][1][0] = 1.0;
        entries[0][0][1] = -1.0;
        MapTensor { entries }
    }
}

impl MapTensor {
    /// Nonzero `(i, a, b, value)` entries.
    pub fn nonzero(&self) -> Vec<(usize, usize, usize, f64)> {
        let mut v = Vec::new();
        for i in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    let x = self.entries[i][a][b];
                    if x != 0.0 {
                        v.push((i, a, b, x));
                    }
                }
            }
        }
        v
    }

    pub fn with_entry(mut self, i: usize, a: usize, b: usize, value: f64) -> MapTensor {
        self.entries[i][a][b] = value;
        self
    }
}

/// Rank-5 site tensor, index order `[physical, up, left, down, right]`.
/// `left`/`right` are the ring bonds of the `c'` hexagon and `up`/`down` those
/// of the `c` hexagon.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteTensor {
    pub bond_dim: usize,
    data: Vec<f64>,
}

impl SiteTensor {
    fn offset(&self, idx: [usize; 5]) -> usize {
        let d = self.bond_dim;
        (((idx[0] * d + idx[1]) * d + idx[2]) * d + idx[3]) * d + idx[4]
    }

    pub fn get(&self, idx: [usize; 5]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn nonzero(&self) -> Vec<([usize; 5], f64)> {
        let d = self.bond_dim;
        let mut out = Vec::new();
        for p in 0..2 {
            for u in 0..d {
                for l in 0..d {
                    for dn in 0..d {
                        for r in 0..d {
                            let v = self.get([p, u, l, dn, r]);
                            if v != 0.0 {
                                out.push(([p, u, l, dn, r], v));
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Common parity of `physical + sum of bond indices` over nonzero
    /// entries, if there is one. For the D2 ring the bond index is its own
    /// parity grading.
    pub fn index_parity(&self) -> Option<usize> {
        let mut seen = None;
        for (idx, _) in self.nonzero() {
            let p = idx.iter().sum::<usize>() % 2;
            match seen {
                None => seen = Some(p),
                Some(q) if q != p => return None,
                _ => {}
            }
        }
        seen
    }

    /// Dense nested arrays `[physical][up][left][down][right]`.
    pub fn to_json(&self) -> serde_json::Value {
        let d = self.bond_dim;
        let arr: Vec<Vec<Vec<Vec<Vec<f64>>>>> = (0..2)
            .map(|p| {
                (0..d)
                    .map(|u| {
                        (0..d)
                            .map(|l| (0..d).map(|dn| (0..d).map(|r| self.get([p, u, l, dn, r])).collect()).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        serde_json::json!({
            "index_order": ["physical", "up", "left", "down", "right"],
            "bond_dim": d,
            "data": arr,
        })
    }
}

/// `T^i_{u l d r} = sum_{ab} M^i_{ab} A^a_{l r} A^b_{u d}`.
pub fn assemble_site_tensor(variant: WVariant) -> SiteTensor {
    assemble_site_tensor_with(variant, &MapTensor::default())
}

pub fn assemble_site_tensor_with(variant: WVariant, map: &MapTensor) -> SiteTensor {
    let w = WTensor::new(variant);
    let d = w.bond_dim();
    let mut t = SiteTensor {
        bond_dim: d,
        data: vec![0.0; 2 * d * d * d * d],
    };
    for (i, a, b, m) in map.nonzero() {
        for u in 0..d {
            for dn in 0..d {
                let ab = w.a[b][(u, dn)];
                if ab == 0.0 {
                    continue;
                }
                for l in 0..d {
                    for r in 0..d {
                        let aa = w.a[a][(l, r)];
                        if aa != 0.0 {
                            let o = t.offset([i, u, l, dn, r]);
                            t.data[o] += m * aa * ab;
                        }
                    }
                }
            }
        }
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn from_sign(sign: i8) -> Branch {
        if sign >= 0 {
            Branch::Plus
        } else {
            Branch::Minus
        }
    }

    fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

/// `R_1 = 1`, `R_2 = sqrt(-1 + e^{+-i alpha}) |1><1|` on one site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RTensorPair {
    pub alpha: f64,
    pub branch: Branch,
    /// `r[q][a][b]`.
    pub r: [[[C64; 2]; 2]; 2],
}

pub fn build_r_pair(alpha: f64, branch: Branch) -> RTensorPair {
    let mut r = [[[ZERO; 2]; 2]; 2];
    r[0][0][0] = C64::new(1.0, 0.0);
    r[0][1][1] = C64::new(1.0, 0.0);
    r[1][1][1] = (C64::from_polar(1.0, branch.sign() * alpha) - 1.0).sqrt();
    RTensorPair { alpha, branch, r }
}

impl RTensorPair {
    /// `sum_q R_q[a][b] R_q[c][d]`.
    pub fn decomposed(&self, a: usize, b: usize, c: usize, d: usize) -> C64 {
        (0..2).map(|q| self.r[q][a][b] * self.r[q][c][d]).sum()
    }

    /// Entry `(a b, c d)` of the two-site gate `1 - (1 - e^{+-i alpha}) n n`.
    pub fn gate(&self, a: usize, b: usize, c: usize, d: usize) -> C64 {
        if a != b || c != d {
            return ZERO;
        }
        if a == 1 && c == 1 {
            C64::from_polar(1.0, self.branch.sign() * self.alpha)
        } else {
            C64::new(1.0, 0.0)
        }
    }

    /// Largest entrywise deviation between the decomposition and the gate.
    pub fn decomposition_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..16 {
            let (a, b, c, d) = (i >> 3 & 1, i >> 2 & 1, i >> 1 & 1, i & 1);
            worst = worst.max((self.decomposed(a, b, c, d) - self.gate(a, b, c, d)).norm());
        }
        worst
    }
}

/// Local positions `(c' hexagon, c hexagon)` of a site of each sublattice.
pub fn virtual_positions(sub: Sublattice) -> (usize, usize) {
    match sub {
        Sublattice::A => (3, 0),
        Sublattice::B => (2, 5),
        Sublattice::C => (4, 1),
    }
}

/// Gate signs on the legs `[up, left, down, right]` of a site: the incoming
/// and outgoing ring edges of the `c` and `c'` hexagons.
pub fn leg_signs(sub: Sublattice) -> [i8; 4] {
    let (pp, p) = virtual_positions(sub);
    [edge_sign((p + 5) % 6), edge_sign((pp + 5) % 6), edge_sign(p), edge_sign(pp)]
}

/// Site tensor with the four bond gates absorbed; each leg becomes
/// `(bond, q)` with combined index `2 * bond + q`.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractingSiteTensor {
    pub bond_dim: usize,
    pub alpha: f64,
    pub signs: [i8; 4],
    data: Vec<C64>,
}

impl InteractingSiteTensor {
    fn offset(&self, idx: [usize; 5]) -> usize {
        let d = self.bond_dim;
        (((idx[0] * d + idx[1]) * d + idx[2]) * d + idx[3]) * d + idx[4]
    }

    pub fn get(&self, idx: [usize; 5]) -> C64 {
        self.data[self.offset(idx)]
    }

    pub fn to_json(&self) -> serde_json::Value {
        let d = self.bond_dim;
        let arr: Vec<Vec<Vec<Vec<Vec<[f64; 2]>>>>> = (0..2)
            .map(|p| {
                (0..d)
                    .map(|u| {
                        (0..d)
                            .map(|l| {
                                (0..d)
                                    .map(|dn| {
                                        (0..d)
                                            .map(|r| {
                                                let v = self.get([p, u, l, dn, r]);
                                                [v.re, v.im]
                                            })
                                            .collect()
                                    })
                                    .collect()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        serde_json::json!({
            "index_order": ["physical", "up", "left", "down", "right"],
            "bond_dim": d,
            "alpha": self.alpha,
            "leg_signs": self.signs,
            "data": arr,
        })
    }
}

/// Absorbs one `R` factor per leg into the physical index of `t`. `R` is
/// diagonal in the physical index, so each leg multiplies the entry by
/// `R_q[i][i]`.
pub fn assemble_interacting_tensor(t: &SiteTensor, alpha: f64, signs: [i8; 4]) -> Result<InteractingSiteTensor> {
    if t.bond_dim != 2 {
        return Err(Error::InvalidParameter {
            name: "site tensor",
            reason: format!("bond dimension {} (interacting tensors need 2)", t.bond_dim),
        });
    }
    let r = signs.map(|s| build_r_pair(alpha, Branch::from_sign(s)));
    let d = 2 * t.bond_dim;
    let mut out = InteractingSiteTensor {
        bond_dim: d,
        alpha,
        signs,
        data: vec![ZERO; 2 * d * d * d * d],
    };
    for (idx, v) in t.nonzero() {
        let i = idx[0];
        for qs in 0..16usize {
            let q = [qs >> 3 & 1, qs >> 2 & 1, qs >> 1 & 1, qs & 1];
            let factor: C64 = (0..4).map(|leg| r[leg].r[q[leg]][i][i]).product();
            if factor == ZERO {
                continue;
            }
            let big = [
                i,
                2 * idx[1] + q[0],
                2 * idx[2] + q[1],
                2 * idx[3] + q[2],
                2 * idx[4] + q[3],
            ];
            let o = out.offset(big);
            out.data[o] += factor * v;
        }
    }
    Ok(out)
}

/// Inputs of the operator-formalism evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct PepsInput {
    /// Weights of `c_{hex,p}` per hexagon; not required to be normalised.
    pub weights: Vec<[C64; 6]>,
    /// Hexagon factors left to right; the last one acts first.
    pub order: Vec<usize>,
    pub map: MapTensor,
}

impl PepsInput {
    pub fn new(lat: &Lattice, beta: Option<&HexWeights>) -> PepsInput {
        let w = beta.copied().unwrap_or_else(HexWeights::uniform);
        let h = lat.hexagons().len();
        PepsInput {
            weights: vec![w.0; h],
            order: (0..h).collect(),
            map: MapTensor::default(),
        }
    }
}

#[inline]
fn ladder128(bits: u128, mode: usize, create: bool) -> Option<(u128, bool)> {
    let mask = 1u128 << mode;
    if (bits & mask != 0) == create {
        return None;
    }
    let odd = (bits & (mask - 1)).count_ones() % 2 == 1;
    Some((bits ^ mask, odd))
}

/// `<0_v| prod_j M_j prod_hex sum_p beta_p c_{hex,p} |1_v 0_p>`.
pub fn evaluate_peps_state(lat: &Lattice, beta: Option<&HexWeights>) -> Result<SparseState> {
    evaluate_peps(lat, &PepsInput::new(lat, beta))
}

pub fn evaluate_peps(lat: &Lattice, input: &PepsInput) -> Result<SparseState> {
    if !lat.is_torus() {
        return Err(Error::RequiresTorus);
    }
    let nh = lat.hexagons().len();
    if nh > MAX_PEPS_HEXAGONS {
        return Err(Error::SizeLimit {
            what: "hexagons in the PEPS enumeration",
            size: nh,
            limit: MAX_PEPS_HEXAGONS,
        });
    }
    let mut sorted = input.order.clone();
    sorted.sort_unstable();
    if input.weights.len() != nh || sorted != (0..nh).collect::<Vec<_>>() {
        return Err(Error::InvalidParameter {
            name: "peps input",
            reason: format!("need weights and an order for {nh} hexagons"),
        });
    }
    let n = lat.num_sites();
    let nv = 6 * nh;
    // (c' mode, c mode) per site
    let legs: Vec<(usize, usize)> = (0..n)
        .map(|j| {
            let (pp, p) = virtual_positions(lat.site(j).sublattice);
            let mut left = None;
            let mut right = None;
            for &(h, pos) in lat.memberships(j) {
                if pos == pp {
                    left = Some(6 * h + pos);
                }
                if pos == p {
                    right = Some(6 * h + pos);
                }
            }
            (left.expect("c' hexagon"), right.expect("c hexagon"))
        })
        .collect();
    let map_terms = input.map.nonzero();
    let full_virtual: u128 = (1u128 << nv) - 1;

    let first = input.order[nh - 1];
    let partials: Vec<BTreeMap<u64, C64>> = (0..6usize)
        .into_par_iter()
        .map(|p_first| {
            let mut acc: BTreeMap<u64, C64> = BTreeMap::new();
            let rest = nh - 1;
            let mut choice = vec![0usize; rest];
            loop {
                // hexagon factors, rightmost first
                let mut bits = full_virtual;
                let mut amp = C64::new(1.0, 0.0);
                let mut alive = true;
                for k in (0..nh).rev() {
                    let h = input.order[k];
                    let p = if k == nh - 1 { p_first } else { choice[k] };
                    debug_assert!(k != nh - 1 || h == first);
                    let c = input.weights[h][p];
                    match ladder128(bits, 6 * h + p, false) {
                        Some((b, odd)) if c != ZERO => {
                            bits = b;
                            amp *= if odd { -c } else { c };
                        }
                        _ => {
                            alive = false;
                            break;
                        }
                    }
                }
                if alive {
                    let mut terms = vec![(bits, amp)];
                    for j in (0..n).rev() {
                        let (cl, cr) = legs[j];
                        let mut next = Vec::with_capacity(terms.len());
                        for &(b0, a0) in &terms {
                            for &(i, a, b, m) in &map_terms {
                                let mut bits = b0;
                                let mut odd = false;
                                let mut ok = true;
                                for (apply, mode, create) in [(b == 1, cr, false), (a == 1, cl, false), (i == 1, nv + j, true)] {
                                    if !apply {
                                        continue;
                                    }
                                    match ladder128(bits, mode, create) {
                                        Some((nb, o)) => {
                                            bits = nb;
                                            odd ^= o;
                                        }
                                        None => {
                                            ok = false;
                                            break;
                                        }
                                    }
                                }
                                // no later factor touches these modes
                                let spent = (1u128 << cl) | (1u128 << cr);
                                if ok && bits & spent == 0 {
                                    next.push((bits, if odd { -a0 * m } else { a0 * m }));
                                }
                            }
                        }
                        terms = next;
                        if terms.is_empty() {
                            break;
                        }
                    }
                    for (b, a) in terms {
                        if b & full_virtual == 0 {
                            *acc.entry((b >> nv) as u64).or_insert(ZERO) += a;
                        }
                    }
                }
                // odometer over the remaining hexagons
                let mut k = 0;
                while k < rest {
                    choice[k] += 1;
                    if choice[k] < 6 {
                        break;
                    }
                    choice[k] = 0;
                    k += 1;
                }
                if k == rest {
                    break;
                }
            }
            acc
        })
        .collect();
    let mut total: BTreeMap<u64, C64> = BTreeMap::new();
    for part in partials {
        for (b, a) in part {
            *total.entry(b).or_insert(ZERO) += a;
        }
    }
    let state = SparseState::from_pairs(n, total);
    if state.is_empty() {
        return Err(Error::ZeroState);
    }
    Ok(state)
}
