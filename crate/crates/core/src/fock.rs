//! Fermionic Fock space over the lattice sites.
//!
//! Basis states are occupation bit patterns with site `i` on bit `i`. The
//! canonical operator order is ascending site index, so `a_i` and `a_i^dag`
//! pick up `(-1)^{#occupied sites below i}`. Signs are tracked as integers and
//! only multiplied into amplitudes at the end of each ladder step.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{apply_circuit, transformed_hamiltonian};
use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::linalg::{hermitian_eigenvalues, hermitian_eigh, lanczos_lowest, symmetric_eigenvalues, symmetric_eigh, CsrMatrix, C64, ZERO};
use crate::realspace::{build_hamiltonian, single_particle_spectrum, HexWeights};

/// Amplitudes with modulus below this are dropped.
pub const PRUNE: f64 = 1e-15;

/// Largest mode count for which the full `2^N` space may be built.
pub const MAX_FULL_MODES: usize = 24;

/// Largest sector handled by the dense eigensolver.
pub const DENSE_LIMIT: usize = 2500;

/// Levels closer than this to the ground energy count as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-8;

/// Occupation pattern, bit `i` = site `i`.
pub type BasisState = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ladder {
    Create,
    Annihilate,
}

/// Acts with one ladder operator on a basis state.
#[inline]
pub fn ladder_on_basis(bits: BasisState, site: usize, kind: Ladder) -> Option<(BasisState, i8)> {
    let mask = 1u64 << site;
    let occupied = bits & mask != 0;
    let target = match (kind, occupied) {
        (Ladder::Create, false) | (Ladder::Annihilate, true) => bits ^ mask,
        _ => return None,
    };
    let below = (bits & (mask - 1)).count_ones();
    Some((target, if below.is_multiple_of(2) { 1 } else { -1 }))
}

/// `|n_0 n_1 ...>` with site 0 leftmost.
pub fn bit_string(bits: BasisState, n_modes: usize) -> String {
    (0..n_modes).map(|i| if bits >> i & 1 == 1 { '1' } else { '0' }).collect()
}

/// Parses a `bit_string` back into a pattern.
pub fn parse_bit_string(s: &str) -> Result<BasisState> {
    if s.len() > 64 {
        return Err(Error::Parse(format!("bit string longer than 64 modes: {s}")));
    }
    s.chars().enumerate().try_fold(0u64, |acc, (i, ch)| match ch {
        '0' => Ok(acc),
        '1' => Ok(acc | 1 << i),
        other => Err(Error::Parse(format!("unexpected character {other:?} in bit string"))),
    })
}

/// Sparse many-body vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseState {
    n_modes: usize,
    amps: BTreeMap<BasisState, C64>,
}

impl SparseState {
    pub fn zero(n_modes: usize) -> SparseState {
        assert!(n_modes <= 64, "at most 64 modes fit a basis word");
        SparseState {
            n_modes,
            amps: BTreeMap::new(),
        }
    }

    pub fn basis(n_modes: usize, bits: BasisState) -> SparseState {
        let mut s = SparseState::zero(n_modes);
        s.amps.insert(bits, C64::new(1.0, 0.0));
        s
    }

    /// `|1...1>` on all modes.
    pub fn filled(n_modes: usize) -> SparseState {
        let bits = if n_modes == 64 { u64::MAX } else { (1u64 << n_modes) - 1 };
        SparseState::basis(n_modes, bits)
    }

    pub fn from_pairs(n_modes: usize, pairs: impl IntoIterator<Item = (BasisState, C64)>) -> SparseState {
        let mut s = SparseState::zero(n_modes);
        for (b, a) in pairs {
            s.add_amplitude(b, a);
        }
        s.prune();
        s
    }

    /// State from a dense vector over `basis`.
    pub fn from_vector(basis: &FockBasis, v: &[C64]) -> SparseState {
        SparseState::from_pairs(basis.n_modes(), basis.states().iter().copied().zip(v.iter().copied()))
    }

    /// Dense vector over `basis`; amplitudes outside it are ignored.
    pub fn to_vector(&self, basis: &FockBasis) -> Vec<C64> {
        let mut v = vec![ZERO; basis.dim()];
        for (&b, &a) in &self.amps {
            if let Some(i) = basis.index(b) {
                v[i] = a;
            }
        }
        v
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn amplitude(&self, bits: BasisState) -> C64 {
        self.amps.get(&bits).copied().unwrap_or(ZERO)
    }

    /// Entries in ascending bit-pattern order.
    pub fn iter(&self) -> impl Iterator<Item = (BasisState, C64)> + '_ {
        self.amps.iter().map(|(&b, &a)| (b, a))
    }

    fn add_amplitude(&mut self, bits: BasisState, a: C64) {
        *self.amps.entry(bits).or_insert(ZERO) += a;
    }

    fn prune(&mut self) {
        self.amps.retain(|_, a| a.norm() >= PRUNE);
    }

    pub fn norm(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> Result<SparseState> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::ZeroState);
        }
        Ok(self.scaled(C64::new(1.0 / n, 0.0)))
    }

    pub fn scaled(&self, c: C64) -> SparseState {
        let mut s = self.clone();
        s.amps.values_mut().for_each(|a| *a *= c);
        s.prune();
        s
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, other: &SparseState, c: C64) -> SparseState {
        let mut s = self.clone();
        for (b, a) in other.iter() {
            s.add_amplitude(b, c * a);
        }
        s.prune();
        s
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &SparseState) -> C64 {
        let (small, large, flip) = if self.len() <= other.len() {
            (self, other, false)
        } else {
            (other, self, true)
        };
        let s: C64 = small
            .amps
            .iter()
            .filter_map(|(b, a)| large.amps.get(b).map(|c| a.conj() * c))
            .sum();
        if flip {
            s.conj()
        } else {
            s
        }
    }

    /// `|<a|b>| / (|a| |b|)`.
    pub fn fidelity(&self, other: &SparseState) -> f64 {
        let d = self.norm() * other.norm();
        if d == 0.0 {
            return 0.0;
        }
        self.inner(other).norm() / d
    }

    /// Distinct particle numbers among stored basis states.
    pub fn particle_numbers(&self) -> Vec<usize> {
        let mut n: Vec<usize> = self.amps.keys().map(|b| b.count_ones() as usize).collect();
        n.sort_unstable();
        n.dedup();
        n
    }

    pub fn apply_ladder(&self, site: usize, kind: Ladder) -> SparseState {
        assert!(site < self.n_modes, "site {site} outside {} modes", self.n_modes);
        let mut out = SparseState::zero(self.n_modes);
        for (&b, &a) in &self.amps {
            if let Some((t, sign)) = ladder_on_basis(b, site, kind) {
                out.add_amplitude(t, a * f64::from(sign));
            }
        }
        out.prune();
        out
    }

    /// Multiplies each amplitude by `phase(bits)`.
    pub fn map_diagonal(&self, phase: impl Fn(BasisState) -> C64) -> SparseState {
        let mut s = self.clone();
        for (b, a) in s.amps.iter_mut() {
            *a *= phase(*b);
        }
        s.prune();
        s
    }

    /// Applies an operator given by its action on basis states.
    pub fn apply_operator<F>(&self, action: F) -> SparseState
    where
        F: Fn(BasisState) -> Vec<(BasisState, C64)>,
    {
        let mut out = SparseState::zero(self.n_modes);
        for (&b, &a) in &self.amps {
            for (t, c) in action(b) {
                out.add_amplitude(t, a * c);
            }
        }
        out.prune();
        out
    }

    /// Text form: a `modes N` header, then `bits re im` per line in
    /// ascending bit order.
    pub fn to_text(&self) -> String {
        let mut out = format!("modes {}\n", self.n_modes);
        for (b, a) in self.iter() {
            out.push_str(&format!("{} {} {}\n", b, crate::io::fmt_f64(a.re), crate::io::fmt_f64(a.im)));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<SparseState> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty state file".into()))?;
        let n_modes = header
            .strip_prefix("modes ")
            .and_then(|n| n.trim().parse::<usize>().ok())
            .filter(|&n| n <= 64)
            .ok_or_else(|| Error::Parse(format!("bad header {header:?}")))?;
        let mut pairs = Vec::new();
        for line in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(Error::Parse(format!("expected 3 fields: {line:?}")));
            }
            let bad = |e: &dyn fmt::Display| Error::Parse(format!("{e} in {line:?}"));
            let b: u64 = f[0].parse().map_err(|e| bad(&e))?;
            let re: f64 = f[1].parse().map_err(|e| bad(&e))?;
            let im: f64 = f[2].parse().map_err(|e| bad(&e))?;
            pairs.push((b, C64::new(re, im)));
        }
        Ok(SparseState::from_pairs(n_modes, pairs))
    }

    /// Binary form, little endian: magic `KGFS`, `u32` version 1, `u32`
    /// modes, `u64` count, then `u64 bits, f64 re, f64 im` per entry.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(b"KGFS")?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&(self.n_modes as u32).to_le_bytes())?;
        w.write_all(&(self.amps.len() as u64).to_le_bytes())?;
        for (b, a) in self.iter() {
            w.write_all(&b.to_le_bytes())?;
            w.write_all(&a.re.to_le_bytes())?;
            w.write_all(&a.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<SparseState> {
        let io = |e: std::io::Error| Error::Parse(e.to_string());
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != b"KGFS" {
            return Err(Error::Parse("bad magic".into()));
        }
        let mut w4 = [0u8; 4];
        let mut w8 = [0u8; 8];
        r.read_exact(&mut w4).map_err(io)?;
        if u32::from_le_bytes(w4) != 1 {
            return Err(Error::Parse("unsupported version".into()));
        }
        r.read_exact(&mut w4).map_err(io)?;
        let n_modes = u32::from_le_bytes(w4) as usize;
        if n_modes > 64 {
            return Err(Error::Parse(format!("{n_modes} modes")));
        }
        r.read_exact(&mut w8).map_err(io)?;
        let count = u64::from_le_bytes(w8);
        let mut pairs = Vec::new();
        for _ in 0..count {
            let mut rec = [0u8; 24];
            r.read_exact(&mut rec).map_err(io)?;
            let word = |i: usize| <[u8; 8]>::try_from(&rec[8 * i..8 * i + 8]).unwrap();
            pairs.push((
                u64::from_le_bytes(word(0)),
                C64::new(f64::from_le_bytes(word(1)), f64::from_le_bytes(word(2))),
            ));
        }
        Ok(SparseState::from_pairs(n_modes, pairs))
    }
}

impl fmt::Display for SparseState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (b, a) in self.iter() {
            writeln!(f, "{:+.6}{:+.6}i |{}>", a.re, a.im, bit_string(b, self.n_modes))?;
        }
        Ok(())
    }
}

/// `sum_i c_i a_i` over the six sites of one hexagon.
#[derive(Debug, Clone, PartialEq)]
pub struct HexOperator {
    pub hexagon: usize,
    /// `(site, coefficient)` at local positions 1..6.
    pub terms: [(usize, C64); 6],
}

impl HexOperator {
    pub fn uniform(lat: &Lattice, hexagon: usize) -> Result<HexOperator> {
        HexOperator::weighted(lat, hexagon, &HexWeights::uniform())
    }

    pub fn weighted(lat: &Lattice, hexagon: usize, weights: &HexWeights) -> Result<HexOperator> {
        let sites = lat.hexagon_sites(hexagon)?;
        let norm = weights.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::BetaNormalization { norm });
        }
        let mut terms = [(0, ZERO); 6];
        for p in 0..6 {
            terms[p] = (sites[p].flat, weights.0[p]);
        }
        Ok(HexOperator { hexagon, terms })
    }

    pub fn norm(&self) -> f64 {
        self.terms.iter().map(|t| t.1.norm_sqr()).sum::<f64>().sqrt()
    }
}

pub fn hex_annihilate(state: &SparseState, op: &HexOperator) -> SparseState {
    state.apply_operator(|b| {
        op.terms
            .iter()
            .filter_map(|&(site, c)| ladder_on_basis(b, site, Ladder::Annihilate).map(|(t, s)| (t, c * f64::from(s))))
            .collect()
    })
}

/// `{a, b^dag}` for two one-body annihilators: `sum_i a_i conj(b_i)` over
/// shared sites.
pub fn anticommutator(a: &HexOperator, b: &HexOperator) -> C64 {
    a.terms
        .iter()
        .flat_map(|&(sa, ca)| {
            b.terms
                .iter()
                .filter(move |t| t.0 == sa)
                .map(move |&(_, cb)| ca * cb.conj())
        })
        .sum()
}

/// `prod_hex a_hex |1...1>`, hexagons applied in ascending id.
pub fn build_ground_state(lat: &Lattice, beta: Option<&HexWeights>) -> Result<SparseState> {
    if !lat.is_torus() {
        return Err(Error::RequiresTorus);
    }
    let n = lat.num_sites();
    if n > 64 {
        return Err(Error::SizeLimit {
            what: "modes",
            size: n,
            limit: 64,
        });
    }
    let weights = beta.copied().unwrap_or_else(HexWeights::uniform);
    let mut state = SparseState::filled(n);
    for h in 0..lat.hexagons().len() {
        let op = HexOperator::weighted(lat, h, &weights)?;
        state = hex_annihilate(&state, &op);
        if state.is_empty() {
            return Err(Error::ZeroState);
        }
    }
    Ok(state)
}

/// Largest `|a_hex psi|` over all hexagons.
pub fn annihilation_residual(lat: &Lattice, state: &SparseState, beta: Option<&HexWeights>) -> Result<f64> {
    let weights = beta.copied().unwrap_or_else(HexWeights::uniform);
    let mut worst: f64 = 0.0;
    for h in 0..lat.hexagons().len() {
        let op = HexOperator::weighted(lat, h, &weights)?;
        worst = worst.max(hex_annihilate(state, &op).norm());
    }
    Ok(worst)
}

/// Sorted list of basis states, either the full space or one particle-number
/// sector.
#[derive(Debug, Clone, PartialEq)]
pub struct FockBasis {
    n_modes: usize,
    particles: Option<usize>,
    states: Vec<BasisState>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Representation {
    Full,
    FixedNumber(usize),
}

/// `n choose k` in `u128`, saturating.
fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul((n - i) as u128) / (i as u128 + 1))
}

/// Largest sector dimension accepted.
pub const MAX_SECTOR_DIM: usize = 20_000_000;

impl FockBasis {
    pub fn new(n_modes: usize, rep: Representation) -> Result<FockBasis> {
        match rep {
            Representation::Full => FockBasis::full(n_modes),
            Representation::FixedNumber(k) => FockBasis::fixed(n_modes, k),
        }
    }

    pub fn full(n_modes: usize) -> Result<FockBasis> {
        if n_modes > MAX_FULL_MODES {
            return Err(Error::SizeLimit {
                what: "modes in the full Fock space",
                size: n_modes,
                limit: MAX_FULL_MODES,
            });
        }
        Ok(FockBasis {
            n_modes,
            particles: None,
            states: (0..1u64 << n_modes).collect(),
        })
    }

    pub fn fixed(n_modes: usize, particles: usize) -> Result<FockBasis> {
        if n_modes > 64 || particles > n_modes {
            return Err(Error::InvalidParameter {
                name: "particles",
                reason: format!("{particles} particles on {n_modes} modes"),
            });
        }
        let dim = binomial(n_modes, particles);
        if dim > MAX_SECTOR_DIM as u128 {
            return Err(Error::SizeLimit {
                what: "sector dimension",
                size: dim.min(usize::MAX as u128) as usize,
                limit: MAX_SECTOR_DIM,
            });
        }
        let mut states = Vec::with_capacity(dim as usize);
        if particles == 0 {
            states.push(0);
        } else {
            // Gosper's hack enumerates k-subsets in increasing order
            let mut x: u64 = (1u64 << particles) - 1;
            let limit = if n_modes == 64 { None } else { Some(1u64 << n_modes) };
            loop {
                if limit.is_some_and(|l| x >= l) {
                    break;
                }
                states.push(x);
                let c = x & x.wrapping_neg();
                let Some(r) = x.checked_add(c) else { break };
                x = (((r ^ x) >> 2) / c) | r;
            }
        }
        Ok(FockBasis {
            n_modes,
            particles: Some(particles),
            states,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn particles(&self) -> Option<usize> {
        self.particles
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[BasisState] {
        &self.states
    }

    pub fn index(&self, bits: BasisState) -> Option<usize> {
        self.states.binary_search(&bits).ok()
    }

    /// Matrix of an operator that maps the basis into itself, given its
    /// action on basis states. Images outside the basis are an error.
    pub fn operator_matrix<F>(&self, action: F) -> Result<CsrMatrix>
    where
        F: Fn(BasisState) -> Vec<(BasisState, C64)> + Sync,
    {
        let columns: Vec<Vec<(usize, C64)>> = self
            .states
            .par_iter()
            .map(|&b| {
                action(b)
                    .into_iter()
                    .map(|(t, c)| self.index(t).map(|r| (r, c)).ok_or(t))
                    .collect::<std::result::Result<Vec<_>, BasisState>>()
            })
            .collect::<std::result::Result<_, _>>()
            .map_err(|t| Error::InvalidParameter {
                name: "operator",
                reason: format!("image |{}> leaves the basis", bit_string(t, self.n_modes)),
            })?;
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); self.dim()];
        for (c, col) in columns.into_iter().enumerate() {
            for (r, v) in col {
                rows[r].push((c, v));
            }
        }
        Ok(CsrMatrix::from_rows(self.dim(), |r| rows[r].clone()))
    }
}

/// Sparse operator on a Fock basis.
#[derive(Debug, Clone)]
pub struct ManyBodyOperator {
    pub basis: FockBasis,
    pub matrix: CsrMatrix,
}

impl ManyBodyOperator {
    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn apply(&self, state: &SparseState) -> SparseState {
        let v = state.to_vector(&self.basis);
        SparseState::from_vector(&self.basis, &self.matrix.matvec(&v))
    }

    /// `<psi|O|psi>`.
    pub fn expectation(&self, state: &SparseState) -> C64 {
        state.inner(&self.apply(state))
    }

    /// All eigenvalues, sorted; dense.
    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.matrix.is_real() {
            symmetric_eigenvalues(self.matrix.to_dense_real())
        } else {
            hermitian_eigenvalues(self.matrix.to_dense())
        }
    }

    /// Lowest `count` eigenpairs; dense up to `DENSE_LIMIT`, Lanczos above.
    pub fn lowest(&self, count: usize) -> Vec<(f64, Vec<C64>)> {
        let dim = self.dim();
        if dim <= DENSE_LIMIT {
            let (vals, vecs): (Vec<f64>, DMatrix<C64>) = if self.matrix.is_real() {
                let (v, m) = symmetric_eigh(self.matrix.to_dense_real());
                (v, m.map(|x| C64::new(x, 0.0)))
            } else {
                hermitian_eigh(self.matrix.to_dense())
            };
            vals.iter()
                .take(count)
                .enumerate()
                .map(|(i, &e)| (e, vecs.column(i).iter().copied().collect()))
                .collect()
        } else {
            lanczos_lowest(dim, count, 1e-11, |x| self.matrix.matvec(x))
                .into_iter()
                .map(|p| (p.value, p.vector))
                .collect()
        }
    }
}

/// `sum_ij h_ij a_i^dag a_j` for a dense one-body matrix.
pub fn quadratic_operator(basis: &FockBasis, h: &DMatrix<C64>) -> Result<ManyBodyOperator> {
    let n = h.nrows();
    if n != basis.n_modes() {
        return Err(Error::InvalidParameter {
            name: "hopping matrix",
            reason: format!("{n} modes against a basis of {}", basis.n_modes()),
        });
    }
    let terms: Vec<(usize, usize, C64)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| h[(i, j)] != ZERO)
        .map(|(i, j)| (i, j, h[(i, j)]))
        .collect();
    let matrix = basis.operator_matrix(|b| {
        terms
            .iter()
            .filter_map(|&(i, j, c)| {
                let (mid, s1) = ladder_on_basis(b, j, Ladder::Annihilate)?;
                let (t, s2) = ladder_on_basis(mid, i, Ladder::Create)?;
                Some((t, c * f64::from(s1 * s2)))
            })
            .collect()
    })?;
    Ok(ManyBodyOperator {
        basis: basis.clone(),
        matrix,
    })
}

/// Many-body Hamiltonian. `alpha = 0` gives the quadratic hopping model; any
/// other `alpha` the circuit-transformed Hamiltonian.
pub fn many_body_hamiltonian(lat: &Lattice, mu: f64, alpha: f64, rep: Representation) -> Result<ManyBodyOperator> {
    let basis = FockBasis::new(lat.num_sites(), rep)?;
    if alpha == 0.0 {
        let h = build_hamiltonian(lat, mu, None, None)?;
        quadratic_operator(&basis, &h.matrix)
    } else {
        transformed_hamiltonian(lat, &basis, mu, alpha)
    }
}

/// Full many-body spectrum, assembled from every particle-number sector.
pub fn full_spectrum(lat: &Lattice, mu: f64, alpha: f64) -> Result<Vec<f64>> {
    let n = lat.num_sites();
    if n > MAX_FULL_MODES {
        return Err(Error::SizeLimit {
            what: "modes for a full spectrum",
            size: n,
            limit: MAX_FULL_MODES,
        });
    }
    for k in 0..=n {
        let dim = binomial(n, k) as usize;
        if dim > DENSE_LIMIT {
            return Err(Error::SizeLimit {
                what: "sector dimension for a full spectrum",
                size: dim,
                limit: DENSE_LIMIT,
            });
        }
    }
    let sectors = (0..=n)
        .into_par_iter()
        .map(|k| Ok(many_body_hamiltonian(lat, mu, alpha, Representation::FixedNumber(k))?.eigenvalues()))
        .collect::<Result<Vec<_>>>()?;
    let mut all: Vec<f64> = sectors.into_iter().flatten().collect();
    all.sort_by(f64::total_cmp);
    Ok(all)
}

/// Lowest levels of every particle-number sector, merged.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectorLevels {
    /// `(particles, energy)` sorted by energy.
    pub levels: Vec<(usize, f64)>,
}

fn sector_lowest(lat: &Lattice, mu: f64, alpha: f64, count: usize) -> Result<SectorLevels> {
    let n = lat.num_sites();
    let per_sector = (0..=n)
        .into_par_iter()
        .map(|k| {
            let h = many_body_hamiltonian(lat, mu, alpha, Representation::FixedNumber(k))?;
            let e = if h.dim() <= DENSE_LIMIT {
                h.eigenvalues().into_iter().take(count).collect()
            } else {
                h.lowest(count).into_iter().map(|(e, _)| e).collect::<Vec<_>>()
            };
            Ok(e.into_iter().map(|e| (k, e)).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut levels: Vec<(usize, f64)> = per_sector.into_iter().flatten().collect();
    levels.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok(SectorLevels { levels })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundSpaceReport {
    /// `2^(single-particle zero modes)` for `E_0 = 0`, otherwise the
    /// degeneracy of the filled Fermi sea.
    pub dimension: u128,
    pub zero_modes: usize,
    /// Kernel dimension from exact diagonalisation (`N <= 12` only).
    pub ed_dimension: Option<usize>,
    /// Particle numbers present in the ground space.
    pub fillings: Vec<usize>,
}

/// Ground-space degeneracy of the quadratic Hamiltonian at chemical potential
/// `mu`: every single-particle level within `DEGENERACY_TOL` of zero can be
/// filled or left empty.
pub fn ground_space_dimension(lat: &Lattice, mu: f64) -> Result<GroundSpaceReport> {
    if !lat.is_torus() {
        return Err(Error::RequiresTorus);
    }
    let h = build_hamiltonian(lat, mu, None, None)?;
    let e = single_particle_spectrum(&h, false).eigenvalues;
    let zero_modes = e.iter().filter(|x| x.abs() < DEGENERACY_TOL).count();
    let negative = e.iter().filter(|&&x| x <= -DEGENERACY_TOL).count();
    let dimension = 1u128 << zero_modes;
    let fillings: Vec<usize> = (negative..=negative + zero_modes).collect();
    let ed_dimension = if lat.num_sites() <= 12 {
        let n = lat.num_sites();
        let sectors = (0..=n)
            .into_par_iter()
            .map(|k| Ok(many_body_hamiltonian(lat, mu, 0.0, Representation::FixedNumber(k))?.eigenvalues()))
            .collect::<Result<Vec<_>>>()?;
        let all: Vec<f64> = sectors.into_iter().flatten().collect();
        let e0 = all.iter().copied().fold(f64::INFINITY, f64::min);
        Some(all.iter().filter(|&&x| x - e0 < DEGENERACY_TOL).count())
    } else {
        None
    };
    Ok(GroundSpaceReport {
        dimension,
        zero_modes,
        ed_dimension,
        fillings,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UniqueGroundReport {
    pub mu: f64,
    pub alpha: f64,
    pub ground_energy: f64,
    pub particles: usize,
    /// Distance from the ground level to the next level in any sector.
    pub gap: f64,
    pub degeneracy: usize,
    /// `|<ED|U prod a_hex |1...1>>|`, both normalised.
    pub fidelity: f64,
}

/// Diagonalises every particle-number sector, checks that the global ground
/// level is unique and compares it with the circuit-dressed constructed state.
pub fn verify_unique_ground_state(lat: &Lattice, mu: f64, alpha: f64) -> Result<UniqueGroundReport> {
    if !(mu > -2.0 && mu < 1.0) {
        return Err(Error::InvalidParameter {
            name: "mu",
            reason: format!("{mu} outside (-2, 1)"),
        });
    }
    let n = lat.num_sites();
    if n > MAX_FULL_MODES {
        return Err(Error::SizeLimit {
            what: "modes",
            size: n,
            limit: MAX_FULL_MODES,
        });
    }
    let levels = sector_lowest(lat, mu, alpha, 2)?.levels;
    let (particles, e0) = levels[0];
    let degeneracy = levels.iter().filter(|l| l.1 - e0 < DEGENERACY_TOL).count();
    if degeneracy > 1 {
        return Err(Error::DegenerateGroundState {
            count: degeneracy,
            tolerance: DEGENERACY_TOL,
        });
    }
    let gap = levels[1].1 - e0;
    let h = many_body_hamiltonian(lat, mu, alpha, Representation::FixedNumber(particles))?;
    let (_, v) = h.lowest(1).remove(0);
    let ed = SparseState::from_vector(&h.basis, &v);
    let reference = apply_circuit(lat, &build_ground_state(lat, None)?, alpha);
    Ok(UniqueGroundReport {
        mu,
        alpha,
        ground_energy: e0,
        particles,
        gap,
        degeneracy,
        fidelity: ed.fidelity(&reference),
    })
}

/// `<H^2> - <H>^2` for a normalised copy of `state`.
pub fn energy_variance(h: &ManyBodyOperator, state: &SparseState) -> Result<f64> {
    let psi = state.normalized()?;
    let hpsi = h.apply(&psi);
    let e = psi.inner(&hpsi).re;
    Ok(hpsi.norm().powi(2) - e * e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_lattice, Boundary};
    use proptest::prelude::*;

    fn torus(l1: usize, l2: usize) -> Lattice {
        build_lattice(l1, l2, Boundary::Torus).unwrap()
    }

    fn ket(s: &str) -> SparseState {
        SparseState::basis(s.len(), parse_bit_string(s).unwrap())
    }

    #[test]
    fn ladder_signs() {
        let s = ket("1100");
        let a0 = s.apply_ladder(0, Ladder::Annihilate);
        assert_eq!(a0, ket("0100"));
        let a1 = s.apply_ladder(1, Ladder::Annihilate);
        assert_eq!(a1, ket("1000").scaled(C64::new(-1.0, 0.0)));
        for bits in 0..16u64 {
            let twice = SparseState::basis(4, bits)
                .apply_ladder(0, Ladder::Create)
                .apply_ladder(0, Ladder::Create);
            assert!(twice.is_empty());
        }
        assert!(ket("0100").apply_ladder(0, Ladder::Annihilate).is_empty());
    }

    #[test]
    fn bit_strings_round_trip() {
        assert_eq!(parse_bit_string("1100").unwrap(), 0b0011);
        assert_eq!(bit_string(0b0011, 4), "1100");
        assert!(parse_bit_string("10x").is_err());
    }

    /// Full-space matrix of a single ladder operator.
    fn ladder_matrix(basis: &FockBasis, site: usize, kind: Ladder) -> CsrMatrix {
        basis
            .operator_matrix(|b| {
                ladder_on_basis(b, site, kind)
                    .map(|(t, s)| vec![(t, C64::new(f64::from(s), 0.0))])
                    .unwrap_or_default()
            })
            .unwrap()
    }

    #[test]
    fn canonical_anticommutation_on_full_space() {
        let n = 6;
        let basis = FockBasis::full(n).unwrap();
        let ann: Vec<CsrMatrix> = (0..n).map(|i| ladder_matrix(&basis, i, Ladder::Annihilate)).collect();
        let cre: Vec<CsrMatrix> = (0..n).map(|i| ladder_matrix(&basis, i, Ladder::Create)).collect();
        let id = CsrMatrix::from_rows(basis.dim(), |r| vec![(r, C64::new(1.0, 0.0))]);
        let zero = CsrMatrix::from_rows(basis.dim(), |_| vec![]);
        for i in 0..n {
            assert_eq!(cre[i], ann[i].adjoint());
            for j in 0..n {
                let ac = ann[i].product(&cre[j]).add(&cre[j].product(&ann[i]), C64::new(1.0, 0.0));
                let want = if i == j { &id } else { &zero };
                assert!(ac.max_abs_diff(want) < 1e-15);
                let aa = ann[i].product(&ann[j]).add(&ann[j].product(&ann[i]), C64::new(1.0, 0.0));
                assert!(aa.max_abs_diff(&zero) < 1e-15);
            }
        }
    }

    proptest! {
        #[test]
        fn anticommutator_on_random_states(
            i in 0usize..8, j in 0usize..8,
            amps in proptest::collection::vec((0u64..256, -1.0f64..1.0, -1.0f64..1.0), 1..12),
        ) {
            let psi = SparseState::from_pairs(8, amps.into_iter().map(|(b, re, im)| (b, C64::new(re, im))));
            let lhs = psi
                .apply_ladder(j, Ladder::Create)
                .apply_ladder(i, Ladder::Annihilate)
                .add_scaled(&psi.apply_ladder(i, Ladder::Annihilate).apply_ladder(j, Ladder::Create), C64::new(1.0, 0.0));
            let want = if i == j { psi.clone() } else { SparseState::zero(8) };
            prop_assert!(lhs.add_scaled(&want, C64::new(-1.0, 0.0)).norm() < 1e-14);
        }

        #[test]
        fn text_serialisation_round_trips(
            amps in proptest::collection::vec((0u64..(1 << 20), -1.0f64..1.0, -1.0f64..1.0), 0..20),
        ) {
            let psi = SparseState::from_pairs(20, amps.into_iter().map(|(b, re, im)| (b, C64::new(re, im))));
            prop_assert_eq!(SparseState::from_text(&psi.to_text()).unwrap(), psi.clone());
            let mut buf = Vec::new();
            psi.write_binary(&mut buf).unwrap();
            prop_assert_eq!(SparseState::read_binary(&buf[..]).unwrap(), psi);
        }
    }

    #[test]
    fn serialisation_rejects_garbage() {
        assert!(SparseState::from_text("").is_err());
        assert!(SparseState::from_text("modes 4\n3 1.0\n").is_err());
        assert!(SparseState::read_binary(&b"XXXX"[..]).is_err());
    }

    #[test]
    fn hexagon_on_filled_state() {
        let lat = torus(2, 2);
        let op = HexOperator::uniform(&lat, 0).unwrap();
        let full = SparseState::filled(12);
        let once = hex_annihilate(&full, &op);
        assert_eq!(once.len(), 6);
        let c = 1.0 / 6f64.sqrt();
        for &(site, _) in &op.terms {
            // the hole at `site` carries the parity of the sites below it
            let sign = if site % 2 == 0 { 1.0 } else { -1.0 };
            let amp = once.amplitude(((1u64 << 12) - 1) ^ (1 << site));
            assert!((amp - C64::new(sign * c, 0.0)).norm() < 1e-15);
        }
        assert!((once.norm() - 1.0).abs() < 1e-14);
        assert!(hex_annihilate(&once, &op).is_empty());
    }

    #[test]
    fn anticommutator_values() {
        let lat = torus(3, 3);
        let a = HexOperator::uniform(&lat, 0).unwrap();
        assert!((anticommutator(&a, &a) - C64::new(1.0, 0.0)).norm() < 1e-14);
        let adj = lat.adjacent_hexagons(0);
        assert_eq!(adj.len(), 6);
        for h in &adj {
            let b = HexOperator::uniform(&lat, *h).unwrap();
            assert!((anticommutator(&a, &b) - C64::new(1.0 / 6.0, 0.0)).norm() < 1e-14);
        }
        let far = (0..9).find(|h| *h != 0 && !adj.contains(h)).unwrap();
        let b = HexOperator::uniform(&lat, far).unwrap();
        assert_eq!(anticommutator(&a, &b), ZERO);
    }

    #[test]
    fn anticommutator_matches_operator_products() {
        // generic weights; the shared site sits at different local positions
        let lat = torus(2, 2);
        let w = HexWeights::c2t_from_half([C64::new(0.3, 0.1), C64::new(-0.5, 0.2), C64::new(0.7, -0.4)]);
        let basis = FockBasis::full(12).unwrap();
        let op_matrix = |op: &HexOperator| {
            basis
                .operator_matrix(|b| {
                    op.terms
                        .iter()
                        .filter_map(|&(s, c)| {
                            ladder_on_basis(b, s, Ladder::Annihilate).map(|(t, sg)| (t, c * f64::from(sg)))
                        })
                        .collect()
                })
                .unwrap()
        };
        for (x, y) in [(0, 0), (0, 1), (0, 3)] {
            let a = HexOperator::weighted(&lat, x, &w).unwrap();
            let b = HexOperator::weighted(&lat, y, &w).unwrap();
            let ma = op_matrix(&a);
            let mbd = op_matrix(&b).adjoint();
            let ac = ma.product(&mbd).add(&mbd.product(&ma), C64::new(1.0, 0.0));
            let want = anticommutator(&a, &b);
            for r in 0..basis.dim() {
                for (c, v) in ac.row(r) {
                    let expect = if r == c { want } else { ZERO };
                    assert!((v - expect).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn ground_state_on_2x2() {
        let lat = torus(2, 2);
        let psi = build_ground_state(&lat, None).unwrap();
        assert_eq!(psi.particle_numbers(), vec![8]);
        assert!(annihilation_residual(&lat, &psi, None).unwrap() <= 1e-12);
        assert!(matches!(
            build_ground_state(&build_lattice(3, 2, Boundary::Cylinder).unwrap(), None),
            Err(Error::RequiresTorus)
        ));
    }

    #[test]
    fn hexagon_order_only_changes_global_sign() {
        let lat = torus(3, 2);
        let forward = build_ground_state(&lat, None).unwrap();
        let mut order: Vec<usize> = (0..6).collect();
        order.reverse();
        order.swap(1, 4);
        let mut psi = SparseState::filled(18);
        for h in order {
            psi = hex_annihilate(&psi, &HexOperator::uniform(&lat, h).unwrap());
        }
        let ratio = psi.inner(&forward) / forward.inner(&forward);
        assert!((ratio.norm() - 1.0).abs() < 1e-12 && ratio.im.abs() < 1e-12);
        assert!(psi.add_scaled(&forward, -ratio).norm() < 1e-12);
    }

    #[test]
    fn generalised_weights_are_annihilated() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let lat = torus(3, 2);
        for _ in 0..5 {
            let half = [(); 3].map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let w = HexWeights::c2t_from_half(half);
            let psi = build_ground_state(&lat, Some(&w)).unwrap();
            assert_eq!(psi.particle_numbers(), vec![12]);
            let r = annihilation_residual(&lat, &psi, Some(&w)).unwrap() / psi.norm();
            assert!(r <= 1e-12, "residual {r}");
        }
    }

    #[test]
    fn fixed_number_basis_is_sorted_and_complete() {
        let b = FockBasis::fixed(12, 8).unwrap();
        assert_eq!(b.dim(), 495);
        assert!(b.states().windows(2).all(|w| w[0] < w[1]));
        assert!(b.states().iter().all(|s| s.count_ones() == 8));
        assert_eq!(FockBasis::fixed(5, 0).unwrap().states(), &[0]);
        assert_eq!(FockBasis::fixed(5, 5).unwrap().states(), &[31]);
        assert!(FockBasis::full(30).is_err());
    }

    #[test]
    fn quadratic_hamiltonian_on_2x2() {
        let lat = torus(2, 2);
        let h = many_body_hamiltonian(&lat, 0.0, 0.0, Representation::Full).unwrap();
        assert!(h.matrix.hermiticity_defect() < 1e-14);
        // number conservation on every basis column
        for r in 0..h.dim() {
            for (c, _) in h.matrix.row(r) {
                assert_eq!(h.basis.states()[r].count_ones(), h.basis.states()[c].count_ones());
            }
        }
        let sector = many_body_hamiltonian(&lat, 0.0, 0.0, Representation::FixedNumber(8)).unwrap();
        let low = sector.lowest(2);
        assert!((low[0].0 + 16.0).abs() < 1e-10);
    }

    /// Single-particle energies on the 2x2 torus, from the Bloch grid.
    fn two_by_two_gap(mu: f64) -> f64 {
        let e = crate::realspace::bloch_multiset(2, 2, mu);
        let e3 = e[8];
        (mu + 2.0).min(e3)
    }

    #[test]
    fn unique_ground_state_and_gap() {
        let lat = torus(2, 2);
        for mu in [-1.0, 0.0, 0.99] {
            let r = verify_unique_ground_state(&lat, mu, 0.0).unwrap();
            assert_eq!(r.degeneracy, 1);
            assert_eq!(r.particles, 8);
            assert!(r.fidelity > 1.0 - 1e-10, "fidelity {}", r.fidelity);
            assert!((r.gap - two_by_two_gap(mu)).abs() < 1e-8, "mu {mu} gap {}", r.gap);
        }
        assert!(verify_unique_ground_state(&lat, -2.0, 0.0).is_err());
    }

    #[test]
    fn macroscopic_degeneracy_at_mu_minus_two() {
        let lat = torus(2, 2);
        let r = ground_space_dimension(&lat, -2.0).unwrap();
        assert_eq!(r.dimension, 256);
        assert_eq!(r.ed_dimension, Some(256));
        assert_eq!(r.fillings, (0..=8).collect::<Vec<_>>());
        let r = ground_space_dimension(&lat, -1.0).unwrap();
        assert_eq!((r.dimension, r.ed_dimension), (1, Some(1)));
    }

    #[test]
    fn constructed_state_has_no_energy_variance() {
        let lat = torus(3, 2);
        let psi = build_ground_state(&lat, None).unwrap();
        let h = many_body_hamiltonian(&lat, 0.0, 0.0, Representation::FixedNumber(12)).unwrap();
        let var = energy_variance(&h, &psi).unwrap();
        assert!(var.abs() <= 1e-10 * 18.0, "variance {var}");
        let e = h.expectation(&psi.normalized().unwrap()).re;
        assert!((e + 24.0).abs() < 1e-10);
    }
}
