//! Dense eigensolver wrappers, a compressed-row sparse matrix and a
//! deflated Lanczos solver for extremal eigenpairs.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Sorted eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(m: DMatrix<C64>) -> Vec<f64> {
    let mut e: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

/// Sorted eigenvalues of a real symmetric matrix.
pub fn symmetric_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut e: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

/// Eigenpairs of a Hermitian matrix, ascending; eigenvectors are columns.
pub fn hermitian_eigh(m: DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

/// Eigenpairs of a real symmetric matrix, ascending.
pub fn symmetric_eigh(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

/// Largest absolute entrywise difference.
pub fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Largest absolute difference between two equally long sorted spectra.
pub fn spectrum_distance(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Square compressed-row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl CsrMatrix {
    /// Builds the matrix row by row; duplicate columns are summed and exact
    /// zeros dropped.
    pub fn from_rows<F>(dim: usize, row: F) -> CsrMatrix
    where
        F: Fn(usize) -> Vec<(usize, C64)> + Sync,
    {
        let rows: Vec<Vec<(usize, C64)>> = (0..dim)
            .into_par_iter()
            .map(|r| {
                let mut entries = row(r);
                entries.sort_by_key(|e| e.0);
                let mut merged: Vec<(usize, C64)> = Vec::with_capacity(entries.len());
                for (c, v) in entries {
                    match merged.last_mut() {
                        Some(last) if last.0 == c => last.1 += v,
                        _ => merged.push((c, v)),
                    }
                }
                merged.retain(|e| e.1 != ZERO);
                merged
            })
            .collect();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        row_ptr.push(0);
        let nnz: usize = rows.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        for r in rows {
            for (c, v) in r {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix {
            dim,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(i) => self.vals[span.start + i],
            Err(_) => ZERO,
        }
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        (0..self.dim)
            .into_par_iter()
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }

    /// Real part as a dense matrix; callers check `is_real` first.
    pub fn to_dense_real(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                m[(r, c)] = v.re;
            }
        }
        m
    }

    pub fn is_real(&self) -> bool {
        self.vals.iter().all(|v| v.im == 0.0)
    }

    /// Largest `|A_rc - conj(A_cr)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        (0..self.dim)
            .flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v)))
            .map(|(r, c, v)| (v - self.get(c, r).conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Largest entrywise difference to another matrix of the same size.
    pub fn max_abs_diff(&self, other: &CsrMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        let one_way = |a: &CsrMatrix, b: &CsrMatrix| {
            (0..a.dim)
                .flat_map(|r| a.row(r).map(move |(c, v)| (r, c, v)))
                .map(|(r, c, v)| (v - b.get(r, c)).norm())
                .fold(0.0, f64::max)
        };
        one_way(self, other).max(one_way(other, self))
    }

    pub fn product(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.dim, other.dim);
        CsrMatrix::from_rows(self.dim, |r| {
            let mut out = Vec::new();
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    out.push((c, a * b));
                }
            }
            out
        })
    }

    pub fn adjoint(&self) -> CsrMatrix {
        let mut by_row: Vec<Vec<(usize, C64)>> = vec![Vec::new(); self.dim];
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                by_row[c].push((r, v.conj()));
            }
        }
        CsrMatrix::from_rows(self.dim, |r| by_row[r].clone())
    }

    pub fn add(&self, other: &CsrMatrix, scale: C64) -> CsrMatrix {
        CsrMatrix::from_rows(self.dim, |r| {
            self.row(r)
                .chain(other.row(r).map(|(c, v)| (c, v * scale)))
                .collect()
        })
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn orthogonalize(v: &mut [C64], basis: &[Vec<C64>]) {
    // two passes keep the basis orthogonal to working precision
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, v);
            for (x, y) in v.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
    }
}

/// Deterministic, generic start vector.
fn start_vector(dim: usize, salt: usize) -> Vec<C64> {
    (0..dim)
        .map(|i| {
            let t = (i as f64 + 1.0) * (0.754_877_666 + salt as f64 * 0.137);
            C64::new((t * 12.9898).sin() + 1.5, 0.3 * (t * 78.233).cos())
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: Vec<C64>,
}

/// Lowest `count` eigenpairs of a Hermitian operator. Each pair comes from a
/// fully reorthogonalised Lanczos run on the operator deflated against the
/// pairs already found, so degenerate levels are resolved one by one.
pub fn lanczos_lowest<F>(dim: usize, count: usize, tol: f64, apply: F) -> Vec<Eigenpair>
where
    F: Fn(&[C64]) -> Vec<C64>,
{
    let count = count.min(dim);
    let mut found: Vec<Eigenpair> = Vec::with_capacity(count);
    let max_krylov = dim.min(400);
    for attempt in 0..count {
        let locked: Vec<Vec<C64>> = found.iter().map(|p| p.vector.clone()).collect();
        let mut v = start_vector(dim, attempt);
        let mut best: Option<Eigenpair> = None;
        // restart from the current Ritz vector when the Krylov space fills up
        for _restart in 0..50 {
            orthogonalize(&mut v, &locked);
            let nv = norm(&v);
            if nv < 1e-12 {
                break;
            }
            v.iter_mut().for_each(|x| *x /= nv);
            let (pair, converged) = lanczos_run(dim, max_krylov, tol, &locked, v, &apply);
            v = pair.vector.clone();
            best = Some(pair);
            if converged {
                break;
            }
        }
        found.extend(best);
    }
    found.sort_by(|a, b| a.value.total_cmp(&b.value));
    found
}

/// One Lanczos pass; returns the lowest Ritz pair and whether it converged.
fn lanczos_run<F>(
    dim: usize,
    max_krylov: usize,
    tol: f64,
    locked: &[Vec<C64>],
    v: Vec<C64>,
    apply: &F,
) -> (Eigenpair, bool)
where
    F: Fn(&[C64]) -> Vec<C64>,
{
    let mut basis: Vec<Vec<C64>> = vec![v];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    loop {
        let j = basis.len() - 1;
        let mut w = apply(&basis[j]);
        orthogonalize(&mut w, locked);
        alpha.push(dot(&basis[j], &w).re);
        orthogonalize(&mut w, &basis);
        let b = norm(&w);

        let m = alpha.len();
        let t = DMatrix::from_fn(m, m, |r, c| {
            if r == c {
                alpha[r]
            } else if r + 1 == c {
                beta[r]
            } else if c + 1 == r {
                beta[c]
            } else {
                0.0
            }
        });
        let (vals, vecs) = symmetric_eigh(t);
        let residual = b * vecs[(m - 1, 0)].abs();
        let exhausted = b < 1e-14 || m + locked.len() >= dim;
        let converged = residual < tol || exhausted;
        if converged || m >= max_krylov {
            let mut x = vec![ZERO; dim];
            for (i, q) in basis.iter().enumerate() {
                let s = vecs[(i, 0)];
                for (xi, qi) in x.iter_mut().zip(q) {
                    *xi += qi * s;
                }
            }
            orthogonalize(&mut x, locked);
            let nx = norm(&x);
            x.iter_mut().for_each(|e| *e /= nx);
            return (
                Eigenpair {
                    value: vals[0],
                    vector: x,
                },
                converged,
            );
        }
        beta.push(b);
        w.iter_mut().for_each(|e| *e /= b);
        basis.push(w);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn random_hermitian(dim: usize, seed: u64) -> CsrMatrix {
        let h = |r: usize, c: usize| -> f64 {
            let x = ((r * 7919 + c * 104_729) as u64 ^ seed) as f64;
            (x * 0.618_033_988_7).fract() - 0.5
        };
        CsrMatrix::from_rows(dim, |r| {
            let mut out = Vec::new();
            for c in 0..dim {
                if (r + 3 * c) % 5 == 0 || r == c {
                    let (lo, hi) = (r.min(c), r.max(c));
                    let v = if r == c {
                        C64::new(4.0 * h(r, r), 0.0)
                    } else if r < c {
                        C64::new(h(lo, hi), h(hi, lo))
                    } else {
                        C64::new(h(lo, hi), -h(hi, lo))
                    };
                    out.push((c, v));
                }
            }
            out
        })
    }

    #[test]
    fn csr_roundtrip_and_hermitian() {
        let m = random_hermitian(30, 1);
        // the sparsity pattern is not symmetric, so symmetrise explicitly
        let sym = m.add(&m.adjoint(), ONE);
        assert!(sym.hermiticity_defect() < 1e-15);
        let d = sym.to_dense();
        let x: Vec<C64> = (0..30).map(|i| C64::new(i as f64, 1.0)).collect();
        let y = sym.matvec(&x);
        let yd = &d * DVector::from_vec(x.clone());
        for i in 0..30 {
            assert!((y[i] - yd[i]).norm() < 1e-12);
        }
        assert!(sym.product(&sym).max_abs_diff(&CsrMatrix::from_rows(30, |r| {
            (0..30).map(|c| (c, (&d * &d)[(r, c)])).collect()
        })) < 1e-12);
    }

    #[test]
    fn lanczos_matches_dense_with_degeneracy() {
        let base = random_hermitian(120, 5);
        let sym = base.add(&base.adjoint(), ONE);
        // block-diagonal doubling forces exact twofold degeneracy
        let dim = 240;
        let doubled = CsrMatrix::from_rows(dim, |r| {
            let off = if r >= 120 { 120 } else { 0 };
            sym.row(r - off).map(|(c, v)| (c + off, v)).collect()
        });
        let dense = hermitian_eigenvalues(doubled.to_dense());
        let pairs = lanczos_lowest(dim, 4, 1e-10, |x| doubled.matvec(x));
        for (p, e) in pairs.iter().zip(&dense) {
            assert!((p.value - e).abs() < 1e-8, "{} vs {}", p.value, e);
            let hx = doubled.matvec(&p.vector);
            let res: f64 = hx
                .iter()
                .zip(&p.vector)
                .map(|(a, b)| (a - b * p.value).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(res < 1e-7);
        }
        assert!((pairs[0].value - pairs[1].value).abs() < 1e-8);
    }

    #[test]
    fn dense_helpers_sorted() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let (vals, vecs) = symmetric_eigh(m.clone());
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] - 3.0).abs() < 1e-14);
        assert!(((&m * vecs.column(0)) - vecs.column(0) * vals[0]).norm() < 1e-14);
        assert_eq!(symmetric_eigenvalues(m).len(), 2);
        assert_eq!(spectrum_distance(&[1.0, 2.0], &[1.0, 2.5]), 0.5);
    }
}
