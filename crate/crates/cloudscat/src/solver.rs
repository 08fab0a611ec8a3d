//! Dense coupled-dipole solver.
//!
//! Each atom carries an induced dipole obeying
//!
//! `p_i = eps0 * alpha * [ E_inc(r_i) + sum_{j != i} G(r_i, r_j) p_j ]`
//!
//! which is assembled as one dense complex system `M p = E_inc` with
//! `3x3` blocks `M_ii = I/(eps0*alpha)` and `M_ij = -G(r_i, r_j)`. The
//! system is small (3N with N of order tens), so a partially pivoted LU
//! factorization with one step of iterative refinement is both the fastest
//! and the most predictable choice. The factorization carries a Hager-style
//! 1-norm condition estimate; systems beyond `CONDITION_LIMIT` are reported
//! as degenerate so the ensemble layer can resample the configuration.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::excitation::ExcitationField;
use crate::greens::greens_tensor;
use crate::units::EPS0;

/// Condition-estimate ceiling; beyond this the realization is degenerate.
pub const CONDITION_LIMIT: f64 = 1e12;
/// Relative residual ceiling after refinement.
pub const RESIDUAL_LIMIT: f64 = 1e-10;

/// All pair Green's tensors for one configuration. Built once per
/// realization and reused across the detuning grid (only the matrix
/// diagonal depends on the polarizability).
pub struct PairCoupling {
    n_atoms: usize,
    g: Vec<Matrix3<Complex64>>,
}

impl PairCoupling {
    pub fn build(positions: &[Vector3<f64>], k: f64) -> Result<Self> {
        let n = positions.len();
        let mut g = vec![Matrix3::zeros(); n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let gij = greens_tensor(&positions[i], &positions[j], k)?;
                g[i * n + j] = gij;
                // G is symmetric in its indices and as a matrix.
                g[j * n + i] = gij;
            }
        }
        Ok(PairCoupling { n_atoms: n, g })
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn block(&self, i: usize, j: usize) -> &Matrix3<Complex64> {
        &self.g[i * self.n_atoms + j]
    }

    /// Assemble `M` for a given polarizability.
    pub fn assemble(&self, alpha: Complex64) -> DenseMatrix {
        let n = 3 * self.n_atoms;
        let diag = Complex64::new(1.0, 0.0) / (EPS0 * alpha);
        let mut a = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..self.n_atoms {
            for c in 0..3 {
                a[(3 * i + c) * n + (3 * i + c)] = diag;
            }
            for j in 0..self.n_atoms {
                if i == j {
                    continue;
                }
                let blk = self.block(i, j);
                for r in 0..3 {
                    for c in 0..3 {
                        a[(3 * i + r) * n + (3 * j + c)] = -blk[(r, c)];
                    }
                }
            }
        }
        DenseMatrix { n, a }
    }
}

/// Row-major dense complex matrix.
pub struct DenseMatrix {
    pub n: usize,
    pub a: Vec<Complex64>,
}

impl DenseMatrix {
    /// Maximum column sum of moduli.
    fn norm1(&self) -> f64 {
        let n = self.n;
        let mut best = 0.0f64;
        for j in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                s += self.a[i * n + j].norm();
            }
            best = best.max(s);
        }
        best
    }
}

/// LU factors of the interaction matrix plus the original matrix (kept for
/// residual evaluation and refinement).
pub struct FactoredInteraction {
    n: usize,
    lu: Vec<Complex64>,
    piv: Vec<usize>,
    a: Vec<Complex64>,
    pub condition_estimate: f64,
}

/// One solved realization.
#[derive(Debug, Clone)]
pub struct DipoleSolution {
    pub dipoles: Vec<Vector3<Complex64>>,
    pub condition_estimate: f64,
    /// Relative residual `|M p - E| / |E|` after refinement.
    pub residual: f64,
}

/// Factor `M`, rejecting singular or untrustworthy systems.
pub fn factor(m: DenseMatrix) -> Result<FactoredInteraction> {
    let n = m.n;
    let norm1 = m.norm1();
    let a = m.a;
    let mut lu = a.clone();
    let mut piv = vec![0usize; n];
    for kcol in 0..n {
        let mut p = kcol;
        let mut best = lu[kcol * n + kcol].norm_sqr();
        for i in (kcol + 1)..n {
            let v = lu[i * n + kcol].norm_sqr();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == 0.0 {
            return Err(Error::Degenerate(format!(
                "exactly singular interaction matrix at elimination step {kcol}"
            )));
        }
        piv[kcol] = p;
        if p != kcol {
            for j in 0..n {
                lu.swap(kcol * n + j, p * n + j);
            }
        }
        let pivot = lu[kcol * n + kcol];
        for i in (kcol + 1)..n {
            let m_ik = lu[i * n + kcol] / pivot;
            lu[i * n + kcol] = m_ik;
            if m_ik.norm_sqr() != 0.0 {
                let (head, tail) = lu.split_at_mut(i * n);
                let row_k = &head[kcol * n..kcol * n + n];
                let row_i = &mut tail[..n];
                for j in (kcol + 1)..n {
                    row_i[j] -= m_ik * row_k[j];
                }
            }
        }
    }
    let f = FactoredInteraction {
        n,
        lu,
        piv,
        a,
        condition_estimate: 0.0,
    };
    let cond = norm1 * f.inv_norm1_estimate();
    if !cond.is_finite() || cond > CONDITION_LIMIT {
        return Err(Error::Degenerate(format!(
            "condition estimate {cond:.3e} exceeds {CONDITION_LIMIT:.0e}"
        )));
    }
    Ok(FactoredInteraction {
        condition_estimate: cond,
        ..f
    })
}

impl FactoredInteraction {
    fn substitute(&self, b: &mut [Complex64]) {
        let n = self.n;
        for kcol in 0..n {
            b.swap(kcol, self.piv[kcol]);
        }
        for i in 1..n {
            let mut acc = b[i];
            for j in 0..i {
                acc -= self.lu[i * n + j] * b[j];
            }
            b[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = b[i];
            for j in (i + 1)..n {
                acc -= self.lu[i * n + j] * b[j];
            }
            b[i] = acc / self.lu[i * n + i];
        }
    }

    /// Solve with the conjugate transpose, `M^H x = c`. Used only by the
    /// condition estimator.
    fn substitute_adjoint(&self, c: &mut [Complex64]) {
        let n = self.n;
        for i in 0..n {
            let mut acc = c[i];
            for j in 0..i {
                acc -= self.lu[j * n + i].conj() * c[j];
            }
            c[i] = acc / self.lu[i * n + i].conj();
        }
        for i in (0..n).rev() {
            let mut acc = c[i];
            for j in (i + 1)..n {
                acc -= self.lu[j * n + i].conj() * c[j];
            }
            c[i] = acc;
        }
        for kcol in (0..n).rev() {
            c.swap(kcol, self.piv[kcol]);
        }
    }

    /// Hager-style lower bound on `|M^{-1}|_1`.
    fn inv_norm1_estimate(&self) -> f64 {
        let n = self.n;
        let mut x = vec![Complex64::new(1.0 / n as f64, 0.0); n];
        let mut est = 0.0;
        let mut visited = vec![false; n];
        for _ in 0..5 {
            let mut y = x.clone();
            self.substitute(&mut y);
            est = y.iter().map(|v| v.norm()).sum();
            let mut xi: Vec<Complex64> = y
                .iter()
                .map(|v| {
                    let m = v.norm();
                    if m == 0.0 {
                        Complex64::new(1.0, 0.0)
                    } else {
                        v / m
                    }
                })
                .collect();
            self.substitute_adjoint(&mut xi);
            let (mut jmax, mut zmax) = (0usize, 0.0f64);
            for (j, z) in xi.iter().enumerate() {
                let m = z.norm();
                if m > zmax {
                    zmax = m;
                    jmax = j;
                }
            }
            let overlap: f64 = xi
                .iter()
                .zip(&x)
                .map(|(z, xv)| (z.conj() * xv).re)
                .sum();
            if zmax <= overlap || visited[jmax] {
                break;
            }
            visited[jmax] = true;
            x = vec![Complex64::new(0.0, 0.0); n];
            x[jmax] = Complex64::new(1.0, 0.0);
        }
        est
    }

    fn multiply(&self, x: &[Complex64], out: &mut [Complex64]) {
        let n = self.n;
        for i in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            let row = &self.a[i * n..(i + 1) * n];
            for (aij, xj) in row.iter().zip(x) {
                acc += aij * xj;
            }
            out[i] = acc;
        }
    }

    /// Solve one right-hand side with one iterative-refinement step and a
    /// residual gate.
    pub fn solve(&self, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
        assert_eq!(rhs.len(), self.n);
        let mut x = rhs.to_vec();
        self.substitute(&mut x);
        let mut r = vec![Complex64::new(0.0, 0.0); self.n];
        self.multiply(&x, &mut r);
        for (ri, bi) in r.iter_mut().zip(rhs) {
            *ri = bi - *ri;
        }
        let mut dx = r.clone();
        self.substitute(&mut dx);
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
        self.multiply(&x, &mut r);
        let mut res2 = 0.0;
        let mut rhs2 = 0.0;
        for ((ri, bi), _) in r.iter().zip(rhs).zip(0..) {
            res2 += (bi - ri).norm_sqr();
            rhs2 += bi.norm_sqr();
        }
        let residual = (res2 / rhs2).sqrt();
        if !residual.is_finite() || residual > RESIDUAL_LIMIT {
            return Err(Error::Degenerate(format!(
                "relative residual {residual:.3e} exceeds {RESIDUAL_LIMIT:.0e} \
                 (condition estimate {:.3e})",
                self.condition_estimate
            )));
        }
        Ok(x)
    }

    /// Solve for the dipoles induced by an incident field.
    pub fn solve_excitation(
        &self,
        positions: &[Vector3<f64>],
        field: &ExcitationField,
        k: f64,
    ) -> Result<DipoleSolution> {
        assert_eq!(3 * positions.len(), self.n);
        let mut rhs = Vec::with_capacity(self.n);
        for r in positions {
            let e = field.eval_e(k, r);
            rhs.extend_from_slice(&[e.x, e.y, e.z]);
        }
        let x = self.solve(&rhs)?;
        let mut res2 = 0.0;
        let mut rhs2 = 0.0;
        let mut ax = vec![Complex64::new(0.0, 0.0); self.n];
        self.multiply(&x, &mut ax);
        for (axi, bi) in ax.iter().zip(&rhs) {
            res2 += (bi - axi).norm_sqr();
            rhs2 += bi.norm_sqr();
        }
        let dipoles = x
            .chunks_exact(3)
            .map(|c| Vector3::new(c[0], c[1], c[2]))
            .collect();
        Ok(DipoleSolution {
            dipoles,
            condition_estimate: self.condition_estimate,
            residual: (res2 / rhs2).sqrt(),
        })
    }
}

/// Convenience one-shot solve for a fixed polarizability.
pub fn solve_coupled_dipoles(
    positions: &[Vector3<f64>],
    alpha: Complex64,
    field: &ExcitationField,
    k: f64,
) -> Result<DipoleSolution> {
    let coupling = PairCoupling::build(positions, k)?;
    let factored = factor(coupling.assemble(alpha))?;
    factored.solve_excitation(positions, field, k)
}
