//! Characteristic modes: real currents solving `Im{Z} I = λ Re{Z} I`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::geometry::MeshId;
use crate::kernel::Wavenumber;
use crate::mom::ImpedanceMatrix;
use crate::scalar::{cplx, czero, dot2, pencil_residual, tr_mul_accurate, Complex, Float};

/// Default relative cut-off on the radiation-matrix spectrum.
pub const DEFAULT_RANK_TOL: f64 = 1e-12;

/// Relative tolerance below zero accepted for eigenvalues of `Re{Z}`.
pub const INDEFINITE_TOL: f64 = 1e-8;

/// Characteristic currents (columns), eigenvalues, and the data they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalBasis<T: Float> {
    pub currents: DMatrix<T>,
    pub eigenvalues: Vec<T>,
    pub mesh_id: MeshId,
    pub k: Wavenumber<T>,
    pub rank_tolerance: T,
}

impl<T: Float> ModalBasis<T> {
    /// Number of basis functions `N`.
    pub fn dim(&self) -> usize {
        self.currents.nrows()
    }

    /// Number of retained modes `M`.
    pub fn mode_count(&self) -> usize {
        self.currents.ncols()
    }

    pub fn current(&self, n: usize) -> DVector<T> {
        self.currents.column(n).into_owned()
    }

    /// Key used to fix the evaluation order of cross-basis products.
    pub(crate) fn ordering_key(&self) -> (MeshId, usize, u64, u64) {
        (
            self.mesh_id.clone(),
            self.mode_count(),
            self.rank_tolerance.to_f64_lossy().to_bits(),
            self.k.k().to_f64_lossy().to_bits(),
        )
    }

    /// Checks normalization, orthogonality and eigen-residuals against `z`.
    ///
    /// Each allowance is the nominal tolerance plus the rounding bound `N·ε·‖I_m‖‖I_n‖‖A‖`
    /// for evaluating the form. Modes close to the rank cut-off have `‖I_n‖ ~ s^{-1/2}`,
    /// so for them the rounding bound dominates; for well-radiating modes it is negligible.
    pub fn diagnostics(&self, z: &ImpedanceMatrix<T>) -> ModalDiagnostics {
        let r = z.re().map(|v| v.to_f64_lossy());
        let x = z.im().map(|v| v.to_f64_lossy());
        let cur = self.currents.map(|v| v.to_f64_lossy());
        let lam: Vec<f64> = self.eigenvalues.iter().map(|v| v.to_f64_lossy()).collect();
        let eps = T::machine_eps().to_f64_lossy();
        let nf = self.dim() as f64;
        let (rn, xn) = (r.norm(), x.norm());
        let norms: Vec<f64> = cur.column_iter().map(|c| c.norm()).collect();
        let (rc, xc) = (tr_mul_accurate(&r, &cur), tr_mul_accurate(&x, &cur));
        let gram_r = tr_mul_accurate(&cur, &rc);
        let gram_x = tr_mul_accurate(&cur, &xc);
        let mut d = ModalDiagnostics::default();
        let m = self.mode_count();
        for i in 0..m {
            for j in 0..m {
                let floor = nf * eps * norms[i] * norms[j];
                if i == j {
                    d.normalization
                        .record((gram_r[(i, j)] - 1.0).abs(), NORMALIZATION_TOL + floor * rn);
                    d.reactance.record(
                        (gram_x[(i, j)] - lam[i]).abs(),
                        REACTANCE_TOL * lam[i].abs().max(1.0) + floor * xn,
                    );
                } else {
                    d.orthogonality
                        .record(gram_r[(i, j)].abs(), ORTHOGONALITY_TOL + floor * rn);
                    let scale = lam[i].abs().max(lam[j].abs()).max(1.0);
                    d.reactance
                        .record(gram_x[(i, j)].abs(), REACTANCE_TOL * scale + floor * xn);
                }
            }
            let res = (xc.column(i) - rc.column(i) * lam[i]).norm();
            let allowance = RESIDUAL_TOL * xn + nf * eps * (xn + lam[i].abs() * rn) * norms[i];
            d.eigen_residual.record(res / xn, allowance / xn);
        }
        d
    }
}

pub const NORMALIZATION_TOL: f64 = 1e-8;
pub const ORTHOGONALITY_TOL: f64 = 1e-6;
/// Relative to `max(1, |λ|)`.
pub const REACTANCE_TOL: f64 = 1e-6;
/// Relative to `‖Im{Z}‖`.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Worst error of one modal identity and its worst ratio to the allowance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ModalCheck {
    pub worst: f64,
    pub ratio: f64,
}

impl ModalCheck {
    fn record(&mut self, err: f64, allowance: f64) {
        self.worst = self.worst.max(err);
        let ratio = if err.is_nan() { f64::INFINITY } else { err / allowance };
        self.ratio = self.ratio.max(ratio);
    }

    pub fn passes(&self) -> bool {
        self.ratio <= 1.0
    }
}

/// Deviations from the modal identities, see [`ModalBasis::diagnostics`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ModalDiagnostics {
    /// `|I_nᵀ R I_n − 1|`
    pub normalization: ModalCheck,
    /// `|I_mᵀ R I_n|`, `m ≠ n`
    pub orthogonality: ModalCheck,
    /// `|I_mᵀ X I_n − λ_n δ_mn|`
    pub reactance: ModalCheck,
    /// `‖X I_n − λ_n R I_n‖ / ‖X‖`
    pub eigen_residual: ModalCheck,
}

impl ModalDiagnostics {
    pub fn passes(&self) -> bool {
        self.normalization.passes()
            && self.orthogonality.passes()
            && self.reactance.passes()
            && self.eigen_residual.passes()
    }

    /// Name of the first failing identity, if any.
    pub fn first_failure(&self) -> Option<&'static str> {
        [
            ("normalization", self.normalization),
            ("orthogonality", self.orthogonality),
            ("reactance", self.reactance),
            ("eigen residual", self.eigen_residual),
        ]
        .into_iter()
        .find(|(_, c)| !c.passes())
        .map(|(n, _)| n)
    }
}

fn symmetrize<T: Float>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.transpose()) * T::lit(0.5)
}

/// Generalized symmetric eigenproblem `X I = λ R I` with `R = Re{Z}`, `X = Im{Z}`.
///
/// `R` is split into the eigenspace above `rank_tol · max eig(R)` and its numerically
/// non-radiating complement. On the complement `R` is taken as zero, which forces
/// `(X I)` to vanish there; eliminating those coordinates leaves the Schur complement
/// `X̃ = X₁₁ − X₁₂ X₂₂⁻¹ X₂₁` paired with the diagonal `R₁`, solved as a standard
/// symmetric eigenproblem after whitening by `R₁^{-1/2}`.
pub fn characteristic_modes<T: Float>(z: &ImpedanceMatrix<T>, rank_tol: T) -> Result<ModalBasis<T>> {
    if !(rank_tol > T::zero()) || rank_tol >= T::one() {
        return Err(Error::InvalidParameter("rank tolerance must lie in (0, 1)".into()));
    }
    let r = symmetrize(&z.re());
    let x = symmetrize(&z.im());
    let n = r.nrows();
    let eig_r = SymmetricEigen::new(r.clone());
    let smax = eig_r.eigenvalues.iter().fold(T::zero(), |a, &b| a.max(b));
    if !(smax > T::zero()) {
        return Err(Error::Degenerate("radiation matrix has no positive eigenvalue".into()));
    }
    // INDEFINITE_TOL is below single-precision resolution, so never go under N·ε
    let neg_tol = -T::lit(INDEFINITE_TOL).max(T::of_usize(n) * T::machine_eps()) * smax;
    if let Some(&worst) = eig_r
        .eigenvalues
        .iter()
        .filter(|&&s| s < neg_tol)
        .min_by(|a, b| a.partial_cmp(b).unwrap())
    {
        return Err(Error::IndefiniteRadiationMatrix {
            eigenvalue: worst.to_f64_lossy(),
            tolerance: neg_tol.to_f64_lossy(),
        });
    }
    let cut = rank_tol * smax;
    let (kept, dropped): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| eig_r.eigenvalues[i] > cut);
    let m = kept.len();
    let v1 = eig_r.eigenvectors.select_columns(kept.iter());
    let v2 = eig_r.eigenvectors.select_columns(dropped.iter());
    let x11 = v1.transpose() * &x * &v1;
    // coordinates in the dropped subspace: w = −X₂₂⁻¹ X₂₁ y
    let completion = if dropped.is_empty() {
        DMatrix::<T>::zeros(0, m)
    } else {
        let x21 = v2.transpose() * &x * &v1;
        let x22 = v2.transpose() * &x * &v2;
        let lu = x22.lu();
        let sol = lu
            .solve(&x21)
            .ok_or_else(|| Error::Degenerate("reactance is singular on the non-radiating subspace".into()))?;
        -sol
    };
    let schur = if dropped.is_empty() {
        x11
    } else {
        let x12 = v1.transpose() * &x * &v2;
        x11 + x12 * &completion
    };
    let inv_sqrt: Vec<T> = kept.iter().map(|&i| T::one() / eig_r.eigenvalues[i].sqrt()).collect();
    let whitened = DMatrix::from_fn(m, m, |i, j| schur[(i, j)] * inv_sqrt[i] * inv_sqrt[j]);
    let eig_c = SymmetricEigen::new(symmetrize(&whitened));
    let y0 = DMatrix::from_fn(m, m, |i, j| eig_c.eigenvectors[(i, j)] * inv_sqrt[i]);
    let s1: Vec<T> = kept.iter().map(|&i| eig_r.eigenvalues[i]).collect();
    let (y, lambdas) = refine(&symmetrize(&schur), &s1, y0, &eig_c.eigenvalues);
    let raw = if dropped.is_empty() {
        &v1 * &y
    } else {
        &v1 * &y + &v2 * (&completion * &y)
    };
    let (raw, lambdas) = polish(&x, &r, raw, &lambdas);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| {
        let (li, lj) = (lambdas[i], lambdas[j]);
        li.abs()
            .partial_cmp(&lj.abs())
            .unwrap()
            .then(li.partial_cmp(&lj).unwrap())
    });
    let mut currents = DMatrix::<T>::zeros(n, m);
    for (c, &i) in order.iter().enumerate() {
        let col = raw.column(i).into_owned();
        let rc = DVector::from_fn(n, |i, _| dot2(r.column(i).as_slice(), col.as_slice()));
        let norm2 = dot2(col.as_slice(), rc.as_slice());
        currents.set_column(c, &(col / norm2.sqrt()));
    }
    let currents = orthonormalize(&r, currents);
    let gram_x = tr_mul_accurate(&currents, &tr_mul_accurate(&x, &currents));
    let mut eigenvalues = Vec::with_capacity(m);
    let mut currents = currents;
    for c in 0..m {
        let mut col = currents.column(c).into_owned();
        let (imax, _) =
            col.iter().enumerate().fold(
                (0, T::zero()),
                |(bi, bv), (ii, &v)| if v.abs() > bv { (ii, v.abs()) } else { (bi, bv) },
            );
        if col[imax] < T::zero() {
            col = -col;
            currents.set_column(c, &col);
        }
        eigenvalues.push(gram_x[(c, c)]);
    }
    Ok(ModalBasis {
        currents,
        eigenvalues,
        mesh_id: z.mesh_id.clone(),
        k: z.k,
        rank_tolerance: rank_tol,
    })
}

/// Whitening by `R₁^{-1/2}` spreads the pencil over many decades, and a dense
/// eigensolver then resolves small `|λ|` only to `ε·max|λ|`. One step of inverse
/// iteration on the unwhitened pencil `(X̃ − σR₁)` restores accuracy relative to
/// `‖X̃‖`, and the Rayleigh quotient then fixes `λ`.
fn refine<T: Float>(schur: &DMatrix<T>, s1: &[T], y0: DMatrix<T>, lambda0: &DVector<T>) -> (DMatrix<T>, Vec<T>) {
    let m = s1.len();
    let cols: Vec<(DVector<T>, T)> = (0..m)
        .into_iter()
        .map(|c| {
            let mut y = y0.column(c).into_owned();
            let sigma = lambda0[c];
            let shifted = DMatrix::from_fn(m, m, |i, j| {
                if i == j {
                    schur[(i, j)] - sigma * s1[i]
                } else {
                    schur[(i, j)]
                }
            });
            let lu = shifted.lu();
            for _ in 0..2 {
                let rhs = DVector::from_fn(m, |i, _| s1[i] * y[i]);
                match lu.solve(&rhs) {
                    Some(z) if z.iter().all(|v| v.is_finite()) => {
                        let nz = s1_norm(&z, s1);
                        if !(nz > T::zero()) {
                            break;
                        }
                        let z = z / nz;
                        // keep the sign of the starting vector
                        y = if z.dot(&y) < T::zero() { -z } else { z };
                    }
                    _ => break,
                }
            }
            let ny = s1_norm(&y, s1);
            y /= ny;
            let lambda = (y.transpose() * schur * &y)[(0, 0)];
            (y, lambda)
        })
        .collect();
    let mut y = DMatrix::zeros(m, m);
    let mut lambdas = Vec::with_capacity(m);
    for (c, (col, l)) in cols.into_iter().enumerate() {
        y.set_column(c, &col);
        lambdas.push(l);
    }
    (y, lambdas)
}

/// Inverse iteration on the full pencil `(X − σR)`, which also removes the
/// residual left by treating `R` as zero on the dropped subspace, followed by
/// residual correction with accurately evaluated residuals.
fn polish<T: Float>(x: &DMatrix<T>, r: &DMatrix<T>, raw: DMatrix<T>, lambda0: &[T]) -> (DMatrix<T>, Vec<T>) {
    let mut out = raw.clone();
    let mut lambdas = lambda0.to_vec();
    for c in 0..raw.ncols() {
        let mut v = raw.column(c).into_owned();
        let lu = (x - r * lambda0[c]).lu();
        if let Some(z) = lu.solve(&(r * &v)) {
            if z.iter().all(|e| e.is_finite()) {
                let z = if z.dot(&v) < T::zero() { -z } else { z };
                if let Some((zn, _)) = normalized(r, z) {
                    v = zn;
                }
            }
        }
        let mut lambda = rayleigh(x, r, &v);
        for _ in 0..2 {
            let res = pencil_residual(x, r, lambda, v.as_slice());
            let Some(d) = lu.solve(&res) else { break };
            // keep the correction R-orthogonal to v so it cannot rescale it
            let rv = DVector::from_fn(v.len(), |i, _| dot2(r.column(i).as_slice(), v.as_slice()));
            let d = &d - &v * dot2(d.as_slice(), rv.as_slice());
            if !d.iter().all(|e| e.is_finite()) {
                break;
            }
            match normalized(r, &v - d) {
                Some((vn, _)) => v = vn,
                None => break,
            }
            lambda = rayleigh(x, r, &v);
        }
        lambdas[c] = lambda;
        out.set_column(c, &v);
    }
    (out, lambdas)
}

fn r_form<T: Float>(a: &DMatrix<T>, v: &DVector<T>) -> T {
    let av = DVector::from_fn(v.len(), |i, _| dot2(a.column(i).as_slice(), v.as_slice()));
    dot2(v.as_slice(), av.as_slice())
}

fn normalized<T: Float>(r: &DMatrix<T>, v: DVector<T>) -> Option<(DVector<T>, T)> {
    let n2 = r_form(r, &v);
    (n2 > T::zero()).then(|| (v / n2.sqrt(), n2))
}

fn rayleigh<T: Float>(x: &DMatrix<T>, r: &DMatrix<T>, v: &DVector<T>) -> T {
    r_form(x, v) / r_form(r, v)
}

/// Gram–Schmidt in `R`, in mode order. Columns are sorted by `|λ|`, which also sorts
/// them by norm, so weakly radiating large-norm currents are corrected against the
/// strong ones and never the other way round.
fn orthonormalize<T: Float>(r: &DMatrix<T>, mut currents: DMatrix<T>) -> DMatrix<T> {
    let n = currents.nrows();
    for c in 0..currents.ncols() {
        let mut v = currents.column(c).into_owned();
        for _ in 0..2 {
            let rv = DVector::from_fn(n, |i, _| dot2(r.column(i).as_slice(), v.as_slice()));
            for p in 0..c {
                let coef = dot2(currents.column(p).as_slice(), rv.as_slice());
                v -= currents.column(p) * coef;
            }
        }
        if let Some((vn, _)) = normalized(r, v) {
            currents.set_column(c, &vn);
        }
    }
    currents
}

fn s1_norm<T: Float>(v: &DVector<T>, s1: &[T]) -> T {
    v.iter().zip(s1).fold(T::zero(), |a, (&x, &s)| a + s * x * x).sqrt()
}

/// `−diag 1/(1 + jλ_n)`: the perturbation matrix of a structure in its own modes.
pub fn diag_perturbation<T: Float>(eigenvalues: &[T]) -> DMatrix<Complex<T>> {
    let n = eigenvalues.len();
    let mut p = DMatrix::from_element(n, n, czero::<T>());
    for (i, &l) in eigenvalues.iter().enumerate() {
        p[(i, i)] = -cplx(T::one(), T::zero()) / cplx(T::one(), l);
    }
    p
}
