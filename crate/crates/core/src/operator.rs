//! Dense complex operators and density matrices.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Square complex matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct Operator {
    dim: usize,
    data: Vec<C64>,
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Operator({}x{})", self.dim, self.dim)?;
        for r in 0..self.dim {
            let row: Vec<String> = (0..self.dim)
                .map(|c| {
                    let z = self[(r, c)];
                    format!("{:+.4e}{:+.4e}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl Operator {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "operator dimension must be positive");
        Self { dim, data: vec![ZERO; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut op = Self::zeros(dim);
        for i in 0..dim {
            op[(i, i)] = ONE;
        }
        op
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut op = Self::zeros(dim);
        for r in 0..dim {
            for c in 0..dim {
                op[(r, c)] = f(r, c);
            }
        }
        op
    }

    /// Builds an operator from row-major entries; fails unless `entries.len() == dim²`.
    pub fn from_row_major(dim: usize, entries: Vec<C64>) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: entries.len() });
        }
        Ok(Self { dim, data: entries })
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut op = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            op[(i, i)] = C64::new(v, 0.0);
        }
        op
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn dagger(&self) -> Self {
        Self::from_fn(self.dim, |r, c| self[(c, r)].conj())
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "operator dimension mismatch");
        let d = self.dim;
        let mut out = Self::zeros(d);
        for r in 0..d {
            for k in 0..d {
                let a = self.data[r * d + k];
                if a == ZERO {
                    continue;
                }
                for c in 0..d {
                    out.data[r * d + c] += a * rhs.data[k * d + c];
                }
            }
        }
        out
    }

    pub fn commutator(&self, rhs: &Self) -> Self {
        &self.matmul(rhs) - &rhs.matmul(self)
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entry modulus of `A − A†`.
    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0_f64;
        for r in 0..d {
            for c in r..d {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() < tol
    }

    /// Replaces the operator by `(A + A†)/2`, returning the defect before repair.
    pub fn symmetrize(&mut self) -> f64 {
        let defect = self.hermiticity_defect();
        let d = self.dim;
        for r in 0..d {
            for c in r..d {
                let avg = 0.5 * (self[(r, c)] + self[(c, r)].conj());
                self[(r, c)] = avg;
                self[(c, r)] = avg.conj();
            }
        }
        defect
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues_hermitian(&self) -> Vec<f64> {
        let d = self.dim;
        let m = DMatrix::from_fn(d, d, |r, c| 0.5 * (self[(r, c)] + self[(c, r)].conj()));
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Non-zero entries as `(row, col, value)`.
    pub fn nonzeros(&self) -> Vec<(usize, usize, C64)> {
        let d = self.dim;
        let mut out = Vec::new();
        for r in 0..d {
            for c in 0..d {
                let z = self.data[r * d + c];
                if z != ZERO {
                    out.push((r, c, z));
                }
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `tr(A† B)`, the Hilbert–Schmidt inner product.
    pub fn inner(&self, other: &Self) -> C64 {
        assert_eq!(self.dim, other.dim, "operator dimension mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum()
    }
}

/// Single-entry operator `|m⟩⟨n|`.
pub fn projector(m: usize, n: usize, dim: usize) -> Result<Operator> {
    if m >= dim || n >= dim {
        return Err(Error::IndexOutOfRange { row: m, col: n, dim });
    }
    let mut op = Operator::zeros(dim);
    op[(m, n)] = ONE;
    Ok(op)
}

impl Index<(usize, usize)> for Operator {
    type Output = C64;

    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        assert!(r < self.dim && c < self.dim, "operator index out of range");
        &self.data[r * self.dim + c]
    }
}

impl IndexMut<(usize, usize)> for Operator {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        assert!(r < self.dim && c < self.dim, "operator index out of range");
        &mut self.data[r * self.dim + c]
    }
}

impl Add for &Operator {
    type Output = Operator;

    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim, "operator dimension mismatch");
        Operator {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Operator {
    type Output = Operator;

    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim, "operator dimension mismatch");
        Operator {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl AddAssign<&Operator> for Operator {
    fn add_assign(&mut self, rhs: &Operator) {
        assert_eq!(self.dim, rhs.dim, "operator dimension mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl Mul for &Operator {
    type Output = Operator;

    fn mul(self, rhs: &Operator) -> Operator {
        self.matmul(rhs)
    }
}

impl Neg for &Operator {
    type Output = Operator;

    fn neg(self) -> Operator {
        self.scale_real(-1.0)
    }
}

/// A density matrix, or an unnormalized conditional state such as `a ρ a†`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub op: Operator,
    pub normalized: bool,
}

impl DensityMatrix {
    pub fn new(op: Operator, normalized: bool) -> Self {
        Self { op, normalized }
    }

    /// Pure basis state `|k⟩⟨k|`.
    pub fn basis(k: usize, dim: usize) -> Result<Self> {
        Ok(Self { op: projector(k, k, dim)?, normalized: true })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { op: Operator::identity(dim).scale_real(1.0 / dim as f64), normalized: true }
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn trace(&self) -> f64 {
        self.op.trace().re
    }

    pub fn population(&self, k: usize) -> f64 {
        self.op[(k, k)].re
    }

    /// `tr(A ρ)`.
    pub fn expect(&self, a: &Operator) -> C64 {
        a.matmul(&self.op).trace()
    }
}

/// Diagnostic summary produced by [`validate_density`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityReport {
    pub hermiticity_defect: f64,
    /// `tr ρ − 1` for normalized states, `tr ρ` otherwise.
    pub trace_deviation: f64,
    pub min_eigenvalue: f64,
    pub hermiticity_violation: bool,
    pub trace_violation: bool,
    pub positivity_violation: bool,
}

impl DensityReport {
    pub fn is_valid(&self) -> bool {
        !(self.hermiticity_violation || self.trace_violation || self.positivity_violation)
    }
}

/// Checks Hermiticity, trace and positivity of `rho` against `tol`.
///
/// Normalized states must have unit trace. Conditional states only need a
/// non-negative trace: with a summed emission operator their trace is the
/// emission rate and can exceed one.
pub fn validate_density(rho: &DensityMatrix, tol: f64) -> DensityReport {
    let hermiticity_defect = rho.op.hermiticity_defect();
    let trace = rho.op.trace();
    let min_eigenvalue = rho.op.eigenvalues_hermitian().first().copied().unwrap_or(0.0);
    let (trace_deviation, trace_violation) = if rho.normalized {
        let dev = trace.re - 1.0;
        (dev, dev.abs() > tol || trace.im.abs() > tol)
    } else {
        (trace.re, trace.re < -tol || trace.im.abs() > tol)
    };
    DensityReport {
        hermiticity_defect,
        trace_deviation,
        min_eigenvalue,
        hermiticity_violation: hermiticity_defect > tol,
        trace_violation,
        positivity_violation: min_eigenvalue < -tol,
    }
}

/// Validates and, if `repair` is set, re-symmetrizes `rho` in place.
pub fn check_and_repair(rho: &mut DensityMatrix, tol: f64, repair: bool) -> DensityReport {
    let report = validate_density(rho, tol);
    if repair {
        let defect = rho.op.symmetrize();
        log::debug!("hermiticity defect before repair: {defect:.3e}");
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projector_entries() {
        let s = projector(0, 1, 2).unwrap();
        assert_eq!(s[(0, 1)], ONE);
        assert_eq!(s.nonzeros().len(), 1);
        let ee = projector(1, 1, 2).unwrap();
        assert_eq!(ee, Operator::diagonal(&[0.0, 1.0]));
        let p = projector(0, 3, 4).unwrap();
        assert_eq!(p.dagger().matmul(&p), projector(3, 3, 4).unwrap());
    }

    #[test]
    fn projector_out_of_range() {
        assert_eq!(projector(2, 0, 2), Err(Error::IndexOutOfRange { row: 2, col: 0, dim: 2 }));
        assert!(projector(0, 4, 4).is_err());
    }

    #[test]
    fn projector_products_exhaustive() {
        for dim in 1..=4 {
            for m in 0..dim {
                for n in 0..dim {
                    for p in 0..dim {
                        for q in 0..dim {
                            let lhs = projector(m, n, dim).unwrap().matmul(&projector(p, q, dim).unwrap());
                            let rhs = if n == p { projector(m, q, dim).unwrap() } else { Operator::zeros(dim) };
                            assert_eq!(lhs, rhs);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn double_dagger_is_identity() {
        let a = &(&projector(0, 1, 3).unwrap() + &projector(2, 1, 3).unwrap().scale(C64::new(0.3, -2.0)))
            + &projector(1, 1, 3).unwrap();
        assert_eq!(a.dagger().dagger(), a);
    }

    #[test]
    fn from_row_major_checks_length() {
        assert!(Operator::from_row_major(2, vec![ZERO; 3]).is_err());
        assert!(Operator::from_row_major(2, vec![ZERO; 4]).is_ok());
    }

    #[test]
    fn validate_maximally_mixed() {
        let r = validate_density(&DensityMatrix::maximally_mixed(4), 1e-8);
        assert!(r.is_valid());
        assert_eq!(r.hermiticity_defect, 0.0);
        assert!(r.trace_deviation.abs() < 1e-15);
        assert!((r.min_eigenvalue - 0.25).abs() < 1e-12);
    }

    #[test]
    fn validate_excited_tls() {
        let r = validate_density(&DensityMatrix::basis(1, 2).unwrap(), 1e-8);
        assert!(r.is_valid());
    }

    #[test]
    fn validate_flags_trace() {
        let rho = DensityMatrix::new(Operator::diagonal(&[0.5, 0.47]), true);
        let r = validate_density(&rho, 1e-8);
        assert!(r.trace_violation);
        assert!(!r.hermiticity_violation);
        assert!(!r.positivity_violation);
        assert!((r.trace_deviation + 0.03).abs() < 1e-12);
    }

    #[test]
    fn validate_flags_negativity_and_asymmetry() {
        let rho = DensityMatrix::new(Operator::diagonal(&[1.1, -0.1]), true);
        assert!(validate_density(&rho, 1e-8).positivity_violation);
        let mut op = Operator::diagonal(&[0.5, 0.5]);
        op[(0, 1)] = C64::new(0.1, 0.0);
        let mut rho = DensityMatrix::new(op, true);
        let r = check_and_repair(&mut rho, 1e-8, true);
        assert!(r.hermiticity_violation);
        assert!(validate_density(&rho, 1e-8).is_valid());
    }

    #[test]
    fn conditional_trace_may_exceed_one() {
        let rho = DensityMatrix::new(Operator::diagonal(&[2.0, 0.0]), false);
        assert!(validate_density(&rho, 1e-8).is_valid());
    }
}
