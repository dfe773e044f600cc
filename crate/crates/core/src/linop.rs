//! The linearized operator `L = M + omega - f'(phi)` (regularized:
//! `omega M + (omega - 1) - f'(phi)`) as a dense collocation matrix, with its
//! sorted eigendecomposition, hypothesis checks and constrained solves.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::output::csv_table;
use crate::spectral::{even_multiplier_matrix, multiplier_matrix, sobolev_weights, DispersionSymbol, Field, PeriodicGrid};
use crate::waves::{Equation, TravelingWave, Variant};

/// Relative kernel component above which a right-hand side is rejected.
pub const COMPATIBILITY_TOL: f64 = 1e-8;

/// Dense symmetric collocation matrix with its eigendecomposition.
#[derive(Debug, Clone)]
pub struct LinearizedOperator {
    grid: PeriodicGrid,
    equation: Equation,
    speed: f64,
    potential: Vec<f64>,
    matrix: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    zero_tol: f64,
}

/// Assembles `L` at the wave; `variant` overrides the wave's own variant.
pub fn assemble(w: &TravelingWave, variant: Option<Variant>) -> LinearizedOperator {
    let mut equation = w.equation;
    if let Some(v) = variant {
        equation.variant = v;
    }
    LinearizedOperator::new(&w.profile, w.speed, equation)
}

impl LinearizedOperator {
    /// Linearization of the profile equation at `phi` with speed `omega`.
    pub fn new(phi: &Field, omega: f64, equation: Equation) -> Self {
        let grid = *phi.grid();
        let (cm, c0) = equation.profile_coefficients(omega);
        let nl = equation.nonlinearity;
        let potential: Vec<f64> = phi.values().iter().map(|&p| c0 - nl.derivative(p)).collect();
        let mut matrix = multiplier_matrix(&equation.symbol, &grid) * cm;
        for (i, v) in potential.iter().enumerate() {
            matrix[(i, i)] += v;
        }
        let sym = (&matrix + matrix.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym.clone());
        let mut order: Vec<usize> = (0..grid.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let eigenvectors = DMatrix::from_fn(grid.len(), grid.len(), |r, c| eig.eigenvectors[(r, order[c])]);
        let scale = eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
        Self { grid, equation, speed: omega, potential, matrix: sym, eigenvalues, eigenvectors, zero_tol: 1e-8 * scale }
    }

    /// Replaces the zero band half-width.
    pub fn with_zero_tol(mut self, zero_tol: f64) -> Self {
        self.zero_tol = zero_tol;
        self
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn equation(&self) -> &Equation {
        &self.equation
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn variant(&self) -> Variant {
        self.equation.variant
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors as columns, in the order of [`Self::eigenvalues`].
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn eigenvector(&self, i: usize) -> Field {
        Field::new(self.grid, self.eigenvectors.column(i).iter().copied().collect()).expect("grid size")
    }

    pub fn zero_tol(&self) -> f64 {
        self.zero_tol
    }

    /// Spectral norm.
    pub fn norm(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m, l| m.max(l.abs()))
    }

    /// Matrix-free action through the multiplier and the pointwise potential.
    pub fn apply(&self, v: &Field) -> Field {
        let (cm, _) = self.equation.profile_coefficients(self.speed);
        let mv = v.apply_multiplier(&self.equation.symbol);
        let vals = mv.values().iter().zip(v.values()).zip(&self.potential).map(|((m, x), p)| cm * m + p * x).collect();
        Field::new(self.grid, vals).expect("grid size")
    }

    /// Number of eigenvalues below `-zero_tol`.
    pub fn negative_count(&self) -> usize {
        self.eigenvalues.iter().filter(|&&l| l < -self.zero_tol).count()
    }

    /// Indices of eigenvalues inside the zero band.
    pub fn kernel_indices(&self) -> Vec<usize> {
        (0..self.eigenvalues.len()).filter(|&i| self.eigenvalues[i].abs() <= self.zero_tol).collect()
    }

    /// Index of the eigenvalue closest to zero.
    pub fn nearest_zero_index(&self) -> usize {
        (0..self.eigenvalues.len())
            .min_by(|&a, &b| self.eigenvalues[a].abs().total_cmp(&self.eigenvalues[b].abs()))
            .unwrap_or(0)
    }

    /// Unit kernel vector when the zero band holds exactly one eigenvalue.
    fn kernel_vector(&self) -> Result<Option<DVector<f64>>> {
        match self.kernel_indices().as_slice() {
            [] => Ok(None),
            [i] => Ok(Some(self.eigenvectors.column(*i).into_owned())),
            more => Err(Error::NearSingular { eigenvalue: self.eigenvalues[more[1]] }),
        }
    }

    /// Errors unless `L` is invertible on the complement of an at most
    /// one-dimensional kernel.
    pub fn check_invertible_on_complement(&self) -> Result<()> {
        self.kernel_vector().map(|_| ())
    }

    fn bordered_solve(&self, rhs: &DVector<f64>, kernel: Option<&DVector<f64>>) -> Result<DVector<f64>> {
        let n = self.grid.len();
        let x = match kernel {
            None => {
                let lu = self.matrix.clone().lu();
                lu.solve(rhs).ok_or(Error::NearSingular { eigenvalue: self.eigenvalues[self.nearest_zero_index()] })?
            }
            Some(v0) => {
                let mut big = DMatrix::<f64>::zeros(n + 1, n + 1);
                big.view_mut((0, 0), (n, n)).copy_from(&self.matrix);
                for i in 0..n {
                    big[(i, n)] = v0[i];
                    big[(n, i)] = v0[i];
                }
                let mut r = DVector::<f64>::zeros(n + 1);
                r.rows_mut(0, n).copy_from(rhs);
                let sol = big
                    .lu()
                    .solve(&r)
                    .ok_or(Error::NearSingular { eigenvalue: self.eigenvalues[self.nearest_zero_index()] })?;
                sol.rows(0, n).into_owned()
            }
        };
        if x.iter().all(|v| v.is_finite()) {
            Ok(x)
        } else {
            Err(Error::NearSingular { eigenvalue: self.eigenvalues[self.nearest_zero_index()] })
        }
    }

    /// Solves `L x = b` with `x` orthogonal to the kernel; `b` must have no
    /// kernel component beyond `1e-8 |b|`.
    pub fn solve_on_complement(&self, b: &Field) -> Result<Field> {
        self.grid.check_same(b.grid())?;
        let kernel = self.kernel_vector()?;
        let rhs = DVector::from_column_slice(b.values());
        if let Some(v0) = &kernel {
            let component = v0.dot(&rhs).abs();
            let tolerance = COMPATIBILITY_TOL * rhs.norm();
            if component > tolerance {
                return Err(Error::Incompatible { component, tolerance });
            }
        }
        let x = self.bordered_solve(&rhs, kernel.as_ref())?;
        Field::new(self.grid, x.iter().copied().collect())
    }

    /// Like [`Self::solve_on_complement`] but removes any kernel component of
    /// `b` first instead of rejecting it.
    pub fn solve_projected(&self, b: &Field) -> Result<Field> {
        self.grid.check_same(b.grid())?;
        let kernel = self.kernel_vector()?;
        let mut rhs = DVector::from_column_slice(b.values());
        if let Some(v0) = &kernel {
            let c = v0.dot(&rhs);
            rhs.axpy(-c, v0, 1.0);
        }
        let x = self.bordered_solve(&rhs, kernel.as_ref())?;
        Field::new(self.grid, x.iter().copied().collect())
    }

    /// `b` minus its kernel component.
    pub fn project_out_kernel(&self, b: &Field) -> Result<Field> {
        let mut rhs = DVector::from_column_slice(b.values());
        if let Some(v0) = self.kernel_vector()? {
            let c = v0.dot(&rhs);
            rhs.axpy(-c, &v0, 1.0);
        }
        Field::new(self.grid, rhs.iter().copied().collect())
    }

    /// CSV with columns `index,eigenvalue`.
    pub fn spectrum_csv(&self) -> String {
        csv_table(&["index", "eigenvalue"], self.eigenvalues.iter().enumerate().map(|(i, &l)| vec![i as f64, l]))
    }
}

/// Outcome of the spectral hypothesis check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub n_neg: usize,
    pub zero_dim: usize,
    pub n_pos: usize,
    pub kernel_alignment: f64,
    pub h0_pass: bool,
    pub zero_tol: f64,
    /// Eigenvalues outside the zero band but within ten times of it.
    pub ambiguous: Vec<f64>,
}

/// One simple negative eigenvalue and a simple zero eigenvalue spanned by `phi'`.
pub fn check_h0(lin: &LinearizedOperator, w: &TravelingWave, zero_tol: Option<f64>) -> SpectralReport {
    let tol = zero_tol.unwrap_or(lin.zero_tol);
    let ev = &lin.eigenvalues;
    let n_neg = ev.iter().filter(|&&l| l < -tol).count();
    let zero_dim = ev.iter().filter(|&&l| l.abs() <= tol).count();
    let n_pos = ev.len() - n_neg - zero_dim;
    let ambiguous = ev.iter().copied().filter(|l| l.abs() > tol && l.abs() <= 10.0 * tol).collect();
    let dphi = w.translation_mode();
    let v0 = lin.eigenvector(lin.nearest_zero_index());
    let norms = dphi.inner(&dphi).unwrap_or(0.0).sqrt() * v0.inner(&v0).unwrap_or(0.0).sqrt();
    let kernel_alignment = if norms > 0.0 { v0.inner(&dphi).unwrap_or(0.0).abs() / norms } else { 0.0 };
    let h0_pass = n_neg == 1 && zero_dim == 1 && kernel_alignment > 1.0 - 1e-6;
    SpectralReport { n_neg, zero_dim, n_pos, kernel_alignment, h0_pass, zero_tol: tol, ambiguous }
}

/// Garding-type constants `(c1, c2)` with `(Lv, v) >= c1 |v|_{m/2}^2 - c2 |v|^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct H1Constants {
    pub c1: f64,
    pub c2: f64,
    pub pass: bool,
}

/// Fixes `c1` at half the symbol's lower growth constant (converted to the
/// `xi`-weighted norm and scaled by the multiplier coefficient) and returns
/// the smallest admissible `c2`.
pub fn h1_constants(lin: &LinearizedOperator, s: &DispersionSymbol) -> H1Constants {
    let grid = lin.grid;
    let (cm, _) = lin.equation.profile_coefficients(lin.speed);
    let c1 = 0.5 * cm * s.lower * (grid.length() / (2.0 * PI)).powf(s.order);
    if !(c1 > 0.0) {
        return H1Constants { c1, c2: f64::INFINITY, pass: false };
    }
    let weights = sobolev_weights(&grid, 0.5 * s.order);
    let lambda = even_multiplier_matrix(&grid, &weights);
    let shifted = &lin.matrix - lambda * c1;
    let shifted = (&shifted + shifted.transpose()) * 0.5;
    let min = SymmetricEigen::new(shifted).eigenvalues.iter().fold(f64::INFINITY, |m, &l| m.min(l));
    let c2 = (-min).max(0.0);
    H1Constants { c1, c2, pass: c2.is_finite() }
}

/// Minimum of `(Lv, v) / (v, v)` over `v` orthogonal to every constraint.
pub fn constrained_min_rayleigh(lin: &LinearizedOperator, constraints: &[Field]) -> Result<(f64, Field)> {
    let n = lin.grid.len();
    if constraints.is_empty() {
        return Ok((lin.eigenvalues[0], lin.eigenvector(0)));
    }
    if constraints.len() >= n {
        return Err(Error::Usage("too many constraints".into()));
    }
    let mut c = DMatrix::<f64>::zeros(n, constraints.len());
    for (j, f) in constraints.iter().enumerate() {
        lin.grid.check_same(f.grid())?;
        c.set_column(j, &DVector::from_column_slice(f.values()));
    }
    let svd = c.clone().svd(true, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(Error::Usage("constraints are linearly dependent".into()));
    }
    let q = svd.u.expect("requested");
    let qqt = &q * q.transpose();
    let p = DMatrix::<f64>::identity(n, n) - &qqt;
    let sigma = 2.0 * lin.norm() + 1.0;
    let reduced = &p * &lin.matrix * &p + qqt * sigma;
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let eig = SymmetricEigen::new(reduced);
    let i = eig.eigenvalues.imin();
    let v = eig.eigenvectors.column(i);
    Ok((eig.eigenvalues[i], Field::new(lin.grid, v.iter().copied().collect())?))
}

/// JSON summary of the operator checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorReport {
    pub n_neg: usize,
    pub zero_dim: usize,
    pub kernel_alignment: f64,
    pub h0_pass: bool,
    pub c1: f64,
    pub c2: f64,
    pub zero_tol: f64,
    pub lowest_eigenvalues: Vec<f64>,
    pub ambiguous: Vec<f64>,
}

impl OperatorReport {
    pub fn new(spectral: &SpectralReport, h1: &H1Constants, lin: &LinearizedOperator) -> Self {
        Self {
            n_neg: spectral.n_neg,
            zero_dim: spectral.zero_dim,
            kernel_alignment: spectral.kernel_alignment,
            h0_pass: spectral.h0_pass,
            c1: h1.c1,
            c2: h1.c2,
            zero_tol: spectral.zero_tol,
            lowest_eigenvalues: lin.eigenvalues.iter().take(6).copied().collect(),
            ambiguous: spectral.ambiguous.clone(),
        }
    }
}
