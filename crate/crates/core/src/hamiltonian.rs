//! Time-dependent Hamiltonians written as sums of real polynomial
//! coefficients times ordered products of single-site spin operators, plus
//! the generic `A + R t` form used by multistate Landau-Zener problems.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, eigh, hermitian_defect, identity, max_abs_diff, ComplexMatrix};
use crate::spin::{site_operator, Axis, SpinSystem, TimeReversalOp};

/// Anything that yields a dense Hermitian matrix at a given time.
pub trait TimeDependent: Send + Sync {
    fn dim(&self) -> usize;
    fn at(&self, t: f64) -> ComplexMatrix;
}

impl<T: TimeDependent + ?Sized> TimeDependent for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn at(&self, t: f64) -> ComplexMatrix {
        (**self).at(t)
    }
}

impl<T: TimeDependent + ?Sized> TimeDependent for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn at(&self, t: f64) -> ComplexMatrix {
        (**self).at(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Zero,
    Even,
    Odd,
    Mixed,
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Parity::Zero => "zero",
            Parity::Even => "even",
            Parity::Odd => "odd",
            Parity::Mixed => "mixed",
        };
        f.write_str(s)
    }
}

/// Real polynomial in `t`, kept canonical: strictly increasing powers and no
/// zero coefficients.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TimePolynomial {
    monomials: Vec<(u32, f64)>,
}

impl TimePolynomial {
    /// Sums duplicate powers and drops zero coefficients.
    pub fn new(monomials: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let mut all: Vec<(u32, f64)> = monomials.into_iter().collect();
        all.sort_by_key(|&(p, _)| p);
        let mut merged: Vec<(u32, f64)> = Vec::with_capacity(all.len());
        for (p, coeff) in all {
            match merged.last_mut() {
                Some(last) if last.0 == p => last.1 += coeff,
                _ => merged.push((p, coeff)),
            }
        }
        merged.retain(|&(_, coeff)| coeff != 0.0);
        TimePolynomial { monomials: merged }
    }

    pub fn constant(value: f64) -> Self {
        Self::new([(0, value)])
    }

    pub fn linear(slope: f64) -> Self {
        Self::new([(1, slope)])
    }

    pub fn monomials(&self) -> &[(u32, f64)] {
        &self.monomials
    }

    pub fn is_zero(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.monomials.iter().map(|&(p, coeff)| coeff * t.powi(p as i32)).sum()
    }

    pub fn parity(&self) -> Parity {
        let even = self.monomials.iter().all(|&(p, _)| p % 2 == 0);
        let odd = self.monomials.iter().all(|&(p, _)| p % 2 == 1);
        match (self.is_zero(), even, odd) {
            (true, _, _) => Parity::Zero,
            (false, true, _) => Parity::Even,
            (false, _, true) => Parity::Odd,
            _ => Parity::Mixed,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(self.monomials.iter().map(|&(p, coeff)| (p, coeff * factor)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpinFactor {
    pub site: usize,
    pub axis: Axis,
    pub exponent: u32,
}

impl SpinFactor {
    pub fn new(site: usize, axis: Axis) -> Self {
        SpinFactor { site, axis, exponent: 1 }
    }

    pub fn pow(site: usize, axis: Axis, exponent: u32) -> Self {
        SpinFactor { site, axis, exponent }
    }
}

/// One summand `C(t) S^{j1}_{a1} ⋯ S^{jn}_{an}`. An empty factor list is the
/// identity operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianTerm {
    pub coeff: TimePolynomial,
    pub factors: Vec<SpinFactor>,
}

impl HamiltonianTerm {
    pub fn new(coeff: TimePolynomial, factors: Vec<SpinFactor>) -> Self {
        HamiltonianTerm { coeff, factors }
    }

    /// Number of spin operators in the product, counting exponents.
    pub fn order(&self) -> u32 {
        self.factors.iter().map(|f| f.exponent).sum()
    }

    fn operator(&self, sys: &SpinSystem) -> Result<ComplexMatrix> {
        let mut product = identity(sys.dim());
        for factor in &self.factors {
            if factor.exponent == 0 {
                return Err(Error::InvalidParameter {
                    name: format!("exponent of s{}@{}", factor.axis.name(), factor.site),
                    reason: "must be at least 1".into(),
                });
            }
            let op = site_operator(sys, factor.site, factor.axis)?;
            for _ in 0..factor.exponent {
                product *= &op;
            }
        }
        Ok(product)
    }
}

#[derive(Debug, Clone)]
pub struct Hamiltonian {
    sys: SpinSystem,
    terms: Vec<HamiltonianTerm>,
    operators: Vec<ComplexMatrix>,
}

impl PartialEq for Hamiltonian {
    fn eq(&self, other: &Self) -> bool {
        self.sys == other.sys && self.terms == other.terms
    }
}

impl Hamiltonian {
    pub fn new(sys: SpinSystem, terms: Vec<HamiltonianTerm>) -> Result<Self> {
        let operators = terms.iter().map(|t| t.operator(&sys)).collect::<Result<Vec<_>>>()?;
        Ok(Hamiltonian { sys, terms, operators })
    }

    pub fn zero(sys: SpinSystem) -> Self {
        Hamiltonian { sys, terms: Vec::new(), operators: Vec::new() }
    }

    pub fn system(&self) -> &SpinSystem {
        &self.sys
    }

    pub fn terms(&self) -> &[HamiltonianTerm] {
        &self.terms
    }

    /// `H(t) = Σ C(t) · Π S`, products taken in listed order.
    pub fn evaluate(&self, t: f64) -> ComplexMatrix {
        let n = self.sys.dim();
        let mut h = ComplexMatrix::zeros(n, n);
        for (term, op) in self.terms.iter().zip(&self.operators) {
            let coeff = term.coeff.eval(t);
            if coeff != 0.0 {
                h.zip_apply(op, |acc, x| *acc += x * coeff);
            }
        }
        h
    }

    /// Concatenates the term lists of two Hamiltonians on the same system.
    pub fn sum(&self, other: &Hamiltonian) -> Result<Hamiltonian> {
        if self.sys != other.sys {
            return Err(Error::DimensionMismatch { expected: self.sys.dim(), found: other.sys.dim() });
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        let mut operators = self.operators.clone();
        operators.extend(other.operators.iter().cloned());
        Ok(Hamiltonian { sys: self.sys.clone(), terms, operators })
    }

    /// Same Hamiltonian with every coefficient `C(t)` replaced by `C(λt)`.
    pub fn time_rescaled(&self, lambda: f64) -> Hamiltonian {
        let terms = self
            .terms
            .iter()
            .map(|term| {
                let coeff = TimePolynomial::new(
                    term.coeff.monomials().iter().map(|&(p, a)| (p, a * lambda.powi(p as i32))),
                );
                HamiltonianTerm::new(coeff, term.factors.clone())
            })
            .collect();
        Hamiltonian { sys: self.sys.clone(), terms, operators: self.operators.clone() }
    }

    /// Multiplies every coefficient by `factor`.
    pub fn scaled(&self, factor: f64) -> Hamiltonian {
        let terms = self
            .terms
            .iter()
            .map(|term| HamiltonianTerm::new(term.coeff.scaled(factor), term.factors.clone()))
            .collect();
        Hamiltonian { sys: self.sys.clone(), terms, operators: self.operators.clone() }
    }
}

impl TimeDependent for Hamiltonian {
    fn dim(&self) -> usize {
        self.sys.dim()
    }
    fn at(&self, t: f64) -> ComplexMatrix {
        self.evaluate(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TermParity {
    pub index: usize,
    pub order: u32,
    pub parity: Parity,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParityReport {
    pub terms: Vec<TermParity>,
    pub pass: bool,
}

impl ParityReport {
    pub fn failures(&self) -> impl Iterator<Item = &TermParity> {
        self.terms.iter().filter(|t| !t.pass)
    }
}

/// Static check that odd-order products carry odd coefficients and
/// even-order products even ones. Mixed-parity coefficients fail.
pub fn check_parity_symmetry(h: &Hamiltonian) -> ParityReport {
    let terms: Vec<TermParity> = h
        .terms()
        .iter()
        .enumerate()
        .map(|(index, term)| {
            let order = term.order();
            let parity = term.coeff.parity();
            let pass = match parity {
                Parity::Zero => true,
                Parity::Even => order % 2 == 0,
                Parity::Odd => order % 2 == 1,
                Parity::Mixed => false,
            };
            TermParity { index, order, parity, pass }
        })
        .collect();
    let pass = terms.iter().all(|t| t.pass);
    ParityReport { terms, pass }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridCheck {
    pub max_deviation: f64,
    pub worst_time: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl GridCheck {
    fn from_deviations(deviations: impl Iterator<Item = (f64, f64)>, tolerance: f64) -> Self {
        let (worst_time, max_deviation) =
            deviations.fold((0.0, 0.0), |best, (t, d)| if d > best.1 { (t, d) } else { best });
        GridCheck { max_deviation, worst_time, tolerance, pass: max_deviation < tolerance }
    }
}

/// Numerical check of `Θ H(t) Θ⁻¹ = H(-t)` over a grid of times.
pub fn check_dynamic_symmetry(
    h: &dyn TimeDependent,
    theta: &TimeReversalOp,
    grid: &[f64],
    tol: f64,
) -> Result<GridCheck> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid("symmetry check needs at least one time".into()));
    }
    let mut deviations = Vec::with_capacity(grid.len());
    for &t in grid {
        let lhs = theta.conjugate(&h.at(t))?;
        deviations.push((t, max_abs_diff(&lhs, &h.at(-t))));
    }
    Ok(GridCheck::from_deviations(deviations.into_iter(), tol))
}

pub const HERMITIAN_TOL: f64 = 1e-12;

pub fn check_hermitian(h: &dyn TimeDependent, grid: &[f64]) -> GridCheck {
    GridCheck::from_deviations(grid.iter().map(|&t| (t, hermitian_defect(&h.at(t)))), HERMITIAN_TOL)
}

/// Symmetric sample grid `{0, ±t_max/k, …, ±t_max}` used by static checks.
pub fn symmetric_sample_grid(t_max: f64, points_per_side: usize) -> Vec<f64> {
    let mut grid = vec![0.0];
    for k in 1..=points_per_side {
        let t = t_max * k as f64 / points_per_side as f64;
        grid.push(t);
        grid.push(-t);
    }
    grid
}

/// `H(t) = A + R t` with `R` diagonal in the working (diabatic) basis.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSweep {
    a: ComplexMatrix,
    r: ComplexMatrix,
    basis: Option<ComplexMatrix>,
}

impl LinearSweep {
    /// Builds `A + R t`. A non-diagonal `R` is diagonalized first and `A` is
    /// rotated into the eigenbasis of `R`; the rotation (columns are the new
    /// basis vectors in the original basis) is kept in [`Self::basis_change`].
    pub fn from_matrix_pair(a: ComplexMatrix, r: ComplexMatrix) -> Result<Self> {
        let n = a.nrows();
        crate::linalg::ensure_square(&a, n)?;
        crate::linalg::ensure_square(&r, n)?;
        for m in [&a, &r] {
            let defect = hermitian_defect(m);
            if defect > HERMITIAN_TOL {
                return Err(Error::NotHermitian { defect });
            }
        }
        let off_diagonal = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .fold(0.0_f64, |acc, (i, j)| acc.max(r[(i, j)].norm()));
        if off_diagonal == 0.0 {
            return Ok(LinearSweep { a, r, basis: None });
        }
        let (slopes, v) = eigh(&r);
        let rotated_a = v.adjoint() * &a * &v;
        let diag = ComplexMatrix::from_fn(n, n, |i, j| if i == j { c(slopes[i], 0.0) } else { c(0.0, 0.0) });
        Ok(LinearSweep { a: rotated_a, r: diag, basis: Some(v) })
    }

    pub fn constant_part(&self) -> &ComplexMatrix {
        &self.a
    }

    pub fn slope_part(&self) -> &ComplexMatrix {
        &self.r
    }

    pub fn basis_change(&self) -> Option<&ComplexMatrix> {
        self.basis.as_ref()
    }

    /// Diabatic sweep rates, the diagonal of `R`.
    pub fn diabatic_slopes(&self) -> Vec<f64> {
        (0..self.r.nrows()).map(|i| self.r[(i, i)].re).collect()
    }
}

impl TimeDependent for LinearSweep {
    fn dim(&self) -> usize {
        self.a.nrows()
    }
    fn at(&self, t: f64) -> ComplexMatrix {
        let mut h = self.a.clone();
        h.zip_apply(&self.r, |acc, x| *acc += x * t);
        h
    }
}
