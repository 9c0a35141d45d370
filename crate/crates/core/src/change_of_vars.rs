//! Polynomial changes of variables `H(X) = Γ X + Σ_{k=2..m} Θ_k Λ_k(X)` with
//! `d/dt(Π₁H) = Π₂H`, so that `(z, z') = H(X)` turns the planar system into a
//! single second-order equation for `z`.
//!
//! The first row of `Γ` is `(a, b)`; the second row is forced to `(a, b) J` by
//! the concordance condition. Matching coefficients of `Λ_k` for
//! `k = 2..m+n-1` gives a homogeneous linear system in `(a, b, Θ_2..Θ_m)`.

use serde::Serialize;

use crate::error::{Error, NoSolution, Result};
use crate::matrix::{Mat, Solver};
use crate::monomial::{l_matrix, r_matrix, s_check, s_hat, BiPoly};
use crate::scalar::Scalar;
use crate::system::PlanarPolySystem;

/// `(a, b)` pairs tried in order when fixing `Γ = aΓ₁ + bΓ₂`.
pub const GAMMA_CANDIDATES: [(i64, i64); 4] = [(1, 0), (0, 1), (1, 1), (1, -1)];

/// Extra degrees tried above the minimal bound before giving up.
pub const DEFAULT_EXTRA_DEGREES: usize = 3;

/// Smallest `m` with `m² + 3m - 2 >= E(m, n) + 1`, i.e.
/// `⌈(2n - 5 + √(8n² - 16n + 25)) / 2⌉`, computed in integers.
pub fn min_degree_bound(n: usize) -> Result<usize> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("degree bound needs n >= 2, got {n}")));
    }
    let n = n as i64;
    let mut m: i64 = 1;
    while m * m + (5 - 2 * n) * m - n * n - n < 0 {
        m += 1;
    }
    Ok(m as usize)
}

/// Number of unknowns `(a, b, Θ_2..Θ_m)`: `m² + 3m - 2`.
pub fn unknown_count(m: usize) -> usize {
    m * m + 3 * m - 2
}

/// Number of coefficient equations for degrees `2..=m+n-1`:
/// `(m² + (2n+1)m + n(n+1) - 6) / 2`.
pub fn equation_count(m: usize, n: usize) -> usize {
    (m * m + (2 * n + 1) * m + n * (n + 1) - 6) / 2
}

/// `T_{row,j,k} = Σ_l φ_j(row, l) Š_{k-1,l-1} Ŝ_{k+l-2,j-l+1}` (1-based `l`), shape k x (j+k).
///
/// Multiplying by it re-expresses `(row-th component of φ_j Λ_j) · Λ_{k-1}` in the `Λ_{k+j-1}` basis.
pub fn build_t<T: Scalar>(row: usize, j: usize, k: usize, phi_j: &Mat<T>) -> Result<Mat<T>> {
    if !(row == 1 || row == 2) {
        return Err(Error::InvalidArgument(format!("row must be 1 or 2, got {row}")));
    }
    if j < 1 || k < 2 {
        return Err(Error::InvalidArgument(format!("need j >= 1 and k >= 2, got j={j}, k={k}")));
    }
    if phi_j.shape() != (2, j + 1) {
        return Err(Error::shape(format!("phi_{j}"), (2, j + 1), phi_j.shape()));
    }
    let mut out = Mat::zeros(k, j + k);
    for l in 1..=j + 1 {
        let c = &phi_j[(row - 1, l - 1)];
        if c.is_zero() {
            continue;
        }
        let term = s_check::<T>(k - 1, l - 1).matmul(&s_hat(k + l - 2, j + 1 - l)).scale(c);
        out = out.add(&term);
    }
    Ok(out)
}

/// `Γ = aΓ₁ + bΓ₂ = [[a, b], [a j11 + b j21, a j12 + b j22]]`.
pub fn gamma_from_params<T: Scalar>(jacobian: &Mat<T>, a: &T, b: &T) -> Mat<T> {
    let j = jacobian;
    Mat::from_rows(vec![vec![a.clone(), b.clone()], vec![
        a.clone() * j[(0, 0)].clone() + b.clone() * j[(1, 0)].clone(),
        a.clone() * j[(0, 1)].clone() + b.clone() * j[(1, 1)].clone(),
    ]])
}

fn singular(det: &impl Scalar, gamma: &Mat<impl Scalar>) -> bool {
    let scale = gamma.max_abs().max(1.0);
    det.is_negligible(1e-12 * scale * scale)
}

#[derive(Debug, Clone, PartialEq)]
pub enum GammaParams<T> {
    /// `(a, b)` are unknowns: the system is homogeneous in all `m² + 3m - 2` unknowns.
    Free,
    /// `(a, b)` are fixed: their columns move to the right-hand side.
    Fixed(T, T),
}

/// What a column of the constraint matrix stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Unknown {
    A,
    B,
    /// Entry `(row, col)` (0-based) of `Θ_degree`.
    Theta { degree: usize, row: usize, col: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownLayout {
    pub m: usize,
    pub with_params: bool,
}

impl UnknownLayout {
    fn param_cols(&self) -> usize {
        if self.with_params {
            2
        } else {
            0
        }
    }

    /// Column of entry `(row, col)` of `Θ_degree`.
    pub fn theta_column(&self, degree: usize, row: usize, col: usize) -> usize {
        debug_assert!((2..=self.m).contains(&degree) && row < 2 && col <= degree);
        let before: usize = (2..degree).map(|l| 2 * (l + 1)).sum();
        self.param_cols() + before + row * (degree + 1) + col
    }

    pub fn len(&self) -> usize {
        self.param_cols() + (2..=self.m).map(|l| 2 * (l + 1)).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn describe(&self, column: usize) -> Unknown {
        if self.with_params && column < 2 {
            return if column == 0 { Unknown::A } else { Unknown::B };
        }
        let mut c = column - self.param_cols();
        for degree in 2..=self.m {
            let width = 2 * (degree + 1);
            if c < width {
                return Unknown::Theta { degree, row: c / (degree + 1), col: c % (degree + 1) };
            }
            c -= width;
        }
        panic!("column {column} outside layout")
    }
}

/// Row offset of the `Λ_k` block of equations (`k >= 2`).
fn equation_row(k: usize) -> usize {
    (2..k).map(|d| d + 1).sum()
}

#[derive(Debug, Clone)]
pub struct ConstraintSystem<T> {
    pub matrix: Mat<T>,
    /// Right-hand side when `(a, b)` are fixed; `None` for the homogeneous system.
    pub rhs: Option<Vec<T>>,
    pub layout: UnknownLayout,
    pub m: usize,
    pub n: usize,
}

impl<T: Scalar> ConstraintSystem<T> {
    pub fn equations(&self) -> usize {
        self.matrix.rows()
    }

    pub fn unknowns(&self) -> usize {
        self.matrix.cols()
    }
}

/// Assembles the coefficient equations of `d/dt(Π₁H) - Π₂H = 0` for degrees `2..=m+n-1`.
pub fn assemble_constraints<T: Scalar>(
    system: &PlanarPolySystem<T>,
    m: usize,
    params: &GammaParams<T>,
) -> Result<ConstraintSystem<T>> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!("change-of-variables degree must be >= 2, got {m}")));
    }
    let n = system.degree();
    let top = m + n - 1;
    let layout = UnknownLayout { m, with_params: matches!(params, GammaParams::Free) };
    let rows = equation_row(top + 1);
    let mut a = Mat::zeros(rows, layout.len());
    let mut rhs = match params {
        GammaParams::Free => None,
        GammaParams::Fixed(pa, pb) => {
            let gamma = gamma_from_params(system.jacobian(), pa, pb);
            if singular(&gamma.det2(), &gamma) {
                return Err(Error::SingularGamma { a: pa.to_f64(), b: pb.to_f64() });
            }
            Some(vec![T::zero(); rows])
        }
    };

    // (φ_kᵀ Γᵀ e₁) for k <= n
    for k in 2..=n.min(top) {
        let phi = system.phi_or_zero(k);
        let r0 = equation_row(k);
        for i in 0..=k {
            match (params, rhs.as_mut()) {
                (GammaParams::Free, _) => {
                    a[(r0 + i, 0)] = phi[(0, i)].clone();
                    a[(r0 + i, 1)] = phi[(1, i)].clone();
                }
                (GammaParams::Fixed(pa, pb), Some(b)) => {
                    b[r0 + i] = -(pa.clone() * phi[(0, i)].clone() + pb.clone() * phi[(1, i)].clone());
                }
                _ => unreachable!(),
            }
        }
    }

    // Σ_{j+l-1=k} (T_{1,j,l}ᵀ R_lᵀ + T_{2,j,l}ᵀ L_lᵀ) Θ_lᵀ e₁
    for l in 2..=m {
        let rt = r_matrix::<T>(l).transpose();
        let lt = l_matrix::<T>(l).transpose();
        for j in 1..=n {
            let phi_j = system.phi_or_zero(j);
            if phi_j.is_zero() {
                continue;
            }
            let t1 = build_t(1, j, l, &phi_j)?;
            let t2 = build_t(2, j, l, &phi_j)?;
            let block = t1.transpose().matmul(&rt).add(&t2.transpose().matmul(&lt));
            let r0 = equation_row(j + l - 1);
            for i in 0..block.rows() {
                for c in 0..block.cols() {
                    let v = &block[(i, c)];
                    if !v.is_zero() {
                        let col = layout.theta_column(l, 0, c);
                        a[(r0 + i, col)] = a[(r0 + i, col)].clone() + v.clone();
                    }
                }
            }
        }
    }

    // -Θ_kᵀ e₂ for k <= m
    for k in 2..=m {
        let r0 = equation_row(k);
        for i in 0..=k {
            let col = layout.theta_column(k, 1, i);
            a[(r0 + i, col)] = a[(r0 + i, col)].clone() - T::one();
        }
    }

    Ok(ConstraintSystem { matrix: a, rhs, layout, m, n })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChangeOfVariables<T> {
    pub gamma_params: (T, T),
    pub gamma: Mat<T>,
    /// `thetas[i]` is `Θ_{i+2}`, shape 2 x (i + 3).
    pub thetas: Vec<Mat<T>>,
    pub m: usize,
}

impl<T: Scalar> ChangeOfVariables<T> {
    /// Builds a change of variables from `(a, b)` and `Θ_2..Θ_m` without checking `d/dt(Π₁H) = Π₂H`.
    pub fn from_parts(jacobian: &Mat<T>, a: T, b: T, thetas: Vec<Mat<T>>) -> Result<Self> {
        for (i, t) in thetas.iter().enumerate() {
            if t.shape() != (2, i + 3) {
                return Err(Error::shape(format!("theta_{}", i + 2), (2, i + 3), t.shape()));
            }
        }
        let gamma = gamma_from_params(jacobian, &a, &b);
        let m = (thetas.len() + 1).max(1);
        Ok(Self { gamma_params: (a, b), gamma, thetas, m })
    }

    /// `Θ_k`, with `Θ_1 = Γ` and zeros beyond the degree.
    pub fn theta(&self, k: usize) -> Mat<T> {
        match k {
            1 => self.gamma.clone(),
            _ => self.thetas.get(k.wrapping_sub(2)).cloned().unwrap_or_else(|| Mat::zeros(2, k + 1)),
        }
    }

    pub fn gamma_inverse(&self) -> Result<Mat<T>> {
        self.gamma.inverse2(1e-300).ok_or(Error::SingularGamma {
            a: self.gamma_params.0.to_f64(),
            b: self.gamma_params.1.to_f64(),
        })
    }

    /// `(Π₁H, Π₂H)` as polynomials.
    pub fn component_polys(&self) -> [BiPoly<T>; 2] {
        let mut out = [BiPoly::zero(), BiPoly::zero()];
        for (r, poly) in out.iter_mut().enumerate() {
            *poly = BiPoly::linear(self.gamma[(r, 0)].clone(), self.gamma[(r, 1)].clone());
            for (i, t) in self.thetas.iter().enumerate() {
                *poly = poly.add(&BiPoly::homogeneous(i + 2, t.row(r).to_vec()));
            }
        }
        out
    }

    pub fn evaluate(&self, x: &[T; 2]) -> [T; 2] {
        let mut y = self.gamma.matvec(&[x[0].clone(), x[1].clone()]);
        for (i, t) in self.thetas.iter().enumerate() {
            let lam = crate::monomial::lambda(i + 2, &x[0], &x[1]);
            let c = t.matvec(&lam);
            y[0] = y[0].clone() + c[0].clone();
            y[1] = y[1].clone() + c[1].clone();
        }
        [y[0].clone(), y[1].clone()]
    }

    pub fn theta_norms(&self) -> Vec<f64> {
        self.thetas.iter().map(Mat::frobenius).collect()
    }

    pub fn convert<S: Scalar>(&self, f: impl Fn(&T) -> S + Copy) -> ChangeOfVariables<S> {
        ChangeOfVariables {
            gamma_params: (f(&self.gamma_params.0), f(&self.gamma_params.1)),
            gamma: self.gamma.convert(f),
            thetas: self.thetas.iter().map(|t| t.convert(f)).collect(),
            m: self.m,
        }
    }

    pub fn to_f64(&self) -> ChangeOfVariables<f64> {
        self.convert(Scalar::to_f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DegreeChoice {
    /// Start at the minimal bound (2 for linear systems) and retry higher degrees.
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveOptions {
    pub degree: DegreeChoice,
    pub extra_degrees: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { degree: DegreeChoice::Auto, extra_degrees: DEFAULT_EXTRA_DEGREES }
    }
}

/// Solves for `Θ_2..Θ_m` at a fixed degree `m`.
///
/// `(a, b)` are scanned over [`GAMMA_CANDIDATES`]; the first pair with invertible
/// `Γ` and a consistent system wins, and the minimum-norm `Θ` is returned.
/// When no pair works the rank of the free homogeneous system is reported.
pub fn solve_theta<T: Solver>(
    system: &PlanarPolySystem<T>,
    m: usize,
) -> Result<std::result::Result<ChangeOfVariables<T>, NoSolution>> {
    for &(ia, ib) in GAMMA_CANDIDATES.iter() {
        let (pa, pb) = (T::from_i64(ia), T::from_i64(ib));
        let cs = match assemble_constraints(system, m, &GammaParams::Fixed(pa.clone(), pb.clone())) {
            Ok(cs) => cs,
            Err(Error::SingularGamma { .. }) => continue,
            Err(e) => return Err(e),
        };
        let rhs = cs.rhs.as_ref().expect("fixed parameters give a right-hand side");
        let Some(x) = T::solve_min_norm(&cs.matrix, rhs) else { continue };
        let thetas = (2..=m)
            .map(|k| Mat::from_fn(2, k + 1, |r, c| x[cs.layout.theta_column(k, r, c)].clone()))
            .collect();
        let cov = ChangeOfVariables::from_parts(system.jacobian(), pa, pb, thetas)?;
        return Ok(Ok(cov));
    }
    let free = assemble_constraints(system, m, &GammaParams::Free)?;
    Ok(Err(NoSolution {
        m,
        rank: T::rank(&free.matrix),
        unknowns: free.unknowns(),
        equations: free.equations(),
    }))
}

/// Result of the degree search.
#[derive(Debug, Clone)]
pub struct SolvedChange<T> {
    pub cov: ChangeOfVariables<T>,
    /// Degrees that were tried and failed, with their rank reports.
    pub failures: Vec<NoSolution>,
}

/// Runs [`solve_theta`] from the starting degree upwards until a solution appears.
pub fn solve_change_of_variables<T: Solver>(
    system: &PlanarPolySystem<T>,
    options: &SolveOptions,
) -> Result<SolvedChange<T>> {
    let degrees: Vec<usize> = match options.degree {
        DegreeChoice::Fixed(m) => vec![m],
        DegreeChoice::Auto => {
            let start = if system.degree() < 2 { 2 } else { min_degree_bound(system.degree())? };
            (start..=start + options.extra_degrees).collect()
        }
    };
    let mut failures = Vec::new();
    for m in degrees {
        match solve_theta(system, m)? {
            Ok(cov) => return Ok(SolvedChange { cov, failures }),
            Err(report) => failures.push(report),
        }
    }
    Err(Error::NoSolution(failures.pop().expect("at least one degree tried")))
}

/// `d/dt(Π₁H) - Π₂H` as a polynomial in `(U, V)`.
pub fn reduction_residual_poly<T: Scalar>(cov: &ChangeOfVariables<T>, system: &PlanarPolySystem<T>) -> BiPoly<T> {
    let [h1, h2] = cov.component_polys();
    let [f, g] = system.field_polys();
    h1.partial_u().mul(&f).add(&h1.partial_v().mul(&g)).sub(&h2)
}

/// Largest absolute coefficient of `d/dt(Π₁H) - Π₂H`; zero certifies the reduction.
pub fn reduction_residual<T: Scalar>(cov: &ChangeOfVariables<T>, system: &PlanarPolySystem<T>) -> f64 {
    reduction_residual_poly(cov, system).max_abs_coeff()
}

/// Largest coefficient of `ψ̄ - Π₁(ΓΨ) - ∇φ̄·F`, where `φ̄`, `ψ̄` are the
/// nonlinear parts of the two components of `H` and `Ψ` the nonlinearity.
pub fn psi_phi_residual<T: Scalar>(cov: &ChangeOfVariables<T>, system: &PlanarPolySystem<T>) -> f64 {
    let mut phi_bar = BiPoly::zero();
    let mut psi_bar = BiPoly::zero();
    for (i, t) in cov.thetas.iter().enumerate() {
        phi_bar = phi_bar.add(&BiPoly::homogeneous(i + 2, t.row(0).to_vec()));
        psi_bar = psi_bar.add(&BiPoly::homogeneous(i + 2, t.row(1).to_vec()));
    }
    let mut gamma_psi = BiPoly::zero();
    for k in 2..=system.degree() {
        let phi = system.phi_or_zero(k);
        let row: Vec<T> = (0..=k)
            .map(|i| cov.gamma[(0, 0)].clone() * phi[(0, i)].clone() + cov.gamma[(0, 1)].clone() * phi[(1, i)].clone())
            .collect();
        gamma_psi = gamma_psi.add(&BiPoly::homogeneous(k, row));
    }
    let [f, g] = system.field_polys();
    let grad_dot = phi_bar.partial_u().mul(&f).add(&phi_bar.partial_v().mul(&g));
    psi_bar.sub(&gamma_psi).sub(&grad_dot).max_abs_coeff()
}
