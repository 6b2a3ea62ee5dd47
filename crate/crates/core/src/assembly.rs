//! Matrices of the fairing iteration: collocation `N`, Gram `D_r`, the
//! iteration matrix `A = (I − Ω)NᵀN + ΩD`, normalization weights `Λ` and
//! contraction diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{FairingError, Result};
use crate::matrix::Mat;
use crate::quadrature::gauss_legendre_on;
use crate::scalar::Scalar;
use crate::sparse::Csr;
use crate::spline::{basis_all, basis_derivatives, lex_index, KnotVector};

/// `m × n` matrix of basis values at the data parameters, stored by rows
/// with exact zeros dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct CollocationMatrix<T> {
    csr: Csr<T>,
}

impl<T: Scalar> CollocationMatrix<T> {
    pub fn from_rows(n: usize, rows: Vec<Vec<(usize, T)>>) -> Self {
        Self { csr: Csr::from_rows(n, &rows) }
    }

    pub fn rows(&self) -> usize {
        self.csr.rows()
    }

    pub fn cols(&self) -> usize {
        self.csr.cols()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        self.csr.row(i)
    }

    pub fn csr(&self) -> &Csr<T> {
        &self.csr
    }

    /// `N · P`
    pub fn apply(&self, control: &Mat<T>) -> Mat<T> {
        self.csr.mul_mat(control)
    }

    /// `Nᵀ · X`
    pub fn apply_transpose(&self, x: &Mat<T>) -> Mat<T> {
        self.csr.tr_mul_mat(x)
    }

    /// `NᵀN`, accumulated row by row.
    pub fn normal_matrix(&self) -> Mat<T> {
        let n = self.cols();
        let mut out = Mat::zeros(n, n);
        for i in 0..self.rows() {
            let row: Vec<(usize, T)> = self.row(i).collect();
            for &(j, a) in &row {
                for &(l, b) in &row {
                    out[(j, l)] = out[(j, l)] + a * b;
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> Mat<T> {
        self.csr.to_dense()
    }
}

/// Collocation matrix of a curve: entry `(i, j) = N_j(t_i)`.
pub fn collocation_matrix<T: Scalar>(knots: &KnotVector<T>, params: &[T]) -> Result<CollocationMatrix<T>> {
    let rows = params
        .iter()
        .map(|&t| Ok(basis_all(knots, t, 0)?.iter().filter(|&(_, v)| v != T::zero()).collect()))
        .collect::<Result<Vec<_>>>()?;
    Ok(CollocationMatrix::from_rows(knots.count(), rows))
}

/// Collocation matrix of a tensor-product surface on a parameter grid.
/// Rows and columns are both lexicographic.
pub fn collocation_matrix_surface<T: Scalar>(
    knots_s: &KnotVector<T>,
    knots_t: &KnotVector<T>,
    s: &[T],
    t: &[T],
) -> Result<CollocationMatrix<T>> {
    let n2 = knots_t.count();
    let bs = s.iter().map(|&x| basis_all(knots_s, x, 0)).collect::<Result<Vec<_>>>()?;
    let bt = t.iter().map(|&x| basis_all(knots_t, x, 0)).collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(s.len() * t.len());
    for a in &bs {
        for b in &bt {
            let mut row = Vec::with_capacity(a.values.len() * b.values.len());
            for (h, va) in a.iter() {
                for (l, vb) in b.iter() {
                    let v = va * vb;
                    if v != T::zero() {
                        row.push((lex_index(h, l, n2), v));
                    }
                }
            }
            rows.push(row);
        }
    }
    Ok(CollocationMatrix::from_rows(knots_s.count() * n2, rows))
}

/// `I_j = { i : N_j(t_i) ≠ 0 }`, the data points attributed to control `j`.
pub fn group_index_sets<T: Scalar>(collocation: &CollocationMatrix<T>) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::new(); collocation.cols()];
    for i in 0..collocation.rows() {
        for (j, _) in collocation.row(i) {
            groups[j].push(i);
        }
    }
    groups
}

/// Which Gram matrix a [`GramMatrix`] holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GramKind {
    /// `∫ N_j^{(r)} N_l^{(r)} dt`
    Curve { order: usize },
    /// Thin-plate functional `F_ss + 2 F_st + F_tt`.
    Surface,
}

/// Symmetric positive semidefinite energy matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix<T> {
    kind: GramKind,
    matrix: Mat<T>,
}

impl<T: Scalar> GramMatrix<T> {
    pub fn new(kind: GramKind, matrix: Mat<T>) -> Self {
        Self { kind, matrix }
    }

    pub fn kind(&self) -> GramKind {
        self.kind
    }

    pub fn matrix(&self) -> &Mat<T> {
        &self.matrix
    }

    pub fn size(&self) -> usize {
        self.matrix.rows()
    }

    /// `trace(Pᵀ D P)`: the energy of the spline with control matrix `P`.
    pub fn energy(&self, control: &Mat<T>) -> T {
        control.quad_form_trace(&self.matrix)
    }
}

/// Gram matrix of `r`-th derivatives, integrated exactly per knot span with
/// `p + 1` Gauss–Legendre nodes.
pub fn gram_matrix_curve<T: Scalar>(knots: &KnotVector<T>, r: usize) -> Result<GramMatrix<T>> {
    let p = knots.degree();
    if r > 3 || r > p {
        return Err(FairingError::Unsupported(format!("derivative order {r} for degree {p}")));
    }
    let n = knots.count();
    let mut d = Mat::zeros(n, n);
    for (span, a, b) in knots.spans() {
        let first = span - p;
        for (x, w) in gauss_legendre_on(p + 1, a, b) {
            let (_, ders) = basis_derivatives(knots, x, r)?;
            let vals = &ders[r];
            for i in 0..=p {
                let wi = w * vals[i];
                for l in i..=p {
                    d[(first + i, first + l)] = d[(first + i, first + l)] + wi * vals[l];
                }
            }
        }
    }
    for j in 0..n {
        for l in j + 1..n {
            d[(l, j)] = d[(j, l)];
        }
    }
    Ok(GramMatrix::new(GramKind::Curve { order: r }, d))
}

/// Thin-plate Gram matrix `D₂ˢ⊗D₀ᵗ + 2 D₁ˢ⊗D₁ᵗ + D₀ˢ⊗D₂ᵗ` of a tensor-product
/// surface in lexicographic control order.
pub fn gram_matrix_surface<T: Scalar>(knots_s: &KnotVector<T>, knots_t: &KnotVector<T>) -> Result<GramMatrix<T>> {
    if knots_s.degree() < 2 || knots_t.degree() < 2 {
        return Err(FairingError::Unsupported("surface fairing needs degree at least 2 in both directions".into()));
    }
    let gs: Vec<Mat<T>> = (0..3).map(|r| gram_matrix_curve(knots_s, r).map(|g| g.matrix)).collect::<Result<_>>()?;
    let gt: Vec<Mat<T>> = (0..3).map(|r| gram_matrix_curve(knots_t, r).map(|g| g.matrix)).collect::<Result<_>>()?;
    let (n1, n2) = (knots_s.count(), knots_t.count());
    let two = T::lit(2.0);
    let p_s = knots_s.degree();
    let p_t = knots_t.degree();
    let mut d = Mat::zeros(n1 * n2, n1 * n2);
    for h in 0..n1 {
        for hh in h.saturating_sub(p_s)..(h + p_s + 1).min(n1) {
            for l in 0..n2 {
                for ll in l.saturating_sub(p_t)..(l + p_t + 1).min(n2) {
                    let v = gs[2][(h, hh)] * gt[0][(l, ll)]
                        + two * gs[1][(h, hh)] * gt[1][(l, ll)]
                        + gs[0][(h, hh)] * gt[2][(l, ll)];
                    d[(lex_index(h, l, n2), lex_index(hh, ll, n2))] = v;
                }
            }
        }
    }
    Ok(GramMatrix::new(GramKind::Surface, d))
}

/// `A = (I − Ω) NᵀN + Ω D`.
pub fn iteration_matrix<T: Scalar>(normal: &Mat<T>, gram: &Mat<T>, omega: &[T]) -> Mat<T> {
    assert_eq!(normal.shape(), gram.shape());
    assert_eq!(normal.rows(), omega.len());
    let n = omega.len();
    Mat::from_fn(n, n, |i, j| (T::one() - omega[i]) * normal[(i, j)] + omega[i] * gram[(i, j)])
}

/// How the step sizes `μ_j` are chosen.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuPolicy<T> {
    /// `μ_i = 1 / Σ_j |a_ij|`
    #[default]
    PerRow,
    /// `μ = 0.99 · 2 / ‖A‖∞` for every control point.
    Uniform,
    Explicit(Vec<T>),
}

/// Safety factor keeping the uniform step strictly inside `2 / λ_max`.
pub const UNIFORM_MU_SAFETY: f64 = 0.99;

pub fn normalization_weights<T: Scalar>(a: &Mat<T>, policy: &MuPolicy<T>) -> Result<Vec<T>> {
    let n = a.rows();
    let row_sums: Vec<T> = (0..n).map(|i| a.row(i).iter().fold(T::zero(), |s, v| s + v.abs())).collect();
    if let Some(i) = row_sums.iter().position(|&s| !(s > T::zero())) {
        return Err(FairingError::ZeroRow(i));
    }
    match policy {
        MuPolicy::PerRow => Ok(row_sums.iter().map(|&s| T::one() / s).collect()),
        MuPolicy::Uniform => {
            let norm = row_sums.iter().copied().fold(T::zero(), T::max);
            Ok(vec![T::lit(2.0 * UNIFORM_MU_SAFETY) / norm; n])
        }
        MuPolicy::Explicit(mu) => {
            if mu.len() != n {
                return Err(FairingError::Config(format!("{} normalization weights for {n} control points", mu.len())));
            }
            if mu.iter().any(|m| !(*m > T::zero()) || !m.is_finite()) {
                return Err(FairingError::Config("normalization weights must be positive and finite".into()));
            }
            Ok(mu.clone())
        }
    }
}

/// Convergence indicators for `P ← (I − ΛA) P + …`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `‖I − ΛA‖∞`
    pub inf_norm: f64,
    /// Whether `A` is strictly diagonally dominant with positive diagonal.
    pub sdd: bool,
    pub spectral_radius_estimate: f64,
    /// False when the power iteration did not settle within its step budget.
    pub spectral_radius_reliable: bool,
}

impl Diagnostics {
    /// True when the iteration is expected to converge.
    pub fn contractive(&self) -> bool {
        self.inf_norm < 1.0 || self.spectral_radius_estimate < 1.0
    }
}

pub const POWER_ITERATION_MAX_STEPS: usize = 10_000;

pub fn is_strictly_diagonally_dominant<T: Scalar>(a: &Mat<T>) -> bool {
    (0..a.rows()).all(|i| {
        let diag = a[(i, i)];
        let off = a.row(i).iter().enumerate().filter(|&(j, _)| j != i).fold(T::zero(), |s, (_, v)| s + v.abs());
        diag > T::zero() && diag > off
    })
}

pub fn contraction_diagnostics<T: Scalar>(a: &Mat<T>, lambda: &[T]) -> Diagnostics {
    let n = a.rows();
    let m = Mat::identity(n).sub(&a.scale_rows(lambda));
    let inf_norm = m.norm_inf().as_f64();
    let sdd = is_strictly_diagonally_dominant(a);
    let (rho, reliable) = spectral_radius(&Csr::from_dense(&m));
    Diagnostics { inf_norm, sdd, spectral_radius_estimate: rho, spectral_radius_reliable: reliable }
}

/// Power-iteration estimate of the spectral radius.
///
/// Uses the two-step ratio `sqrt(‖M²x‖ / ‖x‖)` so that a dominant complex
/// pair or a `±ρ` pair does not make the estimate oscillate.
pub fn spectral_radius<T: Scalar>(m: &Csr<T>) -> (f64, bool) {
    let n = m.rows();
    if n == 0 {
        return (0.0, true);
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mf: Vec<Vec<(usize, f64)>> = (0..n).map(|i| m.row(i).map(|(j, v)| (j, v.as_f64())).collect()).collect();
    let apply = |x: &[f64]| -> Vec<f64> { mf.iter().map(|r| r.iter().map(|&(j, v)| v * x[j]).sum()).collect() };

    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * ((i + 1) as f64).sin()).collect();
    let nx = norm(&x);
    x.iter_mut().for_each(|v| *v /= nx);

    let mut prev_gain = f64::NAN;
    let mut prev_est = f64::NAN;
    let mut settled = 0;
    for _ in 0..POWER_ITERATION_MAX_STEPS {
        let y = apply(&x);
        let gain = norm(&y);
        if gain == 0.0 {
            return (0.0, true);
        }
        if !gain.is_finite() {
            return (f64::INFINITY, false);
        }
        let est = if prev_gain.is_nan() { gain } else { (gain * prev_gain).sqrt() };
        if (est - prev_est).abs() <= 1e-12 * est.max(1e-300) {
            settled += 1;
            if settled >= 3 {
                return (est, true);
            }
        } else {
            settled = 0;
        }
        prev_est = est;
        prev_gain = gain;
        x = y.into_iter().map(|v| v / gain).collect();
    }
    (prev_est, false)
}

/// Everything the iteration needs for one round: built once per change of
/// weights, knots or parametrization.
#[derive(Clone, Debug)]
pub struct AssemblyBundle<T> {
    pub collocation: CollocationMatrix<T>,
    pub gram: GramMatrix<T>,
    pub omega: Vec<T>,
    /// `(I − Ω)NᵀN + ΩD`
    pub a: Mat<T>,
    pub a_sparse: Csr<T>,
    pub lambda: Vec<T>,
    pub groups: Vec<Vec<usize>>,
    /// `(I − Ω) NᵀQ`
    pub rhs: Mat<T>,
    pub diagnostics: Diagnostics,
}

impl<T: Scalar> AssemblyBundle<T> {
    pub fn new(
        collocation: CollocationMatrix<T>,
        gram: GramMatrix<T>,
        data: &Mat<T>,
        omega: Vec<T>,
        policy: &MuPolicy<T>,
    ) -> Result<Self> {
        let n = collocation.cols();
        if gram.size() != n {
            return Err(FairingError::InvalidSize(format!("Gram matrix of size {} for {n} controls", gram.size())));
        }
        if data.rows() != collocation.rows() {
            return Err(FairingError::InvalidSize(format!(
                "{} data points for {} collocation rows",
                data.rows(),
                collocation.rows()
            )));
        }
        validate_omega(&omega, n)?;
        let normal = collocation.normal_matrix();
        let a = iteration_matrix(&normal, gram.matrix(), &omega);
        let lambda = normalization_weights(&a, policy)?;
        let one_minus: Vec<T> = omega.iter().map(|&w| T::one() - w).collect();
        let rhs = collocation.apply_transpose(data).scale_rows(&one_minus);
        let groups = group_index_sets(&collocation);
        let diagnostics = contraction_diagnostics(&a, &lambda);
        if !diagnostics.sdd {
            log::warn!(
                "iteration matrix is not strictly diagonally dominant: ‖I − ΛA‖∞ = {:.6}, spectral radius ≈ {:.6}{}",
                diagnostics.inf_norm,
                diagnostics.spectral_radius_estimate,
                if diagnostics.spectral_radius_reliable { "" } else { " (unreliable)" }
            );
        }
        let a_sparse = Csr::from_dense(&a);
        Ok(Self { collocation, gram, omega, a, a_sparse, lambda, groups, rhs, diagnostics })
    }

    pub fn control_count(&self) -> usize {
        self.collocation.cols()
    }

    pub fn data_count(&self) -> usize {
        self.collocation.rows()
    }

    /// `(I − Ω)NᵀQ − A P`
    pub fn residual(&self, control: &Mat<T>) -> Mat<T> {
        self.rhs.sub(&self.a_sparse.mul_mat(control))
    }
}

pub fn validate_omega<T: Scalar>(omega: &[T], n: usize) -> Result<()> {
    if omega.len() != n {
        return Err(FairingError::Config(format!("{} smoothing weights for {n} control points", omega.len())));
    }
    if let Some(w) = omega.iter().find(|w| !(**w >= T::zero() && **w <= T::one())) {
        return Err(FairingError::Config(format!("smoothing weight {w} outside [0, 1]")));
    }
    Ok(())
}
