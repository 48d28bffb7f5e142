//! Diffusion operators with discontinuous-density, balanced-flux interfaces.
//!
//! Right traces are eliminated through `u(x_i⁺) = p_i u(x_i⁻)`, which leaves
//! a square tridiagonal system over the reduced degrees of freedom. The
//! operator is assembled as `A = -M⁻¹K` where `K` is the weighted stiffness
//! matrix and `M` the lumped weighted mass, with patch weight `1/Π_{j<i} p_j`.
//! `K` is symmetric, so `M^{1/2} A M^{-1/2}` is symmetric and `A` annihilates
//! every jump-consistent piecewise-constant field.
//!
//! In patch interiors the rows reduce to the central second difference, at
//! the outer ends to the ghost-point Neumann closure, and at an interface to
//! a flux balance over the two half cells on either side.

use crate::error::{Error, Result};
use crate::grid::{Grid, PiecewiseField};
use crate::landscape::SpeciesTraits;
use crate::scalar::Scalar;

/// Tridiagonal matrix stored by diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal<T> {
    pub lower: Vec<T>,
    pub diag: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Scalar> Tridiagonal<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            lower: vec![T::zero(); n.saturating_sub(1)],
            diag: vec![T::zero(); n],
            upper: vec![T::zero(); n.saturating_sub(1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let n = self.dim();
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.lower[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.upper[i] * x[i + 1];
            }
            y.push(s);
        }
        y
    }

    /// `alpha * I + beta * self`.
    pub fn shifted(&self, alpha: T, beta: T) -> Self {
        Self {
            lower: self.lower.iter().map(|&x| beta * x).collect(),
            diag: self.diag.iter().map(|&x| alpha + beta * x).collect(),
            upper: self.upper.iter().map(|&x| beta * x).collect(),
        }
    }

    pub fn add_diagonal(&mut self, extra: &[T]) {
        for (d, &e) in self.diag.iter_mut().zip(extra) {
            *d += e;
        }
    }

    pub fn norm_inf(&self) -> T {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i].abs();
                if i > 0 {
                    s += self.lower[i - 1].abs();
                }
                if i + 1 < n {
                    s += self.upper[i].abs();
                }
                s
            })
            .fold(T::zero(), T::max)
    }

    pub fn factor(&self) -> Result<ThomasFactor<T>> {
        ThomasFactor::new(self)
    }

    pub fn solve(&self, rhs: &[T]) -> Result<Vec<T>> {
        let mut x = rhs.to_vec();
        self.factor()?.solve_in_place(&mut x);
        Ok(x)
    }
}

/// LU factors of a tridiagonal matrix (Thomas algorithm, no pivoting).
/// Reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct ThomasFactor<T> {
    lower: Vec<T>,
    inv_pivot: Vec<T>,
    upper: Vec<T>,
}

impl<T: Scalar> ThomasFactor<T> {
    fn new(m: &Tridiagonal<T>) -> Result<Self> {
        let n = m.dim();
        let mut inv_pivot = Vec::with_capacity(n);
        let tiny = T::min_positive_value();
        let mut prev_ratio = T::zero();
        for i in 0..n {
            let pivot = if i == 0 {
                m.diag[0]
            } else {
                m.diag[i] - m.lower[i - 1] * prev_ratio
            };
            if pivot.abs() <= tiny || !pivot.is_finite() {
                return Err(Error::SingularPivot { row: i });
            }
            let inv = T::one() / pivot;
            inv_pivot.push(inv);
            if i + 1 < n {
                prev_ratio = m.upper[i] * inv;
            }
        }
        Ok(Self {
            lower: m.lower.clone(),
            inv_pivot,
            upper: m.upper.clone(),
        })
    }

    pub fn solve_in_place(&self, x: &mut [T]) {
        let n = x.len();
        if n == 0 {
            return;
        }
        // forward sweep: x <- L^{-1} x with unit-diagonal U later
        x[0] *= self.inv_pivot[0];
        for i in 1..n {
            x[i] = (x[i] - self.lower[i - 1] * x[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            let r = self.upper[i] * self.inv_pivot[i];
            x[i] = x[i] - r * x[i + 1];
        }
    }
}

/// A diffusion (plus potential) operator over the reduced degrees of freedom
/// of one species, together with the data needed to move between reduced
/// vectors and full two-trace fields.
#[derive(Debug, Clone)]
pub struct LinearOperator<T> {
    grid: Grid<T>,
    jump: Vec<T>,
    matrix: Tridiagonal<T>,
    /// Stiffness part `K`, kept for energy-form quadratic forms.
    stiffness: Tridiagonal<T>,
    /// Lumped weighted mass `M`; the symmetrization weights.
    weights: Vec<T>,
    /// `reduced_index` and `multiplier` of every full DOF.
    index: Vec<usize>,
    mult: Vec<T>,
    /// `w_a q_a c_a / M_r` per full DOF: restriction of nodal forcing.
    restrict_coef: Vec<T>,
    /// Per-patch weight `1/Π_{j<i} p_j`.
    patch_weight: Vec<T>,
    /// `d_i / h_i` per patch.
    patch_kappa: Vec<T>,
    /// Potential added to the diagonal, reduced form.
    potential: Vec<T>,
}

/// Assembles `u ↦ d_i u_xx` with the species' interface conditions and
/// Neumann outer ends.
pub fn assemble_diffusion<T: Scalar>(grid: &Grid<T>, traits: &SpeciesTraits<T>) -> Result<LinearOperator<T>> {
    traits.check_dims(grid.n(), "traits.d")?;
    let p = traits.p.as_slice();
    let (index, mult) = grid.reduction_map(p)?;
    let q = grid.quadrature();
    let cumulative = traits.p.cumulative();
    let patch_weight: Vec<T> = cumulative.iter().take(grid.n()).map(|&c| T::one() / c).collect();

    let nr = grid.reduced_dofs();
    let mut stiffness = Tridiagonal::zeros(nr);
    let mut weights = vec![T::zero(); nr];

    for i in 0..grid.n() {
        let h = grid.spacing(i);
        let w = patch_weight[i];
        let kappa = w * traits.d[i] / h;
        let range = grid.patch_range(i);
        for a in range.clone() {
            weights[index[a]] += w * q[a] * mult[a] * mult[a];
        }
        for a in range.start..range.end - 1 {
            let b = a + 1;
            let (ra, rb) = (index[a], index[b]);
            let (ca, cb) = (mult[a], mult[b]);
            // edge energy kappa * (ca u_ra - cb u_rb)^2
            stiffness.diag[ra] += kappa * ca * ca;
            stiffness.diag[rb] += kappa * cb * cb;
            debug_assert_eq!(rb, ra + 1);
            stiffness.upper[ra] -= kappa * ca * cb;
            stiffness.lower[ra] -= kappa * ca * cb;
        }
    }

    let restrict_coef = (0..index.len())
        .map(|a| {
            let w = patch_weight[owner_of(grid, a)];
            w * q[a] * mult[a] / weights[index[a]]
        })
        .collect();

    let mut op = LinearOperator {
        grid: grid.clone(),
        jump: p.to_vec(),
        matrix: Tridiagonal::zeros(nr),
        stiffness,
        weights,
        index,
        mult,
        restrict_coef,
        patch_kappa: (0..grid.n()).map(|i| traits.d[i] / grid.spacing(i)).collect(),
        patch_weight,
        potential: vec![T::zero(); nr],
    };
    op.rebuild_matrix();
    Ok(op)
}

fn owner_of<T: Scalar>(grid: &Grid<T>, dof: usize) -> usize {
    (0..grid.n())
        .find(|&i| grid.patch_range(i).contains(&dof))
        .expect("dof inside grid")
}

impl<T: Scalar> LinearOperator<T> {
    fn rebuild_matrix(&mut self) {
        let n = self.weights.len();
        let mut m = Tridiagonal::zeros(n);
        for r in 0..n {
            let inv = T::one() / self.weights[r];
            m.diag[r] = -self.stiffness.diag[r] * inv + self.potential[r];
            if r + 1 < n {
                m.upper[r] = -self.stiffness.upper[r] * inv;
            }
            if r > 0 {
                m.lower[r - 1] = -self.stiffness.lower[r - 1] * inv;
            }
        }
        self.matrix = m;
    }

    /// Adds the multiplication operator `φ ↦ c(x) φ` for a nodal potential.
    pub fn with_potential(&self, potential: &PiecewiseField<T>) -> Result<Self> {
        if potential.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let mut out = self.clone();
        out.potential = self.restrict_diagonal(potential.values());
        out.rebuild_matrix();
        Ok(out)
    }

    /// Adds a constant shift `s` to the potential.
    pub fn shifted_potential(&self, s: T) -> Self {
        let mut out = self.clone();
        for c in &mut out.potential {
            *c += s;
        }
        out.rebuild_matrix();
        out
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn jump(&self) -> &[T] {
        &self.jump
    }

    pub fn matrix(&self) -> &Tridiagonal<T> {
        &self.matrix
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn potential(&self) -> &[T] {
        &self.potential
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn apply(&self, reduced: &[T]) -> Vec<T> {
        self.matrix.mul_vec(reduced)
    }

    /// Expands a reduced vector into a full two-trace field.
    pub fn expand(&self, reduced: &[T]) -> PiecewiseField<T> {
        let values = self
            .index
            .iter()
            .zip(&self.mult)
            .map(|(&r, &c)| c * reduced[r])
            .collect();
        PiecewiseField::new(self.grid.clone(), values).expect("sizes agree")
    }

    /// Consistent reduced representation of a nodal forcing term: the
    /// quadrature-weighted average of the forcing seen by each reduced DOF.
    pub fn restrict(&self, nodal: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        for (a, &f) in nodal.iter().enumerate() {
            out[self.index[a]] += self.restrict_coef[a] * f;
        }
        out
    }

    /// Reduced diagonal of the multiplication operator by a nodal coefficient.
    pub fn restrict_diagonal(&self, nodal: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        for (a, &c) in nodal.iter().enumerate() {
            out[self.index[a]] += self.restrict_coef[a] * self.mult[a] * c;
        }
        out
    }

    /// Reduced vector of the jump-consistent field equal to `c_0` on patch 0.
    pub fn null_vector(&self) -> Vec<T> {
        (0..self.dim())
            .map(|r| T::one() / self.patch_weight[self.grid.reduced_owner(r)])
            .collect()
    }

    /// Unweighted trapezoid quadrature in reduced coordinates:
    /// `∫u = Σ_r q_r u_r` for any jump-consistent field.
    pub fn reduced_quadrature(&self) -> Vec<T> {
        let q = self.grid.quadrature();
        let mut out = vec![T::zero(); self.dim()];
        for a in 0..q.len() {
            out[self.index[a]] += q[a] * self.mult[a];
        }
        out
    }

    /// `M^{1/2} A M^{-1/2}` from the assembled factors; symmetric up to rounding.
    pub fn symmetrized(&self) -> Tridiagonal<T> {
        let n = self.dim();
        let s: Vec<T> = self.weights.iter().map(|w| w.sqrt()).collect();
        let mut out = Tridiagonal::zeros(n);
        for r in 0..n {
            out.diag[r] = self.matrix.diag[r];
            if r + 1 < n {
                let off = -self.stiffness.upper[r] / (s[r] * s[r + 1]);
                out.upper[r] = off;
                out.lower[r] = off;
            }
        }
        out
    }

    /// Weighted Rayleigh quotient `⟨Aφ, φ⟩_M / ⟨φ, φ⟩_M` in energy form
    /// (differences are squared before summing, no cancellation).
    pub fn rayleigh_quotient(&self, reduced: &[T]) -> T {
        let full = self.expand(reduced);
        let mut energy = T::zero();
        for i in 0..self.grid.n() {
            let u = full.patch(i);
            let kappa = self.patch_weight[i] * self.patch_kappa[i];
            energy += kappa * u.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum::<T>();
        }
        let mut num = -energy;
        let mut den = T::zero();
        for r in 0..self.dim() {
            let m = self.weights[r] * reduced[r] * reduced[r];
            num += self.potential[r] * m;
            den += m;
        }
        num / den
    }
}
