//! Principal eigenpair of the linearized invasion operator.
//!
//! The operator is similar to a symmetric tridiagonal matrix through its
//! diagonal mass weights. The two largest eigenvalues are located by Sturm
//! sequence bisection, the eigenvector by shifted inverse iteration just
//! above the top eigenvalue, and the eigenvalue is then refined with the
//! energy-form Rayleigh quotient, which stays accurate when it is near zero.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::grid::{fmt_num, Grid, PiecewiseField};
use crate::landscape::{Landscape, PatchEnvironment, SpeciesTraits};
use crate::operator::{assemble_diffusion, LinearOperator, Tridiagonal};
use crate::scalar::{max_abs, Scalar};
use crate::steady::{solve_resident_steady, SteadyConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct EigenConfig<T> {
    /// `|λ1| ≤ sign_tol` is reported as neutral.
    pub sign_tol: T,
    pub max_inverse_iters: usize,
    /// Convergence threshold on the change of the normalized iterate.
    pub inverse_tol: T,
    pub steady: SteadyConfig<T>,
}

impl<T: Scalar> Default for EigenConfig<T> {
    fn default() -> Self {
        Self {
            sign_tol: T::lit(1e-8),
            max_inverse_iters: 200,
            inverse_tol: T::lit(1e-13),
            steady: SteadyConfig::default(),
        }
    }
}

/// Stability of the semi-trivial state `(u*, 0)` read off the sign of `λ1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    /// `λ1 > sign_tol`: the mutant invades.
    Unstable,
    /// `λ1 < -sign_tol`: the mutant cannot invade.
    Stable,
    Neutral,
}

#[derive(Debug, Clone)]
pub struct EigenPair<T> {
    pub lambda1: T,
    /// Positive, jump-consistent for the operator's traits, `max = 1`.
    pub phi: PiecewiseField<T>,
    /// `λ1 - λ2`, when the dimension allows a second eigenvalue.
    pub gap: Option<T>,
    /// `‖Aφ - λ1 φ‖∞` in reduced coordinates.
    pub residual: T,
}

impl<T: Scalar> EigenPair<T> {
    pub fn stability(&self, sign_tol: T) -> Stability {
        if self.lambda1 > sign_tol {
            Stability::Unstable
        } else if self.lambda1 < -sign_tol {
            Stability::Stable
        } else {
            Stability::Neutral
        }
    }

    /// `lambda1,<value>` followed by the field rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "lambda1,{}", fmt_num(self.lambda1))?;
        self.phi.write_csv(w)
    }
}

/// `φ ↦ d̂_i φ_xx + c(x) φ` with the mutant's interface conditions.
pub fn assemble_linearization<T: Scalar>(
    grid: &Grid<T>,
    traits_hat: &SpeciesTraits<T>,
    potential: &PiecewiseField<T>,
) -> Result<LinearOperator<T>> {
    assemble_diffusion(grid, traits_hat)?.with_potential(potential)
}

/// Number of eigenvalues of the symmetric tridiagonal `(diag, off)` below `x`.
fn sturm_count<T: Scalar>(diag: &[T], off: &[T], x: T) -> usize {
    let tiny = T::min_positive_value().sqrt();
    let mut count = 0;
    let mut q = T::one();
    for i in 0..diag.len() {
        q = if i == 0 {
            diag[0] - x
        } else {
            diag[i] - x - off[i - 1] * off[i - 1] / q
        };
        if q == T::zero() {
            q = -tiny;
        }
        if q < T::zero() {
            count += 1;
        }
    }
    count
}

/// The `k`-th largest eigenvalue (`k = 0` is the largest) by bisection.
fn kth_largest<T: Scalar>(diag: &[T], off: &[T], k: usize, lo: T, hi: T) -> T {
    let n = diag.len();
    let target = n - k;
    let (mut lo, mut hi) = (lo, hi);
    let two = T::lit(2.0);
    for _ in 0..400 {
        let mid = (lo + hi) / two;
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off, mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo + hi) / two
}

fn gershgorin<T: Scalar>(m: &Tridiagonal<T>) -> (T, T) {
    let n = m.dim();
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for i in 0..n {
        let mut rad = T::zero();
        if i > 0 {
            rad += m.lower[i - 1].abs();
        }
        if i + 1 < n {
            rad += m.upper[i].abs();
        }
        lo = lo.min(m.diag[i] - rad);
        hi = hi.max(m.diag[i] + rad);
    }
    let pad = T::lit(1e-10) * (hi.abs() + lo.abs() + T::one());
    (lo - pad, hi + pad)
}

fn normalize_positive<T: Scalar>(op: &LinearOperator<T>, reduced: Vec<T>) -> Result<(Vec<T>, PiecewiseField<T>)> {
    let sum: T = reduced.iter().copied().sum();
    let sign = if sum < T::zero() { -T::one() } else { T::one() };
    let mut v: Vec<T> = reduced.into_iter().map(|x| x * sign).collect();
    let field = op.expand(&v);
    let peak = field.max();
    if !(peak > T::zero()) {
        return Err(Error::EigenNotIsolated);
    }
    for x in &mut v {
        *x /= peak;
    }
    let field = op.expand(&v);
    if field.values().iter().any(|&x| !(x > T::zero())) {
        return Err(Error::EigenNotIsolated);
    }
    Ok((v, field))
}

fn eigen_residual<T: Scalar>(op: &LinearOperator<T>, v: &[T], lambda: T) -> T {
    let av = op.apply(v);
    max_abs(&av.iter().zip(v).map(|(&a, &x)| a - lambda * x).collect::<Vec<_>>())
}

pub fn principal_eigenpair<T: Scalar>(op: &LinearOperator<T>) -> Result<EigenPair<T>> {
    principal_eigenpair_with(op, &EigenConfig::default())
}

/// Symmetric route; falls back to [`principal_eigenpair_power`] if the
/// shifted system cannot be factored.
pub fn principal_eigenpair_with<T: Scalar>(op: &LinearOperator<T>, config: &EigenConfig<T>) -> Result<EigenPair<T>> {
    let s = op.symmetrized();
    let n = s.dim();
    let (lo, hi) = gershgorin(&s);
    let top = kth_largest(&s.diag, &s.upper, 0, lo, hi);
    let gap = (n > 1).then(|| top - kth_largest(&s.diag, &s.upper, 1, lo, top));
    let eps = T::epsilon();
    let floor = T::lit(1e3) * eps * (hi.abs().max(lo.abs()) + T::one());
    let offset = match gap {
        Some(g) => (T::lit(1e-3) * g).max(floor),
        None => floor,
    };
    let factor = match s.shifted(top + offset, -T::one()).factor() {
        Ok(f) => f,
        Err(_) => return principal_eigenpair_power(op, config),
    };

    let sqrt_w: Vec<T> = op.weights().iter().map(|w| w.sqrt()).collect();
    let mut y: Vec<T> = sqrt_w.clone();
    let norm = |v: &[T]| v.iter().map(|&x| x * x).sum::<T>().sqrt();
    let ny = norm(&y);
    y.iter_mut().for_each(|x| *x /= ny);
    for _ in 0..config.max_inverse_iters {
        let mut next = y.clone();
        // (σI - S) is positive definite, so the iterate keeps its sign
        factor.solve_in_place(&mut next);
        let nn = norm(&next);
        next.iter_mut().for_each(|x| *x /= nn);
        let change = next.iter().zip(&y).map(|(&a, &b)| (a - b).abs()).fold(T::zero(), T::max);
        y = next;
        if change <= config.inverse_tol {
            break;
        }
    }
    let reduced: Vec<T> = y.iter().zip(&sqrt_w).map(|(&a, &w)| a / w).collect();
    let (v, phi) = normalize_positive(op, reduced)?;
    let lambda1 = op.rayleigh_quotient(&v);
    Ok(EigenPair {
        residual: eigen_residual(op, &v, lambda1),
        lambda1,
        phi,
        gap,
    })
}

/// Inverse power iteration on the operator itself, without using its
/// symmetrization. Shifts come from the Collatz–Wielandt upper bound
/// `max_i (Aφ)_i/φ_i`, which stays above `λ1` for positive iterates.
pub fn principal_eigenpair_power<T: Scalar>(op: &LinearOperator<T>, config: &EigenConfig<T>) -> Result<EigenPair<T>> {
    let a = op.matrix();
    let n = a.dim();
    let norm_a = a.norm_inf();
    let floor = T::lit(1e2) * T::epsilon() * (norm_a + T::one());
    let mut x = op.null_vector();
    let mut shift = gershgorin(a).1;
    for _ in 0..config.max_inverse_iters {
        let ax = a.mul_vec(&x);
        let (mut lo, mut hi) = (T::infinity(), T::neg_infinity());
        for i in 0..n {
            let q = ax[i] / x[i];
            lo = lo.min(q);
            hi = hi.max(q);
        }
        if hi - lo <= floor.max(config.inverse_tol * (T::one() + hi.abs())) {
            break;
        }
        shift = shift.min(hi + (hi - lo) + floor);
        let mut next = x.clone();
        a.shifted(shift, -T::one()).factor()?.solve_in_place(&mut next);
        let peak = max_abs(&next);
        x = next.into_iter().map(|v| v / peak).collect();
        if x.iter().any(|&v| !(v > T::zero())) {
            return Err(Error::EigenNotIsolated);
        }
    }
    let (v, phi) = normalize_positive(op, x)?;
    let lambda1 = op.rayleigh_quotient(&v);
    Ok(EigenPair {
        residual: eigen_residual(op, &v, lambda1),
        lambda1,
        phi,
        gap: None,
    })
}

/// Potential `r_i (1 - u*/k_i)` seen by a rare species in a resident state.
pub fn invasion_potential<T: Scalar>(ustar: &PiecewiseField<T>, env: &PatchEnvironment<T>) -> PiecewiseField<T> {
    ustar.map(|patch, _, u| env.r[patch] * (T::one() - u / env.k[patch]))
}

/// `λ1` of the mutant linearized at the resident's steady state.
pub fn invasion_fitness<T: Scalar>(
    landscape: &Landscape<T>,
    env: &PatchEnvironment<T>,
    resident: &SpeciesTraits<T>,
    mutant: &SpeciesTraits<T>,
    grid: &Grid<T>,
    config: &EigenConfig<T>,
) -> Result<EigenPair<T>> {
    let ustar = solve_resident_steady(landscape, env, resident, grid, &config.steady)?;
    fitness_against(&ustar, env, mutant, config)
}

/// Same as [`invasion_fitness`] with the resident's steady state supplied.
pub fn fitness_against<T: Scalar>(
    ustar: &PiecewiseField<T>,
    env: &PatchEnvironment<T>,
    mutant: &SpeciesTraits<T>,
    config: &EigenConfig<T>,
) -> Result<EigenPair<T>> {
    let potential = invasion_potential(ustar, env);
    let op = assemble_linearization(ustar.grid(), mutant, &potential)?;
    principal_eigenpair_with(&op, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Resolution};
    use nalgebra::{DMatrix, SymmetricEigen};

    fn grid(lengths: &[f64], m: usize) -> Grid<f64> {
        build_grid(&Landscape::from_lengths(lengths).unwrap(), &Resolution::Uniform(m)).unwrap()
    }

    fn dense_top_two(op: &LinearOperator<f64>) -> (f64, f64) {
        let s = op.symmetrized();
        let n = s.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = s.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = s.upper[i];
                m[(i + 1, i)] = s.lower[i];
            }
        }
        let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
        (ev[0], ev[1])
    }

    #[test]
    fn constant_potential_single_patch() {
        let g = grid(&[1.5], 12);
        let t = SpeciesTraits::with_ratios(vec![0.8], vec![]).unwrap();
        let c = PiecewiseField::piecewise_constant(&g, &[0.7]).unwrap();
        let e = principal_eigenpair(&assemble_linearization(&g, &t, &c).unwrap()).unwrap();
        assert!((e.lambda1 - 0.7).abs() < 1e-12);
        assert!(e.phi.values().iter().all(|&v| (v - 1.0).abs() < 1e-10));
    }

    #[test]
    fn zero_potential_gives_jump_constant() {
        let g = grid(&[1.0, 0.5, 2.0], 10);
        let t = SpeciesTraits::with_ratios(vec![1.0, 0.2, 3.0], vec![2.0, 0.25]).unwrap();
        let op = assemble_diffusion(&g, &t).unwrap();
        let e = principal_eigenpair(&op).unwrap();
        assert!(e.lambda1.abs() < 1e-12);
        assert!(e.phi.is_jump_consistent(&[2.0, 0.25], 1e-10));
        let expected = [0.5, 1.0, 0.25];
        for i in 0..3 {
            assert!(e.phi.patch(i).iter().all(|&v| (v - expected[i]).abs() < 1e-9));
        }
    }

    #[test]
    fn matches_dense_solver() {
        let g = grid(&[1.0, 1.0], 40);
        let t = SpeciesTraits::with_ratios(vec![1.0, 0.4], vec![1.7]).unwrap();
        let c = PiecewiseField::from_fn(&g, |i, x| (3.0 * x).sin() + i as f64 * 0.5);
        let op = assemble_linearization(&g, &t, &c).unwrap();
        let e = principal_eigenpair(&op).unwrap();
        let (l1, l2) = dense_top_two(&op);
        assert!((e.lambda1 - l1).abs() <= 1e-9 * l1.abs().max(1.0));
        assert!((e.gap.unwrap() - (l1 - l2)).abs() < 1e-8);
        assert!(e.gap.unwrap() > 0.0);
        assert!(e.phi.min() > 0.0);
        assert!(e.residual < 1e-9 * (e.lambda1.abs() + op.matrix().norm_inf() * g.max_spacing().powi(2)));
    }

    #[test]
    fn power_fallback_agrees() {
        let g = grid(&[1.0, 2.0], 30);
        let t = SpeciesTraits::with_ratios(vec![0.5, 1.0], vec![0.6]).unwrap();
        let c = PiecewiseField::from_fn(&g, |_, x| 1.0 - (x - 1.2).powi(2));
        let op = assemble_linearization(&g, &t, &c).unwrap();
        let a = principal_eigenpair(&op).unwrap();
        let b = principal_eigenpair_power(&op, &EigenConfig::default()).unwrap();
        assert!((a.lambda1 - b.lambda1).abs() < 1e-10);
        assert!(a.phi.max_abs_diff(&b.phi).unwrap() < 1e-7);
    }

    #[test]
    fn shift_covariance() {
        let g = grid(&[1.0, 1.0], 30);
        let t = SpeciesTraits::with_ratios(vec![1.0, 2.0], vec![0.5]).unwrap();
        let c = PiecewiseField::from_fn(&g, |_, x| x.cos());
        let op = assemble_linearization(&g, &t, &c).unwrap();
        let a = principal_eigenpair(&op).unwrap();
        let b = principal_eigenpair(&op.shifted_potential(0.37)).unwrap();
        assert!((b.lambda1 - a.lambda1 - 0.37).abs() < 1e-10);
        assert!(a.phi.max_abs_diff(&b.phi).unwrap() < 1e-10);
    }

    #[test]
    fn ifd_resident_is_neutral() {
        let l = Landscape::<f64>::from_lengths(&[1.0, 1.0]).unwrap();
        let env = PatchEnvironment::new(vec![1.0, 1.0], vec![1.0, 2.0]).unwrap();
        let res = SpeciesTraits::with_ratios(vec![1.0, 1.0], vec![2.0]).unwrap();
        let mutant = SpeciesTraits::with_ratios(vec![0.3, 2.0], vec![5.0]).unwrap();
        let g = build_grid(&l, &Resolution::Uniform(50)).unwrap();
        let e = invasion_fitness(&l, &env, &res, &mutant, &g, &EigenConfig::default()).unwrap();
        assert!(e.lambda1.abs() < 1e-10);
        assert_eq!(e.stability(1e-8), Stability::Neutral);
    }

    #[test]
    fn resident_linearization_is_stable() {
        let l = Landscape::<f64>::from_lengths(&[1.0, 1.0]).unwrap();
        let env = PatchEnvironment::new(vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        let res = SpeciesTraits::with_ratios(vec![1.0, 1.0], vec![2.0]).unwrap();
        let g = build_grid(&l, &Resolution::Uniform(50)).unwrap();
        let u = solve_resident_steady(&l, &env, &res, &g, &SteadyConfig::default()).unwrap();
        let c = u.map(|i, _, v| env.r[i] * (1.0 - 2.0 * v / env.k[i]));
        let e = principal_eigenpair(&assemble_linearization(&g, &res, &c).unwrap()).unwrap();
        assert!(e.lambda1 < 0.0);
        // the resident against itself is neutral
        let own = fitness_against(&u, &env, &res, &EigenConfig::default()).unwrap();
        assert!(own.lambda1.abs() < 1e-9);
    }

    #[test]
    fn csv_header() {
        let g = grid(&[1.0], 4);
        let t = SpeciesTraits::with_ratios(vec![1.0], vec![]).unwrap();
        let c = PiecewiseField::piecewise_constant(&g, &[0.5]).unwrap();
        let e = principal_eigenpair(&assemble_linearization(&g, &t, &c).unwrap()).unwrap();
        let mut out = Vec::new();
        e.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("lambda1,5.0"));
        assert_eq!(lines.next().unwrap(), "patch_index,x,value");
    }
}
