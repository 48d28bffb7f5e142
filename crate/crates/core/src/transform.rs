//! Change of variables that removes the density jumps.
//!
//! With `P_i` the cumulative jump product, `ξ = ξ_{i-1} + P_i (x - x_{i-1})`
//! and `u = P_i w` on patch `i`, the resident problem becomes a continuous
//! problem in `w` with diffusion `d_i P_i²` and capacity `k_i / P_i`.
//!
//! [`solve_steady_finite_volume`] solves that problem with a cell-centered
//! finite-volume scheme, which shares no assembly code with the direct
//! discretization and serves as an independent reference.

use crate::error::{Error, Result};
use crate::grid::{build_grid, Grid, PiecewiseField, Resolution};
use crate::landscape::{Landscape, PatchEnvironment, SpeciesTraits};
use crate::operator::Tridiagonal;
use crate::scalar::{max_abs, Scalar};
use crate::steady::{damped_newton, SteadyConfig, RESIDUAL_SCALE};

#[derive(Debug, Clone, PartialEq)]
pub struct TransformedProblem<T> {
    /// Original patch boundaries.
    pub x: Vec<T>,
    /// Transformed patch boundaries.
    pub xi: Vec<T>,
    pub diffusion: Vec<T>,
    pub ktilde: Vec<T>,
    pub r: Vec<T>,
    /// `P_i` per patch; `u = scale_i * w`.
    pub scale: Vec<T>,
}

pub fn to_transformed<T: Scalar>(
    landscape: &Landscape<T>,
    env: &PatchEnvironment<T>,
    traits: &SpeciesTraits<T>,
) -> Result<TransformedProblem<T>> {
    let n = landscape.n();
    traits.check_dims(n, "traits.d")?;
    if env.n() != n {
        return Err(Error::DimensionMismatch {
            what: "environment",
            expected: n,
            got: env.n(),
        });
    }
    let scale = traits.p.cumulative();
    let mut xi = Vec::with_capacity(n + 1);
    xi.push(landscape.left(0));
    for i in 0..n {
        xi.push(xi[i] + scale[i] * landscape.patch_length(i));
    }
    Ok(TransformedProblem {
        x: landscape.boundaries().to_vec(),
        xi,
        diffusion: (0..n).map(|i| traits.d[i] * scale[i] * scale[i]).collect(),
        ktilde: (0..n).map(|i| env.k[i] / scale[i]).collect(),
        r: env.r.clone(),
        scale: scale[..n].to_vec(),
    })
}

impl<T: Scalar> TransformedProblem<T> {
    pub fn n(&self) -> usize {
        self.scale.len()
    }

    pub fn landscape(&self) -> Result<Landscape<T>> {
        Landscape::new(self.xi.clone())
    }

    pub fn environment(&self) -> Result<PatchEnvironment<T>> {
        PatchEnvironment::new(self.r.clone(), self.ktilde.clone())
    }

    /// Traits of the transformed species: no jumps.
    pub fn traits(&self) -> Result<SpeciesTraits<T>> {
        SpeciesTraits::with_ratios(self.diffusion.clone(), vec![T::one(); self.n() - 1])
    }
}

fn boundaries_match<T: Scalar>(a: &[T], b: &[T]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let span = (b[b.len() - 1] - b[0]).abs().max(T::one());
    a.iter().zip(b).all(|(&x, &y)| (x - y).abs() <= T::lit(1e-12) * span)
}

/// Maps a field on the original grid to `w = u / P_i` on the transformed grid.
pub fn push_forward<T: Scalar>(field: &PiecewiseField<T>, problem: &TransformedProblem<T>) -> Result<PiecewiseField<T>> {
    let grid = field.grid();
    if !boundaries_match(grid.boundaries(), &problem.x) {
        return Err(Error::GridMismatch);
    }
    let target = grid.with_boundaries(problem.xi.clone())?;
    Ok(PiecewiseField::from_fn_indexed(&target, |patch, j| {
        field.patch(patch)[j] / problem.scale[patch]
    }))
}

/// Maps a field on the transformed grid back to `u = P_i w`.
pub fn pull_back<T: Scalar>(field: &PiecewiseField<T>, problem: &TransformedProblem<T>) -> Result<PiecewiseField<T>> {
    let grid = field.grid();
    if !boundaries_match(grid.boundaries(), &problem.xi) {
        return Err(Error::GridMismatch);
    }
    let target = grid.with_boundaries(problem.x.clone())?;
    Ok(PiecewiseField::from_fn_indexed(&target, |patch, j| {
        field.patch(patch)[j] * problem.scale[patch]
    }))
}

/// Cell-centered finite-volume steady state of the transformed problem,
/// reconstructed at the vertices of a grid with `cells[i]` cells on patch `i`.
pub fn solve_steady_finite_volume<T: Scalar>(
    problem: &TransformedProblem<T>,
    cells: &[usize],
    config: &SteadyConfig<T>,
) -> Result<PiecewiseField<T>> {
    config.validate()?;
    let n = problem.n();
    if cells.len() != n {
        return Err(Error::DimensionMismatch {
            what: "cells",
            expected: n,
            got: cells.len(),
        });
    }
    let landscape = problem.landscape()?;
    let grid: Grid<T> = build_grid(&landscape, &Resolution::PerPatch(cells.to_vec()))?;

    let total: usize = cells.iter().sum();
    let mut width = Vec::with_capacity(total);
    let mut diff = Vec::with_capacity(total);
    let mut rate = Vec::with_capacity(total);
    let mut cap = Vec::with_capacity(total);
    for i in 0..n {
        for _ in 0..cells[i] {
            width.push(grid.spacing(i));
            diff.push(problem.diffusion[i]);
            rate.push(problem.r[i]);
            cap.push(problem.ktilde[i]);
        }
    }
    let two = T::lit(2.0);
    // face transmissibilities between cell c and c+1 (harmonic across patches)
    let trans: Vec<T> = (0..total - 1)
        .map(|c| T::one() / (width[c] / (two * diff[c]) + width[c + 1] / (two * diff[c + 1])))
        .collect();

    let mut diffusion = Tridiagonal::zeros(total);
    for c in 0..total {
        let inv = T::one() / width[c];
        if c + 1 < total {
            diffusion.upper[c] = trans[c] * inv;
            diffusion.diag[c] -= trans[c] * inv;
        }
        if c > 0 {
            diffusion.lower[c - 1] = trans[c - 1] * inv;
            diffusion.diag[c] -= trans[c - 1] * inv;
        }
    }
    let norm_a = diffusion.norm_inf();

    let residual = |w: &[T]| {
        let mut out = diffusion.mul_vec(w);
        for c in 0..total {
            out[c] += rate[c] * w[c] * (T::one() - w[c] / cap[c]);
        }
        out
    };
    let jacobian = |w: &[T]| {
        let mut j = diffusion.clone();
        for c in 0..total {
            j.diag[c] += rate[c] * (T::one() - two * w[c] / cap[c]);
        }
        j
    };
    let scale = |w: &[T]| T::one() + T::lit(RESIDUAL_SCALE) * norm_a * max_abs(w);
    // transformed capacities bound the solution from both sides
    let slack = T::lit(1e-8);
    let lo = cap.iter().fold(T::infinity(), |m, &x| m.min(x)) * (T::one() - slack);
    let hi = cap.iter().fold(T::zero(), |m, &x| m.max(x)) * (T::one() + slack);
    let (lower, upper) = (vec![lo; total], vec![hi; total]);
    let (w, norm, _, converged) = damped_newton(cap.clone(), residual, jacobian, scale, (&lower, &upper), config);
    if !converged {
        return Err(Error::SteadyFailed {
            residual: norm.to_f64().unwrap_or(f64::NAN),
        });
    }

    let mut starts = vec![0; n + 1];
    for i in 0..n {
        starts[i + 1] = starts[i] + cells[i];
    }
    let eight = T::lit(8.0);
    let nine = T::lit(9.0);
    let interface = |i: usize| {
        let (l, r) = (starts[i + 1] - 1, starts[i + 1]);
        let gl = diff[l] / width[l];
        let gr = diff[r] / width[r];
        (gl * w[l] + gr * w[r]) / (gl + gr)
    };
    Ok(PiecewiseField::from_fn_indexed(&grid, |i, j| {
        let m = cells[i];
        let s = starts[i];
        if j > 0 && j < m {
            (w[s + j - 1] + w[s + j]) / two
        } else if j == 0 {
            if i == 0 {
                (nine * w[0] - w[1]) / eight
            } else {
                interface(i - 1)
            }
        } else if i == n - 1 {
            (nine * w[total - 1] - w[total - 2]) / eight
        } else {
            interface(i)
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::assemble_diffusion;
    use approx::assert_relative_eq;

    fn setup(lengths: &[f64], d: &[f64], p: &[f64], k: &[f64]) -> (Landscape<f64>, PatchEnvironment<f64>, SpeciesTraits<f64>) {
        (
            Landscape::from_lengths(lengths).unwrap(),
            PatchEnvironment::new(vec![1.0; k.len()], k.to_vec()).unwrap(),
            SpeciesTraits::with_ratios(d.to_vec(), p.to_vec()).unwrap(),
        )
    }

    #[test]
    fn two_patch_transform() {
        let (l, e, t) = setup(&[1.0, 1.0], &[1.0, 1.0], &[2.0], &[1.0, 3.0]);
        let tp = to_transformed(&l, &e, &t).unwrap();
        assert_eq!(tp.xi, vec![0.0, 1.0, 3.0]);
        assert_eq!(tp.diffusion, vec![1.0, 4.0]);
        assert_eq!(tp.ktilde, vec![1.0, 1.5]);
    }

    #[test]
    fn three_patch_transform() {
        let (l, e, t) = setup(&[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0], &[2.0, 0.5], &[1.0, 1.0, 1.0]);
        let tp = to_transformed(&l, &e, &t).unwrap();
        assert_eq!(tp.xi, vec![0.0, 1.0, 3.0, 4.0]);
        assert_eq!(tp.scale, vec![1.0, 2.0, 1.0]);
    }

    #[test]
    fn single_patch_is_identity() {
        let (l, e, t) = setup(&[2.5], &[0.7], &[], &[1.3]);
        let tp = to_transformed(&l, &e, &t).unwrap();
        assert_eq!(tp.xi, l.boundaries());
        assert_eq!(tp.diffusion, vec![0.7]);
        assert_eq!(tp.ktilde, vec![1.3]);
    }

    #[test]
    fn round_trip_and_mismatch() {
        let (l, e, t) = setup(&[1.0, 0.5, 2.0], &[1.0, 2.0, 0.5], &[3.0, 0.25], &[1.0, 2.0, 1.0]);
        let tp = to_transformed(&l, &e, &t).unwrap();
        let g = build_grid(&l, &Resolution::Uniform(8)).unwrap();
        let u = PiecewiseField::from_fn(&g, |i, x| (i as f64 + 1.0) * (1.0 + x * x));
        let w = push_forward(&u, &tp).unwrap();
        assert_eq!(w.grid().boundaries(), tp.xi.as_slice());
        let back = pull_back(&w, &tp).unwrap();
        assert!(back.max_abs_diff(&u).unwrap() < 1e-14);
        assert!(matches!(pull_back(&u, &tp), Err(Error::GridMismatch)));
        assert!(matches!(push_forward(&w, &tp), Err(Error::GridMismatch)));
    }

    #[test]
    fn operators_are_conjugate() {
        let (l, e, t) = setup(&[1.0, 0.5, 2.0], &[1.0, 2.0, 0.5], &[3.0, 0.25], &[1.0, 2.0, 1.0]);
        let tp = to_transformed(&l, &e, &t).unwrap();
        let g = build_grid(&l, &Resolution::PerPatch(vec![6, 5, 9])).unwrap();
        let gx = g.with_boundaries(tp.xi.clone()).unwrap();
        let ax = assemble_diffusion(&g, &t).unwrap();
        let aw = assemble_diffusion(&gx, &tp.traits().unwrap()).unwrap();
        let s: Vec<f64> = (0..g.reduced_dofs()).map(|r| tp.scale[g.reduced_owner(r)]).collect();
        let (mx, mw) = (ax.matrix(), aw.matrix());
        for r in 0..s.len() {
            assert_relative_eq!(mw.diag[r], mx.diag[r], max_relative = 1e-12);
            if r + 1 < s.len() {
                assert_relative_eq!(mw.upper[r], mx.upper[r] * s[r + 1] / s[r], max_relative = 1e-12);
                assert_relative_eq!(mw.lower[r], mx.lower[r] * s[r] / s[r + 1], max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn finite_volume_reproduces_ifd_state() {
        // p equal to the capacity ratios: w is piecewise k/P = k_0 everywhere
        let (l, e, t) = setup(&[1.0, 1.0], &[1.0, 2.0], &[3.0], &[1.0, 3.0]);
        let tp = to_transformed(&l, &e, &t).unwrap();
        let w = solve_steady_finite_volume(&tp, &[10, 10], &SteadyConfig::default()).unwrap();
        for &v in w.values() {
            assert!((v - 1.0).abs() < 1e-12);
        }
        let u = pull_back(&w, &tp).unwrap();
        assert!((u.patch(1)[4] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn finite_volume_converges_to_direct() {
        use crate::steady::solve_resident_steady;
        let (l, e, t) = setup(&[1.0, 1.0], &[1.0, 1.0], &[2.0], &[1.0, 1.0]);
        let tp = to_transformed(&l, &e, &t).unwrap();
        let mut errs = Vec::new();
        for m in [20usize, 40, 80] {
            let g = build_grid(&l, &Resolution::Uniform(m)).unwrap();
            let direct = solve_resident_steady(&l, &e, &t, &g, &SteadyConfig::default()).unwrap();
            let w = solve_steady_finite_volume(&tp, &[m, m], &SteadyConfig::default()).unwrap();
            let u = pull_back(&w, &tp).unwrap();
            errs.push(u.max_abs_diff(&direct).unwrap());
        }
        assert!(errs[0] < 5e-3);
        assert!(errs[1] < errs[0] / 3.0 && errs[2] < errs[1] / 3.0, "{errs:?}");
    }
}
