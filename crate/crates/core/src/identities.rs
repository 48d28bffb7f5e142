//! Integral identities satisfied by exact steady states, evaluated on
//! discrete solutions. Their residuals measure discretization error and
//! shrink at second order under refinement.

use crate::dynamics::CompetitionSystem;
use crate::eigen::EigenPair;
use crate::error::{Error, Result};
use crate::grid::{integrate_patch_range, Grid, PiecewiseField};
use crate::landscape::{PatchEnvironment, SpeciesTraits};
use crate::scalar::Scalar;

/// Both sides of an identity and their relative mismatch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityResidual<T> {
    pub lhs: T,
    pub rhs: T,
    /// `|lhs - rhs| / (Σ|terms| + tiny)`.
    pub relative: T,
}

fn relative<T: Scalar>(lhs: T, rhs: T, magnitude: T) -> T {
    let diff = (lhs - rhs).abs();
    if diff == T::zero() {
        T::zero()
    } else {
        diff / (magnitude + T::min_positive_value())
    }
}

/// `Π_{ℓ=i}^{last} p_ℓ` with the convention that the last patch has ratio 1.
fn tail_products<T: Scalar>(p: &[T], n: usize, last: usize) -> Vec<T> {
    let mut out = vec![T::one(); n + 1];
    for i in (0..=last).rev() {
        let pi = if i + 1 < n { p[i] } else { T::one() };
        out[i] = pi * if i < last { out[i + 1] } else { T::one() };
    }
    out
}

/// Compares `λ1 Σ Q_i ∫φu*` with the interface and gradient terms it equals,
/// where `Q_i = Π_{ℓ≥i} p_ℓ`.
pub fn fitness_identity_residual<T: Scalar>(
    ustar: &PiecewiseField<T>,
    eig: &EigenPair<T>,
    env: &PatchEnvironment<T>,
    resident: &SpeciesTraits<T>,
    mutant: &SpeciesTraits<T>,
    grid: &Grid<T>,
) -> Result<IdentityResidual<T>> {
    let n = grid.n();
    if ustar.grid() != grid || eig.phi.grid() != grid {
        return Err(Error::GridMismatch);
    }
    if env.n() != n {
        return Err(Error::DimensionMismatch {
            what: "environment",
            expected: n,
            got: env.n(),
        });
    }
    resident.check_dims(n, "resident.d")?;
    mutant.check_dims(n, "mutant.d")?;
    let p = resident.p.as_slice();
    let phat = mutant.p.as_slice();
    let q = tail_products(p, n, n - 1);
    let phi = &eig.phi;
    let du = ustar.derivative();
    let dphi = phi.derivative();
    let prod = phi.zip_map(ustar, |a, b| a * b)?;
    let grad = dphi.zip_map(&du, |a, b| a * b)?;

    let mut lhs = T::zero();
    let mut magnitude = T::zero();
    for i in 0..n {
        let m = grid.subintervals(i);
        lhs += q[i] * integrate_patch_range(&prod, i, 0, m);
    }
    lhs *= eig.lambda1;
    magnitude += lhs.abs();
    let mut rhs = T::zero();
    for i in 0..n.saturating_sub(1) {
        let t = q[i + 1] * resident.d[i] * (phat[i] - p[i]) * du.left_trace(i) * phi.left_trace(i);
        rhs += t;
        magnitude += t.abs();
    }
    for i in 0..n {
        let m = grid.subintervals(i);
        let t = q[i] * (resident.d[i] - mutant.d[i]) * integrate_patch_range(&grad, i, 0, m);
        rhs += t;
        magnitude += t.abs();
    }
    Ok(IdentityResidual {
        lhs,
        rhs,
        relative: relative(lhs, rhs, magnitude),
    })
}

/// Residuals of the coexistence identities on `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoexistenceResiduals<T> {
    /// Single-patch identity written with the resident; `None` if `[a, b]`
    /// spans an interface or the resident vanishes.
    pub u_form: Option<IdentityResidual<T>>,
    /// The same with the mutant.
    pub v_form: Option<IdentityResidual<T>>,
    /// Cross identity linking the two species across any number of patches.
    pub cross: IdentityResidual<T>,
    /// Measured steady residual of the state.
    pub steady_residual: T,
}

/// Node of `x` on `grid`, taken from the right patch at an interface when
/// `from_right` and from the left patch otherwise.
fn locate<T: Scalar>(grid: &Grid<T>, x: T, from_right: bool, field: &'static str) -> Result<(usize, usize)> {
    let b = grid.boundaries();
    let n = grid.n();
    let tol = T::lit(1e-9) * grid.min_spacing();
    if x < b[0] - tol || x > b[n] + tol {
        return Err(Error::validation(field, "outside the landscape"));
    }
    let mut patch = 0;
    for i in 0..n {
        let inside = if from_right {
            x >= b[i] - tol && x < b[i + 1] - tol
        } else {
            x > b[i] + tol && x <= b[i + 1] + tol
        };
        if inside {
            patch = i;
            break;
        }
        patch = i;
    }
    let h = grid.spacing(patch);
    let s = (x - b[patch]) / h;
    let j = s.round();
    if (s - j).abs() > T::lit(1e-6) {
        return Err(Error::validation(field, "must coincide with a grid node"));
    }
    let j = j.to_usize().unwrap_or(0).min(grid.subintervals(patch));
    Ok((patch, j))
}

/// Evaluates the single-patch identities (resident and mutant forms) and the
/// cross-patch identity for a coexistence steady state on `[a, b]`.
///
/// `a` and `b` must be grid nodes. Fails with [`Error::NotSteady`] when the
/// coupled steady residual exceeds `max_residual`.
#[allow(clippy::too_many_arguments)]
pub fn coexistence_identity_residual<T: Scalar>(
    u: &PiecewiseField<T>,
    v: &PiecewiseField<T>,
    env: &PatchEnvironment<T>,
    resident: &SpeciesTraits<T>,
    mutant: &SpeciesTraits<T>,
    grid: &Grid<T>,
    a: T,
    b: T,
    max_residual: T,
) -> Result<CoexistenceResiduals<T>> {
    if u.grid() != grid || v.grid() != grid {
        return Err(Error::GridMismatch);
    }
    if !(a <= b) {
        return Err(Error::validation("identity.interval", "a must not exceed b"));
    }
    let system = CompetitionSystem::from_parts(grid, env, resident, mutant)?;
    let steady_residual = system.residual_norm(&u.to_reduced(), &v.to_reduced());
    if !(steady_residual <= max_residual) {
        return Err(Error::NotSteady {
            norm: steady_residual.to_f64().unwrap_or(f64::NAN),
        });
    }
    let zero = IdentityResidual {
        lhs: T::zero(),
        rhs: T::zero(),
        relative: T::zero(),
    };
    if a == b {
        return Ok(CoexistenceResiduals {
            u_form: Some(zero),
            v_form: Some(zero),
            cross: zero,
            steady_residual,
        });
    }
    let (pa, ja) = locate(grid, a, true, "identity.a")?;
    let (pb, jb) = locate(grid, b, false, "identity.b")?;
    let du = u.derivative();
    let dv = v.derivative();

    let single = |w: &PiecewiseField<T>, dw: &PiecewiseField<T>, d: T| -> Option<IdentityResidual<T>> {
        if pa != pb {
            return None;
        }
        let i = pa;
        let ws = w.patch(i);
        if ws[ja..=jb].iter().any(|&x| !(x > T::zero())) {
            return None;
        }
        let k = env.k[i];
        let r = env.r[i];
        let net = u.zip_map(v, |x, y| r * (k - x - y)).ok()?;
        let lhs = integrate_patch_range(&net, i, ja, jb);
        let ratio = dw.zip_map(w, |g, x| if x > T::zero() { g * g / (x * x) } else { T::zero() }).ok()?;
        let dws = dw.patch(i);
        let t1 = -d * k * dws[jb] / ws[jb];
        let t2 = d * k * dws[ja] / ws[ja];
        let t3 = -d * k * integrate_patch_range(&ratio, i, ja, jb);
        let rhs = t1 + t2 + t3;
        let magnitude = lhs.abs() + t1.abs() + t2.abs() + t3.abs();
        Some(IdentityResidual {
            lhs,
            rhs,
            relative: relative(lhs, rhs, magnitude),
        })
    };
    let u_form = single(u, &du, resident.d[pa]);
    let v_form = single(v, &dv, mutant.d[pa]);

    // cross identity with weights W_i = Π_{ℓ=i}^{last} p_ℓ
    let n = grid.n();
    let p = resident.p.as_slice();
    let phat = mutant.p.as_slice();
    let w = tail_products(p, n, pb);
    let grad = du.zip_map(&dv, |x, y| x * y)?;
    let mut terms = Vec::new();
    for i in pa..pb {
        terms.push(w[i + 1] * resident.d[i] * (phat[i] - p[i]) * du.left_trace(i) * v.left_trace(i));
    }
    let (d_b, dh_b) = (resident.d[pb], mutant.d[pb]);
    let (d_a, dh_a) = (resident.d[pa], mutant.d[pa]);
    terms.push(dh_b * w[pb] * dv.patch(pb)[jb] * u.patch(pb)[jb]);
    terms.push(-dh_a * w[pa] * dv.patch(pa)[ja] * u.patch(pa)[ja]);
    terms.push(d_a * w[pa] * du.patch(pa)[ja] * v.patch(pa)[ja]);
    terms.push(-d_b * w[pb] * du.patch(pb)[jb] * v.patch(pb)[jb]);
    for i in pa..=pb {
        let j0 = if i == pa { ja } else { 0 };
        let j1 = if i == pb { jb } else { grid.subintervals(i) };
        terms.push(w[i] * (resident.d[i] - mutant.d[i]) * integrate_patch_range(&grad, i, j0, j1));
    }
    let total: T = terms.iter().copied().sum();
    let magnitude: T = terms.iter().map(|t| t.abs()).sum();
    let cross = IdentityResidual {
        lhs: T::zero(),
        rhs: total,
        relative: relative(T::zero(), total, magnitude),
    };
    Ok(CoexistenceResiduals {
        u_form,
        v_form,
        cross,
        steady_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::{fitness_against, EigenConfig};
    use crate::grid::{build_grid, Resolution};
    use crate::landscape::Landscape;
    use crate::steady::{solve_resident_steady, SteadyConfig};

    fn resident_state(m: usize) -> (Grid<f64>, PatchEnvironment<f64>, SpeciesTraits<f64>, PiecewiseField<f64>) {
        let l = Landscape::from_lengths(&[1.0, 1.0]).unwrap();
        let env = PatchEnvironment::new(vec![1.0, 1.5], vec![1.0, 2.0]).unwrap();
        let res = SpeciesTraits::with_ratios(vec![1.0, 0.5], vec![3.0]).unwrap();
        let g = build_grid(&l, &Resolution::Uniform(m)).unwrap();
        let u = solve_resident_steady(&l, &env, &res, &g, &SteadyConfig::default()).unwrap();
        (g, env, res, u)
    }

    #[test]
    fn fitness_identity_converges() {
        let mutant = SpeciesTraits::with_ratios(vec![0.7, 1.2], vec![1.5]).unwrap();
        let mut rel = Vec::new();
        for m in [50, 100, 200] {
            let (g, env, res, u) = resident_state(m);
            let e = fitness_against(&u, &env, &mutant, &EigenConfig::default()).unwrap();
            rel.push(fitness_identity_residual(&u, &e, &env, &res, &mutant, &g).unwrap().relative);
        }
        assert!(rel[2] < 1e-3);
        for w in rel.windows(2) {
            let ratio = w[0] / w[1];
            assert!(ratio > 3.0 && ratio < 5.0, "{rel:?}");
        }
    }

    #[test]
    fn same_traits_give_zero_sides() {
        let (g, env, res, u) = resident_state(40);
        let e = fitness_against(&u, &env, &res, &EigenConfig::default()).unwrap();
        let r = fitness_identity_residual(&u, &e, &env, &res, &res, &g).unwrap();
        assert!(r.lhs.abs() < 1e-10 && r.rhs == 0.0);
    }

    #[test]
    fn single_species_form() {
        // u ≡ 0, v = v*: the mutant form reduces to the single-species identity
        let (g, env, res, vstar) = resident_state(100);
        let zero = PiecewiseField::zeros(&g);
        let r = coexistence_identity_residual(&zero, &vstar, &env, &res, &res, &g, 0.2, 0.9, 1e-8).unwrap();
        assert!(r.u_form.is_none());
        assert!(r.v_form.unwrap().relative < 1e-3);
        let empty = coexistence_identity_residual(&zero, &vstar, &env, &res, &res, &g, 0.5, 0.5, 1e-8).unwrap();
        assert_eq!(empty.cross.relative, 0.0);
    }

    #[test]
    fn rejects_unsteady_state() {
        let (g, env, res, u) = resident_state(20);
        let pert = u.map(|_, _, x| 0.9 * x);
        let err = coexistence_identity_residual(&pert, &PiecewiseField::zeros(&g), &env, &res, &res, &g, 0.0, 1.0, 1e-8).unwrap_err();
        assert!(matches!(err, Error::NotSteady { .. }));
    }

    #[test]
    fn off_node_position_is_rejected() {
        let (g, env, res, u) = resident_state(20);
        let zero = PiecewiseField::zeros(&g);
        assert!(coexistence_identity_residual(&u, &zero, &env, &res, &res, &g, 0.0, 0.333, 1e-8).unwrap_err().is_validation());
    }
}
