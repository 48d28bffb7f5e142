//! The resident's positive steady state and its monotonicity structure.

use crate::error::{Error, Result};
use crate::grid::{Grid, PiecewiseField};
use crate::landscape::{
    ifd_strategy, strict_dominates, Landscape, PatchEnvironment, SpeciesTraits,
};
use crate::operator::{assemble_diffusion, LinearOperator, Tridiagonal};
use crate::scalar::{max_abs, Scalar};

/// Residuals are measured relative to `1 + RESIDUAL_SCALE * ‖A‖∞ ‖u‖∞`, which
/// keeps the absolute tolerance above the rounding floor of fine grids.
pub const RESIDUAL_SCALE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyConfig<T> {
    pub newton_tol: T,
    pub max_newton_iters: usize,
    pub armijo: T,
    pub max_backtracks: usize,
    pub fallback_dt: T,
    pub fallback_horizon: T,
}

impl<T: Scalar> Default for SteadyConfig<T> {
    fn default() -> Self {
        Self {
            newton_tol: T::lit(1e-10),
            max_newton_iters: 50,
            armijo: T::lit(1e-4),
            max_backtracks: 30,
            fallback_dt: T::lit(0.05),
            fallback_horizon: T::lit(1e4),
        }
    }
}

impl<T: Scalar> SteadyConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.newton_tol > T::zero()) {
            return Err(Error::validation("steady.newton_tol", "must be positive"));
        }
        if self.max_newton_iters < 1 {
            return Err(Error::validation("steady.max_newton_iters", "must be at least 1"));
        }
        if !(self.fallback_dt > T::zero()) || !(self.fallback_horizon > T::zero()) {
            return Err(Error::validation("steady.fallback", "dt and horizon must be positive"));
        }
        Ok(())
    }
}

/// Result of a steady solve with its diagnostics.
#[derive(Debug, Clone)]
pub struct SteadySolution<T> {
    pub field: PiecewiseField<T>,
    pub reduced: Vec<T>,
    pub scaled_residual: T,
    pub newton_iterations: usize,
    pub used_fallback: bool,
}

/// Nodal logistic reaction `r u (1 - u/k)` attached to a species operator.
#[derive(Debug, Clone)]
pub struct LogisticProblem<T> {
    pub op: LinearOperator<T>,
    r: Vec<T>,
    k: Vec<T>,
}

impl<T: Scalar> LogisticProblem<T> {
    pub fn new(op: LinearOperator<T>, env: &PatchEnvironment<T>) -> Result<Self> {
        let grid = op.grid();
        if env.n() != grid.n() {
            return Err(Error::DimensionMismatch {
                what: "environment",
                expected: grid.n(),
                got: env.n(),
            });
        }
        let r = PiecewiseField::piecewise_constant(grid, &env.r)?.into_values();
        let k = PiecewiseField::piecewise_constant(grid, &env.k)?.into_values();
        Ok(Self { op, r, k })
    }

    pub fn residual(&self, u: &[T]) -> Vec<T> {
        let full = self.op.expand(u);
        let f: Vec<T> = full
            .values()
            .iter()
            .enumerate()
            .map(|(a, &ua)| self.r[a] * ua * (T::one() - ua / self.k[a]))
            .collect();
        let mut out = self.op.apply(u);
        for (o, g) in out.iter_mut().zip(self.op.restrict(&f)) {
            *o += g;
        }
        out
    }

    pub fn jacobian(&self, u: &[T]) -> Tridiagonal<T> {
        let full = self.op.expand(u);
        let two = T::lit(2.0);
        let df: Vec<T> = full
            .values()
            .iter()
            .enumerate()
            .map(|(a, &ua)| self.r[a] * (T::one() - two * ua / self.k[a]))
            .collect();
        let mut j = self.op.matrix().clone();
        j.add_diagonal(&self.op.restrict_diagonal(&df));
        j
    }

    pub fn scaled_residual(&self, u: &[T]) -> T {
        self.scale_norm(&self.residual(u), u)
    }

    fn scale_norm(&self, res: &[T], u: &[T]) -> T {
        max_abs(res) / (T::one() + T::lit(RESIDUAL_SCALE) * self.op.matrix().norm_inf() * max_abs(u))
    }

    /// Initial guess `u = k_i` on every reduced DOF owned by patch `i`.
    pub fn capacity_guess(&self, env: &PatchEnvironment<T>) -> Vec<T> {
        let g = self.op.grid();
        (0..g.reduced_dofs()).map(|r| env.k[g.reduced_owner(r)]).collect()
    }

    /// Sub/super-solution box `P_i · [min_j k_j/P_j, max_j k_j/P_j]` per reduced DOF,
    /// widened by a relative `1e-8`. The positive steady state lies inside; the
    /// trivial state does not.
    pub fn solution_box(&self) -> (Vec<T>, Vec<T>) {
        let g = self.op.grid();
        let jump = self.op.null_vector();
        let mut lo = T::infinity();
        let mut hi = T::zero();
        for r in 0..g.reduced_dofs() {
            let level = self.k[g.dof(g.reduced_owner(r), 0)] / jump[r];
            lo = lo.min(level);
            hi = hi.max(level);
        }
        let slack = T::lit(1e-8);
        let lower = jump.iter().map(|&p| p * lo * (T::one() - slack)).collect();
        let upper = jump.iter().map(|&p| p * hi * (T::one() + slack)).collect();
        (lower, upper)
    }

    fn positivity_floor(&self) -> T {
        T::lit(1e-12) * self.k.iter().fold(T::infinity(), |m, &x| m.min(x))
    }
}

/// Damped Newton with Armijo backtracking on the sup-norm residual.
/// Returns the iterate, its scaled residual and the iteration count.
pub(crate) fn damped_newton<T: Scalar>(
    mut u: Vec<T>,
    residual: impl Fn(&[T]) -> Vec<T>,
    jacobian: impl Fn(&[T]) -> Tridiagonal<T>,
    scale: impl Fn(&[T]) -> T,
    bounds: (&[T], &[T]),
    config: &SteadyConfig<T>,
) -> (Vec<T>, T, usize, bool) {
    let (lower, upper) = bounds;
    let clamp = |a: usize, x: T| x.max(lower[a]).min(upper[a]);
    let mut res = residual(&u);
    let mut norm = max_abs(&res) / scale(&u);
    let mut iters = 0;
    let mut converged = norm <= config.newton_tol;
    let half = T::lit(0.5);
    while !converged && iters < config.max_newton_iters {
        iters += 1;
        let neg: Vec<T> = res.iter().map(|&x| -x).collect();
        let delta = match jacobian(&u).solve(&neg) {
            Ok(d) => d,
            Err(_) => break,
        };
        let mut t = T::one();
        let mut accepted = false;
        for _ in 0..=config.max_backtracks {
            let trial: Vec<T> = u
                .iter()
                .zip(&delta)
                .enumerate()
                .map(|(i, (&a, &b))| clamp(i, a + t * b))
                .collect();
            let trial_res = residual(&trial);
            let trial_norm = max_abs(&trial_res) / scale(&trial);
            if trial_norm.is_finite() && trial_norm <= (T::one() - config.armijo * t) * norm {
                u = trial;
                res = trial_res;
                norm = trial_norm;
                accepted = true;
                break;
            }
            t *= half;
        }
        if !accepted {
            break;
        }
        converged = norm <= config.newton_tol;
    }
    if converged {
        // one polishing step down to the rounding floor, kept only if it helps
        let neg: Vec<T> = res.iter().map(|&x| -x).collect();
        if let Ok(delta) = jacobian(&u).solve(&neg) {
            let trial: Vec<T> = u.iter().zip(&delta).enumerate().map(|(i, (&a, &b))| clamp(i, a + b)).collect();
            let trial_norm = max_abs(&residual(&trial)) / scale(&trial);
            if trial_norm < norm {
                u = trial;
                norm = trial_norm;
            }
        }
    }
    (u, norm, iters, converged)
}

/// Solves from a given reduced initial guess.
pub fn solve_steady_from<T: Scalar>(
    problem: &LogisticProblem<T>,
    initial: Vec<T>,
    config: &SteadyConfig<T>,
) -> Result<SteadySolution<T>> {
    config.validate()?;
    let (lower, upper) = problem.solution_box();
    let initial: Vec<T> = initial.iter().enumerate().map(|(a, &x)| x.max(lower[a]).min(upper[a])).collect();
    let (u, norm, iters, converged) = damped_newton(
        initial,
        |u| problem.residual(u),
        |u| problem.jacobian(u),
        |u| T::one() + T::lit(RESIDUAL_SCALE) * problem.op.matrix().norm_inf() * max_abs(u),
        (&lower, &upper),
        config,
    );
    if converged {
        return Ok(SteadySolution {
            field: problem.op.expand(&u),
            reduced: u,
            scaled_residual: norm,
            newton_iterations: iters,
            used_fallback: false,
        });
    }
    let (u, norm) = time_march(problem, u, config)?;
    Ok(SteadySolution {
        field: problem.op.expand(&u),
        reduced: u,
        scaled_residual: norm,
        newton_iterations: iters,
        used_fallback: true,
    })
}

/// Implicit-diffusion, explicit-reaction march of the single-species equation.
fn time_march<T: Scalar>(problem: &LogisticProblem<T>, start: Vec<T>, config: &SteadyConfig<T>) -> Result<(Vec<T>, T)> {
    let dt = config.fallback_dt;
    let system = problem.op.matrix().shifted(T::one(), -dt);
    let factor = system.factor()?;
    let floor = problem.positivity_floor();
    let mut u: Vec<T> = start.into_iter().map(|x| x.max(floor)).collect();
    let steps = (config.fallback_horizon / dt).ceil().to_usize().unwrap_or(usize::MAX);
    let mut norm = problem.scaled_residual(&u);
    for _ in 0..steps {
        if norm <= config.newton_tol {
            return Ok((u, norm));
        }
        let full = problem.op.expand(&u);
        let f: Vec<T> = full
            .values()
            .iter()
            .enumerate()
            .map(|(a, &ua)| problem.r[a] * ua * (T::one() - ua / problem.k[a]))
            .collect();
        let g = problem.op.restrict(&f);
        let mut rhs: Vec<T> = u.iter().zip(&g).map(|(&a, &b)| a + dt * b).collect();
        factor.solve_in_place(&mut rhs);
        u = rhs.into_iter().map(|x| x.max(T::zero())).collect();
        norm = problem.scaled_residual(&u);
    }
    if norm <= config.newton_tol {
        Ok((u, norm))
    } else {
        Err(Error::SteadyFailed {
            residual: norm.to_f64().unwrap_or(f64::NAN),
        })
    }
}

/// The unique positive steady state of the single-species problem.
pub fn solve_resident_steady<T: Scalar>(
    landscape: &Landscape<T>,
    env: &PatchEnvironment<T>,
    traits: &SpeciesTraits<T>,
    grid: &Grid<T>,
    config: &SteadyConfig<T>,
) -> Result<PiecewiseField<T>> {
    Ok(solve_resident_steady_detailed(landscape, env, traits, grid, config)?.field)
}

pub fn solve_resident_steady_detailed<T: Scalar>(
    landscape: &Landscape<T>,
    env: &PatchEnvironment<T>,
    traits: &SpeciesTraits<T>,
    grid: &Grid<T>,
    config: &SteadyConfig<T>,
) -> Result<SteadySolution<T>> {
    if grid.boundaries() != landscape.boundaries() {
        return Err(Error::GridMismatch);
    }
    let op = assemble_diffusion(grid, traits)?;
    let problem = LogisticProblem::new(op, env)?;
    let guess = problem.capacity_guess(env);
    solve_steady_from(&problem, guess, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trend {
    StrictlyDecreasing,
    StrictlyIncreasing,
    Flat,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    fn of<T: Scalar>(x: T, tol: T) -> Self {
        if x > tol {
            Sign::Positive
        } else if x < -tol {
            Sign::Negative
        } else {
            Sign::Zero
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport<T> {
    pub patches: Vec<Trend>,
    /// One-sided derivative signs `(u_x(x_i⁻), u_x(x_i⁺))` per interface.
    pub interfaces: Vec<(Sign, Sign)>,
    /// Sign of `u*_1(0) - k_1`.
    pub left_end: Sign,
    /// Sign of `u*_n(L) - k_n`.
    pub right_end: Sign,
    /// Interior points where the derivative changes sign, by patch.
    pub turning_points: Vec<(usize, T)>,
    /// Trend the strategy ordering predicts, if it predicts one.
    pub expected: Option<Trend>,
    pub flat_tol: T,
}

impl<T: Scalar> MonotonicityReport<T> {
    /// Whole-landscape trend: strict only if every patch and every interface
    /// trace agrees.
    pub fn overall(&self) -> Trend {
        let all = |t: Trend, s: Sign| {
            self.patches.iter().all(|&x| x == t) && self.interfaces.iter().all(|&(a, b)| a == s && b == s)
        };
        if all(Trend::StrictlyDecreasing, Sign::Negative) {
            Trend::StrictlyDecreasing
        } else if all(Trend::StrictlyIncreasing, Sign::Positive) {
            Trend::StrictlyIncreasing
        } else if all(Trend::Flat, Sign::Zero) {
            Trend::Flat
        } else {
            Trend::Mixed
        }
    }

    pub fn is_monotone(&self) -> bool {
        self.overall() != Trend::Mixed
    }

    /// Whether the observed structure matches the prediction, when there is one.
    pub fn consistent(&self) -> Option<bool> {
        let expected = self.expected?;
        let ends = match expected {
            Trend::StrictlyDecreasing => self.left_end == Sign::Negative && self.right_end == Sign::Positive,
            Trend::StrictlyIncreasing => self.left_end == Sign::Positive && self.right_end == Sign::Negative,
            Trend::Flat => self.left_end == Sign::Zero && self.right_end == Sign::Zero,
            Trend::Mixed => true,
        };
        Some(ends && self.overall() == expected)
    }
}

/// Derivative signs of a steady state per patch and at the interfaces.
pub fn monotonicity_report<T: Scalar>(
    ustar: &PiecewiseField<T>,
    env: &PatchEnvironment<T>,
    traits: &SpeciesTraits<T>,
) -> Result<MonotonicityReport<T>> {
    let grid = ustar.grid();
    let n = grid.n();
    if env.n() != n {
        return Err(Error::DimensionMismatch {
            what: "environment",
            expected: n,
            got: env.n(),
        });
    }
    traits.check_dims(n, "traits.d")?;
    let flat_tol = T::lit(1e-8) * env.max_k();
    let du = ustar.derivative();

    let mut patches = Vec::with_capacity(n);
    let mut turning_points = Vec::new();
    for i in 0..n {
        let d = du.patch(i);
        let m = d.len() - 1;
        let interior = &d[1..m];
        let trend = if interior.iter().all(|&x| x < -flat_tol) {
            Trend::StrictlyDecreasing
        } else if interior.iter().all(|&x| x > flat_tol) {
            Trend::StrictlyIncreasing
        } else if interior.iter().all(|&x| x.abs() <= flat_tol) {
            Trend::Flat
        } else {
            Trend::Mixed
        };
        // sign changes, skipping nodes inside the flat band
        let mut last: Option<(usize, Sign)> = None;
        for j in 1..m {
            let s = Sign::of(d[j], flat_tol);
            if s == Sign::Zero {
                continue;
            }
            if let Some((jl, sl)) = last {
                if sl != s {
                    let (a, b) = (d[jl], d[j]);
                    let xa = grid.node(i, jl);
                    let xb = grid.node(i, j);
                    turning_points.push((i, xa + (xb - xa) * a / (a - b)));
                }
            }
            last = Some((j, s));
        }
        patches.push(trend);
    }

    let interfaces = (0..n.saturating_sub(1))
        .map(|i| (Sign::of(du.left_trace(i), flat_tol), Sign::of(du.right_trace(i), flat_tol)))
        .collect();
    let left_end = Sign::of(ustar.patch(0)[0] - env.k[0], flat_tol);
    let right_end = Sign::of(*ustar.patch(n - 1).last().unwrap() - env.k[n - 1], flat_tol);

    let expected = if n == 1 {
        Some(Trend::Flat)
    } else {
        let kbar = ifd_strategy(env)?;
        let p = traits.p.as_slice();
        if p == kbar.as_slice() {
            Some(Trend::Flat)
        } else if strict_dominates(p, kbar.as_slice())? {
            Some(Trend::StrictlyDecreasing)
        } else if strict_dominates(kbar.as_slice(), p)? {
            Some(Trend::StrictlyIncreasing)
        } else {
            None
        }
    };

    Ok(MonotonicityReport {
        patches,
        interfaces,
        left_end,
        right_end,
        turning_points,
        expected,
        flat_tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Resolution};

    fn solve(lengths: &[f64], k: &[f64], r: &[f64], d: &[f64], p: &[f64], m: usize) -> (PiecewiseField<f64>, PatchEnvironment<f64>, SpeciesTraits<f64>) {
        let l = Landscape::from_lengths(lengths).unwrap();
        let env = PatchEnvironment::new(r.to_vec(), k.to_vec()).unwrap();
        let t = SpeciesTraits::with_ratios(d.to_vec(), p.to_vec()).unwrap();
        let g = build_grid(&l, &Resolution::Uniform(m)).unwrap();
        let u = solve_resident_steady(&l, &env, &t, &g, &SteadyConfig::default()).unwrap();
        (u, env, t)
    }

    #[test]
    fn single_patch_is_capacity() {
        let (u, _, _) = solve(&[2.0], &[1.7], &[0.4], &[3.0], &[], 16);
        for &v in u.values() {
            assert!((v - 1.7).abs() < 1e-14);
        }
    }

    #[test]
    fn ifd_jump_gives_capacity_profile() {
        let (u, _, _) = solve(&[1.0, 0.5, 2.0], &[1.0, 2.0, 4.0], &[1.0, 2.0, 0.5], &[1.0, 0.3, 2.0], &[2.0, 2.0], 20);
        for i in 0..3 {
            let k = [1.0, 2.0, 4.0][i];
            for &v in u.patch(i) {
                assert!((v - k).abs() <= 1e-12 * k);
            }
        }
    }

    #[test]
    fn two_patch_large_jump_profile() {
        let (u, env, t) = solve(&[1.0, 1.0], &[1.0, 1.0], &[1.0, 1.0], &[1.0, 1.0], &[2.0], 100);
        assert!(u.patch(0)[0] < 1.0);
        assert!(*u.patch(1).last().unwrap() > 1.0);
        let rep = monotonicity_report(&u, &env, &t).unwrap();
        assert_eq!(rep.overall(), Trend::StrictlyDecreasing);
        assert_eq!(rep.consistent(), Some(true));
        assert!(u.is_jump_consistent(&[2.0], 1e-12));
        assert!(u.min() > 0.0);
    }

    #[test]
    fn small_jump_increasing() {
        let (u, env, t) = solve(&[1.0, 1.0], &[1.0, 3.0], &[1.0, 1.0], &[1.0, 1.0], &[1.5], 80);
        let rep = monotonicity_report(&u, &env, &t).unwrap();
        assert_eq!(rep.expected, Some(Trend::StrictlyIncreasing));
        assert_eq!(rep.consistent(), Some(true));
    }

    #[test]
    fn three_patch_non_monotone_example() {
        let (u, env, t) = solve(&[1.0, 1.0, 1.0], &[1.0, 2.0, 1.0], &[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0], &[3.0, 1.0 / 3.0], 100);
        let rep = monotonicity_report(&u, &env, &t).unwrap();
        assert_eq!(rep.expected, None);
        assert_eq!(rep.consistent(), None);
        assert!(!rep.is_monotone());
        assert_eq!(rep.patches[0], Trend::StrictlyDecreasing);
        assert_eq!(rep.patches[1], Trend::Mixed);
        assert_eq!(rep.patches[2], Trend::StrictlyIncreasing);
        assert_eq!(rep.turning_points.len(), 1);
        let (patch, x) = rep.turning_points[0];
        assert_eq!(patch, 1);
        assert!(x > 1.0 && x < 2.0);
    }

    #[test]
    fn fallback_march_reaches_the_same_state() {
        let l = Landscape::from_lengths(&[1.0, 1.0]).unwrap();
        let env = PatchEnvironment::new(vec![1.0, 2.0], vec![1.0, 2.0]).unwrap();
        let t = SpeciesTraits::with_ratios(vec![1.0, 0.5], vec![3.0]).unwrap();
        let g = build_grid(&l, &Resolution::Uniform(40)).unwrap();
        let newton = solve_resident_steady_detailed(&l, &env, &t, &g, &SteadyConfig::default()).unwrap();
        assert!(!newton.used_fallback);
        let cfg = SteadyConfig {
            max_newton_iters: 1,
            newton_tol: 1e-9,
            ..SteadyConfig::default()
        };
        let op = assemble_diffusion(&g, &t).unwrap();
        let prob = LogisticProblem::new(op, &env).unwrap();
        let start = vec![0.05; g.reduced_dofs()];
        let march = solve_steady_from(&prob, start, &cfg).unwrap();
        assert!(march.used_fallback);
        assert!(newton.field.max_abs_diff(&march.field).unwrap() < 1e-7);
    }

    #[test]
    fn f32_ifd_fixed_point() {
        let l = Landscape::<f32>::from_lengths(&[1.0, 1.0]).unwrap();
        let env = PatchEnvironment::new(vec![1.0f32, 1.0], vec![1.0, 3.0]).unwrap();
        let t = SpeciesTraits::with_ratios(vec![1.0f32, 1.0], vec![3.0]).unwrap();
        let g = build_grid(&l, &Resolution::Uniform(10)).unwrap();
        let cfg = SteadyConfig::<f32> {
            newton_tol: 1e-3,
            ..SteadyConfig::default()
        };
        let u = solve_resident_steady(&l, &env, &t, &g, &cfg).unwrap();
        assert!((u.patch(1)[3] - 3.0).abs() < 1e-4);
    }
}
