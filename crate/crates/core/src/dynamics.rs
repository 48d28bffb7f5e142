//! Time integration of the two-species competition system.
//!
//! Diffusion is implicit (one prefactored tridiagonal solve per species and
//! step), the logistic competition reaction `r w (1 - (u + v)/k)` explicit.
//! States are stored as reduced vectors, so jump consistency holds by
//! construction.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::grid::{fmt_num, Grid, PiecewiseField};
use crate::landscape::{CompetitionModel, PatchEnvironment, SpeciesTraits};
use crate::operator::{assemble_diffusion, LinearOperator, ThomasFactor};
use crate::scalar::{max_abs, Scalar};
use crate::steady::{solve_resident_steady, SteadyConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    ImexEuler,
    CrankNicolson,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::ImexEuler => "imex-euler",
            Scheme::CrankNicolson => "crank-nicolson",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig<T> {
    pub dt: T,
    pub t_max: T,
    /// Sup norm of the discrete time derivative below which a run stops.
    pub steady_tol: T,
    /// Densities below this count as extinct.
    pub extinction_eps: T,
    pub scheme: Scheme,
    /// Steps between bounding-box checks.
    pub check_every: usize,
    /// Multiplies `max k` in the semi-trivial match tolerance.
    pub match_scale: T,
    /// A species whose maximum is between `extinction_eps` and
    /// `persistence_floor * min k` is neither extinct nor persisting.
    pub persistence_floor: T,
}

impl<T: Scalar> SimConfig<T> {
    /// Defaults scaled to the environment: `dt = 0.01 min 1/r_i`,
    /// `extinction_eps = 1e-6 min k`.
    pub fn for_environment(env: &PatchEnvironment<T>) -> Self {
        let rmax = env.r.iter().fold(T::zero(), |m, &x| m.max(x));
        Self {
            dt: T::lit(0.01) / rmax,
            t_max: T::lit(2000.0),
            steady_tol: T::lit(1e-8),
            extinction_eps: T::lit(1e-6) * env.min_k(),
            scheme: Scheme::ImexEuler,
            check_every: 100,
            match_scale: T::lit(1e4),
            persistence_floor: T::lit(1e-3),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(Error::validation("sim.dt", "must be positive"));
        }
        if !(self.t_max > T::zero()) {
            return Err(Error::validation("sim.t_max", "must be positive"));
        }
        if !(self.extinction_eps > T::zero()) {
            return Err(Error::validation("sim.extinction_eps", "must be positive"));
        }
        if !(self.steady_tol > T::zero()) {
            return Err(Error::validation("sim.steady_tol", "must be positive"));
        }
        if self.check_every == 0 {
            return Err(Error::validation("sim.check_every", "must be at least 1"));
        }
        Ok(())
    }
}

/// Operators and nodal coefficients of one competition problem on a grid.
#[derive(Debug, Clone)]
pub struct CompetitionSystem<T> {
    pub u_op: LinearOperator<T>,
    pub v_op: LinearOperator<T>,
    pub env: PatchEnvironment<T>,
    pub resident: SpeciesTraits<T>,
    pub mutant: SpeciesTraits<T>,
    r: Vec<T>,
    k: Vec<T>,
}

impl<T: Scalar> CompetitionSystem<T> {
    pub fn new(model: &CompetitionModel<T>, grid: &Grid<T>) -> Result<Self> {
        if grid.boundaries() != model.landscape.boundaries() {
            return Err(Error::GridMismatch);
        }
        Self::from_parts(grid, &model.env, &model.resident, &model.mutant)
    }

    pub fn from_parts(
        grid: &Grid<T>,
        env: &PatchEnvironment<T>,
        resident: &SpeciesTraits<T>,
        mutant: &SpeciesTraits<T>,
    ) -> Result<Self> {
        Ok(Self {
            u_op: assemble_diffusion(grid, resident)?,
            v_op: assemble_diffusion(grid, mutant)?,
            r: PiecewiseField::piecewise_constant(grid, &env.r)?.into_values(),
            k: PiecewiseField::piecewise_constant(grid, &env.k)?.into_values(),
            env: env.clone(),
            resident: resident.clone(),
            mutant: mutant.clone(),
        })
    }

    pub fn grid(&self) -> &Grid<T> {
        self.u_op.grid()
    }

    /// Reduced reaction terms of both species.
    pub fn reaction(&self, u: &[T], v: &[T]) -> (Vec<T>, Vec<T>) {
        let uf = self.u_op.expand(u);
        let vf = self.v_op.expand(v);
        let mut fu = Vec::with_capacity(self.r.len());
        let mut fv = Vec::with_capacity(self.r.len());
        for a in 0..self.r.len() {
            let (ua, va) = (uf.values()[a], vf.values()[a]);
            let g = self.r[a] * (T::one() - (ua + va) / self.k[a]);
            fu.push(g * ua);
            fv.push(g * va);
        }
        (self.u_op.restrict(&fu), self.v_op.restrict(&fv))
    }

    /// Sup norm of the steady-state residual of the coupled system.
    pub fn residual_norm(&self, u: &[T], v: &[T]) -> T {
        let (fu, fv) = self.reaction(u, v);
        let ru: Vec<T> = self.u_op.apply(u).iter().zip(&fu).map(|(&a, &b)| a + b).collect();
        let rv: Vec<T> = self.v_op.apply(v).iter().zip(&fv).map(|(&a, &b)| a + b).collect();
        max_abs(&ru).max(max_abs(&rv))
    }

    /// Jump-consistent constant field `level * P_i` in reduced form.
    fn box_vector(&self, op: &LinearOperator<T>, level: T) -> Vec<T> {
        op.null_vector().into_iter().map(|c| c * level).collect()
    }

    /// Level `M` of the smallest box `M P_i` above both `k_i` and the data.
    fn box_level(&self, op: &LinearOperator<T>, state: &[T]) -> T {
        let null = op.null_vector();
        let grid = self.grid();
        let mut level = T::zero();
        for (r, &x) in state.iter().enumerate() {
            level = level.max(x / null[r]).max(self.env.k[grid.reduced_owner(r)] / null[r]);
        }
        level
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState<T> {
    pub t: T,
    /// Reduced values of the resident.
    pub u: Vec<T>,
    /// Reduced values of the mutant.
    pub v: Vec<T>,
}

impl<T: Scalar> SimState<T> {
    /// From full fields; both must be jump-consistent for their species.
    pub fn from_fields(system: &CompetitionSystem<T>, u: &PiecewiseField<T>, v: &PiecewiseField<T>) -> Result<Self> {
        let tol = T::lit(1e-10);
        if u.grid() != system.grid() || v.grid() != system.grid() {
            return Err(Error::GridMismatch);
        }
        if !u.is_jump_consistent(system.resident.p.as_slice(), tol) {
            return Err(Error::validation("initial.u", "not jump-consistent for the resident"));
        }
        if !v.is_jump_consistent(system.mutant.p.as_slice(), tol) {
            return Err(Error::validation("initial.v", "not jump-consistent for the mutant"));
        }
        if u.min() < T::zero() || v.min() < T::zero() {
            return Err(Error::validation("initial", "densities must be nonnegative"));
        }
        Ok(Self {
            t: T::zero(),
            u: u.to_reduced(),
            v: v.to_reduced(),
        })
    }

    /// `u = v = k_i / 2` at every reduced value owned by patch `i`.
    pub fn half_capacity(system: &CompetitionSystem<T>) -> Self {
        let grid = system.grid();
        let half = T::lit(0.5);
        let x: Vec<T> = (0..grid.reduced_dofs())
            .map(|r| half * system.env.k[grid.reduced_owner(r)])
            .collect();
        Self {
            t: T::zero(),
            u: x.clone(),
            v: x,
        }
    }

    pub fn u_field(&self, system: &CompetitionSystem<T>) -> PiecewiseField<T> {
        system.u_op.expand(&self.u)
    }

    pub fn v_field(&self, system: &CompetitionSystem<T>) -> PiecewiseField<T> {
        system.v_op.expand(&self.v)
    }

    /// Appends `t,patch_index,x,u,v` rows.
    pub fn write_snapshot<W: Write>(&self, system: &CompetitionSystem<T>, mut w: W) -> io::Result<()> {
        let u = self.u_field(system);
        let v = self.v_field(system);
        for ((i, x), (&uu, &vv)) in system.grid().nodes().into_iter().zip(u.values().iter().zip(v.values())) {
            writeln!(w, "{},{},{},{},{}", fmt_num(self.t), i, fmt_num(x), fmt_num(uu), fmt_num(vv))?;
        }
        Ok(())
    }
}

/// Prefactored time stepper.
#[derive(Debug, Clone)]
pub struct Stepper<'a, T> {
    system: &'a CompetitionSystem<T>,
    dt: T,
    scheme: Scheme,
    u_factor: ThomasFactor<T>,
    v_factor: ThomasFactor<T>,
}

/// One step's result.
#[derive(Debug, Clone)]
pub struct StepOutput<T> {
    pub state: SimState<T>,
    /// Largest magnitude removed by clipping negative values.
    pub clipped: T,
}

impl<'a, T: Scalar> Stepper<'a, T> {
    pub fn new(system: &'a CompetitionSystem<T>, dt: T, scheme: Scheme) -> Result<Self> {
        let implicit = match scheme {
            Scheme::ImexEuler => dt,
            Scheme::CrankNicolson => dt * T::lit(0.5),
        };
        Ok(Self {
            system,
            dt,
            scheme,
            u_factor: system.u_op.matrix().shifted(T::one(), -implicit).factor()?,
            v_factor: system.v_op.matrix().shifted(T::one(), -implicit).factor()?,
        })
    }

    pub fn step(&self, state: &SimState<T>) -> StepOutput<T> {
        let (fu, fv) = self.system.reaction(&state.u, &state.v);
        let half = T::lit(0.5);
        let mut clipped = T::zero();
        let mut advance = |x: &[T], f: &[T], op: &LinearOperator<T>, factor: &ThomasFactor<T>| {
            let mut rhs: Vec<T> = match self.scheme {
                Scheme::ImexEuler => x.iter().zip(f).map(|(&a, &b)| a + self.dt * b).collect(),
                Scheme::CrankNicolson => {
                    let ax = op.apply(x);
                    (0..x.len()).map(|i| x[i] + self.dt * (half * ax[i] + f[i])).collect()
                }
            };
            factor.solve_in_place(&mut rhs);
            for y in &mut rhs {
                if *y < T::zero() {
                    clipped = clipped.max(-*y);
                    *y = T::zero();
                }
            }
            rhs
        };
        let u = advance(&state.u, &fu, &self.system.u_op, &self.u_factor);
        let v = advance(&state.v, &fv, &self.system.v_op, &self.v_factor);
        StepOutput {
            state: SimState {
                t: state.t + self.dt,
                u,
                v,
            },
            clipped,
        }
    }
}

/// Single step without reusing factorizations.
pub fn step<T: Scalar>(state: &SimState<T>, dt: T, system: &CompetitionSystem<T>, scheme: Scheme) -> Result<StepOutput<T>> {
    Ok(Stepper::new(system, dt, scheme)?.step(state))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    ResidentWins,
    MutantWins,
    Coexistence,
    Undetermined,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::ResidentWins => "ResidentWins",
            Verdict::MutantWins => "MutantWins",
            Verdict::Coexistence => "Coexistence",
            Verdict::Undetermined => "Undetermined",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics<T> {
    pub dt: T,
    pub t_max: T,
    pub steady_tol: T,
    pub extinction_eps: T,
    pub scheme: Scheme,
    pub steps: usize,
    /// Sup norm of the last discrete time derivative.
    pub time_derivative: T,
    /// Sup norm of the coupled steady residual at the final state.
    pub steady_residual: T,
    pub max_clipped: T,
    pub box_u: T,
    pub box_v: T,
    /// Largest ratio of a density to its box value seen at the checks.
    pub max_box_ratio: T,
    pub u_max: T,
    pub v_max: T,
    /// Distances of the final state from the semi-trivial states.
    pub dist_resident_state: T,
    pub dist_mutant_state: T,
    pub note: Option<String>,
}

#[derive(Debug, Clone)]
pub struct OutcomeRecord<T> {
    pub verdict: Verdict,
    pub final_state: SimState<T>,
    pub u: PiecewiseField<T>,
    pub v: PiecewiseField<T>,
    /// Time at which the run stopped.
    pub time: T,
    pub converged: bool,
    pub diagnostics: Diagnostics<T>,
}

/// Long-time verdict from a final state and the two semi-trivial states.
pub fn classify_outcome<T: Scalar>(
    u: &PiecewiseField<T>,
    v: &PiecewiseField<T>,
    semi_trivials: (&PiecewiseField<T>, &PiecewiseField<T>),
    steady_residual: T,
    env: &PatchEnvironment<T>,
    config: &SimConfig<T>,
) -> Result<Verdict> {
    let (ustar, vstar) = semi_trivials;
    let match_tol = T::lit(10.0) * config.steady_tol * config.match_scale * env.max_k();
    let floor = config.persistence_floor * env.min_k();
    let (umax, vmax) = (u.max(), v.max());
    if vmax < config.extinction_eps && u.max_abs_diff(ustar)? < match_tol {
        return Ok(Verdict::ResidentWins);
    }
    if umax < config.extinction_eps && v.max_abs_diff(vstar)? < match_tol {
        return Ok(Verdict::MutantWins);
    }
    if umax >= floor && vmax >= floor && steady_residual < config.steady_tol {
        return Ok(Verdict::Coexistence);
    }
    Ok(Verdict::Undetermined)
}

/// Each species is either extinct or clearly persisting.
fn resolved<T: Scalar>(umax: T, vmax: T, eps: T, floor: T) -> bool {
    (umax < eps || umax >= floor) && (vmax < eps || vmax >= floor)
}

/// Integrates until the time derivative falls below `steady_tol` with both
/// species resolved, or until `t_max`.
pub fn simulate<T: Scalar>(system: &CompetitionSystem<T>, initial: SimState<T>, config: &SimConfig<T>) -> Result<OutcomeRecord<T>> {
    simulate_observed(system, initial, config, None, |_| Ok(()))
}

/// As [`simulate`], calling `observer` with every `stride`-th state.
pub fn simulate_observed<T: Scalar>(
    system: &CompetitionSystem<T>,
    initial: SimState<T>,
    config: &SimConfig<T>,
    stride: Option<usize>,
    mut observer: impl FnMut(&SimState<T>) -> io::Result<()>,
) -> Result<OutcomeRecord<T>> {
    config.validate()?;
    let stepper = Stepper::new(system, config.dt, config.scheme)?;
    let box_u = system.box_level(&system.u_op, &initial.u);
    let box_v = system.box_level(&system.v_op, &initial.v);
    let box_u_vec = system.box_vector(&system.u_op, box_u);
    let box_v_vec = system.box_vector(&system.v_op, box_v);
    let floor = config.persistence_floor * system.env.min_k();
    let max_steps = (config.t_max / config.dt).ceil().to_usize().unwrap_or(usize::MAX);

    let io_err = |e: io::Error| Error::validation("snapshot", e.to_string());
    let mut state = initial;
    let mut steps = 0;
    let mut max_clipped = T::zero();
    let mut max_box_ratio = T::zero();
    let mut time_derivative = T::infinity();
    let mut converged = false;
    if stride.is_some() {
        observer(&state).map_err(io_err)?;
    }
    while steps < max_steps {
        let out = stepper.step(&state);
        steps += 1;
        max_clipped = max_clipped.max(out.clipped);
        let mut dmax = T::zero();
        for (a, b) in out.state.u.iter().zip(&state.u).chain(out.state.v.iter().zip(&state.v)) {
            dmax = dmax.max((*a - *b).abs());
        }
        time_derivative = dmax / config.dt;
        state = out.state;

        if !time_derivative.is_finite() {
            return Err(Error::BlowUp {
                time: state.t.to_f64().unwrap_or(f64::NAN),
                value: f64::INFINITY,
                bound: 10.0 * box_u.max(box_v).to_f64().unwrap_or(f64::NAN),
            });
        }
        if steps % config.check_every == 0 {
            let ratio = box_ratio(&state.u, &box_u_vec).max(box_ratio(&state.v, &box_v_vec));
            max_box_ratio = max_box_ratio.max(ratio);
            if ratio > T::lit(10.0) {
                return Err(Error::BlowUp {
                    time: state.t.to_f64().unwrap_or(f64::NAN),
                    value: (ratio * box_u.max(box_v)).to_f64().unwrap_or(f64::NAN),
                    bound: 10.0 * box_u.max(box_v).to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        if let Some(s) = stride {
            if steps % s == 0 {
                observer(&state).map_err(io_err)?;
            }
        }
        if time_derivative < config.steady_tol {
            let umax = max_abs(&state.u);
            let vmax = max_abs(&state.v);
            if resolved(umax, vmax, config.extinction_eps, floor) {
                converged = true;
                break;
            }
        }
    }
    let ratio = box_ratio(&state.u, &box_u_vec).max(box_ratio(&state.v, &box_v_vec));
    max_box_ratio = max_box_ratio.max(ratio);

    let steady = SteadyConfig::default();
    let grid = system.grid();
    let landscape = crate::landscape::Landscape::new(grid.boundaries().to_vec())?;
    let ustar = solve_resident_steady(&landscape, &system.env, &system.resident, grid, &steady)?;
    let vstar = solve_resident_steady(&landscape, &system.env, &system.mutant, grid, &steady)?;
    let u = state.u_field(system);
    let v = state.v_field(system);
    let steady_residual = system.residual_norm(&state.u, &state.v);
    let verdict = classify_outcome(&u, &v, (&ustar, &vstar), steady_residual, &system.env, config)?;
    let note = (verdict == Verdict::Coexistence).then(|| {
        "coexistence state reached from the given initial data; other stable coexistence states may exist".to_string()
    });
    let diagnostics = Diagnostics {
        dt: config.dt,
        t_max: config.t_max,
        steady_tol: config.steady_tol,
        extinction_eps: config.extinction_eps,
        scheme: config.scheme,
        steps,
        time_derivative,
        steady_residual,
        max_clipped,
        box_u,
        box_v,
        max_box_ratio,
        u_max: u.max(),
        v_max: v.max(),
        dist_resident_state: u.max_abs_diff(&ustar)?.max(v.max()),
        dist_mutant_state: v.max_abs_diff(&vstar)?.max(u.max()),
        note,
    };
    Ok(OutcomeRecord {
        verdict,
        time: state.t,
        final_state: state,
        u,
        v,
        converged,
        diagnostics,
    })
}

fn box_ratio<T: Scalar>(x: &[T], bound: &[T]) -> T {
    x.iter().zip(bound).fold(T::zero(), |m, (&a, &b)| m.max(a / b))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderCheck<T> {
    pub preserved: bool,
    pub max_violation: T,
    /// Step index and size of the first violation.
    pub first_violation: Option<(usize, T)>,
}

/// Steps two states side by side and checks `u_A ≥ u_B`, `v_A ≤ v_B` after
/// every step with tolerance `1e-10 max k`.
pub fn order_preservation_check<T: Scalar>(
    a: &SimState<T>,
    b: &SimState<T>,
    system: &CompetitionSystem<T>,
    config: &SimConfig<T>,
    steps: usize,
) -> Result<OrderCheck<T>> {
    let stepper = Stepper::new(system, config.dt, config.scheme)?;
    let tol = T::lit(1e-10) * system.env.max_k();
    let (mut sa, mut sb) = (a.clone(), b.clone());
    let mut max_violation = T::zero();
    let mut first = None;
    for s in 1..=steps {
        sa = stepper.step(&sa).state;
        sb = stepper.step(&sb).state;
        let mut worst = T::zero();
        for r in 0..sa.u.len() {
            worst = worst.max(sb.u[r] - sa.u[r]).max(sa.v[r] - sb.v[r]);
        }
        max_violation = max_violation.max(worst);
        if worst > tol && first.is_none() {
            first = Some((s, worst));
        }
    }
    Ok(OrderCheck {
        preserved: first.is_none(),
        max_violation,
        first_violation: first,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Resolution};
    use crate::landscape::Landscape;

    fn system(k: &[f64], p: &[f64], phat: &[f64], m: usize) -> CompetitionSystem<f64> {
        let n = k.len();
        let l = Landscape::from_lengths(&vec![1.0; n]).unwrap();
        let model = CompetitionModel::new(
            l.clone(),
            PatchEnvironment::new(vec![1.0; n], k.to_vec()).unwrap(),
            SpeciesTraits::with_ratios(vec![1.0; n], p.to_vec()).unwrap(),
            SpeciesTraits::with_ratios(vec![1.0; n], phat.to_vec()).unwrap(),
        )
        .unwrap();
        CompetitionSystem::new(&model, &build_grid(&l, &Resolution::Uniform(m)).unwrap()).unwrap()
    }

    #[test]
    fn extinction_state_is_invariant() {
        let s = system(&[1.0, 2.0], &[3.0], &[0.5], 10);
        let zero = SimState {
            t: 0.0,
            u: vec![0.0; s.grid().reduced_dofs()],
            v: vec![0.0; s.grid().reduced_dofs()],
        };
        let out = step(&zero, 0.01, &s, Scheme::ImexEuler).unwrap();
        assert!(out.state.u.iter().chain(&out.state.v).all(|&x| x == 0.0));
    }

    #[test]
    fn capacity_is_a_fixed_point() {
        let s = system(&[1.3], &[], &[], 8);
        let st = SimState {
            t: 0.0,
            u: vec![1.3; s.grid().reduced_dofs()],
            v: vec![0.0; s.grid().reduced_dofs()],
        };
        for scheme in [Scheme::ImexEuler, Scheme::CrankNicolson] {
            let out = step(&st, 0.05, &s, scheme).unwrap();
            assert!(out.state.u.iter().all(|&x| (x - 1.3).abs() < 1e-15));
        }
    }

    #[test]
    fn ifd_split_is_a_fixed_point() {
        // both species at the IFD jump, u + v = k on every patch
        let s = system(&[1.0, 2.0], &[2.0], &[2.0], 8);
        let g = s.grid();
        let u: Vec<f64> = (0..g.reduced_dofs()).map(|r| 0.3 * [1.0, 2.0][g.reduced_owner(r)]).collect();
        let v: Vec<f64> = u.iter().map(|x| x * 7.0 / 3.0).collect();
        let st = SimState { t: 0.0, u: u.clone(), v: v.clone() };
        let out = step(&st, 0.01, &s, Scheme::ImexEuler).unwrap();
        for r in 0..u.len() {
            assert!((out.state.u[r] - u[r]).abs() < 1e-14);
            assert!((out.state.v[r] - v[r]).abs() < 1e-14);
        }
    }

    #[test]
    fn single_species_reaches_its_steady_state() {
        let s = system(&[1.0, 1.0], &[2.0], &[1.0], 20);
        let g = s.grid();
        let st = SimState {
            t: 0.0,
            u: vec![0.5; g.reduced_dofs()],
            v: vec![0.0; g.reduced_dofs()],
        };
        let cfg = SimConfig::for_environment(&s.env);
        let rec = simulate(&s, st, &cfg).unwrap();
        assert!(rec.converged);
        assert_eq!(rec.verdict, Verdict::ResidentWins);
        let l = Landscape::from_lengths(&[1.0, 1.0]).unwrap();
        let ustar = solve_resident_steady(&l, &s.env, &s.resident, g, &SteadyConfig::default()).unwrap();
        assert!(rec.u.max_abs_diff(&ustar).unwrap() < 10.0 * cfg.steady_tol);
    }

    #[test]
    fn classify_exact_states() {
        let s = system(&[1.0, 1.0], &[2.0], &[0.5], 20);
        let g = s.grid();
        let l = Landscape::from_lengths(&[1.0, 1.0]).unwrap();
        let ustar = solve_resident_steady(&l, &s.env, &s.resident, g, &SteadyConfig::default()).unwrap();
        let vstar = solve_resident_steady(&l, &s.env, &s.mutant, g, &SteadyConfig::default()).unwrap();
        let zero = PiecewiseField::zeros(g);
        let cfg = SimConfig::for_environment(&s.env);
        assert_eq!(classify_outcome(&ustar, &zero, (&ustar, &vstar), 0.0, &s.env, &cfg).unwrap(), Verdict::ResidentWins);
        assert_eq!(classify_outcome(&zero, &vstar, (&ustar, &vstar), 0.0, &s.env, &cfg).unwrap(), Verdict::MutantWins);
        let half = ustar.map(|_, _, x| 0.5 * x);
        assert_eq!(classify_outcome(&half, &half, (&ustar, &vstar), 1.0, &s.env, &cfg).unwrap(), Verdict::Undetermined);
    }

    #[test]
    fn ifd_opposite_coexistence() {
        // k̄ = 1 with p = 2 and p̂ = 0.5 on either side: both persist
        let s = system(&[1.0, 1.0], &[2.0], &[0.5], 20);
        let cfg = SimConfig::for_environment(&s.env);
        let rec = simulate(&s, SimState::half_capacity(&s), &cfg).unwrap();
        assert_eq!(rec.verdict, Verdict::Coexistence);
        assert!(rec.diagnostics.note.is_some());
        assert!(rec.diagnostics.steady_residual < cfg.steady_tol);
        assert!(rec.diagnostics.max_box_ratio <= 1.0 + 1e-12);
    }

    #[test]
    fn snapshot_rows() {
        let s = system(&[1.0], &[], &[], 4);
        let st = SimState::half_capacity(&s);
        let mut buf = Vec::new();
        st.write_snapshot(&s, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 5);
    }
}
