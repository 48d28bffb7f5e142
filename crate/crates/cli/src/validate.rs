//! Property and identity checks on the configured instance.

use patchcomp_core::dynamics::CompetitionSystem;
use patchcomp_core::eigen::fitness_against;
use patchcomp_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::commands::Context;
use crate::config::Resolved;
use crate::failure::Failure;

pub enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

pub struct Check {
    pub name: &'static str,
    pub outcome: Outcome,
}

fn check(name: &'static str, result: Result<Outcome, Failure>) -> Check {
    let outcome = result.unwrap_or_else(|e| Outcome::Fail(e.to_string()));
    Check { name, outcome }
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn refined(r: &Resolved) -> Result<Grid64, Failure> {
    let counts: Vec<usize> = r.grid.counts().iter().map(|c| 2 * c).collect();
    Ok(build_grid(&r.landscape, &Resolution::PerPatch(counts))?)
}

fn steady_checks(r: &Resolved) -> Result<Outcome, Failure> {
    let u = solve_resident_steady(&r.landscape, &r.env, &r.resident, &r.grid, &r.steady)?;
    let cum = r.resident.p.cumulative();
    let level = (0..r.env.n()).map(|j| r.env.k[j] / cum[j]).fold(0.0, f64::max);
    let boxed = (0..r.env.n()).all(|i| u.patch(i).iter().all(|&x| x <= level * cum[i] * (1.0 + 1e-9)));
    let ok = u.min() > 0.0 && u.is_jump_consistent(r.resident.p.as_slice(), 1e-12) && boxed;
    Ok(verdict(ok, format!("min {:.4e}, max {:.4e}, jump-consistent and bounded: {ok}", u.min(), u.max())))
}

fn monotonicity(r: &Resolved) -> Result<Outcome, Failure> {
    let u = solve_resident_steady(&r.landscape, &r.env, &r.resident, &r.grid, &r.steady)?;
    let rep = monotonicity_report(&u, &r.env, &r.resident)?;
    Ok(match rep.consistent() {
        None => Outcome::Skip(format!("no predicted trend; observed {:?}", rep.overall())),
        Some(ok) => verdict(ok, format!("expected {:?}, observed {:?}", rep.expected, rep.overall())),
    })
}

fn transform_oracle(r: &Resolved) -> Result<Outcome, Failure> {
    let tp = to_transformed(&r.landscape, &r.env, &r.resident)?;
    let mut gaps = Vec::new();
    for g in [r.grid.clone(), refined(r)?] {
        let direct = solve_resident_steady(&r.landscape, &r.env, &r.resident, &g, &r.steady)?;
        let w = solve_steady_finite_volume(&tp, g.counts(), &r.steady)?;
        let oracle = pull_back(&w, &tp)?;
        gaps.push(direct.max_abs_diff(&oracle)? / direct.max());
    }
    let ok = gaps[1] <= gaps[0] || gaps[1] <= 1e-12;
    Ok(verdict(ok, format!("relative gap {:.3e} then {:.3e} after refinement", gaps[0], gaps[1])))
}

fn eigen_identity(r: &Resolved, mutant: &SpeciesTraits64) -> Result<Outcome, Failure> {
    let mut rel = Vec::new();
    let mut lambda = 0.0;
    for g in [r.grid.clone(), refined(r)?] {
        let u = solve_resident_steady(&r.landscape, &r.env, &r.resident, &g, &r.steady)?;
        let eig = fitness_against(&u, &r.env, mutant, &r.eigen)?;
        lambda = eig.lambda1;
        rel.push(fitness_identity_residual(&u, &eig, &r.env, &r.resident, mutant, &g)?.relative);
    }
    let ok = rel[1] <= rel[0] / 2.0 || rel[1] <= 1e-12;
    Ok(verdict(ok, format!("λ1 = {lambda:.6e}; relative residual {:.3e} then {:.3e}", rel[0], rel[1])))
}

fn neutrality(r: &Resolved, rng: &mut ChaCha8Rng) -> Result<Outcome, Failure> {
    if r.env.n() < 2 {
        return Ok(Outcome::Skip("single patch".into()));
    }
    let kbar = ifd_strategy(&r.env)?;
    let ifd = SpeciesTraits::with_ratios(r.resident.d.clone(), kbar.as_slice().to_vec())?;
    let u = solve_resident_steady(&r.landscape, &r.env, &ifd, &r.grid, &r.steady)?;
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let n = r.env.n();
        let p: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(0.2..5.0)).collect();
        let d: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..5.0)).collect();
        let m = SpeciesTraits::with_ratios(d, p)?;
        worst = worst.max(fitness_against(&u, &r.env, &m, &r.eigen)?.lambda1.abs());
    }
    Ok(verdict(worst <= 1e-10, format!("max |λ1| {worst:.2e} over 5 random mutants at the ideal-free resident")))
}

fn order(r: &Resolved, rng: &mut ChaCha8Rng) -> Result<Outcome, Failure> {
    let model = r.model()?;
    let sys = CompetitionSystem::new(&model, &r.grid)?;
    let g = sys.grid();
    let n = g.reduced_dofs();
    let scale = |rng: &mut ChaCha8Rng, r: usize| rng.gen_range(0.0..2.0) * model.env.k[g.reduced_owner(r)];
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let b = SimState {
            t: 0.0,
            u: (0..n).map(|i| scale(rng, i)).collect(),
            v: (0..n).map(|i| scale(rng, i)).collect(),
        };
        let a = SimState {
            t: 0.0,
            u: b.u.iter().map(|&x| x + rng.gen_range(0.0..0.5)).collect(),
            v: b.v.iter().map(|&x| x * rng.gen_range(0.0..1.0)).collect(),
        };
        let c = order_preservation_check(&a, &b, &sys, &r.sim, 1000)?;
        if !c.preserved {
            return Ok(Outcome::Fail(format!("violation {:.3e} at {:?}", c.max_violation, c.first_violation)));
        }
        worst = worst.max(c.max_violation);
    }
    Ok(Outcome::Pass(format!("5 ordered pairs x 1000 steps, max violation {worst:.2e}")))
}

struct Dynamics {
    record: OutcomeRecord64,
    system: CompetitionSystem<f64>,
}

fn run_dynamics(r: &Resolved) -> Result<Dynamics, Failure> {
    let model = r.model()?;
    let system = CompetitionSystem::new(&model, &r.grid)?;
    let record = simulate(&system, SimState::half_capacity(&system), &r.sim)?;
    Ok(Dynamics { record, system })
}

fn agreement(r: &Resolved) -> Result<Outcome, Failure> {
    let cv = cross_validate(&r.model()?, &r.grid, &r.sim, &r.eigen)?;
    let detail = format!(
        "region {}, λ1 = {:.4e}, simulated {}, {}",
        cv.prediction.region,
        cv.lambda1,
        cv.verdict.map_or("-", |v| v.as_str()),
        cv.agreement.as_str()
    );
    Ok(verdict(cv.agreement != patchcomp_core::invasion::Agreement::Contradiction, detail))
}

fn coexistence(r: &Resolved, dynamics: &Dynamics) -> Result<Outcome, Failure> {
    let rec = &dynamics.record;
    if rec.verdict != Verdict::Coexistence {
        return Ok(Outcome::Skip(format!("simulation ended in {}", rec.verdict)));
    }
    let g = dynamics.system.grid();
    let (start, end) = (g.boundaries()[0], g.boundaries()[g.n()]);
    let h = g.max_spacing();
    let tol = 10.0 * r.sim.steady_tol;
    let res = coexistence_identity_residual(&rec.u, &rec.v, &r.env, &r.resident, &dynamics.system.mutant, g, start, end, tol)?;
    let mut worst: f64 = 0.0;
    for x in [res.u_form, res.v_form, Some(res.cross)].into_iter().flatten() {
        worst = worst.max((x.lhs - x.rhs).abs());
    }
    let bound = 0.5 * h * h + tol;
    Ok(verdict(worst <= bound, format!("absolute residual {worst:.3e}, bound {bound:.3e}")))
}

fn boundedness(dynamics: &Dynamics) -> Outcome {
    let ratio = dynamics.record.diagnostics.max_box_ratio;
    verdict(ratio <= 1.0 + 1e-12, format!("max density/box ratio {ratio:.6}"))
}

pub fn run(ctx: &Context, seed: u64) -> Vec<Check> {
    let r = &ctx.resolved;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = vec![
        check("steady-state", steady_checks(r)),
        check("monotonicity", monotonicity(r)),
        check("transform-oracle", transform_oracle(r)),
        check("ifd-neutrality", neutrality(r, &mut rng)),
    ];
    let Some(mutant) = r.mutant.clone() else {
        checks.push(Check {
            name: "two-species",
            outcome: Outcome::Skip("no mutant configured".into()),
        });
        return checks;
    };
    checks.push(check("eigen-identity", eigen_identity(r, &mutant)));
    checks.push(check("order-preservation", order(r, &mut rng)));
    checks.push(check("prediction-agreement", agreement(r)));
    match run_dynamics(r) {
        Ok(d) => {
            checks.push(check("coexistence-identity", coexistence(r, &d)));
            checks.push(Check {
                name: "boundedness",
                outcome: boundedness(&d),
            });
        }
        Err(e) => checks.push(Check {
            name: "simulation",
            outcome: Outcome::Fail(e.to_string()),
        }),
    }
    checks
}
