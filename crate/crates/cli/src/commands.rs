use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use patchcomp_core::dynamics::{simulate_observed, CompetitionSystem};
use patchcomp_core::eigen::{assemble_linearization, fitness_against, principal_eigenpair_with};
use patchcomp_core::grid::fmt_num;
use patchcomp_core::invasion::Prediction;
use patchcomp_core::steady::solve_resident_steady_detailed;
use patchcomp_core::*;
use rayon::prelude::*;

use crate::config::{Resolved, RunConfig, ScanRange};
use crate::failure::Failure;

pub struct Context {
    pub config: RunConfig,
    pub resolved: Resolved,
    pub out: PathBuf,
}

impl Context {
    fn create(&self, name: &str) -> Result<BufWriter<File>, Failure> {
        fs::create_dir_all(&self.out)?;
        Ok(BufWriter::new(File::create(self.out.join(name))?))
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(|&v| fmt_num(v)).collect::<Vec<_>>().join(";")
}

fn resident_state(ctx: &Context) -> Result<Field64, Failure> {
    let r = &ctx.resolved;
    Ok(solve_resident_steady(&r.landscape, &r.env, &r.resident, &r.grid, &r.steady)?)
}

pub fn steady(ctx: &Context) -> Result<String, Failure> {
    let r = &ctx.resolved;
    let sol = solve_resident_steady_detailed(&r.landscape, &r.env, &r.resident, &r.grid, &r.steady)?;
    let mut w = ctx.create("steady.csv")?;
    sol.field.write_csv(&mut w)?;
    w.flush()?;
    let report = monotonicity_report(&sol.field, &r.env, &r.resident)?;
    let mut w = ctx.create("monotonicity.csv")?;
    writeln!(w, "scope,index,value")?;
    writeln!(w, "overall,,{:?}", report.overall())?;
    writeln!(w, "expected,,{}", report.expected.map_or("none".to_string(), |t| format!("{t:?}")))?;
    writeln!(w, "consistent,,{}", report.consistent().map_or("n/a".to_string(), |c| c.to_string()))?;
    for (i, t) in report.patches.iter().enumerate() {
        writeln!(w, "patch,{i},{t:?}")?;
    }
    for (i, (l, rr)) in report.interfaces.iter().enumerate() {
        writeln!(w, "interface,{i},{l:?}/{rr:?}")?;
    }
    writeln!(w, "left_end,0,{:?}", report.left_end)?;
    writeln!(w, "right_end,{},{:?}", r.landscape.n() - 1, report.right_end)?;
    for (patch, x) in &report.turning_points {
        writeln!(w, "turning_point,{patch},{}", fmt_num(*x))?;
    }
    w.flush()?;
    Ok(format!(
        "steady state: max {:.6}, min {:.6}, scaled residual {:.2e}{}; profile {:?}",
        sol.field.max(),
        sol.field.min(),
        sol.scaled_residual,
        if sol.used_fallback { " (time-march fallback)" } else { "" },
        report.overall()
    ))
}

/// Principal eigenpair of the resident's own linearization at its steady state.
pub fn eigen(ctx: &Context) -> Result<String, Failure> {
    let r = &ctx.resolved;
    let u = resident_state(ctx)?;
    let potential = u.map(|i, _, v| r.env.r[i] * (1.0 - 2.0 * v / r.env.k[i]));
    let op = assemble_linearization(&r.grid, &r.resident, &potential)?;
    let pair = principal_eigenpair_with(&op, &r.eigen)?;
    let mut w = ctx.create("eigen.csv")?;
    pair.write_csv(&mut w)?;
    w.flush()?;
    Ok(format!("lambda1 = {} ({:?})", fmt_num(pair.lambda1), pair.stability(r.eigen.sign_tol)))
}

/// Invasion fitness of the mutant against the resident's steady state.
pub fn fitness(ctx: &Context) -> Result<String, Failure> {
    let r = &ctx.resolved;
    let mutant = ctx.resolved.model()?.mutant;
    let u = resident_state(ctx)?;
    let pair = fitness_against(&u, &r.env, &mutant, &r.eigen)?;
    let mut w = ctx.create("fitness.csv")?;
    pair.write_csv(&mut w)?;
    w.flush()?;
    Ok(format!("lambda1 = {} ({:?})", fmt_num(pair.lambda1), pair.stability(r.eigen.sign_tol)))
}

pub fn simulate(ctx: &Context) -> Result<String, Failure> {
    let r = &ctx.resolved;
    let model = r.model()?;
    let system = CompetitionSystem::new(&model, &r.grid)?;
    let stride = ctx.config.sim.trajectory_stride;
    let mut trajectory = Vec::new();
    if stride.is_some() {
        writeln!(trajectory, "t,patch_index,x,u,v")?;
    }
    let record = simulate_observed(&system, SimState::half_capacity(&system), &r.sim, stride, |s| {
        s.write_snapshot(&system, &mut trajectory)
    })?;
    if stride.is_some() {
        ctx.create("trajectory.csv")?.write_all(&trajectory)?;
    }
    let d = &record.diagnostics;
    let mut w = ctx.create("outcome.csv")?;
    writeln!(
        w,
        "verdict,time,converged,steps,dt,scheme,time_derivative,steady_residual,u_max,v_max,max_box_ratio,max_clipped,dist_resident_state,dist_mutant_state,note"
    )?;
    writeln!(
        w,
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        record.verdict,
        fmt_num(record.time),
        record.converged,
        d.steps,
        fmt_num(d.dt),
        d.scheme.as_str(),
        fmt_num(d.time_derivative),
        fmt_num(d.steady_residual),
        fmt_num(d.u_max),
        fmt_num(d.v_max),
        fmt_num(d.max_box_ratio),
        fmt_num(d.max_clipped),
        fmt_num(d.dist_resident_state),
        fmt_num(d.dist_mutant_state),
        d.note.as_deref().unwrap_or("").replace(',', ";")
    )?;
    w.flush()?;
    let mut w = ctx.create("final_state.csv")?;
    writeln!(w, "t,patch_index,x,u,v")?;
    record.final_state.write_snapshot(&system, &mut w)?;
    w.flush()?;
    Ok(format!("{} at t = {:.3} after {} steps", record.verdict, record.time, d.steps))
}

pub fn classify(ctx: &Context) -> Result<String, Failure> {
    let r = &ctx.resolved;
    let model = r.model()?;
    let prediction = predict_outcome(
        model.resident.p.as_slice(),
        model.mutant.p.as_slice(),
        &model.resident.d,
        &model.mutant.d,
        &model.env,
    )?;
    let mut w = ctx.create("classify.csv")?;
    writeln!(w, "{}", Prediction::CSV_HEADER)?;
    writeln!(w, "{}", prediction.csv_row())?;
    w.flush()?;
    Ok(prediction.csv_row())
}

fn default_scan(kbar: f64) -> ScanRange {
    ScanRange {
        min: 0.5 * kbar,
        max: 2.0 * kbar,
        count: 21,
    }
}

pub fn pip(ctx: &Context) -> Result<String, Failure> {
    let r = &ctx.resolved;
    let model = r.model()?;
    let setup = TwoPatchSetup::from_model(&model, r.grid.clone(), r.eigen.clone())?;
    let kbar = setup.kbar();
    let (res, mutant) = match &ctx.config.pip {
        Some(p) => (p.resident.values(), p.mutant.values()),
        None => (default_scan(kbar).values(), default_scan(kbar).values()),
    };
    let grid = patchcomp_core::pip(&setup, &res, &mutant)?;
    let mut w = ctx.create("pip.csv")?;
    grid.write_csv(&mut w)?;
    w.flush()?;
    let mut w = ctx.create("pip_sign.csv")?;
    grid.write_sign_csv(&mut w)?;
    w.flush()?;
    Ok(format!("{} x {} invasibility grid around k̄ = {kbar}", res.len(), mutant.len()))
}

struct SweepRow {
    prediction: Prediction,
    lambda1: Option<f64>,
}

pub fn sweep(ctx: &Context) -> Result<String, Failure> {
    let r = &ctx.resolved;
    let sweep = ctx
        .config
        .sweep
        .as_ref()
        .ok_or_else(|| Failure::validation("sweep", "section required by this command"))?;
    let mutant_d = r.model()?.mutant.d;
    let points: Vec<(usize, &Vec<f64>, &Vec<f64>)> = sweep
        .resident_p
        .iter()
        .flat_map(|p| sweep.mutant_p.iter().map(move |q| (p, q)))
        .enumerate()
        .map(|(i, (p, q))| (i, p, q))
        .collect();
    let rows: Vec<SweepRow> = points
        .par_iter()
        .map(|&(_, p, q)| -> Result<SweepRow, Failure> {
            let prediction = predict_outcome(p, q, &r.resident.d, &mutant_d, &r.env)?;
            let lambda1 = if sweep.fitness {
                let res = SpeciesTraits::with_ratios(r.resident.d.clone(), p.clone())?;
                let mutant = SpeciesTraits::with_ratios(mutant_d.clone(), q.clone())?;
                let u = solve_resident_steady(&r.landscape, &r.env, &res, &r.grid, &r.steady)?;
                Some(fitness_against(&u, &r.env, &mutant, &r.eigen)?.lambda1)
            } else {
                None
            };
            Ok(SweepRow { prediction, lambda1 })
        })
        .collect::<Result<_, _>>()?;
    let mut w = ctx.create("sweep.csv")?;
    writeln!(w, "index,resident_p,mutant_p,{},lambda1", Prediction::CSV_HEADER)?;
    for ((i, p, q), row) in points.iter().zip(&rows) {
        writeln!(
            w,
            "{i},{},{},{},{}",
            join(p),
            join(q),
            row.prediction.csv_row(),
            row.lambda1.map(fmt_num).unwrap_or_default()
        )?;
    }
    w.flush()?;
    Ok(format!("{} sweep points", rows.len()))
}

