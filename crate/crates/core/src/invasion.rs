//! Region-based predictions, invasion-fitness scans and sampled strategy
//! certificates for the two-patch case.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::dynamics::{simulate, CompetitionSystem, SimConfig, SimState, Verdict};
use crate::eigen::{fitness_against, EigenConfig, Stability};
use crate::error::{Error, Result};
use crate::grid::{fmt_num, Grid, PiecewiseField};
use crate::landscape::{
    classify_region, ifd_strategy, CompetitionModel, Landscape, PatchEnvironment, RegionLabel,
    SpeciesTraits,
};
use crate::scalar::Scalar;
use crate::steady::solve_resident_steady;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InvadeWhenRare {
    Yes,
    No,
    Neutral,
    OutsideTheory,
}

impl InvadeWhenRare {
    pub fn as_str(self) -> &'static str {
        match self {
            InvadeWhenRare::Yes => "Yes",
            InvadeWhenRare::No => "No",
            InvadeWhenRare::Neutral => "Neutral",
            InvadeWhenRare::OutsideTheory => "OutsideTheory",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GlobalVerdict {
    ResidentWins,
    MutantWins,
    Coexistence,
    OutsideTheory,
}

impl GlobalVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            GlobalVerdict::ResidentWins => "ResidentWins",
            GlobalVerdict::MutantWins => "MutantWins",
            GlobalVerdict::Coexistence => "Coexistence",
            GlobalVerdict::OutsideTheory => "OutsideTheory",
        }
    }

    fn matches(self, v: Verdict) -> bool {
        matches!(
            (self, v),
            (GlobalVerdict::ResidentWins, Verdict::ResidentWins)
                | (GlobalVerdict::MutantWins, Verdict::MutantWins)
                | (GlobalVerdict::Coexistence, Verdict::Coexistence)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Prediction {
    pub invade_when_rare: InvadeWhenRare,
    pub global_verdict: GlobalVerdict,
    pub region: RegionLabel,
}

impl Prediction {
    pub const CSV_HEADER: &'static str = "region,invade,verdict";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{}",
            self.region.as_str(),
            self.invade_when_rare.as_str(),
            self.global_verdict.as_str()
        )
    }
}

/// Maps the region of `(p̂, d̂)` relative to `(p, d)` and the IFD strategy to
/// the invasion and long-time predictions that the region supports.
pub fn predict_outcome<T: Scalar>(
    p: &[T],
    p_hat: &[T],
    d: &[T],
    d_hat: &[T],
    env: &PatchEnvironment<T>,
) -> Result<Prediction> {
    use GlobalVerdict as G;
    use InvadeWhenRare as I;
    let kbar = ifd_strategy(env)?;
    let region = classify_region(p, p_hat, d, d_hat, kbar.as_slice())?;
    let (invade_when_rare, global_verdict) = match region {
        RegionLabel::L1 | RegionLabel::S1 => (I::Yes, G::OutsideTheory),
        RegionLabel::L1Star | RegionLabel::S1Star => (I::Yes, G::MutantWins),
        RegionLabel::L2 | RegionLabel::S2 => (I::No, G::ResidentWins),
        RegionLabel::L3 | RegionLabel::S3 => (I::Yes, G::Coexistence),
        RegionLabel::IfdResident => (I::Neutral, G::OutsideTheory),
        RegionLabel::Unclassified => (I::OutsideTheory, G::OutsideTheory),
    };
    Ok(Prediction {
        invade_when_rare,
        global_verdict,
        region,
    })
}

/// Stability of both semi-trivial states.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityTable<T> {
    /// `λ1` of the mutant against `(u*, 0)`.
    pub resident_state_lambda: T,
    pub resident_state: Stability,
    /// `λ1` of the resident against `(0, v*)`.
    pub mutant_state_lambda: T,
    pub mutant_state: Stability,
}

pub fn stability_table<T: Scalar>(model: &CompetitionModel<T>, grid: &Grid<T>, config: &EigenConfig<T>) -> Result<StabilityTable<T>> {
    let one = |resident: &SpeciesTraits<T>, mutant: &SpeciesTraits<T>| -> Result<T> {
        let ustar = solve_resident_steady(&model.landscape, &model.env, resident, grid, &config.steady)?;
        Ok(fitness_against(&ustar, &model.env, mutant, config)?.lambda1)
    };
    let a = one(&model.resident, &model.mutant)?;
    let b = one(&model.mutant, &model.resident)?;
    let classify = |l: T| {
        if l > config.sign_tol {
            Stability::Unstable
        } else if l < -config.sign_tol {
            Stability::Stable
        } else {
            Stability::Neutral
        }
    };
    Ok(StabilityTable {
        resident_state_lambda: a,
        resident_state: classify(a),
        mutant_state_lambda: b,
        mutant_state: classify(b),
    })
}

/// Two-patch setting in which strategies are the single jump ratio.
#[derive(Debug, Clone)]
pub struct TwoPatchSetup<T> {
    pub landscape: Landscape<T>,
    pub env: PatchEnvironment<T>,
    pub d: Vec<T>,
    pub d_hat: Vec<T>,
    pub grid: Grid<T>,
    pub config: EigenConfig<T>,
}

impl<T: Scalar> TwoPatchSetup<T> {
    pub fn new(
        landscape: Landscape<T>,
        env: PatchEnvironment<T>,
        d: Vec<T>,
        d_hat: Vec<T>,
        grid: Grid<T>,
        config: EigenConfig<T>,
    ) -> Result<Self> {
        if landscape.n() != 2 {
            return Err(Error::RequiresTwoPatches { n: landscape.n() });
        }
        if grid.boundaries() != landscape.boundaries() {
            return Err(Error::GridMismatch);
        }
        SpeciesTraits::with_ratios(d.clone(), vec![T::one()])?;
        SpeciesTraits::with_ratios(d_hat.clone(), vec![T::one()])?;
        if env.n() != 2 {
            return Err(Error::DimensionMismatch {
                what: "environment",
                expected: 2,
                got: env.n(),
            });
        }
        Ok(Self {
            landscape,
            env,
            d,
            d_hat,
            grid,
            config,
        })
    }

    pub fn from_model(model: &CompetitionModel<T>, grid: Grid<T>, config: EigenConfig<T>) -> Result<Self> {
        Self::new(
            model.landscape.clone(),
            model.env.clone(),
            model.resident.d.clone(),
            model.mutant.d.clone(),
            grid,
            config,
        )
    }

    pub fn kbar(&self) -> T {
        self.env.k[1] / self.env.k[0]
    }

    pub fn resident_state(&self, p: T) -> Result<PiecewiseField<T>> {
        let traits = SpeciesTraits::with_ratios(self.d.clone(), vec![p])?;
        solve_resident_steady(&self.landscape, &self.env, &traits, &self.grid, &self.config.steady)
    }

    pub fn fitness_in(&self, ustar: &PiecewiseField<T>, p_hat: T) -> Result<T> {
        let traits = SpeciesTraits::with_ratios(self.d_hat.clone(), vec![p_hat])?;
        Ok(fitness_against(ustar, &self.env, &traits, &self.config)?.lambda1)
    }

    /// `λ1(p, p̂)`.
    pub fn fitness(&self, p: T, p_hat: T) -> Result<T> {
        self.fitness_in(&self.resident_state(p)?, p_hat)
    }

    /// `λ1` for every mutant against one resident, solving the resident once.
    pub fn fitness_row(&self, p: T, mutants: &[T]) -> Result<Vec<T>> {
        let ustar = self.resident_state(p)?;
        mutants.iter().map(|&q| self.fitness_in(&ustar, q)).collect()
    }

    /// Width of the excluded band around `p = p̂` and around `k̄`.
    pub fn guard(&self, focal: T) -> T {
        T::lit(10.0) * self.config.sign_tol * focal.abs().max(T::one())
    }
}

/// Invasion-fitness signs over a resident × mutant scan.
#[derive(Debug, Clone, PartialEq)]
pub struct PipGrid<T> {
    pub resident: Vec<T>,
    pub mutant: Vec<T>,
    /// `lambda[i][j] = λ1(resident[i], mutant[j])`.
    pub lambda: Vec<Vec<T>>,
    pub sign_tol: T,
}

impl<T: Scalar> PipGrid<T> {
    /// `+1`, `-1`, or `0` inside the neutral band.
    pub fn sign(&self, i: usize, j: usize) -> i8 {
        let l = self.lambda[i][j];
        if l > self.sign_tol {
            1
        } else if l < -self.sign_tol {
            -1
        } else {
            0
        }
    }

    fn write_matrix<W: Write>(&self, mut w: W, cell: impl Fn(usize, usize) -> String) -> io::Result<()> {
        write!(w, "resident\\mutant")?;
        for &m in &self.mutant {
            write!(w, ",{}", fmt_num(m))?;
        }
        writeln!(w)?;
        for (i, &r) in self.resident.iter().enumerate() {
            write!(w, "{}", fmt_num(r))?;
            for j in 0..self.mutant.len() {
                write!(w, ",{}", cell(i, j))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Matrix of `λ1` values; the header row holds the mutant axis, the
    /// first column the resident axis.
    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        self.write_matrix(w, |i, j| fmt_num(self.lambda[i][j]))
    }

    pub fn write_sign_csv<W: Write>(&self, w: W) -> io::Result<()> {
        self.write_matrix(w, |i, j| self.sign(i, j).to_string())
    }
}

/// Pairwise invasibility over the given scans, one resident per task.
pub fn pip<T: Scalar>(setup: &TwoPatchSetup<T>, resident: &[T], mutant: &[T]) -> Result<PipGrid<T>> {
    for &x in resident.iter().chain(mutant) {
        if !(x > T::zero()) || !x.is_finite() {
            return Err(Error::validation("pip.scan", "strategies must be positive"));
        }
    }
    let lambda = resident
        .par_iter()
        .map(|&p| setup.fitness_row(p, mutant))
        .collect::<Result<Vec<_>>>()?;
    Ok(PipGrid {
        resident: resident.to_vec(),
        mutant: mutant.to_vec(),
        lambda,
        sign_tol: setup.config.sign_tol,
    })
}

/// One sampled pair that breaks a strategy certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Witness<T> {
    pub p: T,
    pub p_hat: T,
    pub lambda1: T,
}

/// Outcome of checking a strategy property on a finite sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCertificate<T> {
    pub holds: bool,
    pub focal: T,
    pub delta: T,
    /// Number of ordered pairs evaluated.
    pub pairs: usize,
    /// Smallest `|λ1|` among the pairs that satisfied their required sign.
    pub min_margin: T,
    pub witnesses: Vec<Witness<T>>,
}

/// `p* ± δ j/(samples+1)`, positive and outside the guard band around `k̄`.
fn neighbourhood<T: Scalar>(setup: &TwoPatchSetup<T>, focal: T, delta: T, samples: usize) -> Result<Vec<T>> {
    if !(delta > T::zero()) {
        return Err(Error::validation("certificate.delta", "must be positive"));
    }
    if samples < 3 {
        return Err(Error::validation("certificate.samples", "need at least 3 per side"));
    }
    if !(focal > T::zero()) {
        return Err(Error::validation("certificate.focal", "must be positive"));
    }
    let kbar = setup.kbar();
    let guard = setup.guard(kbar);
    let denom = T::from_usize_lossy(samples + 1);
    let mut out = Vec::with_capacity(2 * samples);
    for j in (1..=samples).rev() {
        out.push(focal - delta * T::from_usize_lossy(j) / denom);
    }
    for j in 1..=samples {
        out.push(focal + delta * T::from_usize_lossy(j) / denom);
    }
    out.retain(|&x| x > T::zero() && (x - kbar).abs() > guard);
    Ok(out)
}

/// Evaluates `required(p, p̂)` (`Some(true)` for `λ1 > 0`, `Some(false)` for
/// `λ1 < 0`, `None` to skip) over every ordered pair of `points`.
fn certify<T: Scalar>(
    setup: &TwoPatchSetup<T>,
    focal: T,
    delta: T,
    residents: &[T],
    mutants: &[T],
    required: impl Fn(T, T) -> Option<bool> + Sync,
) -> Result<SampledCertificate<T>> {
    let tol = setup.config.sign_tol;
    let rows = residents
        .par_iter()
        .map(|&p| -> Result<Vec<(T, T, bool)>> {
            let wanted: Vec<(T, bool)> = mutants
                .iter()
                .filter(|&&q| (q - p).abs() > setup.guard(p))
                .filter_map(|&q| required(p, q).map(|s| (q, s)))
                .collect();
            if wanted.is_empty() {
                return Ok(Vec::new());
            }
            let ustar = setup.resident_state(p)?;
            wanted
                .into_iter()
                .map(|(q, s)| Ok((q, setup.fitness_in(&ustar, q)?, s)))
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut pairs = 0;
    let mut min_margin = T::infinity();
    let mut witnesses = Vec::new();
    for (p, row) in residents.iter().zip(rows) {
        for (q, lambda1, positive) in row {
            pairs += 1;
            let ok = if positive { lambda1 > tol } else { lambda1 < -tol };
            if ok {
                min_margin = min_margin.min(lambda1.abs());
            } else {
                witnesses.push(Witness {
                    p: *p,
                    p_hat: q,
                    lambda1,
                });
            }
        }
    }
    Ok(SampledCertificate {
        holds: witnesses.is_empty() && pairs > 0,
        focal,
        delta,
        pairs,
        min_margin,
        witnesses,
    })
}

/// Sampled local ESS: `λ1(p*, p̂) < -sign_tol` for every sampled `p̂ ≠ p*`.
pub fn ess_check<T: Scalar>(setup: &TwoPatchSetup<T>, focal: T, delta: T, samples: usize) -> Result<SampledCertificate<T>> {
    let mutants = neighbourhood(setup, focal, delta, samples)?;
    certify(setup, focal, delta, &[focal], &mutants, |_, _| Some(false))
}

/// Sampled local NIS: `λ1(p, p*) > sign_tol` for every sampled `p ≠ p*`.
pub fn nis_check<T: Scalar>(setup: &TwoPatchSetup<T>, focal: T, delta: T, samples: usize) -> Result<SampledCertificate<T>> {
    let residents = neighbourhood(setup, focal, delta, samples)?;
    certify(setup, focal, delta, &residents, &[focal], |_, _| Some(true))
}

/// Sampled local CSS: resident strategies on one side of `p*` are invaded
/// exactly by mutants between them and `p*`, and resist mutants further out.
/// Residents inside the guard band around `k̄` are skipped.
pub fn css_check<T: Scalar>(setup: &TwoPatchSetup<T>, focal: T, delta: T, samples: usize) -> Result<SampledCertificate<T>> {
    let mut points = neighbourhood(setup, focal, delta, samples)?;
    points.push(focal);
    points.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let required = move |p: T, q: T| {
        if (focal <= p && p < q) || (q < p && p <= focal) {
            Some(false)
        } else if (focal <= q && q < p) || (p < q && q <= focal) {
            Some(true)
        } else {
            None
        }
    };
    // a resident at k̄ is neutral to every mutant
    let kbar = setup.kbar();
    let residents: Vec<T> = points.iter().copied().filter(|&p| (p - kbar).abs() > setup.guard(kbar)).collect();
    certify(setup, focal, delta, &residents, &points, required)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Agreement {
    Match,
    /// The simulation did not resolve within its horizon.
    Inconclusive,
    Contradiction,
    /// The prediction makes no global statement.
    Skipped,
}

impl Agreement {
    pub fn as_str(self) -> &'static str {
        match self {
            Agreement::Match => "match",
            Agreement::Inconclusive => "inconclusive",
            Agreement::Contradiction => "contradiction",
            Agreement::Skipped => "skipped",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CrossValidation<T> {
    pub prediction: Prediction,
    pub lambda1: T,
    /// Whether the sign of `λ1` agrees with the predicted invasion outcome.
    pub invasion_agrees: Option<bool>,
    pub verdict: Option<Verdict>,
    pub agreement: Agreement,
}

/// Compares the region prediction with the fitness sign and, when the
/// prediction is global, with a simulation from the default initial data.
pub fn cross_validate<T: Scalar>(
    model: &CompetitionModel<T>,
    grid: &Grid<T>,
    sim: &SimConfig<T>,
    eigen: &EigenConfig<T>,
) -> Result<CrossValidation<T>> {
    let prediction = predict_outcome(
        model.resident.p.as_slice(),
        model.mutant.p.as_slice(),
        &model.resident.d,
        &model.mutant.d,
        &model.env,
    )?;
    let ustar = solve_resident_steady(&model.landscape, &model.env, &model.resident, grid, &eigen.steady)?;
    let lambda1 = fitness_against(&ustar, &model.env, &model.mutant, eigen)?.lambda1;
    let invasion_agrees = match prediction.invade_when_rare {
        InvadeWhenRare::Yes => Some(lambda1 > eigen.sign_tol),
        InvadeWhenRare::No => Some(lambda1 < -eigen.sign_tol),
        InvadeWhenRare::Neutral => Some(lambda1.abs() <= eigen.sign_tol),
        InvadeWhenRare::OutsideTheory => None,
    };
    if prediction.global_verdict == GlobalVerdict::OutsideTheory {
        let agreement = if invasion_agrees == Some(false) {
            Agreement::Contradiction
        } else {
            Agreement::Skipped
        };
        return Ok(CrossValidation {
            prediction,
            lambda1,
            invasion_agrees,
            verdict: None,
            agreement,
        });
    }
    let system = CompetitionSystem::new(model, grid)?;
    let record = simulate(&system, SimState::half_capacity(&system), sim)?;
    let agreement = if invasion_agrees == Some(false) {
        Agreement::Contradiction
    } else if prediction.global_verdict.matches(record.verdict) {
        Agreement::Match
    } else if record.verdict == Verdict::Undetermined {
        Agreement::Inconclusive
    } else {
        Agreement::Contradiction
    };
    Ok(CrossValidation {
        prediction,
        lambda1,
        invasion_agrees,
        verdict: Some(record.verdict),
        agreement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Resolution};

    fn env2() -> PatchEnvironment<f64> {
        PatchEnvironment::new(vec![1.0, 1.0], vec![1.0, 2.0]).unwrap()
    }

    fn setup(m: usize) -> TwoPatchSetup<f64> {
        let l = Landscape::from_lengths(&[1.0, 1.0]).unwrap();
        let g = build_grid(&l, &Resolution::Uniform(m)).unwrap();
        TwoPatchSetup::new(l, env2(), vec![1.0, 1.0], vec![1.0, 1.0], g, EigenConfig::default()).unwrap()
    }

    #[test]
    fn region_predictions_for_reference_pairs() {
        let env = PatchEnvironment::new(vec![1.0; 3], vec![1.0, 2.0, 4.0]).unwrap();
        let d = [1.0, 1.0, 1.0];
        let pred = |p: [f64; 2], q: [f64; 2]| predict_outcome(&p, &q, &d, &d, &env).unwrap();
        assert_eq!(pred([3.0, 3.0], [2.5, 2.5]).global_verdict, GlobalVerdict::MutantWins);
        assert_eq!(pred([3.0, 3.0], [4.0, 4.0]).global_verdict, GlobalVerdict::ResidentWins);
        assert_eq!(pred([3.0, 3.0], [1.0, 1.0]).global_verdict, GlobalVerdict::Coexistence);
        assert_eq!(pred([1.0, 1.0], [3.0, 3.0]).global_verdict, GlobalVerdict::Coexistence);
        assert_eq!(pred([1.0, 1.0], [1.5, 1.5]).global_verdict, GlobalVerdict::MutantWins);
        assert_eq!(pred([1.5, 1.5], [1.0, 1.0]).global_verdict, GlobalVerdict::ResidentWins);
        let ifd = pred([2.0, 2.0], [5.0, 0.1]);
        assert_eq!(ifd.invade_when_rare, InvadeWhenRare::Neutral);
        assert_eq!(ifd.global_verdict, GlobalVerdict::OutsideTheory);
        assert_eq!(pred([3.0, 3.0], [2.5, 1.0]).csv_row(), "L1,Yes,OutsideTheory");
    }

    #[test]
    fn pip_structure() {
        let s = setup(40);
        let scan = [1.0, 1.5, 2.0, 2.5, 3.0];
        let g = pip(&s, &scan, &scan).unwrap();
        for i in 0..5 {
            assert_eq!(g.sign(i, i), 0);
            assert_eq!(g.sign(2, i), 0, "resident at k̄ is neutral to every mutant");
        }
        // mutant closer to k̄ on the same side invades
        assert_eq!(g.sign(4, 3), 1);
        assert_eq!(g.sign(3, 4), -1);
        assert_eq!(g.sign(0, 1), 1);
        // opposite sides invade each other
        assert_eq!(g.sign(0, 4), 1);
        assert_eq!(g.sign(4, 0), 1);
        let mut csv = Vec::new();
        g.write_sign_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("resident\\mutant,1.0000000000000000e0"));
        assert_eq!(text.lines().count(), 6);
    }

    #[test]
    fn pip_requires_two_patches() {
        let l = Landscape::from_lengths(&[1.0, 1.0, 1.0]).unwrap();
        let g = build_grid(&l, &Resolution::Uniform(8)).unwrap();
        let env = PatchEnvironment::new(vec![1.0; 3], vec![1.0; 3]).unwrap();
        let err = TwoPatchSetup::new(l, env, vec![1.0; 3], vec![1.0; 3], g, EigenConfig::default()).unwrap_err();
        assert_eq!(err, Error::RequiresTwoPatches { n: 3 });
    }

    #[test]
    fn certificates_at_ifd() {
        let s = setup(40);
        let css = css_check(&s, 2.0, 1.0, 3).unwrap();
        assert!(css.holds, "{:?}", css.witnesses);
        assert!(css.min_margin > 1e-8);
        assert!(nis_check(&s, 2.0, 1.0, 3).unwrap().holds);
        let ess = ess_check(&s, 3.0, 1.0, 3).unwrap();
        assert!(!ess.holds);
        assert!(ess.witnesses.iter().any(|w| w.p_hat > 2.0 && w.p_hat < 3.0));
    }

    #[test]
    fn stability_table_l1star() {
        let l = Landscape::from_lengths(&[1.0, 1.0]).unwrap();
        let model = CompetitionModel::new(
            l.clone(),
            env2(),
            SpeciesTraits::with_ratios(vec![1.0, 1.0], vec![4.0]).unwrap(),
            SpeciesTraits::with_ratios(vec![1.0, 1.0], vec![3.0]).unwrap(),
        )
        .unwrap();
        let g = build_grid(&l, &Resolution::Uniform(40)).unwrap();
        let t = stability_table(&model, &g, &EigenConfig::default()).unwrap();
        assert_eq!(t.resident_state, Stability::Unstable);
        assert_eq!(t.mutant_state, Stability::Stable);
        let swapped = stability_table(&model.swapped(), &g, &EigenConfig::default()).unwrap();
        assert_eq!(swapped.resident_state, Stability::Stable);
        assert_eq!(swapped.mutant_state, Stability::Unstable);
    }

    #[test]
    fn cross_validation_skips_ifd() {
        let l = Landscape::from_lengths(&[1.0, 1.0]).unwrap();
        let model = CompetitionModel::new(
            l.clone(),
            env2(),
            SpeciesTraits::with_ratios(vec![1.0, 1.0], vec![2.0]).unwrap(),
            SpeciesTraits::with_ratios(vec![1.0, 1.0], vec![3.0]).unwrap(),
        )
        .unwrap();
        let g = build_grid(&l, &Resolution::Uniform(20)).unwrap();
        let cv = cross_validate(&model, &g, &SimConfig::for_environment(&model.env), &EigenConfig::default()).unwrap();
        assert_eq!(cv.agreement, Agreement::Skipped);
        assert_eq!(cv.invasion_agrees, Some(true));
    }
}
