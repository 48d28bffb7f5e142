use patchcomp_core::dynamics::CompetitionSystem;
use patchcomp_core::eigen::EigenConfig;
use patchcomp_core::invasion::{Agreement, TwoPatchSetup};
use patchcomp_core::landscape::RegionLabel;
use patchcomp_core::steady::{solve_steady_from, LogisticProblem};
use patchcomp_core::*;
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Instance {
    lengths: Vec<f64>,
    r: Vec<f64>,
    k: Vec<f64>,
    d: Vec<f64>,
    p: Vec<f64>,
}

impl Instance {
    fn parts(&self) -> (Landscape64, PatchEnvironment64, SpeciesTraits64) {
        (
            Landscape::from_lengths(&self.lengths).unwrap(),
            PatchEnvironment::new(self.r.clone(), self.k.clone()).unwrap(),
            SpeciesTraits::with_ratios(self.d.clone(), self.p.clone()).unwrap(),
        )
    }
}

fn instance(max_patches: usize) -> impl Strategy<Value = Instance> {
    (1..=max_patches).prop_flat_map(|n| {
        (
            prop::collection::vec(0.4..2.0f64, n),
            prop::collection::vec(0.5..2.0f64, n),
            prop::collection::vec(0.5..3.0f64, n),
            prop::collection::vec(0.2..3.0f64, n),
            prop::collection::vec(0.3..3.0f64, n - 1),
        )
            .prop_map(|(lengths, r, k, d, p)| Instance { lengths, r, k, d, p })
    })
}

fn grid(l: &Landscape64, m: usize) -> Grid64 {
    build_grid(l, &Resolution::Uniform(m)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn diffusion_is_self_adjoint_with_jump_kernel(inst in instance(4), m in 4usize..30) {
        let (l, _, t) = inst.parts();
        let op = assemble_diffusion(&grid(&l, m), &t).unwrap();
        let kernel = op.apply(&op.null_vector());
        let scale = op.matrix().norm_inf();
        prop_assert!(kernel.iter().all(|x| x.abs() <= 1e-11 * scale));
        // M A is symmetric: w_i A_{i,i+1} = w_{i+1} A_{i+1,i}
        let a = op.matrix();
        let w = op.weights();
        let s = op.symmetrized();
        for i in 0..a.dim() - 1 {
            prop_assert!((w[i] * a.upper[i] - w[i + 1] * a.lower[i]).abs() <= 1e-12 * scale * w[i].max(w[i + 1]));
            let similar = a.upper[i] * (w[i] / w[i + 1]).sqrt();
            prop_assert!((s.upper[i] - similar).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn steady_state_positive_and_jump_consistent(inst in instance(4)) {
        let (l, e, t) = inst.parts();
        let u = solve_resident_steady(&l, &e, &t, &grid(&l, 40), &SteadyConfig::default()).unwrap();
        prop_assert!(u.min() > 0.0);
        prop_assert!(u.is_jump_consistent(t.p.as_slice(), 1e-12));
        // sub/super-solution box: u ≤ P_i max_j k_j / P_j
        let cum = t.p.cumulative();
        let level = (0..l.n()).map(|j| e.k[j] / cum[j]).fold(0.0, f64::max);
        for i in 0..l.n() {
            prop_assert!(u.patch(i).iter().all(|&x| x <= level * cum[i] * (1.0 + 1e-9)));
        }
    }

    #[test]
    fn swapping_species_swaps_prediction(
        k2 in 0.5..4.0f64,
        p in 0.2..6.0f64,
        p_hat in 0.2..6.0f64,
        d in prop::collection::vec(0.2..3.0f64, 2),
        d_hat in prop::collection::vec(0.2..3.0f64, 2),
    ) {
        let e = PatchEnvironment::new(vec![1.0, 1.0], vec![1.0, k2]).unwrap();
        let fwd = predict_outcome(&[p], &[p_hat], &d, &d_hat, &e).unwrap();
        let back = predict_outcome(&[p_hat], &[p], &d_hat, &d, &e).unwrap();
        use patchcomp_core::invasion::GlobalVerdict as G;
        let mirrored = match fwd.global_verdict {
            G::ResidentWins => G::MutantWins,
            G::MutantWins => G::ResidentWins,
            other => other,
        };
        if fwd.global_verdict != G::OutsideTheory && back.global_verdict != G::OutsideTheory {
            prop_assert_eq!(back.global_verdict, mirrored);
        }
        if fwd.region == RegionLabel::L2 || fwd.region == RegionLabel::S2 {
            prop_assert!(matches!(back.global_verdict, G::MutantWins | G::OutsideTheory));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn steady_state_independent_of_start(inst in instance(3), seed in any::<u64>()) {
        let (l, e, t) = inst.parts();
        let g = grid(&l, 40);
        let cfg = SteadyConfig::default();
        let op = assemble_diffusion(&g, &t).unwrap();
        let problem = LogisticProblem::new(op.clone(), &e).unwrap();
        let cap = problem.capacity_guess(&e);
        let tp = to_transformed(&l, &e, &t).unwrap();
        let fv = pull_back(&solve_steady_finite_volume(&tp, &vec![40; l.n()], &cfg).unwrap(), &tp).unwrap();
        let mut state = seed;
        let mut noise = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            0.1 + 2.0 * ((state >> 11) as f64 / (1u64 << 53) as f64)
        };
        let starts = vec![
            cap.iter().map(|c| 0.5 * c).collect::<Vec<_>>(),
            cap.clone(),
            cap.iter().map(|c| 2.0 * c).collect(),
            fv.to_reduced(),
            cap.iter().map(|c| c * noise()).collect(),
        ];
        let reference = solve_resident_steady(&l, &e, &t, &g, &cfg).unwrap();
        for (which, start) in starts.into_iter().enumerate() {
            let u = solve_steady_from(&problem, start.clone(), &cfg).unwrap().field;
            let gap = u.max_abs_diff(&reference).unwrap();
            prop_assert!(gap <= 1e-8 * reference.max(), "gap {gap:e} from start {which:?}, u max {}", u.max());
        }
    }

    #[test]
    fn resident_error_is_second_order(inst in instance(3)) {
        let (l, e, t) = inst.parts();
        let cfg = SteadyConfig::default();
        let fine = solve_resident_steady(&l, &e, &t, &grid(&l, 640), &cfg).unwrap();
        let mut errs = Vec::new();
        for m in [20, 40] {
            let coarse = solve_resident_steady(&l, &e, &t, &grid(&l, m), &cfg).unwrap();
            let stride = 640 / m;
            let mut worst: f64 = 0.0;
            for i in 0..l.n() {
                for (j, &v) in coarse.patch(i).iter().enumerate() {
                    worst = worst.max((v - fine.patch(i)[j * stride]).abs());
                }
            }
            errs.push(worst);
        }
        if errs[0] > 1e-9 * fine.max() {
            prop_assert!(errs[0] / errs[1] > 3.0, "errors {:?}", errs);
        }
    }

    #[test]
    fn pip_has_neutral_diagonal_and_no_mutual_exclusion(k2 in 0.6..3.0f64, a in 0.3..3.5f64, b in 0.3..3.5f64) {
        let l = Landscape::from_lengths(&[1.0, 1.0]).unwrap();
        let e = PatchEnvironment::new(vec![1.0, 1.0], vec![1.0, k2]).unwrap();
        let setup = TwoPatchSetup::new(l.clone(), e, vec![1.0, 1.0], vec![1.0, 1.0], grid(&l, 40), EigenConfig::default()).unwrap();
        let pip = pip(&setup, &[a, b], &[a, b]).unwrap();
        prop_assert_eq!(pip.sign(0, 0), 0);
        prop_assert_eq!(pip.sign(1, 1), 0);
        // one-dimensional trait with equal dispersal: invasion is mutual exclusion or coexistence,
        // so a strict win in one direction forbids a strict win back
        let ab = pip.sign(0, 1);
        let ba = pip.sign(1, 0);
        prop_assert!(!(ab < 0 && ba < 0), "both signs negative for {a}, {b}");
    }

    #[test]
    fn resident_wins_region_agrees_with_simulation(
        k2 in 1.2..3.0f64,
        a in 0.15..0.8f64,
        b in 0.15..0.8f64,
        large in any::<bool>(),
    ) {
        // resident strictly between the mutant and the ideal-free strategy
        let (p, p_hat) = if large { (k2 * (1.0 + a), k2 * (1.0 + a) * (1.0 + b)) } else { (k2 / (1.0 + a), k2 / (1.0 + a) / (1.0 + b)) };
        let l = Landscape::from_lengths(&[1.0, 1.0]).unwrap();
        let model = CompetitionModel::new(
            l.clone(),
            PatchEnvironment::new(vec![1.0, 1.0], vec![1.0, k2]).unwrap(),
            SpeciesTraits::with_ratios(vec![1.0, 1.0], vec![p]).unwrap(),
            SpeciesTraits::with_ratios(vec![1.0, 1.0], vec![p_hat]).unwrap(),
        ).unwrap();
        let g = grid(&l, 30);
        let sys = CompetitionSystem::new(&model, &g).unwrap();
        let sim = SimConfig { t_max: 20000.0, ..SimConfig::for_environment(&sys.env) };
        let cv = cross_validate(&model, &g, &sim, &EigenConfig::default()).unwrap();
        prop_assert!(matches!(cv.prediction.region, RegionLabel::L2 | RegionLabel::S2));
        prop_assert_ne!(cv.agreement, Agreement::Contradiction);
    }
}
