use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use velod_core::corpus::{planar_grid, small_corpus, uv_sphere};
use velod_core::experiment::{aggregate, run_cohort, ExperimentDesign, ObserverModel, ObserverPopulation, StimulusConfig};
use velod_core::kinematics::Condition;
use velod_core::obj::{parse_obj, write_obj};
use velod_core::psychofit::{cohort_stats, fit, ParticipantFit, Tail};
use velod_core::simplify::{generate_lod_chain, Simplifier, DEFAULT_LADDER};
use velod_core::TriangleMesh;

fn exhaustive_best(s: &Simplifier) -> Option<(u32, u32, f64)> {
    s.edges()
        .into_iter()
        .filter_map(|(a, b)| {
            let t = s.evaluate(a, b);
            s.is_legal(a, b, &t.position).then_some((a, b, t.cost))
        })
        .min_by(|x, y| x.2.total_cmp(&y.2).then(x.0.cmp(&y.0)).then(x.1.cmp(&y.1)))
}

fn assert_greedy_order(mesh: &TriangleMesh) {
    let mut s = Simplifier::new(mesh).unwrap();
    loop {
        let expected = exhaustive_best(&s);
        let got = s.step().map(|r| (r.kept, r.removed, r.cost));
        assert_eq!(expected, got);
        if got.is_none() {
            break;
        }
    }
}

#[test]
fn corpus_collapses_follow_exhaustive_order() {
    for mesh in small_corpus() {
        assert_greedy_order(&mesh);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn jittered_heightfields_follow_exhaustive_order(seed in any::<u64>(), n in 3usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mesh = planar_grid(n, n, 1.0, 1.0);
        for v in mesh.vertices.iter_mut() {
            v.z = rng.random_range(-0.2..0.2);
        }
        assert_greedy_order(&mesh);
    }
}

#[test]
fn chain_survives_obj_round_trip() {
    let mesh = uv_sphere(1.0, 24, 16);
    let chain = generate_lod_chain(&mesh, &DEFAULT_LADDER).unwrap();
    assert_eq!(chain.levels.len(), 8);
    for level in &chain.levels {
        let text = write_obj(&level.mesh, &["round trip".into()]).unwrap();
        let back = parse_obj(&text).unwrap();
        assert_eq!(back.triangles, level.mesh.triangles);
        assert_eq!(back.vertices, level.mesh.vertices);
    }
    let counts: Vec<usize> = chain.levels.iter().map(|l| l.achieved_triangle_count).collect();
    assert!(counts.windows(2).all(|w| w[0] > w[1]), "{counts:?}");
}

#[test]
fn simulated_cohort_recovers_condition_means() {
    // Population without spread: every participant shares the true parameters.
    let truth = ObserverModel {
        slow: velod_core::experiment::ObserverParams { mu: 72.0, sigma: 9.0 },
        fast: velod_core::experiment::ObserverParams { mu: 84.0, sigma: 9.0 },
        lapse_rate: 0.0,
    };
    let population = ObserverPopulation {
        mu_mean: (72.0, 84.0),
        mu_sd: (0.0, 0.0),
        sigma_mean: 9.0,
        sigma_sd: 0.0,
        sigma_min: 9.0,
        ..Default::default()
    };
    let design = ExperimentDesign { repetitions_per_level: 40, ..Default::default() };
    let (observers, records) = run_cohort(12, &design, &population, &StimulusConfig::default(), 3).unwrap();
    assert!(observers.iter().all(|o| *o == truth));
    let fits: Vec<ParticipantFit> = aggregate(&records)
        .unwrap()
        .iter()
        .map(|t| ParticipantFit { participant: t.participant, condition: t.condition, fit: fit(t).unwrap() })
        .collect();
    let stats = cohort_stats(&fits, 0.75, Tail::Greater).unwrap();
    assert!(stats.n_included >= 10);
    assert!((stats.slow.mean - 72.0).abs() < 2.5, "{}", stats.slow.mean);
    assert!((stats.fast.mean - 84.0).abs() < 2.5, "{}", stats.fast.mean);
    assert!(stats.p_value < 0.01);
    assert!(stats.slow.thresholds.iter().all(|(p, _)| !stats.excluded_ids.contains(p)));
    assert_eq!(fits.iter().filter(|f| f.condition == Condition::Fast).count(), 12);
}
