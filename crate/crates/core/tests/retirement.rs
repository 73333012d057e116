use momentinfo::estimation::{bootstrap_moment_variance, mean_moments};
use momentinfo::retirement::*;

fn sample(n: usize, seed: u64) -> RetirementSample {
    let settings = RetirementSettings::default();
    let hh = synthetic_population(n, seed, &PopulationTargets::default(), settings.interview_year);
    let (rh, rw) = simulate_data(&hh, &RetirementParams::reference(), &settings, seed + 1).unwrap();
    RetirementSample::new(hh, rh, rw).unwrap()
}

#[test]
fn simulated_moments_do_not_depend_on_thread_count() {
    let s = sample(400, 3);
    let settings = RetirementSettings {
        s_sim: 30,
        ..RetirementSettings::default()
    };
    let p = RetirementParams::reference();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulated_moments(&s, &p, &settings).unwrap())
    };
    let one = run(1);
    for t in [2, 5] {
        let other = run(t);
        assert!(one.iter().zip(other.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

#[test]
fn moments_vanish_at_the_truth() {
    let n = 1500;
    let s = sample(n, 40);
    let settings = RetirementSettings {
        sim_seed: 41,
        ..RetirementSettings::default()
    };
    let model = RetirementModel::new(settings, n);
    let theta = RetirementParams::reference().to_vec();
    let g = mean_moments(&model, &s, &theta).unwrap();
    let var = bootstrap_moment_variance(&model, &s, &theta, 100, 42).unwrap();
    let z2: f64 = g.iter().zip(var.iter()).map(|(g, v)| g * g * n as f64 / v).sum();
    // Sum of 52 squared z-scores; the simulation adds a factor 1 + 1/S.
    assert!(z2 < 52.0 * 2.0, "sum of squared z-scores {z2}");
    let labels = moment_labels();
    assert_eq!(labels.len(), N_MOMENTS);
    assert_eq!(labels.last().unwrap(), "joint");
}

#[test]
fn common_random_numbers_make_the_objective_repeatable() {
    let s = sample(300, 7);
    let settings = RetirementSettings {
        s_sim: 20,
        ..RetirementSettings::default()
    };
    let mut p = RetirementParams::reference();
    let a = simulated_moments(&s, &p, &settings).unwrap();
    p.gamma += 0.5;
    let b = simulated_moments(&s, &p, &settings).unwrap();
    p.gamma -= 0.5;
    let c = simulated_moments(&s, &p, &settings).unwrap();
    assert_eq!(a, c);
    assert_ne!(a, b);
    // Gap moments are data minus simulated: a larger externality simulates
    // more joint retirement.
    assert!(b[N_MOMENTS - 1] < a[N_MOMENTS - 1]);
}

#[test]
fn independent_cells_sum_across_households() {
    let s = sample(300, 9);
    let mut p = RetirementParams::reference();
    p.gamma = 0.0;
    p.sigma_hw = 0.0;
    for h in &s.households {
        let (a, b) = independent_plan_probabilities(h, &p, 0.96, 80).unwrap();
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    assert!(independent_plan_probabilities(&s.households[0], &RetirementParams::reference(), 0.96, 80).is_err());
}
