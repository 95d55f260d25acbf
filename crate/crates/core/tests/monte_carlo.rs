use lfbgw::simulate::*;
use lfbgw::*;
use num_complex::Complex64;

fn model_b() -> Model {
    Model::from_dense(&[vec![0.3, 0.3], vec![0.2, 0.4]], vec![0.5, 0.5], 2.0).unwrap()
}

fn within(m: &Moments, exact: f64, k: f64) -> bool {
    (m.mean() - exact).abs() <= k * m.std_err()
}

#[test]
fn offspring_means_match_mean_matrix() {
    let b = model_b();
    let mm = mean_matrix(&b);
    let sampler = OffspringSampler::new(&b);
    for i in 0..2 {
        let mut rng = replicate_rng(100, i as u64);
        let samples: Vec<_> = (0..100_000).map(|_| sampler.sample(i, &mut rng)).collect();
        let stats = SimStats::from_samples::<f64>(&samples, &[], CountView::Total).unwrap();
        for j in 0..2 {
            let e = &stats.means[j];
            assert!((e.estimate - mm[(i, j)]).abs() <= 3.0 * e.std_error, "{i} {j}: {e:?}");
        }
    }
}

#[test]
fn single_type_zero_probability() {
    let st = embed_single_type(0.25, 3.0).unwrap();
    let mut rng = replicate_rng(5, 0);
    let zeros: Moments = (0..100_000)
        .map(|_| f64::from(u8::from(sample_offspring(&st, 0, &mut rng).unwrap().total() == 0)))
        .collect();
    let exact = total_count_pmf(&st, 0, 10).unwrap().pmf[0];
    assert!(within(&zeros, exact, 3.0), "{:?}", zeros);
}

#[test]
fn empirical_pgf_matches_pgf_eval() {
    let b = model_b();
    let sampler = OffspringSampler::new(&b);
    let mut rng = replicate_rng(6, 0);
    let samples: Vec<_> = (0..100_000).map(|_| sampler.sample(0, &mut rng)).collect();
    let s = PgfPoint::splat(2, 0.5).unwrap();
    let (est, se) = empirical_pgf(&samples, &s).unwrap();
    let exact = pgf_eval(&b, &s).unwrap()[0];
    assert!((est - exact).abs() <= 3.0 * se, "{est} {se} {exact}");
}

#[test]
fn skeleton_law_sampling() {
    let b = model_b();
    let s = extinction_q(&b).unwrap();
    let law = skeleton_law(&b, &s).unwrap();
    let hs = hs_triplet(&b, &s).unwrap();
    let sampler = SkeletonSampler::new(&law);
    let mut rng = replicate_rng(7, 0);
    let samples: Vec<_> = (0..100_000).map(|_| sampler.sample(0, &mut rng)).collect();
    let totals: Moments = samples.iter().map(|x| x.total() as f64).collect();
    assert!(within(&totals, 11.0 / 3.0, 3.0), "{totals:?}");

    let half = PgfPoint::splat(2, 0.5).unwrap();
    let (est, se) = empirical_pgf_view(&samples, &half, CountView::Skeleton).unwrap();
    let exact = pgf_eval(&hs, &half).unwrap()[0];
    assert!((est - exact).abs() <= 3.0 * se);

    // full joint law at one point, both subtypes
    let t = PgfPoint::new(vec![0.3, 0.8]).unwrap();
    let joint = joint_pgf(&b, &s, &half, &t).unwrap().value[0];
    let m: Moments = samples
        .iter()
        .map(|x| {
            let split = x.split.as_ref().unwrap();
            0.5f64.powi((split.skeleton[0] + split.skeleton[1]) as i32)
                * 0.3f64.powi(split.doomed[0] as i32)
                * 0.8f64.powi(split.doomed[1] as i32)
        })
        .collect();
    assert!(within(&m, joint, 3.0), "{m:?} vs {joint}");
}

#[test]
fn second_generation_means() {
    let b = model_b();
    let mm = mean_matrix(&b);
    let m2 = mm.matmul(&mm);
    let runs: Vec<Vec<Vec<u64>>> = run_replicates(8, 10_000, 4, |_, rng| {
        simulate_generations(&b, &[1, 0], 2, rng, DEFAULT_POPULATION_CAP)
    })
    .unwrap();
    for j in 0..2 {
        let m: Moments = runs.iter().map(|r| r[2][j] as f64).collect();
        assert!(within(&m, m2[(0, j)], 3.0), "{j}: {m:?}");
    }
}

#[test]
fn extinction_frequency_by_generation_30() {
    let b = model_b();
    let sampler = OffspringSampler::new(&b);
    // Runs that reach 10^4 particles are counted as surviving; their
    // extinction probability is below 0.6^(10^4).
    let extinct: Vec<f64> = run_replicates(9, 10_000, 4, |_, rng| {
        let mut z = vec![1u64, 0];
        for _ in 0..30 {
            let mut next = vec![0u64; 2];
            for (i, &c) in z.iter().enumerate() {
                for _ in 0..c {
                    sampler.add_offspring(i, rng, &mut next);
                }
            }
            z = next;
            let total: u64 = z.iter().sum();
            if total == 0 {
                return Ok(1.0);
            }
            if total >= 10_000 {
                return Ok(0.0);
            }
        }
        Ok(0.0)
    })
    .unwrap();
    let m: Moments = extinct.into_iter().collect();
    let exact = pgf_iterate(&b, &PgfPoint::zeros(2), 30).unwrap()[0];
    assert!((exact - 0.6).abs() < 1e-6);
    assert!(within(&m, 0.6, 3.0), "{m:?}");
}

#[test]
fn root_skeleton_frequency() {
    let b = model_b();
    let s = extinction_q(&b).unwrap();
    let roots: Vec<f64> = run_replicates(10, 100_000, 4, |_, rng| {
        let t = simulate_tree_labeled(&b, &s, 0, 3, rng, DEFAULT_POPULATION_CAP)?;
        Ok(f64::from(u8::from(t.root_label() == Label::Skeleton)))
    })
    .unwrap();
    let m: Moments = roots.into_iter().collect();
    assert!(within(&m, 0.4, 3.0), "{m:?}");

    let mut rng = replicate_rng(11, 0);
    let at_zero: Moments = (0..100_000)
        .map(|_| {
            let t = simulate_tree_labeled(&b, &s, 1, 0, &mut rng, 10).unwrap();
            f64::from(u8::from(t.root_label() == Label::Skeleton))
        })
        .collect();
    assert!(within(&at_zero, 1.0 - s.q[1], 3.0));
}

/// `f_1((1-q) x + q y)` at complex `x, y`, written out from the triplet.
fn joint_first_generation(b: &Model, q: &[f64], x: Complex64, y: Complex64) -> Complex64 {
    let z: Vec<Complex64> = q.iter().map(|&qj| x * (1.0 - qj) + y * qj).collect();
    let hz: Complex64 = (0..2).map(|j| z[j] * b.h().get(0, j)).sum();
    let gz: Complex64 = (0..2).map(|j| z[j] * b.g()[j]).sum();
    let m = b.m();
    b.h0()[0] + hz / (Complex64::new(1.0 + m, 0.0) - gz * m)
}

#[test]
fn first_generation_labels_total_variation() {
    let b = model_b();
    let s = extinction_q(&b).unwrap();
    let q = s.q.clone();

    // The generating function above also equals the mixture of the
    // skeleton and doomed laws; check that at real points first.
    let dual = dual_triplet(&b, &s).unwrap();
    for &(x, y) in &[(0.2, 0.9), (0.7, 0.4), (1.0, 0.0)] {
        let lhs = joint_first_generation(&b, &q, Complex64::new(x, 0.0), Complex64::new(y, 0.0)).re;
        let f = joint_pgf(&b, &s, &PgfPoint::splat(2, x).unwrap(), &PgfPoint::splat(2, y).unwrap())
            .unwrap()
            .value[0];
        let fhat = pgf_eval(&dual, &PgfPoint::splat(2, y).unwrap()).unwrap()[0];
        assert!((lhs - ((1.0 - q[0]) * f + q[0] * fhat)).abs() < 1e-12);
    }

    // P(S = a, D = b) by a 2D discrete Fourier inversion on a K x K grid;
    // the aliased mass beyond K is about (2/3)^K.
    const K: usize = 64;
    let w = |k: usize| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / K as f64);
    let grid: Vec<Vec<Complex64>> = (0..K)
        .map(|u| (0..K).map(|v| joint_first_generation(&b, &q, w(u), w(v))).collect())
        .collect();
    let mut exact = vec![vec![0.0; K]; K];
    for a in 0..K {
        for d in 0..K {
            let mut acc = Complex64::new(0.0, 0.0);
            for u in 0..K {
                for v in 0..K {
                    acc += grid[u][v] * w((u * a + v * d) % K).conj();
                }
            }
            exact[a][d] = acc.re / (K * K) as f64;
        }
    }
    let mass: f64 = exact.iter().flatten().sum();
    assert!((mass - 1.0).abs() < 1e-9);

    let counts: Vec<(u64, u64)> = run_replicates(12, 100_000, 4, |_, rng| {
        let t = simulate_tree_labeled(&b, &s, 0, 1, rng, DEFAULT_POPULATION_CAP)?;
        Ok(t.label_counts()[1])
    })
    .unwrap();
    let mut empirical = vec![vec![0.0; K]; K];
    let mut outside = 0.0;
    for (sk, dm) in &counts {
        let p = 1.0 / counts.len() as f64;
        match empirical.get_mut(*sk as usize).and_then(|r| r.get_mut(*dm as usize)) {
            Some(c) => *c += p,
            None => outside += p,
        }
    }
    let tv = 0.5
        * (exact
            .iter()
            .flatten()
            .zip(empirical.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            + outside);
    assert!(tv < 0.01, "total variation {tv}");
}

#[test]
fn skeleton_growth_rate() {
    let b = model_b();
    let s = extinction_q(&b).unwrap();
    let per_tree: Vec<Vec<f64>> = run_replicates(13, 2_000, 4, |_, rng| {
        let t = simulate_tree_labeled(&b, &s, 0, 10, rng, DEFAULT_POPULATION_CAP)?;
        Ok(t.label_counts().iter().map(|c| c.0 as f64).collect())
    })
    .unwrap();
    let means: Vec<f64> = (1..=10)
        .map(|k| per_tree.iter().map(|c| c[k]).sum::<f64>() / per_tree.len() as f64)
        .collect();
    let xs: Vec<f64> = (1..=10).map(f64::from).collect();
    let ys: Vec<f64> = means.iter().map(|m| m.ln()).collect();
    let xm = xs.iter().sum::<f64>() / 10.0;
    let ym = ys.iter().sum::<f64>() / 10.0;
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum::<f64>()
        / xs.iter().map(|x| (x - xm) * (x - xm)).sum::<f64>();
    let target = s.rho.ln();
    assert!((slope - target).abs() < 0.1 * target, "{slope} vs {target}");
}

#[test]
fn dual_process_is_observed_subcritical() {
    let b = model_b();
    let s = extinction_q(&b).unwrap();
    let dual = dual_triplet(&b, &s).unwrap();
    let sampler = OffspringSampler::new(&dual);
    for i in 0..2 {
        let mut rng = replicate_rng(14, i as u64);
        let m: Moments = (0..100_000).map(|_| sampler.sample(i, &mut rng).total() as f64).collect();
        assert!(m.mean() + 3.0 * m.std_err() < 1.0, "{m:?}");
    }
}

#[test]
fn tree_experiment_agrees_and_is_deterministic() {
    let b = model_b();
    let s = extinction_q(&b).unwrap();
    let cfg = |workers| TreeExperimentConfig {
        seed: 99,
        replicates: 5_000,
        horizon: 5,
        root_type: 1,
        probes: vec![PgfPoint::splat(2, 0.3).unwrap(), PgfPoint::new(vec![0.9, 0.1]).unwrap()],
        workers,
        cap: DEFAULT_POPULATION_CAP,
    };
    let one = run_tree_experiment(&b, &s, &cfg(1)).unwrap();
    let four = run_tree_experiment(&b, &s, &cfg(4)).unwrap();
    assert_eq!(one, four);
    let bad: Vec<_> = one.rows.iter().filter(|r| r.z_score().unwrap() > 4.0).collect();
    assert!(bad.is_empty(), "{bad:?}");
    let tree = one.first_tree.unwrap();
    tree.check_invariants().unwrap();
}
