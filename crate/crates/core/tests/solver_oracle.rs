//! The closed-form thresholded solver against an independent
//! equality-constrained QP solved by substitution.

mod common;

use common::{qp_oracle, random_instance, seeded};
use rand::Rng;
use tlcr::patches::{gather_candidates, make_lr_feature, PatchIndex};
use tlcr::pipeline::prepare_corpus;
use tlcr::synth::synth_faces;
use tlcr::tlcr::{represent, solve_weights, solve_weights_full, SolverConfig, DEFAULT_RIDGE_EPS};
use tlcr::{HallucinationConfig, ImageBuffer};

#[test]
fn matches_constrained_qp_oracle() {
    let mut rng = seeded(2024);
    let taus = [0.0, 0.04, 1.0];
    let mut worst = 0.0f64;
    for case in 0..100 {
        let k = rng.random_range(2..=8);
        let dim = rng.random_range(4..=16);
        let tau = taus[case % 3];
        let (x, ys, d) = random_instance(&mut rng, k, dim);
        let refs: Vec<&[f64]> = ys.iter().map(Vec::as_slice).collect();
        let cfg = SolverConfig {
            tau,
            k,
            ridge_eps: DEFAULT_RIDGE_EPS,
        };
        let w = solve_weights(&x, &refs, &d, &cfg).unwrap();
        let oracle = qp_oracle(&x, &ys, &d, tau, DEFAULT_RIDGE_EPS);
        let err = w
            .iter()
            .zip(&oracle)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(err);
        assert!(
            err <= 1e-8,
            "case {case} (K={k}, dim={dim}, tau={tau}): max error {err}"
        );
        let sum: f64 = w.iter().sum();
        assert!((sum - 1.0).abs() <= 1e-10, "case {case}: sum {sum}");
    }
    eprintln!("worst oracle deviation {worst:e}");
}

#[test]
fn thresholding_with_k_equal_n_is_the_full_solve() {
    let mut rng = seeded(99);
    let faces = synth_faces(3, 11, 24, 24);
    for case in 0..50 {
        let m = rng.random_range(1..=3);
        let cfg = HallucinationConfig {
            window_size: 14,
            ..Default::default()
        };
        let corpus = prepare_corpus(faces[..m].to_vec(), &cfg).unwrap();
        let geom = corpus.geometry;
        let test = ImageBuffer::from_fn(24, 24, |_, _| rng.random_range(0.0..1.0));
        let pos = PatchIndex {
            grid_row: 0,
            grid_col: 0,
            top: rng.random_range(0..=geom.max_top()),
            left: rng.random_range(0..=geom.max_left()),
        };
        let feature = make_lr_feature(&test.patch(pos.left, pos.top, 12), &pos, cfg.f, &geom);
        let set = gather_candidates(&feature, &pos, corpus.entries(), &geom, cfg.f).unwrap();
        let tau = [0.0, 0.04, 1.0][case % 3];

        let full = solve_weights_full(&feature.values, &set, tau, DEFAULT_RIDGE_EPS).unwrap();
        let solver = SolverConfig {
            tau,
            k: set.len(),
            ridge_eps: DEFAULT_RIDGE_EPS,
        };
        let thresholded = represent(&feature.values, &set, &solver).unwrap();
        assert_eq!(thresholded.indices.len(), set.len());
        let mut scattered = vec![0.0; set.len()];
        for (&i, &c) in thresholded.indices.iter().zip(&thresholded.coefficients) {
            scattered[i] = c;
        }
        for (i, (a, b)) in scattered.iter().zip(&full).enumerate() {
            assert!(
                (a - b).abs() <= 1e-10,
                "case {case} coordinate {i}: {a} vs {b}"
            );
        }
    }
}
