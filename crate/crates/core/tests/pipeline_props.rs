use tlcr::experiment::split_indices;
use tlcr::image::degrade;
use tlcr::patches::{enumerate_grid, gather_candidates, make_lr_feature};
use tlcr::pipeline::{hallucinate, prepare_corpus};
use tlcr::synth::synth_faces;
use tlcr::tlcr::{contribution_ratio, solve_weights_full};
use tlcr::HallucinationConfig;

#[test]
fn dominant_weight_is_usually_positional() {
    let faces = synth_faces(61, 5, 100, 120);
    let cfg = HallucinationConfig::default();
    let corpus = prepare_corpus(faces[1..].to_vec(), &cfg).unwrap();
    let geom = corpus.geometry;
    let lr = degrade(&faces[0], cfg.scale).unwrap();
    let up = tlcr::image::bicubic_upscale(&lr, cfg.scale).unwrap();

    let grid = enumerate_grid(&geom).unwrap();
    let (mut top1, mut top500) = (0.0, 0.0);
    let picks: Vec<_> = grid.iter().step_by(23).collect();
    for idx in &picks {
        let feature = make_lr_feature(&up.patch(idx.left, idx.top, 12), idx, cfg.f, &geom);
        let set = gather_candidates(&feature, idx, corpus.entries(), &geom, cfg.f).unwrap();
        let w = solve_weights_full(&feature.values, &set, cfg.tau, cfg.ridge_eps).unwrap();
        let positions = set.position_patch_indices();
        top1 += contribution_ratio(&w, &positions, 1).0;
        top500 += contribution_ratio(&w, &positions, 500).0;
    }
    let n = picks.len() as f64;
    let (crpp1, crpp500) = (top1 / n, top500 / n);
    eprintln!(
        "CRPP(1) = {crpp1:.3}, CRPP(500) = {crpp500:.3} over {} positions",
        picks.len()
    );
    assert!(crpp1 > crpp500);
}

#[test]
fn output_independent_of_thread_count() {
    let faces = synth_faces(9, 3, 48, 48);
    let cfg = HallucinationConfig {
        k: 60,
        rl_iterations: 1,
        ..Default::default()
    };
    let corpus = prepare_corpus(faces[1..].to_vec(), &cfg).unwrap();
    let lr = degrade(&faces[0], cfg.scale).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| hallucinate(&lr, &corpus, &cfg).unwrap())
    };
    let one = run(1);
    let many = run(4);
    assert_eq!(one.trace, many.trace);
    assert_eq!(one.image, run(1).image);
}

#[test]
fn split_360_40_is_reproducible() {
    let (train, test) = split_indices(400, 40, 7).unwrap();
    assert_eq!((train.len(), test.len()), (360, 40));
    assert_eq!(split_indices(400, 40, 7).unwrap(), (train, test));
}
