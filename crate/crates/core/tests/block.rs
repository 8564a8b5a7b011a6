mod common;

use quitting_core::block::{build_block, check_block, classify_anchor, BlockCase};
use quitting_core::classify::classify_players;
use quitting_core::geometry::FeasibleSet;
use quitting_core::linalg::sup_dist;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn team_d() -> FeasibleSet {
    FeasibleSet::from_classification(&classify_players(&common::team_game())).unwrap()
}

#[test]
fn team_anchor_matches_closed_form() {
    let d = team_d();
    for eps in [0.1, 0.01] {
        let b = build_block(&d, &[0.0, 0.0, 0.0, 0.5], eps).unwrap();
        assert!(sup_dist(&b.w, &[0.0, 0.0, 0.5, 0.0]) < 1e-9);
        let den = 6.0 + eps;
        let expect = [eps / den, 1.0 / den, 1.0 / den, 0.0, 4.0 / den];
        assert!(sup_dist(&b.z, &expect) < 1e-9, "{:?}", b.z);
        assert!(check_block(&b, &d, eps).pass);
    }
}

#[test]
fn random_boundary_anchors_give_valid_blocks() {
    let d = team_d();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..100 {
        let y = d.random_boundary_point(&mut rng).unwrap();
        assert!(d.on_boundary(&y));
        let b = build_block(&d, &y, 0.05).unwrap();
        let check = check_block(&b, &d, 0.05);
        assert!(check.pass, "{y:?}: {:?}", check.first_failure());
        assert!(check.drift <= check.drift_bound + 1e-9);
        assert!(d.on_boundary(&b.w));
    }
}

#[test]
fn random_cyclic_games_give_valid_blocks() {
    for (k, game) in common::random_cyclic_q_games(5, 23).iter().enumerate() {
        let d = FeasibleSet::from_classification(&classify_players(game)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
        for _ in 0..20 {
            let y = d.random_boundary_point(&mut rng).unwrap();
            let b = build_block(&d, &y, 0.1).unwrap();
            assert!(check_block(&b, &d, 0.1).pass);
        }
    }
}

#[test]
fn checker_reports_broken_conditions() {
    let d = team_d();
    let mut b = build_block(&d, &[0.0, 0.0, 0.0, 0.5], 0.1).unwrap();
    b.w_i[0][2] += 0.01;
    let check = check_block(&b, &d, 0.1);
    assert!(!check.pass);
    assert_eq!(check.first_failure().unwrap().name, "F.1");

    let mut b = build_block(&d, &[0.0, 0.0, 0.0, 0.5], 0.1).unwrap();
    b.z[0] = -0.1;
    assert!(!check_block(&b, &d, 0.1).pass);
}

#[test]
fn face_anchor_is_classified() {
    let d = team_d();
    assert_eq!(classify_anchor(&d, &[0.0, 0.0, 0.0, 0.5]), BlockCase::PerturbedLimit);
    // (0, 0, 1/3) is a mix of the two vertices whose first two coordinates vanish.
    let d = FeasibleSet::new(vec![vec![0.0, 0.0, 1.0], vec![0.0, 0.0, -1.0], vec![-1.0, -1.0, 0.0]]).unwrap();
    assert_eq!(classify_anchor(&d, &[0.0, 0.0, 1.0 / 3.0]), BlockCase::OnFace);
}
