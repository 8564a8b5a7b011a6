mod common;

use quitting_core::classify::classify_players;
use quitting_core::lcp::nontrivial_zero_solution;
use quitting_core::stationary::{construct_all_abnormal, construct_from_lcp_zero, construct_normal_nonneg, stationary_equilibrium, verify_stationary, Branch};

const EPS: [f64; 3] = [0.1, 0.01, 0.001];

#[test]
fn nonnegative_quitter_profile() {
    let g = common::load("two_player.json");
    for eps in EPS {
        let x = construct_normal_nonneg(&g, 0, eps).unwrap();
        assert_eq!(x.quit_probs(), &[eps, eps * eps]);
        let r = verify_stationary(&g, &x, 4.0 * eps);
        assert!(r.pass, "{eps}: {:?}", r.gains);
    }
    assert!(construct_normal_nonneg(&g, 1, 0.01).is_err());
    assert!(construct_normal_nonneg(&common::team_game(), 0, 0.01).is_err());
}

#[test]
fn all_abnormal_single_quitter() {
    let g = common::load("one_normal.json");
    let cls = classify_players(&g);
    assert!(cls.normal_set().is_empty());
    for eps in EPS {
        let (branch, x) = construct_all_abnormal(&g, &cls, eps).unwrap();
        assert_eq!(branch, Branch::SingleQuitter);
        assert_eq!(x.quit_probs(), &[eps, 0.0, 0.0]);
        assert!(verify_stationary(&g, &x, 2.0 * eps).pass);
    }
}

#[test]
fn all_abnormal_chain_uses_nonnegative_quitter() {
    let g = common::load("normal_chain.json");
    let cls = classify_players(&g);
    assert_eq!(cls.level(1), &[0]);
    for eps in EPS {
        let (branch, x) = construct_all_abnormal(&g, &cls, eps).unwrap();
        assert_eq!(branch, Branch::NonnegativeQuitter);
        assert!(verify_stationary(&g, &x, 4.0 * eps).pass);
    }
}

#[test]
fn zero_solution_spreads_quitting() {
    let g = common::load("zero_lcp_solution.json");
    let cls = classify_players(&g);
    let sol = nontrivial_zero_solution(cls.restricted_matrix().unwrap()).unwrap().unwrap();
    assert!(sol.z[0] < 1.0);
    for eps in EPS {
        let x = construct_from_lcp_zero(&g, &cls, &sol, eps).unwrap();
        let r = verify_stationary(&g, &x, 4.0 * eps);
        assert!(r.pass, "{eps}: {:?}", r.gains);
    }
}

#[test]
fn pipeline_picks_the_matching_construction() {
    let cases = [
        ("two_player.json", Branch::AllContinue),
        ("one_normal.json", Branch::SingleQuitter),
        ("normal_chain.json", Branch::NonnegativeQuitter),
        ("zero_lcp_solution.json", Branch::ZeroLcpSolution),
    ];
    for (file, branch) in cases {
        let g = common::load(file);
        let out = stationary_equilibrium(&g, 0.01).unwrap().unwrap();
        assert_eq!(out.branch, branch, "{file}");
        assert!(out.report.pass);
    }
    assert!(stationary_equilibrium(&common::team_game(), 0.01).unwrap().is_none());
}
