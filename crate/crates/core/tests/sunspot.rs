mod common;

use quitting_core::classify::classify_players;
use quitting_core::error::Error;
use quitting_core::geometry::FeasibleSet;
use quitting_core::linalg::sup_dist;
use quitting_core::sunspot::evaluate::{deviation_gains, deviation_value, exact_value, termination_probability, verify_sunspot};
use quitting_core::sunspot::mmatrix::{implement_payoff, m_matrix_targets, recurrent_value, verify_recurrent, RecurrentProfile};
use quitting_core::sunspot::profile::{assemble_profile, block_length, stage_prob, Kiloblock, SunspotProfile};
use quitting_core::sunspot::sequence::generate_sequence;
use quitting_core::sunspot::simulate::{simulate_profile, DEFAULT_MAX_STAGES};
use quitting_core::sunspot::sunspot_equilibrium;
use quitting_core::QuittingGame;

fn alternating() -> SunspotProfile {
    let text = std::fs::read_to_string(common::fixture("team_alternating_profile.json")).unwrap();
    SunspotProfile::from_json_str(&text).unwrap()
}

#[test]
fn orbit_alternates_between_the_two_team_anchors() {
    let game = common::team_game();
    let d = FeasibleSet::from_classification(&classify_players(&game)).unwrap();
    let seq = generate_sequence(&d, 0.1).unwrap();
    assert_eq!(seq.jump_sum, 0.0);
    assert!(seq.satisfies_conditions());
    for (k, y) in seq.points.iter().enumerate().skip(1) {
        let expect = if k % 2 == 0 { [0.0, 0.0, 0.0, 0.5] } else { [0.0, 0.0, 0.5, 0.0] };
        assert!(sup_dist(y, &expect) < 1e-12, "step {k}: {y:?}");
    }
}

#[test]
fn nontrivial_zero_solution_routes_to_stationary_path() {
    let game = common::load("zero_lcp_solution.json");
    let d = FeasibleSet::from_classification(&classify_players(&game)).unwrap();
    assert!(matches!(generate_sequence(&d, 0.1), Err(Error::StationaryPathApplies)));
}

#[test]
fn pipeline_on_team_game() {
    let game = common::team_game();
    let out = sunspot_equilibrium(&game, 0.05).unwrap();
    assert!(out.report.pass, "{:?}", out.report.failures);
    assert!(out.report.anchor_gap.unwrap() < 0.1);
    assert!(out.report.termination >= 0.95);
    assert!(out.profile.max_stage_prob() < 0.05);
    assert_eq!(out.report.megablocks.thin, 0);
    for kb in &out.profile.kiloblocks {
        assert_eq!(kb.block_len, 2);
    }
}

#[test]
fn pipeline_on_random_cyclic_games() {
    for game in common::random_cyclic_q_games(3, 5) {
        let out = sunspot_equilibrium(&game, 0.1).unwrap();
        assert!(out.report.pass, "{:?}", out.report.failures);
    }
}

#[test]
fn alternating_fixture_value_and_gains() {
    let game = common::team_game();
    let profile = alternating();
    let v = exact_value(&profile, &game).unwrap();
    assert!(sup_dist(&v, &[0.0, 0.0, 0.5, 0.0]) < 1e-9);
    let gains = deviation_gains(&profile, &game).unwrap();
    assert!(gains.iter().all(|&g| g <= 0.5), "{gains:?}");
    let report = verify_sunspot(&profile, &game, 0.1).unwrap();
    assert!(report.pass, "{:?}", report.failures);
}

#[test]
fn moving_mass_to_type_zero_breaks_termination() {
    let game = common::team_game();
    let mut profile = alternating();
    for kb in &mut profile.kiloblocks {
        let moved: f64 = kb.z[1..].iter().sum::<f64>() * 0.999;
        for z in &mut kb.z[1..] {
            *z *= 0.001;
        }
        kb.z[0] += moved;
    }
    let report = verify_sunspot(&profile, &game, 0.1).unwrap();
    assert!(!report.pass);
    assert!(report.termination < 0.9);
    assert!(report.failures.iter().any(|f| f.contains("termination")));
}

#[test]
fn certain_absorption_pays_the_quitter_vector() {
    let game = common::team_game();
    for c in [1u64, 2, 4, 8] {
        let lambda = 1.0 - 0.5f64.powi(c as i32);
        let profile = SunspotProfile {
            players: vec![0, 1, 2, 3],
            kiloblocks: vec![Kiloblock { z: vec![0.0, 1.0, 0.0, 0.0, 0.0], lambda: vec![lambda, 0.0, 0.0, 0.0], block_len: c, drift: None }],
            anchor_payoff: None,
        };
        let v = exact_value(&profile, &game).unwrap();
        assert!(sup_dist(&v, game.unilateral(0)) < 1e-15);
        assert_eq!(termination_probability(&profile, None), 1.0);
    }
}

#[test]
fn tail_only_profile_has_no_gain() {
    let game = QuittingGame::from_unilateral(&[vec![0.0, 1.0], vec![-1.0, 0.0]], vec![0.0, 0.0]).unwrap();
    let profile = SunspotProfile { players: vec![0, 1], kiloblocks: vec![], anchor_payoff: None };
    assert_eq!(exact_value(&profile, &game).unwrap(), vec![0.0, 0.0]);
    assert!(deviation_gains(&profile, &game).unwrap().iter().all(|&g| g == 0.0));
    assert_eq!(termination_probability(&profile, None), 0.0);
}

#[test]
fn stage_one_absorption_in_simulation() {
    let game = common::team_game();
    let profile = SunspotProfile {
        players: vec![0, 1, 2, 3],
        kiloblocks: vec![Kiloblock { z: vec![0.0, 1.0, 0.0, 0.0, 0.0], lambda: vec![0.999_999_999_999, 0.0, 0.0, 0.0], block_len: 1, drift: None }],
        anchor_payoff: None,
    };
    let sim = simulate_profile(&profile, &game, 1, 1000, DEFAULT_MAX_STAGES).unwrap();
    assert_eq!(sim.terminated, 1000);
    assert_eq!(sim.estimate.mean, game.unilateral(0).to_vec());
    assert_eq!(sim.histogram.len(), 1);
    assert_eq!(sim.histogram[0].from, 1);
}

/// Value of one stopping policy in a single-kiloblock profile: the deviator
/// quits at stage `stops[j]` of each type-`j` block (`None`: never), in type-0
/// draws if `quit_on_zero`, and in the tail if `quit_in_tail`.
fn policy_value(game: &QuittingGame, kb: &Kiloblock, player: usize, stops: &[Option<u64>], quit_on_zero: bool, quit_in_tail: bool) -> f64 {
    let alone = game.unilateral(player)[player];
    let tail = if quit_in_tail { alone } else { game.never_quit()[player] };
    // U = A + B U, accumulated over block types
    let mut a = kb.z[0] * if quit_on_zero { alone } else { tail };
    let mut b = 0.0;
    for (j, stop) in stops.iter().enumerate() {
        let zj = kb.z[1 + j];
        let p = if j == player { 0.0 } else { stage_prob(kb.lambda[j], kb.block_len) };
        let other = game.unilateral(j)[player];
        let both = game.payoff((1 << j) | (1 << player))[player];
        let mut alive = 1.0;
        let mut value = 0.0;
        let mut done = false;
        for s in 1..=kb.block_len {
            if *stop == Some(s) {
                value += alive * (p * both + (1.0 - p) * alone);
                done = true;
                break;
            }
            value += alive * p * other;
            alive *= 1.0 - p;
        }
        a += zj * value;
        if !done {
            b += zj * alive;
        }
    }
    a / (1.0 - b)
}

#[test]
fn deviation_value_matches_exhaustive_policy_search() {
    let game = QuittingGame::from_unilateral(&[vec![0.0, 0.4, -0.2], vec![-0.3, 0.0, 0.6], vec![0.5, -0.1, 0.0]], vec![0.1, -0.2, 0.05]).unwrap();
    let kb = Kiloblock { z: vec![0.3, 0.2, 0.3, 0.2], lambda: vec![0.2, 0.5, 0.3], block_len: 3, drift: None };
    let profile = SunspotProfile { players: vec![0, 1, 2], kiloblocks: vec![kb.clone()], anchor_payoff: None };
    let options: Vec<Option<u64>> = std::iter::once(None).chain((1..=kb.block_len).map(Some)).collect();
    for player in 0..3 {
        let mut best = f64::NEG_INFINITY;
        for s0 in &options {
            for s1 in &options {
                for s2 in &options {
                    for quit_on_zero in [false, true] {
                        for quit_in_tail in [false, true] {
                            let v = policy_value(&game, &kb, player, &[*s0, *s1, *s2], quit_on_zero, quit_in_tail);
                            best = best.max(v);
                        }
                    }
                }
            }
        }
        let computed = deviation_value(&profile, &game, player).unwrap();
        assert!((computed - best).abs() < 1e-12, "player {player}: {computed} vs {best}");
    }
}

#[test]
fn block_length_examples() {
    assert_eq!(block_length(0.5, 0.1).unwrap(), 7);
    let c = block_length(0.99, 0.01).unwrap();
    assert!(stage_prob(0.99, c) < 0.01 && stage_prob(0.99, c - 1) >= 0.01);
}

#[test]
fn recurrent_profile_for_team_target() {
    let game = common::team_game();
    let cls = classify_players(&game);
    let target = [0.25, 0.25, 0.0, 0.0];
    let p = implement_payoff(&game, &cls, &target, 0.05).unwrap();
    assert!((p.initial[0] - 0.5).abs() < 1e-12 && (p.initial[1] - 0.5).abs() < 1e-12);
    assert!(sup_dist(&recurrent_value(&p, &game).unwrap(), &target) < 1e-9);
    let report = verify_recurrent(&p, &game, 0.05, Some(&target)).unwrap();
    assert!(report.pass, "{:?}", report.failures);

    let text = p.to_json().to_string();
    assert_eq!(RecurrentProfile::from_json_str(&text).unwrap(), p);
}

#[test]
fn recurrent_profile_for_vertex_and_barycenter() {
    let game = common::team_game();
    let cls = classify_players(&game);
    let t = m_matrix_targets(cls.restricted_matrix().unwrap()).unwrap();
    let p = implement_payoff(&game, &cls, &t.w[2], 0.1).unwrap();
    assert_eq!(p.initial, vec![0.0, 0.0, 1.0, 0.0]);
    let bary = [0.125; 4];
    let p = implement_payoff(&game, &cls, &bary, 0.1).unwrap();
    assert!(p.initial.iter().all(|m| (m - 0.25).abs() < 1e-12));
    assert!(verify_recurrent(&p, &game, 0.1, Some(&bary)).unwrap().pass);
}

#[test]
fn unit_direction_targets_lie_in_d() {
    let game = common::team_game();
    let cls = classify_players(&game);
    let d = FeasibleSet::from_classification(&cls).unwrap();
    let t = m_matrix_targets(cls.restricted_matrix().unwrap()).unwrap();
    for (i, w) in t.w.iter().enumerate() {
        assert!(d.contains(w));
        assert!(w[i] > 0.0);
        assert!(w.iter().enumerate().all(|(k, v)| k == i || *v == 0.0));
    }
}

#[test]
fn target_outside_d_is_rejected() {
    let game = common::team_game();
    let cls = classify_players(&game);
    assert!(implement_payoff(&game, &cls, &[0.5, 0.5, 0.0, 0.0], 0.1).is_err());
    assert!(implement_payoff(&game, &cls, &[0.0, 0.0, -0.1, 0.0], 0.1).is_err());
}

#[test]
fn profile_json_round_trip_through_assembly() {
    let game = common::team_game();
    let out = sunspot_equilibrium(&game, 0.1).unwrap();
    let text = out.profile.to_json().to_string();
    let back = SunspotProfile::from_json_str(&text).unwrap();
    assert_eq!(back, out.profile);
    let direct = assemble_profile(&out.sequence, &[0, 1, 2, 3]).unwrap();
    assert_eq!(direct, out.profile);
}
