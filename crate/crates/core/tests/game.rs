use jcl_core::game::{
    block_lottery_report, build_block_profile, estimate_payoff, estimate_stationary_payoff, horizon_blocks,
    horizon_monte_carlo, play_block, play_stationary, quit_sweep, Action, BlockOptions, BlockProfile, Deviation,
    Deviator, DesignationRule, GameSpec, HorizonMethod, QuittingGame, StationaryProfile, SunspotProfile,
    SunspotSpec,
};
use jcl_core::{Error, ProbabilityVector, SeedTree};

const THREE_PLAYER: &str = include_str!("../../../configs/three_player.json");

fn three_player() -> (QuittingGame, SunspotProfile) {
    let v: serde_json::Value = serde_json::from_str(THREE_PLAYER).unwrap();
    let spec: GameSpec = serde_json::from_value(v["game"].clone()).unwrap();
    let game = QuittingGame::from_spec(&spec).unwrap();
    let sunspot: SunspotSpec = serde_json::from_value(v["sunspot"].clone()).unwrap();
    let sunspot = SunspotProfile::from_spec(&game, &sunspot).unwrap();
    (game, sunspot)
}

fn quick_profile(game: &QuittingGame, sunspot: &SunspotProfile, eps: f64) -> BlockProfile {
    let options = BlockOptions { threshold: Some(2.0), ..BlockOptions::default() };
    build_block_profile(game, sunspot, eps, &options).unwrap()
}

/// Expected payoff over the designation chain, enumerating every action
/// profile directly; truncated after `blocks` blocks.
fn brute_force_payoff(game: &QuittingGame, sunspot: &SunspotProfile, blocks: u64) -> (Vec<f64>, f64) {
    let n = game.num_players();
    let sizes: Vec<usize> = (0..n).map(|i| game.continue_actions(i).len()).collect();
    let total: usize = sizes.iter().product();
    let mut out = vec![0.0; n];
    let mut alive = 1.0;
    for block in 1..=blocks {
        let d = sunspot.designation(block);
        for (i, &eta) in sunspot.eta().iter().enumerate() {
            let w = alive * d.mass(i + 1) * eta;
            if w == 0.0 {
                continue;
            }
            for mut code in 0..total {
                let mut profile = Vec::with_capacity(n);
                let mut p = w;
                for (k, &s) in sizes.iter().enumerate() {
                    let a = code % s;
                    code /= s;
                    if k == i {
                        profile.push(Action::Quit);
                    } else {
                        profile.push(Action::Continue(a));
                        p *= sunspot.x()[k].mass(a);
                    }
                }
                // Each quit action is counted once per continue action of the quitter.
                p /= sizes[i] as f64;
                for (o, u) in out.iter_mut().zip(game.payoff(&profile)) {
                    *o += p * u;
                }
            }
        }
        let quit: f64 = (0..n).map(|i| d.mass(i + 1) * sunspot.eta()[i]).sum();
        alive *= 1.0 - quit;
    }
    (out, alive)
}

#[test]
fn example_target_matches_brute_force_oracle() {
    let (game, sunspot) = three_player();
    let (approx, tail) = brute_force_payoff(&game, &sunspot, 2000);
    assert!(tail < 1e-12);
    for (a, t) in approx.iter().zip(sunspot.target_payoff()) {
        assert!((a - t).abs() < 1e-9, "{approx:?}");
    }
    for (a, e) in approx.iter().zip(sunspot.exact_payoff(&game)) {
        assert!((a - e).abs() < 1e-9);
    }
}

#[test]
fn quit_sweep_matches_separate_estimates() {
    let (game, sunspot) = three_player();
    let profile = quick_profile(&game, &sunspot, 0.05);
    let seeds = SeedTree::new(4);
    for player in [0, 2] {
        let (on_path, sweep) = quit_sweep(&profile, player, 6, 300, &seeds).unwrap();
        assert_eq!(on_path, estimate_payoff(&profile, None, 300, &seeds).unwrap());
        for k in 1..=6u64 {
            let d = Deviator { player, deviation: Deviation::QuitAtBlock(k) };
            let direct = estimate_payoff(&profile, Some(&d), 300, &seeds).unwrap();
            assert_eq!(sweep[k as usize - 1], direct.mean[player], "player {player}, block {k}");
        }
        let d = Deviator { player, deviation: Deviation::QuitImmediately };
        assert_eq!(sweep[0], estimate_payoff(&profile, Some(&d), 300, &seeds).unwrap().mean[player]);
    }
}

#[test]
fn immediate_quit_absorbs_at_stage_one() {
    let (game, sunspot) = three_player();
    let profile = quick_profile(&game, &sunspot, 0.05);
    let d = Deviator { player: 1, deviation: Deviation::QuitImmediately };
    for run in 0..20 {
        let r = play_block(&profile, Some(&d), &SeedTree::new(1), run, 100).unwrap();
        assert_eq!(r.absorbed_at, Some(1));
        let a = r.absorbing_profile.as_ref().unwrap();
        assert!(a[1].is_quit() && !a[0].is_quit() && !a[2].is_quit());
        assert_eq!(r.payoff, game.payoff(a));
        assert_eq!(r.payoff, vec![0.0, 0.5, 1.0]);
    }
}

#[test]
fn everybody_quitting_pays_the_all_quit_row() {
    let (game, _) = three_player();
    let prof = StationaryProfile::new(&game, vec![vec![0.0, 0.0]; 3], vec![1.0; 3]).unwrap();
    let r = play_stationary(&game, &prof, None, &SeedTree::new(0), 0, 10).unwrap();
    assert_eq!(r.absorbed_at, Some(1));
    assert_eq!(r.payoff, game.payoff(&[Action::Quit; 3]));
}

#[test]
fn all_continue_profile_never_absorbs() {
    let (game, sunspot) = three_player();
    let prof = StationaryProfile::nonabsorbing(&game, sunspot.x()).unwrap();
    let est = estimate_stationary_payoff(&game, &prof, None, 200, 50, &SeedTree::new(2)).unwrap();
    assert_eq!(est.absorbed_fraction, 0.0);
    assert_eq!(est.mean, vec![0.0; 3]);
    assert_eq!(est.mean, prof.exact_payoff(&game));
}

#[test]
fn absorbing_stationary_profile_matches_closed_form() {
    let (game, _) = three_player();
    let prof = StationaryProfile::new(
        &game,
        vec![vec![0.45, 0.45], vec![0.5, 0.45], vec![0.2, 0.75]],
        vec![0.1, 0.05, 0.05],
    )
    .unwrap();
    let est = estimate_stationary_payoff(&game, &prof, None, 20_000, 10_000, &SeedTree::new(3)).unwrap();
    assert!(est.linf_to(&prof.exact_payoff(&game)) <= est.half_width, "{est:?}");
}

#[test]
fn dominated_quit_gains_nothing() {
    // Player 2 gets 1.0 when player 1 quits and at most 0.5 from quitting.
    let (game, _) = three_player();
    let prof = StationaryProfile::new(
        &game,
        vec![vec![0.0, 0.8], vec![0.5, 0.5], vec![0.5, 0.5]],
        vec![0.2, 0.0, 0.0],
    )
    .unwrap();
    let seeds = SeedTree::new(5);
    let on_path = estimate_stationary_payoff(&game, &prof, None, 4000, 1000, &seeds).unwrap();
    let d = Deviator { player: 1, deviation: Deviation::QuitImmediately };
    let dev = estimate_stationary_payoff(&game, &prof, Some(&d), 4000, 1000, &seeds).unwrap();
    assert!((on_path.mean[1] - 1.0).abs() < 1e-12);
    assert!(dev.mean[1] - on_path.mean[1] <= on_path.half_width);
}

#[test]
fn nobody_designated_means_stationary_playback() {
    let (game, sunspot) = three_player();
    let outcomes = sunspot.outcomes().clone();
    let never = SunspotProfile::new(
        &game,
        sunspot.x().to_vec(),
        DesignationRule::Stationary(ProbabilityVector::dirac(outcomes, 0)),
        vec![0.04; 3],
        None,
    )
    .unwrap();
    assert_eq!(horizon_blocks(&never, 0.05, &SeedTree::new(0)), Err(Error::NoFiniteHorizon));
    assert!(matches!(build_block_profile(&game, &never, 0.05, &BlockOptions::default()), Err(Error::NoFiniteHorizon)));
}

#[test]
fn cyclic_designation_absorbs_before_the_horizon() {
    let (game, sunspot) = three_player();
    let cyclic =
        SunspotProfile::new(&game, sunspot.x().to_vec(), DesignationRule::Cyclic { probability: 1.0 }, vec![0.02; 3], None)
            .unwrap();
    let eps = 0.05;
    let profile = quick_profile(&game, &cyclic, eps);
    let horizon = profile.horizon();
    assert_eq!((horizon.blocks, horizon.method), (149, HorizonMethod::ClosedForm));
    let est = estimate_payoff(&profile, None, 10_000, &SeedTree::new(6)).unwrap();
    let seeds = SeedTree::new(6);
    let before: usize = (0..10_000u64)
        .filter(|&r| play_block(&profile, None, &seeds, r, horizon.blocks).unwrap().absorbed_at.is_some())
        .count();
    assert!(before as f64 / 10_000.0 >= 1.0 - 2.0 * eps, "{before}");
    assert!(est.absorbed_fraction >= before as f64 / 10_000.0);
}

#[test]
fn horizon_scales_with_designation_probability() {
    let (game, sunspot) = three_player();
    let with = |q: f64| {
        SunspotProfile::new(&game, sunspot.x().to_vec(), DesignationRule::Cyclic { probability: q }, vec![0.02; 3], None)
            .unwrap()
    };
    let eps = 0.05;
    let full = horizon_blocks(&with(1.0), eps, &SeedTree::new(0)).unwrap();
    let half = horizon_blocks(&with(0.5), eps, &SeedTree::new(0)).unwrap();
    assert_eq!(half.method, HorizonMethod::Binomial);
    let mc = horizon_monte_carlo(&with(0.5), eps, &SeedTree::new(9), 20_000, 10_000).unwrap();
    // The binomial tail is exact; the estimator adds a one-sided margin, so
    // it may only sit a little above it.
    assert!(mc.blocks + 2 >= half.blocks && mc.blocks <= half.blocks + 40, "{mc:?} vs {half:?}");
    let ratio = half.blocks as f64 / full.blocks as f64;
    assert!((1.8..2.6).contains(&ratio), "{ratio}");
}

#[test]
fn honest_block_lottery_tracks_designation() {
    let (game, sunspot) = three_player();
    let options = BlockOptions { threshold: Some(8.0), ..BlockOptions::default() };
    let profile = build_block_profile(&game, &sunspot, 0.05, &options).unwrap();
    let report = block_lottery_report(&profile, 1, 10_000, &SeedTree::new(8)).unwrap();
    assert!(report.linf <= profile.lottery_accuracy_target() + report.margin, "{report:?}");
}

#[test]
fn lottery_players_need_two_continue_actions() {
    let mut v: serde_json::Value = serde_json::from_str(THREE_PLAYER).unwrap();
    v["game"]["continue_actions"]["p2"] = serde_json::json!(["L"]);
    let game = QuittingGame::from_spec(&serde_json::from_value(v["game"].clone()).unwrap()).unwrap();
    v["sunspot"]["x"]["p2"] = serde_json::json!({"L": 1.0});
    let sunspot = SunspotProfile::from_spec(&game, &serde_json::from_value(v["sunspot"].clone()).unwrap()).unwrap();
    let err = build_block_profile(&game, &sunspot, 0.05, &BlockOptions::default()).unwrap_err();
    assert_eq!(err, Error::TooFewContinueActions("p2".into()));
}
