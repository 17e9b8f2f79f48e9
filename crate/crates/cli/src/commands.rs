use indexmap::IndexMap;
use log::{info, warn};
use serde::Serialize;

use jcl_core::calibration::{calibrate_threshold, CalibrationReport};
use jcl_core::exec::map_runs;
use jcl_core::game::{
    build_block_profile, deviation_family, deviation_gain, estimate_payoff, BlockOptions, DeviationReport, Horizon,
    PayoffEstimate,
};
use jcl_core::stats::DistributionReport;
use jcl_core::weak::{default_max_stages, DEFAULT_DETECTION_WINDOW, DEFAULT_TIMEOUT_DELTA};
use jcl_core::{
    parse_strategy, AdversarySuite, BinaryCoinPair, EmpiricalDistribution, OutcomeSet, ProbabilityVector, SeedTree,
    SharedStrategy, StrongMechanism, Verdict, WeakMechanism,
};

use crate::config::{ConfigError, ExperimentConfig};
use crate::report::{json_sibling, write_csv, write_json};
use crate::{CliError, Common, GameMode};

const REPORT_DELTA: f64 = 0.01;

fn seed(cfg: &ExperimentConfig, common: &Common) -> u64 {
    common.seed.or(cfg.seed).unwrap_or(0)
}

fn runs(cfg: &ExperimentConfig, common: &Common, default: u64) -> Result<u64, ConfigError> {
    match common.runs.or(cfg.runs).unwrap_or(default) {
        0 => Err(ConfigError::Invalid("runs must be at least 1".into())),
        n => Ok(n),
    }
}

fn eps(cfg: &ExperimentConfig, common: &Common) -> Result<f64, ConfigError> {
    let eps = common.eps.or(cfg.eps).ok_or(ConfigError::Missing("eps"))?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(ConfigError::Invalid(format!("eps must lie in (0, 1), got {eps}")));
    }
    Ok(eps)
}

fn strategy(name: Option<&str>, default: &str, outcomes: &OutcomeSet) -> Result<(String, SharedStrategy), ConfigError> {
    let name = name.unwrap_or(default);
    Ok((name.to_string(), parse_strategy(name, outcomes)?))
}

fn suite(cfg: &ExperimentConfig, outcomes: &OutcomeSet) -> Result<AdversarySuite, ConfigError> {
    match &cfg.adversaries {
        Some(names) => Ok(AdversarySuite::from_names(names, outcomes)?),
        None => Ok(AdversarySuite::standard(outcomes)),
    }
}

#[derive(Serialize)]
struct Gate {
    bound: f64,
    value: f64,
    passed: bool,
}

fn check_gate(common: &Common, gate: Option<&Gate>, what: &str) -> Result<(), CliError> {
    match gate {
        Some(g) if common.assert && !g.passed => {
            Err(CliError::Gate(format!("{what}: {} exceeds {}", g.value, g.bound)))
        }
        _ => Ok(()),
    }
}

#[derive(Serialize)]
struct StrongRow<'a> {
    run_id: u64,
    outcome: &'a str,
    stages: u64,
    z_value: f64,
}

#[derive(Serialize)]
struct StrongReport {
    command: &'static str,
    seed: u64,
    runs: u64,
    coins: BinaryCoinPair,
    threshold: f64,
    stage_bound: u64,
    device1: String,
    device2: String,
    max_stages_observed: u64,
    distribution: DistributionReport,
    calibration: Option<CalibrationReport>,
    gate: Option<Gate>,
}

pub fn lottery_strong(cfg: &ExperimentConfig, common: &Common) -> Result<(), CliError> {
    let coins = cfg.coins()?;
    let nu = cfg.nu()?;
    let outcomes = nu.outcomes().clone();
    let (n1, s1) = strategy(cfg.device1.as_deref(), "honest", &outcomes)?;
    let (n2, s2) = strategy(cfg.device2.as_deref(), "honest", &outcomes)?;
    let seed = seed(cfg, common);
    let runs = runs(cfg, common, 10_000)?;
    let seeds = SeedTree::new(seed);

    let (threshold, calibration) = match cfg.threshold {
        Some(c) => (c, None),
        None => {
            let eps = eps(cfg, common).map_err(|_| ConfigError::Missing("C (or eps to calibrate it)"))?;
            let report = calibrate_threshold(
                &coins,
                &nu,
                eps,
                &suite(cfg, &outcomes)?,
                &seeds.child("calibration"),
                &cfg.calibration_settings(),
            )?;
            (report.threshold()?, Some(report))
        }
    };
    let mechanism = StrongMechanism::new(coins, nu.clone(), threshold).map_err(ConfigError::from)?;
    let run_seeds = seeds.child("runs");
    let results = map_runs(runs, |r| {
        let run = mechanism.run(s1.as_ref(), s2.as_ref(), &mut run_seeds.device_streams(r));
        (run.outcome, run.stages, run.z)
    });
    let rows: Vec<StrongRow> = results
        .iter()
        .enumerate()
        .map(|(i, &(o, stages, z))| StrongRow { run_id: i as u64, outcome: outcomes.label(o), stages, z_value: z })
        .collect();
    write_csv(&common.out, &["run_id", "outcome", "stages", "z_value"], &rows)?;

    let e = EmpiricalDistribution::from_outcomes(outcomes.clone(), results.iter().map(|r| Some(r.0)));
    let distribution = DistributionReport::new(&e, &nu, REPORT_DELTA)?;
    let gate = match (common.assert, eps(cfg, common)) {
        (true, Err(err)) => return Err(err.into()),
        (_, Ok(eps)) => Some(Gate {
            bound: eps + distribution.margin,
            value: distribution.linf,
            passed: distribution.linf <= eps + distribution.margin,
        }),
        (false, Err(_)) => None,
    };
    let report = StrongReport {
        command: "lottery-strong",
        seed,
        runs,
        coins,
        threshold,
        stage_bound: mechanism.stage_bound(),
        device1: n1,
        device2: n2,
        max_stages_observed: results.iter().map(|r| r.1).max().unwrap_or(0),
        distribution,
        calibration,
        gate,
    };
    write_json(&json_sibling(&common.out), &report)?;
    info!("strong lottery: L-inf {:.5} over {runs} runs", report.distribution.linf);
    check_gate(common, report.gate.as_ref(), "L-inf distance")
}

#[derive(Serialize)]
struct WeakRow<'a> {
    run_id: u64,
    outcome_or_timeout: &'a str,
    stages: u64,
    verdict: &'static str,
}

#[derive(Serialize)]
struct WeakReport {
    command: &'static str,
    seed: u64,
    runs: u64,
    coins: BinaryCoinPair,
    max_stages: u64,
    window: usize,
    device1: String,
    device2: String,
    timeout_fraction: f64,
    verdicts: IndexMap<&'static str, u64>,
    distribution: DistributionReport,
    gates: IndexMap<&'static str, Gate>,
}

pub fn lottery_weak(
    cfg: &ExperimentConfig,
    common: &Common,
    max_stages: Option<u64>,
    detect: bool,
) -> Result<(), CliError> {
    let coins = cfg.coins()?;
    let nu = cfg.nu()?;
    let outcomes = nu.outcomes().clone();
    let (n1, s1) = strategy(cfg.device1.as_deref(), if detect { "stall" } else { "honest" }, &outcomes)?;
    let (n2, s2) = strategy(cfg.device2.as_deref(), "honest", &outcomes)?;
    let seed = seed(cfg, common);
    let runs = runs(cfg, common, if detect { 1_000 } else { 10_000 })?;
    let default_cap = if detect { 10_000 } else { default_max_stages(&coins, nu.len(), DEFAULT_TIMEOUT_DELTA) };
    let max_stages = max_stages.or(cfg.max_stages).unwrap_or(default_cap);
    let window = cfg.window.unwrap_or(DEFAULT_DETECTION_WINDOW);
    let mechanism =
        WeakMechanism::new(coins, nu.clone(), max_stages).map_err(ConfigError::from)?.with_window(window);
    let run_seeds = SeedTree::new(seed).child("runs");
    let results = map_runs(runs, |r| {
        let run = mechanism.run(s1.as_ref(), s2.as_ref(), &mut run_seeds.device_streams(r))?;
        let outcome = match run.outcome {
            jcl_core::weak::WeakOutcome::Decided(j) => Some(j),
            jcl_core::weak::WeakOutcome::Timeout => None,
        };
        Ok::<_, jcl_core::Error>((outcome, run.stages, run.verdict.verdict))
    });
    let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<WeakRow> = results
        .iter()
        .enumerate()
        .map(|(i, (o, stages, v))| WeakRow {
            run_id: i as u64,
            outcome_or_timeout: o.map_or("timeout", |j| outcomes.label(j)),
            stages: *stages,
            verdict: v.as_str(),
        })
        .collect();
    write_csv(&common.out, &["run_id", "outcome_or_timeout", "stages", "verdict"], &rows)?;

    let e = EmpiricalDistribution::from_outcomes(outcomes.clone(), results.iter().map(|r| r.0));
    let distribution = DistributionReport::new(&e, &nu, REPORT_DELTA)?;
    let mut verdicts: IndexMap<&'static str, u64> = IndexMap::new();
    for v in [Verdict::None, Verdict::Device1Faulty, Verdict::Device2Faulty, Verdict::Inconclusive] {
        verdicts.insert(v.as_str(), results.iter().filter(|r| r.2 == v).count() as u64);
    }
    let timeouts = e.unresolved();
    let timeout_fraction = e.unresolved_fraction();

    let mut gates = IndexMap::new();
    let max_excess = distribution.excess.values().copied().fold(0.0, f64::max);
    gates.insert(
        "one_sided_excess",
        Gate { bound: distribution.margin, value: max_excess, passed: max_excess <= distribution.margin },
    );
    let faulty = match (n1 == "honest", n2 == "honest") {
        (true, true) => None,
        (false, true) => Some(Verdict::Device1Faulty),
        (true, false) => Some(Verdict::Device2Faulty),
        (false, false) => Some(Verdict::Inconclusive),
    };
    match faulty {
        None => {
            gates.insert(
                "linf",
                Gate { bound: distribution.margin, value: distribution.linf, passed: distribution.linf <= distribution.margin },
            );
            gates.insert(
                "timeout_fraction",
                Gate { bound: DEFAULT_TIMEOUT_DELTA, value: timeout_fraction, passed: timeout_fraction <= DEFAULT_TIMEOUT_DELTA },
            );
            let flagged = (verdicts["device1_faulty"] + verdicts["device2_faulty"]) as f64;
            gates.insert("false_verdicts", Gate { bound: 0.0, value: flagged, passed: flagged == 0.0 });
        }
        Some(expected) if detect => {
            let wrong = results.iter().filter(|r| r.0.is_none() && r.2 != expected).count() as f64;
            gates.insert("wrong_verdicts", Gate { bound: 0.0, value: wrong, passed: wrong == 0.0 });
            gates.insert("timeout_fraction", Gate { bound: 0.99, value: timeout_fraction, passed: timeout_fraction >= 0.99 });
        }
        Some(_) => {}
    }
    if timeouts > 0 && !detect {
        warn!("{timeouts} of {runs} runs hit the stage cap of {max_stages}");
    }
    let report = WeakReport {
        command: if detect { "detect" } else { "lottery-weak" },
        seed,
        runs,
        coins,
        max_stages,
        window,
        device1: n1,
        device2: n2,
        timeout_fraction,
        verdicts,
        distribution,
        gates,
    };
    write_json(&json_sibling(&common.out), &report)?;
    if common.assert {
        if let Some((name, g)) = report.gates.iter().find(|(_, g)| !g.passed) {
            return Err(CliError::Gate(format!("{name}: {} against bound {}", g.value, g.bound)));
        }
    }
    Ok(())
}

pub fn calibrate(cfg: &ExperimentConfig, common: &Common) -> Result<(), CliError> {
    let coins = cfg.coins()?;
    let nu = cfg.nu()?;
    let eps = eps(cfg, common)?;
    let mut settings = cfg.calibration_settings();
    if let Some(r) = common.runs {
        settings.runs_per_probe = r;
    }
    let report = calibrate_threshold(
        &coins,
        &nu,
        eps,
        &suite(cfg, nu.outcomes())?,
        &SeedTree::new(seed(cfg, common)).child("calibration"),
        &settings,
    )?;
    write_json(&common.out, &report)?;
    match report.threshold() {
        Ok(c) => {
            info!("calibrated threshold {c}");
            Ok(())
        }
        Err(err) if common.assert => Err(CliError::Gate(err.to_string())),
        Err(err) => {
            warn!("{err}");
            eprintln!("jcl: warning: {err}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct LotterySummary {
    threshold: f64,
    coins: BinaryCoinPair,
    accuracy_target: f64,
    certified_accuracy: Option<f64>,
    calibration: Vec<CalibrationReport>,
}

#[derive(Serialize)]
struct GameReport {
    command: &'static str,
    mode: &'static str,
    seed: u64,
    runs: u64,
    eps: f64,
    horizon: Horizon,
    x_prime: IndexMap<String, Vec<f64>>,
    lottery: LotterySummary,
    target_payoff: Vec<f64>,
    estimate: Option<PayoffEstimate>,
    deviations: Vec<DeviationReport>,
    gate: Gate,
}

pub fn game(cfg: &ExperimentConfig, common: &Common, mode: GameMode) -> Result<(), CliError> {
    let (game, sunspot) = cfg.game()?;
    let eps = eps(cfg, common)?;
    let seed = seed(cfg, common);
    let runs = runs(cfg, common, 10_000)?;
    let options = BlockOptions { threshold: cfg.threshold, calibration: cfg.calibration_settings(), seed };
    let profile = build_block_profile(&game, &sunspot, eps, &options).map_err(|e| match e {
        jcl_core::Error::CalibrationFailed { .. } => CliError::Run(e),
        other => CliError::Config(other.into()),
    })?;
    let seeds = SeedTree::new(seed).child("play");
    let target = sunspot.target_payoff().to_vec();
    let perturbed = profile.x_prime().iter().zip(sunspot.x()).any(|(a, b)| a != b);
    let (estimate, deviations, gate) = match mode {
        GameMode::Payoff => {
            let est = estimate_payoff(&profile, None, runs, &seeds)?;
            let value = est.linf_to(&target);
            let bound = 2.0 * eps + est.half_width;
            (Some(est), Vec::new(), Gate { bound, value, passed: value <= bound })
        }
        GameMode::Deviations => {
            let mut reports = Vec::new();
            for player in 0..game.num_players() {
                let family = deviation_family(&profile, player);
                reports.push(deviation_gain(&profile, player, &family, runs, &seeds)?);
            }
            let factor = if perturbed { 10.0 } else { 6.0 };
            let ci = reports.iter().map(|r| r.ci).fold(0.0, f64::max);
            let value = reports.iter().map(|r| r.max_gain).fold(f64::NEG_INFINITY, f64::max);
            let bound = factor * eps + ci;
            (None, reports, Gate { bound, value, passed: value <= bound })
        }
    };
    let x_prime = game
        .players()
        .labels()
        .iter()
        .cloned()
        .zip(profile.x_prime().iter().map(|p: &ProbabilityVector| p.masses().to_vec()))
        .collect();
    let report = GameReport {
        command: "game",
        mode: match mode {
            GameMode::Payoff => "payoff",
            GameMode::Deviations => "deviations",
        },
        seed,
        runs,
        eps,
        horizon: profile.horizon(),
        x_prime,
        lottery: LotterySummary {
            threshold: profile.threshold(),
            coins: *profile.coins(),
            accuracy_target: profile.lottery_accuracy_target(),
            certified_accuracy: profile.certified_lottery_accuracy(),
            calibration: profile.calibration().to_vec(),
        },
        target_payoff: target,
        estimate,
        deviations,
        gate,
    };
    write_json(&common.out, &report)?;
    check_gate(common, Some(&report.gate), "game gate")
}
