//! World state and the tick loop.
//!
//! Each tick proceeds in a fixed order: expired blacklist entries are
//! purged; agents are visited in a freshly shuffled order and may sponsor
//! projects that are formed, possibly betrayed, resolved, and settled on
//! the spot; every agent consumes its subsistence; subsidies are paid
//! (scaled pro rata if the fund cannot cover them); the policy controller
//! reacts to the fund's balance versus the next projected subsidy bill;
//! and a metrics record is emitted.
//!
//! All randomness comes from three private ChaCha streams derived from the
//! master seed (topology, agent initialisation, visit order) plus a fourth
//! consumed strictly in visit order for per-project draws, so identical
//! configurations replay identical runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agents::{eligible_invitees, Agent, AgentId, BlacklistRegistry, Tick};
use crate::config::RunConfig;
use crate::economy::{
    compute_subsidy, policy_step, poverty_level, ControllerState, TaxSchedule, WelfareCenter,
    WelfarePolicy,
};
use crate::game::{
    accepts_invitation, decide_stake, payoff_ratios, resolve_project, risk_score,
    select_betrayal_coalition, settle, BetrayalParams, CoalitionMember, Outcome, Project,
    StakeRule,
};
use crate::topology::{generate_small_world, SmallWorldParams, Topology};
use crate::SimError;

/// RNG stream indices carved out of the master seed.
const STREAM_TOPOLOGY: u64 = 0;
const STREAM_AGENT_INIT: u64 = 1;
const STREAM_VISIT: u64 = 2;
const STREAM_PROJECT: u64 = 3;

/// How many derived topology seeds are tried before giving up on a
/// connected graph.
pub const MAX_TOPOLOGY_ATTEMPTS: u32 = 32;

/// Tolerance for the per-tick wealth conservation identity.
pub const LEDGER_TOLERANCE: f64 = 1e-6;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Full simulation state between ticks.
#[derive(Debug, Clone)]
pub struct WorldState {
    pub topology: Topology,
    pub agents: Vec<Agent>,
    pub blacklist: BlacklistRegistry,
    pub center: WelfareCenter,
    pub policy: WelfarePolicy,
    pub tick: Tick,
    /// Seed that produced the accepted (connected) topology.
    pub topology_seed: u64,
    /// Connected-topology attempts consumed, counting the accepted one.
    pub topology_attempts: u32,
    config: RunConfig,
    visit_rng: ChaCha8Rng,
    project_rng: ChaCha8Rng,
}

/// Per-tick observables, one row of the metrics series.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub tick: Tick,
    pub projects_attempted: u64,
    pub projects_succeeded: u64,
    pub betrayal_count: u64,
    pub invitations_issued: u64,
    pub invitations_accepted: u64,
    pub total_agent_wealth: f64,
    pub center_wealth: f64,
    /// Top bracket rate after this tick's controller update.
    pub current_rate: f64,
    /// Guaranteed minimum after this tick's controller update.
    pub current_min_guarantee: f64,
    pub blacklist_size: u64,
    /// Agents below the operative guaranteed minimum after subsidies.
    pub poor_count: u64,
}

/// Wealth created and destroyed during one tick. Taxes, subsidies, and
/// betrayal transfers move money between pockets and never appear here.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TickLedger {
    /// Profits minted by successful projects.
    pub gains: f64,
    /// Stake value burnt by failed projects.
    pub losses: f64,
    /// Subsistence consumed by all agents.
    pub consumption: f64,
}

/// One project's lifetime, recorded for the event log.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectEvent {
    pub tick: Tick,
    pub sponsor: AgentId,
    pub solo: bool,
    pub participants: Vec<AgentId>,
    pub stakes: Vec<f64>,
    pub risk: f64,
    pub gain_ratio: f64,
    pub loss_ratio: f64,
    pub outcome: Outcome,
}

/// Everything a finished run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub metrics: Vec<MetricsRecord>,
    pub events: Vec<ProjectEvent>,
    /// Largest absolute wealth conservation residual seen on any tick.
    pub max_ledger_residual: f64,
    pub final_state_summary: FinalState,
}

/// Snapshot of the world after the last tick.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct FinalState {
    pub total_agent_wealth: f64,
    pub center_wealth: f64,
    pub min_guarantee: f64,
    pub top_rate: f64,
    pub blacklist_size: u64,
    pub poor_count: u64,
}

/// Sum of a slice of f64 with Neumaier compensation, so conservation
/// checks are not polluted by naive summation error.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Total wealth in the closed system: every agent plus the central fund.
pub fn total_system_wealth(world: &WorldState) -> f64 {
    compensated_sum(
        world
            .agents
            .iter()
            .map(|a| a.wealth)
            .chain(std::iter::once(world.center.wealth)),
    )
}

/// Signed difference between the observed wealth change and the ledger's
/// explanation of it.
pub fn ledger_residual(total_before: f64, total_after: f64, ledger: &TickLedger) -> f64 {
    (total_after - total_before) - (ledger.gains - ledger.losses - ledger.consumption)
}

/// Whether a tick's wealth change is fully explained by its ledger, within
/// [`LEDGER_TOLERANCE`]. Logs the discrepancy when it is not.
pub fn ledger_check(total_before: f64, total_after: f64, ledger: &TickLedger) -> bool {
    let residual = ledger_residual(total_before, total_after, ledger);
    if residual.abs() <= LEDGER_TOLERANCE {
        true
    } else {
        log::warn!(
            "wealth conservation violated: residual {residual:+e} \
             (before {total_before}, after {total_after}, gains {}, losses {}, consumption {})",
            ledger.gains,
            ledger.losses,
            ledger.consumption
        );
        false
    }
}

/// Builds the initial world: a connected contact graph, endowed agents
/// whose neighbours seed their white lists, the funded welfare centre, and
/// the starting policy.
///
/// Topology generation retries with derived seeds until the graph is
/// connected, failing after [`MAX_TOPOLOGY_ATTEMPTS`].
pub fn init_world(config: &RunConfig) -> Result<WorldState, SimError> {
    config.validate()?;

    let mut topo_rng = stream_rng(config.seed, STREAM_TOPOLOGY);
    let mut attempts = 0u32;
    let (topology, topology_seed) = loop {
        let seed: u64 = topo_rng.random();
        attempts += 1;
        let t = generate_small_world(&SmallWorldParams {
            n: config.topology.n,
            k: config.topology.k,
            p: config.topology.p,
            seed,
        })?;
        if t.is_connected() {
            break (t, seed);
        }
        log::warn!(
            "topology attempt {attempts} (seed {seed}) is disconnected; retrying with the next derived seed"
        );
        if attempts >= MAX_TOPOLOGY_ATTEMPTS {
            return Err(SimError::InvalidParams(format!(
                "no connected topology after {MAX_TOPOLOGY_ATTEMPTS} attempts \
                 (n={}, k={}, p={}); raise k or lower p",
                config.topology.n, config.topology.k, config.topology.p
            )));
        }
    };

    let mut init_rng = stream_rng(config.seed, STREAM_AGENT_INIT);
    let a = &config.agents;
    let mut agents: Vec<Agent> = (0..config.topology.n)
        .map(|id| {
            let wealth = init_rng.random_range(a.wealth_min..=a.wealth_max);
            let spirit = init_rng.random_range(a.spirit_min..=a.spirit_max) as f64;
            Agent::new(id, wealth, spirit)
        })
        .collect();
    for (id, agent) in agents.iter_mut().enumerate() {
        for &neighbor in topology.neighbors(id) {
            agent.seed_contact(neighbor);
        }
    }

    let total_wealth: f64 = agents.iter().map(|agent| agent.wealth).sum();
    let center = WelfareCenter {
        wealth: config.welfare.center_initial_fraction * total_wealth,
    };

    let schedule = TaxSchedule::new(&config.tax.brackets, config.tax.exemption_threshold)?;
    let w = &config.welfare;
    let min0 = w.min_guarantee;
    let policy = WelfarePolicy {
        schedule,
        min_guarantee: min0,
        aver: w.aver,
        issuance_rates: w.issuance_rates,
        controller: ControllerState {
            surplus_streak: 0,
            rate_step: w.controller.rate_step,
            min_step: w.controller.min_step_fraction * min0,
            rate_bounds: w.controller.rate_bounds,
            min_bounds: (
                w.controller.min_bounds_fraction.0 * min0,
                w.controller.min_bounds_fraction.1 * min0,
            ),
        },
    };

    Ok(WorldState {
        topology,
        agents,
        blacklist: BlacklistRegistry::new(),
        center,
        policy,
        tick: 0,
        topology_seed,
        topology_attempts: attempts,
        config: config.clone(),
        visit_rng: stream_rng(config.seed, STREAM_VISIT),
        project_rng: stream_rng(config.seed, STREAM_PROJECT),
    })
}

impl WorldState {
    pub fn config(&self) -> &RunConfig {
        &self.config
    }
}

/// Advances the world one tick, appending this tick's project events and
/// returning the metrics record and wealth ledger.
pub fn step(
    world: &mut WorldState,
    events: &mut Vec<ProjectEvent>,
) -> Result<(MetricsRecord, TickLedger), SimError> {
    let now = world.tick;
    let n = world.agents.len();
    let game = world.config.game.clone();
    let stake_rule = StakeRule {
        invest_fraction: game.invest_fraction,
        reserve_ticks: game.reserve_ticks,
    };
    let betrayal_params = BetrayalParams {
        gamma: game.gamma,
        beta: game.beta,
        theta: game.theta,
        blacklist_multiplier: game.blacklist_multiplier,
        condition_one_uses_stake: game.condition_one_uses_stake,
    };

    let mut ledger = TickLedger::default();
    let mut projects_attempted = 0u64;
    let mut projects_succeeded = 0u64;
    let mut betrayal_count = 0u64;
    let mut invitations_issued = 0u64;
    let mut invitations_accepted = 0u64;

    world.blacklist.purge_expired(now);

    let mut order: Vec<AgentId> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(&mut order[..], &mut world.visit_rng);

    for &sponsor_id in &order {
        if world.blacklist.contains(sponsor_id, now) {
            continue;
        }
        if !world.project_rng.random_bool(game.sponsor_probability) {
            continue;
        }
        let aver = world.policy.aver;
        let sponsor_stake = decide_stake(
            world.agents[sponsor_id].wealth,
            world.agents[sponsor_id].spirit,
            aver,
            &stake_rule,
        );
        if sponsor_stake <= 0.0 {
            continue;
        }

        let invitees = eligible_invitees(
            &world.agents[sponsor_id],
            &world.agents,
            &world.blacklist,
            now,
            game.white_fraction,
            &mut world.project_rng,
        );
        invitations_issued += invitees.len() as u64;

        let omega1: f64 = world.project_rng.random_range(-10.0..=10.0);
        let omega2: f64 = world.project_rng.random_range(0.0..=100.0);
        let omega3: u64 = world.project_rng.random_range(0..=game.omega3_max);

        let proposed_mean_spirit = {
            let sum: f64 = std::iter::once(sponsor_id)
                .chain(invitees.iter().copied())
                .map(|id| world.agents[id].spirit)
                .sum();
            sum / (invitees.len() + 1) as f64
        };
        let proposed_risk = risk_score(proposed_mean_spirit, omega1, false, 0.0);
        let (proposed_gain, proposed_loss) = payoff_ratios(proposed_risk, omega2, omega3);

        let mut stakes: Vec<(AgentId, f64)> = vec![(sponsor_id, sponsor_stake)];
        for &invitee in &invitees {
            let mu = decide_stake(
                world.agents[invitee].wealth,
                world.agents[invitee].spirit,
                aver,
                &stake_rule,
            );
            if accepts_invitation(
                mu,
                proposed_risk,
                proposed_gain,
                proposed_loss,
                &world.policy.schedule,
            ) {
                stakes.push((invitee, mu));
                invitations_accepted += 1;
            }
        }

        let (solo, risk, gain_ratio, loss_ratio) = if stakes.len() == 1 {
            let solo_risk = risk_score(
                world.agents[sponsor_id].spirit,
                omega1,
                true,
                game.solo_risk_penalty,
            );
            let (solo_gain, solo_loss) = payoff_ratios(solo_risk, omega2, omega3);
            if !accepts_invitation(
                sponsor_stake,
                solo_risk,
                solo_gain,
                solo_loss,
                &world.policy.schedule,
            ) {
                continue;
            }
            (true, solo_risk, solo_gain, solo_loss)
        } else {
            let mean_spirit = stakes
                .iter()
                .map(|&(id, _)| world.agents[id].spirit)
                .sum::<f64>()
                / stakes.len() as f64;
            let risk = risk_score(mean_spirit, omega1, false, 0.0);
            let (gain, loss) = payoff_ratios(risk, omega2, omega3);
            (false, risk, gain, loss)
        };

        for &(id, mu) in &stakes {
            world.agents[id].wealth -= mu;
        }
        let project = Project {
            sponsor: sponsor_id,
            stakes,
            solo,
            risk,
            gain_ratio,
            loss_ratio,
        };
        projects_attempted += 1;
        let total_value = project.total_value();

        let outcome = if solo {
            resolve_project(&project, &mut world.project_rng)
        } else {
            let members: Vec<CoalitionMember> = project
                .stakes
                .iter()
                .map(|&(id, stake)| CoalitionMember {
                    id,
                    wealth: world.agents[id].wealth,
                    stake,
                })
                .collect();
            match select_betrayal_coalition(
                sponsor_id,
                &members,
                total_value,
                &betrayal_params,
                world.policy.aver,
                world.policy.min_guarantee,
                &mut world.project_rng,
            ) {
                Some(traitors) => Outcome::Betrayal(traitors),
                None => resolve_project(&project, &mut world.project_rng),
            }
        };

        for entry in settle(&project, &outcome, &world.policy.schedule)? {
            world.agents[entry.agent].wealth += entry.payout - entry.tax;
            world.center.wealth += entry.tax;
        }

        match &outcome {
            Outcome::Success => {
                projects_succeeded += 1;
                ledger.gains += total_value * project.gain_ratio;
            }
            Outcome::Failure => {
                ledger.losses += total_value * project.loss_ratio;
            }
            Outcome::Betrayal(traitors) => {
                betrayal_count += 1;
                for &traitor in traitors {
                    world
                        .blacklist
                        .add(traitor, now, game.blacklist_multiplier, 1)?;
                }
            }
        }

        if !matches!(outcome, Outcome::Betrayal(_)) {
            let success = matches!(outcome, Outcome::Success);
            let participants = project.participants();
            for &a in &participants {
                for &b in &participants {
                    if a != b {
                        world.agents[a].record_cooperation_result(b, success);
                    }
                }
            }
        }

        events.push(ProjectEvent {
            tick: now,
            sponsor: sponsor_id,
            solo,
            participants: project.participants(),
            stakes: project.stakes.iter().map(|&(_, mu)| mu).collect(),
            risk,
            gain_ratio,
            loss_ratio,
            outcome,
        });
    }

    let aver = world.policy.aver;
    for agent in &mut world.agents {
        agent.wealth -= aver;
    }
    ledger.consumption = n as f64 * aver;

    let due: Vec<(usize, f64)> = world
        .agents
        .iter()
        .enumerate()
        .filter_map(|(i, agent)| {
            let subsidy = compute_subsidy(agent.wealth, &world.policy);
            (subsidy > 0.0).then_some((i, subsidy))
        })
        .collect();
    let total_due: f64 = due.iter().map(|&(_, s)| s).sum();
    let scale = if total_due > world.center.wealth {
        world.center.wealth.max(0.0) / total_due
    } else {
        1.0
    };
    let mut paid_out = 0.0;
    for (i, subsidy) in due {
        let paid = subsidy * scale;
        world.agents[i].wealth += paid;
        paid_out += paid;
    }
    world.center.wealth -= paid_out;

    let projected_payout: f64 = world
        .agents
        .iter()
        .map(|agent| compute_subsidy(agent.wealth, &world.policy))
        .sum();
    if world.config.welfare.controller.enabled {
        policy_step(&mut world.policy, &world.center, projected_payout);
    }

    let poor_count = world
        .agents
        .iter()
        .filter(|agent| poverty_level(agent.wealth, world.policy.min_guarantee) > 0)
        .count() as u64;
    let record = MetricsRecord {
        tick: now,
        projects_attempted,
        projects_succeeded,
        betrayal_count,
        invitations_issued,
        invitations_accepted,
        total_agent_wealth: compensated_sum(world.agents.iter().map(|agent| agent.wealth)),
        center_wealth: world.center.wealth,
        current_rate: world.policy.schedule.top_rate(),
        current_min_guarantee: world.policy.min_guarantee,
        blacklist_size: world.blacklist.len() as u64,
        poor_count,
    };

    world.tick += 1;
    Ok((record, ledger))
}

/// Runs a configuration from a fresh world to completion.
pub fn run(config: &RunConfig) -> Result<(WorldState, RunResult), SimError> {
    let mut world = init_world(config)?;
    let mut metrics = Vec::with_capacity(config.ticks as usize);
    let mut events = Vec::new();
    let mut max_residual = 0.0f64;
    for _ in 0..config.ticks {
        let before = total_system_wealth(&world);
        let (record, ledger) = step(&mut world, &mut events)?;
        let after = total_system_wealth(&world);
        let residual = ledger_residual(before, after, &ledger).abs();
        max_residual = max_residual.max(residual);
        metrics.push(record);
    }
    let final_state_summary = FinalState {
        total_agent_wealth: compensated_sum(world.agents.iter().map(|agent| agent.wealth)),
        center_wealth: world.center.wealth,
        min_guarantee: world.policy.min_guarantee,
        top_rate: world.policy.schedule.top_rate(),
        blacklist_size: world.blacklist.len() as u64,
        poor_count: world
            .agents
            .iter()
            .filter(|agent| poverty_level(agent.wealth, world.policy.min_guarantee) > 0)
            .count() as u64,
    };
    Ok((
        world,
        RunResult {
            metrics,
            events,
            max_ledger_residual: max_residual,
            final_state_summary,
        },
    ))
}
