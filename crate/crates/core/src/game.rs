//! A single cooperative investment project: risk, payoff ratios, stake
//! sizing, the invitees' accept/decline rule, betrayal, resolution, and
//! settlement.
//!
//! Risk is the participants' mean adventurous spirit plus a uniform shock
//! in `[-10, 10]`, clamped to `[0, 100]`; solo projects carry an extra
//! penalty. On success each stake earns `gain_ratio` profit, taxed as
//! income; on failure each stake loses `loss_ratio`. An invitee accepts
//! when the expected after-tax profit on its stake is strictly positive.
//!
//! Before resolution, participants may betray: a traitor (or coalition of
//! traitors) absconds with the entire pot when every member is poor enough
//! to be tempted, the pot is large relative to the members' own stakes,
//! and the haul leaves the coalition better off than the guaranteed
//! minimum even after sitting out the blacklist. Traitors split the pot
//! evenly and everyone else loses their stake.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::agents::AgentId;
use crate::economy::TaxSchedule;
use crate::SimError;

/// Upper end of the risk scale.
pub const RISK_MAX: f64 = 100.0;

/// Largest participant count for which betrayal coalitions are found by
/// exhaustive subset search; larger projects fall back to a greedy search.
pub const EXHAUSTIVE_COALITION_LIMIT: usize = 12;

/// A funded project awaiting resolution. Stakes are the committed amounts
/// per participant, sponsor first.
#[derive(Debug, Clone, PartialEq)]
pub struct Project {
    pub sponsor: AgentId,
    pub stakes: Vec<(AgentId, f64)>,
    pub solo: bool,
    pub risk: f64,
    pub gain_ratio: f64,
    pub loss_ratio: f64,
}

impl Project {
    /// Sum of all committed stakes.
    pub fn total_value(&self) -> f64 {
        self.stakes.iter().map(|&(_, stake)| stake).sum()
    }

    pub fn stake_of(&self, id: AgentId) -> Option<f64> {
        self.stakes
            .iter()
            .find(|&&(member, _)| member == id)
            .map(|&(_, stake)| stake)
    }

    pub fn participants(&self) -> Vec<AgentId> {
        self.stakes.iter().map(|&(id, _)| id).collect()
    }
}

/// How a project ended.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Success,
    Failure,
    /// The listed participants absconded with the pot.
    Betrayal(Vec<AgentId>),
}

impl Outcome {
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Failure => "failure",
            Outcome::Betrayal(_) => "betrayal",
        }
    }
}

/// Knobs of the betrayal decision.
#[derive(Debug, Clone, PartialEq)]
pub struct BetrayalParams {
    /// Poverty multiplier: a member tempts fate only while its wealth is
    /// below `gamma * aver`.
    pub gamma: f64,
    /// Pot multiplier: the pot must reach `beta` times the member's own
    /// stake (summed stakes for a coalition).
    pub beta: f64,
    /// Consumption multiplier per blacklisted tick.
    pub theta: u32,
    /// Blacklist length in ticks; must exceed 10.
    pub blacklist_multiplier: u32,
    /// When set, the poverty test reads the member's stake instead of its
    /// wealth.
    pub condition_one_uses_stake: bool,
}

/// Stake sizing policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StakeRule {
    /// Fraction of the spirit-weighted wealth an agent is willing to
    /// commit.
    pub invest_fraction: f64,
    /// Ticks of subsistence consumption kept liquid and never staked.
    pub reserve_ticks: f64,
}

/// Risk from already-drawn noise: mean spirit plus shock, plus the solo
/// penalty when applicable, clamped to `[0, 100]`.
pub fn risk_score(mean_spirit: f64, omega1: f64, solo: bool, solo_penalty: f64) -> f64 {
    let mut risk = mean_spirit + omega1;
    if solo {
        risk += solo_penalty;
    }
    risk.clamp(0.0, RISK_MAX)
}

/// Risk for a participant set, drawing the shock from `rng`.
pub fn project_risk<R: Rng>(spirits: &[f64], solo: bool, solo_penalty: f64, rng: &mut R) -> f64 {
    debug_assert!(!spirits.is_empty());
    let mean = spirits.iter().sum::<f64>() / spirits.len() as f64;
    let omega1 = rng.random_range(-10.0..=10.0);
    risk_score(mean, omega1, solo, solo_penalty)
}

/// Gain and loss ratios from already-drawn noise.
///
/// `gain = (risk + omega2) / 100` with `omega2` in `[0, 100]`;
/// `loss = (risk + omega3 mod (round(risk) + 1)) / 200` with `omega3` a
/// non-negative integer, so the loss ratio never exceeds 1.
pub fn payoff_ratios(risk: f64, omega2: f64, omega3: u64) -> (f64, f64) {
    debug_assert!((0.0..=RISK_MAX).contains(&risk));
    debug_assert!((0.0..=100.0).contains(&omega2));
    let gain = (risk + omega2) * 0.01;
    let modulus = risk.round() as u64 + 1;
    let loss = (risk + (omega3 % modulus) as f64) * 0.005;
    (gain, loss)
}

/// Payoff ratios with both shocks drawn from `rng`.
pub fn project_payoff_ratios<R: Rng>(risk: f64, omega3_max: u64, rng: &mut R) -> (f64, f64) {
    let omega2 = rng.random_range(0.0..=100.0);
    let omega3 = rng.random_range(0..=omega3_max);
    payoff_ratios(risk, omega2, omega3)
}

/// Probability that a project of the given risk succeeds.
pub fn success_probability(risk: f64) -> f64 {
    (RISK_MAX - risk) / 100.0
}

/// Expected after-tax profit on a stake of `mu`: with probability `alpha`
/// the stake earns `mu * gain` taxed at marginal rate `eta` less the quick
/// deduction `delta`; otherwise it loses `mu * loss`.
pub fn expected_profit(mu: f64, alpha: f64, gain: f64, loss: f64, eta: f64, delta: f64) -> f64 {
    alpha * (mu * gain * (1.0 - eta) + delta) - mu * (1.0 - alpha) * loss
}

/// Whether an invitee with stake `mu` joins a project, judging the already
/// drawn risk and ratios against the tax it would owe on the gross profit.
pub fn accepts_invitation(
    mu: f64,
    risk: f64,
    gain: f64,
    loss: f64,
    schedule: &TaxSchedule,
) -> bool {
    if mu <= 0.0 {
        return false;
    }
    let alpha = success_probability(risk);
    let (eta, delta) = schedule.marginal_at(mu * gain);
    expected_profit(mu, alpha, gain, loss, eta, delta) > 0.0
}

/// Stake an agent is willing to commit: spirit-weighted wealth times the
/// invest fraction, capped so that `reserve_ticks` ticks of consumption
/// stay liquid. Never negative.
pub fn decide_stake(wealth: f64, spirit: f64, aver: f64, rule: &StakeRule) -> f64 {
    let cap = wealth - rule.reserve_ticks * aver;
    if cap <= 0.0 {
        return 0.0;
    }
    (wealth * (spirit / 100.0) * rule.invest_fraction).clamp(0.0, cap)
}

fn condition_one_value(wealth: f64, stake: f64, params: &BetrayalParams) -> f64 {
    if params.condition_one_uses_stake {
        stake
    } else {
        wealth
    }
}

/// Whether a lone participant would betray. All three conditions must
/// hold: poverty (`value < gamma * aver`), a pot worth at least `beta`
/// times its own stake, and a post-blacklist surplus strictly above the
/// guaranteed minimum, where sitting out the blacklist costs
/// `theta * aver` per tick for `blacklist_multiplier` ticks.
pub fn check_individual_betrayal(
    wealth: f64,
    stake: f64,
    total_value: f64,
    params: &BetrayalParams,
    aver: f64,
    min_guarantee: f64,
) -> bool {
    let poor = condition_one_value(wealth, stake, params) < params.gamma * aver;
    let pot_worth_it = total_value >= params.beta * stake;
    let surplus = (total_value + wealth)
        - (params.theta as f64 * aver) * params.blacklist_multiplier as f64;
    poor && pot_worth_it && surplus > min_guarantee
}

/// Whether a coalition betrays together. `members` holds each coalition
/// member's `(wealth, stake)`. The poverty test applies to the richest
/// member, the pot must reach `beta` times the coalition's summed stakes,
/// and the shared surplus must exceed `min_guarantee` per member after
/// every member sits out the blacklist.
pub fn check_group_betrayal(
    members: &[(f64, f64)],
    total_value: f64,
    params: &BetrayalParams,
    aver: f64,
    min_guarantee: f64,
) -> bool {
    if members.is_empty() {
        return false;
    }
    let d = members.len() as f64;
    let richest = members
        .iter()
        .map(|&(wealth, stake)| condition_one_value(wealth, stake, params))
        .fold(f64::NEG_INFINITY, f64::max);
    let stake_sum: f64 = members.iter().map(|&(_, stake)| stake).sum();
    let wealth_sum: f64 = members.iter().map(|&(wealth, _)| wealth).sum();
    let poor = richest < params.gamma * aver;
    let pot_worth_it = total_value >= params.beta * stake_sum;
    let surplus = (total_value + wealth_sum)
        - (params.theta as f64 * aver * d) * params.blacklist_multiplier as f64;
    poor && pot_worth_it && surplus > min_guarantee * d
}

/// One project participant as seen by the betrayal search, with its wealth
/// after committing its stake.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoalitionMember {
    pub id: AgentId,
    pub wealth: f64,
    pub stake: f64,
}

/// Finds the traitors of a group project, if any.
///
/// Non-sponsor members are first tested individually in seeded random
/// order; the first one for which [`check_individual_betrayal`] passes
/// betrays alone. Otherwise every subset of the poverty-eligible members
/// (sponsor included) is tested with [`check_group_betrayal`]; among the
/// passing subsets the largest wins, ties broken by the greater shared
/// surplus and then by the lexicographically smallest id list. Projects
/// with more than [`EXHAUSTIVE_COALITION_LIMIT`] participants are searched
/// greedily instead: starting from all eligible members, the largest-stake
/// member is dropped until the remaining coalition passes or empties.
pub fn select_betrayal_coalition<R: Rng>(
    sponsor: AgentId,
    members: &[CoalitionMember],
    total_value: f64,
    params: &BetrayalParams,
    aver: f64,
    min_guarantee: f64,
    rng: &mut R,
) -> Option<Vec<AgentId>> {
    let mut solo_order: Vec<usize> = (0..members.len())
        .filter(|&i| members[i].id != sponsor)
        .collect();
    solo_order.shuffle(rng);
    for i in solo_order {
        let m = members[i];
        if check_individual_betrayal(m.wealth, m.stake, total_value, params, aver, min_guarantee)
        {
            return Some(vec![m.id]);
        }
    }

    let eligible: Vec<usize> = (0..members.len())
        .filter(|&i| {
            condition_one_value(members[i].wealth, members[i].stake, params)
                < params.gamma * aver
        })
        .collect();
    if eligible.is_empty() {
        return None;
    }

    if members.len() <= EXHAUSTIVE_COALITION_LIMIT {
        let mut best: Option<(usize, f64, Vec<AgentId>)> = None;
        for mask in 1u32..(1 << eligible.len()) {
            let subset: Vec<CoalitionMember> = eligible
                .iter()
                .enumerate()
                .filter(|&(bit, _)| mask & (1 << bit) != 0)
                .map(|(_, &i)| members[i])
                .collect();
            let pairs: Vec<(f64, f64)> =
                subset.iter().map(|m| (m.wealth, m.stake)).collect();
            if !check_group_betrayal(&pairs, total_value, params, aver, min_guarantee) {
                continue;
            }
            let d = subset.len();
            let wealth_sum: f64 = subset.iter().map(|m| m.wealth).sum();
            let surplus = (total_value + wealth_sum)
                - (params.theta as f64 * aver * d as f64)
                    * params.blacklist_multiplier as f64;
            let mut ids: Vec<AgentId> = subset.iter().map(|m| m.id).collect();
            ids.sort_unstable();
            let better = match &best {
                None => true,
                Some((bd, bs, bids)) => {
                    d > *bd || (d == *bd && (surplus > *bs || (surplus == *bs && ids < *bids)))
                }
            };
            if better {
                best = Some((d, surplus, ids));
            }
        }
        best.map(|(_, _, ids)| ids)
    } else {
        let mut pool: Vec<CoalitionMember> = eligible.iter().map(|&i| members[i]).collect();
        pool.sort_by(|a, b| {
            a.stake
                .partial_cmp(&b.stake)
                .expect("stakes are finite")
                .then(a.id.cmp(&b.id))
        });
        while !pool.is_empty() {
            let pairs: Vec<(f64, f64)> = pool.iter().map(|m| (m.wealth, m.stake)).collect();
            if check_group_betrayal(&pairs, total_value, params, aver, min_guarantee) {
                let mut ids: Vec<AgentId> = pool.iter().map(|m| m.id).collect();
                ids.sort_unstable();
                return Some(ids);
            }
            pool.pop();
        }
        None
    }
}

/// Draws the success check: uniform `u` in `[0, 100)` succeeds when it
/// exceeds the risk, so higher risk fails more often and risk 100 always
/// fails.
pub fn resolve_project<R: Rng>(project: &Project, rng: &mut R) -> Outcome {
    let u = rng.random_range(0.0..100.0);
    if u > project.risk {
        Outcome::Success
    } else {
        Outcome::Failure
    }
}

/// One participant's settlement: the gross amount returned to it and the
/// tax owed to the welfare centre.
#[derive(Debug, Clone, PartialEq)]
pub struct Settlement {
    pub agent: AgentId,
    pub payout: f64,
    pub tax: f64,
}

/// Settles a resolved project.
///
/// Success returns each stake with its profit, taxing the profit alone.
/// Failure returns the loss-reduced stake untaxed. Betrayal hands the
/// traitors the whole pot in equal shares, untaxed, and everyone else
/// nothing.
pub fn settle(
    project: &Project,
    outcome: &Outcome,
    schedule: &TaxSchedule,
) -> Result<Vec<Settlement>, SimError> {
    match outcome {
        Outcome::Success => Ok(project
            .stakes
            .iter()
            .map(|&(agent, mu)| Settlement {
                agent,
                payout: mu * (1.0 + project.gain_ratio),
                tax: schedule.tax(mu * project.gain_ratio),
            })
            .collect()),
        Outcome::Failure => Ok(project
            .stakes
            .iter()
            .map(|&(agent, mu)| Settlement {
                agent,
                payout: mu * (1.0 - project.loss_ratio),
                tax: 0.0,
            })
            .collect()),
        Outcome::Betrayal(traitors) => {
            if traitors.is_empty() {
                return Err(SimError::InconsistentOutcome(
                    "betrayal with no traitors".into(),
                ));
            }
            for t in traitors {
                if project.stake_of(*t).is_none() {
                    return Err(SimError::InconsistentOutcome(format!(
                        "traitor {t} is not a participant"
                    )));
                }
            }
            let share = project.total_value() / traitors.len() as f64;
            Ok(project
                .stakes
                .iter()
                .map(|&(agent, _)| Settlement {
                    agent,
                    payout: if traitors.contains(&agent) { share } else { 0.0 },
                    tax: 0.0,
                })
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn flat_schedule(rate: f64) -> TaxSchedule {
        TaxSchedule::new(&[(0.0, rate)], 0.0).unwrap()
    }

    fn betrayal_params() -> BetrayalParams {
        BetrayalParams {
            gamma: 10.0,
            beta: 3.0,
            theta: 1,
            blacklist_multiplier: 11,
            condition_one_uses_stake: false,
        }
    }

    #[test]
    fn risk_is_clamped_mean_spirit_plus_shock() {
        assert_abs_diff_eq!(risk_score(50.0, 7.5, false, 10.0), 57.5);
        assert_abs_diff_eq!(risk_score(50.0, 7.5, true, 10.0), 67.5);
        assert_abs_diff_eq!(risk_score(97.0, 8.0, false, 0.0), 100.0);
        assert_abs_diff_eq!(risk_score(3.0, -8.0, false, 0.0), 0.0);
    }

    #[test]
    fn payoff_ratio_formulas_match_worked_values() {
        let (gain, loss) = payoff_ratios(60.0, 40.0, 123);
        assert_abs_diff_eq!(gain, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(loss, (60.0 + (123 % 61) as f64) * 0.005, epsilon = 1e-12);
        let (gain, loss) = payoff_ratios(0.0, 0.0, 987);
        assert_abs_diff_eq!(gain, 0.0);
        assert_abs_diff_eq!(loss, 0.0);
    }

    #[test]
    fn expected_profit_matches_hand_computation() {
        let mu = 100.0;
        let alpha = 0.6;
        let (gain, loss) = (0.9, 0.2);
        let (eta, delta) = (0.1, 0.0);
        assert_abs_diff_eq!(
            expected_profit(mu, alpha, gain, loss, eta, delta),
            0.6 * (100.0 * 0.9 * 0.9) - 100.0 * 0.4 * 0.2,
            epsilon = 1e-12
        );
    }

    #[test]
    fn zero_stake_invitee_declines() {
        let s = flat_schedule(0.1);
        assert!(!accepts_invitation(0.0, 20.0, 1.0, 0.1, &s));
        assert!(accepts_invitation(10.0, 20.0, 1.0, 0.1, &s));
    }

    #[test]
    fn hopeless_odds_are_declined() {
        let s = flat_schedule(0.1);
        assert!(!accepts_invitation(10.0, 100.0, 1.5, 0.5, &s));
    }

    #[test]
    fn stake_is_spirit_weighted_and_reserve_capped() {
        let rule = StakeRule {
            invest_fraction: 0.5,
            reserve_ticks: 0.0,
        };
        assert_abs_diff_eq!(decide_stake(100.0, 50.0, 1.0, &rule), 25.0);
        assert_abs_diff_eq!(decide_stake(100.0, 0.0, 1.0, &rule), 0.0);
        let capped = StakeRule {
            invest_fraction: 0.5,
            reserve_ticks: 90.0,
        };
        assert_abs_diff_eq!(decide_stake(100.0, 50.0, 1.0, &capped), 10.0);
        assert_abs_diff_eq!(decide_stake(50.0, 80.0, 1.0, &capped), 0.0);
    }

    #[test]
    fn individual_betrayal_needs_all_three_conditions() {
        let p = betrayal_params();
        let aver = 1.0;
        let min = 9.0;
        assert!(check_individual_betrayal(5.0, 2.0, 30.0, &p, aver, min));
        assert!(!check_individual_betrayal(15.0, 2.0, 30.0, &p, aver, min));
        assert!(!check_individual_betrayal(5.0, 12.0, 30.0, &p, aver, min));
        assert!(!check_individual_betrayal(5.0, 2.0, 14.9, &p, aver, min));
        assert!(!check_individual_betrayal(5.0, 0.5, 2.0, &p, aver, min));
    }

    #[test]
    fn empty_pot_never_tempts_a_staked_member() {
        let p = betrayal_params();
        assert!(!check_individual_betrayal(5.0, 2.0, 0.0, &p, 1.0, 0.0));
    }

    #[test]
    fn surplus_threshold_is_strict() {
        let p = betrayal_params();
        let aver = 1.0;
        let min = 9.0;
        let wealth = 5.0;
        let boundary_pot = min + 11.0 - wealth;
        assert!(!check_individual_betrayal(wealth, 1.0, boundary_pot, &p, aver, min));
        assert!(check_individual_betrayal(
            wealth,
            1.0,
            boundary_pot + 1e-9,
            &p,
            aver,
            min
        ));
    }

    #[test]
    fn stake_reading_of_the_poverty_test_changes_eligibility() {
        let mut p = betrayal_params();
        assert!(!check_individual_betrayal(50.0, 2.0, 90.0, &p, 1.0, 9.0));
        p.condition_one_uses_stake = true;
        assert!(check_individual_betrayal(50.0, 2.0, 90.0, &p, 1.0, 9.0));
    }

    proptest! {
        #[test]
        fn singleton_group_equals_individual_check(
            wealth in -20.0f64..60.0,
            stake in 0.0f64..40.0,
            total in 0.0f64..200.0,
            gamma in 1.0f64..20.0,
            beta in 1.0f64..5.0,
            theta in 1u32..4,
            multiplier in 11u32..30,
            aver in 0.1f64..4.0,
            min in 0.0f64..20.0,
            uses_stake in any::<bool>(),
        ) {
            let p = BetrayalParams {
                gamma,
                beta,
                theta,
                blacklist_multiplier: multiplier,
                condition_one_uses_stake: uses_stake,
            };
            prop_assert_eq!(
                check_group_betrayal(&[(wealth, stake)], total, &p, aver, min),
                check_individual_betrayal(wealth, stake, total, &p, aver, min)
            );
        }

        #[test]
        fn ratios_stay_in_their_documented_ranges(
            risk in 0.0f64..=100.0,
            omega2 in 0.0f64..=100.0,
            omega3 in any::<u64>(),
        ) {
            let (gain, loss) = payoff_ratios(risk, omega2, omega3);
            prop_assert!((0.0..=2.0).contains(&gain));
            prop_assert!((0.0..=1.0).contains(&loss));
        }

        #[test]
        fn settlement_conserves_the_pot_under_betrayal(
            stakes in proptest::collection::vec(0.1f64..50.0, 2..7),
            traitor_mask in 1u32..64,
        ) {
            let stakes: Vec<(AgentId, f64)> = stakes
                .into_iter()
                .enumerate()
                .collect();
            let traitors: Vec<AgentId> = stakes
                .iter()
                .filter(|&&(id, _)| traitor_mask & (1 << id) != 0)
                .map(|&(id, _)| id)
                .collect();
            prop_assume!(!traitors.is_empty());
            let project = Project {
                sponsor: 0,
                stakes: stakes.clone(),
                solo: false,
                risk: 50.0,
                gain_ratio: 1.0,
                loss_ratio: 0.5,
            };
            let outcome = Outcome::Betrayal(traitors);
            let schedule = flat_schedule(0.3);
            let entries = settle(&project, &outcome, &schedule).unwrap();
            let paid: f64 = entries.iter().map(|e| e.payout).sum();
            prop_assert!((paid - project.total_value()).abs() < 1e-9);
            prop_assert!(entries.iter().all(|e| e.tax == 0.0));
        }
    }

    #[test]
    fn success_settlement_pays_profit_and_taxes_it() {
        let project = Project {
            sponsor: 0,
            stakes: vec![(0, 100.0), (1, 50.0)],
            solo: false,
            risk: 40.0,
            gain_ratio: 0.5,
            loss_ratio: 0.2,
        };
        let schedule = flat_schedule(0.1);
        let entries = settle(&project, &Outcome::Success, &schedule).unwrap();
        assert_abs_diff_eq!(entries[0].payout, 150.0, epsilon = 1e-12);
        assert_abs_diff_eq!(entries[0].tax, 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(entries[1].payout, 75.0, epsilon = 1e-12);
        assert_abs_diff_eq!(entries[1].tax, 2.5, epsilon = 1e-12);
    }

    #[test]
    fn failure_settlement_returns_reduced_stakes_untaxed() {
        let project = Project {
            sponsor: 0,
            stakes: vec![(0, 100.0), (1, 50.0)],
            solo: false,
            risk: 40.0,
            gain_ratio: 0.5,
            loss_ratio: 0.2,
        };
        let schedule = flat_schedule(0.1);
        let entries = settle(&project, &Outcome::Failure, &schedule).unwrap();
        assert_abs_diff_eq!(entries[0].payout, 80.0, epsilon = 1e-12);
        assert_abs_diff_eq!(entries[1].payout, 40.0, epsilon = 1e-12);
        assert!(entries.iter().all(|e| e.tax == 0.0));
    }

    #[test]
    fn settlement_rejects_inconsistent_traitor_lists() {
        let project = Project {
            sponsor: 0,
            stakes: vec![(0, 100.0), (1, 50.0)],
            solo: false,
            risk: 40.0,
            gain_ratio: 0.5,
            loss_ratio: 0.2,
        };
        let schedule = flat_schedule(0.1);
        assert!(settle(&project, &Outcome::Betrayal(vec![]), &schedule).is_err());
        assert!(settle(&project, &Outcome::Betrayal(vec![7]), &schedule).is_err());
    }

    #[test]
    fn resolution_is_deterministic_given_the_rng_and_extreme_at_the_ends() {
        let mut certain = Project {
            sponsor: 0,
            stakes: vec![(0, 10.0)],
            solo: true,
            risk: 0.0,
            gain_ratio: 0.5,
            loss_ratio: 0.1,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            assert_eq!(resolve_project(&certain, &mut rng), Outcome::Success);
        }
        certain.risk = 100.0;
        for _ in 0..50 {
            assert_eq!(resolve_project(&certain, &mut rng), Outcome::Failure);
        }
    }

    /// Exhaustive reference search over every subset of participants,
    /// mirroring the documented selection rule with no shared code.
    fn oracle_best_coalition(
        members: &[CoalitionMember],
        total: f64,
        params: &BetrayalParams,
        aver: f64,
        min: f64,
    ) -> Vec<Vec<AgentId>> {
        let mut passing = Vec::new();
        for mask in 1u32..(1 << members.len()) {
            let subset: Vec<CoalitionMember> = members
                .iter()
                .enumerate()
                .filter(|&(i, _)| mask & (1 << i) != 0)
                .map(|(_, &m)| m)
                .collect();
            let pairs: Vec<(f64, f64)> = subset.iter().map(|m| (m.wealth, m.stake)).collect();
            if check_group_betrayal(&pairs, total, params, aver, min) {
                let mut ids: Vec<AgentId> = subset.iter().map(|m| m.id).collect();
                ids.sort_unstable();
                passing.push(ids);
            }
        }
        passing
    }

    #[test]
    fn coalition_search_agrees_with_subset_enumeration() {
        let params = betrayal_params();
        let aver = 1.0;
        let min = 9.0;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut betrayals = 0;
        for _ in 0..300 {
            let count = rng.random_range(2..=6);
            let members: Vec<CoalitionMember> = (0..count)
                .map(|id| CoalitionMember {
                    id,
                    wealth: rng.random_range(0.0..20.0),
                    stake: rng.random_range(0.0..10.0),
                })
                .collect();
            let total: f64 = members.iter().map(|m| m.stake).sum();
            let passing = oracle_best_coalition(&members, total, &params, aver, min);
            let individual_exists = members.iter().any(|m| {
                m.id != 0
                    && check_individual_betrayal(m.wealth, m.stake, total, &params, aver, min)
            });
            let chosen = select_betrayal_coalition(
                0, &members, total, &params, aver, min, &mut rng,
            );
            match chosen {
                Some(ids) => {
                    betrayals += 1;
                    assert!(
                        individual_exists || passing.contains(&ids),
                        "chosen {ids:?} not justified by enumeration"
                    );
                }
                None => {
                    assert!(passing.is_empty() && !individual_exists);
                }
            }
        }
        assert!(betrayals > 0, "scenario generator produced no betrayals");
    }

    #[test]
    fn individual_phase_preempts_the_group_search() {
        let params = betrayal_params();
        let members = vec![
            CoalitionMember { id: 0, wealth: 4.0, stake: 1.0 },
            CoalitionMember { id: 1, wealth: 5.0, stake: 1.0 },
            CoalitionMember { id: 2, wealth: 6.0, stake: 1.0 },
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let chosen =
            select_betrayal_coalition(99, &members, 60.0, &params, 1.0, 9.0, &mut rng).unwrap();
        assert_eq!(chosen.len(), 1);
        let chosen = select_betrayal_coalition(0, &members, 14.0, &params, 1.0, 9.0, &mut rng);
        assert_eq!(chosen, None);
    }

    #[test]
    fn sponsor_can_betray_through_the_group_phase() {
        let params = betrayal_params();
        let members = vec![
            CoalitionMember { id: 0, wealth: 6.0, stake: 1.0 },
            CoalitionMember { id: 1, wealth: 4.0, stake: 10.0 },
            CoalitionMember { id: 2, wealth: 5.0, stake: 10.0 },
        ];
        let total = 21.0;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let chosen =
            select_betrayal_coalition(0, &members, total, &params, 1.0, 9.0, &mut rng);
        assert_eq!(chosen, Some(vec![0]));
    }

    #[test]
    fn greedy_search_handles_large_projects() {
        let params = betrayal_params();
        let mut members: Vec<CoalitionMember> = (1..EXHAUSTIVE_COALITION_LIMIT + 3)
            .map(|id| CoalitionMember {
                id,
                wealth: 15.0,
                stake: 1.5,
            })
            .collect();
        members.insert(
            0,
            CoalitionMember {
                id: 0,
                wealth: 5.0,
                stake: 1.5,
            },
        );
        assert!(members.len() > EXHAUSTIVE_COALITION_LIMIT);
        let total: f64 = members.iter().map(|m| m.stake).sum();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let chosen =
            select_betrayal_coalition(0, &members, total, &params, 1.0, 9.0, &mut rng);
        assert_eq!(chosen, Some(vec![0]));
    }
}
