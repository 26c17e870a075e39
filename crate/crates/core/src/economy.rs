//! Progressive taxation, tiered poverty relief, and the welfare fund's
//! feedback controller.
//!
//! Taxes use bracket-level rates with precomputed quick deductions: the tax
//! on an income in bracket `j` is `income * rate_j - deduction_j`, where the
//! deductions are chosen so the schedule is continuous across bracket
//! boundaries. Incomes below an exemption threshold pay nothing, which is
//! the schedule's only discontinuity.
//!
//! Poverty relief recognises three need levels below the guaranteed minimum
//! `m`: level 1 below `m/3`, level 2 in `[m/3, 2m/3)`, level 3 in
//! `[2m/3, m)`. A subsidy covers a level-dependent share of the gap up to
//! `m`, paid from the central fund.
//!
//! The controller compares the fund's balance against the upcoming subsidy
//! bill each tick. A shortfall lowers the guaranteed minimum one step and
//! raises every bracket rate one step; ten consecutive surplus ticks do the
//! reverse. Both quantities are clamped to configured bounds.

use crate::SimError;

/// Number of poverty levels below the guaranteed minimum.
pub const POVERTY_LEVELS: usize = 3;

/// Consecutive surplus ticks required before the controller relaxes rates
/// and raises the guaranteed minimum.
pub const SURPLUS_STREAK_TRIGGER: u32 = 10;

/// One tax bracket: incomes at or above `lower` (and below the next
/// bracket's `lower`) are taxed at `rate` with `quick_deduction` subtracted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaxBracket {
    pub lower: f64,
    pub rate: f64,
    pub quick_deduction: f64,
}

/// A progressive tax schedule with an exemption threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct TaxSchedule {
    brackets: Vec<TaxBracket>,
    exemption_threshold: f64,
}

impl TaxSchedule {
    /// Builds a schedule from `(lower_bound, rate)` pairs sorted by bound.
    ///
    /// The first bound must be zero, bounds must be strictly increasing,
    /// and rates must lie in `[0, 1]`. Quick deductions are derived so that
    /// `income * rate_j - deduction_j` is continuous at every boundary:
    /// `deduction_j = lower_j * (rate_j - rate_{j-1}) + deduction_{j-1}`.
    pub fn new(rate_table: &[(f64, f64)], exemption_threshold: f64) -> Result<Self, SimError> {
        if rate_table.is_empty() {
            return Err(SimError::InvalidParams(
                "tax schedule needs at least one bracket".into(),
            ));
        }
        if rate_table[0].0 != 0.0 {
            return Err(SimError::InvalidParams(format!(
                "first bracket must start at 0, got {}",
                rate_table[0].0
            )));
        }
        for w in rate_table.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(SimError::InvalidParams(format!(
                    "bracket bounds must be strictly increasing, got {} then {}",
                    w[0].0, w[1].0
                )));
            }
        }
        for &(lower, rate) in rate_table {
            if !lower.is_finite() || !rate.is_finite() || !(0.0..=1.0).contains(&rate) {
                return Err(SimError::InvalidParams(format!(
                    "bracket ({lower}, {rate}) must have a finite bound and a rate in [0, 1]"
                )));
            }
        }
        if !exemption_threshold.is_finite() || exemption_threshold < 0.0 {
            return Err(SimError::InvalidParams(format!(
                "exemption threshold must be finite and non-negative, got {exemption_threshold}"
            )));
        }
        let mut schedule = TaxSchedule {
            brackets: rate_table
                .iter()
                .map(|&(lower, rate)| TaxBracket {
                    lower,
                    rate,
                    quick_deduction: 0.0,
                })
                .collect(),
            exemption_threshold,
        };
        schedule.recompute_deductions();
        Ok(schedule)
    }

    fn recompute_deductions(&mut self) {
        for j in 1..self.brackets.len() {
            let prev = self.brackets[j - 1];
            self.brackets[j].quick_deduction =
                self.brackets[j].lower * (self.brackets[j].rate - prev.rate)
                    + prev.quick_deduction;
        }
        if let Some(first) = self.brackets.first_mut() {
            first.quick_deduction = 0.0;
        }
    }

    fn bracket_for(&self, income: f64) -> &TaxBracket {
        self.brackets
            .iter()
            .rev()
            .find(|b| b.lower <= income)
            .unwrap_or(&self.brackets[0])
    }

    /// Tax owed on a non-negative income. Zero below the exemption
    /// threshold, otherwise the containing bracket's `income * rate -
    /// quick_deduction`.
    pub fn tax(&self, income: f64) -> f64 {
        debug_assert!(income >= 0.0 && income.is_finite());
        if income < self.exemption_threshold {
            return 0.0;
        }
        let b = self.bracket_for(income);
        income * b.rate - b.quick_deduction
    }

    /// The `(rate, quick_deduction)` pair that [`TaxSchedule::tax`] would
    /// apply to `income`; `(0, 0)` below the exemption threshold.
    pub fn marginal_at(&self, income: f64) -> (f64, f64) {
        if income < self.exemption_threshold {
            return (0.0, 0.0);
        }
        let b = self.bracket_for(income);
        (b.rate, b.quick_deduction)
    }

    /// Shifts every bracket rate by `delta`, clamping each into
    /// `[bounds.0, bounds.1]`, then rebuilds the quick deductions.
    pub fn adjust_rates(&mut self, delta: f64, bounds: (f64, f64)) {
        for b in &mut self.brackets {
            b.rate = (b.rate + delta).clamp(bounds.0, bounds.1);
        }
        self.recompute_deductions();
    }

    pub fn brackets(&self) -> &[TaxBracket] {
        &self.brackets
    }

    pub fn exemption_threshold(&self) -> f64 {
        self.exemption_threshold
    }

    /// Rate of the highest bracket.
    pub fn top_rate(&self) -> f64 {
        self.brackets.last().expect("schedule is never empty").rate
    }
}

/// Poverty level for `wealth` against guaranteed minimum `min_guarantee`:
/// 0 means not poor, 1 is the most severe level, 3 the least severe.
pub fn poverty_level(wealth: f64, min_guarantee: f64) -> u8 {
    debug_assert!(min_guarantee > 0.0);
    if wealth >= min_guarantee {
        0
    } else if wealth >= min_guarantee * (2.0 / 3.0) {
        3
    } else if wealth >= min_guarantee / 3.0 {
        2
    } else {
        1
    }
}

/// Mutable knobs of the feedback controller.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    /// Consecutive ticks the fund covered the projected subsidy bill.
    pub surplus_streak: u32,
    /// Additive step applied to every bracket rate on adjustment.
    pub rate_step: f64,
    /// Additive step applied to the guaranteed minimum on adjustment.
    pub min_step: f64,
    /// Inclusive clamp for bracket rates.
    pub rate_bounds: (f64, f64),
    /// Inclusive clamp for the guaranteed minimum.
    pub min_bounds: (f64, f64),
}

/// The welfare centre's full policy position: tax schedule, guaranteed
/// minimum, per-tick subsistence consumption, and subsidy issuance rates
/// for the three poverty levels (most severe first).
#[derive(Debug, Clone, PartialEq)]
pub struct WelfarePolicy {
    pub schedule: TaxSchedule,
    pub min_guarantee: f64,
    pub aver: f64,
    pub issuance_rates: [f64; POVERTY_LEVELS],
    pub controller: ControllerState,
}

/// The central fund's balance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelfareCenter {
    pub wealth: f64,
}

/// Subsidy owed to an agent: the issuance rate for its poverty level times
/// the gap up to the guaranteed minimum. Zero for agents at or above it.
pub fn compute_subsidy(wealth: f64, policy: &WelfarePolicy) -> f64 {
    let level = poverty_level(wealth, policy.min_guarantee);
    if level == 0 {
        return 0.0;
    }
    policy.issuance_rates[level as usize - 1] * (policy.min_guarantee - wealth)
}

/// One controller update, given the fund balance and the projected subsidy
/// bill for the next tick.
///
/// Shortfall (`balance < projected`): the guaranteed minimum drops one step,
/// every rate rises one step, and the surplus streak resets. Otherwise the
/// streak grows, and on reaching [`SURPLUS_STREAK_TRIGGER`] the adjustments
/// reverse and the streak resets.
pub fn policy_step(policy: &mut WelfarePolicy, center: &WelfareCenter, projected_payout: f64) {
    let rate_step = policy.controller.rate_step;
    let min_step = policy.controller.min_step;
    let rate_bounds = policy.controller.rate_bounds;
    let min_bounds = policy.controller.min_bounds;
    if center.wealth < projected_payout {
        policy.min_guarantee = (policy.min_guarantee - min_step).clamp(min_bounds.0, min_bounds.1);
        policy.schedule.adjust_rates(rate_step, rate_bounds);
        policy.controller.surplus_streak = 0;
    } else {
        policy.controller.surplus_streak += 1;
        if policy.controller.surplus_streak >= SURPLUS_STREAK_TRIGGER {
            policy.schedule.adjust_rates(-rate_step, rate_bounds);
            policy.min_guarantee =
                (policy.min_guarantee + min_step).clamp(min_bounds.0, min_bounds.1);
            policy.controller.surplus_streak = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Tax computed by summing each bracket's marginal contribution, kept
    /// deliberately separate from the quick-deduction route.
    pub(crate) fn piecewise_marginal_tax(
        rate_table: &[(f64, f64)],
        exemption_threshold: f64,
        income: f64,
    ) -> f64 {
        if income < exemption_threshold {
            return 0.0;
        }
        let mut tax = 0.0;
        for (j, &(lower, rate)) in rate_table.iter().enumerate() {
            let upper = rate_table
                .get(j + 1)
                .map(|&(next, _)| next)
                .unwrap_or(f64::INFINITY);
            if income > lower {
                tax += (income.min(upper) - lower) * rate;
            }
        }
        tax
    }

    fn two_bracket() -> TaxSchedule {
        TaxSchedule::new(&[(0.0, 0.10), (500.0, 0.20)], 0.0).unwrap()
    }

    #[test]
    fn quick_deductions_follow_the_recurrence() {
        let s = two_bracket();
        assert_abs_diff_eq!(s.brackets()[0].quick_deduction, 0.0);
        assert_abs_diff_eq!(s.brackets()[1].quick_deduction, 50.0);
    }

    #[test]
    fn tax_matches_the_worked_example() {
        let s = two_bracket();
        assert_abs_diff_eq!(s.tax(800.0), 110.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            piecewise_marginal_tax(&[(0.0, 0.10), (500.0, 0.20)], 0.0, 800.0),
            110.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn exemption_threshold_zeroes_small_incomes() {
        let s = TaxSchedule::new(&[(0.0, 0.10), (500.0, 0.20)], 100.0).unwrap();
        assert_abs_diff_eq!(s.tax(99.0), 0.0);
        assert_abs_diff_eq!(s.tax(100.0), 10.0, epsilon = 1e-12);
        assert_eq!(s.marginal_at(99.0), (0.0, 0.0));
        assert_eq!(s.marginal_at(100.0), (0.10, 0.0));
    }

    #[test]
    fn schedule_validation_rejects_bad_tables() {
        assert!(TaxSchedule::new(&[], 0.0).is_err());
        assert!(TaxSchedule::new(&[(1.0, 0.1)], 0.0).is_err());
        assert!(TaxSchedule::new(&[(0.0, 0.1), (10.0, 0.2), (10.0, 0.3)], 0.0).is_err());
        assert!(TaxSchedule::new(&[(0.0, 1.5)], 0.0).is_err());
        assert!(TaxSchedule::new(&[(0.0, 0.1)], -1.0).is_err());
        assert!(TaxSchedule::new(&[(0.0, 0.1)], f64::NAN).is_err());
    }

    #[test]
    fn adjust_rates_clamps_and_stays_continuous() {
        let mut s = two_bracket();
        s.adjust_rates(0.05, (0.01, 0.22));
        assert_abs_diff_eq!(s.brackets()[0].rate, 0.15);
        assert_abs_diff_eq!(s.brackets()[1].rate, 0.22);
        let boundary = 500.0;
        assert_abs_diff_eq!(
            boundary * s.brackets()[0].rate - s.brackets()[0].quick_deduction,
            boundary * s.brackets()[1].rate - s.brackets()[1].quick_deduction,
            epsilon = 1e-9
        );
    }

    #[test]
    fn poverty_levels_partition_the_gap() {
        assert_eq!(poverty_level(12.0, 9.0), 0);
        assert_eq!(poverty_level(9.0, 9.0), 0);
        assert_eq!(poverty_level(8.9, 9.0), 3);
        assert_eq!(poverty_level(6.0, 9.0), 3);
        assert_eq!(poverty_level(5.9, 9.0), 2);
        assert_eq!(poverty_level(3.0, 9.0), 2);
        assert_eq!(poverty_level(2.9, 9.0), 1);
        assert_eq!(poverty_level(0.0, 9.0), 1);
        assert_eq!(poverty_level(-4.0, 9.0), 1);
    }

    fn test_policy() -> WelfarePolicy {
        WelfarePolicy {
            schedule: two_bracket(),
            min_guarantee: 10.0,
            aver: 1.0,
            issuance_rates: [1.0, 0.75, 0.5],
            controller: ControllerState {
                surplus_streak: 0,
                rate_step: 0.01,
                min_step: 0.5,
                rate_bounds: (0.01, 0.45),
                min_bounds: (2.0, 20.0),
            },
        }
    }

    #[test]
    fn subsidy_scales_the_gap_by_level() {
        let p = test_policy();
        assert_abs_diff_eq!(compute_subsidy(12.0, &p), 0.0);
        assert_abs_diff_eq!(compute_subsidy(9.0, &p), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(compute_subsidy(5.0, &p), 3.75, epsilon = 1e-12);
        assert_abs_diff_eq!(compute_subsidy(1.0, &p), 9.0, epsilon = 1e-12);
    }

    #[test]
    fn shortfall_tightens_policy_immediately() {
        let mut p = test_policy();
        p.controller.surplus_streak = 7;
        let center = WelfareCenter { wealth: 1.0 };
        policy_step(&mut p, &center, 5.0);
        assert_abs_diff_eq!(p.min_guarantee, 9.5);
        assert_abs_diff_eq!(p.schedule.brackets()[0].rate, 0.11);
        assert_abs_diff_eq!(p.schedule.brackets()[1].rate, 0.21);
        assert_eq!(p.controller.surplus_streak, 0);
    }

    #[test]
    fn surplus_relaxes_policy_only_after_a_streak() {
        let mut p = test_policy();
        let center = WelfareCenter { wealth: 100.0 };
        for i in 1..SURPLUS_STREAK_TRIGGER {
            policy_step(&mut p, &center, 5.0);
            assert_eq!(p.controller.surplus_streak, i);
            assert_abs_diff_eq!(p.min_guarantee, 10.0);
        }
        policy_step(&mut p, &center, 5.0);
        assert_eq!(p.controller.surplus_streak, 0);
        assert_abs_diff_eq!(p.min_guarantee, 10.5);
        assert_abs_diff_eq!(p.schedule.brackets()[0].rate, 0.09);
    }

    #[test]
    fn shortfall_resets_a_partial_streak() {
        let mut p = test_policy();
        let rich = WelfareCenter { wealth: 100.0 };
        let broke = WelfareCenter { wealth: 0.0 };
        for _ in 0..6 {
            policy_step(&mut p, &rich, 5.0);
        }
        policy_step(&mut p, &broke, 5.0);
        assert_eq!(p.controller.surplus_streak, 0);
        for _ in 0..9 {
            policy_step(&mut p, &rich, 5.0);
        }
        assert_abs_diff_eq!(p.min_guarantee, 9.5);
    }

    #[test]
    fn controller_respects_bounds() {
        let mut p = test_policy();
        p.controller.min_bounds = (9.8, 10.2);
        p.controller.rate_bounds = (0.095, 0.205);
        let broke = WelfareCenter { wealth: 0.0 };
        for _ in 0..12 {
            policy_step(&mut p, &broke, 5.0);
        }
        assert_abs_diff_eq!(p.min_guarantee, 9.8);
        assert_abs_diff_eq!(p.schedule.brackets()[0].rate, 0.205);
        assert_abs_diff_eq!(p.schedule.brackets()[1].rate, 0.205);
    }

    proptest! {
        #[test]
        fn quick_deduction_route_equals_marginal_sums(
            bounds in proptest::collection::vec(1.0f64..400.0, 0..5),
            rates in proptest::collection::vec(0.0f64..=1.0, 6),
            threshold in 0.0f64..50.0,
            incomes in proptest::collection::vec(0.0f64..2000.0, 1..20),
        ) {
            let mut lowers = vec![0.0];
            let mut acc = 0.0;
            for b in bounds {
                acc += b;
                lowers.push(acc);
            }
            let table: Vec<(f64, f64)> = lowers
                .iter()
                .zip(rates.iter())
                .map(|(&l, &r)| (l, r))
                .collect();
            let s = TaxSchedule::new(&table, threshold).unwrap();
            for income in incomes {
                let direct = s.tax(income);
                let oracle = piecewise_marginal_tax(&table, threshold, income);
                prop_assert!((direct - oracle).abs() <= 1e-9,
                    "income {income}: quick-deduction {direct} vs marginal {oracle}");
            }
        }

        #[test]
        fn tax_is_continuous_at_interior_boundaries(
            step1 in 10.0f64..200.0,
            step2 in 10.0f64..200.0,
            r1 in 0.0f64..0.33,
            r2 in 0.0f64..0.33,
            r3 in 0.0f64..0.33,
        ) {
            let table = [(0.0, r1), (step1, r1 + r2), (step1 + step2, r1 + r2 + r3)];
            let s = TaxSchedule::new(&table, 0.0).unwrap();
            for boundary in [step1, step1 + step2] {
                let below = s.tax(boundary - 1e-6);
                let above = s.tax(boundary + 1e-6);
                prop_assert!((above - below).abs() < 1e-4,
                    "jump at {boundary}: {below} vs {above}");
            }
        }

        #[test]
        fn poverty_level_is_monotone_in_wealth(
            min in 0.5f64..100.0,
            w1 in -50.0f64..150.0,
            w2 in -50.0f64..150.0,
        ) {
            let (lo, hi) = if w1 <= w2 { (w1, w2) } else { (w2, w1) };
            let (l_lo, l_hi) = (poverty_level(lo, min), poverty_level(hi, min));
            prop_assert!(l_hi == 0 || l_lo <= l_hi);
            prop_assert!(l_lo != 0 || l_hi == 0);
        }
    }
}
