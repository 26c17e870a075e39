//! Per-agent state: wealth, adventurous spirit, contact lists, and the
//! blacklist that bars traitors from play.
//!
//! Every agent keeps a record per known partner. A partner is `White`
//! (acquaintance) or `Red` (trusted collaborator); red status carries a
//! cooperation count that successful joint projects grow and failed ones
//! shrink, with demotion back to white at zero. Strangers become white on
//! their first successful cooperation.

use std::collections::BTreeMap;

use rand::Rng;

use crate::SimError;

/// Agent identifier; agents are numbered `0..n` and correspond one-to-one
/// with graph nodes.
pub type AgentId = usize;

/// Simulation time, counted in ticks from zero.
pub type Tick = u64;

/// Trust classification of a known partner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Red,
    White,
}

/// Cooperation history with one partner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContactRecord {
    pub classification: Classification,
    /// Net cooperation credit backing red status; always ≥ 1 while red.
    pub coop_count: u32,
    /// Lifetime successful cooperations, kept for reporting.
    pub successes: u32,
    /// Lifetime failed cooperations, kept for reporting.
    pub failures: u32,
}

impl ContactRecord {
    fn new_white() -> Self {
        ContactRecord {
            classification: Classification::White,
            coop_count: 0,
            successes: 0,
            failures: 0,
        }
    }

    /// Classification the lifetime totals alone would imply. Reporting
    /// only; selection always uses `classification`.
    pub fn classification_by_totals(&self) -> Classification {
        if self.successes > self.failures {
            Classification::Red
        } else {
            Classification::White
        }
    }
}

/// One participant in the cooperative economy.
///
/// Contacts live in a vector sorted by partner id: lookups binary-search it
/// and the engine's per-project pair updates stay cache-local even when a
/// list has grown to cover most of the population.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub id: AgentId,
    pub wealth: f64,
    /// Adventurous spirit in `[0, 100]`; fixed at initialisation.
    pub spirit: f64,
    contacts: Vec<(AgentId, ContactRecord)>,
}

impl Agent {
    pub fn new(id: AgentId, wealth: f64, spirit: f64) -> Self {
        debug_assert!((0.0..=100.0).contains(&spirit));
        Agent {
            id,
            wealth,
            spirit,
            contacts: Vec::new(),
        }
    }

    fn slot(&self, partner: AgentId) -> Result<usize, usize> {
        self.contacts.binary_search_by_key(&partner, |&(id, _)| id)
    }

    /// Registers `partner` as a white contact if unknown; used to seed the
    /// initial acquaintance lists from graph neighbourhoods.
    pub fn seed_contact(&mut self, partner: AgentId) {
        debug_assert_ne!(partner, self.id);
        if let Err(pos) = self.slot(partner) {
            self.contacts.insert(pos, (partner, ContactRecord::new_white()));
        }
    }

    pub fn contact(&self, partner: AgentId) -> Option<&ContactRecord> {
        self.slot(partner).ok().map(|pos| &self.contacts[pos].1)
    }

    pub fn contacts(&self) -> impl Iterator<Item = (AgentId, &ContactRecord)> {
        self.contacts.iter().map(|(id, rec)| (*id, rec))
    }

    /// Red partners in ascending id order.
    pub fn red_partners(&self) -> Vec<AgentId> {
        self.partners_with(Classification::Red)
    }

    /// White partners in ascending id order.
    pub fn white_partners(&self) -> Vec<AgentId> {
        self.partners_with(Classification::White)
    }

    fn partners_with(&self, class: Classification) -> Vec<AgentId> {
        self.contacts
            .iter()
            .filter(|(_, rec)| rec.classification == class)
            .map(|(id, _)| *id)
            .collect()
    }

    /// Updates the record for `partner` after a joint project.
    ///
    /// Success: strangers become white, whites are promoted to red with one
    /// cooperation credit, reds gain a credit. Failure: reds lose a credit
    /// and fall back to white at zero; whites and strangers are unaffected
    /// beyond the lifetime totals.
    pub fn record_cooperation_result(&mut self, partner: AgentId, success: bool) {
        debug_assert_ne!(partner, self.id);
        if success {
            match self.slot(partner) {
                Err(pos) => {
                    let mut rec = ContactRecord::new_white();
                    rec.successes = 1;
                    self.contacts.insert(pos, (partner, rec));
                }
                Ok(pos) => {
                    let rec = &mut self.contacts[pos].1;
                    rec.successes += 1;
                    match rec.classification {
                        Classification::White => {
                            rec.classification = Classification::Red;
                            rec.coop_count = 1;
                        }
                        Classification::Red => rec.coop_count += 1,
                    }
                }
            }
        } else if let Ok(pos) = self.slot(partner) {
            let rec = &mut self.contacts[pos].1;
            rec.failures += 1;
            if rec.classification == Classification::Red {
                if rec.coop_count <= 1 {
                    rec.classification = Classification::White;
                    rec.coop_count = 0;
                } else {
                    rec.coop_count -= 1;
                }
            }
        }
    }
}

/// Agents barred from sponsoring, invitation, and participation until an
/// expiry tick.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BlacklistRegistry {
    entries: BTreeMap<AgentId, Tick>,
}

impl BlacklistRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Bars `id` from tick `now` until `now + multiplier * tick_length`.
    /// The multiplier must exceed 10. Re-listing an agent keeps whichever
    /// expiry is later.
    pub fn add(
        &mut self,
        id: AgentId,
        now: Tick,
        multiplier: u32,
        tick_length: Tick,
    ) -> Result<Tick, SimError> {
        if multiplier <= 10 {
            return Err(SimError::InvalidParams(format!(
                "blacklist multiplier must exceed 10, got {multiplier}"
            )));
        }
        let expiry = now + multiplier as Tick * tick_length;
        let slot = self.entries.entry(id).or_insert(expiry);
        *slot = (*slot).max(expiry);
        Ok(*slot)
    }

    /// Whether `id` is barred at tick `now`. Expiry is exclusive: an agent
    /// whose expiry equals `now` is free again. Only the expiry is stored,
    /// so queries are meaningful from the listing tick onward.
    pub fn contains(&self, id: AgentId, now: Tick) -> bool {
        self.entries.get(&id).is_some_and(|&expiry| now < expiry)
    }

    /// Drops every entry whose expiry is at or before `now`.
    pub fn purge_expired(&mut self, now: Tick) {
        self.entries.retain(|_, &mut expiry| expiry > now);
    }

    pub fn expiry(&self, id: AgentId) -> Option<Tick> {
        self.entries.get(&id).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Candidate invitee set for a project sponsored by `sponsor`: every red
/// partner plus a seeded random sample of `white_fraction` of the white
/// partners (count rounded to nearest), keeping only agents that are not
/// blacklisted at `now` and hold wealth strictly above half the sponsor's.
/// Returned in ascending id order.
pub fn eligible_invitees<R: Rng>(
    sponsor: &Agent,
    agents: &[Agent],
    blacklist: &BlacklistRegistry,
    now: Tick,
    white_fraction: f64,
    rng: &mut R,
) -> Vec<AgentId> {
    debug_assert!((0.0..=1.0).contains(&white_fraction));
    let whites = sponsor.white_partners();
    let take = ((whites.len() as f64 * white_fraction).round() as usize).min(whites.len());
    let mut pool = sponsor.red_partners();
    pool.extend(
        rand::seq::index::sample(rng, whites.len(), take)
            .iter()
            .map(|i| whites[i]),
    );
    let floor = sponsor.wealth / 2.0;
    let mut out: Vec<AgentId> = pool
        .into_iter()
        .filter(|&id| !blacklist.contains(id, now) && agents[id].wealth > floor)
        .collect();
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stranger_becomes_white_on_first_success() {
        let mut a = Agent::new(0, 100.0, 50.0);
        a.record_cooperation_result(1, true);
        let rec = a.contact(1).unwrap();
        assert_eq!(rec.classification, Classification::White);
        assert_eq!(rec.coop_count, 0);
        assert_eq!(rec.successes, 1);
    }

    #[test]
    fn white_promotes_to_red_on_success() {
        let mut a = Agent::new(0, 100.0, 50.0);
        a.seed_contact(1);
        a.record_cooperation_result(1, true);
        let rec = a.contact(1).unwrap();
        assert_eq!(rec.classification, Classification::Red);
        assert_eq!(rec.coop_count, 1);
    }

    #[test]
    fn red_credit_rises_and_falls_with_outcomes() {
        let mut a = Agent::new(0, 100.0, 50.0);
        a.seed_contact(1);
        a.record_cooperation_result(1, true);
        a.record_cooperation_result(1, true);
        assert_eq!(a.contact(1).unwrap().coop_count, 2);
        a.record_cooperation_result(1, false);
        let rec = a.contact(1).unwrap();
        assert_eq!(rec.classification, Classification::Red);
        assert_eq!(rec.coop_count, 1);
        a.record_cooperation_result(1, false);
        let rec = a.contact(1).unwrap();
        assert_eq!(rec.classification, Classification::White);
        assert_eq!(rec.coop_count, 0);
    }

    #[test]
    fn failure_leaves_whites_and_strangers_alone() {
        let mut a = Agent::new(0, 100.0, 50.0);
        a.seed_contact(1);
        a.record_cooperation_result(1, false);
        assert_eq!(a.contact(1).unwrap().classification, Classification::White);
        a.record_cooperation_result(2, false);
        assert!(a.contact(2).is_none());
    }

    #[test]
    fn totals_diagnostic_tracks_lifetime_history() {
        let mut a = Agent::new(0, 100.0, 50.0);
        a.seed_contact(1);
        for _ in 0..3 {
            a.record_cooperation_result(1, true);
        }
        a.record_cooperation_result(1, false);
        let rec = a.contact(1).unwrap();
        assert_eq!((rec.successes, rec.failures), (3, 1));
        assert_eq!(rec.classification_by_totals(), Classification::Red);
    }

    #[test]
    fn blacklist_rejects_small_multipliers() {
        let mut b = BlacklistRegistry::new();
        assert!(b.add(1, 0, 10, 1).is_err());
        assert!(b.add(1, 0, 11, 1).is_ok());
    }

    #[test]
    fn blacklist_window_is_half_open() {
        let mut b = BlacklistRegistry::new();
        let expiry = b.add(3, 5, 11, 1).unwrap();
        assert_eq!(expiry, 16);
        assert!(b.contains(3, 5));
        assert!(b.contains(3, 15));
        assert!(!b.contains(3, 16));
    }

    #[test]
    fn relisting_keeps_the_later_expiry() {
        let mut b = BlacklistRegistry::new();
        b.add(3, 10, 20, 1).unwrap();
        b.add(3, 5, 11, 1).unwrap();
        assert_eq!(b.expiry(3), Some(30));
        b.add(3, 25, 11, 1).unwrap();
        assert_eq!(b.expiry(3), Some(36));
    }

    #[test]
    fn purge_drops_only_expired_entries() {
        let mut b = BlacklistRegistry::new();
        b.add(1, 0, 11, 1).unwrap();
        b.add(2, 10, 11, 1).unwrap();
        b.purge_expired(11);
        assert_eq!(b.expiry(1), None);
        assert_eq!(b.expiry(2), Some(21));
        assert_eq!(b.len(), 1);
    }

    fn world_of(wealths: &[f64]) -> Vec<Agent> {
        wealths
            .iter()
            .enumerate()
            .map(|(id, &w)| Agent::new(id, w, 50.0))
            .collect()
    }

    #[test]
    fn invitees_include_reds_and_a_white_sample() {
        let mut agents = world_of(&[100.0, 80.0, 80.0, 80.0, 80.0, 80.0]);
        for partner in 1..6 {
            agents[0].seed_contact(partner);
        }
        agents[0].record_cooperation_result(1, true);
        agents[0].record_cooperation_result(2, true);
        let sponsor = agents[0].clone();
        let b = BlacklistRegistry::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = eligible_invitees(&sponsor, &agents, &b, 0, 0.5, &mut rng);
        assert!(out.contains(&1) && out.contains(&2));
        let whites: Vec<AgentId> = out.iter().copied().filter(|&id| id > 2).collect();
        assert_eq!(whites.len(), 2);
        assert!(out.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn invitees_exclude_blacklisted_and_poor_agents() {
        let mut agents = world_of(&[100.0, 80.0, 49.0, 80.0]);
        for partner in 1..4 {
            agents[0].seed_contact(partner);
            agents[0].record_cooperation_result(partner, true);
        }
        let sponsor = agents[0].clone();
        let mut b = BlacklistRegistry::new();
        b.add(3, 0, 11, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = eligible_invitees(&sponsor, &agents, &b, 0, 1.0, &mut rng);
        assert_eq!(out, vec![1]);
        let out = eligible_invitees(&sponsor, &agents, &b, 11, 1.0, &mut rng);
        assert_eq!(out, vec![1, 3]);
    }

    #[test]
    fn wealth_floor_is_strict() {
        let mut agents = world_of(&[100.0, 50.0]);
        agents[0].seed_contact(1);
        agents[0].record_cooperation_result(1, true);
        let sponsor = agents[0].clone();
        let b = BlacklistRegistry::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(eligible_invitees(&sponsor, &agents, &b, 0, 1.0, &mut rng).is_empty());
        agents[1].wealth = 50.0 + 1e-9;
        assert_eq!(
            eligible_invitees(&sponsor, &agents, &b, 0, 1.0, &mut rng),
            vec![1]
        );
    }

    #[test]
    fn white_sample_count_rounds_to_nearest() {
        let mut agents = world_of(&[100.0, 80.0, 80.0, 80.0]);
        for partner in 1..4 {
            agents[0].seed_contact(partner);
        }
        let sponsor = agents[0].clone();
        let b = BlacklistRegistry::new();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert_eq!(
            eligible_invitees(&sponsor, &agents, &b, 0, 0.5, &mut rng).len(),
            2
        );
        assert_eq!(
            eligible_invitees(&sponsor, &agents, &b, 0, 0.0, &mut rng).len(),
            0
        );
        assert_eq!(
            eligible_invitees(&sponsor, &agents, &b, 0, 1.0, &mut rng).len(),
            3
        );
    }

    #[test]
    fn invitee_sampling_is_deterministic_per_seed() {
        let mut agents = world_of(&[100.0; 12]);
        for partner in 1..12 {
            agents[0].seed_contact(partner);
        }
        let sponsor = agents[0].clone();
        let b = BlacklistRegistry::new();
        let mut r1 = ChaCha8Rng::seed_from_u64(5);
        let mut r2 = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(
            eligible_invitees(&sponsor, &agents, &b, 0, 0.4, &mut r1),
            eligible_invitees(&sponsor, &agents, &b, 0, 0.4, &mut r2)
        );
    }
}
