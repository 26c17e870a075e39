//! Run artifacts: metrics and event CSVs, topology edge lists, the JSON
//! run summary, sweep aggregates, and a validator that re-reads any of
//! them.
//!
//! All writers format numbers with Rust's shortest-round-trip `Display`,
//! so identical runs serialize to identical bytes.

use std::fmt::Write as _;

use serde::Serialize;

use crate::agents::Agent;
use crate::config::{RunConfig, SCHEMA_VERSION};
use crate::engine::{MetricsRecord, ProjectEvent, RunResult, WorldState};
use crate::game::Outcome;
use crate::topology::Topology;
use crate::SimError;

pub const METRICS_HEADER: &str = "tick,projects_attempted,projects_succeeded,betrayal_count,\
invitations_issued,invitations_accepted,total_agent_wealth,center_wealth,current_rate,\
current_min_guarantee,blacklist_size,poor_count";

pub const EVENTS_HEADER: &str =
    "tick,sponsor,solo,risk,gain_ratio,loss_ratio,outcome,participants,stakes,traitors";

pub const EDGES_HEADER: &str = "u,v";

/// Leading columns of a sweep aggregate; axis columns sit between `seed`
/// and `tail_ticks`.
pub const AGGREGATE_PREFIX: &str = "run_id,seed";
pub const AGGREGATE_SUFFIX: &str =
    "tail_ticks,betrayal_rate_mean,betrayal_rate_std,acceptance_rate_mean,acceptance_rate_std";

pub fn metrics_csv(records: &[MetricsRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.tick,
            r.projects_attempted,
            r.projects_succeeded,
            r.betrayal_count,
            r.invitations_issued,
            r.invitations_accepted,
            r.total_agent_wealth,
            r.center_wealth,
            r.current_rate,
            r.current_min_guarantee,
            r.blacklist_size,
            r.poor_count
        )
        .unwrap();
    }
    out
}

fn join_ids(ids: &[usize]) -> String {
    let mut s = String::new();
    for (i, id) in ids.iter().enumerate() {
        if i > 0 {
            s.push(';');
        }
        write!(s, "{id}").unwrap();
    }
    s
}

fn join_f64(values: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(';');
        }
        write!(s, "{v}").unwrap();
    }
    s
}

pub fn events_csv(events: &[ProjectEvent]) -> String {
    let mut out = String::with_capacity(96 * (events.len() + 1));
    out.push_str(EVENTS_HEADER);
    out.push('\n');
    for e in events {
        let traitors = match &e.outcome {
            Outcome::Betrayal(t) => join_ids(t),
            _ => String::new(),
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            e.tick,
            e.sponsor,
            e.solo,
            e.risk,
            e.gain_ratio,
            e.loss_ratio,
            e.outcome.label(),
            join_ids(&e.participants),
            join_f64(&e.stakes),
            traitors
        )
        .unwrap();
    }
    out
}

/// Edge list with one `u,v` row per undirected edge, `u < v`, sorted.
pub fn edges_csv(topology: &Topology) -> String {
    let mut out = String::from("# node ids are 0-based\n");
    out.push_str(EDGES_HEADER);
    out.push('\n');
    for (u, v) in topology.edges() {
        writeln!(out, "{u},{v}").unwrap();
    }
    out
}

/// Per-agent line of the run summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentSnapshot {
    pub id: usize,
    pub wealth: f64,
    pub spirit: f64,
    pub red_count: usize,
    pub white_count: usize,
    pub blacklisted: bool,
}

impl AgentSnapshot {
    fn of(agent: &Agent, blacklisted: bool) -> Self {
        AgentSnapshot {
            id: agent.id,
            wealth: agent.wealth,
            spirit: agent.spirit,
            red_count: agent.red_partners().len(),
            white_count: agent.white_partners().len(),
            blacklisted,
        }
    }
}

/// Whole-run record written as `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub config: RunConfig,
    pub ticks_run: u64,
    pub topology_seed: u64,
    pub topology_attempts: u32,
    pub controller: &'static str,
    pub projects_attempted: u64,
    pub projects_succeeded: u64,
    pub betrayal_count: u64,
    pub invitations_issued: u64,
    pub invitations_accepted: u64,
    pub max_ledger_residual: f64,
    pub wall_clock_seconds: f64,
    pub final_state: crate::engine::FinalState,
    pub agents: Vec<AgentSnapshot>,
}

pub fn run_summary(world: &WorldState, result: &RunResult, wall_clock_seconds: f64) -> RunSummary {
    let sum = |field: fn(&MetricsRecord) -> u64| result.metrics.iter().map(field).sum();
    RunSummary {
        schema_version: SCHEMA_VERSION,
        config: world.config().clone(),
        ticks_run: result.metrics.len() as u64,
        topology_seed: world.topology_seed,
        topology_attempts: world.topology_attempts,
        controller: if world.config().welfare.controller.enabled {
            "adaptive"
        } else {
            "frozen"
        },
        projects_attempted: sum(|m| m.projects_attempted),
        projects_succeeded: sum(|m| m.projects_succeeded),
        betrayal_count: sum(|m| m.betrayal_count),
        invitations_issued: sum(|m| m.invitations_issued),
        invitations_accepted: sum(|m| m.invitations_accepted),
        max_ledger_residual: result.max_ledger_residual,
        wall_clock_seconds,
        final_state: result.final_state_summary.clone(),
        agents: world
            .agents
            .iter()
            .map(|a| AgentSnapshot::of(a, world.blacklist.contains(a.id, world.tick)))
            .collect(),
    }
}

pub fn summary_json(summary: &RunSummary) -> String {
    let mut s = serde_json::to_string_pretty(summary).expect("summary serializes");
    s.push('\n');
    s
}

/// What `schema_check` validated.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaReport {
    pub kind: &'static str,
    pub rows: usize,
}

/// Validates a run artifact by content: metrics, events, or edges CSV, a
/// summary JSON, or a sweep aggregate CSV. Checks the header, per-row
/// column counts, numeric fields, tick monotonicity, and outcome/traitor
/// consistency, and reports what it recognised.
pub fn schema_check(content: &str) -> Result<SchemaReport, SimError> {
    let body = content.trim_start_matches('\u{feff}');
    if body.trim_start().starts_with('{') {
        return check_summary(body);
    }
    let mut lines = body.lines().filter(|l| !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| SimError::InvalidConfig("empty file".into()))?;
    match header {
        METRICS_HEADER => check_metrics(lines),
        EVENTS_HEADER => check_events(lines),
        EDGES_HEADER => check_edges(lines),
        h if h.starts_with(AGGREGATE_PREFIX) && h.ends_with(AGGREGATE_SUFFIX) => {
            check_aggregate(h, lines)
        }
        h => Err(SimError::InvalidConfig(format!(
            "unrecognised header: {h:?}"
        ))),
    }
}

fn bad(row: usize, what: impl std::fmt::Display) -> SimError {
    SimError::InvalidConfig(format!("row {row}: {what}"))
}

fn parse<T: std::str::FromStr>(row: usize, field: &str, value: &str) -> Result<T, SimError> {
    value
        .parse()
        .map_err(|_| bad(row, format!("{field} does not parse: {value:?}")))
}

fn check_metrics<'a>(lines: impl Iterator<Item = &'a str>) -> Result<SchemaReport, SimError> {
    let mut rows = 0;
    let mut prev_tick: Option<u64> = None;
    for (i, line) in lines.enumerate() {
        let row = i + 2;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 12 {
            return Err(bad(row, format!("expected 12 columns, got {}", cols.len())));
        }
        let tick: u64 = parse(row, "tick", cols[0])?;
        if prev_tick.is_some_and(|p| tick <= p) {
            return Err(bad(row, "tick not strictly increasing"));
        }
        prev_tick = Some(tick);
        for (name, idx) in [
            ("projects_attempted", 1),
            ("projects_succeeded", 2),
            ("betrayal_count", 3),
            ("invitations_issued", 4),
            ("invitations_accepted", 5),
            ("blacklist_size", 10),
            ("poor_count", 11),
        ] {
            parse::<u64>(row, name, cols[idx])?;
        }
        for (name, idx) in [
            ("total_agent_wealth", 6),
            ("center_wealth", 7),
            ("current_rate", 8),
            ("current_min_guarantee", 9),
        ] {
            parse::<f64>(row, name, cols[idx])?;
        }
        rows += 1;
    }
    Ok(SchemaReport {
        kind: "metrics",
        rows,
    })
}

fn check_events<'a>(lines: impl Iterator<Item = &'a str>) -> Result<SchemaReport, SimError> {
    let mut rows = 0;
    let mut prev_tick: Option<u64> = None;
    for (i, line) in lines.enumerate() {
        let row = i + 2;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 10 {
            return Err(bad(row, format!("expected 10 columns, got {}", cols.len())));
        }
        let tick: u64 = parse(row, "tick", cols[0])?;
        if prev_tick.is_some_and(|p| tick < p) {
            return Err(bad(row, "tick decreases"));
        }
        prev_tick = Some(tick);
        parse::<u64>(row, "sponsor", cols[1])?;
        if cols[2] != "true" && cols[2] != "false" {
            return Err(bad(row, format!("solo must be true/false: {:?}", cols[2])));
        }
        for (name, idx) in [("risk", 3), ("gain_ratio", 4), ("loss_ratio", 5)] {
            parse::<f64>(row, name, cols[idx])?;
        }
        let participants = split_list::<u64>(row, "participants", cols[7])?;
        let stakes = split_list::<f64>(row, "stakes", cols[8])?;
        if participants.len() != stakes.len() {
            return Err(bad(row, "participants and stakes lengths differ"));
        }
        if participants.is_empty() {
            return Err(bad(row, "no participants"));
        }
        let traitors = split_list::<u64>(row, "traitors", cols[9])?;
        match cols[6] {
            "success" | "failure" => {
                if !traitors.is_empty() {
                    return Err(bad(row, "traitors listed on a non-betrayal outcome"));
                }
            }
            "betrayal" => {
                if traitors.is_empty() {
                    return Err(bad(row, "betrayal outcome without traitors"));
                }
                if traitors.iter().any(|t| !participants.contains(t)) {
                    return Err(bad(row, "traitor not among participants"));
                }
            }
            other => return Err(bad(row, format!("unknown outcome: {other:?}"))),
        }
        rows += 1;
    }
    Ok(SchemaReport {
        kind: "events",
        rows,
    })
}

fn split_list<T: std::str::FromStr>(
    row: usize,
    field: &str,
    value: &str,
) -> Result<Vec<T>, SimError> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(';')
        .map(|piece| parse(row, field, piece))
        .collect()
}

fn check_edges<'a>(lines: impl Iterator<Item = &'a str>) -> Result<SchemaReport, SimError> {
    let mut rows = 0;
    for (i, line) in lines.enumerate() {
        let row = i + 2;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 2 {
            return Err(bad(row, format!("expected 2 columns, got {}", cols.len())));
        }
        parse::<u64>(row, "u", cols[0])?;
        parse::<u64>(row, "v", cols[1])?;
        rows += 1;
    }
    Ok(SchemaReport {
        kind: "edges",
        rows,
    })
}

fn check_aggregate<'a>(
    header: &str,
    lines: impl Iterator<Item = &'a str>,
) -> Result<SchemaReport, SimError> {
    let width = header.split(',').count();
    let mut rows = 0;
    for (i, line) in lines.enumerate() {
        let row = i + 2;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != width {
            return Err(bad(
                row,
                format!("expected {width} columns, got {}", cols.len()),
            ));
        }
        parse::<u64>(row, "run_id", cols[0])?;
        parse::<u64>(row, "seed", cols[1])?;
        parse::<u64>(row, "tail_ticks", cols[width - 5])?;
        for (offset, name) in [
            (4, "betrayal_rate_mean"),
            (3, "betrayal_rate_std"),
            (2, "acceptance_rate_mean"),
            (1, "acceptance_rate_std"),
        ] {
            parse::<f64>(row, name, cols[width - offset])?;
        }
        rows += 1;
    }
    Ok(SchemaReport {
        kind: "aggregate",
        rows,
    })
}

fn check_summary(body: &str) -> Result<SchemaReport, SimError> {
    let value: serde_json::Value = serde_json::from_str(body)
        .map_err(|e| SimError::InvalidConfig(format!("summary JSON: {e}")))?;
    let object = value
        .as_object()
        .ok_or_else(|| SimError::InvalidConfig("summary is not an object".into()))?;
    for key in [
        "schema_version",
        "config",
        "ticks_run",
        "final_state",
        "max_ledger_residual",
        "agents",
    ] {
        if !object.contains_key(key) {
            return Err(SimError::InvalidConfig(format!("summary missing {key:?}")));
        }
    }
    let version = object["schema_version"].as_u64();
    if version != Some(SCHEMA_VERSION as u64) {
        return Err(SimError::InvalidConfig(format!(
            "summary schema_version {version:?}, expected {SCHEMA_VERSION}"
        )));
    }
    let rows = object["agents"].as_array().map_or(0, Vec::len);
    Ok(SchemaReport {
        kind: "summary",
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine;

    fn sample_run() -> (WorldState, RunResult) {
        let mut c = RunConfig::with_defaults(7, 40);
        c.topology.n = 40;
        c.topology.k = 4;
        engine::run(&c).unwrap()
    }

    #[test]
    fn metrics_csv_round_trips_through_schema_check() {
        let (_, result) = sample_run();
        let csv = metrics_csv(&result.metrics);
        let report = schema_check(&csv).unwrap();
        assert_eq!(report.kind, "metrics");
        assert_eq!(report.rows, 40);
    }

    #[test]
    fn events_csv_round_trips_through_schema_check() {
        let (_, result) = sample_run();
        let csv = events_csv(&result.events);
        let report = schema_check(&csv).unwrap();
        assert_eq!(report.kind, "events");
        assert_eq!(report.rows, result.events.len());
    }

    #[test]
    fn edges_csv_round_trips_through_schema_check() {
        let (world, _) = sample_run();
        let csv = edges_csv(&world.topology);
        let report = schema_check(&csv).unwrap();
        assert_eq!(report.kind, "edges");
        assert_eq!(report.rows, world.topology.edge_count());
    }

    #[test]
    fn summary_json_round_trips_through_schema_check() {
        let (world, result) = sample_run();
        let json = summary_json(&run_summary(&world, &result, 0.25));
        let report = schema_check(&json).unwrap();
        assert_eq!(report.kind, "summary");
        assert_eq!(report.rows, 40);
    }

    #[test]
    fn schema_check_rejects_malformed_rows() {
        let truncated = format!("{METRICS_HEADER}\n0,1,2\n");
        assert!(schema_check(&truncated).is_err());

        let bad_tick = format!("{METRICS_HEADER}\n1,0,0,0,0,0,1.0,1.0,0.2,9,0,0\n1,0,0,0,0,0,1.0,1.0,0.2,9,0,0\n");
        assert!(schema_check(&bad_tick).is_err());

        let bad_outcome =
            format!("{EVENTS_HEADER}\n0,3,false,50,0.8,0.3,draw,3;4,1.0;2.0,\n");
        assert!(schema_check(&bad_outcome).is_err());

        let traitor_on_success =
            format!("{EVENTS_HEADER}\n0,3,false,50,0.8,0.3,success,3;4,1.0;2.0,3\n");
        assert!(schema_check(&traitor_on_success).is_err());

        assert!(schema_check("tick,unknown\n1,2\n").is_err());
    }

    #[test]
    fn betrayal_rows_carry_their_traitors() {
        let mut found = false;
        for seed in 0..40 {
            let mut c = RunConfig::with_defaults(seed, 60);
            c.topology.n = 40;
            c.topology.k = 4;
            c.game.invest_fraction = 0.02;
            c.agents.spirit_min = 20;
            let (_, result) = engine::run(&c).unwrap();
            for (event, line) in result.events.iter().zip(
                events_csv(&result.events).lines().skip(1),
            ) {
                if let Outcome::Betrayal(traitors) = &event.outcome {
                    let cols: Vec<&str> = line.split(',').collect();
                    assert_eq!(cols[6], "betrayal");
                    assert_eq!(cols[9], join_ids(traitors));
                    found = true;
                }
            }
            if found {
                break;
            }
        }
        assert!(found, "no betrayal occurred in any probe seed");
    }

    #[test]
    fn identical_runs_serialize_to_identical_bytes() {
        let (w1, r1) = sample_run();
        let (w2, r2) = sample_run();
        assert_eq!(metrics_csv(&r1.metrics), metrics_csv(&r2.metrics));
        assert_eq!(events_csv(&r1.events), events_csv(&r2.events));
        assert_eq!(
            summary_json(&run_summary(&w1, &r1, 0.0)),
            summary_json(&run_summary(&w2, &r2, 0.0))
        );
    }
}
