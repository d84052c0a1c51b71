//! CSV schemas for reward logs, sweep tables, traces, and oracle outputs.
//!
//! Reward-log schema: header `x1,...,xd,r_agent1,...,r_agentA`, UTF-8,
//! `.` decimal separator, rewards as literal `0`/`1`, no missing cells.
//! Agent display names come from configuration, never from the header.
//! Floats are written in Rust's shortest round-trip form, so save/load is
//! value-exact.

use std::fmt::Write as _;
use std::path::Path;

use capbandit_core::domain::{AssignmentTrace, TaskLog, TaskRecord};
use capbandit_core::harness::SweepTable;
use capbandit_core::policy::PolicyKind;

use crate::{CliError, Result};

/// Parses a reward log in the standard schema.
pub fn parse_task_log(text: &str, file: &str, agent_names: Option<Vec<String>>) -> Result<TaskLog> {
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(CliError::ParseError {
            file: file.into(),
            line: 1,
            message: "empty file".into(),
        });
    };
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let dim = columns.iter().take_while(|c| c.starts_with('x')).count();
    let agents = columns.len() - dim;
    let header_ok = dim >= 1
        && agents >= 2
        && columns[..dim]
            .iter()
            .enumerate()
            .all(|(i, c)| **c == format!("x{}", i + 1))
        && columns[dim..].iter().all(|c| c.starts_with("r_"));
    if !header_ok {
        return Err(CliError::ParseError {
            file: file.into(),
            line: 1,
            message: "header must be x1,...,xd,r_agent1,...,r_agentA".into(),
        });
    }

    let mut records = Vec::new();
    for (idx, row) in lines {
        let line = idx + 1;
        if row.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = row.split(',').map(str::trim).collect();
        if cells.len() != dim + agents {
            return Err(CliError::DimensionMismatch {
                file: file.into(),
                line,
                expected: dim + agents,
                got: cells.len(),
            });
        }
        let mut context = Vec::with_capacity(dim);
        for (col, cell) in cells[..dim].iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| CliError::ParseError {
                file: file.into(),
                line,
                message: format!("bad feature value `{cell}` in column {}", col + 1),
            })?;
            if !v.is_finite() {
                return Err(CliError::ParseError {
                    file: file.into(),
                    line,
                    message: format!("non-finite feature value `{cell}` in column {}", col + 1),
                });
            }
            context.push(v);
        }
        let mut rewards = Vec::with_capacity(agents);
        for cell in &cells[dim..] {
            match *cell {
                "0" => rewards.push(false),
                "1" => rewards.push(true),
                _ => {
                    return Err(CliError::NonBinaryReward {
                        file: file.into(),
                        line,
                    })
                }
            }
        }
        records.push(TaskRecord { context, rewards });
    }
    if records.is_empty() {
        return Err(CliError::ParseError {
            file: file.into(),
            line: 1,
            message: "no data rows".into(),
        });
    }
    let names = match agent_names {
        Some(names) => {
            if names.len() != agents {
                return Err(CliError::ValidationError {
                    path: "data.agent_names".into(),
                    message: format!("{} names for {agents} reward columns", names.len()),
                });
            }
            names
        }
        None => (1..=agents).map(|a| format!("agent{a}")).collect(),
    };
    TaskLog::new(records, names).map_err(CliError::Engine)
}

pub fn load_task_log(path: &Path, agent_names: Option<Vec<String>>) -> Result<TaskLog> {
    let text = std::fs::read_to_string(path)?;
    parse_task_log(&text, &path.display().to_string(), agent_names)
}

/// Serializes a log in the standard schema.
pub fn task_log_to_csv(log: &TaskLog) -> String {
    let mut out = String::new();
    for i in 1..=log.feature_dim() {
        let _ = write!(out, "x{i},");
    }
    let cols: Vec<String> = (1..=log.num_agents())
        .map(|a| format!("r_agent{a}"))
        .collect();
    out.push_str(&cols.join(","));
    out.push('\n');
    for rec in log.records() {
        for v in &rec.context {
            let _ = write!(out, "{v},");
        }
        let rewards: Vec<&str> = rec
            .rewards
            .iter()
            .map(|&r| if r { "1" } else { "0" })
            .collect();
        out.push_str(&rewards.join(","));
        out.push('\n');
    }
    out
}

/// `policy,alpha_profile,mean_error,std_error,frac_agent_1,...,frac_agent_A`.
pub fn sweep_to_csv(table: &SweepTable) -> String {
    let agents = table.profiles.first().map(|p| p.num_agents()).unwrap_or(0);
    let mut out = String::from("policy,alpha_profile,mean_error,std_error");
    for a in 1..=agents {
        let _ = write!(out, ",frac_agent_{a}");
    }
    out.push('\n');
    for cell in &table.cells {
        let profile = &table.profiles[cell.profile_index];
        let alphas: Vec<String> = profile.alphas().iter().map(|a| a.to_string()).collect();
        let _ = write!(
            out,
            "{},{},{},{}",
            cell.policy,
            alphas.join("/"),
            cell.mean_error,
            cell.std_error
        );
        for f in &cell.mean_fractions {
            let _ = write!(out, ",{f}");
        }
        out.push('\n');
    }
    out
}

/// Minimal reader for the sweep schema (used by the plot command).
/// Returns rows of (policy, alphas, mean, std).
pub struct SweepRows {
    pub rows: Vec<SweepRow>,
}

pub struct SweepRow {
    pub policy: PolicyKind,
    pub alphas: Vec<f64>,
    pub mean_error: f64,
    pub std_error: f64,
}

pub fn parse_sweep_csv(text: &str, file: &str) -> Result<SweepRows> {
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() < 4 {
            return Err(CliError::ParseError {
                file: file.into(),
                line: idx + 1,
                message: "expected policy,alpha_profile,mean_error,std_error,...".into(),
            });
        }
        let policy: PolicyKind = cells[0].parse().map_err(|_| CliError::ParseError {
            file: file.into(),
            line: idx + 1,
            message: format!("unknown policy `{}`", cells[0]),
        })?;
        let parse_f = |cell: &str| -> Result<f64> {
            cell.parse().map_err(|_| CliError::ParseError {
                file: file.into(),
                line: idx + 1,
                message: format!("bad number `{cell}`"),
            })
        };
        let alphas = cells[1]
            .split('/')
            .map(parse_f)
            .collect::<Result<Vec<f64>>>()?;
        rows.push(SweepRow {
            policy,
            alphas,
            mean_error: parse_f(cells[2])?,
            std_error: parse_f(cells[3])?,
        });
    }
    if rows.is_empty() {
        return Err(CliError::EmptyTable);
    }
    Ok(SweepRows { rows })
}

/// Trace schema `t,agent,reward,score_1..A,q_1..A`.
pub fn trace_to_csv(trace: &AssignmentTrace, agents: usize) -> String {
    let mut out = String::from("t,agent,reward");
    for a in 1..=agents {
        let _ = write!(out, ",score_{a}");
    }
    for a in 1..=agents {
        let _ = write!(out, ",q_{a}");
    }
    out.push('\n');
    for row in &trace.rows {
        let _ = write!(out, "{},{},{}", row.round, row.agent, row.reward);
        for s in &row.scores {
            let _ = write!(out, ",{s}");
        }
        for q in &row.queues {
            let _ = write!(out, ",{q}");
        }
        out.push('\n');
    }
    out
}

/// Queue trajectory schema `t,q_1,...,q_A`.
pub fn queues_to_csv(trace: &AssignmentTrace, agents: usize) -> String {
    let mut out = String::from("t");
    for a in 1..=agents {
        let _ = write!(out, ",q_{a}");
    }
    out.push('\n');
    for row in &trace.rows {
        let _ = write!(out, "{}", row.round);
        for q in &row.queues {
            let _ = write!(out, ",{q}");
        }
        out.push('\n');
    }
    out
}

/// Oracle assignment schema `record_index,assigned_agent,mu_assigned`.
pub fn oracle_to_csv(assignment: &[usize], mu_table: &[Vec<f64>]) -> String {
    let mut out = String::from("record_index,assigned_agent,mu_assigned\n");
    for (t, &a) in assignment.iter().enumerate() {
        let _ = writeln!(out, "{t},{a},{}", mu_table[t][a]);
    }
    out
}

/// Batch plan schema `batch_index,task_index,agent,score`, derived from a
/// traced batched run.
pub fn batches_to_csv(trace: &AssignmentTrace, batch_size: usize) -> String {
    let mut out = String::from("batch_index,task_index,agent,score\n");
    for row in &trace.rows {
        let batch = row.round / batch_size.max(1);
        let _ = writeln!(
            out,
            "{batch},{},{},{}",
            row.round, row.agent, row.scores[row.agent]
        );
    }
    out
}

/// Offline benchmark schema `family,error`.
pub fn offline_to_csv(rows: &[(String, f64)]) -> String {
    let mut out = String::from("family,error\n");
    for (family, error) in rows {
        let _ = writeln!(out, "{family},{error}");
    }
    out
}

pub fn parse_offline_csv(text: &str, file: &str) -> Result<Vec<(String, f64)>> {
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let Some((family, error)) = line.split_once(',') else {
            return Err(CliError::ParseError {
                file: file.into(),
                line: idx + 1,
                message: "expected family,error".into(),
            });
        };
        let error: f64 = error.trim().parse().map_err(|_| CliError::ParseError {
            file: file.into(),
            line: idx + 1,
            message: format!("bad number `{error}`"),
        })?;
        rows.push((family.trim().to_string(), error));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "x1,x2,r_agent1,r_agent2\n0.5,-1.25,1,0\n-0.125,3,0,0\n2,0.75,1,1\n";

    #[test]
    fn parses_valid_log() {
        let log = parse_task_log(SAMPLE, "sample.csv", None).unwrap();
        assert_eq!(log.len(), 3);
        assert_eq!(log.feature_dim(), 2);
        assert_eq!(log.num_agents(), 2);
        assert_eq!(log.records()[0].context, vec![0.5, -1.25]);
        assert_eq!(log.records()[0].rewards, vec![true, false]);
    }

    #[test]
    fn round_trip_is_exact() {
        let log = parse_task_log(SAMPLE, "sample.csv", None).unwrap();
        let csv = task_log_to_csv(&log);
        let again = parse_task_log(&csv, "again.csv", None).unwrap();
        assert_eq!(log, again);
    }

    #[test]
    fn rejects_non_binary_reward() {
        let text = "x1,r_agent1,r_agent2\n0.5,1,2\n";
        match parse_task_log(text, "bad.csv", None) {
            Err(CliError::NonBinaryReward { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_empty_and_missing_cells() {
        assert!(matches!(
            parse_task_log("", "empty.csv", None),
            Err(CliError::ParseError { .. })
        ));
        assert!(matches!(
            parse_task_log("x1,r_agent1,r_agent2\n", "hdr.csv", None),
            Err(CliError::ParseError { .. })
        ));
        let text = "x1,r_agent1,r_agent2\n0.5,1\n";
        assert!(matches!(
            parse_task_log(text, "short.csv", None),
            Err(CliError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rejects_non_finite_feature() {
        let text = "x1,r_agent1,r_agent2\nNaN,1,0\n";
        assert!(matches!(
            parse_task_log(text, "nan.csv", None),
            Err(CliError::ParseError { .. })
        ));
    }

    #[test]
    fn agent_names_come_from_config() {
        let log = parse_task_log(
            SAMPLE,
            "sample.csv",
            Some(vec!["human".into(), "model".into()]),
        )
        .unwrap();
        assert_eq!(log.agent_names(), ["human", "model"]);
        let err = parse_task_log(SAMPLE, "sample.csv", Some(vec!["one".into()])).unwrap_err();
        assert!(matches!(err, CliError::ValidationError { .. }));
    }
}
