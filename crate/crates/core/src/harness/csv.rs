//! CSV text for metrics, per-episode outcomes and replanning traces.

use std::fmt::Write;

use super::{EpisodeResult, Metrics, TraceRow};
use crate::error::{Error, Result};
use crate::planner::Waypoint;
use crate::vehicle::DroneState;
use crate::Vec3;

pub const METRICS_HEADER: &str = "episodes,successes,collisions,timeouts,no_path,success_rate,mean_time,mean_path_ratio";
pub const EPISODES_HEADER: &str = "idx,outcome,time,path_len,astar_len";
pub const TRACE_HEADER: &str = "t,x,y,z,yaw,vx,vy,vz,wx,wy,wz,wpsi,event";

pub fn metrics_csv(m: &Metrics) -> String {
    format!(
        "{METRICS_HEADER}\n{},{},{},{},{},{},{},{}\n",
        m.episodes, m.successes, m.collisions, m.timeouts, m.no_path, m.success_rate, m.mean_time, m.mean_path_ratio
    )
}

pub fn episodes_csv(results: &[EpisodeResult]) -> String {
    let mut s = format!("{EPISODES_HEADER}\n");
    for (i, r) in results.iter().enumerate() {
        writeln!(s, "{i},{},{},{},{}", r.outcome.as_str(), r.time, r.path_len, r.astar_len).unwrap();
    }
    s
}

/// One row per replanning step plus the final state. Floats print in
/// shortest round-trip form; the final row leaves the waypoint empty.
pub fn trace_csv(trace: &[TraceRow]) -> String {
    let mut s = format!("{TRACE_HEADER}\n");
    for row in trace {
        let st = &row.state;
        write!(s, "{},{},{},{},{},{},{},{}", st.time, st.p.x, st.p.y, st.p.z, st.psi, st.v.x, st.v.y, st.v.z).unwrap();
        match &row.waypoint {
            Some(w) => write!(s, ",{},{},{},{}", w.w.x, w.w.y, w.w.z, w.psi).unwrap(),
            None => s.push_str(",,,,"),
        }
        writeln!(s, ",{}", row.event).unwrap();
    }
    s
}

/// Inverse of [`trace_csv`]. The yaw rate is not stored, so parsed states
/// carry zero there.
pub fn parse_trace_csv(text: &str) -> Result<Vec<TraceRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == TRACE_HEADER => {}
        _ => return Err(Error::format_line(1, format!("expected header {TRACE_HEADER:?}"))),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 13 {
            return Err(Error::format_line(i + 1, format!("expected 13 fields, found {}", f.len())));
        }
        let num = |k: usize| -> Result<f64> {
            f[k].parse::<f64>()
                .map_err(|_| Error::format_line(i + 1, format!("bad number {:?} in column {}", f[k], k + 1)))
        };
        let state = DroneState {
            p: Vec3::new(num(1)?, num(2)?, num(3)?),
            psi: num(4)?,
            v: Vec3::new(num(5)?, num(6)?, num(7)?),
            psi_dot: 0.0,
            time: num(0)?,
        };
        let waypoint = if f[8..12].iter().all(|v| v.is_empty()) {
            None
        } else {
            Some(Waypoint::world(Vec3::new(num(8)?, num(9)?, num(10)?), num(11)?))
        };
        out.push(TraceRow {
            state,
            waypoint,
            event: f[12].to_string(),
        });
    }
    Ok(out)
}
