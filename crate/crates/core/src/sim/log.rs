use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemTag {
    Finite,
    Limit,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub i: usize,
    pub sys: SystemTag,
}

/// Sorted potentials of the finite system at a requested time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    pub potentials: Vec<f64>,
}

/// Accepted events of one replica in time order, plus requested snapshots.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub events: Vec<Event>,
    pub snapshots: Vec<Snapshot>,
}

impl EventLog {
    /// One header line, then one event per line.
    pub fn write_ndjson<W: Write>(&self, header: &serde_json::Value, mut out: W) -> Result<()> {
        serde_json::to_writer(&mut out, header)?;
        out.write_all(b"\n")?;
        for e in &self.events {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// `# {header}` comment, a column header, then one row per snapshot.
    pub fn write_snapshots_csv<W: Write>(&self, header: &serde_json::Value, mut out: W) -> Result<()> {
        writeln!(out, "# {}", serde_json::to_string(header)?)?;
        let width = self.snapshots.first().map_or(0, |s| s.potentials.len());
        write!(out, "time")?;
        for k in 0..width {
            write!(out, ",x{k}")?;
        }
        writeln!(out)?;
        for s in &self.snapshots {
            write!(out, "{}", s.time)?;
            for x in &s.potentials {
                write!(out, ",{x}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn first_time(&self, i: usize) -> Option<f64> {
        self.events.iter().find(|e| e.i == i).map(|e| e.t)
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.events.windows(2).all(|w| w[0].t < w[1].t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ndjson_layout() {
        let log = EventLog {
            events: vec![
                Event { t: 0.25, i: 3, sys: SystemTag::Finite },
                Event { t: 0.5, i: 0, sys: SystemTag::Both },
            ],
            snapshots: vec![],
        };
        let mut buf = Vec::new();
        log.write_ndjson(&serde_json::json!({"seed": 7}), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], r#"{"seed":7}"#);
        assert_eq!(lines[1], r#"{"t":0.25,"i":3,"sys":"finite"}"#);
        assert_eq!(lines[2], r#"{"t":0.5,"i":0,"sys":"both"}"#);
    }
}
