use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ledger::{Attribution, CommLedger, KindTotals};
use super::message::{Channel, MessageKind};
use crate::error::{Error, Result};

const MB: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::Config(format!(
                "unknown report format `{other}` (expected csv or json)"
            ))),
        }
    }
}

/// Channel and per-kind totals of a ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerSummary {
    pub attribution: Attribution,
    pub clients: usize,
    pub c2c_bytes: u64,
    pub c2s_bytes: u64,
    pub c2c_payload_bytes: u64,
    pub c2s_payload_bytes: u64,
    pub c2c_mb: f64,
    pub c2s_mb: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2c_mbit: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2s_mbit: Option<f64>,
    pub kinds: BTreeMap<String, KindTotals>,
}

impl CommLedger {
    pub fn summary(&self, bits: bool) -> LedgerSummary {
        let c2c = self.total_bytes(Channel::ClientToClient);
        let c2s = self.total_bytes(Channel::ClientToServer);
        LedgerSummary {
            attribution: self.attribution(),
            clients: self.num_clients(),
            c2c_bytes: c2c,
            c2s_bytes: c2s,
            c2c_payload_bytes: self.payload_bytes(Channel::ClientToClient),
            c2s_payload_bytes: self.payload_bytes(Channel::ClientToServer),
            c2c_mb: c2c as f64 / MB,
            c2s_mb: c2s as f64 / MB,
            c2c_mbit: bits.then(|| c2c as f64 * 8.0 / MB),
            c2s_mbit: bits.then(|| c2s as f64 * 8.0 / MB),
            kinds: MessageKind::ALL
                .iter()
                .map(|&k| (k.name().to_string(), self.kind(k)))
                .filter(|(_, t)| t.messages > 0)
                .collect(),
        }
    }

    /// Client ids ordered by descending total bytes, ties by id.
    pub fn clients_by_volume(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = (0..self.num_clients()).collect();
        ids.sort_by(|&a, &b| {
            self.client(b)
                .total()
                .cmp(&self.client(a).total())
                .then(a.cmp(&b))
        });
        ids
    }

    /// Per-client table followed by totals rows.
    pub fn report(&self, format: ReportFormat, bits: bool) -> Result<String> {
        match format {
            ReportFormat::Json => Ok(serde_json::to_string_pretty(&self.summary(bits))?),
            ReportFormat::Csv => {
                let mut out = String::from("client_id,c2c_bytes,c2s_bytes\n");
                for id in self.clients_by_volume() {
                    let c = self.client(id);
                    writeln!(out, "{id},{},{}", c.c2c_bytes, c.c2s_bytes).unwrap();
                }
                let s = self.summary(bits);
                writeln!(out, "total,{},{}", s.c2c_bytes, s.c2s_bytes).unwrap();
                writeln!(out, "total_mb,{},{}", s.c2c_mb, s.c2s_mb).unwrap();
                if let (Some(a), Some(b)) = (s.c2c_mbit, s.c2s_mbit) {
                    writeln!(out, "total_mbit,{a},{b}").unwrap();
                }
                Ok(out)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netsim::Message;

    #[test]
    fn empty_ledger_reports_zero() {
        let l = CommLedger::default();
        let csv = l.report(ReportFormat::Csv, false).unwrap();
        assert_eq!(csv, "client_id,c2c_bytes,c2s_bytes\ntotal,0,0\ntotal_mb,0,0\n");
        let s = l.summary(false);
        assert_eq!((s.c2c_bytes, s.c2s_bytes), (0, 0));
    }

    #[test]
    fn rows_sum_to_totals_and_are_sorted() {
        let mut l = CommLedger::default().with_clients(4);
        l.record(Message::c2c(0, 2, 1, MessageKind::Embedding, 7));
        l.record(Message::c2c(0, 2, 3, MessageKind::Embedding, 7));
        l.record(Message::down(0, 1, MessageKind::Sync, 100));
        let csv = l.report(ReportFormat::Csv, true).unwrap();
        let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|r| r.split(',').collect()).collect();
        assert_eq!(rows[0][0], "1");
        assert_eq!(rows[1][0], "2");
        let (mut a, mut b) = (0u64, 0u64);
        for r in rows.iter().take_while(|r| r[0] != "total") {
            a += r[1].parse::<u64>().unwrap();
            b += r[2].parse::<u64>().unwrap();
        }
        let total = rows.iter().find(|r| r[0] == "total").unwrap();
        assert_eq!((a, b), (total[1].parse().unwrap(), total[2].parse().unwrap()));
        assert!(csv.contains("total_mbit"));
    }

    #[test]
    fn unknown_format_is_error() {
        assert!("xml".parse::<ReportFormat>().is_err());
        assert_eq!("JSON".parse::<ReportFormat>().unwrap(), ReportFormat::Json);
    }
}
