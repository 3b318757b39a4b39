use std::collections::BTreeSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::message::{Channel, Endpoint, Message, MessageKind, FLOAT_BYTES, HEADER_BYTES};
use crate::error::{Error, Result};

/// Which endpoint a client-to-client transmission is billed to.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attribution {
    #[default]
    Sender,
    Receiver,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientTotals {
    /// Client-to-client bytes billed to this client.
    pub c2c_bytes: u64,
    /// Bytes exchanged with the server, in either direction.
    pub c2s_bytes: u64,
    pub c2c_sent: u64,
    pub c2c_received: u64,
}

impl ClientTotals {
    pub fn total(&self) -> u64 {
        self.c2c_bytes + self.c2s_bytes
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindTotals {
    pub messages: u64,
    pub payload_bytes: u64,
    pub bytes: u64,
}

const KINDS: usize = 9;

/// Per-client, per-channel and per-kind byte counters, plus an optional
/// event log.
#[derive(Debug, Clone, PartialEq)]
pub struct CommLedger {
    attribution: Attribution,
    clients: Vec<ClientTotals>,
    kinds: [KindTotals; KINDS],
    channels: [KindTotals; 2],
    log: Option<Vec<Message>>,
}

impl Default for CommLedger {
    fn default() -> Self {
        CommLedger::new(Attribution::Sender)
    }
}

fn channel_index(c: Channel) -> usize {
    match c {
        Channel::ClientToClient => 0,
        Channel::ClientToServer => 1,
    }
}

impl CommLedger {
    pub fn new(attribution: Attribution) -> Self {
        debug_assert_eq!(MessageKind::ALL.len(), KINDS);
        CommLedger {
            attribution,
            clients: Vec::new(),
            kinds: [KindTotals::default(); KINDS],
            channels: [KindTotals::default(); 2],
            log: None,
        }
    }

    /// Keeps every recorded message in memory.
    pub fn with_log(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    /// Makes sure clients `0..n` appear in reports even if they never talk.
    pub fn with_clients(mut self, n: usize) -> Self {
        self.ensure(n.saturating_sub(1));
        self
    }

    pub fn attribution(&self) -> Attribution {
        self.attribution
    }

    fn ensure(&mut self, id: usize) -> &mut ClientTotals {
        if id >= self.clients.len() {
            self.clients.resize(id + 1, ClientTotals::default());
        }
        &mut self.clients[id]
    }

    pub fn record(&mut self, msg: Message) {
        let bytes = msg.bytes();
        let add = |t: &mut KindTotals| {
            t.messages += 1;
            t.payload_bytes += msg.payload_bytes();
            t.bytes += bytes;
        };
        add(&mut self.kinds[msg.kind.index()]);
        add(&mut self.channels[channel_index(msg.channel())]);
        match (msg.src, msg.dst) {
            (Endpoint::Client(s), Endpoint::Client(d)) => {
                self.ensure(s.max(d));
                self.clients[s].c2c_sent += bytes;
                self.clients[d].c2c_received += bytes;
                let billed = match self.attribution {
                    Attribution::Sender => s,
                    Attribution::Receiver => d,
                };
                self.clients[billed].c2c_bytes += bytes;
            }
            (Endpoint::Client(c), Endpoint::Server) | (Endpoint::Server, Endpoint::Client(c)) => {
                self.ensure(c).c2s_bytes += bytes;
            }
            (Endpoint::Server, Endpoint::Server) => unreachable!("server cannot message itself"),
        }
        if let Some(log) = self.log.as_mut() {
            log.push(msg);
        }
    }

    /// Records messages produced concurrently, in `(round, src, dst, kind)`
    /// order so the log does not depend on scheduling.
    pub fn record_batch(&mut self, mut msgs: Vec<Message>) {
        msgs.sort_by_key(|m| m.order_key());
        for m in msgs {
            self.record(m);
        }
    }

    pub fn replay(events: &[Message], attribution: Attribution) -> Self {
        let mut l = CommLedger::new(attribution).with_log();
        for &m in events {
            l.record(m);
        }
        l
    }

    pub fn num_clients(&self) -> usize {
        self.clients.len()
    }

    pub fn client(&self, id: usize) -> ClientTotals {
        self.clients.get(id).copied().unwrap_or_default()
    }

    pub fn clients(&self) -> &[ClientTotals] {
        &self.clients
    }

    /// Header-inclusive bytes on a channel.
    pub fn total_bytes(&self, channel: Channel) -> u64 {
        self.channels[channel_index(channel)].bytes
    }

    pub fn payload_bytes(&self, channel: Channel) -> u64 {
        self.channels[channel_index(channel)].payload_bytes
    }

    pub fn channel(&self, channel: Channel) -> KindTotals {
        self.channels[channel_index(channel)]
    }

    pub fn kind(&self, kind: MessageKind) -> KindTotals {
        self.kinds[kind.index()]
    }

    pub fn events(&self) -> Option<&[Message]> {
        self.log.as_deref()
    }

    /// Distinct protocol steps that carried client-to-client traffic.
    /// Needs the event log.
    pub fn c2c_rounds(&self) -> Option<BTreeSet<u64>> {
        self.log.as_ref().map(|log| {
            log.iter()
                .filter(|m| m.channel() == Channel::ClientToClient)
                .map(|m| m.round)
                .collect()
        })
    }

    pub fn write_event_log(&self, path: &Path) -> Result<()> {
        let log = self
            .log
            .as_ref()
            .ok_or_else(|| Error::Config("event logging was not enabled for this run".into()))?;
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let write = |w: &mut BufWriter<fs::File>| -> std::io::Result<()> {
            writeln!(w, "round,channel,src,dst,kind,bytes")?;
            for m in log {
                writeln!(w, "{}", m.csv_row())?;
            }
            w.flush()
        };
        write(&mut w).map_err(|e| Error::io(path, e))
    }
}

/// Parses an event log written by [`CommLedger::write_event_log`].
pub fn read_event_log(path: &Path) -> Result<Vec<Message>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file = path.display().to_string();
    let bad = |line: usize, msg: String| Error::Parse {
        file: file.clone(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "round,channel,src,dst,kind,bytes")) => {}
        _ => return Err(bad(1, "missing event log header".into())),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let n = i + 1;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(bad(n, format!("expected 6 fields, found {}", f.len())));
        }
        let round = f[0].parse().map_err(|e| bad(n, format!("round: {e}")))?;
        let src: Endpoint = f[2].parse().map_err(|e| bad(n, format!("{e}")))?;
        let dst: Endpoint = f[3].parse().map_err(|e| bad(n, format!("{e}")))?;
        let kind: MessageKind = f[4].parse().map_err(|e| bad(n, format!("{e}")))?;
        let bytes: u64 = f[5].parse().map_err(|e| bad(n, format!("bytes: {e}")))?;
        if bytes < HEADER_BYTES || !(bytes - HEADER_BYTES).is_multiple_of(FLOAT_BYTES) {
            return Err(bad(n, format!("{bytes} is not a valid message size")));
        }
        if src == dst || (src == Endpoint::Server && dst == Endpoint::Server) {
            return Err(bad(n, "message endpoints must differ".into()));
        }
        let msg = Message::new(round, src, dst, kind, (bytes - HEADER_BYTES) / FLOAT_BYTES);
        if msg.channel().name() != f[1] {
            return Err(bad(n, format!("channel `{}` disagrees with endpoints", f[1])));
        }
        out.push(msg);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_small_c2c_messages() {
        let mut l = CommLedger::default();
        l.record(Message::c2c(0, 0, 1, MessageKind::Embedding, 8));
        l.record(Message::c2c(0, 0, 2, MessageKind::Embedding, 8));
        assert_eq!(l.client(0).c2c_bytes, 80);
        assert_eq!(l.client(1).c2c_bytes, 0);
        assert_eq!(l.client(1).c2c_received, 40);
        assert_eq!(l.total_bytes(Channel::ClientToClient), 80);
        assert_eq!(l.payload_bytes(Channel::ClientToClient), 64);
    }

    #[test]
    fn server_messages_only_move_c2s() {
        let mut l = CommLedger::default();
        l.record(Message::down(0, 4, MessageKind::ServerModel, 10));
        assert_eq!(l.client(4).c2s_bytes, 48);
        assert_eq!(l.client(4).c2c_bytes, 0);
        assert_eq!(l.total_bytes(Channel::ClientToClient), 0);
    }

    #[test]
    fn receiver_attribution() {
        let mut l = CommLedger::new(Attribution::Receiver);
        l.record(Message::c2c(0, 0, 1, MessageKind::Repr0, 3));
        assert_eq!(l.client(0).c2c_bytes, 0);
        assert_eq!(l.client(1).c2c_bytes, 20);
    }

    #[test]
    fn event_log_round_trip_and_replay() {
        let mut l = CommLedger::default().with_log();
        l.record_batch(vec![
            Message::c2c(1, 2, 0, MessageKind::Embedding, 7),
            Message::down(0, 1, MessageKind::Sync, 100),
            Message::up(3, 1, MessageKind::ValReport, 2),
            Message::c2c(1, 0, 2, MessageKind::Embedding, 7),
        ]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.csv");
        l.write_event_log(&path).unwrap();
        let events = read_event_log(&path).unwrap();
        assert_eq!(events.as_slice(), l.events().unwrap());
        assert_eq!(CommLedger::replay(&events, Attribution::Sender), l);
        assert_eq!(l.c2c_rounds().unwrap().into_iter().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn corrupt_log_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.csv");
        fs::write(&path, "round,channel,src,dst,kind,bytes\n0,c2c,1,2,embedding,13\n").unwrap();
        assert!(read_event_log(&path).is_err());
        fs::write(&path, "round,channel,src,dst,kind,bytes\n0,c2s,1,2,embedding,12\n").unwrap();
        assert!(read_event_log(&path).is_err());
    }
}
