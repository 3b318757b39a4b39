use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bytes per transmitted real.
pub const FLOAT_BYTES: u64 = 4;
/// Fixed per-message metadata (task and kind tags).
pub const HEADER_BYTES: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Endpoint {
    Server,
    Client(usize),
}

impl Endpoint {
    pub fn client_id(self) -> Option<usize> {
        match self {
            Endpoint::Server => None,
            Endpoint::Client(c) => Some(c),
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Server => f.write_str("server"),
            Endpoint::Client(c) => write!(f, "{c}"),
        }
    }
}

impl FromStr for Endpoint {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "server" {
            return Ok(Endpoint::Server);
        }
        s.parse()
            .map(Endpoint::Client)
            .map_err(|_| Error::Config(format!("bad endpoint `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Channel {
    #[serde(rename = "c2c")]
    ClientToClient,
    #[serde(rename = "c2s")]
    ClientToServer,
}

impl Channel {
    pub fn name(self) -> &'static str {
        match self {
            Channel::ClientToClient => "c2c",
            Channel::ClientToServer => "c2s",
        }
    }
}

macro_rules! kinds {
    ($($variant:ident => $name:literal),* $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum MessageKind {
            $($variant),*
        }

        impl MessageKind {
            pub const ALL: &'static [MessageKind] = &[$(MessageKind::$variant),*];

            pub fn name(self) -> &'static str {
                match self {
                    $(MessageKind::$variant => $name),*
                }
            }
        }

        impl FromStr for MessageKind {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok(MessageKind::$variant),)*
                    _ => Err(Error::Config(format!("unknown message kind `{s}`"))),
                }
            }
        }
    };
}

kinds! {
    ModelShare => "model-share",
    Repr0 => "repr0",
    Repr1 => "repr1",
    GradFactor => "grad-factor",
    ServerModel => "server-model",
    GradUp => "grad-up",
    ValReport => "val-report",
    Sync => "sync",
    Embedding => "embedding",
}

impl MessageKind {
    pub(crate) fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One simulated transmission. `round` is the protocol step it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Message {
    pub round: u64,
    pub src: Endpoint,
    pub dst: Endpoint,
    pub kind: MessageKind,
    pub float_count: u64,
}

impl Message {
    pub fn new(round: u64, src: Endpoint, dst: Endpoint, kind: MessageKind, float_count: u64) -> Self {
        debug_assert!(src != dst, "message to self");
        debug_assert!(
            src != Endpoint::Server || dst != Endpoint::Server,
            "server cannot message itself"
        );
        Message {
            round,
            src,
            dst,
            kind,
            float_count,
        }
    }

    pub fn c2c(round: u64, src: usize, dst: usize, kind: MessageKind, float_count: u64) -> Self {
        Message::new(round, Endpoint::Client(src), Endpoint::Client(dst), kind, float_count)
    }

    pub fn down(round: u64, client: usize, kind: MessageKind, float_count: u64) -> Self {
        Message::new(round, Endpoint::Server, Endpoint::Client(client), kind, float_count)
    }

    pub fn up(round: u64, client: usize, kind: MessageKind, float_count: u64) -> Self {
        Message::new(round, Endpoint::Client(client), Endpoint::Server, kind, float_count)
    }

    pub fn channel(&self) -> Channel {
        if self.src == Endpoint::Server || self.dst == Endpoint::Server {
            Channel::ClientToServer
        } else {
            Channel::ClientToClient
        }
    }

    pub fn payload_bytes(&self) -> u64 {
        self.float_count * FLOAT_BYTES
    }

    pub fn bytes(&self) -> u64 {
        self.payload_bytes() + HEADER_BYTES
    }

    pub(crate) fn order_key(&self) -> (u64, Endpoint, Endpoint, MessageKind) {
        (self.round, self.src, self.dst, self.kind)
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.round,
            self.channel().name(),
            self.src,
            self.dst,
            self.kind,
            self.bytes()
        )
    }
}
