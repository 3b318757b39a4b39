//! Simulated network: who may talk to whom in a round, and a byte-exact
//! ledger of every transmission.

mod contact;
mod ledger;
mod message;
mod report;

pub use contact::{Availability, ContactSchedule};
pub use ledger::{read_event_log, Attribution, ClientTotals, CommLedger, KindTotals};
pub use message::{Channel, Endpoint, Message, MessageKind, FLOAT_BYTES, HEADER_BYTES};
pub use report::{LedgerSummary, ReportFormat};
