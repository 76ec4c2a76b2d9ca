//! Append-only record of everything that happened in a scenario run. The
//! ledger is what makes protocol-level claims directly assertable, above
//! all that user devices never transmit.

use crate::identity::EphemeralId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EntityKind {
    Beacon,
    User,
    Hospital,
    Authority,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LedgerEventKind {
    /// An RF advertisement left the entity's antenna.
    RfTransmission { ephemeral_id: EphemeralId },
    /// A packet was received and logged.
    Reception { from_beacon: String, rssi_dbm: f64 },
    /// A positive user's retained log was forwarded.
    ReportSubmitted { report_id: String, records: usize },
    /// The authority merged a report into the published list.
    IngestCommitted {
        version: u64,
        new_entries: usize,
        duplicate: bool,
    },
    /// A device matched its log against the published list.
    Reconcile {
        published_version: u64,
        events_found: usize,
    },
    /// Both energy stores ran out.
    Depleted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LedgerEvent {
    pub time_s: u64,
    pub entity_kind: EntityKind,
    pub entity: String,
    pub kind: LedgerEventKind,
}

#[derive(Debug, Clone, Default)]
pub struct EventLedger {
    events: Vec<LedgerEvent>,
}

impl EventLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(
        &mut self,
        time_s: u64,
        entity_kind: EntityKind,
        entity: impl Into<String>,
        kind: LedgerEventKind,
    ) {
        self.events.push(LedgerEvent {
            time_s,
            entity_kind,
            entity: entity.into(),
            kind,
        });
    }

    pub fn events(&self) -> &[LedgerEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// RF transmissions attributed to a given entity kind. The protocol's
    /// privacy claim is `count_rf_transmissions_by(EntityKind::User) == 0`
    /// for every scenario.
    pub fn count_rf_transmissions_by(&self, kind: EntityKind) -> usize {
        self.events
            .iter()
            .filter(|e| {
                e.entity_kind == kind
                    && matches!(e.kind, LedgerEventKind::RfTransmission { .. })
            })
            .count()
    }

    pub fn count_matching(&self, pred: impl Fn(&LedgerEvent) -> bool) -> usize {
        self.events.iter().filter(|e| pred(e)).count()
    }
}
