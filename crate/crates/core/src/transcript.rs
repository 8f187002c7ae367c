//! Round transcripts: channel events, the verifier's private record, the
//! decision, JSON-lines serialization and post-hoc auditing.

use crate::puf::BitString;
use crate::quantum::{DensityMatrix, C64};
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use serde_json::Value;
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("malformed transcript at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("transcript file is empty")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Offline,
    Online,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Offline => "offline",
            Protocol::Online => "online",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    VtoP,
    PtoV,
    SourceToV,
    SourceToP,
}

/// What a classical message is in the protocol flow.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassicalRole {
    Challenge,
    Reply,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    Classical { role: ClassicalRole, bits: BitString },
    /// Density matrix of the qubit actually put on the channel.
    Quantum(DensityMatrix),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelEvent {
    pub direction: Direction,
    pub payload: Payload,
    pub round: u64,
    pub pair_index: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub accepted: bool,
    pub failing_bit_indices: Vec<usize>,
}

impl Decision {
    pub fn from_failures(failing_bit_indices: Vec<usize>) -> Self {
        Decision {
            accepted: failing_bit_indices.is_empty(),
            failing_bit_indices,
        }
    }
}

/// Verifier-private data: the database response used and the verifier's own
/// measurement outcomes. Never part of any channel.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifierRecord {
    pub response: BitString,
    pub outcomes: BitString,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transcript {
    pub round_id: u64,
    pub protocol: Protocol,
    pub config: Value,
    pub events: Vec<ChannelEvent>,
    pub verifier: Option<VerifierRecord>,
    pub decision: Option<Decision>,
}

impl Transcript {
    pub fn new(protocol: Protocol) -> Self {
        Transcript {
            round_id: 0,
            protocol,
            config: Value::Null,
            events: Vec::new(),
            verifier: None,
            decision: None,
        }
    }

    pub fn push(&mut self, direction: Direction, payload: Payload, pair_index: Option<usize>) {
        self.events.push(ChannelEvent {
            direction,
            payload,
            round: self.round_id,
            pair_index,
        });
    }

    pub fn set_round_id(&mut self, id: u64) {
        self.round_id = id;
        for e in &mut self.events {
            e.round = id;
        }
    }

    pub fn accepted(&self) -> bool {
        self.decision.as_ref().is_some_and(|d| d.accepted)
    }

    pub fn classical_payloads(&self) -> impl Iterator<Item = (Direction, ClassicalRole, &BitString)> + '_ {
        self.events.iter().filter_map(|e| match &e.payload {
            Payload::Classical { role, bits } => Some((e.direction, *role, bits)),
            Payload::Quantum(_) => None,
        })
    }

    /// Writes the transcript as JSON lines: a header, one line per event,
    /// the verifier record and the decision.
    pub fn write_jsonl<W: Write>(&self, w: &mut W) -> Result<(), TranscriptError> {
        let header = HeaderLine {
            r#type: "header".into(),
            round_id: self.round_id,
            protocol: self.protocol,
            config: self.config.clone(),
        };
        serde_json::to_writer(&mut *w, &header)?;
        w.write_all(b"\n")?;
        for e in &self.events {
            let payload = match &e.payload {
                Payload::Classical { role, bits } => PayloadOut::Classical {
                    role: *role,
                    bits: bits.to_string(),
                },
                Payload::Quantum(rho) => PayloadOut::Quantum {
                    dim: rho.dim(),
                    entries: matrix_raw(rho)?,
                },
            };
            let line = EventLineOut {
                r#type: "event",
                direction: e.direction,
                round: e.round,
                pair_index: e.pair_index,
                payload,
            };
            serde_json::to_writer(&mut *w, &line)?;
            w.write_all(b"\n")?;
        }
        if let Some(v) = &self.verifier {
            let line = VerifierLine {
                r#type: "verifier".into(),
                response: v.response.clone(),
                outcomes: v.outcomes.clone(),
            };
            serde_json::to_writer(&mut *w, &line)?;
            w.write_all(b"\n")?;
        }
        if let Some(d) = &self.decision {
            let line = DecisionLine {
                r#type: "decision".into(),
                accepted: d.accepted,
                failing_bit_indices: d.failing_bit_indices.clone(),
            };
            serde_json::to_writer(&mut *w, &line)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Reads every transcript in a JSON-lines stream; a new header line
    /// starts a new transcript.
    pub fn read_all<R: BufRead>(r: R) -> Result<Vec<Transcript>, TranscriptError> {
        let mut out: Vec<Transcript> = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let lineno = idx + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let malformed = |reason: String| TranscriptError::Malformed { line: lineno, reason };
            let value: Value = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
            let kind = value
                .get("type")
                .and_then(Value::as_str)
                .ok_or_else(|| malformed("missing \"type\"".into()))?
                .to_string();
            if kind == "header" {
                let h: HeaderLine = serde_json::from_value(value).map_err(|e| malformed(e.to_string()))?;
                let mut t = Transcript::new(h.protocol);
                t.round_id = h.round_id;
                t.config = h.config;
                out.push(t);
                continue;
            }
            let current = out
                .last_mut()
                .ok_or_else(|| malformed("record before any header".into()))?;
            match kind.as_str() {
                "event" => {
                    let e: EventLineIn = serde_json::from_value(value).map_err(|e| malformed(e.to_string()))?;
                    let payload = match e.payload {
                        PayloadIn::Classical { role, bits } => Payload::Classical {
                            role,
                            bits: bits.parse().map_err(|err: crate::puf::PufError| malformed(err.to_string()))?,
                        },
                        PayloadIn::Quantum { dim, entries } => {
                            let data: Vec<C64> = entries.iter().map(|[re, im]| C64::new(*re, *im)).collect();
                            let rho = DensityMatrix::from_entries(dim, &data).map_err(|err| malformed(err.to_string()))?;
                            Payload::Quantum(rho)
                        }
                    };
                    current.events.push(ChannelEvent {
                        direction: e.direction,
                        payload,
                        round: e.round,
                        pair_index: e.pair_index,
                    });
                }
                "verifier" => {
                    let v: VerifierLine = serde_json::from_value(value).map_err(|e| malformed(e.to_string()))?;
                    current.verifier = Some(VerifierRecord {
                        response: v.response,
                        outcomes: v.outcomes,
                    });
                }
                "decision" => {
                    let d: DecisionLine = serde_json::from_value(value).map_err(|e| malformed(e.to_string()))?;
                    current.decision = Some(Decision {
                        accepted: d.accepted,
                        failing_bit_indices: d.failing_bit_indices,
                    });
                }
                other => return Err(malformed(format!("unknown record type {other:?}"))),
            }
        }
        if out.is_empty() {
            return Err(TranscriptError::Empty);
        }
        Ok(out)
    }
}

/// Decimal with 17 significant digits.
fn format_sig17(x: f64) -> String {
    format!("{x:.16e}")
}

fn matrix_raw(rho: &DensityMatrix) -> Result<Box<RawValue>, TranscriptError> {
    let parts: Vec<String> = rho
        .entries()
        .iter()
        .map(|z| format!("[{},{}]", format_sig17(z.re), format_sig17(z.im)))
        .collect();
    Ok(RawValue::from_string(format!("[{}]", parts.join(",")))?)
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    r#type: String,
    round_id: u64,
    protocol: Protocol,
    config: Value,
}

#[derive(Serialize)]
struct EventLineOut {
    r#type: &'static str,
    direction: Direction,
    round: u64,
    pair_index: Option<usize>,
    payload: PayloadOut,
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum PayloadOut {
    Classical { role: ClassicalRole, bits: String },
    Quantum { dim: usize, entries: Box<RawValue> },
}

#[derive(Deserialize)]
struct EventLineIn {
    direction: Direction,
    round: u64,
    pair_index: Option<usize>,
    payload: PayloadIn,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum PayloadIn {
    Classical { role: ClassicalRole, bits: String },
    Quantum { dim: usize, entries: Vec<[f64; 2]> },
}

#[derive(Serialize, Deserialize)]
struct VerifierLine {
    r#type: String,
    response: BitString,
    outcomes: BitString,
}

#[derive(Serialize, Deserialize)]
struct DecisionLine {
    r#type: String,
    accepted: bool,
    failing_bit_indices: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AuditCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AuditReport {
    pub round_id: u64,
    pub protocol: Protocol,
    pub recomputed: Option<Decision>,
    pub checks: Vec<AuditCheck>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Re-derives the decision from the recorded reply and verifier record, and
/// checks the structural channel invariants.
pub fn audit_transcript(t: &Transcript) -> AuditReport {
    let mut checks = Vec::new();
    let classical: Vec<_> = t.classical_payloads().collect();
    let challenges: Vec<_> = classical
        .iter()
        .filter(|(d, r, _)| *d == Direction::VtoP && *r == ClassicalRole::Challenge)
        .collect();
    let replies: Vec<_> = classical
        .iter()
        .filter(|(d, r, _)| *d == Direction::PtoV && *r == ClassicalRole::Reply)
        .collect();

    // The only classical traffic is one challenge and at most one reply; the
    // response never travels on its own.
    let extra = classical.len() - challenges.len() - replies.len();
    let discipline_ok = challenges.len() == 1 && replies.len() <= 1 && extra == 0;
    checks.push(AuditCheck {
        name: "channel_discipline",
        passed: discipline_ok,
        detail: format!(
            "{} challenge, {} reply, {} other classical payload(s)",
            challenges.len(),
            replies.len(),
            extra
        ),
    });

    let quantum_ok = t.events.iter().all(|e| match (&e.payload, t.protocol) {
        (Payload::Classical { .. }, _) => true,
        (Payload::Quantum(rho), Protocol::Offline) => {
            matches!(e.direction, Direction::SourceToV | Direction::SourceToP) && rho.validate().is_ok()
        }
        (Payload::Quantum(rho), Protocol::Online) => e.direction == Direction::PtoV && rho.validate().is_ok(),
    });
    checks.push(AuditCheck {
        name: "quantum_payload_placement",
        passed: quantum_ok,
        detail: "quantum payloads only on the permitted links and physically valid".into(),
    });

    let recomputed = match (&t.verifier, replies.first()) {
        (Some(record), Some((_, _, reply))) => recompute(t.protocol, record, reply),
        _ => None,
    };
    let decision_ok = match (&t.decision, &recomputed) {
        (Some(d), Some(r)) => d == r,
        (None, None) => t.verifier.is_none(),
        _ => false,
    };
    checks.push(AuditCheck {
        name: "decision_recomputed",
        passed: decision_ok,
        detail: match (&t.decision, &recomputed) {
            (Some(d), Some(r)) => format!("recorded accepted={}, recomputed accepted={}", d.accepted, r.accepted),
            (None, None) => "round did not reach verification".into(),
            _ => "decision and verifier record are inconsistent".into(),
        },
    });

    AuditReport {
        round_id: t.round_id,
        protocol: t.protocol,
        recomputed,
        checks,
    }
}

fn recompute(protocol: Protocol, record: &VerifierRecord, reply: &BitString) -> Option<Decision> {
    match protocol {
        Protocol::Offline => crate::protocol::verify_offline(reply, &record.outcomes).ok(),
        Protocol::Online => {
            let k = record.response.len() / 2;
            let (_, y2) = record.response.split_at(k);
            crate::protocol::verify_online(&record.outcomes, reply, &y2).ok()
        }
    }
}
