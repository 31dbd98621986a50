//! Simulated IMSI-catcher exchange between a UE and the UAV cell.

use std::collections::VecDeque;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// NAS cause carried by the catcher's TAU_REJECT ("implicitly detached").
pub const CAUSE_IMPLICITLY_DETACHED: u8 = 10;

/// Longest legal exchange.
pub const MAX_MESSAGES: usize = 7;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Message {
    Sib { tac: u16, priority: u8 },
    TauRequest { tac: u16 },
    TauReject { cause: u8 },
    AttachRequest { guti: String },
    IdentityRequest,
    IdentityResponse { imsi: String },
    AttachReject,
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Sib { .. } => "SIB",
            Message::TauRequest { .. } => "TAU_REQUEST",
            Message::TauReject { .. } => "TAU_REJECT",
            Message::AttachRequest { .. } => "ATTACH_REQUEST",
            Message::IdentityRequest => "IDENTITY_REQUEST",
            Message::IdentityResponse { .. } => "IDENTITY_RESPONSE",
            Message::AttachReject => "ATTACH_REJECT",
        }
    }

    pub fn payload(&self) -> String {
        match self {
            Message::Sib { tac, priority } => format!("tac={tac},priority={priority}"),
            Message::TauRequest { tac } => format!("tac={tac}"),
            Message::TauReject { cause } => format!("cause={cause}"),
            Message::AttachRequest { guti } => format!("guti={guti}"),
            Message::IdentityResponse { imsi } => format!("imsi={imsi}"),
            Message::IdentityRequest | Message::AttachReject => "-".to_string(),
        }
    }

    pub fn carries_imsi(&self) -> bool {
        matches!(self, Message::IdentityResponse { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Downlink,
    Uplink,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Downlink => "DL",
            Direction::Uplink => "UL",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UeState {
    CampedOnGround,
    Reselecting,
    TauSent,
    Deregistered,
    AttachSent,
    IdentitySent,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UeFsm {
    pub state: UeState,
    pub imsi: String,
    pub guti: String,
    pub serving_tac: u16,
    pub serving_priority: u8,
    /// Every state entered, in order, starting with the initial one.
    pub history: Vec<UeState>,
    identity_requested: bool,
}

fn valid_imsi(imsi: &str) -> bool {
    imsi.len() == 15 && imsi.bytes().all(|b| b.is_ascii_digit())
}

impl UeFsm {
    pub fn new(imsi: &str, guti: &str, serving_tac: u16) -> Result<Self> {
        if !valid_imsi(imsi) {
            return Err(param(format!("IMSI must be 15 digits, got {imsi:?}")));
        }
        Ok(Self {
            state: UeState::CampedOnGround,
            imsi: imsi.to_string(),
            guti: guti.to_string(),
            serving_tac,
            serving_priority: 3,
            history: vec![UeState::CampedOnGround],
            identity_requested: false,
        })
    }

    fn enter(&mut self, s: UeState) {
        self.state = s;
        self.history.push(s);
    }

    /// True once an IDENTITY_REQUEST has been accepted.
    pub fn identity_requested(&self) -> bool {
        self.identity_requested
    }
}

fn violation(state: impl fmt::Debug, msg: &Message) -> Error {
    Error::ProtocolViolation { state: format!("{state:?}"), message: msg.kind().to_string() }
}

/// Advances the UE on a downlink message. A rejected message leaves the FSM
/// untouched.
pub fn ue_step(fsm: &UeFsm, msg: &Message) -> Result<(UeFsm, Vec<Message>)> {
    use UeState::*;
    let mut next = fsm.clone();
    let out = match (fsm.state, msg) {
        (CampedOnGround, Message::Sib { tac, priority }) => {
            if *tac == fsm.serving_tac || *priority <= fsm.serving_priority {
                vec![]
            } else {
                next.enter(Reselecting);
                let old = fsm.serving_tac;
                next.serving_tac = *tac;
                next.serving_priority = *priority;
                next.enter(TauSent);
                vec![Message::TauRequest { tac: old }]
            }
        }
        (_, Message::Sib { .. }) => vec![],
        (TauSent, Message::TauReject { cause }) if *cause == CAUSE_IMPLICITLY_DETACHED => {
            next.enter(Deregistered);
            next.enter(AttachSent);
            vec![Message::AttachRequest { guti: fsm.guti.clone() }]
        }
        (AttachSent, Message::IdentityRequest) => {
            next.identity_requested = true;
            next.enter(IdentitySent);
            vec![Message::IdentityResponse { imsi: fsm.imsi.clone() }]
        }
        (IdentitySent, Message::AttachReject) => {
            next.enter(Rejected);
            vec![]
        }
        (s, m) => return Err(violation(s, m)),
    };
    Ok((next, out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CatcherState {
    Broadcasting,
    AwaitTau,
    AwaitAttach,
    AwaitIdentity,
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatcherFsm {
    pub state: CatcherState,
    pub advertised_tac: u16,
    pub priority: u8,
    pub captured_imsi: Option<String>,
    pub ue_rangeable: bool,
}

impl CatcherFsm {
    /// Catcher on the highest reselection priority. `ground_tac` is the TAC of
    /// the cell the UE camps on; the advertised one must differ.
    pub fn new(advertised_tac: u16, ground_tac: u16) -> Result<Self> {
        if advertised_tac == ground_tac {
            return Err(param("advertised TAC must differ from the ground TAC"));
        }
        Ok(Self { state: CatcherState::Broadcasting, advertised_tac, priority: u8::MAX, captured_imsi: None, ue_rangeable: false })
    }

    /// Emits the SIB and starts waiting for a TAU.
    pub fn broadcast(&self) -> Result<(CatcherFsm, Message)> {
        let sib = Message::Sib { tac: self.advertised_tac, priority: self.priority };
        if self.state != CatcherState::Broadcasting {
            return Err(violation(self.state, &sib));
        }
        let mut next = self.clone();
        next.state = CatcherState::AwaitTau;
        Ok((next, sib))
    }
}

/// Advances the catcher on an uplink message.
pub fn catcher_step(fsm: &CatcherFsm, msg: &Message) -> Result<(CatcherFsm, Vec<Message>)> {
    use CatcherState::*;
    let mut next = fsm.clone();
    let out = match (fsm.state, msg) {
        (AwaitTau, Message::TauRequest { .. }) => {
            next.state = AwaitAttach;
            vec![Message::TauReject { cause: CAUSE_IMPLICITLY_DETACHED }]
        }
        (AwaitAttach, Message::AttachRequest { .. }) => {
            next.state = AwaitIdentity;
            vec![Message::IdentityRequest]
        }
        (AwaitIdentity, Message::IdentityResponse { imsi }) if valid_imsi(imsi) => {
            next.captured_imsi = Some(imsi.clone());
            next.state = Done;
            next.ue_rangeable = true;
            vec![Message::AttachReject]
        }
        (s, m) => return Err(violation(s, m)),
    };
    Ok((next, out))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub direction: Direction,
    pub message: Message,
}

impl fmt::Display for TranscriptEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.direction, self.message.kind(), self.message.payload())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Transcript {
    pub entries: Vec<TranscriptEntry>,
}

impl Transcript {
    /// One `direction kind payload` line per delivered message.
    pub fn to_log(&self) -> String {
        self.entries.iter().map(|e| format!("{e}\n")).collect()
    }

    pub fn kinds(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.message.kind()).collect()
    }
}

/// The chart order of a successful exchange.
pub const CANONICAL_KINDS: [&str; 7] =
    ["SIB", "TAU_REQUEST", "TAU_REJECT", "ATTACH_REQUEST", "IDENTITY_REQUEST", "IDENTITY_RESPONSE", "ATTACH_REJECT"];

/// Final state of both sides after an exchange.
#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeOutcome {
    pub ue: UeFsm,
    pub catcher: CatcherFsm,
    pub transcript: Transcript,
}

/// Runs both FSMs over a lossless in-order link until quiescence.
pub fn run_exchange(ue: &UeFsm, catcher: &CatcherFsm) -> Result<ExchangeOutcome> {
    let mut link = PerfectLink;
    let (out, violations) = run_exchange_with(ue, catcher, &mut link, 4 * MAX_MESSAGES);
    match violations.into_iter().next() {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// Decides what happens to each message in flight.
pub trait Link {
    /// Picks the index of the next queued message to deliver (reordering),
    /// or `None` to deliver the head.
    fn pick(&mut self, queue_len: usize) -> Option<usize> {
        let _ = queue_len;
        None
    }
    /// Whether the message is lost.
    fn drop(&mut self) -> bool {
        false
    }
    /// Whether the message is delivered twice.
    fn duplicate(&mut self) -> bool {
        false
    }
}

pub struct PerfectLink;

impl Link for PerfectLink {}

/// Random loss, duplication and reordering.
pub struct LossyLink<R: Rng> {
    pub rng: R,
    pub p_drop: f64,
    pub p_dup: f64,
    pub p_reorder: f64,
}

impl<R: Rng> Link for LossyLink<R> {
    fn pick(&mut self, queue_len: usize) -> Option<usize> {
        (queue_len > 1 && self.rng.random::<f64>() < self.p_reorder).then(|| self.rng.random_range(0..queue_len))
    }
    fn drop(&mut self) -> bool {
        self.rng.random::<f64>() < self.p_drop
    }
    fn duplicate(&mut self) -> bool {
        self.rng.random::<f64>() < self.p_dup
    }
}

/// Drives the exchange over `link` for at most `max_deliveries` deliveries.
/// Rejected messages are discarded and reported; the FSMs keep their state.
pub fn run_exchange_with<L: Link>(
    ue: &UeFsm,
    catcher: &CatcherFsm,
    link: &mut L,
    max_deliveries: usize,
) -> (ExchangeOutcome, Vec<Error>) {
    let mut ue = ue.clone();
    let mut catcher = catcher.clone();
    let mut transcript = Transcript::default();
    let mut violations = Vec::new();
    let mut queue: VecDeque<TranscriptEntry> = VecDeque::new();
    match catcher.broadcast() {
        Ok((c, sib)) => {
            catcher = c;
            queue.push_back(TranscriptEntry { direction: Direction::Downlink, message: sib });
        }
        Err(e) => violations.push(e),
    }
    let mut deliveries = 0;
    while deliveries < max_deliveries {
        let idx = link.pick(queue.len()).unwrap_or(0);
        let Some(entry) = queue.remove(idx) else { break };
        if link.drop() {
            continue;
        }
        let copies = if link.duplicate() { 2 } else { 1 };
        for _ in 0..copies {
            deliveries += 1;
            let (direction, step) = match entry.direction {
                Direction::Downlink => (Direction::Uplink, ue_step(&ue, &entry.message).map(|(u, m)| {
                    ue = u;
                    m
                })),
                Direction::Uplink => (Direction::Downlink, catcher_step(&catcher, &entry.message).map(|(c, m)| {
                    catcher = c;
                    m
                })),
            };
            match step {
                Ok(replies) => {
                    transcript.entries.push(entry.clone());
                    queue.extend(replies.into_iter().map(|message| TranscriptEntry { direction, message }));
                }
                Err(e) => violations.push(e),
            }
        }
    }
    (ExchangeOutcome { ue, catcher, transcript }, violations)
}
