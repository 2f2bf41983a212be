use std::io::{self, Write};

use serde::Serialize;

use crate::field::FieldElement;
use crate::player::{HaltReason, Verdict};
use crate::types::PlayerId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Broadcast,
    Delivery,
    Output,
    Halt,
}

/// One transcript line. Field order is the export order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Record {
    pub step: u64,
    pub kind: RecordKind,
    pub sender: Option<usize>,
    pub recipient: Option<usize>,
    pub game: Option<u64>,
    pub stage: Option<u8>,
    pub verdict: Option<Verdict>,
    pub value: Option<u32>,
    pub reason: Option<HaltReason>,
}

impl Record {
    pub(crate) fn blank(step: u64, kind: RecordKind) -> Self {
        Self {
            step,
            kind,
            sender: None,
            recipient: None,
            game: None,
            stage: None,
            verdict: None,
            value: None,
            reason: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    pub records: Vec<Record>,
    pub outputs: Vec<Option<FieldElement>>,
    pub halts: Vec<Option<HaltReason>>,
    /// Highest game each player broadcast in.
    pub games_reached: Vec<u64>,
    /// Deliveries made (scheduler steps).
    pub steps: u64,
}

impl Transcript {
    pub(crate) fn new(n: usize) -> Self {
        Self { records: Vec::new(), outputs: vec![None; n], halts: vec![None; n], games_reached: vec![0; n], steps: 0 }
    }

    pub fn n(&self) -> usize {
        self.outputs.len()
    }

    pub fn output(&self, player: PlayerId) -> Option<FieldElement> {
        self.outputs[player.0]
    }

    pub fn halt(&self, player: PlayerId) -> Option<HaltReason> {
        self.halts[player.0]
    }

    /// Writes one JSON object per record.
    pub fn write_ndjson<W: Write>(&self, mut out: W) -> io::Result<()> {
        for record in &self.records {
            serde_json::to_writer(&mut out, record)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_ndjson(&self) -> String {
        let mut buf = Vec::new();
        self.write_ndjson(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }
}
