//! Per-cycle log rows, discrete events, and their CSV forms.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::NUM_ROTORS;
use crate::error::{Error, Result};
use crate::fault_tolerant::Mode;

/// Bumped whenever the row layout changes.
pub const SCHEMA_VERSION: u32 = 1;

/// One control cycle. Flat so it maps one-to-one onto CSV columns.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub t: f64,
    pub px: f64,
    pub py: f64,
    pub pz: f64,
    pub pdx: f64,
    pub pdy: f64,
    pub pdz: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub qw: f64,
    pub qx: f64,
    pub qy: f64,
    pub qz: f64,
    pub wx: f64,
    pub wy: f64,
    pub wz: f64,
    pub f_nom: f64,
    pub m1_nom: f64,
    pub m2_nom: f64,
    pub m3_nom: f64,
    pub f_cmd: f64,
    pub m1_cmd: f64,
    pub m2_cmd: f64,
    pub m3_cmd: f64,
    pub omega_nom1: f64,
    pub omega_nom2: f64,
    pub omega_nom3: f64,
    pub omega_nom4: f64,
    pub omega_cmd1: f64,
    pub omega_cmd2: f64,
    pub omega_cmd3: f64,
    pub omega_cmd4: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma3: f64,
    pub sigma4: f64,
    pub sigma5: f64,
    pub sigma6: f64,
    pub sigma_f1: f64,
    pub sigma_f2: f64,
    pub sigma_f3: f64,
    pub sigma_f4: f64,
    pub sigma_f5: f64,
    pub sigma_f6: f64,
    pub kmis_raw1: f64,
    pub kmis_raw2: f64,
    pub kmis_raw3: f64,
    pub kmis_raw4: f64,
    pub kmis1: f64,
    pub kmis2: f64,
    pub kmis3: f64,
    pub kmis4: f64,
    pub mode: Mode,
    /// 1-based; 0 while adaptive.
    pub disabled_rotor: usize,
    /// Bit `i` set when rotor `i + 1` was clipped this cycle.
    pub clip_mask: u8,
}

impl Row {
    pub fn position_error(&self) -> [f64; 3] {
        [self.px - self.pdx, self.py - self.pdy, self.pz - self.pdz]
    }

    pub fn k_mis(&self) -> [f64; NUM_ROTORS] {
        [self.kmis1, self.kmis2, self.kmis3, self.kmis4]
    }

    pub fn sigma_filtered(&self) -> [f64; 6] {
        [
            self.sigma_f1,
            self.sigma_f2,
            self.sigma_f3,
            self.sigma_f4,
            self.sigma_f5,
            self.sigma_f6,
        ]
    }
}

/// CSV header derived from the row layout.
fn header_line() -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.serialize(Row::default())?;
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    let text = String::from_utf8_lossy(&bytes);
    Ok(text.lines().next().unwrap_or_default().to_string())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    DamageApplied,
    Transition,
    ClipOnset,
    Divergence,
    IntegrationFault,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    /// 1-based, 0 when not rotor-specific.
    pub rotor: usize,
    /// Kind-specific: kf ratio, estimate at transition, or error size.
    pub value: f64,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunRecord {
    pub rows: Vec<Row>,
    pub events: Vec<Event>,
}

impl RunRecord {
    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub fn write_rows<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# rotorsim run log, schema {SCHEMA_VERSION}")?;
        if self.rows.is_empty() {
            writeln!(out, "{}", header_line()?)?;
            return Ok(());
        }
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_events<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "kind", "rotor", "value", "detail"])?;
        for e in &self.events {
            let kind = serde_json::to_value(e.kind)?;
            w.write_record([
                e.t.to_string(),
                kind.as_str().unwrap_or_default().to_string(),
                e.rotor.to_string(),
                e.value.to_string(),
                e.detail.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_rows(std::fs::File::create(dir.join("run.csv"))?)?;
        self.write_events(std::fs::File::create(dir.join("events.csv"))?)?;
        Ok(())
    }

    /// Read rows back from a `run.csv`, checking the schema stamp.
    pub fn read_rows<R: Read>(input: R) -> Result<Vec<Row>> {
        let mut text = String::new();
        let mut input = input;
        input.read_to_string(&mut text)?;
        let first = text.lines().next().unwrap_or_default();
        let expected = format!("# rotorsim run log, schema {SCHEMA_VERSION}");
        if first.trim() != expected {
            return Err(Error::Configuration(format!("unrecognized log header {first:?}")));
        }
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        r.deserialize().map(|row| row.map_err(Error::from)).collect()
    }
}
