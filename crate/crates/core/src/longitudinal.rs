//! Subject table, long-format expansion and annual percentage change.

use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Group {
    #[serde(rename = "CDR0")]
    Cdr0,
    #[serde(rename = "CDR0.5")]
    Cdr05,
}

impl Group {
    pub fn label(self) -> &'static str {
        match self {
            Group::Cdr0 => "CDR0",
            Group::Cdr05 => "CDR0.5",
        }
    }

    /// 1 for CDR0.5, 0 for CDR0.
    pub fn indicator(self) -> f64 {
        match self {
            Group::Cdr0 => 0.0,
            Group::Cdr05 => 1.0,
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Gender {
    M,
    F,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    L,
    R,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Timepoint {
    B,
    F,
}

/// The four repeated cells in their fixed order.
pub const CELLS: [(Side, Timepoint); 4] =
    [(Side::L, Timepoint::B), (Side::L, Timepoint::F), (Side::R, Timepoint::B), (Side::R, Timepoint::F)];

/// Values for the cells LB, LF, RB, RF.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quad(pub [f64; 4]);

impl Quad {
    pub fn get(&self, side: Side, time: Timepoint) -> f64 {
        self.0[cell_index(side, time)]
    }
}

pub fn cell_index(side: Side, time: Timepoint) -> usize {
    match (side, time) {
        (Side::L, Timepoint::B) => 0,
        (Side::L, Timepoint::F) => 1,
        (Side::R, Timepoint::B) => 2,
        (Side::R, Timepoint::F) => 3,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub subject_id: String,
    pub group: Group,
    pub gender: Gender,
    pub age_years: f64,
    pub education_years: f64,
    pub scan_interval_years: f64,
    /// (baseline, follow-up)
    pub brain_volume: (f64, f64),
    pub icv: (f64, f64),
    pub hippo_volume: Quad,
    pub metric_distance: Quad,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Distance,
    Volume,
}

impl SubjectRecord {
    pub fn measure(&self, m: Measure) -> &Quad {
        match m {
            Measure::Distance => &self.metric_distance,
            Measure::Volume => &self.hippo_volume,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MorphTable {
    pub records: Vec<SubjectRecord>,
    /// Subjects dropped because a repeated cell was empty.
    pub rejected: Vec<String>,
}

pub const COLUMNS: [&str; 18] = [
    "subject_id",
    "group",
    "gender",
    "age_years",
    "education_years",
    "scan_interval_years",
    "bv_base",
    "bv_follow",
    "icv_base",
    "icv_follow",
    "hv_lb",
    "hv_lf",
    "hv_rb",
    "hv_rf",
    "d_lb",
    "d_lf",
    "d_rb",
    "d_rf",
];

impl MorphTable {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// (CDR0, CDR0.5) subject counts.
    pub fn group_counts(&self) -> (usize, usize) {
        let n05 = self.records.iter().filter(|r| r.group == Group::Cdr05).count();
        (self.records.len() - n05, n05)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(e.to_string());
        wr.write_record(COLUMNS).map_err(io)?;
        for r in &self.records {
            let mut row = vec![
                r.subject_id.clone(),
                r.group.label().to_string(),
                format!("{:?}", r.gender),
            ];
            let nums = [
                r.age_years,
                r.education_years,
                r.scan_interval_years,
                r.brain_volume.0,
                r.brain_volume.1,
                r.icv.0,
                r.icv.1,
            ];
            row.extend(nums.iter().chain(&r.hippo_volume.0).chain(&r.metric_distance.0).map(|v| v.to_string()));
            wr.write_record(&row).map_err(io)?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn parse_group(s: &str) -> Option<Group> {
    match s.trim() {
        "CDR0" => Some(Group::Cdr0),
        "CDR0.5" => Some(Group::Cdr05),
        _ => None,
    }
}

fn parse_gender(s: &str) -> Option<Gender> {
    match s.trim() {
        "M" | "m" => Some(Gender::M),
        "F" | "f" => Some(Gender::F),
        _ => None,
    }
}

/// Reads and validates the subject CSV. Rows are numbered from 1 (the first
/// data row after the header).
pub fn load_table<R: Read>(reader: R) -> Result<MorphTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Schema(e.to_string()))?.clone();
    let mut pos = [0usize; 18];
    for (k, name) in COLUMNS.iter().enumerate() {
        pos[k] = headers.iter().position(|h| h == *name).ok_or_else(|| Error::Schema(name.to_string()))?;
    }

    let mut table = MorphTable::default();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Value { row, message: e.to_string() })?;
        let field = |k: usize| rec.get(pos[k]).unwrap_or("");
        let bad = |message: String| Error::Value { row, message };
        let num = |k: usize| -> Result<Option<f64>> {
            let s = field(k);
            if s.is_empty() {
                return Ok(None);
            }
            let v: f64 = s.parse().map_err(|_| bad(format!("column {} is not a number: {s:?}", COLUMNS[k])))?;
            if !v.is_finite() {
                return Err(bad(format!("column {} is not finite", COLUMNS[k])));
            }
            Ok(Some(v))
        };
        let required = |k: usize| num(k)?.ok_or_else(|| bad(format!("column {} is empty", COLUMNS[k])));
        let positive = |k: usize| -> Result<f64> {
            let v = required(k)?;
            if v <= 0.0 {
                return Err(bad(format!("column {} must be positive, got {v}", COLUMNS[k])));
            }
            Ok(v)
        };

        let subject_id = field(0).to_string();
        if subject_id.is_empty() {
            return Err(bad("empty subject_id".into()));
        }
        let group = parse_group(field(1)).ok_or_else(|| bad(format!("unknown group {:?}", field(1))))?;
        let gender = parse_gender(field(2)).ok_or_else(|| bad(format!("unknown gender {:?}", field(2))))?;
        let age_years = required(3)?;
        let education_years = required(4)?;
        let scan_interval_years = positive(5)?;
        let brain_volume = (positive(6)?, positive(7)?);
        let icv = (positive(8)?, positive(9)?);

        let mut cells = [[0.0; 4]; 2];
        let mut complete = true;
        for (block, first) in [(0usize, 10usize), (1, 14)] {
            for c in 0..4 {
                match num(first + c)? {
                    None => complete = false,
                    Some(v) if block == 0 && v <= 0.0 => {
                        return Err(bad(format!("column {} must be positive, got {v}", COLUMNS[first + c])))
                    }
                    Some(v) if v < 0.0 => {
                        return Err(bad(format!("column {} must be nonnegative, got {v}", COLUMNS[first + c])))
                    }
                    Some(v) => cells[block][c] = v,
                }
            }
        }
        if !complete {
            table.rejected.push(subject_id);
            continue;
        }
        table.records.push(SubjectRecord {
            subject_id,
            group,
            gender,
            age_years,
            education_years,
            scan_interval_years,
            brain_volume,
            icv,
            hippo_volume: Quad(cells[0]),
            metric_distance: Quad(cells[1]),
        });
    }
    if table.records.is_empty() {
        return Err(Error::EmptyTable);
    }
    Ok(table)
}

pub fn load_table_path(path: impl AsRef<Path>) -> Result<MorphTable> {
    load_table(std::fs::File::open(path)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LongRow {
    pub subject_id: String,
    pub group: Group,
    pub side: Side,
    pub timepoint: Timepoint,
    pub value: f64,
}

/// Four rows per subject in the order LB, LF, RB, RF.
pub fn to_long(table: &MorphTable, measure: Measure) -> Vec<LongRow> {
    table
        .records
        .iter()
        .flat_map(|r| {
            let q = *r.measure(measure);
            CELLS.iter().enumerate().map(move |(k, &(side, timepoint))| LongRow {
                subject_id: r.subject_id.clone(),
                group: r.group,
                side,
                timepoint,
                value: q.0[k],
            })
        })
        .collect()
}

/// Inverse of [`to_long`]: per subject (id, group, cells), in first-seen order.
pub fn regroup(rows: &[LongRow]) -> Result<Vec<(String, Group, Quad)>> {
    let mut out: Vec<(String, Group, Quad, [bool; 4])> = Vec::new();
    for r in rows {
        let k = cell_index(r.side, r.timepoint);
        let slot = match out.iter().position(|(id, ..)| *id == r.subject_id) {
            Some(i) => i,
            None => {
                out.push((r.subject_id.clone(), r.group, Quad([0.0; 4]), [false; 4]));
                out.len() - 1
            }
        };
        let entry = &mut out[slot];
        if entry.3[k] || entry.1 != r.group {
            return Err(Error::Design(format!("inconsistent rows for subject {}", r.subject_id)));
        }
        entry.2 .0[k] = r.value;
        entry.3[k] = true;
    }
    out.into_iter()
        .map(|(id, g, q, seen)| {
            if seen.iter().all(|&s| s) {
                Ok((id, g, q))
            } else {
                Err(Error::MissingData(format!("subject {id} lacks a repeated cell")))
            }
        })
        .collect()
}

/// `(V_b - V_f) / (V_b T) * 100`, per side.
pub fn apc_volume(r: &SubjectRecord) -> (f64, f64) {
    let t = r.scan_interval_years;
    let v = &r.hippo_volume;
    let apc = |b: f64, f: f64| (b - f) / (b * t) * 100.0;
    (apc(v.get(Side::L, Timepoint::B), v.get(Side::L, Timepoint::F)), apc(v.get(Side::R, Timepoint::B), v.get(Side::R, Timepoint::F)))
}

/// `(d_f - d_b) / (d_b T) * 100`, per side.
pub fn apc_distance(r: &SubjectRecord) -> Result<(f64, f64)> {
    let t = r.scan_interval_years;
    let d = &r.metric_distance;
    let apc = |b: f64, f: f64, side: &str| {
        if b == 0.0 {
            return Err(Error::DegenerateBaseline(format!("subject {} has zero {side} baseline distance", r.subject_id)));
        }
        Ok((f - b) / (b * t) * 100.0)
    };
    Ok((
        apc(d.get(Side::L, Timepoint::B), d.get(Side::L, Timepoint::F), "left")?,
        apc(d.get(Side::R, Timepoint::B), d.get(Side::R, Timepoint::F), "right")?,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApcRecord {
    pub subject_id: String,
    pub group: Group,
    pub side: Side,
    pub v_apc: f64,
    pub d_apc: f64,
}

/// Two rows per subject (left, right).
pub fn apc_records(table: &MorphTable) -> Result<Vec<ApcRecord>> {
    let mut out = Vec::with_capacity(2 * table.len());
    for r in &table.records {
        let (vl, vr) = apc_volume(r);
        let (dl, dr) = apc_distance(r)?;
        for (side, v_apc, d_apc) in [(Side::L, vl, dl), (Side::R, vr, dr)] {
            out.push(ApcRecord { subject_id: r.subject_id.clone(), group: r.group, side, v_apc, d_apc });
        }
    }
    Ok(out)
}
