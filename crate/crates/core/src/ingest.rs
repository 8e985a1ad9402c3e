//! Discharge record ingestion: CSV parsing, ZIP validation, ZIP to ZCTA
//! crosswalk, and aggregation into directed flow tables and undirected
//! discharge networks.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Hpdn;

/// Type of hospital discharge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum DischargeType {
    InpatientFromEd,
    Inpatient,
    AmbulatorySurgery,
    EdOnly,
}

impl DischargeType {
    pub const ALL: [DischargeType; 4] = [
        DischargeType::InpatientFromEd,
        DischargeType::Inpatient,
        DischargeType::AmbulatorySurgery,
        DischargeType::EdOnly,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DischargeType::InpatientFromEd => "Inpatient from ED",
            DischargeType::Inpatient => "Inpatient",
            DischargeType::AmbulatorySurgery => "Ambulatory Surgery",
            DischargeType::EdOnly => "ED Only",
        }
    }
}

impl fmt::Display for DischargeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DischargeType {
    type Err = String;

    /// Accepts the CHHS spellings ("ED Only", "Inpatient from ED", ...) as
    /// well as dashed or underscored CLI tokens, case-insensitively.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).map(|c| c.to_ascii_lowercase()).collect();
        match key.as_str() {
            "inpatientfromed" | "inpatientfromemergencydepartment" => Ok(DischargeType::InpatientFromEd),
            "inpatient" => Ok(DischargeType::Inpatient),
            "ambulatorysurgery" | "ambulatory" => Ok(DischargeType::AmbulatorySurgery),
            "edonly" | "emergencydepartmentonly" | "ed" => Ok(DischargeType::EdOnly),
            _ => Err(format!("unknown discharge type `{s}`")),
        }
    }
}

impl From<DischargeType> for String {
    fn from(t: DischargeType) -> String {
        t.as_str().to_string()
    }
}

impl TryFrom<String> for DischargeType {
    type Error = String;
    fn try_from(s: String) -> std::result::Result<Self, Self::Error> {
        s.parse()
    }
}

/// One row of claims-based discharge data.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DischargeRecord {
    pub discharge_type: DischargeType,
    pub year: i32,
    pub facility_name: String,
    pub facility_zip: String,
    /// Raw residency token; may be a non-ZIP value such as `HOMELESS`.
    pub patient_zip: String,
    pub count: u64,
}

/// Header names of the six discharge columns. Release years of the source
/// data name these differently, so the mapping is configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub discharge_type: String,
    pub year: String,
    pub facility_name: String,
    pub facility_zip: String,
    pub patient_zip: String,
    pub count: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            discharge_type: "discharge_type".into(),
            year: "year".into(),
            facility_name: "facility_name".into(),
            facility_zip: "facility_zip".into(),
            patient_zip: "patient_zip".into(),
            count: "count".into(),
        }
    }
}

impl ColumnMap {
    /// Overrides one column from a `key=Header Name` pair.
    pub fn set(&mut self, key: &str, header: &str) -> Result<()> {
        let slot = match key {
            "type" | "discharge_type" => &mut self.discharge_type,
            "year" => &mut self.year,
            "facility" | "facility_name" => &mut self.facility_name,
            "facility_zip" => &mut self.facility_zip,
            "patient_zip" => &mut self.patient_zip,
            "count" => &mut self.count,
            other => return Err(Error::InvalidConfig(format!("unknown column key `{other}`"))),
        };
        *slot = header.to_string();
        Ok(())
    }

    pub const HEADER: [&'static str; 6] =
        ["discharge_type", "year", "facility_name", "facility_zip", "patient_zip", "count"];
}

/// Parses a discharge CSV with a header row. Fails on the first row with an
/// empty field or an unparsable type, year or count, naming its line number.
pub fn parse_discharges<R: Read>(reader: R, columns: &ColumnMap) -> Result<Vec<DischargeRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h.trim() == name).ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let idx_type = find(&columns.discharge_type)?;
    let idx_year = find(&columns.year)?;
    let idx_name = find(&columns.facility_name)?;
    let idx_fzip = find(&columns.facility_zip)?;
    let idx_pzip = find(&columns.patient_zip)?;
    let idx_count = find(&columns.count)?;

    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |i: usize, name: &str| -> Result<&str> {
            match row.get(i).map(str::trim) {
                Some(v) if !v.is_empty() => Ok(v),
                _ => Err(Error::MalformedRow { row: line, reason: format!("empty field `{name}`") }),
            }
        };
        let discharge_type = field(idx_type, &columns.discharge_type)?
            .parse::<DischargeType>()
            .map_err(|reason| Error::MalformedRow { row: line, reason })?;
        let year_raw = field(idx_year, &columns.year)?;
        let year = year_raw
            .parse::<i32>()
            .map_err(|_| Error::MalformedRow { row: line, reason: format!("bad year `{year_raw}`") })?;
        let count_raw = field(idx_count, &columns.count)?;
        let count = count_raw
            .parse::<u64>()
            .map_err(|_| Error::MalformedRow { row: line, reason: format!("bad count `{count_raw}`") })?;
        out.push(DischargeRecord {
            discharge_type,
            year,
            facility_name: field(idx_name, &columns.facility_name)?.to_string(),
            facility_zip: field(idx_fzip, &columns.facility_zip)?.to_string(),
            patient_zip: field(idx_pzip, &columns.patient_zip)?.to_string(),
            count,
        });
    }
    Ok(out)
}

/// Writes records in the default column layout.
pub fn write_discharges<W: Write>(records: &[DischargeRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(ColumnMap::HEADER)?;
    for r in records {
        w.write_record([
            r.discharge_type.as_str(),
            &r.year.to_string(),
            &r.facility_name,
            &r.facility_zip,
            &r.patient_zip,
            &r.count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// True when `s` is exactly five ASCII digits.
pub fn is_five_digit(s: &str) -> bool {
    s.len() == 5 && s.bytes().all(|b| b.is_ascii_digit())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ZipField {
    Patient,
    Facility,
}

/// Why a record was excluded: which ZIP failed the five-digit rule and the
/// raw token it carried (e.g. `HOMELESS`, `OUTSIDE U.S.`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exclusion {
    pub record: DischargeRecord,
    pub field: ZipField,
    pub token: String,
}

#[derive(Debug, Clone, Default)]
pub struct Filtered {
    pub kept: Vec<DischargeRecord>,
    pub excluded: Vec<Exclusion>,
}

impl Filtered {
    pub fn excluded_by(&self, field: ZipField) -> usize {
        self.excluded.iter().filter(|e| e.field == field).count()
    }
}

/// Keeps records whose patient and facility ZIPs are both five digits.
/// The patient ZIP is checked first, so a record failing both is reported
/// under the patient field.
pub fn filter_records(records: impl IntoIterator<Item = DischargeRecord>) -> Filtered {
    let mut out = Filtered::default();
    for record in records {
        let failed = if !is_five_digit(&record.patient_zip) {
            Some((ZipField::Patient, record.patient_zip.clone()))
        } else if !is_five_digit(&record.facility_zip) {
            Some((ZipField::Facility, record.facility_zip.clone()))
        } else {
            None
        };
        match failed {
            Some((field, token)) => out.excluded.push(Exclusion { record, field, token }),
            None => out.kept.push(record),
        }
    }
    out
}

/// ZIP code to ZCTA lookup. Absent ZIPs are explicit misses.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Crosswalk {
    map: HashMap<String, String>,
}

impl Crosswalk {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, zip: &str, zcta: &str) -> Result<()> {
        if !is_five_digit(zip) || !is_five_digit(zcta) {
            return Err(Error::InvalidConfig(format!("crosswalk entry `{zip}` -> `{zcta}` is not five-digit")));
        }
        self.map.insert(zip.to_string(), zcta.to_string());
        Ok(())
    }

    pub fn lookup(&self, zip: &str) -> Option<&str> {
        self.map.get(zip).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Reads a two-column `zip,zcta` CSV with a header row.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim().eq_ignore_ascii_case(name))
                .ok_or_else(|| Error::MissingColumn(name.to_string()))
        };
        let (iz, ic) = (col("zip")?, col("zcta")?);
        let mut cw = Crosswalk::new();
        for row in rdr.records() {
            let row = row?;
            let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
            let zip = row.get(iz).unwrap_or("").trim();
            let zcta = row.get(ic).unwrap_or("").trim();
            if !is_five_digit(zip) || !is_five_digit(zcta) {
                return Err(Error::MalformedRow {
                    row: line,
                    reason: format!("crosswalk entry `{zip}`,`{zcta}` is not five-digit"),
                });
            }
            cw.map.insert(zip.to_string(), zcta.to_string());
        }
        Ok(cw)
    }
}

/// What to do with a ZIP that has no crosswalk entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnmappedPolicy {
    /// Remove the record.
    Drop,
    /// Treat the ZIP as its own ZCTA.
    #[default]
    Identity,
}

impl FromStr for UnmappedPolicy {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "drop" => Ok(UnmappedPolicy::Drop),
            "identity" => Ok(UnmappedPolicy::Identity),
            _ => Err(format!("unknown unmapped-ZIP policy `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Mapped {
    /// Records with both ZIP fields replaced by ZCTAs.
    pub records: Vec<DischargeRecord>,
    /// Records removed under [`UnmappedPolicy::Drop`].
    pub dropped: Vec<DischargeRecord>,
    /// Number of ZIP lookups that fell back to identity.
    pub identity_mapped: usize,
}

/// Replaces patient and facility ZIPs by their ZCTAs.
pub fn apply_crosswalk(
    records: impl IntoIterator<Item = DischargeRecord>,
    crosswalk: &Crosswalk,
    policy: UnmappedPolicy,
) -> Mapped {
    let mut out = Mapped::default();
    for mut record in records {
        let mut mapped = [None, None];
        let mut drop = false;
        for (slot, zip) in mapped.iter_mut().zip([&record.patient_zip, &record.facility_zip]) {
            match crosswalk.lookup(zip) {
                Some(zcta) => *slot = Some(zcta.to_string()),
                None => match policy {
                    UnmappedPolicy::Identity => {
                        debug!("ZIP {zip} absent from crosswalk, kept as ZCTA");
                        out.identity_mapped += 1;
                    }
                    UnmappedPolicy::Drop => {
                        warn!("ZIP {zip} absent from crosswalk, record dropped");
                        drop = true;
                        break;
                    }
                },
            }
        }
        if drop {
            out.dropped.push(record);
            continue;
        }
        let [patient, facility] = mapped;
        if let Some(z) = patient {
            record.patient_zip = z;
        }
        if let Some(z) = facility {
            record.facility_zip = z;
        }
        out.records.push(record);
    }
    out
}

/// Directed discharge counts keyed by (patient ZCTA, facility ZCTA).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FlowTable {
    pub discharge_type: Option<DischargeType>,
    pub year: Option<i32>,
    entries: BTreeMap<(String, String), u64>,
    /// Discharges removed by the five-digit ZIP rule for this selection.
    pub excluded_count: u64,
}

impl FlowTable {
    pub fn new(discharge_type: Option<DischargeType>, year: Option<i32>) -> Self {
        FlowTable { discharge_type, year, ..Default::default() }
    }

    /// Adds `count` discharges from `patient` to `facility`. Zero counts are
    /// not stored.
    pub fn add(&mut self, patient: &str, facility: &str, count: u64) {
        if count == 0 {
            return;
        }
        *self.entries.entry((patient.to_string(), facility.to_string())).or_insert(0) += count;
    }

    pub fn get(&self, patient: &str, facility: &str) -> u64 {
        self.entries.get(&(patient.to_string(), facility.to_string())).copied().unwrap_or(0)
    }

    /// Entries in (patient, facility) lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, u64)> + '_ {
        self.entries.iter().map(|((p, f), &c)| (p.as_str(), f.as_str(), c))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.entries.values().sum()
    }

    pub fn excluded_fraction(&self) -> f64 {
        let denom = self.excluded_count + self.total();
        if denom == 0 {
            0.0
        } else {
            self.excluded_count as f64 / denom as f64
        }
    }

    /// Counts the discharges of exclusions matching this table's selection.
    pub fn record_exclusions(&mut self, excluded: &[Exclusion]) {
        self.excluded_count += excluded
            .iter()
            .filter(|e| {
                self.discharge_type.is_none_or(|t| t == e.record.discharge_type)
                    && self.year.is_none_or(|y| y == e.record.year)
            })
            .map(|e| e.record.count)
            .sum::<u64>();
    }

    /// Every ZCTA appearing at either end of a flow, sorted.
    pub fn zctas(&self) -> Vec<String> {
        let mut all: Vec<String> = self.entries.keys().flat_map(|(p, f)| [p.clone(), f.clone()]).collect();
        all.sort();
        all.dedup();
        all
    }

    /// Writes `patient_zcta,facility_zcta,count` sorted by the key pair.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["patient_zcta", "facility_zcta", "count"])?;
        for (p, f, c) in self.iter() {
            w.write_record([p, f, &c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<FlowTable> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers.iter().position(|h| h.trim() == name).ok_or_else(|| Error::MissingColumn(name.to_string()))
        };
        let (ip, ifa, ic) = (col("patient_zcta")?, col("facility_zcta")?, col("count")?);
        let mut table = FlowTable::default();
        for row in rdr.records() {
            let row = row?;
            let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
            let raw = row.get(ic).unwrap_or("").trim();
            let count = raw
                .parse::<u64>()
                .map_err(|_| Error::MalformedRow { row: line, reason: format!("bad count `{raw}`") })?;
            let (p, f) = (row.get(ip).unwrap_or("").trim(), row.get(ifa).unwrap_or("").trim());
            if p.is_empty() || f.is_empty() {
                return Err(Error::MalformedRow { row: line, reason: "empty ZCTA".into() });
            }
            table.add(p, f, count);
        }
        Ok(table)
    }
}

/// Sums counts of records matching `(discharge_type, year)` by
/// (patient ZCTA, facility ZCTA), keeping direction.
pub fn aggregate_flows(records: &[DischargeRecord], discharge_type: DischargeType, year: i32) -> Result<FlowTable> {
    let mut table = FlowTable::new(Some(discharge_type), Some(year));
    let mut matched = false;
    for r in records.iter().filter(|r| r.discharge_type == discharge_type && r.year == year) {
        matched = true;
        table.add(&r.patient_zip, &r.facility_zip, r.count);
    }
    // A selection whose counts are all zero yields no network either.
    if !matched || table.is_empty() {
        return Err(Error::EmptySelection { discharge_type: discharge_type.to_string(), year });
    }
    Ok(table)
}

/// Symmetrizes directed flows into the undirected discharge network:
/// `W_ij = N(i,j) + N(j,i)`, and within-ZCTA flows become self-loops.
pub fn build_hpdn(flows: &FlowTable) -> Result<Hpdn> {
    Hpdn::from_edges(flows.iter().map(|(p, f, c)| (p.to_string(), f.to_string(), c as f64)))
}

/// Counters from [`prepare_flows`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestSummary {
    pub records_read: usize,
    pub excluded_patient_zip: usize,
    pub excluded_facility_zip: usize,
    pub dropped_unmapped: usize,
    pub identity_mapped: usize,
    pub excluded_discharges: u64,
}

/// Filter, crosswalk and aggregate in one step.
pub fn prepare_flows(
    records: Vec<DischargeRecord>,
    crosswalk: &Crosswalk,
    policy: UnmappedPolicy,
    discharge_type: DischargeType,
    year: i32,
) -> Result<(FlowTable, IngestSummary)> {
    let records_read = records.len();
    let filtered = filter_records(records);
    let excluded_patient_zip = filtered.excluded_by(ZipField::Patient);
    let excluded_facility_zip = filtered.excluded_by(ZipField::Facility);
    let mapped = apply_crosswalk(filtered.kept, crosswalk, policy);
    let mut table = aggregate_flows(&mapped.records, discharge_type, year)?;
    table.record_exclusions(&filtered.excluded);
    let summary = IngestSummary {
        records_read,
        excluded_patient_zip,
        excluded_facility_zip,
        dropped_unmapped: mapped.dropped.len(),
        identity_mapped: mapped.identity_mapped,
        excluded_discharges: table.excluded_count,
    };
    Ok((table, summary))
}
