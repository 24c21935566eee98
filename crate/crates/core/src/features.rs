//! Packet-metadata ingestion and one-hot feature encoding.
//!
//! A packet becomes one column of the feature matrix. The rows, in order:
//!
//! | rows                      | meaning                                        |
//! |---------------------------|------------------------------------------------|
//! | `|src_ips|`               | one-hot source IP                              |
//! | `|dst_ips|`               | one-hot destination IP                         |
//! | `|important_ports|`       | source port equals the i-th important port     |
//! | `|important_ports|`       | destination port equals the i-th important port|
//! | 2                         | source port below / at-or-above 1024           |
//! | 2                         | destination port below / at-or-above 1024      |
//! | 1                         | source port missing                            |
//! | 1                         | destination port missing                       |
//! | `|protocols|`             | one-hot protocol (case-insensitive match)      |
//! | 1                         | packet length divided by `length_scale`        |
//!
//! Every entry except the length row is exactly 0 or 1. Values absent from
//! the encoder vocabulary (new hosts, unlisted protocols) encode as all-zero
//! blocks rather than erroring, which is what makes train/deploy splits with
//! novel hosts representable.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fsutil;
use crate::matfactor::Matrix;

/// Default "important system port" list: FTP-data, FTP, SSH, TELNET, SMTP,
/// DNS, Finger, HTTP, sunrpc/Portmap, SNMP, HTTPS, syslog, printer. This is
/// a project default, not an authoritative inventory; override it when the
/// monitored network cares about different services.
pub const DEFAULT_IMPORTANT_PORTS: [u16; 13] =
    [20, 21, 22, 23, 25, 53, 79, 80, 111, 161, 443, 514, 515];

/// Default protocol vocabulary.
pub const DEFAULT_PROTOCOLS: [&str; 7] =
    ["ICMP", "sadmind", "Portmap", "TELNET", "TCP", "FTP", "HTTP"];

/// Fingerprint value used for feature matrices built directly from raw
/// matrices (tests, baselines) rather than through an encoder.
pub const UNENCODED_FINGERPRINT: &str = "unencoded";

/// One parsed packet. Ports are optional because portless protocols (ICMP
/// among others) leave those fields empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub timestamp: f64,
    pub src_ip: String,
    pub dst_ip: String,
    pub src_port: Option<u16>,
    pub dst_port: Option<u16>,
    pub protocol: String,
    pub length: u64,
}

/// Maps the canonical column roles onto the header names actually present
/// in a CSV export, so differently-labeled exports can be ingested without
/// rewriting them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnMap {
    pub time: String,
    pub src_ip: String,
    pub dst_ip: String,
    pub src_port: String,
    pub dst_port: String,
    pub protocol: String,
    pub length: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            time: "time".into(),
            src_ip: "src_ip".into(),
            dst_ip: "dst_ip".into(),
            src_port: "src_port".into(),
            dst_port: "dst_port".into(),
            protocol: "protocol".into(),
            length: "length".into(),
        }
    }
}

/// A row that could not be parsed, with its 1-based line number.
#[derive(Debug, Clone, PartialEq)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

impl std::fmt::Display for RowError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Parse output: the good rows plus a report of the bad ones. Malformed rows
/// are collected, never silently dropped; the caller decides whether any
/// errors are fatal.
#[derive(Debug)]
pub struct ParseReport {
    pub records: Vec<PacketRecord>,
    pub row_errors: Vec<RowError>,
}

/// Reads packet metadata from CSV text with a header row.
///
/// Required columns are located through `map`; extra columns are ignored. A
/// missing required column is a format error. Unparseable fields produce
/// per-row errors in the report.
pub fn parse_packet_csv(input: impl Read, map: &ColumnMap) -> Result<ParseReport> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);

    let headers = reader
        .headers()
        .map_err(|e| Error::MalformedInput(format!("unreadable CSV header: {e}")))?
        .clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MalformedInput(format!("missing required column '{name}'")))
    };
    let idx_time = find(&map.time)?;
    let idx_src_ip = find(&map.src_ip)?;
    let idx_dst_ip = find(&map.dst_ip)?;
    let idx_src_port = find(&map.src_port)?;
    let idx_dst_port = find(&map.dst_port)?;
    let idx_protocol = find(&map.protocol)?;
    let idx_length = find(&map.length)?;

    let mut records = Vec::new();
    let mut row_errors = Vec::new();

    for row in reader.records() {
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                row_errors.push(RowError {
                    line,
                    message: format!("unreadable row: {e}"),
                });
                continue;
            }
        };
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        match parse_row(&row, idx_time, idx_src_ip, idx_dst_ip, idx_src_port, idx_dst_port, idx_protocol, idx_length) {
            Ok(record) => records.push(record),
            Err(message) => row_errors.push(RowError { line, message }),
        }
    }

    Ok(ParseReport {
        records,
        row_errors,
    })
}

#[allow(clippy::too_many_arguments)]
fn parse_row(
    row: &csv::StringRecord,
    idx_time: usize,
    idx_src_ip: usize,
    idx_dst_ip: usize,
    idx_src_port: usize,
    idx_dst_port: usize,
    idx_protocol: usize,
    idx_length: usize,
) -> std::result::Result<PacketRecord, String> {
    let field = |idx: usize, name: &str| -> std::result::Result<&str, String> {
        row.get(idx)
            .map(str::trim)
            .ok_or_else(|| format!("missing field '{name}'"))
    };

    let time_raw = field(idx_time, "time")?;
    let timestamp: f64 = time_raw
        .parse()
        .map_err(|_| format!("unparseable time '{time_raw}'"))?;
    if !timestamp.is_finite() {
        return Err(format!("non-finite time '{time_raw}'"));
    }

    let src_ip = field(idx_src_ip, "src_ip")?.to_string();
    let dst_ip = field(idx_dst_ip, "dst_ip")?.to_string();
    if src_ip.is_empty() || dst_ip.is_empty() {
        return Err("empty IP address".to_string());
    }

    let parse_port = |raw: &str, name: &str| -> std::result::Result<Option<u16>, String> {
        if raw.is_empty() {
            return Ok(None);
        }
        let value: u64 = raw
            .parse()
            .map_err(|_| format!("unparseable {name} '{raw}'"))?;
        if value > 65535 {
            return Err(format!("{name} {value} outside 0-65535"));
        }
        Ok(Some(value as u16))
    };
    let src_port = parse_port(field(idx_src_port, "src_port")?, "src_port")?;
    let dst_port = parse_port(field(idx_dst_port, "dst_port")?, "dst_port")?;

    let protocol = field(idx_protocol, "protocol")?.to_string();
    if protocol.is_empty() {
        return Err("empty protocol".to_string());
    }

    let length_raw = field(idx_length, "length")?;
    let length: u64 = length_raw
        .parse()
        .map_err(|_| format!("unparseable length '{length_raw}'"))?;

    Ok(PacketRecord {
        timestamp,
        src_ip,
        dst_ip,
        src_port,
        dst_port,
        protocol,
        length,
    })
}

/// Writes records in the same CSV dialect `parse_packet_csv` reads. Absent
/// ports become empty fields.
pub fn write_packet_csv(records: &[PacketRecord], out: impl Write) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let as_io = |e: csv::Error| Error::MalformedInput(format!("CSV write failed: {e}"));
    writer
        .write_record([
            "time", "src_ip", "dst_ip", "src_port", "dst_port", "protocol", "length",
        ])
        .map_err(as_io)?;
    for r in records {
        let port = |p: Option<u16>| p.map(|v| v.to_string()).unwrap_or_default();
        writer
            .write_record([
                r.timestamp.to_string(),
                r.src_ip.clone(),
                r.dst_ip.clone(),
                port(r.src_port),
                port(r.dst_port),
                r.protocol.clone(),
                r.length.to_string(),
            ])
            .map_err(as_io)?;
    }
    writer.flush().map_err(|e| {
        Error::MalformedInput(format!("CSV flush failed: {e}"))
    })?;
    Ok(())
}

/// Label CSV: `packet_index,is_attack` with indices 0..n in order and 0/1
/// values.
pub fn write_labels_csv(labels: &[bool], out: impl Write) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let as_err = |e: csv::Error| Error::MalformedInput(format!("CSV write failed: {e}"));
    writer
        .write_record(["packet_index", "is_attack"])
        .map_err(as_err)?;
    for (i, &label) in labels.iter().enumerate() {
        writer
            .write_record([i.to_string(), if label { "1" } else { "0" }.to_string()])
            .map_err(as_err)?;
    }
    writer
        .flush()
        .map_err(|e| Error::MalformedInput(format!("CSV flush failed: {e}")))?;
    Ok(())
}

/// Reads a label CSV written by [`write_labels_csv`]: indices must run
/// 0..n contiguously and values must be 0 or 1.
pub fn read_labels_csv(input: impl Read) -> Result<Vec<bool>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let mut labels = Vec::new();
    for (expected, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::MalformedInput(format!("unreadable label row: {e}")))?;
        let idx: usize = row
            .get(0)
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::MalformedInput(format!("bad packet_index in row {expected}")))?;
        if idx != expected {
            return Err(Error::MalformedInput(format!(
                "label indices must be contiguous from 0: expected {expected}, got {idx}"
            )));
        }
        let label = match row.get(1).map(str::trim) {
            Some("0") => false,
            Some("1") => true,
            other => {
                return Err(Error::MalformedInput(format!(
                    "label value must be 0 or 1, got {other:?} in row {expected}"
                )))
            }
        };
        labels.push(label);
    }
    Ok(labels)
}

/// Encoding vocabulary: which IPs, ports, and protocols get rows, and the
/// divisor for the length feature. Built from a training window and then
/// frozen; its fingerprint ties matrices and models to the vocabulary that
/// produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub src_ips: Vec<String>,
    pub dst_ips: Vec<String>,
    pub important_ports: Vec<u16>,
    pub protocols: Vec<String>,
    pub length_scale: f64,
}

impl EncoderSpec {
    /// Total feature-row count:
    /// `|src| + |dst| + 2|ports| + 4 + 2 + |protocols| + 1`.
    pub fn total_dim(&self) -> usize {
        self.src_ips.len()
            + self.dst_ips.len()
            + 2 * self.important_ports.len()
            + 4
            + 2
            + self.protocols.len()
            + 1
    }

    /// Human-readable row names in exact row order.
    pub fn row_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.total_dim());
        names.extend(self.src_ips.iter().map(|ip| format!("src_ip:{ip}")));
        names.extend(self.dst_ips.iter().map(|ip| format!("dst_ip:{ip}")));
        names.extend(
            self.important_ports
                .iter()
                .map(|p| format!("src_port:{p}")),
        );
        names.extend(
            self.important_ports
                .iter()
                .map(|p| format!("dst_port:{p}")),
        );
        names.push("src_port_below_1024".into());
        names.push("src_port_above_1024".into());
        names.push("dst_port_below_1024".into());
        names.push("dst_port_above_1024".into());
        names.push("src_port_missing".into());
        names.push("dst_port_missing".into());
        names.extend(self.protocols.iter().map(|p| format!("protocol:{p}")));
        names.push("length_scaled".into());
        names
    }

    /// Hex SHA-256 over the canonical JSON form. Two encoders fingerprint
    /// equal exactly when every vocabulary entry and the length scale match.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("encoder spec serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        fn check_unique<T: PartialEq + std::fmt::Debug>(list: &[T], what: &str) -> Result<()> {
            if list.is_empty() {
                return Err(Error::InvalidConfig(format!("{what} list is empty")));
            }
            for (i, item) in list.iter().enumerate() {
                if list[..i].contains(item) {
                    return Err(Error::InvalidConfig(format!(
                        "duplicate {what} entry {item:?}"
                    )));
                }
            }
            Ok(())
        }
        check_unique(&self.src_ips, "src_ips")?;
        check_unique(&self.dst_ips, "dst_ips")?;
        check_unique(&self.important_ports, "important_ports")?;
        check_unique(&self.protocols, "protocols")?;
        // Protocol matching is case-insensitive, so tokens differing only in
        // case would collide.
        let lowered: Vec<String> = self
            .protocols
            .iter()
            .map(|p| p.to_ascii_lowercase())
            .collect();
        check_unique(&lowered, "protocols (case-folded)")?;
        if !(self.length_scale.is_finite() && self.length_scale > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "length_scale must be finite and positive, got {}",
                self.length_scale
            )));
        }
        Ok(())
    }
}

/// Builds the encoding vocabulary from observed records: sorted unique
/// source and destination IPs, the given port and protocol lists, and
/// `length_scale` = the maximum observed length (at least 1).
pub fn build_encoder(
    records: &[PacketRecord],
    important_ports: &[u16],
    protocols: &[String],
) -> Result<EncoderSpec> {
    if records.is_empty() {
        return Err(Error::InvalidConfig(
            "cannot build an encoder from zero records".to_string(),
        ));
    }
    let mut src_ips: Vec<String> = records.iter().map(|r| r.src_ip.clone()).collect();
    src_ips.sort();
    src_ips.dedup();
    let mut dst_ips: Vec<String> = records.iter().map(|r| r.dst_ip.clone()).collect();
    dst_ips.sort();
    dst_ips.dedup();
    let length_scale = records
        .iter()
        .map(|r| r.length)
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let spec = EncoderSpec {
        src_ips,
        dst_ips,
        important_ports: important_ports.to_vec(),
        protocols: protocols.to_vec(),
        length_scale,
    };
    spec.validate()?;
    Ok(spec)
}

/// A feature matrix with the bookkeeping that ties it back to packets: one
/// column per packet, original packet ordinals, optional ground-truth
/// labels, row names, and the encoder that produced it (absent when the
/// matrix was built directly from raw numbers).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub matrix: Matrix,
    pub packet_index: Vec<u64>,
    pub labels: Option<Vec<bool>>,
    pub row_names: Vec<String>,
    pub encoder: Option<EncoderSpec>,
}

impl FeatureMatrix {
    /// Wraps a raw matrix as a feature matrix with ordinal packet indices,
    /// generated row names, and no labels. Used by baselines and tests that
    /// work on matrices directly rather than on encoded packets.
    pub fn from_matrix(matrix: Matrix) -> FeatureMatrix {
        let row_names = (0..matrix.rows()).map(|i| format!("row_{i}")).collect();
        let packet_index = (0..matrix.cols() as u64).collect();
        FeatureMatrix {
            matrix,
            packet_index,
            labels: None,
            row_names,
            encoder: None,
        }
    }

    /// Fingerprint of the producing encoder, or [`UNENCODED_FINGERPRINT`].
    pub fn encoder_fingerprint(&self) -> String {
        self.encoder
            .as_ref()
            .map(EncoderSpec::fingerprint)
            .unwrap_or_else(|| UNENCODED_FINGERPRINT.to_string())
    }

    /// Attaches per-column ground-truth labels.
    pub fn with_labels(mut self, labels: Vec<bool>) -> Result<FeatureMatrix> {
        if labels.len() != self.matrix.cols() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} columns",
                labels.len(),
                self.matrix.cols()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n_packets(&self) -> usize {
        self.matrix.cols()
    }
}

/// Encodes records into the feature matrix described in the module docs.
/// Column `j` encodes `records[j]`; packet indices are the record ordinals.
pub fn encode(records: &[PacketRecord], spec: &EncoderSpec) -> Result<FeatureMatrix> {
    spec.validate()?;
    let m = spec.total_dim();
    let n = records.len();

    let src_ip_idx: HashMap<&str, usize> = spec
        .src_ips
        .iter()
        .enumerate()
        .map(|(i, ip)| (ip.as_str(), i))
        .collect();
    let dst_ip_idx: HashMap<&str, usize> = spec
        .dst_ips
        .iter()
        .enumerate()
        .map(|(i, ip)| (ip.as_str(), i))
        .collect();
    let port_idx: HashMap<u16, usize> = spec
        .important_ports
        .iter()
        .enumerate()
        .map(|(i, &p)| (p, i))
        .collect();
    let proto_idx: HashMap<String, usize> = spec
        .protocols
        .iter()
        .enumerate()
        .map(|(i, p)| (p.to_ascii_lowercase(), i))
        .collect();

    let n_ports = spec.important_ports.len();
    let off_dst_ip = spec.src_ips.len();
    let off_src_port = off_dst_ip + spec.dst_ips.len();
    let off_dst_port = off_src_port + n_ports;
    let off_src_range = off_dst_port + n_ports;
    let off_dst_range = off_src_range + 2;
    let off_src_missing = off_dst_range + 2;
    let off_dst_missing = off_src_missing + 1;
    let off_proto = off_dst_missing + 1;
    let off_length = off_proto + spec.protocols.len();
    debug_assert_eq!(off_length + 1, m);

    let mut data = vec![0.0f64; m * n];
    for (j, record) in records.iter().enumerate() {
        let col = &mut data[j * m..(j + 1) * m];
        if let Some(&i) = src_ip_idx.get(record.src_ip.as_str()) {
            col[i] = 1.0;
        }
        if let Some(&i) = dst_ip_idx.get(record.dst_ip.as_str()) {
            col[off_dst_ip + i] = 1.0;
        }
        match record.src_port {
            Some(p) => {
                if let Some(&i) = port_idx.get(&p) {
                    col[off_src_port + i] = 1.0;
                }
                if p < 1024 {
                    col[off_src_range] = 1.0;
                } else {
                    col[off_src_range + 1] = 1.0;
                }
            }
            None => col[off_src_missing] = 1.0,
        }
        match record.dst_port {
            Some(p) => {
                if let Some(&i) = port_idx.get(&p) {
                    col[off_dst_port + i] = 1.0;
                }
                if p < 1024 {
                    col[off_dst_range] = 1.0;
                } else {
                    col[off_dst_range + 1] = 1.0;
                }
            }
            None => col[off_dst_missing] = 1.0,
        }
        if let Some(&i) = proto_idx.get(&record.protocol.to_ascii_lowercase()) {
            col[off_proto + i] = 1.0;
        }
        col[off_length] = record.length as f64 / spec.length_scale;
    }

    Ok(FeatureMatrix {
        matrix: Matrix::from_col_major(m, n, data)?,
        packet_index: (0..n as u64).collect(),
        labels: None,
        row_names: spec.row_names(),
        encoder: Some(spec.clone()),
    })
}

/// Column-contiguous window of a feature matrix with packet indices and
/// labels aligned. The range may be empty; it must stay within bounds.
pub fn slice_columns(fm: &FeatureMatrix, range: std::ops::Range<usize>) -> Result<FeatureMatrix> {
    let matrix = fm.matrix.slice_cols(range.clone())?;
    Ok(FeatureMatrix {
        matrix,
        packet_index: fm.packet_index[range.clone()].to_vec(),
        labels: fm.labels.as_ref().map(|l| l[range].to_vec()),
        row_names: fm.row_names.clone(),
        encoder: fm.encoder.clone(),
    })
}

const FMAT_MAGIC: &[u8; 4] = b"PSFM";
const FMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct FmatHeader {
    rows: usize,
    cols: usize,
    row_names: Vec<String>,
    encoder_fingerprint: String,
    packet_index: Vec<u64>,
    has_labels: bool,
    encoder: Option<EncoderSpec>,
}

/// Serializes a feature matrix into the `PSFM` container (see
/// `docs/FORMATS.md`): magic, version, JSON header, little-endian `f64`
/// column-major payload, then one 0/1 byte per column when labels exist.
pub fn feature_matrix_to_bytes(fm: &FeatureMatrix) -> Result<Vec<u8>> {
    if fm.row_names.len() != fm.matrix.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} row names for {} rows",
            fm.row_names.len(),
            fm.matrix.rows()
        )));
    }
    if fm.packet_index.len() != fm.matrix.cols() {
        return Err(Error::DimensionMismatch(format!(
            "{} packet indices for {} columns",
            fm.packet_index.len(),
            fm.matrix.cols()
        )));
    }
    let header = FmatHeader {
        rows: fm.matrix.rows(),
        cols: fm.matrix.cols(),
        row_names: fm.row_names.clone(),
        encoder_fingerprint: fm.encoder_fingerprint(),
        packet_index: fm.packet_index.clone(),
        has_labels: fm.labels.is_some(),
        encoder: fm.encoder.clone(),
    };
    let header_json = serde_json::to_vec(&header)
        .map_err(|e| Error::MalformedInput(format!("header serialization failed: {e}")))?;

    let mut out = Vec::new();
    out.extend_from_slice(FMAT_MAGIC);
    out.extend_from_slice(&FMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
    out.extend_from_slice(&header_json);
    for j in 0..fm.matrix.cols() {
        for &v in fm.matrix.column(j) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    if let Some(labels) = &fm.labels {
        out.extend(labels.iter().map(|&b| u8::from(b)));
    }
    Ok(out)
}

/// Inverse of [`feature_matrix_to_bytes`], validating magic, version, and
/// every length in the container.
pub fn feature_matrix_from_bytes(bytes: &[u8]) -> Result<FeatureMatrix> {
    let fail = |msg: &str| Error::MalformedInput(format!("feature matrix file: {msg}"));
    if bytes.len() < 16 {
        return Err(fail("truncated before header"));
    }
    if &bytes[0..4] != FMAT_MAGIC {
        return Err(fail("bad magic, expected PSFM"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FMAT_VERSION {
        return Err(fail(&format!("unsupported version {version}")));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let header_end = 16usize
        .checked_add(header_len)
        .ok_or_else(|| fail("header length overflows"))?;
    if bytes.len() < header_end {
        return Err(fail("truncated header"));
    }
    let header: FmatHeader = serde_json::from_slice(&bytes[16..header_end])
        .map_err(|e| fail(&format!("unreadable header: {e}")))?;

    let payload_len = header
        .rows
        .checked_mul(header.cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| fail("payload size overflows"))?;
    let labels_len = if header.has_labels { header.cols } else { 0 };
    if bytes.len() != header_end + payload_len + labels_len {
        return Err(fail(&format!(
            "expected {} bytes total, file has {}",
            header_end + payload_len + labels_len,
            bytes.len()
        )));
    }
    if header.row_names.len() != header.rows {
        return Err(fail("row name count does not match rows"));
    }
    if header.packet_index.len() != header.cols {
        return Err(fail("packet index count does not match cols"));
    }

    let mut data = Vec::with_capacity(header.rows * header.cols);
    for chunk in bytes[header_end..header_end + payload_len].chunks_exact(8) {
        data.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }
    let matrix = Matrix::from_col_major(header.rows, header.cols, data)?;

    let labels = if header.has_labels {
        let raw = &bytes[header_end + payload_len..];
        let mut labels = Vec::with_capacity(header.cols);
        for &b in raw {
            match b {
                0 => labels.push(false),
                1 => labels.push(true),
                other => return Err(fail(&format!("label byte must be 0 or 1, got {other}"))),
            }
        }
        Some(labels)
    } else {
        None
    };

    // The stored fingerprint is redundant with the embedded encoder; a
    // disagreement means the file was edited inconsistently.
    let recomputed = header
        .encoder
        .as_ref()
        .map(EncoderSpec::fingerprint)
        .unwrap_or_else(|| UNENCODED_FINGERPRINT.to_string());
    if recomputed != header.encoder_fingerprint {
        return Err(fail("encoder fingerprint does not match embedded encoder"));
    }

    Ok(FeatureMatrix {
        matrix,
        packet_index: header.packet_index,
        labels,
        row_names: header.row_names,
        encoder: header.encoder,
    })
}

/// Atomically writes a feature matrix file.
pub fn write_feature_matrix(fm: &FeatureMatrix, path: &Path) -> Result<()> {
    fsutil::atomic_write_bytes(path, &feature_matrix_to_bytes(fm)?)
}

/// Reads a feature matrix file.
pub fn read_feature_matrix(path: &Path) -> Result<FeatureMatrix> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    feature_matrix_from_bytes(&bytes)
}

/// Owned copy of [`DEFAULT_PROTOCOLS`] for call sites that need `Vec<String>`.
pub fn default_protocols() -> Vec<String> {
    DEFAULT_PROTOCOLS.iter().map(|s| s.to_string()).collect()
}
