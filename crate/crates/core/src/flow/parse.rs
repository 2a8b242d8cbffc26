//! Reader and writer for labeled Zeek connection logs.
//!
//! Lines starting with `#` are directives; `#fields` names the columns.
//! `-` is an unset value and `(empty)` an empty string. Some published
//! captures separate the final `tunnel_parents label detailed-label`
//! columns with runs of spaces instead of tabs, in both the header and the
//! data rows; the parser re-splits a short row's last cell on whitespace.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::BufRead;
use std::str::FromStr;

use super::record::{Proto, RawFlowRecord};
use super::FlowError;

pub const UNSET: &str = "-";
pub const EMPTY: &str = "(empty)";

/// Standard connection-log columns, in the order the writer emits them.
pub const CONN_FIELDS: [&str; 21] = [
    "ts",
    "uid",
    "id.orig_h",
    "id.orig_p",
    "id.resp_h",
    "id.resp_p",
    "proto",
    "service",
    "duration",
    "orig_bytes",
    "resp_bytes",
    "conn_state",
    "local_orig",
    "local_resp",
    "missed_bytes",
    "history",
    "orig_pkts",
    "orig_ip_bytes",
    "resp_pkts",
    "resp_ip_bytes",
    "tunnel_parents",
];

const CONN_TYPES: [&str; 21] = [
    "time", "string", "addr", "port", "addr", "port", "enum", "string", "interval", "count",
    "count", "string", "bool", "bool", "count", "string", "count", "count", "count", "count",
    "set[string]",
];

const LABEL_FIELD: &str = "label";
const DETAILED_LABEL_FIELDS: [&str; 2] = ["detailed-label", "detailed_label"];

struct Header {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Header {
    fn parse(line: &str) -> Header {
        let names: Vec<String> = line
            .split('\t')
            .skip(1)
            .flat_map(|cell| cell.split_whitespace())
            .map(str::to_string)
            .collect();
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        Header { names, index }
    }

    fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }
}

struct Columns {
    fixed: [usize; 21],
    label: Option<usize>,
    detailed: Option<usize>,
    width: usize,
}

impl Columns {
    fn resolve(header: &Header, line: usize) -> Result<Columns, FlowError> {
        let mut fixed = [0usize; 21];
        for (slot, name) in fixed.iter_mut().zip(CONN_FIELDS) {
            *slot = header
                .position(name)
                .ok_or_else(|| FlowError::MissingColumn {
                    line,
                    column: name.to_string(),
                })?;
        }
        Ok(Columns {
            fixed,
            label: header.position(LABEL_FIELD),
            detailed: DETAILED_LABEL_FIELDS
                .iter()
                .find_map(|n| header.position(n)),
            width: header.names.len(),
        })
    }
}

fn cell<'a>(cells: &[&'a str], columns: &Columns, field: usize) -> &'a str {
    cells[columns.fixed[field]]
}

fn opt_str(token: &str) -> Option<String> {
    match token {
        UNSET => None,
        EMPTY => Some(String::new()),
        t => Some(t.to_string()),
    }
}

fn opt_num<T: FromStr>(token: &str, line: usize, column: &str) -> Result<Option<T>, FlowError> {
    match token {
        UNSET | EMPTY | "" => Ok(None),
        t => t.parse::<T>().map(Some).map_err(|_| FlowError::BadNumeric {
            line,
            column: column.to_string(),
            token: t.to_string(),
        }),
    }
}

fn req_num<T: FromStr>(token: &str, line: usize, column: &str) -> Result<T, FlowError> {
    opt_num(token, line, column)?.ok_or_else(|| FlowError::BadNumeric {
        line,
        column: column.to_string(),
        token: token.to_string(),
    })
}

fn opt_bool(token: &str, line: usize, column: &str) -> Result<Option<bool>, FlowError> {
    match token {
        UNSET | EMPTY | "" => Ok(None),
        "T" | "true" | "1" => Ok(Some(true)),
        "F" | "false" | "0" => Ok(Some(false)),
        t => Err(FlowError::BadNumeric {
            line,
            column: column.to_string(),
            token: t.to_string(),
        }),
    }
}

fn split_row(raw: &str, width: usize) -> Vec<&str> {
    let mut cells: Vec<&str> = raw.split('\t').collect();
    if cells.len() < width {
        if let Some(last) = cells.pop() {
            cells.extend(last.split_whitespace());
        }
    }
    cells
}

fn parse_row(raw: &str, line: usize, columns: &Columns) -> Result<RawFlowRecord, FlowError> {
    let cells = split_row(raw, columns.width);
    if cells.len() != columns.width {
        return Err(FlowError::ColumnCountMismatch {
            line,
            expected: columns.width,
            found: cells.len(),
        });
    }
    let c = |field: usize| cell(&cells, columns, field);
    let label = |pos: Option<usize>| -> Result<Option<String>, FlowError> {
        match pos {
            None => Ok(None),
            Some(p) => match cells[p] {
                UNSET if Some(p) == columns.detailed => Ok(Some(UNSET.to_string())),
                UNSET | EMPTY | "" => Err(FlowError::MissingLabel { line }),
                t => Ok(Some(t.to_string())),
            },
        }
    };
    Ok(RawFlowRecord {
        ts: req_num(c(0), line, CONN_FIELDS[0])?,
        uid: c(1).to_string(),
        orig_h: c(2).to_string(),
        orig_p: req_num(c(3), line, CONN_FIELDS[3])?,
        resp_h: c(4).to_string(),
        resp_p: req_num(c(5), line, CONN_FIELDS[5])?,
        proto: Proto::parse(c(6)),
        service: opt_str(c(7)),
        duration: opt_num(c(8), line, CONN_FIELDS[8])?,
        orig_bytes: opt_num(c(9), line, CONN_FIELDS[9])?,
        resp_bytes: opt_num(c(10), line, CONN_FIELDS[10])?,
        conn_state: opt_str(c(11)).unwrap_or_default(),
        local_orig: opt_bool(c(12), line, CONN_FIELDS[12])?,
        local_resp: opt_bool(c(13), line, CONN_FIELDS[13])?,
        missed_bytes: opt_num(c(14), line, CONN_FIELDS[14])?,
        history: opt_str(c(15)),
        orig_pkts: opt_num(c(16), line, CONN_FIELDS[16])?,
        orig_ip_bytes: opt_num(c(17), line, CONN_FIELDS[17])?,
        resp_pkts: opt_num(c(18), line, CONN_FIELDS[18])?,
        resp_ip_bytes: opt_num(c(19), line, CONN_FIELDS[19])?,
        tunnel_parents: opt_str(c(20)),
        raw_label: label(columns.label)?,
        raw_detailed_label: label(columns.detailed)?,
    })
}

/// Parses a connection log. Line numbers in errors are 1-based.
pub fn parse_conn_log<R: BufRead>(reader: R) -> Result<Vec<RawFlowRecord>, FlowError> {
    let mut columns: Option<Columns> = None;
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|source| FlowError::Read {
            line: lineno,
            source,
        })?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.is_empty() {
            continue;
        }
        if let Some(directive) = line.strip_prefix('#') {
            if directive.starts_with("fields") {
                columns = Some(Columns::resolve(&Header::parse(line), lineno)?);
            }
            continue;
        }
        let cols = columns
            .as_ref()
            .ok_or(FlowError::MalformedHeader { line: lineno })?;
        records.push(parse_row(line, lineno, cols)?);
    }
    Ok(records)
}

pub fn parse_conn_log_str(text: &str) -> Result<Vec<RawFlowRecord>, FlowError> {
    parse_conn_log(text.as_bytes())
}

fn put_str(out: &mut String, value: &Option<String>) {
    match value.as_deref() {
        None => out.push_str(UNSET),
        Some("") => out.push_str(EMPTY),
        Some(v) => out.push_str(v),
    }
}

fn put_num<T: std::fmt::Display>(out: &mut String, value: &Option<T>) {
    match value {
        None => out.push_str(UNSET),
        Some(v) => {
            let _ = write!(out, "{v}");
        }
    }
}

fn put_bool(out: &mut String, value: Option<bool>) {
    out.push_str(match value {
        None => UNSET,
        Some(true) => "T",
        Some(false) => "F",
    });
}

/// Serializes one record as a data row. With `labels` the trailing
/// `tunnel_parents label detailed-label` triple is joined by three spaces,
/// the layout found in the public capture files.
pub fn format_record(record: &RawFlowRecord, labels: bool) -> String {
    let mut out = String::with_capacity(192);
    let _ = write!(out, "{}\t{}\t{}\t{}\t{}\t{}\t{}\t",
        record.ts, record.uid, record.orig_h, record.orig_p, record.resp_h, record.resp_p, record.proto);
    put_str(&mut out, &record.service);
    out.push('\t');
    put_num(&mut out, &record.duration);
    out.push('\t');
    put_num(&mut out, &record.orig_bytes);
    out.push('\t');
    put_num(&mut out, &record.resp_bytes);
    out.push('\t');
    put_str(&mut out, &Some(record.conn_state.clone()).filter(|s| !s.is_empty()));
    out.push('\t');
    put_bool(&mut out, record.local_orig);
    out.push('\t');
    put_bool(&mut out, record.local_resp);
    out.push('\t');
    put_num(&mut out, &record.missed_bytes);
    out.push('\t');
    put_str(&mut out, &record.history);
    out.push('\t');
    for v in [
        &record.orig_pkts,
        &record.orig_ip_bytes,
        &record.resp_pkts,
        &record.resp_ip_bytes,
    ] {
        put_num(&mut out, v);
        out.push('\t');
    }
    put_str(&mut out, &record.tunnel_parents);
    if labels {
        out.push_str("   ");
        out.push_str(record.raw_label.as_deref().unwrap_or(UNSET));
        out.push_str("   ");
        out.push_str(record.raw_detailed_label.as_deref().unwrap_or(UNSET));
    }
    out
}

/// Renders a complete log (directives, header and rows).
pub fn write_conn_log(records: &[RawFlowRecord], labels: bool) -> String {
    let mut out = String::new();
    out.push_str("#separator \\x09\n#set_separator\t,\n#empty_field\t(empty)\n#unset_field\t-\n#path\tconn\n");
    out.push_str("#fields\t");
    out.push_str(&CONN_FIELDS.join("\t"));
    if labels {
        out.push_str("   label   detailed-label");
    }
    out.push_str("\n#types\t");
    out.push_str(&CONN_TYPES.join("\t"));
    if labels {
        out.push_str("   string   string");
    }
    out.push('\n');
    for r in records {
        out.push_str(&format_record(r, labels));
        out.push('\n');
    }
    out
}
