//! Line-delimited JSON transaction logs and ground-truth files.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{Address, CurrencyId, Source, TransactionRecord, UserAccounts};
use crate::amount::Amount;
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LineSource {
    Account(Address),
    Mint(MintTag),
}

#[derive(Serialize, Deserialize)]
enum MintTag {
    #[serde(rename = "MINT")]
    Mint,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LogLine {
    turn: u32,
    currency: CurrencyId,
    src: LineSource,
    dst: Address,
    amount: Amount,
    fee: Amount,
}

impl From<&TransactionRecord> for LogLine {
    fn from(r: &TransactionRecord) -> Self {
        LogLine {
            turn: r.turn,
            currency: r.currency,
            src: match r.source {
                Source::Mint => LineSource::Mint(MintTag::Mint),
                Source::Account(a) => LineSource::Account(a),
            },
            dst: r.destination,
            amount: r.amount,
            fee: r.fee,
        }
    }
}

impl From<LogLine> for TransactionRecord {
    fn from(l: LogLine) -> Self {
        TransactionRecord {
            turn: l.turn,
            currency: l.currency,
            source: match l.src {
                LineSource::Mint(_) => Source::Mint,
                LineSource::Account(a) => Source::Account(a),
            },
            destination: l.dst,
            amount: l.amount,
            fee: l.fee,
        }
    }
}

/// One JSON object per line.
pub fn write_record<W: Write>(out: &mut W, record: &TransactionRecord) -> Result<()> {
    serde_json::to_writer(&mut *out, &LogLine::from(record))?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn write_log<'a, W: Write>(
    out: &mut W,
    records: impl IntoIterator<Item = &'a TransactionRecord>,
) -> Result<()> {
    for r in records {
        write_record(out, r)?;
    }
    Ok(())
}

pub fn parse_record(line: &str) -> Result<TransactionRecord> {
    let parsed: LogLine = serde_json::from_str(line)?;
    Ok(parsed.into())
}

/// Reads a log, skipping blank lines.
pub fn read_log<R: BufRead>(input: R) -> Result<Vec<TransactionRecord>> {
    let mut records = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record =
            parse_record(&line).map_err(|e| Error::CorruptLog(format!("line {}: {e}", n + 1)))?;
        records.push(record);
    }
    Ok(records)
}

#[derive(Serialize, Deserialize)]
struct GroundTruth {
    users: Vec<UserAccounts>,
}

pub fn ground_truth_to_json(users: &[UserAccounts]) -> Result<String> {
    #[derive(Serialize)]
    struct Borrowed<'a> {
        users: &'a [UserAccounts],
    }
    Ok(serde_json::to_string(&Borrowed { users })?)
}

pub fn ground_truth_from_json(text: &str) -> Result<Vec<UserAccounts>> {
    let gt: GroundTruth = serde_json::from_str(text)?;
    Ok(gt.users)
}
