use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{MessageKind, WireMessage};
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Worker to master.
    Up,
    /// Master to worker.
    Down,
}

/// Ledger category. The epoch-start full-gradient exchange is tracked as its
/// own kind so totals can be reported with or without it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LedgerKind {
    FullPrecisionVector,
    QuantizedDense,
    QuantizedSparse,
    SnapshotFlag,
    Barrier,
}

impl From<MessageKind> for LedgerKind {
    fn from(k: MessageKind) -> Self {
        match k {
            MessageKind::FullPrecisionVector => LedgerKind::FullPrecisionVector,
            MessageKind::QuantizedDense => LedgerKind::QuantizedDense,
            MessageKind::QuantizedSparse => LedgerKind::QuantizedSparse,
            MessageKind::SnapshotFlag => LedgerKind::SnapshotFlag,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub step: u64,
    pub direction: Direction,
    pub kind: LedgerKind,
    pub bits: u64,
    pub cumulative_bits: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct KindTotals {
    pub count: u64,
    pub bits: u64,
}

/// Cumulative transmitted-bit accounting.
#[derive(Clone, Debug, Default)]
pub struct BitLedger {
    up_bits: u64,
    down_bits: u64,
    per_kind: BTreeMap<LedgerKind, KindTotals>,
    rows: Vec<LedgerRow>,
}

impl BitLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, step: u64, msg: &WireMessage, direction: Direction) {
        self.record_bits(step, msg.kind().into(), msg.bits(), direction);
    }

    pub fn record_bits(&mut self, step: u64, kind: LedgerKind, bits: u64, direction: Direction) {
        match direction {
            Direction::Up => self.up_bits += bits,
            Direction::Down => self.down_bits += bits,
        }
        let e = self.per_kind.entry(kind).or_default();
        e.count += 1;
        e.bits += bits;
        self.rows.push(LedgerRow { step, direction, kind, bits, cumulative_bits: self.total_bits() });
    }

    pub fn up_bits(&self) -> u64 {
        self.up_bits
    }

    pub fn down_bits(&self) -> u64 {
        self.down_bits
    }

    pub fn total_bits(&self) -> u64 {
        self.up_bits + self.down_bits
    }

    pub fn per_kind(&self) -> &BTreeMap<LedgerKind, KindTotals> {
        &self.per_kind
    }

    pub fn kind_bits(&self, kind: LedgerKind) -> u64 {
        self.per_kind.get(&kind).map_or(0, |t| t.bits)
    }

    pub fn rows(&self) -> &[LedgerRow] {
        &self.rows
    }

    /// CSV with columns `step,direction,kind,bits,cumulative_bits`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{encode_dense, encode_flag, encode_full};
    use crate::quantizer::{LowPrecisionVector, QuantGrid};

    #[test]
    fn records_and_conserves() {
        let mut ledger = BitLedger::new();
        let q = LowPrecisionVector { grid: QuantGrid::new(0.5, 8).unwrap(), codes: vec![0; 1000] };
        ledger.record(0, &encode_dense(&q).unwrap(), Direction::Down);
        assert_eq!(ledger.down_bits(), 8032);
        ledger.record(1, &encode_flag(), Direction::Down);
        assert_eq!(ledger.down_bits(), 8033);
        ledger.record(1, &encode_full(&[1.0; 3]), Direction::Up);
        ledger.record_bits(2, LedgerKind::Barrier, 96, Direction::Up);
        let sum: u64 = ledger.per_kind().values().map(|t| t.bits).sum();
        assert_eq!(sum, ledger.up_bits() + ledger.down_bits());
        assert_eq!(ledger.rows().last().unwrap().cumulative_bits, ledger.total_bits());
        assert_eq!(ledger.per_kind()[&LedgerKind::SnapshotFlag].count, 1);

        let mut buf = Vec::new();
        ledger.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("step,direction,kind,bits,cumulative_bits\n0,down,quantized_dense,8032,8032\n"));
    }

    #[test]
    fn totals_ignore_order() {
        let msgs = [(encode_flag(), Direction::Down), (encode_full(&[0.0; 4]), Direction::Up), (encode_flag(), Direction::Up)];
        let mut a = BitLedger::new();
        let mut b = BitLedger::new();
        for (m, d) in &msgs {
            a.record(0, m, *d);
        }
        for (m, d) in msgs.iter().rev() {
            b.record(0, m, *d);
        }
        assert_eq!(a.total_bits(), b.total_bits());
        assert_eq!(a.per_kind(), b.per_kind());
    }
}
