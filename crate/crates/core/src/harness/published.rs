//! Reference numbers shipped with the crate for side-by-side diffs.

use std::sync::OnceLock;

use serde::Deserialize;

use crate::chain::Protocol;

const FIXTURE: &str = include_str!("../../data/published.toml");

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Published {
    pub block_interval_secs: f64,
    pub committee: CommitteeRef,
    pub overhead: OverheadRef,
    pub offline: OfflineRef,
    pub selfish: SelfishRef,
    pub table2: Vec<Table2Cell>,
    pub table3_layout: Table3Layout,
    pub table3: Vec<Table3Row>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommitteeRef {
    pub window: u32,
    pub alpha: f64,
    pub epsilon: f64,
    pub sufficient: u32,
    pub deployed: u32,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverheadRef {
    pub votes: usize,
    pub qc_bytes: usize,
    pub tail_threshold: u64,
    pub tail_prob: f64,
    pub tail_qc_bytes: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfflineRef {
    pub gamma_off: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelfishRef {
    pub alpha: f64,
    pub gamma: f64,
    pub nc_revenue: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table2Cell {
    pub epsilon: f64,
    pub l: u32,
    pub p: f64,
    pub tf: f64,
    pub unit: String,
}

impl Table2Cell {
    /// Seconds per unit of `tf`.
    pub fn unit_secs(&self) -> f64 {
        unit_secs(&self.unit).unwrap_or_else(|| panic!("unknown time unit {}", self.unit))
    }
}

/// Seconds in `h`, `d`, `w` or a 365-day `y`.
pub fn unit_secs(unit: &str) -> Option<f64> {
    Some(match unit {
        "s" => 1.0,
        "h" => 3600.0,
        "d" => 86_400.0,
        "w" => 7.0 * 86_400.0,
        "y" => 365.0 * 86_400.0,
        _ => return None,
    })
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table3Layout {
    pub k: Vec<u32>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table3Row {
    pub delta: f64,
    pub alpha: f64,
    pub nakamoto: Vec<f64>,
    pub crystal: Vec<f64>,
}

impl Published {
    pub fn table2_cell(&self, eps: f64, l: u32) -> Option<&Table2Cell> {
        self.table2.iter().find(|c| same(c.epsilon, eps) && c.l == l)
    }

    pub fn table3_cell(&self, protocol: Protocol, delta: f64, alpha: f64, k: u32) -> Option<f64> {
        let col = self.table3_layout.k.iter().position(|&x| x == k)?;
        let row = self.table3.iter().find(|r| same(r.delta, delta) && same(r.alpha, alpha))?;
        Some(match protocol {
            Protocol::Nakamoto => row.nakamoto[col],
            Protocol::Crystal => row.crystal[col],
        })
    }
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// The shipped fixture, parsed once.
pub fn published() -> &'static Published {
    static CELL: OnceLock<Published> = OnceLock::new();
    CELL.get_or_init(|| toml::from_str(FIXTURE).expect("bundled fixture parses"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_is_complete() {
        let p = published();
        assert_eq!(p.table2.len(), 6);
        assert_eq!(p.table3.len(), 10);
        assert!(p.table3.iter().all(|r| r.nakamoto.len() == 4 && r.crystal.len() == 4));
        assert_eq!(p.table3_cell(Protocol::Nakamoto, 0.0, 0.2, 4), Some(6.67e-2));
        assert_eq!(p.table3_cell(Protocol::Crystal, 0.0, 0.45, 8), Some(2.01e-1));
        assert_eq!(p.table3_cell(Protocol::Crystal, 10.0, 0.1, 2), Some(1.28e-2));
        assert_eq!(p.table3_cell(Protocol::Crystal, 5.0, 0.1, 2), None);
        assert_eq!(p.table2_cell(1e-4, 3).unwrap().tf, 190.2);
        for c in &p.table2 {
            c.unit_secs();
        }
    }
}
