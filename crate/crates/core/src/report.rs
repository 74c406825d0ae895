//! Flat pass/fail records produced by the property checks.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRecord {
    pub check: String,
    pub system: String,
    pub statistic: String,
    pub value: f64,
    pub pass: bool,
}

impl CheckRecord {
    pub fn new(check: &str, system: &str, statistic: &str, value: f64, pass: bool) -> Self {
        CheckRecord {
            check: check.to_string(),
            system: system.to_string(),
            statistic: statistic.to_string(),
            value,
            pass,
        }
    }
}

/// `check,statistic,value,pass`
pub fn to_csv(records: &[CheckRecord]) -> String {
    let mut out = String::from("check,statistic,value,pass\n");
    for r in records {
        let _ = writeln!(out, "{},{},{:e},{}", r.check, r.statistic, r.value, r.pass);
    }
    out
}

/// `check,system,statistic,value,pass`
pub fn to_csv_with_system(records: &[CheckRecord]) -> String {
    let mut out = String::from("check,system,statistic,value,pass\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{:e},{}",
            r.check, r.system, r.statistic, r.value, r.pass
        );
    }
    out
}

pub fn all_pass(records: &[CheckRecord]) -> bool {
    records.iter().all(|r| r.pass)
}
