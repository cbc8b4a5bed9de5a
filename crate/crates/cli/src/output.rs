use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::runner::ExperimentRecord;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SPARSETEST_OUT_DIR";

/// Rows as JSON lines, in trial order.
pub fn jsonl(record: &ExperimentRecord) -> String {
    let mut s = String::new();
    for row in &record.rows {
        s.push_str(&serde_json::to_string(row).expect("row serializes"));
        s.push('\n');
    }
    s
}

fn csv_field(v: &str) -> String {
    if v.contains([',', '"', '\n']) {
        format!("\"{}\"", v.replace('"', "\"\""))
    } else {
        v.to_string()
    }
}

/// Two-line CSV: header, then values. Starts with the config hash and the
/// Unix timestamp of the write.
pub fn summary_csv(record: &ExperimentRecord, timestamp: u64) -> String {
    let mut keys = vec!["command".to_string(), "config_hash".into(), "timestamp".into()];
    let mut vals = vec![record.command.name().to_string(), record.config_hash.clone(), timestamp.to_string()];
    for (k, v) in &record.summary {
        keys.push(csv_field(k));
        vals.push(csv_field(v));
    }
    format!("{}\n{}\n", keys.join(","), vals.join(","))
}

pub fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Writes `<command>-<hash12>.jsonl`, `.summary.csv` and, when present, the
/// `.csv` table into `dir`. Returns the paths written.
pub fn write_record(record: &ExperimentRecord, dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let stem = format!("{}-{}", record.command.name(), &record.config_hash[..12]);
    let mut out = vec![];
    let mut put = |name: String, body: &str| -> io::Result<()> {
        let p = dir.join(name);
        let mut f = fs::File::create(&p)?;
        f.write_all(body.as_bytes())?;
        out.push(p);
        Ok(())
    };
    put(format!("{stem}.jsonl"), &jsonl(record))?;
    put(format!("{stem}.summary.csv"), &summary_csv(record, now()))?;
    if let Some(t) = &record.table {
        put(format!("{stem}.csv"), t)?;
    }
    Ok(out)
}
