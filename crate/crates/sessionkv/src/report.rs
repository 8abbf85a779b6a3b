//! CSV report rows for benchmark runs.

use std::fmt::Write as _;
use std::io;

pub const CSV_HEADER: &str = "protocol,store,transport,put_rate,n_ops,workers,seed,\
throughput_ops_s,p50_us,p95_us,p99_us,peak_mem_bytes,stalled,retries";

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub protocol: String,
    pub store: String,
    pub transport: String,
    pub put_rate: f64,
    pub n_ops: u64,
    pub workers: u64,
    pub seed: u64,
    pub throughput_ops_s: f64,
    pub p50_us: f64,
    pub p95_us: f64,
    pub p99_us: f64,
    /// Empty field when the platform does not report a high-water mark.
    pub peak_mem_bytes: Option<u64>,
    pub stalled: bool,
    pub retries: u64,
}

impl Row {
    fn to_csv(&self) -> String {
        let mut line = String::new();
        let peak = self.peak_mem_bytes.map(|b| b.to_string()).unwrap_or_default();
        write!(
            line,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.protocol,
            self.store,
            self.transport,
            self.put_rate,
            self.n_ops,
            self.workers,
            self.seed,
            self.throughput_ops_s,
            self.p50_us,
            self.p95_us,
            self.p99_us,
            peak,
            self.stalled,
            self.retries,
        )
        .unwrap();
        line
    }
}

pub fn write_report(mut w: impl io::Write, rows: &[Row]) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(w, "{}", row.to_csv())?;
    }
    Ok(())
}

#[derive(Debug)]
pub enum ReportError {
    MissingHeader,
    BadRow(usize, String),
}

impl std::fmt::Display for ReportError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ReportError::MissingHeader => write!(f, "missing or unexpected header line"),
            ReportError::BadRow(line, s) => write!(f, "malformed row at line {line}: {s}"),
        }
    }
}

impl std::error::Error for ReportError {}

pub fn read_report(text: &str) -> Result<Vec<Row>, ReportError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        _ => return Err(ReportError::MissingHeader),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let bad = || ReportError::BadRow(i + 1, line.to_string());
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 14 {
            return Err(bad());
        }
        rows.push(Row {
            protocol: f[0].to_string(),
            store: f[1].to_string(),
            transport: f[2].to_string(),
            put_rate: f[3].parse().map_err(|_| bad())?,
            n_ops: f[4].parse().map_err(|_| bad())?,
            workers: f[5].parse().map_err(|_| bad())?,
            seed: f[6].parse().map_err(|_| bad())?,
            throughput_ops_s: f[7].parse().map_err(|_| bad())?,
            p50_us: f[8].parse().map_err(|_| bad())?,
            p95_us: f[9].parse().map_err(|_| bad())?,
            p99_us: f[10].parse().map_err(|_| bad())?,
            peak_mem_bytes: if f[11].is_empty() {
                None
            } else {
                Some(f[11].parse().map_err(|_| bad())?)
            },
            stalled: f[12].parse().map_err(|_| bad())?,
            retries: f[13].parse().map_err(|_| bad())?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Row {
        Row {
            protocol: "cc_impl_vc".into(),
            store: "tree".into(),
            transport: "inmemory".into(),
            put_rate: 0.5,
            n_ops: 4000,
            workers: 4,
            seed: 42,
            throughput_ops_s: 123456.789,
            p50_us: 1.5,
            p95_us: 8.25,
            p99_us: 20.0,
            peak_mem_bytes: Some(12_345_678),
            stalled: false,
            retries: 3,
        }
    }

    #[test]
    fn header_is_exact() {
        let mut buf = Vec::new();
        write_report(&mut buf, &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "protocol,store,transport,put_rate,n_ops,workers,seed,throughput_ops_s,\
p50_us,p95_us,p99_us,peak_mem_bytes,stalled,retries\n"
        );
    }

    #[test]
    fn rows_round_trip() {
        let rows = vec![sample(), Row { peak_mem_bytes: None, stalled: true, ..sample() }];
        let mut buf = Vec::new();
        write_report(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(read_report(&text).unwrap(), rows);
    }

    #[test]
    fn junk_is_rejected() {
        assert!(read_report("nope\n").is_err());
        let text = format!("{CSV_HEADER}\n1,2,3\n");
        assert!(read_report(&text).is_err());
    }
}
