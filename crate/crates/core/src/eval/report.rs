use std::io::Write;

use serde::Serialize;

use super::{KlReport, PredictionReport};
use crate::error::Result;

/// Audit header carried by every report file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportHeader {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config: serde_json::Value,
}

impl ReportHeader {
    pub fn new(seed: u64, config: serde_json::Value) -> Self {
        Self {
            tool: "melodikit".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            config,
        }
    }

    /// `#`-prefixed comment lines for the top of a CSV file.
    pub fn write_csv_comment<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# {} {}", self.tool, self.version)?;
        writeln!(w, "# seed: {}", self.seed)?;
        writeln!(w, "# config: {}", serde_json::to_string(&self.config)?)?;
        Ok(())
    }

    /// `{"header": ..., "report": ...}` as pretty JSON.
    pub fn wrap_json<T: Serialize>(&self, report: &T) -> Result<String> {
        #[derive(Serialize)]
        struct Wrapped<'a, T> {
            header: &'a ReportHeader,
            report: &'a T,
        }
        let mut s = serde_json::to_string_pretty(&Wrapped { header: self, report })?;
        s.push('\n');
        Ok(s)
    }
}

impl PredictionReport {
    /// Long-format CSV: `tau,model,mean_loglik,stderr`.
    pub fn write_csv<W: Write>(&self, header: &ReportHeader, mut w: W) -> Result<()> {
        header.write_csv_comment(&mut w)?;
        writeln!(w, "tau,model,mean_loglik,stderr")?;
        for c in &self.curves {
            for (k, (m, s)) in c.mean_loglik.iter().zip(&c.stderr).enumerate() {
                writeln!(w, "{},{},{},{}", k + 1, c.model, m, s)?;
            }
        }
        Ok(())
    }
}

impl KlReport {
    /// `statistic,model,mean,variance`.
    pub fn write_csv<W: Write>(&self, header: &ReportHeader, mut w: W) -> Result<()> {
        header.write_csv_comment(&mut w)?;
        writeln!(w, "statistic,model,mean,variance")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{}", r.statistic, r.model, r.mean, r.variance)?;
        }
        Ok(())
    }

    /// Statistics down the rows, one `mean (variance)` column per model, as
    /// in a printed comparison table.
    pub fn to_table(&self) -> String {
        let mut models: Vec<&str> = Vec::new();
        let mut stats = Vec::new();
        for r in &self.rows {
            if !models.contains(&r.model.as_str()) {
                models.push(&r.model);
            }
            if !stats.contains(&r.statistic) {
                stats.push(r.statistic);
            }
        }
        let mut out = format!("{:<10}", "statistic");
        for m in &models {
            out.push_str(&format!(" {:>20}", m));
        }
        out.push('\n');
        for s in stats {
            out.push_str(&format!("{:<10}", s.to_string()));
            for m in &models {
                let cell = self
                    .get(m, s)
                    .map(|r| format!("{:.3} ({:.4})", r.mean, r.variance))
                    .unwrap_or_default();
                out.push_str(&format!(" {cell:>20}"));
            }
            out.push('\n');
        }
        out
    }
}
