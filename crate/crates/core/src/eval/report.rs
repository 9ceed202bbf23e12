use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::eval::ranking::RankingMetrics;

pub const METRIC_NAMES: [&str; 5] = ["precision", "recall", "f1", "map", "rmse"];

/// Metrics of one model on one rebuild.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValues {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub map: f64,
    pub rmse: f64,
}

impl MetricValues {
    pub fn new(ranking: &RankingMetrics, rmse: f64) -> Self {
        Self {
            precision: ranking.precision,
            recall: ranking.recall,
            f1: ranking.f1,
            map: ranking.map,
            rmse,
        }
    }

    /// Values in [`METRIC_NAMES`] order.
    pub fn as_array(&self) -> [f64; 5] {
        [self.precision, self.recall, self.f1, self.map, self.rmse]
    }
}

/// Per-rebuild metrics of one model, with summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: String,
    /// `(rebuild index, values)`, failed rebuilds omitted.
    pub rebuilds: Vec<(usize, MetricValues)>,
}

impl MetricsReport {
    pub fn new(model: impl Into<String>) -> Self {
        Self {
            model: model.into(),
            rebuilds: Vec::new(),
        }
    }

    /// Scores of metric `m` (index into [`METRIC_NAMES`]) across rebuilds.
    pub fn series(&self, m: usize) -> Vec<f64> {
        self.rebuilds.iter().map(|(_, v)| v.as_array()[m]).collect()
    }

    pub fn mean(&self, m: usize) -> f64 {
        let s = self.series(m);
        s.iter().sum::<f64>() / s.len() as f64
    }

    /// Sample standard deviation (n − 1 denominator); 0 for one rebuild.
    pub fn std(&self, m: usize) -> f64 {
        let s = self.series(m);
        if s.len() < 2 {
            return 0.0;
        }
        let mean = self.mean(m);
        (s.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (s.len() - 1) as f64).sqrt()
    }

    pub fn write_csv_header(mut w: impl Write) -> Result<()> {
        writeln!(w, "model,rebuild,precision,recall,f1,map,rmse")?;
        Ok(())
    }

    /// Rows only; pair with [`write_csv_header`](Self::write_csv_header).
    pub fn write_csv_rows(&self, mut w: impl Write) -> Result<()> {
        for (r, v) in &self.rebuilds {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                self.model, r, v.precision, v.recall, v.f1, v.map, v.rmse
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_stats() {
        let mut r = MetricsReport::new("cf");
        let v = |p| MetricValues {
            precision: p,
            recall: 0.5,
            f1: 0.25,
            map: 0.125,
            rmse: 1.0,
        };
        r.rebuilds.push((0, v(0.2)));
        r.rebuilds.push((1, v(0.4)));
        assert!((r.mean(0) - 0.3).abs() < 1e-15);
        assert!((r.std(0) - 0.02f64.sqrt()).abs() < 1e-12);
        assert_eq!(r.std(1), 0.0);
        let mut buf = Vec::new();
        MetricsReport::write_csv_header(&mut buf).unwrap();
        r.write_csv_rows(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "model,rebuild,precision,recall,f1,map,rmse\ncf,0,0.2,0.5,0.25,0.125,1\ncf,1,0.4,0.5,0.25,0.125,1\n"
        );
    }
}
