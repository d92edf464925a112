//! Consumer heat demand series.
//!
//! Input files follow the building-side convention: a positive `q_w` means
//! the network supplies heat to the building. The station balance counts
//! heat injected into the network as positive, so values are negated once,
//! on ingestion, and never again.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::units::{Seconds, Watts};

/// Samples of one consumer in network convention (positive = injected).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DemandSeries {
    times: Vec<Seconds>,
    values: Vec<Watts>,
}

impl DemandSeries {
    pub fn new(samples: Vec<(Seconds, Watts)>) -> std::result::Result<Self, String> {
        if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err("timestamps must be strictly increasing".into());
        }
        if samples.iter().any(|(t, q)| !t.is_finite() || !q.is_finite()) {
            return Err("samples must be finite".into());
        }
        let (times, values) = samples.into_iter().unzip();
        Ok(Self { times, values })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Zero-order hold; 0 W before the first and after the last sample.
    pub fn sample(&self, t: Seconds) -> Watts {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 || (k == self.times.len() && t > self.times[k - 1]) {
            0.0
        } else {
            self.values[k - 1]
        }
    }

    pub fn samples(&self) -> impl Iterator<Item = (Seconds, Watts)> + '_ {
        self.times.iter().copied().zip(self.values.iter().copied())
    }

    /// Every sample multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            times: self.times.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DemandSet {
    pub series: BTreeMap<String, DemandSeries>,
}

#[derive(Debug, Deserialize)]
struct Row {
    time_s: f64,
    consumer_id: String,
    q_w: f64,
}

impl DemandSet {
    pub fn get(&self, id: &str) -> Option<&DemandSeries> {
        self.series.get(id)
    }

    /// Parses `time_s,consumer_id,q_w` rows. Rows of different consumers may
    /// interleave; within one consumer times must increase strictly.
    pub fn from_reader(reader: impl Read, origin: &str) -> Result<Self> {
        let csv_err = |message: String| Error::Csv {
            path: origin.to_string(),
            message,
        };
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| csv_err(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["time_s", "consumer_id", "q_w"] {
            return Err(csv_err(format!(
                "expected header `time_s,consumer_id,q_w`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut raw: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
        for (line, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| csv_err(format!("row {}: {e}", line + 2)))?;
            raw.entry(row.consumer_id).or_default().push((row.time_s, -row.q_w));
        }
        let mut series = BTreeMap::new();
        for (id, samples) in raw {
            let s = DemandSeries::new(samples).map_err(|m| csv_err(format!("consumer `{id}`: {m}")))?;
            series.insert(id, s);
        }
        Ok(Self { series })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_reader(file, &path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(text: &str) -> Result<DemandSet> {
        DemandSet::from_reader(text.as_bytes(), "test")
    }

    #[test]
    fn zero_order_hold() {
        let d = set("time_s,consumer_id,q_w\n10,a,100\n20,a,200\n").unwrap();
        let a = d.get("a").unwrap();
        assert_eq!(a.sample(5.0), 0.0);
        assert_eq!(a.sample(10.0), -100.0);
        assert_eq!(a.sample(15.0), -100.0);
        assert_eq!(a.sample(20.0), -200.0);
        assert_eq!(a.sample(20.5), 0.0);
    }

    #[test]
    fn interleaved_consumers() {
        let d = set("time_s,consumer_id,q_w\n0,a,1\n0,b,2\n60,a,3\n60,b,-4\n").unwrap();
        assert_eq!(d.get("b").unwrap().sample(61.0), 0.0);
        assert_eq!(d.get("b").unwrap().sample(60.0), 4.0);
        assert_eq!(d.series.len(), 2);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(set("t,consumer_id,q_w\n0,a,1\n").is_err());
        assert!(set("time_s,consumer_id,q_w\n10,a,1\n10,a,2\n").is_err());
        assert!(set("time_s,consumer_id,q_w\n10,a,abc\n").is_err());
        assert!(set("time_s,consumer_id,q_w\n10,a,NaN\n").is_err());
    }
}
