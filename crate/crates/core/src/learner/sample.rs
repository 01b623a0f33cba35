//! Labeled degradation samples and their CSV form.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::LearnerError;
use crate::oracle::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Source {
    OracleQuery,
    AxisSeed,
    BalancedDerived,
    Propagated,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::OracleQuery => "oracle_query",
            Source::AxisSeed => "axis_seed",
            Source::BalancedDerived => "balanced_derived",
            Source::Propagated => "propagated",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = LearnerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "oracle_query" => Source::OracleQuery,
            "axis_seed" => Source::AxisSeed,
            "balanced_derived" => Source::BalancedDerived,
            "propagated" => Source::Propagated,
            other => return Err(LearnerError::Parse(format!("unknown source `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub d: Vec<f64>,
    pub label: Label,
    pub source: Source,
}

impl LabeledSample {
    pub fn new(d: Vec<f64>, label: Label, source: Source) -> Self {
        Self { d, label, source }
    }
}

/// `a ≤ b` componentwise.
pub fn dominated_by(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleSet {
    pub samples: Vec<LabeledSample>,
}

impl SampleSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.samples.first().map(|s| s.d.len())
    }

    pub fn push(&mut self, s: LabeledSample) {
        self.samples.push(s);
    }

    pub fn extend(&mut self, it: impl IntoIterator<Item = LabeledSample>) {
        self.samples.extend(it);
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LabeledSample> {
        self.samples.iter()
    }

    /// `[infeasible, feasible]` counts.
    pub fn class_counts(&self) -> [usize; 2] {
        let f = self.samples.iter().filter(|s| s.label.is_feasible()).count();
        [self.len() - f, f]
    }

    /// First pair `(feasible, infeasible)` where the infeasible point lies
    /// below the feasible one, which no monotone capacity allows.
    pub fn find_conflict(&self) -> Option<(usize, usize)> {
        for (i, f) in self.samples.iter().enumerate() {
            if !f.label.is_feasible() {
                continue;
            }
            for (j, g) in self.samples.iter().enumerate() {
                if !g.label.is_feasible() && dominated_by(&g.d, &f.d) {
                    return Some((i, j));
                }
            }
        }
        None
    }

    pub fn check_consistency(&self) -> Result<(), LearnerError> {
        if let Some(dim) = self.dim() {
            if let Some(bad) = self.samples.iter().find(|s| s.d.len() != dim) {
                return Err(LearnerError::DimensionMismatch {
                    expected: dim,
                    got: bad.d.len(),
                });
            }
        }
        match self.find_conflict() {
            Some((feasible, infeasible)) => Err(LearnerError::MonotonicityConflict {
                feasible,
                infeasible,
            }),
            None => Ok(()),
        }
    }

    /// Header `d_1,…,d_n,label,source`; coordinates use the shortest
    /// representation that round-trips.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), LearnerError> {
        let dim = self.dim().unwrap_or(0);
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        let mut header: Vec<String> = (1..=dim).map(|i| format!("d_{i}")).collect();
        header.push("label".into());
        header.push("source".into());
        out.write_record(&header)?;
        for s in &self.samples {
            let mut rec: Vec<String> = s.d.iter().map(|v| v.to_string()).collect();
            rec.push(s.label.as_u8().to_string());
            rec.push(s.source.to_string());
            out.write_record(&rec)?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, LearnerError> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        let n = headers.len();
        if n < 2 || &headers[n - 2] != "label" || &headers[n - 1] != "source" {
            return Err(LearnerError::Parse(
                "sample header must end with `label,source`".into(),
            ));
        }
        let dim = n - 2;
        let mut set = SampleSet::new();
        for rec in rd.records() {
            let rec = rec?;
            let d = (0..dim)
                .map(|i| {
                    rec[i]
                        .parse::<f64>()
                        .map_err(|e| LearnerError::Parse(format!("coordinate `{}`: {e}", &rec[i])))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let label = match &rec[dim] {
                "0" => Label::Infeasible,
                "1" => Label::Feasible,
                other => return Err(LearnerError::Parse(format!("label `{other}`"))),
            };
            set.push(LabeledSample::new(d, label, rec[dim + 1].parse()?));
        }
        Ok(set)
    }
}

impl<'a> IntoIterator for &'a SampleSet {
    type Item = &'a LabeledSample;
    type IntoIter = std::slice::Iter<'a, LabeledSample>;

    fn into_iter(self) -> Self::IntoIter {
        self.samples.iter()
    }
}

impl FromIterator<LabeledSample> for SampleSet {
    fn from_iter<I: IntoIterator<Item = LabeledSample>>(iter: I) -> Self {
        Self {
            samples: iter.into_iter().collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set() -> SampleSet {
        [
            LabeledSample::new(vec![0.1, 0.7], Label::Feasible, Source::OracleQuery),
            LabeledSample::new(vec![1.0 / 3.0, 0.9], Label::Infeasible, Source::BalancedDerived),
            LabeledSample::new(vec![0.0, 0.0], Label::Feasible, Source::AxisSeed),
        ]
        .into_iter()
        .collect()
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let s = set();
        let text = s.to_csv_string();
        assert!(text.starts_with("d_1,d_2,label,source\n"));
        assert_eq!(SampleSet::read_csv(text.as_bytes()).unwrap(), s);
    }

    #[test]
    fn bad_rows_are_rejected() {
        let bad = "d_1,label,source\n0.5,2,oracle_query\n";
        assert!(SampleSet::read_csv(bad.as_bytes()).is_err());
        let bad = "d_1,label,source\n0.5,1,guess\n";
        assert!(SampleSet::read_csv(bad.as_bytes()).is_err());
        assert!(SampleSet::read_csv("x,y\n".as_bytes()).is_err());
    }

    #[test]
    fn conflicts_are_found() {
        let mut s = set();
        assert!(s.check_consistency().is_ok());
        s.push(LabeledSample::new(vec![0.05, 0.5], Label::Infeasible, Source::OracleQuery));
        assert!(matches!(
            s.check_consistency(),
            Err(LearnerError::MonotonicityConflict { feasible: 0, infeasible: 3 })
        ));
    }

    #[test]
    fn counts() {
        assert_eq!(set().class_counts(), [1, 2]);
    }
}
