//! Candidate interval collections: random (wild-binary-segmentation style)
//! and deterministic seeded multi-scale constructions.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Closed time interval `[start, end]`, 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Interval {
    pub start: usize,
    pub end: usize,
}

impl Interval {
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start > end {
            return Err(Error::InvalidParameter(format!(
                "interval start {start} exceeds end {end}"
            )));
        }
        Ok(Self { start, end })
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn intersects(&self, other: &Interval) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    pub fn contains(&self, other: &Interval) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.start, self.end)
    }
}

/// Admissible time range `[first, last]` for candidate intervals; for a VAR(q)
/// panel of length `T` this is `[q+1, T]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Domain {
    pub first: usize,
    pub last: usize,
}

impl Domain {
    pub fn new(first: usize, last: usize) -> Result<Self> {
        if first < 1 || first > last {
            return Err(Error::InvalidParameter(format!(
                "domain [{first}, {last}] is empty or not 1-based"
            )));
        }
        Ok(Self { first, last })
    }

    pub fn for_panel(len: usize, order: usize) -> Result<Self> {
        Self::new(order + 1, len)
    }

    pub fn len(&self) -> usize {
        self.last - self.first + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn check_min_length(&self, min_length: usize) -> Result<()> {
        if min_length == 0 || min_length > self.len() {
            return Err(Error::InfeasibleLength {
                min_length,
                lo: self.first,
                hi: self.last,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Random { seed: u64, count: usize },
    Seeded { decay: f64 },
    Explicit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalSet {
    intervals: Vec<Interval>,
    min_length: usize,
    provenance: Provenance,
    domain: Domain,
}

impl IntervalSet {
    /// Wraps a user-supplied list, validating bounds and minimum length.
    pub fn explicit(intervals: Vec<Interval>, min_length: usize, domain: Domain) -> Result<Self> {
        if let Some(bad) = intervals
            .iter()
            .find(|j| j.start < domain.first || j.end > domain.last || j.len() < min_length)
        {
            return Err(Error::InvalidParameter(format!(
                "interval {bad} outside domain [{}, {}] or shorter than {min_length}",
                domain.first, domain.last
            )));
        }
        Ok(Self {
            intervals,
            min_length,
            provenance: Provenance::Explicit,
            domain,
        })
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn min_length(&self) -> usize {
        self.min_length
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// Two-column `start,end` CSV with header.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["start", "end"])?;
        for j in &self.intervals {
            w.write_record([j.start.to_string(), j.end.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, min_length: usize, domain: Domain) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut intervals = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let field = |col: usize| -> Result<usize> {
                rec.get(col)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::Parse {
                        row: row + 2,
                        column: col + 1,
                        message: "expected a non-negative integer".into(),
                    })
            };
            intervals.push(Interval::new(field(0)?, field(1)?)?);
        }
        Self::explicit(intervals, min_length, domain)
    }
}

/// Draws `count` intervals: start uniform on `[first, last − L + 1]`, then end
/// uniform on `[start + L − 1, last]`. Duplicates are kept.
pub fn random_intervals(domain: Domain, min_length: usize, count: usize, seed: u64) -> Result<IntervalSet> {
    domain.check_min_length(min_length)?;
    if count == 0 {
        return Err(Error::InvalidParameter("interval count must be at least 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let intervals = (0..count)
        .map(|_| {
            let start = rng.random_range(domain.first..=domain.last + 1 - min_length);
            let end = rng.random_range(start + min_length - 1..=domain.last);
            Interval { start, end }
        })
        .collect();
    Ok(IntervalSet {
        intervals,
        min_length,
        provenance: Provenance::Random { seed, count },
        domain,
    })
}

// guards ceil() against representation error in powers of the decay
const CEIL_SLACK: f64 = 1e-9;

/// Seeded intervals with decay `a ∈ [1/2, 1)`.
///
/// Layer `k = 1, 2, …` holds `2⌈a^{-(k-1)}⌉ − 1` intervals of length
/// `⌈N a^{k-1}⌉` (`N` the domain length) with evenly spaced starts rounded to
/// the nearest integer. Layers stop once the length drops below `L`;
/// duplicates are dropped, keeping first occurrence.
pub fn seeded_intervals(domain: Domain, min_length: usize, decay: f64) -> Result<IntervalSet> {
    if !(0.5..1.0).contains(&decay) {
        return Err(Error::InvalidParameter(format!("decay {decay} must lie in [1/2, 1)")));
    }
    domain.check_min_length(min_length)?;
    let n = domain.len() as f64;
    let mut seen = HashSet::new();
    let mut intervals = Vec::new();
    for k in 0.. {
        let len = (n * decay.powi(k) - CEIL_SLACK).ceil().max(1.0) as usize;
        if len < min_length {
            break;
        }
        let count = 2 * ((1.0 / decay).powi(k) - CEIL_SLACK).ceil() as usize - 1;
        let span = (domain.len() - len) as f64;
        for i in 0..count {
            let offset = if count == 1 {
                0
            } else {
                (i as f64 * span / (count - 1) as f64).round() as usize
            };
            let j = Interval {
                start: domain.first + offset,
                end: domain.first + offset + len - 1,
            };
            if seen.insert(j) {
                intervals.push(j);
            }
        }
        if len == 1 {
            break;
        }
    }
    Ok(IntervalSet {
        intervals,
        min_length,
        provenance: Provenance::Seeded { decay },
        domain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn iv(s: usize, e: usize) -> Interval {
        Interval::new(s, e).unwrap()
    }

    #[test]
    fn seeded_enumeration_small_case() {
        let set = seeded_intervals(Domain::new(1, 8).unwrap(), 2, 0.5).unwrap();
        let expected = vec![
            iv(1, 8),
            iv(1, 4),
            iv(3, 6),
            iv(5, 8),
            iv(1, 2),
            iv(2, 3),
            iv(3, 4),
            iv(4, 5),
            iv(5, 6),
            iv(6, 7),
            iv(7, 8),
        ];
        assert_eq!(set.intervals(), expected.as_slice());
    }

    #[test]
    fn seeded_decay_controls_size() {
        let d = Domain::for_panel(500, 1).unwrap();
        let fine = seeded_intervals(d, 11, 1.0 / 1.1).unwrap();
        let coarse = seeded_intervals(d, 11, 1.0 / 1.2).unwrap();
        assert!(fine.len() > coarse.len(), "{} vs {}", fine.len(), coarse.len());
    }

    #[test]
    fn seeded_rejects_bad_decay() {
        let d = Domain::new(1, 100).unwrap();
        assert!(seeded_intervals(d, 5, 0.4).is_err());
        assert!(seeded_intervals(d, 5, 1.0).is_err());
    }

    #[test]
    fn random_respects_bounds_and_count() {
        let d = Domain::for_panel(500, 1).unwrap();
        let set = random_intervals(d, 11, 1029, 17).unwrap();
        assert_eq!(set.len(), 1029);
        assert!(set
            .intervals()
            .iter()
            .all(|j| j.len() >= 11 && j.start >= 2 && j.end <= 500));
        assert_eq!(set, random_intervals(d, 11, 1029, 17).unwrap());
    }

    #[test]
    fn random_full_length_degenerates() {
        let d = Domain::new(1, 30).unwrap();
        let set = random_intervals(d, 30, 5, 1).unwrap();
        assert!(set.intervals().iter().all(|j| *j == iv(1, 30)));
    }

    #[test]
    fn random_rejects_infeasible_length() {
        let d = Domain::for_panel(20, 1).unwrap();
        assert!(matches!(
            random_intervals(d, 20, 3, 1),
            Err(Error::InfeasibleLength { .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let d = Domain::new(1, 50).unwrap();
        let set = seeded_intervals(d, 5, 0.5).unwrap();
        let mut buf = Vec::new();
        set.write_csv(&mut buf).unwrap();
        let back = IntervalSet::read_csv(buf.as_slice(), 5, d).unwrap();
        assert_eq!(back.intervals(), set.intervals());
    }

    proptest! {
        #[test]
        fn seeded_sets_are_valid(len in 10usize..400, min_len in 1usize..40, inv in 1.05f64..2.0) {
            prop_assume!(min_len <= len);
            let d = Domain::new(1, len).unwrap();
            let set = seeded_intervals(d, min_len, 1.0 / inv).unwrap();
            let mut uniq = HashSet::new();
            for j in set.intervals() {
                prop_assert!(j.len() >= min_len);
                prop_assert!(j.start >= 1 && j.end <= len);
                prop_assert!(uniq.insert(*j));
            }
            // idempotent and order-stable
            prop_assert_eq!(set.clone(), seeded_intervals(d, min_len, 1.0 / inv).unwrap());
        }

        #[test]
        fn seeded_sets_nest_inside_long_windows(
            total in 100usize..600,
            min_len in 5usize..30,
            frac in 0.0f64..1.0,
            wlen_extra in 0usize..60,
            inv in 1.05f64..1.5,
        ) {
            // a window of length >= 2L contains some candidate
            let wlen = 2 * min_len + wlen_extra;
            prop_assume!(wlen <= total);
            let start = 1 + ((total - wlen) as f64 * frac) as usize;
            let window = Interval::new(start, start + wlen - 1).unwrap();
            let set = seeded_intervals(Domain::new(1, total).unwrap(), min_len, 1.0 / inv).unwrap();
            prop_assert!(set.intervals().iter().any(|j| window.contains(j)));
        }
    }
}
