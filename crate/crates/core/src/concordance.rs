//! Pair counting and the C-index decomposition.
//!
//! A comparable pair is oriented so that the subject with the earlier
//! reference time is an observed event. The pair is concordant when that
//! subject also has the strictly smaller predicted time, discordant when its
//! prediction is strictly larger, and tied when predictions are exactly
//! equal. Ties in predictions earn half credit. Two events at the same time
//! are not comparable.
//!
//! With `N⁺`, `N⁻`, `N⁼` split into event-event (ee) and event-censored (ec)
//! classes:
//!
//! ```text
//! CI    = (N⁺ + N⁼/2) / (N⁺ + N⁻ + N⁼)
//! CI_ee = (N⁺_ee + N⁼_ee/2) / N_ee
//! CI_ec = (N⁺_ec + N⁼_ec/2) / N_ec
//! α     = (N⁺_ee + N⁼_ee/2) / (N⁺ + N⁼/2)
//! α*    = N_ee / (N_ee + N_ec)
//! 1/CI  = α/CI_ee + (1 − α)/CI_ec
//! ```

use std::cmp::Ordering;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::dataset::{SurvivalDataset, SurvivalRecord};
use crate::error::{Error, Result};
use crate::fenwick::Fenwick;

/// Comparability conventions that the pair definition leaves open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comparability {
    /// Treat an event and a censoring recorded at the same time as an
    /// event-censored pair, with the event taken to come first.
    pub tied_event_censored: bool,
}

impl Default for Comparability {
    fn default() -> Self {
        Self {
            tied_event_censored: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairClass {
    EventEvent,
    EventCensored,
    NotComparable,
}

/// Classifies a pair under the default convention.
pub fn classify_pair(a: &SurvivalRecord, b: &SurvivalRecord) -> PairClass {
    classify_pair_with(a, b, Comparability::default())
}

pub fn classify_pair_with(a: &SurvivalRecord, b: &SurvivalRecord, conv: Comparability) -> PairClass {
    orient_pair(a.time, a.event, b.time, b.event, conv).0
}

/// Returns the class and whether `a` is the earlier subject of the pair.
#[inline]
pub fn orient_pair(ta: f64, ea: bool, tb: f64, eb: bool, conv: Comparability) -> (PairClass, bool) {
    use PairClass::*;
    match (ea, eb) {
        (false, false) => (NotComparable, false),
        (true, true) => match ta.partial_cmp(&tb) {
            Some(Ordering::Less) => (EventEvent, true),
            Some(Ordering::Greater) => (EventEvent, false),
            _ => (NotComparable, false),
        },
        (true, false) => {
            if ta < tb || (ta == tb && conv.tied_event_censored) {
                (EventCensored, true)
            } else {
                (NotComparable, false)
            }
        }
        (false, true) => {
            if tb < ta || (ta == tb && conv.tied_event_censored) {
                (EventCensored, false)
            } else {
                (NotComparable, false)
            }
        }
    }
}

/// Concordant / discordant / tied pair counts per class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCounts {
    pub n_plus_ee: u64,
    pub n_minus_ee: u64,
    pub n_tie_ee: u64,
    pub n_plus_ec: u64,
    pub n_minus_ec: u64,
    pub n_tie_ec: u64,
    pub n_ee: u64,
    pub n_ec: u64,
}

impl PairCounts {
    pub fn comparable(&self) -> u64 {
        self.n_ee + self.n_ec
    }

    /// `2·N⁺_ee + N⁼_ee`: twice the half-credit numerator, kept integral.
    pub fn credit2_ee(&self) -> u64 {
        2 * self.n_plus_ee + self.n_tie_ee
    }

    pub fn credit2_ec(&self) -> u64 {
        2 * self.n_plus_ec + self.n_tie_ec
    }

    fn record(&mut self, class: PairClass, order: Ordering) {
        let (plus, minus, tie, total) = match class {
            PairClass::EventEvent => (
                &mut self.n_plus_ee,
                &mut self.n_minus_ee,
                &mut self.n_tie_ee,
                &mut self.n_ee,
            ),
            PairClass::EventCensored => (
                &mut self.n_plus_ec,
                &mut self.n_minus_ec,
                &mut self.n_tie_ec,
                &mut self.n_ec,
            ),
            PairClass::NotComparable => return,
        };
        *total += 1;
        match order {
            Ordering::Less => *plus += 1,
            Ordering::Greater => *minus += 1,
            Ordering::Equal => *tie += 1,
        }
    }
}

impl std::ops::Add for PairCounts {
    type Output = PairCounts;

    fn add(self, o: PairCounts) -> PairCounts {
        PairCounts {
            n_plus_ee: self.n_plus_ee + o.n_plus_ee,
            n_minus_ee: self.n_minus_ee + o.n_minus_ee,
            n_tie_ee: self.n_tie_ee + o.n_tie_ee,
            n_plus_ec: self.n_plus_ec + o.n_plus_ec,
            n_minus_ec: self.n_minus_ec + o.n_minus_ec,
            n_tie_ec: self.n_tie_ec + o.n_tie_ec,
            n_ee: self.n_ee + o.n_ee,
            n_ec: self.n_ec + o.n_ec,
        }
    }
}

fn check_inputs(data: &SurvivalDataset, pred: &[f64]) -> Result<()> {
    if pred.len() != data.len() {
        return Err(Error::LengthMismatch {
            expected: data.len(),
            actual: pred.len(),
        });
    }
    if let Some(i) = pred.iter().position(|p| p.is_nan()) {
        return Err(Error::NonFinite(format!("prediction {i} is NaN")));
    }
    Ok(())
}

fn cmp_pred(a: f64, b: f64) -> Ordering {
    // NaN is rejected up front; -0.0 == 0.0 counts as a tie
    a.partial_cmp(&b).expect("NaN prediction")
}

/// Brute-force count over all unordered pairs. O(n²).
pub fn count_pairs_exact(data: &SurvivalDataset, pred: &[f64], conv: Comparability) -> Result<PairCounts> {
    check_inputs(data, pred)?;
    let recs = &data.records;
    let mut counts = PairCounts::default();
    for i in 0..recs.len() {
        let (ti, ei) = (recs[i].time, recs[i].event);
        for j in i + 1..recs.len() {
            let (class, i_first) = orient_pair(ti, ei, recs[j].time, recs[j].event, conv);
            if class == PairClass::NotComparable {
                continue;
            }
            let order = if i_first {
                cmp_pred(pred[i], pred[j])
            } else {
                cmp_pred(pred[j], pred[i])
            };
            counts.record(class, order);
        }
    }
    if counts.comparable() == 0 {
        return Err(Error::NoComparablePairs);
    }
    Ok(counts)
}

/// Sort-and-sweep count, identical to [`count_pairs_exact`]. O(n log n).
///
/// Subjects are visited in decreasing time, one equal-time group at a time.
/// Two Fenwick trees over prediction ranks hold the events and the censored
/// subjects already visited; each event in the current group queries both.
/// Censored members of the current group enter their tree before the
/// queries when same-time event/censored pairs are comparable, and events
/// enter theirs only after, so same-time events never pair up.
pub fn count_pairs_fast(data: &SurvivalDataset, pred: &[f64], conv: Comparability) -> Result<PairCounts> {
    check_inputs(data, pred)?;
    let recs = &data.records;
    let n = recs.len();

    let mut levels: Vec<f64> = pred.to_vec();
    levels.sort_by(|a, b| cmp_pred(*a, *b));
    levels.dedup_by(|a, b| a == b);
    let rank: Vec<usize> = pred
        .iter()
        .map(|&p| {
            levels
                .binary_search_by(|l| cmp_pred(*l, p))
                .expect("prediction present in its own level set")
        })
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| recs[b].time.partial_cmp(&recs[a].time).expect("finite times"));

    let mut events = Fenwick::new(levels.len());
    let mut censored = Fenwick::new(levels.len());
    let mut counts = PairCounts::default();

    let mut start = 0;
    while start < n {
        let t = recs[order[start]].time;
        let mut end = start;
        while end < n && recs[order[end]].time == t {
            end += 1;
        }
        let group = &order[start..end];

        if conv.tied_event_censored {
            for &k in group.iter().filter(|&&k| !recs[k].event) {
                censored.add(rank[k], 1);
            }
        }
        for &k in group.iter().filter(|&&k| recs[k].event) {
            // later subjects with a larger prediction are concordant
            let (below, at, above) = events.split_at(rank[k]);
            counts.n_plus_ee += above;
            counts.n_minus_ee += below;
            counts.n_tie_ee += at;
            counts.n_ee += events.total();
            let (below, at, above) = censored.split_at(rank[k]);
            counts.n_plus_ec += above;
            counts.n_minus_ec += below;
            counts.n_tie_ec += at;
            counts.n_ec += censored.total();
        }
        for &k in group {
            if recs[k].event {
                events.add(rank[k], 1);
            } else if !conv.tied_event_censored {
                censored.add(rank[k], 1);
            }
        }
        start = end;
    }
    if counts.comparable() == 0 {
        return Err(Error::NoComparablePairs);
    }
    Ok(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairsMode {
    Exact,
    #[default]
    Fast,
}

impl std::str::FromStr for PairsMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(PairsMode::Exact),
            "fast" => Ok(PairsMode::Fast),
            other => Err(Error::InvalidArgument(format!("unknown pairs mode `{other}`"))),
        }
    }
}

pub fn count_pairs(
    data: &SurvivalDataset,
    pred: &[f64],
    mode: PairsMode,
    conv: Comparability,
) -> Result<PairCounts> {
    match mode {
        PairsMode::Exact => count_pairs_exact(data, pred, conv),
        PairsMode::Fast => count_pairs_fast(data, pred, conv),
    }
}

/// Only the comparable-pair totals; independent of any prediction.
pub fn comparable_totals(data: &SurvivalDataset, conv: Comparability) -> Result<(u64, u64)> {
    let zeros = vec![0.0; data.len()];
    let c = count_pairs_fast(data, &zeros, conv)?;
    Ok((c.n_ee, c.n_ec))
}

pub type Rational = Ratio<i128>;

/// The decomposition in exact rational arithmetic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalDecomposition {
    pub ci: Rational,
    pub ci_ee: Option<Rational>,
    pub ci_ec: Option<Rational>,
    pub alpha: Rational,
    pub alpha_star: Rational,
    pub alpha_deviation: Rational,
}

fn ratio_to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

impl RationalDecomposition {
    pub fn to_f64(&self) -> CIndexDecomposition {
        CIndexDecomposition {
            ci: ratio_to_f64(&self.ci),
            ci_ee: self.ci_ee.as_ref().map(ratio_to_f64),
            ci_ec: self.ci_ec.as_ref().map(ratio_to_f64),
            alpha: ratio_to_f64(&self.alpha),
            alpha_star: ratio_to_f64(&self.alpha_star),
            alpha_deviation: ratio_to_f64(&self.alpha_deviation),
        }
    }
}

/// One evaluation: CI, its two class-wise parts, and the weight α.
/// Class-wise indices are `None` when the class has no pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CIndexDecomposition {
    pub ci: f64,
    pub ci_ee: Option<f64>,
    pub ci_ec: Option<f64>,
    pub alpha: f64,
    pub alpha_star: f64,
    pub alpha_deviation: f64,
}

/// Exact decomposition from counts.
///
/// When both classes are present but no pair earns any credit, α is 0/0;
/// it is then set to α* so the deviation reads 0.
pub fn decompose_rational(counts: &PairCounts) -> Result<RationalDecomposition> {
    let total = counts.comparable();
    if total == 0 {
        return Err(Error::NoComparablePairs);
    }
    let r = |num: u64, den: u64| Rational::new(num as i128, den as i128);
    let credit_ee = counts.credit2_ee();
    let credit_ec = counts.credit2_ec();

    let ci = r(credit_ee + credit_ec, 2 * total);
    let ci_ee = (counts.n_ee > 0).then(|| r(credit_ee, 2 * counts.n_ee));
    let ci_ec = (counts.n_ec > 0).then(|| r(credit_ec, 2 * counts.n_ec));
    let alpha_star = r(counts.n_ee, total);
    let alpha = if counts.n_ec == 0 {
        Rational::from_integer(1)
    } else if counts.n_ee == 0 {
        Rational::from_integer(0)
    } else if credit_ee + credit_ec == 0 {
        alpha_star
    } else {
        r(credit_ee, credit_ee + credit_ec)
    };
    Ok(RationalDecomposition {
        ci,
        ci_ee,
        ci_ec,
        alpha,
        alpha_star,
        alpha_deviation: alpha - alpha_star,
    })
}

pub fn decompose(counts: &PairCounts) -> Result<CIndexDecomposition> {
    Ok(decompose_rational(counts)?.to_f64())
}

/// `|1/CI − α/CI_ee − (1−α)/CI_ec|`; errors when either class is empty or
/// has a zero index.
pub fn verify_identity(d: &CIndexDecomposition) -> Result<f64> {
    let ee = d.ci_ee.ok_or(Error::Degenerate("no event-event pairs"))?;
    let ec = d.ci_ec.ok_or(Error::Degenerate("no event-censored pairs"))?;
    if ee <= 0.0 || ec <= 0.0 {
        return Err(Error::Degenerate("zero class-wise C-index"));
    }
    Ok((1.0 / d.ci - d.alpha / ee - (1.0 - d.alpha) / ec).abs())
}

/// Counts and decomposes in one call.
pub fn evaluate(
    data: &SurvivalDataset,
    pred: &[f64],
    mode: PairsMode,
    conv: Comparability,
) -> Result<(PairCounts, CIndexDecomposition)> {
    let counts = count_pairs(data, pred, mode, conv)?;
    Ok((counts, decompose(&counts)?))
}

/// Harrell's C-index alone, default convention.
pub fn c_index(data: &SurvivalDataset, pred: &[f64]) -> Result<f64> {
    let counts = count_pairs_fast(data, pred, Comparability::default())?;
    Ok(decompose(&counts)?.ci)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked_example() -> (SurvivalDataset, Vec<f64>) {
        let data = SurvivalDataset::from_times(&[1.0, 2.0, 3.0, 1.5], &[true, true, false, false]).unwrap();
        (data, vec![1.0, 3.0, 2.0, 5.0])
    }

    fn rec(t: f64, e: bool) -> SurvivalRecord {
        SurvivalRecord::bare(t, e)
    }

    #[test]
    fn classification_cases() {
        assert_eq!(
            classify_pair(&rec(1.0, true), &rec(2.0, true)),
            PairClass::EventEvent
        );
        assert_eq!(
            classify_pair(&rec(1.0, true), &rec(3.0, false)),
            PairClass::EventCensored
        );
        assert_eq!(
            classify_pair(&rec(3.0, false), &rec(1.0, true)),
            PairClass::EventCensored
        );
        assert_eq!(
            classify_pair(&rec(2.0, true), &rec(1.5, false)),
            PairClass::NotComparable
        );
        assert_eq!(
            classify_pair(&rec(2.0, true), &rec(2.0, true)),
            PairClass::NotComparable
        );
        assert_eq!(
            classify_pair(&rec(1.0, false), &rec(2.0, false)),
            PairClass::NotComparable
        );
        assert_eq!(
            classify_pair(&rec(2.0, false), &rec(2.0, false)),
            PairClass::NotComparable
        );
        assert_eq!(
            classify_pair(&rec(2.0, true), &rec(2.0, false)),
            PairClass::EventCensored
        );
        let strict = Comparability {
            tied_event_censored: false,
        };
        assert_eq!(
            classify_pair_with(&rec(2.0, true), &rec(2.0, false), strict),
            PairClass::NotComparable
        );
    }

    #[test]
    fn worked_example_counts() {
        let (data, pred) = worked_example();
        let expected = PairCounts {
            n_plus_ee: 1,
            n_minus_ee: 0,
            n_tie_ee: 0,
            n_plus_ec: 2,
            n_minus_ec: 1,
            n_tie_ec: 0,
            n_ee: 1,
            n_ec: 3,
        };
        let conv = Comparability::default();
        assert_eq!(count_pairs_exact(&data, &pred, conv).unwrap(), expected);
        assert_eq!(count_pairs_fast(&data, &pred, conv).unwrap(), expected);
    }

    #[test]
    fn worked_example_decomposition() {
        let (data, pred) = worked_example();
        let counts = count_pairs_exact(&data, &pred, Comparability::default()).unwrap();
        let r = decompose_rational(&counts).unwrap();
        assert_eq!(r.ci, Rational::new(3, 4));
        assert_eq!(r.ci_ee, Some(Rational::from_integer(1)));
        assert_eq!(r.ci_ec, Some(Rational::new(2, 3)));
        assert_eq!(r.alpha, Rational::new(1, 3));
        assert_eq!(r.alpha_star, Rational::new(1, 4));
        assert_eq!(r.alpha_deviation, Rational::new(1, 12));
        let d = r.to_f64();
        assert_eq!(d.ci, 0.75);
        assert_eq!(d.alpha_deviation, 1.0 / 12.0);
        assert!(verify_identity(&d).unwrap() < 1e-15);
    }

    #[test]
    fn all_tied_predictions() {
        let (data, _) = worked_example();
        let pred = vec![2.0; 4];
        let c = count_pairs_fast(&data, &pred, Comparability::default()).unwrap();
        assert_eq!((c.n_tie_ee, c.n_tie_ec), (c.n_ee, c.n_ec));
        let d = decompose(&c).unwrap();
        assert_eq!((d.ci, d.ci_ee, d.ci_ec), (0.5, Some(0.5), Some(0.5)));
        assert_eq!(d.alpha, d.alpha_star);
        assert_eq!(d.alpha_deviation, 0.0);
    }

    #[test]
    fn perfect_predictor() {
        let (data, _) = worked_example();
        let pred = data.times();
        let c = count_pairs_fast(&data, &pred, Comparability::default()).unwrap();
        assert_eq!(c.n_plus_ee + c.n_plus_ec, c.comparable());
        let d = decompose(&c).unwrap();
        assert_eq!((d.ci, d.ci_ee, d.ci_ec), (1.0, Some(1.0), Some(1.0)));
        assert_eq!(d.alpha, d.alpha_star);
        assert_eq!(verify_identity(&d).unwrap(), 0.0);
    }

    #[test]
    fn no_comparable_pairs_is_error() {
        let data = SurvivalDataset::from_times(&[1.0, 2.0], &[false, false]).unwrap();
        assert!(matches!(
            count_pairs_exact(&data, &[1.0, 2.0], Comparability::default()),
            Err(Error::NoComparablePairs)
        ));
        assert!(matches!(
            count_pairs_fast(&data, &[1.0, 2.0], Comparability::default()),
            Err(Error::NoComparablePairs)
        ));
        assert!(decompose(&PairCounts::default()).is_err());
    }

    #[test]
    fn length_mismatch_and_nan() {
        let (data, _) = worked_example();
        assert!(matches!(
            count_pairs_fast(&data, &[1.0], Comparability::default()),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            count_pairs_exact(&data, &[1.0, f64::NAN, 2.0, 3.0], Comparability::default()),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn empty_classes() {
        // only event-censored pairs
        let data = SurvivalDataset::from_times(&[1.0, 2.0, 3.0], &[true, false, false]).unwrap();
        let d =
            decompose(&count_pairs_fast(&data, &[1.0, 2.0, 0.0], Comparability::default()).unwrap()).unwrap();
        assert_eq!(d.ci_ee, None);
        assert_eq!(d.ci_ec, Some(0.5));
        assert_eq!(d.alpha, 0.0);
        assert!(matches!(verify_identity(&d), Err(Error::Degenerate(_))));

        let data = SurvivalDataset::from_times(&[1.0, 2.0], &[true, true]).unwrap();
        let d = decompose(&count_pairs_fast(&data, &[1.0, 2.0], Comparability::default()).unwrap()).unwrap();
        assert_eq!((d.ci_ec, d.alpha, d.alpha_star), (None, 1.0, 1.0));
    }

    #[test]
    fn zero_credit_alpha_falls_back_to_alpha_star() {
        let counts = PairCounts {
            n_minus_ee: 1,
            n_minus_ec: 3,
            n_ee: 1,
            n_ec: 3,
            ..Default::default()
        };
        let d = decompose(&counts).unwrap();
        assert_eq!(d.ci, 0.0);
        assert_eq!(d.alpha, 0.25);
        assert_eq!(d.alpha_deviation, 0.0);
        assert!(verify_identity(&d).is_err());
    }

    #[test]
    fn signed_zero_predictions_tie() {
        let data = SurvivalDataset::from_times(&[1.0, 2.0], &[true, true]).unwrap();
        let pred = [0.0, -0.0];
        let conv = Comparability::default();
        let fast = count_pairs_fast(&data, &pred, conv).unwrap();
        assert_eq!(fast, count_pairs_exact(&data, &pred, conv).unwrap());
        assert_eq!(fast.n_tie_ee, 1);
    }
}
