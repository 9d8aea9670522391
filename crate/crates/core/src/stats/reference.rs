//! Reference condition summaries for the four-condition debugging study and
//! the pairwise cells printed beside them, with rounding-aware checks.
//!
//! Summaries are printed to two decimals, so every input is only known to
//! within ±0.005. A printed statistic is reproduced when its own rounding
//! interval overlaps the range the statistic takes over that input box.

use serde::Serialize;

use super::{pairwise_compare, GroupSummary, PairwiseResult};

pub const CONDITIONS: [&str; 4] = ["Control", "Stress", "CogLoad", "Combined"];
pub const N_PER_GROUP: usize = 30;
pub const HALF_UNIT: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Measure {
    Performance,
    Expertise,
    Time,
}

/// (mean, sd) per condition for performance, expertise and time.
const SUMMARY: [[(f64, f64); 3]; 4] = [
    [(0.90, 0.84), (4.46, 1.63), (284.13, 55.39)],
    [(2.93, 0.82), (4.13, 1.81), (202.07, 39.35)],
    [(3.93, 0.78), (4.46, 1.39), (169.32, 51.49)],
    [(4.33, 0.76), (5.00, 1.68), (140.29, 47.73)],
];

pub fn summaries(measure: Measure) -> Vec<GroupSummary> {
    let col = measure as usize;
    CONDITIONS
        .iter()
        .zip(SUMMARY)
        .map(|(label, row)| GroupSummary::new(*label, N_PER_GROUP, row[col].0, row[col].1))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrintedCell {
    pub a: usize,
    pub b: usize,
    pub f: f64,
    pub cd: f64,
}

const fn cell(a: usize, b: usize, f: f64, cd: f64) -> PrintedCell {
    PrintedCell { a, b, f, cd }
}

pub const TIME_CELLS: [PrintedCell; 6] = [
    cell(0, 1, 43.74, 1.74),
    cell(0, 2, 69.13, 2.18),
    cell(0, 3, 116.08, 2.83),
    cell(1, 2, 7.66, 0.73),
    cell(1, 3, 29.92, 1.44),
    cell(2, 3, 5.12, 0.59),
];

pub const PERFORMANCE_CELLS: [PrintedCell; 6] = [
    cell(0, 1, 88.66, 2.47),
    cell(0, 2, 138.01, 3.09),
    cell(0, 3, 277.58, 4.38),
    cell(1, 2, 23.05, 1.26),
    cell(1, 3, 48.52, 1.83),
    cell(2, 3, 4.69, 0.57),
];

/// The performance Control-CogLoad cell cannot come from the summaries.
pub const EXCLUDED: (Measure, usize, usize) = (Measure::Performance, 0, 2);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    /// Overlap with `printed ± HALF_UNIT`.
    pub fn admits_printed(&self, printed: f64) -> bool {
        printed + HALF_UNIT >= self.lo && printed - HALF_UNIT <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellCheck {
    pub measure: Measure,
    pub a: &'static str,
    pub b: &'static str,
    pub printed: PrintedCell,
    pub computed: PairwiseResult,
    pub f_range: Interval,
    pub cd_range: Interval,
    pub d_range: Interval,
    pub excluded: bool,
}

impl CellCheck {
    pub fn f_ok(&self) -> bool {
        self.f_range.admits_printed(self.printed.f)
    }

    pub fn cd_ok(&self) -> bool {
        self.cd_range.admits_printed(self.printed.cd)
    }
}

/// Range of `stat` over all 16 corners of the rounding box. Each statistic
/// used here is monotone in every input while the means stay ordered.
fn corner_range(a: &GroupSummary, b: &GroupSummary, stat: impl Fn(&PairwiseResult) -> f64) -> Interval {
    let mut out = Interval {
        lo: f64::INFINITY,
        hi: f64::NEG_INFINITY,
    };
    for mask in 0..16u32 {
        let bump = |bit: u32| if mask & (1 << bit) != 0 { HALF_UNIT } else { -HALF_UNIT };
        let ga = GroupSummary::new(&a.label, a.n, a.mean + bump(0), a.sd + bump(1));
        let gb = GroupSummary::new(&b.label, b.n, b.mean + bump(2), b.sd + bump(3));
        if let Ok(r) = pairwise_compare(&ga, &gb, 1) {
            let v = stat(&r);
            out.lo = out.lo.min(v);
            out.hi = out.hi.max(v);
        }
    }
    out
}

pub fn printed_cells(measure: Measure) -> &'static [PrintedCell] {
    match measure {
        Measure::Time => &TIME_CELLS,
        Measure::Performance => &PERFORMANCE_CELLS,
        Measure::Expertise => &[],
    }
}

pub fn check_cells(measure: Measure) -> Vec<CellCheck> {
    let groups = summaries(measure);
    printed_cells(measure)
        .iter()
        .map(|&printed| {
            let (a, b) = (&groups[printed.a], &groups[printed.b]);
            CellCheck {
                measure,
                a: CONDITIONS[printed.a],
                b: CONDITIONS[printed.b],
                printed,
                computed: pairwise_compare(a, b, 6).expect("reference summaries are well formed"),
                f_range: corner_range(a, b, |r| r.f),
                cd_range: corner_range(a, b, |r| r.cd_t),
                d_range: corner_range(a, b, |r| r.cohen_d),
                excluded: (measure, printed.a, printed.b) == EXCLUDED,
            }
        })
        .collect()
}

/// Describes the excluded cell against what the summaries imply.
pub fn discrepancy_report() -> String {
    let (measure, ia, ib) = EXCLUDED;
    let check = check_cells(measure)
        .into_iter()
        .find(|c| c.printed.a == ia && c.printed.b == ib)
        .expect("excluded cell is listed");
    format!(
        "{measure:?} {}-{}: printed F[1,{}] = {:.2}, CD = {:.2}; the condition summaries imply F = {:.2} \
         (rounding range {:.2}..{:.2}), pooled d = {:.2}, 2t/sqrt(df) = {:.2}. The printed cell is inconsistent \
         with the summaries and is reported, not reproduced.",
        check.a,
        check.b,
        check.computed.df2,
        check.printed.f,
        check.printed.cd,
        check.computed.f,
        check.f_range.lo,
        check.f_range.hi,
        check.computed.cohen_d,
        check.computed.cd_t,
    )
}
