//! Cohort analysis over per-session metrics.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{
    anova_oneway, describe, levene, pairwise_compare, pearson, welch_t, AnovaResult, CorrResult, GroupSummary,
    PairwiseResult, StatsError, WelchResult,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRow {
    pub condition: String,
    pub expertise: f64,
    pub bugs_resolved: f64,
    pub avg_time_per_bug: Option<f64>,
    pub feedback_count: f64,
}

pub fn read_rows_csv<R: Read>(source: R) -> Result<Vec<SessionRow>, StatsError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = rdr.headers().map_err(|e| StatsError::Input(e.to_string()))?.clone();
    for need in ["condition", "expertise", "bugs_resolved", "avg_time_per_bug", "feedback_count"] {
        if !headers.iter().any(|h| h == need) {
            return Err(StatsError::Input(format!("missing column `{need}`")));
        }
    }
    rdr.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| StatsError::Input(format!("row {}: {e}", i + 2))))
        .collect()
}

pub fn write_rows_csv(rows: &[SessionRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Performance,
    Time,
    Expertise,
    FeedbackCount,
}

impl Outcome {
    fn of(self, r: &SessionRow) -> Option<f64> {
        match self {
            Outcome::Performance => Some(r.bugs_resolved),
            Outcome::Time => r.avg_time_per_bug,
            Outcome::Expertise => Some(r.expertise),
            Outcome::FeedbackCount => Some(r.feedback_count),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Outcome::Performance => "performance",
            Outcome::Time => "time",
            Outcome::Expertise => "expertise",
            Outcome::FeedbackCount => "feedback_count",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PairRow {
    pub a: String,
    pub b: String,
    pub result: PairwiseResult,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrRow {
    pub condition: String,
    pub n: usize,
    pub performance: Option<CorrResult>,
    pub time: Option<CorrResult>,
}

#[derive(Debug, Clone, Serialize)]
pub struct WelchRow {
    pub a: String,
    pub b: String,
    pub result: WelchResult,
}

#[derive(Debug, Clone, Serialize)]
pub struct CohortReport {
    pub conditions: Vec<String>,
    pub descriptives: BTreeMap<&'static str, Vec<GroupSummary>>,
    pub anova: BTreeMap<&'static str, Result<AnovaResult, String>>,
    pub levene: BTreeMap<&'static str, Result<AnovaResult, String>>,
    pub pairwise: BTreeMap<&'static str, Vec<PairRow>>,
    pub correlations: Vec<CorrRow>,
    pub overall: Vec<(String, Option<CorrResult>)>,
    pub feedback_welch: Vec<WelchRow>,
}

const ORDER: [&str; 4] = ["control", "stress", "cognitive", "combined"];

fn condition_order(a: &str, b: &str) -> std::cmp::Ordering {
    let rank = |c: &str| ORDER.iter().position(|o| o.eq_ignore_ascii_case(c)).unwrap_or(ORDER.len());
    (rank(a), a).cmp(&(rank(b), b))
}

fn grouped(rows: &[SessionRow], conditions: &[String], outcome: Outcome) -> Vec<(String, Vec<f64>)> {
    conditions
        .iter()
        .map(|c| {
            let xs = rows.iter().filter(|r| &r.condition == c).filter_map(|r| outcome.of(r)).collect();
            (c.clone(), xs)
        })
        .collect()
}

fn paired(rows: &[&SessionRow], outcome: Outcome) -> (Vec<f64>, Vec<f64>) {
    rows.iter().filter_map(|r| outcome.of(r).map(|v| (r.expertise, v))).unzip()
}

pub fn analyze_sessions(rows: &[SessionRow]) -> Result<CohortReport, StatsError> {
    if rows.is_empty() {
        return Err(StatsError::Input("no sessions".into()));
    }
    let mut conditions: Vec<String> = rows.iter().map(|r| r.condition.clone()).collect();
    conditions.sort_by(|a, b| condition_order(a, b));
    conditions.dedup();

    let mut report = CohortReport {
        conditions: conditions.clone(),
        descriptives: BTreeMap::new(),
        anova: BTreeMap::new(),
        levene: BTreeMap::new(),
        pairwise: BTreeMap::new(),
        correlations: Vec::new(),
        overall: Vec::new(),
        feedback_welch: Vec::new(),
    };

    for outcome in [Outcome::Performance, Outcome::Time, Outcome::Expertise, Outcome::FeedbackCount] {
        let groups = grouped(rows, &conditions, outcome);
        let usable: Vec<_> = groups.iter().filter(|(_, xs)| xs.len() >= 2).cloned().collect();
        let summaries = describe(&usable)?;
        report.anova.insert(outcome.name(), anova_oneway(&usable).map_err(|e| e.to_string()));
        report.levene.insert(outcome.name(), levene(&usable).map_err(|e| e.to_string()));
        if matches!(outcome, Outcome::Performance | Outcome::Time) {
            let m = summaries.len() * summaries.len().saturating_sub(1) / 2;
            let mut pairs = Vec::new();
            for i in 0..summaries.len() {
                for j in i + 1..summaries.len() {
                    if let Ok(result) = pairwise_compare(&summaries[i], &summaries[j], m.max(1)) {
                        pairs.push(PairRow {
                            a: summaries[i].label.clone(),
                            b: summaries[j].label.clone(),
                            result,
                        });
                    }
                }
            }
            report.pairwise.insert(outcome.name(), pairs);
        }
        report.descriptives.insert(outcome.name(), summaries);
    }

    for c in &conditions {
        let members: Vec<&SessionRow> = rows.iter().filter(|r| &r.condition == c).collect();
        let (xp, perf) = paired(&members, Outcome::Performance);
        let (xt, time) = paired(&members, Outcome::Time);
        report.correlations.push(CorrRow {
            condition: c.clone(),
            n: members.len(),
            performance: pearson(&xp, &perf).ok(),
            time: pearson(&xt, &time).ok(),
        });
    }
    let all: Vec<&SessionRow> = rows.iter().collect();
    for outcome in [Outcome::Performance, Outcome::Time] {
        let (x, y) = paired(&all, outcome);
        report.overall.push((outcome.name().to_string(), pearson(&x, &y).ok()));
    }

    let feedback = report.descriptives[Outcome::FeedbackCount.name()]
        .iter()
        .filter(|g| !g.label.eq_ignore_ascii_case("control"))
        .cloned()
        .collect::<Vec<_>>();
    for i in 0..feedback.len() {
        for j in i + 1..feedback.len() {
            if let Ok(result) = welch_t(&feedback[i], &feedback[j]) {
                report.feedback_welch.push(WelchRow {
                    a: feedback[i].label.clone(),
                    b: feedback[j].label.clone(),
                    result,
                });
            }
        }
    }
    Ok(report)
}

fn sig(p: f64) -> &'static str {
    if p < 0.05 {
        "p < .05"
    } else {
        "p > .05"
    }
}

fn fmt_corr(c: &Option<CorrResult>) -> String {
    match c {
        Some(c) => format!("{:>6.2} ({})", c.r, sig(c.p)),
        None => format!("{:>14}", "n/a"),
    }
}

impl CohortReport {
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "Descriptives (mean / sd, n)");
        for (name, groups) in &self.descriptives {
            let _ = writeln!(s, "  {name}");
            for g in groups {
                let _ = writeln!(s, "    {:<12} {:>10.2} {:>10.2} {:>4}", g.label, g.mean, g.sd, g.n);
            }
        }
        let _ = writeln!(s, "\nOne-way ANOVA");
        for (name, r) in &self.anova {
            match r {
                Ok(a) => {
                    let _ = writeln!(
                        s,
                        "  {name:<15} F[{},{}] = {:.2}, p = {:.4}, eta2 = {:.3}",
                        a.df1, a.df2, a.f, a.p, a.eta2
                    );
                }
                Err(e) => {
                    let _ = writeln!(s, "  {name:<15} {e}");
                }
            }
        }
        let _ = writeln!(s, "\nLevene");
        for (name, r) in &self.levene {
            match r {
                Ok(a) => {
                    let _ = writeln!(s, "  {name:<15} F[{},{}] = {:.2}, p = {:.4}", a.df1, a.df2, a.f, a.p);
                }
                Err(e) => {
                    let _ = writeln!(s, "  {name:<15} {e}");
                }
            }
        }
        for (name, pairs) in &self.pairwise {
            let _ = writeln!(s, "\nPairwise ({name}, Bonferroni)");
            for p in pairs {
                let r = &p.result;
                let _ = writeln!(
                    s,
                    "  {:<10} vs {:<10} F[1,{}] = {:>7.2}, p = {:.4}, p_bonf = {:.4}, d = {:.2}, CD = {:.2}",
                    p.a, p.b, r.df2, r.f, r.p_raw, r.p_bonferroni, r.cohen_d, r.cd_t
                );
            }
        }
        let _ = writeln!(s, "\nExpertise correlations (r)");
        let _ = writeln!(s, "  {:<12} {:>4} {:>16} {:>16}", "condition", "n", "performance", "time");
        for c in &self.correlations {
            let _ = writeln!(
                s,
                "  {:<12} {:>4} {:>16} {:>16}",
                c.condition,
                c.n,
                fmt_corr(&c.performance),
                fmt_corr(&c.time)
            );
        }
        for (name, c) in &self.overall {
            if let Some(c) = c {
                let _ = writeln!(s, "  all, {name}: r({}) = {:.2}, {}", c.df, c.r, sig(c.p));
            }
        }
        let _ = writeln!(s, "\nFeedback count (Welch)");
        for w in &self.feedback_welch {
            let r = &w.result;
            let _ = writeln!(s, "  {} vs {}: t({:.2}) = {:.2}, {}", w.a, w.b, r.df, r.t, sig(r.p));
        }
        s
    }

    /// Long-format rows: `section,outcome,a,b,statistic,value`.
    pub fn render_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut put = |section: &str, outcome: &str, a: &str, b: &str, stat: &str, v: f64| {
            w.write_record([section, outcome, a, b, stat, &v.to_string()]).expect("in-memory csv write");
        };
        put("header", "", "", "", "sessions", self.descriptives.values().next().map_or(0, |g| g.iter().map(|x| x.n).sum::<usize>()) as f64);
        for (name, groups) in &self.descriptives {
            for g in groups {
                put("descriptive", name, &g.label, "", "n", g.n as f64);
                put("descriptive", name, &g.label, "", "mean", g.mean);
                put("descriptive", name, &g.label, "", "sd", g.sd);
            }
        }
        for (section, map) in [("anova", &self.anova), ("levene", &self.levene)] {
            for (name, r) in map {
                if let Ok(a) = r {
                    for (stat, v) in [("F", a.f), ("df1", a.df1), ("df2", a.df2), ("p", a.p), ("eta2", a.eta2)] {
                        put(section, name, "", "", stat, v);
                    }
                }
            }
        }
        for (name, pairs) in &self.pairwise {
            for p in pairs {
                let r = &p.result;
                for (stat, v) in [
                    ("F", r.f),
                    ("p", r.p_raw),
                    ("p_bonferroni", r.p_bonferroni),
                    ("cohen_d", r.cohen_d),
                    ("cd", r.cd_t),
                ] {
                    put("pairwise", name, &p.a, &p.b, stat, v);
                }
            }
        }
        for c in &self.correlations {
            for (name, r) in [("performance", &c.performance), ("time", &c.time)] {
                if let Some(r) = r {
                    put("pearson", name, &c.condition, "expertise", "r", r.r);
                    put("pearson", name, &c.condition, "expertise", "p", r.p);
                }
            }
        }
        for (name, r) in &self.overall {
            if let Some(r) = r {
                put("pearson", name, "all", "expertise", "r", r.r);
                put("pearson", name, "all", "expertise", "p", r.p);
            }
        }
        for wr in &self.feedback_welch {
            for (stat, v) in [("t", wr.result.t), ("df", wr.result.df), ("p", wr.result.p)] {
                put("welch", "feedback_count", &wr.a, &wr.b, stat, v);
            }
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }
}
