//! Two-group cohort comparisons: Pearson chi-squared for proportions and the
//! Wilcoxon rank-sum test for continuous variables.

use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_ur;

use crate::data::{Column, ColumnKind, DataTable};
use crate::error::{Error, Result};
use crate::evaluation::average_ranks;

/// p-values below this are flagged significant.
pub const SIGNIFICANCE_LEVEL: f64 = 0.001;

/// Upper tail of the chi-square distribution, `Q(df / 2, x / 2)`.
pub fn chi2_sf(x: f64, df: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_ur(df as f64 / 2.0, x / 2.0).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Pearson chi-squared test of independence on an r x c table of counts,
/// without continuity correction.
pub fn chi2_contingency(counts: &[Vec<u64>]) -> Result<ChiSquare> {
    let rows = counts.len();
    let cols = counts.first().map_or(0, Vec::len);
    if rows < 2 || cols < 2 || counts.iter().any(|r| r.len() != cols) {
        return Err(Error::invalid("contingency table must be at least 2x2 and rectangular"));
    }
    let row_tot: Vec<f64> = counts.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let col_tot: Vec<f64> = (0..cols)
        .map(|j| counts.iter().map(|r| r[j]).sum::<u64>() as f64)
        .collect();
    if row_tot.iter().chain(&col_tot).any(|&t| t == 0.0) {
        return Err(Error::Numeric("degenerate table: a row or column total is zero".into()));
    }
    let total: f64 = row_tot.iter().sum();
    let mut stat = 0.0;
    for (i, row) in counts.iter().enumerate() {
        for (j, &obs) in row.iter().enumerate() {
            let expected = row_tot[i] * col_tot[j] / total;
            let d = obs as f64 - expected;
            stat += d * d / expected;
        }
    }
    let df = (rows - 1) * (cols - 1);
    Ok(ChiSquare {
        statistic: stat,
        df,
        p_value: chi2_sf(stat, df),
    })
}

/// 2x2 chi-squared test; returns (statistic, p-value).
pub fn chi2_2x2(counts: [[u64; 2]; 2]) -> Result<(f64, f64)> {
    let table: Vec<Vec<u64>> = counts.iter().map(|r| r.to_vec()).collect();
    let res = chi2_contingency(&table)?;
    Ok((res.statistic, res.p_value))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankSum {
    /// Number of (a, b) pairs with a > b, ties counting one half.
    pub u: f64,
    pub z: f64,
    pub p_value: f64,
}

/// Two-sided Wilcoxon rank-sum (Mann-Whitney) test with tie-corrected
/// variance and a continuity correction.
pub fn rank_sum(a: &[f64], b: &[f64]) -> Result<RankSum> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("rank-sum test needs at least one value per group"));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::invalid("rank-sum test input contains NaN"));
    }
    let mut pooled = a.to_vec();
    pooled.extend_from_slice(b);
    let ranks = average_ranks(&pooled);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let n = na + nb;
    let rank_a: f64 = ranks[..a.len()].iter().sum();
    let u = rank_a - na * (na + 1.0) / 2.0;
    let mean = na * nb / 2.0;

    let mut sorted = pooled;
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let var = na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var <= 0.0 || !var.is_finite() {
        // every value identical
        return Ok(RankSum {
            u,
            z: 0.0,
            p_value: 1.0,
        });
    }
    let diff = ((u - mean).abs() - 0.5).max(0.0);
    let z = diff / var.sqrt() * (u - mean).signum();
    let p = erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0);
    Ok(RankSum { u, z, p_value: p })
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::invalid("spearman needs two equal-length samples of size >= 2"));
    }
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Ok(0.0);
    }
    Ok(sab / (saa * sbb).sqrt())
}

// ---------------------------------------------------------------------------
// Cohort table

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    ChiSquared,
    RankSum,
}

impl TestKind {
    pub fn name(self) -> &'static str {
        match self {
            TestKind::ChiSquared => "chi-squared",
            TestKind::RankSum => "rank-sum",
        }
    }
}

/// One row of a two-group characteristics table. Categorical variables get
/// one row per level, all sharing the variable's test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub characteristic: String,
    pub level: Option<String>,
    /// "count (percent%)" or "mean/median" for group 0.
    pub group0: String,
    pub group1: String,
    pub test: TestKind,
    pub statistic: f64,
    pub p_value: f64,
    pub significant: bool,
}

fn count_pct(count: usize, total: usize) -> String {
    let pct = if total == 0 {
        0.0
    } else {
        100.0 * count as f64 / total as f64
    };
    format!("{count} ({pct:.1}%)")
}

fn mean_median(values: &[f64]) -> String {
    if values.is_empty() {
        return "-".to_owned();
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    let median = if s.len().is_multiple_of(2) {
        (s[m - 1] + s[m]) / 2.0
    } else {
        s[m]
    };
    format!("{mean:.2}/{median:.2}")
}

fn chi2_or_degenerate(counts: &[Vec<u64>]) -> (f64, f64) {
    match chi2_contingency(counts) {
        Ok(r) => (r.statistic, r.p_value),
        Err(_) => (0.0, 1.0),
    }
}

/// Compares the two groups of a binary `group` column on each requested
/// characteristic, in the order given. MISSING cells are left out.
pub fn cohort_table(
    table: &DataTable,
    group: &str,
    characteristics: &[String],
) -> Result<Vec<GroupComparison>> {
    let g_idx = table
        .schema()
        .index_of(group)
        .ok_or_else(|| Error::invalid(format!("unknown group column '{group}'")))?;
    let g_spec = &table.schema().columns()[g_idx];
    let groups: Vec<Option<usize>> = match table.column(g_idx) {
        Column::Numeric(v) if g_spec.kind == ColumnKind::Binary => {
            v.iter().map(|c| c.map(|x| usize::from(x == 1.0))).collect()
        }
        _ => return Err(Error::invalid(format!("group column '{group}' must be binary"))),
    };
    let mut out = Vec::new();
    for name in characteristics {
        let idx = table
            .schema()
            .index_of(name)
            .ok_or_else(|| Error::invalid(format!("unknown characteristic '{name}'")))?;
        let kind = table.schema().columns()[idx].kind;
        match (table.column(idx), kind) {
            (Column::Numeric(values), ColumnKind::Continuous) => {
                let mut split: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
                for (v, g) in values.iter().zip(&groups) {
                    if let (Some(v), Some(g)) = (v, g) {
                        split[*g].push(*v);
                    }
                }
                let rs = rank_sum(&split[1], &split[0])?;
                out.push(GroupComparison {
                    characteristic: name.clone(),
                    level: None,
                    group0: mean_median(&split[0]),
                    group1: mean_median(&split[1]),
                    test: TestKind::RankSum,
                    statistic: rs.u,
                    p_value: rs.p_value,
                    significant: rs.p_value < SIGNIFICANCE_LEVEL,
                });
            }
            (Column::Numeric(values), _) => {
                // binary: rows are value 1 / value 0, columns are groups
                let mut counts = vec![vec![0u64; 2]; 2];
                for (v, g) in values.iter().zip(&groups) {
                    if let (Some(v), Some(g)) = (v, g) {
                        counts[usize::from(*v != 1.0)][*g] += 1;
                    }
                }
                let (stat, p) = chi2_or_degenerate(&counts);
                let totals = [counts[0][0] + counts[1][0], counts[0][1] + counts[1][1]];
                out.push(GroupComparison {
                    characteristic: name.clone(),
                    level: Some("1".to_owned()),
                    group0: count_pct(counts[0][0] as usize, totals[0] as usize),
                    group1: count_pct(counts[0][1] as usize, totals[1] as usize),
                    test: TestKind::ChiSquared,
                    statistic: stat,
                    p_value: p,
                    significant: p < SIGNIFICANCE_LEVEL,
                });
            }
            (Column::Text(values), _) => {
                let mut levels: Vec<&str> = values.iter().flatten().map(String::as_str).collect();
                levels.sort_unstable();
                levels.dedup();
                let mut counts = vec![vec![0u64; 2]; levels.len()];
                for (v, g) in values.iter().zip(&groups) {
                    if let (Some(v), Some(g)) = (v, g) {
                        let l = levels.binary_search(&v.as_str()).expect("level listed");
                        counts[l][*g] += 1;
                    }
                }
                let (stat, p) = if levels.len() < 2 {
                    (0.0, 1.0)
                } else {
                    chi2_or_degenerate(&counts)
                };
                let totals: [u64; 2] = [
                    counts.iter().map(|c| c[0]).sum(),
                    counts.iter().map(|c| c[1]).sum(),
                ];
                for (l, level) in levels.iter().enumerate() {
                    out.push(GroupComparison {
                        characteristic: name.clone(),
                        level: Some((*level).to_owned()),
                        group0: count_pct(counts[l][0] as usize, totals[0] as usize),
                        group1: count_pct(counts[l][1] as usize, totals[1] as usize),
                        test: TestKind::ChiSquared,
                        statistic: stat,
                        p_value: p,
                        significant: p < SIGNIFICANCE_LEVEL,
                    });
                }
            }
        }
    }
    Ok(out)
}

const COHORT_HEADER: [&str; 7] = [
    "characteristic",
    "group_0",
    "group_1",
    "test",
    "statistic",
    "p_value",
    "significant",
];

fn cohort_cells(r: &GroupComparison) -> [String; 7] {
    let label = match &r.level {
        Some(l) => format!("{}={l}", r.characteristic),
        None => r.characteristic.clone(),
    };
    [
        label,
        r.group0.clone(),
        r.group1.clone(),
        r.test.name().to_owned(),
        format!("{:.4}", r.statistic),
        format!("{:.3e}", r.p_value),
        if r.significant { "yes" } else { "no" }.to_owned(),
    ]
}

pub fn write_cohort_csv<W: Write>(rows: &[GroupComparison], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(COHORT_HEADER)?;
    for r in rows {
        w.write_record(cohort_cells(r))?;
    }
    w.flush().map_err(|e| Error::io("<cohort csv>", e))
}

/// Column-aligned plain-text rendering.
pub fn format_cohort_text(rows: &[GroupComparison]) -> String {
    let cells: Vec<[String; 7]> = rows.iter().map(cohort_cells).collect();
    let mut widths = COHORT_HEADER.map(str::len);
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |fields: &[String]| {
        let parts: Vec<String> = fields
            .iter()
            .zip(&widths)
            .map(|(f, w)| format!("{f:<w$}"))
            .collect();
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(&COHORT_HEADER.map(str::to_owned));
    for row in &cells {
        line(row);
    }
    out
}
