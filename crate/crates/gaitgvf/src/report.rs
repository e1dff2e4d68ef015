//! CSV artifacts and the star-annotated summary.
//!
//! Every file is written to a temporary sibling and renamed into place, so
//! readers never observe a half-written artifact.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use gaitgvf_core::pipeline::Confusion;
use gaitgvf_core::stats::{dunn_holm_sidak, kruskal_wallis, stars};
use gaitgvf_core::{NetVariant, RunMetrics, TerrainLabel, N_TERRAINS};

use crate::error::{Error, Result};

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One (seed, variant) run, as stored in `per_terrain.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub variant: NetVariant,
    pub final_accuracy: f64,
    pub overall_accuracy: f64,
    pub per_terrain: [Option<f64>; N_TERRAINS],
}

impl RunRecord {
    pub fn from_metrics(seed: u64, metrics: &RunMetrics) -> Vec<RunRecord> {
        metrics
            .variants
            .iter()
            .map(|m| RunRecord {
                seed,
                variant: m.variant,
                final_accuracy: m.final_accuracy,
                overall_accuracy: m.overall_accuracy,
                per_terrain: m.per_terrain,
            })
            .collect()
    }
}

/// Everything one seed produced.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub metrics: RunMetrics,
}

pub fn convergence_csv(runs: &[SeedRun]) -> String {
    let mut s = String::from("step,variant,seed,windowed_accuracy\n");
    for run in runs {
        for m in &run.metrics.variants {
            for p in &m.curve {
                writeln!(s, "{},{},{},{}", p.step, m.variant.key(), run.seed, p.accuracy).unwrap();
            }
        }
    }
    s
}

/// Rows are correct labels, columns predicted labels.
pub fn confusion_csv(confusion: &Confusion) -> String {
    let mut s = String::from("correct");
    for t in TerrainLabel::ALL {
        write!(s, ",{}", t.name()).unwrap();
    }
    s.push('\n');
    for t in TerrainLabel::ALL {
        s.push_str(t.name());
        for count in confusion[t.index()] {
            write!(s, ",{count}").unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn per_terrain_header() -> String {
    let mut s = String::from("variant,seed,final_accuracy,overall_accuracy");
    for t in TerrainLabel::ALL {
        write!(s, ",{}", t.name()).unwrap();
    }
    s
}

pub fn per_terrain_csv(records: &[RunRecord]) -> String {
    let mut s = per_terrain_header();
    s.push('\n');
    for r in records {
        write!(s, "{},{},{},{}", r.variant.key(), r.seed, r.final_accuracy, r.overall_accuracy).unwrap();
        for a in r.per_terrain {
            write!(s, ",{}", opt(a)).unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn gvf_error_csv(runs: &[SeedRun]) -> String {
    let mut s = String::from("seed,channel,return_mse\n");
    for run in runs {
        for (c, e) in run.metrics.gvf_error.iter().enumerate() {
            writeln!(s, "{},{c},{e}", run.seed).unwrap();
        }
    }
    s
}

/// Parses `per_terrain.csv`. Errors carry 1-based line numbers.
pub fn read_per_terrain(path: &Path) -> Result<Vec<RunRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(per_terrain_header().as_str()) {
        return Err(Error::corrupt(path, 1, "unexpected header"));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i as u64 + 2;
        let bad = |what: &str| Error::corrupt(path, line_no, what.to_string());
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 + N_TERRAINS {
            return Err(bad(&format!("expected {} fields, found {}", 4 + N_TERRAINS, f.len())));
        }
        let unit = |s: &str| s.parse::<f64>().ok().filter(|v| (0.0..=1.0).contains(v));
        let variant = NetVariant::from_key(f[0]).ok_or_else(|| bad("unknown variant"))?;
        let seed = f[1].parse().map_err(|_| bad("bad seed"))?;
        let final_accuracy = unit(f[2]).ok_or_else(|| bad("bad final accuracy"))?;
        let overall_accuracy = unit(f[3]).ok_or_else(|| bad("bad overall accuracy"))?;
        let mut per_terrain = [None; N_TERRAINS];
        for (slot, field) in per_terrain.iter_mut().zip(&f[4..]) {
            if !field.is_empty() {
                *slot = Some(unit(field).ok_or_else(|| bad("bad terrain accuracy"))?);
            }
        }
        out.push(RunRecord { seed, variant, final_accuracy, overall_accuracy, per_terrain });
    }
    Ok(out)
}

/// Omnibus and post-hoc results over the three variants.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub alpha: f64,
    pub variants: Vec<NetVariant>,
    /// Final accuracies per variant, in seed order.
    pub final_accuracy: Vec<Vec<f64>>,
    pub kruskal: gaitgvf_core::stats::KruskalWallis,
    pub pairwise: Vec<gaitgvf_core::stats::PairwiseResult>,
    pub terrains: Vec<TerrainSummary>,
}

#[derive(Debug, Clone)]
pub struct TerrainSummary {
    pub terrain: TerrainLabel,
    pub variant: NetVariant,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub n: usize,
    /// Adjusted Dunn p against the control net.
    pub p_vs_control: Option<f64>,
}

fn mean_sd(v: &[f64]) -> (Option<f64>, Option<f64>) {
    if v.is_empty() {
        return (None, None);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.len() > 1).then(|| (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (Some(mean), sd)
}

fn p_vs_control(groups: &[Vec<f64>], alpha: f64) -> Vec<Option<f64>> {
    let mut out = vec![None; groups.len()];
    if groups.iter().any(|g| g.len() < 2) {
        return out;
    }
    let refs: Vec<&[f64]> = groups.iter().map(Vec::as_slice).collect();
    if let Ok(pairs) = dunn_holm_sidak(&refs, alpha) {
        for p in pairs.iter().filter(|p| p.first == 0) {
            out[p.second] = Some(p.p_adjusted);
        }
    }
    out
}

impl Comparison {
    /// Requires every variant to appear for the same set of seeds.
    pub fn from_records(records: &[RunRecord], alpha: f64) -> Result<Self> {
        let variants = NetVariant::ALL.to_vec();
        let mut seeds: Vec<u64> = records.iter().map(|r| r.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        let mut table: Vec<Vec<&RunRecord>> = Vec::new();
        for v in &variants {
            let mut rows: Vec<&RunRecord> = records.iter().filter(|r| r.variant == *v).collect();
            rows.sort_by_key(|r| r.seed);
            if rows.iter().map(|r| r.seed).collect::<Vec<_>>() != seeds {
                return Err(Error::invalid(format!("variant {} is missing runs or has duplicate seeds", v.key())));
            }
            table.push(rows);
        }
        if seeds.len() < 3 {
            return Err(Error::invalid(format!("comparison needs at least 3 seeds, found {}", seeds.len())));
        }
        let final_accuracy: Vec<Vec<f64>> =
            table.iter().map(|rows| rows.iter().map(|r| r.final_accuracy).collect()).collect();
        let refs: Vec<&[f64]> = final_accuracy.iter().map(Vec::as_slice).collect();
        let kruskal = kruskal_wallis(&refs)?;
        let pairwise = dunn_holm_sidak(&refs, alpha)?;

        let mut terrains = Vec::new();
        for (vi, v) in variants.iter().enumerate() {
            for t in TerrainLabel::ALL {
                let groups: Vec<Vec<f64>> =
                    table.iter().map(|rows| rows.iter().filter_map(|r| r.per_terrain[t.index()]).collect()).collect();
                let (mean, sd) = mean_sd(&groups[vi]);
                terrains.push(TerrainSummary {
                    terrain: t,
                    variant: *v,
                    mean,
                    sd,
                    n: groups[vi].len(),
                    p_vs_control: p_vs_control(&groups, alpha)[vi],
                });
            }
        }
        Ok(Comparison { alpha, variants, final_accuracy, kruskal, pairwise, terrains })
    }

    pub fn stats_report_csv(&self) -> String {
        let mut s = String::from("test,pair,statistic,raw_p,adjusted_p,significant\n");
        let k = &self.kruskal;
        let all = self.variants.iter().map(|v| v.key()).collect::<Vec<_>>().join("|");
        writeln!(s, "kruskal_wallis,{all},{},{},{},{}", k.h, k.p_value, k.p_value, k.p_value < self.alpha).unwrap();
        for p in &self.pairwise {
            let pair = format!("{}|{}", self.variants[p.first].key(), self.variants[p.second].key());
            writeln!(s, "dunn_holm_sidak,{pair},{},{},{},{}", p.z, p.p_raw, p.p_adjusted, p.significant).unwrap();
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("variant,terrain,mean_accuracy,sd,n,p_vs_control,stars\n");
        for r in &self.terrains {
            writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.variant.key(),
                r.terrain.name(),
                opt(r.mean),
                opt(r.sd),
                r.n,
                opt(r.p_vs_control),
                r.p_vs_control.map(stars).unwrap_or("")
            )
            .unwrap();
        }
        s
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        let n = self.final_accuracy[0].len();
        writeln!(s, "Final accuracy over {n} sessions (last 10% of frames), mean ± sd").unwrap();
        let control = self.variants.iter().position(|v| *v == NetVariant::Control);
        for (i, v) in self.variants.iter().enumerate() {
            let (mean, sd) = mean_sd(&self.final_accuracy[i]);
            let star = self
                .pairwise
                .iter()
                .find(|p| Some(p.first) == control && p.second == i)
                .map(|p| stars(p.p_adjusted))
                .unwrap_or("");
            writeln!(
                s,
                "  {:<22} {:6.2}% ± {:5.2}{star}",
                v.display_name(),
                100.0 * mean.unwrap_or(f64::NAN),
                100.0 * sd.unwrap_or(0.0)
            )
            .unwrap();
        }
        let k = &self.kruskal;
        writeln!(
            s,
            "Kruskal-Wallis: H = {:.4}, df = {}, p = {:.4}{}",
            k.h,
            k.df,
            k.p_value,
            if k.small_sample { " (small sample)" } else { "" }
        )
        .unwrap();
        writeln!(s, "Dunn with Holm-Sidak correction:").unwrap();
        for p in &self.pairwise {
            writeln!(
                s,
                "  {} vs {}: z = {:.3}, p = {:.4}, adjusted p = {:.4}{}",
                self.variants[p.first].key(),
                self.variants[p.second].key(),
                p.z,
                p.p_raw,
                p.p_adjusted,
                stars(p.p_adjusted)
            )
            .unwrap();
        }
        writeln!(s, "\nPer-terrain accuracy (%), stars against the control net").unwrap();
        write!(s, "  {:<22}", "").unwrap();
        for t in TerrainLabel::ALL {
            write!(s, " {:>14}", t.name()).unwrap();
        }
        s.push('\n');
        for v in &self.variants {
            write!(s, "  {:<22}", v.display_name()).unwrap();
            for r in self.terrains.iter().filter(|r| r.variant == *v) {
                let cell = match r.mean {
                    Some(m) => format!("{:.1}{}", 100.0 * m, r.p_vs_control.map(stars).unwrap_or("")),
                    None => "-".to_string(),
                };
                write!(s, " {cell:>14}").unwrap();
            }
            s.push('\n');
        }
        writeln!(s, "*: p<0.05, **: p<0.01, ***: p<0.001").unwrap();
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_atomic(&dir.join("stats_report.csv"), self.stats_report_csv().as_bytes())?;
        write_atomic(&dir.join("summary.csv"), self.summary_csv().as_bytes())?;
        write_atomic(&dir.join("summary.txt"), self.summary_text().as_bytes())
    }
}

/// Writes the per-run artifacts for one or more seeds. Confusion matrices are
/// summed over seeds.
pub fn write_run_artifacts(dir: &Path, runs: &[SeedRun]) -> Result<Vec<RunRecord>> {
    write_atomic(&dir.join("convergence.csv"), convergence_csv(runs).as_bytes())?;
    let records: Vec<RunRecord> = runs.iter().flat_map(|r| RunRecord::from_metrics(r.seed, &r.metrics)).collect();
    write_atomic(&dir.join("per_terrain.csv"), per_terrain_csv(&records).as_bytes())?;
    write_atomic(&dir.join("gvf_error.csv"), gvf_error_csv(runs).as_bytes())?;
    let variants: Vec<NetVariant> =
        NetVariant::ALL.into_iter().filter(|v| runs.iter().any(|r| r.metrics.variant(*v).is_some())).collect();
    for v in variants {
        let mut total: Confusion = [[0; N_TERRAINS]; N_TERRAINS];
        for m in runs.iter().filter_map(|r| r.metrics.variant(v)) {
            for (row, add) in total.iter_mut().zip(&m.confusion) {
                row.iter_mut().zip(add).for_each(|(a, b)| *a += b);
            }
        }
        write_atomic(&dir.join(format!("confusion_{}.csv", v.key())), confusion_csv(&total).as_bytes())?;
    }
    Ok(records)
}
