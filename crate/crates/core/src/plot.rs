//! Static SVG charts built from an experiment's `history.csv`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistoryRow {
    pub sweep_value: f64,
    pub seed: u64,
    pub outer_iter: usize,
    pub sum_mos: f64,
}

/// Parses `history.csv` text. Errors name the missing column or the
/// offending row (1-based, header excluded).
pub fn parse_history(text: &str) -> Result<Vec<HistoryRow>> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = rd.headers().map_err(|e| Error::Parse(format!("header: {e}")))?.clone();
    let col = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| Error::Parse(format!("missing column {name}")))
    };
    let (cv, cs, ci, cm) = (col("sweep_value")?, col("seed")?, col("outer_iter")?, col("sum_mos")?);
    let mut out = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Parse(format!("row {row}: {e}")))?;
        let field = |c: usize, name: &str| {
            rec.get(c).ok_or_else(|| Error::Parse(format!("row {row}: no {name} field")))
        };
        let bad = |name: &str, v: &str| Error::Parse(format!("row {row}: bad {name} {v:?}"));
        let f = |c: usize, name: &str| -> Result<f64> {
            let s = field(c, name)?;
            s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| bad(name, s))
        };
        let seed = field(cs, "seed")?;
        let it = field(ci, "outer_iter")?;
        out.push(HistoryRow {
            sweep_value: f(cv, "sweep_value")?,
            seed: seed.parse().map_err(|_| bad("seed", seed))?,
            outer_iter: it.parse().map_err(|_| bad("outer_iter", it))?,
            sum_mos: f(cm, "sum_mos")?,
        });
    }
    if out.is_empty() {
        return Err(Error::Parse("no data rows".into()));
    }
    Ok(out)
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let span = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            if hi - lo < 1e-12 {
                let pad = lo.abs().max(1.0) * 0.05;
                (lo - pad, hi + pad)
            } else {
                let pad = (hi - lo) * 0.05;
                (lo - pad, hi + pad)
            }
        };
        Self { x: span(&mut xs.clone()), y: span(&mut ys.clone()) }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }

    fn open(&self, title: &str, xlabel: &str, ylabel: &str) -> String {
        let mut s = String::new();
        writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#).unwrap();
        writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
        writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{title}</text>"#, W / 2.0).unwrap();
        let (x0, x1, y0, y1) = (LEFT, W - RIGHT, H - BOTTOM, TOP);
        writeln!(s, r#"<path d="M{x0} {y1}V{y0}H{x1}" fill="none" stroke="black"/>"#).unwrap();
        for k in 0..=4 {
            let xv = self.x.0 + (self.x.1 - self.x.0) * k as f64 / 4.0;
            let yv = self.y.0 + (self.y.1 - self.y.0) * k as f64 / 4.0;
            let (px, py) = (self.px(xv), self.py(yv));
            writeln!(s, r#"<path d="M{px:.2} {y0}v5" stroke="black"/><text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#, y0 + 18.0, tick(xv)).unwrap();
            writeln!(s, r#"<path d="M{x0} {py:.2}h-5" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 8.0, py + 4.0, tick(yv)).unwrap();
        }
        writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>"#, (x0 + x1) / 2.0, H - 12.0).unwrap();
        writeln!(s, r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{ylabel}</text>"#, (y0 + y1) / 2.0, (y0 + y1) / 2.0).unwrap();
        s
    }

    fn line(&self, s: &mut String, pts: &[(f64, f64)], color: &str) {
        if pts.len() > 1 {
            let d: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y))).collect();
            writeln!(s, r#"<polyline class="mean-line" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, d.join(" ")).unwrap();
        }
        for &(x, y) in pts {
            writeln!(s, r#"<circle class="mean" cx="{:.2}" cy="{:.2}" r="4" fill="{color}"/>"#, self.px(x), self.py(y)).unwrap();
        }
    }

    fn scatter(&self, s: &mut String, pts: &[(f64, f64)], color: &str) {
        for &(x, y) in pts {
            writeln!(s, r#"<circle class="seed" cx="{:.2}" cy="{:.2}" r="2" fill="none" stroke="{color}" opacity="0.6"/>"#, self.px(x), self.py(y)).unwrap();
        }
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 1e4 || (v != 0.0 && v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{:.3}", v).trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

type Runs = BTreeMap<(u64, u64), Vec<(usize, f64)>>;

fn group(rows: &[HistoryRow]) -> Runs {
    let mut runs: Runs = BTreeMap::new();
    for r in rows {
        runs.entry((r.sweep_value.to_bits(), r.seed)).or_default().push((r.outer_iter, r.sum_mos));
    }
    for v in runs.values_mut() {
        v.sort_by_key(|p| p.0);
    }
    runs
}

fn sweep_values(runs: &Runs) -> Vec<f64> {
    let mut v: Vec<f64> = runs.keys().map(|k| f64::from_bits(k.0)).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Sum MOS against outer iteration, one mean curve per sweep value. Runs
/// that stopped early hold their final value.
pub fn trace_svg(rows: &[HistoryRow]) -> String {
    let runs = group(rows);
    let frame = Frame::new(rows.iter().map(|r| r.outer_iter as f64), rows.iter().map(|r| r.sum_mos));
    let mut s = frame.open("Sum MOS per outer iteration", "outer iteration", "sum MOS");
    for (ci, v) in sweep_values(&runs).into_iter().enumerate() {
        let color = COLORS[ci % COLORS.len()];
        let mine: Vec<&Vec<(usize, f64)>> = runs.iter().filter(|(k, _)| k.0 == v.to_bits()).map(|(_, r)| r).collect();
        let last = mine.iter().map(|r| r.last().map_or(0, |p| p.0)).max().unwrap_or(0);
        let mean: Vec<(f64, f64)> = (0..=last)
            .map(|it| {
                let vals: Vec<f64> = mine
                    .iter()
                    .filter_map(|r| r.iter().take_while(|p| p.0 <= it).last().map(|p| p.1))
                    .collect();
                (it as f64, vals.iter().sum::<f64>() / vals.len().max(1) as f64)
            })
            .collect();
        for r in &mine {
            frame.scatter(&mut s, &r.iter().map(|&(i, m)| (i as f64, m)).collect::<Vec<_>>(), color);
        }
        frame.line(&mut s, &mean, color);
        let ly = TOP + 14.0 * ci as f64;
        writeln!(s, r#"<text x="{}" y="{ly}" text-anchor="end" fill="{color}">sweep value {}</text>"#, W - RIGHT - 4.0, tick(v)).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Final sum MOS against sweep value: per-seed scatter and the seed mean.
pub fn sweep_svg(rows: &[HistoryRow]) -> String {
    let runs = group(rows);
    let finals: Vec<(f64, f64)> =
        runs.iter().filter_map(|(k, r)| r.last().map(|p| (f64::from_bits(k.0), p.1))).collect();
    let frame = Frame::new(finals.iter().map(|p| p.0), finals.iter().map(|p| p.1));
    let mut s = frame.open("Final sum MOS per sweep value", "sweep value", "sum MOS");
    frame.scatter(&mut s, &finals, COLORS[0]);
    let mean: Vec<(f64, f64)> = sweep_values(&runs)
        .into_iter()
        .map(|v| {
            let ys: Vec<f64> = finals.iter().filter(|p| p.0 == v).map(|p| p.1).collect();
            (v, ys.iter().sum::<f64>() / ys.len() as f64)
        })
        .collect();
    frame.line(&mut s, &mean, COLORS[1]);
    s.push_str("</svg>\n");
    s
}

/// Writes `trace.svg` and `sweep.svg` next to `history.csv` in `dir`.
pub fn emit_plots(dir: &Path) -> Result<Vec<PathBuf>> {
    let src = dir.join("history.csv");
    let text = std::fs::read_to_string(&src)?;
    let rows = parse_history(&text).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", src.display())),
        e => e,
    })?;
    let out = vec![dir.join("trace.svg"), dir.join("sweep.svg")];
    std::fs::write(&out[0], trace_svg(&rows))?;
    std::fs::write(&out[1], sweep_svg(&rows))?;
    Ok(out)
}
