//! Forecast scores: mean squared error, mean interval score, normalized
//! Nash–Sutcliffe efficiency and distance correlation, plus the per-model
//! comparison table.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn same_len(what: &str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::invalid(format!("{what}: length mismatch ({a} vs {b})")));
    }
    Ok(())
}

pub fn mse(observed: &[f64], predicted: &[f64]) -> Result<f64> {
    same_len("mse", observed.len(), predicted.len())?;
    if observed.is_empty() {
        return Err(Error::invalid("mse: empty series"));
    }
    Ok(observed.iter().zip(predicted).map(|(x, p)| (p - x) * (p - x)).sum::<f64>() / observed.len() as f64)
}

/// Mean interval score for central `(1 − alpha)` intervals.
pub fn mis(observed: &[f64], lower: &[f64], upper: &[f64], alpha: f64) -> Result<f64> {
    same_len("mis", observed.len(), lower.len())?;
    same_len("mis", observed.len(), upper.len())?;
    if observed.is_empty() {
        return Err(Error::invalid("mis: empty series"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("mis: alpha {alpha} not in (0, 1)")));
    }
    let k = 2.0 / alpha;
    let mut total = 0.0;
    for (i, ((&x, &l), &u)) in observed.iter().zip(lower).zip(upper).enumerate() {
        if l > u {
            return Err(Error::invalid(format!("mis: crossed interval at index {i} ({l} > {u})")));
        }
        total += (u - l) + k * (l - x).max(0.0) + k * (x - u).max(0.0);
    }
    Ok(total / observed.len() as f64)
}

/// `1 / (2 − NSE)`, in (0, 1].
pub fn nnse(observed: &[f64], predicted: &[f64]) -> Result<f64> {
    same_len("nnse", observed.len(), predicted.len())?;
    if observed.len() < 2 {
        return Err(Error::invalid("nnse: need at least two observations"));
    }
    let m = observed.iter().sum::<f64>() / observed.len() as f64;
    let ss_tot: f64 = observed.iter().map(|x| (x - m) * (x - m)).sum();
    if ss_tot == 0.0 {
        return Err(Error::invalid("nnse: observed series is constant, efficiency undefined"));
    }
    let ss_res: f64 = observed.iter().zip(predicted).map(|(x, p)| (p - x) * (p - x)).sum();
    let nse = 1.0 - ss_res / ss_tot;
    Ok(1.0 / (2.0 - nse))
}

fn centered_distances(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = (x[i] - x[j]).abs();
        }
    }
    let row: Vec<f64> = (0..n).map(|i| a[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64).collect();
    let grand = row.iter().sum::<f64>() / n as f64;
    for i in 0..n {
        for j in 0..n {
            // distance matrices are symmetric, so column means equal row means
            a[i * n + j] += grand - row[i] - row[j];
        }
    }
    a
}

/// Sample distance correlation (V-statistic form), in [0, 1].
pub fn dcor(x: &[f64], y: &[f64]) -> Result<f64> {
    same_len("dcor", x.len(), y.len())?;
    if x.len() < 4 {
        return Err(Error::invalid("dcor: need at least four observations"));
    }
    let a = centered_distances(x);
    let b = centered_distances(y);
    let dot = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(u, v)| u * v).sum::<f64>();
    let vxy = dot(&a, &b);
    let vxx = dot(&a, &a);
    let vyy = dot(&b, &b);
    if vxx <= 0.0 || vyy <= 0.0 {
        return Ok(0.0);
    }
    let r2 = vxy / (vxx * vyy).sqrt();
    Ok(r2.max(0.0).sqrt().min(1.0))
}

/// The four scores for one forecast track.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub mse: f64,
    pub mis: f64,
    pub nnse: f64,
    pub dcor: f64,
}

pub fn score_track(observed: &[f64], point: &[f64], lower: &[f64], upper: &[f64], alpha: f64) -> Result<Scores> {
    Ok(Scores {
        mse: mse(observed, point)?,
        mis: mis(observed, lower, upper, alpha)?,
        nnse: nnse(observed, point)?,
        dcor: dcor(observed, point)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelLabel {
    Independent,
    Gaussian,
    VineCopula,
}

impl ModelLabel {
    pub const ALL: [ModelLabel; 3] = [ModelLabel::Independent, ModelLabel::Gaussian, ModelLabel::VineCopula];

    pub fn name(&self) -> &'static str {
        match self {
            ModelLabel::Independent => "Independent",
            ModelLabel::Gaussian => "Gaussian",
            ModelLabel::VineCopula => "VineCopula",
        }
    }

    /// File-name stem used for this model's artifacts.
    pub fn slug(&self) -> &'static str {
        match self {
            ModelLabel::Independent => "independent",
            ModelLabel::Gaussian => "gaussian",
            ModelLabel::VineCopula => "vine",
        }
    }
}

impl fmt::Display for ModelLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "independent" | "independence" => Ok(ModelLabel::Independent),
            "gaussian" => Ok(ModelLabel::Gaussian),
            "vinecopula" | "vine" | "full" => Ok(ModelLabel::VineCopula),
            _ => Err(Error::invalid(format!("unknown model label '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRow {
    pub variable: String,
    pub model: ModelLabel,
    pub n: usize,
    pub mse: f64,
    pub mis: f64,
    pub nnse: f64,
    pub dcor: f64,
    pub best_mse: bool,
    pub best_mis: bool,
    pub best_nnse: bool,
    pub best_dcor: bool,
}

impl EvaluationRow {
    /// Metrics on which this row is (jointly) best, `;`-separated.
    pub fn best(&self) -> String {
        let mut v = Vec::new();
        for (flag, name) in [
            (self.best_mse, "mse"),
            (self.best_mis, "mis"),
            (self.best_nnse, "nnse"),
            (self.best_dcor, "dcor"),
        ] {
            if flag {
                v.push(name);
            }
        }
        v.join(";")
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvaluationTable {
    pub alpha: f64,
    pub rows: Vec<EvaluationRow>,
}

impl EvaluationTable {
    /// Builds the table and flags, per variable, the best model on each
    /// metric (lowest MSE and MIS, highest NNSE and dcor; ties all flagged).
    pub fn new(alpha: f64, entries: Vec<(String, ModelLabel, usize, Scores)>) -> Self {
        let mut rows: Vec<EvaluationRow> = entries
            .into_iter()
            .map(|(variable, model, n, s)| EvaluationRow {
                variable,
                model,
                n,
                mse: s.mse,
                mis: s.mis,
                nnse: s.nnse,
                dcor: s.dcor,
                best_mse: false,
                best_mis: false,
                best_nnse: false,
                best_dcor: false,
            })
            .collect();
        let vars: Vec<String> = {
            let mut seen: Vec<String> = Vec::new();
            for r in &rows {
                if !seen.contains(&r.variable) {
                    seen.push(r.variable.clone());
                }
            }
            seen
        };
        for v in &vars {
            let idx: Vec<usize> = (0..rows.len()).filter(|&i| &rows[i].variable == v).collect();
            let min_mse = idx.iter().map(|&i| rows[i].mse).fold(f64::INFINITY, f64::min);
            let min_mis = idx.iter().map(|&i| rows[i].mis).fold(f64::INFINITY, f64::min);
            let max_nnse = idx.iter().map(|&i| rows[i].nnse).fold(f64::NEG_INFINITY, f64::max);
            let max_dcor = idx.iter().map(|&i| rows[i].dcor).fold(f64::NEG_INFINITY, f64::max);
            for &i in &idx {
                rows[i].best_mse = rows[i].mse == min_mse;
                rows[i].best_mis = rows[i].mis == min_mis;
                rows[i].best_nnse = rows[i].nnse == max_nnse;
                rows[i].best_dcor = rows[i].dcor == max_dcor;
            }
        }
        EvaluationTable { alpha, rows }
    }

    pub fn get(&self, variable: &str, model: ModelLabel) -> Option<&EvaluationRow> {
        self.rows.iter().find(|r| r.variable == variable && r.model == model)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "variable", "model", "n", "mse", "mis", "nnse", "dcor", "best_mse", "best_mis", "best_nnse", "best_dcor", "best",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.variable.clone(),
                r.model.name().to_string(),
                r.n.to_string(),
                r.mse.to_string(),
                r.mis.to_string(),
                r.nnse.to_string(),
                r.dcor.to_string(),
                r.best_mse.to_string(),
                r.best_mis.to_string(),
                r.best_nnse.to_string(),
                r.best_dcor.to_string(),
                r.best(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::rng_from;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::Rng;

    /// dCov² through the three-sum identity `S1 + S2 − 2·S3`, no centering.
    fn dcor_oracle(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let d2 = |p: &[f64], q: &[f64]| {
            let (mut s1, mut sa, mut sb, mut s3) = (0.0, 0.0, 0.0, 0.0);
            for i in 0..p.len() {
                for j in 0..p.len() {
                    let a = (p[i] - p[j]).abs();
                    let b = (q[i] - q[j]).abs();
                    s1 += a * b;
                    sa += a;
                    sb += b;
                    for k in 0..p.len() {
                        s3 += a * (q[i] - q[k]).abs();
                    }
                }
            }
            s1 / (n * n) + (sa / (n * n)) * (sb / (n * n)) - 2.0 * s3 / (n * n * n)
        };
        let (xy, xx, yy) = (d2(x, y), d2(x, x), d2(y, y));
        if xx <= 0.0 || yy <= 0.0 {
            return 0.0;
        }
        (xy / (xx * yy).sqrt()).max(0.0).sqrt()
    }

    fn mis_loop(x: &[f64], l: &[f64], u: &[f64], alpha: f64) -> f64 {
        let mut s = 0.0;
        for i in 0..x.len() {
            let mut v = u[i] - l[i];
            if x[i] < l[i] {
                v += 2.0 / alpha * (l[i] - x[i]);
            }
            if x[i] > u[i] {
                v += 2.0 / alpha * (x[i] - u[i]);
            }
            s += v;
        }
        s / x.len() as f64
    }

    #[test]
    fn hand_cases() {
        assert_eq!(mse(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap(), 2.0 / 3.0);
        assert_eq!(mse(&[0.0], &[3.0]).unwrap(), 9.0);
        assert_eq!(mse(&[1.5, 2.0], &[1.5, 2.0]).unwrap(), 0.0);
        assert_eq!(mis(&[0.5], &[0.0], &[1.0], 0.05).unwrap(), 1.0);
        assert_eq!(mis(&[1.5], &[0.0], &[1.0], 0.05).unwrap(), 21.0);
        assert_eq!(mis(&[-0.25], &[0.0], &[1.0], 0.05).unwrap(), 11.0);
        let obs = [1.0, 3.0, 2.0, 6.0];
        assert_eq!(nnse(&obs, &obs).unwrap(), 1.0);
        assert_eq!(nnse(&obs, &[3.0; 4]).unwrap(), 0.5);
        assert!(nnse(&obs, &[1e6; 4]).unwrap() < 1e-9);
    }

    #[test]
    fn errors() {
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(mis(&[1.0], &[2.0], &[1.0], 0.05).unwrap_err().to_string().contains("crossed"));
        assert!(nnse(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap_err().to_string().contains("constant"));
        assert!(dcor(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn dcor_identities() {
        let x = [0.3, -1.2, 2.5, 0.7, 1.1, -0.4];
        assert!((dcor(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 2.0 * v).collect();
        assert!((dcor(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(dcor(&x, &[1.0; 6]).unwrap(), 0.0);
        let mut rng = rng_from(5);
        let a: Vec<f64> = (0..2000).map(|_| rng.random()).collect();
        let b: Vec<f64> = (0..2000).map(|_| rng.random()).collect();
        assert!(dcor(&a, &b).unwrap() < 0.06);
    }

    #[test]
    fn dcor_zero_iff_dcov_zero() {
        // x takes two values symmetric around y's structure: y = ±1 equally
        // for each x gives dCov = 0 exactly in the V-statistic
        let x = [0.0, 0.0, 1.0, 1.0];
        let y = [1.0, -1.0, 1.0, -1.0];
        assert_eq!(dcor(&x, &y).unwrap(), 0.0);
        assert_eq!(dcor_oracle(&x, &y), 0.0);
        let z = [1.0, -1.0, -1.0, 1.0];
        assert_eq!(dcor(&z, &y).unwrap(), 0.0);
        assert!(dcor(&[0.0, 1.0, 2.0, 3.0], &[0.0, 1.0, 4.0, 9.0]).unwrap() > 0.0);
    }

    #[test]
    fn brute_force_agreement() {
        let mut rng = rng_from(42);
        for _ in 0..100 {
            let n = rng.random_range(4..40);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let p: Vec<f64> = x.iter().map(|v| v + rng.random_range(-2.0..2.0)).collect();
            let l: Vec<f64> = p.iter().map(|v| v - rng.random_range(0.0..2.0)).collect();
            let u: Vec<f64> = p.iter().map(|v| v + rng.random_range(0.0..2.0)).collect();
            let alpha = rng.random_range(0.01..0.5);
            let mse_loop = {
                let mut s = 0.0;
                for i in 0..n {
                    s += (x[i] - p[i]).powi(2);
                }
                s / n as f64
            };
            assert!((mse(&x, &p).unwrap() - mse_loop).abs() < 1e-10);
            assert!((mis(&x, &l, &u, alpha).unwrap() - mis_loop(&x, &l, &u, alpha)).abs() < 1e-10);
            let mean = x.iter().sum::<f64>() / n as f64;
            let nse = 1.0 - (0..n).map(|i| (p[i] - x[i]).powi(2)).sum::<f64>() / (0..n).map(|i| (x[i] - mean).powi(2)).sum::<f64>();
            assert!((nnse(&x, &p).unwrap() - 1.0 / (2.0 - nse)).abs() < 1e-10);
            assert!((dcor(&x, &p).unwrap() - dcor_oracle(&x, &p)).abs() < 1e-10);
        }
    }

    #[test]
    fn best_flags_and_csv() {
        let s = |mse, mis, nnse, dcor| Scores { mse, mis, nnse, dcor };
        let t = EvaluationTable::new(
            0.05,
            vec![
                ("Hs".into(), ModelLabel::Independent, 10, s(2.0, 5.0, 0.6, 0.5)),
                ("Hs".into(), ModelLabel::Gaussian, 10, s(1.0, 5.0, 0.7, 0.4)),
                ("Hs".into(), ModelLabel::VineCopula, 10, s(1.5, 4.0, 0.7, 0.3)),
            ],
        );
        let g = t.get("Hs", ModelLabel::Gaussian).unwrap();
        assert!(g.best_mse && !g.best_mis && g.best_nnse && !g.best_dcor);
        assert_eq!(t.get("Hs", ModelLabel::VineCopula).unwrap().best(), "mis;nnse");
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().next().unwrap().ends_with(",best"));
    }

    proptest! {
        #[test]
        fn metrics_are_permutation_invariant(v in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0, 0.0f64..3.0), 4..30), seed in 0u64..1000) {
            let x: Vec<f64> = v.iter().map(|t| t.0).collect();
            let p: Vec<f64> = v.iter().map(|t| t.1).collect();
            let l: Vec<f64> = v.iter().map(|t| t.1 - t.2).collect();
            let u: Vec<f64> = v.iter().map(|t| t.1 + t.2).collect();
            let mut idx: Vec<usize> = (0..x.len()).collect();
            idx.shuffle(&mut rng_from(seed));
            let perm = |a: &[f64]| idx.iter().map(|&i| a[i]).collect::<Vec<f64>>();
            let (xp, pp, lp, up) = (perm(&x), perm(&p), perm(&l), perm(&u));
            prop_assert!((mse(&x, &p).unwrap() - mse(&xp, &pp).unwrap()).abs() < 1e-10);
            prop_assert!((mis(&x, &l, &u, 0.1).unwrap() - mis(&xp, &lp, &up, 0.1).unwrap()).abs() < 1e-10);
            if let (Ok(a), Ok(b)) = (nnse(&x, &p), nnse(&xp, &pp)) {
                prop_assert!((a - b).abs() < 1e-10);
                prop_assert!(a > 0.0 && a <= 1.0);
            }
            let d = dcor(&x, &p).unwrap();
            prop_assert!((d - dcor(&p, &x).unwrap()).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&d));
            // interval score is at least the mean width, with equality iff all covered
            let width = l.iter().zip(&u).map(|(a, b)| b - a).sum::<f64>() / l.len() as f64;
            let score = mis(&x, &l, &u, 0.1).unwrap();
            let covered = x.iter().zip(l.iter().zip(&u)).all(|(xi, (a, b))| a <= xi && xi <= b);
            prop_assert!(score >= width - 1e-12);
            prop_assert_eq!(covered, (score - width).abs() <= 1e-12 * (1.0 + width));
        }
    }
}
