//! Acceptance suite: one PASS/FAIL line per criterion. Set ACCEPTANCE_STRICT
//! to exit non-zero when any fails. Pass criterion numbers as arguments to run
//! a subset.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use nalgebra::DMatrix;
use rand::Rng;
use vineflood_core::forecast::ForecastMode;
use vineflood_core::metrics::{self, ModelLabel};
use vineflood_core::numerics::optim::fd_gradient_hessian;
use vineflood_core::numerics::rng::rng_from;
use vineflood_core::numerics::special::{norm_pdf, norm_ppf};
use vineflood_core::numerics::stats::{kendall_tau, ks_uniform};
use vineflood_core::paircop::{fit_pair, fit_pair_family, Conditioning, Family, PairCopula, PairFitOptions, Rotation};
use vineflood_core::pipeline;
use vineflood_core::sentiment::{self, Lexicon, LexiconKind, ScoredDocument};
use vineflood_core::synth::{self, Preset};
use vineflood_core::vine::{self, RVineModel, VineFitOptions};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

// ---------------------------------------------------------------- 1

fn pc(f: Family, r: Rotation, p: &[f64]) -> PairCopula {
    PairCopula::new(f, r, p.to_vec()).expect("valid copula")
}

/// Every family in every rotation it distinguishes, moderate dependence.
fn copula_grid() -> Vec<PairCopula> {
    let mut out = vec![
        PairCopula::independence(),
        pc(Family::Gaussian, Rotation::R0, &[0.6]),
        pc(Family::Gaussian, Rotation::R0, &[-0.5]),
        pc(Family::StudentT, Rotation::R0, &[0.5, 6.0]),
        pc(Family::StudentT, Rotation::R0, &[-0.3, 4.0]),
        pc(Family::Frank, Rotation::R0, &[5.0]),
        pc(Family::Frank, Rotation::R0, &[-4.0]),
    ];
    for r in Rotation::ALL {
        out.push(pc(Family::Clayton, r, &[2.0]));
        out.push(pc(Family::Gumbel, r, &[1.8]));
        out.push(pc(Family::Joe, r, &[2.0]));
        out.push(pc(Family::Bb1, r, &[0.5, 1.5]));
        out.push(pc(Family::Bb8, r, &[2.5, 0.8]));
    }
    out
}

fn criterion_1() -> Outcome {
    let mut worst = [0.0f64; 4];
    let mut failures = Vec::new();
    for c in copula_grid() {
        // (a) midpoint rule on a 200 x 200 grid
        let g = 200;
        let mut mass = 0.0;
        for i in 0..g {
            for j in 0..g {
                mass += c.pdf((i as f64 + 0.5) / g as f64, (j as f64 + 0.5) / g as f64);
            }
        }
        let ea = (mass / (g * g) as f64 - 1.0).abs();
        // (b) h-function against a central difference of the cdf in v
        // (c) inverse h-function round trip
        let (step, mut eb, mut ec) = (1e-5, 0.0f64, 0.0f64);
        for i in 1..10 {
            for j in 1..10 {
                let (u, v) = (i as f64 / 10.0, j as f64 / 10.0);
                let fd = (c.cdf(u, v + step) - c.cdf(u, v - step)) / (2.0 * step);
                eb = eb.max((fd - c.hfunc(u, v, Conditioning::Second)).abs());
                for cond in [Conditioning::First, Conditioning::Second] {
                    let x = c.hinv(u, v, cond).expect("hinv");
                    let back = match cond {
                        Conditioning::Second => c.hfunc(x, v, cond),
                        Conditioning::First => c.hfunc(v, x, cond),
                    };
                    ec = ec.max((back - u).abs());
                }
            }
        }
        // (d) tau -> parameter -> tau
        let ed = if c.family() == Family::Independence {
            c.tau().abs()
        } else {
            let back = PairCopula::from_tau(c.family(), c.rotation(), c.tau()).expect("from_tau");
            (back.tau() - c.tau()).abs()
        };
        for (k, (e, tol)) in [(ea, 5e-3), (eb, 1e-5), (ec, 1e-8), (ed, 1e-6)].into_iter().enumerate() {
            worst[k] = worst[k].max(e);
            if e >= tol {
                failures.push(format!("{c} check {}", ["a", "b", "c", "d"][k]));
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{} copulas; worst |mass-1| {:.1e}, |h-dC/dv| {:.1e}, hinv {:.1e}, tau {:.1e}{}",
            copula_grid().len(),
            worst[0],
            worst[1],
            worst[2],
            worst[3],
            if failures.is_empty() { String::new() } else { format!("; failed: {}", failures.join(", ")) }
        ),
    )
}

// ---------------------------------------------------------------- 2

fn split(draws: Vec<(f64, f64)>) -> (Vec<f64>, Vec<f64>) {
    draws.into_iter().unzip()
}

fn observed_se(c: &PairCopula, u: &[f64], v: &[f64]) -> f64 {
    let mut nll = |p: &[f64]| match PairCopula::new(c.family(), c.rotation(), p.to_vec()) {
        Ok(q) => -q.loglik(u, v),
        Err(_) => f64::INFINITY,
    };
    let (_, h, _) = fd_gradient_hessian(&mut nll, c.params(), 1e-4);
    1.0 / h[0][0].sqrt()
}

fn criterion_2() -> Outcome {
    let n = 10_000;
    let mut lines = Vec::new();
    let mut ok = true;
    for (k, fam) in [Family::Gaussian, Family::Clayton, Family::Gumbel, Family::Frank, Family::Joe].into_iter().enumerate() {
        let truth = PairCopula::from_tau(fam, Rotation::R0, 0.5).expect("truth");
        let (u, v) = split(truth.sample(n, 100 + k as u64).expect("sample"));
        let fit = fit_pair_family(&u, &v, fam, Rotation::R0).expect("fit");
        let se = observed_se(&fit.copula, &u, &v);
        let z = (fit.copula.params()[0] - truth.params()[0]) / se;
        ok &= z.abs() <= 3.0;
        lines.push(format!("{fam} z={z:+.2}"));
    }
    for (k, fam) in [Family::Clayton, Family::Gumbel, Family::Frank].into_iter().enumerate() {
        let truth = PairCopula::from_tau(fam, Rotation::R0, 0.5).expect("truth");
        let mut hits = 0;
        let mut picked = BTreeSet::new();
        for rep in 0..20u64 {
            let (u, v) = split(truth.sample(n, 1000 * (k as u64 + 1) + rep).expect("sample"));
            let f = fit_pair(&u, &v, &PairFitOptions::default()).expect("fit");
            if f.copula.family() == fam && f.copula.rotation() == Rotation::R0 {
                hits += 1;
            } else {
                picked.insert(format!("{}", f.copula.family()));
            }
        }
        ok &= hits >= 19;
        lines.push(format!(
            "AIC {fam} {hits}/20{}",
            if picked.is_empty() { String::new() } else { format!(" (else {})", picked.into_iter().collect::<Vec<_>>().join("/")) }
        ));
    }
    outcome(ok, lines.join(", "))
}

// ---------------------------------------------------------------- 3

fn criterion_3() -> Outcome {
    let (r12, r23, r13_2) = (0.6, 0.5, 0.3);
    let vine = RVineModel::path(3, |level, i| match (level, i) {
        (1, 0) => pc(Family::Gaussian, Rotation::R0, &[r12]),
        (1, _) => pc(Family::Gaussian, Rotation::R0, &[r23]),
        _ => pc(Family::Gaussian, Rotation::R0, &[r13_2]),
    })
    .expect("vine");
    let r13 = r13_2 * ((1.0 - r12 * r12) * (1.0 - r23 * r23)).sqrt() + r12 * r23;
    let corr = DMatrix::from_row_slice(3, 3, &[1.0, r12, r13, r12, 1.0, r23, r13, r23, 1.0]);
    let chol = corr.clone().cholesky().expect("positive definite");
    let l = chol.l();
    let log_det = 2.0 * (0..3).map(|i| l[(i, i)].ln()).sum::<f64>();
    let inv = chol.inverse();
    let mut worst = 0.0f64;
    for i in 0..10 {
        for j in 0..10 {
            for k in 0..10 {
                let u = [(i as f64 + 0.5) / 10.0, (j as f64 + 0.5) / 10.0, (k as f64 + 0.5) / 10.0];
                let z: Vec<f64> = u.iter().map(|p| norm_ppf(*p)).collect();
                let zv = nalgebra::DVector::from_vec(z.clone());
                let quad = (zv.transpose() * &inv * &zv)[(0, 0)];
                let joint = -1.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * log_det - 0.5 * quad;
                let oracle = joint - z.iter().map(|x| norm_pdf(*x).ln()).sum::<f64>();
                worst = worst.max((vine.log_density(&u).expect("density") - oracle).abs());
            }
        }
    }
    outcome(worst < 1e-8, format!("max |log density - MVN oracle| = {worst:.2e} over 1000 points"))
}

// ---------------------------------------------------------------- 4

/// Decodes a Prüfer sequence into the edges of a labelled tree.
fn prufer_tree(seq: &[usize], n: usize) -> Vec<(usize, usize)> {
    let mut degree = vec![1usize; n];
    for &s in seq {
        degree[s] += 1;
    }
    let mut edges = Vec::new();
    for &s in seq {
        let leaf = (0..n).find(|&i| degree[i] == 1).expect("a leaf exists");
        edges.push((leaf.min(s), leaf.max(s)));
        degree[leaf] -= 1;
        degree[s] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&i| degree[i] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges.sort();
    edges
}

/// Maximum-weight spanning tree by enumerating all n^(n-2) labelled trees.
fn brute_force_mst(w: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let n = w.len();
    let total = n.pow(n as u32 - 2);
    let mut best: Option<(f64, Vec<(usize, usize)>)> = None;
    for code in 0..total {
        let mut seq = Vec::with_capacity(n - 2);
        let mut c = code;
        for _ in 0..n - 2 {
            seq.push(c % n);
            c /= n;
        }
        let t = prufer_tree(&seq, n);
        let s: f64 = t.iter().map(|&(i, j)| w[i][j]).sum();
        if best.as_ref().is_none_or(|(b, _)| s > *b) {
            best = Some((s, t));
        }
    }
    best.expect("at least one tree").1
}

fn criterion_4() -> Outcome {
    let taus = [0.8, 0.7, 0.6, 0.5, 0.4];
    let truth = RVineModel::path(6, |level, i| {
        if level == 1 {
            PairCopula::from_tau(if i % 2 == 0 { Family::Gaussian } else { Family::Clayton }, Rotation::R0, taus[i]).expect("tau")
        } else {
            PairCopula::independence()
        }
    })
    .expect("vine");
    let generating: Vec<(usize, usize)> = (0..5).map(|i| (i, i + 1)).collect();
    let mut agree = 0;
    let mut is_path = 0;
    for seed in 0..20u64 {
        let u = truth.simulate(1000, seed).expect("simulate");
        let cols: Vec<Vec<f64>> = (0..6).map(|j| u.iter().map(|r| r[j]).collect()).collect();
        let mut w = vec![vec![0.0; 6]; 6];
        for i in 0..6 {
            for j in i + 1..6 {
                let t = kendall_tau(&cols[i], &cols[j]).expect("tau").abs();
                w[i][j] = t;
                w[j][i] = t;
            }
        }
        let oracle = brute_force_mst(&w);
        // only the first tree is compared, so the upper trees are not fitted
        let opts = VineFitOptions { truncation: Some(1), ..VineFitOptions::default() };
        let fitted = vine::fit(&u, &opts).expect("fit");
        let mut t1: Vec<(usize, usize)> = fitted.trees[0].edges.iter().map(|e| (e.a.min(e.b), e.a.max(e.b))).collect();
        t1.sort();
        agree += usize::from(t1 == oracle);
        is_path += usize::from(oracle == generating);
    }
    let w3 = vec![vec![0.0, 0.6, 0.1], vec![0.6, 0.0, 0.5], vec![0.1, 0.5, 0.0]];
    let small = vine::max_spanning_tree(&w3).expect("mst");
    let small_oracle = brute_force_mst(&w3);
    let ok = agree == 20 && small == vec![(0, 1), (1, 2)] && small == small_oracle;
    outcome(
        ok,
        format!("first tree = brute-force MST in {agree}/20 seeds (MST = generating path in {is_path}/20); d=3 example -> {small:?}"),
    )
}

// ---------------------------------------------------------------- 5

fn criterion_5(tmp: &Path) -> Outcome {
    let ds = synth::dataset(Preset::Calibration3, 1000, 500, 10_000, 5, tmp.join("c5.csv"), tmp.join("c5-out"))
        .expect("dataset");
    ds.frame.write_csv(fs::File::create(&ds.config.data).expect("create")).expect("write");
    let cfg = ds.config;
    let frame = pipeline::load_data(&cfg).expect("load");
    let marg = pipeline::fit_marginals(&cfg, &frame).expect("marginals");
    let dep = pipeline::fit_dependence(&cfg, &frame, &marg, ModelLabel::VineCopula).expect("vine");
    let run = pipeline::run_forecast(&cfg, &frame, &marg, &dep).expect("forecast");
    let n = run.points.len();
    let covered = run
        .points
        .iter()
        .filter(|p| p.observed.is_some_and(|x| p.lower <= x && x <= p.upper))
        .count();
    let coverage = covered as f64 / n as f64;
    let pits: Vec<f64> = run.points.iter().filter_map(|p| p.pit).collect();
    let ks = ks_uniform(&pits);
    let per_var: Vec<String> = cfg
        .column_names()
        .iter()
        .map(|v| {
            let pts: Vec<_> = run.points.iter().filter(|p| &p.variable == v).collect();
            let c = pts.iter().filter(|p| p.observed.is_some_and(|x| p.lower <= x && x <= p.upper)).count();
            format!("{v} {:.3}", c as f64 / pts.len() as f64)
        })
        .collect();
    outcome(
        n == 1500 && (0.92..=0.98).contains(&coverage) && ks.p_value > 0.01,
        format!(
            "{n} forecasts, coverage {coverage:.4} ({}), PIT KS p = {:.3}",
            per_var.join(", "),
            ks.p_value
        ),
    )
}

// ---------------------------------------------------------------- 6

fn criterion_6(tmp: &Path) -> Outcome {
    let mut passed = 0;
    let mut lines = Vec::new();
    for seed in 0..10u64 {
        let dir = tmp.join(format!("c6-{seed}"));
        fs::create_dir_all(&dir).expect("dir");
        let ds = synth::dataset(Preset::Asymmetric6, 1000, 320, 1000, seed, dir.join("data.csv"), dir.join("out"))
            .expect("dataset");
        ds.frame.write_csv(fs::File::create(&ds.config.data).expect("create")).expect("write");
        let table = pipeline::run_compare(&ds.config).expect("compare");
        let ForecastMode::ConditionalOnSubset(cond) = &ds.config.forecast.mode else { unreachable!() };
        let vars: Vec<String> = ds.config.column_names().into_iter().filter(|v| !cond.contains(v)).collect();
        let wins = vars
            .iter()
            .filter(|v| table.get(v, ModelLabel::VineCopula).is_some_and(|r| r.best_mse))
            .count();
        let avg_mis = |m: ModelLabel| vars.iter().map(|v| table.get(v, m).expect("row").mis).sum::<f64>() / vars.len() as f64;
        let (full, indep) = (avg_mis(ModelLabel::VineCopula), avg_mis(ModelLabel::Independent));
        let ok = 2 * wins > vars.len() && full <= indep;
        passed += usize::from(ok);
        lines.push(format!("seed {seed}: best MSE {wins}/{}, MIS {full:.3} vs {indep:.3}", vars.len()));
    }
    outcome(passed >= 7, format!("{passed}/10 seeds [{}]", lines.join("; ")))
}

// ---------------------------------------------------------------- 7

fn mis_loop(x: &[f64], l: &[f64], u: &[f64], alpha: f64) -> f64 {
    let mut s = 0.0;
    for i in 0..x.len() {
        s += u[i] - l[i];
        if x[i] < l[i] {
            s += 2.0 / alpha * (l[i] - x[i]);
        } else if x[i] > u[i] {
            s += 2.0 / alpha * (x[i] - u[i]);
        }
    }
    s / x.len() as f64
}

/// Distance correlation from explicit n x n double-centered matrices.
fn dcor_naive(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let centered = |v: &[f64]| -> Vec<Vec<f64>> {
        let d: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (v[i] - v[j]).abs()).collect()).collect();
        let row: Vec<f64> = d.iter().map(|r| r.iter().sum::<f64>() / n as f64).collect();
        let col: Vec<f64> = (0..n).map(|j| (0..n).map(|i| d[i][j]).sum::<f64>() / n as f64).collect();
        let all = row.iter().sum::<f64>() / n as f64;
        (0..n).map(|i| (0..n).map(|j| d[i][j] - row[i] - col[j] + all).collect()).collect()
    };
    let (a, b) = (centered(x), centered(y));
    let mut xy = 0.0;
    let mut xx = 0.0;
    let mut yy = 0.0;
    for i in 0..n {
        for j in 0..n {
            xy += a[i][j] * b[i][j];
            xx += a[i][j] * a[i][j];
            yy += b[i][j] * b[i][j];
        }
    }
    let nn = (n * n) as f64;
    let (dcov, vx, vy) = ((xy / nn).max(0.0).sqrt(), (xx / nn).sqrt(), (yy / nn).sqrt());
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        dcov / (vx * vy).sqrt()
    }
}

fn criterion_7() -> Outcome {
    let mut rng = rng_from(77);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(4..60);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let p: Vec<f64> = x.iter().map(|v| v * rng.random_range(-1.0..1.5) + rng.random_range(-1.0..1.0)).collect();
        let l: Vec<f64> = p.iter().map(|v| v - rng.random_range(0.0..1.0)).collect();
        let u: Vec<f64> = p.iter().map(|v| v + rng.random_range(0.0..1.0)).collect();
        let mut sse = 0.0;
        let mut sst = 0.0;
        let mean = x.iter().sum::<f64>() / n as f64;
        for i in 0..n {
            sse += (p[i] - x[i]) * (p[i] - x[i]);
            sst += (x[i] - mean) * (x[i] - mean);
        }
        let pairs = [
            (metrics::mse(&x, &p).expect("mse"), sse / n as f64),
            (metrics::mis(&x, &l, &u, 0.05).expect("mis"), mis_loop(&x, &l, &u, 0.05)),
            (metrics::nnse(&x, &p).expect("nnse"), 1.0 / (1.0 + sse / sst)),
            (metrics::dcor(&x, &p).expect("dcor"), dcor_naive(&x, &p)),
        ];
        for (a, b) in pairs {
            worst = worst.max((a - b).abs());
        }
    }
    let obs = [1.0, 2.0, 3.0, 6.0];
    let hand = metrics::mis(&[1.5], &[0.0], &[1.0], 0.05).expect("mis") == 21.0
        && metrics::mis(&[-0.25], &[0.0], &[1.0], 0.05).expect("mis") == 11.0
        && metrics::nnse(&obs, &[3.0; 4]).expect("nnse") == 0.5;
    outcome(worst < 1e-10 && hand, format!("max oracle gap {worst:.1e} over 100 instances; hand cases exact: {hand}"))
}

// ---------------------------------------------------------------- 8

fn random_doc<R: Rng>(rng: &mut R, vocab: &[&str]) -> String {
    let k = rng.random_range(0..15);
    let mut words = Vec::with_capacity(k);
    for _ in 0..k {
        let w = vocab[rng.random_range(0..vocab.len())];
        let w = match rng.random_range(0..6) {
            0 => w.to_uppercase(),
            1 => format!("{w}!"),
            2 => format!("({w},"),
            _ => w.to_string(),
        };
        words.push(w);
    }
    words.join(" ")
}

fn criterion_8() -> Outcome {
    let bing = Lexicon::new(LexiconKind::Binary, [("great", 1), ("awful", -1)]).expect("lexicon");
    let afinn = Lexicon::new(LexiconKind::Scored, [("good", 3)]).expect("lexicon");
    let one = NaiveDate::from_ymd_opt(2016, 1, 1).expect("date");
    let single = [ScoredDocument { date: one, raw_score: 5.0, token_count: 1 }];
    let cancel = [
        ScoredDocument { date: one, raw_score: 2.0, token_count: 1 },
        ScoredDocument { date: one, raw_score: -2.0, token_count: 1 },
    ];
    let examples = sentiment::score_document("great great day, awful traffic", &bing) == 1.0
        && sentiment::score_document("good good", &afinn) == 6.0
        && sentiment::score_document("", &afinn) == 0.0
        && sentiment::aggregate_daily(&single, 16_298, None).expect("agg").values == [5.0 / 16_298.0]
        && sentiment::aggregate_daily(&cancel, 16_298, None).expect("agg").values == [0.0]
        && sentiment::aggregate_daily(&single, 16_298, Some((one, one.succ_opt().expect("date")))).expect("agg").values[1] == 0.0;

    let scored = Lexicon::new(
        LexiconKind::Scored,
        [("good", 3), ("flood", -2), ("storm", -3), ("calm", 2), ("love", 3), ("hate", -3), ("don't", -1)],
    )
    .expect("lexicon");
    let vocab = [
        "good", "flood", "storm", "calm", "love", "hate", "don't", "the", "sea", "wall", "@metoffice", "https://t.co/xyz",
        "#storm", "train", "dawlish", "well-known", "rain",
    ];
    let mut rng = rng_from(8);
    let mut additive = 0;
    let mut docs = Vec::new();
    for i in 0..1000 {
        let (a, b) = (random_doc(&mut rng, &vocab), random_doc(&mut rng, &vocab));
        for lex in [&bing, &scored] {
            let joined = sentiment::score_document(&format!("{a} {b}"), lex);
            let parts = sentiment::score_document(&a, lex) + sentiment::score_document(&b, lex);
            let upper = sentiment::score_document(&a.to_uppercase(), lex) == sentiment::score_document(&a, lex);
            additive += usize::from(joined == parts && upper);
        }
        docs.push((one + chrono::Duration::days(i % 37), a));
    }
    let scored_docs = sentiment::score_corpus(&docs, &scored);
    let p = sentiment::aggregate_daily(&scored_docs, 16_298, None).expect("agg");
    let p2 = sentiment::aggregate_daily(&scored_docs, 2 * 16_298, None).expect("agg");
    let linear = p.values.iter().zip(&p2.values).all(|(a, b)| *b == a / 2.0);
    outcome(
        examples && additive == 2000 && linear,
        format!("documented examples exact: {examples}; additivity + case-insensitivity {additive}/2000; scaling linearity on {} days: {linear}", p.values.len()),
    )
}

// ---------------------------------------------------------------- 9

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .expect("read dir")
        .map(|e| {
            let e = e.expect("entry");
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).expect("read"))
        })
        .collect();
    out.sort();
    out
}

fn criterion_9(tmp: &Path) -> Outcome {
    let ds = synth::dataset(Preset::Asymmetric6, 400, 60, 500, 9, tmp.join("c9.csv"), tmp.join("c9-a")).expect("dataset");
    ds.frame.write_csv(fs::File::create(&ds.config.data).expect("create")).expect("write");
    let mut cfg = ds.config;
    pipeline::run_compare(&cfg).expect("first run");
    cfg.output_dir = tmp.join("c9-b");
    pipeline::run_compare(&cfg).expect("second run");
    let (a, b) = (dir_contents(&tmp.join("c9-a")), dir_contents(&tmp.join("c9-b")));
    let bytes: usize = a.iter().map(|f| f.1.len()).sum();
    outcome(a == b && a.len() >= 8, format!("{} files, {bytes} bytes, identical: {}", a.len(), a == b))
}

fn main() {
    let wanted: BTreeSet<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let tmp = tempfile::tempdir().expect("tempdir");
    let criteria: [(usize, &str, Option<Duration>, &dyn Fn() -> Outcome); 9] = [
        (1, "copula correctness", Some(Duration::from_secs(120)), &criterion_1),
        (2, "estimation recovery", None, &criterion_2),
        (3, "Gaussian vine = MVN copula", None, &criterion_3),
        (4, "structure selection", None, &criterion_4),
        (5, "forecast calibration", Some(Duration::from_secs(600)), &|| criterion_5(tmp.path())),
        (6, "three-model comparison", None, &|| criterion_6(tmp.path())),
        (7, "metric oracles", None, &criterion_7),
        (8, "sentiment determinism", None, &criterion_8),
        (9, "end-to-end determinism", None, &|| criterion_9(tmp.path())),
    ];
    let mut failed = 0;
    for (k, name, limit, f) in criteria {
        if !wanted.is_empty() && !wanted.contains(&k) {
            continue;
        }
        let t0 = Instant::now();
        let mut o = f();
        let took = t0.elapsed();
        if let Some(limit) = limit {
            if took > limit {
                o.pass = false;
                o.detail.push_str(&format!("; runtime limit {}s exceeded", limit.as_secs()));
            }
        }
        println!("criterion {k} ({name}): {} [{:.1}s] {}", if o.pass { "PASS" } else { "FAIL" }, took.as_secs_f64(), o.detail);
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        // FAIL lines are the record; a non-zero exit is opt-in so the
        // workspace test run stays usable while a criterion is unmet
        if std::env::var_os("ACCEPTANCE_STRICT").is_some() {
            std::process::exit(1);
        }
    }
}
