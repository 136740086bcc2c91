//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs without the libtest harness so the report is always
//! printed in order.

use std::collections::HashMap;
use std::f64::consts::{FRAC_1_SQRT_2, TAU};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ContinuousCDF, Normal as StatNormal, StudentsT};
use statrs::function::beta::beta_reg;

use irisbench::augment::{augment_set, augmentation_angles, rotate, AugmentConfig};
use irisbench::cli::{cmd_augment, cmd_pipeline, ExperimentConfig, Manifest, ManifestRow, Split};
use irisbench::metrics::{decidability, eer, far_frr_curve, paired_t_test, RunSeries};
use irisbench::preprocess::{apply_segmentation, delineate, rubber_sheet, BoundingBox, Circle, IrisGeometry};
use irisbench::raster::{save_image, Mask, Raster};
use irisbench::verify::{
    cosine_distance, euclidean_distance, generate_pairs, jaccard_distance, mahalanobis_distance,
    manhattan_distance,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(start: Instant, budget: Duration) -> Result<Duration, String> {
    let t = start.elapsed();
    ensure(t < budget, || format!("took {t:?}, budget {budget:?}"))?;
    Ok(t)
}

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/iris3x4")
}

/// Brute-force count of same-label pairs.
fn count_same_label_pairs(labels: &[String]) -> usize {
    let mut n = 0;
    for i in 0..labels.len() {
        for j in i + 1..labels.len() {
            n += (labels[i] == labels[j]) as usize;
        }
    }
    n
}

/// Class sizes with `sum C(n_c, 2) == target`, padded with singletons to `ids`.
fn labels_with_intra_count(target: usize, ids: usize) -> Vec<String> {
    let mut sizes = Vec::new();
    let mut left = target;
    while left > 0 {
        let mut n = 2;
        while (n + 1) * n / 2 <= left {
            n += 1;
        }
        sizes.push(n);
        left -= n * (n - 1) / 2;
    }
    let used: usize = sizes.iter().sum();
    assert!(used <= ids, "target needs {used} ids");
    sizes.extend(std::iter::repeat_n(1, ids - used));
    sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &n)| std::iter::repeat_n(format!("class{c}"), n))
        .collect()
}

fn c1_pair_protocol() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for trial in 0..20 {
        let classes = rng.random_range(1..=400);
        let labels: Vec<String> = (0..1000).map(|_| format!("c{}", rng.random_range(0..classes))).collect();
        let rows: Vec<(String, &String)> = labels.iter().enumerate().map(|(i, l)| (format!("id{i:04}"), l)).collect();
        let p = generate_pairs(&rows).map_err(|e| e.to_string())?;
        ensure(p.intra_count() + p.inter_count() == 499_500, || {
            format!("trial {trial}: {} + {} != 499500", p.intra_count(), p.inter_count())
        })?;
        ensure(p.intra_count() == count_same_label_pairs(&labels), || {
            format!("trial {trial}: intra count disagrees with brute force")
        })?;
    }
    let labels = labels_with_intra_count(4_634, 1000);
    ensure(count_same_label_pairs(&labels) == 4_634, || "constructed label set is wrong".into())?;
    let rows: Vec<(String, &String)> = labels.iter().enumerate().map(|(i, l)| (format!("id{i:04}"), l)).collect();
    let p = generate_pairs(&rows).map_err(|e| e.to_string())?;
    ensure((p.intra_count(), p.inter_count()) == (4_634, 494_866), || {
        format!("got {} / {}", p.intra_count(), p.inter_count())
    })?;
    let t = within_budget(start, Duration::from_secs(1))?;
    Ok(format!("4634 genuine / 494866 impostor; 20 random sets sum to 499500 ({t:.0?})"))
}

fn c2_augmentation() -> Outcome {
    let start = Instant::now();
    let cfg = AugmentConfig::new(60.0, 6).map_err(|e| e.to_string())?;
    let angles = augmentation_angles(&cfg).map_err(|e| e.to_string())?;
    ensure(angles == [-60.0, -40.0, -20.0, 20.0, 40.0, 60.0], || format!("angles {angles:?}"))?;
    let items: Vec<(usize, String)> = (0..1000).map(|i| (i, format!("c{}", i % 50))).collect();
    let plan = augment_set(&items, &cfg).map_err(|e| e.to_string())?;
    ensure(plan.len() == 7000, || format!("plan has {} rows", plan.len()))?;
    let t_plan = within_budget(start, Duration::from_secs(1))?;

    // the same expansion through the manifest-level stage
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let tiny = Raster::from_fn_gray(4, 4, |x, y| (x * 40 + y * 20) as u8);
    let mut rows = Vec::new();
    for i in 0..1010 {
        let name = format!("img{i:04}.png");
        save_image(&tiny, dir.path().join(&name)).map_err(|e| e.to_string())?;
        rows.push(ManifestRow {
            id: format!("id{i:04}"),
            image_path: name,
            mask_path: String::new(),
            class_label: format!("c{}", i % 50),
            split: if i < 1000 { Split::Train } else { Split::Test },
            angle_deg: 0.0,
        });
    }
    let manifest = Manifest::new(dir.path(), rows).map_err(|e| e.to_string())?;
    let out = cmd_augment(&manifest, &cfg, &dir.path().join("aug")).map_err(|e| e.to_string())?;
    ensure(out.failures.is_empty(), || format!("{} row failures", out.failures.len()))?;
    let reloaded = Manifest::load(&out.manifest_path).map_err(|e| e.to_string())?;
    let (train, test) = (reloaded.count_split(Split::Train), reloaded.count_split(Split::Test));
    ensure((train, test) == (7000, 10), || format!("stage produced {train} train / {test} test rows"))?;
    Ok(format!("angles exact; 1000 train rows -> 7000 (plan {t_plan:.0?}), test rows untouched"))
}

fn random_vec(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn c3_cosine() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d = cosine_distance(&[1.0, 0.0], &[1.0, 1.0]).map_err(|e| e.to_string())?;
    ensure((d - (1.0 - FRAC_1_SQRT_2)).abs() <= 1e-12, || format!("d((1,0),(1,1)) = {d}"))?;
    let mut worst_self = 0.0f64;
    let mut worst_scale = 0.0f64;
    for _ in 0..1000 {
        let dim = rng.random_range(2..64);
        let a = random_vec(&mut rng, dim);
        let b = random_vec(&mut rng, dim);
        let (alpha, beta) = (rng.random_range(1e-2..1e2), rng.random_range(1e-2..1e2));
        let sa: Vec<f64> = a.iter().map(|v| v * alpha).collect();
        let sb: Vec<f64> = b.iter().map(|v| v * beta).collect();
        let base = cosine_distance(&a, &b).map_err(|e| e.to_string())?;
        let scaled = cosine_distance(&sa, &sb).map_err(|e| e.to_string())?;
        worst_self = worst_self.max(cosine_distance(&a, &a).map_err(|e| e.to_string())?.abs());
        worst_scale = worst_scale.max((base - scaled).abs());
    }
    ensure(worst_self <= 1e-12, || format!("max |d(a,a)| = {worst_self:e}"))?;
    ensure(worst_scale <= 1e-9, || format!("max scale deviation {worst_scale:e}"))?;
    Ok(format!("1-1/sqrt2 exact to 1e-12; max |d(a,a)| {worst_self:.1e}; max scale drift {worst_scale:.1e}"))
}

fn c4_decidability() -> Outcome {
    let d = decidability(&[0.0, 2.0], &[3.0, 5.0]).map_err(|e| e.to_string())?;
    ensure(d == 3.0, || format!("d' = {d}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let g: Vec<f64> = (0..rng.random_range(2..200)).map(|_| rng.random_range(0.0..1.0)).collect();
        let i: Vec<f64> = (0..rng.random_range(2..200)).map(|_| rng.random_range(0.3..1.5)).collect();
        let scale = rng.random_range(0.1..10.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let shift = rng.random_range(-100.0..100.0);
        let f = |v: &Vec<f64>| v.iter().map(|x| scale * x + shift).collect::<Vec<_>>();
        let base = decidability(&g, &i).map_err(|e| e.to_string())?;
        let moved = decidability(&f(&g), &f(&i)).map_err(|e| e.to_string())?;
        worst = worst.max((base - moved).abs());
    }
    ensure(worst <= 1e-9, || format!("affine drift {worst:e}"))?;
    Ok(format!("d' = 3 exactly; max affine drift {worst:.1e} over 100 sets"))
}

fn c5_eer_gaussian() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n01 = Normal::new(0.0, 1.0).unwrap();
    let genuine: Vec<f64> = (0..10_000).map(|_| n01.sample(&mut rng)).collect();
    let impostor: Vec<f64> = (0..10_000).map(|_| 2.0 + n01.sample(&mut rng)).collect();
    let curve = far_frr_curve(&genuine, &impostor).map_err(|e| e.to_string())?;
    let e = eer(&curve).map_err(|e| e.to_string())?;
    let d = decidability(&genuine, &impostor).map_err(|e| e.to_string())?;
    // FAR(t) = Phi(t-2), FRR(t) = 1-Phi(t): equal at t=1 where both are Phi(-1)
    let expected = StatNormal::new(0.0, 1.0).unwrap().cdf(-1.0);
    ensure((e.eer - expected).abs() <= 0.01, || format!("EER {:.4} vs {expected:.4}", e.eer))?;
    ensure((d - 2.0).abs() <= 0.05, || format!("d' {d:.4}"))?;
    let t = within_budget(start, Duration::from_secs(5))?;
    Ok(format!("EER {:.4} (Phi(-1) = {expected:.4}), d' {d:.4} ({t:.0?})", e.eer))
}

fn c6_rank_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let n01 = Normal::new(0.0, 1.0).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let shift = rng.random_range(0.0..3.0);
        let g: Vec<f64> = (0..rng.random_range(5..300)).map(|_| n01.sample(&mut rng)).collect();
        let i: Vec<f64> = (0..rng.random_range(5..300)).map(|_| shift + n01.sample(&mut rng)).collect();
        let cube = |v: &[f64]| v.iter().map(|x| x * x * x).collect::<Vec<_>>();
        let a = eer(&far_frr_curve(&g, &i).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let b = eer(&far_frr_curve(&cube(&g), &cube(&i)).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        worst = worst.max((a.eer - b.eer).abs());
    }
    ensure(worst <= 1e-12, || format!("EER changed by {worst:e}"))?;
    Ok(format!("max EER change under x^3: {worst:.1e} over 100 sets"))
}

/// Intensity as a function of distance from the center only.
fn ring_image(size: usize, c: f64) -> Raster {
    Raster::from_fn_gray(size, size, |x, y| {
        let d = (x as f64 - c).hypot(y as f64 - c);
        (128.0 + 90.0 * (TAU * d / 16.0).cos()).round() as u8
    })
}

/// Smooth texture with no angular symmetry.
fn swirl_image(size: usize, c: f64) -> Raster {
    Raster::from_fn_gray(size, size, |x, y| {
        let (dx, dy) = (x as f64 - c, c - y as f64);
        let th = dy.atan2(dx);
        let d = dx.hypot(dy);
        let v = 60.0 * th.sin() + 30.0 * (2.0 * th + 1.0).sin() + 20.0 * (5.0 * th + 2.0).sin();
        (128.0 + v * (0.6 + 0.4 * (TAU * d / 40.0).cos())).round().clamp(0.0, 255.0) as u8
    })
}

fn column_shift(a: &Raster, b: &Raster) -> usize {
    let (w, h) = (a.width(), a.height());
    let mean = |r: &Raster| r.pixels().iter().map(|&v| v as f64).sum::<f64>() / (w * h) as f64;
    let (ma, mb) = (mean(a), mean(b));
    (0..w)
        .map(|s| {
            let mut acc = 0.0;
            for y in 0..h {
                for x in 0..w {
                    acc += (a.get(x, y, 0) as f64 - ma) * (b.get((x + s) % w, y, 0) as f64 - mb);
                }
            }
            (s, acc)
        })
        .max_by(|p, q| p.1.total_cmp(&q.1))
        .map(|p| p.0)
        .unwrap()
}

fn c7_rubber_sheet() -> Outcome {
    let start = Instant::now();
    // odd size so the rotation pivot ((w-1)/2) is the eye center
    let (size, c) = (225, 112.0);
    let geom = IrisGeometry {
        inner: Circle::new(c, c, 30.0),
        outer: Circle::new(c, c, 90.0),
        bbox: BoundingBox { x: 22, y: 22, w: 181, h: 181 },
    };
    let rings = ring_image(size, c);
    let swirl = swirl_image(size, c);
    let turned = rotate(&swirl, 45.0);
    let mut notes = Vec::new();
    for (w, h) in [(512, 64), (256, 128)] {
        let sheet = rubber_sheet(&rings, &geom, w, h).map_err(|e| e.to_string())?;
        let mut worst = 0.0f64;
        for y in 0..h {
            let row: Vec<f64> = (0..w).map(|x| sheet.get(x, y, 0) as f64).collect();
            let m = row.iter().sum::<f64>() / w as f64;
            worst = worst.max(row.iter().map(|v| (v - m).abs()).fold(0.0, f64::max));
        }
        ensure(worst <= 2.0, || format!("{w}x{h}: row deviates by {worst}"))?;

        let a = rubber_sheet(&swirl, &geom, w, h).map_err(|e| e.to_string())?;
        let b = rubber_sheet(&turned, &geom, w, h).map_err(|e| e.to_string())?;
        let shift = column_shift(&a, &b);
        let expected = w / 8;
        ensure(shift.abs_diff(expected) <= 1, || format!("{w}x{h}: shift {shift}, expected {expected}"))?;
        notes.push(format!("{w}x{h}: row dev {worst}, shift {shift}/{expected}"));
    }
    let t = within_budget(start, Duration::from_secs(10))?;
    Ok(format!("{} ({t:.0?})", notes.join("; ")))
}

fn annulus(size: usize, cx: f64, cy: f64, r_in: f64, r_out: f64) -> Mask {
    Mask::from_fn(size, size, |x, y| {
        let d = (x as f64 - cx).hypot(y as f64 - cy);
        d > r_in && d <= r_out
    })
}

fn c8_delineation() -> Outcome {
    let g = delineate(&annulus(224, 112.0, 112.0, 30.0, 90.0)).map_err(|e| e.to_string())?;
    let errs = [
        (g.inner.cx - 112.0).hypot(g.inner.cy - 112.0),
        (g.outer.cx - 112.0).hypot(g.outer.cy - 112.0),
        (g.inner.r - 30.0).abs(),
        (g.outer.r - 90.0).abs(),
    ];
    ensure(errs.iter().all(|&e| e <= 1.0), || format!("clean annulus errors {errs:?}"))?;

    // jittered geometry, ragged boundaries and specular holes
    let mut sums = [0.0f64; 4];
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(800 + seed);
        let cx = 112.0 + rng.random_range(-3.0..3.0);
        let cy = 112.0 + rng.random_range(-3.0..3.0);
        let r_in = 30.0 + rng.random_range(-3.0..3.0);
        let r_out = 90.0 + rng.random_range(-3.0..3.0);
        let spots: Vec<(f64, f64, f64)> = (0..3)
            .map(|_| {
                let rr = rng.random_range(r_in + 8.0..r_out - 8.0);
                let th = rng.random_range(0.0..TAU);
                (cx + rr * th.cos(), cy + rr * th.sin(), rng.random_range(1.5..4.0))
            })
            .collect();
        let mut bits = Vec::with_capacity(224 * 224);
        for y in 0..224 {
            for x in 0..224 {
                let (px, py) = (x as f64, y as f64);
                let d = (px - cx).hypot(py - cy);
                let mut on = d > r_in && d <= r_out;
                let near_edge = (d - r_in).abs() < 1.0 || (d - r_out).abs() < 1.0;
                if near_edge && rng.random_bool(0.25) {
                    on = !on;
                }
                if spots.iter().any(|&(sx, sy, sr)| (px - sx).hypot(py - sy) <= sr) {
                    on = false;
                }
                bits.push(on);
            }
        }
        let mask = Mask::new(224, 224, bits).map_err(|e| e.to_string())?;
        let g = delineate(&mask).map_err(|e| format!("seed {seed}: {e}"))?;
        sums[0] += (g.inner.cx - cx).hypot(g.inner.cy - cy);
        sums[1] += (g.outer.cx - cx).hypot(g.outer.cy - cy);
        sums[2] += (g.inner.r - r_in).abs();
        sums[3] += (g.outer.r - r_out).abs();
    }
    let means = sums.map(|s| s / 100.0);
    ensure(means.iter().all(|&m| m < 0.5), || format!("mean errors {means:?}"))?;
    Ok(format!(
        "clean max err {:.3} px; noisy mean err pupil center {:.3}, iris center {:.3}, pupil r {:.3}, iris r {:.3} px",
        errs.iter().cloned().fold(0.0, f64::max),
        means[0],
        means[1],
        means[2],
        means[3]
    ))
}

fn c9_segmentation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for trial in 0..50 {
        let (w, h) = (rng.random_range(1..64), rng.random_range(1..64));
        let channels = if trial % 2 == 0 { 1 } else { 3 };
        let pixels: Vec<u8> = (0..w * h * channels).map(|_| rng.random()).collect();
        let image = Raster::new(w, h, channels, pixels).map_err(|e| e.to_string())?;
        let mask = Mask::new(w, h, (0..w * h).map(|_| rng.random_bool(0.6)).collect()).map_err(|e| e.to_string())?;
        let once = apply_segmentation(&image, &mask).map_err(|e| e.to_string())?;
        for y in 0..h {
            for x in 0..w {
                let expect: &[u8] = if mask.get(x, y) { image.pixel(x, y) } else { &[0, 0, 0][..channels] };
                ensure(once.pixel(x, y) == expect, || format!("trial {trial}: pixel ({x},{y}) wrong"))?;
            }
        }
        let twice = apply_segmentation(&once, &mask).map_err(|e| e.to_string())?;
        ensure(twice == once, || format!("trial {trial}: not idempotent"))?;
    }
    Ok("masked-out pixels exactly 0, unmasked untouched, idempotent on 50 random gray/RGB images".into())
}

fn c10_t_test() -> Outcome {
    let base = [0.25, 0.5, 0.125];
    let a = RunSeries::new("a", base.iter().zip([1.0, 2.0, 3.0]).map(|(b, d)| b + d).collect());
    let b = RunSeries::new("b", base.to_vec());
    let r = paired_t_test(&a, &b, 0.05).map_err(|e| e.to_string())?;
    let t_expected = 2.0 / (1.0 / 3f64.sqrt());
    let p_beta = beta_reg(1.0, 0.5, 2.0 / (2.0 + t_expected * t_expected));
    let p_t = 2.0 * StudentsT::new(0.0, 1.0, 2.0).unwrap().cdf(-t_expected);
    ensure((r.t - 3.4641).abs() <= 1e-3, || format!("t = {}", r.t))?;
    ensure(r.df == 2, || format!("df = {}", r.df))?;
    ensure((r.p - p_beta).abs() <= 1e-3 && (r.p - 0.0742).abs() <= 1e-3, || {
        format!("p = {} vs oracle {p_beta}", r.p)
    })?;
    ensure((p_beta - p_t).abs() < 1e-9, || "oracles disagree".into())?;
    ensure(!r.significant, || "p > 0.05 flagged significant".into())?;
    Ok(format!("t {:.4}, df {}, p {:.4} (oracle {p_beta:.4})", r.t, r.df, r.p))
}

fn read(path: &Path) -> Result<Vec<u8>, String> {
    std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn c11_end_to_end() -> Outcome {
    let fx = fixture_dir();
    let mut config = ExperimentConfig::load(fx.join("config.json")).map_err(|e| e.to_string())?;
    let manifest = Manifest::load(fx.join("manifest.csv")).map_err(|e| e.to_string())?;
    ensure(manifest.len() == 12, || format!("fixture has {} rows", manifest.len()))?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;

    let mut reports = Vec::new();
    for name in ["first", "second"] {
        let out = dir.path().join(name);
        let o = cmd_pipeline(&config, &manifest, &out).map_err(|e| e.to_string())?;
        ensure(o.failures.is_empty(), || format!("{} row failures", o.failures.len()))?;
        reports.push((o.report, out));
    }
    let (a, b) = (&reports[0].1, &reports[1].1);
    for f in ["report.json", "run_000/report.json", "run_000/scores.csv", "run_000/det.csv", "embeddings.emb"] {
        ensure(read(&a.join(f))? == read(&b.join(f))?, || format!("{f} differs between runs"))?;
    }
    let separable = reports[0].0.eer.mean;
    ensure(separable == 0.0, || format!("separable fixture EER {separable}"))?;

    // seeded noise must also be reproducible
    config.runs = 3;
    config.embedding_noise = 0.01;
    let n1 = cmd_pipeline(&config, &manifest, &dir.path().join("noisy1")).map_err(|e| e.to_string())?;
    let n2 = cmd_pipeline(&config, &manifest, &dir.path().join("noisy2")).map_err(|e| e.to_string())?;
    ensure(read(&n1.report_path)? == read(&n2.report_path)?, || "noisy reports differ".into())?;

    config.runs = 1;
    config.embedding_noise = 0.0;
    let shuffled = Manifest::load(fx.join("manifest_shuffled.csv")).map_err(|e| e.to_string())?;
    let s = cmd_pipeline(&config, &shuffled, &dir.path().join("shuffled")).map_err(|e| e.to_string())?;
    ensure(s.report.eer.mean >= 0.4, || format!("shuffled EER {}", s.report.eer.mean))?;
    Ok(format!(
        "byte-identical reruns; separable EER {separable}; shuffled EER {:.4}",
        s.report.eer.mean
    ))
}

fn c12_metric_axioms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let dim = 16;
    let variances: Vec<f64> = (0..dim).map(|_| rng.random_range(0.05..3.0)).collect();
    type DistFn<'a> = Box<dyn Fn(&[f64], &[f64]) -> f64 + 'a>;
    let metrics: Vec<(&str, DistFn)> = vec![
        ("cosine", Box::new(|a, b| cosine_distance(a, b).unwrap())),
        ("euclidean", Box::new(|a, b| euclidean_distance(a, b).unwrap())),
        ("manhattan", Box::new(|a, b| manhattan_distance(a, b).unwrap())),
        ("mahalanobis", Box::new(|a, b| mahalanobis_distance(a, b, &variances).unwrap())),
        ("jaccard", Box::new(|a, b| jaccard_distance(a, b).unwrap())),
    ];
    let vectors: Vec<Vec<f64>> = (0..1000).map(|_| random_vec(&mut rng, dim)).collect();
    let mut worst: HashMap<&str, (f64, f64, f64)> = HashMap::new();
    for (name, d) in &metrics {
        let entry = worst.entry(name).or_default();
        for (k, a) in vectors.iter().enumerate() {
            let b = &vectors[(k * 7 + 3) % vectors.len()];
            entry.0 = entry.0.max(d(a, a).abs());
            entry.1 = entry.1.max((d(a, b) - d(b, a)).abs());
        }
        ensure(entry.0 <= 1e-12 && entry.1 <= 1e-12, || {
            format!("{name}: identity {:e}, symmetry {:e}", entry.0, entry.1)
        })?;
        if matches!(*name, "euclidean" | "manhattan" | "mahalanobis") {
            for k in 0..1000 {
                let (a, b, c) = (&vectors[k], &vectors[(k + 1) % 1000], &vectors[(k * 13 + 5) % 1000]);
                entry.2 = entry.2.max(d(a, c) - d(a, b) - d(b, c));
            }
            ensure(entry.2 <= 1e-9, || format!("{name}: triangle violated by {:e}", entry.2))?;
        }
    }
    let a = random_vec(&mut rng, dim);
    let a2: Vec<f64> = a.iter().map(|v| 2.0 * v).collect();
    let d = cosine_distance(&a, &a2).map_err(|e| e.to_string())?;
    ensure(a != a2 && d.abs() <= 1e-12, || format!("cosine d(a,2a) = {d}"))?;
    Ok(format!("identity+symmetry for 5 distances, triangle for 3, cosine d(a,2a) = {d:.1e} with a != 2a"))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("pair-protocol arithmetic", c1_pair_protocol),
        ("augmentation expansion", c2_augmentation),
        ("cosine distance", c3_cosine),
        ("decidability", c4_decidability),
        ("EER on Gaussian scores", c5_eer_gaussian),
        ("EER rank invariance", c6_rank_invariance),
        ("rubber sheet", c7_rubber_sheet),
        ("delineation", c8_delineation),
        ("segmentation", c9_segmentation),
        ("paired t-test", c10_t_test),
        ("end-to-end determinism", c11_end_to_end),
        ("metric axioms", c12_metric_axioms),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
