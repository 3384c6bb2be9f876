//! Synthetic dataset generators and the flat dataset file format.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng;

use crate::dataset::Dataset;
use crate::error::{invalid, Result};
use crate::rng::seeded_rng;

pub const PARETO_SHAPE: f64 = 1.5;
pub const PARETO_SCALE: f64 = 2000.0;

/// Income-like data: continuous Pareto(shape 1.5, scale 2000) samples via the
/// inverse-CDF transform `scale * U^(-1/shape)`, rounded to the nearest
/// integer and clipped into `[1, B]`. Heavy tails put a point mass at `B`.
pub fn gen_pareto(n: usize, domain_size: u32, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(invalid("n must be >= 1"));
    }
    let mut rng = seeded_rng(seed);
    let values = (0..n)
        .map(|_| {
            let u: f64 = 1.0 - rng.gen::<f64>(); // (0, 1]
            let x = PARETO_SCALE * u.powf(-1.0 / PARETO_SHAPE);
            (x.round() as u64).clamp(1, domain_size as u64) as u32
        })
        .collect();
    Dataset::new(values, domain_size)
}

/// Uniform integers over a random interval `[l, r]`: the endpoints are an
/// unordered uniform pair, so the median's position carries no prior hint.
pub fn gen_uniform_interval(n: usize, domain_size: u32, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(invalid("n must be >= 1"));
    }
    let mut rng = seeded_rng(seed);
    let a = rng.gen_range(1..=domain_size);
    let b = rng.gen_range(1..=domain_size);
    let (l, r) = (a.min(b), a.max(b));
    let values = (0..n).map(|_| rng.gen_range(l..=r)).collect();
    Dataset::new(values, domain_size)
}

/// Writes the plain-text dataset format: first line `# B=<int>`, then one
/// value per line.
pub fn write_dataset(ds: &Dataset, path: &Path) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "# B={}", ds.domain_size())?;
    for v in ds.values() {
        writeln!(out, "{v}")?;
    }
    out.flush()
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path)
        .map_err(|e| invalid(format!("cannot open {}: {e}", path.display())))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| invalid("empty dataset file"))?
        .map_err(|e| invalid(format!("read error: {e}")))?;
    let b: u32 = header
        .trim()
        .strip_prefix("# B=")
        .ok_or_else(|| invalid("dataset file must start with `# B=<int>`"))?
        .trim()
        .parse()
        .map_err(|_| invalid("bad B in dataset header"))?;
    let mut values = Vec::new();
    for line in lines {
        let line = line.map_err(|e| invalid(format!("read error: {e}")))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        values.push(
            t.parse::<u32>()
                .map_err(|_| invalid(format!("bad value line {t:?}")))?,
        );
    }
    Dataset::new(values, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pareto_in_range_and_deterministic() {
        let b = 262_144u32;
        let d1 = gen_pareto(2500, b, 7).unwrap();
        let d2 = gen_pareto(2500, b, 7).unwrap();
        assert_eq!(d1.values(), d2.values());
        assert!(d1.values().iter().all(|&v| (1..=b).contains(&v)));
        assert_ne!(gen_pareto(2500, b, 8).unwrap().values(), d1.values());
    }

    #[test]
    fn pareto_tail_mass_at_clip() {
        // Pr[X > B] = (scale/B)^shape; the clipped mass at B should not fall
        // more than ~3 sigma below it.
        let b = 262_144u32;
        let n = 2500usize;
        let d = gen_pareto(n, b, 123).unwrap();
        let mass = d.values().iter().filter(|&&v| v == b).count() as f64 / n as f64;
        let p = (PARETO_SCALE / b as f64).powf(PARETO_SHAPE);
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!(mass >= p - 3.0 * sigma, "mass {mass} vs tail {p}");
    }

    #[test]
    fn pareto_min_is_above_scale_before_clip() {
        // Raw samples are >= scale, so small domains degenerate to all-B.
        let d = gen_pareto(100, 16, 5).unwrap();
        assert!(d.values().iter().all(|&v| v == 16));
    }

    #[test]
    fn uniform_interval_stays_inside() {
        let d = gen_uniform_interval(5000, 1000, 3).unwrap();
        let lo = *d.values().iter().min().unwrap();
        let hi = *d.values().iter().max().unwrap();
        assert!(lo >= 1 && hi <= 1000);
        // Empirical median close to the interval midpoint.
        let mut sorted = d.values().to_vec();
        sorted.sort_unstable();
        let med = sorted[2500] as f64;
        let mid = (lo + hi) as f64 / 2.0;
        let slack = 4.0 * (hi - lo) as f64 / (5000f64).sqrt();
        assert!((med - mid).abs() <= slack.max(1.0), "median {med} vs {mid}");
    }

    #[test]
    fn degenerate_interval_gives_constant_data() {
        // Seed search for l == r.
        let mut found = false;
        for seed in 0..500 {
            let d = gen_uniform_interval(50, 8, seed).unwrap();
            let lo = *d.values().iter().min().unwrap();
            let hi = *d.values().iter().max().unwrap();
            if lo == hi {
                found = true;
                break;
            }
        }
        assert!(found, "no constant dataset in 500 seeds");
    }

    #[test]
    fn dataset_file_round_trip() {
        let d = gen_uniform_interval(200, 64, 9).unwrap();
        let dir = std::env::temp_dir().join(format!("ldpq-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("data.txt");
        write_dataset(&d, &path).unwrap();
        let back = read_dataset(&path).unwrap();
        assert_eq!(back.values(), d.values());
        assert_eq!(back.domain_size(), 64);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn read_rejects_bad_files() {
        let dir = std::env::temp_dir().join(format!("ldpq-test-bad-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.txt");
        std::fs::write(&path, "1\n2\n").unwrap();
        assert!(read_dataset(&path).is_err());
        std::fs::write(&path, "# B=4\n9\n").unwrap();
        assert!(read_dataset(&path).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }
}
