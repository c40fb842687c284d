//! Duration records, empirical statistics, and scenario sampling.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::domain::{Instance, Scenario, SurgeryType, SUPPORT_TOL};
use crate::error::CoreError;

pub const DURATION_HEADER: [&str; 2] = ["specialty", "duration_min"];

/// Draws before the lognormal sampler gives up and clamps.
pub const LOGNORMAL_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DurationDataset {
    pub records: Vec<(String, f64)>,
    by_type: BTreeMap<String, Vec<f64>>,
}

impl DurationDataset {
    pub fn new(records: Vec<(String, f64)>) -> Self {
        let mut by_type: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for (s, d) in &records {
            by_type.entry(s.clone()).or_default().push(*d);
        }
        Self { records, by_type }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Durations of one specialty in file order.
    pub fn durations(&self, specialty: &str) -> &[f64] {
        self.by_type.get(specialty).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn specialties(&self) -> impl Iterator<Item = &str> {
        self.by_type.keys().map(String::as_str)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(DURATION_HEADER).expect("in-memory write");
        for (s, d) in &self.records {
            w.write_record([s.as_str(), &format!("{d}")]).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

/// A parsed dataset together with non-fatal remarks (for example an empty
/// file).
#[derive(Debug, Clone)]
pub struct Loaded {
    pub dataset: DurationDataset,
    pub warnings: Vec<String>,
}

pub fn load_duration_records(path: &Path, registry: Option<&[String]>) -> Result<Loaded, CoreError> {
    let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
    parse_duration_records(&text, &path.display().to_string(), registry)
}

/// Parses `specialty,duration_min` CSV text. `origin` labels errors.
pub fn parse_duration_records(
    text: &str,
    origin: &str,
    registry: Option<&[String]>,
) -> Result<Loaded, CoreError> {
    let perr = |line: usize, msg: String| CoreError::Parse { path: origin.to_string(), line, msg };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| perr(1, e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != DURATION_HEADER {
        return Err(perr(1, format!("expected header `{}`", DURATION_HEADER.join(","))));
    }
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            perr(line, e.to_string())
        })?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let (spec, dur) = (&row[0], &row[1]);
        let d: f64 = dur.parse().map_err(|_| perr(line, format!("unparseable duration `{dur}`")))?;
        if !(d.is_finite() && d > 0.0) {
            return Err(perr(line, format!("duration must be positive, got {d}")));
        }
        if let Some(reg) = registry {
            if !reg.iter().any(|r| r == spec) {
                return Err(perr(line, format!("unknown specialty `{spec}`")));
            }
        }
        records.push((spec.to_string(), d));
    }
    let mut warnings = Vec::new();
    if records.is_empty() {
        warnings.push(format!("{origin}: no records"));
    }
    Ok(Loaded { dataset: DurationDataset::new(records), warnings })
}

/// Per-specialty mean, sample standard deviation, range and share, sorted by
/// specialty name.
pub fn empirical_stats(ds: &DurationDataset) -> Result<Vec<SurgeryType>, CoreError> {
    let total = ds.len() as f64;
    ds.by_type
        .iter()
        .map(|(name, xs)| {
            if xs.len() < 2 {
                return Err(CoreError::Config(format!(
                    "specialty {name} has {} record(s); at least 2 are needed",
                    xs.len()
                )));
            }
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Ok(SurgeryType {
                name: name.clone(),
                mean_duration: mean,
                sd_duration: var.sqrt(),
                d_lo: lo,
                d_hi: hi,
                mix_fraction: n / total,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DurationSampler {
    EmpiricalResample,
    Lognormal,
    PointMass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmergencySampler {
    TruncatedExponential,
    /// Resamples elective durations of the block's specialty.
    EmpiricalResample,
    PointMass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub kind: DurationSampler,
    pub emergency_kind: EmergencySampler,
    pub seed: u64,
    #[serde(rename = "N")]
    pub n: usize,
}

impl SamplerSpec {
    pub fn new(kind: DurationSampler, emergency_kind: EmergencySampler, seed: u64, n: usize) -> Self {
        Self { kind, emergency_kind, seed, n }
    }

    pub fn label(&self) -> String {
        format!("{:?}/{:?}", self.kind, self.emergency_kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub scenarios: Vec<Scenario>,
    pub seed: Option<u64>,
    pub source: String,
}

impl ScenarioSet {
    pub fn new(scenarios: Vec<Scenario>, source: impl Into<String>) -> Self {
        Self { scenarios, seed: None, source: source.into() }
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    /// Tidy CSV: `scenario_index,kind,entity_index,value_min`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scenario_index,kind,entity_index,value_min\n");
        for (n, s) in self.scenarios.iter().enumerate() {
            for (i, d) in s.d.iter().enumerate() {
                let _ = writeln!(out, "{n},d,{i},{d}");
            }
            for (b, e) in s.e.iter().enumerate() {
                let _ = writeln!(out, "{n},e,{b},{e}");
            }
        }
        out
    }

    /// Reads the tidy CSV for an instance with `i` surgeries and `b` blocks.
    /// Every cell must be present exactly once.
    pub fn from_csv(text: &str, origin: &str, i: usize, b: usize) -> Result<Self, CoreError> {
        let perr = |line: usize, msg: String| CoreError::Parse { path: origin.to_string(), line, msg };
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header = rdr.headers().map_err(|e| perr(1, e.to_string()))?.clone();
        if header.iter().collect::<Vec<_>>() != ["scenario_index", "kind", "entity_index", "value_min"] {
            return Err(perr(1, "expected header `scenario_index,kind,entity_index,value_min`".into()));
        }
        let mut cells: BTreeMap<usize, (Vec<Option<f64>>, Vec<Option<f64>>)> = BTreeMap::new();
        for row in rdr.records() {
            let row = row.map_err(|e| perr(0, e.to_string()))?;
            let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
            let n: usize = row[0].parse().map_err(|_| perr(line, "bad scenario_index".into()))?;
            let k: usize = row[2].parse().map_err(|_| perr(line, "bad entity_index".into()))?;
            let v: f64 = row[3].parse().map_err(|_| perr(line, "bad value_min".into()))?;
            let entry = cells.entry(n).or_insert_with(|| (vec![None; i], vec![None; b]));
            let slot = match &row[1] {
                "d" if k < i => &mut entry.0[k],
                "e" if k < b => &mut entry.1[k],
                other => return Err(perr(line, format!("bad kind/index `{other}`,{k}"))),
            };
            if slot.replace(v).is_some() {
                return Err(perr(line, "duplicate cell".into()));
            }
        }
        let mut scenarios = Vec::with_capacity(cells.len());
        for (expect, (n, (d, e))) in cells.into_iter().enumerate() {
            if n != expect {
                return Err(perr(0, format!("scenario {expect} missing")));
            }
            let d: Option<Vec<f64>> = d.into_iter().collect();
            let e: Option<Vec<f64>> = e.into_iter().collect();
            match (d, e) {
                (Some(d), Some(e)) => scenarios.push(Scenario { d, e }),
                _ => return Err(perr(0, format!("scenario {n} is incomplete"))),
            }
        }
        Ok(Self::new(scenarios, origin))
    }

    pub fn load(path: &Path, inst: &Instance) -> Result<Self, CoreError> {
        let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
        let set = Self::from_csv(&text, &path.display().to_string(), inst.num_surgeries(), inst.num_blocks())?;
        for s in &set.scenarios {
            crate::domain::check_scenario(inst, s)?;
        }
        Ok(set)
    }

    /// Per-coordinate sample means.
    pub fn means(&self) -> Scenario {
        let n = self.len().max(1) as f64;
        let mut m = Scenario { d: Vec::new(), e: Vec::new() };
        if let Some(first) = self.scenarios.first() {
            m.d = vec![0.0; first.d.len()];
            m.e = vec![0.0; first.e.len()];
        }
        for s in &self.scenarios {
            m.d.iter_mut().zip(&s.d).for_each(|(a, x)| *a += x / n);
            m.e.iter_mut().zip(&s.e).for_each(|(a, x)| *a += x / n);
        }
        m
    }
}

/// Exponential distribution truncated to `[lo, hi]` with a prescribed mean.
/// The rate may be negative (an increasing density) so any mean strictly
/// inside the interval is reachable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedExp {
    pub lo: f64,
    pub hi: f64,
    /// Rate per minute; zero means uniform.
    pub rate: f64,
}

impl TruncatedExp {
    pub fn with_mean(lo: f64, hi: f64, mean: f64) -> Result<Self, CoreError> {
        if !(lo <= mean && mean <= hi) {
            return Err(CoreError::Config(format!("emergency mean {mean} outside [{lo}, {hi}]")));
        }
        let w = hi - lo;
        let t = mean - lo;
        if w <= 0.0 {
            return Ok(Self { lo, hi, rate: 0.0 });
        }
        if t <= 0.0 {
            return Ok(Self { lo, hi, rate: f64::INFINITY });
        }
        if t >= w {
            return Ok(Self { lo, hi, rate: f64::NEG_INFINITY });
        }
        // Mean offset is decreasing in the rate; bracket then bisect.
        let mut a = -1.0 / w;
        let mut b = 1.0 / w;
        while trunc_exp_mean(a, w) < t {
            a *= 2.0;
        }
        while trunc_exp_mean(b, w) > t {
            b *= 2.0;
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if trunc_exp_mean(m, w) > t {
                a = m;
            } else {
                b = m;
            }
        }
        Ok(Self { lo, hi, rate: 0.5 * (a + b) })
    }

    pub fn mean(&self) -> f64 {
        let w = self.hi - self.lo;
        if self.rate == f64::INFINITY || w <= 0.0 {
            self.lo
        } else if self.rate == f64::NEG_INFINITY {
            self.hi
        } else {
            self.lo + trunc_exp_mean(self.rate, w)
        }
    }

    /// Inverse-CDF draw from a uniform `u` in `[0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let w = self.hi - self.lo;
        if w <= 0.0 || self.rate == f64::INFINITY {
            return self.lo;
        }
        if self.rate == f64::NEG_INFINITY {
            return self.hi;
        }
        let x = if self.rate.abs() * w < 1e-12 {
            u * w
        } else if self.rate > 0.0 {
            unit_trunc_exp_quantile(self.rate, w, u)
        } else {
            w - unit_trunc_exp_quantile(-self.rate, w, 1.0 - u)
        };
        (self.lo + x).clamp(self.lo, self.hi)
    }
}

fn unit_trunc_exp_quantile(rate: f64, w: f64, u: f64) -> f64 {
    // F(x) = (1 - e^{-rate x}) / (1 - e^{-rate w})
    let mass = -(-rate * w).exp_m1();
    -(-u * mass).ln_1p() / rate
}

/// Mean of `exp(-rate x)` on `[0, w]`, normalized.
fn trunc_exp_mean(rate: f64, w: f64) -> f64 {
    let z = rate * w;
    if z.abs() < 1e-2 {
        return w * (0.5 - z / 12.0 + z.powi(3) / 720.0);
    }
    if rate < 0.0 {
        return w - trunc_exp_mean(-rate, w);
    }
    if z > 700.0 {
        return 1.0 / rate;
    }
    1.0 / rate - w / z.exp_m1()
}

/// Per-scenario generator: the stream is the scenario index, so scenario `n`
/// does not depend on how many scenarios precede it.
pub fn scenario_rng(seed: u64, n: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(n as u64);
    rng
}

struct Samplers<'a> {
    d: Vec<DSampler<'a>>,
    e: Vec<ESampler<'a>>,
}

enum DSampler<'a> {
    Point(f64),
    Resample(&'a [f64], f64, f64),
    Logn(LogNormal<f64>, f64, f64),
}

enum ESampler<'a> {
    Point(f64),
    Exp(TruncatedExp),
    Resample(&'a [f64], f64, f64),
}

fn build_samplers<'a>(
    inst: &Instance,
    spec: &SamplerSpec,
    data: Option<&'a DurationDataset>,
) -> Result<Samplers<'a>, CoreError> {
    let need_data = || {
        data.ok_or_else(|| CoreError::Config("empirical resampling needs a duration dataset".into()))
    };
    let mut d = Vec::with_capacity(inst.num_surgeries());
    for i in 0..inst.num_surgeries() {
        let t = inst.surgery_type(i)?;
        if !(t.d_lo <= t.mean_duration && t.mean_duration <= t.d_hi) {
            return Err(CoreError::Config(format!("type {} mean outside its support", t.name)));
        }
        d.push(match spec.kind {
            DurationSampler::PointMass => DSampler::Point(t.mean_duration),
            DurationSampler::EmpiricalResample => {
                let xs = need_data()?.durations(&t.name);
                if xs.is_empty() {
                    return Err(CoreError::Config(format!("no records for type {}", t.name)));
                }
                DSampler::Resample(xs, t.d_lo, t.d_hi)
            }
            DurationSampler::Lognormal if t.sd_duration <= 0.0 => DSampler::Point(t.mean_duration),
            DurationSampler::Lognormal => {
                let ln = LogNormal::from_mean_cv(t.mean_duration, t.sd_duration / t.mean_duration)
                    .map_err(|e| CoreError::Config(format!("lognormal for {}: {e}", t.name)))?;
                DSampler::Logn(ln, t.d_lo, t.d_hi)
            }
        });
    }
    let mut e = Vec::with_capacity(inst.num_blocks());
    for k in &inst.blocks {
        if !(k.e_lo <= k.e_mean && k.e_mean <= k.e_hi) {
            return Err(CoreError::Config(format!("block {} emergency mean outside its support", k.id)));
        }
        e.push(match spec.emergency_kind {
            EmergencySampler::PointMass => ESampler::Point(k.e_mean),
            EmergencySampler::TruncatedExponential => {
                ESampler::Exp(TruncatedExp::with_mean(k.e_lo, k.e_hi, k.e_mean)?)
            }
            EmergencySampler::EmpiricalResample => {
                let xs = need_data()?.durations(&k.specialty);
                if xs.is_empty() {
                    return Err(CoreError::Config(format!("no records for specialty {}", k.specialty)));
                }
                ESampler::Resample(xs, k.e_lo, k.e_hi)
            }
        });
    }
    Ok(Samplers { d, e })
}

fn draw_scenario(s: &Samplers, rng: &mut ChaCha8Rng) -> Scenario {
    let d = s
        .d
        .iter()
        .map(|smp| match smp {
            DSampler::Point(v) => *v,
            DSampler::Resample(xs, lo, hi) => xs[rng.random_range(0..xs.len())].clamp(*lo, *hi),
            DSampler::Logn(ln, lo, hi) => {
                let mut x = ln.sample(rng);
                for _ in 1..LOGNORMAL_ATTEMPTS {
                    if (*lo..=*hi).contains(&x) {
                        break;
                    }
                    x = ln.sample(rng);
                }
                x.clamp(*lo, *hi)
            }
        })
        .collect();
    let e = s
        .e
        .iter()
        .map(|smp| match smp {
            ESampler::Point(v) => *v,
            ESampler::Exp(t) => t.quantile(rng.random::<f64>()),
            ESampler::Resample(xs, lo, hi) => xs[rng.random_range(0..xs.len())].clamp(*lo, *hi),
        })
        .collect();
    Scenario { d, e }
}

/// Draws `spec.n` scenarios. Output depends only on `(inst, spec, data)`.
pub fn sample_scenarios(
    inst: &Instance,
    spec: &SamplerSpec,
    data: Option<&DurationDataset>,
) -> Result<ScenarioSet, CoreError> {
    if spec.n == 0 {
        return Err(CoreError::Config("N must be at least 1".into()));
    }
    let samplers = build_samplers(inst, spec, data)?;
    let scenarios = (0..spec.n)
        .map(|n| draw_scenario(&samplers, &mut scenario_rng(spec.seed, n)))
        .collect();
    Ok(ScenarioSet { scenarios, seed: Some(spec.seed), source: spec.label() })
}

/// Same as [`sample_scenarios`], drawing scenarios on the rayon pool.
pub fn sample_scenarios_par(
    inst: &Instance,
    spec: &SamplerSpec,
    data: Option<&DurationDataset>,
) -> Result<ScenarioSet, CoreError> {
    use rayon::prelude::*;
    if spec.n == 0 {
        return Err(CoreError::Config("N must be at least 1".into()));
    }
    let samplers = build_samplers(inst, spec, data)?;
    let scenarios = (0..spec.n)
        .into_par_iter()
        .map(|n| draw_scenario(&samplers, &mut scenario_rng(spec.seed, n)))
        .collect();
    Ok(ScenarioSet { scenarios, seed: Some(spec.seed), source: spec.label() })
}

/// Table 2 of the reference study: name, share in percent, mean and standard
/// deviation in minutes.
pub const PAPER_DURATION_TABLE: [(&str, f64, f64, f64); 6] = [
    ("CARD", 14.01, 99.0, 53.0),
    ("GASTRO", 17.79, 132.0, 76.0),
    ("GYN", 27.81, 78.0, 52.0),
    ("MED", 4.41, 75.0, 72.0),
    ("ORTH", 17.81, 142.0, 58.0),
    ("URO", 17.98, 72.0, 38.0),
];

pub const PAPER_RECORD_COUNT: usize = 10_390;

/// Range the synthetic records are confined to.
pub const SYNTHETIC_RANGE: (f64, f64) = (10.0, 480.0);

/// Stand-in for the historical records: lognormal draws matching the table's
/// mean and standard deviation, kept inside [`SYNTHETIC_RANGE`] by
/// rejection, with counts split by the (renormalized) shares.
pub fn synthetic_duration_dataset(seed: u64, total: usize) -> DurationDataset {
    let share_sum: f64 = PAPER_DURATION_TABLE.iter().map(|r| r.1).sum();
    let mut counts: Vec<usize> = PAPER_DURATION_TABLE
        .iter()
        .map(|r| (r.1 / share_sum * total as f64).round() as usize)
        .collect();
    // Put any rounding residue on the largest class.
    let assigned: usize = counts.iter().sum();
    let big = (0..counts.len()).max_by_key(|&k| counts[k]).unwrap_or(0);
    counts[big] = (counts[big] + total).saturating_sub(assigned);

    let (lo, hi) = SYNTHETIC_RANGE;
    let mut records = Vec::with_capacity(total);
    for (k, (name, _, mean, sd)) in PAPER_DURATION_TABLE.iter().enumerate() {
        let ln = LogNormal::from_mean_cv(*mean, sd / mean).expect("table parameters are valid");
        let mut rng = scenario_rng(seed, k);
        for _ in 0..counts[k] {
            let mut x = ln.sample(&mut rng);
            while !(lo..=hi).contains(&x) {
                x = ln.sample(&mut rng);
            }
            records.push((name.to_string(), (x * 10.0).round() / 10.0));
        }
    }
    DurationDataset::new(records)
}

/// `true` when `v` lies in `[lo, hi]` up to [`SUPPORT_TOL`].
pub fn in_support(v: f64, lo: f64, hi: f64) -> bool {
    v >= lo - SUPPORT_TOL && v <= hi + SUPPORT_TOL
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_three_rows() {
        let l = parse_duration_records("specialty,duration_min\nA,10\nA,20\nB,5.5\n", "t", None).unwrap();
        assert_eq!(l.dataset.len(), 3);
        assert!(l.warnings.is_empty());
    }

    #[test]
    fn bad_duration_cites_line() {
        let e = parse_duration_records("specialty,duration_min\nA,abc\n", "t", None).unwrap_err();
        match e {
            CoreError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn header_only_warns() {
        let l = parse_duration_records("specialty,duration_min\n", "t", None).unwrap();
        assert!(l.dataset.is_empty());
        assert_eq!(l.warnings.len(), 1);
    }

    #[test]
    fn unknown_specialty_with_registry() {
        let reg = vec!["A".to_string()];
        assert!(parse_duration_records("specialty,duration_min\nB,3\n", "t", Some(&reg)).is_err());
    }

    #[test]
    fn constant_records() {
        let ds = DurationDataset::new(vec![("A".into(), 60.0); 3]);
        let t = &empirical_stats(&ds).unwrap()[0];
        assert_eq!((t.mean_duration, t.sd_duration, t.d_lo, t.d_hi), (60.0, 0.0, 60.0, 60.0));
    }

    #[test]
    fn single_record_type_is_an_error() {
        let ds = DurationDataset::new(vec![("A".into(), 60.0)]);
        assert!(empirical_stats(&ds).is_err());
    }

    #[test]
    fn truncated_exponential_hits_its_mean() {
        for (lo, hi, m) in [(0.0, 396.0, 132.0), (0.0, 480.0, 264.0), (10.0, 20.0, 15.0), (0.0, 1.0, 0.01)] {
            let t = TruncatedExp::with_mean(lo, hi, m).unwrap();
            assert!((t.mean() - m).abs() < 1e-9 * (1.0 + m), "{lo} {hi} {m} -> {}", t.mean());
            assert_eq!(t.quantile(0.0), lo);
            assert!((t.quantile(1.0) - hi).abs() < 1e-6 * (hi - lo));
        }
    }

    #[test]
    fn synthetic_dataset_has_paper_size() {
        let ds = synthetic_duration_dataset(1, PAPER_RECORD_COUNT);
        assert_eq!(ds.len(), PAPER_RECORD_COUNT);
        assert_eq!(ds.specialties().count(), 6);
    }
}
