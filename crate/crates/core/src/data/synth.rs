use ndarray::Array2;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::Dataset;
use crate::{Error, Result};

/// Which polynomial ground truth to sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthVariant {
    /// `y = x^6 + 0.3`, one feature.
    Synth1D,
    /// `y = -x1 + x2^6 + x2^3 + 0.3`, two features.
    Synth2D,
}

impl SynthVariant {
    pub fn n_features(self) -> usize {
        match self {
            SynthVariant::Synth1D => 1,
            SynthVariant::Synth2D => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SynthVariant::Synth1D => "synth-1d",
            SynthVariant::Synth2D => "synth-2d",
        }
    }

    pub fn default_n(self) -> usize {
        match self {
            SynthVariant::Synth1D => 300,
            SynthVariant::Synth2D => 1000,
        }
    }
}

impl std::str::FromStr for SynthVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "synth-1d" | "synth1d" | "1d" => Ok(SynthVariant::Synth1D),
            "synth-2d" | "synth2d" | "2d" => Ok(SynthVariant::Synth2D),
            other => Err(Error::Parse(format!("unknown synthetic variant {other:?}"))),
        }
    }
}

/// Evaluates the noiseless ground truth at `x`.
pub fn ground_truth(variant: SynthVariant, x: &[f64]) -> f64 {
    match variant {
        SynthVariant::Synth1D => x[0].powi(6) + 0.3,
        SynthVariant::Synth2D => -x[0] + x[1].powi(6) + x[1].powi(3) + 0.3,
    }
}

/// Feature sampling: a truncated Gaussian cluster mixed with a uniform
/// background over the unit cube.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasMixture {
    pub cluster_fraction: f64,
    /// One entry per feature, or a single entry broadcast to all features.
    pub cluster_center: Vec<f64>,
    pub cluster_sigma: f64,
}

impl Default for BiasMixture {
    fn default() -> Self {
        Self {
            cluster_fraction: 0.8,
            cluster_center: vec![0.35],
            cluster_sigma: 0.08,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub variant: SynthVariant,
    pub n: usize,
    pub noise_sigma: f64,
    pub corrupt_fraction: f64,
    pub bias: BiasMixture,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(variant: SynthVariant, seed: u64) -> Self {
        let bias = match variant {
            SynthVariant::Synth1D => BiasMixture::default(),
            // Targets cross zero near (0.35, 0.35) for this ground truth, which
            // makes percentage errors meaningless; sit the cluster where y > 0.
            SynthVariant::Synth2D => BiasMixture {
                cluster_center: vec![0.2, 0.65],
                ..BiasMixture::default()
            },
        };
        Self {
            variant,
            n: variant.default_n(),
            noise_sigma: 0.05,
            corrupt_fraction: 0.05,
            bias,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.variant.n_features();
        if self.n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidArgument("noise_sigma must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.corrupt_fraction) {
            return Err(Error::InvalidArgument(
                "corrupt_fraction must be in [0, 1)".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.bias.cluster_fraction) {
            return Err(Error::InvalidArgument(
                "cluster_fraction must be in [0, 1]".into(),
            ));
        }
        if !(self.bias.cluster_sigma > 0.0 && self.bias.cluster_sigma.is_finite()) {
            return Err(Error::InvalidArgument("cluster_sigma must be > 0".into()));
        }
        let c = self.bias.cluster_center.len();
        if c != 1 && c != m {
            return Err(Error::InvalidArgument(format!(
                "cluster_center has {c} entries, expected 1 or {m}"
            )));
        }
        Ok(())
    }

    fn center(&self, k: usize) -> f64 {
        let c = &self.bias.cluster_center;
        if c.len() == 1 {
            c[0]
        } else {
            c[k]
        }
    }
}

/// Generates a skewed synthetic regression dataset.
pub fn generate_synth(spec: &SynthSpec) -> Result<Dataset> {
    generate_synth_traced(spec).map(|(d, _)| d)
}

/// Like [`generate_synth`], also returning the sorted indices of corrupted
/// samples.
pub fn generate_synth_traced(spec: &SynthSpec) -> Result<(Dataset, Vec<usize>)> {
    spec.validate()?;
    let m = spec.variant.n_features();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise =
        Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;

    let mut x = Array2::zeros((spec.n, m));
    let mut y = Array2::zeros((spec.n, 1));
    for i in 0..spec.n {
        let clustered = rng.random::<f64>() < spec.bias.cluster_fraction;
        for k in 0..m {
            x[[i, k]] = if clustered {
                truncated_normal(&mut rng, spec.center(k), spec.bias.cluster_sigma)
            } else {
                rng.random::<f64>()
            };
        }
        let row: Vec<f64> = x.row(i).to_vec();
        y[[i, 0]] = ground_truth(spec.variant, &row) + noise.sample(&mut rng);
    }

    let n_corrupt = (spec.corrupt_fraction * spec.n as f64).round() as usize;
    let mut corrupted = index::sample(&mut rng, spec.n, n_corrupt).into_vec();
    corrupted.sort_unstable();
    if n_corrupt > 0 {
        let (lo, hi) = y
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        for &i in &corrupted {
            y[[i, 0]] = lo + (hi - lo) * rng.random::<f64>();
        }
    }

    let names = (1..=m).map(|k| format!("x{k}")).collect();
    let d = Dataset::new(x, y)?.with_names(names, vec!["y".into()])?;
    Ok((d, corrupted))
}

fn truncated_normal<R: Rng>(rng: &mut R, center: f64, sigma: f64) -> f64 {
    let dist = Normal::new(center, sigma).expect("sigma validated positive");
    for _ in 0..1000 {
        let v = dist.sample(rng);
        if (0.0..=1.0).contains(&v) {
            return v;
        }
    }
    center.clamp(0.0, 1.0)
}

/// Two Gaussian clusters in the plane with a rare positive class and
/// flipped labels.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySynthSpec {
    pub n: usize,
    pub positive_fraction: f64,
    pub label_noise: f64,
    pub negative_center: [f64; 2],
    pub positive_center: [f64; 2],
    pub cluster_sigma: f64,
    pub seed: u64,
}

impl BinarySynthSpec {
    pub fn new(seed: u64) -> Self {
        Self {
            n: 2000,
            positive_fraction: 0.05,
            label_noise: 0.02,
            negative_center: [0.35, 0.35],
            positive_center: [0.65, 0.65],
            cluster_sigma: 0.1,
            seed,
        }
    }
}

/// Generates an imbalanced binary classification set. Exactly
/// `round(positive_fraction * n)` samples come from the positive cluster and
/// `round(label_noise * n)` labels are flipped afterwards.
pub fn generate_binary(spec: &BinarySynthSpec) -> Result<Dataset> {
    if spec.n < 2 {
        return Err(Error::InvalidArgument("n must be at least 2".into()));
    }
    if !(0.0..=1.0).contains(&spec.positive_fraction) || !(0.0..=1.0).contains(&spec.label_noise) {
        return Err(Error::InvalidArgument("fractions must be in [0, 1]".into()));
    }
    let dist =
        Normal::new(0.0, spec.cluster_sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_pos = (spec.positive_fraction * spec.n as f64).round() as usize;
    let positives = index::sample(&mut rng, spec.n, n_pos).into_vec();
    let mut label = vec![0.0; spec.n];
    for i in positives {
        label[i] = 1.0;
    }
    let mut x = Array2::zeros((spec.n, 2));
    for i in 0..spec.n {
        let c = if label[i] == 1.0 {
            spec.positive_center
        } else {
            spec.negative_center
        };
        for k in 0..2 {
            x[[i, k]] = c[k] + dist.sample(&mut rng);
        }
    }
    let n_flip = (spec.label_noise * spec.n as f64).round() as usize;
    for i in index::sample(&mut rng, spec.n, n_flip) {
        label[i] = 1.0 - label[i];
    }
    let y = Array2::from_shape_vec((spec.n, 1), label).expect("shape");
    Dataset::new(x, y)?.with_names(vec!["x1".into(), "x2".into()], vec!["label".into()])
}
