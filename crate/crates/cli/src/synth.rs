//! Synthetic event datasets: desk-scale stand-ins for the real event
//! benchmarks, built so the relevant structure (linear separability,
//! temporal order, crossmodal correlation) is present by construction.

use lsmsim_core::event::SpikeTensor;
use lsmsim_core::seed;
use lsmsim_core::{Error, Result, Scalar};
use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;

/// Per-class rate templates (T x U, entries in [0, 1]) plus sampling sizes.
#[derive(Debug, Clone)]
pub struct SyntheticTaskSpec {
    pub templates: Vec<Array2<f64>>,
    pub samples_per_class: usize,
    pub test_samples_per_class: usize,
    pub seed: u64,
}

/// A labeled train/test split of spike tensors.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub train: Vec<(SpikeTensor, usize)>,
    pub test: Vec<(SpikeTensor, usize)>,
    pub classes: usize,
    /// Set when two class templates are identical (degenerate task).
    pub degenerate_templates: bool,
}

/// Draw one spike tensor from a T x U rate matrix.
pub fn sample_from_rates(rates: &Array2<f64>, sample_seed: u64) -> Result<SpikeTensor> {
    let (t_steps, channels) = rates.dim();
    let mut rng = seed::rng(sample_seed, 0x73796E74); // "synt"
    let mut out = SpikeTensor::zeros(t_steps, channels);
    for t in 0..t_steps {
        for u in 0..channels {
            let p = rates[(t, u)];
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::PixelOutOfRange {
                    index: t * channels + u,
                    value: p,
                });
            }
            if <f64 as Scalar>::uniform_01(&mut rng) < p {
                out.set(t, u, 1);
            }
        }
    }
    Ok(out)
}

/// Generate a labeled dataset from per-class templates; deterministic given
/// the task seed.
pub fn gen_synthetic(spec: &SyntheticTaskSpec) -> Result<LabeledDataset> {
    assert!(spec.templates.len() >= 2, "need at least two classes");
    let classes = spec.templates.len();
    let mut degenerate = false;
    for a in 0..classes {
        for b in a + 1..classes {
            if spec.templates[a] == spec.templates[b] {
                degenerate = true;
            }
        }
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, template) in spec.templates.iter().enumerate() {
        for i in 0..spec.samples_per_class {
            let s = seed::derive(spec.seed, (class * 1_000_003 + i) as u64);
            train.push((sample_from_rates(template, s)?, class));
        }
        for i in 0..spec.test_samples_per_class {
            let s = seed::derive(
                spec.seed,
                (class * 1_000_003 + spec.samples_per_class + i) as u64 ^ 0x5445_5354, // "TEST"
            );
            test.push((sample_from_rates(template, s)?, class));
        }
    }
    Ok(LabeledDataset {
        train,
        test,
        classes,
        degenerate_templates: degenerate,
    })
}

/// Static rate templates with disjoint active channel blocks per class:
/// separable by a linear readout on mean rates.
pub fn rate_task_templates(
    classes: usize,
    channels: usize,
    steps: usize,
    rate_hi: f64,
    rate_lo: f64,
) -> Vec<Array2<f64>> {
    assert!(classes >= 2 && channels >= classes);
    let block = channels / classes;
    (0..classes)
        .map(|c| {
            let mut row = Array1::from_elem(channels, rate_lo);
            for u in c * block..(c + 1) * block {
                row[u] = rate_hi;
            }
            let mut t = Array2::zeros((steps, channels));
            for mut r in t.rows_mut() {
                r.assign(&row);
            }
            t
        })
        .collect()
}

/// Order-sensitive templates: every class drives the same channel groups at
/// the same total rates, but in a class-specific temporal order, so
/// time-pooled features are identically distributed across classes and only
/// sequence-aware encoders can separate them.
pub fn temporal_task_templates(
    classes: usize,
    channels: usize,
    steps: usize,
    groups: usize,
    rate_hi: f64,
    rate_lo: f64,
    seed: u64,
) -> Vec<Array2<f64>> {
    assert!(groups >= 2 && channels >= groups && steps >= groups);
    let perms = distinct_permutations(classes, groups, seed);
    let group_size = channels / groups;
    let seg_len = steps / groups;
    perms
        .into_iter()
        .map(|perm| {
            let mut t = Array2::from_elem((steps, channels), rate_lo);
            for (segment, &group) in perm.iter().enumerate() {
                let t0 = segment * seg_len;
                let t1 = if segment + 1 == perm.len() {
                    steps
                } else {
                    t0 + seg_len
                };
                for step in t0..t1 {
                    for u in group * group_size..(group + 1) * group_size {
                        t[(step, u)] = rate_hi;
                    }
                }
            }
            t
        })
        .collect()
}

/// Deterministic distinct permutations of `0..groups`.
fn distinct_permutations(count: usize, groups: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut perms: Vec<Vec<usize>> = Vec::with_capacity(count);
    let mut rng = seed::rng(seed, 0x7065_726D); // "perm"
    let mut attempts = 0;
    while perms.len() < count {
        let mut p: Vec<usize> = (0..groups).collect();
        p.shuffle(&mut rng);
        if !perms.contains(&p) {
            perms.push(p);
        }
        attempts += 1;
        assert!(
            attempts < 100_000,
            "cannot find {count} distinct permutations of {groups} groups"
        );
    }
    perms
}

/// Two correlated modalities for crossmodal training.
///
/// Every class is a point `z_c` in a shared low-dimensional latent space;
/// each latent factor drives one channel group in each modality, so both
/// modalities render the same latent through different fixed channel maps.
/// Samples jitter around their class latent, which makes the training set
/// cover the manifold between class points. Because unseen classes live on
/// the same manifold, alignment learned from seen classes transfers.
#[derive(Debug, Clone)]
pub struct PairedTask {
    pub latents: Vec<Vec<f64>>,
    vision_groups: Vec<usize>,
    audio_groups: Vec<usize>,
    pub steps: usize,
    rate_hi: f64,
    rate_lo: f64,
    jitter: f64,
}

impl PairedTask {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        classes: usize,
        vision_channels: usize,
        audio_channels: usize,
        steps: usize,
        latent_dim: usize,
        rate_hi: f64,
        rate_lo: f64,
        jitter: f64,
        seed: u64,
    ) -> Self {
        assert!(latent_dim >= 2);
        assert!(vision_channels >= latent_dim && audio_channels >= latent_dim);
        let mut rng = seed::rng(seed, 0x7061_6972); // "pair"

        // well-separated latent codes, one shared recipe for all classes;
        // the separation requirement relaxes if rejection sampling stalls
        let mut latents: Vec<Vec<f64>> = Vec::with_capacity(classes);
        let mut attempts = 0u64;
        let mut separation = 0.4;
        while latents.len() < classes {
            let z: Vec<f64> = (0..latent_dim)
                .map(|_| <f64 as Scalar>::uniform_01(&mut rng))
                .collect();
            let min_dist = latents
                .iter()
                .map(|other| {
                    z.iter()
                        .zip(other.iter())
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0f64, f64::max)
                })
                .fold(f64::INFINITY, f64::min);
            if min_dist > separation {
                latents.push(z);
            }
            attempts += 1;
            if attempts.is_multiple_of(100_000) {
                separation *= 0.5;
            }
        }

        fn group_of<R: rand::Rng>(channels: usize, latent_dim: usize, rng: &mut R) -> Vec<usize> {
            let mut groups: Vec<usize> = (0..channels).map(|u| u % latent_dim).collect();
            groups.shuffle(rng);
            groups
        }
        let vision_groups = group_of(vision_channels, latent_dim, &mut rng);
        let audio_groups = group_of(audio_channels, latent_dim, &mut rng);
        Self {
            latents,
            vision_groups,
            audio_groups,
            steps,
            rate_hi,
            rate_lo,
            jitter,
        }
    }

    fn jittered_latent(&self, class: usize, sample_seed: u64) -> Vec<f64> {
        let mut rng = seed::rng(sample_seed, 0x6A69_7474); // "jitt"
        self.latents[class]
            .iter()
            .map(|&z| {
                let j = self.jitter * (2.0 * <f64 as Scalar>::uniform_01(&mut rng) - 1.0);
                (z + j).clamp(0.0, 1.0)
            })
            .collect()
    }

    fn render(&self, z: &[f64], groups: &[usize]) -> Array2<f64> {
        let row = Array1::from_iter(
            groups
                .iter()
                .map(|&f| self.rate_lo + (self.rate_hi - self.rate_lo) * z[f]),
        );
        broadcast_rows(&row, self.steps)
    }

    /// One matched (vision, audio) sample pair: both modalities render the
    /// same jittered latent.
    pub fn sample_pair(
        &self,
        class: usize,
        sample_seed: u64,
    ) -> crate::synth::PairResult {
        let z = self.jittered_latent(class, sample_seed);
        let v = sample_from_rates(&self.render(&z, &self.vision_groups), seed::derive(sample_seed, 1));
        let a = sample_from_rates(&self.render(&z, &self.audio_groups), seed::derive(sample_seed, 2));
        match (v, a) {
            (Ok(v), Ok(a)) => Ok((v, a)),
            (Err(e), _) | (_, Err(e)) => Err(e),
        }
    }

    /// One vision-only sample.
    pub fn sample_vision(&self, class: usize, sample_seed: u64) -> lsmsim_core::Result<SpikeTensor> {
        let z = self.jittered_latent(class, sample_seed);
        sample_from_rates(&self.render(&z, &self.vision_groups), seed::derive(sample_seed, 1))
    }

    /// One audio-only sample.
    pub fn sample_audio(&self, class: usize, sample_seed: u64) -> lsmsim_core::Result<SpikeTensor> {
        let z = self.jittered_latent(class, sample_seed);
        sample_from_rates(&self.render(&z, &self.audio_groups), seed::derive(sample_seed, 2))
    }
}

pub type PairResult = lsmsim_core::Result<(SpikeTensor, SpikeTensor)>;

fn broadcast_rows(row: &Array1<f64>, steps: usize) -> Array2<f64> {
    let mut t = Array2::zeros((steps, row.len()));
    for mut r in t.rows_mut() {
        r.assign(row);
    }
    t
}
