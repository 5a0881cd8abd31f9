//! Crossmodal contrastive learning on projected spike-count features:
//! cosine similarity, symmetric contrastive loss with analytic gradients,
//! projection-head training, prototype construction, and zero-shot
//! classification with top-k retrieval metrics.

use std::io::Write;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::readout::{softmax, LinearLayer, Optimizer, TrainConfig};
use crate::scalar::Scalar;
use crate::seed;

/// A batch of projected embeddings plus its modality tag (for exports and
/// error reporting).
#[derive(Debug, Clone)]
pub struct EmbeddingBatch<F> {
    pub z: Array2<F>,
    pub modality: &'static str,
}

fn row_norms<F: Scalar>(z: &Array2<F>, side: &'static str) -> Result<Vec<F>> {
    let mut norms = Vec::with_capacity(z.nrows());
    for (i, row) in z.rows().into_iter().enumerate() {
        let n = row.iter().map(|&v| v * v).sum::<F>().sqrt();
        if n == F::zero() {
            return Err(Error::ZeroNormRow { side, row: i });
        }
        norms.push(n);
    }
    Ok(norms)
}

fn normalize_rows<F: Scalar>(z: &Array2<F>, norms: &[F]) -> Array2<F> {
    let mut out = z.clone();
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        let n = norms[i];
        row.mapv_inplace(|v| v / n);
    }
    out
}

/// Pairwise cosine similarities `S[i][j]` between rows of `a` (N x D) and
/// rows of `b` (M x D).
pub fn cosine_similarity_matrix<F: Scalar>(a: &Array2<F>, b: &Array2<F>) -> Result<Array2<F>> {
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "embedding dims differ: {} vs {}",
            a.ncols(),
            b.ncols()
        )));
    }
    let na = row_norms(a, "left")?;
    let nb = row_norms(b, "right")?;
    let ah = normalize_rows(a, &na);
    let bh = normalize_rows(b, &nb);
    let mut s = Array2::zeros((a.nrows(), b.nrows()));
    for i in 0..a.nrows() {
        for j in 0..b.nrows() {
            let mut acc = F::zero();
            for d in 0..a.ncols() {
                acc += ah[(i, d)] * bh[(j, d)];
            }
            s[(i, j)] = acc;
        }
    }
    Ok(s)
}

/// Symmetric contrastive loss over a batch of matched embedding pairs.
///
/// Row `i` of each modality is a matched pair; the loss is the mean of the
/// row-wise and column-wise softmax cross-entropies of `S / temperature`
/// against the diagonal targets, halved. Returns the loss together with the
/// analytic gradients with respect to both raw (pre-normalization) embedding
/// batches.
pub fn contrastive_loss<F: Scalar>(
    vision: &Array2<F>,
    audio: &Array2<F>,
    temperature: F,
) -> Result<(F, Array2<F>, Array2<F>)> {
    assert!(temperature > F::zero(), "temperature must be positive");
    if vision.dim() != audio.dim() {
        return Err(Error::DimensionMismatch(format!(
            "batch shapes differ: {:?} vs {:?}",
            vision.dim(),
            audio.dim()
        )));
    }
    let n = vision.nrows();
    let nv = row_norms(vision, "vision")?;
    let na = row_norms(audio, "audio")?;
    let vh = normalize_rows(vision, &nv);
    let ah = normalize_rows(audio, &na);

    // S[v][a] = cos(vision_v, audio_a)
    let mut s = Array2::zeros((n, n));
    for v in 0..n {
        for a in 0..n {
            let mut acc = F::zero();
            for d in 0..vision.ncols() {
                acc += vh[(v, d)] * ah[(a, d)];
            }
            s[(v, a)] = acc;
        }
    }

    let half = F::from_f64_c(0.5);
    let inv_n = F::one() / F::from_f64_c(n as f64);
    let mut loss = F::zero();
    // grad of the loss with respect to S
    let mut grad_s = Array2::<F>::zeros((n, n));
    // row softmax: vision v against all audio
    for v in 0..n {
        let logits: Vec<F> = (0..n).map(|a| s[(v, a)] / temperature).collect();
        let p = softmax(&logits);
        let eps = F::from_f64_c(f64::MIN_POSITIVE);
        loss += -(p[v].max(eps)).ln() * half * inv_n;
        for a in 0..n {
            let delta = if a == v { F::one() } else { F::zero() };
            grad_s[(v, a)] += (p[a] - delta) * half * inv_n / temperature;
        }
    }
    // column softmax: audio a against all vision
    for a in 0..n {
        let logits: Vec<F> = (0..n).map(|v| s[(v, a)] / temperature).collect();
        let p = softmax(&logits);
        let eps = F::from_f64_c(f64::MIN_POSITIVE);
        loss += -(p[a].max(eps)).ln() * half * inv_n;
        for v in 0..n {
            let delta = if v == a { F::one() } else { F::zero() };
            grad_s[(v, a)] += (p[v] - delta) * half * inv_n / temperature;
        }
    }

    // backpropagate through the cosine normalization:
    // dL/dz = (g_hat - (g_hat . z_hat) z_hat) / |z|, g_hat = dL/dz_hat
    let mut grad_v = Array2::zeros(vision.dim());
    for v in 0..n {
        let mut g_hat = Array1::<F>::zeros(vision.ncols());
        for a in 0..n {
            let g = grad_s[(v, a)];
            for d in 0..vision.ncols() {
                g_hat[d] += g * ah[(a, d)];
            }
        }
        let dot: F = (0..vision.ncols()).map(|d| g_hat[d] * vh[(v, d)]).sum();
        for d in 0..vision.ncols() {
            grad_v[(v, d)] = (g_hat[d] - dot * vh[(v, d)]) / nv[v];
        }
    }
    let mut grad_a = Array2::zeros(audio.dim());
    for a in 0..n {
        let mut g_hat = Array1::<F>::zeros(audio.ncols());
        for v in 0..n {
            let g = grad_s[(v, a)];
            for d in 0..audio.ncols() {
                g_hat[d] += g * vh[(v, d)];
            }
        }
        let dot: F = (0..audio.ncols()).map(|d| g_hat[d] * ah[(a, d)]).sum();
        for d in 0..audio.ncols() {
            grad_a[(a, d)] = (g_hat[d] - dot * ah[(a, d)]) / na[a];
        }
    }
    Ok((loss, grad_v, grad_a))
}

/// Outcome counters from a contrastive training run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContrastiveTrainStats {
    /// Per-epoch mean loss.
    pub loss_curve: Vec<f64>,
    /// Batches containing duplicated identical pairs (degenerate targets).
    pub degenerate_batches: usize,
}

fn project<F: Scalar>(layer: &LinearLayer<F>, xs: &[&Vec<F>]) -> Result<Array2<F>> {
    let mut z = Array2::zeros((xs.len(), layer.out_dim()));
    for (i, x) in xs.iter().enumerate() {
        let logits = crate::readout::linear_forward(layer, x)?;
        for (d, v) in logits.into_iter().enumerate() {
            z[(i, d)] = v;
        }
    }
    Ok(z)
}

/// Train the two projection layers with the contrastive loss over matched
/// feature pairs; the upstream features are inputs and are never updated.
/// Deterministic given the training seed.
pub fn train_contrastive<F: Scalar>(
    pairs: &[(Vec<F>, Vec<F>, usize)],
    proj_v: &LinearLayer<F>,
    proj_a: &LinearLayer<F>,
    temperature: F,
    cfg: &TrainConfig,
) -> Result<(LinearLayer<F>, LinearLayer<F>, ContrastiveTrainStats)> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut proj_v = proj_v.clone();
    let mut proj_a = proj_a.clone();
    let mut stats = ContrastiveTrainStats::default();
    let lr = F::from_f64_c(cfg.lr);
    let mut vel = [
        Array2::<F>::zeros(proj_v.w.dim()),
        Array2::<F>::zeros(proj_a.w.dim()),
    ];
    let mut vel_b = [
        Array1::<F>::zeros(proj_v.b.len()),
        Array1::<F>::zeros(proj_a.b.len()),
    ];
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        let mut rng = seed::rng(cfg.seed, 0x636C_6970 ^ epoch as u64); // "clip"
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let xv: Vec<&Vec<F>> = batch.iter().map(|&i| &pairs[i].0).collect();
            let xa: Vec<&Vec<F>> = batch.iter().map(|&i| &pairs[i].1).collect();
            // duplicated identical pairs make the diagonal target ambiguous
            let mut degenerate = false;
            for i in 0..batch.len() {
                for j in i + 1..batch.len() {
                    if xv[i] == xv[j] && xa[i] == xa[j] {
                        degenerate = true;
                    }
                }
            }
            if degenerate {
                stats.degenerate_batches += 1;
            }
            let zv = project(&proj_v, &xv)?;
            let za = project(&proj_a, &xa)?;
            let (loss, gv, ga) = contrastive_loss(&zv, &za, temperature)?;
            epoch_loss += loss.to_f64_c();
            batches += 1;
            // dL/dW = dL/dZ^T X, dL/db = column sums of dL/dZ
            for (side, (layer, (x, gz))) in [
                (&mut proj_v, (&xv, &gv)),
                (&mut proj_a, (&xa, &ga)),
            ]
            .into_iter()
            .enumerate()
            {
                let mut grad_w = Array2::<F>::zeros(layer.w.dim());
                let mut grad_b = Array1::<F>::zeros(layer.b.len());
                for (i, xi) in x.iter().enumerate() {
                    for d in 0..layer.out_dim() {
                        let g = gz[(i, d)];
                        grad_b[d] += g;
                        for (gw, &xj) in grad_w.row_mut(d).iter_mut().zip(xi.iter()) {
                            *gw += g * xj;
                        }
                    }
                }
                match cfg.optimizer {
                    Optimizer::Sgd => {
                        layer.w.zip_mut_with(&grad_w, |w, &g| *w -= lr * g);
                        layer.b.zip_mut_with(&grad_b, |b, &g| *b -= lr * g);
                    }
                    Optimizer::Momentum { mu } => {
                        let mu = F::from_f64_c(mu);
                        vel[side].zip_mut_with(&grad_w, |v, &g| *v = mu * *v + g);
                        vel_b[side].zip_mut_with(&grad_b, |v, &g| *v = mu * *v + g);
                        layer.w.zip_mut_with(&vel[side], |w, &v| *w -= lr * v);
                        layer.b.zip_mut_with(&vel_b[side], |b, &v| *b -= lr * v);
                    }
                }
            }
        }
        stats.loss_curve.push(epoch_loss / batches.max(1) as f64);
    }
    Ok((proj_v, proj_a, stats))
}

/// Per-class mean embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct Prototypes<F> {
    /// Sorted class ids, one per prototype row.
    pub class_ids: Vec<usize>,
    /// Prototype vectors, row `i` for `class_ids[i]`.
    pub vectors: Array2<F>,
}

/// Average embeddings per class.
pub fn build_prototypes<F: Scalar>(embeddings: &[(Vec<F>, usize)]) -> Result<Prototypes<F>> {
    if embeddings.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let dim = embeddings[0].0.len();
    let mut class_ids: Vec<usize> = embeddings.iter().map(|(_, c)| *c).collect();
    class_ids.sort_unstable();
    class_ids.dedup();
    let mut vectors = Array2::zeros((class_ids.len(), dim));
    for (row, &class) in class_ids.iter().enumerate() {
        let members: Vec<&Vec<F>> = embeddings
            .iter()
            .filter(|(_, c)| *c == class)
            .map(|(e, _)| e)
            .collect();
        if members.is_empty() {
            return Err(Error::EmptyClass(class));
        }
        let inv = F::one() / F::from_f64_c(members.len() as f64);
        for e in members {
            if e.len() != dim {
                return Err(Error::DimensionMismatch(
                    "inconsistent embedding dims".into(),
                ));
            }
            for d in 0..dim {
                vectors[(row, d)] += e[d] * inv;
            }
        }
    }
    Ok(Prototypes { class_ids, vectors })
}

fn cosine<F: Scalar>(a: &[F], b: &[F]) -> F {
    let na = a.iter().map(|&v| v * v).sum::<F>().sqrt();
    let nb = b.iter().map(|&v| v * v).sum::<F>().sqrt();
    if na == F::zero() || nb == F::zero() {
        return F::zero();
    }
    let dot: F = a.iter().zip(b.iter()).map(|(&x, &y)| x * y).sum();
    dot / (na * nb)
}

/// Rank all prototype classes by descending cosine similarity to the query;
/// ties break toward the lower class id.
pub fn zero_shot_classify<F: Scalar>(query: &[F], prototypes: &Prototypes<F>) -> Vec<usize> {
    assert_eq!(
        query.len(),
        prototypes.vectors.ncols(),
        "query dimension mismatch"
    );
    let mut scored: Vec<(usize, F)> = prototypes
        .class_ids
        .iter()
        .enumerate()
        .map(|(row, &class)| {
            let proto = prototypes.vectors.row(row);
            let proto = proto.to_slice().expect("row-major");
            (class, cosine(query, proto))
        })
        .collect();
    scored.sort_by(|(ca, sa), (cb, sb)| {
        sb.partial_cmp(sa)
            .expect("finite similarity")
            .then(ca.cmp(cb))
    });
    scored.into_iter().map(|(c, _)| c).collect()
}

/// Fraction of queries whose true class appears within the first `k` ranks.
pub fn topk_accuracy(rankings: &[Vec<usize>], truths: &[usize], k: usize) -> Result<f64> {
    assert!(k >= 1, "k must be at least 1");
    assert_eq!(rankings.len(), truths.len(), "rankings/truths mismatch");
    if rankings.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let classes = rankings[0].len();
    if k > classes {
        return Err(Error::TopKOutOfRange { k, classes });
    }
    let hits = rankings
        .iter()
        .zip(truths.iter())
        .filter(|(ranking, truth)| ranking[..k].contains(truth))
        .count();
    Ok(hits as f64 / rankings.len() as f64)
}

/// One exported embedding row.
#[derive(Debug, Clone)]
pub struct EmbeddingRow<F> {
    pub id: usize,
    pub class: usize,
    pub modality: &'static str,
    pub vector: Vec<F>,
}

/// Write embeddings as CSV with header `id,class,modality,d0..dD-1`,
/// consumable by external t-SNE/plotting tools.
pub fn write_embeddings_csv<F: Scalar, W: Write>(mut w: W, rows: &[EmbeddingRow<F>]) -> Result<()> {
    let dim = rows.first().map(|r| r.vector.len()).unwrap_or(0);
    write!(w, "id,class,modality")?;
    for d in 0..dim {
        write!(w, ",d{d}")?;
    }
    writeln!(w)?;
    for row in rows {
        write!(w, "{},{},{}", row.id, row.class, row.modality)?;
        for v in &row.vector {
            write!(w, ",{}", v.to_f64_c())?;
        }
        writeln!(w)?;
    }
    Ok(())
}
