"""Distribution and retrieval metrics over clip-space motion embeddings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NumericError, ProtocolError, ShapeError

SQRT_TOLERANCE = 1e-8


@dataclass(frozen=True)
class FeatureStats:
    mean: np.ndarray
    cov: np.ndarray

    @classmethod
    def from_embeddings(cls, embs):
        x = np.asarray(embs, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] < 2:
            raise ShapeError(f"need an (n >= 2, d) embedding matrix, got shape {x.shape}")
        cov = np.cov(x, rowvar=False)
        return cls(x.mean(axis=0), 0.5 * (cov + cov.T))

    @property
    def dim(self):
        return self.mean.shape[0]


def _psd_sqrt(m):
    """Square root of a symmetric PSD matrix; tiny negative eigenvalues are clipped."""
    vals, vecs = np.linalg.eigh(0.5 * (m + m.T))
    if vals.min() < -SQRT_TOLERANCE * max(1.0, float(np.abs(vals).max())):
        raise NumericError(f"matrix is not positive semidefinite (eigenvalue {vals.min():.3e})")
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def fid(a: FeatureStats, b: FeatureStats) -> float:
    """Frechet distance between two Gaussian fits.

    The cross term uses Tr((Σa Σb)^½) = Tr((Σa^½ Σb Σa^½)^½); the inner
    matrix is symmetric PSD, so an eigendecomposition suffices.
    """
    if a.dim != b.dim:
        raise ShapeError(f"embedding dimensions differ: {a.dim} vs {b.dim}")
    root_a = _psd_sqrt(a.cov)
    cross = _psd_sqrt(root_a @ b.cov @ root_a)
    diff = a.mean - b.mean
    return float(diff @ diff + np.trace(a.cov) + np.trace(b.cov) - 2.0 * np.trace(cross))


def _unit(x):
    x = np.asarray(x, dtype=np.float64)
    return x / np.maximum(np.linalg.norm(x, axis=-1, keepdims=True), 1e-12)


def r_precision(generated_embs, prompt_embs, pool_size=32, top_n=3, rng=None, pool_labels=None):
    """Fraction of generated clips whose own prompt ranks in the top ``top_n``."""
    return float(r_precision_curve(generated_embs, prompt_embs, pool_size, top_n, rng, pool_labels)[-1])


def r_precision_curve(generated_embs, prompt_embs, pool_size=32, top_n=3, rng=None, pool_labels=None):
    """Top-1 .. top-``top_n`` retrieval fractions.

    Row i of ``generated_embs`` was generated from row i of ``prompt_embs``.
    Each clip's prompt competes with ``pool_size - 1`` distractors drawn
    from the other distinct prompts. ``pool_labels`` identifies identical
    prompts (for instance their token tuples); by default every row is its
    own prompt.
    """
    gen, txt = _unit(generated_embs), _unit(prompt_embs)
    n = len(gen)
    if len(txt) != n:
        raise ShapeError(f"{n} generated embeddings but {len(txt)} prompt embeddings")
    if pool_size < 1 or top_n < 1:
        raise ProtocolError("pool_size and top_n must be positive")
    rng = np.random.default_rng(0) if rng is None else rng
    labels = list(range(n)) if pool_labels is None else list(pool_labels)
    first_row = {}
    for i, lab in enumerate(labels):
        first_row.setdefault(lab, i)
    uniques = np.array(list(first_row.values()))
    unique_labels = list(first_row)
    hits = np.zeros(top_n)
    for i in range(n):
        candidates = uniques[[lab != labels[i] for lab in unique_labels]]
        if len(candidates) < pool_size - 1:
            raise ProtocolError(f"only {len(candidates)} distinct distractor prompts for a pool of {pool_size}")
        picks = rng.choice(candidates, size=pool_size - 1, replace=False)
        scores = txt[np.concatenate([[i], picks]).astype(int)] @ gen[i]
        # ties count against the true prompt
        rank = int(np.sum(scores[1:] >= scores[0]))
        hits[rank:] += 1
    return hits / n


def diversity(embs, pair_count=300, rng=None):
    """Mean Euclidean distance over ``pair_count`` random pairs of distinct rows."""
    x = np.asarray(embs, dtype=np.float64)
    if len(x) < 2:
        raise ShapeError("diversity needs at least two embeddings")
    rng = np.random.default_rng(0) if rng is None else rng
    first = rng.integers(0, len(x), size=pair_count)
    second = (first + rng.integers(1, len(x), size=pair_count)) % len(x)
    return float(np.linalg.norm(x[first] - x[second], axis=1).mean())
