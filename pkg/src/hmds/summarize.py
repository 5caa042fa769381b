"""Posterior summaries: mean dissimilarities, agglomerative dendrograms, aligned embeddings."""

from __future__ import annotations

import dataclasses
import warnings

import numpy as np

from .core import pair_indices, upper_to_square
from .sampler import ChainOutput

LINKAGES = ("average", "single", "complete")


def posterior_mean_delta(chain: ChainOutput) -> np.ndarray:
    """Elementwise posterior mean of delta as an upper-triangular (N, N) matrix."""
    mean = chain.delta.mean(axis=0)
    return upper_to_square(mean, chain.n_entities)


@dataclasses.dataclass(frozen=True, eq=False)
class Dendrogram:
    """Agglomerative merge history.

    ``merges[k] = (a, b, height)``: clusters a and b join at the given height.
    Leaves are 0..N-1; merge k creates cluster N+k (the scipy convention).
    Heights are nondecreasing for the supported linkages.
    """

    merges: list[tuple[int, int, float]]
    labels: list[str]

    def heights(self) -> np.ndarray:
        return np.array([h for _, _, h in self.merges])

    def to_newick(self) -> str:
        """Newick text with branch lengths = parent height - child height."""
        n = len(self.labels)
        height = {i: 0.0 for i in range(n)}
        node = {i: f"{self.labels[i]}" for i in range(n)}
        for k, (a, b, h) in enumerate(self.merges):
            sub = ",".join(
                f"{node[c]}:{h - height[c]:.10g}" for c in (a, b)
            )
            node[n + k] = f"({sub})"
            height[n + k] = h
        return node[n + len(self.merges) - 1] + ";" if self.merges else f"{self.labels[0]};"


def agglomerate(d: np.ndarray, linkage: str = "average", labels=None) -> Dendrogram:
    """Hierarchical agglomerative clustering of a symmetric dissimilarity matrix.

    Repeatedly merges the closest pair of clusters; exact ties are broken by
    the lexicographically smallest pair of cluster ids, so the result is
    deterministic.  Average linkage (the default) weights member counts.
    """
    d = np.asarray(d, dtype=np.float64)
    n = d.shape[0]
    if d.shape != (n, n) or not np.allclose(d, d.T):
        raise ValueError("expected a symmetric square dissimilarity matrix")
    if linkage not in LINKAGES:
        raise ValueError(f"linkage must be one of {LINKAGES}")
    if labels is None:
        labels = [f"e{i}" for i in range(n)]
    if len(labels) != n:
        raise ValueError("labels must match the matrix size")
    if n == 1:
        return Dendrogram(merges=[], labels=list(labels))

    dist = {}
    for i in range(n):
        for j in range(i + 1, n):
            dist[(i, j)] = d[i, j]
    size = {i: 1 for i in range(n)}
    active = sorted(size)
    merges: list[tuple[int, int, float]] = []
    next_id = n
    while len(active) > 1:
        best = None
        for ai, a in enumerate(active):
            for b in active[ai + 1 :]:
                key = (a, b)
                if best is None or dist[key] < best[0]:
                    best = (dist[key], a, b)
        h, a, b = best
        for c in active:
            if c in (a, b):
                continue
            da = dist[(min(a, c), max(a, c))]
            db = dist[(min(b, c), max(b, c))]
            if linkage == "average":
                new = (size[a] * da + size[b] * db) / (size[a] + size[b])
            elif linkage == "single":
                new = min(da, db)
            else:
                new = max(da, db)
            dist[(c, next_id)] = new
        size[next_id] = size[a] + size[b]
        active = [c for c in active if c not in (a, b)] + [next_id]
        active.sort()
        merges.append((a, b, float(h)))
        next_id += 1
    return Dendrogram(merges=merges, labels=list(labels))


def _best_rotation(x_c: np.ndarray, ref_c: np.ndarray) -> np.ndarray | None:
    """Optimal rotation aligning centered draw to centered reference.

    Reflections are a gauge freedom of the latent space, but flipping
    draw-by-draw manufactures multimodality; a reflection is only used when it
    beats the proper rotation's residual by more than 1%.
    """
    c = x_c.T @ ref_c
    if np.linalg.norm(c) < 1e-12:
        return None
    u, _, vt = np.linalg.svd(c)
    q = u @ vt
    if np.linalg.det(q) >= 0:
        return q
    flip = np.ones(c.shape[0])
    flip[-1] = -1.0
    q_proper = (u * flip[None, :]) @ vt
    res_reflect = np.linalg.norm(x_c @ q - ref_c) ** 2
    res_proper = np.linalg.norm(x_c @ q_proper - ref_c) ** 2
    return q if res_reflect < 0.99 * res_proper else q_proper


def procrustes_align(chain, n_passes: int = 2) -> np.ndarray:
    """Align every latent-configuration draw to the running mean configuration.

    Each draw is registered by optimal rotation plus translation (no scaling);
    the mean configuration is recomputed and the alignment repeated.  Accepts
    a :class:`ChainOutput` or a raw (n_draws, N, r) array and returns the
    aligned (n_draws, N, r) array.
    """
    draws = chain.X if isinstance(chain, ChainOutput) else np.asarray(chain, dtype=np.float64)
    if draws.ndim != 3:
        raise ValueError("expected draws with shape (n_draws, N, r)")
    aligned = np.array(draws)
    warned = False
    for _ in range(n_passes):
        ref = aligned.mean(axis=0)
        ref_centroid = ref.mean(axis=0)
        ref_c = ref - ref_centroid
        for k in range(aligned.shape[0]):
            x = aligned[k]
            x_c = x - x.mean(axis=0)
            q = _best_rotation(x_c, ref_c)
            if q is None:
                if not warned:
                    warnings.warn("degenerate configuration: identity alignment used")
                    warned = True
                aligned[k] = x_c + ref_centroid
            else:
                aligned[k] = x_c @ q + ref_centroid
    return aligned


def write_delta_mean_csv(mat: np.ndarray, path) -> None:
    """Long-format CSV ``i,j,delta`` of the upper-triangular posterior means."""
    n = mat.shape[0]
    iu, ju = pair_indices(n)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("i,j,delta\n")
        for i, j in zip(iu, ju):
            fh.write(f"{i},{j},{'%.16e' % mat[i, j]}\n")


def write_aligned_draws_csv(aligned: np.ndarray, path) -> None:
    """CSV ``draw,entity,x0..`` of Procrustes-aligned embedding draws."""
    k, n, r = aligned.shape
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("draw,entity," + ",".join(f"x{d}" for d in range(r)) + "\n")
        for s in range(k):
            for i in range(n):
                coords = ",".join("%.16e" % v for v in aligned[s, i])
                fh.write(f"{s},{i},{coords}\n")
