"""k-means vector quantisation of block descriptors into discrete labels."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionError, InsufficientDataError
from .features import FeatureConfig, block_descriptor
from .imageio import GrayImage, partition_blocks

__all__ = [
    "Codebook",
    "LabelVector",
    "kmeans_fit",
    "assign_label",
    "assign_labels",
    "image_descriptors",
    "label_image",
]

STD_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class Codebook:
    """Centroids live in z-scored descriptor space."""

    k: int
    centroids: np.ndarray
    feature_means: np.ndarray
    feature_stds: np.ndarray
    inertia_history: tuple[float, ...] = ()

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]

    def normalize(self, descriptors) -> np.ndarray:
        d = np.asarray(descriptors, dtype=np.float64)
        if d.shape[-1] != self.dim:
            raise DimensionError(
                f"descriptor length {d.shape[-1]} does not match codebook dimension {self.dim}"
            )
        return (d - self.feature_means) / self.feature_stds

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "centroids": self.centroids.tolist(),
            "feature_means": self.feature_means.tolist(),
            "feature_stds": self.feature_stds.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Codebook":
        return cls(
            k=int(d["k"]),
            centroids=np.asarray(d["centroids"], dtype=np.float64),
            feature_means=np.asarray(d["feature_means"], dtype=np.float64),
            feature_stds=np.asarray(d["feature_stds"], dtype=np.float64),
        )


@dataclass(frozen=True)
class LabelVector:
    """One cluster label in ``[1, k]`` per block, in row-major block order."""

    labels: tuple[int, ...]
    cls: Optional[int] = None

    def __len__(self):
        return len(self.labels)


def _sq_dists(x, centers):
    # (n, k) squared Euclidean distances
    return ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)


def _kmeanspp(x, k, rng):
    n = x.shape[0]
    idx = [int(rng.integers(n))]
    d2 = ((x - x[idx[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        nxt = int(rng.choice(n, p=d2 / total)) if total > 0 else int(rng.integers(n))
        idx.append(nxt)
        d2 = np.minimum(d2, ((x - x[nxt]) ** 2).sum(axis=1))
    return x[idx].copy()


def kmeans_fit(descriptors, k: int, seed: int = 0, max_iter: int = 100) -> Codebook:
    """Lloyd's k-means on z-scored descriptors with k-means++ seeding.

    Stops at an assignment fixpoint or after ``max_iter`` rounds.  A cluster
    that empties out is reseeded with the point lying farthest from its own
    centroid, which can only lower the objective.
    """
    x = np.asarray(descriptors, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError("descriptors must form a 2-D array (n_samples, n_features)")
    if k < 2:
        raise ValueError("k must be >= 2")
    if x.shape[0] < k:
        raise InsufficientDataError(f"{x.shape[0]} descriptors cannot form {k} clusters")
    if np.unique(x, axis=0).shape[0] < k:
        raise InsufficientDataError(f"fewer than {k} distinct descriptors")

    means = x.mean(axis=0)
    stds = np.maximum(x.std(axis=0), STD_FLOOR)
    z = (x - means) / stds
    rng = np.random.default_rng(seed)
    centers = _kmeanspp(z, k, rng)

    history = []
    labels = None
    for _ in range(max_iter):
        d2 = _sq_dists(z, centers)
        new_labels = np.argmin(d2, axis=1)
        own = d2[np.arange(len(z)), new_labels]
        counts = np.bincount(new_labels, minlength=k)
        for j in np.flatnonzero(counts == 0):
            # reseed from the worst-fit point of a cluster that can spare it
            movable = counts[new_labels] > 1
            far = int(np.argmax(np.where(movable, own, -1.0)))
            counts[new_labels[far]] -= 1
            new_labels[far] = j
            counts[j] = 1
            own[far] = 0.0
        history.append(float(own.sum()))
        if labels is not None and np.array_equal(labels, new_labels):
            break
        labels = new_labels
        for j in range(k):
            centers[j] = z[labels == j].mean(axis=0)

    return Codebook(
        k=k,
        centroids=centers,
        feature_means=means,
        feature_stds=stds,
        inertia_history=tuple(history),
    )


def assign_labels(descriptors, cb: Codebook) -> np.ndarray:
    """1-based nearest-centroid labels for a 2-D array of descriptors."""
    z = cb.normalize(np.atleast_2d(descriptors))
    return np.argmin(_sq_dists(z, cb.centroids), axis=1) + 1


def assign_label(d, cb: Codebook) -> int:
    d = np.asarray(d, dtype=np.float64)
    if d.ndim != 1:
        raise DimensionError("expected a single descriptor vector")
    return int(assign_labels(d[None, :], cb)[0])


def image_descriptors(img: GrayImage, cfg: FeatureConfig = FeatureConfig()) -> np.ndarray:
    """``(n_blocks, descriptor_length)`` array, blocks in row-major order."""
    return np.stack([block_descriptor(b, cfg) for b in partition_blocks(img, cfg.grid)])


def label_image(
    img: GrayImage,
    cb: Codebook,
    cfg: FeatureConfig = FeatureConfig(),
    cls: Optional[int] = None,
) -> LabelVector:
    labels = assign_labels(image_descriptors(img, cfg), cb)
    return LabelVector(labels=tuple(int(v) for v in labels), cls=cls)


def label_matrix(descriptor_sets: Sequence[np.ndarray], cb: Codebook) -> np.ndarray:
    """Stack per-image descriptor arrays into an ``(n_images, n_blocks)`` label matrix."""
    return np.stack([assign_labels(d, cb) for d in descriptor_sets])
