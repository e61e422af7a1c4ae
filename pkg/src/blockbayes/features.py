"""Per-block descriptors: Haralick texture statistics plus a BIC-selected GMM.

The intensity distribution of a block is summarised by a univariate Gaussian
mixture whose order is picked by BIC; texture is summarised by energy,
entropy, contrast and homogeneity of a symmetric gray-level co-occurrence
matrix.  Both parts are concatenated into a fixed-length vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DegenerateBlockError, InsufficientDataError
from .imageio import BlockGrid, GrayImage

__all__ = [
    "FeatureConfig",
    "GlcmMatrix",
    "HaralickFeatures",
    "GmmParams",
    "BicResult",
    "glcm",
    "uniform_glcm",
    "haralick",
    "em_fit_gmm",
    "bic_select",
    "gmm_free_parameters",
    "block_descriptor",
    "descriptor_length",
    "descriptor_names",
]

HARALICK_NAMES = ("energy", "entropy", "contrast", "homogeneity")


@dataclass(frozen=True)
class FeatureConfig:
    """Everything that determines a block descriptor."""

    grid: BlockGrid = field(default_factory=BlockGrid)
    levels: int = 8
    offset: tuple[int, int] = (0, 1)
    k_sup: int = 3
    seed: int = 0
    tol: float = 1e-6
    max_iter: int = 200

    def __post_init__(self):
        if self.levels < 2:
            raise ValueError("levels must be >= 2")
        if self.k_sup < 1:
            raise ValueError("k_sup must be >= 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if tuple(self.offset) == (0, 0):
            raise ValueError("co-occurrence offset must be nonzero")
        object.__setattr__(self, "offset", tuple(int(v) for v in self.offset))


@dataclass(frozen=True, eq=False)
class GlcmMatrix:
    levels: int
    p: np.ndarray


class HaralickFeatures(NamedTuple):
    energy: float
    entropy: float
    contrast: float
    homogeneity: float


@dataclass(frozen=True, eq=False)
class GmmParams:
    k: int
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    log_likelihood: float
    # log-likelihood of the initial parameters followed by one entry per EM step
    ll_history: tuple[float, ...] = ()
    n_iter: int = 0

    def sorted_by_mean(self) -> "GmmParams":
        order = np.argsort(self.means, kind="stable")
        return GmmParams(
            k=self.k,
            weights=self.weights[order],
            means=self.means[order],
            variances=self.variances[order],
            log_likelihood=self.log_likelihood,
            ll_history=self.ll_history,
            n_iter=self.n_iter,
        )


@dataclass(frozen=True, eq=False)
class BicResult:
    chosen_k: int
    params: GmmParams
    bic_values: tuple[float, ...]
    v_k: tuple[int, ...]
    n: int


# --------------------------------------------------------------------------
# Texture
# --------------------------------------------------------------------------


def quantize(pixels: np.ndarray, levels: int, maxval: int) -> np.ndarray:
    return (np.asarray(pixels, dtype=np.int64) * levels) // (maxval + 1)


def glcm(block: GrayImage, levels: int = 8, offset: tuple[int, int] = (0, 1)) -> GlcmMatrix:
    """Symmetric, normalized co-occurrence matrix of ``block`` at ``offset``.

    Raises :class:`DegenerateBlockError` when the block has no pixel pair at
    the offset.
    """
    if levels < 2:
        raise ValueError("levels must be >= 2")
    dr, dc = offset
    q = quantize(block.pixels, levels, block.maxval)
    h, w = q.shape
    if abs(dr) >= h or abs(dc) >= w:
        raise DegenerateBlockError(
            f"{w}x{h} block has no pixel pairs at offset {tuple(offset)}"
        )
    a = q[max(0, -dr) : h - max(0, dr), max(0, -dc) : w - max(0, dc)]
    b = q[max(0, dr) : h - max(0, -dr), max(0, dc) : w - max(0, -dc)]
    counts = np.bincount(
        (a * levels + b).ravel(), minlength=levels * levels
    ).reshape(levels, levels).astype(np.float64)
    counts = counts + counts.T
    return GlcmMatrix(levels=levels, p=counts / counts.sum())


def uniform_glcm(levels: int) -> GlcmMatrix:
    return GlcmMatrix(levels=levels, p=np.full((levels, levels), 1.0 / (levels * levels)))


def haralick(m: GlcmMatrix) -> HaralickFeatures:
    p = m.p
    i, j = np.indices(p.shape)
    d2 = (i - j) ** 2
    nz = p[p > 0]
    return HaralickFeatures(
        energy=float(np.sum(p * p)),
        entropy=float(-np.sum(nz * np.log(nz))) + 0.0,
        contrast=float(np.sum(d2 * p)),
        homogeneity=float(np.sum(p / (1.0 + d2))),
    )


# --------------------------------------------------------------------------
# Intensity distribution
# --------------------------------------------------------------------------

_LOG_2PI = math.log(2.0 * math.pi)


def _variance_floor(values: np.ndarray) -> float:
    spread = float(values.max() - values.min())
    return 1e-6 * spread * spread + 1e-12


def _kmeanspp_1d(values, counts, k, rng):
    """k-means++ seeds on a weighted set of distinct 1-D values."""
    centers = np.empty(k)
    centers[0] = values[rng.choice(len(values), p=counts / counts.sum())]
    d2 = (values - centers[0]) ** 2
    for c in range(1, k):
        mass = counts * d2
        total = mass.sum()
        if total > 0:
            idx = rng.choice(len(values), p=mass / total)
        else:
            idx = rng.integers(len(values))
        centers[c] = values[idx]
        d2 = np.minimum(d2, (values - centers[c]) ** 2)
    return centers


def _log_joint(values, weights, means, variances):
    # (n_distinct, k) matrix of log p_i + log N(x | mu_i, var_i)
    with np.errstate(divide="ignore"):
        log_w = np.log(weights)
    diff = values[:, None] - means[None, :]
    return log_w[None, :] - 0.5 * (_LOG_2PI + np.log(variances)[None, :] + diff * diff / variances[None, :])


def _logsumexp_rows(a):
    top = a.max(axis=1, keepdims=True)
    top[~np.isfinite(top)] = 0.0
    with np.errstate(divide="ignore"):
        return (top + np.log(np.exp(a - top).sum(axis=1, keepdims=True)))[:, 0]


def em_fit_gmm(
    samples,
    k: int,
    seed: int = 0,
    tol: float = 1e-6,
    max_iter: int = 200,
) -> GmmParams:
    """Fit a univariate ``k``-component Gaussian mixture by EM.

    Means start at seeded k-means++ picks, weights uniform and every variance
    at the pooled sample variance.  Variances are floored at
    ``1e-6 * range**2 + 1e-12``; the floored M-step is still the constrained
    maximiser, so the log-likelihood never decreases.  Iteration stops once
    an EM step improves the log-likelihood by less than ``tol`` or after
    ``max_iter`` steps.

    Repeated sample values are collapsed into weighted distinct values, which
    leaves every sufficient statistic unchanged.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if k < 1:
        raise ValueError("k must be >= 1")
    if x.size < k:
        raise InsufficientDataError(f"{x.size} samples cannot support {k} components")
    values, counts = np.unique(x, return_counts=True)
    counts = counts.astype(np.float64)
    n = counts.sum()
    floor = _variance_floor(values)
    rng = np.random.default_rng(seed)

    means = _kmeanspp_1d(values, counts, k, rng)
    weights = np.full(k, 1.0 / k)
    pooled = float(np.sum(counts * (values - np.sum(counts * values) / n) ** 2) / n)
    variances = np.full(k, max(pooled, floor))

    log_joint = _log_joint(values, weights, means, variances)
    log_norm = _logsumexp_rows(log_joint)
    ll = float(np.dot(counts, log_norm))
    history = [ll]
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        resp = np.exp(log_joint - log_norm[:, None]) * counts[:, None]
        nk = resp.sum(axis=0)
        alive = nk > 0
        new_means = means.copy()
        new_vars = variances.copy()
        new_means[alive] = (resp[:, alive] * values[:, None]).sum(axis=0) / nk[alive]
        diff = values[:, None] - new_means[None, :]
        new_vars[alive] = (resp[:, alive] * diff[:, alive] ** 2).sum(axis=0) / nk[alive]
        weights = nk / n
        means = new_means
        variances = np.maximum(new_vars, floor)

        log_joint = _log_joint(values, weights, means, variances)
        log_norm = _logsumexp_rows(log_joint)
        new_ll = float(np.dot(counts, log_norm))
        history.append(new_ll)
        improved = new_ll - ll
        ll = new_ll
        if improved < tol:
            break

    return GmmParams(
        k=k,
        weights=weights,
        means=means,
        variances=variances,
        log_likelihood=ll,
        ll_history=tuple(history),
        n_iter=n_iter,
    )


def gmm_free_parameters(k: int) -> int:
    """Free parameters of a univariate k-component mixture: (k-1) + k + k."""
    return 3 * k - 1


def bic_select(
    samples,
    k_sup: int = 3,
    seed: int = 0,
    tol: float = 1e-6,
    max_iter: int = 200,
) -> BicResult:
    """Choose the mixture order in ``[1, k_sup]`` minimising BIC.

    ``BIC(K) = -2 ln L(theta_K) + v_K ln n``; orders beyond the sample count
    are skipped and ties go to the smaller order.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size == 0:
        raise InsufficientDataError("cannot select a mixture order from zero samples")
    if k_sup < 1:
        raise ValueError("k_sup must be >= 1")
    n = x.size
    fits, bics, dofs = [], [], []
    for k in range(1, min(k_sup, n) + 1):
        params = em_fit_gmm(x, k, seed=seed, tol=tol, max_iter=max_iter)
        v = gmm_free_parameters(k)
        fits.append(params)
        dofs.append(v)
        bics.append(-2.0 * params.log_likelihood + v * math.log(n))
    best = int(np.argmin(bics))
    return BicResult(
        chosen_k=best + 1,
        params=fits[best],
        bic_values=tuple(bics),
        v_k=tuple(dofs),
        n=n,
    )


# --------------------------------------------------------------------------
# Descriptor assembly
# --------------------------------------------------------------------------


def descriptor_length(k_sup: int) -> int:
    return 2 * k_sup + 4


def descriptor_names(k_sup: int) -> list[str]:
    return (
        [f"w{i + 1}" for i in range(k_sup)]
        + [f"mu{i + 1}" for i in range(k_sup)]
        + list(HARALICK_NAMES)
    )


def block_descriptor(block: GrayImage, cfg: FeatureConfig = FeatureConfig()) -> np.ndarray:
    """Descriptor ``[weights(k_sup), means(k_sup), E, ENT, CONT, HOM]``.

    Mixture components are sorted by ascending mean and zero padded beyond
    the chosen order.  Blocks too small for the co-occurrence offset get the
    uniform matrix instead of failing.
    """
    fit = bic_select(
        block.pixels, k_sup=cfg.k_sup, seed=cfg.seed, tol=cfg.tol, max_iter=cfg.max_iter
    ).params.sorted_by_mean()
    try:
        m = glcm(block, cfg.levels, cfg.offset)
    except DegenerateBlockError:
        m = uniform_glcm(cfg.levels)
    out = np.zeros(descriptor_length(cfg.k_sup))
    out[: fit.k] = fit.weights
    out[cfg.k_sup : cfg.k_sup + fit.k] = fit.means
    out[2 * cfg.k_sup :] = haralick(m)
    return out
