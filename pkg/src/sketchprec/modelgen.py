"""Synthetic ground truth: block-sparse precision matrices and Gaussian data.

A precision matrix is assembled from L independent blocks of size d/L whose
support follows either an Erdos-Renyi law (each within-block edge kept with
probability p) or a preferential-attachment tree whose degrees follow a
power law. Selected coefficients are ``eps * u`` with ``u ~ Unif[1, 4]``
and a fair sign ``eps``; the matrix is then shifted by
``(0.1 + max(0, -lam_min)) I`` so its spectrum starts at 0.1, and finally
rows and columns are permuted uniformly at random.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .symmat import check_symmetric, eig_sym, load_spmx, save_spmx, symmetrize

__all__ = [
    "GeneratorSpec",
    "GroundTruth",
    "generate",
    "sample_gaussian",
    "empirical_covariance",
    "model_membership",
    "save_ground_truth",
    "load_ground_truth",
    "DEFAULT_ZERO_TOL",
]

KIND_ERDOS = "erdos"
KIND_POWERLAW = "powerlaw"

DEFAULT_ZERO_TOL = 1e-8
_MIN_EIG_FLOOR = 0.1


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    d: int
    num_blocks: int
    p: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.kind not in (KIND_ERDOS, KIND_POWERLAW):
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if self.d < 1 or self.num_blocks < 1 or self.d % self.num_blocks != 0:
            raise ValueError("d must be a positive multiple of num_blocks")
        if not 0.0 < self.p < 1.0:
            raise ValueError("edge probability must lie in (0, 1)")


@dataclass
class GroundTruth:
    theta: np.ndarray
    sigma: np.ndarray
    support: frozenset  # undirected pairs (i, j), i < j
    nnz: int
    spec: GeneratorSpec = field(default=None)


def _erdos_block_edges(rng, size: int, p: float):
    iu, ju = np.triu_indices(size, k=1)
    keep = rng.random(iu.size) < p
    return list(zip(iu[keep].tolist(), ju[keep].tolist()))


def _powerlaw_tree_edges(rng, size: int):
    # Preferential attachment: node i >= 1 joins an existing node drawn with
    # probability proportional to degree + 1, giving a power-law degree tree.
    edges = []
    weights = np.zeros(size)
    weights[0] = 1.0
    for i in range(1, size):
        probs = weights[:i] / weights[:i].sum()
        j = int(rng.choice(i, p=probs))
        edges.append((j, i))
        weights[j] += 1.0
        weights[i] = 1.0
    return edges


def generate(spec: GeneratorSpec) -> GroundTruth:
    """Draw a ground-truth (precision, covariance) pair for one seed."""
    rng = np.random.Generator(np.random.Philox(spec.seed))
    d = spec.d
    size = d // spec.num_blocks
    theta = np.zeros((d, d))
    for b in range(spec.num_blocks):
        off = b * size
        if spec.kind == KIND_ERDOS:
            edges = _erdos_block_edges(rng, size, spec.p)
        else:
            edges = _powerlaw_tree_edges(rng, size) if size > 1 else []
        for i, j in edges:
            u = rng.uniform(1.0, 4.0)
            eps = 1.0 if rng.random() < 0.5 else -1.0
            theta[off + i, off + j] = theta[off + j, off + i] = eps * u
    theta = symmetrize(theta)
    lam_min = float(np.linalg.eigvalsh(theta)[0])
    theta += (_MIN_EIG_FLOOR + max(0.0, -lam_min)) * np.eye(d)
    perm = rng.permutation(d)
    theta = theta[np.ix_(perm, perm)]

    w, v = eig_sym(theta)
    sigma = symmetrize((v * (1.0 / w)) @ v.T)

    iu, ju = np.where(np.triu(np.abs(theta) > DEFAULT_ZERO_TOL, k=1))
    support = frozenset(zip(iu.tolist(), ju.tolist()))
    return GroundTruth(
        theta=theta,
        sigma=sigma,
        support=support,
        nnz=d + 2 * len(support),
        spec=spec,
    )


def sample_gaussian(gt: GroundTruth, n: int, seed: int) -> np.ndarray:
    """Draw ``n`` centered Gaussian samples with covariance ``gt.sigma``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    w, v = eig_sym(gt.sigma)
    rootw = np.sqrt(np.maximum(w, 0.0))
    rng = np.random.Generator(np.random.Philox(seed))
    z = rng.standard_normal((n, gt.sigma.shape[0]))
    return (z * rootw) @ v.T


def empirical_covariance(data) -> np.ndarray:
    """Uncentered second-moment matrix ``(1/n) sum_i x_i x_i'``."""
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError("data must be a non-empty (n, d) array")
    return symmetrize(x.T @ x / x.shape[0])


def model_membership(
    theta,
    k: int,
    a: float,
    b: float,
    zero_tol: float = DEFAULT_ZERO_TOL,
) -> bool:
    """Check sparsity (off-diagonal nnz <= 2k) and spectrum within [a, b]."""
    theta = check_symmetric(theta)
    if not (0 < a <= b):
        raise ValueError("need 0 < a <= b")
    off = np.abs(theta) > zero_tol
    np.fill_diagonal(off, False)
    if int(off.sum()) > 2 * k:
        return False
    eigs = np.linalg.eigvalsh(theta)
    return bool(eigs[0] >= a - 1e-9 and eigs[-1] <= b + 1e-9)


def save_ground_truth(directory, gt: GroundTruth) -> None:
    """Persist theta/sigma as SPMX files plus a JSON metadata sidecar."""
    import os

    os.makedirs(directory, exist_ok=True)
    save_spmx(os.path.join(directory, "theta.spmx"), gt.theta)
    save_spmx(os.path.join(directory, "sigma.spmx"), gt.sigma)
    meta = {
        "kind": gt.spec.kind if gt.spec else None,
        "d": int(gt.theta.shape[0]),
        "blocks": gt.spec.num_blocks if gt.spec else None,
        "p": gt.spec.p if gt.spec else None,
        "seed": gt.spec.seed if gt.spec else None,
        "nnz": gt.nnz,
        "support": sorted(list(pair) for pair in gt.support),
    }
    with open(os.path.join(directory, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2)


def load_ground_truth(directory) -> GroundTruth:
    import os

    theta = load_spmx(os.path.join(directory, "theta.spmx"))
    sigma = load_spmx(os.path.join(directory, "sigma.spmx"))
    with open(os.path.join(directory, "meta.json")) as fh:
        meta = json.load(fh)
    spec = None
    if meta.get("kind"):
        spec = GeneratorSpec(
            kind=meta["kind"],
            d=meta["d"],
            num_blocks=meta["blocks"],
            p=meta["p"],
            seed=meta["seed"],
        )
    return GroundTruth(
        theta=theta,
        sigma=sigma,
        support=frozenset(tuple(pair) for pair in meta["support"]),
        nnz=meta["nnz"],
        spec=spec,
    )
