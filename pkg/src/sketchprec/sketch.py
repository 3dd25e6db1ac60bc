"""Rank-one sketching operators.

Two operator families over symmetric matrices:

* ``dense``: m explicit random unit-scale vectors ``a_j`` (Gaussian with
  covariance I/d_pad, or uniform on the sphere), stored as a (d_pad, m)
  matrix.
* ``structured``: m/d_pad triple-Rademacher blocks
  ``B_l = d_pad**-1.5 * H D1 H D2 H D3`` whose columns have unit norm; only
  the 3 sign diagonals per block are stored, so the operator state is O(m)
  scalars and a projection costs O(m log d).

The measurement map is ``A(M)_j = a_j' M a_j / m`` and its adjoint is
``A*(y) = (1/m) sum_j y_j a_j a_j'``. The per-sample feature map squares the
projections: ``phi(x) = ((a_j' x)**2 / m)_j``, so a dataset sketch
``mean_i phi(x_i)`` equals ``A`` applied to the empirical second-moment
matrix.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .fwht import is_pow2, next_pow2
from .symmat import check_symmetric, symmetrize

__all__ = [
    "SketchOperator",
    "Sketch",
    "N_INFINITE",
    "build_operator",
    "dense_operator_from_vectors",
    "apply_features",
    "apply_A",
    "apply_adjoint",
    "sketch_stream",
    "sketch_of_matrix",
    "merge",
    "lambda_norm_mc",
    "materialize",
    "column_norms",
    "sigma_max_sq",
    "save_skch",
    "load_skch",
    "operator_for_sketch",
]

KIND_DENSE = "dense"
KIND_STRUCTURED = "structured"
DIST_GAUSSIAN = "gaussian"
DIST_UNIFORM_SPHERE = "uniform_sphere"
DIST_INJECTED = "injected"

_STREAM_CHUNK = 256

# Sample-count sentinel for sketches of an exact covariance matrix.
N_INFINITE = 2**63

_SKCH_MAGIC = b"SKCH"
_SKCH_VERSION = 1
_KIND_CODES = {KIND_DENSE: 0, KIND_STRUCTURED: 1}
_DIST_CODES = {DIST_GAUSSIAN: 0, DIST_UNIFORM_SPHERE: 1, None: 255}
_KIND_FROM_CODE = {v: k for k, v in _KIND_CODES.items()}
_DIST_FROM_CODE = {v: k for k, v in _DIST_CODES.items()}


def _rng(seed: int) -> np.random.Generator:
    # Philox: counter-based, identical stream on every platform.
    return np.random.Generator(np.random.Philox(seed))


@dataclass
class SketchOperator:
    """Measurement operator state. Treat instances as immutable."""

    kind: str
    dist: str | None
    d_orig: int
    d_pad: int
    m: int
    seed: int
    vectors: np.ndarray | None = None  # dense: (d_pad, m)
    signs: np.ndarray | None = None  # structured: (B, 3, d_pad), entries +-1
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_blocks(self) -> int:
        if self.kind != KIND_STRUCTURED:
            raise AttributeError("n_blocks is only defined for structured operators")
        return self.m // self.d_pad

    @property
    def fingerprint(self) -> tuple:
        return (self.kind, self.seed, self.dist, self.m, self.d_pad)

    def stored_sign_entries(self) -> int:
        """Number of stored sign scalars (structured memory footprint)."""
        return 0 if self.signs is None else int(self.signs.size)


@dataclass
class Sketch:
    """An m-vector dataset summary plus the provenance needed to decode it."""

    values: np.ndarray
    m: int
    d_orig: int
    d_pad: int
    n: int
    fingerprint: tuple

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.m,):
            raise ValueError(f"values must have shape ({self.m},)")
        if not np.isfinite(self.values).all():
            raise ValueError("sketch values must be finite")
        if self.n < 0:
            raise ValueError("sample count must be >= 0")
        if self.n == 0 and np.any(self.values != 0.0):
            raise ValueError("an empty sketch must be all zero")


def build_operator(
    kind: str,
    d: int,
    m: int,
    seed: int,
    dist: str = DIST_GAUSSIAN,
) -> SketchOperator:
    """Draw a reproducible sketching operator.

    Parameters
    ----------
    kind : {"dense", "structured"}
    d : int
        Data dimension. Internally padded to ``d_pad``, the next power of two.
    m : int
        Requested number of measurements. For structured operators this is
        rounded up to the next multiple of ``d_pad`` and the effective value
        is recorded on the operator.
    seed : int
        PRNG seed; identical arguments give bit-identical operators.
    dist : {"gaussian", "uniform_sphere"}
        Column law for dense operators. Ignored for structured ones.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    if m < 1:
        raise ValueError("m must be >= 1")
    d_pad = next_pow2(d)
    rng = _rng(seed)
    if kind == KIND_STRUCTURED:
        n_blocks = -(-m // d_pad)  # ceil division
        m_eff = n_blocks * d_pad
        if m_eff > 2**40:
            raise OverflowError(f"padded sketch size {m_eff} is unreasonably large")
        raw = rng.integers(0, 2, size=(n_blocks, 3, d_pad))
        signs = (2.0 * raw - 1.0).astype(np.float64)
        return SketchOperator(
            kind=kind, dist=None, d_orig=d, d_pad=d_pad, m=m_eff, seed=seed, signs=signs
        )
    if kind == KIND_DENSE:
        if dist == DIST_GAUSSIAN:
            vectors = rng.standard_normal((d_pad, m)) / np.sqrt(d_pad)
        elif dist == DIST_UNIFORM_SPHERE:
            g = rng.standard_normal((d_pad, m))
            vectors = g / np.linalg.norm(g, axis=0)
        else:
            raise ValueError(f"unknown distribution {dist!r}")
        return SketchOperator(
            kind=kind, dist=dist, d_orig=d, d_pad=d_pad, m=m, seed=seed, vectors=vectors
        )
    raise ValueError(f"unknown operator kind {kind!r}")


def dense_operator_from_vectors(vectors, d_orig: int | None = None) -> SketchOperator:
    """Build a dense operator from caller-supplied columns (test injection)."""
    a = np.asarray(vectors, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("vectors must be a (d, m) array")
    d, m = a.shape
    if not is_pow2(d):
        raise ValueError("injected vectors must live in a power-of-two dimension")
    if d_orig is None:
        d_orig = d
    if next_pow2(d_orig) != d:
        raise ValueError(f"d_orig={d_orig} does not pad to {d}")
    return SketchOperator(
        kind=KIND_DENSE,
        dist=DIST_INJECTED,
        d_orig=d_orig,
        d_pad=d,
        m=m,
        seed=0,
        vectors=a.copy(),
    )


def _pad_rows(x: np.ndarray, d_pad: int) -> np.ndarray:
    """Zero-pad the rows of an (n, d) array to length d_pad (always copies)."""
    n, d = x.shape
    out = np.zeros((n, d_pad), dtype=np.float64)
    out[:, :d] = x
    return out


def _block_scale(d_pad: int) -> float:
    return float(d_pad) ** -1.5


def _projections(op: SketchOperator, rows: np.ndarray) -> np.ndarray:
    """Return A.T @ x for every row x, shape (n, m). Rows must be length d_orig."""
    padded = _pad_rows(rows, op.d_pad)
    if op.kind == KIND_DENSE:
        return padded @ op.vectors
    out = np.empty((rows.shape[0], op.m), dtype=np.float64)
    scale = _block_scale(op.d_pad)
    for l in range(op.n_blocks):
        s1, s2, s3 = op.signs[l]
        buf = padded.copy()
        _kernels.triple_rt_rows(buf, s1, s2, s3, scale)
        out[:, l * op.d_pad : (l + 1) * op.d_pad] = buf
    return out


def _backproject(op: SketchOperator, w: np.ndarray) -> np.ndarray:
    """Return A @ w for an m-vector w, shape (d_pad,)."""
    if op.kind == KIND_DENSE:
        return op.vectors @ w
    scale = _block_scale(op.d_pad)
    acc = np.zeros(op.d_pad, dtype=np.float64)
    for l in range(op.n_blocks):
        s1, s2, s3 = op.signs[l]
        buf = w[l * op.d_pad : (l + 1) * op.d_pad].copy().reshape(1, -1)
        _kernels.triple_r_rows(buf, s1, s2, s3, scale)
        acc += buf[0]
    return acc


def apply_features(op: SketchOperator, x) -> np.ndarray:
    """Per-sample feature map: ``((a_j' x)**2 / m)_j``."""
    v = np.asarray(x, dtype=np.float64)
    if v.shape != (op.d_orig,):
        raise ValueError(f"expected a length-{op.d_orig} vector, got shape {v.shape}")
    if not np.isfinite(v).all():
        raise ValueError("input vector must be finite")
    proj = _projections(op, v.reshape(1, -1))[0]
    return proj * proj / op.m


def apply_A(op: SketchOperator, mat) -> np.ndarray:
    """Measure a symmetric matrix: entry j is ``a_j' M a_j / m``."""
    mat = check_symmetric(mat)
    if mat.shape[0] != op.d_orig:
        raise ValueError(f"expected a {op.d_orig}x{op.d_orig} matrix, got {mat.shape}")
    d_pad = op.d_pad
    padded = np.zeros((d_pad, d_pad), dtype=np.float64)
    padded[: op.d_orig, : op.d_orig] = mat
    if op.kind == KIND_DENSE:
        return np.einsum("dm,dm->m", op.vectors, padded @ op.vectors) / op.m
    out = np.empty(op.m, dtype=np.float64)
    scale = _block_scale(d_pad)
    for l in range(op.n_blocks):
        s1, s2, s3 = op.signs[l]
        # rows of `right` are B.T applied to the rows of M, so right == M @ B
        right = padded.copy()
        _kernels.triple_rt_rows(right, s1, s2, s3, scale)
        both = np.ascontiguousarray(right.T)
        _kernels.triple_rt_rows(both, s1, s2, s3, scale)  # row j = B.T (M B) e_j
        out[l * d_pad : (l + 1) * d_pad] = np.einsum("jj->j", both)
    return out / op.m


def apply_adjoint(op: SketchOperator, y) -> np.ndarray:
    """Adjoint measurement: ``(1/m) sum_j y_j a_j a_j'`` cropped to d_orig."""
    w = np.asarray(y, dtype=np.float64)
    if w.shape != (op.m,):
        raise ValueError(f"expected a length-{op.m} vector, got shape {w.shape}")
    if not np.isfinite(w).all():
        raise ValueError("input vector must be finite")
    d_pad = op.d_pad
    if op.kind == KIND_DENSE:
        g = (op.vectors * w) @ op.vectors.T / op.m
    else:
        scale = _block_scale(d_pad)
        g = np.zeros((d_pad, d_pad), dtype=np.float64)
        for l in range(op.n_blocks):
            s1, s2, s3 = op.signs[l]
            rows = np.diag(w[l * d_pad : (l + 1) * d_pad]).copy()
            _kernels.triple_r_rows(rows, s1, s2, s3, scale)  # rows == diag(y_l) B.T
            q = np.ascontiguousarray(rows.T)
            _kernels.triple_r_rows(q, s1, s2, s3, scale)  # row c = B (diag(y_l) B.T) e_c
            g += q.T
        g /= op.m
    return symmetrize(g[: op.d_orig, : op.d_orig])


def sketch_of_matrix(op: SketchOperator, mat, n: int | None = None) -> Sketch:
    """Sketch a covariance matrix directly (the infinite-sample regime).

    ``n`` defaults to the :data:`N_INFINITE` sentinel, marking a sketch of
    an exact second-moment matrix rather than of finitely many samples.
    """
    return Sketch(
        values=apply_A(op, mat),
        m=op.m,
        d_orig=op.d_orig,
        d_pad=op.d_pad,
        n=N_INFINITE if n is None else n,
        fingerprint=op.fingerprint,
    )


def sketch_stream(op: SketchOperator, data) -> Sketch:
    """One-pass sketch of a stream of d-dimensional samples.

    ``data`` may be an (n, d) array or any iterable of length-d vectors.
    Samples are consumed in fixed-size chunks and folded into a running
    mean, so the result is byte-deterministic for a given input order.
    An empty stream yields the flagged n=0 zero sketch.
    """
    mean = np.zeros(op.m, dtype=np.float64)
    count = 0
    chunk: list[np.ndarray] = []

    def _fold(rows: np.ndarray):
        nonlocal mean, count
        proj = _projections(op, rows)
        phi_sum = np.einsum("nm,nm->m", proj, proj) / op.m
        total = count + rows.shape[0]
        mean = (mean * count + phi_sum) / total
        count = total

    if isinstance(data, np.ndarray) and data.ndim == 2:
        if data.shape[1] != op.d_orig:
            raise ValueError(f"samples must have length {op.d_orig}")
        if not np.isfinite(data).all():
            raise ValueError("samples must be finite")
        for start in range(0, data.shape[0], _STREAM_CHUNK):
            _fold(np.asarray(data[start : start + _STREAM_CHUNK], dtype=np.float64))
    else:
        for x in data:
            v = np.asarray(x, dtype=np.float64)
            if v.shape != (op.d_orig,):
                raise ValueError(f"samples must have length {op.d_orig}")
            if not np.isfinite(v).all():
                raise ValueError("samples must be finite")
            chunk.append(v)
            if len(chunk) == _STREAM_CHUNK:
                _fold(np.stack(chunk))
                chunk = []
        if chunk:
            _fold(np.stack(chunk))

    return Sketch(
        values=mean if count > 0 else np.zeros(op.m),
        m=op.m,
        d_orig=op.d_orig,
        d_pad=op.d_pad,
        n=count,
        fingerprint=op.fingerprint,
    )


def merge(s1: Sketch, s2: Sketch) -> Sketch:
    """Combine sketches of two data shards: sample-weighted mean."""
    if s1.fingerprint != s2.fingerprint or s1.d_orig != s2.d_orig:
        raise ValueError("cannot merge sketches from different operators")
    if s1.n >= N_INFINITE or s2.n >= N_INFINITE:
        raise ValueError("cannot merge sketches of exact covariance matrices")
    n = s1.n + s2.n
    if n == 0:
        values = np.zeros(s1.m)
    else:
        values = (s1.values * s1.n + s2.values * s2.n) / n
    return Sketch(
        values=values,
        m=s1.m,
        d_orig=s1.d_orig,
        d_pad=s1.d_pad,
        n=n,
        fingerprint=s1.fingerprint,
    )


def lambda_norm_mc(
    mat,
    dist: str,
    n_samples: int,
    seed: int,
    with_stderr: bool = False,
):
    """Monte-Carlo estimate of the measurement norm ``E_a |a' M a|``.

    ``a`` is drawn from the requested law on the matrix's own dimension:
    Gaussian with covariance I/d, or uniform on the unit sphere. Returns the
    sample mean, or ``(mean, stderr)`` when ``with_stderr`` is set.
    """
    mat = check_symmetric(mat)
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    d = mat.shape[0]
    rng = _rng(seed)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < n_samples:
        k = min(65536, n_samples - done)
        a = rng.standard_normal((k, d))
        if dist == DIST_GAUSSIAN:
            a /= np.sqrt(d)
        elif dist == DIST_UNIFORM_SPHERE:
            a /= np.linalg.norm(a, axis=1, keepdims=True)
        else:
            raise ValueError(f"unknown distribution {dist!r}")
        vals = np.abs(np.einsum("nd,nd->n", a @ mat, a))
        total += float(vals.sum())
        total_sq += float((vals * vals).sum())
        done += k
    mean = total / n_samples
    if not with_stderr:
        return mean
    var = max(total_sq / n_samples - mean * mean, 0.0)
    stderr = np.sqrt(var / n_samples)
    return mean, stderr


def materialize(op: SketchOperator) -> np.ndarray:
    """Dense (d_pad, m) column matrix. Intended for tests and small probes."""
    if op.kind == KIND_DENSE:
        return op.vectors.copy()
    scale = _block_scale(op.d_pad)
    blocks = []
    for l in range(op.n_blocks):
        s1, s2, s3 = op.signs[l]
        buf = np.eye(op.d_pad)
        _kernels.triple_rt_rows(buf, s1, s2, s3, scale)  # row i = B.T e_i = B[i, :]
        blocks.append(buf)
    return np.hstack(blocks)


def column_norms(op: SketchOperator) -> np.ndarray:
    """Euclidean norms of the measurement vectors a_j (cached)."""
    if "column_norms" not in op._cache:
        if op.kind == KIND_DENSE:
            norms = np.linalg.norm(op.vectors, axis=0)
        else:
            scale = _block_scale(op.d_pad)
            parts = []
            for l in range(op.n_blocks):
                s1, s2, s3 = op.signs[l]
                buf = np.eye(op.d_pad)
                _kernels.triple_rt_rows(buf, s1, s2, s3, scale)
                parts.append(np.linalg.norm(buf, axis=0))
            norms = np.concatenate(parts)
        op._cache["column_norms"] = norms
    return op._cache["column_norms"]


def _proj_padded(op: SketchOperator, v: np.ndarray) -> np.ndarray:
    """Return A.T @ v for a vector already living in the padded space."""
    if op.kind == KIND_DENSE:
        return op.vectors.T @ v
    scale = _block_scale(op.d_pad)
    out = np.empty(op.m, dtype=np.float64)
    for l in range(op.n_blocks):
        s1, s2, s3 = op.signs[l]
        buf = v.copy().reshape(1, -1)
        _kernels.triple_rt_rows(buf, s1, s2, s3, scale)
        out[l * op.d_pad : (l + 1) * op.d_pad] = buf[0]
    return out


def sigma_max_sq(op: SketchOperator, tol: float = 1e-8, max_iter: int = 1000) -> float:
    """Largest eigenvalue of A A' by power iteration (cached per operator)."""
    if "sigma_max_sq" not in op._cache:
        rng = _rng(op.seed ^ 0x5EED)
        v = rng.standard_normal(op.d_pad)
        v /= np.linalg.norm(v)
        lam_prev = 0.0
        lam = 0.0
        for _ in range(max_iter):
            w = _backproject(op, _proj_padded(op, v))
            lam = float(np.linalg.norm(w))
            if lam == 0.0:
                break
            v = w / lam
            if abs(lam - lam_prev) <= tol * max(lam, 1.0):
                break
            lam_prev = lam
        op._cache["sigma_max_sq"] = lam
    return op._cache["sigma_max_sq"]


def save_skch(path, s: Sketch) -> None:
    """Write a sketch in the binary SKCH format.

    Layout (little-endian): magic ``SKCH``, u32 version, u8 kind, u8 dist,
    u64 seed, u64 d_orig, u64 d_pad, u64 m, u64 n, then m float64 values.
    """
    kind, seed, dist, m, d_pad = s.fingerprint
    if kind not in _KIND_CODES or dist not in _DIST_CODES:
        raise ValueError(f"sketch from a non-persistable operator: {kind}/{dist}")
    with open(path, "wb") as fh:
        fh.write(_SKCH_MAGIC)
        fh.write(struct.pack("<I", _SKCH_VERSION))
        fh.write(struct.pack("<BB", _KIND_CODES[kind], _DIST_CODES[dist]))
        fh.write(struct.pack("<QQQQQ", seed, s.d_orig, d_pad, m, s.n))
        fh.write(np.ascontiguousarray(s.values, dtype="<f8").tobytes())


def load_skch(path) -> Sketch:
    """Read a sketch written by :func:`save_skch`."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _SKCH_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}, expected {_SKCH_MAGIC!r}")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != _SKCH_VERSION:
            raise ValueError(f"{path}: unsupported SKCH version {version}")
        kind_code, dist_code = struct.unpack("<BB", fh.read(2))
        seed, d_orig, d_pad, m, n = struct.unpack("<QQQQQ", fh.read(40))
        values = np.frombuffer(fh.read(8 * m), dtype="<f8")
        if values.size != m:
            raise ValueError(f"{path}: truncated payload")
    kind = _KIND_FROM_CODE[kind_code]
    dist = _DIST_FROM_CODE[dist_code]
    return Sketch(
        values=values.astype(np.float64),
        m=m,
        d_orig=d_orig,
        d_pad=d_pad,
        n=n,
        fingerprint=(kind, seed, dist, m, d_pad),
    )


def operator_for_sketch(s: Sketch) -> SketchOperator:
    """Rebuild the operator a sketch was produced with from its fingerprint."""
    kind, seed, dist, m, d_pad = s.fingerprint
    op = build_operator(kind, s.d_orig, m, seed, dist=dist or DIST_GAUSSIAN)
    if op.fingerprint != s.fingerprint:
        raise ValueError("operator reconstruction mismatch; sketch metadata corrupt")
    return op
