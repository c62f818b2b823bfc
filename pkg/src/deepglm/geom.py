"""High-dimensional ball concentration and hyperplane partition counting.

Uniform ball samples concentrate: any fixed unit projection has variance
r^2/(p+2), so marginals collapse toward the equator as p grows and, after
rescaling the ball radius to sqrt(p+2), look standard normal.  n generic
hyperplanes split the plane into 1 + n + n(n-1)/2 regions, which is also
the number of on/off patterns a single ReLU layer with n neurons realizes.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import ShapeError, as_matrix, as_vector
from .nnet import Network
from .rng import Rng

GRID_BOX = 5.0      # pattern grid spans [-5, 5] per axis
GRID_N_2D = 2001
GRID_N_3D = 201


def ball_sample(p: int, r: float, n: int, rng: Rng) -> np.ndarray:
    """n exact uniform draws from the p-ball of radius r (one per column).

    Directions come from normalized Gaussians; radii from r * U^(1/p).
    """
    if p < 1:
        raise ValueError("dimension must be >= 1")
    if r <= 0:
        raise ValueError("radius must be positive")
    if n < 1:
        raise ValueError("need at least one sample")
    G = rng.std_normal(p * n).reshape(p, n)
    G /= np.linalg.norm(G, axis=0, keepdims=True)
    radii = r * rng.uniform01(n) ** (1.0 / p)
    return G * radii


def project(samples, w) -> np.ndarray:
    """Inner products w' y per sample column."""
    samples = as_matrix(samples)
    w = as_vector(w)
    if len(w) != samples.shape[0]:
        raise ShapeError(f"w has length {len(w)}, samples have {samples.shape[0]} rows")
    if np.all(w == 0.0):
        raise ValueError("projection vector must be nonzero")
    return w @ samples


def normal_cdf(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return 0.5 * (1.0 + np.vectorize(math.erf)(x / math.sqrt(2.0)))


def disk_marginal_cdf(t) -> np.ndarray:
    """CDF of one coordinate of a uniform draw from the unit disk:
    density (2/pi) sqrt(1 - t^2) on [-1, 1]."""
    t = np.clip(np.asarray(t, dtype=np.float64), -1.0, 1.0)
    return 0.5 + (t * np.sqrt(1.0 - t ** 2) + np.arcsin(t)) / math.pi


def ks_statistic(samples, cdf) -> float:
    """Kolmogorov-Smirnov distance between a sample and a given CDF."""
    x = np.sort(as_vector(samples))
    n = len(x)
    F = cdf(x)
    hi = np.abs(np.arange(1, n + 1) / n - F)
    lo = np.abs(np.arange(0, n) / n - F)
    return float(max(hi.max(), lo.max()))


def maxwell_check(p: int, n: int, rng: Rng) -> float:
    """KS distance to N(0,1) of a unit projection of ball samples.

    The ball radius is sqrt(p+2) so the projection has unit variance; at
    large p the marginal is then close to standard normal.
    """
    if p < 2:
        raise ValueError("dimension must be >= 2")
    samples = ball_sample(p, math.sqrt(p + 2.0), n, rng)
    return ks_statistic(samples[0], normal_cdf)


# ---------------------------------------------------------------------------
# Hyperplane arrangements and ReLU activation patterns
# ---------------------------------------------------------------------------

@dataclass
class Arrangement:
    """Hyperplanes (w, b) in dimension d, each defining {x : w.x + b = 0}."""
    hyperplanes: list = field(default_factory=list)

    def __post_init__(self):
        for w, b in self.hyperplanes:
            if np.all(as_vector(w) == 0.0):
                raise ValueError("hyperplane normal must be nonzero")

    @property
    def dim(self) -> int:
        return len(self.hyperplanes[0][0]) if self.hyperplanes else 0


@functools.lru_cache(maxsize=2)
def _grid_points(d: int) -> np.ndarray:
    if d == 2:
        axis = np.linspace(-GRID_BOX, GRID_BOX, GRID_N_2D)
        A, B = np.meshgrid(axis, axis, indexing="ij")
        return np.vstack([A.ravel(), B.ravel()])
    if d == 3:
        axis = np.linspace(-GRID_BOX, GRID_BOX, GRID_N_3D)
        A, B, C = np.meshgrid(axis, axis, axis, indexing="ij")
        return np.vstack([A.ravel(), B.ravel(), C.ravel()])
    raise ValueError("grid method supports dimensions 2 and 3 only")


def _count_patterns(W: np.ndarray, b: np.ndarray, points: np.ndarray) -> int:
    if W.shape[0] > 63:
        raise ValueError("pattern packing supports at most 63 hyperplanes")
    code = np.zeros(points.shape[1], dtype=np.uint64)
    for i in range(W.shape[0]):
        side = (W[i] @ points + b[i]) > 0.0
        code |= side.astype(np.uint64) << np.uint64(i)
    return int(np.unique(code).size)


def _check_generic_2d(arr: Arrangement, tol: float = 1e-9) -> None:
    planes = [(as_vector(w), float(b)) for w, b in arr.hyperplanes]
    n = len(planes)
    pts = {}
    for i in range(n):
        for j in range(i + 1, n):
            (wi, bi), (wj, bj) = planes[i], planes[j]
            det = wi[0] * wj[1] - wi[1] * wj[0]
            scale = np.linalg.norm(wi) * np.linalg.norm(wj)
            if abs(det) <= tol * scale:
                raise ValueError(f"hyperplanes {i} and {j} are parallel")
            x = np.linalg.solve(np.vstack([wi, wj]), -np.array([bi, bj]))
            pts[(i, j)] = x
    for (i, j), x in pts.items():
        for k in range(n):
            if k in (i, j):
                continue
            wk, bk = planes[k]
            if abs(wk @ x + bk) <= tol * (1.0 + np.linalg.norm(x)) * np.linalg.norm(wk):
                raise ValueError(f"hyperplanes {i}, {j}, {k} are concurrent")


def count_regions(arr: Arrangement, method: str = "grid") -> int:
    """Number of regions the arrangement cuts the space into.

    "grid" counts distinct sign patterns over a dense box grid (dim <= 3;
    regions lying entirely outside [-5, 5]^d are missed).  "oracle" applies
    the plane-counting formula 1 + n + n(n-1)/2 for n generic lines (2-D
    only) and raises on parallel or concurrent inputs.
    """
    n = len(arr.hyperplanes)
    if n == 0:
        return 1
    if method == "oracle":
        if arr.dim != 2:
            raise ValueError("oracle method is 2-D only")
        _check_generic_2d(arr)
        return 1 + n + n * (n - 1) // 2
    if method != "grid":
        raise ValueError(f"unknown method: {method!r}")
    W = np.vstack([as_vector(w) for w, _ in arr.hyperplanes])
    b = np.array([float(b) for _, b in arr.hyperplanes])
    return _count_patterns(W, b, _grid_points(arr.dim))


def relu_regions(net: Network) -> int:
    """Distinct on/off activation patterns of a 2-D single-ReLU-layer net.

    Equals count_regions of the arrangement {(W_row, b_row)} over the same
    grid; layers above the first do not affect the count.
    """
    if net.input_dim != 2:
        raise ShapeError("relu_regions expects a 2-D input network")
    if not net.layers or net.layers[0].act != "relu":
        raise ValueError("first layer must use the relu activation")
    layer = net.layers[0]
    return _count_patterns(layer.W, layer.b, _grid_points(2))


def induced_arrangement(net: Network) -> Arrangement:
    """The hyperplane arrangement carved by the first layer's neurons."""
    layer = net.layers[0]
    return Arrangement([(layer.W[i].copy(), float(layer.b[i]))
                        for i in range(layer.W.shape[0])])


def region_raster(arr: Arrangement, grid_n: int = 401):
    """(xs, ys, codes) raster of sign-pattern ids over the standard box."""
    axis = np.linspace(-GRID_BOX, GRID_BOX, grid_n)
    A, B = np.meshgrid(axis, axis, indexing="ij")
    points = np.vstack([A.ravel(), B.ravel()])
    W = np.vstack([as_vector(w) for w, _ in arr.hyperplanes])
    b = np.array([float(bb) for _, bb in arr.hyperplanes])
    code = np.zeros(points.shape[1], dtype=np.uint64)
    for i in range(W.shape[0]):
        side = (W[i] @ points + b[i]) > 0.0
        code |= side.astype(np.uint64) << np.uint64(i)
    _, dense = np.unique(code, return_inverse=True)
    return axis, axis, dense.reshape(grid_n, grid_n)


# ---------------------------------------------------------------------------
# Two-dimensional toy datasets
# ---------------------------------------------------------------------------

DATASET_KINDS = ("simple", "circle", "spiral")


@dataclass
class Dataset2D:
    points: np.ndarray   # 2 x n
    labels: np.ndarray   # n, values in {0, 1}
    kind: str


def gen_dataset2d(kind: str, n: int, noise: float, seed: int) -> Dataset2D:
    """Balanced two-class 2-D datasets: blobs, nested rings, or two spirals.

    simple: Gaussian blobs at (-1.5, 0) and (1.5, 0) with scale `noise`;
    circle: class 0 uniform in the unit disk, class 1 uniform in the
    annulus [1.5, 2.5]; spiral: two interleaved arms r = theta/3 with
    theta in [pi/2, 3*pi], the second arm rotated by pi.  Gaussian jitter
    of scale `noise` is added to circle and spiral coordinates.
    """
    if kind not in DATASET_KINDS:
        raise ValueError(f"unknown dataset kind: {kind!r}")
    if n % 2 != 0:
        raise ValueError("n must be even (classes are balanced exactly)")
    rng = Rng(seed)
    half = n // 2
    if kind == "simple":
        pts0 = np.array([[-1.5], [0.0]]) + noise * rng.std_normal(2 * half).reshape(2, half)
        pts1 = np.array([[1.5], [0.0]]) + noise * rng.std_normal(2 * half).reshape(2, half)
    elif kind == "circle":
        r0 = np.sqrt(rng.uniform01(half))
        a0 = 2.0 * math.pi * rng.uniform01(half)
        pts0 = np.vstack([r0 * np.cos(a0), r0 * np.sin(a0)])
        r1 = np.sqrt(1.5 ** 2 + rng.uniform01(half) * (2.5 ** 2 - 1.5 ** 2))
        a1 = 2.0 * math.pi * rng.uniform01(half)
        pts1 = np.vstack([r1 * np.cos(a1), r1 * np.sin(a1)])
        pts0 = pts0 + noise * rng.std_normal(2 * half).reshape(2, half)
        pts1 = pts1 + noise * rng.std_normal(2 * half).reshape(2, half)
    else:
        theta0 = math.pi / 2 + rng.uniform01(half) * (3.0 * math.pi - math.pi / 2)
        r0 = theta0 / 3.0
        pts0 = np.vstack([r0 * np.cos(theta0), r0 * np.sin(theta0)])
        theta1 = math.pi / 2 + rng.uniform01(half) * (3.0 * math.pi - math.pi / 2)
        r1 = theta1 / 3.0
        pts1 = -np.vstack([r1 * np.cos(theta1), r1 * np.sin(theta1)])
        pts0 = pts0 + noise * rng.std_normal(2 * half).reshape(2, half)
        pts1 = pts1 + noise * rng.std_normal(2 * half).reshape(2, half)
    points = np.hstack([pts0, pts1])
    labels = np.concatenate([np.zeros(half, dtype=np.int64),
                             np.ones(half, dtype=np.int64)])
    return Dataset2D(points, labels, kind)
