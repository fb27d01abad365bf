"""Loss functions as piecewise quadratics in theta, plus data-driven defaults.

Supported losses (``y`` the datum, ``theta`` the segment location):

* ``l2``        square error ``(y - theta)**2``
* ``l1``        absolute error ``|y - theta|``
* ``huber``     ``(y - theta)**2`` within K of y, ``2K|y - theta| - K**2`` beyond
* ``biweight``  ``min((y - theta)**2, K**2)`` -- bounded, hence robust to
  arbitrarily extreme outliers
* ``quantile``  tilted absolute error ``2u(y - theta)`` / ``2(1-u)(theta - y)``
  for detecting changes in the u-th quantile

Default tuning follows standard robust-statistics practice: the noise
scale is estimated by the MAD of first differences, K is ``3*sigma``
(biweight) or ``1.345*sigma`` (Huber), and the changepoint penalty is the
BIC-style ``2*sigma**2*log(n)*E[phi(Z)**2]`` where phi is the normalised
influence function and Z standard Gaussian.  The normalisation makes the
square-error case reduce to the plain BIC penalty ``2*sigma**2*log(n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, ndimage, stats

from . import _kernels
from .pwq import PiecewiseQuadratic

KINDS = ("l2", "l1", "huber", "biweight", "quantile")

_CODES = {
    "l2": _kernels.L2,
    "l1": _kernels.L1,
    "huber": _kernels.HUBER,
    "biweight": _kernels.BIWEIGHT,
    "quantile": _kernels.QUANTILE,
}

# K defaults in sigma units: 3 treats >3-sigma residuals as outliers,
# 1.345 is the classical 95%-efficiency Huber constant.
DEFAULT_K_SIGMA = {"biweight": 3.0, "huber": 1.345}


@dataclass(frozen=True)
class LossSpec:
    """Which loss to use plus its parameters (K in data units)."""

    kind: str
    k: float | None = None
    u: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}; expected one of {KINDS}")
        if self.kind in ("huber", "biweight"):
            if self.k is None or not (self.k > 0):
                raise ValueError(f"{self.kind} loss requires K > 0, got {self.k}")
        elif self.k is not None:
            raise ValueError(f"{self.kind} loss takes no K")
        if self.kind == "quantile":
            if self.u is None or not (0 < self.u < 1):
                raise ValueError(f"quantile loss requires 0 < u < 1, got {self.u}")
        elif self.u is not None:
            raise ValueError(f"{self.kind} loss takes no quantile level")

    @property
    def code(self) -> int:
        return _CODES[self.kind]

    @property
    def kernel_params(self) -> tuple[float, float]:
        """(K, u) with zeros where unused, for the numba kernels."""
        return (self.k if self.k is not None else 0.0,
                self.u if self.u is not None else 0.0)

    @property
    def bound(self) -> float | None:
        """Upper bound of the loss, or None if unbounded (biweight: K**2)."""
        return self.k * self.k if self.kind == "biweight" else None

    def with_k(self, k: float) -> "LossSpec":
        return LossSpec(self.kind, k=k, u=self.u)


def l2() -> LossSpec:
    return LossSpec("l2")


def l1() -> LossSpec:
    return LossSpec("l1")


def huber(k: float) -> LossSpec:
    return LossSpec("huber", k=k)


def biweight(k: float) -> LossSpec:
    return LossSpec("biweight", k=k)


def quantile(u: float) -> LossSpec:
    return LossSpec("quantile", u=u)


def loss_pieces(y: float, spec: LossSpec) -> PiecewiseQuadratic:
    """The loss of datum ``y`` as a piecewise quadratic in theta.

    The output tiles the line, is continuous, non-negative, and zero at
    ``theta == y``.  Labels are zeroed; they are ignored when the loss is
    added onto a cost function.
    """
    if not np.isfinite(y):
        raise ValueError(f"datum must be finite, got {y}")
    k, u = spec.kernel_params
    hi, a, b, c = _kernels.loss_arrays(spec.code, float(y), k, u)
    return PiecewiseQuadratic(hi, a, b, c, np.zeros(hi.size, np.int64))


def mad_sigma(data) -> float:
    """Noise-scale estimate from the MAD of the differenced series.

    sigma_hat = median(|d - median(d)|) * 1.4826 / sqrt(2) with
    d the first differences; 1.4826 calibrates the MAD to a Gaussian
    standard deviation and sqrt(2) undoes the variance doubling of
    differencing.  Returns 0.0 for a degenerate (constant-difference)
    series; callers should treat that as "no usable estimate".
    """
    data = np.asarray(data, dtype=float)
    if data.size < 2:
        raise ValueError("need at least 2 points to estimate the noise scale")
    d = np.diff(data)
    mad = np.median(np.abs(d - np.median(d)))
    return float(mad * 1.4826 / math.sqrt(2.0))


def _phi_sq_integrand(spec_kind: str, k: float, u: float):
    if spec_kind == "huber":
        return lambda x: min(x * x, k * k) * stats.norm.pdf(x)
    if spec_kind == "biweight":
        return lambda x: (x * x if abs(x) <= k else 0.0) * stats.norm.pdf(x)
    raise ValueError(spec_kind)


def phi_sq_expectation(spec: LossSpec) -> float:
    """E[phi(Z)**2] for standard Gaussian Z and the normalised influence phi.

    phi is x (l2), clamp(x, -K, K) (huber), x*1{|x|<=K} (biweight),
    sign(x) (l1), and the tilted indicator 2u*1{x>0} - 2(1-u)*1{x<=0}
    (quantile), each scaled so the symmetric base case gives exactly 1.
    K is interpreted in sigma units (i.e. relative to unit noise).
    Gaussian expectations with a K dependence are computed by adaptive
    quadrature to 1e-8 absolute tolerance; the others are exact.
    """
    if spec.kind == "l2" or spec.kind == "l1":
        return 1.0
    if spec.kind == "quantile":
        u = spec.u
        return 2.0 * u * u + 2.0 * (1.0 - u) * (1.0 - u)
    k = spec.k
    f = _phi_sq_integrand(spec.kind, k, 0.0)
    total = 0.0
    for lo, hi in ((-np.inf, -k), (-k, k), (k, np.inf)):
        part, _ = integrate.quad(f, lo, hi, epsabs=1e-10)
        total += part
    return float(total)


def min_segment_length(spec: LossSpec, beta: float) -> int | None:
    """Shortest segment length an optimal segmentation can contain.

    A loss bounded by B forces every optimal segment to be strictly
    longer than beta / B; for the biweight B = K**2, so the smallest
    admissible integer length is floor(beta / K**2) + 1.  Unbounded
    losses impose no minimum and None is returned.
    """
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    bound = spec.bound
    if bound is None:
        return None
    return int(math.floor(beta / bound)) + 1


def default_config(kind: str, data, *, k_sigma: float | None = None,
                   u: float | None = None) -> tuple[LossSpec, float, float]:
    """Data-driven (LossSpec, beta, sigma_hat) for a series.

    K = k_sigma * sigma_hat (k_sigma defaults to 3 for biweight and 1.345
    for Huber) and beta = 2 * sigma_hat**2 * log(n) * E[phi(Z)**2] with K
    in sigma units.  Everything is overridable by the caller; a
    degenerate sigma_hat raises with instructions to supply K and beta
    explicitly.
    """
    data = np.asarray(data, dtype=float)
    sigma = mad_sigma(data)
    if sigma <= 0:
        raise ValueError(
            "degenerate noise-scale estimate (MAD of differences is 0); "
            "supply K and beta explicitly")
    if k_sigma is None:
        k_sigma = DEFAULT_K_SIGMA.get(kind)
    if kind in ("huber", "biweight"):
        spec = LossSpec(kind, k=k_sigma * sigma, u=u)
        unit_spec = LossSpec(kind, k=k_sigma, u=u)
    else:
        if k_sigma is not None:
            raise ValueError(f"{kind} loss takes no K")
        spec = LossSpec(kind, u=u)
        unit_spec = spec
    beta = 2.0 * sigma * sigma * math.log(data.size) * phi_sq_expectation(unit_spec)
    return spec, float(beta), sigma


def biweight_k_diagnostic(data, k: float, window: int = 21) -> tuple[bool, float]:
    """Advisory check that K is large enough for reliable estimation.

    Consistent estimation wants K > sqrt(3 * E[min(Z**2, K**2)]); the
    expectation is estimated empirically from residuals of a running
    median (window 21: short enough to track level shifts, long enough to
    resist outliers).  Returns (sufficient, stat) with
    stat = sqrt(3 * mean(min(r**2, K**2))).
    """
    data = np.asarray(data, dtype=float)
    if data.size < window:
        raise ValueError(f"need at least {window} points, got {data.size}")
    trend = ndimage.median_filter(data, size=window, mode="nearest")
    r = data - trend
    stat = float(math.sqrt(3.0 * np.mean(np.minimum(r * r, k * k))))
    return k > stat, stat
