"""Exact algebra over piecewise-quadratic functions of a scalar parameter.

The central object is :class:`PiecewiseQuadratic`: an ordered, contiguous
list of pieces ``(lo, hi] -> a*theta**2 + b*theta + c`` tiling the whole
real line, each carrying an integer ``tau`` label (the most recent change
associated with that piece).  The detector maintains its running cost-to-go
in this representation; three operations per data point suffice:

* :func:`add_loss` -- pointwise sum with a per-point loss,
* :func:`min_with_constant` -- pointwise min with a constant,
* :func:`global_min` -- exact minimum, argmin and winning label.

The domain is the full line ``(-inf, +inf)`` so that streaming data with
unknown range can be handled; the optimum always lies within the data
range, so this changes nothing else.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import _kernels


@dataclass(frozen=True)
class PiecewiseQuadratic:
    """Piecewise-quadratic function stored as parallel piece arrays.

    ``hi`` holds the closed upper endpoints (strictly increasing, last is
    +inf); piece ``i`` covers ``(hi[i-1], hi[i]]`` with an implicit
    ``hi[-1] = -inf``.  ``a``, ``b``, ``c`` are the quadratic coefficients
    and ``tau`` the per-piece last-change labels.
    """

    hi: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    tau: np.ndarray

    def __len__(self) -> int:
        return self.hi.size

    def pieces(self) -> Iterator[tuple[float, float, tuple[float, float, float], int]]:
        """Yield (lo, hi, (a, b, c), tau) per piece, for inspection."""
        lo = -np.inf
        for i in range(self.hi.size):
            yield lo, float(self.hi[i]), (float(self.a[i]), float(self.b[i]),
                                          float(self.c[i])), int(self.tau[i])
            lo = float(self.hi[i])

    def __repr__(self) -> str:
        parts = [f"({lo:g},{hi:g}]:{q[0]:g}t^2{q[1]:+g}t{q[2]:+g}@{t}"
                 for lo, hi, q, t in self.pieces()]
        return "PiecewiseQuadratic[" + ", ".join(parts) + "]"


def _wrap(arrays) -> PiecewiseQuadratic:
    hi, a, b, c, tau = arrays
    return PiecewiseQuadratic(hi, a, b, c, tau)


def make_initial(beta: float) -> PiecewiseQuadratic:
    """Constant function equal to ``beta`` on the whole line, label 0.

    Seeding the recursion with the constant beta makes the cost after one
    point equal to loss(y_1; theta) + beta, i.e. the first segment pays
    its penalty up front like every later one.
    """
    if beta < 0:
        raise ValueError(f"beta must be non-negative, got {beta}")
    return PiecewiseQuadratic(
        hi=np.array([np.inf]),
        a=np.zeros(1),
        b=np.zeros(1),
        c=np.array([float(beta)]),
        tau=np.zeros(1, np.int64),
    )


def zero_fn() -> PiecewiseQuadratic:
    """The identically-zero function (neutral element of add_loss)."""
    return make_initial(0.0)


def add_loss(f: PiecewiseQuadratic, loss: PiecewiseQuadratic) -> PiecewiseQuadratic:
    """Pointwise sum ``f + loss``; tau labels are inherited from ``f``.

    ``loss`` must tile the line (its tau labels are ignored).  Output
    boundaries are the union of the input boundaries and adjacent
    duplicate pieces are merged.
    """
    lh = loss.hi
    if lh[-1] != np.inf or (lh.size > 1 and np.any(np.diff(lh) <= 0)):
        raise ValueError("loss pieces do not tile the line")
    return _wrap(_kernels.merge_add(f.hi, f.a, f.b, f.c, f.tau,
                                    lh, loss.a, loss.b, loss.c))


def min_with_constant(f: PiecewiseQuadratic, const: float,
                      new_tau: int) -> PiecewiseQuadratic:
    """Pointwise min of ``f`` and the constant ``const``.

    Sub-pieces where ``f >= const`` become the constant with label
    ``new_tau``; ties go to the constant.  Roots within 1e-12 of a piece
    endpoint are snapped to it (no sliver pieces) and double roots
    (discriminant in [-1e-12, 0]) do not split at all.
    """
    if not np.isfinite(const):
        raise ValueError(f"constant must be finite, got {const}")
    return _wrap(_kernels.clip_to_constant(f.hi, f.a, f.b, f.c, f.tau,
                                           float(const), int(new_tau)))


def global_min(f: PiecewiseQuadratic) -> tuple[float, float, int]:
    """Exact minimum of ``f``: returns (min_value, argmin, tau_label).

    Each piece contributes its constrained minimum (vertex if interior,
    otherwise the nearer endpoint); the leftmost winning piece breaks
    ties.  For a winning constant piece the argmin is its upper endpoint
    when finite, else 0.  Raises on functions unbounded below.
    """
    status, val, arg, tau, _ = _kernels.piecewise_min(f.hi, f.a, f.b, f.c, f.tau)
    if status != 0:
        raise ValueError("function is unbounded below")
    return float(val), float(arg), int(tau)


def piece_count(f: PiecewiseQuadratic) -> int:
    return f.hi.size


def evaluate(f: PiecewiseQuadratic, x: float) -> float:
    """Value of ``f`` at ``x``; boundaries resolve to the left (closed) piece."""
    i = int(np.searchsorted(f.hi, x, side="left"))
    return float((f.a[i] * x + f.b[i]) * x + f.c[i])


def check_valid(f: PiecewiseQuadratic, rel_tol: float = 1e-9) -> None:
    """Assert the structural invariants; used by tests and debugging.

    Checks: pieces tile the line (strictly increasing hi, last +inf),
    adjacent pieces are not identical in both quadratic and tau, and the
    function is continuous at every interior boundary to ``rel_tol``.
    """
    hi, a, b, c, tau = f.hi, f.a, f.b, f.c, f.tau
    n = hi.size
    assert n >= 1, "empty piece list"
    assert hi[-1] == np.inf, "last piece must extend to +inf"
    assert a.size == b.size == c.size == tau.size == n, "ragged piece arrays"
    if n == 1:
        return
    assert np.all(np.diff(hi) > 0), "piece endpoints not strictly increasing"
    assert np.all(np.isfinite(hi[:-1])), "interior boundary not finite"
    for i in range(n - 1):
        x = hi[i]
        left = (a[i] * x + b[i]) * x + c[i]
        right = (a[i + 1] * x + b[i + 1]) * x + c[i + 1]
        scale = max(abs(left), abs(right), 1.0)
        assert abs(left - right) <= rel_tol * scale, (
            f"discontinuity at {x}: {left} vs {right}")
        same_q = (abs(a[i] - a[i + 1]) <= _kernels.COEF_TOL
                  and abs(b[i] - b[i + 1]) <= _kernels.COEF_TOL
                  and abs(c[i] - c[i + 1]) <= _kernels.COEF_TOL)
        assert not (same_q and tau[i] == tau[i + 1]), (
            f"unmerged duplicate pieces at index {i}")
