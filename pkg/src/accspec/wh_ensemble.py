"""Number variance of the Weyl-Heisenberg ensemble restricted to a lattice.

For the determinantal process with kernel ``K(lam, lam') = <pi(lam') g, pi(lam) g>``
the count in a ball has variance
``sum_{lam in B} ||g||^2 - sum_{lam, lam' in B} |V_g g(lam - lam')|^2``.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .errors import TightnessError
from .gabor_multiplier import KernelTable
from .lattice_geom import Ball, Lattice2, points_in_mask
from .window_kernel import Window, frame_bounds_estimate

log = logging.getLogger(__name__)

TIGHTNESS_GATE = 0.99
_BLOCK = 512


def window_tightness(w: Window, lat: Lattice2) -> float:
    fb = frame_bounds_estimate(w, lat, 16)
    return fb.ratio


def _gate(w: Window, lat: Lattice2, tightness: float | None, allow_nontight: bool) -> float:
    if tightness is None:
        tightness = window_tightness(w, lat)
    if tightness < TIGHTNESS_GATE and not allow_nontight:
        raise TightnessError(
            f"frame tightness A_est/B_est = {tightness:.4f} < {TIGHTNESS_GATE}; "
            "pass allow_nontight to override"
        )
    return tightness


def difference_counts(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Integer differences ``d`` with multiplicity ``#{(i, j) : lam_i - lam_j = d}``.

    The multiplicities come from an FFT autocorrelation of the point indicator,
    rounded back to exact integers.
    """
    lo = pts.min(axis=0)
    shape = tuple(pts.max(axis=0) - lo + 1)
    ind = np.zeros(shape)
    ind[tuple((pts - lo).T)] = 1.0
    corr = fftconvolve(ind, ind[::-1, ::-1], mode="full")
    counts = np.rint(corr).astype(np.int64)
    nz = np.argwhere(counts > 0)
    d = nz - (np.asarray(shape) - 1)
    return d, counts[tuple(nz.T)]


def pair_sum(table: KernelTable, pts: np.ndarray) -> float:
    """``sum_{i, j} |V_g g(lam_i - lam_j)|^2``, grouped by lattice difference."""
    d, c = difference_counts(np.asarray(pts, dtype=np.int64))
    acc = []
    for s in range(0, len(d), _BLOCK * _BLOCK):
        blk = slice(s, s + _BLOCK * _BLOCK)
        V = table.lookup(d[blk, 0], d[blk, 1])
        acc.append(np.sum(c[blk] * np.abs(V) ** 2))
    return float(np.sum(acc))


def number_variance(w: Window, lat: Lattice2, R: float, *, tightness: float | None = None,
                    allow_nontight: bool = False, table: KernelTable | None = None,
                    center=(0.0, 0.0)) -> float:
    """Exact variance of the number of points in ``B(center, R)``."""
    _gate(w, lat, tightness, allow_nontight)
    pts = points_in_mask(Ball(center, R), lat)
    if len(pts) == 0:
        return 0.0
    table = table if table is not None else KernelTable(w, lat)
    v = float(len(pts) * w.l2_norm_sq - pair_sum(table, pts))
    if v < 0:
        log.warning("negative number variance %.4g at R=%g: window is not normalized "
                    "to frame constant 1", v, R)
    return v


@dataclass
class VarianceCurve:
    radii: list[float]
    variances: list[float]
    counts: list[int]
    slope_fit: float
    intercept: float
    residuals: list[float]
    window_tightness: float
    monotone: bool = field(default=False)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["R", "variance"])
            for R, v in zip(self.radii, self.variances):
                w.writerow([repr(float(R)), repr(float(v))])

    def summary(self) -> dict:
        return {"slope_fit": self.slope_fit, "intercept": self.intercept,
                "residuals": self.residuals, "tightness": self.window_tightness,
                "monotone": self.monotone, "radii": self.radii,
                "variances": self.variances, "counts": self.counts}


def loglog_slope(radii, values) -> tuple[float, float, list[float]]:
    """Ordinary least squares of log(values) on log(radii)."""
    x = np.log(np.asarray(radii, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    X = np.column_stack([x, np.ones_like(x)])
    (slope, icpt), *_ = np.linalg.lstsq(X, y, rcond=None)
    res = y - X @ np.array([slope, icpt])
    return float(slope), float(icpt), [float(v) for v in res]


def variance_scan(w: Window, lat: Lattice2, R_list, *, allow_nontight: bool = False,
                  tightness: float | None = None) -> VarianceCurve:
    R_list = [float(R) for R in R_list]
    if len(R_list) < 4:
        raise ValueError("variance_scan needs at least 4 radii")
    if any(b <= a for a, b in zip(R_list, R_list[1:])):
        raise ValueError("radii must be strictly ascending")
    tight = _gate(w, lat, tightness, allow_nontight)
    table = KernelTable(w, lat)
    variances, counts = [], []
    for R in R_list:
        variances.append(number_variance(w, lat, R, tightness=tight, allow_nontight=True, table=table))
        counts.append(len(points_in_mask(Ball((0.0, 0.0), R), lat)))
    slope, icpt, res = loglog_slope(R_list, variances)
    mono = all(b >= a for a, b in zip(variances, variances[1:]))
    return VarianceCurve(R_list, variances, counts, slope, icpt, res, tight, mono)
