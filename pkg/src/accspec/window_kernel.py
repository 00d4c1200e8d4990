"""Windows, their ambiguity functions and Gabor-frame diagnostics.

Time-frequency shifts follow ``pi(x, w) f(t) = exp(2 pi i w t) f(t - x)``, so
``V_g f(z) = <f, pi(z) g>`` and the ambiguity function is ``V_g g``.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import eval_genlaguerre, eval_hermite, factorial

from .errors import (
    DivergenceError,
    IllConditionedFrameError,
    InsufficientResolutionError,
    NoFrameError,
)
from .lattice_geom import GEOM_TOL, Lattice2, enumerate_in_box, enumerate_in_disk, time_quantum

log = logging.getLogger(__name__)

SHELL_REL_TOL = 1e-12
# effective half-width of the closed-form windows beyond which |g| < 1e-17
_CLOSED_FORM_HALFWIDTH = 4.0


@dataclass(eq=False)
class Window:
    """A window function: ``gaussian``, ``hermite`` (order n) or ``sampled``.

    Gaussian and Hermite windows are L2-normalized with the ``exp(-pi t^2)``
    scaling.  Sampled windows live on ``grid_lo + n * step`` and are extended
    by zero.
    """

    kind: str
    order: int = 0
    grid_lo: float = 0.0
    step: float = 0.0
    samples: np.ndarray | None = None
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("gaussian", "hermite", "sampled"):
            raise ValueError(f"unknown window kind {self.kind!r}")
        if self.kind == "hermite" and self.order < 0:
            raise ValueError("Hermite order must be >= 0")
        if self.kind == "sampled":
            s = np.asarray(self.samples, dtype=complex).reshape(-1)
            if not self.step > 0:
                raise ValueError("sampled window needs step > 0")
            if not np.all(np.isfinite(s)):
                raise ValueError("sampled window has non-finite samples")
            s.setflags(write=False)
            self.samples = s
            self.grid_lo = float(self.grid_lo)
            self.step = float(self.step)
            if self.l2_norm_sq <= 0:
                raise ValueError("sampled window has zero norm")
        if not self.label:
            self.label = {"gaussian": "gaussian", "hermite": f"hermite:{self.order}"}.get(
                self.kind, "sampled"
            )

    @classmethod
    def gaussian(cls) -> "Window":
        return cls("gaussian")

    @classmethod
    def hermite(cls, n: int) -> "Window":
        return cls("hermite", order=int(n)) if n > 0 else cls("gaussian", label="hermite:0")

    @classmethod
    def sampled(cls, grid_lo: float, step: float, samples, label: str = "sampled", meta=None):
        return cls("sampled", grid_lo=grid_lo, step=step, samples=samples, label=label,
                   meta=dict(meta or {}))

    # ------------------------------------------------------------ basics

    @property
    def grid(self) -> np.ndarray:
        return self.grid_lo + self.step * np.arange(len(self.samples))

    @property
    def grid_hi(self) -> float:
        return self.grid_lo + self.step * (len(self.samples) - 1)

    @cached_property
    def l2_norm_sq(self) -> float:
        if self.kind != "sampled":
            return 1.0
        return float(self.step * np.sum(np.abs(self.samples) ** 2))

    def support(self) -> tuple[float, float]:
        """Interval outside which the window is zero (or below 1e-17)."""
        if self.kind == "sampled":
            return self.grid_lo, self.grid_hi
        T = _CLOSED_FORM_HALFWIDTH + math.sqrt((2 * self.order + 1) / (2 * math.pi))
        return -T, T

    def _check_resolution(self):
        if self.kind == "sampled" and len(self.samples) < 4:
            raise InsufficientResolutionError("sampled window needs at least 4 samples")

    @cached_property
    def _splines(self):
        pad = 4
        s = np.concatenate([np.zeros(pad), self.samples, np.zeros(pad)])
        t = self.grid_lo + self.step * np.arange(-pad, len(self.samples) + pad)
        return CubicSpline(t, s.real), CubicSpline(t, s.imag)

    def evaluate(self, t) -> np.ndarray:
        """Window values at arbitrary times (cubic interpolation between samples)."""
        t = np.asarray(t, dtype=float)
        if self.kind == "gaussian":
            return (2**0.25 * np.exp(-np.pi * t * t)).astype(complex)
        if self.kind == "hermite":
            n = self.order
            c = 2**0.25 / math.sqrt(2.0**n * factorial(n, exact=True))
            return (c * eval_hermite(n, math.sqrt(2 * np.pi) * t) * np.exp(-np.pi * t * t)).astype(complex)
        self._check_resolution()
        u = (t - self.grid_lo) / self.step
        k = np.rint(u)
        out = np.zeros(t.shape, dtype=complex)
        inside = (u > -1) & (u < len(self.samples))
        on_grid = inside & (np.abs(u - k) < 1e-7)
        kk = k[on_grid].astype(np.int64)
        ok = (kk >= 0) & (kk < len(self.samples))
        vals = np.zeros(kk.shape, dtype=complex)
        vals[ok] = self.samples[kk[ok]]
        out[on_grid] = vals
        off = inside & ~on_grid
        if np.any(off):
            sr, si = self._splines
            out[off] = sr(t[off]) + 1j * si(t[off])
        return out

    def shifted(self, x: float, w: float, t) -> np.ndarray:
        """``(pi(x, w) g)(t)``."""
        t = np.asarray(t, dtype=float)
        return np.exp(2j * np.pi * w * t) * self.evaluate(t - x)

    def scaled(self, c: float, label: str | None = None) -> "Window":
        if self.kind != "sampled":
            raise ValueError("only sampled windows can be rescaled")
        return Window.sampled(self.grid_lo, self.step, self.samples * c,
                              label=label or self.label, meta=self.meta)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "label": self.label, "l2_norm_sq": self.l2_norm_sq}
        if self.kind == "hermite":
            d["order"] = self.order
        if self.kind == "sampled":
            d.update(grid_lo=self.grid_lo, step=self.step, n_samples=len(self.samples))
        if self.meta:
            d["meta"] = self.meta
        return d


# ---------------------------------------------------------------- kernels


def _closed_form_ambiguity(w: Window, x: np.ndarray, om: np.ndarray) -> np.ndarray:
    r = np.pi * (x * x + om * om)
    val = np.exp(-1j * np.pi * x * om) * np.exp(-r / 2)
    if w.kind == "hermite":
        val = val * eval_genlaguerre(w.order, 0, r)
    return val


def _sampled_ambiguity(w: Window, x: np.ndarray, om: np.ndarray) -> np.ndarray:
    w._check_resolution()
    t = w.grid
    g = w.samples
    out = np.zeros(x.shape, dtype=complex)
    width = w.grid_hi - w.grid_lo
    # the discrete sum is 1/step-periodic in frequency; beyond Nyquist it only
    # repeats aliases, so the band-limited reading is zero there
    nyq = 0.5 / w.step
    # group by shift; identical shifts share one product
    keys = np.round(x / w.step, 9)
    uniq, inv = np.unique(keys, return_inverse=True)
    order = np.argsort(inv, kind="stable")
    bounds = np.searchsorted(inv[order], np.arange(len(uniq) + 1))
    for gi, key in enumerate(uniq):
        sel = order[bounds[gi]:bounds[gi + 1]]
        xs = float(x[sel[0]])
        if abs(xs) > width + w.step:
            continue
        sel = sel[np.abs(om[sel]) <= nyq]
        if len(sel) == 0:
            continue
        if abs(key - round(key)) < 1e-7:
            k = int(round(key))
            p = np.zeros(len(g), dtype=complex)
            if k >= 0:
                p[k:] = g[k:] * np.conj(g[: len(g) - k])
            else:
                p[: len(g) + k] = g[: len(g) + k] * np.conj(g[-k:])
        else:
            p = g * np.conj(w.evaluate(t - xs))
        nz = np.nonzero(p)[0]
        if len(nz) == 0:
            continue
        a, b = nz[0], nz[-1] + 1
        E = np.exp(-2j * np.pi * np.outer(om[sel], t[a:b]))
        out[sel] = w.step * (E @ p[a:b])
    return out


def ambiguity(w: Window, z) -> complex | np.ndarray:
    """``V_g g(z)`` for a point ``z = (x, w)`` or an array of points (..., 2)."""
    z = np.asarray(z, dtype=float)
    scalar = z.ndim == 1
    zz = z.reshape(-1, 2)
    x, om = zz[:, 0], zz[:, 1]
    if w.kind == "sampled":
        val = _sampled_ambiguity(w, x, om)
    else:
        val = _closed_form_ambiguity(w, x, om)
    return complex(val[0]) if scalar else val.reshape(z.shape[:-1])


def cross_inner(w: Window, z_src, z_dst) -> complex | np.ndarray:
    """``<pi(z_src) g, pi(z_dst) g>`` via the covariance of the ambiguity function."""
    zs = np.asarray(z_src, dtype=float)
    zd = np.asarray(z_dst, dtype=float)
    scalar = zs.ndim == 1 and zd.ndim == 1
    zs, zd = np.broadcast_arrays(zs, zd)
    # evaluate with the lexicographically smaller point as source so that
    # swapping the arguments conjugates the result exactly
    swap = (zs[..., 0] > zd[..., 0]) | ((zs[..., 0] == zd[..., 0]) & (zs[..., 1] > zd[..., 1]))
    a = np.where(swap[..., None], zd, zs)
    b = np.where(swap[..., None], zs, zd)
    phase = np.exp(2j * np.pi * (a[..., 1] - b[..., 1]) * a[..., 0])
    val = phase * ambiguity(w, b - a)
    val = np.where(swap, np.conj(val), val)
    return complex(val) if scalar else val


# ---------------------------------------------------------------- lattice sums


def _shells(lat: Lattice2, r_max: float, width: float | None = None):
    """Yield (r_outer, points) for consecutive annuli of the given width."""
    width = width or lat.l_fund
    r_prev = -1.0
    r = 0.0
    while r < r_max - 1e-12:
        r = min(r + width, r_max)
        pts = enumerate_in_disk(lat, r)
        rad = np.hypot(*lat.coords(pts).T)
        yield r, pts[rad > r_prev + 1e-9]
        r_prev = r


@dataclass
class MStarNorm:
    value: float
    total: float
    tail: float
    tail_ok: bool
    truncation_radius: float


def mstar_norm(w: Window, lat: Lattice2, truncation_radius: float) -> MStarNorm:
    """Truncated weighted lattice norm ``(sum |lam| |V_g g(lam)|^2)^(1/2)``.

    The last shell's contribution is reported as the tail estimate.
    """
    if truncation_radius < 10 * lat.l_fund - 1e-12:
        raise ValueError(
            f"truncation_radius {truncation_radius} < 10 * l_fund = {10 * lat.l_fund}"
        )
    contribs = []
    for _, pts in _shells(lat, truncation_radius):
        if len(pts) == 0:
            contribs.append(0.0)
            continue
        xy = lat.coords(pts)
        v = np.abs(ambiguity(w, xy)) ** 2
        contribs.append(float(np.sum(np.hypot(xy[:, 0], xy[:, 1]) * v)))
    total = float(np.sum(contribs))
    tail = contribs[-1]
    if total > 0 and tail > 0.1 * total:
        raise DivergenceError(f"M* tail {tail:.3e} exceeds 10% of total {total:.3e}")
    return MStarNorm(math.sqrt(total), total, tail, tail <= 1e-8 * total, truncation_radius)


@dataclass
class FrameBounds:
    A_est: float
    B_est: float
    probe_count: int
    truncation_radius: float
    # both are inner estimates: A_est >= A and B_est <= B
    one_sided: str = "inner: A_est >= A, B_est <= B"

    @property
    def ratio(self) -> float:
        return self.A_est / self.B_est

    def to_dict(self) -> dict:
        return {"A_est": self.A_est, "B_est": self.B_est, "ratio": self.ratio,
                "probe_count": self.probe_count, "truncation_radius": self.truncation_radius,
                "one_sided": self.one_sided}


def _require_frame_density(lat: Lattice2):
    if lat.density <= 1 + 1e-12:
        raise NoFrameError(f"lattice density {lat.density:.6g} <= 1 cannot carry a Gabor frame")


def _quad_grid(w: Window, lo: float, hi: float, default_step: float = 1 / 64) -> tuple[np.ndarray, float]:
    """Quadrature nodes covering [lo, hi], aligned with a sampled window's grid."""
    if w.kind == "sampled":
        h = w.step
        n0 = math.floor((lo - w.grid_lo) / h)
        n1 = math.ceil((hi - w.grid_lo) / h)
        return w.grid_lo + h * np.arange(n0, n1 + 1), h
    h = default_step
    return h * np.arange(math.floor(lo / h), math.ceil(hi / h) + 1), h


def lattice_coefficients(w: Window, lat: Lattice2, F: np.ndarray, t: np.ndarray, h: float,
                         max_radius: float = 200.0, min_radius: float | None = None):
    """Accumulate ``sum_lam |<f_p, pi(lam) g>|^2`` for sampled probe rows ``F``.

    Shells of width ``l_fund`` are added until a shell contributes less than
    ``SHELL_REL_TOL`` of the running total for every probe.
    Returns (per-probe sums, final radius).
    """
    totals = np.zeros(F.shape[0])
    min_radius = min_radius if min_radius is not None else 3 * lat.l_fund
    r_final = 0.0
    for r, pts in _shells(lat, max_radius):
        r_final = r
        if len(pts) == 0:
            continue
        xy = lat.coords(pts)
        xy = xy[np.abs(xy[:, 1]) <= 0.5 / h]
        contrib = np.zeros(F.shape[0])
        for start in range(0, len(xy), 256):
            blk = xy[start:start + 256]
            G = np.exp(-2j * np.pi * np.outer(t, blk[:, 1])) * np.conj(
                w.evaluate(t[:, None] - blk[None, :, 0])
            )
            C = h * (F @ G)
            contrib += np.sum(np.abs(C) ** 2, axis=1)
        totals += contrib
        if r >= min_radius and np.all(contrib <= SHELL_REL_TOL * totals):
            break
    return totals, r_final


def _probe_points(lat: Lattice2, probe_count: int) -> np.ndarray:
    n = math.isqrt(probe_count)
    if n * n < probe_count:
        n += 1
    u = np.arange(n) / n
    U, V = np.meshgrid(u, u, indexing="ij")
    coef = np.column_stack([U.ravel(), V.ravel()])[:probe_count]
    return coef @ lat.generator.T


def frame_bounds_estimate(w: Window, lat: Lattice2, probe_count: int = 16) -> FrameBounds:
    """Rayleigh-quotient frame bounds from time-frequency shifted Hermite probes."""
    _require_frame_density(lat)
    if probe_count < 16:
        raise ValueError("probe_count must be >= 16")
    zs = _probe_points(lat, probe_count)
    probes = [Window.gaussian(), Window.hermite(1), Window.hermite(2)]
    T = max(p.support()[1] for p in probes)
    lo = zs[:, 0].min() - T
    hi = zs[:, 0].max() + T
    t, h = _quad_grid(w, lo, hi)
    F = np.array([p.shifted(x, om, t) for p in probes for x, om in zs])
    norms = h * np.sum(np.abs(F) ** 2, axis=1)
    # <f, pi(lam) g> = h * sum f(t) conj(pi(lam) g)(t)
    sums, r = lattice_coefficients(w, lat, F, t, h)
    Q = sums / norms
    return FrameBounds(float(Q.min()), float(Q.max()), probe_count, r)


def rayleigh_quotients(w: Window, lat: Lattice2, F: np.ndarray, t: np.ndarray, h: float) -> np.ndarray:
    """Frame-sum Rayleigh quotients for arbitrary sampled probes (rows of ``F``)."""
    norms = h * np.sum(np.abs(F) ** 2, axis=1)
    sums, _ = lattice_coefficients(w, lat, F, t, h)
    return sums / norms


def _frame_operator(w: Window, t: np.ndarray, step: float, xy: np.ndarray) -> np.ndarray:
    """``step * sum_lam pi(lam) g (pi(lam) g)^H`` on the uniform grid ``t``.

    Lattice points sharing a time shift ``x`` contribute
    ``(g_x g_x^H) * C_x`` with ``g_x = g(t - x)`` and ``C_x`` the Toeplitz matrix
    ``c_x(i - j) = sum_k exp(2 pi i omega_k (i - j) step)``.
    """
    n = len(t)
    m = step * np.arange(-(n - 1), n)
    lag = np.subtract.outer(np.arange(n), np.arange(n)) + (n - 1)
    xs = np.round(xy[:, 0] / GEOM_TOL) * GEOM_TOL
    S = np.zeros((n, n), dtype=complex)
    for x in np.unique(xs):
        om = xy[xs == x, 1]
        c = np.exp(2j * np.pi * np.outer(m, om)).sum(axis=1)
        gx = w.evaluate(t - xy[xs == x, 0][0])
        if not np.any(gx):
            continue
        S += np.outer(gx, gx.conj()) * c[lag]
    S *= step
    return 0.5 * (S + S.conj().T)


def canonical_tight_window(w: Window, lat: Lattice2, grid_halfwidth: float = 6.0,
                           grid_points: int = 1024, lattice_box_radius: float = 8.0,
                           floor_rel: float = 1e-10) -> Window:
    """Canonical tight window ``S^{-1/2} g`` rescaled to frame constant 1.

    ``S`` is the frame operator assembled on a sample grid.  The lattice box
    has half-width at least ``lattice_box_radius``; it is widened in time to
    every shift whose window meets the grid and in frequency to the full
    sampled band, which keeps ``S`` well conditioned.  When the
    lattice time coordinates are rational the grid step is shrunk so that
    every time shift is a whole number of samples.
    """
    _require_frame_density(lat)
    if grid_points < 256:
        raise InsufficientResolutionError("grid_points must be >= 256")
    step_req = 2.0 * grid_halfwidth / grid_points
    q = time_quantum(lat)
    step = q / math.ceil(q / step_req - 1e-9) if q else step_req
    n = math.ceil(grid_halfwidth / step - 1e-9)
    t = step * np.arange(-n, n + 1)
    g = w.evaluate(t)
    edge = np.abs(w.evaluate(np.array([-grid_halfwidth, grid_halfwidth])))
    if edge.max() > 1e-8 * np.abs(g).max():
        raise InsufficientResolutionError(
            f"grid_halfwidth {grid_halfwidth} too small: |g| = {edge.max():.2e} at the edge"
        )
    # sampled modulations are periodic in frequency with period 1/step, so the
    # box spans exactly one period [-nyq, nyq); in time it reaches every shift
    # that touches the grid
    nyq = 0.5 / step
    X = max(lattice_box_radius, grid_halfwidth + max(map(abs, w.support())))
    F = max(lattice_box_radius, nyq)
    box = enumerate_in_box(lat, (-X, -F), (X, F))
    xy = lat.coords(box)
    keep = (xy[:, 1] >= -nyq - GEOM_TOL) & (xy[:, 1] < nyq - GEOM_TOL)
    box, xy = box[keep], xy[keep]
    S = _frame_operator(w, t, step, xy)
    d, U = np.linalg.eigh(S)
    floor = floor_rel * d.max()
    coef = U.conj().T @ g
    low = d < floor
    lost = float(np.linalg.norm(coef[low]) / np.linalg.norm(coef))
    if lost > 1e-6:
        raise IllConditionedFrameError(
            f"{lost:.2e} of the window lies in the frame operator's floored eigenspace"
        )
    gt = U @ (coef / np.sqrt(np.maximum(d, floor)))
    meta = {"source": w.label, "grid_step": step, "box_time_extent": X, "box_freq_band": nyq,
            "box_points": int(len(box)), "floored_eigenvalues": int(low.sum()),
            "floored_fraction": lost}
    out = Window.sampled(t[0], step, gt, label=f"tight({w.label})", meta=meta)
    fb = frame_bounds_estimate(out, lat, 16)
    c = 1.0 / math.sqrt(math.sqrt(fb.A_est * fb.B_est))
    meta["prescale_bounds"] = [fb.A_est, fb.B_est]
    return out.scaled(c)


# ---------------------------------------------------------------- decay


@dataclass
class DecayCheck:
    C_fit: float
    ok: bool
    s: float
    sample_radius: float


def decay_check(w: Window, s: float, sample_radius: float, n_radii: int = 161,
                n_angles: int = 48) -> DecayCheck:
    """Smallest C with ``|V_g g(z)| <= C (1 + |z|)^(-s)`` on a polar sample grid.

    ``ok`` is False when the weighted profile peaks in the outer half of the
    sampled range or fails to decrease there, i.e. the decay looks slower
    than ``s``.
    """
    if s <= 0:
        raise ValueError("s must be > 0")
    rad = np.linspace(0.0, sample_radius, n_radii)
    ang = 2 * np.pi * np.arange(n_angles) / n_angles
    R, A = np.meshgrid(rad, ang, indexing="ij")
    z = np.stack([R * np.cos(A), R * np.sin(A)], axis=-1)
    weighted = np.abs(ambiguity(w, z)) * (1 + R) ** s
    C_fit = float(weighted.max())
    prof = weighted.max(axis=1)
    outer = rad >= sample_radius / 2
    ok = bool(prof[outer].max() < C_fit and np.all(np.diff(prof[outer]) <= 1e-12 * C_fit))
    return DecayCheck(C_fit, ok, s, sample_radius)


def nonvanishing_on_lattice(w: Window, lat: Lattice2, radius: float) -> tuple[bool, float]:
    """Whether ``V_g g(lam) != 0`` for every lattice point in ``B(0, radius)``."""
    pts = enumerate_in_disk(lat, radius)
    v = np.abs(ambiguity(w, lat.coords(pts)))
    m = float(v.min())
    return bool(m > 0), m


# ---------------------------------------------------------------- I/O


def save_window_csv(path, w: Window) -> None:
    if w.kind != "sampled":
        raise ValueError("only sampled windows are serialized")
    with open(path, "w", newline="") as fh:
        fh.write(f"# grid_lo={w.grid_lo!r},step={w.step!r}\n")
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["t", "re", "im"])
        for tv, sv in zip(w.grid, w.samples):
            wr.writerow([repr(float(tv)), repr(float(sv.real)), repr(float(sv.imag))])


def load_window_csv(path, label: str | None = None) -> Window:
    with open(path, newline="") as fh:
        header = fh.readline()
        if not header.startswith("#"):
            raise ValueError(f"{path}: missing '# grid_lo=...,step=...' header")
        params = dict(kv.split("=") for kv in header[1:].strip().split(","))
        rows = list(csv.DictReader(fh))
    samples = np.array([float(r["re"]) + 1j * float(r["im"]) for r in rows])
    return Window.sampled(float(params["grid_lo"]), float(params["step"]), samples,
                          label=label or f"file:{path}")


def parse_window(spec: str, lattice: Lattice2 | None = None, tight_kwargs: dict | None = None) -> Window:
    """Build a window from ``gaussian``, ``hermite:n``, ``file:path`` or ``tight(<spec>)``."""
    s = spec.strip()
    if s.startswith("tight(") and s.endswith(")"):
        if lattice is None:
            raise ValueError("tight(...) windows need a lattice")
        inner = parse_window(s[6:-1], lattice)
        return canonical_tight_window(inner, lattice, **(tight_kwargs or {}))
    if s == "gaussian":
        return Window.gaussian()
    if s.startswith("hermite:"):
        return Window.hermite(int(s.split(":", 1)[1]))
    if s.startswith("file:"):
        return load_window_csv(s.split(":", 1)[1], label=s)
    raise ValueError(f"bad window spec {spec!r}")
