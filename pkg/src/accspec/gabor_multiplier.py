"""Gram-matrix realization of Gabor multipliers and the accumulated spectrogram.

The multiplier ``G f = sum_{lam in Omega} <f, pi(lam) g> pi(lam) g`` shares its
nonzero spectrum with the Gram matrix ``K[i, j] = <pi(lam_j) g, pi(lam_i) g>``
over ``Omega ∩ Lambda``.  With orthonormal eigenvectors ``c_k`` of ``K`` the
unit-norm eigenfunctions are ``h_k = lam_k^{-1/2} sum_j c_k[j] pi(lam_j) g``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DeflatedEigenvalueError, EmptyMaskError, GramSizeError, NumericalError
from .lattice_geom import (
    GEOM_TOL,
    Lattice2,
    LatticeField,
    Mask,
    boundary_count,
    points_in_mask,
    points_near_mask,
)
from .window_kernel import Window, ambiguity

log = logging.getLogger(__name__)

DEFAULT_MAX_N = 4000
NORM_FLOOR_REL = 1e-12
PSD_TOL_REL = 1e-10


class KernelTable:
    """Lazily filled table of ``V_g g`` on integer lattice differences."""

    def __init__(self, window: Window, lattice: Lattice2):
        self.window = window
        self.lattice = lattice
        self._n = -1
        self._vals = np.zeros((0, 0), dtype=complex)
        self._have = np.zeros((0, 0), dtype=bool)

    def _grow(self, n: int):
        if n <= self._n:
            return
        n = max(n, 2 * self._n + 1, 8)
        vals = np.zeros((2 * n + 1, 2 * n + 1), dtype=complex)
        have = np.zeros_like(vals, dtype=bool)
        if self._n >= 0:
            o = n - self._n
            s = slice(o, o + 2 * self._n + 1)
            vals[s, s] = self._vals
            have[s, s] = self._have
        self._n, self._vals, self._have = n, vals, have

    def lookup(self, di: np.ndarray, dj: np.ndarray) -> np.ndarray:
        di = np.asarray(di, dtype=np.int64)
        dj = np.asarray(dj, dtype=np.int64)
        n = int(max(np.abs(di).max(initial=0), np.abs(dj).max(initial=0)))
        self._grow(n)
        I = di + self._n
        J = dj + self._n
        missing = ~self._have[I, J]
        if np.any(missing):
            key = np.unique(np.column_stack([di[missing], dj[missing]]), axis=0)
            self._vals[key[:, 0] + self._n, key[:, 1] + self._n] = ambiguity(
                self.window, self.lattice.coords(key)
            )
            self._have[key[:, 0] + self._n, key[:, 1] + self._n] = True
        return self._vals[I, J]


def kernel_matrix(table: KernelTable, rows: np.ndarray, cols: np.ndarray,
                  phase_sign: int = 1) -> np.ndarray:
    """``M[a, b] = <pi(cols[b]) g, pi(rows[a]) g>`` for integer lattice points.

    ``phase_sign = -1`` flips the covariance phase; it exists only so tests can
    check that the identity suite notices a corrupted kernel.
    """
    lat = table.lattice
    rows = np.asarray(rows, dtype=np.int64).reshape(-1, 2)
    cols = np.asarray(cols, dtype=np.int64).reshape(-1, 2)
    V = table.lookup(rows[:, None, 0] - cols[None, :, 0], rows[:, None, 1] - cols[None, :, 1])
    zr = lat.coords(rows)
    zc = lat.coords(cols)
    phase = np.exp(phase_sign * 2j * np.pi * (zc[None, :, 1] - zr[:, None, 1]) * zc[None, :, 0])
    return phase * V


def kernel_rows_xy(window: Window, points_xy: np.ndarray, mu_xy: np.ndarray) -> np.ndarray:
    """``M[m, j] = <pi(lam_j) g, pi(mu_m) g>`` for arbitrary real ``mu``."""
    zs = np.asarray(points_xy, dtype=float)[None, :, :]
    zd = np.asarray(mu_xy, dtype=float).reshape(-1, 2)[:, None, :]
    diff = zd - zs
    phase = np.exp(2j * np.pi * (zs[..., 1] - zd[..., 1]) * zs[..., 0])
    return phase * ambiguity(window, diff)


@dataclass(eq=False)
class GramMatrix:
    points: np.ndarray
    entries: np.ndarray
    window: Window
    lattice: Lattice2
    table: KernelTable = field(repr=False)

    @property
    def N(self) -> int:
        return len(self.points)

    @property
    def xy(self) -> np.ndarray:
        return self.lattice.coords(self.points)

    def hs_norm_sq(self) -> float:
        return float(np.sum(np.abs(self.entries) ** 2))


def build_gram(w: Window, lat: Lattice2, mask: Mask, max_size: int = DEFAULT_MAX_N,
               table: KernelTable | None = None, phase_sign: int = 1) -> GramMatrix:
    """Gram matrix of ``{pi(lam) g : lam in Omega ∩ Lambda}``; Hermitian by mirroring."""
    pts = points_in_mask(mask, lat)
    if len(pts) == 0:
        raise EmptyMaskError(f"mask {mask.spec()} contains no lattice points")
    if len(pts) > max_size:
        raise GramSizeError(f"#(Omega ∩ Lambda) = {len(pts)} exceeds max_size {max_size}")
    if table is None or table.window is not w or table.lattice != lat:
        table = KernelTable(w, lat)
    K = kernel_matrix(table, pts, pts, phase_sign=phase_sign)
    upper = np.triu(K, 1)
    K = upper + upper.conj().T
    K[np.diag_indices_from(K)] = table.lookup(np.zeros(1, np.int64), np.zeros(1, np.int64)).real[0]
    return GramMatrix(pts, K, w, lat, table)


@dataclass(eq=False)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    coeffs: np.ndarray
    norm_floor: float
    raw_min: float
    clamped: int
    psd_ok: bool

    @property
    def N(self) -> int:
        return len(self.eigenvalues)


def eigendecompose(K: GramMatrix, floor_rel: float = NORM_FLOOR_REL) -> SpectralDecomposition:
    """Hermitian eigendecomposition, eigenvalues descending, clamped at zero.

    Eigenvectors are phase-normalized so their largest entry is real positive.
    """
    try:
        vals, vecs = np.linalg.eigh(K.entries)
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(K.entries)
        raise NumericalError(f"eigensolver failed (N={K.N}, cond={cond:.3e})") from exc
    order = np.argsort(-vals, kind="stable")
    vals = vals[order]
    vecs = vecs[:, order]
    lam1 = max(vals[0], 0.0)
    raw_min = float(vals[-1])
    psd_ok = raw_min >= -PSD_TOL_REL * lam1
    if not psd_ok:
        log.warning("Gram matrix not PSD: min eigenvalue %.3e vs lambda_1 %.3e", raw_min, lam1)
    clamped = int(np.sum(vals < 0))
    vals = np.maximum(vals, 0.0)
    piv = np.argmax(np.abs(vecs), axis=0)
    ph = vecs[piv, np.arange(vecs.shape[1])]
    vecs = vecs * (np.abs(ph) / ph)[None, :]
    return SpectralDecomposition(vals, vecs, floor_rel * lam1, raw_min, clamped, bool(psd_ok))


def eigenfunction_stft(dec: SpectralDecomposition, K_ctx: GramMatrix, k: int, mu) -> complex | np.ndarray:
    """``V_g h_k(mu)`` for the k-th (1-based) eigenfunction at real points ``mu``."""
    if not 1 <= k <= dec.N:
        raise IndexError(f"k must be in [1, {dec.N}]")
    lam = dec.eigenvalues[k - 1]
    if lam < dec.norm_floor:
        raise DeflatedEigenvalueError(
            f"lambda_{k} = {lam:.3e} below normalization floor {dec.norm_floor:.3e}"
        )
    mu = np.asarray(mu, dtype=float)
    rows = kernel_rows_xy(K_ctx.window, K_ctx.xy, mu.reshape(-1, 2))
    val = rows @ dec.coeffs[:, k - 1] / math.sqrt(lam)
    return complex(val[0]) if mu.ndim == 1 else val


def stft_coefficients(dec: SpectralDecomposition, rows: np.ndarray, m: int | None = None) -> np.ndarray:
    """Unnormalized ``sum_j c_k[j] <pi(lam_j) g, pi(mu) g>`` for k <= m; shape (M, m)."""
    m = dec.N if m is None else m
    return rows @ dec.coeffs[:, :m]


def a_omega(N: int, l2_norm_sq: float, B: float) -> int:
    """``ceil(N * ||g||^2 / B)``."""
    if N < 1 or B <= 0:
        raise ValueError("need N >= 1 and B > 0")
    x = N * l2_norm_sq / B
    # absorb roundoff so exact integers are not pushed up
    return int(math.ceil(x - 1e-12 * max(1.0, x)))


@dataclass(eq=False)
class AccumulatedSpectrogram:
    field: LatticeField
    a_omega: int
    eval_pad: float
    tail_estimate: float
    tail_mass: float
    guarded: int
    B: float
    l2_norm_sq: float
    shells: int

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    def raw(self) -> np.ndarray:
        """``sum_{k <= A} |V_g h_k|^2`` without the ``1/||g||^2`` normalization."""
        return self.field.values * self.l2_norm_sq

    def summary(self) -> dict:
        return {"a_omega": self.a_omega, "B": self.B, "eval_pad": self.eval_pad,
                "eval_points": len(self.field), "tail_estimate": self.tail_estimate,
                "tail_mass": self.tail_mass, "guarded_terms": self.guarded,
                "shells": self.shells}


def _rho_on(dec, K_ctx, pts, A, weights) -> np.ndarray:
    rows = kernel_matrix(K_ctx.table, pts, K_ctx.points)
    W = stft_coefficients(dec, rows, A)
    return (np.abs(W) ** 2) @ weights / K_ctx.window.l2_norm_sq


def accumulated_spectrogram(dec: SpectralDecomposition, K_ctx: GramMatrix, lat: Lattice2,
                            mask: Mask, B: float, eval_tail_tol: float = 1e-8,
                            max_shells: int = 200) -> AccumulatedSpectrogram:
    """Accumulated spectrogram on ``Omega + B(0, pad)``, pad grown shell by shell.

    A shell of width ``l_fund`` is added until the last shell's mass drops below
    ``eval_tail_tol`` times the accumulated mass.
    """
    if B <= 0:
        raise ValueError("B must be > 0")
    l2 = K_ctx.window.l2_norm_sq
    A = min(a_omega(dec.N, l2, B), dec.N)
    lam = dec.eigenvalues[:A]
    guarded = int(np.sum(lam < dec.norm_floor))
    weights = 1.0 / np.maximum(lam, dec.norm_floor)

    pts = K_ctx.points
    vals = _rho_on(dec, K_ctx, pts, A, weights)
    all_pts = [pts]
    all_vals = [vals]
    seen = {tuple(p) for p in pts}
    total = float(vals.sum())
    pad = 0.0
    tail = total
    shells = 0
    while shells < max_shells:
        shells += 1
        pad = shells * lat.l_fund
        cand = points_near_mask(mask, lat, pad)
        new = np.array([p for p in cand if tuple(p) not in seen], dtype=np.int64).reshape(-1, 2)
        seen.update(map(tuple, new))
        v = _rho_on(dec, K_ctx, new, A, weights) if len(new) else np.zeros(0)
        all_pts.append(new)
        all_vals.append(v)
        tail = float(v.sum())
        total += tail
        if tail < eval_tail_tol * total:
            break
    else:
        log.warning("accumulated spectrogram tail did not converge in %d shells", max_shells)
    P = np.concatenate(all_pts)
    Vv = np.concatenate(all_vals)
    order = np.lexsort((P[:, 1], P[:, 0]))
    fld = LatticeField(lat, P[order], Vv[order])
    return AccumulatedSpectrogram(fld, A, pad, tail / total if total else 0.0, tail,
                                  guarded, B, l2, shells)


def berezin_values(w: Window, lat: Lattice2, mask: Mask, mu_xy) -> np.ndarray:
    """``sum_{lam in Omega ∩ Lambda} |V_g g(mu - lam)|^2`` at real points ``mu``."""
    pts = points_in_mask(mask, lat)
    mu = np.asarray(mu_xy, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        return np.zeros(len(mu))
    diff = mu[:, None, :] - lat.coords(pts)[None, :, :]
    return np.sum(np.abs(ambiguity(w, diff)) ** 2, axis=1)


def berezin_field(w: Window, lat: Lattice2, mask: Mask, mu_list) -> LatticeField:
    """Lattice convolution ``chi_Omega *_Lambda |V_g g|^2`` at lattice points ``mu_list``."""
    mu = np.asarray(mu_list, dtype=np.int64).reshape(-1, 2)
    return LatticeField(lat, mu, berezin_values(w, lat, mask, lat.coords(mu)))


def spectral_berezin(dec: SpectralDecomposition, K_ctx: GramMatrix, mu_xy) -> np.ndarray:
    """``sum_k lam_k |V_g h_k(mu)|^2`` in the division-free form ``sum_k |c_k^T k(mu)|^2``."""
    rows = kernel_rows_xy(K_ctx.window, K_ctx.xy, mu_xy)
    return np.sum(np.abs(stft_coefficients(dec, rows)) ** 2, axis=1)


def bessel_partial_sums(dec: SpectralDecomposition, K_ctx: GramMatrix, mu_xy) -> np.ndarray:
    """Running sums ``sum_{k <= m} |V_g h_k(mu)|^2`` for m = 1..N; shape (M, N).

    Eigenvalues below the normalization floor are replaced by the floor.
    """
    rows = kernel_rows_xy(K_ctx.window, K_ctx.xy, mu_xy)
    W = stft_coefficients(dec, rows)
    terms = np.abs(W) ** 2 / np.maximum(dec.eigenvalues, dec.norm_floor)[None, :]
    return np.cumsum(terms, axis=1)


def l1_error(rho: AccumulatedSpectrogram, mask: Mask, lat: Lattice2) -> tuple[float, float]:
    """``||rho - chi_Omega||_{l1}`` over the evaluation region, with the tail mass as error bar."""
    chi = mask.contains(rho.field.xy).astype(float)
    return float(np.sum(np.abs(rho.values - chi))), rho.tail_mass


def reconstruct_mask(rho: AccumulatedSpectrogram) -> np.ndarray:
    """Evaluation-region lattice points with ``rho > 1/2`` (strict)."""
    return rho.field.points[rho.values > 0.5]


def plunge_count(dec: SpectralDecomposition, delta: float, B: float) -> int:
    """``#{k : delta B < lam_k < (1 - delta) B}``."""
    if not 0 < delta < 0.5:
        raise ValueError("delta must be in (0, 1/2)")
    lam = dec.eigenvalues
    return int(np.sum((lam > delta * B) & (lam < (1 - delta) * B)))


def eig_count_check(dec: SpectralDecomposition, delta: float, B: float, N: int, l2: float,
                    hs: float) -> tuple[float, float, bool]:
    """Counting inequality for eigenvalues above ``B (1 - delta)``.

    ``lhs = |B #{lam_k > B(1-delta)} - N l2|`` and
    ``rhs = max(1/delta, 1/(1-delta)) |N l2 - hs / B|``.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must be in (0, 1)")
    count = int(np.sum(dec.eigenvalues > B * (1 - delta)))
    lhs = abs(B * count - N * l2)
    rhs = max(1 / delta, 1 / (1 - delta)) * abs(N * l2 - hs / B)
    return lhs, rhs, bool(lhs <= rhs + 1e-9)


def trace_difference(dec: SpectralDecomposition, B: float) -> float:
    """``tr(G) - tr(G^2) / B``."""
    if B <= 0:
        raise ValueError("B must be > 0")
    lam = dec.eigenvalues
    return float(np.sum(lam) - np.sum(lam * lam) / B)


@dataclass
class RegularizationCheck:
    lhs: float
    boundary_term: int
    delta_term: float
    tail_mass: float
    eval_pad: float

    @property
    def ratio(self) -> float:
        return self.lhs / (self.boundary_term + self.delta_term)

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "boundary_term": self.boundary_term,
                "delta_term": self.delta_term, "ratio": self.ratio,
                "tail_mass": self.tail_mass, "eval_pad": self.eval_pad}


def regularization_check(w: Window, lat: Lattice2, mask: Mask, B: float, r: float,
                         A: float | None = None, eval_tail_tol: float = 1e-8,
                         max_shells: int = 200) -> RegularizationCheck:
    """``||chi_Omega - chi_Omega *_Lambda phi||_{l1}`` with ``phi = |V_g g|^2 / (B ||g||^2)``.

    ``A`` is the lower frame bound estimate feeding ``delta_term = (1 - A/B) N``.
    """
    inside = points_in_mask(mask, lat)
    N = len(inside)
    l2 = w.l2_norm_sq
    table = KernelTable(w, lat)

    def term(pts):
        if len(pts) == 0:
            return np.zeros(0)
        V = table.lookup(pts[:, None, 0] - inside[None, :, 0], pts[:, None, 1] - inside[None, :, 1])
        conv = np.sum(np.abs(V) ** 2, axis=1) / (B * l2)
        chi = mask.contains(lat.coords(pts)).astype(float)
        return np.abs(chi - conv)

    seen = {tuple(p) for p in inside}
    total = float(term(inside).sum()) if N else 0.0
    tail = total
    pad = 0.0
    for s in range(1, max_shells + 1):
        pad = s * lat.l_fund
        cand = points_near_mask(mask, lat, pad)
        new = np.array([p for p in cand if tuple(p) not in seen], dtype=np.int64).reshape(-1, 2)
        seen.update(map(tuple, new))
        tail = float(term(new).sum())
        total += tail
        if tail < eval_tail_tol * max(total, 1e-300):
            break
    bcount, _ = boundary_count(mask, lat, r + lat.l_fund)
    delta = (1.0 - A / B) * N if A is not None else 0.0
    return RegularizationCheck(total, bcount, max(delta, 0.0), tail, pad)


def bulk_interior(mask: Mask, lat: Lattice2, pts: np.ndarray, dist: float) -> np.ndarray:
    """Boolean selector of points inside the mask at boundary distance > ``dist``."""
    xy = lat.coords(pts)
    return mask.contains(xy) & (mask.boundary_distance(xy) > dist + GEOM_TOL)
