"""Trajectory post-processing: box-counting dimension, inversion times, coupling scans."""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import logging
import math
import os

import numpy as np

from .analytic import rwa_amplitude
from .errors import DegenerateSeriesError, GridBoundaryError
from .model import SystemParams, Variant
from .propagate import Scenario, simulate

log = logging.getLogger(__name__)

SLOPE_TOLERANCE = 0.15
MIN_FIT_POINTS = 5
TAUS_PER_DECADE = 12
SLOPE_HALF_WIDTH = 2


@dataclass
class BoxCountTable:
    taus: np.ndarray
    m_values: np.ndarray
    series_meta: dict = field(default_factory=dict)

    def rows(self, local_slopes=None):
        slopes = local_slopes if local_slopes is not None else np.full(len(self.taus), np.nan)
        return list(zip(self.taus.tolist(), self.m_values.tolist(), list(slopes)))


@dataclass
class FractalFit:
    dimension: float
    fit_window: tuple
    r_squared: float
    local_slopes: np.ndarray
    n_points: int


def default_taus(total_time, dt_sample, per_decade=TAUS_PER_DECADE):
    """Geometric grid from 4*dt_sample to total_time/8, snapped to whole samples."""
    lo, hi = 4 * dt_sample, total_time / 8
    if hi <= lo:
        raise ValueError(f"series of length {total_time} too short for box counting")
    n = max(2, int(math.ceil(per_decade * math.log10(hi / lo))) + 1)
    ks = np.unique(np.rint(np.geomspace(lo, hi, n) / dt_sample).astype(int))
    return ks * dt_sample


def box_count(series, dt_sample, taus=None, meta=None):
    """Average excursion M(tau) = sum_i Delta_i / tau of a uniformly sampled series.

    ``[0, T]`` is cut into floor(T/tau) segments of ``k = tau/dt_sample`` steps;
    segment ``i`` spans samples ``i*k .. (i+1)*k`` inclusive, so a straight line
    of slope c gives Delta_i = c*tau exactly. Each tau is snapped to a whole
    number of samples.
    """
    y = np.asarray(series, dtype=float)
    if y.ndim != 1 or len(y) < 2:
        raise ValueError("series must be one-dimensional with at least two samples")
    total = (len(y) - 1) * dt_sample
    if taus is None:
        taus = default_taus(total, dt_sample)
    ks = np.unique(np.rint(np.asarray(taus, dtype=float) / dt_sample).astype(int))
    if ks[0] * dt_sample < 2 * dt_sample - 1e-12 or ks[-1] * dt_sample > total / 4 + 1e-9:
        raise ValueError(f"tau must lie in [{2 * dt_sample:g}, {total / 4:g}]")
    if len(y) < 8 * ks[0]:
        raise ValueError("series too short for the smallest tau (need 8 samples per tau)")
    m_values = np.empty(len(ks))
    for i, k in enumerate(ks):
        nseg = (len(y) - 1) // k
        body = y[:nseg * k].reshape(nseg, k)
        ends = y[k:nseg * k + 1:k]
        hi = np.maximum(body.max(axis=1), ends)
        lo = np.minimum(body.min(axis=1), ends)
        m_values[i] = np.sum(hi - lo) / (k * dt_sample)
    return BoxCountTable(ks * dt_sample, m_values, dict(meta or {}, dt_sample=dt_sample,
                                                         total_time=total))


def local_slopes(taus, m_values, half_width=SLOPE_HALF_WIDTH):
    """-d log M / d log tau from least squares over a sliding window of 2*half_width+1 points."""
    x, y = np.log(taus), np.log(m_values)
    n = len(x)
    out = np.empty(n)
    for i in range(n):
        lo, hi = max(0, i - half_width), min(n, i + half_width + 1)
        out[i] = -np.polyfit(x[lo:hi], y[lo:hi], 1)[0]
    return out


def _auto_window(slopes, tolerance, min_points):
    """Longest contiguous run whose local slopes span less than ``tolerance``.

    The leading points with slope below ``1 + tolerance`` are skipped first:
    there the sampling resolves the curve as smooth and the slope tends to 1
    whatever the series. If nothing usable remains, the whole range is
    searched. Ties go to the run at larger tau.
    """
    n = len(slopes)
    start = 0
    while start < n and slopes[start] < 1.0 + tolerance:
        start += 1
    for first in (start, 0):
        best = None
        for i in range(first, n):
            lo = hi = slopes[i]
            j = i
            while j + 1 < n:
                nlo, nhi = min(lo, slopes[j + 1]), max(hi, slopes[j + 1])
                if nhi - nlo >= tolerance:
                    break
                lo, hi, j = nlo, nhi, j + 1
            length = j - i + 1
            if length >= min_points and (best is None or length >= best[1] - best[0] + 1):
                best = (i, j)
        if best is not None:
            return best
    return None


def fit_dimension(table, window="auto", tolerance=SLOPE_TOLERANCE, min_points=MIN_FIT_POINTS):
    """Least-squares power law M ~ tau^(-D) over a window of the box-count table.

    ``window`` is ``"auto"`` or an explicit ``(tau_min, tau_max)`` pair.
    """
    taus, m = np.asarray(table.taus), np.asarray(table.m_values)
    if np.all(m == 0):
        raise DegenerateSeriesError("series has no excursion: M(tau) = 0 everywhere")
    if np.any(m <= 0):
        raise DegenerateSeriesError("M(tau) must be positive for a log-log fit")
    slopes = local_slopes(taus, m)
    if isinstance(window, str):
        if window != "auto":
            raise ValueError(f"unknown window policy {window!r}")
        found = _auto_window(slopes, tolerance, min_points)
        if found is None:
            raise ValueError(f"no run of {min_points} points with slope spread < {tolerance}")
        i, j = found
        sel = np.arange(i, j + 1)
    else:
        tmin, tmax = window
        sel = np.flatnonzero((taus >= tmin * (1 - 1e-9)) & (taus <= tmax * (1 + 1e-9)))
        if len(sel) < min_points:
            raise ValueError(f"window {window} holds {len(sel)} points; need {min_points}")
    x, y = np.log(taus[sel]), np.log(m[sel])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else 1.0
    return FractalFit(float(-slope), (float(taus[sel[0]]), float(taus[sel[-1]])), float(r2),
                      slopes, len(sel))


def fractal_dimension(series, dt_sample, taus=None, window="auto"):
    table = box_count(series, dt_sample, taus)
    return fit_dimension(table, window), table


@dataclass
class InversionResult:
    """First time N3 exceeds N1 (``t_inv``), or ``None`` when it never does.

    ``crossing_margin`` bounds |N1 - N3| on the bracketing samples, i.e. the
    residual the linear interpolation has to absorb.
    """

    t_inv: float = None
    crossing_margin: float = float("nan")
    index: int = None

    @property
    def inverted(self):
        return self.t_inv is not None


def inversion_time(trajectory):
    """First sign change of N1 - N3, refined by linear interpolation."""
    t = np.asarray(trajectory.times)
    dn = np.asarray(trajectory["n1"]) - np.asarray(trajectory["n3"])
    below = np.flatnonzero(dn < 0)
    if len(below) == 0:
        return InversionResult()
    k = int(below[0])
    if k == 0:
        return InversionResult(float(t[0]), abs(float(dn[0])), 0)
    a, b = dn[k - 1], dn[k]
    t_inv = t[k - 1] + (t[k] - t[k - 1]) * a / (a - b)
    return InversionResult(float(t_inv), float(max(abs(a), abs(b))), k)


def inversion_stop(row):
    return row["n3"] > row["n1"]


@dataclass
class ScanPoint:
    g: float
    t_inv: float = None
    censored: bool = False
    n_max: int = None
    error: str = None


@dataclass
class ScanCurve:
    points: list
    params: SystemParams
    t_max: float
    meta: dict = field(default_factory=dict)

    @property
    def g(self):
        return np.array([p.g for p in self.points])

    @property
    def t_inv(self):
        return np.array([np.nan if p.t_inv is None else p.t_inv for p in self.points])

    @property
    def censored(self):
        return np.array([p.censored for p in self.points])

    def rows(self):
        return [(p.g, p.t_inv, p.censored, p.error) for p in self.points]


def _scan_one(args):
    params, scenario, n_max, backend = args
    try:
        traj = simulate(params, scenario, n_max, stop=inversion_stop, backend=backend)
    except Exception as exc:  # surfaced per point, the scan carries on
        log.warning("scan point g=%g failed: %s", params.g, exc)
        return ScanPoint(params.g, error=f"{type(exc).__name__}: {exc}", n_max=n_max)
    res = inversion_time(traj)
    if res.inverted:
        return ScanPoint(params.g, res.t_inv, False, n_max)
    return ScanPoint(params.g, None, True, n_max)


def _pool_map(func, jobs, workers):
    if workers is None:
        workers = os.cpu_count() or 1
    if workers <= 1 or len(jobs) <= 1:
        return [func(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map preserves grid order regardless of completion order
        return list(pool.map(func, jobs))


def scan_inversion_vs_g(params_base, g_grid, t_max, n_max, dt=0.01, dt_sample=0.1,
                        method="trotter4", workers=None, backend=None):
    """Inversion time of the single-photon transfer for every g in ``g_grid``.

    Each run stops at the first inversion. Points that never invert before
    ``t_max`` are marked censored; failures are stored on the point.
    """
    g_grid = np.asarray(g_grid, dtype=float)
    if len(g_grid) > 1 and not (np.all(np.diff(g_grid) > 0) or np.all(np.diff(g_grid) < 0)):
        raise ValueError("g_grid must be monotone")
    scenario = Scenario(initial="single_photon", t_end=t_max, dt=dt, dt_sample=dt_sample,
                        method=method)
    jobs = [(params_base.with_(g=float(g)), scenario, n_max, backend) for g in g_grid]
    points = _pool_map(_scan_one, jobs, workers)
    meta = {"params": params_base.as_dict(), "t_max": t_max, "n_max": n_max, "dt": dt,
            "dt_sample": dt_sample, "method": method}
    return ScanCurve(points, params_base, t_max, meta)


def estimate_gc(curve):
    """Critical coupling: argmax of T_inv over the grid, censored points counted as +inf.

    Several censored points resolve to the middle of the longest censored run.
    Returns ``(g_c, t_inv_max)``; ``t_inv_max`` is ``inf`` when censored.
    """
    g = curve.g
    if len(g) < 2:
        raise ValueError("estimate_gc needs at least two grid points")
    spacing = np.max(np.abs(np.diff(g)))
    if spacing > 0.01 + 1e-12:
        raise ValueError(f"grid spacing {spacing:g} too coarse to resolve the spike (need <= 0.01)")
    t = curve.t_inv
    cens = curve.censored
    valid = cens | np.isfinite(t)
    if not valid.any():
        raise ValueError("no usable scan points")
    if cens.any():
        runs, start = [], None
        for i, c in enumerate(cens):
            if c and start is None:
                start = i
            if not c and start is not None:
                runs.append((start, i - 1))
                start = None
        if start is not None:
            runs.append((start, len(cens) - 1))
        lo, hi = max(runs, key=lambda r: r[1] - r[0])
        k = (lo + hi) // 2
        t_max = float("inf")
    else:
        k = int(np.nanargmax(np.where(valid, t, -np.inf)))
        t_max = float(t[k])
    if k == 0 or k == len(g) - 1:
        raise GridBoundaryError(f"T_inv maximum at grid edge g={g[k]:g}; widen the grid")
    return float(g[k]), t_max


def fit_gc_law(j2_values, gc_values):
    """Linear fit g_c = intercept + slope * J2; returns ``(slope, intercept)``."""
    slope, intercept = np.polyfit(np.asarray(j2_values, float), np.asarray(gc_values, float), 1)
    return float(slope), float(intercept)


@dataclass
class AmplitudeCurve:
    g: float
    j1: float
    j2: np.ndarray
    analytic: np.ndarray
    numeric: np.ndarray = None


def _numeric_amplitude(args):
    g, j1, j2, n_max, dt, dt_sample, backend = args
    lam = math.sqrt(g * g + j1 * j1 + j2 * j2)
    if j2 == 0:
        return 0.0
    # one full period of the closed-form oscillation, rounded up to a whole sample
    t_end = math.ceil(2 * math.pi / lam / dt_sample) * dt_sample
    params = SystemParams(g=g, j1=j1, j2=j2, omega_q=1.0, variant=Variant.FULL_RWA)
    traj = simulate(params, Scenario(t_end=t_end, dt=dt, dt_sample=dt_sample), n_max,
                    backend=backend)
    return math.sqrt(max(0.0, float(np.max(traj["n3"]))))


def amplitude_scan(g, j1, j2_grid, numeric=False, n_max=2, dt=0.1, dt_sample=0.5,
                   workers=1, backend=None):
    """Closed-form transfer amplitude T(J2), optionally with sqrt(max_t N3) from FullRWA runs.

    The rotating-wave dynamics at resonance only couples states of equal
    excitation number, so the Trotter splitting error stays tiny even at the
    coarse default ``dt``.
    """
    j2_grid = np.asarray(j2_grid, dtype=float)
    analytic = np.array([rwa_amplitude(g, j1, j2) if (g or j1 or j2) else 0.0 for j2 in j2_grid])
    numeric_vals = None
    if numeric:
        jobs = [(g, j1, float(j2), n_max, dt, dt_sample, backend) for j2 in j2_grid]
        numeric_vals = np.array(_pool_map(_numeric_amplitude, jobs, workers))
    return AmplitudeCurve(g, j1, j2_grid, analytic, numeric_vals)
