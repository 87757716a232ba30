"""Scalar convex well potentials and their Moreau machinery.

Each potential B is proper, lower semicontinuous and convex on the real
line, vanishes at 0, is nonnegative, and has a closed interval domain
[lo, hi] (infinite endpoints allowed for the non-indicator kinds).
Operations are pure and vectorized: scalars in, scalars out; arrays in,
arrays out.

Three kinds are shipped:

* ``indicator``  -- 0 on [lo, hi], +inf outside (the canonical obstacle),
* ``quadratic``  -- c*t^2/2 on the whole line, c >= 0,
* ``tabulated``  -- convex piecewise-linear interpolation of (t, B(t))
  pairs, +inf outside the table range; its proximal map is computed by
  bisection on the optimality condition.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

# Bisection budget and optimality tolerance for the tabulated prox.
_PROX_MAX_BISECT = 200
_PROX_TOL = 1e-12

# Sampling box used when a potential domain is unbounded: compatibility
# margins are then probed on the interior of [-10, 10].
_UNBOUNDED_SAMPLE_RADIUS = 10.0


def _as_array(r):
    arr = np.asarray(r, dtype=float)
    return arr, arr.ndim == 0


def _restore(arr, scalar):
    return float(arr) if scalar else arr


class ScalarConvexPotential:
    """Base interface; use the module factories to construct instances."""

    kind = "abstract"
    lo = -np.inf
    hi = np.inf

    def value(self, r):
        """B(r), +inf outside the closed domain."""
        raise NotImplementedError

    def prox(self, lam, r):
        """argmin_t (t-r)^2/(2 lam) + B(t); unique by strict convexity."""
        raise NotImplementedError

    def envelope(self, lam, r):
        """Moreau envelope B^lam(r) = (p-r)^2/(2 lam) + B(p), p = prox."""
        lam = _check_lam(lam)
        p = self.prox(lam, r)
        arr, scalar = _as_array(r)
        pa = np.asarray(p, dtype=float)
        out = (pa - arr) ** 2 / (2.0 * lam) + np.asarray(self.value(pa), dtype=float)
        return _restore(out, scalar)

    def yosida(self, lam, r):
        """Yosida slope (r - prox(r)) / lam; the derivative of the envelope."""
        lam = _check_lam(lam)
        arr, scalar = _as_array(r)
        p = np.asarray(self.prox(lam, arr), dtype=float)
        return _restore((arr - p) / lam, scalar)

    def yosida_derivative(self, lam, r):
        """a.e. derivative of the Yosida slope in r (used for Hessian products)."""
        lam = _check_lam(lam)
        arr, scalar = _as_array(r)
        h = 1e-6 * (1.0 + np.abs(arr))
        d = (np.asarray(self.yosida(lam, arr + h)) - np.asarray(self.yosida(lam, arr - h))) / (2.0 * h)
        return _restore(np.maximum(d, 0.0), scalar)

    def project(self, r):
        """Clamp onto the closed domain: (r v lo) ^ hi."""
        arr, scalar = _as_array(r)
        return _restore(np.clip(arr, self.lo, self.hi), scalar)

    def minimal_section(self, r):
        """Least-norm element of the subdifferential at r; nan outside the domain."""
        raise NotImplementedError

    def same_domain(self, other):
        return self.lo == other.lo and self.hi == other.hi

    def contains(self, r):
        """True where r lies in the closed domain."""
        arr, _ = _as_array(r)
        return np.all((arr >= self.lo) & (arr <= self.hi))


def _check_lam(lam):
    lam = float(lam)
    if not lam > 0.0:
        raise ConfigError(f"moreau parameter must be positive, got {lam}")
    return lam


def _check_finite(r):
    arr, _ = _as_array(r)
    if not np.all(np.isfinite(arr)):
        raise ConfigError("prox requires finite input")


class _Indicator(ScalarConvexPotential):
    kind = "indicator"

    def __init__(self, lo, hi):
        lo, hi = float(lo), float(hi)
        if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
            raise ConfigError(f"indicator needs finite lo < hi, got [{lo}, {hi}]")
        if not (lo <= 0.0 <= hi):
            raise ConfigError("indicator domain must contain 0")
        self.lo, self.hi = lo, hi

    def value(self, r):
        arr, scalar = _as_array(r)
        out = np.where((arr >= self.lo) & (arr <= self.hi), 0.0, np.inf)
        return _restore(out, scalar)

    def prox(self, lam, r):
        _check_lam(lam)
        _check_finite(r)
        arr, scalar = _as_array(r)
        return _restore(np.clip(arr, self.lo, self.hi), scalar)

    def envelope(self, lam, r):
        lam = _check_lam(lam)
        arr, scalar = _as_array(r)
        d = np.maximum(arr - self.hi, 0.0) + np.maximum(self.lo - arr, 0.0)
        return _restore(d * d / (2.0 * lam), scalar)

    def yosida_derivative(self, lam, r):
        lam = _check_lam(lam)
        arr, scalar = _as_array(r)
        out = np.where((arr < self.lo) | (arr > self.hi), 1.0 / lam, 0.0)
        return _restore(out, scalar)

    def minimal_section(self, r):
        # Shipped convention: 0 on the interior, +-inf at the endpoints,
        # undefined (nan) outside. Compatibility checks sample the
        # interior only, where this is the exact least-norm selection.
        arr, scalar = _as_array(r)
        out = np.zeros_like(arr)
        out = np.where(arr == self.lo, -np.inf, out)
        out = np.where(arr == self.hi, np.inf, out)
        out = np.where((arr < self.lo) | (arr > self.hi), np.nan, out)
        return _restore(out, scalar)


class _Quadratic(ScalarConvexPotential):
    kind = "quadratic"

    def __init__(self, c):
        c = float(c)
        if not (np.isfinite(c) and c >= 0.0):
            raise ConfigError(f"quadratic coefficient must be >= 0, got {c}")
        self.c = c
        self.lo, self.hi = -np.inf, np.inf

    def value(self, r):
        arr, scalar = _as_array(r)
        return _restore(0.5 * self.c * arr * arr, scalar)

    def prox(self, lam, r):
        lam = _check_lam(lam)
        _check_finite(r)
        arr, scalar = _as_array(r)
        return _restore(arr / (1.0 + lam * self.c), scalar)

    def envelope(self, lam, r):
        lam = _check_lam(lam)
        arr, scalar = _as_array(r)
        return _restore(0.5 * self.c * arr * arr / (1.0 + lam * self.c), scalar)

    def yosida_derivative(self, lam, r):
        lam = _check_lam(lam)
        arr, scalar = _as_array(r)
        out = np.full_like(arr, self.c / (1.0 + lam * self.c))
        return _restore(out, scalar)

    def minimal_section(self, r):
        arr, scalar = _as_array(r)
        return _restore(self.c * arr, scalar)


class _Tabulated(ScalarConvexPotential):
    kind = "tabulated"

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise ConfigError("tabulated potential needs >= 2 (t, B) pairs")
        order = np.argsort(pts[:, 0])
        self.ts = pts[order, 0]
        self.bs = pts[order, 1]
        if np.any(np.diff(self.ts) <= 0.0):
            raise ConfigError("tabulated breakpoints must be strictly increasing")
        if np.any(self.bs < -1e-12):
            raise ConfigError("tabulated potential values must be nonnegative")
        self.slopes = np.diff(self.bs) / np.diff(self.ts)
        if np.any(np.diff(self.slopes) < -1e-9 * (1.0 + np.abs(self.slopes[:-1]))):
            raise ConfigError("tabulated potential is not convex (slopes decrease)")
        self.lo, self.hi = float(self.ts[0]), float(self.ts[-1])
        if not (self.lo <= 0.0 <= self.hi):
            raise ConfigError("tabulated domain must contain 0")
        if abs(float(np.interp(0.0, self.ts, self.bs))) > 1e-12:
            raise ConfigError("tabulated potential must vanish at 0")

    def value(self, r):
        arr, scalar = _as_array(r)
        inside = (arr >= self.lo) & (arr <= self.hi)
        out = np.where(inside, np.interp(arr, self.ts, self.bs), np.inf)
        return _restore(out, scalar)

    def _slope_right(self, t):
        # slope of the segment to the right of t; last slope at/after hi
        idx = np.clip(np.searchsorted(self.ts, t, side="right") - 1, 0, len(self.slopes) - 1)
        return self.slopes[idx]

    def _slope_left(self, t):
        idx = np.clip(np.searchsorted(self.ts, t, side="left") - 1, 0, len(self.slopes) - 1)
        return self.slopes[idx]

    def prox(self, lam, r):
        lam = _check_lam(lam)
        _check_finite(r)
        arr, scalar = _as_array(r)
        flat = np.atleast_1d(arr).astype(float)
        # Bisection on the (strictly increasing) right derivative of
        # q(t) = (t - r)^2 / (2 lam) + B(t) over the domain.
        at_lo = (self.lo - flat) / lam + self.slopes[0] >= 0.0
        at_hi = (self.hi - flat) / lam + self.slopes[-1] <= 0.0
        lo_b = np.full_like(flat, self.lo)
        hi_b = np.full_like(flat, self.hi)
        for _ in range(_PROX_MAX_BISECT):
            if np.max(hi_b - lo_b) <= _PROX_TOL * 1e-3:
                break
            mid = 0.5 * (lo_b + hi_b)
            pos = (mid - flat) / lam + self._slope_right(mid) > 0.0
            hi_b = np.where(pos, mid, hi_b)
            lo_b = np.where(pos, lo_b, mid)
        out = 0.5 * (lo_b + hi_b)
        out = np.where(at_lo, self.lo, out)
        out = np.where(at_hi, self.hi, out)
        out = out.reshape(arr.shape)
        return _restore(out, scalar)

    def optimality_residual(self, lam, r, p):
        """Distance of (r - p)/lam from the subdifferential interval near p.

        The interval is widened by the bisection resolution so a prox that
        landed within roundoff of a breakpoint still certifies.
        """
        lam = _check_lam(lam)
        h = _PROX_TOL
        g = (np.asarray(r, dtype=float) - p) / lam
        s_lo = np.where(p <= self.lo + h, -np.inf, self._slope_left(p - h))
        s_hi = np.where(p >= self.hi - h, np.inf, self._slope_right(p + h))
        return np.maximum(np.maximum(s_lo - g, g - s_hi), 0.0)

    def minimal_section(self, r):
        arr, scalar = _as_array(r)
        s_lo = np.where(arr <= self.lo, -np.inf, self._slope_left(arr))
        s_hi = np.where(arr >= self.hi, np.inf, self._slope_right(arr))
        out = np.where(s_lo > 0.0, s_lo, np.where(s_hi < 0.0, s_hi, 0.0))
        out = np.where((arr < self.lo) | (arr > self.hi), np.nan, out)
        return _restore(out, scalar)


def indicator(lo=-1.0, hi=1.0):
    """Obstacle potential: 0 on [lo, hi], +inf outside."""
    return _Indicator(lo, hi)


def quadratic(c=1.0):
    """B(t) = c t^2 / 2 on the whole line."""
    return _Quadratic(c)


def tabulated(points):
    """Convex piecewise-linear potential through the given (t, B) pairs."""
    return _Tabulated(points)


def potential_from_spec(spec):
    """Build a potential from its configuration dict."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"potential spec must be a dict with 'kind': {spec!r}")
    kind = spec["kind"]
    if kind == "indicator":
        return indicator(spec.get("lo", -1.0), spec.get("hi", 1.0))
    if kind == "quadratic":
        return quadratic(spec.get("c", 1.0))
    if kind == "tabulated":
        if "points" not in spec:
            raise ConfigError("tabulated potential spec needs 'points'")
        return tabulated(spec["points"])
    raise ConfigError(f"unknown potential kind {kind!r}")


@dataclass(frozen=True)
class CompatibilityConstants:
    """Constants of the two-sided slope comparison between bulk and boundary wells."""

    a0: float
    a1: float
    b0: float = 0.0
    b1: float = 0.0

    def __post_init__(self):
        if not (self.a0 > 0.0 and self.a1 > 0.0):
            raise ConfigError("a0, a1 must be positive")
        if self.b0 < 0.0 or self.b1 < 0.0:
            raise ConfigError("b0, b1 must be nonnegative")


@dataclass(frozen=True)
class CompatibilityReport:
    holds: bool
    worst_margin: float


def check_compatibility(pbulk, pbdry, consts, samples=1001):
    """Probe a0*|s_bdry| - b0 <= |s_bulk| <= a1*|s_bdry| + b1 on the domain interior.

    Both potentials must share the same domain interval. Minimal sections
    are evaluated exactly at ``samples`` interior points (clamped to
    [-10, 10] when the domain is unbounded) and the tightest margin of
    the two inequalities is reported; a negative worst margin refutes the
    pair for the given constants.
    """
    if samples < 1:
        raise ConfigError("samples must be positive")
    if not pbulk.same_domain(pbdry):
        raise ConfigError(
            f"potential domains differ: [{pbulk.lo}, {pbulk.hi}] vs [{pbdry.lo}, {pbdry.hi}]"
        )
    lo = max(pbulk.lo, -_UNBOUNDED_SAMPLE_RADIUS)
    hi = min(pbulk.hi, _UNBOUNDED_SAMPLE_RADIUS)
    ts = lo + (hi - lo) * (np.arange(1, samples + 1) / (samples + 1.0))
    sb = np.abs(np.asarray(pbulk.minimal_section(ts), dtype=float))
    sg = np.abs(np.asarray(pbdry.minimal_section(ts), dtype=float))
    margin_lo = sb - (consts.a0 * sg - consts.b0)
    margin_hi = (consts.a1 * sg + consts.b1) - sb
    worst = float(np.min(np.minimum(margin_lo, margin_hi)))
    return CompatibilityReport(holds=worst >= -1e-12, worst_margin=worst)
