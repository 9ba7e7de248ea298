"""Finite-horizon escape-rate certificates.

A certificate says that the defining inequalities of a category held at every
checked index of a window ``[N, horizon]``.  It never claims set membership.
Log-magnitudes ``L_n = log|f^n(z)|`` are compared in float form while finite;
larger iterates are compared as tower values.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .expmap import Cartesian, ExpMap, TowerPoint, log_plus_p
from .tower import TowerValue

BOUNDED = "Bounded/Unknown"
SLOW = "Slow"
UNIFORM_SLOW = "UniformSlow"
FLAT_SLOW = "FlatSlow"
MODERATE = "Moderate"
FLAT_MODERATE = "FlatModerate"
FAST = "Fast"
CATEGORIES = (BOUNDED, SLOW, UNIFORM_SLOW, FLAT_SLOW, MODERATE, FLAT_MODERATE, FAST)
SLOW_FAMILY = (UNIFORM_SLOW, FLAT_SLOW, SLOW)

LOG2 = math.log(2.0)


class ConePreconditionFailed(ValueError):
    def __init__(self, n: int):
        self.n = n
        super().__init__(f"f^{n}(z) is outside the cone Re z > |z|/2")


def default_R_grid() -> tuple:
    return tuple(math.exp(j / 4) for j in range(1, 81))


@dataclass(frozen=True)
class ClassifyParams:
    R_grid: tuple = field(default_factory=default_R_grid)
    R_hints: tuple = ()
    p_max: int = 10
    ell_max: int = 5
    # UniformSlow: spread of log(|f^n| / R^n) allowed, in units of log R
    band: float = 2.0
    C_max: float = 10.0
    escape_radius: float | None = None
    fast_base: float | None = None
    min_checked: int = 2

    def candidates(self) -> list[float]:
        return list(self.R_hints) + [r for r in self.R_grid if r not in self.R_hints]


@dataclass(frozen=True)
class EscapeCertificate:
    category: str
    horizon: int
    N: int | None = None
    R: float | None = None
    C1: float | None = None
    C2: float | None = None
    p: int | None = None
    C: float | None = None
    ell: int | None = None
    method: str | None = None

    @property
    def window_checked(self):
        return None if self.N is None else [self.N, self.horizon]

    def as_dict(self) -> dict:
        d = asdict(self)
        d["window_checked"] = self.window_checked
        return d

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True)


# --------------------------------------------------------------------------
# orbit data


@dataclass
class OrbitData:
    points: list
    L: np.ndarray  # log|f^n|, inf beyond double range
    LL: np.ndarray  # log log|f^n|, -inf when |f^n| <= e

    @property
    def horizon(self) -> int:
        return len(self.points) - 1

    def magnitude(self, n: int) -> TowerValue:
        return self.points[n].magnitude()


def orbit_data(fmap: ExpMap, z, horizon: int) -> OrbitData:
    pts = fmap.orbit(z, horizon)
    L = np.empty(len(pts))
    LL = np.empty(len(pts))
    for i, p in enumerate(pts):
        L[i] = p.log_abs()
        if isinstance(p, TowerPoint):
            LL[i] = p.tower.loglog_float()
        else:
            LL[i] = math.log(L[i]) if L[i] > 0 else -math.inf
    return OrbitData(pts, L, LL)


def _escape_radius(fmap: ExpMap, params: ClassifyParams) -> float:
    if params.escape_radius is not None:
        return params.escape_radius
    return max(fmap.escape_threshold() + 1, math.e)


def _fast_base(fmap: ExpMap, params: ClassifyParams) -> float:
    if params.fast_base is not None:
        return params.fast_base
    return fmap.escape_threshold() + 1


def _escape_evidence(d: OrbitData, N: int, log_rho: float) -> bool:
    """Every window value above the escape radius and the last one above the window minimum."""
    w = d.L[N:]
    return len(w) >= 2 and bool(np.all(w > log_rho)) and w[-1] > w[:-1].min()


# --------------------------------------------------------------------------
# per-category checks on a fixed window; each returns a certificate or None


def _window(d: OrbitData, N: int, start: int = 1):
    lo = max(N, start)
    n = np.arange(lo, d.horizon + 1)
    return n, d.L[lo:], d.LL[lo:]


def _check_slow(d, N, params, R=None):
    n, L, _ = _window(d, N)
    if len(n) < params.min_checked or not np.all(np.isfinite(L)):
        return None
    need = float(np.max(L / n))
    cands = [R] if R is not None else params.candidates()
    for r in cands:
        if need <= math.log(r):
            return EscapeCertificate(SLOW, d.horizon, N=N, R=r)
    return None


def _check_uniform(d, N, params, R=None):
    n = np.arange(N, d.horizon + 1)
    L = d.L[N:]
    if len(n) < params.min_checked or not np.all(np.isfinite(L)):
        return None
    cands = [R] if R is not None else params.candidates()
    logs = np.log(np.array(cands))
    D = L[None, :] - n[None, :] * logs[:, None]
    lo, hi = D.min(axis=1), D.max(axis=1)
    ok = (hi - lo) <= params.band * logs
    if not ok.any():
        return None
    hinted = len(params.R_hints) if R is None else 0
    if hinted and ok[:hinted].any():
        i = int(np.argmax(ok[:hinted]))
    else:
        score = np.where(ok, (hi - lo) / logs, np.inf)
        i = int(np.argmin(score))
    return EscapeCertificate(
        UNIFORM_SLOW, d.horizon, N=N, R=cands[i], C1=float(math.exp(lo[i])), C2=float(math.exp(hi[i]))
    )


def _flat_lower(n, p):
    return np.array([log_plus_p(float(k), p) for k in n])


def _check_flat_slow(d, N, params, R=None, p=None):
    slow = _check_slow(d, N, params, R)
    if slow is None:
        return None
    n, L, _ = _window(d, N)
    for q in [p] if p is not None else range(1, params.p_max + 1):
        lp = _flat_lower(n, q)
        if np.count_nonzero(lp > 0) < params.min_checked:
            continue
        if np.all(L >= lp * np.log(n)):
            return replace(slow, category=FLAT_SLOW, p=q)
    return None


def _check_flat_moderate(d, N, params, p=None):
    n, L, LL = _window(d, N)
    if len(n) < params.min_checked:
        return None
    for q in [p] if p is not None else range(1, params.p_max + 1):
        lp = _flat_lower(n, q)
        if np.count_nonzero(lp > 0) < params.min_checked:
            continue
        if np.all(L >= n * lp) and np.all(LL <= q * n):
            return EscapeCertificate(FLAT_MODERATE, d.horizon, N=N, p=q)
    return None


def _check_moderate(d, N, params, C=None):
    n, _, LL = _window(d, N)
    if len(n) < params.min_checked:
        return None
    fitted = float(np.max(LL / n))
    limit = params.C_max if C is None else C
    if not math.isfinite(fitted) and fitted > 0:
        return None
    if fitted <= limit:
        return EscapeCertificate(MODERATE, d.horizon, N=N, C=max(fitted, 0.0))
    return None


def _cone(p) -> bool | None:
    """Cone membership, or None when the argument is unknown."""
    if isinstance(p, TowerPoint) or not p.arg_reliable:
        return None
    return p.re > abs(p.value) / 2


def _fast_cone(fmap: ExpMap, d: OrbitData, N: int, horizon: int) -> bool:
    for n in range(N, horizon + 1):
        if _cone(d.points[n]) is False:
            raise ConePreconditionFailed(n)
    mu = d.magnitude(N).add_log(-LOG2)
    for k in range(1, horizon - N + 1):
        mu = fmap.max_modulus_tower(mu).add_log(-LOG2)
        if not d.magnitude(N + k) > mu:
            return False
    return True


def _check_fast_tower(fmap, d, ell, base, params):
    count = d.horizon - ell + 1
    if count < params.min_checked or not fmap.escapes_from(base):
        return False
    m = TowerValue.from_float(base)
    for n in range(count):
        if n > 0:
            m = fmap.max_modulus_tower(m)
        if d.magnitude(n + ell) < m:
            return False
    return True


def _find_fast(fmap, d, params, log_rho):
    half = d.horizon // 2
    for N in range(half + 1):
        if not _escape_evidence(d, N, log_rho):
            continue
        try:
            if _fast_cone(fmap, d, N, d.horizon):
                return EscapeCertificate(FAST, d.horizon, N=N, ell=N, method="cone")
        except ConePreconditionFailed:
            pass
    base = _fast_base(fmap, params)
    for ell in range(min(params.ell_max, d.horizon) + 1):
        if _escape_evidence(d, ell, log_rho) and _check_fast_tower(fmap, d, ell, base, params):
            return EscapeCertificate(FAST, d.horizon, N=ell, R=base, ell=ell, method="tower")
    return None


# --------------------------------------------------------------------------
# public API


def classify(fmap: ExpMap, z, horizon: int, params: ClassifyParams | None = None) -> EscapeCertificate:
    """Most specific category consistent with the orbit of ``z`` up to ``horizon``.

    Search order: the slow family (UniformSlow, FlatSlow, Slow), then Fast
    (cone criterion first, then the tower comparison), then FlatModerate,
    Moderate, and finally Bounded/Unknown.  The smallest window start
    ``N <= horizon/2`` that works is reported.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    params = params or ClassifyParams()
    d = orbit_data(fmap, z, horizon)
    return classify_orbit(fmap, d, params)


def classify_orbit(fmap: ExpMap, d: OrbitData, params: ClassifyParams) -> EscapeCertificate:
    log_rho = math.log(_escape_radius(fmap, params))
    starts = [N for N in range(d.horizon // 2 + 1) if _escape_evidence(d, N, log_rho)]
    if not starts:
        return EscapeCertificate(BOUNDED, d.horizon)
    for check in (_check_uniform, _check_flat_slow, _check_slow):
        for N in starts:
            cert = check(d, N, params)
            if cert is not None:
                return cert
    fast = _find_fast(fmap, d, params, log_rho)
    if fast is not None:
        return fast
    for check in (_check_flat_moderate, _check_moderate):
        for N in starts:
            cert = check(d, N, params)
            if cert is not None:
                return cert
    return EscapeCertificate(BOUNDED, d.horizon)


def check_category(
    fmap: ExpMap,
    z,
    category: str,
    horizon: int,
    N: int,
    params: ClassifyParams | None = None,
    R: float | None = None,
) -> EscapeCertificate | None:
    """Validate one category on the window ``[N, horizon]``.

    ``R`` pins the base for the slow family; otherwise the grid is searched.
    Escape evidence is required for every category except Bounded/Unknown.
    """
    params = params or ClassifyParams()
    d = z if isinstance(z, OrbitData) else orbit_data(fmap, z, horizon)
    if category == BOUNDED:
        return EscapeCertificate(BOUNDED, d.horizon)
    if not _escape_evidence(d, N, math.log(_escape_radius(fmap, params))):
        return None
    if category == UNIFORM_SLOW:
        return _check_uniform(d, N, params, R)
    if category == FLAT_SLOW:
        return _check_flat_slow(d, N, params, R)
    if category == SLOW:
        return _check_slow(d, N, params, R)
    if category == FLAT_MODERATE:
        return _check_flat_moderate(d, N, params)
    if category == MODERATE:
        return _check_moderate(d, N, params)
    if category == FAST:
        try:
            if _fast_cone(fmap, d, N, d.horizon):
                return EscapeCertificate(FAST, d.horizon, N=N, ell=N, method="cone")
        except ConePreconditionFailed:
            pass
        base = _fast_base(fmap, params)
        if _check_fast_tower(fmap, d, N, base, params):
            return EscapeCertificate(FAST, d.horizon, N=N, R=base, ell=N, method="tower")
        return None
    raise ValueError(f"unknown category {category!r}")


# --------------------------------------------------------------------------
# cone criterion


def ku_cone_test(fmap: ExpMap, z) -> bool:
    """True iff ``Re z > |z|/2``.

    On the cone ``|f(z)| = |lam| e^(Re z) > |lam| e^(|z|/2) = M(|z|/2)``; the
    comparison is made on the log-magnitudes and asserted.
    """
    z = complex(z)
    inside = z.real > abs(z) / 2
    if inside:
        # log|f(z)| - log M(|z|/2); log|lam| cancels exactly
        assert z.real - abs(z) / 2 > 0, "cone image does not dominate M(|z|/2)"
    return inside


def ku_region_test(fmap: ExpMap, z, q: float = 50.0) -> bool:
    """Cone membership with the extra requirement ``Re z > q``."""
    return complex(z).real > q and ku_cone_test(fmap, z)


def ku_fast_check(fmap: ExpMap, z, N: int, horizon: int) -> bool:
    """``|f^n(f^N z)| > mu^n(|f^N z| / 2)`` for ``0 < n <= horizon - N``, with ``mu = M/2``.

    Every orbit point in ``[N, horizon]`` whose argument is still known must
    lie in the cone; tower-form points carry no argument and are accepted.
    """
    if not 0 <= N <= horizon:
        raise ValueError("need 0 <= N <= horizon")
    d = orbit_data(fmap, z, horizon)
    return _fast_cone(fmap, d, N, horizon)


# --------------------------------------------------------------------------
# minimum modulus


@dataclass(frozen=True)
class MinModulusReport:
    c: float
    d: float
    r0: float
    sampled_r: list
    found_rho: list
    holds: bool
    closed_form: str


def min_modulus_condition(fmap: ExpMap, c: float, d: float, r0: float, samples: int = 16) -> MinModulusReport:
    """For all ``r >= r0`` some ``rho`` in ``(r, d r)`` has ``m(rho) <= c``.

    ``m(rho) = |lam| e^(-rho)`` decreases, so the worst radius is the smallest
    one and the condition reduces to ``|lam| e^(-d r0) < c``.  Radii are taken
    positive, since ``(r, d r)`` is empty for ``r <= 0``.
    """
    if not d > 1 or samples < 1:
        raise ValueError("need d > 1 and samples >= 1")
    if not c > 0:
        return MinModulusReport(c, d, r0, [], [], False, "m > 0 everywhere, so c <= 0 never holds")
    threshold = fmap.log_abs_lambda - math.log(c)  # m(rho) <= c iff rho >= threshold
    if r0 > 0:
        holds = d * r0 > threshold
        form = f"d*r0 = {d * r0:.9g} > log(|lam|/c) = {threshold:.9g}"
        start = r0
    else:
        holds = threshold <= 0
        form = f"r -> 0+: need |lam| <= c, log(|lam|/c) = {threshold:.9g}"
        start = 1.0
    radii = [start * d ** (i / 2) for i in range(samples)]
    found = []
    for r in radii:
        lo = max(r, threshold)
        rho = 0.5 * (lo + d * r)
        found.append(rho if r < rho < d * r and fmap.min_modulus(rho) <= c else None)
    if holds and any(v is None for v in found):
        holds = False
    return MinModulusReport(c, d, r0, radii, found, holds, form)


# --------------------------------------------------------------------------
# invariance


def invariance_check(fmap: ExpMap, z, cert: EscapeCertificate, k: int, params: ClassifyParams | None = None) -> dict:
    """Forward-shift and single-preimage checks of a UniformSlow certificate.

    The image orbit is validated on ``[max(N-1, 0), H-1]`` and the preimage
    orbit on ``[N+1, H+1]``, both with the certificate's base ``R``.
    """
    params = params or ClassifyParams()
    report = {"precondition": True, "forward": None, "preimage": None, "ok": False}
    if cert.category != UNIFORM_SLOW or cert.horizon < 3:
        report["precondition"] = False
        report["reason"] = "needs a UniformSlow certificate with horizon >= 3"
        return report
    H, N, R = cert.horizon, cert.N, cert.R

    image = fmap.apply(Cartesian(fmap.number(z)))
    fwd = check_category(fmap, image, UNIFORM_SLOW, H - 1, max(N - 1, 0), params, R=R)
    report["forward"] = _shift_entry(fwd, cert, R)

    w = fmap.inverse_branch(fmap.number(z), k)
    back = check_category(fmap, w, UNIFORM_SLOW, H + 1, N + 1, params, R=R)
    entry = _shift_entry(back, cert, 1 / R)
    entry["preimage_re"] = float(complex(w).real)
    if complex(w).real < 0:
        entry["note"] = "preimage in the left half-plane; index 0 falls before the window"
    report["preimage"] = entry
    report["ok"] = fwd is not None and back is not None
    return report


def _shift_entry(new, old, factor) -> dict:
    if new is None:
        return {"ok": False}
    return {
        "ok": True,
        "N": new.N,
        "R": new.R,
        "C1_ratio": new.C1 / (old.C1 * factor),
        "C2_ratio": new.C2 / (old.C2 * factor),
    }
