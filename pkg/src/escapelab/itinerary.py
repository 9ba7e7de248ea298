"""Annular partitions and itineraries.

The partition for base ``R > 1`` has boundary radii ``R_n = R^(n+1)``, so
``A_0 = {|z| < R}`` and ``A_n = {R^n <= |z| < R^(n+1)}`` for ``n >= 1``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .expmap import Cartesian, ExpMap, SafePoint, TowerPoint


@dataclass(frozen=True)
class AnnularPartition:
    base: float

    def __post_init__(self):
        if not self.base > 1:
            raise ValueError("partition base must exceed 1")

    @property
    def log_base(self) -> float:
        return math.log(self.base)

    def radius(self, n: int) -> float:
        """Outer boundary ``R_n = R^(n+1)`` of annulus ``n``."""
        return self.base ** (n + 1)


def annular_index(partition: AnnularPartition, z) -> int:
    """Index ``n`` of the annulus containing ``z``.

    Works from the log-magnitude, so tower-form points are handled; raises
    ``OverflowError`` once the log-magnitude itself leaves double range.
    """
    if isinstance(z, TowerPoint):
        log_mag = z.log_abs()
        exact = None
    else:
        if not isinstance(z, Cartesian):
            z = Cartesian(z)
        log_mag = z.log_abs()
        exact = abs(z.value)
    if math.isinf(log_mag):
        if log_mag < 0:
            return 0
        raise OverflowError("annular index exceeds double range")
    log_r = partition.log_base
    if log_mag < log_r:
        if exact is None or exact < partition.base:
            return 0
    n = max(int(math.floor(log_mag / log_r)), 0)
    if exact is not None and log_mag < 700:
        # settle boundary cases |z| = R^n exactly against powers of the base
        a = float(exact)
        while n > 0 and a < _power(partition.base, n):
            n -= 1
        while a >= _power(partition.base, n + 1):
            n += 1
    return n


def _power(base: float, k: int) -> float:
    try:
        return base**k
    except OverflowError:
        return math.inf


# --------------------------------------------------------------------------
# itinerary predicates


@dataclass(frozen=True)
class EscapingTrend:
    """Tail minima ``min(t[j:])``; ``increasing`` is a finite-window trend only."""

    tail_minima: list[int]
    increasing: bool


@dataclass
class ItineraryReport:
    indices: list[int]
    nonzero_up_to: int
    admissible_failures: list[int]
    eventually_admissible: bool
    slow_growth_ratios: list = field(default_factory=list)
    log_growth: list = field(default_factory=list)
    escaping_trend: EscapingTrend | None = None

    def as_dict(self) -> dict:
        return asdict(self)


def _tail_minima(t):
    out = []
    m = math.inf
    for v in reversed(t):
        m = min(m, v)
        out.append(m)
    return out[::-1]


def check_predicates(t) -> ItineraryReport:
    """Finite-window diagnostics for the non-zero, escaping, admissible and
    slowly-growing conditions."""
    t = [int(v) for v in t]
    if any(v < 0 for v in t):
        raise ValueError("itinerary entries must be non-negative")
    nonzero = 0
    for v in t:
        if v == 0:
            break
        nonzero += 1

    # e^{t_n} > t_{n+1}, compared in log form to survive large entries
    failures = [
        n for n in range(len(t) - 1) if t[n + 1] > 0 and not t[n] > math.log(t[n + 1])
    ]
    half = len(t) // 2
    eventually = all(n < half for n in failures)

    ratios = []
    partial = 0  # sum of t_1 .. t_{n-1}
    for n, v in enumerate(t):
        ratios.append(v / partial if partial > 0 else None)
        if n >= 1:
            partial += v

    log_growth = [math.log(v) / n if (n >= 1 and v > 0) else None for n, v in enumerate(t)]

    minima = _tail_minima(t)
    if len(t) >= 2:
        increasing = minima[half] > minima[0] and t[-1] > minima[half]
    else:
        increasing = False
    trend = EscapingTrend([int(m) for m in minima], increasing)
    return ItineraryReport(
        indices=t,
        nonzero_up_to=nonzero,
        admissible_failures=failures,
        eventually_admissible=eventually,
        slow_growth_ratios=ratios,
        log_growth=log_growth,
        escaping_trend=trend,
    )


def compute_itinerary(fmap: ExpMap, partition: AnnularPartition, z0, n: int) -> ItineraryReport:
    orbit = fmap.orbit(z0, n)
    return check_predicates([annular_index(partition, p) for p in orbit])


def orbit_indices(partition: AnnularPartition, orbit: list[SafePoint]) -> list[int]:
    return [annular_index(partition, p) for p in orbit]


# --------------------------------------------------------------------------
# concrete sequences


def seq_linear(n: int) -> list[int]:
    """``1 1 1 2 3 ... (k-1) ...``: ``t_0 = t_1 = 1`` and ``t_k = k - 1`` after."""
    return [1 if k < 2 else k - 1 for k in range(n)]


def seq_square(n: int) -> list[int]:
    """``1 4 9 ...``: ``t_k = (k + 1)^2``."""
    return [(k + 1) ** 2 for k in range(n)]


SEQUENCES = {"linear": seq_linear, "square": seq_square}


# --------------------------------------------------------------------------
# base radius


def _bisect_increasing(g, lo: float, hi: float, tol: float = 1e-9) -> float:
    """Smallest x in [lo, hi] with g(x) > 0, for g increasing on the bracket."""
    samples = [lo + (hi - lo) * i / 64 for i in range(65)]
    vals = [g(x) for x in samples]
    if any(b < a for a, b in zip(vals, vals[1:])):
        raise ArithmeticError("constraint is not monotone on the bisection bracket")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            hi = mid
        else:
            lo = mid
    return hi


def compute_R0(fmap: ExpMap, s0: float) -> float:
    """Smallest base ``R`` from which the lower-bound construction's three
    conditions hold for every larger base.

    The conditions are ``R > max(e, |lam|, 2/s0)``, ``R(R-1) > 16 pi + 2`` and
    ``R > 3 log(R^2/|lam|) + 1``.  Strict inequalities make the value an
    infimum; it is returned as such.
    """
    if not s0 > 0:
        raise ValueError("s0 must be positive")
    floor_ = max(math.e, fmap.abs_lambda, 2.0 / s0)

    c = 16 * math.pi + 2
    quad = _bisect_increasing(lambda r: r * (r - 1) - c, 1.0, 1.0 + math.sqrt(c) + 1)

    # R - 6 log R - 1 + 3 log|lam| has its minimum at R = 6 and increases after
    def third(r):
        return r - 3 * (2 * math.log(r) - fmap.log_abs_lambda) - 1

    if third(6.0) > 0:
        log_cond = 0.0
    else:
        hi = 12.0
        while third(hi) <= 0:
            hi *= 2
        log_cond = _bisect_increasing(third, 6.0, hi)
    return max(floor_, quad, log_cond)


# --------------------------------------------------------------------------
# itinerary files: one non-negative integer per line, '#' comments


def read_itinerary(path) -> list[int]:
    out = []
    for lineno, line in enumerate(Path(path).read_text(encoding="ascii").splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        if not s.isdigit():
            raise ValueError(f"{path}:{lineno}: expected a non-negative integer, got {s!r}")
        out.append(int(s))
    return out


def write_itinerary(path, t, comment: str | None = None) -> None:
    lines = []
    if comment:
        lines.extend("# " + c for c in comment.splitlines())
    lines.extend(str(int(v)) for v in t)
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")
