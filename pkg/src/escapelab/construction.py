"""Nested preimage constructions for the exponential family.

Builds points with a prescribed annular itinerary by composing inverse
branches, evaluates the finite-depth McMullen dimension bound from the
construction's density and diameter controls, audits distortion along branch
chains, and evaluates the driving quantities of the cover argument behind the
matching upper bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .expmap import Cartesian, ExpMap, log_plus, log_plus_p
from .geometry import (
    ClosedAnnulus,
    GeometryError,
    HalfAnnulus,
    HypothesisViolated,
    is_inside,
    preimage_rectangle,
)
from .itinerary import AnnularPartition, annular_index, compute_R0


class ConstructionError(RuntimeError):
    def __init__(self, step: int, message: str):
        self.step = step
        super().__init__(f"step {step}: {message}")


class BranchEscapesRegion(ConstructionError):
    pass


class RowNotContained(ConstructionError):
    pass


class Degenerate(GeometryError):
    pass


class DomainError(ValueError):
    pass


class FamilyViolation(ValueError):
    pass


@dataclass(frozen=True)
class ConstructionConfig:
    R: float
    t: tuple
    tau0: float = 2.0
    s0: float = 0.1
    precision_bits: int = 256

    def __post_init__(self):
        object.__setattr__(self, "t", tuple(int(v) for v in self.t))
        if not self.tau0 > 1:
            raise ValueError("tau0 must exceed 1")
        if not 0 < self.s0 < 0.125:
            raise ValueError("s0 must lie in (0, 1/8)")
        if not self.R > 1:
            raise ValueError("R must exceed 1")

    def check_base(self, fmap: ExpMap) -> float:
        """Raise unless ``R`` is at least the minimal base for ``lam``."""
        r0 = compute_R0(fmap, self.s0)
        if self.R < r0:
            raise ValueError(f"R = {self.R} is below R0(lam, s0) = {r0:.9g}")
        return r0

    def as_dict(self) -> dict:
        return {
            "R": self.R,
            "t": list(self.t),
            "tau0": self.tau0,
            "s0": self.s0,
            "precision_bits": self.precision_bits,
        }


def proof_half_annulus(R: float, n: int) -> HalfAnnulus:
    """``H(R^n + 1, R^(n+1) - 1)``."""
    if n < 1:
        raise Degenerate(f"index {n} must be positive")
    r1 = R**n + 1
    r2 = R ** (n + 1) - 1
    if not r1 < r2:
        raise Degenerate(f"H({r1:.6g}, {r2:.6g}) is empty for R={R}, n={n}")
    return HalfAnnulus(r1, r2)


# --------------------------------------------------------------------------
# contained rows


def contained_rows(fmap: ExpMap, source: HalfAnnulus, target: HalfAnnulus) -> list[tuple[int, int]]:
    """Row intervals whose preimage rectangles of ``target`` lie in ``source``.

    Returned as at most two inclusive ``(lo, hi)`` pairs (negative side first),
    computed in closed form so huge row counts are never enumerated.
    """
    probe = preimage_rectangle(fmap, target, 0)
    x0, x1 = probe.re_min, probe.re_max
    if x0 < 0 or x1 > source.r2:
        return []
    y_max = math.sqrt(source.r2**2 - x1**2)
    y_min = math.sqrt(source.r1**2 - x0**2) if x0 < source.r1 else 0.0
    a = fmap.arg_lambda
    two_pi = 2 * math.pi

    def lower(y):  # smallest k with (2k - 1/2) pi - a >= y
        return math.ceil((y + a) / two_pi + 0.25)

    def upper(y):  # largest k with (2k + 1/2) pi - a <= y
        return math.floor((y + a) / two_pi - 0.25)

    if y_min == 0.0:
        spans = [(lower(-y_max), upper(y_max))]
    else:
        spans = [(lower(-y_max), upper(-y_min)), (lower(y_min), upper(y_max))]

    def inside(k):
        return is_inside(source, preimage_rectangle(fmap, target, k))

    out = []
    for lo, hi in spans:
        # tighten against the exact containment test near the ends
        lo = _first_true(inside, lo, hi, +1)
        if lo is None:
            continue
        hi = _first_true(inside, hi, lo, -1)
        out.append((lo, hi))
    return out


def _first_true(pred, start: int, stop: int, step: int):
    """First ``k`` from ``start`` toward ``stop`` with ``pred(k)``.

    ``pred`` is assumed false-then-true along the walk.  Gallops, then bisects,
    so spans of astronomically many rows cost only logarithmic work.
    """
    def past(k):
        return k > stop if step > 0 else k < stop

    if pred(start):
        return start
    bad, jump = start, 1
    while True:
        k = bad + step * jump
        if past(k):
            k = stop
            if not pred(k):
                return None
            good = k
            break
        if pred(k):
            good = k
            break
        bad, jump = k, jump * 2
    while abs(good - bad) > 1:
        mid = (good + bad) // 2
        if pred(mid):
            good = mid
        else:
            bad = mid
    return good


def pick_row(spans: list[tuple[int, int]], policy: str = "middle") -> int:
    """One contained row; prefers the positive side."""
    if not spans:
        raise ValueError("no contained rows")
    lo, hi = spans[-1]
    if policy == "middle":
        return (lo + hi) // 2
    if policy == "outer":
        return hi
    if policy == "inner":
        return lo
    raise ValueError(f"unknown row policy {policy!r}")


def regions_for(R: float, t) -> list[HalfAnnulus]:
    return [proof_half_annulus(R, n) for n in t]


def default_rows(fmap: ExpMap, config: ConstructionConfig, depth: int, policy: str = "middle") -> list[int]:
    regions = regions_for(config.R, config.t[: depth + 1])
    rows = []
    for j in range(depth):
        spans = contained_rows(fmap, regions[j], regions[j + 1])
        if not spans:
            raise RowNotContained(j, f"no preimage of H_{config.t[j + 1]} lies in H_{config.t[j]}")
        rows.append(pick_row(spans, policy))
    return rows


def sample_rows(fmap: ExpMap, config: ConstructionConfig, depth: int, rng) -> list[int]:
    """Uniformly random contained rows, one per step, from a numpy Generator."""
    regions = regions_for(config.R, config.t[: depth + 1])
    rows = []
    for j in range(depth):
        spans = contained_rows(fmap, regions[j], regions[j + 1])
        if not spans:
            raise RowNotContained(j, f"no preimage of H_{config.t[j + 1]} lies in H_{config.t[j]}")
        sizes = [hi - lo + 1 for lo, hi in spans]
        # span sizes can exceed int64, so draw a float fraction and clamp
        pick = int(rng.random() * sum(sizes))
        for (lo, hi), size in zip(spans, sizes):
            if pick < size:
                rows.append(min(lo + pick, hi))
                break
            pick -= size
        else:
            rows.append(spans[-1][1])
    return rows


# --------------------------------------------------------------------------
# branch chains


@dataclass
class BranchChain:
    lam: complex
    R: float
    t_prefix: list[int]
    rows: list[int]
    seed: complex
    points: list  # z_0 .. z_N at working precision
    residence: list[bool]
    precision_bits: int
    verified_steps: int = 0
    budget_steps: int = 0
    regions: list = field(default_factory=list, repr=False)

    @property
    def depth(self) -> int:
        return len(self.rows)

    @property
    def point(self):
        return self.points[0]

    def as_dict(self) -> dict:
        z = self.point
        return {
            "lambda": [self.lam.real, self.lam.imag],
            "R": self.R,
            "t_prefix": list(self.t_prefix),
            "rows": list(self.rows),
            "seed": [self.seed.real, self.seed.imag],
            "point_re": _num_str(z.real),
            "point_im": _num_str(z.imag),
            "precision_bits": self.precision_bits,
            "verified_steps": self.verified_steps,
            "budget_steps": self.budget_steps,
        }


def _num_str(x) -> str:
    if isinstance(x, float):
        return repr(x)
    import mpmath

    return mpmath.nstr(x, int(x.context.dps) + 2, strip_zeros=False)


def pull_back(fmap: ExpMap, regions, rows, seed):
    """Backward chain ``z_N = seed, z_j = branch(z_{j+1}, rows[j])``.

    ``regions[j]`` is the half-annulus ``z_j`` must lie in.  Raises
    :class:`RowNotContained` or :class:`BranchEscapesRegion`.
    """
    depth = len(rows)
    if len(regions) != depth + 1:
        raise ValueError("need one region per chain point")
    for j, k in enumerate(rows):
        rect = preimage_rectangle(fmap, regions[j + 1], k)
        if not is_inside(regions[j], rect):
            raise RowNotContained(j, f"row {k} rectangle is not inside H({regions[j].r1:.6g}, {regions[j].r2:.6g})")
    z = fmap.number(seed)
    points = [z]
    flags = [_resides(regions[depth], z)]
    if not flags[0]:
        raise BranchEscapesRegion(depth, "seed is not in the final region")
    for j in range(depth - 1, -1, -1):
        z = fmap.inverse_branch(z, rows[j])
        ok = _resides(regions[j], z)
        if not ok:
            raise BranchEscapesRegion(j, f"z_{j} = {complex(z)} left its region")
        points.append(z)
        flags.append(ok)
    return points[::-1], flags[::-1]


def _resides(region: HalfAnnulus, z) -> bool:
    a = abs(z)
    return z.real >= 0 and region.r1 <= a <= region.r2


def expansion_budget(points, precision_bits: int) -> int:
    """Forward steps before rounding in ``z_0`` can grow past unit size.

    The error after ``m`` forward steps is about ``2^-P * prod_{j<=m} |z_j|``;
    annuli sit at least 1 away from the region boundaries, so the budget is
    the largest ``m`` keeping that product below ``2^P``.
    """
    cap = precision_bits * math.log(2)
    total = 0.0
    m = -1
    for z in points:
        total += math.log(float(abs(z)))
        if total >= cap:
            break
        m += 1
    return max(min(m, len(points) - 1), 0)


def forward_verified_steps(fmap: ExpMap, partition: AnnularPartition, z0, t) -> int:
    """Largest ``m`` such that ``f^j(z0)`` lies in annulus ``t[j]`` for all ``j <= m``."""
    point = Cartesian(fmap.number(z0))
    m = -1
    for j, expected in enumerate(t):
        if j > 0:
            point = fmap.apply(point)
        try:
            idx = annular_index(partition, point)
        except OverflowError:
            break
        if idx != expected:
            break
        m = j
    return max(m, 0)


def chain_from_regions(fmap: ExpMap, regions, rows, seed, R: float = math.nan) -> BranchChain:
    """Branch chain through arbitrary half-annuli, without itinerary bookkeeping."""
    points, flags = pull_back(fmap, regions, [int(k) for k in rows], seed)
    return BranchChain(
        lam=fmap.lam,
        R=R,
        t_prefix=[],
        rows=[int(k) for k in rows],
        seed=complex(seed),
        points=points,
        residence=flags,
        precision_bits=fmap.precision_bits,
        budget_steps=expansion_budget(points, fmap.precision_bits),
        regions=list(regions),
    )


def construct_point(fmap: ExpMap, config: ConstructionConfig, rows, seed=None) -> BranchChain:
    """Point whose orbit follows ``config.t`` through the given branch rows.

    ``seed`` defaults to the midpoint of the last half-annulus on the positive
    real axis.
    """
    if fmap.precision_bits != config.precision_bits:
        fmap = ExpMap(fmap.lam, config.precision_bits)
    rows = [int(k) for k in rows]
    depth = len(rows)
    if len(config.t) < depth + 1:
        raise ValueError("itinerary is shorter than depth + 1")
    t_prefix = list(config.t[: depth + 1])
    regions = regions_for(config.R, t_prefix)
    if seed is None:
        seed = complex(0.5 * (regions[-1].r1 + regions[-1].r2), 0.0)
    points, flags = pull_back(fmap, regions, rows, seed)
    partition = AnnularPartition(config.R)
    return BranchChain(
        lam=fmap.lam,
        R=config.R,
        t_prefix=t_prefix,
        rows=rows,
        seed=complex(seed),
        points=points,
        residence=flags,
        precision_bits=config.precision_bits,
        verified_steps=forward_verified_steps(fmap, partition, points[0], t_prefix),
        budget_steps=expansion_budget(points, config.precision_bits),
        regions=regions,
    )


# --------------------------------------------------------------------------
# distortion along chains


@dataclass(frozen=True)
class DistortionAudit:
    depth: int
    value: float
    bound: float
    checked_steps: int
    ok: bool


def distortion_chain_audit(
    fmap: ExpMap,
    chain: BranchChain,
    tau0: float = 2.0,
    s0: float = 0.1,
    samples: int = 16,
) -> DistortionAudit:
    """Sampled distortion of ``f^N`` on the chain's depth-0 set.

    Boundary points of the final region are pulled back along the chain rows.
    ``|(f^N)'(zeta_0)| = prod_{j=1..N} |zeta_j|`` is read off the backward
    chain, so no forward error enters.  The small-set conditions (real part
    above ``log(2/|lam|)``, diameter below ``s0``) are checked on the sampled
    images for steps ``0 .. N-2``; the last step is covered by the one-step
    factor in the bound ``tau0 * R``.
    """
    if fmap.precision_bits != chain.precision_bits:
        fmap = ExpMap(chain.lam, chain.precision_bits)
    depth = chain.depth
    bound = tau0 * chain.R
    if depth == 0:
        return DistortionAudit(0, 1.0, bound, 0, True)
    boundary = chain.regions[-1].boundary_samples(samples)
    # per-sample backward chains, stored by step
    layers = [[fmap.number(w) for w in boundary]]
    for j in range(depth - 1, -1, -1):
        layers.append([fmap.inverse_branch(w, chain.rows[j]) for w in layers[-1]])
    layers = layers[::-1]  # layers[j] holds samples of f^j(V)

    re_floor = math.log(2.0) - fmap.log_abs_lambda
    for m in range(depth - 1):
        pts = [complex(z) for z in layers[m]]
        if min(z.real for z in pts) <= re_floor:
            raise HypothesisViolated([f"step {m}: real part not above log(2/|lam|)"])
        diam = max(abs(a - b) for a in pts for b in pts)
        if not diam < s0:
            raise HypothesisViolated([f"step {m}: diameter {diam:.3g} not below s0={s0}"])

    logs = np.zeros(len(boundary))
    for j in range(1, depth + 1):
        logs += np.array([math.log(float(abs(z))) for z in layers[j]])
    value = float(math.exp(logs.max() - logs.min()))
    return DistortionAudit(depth, value, bound, max(depth - 1, 0), value <= bound)


# --------------------------------------------------------------------------
# nested levels


@dataclass(frozen=True)
class NestedSet:
    rows: tuple
    bbox: tuple  # (re_min, re_max, im_min, im_max) at working precision


@dataclass
class NestedLevel:
    depth: int
    sets: list
    log_delta: float
    log_diam: float | None

    @property
    def delta(self) -> float:
        return math.exp(self.log_delta)

    @property
    def diam_bound(self) -> float | None:
        return None if self.log_diam is None else math.exp(self.log_diam)


def _pullback_box(fmap: ExpMap, box, k: int):
    ctx = fmap.ctx
    x0, x1, y0, y1 = box
    xn = min(max(ctx.mpf(0), x0), x1)
    yn = min(max(ctx.mpf(0), y0), y1)
    near = ctx.hypot(xn, yn)
    far = ctx.hypot(max(abs(x0), abs(x1)), max(abs(y0), abs(y1)))
    args = [ctx.atan2(y, x) for x in (x0, x1) for y in (y0, y1)]
    la = ctx.log(abs(ctx.mpc(fmap.lam)))
    aa = ctx.arg(ctx.mpc(fmap.lam))
    shift = 2 * ctx.pi * k - aa
    return (ctx.log(near) - la, ctx.log(far) - la, min(args) + shift, max(args) + shift)


def _intersect(a, b):
    return (max(a[0], b[0]), min(a[1], b[1]), max(a[2], b[2]), min(a[3], b[3]))


def _rect_box(fmap: ExpMap, target: HalfAnnulus, k: int):
    ctx = fmap.ctx
    la = ctx.log(abs(ctx.mpc(fmap.lam)))
    aa = ctx.arg(ctx.mpc(fmap.lam))
    return (
        ctx.log(target.r1) - la,
        ctx.log(target.r2) - la,
        (2 * k - ctx.mpf(0.5)) * ctx.pi - aa,
        (2 * k + ctx.mpf(0.5)) * ctx.pi - aa,
    )


def set_bbox(fmap: ExpMap, regions, rows):
    """Bounding box of the depth-``len(rows)`` set reached through ``rows``."""
    ctx = fmap.ctx
    n = len(rows)
    if n == 0:
        r2 = ctx.mpf(regions[0].r2)
        return (ctx.mpf(0), r2, -r2, r2)
    box = _rect_box(fmap, regions[n], rows[n - 1])
    for j in range(n - 2, -1, -1):
        box = _intersect(_pullback_box(fmap, box, rows[j]), _rect_box(fmap, regions[j + 1], rows[j]))
    return box


def _spread(span: tuple[int, int], count: int) -> list[int]:
    lo, hi = span
    if hi - lo + 1 <= count:
        return list(range(lo, hi + 1))
    if count == 1:
        return [(lo + hi) // 2]
    return sorted({lo + (hi - lo) * i // (count - 1) for i in range(count)})


def build_levels(fmap: ExpMap, config: ConstructionConfig, depth: int, max_children: int = 3) -> list[NestedLevel]:
    """Symbolic nested collections ``E_0 .. E_depth``.

    Each set is a row sequence with a lazily propagated bounding box; at most
    ``max_children`` children per set are expanded, spread across the
    positive contained rows.
    """
    if fmap.precision_bits != config.precision_bits:
        fmap = ExpMap(fmap.lam, config.precision_bits)
    regions = regions_for(config.R, config.t[: depth + 1])
    log_d = log_proof_diameters(config.R, config.t, depth)
    levels = [
        NestedLevel(0, [NestedSet((), set_bbox(fmap, regions, ()))],
                    log_proof_delta(config.R, config.tau0, config.t[0]), None)
    ]
    for n in range(depth):
        spans = contained_rows(fmap, regions[n], regions[n + 1])
        if not spans:
            raise RowNotContained(n, "no contained preimage rectangles")
        rows = _spread(spans[-1], max_children)
        children = []
        for parent in levels[-1].sets:
            for k in rows:
                seq = parent.rows + (k,)
                children.append(NestedSet(seq, set_bbox(fmap, regions, seq)))
        levels.append(
            NestedLevel(
                n + 1,
                children,
                log_proof_delta(config.R, config.tau0, config.t[n + 1]) if n + 1 < len(config.t) else math.nan,
                float(log_d[n + 1]) if n + 1 >= 2 else None,
            )
        )
    return levels


def check_nesting(fmap: ExpMap, config: ConstructionConfig, levels) -> dict:
    """Structural check of the two nesting conditions.

    (i) every depth-(n+1) set extends exactly one depth-n set, lies in its
    bounding box, and siblings occupy disjoint rectangles; (ii) every set
    below the last level has a child.
    """
    regions = regions_for(config.R, config.t[: len(levels)])
    problems = []
    for n in range(len(levels) - 1):
        parents = {s.rows: s for s in levels[n].sets}
        kids_of = {}
        for child in levels[n + 1].sets:
            parent = parents.get(child.rows[:-1])
            if parent is None:
                problems.append(f"depth {n + 1}: {child.rows} has no parent")
                continue
            kids_of.setdefault(parent.rows, []).append(child)
            pb, cb = parent.bbox, child.bbox
            slack = 1e-12 * max(1.0, abs(float(pb[3])))
            if not (cb[0] >= pb[0] - slack and cb[1] <= pb[1] + slack
                    and cb[2] >= pb[2] - slack and cb[3] <= pb[3] + slack):
                problems.append(f"depth {n + 1}: {child.rows} leaves its parent box")
        for prow, kids in kids_of.items():
            rects = sorted(
                (preimage_rectangle(fmap, regions[n + 1], c.rows[-1]) for c in kids),
                key=lambda r: r.im_min,
            )
            for a, b in zip(rects, rects[1:]):
                if not a.im_max < b.im_min:
                    problems.append(f"depth {n + 1}: siblings under {prow} overlap")
            for r in rects:
                if not is_inside(regions[n], r):
                    problems.append(f"depth {n + 1}: row {r.row} not inside H_{config.t[n]}")
        for prow in parents:
            if prow not in kids_of:
                problems.append(f"depth {n}: {prow} has no child")
    return {"ok": not problems, "problems": problems}


# --------------------------------------------------------------------------
# McMullen bound


def log_proof_diameter(R: float, t, n: int) -> float:
    """``log d_n`` with ``d_n = 2 R^(1 - sum_{m=1}^{n-1} t_m)``."""
    if n < 2:
        raise ValueError("diameter bound needs n >= 2")
    return math.log(2) + (1 - sum(t[1:n])) * math.log(R)


def proof_diameter(R: float, t, n: int) -> float:
    return math.exp(log_proof_diameter(R, t, n))


def log_proof_delta(R: float, tau0: float, t_n: int) -> float:
    """``log Delta_n`` with ``Delta_n = log R / (4 tau0^2 pi R^(t_n + 3))``."""
    if not R > 1 or not tau0 > 1:
        raise ValueError("need R > 1 and tau0 > 1")
    return math.log(math.log(R)) - math.log(4 * tau0**2 * math.pi) - (t_n + 3) * math.log(R)


def proof_delta(R: float, tau0: float, t_n: int) -> float:
    return math.exp(log_proof_delta(R, tau0, t_n))


def log_proof_diameters(R: float, t, n: int) -> np.ndarray:
    """Array of ``log d_m`` for ``m = 0..n`` (NaN for ``m < 2``)."""
    t = np.asarray(t[: n + 1], dtype=np.float64)
    out = np.full(n + 1, np.nan)
    if n >= 2:
        partial = np.cumsum(t[1:n])  # partial[m-2] = sum_{k=1}^{m-1} t_k
        out[2:] = math.log(2) + (1 - partial) * math.log(R)
    return out


def log_proof_deltas(R: float, tau0: float, t, n: int) -> np.ndarray:
    t = np.asarray(t[: n + 1], dtype=np.float64)
    return math.log(math.log(R)) - math.log(4 * tau0**2 * math.pi) - (t + 3) * math.log(R)


@dataclass
class McMullenResult:
    value: float
    n: int
    burn_in: int
    running: np.ndarray  # running[m] for m > burn_in, NaN before

    def eventually_monotone(self, tail: float = 0.5) -> bool:
        vals = self.running[~np.isnan(self.running)]
        vals = vals[int(len(vals) * (1 - tail)):]
        d = np.diff(vals)
        return bool(np.all(d >= 0) or np.all(d <= 0))


def mcmullen_bound(log_deltas, log_diams, n: int) -> McMullenResult:
    """``2 - sum_{m<=n} |log Delta_m| / |log d_n|`` with its running sequence.

    Inputs are logarithms so deep levels never underflow.  The burn-in is the
    last index where ``d_m`` is undefined or at least 1.
    """
    log_deltas = np.asarray(log_deltas, dtype=np.float64)[: n + 1]
    log_diams = np.asarray(log_diams, dtype=np.float64)[: n + 1]
    if len(log_deltas) < n + 1 or len(log_diams) < n + 1:
        raise ValueError("need n + 1 deltas and diameters")
    bad = np.isnan(log_diams) | (log_diams >= 0)
    burn_in = int(np.nonzero(bad)[0].max()) if bad.any() else -1
    if burn_in >= n:
        raise DomainError(f"diameters never drop below 1 up to n={n}")
    if np.any(log_deltas[burn_in + 1:] >= 0):
        m = burn_in + 1 + int(np.argmax(log_deltas[burn_in + 1:] >= 0))
        raise DomainError(f"Delta_{m} is not below 1")
    num = np.cumsum(np.abs(log_deltas))
    running = np.full(n + 1, np.nan)
    running[burn_in + 1:] = 2 - num[burn_in + 1:] / np.abs(log_diams[burn_in + 1:])
    return McMullenResult(float(running[n]), n, burn_in, running)


def mcmullen_from_itinerary(R: float, t, tau0: float, n: int) -> McMullenResult:
    if len(t) < n + 1:
        raise ValueError("itinerary shorter than n + 1")
    return mcmullen_bound(log_proof_deltas(R, tau0, t, n), log_proof_diameters(R, t, n), n)


def mcmullen_audit(R: float, t, tau0: float, n: int, checkpoints: int = 24) -> dict:
    """JSON-ready audit of the finite-depth bound at log-spaced depths."""
    res = mcmullen_from_itinerary(R, t, tau0, n)
    ld = log_proof_deltas(R, tau0, t, n)
    lg = log_proof_diameters(R, t, n)
    start = res.burn_in + 1
    marks = np.unique(np.geomspace(max(start, 1), n, checkpoints).astype(int))
    per_depth = [
        {
            "n": int(m),
            "log_delta": float(ld[m]),
            "log_diam": float(lg[m]),
            "delta": float(np.exp(ld[m])),
            "diam": float(np.exp(lg[m])),
            "bound_value": float(res.running[m]),
        }
        for m in marks
    ]
    return {
        "config": {"R": R, "tau0": tau0, "n": n, "t_head": [int(v) for v in t[:8]]},
        "per_depth": per_depth,
        "verdicts": {
            "value": res.value,
            "burn_in": res.burn_in,
            "eventually_monotone": res.eventually_monotone(),
        },
    }


# --------------------------------------------------------------------------
# upper-bound cover audit


@dataclass(frozen=True)
class CoverRegion:
    annulus: ClosedAnnulus
    min_re: float

    def contains(self, z) -> bool:
        return self.annulus.contains(z) and z.real >= self.min_re


def upper_cover_sets(g_n: float, m: int, c1: float) -> CoverRegion:
    """``A(e^(m-1) g_n, e^m g_n)`` cut to ``Re z >= c1``."""
    if not g_n > 0 or m < 1:
        raise ValueError("need g_n > 0 and m >= 1")
    return CoverRegion(ClosedAnnulus(math.exp(m - 1) * g_n, math.exp(m) * g_n), c1)


class GHFamily:
    """Lower/upper radius sequences ``g_{p,n} <= h_{p,n}`` given by their logs.

    ``logs(n, p)`` returns ``(log g, log h, log+ log h)``; the last entry is
    supplied separately because ``log h`` can overflow doubles.
    """

    name = "family"

    def logs(self, n: int, p: int):
        raise NotImplementedError


class PolyLogFamily(GHFamily):
    """``g = n^(log+^p n)``, ``h = e^(p n)``."""

    name = "ghdef"

    def logs(self, n, p):
        lg = log_plus_p(n, p) * math.log(n) if n >= 1 else 0.0
        lh = p * n
        return lg, lh, log_plus(lh)


class DoubleExpFamily(GHFamily):
    """``g = e^(n log+^p n)``, ``h = exp(e^(p n))``."""

    name = "ghdashdef"

    def logs(self, n, p):
        lg = n * log_plus_p(n, p)
        lh = math.exp(p * n) if p * n < 709 else math.inf
        return lg, lh, float(p * n)


class ItineraryFamily(GHFamily):
    """``g = R^(t_n)``, ``h = R^(t_n + 1)`` for a fixed itinerary."""

    name = "itinerary"

    def __init__(self, R: float, t):
        self.R = R
        self.t = list(t)

    def logs(self, n, p):
        lr = math.log(self.R)
        lh = (self.t[n] + 1) * lr
        return self.t[n] * lr, lh, log_plus(lh)


class ConstantFamily(GHFamily):
    name = "constant"

    def __init__(self, g: float, h: float | None = None):
        self.lg = math.log(g)
        self.lh = math.log(h if h is not None else g)

    def logs(self, n, p):
        return self.lg, self.lh, log_plus(self.lh)


FAMILIES = {"ghdef": PolyLogFamily, "ghdashdef": DoubleExpFamily}


def upper_bound_audit(family: GHFamily, p: int, epsilon: float, n_range, rows_out: int = 40) -> dict:
    """Driving quantities of the cover argument over ``n_range = (lo, hi)``.

    For each ``n``: ``log q_n = -eps log g_n + log log h_{n+1}``, the growth
    ratio ``log g_n / log+ log h_{n+1}`` and the cover index count
    ``[log(h_n/g_n)] + 1``.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    lo, hi = n_range
    ns = list(range(lo, hi + 1))
    log_q, ratio, alpha, log_g = [], [], [], []
    for n in ns:
        lg, lh, _ = family.logs(n, p)
        if lh < lg:
            raise FamilyViolation(f"h_{n} < g_{n}")
        _, lh1, llh1 = family.logs(n + 1, p)
        log_g.append(lg)
        log_q.append(-epsilon * lg + (math.log(lh1) if lh1 > 0 and math.isfinite(lh1) else llh1))
        ratio.append(lg / llh1 if llh1 > 0 else math.inf)
        span = lh - lg
        alpha.append(int(math.floor(span)) + 1 if math.isfinite(span) else None)

    lq = np.array(log_q)
    dq = np.diff(lq)
    crossover = None
    for i in range(len(dq)):
        if np.all(dq[i:] < 0):
            crossover = ns[i]
            break
    half = len(ns) // 2
    decreasing_tail = bool(len(dq) > 0 and np.all(dq[half:] < 0))
    rt = np.array(ratio)
    ratio_growing = bool(len(rt) > 1 and rt[-1] > rt[half])
    g_growing = bool(len(log_g) > 1 and log_g[-1] > log_g[0])
    passed = decreasing_tail and lq[-1] < 0 and ratio_growing and g_growing

    step = max(len(ns) // rows_out, 1)
    pick = sorted(set(range(0, len(ns), step)) | {len(ns) - 1})
    table = [
        {
            "n": ns[i],
            "log_q": float(lq[i]),
            "q": float(math.exp(lq[i])) if lq[i] < 700 else math.inf,
            "ratio": float(ratio[i]),
            "alpha": alpha[i],
        }
        for i in pick
    ]
    return {
        "family": family.name,
        "p": p,
        "epsilon": epsilon,
        "n_range": [lo, hi],
        "rows": table,
        "log_q": lq,
        "ratio": rt,
        "crossover": crossover,
        "decreasing_tail": decreasing_tail,
        "ratio_growing": ratio_growing,
        "pass": bool(passed),
    }
