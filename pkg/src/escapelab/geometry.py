"""Half-annuli, their preimage rectangles under ``lam * exp(z)``, and densities."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .expmap import ExpMap

DEFAULT_SEED = 20240607


class GeometryError(ValueError):
    pass


class DegenerateTarget(GeometryError):
    """Target half-annulus has ``r1 >= r2`` or ``r1 <= 0``."""


class HypothesisViolated(GeometryError):
    def __init__(self, failures):
        self.failures = list(failures)
        super().__init__("hypotheses violated: " + "; ".join(self.failures))


@dataclass(frozen=True)
class HalfAnnulus:
    """``{r1 <= |z| <= r2, Re z >= 0}``."""

    r1: float
    r2: float

    @property
    def area(self) -> float:
        return math.pi * (self.r2**2 - self.r1**2) / 2

    def contains(self, z) -> bool:
        a = abs(z)
        return z.real >= 0 and self.r1 <= a <= self.r2

    def boundary_samples(self, count: int = 16) -> list[complex]:
        """Points on the boundary: both arcs (ends included) and the two segments."""
        arcs = max(count // 2 - 1, 2)
        out = []
        for r in (self.r1, self.r2):
            for i in range(arcs):
                theta = -math.pi / 2 + math.pi * i / (arcs - 1)
                out.append(complex(r * math.cos(theta), r * math.sin(theta)))
        mid = 0.5 * (self.r1 + self.r2)
        out.extend([complex(0, mid), complex(0, -mid)])
        return out[:count] if len(out) > count else out


@dataclass(frozen=True)
class ClosedAnnulus:
    """``{r1 <= |z| <= r2}``."""

    r1: float
    r2: float

    def contains(self, z) -> bool:
        return self.r1 <= abs(z) <= self.r2


@dataclass(frozen=True)
class PreimageRectangle:
    re_min: float
    re_max: float
    im_min: float
    im_max: float
    row: int

    @property
    def width(self) -> float:
        return self.re_max - self.re_min

    @property
    def height(self) -> float:
        return self.im_max - self.im_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def corners(self) -> list[complex]:
        return [
            complex(self.re_min, self.im_min),
            complex(self.re_max, self.im_min),
            complex(self.re_max, self.im_max),
            complex(self.re_min, self.im_max),
        ]

    def nearest_abs(self) -> float:
        """Smallest ``|z|`` over the rectangle (corner or edge foot)."""
        x = min(max(0.0, self.re_min), self.re_max)
        y = min(max(0.0, self.im_min), self.im_max)
        return math.hypot(x, y)

    def farthest_abs(self) -> float:
        return math.hypot(
            max(abs(self.re_min), abs(self.re_max)), max(abs(self.im_min), abs(self.im_max))
        )

    def contains(self, z) -> bool:
        return self.re_min <= z.real <= self.re_max and self.im_min <= z.imag <= self.im_max


def default_rows(fmap: ExpMap, source: HalfAnnulus) -> range:
    """Rows whose rectangles can meet the disc of radius ``source.r2``."""
    lo = math.floor((-source.r2 + fmap.arg_lambda) / (2 * math.pi) - 0.25) - 1
    hi = math.ceil((source.r2 + fmap.arg_lambda) / (2 * math.pi) + 0.25) + 1
    return range(lo, hi + 1)


def preimage_rectangle(fmap: ExpMap, target: HalfAnnulus, row: int) -> PreimageRectangle:
    re_min = math.log(target.r1) - fmap.log_abs_lambda
    re_max = math.log(target.r2) - fmap.log_abs_lambda
    im_min = (2 * row - 0.5) * math.pi - fmap.arg_lambda
    im_max = (2 * row + 0.5) * math.pi - fmap.arg_lambda
    return PreimageRectangle(re_min, re_max, im_min, im_max, row)


def preimage_components(fmap: ExpMap, target: HalfAnnulus, rows) -> list[PreimageRectangle]:
    """One preimage rectangle of ``target`` per row.

    ``rows`` is an iterable of row indices or a ``(lo, hi)`` pair, inclusive.
    """
    if not 0 < target.r1 < target.r2:
        raise DegenerateTarget(f"target H({target.r1}, {target.r2}) is degenerate")
    if isinstance(rows, tuple) and len(rows) == 2:
        rows = range(rows[0], rows[1] + 1)
    return [preimage_rectangle(fmap, target, n) for n in rows]


def is_inside(source: HalfAnnulus, rect: PreimageRectangle) -> bool:
    return (
        rect.re_min >= 0
        and rect.farthest_abs() <= source.r2
        and rect.nearest_abs() >= source.r1
    )


def components_inside(source: HalfAnnulus, rects) -> list[PreimageRectangle]:
    return [r for r in rects if is_inside(source, r)]


def contained_components(fmap: ExpMap, source: HalfAnnulus, target: HalfAnnulus):
    return components_inside(source, preimage_components(fmap, target, default_rows(fmap, source)))


# --------------------------------------------------------------------------
# densities


@dataclass(frozen=True)
class DensityResult:
    exact: float
    mc: float | None = None
    mc_stderr: float | None = None
    mc_samples: int = 0
    seed: int | None = None


def _sample_half_annulus(rng, source: HalfAnnulus, n: int) -> np.ndarray:
    out = []
    have = 0
    while have < n:
        m = int((n - have) * 1.4) + 64
        x = rng.uniform(0.0, source.r2, m)
        y = rng.uniform(-source.r2, source.r2, m)
        r = np.hypot(x, y)
        keep = (r >= source.r1) & (r <= source.r2)
        pts = x[keep] + 1j * y[keep]
        out.append(pts)
        have += pts.size
    return np.concatenate(out)[:n]


def _count_hits(points: np.ndarray, rects) -> int:
    if not rects:
        return 0
    rects = sorted(rects, key=lambda r: r.im_min)
    lo = np.array([r.im_min for r in rects])
    hi = np.array([r.im_max for r in rects])
    if np.all(lo[1:] > hi[:-1]):
        re0 = np.array([r.re_min for r in rects])
        re1 = np.array([r.re_max for r in rects])
        j = np.searchsorted(lo, points.imag, side="right") - 1
        valid = j >= 0
        jj = np.where(valid, j, 0)
        hit = (
            valid
            & (points.imag <= hi[jj])
            & (points.real >= re0[jj])
            & (points.real <= re1[jj])
        )
        return int(np.count_nonzero(hit))
    hit = np.zeros(points.shape, dtype=bool)
    for r in rects:
        hit |= (
            (points.real >= r.re_min)
            & (points.real <= r.re_max)
            & (points.imag >= r.im_min)
            & (points.imag <= r.im_max)
        )
    return int(np.count_nonzero(hit))


def mc_density(rects, source: HalfAnnulus, samples: int, seed: int = DEFAULT_SEED, lanes: int = 1):
    """Monte Carlo estimate of ``area(union of rects) / area(source)``.

    Each lane draws from its own spawned seed; lanes merge by hit counts.
    Returns ``(estimate, standard_error)``.
    """
    children = np.random.SeedSequence(seed).spawn(lanes)
    per_lane = [samples // lanes + (1 if i < samples % lanes else 0) for i in range(lanes)]
    hits = 0
    for child, n in zip(children, per_lane):
        if n == 0:
            continue
        rng = np.random.default_rng(child)
        hits += _count_hits(_sample_half_annulus(rng, source, n), rects)
    p = hits / samples
    return p, math.sqrt(max(p * (1 - p), 0.0) / samples)


def density(inner, source: HalfAnnulus, mc_samples: int = 0, seed: int = DEFAULT_SEED, lanes: int = 1):
    """Exact density of contained rectangles in ``source``, plus an optional
    Monte Carlo cross-check."""
    exact = sum(r.area for r in inner) / source.area
    if mc_samples <= 0:
        return DensityResult(exact)
    p, se = mc_density(inner, source, mc_samples, seed, lanes)
    return DensityResult(exact, p, se, mc_samples, seed)


def lemma_hypotheses(fmap: ExpMap, source: HalfAnnulus, target: HalfAnnulus) -> dict:
    """Both hypotheses of the density lemma, each as ``(holds, description)``."""
    R1, R2, R3, R4 = source.r1, source.r2, target.r1, target.r2
    need = max(2 * R1, R1 + 16 * math.pi, 3 * (math.log(R4) - fmap.log_abs_lambda))
    return {
        "outer_radius": (
            R2 > need,
            f"R2 > max(2 R1, R1 + 16 pi, 3 log(R4/|lam|)): {R2:.6g} > {need:.6g}",
        ),
        "inner_target": (R3 > fmap.abs_lambda, f"R3 > |lam|: {R3:.6g} > {fmap.abs_lambda:.6g}"),
    }


def density_lower_bound(fmap: ExpMap, source: HalfAnnulus, target: HalfAnnulus) -> float:
    """``log(R4/R3) / (2 pi R2)``, valid when both lemma hypotheses hold."""
    if not (0 < source.r1 < source.r2 and 0 < target.r1 < target.r2):
        raise HypothesisViolated(["radii must satisfy 0 < r1 < r2"])
    failed = [desc for ok, desc in lemma_hypotheses(fmap, source, target).values() if not ok]
    if failed:
        raise HypothesisViolated(failed)
    return math.log(target.r2 / target.r1) / (2 * math.pi * source.r2)


def verify_density(
    fmap: ExpMap,
    source: HalfAnnulus,
    target: HalfAnnulus,
    mc_samples: int = 0,
    seed: int = DEFAULT_SEED,
) -> dict:
    """Density check for one parameter tuple, as a JSON-ready dict."""
    hyp = lemma_hypotheses(fmap, source, target)
    inner = contained_components(fmap, source, target)
    res = density(inner, source, mc_samples, seed)
    try:
        bound = density_lower_bound(fmap, source, target)
    except HypothesisViolated:
        bound = None
    min_count = (source.r2 - source.r1) / (2 * math.pi)
    ok = bound is not None and res.exact >= bound and len(inner) >= min_count
    if ok and res.mc is not None and res.mc_stderr:
        ok = abs(res.mc - res.exact) <= 4 * res.mc_stderr
    return {
        "hypotheses": {k: {"holds": v[0], "detail": v[1]} for k, v in hyp.items()},
        "bound": bound,
        "exact_density": res.exact,
        "mc_density": res.mc,
        "mc_stderr": res.mc_stderr,
        "mc_samples": res.mc_samples,
        "seed": res.seed,
        "component_count": len(inner),
        "min_component_count": min_count,
        "pass": bool(ok),
    }


def format_report(report: dict, prefix: str = "") -> str:
    """Render a nested report as ``key: value`` lines."""
    lines = []
    for key in sorted(report):
        value = report[key]
        if isinstance(value, dict):
            lines.append(f"{prefix}{key}:")
            lines.append(format_report(value, prefix + "  "))
        else:
            lines.append(f"{prefix}{key}: {value}")
    return "\n".join(lines)


# --------------------------------------------------------------------------
# distortion


def distortion_exact(r1: float, r2: float) -> float:
    """Distortion of ``lam * exp`` on a preimage component of a set whose
    moduli range over ``[r1, r2]``."""
    if not 0 < r1 <= r2:
        raise ValueError("need 0 < r1 <= r2")
    return r2 / r1


def sampled_distortion(fmap: ExpMap, rect: PreimageRectangle, samples: int = 1000, seed: int = DEFAULT_SEED):
    """max/min of ``|f'|`` over the corners plus uniform interior samples."""
    rng = np.random.default_rng(seed)
    pts = np.concatenate(
        [
            np.array(rect.corners()),
            rng.uniform(rect.re_min, rect.re_max, samples)
            + 1j * rng.uniform(rect.im_min, rect.im_max, samples),
        ]
    )
    mags = np.abs(fmap.lam * np.exp(pts))
    return float(mags.max() / mags.min())


def sample_lemma_tuple(rng: np.random.Generator):
    """Random ``(lam, S1, S2)`` satisfying both density-lemma hypotheses.

    ``|lam|`` is log-uniform on ``[0.1, 10]`` and ``R2`` stays below ``1e4``.
    """
    lam = complex(np.exp(rng.uniform(np.log(0.1), np.log(10.0))) * np.exp(1j * rng.uniform(-np.pi, np.pi)))
    r3 = abs(lam) * rng.uniform(1.05, 20.0)
    r4 = r3 * rng.uniform(1.2, 50.0)
    r1 = float(np.exp(rng.uniform(0.0, np.log(1000.0))))
    need = max(2 * r1, r1 + 16 * math.pi, 3 * math.log(r4 / abs(lam)))
    r2 = need * rng.uniform(1.01, 2.5)
    return lam, HalfAnnulus(r1, r2), HalfAnnulus(r3, r4)
