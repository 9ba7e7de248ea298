"""The exponential family ``z -> lam * exp(z)``.

Orbit values are carried as :class:`Cartesian` points while ``|z| < THETA`` and
switch to magnitude-only :class:`TowerPoint` form beyond that.  Cartesian
arithmetic runs in doubles by default, or in mpmath at ``precision_bits`` when
an :class:`ExpMap` is built with more than 53 bits.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Union

import mpmath

from .tower import TowerValue

THETA = 1e300
LOG_THETA = math.log(THETA)
MAX_PRECISION = 1024
# absolute phase error tolerated before an argument is declared meaningless
ARG_TOLERANCE = 1e-6


class NotEscaping(ValueError):
    """Iterates of the maximum modulus do not tend to infinity from the given radius."""


class ZeroArgument(ValueError):
    """Zero has no preimage under ``lam * exp(z)``."""


@lru_cache(maxsize=None)
def mp_context(bits: int) -> mpmath.ctx_mp.MPContext:
    ctx = mpmath.MPContext()
    ctx.prec = bits
    return ctx


@dataclass(frozen=True)
class Cartesian:
    """An orbit value held exactly (to working precision).

    ``arg_reliable`` turns false once an earlier orbit point had an imaginary
    part so large that this point's argument is rounding noise.
    """

    value: complex
    arg_reliable: bool = True

    @property
    def re(self) -> float:
        return float(self.value.real)

    @property
    def im(self) -> float:
        return float(self.value.imag)

    def log_abs(self) -> float:
        a = abs(self.value)
        if a == 0:
            return -math.inf
        return float(mpmath.log(a)) if not isinstance(a, float) else math.log(a)

    def magnitude(self) -> TowerValue:
        return TowerValue.from_log(self.log_abs())


@dataclass(frozen=True)
class TowerPoint:
    """Magnitude-only orbit value; the argument has been discarded."""

    tower: TowerValue
    sign_unknown: bool = True

    def log_abs(self) -> float:
        return self.tower.log_float()

    def magnitude(self) -> TowerValue:
        return self.tower


SafePoint = Union[Cartesian, TowerPoint]


def log_plus(x: float) -> float:
    return math.log(x) if x >= 1 else 0.0


def log_plus_p(x: float, p: int) -> float:
    """``p``-fold composition of ``log+``."""
    if p < 1:
        raise ValueError("p must be at least 1")
    if x < 0:
        raise ValueError("x must be non-negative")
    for _ in range(p):
        x = log_plus(x)
    return x


@dataclass(frozen=True)
class ExpMap:
    lam: complex
    precision_bits: int = 53
    log_abs_lambda: float = field(init=False)
    arg_lambda: float = field(init=False)

    def __post_init__(self):
        lam = complex(self.lam)
        if lam == 0:
            raise ValueError("lambda must be nonzero")
        if not 53 <= self.precision_bits <= MAX_PRECISION:
            raise ValueError(f"precision_bits must lie in [53, {MAX_PRECISION}]")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "log_abs_lambda", math.log(abs(lam)))
        object.__setattr__(self, "arg_lambda", _principal_arg(lam))

    @property
    def abs_lambda(self) -> float:
        return abs(self.lam)

    @property
    def extended(self) -> bool:
        return self.precision_bits > 53

    @property
    def ctx(self):
        return mp_context(self.precision_bits)

    def number(self, z):
        """Coerce ``z`` to the working number type."""
        if self.extended:
            return self.ctx.mpc(z)
        return complex(z)

    # forward map --------------------------------------------------------

    def apply(self, z: SafePoint) -> SafePoint:
        if isinstance(z, TowerPoint):
            return TowerPoint(self.max_modulus_tower(z.tower))
        w = z.value
        log_mag = self.log_abs_lambda + float(w.real)
        if log_mag >= LOG_THETA:
            return TowerPoint(TowerValue.from_log(log_mag))
        reliable = z.arg_reliable and abs(w.imag) * 2.0 ** -self.precision_bits < ARG_TOLERANCE
        if self.extended:
            ctx = self.ctx
            value = ctx.mpc(self.lam) * ctx.exp(ctx.mpc(w))
        else:
            value = self.lam * cmath.exp(w)
        return Cartesian(value, reliable)

    def __call__(self, z):
        """Plain evaluation on a number (no overflow handling)."""
        if self.extended:
            return self.ctx.mpc(self.lam) * self.ctx.exp(self.ctx.mpc(z))
        return self.lam * cmath.exp(z)

    def orbit(self, z0, n: int) -> list[SafePoint]:
        if n < 0:
            raise ValueError("n must be non-negative")
        point = z0 if isinstance(z0, (Cartesian, TowerPoint)) else Cartesian(self.number(z0))
        out = [point]
        for _ in range(n):
            point = self.apply(point)
            out.append(point)
        return out

    # modulus functions --------------------------------------------------

    def max_modulus(self, r: float):
        """``M(r) = |lam| e^r``; a :class:`TowerValue` when it overflows doubles."""
        if r < 0:
            raise ValueError("r must be non-negative")
        log_m = self.log_abs_lambda + r
        if log_m < LOG_THETA:
            return math.exp(log_m)
        return TowerValue.from_log(log_m)

    def max_modulus_tower(self, v: TowerValue) -> TowerValue:
        """``M`` applied to a tower magnitude."""
        if self.log_abs_lambda == 0.0:
            return v.exp()
        x = v.to_float()
        if math.isinf(x):
            return v.exp()
        return TowerValue.from_log(x + self.log_abs_lambda)

    def max_modulus_iter(self, r: float, n: int) -> TowerValue:
        """``M^n(r)`` in tower form."""
        if n < 0:
            raise ValueError("n must be non-negative")
        if not self.escapes_from(r):
            raise NotEscaping(
                f"M^n({r}) does not tend to infinity (escape threshold {self.escape_threshold():.12g})"
            )
        v = TowerValue.from_float(r)
        for _ in range(n):
            v = self.max_modulus_tower(v)
        return v

    def min_modulus(self, r: float) -> float:
        """``m(r) = |lam| e^{-r}``, attained at ``z = -r``."""
        if r < 0:
            raise ValueError("r must be non-negative")
        return math.exp(self.log_abs_lambda - r)

    def escape_threshold(self) -> float:
        """Largest real solution of ``|lam| e^x = x``, or 0 when there is none."""
        return _escape_threshold(self.log_abs_lambda)

    def escapes_from(self, r: float) -> bool:
        if r < 0:
            return False
        if self.log_abs_lambda > -1.0:
            return True
        return r > self.escape_threshold()

    # inverse branches ---------------------------------------------------

    def inverse_branch(self, w, k: int):
        """Preimage of ``w`` with ``Im z + arg lam`` in ``((2k-1)pi, (2k+1)pi]``."""
        if w == 0:
            raise ZeroArgument("w must be nonzero")
        if self.extended:
            ctx = self.ctx
            w = ctx.mpc(w)
            lam = ctx.mpc(self.lam)
            re = ctx.log(abs(w)) - ctx.log(abs(lam))
            im = ctx.arg(w) - ctx.arg(lam) + 2 * ctx.pi * k
            return ctx.mpc(re, im)
        w = complex(w)
        re = math.log(abs(w)) - self.log_abs_lambda
        im = _principal_arg(w) - self.arg_lambda + 2 * math.pi * k
        return complex(re, im)

    def derivative_abs(self, z) -> float:
        """``|f'(z)| = |f(z)|`` for the exponential family."""
        return float(abs(self(z)))


def _principal_arg(w: complex) -> float:
    """Argument in ``(-pi, pi]``; cmath.phase overflows on subnormal parts."""
    arg = math.atan2(w.imag, w.real)
    return math.pi if arg == -math.pi else arg


@lru_cache(maxsize=256)
def _escape_threshold(log_abs_lambda: float) -> float:
    if log_abs_lambda > -1.0:
        return 0.0
    # h(x) = log|lam| + x - log x is increasing for x > 1; its zero is the larger root
    def h(x):
        return log_abs_lambda + x - math.log(x)

    lo = max(1.0, -log_abs_lambda)
    if h(lo) >= 0:
        return lo
    hi = max(1e3, 2 * lo)
    while h(hi) <= 0:
        hi *= 2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if h(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
