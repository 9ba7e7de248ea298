"""Iterated-exponential magnitudes.

A :class:`TowerValue` stores a non-negative magnitude ``exp^k(x)`` as the pair
``(level=k, residual=x)``.  Level 0 holds ordinary values in ``[0, e)``; every
higher level keeps its residual in ``[1, e)``, so the ranges of consecutive
levels are disjoint and ordering is lexicographic on ``(level, residual)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import total_ordering

E = math.e
# largest argument for which math.exp stays finite
EXP_LIMIT = 709.0


@total_ordering
@dataclass(frozen=True)
class TowerValue:
    level: int
    residual: float

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("tower level must be non-negative")
        if self.level == 0:
            if not 0.0 <= self.residual < E:
                raise ValueError(f"level-0 residual {self.residual!r} outside [0, e)")
        elif not 1.0 <= self.residual < E:
            raise ValueError(f"residual {self.residual!r} outside [1, e)")

    # construction -------------------------------------------------------

    @classmethod
    def from_float(cls, value: float) -> TowerValue:
        if value < 0 or math.isnan(value):
            raise ValueError("magnitude must be a non-negative number")
        if math.isinf(value):
            raise OverflowError("cannot build a tower from an infinite float")
        level = 0
        x = float(value)
        while x >= E:
            x = math.log(x)
            level += 1
        if level > 0 and x < 1.0:
            # log rounding can land a hair below 1
            x = 1.0
        return cls(level, x)

    @classmethod
    def from_log(cls, log_value: float) -> TowerValue:
        """Magnitude ``exp(log_value)`` without forming it as a float."""
        if math.isnan(log_value):
            raise ValueError("log-magnitude is NaN")
        if log_value == -math.inf:
            return cls(0, 0.0)
        if log_value < EXP_LIMIT:
            return cls.from_float(math.exp(log_value))
        return cls.from_float(log_value).exp()

    # arithmetic ---------------------------------------------------------

    def exp(self) -> TowerValue:
        if self.level == 0:
            if self.residual >= 1.0:
                return TowerValue(1, self.residual)
            return TowerValue(0, math.exp(self.residual))
        return TowerValue(self.level + 1, self.residual)

    def log(self) -> TowerValue:
        """Natural log; magnitudes below 1 have no tower log."""
        if self.level == 0:
            if self.residual < 1.0:
                raise ValueError("log of a magnitude below 1 is negative")
            return TowerValue(0, math.log(self.residual))
        if self.level == 1:
            return TowerValue(0, self.residual)
        return TowerValue(self.level - 1, self.residual)

    def to_float(self) -> float:
        """Value as a float, ``inf`` once it leaves double range."""
        x = self.residual
        for _ in range(self.level):
            if x > EXP_LIMIT + 1:
                return math.inf
            try:
                x = math.exp(x)
            except OverflowError:
                return math.inf
        return x

    def log_float(self) -> float:
        """``log`` of the magnitude as a float (``-inf`` for zero, ``inf`` on overflow)."""
        if self.level == 0:
            return math.log(self.residual) if self.residual > 0 else -math.inf
        return TowerValue(self.level - 1, self.residual).to_float()

    def loglog_float(self) -> float:
        """``log log`` of the magnitude; only meaningful above ``e``."""
        if self.level <= 1:
            lf = self.log_float()
            return math.log(lf) if lf > 0 else -math.inf
        return TowerValue(self.level - 2, self.residual).to_float()

    def add_log(self, c: float) -> TowerValue:
        """Multiply the magnitude by ``exp(c)``.

        Once the log-magnitude leaves float range the shift is below one unit
        in the last place of the residual and is dropped.
        """
        if c == 0.0:
            return self
        lf = self.log_float()
        if math.isinf(lf) and lf > 0:
            return self
        return TowerValue.from_log(lf + c)

    # ordering -----------------------------------------------------------

    def _key(self):
        return (self.level, self.residual)

    def __lt__(self, other):
        if not isinstance(other, TowerValue):
            return NotImplemented
        return self._key() < other._key()

    def __str__(self):
        if self.level == 0:
            return repr(self.residual)
        return f"exp^{self.level}({self.residual!r})"

    def as_dict(self) -> dict:
        return {"level": self.level, "residual": self.residual}
