"""Sign plus natural-log magnitude, for values such as 10**(n*n) that overflow floats.

The log magnitude is held as an unevaluated sum ``log_mag + log_lo`` of two
floats.  A single float log loses about |log| ulps on the way back to a
value; the low-order term keeps float round trips exact to ~1e-16 relative.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

# relative cancellation beyond which subtraction warns instead of silently losing digits
SUBTRACTION_WARN_THRESHOLD = 1e-12

# ln 2 split so that e * LN2_HI is exact for |e| < 2**20
LN2_HI = 6.93147180369123816490e-01
LN2_LO = 1.90821492927058770002e-10


class PrecisionLossWarning(UserWarning):
    pass


def _two_sum(a: float, b: float) -> tuple[float, float]:
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _log_parts(value) -> tuple[float, float]:
    """(hi, lo) with hi + lo = log|value| to roughly double-double accuracy of the exponent part."""
    if isinstance(value, Fraction):
        hi_n, lo_n = _log_parts(value.numerator)
        hi_d, lo_d = _log_parts(value.denominator)
        hi, lo = _two_sum(hi_n, -hi_d)
        return _two_sum(hi, lo + lo_n - lo_d)
    if isinstance(value, int):
        v = abs(value)
        e = max(v.bit_length() - 53, 0)
        m, e2 = math.frexp(float(v >> e))
        e += e2
    else:
        m, e = math.frexp(abs(float(value)))
    hi, lo = _two_sum(e * LN2_HI, math.log(m))
    return _two_sum(hi, lo + e * LN2_LO)


def exact_log(value) -> float:
    """Natural log of a positive int/Fraction/float, without overflow for big ints."""
    hi, lo = _log_parts(value)
    return hi + lo


@dataclass(frozen=True)
class LogScalar:
    sign: int
    log_mag: float
    log_lo: float = 0.0

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError("sign must be -1, 0 or +1")
        if self.sign == 0:
            object.__setattr__(self, "log_mag", -math.inf)
            object.__setattr__(self, "log_lo", 0.0)
        elif not math.isfinite(self.log_mag):
            raise ValueError("log magnitude of a nonzero LogScalar must be finite")
        else:
            hi, lo = _two_sum(self.log_mag, self.log_lo)
            object.__setattr__(self, "log_mag", hi)
            object.__setattr__(self, "log_lo", lo)

    @classmethod
    def zero(cls) -> "LogScalar":
        return cls(0, -math.inf)

    @classmethod
    def from_value(cls, value) -> "LogScalar":
        """Exact-input constructor: accepts int (any size), Fraction or float."""
        if value == 0:
            return cls.zero()
        sign = 1 if value > 0 else -1
        return cls(sign, *_log_parts(abs(value)))

    @classmethod
    def from_log(cls, log_mag: float, sign: int = 1) -> "LogScalar":
        return cls(sign, log_mag)

    def to_float(self) -> float:
        """Native float; raises OverflowError when the magnitude is not representable."""
        if self.sign == 0:
            return 0.0
        e = round(self.log_mag / LN2_HI)
        r = (self.log_mag - e * LN2_HI) - e * LN2_LO + self.log_lo
        try:
            return self.sign * math.ldexp(math.exp(r), e)
        except OverflowError:
            raise OverflowError(f"exp({self.log_mag:.6g}) is not representable as a float") from None

    __float__ = to_float

    def __neg__(self) -> "LogScalar":
        return LogScalar(-self.sign, self.log_mag, self.log_lo)

    def __abs__(self) -> "LogScalar":
        return LogScalar(abs(self.sign), self.log_mag, self.log_lo)

    def __mul__(self, other) -> "LogScalar":
        other = _coerce(other)
        if self.sign == 0 or other.sign == 0:
            return LogScalar.zero()
        hi, lo = _two_sum(self.log_mag, other.log_mag)
        return LogScalar(self.sign * other.sign, hi, lo + self.log_lo + other.log_lo)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "LogScalar":
        other = _coerce(other)
        if other.sign == 0:
            raise ZeroDivisionError("division by LogScalar zero")
        if self.sign == 0:
            return LogScalar.zero()
        hi, lo = _two_sum(self.log_mag, -other.log_mag)
        return LogScalar(self.sign * other.sign, hi, lo + self.log_lo - other.log_lo)

    def __rtruediv__(self, other) -> "LogScalar":
        return _coerce(other) / self

    def __pow__(self, p: float) -> "LogScalar":
        if self.sign < 0:
            raise ValueError("power of a negative LogScalar")
        if self.sign == 0:
            return LogScalar.zero() if p > 0 else LogScalar(1, 0.0)
        return LogScalar(1, p * self.log_mag, p * self.log_lo)

    def __add__(self, other) -> "LogScalar":
        other = _coerce(other)
        if other.sign == 0:
            return self
        if self.sign == 0:
            return other
        big, small = (self, other) if abs_key(self) >= abs_key(other) else (other, self)
        d = (small.log_mag - big.log_mag) + (small.log_lo - big.log_lo)  # <= 0
        if big.sign == small.sign:
            return LogScalar(big.sign, big.log_mag, big.log_lo + math.log1p(math.exp(d)))
        if d == 0.0:
            return LogScalar.zero()
        # |big| - |small| = |big| * (1 - e^d)
        rel = -math.expm1(d)
        if rel < SUBTRACTION_WARN_THRESHOLD:
            warnings.warn(f"LogScalar subtraction cancels to relative {rel:.3e}",
                          PrecisionLossWarning, stacklevel=2)
        return LogScalar(big.sign, big.log_mag, big.log_lo + math.log(rel))

    __radd__ = __add__

    def __sub__(self, other) -> "LogScalar":
        return self + (-_coerce(other))

    def __rsub__(self, other) -> "LogScalar":
        return _coerce(other) - self

    def _key(self):
        if self.sign == 0:
            return (0, 0.0, 0.0)
        return (self.sign, self.sign * self.log_mag, self.sign * self.log_lo)

    def __lt__(self, other) -> bool:
        return self._key() < _coerce(other)._key()

    def __le__(self, other) -> bool:
        return self._key() <= _coerce(other)._key()

    def __gt__(self, other) -> bool:
        return self._key() > _coerce(other)._key()

    def __ge__(self, other) -> bool:
        return self._key() >= _coerce(other)._key()

    def isclose(self, other, rel: float = 1e-12) -> bool:
        """Relative closeness of the represented values (log-magnitude difference <= rel)."""
        other = _coerce(other)
        if self.sign != other.sign:
            return False
        if self.sign == 0:
            return True
        return abs((self.log_mag - other.log_mag) + (self.log_lo - other.log_lo)) <= rel


def abs_key(x: LogScalar) -> tuple[float, float]:
    return (x.log_mag, x.log_lo)


def _coerce(x) -> LogScalar:
    return x if isinstance(x, LogScalar) else LogScalar.from_value(x)
