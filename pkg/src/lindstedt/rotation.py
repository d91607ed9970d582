"""Continued fractions, Bryuno sums and small divisors for a rotation number.

Convergent indexing used throughout the package::

    p_{-1} = 1, q_{-1} = 0,   p_0 = 0, q_0 = 1,
    p_{k+1} = a_{k+1} p_k + p_{k-1},   q_{k+1} = a_{k+1} q_k + q_{k-1}

so that ``q_1 = a_1`` and the Bryuno sum starts at ``k = 0`` with ``q_0 = 1``.
All rotation numbers are reduced to (0, 1) by dropping the integer part.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from typing import NamedTuple, Sequence

import jsonschema
import mpmath

from ._validation import DEFAULT_PRECISION_BITS, check_int, check_precision, workprec
from .exceptions import (
    ConfigurationError,
    DepthExceeded,
    InsufficientPrecision,
    PrecisionExhausted,
    RationalRotation,
)

__all__ = [
    "RotationNumber",
    "BryunoData",
    "BryunoFunctionValue",
    "SmallDivisor",
    "make_rotation",
    "rotation_from_dict",
    "bryuno_sum",
    "bryuno_depth_for_tolerance",
    "bryuno_function",
    "small_divisor",
    "denominator_gap_check",
    "cf_of_fraction",
    "convergents",
]

# relative accuracy demanded of every small divisor |delta(omega nu)|, |nu| < q_depth
_DIVISOR_ACCURACY_BITS = 32


def cf_of_fraction(x: Fraction) -> list[int]:
    """Partial quotients a_1, a_2, ... of a rational ``x`` in [0, 1)."""
    terms = []
    num, den = x.numerator, x.denominator
    while num:
        a, rem = divmod(den, num)
        terms.append(a)
        num, den = rem, num
    return terms


def convergents(terms: Sequence[int]) -> list[tuple[int, int]]:
    """Return ``[(p_0, q_0), ..., (p_n, q_n)]`` for ``terms = [a_1, ..., a_n]``."""
    p_prev, q_prev, p, q = 1, 0, 0, 1
    out = [(p, q)]
    for a in terms:
        p_prev, q_prev, p, q = p, q, a * p + p_prev, a * q + q_prev
        out.append((p, q))
    return out


@dataclass(frozen=True)
class RotationNumber:
    """A rotation number in (0, 1) with its certified continued-fraction data.

    Attributes
    ----------
    cf_terms : tuple of int
        Partial quotients ``a_1, ..., a_depth``.
    convergents : tuple of (int, int)
        ``(p_k, q_k)`` for ``k = 0, ..., depth``.
    value : mpmath.mpf
        The rotation number at ``precision_bits`` bits.
    precision_bits : int
    error : mpmath.mpf
        Upper bound on ``|value - omega|`` (input uncertainty plus rounding).
    periodic_tail : tuple of int or None
        Repeating block of the CF, when the number was given that way.
    label : str
        Short human-readable descriptor used in reports.
    """

    cf_terms: tuple
    convergents: tuple
    value: mpmath.mpf
    precision_bits: int
    error: mpmath.mpf
    periodic_tail: tuple | None = None
    label: str = ""
    max_quotient: int = field(default=0, compare=False)

    @property
    def depth(self) -> int:
        return len(self.cf_terms)

    @property
    def q(self) -> list[int]:
        return [qk for _, qk in self.convergents]

    @property
    def certified_bound(self) -> int:
        """Momenta with ``|nu| < certified_bound`` have accurate small divisors."""
        return self.convergents[-1][1]

    def to_dict(self) -> dict:
        out = {"cf": list(self.cf_terms), "depth": self.depth, "precision_bits": self.precision_bits}
        if self.periodic_tail:
            out["periodic_tail"] = list(self.periodic_tail)
        return out


class SmallDivisor(NamedTuple):
    distance: mpmath.mpf  # ||omega nu||
    delta: mpmath.mpf  # 2 (cos 2 pi omega nu - 1)
    delta_plus: mpmath.mpc  # e^{2 pi i omega nu} - 1
    delta_minus: mpmath.mpc  # 1 - e^{-2 pi i omega nu}


@dataclass(frozen=True)
class BryunoFunctionValue:
    value: mpmath.mpf
    residual_bound: mpmath.mpf
    depth: int


@dataclass(frozen=True)
class BryunoData:
    """Partial sums ``S_N = sum_{k<=N} log(q_{k+1}) / q_k`` and related data."""

    partial_sums: tuple
    tail_bound: mpmath.mpf
    depth: int
    function_value: BryunoFunctionValue

    @property
    def value(self):
        return self.partial_sums[-1]


# ---------------------------------------------------------------------------
# construction


def _exact_input(value):
    """Return ``(x, u)``: exact rational reading of ``value`` and its uncertainty."""
    if isinstance(value, bool):
        raise ConfigurationError("rotation value must be a number")
    if isinstance(value, int):
        return Fraction(value), Fraction(0)
    if isinstance(value, Fraction):
        return value, Fraction(0)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ConfigurationError(f"rotation value must be finite, got {value}")
        return Fraction(value), Fraction(math.ulp(value)) / 2
    if isinstance(value, str):
        try:
            d = Decimal(value.strip())
        except InvalidOperation:
            raise ConfigurationError(f"cannot parse rotation value {value!r}") from None
        if not d.is_finite():
            raise ConfigurationError(f"rotation value must be finite, got {value!r}")
        exponent = d.as_tuple().exponent
        u = Fraction(1, 2) * Fraction(10) ** exponent if exponent < 0 else Fraction(0)
        return Fraction(d), u
    if isinstance(value, mpmath.mpf):
        man, exp = value.man_exp
        x = Fraction(int(man)) * Fraction(2) ** int(exp)
        return x, Fraction(2) ** int(exp)
    raise ConfigurationError(f"unsupported rotation value type {type(value).__name__}")


def _common_prefix(a, b):
    n = 0
    for x, y in zip(a, b):
        if x != y:
            break
        n += 1
    return n


def _tail_value(tail, bits):
    """Value y > 1 of the purely periodic CF ``[b_1; b_2, ..., b_m, b_1, ...]``."""
    conv = convergents(tail)
    # y = [b_1; ..., b_m, y]  <=>  y = (P y + P') / (Q y + Q') with P/Q = [b_1; ..., b_m]
    (pp, qp), (p, q) = conv[-2], conv[-1]
    # convergents() builds [0; b_1, ...]; swap roles to get [b_1; ...]
    big_p, big_q, big_pp, big_qp = q, p, qp, pp
    with workprec(bits):
        a_, b_, c_ = big_q, big_qp - big_p, -big_pp
        return (-b_ + mpmath.sqrt(b_ * b_ - 4 * a_ * c_)) / (2 * a_)


def _fits_precision(q_depth, error):
    return 2 * q_depth * q_depth * error <= mpmath.mpf(2) ** (-_DIVISOR_ACCURACY_BITS)


def make_rotation(
    value=None,
    *,
    cf: Sequence[int] | None = None,
    periodic_tail: Sequence[int] | None = None,
    depth: int | None = None,
    precision_bits: int = DEFAULT_PRECISION_BITS,
    label: str | None = None,
) -> RotationNumber:
    """Build a :class:`RotationNumber` from a real value or from CF terms.

    Exactly one source must be given: ``value`` (int, float, Fraction,
    decimal string or ``mpmath.mpf``) or ``cf``/``periodic_tail``.

    With a periodic tail the number is a quadratic irrational and is
    reconstructed at working precision from its CF.  Without one, an
    explicit ``cf`` describes ``[0; a_1, ..., a_N]`` and only ``depth < N``
    is accepted.  A real value is read exactly (decimal strings carry half a
    unit of their last digit as uncertainty) and only the CF terms that the
    uncertainty interval pins down are used.

    Raises
    ------
    RationalRotation
        The CF terminates within the requested depth.
    InsufficientPrecision
        The input cannot certify ``depth`` terms at ``precision_bits``.
    """
    bits = check_precision(precision_bits)
    if depth is not None:
        depth = check_int(depth, "depth", minimum=1)
    has_cf = cf is not None or periodic_tail is not None
    if has_cf == (value is not None):
        raise ConfigurationError("give exactly one of `value` or `cf`/`periodic_tail`")
    if has_cf:
        return _from_cf(list(cf or []), list(periodic_tail or []), depth, bits, label)
    return _from_value(value, depth, bits, label)


def _check_terms(terms, name):
    for a in terms:
        if isinstance(a, bool) or not isinstance(a, int) or a < 1:
            raise ConfigurationError(f"{name} terms must be integers >= 1, got {a!r}")


def _from_cf(prefix, tail, depth, bits, label):
    _check_terms(prefix, "cf")
    _check_terms(tail, "periodic_tail")
    if label is None:
        label = "cf" + str(prefix) + (f"+{tail}*" if tail else "")
    if not tail:
        if not prefix:
            raise ConfigurationError("empty continued fraction")
        if depth is None or depth >= len(prefix):
            raise RationalRotation(
                f"continued fraction {prefix} terminates within requested depth {depth}"
            )
        x = Fraction(0)
        for a in reversed(prefix):
            x = 1 / (a + x)
        with workprec(bits):
            val = mpmath.mpf(x.numerator) / x.denominator
        terms = prefix[:depth]
        conv = convergents(terms)
        return RotationNumber(
            tuple(terms), tuple(conv), val, bits, mpmath.mpf(2) ** (-bits),
            None, label, max(prefix),
        )

    def term(i):
        return prefix[i] if i < len(prefix) else tail[(i - len(prefix)) % len(tail)]

    err = mpmath.mpf(2) ** (-bits + 2)
    if depth is None:
        target = 2 ** (bits // 4)
        terms, q_prev, q = [], 0, 1
        while q < target:
            a = term(len(terms))
            terms.append(a)
            q_prev, q = q, a * q + q_prev
        depth = len(terms)
    terms = [term(i) for i in range(depth)]
    conv = convergents(terms)
    if not _fits_precision(conv[-1][1], err):
        raise InsufficientPrecision(
            f"{bits} bits cannot resolve small divisors up to q_{depth} = {conv[-1][1]}"
        )
    guard = bits + 64
    y = _tail_value(tail, guard)
    with workprec(guard):
        x = y
        for a in reversed(prefix):
            x = a + 1 / x
        omega = 1 / x
    with workprec(bits):
        val = +omega
    return RotationNumber(
        tuple(terms), tuple(conv), val, bits, err, tuple(tail), label, max(prefix + tail)
    )


def _from_value(value, depth, bits, label):
    x, u = _exact_input(value)
    x -= math.floor(x)
    if label is None:
        label = str(value)
    if x == 0:
        raise RationalRotation(f"rotation value {value!r} is an integer")
    exact_terms = cf_of_fraction(x)
    if u:
        lo, hi = x - u, x + u
        if lo <= 0 or hi >= 1:
            raise InsufficientPrecision(f"{value!r} does not determine a single CF term")
        certified = min(_common_prefix(cf_of_fraction(lo), cf_of_fraction(hi)), len(exact_terms))
    else:
        certified = len(exact_terms)
    length = len(exact_terms)
    if length <= certified + 1 and (depth is None or length <= depth):
        raise RationalRotation(f"rotation value {value!r} has terminating CF {exact_terms}")
    with workprec(bits):
        val = mpmath.mpf(x.numerator) / x.denominator
        err = mpmath.mpf(u.numerator) / u.denominator + mpmath.mpf(2) ** (-bits + 1)
    conv_all = convergents(exact_terms[:certified])
    usable = 0
    for n in range(1, certified + 1):
        if not _fits_precision(conv_all[n][1], err):
            break
        usable = n
    if depth is None:
        depth = usable
        if depth == 0:
            raise InsufficientPrecision(f"{value!r} certifies no usable CF terms")
    elif depth > usable:
        raise InsufficientPrecision(
            f"{value!r} certifies {usable} CF terms at {bits} bits, {depth} requested"
        )
    terms = exact_terms[:depth]
    return RotationNumber(
        tuple(terms), tuple(conv_all[: depth + 1]), val, bits, err, None, label, max(terms)
    )


ROTATION_SCHEMA = {
    "type": "object",
    "properties": {
        "cf": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "periodic_tail": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "value": {"type": ["string", "number"]},
        "depth": {"type": "integer", "minimum": 1},
        "precision_bits": {"type": "integer", "minimum": 64},
        "label": {"type": "string"},
    },
    "additionalProperties": False,
}


def rotation_from_dict(doc: dict, precision_bits: int | None = None) -> RotationNumber:
    """Build a rotation number from its JSON form (see README)."""
    try:
        jsonschema.validate(doc, ROTATION_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigurationError(f"invalid rotation document: {exc.message}") from None
    bits = precision_bits or doc.get("precision_bits", DEFAULT_PRECISION_BITS)
    value = doc.get("value")
    if isinstance(value, float):
        value = repr(value)
    return make_rotation(
        value,
        cf=doc.get("cf"),
        periodic_tail=doc.get("periodic_tail"),
        depth=doc.get("depth"),
        precision_bits=bits,
        label=doc.get("label"),
    )


# ---------------------------------------------------------------------------
# Bryuno sums


def _sum_tail_bound(r: RotationNumber, n: int):
    """Upper estimate of ``sum_{k > n} log(q_{k+1}) / q_k``.

    Terms whose ``q_{k+1}`` is held are summed exactly; beyond that the
    bound uses ``q_{k+2} >= 2 q_k`` and ``q_{k+1} <= (A + 1) q_k`` with ``A``
    the largest known partial quotient (exact for periodic tails).
    """
    q = r.q
    with workprec(r.precision_bits):
        tail = mpmath.mpf(0)
        for k in range(n + 1, r.depth):
            tail += mpmath.log(q[k + 1]) / q[k]
        big_q = mpmath.mpf(q[r.depth])
        big_l = mpmath.log(r.max_quotient + 1)
        # sum_j 2^{-floor(j/2)} = 4 and sum_j (j+1) 2^{-floor(j/2)} = 14
        tail += (4 * mpmath.log(big_q) + 14 * big_l) / big_q
        return tail


def bryuno_sum(r: RotationNumber, depth: int | None = None) -> BryunoData:
    """Partial sums of ``sum_k log(q_{k+1}) / q_k`` up to ``k = depth``."""
    if depth is None:
        depth = r.depth - 1
    depth = check_int(depth, "depth", minimum=0)
    if depth > r.depth - 1:
        raise DepthExceeded(f"depth {depth} needs q_{depth + 1}, only {r.depth} CF terms held")
    q = r.q
    with workprec(r.precision_bits):
        sums, acc = [], mpmath.mpf(0)
        for k in range(depth + 1):
            acc += mpmath.log(q[k + 1]) / q[k]
            sums.append(acc)
    func = bryuno_function(r.value, max(depth + 1, 1), precision_bits=r.precision_bits)
    return BryunoData(tuple(sums), _sum_tail_bound(r, depth), depth, func)


def bryuno_depth_for_tolerance(r: RotationNumber, tol=0.01) -> int:
    """Smallest partial-sum depth whose tail bound is below ``tol``."""
    for n in range(r.depth):
        if _sum_tail_bound(r, n) < tol:
            return n
    raise DepthExceeded(f"tail bound never drops below {tol} within {r.depth} CF terms")


def bryuno_function(alpha, depth: int, precision_bits: int = DEFAULT_PRECISION_BITS) -> BryunoFunctionValue:
    """Truncated Bryuno function via the Gauss map ``alpha -> frac(1/alpha)``.

    ``B_d(alpha) = sum_{n<d} beta_{n-1} log(1/alpha_n)`` with
    ``beta_n = alpha_0 ... alpha_n``.  The residual bound sums the next
    computable terms and caps the rest by ``4 beta log(2^bits)``, using
    ``alpha_n alpha_{n+1} < 1/2`` and ``alpha_n >= 2^-bits``.
    """
    bits = check_precision(precision_bits)
    depth = check_int(depth, "depth", minimum=1)
    guard = bits + 32
    with workprec(guard):
        a = mpmath.mpf(alpha) if not isinstance(alpha, str) else mpmath.mpf(alpha.strip())
        if not 0 < a < 1:
            raise ConfigurationError(f"alpha must lie in (0, 1), got {alpha!r}")
        beta = mpmath.mpf(1)  # beta_{n-1}
        total = mpmath.mpf(0)
        tail = mpmath.mpf(0)
        floor_beta = mpmath.mpf(2) ** (-(bits // 2))
        n = 0
        while True:
            if a == 0:
                if n < depth:
                    raise RationalRotation(f"Gauss map of {alpha!r} reaches 0 at step {n}")
                beta = mpmath.mpf(0)
                break
            term = -beta * mpmath.log(a)
            if n < depth:
                total += term
            else:
                if beta < floor_beta:
                    break
                tail += term
            beta *= a
            inv = 1 / a
            a = inv - mpmath.floor(inv)
            n += 1
        tail += 4 * beta * bits * mpmath.log(2) + mpmath.mpf(2) ** (-bits + 8) * (1 + abs(total))
    with workprec(bits):
        return BryunoFunctionValue(+total, +tail, depth)


# ---------------------------------------------------------------------------
# small divisors


def small_divisor(r: RotationNumber, nu: int) -> SmallDivisor:
    """``||omega nu||``, ``delta``, ``delta_+`` and ``delta_-`` for ``nu != 0``."""
    nu = check_int(nu, "nu")
    if nu == 0:
        raise ConfigurationError("small divisors are defined for nu != 0 only")
    if abs(nu) >= r.certified_bound:
        raise PrecisionExhausted(
            f"|nu| = {abs(nu)} exceeds the certified range q_{r.depth} = {r.certified_bound}"
        )
    with workprec(r.precision_bits + 16):
        t = r.value * nu
        t -= mpmath.nint(t)
        s = mpmath.sinpi(t)
        half = mpmath.expjpi(t)  # e^{i pi t}
        # e^{2 pi i t} - 1 = 2 i sin(pi t) e^{i pi t}, avoids cancellation
        dplus = 2j * s * half
        dminus = 2j * s * mpmath.conj(half)
        out = SmallDivisor(abs(t), -4 * s * s, dplus, dminus)
    with workprec(r.precision_bits):
        return SmallDivisor(*(+x for x in out))


def denominator_gap_check(r: RotationNumber, n: int, nu_range: int) -> list[int]:
    """Return every ``0 < |nu| < q_n``, ``|nu| <= nu_range``, with ``||omega nu|| <= 1/(4 q_n)``."""
    n = check_int(n, "n", minimum=0)
    nu_range = check_int(nu_range, "nu_range", minimum=0)
    if n > r.depth:
        raise DepthExceeded(f"q_{n} not held (depth {r.depth})")
    qn = r.q[n]
    top = min(qn - 1, nu_range)
    if top >= r.certified_bound:
        raise PrecisionExhausted(f"scan up to {top} exceeds certified range {r.certified_bound}")
    violations = []
    with workprec(r.precision_bits):
        limit = mpmath.mpf(1) / (4 * qn)
        for nu in range(1, top + 1):
            t = r.value * nu
            dist = abs(t - mpmath.nint(t))
            if dist <= limit:
                violations.extend([nu, -nu])
    return violations
