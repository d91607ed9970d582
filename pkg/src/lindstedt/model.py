"""Problem data: the perturbation's Fourier-Taylor table and the twist expansion.

The generating function is written as ``sigma(x, z)`` with ``z = x' - x``
and expanded as

    sigma(x, z; eps) = sum_{nu, q, s} table[nu, q, s] e^{i nu x} (z - 2 pi omega)^q eps^s

so ``table[nu, q, s] = (1/(q! s!)) d_z^q d_eps^s sigma_nu(2 pi omega, 0)``.
Missing entries are exact zeros.  The inverse twist is
``b(2 pi omega + u) = B_0 + B_1 (u + sum_{k>=2} Bbar_k u^k)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Sequence

import jsonschema
import mpmath

from ._validation import DEFAULT_PRECISION_BITS, check_precision, to_mpf, workprec
from .exceptions import DecayViolation, RealityViolation, SchemaError, ZeroTwist

__all__ = [
    "Decay",
    "GeneratingFunctionData",
    "TwistData",
    "standard_map_model",
    "linear_twist",
    "twist_from_frequency_map",
    "quadratic_twist",
    "load_model",
    "dump_model",
    "MODEL_SCHEMA",
]


@dataclass(frozen=True)
class Decay:
    """Envelope ``|table[nu,q,s]| <= Xi e^{-xi |nu|} rho^{-q} mu^{-s}``."""

    Xi: mpmath.mpf
    xi: mpmath.mpf
    rho: mpmath.mpf
    mu: mpmath.mpf | None = None

    def bound(self, nu, q, s):
        b = self.Xi * mpmath.exp(-self.xi * abs(nu)) * self.rho ** (-q)
        if s:
            if self.mu is None:
                return mpmath.mpf(0)
            b *= self.mu ** (-s)
        return b


@dataclass(frozen=True)
class GeneratingFunctionData:
    """Sparse Fourier-Taylor table of the perturbation, keyed by ``(nu, q, s)``."""

    table: Mapping
    decay: Decay | None = None
    precision_bits: int = DEFAULT_PRECISION_BITS

    def __post_init__(self):
        clean = {}
        with workprec(self.precision_bits):
            for (nu, q, s), v in dict(self.table).items():
                if q < 0 or s < 0:
                    raise SchemaError(f"negative Taylor index in entry {(nu, q, s)}")
                v = mpmath.mpc(v)
                if v != 0:
                    clean[(int(nu), int(q), int(s))] = v
        object.__setattr__(self, "table", MappingProxyType(clean))

    @property
    def mode_cutoff(self) -> int:
        return max((abs(nu) for nu, _, _ in self.table), default=0)

    @property
    def taylor_cutoff(self) -> int:
        return max((q for _, q, _ in self.table), default=0)

    @property
    def eps_cutoff(self) -> int:
        return max((s for _, _, s in self.table), default=0)

    def modes(self) -> list[int]:
        return sorted({nu for nu, _, _ in self.table})

    def get(self, nu, q, s=0):
        return self.table.get((nu, q, s), 0)

    def scaled(self, gamma) -> "GeneratingFunctionData":
        """The table multiplied by ``gamma`` (decay metadata is dropped)."""
        with workprec(self.precision_bits):
            g = to_mpf(gamma) if not isinstance(gamma, mpmath.mpc) else gamma
            return GeneratingFunctionData(
                {key: g * v for key, v in self.table.items()}, None, self.precision_bits
            )

    def reality_defect(self):
        """Largest ``|sigma_{-nu} - conj(sigma_nu)|`` over the table."""
        worst = mpmath.mpf(0)
        for (nu, q, s), v in self.table.items():
            d = abs(self.get(-nu, q, s) - mpmath.conj(v))
            worst = max(worst, d)
        return worst

    def is_z_independent(self) -> bool:
        return self.taylor_cutoff == 0


@dataclass(frozen=True)
class TwistData:
    """Taylor data of the inverse frequency map ``b`` at ``2 pi omega``.

    ``b0`` is ``b(2 pi omega)``; ``None`` means the linear map ``b(w) = w``
    convention of the standard map, where ``b0 = 2 pi omega``.
    """

    b1: mpmath.mpf = field(default_factory=lambda: mpmath.mpf(1))
    bbar: tuple = ()
    b0: mpmath.mpf | None = None

    def __post_init__(self):
        if self.b1 == 0:
            raise ZeroTwist("B_1 = 0 violates the twist condition")
        bbar = tuple(self.bbar)
        while bbar and bbar[-1] == 0:
            bbar = bbar[:-1]
        object.__setattr__(self, "bbar", bbar)

    @property
    def is_linear(self) -> bool:
        return not self.bbar

    @property
    def is_identity(self) -> bool:
        return self.is_linear and self.b1 == 1

    @property
    def cutoff(self) -> int:
        """Largest k with a held ``Bbar_k``."""
        return len(self.bbar) + 1

    def bbar_k(self, k: int):
        if k == 1:
            return mpmath.mpf(1)
        if 2 <= k <= self.cutoff:
            return self.bbar[k - 2]
        return 0

    def base_value(self, omega):
        return 2 * mpmath.pi * omega if self.b0 is None else self.b0

    def __call__(self, u):
        """``b(2 pi omega + u) - b0`` as the held polynomial in ``u``."""
        acc = mpmath.mpf(0)
        for c in reversed(self.bbar):
            acc = (acc + c) * u
        return self.b1 * (acc * u + u)

    def derivative(self, u):
        acc = mpmath.mpf(0)
        for k in range(self.cutoff, 1, -1):
            acc = acc * u + k * self.bbar[k - 2]
        return self.b1 * (1 + acc * u)


def standard_map_model(precision_bits: int = DEFAULT_PRECISION_BITS) -> GeneratingFunctionData:
    """``sigma = 1 - cos x``: the Taylor-Chirikov standard map."""
    with workprec(precision_bits):
        half = mpmath.mpf(1) / 2
        table = {(0, 0, 0): mpmath.mpf(1), (1, 0, 0): -half, (-1, 0, 0): -half}
    return GeneratingFunctionData(table, None, precision_bits)


def linear_twist() -> TwistData:
    return TwistData()


def twist_from_frequency_map(a_taylor: Sequence, cutoff: int, y0=0,
                             precision_bits: int = DEFAULT_PRECISION_BITS) -> TwistData:
    """Invert ``a(y0 + t) = 2 pi omega + A_1 t + A_2 t^2 + ...`` as a power series.

    ``a_taylor`` lists ``A_1, A_2, ...`` (normalised Taylor coefficients,
    ``A_j = a^(j)(y0) / j!``).  Returns the coefficients of
    ``b(2 pi omega + u) = y0 + B_1 u + B_2 u^2 + ...`` through ``u^cutoff``.
    """
    bits = check_precision(precision_bits)
    with workprec(bits):
        a = [to_mpf(c) for c in a_taylor]
        if not a or a[0] == 0:
            raise ZeroTwist("a'(y0) = 0 violates the twist condition")
        if a[0] < 0:
            raise ValueError("twist condition requires a'(y0) > 0")
        a = a + [mpmath.mpf(0)] * max(0, cutoff - len(a))
        b = [mpmath.mpf(0), 1 / a[0]]
        # powers[j][n] = coefficient of u^n in (b(u) - y0)^j, truncated at `cutoff`
        for n in range(2, cutoff + 1):
            b.append(mpmath.mpf(0))
            powers = _series_powers(b, n, n)
            acc = sum(a[j - 1] * powers[j][n] for j in range(2, n + 1))
            b[n] = -acc / a[0]
        b1 = b[1]
        bbar = tuple(bk / b1 for bk in b[2: cutoff + 1])
        return TwistData(b1, bbar, to_mpf(y0))


def _series_powers(b, max_power, order):
    """``out[j][n]``: u^n coefficient of ``(sum_i b[i] u^i)^j``, ``n <= order``."""
    base = list(b[: order + 1]) + [0] * max(0, order + 1 - len(b))
    out = [[mpmath.mpf(1)] + [mpmath.mpf(0)] * order]
    for _ in range(max_power):
        prev = out[-1]
        cur = [mpmath.mpf(0)] * (order + 1)
        for i, pi in enumerate(prev):
            if pi == 0:
                continue
            for j in range(1, order + 1 - i):
                if base[j]:
                    cur[i + j] += pi * base[j]
        out.append(cur)
    return out


def quadratic_twist(omega, c=0.5, cutoff: int = 12,
                    precision_bits: int = DEFAULT_PRECISION_BITS) -> TwistData:
    """Inverse twist of ``a(y) = y + c y^2`` around the ``y0 > 0`` with ``a(y0) = 2 pi omega``."""
    with workprec(precision_bits + 16):
        c = to_mpf(c)
        w = 2 * mpmath.pi * to_mpf(omega)
        y0 = (-1 + mpmath.sqrt(1 + 4 * c * w)) / (2 * c)
        coeffs = [1 + 2 * c * y0, c]
    return twist_from_frequency_map(coeffs, cutoff, y0, precision_bits)


# ---------------------------------------------------------------------------
# JSON I/O

_DEC = {"type": ["string", "number"]}

MODEL_SCHEMA = {
    "type": "object",
    "properties": {
        "builtin": {"enum": ["standard_map"]},
        "sigma": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "nu": {"type": "integer"},
                    "q": {"type": "integer", "minimum": 0},
                    "s": {"type": "integer", "minimum": 0},
                    "re": _DEC,
                    "im": _DEC,
                },
                "required": ["nu"],
                "additionalProperties": False,
            },
        },
        "decay": {
            "type": "object",
            "properties": {"Xi": _DEC, "xi": _DEC, "rho": _DEC, "mu": _DEC},
            "required": ["Xi", "xi", "rho"],
            "additionalProperties": False,
        },
        "twist": {
            "type": "object",
            "properties": {
                "B0": _DEC,
                "B1": _DEC,
                "Bbar": {"type": "array", "items": _DEC},
                "frequency_taylor": {"type": "array", "items": _DEC},
                "y0": _DEC,
                "cutoff": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "precision_bits": {"type": "integer", "minimum": 64},
    },
    "additionalProperties": False,
}


def _num(x):
    return to_mpf(repr(x) if isinstance(x, float) else x)


def load_model(document, precision_bits: int | None = None):
    """Validate and load a model document; returns ``(GeneratingFunctionData, TwistData)``.

    ``document`` may be a dict, a JSON string or a path-like pointing to a
    JSON file.  Raises :class:`SchemaError`, :class:`RealityViolation`,
    :class:`DecayViolation` or :class:`ZeroTwist`.
    """
    if isinstance(document, str) and document.lstrip().startswith("{"):
        document = json.loads(document)
    elif not isinstance(document, Mapping):
        with open(document) as fh:
            document = json.load(fh)
    try:
        jsonschema.validate(document, MODEL_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise SchemaError(f"invalid model document: {exc.message}") from None
    if ("builtin" in document) == ("sigma" in document):
        raise SchemaError("model needs exactly one of `builtin` or `sigma`")

    bits = check_precision(precision_bits or document.get("precision_bits", DEFAULT_PRECISION_BITS))
    with workprec(bits):
        if "builtin" in document:
            sigma = standard_map_model(bits)
        else:
            table = {}
            for entry in document["sigma"]:
                key = (entry["nu"], entry.get("q", 0), entry.get("s", 0))
                if key in table:
                    raise SchemaError(f"duplicate sigma entry {key}")
                table[key] = mpmath.mpc(_num(entry.get("re", 0)), _num(entry.get("im", 0)))
            sigma = GeneratingFunctionData(table, None, bits)
        _check_reality(sigma)
        if "decay" in document:
            d = document["decay"]
            decay = Decay(_num(d["Xi"]), _num(d["xi"]), _num(d["rho"]),
                          _num(d["mu"]) if "mu" in d else None)
            _check_decay(sigma, decay)
            sigma = GeneratingFunctionData(sigma.table, decay, bits)
        twist = _load_twist(document.get("twist"), bits)
    return sigma, twist


def _check_reality(sigma: GeneratingFunctionData):
    scale = max((abs(v) for v in sigma.table.values()), default=mpmath.mpf(0))
    tol = scale * mpmath.mpf(2) ** (-sigma.precision_bits + 8)
    for (nu, q, s), v in sigma.table.items():
        if abs(sigma.get(-nu, q, s) - mpmath.conj(v)) > tol:
            raise RealityViolation(
                f"sigma[{-nu},{q},{s}] = {sigma.get(-nu, q, s)} is not conj(sigma[{nu},{q},{s}]) = {mpmath.conj(v)}"
            )


def _check_decay(sigma: GeneratingFunctionData, decay: Decay):
    slack = 1 + mpmath.mpf(2) ** (-sigma.precision_bits + 8)
    for (nu, q, s), v in sigma.table.items():
        if abs(v) > decay.bound(nu, q, s) * slack:
            raise DecayViolation(f"|sigma[{nu},{q},{s}]| = {abs(v)} exceeds the decay envelope")


def _load_twist(doc, bits) -> TwistData:
    if not doc:
        return TwistData()
    if "frequency_taylor" in doc:
        cutoff = doc.get("cutoff", max(2, len(doc["frequency_taylor"])) * 4)
        return twist_from_frequency_map(
            [_num(c) for c in doc["frequency_taylor"]], cutoff, _num(doc.get("y0", 0)), bits
        )
    b1 = _num(doc.get("B1", 1))
    if b1 == 0:
        raise ZeroTwist("B_1 = 0 violates the twist condition")
    bbar = tuple(_num(c) for c in doc.get("Bbar", []))
    b0 = _num(doc["B0"]) if "B0" in doc else None
    return TwistData(b1, bbar, b0)


def _dec(x, bits):
    # enough digits for an exact round trip at `bits` of precision
    return mpmath.nstr(x, int(bits * 0.30103) + 3, strip_zeros=False, min_fixed=1, max_fixed=0)


def dump_model(sigma: GeneratingFunctionData, twist: TwistData | None = None) -> dict:
    """Serialise to the JSON document accepted by :func:`load_model`."""
    bits = sigma.precision_bits
    entries = []
    with workprec(bits):
        for (nu, q, s), v in sorted(sigma.table.items()):
            entries.append({"nu": nu, "q": q, "s": s, "re": _dec(v.real, bits), "im": _dec(v.imag, bits)})
        doc = {"sigma": entries, "precision_bits": bits}
        if sigma.decay is not None:
            d = sigma.decay
            doc["decay"] = {"Xi": _dec(d.Xi, bits), "xi": _dec(d.xi, bits), "rho": _dec(d.rho, bits)}
            if d.mu is not None:
                doc["decay"]["mu"] = _dec(d.mu, bits)
        if twist is not None:
            t = {"B1": _dec(twist.b1, bits), "Bbar": [_dec(c, bits) for c in twist.bbar]}
            if twist.b0 is not None:
                t["B0"] = _dec(twist.b0, bits)
            doc["twist"] = t
    return doc
