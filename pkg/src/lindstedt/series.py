"""Order-by-order Lindstedt coefficients of the conjugation ``x = psi + h(psi)``.

The functional equation for ``h`` is expanded in powers of ``eps``.  Writing
``Dh+ = h(psi + 2 pi omega) - h(psi)`` and ``Dh- = h(psi) - h(psi - 2 pi omega)``,
the order-``k`` equation reads

    delta(omega nu) h^(k)_nu = [ d1 sigma(x, 2 pi omega + Dh+)
                                 - d2 sigma(x, 2 pi omega + Dh+)
                                 + shifted d2 sigma(...) ]_{eps^{k-1}, nu} / B_1
                               + sum_{s>=2} Bbar_s [ (Dh-)^s - (Dh+)^s ]_{eps^k, nu}

The right-hand side is assembled from power series in ``eps`` whose
coefficients are sparse Fourier polynomials (``dict`` mode -> ``mpc``):
``e^{i nu0 h}`` through the exponential recursion and ``(Dh+-)^q`` through
repeated convolution.  Every convolution is a direct sparse double loop.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import mpmath
import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import DEFAULT_PRECISION_BITS, check_int, check_positive, check_precision, workprec
from .exceptions import (
    AssemblyError,
    ConfigurationError,
    FitImpossible,
    GridTooCoarse,
    InvalidOrder,
    OrderUnavailable,
    ZeroCompatibilityFailure,
)
from .model import GeneratingFunctionData, TwistData, standard_map_model
from .rotation import RotationNumber, small_divisor

__all__ = [
    "ConjugationSeries",
    "LindstedtSeries",
    "ResidualReport",
    "OrbitReport",
    "compute_order",
    "compute_H",
    "evaluate_curve",
    "functional_residual",
    "map_orbit_check",
    "coefficients_to_csv",
    "coefficients_from_csv",
    "invariant_summary",
]


def _conv(f: dict, g: dict, out: dict | None = None, scale=1) -> dict:
    """Sparse Fourier product ``out += scale * f * g``."""
    if out is None:
        out = {}
    for a, x in f.items():
        xs = x * scale if scale != 1 else x
        for b, y in g.items():
            n = a + b
            out[n] = out.get(n, 0) + xs * y
    return out


def _abs_at(f: dict, g: dict, n: int):
    """``sum_a |f_a| |g_{n-a}|``: absolute mass of one output mode of ``f * g``."""
    total = mpmath.mpf(0)
    for a, x in f.items():
        y = g.get(n - a)
        if y is not None:
            total += abs(x) * abs(y)
    return total


class _SeriesPowers:
    """Lazy power-series powers ``(sum_m D_m eps^m)^j`` with ``D_0 = 0``."""

    def __init__(self, base: list):
        self.base = base  # base[m] = dict, filled externally as orders become known
        self._pow = {0: [{0: mpmath.mpc(1)}]}

    def get(self, j: int, m: int) -> dict:
        if j == 0:
            return self._pow[0][0] if m == 0 else {}
        if j == 1:
            return self.base[m] if m < len(self.base) else {}
        if m < j:
            return {}
        rows = self._pow.setdefault(j, [])
        while len(rows) <= m:
            mm = len(rows)
            acc = {}
            for i in range(1, mm - j + 2):
                if i < len(self.base):
                    _conv(self.base[i], self.get(j - 1, mm - i), acc)
            rows.append(acc)
        return rows[m]


class ConjugationSeries:
    """Lindstedt coefficients ``h^(k)_nu`` and ``H^(k)_nu`` for one (rotation, model) pair.

    Create with :meth:`ConjugationSeries.compute` or step orders with
    :func:`compute_order`.  Coefficients are stored as ``coeffs[k][nu]``
    (``mpmath.mpc``); ``nu = 0`` is never stored since the zero-average
    normalisation fixes ``h^(k)_0 = 0``.
    """

    def __init__(self, rotation: RotationNumber, sigma: GeneratingFunctionData | None = None,
                 twist: TwistData | None = None, *, precision_bits: int | None = None,
                 zero_tol: float = 1e-12, mode_limit: int | None = None,
                 tail_tol: float | None = None):
        self.rotation = rotation
        self.precision_bits = check_precision(precision_bits or rotation.precision_bits)
        self.sigma = sigma if sigma is not None else standard_map_model(self.precision_bits)
        self.twist = twist if twist is not None else TwistData()
        self.zero_tol = float(check_positive(zero_tol, "zero_tol"))
        self.tail_estimate = mpmath.mpf(0)
        if mode_limit is None and tail_tol is not None and self.sigma.decay is not None:
            d = self.sigma.decay
            mode_limit = max(1, math.ceil(float(mpmath.log(d.Xi / mpmath.mpf(tail_tol)) / d.xi)))
        if mode_limit is not None:
            mode_limit = check_int(mode_limit, "mode_limit", minimum=1)
            if self.sigma.decay is not None:
                d = self.sigma.decay
                self.tail_estimate = d.Xi * mpmath.exp(-d.xi * (mode_limit + 1))
        self.mode_limit = mode_limit

        self.coeffs: dict[int, dict] = {}
        self.H_coeffs: dict[int, dict] = {}
        self.zero_ratios: dict[int, float] = {}
        self.max_order = 0

        with workprec(self.precision_bits):
            self._setup()

    # -- bookkeeping --------------------------------------------------------

    def _setup(self):
        sig, tw = self.sigma, self.twist
        self._inv_b1 = 1 / mpmath.mpf(tw.b1)
        self._bbar = {s: tw.bbar_k(s) for s in range(2, tw.cutoff + 1) if tw.bbar_k(s) != 0}
        # node terms: (nu0, q, s) -> (a, b) with
        #   a = i nu0 sigma[nu0, q, s]         multiplies e^{i nu0 (psi + h)} (Dh+)^q
        #   b = (q + 1) sigma[nu0, q + 1, s]   the d/dz part, weight (e^{-2 pi i omega n} - 1)
        terms = {}
        for (nu0, q, s), v in sig.table.items():
            if nu0 != 0:
                a = terms.setdefault((nu0, q, s), [0, 0])
                a[0] = 1j * nu0 * v
            if q >= 1:
                b = terms.setdefault((nu0, q - 1, s), [0, 0])
                b[1] = q * v
        self._terms = {key: tuple(ab) for key, ab in sorted(terms.items())}
        qmax = max((q for _, q, _ in self._terms), default=0)
        self._modes0 = sorted({nu0 for nu0, _, _ in self._terms})
        self._h: list[dict] = [{}]
        self._dplus: list[dict] = [{}]
        self._dminus: list[dict] = [{}]
        self._powp = _SeriesPowers(self._dplus)
        self._powm = _SeriesPowers(self._dminus)
        self._exp: dict[int, list[dict]] = {nu0: [{0: mpmath.mpc(1)}] for nu0 in self._modes0}
        self._conv_cache: dict[tuple, list[dict]] = {}
        self._divisors: dict[int, tuple] = {}
        self._qmax = qmax
        self._G: list[dict] = []  # d2 sigma(psi + h, 2 pi omega + Dh+) by order, unscaled

    def _divisor(self, n: int):
        """``(delta, delta_+, delta_-)`` at ``omega n``."""
        d = self._divisors.get(n)
        if d is None:
            sd = small_divisor(self.rotation, n)
            d = (sd.delta, sd.delta_plus, sd.delta_minus)
            self._divisors[n] = d
        return d

    def _back_phase(self, n: int):
        """``e^{-2 pi i omega n} - 1 = -delta_-(omega n)``."""
        if n == 0:
            return 0
        return -self._divisor(n)[2]

    def _exp_series(self, nu0: int, m: int) -> dict:
        """Order-``m`` coefficient of ``e^{i nu0 h}`` (needs ``h`` through order ``m``)."""
        rows = self._exp[nu0]
        while len(rows) <= m:
            mm = len(rows)
            acc = {}
            for j in range(1, mm + 1):
                _conv(self._h[j], rows[mm - j], acc, scale=1j * nu0 * j)
            inv = mpmath.mpf(1) / mm
            rows.append({n: v * inv for n, v in acc.items()})
        return rows[m]

    def _exp_abs_at(self, nu0: int, m: int, n: int):
        """Absolute mass of the last recursion step producing ``e^{i nu0 h}`` at (m, n)."""
        if m == 0:
            return mpmath.mpf(1) if n == 0 else mpmath.mpf(0)
        rows = self._exp[nu0]
        total = mpmath.mpf(0)
        for j in range(1, m + 1):
            total += j * _abs_at(self._h[j], rows[m - j], n)
        return total * abs(nu0) / m

    def _product(self, nu0: int, q: int, m: int) -> dict:
        """Order-``m`` coefficient of ``e^{i nu0 h} (Dh+)^q``."""
        if q == 0:
            return self._exp_series(nu0, m) if nu0 else ({0: mpmath.mpc(1)} if m == 0 else {})
        rows = self._conv_cache.setdefault((nu0, q), [])
        while len(rows) <= m:
            mm = len(rows)
            acc = {}
            for j in range(q, mm + 1):
                p = self._powp.get(q, j)
                if p:
                    e = self._exp_series(nu0, mm - j) if nu0 else ({0: mpmath.mpc(1)} if mm == j else {})
                    _conv(e, p, acc)
            rows.append(acc)
        return rows[m]

    def _product_abs_at(self, nu0: int, q: int, m: int, n: int):
        if q == 0:
            if nu0 == 0:
                return mpmath.mpf(1) if (m == 0 and n == 0) else mpmath.mpf(0)
            return self._exp_abs_at(nu0, m, n)
        total = mpmath.mpf(0)
        for j in range(q, m + 1):
            p = self._powp.get(q, j)
            e = self._exp_series(nu0, m - j) if nu0 else ({0: mpmath.mpc(1)} if m == j else {})
            total += _abs_at(e, p, n)
        return total

    def mode_bound(self, k: int) -> int:
        """Largest ``|nu|`` that can carry a nonzero ``h^(k)_nu``."""
        m = self.sigma.mode_cutoff
        reach = k * m
        return reach if self.mode_limit is None else min(reach, self.mode_limit)

    # -- the recursion --------------------------------------------------------

    def _rhs(self, k: int):
        """Right-hand side at order ``k`` plus the nu = 0 absolute term mass."""
        rhs: dict = {}
        mass = mpmath.mpf(0)
        g_acc: dict = {}  # d2 sigma part at order k-1, for H
        for (nu0, q, s), (a, b) in self._terms.items():
            m = k - 1 - s
            if m < 0:
                continue
            prod = self._product(nu0, q, m)
            for n, c in prod.items():
                mode = n + nu0
                coef = a
                if b:
                    coef = coef + b * self._back_phase(mode)
                    g_acc[mode] = g_acc.get(mode, 0) + b * c
                if coef:
                    rhs[mode] = rhs.get(mode, 0) + coef * self._inv_b1 * c
            if a:
                mass += abs(a * self._inv_b1) * self._product_abs_at(nu0, q, m, -nu0)
        for s, bs in self._bbar.items():
            if s > k:
                continue
            for pw, sign in ((self._powm, 1), (self._powp, -1)):
                part = pw.get(s, k)
                for n, v in part.items():
                    rhs[n] = rhs.get(n, 0) + sign * bs * v
                base_mass = mpmath.mpf(0)
                for i in range(1, k - s + 2):
                    base_mass += _abs_at(pw.base[i], pw.get(s - 1, k - i), 0)
                mass += abs(bs) * base_mass
        self._G.append(g_acc)
        return rhs, mass

    def _step(self):
        k = self.max_order + 1
        rhs, mass = self._rhs(k)
        r0 = abs(rhs.pop(0, 0))
        ratio = float(r0 / mass) if mass else (0.0 if r0 == 0 else math.inf)
        if r0 > self.zero_tol * mass:
            raise ZeroCompatibilityFailure(
                f"order {k}: |RHS_0| = {mpmath.nstr(r0, 5)} exceeds {self.zero_tol} x term mass "
                f"{mpmath.nstr(mass, 5)}"
            )
        limit = self.mode_bound(k)
        hk, dp, dm = {}, {}, {}
        for n in sorted(rhs):
            v = rhs[n]
            if v == 0 or abs(n) > limit:
                continue
            delta, dplus, dminus = self._divisor(n)
            c = v / delta
            hk[n] = c
            dp[n] = c * dplus
            dm[n] = c * dminus
        self._h.append(hk)
        self._dplus.append(dp)
        self._dminus.append(dm)
        self.coeffs[k] = hk
        self.zero_ratios[k] = ratio
        self.max_order = k

    def compute_order(self, k: int) -> "ConjugationSeries":
        k = check_int(k, "k", minimum=1, exc=InvalidOrder)
        if k != self.max_order + 1:
            raise InvalidOrder(f"order {k} requested but orders 1..{self.max_order} are held")
        with workprec(self.precision_bits):
            self._step()
        return self

    def extend(self, max_order: int) -> "ConjugationSeries":
        max_order = check_int(max_order, "max_order", minimum=1, exc=InvalidOrder)
        with workprec(self.precision_bits):
            while self.max_order < max_order:
                self._step()
        return self

    @classmethod
    def compute(cls, rotation, sigma=None, twist=None, max_order=10, **kwargs) -> "ConjugationSeries":
        return cls(rotation, sigma, twist, **kwargs).extend(max_order)

    # -- H ------------------------------------------------------------------

    def compute_H(self) -> "ConjugationSeries":
        """``H = b(2 pi omega + Dh-) - b0 + eps d2 sigma(psi - 2 pi omega + h(psi - 2 pi omega), ...)``."""
        with workprec(self.precision_bits):
            b1 = mpmath.mpf(self.twist.b1)
            for k in range(1, self.max_order + 1):
                if k in self.H_coeffs:
                    continue
                out = {}
                for n, v in self._dminus[k].items():
                    out[n] = b1 * v
                for s, bs in self._bbar.items():
                    for n, v in self._powm.get(s, k).items():
                        out[n] = out.get(n, 0) + b1 * bs * v
                # shifting psi -> psi - 2 pi omega multiplies mode n by e^{-2 pi i omega n}
                for n, v in self._G[k - 1].items():
                    out[n] = out.get(n, 0) + (1 + self._back_phase(n)) * v
                self.H_coeffs[k] = {n: v for n, v in out.items() if v != 0}
        return self

    # -- views --------------------------------------------------------------

    def coefficient(self, k: int, nu: int):
        if k > self.max_order:
            raise OrderUnavailable(f"order {k} not computed (max {self.max_order})")
        return self.coeffs[k].get(nu, mpmath.mpc(0))

    def items(self):
        """``(k, nu, value)`` triples sorted by order then mode."""
        for k in sorted(self.coeffs):
            for nu in sorted(self.coeffs[k]):
                yield k, nu, self.coeffs[k][nu]

    @property
    def is_general(self) -> bool:
        return not self.twist.is_identity


def compute_order(state: ConjugationSeries, k: int) -> ConjugationSeries:
    """Compute order ``k`` (orders ``1..k-1`` must already be held)."""
    return state.compute_order(k)


def compute_H(state: ConjugationSeries) -> ConjugationSeries:
    return state.compute_H()


# ---------------------------------------------------------------------------
# evaluation


class _Fourier:
    """Truncated series ``sum_k eps^k sum_nu c^(k)_nu e^{i nu psi}`` collapsed at fixed eps."""

    def __init__(self, table: dict, eps, order: int):
        collapsed = {}
        eps_k = mpmath.mpf(1)
        for k in range(1, order + 1):
            eps_k *= eps
            for n, v in table.get(k, {}).items():
                collapsed[n] = collapsed.get(n, 0) + eps_k * v
        self.coeffs = collapsed
        self.n_max = max((abs(n) for n in collapsed), default=0)

    def __call__(self, psi):
        if not self.coeffs:
            return mpmath.mpc(0)
        z = mpmath.expj(psi)
        zi = 1 / z
        total = self.coeffs.get(0, 0)
        zp, zm = mpmath.mpc(1), mpmath.mpc(1)
        for n in range(1, self.n_max + 1):
            zp *= z
            zm *= zi
            c = self.coeffs.get(n)
            if c is not None:
                total += c * zp
            c = self.coeffs.get(-n)
            if c is not None:
                total += c * zm
        return total


class _Sigma:
    """Point evaluation of sigma's derivatives from its Fourier-Taylor table."""

    def __init__(self, sigma: GeneratingFunctionData, eps):
        groups = {}
        for (nu, q, s), v in sigma.table.items():
            w = v * eps ** s if s else v
            groups.setdefault(nu, {})
            groups[nu][q] = groups[nu].get(q, 0) + w
        self.groups = groups

    def derivatives(self, x, u):
        """Return ``(d1, d2, d1d2, d2d2)`` of sigma at ``(x, 2 pi omega + u)``."""
        d1 = d2 = d12 = d22 = mpmath.mpc(0)
        for nu, poly in self.groups.items():
            e = mpmath.expj(nu * x)
            f = f1 = f2 = mpmath.mpc(0)
            for q, c in poly.items():
                f += c * u ** q
                if q >= 1:
                    f1 += q * c * u ** (q - 1)
                if q >= 2:
                    f2 += q * (q - 1) * c * u ** (q - 2)
            d1 += 1j * nu * e * f
            d2 += e * f1
            d12 += 1j * nu * e * f1
            d22 += e * f2
        return d1, d2, d12, d22


def _real(z, scale, tol_bits, what):
    tol = mpmath.mpf(2) ** (-tol_bits) * (1 + scale)
    if abs(mpmath.im(z)) > tol:
        raise AssemblyError(f"{what}: imaginary part {mpmath.nstr(mpmath.im(z), 5)} above tolerance")
    return mpmath.re(z)


def _check_order(state: ConjugationSeries, K: int):
    K = check_int(K, "K", minimum=0, exc=OrderUnavailable)
    if K > state.max_order:
        raise OrderUnavailable(f"order {K} requested, series computed to {state.max_order}")
    return K


class _Curve:
    def __init__(self, state: ConjugationSeries, eps, K):
        state.compute_H()
        self.state = state
        self.eps = mpmath.mpf(eps)
        self.h = _Fourier(state.coeffs, self.eps, K)
        self.H = _Fourier(state.H_coeffs, self.eps, K)
        self.y0 = state.twist.base_value(state.rotation.value)
        self.tol_bits = state.precision_bits // 2

    def point(self, psi):
        x = psi + _real(self.h(psi), abs(psi), self.tol_bits, "h")
        y = self.y0 + _real(self.H(psi), abs(self.y0), self.tol_bits, "H")
        return x, y


def evaluate_curve(state: ConjugationSeries, eps, K: int, psi_grid: Iterable) -> list[tuple]:
    """Points ``(x(psi), y(psi))`` of the order-``K`` truncated invariant curve."""
    K = _check_order(state, K)
    with workprec(state.precision_bits):
        curve = _Curve(state, eps, K)
        return [curve.point(mpmath.mpf(p)) for p in psi_grid]


@dataclass
class ResidualReport:
    order_used: int
    epsilons: list
    residual_sup: list
    fitted_slope: float
    grid_size: int

    def to_dict(self):
        return {
            "order_used": self.order_used,
            "epsilons": [mpmath.nstr(e, 17) for e in self.epsilons],
            "residual_sup": [mpmath.nstr(r, 17) for r in self.residual_sup],
            "fitted_slope": self.fitted_slope,
            "grid_size": self.grid_size,
        }


def _defect(state: ConjugationSeries, curve: _Curve, sig: _Sigma, psi):
    two_pi_omega = 2 * mpmath.pi * state.rotation.value
    h0 = curve.h(psi)
    hp = curve.h(psi + two_pi_omega)
    hm = curve.h(psi - two_pi_omega)
    dp, dm = hp - h0, h0 - hm
    tw = state.twist
    lhs = tw(dp) - tw(dm)
    d1, d2, _, _ = sig.derivatives(psi + h0, dp)
    _, d2m, _, _ = sig.derivatives(psi - two_pi_omega + hm, dm)
    return lhs - curve.eps * (d1 - d2 + d2m)


def functional_residual(state: ConjugationSeries, eps_list: Sequence, K: int,
                        grid_size: int) -> ResidualReport:
    """Sup-norm defect of the functional equation for the order-``K`` truncation.

    Fits ``log(residual)`` against ``log(eps)`` by least squares; the slope
    should be close to ``K + 1``.
    """
    K = _check_order(state, K)
    grid_size = check_int(grid_size, "grid_size", minimum=1)
    with workprec(state.precision_bits):
        eps_vals = [mpmath.mpf(e) for e in eps_list]
    if any(b <= a for a, b in zip(eps_vals, eps_vals[1:])):
        raise ConfigurationError("eps_list must be strictly increasing")
    max_mode = state.mode_bound(K) if K else state.sigma.mode_cutoff
    if grid_size < 4 * max(1, max_mode):
        raise GridTooCoarse(f"grid_size {grid_size} < 4 x max mode {max_mode}")
    sups = []
    with workprec(state.precision_bits):
        psis = [2 * mpmath.pi * j / grid_size for j in range(grid_size)]
        for eps in eps_vals:
            curve = _Curve(state, eps, K)
            sig = _Sigma(state.sigma, eps)
            sups.append(max(abs(_defect(state, curve, sig, p)) for p in psis))
    slope = float("nan")
    if len(eps_vals) >= 2 and all(s > 0 for s in sups) and all(e > 0 for e in eps_vals):
        xs = np.array([float(mpmath.log(e)) for e in eps_vals])
        ys = np.array([float(mpmath.log(s)) for s in sups])
        slope = float(np.polyfit(xs, ys, 1)[0])
    elif len(eps_vals) < 2:
        raise FitImpossible("a log-log fit needs at least two eps values")
    return ResidualReport(K, eps_vals, sups, slope, grid_size)


@dataclass
class OrbitReport:
    max_deviation: mpmath.mpf
    one_step_residual: mpmath.mpf
    steps: int

    def to_dict(self):
        return {
            "max_deviation": mpmath.nstr(self.max_deviation, 17),
            "one_step_residual": mpmath.nstr(self.one_step_residual, 17),
            "steps": self.steps,
        }


def _map_step(state: ConjugationSeries, sig: _Sigma, eps, x, y):
    """One step of the lifted twist map defined by the generating function."""
    tw = state.twist
    two_pi_omega = 2 * mpmath.pi * state.rotation.value
    b0 = tw.base_value(state.rotation.value)
    # solve y = b(z) - eps (d1 - d2)(x, z) for u = z - 2 pi omega
    u = (y - b0) / tw.b1
    tol = mpmath.mpf(2) ** (-state.precision_bits + 8) * (1 + abs(u))
    for _ in range(100):
        d1, d2, d12, d22 = sig.derivatives(x, u)
        f = b0 + tw(u) - eps * mpmath.re(d1 - d2) - y
        fp = tw.derivative(u) - eps * mpmath.re(d12 - d22)
        step = f / fp
        u -= step
        if abs(step) <= tol:
            break
    _, d2, _, _ = sig.derivatives(x, u)
    x1 = x + two_pi_omega + u
    y1 = b0 + tw(u) + eps * mpmath.re(d2)
    return x1, y1


def map_orbit_check(state: ConjugationSeries, eps, K: int, psi0=0, steps: int = 1000,
                    residual_samples: int = 64) -> OrbitReport:
    """Iterate the actual map from the curve point at ``psi0``; compare with the rotated curve.

    The deviation is measured in the lift (no reduction mod 2 pi), in the
    max norm over ``(x, y)``.  ``one_step_residual`` is the largest
    ``|Phi(C(psi)) - C(psi + 2 pi omega)|`` over a uniform ``psi`` grid.
    """
    K = _check_order(state, K)
    steps = check_int(steps, "steps", minimum=0)
    with workprec(state.precision_bits):
        eps = mpmath.mpf(eps)
        curve = _Curve(state, eps, K)
        sig = _Sigma(state.sigma, eps)
        two_pi_omega = 2 * mpmath.pi * state.rotation.value
        psi = mpmath.mpf(psi0)
        x, y = curve.point(psi)
        worst = mpmath.mpf(0)
        for j in range(1, steps + 1):
            x, y = _map_step(state, sig, eps, x, y)
            cx, cy = curve.point(psi + j * two_pi_omega)
            worst = max(worst, abs(x - cx), abs(y - cy))
        one_step = mpmath.mpf(0)
        for i in range(residual_samples):
            p = 2 * mpmath.pi * i / residual_samples
            px, py = curve.point(p)
            nx, ny = _map_step(state, sig, eps, px, py)
            cx, cy = curve.point(p + two_pi_omega)
            one_step = max(one_step, abs(nx - cx), abs(ny - cy))
    return OrbitReport(worst, one_step, steps)


# ---------------------------------------------------------------------------
# reports and export


def _dec(x, bits):
    return mpmath.nstr(x, int(bits * 0.30103) + 3, strip_zeros=False, min_fixed=1, max_fixed=0)


def coefficients_to_csv(state: ConjugationSeries, fh=None, which: str = "h") -> str:
    """Write ``k,nu,re,im`` rows at full working precision; returns the text."""
    table = state.coeffs if which == "h" else state.compute_H().H_coeffs
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["k", "nu", "re", "im"])
    bits = state.precision_bits
    with workprec(bits):
        for k in sorted(table):
            for nu in sorted(table[k]):
                v = table[k][nu]
                writer.writerow([k, nu, _dec(mpmath.re(v), bits), _dec(mpmath.im(v), bits)])
    text = buf.getvalue()
    if fh is not None:
        fh.write(text)
    return text


def coefficients_from_csv(text: str, precision_bits: int = DEFAULT_PRECISION_BITS) -> dict:
    """Parse a ``k,nu,re,im`` table back into ``{k: {nu: mpc}}``."""
    out: dict = {}
    with workprec(precision_bits):
        for row in csv.DictReader(io.StringIO(text)):
            out.setdefault(int(row["k"]), {})[int(row["nu"])] = mpmath.mpc(
                mpmath.mpf(row["re"]), mpmath.mpf(row["im"])
            )
    return out


def invariant_summary(state: ConjugationSeries) -> dict:
    """Zero-compatibility, reality, parity and support diagnostics over all orders."""
    with workprec(state.precision_bits):
        reality = mpmath.mpf(0)
        support_violations = 0
        m = state.sigma.mode_cutoff
        for k, nu, v in state.items():
            partner = state.coeffs[k].get(-nu, mpmath.mpc(0))
            rel = abs(partner - mpmath.conj(v)) / max(abs(v), mpmath.mpf(2) ** -state.precision_bits)
            reality = max(reality, rel)
            if abs(nu) > k * m:
                support_violations += 1
        return {
            "max_order": state.max_order,
            "zero_compatibility_max_ratio": max(state.zero_ratios.values(), default=0.0),
            "reality_max_defect": float(reality),
            "support_violations": support_violations,
            "tail_estimate": float(state.tail_estimate),
        }


# ---------------------------------------------------------------------------
# estimator front end


class LindstedtSeries(BaseEstimator):
    """Scikit-learn style wrapper: ``fit`` computes the series, ``transform`` samples the curve.

    Parameters
    ----------
    max_order : int
        Highest perturbation order computed.
    eps : float
        Perturbation strength used by :meth:`transform`.
    precision_bits : int or None
        Working precision; defaults to the rotation number's.
    zero_tol : float
        Relative tolerance of the nu = 0 compatibility check.
    mode_limit : int or None
        Optional Fourier cutoff for models given with decay metadata.

    Attributes
    ----------
    series_ : ConjugationSeries
    coef_ : dict
        ``{k: {nu: mpc}}``, alias of ``series_.coeffs``.
    """

    def __init__(self, max_order=10, eps=0.0, precision_bits=None, zero_tol=1e-12, mode_limit=None):
        self.max_order = max_order
        self.eps = eps
        self.precision_bits = precision_bits
        self.zero_tol = zero_tol
        self.mode_limit = mode_limit

    def fit(self, rotation: RotationNumber, sigma: GeneratingFunctionData | None = None,
            twist: TwistData | None = None):
        if not isinstance(rotation, RotationNumber):
            raise ConfigurationError("fit expects a RotationNumber")
        check_int(self.max_order, "max_order", minimum=1, exc=InvalidOrder)
        self.series_ = ConjugationSeries.compute(
            rotation, sigma, twist, self.max_order,
            precision_bits=self.precision_bits, zero_tol=self.zero_tol, mode_limit=self.mode_limit,
        ).compute_H()
        self.coef_ = self.series_.coeffs
        self.zero_ratios_ = dict(self.series_.zero_ratios)
        return self

    def transform(self, psi):
        """Return an ``(n, 2)`` float array of curve points ``(x, y)`` at the given angles."""
        check_is_fitted(self, "series_")
        psi = np.atleast_1d(np.asarray(psi, dtype=float))
        pts = evaluate_curve(self.series_, self.eps, self.max_order, psi.tolist())
        return np.array([[float(x), float(y)] for x, y in pts])

    def residual(self, eps_list, grid_size=None) -> ResidualReport:
        check_is_fitted(self, "series_")
        if grid_size is None:
            grid_size = 4 * max(1, self.series_.mode_bound(self.max_order)) + 4
        return functional_residual(self.series_, eps_list, self.max_order, grid_size)
