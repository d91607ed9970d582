"""Radius of convergence from coefficient growth, and its relation to the Bryuno sum."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import mpmath
import numpy as np
from scipy import stats
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_int, check_positive, check_window, workprec
from .exceptions import ConfigurationError, FitImpossible, WindowTooShort
from .model import GeneratingFunctionData, standard_map_model
from .rotation import RotationNumber, bryuno_depth_for_tolerance, bryuno_sum, make_rotation
from .series import ConjugationSeries

__all__ = [
    "RadiusEstimate",
    "BryunoCorrelation",
    "RadiusEstimator",
    "coefficient_norms",
    "estimate_radius",
    "bryuno_correlation",
    "study_family",
    "WIDE_FAMILY",
    "NOBLE_FAMILY",
    "MIN_WINDOW_POINTS",
]

MIN_WINDOW_POINTS = 5

# (id, preperiod, periodic tail).  Log-spaced partial quotients so the Bryuno
# sums spread over ~1.7 units, well beyond the O(1) scatter of log rho.
WIDE_FAMILY = (
    ("tail6", (), (6,)),
    ("tail8", (), (8,)),
    ("tail12", (), (12,)),
    ("tail16", (), (16,)),
    ("tail24", (), (24,)),
    ("tail32", (), (32,)),
    ("tail48", (), (48,)),
    ("tail64", (), (64,)),
    ("16-golden", (16,), (1,)),
    ("32-golden", (32,), (1,)),
)

NOBLE_FAMILY = (
    ("golden", (), (1,)),
    ("silver", (), (2,)),
    ("tail3", (), (3,)),
    ("tail4", (), (4,)),
    ("tail1-2", (), (1, 2)),
    ("tail1-3", (), (1, 3)),
    ("tail2-1-1", (), (2, 1, 1)),
    ("2-golden", (2,), (1,)),
    ("3-golden", (3,), (1,)),
    ("4-golden", (4,), (1,)),
)


def study_family(members=WIDE_FAMILY, precision_bits: int = 256) -> list[RotationNumber]:
    return [make_rotation(cf=list(pre), periodic_tail=list(tail), precision_bits=precision_bits, label=name)
            for name, pre, tail in members]


def coefficient_norms(state: ConjugationSeries, xi1=0) -> dict[int, mpmath.mpf]:
    """``n_k = max_nu e^{xi1 |nu|} |h^(k)_nu|`` for every order with nonzero coefficients."""
    check_positive(xi1, "xi1", allow_zero=True)
    out = {}
    with workprec(state.precision_bits):
        w = mpmath.mpf(xi1)
        for k in sorted(state.coeffs):
            row = state.coeffs[k]
            if not row:
                continue
            out[k] = max(mpmath.exp(w * abs(nu)) * abs(v) for nu, v in row.items())
    return out


@dataclass
class RadiusEstimate:
    per_order_norms: dict
    window: tuple
    log_norm_slope: float
    intercept: float
    rho_hat: float
    fit_residuals: dict

    def to_dict(self):
        return {
            "per_order_norms": {str(k): mpmath.nstr(v, 17) for k, v in self.per_order_norms.items()},
            "window": list(self.window),
            "slope": self.log_norm_slope,
            "intercept": self.intercept,
            "rho_hat": self.rho_hat,
            "fit_residuals": {str(k): r for k, r in self.fit_residuals.items()},
        }


def estimate_radius(norms: dict, window: tuple | None = None) -> RadiusEstimate:
    """Least-squares fit of ``log n_k`` against ``k``; ``rho_hat = exp(-slope)``.

    ``window`` is inclusive; orders with no recorded norm are simply absent.
    """
    if window is None:
        window = (min(norms), max(norms)) if norms else (1, 1)
    lo, hi = check_window(window)
    ks = [k for k in sorted(norms) if lo <= k <= hi and norms[k] > 0]
    if len(ks) < MIN_WINDOW_POINTS:
        raise WindowTooShort(f"window {window} holds {len(ks)} recorded orders, need {MIN_WINDOW_POINTS}")
    x = np.array(ks, dtype=float)
    y = np.array([float(mpmath.log(norms[k])) for k in ks])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return RadiusEstimate(
        per_order_norms={k: norms[k] for k in ks},
        window=(lo, hi),
        log_norm_slope=float(slope),
        intercept=float(intercept),
        rho_hat=math.exp(-slope),
        fit_residuals={k: float(r) for k, r in zip(ks, resid)},
    )


class RadiusEstimator(BaseEstimator):
    """Root-test estimate of the eps-radius of the Lindstedt series.

    ``fit(rotation, sigma)`` computes the series to ``max_order`` and fits
    the log-norm growth over ``window``.
    """

    def __init__(self, max_order=40, window=(10, 40), xi1=0.0, precision_bits=None):
        self.max_order = max_order
        self.window = window
        self.xi1 = xi1
        self.precision_bits = precision_bits

    def fit(self, rotation: RotationNumber, sigma: GeneratingFunctionData | None = None):
        lo, hi = check_window(self.window)
        max_order = check_int(self.max_order, "max_order", minimum=1)
        if hi > max_order:
            raise ConfigurationError(f"window end {hi} beyond max_order {max_order}")
        self.series_ = ConjugationSeries.compute(
            rotation, sigma, None, max_order, precision_bits=self.precision_bits
        )
        self.norms_ = coefficient_norms(self.series_, self.xi1)
        self.estimate_ = estimate_radius(self.norms_, (lo, hi))
        self.rho_hat_ = self.estimate_.rho_hat
        return self

    def predict(self, rotations):
        """``log rho_hat`` for each rotation number (fits a clone per input)."""
        check_is_fitted(self, "estimate_")
        return np.array([math.log(RadiusEstimator(**self.get_params()).fit(r).rho_hat_) for r in rotations])


@dataclass
class BryunoCorrelation:
    points: list
    fitted_slope: float
    fitted_intercept: float
    r_squared: float
    spearman: float
    window: tuple = field(default=(10, 40))

    def to_dict(self):
        return {
            "fitted_slope": self.fitted_slope,
            "fitted_intercept": self.fitted_intercept,
            "r_squared": self.r_squared,
            "spearman": self.spearman,
            "window": list(self.window),
            "n_points": len(self.points),
        }

    def csv_rows(self):
        yield ["omega_id", "bryuno", "bryuno_tail", "log_rho_hat"]
        for p in self.points:
            yield [p["omega_id"], p["bryuno"], p["bryuno_tail"], p["log_rho_hat"]]


def _study_point(args):
    rotation, table, bits, max_order, window, tail_tol = args
    sigma = GeneratingFunctionData(table, None, bits)
    est = RadiusEstimator(max_order, window, 0.0, bits).fit(rotation, sigma)
    depth = bryuno_depth_for_tolerance(rotation, tail_tol)
    data = bryuno_sum(rotation, depth)
    with workprec(bits):
        return {
            "omega_id": rotation.label or mpmath.nstr(rotation.value, 20),
            "bryuno": mpmath.nstr(data.value, 20),
            "bryuno_tail": mpmath.nstr(data.tail_bound, 6),
            "bryuno_depth": depth,
            "log_rho_hat": repr(math.log(est.rho_hat_)),
            "rho_hat": est.rho_hat_,
        }


def bryuno_correlation(omegas: Sequence[RotationNumber], sigma: GeneratingFunctionData | None = None,
                       max_order: int = 40, window=(10, 40), *, jobs: int = 1,
                       tail_tol=0.01) -> BryunoCorrelation:
    """Fit ``log rho_hat = slope * B + intercept`` over a family of rotation numbers.

    ``B`` is the Bryuno partial sum at the first depth whose tail bound is
    below ``tail_tol``.  Each member runs independently (in ``jobs``
    processes); results keep the input order.
    """
    omegas = list(omegas)
    if len(omegas) < 2:
        raise FitImpossible("a Bryuno-radius fit needs at least two rotation numbers")
    jobs = check_int(jobs, "jobs", minimum=1)
    bits = max(r.precision_bits for r in omegas)
    sigma = sigma if sigma is not None else standard_map_model(bits)
    table = dict(sigma.table)
    tasks = [(r, table, r.precision_bits, max_order, tuple(window), tail_tol) for r in omegas]
    if jobs == 1:
        points = [_study_point(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            points = list(ex.map(_study_point, tasks))
    b = np.array([float(p["bryuno"]) for p in points])
    lr = np.array([float(p["log_rho_hat"]) for p in points])
    fit = stats.linregress(b, lr)
    rho = stats.spearmanr(b, lr).statistic
    return BryunoCorrelation(points, float(fit.slope), float(fit.intercept), float(fit.rvalue ** 2),
                             float(rho), tuple(window))
