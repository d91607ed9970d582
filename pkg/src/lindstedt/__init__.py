"""Lindstedt series for invariant curves of exact symplectic twist maps.

Modules:

* :mod:`lindstedt.rotation` - continued fractions, Bryuno sums, small divisors
* :mod:`lindstedt.model` - generating-function tables and twist data
* :mod:`lindstedt.series` - order-by-order coefficients, curve, residuals
* :mod:`lindstedt.trees` - tree-expansion oracle and cancellation checks
* :mod:`lindstedt.radius` - radius estimates and the Bryuno correlation
"""

from .exceptions import *  # noqa: F401,F403
from .model import (
    GeneratingFunctionData,
    TwistData,
    dump_model,
    load_model,
    quadratic_twist,
    standard_map_model,
    twist_from_frequency_map,
)
from .radius import RadiusEstimator, bryuno_correlation, coefficient_norms, estimate_radius
from .rotation import (
    RotationNumber,
    bryuno_function,
    bryuno_sum,
    make_rotation,
    rotation_from_dict,
    small_divisor,
)
from .series import (
    ConjugationSeries,
    LindstedtSeries,
    evaluate_curve,
    functional_residual,
    map_orbit_check,
)
from .trees import cancellation_check, enumerate_trees, oracle_coefficient, tree_value

__version__ = "0.1.0"
