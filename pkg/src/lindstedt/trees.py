"""Brute-force tree expansion of the Lindstedt coefficients.

A tree is a rooted tree whose nodes carry a mode ``nu_v`` (and, for
eps-dependent models, an order label ``s_v``; for general twists a kind
``alpha_v``).  Every non-root line carries a sign ``beta``.  Lines entering
a node with the same sign are ordered, lines with different signs are not:
this is the counting under which the ``1/(p! q!)`` node factors reproduce
the order-by-order recursion exactly.

Values are computed from propagators ``1/delta(omega nu_l)`` and node
factors; summing values over all trees of order ``k`` and root momentum
``nu`` gives ``h^(k)_nu``, and the sum over root momentum zero vanishes.
None of this shares code with :mod:`lindstedt.series`; it exists to check it.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator

import mpmath

from ._validation import check_int, workprec
from .exceptions import ConfigurationError, OrderCapExceeded
from .model import GeneratingFunctionData, TwistData, standard_map_model
from .rotation import RotationNumber, small_divisor

__all__ = [
    "Tree",
    "TreeValue",
    "LINEAR_CAP",
    "GENERAL_CAP",
    "enumerate_trees",
    "enumerate_trees_bruteforce",
    "tree_value",
    "oracle_coefficient",
    "cancellation_check",
    "zero_sum_identities",
]

LINEAR_CAP = 5
GENERAL_CAP = 3


@dataclass(frozen=True)
class Tree:
    """A node together with the subtrees entering it.

    ``plus`` and ``minus`` hold the subtrees whose lines carry ``beta = +``
    and ``beta = -`` respectively.  The momentum of the line leaving this
    node is ``mode`` plus the momenta of all subtrees.
    """

    mode: int
    plus: tuple = ()
    minus: tuple = ()
    alpha: int = 0
    s: int = 0
    momentum: int = field(init=False, compare=False)
    order: int = field(init=False, compare=False)
    size: int = field(init=False, compare=False)

    def __post_init__(self):
        kids = self.plus + self.minus
        object.__setattr__(self, "momentum", self.mode + sum(c.momentum for c in kids))
        own = (1 + self.s) if self.alpha == 0 else 0
        object.__setattr__(self, "order", own + sum(c.order for c in kids))
        object.__setattr__(self, "size", 1 + sum(c.size for c in kids))

    @property
    def p(self) -> int:
        return len(self.plus)

    @property
    def q(self) -> int:
        return len(self.minus)

    def nodes(self) -> Iterator["Tree"]:
        yield self
        for c in self.plus + self.minus:
            yield from c.nodes()

    def lines(self) -> Iterator[tuple[int, str]]:
        """``(momentum, beta)`` for every non-root line."""
        for c in self.plus:
            yield c.momentum, "+"
            yield from c.lines()
        for c in self.minus:
            yield c.momentum, "-"
            yield from c.lines()

    def key(self) -> tuple:
        """Nested-tuple form, used for determinism and set comparison."""
        return (self.alpha, self.mode, self.s,
                tuple(c.key() for c in self.plus), tuple(c.key() for c in self.minus))

    def __str__(self):
        tag = f"{self.mode}" if self.alpha == 0 else "B"
        if self.s:
            tag += f"^{self.s}"
        kids = [f"+{c}" for c in self.plus] + [f"-{c}" for c in self.minus]
        return tag + (f"({', '.join(kids)})" if kids else "")


@dataclass
class TreeValue:
    value: mpmath.mpc
    factor_trace: list | None = None

    def recompute(self):
        """Product of the traced factors (must reproduce ``value``)."""
        out = mpmath.mpc(1)
        for _, _, f in self.factor_trace or ():
            out *= f
        return out


class _Labels:
    """Admissible node labels for one (model, twist) pair."""

    def __init__(self, sigma: GeneratingFunctionData, twist: TwistData, general: bool, prune: bool):
        self.sigma = sigma
        self.twist = twist
        self.general = general
        self.prune = prune
        self.max_q = sigma.taylor_cutoff
        self.node_labels = sorted({(nu, s) for nu, _, s in sigma.table})
        self.max_mode = max((abs(nu) for nu, _ in self.node_labels), default=0)
        self.bbar = [j for j in range(2, twist.cutoff + 1) if twist.bbar_k(j) != 0 or not prune]
        if not general:
            self.bbar = []

    def alpha0_allowed(self, nu: int, s: int, q: int) -> bool:
        if q > self.max_q:
            return False
        if not self.prune:
            return True
        first = nu != 0 and self.sigma.get(nu, q, s) != 0
        second = self.sigma.get(nu, q + 1, s) != 0
        return first or second


def _check_cap(k: int, general: bool, cap: int | None):
    limit = cap if cap is not None else (GENERAL_CAP if general else LINEAR_CAP)
    if k > limit:
        raise OrderCapExceeded(f"order {k} exceeds the enumeration cap {limit}")


def _resolve(sigma, twist, general):
    sigma = sigma if sigma is not None else standard_map_model()
    twist = twist if twist is not None else TwistData()
    if general is None:
        general = not twist.is_identity
    return sigma, twist, bool(general)


def enumerate_trees(k: int, nu: int, sigma: GeneratingFunctionData | None = None,
                    twist: TwistData | None = None, general: bool | None = None, *,
                    prune: bool = True, cap: int | None = None) -> list[Tree]:
    """All trees of order ``k`` with root momentum ``nu``, in a deterministic order.

    With ``prune`` (default) trees containing a node whose factor vanishes
    identically (for every momentum) are skipped; they contribute zero.
    """
    k = check_int(k, "k", minimum=1)
    nu = check_int(nu, "nu")
    sigma, twist, general = _resolve(sigma, twist, general)
    _check_cap(k, general, cap)
    labels = _Labels(sigma, twist, general, prune)

    @lru_cache(maxsize=None)
    def trees(order: int, mom: int) -> tuple:
        out = []
        for nu0, s in labels.node_labels:
            rest = order - 1 - s
            if rest < 0:
                continue
            target = mom - nu0
            for q in range(0, min(rest, labels.max_q) + 1):
                if not labels.alpha0_allowed(nu0, s, q):
                    continue
                for p in range(0, rest - q + 1):
                    for o_minus in range(q, rest - p + 1):
                        o_plus = rest - o_minus
                        if (p == 0) != (o_plus == 0) or (q == 0) != (o_minus == 0):
                            continue
                        reach = o_plus * labels.max_mode
                        for m_plus in range(-reach, reach + 1):
                            minus_side = seqs(q, o_minus, target - m_plus)
                            if not minus_side:
                                continue
                            for plus in seqs(p, o_plus, m_plus):
                                for minus in minus_side:
                                    out.append(Tree(nu0, plus, minus, 0, s))
        if labels.general:
            for j in labels.bbar:
                for kids in seqs(j, order, mom):
                    out.append(Tree(0, (), kids, 1, 0))
                    out.append(Tree(0, kids, (), 1, 0))
        return tuple(out)

    @lru_cache(maxsize=None)
    def seqs(n: int, order: int, mom: int) -> tuple:
        """Ordered n-tuples of subtrees (nonzero momenta) with total order and momentum."""
        if n == 0:
            return ((),) if order == 0 and mom == 0 else ()
        if order < n:
            return ()
        out = []
        reach = order * labels.max_mode
        for o1 in range(1, order - n + 2):
            r1 = o1 * labels.max_mode
            for m1 in range(-r1, r1 + 1):
                if m1 == 0 or abs(mom - m1) > reach:
                    continue
                heads = trees(o1, m1)
                if not heads:
                    continue
                tails = seqs(n - 1, order - o1, mom - m1)
                for h in heads:
                    for t in tails:
                        out.append((h,) + t)
        return tuple(out)

    result = list(trees(k, nu))
    result.sort(key=lambda t: repr(t.key()))
    return result


def enumerate_trees_bruteforce(k: int, nu: int, sigma: GeneratingFunctionData | None = None,
                               twist: TwistData | None = None, general: bool | None = None, *,
                               prune: bool = True, cap: int | None = None) -> list[Tree]:
    """Independent generator: label every recursive tree, then quotient.

    Builds all parent arrays ``parent[i] < i`` on up to ``2k - 1`` nodes,
    every node labelling and every sign assignment, keeps the admissible
    ones and reduces them to the nested form (children ordered by node index
    inside each sign group).  Many labellings give the same tree; the set
    removes duplicates.  Slow, meant for small ``k`` only.
    """
    k = check_int(k, "k", minimum=1)
    sigma, twist, general = _resolve(sigma, twist, general)
    _check_cap(k, general, cap)
    labels = _Labels(sigma, twist, general, prune)
    node_choices = [(0, nu0, s) for nu0, s in labels.node_labels]
    if general:
        node_choices.append((1, 0, 0))
    found = {}
    max_nodes = 2 * k - 1 if general else k
    for n in range(1, max_nodes + 1):
        for parents in _parent_arrays(n):
            children = [[] for _ in range(n)]
            for i in range(1, n):
                children[parents[i]].append(i)
            for lab in itertools.product(node_choices, repeat=n):
                if sum(1 + s for a, _, s in lab if a == 0) != k:
                    continue
                if any(a == 1 and len(children[i]) < 2 for i, (a, _, _) in enumerate(lab)):
                    continue
                for betas in itertools.product("+-", repeat=n - 1):
                    tree = _build(0, children, lab, ("",) + betas)
                    if tree is None or tree.momentum != nu:
                        continue
                    if _admissible(tree, labels):
                        found[tree.key()] = tree
    return [found[key] for key in sorted(found, key=repr)]


def _parent_arrays(n):
    for tail in itertools.product(*[range(i) for i in range(1, n)]):
        yield (None,) + tail


def _build(i, children, lab, betas):
    alpha, mode, s = lab[i]
    plus, minus = [], []
    for c in children[i]:
        sub = _build(c, children, lab, betas)
        if sub is None or sub.momentum == 0:
            return None
        (plus if betas[c] == "+" else minus).append(sub)
    return Tree(mode, tuple(plus), tuple(minus), alpha, s)


def _admissible(tree: Tree, labels: _Labels) -> bool:
    for node in tree.nodes():
        if node.alpha == 1:
            if node.p and node.q:
                return False
            if node.p + node.q not in labels.bbar:
                return False
        elif not labels.alpha0_allowed(node.mode, node.s, node.q):
            return False
    return True


# ---------------------------------------------------------------------------
# values


class _Evaluator:
    def __init__(self, rotation: RotationNumber, sigma, twist, general):
        self.rotation = rotation
        self.sigma = sigma
        self.twist = twist
        self.general = general
        self.inv_b1 = 1 / mpmath.mpf(twist.b1)
        self._div = {}

    def div(self, n):
        d = self._div.get(n)
        if d is None:
            d = small_divisor(self.rotation, n)
            self._div[n] = d
        return d

    def node_factor(self, node: Tree):
        if node.alpha == 1:
            if node.q:
                out = mpmath.mpf(self.twist.bbar_k(node.q))
                for c in node.minus:
                    out *= self.div(c.momentum).delta_minus
            else:
                out = -mpmath.mpf(self.twist.bbar_k(node.p))
                for c in node.plus:
                    out *= self.div(c.momentum).delta_plus
            return out
        nu, p, q, s = node.mode, node.p, node.q, node.s
        inu = mpmath.mpc(0, nu)
        first = inu ** (p + 1) * self.sigma.get(nu, q, s)
        second = mpmath.mpc(0)
        if node.momentum != 0:
            back = -self.div(node.momentum).delta_minus  # e^{-2 pi i omega nu_l} - 1
            second = back * (inu ** p if p else 1) * (q + 1) * self.sigma.get(nu, q + 1, s)
        out = (first + second) / math.factorial(p) * self.inv_b1
        for c in node.minus:
            out *= self.div(c.momentum).delta_plus
        return out

    def value(self, tree: Tree, trace: list | None):
        out = mpmath.mpc(1)
        stack = [(tree, True)]
        while stack:
            node, is_root = stack.pop()
            a = self.node_factor(node)
            out *= a
            if trace is not None:
                trace.append(("node", str(node), a))
            m = node.momentum
            if m == 0:
                if not is_root:
                    raise ConfigurationError(f"internal line with zero momentum in {tree}")
                g = mpmath.mpf(1)
            else:
                g = 1 / self.div(m).delta
            out *= g
            if trace is not None:
                trace.append(("line", m, g))
            stack.extend((c, False) for c in reversed(node.plus + node.minus))
        return out


def tree_value(tree: Tree, rotation: RotationNumber, sigma: GeneratingFunctionData | None = None,
               twist: TwistData | None = None, general: bool | None = None, *,
               trace: bool = False) -> TreeValue:
    """Product of node factors and propagators of one tree."""
    sigma, twist, general = _resolve(sigma, twist, general)
    with workprec(rotation.precision_bits):
        ev = _Evaluator(rotation, sigma, twist, general)
        steps = [] if trace else None
        return TreeValue(ev.value(tree, steps), steps)


def oracle_coefficient(k: int, nu: int, rotation: RotationNumber,
                       sigma: GeneratingFunctionData | None = None, twist: TwistData | None = None,
                       general: bool | None = None, *, cap: int | None = None):
    """``h^(k)_nu`` as a sum of tree values."""
    sigma, twist, general = _resolve(sigma, twist, general)
    trees = enumerate_trees(k, nu, sigma, twist, general, cap=cap)
    with workprec(rotation.precision_bits):
        ev = _Evaluator(rotation, sigma, twist, general)
        return mpmath.fsum(ev.value(t, None) for t in trees)


def cancellation_check(k: int, rotation: RotationNumber, sigma: GeneratingFunctionData | None = None,
                       twist: TwistData | None = None, general: bool | None = None, *,
                       cap: int | None = None):
    """Signed sum and absolute mass of tree values at root momentum zero."""
    sigma, twist, general = _resolve(sigma, twist, general)
    trees = enumerate_trees(k, 0, sigma, twist, general, cap=cap)
    with workprec(rotation.precision_bits):
        ev = _Evaluator(rotation, sigma, twist, general)
        vals = [ev.value(t, None) for t in trees]
        return mpmath.fsum(vals), mpmath.fsum(abs(v) for v in vals)


# ---------------------------------------------------------------------------
# exponential identities for zero-sum vectors


def _identity_residuals(x):
    # expm1 keeps small entries accurate
    a = [-mpmath.expm1(-t) for t in x]
    b = [mpmath.expm1(t) for t in x]
    lhs1, rhs1 = mpmath.fprod(a), mpmath.fprod(b)
    scale1 = abs(lhs1) + abs(rhs1)
    r1 = abs(lhs1 - rhs1) / scale1 if scale1 else mpmath.mpf(0)

    terms_l, terms_r = [], []
    for i, t in enumerate(x):
        terms_l.append(t * mpmath.fprod(a[:i] + a[i + 1:]))
        terms_r.append(t * mpmath.fprod(b[:i] + b[i + 1:]))
    scale2 = mpmath.fsum(abs(v) for v in terms_l + terms_r)
    r2 = abs(mpmath.fsum(terms_l) - mpmath.fsum(terms_r)) / scale2 if scale2 else mpmath.mpf(0)
    return r1, r2


def zero_sum_identities(n: int, trials: int = 1000, seed: int = 20240601, *,
                          scale: float = 3.0, precision_bits: int = 113) -> float:
    """Largest relative residual of the two zero-sum exponential identities.

    Draws ``trials`` vectors with ``n - 1`` uniform entries in
    ``[-scale, scale]`` and a last entry balancing the sum to zero, then
    compares ``prod(1 - e^{-x_i})`` with ``prod(e^{x_i} - 1)`` and the
    ``x_i``-weighted leave-one-out versions of both.
    """
    n = check_int(n, "n", minimum=2)
    trials = check_int(trials, "trials", minimum=1)
    rng = random.Random(seed)
    worst = mpmath.mpf(0)
    with workprec(precision_bits):
        for _ in range(trials):
            head = [mpmath.mpf(rng.uniform(-scale, scale)) for _ in range(n - 1)]
            x = head + [-mpmath.fsum(head)]
            worst = max(worst, *_identity_residuals(x))
    return float(worst)
