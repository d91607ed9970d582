"""Command-line front end.

Every subcommand reads an optional JSON run configuration, prints a JSON
report on stdout and writes its tables to ``--out``.  Exit status: 0 when
all checks pass, 1 on a tolerance violation, 2 on a configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import jsonschema
import mpmath

from ._validation import DEFAULT_PRECISION_BITS, check_precision, workprec
from .exceptions import ConfigurationError, DepthExceeded, InvalidOrder, LindstedtError
from .model import load_model, quadratic_twist
from .rotation import (
    ROTATION_SCHEMA,
    bryuno_depth_for_tolerance,
    bryuno_sum,
    rotation_from_dict,
)
from .series import (
    ConjugationSeries,
    coefficients_from_csv,
    coefficients_to_csv,
    evaluate_curve,
    functional_residual,
    invariant_summary,
    map_orbit_check,
)

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG = 0, 1, 2

_NUM = {"type": "number", "exclusiveMinimum": 0}
_ORDER = {"type": "integer"}

RUN_CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "rotation": ROTATION_SCHEMA,
        "model": {"oneOf": [{"enum": ["standard_map"]}, {"type": "object"}, {"type": "string"}]},
        "quadratic_twist": {
            "type": "object",
            "properties": {"c": {"type": "number"}, "cutoff": {"type": "integer", "minimum": 2}},
            "additionalProperties": False,
        },
        "precision_bits": {"type": "integer", "minimum": 64},
        "max_order": _ORDER,
        "tolerances": {
            "type": "object",
            "properties": {"zero_compatibility": _NUM, "oracle_match": _NUM, "cancellation": _NUM,
                           "identities": _NUM, "reality": _NUM},
            "additionalProperties": False,
        },
        "residual": {
            "type": "object",
            "properties": {"eps": {"type": "array", "items": {"type": ["number", "string"]}},
                           "order": _ORDER, "grid_size": {"type": "integer"}},
            "additionalProperties": False,
        },
        "curve": {
            "type": "object",
            "properties": {"eps": {"type": ["number", "string"]}, "order": _ORDER,
                           "grid_size": {"type": "integer", "minimum": 1},
                           "psi0": {"type": ["number", "string"]},
                           "steps": {"type": "integer", "minimum": 0}},
            "additionalProperties": False,
        },
        "trees": {
            "type": "object",
            "properties": {"max_order": _ORDER, "seed": {"type": "integer"},
                           "identity_trials": {"type": "integer", "minimum": 1},
                           "identity_n": {"type": "integer", "minimum": 2},
                           "coefficients": {"type": "string"}},
            "additionalProperties": False,
        },
        "radius": {
            "type": "object",
            "properties": {"window": {"type": "array", "items": _ORDER, "minItems": 2, "maxItems": 2},
                           "xi1": {"type": "number", "minimum": 0}},
            "additionalProperties": False,
        },
        "study": {
            "type": "object",
            "properties": {
                "family": {"oneOf": [{"enum": ["wide", "noble"]},
                                     {"type": "array", "items": ROTATION_SCHEMA}]},
                "window": {"type": "array", "items": _ORDER, "minItems": 2, "maxItems": 2},
                "tail_tol": _NUM,
                "slope_band": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                "max_spearman": {"type": "number"},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}

DEFAULT_TOLERANCES = {
    "zero_compatibility": 1e-12,
    "oracle_match": 1e-10,
    "cancellation": 1e-10,
    "identities": 1e-12,
    "reality": 1e-14,
}


class Run:
    """Resolved configuration shared by the subcommands."""

    def __init__(self, config: dict, args):
        try:
            jsonschema.validate(config, RUN_CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise ConfigurationError(f"invalid run config at {list(exc.absolute_path)}: {exc.message}") from None
        self.config = config
        self.bits = check_precision(args.precision_bits or config.get("precision_bits", DEFAULT_PRECISION_BITS))
        self.jobs = args.jobs
        self.out = args.out
        self.max_order = config.get("max_order", 10)
        if self.max_order < 1:
            raise InvalidOrder(f"max_order must be >= 1, got {self.max_order}")
        self.tol = {**DEFAULT_TOLERANCES, **config.get("tolerances", {})}
        self._rotation = None
        self._model = None

    @property
    def rotation(self):
        if self._rotation is None:
            doc = self.config.get("rotation", {"periodic_tail": [1], "label": "golden"})
            self._rotation = rotation_from_dict(doc, self.bits)
        return self._rotation

    @property
    def model(self):
        if self._model is None:
            doc = self.config.get("model", "standard_map")
            if doc == "standard_map":
                doc = {"builtin": "standard_map"}
            sigma, twist = load_model(doc, self.bits)
            qt = self.config.get("quadratic_twist")
            if qt is not None:
                twist = quadratic_twist(self.rotation.value, qt.get("c", 0.5), qt.get("cutoff", 12), self.bits)
            self._model = (sigma, twist)
        return self._model

    def series(self, max_order=None):
        sigma, twist = self.model
        return ConjugationSeries.compute(
            self.rotation, sigma, twist, max_order or self.max_order,
            precision_bits=self.bits, zero_tol=self.tol["zero_compatibility"],
        )

    def write(self, name, text):
        if self.out is None:
            return None
        os.makedirs(self.out, exist_ok=True)
        path = os.path.join(self.out, name)
        with open(path, "w", newline="") as fh:
            fh.write(text)
        return path


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _nstr(x, bits):
    return mpmath.nstr(x, int(bits * 0.30103) + 3, strip_zeros=False, min_fixed=1, max_fixed=0)


def _csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# subcommands; each returns (report, exit status)


def cmd_cf(run: Run):
    r = run.rotation
    try:
        depth = bryuno_depth_for_tolerance(r, run.config.get("study", {}).get("tail_tol", 0.01))
    except DepthExceeded:
        depth = r.depth - 1
    data = bryuno_sum(r, max(depth, min(r.depth - 1, 20)))
    with workprec(run.bits):
        report = {
            "rotation": r.to_dict(),
            "bryuno": {
                "partial_sums": [_nstr(s, run.bits) for s in data.partial_sums],
                "tail_bound": _nstr(data.tail_bound, run.bits),
                "depth": data.depth,
                "function_value": _nstr(data.function_value.value, run.bits),
                "function_residual_bound": _nstr(data.function_value.residual_bound, run.bits),
            },
        }
    run.write("cf.json", _json(report))
    return report, EXIT_OK


def cmd_series(run: Run):
    state = run.series().compute_H()
    run.write("coefficients.csv", coefficients_to_csv(state))
    run.write("H_coefficients.csv", coefficients_to_csv(state, which="H"))
    summary = invariant_summary(state)
    ok = summary["support_violations"] == 0 and summary["reality_max_defect"] <= run.tol["reality"]
    run.write("series_report.json", _json(summary))
    return summary, EXIT_OK if ok else EXIT_VIOLATION


def cmd_residual(run: Run):
    cfg = run.config.get("residual", {})
    K = cfg.get("order", run.max_order)
    eps = cfg.get("eps", [1e-3, 2e-3, 4e-3, 8e-3])
    state = run.series()
    grid = cfg.get("grid_size", 4 * max(1, state.mode_bound(min(K, state.max_order))) + 4)
    report = functional_residual(state, [str(e) for e in eps], K, grid).to_dict()
    run.write("residual.json", _json(report))
    return report, EXIT_OK


def cmd_curve(run: Run):
    cfg = run.config.get("curve", {})
    K = cfg.get("order", run.max_order)
    eps = str(cfg.get("eps", 0.05))
    n = cfg.get("grid_size", 64)
    state = run.series()
    with workprec(run.bits):
        psis = [2 * mpmath.pi * j / n for j in range(n)]
        pts = evaluate_curve(state, eps, K, psis)
        rows = [["psi", "x", "y"]] + [[_nstr(p, run.bits), _nstr(x, run.bits), _nstr(y, run.bits)]
                                      for p, (x, y) in zip(psis, pts)]
    run.write("curve.csv", _csv(rows))
    orbit = map_orbit_check(state, eps, K, str(cfg.get("psi0", 0)), cfg.get("steps", 1000))
    report = {"order": K, "eps": eps, "grid_size": n, "orbit": orbit.to_dict()}
    run.write("curve_report.json", _json(report))
    return report, EXIT_OK


def cmd_verify_trees(run: Run):
    from .trees import GENERAL_CAP, LINEAR_CAP, cancellation_check, oracle_coefficient, zero_sum_identities

    sigma, twist = run.model
    general = not twist.is_identity
    cfg = run.config.get("trees", {})
    K = cfg.get("max_order", GENERAL_CAP if general else min(4, LINEAR_CAP))
    if "coefficients" in cfg:
        with open(cfg["coefficients"]) as fh:
            table = coefficients_from_csv(fh.read(), run.bits)
    else:
        table = run.series(K).coeffs
    rows, ok = [], True
    with workprec(run.bits):
        for k in range(1, K + 1):
            s, mass = cancellation_check(k, run.rotation, sigma, twist, general)
            canc = float(abs(s) / mass) if mass else 0.0
            ok &= canc <= run.tol["cancellation"]
            reach = k * max(1, sigma.mode_cutoff)
            for nu in range(-reach, reach + 1):
                if nu == 0:
                    continue
                oracle = oracle_coefficient(k, nu, run.rotation, sigma, twist, general)
                rec = table.get(k, {}).get(nu, mpmath.mpc(0))
                if oracle == 0 and rec == 0:
                    continue
                rel = float(abs(oracle - rec) / max(abs(rec), abs(oracle)))
                ok &= rel <= run.tol["oracle_match"]
                rows.append({"k": k, "nu": nu, "rel_diff": rel, "cancellation_ratio": canc})
    ident = zero_sum_identities(cfg.get("identity_n", 8), cfg.get("identity_trials", 1000),
                                  cfg.get("seed", 20240601))
    ok &= ident <= run.tol["identities"]
    report = {"general": general, "max_order": K, "rows": rows, "identity_max_residual": ident,
              "pass": bool(ok)}
    run.write("verify_trees.json", _json(report))
    table_rows = [["k", "nu", "rel_diff", "cancellation_ratio"]] + [
        [r["k"], r["nu"], f"{r['rel_diff']:.3e}", f"{r['cancellation_ratio']:.3e}"] for r in rows
    ]
    run.write("verify_trees.csv", _csv(table_rows))
    return report, EXIT_OK if ok else EXIT_VIOLATION


def _family(run: Run):
    from .radius import NOBLE_FAMILY, WIDE_FAMILY, study_family

    fam = run.config.get("study", {}).get("family", "wide")
    if fam == "wide":
        return study_family(WIDE_FAMILY, run.bits)
    if fam == "noble":
        return study_family(NOBLE_FAMILY, run.bits)
    out = []
    for i, doc in enumerate(fam):
        name = doc.get("label", f"member{i}")
        try:
            out.append(rotation_from_dict({**doc, "label": name}, run.bits))
        except ConfigurationError as exc:
            raise type(exc)(f"family member {name!r}: {exc}") from None
    return out


def cmd_bryuno_study(run: Run):
    from .radius import bryuno_correlation

    cfg = run.config.get("study", {})
    omegas = _family(run)
    sigma, _ = run.model
    corr = bryuno_correlation(omegas, sigma, run.config.get("max_order", 40),
                              tuple(cfg.get("window", (10, 40))), jobs=run.jobs,
                              tail_tol=cfg.get("tail_tol", 0.01))
    run.write("bryuno_study.csv", _csv(corr.csv_rows()))
    report = corr.to_dict()
    report["points"] = [{k: p[k] for k in ("omega_id", "bryuno", "bryuno_tail", "log_rho_hat")}
                        for p in corr.points]
    ok = True
    if "slope_band" in cfg:
        lo, hi = cfg["slope_band"]
        ok &= lo <= corr.fitted_slope <= hi
    if "max_spearman" in cfg:
        ok &= corr.spearman <= cfg["max_spearman"]
    report["pass"] = bool(ok)
    run.write("bryuno_study.json", _json(report))
    return report, EXIT_OK if ok else EXIT_VIOLATION


def cmd_radius(run: Run):
    from .radius import RadiusEstimator

    cfg = run.config.get("radius", {})
    max_order = run.config.get("max_order", 40)
    window = tuple(cfg.get("window", (min(10, max_order), max_order)))
    est = RadiusEstimator(max_order, window, cfg.get("xi1", 0.0), run.bits)
    est.fit(run.rotation, run.model[0])
    report = est.estimate_.to_dict()
    report["log_rho_hat"] = math.log(est.rho_hat_)
    run.write("radius.json", _json(report))
    return report, EXIT_OK


COMMANDS = {
    "cf": cmd_cf,
    "series": cmd_series,
    "residual": cmd_residual,
    "curve": cmd_curve,
    "verify-trees": cmd_verify_trees,
    "bryuno-study": cmd_bryuno_study,
    "radius": cmd_radius,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lindstedt", description=__doc__.splitlines()[0])
    parser.add_argument("--config", metavar="PATH", help="JSON run configuration")
    parser.add_argument("--out", metavar="DIR", help="directory for CSV/JSON outputs")
    parser.add_argument("--jobs", type=int, default=1, metavar="N", help="worker processes")
    parser.add_argument("--precision-bits", type=int, metavar="N", help="override working precision")
    parser.add_argument("command", choices=sorted(COMMANDS))
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.jobs < 1:
            raise ConfigurationError("--jobs must be >= 1")
        config = {}
        if args.config:
            with open(args.config) as fh:
                config = json.load(fh)
        run = Run(config, args)
        report, status = COMMANDS[args.command](run)
    except (ConfigurationError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LindstedtError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    sys.stdout.write(_json(report))
    return status


if __name__ == "__main__":
    sys.exit(main())
