"""Experiment configuration, execution and persistence.

A config is ``{"kind": ..., "params": {...}, "seed": int}``.  Its canonical
JSON (sorted keys, no whitespace, defaults filled in) is hashed to name the
run directory.  Artifacts are written into a temporary directory that is
renamed into place once the run completes; a failed run is kept as
``<name>.partial``.  Reports and CSVs contain no timestamps, so replaying a
config reproduces them byte for byte; timings live in ``manifest.json`` only.
"""

from __future__ import annotations

import copy
import csv
import datetime as _dt
import hashlib
import io
import json
import math
import os
import shutil
import tempfile
from dataclasses import asdict, dataclass
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .errors import ConfigError, LabError, PartialRunError

STATUSES = ("pass", "warn", "fail", "skipped(gate)")
OUT_ENV = "HEDGEHOG_LAB_OUT"

_num = {"type": ["number", "string"]}
_int = {"type": "integer"}
_str = {"type": "string"}

PARAMS = {
    "cf": {
        "alpha": (_str, "golden"),
        "count": ({"type": "integer", "minimum": 1, "maximum": 200}, 20),
        "brjuno": ({"type": "integer", "minimum": 0}, 10),
    },
    "circle": {
        "map": (_str, "arnold:eps=0.05"),
        "alpha": ({"type": ["string", "null"]}, "golden"),
        "tol": (_num, "1e-9"),
        "levels": ({"type": "array", "items": _int}, [3, 4, 6]),
        "checks": ({"type": "array", "items": {"enum": ["comb", "schwarzian", "nonlin", "gn"]}},
                   ["comb", "schwarzian", "nonlin", "gn"]),
        "grid": ({"type": ["integer", "null"], "minimum": 2}, None),
        "samples": ({"type": "integer", "minimum": 1}, 100),
    },
    "dy-verify": {
        "map": (_str, "arnold:eps=0.001"),
        "alpha": (_str, "golden"),
        "delta": (_num, "0.25"),
        "levels": ({"type": "array", "items": _int}, [4, 6, 8]),
        "samples": ({"type": "integer", "minimum": 1}, 50),
        "y0": ({"type": ["number", "string", "null"]}, None),
        "tol": (_num, "1e-12"),
        "dump_orbits": ({"type": "boolean"}, True),
    },
    "qicurve": {
        "map": (_str, "arnold:eps=0.001"),
        "alpha": (_str, "golden"),
        "level": ({"type": "integer", "minimum": 1}, 5),
        "y0": (_num, "0.75"),
        "resolution": ({"type": ["integer", "null"], "minimum": 8}, None),
        "checks": ({"type": "array", "items": {"enum": ["invariance", "return", "cover"]}},
                   ["invariance", "return", "cover"]),
        "delta": (_num, "0.25"),
        "tol": (_num, "1e-12"),
    },
    "hedgehog": {
        "alpha": (_str, "golden"),
        "coeffs": ({"type": "array", "items": _str}, ["1"]),
        "r0": (_num, "0.1"),
        "N": ({"type": "integer", "minimum": 1}, 1000),
        "resolution": ({"type": "integer", "minimum": 8}, 256),
    },
    "recur": {
        "alpha": (_str, "golden"),
        "coeffs": ({"type": "array", "items": _str}, ["1"]),
        "r0": (_num, "0.1"),
        "N": ({"type": "integer", "minimum": 1}, 1000),
        "resolution": ({"type": "integer", "minimum": 8}, 256),
        "levels": ({"type": "array", "items": _int}, [3, 4, 5, 6, 7, 8]),
    },
    "probe": {
        "alpha": (_str, "golden"),
        "coeffs": ({"type": "array", "items": _str}, ["1"]),
        "r0": (_num, "0.1"),
        "seeds": ({"type": "integer", "minimum": 1}, 100),
        "N": ({"type": "integer", "minimum": 1}, 100000),
    },
    "holonomy": {
        "alpha": (_str, "golden"),
        "perturb": (_str, ""),
        "x0": (_num, "0.05"),
        "y_radius": (_num, "0.05"),
        "tol": (_num, "1e-12"),
        "fit_degree": ({"type": "integer", "minimum": 1}, 6),
    },
}

KINDS = tuple(PARAMS) + ("suite",)


def config_schema(kind):
    props = {k: spec for k, (spec, _) in PARAMS[kind].items()}
    return {
        "type": "object",
        "properties": {
            "kind": {"const": kind},
            "seed": {"type": "integer", "minimum": 0},
            "params": {"type": "object", "properties": props, "additionalProperties": False},
        },
        "required": ["kind"],
        "additionalProperties": False,
    }


def _path(err):
    return "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path)


def validate_config(config):
    """Validate and fill defaults; raises :class:`ConfigError` with the field path."""
    if not isinstance(config, dict):
        raise ConfigError("config must be a JSON object", "$")
    kind = config.get("kind")
    if kind not in PARAMS:
        raise ConfigError(f"unknown experiment kind {kind!r}; expected one of {KINDS}", "$.kind")
    try:
        jsonschema.validate(config, config_schema(kind))
    except jsonschema.ValidationError as err:
        raise ConfigError(err.message, _path(err)) from None
    params = {k: copy.deepcopy(default) for k, (_, default) in PARAMS[kind].items()}
    params.update(config.get("params", {}))
    return {"kind": kind, "seed": int(config.get("seed", 0)), "params": params}


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True,
                      default=_json_default)


def config_hash(config):
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()[:16]


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _clean(o):
    """Map non-finite floats to strings so the JSON stays standard."""
    if isinstance(o, dict):
        return {str(k): _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, (float, np.floating)):
        f = float(o)
        return f if math.isfinite(f) else str(f)
    if isinstance(o, (np.integer, np.bool_, complex, np.ndarray)):
        return _clean(_json_default(o))
    return o


def dump_json(obj):
    return json.dumps(_clean(obj), sort_keys=True, indent=2, ensure_ascii=True,
                      default=_json_default) + "\n"


class ArtifactWriter:
    """Collects files for one run directory."""

    def __init__(self, root):
        self.root = Path(root)
        self.files = []

    def json(self, name, obj):
        self._write(name, dump_json(obj))

    def csv(self, name, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
        self._write(name, buf.getvalue())

    def _write(self, name, text):
        path = self.root / name
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="ascii") as fh:
            fh.write(text)
        self.files.append(name)


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


@dataclass
class RunManifest:
    config_hash: str
    kind: str
    tool_version: str
    started: str
    finished: str
    statuses: dict
    artifacts: list
    overall: str
    path: str = ""

    def to_dict(self):
        return asdict(self)


def overall_status(statuses):
    vals = list(statuses.values()) if isinstance(statuses, dict) else list(statuses)
    for s in vals:
        if s not in STATUSES:
            raise LabError(f"illegal status {s!r}")
    if "fail" in vals:
        return "fail"
    if "warn" in vals:
        return "warn"
    if vals and all(s == "skipped(gate)" for s in vals):
        return "skipped(gate)"
    return "pass"


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def output_root(out=None):
    return Path(out or os.environ.get(OUT_ENV) or "runs")


def run(config, out=None):
    """Validate, execute and persist one experiment; returns a :class:`RunManifest`."""
    cfg = validate_config(config)
    h = config_hash(cfg)
    root = output_root(out)
    root.mkdir(parents=True, exist_ok=True)
    name = f"{cfg['kind']}-{h}"
    final = root / name
    tmp = Path(tempfile.mkdtemp(prefix=f".{name}.", dir=root))
    started = _now()
    writer = ArtifactWriter(tmp)
    try:
        writer.json("config.json", cfg)
        checks = EXPERIMENTS[cfg["kind"]](cfg, writer)
    except Exception as exc:
        partial = root / f"{name}.partial"
        if partial.exists():
            shutil.rmtree(partial)
        os.replace(tmp, partial)
        if isinstance(exc, LabError) and not isinstance(exc, ConfigError):
            raise PartialRunError(f"{type(exc).__name__}: {exc}", str(partial)) from exc
        raise
    statuses = {c["name"]: c["status"] for c in checks}
    writer.json("report.json", {"config_hash": h, "kind": cfg["kind"], "checks": checks,
                                "overall": overall_status(statuses)})
    manifest = RunManifest(h, cfg["kind"], __version__, started, _now(), statuses,
                           sorted(writer.files), overall_status(statuses), str(final))
    with open(tmp / "manifest.json", "w", encoding="ascii") as fh:
        fh.write(dump_json(manifest.to_dict()))
    if final.exists():
        shutil.rmtree(final)
    os.replace(tmp, final)
    return manifest


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}", "$") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}", "$") from None


def suite(configs, out=None):
    """Run a list of configs (dicts or paths); aggregate statuses.

    Missing or invalid configs are listed as failures.  Returns
    ``(aggregate, exit_code)`` with exit code 1 iff anything failed.
    """
    entries = []
    for item in configs:
        label = str(item) if not isinstance(item, dict) else item.get("kind", "?")
        try:
            cfg = load_config(item) if not isinstance(item, dict) else item
            m = run(cfg, out)
            entries.append({"config": label, "hash": m.config_hash, "kind": m.kind,
                            "overall": m.overall, "statuses": m.statuses, "path": m.path})
        except (LabError, OSError) as exc:
            entries.append({"config": label, "overall": "fail",
                            "reason": f"{type(exc).__name__}: {exc}"})
    agg = {"runs": entries, "count": len(entries),
           "failed": sum(e["overall"] == "fail" for e in entries)}
    agg["overall"] = "fail" if agg["failed"] else "pass"
    return agg, (1 if agg["failed"] else 0)


# -- experiments ---------------------------------------------------------------
#
# Each experiment takes the validated config and an ArtifactWriter and returns
# a list of checks ``{"name", "status", ...}``.  CSV column orders are fixed
# here and documented in the README.


def _f(v):
    return float(v)


def _tuned(spec, alpha, tol):
    from .circle import parse_map, tune_parameter

    g0 = parse_map(spec)
    w0 = getattr(g0, "omega", 0.0)
    return tune_parameter(lambda w: g0.shifted(w - w0), alpha, float(tol))


def _germ(params):
    from .germ import Germ

    coeffs = [complex(c.replace(" ", "")) for c in params["coeffs"]]
    return Germ(params["alpha"], coeffs, _f(params["r0"]))


def exp_cf(cfg, out):
    from .arithmetic import brjuno_partial_sum, parse_alpha, signed_error, surd_exact_checks
    from .errors import PrecisionError

    p = cfg["params"]
    alpha = parse_alpha(p["alpha"])
    rows, exact_ok = [], True
    partial = 0.0
    for n in range(p["count"]):
        try:
            pn, qn = alpha.convergent(n)
            err = signed_error(alpha, n)
            # running sum_{k<=n} log(q_{k+1}) / q_k, blank past --brjuno
            partial = brjuno_partial_sum(alpha, n) if n <= p["brjuno"] else ""
        except PrecisionError:
            break
        row = [n, alpha.quotient(n) if n else 0, pn, qn, err, partial]
        if alpha.kind == "surd":
            ex = surd_exact_checks(alpha, n)
            ok = ex["determinant_ok"] and ex["bound_ok"] and ex["sign_ok"]
            exact_ok &= ok
            row.append(ok)
        else:
            row.append("")
        rows.append(row)
    out.csv("cf.csv", ["n", "a_n", "p_n", "q_n", "signed_error", "brjuno_partial", "exact_ok"],
            rows)
    checks = [{"name": "convergents", "status": "pass" if exact_ok else "fail",
               "terms": len(rows), "exact": alpha.kind == "surd"}]
    try:
        b = brjuno_partial_sum(alpha, p["brjuno"])
        checks.append({"name": "brjuno_partial_sum", "status": "pass",
                       "N": p["brjuno"], "value": b})
    except PrecisionError as exc:
        checks.append({"name": "brjuno_partial_sum", "status": "warn", "reason": str(exc)})
    return checks


def exp_circle(cfg, out):
    from .arithmetic import parse_alpha
    from .circle import (check_gn_estimates, check_interval_combinatorics,
                         check_iterate_nonlinearity, check_schwarzian_estimate,
                         conjugacy_defect, denjoy_conjugacy, parse_map, renorm_data,
                         rotation_bracket, schwarzian_sup, variation_log_derivative)
    from .errors import CombinatoricsError, EstimateViolation

    p = cfg["params"]
    if p["alpha"] is None:
        g, alpha = parse_map(p["map"]), None
    else:
        alpha = parse_alpha(p["alpha"])
        g = _tuned(p["map"], alpha, p["tol"])
    br = rotation_bracket(g, _f(p["tol"]))
    checks = [{"name": "rotation", "status": "pass", "omega": getattr(g, "omega", None),
               "bracket": [br.lo, br.hi]}]
    if alpha is None:
        return checks
    V, S = variation_log_derivative(g), schwarzian_sup(g)
    rows = []
    for n in p["levels"]:
        renorm = renorm_data(g, alpha, n, p["grid"])
        for name, fn in (("schwarzian", check_schwarzian_estimate),
                         ("nonlin", check_iterate_nonlinearity)):
            if name not in p["checks"]:
                continue
            try:
                rep = fn(g, alpha, n, V=V, S=S, renorm=renorm).to_dict()
            except EstimateViolation as exc:
                rep = exc.report.to_dict()
            rows.append([n, name, rep["lhs_max"], rep["rhs"], rep["ratio"], rep["status"]])
            checks.append({"name": f"{name}[{n}]", **rep})
        if "gn" in p["checks"]:
            try:
                rep = check_gn_estimates(g, alpha, n, p["grid"], V=V, S=S).to_dict()
            except EstimateViolation as exc:
                rep = exc.report.to_dict()
            rows.append([n, "gn", rep["lhs_max"], rep["rhs"], rep["ratio"], rep["status"]])
            checks.append({"name": f"gn[{n}]", **rep})
        if "comb" in p["checks"]:
            try:
                rep = check_interval_combinatorics(g, alpha, n)
                status = "pass"
            except CombinatoricsError as exc:
                rep, status = {"witness": exc.witness}, "fail"
            rows.append([n, "comb", rep.get("sum_lengths", ""), 1.0, "", status])
            checks.append({"name": f"comb[{n}]", "status": status, **rep})
    L = alpha.convergent(max(p["levels"]) + 1)[1]
    hinv = denjoy_conjugacy(g, alpha, max(L, 64))
    xs = (np.arange(p["samples"]) + 0.5) / p["samples"]
    dfct = conjugacy_defect(g, hinv, alpha, xs)
    checks.append({"name": "conjugacy", "status": "pass" if dfct <= 2 * hinv.gap else "warn",
                   "defect": dfct, "gap": hinv.gap})
    out.csv("circle.csv", ["n", "check", "lhs", "rhs", "ratio", "status"], rows)
    return checks


def exp_dy_verify(cfg, out):
    from .arithmetic import parse_alpha
    from .band import band_nonlinearity, dy_sweep
    from .curves import grade

    p = cfg["params"]
    alpha = parse_alpha(p["alpha"])
    g = _tuned(p["map"], alpha, p["tol"])
    delta = _f(p["delta"])
    tau = band_nonlinearity(g, delta)
    y_range = (0.05, 1.0) if p["y0"] is None else (_f(p["y0"]), _f(p["y0"]))
    rows, dumps, checks = [], [], []
    for n in p["levels"]:
        rep, orbits = dy_sweep(g, alpha, n, p["samples"], delta, cfg["seed"], y_range, tau=tau)
        for k, o in enumerate(orbits):
            rows.append([n, k, o.x0, o.y0, o.J, o.rel_deviation,
                         float(np.max(o.hyperbolic_deviation())), o.sum_m, o.within_bound])
            if p["dump_orbits"]:
                dumps.extend([n, k, j, o.x[j], o.z[j].real, o.z[j].imag, o.y[j].real,
                              o.y[j].imag] for j in range(o.y.size))
        checks.append({"name": f"dy[{n}]", **rep})
        hyp = rep["status"] if rep["status"] == "skipped(gate)" else \
            grade(rep["max_hyperbolic"], 3.0)
        checks.append({"name": f"dy_hyperbolic[{n}]", "status": hyp,
                       "value": rep["max_hyperbolic"], "threshold": 3.0})
    out.csv("dy_verify.csv", ["n", "sample", "x0", "y0", "J", "max_rel_deviation",
                              "max_hyperbolic", "sum_m", "within_bound"], rows)
    if p["dump_orbits"]:
        out.csv("orbits.csv", ["n", "sample", "j", "x_j", "re_z_j", "im_z_j", "re_y_j", "im_y_j"],
                dumps)
    return checks


def exp_qicurve(cfg, out):
    from .arithmetic import parse_alpha
    from .band import band_nonlinearity
    from .curves import (build_curve, osculating_cover_check, verify_quasi_invariance,
                         verify_return_displacement)

    p = cfg["params"]
    alpha = parse_alpha(p["alpha"])
    g = _tuned(p["map"], alpha, p["tol"])
    delta, n = _f(p["delta"]), p["level"]
    curve = build_curve(g, alpha, n, _f(p["y0"]), p["resolution"])
    out.csv("curve.csv", ["x", "re_z", "im_z"], curve.to_rows())
    checks = []
    if "invariance" in p["checks"]:
        tau = band_nonlinearity(g, delta)
        rep = verify_quasi_invariance(g, alpha, curve, delta=delta, tau=tau).to_dict()
        per_j = rep.pop("per_j", [])
        out.csv("invariance.csv", ["j", "value", "raw", "correction"],
                [[r["j"], r["value"], r["raw"], r["correction"]] for r in per_j])
        checks.append({"name": "invariance", **rep})
    if "return" in p["checks"]:
        checks.append({"name": "return", **verify_return_displacement(g, alpha, curve).to_dict()})
    if "cover" in p["checks"]:
        rep = osculating_cover_check(g, alpha, n, y0=_f(p["y0"]), curve=curve, delta=delta,
                                     seed=cfg["seed"])
        checks.append({"name": "cover", **rep.to_dict()})
    return checks


def exp_hedgehog(cfg, out):
    from .germ import hedgehog_approx

    p = cfg["params"]
    f = _germ(p)
    K = hedgehog_approx(f, p["N"], p["resolution"], strict=False)
    out.csv("component.csv", ["re", "im", "boundary"],
            [[z.real, z.imag, b] for z, b in zip(K.points, np.isin(K.points, K.boundary))])
    rep = K.report()
    status = "pass" if rep["touches_boundary"] and rep["invariance_ok"] else "warn"
    return [{"name": "hedgehog", "status": status, **rep}]


def exp_recur(cfg, out):
    from .germ import hedgehog_approx, linear_profile_value, profile_trend, recurrence_profile

    p = cfg["params"]
    f = _germ(p)
    K = hedgehog_approx(f, p["N"], p["resolution"], strict=False)
    rows = recurrence_profile(f, K, f.alpha, p["levels"])
    cols = ["n", "q", "forward", "backward", "forward_excluded", "backward_excluded",
            "forward_shadow", "backward_shadow", "unreliable"]
    out.csv("recur.csv", cols, [[r[c] for c in cols] for r in rows])
    trend = profile_trend(rows)
    checks = [{"name": "profile_trend", "status": "pass" if trend["decreasing"] else "fail",
               **trend}]
    if f.is_linear:
        err = max(abs(r["sup"] - linear_profile_value(f.alpha, r["n"], f.r0)) for r in rows)
        checks.append({"name": "linear_closed_form", "status": "pass" if err <= 1e-12 else "fail",
                       "max_error": err})
    return checks


def exp_probe(cfg, out):
    from .germ import convergence_probe, random_seeds

    p = cfg["params"]
    f = _germ(p)
    seeds = random_seeds(f.r0, p["seeds"], cfg["seed"])
    rep = convergence_probe(f, seeds, p["N"])
    out.csv("suspects.csv", ["seed_re", "seed_im", "direction", "entered_at", "min_modulus"],
            [[s["seed"][0], s["seed"][1], s["direction"], s["entered_at"], s["min_modulus"]]
             for s in rep["suspects"]])
    return [{"name": "probe", **rep}]


def exp_holonomy(cfg, out):
    from .arithmetic import parse_alpha
    from .holonomy import FoliationGerm, holonomy_report, parse_monomials

    p = cfg["params"]
    P, Q = parse_monomials(p["perturb"])
    F = FoliationGerm(float(parse_alpha(p["alpha"]).value(20)), P, Q,
                      _f(p["x0"]), _f(p["y_radius"]))
    rep = holonomy_report(F, _f(p["tol"]), p["fit_degree"])
    coeffs = rep.get("fit_coeffs") or []
    out.csv("fit.csv", ["k", "re", "im"], [[k + 1, c[0], c[1]] for k, c in enumerate(coeffs)])
    bound = 1e-10 if F.is_linear else 1e-6
    return [
        {"name": "multiplier", "status": "pass" if rep["multiplier_error"] <= bound else "fail",
         "threshold": bound, **rep},
        {"name": "roundtrip", "status": "pass" if rep["roundtrip_error"] <= 1e-9 else "fail",
         "value": rep["roundtrip_error"]},
        {"name": "fit", "status": "pass" if coeffs else "warn", "residual": rep["residual"]},
    ]


EXPERIMENTS = {
    "cf": exp_cf, "circle": exp_circle, "dy-verify": exp_dy_verify, "qicurve": exp_qicurve,
    "hedgehog": exp_hedgehog, "recur": exp_recur, "probe": exp_probe, "holonomy": exp_holonomy,
}
