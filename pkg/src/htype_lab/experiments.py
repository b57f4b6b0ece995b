"""Experiment configs and runners behind the command line.

A config is a flat JSON object.  ``validate`` turns it into an
``ExperimentConfig`` (or raises ``ConfigError`` naming the offending key);
``run_experiment`` produces an ``ExperimentOutput`` whose rows go to CSV and
whose scalars and assertions go to the JSON summary.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .algebra import DEFAULT_SEED, algebra_names, get_algebra, verify_axioms
from .curvature import (b_adjoint, b_adjoint_residual, blowup_closed_forms, blowup_planes,
                        levi_civita_obstruction)
from .curves import length, horizontality_residual, shrinking_pair
from .errors import ContractError
from .geodesic_opt import degeneration_sweep
from .group import ProductGroup, j_apply_product, verify_product_axioms
from .metrics import (RiemannianSpec, Strictness, WeightLaw, classify_strictness,
                      metric_from_json, shrinking_capacity, shrinking_sequence)

EXPERIMENTS = {
    "axioms": "H-type identity residuals for the base algebra and the product group",
    "shrink": "lengths and endpoints of the shrinking horizontal loops, n = n_min..n_max",
    "curvature": "Arnold curvature of the blow-up planes P_n, Q_n against closed forms",
    "badjoint": "B-adjoint defining identity, vanishing cases and the J_{Az} case",
    "levi-civita": "norm of the Levi-Civita obstruction vector along block n",
    "optimize": "constrained length minimization warm-started at the shrinking loops",
}

COMMON_KEYS = {"experiment", "algebra", "N", "metric", "law", "seed", "output", "description"}
EXPERIMENT_KEYS = {
    "axioms": {"trials", "tol"},
    "shrink": {"n_min", "n_max", "n_list", "c", "z", "nodes", "tol", "length_tol"},
    "curvature": {"n_min", "n_max", "n_list", "z", "x2", "tol"},
    "badjoint": {"trials", "tol", "jaz_tol"},
    "levi-civita": {"n_min", "n_max", "n_list", "x2", "tol"},
    "optimize": {"n_min", "n_max", "n_list", "c", "z", "nodes", "penalty_weight", "max_iters",
                 "grad_tol", "constraint_tol"},
}
METRIC_FREE = {"axioms"}
RIEMANNIAN_ONLY = {"curvature", "badjoint", "levi-civita"}


class ConfigError(ContractError):
    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


@dataclass
class ExperimentConfig:
    experiment: str
    algebra: str
    N: int
    seed: int
    metric: object
    params: dict
    output: str = None
    raw: dict = field(default_factory=dict)

    @property
    def group(self) -> ProductGroup:
        return ProductGroup.from_name(self.algebra, self.N)

    def canonical(self) -> dict:
        """Normalized inputs: what the run depends on, without the output location."""
        out = {"experiment": self.experiment, "algebra": self.algebra, "N": self.N, "seed": self.seed}
        if self.metric is not None:
            out["metric"] = self.metric.to_json()
        out.update({k: _jsonable(v) for k, v in sorted(self.params.items())})
        return out

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    return v


def _number(obj, key, default, *, integer=False, positive=True):
    if key not in obj:
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"'{key}' must be a number", key)
    if integer:
        if not float(v).is_integer():
            raise ConfigError(f"'{key}' must be an integer", key)
        v = int(v)
    if not math.isfinite(v) or (positive and v <= 0):
        raise ConfigError(f"'{key}' must be a positive finite number, got {v!r}", key)
    return v


def _vector(obj, key, dim):
    if key not in obj:
        e = np.zeros(dim)
        e[0] = 1.0
        return e
    v = obj[key]
    if not isinstance(v, list) or len(v) != dim or not all(
            isinstance(t, (int, float)) and not isinstance(t, bool) for t in v):
        raise ConfigError(f"'{key}' must be a list of {dim} numbers", key)
    arr = np.array(v, dtype=float)
    if not np.any(arr):
        raise ConfigError(f"'{key}' must be nonzero", key)
    return arr


def _n_list(obj, default_max):
    if "n_list" in obj:
        if "n_min" in obj or "n_max" in obj:
            raise ConfigError("give either 'n_list' or 'n_min'/'n_max', not both", "n_list")
        v = obj["n_list"]
        if not isinstance(v, list) or not v or not all(
                isinstance(t, int) and not isinstance(t, bool) and t >= 1 for t in v):
            raise ConfigError("'n_list' must be a nonempty list of positive integers", "n_list")
        return list(v)
    lo = _number(obj, "n_min", 1, integer=True)
    hi = _number(obj, "n_max", default_max, integer=True)
    if hi < lo:
        raise ConfigError(f"'n_max' ({hi}) is below 'n_min' ({lo})", "n_max")
    return list(range(lo, hi + 1))


def _metric(obj, group, experiment):
    if experiment in METRIC_FREE:
        for key in ("metric", "law"):
            if key in obj:
                raise ConfigError(f"'{key}' is not used by the {experiment} experiment", key)
        return None
    if "metric" in obj and "law" in obj:
        raise ConfigError("give either 'metric' or the 'law' shorthand, not both", "law")
    try:
        if "law" in obj:
            spec = RiemannianSpec.for_group(group, WeightLaw.from_json(obj["law"]))
        elif "metric" in obj:
            spec = metric_from_json(obj["metric"], group)
        else:
            spec = RiemannianSpec.for_group(group, WeightLaw.inverse_power(1))
    except ConfigError:
        raise
    except ContractError as e:
        raise ConfigError(str(e), "law" if "law" in obj else "metric") from None
    if experiment in RIEMANNIAN_ONLY and not isinstance(spec, RiemannianSpec):
        raise ConfigError(f"the {experiment} experiment needs a Riemannian metric", "metric")
    return spec


def validate(obj, seed_override=None) -> ExperimentConfig:
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    exp = obj.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"'experiment' must be one of {sorted(EXPERIMENTS)}, got {exp!r}", "experiment")
    unknown = sorted(set(obj) - COMMON_KEYS - EXPERIMENT_KEYS[exp])
    if unknown:
        raise ConfigError(f"unknown key '{unknown[0]}' for the {exp} experiment", unknown[0])
    algebra = obj.get("algebra", "heisenberg")
    if algebra not in algebra_names():
        raise ConfigError(f"'algebra' must be one of {algebra_names()}, got {algebra!r}", "algebra")
    alg = get_algebra(algebra)
    seed = _number(obj, "seed", DEFAULT_SEED, integer=True, positive=False)
    if seed < 0:
        raise ConfigError("'seed' must be non-negative", "seed")
    if seed_override is not None:
        seed = int(seed_override)
    if "output" in obj and not isinstance(obj["output"], str):
        raise ConfigError("'output' must be a path string", "output")
    if "description" in obj and not isinstance(obj["description"], str):
        raise ConfigError("'description' must be a string", "description")

    p = {}
    if exp == "axioms":
        p["trials"] = _number(obj, "trials", 1000, integer=True)
        p["tol"] = _number(obj, "tol", 1e-12)
        N_default = 32
    elif exp == "badjoint":
        p["trials"] = _number(obj, "trials", 1000, integer=True)
        p["tol"] = _number(obj, "tol", 1e-10)
        p["jaz_tol"] = _number(obj, "jaz_tol", 1e-12)
        N_default = 8
    else:
        if exp == "optimize" and not {"n_list", "n_min", "n_max"} & set(obj):
            p["n_list"] = [1, 2, 4, 8, 16, 32]
        else:
            p["n_list"] = _n_list(obj, 32)
        N_default = max(p["n_list"])
        if exp in ("shrink", "optimize"):
            p["c"] = _number(obj, "c", math.sqrt(6.0))
            p["z"] = _vector(obj, "z", alg.dim_w)
            if abs(np.linalg.norm(p["z"]) - 1.0) > 1e-12:
                raise ConfigError("'z' must be a unit vector", "z")
            p["nodes"] = _number(obj, "nodes", 257, integer=True)
            if p["nodes"] < 9:
                raise ConfigError("'nodes' must be at least 9", "nodes")
        if exp == "shrink":
            p["tol"] = _number(obj, "tol", 1e-8)
            p["length_tol"] = _number(obj, "length_tol", 1e-10)
        if exp == "curvature":
            p["z"] = _vector(obj, "z", alg.dim_w)
            p["x2"] = _vector(obj, "x2", alg.dim_w)
            p["tol"] = _number(obj, "tol", 1e-9)
        if exp == "levi-civita":
            p["x2"] = _vector(obj, "x2", alg.dim_w)
            p["tol"] = _number(obj, "tol", 1e-10)
        if exp == "optimize":
            p["penalty_weight"] = _number(obj, "penalty_weight", 10.0)
            p["max_iters"] = _number(obj, "max_iters", 40, integer=True)
            p["grad_tol"] = _number(obj, "grad_tol", 1e-9)
            p["constraint_tol"] = _number(obj, "constraint_tol", 1e-8)

    # the metric only needs the center dimension, so a one-block group will do here
    spec = _metric(obj, ProductGroup(alg, 1), exp)
    if exp in ("shrink", "optimize", "curvature") and spec is not None:
        if classify_strictness(spec) is not Strictness.STRICTLY_WEAK:
            raise ConfigError(f"the {exp} experiment needs a strictly weak metric",
                              "law" if "law" in obj else "metric")
    if exp in ("shrink", "optimize"):
        N_default = max(shrinking_capacity(spec, n) for n in p["n_list"])
    N = _number(obj, "N", N_default, integer=True)
    if exp not in ("axioms", "badjoint") and N < N_default:
        raise ConfigError(f"'N' = {N} is too small for this experiment; it needs N >= {N_default}", "N")
    return ExperimentConfig(exp, algebra, N, seed, spec, p, obj.get("output"), dict(obj))


@dataclass
class ExperimentOutput:
    columns: list
    rows: list
    scalars: dict
    assertions: dict
    notes: dict = field(default_factory=dict)

    @property
    def failed(self):
        return [k for k, v in self.assertions.items() if not v]


def _axioms(cfg: ExperimentConfig) -> ExperimentOutput:
    tol = cfg.params["tol"]
    trials = cfg.params["trials"]
    base = verify_axioms(get_algebra(cfg.algebra), trials, tol, cfg.seed)
    prod, _ = verify_product_axioms(cfg.group, trials, tol, cfg.seed)
    rows, asserts = [], {}
    for level, res in (("base", base.residuals), ("product", prod)):
        for name, r in res.items():
            ok = bool(r <= tol)
            rows.append([level, name, r, tol, ok])
            asserts[f"{level}:{name}"] = ok
    scalars = {"max_base_residual": max(base.residuals.values()), "max_product_residual": max(prod.values())}
    return ExperimentOutput(["level", "identity", "max_residual", "tol", "passed"], rows, scalars, asserts)


def _bound_constant(spec) -> float:
    return spec.c0 if isinstance(spec, RiemannianSpec) else spec.c1


def _shrink(cfg: ExperimentConfig) -> ExperimentOutput:
    p, spec, g = cfg.params, cfg.metric, cfg.group
    c, z = p["c"], p["z"]
    target = c * c / 6.0 * z
    c0 = _bound_constant(spec)
    rows = []
    asserts = {"endpoint": True, "length_bound": True, "strictly_decreasing": True,
               "finsler_equals_subfinsler": True}
    prev = math.inf
    for n in p["n_list"]:
        w = shrinking_sequence(spec, n, g)
        curve = shrinking_pair(g, n, c, z, w, p["nodes"])
        ls = length(curve, spec, "subfinsler")
        lf = length(curve, spec, "finsler")
        end = curve.center[-1]
        err = float(np.linalg.norm(end - target))
        bound = 2.0 * c / math.sqrt(n) * (1.0 + c0)
        rows.append([n, ls, lf, bound, float(end @ z), err, horizontality_residual(curve)])
        asserts["endpoint"] &= err <= p["tol"]
        asserts["length_bound"] &= ls <= bound
        asserts["strictly_decreasing"] &= ls < prev
        asserts["finsler_equals_subfinsler"] &= abs(lf - ls) <= p["length_tol"]
        prev = ls
    scalars = {"c0": c0, "target_z": float(target @ z), "final_endpoint_z": rows[-1][4],
               "final_length": rows[-1][1]}
    cols = ["n", "length_subfinsler", "length_finsler", "bound", "endpoint_z", "endpoint_error",
            "horizontality_residual"]
    return ExperimentOutput(cols, rows, scalars, {k: bool(v) for k, v in asserts.items()})


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def _curvature(cfg: ExperimentConfig) -> ExperimentOutput:
    p, spec, g = cfg.params, cfg.metric, cfg.group
    rows = []
    asserts = {"K_P_closed_form": True, "K_Q_closed_form": True, "K_P_negative": True, "K_Q_positive": True}
    for n in p["n_list"]:
        r = blowup_planes(spec, n, p["z"], g)
        kp, kq = blowup_closed_forms(spec, n, p["z"])
        obs = levi_civita_obstruction(spec, p["x2"], n, g)
        rows.append([n, r.a_n, r.K_P, r.K_Q, obs, kp, kq])
        asserts["K_P_closed_form"] &= _rel(r.K_P, kp) <= p["tol"]
        asserts["K_Q_closed_form"] &= _rel(r.K_Q, kq) <= p["tol"]
        asserts["K_P_negative"] &= r.K_P < 0
        asserts["K_Q_positive"] &= r.K_Q > 0
    scalars = {"K_P_last": rows[-1][2], "K_Q_last": rows[-1][3],
               "max_rel_error": max(max(_rel(r[2], r[5]), _rel(r[3], r[6])) for r in rows)}
    cols = ["n", "a_n", "K_P", "K_Q", "obstruction", "K_P_closed", "K_Q_closed"]
    return ExperimentOutput(cols, rows, scalars, {k: bool(v) for k, v in asserts.items()})


def _badjoint(cfg: ExperimentConfig) -> ExperimentOutput:
    p, spec, g = cfg.params, cfg.metric, cfg.group
    rng = np.random.default_rng(cfg.seed)
    scale = 1.0 / math.sqrt(g.N)
    ident = homog = 0.0
    for _ in range(p["trials"]):
        x, y, u = (g.random(rng) * scale for _ in range(3))
        b = b_adjoint(spec, y, x).vector
        ident = max(ident, b_adjoint_residual(spec, y, x, b, [u]))
        t, s = rng.standard_normal(2)
        bts = b_adjoint(spec, y * t, x * s).vector
        homog = max(homog, (bts - b * (t * s)).norm())
    x, y = g.random(rng) * scale, g.random(rng) * scale
    y_h = g.point(y.blocks)
    x_c = g.point(center=x.center)
    zero_y = float(np.max(np.abs(b_adjoint(spec, y_h, x).vector.flat())))
    zero_x = float(np.max(np.abs(b_adjoint(spec, y, x_c).vector.flat())))
    z = rng.standard_normal(g.dim_w)
    xp = g.point(rng.standard_normal((g.N, g.dim_v)) * scale)
    az = spec.apply_A_center(z)
    arg = j_apply_product(az, spec.apply_A(xp))
    jaz = (b_adjoint(spec, g.point(center=z), arg).vector + xp * float(az @ az)).norm()
    rows = [
        ["defining_identity", ident, p["tol"]],
        ["bilinear_homogeneity", homog, p["tol"]],
        ["horizontal_y_vanishes", zero_y, 0.0],
        ["central_x_vanishes", zero_x, 0.0],
        ["jaz_case", jaz, p["jaz_tol"]],
    ]
    for r in rows:
        r.append(bool(r[1] <= r[2]))
    asserts = {r[0]: r[3] for r in rows}
    return ExperimentOutput(["case", "max_residual", "tol", "passed"], rows,
                            {"max_identity_residual": ident}, asserts)


def _levi_civita(cfg: ExperimentConfig) -> ExperimentOutput:
    p, spec, g = cfg.params, cfg.metric, cfg.group
    ax2 = spec.apply_A_center(p["x2"])
    rows = []
    close = True
    for n in p["n_list"]:
        a = float(spec.v_law(n))
        obs = levi_civita_obstruction(spec, p["x2"], n, g)
        closed = float(ax2 @ ax2) / a
        close &= abs(obs - closed) <= p["tol"]
        rows.append([n, a, obs, closed])
    vals = [r[2] for r in rows]
    asserts = {"closed_form": bool(close)}
    if classify_strictness(spec) is Strictness.STRONG and spec.v_law.kind == "constant":
        asserts["constant_for_strong"] = bool(max(vals) - min(vals) <= p["tol"])
    elif classify_strictness(spec) is Strictness.STRICTLY_WEAK:
        asserts["unbounded_growth"] = bool(all(b > a for a, b in zip(vals, vals[1:])))
    scalars = {"obstruction_first": vals[0], "obstruction_last": vals[-1],
               "strictness": classify_strictness(spec).value}
    return ExperimentOutput(["n", "a_n", "obstruction", "closed_form"], rows, scalars, asserts)


def _optimize(cfg: ExperimentConfig) -> ExperimentOutput:
    p, spec, g = cfg.params, cfg.metric, cfg.group
    opts = {k: p[k] for k in ("penalty_weight", "max_iters", "grad_tol", "constraint_tol")}
    rows = degeneration_sweep(spec, g, p["z"], p["n_list"], p["c"], p["nodes"], seed=cfg.seed, **opts)
    slack = 1e-8
    asserts = {
        "converged": all(r.converged for r in rows),
        "feasible": all(r.constraint_residual <= p["constraint_tol"] for r in rows),
        "improves_warm_start": all(r.optimized_length <= r.warm_length + slack for r in rows),
        "non_increasing": all(b.optimized_length <= a.optimized_length + slack for a, b in zip(rows, rows[1:])),
        "lower_bound": all(r.optimized_length >= r.lower_bound - slack for r in rows),
    }
    out = [[r.n, r.warm_length, r.optimized_length, r.constraint_residual, r.iterations] for r in rows]
    scalars = {"first_length": rows[0].optimized_length, "last_length": rows[-1].optimized_length,
               "ratio_last_first": rows[-1].optimized_length / rows[0].optimized_length}
    cols = ["n", "warm_length", "optimized_length", "constraint_residual", "iterations"]
    return ExperimentOutput(cols, out, scalars, asserts)


_RUNNERS = {"axioms": _axioms, "shrink": _shrink, "curvature": _curvature, "badjoint": _badjoint,
            "levi-civita": _levi_civita, "optimize": _optimize}


def run_experiment(cfg: ExperimentConfig) -> ExperimentOutput:
    return _RUNNERS[cfg.experiment](cfg)


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(columns)
        for r in rows:
            writer.writerow([_cell(v) for v in r])


def _scalar(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def write_artifacts(cfg: ExperimentConfig, result: ExperimentOutput, out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{cfg.experiment}.csv"
    write_csv(csv_path, result.columns, result.rows)
    summary = {
        "experiment": cfg.experiment,
        "version": __version__,
        "seed": cfg.seed,
        "config_hash": cfg.config_hash(),
        "inputs": cfg.canonical(),
        "csv": csv_path.name,
        "columns": result.columns,
        "scalars": {k: _scalar(v) for k, v in result.scalars.items()},
        "assertions": {k: bool(v) for k, v in result.assertions.items()},
        "passed": not result.failed,
        "failed": result.failed,
    }
    summary_path = out_dir / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return csv_path, summary_path
