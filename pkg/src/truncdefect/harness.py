"""Experiment configuration, result records and persistence.

An experiment is described by a JSON document

.. code-block:: json

    {"schema_version": 1, "experiment": "TravelTime",
     "parameters": {"field": "zero", "delta": [0.5]},
     "output_dir": "out/tt", "seed": 0}

Every parameter is validated against the experiment's schema before any
computation starts; all problems are reported together in
:class:`~truncdefect.errors.ConfigInvalid`.  Running an experiment yields
:class:`ResultRecord` objects, each holding one or more tables.  Tables are
written as CSV (header row, CRLF line ends, floats with 17 significant
digits) and a ``summary.json`` lists every record with the claim it tests
and the measured and expected values.  Nothing time-dependent is written to
CSV, so identical configurations produce byte-identical tables.
"""
from __future__ import annotations

import csv
import enum
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import center_flow, defect_bvp, models, scalar_saddle, wave_trains
from .errors import ConfigInvalid, DefectError

SCHEMA_VERSION = 1


class Experiment(str, enum.Enum):
    TRAVEL_TIME = "TravelTime"
    LOG_COEFFICIENT = "LogCoefficient"
    INVERT_EPSILON = "InvertEpsilon"
    ASYMPTOTE = "Asymptote"
    CENTER_FLOW = "CenterFlow"
    WAVE_TRAIN = "WaveTrain"
    DISPERSION = "Dispersion"
    DEFECT_CONTINUATION = "DefectContinuation"
    SCALING_REPORT = "ScalingReport"
    ACCEPTANCE = "Acceptance"


COMMANDS = {
    "travel-time": Experiment.TRAVEL_TIME,
    "log-coeff": Experiment.LOG_COEFFICIENT,
    "invert-epsilon": Experiment.INVERT_EPSILON,
    "asymptote": Experiment.ASYMPTOTE,
    "center-flow": Experiment.CENTER_FLOW,
    "wavetrain": Experiment.WAVE_TRAIN,
    "dispersion": Experiment.DISPERSION,
    "defect": Experiment.DEFECT_CONTINUATION,
    "scaling": Experiment.SCALING_REPORT,
    "accept": Experiment.ACCEPTANCE,
}

# One short statement of the result each experiment probes.
CLAIMS = {
    Experiment.TRAVEL_TIME: "passage time of the outer half leg: eps*T_+ extends continuously to eps = 0",
    Experiment.LOG_COEFFICIENT: "outer half-leg passage time splits as eta(eps) log eps + pi/2 + smooth",
    Experiment.INVERT_EPSILON: "frequency offset selected by the length: L = T(eps*(L; delta); delta)",
    Experiment.ASYMPTOTE: "the eps = 0 orbit approaches -1/x, with a log x / x^2 correction when g_yyy(0) != 0",
    Experiment.CENTER_FLOW: "slow phase flow near the circle of oscillations: eps L(eps) is C^1 down to eps = 0",
    Experiment.WAVE_TRAIN: "homogeneous oscillation: circle of equilibria of the spatial dynamics",
    Experiment.DISPERSION: "non-degenerate fold: omega_nl''(0) and lambda_lin''(0) are nonzero",
    Experiment.DEFECT_CONTINUATION: "truncated defects exist for large L and are unique up to time shifts",
    Experiment.SCALING_REPORT: "truncated defects: eps*(L) ~ c/L and distance to the defect O(1/L^2)",
    Experiment.ACCEPTANCE: "acceptance suite",
}


# ---------------------------------------------------------------------------
# schema


@dataclass(frozen=True)
class Param:
    kind: str  # float, int, str, bool, float_list, field, model, path, dict
    default: Any = None
    check: Callable[[Any], str | None] | None = None
    choices: tuple = ()
    required: bool = False


def _positive(v):
    return None if v > 0 else "must be positive"


def _all_positive(v):
    return None if all(x > 0 for x in v) else "entries must be positive"


def _nonempty(v):
    return None if len(v) > 0 else "must not be empty"


def _increasing(v):
    if not v:
        return "must not be empty"
    return None if all(b > a for a, b in zip(v, v[1:])) else "must be strictly increasing"


def _even_at_least(n):
    def check(v):
        return None if v >= n and v % 2 == 0 else f"must be an even integer >= {n}"
    return check


def _geom(a, b, n):
    return [float(x) for x in np.geomspace(a, b, n)]


_LEGS = tuple(leg.value for leg in scalar_saddle.Leg)

_DEFECT_PARAMS = {
    "model": Param("model", {"name": "cgl_quintic"}),
    "N_x": Param("int", 512, lambda v: None if v >= 64 else "must be >= 64"),
    "N_tau": Param("int", 16, _even_at_least(8)),
    "core_spacing": Param("float", 0.078, _positive),
    "L_start": Param("float", 20.0, _positive),
    "L_schedule": Param("float_list", [40.0, 80.0, 160.0, 320.0, 640.0, 1280.0], _increasing),
    "guess_width": Param("float", 2.0, _positive),
    "guess_profile": Param("str", "blend", choices=("blend", "phase")),
    "core_offset": Param("float", 6.0),
    "omega0": Param("float", None),
    "tol": Param("float", 1e-10, _positive),
    "pseudo_time": Param("float", 1e-3, lambda v: None if v >= 0 else "must be >= 0"),
    "max_ratio": Param("float", 2.0, lambda v: None if v > 1 else "must exceed 1"),
    "save_solutions": Param("bool", True),
    "restart": Param("path", None),
}

SCHEMAS: dict[Experiment, dict[str, Param]] = {
    Experiment.TRAVEL_TIME: {
        "field": Param("field", "zero"),
        "epsilon": Param("float_list", _geom(1e-4, 1e-1, 10), _all_positive),
        "delta": Param("float_list", [0.25, 0.5, 0.75, 1.0], _all_positive),
        "leg": Param("str", "ZeroToPlus", choices=_LEGS),
        "method": Param("str", "both", choices=("direct", "partial_fraction", "both")),
        "tolerance": Param("float", 1e-8, lambda v: None if v >= 0 else "must be >= 0"),
    },
    Experiment.LOG_COEFFICIENT: {
        "field": Param("field", "cubic"),
        "epsilon": Param("float_list", _geom(1e-3, 1e-1, 9), _all_positive),
        "delta": Param("float", 0.5, _positive),
        "leg": Param("str", "ZeroToPlus", choices=_LEGS),
        "stencil": Param("int", 4, lambda v: None if v >= 4 else "must be >= 4"),
    },
    Experiment.INVERT_EPSILON: {
        "field": Param("field", "zero"),
        "L": Param("float_list", [100.0 * 2**k for k in range(7)], _increasing),
        "delta": Param("float", 0.5, _positive),
        "leg": Param("str", "MinusToZero", choices=_LEGS),
        "tolerance": Param("float", 0.02, lambda v: None if v >= 0 else "must be >= 0"),
    },
    Experiment.ASYMPTOTE: {
        "field": Param("field", "zero"),
        "x_min": Param("float", 10.0, _positive),
        "x_max": Param("float", 1000.0, _positive),
        "x0": Param("float", 1.0, _positive),
        "y0": Param("float", -0.5, lambda v: None if v < 0 else "must be negative"),
        "weight": Param("str", "auto", choices=("auto", "x2", "x2/logx")),
        "samples": Param("int", 200, lambda v: None if v >= 10 else "must be >= 10"),
    },
    Experiment.CENTER_FLOW: {
        "field": Param("field", "cubic"),
        "epsilon": Param("float_list", _geom(1e-3, 1e-1, 7), _all_positive),
        "delta0": Param("float", None),
    },
    Experiment.WAVE_TRAIN: {
        "model": Param("model", {"name": "lambda_omega"}),
        "N_tau": Param("int", 32, _even_at_least(8)),
    },
    Experiment.DISPERSION: {
        "model": Param("model", {"name": "lambda_omega"}),
        "N_tau": Param("int", 32, _even_at_least(8)),
        "k_grid": Param("float_list", [-0.2, -0.1, 0.0, 0.1, 0.2], _nonempty),
        "l_grid": Param("float_list", [-0.2, -0.1, 0.0, 0.1, 0.2], _nonempty),
        "threshold": Param("float", 1e-3, _positive),
    },
    Experiment.DEFECT_CONTINUATION: dict(_DEFECT_PARAMS),
    Experiment.SCALING_REPORT: {
        **_DEFECT_PARAMS,
        "family": Param("float_list", [80.0, 160.0, 320.0, 640.0], _increasing),
        "reference_L": Param("float", 1280.0, _positive),
        "x_core": Param("float", 4.0, _positive),
        "save_solutions": Param("bool", False),
    },
    Experiment.ACCEPTANCE: {
        "only": Param("float_list", [], None),
        "tolerances": Param("dict", {}),
        "determinism": Param("str", "full", choices=("full", "skip")),
        "defect": Param("dict", {}),
    },
}

FIELDS = {"zero": scalar_saddle.zero_field, "cubic": scalar_saddle.cubic_field,
          "quartic": scalar_saddle.quartic_field}
MODELS = {"lambda_omega": (models.LambdaOmegaParams, models.lambda_omega),
          "cgl_quintic": (models.CGLQuinticParams, models.cgl_quintic)}


def _check_field_spec(v):
    if isinstance(v, str):
        return None if v in FIELDS else f"unknown field {v!r}; use one of {sorted(FIELDS)}"
    if isinstance(v, dict) and "coeffs" in v:
        try:
            build_field(v)
        except (TypeError, ValueError, KeyError) as exc:
            return f"invalid coefficient table: {exc}"
        return None
    return "must be a field name or {'coeffs': [[i, j, c], ...]}"


def _check_model_spec(v):
    if not isinstance(v, dict) or v.get("name") not in MODELS:
        return f"must be an object with 'name' in {sorted(MODELS)}"
    try:
        build_model(v)
    except (TypeError, ValueError) as exc:
        return f"invalid model parameters: {exc}"
    return None


def _coerce(name: str, p: Param, value, errors: list):
    kind = p.kind
    try:
        if value is None:
            out = None
        elif kind == "float":
            if isinstance(value, bool):
                raise TypeError
            out = float(value)
            if not math.isfinite(out):
                raise ValueError
        elif kind == "int":
            if isinstance(value, bool) or int(value) != value:
                raise TypeError
            out = int(value)
        elif kind == "bool":
            if not isinstance(value, bool):
                raise TypeError
            out = value
        elif kind == "str" or kind == "path":
            if not isinstance(value, str):
                raise TypeError
            out = value
        elif kind == "float_list":
            if isinstance(value, (str, bytes)) or not hasattr(value, "__iter__"):
                raise TypeError
            out = [float(x) for x in value]
            if not all(math.isfinite(x) for x in out):
                raise ValueError
        elif kind in ("dict", "model"):
            if not isinstance(value, dict):
                raise TypeError
            out = value
        elif kind == "field":
            out = value
        else:  # pragma: no cover - schema typo
            raise TypeError
    except (TypeError, ValueError):
        errors.append(f"parameters.{name}: expected {kind}, got {value!r}")
        return None
    if out is None:
        if p.required:
            errors.append(f"parameters.{name}: required")
        return None
    if p.choices and out not in p.choices:
        errors.append(f"parameters.{name}: {out!r} not in {list(p.choices)}")
    msg = None
    if kind == "field":
        msg = _check_field_spec(out)
    elif kind == "model":
        msg = _check_model_spec(out)
    elif p.check is not None:
        msg = p.check(out)
    if msg:
        errors.append(f"parameters.{name}: {msg}")
    return out


@dataclass
class ExperimentConfig:
    """A validated experiment description."""

    experiment: Experiment
    parameters: dict
    output_dir: Path
    seed: int = 0
    schema_version: int = SCHEMA_VERSION

    @classmethod
    def from_dict(cls, doc: dict, *, experiment: Experiment | str | None = None,
                  output_dir: str | os.PathLike | None = None, seed: int | None = None):
        """Validate ``doc`` and fill defaults.

        ``experiment``, ``output_dir`` and ``seed`` override the document
        (the command line uses them).  Raises :class:`ConfigInvalid` listing
        every offending field.
        """
        errors = []
        if not isinstance(doc, dict):
            raise ConfigInvalid("configuration must be a JSON object", ["<root>: not an object"])
        known = {"schema_version", "experiment", "parameters", "output_dir", "seed"}
        for key in sorted(set(doc) - known):
            errors.append(f"{key}: unknown top-level field")
        version = doc.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            errors.append(f"schema_version: expected {SCHEMA_VERSION}, got {version!r}")
        exp_name = doc.get("experiment")
        exp = None
        if experiment is not None:
            exp = Experiment(experiment)
            if exp_name is not None and exp_name != exp.value:
                errors.append(f"experiment: document says {exp_name!r} but {exp.value!r} was requested")
        elif exp_name is None:
            errors.append("experiment: required")
        else:
            try:
                exp = Experiment(exp_name)
            except ValueError:
                errors.append(f"experiment: unknown experiment {exp_name!r}")
        raw_seed = doc.get("seed", 0) if seed is None else seed
        if isinstance(raw_seed, bool) or not isinstance(raw_seed, int):
            errors.append(f"seed: expected integer, got {raw_seed!r}")
            raw_seed = 0
        out = output_dir if output_dir is not None else doc.get("output_dir")
        if out is None:
            out = "out"
        if not isinstance(out, (str, os.PathLike)):
            errors.append(f"output_dir: expected path string, got {out!r}")
            out = "out"
        params = doc.get("parameters", {})
        if not isinstance(params, dict):
            errors.append("parameters: expected an object")
            params = {}
        values = {}
        if exp is not None:
            schema = SCHEMAS[exp]
            for key in sorted(set(params) - set(schema)):
                errors.append(f"parameters.{key}: not a parameter of {exp.value}")
            for name, p in schema.items():
                values[name] = _coerce(name, p, params.get(name, p.default), errors)
        if errors:
            raise ConfigInvalid(f"{len(errors)} configuration error(s)", errors)
        return cls(exp, values, Path(out), int(raw_seed), SCHEMA_VERSION)

    @classmethod
    def from_json(cls, path: str | os.PathLike, **overrides) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"{path}: not valid JSON", [f"<root>: {exc}"]) from exc
        return cls.from_dict(doc, **overrides)

    def to_dict(self) -> dict:
        return {"schema_version": self.schema_version, "experiment": self.experiment.value,
                "parameters": self.parameters, "output_dir": str(self.output_dir), "seed": self.seed}


def build_field(spec) -> scalar_saddle.SaddleField:
    """``"zero" | "cubic" | "quartic"`` or ``{"coeffs": [[i, j, c], ...], "delta0": .., "eps0": ..}``."""
    if isinstance(spec, str):
        return FIELDS[spec]()
    coeffs = {(int(i), int(j)): float(c) for i, j, c in spec["coeffs"]}
    kw = {k: float(spec[k]) for k in ("delta0", "eps0") if k in spec}
    return scalar_saddle.SaddleField.polynomial(coeffs, **kw)


def field_label(spec) -> str:
    return spec if isinstance(spec, str) else build_field(spec).name


def build_model(spec: dict) -> models.ReactionDiffusionSystem:
    """``{"name": "lambda_omega" | "cgl_quintic", **params}``; lists become tuples."""
    params_cls, factory = MODELS[spec["name"]]
    kw = {k: tuple(v) if isinstance(v, list) else v for k, v in spec.items() if k != "name"}
    return factory(params_cls(**kw))


# ---------------------------------------------------------------------------
# records and persistence


@dataclass
class Table:
    columns: list
    rows: list


@dataclass
class ResultRecord:
    """Outcome of one experiment or acceptance criterion.

    ``passed`` is ``None`` for purely descriptive runs.  ``status`` is one of
    ``PASS``, ``FAIL``, ``SKIPPED`` or ``INFO``.
    """

    experiment: str
    name: str
    inputs: dict
    claim: str
    tables: dict = dc_field(default_factory=dict)
    passed: bool | None = None
    tolerance: Any = None
    measured: dict = dc_field(default_factory=dict)
    expected: dict = dc_field(default_factory=dict)
    notes: list = dc_field(default_factory=list)
    status: str = "INFO"
    seconds: float = 0.0
    criterion: int | None = None
    budget_seconds: float | None = None

    def __post_init__(self):
        if self.passed is not None and self.status == "INFO":
            self.status = "PASS" if self.passed else "FAIL"

    def summary(self) -> dict:
        return {
            "experiment": self.experiment, "name": self.name, "criterion": self.criterion,
            "claim": self.claim, "status": self.status, "passed": self.passed,
            "tolerance": _jsonable(self.tolerance), "measured": _jsonable(self.measured),
            "expected": _jsonable(self.expected), "notes": list(self.notes),
            "inputs": _jsonable(self.inputs), "tables": sorted(self.tables),
            "seconds": round(self.seconds, 3), "budget_seconds": self.budget_seconds,
        }


def format_value(v) -> str:
    """CSV cell text: floats with 17 significant digits, booleans as 0/1."""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(v)


def csv_text(table: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(table.columns)
    for row in table.rows:
        if len(row) != len(table.columns):
            raise ValueError("row length does not match header")
        w.writerow([format_value(v) for v in row])
    return buf.getvalue()


def read_csv(path: str | os.PathLike) -> tuple[list, list]:
    """Header and rows (as strings) of a CSV written by :func:`write_tables`."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, Path):
        return str(v)
    if isinstance(v, enum.Enum):
        return v.value
    return v


def table_path(out_dir: Path, record: ResultRecord, table: str) -> Path:
    stem = record.name if table == "main" else f"{record.name}__{table}"
    return Path(out_dir) / f"{stem}.csv"


def write_tables(records: Sequence[ResultRecord], out_dir: str | os.PathLike) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for rec in records:
        for tname in sorted(rec.tables):
            p = table_path(out, rec, tname)
            p.write_bytes(csv_text(rec.tables[tname]).encode("utf-8"))
            paths.append(p)
    return paths


def write_summary(records: Sequence[ResultRecord], out_dir: str | os.PathLike,
                  config: ExperimentConfig | None = None, name: str = "summary.json") -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = {"schema_version": SCHEMA_VERSION,
           "config": config.to_dict() if config is not None else None,
           "records": [r.summary() for r in records]}
    p = out / name
    p.write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")
    return p


def save_solution(defect: defect_bvp.TruncatedDefect, stem: str | os.PathLike,
                  model: dict | None = None) -> tuple[Path, Path]:
    """Write ``U`` as little-endian float64 to ``stem.bin`` and metadata to ``stem.json``."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    g = defect.grid
    bin_path, meta_path = stem.with_suffix(".bin"), stem.with_suffix(".json")
    bin_path.write_bytes(np.ascontiguousarray(defect.U, dtype="<f8").tobytes())
    meta = {
        "format": "float64-le", "order": "C", "shape": list(defect.U.shape),
        "axes": ["x", "tau", "component"],
        "grid": {"L": g.L, "N_x": g.N_x, "N_tau": g.N_tau, "core_spacing": g.core_spacing,
                 "core_fraction": g.core_fraction, "ramp": g.ramp},
        "omega": defect.omega, "omega_d": defect.omega_d, "orientation": defect.orientation,
        "residual_norm": defect.residual_norm, "newton_iters": defect.newton_iters,
        "model": model, "data": bin_path.name,
    }
    meta_path.write_text(json.dumps(_jsonable(meta), indent=2, sort_keys=True) + "\n")
    return bin_path, meta_path


def load_solution(path: str | os.PathLike) -> defect_bvp.TruncatedDefect:
    """Inverse of :func:`save_solution`; ``path`` is the sidecar or the stem."""
    meta_path = Path(path).with_suffix(".json")
    meta = json.loads(meta_path.read_text())
    gm = meta["grid"]
    grid = defect_bvp.SpaceTimeGrid(gm["L"], gm["N_x"], gm["N_tau"], gm["core_spacing"],
                                    gm["core_fraction"], gm["ramp"])
    raw = (meta_path.parent / meta["data"]).read_bytes()
    U = np.frombuffer(raw, dtype="<f8").reshape(meta["shape"]).astype(float)
    return defect_bvp.TruncatedDefect(grid, U, meta["omega"], meta["residual_norm"],
                                      meta["newton_iters"], [], meta["omega_d"],
                                      meta["orientation"])


# ---------------------------------------------------------------------------
# experiment runners


def _pool_map(fn, items, jobs: int):
    """Ordered map, in a process pool when ``jobs > 1``."""
    items = list(items)
    if jobs <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _normal_form_for(field: scalar_saddle.SaddleField) -> scalar_saddle.NormalForm:
    """Exact normal form when ``g = b y^3``; the fitted one otherwise."""
    keys = {k for k, v in field.g_taylor.items() if v != 0.0}
    if keys <= {(3, 0)}:
        return scalar_saddle.NormalForm.exact(b=(field.g_taylor.get((3, 0), 0.0),))
    return scalar_saddle.fit_normal_form(field)


def _travel_time_point(args):
    spec, eps, delta, leg, method = args
    field = build_field(spec)
    row = {"epsilon": eps, "delta": delta}
    try:
        if method in ("direct", "both"):
            r = scalar_saddle.travel_time_direct(field, eps, delta, leg)
            row.update(T=r.T, eps_T=r.scaled, err_estimate=r.err_estimate)
        if method in ("partial_fraction", "both"):
            r = scalar_saddle.travel_time_partial_fraction(_normal_form_for(field), eps, delta, leg)
            row.update(T_pf=r.T)
    except DefectError as exc:
        raise type(exc)(f"at epsilon={eps!r}, delta={delta!r}: {exc}") from exc
    return row


def run_travel_time(cfg: ExperimentConfig, jobs: int = 1) -> list[ResultRecord]:
    p = cfg.parameters
    spec, leg, method = p["field"], p["leg"], p["method"]
    pts = [(spec, e, d, leg, method) for d in p["delta"] for e in p["epsilon"]]
    rows = _pool_map(_travel_time_point, pts, jobs)
    zero = field_label(spec) in ("zero", "0")
    cols = ["epsilon", "delta"]
    if method != "partial_fraction":
        cols += ["T", "eps_T", "err_estimate"]
    if method != "direct":
        cols += ["T_pf"]
    if method == "both":
        cols += ["rel_diff"]
        for r in rows:
            r["rel_diff"] = abs(r["T_pf"] - r["T"]) / r["T"]
    if zero and leg != "Full":
        cols += ["fit"]
        for r in rows:
            r["fit"] = math.atan(r["delta"] / r["epsilon"])  # eps*T for g = 0
    table = Table(cols, [[r[c] for c in cols] for r in rows])
    measured, expected, passed = {}, {}, None
    if method == "both":
        measured["max_rel_diff"] = max(r["rel_diff"] for r in rows)
        expected["max_rel_diff"] = f"<= {p['tolerance']:g}"
        passed = measured["max_rel_diff"] <= p["tolerance"]
    if zero and "eps_T" in cols and leg != "Full":
        measured["max_rel_err_vs_arctan"] = max(abs(r["eps_T"] - r["fit"]) / r["fit"] for r in rows)
    return [ResultRecord(cfg.experiment.value, "travel_time", p, CLAIMS[cfg.experiment],
                         {"main": table}, passed, p["tolerance"], measured, expected)]


def run_log_coefficient(cfg: ExperimentConfig, jobs: int = 1) -> list[ResultRecord]:
    p = cfg.parameters
    field = build_field(p["field"])
    est = scalar_saddle.extract_log_coefficient(field, p["epsilon"], p["delta"], p["leg"],
                                                stencil=p["stencil"])
    zeta = {e: z for e, _, z in est.zeta_samples}
    rows = [[e, eta, eta / e, est.slope_at_zero * e, zeta[e]] for e, eta in est.eta_samples]
    table = Table(["x", "y", "eta_over_eps", "fit", "zeta"], rows)
    measured = {"eta_prime_at_zero": est.slope_at_zero, "max_abs_eta": est.max_abs_eta}
    return [ResultRecord(cfg.experiment.value, "log_coefficient", p, CLAIMS[cfg.experiment],
                         {"main": table}, measured=measured,
                         notes=["columns: x = epsilon, y = eta_hat(epsilon)"])]


def _invert_point(args):
    spec, L, delta, leg = args
    try:
        return scalar_saddle.solve_epsilon_for_length(build_field(spec), L, delta, leg)
    except DefectError as exc:
        raise type(exc)(f"at L={L!r}: {exc}") from exc


def run_invert_epsilon(cfg: ExperimentConfig, jobs: int = 1) -> list[ResultRecord]:
    p = cfg.parameters
    res = _pool_map(_invert_point, [(p["field"], L, p["delta"], p["leg"]) for L in p["L"]], jobs)
    Ls = [r.L for r in res]
    c, coef = scalar_saddle.fit_inverse_constant(Ls, [r.epsilon_star for r in res])
    rows = []
    for r in res:
        fit = sum(coef[k] * r.L ** -k for k in range(len(coef)))
        rows.append([r.L, r.epsilon_star, r.epsilon_star * r.L, r.derivative * r.L**2,
                     r.residual, r.residual / r.L, fit])
    table = Table(["x", "epsilon_star", "y", "deps_dL_times_L2", "residual", "rel_residual", "fit"],
                  rows)
    half_pi, printed = math.pi / 2, 2 / math.pi
    measured = {"constant": c, "rel_dev_from_pi_over_2": abs(c - half_pi) / half_pi,
                "rel_dev_from_2_over_pi": abs(c - printed) / printed,
                "max_rel_residual": max(r.residual / r.L for r in res),
                "max_derivative_mismatch": max(abs(r.derivative * r.L**2 / -c - 1) for r in res)}
    passed = measured["rel_dev_from_pi_over_2"] <= p["tolerance"] if field_label(p["field"]) in ("zero", "0") else None
    notes = ["columns: x = L, y = epsilon_star * L, fit = c + c1/L + c2/L^2"]
    if measured["rel_dev_from_2_over_pi"] > p["tolerance"]:
        notes.append("printed constant 2/pi is inconsistent with the measured constant; "
                     "the pure quadratic passage gives pi/2")
    return [ResultRecord(cfg.experiment.value, "invert_epsilon", p, CLAIMS[cfg.experiment],
                         {"main": table}, passed, p["tolerance"], measured,
                         {"constant": half_pi, "printed_constant": printed}, notes)]


def run_asymptote(cfg: ExperimentConfig, jobs: int = 1) -> list[ResultRecord]:
    p = cfg.parameters
    field = build_field(p["field"])
    weight = p["weight"]
    if weight == "auto":
        weight = "x2" if field.g_yyy0 == 0.0 else "x2/logx"
    xr = (p["x_min"], p["x_max"])
    xs, ys = scalar_saddle.asymptote_profile(field, xr, p["x0"], p["y0"], n=p["samples"])
    w = xs**2 if weight == "x2" else xs**2 / np.log(xs)
    dev = w * np.abs(ys + 1 / xs)
    table = Table(["x", "y", "fit", "weighted_deviation"],
                  [[a, b, -1 / a, d] for a, b, d in zip(xs, ys, dev)])
    sup = scalar_saddle.asymptote_check(field, xr, p["x0"], p["y0"], weight)
    return [ResultRecord(cfg.experiment.value, "asymptote", p, CLAIMS[cfg.experiment],
                         {"main": table}, measured={"weighted_sup": sup, "weight": weight})]


def _center_point(args):
    spec, eps, delta0 = args
    field = build_field(spec)
    d0 = field.delta0 if delta0 is None else delta0
    rep = center_flow.passage_report(field, eps, d0)
    ez, eb = center_flow.local_expansion_check(field, eps, d0)
    quad = center_flow.alpha_drift_quadrature(field, eps, d0)
    return [eps, rep.L_of_eps, rep.scaled_length, rep.alpha_drift, quad, ez, eb]


def run_center_flow(cfg: ExperimentConfig, jobs: int = 1) -> list[ResultRecord]:
    p = cfg.parameters
    rows = _pool_map(_center_point, [(p["field"], e, p["delta0"]) for e in p["epsilon"]], jobs)
    for r in rows:
        r.append(math.pi / 2)
    table = Table(["x", "L", "y", "alpha_drift", "alpha_drift_quadrature", "err_near_zero",
                   "err_near_boundary", "fit"], rows)
    field = build_field(p["field"])
    lf = center_flow.phase_drift_log_check(field)
    measured = {"max_err_near_zero": max(r[5] for r in rows),
                "max_err_near_boundary": max(r[6] for r in rows),
                "max_alpha_drift_mismatch": max(abs(r[3] - r[4]) for r in rows),
                "phase_drift_log_slope": lf.slope, "phase_drift_log_rms": lf.residual}
    return [ResultRecord(cfg.experiment.value, "center_flow", p, CLAIMS[cfg.experiment],
                         {"main": table}, measured=measured,
                         notes=["columns: x = epsilon, y = epsilon * L(epsilon), fit = pi/2"])]


def _wave_train(p):
    system = build_model(p["model"])
    wt = wave_trains.find_wave_train(system, wave_trains.circle_guess(), p["N_tau"])
    return system, wt


def run_wave_train(cfg: ExperimentConfig, jobs: int = 1) -> list[ResultRecord]:
    p = cfg.parameters
    system, wt = _wave_train(p)
    rows = [[t, *u] for t, u in zip(wt.tau, wt.values)]
    table = Table(["tau"] + [f"u{i + 1}" for i in range(system.d)], rows)
    measured = {"omega_d": wt.omega_d, "amplitude_min": float(wt.amplitude.min()),
                "amplitude_max": float(wt.amplitude.max()), "residual": wt.residual}
    expected = {}
    if system.gauge_coeffs is not None:
        expected = {"omega_d": system.reference_omega_d(),
                    "amplitude": math.sqrt(system.homogeneous_amplitude_squared())}
    return [ResultRecord(cfg.experiment.value, "wave_train", p, CLAIMS[cfg.experiment],
                         {"main": table}, measured=measured, expected=expected)]


def run_dispersion(cfg: ExperimentConfig, jobs: int = 1) -> list[ResultRecord]:
    p = cfg.parameters
    system, wt = _wave_train(p)
    disp = wave_trains.dispersion(system, wt, p["k_grid"], p["l_grid"])
    hyp = wave_trains.check_hypotheses(system, wt, disp, p["threshold"], seed=cfg.seed)
    rows = [["omega_nl", k, v, 0.0] for k, v in disp.omega_nl_samples]
    rows += [["lambda_lin", k, v.real, v.imag] for k, v in disp.lambda_lin_samples]
    table = Table(["branch", "wavenumber", "re", "im"], rows)
    measured = dict(hyp.summary())
    try:
        rc = wave_trains.reduced_coefficients(disp)
        measured.update(kappa=rc.kappa, unfold=rc.unfold, orientation=rc.orientation,
                        eps_sq_scale=rc.eps_sq_scale)
    except ZeroDivisionError:
        pass
    expected = {}
    if system.gauge_coeffs is not None and np.allclose(system.D, 1.0):
        expected["omega_nl_pp0"] = system.reference_omega_nl_pp0()
    return [ResultRecord(cfg.experiment.value, "dispersion", p, CLAIMS[cfg.experiment],
                         {"main": table}, measured=measured, expected=expected)]


# defect family -------------------------------------------------------------


@dataclass
class FamilyRun:
    system: models.ReactionDiffusionSystem
    wt: wave_trains.WaveTrain
    reduced: wave_trains.ReducedCoefficients
    start: defect_bvp.TruncatedDefect
    members: list
    log: list


def initial_frequency(omega_d: float, reduced: wave_trains.ReducedCoefficients, L: float,
                      core_offset: float) -> float:
    """Passage-law guess ``omega_d + orientation * (pi/2)^2 / (scale (L + offset)^2)``."""
    eps_n = (math.pi / 2) / (L + core_offset)
    return omega_d + reduced.orientation * eps_n**2 / reduced.eps_sq_scale


def compute_family(p: dict, log: Callable[[str], None] | None = None,
                   schedule: Sequence[float] | None = None) -> FamilyRun:
    """Locate the defect at ``L_start`` (or reload ``restart``) and continue along the schedule."""
    lines = []

    def emit(msg):
        lines.append(msg)
        if log is not None:
            log(msg)

    system = build_model(p["model"])
    wt = wave_trains.find_wave_train(system, wave_trains.circle_guess(), p["N_tau"])
    disp = wave_trains.dispersion(system, wt)
    rc = wave_trains.reduced_coefficients(disp)
    emit(f"omega_d = {wt.omega_d:.15g}, kappa = {rc.kappa:.6g}, eps_sq_scale = {rc.eps_sq_scale:.6g}")
    if p.get("restart"):
        start = load_solution(p["restart"])
        emit(f"restarted from {p['restart']} at L = {start.L:g}")
    else:
        grid = defect_bvp.SpaceTimeGrid(p["L_start"], p["N_x"], p["N_tau"], p["core_spacing"])
        U0 = defect_bvp.build_initial_guess(wt, grid, width=p["guess_width"],
                                            profile=p["guess_profile"])
        om0 = p["omega0"]
        if om0 is None:
            om0 = initial_frequency(wt.omega_d, rc, p["L_start"], p["core_offset"])
        start = defect_bvp.newton_solve(system, grid, U0, om0, tol=p["tol"], omega_d=wt.omega_d,
                                        orientation=rc.orientation)
        emit(f"L = {start.L:g}: converged in {start.newton_iters} iterations, "
             f"omega = {start.omega:.15g}")
    sched = [L for L in (p["L_schedule"] if schedule is None else schedule) if L > start.L]

    def cb(d):
        emit(f"L = {d.L:.6g}: {d.newton_iters} iterations, residual {d.residual_norm:.3g}, "
             f"omega - omega_d = {d.omega - wt.omega_d:.6g}")

    members = defect_bvp.continue_in_L(system, start, sched, tol=p["tol"],
                                       max_ratio=p["max_ratio"], core_offset=p["core_offset"],
                                       pseudo_time=p["pseudo_time"], callback=cb) if sched else []
    return FamilyRun(system, wt, rc, start, [start] + members, lines)


def _family_rows(run: FamilyRun):
    rows = []
    for d in run.members:
        rows.append([d.L, d.omega, d.epsilon_star, d.epsilon_star * d.L, d.residual_norm,
                     d.newton_iters, d.observed_order(), defect_bvp.check_reversibility(d, "Rpi"),
                     d.bc_residual])
    return Table(["L", "omega", "epsilon_star", "epsilon_star_L", "residual", "newton_iters",
                  "observed_order", "reversibility_Rpi", "bc_residual"], rows)


def run_defect(cfg: ExperimentConfig, jobs: int = 1) -> list[ResultRecord]:
    p = cfg.parameters
    start = time.perf_counter()
    run = compute_family(p)
    if p["save_solutions"]:
        for d in run.members:
            save_solution(d, Path(cfg.output_dir) / "solutions" / f"defect_L{d.L:g}", p["model"])
    table = _family_rows(run)
    measured = {"max_residual": max(d.residual_norm for d in run.members),
                "max_reversibility_Rpi": max(r[7] for r in table.rows),
                "epsilon_star_decreasing": bool(all(b[2] < a[2] for a, b in zip(table.rows, table.rows[1:])))}
    return [ResultRecord(cfg.experiment.value, "defect_family", p, CLAIMS[cfg.experiment],
                         {"main": table}, measured=measured, notes=run.log,
                         seconds=time.perf_counter() - start)]


def scaling_tables(rep: defect_bvp.ScalingReport) -> dict:
    """Plot-ready ``(x, y, fit)`` tables for each scaling law in ``rep``."""
    Ls = np.array([f[0] for f in rep.family])
    eps = np.array([f[1] for f in rep.family])
    amp = math.exp(np.polyfit(np.log(Ls), np.log(eps), 1)[1])
    out = {"epsilon_star": Table(["x", "y", "fit", "omega"],
                                 [[L, e, amp * L**rep.fitted_exponent, om] for L, e, om in rep.family])}

    def power_table(pairs, exponent):
        xs = np.array([a for a, _ in pairs])
        ys = np.array([b for _, b in pairs])
        c = math.exp(np.mean(np.log(ys) - exponent * np.log(xs)))
        return Table(["x", "y", "fit"], [[a, b, c * a**exponent] for a, b in zip(xs, ys)])

    out["distance"] = power_table(rep.distance_to_reference, rep.distance_exponent)
    out["y_deviation"] = power_table(rep.y_deviation, rep.y_exponent)
    a, b, _ = rep.phase_drift_fit
    out["phase_drift"] = Table(["x", "y", "fit"], [[L, v, a * math.log(L) + b] for L, v in rep.phase_drift])
    out["distance_global"] = Table(["x", "y"], [list(t) for t in rep.distance_global_alignment])
    return out


def scaling_from_family(run: FamilyRun, family_L: Sequence[float], reference_L: float,
                        x_core: float) -> defect_bvp.ScalingReport:
    by_L = {round(d.L, 9): d for d in run.members}
    try:
        fam = [by_L[round(L, 9)] for L in family_L]
        ref = by_L[round(reference_L, 9)]
    except KeyError as exc:
        raise ConfigInvalid("family and reference lengths must lie on the continuation schedule",
                            [f"parameters.family: length {exc.args[0]} was not computed"]) from exc
    return defect_bvp.verify_scaling_laws(fam, run.wt, reference=ref,
                                      eps_sq_scale=run.reduced.eps_sq_scale, x_core=x_core)


def run_scaling(cfg: ExperimentConfig, jobs: int = 1) -> list[ResultRecord]:
    p = cfg.parameters
    start = time.perf_counter()
    needed = sorted(set(p["L_schedule"]) | set(p["family"]) | {p["reference_L"]})
    run = compute_family(p, schedule=needed)
    rep = scaling_from_family(run, p["family"], p["reference_L"], p["x_core"])
    if p["save_solutions"]:
        for d in run.members:
            save_solution(d, Path(cfg.output_dir) / "solutions" / f"defect_L{d.L:g}", p["model"])
    tables = scaling_tables(rep)
    tables["family"] = _family_rows(run)
    measured = {"epsilon_star_exponent": rep.fitted_exponent, "constant": rep.fitted_constant,
                "normalized_constant": rep.normalized_constant,
                "distance_exponent": rep.distance_exponent, "y_exponent": rep.y_exponent,
                "phase_drift_log_slope": rep.phase_drift_fit[0], "reference_error": rep.reference_error}
    expected = {"epsilon_star_exponent": -1.0, "normalized_constant": math.pi / 2,
                "distance_exponent": -2.0, "y_exponent": -1.0, "phase_drift_log_slope": "> 0"}
    return [ResultRecord(cfg.experiment.value, "scaling", p, CLAIMS[cfg.experiment], tables,
                         measured=measured, expected=expected, notes=run.log + rep.notes,
                         seconds=time.perf_counter() - start)]


RUNNERS = {
    Experiment.TRAVEL_TIME: run_travel_time,
    Experiment.LOG_COEFFICIENT: run_log_coefficient,
    Experiment.INVERT_EPSILON: run_invert_epsilon,
    Experiment.ASYMPTOTE: run_asymptote,
    Experiment.CENTER_FLOW: run_center_flow,
    Experiment.WAVE_TRAIN: run_wave_train,
    Experiment.DISPERSION: run_dispersion,
    Experiment.DEFECT_CONTINUATION: run_defect,
    Experiment.SCALING_REPORT: run_scaling,
}


def run(config: ExperimentConfig, jobs: int = 1, write: bool = True) -> list[ResultRecord]:
    """Run one experiment, write its tables and summary, and return the records."""
    if config.experiment is Experiment.ACCEPTANCE:
        from .acceptance import run_acceptance

        return run_acceptance(config, jobs=jobs, write=write)
    start = time.perf_counter()
    records = RUNNERS[config.experiment](config, jobs)
    elapsed = time.perf_counter() - start
    for r in records:
        if not r.seconds:
            r.seconds = elapsed
    if write:
        write_tables(records, config.output_dir)
        write_summary(records, config.output_dir, config)
    return records


def report(records: Sequence[ResultRecord], stream=None) -> int:
    """Print one line per record and return the process exit code."""
    import sys

    stream = sys.stdout if stream is None else stream
    failed = False
    for r in records:
        tag = f"criterion {r.criterion}" if r.criterion is not None else r.name
        shown = ", ".join(f"{k}={_short(v)}" for k, v in r.measured.items())
        budget = f" / {r.budget_seconds:g} s" if r.budget_seconds else ""
        print(f"[{r.status}] {tag}: {r.claim} | {shown} | {r.seconds:.1f} s{budget}", file=stream)
        failed |= r.status == "FAIL"
    return 1 if failed else 0


def _short(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6g}"
    return str(v)
