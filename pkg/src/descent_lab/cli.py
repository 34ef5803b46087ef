"""``descent-lab``: run a configured experiment and write CSV, SVG and a report.

Usage::

    descent-lab CONFIG [--set section.key=value]... [--out DIR]

The config is sectioned ``key = value`` text with sections ``[experiment]``,
``[objective]``, ``[schedule]``, ``[tolerances]`` and ``[output]``. Lines
starting with ``#`` or ``;`` are comments. Unknown sections or keys, and
keys that do not apply to the selected objective or schedule, are errors.
The output directory is, in decreasing priority, ``--out``, the
``DESCENT_LAB_OUT`` environment variable, then ``[output] dir``.

Exit status: 0 when every assertion of the experiment passes, 1 when an
assertion fails or a numerical operation raises (the report is still
written), 2 on a config error.
"""

import argparse
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import io, svg
from .descent import DEFAULT_TAIL_FRACTION, DEFAULT_TOL_G, detect_outcome, run
from .errors import ConfigError, DescentLabError, InvalidValueError, ParseError, UnknownKeyError
from .estimators import build_schedule
from .flow import (
    bisect_separatrix_bracket,
    contrast_discrete,
    default_bracket,
    integrate,
)
from .objectives import OBJECTIVES, Staircase
from .schedules import classify

KINDS = ("run-gd", "run-flow", "verify", "classify-schedule", "divergence-demo", "pdm-demo")
SECTIONS = ("experiment", "objective", "schedule", "tolerances", "output")

EXIT_OK, EXIT_ASSERT, EXIT_CONFIG = 0, 1, 2

OBJECTIVE_KEYS = {
    "quadratic_bowl": ("dim",),
    "exp_neg_square": (),
    "staircase": ("max_segments",),
    "palis_de_melo": (),
}
OBJECTIVE_DIMS = {"exp_neg_square": 1, "staircase": 1, "palis_de_melo": 2}
SCHEDULE_KEYS = {
    "power": ("exponent", "scale"),
    "log": ("scale",),
    "constant": ("value",),
    "diagonal_power": ("exponent", "weights"),
}
SCHEDULE_REQUIRED = {"power": ("exponent",), "constant": ("value",),
                     "diagonal_power": ("exponent", "weights")}
EXPERIMENT_KEYS = ("kind", "name", "seed", "x0", "budget", "T")
OUTPUT_KEYS = ("dir", "prefix", "svg", "csv")


# Value parsers. Each takes the raw string and returns the parsed value or
# raises ValueError with a message naming the precondition.

def _float(raw, positive=False, nonneg=False, finite=True):
    try:
        v = float(raw)
    except ValueError:
        raise ValueError(f"expected a number, got {raw!r}") from None
    if finite and not math.isfinite(v):
        raise ValueError(f"expected a finite number, got {raw!r}")
    if positive and not v > 0:
        raise ValueError(f"must be > 0, got {raw}")
    if nonneg and not v >= 0:
        raise ValueError(f"must be >= 0, got {raw}")
    return v


def _int(raw, minimum=0):
    v = _float(raw)
    if v != int(v):
        raise ValueError(f"expected an integer, got {raw!r}")
    v = int(v)
    if v < minimum:
        raise ValueError(f"must be >= {minimum}, got {v}")
    return v


def _floats(raw):
    parts = [p for p in raw.replace(",", " ").split()]
    if not parts:
        raise ValueError("expected a list of numbers")
    return tuple(_float(p) for p in parts)


def _bool(raw):
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


def _pos(raw):
    return _float(raw, positive=True)


def _ident(raw):
    if not raw or any(c in raw for c in "/\\\0") or raw.startswith("."):
        raise ValueError(f"not usable in a file name: {raw!r}")
    return raw


def _tail_fraction(raw):
    v = _float(raw)
    if not 0 < v <= 0.5:
        raise ValueError(f"tail_fraction must be in (0, 1/2], got {raw}")
    return v


def _q_grid(raw):
    qs = _floats(raw)
    for q in qs:
        if not q > 1:
            raise ValueError(f"every q must be > 1, got {q:g}")
    return qs


def _weights(raw):
    w = _floats(raw)
    if any(v <= 0 for v in w):
        raise ValueError("weights must be positive")
    return w


TOLERANCE_KEYS = {
    "tol_x": _pos,
    "tol_g": _pos,
    "escape_radius": _pos,
    "tail_fraction": _tail_fraction,
    "rel_tol": _pos,
    "abs_tol": _pos,
    "radius": _pos,
    "center": _floats,
    "n_samples": lambda r: _int(r, 2),
    "slack_rel": lambda r: _float(r, nonneg=True),
    "lipschitz": lambda r: _float(r, nonneg=True),
    "grad_bound": lambda r: _float(r, nonneg=True),
    "horizon": lambda r: _int(r, 2),
    "q_grid": _q_grid,
    "settle_tol": _pos,
    "bisect_iters": lambda r: _int(r, 0),
    "bisect_T": _pos,
    "bisect_lo": _pos,
    "bisect_hi": _pos,
    "contrast_T": _pos,
}
OBJECTIVE_PARSERS = {"dim": lambda r: _int(r, 1), "max_segments": lambda r: _int(r, 1)}
SCHEDULE_PARSERS = {"exponent": _pos, "scale": _pos, "value": _pos, "weights": _weights}
EXPERIMENT_PARSERS = {
    "kind": None,
    "name": _ident,
    "seed": lambda r: _int(r, 0),
    "x0": _floats,
    "budget": lambda r: _int(r, 1),
    "T": _pos,
}
OUTPUT_PARSERS = {"dir": str, "prefix": lambda r: r if r == "" else _ident(r), "svg": _bool,
                  "csv": _bool}

# Per-kind defaults that differ from the generic ones.
KIND_DEFAULTS = {
    "run-gd": {"budget": 1000},
    "verify": {"budget": 1000},
    "run-flow": {"T": 10.0},
    "divergence-demo": {"budget": 10_000, "objective": "staircase",
                        "schedule": ("power", {"exponent": 1.0})},
    "pdm-demo": {"budget": 100_000, "objective": "palis_de_melo",
                 "schedule": ("power", {"exponent": 0.75, "scale": 0.1})},
    "classify-schedule": {},
}
TOLERANCE_DEFAULTS = {
    "tol_g": DEFAULT_TOL_G,
    "tail_fraction": DEFAULT_TAIL_FRACTION,
    "rel_tol": 1e-8,
    "abs_tol": 1e-12,
    "radius": 1.0,
    "n_samples": 10_000,
    "slack_rel": 1e-9,
    "horizon": 100_000,
    "q_grid": (2.0, 4.0, 8.0),
    "settle_tol": 0.1,
    "bisect_iters": 40,
    "bisect_T": 100.0,
    "contrast_T": 200.0,
}
KIND_TOLERANCE_DEFAULTS = {
    "divergence-demo": {"escape_radius": 5.0},
    "pdm-demo": {"tol_g": 1e-3, "rel_tol": 1e-10, "abs_tol": 1e-13},
}


@dataclass
class ExperimentConfig:
    kind: str
    name: str
    seed: int
    objective: str
    objective_params: dict
    schedule: str | None
    schedule_params: dict
    x0: tuple | None
    budget: int | None
    T: float | None
    tolerances: dict
    out_dir: str
    prefix: str = ""
    svg: bool = True
    csv: bool = True


@dataclass
class RunReport:
    kind: str
    status: str = "ok"
    summary: list = field(default_factory=list)
    assertions: list = field(default_factory=list)
    files: list = field(default_factory=list)
    wall_clock: float = 0.0

    def check(self, name, passed, detail=""):
        self.assertions.append((name, bool(passed), detail))
        return bool(passed)

    @property
    def exit_code(self):
        if self.status == "config_error":
            return EXIT_CONFIG
        if self.status != "ok" or not all(p for _, p, _ in self.assertions):
            return EXIT_ASSERT
        return EXIT_OK

    def lines(self):
        out = [f"experiment {self.kind}"]
        out.extend(f"  {s}" for s in self.summary)
        for name, passed, detail in self.assertions:
            out.append(f"ASSERT {name} {'PASS' if passed else 'FAIL'}" + (f" {detail}" if detail else ""))
        for path, rows in self.files:
            out.append(f"FILE {path} rows={rows}")
        out.append(f"WALL_CLOCK {self.wall_clock:.3f}s")
        status = {EXIT_OK: "ok", EXIT_ASSERT: "assertion_failure", EXIT_CONFIG: "config_error"}
        label = self.status if self.status not in ("ok",) else status[self.exit_code]
        out.append(f"STATUS {label} exit={self.exit_code}")
        return out


def _tokenise(text):
    """Map ``section -> key -> (raw value, line number)``."""
    sections = {}
    current = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped[0] in "#;":
            continue
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ParseError(f"malformed section header {stripped!r}", lineno)
            current = stripped[1:-1].strip()
            if current not in SECTIONS:
                raise UnknownKeyError(f"unknown section [{current}]", lineno)
            if current in sections:
                raise ParseError(f"duplicate section [{current}]", lineno)
            sections[current] = {}
            continue
        if "=" not in stripped:
            raise ParseError(f"expected 'key = value', got {stripped!r}", lineno)
        if current is None:
            raise ParseError("key outside of any section", lineno)
        key, _, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if not key:
            raise ParseError("empty key", lineno)
        if key in sections[current]:
            raise ParseError(f"duplicate key {current}.{key}", lineno)
        sections[current][key] = (value, lineno)
    return sections


def _apply_overrides(sections, overrides):
    for item in overrides:
        lhs, eq, value = item.partition("=")
        section, dot, key = lhs.strip().partition(".")
        if not eq or not dot or not key:
            raise ParseError(f"--set expects section.key=value, got {item!r}")
        if section not in SECTIONS:
            raise UnknownKeyError(f"--set {lhs.strip()}: unknown section [{section}]")
        sections.setdefault(section, {})[key.strip()] = (value.strip(), None)


def _parse_section(entries, parsers, section, where=""):
    out = {}
    for key, (raw, line) in entries.items():
        if key not in parsers:
            raise UnknownKeyError(f"unknown key {section}.{key}{where}", line)
        parser = parsers[key]
        try:
            out[key] = raw if parser is None else parser(raw)
        except ValueError as exc:
            raise InvalidValueError(f"{section}.{key}: {exc}", line) from None
    return out


def _line_of(entries, key):
    item = entries.get(key)
    return item[1] if item else None


def parse_config(text, overrides=(), out_dir=None, env=None):
    """Parse and validate config text; raises :class:`ConfigError` subclasses."""
    env = os.environ if env is None else env
    sections = _tokenise(text)
    _apply_overrides(sections, overrides)
    exp_e = sections.get("experiment", {})
    obj_e = sections.get("objective", {})
    sch_e = sections.get("schedule", {})

    exp = _parse_section(exp_e, EXPERIMENT_PARSERS, "experiment")
    kind = exp.get("kind")
    if kind is None:
        raise InvalidValueError("missing required key experiment.kind")
    if kind not in KINDS:
        raise InvalidValueError(f"experiment.kind must be one of {', '.join(KINDS)}, got {kind!r}",
                                _line_of(exp_e, "kind"))
    kd = KIND_DEFAULTS[kind]

    obj_name = obj_e.get("name", (kd.get("objective"), None))[0]
    if kind != "classify-schedule":
        if obj_name is None:
            raise InvalidValueError(f"{kind} needs [objective] name")
        if obj_name not in OBJECTIVES:
            raise InvalidValueError(
                f"objective.name must be one of {', '.join(OBJECTIVES)}, got {obj_name!r}",
                _line_of(obj_e, "name"))
        default_obj = kd.get("objective")
        if default_obj and obj_name != default_obj:
            raise InvalidValueError(f"{kind} requires objective {default_obj}",
                                    _line_of(obj_e, "name"))
        obj_params = _parse_section(
            {k: v for k, v in obj_e.items() if k != "name"},
            {k: OBJECTIVE_PARSERS[k] for k in OBJECTIVE_KEYS[obj_name]},
            "objective", f" for objective {obj_name}")
    elif obj_e:
        key = next(iter(obj_e))
        raise UnknownKeyError(f"classify-schedule takes no [objective] keys ({key})",
                              _line_of(obj_e, key))
    else:
        obj_params = {}

    default_sched = kd.get("schedule")
    sch_name = sch_e.get("name", (default_sched[0] if default_sched else None, None))[0]
    needs_schedule = kind != "run-flow"
    if needs_schedule:
        if sch_name is None:
            raise InvalidValueError(f"{kind} needs [schedule] name")
        if sch_name not in SCHEDULE_KEYS:
            raise InvalidValueError(
                f"schedule.name must be one of {', '.join(SCHEDULE_KEYS)}, got {sch_name!r}",
                _line_of(sch_e, "name"))
        sch_params = dict(default_sched[1]) if default_sched and "name" not in sch_e else {}
        sch_params.update(_parse_section(
            {k: v for k, v in sch_e.items() if k != "name"},
            {k: SCHEDULE_PARSERS[k] for k in SCHEDULE_KEYS[sch_name]},
            "schedule", f" for schedule {sch_name}"))
        for key in SCHEDULE_REQUIRED.get(sch_name, ()):
            if key not in sch_params:
                raise InvalidValueError(f"schedule {sch_name} needs schedule.{key}")
    elif sch_e:
        key = next(iter(sch_e))
        raise UnknownKeyError(f"run-flow takes no [schedule] keys ({key})", _line_of(sch_e, key))
    else:
        sch_name, sch_params = None, {}

    tol = dict(TOLERANCE_DEFAULTS)
    tol.update(KIND_TOLERANCE_DEFAULTS.get(kind, {}))
    tol.update(_parse_section(sections.get("tolerances", {}), TOLERANCE_KEYS, "tolerances"))
    output = _parse_section(sections.get("output", {}), OUTPUT_PARSERS, "output")

    dim = None
    if obj_name is not None and kind != "classify-schedule":
        dim = OBJECTIVE_DIMS.get(obj_name, obj_params.get("dim", 1))
    x0 = exp.get("x0")
    if x0 is not None and dim is not None and len(x0) != dim:
        raise InvalidValueError(f"experiment.x0 has {len(x0)} entries, objective has dim {dim}",
                                _line_of(exp_e, "x0"))
    center = tol.get("center")
    if center is not None and dim is not None and len(center) != dim:
        raise InvalidValueError(f"tolerances.center has {len(center)} entries, expected {dim}",
                                _line_of(sections.get("tolerances", {}), "center"))
    if sch_name == "diagonal_power" and dim is not None and len(sch_params["weights"]) != dim:
        raise InvalidValueError(f"schedule.weights must have {dim} entries",
                                _line_of(sch_e, "weights"))
    if obj_name == "staircase" and sch_name == "diagonal_power":
        raise InvalidValueError("staircase needs a scalar schedule", _line_of(sch_e, "name"))

    uses_budget = kind not in ("run-flow", "classify-schedule")
    budget = exp.get("budget", kd.get("budget")) if uses_budget else None
    T = exp.get("T", kd.get("T")) if kind == "run-flow" else None

    out = out_dir or env.get("DESCENT_LAB_OUT") or output.get("dir") or "descent_lab_out"
    return ExperimentConfig(
        kind=kind, name=exp.get("name", kind), seed=exp.get("seed", 0),
        objective=obj_name, objective_params=obj_params,
        schedule=sch_name, schedule_params=sch_params,
        x0=x0, budget=budget, T=T, tolerances=tol, out_dir=out,
        prefix=output.get("prefix", ""), svg=output.get("svg", True), csv=output.get("csv", True),
    )


# Execution.

# Config key -> factory argument.
_SCHEDULE_ARGS = {"exponent": "a", "scale": "c", "value": "c", "weights": "weights"}


def _schedule(cfg):
    params = {_SCHEDULE_ARGS[k]: v for k, v in cfg.schedule_params.items()}
    return build_schedule(cfg.schedule, params)


def _objective(cfg, schedule=None):
    if cfg.objective == "staircase":
        return Staircase(schedule if schedule is not None else _schedule(cfg),
                         **cfg.objective_params)
    return OBJECTIVES[cfg.objective](**cfg.objective_params)


def _x0(cfg, obj, default=1.0):
    if cfg.x0 is not None:
        return np.array(cfg.x0, dtype=float)
    return np.full(obj.dim, default)


def _path(cfg, suffix):
    return os.path.join(cfg.out_dir, f"{cfg.prefix}{cfg.name}_{suffix}")


def _emit_trace(cfg, report, trace, obj):
    tol = cfg.tolerances
    if cfg.csv:
        path = _path(cfg, "trace.csv")
        rows = io.write_trace_csv(trace, path, tol.get("center"), tol.get("radius", np.inf))
        report.files.append((path, rows))
    if cfg.svg:
        if trace.dim == 2:
            doc = svg.trajectory_svg(trace.x, f"{cfg.name}: {obj.name} iterates")
            path = _path(cfg, "trajectory.svg")
        else:
            f = trace.f - obj.lower_bound if obj.lower_bound is not None else trace.f
            label = "F - F_lb" if obj.lower_bound is not None else "F"
            doc = svg.log_series_svg(np.arange(len(trace)), {label: f, "grad_norm": trace.grad_norm},
                                     f"{cfg.name}: {obj.name}")
            path = _path(cfg, "history.svg")
        svg.write_svg(path, doc)
        report.files.append((path, 1))


def _emit_flow(cfg, report, ftrace, obj, suffix="flow"):
    if cfg.csv:
        path = _path(cfg, f"{suffix}.csv")
        report.files.append((path, io.write_flow_csv(ftrace, path)))
    if cfg.svg and ftrace.y.shape[1] == 2:
        path = _path(cfg, f"{suffix}.svg")
        svg.write_svg(path, svg.trajectory_svg(ftrace.y, f"{cfg.name}: {obj.name} flow"))
        report.files.append((path, 1))


def _outcome(cfg, trace):
    tol = cfg.tolerances
    return detect_outcome(trace, tol.get("tol_x"), tol["tol_g"], tol.get("escape_radius"),
                          tol["tail_fraction"])


def _outcome_line(out):
    line = (f"outcome = {out.kind} (final |x| = {out.final_norm:.6g}, "
            f"final |grad| = {out.final_grad_norm:.6e}, tail diameter = {out.tail_diameter:.3e})")
    if out.x_star is not None:
        line += " x_star = [" + ", ".join(f"{v:.17g}" for v in out.x_star) + "]"
    return line


def _run_gd(cfg, report):
    s = _schedule(cfg)
    obj = _objective(cfg, s)
    trace = run(obj, s, _x0(cfg, obj), cfg.budget)
    out = _outcome(cfg, trace)
    report.summary += [f"objective = {obj.name}", f"schedule = {s.name}",
                       f"records = {len(trace)}", _outcome_line(out)]
    report.check("finite_iterates", trace.nonfinite_at is None,
                 "" if trace.nonfinite_at is None else f"stopped after k = {trace.nonfinite_at}")
    _emit_trace(cfg, report, trace, obj)
    return trace, obj, s


def _run_verify(cfg, report):
    from .descent import verify_descent_inequalities

    trace, obj, _ = _run_gd(cfg, report)
    tol = cfg.tolerances
    constants = None
    if "lipschitz" in tol or "grad_bound" in tol:
        if not ("lipschitz" in tol and "grad_bound" in tol):
            raise InvalidValueError("give both tolerances.lipschitz and tolerances.grad_bound")
        constants = (tol["lipschitz"], tol["grad_bound"])
    rep = verify_descent_inequalities(trace, obj, tol.get("center"), tol["radius"], constants,
                                      tol["n_samples"], cfg.seed, tol["slack_rel"])
    report.summary += [
        f"radius = {rep.radius:g}, L = {rep.l_hat:.6g}, G = {rep.g_hat:.6g}, C = {rep.c_hat:.6g}"
        + (" (estimated)" if rep.constants_estimated else " (given)"),
        f"K = {rep.K}, empty range = {rep.empty_range}, re-estimated = {rep.reestimated}",
        f"cumulative lhs = {rep.lhs[-1] if len(rep.lhs) else 0.0:.17g}, rhs = {rep.rhs:.17g}",
        f"min residual = {float(np.min(rep.residuals)) if len(rep.residuals) else 0.0:.3e}",
        f"verdict = {rep.verdict}",
    ]
    report.check("descent_inequalities", rep.verdict == "holds",
                 f"verdict={rep.verdict} violations={len(rep.violations)}")


def _run_flow(cfg, report):
    obj = _objective(cfg)
    tol = cfg.tolerances
    x0 = _x0(cfg, obj)
    ftrace = integrate(obj, x0, cfg.T, tol["rel_tol"], tol["abs_tol"])
    scale = 10 * tol["rel_tol"] * (1 + abs(ftrace.f[0]))
    resid = ftrace.energy_residual
    df = np.diff(ftrace.f)
    rise = float(df.max()) if df.size else 0.0
    report.summary += [
        f"objective = {obj.name}, T = {cfg.T:g}",
        f"accepted = {ftrace.accepted}, rejected = {ftrace.rejected}, "
        f"h in [{ftrace.h_min:.3e}, {ftrace.h_max:.3e}]",
        f"y(T) = [" + ", ".join(f"{v:.17g}" for v in ftrace.y[-1]) + "]",
        f"F(y(T)) = {ftrace.f[-1]:.17g}, dissipation = {ftrace.dissipation[-1]:.17g}",
    ]
    if ftrace.winding is not None:
        report.summary.append(f"winding = {ftrace.winding[-1]:.17g}")
    report.check("energy_identity", abs(resid) <= scale, f"residual={resid:.3e} bound={scale:.3e}")
    report.check("energy_nonincreasing", rise <= scale, f"max increase={rise:.3e}")
    _emit_flow(cfg, report, ftrace, obj)


def _run_classify(cfg, report):
    s = _schedule(cfg)
    tol = cfg.tolerances
    rep = classify(s, tol["horizon"], tol["q_grid"])
    report.summary += rep.lines()[0:1] + [ln.strip() for ln in rep.lines()[1:]]
    report.summary.append(f"declared tags = {s.tags}")
    report.check("tags_consistent", not rep.tag_conflicts,
                 "conflicts=" + (",".join(rep.tag_conflicts) or "none"))


def _run_divergence(cfg, report):
    s = _schedule(cfg)
    obj = _objective(cfg, s)
    x0 = _x0(cfg, obj, default=0.0)
    trace = run(obj, s, x0, cfg.budget)
    n = len(trace)
    grid = np.array([obj.spec.prefix(j) for j in range(n)])
    x = trace.x[:, 0]
    bitwise = x0[0] == 0.0 and np.array_equal(x, grid)
    rel = np.abs(trace.f - grid / 2) / np.maximum(1.0, np.abs(grid / 2))
    out = _outcome(cfg, trace)
    report.summary += [f"schedule = {s.name}", f"records = {n}",
                       f"final x = {x[-1]:.17g}, final S = {grid[-1]:.17g}", _outcome_line(out)]
    report.check("iterates_equal_prefix_sums", bitwise, "bitwise x_k == S_k")
    report.check("value_on_grid", float(rel.max()) <= 1e-12, f"max rel err={rel.max():.3e}")
    report.check("unit_gradient", bool(np.all(trace.grad_norm == 1.0)),
                 f"max ||F'|-1| = {np.abs(trace.grad_norm - 1).max():.3e}")
    report.check("diverging", out.kind == "Diverging", out.kind)
    _emit_trace(cfg, report, trace, obj)


def _run_pdm(cfg, report):
    tol = cfg.tolerances
    s = _schedule(cfg)
    lo, hi = default_bracket()
    bracket = bisect_separatrix_bracket(
        tol.get("bisect_lo", lo), tol.get("bisect_hi", hi), tol["bisect_T"], tol["bisect_iters"],
        rel_tol=tol["rel_tol"], abs_tol=tol["abs_tol"], settle_tol=tol["settle_tol"])
    band_lo, band_hi = 1 + 1 / (2 * math.pi), 1 + 1 / math.pi
    report.check("r_star_in_band", band_lo < bracket.r_star < band_hi,
                 f"r_star={bracket.r_star:.17g}")
    contrast = contrast_discrete(
        bracket.r_star, s, cfg.budget, tol["contrast_T"], tol_x=tol.get("tol_x"),
        tol_g=tol["tol_g"], escape_radius=tol.get("escape_radius"),
        tail_fraction=tol["tail_fraction"], rel_tol=tol["rel_tol"], abs_tol=tol["abs_tol"])
    report.summary += [f"bracket = [{bracket.lo:.17g}, {bracket.hi:.17g}] "
                       f"({bracket.lo_class} / {bracket.hi_class})", f"schedule = {s.name}"]
    report.summary += contrast.lines()
    out = contrast.outcome
    report.check("discrete_decided", out.kind in ("Converged", "Diverging"), out.kind)
    report.check("discrete_grad_small", out.final_grad_norm < tol["tol_g"],
                 f"|grad|={out.final_grad_norm:.3e}")
    report.check("discrete_tail_winding", contrast.discrete_tail_winding < 0.01,
                 f"{contrast.discrete_tail_winding:.3e} rad")
    obj = _objective(cfg)
    _emit_trace(cfg, report, contrast.discrete_trace, obj)
    _emit_flow(cfg, report, contrast.flow_trace, obj)


RUNNERS = {
    "run-gd": _run_gd,
    "verify": _run_verify,
    "run-flow": _run_flow,
    "classify-schedule": _run_classify,
    "divergence-demo": _run_divergence,
    "pdm-demo": _run_pdm,
}


def execute(cfg):
    """Run ``cfg`` and write its outputs; returns ``(report, exit code)``."""
    os.makedirs(cfg.out_dir, exist_ok=True)
    report = RunReport(cfg.kind)
    start = time.perf_counter()
    try:
        RUNNERS[cfg.kind](cfg, report)
    except ConfigError as exc:
        report.status = "config_error"
        report.summary.append(f"error: {exc}")
    except (DescentLabError, ValueError, ArithmeticError) as exc:
        report.status = f"error:{type(exc).__name__}"
        report.summary.append(f"error: {exc}")
    report.wall_clock = time.perf_counter() - start
    path = _path(cfg, "report.txt")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(report.lines()) + "\n")
    return report, report.exit_code


def main(argv=None):
    ap = argparse.ArgumentParser(prog="descent-lab", description=__doc__.split("\n")[0])
    ap.add_argument("config", help="experiment config file")
    ap.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                    help="override one config entry (repeatable)")
    ap.add_argument("--out", help="output directory")
    args = ap.parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
        cfg = parse_config(text, args.set, args.out)
    except ConfigError as exc:
        print(f"{args.config}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, UnicodeDecodeError) as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report, code = execute(cfg)
    print("\n".join(report.lines()))
    return code


if __name__ == "__main__":
    sys.exit(main())
