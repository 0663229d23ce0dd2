"""Experiment configs: YAML in, :class:`Scenario` out, with line-anchored errors.

Schema (unknown keys anywhere are errors)::

    name: my-run
    builtin: ex3-linear          # alternative to instance/schedule
    instance:
      norm: l2                   # l1 | l2 | linf
      T: {kind: rotation, angle: pi/2}
      f: {kind: constant, point: [1, 0]}
      x0: [1, 1]
      p: [0, 0]
    schedule:
      example: ex3               # ex1 | ex2 | ex3
      J: 4
      P: 4
      r_star: [0, 0]
      # or: inline sequences in n plus a bundle of moduli in k (and m)
    run: {trace_length: 100000, k_max: 50, tolerance: 1e-9, seed: 0}
    output: {trace: trace.csv, report: report.txt, rows: rows.csv}

See ``docs/config.md`` in the repository for the full key list.
"""
from __future__ import annotations

import copy
import dataclasses
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import operators as ops
from .builtins import all_names, example_certificates, lookup
from .expressions import Expression, ExpressionError
from .harness import Scenario
from .iteration import ModuliBundle, ParameterSchedule, ProblemInstance
from .moduli import DEFAULT_TOL, Kind, Modulus, ProductModulus
from .schedules import (Example1Params, Example2Params, Example3Params,
                        example1_schedule, example2_schedule, example3_rates,
                        example3_schedule)
from .spaces import Norm, NormedSpace


class ConfigError(ValueError):
    """Invalid config; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.message, self.line, self.source = message, line, source
        where = source or "config"
        super().__init__(f"{where}:{line}: {message}" if line else f"{where}: {message}")


# -- loading with line numbers -----------------------------------------------

def _walk(node, path, lines, source):
    lines[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        seen = set()
        for k, v in node.value:
            key = k.value
            if key in seen:
                raise ConfigError(f"duplicate key {key!r}", k.start_mark.line + 1, source)
            seen.add(key)
            lines[path + (key,)] = k.start_mark.line + 1
            _walk(v, path + (key,), lines, source)
            lines[path + (key,)] = k.start_mark.line + 1  # the key's line, not the value's
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _walk(v, path + (i,), lines, source)


def _load(text: str, source: str | None):
    try:
        loader = yaml.SafeLoader(text)
        try:
            node = loader.get_single_node()
            if node is None:
                raise ConfigError("empty config", None, source)
            lines = {}
            _walk(node, (), lines, source)
            data = loader.construct_document(node)
        finally:
            loader.dispose()
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        raise ConfigError(f"YAML syntax: {exc.problem or exc.context}",
                          mark.line + 1 if mark else None, source) from None
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", 1, source)
    return data, lines


class _Reader:
    def __init__(self, lines, source):
        self.lines, self.source = lines, source

    def line(self, path):
        path = tuple(path)
        while path and path not in self.lines:
            path = path[:-1]
        return self.lines.get(path)

    def fail(self, path, msg):
        raise ConfigError(msg, self.line(path), self.source)

    def mapping(self, data, path, allowed, required=()):
        if not isinstance(data, dict):
            self.fail(path, f"{'.'.join(map(str, path)) or 'config'} must be a mapping")
        for k in data:
            if k not in allowed:
                self.fail(tuple(path) + (k,), f"unknown key {k!r}; expected one of {sorted(allowed)}")
        for k in required:
            if k not in data:
                self.fail(path, f"missing required key {k!r} in {'.'.join(map(str, path)) or 'config'}")
        return data

    def natural(self, data, path, minimum=0):
        v = _get(data, path)
        if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
            self.fail(path, f"{path[-1]} must be an integer >= {minimum}, got {v!r}")
        return v

    def number(self, data, path):
        v = _get(data, path)
        if isinstance(v, bool):
            self.fail(path, f"{path[-1]} must be a number")
        try:
            return Expression(v, ()).exact()
        except (ExpressionError, ZeroDivisionError, OverflowError) as exc:
            self.fail(path, f"{path[-1]}: {exc}")

    def vector(self, data, path, dim=None):
        v = _get(data, path)
        if not isinstance(v, list) or not v:
            self.fail(path, f"{path[-1]} must be a non-empty list of numbers")
        out = [float(self.number(data, tuple(path) + (i,))) for i in range(len(v))]
        if dim is not None and len(out) != dim:
            self.fail(path, f"{path[-1]} has {len(out)} coordinates, expected {dim}")
        return out

    def expression(self, data, path, variables):
        try:
            return Expression(_get(data, path), variables)
        except ExpressionError as exc:
            self.fail(path, str(exc))


def _get(data, path):
    for p in path:
        data = data[p]
    return data


# -- schema --------------------------------------------------------------------

TOP_KEYS = {"name", "builtin", "instance", "schedule", "run", "output"}
RUN_KEYS = {"trace_length", "k_max", "tolerance", "seed", "moduli_k_max", "moduli_tail"}
OUTPUT_KEYS = {"trace", "report", "rows"}
INSTANCE_KEYS = {"norm", "T", "f", "x0", "p"}
OPERATOR_KEYS = {
    "identity": set(),
    "rotation": {"angle", "plane"},
    "reflection": {"normal", "offset"},
    "averaged_linear": {"matrix", "weight"},
    "affine_contraction": {"matrix", "offset", "rho"},
    "constant": {"point"},
    "box_projection": {"lower", "upper"},
    "ball_projection": {"center", "radius"},
}
EXAMPLE_KEYS = {
    "ex1": ({"J", "P", "lam", "r_star", "rho"}, {"J", "P", "lam"}),
    "ex2": ({"J", "P", "r_star", "rho"}, {"J", "P"}),
    "ex3": ({"J", "P", "r_star", "rho", "L"}, {"J", "P"}),
}
BUNDLE_K = ("sigma1", "sigma2", "sigma3", "theta1", "gamma1", "gamma2", "lambda1", "lambda2")
BUNDLE_KEYS = set(BUNDLE_K) | {"sigma1_star", "M_abd", "M_r", "nondecreasing"}
_KIND = {"sigma1": Kind.DIVERGENCE_RATE, "sigma3": Kind.CONVERGENCE_RATE,
         "gamma2": Kind.CONVERGENCE_RATE}
RUN_DEFAULTS = {"trace_length": 10_000, "k_max": 10, "tolerance": DEFAULT_TOL, "seed": 0}


@dataclass
class ExperimentConfig:
    """A validated config; ``data`` is the parsed mapping with run defaults filled in."""

    data: dict
    source: str | None = None
    notes: list = field(default_factory=list)
    _lines: dict = field(default_factory=dict, repr=False)

    @property
    def name(self) -> str:
        return self.data.get("name") or self.data.get("builtin") or "experiment"

    @property
    def outputs(self) -> dict:
        return dict(self.data.get("output") or {})

    def dump(self) -> str:
        """YAML text that parses back to an equivalent config."""
        return yaml.safe_dump(self.data, sort_keys=False, default_flow_style=None)

    def with_run(self, **overrides) -> "ExperimentConfig":
        """Copy with run parameters replaced (``None`` values are ignored)."""
        d = copy.deepcopy(self.data)
        run = d.setdefault("run", {})
        for k, v in overrides.items():
            if v is not None:
                run[k] = v
        _validate(d, _Reader(self._lines, self.source))
        return ExperimentConfig(d, self.source, list(self.notes), self._lines)

    # construction ---------------------------------------------------------
    def _reader(self):
        return _Reader(self._lines, self.source)

    def instance(self) -> ProblemInstance:
        r = self._reader()
        d = self.data["instance"]
        path = ("instance",)
        norm = d.get("norm", "l2")
        try:
            norm = Norm(norm)
        except ValueError:
            r.fail(path + ("norm",), f"norm must be one of l1, l2, linf, got {norm!r}")
        x0 = r.vector(self.data, path + ("x0",))
        dim = len(x0)
        p = r.vector(self.data, path + ("p",), dim)
        space = NormedSpace(dim, norm)
        T = _operator(r, self.data, path + ("T",), dim)
        f = _operator(r, self.data, path + ("f",), dim)
        try:
            return ProblemInstance(space, T, f, x0, p)
        except (ValueError, TypeError) as exc:
            r.fail(path, str(exc))

    def _schedule_parts(self, inst):
        """``(schedule, which, params)``; ``which`` is None for inline schedules."""
        r = self._reader()
        d = self.data["schedule"]
        path = ("schedule",)
        try:
            if "example" in d:
                which = d["example"]
                if which not in EXAMPLE_KEYS:
                    r.fail(path + ("example",), f"example must be one of {sorted(EXAMPLE_KEYS)}")
                rho = r.number(self.data, path + ("rho",)) if "rho" in d else inst.rho
                if rho != inst.rho:
                    r.fail(path + ("rho",), f"rho = {rho} but the anchor f is {inst.rho}-Lipschitz")
                r_star = r.vector(self.data, path + ("r_star",), inst.dimension) if "r_star" in d \
                    else [0.0] * inst.dimension
                J, P = r.natural(self.data, path + ("J",), 1), r.natural(self.data, path + ("P",), 1)
                if which == "ex1":
                    params = Example1Params(J, P, r.number(self.data, path + ("lam",)), r_star)
                    return example1_schedule(params, rho=rho, space=inst.space), which, params
                if which == "ex2":
                    params = Example2Params(J, P, r_star)
                    return example2_schedule(params, rho=rho, space=inst.space), which, params
                L = r.natural(self.data, path + ("L",), 1) if "L" in d else None
                params = Example3Params(J, P, rho, r_star, L)
                sched = example3_schedule(params, inst)
                return sched, which, dataclasses.replace(params, L=sched.info["L"])
            return _inline_schedule(r, self.data, inst), None, None
        except ConfigError:
            raise
        except (ValueError, TypeError, ArithmeticError) as exc:
            r.fail(path, str(exc))

    def scenario(self) -> Scenario:
        run = self.data["run"]
        if "builtin" in self.data:
            sc = lookup(self.data["builtin"])()
            repl = {k: run[k] for k in RUN_KEYS if k in run}
            if "name" in self.data:
                repl["name"] = self.data["name"]
            try:
                return dataclasses.replace(sc, **repl)
            except ValueError as exc:
                self._reader().fail(("run",), str(exc))
        inst = self.instance()
        sched, which, params = self._schedule_parts(inst)
        certs = None
        if which is not None:
            try:
                certs = example_certificates(inst, sched, which, params)
            except (ValueError, ArithmeticError) as exc:
                self._reader().fail(("schedule",), str(exc))
        extra = {k: run[k] for k in ("moduli_k_max", "moduli_tail") if k in run}
        try:
            return Scenario(self.name, inst, sched, run["trace_length"], k_max=run["k_max"],
                            tolerance=float(run["tolerance"]), seed=run["seed"],
                            certificates=certs, ex3=params if which == "ex3" else None, **extra)
        except ValueError as exc:
            self._reader().fail(("run",), str(exc))

    def rate_certificates(self) -> tuple[list, list]:
        """``(certificates, notes)`` for tabulation.

        Unlike :meth:`scenario`, an example-3 ``L`` below the least admissible
        value is accepted here: its linear rates are tabulated as formulas and
        a note says they are not certified for this instance.
        """
        if "builtin" in self.data:
            sc = self.scenario()
            return list(_scenario_certs(sc)), []
        d = self.data["schedule"]
        if d.get("example") == "ex3" and "L" in d:
            inst = self.instance()
            probe = ExperimentConfig(copy.deepcopy(self.data), self.source, [], self._lines)
            del probe.data["schedule"]["L"]
            sched, _, params = probe._schedule_parts(inst)
            L_min = sched.info["L"]
            L = int(d["L"])
            if L < L_min:
                from .certificates import certify
                lin = example3_rates(dataclasses.replace(params, L=L), sched.info["Kp"], L)
                note = (f"L = {L} is below the least admissible L = {L_min} for this instance; "
                        f"the linear rates are tabulated but not certified")
                return list(certify(inst, sched)) + [lin.phi, lin.psi], [note]
        return list(_scenario_certs(self.scenario())), []


def _scenario_certs(sc: Scenario):
    from .harness import scenario_certificates
    return scenario_certificates(sc)


def _operator(r: _Reader, data, path, dim) -> ops.Operator:
    d = _get(data, path)
    r.mapping(d, path, {"kind"} | set().union(*OPERATOR_KEYS.values()), ("kind",))
    kind = d["kind"]
    if kind not in OPERATOR_KEYS:
        r.fail(path + ("kind",), f"operator kind must be one of {sorted(OPERATOR_KEYS)}, got {kind!r}")
    r.mapping(d, path, {"kind"} | OPERATOR_KEYS[kind], {"kind"} | (OPERATOR_KEYS[kind] - {"plane", "offset"}))

    def num(key):
        return r.number(data, path + (key,))

    def vec(key):
        return r.vector(data, path + (key,), dim)

    def mat(key):
        rows = d[key]
        if not isinstance(rows, list) or len(rows) != dim:
            r.fail(path + (key,), f"{key} must be a {dim}x{dim} list of rows")
        return [r.vector(data, path + (key, i), dim) for i in range(dim)]

    try:
        if kind == "identity":
            return ops.identity(dim)
        if kind == "rotation":
            plane = tuple(d.get("plane", (0, 1)))
            return ops.rotation(float(num("angle")), dim, plane)
        if kind == "reflection":
            return ops.reflection(vec("normal"), float(num("offset")) if "offset" in d else 0.0)
        if kind == "averaged_linear":
            return ops.averaged_linear(mat("matrix"), float(num("weight")))
        if kind == "affine_contraction":
            off = vec("offset") if "offset" in d else [0.0] * dim
            return ops.affine_contraction(mat("matrix"), off, num("rho"))
        if kind == "constant":
            return ops.constant(vec("point"))
        if kind == "box_projection":
            return ops.box_projection(vec("lower"), vec("upper"))
        return ops.ball_projection(vec("center"), float(num("radius")))
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        r.fail(path, f"{kind}: {exc}")


def _inline_schedule(r: _Reader, data, inst) -> ParameterSchedule:
    path = ("schedule",)
    d = data["schedule"]
    dim = inst.dimension
    seq = {k: r.expression(data, path + (k,), ("n",)) for k in ("alpha", "beta", "delta")}
    res = None
    if d.get("residual") is not None:
        items = d["residual"]
        if not isinstance(items, list) or len(items) != dim:
            r.fail(path + ("residual",), f"residual must list {dim} expressions in n")
        res = [r.expression(data, path + ("residual", i), ("n",)) for i in range(dim)]

    def vec(e):
        return lambda n: np.broadcast_to(e.vector(n=n), np.shape(n)).astype(np.float64)

    residual = None
    if res is not None:
        residual = lambda n: np.stack([np.broadcast_to(e.vector(n=n), np.shape(n)) for e in res], axis=1)

    bpath = path + ("bundle",)
    b = d["bundle"]
    r.mapping(b, bpath, BUNDLE_KEYS, ("M_abd", "sigma2", "theta1", "gamma1"))
    mono = b.get("nondecreasing", False)
    if not isinstance(mono, bool):
        r.fail(bpath + ("nondecreasing",), "nondecreasing must be true or false")
    mods = {}
    for key in BUNDLE_K:
        if key in b:
            e = r.expression(data, bpath + (key,), ("k",))
            mods[key] = Modulus(_KIND.get(key, Kind.CAUCHY_MODULUS),
                                (lambda e: lambda k: e.natural(k=k))(e), e.text, mono)
    if "sigma1_star" in b:
        e = r.expression(data, bpath + ("sigma1_star",), ("m", "k"))
        mods["sigma1_star"] = ProductModulus(lambda m, k: e.natural(m=m, k=k), e.text)
    M_abd = r.natural(data, bpath + ("M_abd",))
    M_r = r.natural(data, bpath + ("M_r",)) if "M_r" in b else 0
    try:
        bundle = ModuliBundle(M_abd=M_abd, M_r=M_r, **mods)
        sched = ParameterSchedule(vec(seq["alpha"]), vec(seq["beta"]), vec(seq["delta"]),
                                  residual, bundle, name=data.get("name") or "inline",
                                  info={"expressions": {k: str(v) for k, v in seq.items()}})
        sched.check(0, 1000, dim)
    except ConfigError:
        raise
    except (ValueError, TypeError, ArithmeticError) as exc:
        r.fail(path, str(exc))
    return sched


def _validate(data, r: _Reader):
    r.mapping(data, (), TOP_KEYS)
    if "name" in data and not isinstance(data["name"], str):
        r.fail(("name",), "name must be a string")
    run = data.setdefault("run", {})
    if run is None:
        run = data["run"] = {}
    r.mapping(run, ("run",), RUN_KEYS)
    if "builtin" not in data:
        # a builtin keeps its own run parameters unless overridden explicitly
        for k, v in RUN_DEFAULTS.items():
            run.setdefault(k, v)
    for k, lo in (("trace_length", 2), ("k_max", 0), ("seed", 0), ("moduli_k_max", 1), ("moduli_tail", 1)):
        if k in run:
            r.natural(data, ("run", k), lo)
    tol = run.get("tolerance", DEFAULT_TOL)
    if isinstance(tol, str):
        try:
            tol = run["tolerance"] = float(tol)
        except ValueError:
            r.fail(("run", "tolerance"), f"tolerance must be a positive number, got {tol!r}")
    if "tolerance" in run and (isinstance(tol, bool) or not isinstance(tol, (int, float)) or not tol > 0):
        r.fail(("run", "tolerance"), f"tolerance must be a positive number, got {tol!r}")
    if data.get("output") is not None:
        r.mapping(data["output"], ("output",), OUTPUT_KEYS)
        for k, v in data["output"].items():
            if not isinstance(v, str) or not v:
                r.fail(("output", k), f"output.{k} must be a file path")
    if "builtin" in data:
        if data["builtin"] not in all_names():
            r.fail(("builtin",), f"unknown builtin {data['builtin']!r}; available: {all_names()}")
        for k in ("instance", "schedule"):
            if k in data:
                r.fail((k,), f"{k} cannot be combined with builtin")
        return
    for k in ("instance", "schedule"):
        if k not in data:
            r.fail((), f"missing required key {k!r} (or give a builtin)")
    r.mapping(data["instance"], ("instance",), INSTANCE_KEYS, ("T", "f", "x0", "p"))
    s = data["schedule"]
    if isinstance(s, dict) and "example" in s:
        which = s["example"]
        if which not in EXAMPLE_KEYS:
            r.fail(("schedule", "example"), f"example must be one of {sorted(EXAMPLE_KEYS)}, got {which!r}")
        allowed, required = EXAMPLE_KEYS[which]
        r.mapping(s, ("schedule",), allowed | {"example"}, required)
    else:
        r.mapping(s, ("schedule",), {"alpha", "beta", "delta", "residual", "bundle"},
                  ("alpha", "beta", "delta", "bundle"))


def parse(text: str, source: str | None = None) -> ExperimentConfig:
    data, lines = _load(text, source)
    r = _Reader(lines, source)
    _validate(data, r)
    return ExperimentConfig(data, source, [], lines)


def load(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, str(path)) from None
    return parse(text, str(path))


def builtin_config(name: str) -> ExperimentConfig:
    return parse(yaml.safe_dump({"builtin": name}), f"<builtin {name}>")
