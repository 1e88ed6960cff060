"""Reading and writing scenario files (TOML), plus the bundled presets.

Schema (every key below is allowed; anything else is rejected)::

    name = "paper_linear"            # optional

    [agents]
    count = 3
    initial_positions = [[x, y], ...]

    [formation]
    edges = [{i = 0, j = 1, r = 2.0, r_lo = 1.8, r_hi = 2.2}, ...]

    [target]
    kind = "linear"                  # stationary | linear | circular | chained
    # stationary: position = [x, y]
    # linear:     start = [x, y], velocity = [vx, vy]
    # circular:   center = [x, y], radius, omega, phase (default 0)
    # chained:    start = [x, y], K_T, u_max, standoff (default 0),
    #             and a [target.leader] table holding another target

    [control]
    law = "blf"                      # blf | qlf
    K_T = 0.03
    K = 0.01
    u_max = 3.0
    standoffs = [2.0, 2.0, 2.0]

    [noise]                          # optional, defaults to exact measurement
    sd_velocity = 0.0
    sd_distance = 0.0
    seed = 0

    [integration]                    # optional
    dt = 0.01
    scheme = "euler"                 # euler | rk4
    max_substeps = 8

    [run]
    duration = 100.0
    settling_tol = 0.01              # optional
    plots = true                     # optional
"""

from __future__ import annotations

import os
import re
import tempfile
from importlib import resources
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .control import SaturationSpec
from .engine import Scenario
from .errors import ParseError, UnknownAgent, ValidationError
from .formation import validate_graph
from .potentials import Gains
from .world import (
    ChainedTarget,
    CircularTarget,
    IntegrationSpec,
    LinearTarget,
    NoiseSpec,
    StationaryTarget,
)

PRESETS = ("paper_linear", "paper_circular")

_SECTIONS = {
    "name": None,
    "agents": {"count", "initial_positions"},
    "formation": {"edges"},
    "target": None,
    "control": {"law", "K_T", "K", "u_max", "standoffs"},
    "noise": {"sd_velocity", "sd_distance", "seed"},
    "integration": {"dt", "scheme", "max_substeps"},
    "run": {"duration", "settling_tol", "plots"},
}
_REQUIRED = ("agents", "formation", "target", "control", "run")
_EDGE_KEYS = {"i", "j", "r", "r_lo", "r_hi"}
_TARGET_KEYS = {
    "stationary": ({"position"}, set()),
    "linear": ({"start", "velocity"}, set()),
    "circular": ({"center", "radius", "omega"}, {"phase"}),
    "chained": ({"start", "K_T", "u_max", "leader"}, {"standoff"}),
}


def _line_of(text: str, key: str):
    if text is None:
        return None
    pat = re.compile(rf"^\s*{re.escape(key)}\s*=|^\s*\[{re.escape(key)}\]", re.M)
    m = pat.search(text)
    return None if m is None else text.count("\n", 0, m.start()) + 1


class _Reader:
    def __init__(self, text):
        self.text = text

    def fail(self, msg, key):
        leaf = key.rsplit(".", 1)[-1]
        raise ParseError(msg, line=_line_of(self.text, leaf), key=key)

    def check_keys(self, table, allowed, where, required=()):
        if not isinstance(table, dict):
            self.fail(f"expected a table", where)
        for k in table:
            if k not in allowed:
                self.fail("unknown key", f"{where}.{k}" if where else k)
        for k in required:
            if k not in table:
                self.fail("missing required key", f"{where}.{k}" if where else k)

    def num(self, table, key, where, default=None):
        if key not in table:
            if default is None:
                self.fail("missing required key", f"{where}.{key}")
            return default
        v = table[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(f"expected a number, got {v!r}", f"{where}.{key}")
        return float(v)

    def integer(self, table, key, where, default=None):
        if key not in table:
            if default is None:
                self.fail("missing required key", f"{where}.{key}")
            return default
        v = table[key]
        if isinstance(v, bool) or not isinstance(v, int):
            self.fail(f"expected an integer, got {v!r}", f"{where}.{key}")
        return v

    def vec(self, table, key, where):
        if key not in table:
            self.fail("missing required key", f"{where}.{key}")
        v = table[key]
        if (not isinstance(v, list) or len(v) != 2
                or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in v)):
            self.fail(f"expected [x, y], got {v!r}", f"{where}.{key}")
        return (float(v[0]), float(v[1]))

    def string(self, table, key, where, default=None):
        if key not in table:
            if default is None:
                self.fail("missing required key", f"{where}.{key}")
            return default
        v = table[key]
        if not isinstance(v, str):
            self.fail(f"expected a string, got {v!r}", f"{where}.{key}")
        return v

    def target(self, t, where="target"):
        if not isinstance(t, dict):
            self.fail("expected a table", where)
        kind = self.string(t, "kind", where)
        if kind not in _TARGET_KEYS:
            self.fail(f"unknown target kind {kind!r}", f"{where}.kind")
        req, opt = _TARGET_KEYS[kind]
        self.check_keys(t, req | opt | {"kind"}, where, required=sorted(req))
        if kind == "stationary":
            return StationaryTarget(self.vec(t, "position", where))
        if kind == "linear":
            return LinearTarget(self.vec(t, "start", where), self.vec(t, "velocity", where))
        if kind == "circular":
            return CircularTarget(self.vec(t, "center", where), self.num(t, "radius", where),
                                  self.num(t, "omega", where), self.num(t, "phase", where, 0.0))
        return ChainedTarget(
            leader=self.target(t["leader"], f"{where}.leader"),
            start=self.vec(t, "start", where),
            K_T=self.num(t, "K_T", where),
            u_max=self.num(t, "u_max", where),
            standoff=self.num(t, "standoff", where, 0.0),
        )


def parse_scenario(text: str, source: str = "<string>") -> tuple[Scenario, dict]:
    """Parse scenario text. Returns the scenario and the ``[run]`` options."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"{source}: {exc}", line=getattr(exc, "lineno", None)) from None
    rd = _Reader(text)
    rd.check_keys(doc, set(_SECTIONS), "", required=_REQUIRED)
    for sec, keys in _SECTIONS.items():
        if keys is not None and sec in doc:
            rd.check_keys(doc[sec], keys, sec)

    agents = doc["agents"]
    count = rd.integer(agents, "count", "agents")
    pos = agents.get("initial_positions")
    if not isinstance(pos, list):
        rd.fail("expected a list of [x, y] pairs", "agents.initial_positions")
    positions = tuple(rd.vec({"initial_positions": p}, "initial_positions", "agents") for p in pos)

    raw_edges = doc["formation"].get("edges")
    if not isinstance(raw_edges, list):
        rd.fail("expected a list of edge tables", "formation.edges")
    edges = []
    for e in raw_edges:
        rd.check_keys(e, _EDGE_KEYS, "formation.edges", required=sorted(_EDGE_KEYS))
        edges.append((rd.integer(e, "i", "formation.edges"), rd.integer(e, "j", "formation.edges"),
                      (rd.num(e, "r", "formation.edges"), rd.num(e, "r_lo", "formation.edges"),
                       rd.num(e, "r_hi", "formation.edges"))))

    ctl = doc["control"]
    rd.check_keys(ctl, _SECTIONS["control"], "control", required=sorted(_SECTIONS["control"]))
    standoffs = ctl["standoffs"]
    if not isinstance(standoffs, list):
        rd.fail("expected a list of radii", "control.standoffs")
    noise = doc.get("noise", {})
    integ = doc.get("integration", {})
    run_opts = doc["run"]

    name = doc.get("name", "")
    if not isinstance(name, str):
        rd.fail("expected a string", "name")

    try:
        graph = validate_graph(count, edges)
        scenario = Scenario(
            graph=graph,
            standoffs=tuple(rd.num({"s": s}, "s", "control.standoffs") for s in standoffs),
            gains=Gains(rd.num(ctl, "K_T", "control"), rd.num(ctl, "K", "control")),
            saturation=SaturationSpec(rd.num(ctl, "u_max", "control")),
            target=rd.target(doc["target"]),
            initial_positions=positions,
            law=rd.string(ctl, "law", "control"),
            duration=rd.num(run_opts, "duration", "run"),
            noise=NoiseSpec(rd.num(noise, "sd_velocity", "noise", 0.0),
                            rd.num(noise, "sd_distance", "noise", 0.0),
                            rd.integer(noise, "seed", "noise", 0)),
            integration=IntegrationSpec(rd.num(integ, "dt", "integration", 0.01),
                                        rd.string(integ, "scheme", "integration", "euler"),
                                        rd.integer(integ, "max_substeps", "integration", 8)),
            settling_tol=rd.num(run_opts, "settling_tol", "run", 1e-2),
            name=name,
        )
    except UnknownAgent as exc:
        raise ValidationError(f"{source}: {exc.args[0]}") from None
    except ValidationError as exc:
        raise type(exc)(f"{source}: {exc}") from None
    plots = run_opts.get("plots", True)
    if not isinstance(plots, bool):
        rd.fail("expected true or false", "run.plots")
    return scenario, {"plots": plots}


def load_scenario(path) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(encoding="utf-8"), str(path))[0]


def load_preset(name: str) -> Scenario:
    return parse_scenario(preset_text(name), name)[0]


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ValidationError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    return resources.files("blfformation").joinpath("presets", f"{name}.toml").read_text(encoding="utf-8")


# --------------------------------------------------------------------------
# writing
# --------------------------------------------------------------------------


def _f(x: float) -> str:
    return repr(float(x))


def _v(p) -> str:
    return f"[{_f(p[0])}, {_f(p[1])}]"


def _target_lines(t, header: str) -> list[str]:
    out = [f"[{header}]"]
    if isinstance(t, StationaryTarget):
        out += ['kind = "stationary"', f"position = {_v(t.position)}"]
    elif isinstance(t, LinearTarget):
        out += ['kind = "linear"', f"start = {_v(t.start)}", f"velocity = {_v(t.velocity)}"]
    elif isinstance(t, CircularTarget):
        out += ['kind = "circular"', f"center = {_v(t.center)}", f"radius = {_f(t.radius)}",
                f"omega = {_f(t.omega)}", f"phase = {_f(t.phase)}"]
    elif isinstance(t, ChainedTarget):
        out += ['kind = "chained"', f"start = {_v(t.start)}", f"K_T = {_f(t.K_T)}",
                f"u_max = {_f(t.u_max)}", f"standoff = {_f(t.standoff)}", ""]
        out += _target_lines(t.leader, f"{header}.leader")
    else:
        raise TypeError(f"cannot serialize target {t!r}")
    return out


def dump_scenario(s: Scenario, plots: bool = True) -> str:
    lines = []
    if s.name:
        lines += [f'name = "{s.name}"', ""]
    lines += ["[agents]", f"count = {s.graph.agent_count}", "initial_positions = ["]
    lines += [f"    {_v(p)}," for p in s.initial_positions]
    lines += ["]", "", "[formation]", "edges = ["]
    lines += [f"    {{i = {i}, j = {j}, r = {_f(b.r)}, r_lo = {_f(b.r_lo)}, r_hi = {_f(b.r_hi)}}},"
              for i, j, b in s.graph.edges]
    lines += ["]", ""]
    lines += _target_lines(s.target, "target")
    lines += ["", "[control]", f'law = "{s.law}"', f"K_T = {_f(s.gains.K_T)}", f"K = {_f(s.gains.K)}",
              f"u_max = {_f(s.saturation.u_max)}",
              f"standoffs = [{', '.join(_f(r) for r in s.standoffs)}]", "",
              "[noise]", f"sd_velocity = {_f(s.noise.sd_velocity)}",
              f"sd_distance = {_f(s.noise.sd_distance)}", f"seed = {s.noise.seed}", "",
              "[integration]", f"dt = {_f(s.integration.dt)}", f'scheme = "{s.integration.scheme}"',
              f"max_substeps = {s.integration.max_substeps}", "",
              "[run]", f"duration = {_f(s.duration)}", f"settling_tol = {_f(s.settling_tol)}",
              f"plots = {'true' if plots else 'false'}", ""]
    return "\n".join(lines)


def atomic_write(path, data: str | bytes) -> Path:
    """Write via a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_scenario(s: Scenario, path, plots: bool = True) -> Path:
    return atomic_write(path, dump_scenario(s, plots))
