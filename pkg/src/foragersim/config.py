"""TOML configuration: strict parsing, validation, and round-trip serialization.

Unknown keys are rejected rather than ignored (a typo like ``chi3`` must not
silently run a different experiment), every range violation names the
offending dotted key, and semantic errors carry the line of the key in the
source text when it can be located.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from .diagnostics import EnergyConfig
from .model import (
    Constant,
    ConstantPlusCosine,
    FieldSpec,
    FromFile,
    GaussianBump,
    Grid,
    InitialCondition,
    ModelParams,
    build_grid,
)
from .stepping import StepControl


class ConfigError(ValueError):
    """Configuration rejected; carries the source line when locatable."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class SimConfig:
    grid: Grid
    params: ModelParams
    init: InitialCondition
    control: StepControl
    energy: EnergyConfig
    output_dir: str
    write_snapshots: bool


SWEEP_AXES = ("chi2", "ubar0", "vbar0", "r", "lambda")


@dataclass(frozen=True)
class SweepSpec:
    """A base configuration plus one or two swept axes with value lists."""

    base: SimConfig
    axes: tuple[tuple[str, tuple[float, ...]], ...]


def _find_line(text: str, section: str, key: str | None = None) -> int | None:
    """Best-effort line lookup for error messages: the header line of
    ``[section]``, or the first ``key =`` line after it."""
    lines = text.splitlines()
    header = None
    pattern = re.compile(r"^\s*\[+\s*" + re.escape(section) + r"\s*\]+\s*(#.*)?$")
    for i, raw in enumerate(lines, start=1):
        if pattern.match(raw):
            header = i
            break
    if header is None or key is None:
        return header
    key_pattern = re.compile(r"^\s*" + re.escape(key) + r"\s*=")
    for i in range(header, len(lines)):
        if re.match(r"^\s*\[", lines[i]):  # next section started
            break
        if key_pattern.match(lines[i]):
            return i + 1
    return header


class _Section:
    """One parsed table with strict key accounting."""

    def __init__(self, text: str, name: str, data: dict):
        self.text = text
        self.name = name
        self.data = dict(data)
        self.seen: set[str] = set()

    def _err(self, key: str | None, message: str) -> ConfigError:
        return ConfigError(message, line=_find_line(self.text, self.name, key))

    def require(self, key: str):
        if key not in self.data:
            raise self._err(None, f"{self.name}: missing required key {key!r}")
        self.seen.add(key)
        return self.data[key]

    def get(self, key: str, default):
        self.seen.add(key)
        return self.data.get(key, default)

    def number(self, key: str, *, default=None, required=False, minimum=None,
               exclusive_minimum=None, maximum=None) -> float:
        if required:
            value = self.require(key)
        else:
            value = self.get(key, default)
            if value is default and key not in self.data:
                return default
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self._err(key, f"{self.name}.{key} must be a number, got {value!r}")
        value = float(value)
        if not math.isfinite(value):
            raise self._err(key, f"{self.name}.{key} must be finite, got {value!r}")
        if exclusive_minimum is not None and not value > exclusive_minimum:
            raise self._err(key, f"{self.name}.{key} must be > {exclusive_minimum}, got {value}")
        if minimum is not None and value < minimum:
            raise self._err(key, f"{self.name}.{key} must be >= {minimum}, got {value}")
        if maximum is not None and value > maximum:
            raise self._err(key, f"{self.name}.{key} must be <= {maximum}, got {value}")
        return value

    def integer(self, key: str, *, required=False, default=None, minimum=None) -> int:
        value = self.require(key) if required else self.get(key, default)
        if isinstance(value, bool) or not isinstance(value, int):
            raise self._err(key, f"{self.name}.{key} must be an integer, got {value!r}")
        if minimum is not None and value < minimum:
            raise self._err(key, f"{self.name}.{key} must be >= {minimum}, got {value}")
        return value

    def string(self, key: str, *, required=False, default=None) -> str:
        value = self.require(key) if required else self.get(key, default)
        if not isinstance(value, str):
            raise self._err(key, f"{self.name}.{key} must be a string, got {value!r}")
        return value

    def boolean(self, key: str, *, default=False) -> bool:
        value = self.get(key, default)
        if not isinstance(value, bool):
            raise self._err(key, f"{self.name}.{key} must be a boolean, got {value!r}")
        return value

    def finish(self):
        unknown = set(self.data) - self.seen
        if unknown:
            key = sorted(unknown)[0]
            raise self._err(key, f"unknown key {self.name}.{key}")


def _parse_field_spec(text: str, name: str, table) -> FieldSpec:
    if not isinstance(table, dict):
        raise ConfigError(f"{name} must be a table with a 'kind' key", _find_line(text, name))
    sec = _Section(text, name, table)
    kind = sec.string("kind", required=True)
    if kind == "constant":
        spec = Constant(value=sec.number("value", required=True))
    elif kind == "constant_plus_cosine":
        spec = ConstantPlusCosine(
            base=sec.number("base", required=True),
            amplitude=sec.number("amplitude", required=True),
            mode=sec.integer("mode", required=True, minimum=1),
        )
    elif kind == "gaussian_bump":
        spec = GaussianBump(
            center=sec.number("center", required=True),
            width=sec.number("width", required=True, exclusive_minimum=0.0),
            height=sec.number("height", required=True),
            baseline=sec.number("baseline", default=0.0),
        )
    elif kind == "from_file":
        spec = FromFile(path=sec.string("path", required=True))
    else:
        raise ConfigError(
            f"{name}.kind must be one of constant, constant_plus_cosine, "
            f"gaussian_bump, from_file; got {kind!r}",
            _find_line(text, name, "kind"),
        )
    sec.finish()
    return spec


def _table(text: str, doc: dict, name: str, prefix: str) -> dict:
    value = doc[name]
    if not isinstance(value, dict):
        raise ConfigError(
            f"{prefix}{name} must be a table (use [{prefix}{name}])",
            _find_line(text, prefix + name),
        )
    return value


def _parse_sim_tables(text: str, doc: dict, where: str = "") -> SimConfig:
    prefix = f"{where}." if where else ""
    known = {"domain", "params", "init", "time", "diagnostics", "output"}
    unknown = set(doc) - known
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"unknown section [{prefix}{key}]", _find_line(text, prefix + key))
    for required in ("domain", "params", "init", "time", "output"):
        if required not in doc:
            raise ConfigError(f"missing required section [{prefix}{required}]")

    dom = _Section(text, prefix + "domain", _table(text, doc, "domain", prefix))
    n = dom.integer("n", required=True, minimum=4)
    length = dom.number("length", required=True, exclusive_minimum=0.0)
    dom.finish()
    grid = build_grid(n, length)

    par = _Section(text, prefix + "params", _table(text, doc, "params", prefix))
    params = ModelParams(
        chi1=par.number("chi1", required=True, exclusive_minimum=0.0),
        chi2=par.number("chi2", required=True, exclusive_minimum=0.0),
        d=par.number("d", required=True, exclusive_minimum=0.0),
        lam=par.number("lambda", required=True, exclusive_minimum=0.0),
        mu=par.number("mu", required=True, exclusive_minimum=0.0),
        r=par.number("r", required=True, minimum=0.0),
    )
    par.finish()

    init_table = _table(text, doc, "init", prefix)
    unknown = set(init_table) - {"u", "v", "w"}
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"unknown key {prefix}init.{key}",
                          _find_line(text, f"{prefix}init.{key}"))
    for field in ("u", "v", "w"):
        if field not in init_table:
            raise ConfigError(f"missing required table [{prefix}init.{field}]",
                              _find_line(text, prefix + "init"))
    ic = InitialCondition(
        u=_parse_field_spec(text, f"{prefix}init.u", init_table["u"]),
        v=_parse_field_spec(text, f"{prefix}init.v", init_table["v"]),
        w=_parse_field_spec(text, f"{prefix}init.w", init_table["w"]),
    )

    tim = _Section(text, prefix + "time", _table(text, doc, "time", prefix))
    t_end = tim.number("t_end", required=True, exclusive_minimum=0.0)
    safety = tim.number("safety", default=0.9, exclusive_minimum=0.0, maximum=1.0)
    dt_max = tim.number("dt_max", default=1e-2, exclusive_minimum=0.0)
    output_every = tim.number("output_every", default=0.1, exclusive_minimum=0.0)
    snapshot_times = tim.get("snapshot_times", [])
    if not isinstance(snapshot_times, list) or any(
        isinstance(s, bool) or not isinstance(s, (int, float)) for s in snapshot_times
    ):
        raise ConfigError(f"{prefix}time.snapshot_times must be a list of numbers",
                          _find_line(text, prefix + "time", "snapshot_times"))
    tim.finish()

    diag_table = _table(text, doc, "diagnostics", prefix) if "diagnostics" in doc else {}
    diag = _Section(text, prefix + "diagnostics", diag_table)
    b_mode_raw = diag.get("b_mode", "auto")
    if isinstance(b_mode_raw, str):
        if b_mode_raw != "auto":
            raise ConfigError(
                f"{prefix}diagnostics.b_mode must be 'auto' or a positive number, got {b_mode_raw!r}",
                _find_line(text, prefix + "diagnostics", "b_mode"),
            )
        b_mode: str | float = "auto"
    elif isinstance(b_mode_raw, bool) or not isinstance(b_mode_raw, (int, float)) or not b_mode_raw > 0:
        raise ConfigError(
            f"{prefix}diagnostics.b_mode must be 'auto' or a positive number, got {b_mode_raw!r}",
            _find_line(text, prefix + "diagnostics", "b_mode"),
        )
    else:
        b_mode = float(b_mode_raw)
    tail_fraction = diag.number("tail_fraction", default=0.5)
    if not 0.0 < tail_fraction < 1.0:
        raise ConfigError(
            f"{prefix}diagnostics.tail_fraction must lie in (0, 1), got {tail_fraction}",
            _find_line(text, prefix + "diagnostics", "tail_fraction"),
        )
    steady_tol = diag.number("steady_tol", default=1e-9, exclusive_minimum=0.0)
    diag.finish()

    out = _Section(text, prefix + "output", _table(text, doc, "output", prefix))
    output_dir = out.string("dir", required=True)
    write_snapshots = out.boolean("write_snapshots", default=False)
    out.finish()

    control = StepControl(
        t_end=t_end,
        safety=safety,
        dt_max=dt_max,
        output_every=output_every,
        steady_tol=steady_tol,
        snapshot_times=tuple(float(s) for s in snapshot_times),
    )
    energy = EnergyConfig(b_mode=b_mode, tail_fraction=tail_fraction)
    return SimConfig(
        grid=grid,
        params=params,
        init=ic,
        control=control,
        energy=energy,
        output_dir=output_dir,
        write_snapshots=write_snapshots,
    )


def parse_config(text: str) -> SimConfig:
    """Parse and validate a simulation config document."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"not valid TOML: {exc}") from exc
    return _parse_sim_tables(text, doc)


def parse_sweep(text: str) -> SweepSpec:
    """Parse a sweep document: a [base] simulation config plus a [sweep]
    table naming one or two axes with their value lists."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"not valid TOML: {exc}") from exc
    unknown = set(doc) - {"base", "sweep"}
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"unknown section [{key}]", _find_line(text, key))
    if "base" not in doc:
        raise ConfigError("missing required section [base]")
    if "sweep" not in doc:
        raise ConfigError("missing required section [sweep]")
    base = _parse_sim_tables(text, _table(text, doc, "base", ""), where="base")

    sweep = _Section(text, "sweep", _table(text, doc, "sweep", ""))
    axes_names = sweep.get("axes", None)
    if (
        not isinstance(axes_names, list)
        or not 1 <= len(axes_names) <= 2
        or not all(isinstance(a, str) for a in axes_names)
    ):
        raise ConfigError(
            "sweep.axes must list one or two axis names",
            _find_line(text, "sweep", "axes"),
        )
    if len(set(axes_names)) != len(axes_names):
        raise ConfigError("sweep.axes must not repeat an axis", _find_line(text, "sweep", "axes"))
    axes = []
    for name in axes_names:
        if name not in SWEEP_AXES:
            raise ConfigError(
                f"unknown sweep axis {name!r}; valid axes: {', '.join(SWEEP_AXES)}",
                _find_line(text, "sweep", "axes"),
            )
        values = sweep.get(name, None)
        if not isinstance(values, list) or not values or any(
            isinstance(v, bool) or not isinstance(v, (int, float)) for v in values
        ):
            raise ConfigError(
                f"sweep.{name} must be a nonempty list of numbers",
                _find_line(text, "sweep", name),
            )
        values = [float(v) for v in values]
        minimum_exclusive = name != "r"
        for v in values:
            if not math.isfinite(v) or v < 0 or (minimum_exclusive and v == 0):
                raise ConfigError(
                    f"sweep.{name} values must be positive" + (" or zero" if not minimum_exclusive else ""),
                    _find_line(text, "sweep", name),
                )
        axes.append((name, tuple(values)))
    sweep.finish()
    return SweepSpec(base=base, axes=tuple(axes))


# --- serialization ------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    raise TypeError(f"cannot serialize {value!r}")


def _field_spec_lines(name: str, spec: FieldSpec) -> list[str]:
    lines = [f"[{name}]"]
    if isinstance(spec, Constant):
        lines += ['kind = "constant"', f"value = {_fmt(float(spec.value))}"]
    elif isinstance(spec, ConstantPlusCosine):
        lines += [
            'kind = "constant_plus_cosine"',
            f"base = {_fmt(float(spec.base))}",
            f"amplitude = {_fmt(float(spec.amplitude))}",
            f"mode = {int(spec.mode)}",
        ]
    elif isinstance(spec, GaussianBump):
        lines += [
            'kind = "gaussian_bump"',
            f"center = {_fmt(float(spec.center))}",
            f"width = {_fmt(float(spec.width))}",
            f"height = {_fmt(float(spec.height))}",
            f"baseline = {_fmt(float(spec.baseline))}",
        ]
    elif isinstance(spec, FromFile):
        lines += ['kind = "from_file"', f"path = {_fmt(spec.path)}"]
    else:
        raise TypeError(f"cannot serialize field spec {spec!r}")
    return lines


def serialize_config(cfg: SimConfig) -> str:
    """Emit a TOML document that parses back to an equal SimConfig."""
    p, c, e = cfg.params, cfg.control, cfg.energy
    lines = [
        "[domain]",
        f"length = {_fmt(cfg.grid.length)}",
        f"n = {cfg.grid.n}",
        "",
        "[params]",
        f"chi1 = {_fmt(p.chi1)}",
        f"chi2 = {_fmt(p.chi2)}",
        f"d = {_fmt(p.d)}",
        f"lambda = {_fmt(p.lam)}",
        f"mu = {_fmt(p.mu)}",
        f"r = {_fmt(p.r)}",
        "",
    ]
    for name, spec in (("init.u", cfg.init.u), ("init.v", cfg.init.v), ("init.w", cfg.init.w)):
        lines += _field_spec_lines(name, spec)
        lines.append("")
    snapshot = ", ".join(_fmt(float(s)) for s in c.snapshot_times)
    lines += [
        "[time]",
        f"t_end = {_fmt(c.t_end)}",
        f"safety = {_fmt(c.safety)}",
        f"dt_max = {_fmt(c.dt_max)}",
        f"output_every = {_fmt(c.output_every)}",
        f"snapshot_times = [{snapshot}]",
        "",
        "[diagnostics]",
        f"b_mode = {_fmt(e.b_mode)}",
        f"tail_fraction = {_fmt(e.tail_fraction)}",
        f"steady_tol = {_fmt(c.steady_tol)}",
        "",
        "[output]",
        f"dir = {_fmt(cfg.output_dir)}",
        f"write_snapshots = {_fmt(cfg.write_snapshots)}",
    ]
    return "\n".join(lines) + "\n"
