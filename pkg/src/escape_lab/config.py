"""Experiment configuration: INI-style sections or the equivalent JSON document.

INI grammar (``#`` or ``;`` start comments)::

    [manifold]
    p = 3
    f = LinearCone
    h = PositiveLimit        ; any family name
    h.c = 1                  ; family parameters as h.<name> / f.<name>
    h.decay = PolyDecay
    h.alpha = 1
    period = 1               ; constant expression, e.g. 2*pi

    [ladder]
    l0 = 10                  ; geometric: ceil(l0 * ratio^j), j < count
    ratio = 2
    count = 11
    ; values = 1, 2, 4       ; explicit list instead

    [search]                 ; SearchParams fields
    [curvature]              ; r_min, r_max, n_points, p_search, p_max
    [escape]                 ; tail_fraction, epsilon, slope, floor, almost_translation
    [oracle]                 ; l, nt, nphi, stencil_radius, t_extent
    [output]                 ; dir, format (csv | json)

The JSON form nests the same keys: ``{"manifold": {"p": 3, "h": {"family":
"PolyDecay", "alpha": 1}, ...}, "ladder": {...}, ...}``.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .escape import geometric_ladder
from .geodesic.loops import SearchParams
from .warp import ManifoldSpec, WarpingFunction, build_family, parse_expression

__all__ = [
    "ConfigError",
    "CurvatureSettings",
    "EscapeSettings",
    "OracleSettings",
    "OutputSettings",
    "RunConfig",
    "load_config",
    "parse_config",
]


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


@dataclass(frozen=True)
class CurvatureSettings:
    r_min: float = 1e-2
    r_max: float = 1e5
    n_points: int = 4096
    p_search: bool = False
    p_max: int = 10_000


@dataclass(frozen=True)
class EscapeSettings:
    tail_fraction: float = 0.5
    epsilon: float = 0.1
    slope: float = -0.05
    floor: float = 0.05
    almost_translation: float = 1.9


@dataclass(frozen=True)
class OracleSettings:
    l: tuple[int, ...] = (10,)
    nt: int = 2048
    nphi: int = 2048
    stencil_radius: int = 3
    t_extent: float | None = None


@dataclass(frozen=True)
class OutputSettings:
    dir: str = "escape_lab_out"
    format: str = "csv"


@dataclass
class RunConfig:
    manifold: ManifoldSpec
    manifold_doc: dict
    ladder: list[int]
    search: SearchParams = field(default_factory=SearchParams)
    curvature: CurvatureSettings = field(default_factory=CurvatureSettings)
    escape: EscapeSettings = field(default_factory=EscapeSettings)
    oracle: OracleSettings = field(default_factory=OracleSettings)
    output: OutputSettings = field(default_factory=OutputSettings)

    def canonical(self) -> dict:
        """Resolved settings as plain data; the basis of :meth:`digest`."""
        return {
            "manifold": self.manifold_doc,
            "ladder": list(self.ladder),
            # worker count never changes results, so it stays out of the digest
            "search": {k: v for k, v in dataclasses.asdict(self.search).items() if k != "workers"},
            "curvature": dataclasses.asdict(self.curvature),
            "escape": dataclasses.asdict(self.escape),
            "oracle": {**dataclasses.asdict(self.oracle), "l": list(self.oracle.l)},
        }

    def digest(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def with_ladder(self, ladder: list[int]) -> "RunConfig":
        return dataclasses.replace(self, ladder=_check_ladder(ladder))


# ---------------------------------------------------------------------------


def _has_var(e) -> bool:
    return e.op == "var" or any(_has_var(a) for a in e.args)


def _number(v):
    if isinstance(v, bool):
        raise ConfigError(f"expected a number, got {v!r}")
    if isinstance(v, int | float):
        return v
    text = str(v).strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    try:
        expr = parse_expression(text)
    except ValueError as exc:
        raise ConfigError(f"not a number: {text!r}") from exc
    if _has_var(expr):
        raise ConfigError(f"constant expected, found r in {text!r}")
    val = float(expr.jet(0.0).value)
    return val


def _bool(v) -> bool:
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {v!r}")


def _warping(doc) -> tuple[WarpingFunction, dict]:
    if isinstance(doc, str):
        doc = {"family": doc}
    if not isinstance(doc, dict) or "family" not in doc:
        raise ConfigError("warping function needs a family")
    family = str(doc["family"])
    params = {}
    for k, v in doc.items():
        if k == "family":
            continue
        params[k] = str(v) if k in ("expr", "decay") else _number(v)
    try:
        w = build_family(family, **dict(params))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad parameters for {family}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return w, {"family": family, **params}


def _check_ladder(values) -> list[int]:
    out = []
    for v in values:
        n = _number(v)
        if int(n) != n or n < 1:
            raise ConfigError(f"ladder entries must be positive integers, got {v!r}")
        out.append(int(n))
    if not out:
        raise ConfigError("ladder is empty")
    if any(b <= a for a, b in zip(out, out[1:])):
        raise ConfigError("ladder must be strictly increasing")
    return out


def _ladder(doc) -> list[int]:
    if isinstance(doc, list):
        return _check_ladder(doc)
    doc = doc or {}
    if "values" in doc:
        vals = doc["values"]
        if isinstance(vals, str):
            vals = [x for x in vals.replace(",", " ").split()]
        return _check_ladder(vals)
    try:
        l0 = float(_number(doc.get("l0", 1)))
        ratio = float(_number(doc.get("ratio", 2)))
        count = _number(doc.get("count", 8))
        if int(count) != count:
            raise ConfigError("count must be an integer")
        return geometric_ladder(l0, ratio, int(count))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _section(cls, doc: dict | None, name: str, converters: dict):
    doc = dict(doc or {})
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(doc) - names
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(unknown)}")
    kw = {}
    for k, v in doc.items():
        conv = converters.get(k, _number)
        kw[k] = conv(v)
    try:
        return cls(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{name}]: {exc}") from exc


def _int(v) -> int:
    n = _number(v)
    if int(n) != n:
        raise ConfigError(f"expected an integer, got {v!r}")
    return int(n)


def _opt_number(v):
    if v is None or str(v).strip().lower() in ("", "none", "auto"):
        return None
    return _number(v)


def _int_list(v) -> tuple[int, ...]:
    if isinstance(v, int | float | str) and not isinstance(v, bool):
        v = str(v).replace(",", " ").split()
    return tuple(_int(x) for x in v)


def parse_config(doc: dict) -> RunConfig:
    """Build a :class:`RunConfig` from the nested-dict form."""
    if "manifold" not in doc:
        raise ConfigError("missing [manifold] section")
    m = dict(doc["manifold"])
    try:
        p = _int(m.pop("p", 3))
        f, fdoc = _warping(m.pop("f", "LinearCone"))
        h, hdoc = _warping(m.pop("h"))
        period = float(_number(m.pop("period", 1.0)))
    except KeyError as exc:
        raise ConfigError(f"[manifold] missing {exc}") from exc
    if m:
        raise ConfigError(f"unknown keys in [manifold]: {sorted(m)}")
    try:
        spec = ManifoldSpec(p=p, f=f, h=h, period=period)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if not math.isfinite(period):
        raise ConfigError("period must be finite")
    mdoc = {"p": p, "f": fdoc, "h": hdoc, "period": period}

    search = _section(SearchParams, doc.get("search"), "search",
                      {"t_max": _opt_number, "n_grid": _int, "k_cap_factor": _int, "min_refine": _int,
                       "max_refine": _int, "workers": _int})
    curv = _section(CurvatureSettings, doc.get("curvature"), "curvature",
                    {"n_points": _int, "p_max": _int, "p_search": _bool})
    esc = _section(EscapeSettings, doc.get("escape"), "escape", {})
    orc = _section(OracleSettings, doc.get("oracle"), "oracle",
                   {"l": _int_list, "nt": _int, "nphi": _int, "stencil_radius": _int,
                    "t_extent": _opt_number})
    out = _section(OutputSettings, doc.get("output"), "output", {"dir": str, "format": str})
    if out.format not in ("csv", "json"):
        raise ConfigError("output format must be csv or json")
    if not 0 < esc.tail_fraction <= 1 or esc.epsilon <= 0:
        raise ConfigError("[escape] needs 0 < tail_fraction <= 1 and epsilon > 0")
    if curv.n_points < 2 or not 0 < curv.r_min < curv.r_max:
        raise ConfigError("[curvature] needs 0 < r_min < r_max and n_points >= 2")
    if orc.nt < 64 or orc.nphi < 64 or orc.stencil_radius < 1 or any(v < 1 for v in orc.l):
        raise ConfigError("[oracle] needs nt, nphi >= 64, stencil_radius >= 1, l >= 1")
    return RunConfig(manifold=spec, manifold_doc=mdoc, ladder=_ladder(doc.get("ladder")),
                     search=search, curvature=curv, escape=esc, oracle=orc, output=out)


def _ini_to_doc(text: str) -> dict:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    doc: dict = {}
    for name in cp.sections():
        sec = dict(cp[name])
        if name == "manifold":
            nested: dict = {}
            for k, v in sec.items():
                if "." in k:
                    head, tail = k.split(".", 1)
                    slot = nested.setdefault(head, {})
                    if isinstance(slot, str):
                        slot = nested[head] = {"family": slot}
                    slot[tail] = v
                elif k in ("f", "h") and isinstance(nested.get(k), dict):
                    nested[k]["family"] = v
                else:
                    nested[k] = v
            for k in ("f", "h"):
                if isinstance(nested.get(k), dict) and "family" not in nested[k]:
                    raise ConfigError(f"[manifold] {k} parameters given without {k} = <family>")
            sec = nested
        doc[name] = sec
    return doc


def load_config(path: str | Path) -> RunConfig:
    """Read an INI or JSON config file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if path.suffix.lower() == ".json" or text.lstrip().startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    else:
        doc = _ini_to_doc(text)
    return parse_config(doc)
