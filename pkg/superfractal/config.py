"""Run configuration.

Config files are YAML (JSON documents are YAML too). Values are read from the
``safe_load`` result while error messages are located through the composed node
graph, so every message starts with ``path:line:`` of the offending node, or of
the enclosing mapping when a key is missing.
"""
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, NoReturn, Optional, Sequence, Tuple, Union

import yaml
from loguru import logger

from superfractal.errors import ConfigError, SuperfractalError, fail
from superfractal.fractal_types import UNIT_FRAME, Frame, Raster
from superfractal.geometry import MAP_KINDS, Map2, fixed_point, rasterize_points
from superfractal.ifs import Ifs
from superfractal.imaging import GRAY_MODES, read_raster
from superfractal.plugins import call_factory
from superfractal.superifs import MODES, SuperIfs
from superfractal.utils import file_digest

KeyPath = Tuple[Union[str, int], ...]

RENDER_MODES = ("deterministic", "chaos-set", "chaos-measure")
DIMENSION_REGIMES = ("moran", "deterministic", "random", "homogeneous", "vvariable", "box")
INIT_KEYWORDS = ("full", "center", "fixed-point")

_MISSING = object()


def dotted(keys: KeyPath) -> str:
    out = ""
    for k in keys:
        out += f"[{k}]" if isinstance(k, int) else (f".{k}" if out else str(k))
    return out or "<root>"


class ConfigSource:
    """Parsed document plus node marks for line-precise errors."""

    def __init__(self, path: str, text: str):
        self.path = path
        try:
            self.root = yaml.compose(text, Loader=yaml.SafeLoader)
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            line = mark.line + 1 if mark is not None else None
            problem = getattr(exc, "problem", None) or str(exc)
            logger.error(f"{path}: invalid YAML: {problem}")
            raise ConfigError(f"invalid YAML: {problem}", path, line) from exc
        if data is None:
            data = {}
        if not isinstance(data, dict):
            self.error((), "config root must be a mapping")
        self.data: Dict[str, Any] = data

    def line_of(self, keys: KeyPath) -> Optional[int]:
        node = self.root
        if node is None:
            return None
        for key in keys:
            child = None
            if isinstance(node, yaml.MappingNode):
                for k_node, v_node in node.value:
                    if k_node.value == str(key):
                        child = v_node
                        break
            elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
                child = node.value[key]
            if child is None:
                break
            node = child
        return node.start_mark.line + 1

    def error(self, keys: KeyPath, message: str) -> NoReturn:
        line = self.line_of(keys)
        err = ConfigError(f"{dotted(keys)}: {message}", self.path, line)
        logger.error(str(err))
        raise err

    def reraise(self, keys: KeyPath, exc: SuperfractalError) -> NoReturn:
        """Re-raise a validation error from a library constructor at the config node that caused it."""
        raise ConfigError(f"{dotted(keys)}: {exc}", self.path, self.line_of(keys)) from exc

    def has(self, keys: KeyPath) -> bool:
        return self._lookup(keys) is not _MISSING

    def _lookup(self, keys: KeyPath) -> Any:
        cur: Any = self.data
        for key in keys:
            if isinstance(cur, dict) and key in cur:
                cur = cur[key]
            elif isinstance(cur, list) and isinstance(key, int) and key < len(cur):
                cur = cur[key]
            else:
                return _MISSING
        return cur

    def get(self, keys: KeyPath, default: Any = _MISSING) -> Any:
        value = self._lookup(keys)
        if value is _MISSING or value is None:
            if default is _MISSING:
                self.error(keys, "is required")
            return default
        return value

    def get_int(self, keys: KeyPath, default: Any = _MISSING, minimum: Optional[int] = None) -> Any:
        value = self.get(keys, default)
        if value is None:
            return None
        if isinstance(value, bool) or not isinstance(value, int):
            self.error(keys, f"expected an integer, got {value!r}")
        if minimum is not None and value < minimum:
            self.error(keys, f"must be at least {minimum}, got {value}")
        return int(value)

    def get_float(self, keys: KeyPath, default: Any = _MISSING, lo: Optional[float] = None,
                  hi: Optional[float] = None) -> Any:
        value = self.get(keys, default)
        if value is None:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.error(keys, f"expected a number, got {value!r}")
        if (lo is not None and value < lo) or (hi is not None and value > hi):
            self.error(keys, f"must lie in [{lo}, {hi}], got {value}")
        return float(value)

    def get_str(self, keys: KeyPath, default: Any = _MISSING, choices: Optional[Sequence[str]] = None) -> Any:
        value = self.get(keys, default)
        if value is None:
            return None
        if not isinstance(value, str):
            self.error(keys, f"expected a string, got {value!r}")
        if choices is not None and value not in choices:
            self.error(keys, f"must be one of {tuple(choices)}, got {value!r}")
        return value

    def get_bool(self, keys: KeyPath, default: Any = _MISSING) -> bool:
        value = self.get(keys, default)
        if not isinstance(value, bool):
            self.error(keys, f"expected true or false, got {value!r}")
        return value

    def get_list(self, keys: KeyPath, default: Any = _MISSING) -> Any:
        value = self.get(keys, default)
        if value is None:
            return None
        if not isinstance(value, list):
            self.error(keys, f"expected a list, got {value!r}")
        return value

    def get_float_list(self, keys: KeyPath, default: Any = _MISSING, length: Optional[int] = None) -> Any:
        value = self.get_list(keys, default)
        if value is None:
            return None
        for i, v in enumerate(value):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                self.error(keys + (i,), f"expected a number, got {v!r}")
        if length is not None and len(value) != length:
            self.error(keys, f"expected {length} numbers, got {len(value)}")
        return [float(v) for v in value]

    def get_mapping(self, keys: KeyPath, default: Any = _MISSING) -> Any:
        value = self.get(keys, default)
        if value is None:
            return None
        if not isinstance(value, dict):
            self.error(keys, f"expected a mapping, got {value!r}")
        return value


@dataclass
class RunSection:
    seed: Optional[int]
    mode: Optional[str]
    iterations: int
    stride: int
    n_points: int
    burn_in: int
    ifs_index: int
    texture: bool


@dataclass
class RasterSection:
    width: int
    height: int
    frame: Frame
    init: str
    gamma: float
    gray_mode: str


@dataclass
class Config:
    path: str
    digest: str
    source: ConfigSource
    run: RunSection
    raster: RasterSection
    output_dir: str
    superifs: Optional[SuperIfs] = None
    raw: Dict[str, Any] = field(default_factory=dict)

    def require_superifs(self) -> SuperIfs:
        if self.superifs is None:
            self.source.error(("superifs",), "is required for this command")
        return self.superifs

    def require_seed(self) -> int:
        if self.run.seed is None:
            self.source.error(("run", "seed"), "randomised commands need an explicit seed (config or --seed)")
        return self.run.seed


# -------------------- superIFS construction --------------------

def _build_map(src: ConfigSource, keys: KeyPath) -> Tuple[Map2, float]:
    kind = src.get_str(keys + ("kind",), "affine", MAP_KINDS)
    coeffs = src.get_float_list(keys + ("coefficients",))
    hint = src.get_float(keys + ("lipschitz_hint",), None, lo=0.0)
    prob = src.get_float(keys + ("prob",), lo=0.0, hi=1.0)
    try:
        return Map2(kind, tuple(coeffs), hint), prob
    except SuperfractalError as exc:
        src.reraise(keys, exc)


def _build_ifs(src: ConfigSource, keys: KeyPath, n: int) -> Ifs:
    name = src.get_str(keys + ("name",), f"F{n}")
    flagged = src.get_bool(keys + ("average_contractive",), False)
    entries = src.get_list(keys + ("maps",))
    if not entries:
        src.error(keys + ("maps",), "needs at least one map")
    built = [_build_map(src, keys + ("maps", m)) for m in range(len(entries))]
    try:
        return Ifs([f for f, _ in built], [p for _, p in built], name=name, average_contractive=flagged)
    except SuperfractalError as exc:
        src.reraise(keys, exc)


def _build_superifs(src: ConfigSource) -> Optional[SuperIfs]:
    if not src.has(("superifs",)):
        return None
    src.get_mapping(("superifs",))
    V = src.get_int(("superifs", "V"), None, minimum=1)
    if src.has(("superifs", "preset")):
        keys: KeyPath = ("superifs", "preset")
        module = src.get_str(keys + ("module",))
        function = src.get_str(keys + ("function",))
        kwargs = src.get_mapping(keys + ("kwargs",), {})
        try:
            built = call_factory(module, function, kwargs)
        except SuperfractalError as exc:
            src.reraise(keys, exc)
        except TypeError as exc:
            src.error(keys, f"preset call failed: {exc}")
        if isinstance(built, Ifs):
            built = SuperIfs([built], [1.0], V or 1, name=built.name)
        if not isinstance(built, SuperIfs):
            src.error(keys, f"{module}.{function} returned {type(built).__name__}, expected SuperIfs or Ifs")
        return built if V is None else built.with_V(V)
    entries = src.get_list(("superifs", "ifs"))
    if not entries:
        src.error(("superifs", "ifs"), "needs at least one IFS")
    ifss = [_build_ifs(src, ("superifs", "ifs", n), n + 1) for n in range(len(entries))]
    probs = src.get_float_list(("superifs", "probs"), [1.0] if len(ifss) == 1 else _MISSING)
    name = src.get_str(("superifs", "name"), "")
    try:
        return SuperIfs(ifss, probs, V or 1, name=name)
    except SuperfractalError as exc:
        src.reraise(("superifs",), exc)


# -------------------- sections --------------------

def _run_section(src: ConfigSource) -> RunSection:
    keys: KeyPath = ("run",)
    run = RunSection(
        seed=src.get_int(keys + ("seed",), None, minimum=0),
        mode=src.get_str(keys + ("mode",), None, RENDER_MODES + MODES),
        iterations=src.get_int(keys + ("iterations",), 30, minimum=0),
        stride=src.get_int(keys + ("stride",), 1, minimum=1),
        n_points=src.get_int(keys + ("n_points",), 1_000_000, minimum=1),
        burn_in=src.get_int(keys + ("burn_in",), 100, minimum=0),
        ifs_index=src.get_int(keys + ("ifs_index",), 1, minimum=1),
        texture=src.get_bool(keys + ("texture",), False),
    )
    if run.n_points <= run.burn_in:
        src.error(keys + ("n_points",), f"must exceed burn_in ({run.burn_in}), got {run.n_points}")
    return run


def _raster_section(src: ConfigSource) -> RasterSection:
    keys: KeyPath = ("raster",)
    frame = tuple(src.get_float_list(keys + ("frame",), list(UNIT_FRAME), length=4))
    if not (frame[0] < frame[2] and frame[1] < frame[3]):
        src.error(keys + ("frame",), f"needs xmin < xmax and ymin < ymax, got {list(frame)}")
    return RasterSection(
        width=src.get_int(keys + ("width",), 256, minimum=1),
        height=src.get_int(keys + ("height",), 256, minimum=1),
        frame=frame,  # type: ignore[arg-type]
        init=src.get_str(keys + ("init",), "full"),
        gamma=src.get_float(keys + ("gamma",), 0.5, lo=1e-9, hi=1.0),
        gray_mode=src.get_str(keys + ("gray_mode",), "gamma", GRAY_MODES),
    )


def load_config(path: str) -> Config:
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as exc:
        logger.error(f"cannot read config {path}: {exc}")
        raise ConfigError(f"cannot read config: {exc}", path) from exc
    src = ConfigSource(path, text)
    cfg = Config(
        path=path,
        digest=file_digest(path),
        source=src,
        run=_run_section(src),
        raster=_raster_section(src),
        output_dir=src.get_str(("io", "output_dir"), "./output"),
        superifs=_build_superifs(src),
        raw=src.data,
    )
    if cfg.superifs is not None and cfg.run.ifs_index > cfg.superifs.N:
        src.error(("run", "ifs_index"), f"superIFS has {cfg.superifs.N} IFSs, got {cfg.run.ifs_index}")
    logger.info(f"Config {path} loaded (sha256 {cfg.digest[:12]})")
    return cfg


def apply_overrides(cfg: Config, seed: Optional[int] = None, out: Optional[str] = None,
                    iterations: Optional[int] = None, stride: Optional[int] = None,
                    mode: Optional[str] = None) -> Config:
    """Command-line flags take precedence over config values."""
    if seed is not None:
        if seed < 0:
            fail(ConfigError, f"--seed must be non-negative, got {seed}")
        cfg.run.seed = seed
    if out is not None:
        cfg.output_dir = out
    if iterations is not None:
        if iterations < 0:
            fail(ConfigError, f"--iterations must be non-negative, got {iterations}")
        cfg.run.iterations = iterations
    if stride is not None:
        if stride < 1:
            fail(ConfigError, f"--stride must be at least 1, got {stride}")
        cfg.run.stride = stride
    if mode is not None:
        cfg.run.mode = mode
    return cfg


def initial_screen(cfg: Config, s: SuperIfs) -> Union[str, Raster]:
    """``full`` / ``center`` pass through; ``fixed-point`` and image paths become a Raster."""
    init = cfg.raster.init
    if init in ("full", "center"):
        return init
    r = cfg.raster
    if init == "fixed-point":
        p = fixed_point(s.ifss[0].maps[0])
        return rasterize_points([[p.x, p.y]], r.width, r.height, r.frame)
    image_path = init if os.path.isabs(init) else os.path.join(os.path.dirname(os.path.abspath(cfg.path)), init)
    if not os.path.exists(image_path):
        cfg.source.error(("raster", "init"), f"expected one of {INIT_KEYWORDS} or an image path, got {init!r}")
    return read_raster(image_path, r.width, r.height, r.frame)


# -------------------- command parameters --------------------

@dataclass
class DimensionParams:
    regime: str
    V: int
    k: int
    tol: float
    replicas: int
    box_sizes: Optional[List[int]]
    iterations: int


def dimension_params(cfg: Config) -> DimensionParams:
    src = cfg.source
    keys: KeyPath = ("dimension",)
    sizes = src.get_list(keys + ("box_sizes",), None)
    if sizes is not None:
        for i, size in enumerate(sizes):
            if isinstance(size, bool) or not isinstance(size, int) or size < 1:
                src.error(keys + ("box_sizes", i), f"expected a positive integer, got {size!r}")
    return DimensionParams(
        regime=src.get_str(keys + ("regime",), "moran", DIMENSION_REGIMES),
        V=src.get_int(keys + ("V",), cfg.superifs.V if cfg.superifs else 1, minimum=1),
        k=src.get_int(keys + ("k",), 100_000, minimum=1),
        tol=src.get_float(keys + ("tol",), 1e-4, lo=1e-12),
        replicas=src.get_int(keys + ("replicas",), 8, minimum=1),
        box_sizes=sizes,
        iterations=src.get_int(keys + ("iterations",), 30, minimum=0),
    )


@dataclass
class TreestatsParams:
    M: int
    N: int
    Vs: List[int]
    P: List[float]
    depth: int
    samples: int


TREESTATS_MAX_DEPTH = 3


def treestats_params(cfg: Config) -> TreestatsParams:
    src = cfg.source
    keys: KeyPath = ("treestats",)
    N = src.get_int(keys + ("N",), 2, minimum=1)
    raw_V = src.get(keys + ("V",), 64)
    Vs = raw_V if isinstance(raw_V, list) else [raw_V]
    for i, v in enumerate(Vs):
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            src.error(keys + (("V", i) if isinstance(raw_V, list) else ("V",)), f"expected V >= 1, got {v!r}")
    P = src.get_float_list(keys + ("P",), [1.0 / N] * N, length=N)
    depth = src.get_int(keys + ("depth",), 1, minimum=0)
    if depth > TREESTATS_MAX_DEPTH:
        src.error(keys + ("depth",), f"depth {depth} exceeds the limit of {TREESTATS_MAX_DEPTH}")
    return TreestatsParams(
        M=src.get_int(keys + ("M",), 2, minimum=1),
        N=N,
        Vs=[int(v) for v in Vs],
        P=P,
        depth=depth,
        samples=src.get_int(keys + ("samples",), 100_000, minimum=2),
    )


@dataclass
class InterpParams:
    points: List[Tuple[float, float]]
    d_options: List[List[float]]
    depth: int
    samples: int
    P: List[float]
    V: int


def interp_params(cfg: Config) -> InterpParams:
    src = cfg.source
    keys: KeyPath = ("interp",)
    raw_points = src.get_list(keys + ("points",))
    points = [tuple(src.get_float_list(keys + ("points", i), length=2)) for i in range(len(raw_points))]
    raw_d = src.get_list(keys + ("d",))
    if raw_d and isinstance(raw_d[0], list):
        d_options = [src.get_float_list(keys + ("d", i)) for i in range(len(raw_d))]
    else:
        d_options = [src.get_float_list(keys + ("d",))]
    n = len(d_options)
    return InterpParams(
        points=points,  # type: ignore[arg-type]
        d_options=d_options,
        depth=src.get_int(keys + ("depth",), 16, minimum=1),
        samples=src.get_int(keys + ("samples",), 1025, minimum=2),
        P=src.get_float_list(keys + ("P",), [1.0 / n] * n, length=n),
        V=src.get_int(keys + ("V",), 1, minimum=1),
    )


@dataclass
class SpacefillParams:
    depth: int
    constant_tree: bool
    component: int
    V: int


def spacefill_params(cfg: Config) -> SpacefillParams:
    src = cfg.source
    keys: KeyPath = ("spacefill",)
    V = src.get_int(keys + ("V",), 2, minimum=1)
    component = src.get_int(keys + ("component",), 1, minimum=1)
    if component > V:
        src.error(keys + ("component",), f"must not exceed V={V}, got {component}")
    return SpacefillParams(
        depth=src.get_int(keys + ("depth",), 5, minimum=0),
        constant_tree=src.get_bool(keys + ("constant_tree",), False),
        component=component,
        V=V,
    )


@dataclass
class ColourParams:
    palette_module: str
    palette_function: str
    palette_kwargs: Dict[str, Any]
    n_points: int


def colour_params(cfg: Config) -> ColourParams:
    src = cfg.source
    keys: KeyPath = ("colour",)
    return ColourParams(
        palette_module=src.get_str(keys + ("palette", "module")),
        palette_function=src.get_str(keys + ("palette", "function")),
        palette_kwargs=src.get_mapping(keys + ("palette", "kwargs"), {}),
        n_points=src.get_int(keys + ("n_points",), cfg.run.n_points, minimum=2),
    )
