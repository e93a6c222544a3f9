import argparse
import math
import sys
import time
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd
from loguru import logger

from superfractal import reporting
from superfractal.apps import (
    PaletteIfs,
    colour_steal_render,
    evaluate_vvariable_interpolant,
    interpolation_polyline,
    interpolation_superifs,
    spacefill_approximant,
    spacefill_superifs,
)
from superfractal.config import (
    RENDER_MODES,
    Config,
    apply_overrides,
    colour_params,
    dimension_params,
    initial_screen,
    interp_params,
    load_config,
    spacefill_params,
    treestats_params,
)
from superfractal.dimension import box_dimension, estimate_dimension
from superfractal.errors import EXIT_OK, ConfigError, exit_code_for, fail
from superfractal.fractal_types import DimensionEstimate, InterpolationData, Polyline, Raster
from superfractal.ifs import chaos_game, chaos_game_measure, deterministic_attractor, deterministic_texture
from superfractal.imaging import measure_to_gray, raster_to_gray, write_pgm, write_ppm, write_raster
from superfractal.plugins import call_factory
from superfractal.superifs import MODES, index_log_frame, initial_bank, run_superfractal
from superfractal.svg_templates import address_colour, render_polyline_svg
from superfractal.trees import (
    CodeTree,
    format_tree,
    free_probability_bound,
    free_probability_mc,
    grove_from_indices,
    rho_cylinder,
    rho_v_histogram,
    sample_index,
    tree_count,
    tree_from_code,
)
from superfractal.utils import ensure_dir, make_rng, spawn_rngs

COMMANDS = ("render", "superrun", "dimension", "treestats", "interp", "spacefill", "colour")

# nodes of a sampled V-variable interpolation tree
MAX_TREE_NODES = 1 << 20

TEXTURE_COLOURS = np.array([[255, 255, 255], [200, 30, 30], [30, 160, 60]], dtype=np.uint8)


def _seed(cfg: Config) -> int:
    return cfg.require_seed()


def _initial_raster(cfg: Config) -> Raster:
    r = cfg.raster
    init = initial_screen(cfg, cfg.require_superifs())
    if isinstance(init, Raster):
        return init
    if init == "full":
        return Raster.full(r.width, r.height, r.frame)
    bits = np.zeros((r.height, r.width), dtype=bool)
    bits[r.height // 2, r.width // 2] = True
    return Raster(bits, r.frame)


def _write_svg(text: str, name: str) -> str:
    path = reporting.REPORTER.output_path(name)
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)
    return path


def _polyline_frame(poly: Polyline) -> pd.DataFrame:
    return pd.DataFrame({"x": poly.vertices[:, 0], "y": poly.vertices[:, 1]})


def cmd_render(cfg: Config) -> List[str]:
    s = cfg.require_superifs()
    ifs = s.ifss[cfg.run.ifs_index - 1]
    mode = cfg.run.mode or "deterministic"
    if mode not in RENDER_MODES:
        cfg.source.error(("run", "mode"), f"render needs one of {RENDER_MODES}, got {mode!r}")
    r = cfg.raster
    rep = reporting.REPORTER
    outputs = []
    if mode == "deterministic":
        r0 = _initial_raster(cfg)
        attractor = deterministic_attractor(ifs, r0, cfg.run.iterations)
        outputs.append(write_raster(attractor, rep.output_path("attractor.pgm")))
        rep.add_result("pixels", attractor.count())
        if cfg.run.texture:
            labels = np.where(r0.bits, 1, 0)
            labels[:, r0.width // 2:] *= 2
            tex = deterministic_texture(ifs, labels, cfg.run.iterations, r.frame)
            outputs.append(write_ppm(TEXTURE_COLOURS[tex], rep.output_path("texture.ppm")))
    elif mode == "chaos-set":
        attractor = chaos_game(ifs, _seed(cfg), cfg.run.n_points, cfg.run.burn_in, r.width, r.height, r.frame)
        outputs.append(write_raster(attractor, rep.output_path("attractor.pgm")))
        rep.add_result("pixels", attractor.count())
    else:
        measure = chaos_game_measure(ifs, _seed(cfg), cfg.run.n_points, cfg.run.burn_in, r.width, r.height, r.frame)
        gray = measure_to_gray(measure, r.gray_mode, r.gamma)
        outputs.append(write_pgm(gray, rep.output_path("measure.pgm")))
        rep.add_result("support_pixels", measure.support().count())
    return outputs


def cmd_superrun(cfg: Config) -> List[str]:
    s = cfg.require_superifs()
    mode = cfg.run.mode or "sets"
    if mode not in MODES:
        cfg.source.error(("run", "mode"), f"superrun needs one of {MODES}, got {mode!r}")
    seed = _seed(cfg)
    r = cfg.raster
    rep = reporting.REPORTER
    flags = rep.artifact_flags()
    outputs: List[str] = []

    def screen_gray(screen) -> np.ndarray:
        if mode == "sets":
            return raster_to_gray(screen)
        return measure_to_gray(screen, r.gray_mode, r.gamma)

    def dump(step, a, bank) -> None:
        if not flags.write_frames or step % cfg.run.stride != 0:
            return
        for v, screen in enumerate(bank.screens, start=1):
            outputs.append(write_pgm(screen_gray(screen), rep.output_path(f"step_{step:04d}_screen_{v}.pgm")))

    init = initial_bank(s, mode, r.width, r.height, r.frame, initial_screen(cfg, s))
    result = run_superfractal(s, mode, init, cfg.run.iterations, seed, on_step=dump)
    for v, screen in enumerate(result.bank.screens, start=1):
        outputs.append(write_pgm(screen_gray(screen), rep.output_path(f"final_screen_{v}.pgm")))
    if result.index_log:
        rep.add_index_log(index_log_frame(result.index_log))
    rep.add_result("iterations", cfg.run.iterations)
    return outputs


def cmd_dimension(cfg: Config) -> List[str]:
    s = cfg.require_superifs()
    params = dimension_params(cfg)
    ifs = s.ifss[cfg.run.ifs_index - 1]
    rep = reporting.REPORTER
    if params.regime in ("moran", "deterministic"):
        est = estimate_dimension("deterministic", ifs)
    elif params.regime == "box":
        r0 = Raster.full(cfg.raster.width, cfg.raster.height, cfg.raster.frame)
        attractor = deterministic_attractor(ifs, r0, params.iterations)
        slope, r2 = box_dimension(attractor, params.box_sizes)
        est = DimensionEstimate(slope, 0.0, 1.0 - r2, "box")
    elif params.regime == "vvariable":
        est = estimate_dimension("vvariable", s, s.probs, params.V, params.k, _seed(cfg), params.tol,
                                 params.replicas)
        rep.add_lyapunov(est.evaluations)
    else:
        est = estimate_dimension(params.regime, s)
    print(f"D = {est.value:.6f} +- {est.uncertainty:.6f} (regime {params.regime}, residual {est.residual:.3e})")
    rep.add_table("dimension", pd.DataFrame([{
        "regime": params.regime, "value": est.value, "uncertainty": est.uncertainty,
        "residual": est.residual, "V": params.V,
    }]))
    rep.add_result("dimension", est.value)
    return []


def cmd_treestats(cfg: Config) -> List[str]:
    params = treestats_params(cfg)
    seed = _seed(cfg)
    rows = []
    free_rows = []
    rngs = spawn_rngs(seed, 2 * len(params.Vs))
    k = params.depth
    for j, V in enumerate(params.Vs):
        est = rho_v_histogram(params.M, params.N, V, params.P, k, params.samples, rngs[2 * j])
        bound = 2.0 * params.M ** (2 * k) / (3.0 * V)
        for code in range(tree_count(params.M, params.N, k)):
            tau = tree_from_code(code, params.M, params.N, k)
            rho = rho_cylinder(tau, params.P)
            p = float(est[code])
            stderr = math.sqrt(max(p * (1.0 - p), 0.0) / params.samples)
            rows.append({
                "V": V, "tree": format_tree(tau), "rho": rho, "rho_v_estimate": p, "stderr": stderr,
                "abs_diff": abs(p - rho), "bound": bound, "pass": abs(p - rho) <= bound + 3.0 * stderr,
            })
        p_free, se_free = free_probability_mc(params.M, V, k, params.samples, rngs[2 * j + 1])
        free_rows.append({
            "V": V, "depth": k, "free_probability": p_free, "stderr": se_free,
            "lower_bound": 1.0 - bound, "exact_lower_bound": 1.0 - free_probability_bound(params.M, V, k),
        })
    table = pd.DataFrame(rows)
    rep = reporting.REPORTER
    rep.add_table("treestats", table)
    rep.add_table("free_trees", pd.DataFrame(free_rows))
    failed = int((~table["pass"]).sum())
    rep.add_result("failed_rows", failed)
    if failed:
        logger.warning(f"{failed} of {len(table)} cylinder rows exceed the bound plus 3 standard errors")
    return []


def _sample_tree(s, depth: int, seed: int, component: int = 1) -> CodeTree:
    if depth == 0:
        return CodeTree.constant(s.M, 0, 1)
    rng = make_rng(seed)
    indices = [sample_index(s.N, s.V, s.M, s.probs, rng) for _ in range(depth)]
    return grove_from_indices(indices, max_depth=depth)[component - 1]


def cmd_interp(cfg: Config) -> List[str]:
    params = interp_params(cfg)
    data = InterpolationData(tuple(params.points), tuple(params.d_options[0]))
    rep = reporting.REPORTER
    if len(params.d_options) == 1:
        poly = interpolation_polyline(data, params.depth, params.samples)
    else:
        s = interpolation_superifs(data, params.d_options, params.P, params.V)
        depth = min(params.depth, int(math.log(MAX_TREE_NODES) / math.log(max(s.M, 2))))
        if depth < params.depth:
            logger.warning(f"V-variable interpolant evaluated at depth {depth} instead of {params.depth}")
        sigma = _sample_tree(s, depth, _seed(cfg))
        pts = np.asarray(params.points)
        xs = np.union1d(np.linspace(pts[0, 0], pts[-1, 0], params.samples), pts[:, 0])
        ys = evaluate_vvariable_interpolant(data, params.d_options, sigma, xs)
        poly = Polyline(np.column_stack([xs, ys]))
    ys_all = np.asarray(params.points)[:, 1].tolist() + poly.vertices[:, 1].tolist()
    pad = 0.05 * (max(ys_all) - min(ys_all) or 1.0)
    frame = (float(poly.vertices[0, 0]), min(ys_all) - pad, float(poly.vertices[-1, 0]), max(ys_all) + pad)
    svg = render_polyline_svg(poly.vertices, frame, title="fractal interpolation", markers=params.points)
    rep.add_table("interp", _polyline_frame(poly))
    return [_write_svg(svg, "interp.svg")]


def cmd_spacefill(cfg: Config) -> List[str]:
    params = spacefill_params(cfg)
    s = spacefill_superifs(params.V)
    if params.constant_tree:
        sigma = CodeTree.constant(s.M, params.depth, 1)
    else:
        sigma = _sample_tree(s, params.depth, _seed(cfg), params.component)
    poly = spacefill_approximant(s, sigma, params.depth)
    colours = [address_colour(a, s.M) for a in poly.addresses]
    svg = render_polyline_svg(poly.vertices, (0.0, 0.0, 1.0, 1.0), title="space-filling approximant",
                              colours=colours)
    rep = reporting.REPORTER
    rep.add_table("spacefill", _polyline_frame(poly))
    tree_path = rep.output_path("spacefill_tree.txt")
    with open(tree_path, "w", encoding="utf-8") as f:
        f.write(format_tree(sigma) + "\n")
    rep.add_result("segments", poly.segment_count())
    return [_write_svg(svg, "spacefill.svg"), tree_path]


def cmd_colour(cfg: Config) -> List[str]:
    s = cfg.require_superifs()
    params = colour_params(cfg)
    palette = call_factory(params.palette_module, params.palette_function, params.palette_kwargs)
    if not isinstance(palette, PaletteIfs):
        cfg.source.error(("colour", "palette"), f"expected a PaletteIfs, got {type(palette).__name__}")
    r = cfg.raster
    base = s.ifss[cfg.run.ifs_index - 1] if s.N == 1 else s
    rgb = colour_steal_render(base, palette, _seed(cfg), params.n_points, r.width, r.height, r.frame,
                              cfg.run.burn_in)
    return [write_ppm(rgb, reporting.REPORTER.output_path("colour.ppm"))]


HANDLERS: Dict[str, Callable[[Config], List[str]]] = {
    "render": cmd_render,
    "superrun": cmd_superrun,
    "dimension": cmd_dimension,
    "treestats": cmd_treestats,
    "interp": cmd_interp,
    "spacefill": cmd_spacefill,
    "colour": cmd_colour,
}


def run(command: str, cfg_path: str, seed: Optional[int] = None, out: Optional[str] = None,
        iterations: Optional[int] = None, stride: Optional[int] = None, mode: Optional[str] = None,
        log_level: str = "INFO") -> Optional[str]:
    if command not in HANDLERS:
        fail(ConfigError, f"unknown command {command!r}; expected one of {COMMANDS}")
    cfg = apply_overrides(load_config(cfg_path), seed, out, iterations, stride, mode)
    ensure_dir(cfg.output_dir)
    rep = reporting.init_reporting(cfg, command, log_level)
    logger.info(f"Start {command} with seed {cfg.run.seed}, output dir {cfg.output_dir}")
    start_time = time.perf_counter()
    for path in HANDLERS[command](cfg):
        rep.add_output(path)
    manifest = rep.finalize()
    logger.info(f"{command} finished in {time.perf_counter() - start_time:.2f}s")
    return manifest


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Render IFS attractors and V-variable fractals")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", "-c", type=str, required=True, help="Path to YAML or JSON config")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", type=str, default=None, help="Output directory")
    parser.add_argument("--iterations", type=int, default=None)
    parser.add_argument("--stride", type=int, default=None)
    parser.add_argument("--mode", type=str, default=None, choices=RENDER_MODES + MODES)
    parser.add_argument("--log-level", type=str, default="INFO",
                        choices=("TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR", "CRITICAL"))
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logger.remove()
    logger.add(sys.stderr, level=args.log_level)
    try:
        run(args.command, args.config, args.seed, args.out, args.iterations, args.stride, args.mode,
            args.log_level)
    except Exception as exc:
        code = exit_code_for(exc)
        if code is None:
            raise
        print(f"error: {exc}", file=sys.stderr)
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
