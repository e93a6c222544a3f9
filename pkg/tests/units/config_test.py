import os
import textwrap

import numpy as np
import pytest

from superfractal.config import (
    apply_overrides,
    dimension_params,
    initial_screen,
    interp_params,
    load_config,
    spacefill_params,
    treestats_params,
)
from superfractal.errors import ConfigError
from superfractal.fractal_types import Raster
from superfractal.imaging import raster_to_gray, write_pgm

TWO_IFS = """\
run:
  seed: 1
superifs:
  V: 2
  probs: [0.5, 0.5]
  ifs:
    - name: halves
      maps:
        - coefficients: [0.5, 0, 0, 0, 0.5, 0]
          prob: 0.5
        - coefficients: [0.5, 0, 0.5, 0, 0.5, 0]
          prob: 0.5
    - maps:
        - coefficients: [0.5, 0, 0, 0, 0.5, 0.5]
          prob: 0.25
        - coefficients: [0.5, 0, 0.5, 0, 0.5, 0.5]
          prob: 0.75
"""


def write_config(tmp_path, text, name="run.yaml"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text))
    return str(path)


def test_explicit_superifs(tmp_path):
    cfg = load_config(write_config(tmp_path, TWO_IFS))
    s = cfg.require_superifs()
    assert (s.N, s.M, s.V) == (2, 2, 2)
    assert s.probs == [0.5, 0.5]
    assert s.ifss[0].name == "halves"
    assert s.ifss[1].name == "F2"
    assert s.ifss[1].probs == [0.25, 0.75]
    assert cfg.require_seed() == 1
    assert len(cfg.digest) == 64


def test_defaults(tmp_path):
    cfg = load_config(write_config(tmp_path, "run:\n  seed: 3\n"))
    assert cfg.superifs is None
    assert (cfg.run.iterations, cfg.run.stride, cfg.run.burn_in) == (30, 1, 100)
    assert cfg.run.n_points == 1_000_000
    assert (cfg.raster.width, cfg.raster.height) == (256, 256)
    assert cfg.raster.frame == (0.0, 0.0, 1.0, 1.0)
    assert (cfg.raster.init, cfg.raster.gray_mode, cfg.raster.gamma) == ("full", "gamma", 0.5)
    assert cfg.output_dir == "./output"
    with pytest.raises(ConfigError, match="superifs: is required for this command"):
        cfg.require_superifs()


def test_missing_prob_names_line_and_key(tmp_path):
    text = TWO_IFS.replace("          prob: 0.5\n    - maps", "    - maps")
    path = write_config(tmp_path, text)
    with pytest.raises(ConfigError) as info:
        load_config(path)
    assert str(info.value) == f"{path}:11: superifs.ifs[0].maps[1].prob: is required"
    assert info.value.line == 11


def test_missing_seed(tmp_path):
    cfg = load_config(write_config(tmp_path, "raster:\n  width: 32\n"))
    assert cfg.run.seed is None
    with pytest.raises(ConfigError, match="run.seed"):
        cfg.require_seed()
    apply_overrides(cfg, seed=12)
    assert cfg.require_seed() == 12


def test_invalid_yaml_reports_line(tmp_path):
    path = write_config(tmp_path, "run:\n  seed: 1\n  mode: [deterministic\nraster: {}\n")
    with pytest.raises(ConfigError) as info:
        load_config(path)
    assert info.value.line is not None
    assert str(info.value).startswith(f"{path}:")


def test_bad_values_rejected(tmp_path):
    cases = [
        ("raster:\n  gray_mode: sparkle\n", "raster.gray_mode"),
        ("raster:\n  frame: [1, 0, 0, 1]\n", "raster.frame"),
        ("raster:\n  frame: [0, 0, 1]\n", "raster.frame"),
        ("raster:\n  gamma: 2.0\n", "raster.gamma"),
        ("run:\n  n_points: 50\n  burn_in: 50\n", "run.n_points"),
        ("run:\n  stride: 0\n", "run.stride"),
        ("run:\n  seed: one\n", "run.seed"),
        ("run:\n  mode: sideways\n", "run.mode"),
        ("- 1\n- 2\n", "config root must be a mapping"),
    ]
    for text, needle in cases:
        with pytest.raises(ConfigError, match=needle.replace(".", r"\.")):
            load_config(write_config(tmp_path, text))


def test_library_errors_located_at_node(tmp_path):
    stretch = TWO_IFS.replace("[0.5, 0, 0, 0, 0.5, 0]\n          prob: 0.5", "[1.5, 0, 0, 0, 0.5, 0]\n          prob: 0.5", 1)
    path = write_config(tmp_path, stretch)
    with pytest.raises(ConfigError) as info:
        load_config(path)
    assert info.value.line == 7
    assert "superifs.ifs[0]: " in str(info.value)

    bad_probs = TWO_IFS.replace("probs: [0.5, 0.5]", "probs: [0.5, 0.4]")
    with pytest.raises(ConfigError, match="superifs: "):
        load_config(write_config(tmp_path, bad_probs))

    short = TWO_IFS.replace("coefficients: [0.5, 0, 0, 0, 0.5, 0.5]", "coefficients: [0.5, 0, 0, 0, 0.5]")
    with pytest.raises(ConfigError, match=r"superifs\.ifs\[1\]\.maps\[0\]: .*6 coefficients"):
        load_config(write_config(tmp_path, short))


def test_ifs_index_checked(tmp_path):
    text = TWO_IFS.replace("run:\n  seed: 1\n", "run:\n  seed: 1\n  ifs_index: 3\n")
    with pytest.raises(ConfigError, match="run.ifs_index"):
        load_config(write_config(tmp_path, text))


def test_single_ifs_defaults_probability(tmp_path):
    text = """\
    superifs:
      ifs:
        - maps:
            - {coefficients: [0.5, 0, 0, 0, 0.5, 0], prob: 1.0}
    """
    s = load_config(write_config(tmp_path, text)).require_superifs()
    assert (s.N, s.M, s.V) == (1, 1, 1)
    assert s.probs == [1.0]


def test_preset_superifs(tmp_path):
    text = """\
    superifs:
      V: 4
      preset:
        module: presets.fish
        function: fish_superifs
        kwargs: {V: 2, P: [0.3, 0.7]}
    """
    s = load_config(write_config(tmp_path, text)).require_superifs()
    assert (s.N, s.M, s.V) == (2, 2, 4)
    assert s.probs == pytest.approx([0.3, 0.7])


def test_preset_returning_ifs(tmp_path):
    text = """\
    superifs:
      preset: {module: presets.sierpinski, function: sierpinski_ifs}
    """
    s = load_config(write_config(tmp_path, text)).require_superifs()
    assert (s.N, s.M, s.V) == (1, 3, 1)


def test_bad_preset(tmp_path):
    cases = [
        "superifs:\n  preset: {module: presets.nowhere, function: f}\n",
        "superifs:\n  preset: {module: presets.fish, function: nothing}\n",
        "superifs:\n  preset: {module: presets.fish, function: fish_maps}\n",
        "superifs:\n  preset: {module: presets.fish, function: fish_superifs, kwargs: {colour: red}}\n",
    ]
    for text in cases:
        with pytest.raises(ConfigError) as info:
            load_config(write_config(tmp_path, text))
        assert "superifs.preset" in str(info.value)
        assert info.value.line == 2


def test_json_config(tmp_path):
    text = '{"run": {"seed": 5, "iterations": 4}, "raster": {"width": 16, "height": 8}}'
    cfg = load_config(write_config(tmp_path, text, name="run.json"))
    assert (cfg.run.seed, cfg.run.iterations) == (5, 4)
    assert (cfg.raster.width, cfg.raster.height) == (16, 8)


def test_unreadable_config(tmp_path):
    path = str(tmp_path / "absent.yaml")
    with pytest.raises(ConfigError, match="cannot read config"):
        load_config(path)


def test_apply_overrides(tmp_path):
    cfg = load_config(write_config(tmp_path, TWO_IFS))
    apply_overrides(cfg, seed=9, out="elsewhere", iterations=5, stride=2, mode="measures")
    assert (cfg.run.seed, cfg.output_dir, cfg.run.iterations, cfg.run.stride, cfg.run.mode) == \
        (9, "elsewhere", 5, 2, "measures")
    for kwargs in ({"seed": -1}, {"iterations": -2}, {"stride": 0}):
        with pytest.raises(ConfigError):
            apply_overrides(cfg, **kwargs)


def test_initial_screen(tmp_path):
    cfg = load_config(write_config(tmp_path, TWO_IFS + "raster:\n  width: 32\n  height: 32\n  init: fixed-point\n"))
    screen = initial_screen(cfg, cfg.require_superifs())
    assert isinstance(screen, Raster)
    # the first map fixes the origin, which lands in the bottom-left pixel
    assert screen.count() == 1 and screen.bits[31, 0]

    cfg.raster.init = "center"
    assert initial_screen(cfg, cfg.require_superifs()) == "center"

    cfg.raster.init = "nowhere.pgm"
    with pytest.raises(ConfigError, match="raster.init"):
        initial_screen(cfg, cfg.require_superifs())


def test_initial_screen_from_image(tmp_path):
    bits = np.zeros((16, 16), dtype=bool)
    bits[4:8, 2:10] = True
    write_pgm(raster_to_gray(Raster(bits)), str(tmp_path / "seed.pgm"))
    cfg = load_config(write_config(tmp_path, "raster:\n  width: 32\n  height: 32\n  init: seed.pgm\n"))
    screen = initial_screen(cfg, None)
    assert screen.bits.shape == (32, 32)
    assert np.array_equal(screen.bits, np.kron(bits, np.ones((2, 2), dtype=bool)))


def test_dimension_params(tmp_path):
    cfg = load_config(write_config(tmp_path, TWO_IFS + "dimension:\n  regime: vvariable\n  k: 500\n"))
    p = dimension_params(cfg)
    assert (p.regime, p.V, p.k, p.replicas, p.box_sizes) == ("vvariable", 2, 500, 8, None)
    cfg = load_config(write_config(tmp_path, "dimension:\n  box_sizes: [1, 0]\n"))
    with pytest.raises(ConfigError, match=r"dimension\.box_sizes\[1\]"):
        dimension_params(cfg)
    cfg = load_config(write_config(tmp_path, "dimension:\n  regime: fractional\n"))
    with pytest.raises(ConfigError, match="dimension.regime"):
        dimension_params(cfg)


def test_treestats_params(tmp_path):
    p = treestats_params(load_config(write_config(tmp_path, "treestats:\n  V: [1, 8]\n  P: [0.7, 0.3]\n")))
    assert (p.M, p.N, p.Vs, p.P, p.depth) == (2, 2, [1, 8], [0.7, 0.3], 1)
    assert treestats_params(load_config(write_config(tmp_path, "run: {}\n"))).Vs == [64]
    with pytest.raises(ConfigError, match="treestats.depth"):
        treestats_params(load_config(write_config(tmp_path, "treestats:\n  depth: 4\n")))
    with pytest.raises(ConfigError, match=r"treestats\.V\[1\]"):
        treestats_params(load_config(write_config(tmp_path, "treestats:\n  V: [2, 0]\n")))
    with pytest.raises(ConfigError, match="treestats.P"):
        treestats_params(load_config(write_config(tmp_path, "treestats:\n  P: [1.0]\n")))


def test_interp_params(tmp_path):
    text = """\
    interp:
      points: [[0, 0], [0.5, 1], [1, 0]]
      d: [[0.3, 0.3], [-0.3, 0.5]]
      V: 3
    """
    p = interp_params(load_config(write_config(tmp_path, text)))
    assert p.points == [(0.0, 0.0), (0.5, 1.0), (1.0, 0.0)]
    assert p.d_options == [[0.3, 0.3], [-0.3, 0.5]]
    assert (p.P, p.V, p.depth, p.samples) == ([0.5, 0.5], 3, 16, 1025)

    single = interp_params(load_config(write_config(tmp_path, text.replace("[[0.3, 0.3], [-0.3, 0.5]]", "[0.3, 0.3]"))))
    assert single.d_options == [[0.3, 0.3]] and single.P == [1.0]

    with pytest.raises(ConfigError, match=r"interp\.points\[1\]"):
        interp_params(load_config(write_config(tmp_path, text.replace("[0.5, 1]", "[0.5]"))))


def test_spacefill_params(tmp_path):
    p = spacefill_params(load_config(write_config(tmp_path, "spacefill:\n  depth: 3\n")))
    assert (p.depth, p.constant_tree, p.component, p.V) == (3, False, 1, 2)
    with pytest.raises(ConfigError, match="spacefill.component"):
        spacefill_params(load_config(write_config(tmp_path, "spacefill:\n  V: 2\n  component: 3\n")))


def test_config_relative_image_uses_config_directory(tmp_path):
    sub = tmp_path / "nested"
    os.makedirs(sub)
    write_pgm(raster_to_gray(Raster.full(4, 4)), str(sub / "dot.pgm"))
    cfg = load_config(write_config(sub, "raster:\n  width: 4\n  height: 4\n  init: dot.pgm\n"))
    assert initial_screen(cfg, None).count() == 16
