import numpy as np
import pytest

from presets.colour_demo import colour_superifs, corner_palette
from presets.fish import fish_superifs
from presets.sierpinski import sierpinski_superifs
from superfractal.apps import colour_steal_render
from superfractal.dimension import lyapunov, scale_table
from superfractal.superifs import initial_bank, super_step_measures, super_step_sets
from superfractal.trees import sample_index
from superfractal.utils import THREADS_ENV, parallel_map, worker_count


def test_worker_count_reads_environment(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "3")
    assert worker_count() == 3
    monkeypatch.setenv(THREADS_ENV, "0")
    assert worker_count() == 1
    monkeypatch.setenv(THREADS_ENV, "many")
    assert worker_count() >= 1


def test_parallel_map_keeps_input_order(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "8")

    def square(x):
        return x * x

    assert parallel_map(square, list(range(50))) == [x * x for x in range(50)]
    monkeypatch.setenv(THREADS_ENV, "1")
    assert parallel_map(square, list(range(50))) == [x * x for x in range(50)]


def _run_all(monkeypatch, threads):
    monkeypatch.setenv(THREADS_ENV, str(threads))
    s = fish_superifs(V=4)
    rng = np.random.default_rng(11)
    sets = initial_bank(s, "sets", 48, 48)
    measures = initial_bank(s, "measures", 48, 48)
    for _ in range(4):
        a = sample_index(s.N, s.V, s.M, s.probs, rng)
        sets = super_step_sets(s, a, sets)
        measures = super_step_measures(s, a, measures)
    gamma = lyapunov(scale_table(sierpinski_superifs()), [0.5, 0.5], 4, 1.2, 2_000, seed=5, replicas=6).gamma
    image = colour_steal_render(colour_superifs(), corner_palette(), seed=3, n_points=5_000, width=24, height=24)
    return sets, measures, gamma, image


@pytest.mark.parametrize("threads", [2, 8])
def test_results_do_not_depend_on_thread_count(monkeypatch, threads):
    sets_1, measures_1, gamma_1, image_1 = _run_all(monkeypatch, 1)
    sets_n, measures_n, gamma_n, image_n = _run_all(monkeypatch, threads)
    assert all(a == b for a, b in zip(sets_1.screens, sets_n.screens))
    assert all(np.array_equal(a.mass, b.mass) for a, b in zip(measures_1.screens, measures_n.screens))
    assert gamma_1 == gamma_n
    assert np.array_equal(image_1, image_n)
