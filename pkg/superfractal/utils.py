import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Mapping, Sequence, TypeVar

import numpy as np
import pandas as pd
from loguru import logger

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "SUPERFRACTAL_THREADS"


def ensure_dir(path: str) -> None:
    if os.path.exists(path):
        logger.debug(f"Directory {path} already exists")
        return
    logger.info(f"Creating directory {path}")
    os.makedirs(path, exist_ok=True)


def write_csv(df: pd.DataFrame, path: str) -> str:
    """Write DataFrame to CSV at the given path and return the path written."""
    base, ext = os.path.splitext(path)
    csv_path = path if ext.lower() == ".csv" else f"{base}.csv"
    df.to_csv(csv_path, index=False)
    return csv_path


def file_digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def spawn_rngs(seed: int, n: int) -> List[np.random.Generator]:
    """Independent PCG64 substreams derived from one seed."""
    children = np.random.SeedSequence(int(seed)).spawn(int(n))
    return [np.random.Generator(np.random.PCG64(c)) for c in children]


def draw_digits(rng: np.random.Generator, cdf: np.ndarray, size: int) -> np.ndarray:
    """0-based categorical draws by inverse CDF; chunking does not change the stream."""
    u = rng.random(size)
    idx = np.searchsorted(cdf, u, side="right")
    return np.minimum(idx, len(cdf) - 1).astype(np.int64)


def probability_cdf(probs: Sequence[float]) -> np.ndarray:
    cdf = np.cumsum(np.asarray(probs, dtype=np.float64))
    cdf /= cdf[-1]
    return cdf


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "")
    if not raw:
        return os.cpu_count() or 1
    try:
        return max(1, int(raw))
    except ValueError:
        logger.warning(f"Ignoring {THREADS_ENV}={raw!r}; expected a positive integer")
        return os.cpu_count() or 1


def parallel_map(fn: Callable[[T], R], items: Sequence[T]) -> List[R]:
    """Map in a thread pool, results returned in input order."""
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass
class ArtifactFlags:
    write_frames: bool
    write_index_log: bool
    write_manifest: bool


def get_artifact_flags(cfg: Mapping[str, Any]) -> ArtifactFlags:
    io_cfg = cfg.get("io", {}) if isinstance(cfg, Mapping) else {}
    artifacts = io_cfg.get("artifacts", {}) if isinstance(io_cfg, Mapping) else {}
    return ArtifactFlags(
        write_frames=bool(artifacts.get("write_frames", True)),
        write_index_log=bool(artifacts.get("write_index_log", True)),
        write_manifest=bool(artifacts.get("write_manifest", True)),
    )
