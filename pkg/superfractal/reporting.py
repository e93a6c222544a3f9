import json
import os
from importlib.metadata import PackageNotFoundError, version
from typing import Any, Dict, List, Optional

import pandas as pd
from loguru import logger

from superfractal import __version__
from superfractal.config import Config
from superfractal.utils import ArtifactFlags, ensure_dir, get_artifact_flags, write_csv

TRACKED_PACKAGES = ("numpy", "pandas", "scipy", "numba", "pillow", "PyYAML", "loguru")


def _package_versions() -> Dict[str, str]:
    out = {"superfractal": __version__}
    for name in TRACKED_PACKAGES:
        try:
            out[name] = version(name)
        except PackageNotFoundError:
            out[name] = "unknown"
    return out


class _RunRecorder:
    """Collects the files and tables of one command and writes them with a manifest."""

    def __init__(self, cfg: Config, command: str, log_level: str = "INFO"):
        self.cfg = cfg
        self.command = command
        self.log_level = log_level
        self.outputs: List[str] = []
        self.tables: Dict[str, pd.DataFrame] = {}
        self.index_rows: List[Dict[str, Any]] = []
        self.lyapunov_rows: List[Dict[str, Any]] = []
        self.results: Dict[str, Any] = {}

    def artifact_flags(self) -> ArtifactFlags:
        return get_artifact_flags(self.cfg.raw)

    def output_path(self, name: str) -> str:
        return os.path.join(self._output_dir(), name)

    def add_output(self, path: str) -> None:
        self.outputs.append(path)

    def add_table(self, name: str, df: pd.DataFrame) -> None:
        self.tables[name] = df

    def add_index_log(self, df: pd.DataFrame) -> None:
        self.index_rows.extend(df.to_dict("records"))

    def add_lyapunov(self, rows: List[Dict[str, Any]]) -> None:
        self.lyapunov_rows.extend(rows)

    def add_result(self, key: str, value: Any) -> None:
        self.results[key] = value

    def finalize(self) -> Optional[str]:
        outdir = self._output_dir()
        ensure_dir(outdir)
        self._write_tables(outdir)
        if not self.artifact_flags().write_manifest:
            return None
        manifest_path = os.path.join(outdir, "manifest.json")
        with open(manifest_path, "w", encoding="utf-8") as f:
            json.dump(self._manifest(), f, indent=2, sort_keys=True)
            f.write("\n")
        logger.info(f"Wrote {manifest_path} ({len(self.outputs)} outputs)")
        return manifest_path

    def _output_dir(self) -> str:
        return self.cfg.output_dir

    def _write_tables(self, outdir: str) -> None:
        flags = self.artifact_flags()
        if flags.write_index_log and self.index_rows:
            self.outputs.append(write_csv(pd.DataFrame(self.index_rows), f"{outdir}/index_log.csv"))
        if self.lyapunov_rows:
            self.outputs.append(write_csv(pd.DataFrame(self.lyapunov_rows), f"{outdir}/lyapunov.csv"))
        for name, df in self.tables.items():
            self.outputs.append(write_csv(df, f"{outdir}/{name}.csv"))

    def _manifest(self) -> Dict[str, Any]:
        outdir = self._output_dir()
        return {
            "command": self.command,
            "seed": self.cfg.run.seed,
            "config": self.cfg.path,
            "config_sha256": self.cfg.digest,
            "log_level": self.log_level,
            "versions": _package_versions(),
            "outputs": [os.path.relpath(p, outdir) for p in self.outputs],
            "results": self.results,
        }


REPORTER: Optional[_RunRecorder] = None


def init_reporting(cfg: Config, command: str, log_level: str = "INFO") -> _RunRecorder:
    global REPORTER
    REPORTER = _RunRecorder(cfg, command, log_level)
    return REPORTER
