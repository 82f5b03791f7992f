"""Shared fixtures for expensive end-to-end runs reused across test modules."""

import time
from dataclasses import replace
from pathlib import Path

import pytest

from aggdiff import cli

PRESET_DIR = Path(__file__).resolve().parent.parent / "presets"


@pytest.fixture(scope="session")
def preset_run(tmp_path_factory):
    """Run a bundled preset once per session and cache its artifacts.

    Returns a callable mapping the preset name to a tuple
    ``(config, output_dir, elapsed_seconds)``.  The run is executed through
    the same entry point the CLI uses, so the cached output directory holds
    the full artifact set (diagnostics, snapshots, summary).
    """
    cache = {}

    def _run(name: str):
        if name not in cache:
            config = cli.load_config(PRESET_DIR / (name + ".toml"))
            assert cli.validate_config(config) == []
            outdir = tmp_path_factory.mktemp(
                "preset_" + name.replace(".", "_")
            )
            config = replace(config, output_dir=str(outdir))
            started = time.perf_counter()
            status, summary = cli.run_experiment(config)
            elapsed = time.perf_counter() - started
            assert status == 0
            cache[name] = (config, summary, Path(outdir), elapsed)
        return cache[name]

    return _run
