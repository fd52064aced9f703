"""Tester constants and their versioned default values.

The sample-size formulas carry three multiplicative constants:

* ``c_m``   -- scales the mixing-driven trajectory length,
* ``c_iid`` -- scales the worst-case per-state iid sample size,
* ``c_io``  -- scales the instance-specific per-state iid sample size.

Theory fixes only the shape of the formulas, not usable constant values, so
the shipped defaults are produced by a Monte-Carlo calibration run over the
adversarial benchmark families (see ``experiments.calibrate_constants``) and
recorded, with the run's metadata, in ``data/default_constants.json``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path


@dataclass(frozen=True)
class TestingConstants:
    c_m: float = 1.0
    c_iid: float = 1.0
    c_io: float = 1.0
    version: str = "unversioned"

    def scaled(self, multiplier: float) -> "TestingConstants":
        return TestingConstants(
            c_m=self.c_m * multiplier,
            c_iid=self.c_iid * multiplier,
            c_io=self.c_io * multiplier,
            version=self.version,
        )


def save_constants(path: str | Path, constants: TestingConstants, meta: dict | None = None) -> None:
    doc = asdict(constants)
    if meta:
        doc["meta"] = meta
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_constants(path: str | Path) -> tuple[TestingConstants, dict]:
    doc = json.loads(Path(path).read_text())
    meta = doc.pop("meta", {})
    return TestingConstants(**doc), meta


def _load_default() -> tuple[TestingConstants, dict]:
    ref = resources.files("mcident").joinpath("data/default_constants.json")
    doc = json.loads(ref.read_text())
    meta = doc.pop("meta", {})
    return TestingConstants(**doc), meta


DEFAULT_CONSTANTS, DEFAULT_CONSTANTS_META = _load_default()
