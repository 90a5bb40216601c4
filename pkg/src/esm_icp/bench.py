"""Regression harness: synthesize -> register -> score, repeated over seeded trials."""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any

import numpy as np
from numpy.typing import ArrayLike

from . import __version__
from .geometry import RigidTransform, apply_transform, as_cloud, invert
from .linalg3 import DegenerateCovarianceError
from .metrics import FIELDS, ErrorReport, error_report
from .similarity import SimilarityCollapseError
from .solver import SolverConfig, register
from .synth import NoiseSpec, TransformSampler, corrupt

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def trial_seed(master: int, trial: int) -> int:
    """Seed of trial ``trial``; independent of execution order and worker count."""
    return splitmix64((master & _MASK64) ^ splitmix64(trial))


@dataclass(frozen=True)
class Scenario:
    """Everything a trial needs besides the target cloud."""

    rotation_range: tuple[float, float] = (-math.pi, math.pi)
    translation_range: tuple[float, float] = (-1.0, 1.0)
    fraction: float = 0.0
    noise: tuple[tuple[float, float, float], ...] | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)

    def noise_spec(self, seed: int) -> NoiseSpec:
        if self.noise is None:
            return NoiseSpec(self.fraction, seed=seed)
        return NoiseSpec(self.fraction, components=self.noise, seed=seed)


@dataclass(frozen=True)
class SyntheticPair:
    source: np.ndarray
    applied: RigidTransform  # maps target coordinates to source coordinates
    corrupted: np.ndarray

    @property
    def ground_truth(self) -> RigidTransform:
        """The transform registration should recover (source -> target)."""
        return invert(self.applied)


def synthesize(target: ArrayLike, rotation_range: tuple[float, float],
               translation_range: tuple[float, float], seed: int,
               noise: NoiseSpec | None = None) -> SyntheticPair:
    """Move ``target`` by a random transform and optionally corrupt the result."""
    tgt = as_cloud(target)
    applied = TransformSampler(rotation_range, translation_range, seed).sample()
    source = apply_transform(tgt, applied)
    corrupted = np.empty(0, dtype=np.int64)
    if noise is not None and noise.fraction > 0:
        source, corrupted = corrupt(source, noise)
    return SyntheticPair(source, applied, corrupted)


@dataclass(frozen=True)
class TrialResult:
    trial: int
    seed: int
    status: str  # "ok" or "failed"
    termination: str
    iterations: int
    errors: ErrorReport | None
    message: str = ""

    @property
    def success(self) -> bool:
        return self.status == "ok" and self.termination != "max_iterations"


def run_trial(target: ArrayLike, scenario: Scenario, master_seed: int, trial: int) -> TrialResult:
    seed = trial_seed(master_seed, trial)
    pair = synthesize(target, scenario.rotation_range, scenario.translation_range, seed,
                      scenario.noise_spec(splitmix64(seed)))
    try:
        result = register(pair.source, target, scenario.solver)
    except (DegenerateCovarianceError, SimilarityCollapseError) as exc:
        return TrialResult(trial, seed, "failed", "error", 0, None, str(exc))
    report = error_report(result.final_transform, pair.ground_truth)
    return TrialResult(trial, seed, "ok", result.termination.value, result.iterations, report)


_worker_target: np.ndarray | None = None


def _init_worker(target: np.ndarray) -> None:
    global _worker_target
    _worker_target = target


def _worker_trial(args: tuple[Scenario, int, int]) -> TrialResult:
    scenario, master, trial = args
    return run_trial(_worker_target, scenario, master, trial)


@dataclass
class BenchReport:
    trials: list[TrialResult]
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def count(self) -> int:
        return len(self.trials)

    @property
    def success_rate(self) -> float | None:
        if not self.trials:
            return None
        return sum(t.success for t in self.trials) / len(self.trials)

    def means(self) -> dict[str, float]:
        """Arithmetic means over the trials that produced an estimate."""
        scored = [t for t in self.trials if t.errors is not None]
        if not scored:
            return {}
        out = {f: float(np.mean([getattr(t.errors, f) for t in scored])) for f in FIELDS}
        out["iterations"] = float(np.mean([t.iterations for t in scored]))
        return out

    def summary(self) -> dict[str, Any]:
        rate = self.success_rate
        return {
            "trials": self.count,
            "failed": sum(t.status == "failed" for t in self.trials),
            "success_rate": "n/a" if rate is None else rate,
            "means": self.means(),
        }

    def to_json(self, with_timestamps: bool = True) -> dict[str, Any]:
        meta = dict(self.metadata)
        if not with_timestamps:
            meta.pop("timestamps", None)
        return {
            "metadata": meta,
            "summary": self.summary(),
            "trials": [
                {"trial": t.trial, "seed": t.seed, "status": t.status,
                 "termination": t.termination, "iterations": t.iterations,
                 "errors": None if t.errors is None else t.errors.as_dict(),
                 "message": t.message}
                for t in self.trials
            ],
        }

    def write(self, directory: str | os.PathLike) -> tuple[str, str]:
        os.makedirs(directory, exist_ok=True)
        csv_path = os.path.join(directory, "bench_trials.csv")
        json_path = os.path.join(directory, "bench_report.json")
        with open(csv_path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["trial", "seed", "status", "termination", "iterations", *FIELDS, "message"])
            for t in self.trials:
                vals = [repr(getattr(t.errors, k)) for k in FIELDS] if t.errors else [""] * len(FIELDS)
                w.writerow([t.trial, t.seed, t.status, t.termination, t.iterations, *vals, t.message])
        with open(json_path, "w") as f:
            json.dump(self.to_json(), f, indent=2)
            f.write("\n")
        return csv_path, json_path


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def scenario_metadata(scenario: Scenario, master_seed: int, trials: int, **extra: Any) -> dict[str, Any]:
    meta = {
        "tool": "esm_icp",
        "version": __version__,
        "master_seed": master_seed,
        "trials": trials,
        "rotation_range": list(scenario.rotation_range),
        "translation_range": list(scenario.translation_range),
        "fraction": scenario.fraction,
        "noise": None if scenario.noise is None else [list(c) for c in scenario.noise],
        "solver": dataclasses.asdict(scenario.solver),
    }
    meta.update(extra)
    return meta


def run_bench(target: ArrayLike, trials: int, scenario: Scenario | None = None,
              master_seed: int = 0, jobs: int = 1, **extra_meta: Any) -> BenchReport:
    """Run ``trials`` independent trials; results come back ordered by trial index."""
    if trials < 0:
        raise ValueError("trial count must be >= 0")
    scenario = scenario or Scenario()
    tgt = as_cloud(target)
    started = _now()
    if jobs > 1 and trials > 1:
        with ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(tgt,)) as pool:
            results = list(pool.map(_worker_trial, [(scenario, master_seed, i) for i in range(trials)]))
    else:
        results = [run_trial(tgt, scenario, master_seed, i) for i in range(trials)]
    meta = scenario_metadata(scenario, master_seed, trials, **extra_meta)
    meta["timestamps"] = {"started": started, "finished": _now()}
    return BenchReport(results, meta)


def scenario_from_metadata(meta: dict[str, Any]) -> Scenario:
    noise = meta.get("noise")
    return Scenario(
        rotation_range=tuple(meta["rotation_range"]),
        translation_range=tuple(meta["translation_range"]),
        fraction=meta["fraction"],
        noise=None if noise is None else tuple(tuple(c) for c in noise),
        solver=SolverConfig(**meta["solver"]),
    )


def rerun(meta: dict[str, Any], target: ArrayLike | None = None, jobs: int = 1) -> BenchReport:
    """Regenerate a report from its embedded metadata (reads ``target_path`` if no cloud given)."""
    if target is None:
        from .pcio import read_cloud
        target = read_cloud(meta["target_path"])
    extra = {k: v for k, v in meta.items()
             if k not in {"tool", "version", "master_seed", "trials", "rotation_range",
                          "translation_range", "fraction", "noise", "solver", "timestamps"}}
    return run_bench(target, meta["trials"], scenario_from_metadata(meta), meta["master_seed"], jobs, **extra)
