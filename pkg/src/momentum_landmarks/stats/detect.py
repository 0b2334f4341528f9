"""Two-group landmark detection on residual momenta.

The control group is averaged, every case is matched from the control
average, and each landmark is then examined twice: by the norm of the mean
momentum (method 1) and by the overlap of posterior-predictive interval boxes
under the hierarchical model (method 2).
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..averaging import WeightScheme, _match_all, group_average
from ..errors import FitError
from ..io import format_float
from ..kernel import CONIC, KernelSpec
from ..shooting import ShootingOptions
from .posterior import HyperConfig, MCMCOptions, chain_generator, fit_cells
from .predictive import GridOptions, interval_box, overlap_ratio_boxes, hpd_contour, predictive_draws
from .samples import build_sample_matrices, flag_large_norms, mean_momentum_norm

__all__ = ["StatOptions", "DetectionReport", "select_predictor", "detect", "cell_index"]

SOURCES = ("momentum", "position")
# stream id reserved for predictive sampling; chain streams use 0..chains-1
_PREDICTIVE_STREAM = 2**16


def select_predictor(ratios, threshold: float = 0.5) -> list:
    """1-based indices of ratios strictly below ``threshold``, ascending."""
    ratios = np.asarray(ratios, dtype=float)
    return [int(i) + 1 for i in np.flatnonzero(ratios < threshold)]


def cell_index(landmark: int, group: str) -> int:
    """Deterministic cell number for a 1-based landmark and a group tag."""
    return 2 * (landmark - 1) + (0 if group == "control" else 1)


@dataclass(frozen=True)
class StatOptions:
    hyper: HyperConfig = field(default_factory=HyperConfig)
    mcmc: MCMCOptions = field(default_factory=MCMCOptions)
    threshold: float = 0.5
    level: float = 0.95
    norm_ratio: float = 1.5
    norm_z: float = 2.0
    source: str = "momentum"
    predictive_count: int | None = None
    grid: GridOptions = field(default_factory=GridOptions)
    contours: bool = True

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"source must be one of {SOURCES}")
        if not 0 < self.level < 1:
            raise ValueError("level must lie in (0, 1)")

    def to_dict(self) -> dict:
        return {
            "hyper": self.hyper.to_dict(),
            "mcmc": self.mcmc.to_dict(),
            "threshold": self.threshold,
            "level": self.level,
            "norm_ratio": self.norm_ratio,
            "norm_z": self.norm_z,
            "source": self.source,
            "predictive_count": self.predictive_count,
            "grid": self.grid.to_dict(),
            "contours": self.contours,
        }


@dataclass
class DetectionReport:
    settings: dict
    average: np.ndarray
    control_momenta: np.ndarray
    case_momenta: np.ndarray
    control_norms: np.ndarray
    case_norms: np.ndarray
    method1: list
    boxes: dict
    ratios: np.ndarray
    method2: list
    mcmc: list
    predictive: dict = field(default_factory=dict)
    contours: dict = field(default_factory=dict)
    averaging: dict = field(default_factory=dict)

    @property
    def union(self) -> list:
        return sorted(set(self.method1) | set(self.method2))

    @property
    def n_landmarks(self) -> int:
        return self.average.shape[0]

    def to_dict(self) -> dict:
        boxes = {
            group: [[list(map(float, bx)), list(map(float, by))] for bx, by in self.boxes[group]]
            for group in sorted(self.boxes)
        }
        return {
            "settings": self.settings,
            "average": self.average.tolist(),
            "averaging": self.averaging,
            "method1": {
                "control_norms": self.control_norms.tolist(),
                "case_norms": self.case_norms.tolist(),
                "flagged": list(self.method1),
            },
            "method2": {
                "boxes": boxes,
                "ratios": self.ratios.tolist(),
                "flagged": list(self.method2),
            },
            "predictor": self.union,
            "mcmc": self.mcmc,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def table(self) -> str:
        """Per-landmark summary rendered from :meth:`to_dict`."""
        d = self.to_dict()
        m1, m2 = d["method1"], d["method2"]
        lines = [f"{'landmark':>8} {'control |mean|':>15} {'case |mean|':>12} {'ratio':>7}  flags"]
        for j in range(len(m2["ratios"])):
            flags = ("M1 " if j + 1 in m1["flagged"] else "") + ("M2" if j + 1 in m2["flagged"] else "")
            lines.append(
                f"{j + 1:>8} {m1['control_norms'][j]:>15.4f} {m1['case_norms'][j]:>12.4f} "
                f"{m2['ratios'][j]:>7.4f}  {flags.strip()}"
            )
        lines.append(f"predictor: {d['predictor']}")
        return "\n".join(lines)

    def write(self, out_dir) -> dict:
        """Write ``report.json``, ``contours.csv`` and ``predictive.csv``."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = {"report": out_dir / "report.json"}
        paths["report"].write_text(self.to_json(), encoding="utf-8")
        for name, data in (("contours", self.contours), ("predictive", self.predictive)):
            if not data:
                continue
            path = out_dir / f"{name}.csv"
            with path.open("w", encoding="utf-8", newline="") as fh:
                fh.write("landmark,group,x,y\n")
                for (landmark, group) in sorted(data):
                    for x, y in data[(landmark, group)]:
                        fh.write(f"{landmark},{group},{format_float(x)},{format_float(y)}\n")
            paths[name] = path
        return paths


def _fit_in_chunks(samples, indices, stat_opts, seed, threads):
    if not threads or threads < 2 or len(samples) < 2:
        return fit_cells(samples, stat_opts.hyper, stat_opts.mcmc, seed, indices)
    # every chain owns its own stream, so splitting the batch leaves draws unchanged
    chunks = np.array_split(np.arange(len(samples)), min(threads, len(samples)))
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        parts = pool.map(
            lambda c: fit_cells([samples[i] for i in c], stat_opts.hyper, stat_opts.mcmc, seed,
                                [indices[i] for i in c]),
            chunks,
        )
        return [draws for part in parts for draws in part]


def detect(
    controls,
    cases,
    spec: KernelSpec = CONIC,
    scheme: WeightScheme = WeightScheme(),
    stat_opts: StatOptions | None = None,
    seed: int = 0,
    *,
    shooting: ShootingOptions | None = None,
    max_iter: int = 100,
    threads: int | None = None,
) -> DetectionReport:
    """Compare a case group with a control group landmark by landmark.

    Raises
    ------
    AveragingError
        If the control average fails or a case cannot be matched; the
        offending member index is attached.
    FitError
        If a landmark cell cannot be fitted; the landmark and group are named.
    """
    stat_opts = stat_opts or StatOptions()
    shooting = shooting or ShootingOptions()
    if controls[0].points.shape != cases[0].points.shape:
        raise ValueError("control and case templates must share the landmark count")

    avg_res = group_average(controls, scheme, spec, shooting, max_iter=max_iter, threads=threads)
    avg = avg_res.average
    control_p = avg_res.residual_array
    inner = shooting if shooting.tol is not None else ShootingOptions(
        **{**shooting.to_dict(), "tol": 1e-12 * max(t.diameter() for t in list(controls) + list(cases))}
    )
    case_logs, _ = _match_all(avg, list(cases), spec, inner, [None] * len(cases), threads)
    case_p = np.stack([r.momentum.momenta for r in case_logs])

    if stat_opts.source == "momentum":
        control_data, case_data = control_p, case_p
    else:
        control_data = np.stack([t.points for t in controls])
        case_data = np.stack([t.points for t in cases])
    ctrl_cells = build_sample_matrices(control_data, "control", stat_opts.source)
    case_cells = build_sample_matrices(case_data, "case", stat_opts.source)
    n_landmarks = len(ctrl_cells)

    control_norms = np.array([mean_momentum_norm(s) for s in ctrl_cells])
    case_norms = np.array([mean_momentum_norm(s) for s in case_cells])
    method1 = flag_large_norms(case_cells, stat_opts.norm_ratio, stat_opts.norm_z)

    samples, indices, tags = [], [], []
    for j in range(n_landmarks):
        for cell in (ctrl_cells[j], case_cells[j]):
            samples.append(cell)
            indices.append(cell_index(cell.landmark_index, cell.group))
            tags.append((cell.landmark_index, cell.group))
    try:
        posts = _fit_in_chunks(samples, indices, stat_opts, seed, threads)
    except FitError as exc:
        raise FitError(f"{exc} (cell index = 2*(landmark-1) + group)") from None

    boxes = {"control": [], "case": []}
    predictive, contours, mcmc_meta = {}, {}, []
    for (landmark, group), post in zip(tags, posts):
        rng = chain_generator(seed, cell_index(landmark, group), _PREDICTIVE_STREAM)
        draws = predictive_draws(post, stat_opts.predictive_count, rng)
        boxes[group].append(interval_box(draws, stat_opts.level))
        predictive[(landmark, group)] = draws
        if stat_opts.contours:
            contours[(landmark, group)] = hpd_contour(draws, stat_opts.level, stat_opts.grid)
        meta = post.metadata()
        meta.update(landmark=landmark, group=group)
        mcmc_meta.append(meta)

    ratios = np.array([overlap_ratio_boxes(boxes["control"][j], boxes["case"][j])
                       for j in range(n_landmarks)])
    method2 = select_predictor(ratios, stat_opts.threshold)

    settings = {
        "seed": seed,
        "kernel": spec.to_dict(),
        "weights": scheme.kind,
        "epsilon_d": scheme.epsilon_d,
        "shooting": shooting.to_dict(),
        "max_iter": max_iter,
        "stats": stat_opts.to_dict(),
        "n_controls": len(controls),
        "n_cases": len(cases),
        "landmarks": n_landmarks,
    }
    averaging = {
        "converged": bool(avg_res.converged),
        "iterations": int(avg_res.iterations),
        "objective_history": [float(v) for v in avg_res.objective_history],
        "final_mean_momentum_norm": float(avg_res.mean_momentum_norms[-1])
        if avg_res.mean_momentum_norms.size else math.nan,
    }
    return DetectionReport(
        settings=settings,
        average=avg.points.copy(),
        control_momenta=control_p,
        case_momenta=case_p,
        control_norms=control_norms,
        case_norms=case_norms,
        method1=method1,
        boxes=boxes,
        ratios=ratios,
        method2=method2,
        mcmc=mcmc_meta,
        predictive=predictive,
        contours=contours,
        averaging=averaging,
    )
