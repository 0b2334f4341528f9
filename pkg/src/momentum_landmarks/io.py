"""Template files, group manifests and synthetic shape groups.

Template CSV files have the header ``template_id,landmark_id,x,y`` with one
row per landmark (``landmark_id`` is 1-based); a file may hold several
templates.  A manifest is a JSON object::

    {"name": ..., "role": "control" | "case" | "unlabeled",
     "landmarks": <count>, "templates": [<relative csv paths>],
     "landmark_names": [...]}            # optional
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import IngestionError
from .geodesic import LandmarkTemplate

__all__ = [
    "GroupManifest",
    "read_manifest",
    "read_group",
    "read_templates",
    "write_group",
    "write_templates",
    "synth_ellipse",
    "synth_heart",
    "synth_group",
    "synth_planted_shift",
    "format_float",
]

HEADER = ["template_id", "landmark_id", "x", "y"]
ROLES = ("control", "case", "unlabeled")


def format_float(value: float) -> str:
    """17 significant digits: lossless for IEEE doubles."""
    return format(float(value), ".17g")


@dataclass
class GroupManifest:
    name: str
    role: str
    landmarks: int
    templates: list
    landmark_names: list | None = None
    path: Path | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "role": self.role,
            "landmarks": self.landmarks,
            "templates": list(self.templates),
        }
        if self.landmark_names is not None:
            out["landmark_names"] = list(self.landmark_names)
        return out


def read_manifest(path) -> GroupManifest:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise IngestionError("manifest not found", path=path) from None
    except json.JSONDecodeError as exc:
        raise IngestionError(f"invalid JSON ({exc.msg})", path=path, line=exc.lineno) from None
    if not isinstance(raw, dict):
        raise IngestionError("manifest must be a JSON object", path=path)
    for key in ("name", "role", "landmarks", "templates"):
        if key not in raw:
            raise IngestionError(f"manifest is missing field {key!r}", path=path)
    if raw["role"] not in ROLES:
        raise IngestionError(f"role must be one of {ROLES}, got {raw['role']!r}", path=path)
    count = raw["landmarks"]
    if not isinstance(count, int) or isinstance(count, bool) or count < 1:
        raise IngestionError("'landmarks' must be a positive integer", path=path)
    files = raw["templates"]
    if not isinstance(files, list) or not all(isinstance(f, str) for f in files):
        raise IngestionError("'templates' must be an array of paths", path=path)
    names = raw.get("landmark_names")
    if names is not None and (not isinstance(names, list) or len(names) != count):
        raise IngestionError("'landmark_names' must list one name per landmark", path=path)
    return GroupManifest(
        name=str(raw["name"]),
        role=raw["role"],
        landmarks=count,
        templates=files,
        landmark_names=names,
        path=path,
    )


def read_templates(path, landmarks: int | None = None) -> list:
    """Read every template in one CSV file, in order of first appearance."""
    path = Path(path)
    try:
        handle = path.open(newline="", encoding="utf-8")
    except FileNotFoundError:
        raise IngestionError("template file not found", path=path) from None
    rows: dict[str, dict[int, tuple[float, float]]] = {}
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != HEADER:
            raise IngestionError(f"expected header {','.join(HEADER)}", path=path, line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise IngestionError(f"expected 4 fields, got {len(row)}", path=path, line=lineno)
            tid, lid, xs, ys = row
            try:
                lid = int(lid)
                x, y = float(xs), float(ys)
            except ValueError:
                raise IngestionError("malformed number", path=path, line=lineno) from None
            if lid < 1:
                raise IngestionError("landmark_id must be >= 1", path=path, line=lineno)
            if not (math.isfinite(x) and math.isfinite(y)):
                raise IngestionError("non-finite coordinate", path=path, line=lineno)
            cells = rows.setdefault(tid, {})
            if lid in cells:
                raise IngestionError(
                    f"duplicate landmark {lid} for template {tid!r}", path=path, line=lineno
                )
            cells[lid] = (x, y)

    templates = []
    for tid, cells in rows.items():
        ids = sorted(cells)
        if ids != list(range(1, len(ids) + 1)):
            raise IngestionError(f"template {tid!r} has non-contiguous landmark ids", path=path)
        if landmarks is not None and len(ids) != landmarks:
            raise IngestionError(
                f"template {tid!r} has {len(ids)} landmarks, manifest declares {landmarks}",
                path=path,
            )
        templates.append(LandmarkTemplate(np.array([cells[i] for i in ids]), label=tid))
    if not templates:
        raise IngestionError("no templates found", path=path)
    return templates


def read_group(manifest_path) -> list:
    """Templates listed by a manifest, in manifest order."""
    manifest = read_manifest(manifest_path)
    base = manifest.path.parent
    group = []
    for rel in manifest.templates:
        group.extend(read_templates(base / rel, manifest.landmarks))
    return group


def write_templates(templates, path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(HEADER)
        for i, tpl in enumerate(templates):
            tid = tpl.label if tpl.label is not None else f"T{i + 1:03d}"
            for j, (x, y) in enumerate(tpl.points, start=1):
                writer.writerow([tid, j, format_float(x), format_float(y)])


def write_group(templates, path, *, name: str | None = None, role: str = "unlabeled",
                landmark_names=None) -> GroupManifest:
    """Write one CSV per template next to a manifest at ``path``."""
    path = Path(path)
    templates = list(templates)
    if not templates:
        raise ValueError("cannot write an empty group")
    count = templates[0].n_landmarks
    if any(t.n_landmarks != count for t in templates):
        raise ValueError("all templates must share the landmark count")
    path.parent.mkdir(parents=True, exist_ok=True)
    stem = path.stem
    files = []
    for i, tpl in enumerate(templates):
        if tpl.label is None:
            tpl = LandmarkTemplate(tpl.points, label=f"{stem}-{i + 1:03d}")
        rel = f"{stem}_{i + 1:03d}.csv"
        write_templates([tpl], path.parent / rel)
        files.append(rel)
    manifest = GroupManifest(
        name=name or stem,
        role=role,
        landmarks=count,
        templates=files,
        landmark_names=landmark_names,
        path=path,
    )
    path.write_text(json.dumps(manifest.to_dict(), indent=2) + "\n", encoding="utf-8")
    return manifest


def _angles(n_landmarks):
    return 2 * np.pi * np.arange(n_landmarks) / n_landmarks


def synth_ellipse(a_axis: float, b_axis: float, n_landmarks: int = 20,
                  label: str | None = None) -> LandmarkTemplate:
    """Points ``(a cos t, b sin t)`` at equally spaced parameter angles."""
    t = _angles(n_landmarks)
    return LandmarkTemplate(np.column_stack([a_axis * np.cos(t), b_axis * np.sin(t)]),
                            label=label)


def synth_heart(n_landmarks: int = 20, label: str | None = None) -> LandmarkTemplate:
    t = _angles(n_landmarks)
    x = (13 * np.cos(t) - 5 * np.cos(2 * t) - 2 * np.cos(3 * t) - np.cos(4 * t)) / 5
    y = 16 * np.sin(t) ** 3 / 5
    return LandmarkTemplate(np.column_stack([x, y]), label=label)


def synth_group(alpha: float, m: int = 20, n_landmarks: int = 20, axis_mean=(4.0, 2.0),
                axis_sd: float = math.sqrt(0.2), seed: int = 0) -> list:
    """Ellipses with Gaussian axes followed by ``round(alpha * m)`` heart outliers.

    Axis pairs are drawn from ``N(axis_mean, axis_sd^2 I)`` with a Philox
    generator; draws below 0.1 are redrawn.
    """
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    n_hearts = int(math.floor(alpha * m + 0.5))
    rng = np.random.Generator(np.random.Philox(seed))
    group = []
    for i in range(m - n_hearts):
        axes = rng.normal(axis_mean, axis_sd)
        while np.any(axes < 0.1):
            axes = rng.normal(axis_mean, axis_sd)
        group.append(synth_ellipse(axes[0], axes[1], n_landmarks, label=f"ellipse-{i + 1:02d}"))
    for i in range(n_hearts):
        group.append(synth_heart(n_landmarks, label=f"heart-{i + 1:02d}"))
    return group


def synth_planted_shift(m: int = 14, n_landmarks: int = 13, sigma: float = 0.05,
                        shift: float = 3.0, landmark: int = 6, seed: int = 0):
    """Two noisy groups around an elliptical base shape, one landmark displaced in the cases.

    Every coordinate carries independent ``N(0, sigma^2)`` noise; landmark
    ``landmark`` (1-based) of every case is moved by ``shift * sigma`` along x.

    Returns
    -------
    (controls, cases) : tuple of lists of LandmarkTemplate
    """
    if not 1 <= landmark <= n_landmarks:
        raise ValueError("landmark must lie in 1..n_landmarks")
    rng = np.random.Generator(np.random.Philox(seed))
    t = _angles(n_landmarks)
    base = np.column_stack([np.cos(t), 0.6 * np.sin(t)])
    controls = [
        LandmarkTemplate(base + sigma * rng.standard_normal(base.shape), label=f"control-{i + 1:02d}")
        for i in range(m)
    ]
    cases = []
    for i in range(m):
        pts = base + sigma * rng.standard_normal(base.shape)
        pts[landmark - 1, 0] += shift * sigma
        cases.append(LandmarkTemplate(pts, label=f"case-{i + 1:02d}"))
    return controls, cases
