"""Symbolic scenes, their JSON-lines form and their object-centric tensors."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .valuation import CLEVR19, KANDINSKY11, Layout

# crisp concept semantics shared by the oracle, the scene generators and the concept sets
CLOSEBY_MAX = 0.1
CLOSEBY_NEG_MIN = 0.2
ONLINE_MAX = 0.01
ONLINE_NEG_MIN = 0.05
SIDE_SPLIT = 0.5
LEFT_MAX = 0.4
RIGHT_MIN = 0.6
FRONT_MARGIN = 0.1


class SceneError(ValueError):
    pass


@dataclass
class KandinskyObject:
    shape: str
    color: str
    x: float
    y: float
    size: float


@dataclass
class ClevrObject:
    shape: str
    size: str
    material: str
    color: str
    x: float
    y: float
    z: float


@dataclass
class Scene:
    dataset: str
    objects: list = field(default_factory=list)
    label: int = 0

    def to_json(self) -> str:
        return json.dumps({"dataset": self.dataset, "label": int(self.label),
                           "objects": [asdict(o) for o in self.objects]})

    @classmethod
    def from_json(cls, text: str) -> "Scene":
        rec = json.loads(text)
        try:
            dataset = rec["dataset"]
            kind = {"kandinsky": KandinskyObject, "clevr": ClevrObject}[dataset]
            objects = [kind(**o) for o in rec["objects"]]
            return cls(dataset, objects, int(rec["label"]))
        except (KeyError, TypeError) as exc:
            raise SceneError(f"malformed scene record: {exc}") from None


def write_scenes(scenes: Iterable[Scene], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in scenes:
            fh.write(s.to_json() + "\n")


def read_scenes(path) -> list[Scene]:
    with open(path, encoding="utf-8") as fh:
        return [Scene.from_json(line) for line in fh if line.strip()]


def layout_for(dataset: str) -> Layout:
    try:
        return {"kandinsky": KANDINSKY11, "clevr": CLEVR19}[dataset]
    except KeyError:
        raise SceneError(f"unknown dataset {dataset!r}") from None


def object_row(obj, layout: Layout) -> np.ndarray:
    row = np.zeros(layout.dim)
    if isinstance(obj, KandinskyObject):
        h = obj.size / 2
        row[0:4] = [obj.x - h, obj.y - h, obj.x + h, obj.y + h]
        row[layout.attribute_slice("color")] = _onehot(layout, "color", obj.color)
        row[layout.attribute_slice("shape")] = _onehot(layout, "shape", obj.shape)
    else:
        row[1:4] = [obj.x, obj.y, obj.z]
        for attr in ("shape", "size", "material", "color"):
            row[layout.attribute_slice(attr)] = _onehot(layout, attr, getattr(obj, attr))
    row[layout.objectness] = 1.0
    return row


def _onehot(layout: Layout, attr: str, val: str) -> np.ndarray:
    values = layout.attributes[attr][1]
    if val not in values:
        raise SceneError(f"unknown {attr} {val!r}")
    v = np.zeros(len(values))
    v[values.index(val)] = 1.0
    return v


def scene_to_tensor(scenes: Sequence[Scene], E: int) -> np.ndarray:
    """``B x E x D`` object tensor; unused slots stay all-zero."""
    if not scenes:
        raise SceneError("no scenes")
    datasets = {s.dataset for s in scenes}
    if len(datasets) != 1:
        raise SceneError(f"mixed datasets {sorted(datasets)}")
    layout = layout_for(datasets.pop())
    Z = np.zeros((len(scenes), E, layout.dim))
    for b, scene in enumerate(scenes):
        if len(scene.objects) > E:
            raise SceneError(f"scene {b} has {len(scene.objects)} objects, only {E} slots")
        for k, obj in enumerate(scene.objects):
            Z[b, k] = object_row(obj, layout)
    return Z


def tls_residual(points: np.ndarray) -> np.ndarray:
    """RMS orthogonal distance to the best-fit line, batched over leading axes."""
    c = points - points.mean(axis=-2, keepdims=True)
    cov = np.einsum("...ni,...nj->...ij", c, c) / points.shape[-2]
    lam = np.linalg.eigvalsh(cov)[..., 0]
    return np.sqrt(np.clip(lam, 0.0, None))


def add_noise(Z: np.ndarray, epsilon: float, seed: int, layout: Layout | str) -> np.ndarray:
    """Perturb present objects: attribute slices mixed with random simplex points, positions jittered.

    Every attribute slice becomes ``(1-eps)*slice + eps*u`` with ``u`` uniform
    on the simplex; positions move by at most ``eps*0.05`` per axis.
    """
    from .valuation import get_layout

    layout = get_layout(layout)
    if not 0 <= epsilon < 1:
        raise SceneError("epsilon must lie in [0, 1)")
    Z = np.array(Z, dtype=np.float64, copy=True)
    if epsilon == 0:
        return Z
    rng = np.random.default_rng(seed)
    present = Z[:, :, layout.objectness] > 0
    n = int(present.sum())
    for dt in layout.attributes:
        sl = layout.attribute_slice(dt)
        width = sl.stop - sl.start
        u = rng.dirichlet(np.ones(width), size=n)
        Z[present, sl] = (1 - epsilon) * Z[present, sl] + epsilon * u
    jitter = epsilon * 0.05
    if layout.bbox is not None:
        d = rng.uniform(-jitter, jitter, size=(n, 2))
        b0 = layout.bbox[0]
        for axis in range(2):
            lo, hi = Z[present, b0 + axis], Z[present, b0 + 2 + axis]
            shift = np.clip(d[:, axis], -lo, 1 - hi)  # keep the box inside [0, 1]
            Z[present, b0 + axis] = lo + shift
            Z[present, b0 + 2 + axis] = hi + shift
    if layout.position is not None:
        p0, p1 = layout.position
        d = rng.uniform(-jitter, jitter, size=(n, p1 - p0))
        Z[present, p0:p1] = np.clip(Z[present, p0:p1] + d, 0.0, 1.0)
    return Z
