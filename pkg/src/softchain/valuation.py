"""Object-centric tensors to probabilistic facts.

Object constants map to per-object slices of ``Z`` (``B x E x D``), attribute
constants to batch-expanded one-hot rows, and every neural predicate has a
valuation function returning one probability per batch row.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import dual as D
from .grounding import FALSE_INDEX, TRUE_INDEX, GroundAtomTable
from .logic import Atom, Constant, Language


class ValuationError(ValueError):
    pass


@dataclass(frozen=True)
class Layout:
    """Column layout of one object row."""

    name: str
    dim: int
    objectness: int
    attributes: Mapping[str, tuple[int, tuple[str, ...]]]  # datatype -> (start column, ordered values)
    position: tuple[int, int] | None = None  # CLEVR x, y, z columns
    bbox: tuple[int, int] | None = None  # Kandinsky x1, y1, x2, y2 columns

    def attribute_slice(self, datatype: str) -> slice:
        try:
            start, values = self.attributes[datatype]
        except KeyError:
            raise ValuationError(f"layout {self.name} has no {datatype!r} attribute") from None
        return slice(start, start + len(values))


KANDINSKY11 = Layout(
    name="kandinsky11",
    dim=11,
    objectness=10,
    attributes={
        "color": (4, ("red", "yellow", "blue")),
        "shape": (7, ("square", "circle", "triangle")),
    },
    bbox=(0, 4),
)

CLEVR19 = Layout(
    name="clevr19",
    dim=19,
    objectness=0,
    attributes={
        "shape": (4, ("sphere", "cube", "cylinder")),
        "size": (7, ("large", "small")),
        "material": (9, ("rubber", "metal")),
        "color": (11, ("cyan", "blue", "yellow", "purple", "red", "green", "gray", "brown")),
    },
    position=(1, 4),
)

LAYOUTS = {layout.name: layout for layout in (KANDINSKY11, CLEVR19)}


def get_layout(name: str | Layout) -> Layout:
    if isinstance(name, Layout):
        return name
    try:
        return LAYOUTS[name]
    except KeyError:
        raise ValuationError(f"unknown layout {name!r}; choose from {sorted(LAYOUTS)}") from None


# parameter count (weights + bias) of each parameterized valuation
PARAM_SIZES = {"closeby": 2, "online": 2, "leftside": 2, "rightside": 2, "front": 7}
ATTRIBUTE_VALUATIONS = ("shape", "color", "size", "material")
VALUATIONS = ("in", *ATTRIBUTE_VALUATIONS, *PARAM_SIZES)


@dataclass
class AttributeEncoding:
    """One-hot rows for attribute constants, ordered by the layout columns."""

    layout: Layout
    onehots: dict[str, np.ndarray] = field(default_factory=dict)
    datatype_of: dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_language(cls, lang: Language, layout: Layout | str) -> "AttributeEncoding":
        layout = get_layout(layout)
        enc = cls(layout)
        for c in lang.constants_of_kind("attribute"):
            dt = c.datatype.name
            if dt not in layout.attributes:
                continue  # background-only attributes have no tensor form
            values = layout.attributes[dt][1]
            if c.name not in values:
                raise ValuationError(f"attribute {c.name} of {dt} is not in layout {layout.name}")
            vec = np.zeros(len(values))
            vec[values.index(c.name)] = 1.0
            enc.onehots[c.name] = vec
            enc.datatype_of[c.name] = dt
        return enc

    def tensor(self, name: str, batch: int) -> np.ndarray:
        try:
            return np.broadcast_to(self.onehots[name], (batch, len(self.onehots[name])))
        except KeyError:
            raise ValuationError(f"attribute constant {name!r} has no one-hot encoding") from None


def object_slots(lang: Language) -> dict[str, int]:
    """Object constant -> slot of ``Z``, by declaration order."""
    return {c.name: k for k, c in enumerate(lang.constants_of_kind("object"))}


def to_tensor(term: Constant, Z, enc: AttributeEncoding, slots: Mapping[str, int]):
    """Tensor form of an object or attribute constant for a batch ``Z``."""
    if term.kind == "object":
        k = slots[term.name]
        if k >= Z.shape[1]:
            raise ValuationError(f"object {term.name} maps to slot {k}, but Z has {Z.shape[1]} slots")
        return Z[:, k, :]
    if term.kind == "attribute":
        return enc.tensor(term.name, Z.shape[0])
    if term.kind == "input":
        return Z  # the whole scene
    raise ValuationError(f"{term.kind} constant {term.name} has no tensor representation")


# ---------------------------------------------------------------------------
# valuation functions
# ---------------------------------------------------------------------------

def centers(obj, layout: Layout):
    """``B x 2`` center coordinates of an object slice."""
    if layout.bbox is not None:
        b0 = layout.bbox[0]
        x = (obj[:, b0] + obj[:, b0 + 2]) * 0.5
        y = (obj[:, b0 + 1] + obj[:, b0 + 3]) * 0.5
    else:
        p0 = layout.position[0]
        x, y = obj[:, p0], obj[:, p0 + 1]
    return D.stack([x, y], axis=1)


def linear_fit_residual(points):
    """Root-mean-square orthogonal distance of points to their best-fit line.

    ``points`` is ``(..., n, 2)``. The total-least-squares line runs along the
    principal axis, so the residual is the square root of the smaller
    eigenvalue of the centered 2x2 covariance.
    """
    mean = D.sum(points, axis=-2, keepdims=True) * (1.0 / points.shape[-2])
    c = points - mean
    cx, cy = c[..., 0], c[..., 1]
    n = points.shape[-2]
    a = D.sum(cx * cx, axis=-1) * (1.0 / n)
    b = D.sum(cx * cy, axis=-1) * (1.0 / n)
    d = D.sum(cy * cy, axis=-1) * (1.0 / n)
    half_diff = (a - d) * 0.5
    lam_min = (a + d) * 0.5 - D.sqrt(half_diff * half_diff + b * b)
    return D.sqrt(D.maximum_const(lam_min, 0.0))


def _linear(features, params):
    """``features @ w + b`` for ``features`` of shape ``B x k``."""
    k = features.shape[1]
    w, b = params[:k], params[k]
    return D.sum(features * w, axis=1) + b


def neural_features(valuation: str, args: Sequence, layout: Layout):
    """(features ``B x k``, multiplicative gate ``B`` or None) of a parameterized valuation."""
    if valuation == "closeby":
        diff = centers(args[0], layout) - centers(args[1], layout)
        dist = D.sqrt(D.sum(diff * diff, axis=1))
        return dist.reshape(-1, 1), None
    if valuation == "online":
        pts = D.stack([centers(a, layout) for a in args], axis=1)
        return linear_fit_residual(pts).reshape(-1, 1), None
    if valuation in ("leftside", "rightside"):
        if layout.position is None:
            raise ValuationError(f"{valuation} needs a layout with positions")
        x = args[0][:, layout.position[0]]
        return x.reshape(-1, 1), args[0][:, layout.objectness]
    if valuation == "front":
        if layout.position is None:
            raise ValuationError("front needs a layout with positions")
        p0, p1 = layout.position
        feats = D.concatenate([args[0][:, p0:p1], args[1][:, p0:p1]], axis=1)
        return feats, args[0][:, layout.objectness] * args[1][:, layout.objectness]
    raise ValuationError(f"valuation {valuation!r} has no parameters")


def valuate(valuation: str, args: Sequence, params: Mapping[str, object], layout: Layout | str,
            attribute: str | None = None):
    """Probability of one neural ground atom for every batch row.

    ``args`` are the tensor forms of the atom's arguments; ``attribute`` names
    the datatype of the second argument for attribute valuations.
    """
    layout = get_layout(layout)
    if valuation == "in":
        return args[0][:, layout.objectness]
    if valuation in ATTRIBUTE_VALUATIONS:
        sl = layout.attribute_slice(attribute or valuation)
        return D.sum(args[0][:, sl] * args[1], axis=1)
    if valuation in PARAM_SIZES:
        theta = params.get(valuation) if params is not None else None
        if theta is None:
            raise ValuationError(f"missing parameters for neural predicate {valuation!r}")
        if len(theta) != PARAM_SIZES[valuation]:
            raise ValuationError(f"{valuation} expects {PARAM_SIZES[valuation]} parameters, got {len(theta)}")
        feats, gate = neural_features(valuation, args, layout)
        p = D.sigmoid(_linear(feats, theta))
        return p if gate is None else p * gate
    raise ValuationError(f"unknown valuation {valuation!r}")


def check_object_tensor(Z, layout: Layout | str) -> np.ndarray:
    layout = get_layout(layout)
    v = D.value(Z)
    if v.ndim != 3:
        raise ValuationError(f"object tensor must be B x E x D, got shape {v.shape}")
    if v.shape[2] != layout.dim:
        raise ValuationError(f"layout {layout.name} needs D={layout.dim}, got {v.shape[2]}")
    if not np.isfinite(v).all():
        raise ValuationError("object tensor has non-finite entries")
    obj = v[:, :, layout.objectness]
    if (obj < -1e-9).any() or (obj > 1 + 1e-9).any():
        raise ValuationError("objectness outside [0, 1]")
    for dt in layout.attributes:
        sl = v[:, :, layout.attribute_slice(dt)]
        if (sl < -1e-9).any() or (sl.sum(axis=-1) > 1 + 1e-6).any():
            raise ValuationError(f"{dt} slice is not a sub-probability vector")
    return v


def convert_facts(
    Z,
    table: GroundAtomTable,
    lang: Language,
    layout: Layout | str,
    background: Sequence[Atom] = (),
    params: Mapping[str, object] | None = None,
    enc: AttributeEncoding | None = None,
):
    """Initial valuation ``B x G`` of a batch of object-centric scenes.

    Neural atoms get their valuation, background atoms 1, the true atom 1 and
    every other atom (the false atom included) 0.
    """
    layout = get_layout(layout)
    enc = enc or AttributeEncoding.from_language(lang, layout)
    slots = object_slots(lang)
    B = Z.shape[0]
    bk = set(background)
    for atom in bk:
        if atom not in table:
            raise ValuationError(f"background atom {atom} is not in the ground-atom table")

    columns: dict[int, object] = {TRUE_INDEX: np.ones(B)}
    groups: dict = {}
    for j, atom in enumerate(table.atoms):
        if j in (FALSE_INDEX, TRUE_INDEX):
            continue
        if atom.predicate.is_neural:
            groups.setdefault(atom.predicate, []).append((j, atom))
        elif atom in bk:
            columns[j] = np.ones(B)

    # one valuation call per neural predicate, over all its ground atoms stacked along the batch axis
    for pred, members in groups.items():
        n = len(members)
        args = []
        for k in range(pred.arity):
            parts = [to_tensor(atom.terms[k], Z, enc, slots) for _, atom in members]
            stacked = D.stack(parts, axis=0)
            args.append(stacked.reshape((n * B,) + tuple(stacked.shape[2:])))
        attr = members[0][1].terms[1].datatype.name if pred.valuation in ATTRIBUTE_VALUATIONS else None
        vals = valuate(pred.valuation, args, params, layout, attribute=attr).reshape(n, B)
        for i, (j, _) in enumerate(members):
            columns[j] = vals[i]

    if not any(D.is_dual(c) for c in columns.values()) and not D.is_dual(Z):
        V = np.zeros((B, len(table)))
        for j, col in columns.items():
            V[:, j] = col
        return V
    zero = np.zeros(B)
    return D.stack([columns.get(j, zero) for j in range(len(table))], axis=1)
