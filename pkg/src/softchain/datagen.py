"""Deterministic synthetic scenes and concept examples.

Every scene is labelled by the exact oracle under its rule program. Positive
proposals are built to resemble the pattern, negative proposals are either
fully random or near misses of a positive; a proposal is kept only when the
oracle agrees with the wanted label. Continuous quantities read by learned
concepts keep a margin around the crisp thresholds, so a fitted concept and
the oracle cannot disagree on a generated scene.
"""

from __future__ import annotations

import itertools
from typing import Callable

import numpy as np

from .oracle import label_scene
from .programs import CLEVR_PROGRAMS, KANDINSKY_PATTERNS, Program, load_program
from .scenes import (
    CLOSEBY_MAX,
    CLOSEBY_NEG_MIN,
    FRONT_MARGIN,
    LEFT_MAX,
    ONLINE_MAX,
    ONLINE_NEG_MIN,
    RIGHT_MIN,
    ClevrObject,
    KandinskyObject,
    Scene,
    add_noise,
    object_row,
    tls_residual,
)
from .valuation import CLEVR19, KANDINSKY11

MAX_RESAMPLES = 100_000
DECIMALS = 4

K_SHAPES = ("square", "circle", "triangle")
K_COLORS = ("red", "yellow", "blue")
C_SHAPES = ("sphere", "cube", "cylinder")
C_SIZES = ("large", "small")
C_MATERIALS = ("rubber", "metal")
C_COLORS = ("cyan", "blue", "yellow", "purple", "red", "green", "gray", "brown")
MIN_SIZE, MAX_SIZE = 0.04, 0.12
CLEVR_MIN_OBJECTS, CLEVR_MAX_OBJECTS = 4, 6
Y_SPACING = 0.1


class GenerationError(RuntimeError):
    pass


def _r(v: float) -> float:
    return round(float(v), DECIMALS)


# ---------------------------------------------------------------------------
# Kandinsky geometry
# ---------------------------------------------------------------------------

def _centers(objs) -> np.ndarray:
    return np.array([[o.x, o.y] for o in objs]).reshape(-1, 2)


def _non_overlapping(objs) -> bool:
    c = _centers(objs)
    for a, b in itertools.combinations(range(len(objs)), 2):
        if np.hypot(*(c[a] - c[b])) <= (objs[a].size + objs[b].size) / 2:
            return False
    return True


def _distance_band_ok(objs) -> bool:
    """No pair of objects sits in the ambiguous zone between close and far."""
    c = _centers(objs)
    for a, b in itertools.combinations(range(len(objs)), 2):
        d = np.hypot(*(c[a] - c[b]))
        if CLOSEBY_MAX < d < CLOSEBY_NEG_MIN:
            return False
    return True


def _online_band_ok(objs) -> bool:
    # only the all-distinct 5-tuple reaches the rule, and its residual is order free
    res = float(tls_residual(_centers(objs)))
    return not ONLINE_MAX < res < ONLINE_NEG_MIN


def _scatter(rng, sizes, min_gap: float = 0.0, tries: int = 200):
    """Centers for objects of the given sizes, inside the unit square and pairwise apart."""
    pts = []
    for s in sizes:
        for _ in range(tries):
            p = rng.uniform(s / 2, 1 - s / 2, size=2)
            if all(np.hypot(*(p - q)) > max((s + t) / 2, min_gap) for q, t in pts):
                pts.append((p, s))
                break
        else:
            return None
    return [p for p, _ in pts]


def _sizes(rng, n, lo=MIN_SIZE, hi=MAX_SIZE):
    return [_r(s) for s in rng.uniform(lo, hi, size=n)]


def _kobjs(attrs, centers, sizes):
    return [KandinskyObject(shape=s, color=c, x=_r(p[0]), y=_r(p[1]), size=z)
            for (s, c), p, z in zip(attrs, centers, sizes)]


def _random_attrs(rng, n, shapes=K_SHAPES):
    return [(shapes[rng.integers(len(shapes))], K_COLORS[rng.integers(3)]) for _ in range(n)]


def _other(rng, values, avoid):
    choices = [v for v in values if v != avoid]
    return choices[rng.integers(len(choices))]


def _shuffled(rng, items):
    return [items[k] for k in rng.permutation(len(items))]


def _perturb_one(rng, attrs, shapes=K_SHAPES):
    attrs = list(attrs)
    k = rng.integers(len(attrs))
    attrs[k] = (shapes[rng.integers(len(shapes))], K_COLORS[rng.integers(3)])
    return attrs


def _pairs_attrs(rng, kinds):
    """Attributes for object pairs; each kind is 'same' (shape and color) or 'diff' (same shape, colors differ)."""
    attrs = []
    for kind in kinds:
        shape, color = K_SHAPES[rng.integers(3)], K_COLORS[rng.integers(3)]
        second = color if kind == "same" else _other(rng, K_COLORS, color)
        attrs += [(shape, color), (shape, second)]
    return attrs


def _plain_scene(rng, attrs):
    sizes = _sizes(rng, len(attrs))
    centers = _scatter(rng, sizes)
    return None if centers is None else _kobjs(attrs, centers, sizes)


def _close_pair_scene(rng, attrs):
    """attrs[0] and attrs[1] form a close pair, everything else is far from everything."""
    n = len(attrs)
    sizes = [_r(rng.uniform(MIN_SIZE, 0.06)), _r(rng.uniform(MIN_SIZE, 0.06))] + _sizes(rng, n - 2)
    anchors = _scatter(rng, [sizes[0]] + sizes[2:], min_gap=CLOSEBY_NEG_MIN)
    if anchors is None:
        return None
    d = rng.uniform(0.065, CLOSEBY_MAX - 0.002)
    phi = rng.uniform(0, 2 * np.pi)
    partner = anchors[0] + d * np.array([np.cos(phi), np.sin(phi)])
    h = sizes[1] / 2
    if not (h <= partner[0] <= 1 - h and h <= partner[1] <= 1 - h):
        return None
    centers = [anchors[0], partner] + anchors[1:]
    objs = _kobjs(attrs, centers, sizes)
    order = rng.permutation(n)
    return [objs[k] for k in order]


def _far_scene(rng, attrs):
    sizes = _sizes(rng, len(attrs))
    centers = _scatter(rng, sizes, min_gap=CLOSEBY_NEG_MIN)
    return None if centers is None else _kobjs(attrs, centers, sizes)


def _line_scene(rng, attrs):
    """Five objects on a common line (residual well below the online threshold)."""
    for _ in range(100):
        a, b = rng.uniform(0.07, 0.93, size=(2, 2))
        length = np.hypot(*(b - a))
        if length >= 0.6:
            break
    else:
        return None
    n = len(attrs)
    delta = 0.13 / length
    t = np.sort(rng.uniform(0, 1 - (n - 1) * delta, size=n)) + delta * np.arange(n)
    normal = np.array([-(b - a)[1], (b - a)[0]]) / length
    offs = rng.uniform(-0.004, 0.004, size=n)
    centers = [a + ti * (b - a) + o * normal for ti, o in zip(t, offs)]
    sizes = _sizes(rng, n)
    objs = _kobjs(attrs, centers, sizes)
    if any(not (o.size / 2 <= o.x <= 1 - o.size / 2 and o.size / 2 <= o.y <= 1 - o.size / 2) for o in objs):
        return None
    return [objs[k] for k in rng.permutation(n)]


# per-pattern proposals: (positive, negative) builders returning objects or None
def _twopairs(rng, positive):
    attrs = _pairs_attrs(rng, ["same", "diff"])
    if not positive:
        attrs = _random_attrs(rng, 4) if rng.random() < 0.5 else _perturb_one(rng, attrs)
    return _plain_scene(rng, _shuffled(rng, attrs))


def _threepairs(rng, positive):
    attrs = _pairs_attrs(rng, ["same", "diff", "diff"])
    if not positive:
        attrs = _random_attrs(rng, 6) if rng.random() < 0.5 else _perturb_one(rng, attrs)
    return _plain_scene(rng, _shuffled(rng, attrs))


def _closeby(rng, positive):
    attrs = _random_attrs(rng, 4)
    return _close_pair_scene(rng, attrs) if positive else _far_scene(rng, attrs)


def _red_triangle(rng, positive):
    partner = (_other(rng, K_SHAPES, "triangle"), _other(rng, K_COLORS, "red"))
    attrs = [("triangle", "red"), partner] + _random_attrs(rng, 4)
    if positive:
        return _close_pair_scene(rng, attrs)
    roll = rng.random()
    if roll < 0.4:
        return _far_scene(rng, attrs)
    if roll < 0.7:
        attrs = _perturb_one(rng, attrs[:2]) + attrs[2:]
    else:
        attrs = _random_attrs(rng, 6)
    return _close_pair_scene(rng, attrs)


def _online_pair(rng, positive):
    shape, color = K_SHAPES[rng.integers(3)], K_COLORS[rng.integers(3)]
    attrs = [(shape, color), (shape, color)] + _random_attrs(rng, 3)
    if positive:
        return _line_scene(rng, attrs)
    roll = rng.random()
    if roll < 0.5:
        return _plain_scene(rng, attrs if roll < 0.25 else _random_attrs(rng, 5))
    # on a line, but without a matching pair (most proposals get rejected by the oracle otherwise)
    return _line_scene(rng, _random_attrs(rng, 5))


def _nine_circles(rng, positive):
    colors = [c for c in K_COLORS for _ in range(3)]
    if not positive:
        if rng.random() < 0.5:
            colors = [K_COLORS[rng.integers(3)] for _ in range(9)]
        else:
            k = rng.integers(9)
            colors[k] = _other(rng, K_COLORS, colors[k])
    attrs = [("circle", c) for c in _shuffled(rng, colors)]
    return _plain_scene(rng, attrs)


_KANDINSKY: dict[str, tuple[Callable, Callable]] = {
    "twopairs": (_twopairs, None),
    "threepairs": (_threepairs, None),
    "closeby": (_closeby, _distance_band_ok),
    "red-triangle": (_red_triangle, _distance_band_ok),
    "online-pair": (_online_pair, _online_band_ok),
    "nine-circles": (_nine_circles, None),
}


def _sample(rng, propose, accept, what: str):
    for _ in range(MAX_RESAMPLES):
        scene = propose()
        if scene is not None and accept(scene):
            return scene
    raise GenerationError(f"sampling budget of {MAX_RESAMPLES} exhausted for {what}")


def _labeler(program: Program):
    def label(scene: Scene) -> int:
        return label_scene(scene, program.clauses, program.lang, program.targets, program.background)
    return label


def gen_kandinsky(pattern: str, n_pos: int, n_neg: int, seed: int) -> list[Scene]:
    """``n_pos`` positive and ``n_neg`` negative scenes of a Kandinsky pattern, in seeded order."""
    if pattern not in _KANDINSKY:
        raise GenerationError(f"unknown pattern {pattern!r}; choose from {', '.join(KANDINSKY_PATTERNS)}")
    if n_pos < 0 or n_neg < 0:
        raise GenerationError("scene counts must be non-negative")
    propose, band = _KANDINSKY[pattern]
    program = load_program(pattern)
    label = _labeler(program)
    rng = np.random.default_rng(seed)
    scenes = []
    for want, count in ((1, n_pos), (0, n_neg)):
        for _ in range(count):
            def accept(objs, want=want):
                if not _non_overlapping(objs) or (band is not None and not band(objs)):
                    return False
                return label(Scene("kandinsky", objs, want)) == want
            objs = _sample(rng, lambda want=want: propose(rng, bool(want)), accept,
                           f"{pattern} label {want}")
            scenes.append(Scene("kandinsky", objs, want))
    return _shuffled(rng, scenes)


# ---------------------------------------------------------------------------
# CLEVR-Hans
# ---------------------------------------------------------------------------

_LARGE_CUBE_CYL = [{"size": "large", "shape": "cube"}, {"size": "large", "shape": "cylinder"}]
_SMALL_METAL_CUBE = [{"size": "small", "material": "metal", "shape": "cube"}, {"size": "small", "shape": "sphere"}]
_BLUE_YELLOW_SPHERES = [{"size": "large", "color": "blue", "shape": "sphere"},
                        {"size": "small", "color": "yellow", "shape": "sphere"}]

CLEVR_TEMPLATES = {
    3: {1: _LARGE_CUBE_CYL, 2: _SMALL_METAL_CUBE, 3: _BLUE_YELLOW_SPHERES},
    7: {
        1: _LARGE_CUBE_CYL,
        2: _SMALL_METAL_CUBE,
        3: [{"color": "cyan", "front": True}, {"color": "red"}, {"color": "red"}],
        4: [{"size": "small", "color": "green"}, {"size": "small", "color": "brown"},
            {"size": "small", "color": "purple"}, {"size": "small"}],
        5: [{"shape": "sphere", "side": "left"}] * 3,
        6: [{"shape": "cylinder", "material": "metal", "side": "right"}] * 3,
        7: _BLUE_YELLOW_SPHERES,
    },
}


def _spaced(rng, n, lo=0.02, hi=0.98, gap=Y_SPACING):
    """``n`` values in [lo, hi] whose pairwise distances are at least ``gap``, in random order."""
    u = np.sort(rng.uniform(lo, hi - (n - 1) * gap, size=n)) + gap * np.arange(n)
    return u[rng.permutation(n)]


def _side_x(rng, side):
    if side is None:
        side = "left" if rng.random() < 0.5 else "right"
    return rng.uniform(0.02, LEFT_MAX) if side == "left" else rng.uniform(RIGHT_MIN, 0.98)


def _clevr_scene(rng, template):
    n = int(rng.integers(max(CLEVR_MIN_OBJECTS, len(template)), CLEVR_MAX_OBJECTS + 1))
    specs = list(template) + [{}] * (n - len(template))
    ys = _spaced(rng, n)
    if any("front" in s for s in template):
        # the object in front takes the smallest y among the template objects
        group = list(range(len(template)))
        order = sorted(ys[group])
        lead = next(k for k in group if "front" in specs[k])
        ys[lead] = order[0]
        rest = [k for k in group if k != lead]
        for k, y in zip(rest, order[1:]):
            ys[k] = y
    objs = []
    for spec, y in zip(specs, ys):
        objs.append(ClevrObject(
            shape=spec.get("shape") or C_SHAPES[rng.integers(3)],
            size=spec.get("size") or C_SIZES[rng.integers(2)],
            material=spec.get("material") or C_MATERIALS[rng.integers(2)],
            color=spec.get("color") or C_COLORS[rng.integers(8)],
            x=_r(_side_x(rng, spec.get("side"))),
            y=_r(y),
            z=_r(rng.uniform(0, 1)),
        ))
    return [objs[k] for k in rng.permutation(n)]


def gen_clevr_hans(variant: int, per_class: int, seed: int) -> list[Scene]:
    """``per_class`` scenes for each class ``1..K``; scenes matching several class rules are rejected."""
    if variant not in CLEVR_PROGRAMS:
        raise GenerationError("variant must be 3 or 7")
    if per_class < 0:
        raise GenerationError("per_class must be non-negative")
    program = load_program(CLEVR_PROGRAMS[variant])
    label = _labeler(program)
    rng = np.random.default_rng(seed)
    scenes = []
    for cls, template in CLEVR_TEMPLATES[variant].items():
        for _ in range(per_class):
            objs = _sample(rng, lambda t=template: _clevr_scene(rng, t),
                           lambda o, c=cls: label(Scene("clevr", o, c)) == c,
                           f"CLEVR-Hans{variant} class {cls}")
            scenes.append(Scene("clevr", objs, cls))
    return _shuffled(rng, scenes)


# ---------------------------------------------------------------------------
# concept examples
# ---------------------------------------------------------------------------

def _kandinsky_row(rng, center):
    size = _r(rng.uniform(MIN_SIZE, MAX_SIZE))
    shape, color = _random_attrs(rng, 1)[0]
    return object_row(KandinskyObject(shape, color, _r(center[0]), _r(center[1]), size), KANDINSKY11)


def _clevr_row(rng, x, y):
    obj = ClevrObject(C_SHAPES[rng.integers(3)], C_SIZES[rng.integers(2)], C_MATERIALS[rng.integers(2)],
                      C_COLORS[rng.integers(8)], _r(x), _r(y), _r(rng.uniform(0, 1)))
    return object_row(obj, CLEVR19)


def _closeby_example(rng, positive):
    while True:
        a = rng.uniform(0, 1, size=2)
        if positive:
            d, phi = rng.uniform(0, CLOSEBY_MAX - 0.002), rng.uniform(0, 2 * np.pi)
            b = a + d * np.array([np.cos(phi), np.sin(phi)])
        else:
            b = rng.uniform(0, 1, size=2)
        if not ((0 <= b) & (b <= 1)).all():
            continue
        d = np.hypot(*(np.round(a, DECIMALS) - np.round(b, DECIMALS)))
        if (d <= CLOSEBY_MAX) if positive else (d >= CLOSEBY_NEG_MIN):
            return [_kandinsky_row(rng, a), _kandinsky_row(rng, b)]


def _online_example(rng, positive):
    while True:
        a, b = rng.uniform(0, 1, size=(2, 2))
        t = rng.uniform(0, 1, size=5)
        normal = np.array([-(b - a)[1], (b - a)[0]])
        normal /= max(np.hypot(*normal), 1e-12)
        spread = 0.005 if positive else (0.3 if rng.random() < 0.5 else 1.0)
        pts = a + t[:, None] * (b - a) + rng.uniform(-spread, spread, size=(5, 1)) * normal
        if not ((0 <= pts) & (pts <= 1)).all():
            continue
        res = float(tls_residual(np.round(pts, DECIMALS)))
        if (res <= ONLINE_MAX) if positive else (res >= ONLINE_NEG_MIN):
            return [_kandinsky_row(rng, p) for p in pts]


def _side_example(rng, positive, left: bool):
    x = rng.uniform(0, LEFT_MAX) if positive == left else rng.uniform(RIGHT_MIN, 1)
    return [_clevr_row(rng, x, rng.uniform(0, 1))]


def _front_example(rng, positive):
    while True:
        ya, yb = rng.uniform(0, 1, size=2)
        if (yb - ya >= FRONT_MARGIN) if positive else (ya - yb >= FRONT_MARGIN):
            return [_clevr_row(rng, rng.uniform(0, 1), ya), _clevr_row(rng, rng.uniform(0, 1), yb)]


CONCEPTS: dict[str, Callable] = {
    "closeby": _closeby_example,
    "online": _online_example,
    "leftside": lambda rng, pos: _side_example(rng, pos, True),
    "rightside": lambda rng, pos: _side_example(rng, pos, False),
    "front": _front_example,
}
CONCEPT_LAYOUT = {"closeby": "kandinsky11", "online": "kandinsky11", "leftside": "clevr19",
                  "rightside": "clevr19", "front": "clevr19"}


def gen_concept_set(concept: str, n_per_class: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Balanced labelled examples ``(X, y)``; ``X`` is ``n x arity x D`` object rows."""
    if concept not in CONCEPTS:
        raise GenerationError(f"unknown concept {concept!r}; choose from {', '.join(CONCEPTS)}")
    if n_per_class < 0:
        raise GenerationError("n_per_class must be non-negative")
    from .concepts import ARITY
    from .valuation import get_layout

    dim = get_layout(CONCEPT_LAYOUT[concept]).dim
    if n_per_class == 0:
        return np.zeros((0, ARITY[concept], dim)), np.zeros(0, dtype=int)
    rng = np.random.default_rng(seed)
    make = CONCEPTS[concept]
    X, y = [], []
    for want in (1, 0):
        for _ in range(n_per_class):
            X.append(np.stack(make(rng, bool(want))))
            y.append(want)
    order = rng.permutation(len(y))
    return np.stack(X)[order], np.array(y)[order]


__all__ = [
    "GenerationError",
    "gen_kandinsky",
    "gen_clevr_hans",
    "gen_concept_set",
    "add_noise",
    "CONCEPTS",
    "CONCEPT_LAYOUT",
]
