"""Forward-mode derivatives of target probabilities checked against finite differences."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import dual as D
from .datagen import add_noise, gen_clevr_hans, gen_kandinsky
from .pipeline import compile_bundle, required_concepts
from .programs import Program, load_program
from .reasoner import DEFAULT_GAMMA, CompiledProgram
from .scenes import scene_to_tensor
from .valuation import PARAM_SIZES, AttributeEncoding, convert_facts

STEP = 1e-5
TOLERANCE = 1e-4
# derivatives below this magnitude are compared in absolute terms
REL_FLOOR = 1e-6

INSTANCE_PROGRAMS = ("closeby", "red-triangle", "clevr-hans7", "twopairs")


class GradcheckError(AssertionError):
    pass


@dataclass
class GradcheckReport:
    max_rel_error: float = 0.0
    worst: tuple = ()
    n_coordinates: int = 0
    rows: list = field(default_factory=list)  # (instance, kind, coordinate, dual, fd, rel)

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= TOLERANCE

    def merge(self, other: "GradcheckReport", instance=None) -> None:
        for r in other.rows:
            self.rows.append((instance, *r[1:]) if instance is not None else r)
        self.n_coordinates += other.n_coordinates
        if other.max_rel_error > self.max_rel_error or not self.worst:
            self.max_rel_error = max(self.max_rel_error, other.max_rel_error)
            if other.worst:
                self.worst = (instance, *other.worst) if instance is not None else other.worst


def relative_error(a, b, floor: float = REL_FLOOR) -> np.ndarray:
    a, b = np.asarray(a), np.asarray(b)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def target_probabilities(cp: CompiledProgram, program: Program, Z, W, params: Mapping):
    enc = AttributeEncoding.from_language(program.lang, program.layout)
    V0 = convert_facts(Z, cp.table, program.lang, program.layout, program.background, params, enc)
    VT = cp.infer(V0, weights=W)
    cols = [cp.table.index_of(t) for t in cp.targets]
    return D.take(VT, np.array(cols), axis=1)


def check_gradients(cp: CompiledProgram, program: Program, Z, W, params: Mapping, h: float = STEP,
                    floor: float = REL_FLOOR) -> GradcheckReport:
    """Compare dual-number and central-difference derivatives for every W entry and parameter."""
    W = np.asarray(W, dtype=np.float64)
    params = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}
    report = GradcheckReport()

    coords = [("W", idx) for idx in np.ndindex(W.shape)]
    coords += [(name, (k,)) for name in sorted(params) for k in range(len(params[name]))]
    for kind, idx in coords:
        def at(delta, dual=False):
            Wk, pk = W, dict(params)
            if kind == "W":
                if dual:
                    t = np.zeros_like(W)
                    t[idx] = 1.0
                    Wk = D.Dual(W, t)
                else:
                    Wk = W.copy()
                    Wk[idx] += delta
            else:
                theta = params[kind]
                if dual:
                    t = np.zeros_like(theta)
                    t[idx] = 1.0
                    pk[kind] = D.Dual(theta, t)
                else:
                    pk[kind] = theta.copy()
                    pk[kind][idx] += delta
            return target_probabilities(cp, program, Z, Wk, pk)

        ad = D.tangent(at(0.0, dual=True))
        fd = (D.value(at(h)) - D.value(at(-h))) / (2 * h)
        rel = relative_error(ad, fd, floor)
        k = int(np.argmax(rel))
        report.rows.append((None, kind, idx, float(ad.flat[k]), float(fd.flat[k]), float(rel.flat[k])))
        report.n_coordinates += 1
        if rel.flat[k] > report.max_rel_error or not report.worst:
            report.max_rel_error = max(report.max_rel_error, float(rel.flat[k]))
            report.worst = (kind, idx)
    return report


def random_instance(rng: np.random.Generator, name: str, gamma: float = DEFAULT_GAMMA):
    """A soft, non-saturated problem: noisy scenes, Gaussian clause weights, moderate parameters."""
    program = load_program(name)
    seed = int(rng.integers(2**31))
    if program.dataset == "clevr":
        scenes = gen_clevr_hans(7, 1, seed)[:3]
    else:
        scenes = gen_kandinsky(name, 1, 1, seed)
    Z = add_noise(scene_to_tensor(scenes, program.n_objects), 0.3, seed, program.layout)
    cp = compile_bundle(program, gamma=gamma)
    W = rng.normal(size=cp.weights.shape)
    params = {}
    for c in required_concepts(program.lang):
        params[c] = rng.normal(scale=3.0, size=PARAM_SIZES[c])
    return cp, program, Z, W, params


def run_gradcheck(n_instances: int = 50, seed: int = 0, gamma: float = DEFAULT_GAMMA,
                  programs=INSTANCE_PROGRAMS) -> GradcheckReport:
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    rng = np.random.default_rng(seed)
    total = GradcheckReport()
    for i in range(n_instances):
        cp, program, Z, W, params = random_instance(rng, programs[i % len(programs)], gamma)
        total.merge(check_gradients(cp, program, Z, W, params), instance=i)
    return total


def shift_derivative(cp: CompiledProgram, program: Program, Z, W, params, row: int = 0) -> np.ndarray:
    """Directional derivative of the targets along a uniform shift of one weight row."""
    t = np.zeros_like(np.asarray(W, dtype=np.float64))
    t[row] = 1.0
    return D.tangent(target_probabilities(cp, program, Z, D.Dual(W, t), params))
