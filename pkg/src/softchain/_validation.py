"""Argument checks shared by the estimators and the command line."""

from __future__ import annotations

import numbers
from pathlib import Path

import numpy as np

from .programs import PROGRAMS, Program, load_program, load_program_dir
from .valuation import check_object_tensor


def check_gamma(gamma) -> float:
    if not isinstance(gamma, numbers.Real) or not np.isfinite(gamma) or gamma <= 0:
        raise ValueError(f"gamma must be a positive finite number, got {gamma!r}")
    return float(gamma)


def check_positive_int(value, name: str, allow_none: bool = False, minimum: int = 1):
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def resolve_program(program) -> Program:
    """A :class:`Program`, a bundled program name, or a directory with the program files."""
    if isinstance(program, Program):
        return program
    if isinstance(program, (str, Path)):
        if str(program) in PROGRAMS:
            return load_program(str(program))
        if Path(program).is_dir():
            return load_program_dir(program)
    raise ValueError(f"unknown program {program!r}: expected one of {', '.join(PROGRAMS)} or a directory")


def check_Z(Z, program: Program) -> np.ndarray:
    Z = check_object_tensor(np.asarray(Z, dtype=np.float64), program.layout)
    if Z.shape[1] > program.n_objects:
        raise ValueError(f"{Z.shape[1]} object slots but the language declares {program.n_objects} objects")
    return Z
