import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from softchain.logic import parse_clause, parse_language  # noqa: E402
from softchain.pipeline import fit_concepts  # noqa: E402

SQUARE_LANGUAGE = """
datatype image
datatype object
datatype shape
constant img : image input
constant obj1 : object object
constant obj2 : object object
constant square : shape attribute
pred kp/1[image]
neural_pred in/2[object,image] = in
neural_pred shape/2[object,shape] = shape
"""

KANDINSKY_LANGUAGE = """
datatype image
datatype object
datatype color
datatype shape
constant img : image input
constant obj1 : object object
constant obj2 : object object
constant obj3 : object object
constant obj4 : object object
constant red : color attribute
constant blue : color attribute
constant yellow : color attribute
constant square : shape attribute
constant circle : shape attribute
constant triangle : shape attribute
pred kp/1[image]
pred same_shape_pair/2[object,object]
neural_pred in/2[object,image] = in
neural_pred color/2[object,color] = color
neural_pred shape/2[object,shape] = shape
"""


@pytest.fixture(scope="session")
def sq_lang():
    return parse_language(SQUARE_LANGUAGE)


@pytest.fixture(scope="session")
def sq_clause(sq_lang):
    return parse_clause("kp(X):-in(O1,X),shape(O1,square).", sq_lang)


@pytest.fixture(scope="session")
def kandinsky_lang():
    return parse_language(KANDINSKY_LANGUAGE)


@pytest.fixture(scope="session")
def fitted_params():
    return fit_concepts(["closeby", "online", "leftside", "rightside", "front"], seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one PASS/FAIL line per acceptance criterion, collected by tests/test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
