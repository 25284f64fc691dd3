import numpy as np
import pytest

from softchain.bench import BATCH_SIZES, bench
from softchain.datagen import gen_kandinsky
from softchain.gradcheck import check_gradients, relative_error, run_gradcheck, shift_derivative
from softchain.logic import parse_atom
from softchain.pipeline import compile_bundle
from softchain.programs import Program, load_program
from softchain.scenes import scene_to_tensor


def test_square_rule_gradcheck(sq_lang, sq_clause):
    from softchain.logic import parse_clause

    extra = parse_clause("kp(X):-in(O1,X),in(O2,X).", sq_lang)
    program = Program("square_rule", sq_lang, (sq_clause, extra), (), (parse_atom("kp(img)", sq_lang),))
    cp = compile_bundle(program)
    rng = np.random.default_rng(0)
    Z = np.zeros((3, 2, 11))
    Z[:, :, 10] = rng.random((3, 2))
    Z[:, :, 7] = rng.random((3, 2))
    W = rng.normal(size=(2, 2))
    report = check_gradients(cp, program, Z, W, {})
    assert report.passed and report.n_coordinates == 4
    flat = np.ones_like(W)
    assert np.abs(shift_derivative(cp, program, Z, flat, {})).max() <= 1e-10


def test_run_gradcheck_small():
    report = run_gradcheck(n_instances=2, seed=3)
    assert report.passed and report.n_coordinates > 0
    with pytest.raises(ValueError):
        run_gradcheck(1, gamma=0)


def test_relative_error_floor():
    assert relative_error(1e-9, 0.0)[()] == pytest.approx(1e-3)
    assert relative_error(2.0, 1.0)[()] == 0.5


def test_bench_rows():
    program = load_program("twopairs")
    cp = compile_bundle(program)
    Z = scene_to_tensor(gen_kandinsky("twopairs", 25, 25, 0), program.n_objects)
    rows = bench(cp, program, Z, None, repeats=5)
    assert [r.batch for r in rows] == list(BATCH_SIZES)
    assert all(r.mean_ms > 0 and r.std_ms >= 0 for r in rows)
    assert rows[-1].per_example_ms < rows[0].per_example_ms
    with pytest.raises(ValueError):
        bench(cp, program, Z[:10], None)
    with pytest.raises(ValueError):
        bench(cp, program, Z, None, repeats=0)
