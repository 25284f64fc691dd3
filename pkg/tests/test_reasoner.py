import numpy as np
import pytest

from softchain import dual as D
from softchain import kernels as K
from softchain.datagen import add_noise, gen_kandinsky
from softchain.gradcheck import shift_derivative, target_probabilities
from softchain.grounding import enumerate_ground_atoms
from softchain.logic import parse_atom, parse_clause, parse_language
from softchain.pipeline import compile_bundle, infer_tensor
from softchain.programs import load_program
from softchain.reasoner import (
    ReasonerError,
    clause_function,
    compile_program,
    compose_program,
    forward_dense,
    one_hot_weights,
    predict,
    stratification_depth,
)
from softchain.scenes import Scene, scene_to_tensor

GAMMA = 0.01


@pytest.fixture(scope="module")
def sq(sq_lang, sq_clause):
    kp = parse_atom("kp(img)", sq_lang)
    cp = compile_program(sq_lang, [sq_clause], [kp])
    return cp, cp.table.index_of(kp)


def _valuation(cp, **named):
    V = np.zeros((1, len(cp.table)))
    V[0, 1] = 1.0
    for text, val in named.items():
        V[0, cp.table.index_of(parse_atom(text, cp.lang))] = val
    return V


def test_clause_function_examples(sq):
    cp, kp = sq
    crisp = _valuation(cp, **{"in(obj1,img)": 1.0, "shape(obj1,square)": 1.0})
    assert clause_function(crisp, cp.index_tensor[0])[0, kp] >= 0.99
    assert clause_function(_valuation(cp), cp.index_tensor[0])[0, kp] <= 0.01
    soft = _valuation(cp, **{"in(obj1,img)": 0.8, "shape(obj1,square)": 0.5})
    assert clause_function(soft, cp.index_tensor[0])[0, kp] == pytest.approx(0.40, abs=0.01)


def test_row_sparse_path_equals_dense(sq, rng):
    cp, _ = sq
    V = rng.random((3, len(cp.table)))
    V[:, 0], V[:, 1] = 0, 1
    dense = K.stack_d([clause_function(V, cp.index_tensor[i]) for i in range(len(cp.clauses))], 0)
    np.testing.assert_allclose(cp.clause_outputs(V), dense, rtol=0, atol=1e-14)


def test_compiled_infer_equals_dense_reference(rng):
    program = load_program("twopairs")
    cp = compile_bundle(program)
    V = rng.random((2, len(cp.table)))
    V[:, 0], V[:, 1] = 0, 1
    np.testing.assert_allclose(cp.infer(V), forward_dense(V, cp.index_tensor, cp.weights, cp.steps), atol=1e-13)


def test_compose_single_clause_is_identity(rng):
    C = rng.random((1, 2, 5))
    np.testing.assert_array_equal(compose_program(C, np.array([[3.7]])), C[0])


def test_compose_one_hot_rows_approximate_softor(rng):
    C = rng.random((4, 2, 6))
    R = compose_program(C, one_hot_weights(4))
    np.testing.assert_allclose(R, K.softor(C, 0, GAMMA), atol=1e-12)


def test_compose_duplicate_rows(rng):
    C = rng.random((2, 3, 5)) * 0.9
    W = np.array([[1.0, -1.0]])
    one = compose_program(C, W)
    two = compose_program(C, np.vstack([W, W]))
    assert np.abs(two - one).max() <= GAMMA * np.log(2) + 1e-12


def test_compose_shape_error(rng):
    with pytest.raises(ReasonerError):
        compose_program(rng.random((2, 1, 3)), np.zeros((1, 3)))


def test_step_examples(sq, sq_lang):
    cp, kp = sq
    crisp = _valuation(cp, **{"in(obj1,img)": 1.0, "shape(obj1,square)": 1.0})
    out = cp.step(crisp)
    assert out[0, kp] >= 0.99
    assert out[0, cp.table.index_of(parse_atom("in(obj1,img)", sq_lang))] >= 0.99
    assert out[0, 1] >= 0.99 and out[0, 0] == 0

    lang = parse_language("datatype t\nconstant a : t attribute\npred q/1[t]\n")
    q = parse_atom("q(a)", lang)
    fact = compile_program(lang, [parse_clause("q(a).", lang)], [q])
    V = np.zeros((1, 3))
    V[0, 1] = 1
    assert fact.step(V)[0, 2] >= 0.99


def test_step_fixed_point():
    lang = parse_language("datatype t\nconstant a : t attribute\npred p/1[t]\npred q/1[t]\n")
    cp = compile_program(lang, [parse_clause("q(X):-p(X).", lang)], [parse_atom("q(a)", lang)])
    V = np.array([[0.0, 1.0, 0.6, 0.6]])
    # r(V) reproduces q = p, so amalgamating changes q by at most gamma*log 2
    assert abs(cp.step(V)[0, 3] - 0.6) <= GAMMA * np.log(2) + 1e-12


def test_zero_steps_is_identity(sq, rng):
    cp, _ = sq
    V = rng.random((2, len(cp.table)))
    V[:, 0], V[:, 1] = 0, 1
    np.testing.assert_array_equal(cp.infer(V, steps=0), V)


def test_stratification_depths():
    assert stratification_depth(load_program("twopairs").clauses) == 2
    assert stratification_depth(load_program("nine-circles").clauses) == 2
    assert stratification_depth(load_program("clevr-hans7").clauses) == 2
    lang = parse_language("datatype t\nconstant a : t attribute\npred p/1[t]\n")
    with pytest.raises(ReasonerError, match="recursive"):
        stratification_depth([parse_clause("p(X):-p(X).", lang)])


@pytest.fixture(scope="module")
def twopairs_scenes():
    return gen_kandinsky("twopairs", 1, 1, 3)


def test_twopairs_positive_and_negative(twopairs_scenes):
    program = load_program("twopairs")
    cp = compile_bundle(program)
    assert cp.steps == 2
    scenes = sorted(twopairs_scenes, key=lambda s: -s.label)
    Z = scene_to_tensor(scenes, program.n_objects)
    pred = cp.predict(infer_tensor(cp, Z, program, None))
    assert pred.probabilities[0, 0] >= 0.99
    assert pred.labels.tolist() == [1, 0]
    singles = [cp.predict(infer_tensor(cp, Z[b:b + 1], program, None)).labels[0] for b in range(2)]
    assert singles == [1, 0]


def test_more_steps_are_stable_on_positive_scene(twopairs_scenes):
    program = load_program("twopairs")
    cp = compile_bundle(program)
    pos = [s for s in twopairs_scenes if s.label == 1]
    Z = scene_to_tensor(pos, program.n_objects)
    col = cp.table.index_of(program.targets[0])
    v2 = infer_tensor(cp, Z, program, None)[:, col]
    v10 = infer_tensor(compile_bundle(program, steps=10), Z, program, None)[:, col]
    assert np.abs(v10 - v2).max() <= 0.01


def test_predict_examples(sq_lang):
    from softchain.grounding import GroundAtomTable

    lang = parse_language("datatype image\nconstant img : image input\npred kp1/1[image]\npred kp2/1[image]\n"
                          "pred kp3/1[image]\n")
    table = GroundAtomTable(enumerate_ground_atoms(lang).atoms[2:])
    targets = [parse_atom(f"kp{k}(img)", lang) for k in (1, 2, 3)]
    V = np.array([[0, 1, 0.1, 0.9, 0.2], [0, 1, 0.5, 0.5, 0.2]])
    assert predict(V, table, targets).labels.tolist() == [2, 1]
    assert predict(np.array([[0, 1, 0.98, 0, 0]]), table, targets[:1]).labels.tolist() == [1]
    with pytest.raises(ReasonerError):
        predict(V, table, [])


def test_row_shift_invariance(fitted_params):
    program = load_program("closeby")
    cp = compile_bundle(program)
    rng = np.random.default_rng(1)
    W = rng.normal(size=cp.weights.shape)
    Z = add_noise(scene_to_tensor(gen_kandinsky("closeby", 2, 2, 0), program.n_objects), 0.3, 0, program.layout)
    base = target_probabilities(cp, program, Z, W, fitted_params)
    shifted = W.copy()
    shifted[0] += 7.5
    assert np.abs(target_probabilities(cp, program, Z, shifted, fitted_params) - base).max() <= 1e-12
    assert np.abs(shift_derivative(cp, program, Z, W, fitted_params)).max() <= 1e-10


def test_amalgamation_lower_bound(rng):
    program = load_program("twopairs")
    cp = compile_bundle(program)
    V0 = rng.random((4, len(cp.table)))
    V0[:, 0], V0[:, 1] = 0, 1
    assert (cp.infer(V0) >= V0 - 0.01).all()


@pytest.mark.parametrize("scope", ["global", "row"])
def test_monotone_up_to_normalization(rng, scope):
    program = load_program("twopairs")
    cp = compile_bundle(program, scope=scope)
    for _ in range(20):
        V0 = rng.random((3, len(cp.table))) * (rng.random((3, len(cp.table))) < 0.5)
        V0[:, 0], V0[:, 1] = 0, 1
        V1 = V0.copy()
        j = rng.integers(2, len(cp.table))
        V1[:, j] = np.minimum(1.0, V1[:, j] + rng.random())
        # rescaling by a larger maximum can only cost gamma*log(k) relative to the unscaled value
        assert (cp.infer(V1) - cp.infer(V0)).min() >= -GAMMA * np.log(2) - 1e-12
        # the unnormalized clause scores themselves are exactly monotone
        for i in range(len(cp.clauses)):
            assert (cp.clause_raw(V1, i) - cp.clause_raw(V0, i)).min() >= -1e-15


def test_batch_permutation_equivariance(rng):
    program = load_program("twopairs")
    cp = compile_bundle(program, scope="row")
    V = rng.random((5, len(cp.table)))
    perm = rng.permutation(5)
    np.testing.assert_allclose(cp.infer(V)[perm], cp.infer(V[perm]), atol=1e-15)
    rows = np.vstack([cp.infer(V[b:b + 1]) for b in range(5)])
    np.testing.assert_allclose(cp.infer(V), rows, atol=1e-15)


def test_weight_validation(sq_lang, sq_clause):
    kp = parse_atom("kp(img)", sq_lang)
    with pytest.raises(ReasonerError):
        compile_program(sq_lang, [sq_clause], [kp], weights=np.zeros((1, 2)))
    with pytest.raises(ReasonerError):
        compile_program(sq_lang, [sq_clause], [kp], weights=np.array([[np.nan]]))
    with pytest.raises(ReasonerError):
        compile_program(sq_lang, [sq_clause], [kp], gamma=0)
    with pytest.raises(ReasonerError):
        compile_program(sq_lang, [], [kp])


def test_dual_weights_through_infer(sq):
    cp, kp = sq
    V = np.array([[0, 1, 0, 0.7, 0.2, 0.9, 0.4]])
    W = np.array([[0.3]])
    out = cp.infer(V, weights=D.Dual(W, np.ones_like(W)))
    assert D.tangent(out)[0, kp] == pytest.approx(0.0, abs=1e-12)  # single clause: softmax is constant
