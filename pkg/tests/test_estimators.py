import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from softchain import ConceptClassifier, FactsConverter, ForwardChainingClassifier, ForwardReasoner
from softchain._validation import check_gamma, check_positive_int, resolve_program
from softchain.datagen import gen_clevr_hans, gen_kandinsky
from softchain.programs import load_program
from softchain.scenes import scene_to_tensor


def _data(pattern, n=5, seed=0):
    program = load_program(pattern)
    scenes = gen_kandinsky(pattern, n, n, seed)
    return scene_to_tensor(scenes, program.n_objects), np.array([s.label for s in scenes])


def test_params_and_clone():
    clf = ForwardChainingClassifier(program="closeby", gamma=0.02, steps=3)
    assert clf.get_params()["gamma"] == 0.02
    other = clone(clf).set_params(gamma=0.05)
    assert other.gamma == 0.05 and clf.gamma == 0.02


def test_classifier_fit_predict(fitted_params):
    X, y = _data("closeby")
    clf = ForwardChainingClassifier(program="closeby", concept_params=fitted_params, batch_size=3).fit(X, y)
    assert clf.classes_.tolist() == [0, 1]
    assert clf.score(X, y) == 1.0
    proba = clf.predict_proba(X)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0)


def test_classifier_fits_missing_concepts():
    X, y = _data("closeby", 3, 1)
    clf = ForwardChainingClassifier(program="closeby", n_concept_examples=300).fit(X, y)
    assert set(clf.concept_params_) == {"closeby"}
    assert clf.score(X, y) == 1.0


def test_multiclass_classifier(fitted_params):
    program = load_program("clevr-hans3")
    scenes = gen_clevr_hans(3, 3, 2)
    X = scene_to_tensor(scenes, program.n_objects)
    y = np.array([s.label for s in scenes])
    clf = ForwardChainingClassifier(program="clevr-hans3", concept_params=fitted_params).fit(X, y)
    assert clf.classes_.tolist() == [1, 2, 3]
    assert clf.predict_proba(X).shape == (9, 3)
    assert clf.score(X, y) == 1.0


def test_not_fitted():
    with pytest.raises(NotFittedError):
        ForwardChainingClassifier().predict(np.zeros((1, 4, 11)))
    with pytest.raises(NotFittedError):
        ForwardReasoner().transform(np.zeros((1, 88)))
    with pytest.raises(NotFittedError):
        ConceptClassifier().predict(np.zeros((1, 2, 11)))


def test_input_validation(fitted_params):
    clf = ForwardChainingClassifier(program="twopairs").fit()
    with pytest.raises(ValueError, match="D=11"):
        clf.predict(np.zeros((1, 4, 19)))
    with pytest.raises(ValueError, match="object slots"):
        clf.predict(np.zeros((1, 5, 11)))
    with pytest.raises(ValueError, match="gamma"):
        ForwardChainingClassifier(gamma=0).fit()
    with pytest.raises(ValueError, match="batch_size"):
        ForwardChainingClassifier(batch_size=0).fit()
    with pytest.raises(ValueError, match="unknown program"):
        ForwardChainingClassifier(program="nosuch").fit()


def test_converter_and_reasoner_pipeline(fitted_params):
    X, _ = _data("twopairs", 2)
    V0 = FactsConverter(program="twopairs").fit().transform(X)
    assert V0.shape == (4, 88)
    reasoner = ForwardReasoner(program="twopairs").fit()
    VT = reasoner.transform(V0)
    assert (VT >= V0 - 0.01).all()
    with pytest.raises(ValueError, match="B x 88"):
        reasoner.transform(np.zeros((1, 5)))
    with pytest.raises(ValueError, match="missing parameters"):
        FactsConverter(program="closeby").fit()


def test_program_from_directory(tmp_path):
    from importlib import resources

    src = resources.files("softchain") / "data" / "closeby"
    for name in ("language.txt", "rules.pl", "targets.txt"):
        (tmp_path / name).write_text((src / name).read_text())
    assert resolve_program(tmp_path).clauses == load_program("closeby").clauses


def test_validation_helpers():
    assert check_gamma(0.5) == 0.5
    for bad in (0, -1, float("nan"), float("inf"), "0.1", None):
        with pytest.raises(ValueError):
            check_gamma(bad)
    assert check_positive_int(None, "x", allow_none=True) is None
    assert check_positive_int(0, "x", minimum=0) == 0
    for bad in (0, 1.5, True, "3"):
        with pytest.raises(ValueError):
            check_positive_int(bad, "x")
