import numpy as np
import pytest

from softchain.datagen import (
    CLEVR_TEMPLATES,
    GenerationError,
    add_noise,
    gen_clevr_hans,
    gen_concept_set,
    gen_kandinsky,
)
from softchain.oracle import label_scene
from softchain.programs import KANDINSKY_PATTERNS, load_program
from softchain.scenes import (
    CLOSEBY_MAX,
    ONLINE_MAX,
    ClevrObject,
    Scene,
    SceneError,
    read_scenes,
    scene_to_tensor,
    tls_residual,
    write_scenes,
)
from softchain.valuation import CLEVR19, KANDINSKY11


def _oracle(program, scene):
    return label_scene(scene, program.clauses, program.lang, program.targets, program.background)


def test_counts_and_label_faithfulness():
    program = load_program("twopairs")
    scenes = gen_kandinsky("twopairs", 10, 10, 7)
    assert len(scenes) == 20 and sum(s.label for s in scenes) == 10
    for s in scenes:
        assert _oracle(program, s) == s.label


@pytest.mark.parametrize("pattern", KANDINSKY_PATTERNS)
def test_every_pattern_is_oracle_labelled(pattern):
    program = load_program(pattern)
    scenes = gen_kandinsky(pattern, 3, 3, 11)
    assert all(_oracle(program, s) == s.label for s in scenes)
    assert all(len(s.objects) <= program.n_objects for s in scenes)


def test_nine_circles_colors():
    for s in gen_kandinsky("nine-circles", 5, 0, 2):
        colors = [o.color for o in s.objects]
        assert sorted(colors.count(c) for c in ("red", "blue", "yellow")) == [3, 3, 3]


def test_clevr_templates():
    program = load_program("clevr-hans3")
    scenes = gen_clevr_hans(3, 4, 0)
    assert len(scenes) == 12
    for s in scenes:
        assert _oracle(program, s) == s.label
        if s.label == 1:
            kinds = {(o.size, o.shape) for o in s.objects}
            assert {("large", "cube"), ("large", "cylinder")} <= kinds
    hans7 = load_program("clevr-hans7")
    for s in gen_clevr_hans(7, 2, 1):
        assert _oracle(hans7, s) == s.label
        assert 4 <= len(s.objects) <= 6
        if s.label == 5:
            left = [o for o in s.objects if o.shape == "sphere" and o.x < 0.5]
            assert len(left) >= 3
    assert set(CLEVR_TEMPLATES[7]) == set(range(1, 8))


def test_empty_requests():
    assert gen_clevr_hans(3, 0, 0) == []
    assert gen_kandinsky("closeby", 0, 0, 0) == []
    X, y = gen_concept_set("front", 0, 0)
    assert X.shape == (0, 2, 19) and y.shape == (0,)


def test_bad_requests():
    with pytest.raises(GenerationError):
        gen_kandinsky("fourpairs", 1, 1, 0)
    with pytest.raises(GenerationError):
        gen_kandinsky("closeby", -1, 1, 0)
    with pytest.raises(GenerationError):
        gen_clevr_hans(5, 1, 0)
    with pytest.raises(GenerationError):
        gen_concept_set("bigger", 1, 0)


def test_determinism(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    write_scenes(gen_kandinsky("red-triangle", 5, 5, 9), a)
    write_scenes(gen_kandinsky("red-triangle", 5, 5, 9), b)
    assert a.read_bytes() == b.read_bytes()
    write_scenes(gen_kandinsky("red-triangle", 5, 5, 10), b)
    assert a.read_bytes() != b.read_bytes()


def test_scene_json_round_trip(tmp_path):
    scenes = gen_clevr_hans(3, 1, 0)
    path = tmp_path / "s.jsonl"
    write_scenes(scenes, path)
    assert read_scenes(path) == scenes
    line = path.read_text().splitlines()[0]
    assert line.startswith('{"dataset": "clevr", "label": ')
    assert '"shape"' in line and '"material"' in line
    with pytest.raises(SceneError):
        Scene.from_json('{"dataset": "clevr", "objects": []}')


def test_scene_to_tensor():
    obj = ClevrObject("sphere", "large", "metal", "cyan", 0.2, 0.3, 0.4)
    Z = scene_to_tensor([Scene("clevr", [obj], 1)], 3)
    expected = np.zeros(19)
    expected[[0, 4, 7, 10, 11]] = 1
    expected[1:4] = [0.2, 0.3, 0.4]
    np.testing.assert_allclose(Z[0, 0], expected)
    assert (Z[0, 1:] == 0).all()
    with pytest.raises(SceneError):
        scene_to_tensor([Scene("clevr", [obj] * 4, 1)], 3)


def test_kandinsky_red_square_row():
    from softchain.scenes import KandinskyObject, object_row

    row = object_row(KandinskyObject("square", "red", 0.5, 0.5, 0.1), KANDINSKY11)
    np.testing.assert_allclose(row, [0.45, 0.45, 0.55, 0.55, 1, 0, 0, 1, 0, 0, 1])


@pytest.mark.parametrize("layout, scenes", [
    (KANDINSKY11, lambda: gen_kandinsky("twopairs", 5, 5, 0)),
    (CLEVR19, lambda: gen_clevr_hans(7, 2, 0)),
])
def test_noise(layout, scenes):
    Z = scene_to_tensor(scenes(), 6 if layout is CLEVR19 else 4)
    np.testing.assert_array_equal(add_noise(Z, 0.0, 3, layout), Z)
    N = add_noise(Z, 0.1, 3, layout)
    np.testing.assert_array_equal(N, add_noise(Z, 0.1, 3, layout))
    for dt in layout.attributes:
        sums = N[:, :, layout.attribute_slice(dt)].sum(axis=-1)
        assert (sums <= 1 + 1e-9).all()
    assert N.min() >= 0 and N.max() <= 1
    absent = Z[:, :, layout.objectness] == 0
    np.testing.assert_array_equal(N[absent], Z[absent])
    with pytest.raises(SceneError):
        add_noise(Z, 1.0, 0, layout)


def test_concept_sets():
    X, y = gen_concept_set("closeby", 1000, 3)
    assert X.shape == (2000, 2, 11) and y.sum() == 1000
    c = (X[:, :, 0:2] + X[:, :, 2:4]) / 2
    d = np.linalg.norm(c[:, 0] - c[:, 1], axis=1)
    assert (d[y == 1] <= CLOSEBY_MAX + 1e-9).all()
    X, y = gen_concept_set("online", 50, 0)
    centers = (X[:, :, 0:2] + X[:, :, 2:4]) / 2
    assert (tls_residual(centers[y == 1]) <= ONLINE_MAX + 1e-9).all()
    X, y = gen_concept_set("leftside", 50, 0)
    assert (X[y == 1, 0, 1] <= 0.4).all() and (X[y == 0, 0, 1] >= 0.6).all()
    a, _ = gen_concept_set("front", 20, 5)
    b, _ = gen_concept_set("front", 20, 5)
    np.testing.assert_array_equal(a, b)
