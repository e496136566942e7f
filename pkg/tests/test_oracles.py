"""Loss values against straight-line scalar implementations.

The helpers here use only `math` on Python lists so they share no code with the
tensor implementations under test.
"""

import math

import numpy as np
import pytest

from tripletkd.autodiff.tensor import Tensor
from tripletkd.losses import (
    BatchOutputs,
    bkd_loss,
    combined_loss,
    contrastive_loss,
    cross_entropy_loss,
    hkd_loss,
    huber,
    kl_divergence,
    psi_angle,
    psi_distance,
    rkd_a_loss,
    rkd_d_loss,
    rkd_da_loss,
    triplet_kd_loss,
    triplet_metric_loss,
)
from tripletkd.nn.layers import softmax
from tripletkd.types.config import LossSpec
from tripletkd.types.models import KDTripletSet, LossKind, PairSet, TripletSet

TOL = 1e-9


def _dist(a, b):
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))


def _softmax(row, temperature=1.0):
    scaled = [v / temperature for v in row]
    top = max(scaled)
    exps = [math.exp(v - top) for v in scaled]
    total = sum(exps)
    return [e / total for e in exps]


def _huber(p, q):
    d = abs(p - q)
    return 0.5 * d * d if d <= 1.0 else d - 0.5


def _psi(points, pairs):
    d = [_dist(points[i], points[j]) for i, j in pairs]
    total = sum(d)
    return [x / total for x in d]


def _cos(i, j, k):
    u = [a - b for a, b in zip(i, j)]
    v = [a - b for a, b in zip(k, j)]
    return sum(a * b for a, b in zip(u, v)) / (_dist(i, j) * _dist(k, j))


def _rkd_d(t, s, pairs):
    return sum(_huber(a, b) for a, b in zip(_psi(s, pairs), _psi(t, pairs)))


def _rkd_a(t, s, triplets):
    return sum(
        _huber(_cos(s[i], s[j], s[k]), _cos(t[i], t[j], t[k])) for i, j, k in triplets
    )


def test_contrastive_similar_pair():
    emb = np.array([[0.0, 0.0], [2.0, 0.0]])
    pairs = PairSet(index=np.array([[0, 1]]), labels=np.array([1.0]))
    assert contrastive_loss(pairs, emb, margin=1.0).item() == pytest.approx(2.0, abs=TOL)


def test_contrastive_dissimilar_pair_inside_margin():
    emb = np.array([[0.0, 0.0], [0.5, 0.0]])
    pairs = PairSet(index=np.array([[0, 1]]), labels=np.array([0.0]))
    expected = 0.5 * max(1.0 - _dist(emb[0], emb[1]), 0.0) ** 2
    assert contrastive_loss(pairs, emb, margin=1.0).item() == pytest.approx(expected, abs=TOL)


def test_triplet_metric():
    emb = np.array([[0.0, 0.0], [1.0, 0.0], [math.sqrt(1.5), 0.0]])
    triplets = TripletSet(index=np.array([[0, 1, 2]]))
    assert triplet_metric_loss(triplets, emb, margin=1.0).item() == pytest.approx(0.5, abs=TOL)


def test_bkd():
    assert bkd_loss(np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]])).item() == pytest.approx(
        1.0, abs=TOL
    )


def test_kl_single_term():
    value = kl_divergence(np.array([1.0, 0.0]), np.array([0.5, 0.5])).item()
    assert value == pytest.approx(math.log(2.0), abs=TOL)


@pytest.mark.parametrize("temperature", [1.0, 4.0])
def test_hkd(temperature):
    t, s = [2.0, 0.0], [0.0, 2.0]
    p, q = _softmax(t, temperature), _softmax(s, temperature)
    expected = sum(a * (math.log(a) - math.log(b)) for a, b in zip(p, q))
    value = hkd_loss(np.array([t]), np.array([s]), temperature).item()
    assert value == pytest.approx(expected, abs=TOL)
    if temperature == 1.0:
        assert value == pytest.approx(2 * (0.8808 - 0.1192), abs=1e-4)


def test_softmax_two_classes():
    probs = softmax(Tensor(np.array([[2.0, 0.0]]))).data[0]
    np.testing.assert_allclose(probs, _softmax([2.0, 0.0]), atol=TOL)
    np.testing.assert_allclose(probs, [0.8808, 0.1192], atol=1e-4)


def test_psi_distance():
    points = [[0.0, 0.0], [1.0, 0.0], [0.0, 3.0]]
    pairs = [(0, 1), (0, 2)]
    value = psi_distance(PairSet(index=np.array(pairs)), np.array(points)).data
    np.testing.assert_allclose(value, _psi(points, pairs), atol=TOL)
    np.testing.assert_allclose(value, [0.25, 0.75], atol=TOL)


@pytest.mark.parametrize("p, q", [(3.0, 1.0), (1.0, 0.0), (0.2, 0.7), (-2.5, 0.0)])
def test_huber(p, q):
    assert huber(p, q).item() == pytest.approx(_huber(p, q), abs=TOL)


def test_huber_reference_values():
    assert huber(3.0, 1.0).item() == pytest.approx(1.5, abs=TOL)
    assert huber(1.0, 0.0).item() == pytest.approx(0.5, abs=TOL)


def test_rkd_d():
    teacher = [[0.0, 0.0], [1.0, 0.0], [0.0, 3.0]]
    student = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
    pairs = [(0, 1), (0, 2)]
    value = rkd_d_loss(PairSet(index=np.array(pairs)), np.array(teacher), np.array(student))
    assert value.item() == pytest.approx(_rkd_d(teacher, student, pairs), abs=TOL)
    assert value.item() == pytest.approx(0.0625, abs=TOL)


def test_psi_angle():
    value = psi_angle(np.array([1.0, 0.0]), np.array([0.0, 0.0]), np.array([1.0, 1.0])).item()
    assert value == pytest.approx(1 / math.sqrt(2), abs=TOL)


def test_rkd_a():
    teacher = [[1.0, 0.0], [0.0, 0.0], [2.0, 0.0]]
    student = [[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]]
    triplets = [(0, 1, 2)]
    value = rkd_a_loss(TripletSet(index=np.array(triplets)), np.array(teacher), np.array(student))
    assert value.item() == pytest.approx(_rkd_a(teacher, student, triplets), abs=TOL)
    assert value.item() == pytest.approx(0.5, abs=TOL)


def test_rkd_da_weights_both_terms():
    rng = np.random.default_rng(3)
    teacher, student = rng.normal(size=(5, 3)).tolist(), rng.normal(size=(5, 3)).tolist()
    pairs = [(0, 1), (1, 2), (2, 4), (0, 3)]
    triplets = [(0, 1, 2), (3, 2, 4), (4, 0, 1)]
    value = rkd_da_loss(
        PairSet(index=np.array(pairs)),
        TripletSet(index=np.array(triplets)),
        np.array(teacher),
        np.array(student),
        lambda_d=1.0,
        lambda_a=2.0,
    ).item()
    expected = _rkd_d(teacher, student, pairs) + 2.0 * _rkd_a(teacher, student, triplets)
    assert value == pytest.approx(expected, abs=TOL)
    assert 1.0 * 0.1 + 2.0 * 0.2 == pytest.approx(0.5, abs=TOL)


def test_triplet_kd_margin_active():
    t = np.array([[0.0, 0.0], [5.0, 5.0]])
    s = np.array([[1.0, 0.0], [1.0, 1.0]])
    omega = KDTripletSet(index=np.array([[0, 1]]), per_anchor=np.array([1, 0]))
    assert triplet_kd_loss(omega, t, s, margin=5.0).item() == pytest.approx(4.0, abs=TOL)


def test_triplet_kd_matching_anchor():
    t = np.array([[0.0, 0.0], [5.0, 5.0]])
    s = np.array([[0.0, 0.0], [math.sqrt(3.0), 0.0]])
    omega = KDTripletSet(index=np.array([[0, 1]]), per_anchor=np.array([1, 0]))
    assert triplet_kd_loss(omega, t, s, margin=5.0).item() == pytest.approx(2.0, abs=TOL)


def test_cross_entropy():
    value = cross_entropy_loss(np.array([[2.0, 0.0]]), np.array([0])).item()
    assert value == pytest.approx(-math.log(_softmax([2.0, 0.0])[0]), abs=TOL)
    assert value == pytest.approx(0.1269, abs=1e-4)


def test_combined_weighting():
    t = np.array([[2.0, 0.0], [0.0, 1.0]])
    s = np.array([[0.5, 0.5], [1.0, 0.0]])
    labels = np.array([0, 1])
    spec = LossSpec(weights={LossKind.BKD: 2.0, LossKind.HKD: 16.0}, temperature=4.0)
    out = combined_loss(spec, BatchOutputs(student=Tensor(s), labels=labels, teacher=Tensor(t)))

    hard = sum(-math.log(_softmax(row)[y]) for row, y in zip(s.tolist(), labels)) / 2
    rows = list(zip(t.tolist(), s.tolist()))
    bkd = 0.5 * sum((a - b) ** 2 for ra, rb in rows for a, b in zip(ra, rb))
    hkd = 0.0
    for ra, rb in rows:
        p, q = _softmax(ra, 4.0), _softmax(rb, 4.0)
        hkd += sum(a * (math.log(a) - math.log(b)) for a, b in zip(p, q))
    assert out.hard.item() == pytest.approx(hard, abs=TOL)
    assert out.values() == pytest.approx({LossKind.BKD: bkd, LossKind.HKD: hkd}, abs=TOL)
    assert out.total.item() == pytest.approx(hard + 2.0 * bkd + 16.0 * hkd, abs=TOL)
    assert 0.5 + 2.0 * 1.0 + 16.0 * 2.0 == pytest.approx(34.5, abs=TOL)
