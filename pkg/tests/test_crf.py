from __future__ import annotations

import math

import numpy as np
import torch
from hypothesis import given, settings, strategies as st

from helpers import enumerate_paths, path_score, random_instance
from rufes.tagger import crf_log_partition, crf_marginals, crf_path_score, viterbi_decode


def test_closed_forms():
    em = np.array([[1.0, 2.0]])
    z = crf_log_partition(torch.tensor(em), torch.zeros(2, 2, dtype=torch.float64),
                          torch.zeros(2, dtype=torch.float64), torch.zeros(2, dtype=torch.float64))
    assert math.isclose(float(z), math.log(math.e + math.e ** 2), rel_tol=1e-14)
    for n, k in [(1, 3), (4, 2), (5, 4)]:
        zeros = torch.zeros(n, k, dtype=torch.float64)
        z = crf_log_partition(zeros, torch.zeros(k, k, dtype=torch.float64),
                              torch.zeros(k, dtype=torch.float64), torch.zeros(k, dtype=torch.float64))
        assert math.isclose(float(z), n * math.log(k), rel_tol=1e-14)


def test_viterbi_simple_cases():
    em = np.array([[5.0, 0, 0], [0, 0, 5.0], [0, 5.0, 0]])
    zero3, zero33 = np.zeros(3), np.zeros((3, 3))
    assert viterbi_decode(em, zero33, zero3, zero3)[0] == [0, 2, 1]
    path, score = viterbi_decode(np.array([[1.0, 2.0]]), np.zeros((2, 2)), np.array([3.0, 0]), np.zeros(2))
    assert path == [0] and score == 4.0


def test_viterbi_ties_lowest_index():
    path, _ = viterbi_decode(np.zeros((4, 3)), np.zeros((3, 3)), np.zeros(3), np.zeros(3))
    assert path == [0, 0, 0, 0]


def test_enumeration_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(600):
        em, trans, start, end = random_instance(rng)
        length, k = em.shape
        scores = {p: path_score(em, trans, start, end, p) for p in enumerate_paths(length, k)}
        best = max(scores.values())
        path, score = viterbi_decode(em, trans, start, end)
        assert score == best
        assert scores[tuple(path)] == best
        brute_z = float(np.logaddexp.reduce(np.array(list(scores.values()))))
        z = float(crf_log_partition(torch.tensor(em), torch.tensor(trans), torch.tensor(start), torch.tensor(end)))
        assert abs(z - brute_z) <= 1e-8 * abs(brute_z) + 1e-300


def test_marginals_match_enumeration():
    rng = np.random.default_rng(5)
    for _ in range(100):
        em, trans, start, end = random_instance(rng)
        length, k = em.shape
        paths = list(enumerate_paths(length, k))
        w = np.array([path_score(em, trans, start, end, p) for p in paths])
        w = np.exp(w - np.logaddexp.reduce(w))
        brute = np.zeros((length, k))
        for p, weight in zip(paths, w):
            brute[np.arange(length), list(p)] += weight
        np.testing.assert_allclose(crf_marginals(em, trans, start, end), brute, atol=1e-12)


def test_gold_path_probability_in_unit_interval():
    rng = np.random.default_rng(8)
    for _ in range(200):
        em, trans, start, end = (torch.tensor(a) for a in random_instance(rng))
        tags = torch.as_tensor(rng.integers(0, em.shape[1], em.shape[0]))
        logp = float(crf_path_score(em, tags, trans, start, end) - crf_log_partition(em, trans, start, end))
        assert logp <= 1e-12
        assert math.exp(logp) > 0


def test_path_score_matches_reference():
    rng = np.random.default_rng(9)
    for _ in range(100):
        em, trans, start, end = random_instance(rng)
        tags = rng.integers(0, em.shape[1], em.shape[0])
        got = float(crf_path_score(*(torch.tensor(a) for a in (em, tags, trans, start, end))))
        assert math.isclose(got, path_score(em, trans, start, end, tags), rel_tol=1e-12, abs_tol=1e-12)


def test_batched_masked_equals_individual():
    rng = np.random.default_rng(10)
    k, lengths = 3, [1, 4, 2, 5]
    width = max(lengths)
    insts = [random_instance(rng, n, k) for n in lengths]
    _, trans, start, end = (torch.tensor(a) for a in insts[0])
    em = torch.zeros(len(lengths), width, k, dtype=torch.float64)
    mask = torch.zeros(len(lengths), width, dtype=torch.bool)
    tags = torch.zeros(len(lengths), width, dtype=torch.long)
    for b, (inst, n) in enumerate(zip(insts, lengths)):
        em[b, :n] = torch.tensor(inst[0])
        em[b, n:] = 99.0  # padding must not leak
        mask[b, :n] = True
        tags[b, :n] = torch.as_tensor(rng.integers(0, k, n))
    z = crf_log_partition(em, trans, start, end, mask)
    s = crf_path_score(em, tags, trans, start, end, mask)
    for b, n in enumerate(lengths):
        assert torch.allclose(z[b], crf_log_partition(em[b, :n], trans, start, end), rtol=1e-13)
        assert torch.allclose(s[b], crf_path_score(em[b, :n], tags[b, :n], trans, start, end), rtol=1e-13)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-50, 50))
def test_shift_invariance(seed, c):
    rng = np.random.default_rng(seed)
    em, trans, start, end = random_instance(rng)
    pos = int(rng.integers(em.shape[0]))
    shifted = em.copy()
    shifted[pos] += c
    t = lambda a: torch.tensor(a)
    z0 = float(crf_log_partition(t(em), t(trans), t(start), t(end)))
    z1 = float(crf_log_partition(t(shifted), t(trans), t(start), t(end)))
    assert math.isclose(z1, z0 + c, rel_tol=1e-12, abs_tol=1e-9)
    tags = t(rng.integers(0, em.shape[1], em.shape[0]))
    s0 = float(crf_path_score(t(em), tags, t(trans), t(start), t(end)))
    s1 = float(crf_path_score(t(shifted), tags, t(trans), t(start), t(end)))
    assert math.isclose(s1, s0 + c, rel_tol=1e-12, abs_tol=1e-9)
    p0, v0 = viterbi_decode(em, trans, start, end)
    p1, v1 = viterbi_decode(shifted, trans, start, end)
    assert math.isclose(v1, v0 + c, rel_tol=1e-12, abs_tol=1e-9)
    scores = [path_score(em, trans, start, end, p) for p in (p0, p1)]
    assert math.isclose(scores[0], scores[1], rel_tol=1e-12, abs_tol=1e-9)
