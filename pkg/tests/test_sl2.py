import math

import numpy as np
import pytest

from qpflab.errors import DegenerateTriple
from qpflab.minimal import approximate_minimal_set
from qpflab.sl2 import (Cocycle, Mat2, cocycle_qpf, lyapunov, minimal_fiber_cardinality,
                        projective_action, triple_map)


def test_projective_action_basics():
    assert abs(projective_action(Mat2.identity(), 0.37) - 0.37) < 1e-12
    assert abs(projective_action(Mat2.rotation(0.25), 0.1) - 0.35) < 1e-12
    m = Mat2.diagonal(2.0)
    assert projective_action(m, 0.0) == 0.0
    assert abs(projective_action(m, 0.5) - 0.5) < 1e-12
    # 0 attracts, 1/2 repels
    assert abs(projective_action(m, 0.1)) < 0.1
    assert abs(projective_action(m, 0.45) - 0.5) > 0.05


def test_homomorphism_property():
    rng = np.random.default_rng(0)
    for _ in range(200):
        a = Mat2.rotation(float(rng.random()))
        b = Mat2.diagonal(0.5 + 2 * float(rng.random()))
        x = float(rng.random())
        lhs = projective_action(a @ b, x)
        rhs = projective_action(a, projective_action(b, x))
        d = abs(lhs - rhs) % 1.0
        assert min(d, 1 - d) < 1e-12


def test_orientation_and_degree_one():
    rng = np.random.default_rng(1)
    for _ in range(50):
        m = (Mat2.rotation(float(rng.random())) @ Mat2.diagonal(0.3 + 3 * float(rng.random())))
        xs = np.linspace(0, 1, 64, endpoint=False)
        vals = np.array([projective_action(m, float(x)) for x in xs])
        lift = vals.copy()
        for i in range(1, len(lift)):
            while lift[i] < lift[i - 1] - 1e-12:
                lift[i] += 1.0
        assert lift[-1] - lift[0] < 1.0 + 1e-9


def test_unimodular_check():
    Mat2(1.0, 0.0, 0.0, 1.0).require_unimodular()
    with pytest.raises(Exception):
        Mat2(2.0, 0.0, 0.0, 1.0).require_unimodular()


def test_lyapunov_diagonal_and_rotation():
    est = lyapunov(Cocycle.diagonal(2.0), 10**5)
    assert abs(est.value - math.log(2)) < 1e-6
    est = lyapunov(Cocycle.rotation(0.3), 10**5)
    assert abs(est.value) < 1e-4
    assert est.det_drift <= 1e-9


def test_lyapunov_harper_recorded():
    a = lyapunov(Cocycle.harper(0.0, 2.0), 10**5, theta0=0.0)
    b = lyapunov(Cocycle.harper(0.0, 2.0), 10**5, theta0=0.37)
    assert a.value > 0 and b.value > 0
    assert abs(a.value - b.value) < 0.01


def test_cocycle_qpf_feeds_minimal_sets():
    system = cocycle_qpf(Cocycle.diagonal(2.0))
    fs = approximate_minimal_set(system, burnin=1000, iters=50000, fiber_grid=128,
                                 vertical_grid=128, bins=128, seed=0)
    # attracting constant graph at x = 0: every occupied fiber hugs bin 0
    rows = np.flatnonzero(fs.bins.any(axis=1))
    for i in rows:
        occ = fs.fiber_occupancy(int(i))
        assert all(min(j, 128 - j) <= 1 for j in occ)


def test_cardinality_verdicts():
    rep = minimal_fiber_cardinality(Cocycle.diagonal(2.0), fiber_grid=256,
                                    vertical_grid=256, bins=256, iters=10**5,
                                    burnin=5000, seed=0)
    assert rep.modal_count == 1 and rep.modal_fraction == 1.0
    assert rep.verdict == "(p,q)-graph-like"  # a continuous (1,1)-graph
    rep2 = minimal_fiber_cardinality(Cocycle.rotation(0.5), fiber_grid=256,
                                     vertical_grid=256, bins=256, iters=10**5,
                                     burnin=5000, seed=0)
    assert rep2.modal_count == 2 and rep2.modal_fraction >= 0.99
    rep3 = minimal_fiber_cardinality(Cocycle.rotation(math.sqrt(2) / 3), fiber_grid=256,
                                     vertical_grid=256, bins=256, iters=10**6,
                                     burnin=5000, seed=0)
    assert rep3.verdict == "whole-torus"


def test_cluster_tolerance_precondition():
    with pytest.raises(Exception):
        minimal_fiber_cardinality(Cocycle.diagonal(2.0), cluster_tol=1)


def test_triple_map_identity_and_example():
    m = triple_map((0.0, 0.25, 0.5), (0.0, 0.25, 0.5))
    for u in (0.0, 0.25, 0.5, 0.7):
        d = abs(projective_action(m, u) - u) % 1.0
        assert min(d, 1 - d) < 1e-10
    m2 = triple_map((0.0, 0.25, 0.5), (0.0, 0.375, 0.5))
    assert abs(m2.det() - 1.0) < 1e-12
    for u, v in zip((0.0, 0.25, 0.5), (0.0, 0.375, 0.5)):
        d = abs(projective_action(m2, u) - v) % 1.0
        assert min(d, 1 - d) < 1e-10


def test_triple_map_round_trip_random():
    rng = np.random.default_rng(3)
    worst = 0.0
    done = 0
    while done < 30:
        a = float(rng.random())
        z = (a + 0.05 + 0.4 * float(rng.random())) % 1.0
        b = (z + 0.05 + 0.4 * float(rng.random())) % 1.0
        a2 = float(rng.random())
        z2 = (a2 + 0.05 + 0.4 * float(rng.random())) % 1.0
        b2 = (z2 + 0.05 + 0.4 * float(rng.random())) % 1.0
        try:
            m = triple_map((a, z, b), (a2, z2, b2))
        except DegenerateTriple:
            continue
        done += 1
        for u, v in zip((a, z, b), (a2, z2, b2)):
            d = abs(projective_action(m, u) - v) % 1.0
            worst = max(worst, min(d, 1 - d))
    assert worst <= 1e-9


def test_triple_map_degenerate():
    with pytest.raises(DegenerateTriple):
        triple_map((0.0, 0.0, 0.5), (0.0, 0.25, 0.5))
    with pytest.raises(DegenerateTriple):
        triple_map((0.0, 0.5, 0.25), (0.0, 0.25, 0.5))  # wrong cyclic order
