from fractions import Fraction as F

import numpy as np
import pytest

from qpflab.errors import NotSameMeasure, PreconditionError
from qpflab.geometry import image_curve
from qpflab.measure import (build_mu, build_pi, find_conjugating_rotation,
                            kolmogorov_distance, preimage_interval)
from qpflab.plgraph import PLGraph
from qpflab.systems import QpfSystem
from qpflab.weights import make_weights

R = QpfSystem.translation()


def default_family(half_width=8):
    w = make_weights("quadratic", k=4, half_width=half_width, epsilon=F(1, 2))
    fam = {n: image_curve(R, PLGraph.constant(F(1, 5)), n)
           for n in range(-half_width, half_width + 1)}
    return w, build_mu(fam, weights=w)


def test_single_atom_cdf_jump():
    mu = build_mu({0: PLGraph.constant(F(0))}, masses={0: F(1, 2)}, beta=F(1, 2))
    fm = mu.fiber(F(1, 3))
    assert fm.total_mass() == 1
    cdf = fm.cdf(np.array([0.0, 0.5, 0.99]))
    assert abs(cdf[0] - 0.5) < 1e-15  # jump at the atom
    assert abs(cdf[1] - 0.75) < 1e-15


def test_family_mass_one_everywhere():
    _, mu = default_family()
    for g in range(16):
        assert mu.fiber(F(g, 16)).total_mass() == 1


def test_zero_curves_is_lebesgue():
    mu = build_mu({}, masses={}, beta=F(1))
    fm = mu.fiber(F(1, 7))
    assert fm.total_mass() == 1 and not fm.atoms


def test_quantile_closed_form_half_atom():
    mu = build_mu({0: PLGraph.constant(F(0))}, masses={0: F(1, 2)}, beta=F(1, 2))
    pi = build_pi(mu, 0)
    fp = pi.fiber(F(1, 3))
    xs = np.array([0.1, 0.3, 0.5, 0.6, 0.75, 0.9])
    expected = np.array([0.0, 0.0, 0.0, 0.2, 0.5, 0.8])  # 0 on [0,1/2], 2x-1 after
    assert np.allclose(fp.map_array(xs), expected, atol=1e-12)


def test_preimage_intervals():
    w, mu = default_family()
    pi = build_pi(mu, 0)
    theta = F(1, 3)
    pos = mu.curves[5].circle_value(theta)
    lo, hi = preimage_interval(pi, theta, pos)
    assert hi - lo == w.a(5)  # atom preimage width equals the atom mass exactly
    plo, phi_ = preimage_interval(pi, theta, F(1, 100))
    assert plo == phi_  # off-atom preimages are single points


def test_quantile_cdf_inversion_property():
    _, mu = default_family(half_width=4)
    rng = np.random.default_rng(11)
    for g in range(4):
        fm = mu.fiber(F(g, 4))
        us = rng.random(2500)
        xs = rng.random(2500)
        q = fm.quantile(us)
        assert np.all(fm.cdf(q) >= us - 1e-9)
        c = fm.cdf(xs)
        assert np.all(fm.quantile(c) <= xs + 1e-9)


def test_pushforward_kolmogorov():
    _, mu = default_family()
    pi = build_pi(mu, 0)
    rng = np.random.default_rng(7)
    fp, fm = pi.fiber(F(1, 5)), mu.fiber(F(1, 5))
    ks = kolmogorov_distance(fm, fp.map_array(rng.random(50000)))
    assert ks <= 0.01


def test_conjugating_rotation_identity_and_anchor():
    _, mu = default_family(half_width=4)
    pi0 = build_pi(mu, 0)
    alphas, residual = find_conjugating_rotation(pi0, pi0, grid=32)
    assert residual == 0 and np.allclose(alphas, 0.0)
    pi1 = build_pi(mu, 1)
    alphas, residual = find_conjugating_rotation(pi0, pi1, grid=32)
    assert residual <= 1e-12
    # verified: shifting the source by alpha aligns the fiber maps
    theta = F(1, 8)
    xs = np.linspace(0, 1, 64, endpoint=False)
    lhs = pi0.fiber(theta).map_array(xs)
    rhs = pi1.fiber(theta).map_array((xs + alphas[4]) % 1.0)
    d = np.abs(lhs - rhs)
    assert float(np.minimum(d, 1 - d).max()) <= 1e-9


def test_conjugating_rotation_rejects_different_measure():
    _, mu = default_family(half_width=4)
    w2 = make_weights("quadratic", k=5, half_width=4, epsilon=F(1, 2))
    fam = {n: image_curve(R, PLGraph.constant(F(1, 5)), n) for n in range(-4, 5)}
    mu2 = build_mu(fam, weights=w2)
    with pytest.raises(NotSameMeasure):
        find_conjugating_rotation(build_pi(mu, 0), build_pi(mu2, 0), grid=8)


def test_flatness_precondition_gate():
    tent = PLGraph.tent(F(1, 5), F(7, 10))
    fam = {0: tent, 1: image_curve(R, tent, 1)}
    with pytest.raises(PreconditionError):
        build_mu(fam, masses={0: F(1, 8), 1: F(1, 8)}, beta=F(3, 4))
    mu = build_mu(fam, masses={0: F(1, 8), 1: F(1, 8)}, beta=F(3, 4), waive_flatness=True)
    assert mu.beta == F(3, 4)
