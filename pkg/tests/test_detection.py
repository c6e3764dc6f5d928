import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate as sci

from spatial_hom.detection import (BUCKET, RESOLVING, SINGLE_CAMERA, DetectorModel, SceneParams,
                                   beat_integrals, bin_probability, bucket_probs,
                                   check_resolution, joint_density, joint_density_kk)
from spatial_hom.errors import InvalidParameterError
from spatial_hom.wavepacket import envelope, make_gaussian

G1 = make_gaussian(1.0)
ENV1 = envelope(G1)


def scene(dx, nu, env=ENV1):
    return SceneParams(dx, nu, env)


# -- joint_density ----------------------------------------------------------

@pytest.mark.parametrize("dx", [0.0, 0.3, 4.0, -7.0])
def test_density_zero_for_a_at_dk_zero(dx):
    assert joint_density(0.0, "A", scene(dx, 1.0)) == 0.0


@pytest.mark.parametrize("x", ["A", "B"])
def test_density_without_interference(x):
    assert joint_density(0.0, x, scene(2.0, 0.0)) == pytest.approx(0.141047, abs=1e-6)


def test_density_at_beat_node():
    val = joint_density(math.pi / 8, "B", scene(4.0, 1.0))
    expected = 0.5 * math.exp(-(math.pi / 8) ** 2 / 4) / math.sqrt(4 * math.pi)
    assert val == pytest.approx(expected, rel=1e-14)
    assert val == pytest.approx(0.136, abs=5e-4)


def test_unknown_outcome():
    with pytest.raises(InvalidParameterError):
        joint_density(0.0, "C", scene(1.0, 1.0))


@pytest.mark.parametrize("nu", [-0.1, 1.1, math.nan])
def test_scene_rejects_bad_visibility(nu):
    with pytest.raises(InvalidParameterError):
        scene(1.0, nu)


def test_scene_rejects_nonfinite_separation():
    with pytest.raises(InvalidParameterError):
        scene(math.inf, 0.5)


# -- joint_density_kk --------------------------------------------------------

def test_kk_equal_momenta_antibunching_zero():
    assert joint_density_kk(0.4, 0.4, "A", scene(3.0, 1.0), G1) == 0.0


def test_kk_product_form_without_interference():
    val = joint_density_kk(0.3, -1.1, "A", scene(3.0, 0.0), G1)
    assert val == pytest.approx(0.5 * G1.density(0.3) * G1.density(-1.1), rel=1e-15)


@pytest.mark.parametrize("dk,x,nu,dx", [(1.0, "B", 1.0, 4.0), (0.5, "A", 0.7, 2.0), (2.5, "B", 0.3, -1.0)])
def test_kk_marginal_matches_joint_density(dk, x, nu, dx):
    s = scene(dx, nu)
    marg, _ = sci.quad(lambda K: float(joint_density_kk(K + dk / 2, K - dk / 2, x, s, G1)),
                       -np.inf, np.inf, epsabs=1e-13)
    assert marg == pytest.approx(float(joint_density(dk, x, s)), abs=1e-6)


# -- bucket probabilities ----------------------------------------------------

def test_bucket_dip_bottom():
    assert bucket_probs(scene(0.0, 1.0)) == (0.0, 1.0)


def test_bucket_gaussian_value():
    p_a, p_b = bucket_probs(scene(1.0, 1.0))
    assert p_a == pytest.approx((1 - math.exp(-1)) / 2, rel=1e-14)
    assert p_a == pytest.approx(0.316060, abs=1e-6)
    assert p_a + p_b == 1.0


@pytest.mark.parametrize("dx", [0.0, 1.0, 13.0])
def test_bucket_no_interference(dx):
    assert bucket_probs(scene(dx, 0.0)) == (0.5, 0.5)


@pytest.mark.parametrize("dx", [0.0, 0.01, 0.5, 1.7, 4.0, 9.0])
def test_beat_integrals_closed_form_vs_quadrature(dx):
    s = scene(dx, 1.0)
    cf = beat_integrals(s, closed_form=True)
    nq = beat_integrals(s, closed_form=False)
    assert nq == pytest.approx(cf, abs=1e-12)


# -- bins ---------------------------------------------------------------------

def _total(s):
    return sum(bin_probability(-12 * s.sigma_k * math.sqrt(2), 12 * s.sigma_k * math.sqrt(2), x, s)
               for x in "AB")


@pytest.mark.parametrize("nu", [0.0, 0.5, 1.0])
@pytest.mark.parametrize("dx", [0.0, 1.0, 4.0, 25.0])
def test_normalisation_gaussian(nu, dx):
    assert _total(scene(dx, nu)) == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("nu,dx", [(1.0, 0.0), (0.9, 1.5), (0.4, 6.0), (1.0, 12.0)])
@pytest.mark.parametrize("name", ["tabulated_gaussian", "skewed_dist"])
def test_normalisation_tabulated(nu, dx, name, request):
    env = envelope(request.getfixturevalue(name))
    s = scene(dx, nu, env)
    w = env.half_width()
    total = sum(bin_probability(-w, w, x, s) for x in "AB")
    assert total == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("nu,dx", [(1.0, 0.3), (0.9, 1.5), (0.4, 6.0)])
@pytest.mark.parametrize("name", [None, "tabulated_gaussian", "skewed_dist"])
def test_bucket_consistency(nu, dx, name, request):
    env = ENV1 if name is None else envelope(request.getfixturevalue(name))
    s = scene(dx, nu, env)
    w = env.half_width()
    p_a, p_b = bucket_probs(s)
    assert bin_probability(-w, w, "A", s) == pytest.approx(p_a, abs=1e-8)
    assert bin_probability(-w, w, "B", s) == pytest.approx(p_b, abs=1e-8)


def test_bin_near_bunching_zero():
    s = scene(4.0, 1.0)
    a = bin_probability(-0.001, 0.001, "A", s)
    b = bin_probability(-0.001, 0.001, "B", s)
    assert b > 0
    assert a < 1e-4 * b


def test_bins_equal_without_interference():
    s = scene(3.0, 0.0)
    assert bin_probability(0.2, 0.9, "A", s) == bin_probability(0.2, 0.9, "B", s)


def test_bin_outside_support_is_zero():
    assert bin_probability(30.0, 31.0, "B", scene(1.0, 1.0)) == 0.0


def test_bin_rejects_empty_interval():
    with pytest.raises(InvalidParameterError):
        bin_probability(1.0, 1.0, "A", scene(1.0, 1.0))


# -- properties -----------------------------------------------------------------

finite = dict(allow_nan=False, allow_infinity=False)


@settings(max_examples=300, deadline=None)
@given(st.floats(0, 1, **finite), st.floats(-50, 50, **finite), st.floats(-20, 20, **finite),
       st.sampled_from("AB"))
def test_density_non_negative(nu, dx, dk, x):
    assert joint_density(dk, x, scene(dx, nu)) >= 0.0


@settings(max_examples=300, deadline=None)
@given(st.floats(0, 1, **finite), st.floats(-50, 50, **finite), st.floats(-20, 20, **finite),
       st.sampled_from("AB"))
def test_density_even_in_separation(nu, dx, dk, x):
    assert joint_density(dk, x, scene(dx, nu)) == joint_density(dk, x, scene(-dx, nu))


# -- detector model ------------------------------------------------------------

def test_resolution_example():
    rep = check_resolution(DetectorModel(RESOLVING, 0.05), scene(4.0, 1.0))
    assert rep.margin_envelope == pytest.approx(20.0)
    assert rep.margin_beats == pytest.approx(2 * math.pi / 4 / 0.05)
    assert rep.margin_beats == pytest.approx(31.4, abs=0.05)
    assert rep.passed and rep.to_dict()["pass"] is True


def test_resolution_fails_for_coarse_pixels():
    rep = check_resolution(DetectorModel(RESOLVING, 1.0), scene(4.0, 1.0))
    assert rep.margin_envelope == 1.0
    assert not rep.passed


def test_resolution_zero_separation():
    ok = check_resolution(DetectorModel(RESOLVING, 0.05), scene(0.0, 1.0))
    assert math.isinf(ok.margin_beats) and ok.passed
    bad = check_resolution(DetectorModel(RESOLVING, 0.5), scene(0.0, 1.0))
    assert math.isinf(bad.margin_beats) and not bad.passed


def test_resolution_needs_pixel():
    with pytest.raises(InvalidParameterError):
        check_resolution(DetectorModel(RESOLVING), scene(1.0, 1.0))


@pytest.mark.parametrize("kwargs", [
    dict(mode="camera"),
    dict(k_range=(1.0, 1.0)),
    dict(pixel_dk=0.0),
    dict(pixel_dk=-0.1, mode=SINGLE_CAMERA),
    dict(snap=True),
    dict(snap=True, pixel_dk=0.1),
    dict(snap=True, pixel_dk=0.1, mode=BUCKET, k_range=(-1.0, 1.0)),
])
def test_detector_invariants(kwargs):
    with pytest.raises(InvalidParameterError):
        DetectorModel(**kwargs)


def test_bucket_ignores_pixel_pitch():
    DetectorModel(BUCKET, pixel_dk=-1.0)


def test_physical_detector_pitch():
    det = DetectorModel.from_physical(pixel_y=5e3, distance=1e8, k0=2 * math.pi / 800, k_range=(-1, 1))
    assert det.pixel_dk == pytest.approx(5e3 * (2 * math.pi / 800) / 1e8, rel=1e-15)
    assert det.physical == (5e3, 1e8, 2 * math.pi / 800)


def test_default_range_and_pixels():
    det = DetectorModel.default(1.0, pixel_dk=0.25, snap=True)
    assert det.k_range == pytest.approx((-6 * math.sqrt(2), 6 * math.sqrt(2)))
    edges = det.pixel_edges()
    assert edges[0] == det.k_range[0] and edges[-1] >= det.k_range[1] - 1e-12
    assert np.allclose(np.diff(edges), 0.25)
