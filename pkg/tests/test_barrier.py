import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fbmcf.barrier import Barrier
from fbmcf.exceptions import GeometryError, PreconditionError, UnsupportedBarrierError

PLANE = Barrier.plane()
SPHERE = Barrier.sphere()


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def sphere_point(rng, R=1.0):
    return R * unit(rng.normal(size=3))


# -- normals and shape operators --------------------------------------------
def test_plane_shape_vanishes():
    nu, k, K = PLANE.normal_and_shape([0.3, -2.0, 0.0])
    np.testing.assert_allclose(nu, [0, 0, 1])
    assert np.all(k == 0) and K == 0


def test_unit_sphere_shape_is_identity_on_tangent_space():
    x = unit([1.0, 2.0, 2.0])
    nu, k, K = SPHERE.normal_and_shape(x)
    np.testing.assert_allclose(nu, x, atol=1e-15)
    np.testing.assert_allclose(k @ nu, 0, atol=1e-15)
    t = unit(np.cross(nu, [0, 0, 1]))
    assert t @ k @ t == pytest.approx(1.0)
    assert K == pytest.approx(2.0)


def test_sphere_radius_two_scales_shape():
    b = Barrier.sphere(radius=2.0)
    nu, k, K = b.normal_and_shape([0.0, 0.0, 2.0])
    np.testing.assert_allclose(k, np.diag([0.5, 0.5, 0.0]), atol=1e-15)
    assert b.curvature_scalar() == 0.5


def test_off_surface_point_rejected():
    with pytest.raises(GeometryError):
        SPHERE.normal_and_shape([0.0, 0.0, 1.1])


def test_dict_roundtrip():
    for b in (PLANE, SPHERE, Barrier.sphere((1.0, 0.0, 0.0), 3.0, orientation=-1)):
        assert Barrier.from_dict(b.to_dict()).to_dict() == b.to_dict()


# -- signed distance --------------------------------------------------------
def test_signed_distance_examples():
    assert PLANE.signed_distance([1.0, 2.0, 0.0]) == 0.0
    assert SPHERE.signed_distance(unit([1, 1, 1])) == pytest.approx(0.0, abs=1e-15)
    assert PLANE.signed_distance([0.0, 0.0, 0.3]) == pytest.approx(0.3)
    assert PLANE.signed_distance([0.0, 0.0, 1e6]) == 1.0
    assert PLANE.signed_distance([0.0, 0.0, -1e6]) == -1.0


@given(st.floats(-50, 50))
def test_signed_distance_bounded_and_monotone(z):
    d = PLANE.signed_distance([0.0, 0.0, z])
    assert -1.0 <= d <= 1.0
    assert PLANE.signed_distance([0.0, 0.0, z + 1e-3]) >= d


@pytest.mark.parametrize("barrier", [PLANE, SPHERE], ids=["plane", "sphere"])
def test_normal_derivative_of_distance(barrier):
    rng = np.random.default_rng(0)
    h = 1e-6
    for _ in range(50):
        x = sphere_point(rng) if barrier is SPHERE else np.r_[rng.normal(size=2), 0.0]
        nu = barrier.unit_normal(x)
        dd = (barrier.signed_distance(x + h * nu) - barrier.signed_distance(x - h * nu)) / (2 * h)
        assert dd >= 1.0 - 1e-6


def test_distance_smooth_across_tube():
    z = np.linspace(-1.5, 1.5, 3001) * PLANE.tubular_radius * 2
    d = PLANE.signed_distance(np.c_[np.zeros_like(z), np.zeros_like(z), z])
    second = np.diff(d, 2) / (z[1] - z[0]) ** 2
    assert np.max(np.abs(second)) < 50.0 / PLANE.tubular_radius


# -- extension fields -------------------------------------------------------
def test_extension_X_examples():
    np.testing.assert_allclose(PLANE.extension_field_X([1.0, 2.0, 0.0]), [0, 0, 1])
    x = unit([0.2, -0.4, 1.0])
    np.testing.assert_allclose(SPHERE.extension_field_X(x), x, atol=1e-15)
    far = [0.0, 0.0, 10.0]
    np.testing.assert_allclose(PLANE.extension_field_X(far), 0.0)
    assert np.linalg.norm(SPHERE.extension_field_X([0.0, 0.0, 1.0 + 0.9 * SPHERE.tubular_radius])) <= 1


def test_extension_V_examples():
    x = unit([1.0, 1.0, 0.5])
    np.testing.assert_allclose(SPHERE.extension_field_V(x), x, atol=1e-15)
    np.testing.assert_allclose(SPHERE.extension_field_V([0.0, 0.0, 0.5]), [0, 0, 1])
    with pytest.raises(UnsupportedBarrierError):
        PLANE.extension_field_V([0.0, 0.0, 0.0])


def test_extension_V_constant_along_normal():
    rng = np.random.default_rng(2)
    h = 1e-6
    for _ in range(20):
        x = sphere_point(rng)
        dV = (SPHERE.extension_field_V(x * (1 + h)) - SPHERE.extension_field_V(x * (1 - h))) / (2 * h)
        assert np.max(np.abs(dV)) < 1e-8


# -- perturbation tensor and D0 ---------------------------------------------
def _tangent_frame(nu, rng):
    a = unit(np.cross(nu, rng.normal(size=3)))
    return np.array([a, np.cross(nu, a)])


def test_perturbation_tensor_plane_is_zero():
    rng = np.random.default_rng(1)
    nu = unit(rng.normal(size=3))
    T = PLANE.perturbation_tensor([0.1, 0.2, 0.0], nu, _tangent_frame(nu, rng))
    np.testing.assert_array_equal(T, 0.0)


def test_perturbation_tensor_golden_on_sphere():
    # at the north pole k(e, nu) = -<e, nu_S><nu, nu_S>, so with
    # nu = (1,0,1)/sqrt2, e_1 = (-1,0,1)/sqrt2, e_2 = e_y only T_11 survives:
    # T_11 = 2 k(e_1, nu) <e_1, nu_S> = 2 (-1/2)(1/sqrt2)
    x = np.array([0.0, 0.0, 1.0])
    nu = unit([1.0, 0.0, 1.0])
    frame = np.array([unit([-1.0, 0.0, 1.0]), [0.0, 1.0, 0.0]])
    T = SPHERE.perturbation_tensor(x, nu, frame)
    np.testing.assert_allclose(T, [[-1 / np.sqrt(2), 0.0], [0.0, 0.0]], atol=1e-15)


def test_perturbation_tensor_vanishes_outside_tube():
    rng = np.random.default_rng(5)
    nu = unit(rng.normal(size=3))
    T = SPHERE.perturbation_tensor([0.0, 0.0, 3.0], nu, _tangent_frame(nu, rng))
    np.testing.assert_array_equal(T, 0.0)


def test_perturbation_tensor_checks_frame():
    with pytest.raises(PreconditionError):
        SPHERE.perturbation_tensor([0.0, 0.0, 1.0], [1.0, 0.0, 0.0],
                                   np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))


def test_calibrate_D0_values():
    assert PLANE.calibrate_D0() == 1.0
    d1 = SPHERE.calibrate_D0()
    assert 1.0 <= d1 <= 1.0 + 2.0 * 1.0 * 1.0 + 0.1
    d2 = Barrier.sphere(radius=2.0).calibrate_D0()
    d4 = Barrier.sphere(radius=4.0).calibrate_D0()
    assert d1 >= d2 >= d4


def test_calibration_holds_on_random_samples():
    rng = np.random.default_rng(7)
    D0 = SPHERE.calibrate_D0()
    m = 10_000
    x = rng.normal(size=(m, 3))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    x *= 1.0 + rng.uniform(-1, 1, size=(m, 1)) * SPHERE.tubular_radius
    nu = rng.normal(size=(m, 3))
    nu /= np.linalg.norm(nu, axis=1, keepdims=True)
    X = rng.normal(size=(m, 3))
    X -= np.sum(X * nu, axis=1, keepdims=True) * nu
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    T = SPHERE.perturbation_tensor(x, nu, X[:, None, :])
    assert np.min(T[:, 0, 0]) + D0 >= 1.0


# -- cutoff function --------------------------------------------------------
def test_cutoff_examples():
    assert SPHERE.cutoff_phi([0.0, 0.0, 1.0], 0.0, 1.0, 1.0) == pytest.approx(1.0)
    assert PLANE.cutoff_phi([0.0, 0.0, 0.5], 0.0, 0.0, 1.0) == pytest.approx(np.exp(-1.0))
    assert PLANE.cutoff_phi([0.0, 0.0, 0.0], 100.0, 1.0, 1.0) < 1e-40
    with pytest.raises(PreconditionError):
        PLANE.cutoff_phi([0.0, 0.0, 0.0], 0.0, -1.0, 1.0)


@settings(max_examples=30)
@given(st.floats(0.0, 3.0), st.floats(0.0, 2.0))
def test_cutoff_normal_derivative(b, alpha):
    x = unit([0.3, 0.1, 1.0])
    h = 1e-6
    phi = SPHERE.cutoff_phi(x, 0.5, alpha, b)
    d = (SPHERE.cutoff_phi(x * (1 + h), 0.5, alpha, b)
         - SPHERE.cutoff_phi(x * (1 - h), 0.5, alpha, b)) / (2 * h)
    assert phi > 0
    assert d <= -2 * b * phi + 1e-6
