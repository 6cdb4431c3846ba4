import math

import numpy as np
import pytest

from efpsa.device import (
    DeviceGeometry,
    FrameTransform,
    PhysicalConstants,
    load_device,
    with_overrides,
)
from efpsa.errors import ValidationError


class TestFrameTransform:
    def test_nv_basis_is_orthonormal(self):
        frame = FrameTransform()
        basis = frame.nv_basis
        assert np.allclose(basis @ basis.T, np.eye(3), atol=1e-12)

    def test_nv_axis_is_body_diagonal(self):
        frame = FrameTransform()
        z_nv = frame.nv_basis[0]
        assert np.allclose(np.abs(z_nv), 1.0 / math.sqrt(3.0), atol=1e-12)

    def test_round_trip_is_identity(self):
        frame = FrameTransform()
        rng = np.random.default_rng(3)
        for _ in range(20):
            e_lab = rng.normal(size=3)
            back = frame.nv_to_lab(frame.lab_to_nv(e_lab))
            assert np.allclose(back, e_lab, atol=1e-12)

    def test_transform_preserves_magnitude(self):
        frame = FrameTransform()
        rng = np.random.default_rng(4)
        e_lab = rng.normal(size=(50, 3))
        e_nv = frame.lab_to_nv_many(e_lab)
        assert np.allclose(
            np.linalg.norm(e_nv, axis=1), np.linalg.norm(e_lab, axis=1), atol=1e-12
        )

    def test_field_along_nv_axis_is_purely_parallel(self):
        frame = FrameTransform()
        axis_in_lab = frame.lab_basis @ frame.nv_basis[0]
        e_par, e_mu1, e_mu2 = frame.lab_to_nv(axis_in_lab)
        assert e_par == pytest.approx(1.0, abs=1e-12)
        assert abs(e_mu1) < 1e-12 and abs(e_mu2) < 1e-12


class TestGeometry:
    def test_default_site_positions_lie_on_array_axis(self):
        geometry = DeviceGeometry()
        pos = geometry.nv_positions
        assert pos.shape == (geometry.n_sites, 3)
        spacing = np.diff(pos[:, 2])
        assert np.allclose(spacing, geometry.a, atol=1e-15)
        assert np.allclose(pos[:, :2], 0.0, atol=1e-15)

    def test_rejects_nonpositive_pitch(self):
        with pytest.raises(ValidationError):
            DeviceGeometry(a=0.0)

    def test_large_displacement_warns(self):
        disp = np.zeros((10, 3))
        disp[0, 2] = 0.3 * DeviceGeometry().a
        with pytest.warns(UserWarning):
            DeviceGeometry(nv_displacements=disp)


class TestConstants:
    def test_defaults_are_positive(self):
        c = PhysicalConstants()
        assert c.d_perp > 0 and c.T2_star > 0

    def test_transverse_hierarchy_enforced(self):
        with pytest.raises(ValidationError):
            PhysicalConstants(d_perp_prime=1.0, d_perp=0.17)


class TestConfigLoading:
    def test_empty_config_gives_defaults(self):
        model = load_device()
        assert model.geometry.n_sites == 10
        assert model.constants.d_perp == pytest.approx(0.17)

    def test_overriding_known_keys(self):
        model = load_device("n_sites = 4\nT2_star = 2e-5\n")
        assert model.geometry.n_sites == 4
        assert model.constants.T2_star == pytest.approx(2e-5)

    def test_unknown_key_is_rejected(self):
        with pytest.raises(ValidationError, match="unknown config keys"):
            load_device("banana = 1\n")

    def test_parse_failure_is_validation_error(self):
        with pytest.raises(ValidationError, match="parse"):
            load_device("a = = 3\n")

    def test_with_overrides_returns_new_model(self):
        base = load_device()
        other = with_overrides(base, n_sites=3)
        assert other.geometry.n_sites == 3
        assert base.geometry.n_sites == 10
