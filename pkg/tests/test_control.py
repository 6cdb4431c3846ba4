import math

import numpy as np
import pytest

from efpsa.control import (
    ChannelPlan,
    DriveTarget,
    achieved_crosstalk_fidelity,
    achieved_shifts,
    allocate_channels,
    eliminate_crosstalk,
    shift_to_e_mu1,
    solution_residual,
    stark_shift,
    synthesize_drive,
)
from efpsa.device import DeviceGeometry, FrameTransform, PhysicalConstants
from efpsa.errors import NumericalError, ValidationError
from efpsa.fields import Components, GMatrix, assemble_g, surrogate_basis

CONSTANTS = PhysicalConstants()
GEOMETRY = DeviceGeometry()


def _g(components=Components.PERP2):
    basis = surrogate_basis(GEOMETRY)
    return assemble_g(basis, GEOMETRY.nv_positions, components, FrameTransform())


class TestDriveTarget:
    def test_rhs_layout(self):
        target = DriveTarget(n_sites=3, fields={1: (2.0, 3.0)})
        assert target.rhs().tolist() == [0.0, 0.0, 2.0, 3.0, 0.0, 0.0]

    def test_out_of_range_site_rejected(self):
        with pytest.raises(ValidationError):
            DriveTarget(n_sites=3, fields={3: (1.0, 0.0)})


class TestCrosstalkElimination:
    def test_solution_matches_lstsq_oracle(self):
        g = _g()
        target = DriveTarget.single_site(GEOMETRY.n_sites, 5, 1e7)
        v = eliminate_crosstalk(g, target)
        oracle, *_ = np.linalg.lstsq(g.matrix, target.rhs(), rcond=None)
        assert np.allclose(v, oracle, rtol=1e-8)

    def test_residual_below_1e9(self):
        g = _g()
        target = DriveTarget.single_site(GEOMETRY.n_sites, 5, 1e7)
        v = eliminate_crosstalk(g, target)
        assert solution_residual(g, v, target.rhs()) < 1e-9

    def test_non_target_sites_are_nulled(self):
        g = _g()
        target = DriveTarget.single_site(GEOMETRY.n_sites, 2, 1e7)
        fid = achieved_crosstalk_fidelity(g, eliminate_crosstalk(g, target), target)
        assert min(fid.values()) > 0.999

    def test_multi_site_targets_supported(self):
        g = _g()
        target = DriveTarget(n_sites=10, fields={1: (5e6, 0.0), 8: (0.0, 5e6)})
        v = synthesize_drive(g, target)
        assert solution_residual(g, v, target.rhs()) < 1e-9

    def test_singular_g_names_deficient_rows(self):
        m = np.zeros((4, 4))
        m[0, 0] = m[1, 1] = m[2, 2] = 1.0  # row s1:mu2 identically zero
        g = GMatrix(
            matrix=m,
            row_labels=["s0:mu1", "s0:mu2", "s1:mu1", "s1:mu2"],
            col_labels=list("abcd"),
            components=Components.PERP2,
        )
        target = DriveTarget(n_sites=2, fields={0: (1.0, 0.0)})
        with pytest.raises(NumericalError):
            eliminate_crosstalk(g, target)

    def test_voltage_bound_warns_then_raises_with_strict(self):
        g = _g()
        target = DriveTarget.single_site(GEOMETRY.n_sites, 5, 1e7)
        with pytest.warns(UserWarning, match="exceeds"):
            eliminate_crosstalk(g, target, voltage_limit=1e-6)
        with pytest.raises(NumericalError, match="exceeds"):
            eliminate_crosstalk(g, target, voltage_limit=1e-6, strict=True)

    def test_rectangular_g_rejected(self):
        g3 = _g(Components.FULL3)
        target = DriveTarget.single_site(GEOMETRY.n_sites, 5, 1e7)
        with pytest.raises(ValidationError):
            synthesize_drive(g3, target)


class TestStarkShift:
    def test_parallel_component_oracle(self):
        e_par = 1e6
        expected = CONSTANTS.delta_mu_par * e_par / CONSTANTS.h
        assert stark_shift((e_par, 0.0, 0.0), CONSTANTS) == pytest.approx(expected)

    def test_perpendicular_component_is_negative_going(self):
        shift = stark_shift((0.0, 1e6, 0.0), CONSTANTS)
        expected = -math.sqrt(2.0) / 2.0 * CONSTANTS.mu_perp_opt * 1e6 / CONSTANTS.h
        assert shift == pytest.approx(expected)
        assert shift < 0

    def test_shift_to_field_round_trip(self):
        e = shift_to_e_mu1(-40e9, CONSTANTS)
        assert stark_shift((0.0, e, 0.0), CONSTANTS) == pytest.approx(-40e9, rel=1e-12)

    def test_positive_request_rejected(self):
        with pytest.raises(ValidationError):
            shift_to_e_mu1(+1e9, CONSTANTS)


class TestChannelAllocation:
    PLAN = ChannelPlan(
        assignment={
            0: "ch0", 1: "ch1", 2: "ch2", 3: "ch3", 4: "ch0",
            5: "ch1", 6: "ch2", 7: "ch3", 8: "ch0", 9: "ch1",
        }
    )

    def test_channel_spacing_enforced(self):
        with pytest.raises(ValidationError, match="spacing"):
            ChannelPlan(assignment={0: "a"}, channels={"a": -40e9, "b": -40.000001e9})

    def test_unknown_channel_rejected(self):
        with pytest.raises(ValidationError):
            ChannelPlan(assignment={0: "nope"})

    def test_allocation_achieves_requested_shifts(self):
        g3 = _g(Components.FULL3)
        v = allocate_channels(g3, self.PLAN, CONSTANTS)
        got = achieved_shifts(g3, v, CONSTANTS)
        want = [self.PLAN.shift_for_site(k) for k in range(10)]
        assert np.allclose(got, want, rtol=1e-6)

    def test_voltages_are_antisymmetric_pairs(self):
        g3 = _g(Components.FULL3)
        v = allocate_channels(g3, self.PLAN, CONSTANTS)
        assert np.allclose(v[0::2], -v[1::2], atol=1e-15)

    def test_incomplete_plan_rejected(self):
        g3 = _g(Components.FULL3)
        with pytest.raises(ValidationError, match="every site"):
            allocate_channels(g3, ChannelPlan(assignment={0: "ch0"}), CONSTANTS)

    def test_infeasible_shift_hits_breakdown_bound(self):
        g3 = _g(Components.FULL3)
        huge = ChannelPlan(
            assignment={k: "far" for k in range(10)},
            channels={"far": -1e16},
        )
        with pytest.raises(NumericalError, match="breakdown"):
            allocate_channels(g3, huge, CONSTANTS)
