import dataclasses

import numpy as np
import pytest

from absorbctl import (
    ConfigurationError,
    InputHistory,
    InsufficientSampleError,
    SampleSpec,
    build_planar_example,
    check_absorbing_dissipation,
    check_corrected_contraction,
    check_corrected_dissipation,
    check_growth_bound,
    check_local_controller,
    check_observer_contraction,
    check_zeta_bound,
    predictor_convergence_study,
    sublevel_box,
)
from absorbctl import verification as V


@pytest.fixture(scope="module")
def planar():
    return build_planar_example(0.01, r=0.25, tau=0.25)


# a few thousand points keeps this suite fast; the acceptance tests run the
# full-size sweeps
SPEC = SampleSpec(n_points=2000, seed=0)


class TestGainBound:
    def test_admissible(self):
        assert check_zeta_bound(0.01) is True
        assert check_zeta_bound(0.012) is True

    def test_violated(self):
        assert check_zeta_bound(0.02) is False

    def test_nonpositive_rejected(self):
        with pytest.raises(ConfigurationError):
            check_zeta_bound(0.0)
        with pytest.raises(ConfigurationError):
            check_zeta_bound(-1.0)


class TestMarginOracles:
    """Hand-evaluated margins, frozen bitwise where the arithmetic is exact."""

    def test_absorbing_dissipation(self, planar):
        plant, assm, _ = planar
        m = V.absorbing_dissipation_margin(plant, assm, [3.0, 0.0], [0.0])
        assert m == pytest.approx(-808.7850000000001, rel=1e-12)

    def test_absorbing_dissipation_violation_without_gate(self):
        # inadmissible observer gain scaling: large drive at the boundary
        plant, assm, _ = build_planar_example(0.2, b_level=60.0,
                                              enforce_zeta_bound=False)
        m = V.absorbing_dissipation_margin(plant, assm,
                                           [0.0, np.sqrt(2.0)], [14.14])
        assert m == pytest.approx(13.746979771955564, rel=1e-12)
        assert m > 0.0

    def test_observer_contraction(self, planar):
        plant, assm, _ = planar
        m = V.observer_contraction_margin(plant, assm, [1.0, 1.0], [0.0, 0.0], [0.0])
        assert m == -13.24
        assert V.observer_contraction_margin(plant, assm, [0.3, -0.2],
                                             [0.3, -0.2], [0.1]) == 0.0

    def test_growth_bound(self, planar):
        plant, assm, _ = planar
        m = V.growth_bound_margin(plant, assm, [0.0, 1.8], [0.0, 0.5], [0.0])
        assert m == pytest.approx(-6.3225, rel=1e-12)

    def test_corrected_dissipation(self, planar):
        plant, assm, fn = planar
        m = V.corrected_dissipation_margin(plant, assm, fn, [2.0, 0.0], [0.0], [0.0])
        assert m == pytest.approx(-159.54, rel=1e-12)

    def test_corrected_contraction_zero_error(self, planar):
        plant, assm, fn = planar
        m = V.corrected_contraction_margin(plant, assm, fn,
                                           [0.4, -0.1], [0.4, -0.1], [0.2])
        assert m == 0.0

    def test_contraction_fraction_is_tight(self, planar):
        # inflating the certified fraction past 1 flips the sign at points
        # where the plain contraction margin is nearly saturated
        plant, assm, fn = planar
        z, x, u = [0.01, 0.3], [0.0, 0.3], [0.0]
        bad = V.corrected_contraction_margin(plant, assm, fn, z, x, u, c_value=1.5)
        good = V.corrected_contraction_margin(plant, assm, fn, z, x, u)
        assert bad == pytest.approx(4.0000000000001015e-07, rel=1e-6)
        assert bad > 1e-9
        assert good < 0.0

    def test_wrong_controller_detected(self, planar):
        # sign-flipped feedback destabilizes a thin band near the origin;
        # the stock controller keeps the margin negative at the same point
        plant, assm, _ = planar
        orig = assm.local_controller
        flipped = dataclasses.replace(assm, local_controller=lambda x: -orig(x))
        bad = V.local_controller_margin(plant, flipped, [0.06, 0.0])
        assert bad == pytest.approx(0.00015562956861713163, rel=1e-6)
        assert bad > 1e-9
        assert V.local_controller_margin(plant, assm, [0.06, 0.0]) < 0.0


class TestSublevelBox:
    def test_disc_radius(self, planar):
        _, assm, _ = planar
        box = sublevel_box(assm.lyapunov, 1.0, 2)
        assert np.max(np.abs(np.abs(box) - np.sqrt(2.0))) <= 1e-9
        assert (box[:, 0] < 0).all() and (box[:, 1] > 0).all()

    def test_unbounded_rejected(self):
        with pytest.raises(ConfigurationError):
            sublevel_box(lambda x: 0.0, 1.0, 2)

    def test_origin_outside_rejected(self):
        with pytest.raises(ConfigurationError):
            sublevel_box(lambda x: float(x @ x) + 2.0, 1.0, 2)


class TestSampledChecks:
    def test_all_pass(self, planar):
        plant, assm, fn = planar
        reports = [
            check_absorbing_dissipation(plant, assm, SPEC),
            check_local_controller(plant, assm, SPEC),
            check_observer_contraction(plant, assm, SPEC),
            check_growth_bound(plant, assm, SPEC),
            check_corrected_contraction(plant, assm, fn, SPEC),
            check_corrected_dissipation(plant, assm, fn, SPEC),
        ]
        for rep in reports:
            assert rep.passed, f"{rep.name}: worst {rep.worst_margin}"
        names = [rep.name for rep in reports]
        assert len(set(names)) == 6

    def test_determinism(self, planar):
        plant, assm, _ = planar
        a = check_observer_contraction(plant, assm, SampleSpec(n_points=500, seed=7))
        b = check_observer_contraction(plant, assm, SampleSpec(n_points=500, seed=7))
        assert a.to_dict() == b.to_dict()

    def test_seed_changes_sample(self, planar):
        plant, assm, _ = planar
        a = check_observer_contraction(plant, assm, SampleSpec(n_points=500, seed=1))
        b = check_observer_contraction(plant, assm, SampleSpec(n_points=500, seed=2))
        assert a.worst_margin != b.worst_margin

    def test_worst_point_reproduces_margin(self, planar):
        plant, assm, _ = planar
        rep = check_observer_contraction(plant, assm, SPEC)
        m = V.observer_contraction_margin(plant, assm, *rep.worst_point)
        assert abs(m - rep.worst_margin) <= 1e-12

    def test_report_serialization(self, planar):
        plant, assm, _ = planar
        rep = check_absorbing_dissipation(plant, assm, SampleSpec(n_points=200, seed=0))
        d = rep.to_dict()
        assert d["pass"] is True
        assert d["points_tested"] == 200
        assert isinstance(d["worst_point"], list)
        assert all(isinstance(part, list) for part in d["worst_point"])

    def test_growth_bound_side_condition_starves_sampler(self, planar):
        # the admissible cone for this geometry is empty, so every draw is
        # skipped and the check passes vacuously by default
        plant, assm, _ = planar
        rep = check_growth_bound(plant, assm, SampleSpec(n_points=100, seed=0))
        assert rep.points_tested == 0
        assert rep.skipped == 100000  # draw cap: max(50 * n, 100000)
        assert rep.worst_margin is None
        assert rep.passed

    def test_growth_bound_min_points(self, planar):
        plant, assm, _ = planar
        with pytest.raises(InsufficientSampleError):
            check_growth_bound(plant, assm,
                               SampleSpec(n_points=100, seed=0, min_points=1))

    def test_damping_ablation_fails(self, planar):
        plant, assm, fn = planar
        rep = check_corrected_dissipation(plant, assm, fn, SPEC, zero_damping=True)
        assert rep.name == "corrected_dissipation_no_damping"
        assert not rep.passed
        assert rep.worst_margin > 1.0
        # the reported witness reproduces outside the sampler
        m = V.corrected_dissipation_margin(plant, assm, fn, *rep.worst_point,
                                           zero_damping=True)
        assert abs(m - rep.worst_margin) <= 1e-12

    def test_empty_sample_rejected(self, planar):
        plant, assm, _ = planar
        with pytest.raises(ConfigurationError):
            check_local_controller(plant, assm, SampleSpec(n_points=0, seed=0))


class TestPredictorStudy:
    def test_planar_window(self):
        plant, _, _ = build_planar_example(0.01, r=0.5, tau=0.5)
        hist = InputHistory(-1.0, [(-1.0, [0.3]), (-0.55, [-0.2]), (-0.2, [0.05])],
                            t_now=0.0)
        study = predictor_convergence_study(plant, [0.5, -0.3], hist,
                                            [8, 16, 32, 64])
        ns = [n for n, _ in study]
        errs = [e for _, e in study]
        assert ns == [8, 16, 32, 64]
        assert errs == pytest.approx([0.017993482316142027, 0.007890297818139855,
                                      0.0037993083165242052, 0.001879514618151831],
                                     rel=1e-9)
        assert all(a > b for a, b in zip(errs, errs[1:]))
        # first-order method: halving the step roughly halves the error
        assert 1.6 <= errs[-2] / errs[-1] <= 2.4

    def test_equilibrium_is_exact(self):
        plant, _, _ = build_planar_example(0.01, r=0.5, tau=0.5)
        hist = InputHistory(-1.0, [(-1.0, [0.0])], t_now=0.0)
        study = predictor_convergence_study(plant, [0.0, 0.0], hist, [8, 16])
        assert all(err == 0.0 for _, err in study)

    def test_reference_step_validated(self):
        plant, _, _ = build_planar_example(0.01, r=0.5, tau=0.5)
        hist = InputHistory(-1.0, [(-1.0, [0.3])], t_now=0.0)
        with pytest.raises(ConfigurationError):
            predictor_convergence_study(plant, [0.5, -0.3], hist, [8],
                                        ref_substep=0.0)
