"""Branch-memory tests: reversal scaling, nesting, closure bookkeeping,
numerical partials, and the randomized property suite."""

import io

import numpy as np
import pytest

from smawire import constitutive as law
from smawire.errors import (BranchRangeError, ClosureUnderflowError,
                            DegenerateReversalError)
from smawire.memory import KIND_A, KIND_M, BranchMemory
from smawire.params import bundled_params

P = bundled_params()


def fresh():
    return BranchMemory(P)


class TestOuterLevel:
    def test_level_one_matches_interpolators_on_grid(self):
        mem = fresh()
        for x in mem.top.grid[::20]:
            assert mem.branch_eval(KIND_A, float(x), 350.0) == pytest.approx(
                float(law.sigma_A_outer(x, 350.0, P)), rel=1e-12)
            assert mem.branch_eval(KIND_M, float(x), 350.0) == pytest.approx(
                float(law.sigma_M_outer(x, 350.0, P)), rel=1e-12)

    def test_unloading_end_value(self):
        mem = fresh()
        expected = P.E_ML * np.log(1 + P.lambda_ML) + P.E_MC + P.sigma_MB
        assert mem.branch_eval(KIND_M, 1.0, P.T0) == pytest.approx(expected, rel=1e-12)

    def test_range_error(self):
        mem = fresh()
        with pytest.raises(BranchRangeError):
            mem.branch_eval(KIND_A, 1.1, 300.0)

    def test_off_grid_interpolation_close_to_analytic(self):
        # Away from the steep log ends the 201-point grid stays within a
        # few tens of kPa of the analytic branch (measured: ~1.4e4 Pa).
        mem = fresh()
        xs = np.linspace(0.2, 0.8, 37)
        for x in xs:
            got = mem.branch_eval(KIND_A, float(x), 320.0)
            ref = float(law.sigma_A_outer(x, 320.0, P))
            assert got == pytest.approx(ref, abs=2e4)


class TestPartials:
    def test_temperature_partial_is_sensitivity_term(self):
        mem = fresh()
        for x in (0.1, 0.5, 0.9):
            _, d_T = mem.branch_partials(KIND_A, x, 330.0)
            assert d_T == pytest.approx(float(law.sigma_S(x, P)), rel=1e-12)

    def test_x_partial_against_half_step_refinement(self):
        # Refinement oracle: finite difference of the analytic branch at
        # half the grid step.  The default 201-point grid agrees to 1e-3
        # relative; doubling the resolution tightens this to 1e-4.
        def half_step_fd(mem, x):
            h = 0.5 * (mem.top.grid[1] - mem.top.grid[0])
            return float((law.sigma_A_outer(x + h, P.T0, P)
                          - law.sigma_A_outer(x - h, P.T0, P)) / (2 * h))

        mem = fresh()
        fine = BranchMemory(P, grid_size=501)
        for x in (0.15, 0.5, 0.85):
            d_x, _ = mem.branch_partials(KIND_A, x, P.T0)
            assert d_x == pytest.approx(half_step_fd(mem, x), rel=1e-3)
            d_fine, _ = fine.branch_partials(KIND_A, x, P.T0)
            assert d_fine == pytest.approx(half_step_fd(fine, x), rel=1e-4)

    def test_one_sided_at_range_ends(self):
        mem = fresh()
        d_lo, _ = mem.branch_partials(KIND_A, 0.0, P.T0)
        d_hi, _ = mem.branch_partials(KIND_A, 1.0, P.T0)
        assert np.isfinite(d_lo) and np.isfinite(d_hi)


class TestPushReversal:
    def test_loading_reversal_passes_through_point(self):
        mem = fresh()
        T = 298.0
        x_rev = 0.6
        sig_rev = mem.branch_eval(KIND_A, x_rev, T)
        mem.push_reversal(x_rev, T, KIND_M)
        assert mem.n_l == 2
        assert mem.top.x_lo == 0.0 and mem.top.x_hi == x_rev
        assert mem.branch_eval(KIND_M, x_rev, T) == pytest.approx(sig_rev, rel=1e-6)

    def test_meets_parent_at_opposite_end(self):
        mem = fresh()
        outer_M0 = mem.branch_eval(KIND_M, 0.0, P.T0)
        mem.push_reversal(0.7, P.T0, KIND_M)
        assert mem.branch_eval(KIND_M, 0.0, P.T0) == pytest.approx(outer_M0, rel=1e-9)

    def test_unloading_reversal(self):
        mem = fresh()
        T = 360.0
        mem.push_reversal(0.8, T, KIND_M)
        sig_rev = mem.branch_eval(KIND_M, 0.3, T)
        mem.push_reversal(0.3, T, KIND_A)
        assert mem.n_l == 3
        assert mem.top.x_lo == 0.3 and mem.top.x_hi == 0.8
        assert mem.branch_eval(KIND_A, 0.3, T) == pytest.approx(sig_rev, rel=1e-6)

    def test_double_reversal_continuity(self):
        # Push then immediate opposite reversal: level-3 loading curve
        # meets the level-2 unloading curve at the shared point.
        mem = fresh()
        T = 310.0
        mem.push_reversal(0.55, T, KIND_M)
        sig = mem.branch_eval(KIND_M, 0.54, T)
        mem.push_reversal(0.54, T, KIND_A)
        assert mem.branch_eval(KIND_A, 0.54, T) == pytest.approx(sig, rel=1e-6)

    def test_degenerate_guard(self):
        mem = fresh()
        with pytest.raises(DegenerateReversalError):
            mem.push_reversal(1.0 - 1e-9, 300.0, KIND_M)
        with pytest.raises(DegenerateReversalError):
            mem.push_reversal(1e-9, 300.0, KIND_A)


class TestClosure:
    def test_pop_restores_outer(self):
        mem = fresh()
        mem.push_reversal(0.6, 300.0, KIND_M)
        mem.push_reversal(0.2, 300.0, KIND_A)
        assert mem.n_l == 3
        mem.pop_closure()
        assert mem.n_l == 1
        for x in (0.0, 0.3, 0.9):
            assert mem.branch_eval(KIND_A, x, 300.0) == pytest.approx(
                float(law.sigma_A_outer(x, 300.0, P)), rel=1e-12)

    def test_five_to_three(self):
        mem = fresh()
        for x_rev, kind in ((0.8, KIND_M), (0.2, KIND_A), (0.7, KIND_M),
                            (0.3, KIND_A)):
            mem.push_reversal(x_rev, 300.0, kind)
        assert mem.n_l == 5
        mem.pop_closure()
        assert mem.n_l == 3

    def test_underflow_guard(self):
        mem = fresh()
        mem.push_reversal(0.5, 300.0, KIND_M)
        with pytest.raises(ClosureUnderflowError):
            mem.pop_closure()

    def test_roundtrip_values_exact(self):
        # Stack round-trip: push twice, pop once, values equal the state
        # before the two pushes.
        mem = fresh()
        mem.push_reversal(0.65, 305.0, KIND_M)
        ref = [mem.branch_eval(KIND_M, x, 305.0) for x in (0.1, 0.3, 0.6)]
        mem.push_reversal(0.3, 305.0, KIND_A)
        mem.push_reversal(0.5, 305.0, KIND_M)
        mem.pop_closure()
        got = [mem.branch_eval(KIND_M, x, 305.0) for x in (0.1, 0.3, 0.6)]
        assert got == pytest.approx(ref, rel=1e-15)


class TestStrainBounds:
    def test_full_martensite_threshold(self):
        mem = fresh()
        _, hi_A, _, _ = mem.strain_bounds(P.T0)
        sig_bar = float(law.sigma_A0(1.0, P))
        assert hi_A == pytest.approx(sig_bar / P.E_M + P.eps_T, rel=1e-12)

    def test_austenite_start(self):
        mem = fresh()
        lo_A, _, _, _ = mem.strain_bounds(P.T0)
        assert lo_A == pytest.approx(
            float(law.sigma_A0(0.0, P)) / P.E_A, rel=1e-12)

    def test_ordering(self):
        mem = fresh()
        for T in (280.0, 298.0, 360.0, 420.0):
            lo_A, hi_A, lo_M, hi_M = mem.strain_bounds(T)
            assert lo_A <= hi_A and lo_M <= hi_M


def test_dump_is_parseable_text():
    mem = fresh()
    mem.push_reversal(0.5, 300.0, KIND_M)
    buf = io.StringIO()
    mem.dump(buf)
    text = buf.getvalue()
    assert text.count("level") == 2
    assert "sigma_A0" in text and "sigma_M0" in text


def test_randomized_sequences_properties():
    """500 random push/pop sequences: continuity at the reversal, range
    nesting, branch boundedness by the outer envelope, closure round-trip."""
    rng = np.random.default_rng(42)
    for trial in range(500):
        mem = fresh()
        T = rng.uniform(280.0, 420.0)
        snapshots = []    # one (probe_x, value) per push, aligned with stack
        for _ in range(rng.integers(1, 8)):
            rec = mem.top
            lo, hi = rec.x_lo, rec.x_hi
            if hi - lo < 1e-3:
                break
            if len(snapshots) >= 2 and rng.random() < 0.25 and mem.n_l >= 3:
                mem.pop_closure()
                snapshots.pop()
                probe, value = snapshots.pop()
                # Closure lands exactly on the grandparent branch values.
                assert mem.branch_eval(KIND_A, probe, T) == pytest.approx(
                    value, rel=1e-12, abs=1e-3)
                continue
            # Loading loops (odd level) reverse onto an unloading branch.
            next_kind = KIND_M if mem.top.level % 2 == 1 else KIND_A
            x_rev = rng.uniform(lo + 0.05 * (hi - lo), hi - 0.05 * (hi - lo))
            probe = rng.uniform(lo, hi)
            snapshots.append((probe, mem.branch_eval(KIND_A, probe, T)))
            departing = mem.branch_eval(
                KIND_A if next_kind == KIND_M else KIND_M, x_rev, T)
            mem.push_reversal(x_rev, T, next_kind)
            # Continuity through the reversal point.
            assert mem.branch_eval(next_kind, x_rev, T) == pytest.approx(
                departing, rel=1e-6)

        # Nesting and boundedness against the outer envelope.
        for child, parent in zip(mem.stack[1:], mem.stack[:-1]):
            assert child.x_lo >= parent.x_lo - 1e-12
            assert child.x_hi <= parent.x_hi + 1e-12
        outer = mem.stack[0]
        span = float(np.max(outer.curve_A) - np.min(outer.curve_M))
        for rec in mem.stack[1:]:
            # Envelope tolerance covers resampling noise of repeated linear
            # interpolation between nested grids (measured worst case over
            # this suite: 3.5e4 Pa on a 1.0e9 Pa span).
            lo_out = np.interp(rec.grid, outer.grid, outer.curve_M)
            hi_out = np.interp(rec.grid, outer.grid, outer.curve_A)
            assert np.all(rec.curve_M >= lo_out - 1e-4 * span)
            assert np.all(rec.curve_A <= hi_out + 1e-4 * span)
            # Within a record the ordering is exact (clamped at push time).
            assert np.all(rec.curve_A >= rec.curve_M)
