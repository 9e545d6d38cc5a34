"""Parameter container, file round-trip, and drive signal tests."""

import numpy as np
import pytest

from smawire.errors import DomainError
from smawire.params import (Constant, DriveInput, MaterialParams,
                            PiecewiseConstant, PiecewiseLinear,
                            bundled_params, parse_keyvalue_text,
                            strain_path_drive, triangular_drive)

P = bundled_params()


class TestMaterialParams:
    def test_derived_geometry(self):
        assert P.Omega == pytest.approx(np.pi * P.r0 ** 2 * P.l0, rel=1e-15)
        assert P.A_S == pytest.approx(2 * np.pi * P.r0 * P.l0, rel=1e-15)

    def test_positivity_validation(self):
        with pytest.raises(DomainError):
            P.with_values(r0=-1.0)
        with pytest.raises(DomainError):
            P.with_values(c_V=0.0)

    def test_roundtrip(self, tmp_path):
        path = tmp_path / "w.params"
        P.save(path)
        assert MaterialParams.load(path) == P

    def test_missing_key(self, tmp_path):
        path = tmp_path / "bad.params"
        text = path.read_text() if path.exists() else ""
        P.save(path)
        lines = [l for l in path.read_text().splitlines() if not l.startswith("E_A ")]
        path.write_text("\n".join(lines))
        with pytest.raises(DomainError, match="missing"):
            MaterialParams.load(path)

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "bad.params"
        P.save(path)
        path.write_text(path.read_text() + "bogus = 1\n")
        with pytest.raises(DomainError, match="unknown"):
            MaterialParams.load(path)


class TestKeyValueParser:
    def test_comments_and_blanks(self):
        out = parse_keyvalue_text("# c\n\na = 1 # trailing\n b = x\n")
        assert out == {"a": "1", "b": "x"}

    def test_line_numbered_diagnostics(self):
        with pytest.raises(DomainError, match=":2:"):
            parse_keyvalue_text("a = 1\nnot a pair\n")

    def test_duplicate_key(self):
        with pytest.raises(DomainError, match="duplicate"):
            parse_keyvalue_text("a = 1\na = 2\n")


class TestSignals:
    def test_piecewise_linear_interp_and_extrapolation(self):
        sig = PiecewiseLinear([0.0, 1.0, 3.0], [0.0, 2.0, 2.0])
        assert sig(0.5) == pytest.approx(1.0)
        assert sig(-1.0) == 0.0       # constant extrapolation
        assert sig(10.0) == 2.0

    def test_strictly_increasing_required(self):
        with pytest.raises(DomainError):
            PiecewiseLinear([0.0, 0.0, 1.0], [1.0, 2.0, 3.0])

    def test_piecewise_constant(self):
        sig = PiecewiseConstant([0.0, 1.0, 2.0], [5.0, -5.0])
        assert sig(0.5) == 5.0
        assert sig(1.0) == -5.0
        assert sig(2.5) == 0.0        # past the span
        assert sig(-0.1) == 0.0

    def test_drive_validation(self):
        with pytest.raises(DomainError):
            DriveInput(v=Constant(0.0), J=PiecewiseLinear([0, 1], [0.1, -0.1]),
                       T_E=Constant(300.0))


class TestTriangularDrive:
    def test_strain_integrates_to_triangle(self):
        drive, t_end = triangular_drive(0.04, 1e-3, 2, P, power=0.1, ambient=300.0)
        assert t_end == pytest.approx(2 * 2 * 0.04 / 1e-3)
        # Integrate v/l0 and compare with the analytic triangle wave.
        ts = np.linspace(0, t_end, 40001)
        v = np.array([drive.v(t) for t in ts])
        eps = np.concatenate([[0.0], np.cumsum((v[1:] + v[:-1]) / 2)
                              * np.diff(ts) / P.l0])
        half = 0.04 / 1e-3
        tri = 0.04 * (1 - np.abs((ts / half) % 2 - 1))
        assert np.max(np.abs(eps - tri)) < 1e-5

    def test_invariants(self):
        with pytest.raises(DomainError):
            triangular_drive(0.07, 1e-3, 1, P)
        with pytest.raises(DomainError):
            triangular_drive(0.04, -1e-3, 1, P)
        with pytest.raises(DomainError):
            triangular_drive(0.04, 1e-3, 0, P)

    def test_breakpoints_interior(self):
        drive, t_end = triangular_drive(0.04, 1e-3, 2, P)
        pts = drive.breakpoints(t_end)
        assert np.all((pts > 0) & (pts < t_end))
        assert pts.size == 3


def test_strain_path_drive_realizes_path():
    times = [0.0, 10.0, 15.0, 25.0]
    strains = [0.0, 0.03, 0.02, 0.04]
    drive = strain_path_drive(times, strains, P)
    ts = np.linspace(0, 25.0, 25001)
    v = np.array([drive.v(t) for t in ts])
    eps = np.concatenate([[0.0], np.cumsum((v[1:] + v[:-1]) / 2)
                          * np.diff(ts) / P.l0])
    assert eps[-1] == pytest.approx(0.04, abs=1e-5)
    assert np.interp(10.0, ts, eps) == pytest.approx(0.03, abs=1e-5)
