"""Command-line interface: scenario runs, model comparison sweeps,
parameter identification, and input validation.

Scenario, sweep-grid, and manifest files are flat ``key = value`` text
with unit-suffixed key names; see README for the formats.  Exit codes:
0 success, 1 parse/validation error, 2 solver failure.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from . import hybrid as hy
from .errors import SmaError
from .identification import Dataset, fit_index, run_pipeline
from .mas import MasState, simulate_mas
from .params import (DriveInput, MaterialParams, PiecewiseLinear,
                     parse_keyvalue_text, triangular_drive)
from .solver import compare_models, grid_view, integrate_hybrid

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_SOLVER = 2


def _parse_schedule(text: str, key: str) -> PiecewiseLinear:
    times, values = [], []
    for chunk in text.split(","):
        if ":" not in chunk:
            raise ValueError(f"{key}: schedule entries are 't:value', got {chunk!r}")
        t, v = chunk.split(":", 1)
        times.append(float(t))
        values.append(float(v))
    return PiecewiseLinear(times, values)


def _load_params(spec: str, base: Path) -> MaterialParams:
    if spec == "bundled":
        from .params import bundled_params
        return bundled_params()
    path = Path(spec)
    if not path.is_absolute():
        path = base / path
    return MaterialParams.load(path)


@dataclass
class Scenario:
    """Validated scenario configuration."""

    name: str
    model: str
    params: MaterialParams
    max_strain: float
    strain_rate: float
    cycles: int
    min_strain: float
    drive: DriveInput
    t_end: float
    eps0: float
    T_init: float
    rtol: float
    atol: float
    sample_dt: float
    grid_size: Optional[int] = None

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "Scenario":
        path = Path(path)
        data = parse_keyvalue_text(path.read_text(), str(path))
        return cls.from_dict(data, base=path.parent,
                             default_name=path.stem)

    @classmethod
    def from_dict(cls, data: dict[str, str], base: Path = Path("."),
                  default_name: str = "scenario") -> "Scenario":
        def take(key, default=None):
            if key in data:
                return data.pop(key)
            if default is None:
                raise ValueError(f"missing required key {key!r}")
            return default

        name = take("name", default_name)
        model = take("model", "both")
        if model not in ("hybrid", "mas", "both"):
            raise ValueError(f"model must be hybrid/mas/both, got {model!r}")
        params = _load_params(take("params", "bundled"), base)
        max_strain = float(take("max_strain"))
        rate = float(take("strain_rate_per_s"))
        cycles = int(take("cycles", "1"))
        min_strain = float(take("min_strain", "0.0"))
        if not (0.0 < max_strain <= 0.06):
            raise ValueError("max_strain must lie in (0, 0.06]")
        if rate <= 0.0:
            raise ValueError("strain_rate_per_s must be > 0")
        if cycles < 1:
            raise ValueError("cycles must be >= 1")

        if "joule_schedule_W" in data:
            power = _parse_schedule(data.pop("joule_schedule_W"), "joule_schedule_W")
        else:
            power = float(take("joule_power_W", "0.0"))
        if "ambient_schedule_K" in data:
            ambient = _parse_schedule(data.pop("ambient_schedule_K"),
                                      "ambient_schedule_K")
        else:
            ambient = float(take("ambient_temperature_K", "298.0"))

        drive, t_end = triangular_drive(max_strain, rate, cycles, params,
                                        power=power, ambient=ambient,
                                        min_strain=min_strain)
        restore = float(take("restore_power_W", "0.5"))
        T_default = drive.T_E(0.0) + restore / (params.lambda_h * params.A_S)
        T_init = float(take("initial_temperature_K", repr(float(T_default))))
        eps0 = float(take("initial_strain", repr(min_strain)))
        rtol = float(take("rel_tol", "1e-6"))
        atol = float(take("abs_tol", "1e-9"))
        hz = float(take("sample_rate_hz", "1000"))
        if hz <= 0.0:
            raise ValueError("sample_rate_hz must be > 0")
        grid_size = data.pop("branch_grid_points", None)
        if data:
            raise ValueError(f"unknown scenario keys: {sorted(data)}")
        return cls(name=name, model=model, params=params,
                   max_strain=max_strain, strain_rate=rate, cycles=cycles,
                   min_strain=min_strain, drive=drive, t_end=t_end,
                   eps0=eps0, T_init=T_init, rtol=rtol, atol=atol,
                   sample_dt=1.0 / hz,
                   grid_size=int(grid_size) if grid_size else None)


def bundled_scenario_path(name: str) -> Path:
    ref = resources.files("smawire.data") / "scenarios" / f"{name}.scn"
    with resources.as_file(ref) as path:
        return Path(path)


def _resolve_scenario(spec: str) -> Scenario:
    path = Path(spec)
    if not path.exists():
        candidate = bundled_scenario_path(spec)
        if candidate.exists():
            path = candidate
        else:
            raise ValueError(f"scenario {spec!r}: no such file or bundled name")
    return Scenario.from_file(path)


def run_scenario(sc: Scenario, outdir: Path) -> dict[str, object]:
    """Execute a scenario; returns artifacts for the summary."""
    outdir.mkdir(parents=True, exist_ok=True)
    result: dict[str, object] = {}
    if sc.model in ("hybrid", "both"):
        state0 = hy.initial_state(sc.params, eps0=sc.eps0, T_init=sc.T_init,
                                  grid_size=sc.grid_size)
        traj = integrate_hybrid(state0, sc.drive, sc.params, sc.t_end,
                                rtol=sc.rtol, atol=sc.atol,
                                sample_dt=sc.sample_dt)
        traj.to_csv(outdir / f"{sc.name}_hybrid.csv")
        traj.write_transitions(outdir / f"{sc.name}_transitions.txt")
        result["hybrid"] = traj
    if sc.model in ("mas", "both"):
        mtraj = simulate_mas(MasState(sc.eps0, 0.0, sc.T_init), sc.drive,
                             sc.params, sc.t_end, rtol=sc.rtol, atol=sc.atol,
                             sample_dt=sc.sample_dt, grid_size=sc.grid_size)
        mtraj.to_csv(outdir / f"{sc.name}_mas.csv")
        result["mas"] = mtraj

    blocks = []
    if "hybrid" in result:
        blocks.append(result["hybrid"].summary_text())
    if "mas" in result:
        blocks.append(result["mas"].summary_text())
    if sc.model == "both":
        hv = grid_view(result["hybrid"])
        m = result["mas"]
        n = min(hv["t"].size, m.t.size)
        blocks.append(
            "comparison:\n"
            f"fit_sigma_pct = {fit_index(m.sigma[:n], hv['sigma'][:n]):.2f}\n"
            f"fit_R_pct = {fit_index(m.R[:n], hv['R'][:n]):.2f}\n")
    summary = f"scenario = {sc.name}\n" + "\n".join(blocks)
    (outdir / f"{sc.name}_summary.txt").write_text(summary)
    result["summary"] = summary
    return result


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

@dataclass
class SweepSpec:
    name: str
    params: MaterialParams
    strains: list[float]
    rates: list[float]
    powers: list[float]
    cycles: int
    ambient: float
    rtol: float
    atol: float
    sample_dt: float
    grid_size: Optional[int] = None

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "SweepSpec":
        path = Path(path)
        data = parse_keyvalue_text(path.read_text(), str(path))

        def floats(key):
            return [float(v) for v in data.pop(key).split(",")]

        spec = cls(
            name=data.pop("name", path.stem),
            params=_load_params(data.pop("params", "bundled"), path.parent),
            strains=floats("max_strains"),
            rates=floats("strain_rates_per_s"),
            powers=floats("powers_W"),
            cycles=int(data.pop("cycles", "3")),
            ambient=float(data.pop("ambient_temperature_K", "298.0")),
            rtol=float(data.pop("rel_tol", "1e-6")),
            atol=float(data.pop("abs_tol", "1e-9")),
            sample_dt=1.0 / float(data.pop("sample_rate_hz", "100")),
            grid_size=(int(data.pop("branch_grid_points"))
                       if "branch_grid_points" in data else None),
        )
        if not (spec.strains and spec.rates and spec.powers):
            raise ValueError("sweep grid must be nonempty")
        if data:
            raise ValueError(f"unknown sweep keys: {sorted(data)}")
        return spec

    def cells(self) -> list[tuple[float, float, float]]:
        return [(s, j, r) for s in self.strains for j in self.powers
                for r in self.rates]


def _sweep_cell(args) -> tuple:
    spec, (strain, power, rate) = args
    p = spec.params
    drive, t_end = triangular_drive(strain, rate, spec.cycles, p,
                                    power=power, ambient=spec.ambient)
    T_init = spec.ambient + 0.5 / (p.lambda_h * p.A_S)
    try:
        cmp = compare_models(drive, p, t_end, eps0=0.0, T_init=T_init,
                             rtol=spec.rtol, atol=spec.atol,
                             sample_dt=spec.sample_dt,
                             grid_size=spec.grid_size)
    except SmaError as exc:
        return (strain, power, rate, "", "", "error", f"error: {exc}")
    if float(np.max(cmp.hybrid.f)) <= 0.0:
        # Wire never tensions: no force to compare.
        return (strain, power, rate, "", "", "", "")
    return (strain, power, rate, f"{cmp.wall_hybrid:.3f}",
            f"{cmp.wall_mas:.3f}", f"{cmp.fit_sigma:.1f}", f"{cmp.fit_R:.1f}")


def run_sweep(spec: SweepSpec, outdir: Path, workers: int = 1) -> Path:
    outdir.mkdir(parents=True, exist_ok=True)
    cells = spec.cells()
    jobs = [(spec, cell) for cell in cells]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_cell, jobs))
    else:
        rows = [_sweep_cell(job) for job in jobs]
    out = outdir / f"{spec.name}.csv"
    with open(out, "w") as fh:
        fh.write("max_strain,power_W,strain_rate_per_s,"
                 "time_hybrid_s,time_mas_s,fit_sigma_pct,fit_R_pct\n")
        for row in rows:
            fh.write(f"{row[0]:g},{row[1]:g},{row[2]:g},"
                     f"{row[3]},{row[4]},{row[5]},{row[6]}\n")
    return out


# ---------------------------------------------------------------------------
# identify
# ---------------------------------------------------------------------------

@dataclass
class Manifest:
    params: MaterialParams
    output: Path
    free_mechanical: tuple[str, ...]
    max_iter: int
    slow: list[Dataset] = field(default_factory=list)
    fast: list[Dataset] = field(default_factory=list)
    electrical: list[Dataset] = field(default_factory=list)


def _load_dataset(block: dict[str, str], base: Path) -> Dataset:
    drive_path = base / block.pop("drive")
    meas_path = base / block.pop("measured")
    d = np.loadtxt(drive_path, delimiter=",", skiprows=1)
    m = np.loadtxt(meas_path, delimiter=",", skiprows=1)
    if d.ndim != 2 or d.shape[1] != 4:
        raise ValueError(f"{drive_path}: drive CSV needs columns t,v,J,T_E")
    if m.ndim != 2 or m.shape[1] != 2:
        raise ValueError(f"{meas_path}: measurement CSV needs columns t,value")
    drive = DriveInput(v=PiecewiseLinear(d[:, 0], d[:, 1]),
                       J=PiecewiseLinear(d[:, 0], d[:, 2]),
                       T_E=PiecewiseLinear(d[:, 0], d[:, 3]))
    ds = Dataset(drive=drive, t=m[:, 0], measured=m[:, 1],
                 weight=float(block.pop("weight", "1.0")),
                 eps0=float(block.pop("initial_strain", "0.0")),
                 T_init=float(block.pop("initial_temperature_K", "298.0")),
                 label=block.pop("label", drive_path.stem))
    if block:
        raise ValueError(f"unknown dataset keys: {sorted(block)}")
    return ds


def parse_manifest(path: Union[str, Path]) -> Manifest:
    path = Path(path)
    header: dict[str, str] = {}
    sections: list[tuple[str, dict[str, str]]] = []
    current: Optional[dict[str, str]] = None
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            kind = line[1:-1].strip()
            if kind not in ("mechanical", "thermal", "electrical"):
                raise ValueError(f"{path}:{lineno}: unknown section {kind!r}")
            current = {}
            sections.append((kind, current))
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        (header if current is None else current)[key] = value

    mani = Manifest(
        params=_load_params(header.pop("params", "bundled"), path.parent),
        output=path.parent / header.pop("output", "fitted.params"),
        free_mechanical=tuple(
            s.strip() for s in header.pop(
                "free_mechanical", "E_A, E_M, eps_T, lambda_h").split(",")),
        max_iter=int(header.pop("max_iter", "400")),
    )
    if header:
        raise ValueError(f"{path}: unknown manifest keys {sorted(header)}")
    for kind, block in sections:
        ds = _load_dataset(dict(block), path.parent)
        getattr(mani, {"mechanical": "slow", "thermal": "fast",
                       "electrical": "electrical"}[kind]).append(ds)
    if not mani.slow:
        raise ValueError(f"{path}: at least one [mechanical] dataset required")
    return mani


def run_identify(mani: Manifest, outdir: Path) -> Path:
    outdir.mkdir(parents=True, exist_ok=True)
    fitted, reports = run_pipeline(mani.slow, mani.fast, mani.electrical,
                                   mani.params,
                                   free_mechanical=mani.free_mechanical,
                                   max_iter=mani.max_iter)
    fitted.save(mani.output)
    text = "\n".join(rep.to_text() for rep in reports)
    (outdir / "fit_report.txt").write_text(text)
    for rep in reports:
        if rep.objective_trace:
            np.savetxt(outdir / f"objective_{rep.stage}.csv",
                       np.column_stack([np.arange(len(rep.objective_trace)),
                                        rep.objective_trace]),
                       delimiter=",", header="eval,objective", comments="")
    return mani.output


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="smawire",
        description="Simulate and calibrate polycrystalline SMA wire actuators")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario file or bundled name")
    p_run.add_argument("scenario")
    p_run.add_argument("--out", default="out", help="output directory")
    p_run.add_argument("--rel-tol", type=float, default=None)
    p_run.add_argument("--abs-tol", type=float, default=None)

    p_sweep = sub.add_parser("sweep", help="model comparison over a test grid")
    p_sweep.add_argument("grid")
    p_sweep.add_argument("--out", default="out")
    p_sweep.add_argument("--workers", type=int, default=1)

    p_id = sub.add_parser("identify", help="three-stage parameter identification")
    p_id.add_argument("manifest")
    p_id.add_argument("--out", default="out")

    p_val = sub.add_parser("validate", help="parse and validate an input file")
    p_val.add_argument("file")
    p_val.add_argument("--kind", choices=("scenario", "params", "manifest"),
                       default="scenario")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            sc = _resolve_scenario(args.scenario)
            if args.rel_tol is not None:
                sc.rtol = args.rel_tol
            if args.abs_tol is not None:
                sc.atol = args.abs_tol
            result = run_scenario(sc, Path(args.out))
            sys.stdout.write(result["summary"])
        elif args.command == "sweep":
            spec = SweepSpec.from_file(args.grid)
            out = run_sweep(spec, Path(args.out), workers=args.workers)
            sys.stdout.write(f"wrote {out}\n")
        elif args.command == "identify":
            mani = parse_manifest(args.manifest)
            out = run_identify(mani, Path(args.out))
            sys.stdout.write(f"wrote {out}\n")
        elif args.command == "validate":
            if args.kind == "scenario":
                _resolve_scenario(args.file)
            elif args.kind == "params":
                MaterialParams.load(args.file)
            else:
                parse_manifest(args.file)
            sys.stdout.write("ok\n")
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INVALID
    except SmaError as exc:
        sys.stderr.write(f"solver error: {exc}\n")
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
