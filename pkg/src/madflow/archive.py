"""Run archive: binary snapshot/trajectory files with CSV mirrors, an
analyses table and a one-key-per-line summary.

Binary layouts (little-endian):

snapshots.bin   magic 'MFSN', u32 version=1, u32 dim, u32 n[dim],
                f64 lo[dim], f64 hi[dim], u8 boundary (0 periodic,
                1 dirichlet), u32 snap_count, then per snapshot:
                f64 t, f64 interleaved re/im values in C order.

trajectories.bin magic 'MFTR', u32 version=1, u8 kind (0 classical,
                1 bohmian, 2 nelsonian), u32 walkers, u32 times, u32 dim,
                u64 seed (2^64-1 when absent), f64 times[T],
                f64 positions[walkers, T, dim] in C order.

analyses.csv    long format: analysis,record,field,value.
summary.txt     `key = value`, one per line.
manifest.txt    resolved scenario echo plus version, seed and file list.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import StructuralError
from .grids import DIRICHLET, PERIODIC, Grid
from .trajectories import TrajectorySet

_CSV_VALUE_CAP = 2_000_000
_TRAJ_CSV_WALKER_CAP = 200
_KINDS = {"classical": 0, "bohmian": 1, "nelsonian": 2}
_KINDS_REV = {v: k for k, v in _KINDS.items()}
_NO_SEED = 2**64 - 1


def write_snapshots(path: Path, grid: Grid, times: np.ndarray, psis: np.ndarray):
    with open(path, "wb") as f:
        f.write(b"MFSN")
        f.write(struct.pack("<II", 1, grid.dim))
        f.write(struct.pack(f"<{grid.dim}I", *grid.n))
        f.write(struct.pack(f"<{grid.dim}d", *grid.lo))
        f.write(struct.pack(f"<{grid.dim}d", *grid.hi))
        f.write(struct.pack("<B", 0 if grid.periodic else 1))
        f.write(struct.pack("<I", len(times)))
        for t, psi in zip(times, psis):
            f.write(struct.pack("<d", float(t)))
            inter = np.empty(psi.size * 2)
            inter[0::2] = psi.real.ravel()
            inter[1::2] = psi.imag.ravel()
            f.write(inter.astype("<f8").tobytes())


def read_snapshots(path: Path) -> tuple[Grid, np.ndarray, np.ndarray]:
    with open(path, "rb") as f:
        if f.read(4) != b"MFSN":
            raise StructuralError(f"{path} is not a snapshot archive")
        _, dim = struct.unpack("<II", f.read(8))
        n = struct.unpack(f"<{dim}I", f.read(4 * dim))
        lo = struct.unpack(f"<{dim}d", f.read(8 * dim))
        hi = struct.unpack(f"<{dim}d", f.read(8 * dim))
        boundary = PERIODIC if struct.unpack("<B", f.read(1))[0] == 0 else DIRICHLET
        count = struct.unpack("<I", f.read(4))[0]
        grid = Grid(lo, hi, n, boundary)
        total = int(np.prod(n))
        times = np.empty(count)
        psis = np.empty((count,) + tuple(n), dtype=complex)
        for k in range(count):
            times[k] = struct.unpack("<d", f.read(8))[0]
            inter = np.frombuffer(f.read(16 * total), dtype="<f8")
            psis[k] = (inter[0::2] + 1j * inter[1::2]).reshape(n)
    return grid, times, psis


def write_trajectories(path: Path, traj: TrajectorySet):
    w, t, d = traj.positions.shape
    with open(path, "wb") as f:
        f.write(b"MFTR")
        f.write(struct.pack("<I", 1))
        f.write(struct.pack("<B", _KINDS[traj.kind]))
        f.write(struct.pack("<III", w, t, d))
        f.write(struct.pack("<Q", _NO_SEED if traj.seed is None else traj.seed))
        f.write(traj.times.astype("<f8").tobytes())
        f.write(traj.positions.astype("<f8").tobytes())


def read_trajectories(path: Path) -> TrajectorySet:
    with open(path, "rb") as f:
        if f.read(4) != b"MFTR":
            raise StructuralError(f"{path} is not a trajectory archive")
        struct.unpack("<I", f.read(4))
        kind = _KINDS_REV[struct.unpack("<B", f.read(1))[0]]
        w, t, d = struct.unpack("<III", f.read(12))
        seed = struct.unpack("<Q", f.read(8))[0]
        times = np.frombuffer(f.read(8 * t), dtype="<f8").copy()
        pos = np.frombuffer(f.read(8 * w * t * d), dtype="<f8").reshape(w, t, d).copy()
    return TrajectorySet(kind=kind, times=times, positions=pos,
                         seed=None if seed == _NO_SEED else seed)


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_density_csv(path: Path, grid: Grid, times: np.ndarray, psis: np.ndarray,
                      max_rows: int = 70_000):
    """Density mirror at up to three snapshot times, subsampled to max_rows."""
    picks = sorted({0, len(times) // 2, len(times) - 1})
    rows_per_snap = max_rows // len(picks)
    with open(path, "w") as f:
        header = "t,x,rho\n" if grid.dim == 1 else "t,x,y,rho\n"
        f.write(header)
        for k in picks:
            rho = np.abs(psis[k]) ** 2
            if grid.dim == 1:
                stride = max(1, grid.n[0] // rows_per_snap)
                for i in range(0, grid.n[0], stride):
                    f.write(f"{times[k]!r},{grid.axes[0][i]!r},{rho[i]!r}\n")
            else:
                per_axis = max(1, int(np.sqrt(grid.n[0] * grid.n[1] / rows_per_snap)))
                for i in range(0, grid.n[0], per_axis):
                    for j in range(0, grid.n[1], per_axis):
                        f.write(f"{times[k]!r},{grid.axes[0][i]!r},"
                                f"{grid.axes[1][j]!r},{rho[i, j]!r}\n")


def write_trajectories_csv(path: Path, traj: TrajectorySet):
    w = traj.positions.shape[0]
    step = max(1, w // _TRAJ_CSV_WALKER_CAP)
    dim = traj.positions.shape[2]
    with open(path, "w") as f:
        f.write("walker,t," + ",".join(f"q{d+1}" for d in range(dim)) + "\n")
        for wi in range(0, w, step):
            for k, t in enumerate(traj.times):
                coords = ",".join(repr(float(traj.positions[wi, k, d]))
                                  for d in range(dim))
                f.write(f"{wi},{t!r},{coords}\n")


def write_analyses_csv(path: Path, tables: dict[str, list[dict]]):
    with open(path, "w") as f:
        f.write("analysis,record,field,value\n")
        for analysis in sorted(tables):
            for rec_idx, rec in enumerate(tables[analysis]):
                for key in rec:
                    f.write(f"{analysis},{rec_idx},{key},{_fmt(rec[key])}\n")


def read_analyses_csv(path: Path) -> dict[str, list[dict]]:
    tables: dict[str, dict[int, dict]] = {}
    with open(path) as f:
        header = f.readline()
        if header.strip() != "analysis,record,field,value":
            raise StructuralError(f"{path} is not an analyses table")
        for line in f:
            analysis, rec, field, value = line.rstrip("\n").split(",", 3)
            tables.setdefault(analysis, {}).setdefault(int(rec), {})[field] = value
    return {a: [recs[i] for i in sorted(recs)] for a, recs in tables.items()}


def write_summary(path: Path, entries: dict):
    with open(path, "w") as f:
        for key in entries:
            f.write(f"{key} = {_fmt(entries[key])}\n")


def read_summary(path: Path) -> dict[str, str]:
    out = {}
    with open(path) as f:
        for line in f:
            if "=" in line:
                k, v = line.split("=", 1)
                out[k.strip()] = v.strip()
    return out
