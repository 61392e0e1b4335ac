"""CSV artifacts and the binary matrix dump."""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MATRIX_MAGIC = 0x53494D5741564531  # "SIMWAVE1"
MATRIX_VERSION = 1
_HEADER = struct.Struct("<8Q")


def fmt(x) -> str:
    """Shortest round-trip text for numbers, empty for missing cells."""
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return repr(float(x))


def render_csv(header: list, rows, meta: dict) -> str:
    lines = [f"# {key}: {value}" for key, value in meta.items()]
    lines.append(",".join(header))
    lines.extend(",".join(fmt(x) for x in row) for row in rows)
    return "\n".join(lines) + "\n"


def rate_row_header(num_users: int) -> list:
    return ["run_id", "N", "L", "K", "P_T_dbm", "seed",
            *[f"gamma_{k + 1}" for k in range(num_users)], "sum_se"]


def rate_row(run_id: int, n: int, l: int, p_t_dbm: float, seed: int, sinr, sum_se: float) -> list:
    return [run_id, n, l, len(sinr), p_t_dbm, seed, *sinr, sum_se]


def dump_matrix(path, matrix) -> None:
    """Row-major complex128 interleaved (re, im), little-endian, 64-byte header."""
    m = np.ascontiguousarray(np.atleast_2d(matrix), dtype="<c16")
    rows, cols = m.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MATRIX_MAGIC, MATRIX_VERSION, rows, cols, 0, 0, 0, 0))
        fh.write(m.tobytes(order="C"))


def load_matrix(path) -> np.ndarray:
    data = Path(path).read_bytes()
    magic, version, rows, cols, *_ = _HEADER.unpack_from(data)
    if magic != MATRIX_MAGIC:
        raise ValueError(f"{path}: not a matrix dump")
    if version != MATRIX_VERSION:
        raise ValueError(f"{path}: unsupported dump version {version}")
    body = np.frombuffer(data, dtype="<c16", offset=_HEADER.size)
    if body.size != rows * cols:
        raise ValueError(f"{path}: truncated matrix dump")
    return body.reshape(rows, cols).astype(complex)


PLOT_SCRIPT = '''\
"""Regenerate sum-SE figures from the CSV files in this directory."""
import sys
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

here = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent


def load(name):
    path = here / name
    if not path.exists():
        return None
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    header = lines[0].split(",")
    rows = [[float(x) if x else np.nan for x in l.split(",")] for l in lines[1:]]
    return header, np.array(rows)


for name, xlabel, out in [("sweep_n.csv", "meta-atoms per layer N", "sum_se_vs_n.png"),
                          ("sweep_l.csv", "number of layers L", "sum_se_vs_l.png")]:
    table = load(name)
    if table is None:
        continue
    header, data = table
    plt.figure()
    plt.errorbar(data[:, 0], data[:, header.index("mean_sum_se")],
                 yerr=data[:, header.index("std_sum_se")], marker="o", capsize=3)
    plt.xlabel(xlabel)
    plt.ylabel("sum SE [bit/s/Hz]")
    plt.grid(True, alpha=0.3)
    plt.savefig(here / out, dpi=150, bbox_inches="tight")

table = load("converge.csv")
if table is not None:
    header, data = table
    plt.figure()
    for j, col in enumerate(header[1:], start=1):
        plt.plot(data[:, 0], data[:, j], label=col)
    plt.xlabel("outer iteration")
    plt.ylabel("sum SE [bit/s/Hz]")
    plt.legend()
    plt.grid(True, alpha=0.3)
    plt.savefig(here / "convergence.png", dpi=150, bbox_inches="tight")
'''
