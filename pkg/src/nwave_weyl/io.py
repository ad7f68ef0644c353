"""CSV/JSON interchange for potentials, Weyl tables and GBDT seed data.

Matrix-valued grid functions are stored one row per node with columns
``Re(a_kj), Im(a_kj)`` in row-major entry order. Complex values in JSON are
``[re, im]`` pairs. Floats are written with 17 significant digits so that
identical inputs give byte-identical files.
"""
import csv
import json
from pathlib import Path

import numpy as np

from .errors import InvalidInput
from .spectral_core import PotentialGrid, SpectralLine, WeylTable

FLOAT_FMT = "%.17g"


def complex_to_json(a):
    a = np.asarray(a, dtype=complex)
    if a.ndim == 0:
        return [float(a.real), float(a.imag)]
    return [complex_to_json(v) for v in a]


def complex_from_json(obj):
    """Inverse of :func:`complex_to_json`: nested lists ending in ``[re, im]`` pairs."""
    a = np.asarray(obj, dtype=float)
    if a.ndim == 0 or a.shape[-1] != 2:
        raise InvalidInput("complex values must be given as [re, im] pairs")
    return a[..., 0] + 1j * a[..., 1]


def matrix_header(m, key="x", name="a"):
    cols = [key]
    for k in range(1, m + 1):
        for j in range(1, m + 1):
            cols += [f"Re({name}_{k}{j})", f"Im({name}_{k}{j})"]
    return cols


def _flatten(values):
    n, m, _ = values.shape
    flat = values.reshape(n, m * m)
    out = np.empty((n, 2 * m * m))
    out[:, 0::2] = flat.real
    out[:, 1::2] = flat.imag
    return out


def _unflatten(data, m):
    cplx = data[:, 0::2] + 1j * data[:, 1::2]
    return cplx.reshape(-1, m, m)


def write_matrix_csv(path, key, values, key_name="x", name="a"):
    values = np.asarray(values, dtype=complex)
    m = values.shape[-1]
    rows = np.column_stack([np.asarray(key, dtype=float), _flatten(values)])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(matrix_header(m, key_name, name))
        for r in rows:
            w.writerow([FLOAT_FMT % v for v in r])


def read_matrix_csv(path):
    with open(path, newline="") as fh:
        header = next(csv.reader(fh))
    ncol = len(header) - 1
    m = int(round(np.sqrt(ncol / 2)))
    if 2 * m * m != ncol:
        raise InvalidInput(f"{path}: header does not describe square matrices")
    data = np.atleast_2d(np.loadtxt(path, delimiter=",", skiprows=1))
    return data[:, 0], _unflatten(data[:, 1:], m)


def write_potential(path, zeta):
    write_matrix_csv(path, zeta.x, zeta.values, "x", "a")


def read_potential(path):
    x, v = read_matrix_csv(path)
    return PotentialGrid(x, v)


def sidecar_path(path):
    return Path(path).with_suffix(".json")


def write_weyl_table(path, table):
    """CSV keyed by ``lambda`` and a JSON sidecar ``{m, eta, M_bound, alpha, source}``."""
    write_matrix_csv(path, table.lam, table.phi, "lambda", "phi")
    meta = {
        "m": table.m,
        "eta": table.line.eta,
        "M_bound": table.line.M_bound,
        "alpha": None if table.alpha is None else complex_to_json(table.alpha),
        "source": table.source,
    }
    write_json(sidecar_path(path), meta)


def read_weyl_table(path):
    lam, phi = read_matrix_csv(path)
    meta = read_json(sidecar_path(path))
    if int(meta["m"]) != phi.shape[-1]:
        raise InvalidInput("sidecar m does not match the table")
    line = SpectralLine(float(meta["eta"]), lam, float(meta.get("M_bound", 0.0)))
    alpha = meta.get("alpha")
    alpha = None if alpha is None else complex_from_json(alpha)
    return WeylTable(line, phi, alpha=alpha, source=meta.get("source", "closed-form"))


def read_gbdt_seed(obj_or_path):
    """``(A, S0, Pi0)`` from a JSON file or an already parsed mapping."""
    obj = obj_or_path
    if isinstance(obj, (str, Path)):
        obj = read_json(obj)
    try:
        return tuple(np.atleast_2d(complex_from_json(obj[k])) for k in ("A", "S0", "Pi0"))
    except KeyError as exc:
        raise InvalidInput(f"GBDT seed is missing {exc}") from exc


def _default(o):
    if isinstance(o, np.ndarray):
        if np.iscomplexobj(o):
            return complex_to_json(o)
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialize {type(o)}")


def dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=_default, allow_nan=True)


def write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(dumps(obj) + "\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)
