"""JSON and CSV serialization of matrices, trajectories and shooting results.

A complex matrix is written as a list of rows, each entry a pair
``[re, im]``.  The literals ``"identity"`` and ``"zero"`` are accepted on
input when the dimension is known.
"""

import csv
import io
import json
import math

import numpy as np

from .errors import PreconditionError
from .flow import ConservationReport, Trajectory
from .variational import PMetric


def matrix_to_json(x):
    x = np.asarray(x, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in x]


def _entry(value):
    if isinstance(value, bool):
        raise PreconditionError("matrix entries must be numbers or [re, im] pairs")
    if isinstance(value, (int, float)):
        return complex(value, 0.0)
    if isinstance(value, (list, tuple)) and len(value) == 2 and all(
            isinstance(c, (int, float)) and not isinstance(c, bool) for c in value):
        return complex(value[0], value[1])
    raise PreconditionError(f"bad matrix entry {value!r}; expected [re, im]")


def parse_matrix(obj, n=None):
    """Matrix from its JSON value (already decoded) or an inline literal.

    Parameters
    ----------
    obj : str, list or dict
        ``"identity"``, ``"zero"``, a JSON string, a decoded list of rows, or
        a document whose ``"result"`` or ``"v0"`` entry holds the matrix
        (as written by the ``exp``, ``log`` and ``distance`` commands).
    n : int, optional
        Required dimension; mandatory for the literals.
    """
    if isinstance(obj, str):
        key = obj.strip().lower()
        if key in ("identity", "eye", "zero"):
            if n is None:
                raise PreconditionError(f"dimension required for literal {obj!r}")
            return np.eye(n, dtype=complex) if key != "zero" else np.zeros((n, n), complex)
        try:
            obj = json.loads(obj)
        except json.JSONDecodeError as exc:
            raise PreconditionError(f"cannot parse matrix: {exc}") from None
    if isinstance(obj, dict):
        key = next((k for k in ("result", "v0") if k in obj), None)
        if key is None:
            raise PreconditionError("matrix document needs a 'result' or 'v0' entry")
        obj = obj[key]
    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise PreconditionError("a matrix must be a non-empty list of rows")
    rows = [[_entry(v) for v in row] for row in obj]
    size = len(rows)
    if any(len(r) != size for r in rows):
        raise PreconditionError("matrix must be square")
    x = np.array(rows, dtype=complex)
    if not np.all(np.isfinite(x)):
        raise PreconditionError("matrix entries must be finite")
    if n is not None and size != n:
        raise PreconditionError(f"matrix has dimension {size}, expected {n}")
    return x


def load_matrix(path, n=None):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise PreconditionError(f"cannot read {path}: {exc.strerror}") from None
    return parse_matrix(text, n)


def _clean(value):
    """Replace non-finite floats by ``None`` so the output is strict JSON."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.generic):
        return _clean(value.item())
    return value


def dumps(obj):
    """Deterministic JSON text (sorted keys, shortest float repr)."""
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def _flat_pairs(x):
    return [[float(z.real), float(z.imag)] for z in np.asarray(x).ravel()]


def trajectory_to_dict(traj):
    """``{metric: {p}, N, times, g, v, w, diagnostics}``.

    Each of ``g``, ``v``, ``w`` holds one entry per node: the row-major list
    of ``[re, im]`` pairs of the ``N x N`` matrix.
    """
    return {
        "metric": {"p": traj.metric.p},
        "N": int(traj.dim),
        "times": [float(t) for t in traj.times],
        "g": [_flat_pairs(x) for x in traj.g],
        "v": [_flat_pairs(x) for x in traj.v],
        "w": [_flat_pairs(x) for x in traj.w],
        "diagnostics": traj.diagnostics.as_dict() if traj.diagnostics else None,
    }


def trajectory_from_dict(data):
    n = int(data["N"])

    def stack(key):
        arr = np.array(data[key], dtype=float)
        return (arr[..., 0] + 1j * arr[..., 1]).reshape(-1, n, n)

    diag = data.get("diagnostics")
    return Trajectory(
        metric=PMetric(data["metric"]["p"]),
        times=np.array(data["times"], dtype=float),
        g=stack("g"), v=stack("v"), w=stack("w"),
        diagnostics=ConservationReport(**diag) if diag else None,
    )


def trajectory_to_csv(traj, stream="g"):
    """CSV text with columns ``t, re_<stream>_i_j, im_<stream>_i_j, ...`` (row-major)."""
    if stream not in ("g", "v", "w"):
        raise PreconditionError(f"unknown stream {stream!r}")
    mats = getattr(traj, stream)
    n = traj.dim
    header = ["t"]
    for i in range(n):
        for j in range(n):
            header += [f"re_{stream}_{i}_{j}", f"im_{stream}_{i}_{j}"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for t, x in zip(traj.times, mats):
        row = [repr(float(t))]
        for z in x.ravel():
            row += [repr(float(z.real)), repr(float(z.imag))]
        writer.writerow(row)
    return buf.getvalue()


def bvp_to_dict(result, include_trajectory=True):
    """Shooting result: the trajectory document plus ``distance``,
    ``converged``, ``endpoint_residual``, ``iters`` and ``v0``."""
    out = trajectory_to_dict(result.trajectory) if include_trajectory else {
        "metric": {"p": result.trajectory.metric.p}, "N": int(result.trajectory.dim)}
    out.update({
        "distance": float(result.distance),
        "converged": bool(result.converged),
        "endpoint_residual": float(result.endpoint_residual),
        "iters": int(result.iters),
        "v0": matrix_to_json(result.v0),
    })
    return out
