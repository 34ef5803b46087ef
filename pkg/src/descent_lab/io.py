"""CSV serialisation of descent and flow traces.

Floats are written with 17 significant digits, which is enough for every
finite double (and ``inf``/``nan``) to be read back bit for bit. Files are
UTF-8 with LF line endings and no quoting.
"""

import numpy as np

from .descent import Trace
from .flow import FlowTrace

FLOAT_FMT = "%.17g"


def _fmt(v):
    return FLOAT_FMT % v


def trace_header(dim):
    return ["k"] + [f"x_{i}" for i in range(dim)] + ["F", "grad_norm", "lambda_min", "lambda_max", "chi"]


def flow_header(dim=2):
    return ["t"] + [f"y_{i}" for i in range(dim)] + ["F", "grad_norm", "dissipation", "winding"]


def write_trace_csv(trace, path, z=None, radius=np.inf):
    """Write one row per record; ``chi`` is evaluated for ``B(z, radius)``."""
    z = np.zeros(trace.dim) if z is None else z
    chi = trace.chi_sequence(z, radius)
    lines = [",".join(trace_header(trace.dim))]
    for k in range(len(trace)):
        row = [str(k)]
        row.extend(_fmt(v) for v in trace.x[k])
        row.extend(_fmt(v) for v in (trace.f[k], trace.grad_norm[k],
                                     trace.lambda_min[k], trace.lambda_max[k]))
        row.append(str(int(chi[k])))
        lines.append(",".join(row))
    _write_lines(path, lines)
    return len(trace)


def read_trace_csv(path):
    """Inverse of :func:`write_trace_csv`; returns ``(trace, chi)``."""
    header, rows = _read_rows(path)
    dim = len(header) - 6
    if dim < 1 or header != trace_header(dim):
        raise ValueError(f"{path}: not a trace CSV header: {header}")
    data = np.array([[float(v) for v in r[1:-1]] for r in rows]).reshape(len(rows), dim + 4)
    chi = np.array([int(r[-1]) for r in rows], dtype=np.int8)
    trace = Trace(
        x=data[:, :dim].copy(), f=data[:, dim].copy(), grad_norm=data[:, dim + 1].copy(),
        lambda_min=data[:, dim + 2].copy(), lambda_max=data[:, dim + 3].copy(),
        budget=max(len(rows) - 1, 0),
    )
    return trace, chi


def write_flow_csv(trace, path):
    """One row per accepted step; ``winding`` is ``nan`` off the plane."""
    dim = trace.y.shape[1]
    wind = trace.winding if trace.winding is not None else np.full(len(trace), np.nan)
    cols = (trace.t, *trace.y.T, trace.f, trace.grad_norm, trace.dissipation, wind)
    lines = [",".join(flow_header(dim))]
    lines.extend(",".join(_fmt(c[i]) for c in cols) for i in range(len(trace)))
    _write_lines(path, lines)
    return len(trace)


def read_flow_csv(path):
    header, rows = _read_rows(path)
    dim = len(header) - 5
    if dim < 1 or header != flow_header(dim):
        raise ValueError(f"{path}: not a flow CSV header: {header}")
    data = np.array([[float(v) for v in r] for r in rows]).reshape(len(rows), dim + 5)
    wind = data[:, -1].copy()
    return FlowTrace(
        t=data[:, 0].copy(), y=data[:, 1 : dim + 1].copy(), f=data[:, dim + 1].copy(),
        grad_norm=data[:, dim + 2].copy(), dissipation=data[:, dim + 3].copy(),
        winding=wind if dim == 2 else None,
    )


def _write_lines(path, lines):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")


def _read_rows(path):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty file")
    return lines[0].split(","), [ln.split(",") for ln in lines[1:] if ln]
