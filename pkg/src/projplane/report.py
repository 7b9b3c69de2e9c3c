"""Deterministic plain-text reports.

Results are nested dicts; they are flattened to dotted keys, sorted, and
rendered one ``key: value`` per line between fixed delimiters.  Floats use
``repr`` so identical computations give identical bytes.
"""

from __future__ import annotations

import numpy as np

from . import __version__

BEGIN = "=== projplane report ==="
RESULT = "--- result ---"
END = "=== end ==="


def _scalar(v):
    if v is None:
        return "null"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (complex, np.complexfloating)):
        z = complex(v)
        if z.imag == 0:
            return repr(float(z.real))
        return f"{z.real!r}{'+' if z.imag >= 0 else '-'}{abs(z.imag)!r}i"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v).replace("\n", "\\n")


def _is_flat_list(v):
    return all(not isinstance(x, (dict, list, tuple, np.ndarray)) for x in v)


def flatten(obj, prefix=""):
    """Yield ``(dotted_key, rendered_value)`` pairs."""
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from flatten(v, f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, (list, tuple)):
        if _is_flat_list(obj):
            yield prefix, "[" + ", ".join(_scalar(x) for x in obj) + "]"
        else:
            width = len(str(len(obj) - 1))
            for i, v in enumerate(obj):
                yield from flatten(v, f"{prefix}.{i:0{width}d}")
    else:
        yield prefix, _scalar(obj)


def emit_report(result, command, seed=None, options=None):
    header = {"command": command, "seed": seed, "version": __version__}
    lines = [BEGIN]
    lines += [f"{k}: {v}" for k, v in sorted(flatten(header))]
    if options:
        lines += [f"{k}: {v}" for k, v in sorted(flatten({"options": options}))]
    lines.append(RESULT)
    lines += [f"{k}: {v}" for k, v in sorted(flatten(result))]
    lines.append(END)
    return "\n".join(lines) + "\n"


def parse_report(text):
    """Inverse of the line format, values left as strings."""
    out = {}
    for line in text.splitlines():
        if line in (BEGIN, RESULT, END) or not line:
            continue
        key, _, value = line.partition(": ")
        out[key] = value
    return out
