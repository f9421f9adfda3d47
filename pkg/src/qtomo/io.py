"""JSON file formats and canonical serialization.

Complex scalars are encoded as two-element arrays [re, im] and matrices as
row-major nested arrays.  The canonical writer sorts keys and prints floats
with 17 significant digits, so writing, reading and re-writing a document
reproduces it byte for byte.
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .channels import Instrument, kraus_from_choi
from .dynamics import LindbladModel
from .errors import ContractViolation
from .measures import Detector, QuantumMeasure
from .optics import Leaf, Split


def complex_to_json(z):
    z = complex(z)
    return [z.real, z.imag]


def json_to_complex(obj) -> complex:
    if isinstance(obj, (int, float)):
        return complex(obj)
    if isinstance(obj, (list, tuple)) and len(obj) == 2:
        return complex(obj[0], obj[1])
    raise ContractViolation(f"cannot parse {obj!r} as a complex scalar")


def matrix_to_json(m):
    arr = np.asarray(m, dtype=complex)
    return [[complex_to_json(x) for x in row] for row in arr]


def matrix_from_json(obj) -> np.ndarray:
    if not isinstance(obj, list) or not obj:
        raise ContractViolation("matrix must be a nonempty nested array")
    return np.array([[json_to_complex(x) for x in row] for row in obj], dtype=complex)


def vector_from_json(obj) -> np.ndarray:
    if not isinstance(obj, list):
        raise ContractViolation("vector must be an array")
    return np.array([json_to_complex(x) for x in obj], dtype=complex)


def density_to_json(rho):
    arr = np.asarray(rho, dtype=complex)
    return {"dim": arr.shape[0], "matrix": matrix_to_json(arr)}


def density_from_json(obj) -> np.ndarray:
    if "matrix" not in obj:
        raise ContractViolation("density document needs a 'matrix' field")
    m = matrix_from_json(obj["matrix"])
    if "dim" in obj and int(obj["dim"]) != m.shape[0]:
        raise ContractViolation(
            f"declared dim {obj['dim']} does not match matrix shape {m.shape}"
        )
    return m


def measure_to_json(measure: QuantumMeasure, scale=None):
    doc = {
        "dim": measure.dim,
        "elements": [matrix_to_json(p) for p in measure.elements],
    }
    if scale is not None:
        values = np.asarray(scale, dtype=complex)
        if values.ndim == 1:
            values = values[:, None]
        doc["scale"] = [[complex_to_json(x) for x in row] for row in values]
    return doc


def measure_from_json(obj):
    """Parse a measure document; returns (QuantumMeasure, scale or None)."""
    if "elements" not in obj:
        raise ContractViolation("measure document needs an 'elements' field")
    measure = QuantumMeasure([matrix_from_json(e) for e in obj["elements"]])
    if "dim" in obj and int(obj["dim"]) != measure.dim:
        raise ContractViolation(
            f"declared dim {obj['dim']} does not match element dimension {measure.dim}"
        )
    scale = None
    if obj.get("scale") is not None:
        scale = np.array(
            [[json_to_complex(x) for x in row] for row in obj["scale"]], dtype=complex
        )
    return measure, scale


def detector_from_json(obj) -> Detector:
    measure, scale = measure_from_json(obj)
    if scale is None:
        raise ContractViolation("detector document needs a 'scale' field")
    return Detector(measure, scale)


def channel_to_json(kraus):
    ops = [np.asarray(t, dtype=complex) for t in kraus]
    return {"dim": ops[0].shape[0], "kraus": [matrix_to_json(t) for t in ops]}


def channel_from_json(obj) -> list:
    """Parse a channel given as Kraus operators or a Choi matrix."""
    if "kraus" in obj:
        ops = [matrix_from_json(t) for t in obj["kraus"]]
    elif "choi" in obj:
        ops = kraus_from_choi(matrix_from_json(obj["choi"]))
    else:
        raise ContractViolation("channel document needs 'kraus' or 'choi'")
    if "dim" in obj and int(obj["dim"]) != ops[0].shape[0]:
        raise ContractViolation(
            f"declared dim {obj['dim']} does not match operator dimension {ops[0].shape[0]}"
        )
    return ops


def instrument_from_json(obj) -> Instrument:
    if "branches" not in obj:
        raise ContractViolation("instrument document needs a 'branches' field")
    return Instrument(tuple(tuple(channel_from_json(b)) for b in obj["branches"]))


def instrument_to_json(instrument: Instrument):
    return {
        "dim": instrument.dim,
        "branches": [channel_to_json(b) for b in instrument.branches],
    }


def network_from_json(obj):
    if "leaf" in obj:
        return Leaf(matrix_from_json(obj["leaf"]["jones"]))
    if "split" in obj:
        left, right = obj["split"]
        return Split(network_from_json(left), network_from_json(right))
    raise ContractViolation("network node must have 'leaf' or 'split'")


def network_to_json(net):
    if isinstance(net, Leaf):
        return {"leaf": {"jones": matrix_to_json(net.jones)}}
    return {"split": [network_to_json(net.left), network_to_json(net.right)]}


def model_from_json(obj):
    """Parse a dynamics model: H, optional V, optional lindblad, rho0."""
    if "H" not in obj or "rho0" not in obj:
        raise ContractViolation("model document needs 'H' and 'rho0'")
    h = matrix_from_json(obj["H"])
    rho0 = matrix_from_json(obj["rho0"])
    hbar = float(obj.get("hbar", 1.0))
    v = matrix_from_json(obj["V"]) if obj.get("V") is not None else None
    lindblad = None
    if obj.get("lindblad") is not None:
        section = obj["lindblad"]
        lindblad = LindbladModel(
            h,
            tuple(matrix_from_json(l) for l in section["L"]),
            tuple(float(g) for g in section["gamma"]),
            hbar,
        )
    return {"H": h, "V": v, "hbar": hbar, "rho0": rho0, "lindblad": lindblad}


def trajectory_to_json(traj):
    return [
        {"t": float(t), "matrix": matrix_to_json(state)}
        for t, state in zip(traj.times, traj.states)
    ]


def _canonical(obj, out):
    if obj is None or obj is True or obj is False:
        out.append(json.dumps(obj))
    elif isinstance(obj, (int, np.integer)) and not isinstance(obj, bool):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not np.isfinite(x):
            raise ContractViolation("cannot serialize non-finite numbers")
        out.append(f"{x:.17g}")
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        out.append("{")
        for i, key in enumerate(sorted(obj)):
            if i:
                out.append(",")
            out.append(json.dumps(str(key)))
            out.append(":")
            _canonical(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        out.append("[")
        for i, item in enumerate(list(obj)):
            if i:
                out.append(",")
            _canonical(item, out)
        out.append("]")
    else:
        raise ContractViolation(f"cannot serialize {type(obj)!r} canonically")


def canonical_json(obj) -> str:
    """Deterministic JSON: sorted keys, floats at 17 significant digits."""
    out = []
    _canonical(obj, out)
    return "".join(out)


def write_json_atomic(path, obj):
    """Write canonical JSON via a temp file and rename, so readers never see partial output."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(canonical_json(obj))
            handle.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_json(path):
    with open(path) as handle:
        return json.load(handle)
