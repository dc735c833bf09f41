"""JSON network format.

Top-level keys: ``kind`` (``fnn``/``rnn``/``mrnn``), ``dims``, ``layers``;
recurrent kinds add ``embed`` and ``project``, ``mrnn`` layers carry a boolean
``mask``, and ``rnn`` may carry ``output_clip``. Floats are written with
Python's shortest round-trip repr, so load(dump(net)) is bit-exact.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .networks import DimensionError, FeedforwardNet, ModifiedRecurrentNet, RecurrentLayer, RecurrentNet


class NetworkFormatError(ValueError):
    """The document is not a valid network description."""


def _mat(a) -> list:
    return np.asarray(a, dtype=np.float64).tolist()


def network_to_dict(net, N: int | None = None) -> dict:
    if isinstance(net, FeedforwardNet):
        doc = {
            "kind": "fnn",
            "dims": {"d_x": net.input_dim, "d_y": net.output_dim, "W": net.width, "L": net.depth},
            "layers": [{"A": _mat(A), "b": _mat(b)} for A, b in net.layers],
        }
    elif isinstance(net, (RecurrentNet, ModifiedRecurrentNet)):
        kind = "rnn" if isinstance(net, RecurrentNet) else "mrnn"
        layers = []
        for layer, mask in zip(net.layers, net.masks()):
            entry = {"A": _mat(layer.A), "B": _mat(layer.B), "c": _mat(layer.c)}
            if kind == "mrnn":
                entry["mask"] = [bool(m) for m in mask]
            layers.append(entry)
        doc = {
            "kind": kind,
            "dims": {"d_x": net.input_dim, "d_y": net.output_dim, "W": net.width, "L": net.depth},
            "embed": _mat(net.embed),
            "layers": layers,
            "project": _mat(net.project),
        }
        if kind == "rnn" and net.output_clip is not None:
            doc["output_clip"] = net.output_clip
    else:
        raise TypeError(f"cannot serialize {type(net).__name__}")
    if N is not None:
        doc["dims"]["N"] = int(N)
    return doc


def _matrix(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 1 and arr.size == 0:
        raise NetworkFormatError(f"{name} is empty")
    return arr


def network_from_dict(doc: dict):
    """Inverse of :func:`network_to_dict`. Raises :class:`NetworkFormatError`."""
    if not isinstance(doc, dict) or "kind" not in doc or "layers" not in doc:
        raise NetworkFormatError("network document needs 'kind' and 'layers'")
    kind = doc["kind"]
    try:
        if kind == "fnn":
            net = FeedforwardNet(tuple((_matrix(l["A"], "A"), _matrix(l["b"], "b")) for l in doc["layers"]))
        elif kind in ("rnn", "mrnn"):
            layers = tuple(
                RecurrentLayer(_matrix(l["A"], "A"), _matrix(l["B"], "B"), _matrix(l["c"], "c")) for l in doc["layers"]
            )
            embed = _matrix(doc["embed"], "embed")
            project = _matrix(doc["project"], "project")
            if kind == "rnn":
                net = RecurrentNet(embed, layers, project, doc.get("output_clip"))
            else:
                masks = tuple(np.asarray(l["mask"], dtype=bool) for l in doc["layers"])
                net = ModifiedRecurrentNet(embed, layers, project, masks)
        else:
            raise NetworkFormatError(f"unknown network kind {kind!r}")
    except (KeyError, TypeError) as exc:
        raise NetworkFormatError(f"malformed {kind} document: {exc}") from exc
    except DimensionError as exc:
        raise NetworkFormatError(f"inconsistent {kind} shapes: {exc}") from exc
    dims = doc.get("dims", {})
    for key, actual in (("d_x", net.input_dim), ("d_y", net.output_dim), ("L", net.depth)):
        if key in dims and int(dims[key]) != actual:
            raise NetworkFormatError(f"dims.{key}={dims[key]} disagrees with layers ({actual})")
    return net


def dumps(net, N: int | None = None) -> str:
    return json.dumps(network_to_dict(net, N))


def loads(text: str):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkFormatError(f"not valid JSON: {exc}") from exc
    return network_from_dict(doc)


def save_network(net, path, N: int | None = None) -> None:
    Path(path).write_text(dumps(net, N))


def load_network(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise NetworkFormatError(f"cannot read {path}: {exc}") from exc
    return loads(text)


def sequence_length_hint(path) -> int | None:
    """``dims.N`` from a saved network, if recorded."""
    try:
        doc = json.loads(Path(path).read_text())
        return int(doc.get("dims", {})["N"])
    except (OSError, ValueError, KeyError, TypeError):
        return None
