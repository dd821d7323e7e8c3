"""Python front end for the XNOR-RRAM simulator.

The trainer writes models through `write_model`; the C++ side reads them with
`Model.load`. Both share the same bit packing (`pack_bits`/`unpack_bits`).
"""

import json
from pathlib import Path

import numpy as np

from ._core import (  # noqa: F401
    MANIFEST_VERSION,
    ConfigError,
    ConvergenceError,
    HeaderConfig,
    IoError,
    MacroArray,
    Model,
    QuantizerSpec,
    calibrate,
    confined_quantize,
    derive_seed,
    full_range_quantize,
    pack_bits,
    packed_size,
    perf_report,
    unpack_bits,
)


def _sign(w):
    w = np.asarray(w)
    return np.where(w >= 0, 1, -1).astype(np.int8)


def write_model(directory, layers, input_shape, binarize_threshold=0.5):
    """Write a manifest plus one packed weight file per layer.

    Each layer is a dict with name, kind ("FC"/"CONV"), weights and optionally bn
    ({gamma, beta, mean, var, eps}), threshold/direction, stride, padding, pool and
    activation. FC weights are [in, out]; CONV weights are [kh, kw, in, out] and are
    written kernel-position-major. Real-valued weights are binarized by sign.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format_version": MANIFEST_VERSION,
        "preprocessing": {"binarize_threshold": float(binarize_threshold)},
        "input_shape": [int(v) for v in input_shape],
        "layers": [],
    }
    for layer in layers:
        w = _sign(layer["weights"])
        entry = {"name": layer["name"], "kind": layer["kind"], "weight_file": layer["name"] + ".bin"}
        if layer["kind"] == "FC":
            entry["shape"] = [int(w.shape[0]), int(w.shape[1])]
            blobs = [pack_bits(w)]
        elif layer["kind"] == "CONV":
            kh, kw, cin, cout = w.shape
            entry["shape"] = [int(cin), int(cout), int(kh), int(kw)]
            blobs = [pack_bits(w[y, x]) for y in range(kh) for x in range(kw)]
        else:
            raise ValueError("layer kind must be FC or CONV")
        for key in ("stride", "padding", "pool", "activation", "threshold", "direction"):
            if key in layer:
                entry[key] = layer[key]
        if "bn" in layer:
            entry["bn"] = {k: (np.asarray(v, dtype=np.float32).tolist() if k != "eps" else float(v))
                           for k, v in layer["bn"].items()}
        (directory / entry["weight_file"]).write_bytes(b"".join(blobs))
        manifest["layers"].append(entry)
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path
