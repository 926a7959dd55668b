"""Line-delimited JSON stdio server exposing the watermark core's three
public callables (configure / bias / detect) to non-Python callers.

Zero-logic rule: this file does serialization only — every watermark
computation happens inside ``trimark`` public functions, so any numeric
disagreement with the core is a bridge defect by definition.

Wire conventions:
- requests:  ``{"id": int, "op": "configure"|"bias"|"detect"|"close", ...}``
- responses: ``{"id": int, "ok": true, ...}`` or
  ``{"id": int, "ok": false, "error": "<Type>: <message>"}``
- float arrays cross as base64 of little-endian IEEE-754 doubles (bit-exact,
  ``-inf`` included); the red mask crosses as a list of 0/1 integers
- 64-bit keys cross as decimal strings in both directions (JSON numbers lose
  integer precision past 2**53)
"""

from __future__ import annotations

import base64
import json
import sys

import numpy as np

from trimark import PartitionParams, bias_for_context, detect

_handles: dict[str, PartitionParams] = {}
_counter = 0


def _params_for(request: dict) -> PartitionParams:
    handle = request.get("handle")
    params = _handles.get(handle)
    if params is None:
        raise ValueError(f"unknown or closed handle: {handle!r}")
    return params


def _op_configure(request: dict) -> dict:
    global _counter
    params = PartitionParams.from_dict(request.get("params", {}))
    _counter += 1
    handle = f"h{_counter}"
    _handles[handle] = params
    return {"handle": handle}


def _op_bias(request: dict) -> dict:
    params = _params_for(request)
    logits = np.frombuffer(base64.b64decode(request["logits_b64"]), dtype="<f8")
    biased = bias_for_context(request["context"], logits, params)
    values = np.ascontiguousarray(biased.values, dtype="<f8")
    return {
        "logits_b64": base64.b64encode(values.tobytes()).decode("ascii"),
        "red_mask": [int(bit) for bit in biased.red_mask],
    }


def _op_detect(request: dict) -> dict:
    params = _params_for(request)
    report = detect(request["tokens"], params).to_json_dict()
    report["params"]["key"] = str(report["params"]["key"])
    return {"report": report}


def _op_close(request: dict) -> dict:
    handle = request.get("handle")
    if _handles.pop(handle, None) is None:
        raise ValueError(f"unknown or closed handle: {handle!r}")
    return {"closed": handle}


_OPS = {
    "configure": _op_configure,
    "bias": _op_bias,
    "detect": _op_detect,
    "close": _op_close,
}


def serve(stdin=sys.stdin, stdout=sys.stdout) -> None:
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        request_id = None
        try:
            request = json.loads(line)
            request_id = request.get("id")
            handler = _OPS.get(request.get("op"))
            if handler is None:
                raise ValueError(f"unknown op: {request.get('op')!r}")
            response = {"id": request_id, "ok": True, **handler(request)}
        except Exception as exc:  # every failure becomes a structured reply
            response = {
                "id": request_id,
                "ok": False,
                "error": f"{type(exc).__name__}: {exc}",
            }
        stdout.write(json.dumps(response) + "\n")
        stdout.flush()


if __name__ == "__main__":
    serve()
