"""Reference-route dump for the binding parity tests.

Reads a case file and writes the outputs the core produces for those cases,
deliberately *not* importing the bridge server and spelling out the
seed -> partition -> bias chain instead of the bridge's single-call helper.
The parity tests therefore compare two separately written paths on both
sides of the process boundary.

Case file:   ``{"params": {...},
                "bias_cases":   [{"context": [int, ...], "logits_b64": str}, ...],
                "detect_cases": [[int, ...], ...]}``
Output file: ``{"bias":    [{"logits_b64": str, "red_mask": [0/1, ...]}, ...],
                "reports": [<detection report mapping>, ...]}``
"""

from __future__ import annotations

import base64
import json
import sys

import numpy as np

from trimark import (
    PartitionParams,
    bias_logits,
    detect,
    seed_from_context,
    tri_partition,
)


def main(argv: list[str]) -> int:
    if len(argv) != 3:
        print("usage: dump_expected.py CASES_JSON OUT_JSON", file=sys.stderr)
        return 2
    with open(argv[1], encoding="utf-8") as fh:
        cases = json.load(fh)
    params = PartitionParams.from_dict(cases.get("params", {}))

    bias_out = []
    for case in cases.get("bias_cases", []):
        logits = np.frombuffer(base64.b64decode(case["logits_b64"]), dtype="<f8")
        window = [int(t) for t in case["context"]][-params.window_h :]
        seed = seed_from_context(window, params.key)
        biased = bias_logits(logits, tri_partition(seed, params), params.delta)
        values = np.ascontiguousarray(biased.values, dtype="<f8")
        bias_out.append(
            {
                "logits_b64": base64.b64encode(values.tobytes()).decode("ascii"),
                "red_mask": [int(bit) for bit in biased.red_mask],
            }
        )

    reports = []
    for tokens in cases.get("detect_cases", []):
        report = detect([int(t) for t in tokens], params).to_json_dict()
        report["params"]["key"] = str(report["params"]["key"])
        reports.append(report)

    with open(argv[2], "w", encoding="utf-8") as fh:
        json.dump({"bias": bias_out, "reports": reports}, fh)
    return 0


if __name__ == "__main__":
    raise SystemExit(main(sys.argv))
