"""Exact compilation of boolean circuits and Turing machines into networks.

Thin convenience layer over the native module; artifacts cross the boundary
as the same JSON the CLI reads and writes.
"""

import json

from _sma import (
    SmaError,
    certify,
    compile_circuit,
    compile_tm,
    decode,
    margin_upper,
    run_net,
    run_tm,
    sm_bound,
    solve_sample_complexity,
    surrogate_loss,
    verify_tm,
)

__all__ = [
    "SmaError",
    "certify",
    "compile_circuit",
    "compile_tm",
    "decode",
    "margin_upper",
    "margin_upper_report",
    "run_net",
    "run_tm",
    "sm_bound",
    "solve_sample_complexity",
    "surrogate_loss",
    "verify_tm",
]

__version__ = "1.0.0"


def margin_upper_report(net_json, x, y, budget=20000, seed=0):
    """margin_upper with the report parsed into a dict."""
    return json.loads(margin_upper(net_json, x, y, budget, seed))
