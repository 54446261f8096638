"""Worked example functions and ready-made scenario configurations."""

from __future__ import annotations

EXP_INV = "exp(1/z)"
Z_EXP_INV = "z*exp(1/z)"
SIN_INV = "sin(1/z)"
EXP = "exp(z)"
EXP_NEG_INV = "exp(-1/z)"

PRESETS: dict[str, dict] = {
    "exp-inv-fixed-points": {
        "scenario": "fixed-points", "function": EXP_INV, "v": [0, 0], "omitted": [0, 0],
        "inner": 1e-5, "outer": 1.0,
    },
    "z-exp-inv-fixed-points": {
        "scenario": "fixed-points", "function": Z_EXP_INV, "v": [0, 0], "omitted": [0, 0],
        "inner": 1e-3, "outer": 1.0,
    },
    "exp-corollary": {
        "scenario": "corollary-entire", "function": EXP, "v": [0, 0], "omitted": [0, 0],
        "inner": 1e-3, "outer": 1.0,
    },
    "z-exp-inv-corollary": {
        "scenario": "corollary-punctured", "function": Z_EXP_INV, "essential_at": "0",
        "inner": 1e-3, "outer": 1.0,
    },
    "sin-inv-two-cycles": {
        "scenario": "two-cycles", "function": SIN_INV, "v": [0, 0], "inner": 1e-3, "outer": 0.5,
    },
    "exp-inv-renorm": {
        "scenario": "renorm", "function": EXP_INV, "v": [0, 0], "omitted": [0, 0],
        "lambda_targets": [10, 100, 1000, 10000],
    },
    "exp-neg-inv-renorm": {
        "scenario": "renorm", "function": EXP_NEG_INV, "v": [0, 0], "omitted": [0, 0],
        "lambda_targets": [10, 100, 1000, 10000],
    },
    "exp-inv-field": {
        "scenario": "field-render", "function": EXP_INV, "v": [0, 0], "center": [0, 0],
        "half_width": 0.5, "resolution": 256,
    },
}
