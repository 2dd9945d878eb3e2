"""Deterministic report serialization and the human summary.

Floats are written with 17 significant digits, which round-trips every
double; key order is the insertion order fixed by the analysis code.
Non-finite floats become ``null``.
"""

from __future__ import annotations

import json
import math
from typing import Any

import numpy as np

from .analysis import AnalysisReport

SUMMARY_DIGITS = 6


def _float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    text = f"{x:.17g}"
    if all(ch in "-0123456789" for ch in text):
        text += ".0"
    return text


def _plain(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, tuple):
        return list(obj)
    return obj


def _write(obj: Any, out: list[str], indent: int, level: int) -> None:
    obj = _plain(obj)
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, bool):
        out.append(json.dumps(obj))
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (k, v) in enumerate(obj.items()):
            out.append(f"{pad}{json.dumps(str(k))}: ")
            _write(v, out, indent, level + 1)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, list):
        if not obj:
            out.append("[]")
            return
        if all(not isinstance(_plain(v), (dict, list)) for v in obj):
            parts = []
            for v in obj:
                buf: list[str] = []
                _write(v, buf, indent, level + 1)
                parts.append("".join(buf))
            out.append("[" + ", ".join(parts) + "]")
            return
        out.append("[\n")
        for i, v in enumerate(obj):
            out.append(pad)
            _write(v, out, indent, level + 1)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any, indent: int = 2) -> str:
    out: list[str] = []
    _write(obj, out, indent, 0)
    return "".join(out) + "\n"


def _round(x):
    if x is None or not isinstance(x, (int, float)) or isinstance(x, bool):
        return x
    if not math.isfinite(x):
        return None
    return float(f"{x:.{SUMMARY_DIGITS}g}")


def _fmt(x) -> str:
    if x is None:
        return "n/a"
    if isinstance(x, bool):
        return "yes" if x else "no"
    if isinstance(x, float) and x == int(x) and abs(x) < 1e15:
        return str(int(x))
    if isinstance(x, float):
        return f"{x:.{SUMMARY_DIGITS}g}"
    return str(x)


def summary(rep: AnalysisReport) -> dict:
    """Headline values, rounded to the digits shown in the text summary."""
    s: dict[str, Any] = {}
    ext = rep.sections.get("extension_test")
    if ext is not None:
        s["projective extension"] = "PASS" if ext["passes"] else "FAIL"
        if not ext["passes"]:
            s["max divergence rate"] = _round(ext["max_divergence_rate"])
    conn = rep.sections.get("connection_nonextension")
    if conn is not None:
        s["connection diverges"] = conn["gamma_diverges"]
        if conn["gamma_diverges"]:
            s["gamma rate"] = _round(conn["rate"])
    scal = rep.sections.get("scalar_boundary")
    if scal is not None:
        s["S boundary"] = _round(scal["value"]) if scal["extends"] else "does not extend"
        if scal["extends"]:
            s["S locally constant"] = scal["locally_constant"]
    mt = rep.sections.get("main_theorem")
    if mt is not None:
        s["hypotheses"] = "".join("T" if h else "F" for h in mt["hypotheses"])
    order = rep.sections.get("order")
    if mt is not None and mt["conclusion_order2"]:
        s["order"] = 2
    elif order is not None and order.get("alpha") is not None:
        s["order"] = "not established"
        s["diagnostic alpha"] = _round(order["alpha"])
        s["diagnostic k"] = order["k"]
    elif order is not None:
        s["order"] = "not established"
    asym = rep.sections.get("asymptotics")
    if asym is not None:
        s["C"] = _round(asym["C_measured"])
        s["C predicted"] = _round(asym["C_predicted"])
        s["trace-free Ricci extends"] = asym["tracefree_ricci_extends"]
    tr = rep.sections.get("tractor_checks")
    if tr is not None:
        s["det identity residual"] = _round(tr["det_identity_residual"])
        if tr.get("phi_middle_residual") is not None:
            s["middle slot residual"] = _round(tr["phi_middle_residual"])
    if rep.errors:
        s["failed steps"] = ", ".join(rep.errors)
    return s


def report_dict(rep: AnalysisReport) -> dict:
    d = rep.to_dict()
    d["summary"] = summary(rep)
    return d


def summary_text(rep: AnalysisReport) -> str:
    lines = [f"{rep.name} (m = {rep.dimension})"]
    lines += [f"  {k}: {_fmt(v)}" for k, v in summary(rep).items()]
    return "\n".join(lines) + "\n"
