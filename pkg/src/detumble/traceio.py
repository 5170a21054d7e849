"""Trace CSV and metrics JSON serialization.

The CSV header is part of the external contract and must stay byte-exact:

    t,wx,wy,wz,q0,q1,q2,q3,bx,by,bz,mx,v,rho0,f_norm,lyap,cond,clamped

Floating-point fields are written in round-trip scientific notation; the
MPC-only columns (v, rho0, f_norm, cond, clamped) are left empty on B-dot
traces. Identical runs therefore produce identical bytes.
"""

import json

import numpy as np

from .config import ScenarioConfig, config_digest
from .simulate import DetumbleMetrics, Trace

TRACE_HEADER = "t,wx,wy,wz,q0,q1,q2,q3,bx,by,bz,mx,v,rho0,f_norm,lyap,cond,clamped"

_FLOAT_COLUMNS = ("t", "wx", "wy", "wz", "q0", "q1", "q2", "q3",
                  "bx", "by", "bz", "mx", "v", "rho0", "f_norm", "lyap")


def _fmt(x: float) -> str:
    return format(x, ".16e")


def write_trace(trace: Trace, path) -> None:
    lines = [TRACE_HEADER]
    mpc = trace.is_mpc
    for k in range(len(trace)):
        cells = [
            _fmt(trace.t[k]),
            _fmt(trace.omega[k, 0]), _fmt(trace.omega[k, 1]), _fmt(trace.omega[k, 2]),
            _fmt(trace.quat[k, 0]), _fmt(trace.quat[k, 1]),
            _fmt(trace.quat[k, 2]), _fmt(trace.quat[k, 3]),
            _fmt(trace.b_body[k, 0]), _fmt(trace.b_body[k, 1]), _fmt(trace.b_body[k, 2]),
            _fmt(trace.mx[k]),
        ]
        if mpc:
            cells += [
                _fmt(trace.v[k]),
                _fmt(trace.rho0[k]),
                _fmt(trace.f_norm[k]),
                _fmt(trace.lyap[k]),
                str(int(trace.condition[k])),
                str(int(trace.clamped[k])),
            ]
        else:
            cells += ["", "", "", _fmt(trace.lyap[k]), "", ""]
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")


def read_trace(path) -> dict:
    """Columns of a trace CSV as float arrays; empty cells read as NaN."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != TRACE_HEADER:
            raise ValueError(f"unexpected trace header: {header!r}")
        names = header.split(",")
        rows = []
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            rows.append(line.split(","))
    out = {}
    for i, name in enumerate(names):
        vals = np.full(len(rows), np.nan)
        for k, row in enumerate(rows):
            cell = row[i]
            if cell != "":
                vals[k] = float(cell)
        out[name] = vals
    return out


def metrics_to_dict(metrics: DetumbleMetrics, cfg: ScenarioConfig = None) -> dict:
    out = {
        "settle_time_s": dict(metrics.settle_time_s),
        "final_rates_rad_s": list(metrics.final_rates_rad_s),
        "settle_threshold_deg_s": metrics.settle_threshold_deg_s,
    }
    if metrics.max_f_norm is not None:
        out["max_f_norm"] = metrics.max_f_norm
    if metrics.min_v is not None:
        out["min_v"] = metrics.min_v
    if cfg is not None:
        out["controller"] = cfg.controller
        out["config_sha256"] = config_digest(cfg)
    return out


def write_metrics(metrics: DetumbleMetrics, cfg: ScenarioConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(metrics_to_dict(metrics, cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
