"""Loss-trace output: delimited CSV plus a rendered loss-curve figure."""

from __future__ import annotations

import os
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .losses import LossBreakdown

TRACE_HEADER = "step,c_cont,c_style,c_tot"


def format_trace_csv(trace: list[tuple[int, LossBreakdown]]) -> str:
    lines = [TRACE_HEADER]
    for step, b in trace:
        lines.append(f"{step},{b.c_cont!r},{b.c_style!r},{b.c_tot!r}")
    return "\n".join(lines) + "\n"


def write_atomic(path, data: bytes) -> None:
    """Write to a temp file in the same directory, then rename."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def write_trace(trace: list[tuple[int, LossBreakdown]], path) -> Path:
    """Write the CSV and render the loss curve next to it; returns the
    figure path."""
    path = Path(path)
    write_atomic(path, format_trace_csv(trace).encode())
    fig_path = path.with_suffix(".png")
    if fig_path == path:
        fig_path = path.with_name(path.name + ".png")
    steps = [s for s, _ in trace]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(steps, [b.c_tot for _, b in trace], label="total", color="k")
    ax.plot(steps, [b.c_cont for _, b in trace], label="content", ls="--")
    ax.plot(steps, [b.c_style for _, b in trace], label="style", ls=":")
    if any(b.c_tot > 0 for _, b in trace):
        ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel("cost")
    ax.legend(frameon=False)
    fig.tight_layout()
    tmp = fig_path.with_name(fig_path.name + ".tmp")
    fig.savefig(tmp, format="png", dpi=110)
    plt.close(fig)
    os.replace(tmp, fig_path)
    return fig_path
