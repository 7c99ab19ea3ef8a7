"""Render the abho CLI's CSV outputs to static raster figures.

Three plot kinds, one per documented CSV schema:

    trajectory   s,x1,x2,xi1,xi2,h,L          -> orbit in the plane
    heatmap      x1,x2,re,im,abs,est_error,n_points -> |U| and arg U panels
    convergence  alpha,err_mehler,err_spectral -> log-log error curves

Rendering is deterministic for identical inputs (Agg backend, fixed
layout, no timestamps in the PNG metadata).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

KINDS = ("trajectory", "heatmap", "convergence")

SCHEMAS = {
    "trajectory": ["s", "x1", "x2", "xi1", "xi2", "h", "L"],
    "heatmap": ["x1", "x2", "re", "im", "abs", "est_error", "n_points"],
    "convergence": ["alpha", "err_mehler", "err_spectral"],
}

_SAVEFIG = dict(dpi=150, metadata={"Software": "abho-plots"})


class SchemaMismatch(Exception):
    """The input CSV header does not match the documented schema."""


@dataclass(frozen=True)
class PlotJob:
    inputs: Sequence[str]
    kind: str
    output: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaMismatch(f"unknown plot kind {self.kind!r}")
        if not self.inputs:
            raise SchemaMismatch("at least one input CSV is required")


def read_table(path: str, kind: str) -> dict[str, np.ndarray]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatch(f"{path}: empty file") from None
        expected = SCHEMAS[kind]
        if [h.strip() for h in header] != expected:
            raise SchemaMismatch(
                f"{path}: header {header!r} does not match the {kind} schema {expected!r}"
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected):
                raise SchemaMismatch(f"{path}:{lineno}: expected {len(expected)} fields")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise SchemaMismatch(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise SchemaMismatch(f"{path}: no data rows")
    data = np.asarray(rows)
    return {name: data[:, i] for i, name in enumerate(expected)}


def _render_trajectory(job: PlotJob) -> None:
    fig, ax = plt.subplots(figsize=(5.0, 5.0))
    for path in job.inputs:
        tab = read_table(path, "trajectory")
        ax.plot(tab["x1"], tab["x2"], lw=1.2, label=path.rsplit("/", 1)[-1])
        ax.plot(tab["x1"][0], tab["x2"][0], "o", ms=6, color="tab:green")
    ax.plot(0.0, 0.0, "x", ms=9, color="black", mew=2)
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    ax.set_aspect("equal", adjustable="datalim")
    ax.grid(True, alpha=0.3)
    if len(job.inputs) > 1:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(job.output, **_SAVEFIG)
    plt.close(fig)


def _as_grid(tab):
    x1 = np.unique(tab["x1"])
    x2 = np.unique(tab["x2"])
    if len(x1) * len(x2) != len(tab["x1"]):
        raise SchemaMismatch("heatmap rows do not form a full tensor grid")
    shape = (len(x1), len(x2))
    order = np.lexsort((tab["x2"], tab["x1"]))
    mag = tab["abs"][order].reshape(shape)
    arg = np.arctan2(tab["im"][order], tab["re"][order]).reshape(shape)
    return x1, x2, mag, arg


def _render_heatmap(job: PlotJob) -> None:
    tables = [read_table(p, "heatmap") for p in job.inputs]
    grids = [_as_grid(t) for t in tables]
    # one fixed magnitude scale per job
    vmax = max(float(np.nanmax(g[2])) for g in grids)
    fig, axes = plt.subplots(
        len(grids), 2, figsize=(9.0, 4.0 * len(grids)), squeeze=False
    )
    for row, (x1, x2, mag, arg) in enumerate(grids):
        extent = (x2[0], x2[-1], x1[0], x1[-1])
        im0 = axes[row][0].imshow(
            mag, origin="lower", extent=extent, vmin=0.0, vmax=vmax, aspect="auto"
        )
        axes[row][0].set_title("|U|")
        fig.colorbar(im0, ax=axes[row][0])
        im1 = axes[row][1].imshow(
            arg,
            origin="lower",
            extent=extent,
            vmin=-np.pi,
            vmax=np.pi,
            cmap="twilight",
            aspect="auto",
        )
        axes[row][1].set_title("arg U")
        fig.colorbar(im1, ax=axes[row][1])
        for ax in axes[row]:
            ax.set_xlabel("x2")
            ax.set_ylabel("x1")
    fig.tight_layout()
    fig.savefig(job.output, **_SAVEFIG)
    plt.close(fig)


def _render_convergence(job: PlotJob) -> None:
    fig, ax = plt.subplots(figsize=(5.5, 4.2))
    for path in job.inputs:
        tab = read_table(path, "convergence")
        order = np.argsort(tab["alpha"])[::-1]
        ax.loglog(
            tab["alpha"][order], tab["err_mehler"][order], "o-", label="vs leading term"
        )
        ax.loglog(
            tab["alpha"][order], tab["err_spectral"][order], "s--", label="vs spectral"
        )
    ax.set_xlabel("alpha")
    ax.set_ylabel("relative error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(job.output, **_SAVEFIG)
    plt.close(fig)


def render(job: PlotJob) -> str:
    """Render the job to its output path; returns the path."""
    {
        "trajectory": _render_trajectory,
        "heatmap": _render_heatmap,
        "convergence": _render_convergence,
    }[job.kind](job)
    return job.output
