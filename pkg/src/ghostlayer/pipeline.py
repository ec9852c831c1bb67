"""End-to-end transfer jobs: preprocessing, single- and multi-style
optimization, ensemble averaging, and reproducible outputs."""

from __future__ import annotations

import dataclasses
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import imaging, report
from .errors import UsageError
from .losses import LossConfig, gram
from .network import NetworkSpec, load_weights, vgg19_spec
from .optim import OptimizerConfig, run


@dataclass(frozen=True)
class PreprocessConfig:
    grayscale: bool = False
    invert: bool = False
    size: tuple[int, int] = (1412, 2000)  # (width, height)


@dataclass(frozen=True)
class TransferJob:
    content_path: str
    style_paths: tuple[str, ...]
    weight_path: str
    output_path: str
    loss: LossConfig = LossConfig()
    optimizer: OptimizerConfig = OptimizerConfig()
    preprocess: PreprocessConfig = PreprocessConfig()
    ensemble_mode: str = "per_style_then_mean"
    pool_mode: str = "average"
    trace_path: str | None = None
    report_path: str | None = None
    dump_preprocessed: str | None = None
    jobs: int = 1
    quiet: bool = False

    def __post_init__(self):
        if not self.style_paths:
            raise UsageError("at least one style image is required")
        if self.ensemble_mode not in ("per_style_then_mean", "multi_style_single_run"):
            raise UsageError(f"unknown ensemble mode {self.ensemble_mode!r}")
        outputs = {str(self.output_path)}
        if self.trace_path:
            outputs.add(str(self.trace_path))
        inputs = {str(self.content_path), str(self.weight_path)}
        inputs.update(str(p) for p in self.style_paths)
        clash = outputs & inputs
        if clash:
            raise UsageError(f"output path also used as an input: {sorted(clash)}")
        if self.jobs < 1:
            raise UsageError("jobs must be >= 1")


@dataclass(frozen=True)
class RunReport:
    output_path: str
    trace_paths: tuple[str, ...]
    figure_paths: tuple[str, ...]
    wall_seconds: float
    config: dict = field(default_factory=dict)


def _config_echo(job: TransferJob) -> dict:
    echo = dataclasses.asdict(job)
    echo["loss"]["style_layers"] = [list(sw) for sw in job.loss.style_layers]
    echo["preprocess"]["size"] = list(job.preprocess.size)
    echo["style_paths"] = list(job.style_paths)
    return echo


def _member_trace_path(base: str, k: int, members: int) -> str:
    if members == 1:
        return base
    p = Path(base)
    return str(p.with_name(f"{p.stem}.style{k}{p.suffix}"))


def prepare_content(job: TransferJob) -> imaging.ImageBuffer:
    img = imaging.decode(job.content_path)
    if job.preprocess.grayscale:
        img = imaging.to_grayscale(img)
    if job.preprocess.invert:
        img = imaging.invert(img)
    w, h = job.preprocess.size
    return imaging.resize(img, w, h)


def run_job(job: TransferJob, log=None) -> RunReport:
    """Execute a TransferJob; returns the report after all outputs exist."""
    t_start = time.monotonic()
    log = log or (sys.stderr if not job.quiet else None)
    spec = vgg19_spec(job.pool_mode)
    weights = load_weights(job.weight_path, spec)
    mean = weights.preprocess_mean

    content_img = prepare_content(job)
    if job.dump_preprocessed:
        report.write_atomic(job.dump_preprocessed, imaging.encode_bytes(content_img))
    w, h = job.preprocess.size
    style_imgs = [imaging.resize(imaging.decode(p), w, h) for p in job.style_paths]

    from .network import forward_features  # local to keep import cycle-free

    content_tensor = imaging.to_tensor(content_img, mean)
    taps = job.loss.tap_names()
    content_taps = [job.loss.content_layer] if job.loss.content_layer else []
    content_features, _ = forward_features(content_tensor, weights, content_taps, spec)
    style_layer_names = [name for name, _ in job.loss.style_layers]
    style_grams_per_image = []
    for simg in style_imgs:
        feats, _ = forward_features(imaging.to_tensor(simg, mean), weights, style_layer_names, spec)
        style_grams_per_image.append({name: gram(feats[name]) for name in style_layer_names})

    def emit(prefix: str, t0: float):
        def on_checkpoint(s, b):
            if log is None:
                return
            elapsed = max(time.monotonic() - t0, 1e-9)
            ips = s / elapsed if s else 0.0
            print(
                f"{prefix}step={s} c_cont={b.c_cont:.6g} c_style={b.c_style:.6g} "
                f"c_tot={b.c_tot:.6g} ips={ips:.2f}",
                file=log,
                flush=True,
            )

        return on_checkpoint

    if job.ensemble_mode == "multi_style_single_run":
        grams = {
            name: [g[name] for g in style_grams_per_image] for name in style_layer_names
        }
        members = [(job.optimizer, grams, "")]
    else:
        members = []
        for k in range(len(style_imgs)):
            cfg = dataclasses.replace(job.optimizer, seed=job.optimizer.seed + k)
            grams = {name: [style_grams_per_image[k][name]] for name in style_layer_names}
            prefix = f"[style {k}] " if len(style_imgs) > 1 else ""
            members.append((cfg, grams, prefix))

    def run_member(arg):
        cfg, grams, prefix = arg
        return run(
            weights,
            content_features,
            grams,
            job.loss,
            cfg,
            content_tensor,
            spec,
            on_checkpoint=emit(prefix, time.monotonic()),
        )

    if job.jobs > 1 and len(members) > 1:
        with ThreadPoolExecutor(max_workers=job.jobs) as pool:
            states = list(pool.map(run_member, members))
    else:
        states = [run_member(m) for m in members]

    outputs = [imaging.from_tensor(s.x_hat, mean) for s in states]
    final = imaging.ensemble_mean(outputs)

    trace_paths: list[str] = []
    figure_paths: list[str] = []
    if job.trace_path:
        for k, state in enumerate(states):
            tp = _member_trace_path(job.trace_path, k, len(states))
            fig = report.write_trace(state.loss_trace, tp)
            trace_paths.append(tp)
            figure_paths.append(str(fig))
    report.write_atomic(job.output_path, imaging.encode_bytes(final))

    run_report = RunReport(
        output_path=str(job.output_path),
        trace_paths=tuple(trace_paths),
        figure_paths=tuple(figure_paths),
        wall_seconds=time.monotonic() - t_start,
        config=_config_echo(job),
    )
    if job.report_path:
        report.write_atomic(
            job.report_path,
            json.dumps(dataclasses.asdict(run_report), indent=2).encode(),
        )
    return run_report
