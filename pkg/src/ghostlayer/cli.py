"""Command-line entry point.

Flag values override config-file values, which override defaults. Exit
codes: 0 success, 2 usage, 3 input/format, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import sys

from .errors import (
    ConfigurationError,
    FormatError,
    NumericError,
    UsageError,
    ValidationError,
)
from .losses import DEFAULT_CONTENT_LAYER, DEFAULT_STYLE_LAYERS, LossConfig
from .optim import OptimizerConfig
from .pipeline import PreprocessConfig, TransferJob, run_job

_DEFAULTS = {
    "alpha": 10.0,
    "beta": 40.0,
    "iterations": 10000,
    "lr": 1.0,
    "seed": 0,
    "init": "noise",
    "method": "adam",
    "size": "1412x2000",
    "grayscale": False,
    "invert": False,
    "content_layer": DEFAULT_CONTENT_LAYER,
    "style_layers": ",".join(DEFAULT_STYLE_LAYERS),
    "style_weights": "",
    "ensemble": "per",
    "pool": "average",
    "jobs": 1,
    "checkpoint_every": 100,
    "quiet": False,
    "trace": None,
    "report": None,
    "dump_preprocessed": None,
}

_BOOL_KEYS = {"grayscale", "invert", "quiet"}
_INT_KEYS = {"iterations", "seed", "jobs", "checkpoint_every"}
_FLOAT_KEYS = {"alpha", "beta", "lr"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 2 with the flag named
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="ghostlayer",
        description="Colorize a grayscale underdrawing by neural style transfer.",
    )
    p.add_argument("--content", help="content image (PNG)")
    p.add_argument("--style", action="append", help="style image (repeatable)")
    p.add_argument("--weights", help="GLW1 weight file")
    p.add_argument("--output", help="output image (PNG)")
    p.add_argument("--alpha", type=float, help="content weight (default 10)")
    p.add_argument("--beta", type=float, help="style weight (default 40)")
    p.add_argument("--iterations", type=int, help="optimization steps (default 10000)")
    p.add_argument("--lr", type=float, help="learning rate (default 1.0)")
    p.add_argument("--seed", type=int, help="RNG seed (default 0)")
    p.add_argument("--init", choices=["noise", "content"], help="initial image")
    p.add_argument("--method", choices=["adam", "sgd"], help="update rule (default adam)")
    p.add_argument("--size", help="working resolution WxH (default 1412x2000)")
    p.add_argument("--grayscale", action="store_const", const=True,
                   help="convert the content image to grayscale first")
    p.add_argument("--invert", action="store_const", const=True,
                   help="negative-invert the content image")
    p.add_argument("--content-layer", dest="content_layer", help="content tap layer")
    p.add_argument("--style-layers", dest="style_layers",
                   help="comma-separated style tap layers")
    p.add_argument("--style-weights", dest="style_weights",
                   help="comma-separated per-layer style weights")
    p.add_argument("--ensemble", choices=["per", "multi"],
                   help="per: optimize per style then average; multi: one run")
    p.add_argument("--pool", choices=["average", "max"], help="pooling mode")
    p.add_argument("--jobs", type=int, help="parallel ensemble runs")
    p.add_argument("--trace", help="loss trace CSV path")
    p.add_argument("--report", help="run report JSON path")
    p.add_argument("--checkpoint-every", dest="checkpoint_every", type=int,
                   help="progress/trace interval (default 100)")
    p.add_argument("--quiet", action="store_const", const=True,
                   help="suppress progress lines")
    p.add_argument("--dump-preprocessed", dest="dump_preprocessed",
                   help="debug: write the preprocessed content image here")
    p.add_argument("--config", help="key=value config file")
    return p


def read_config_file(path) -> dict:
    values = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
                key, _, value = line.partition("=")
                key = key.strip().replace("-", "_")
                if key not in _DEFAULTS and key not in ("content", "style", "weights", "output"):
                    raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
                values[key] = value.strip()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    return values


def _coerce(key: str, value):
    if not isinstance(value, str):
        return value
    try:
        if key in _BOOL_KEYS:
            if value.lower() in ("1", "true", "yes", "on"):
                return True
            if value.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
    except ValueError as exc:
        raise UsageError(f"bad value for {key}: {value!r}") from exc
    return value


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, _, h = text.lower().partition("x")
        size = (int(w), int(h))
    except ValueError as exc:
        raise UsageError(f"bad --size {text!r}, expected WxH") from exc
    if size[0] < 1 or size[1] < 1:
        raise UsageError(f"--size extents must be positive, got {text}")
    return size


def parse_config(argv) -> TransferJob:
    args = vars(build_parser().parse_args(argv))
    file_values = read_config_file(args["config"]) if args.get("config") else {}

    def resolve(key, default=None):
        if args.get(key) is not None:
            return args[key]
        if key in file_values:
            return _coerce(key, file_values[key])
        return _DEFAULTS.get(key, default)

    content = resolve("content")
    weights = resolve("weights")
    output = resolve("output")
    styles = args.get("style")
    if styles is None and "style" in file_values:
        styles = [s for s in file_values["style"].split(",") if s]
    for flag, value in (("--content", content), ("--weights", weights),
                        ("--output", output), ("--style", styles)):
        if not value:
            raise UsageError(f"missing required flag {flag}")

    alpha = resolve("alpha")
    beta = resolve("beta")
    if alpha < 0:
        raise UsageError(f"--alpha must be non-negative, got {alpha}")
    if beta < 0:
        raise UsageError(f"--beta must be non-negative, got {beta}")

    layer_names = [s for s in str(resolve("style_layers")).split(",") if s]
    weights_text = str(resolve("style_weights") or "")
    if weights_text:
        try:
            layer_weights = [float(v) for v in weights_text.split(",")]
        except ValueError as exc:
            raise UsageError(f"bad --style-weights {weights_text!r}") from exc
        if len(layer_weights) != len(layer_names):
            raise UsageError(
                f"--style-weights has {len(layer_weights)} entries for "
                f"{len(layer_names)} style layers"
            )
    else:
        layer_weights = [1.0 / len(layer_names)] * len(layer_names) if layer_names else []
    if any(w < 0 for w in layer_weights):
        raise UsageError("--style-weights entries must be non-negative")

    iterations = resolve("iterations")
    lr = resolve("lr")
    checkpoint_every = resolve("checkpoint_every")
    if iterations < 1:
        raise UsageError(f"--iterations must be >= 1, got {iterations}")
    if lr <= 0:
        raise UsageError(f"--lr must be positive, got {lr}")
    if checkpoint_every < 1:
        raise UsageError(f"--checkpoint-every must be >= 1, got {checkpoint_every}")

    try:
        loss = LossConfig(
            alpha=alpha,
            beta=beta,
            content_layer=resolve("content_layer") or None,
            style_layers=tuple(zip(layer_names, layer_weights)),
        )
        optimizer = OptimizerConfig(
            method=resolve("method"),
            learning_rate=lr,
            iterations=iterations,
            seed=resolve("seed"),
            init=resolve("init"),
            checkpoint_every=checkpoint_every,
        )
        return TransferJob(
            content_path=content,
            style_paths=tuple(styles),
            weight_path=weights,
            output_path=output,
            loss=loss,
            optimizer=optimizer,
            preprocess=PreprocessConfig(
                grayscale=bool(resolve("grayscale")),
                invert=bool(resolve("invert")),
                size=_parse_size(str(resolve("size"))),
            ),
            ensemble_mode={"per": "per_style_then_mean", "multi": "multi_style_single_run"}[
                resolve("ensemble")
            ],
            pool_mode=resolve("pool"),
            trace_path=resolve("trace"),
            report_path=resolve("report"),
            dump_preprocessed=resolve("dump_preprocessed"),
            jobs=resolve("jobs"),
            quiet=bool(resolve("quiet")),
        )
    except ConfigurationError as exc:
        raise UsageError(str(exc)) from exc


def main(argv=None) -> int:
    try:
        job = parse_config(sys.argv[1:] if argv is None else argv)
        run_job(job)
        return 0
    except UsageError as exc:
        print(f"ghostlayer: usage error: {exc}", file=sys.stderr)
        return 2
    except (FormatError, ValidationError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"ghostlayer: input error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"ghostlayer: numeric failure: {exc}", file=sys.stderr)
        return 4
    except ConfigurationError as exc:
        print(f"ghostlayer: configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
