"""Command line interface: train, evaluate, edit, synth-data, serve.

Exit codes: 0 success, 2 usage/config/validation problems, 1 runtime
failures. Training and evaluation are driven by a JSON config file; see
the README for the documented keys.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from .attributes import parse_attribute_annotations, split_manifest
from .data import (
    ArrayDataset,
    dataset_from_synthetic,
    load_image_dataset,
    preprocess_image,
    split_dataset,
)
from .evaluation import (
    JudgeConfig,
    evaluate_editor,
    judge_fn,
    load_judge,
    model_editor,
    save_judge,
    train_independent_classifier,
)
from .networks import ArchitectureConfig, compact_config, table_config
from .service import EditService, ValidationError, make_server
from .synthetic import (
    SYNTHETIC_ATTRIBUTE_NAMES,
    SyntheticSpec,
    generate_synthetic_dataset,
    write_synthetic_dataset,
)
from .training import (
    TrainConfig,
    model_from_checkpoint,
    save_model_checkpoint,
    train_loop,
)


class UsageError(Exception):
    """Bad flags or config content; reported with exit code 2."""


def _load_config(path: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise UsageError(f"cannot read config {path}: {err}")
    try:
        config = json.loads(text)
    except json.JSONDecodeError as err:
        raise UsageError(f"config {path} is not valid JSON: {err}")
    if not isinstance(config, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    return config


def _synthetic_spec(section: dict) -> tuple[SyntheticSpec, int]:
    try:
        spec = SyntheticSpec(
            size=int(section.get("size", 1000)),
            resolution=int(section.get("resolution", 32)),
            attributes=tuple(section.get("attributes", SYNTHETIC_ATTRIBUTE_NAMES)),
            marginal=float(section.get("marginal", 0.5)),
        )
    except (TypeError, ValueError) as err:
        raise UsageError(f"bad synthetic dataset spec: {err}")
    return spec, int(section.get("seed", 0))


def _build_splits(config: dict) -> dict[str, ArrayDataset]:
    section = config.get("dataset")
    if not isinstance(section, dict):
        raise UsageError("config needs a 'dataset' object")
    kind = section.get("kind", "synthetic")
    split_seed = int(config.get("split_seed", 0))
    if kind == "synthetic":
        spec, seed = _synthetic_spec(section)
        dataset = dataset_from_synthetic(generate_synthetic_dataset(spec, seed))
        return split_dataset(dataset, split_seed)
    if kind == "files":
        for key in ("annotations", "image_dir", "attributes"):
            if key not in section:
                raise UsageError(f"files dataset needs the {key!r} key")
        try:
            manifest = parse_attribute_annotations(
                Path(section["annotations"]).read_text(encoding="utf-8"),
                tuple(section["attributes"]),
                source=str(section["annotations"]),
            )
        except OSError as err:
            raise UsageError(f"cannot read annotations: {err}")
        resolution = int(section.get("resolution", 64))
        splits = split_manifest(manifest, split_seed)
        return {
            name: load_image_dataset(m, section["image_dir"], resolution)
            for name, m in splits.items()
        }
    raise UsageError(f"unknown dataset kind {kind!r}")


def _build_architecture(config: dict, n_attrs: int) -> ArchitectureConfig:
    section = dict(config.get("architecture", {}))
    preset = section.pop("preset", "compact")
    style_counts = section.pop("style_counts", None)
    if style_counts is not None:
        style_counts = tuple(int(c) for c in style_counts)
    try:
        if preset == "table":
            return table_config(
                int(section.pop("resolution", 64)),
                n_attrs,
                style_counts=style_counts,
                **section,
            )
        if preset == "compact":
            return compact_config(
                int(section.pop("resolution", 32)),
                n_attrs,
                style_counts=style_counts,
                **section,
            )
        if preset == "custom":
            return ArchitectureConfig.from_dict({**section, "n_attrs": n_attrs})
    except (TypeError, ValueError) as err:
        raise UsageError(f"bad architecture section: {err}")
    raise UsageError(f"unknown architecture preset {preset!r}")


def _train_config(config: dict, override_steps: int | None) -> TrainConfig:
    section = dict(config.get("train", {}))
    if override_steps is not None:
        section["max_steps"] = override_steps
    try:
        return TrainConfig.from_dict(section)
    except (TypeError, ValueError) as err:
        raise UsageError(f"bad train section: {err}")


def cmd_train(args) -> int:
    config = _load_config(args.config)
    splits = _build_splits(config)
    train_set = splits["train"]
    if len(train_set) == 0:
        raise UsageError("training split is empty")
    arch = _build_architecture(config, len(train_set.names))
    train_config = _train_config(config, args.steps)
    out_dir = Path(args.out or config.get("out_dir", "runs/train"))
    state = train_loop(train_config, train_set, arch, out_dir=out_dir)
    model_path = save_model_checkpoint(state, out_dir / "model.ckpt")
    print(f"trained {state.step} steps; model checkpoint at {model_path}")
    return 0


def _judge_for(args, config: dict, splits: dict[str, ArrayDataset]):
    if args.judge and Path(args.judge).exists():
        judge, accuracy = load_judge(args.judge)
        return judge, accuracy
    section = dict(config.get("judge", {}))
    train_set = splits["train"]
    judge_config = JudgeConfig(
        resolution=train_set.resolution,
        n_attrs=len(train_set.names),
        epochs=int(section.get("epochs", 3)),
        batch_size=int(section.get("batch_size", 64)),
        learning_rate=float(section.get("learning_rate", 1e-3)),
        seed=int(section.get("seed", 0)),
    )
    judge, accuracy = train_independent_classifier(
        train_set, splits["val"], judge_config
    )
    if args.judge:
        save_judge(judge, accuracy, args.judge)
    return judge, accuracy


def cmd_evaluate(args) -> int:
    config = _load_config(args.config)
    splits = _build_splits(config)
    model = model_from_checkpoint(args.checkpoint)
    if tuple(model.attr_names) != splits["test"].names:
        raise UsageError(
            f"checkpoint attributes {model.attr_names} do not match dataset "
            f"attributes {splits['test'].names}"
        )
    judge, judge_accuracy = _judge_for(args, config, splits)
    max_samples = config.get("max_samples")
    report = evaluate_editor(
        model_editor(model),
        splits["test"],
        judge_fn(judge),
        max_samples=int(max_samples) if max_samples else None,
    )
    print(f"judge held-out accuracy: {np.round(judge_accuracy, 4).tolist()}")
    print(report.to_text_table())
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(report.to_json())
        (out / "report.txt").write_text(report.to_text_table() + "\n")
        report.write_bar_chart_data(out / "per_attribute.dat")
        print(f"report written to {out}")
    return 0


def _parse_assignments(pairs, caster, flag):
    values = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise UsageError(f"{flag} expects name=value, got {pair!r}")
        name, _, raw = pair.partition("=")
        try:
            values[name] = caster(raw)
        except ValueError:
            raise UsageError(f"{flag} {name}: {raw!r} is not a valid value")
    return values


def cmd_edit(args) -> int:
    target = _parse_assignments(args.set, float, "--set")
    styles = _parse_assignments(args.style, int, "--style")
    model = model_from_checkpoint(args.checkpoint)
    service = EditService(model, checkpoint_id="cli")
    try:
        target = service.validate_target(target)
        styles = service.validate_styles(styles)
    except ValidationError as err:
        raise UsageError(str(err))
    with Image.open(args.infile) as img:
        image = preprocess_image(img.convert("RGB"), model.config.resolution)
    png, vector, latency_ms = service.edit(image, target, styles)
    Path(args.out).write_bytes(png)
    print(
        f"wrote {args.out} in {latency_ms:.1f} ms; attributes: "
        + json.dumps(vector)
    )
    return 0


def cmd_synth_data(args) -> int:
    attributes = (
        tuple(args.attributes.split(","))
        if args.attributes
        else SYNTHETIC_ATTRIBUTE_NAMES
    )
    try:
        spec = SyntheticSpec(
            size=args.size,
            resolution=args.resolution,
            attributes=attributes,
            marginal=args.marginal,
        )
    except ValueError as err:
        raise UsageError(str(err))
    dataset = generate_synthetic_dataset(spec, args.seed)
    out = write_synthetic_dataset(dataset, args.out)
    print(
        f"wrote {spec.size} images at {spec.resolution}x{spec.resolution} "
        f"with attributes {', '.join(attributes)} to {out}"
    )
    return 0


def cmd_serve(args) -> int:
    server = make_server(args.checkpoint, args.host, args.port)
    address = server.server_address
    print(f"serving on http://{address[0]}:{address[1]}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="attredit", description="attribute editing toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--steps", type=int, default=None,
                   help="override train.max_steps")
    p.add_argument("--out", default=None, help="output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a checkpoint with a judge")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--judge", default=None,
                   help="judge checkpoint to reuse or create")
    p.add_argument("--out", default=None, help="directory for report files")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("edit", help="apply one edit to an image file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--set", action="append", metavar="NAME=VALUE",
                   help="target attribute value in [0, 1]")
    p.add_argument("--style", action="append", metavar="NAME=INDEX",
                   help="style index for an attribute")
    p.set_defaults(func=cmd_edit)

    p = sub.add_parser("synth-data", help="materialize a procedural dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--size", type=int, default=1000)
    p.add_argument("--resolution", type=int, default=32)
    p.add_argument("--attributes", default=None,
                   help="comma-separated subset of the procedural vocabulary")
    p.add_argument("--marginal", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth_data)

    p = sub.add_parser("serve", help="start the HTTP inference service")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as err:
        return int(err.code) if err.code is not None else 0
    try:
        return args.func(args)
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # runtime failures
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
