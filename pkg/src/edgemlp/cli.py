"""Command-line entry point: ``edgemlp {prepare,train,eval,predict,inspect}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import store
from .errors import BadImageShape, ClassCountMismatch, EdgeMlpError, EmptyDataset, MissingFile
from .features import FEATURE_DIM, featurize, featurize_batch, read_feature_cache, write_feature_cache
from .idx import IMAGE_SIDE, SplitSpec, load_dataset, stratified_split_indices, validation_indices
from .model import MlpConfig, forward, init_model, param_count, softmax
from .training import (
    TrainConfig,
    class_names,
    evaluate,
    saliency,
    top_confusions,
    train,
    weight_energy_map,
    write_confusion_csv,
)

DATASET_BY_CLASSES = {10: "mnist", 26: "emnist_letters"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _thread_limit(threads):
    if not threads:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=threads)


def _load_cache(path):
    if not Path(path).is_file():
        raise MissingFile(f"no such feature cache: {path}")
    features, labels, class_count = read_feature_cache(path)
    if len(labels) == 0:
        raise EmptyDataset(f"{path}: feature cache is empty")
    return features, labels, class_count


def subset_indices(labels, class_count, size, seed):
    """Sorted indices of a stratified, seeded subset of ``size`` samples."""
    if size >= len(labels):
        return np.arange(len(labels))
    spec = SplitSpec(test_fraction=Fraction(size, len(labels)), seed=seed)
    _, keep = stratified_split_indices(labels, class_count, spec)
    return keep


def split_cache(features, labels, class_count, seed, subset=None):
    """Reproduce the run's data partition: optional subset, 80/20 split, 10% validation carve."""
    if subset:
        keep = subset_indices(labels, class_count, subset, seed)
        features, labels = features[keep], labels[keep]
    spec = SplitSpec(seed=seed)
    train_idx, test_idx = stratified_split_indices(labels, class_count, spec)
    fit_pos, val_pos = validation_indices(len(train_idx), spec)
    fit_idx, val_idx = train_idx[fit_pos], train_idx[val_pos]
    return {
        "fit": (features[fit_idx], labels[fit_idx]),
        "val": (features[val_idx], labels[val_idx]),
        "test": (features[test_idx], labels[test_idx]),
    }


def cmd_prepare(args):
    data_dir = args.data_dir or os.environ.get("EDGEMLP_DATA_DIR")
    if not data_dir:
        raise UsageError("prepare: pass --data-dir or set EDGEMLP_DATA_DIR")
    dataset = load_dataset(args.dataset, data_dir)
    features, labels = featurize_batch(dataset)
    cache = args.cache or f"{args.dataset}.emfc"
    write_feature_cache(cache, features, labels, dataset.class_count)
    print(f"wrote {cache}: N={features.shape[0]} D={features.shape[1]} class_count={dataset.class_count}")
    return 0


def cmd_train(args):
    features, labels, class_count = _load_cache(args.cache)
    dataset = args.dataset or DATASET_BY_CLASSES.get(class_count, "custom")
    parts = split_cache(features, labels, class_count, args.seed, args.subset)
    config = TrainConfig(batch_size=args.batch_size, max_epochs=args.max_epochs, seed=args.seed,
                         dataset=dataset, lr=args.lr)
    mlp = MlpConfig(input_dim=features.shape[1], output_dim=class_count)
    model = init_model(mlp, args.seed)
    model.meta.update({"dataset": dataset, "seed": args.seed, "subset": args.subset or 0})
    model_path = Path(args.model)
    out = Path(args.out) if args.out else model_path.parent
    header = {
        "train": {k: v for k, v in vars(config).items()},
        "model": mlp.to_dict(),
        "split": {"test_fraction": "1/5", "validation_fraction": "1/10", "subset": args.subset or 0,
                  "fit": len(parts["fit"][1]), "val": len(parts["val"][1]), "test": len(parts["test"][1])},
        "threads": args.threads or 0,
    }
    model, history = train(*parts["fit"], *parts["val"], model, config,
                           log_path=out / "history.jsonl", header=header)
    accuracy, cm = evaluate(model, *parts["test"])
    model.meta["test_accuracy"] = accuracy
    store.save(model, model_path)
    write_confusion_csv(out / "confusion.csv", cm)
    names = class_names(class_count)
    print(f"epochs run: {len(history.records)} (best epoch {history.best_epoch})")
    print("top confusions: " + ", ".join(f"{names[t]}->{names[p]} x{n}" for t, p, n in top_confusions(cm, 10)))
    print(f"test accuracy: {accuracy:.6f} ({int(np.trace(cm.counts))}/{cm.total})")
    return 0


def cmd_eval(args):
    model = store.load(args.model)
    features, labels, class_count = _load_cache(args.cache)
    if class_count != model.config.output_dim:
        raise ClassCountMismatch(f"model predicts {model.config.output_dim} classes, cache has {class_count}")
    if args.split == "test":
        seed = int(model.meta.get("seed", 0))
        features, labels = split_cache(features, labels, class_count, seed, model.meta.get("subset"))["test"]
    accuracy, cm = evaluate(model, features, labels)
    out = Path(args.out) if args.out else Path(args.model).parent / "confusion_eval.csv"
    write_confusion_csv(out, cm)
    print(f"{args.split} accuracy: {accuracy:.6f} ({int(np.trace(cm.counts))}/{cm.total})")
    print(f"confusion matrix written to {out}")
    return 0


def read_image(path) -> np.ndarray:
    """A 28x28 uint8 image from a raw 784-byte file or a binary/ASCII PGM."""
    data = Path(path).read_bytes()
    if data[:2] in (b"P5", b"P2"):
        tokens, pos = [], 2
        while len(tokens) < 3:
            while pos < len(data) and data[pos:pos + 1].isspace():
                pos += 1
            if data[pos:pos + 1] == b"#":
                pos = data.index(b"\n", pos)
                continue
            end = pos
            while end < len(data) and not data[end:end + 1].isspace():
                end += 1
            tokens.append(int(data[pos:end]))
            pos = end
        width, height, maxval = tokens
        if (height, width) != (IMAGE_SIDE, IMAGE_SIDE):
            raise BadImageShape(f"{path}: image is {height}x{width}, expected 28x28")
        if data[:2] == b"P5":
            dtype = np.dtype(np.uint8 if maxval < 256 else ">u2")
            raw = data[pos + 1:pos + 1 + width * height * dtype.itemsize]
            pixels = np.frombuffer(raw[: len(raw) - len(raw) % dtype.itemsize], dtype=dtype)
        else:
            pixels = np.array([int(t) for t in data[pos:].split()[: width * height]], dtype=np.int64)
        if pixels.size != width * height:
            raise BadImageShape(f"{path}: pixel data truncated")
        scaled = np.round(pixels.astype(np.float64) * 255 / maxval)
        return scaled.astype(np.uint8).reshape(IMAGE_SIDE, IMAGE_SIDE)
    if len(data) != IMAGE_SIDE * IMAGE_SIDE:
        raise BadImageShape(f"{path}: {len(data)} bytes is not a raw 28x28 image or a PGM")
    return np.frombuffer(data, dtype=np.uint8).reshape(IMAGE_SIDE, IMAGE_SIDE)


def write_pgm(path, values):
    """Write |values| as an 8-bit graymap scaled so the largest magnitude is white."""
    values = np.abs(np.asarray(values, dtype=np.float64))
    peak = values.max()
    pixels = np.zeros(values.shape, dtype=np.uint8) if peak == 0 else np.round(values / peak * 255).astype(np.uint8)
    h, w = pixels.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode() + pixels.tobytes())


def _image_features(path):
    return featurize(read_image(path).astype(np.float32) / np.float32(255))


def cmd_predict(args):
    model = store.load(args.model)
    x = _image_features(args.image)
    logits, _ = forward(model, x[None], "eval")
    probs = softmax(logits.astype(np.float64))[0]
    names = class_names(model.config.output_dim)
    label = int(np.argmax(probs))
    print(f"label: {names[label]} ({label})")
    print("probabilities: " + " ".join(f"{n}={p:.6f}" for n, p in zip(names, probs)))
    return 0


def cmd_inspect(args):
    model = store.load(args.model)
    cfg = model.config
    print(f"trainable parameters: {param_count(cfg)}")
    print(f"non-trainable parameters: {sum(v.size for v in model.state.values())}")
    dims = cfg.layer_dims
    for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
        if i < len(cfg.hidden_dims):
            print(f"hidden {i + 1}: {a} -> {b}  Dense + BN + ReLU + Dropout({cfg.dropout_rates[i]})")
        else:
            print(f"output: {a} -> {b}  Dense + Softmax")
    for key in sorted(model.meta):
        print(f"{key}: {model.meta[key]}")
    if args.image:
        if cfg.input_dim != FEATURE_DIM:
            raise BadImageShape(f"model input is {cfg.input_dim}-dim, not an edge-feature model")
        out = Path(args.out or ".")
        out.mkdir(parents=True, exist_ok=True)
        ax, ay = saliency(model, _image_features(args.image))
        wx, wy = weight_energy_map(model)
        for name, m in (("saliency_gx", ax), ("saliency_gy", ay), ("weights_gx", wx), ("weights_gy", wy)):
            write_pgm(out / f"{name}.pgm", m)
        print(f"attribution maps written to {out}")
    return 0


def build_parser():
    parser = _Parser(prog="edgemlp", description="Sobel-gradient MLP for handwritten characters")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("prepare", help="featurize IDX files into a feature cache")
    p.add_argument("--dataset", choices=["mnist", "emnist_letters"], required=True)
    p.add_argument("--data-dir")
    p.add_argument("--cache")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="split, train, evaluate and save a model")
    p.add_argument("--cache", required=True)
    p.add_argument("--dataset", choices=["mnist", "emnist_letters"])
    p.add_argument("--model", default="model.sgmlp")
    p.add_argument("--out", help="directory for history.jsonl and confusion.csv")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--max-epochs", type=int, default=50)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--subset", type=int, help="train on a stratified subset of this many samples")
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved model on a feature cache")
    p.add_argument("--model", required=True)
    p.add_argument("--cache", required=True)
    p.add_argument("--split", choices=["test", "all"], default="test")
    p.add_argument("--out", help="confusion CSV path")
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="classify one 28x28 image")
    p.add_argument("--model", required=True)
    p.add_argument("image")
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("inspect", help="describe a model; with an image, dump attribution maps")
    p.add_argument("--model", required=True)
    p.add_argument("image", nargs="?")
    p.add_argument("--out", help="directory for attribution PGMs")
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        with _thread_limit(getattr(args, "threads", None)):
            return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except EdgeMlpError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FloatingPointError as exc:
        print(f"error: numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
