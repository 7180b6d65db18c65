"""Command-line entry point: ``somno <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data or format error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np

from . import baselines, cam, evaluation, render
from . import model as mdl
from .data import container, synth
from .errors import DataError
from .nn import AdamConfig

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def default_seed() -> int:
    raw = os.environ.get("SOMNO_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"SOMNO_SEED must be an integer, got {raw!r}") from None


def load_dataset(path) -> container.LabeledSet:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"data file not found: {path}")
    if path.suffix.lower() == ".csv":
        return container.import_csv(path)
    return container.load_edd(path)


def save_dataset(data, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix.lower() == ".csv":
        container.export_csv(data, path)
    else:
        container.save_edd(data, path)


def _variant(name: str, seed: int = 0) -> mdl.ModelConfig:
    try:
        return mdl.ModelConfig.from_name(name, rng_seed=seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _train_cfg(args) -> mdl.TrainConfig:
    try:
        return mdl.TrainConfig(
            batch_size=args.batch,
            epochs=args.epochs,
            optimizer=AdamConfig(learning_rate=args.lr),
            shuffle_seed=args.seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_train(args) -> int:
    data = load_dataset(args.data)
    cfg = _variant(args.variant, args.seed)
    result = mdl.train(data.values, data.labels, _train_cfg(args), cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    mdl.save_checkpoint(out, result.params, cfg)
    with open(out.with_name(out.stem + "_loss.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "loss"])
        for e, loss in enumerate(result.losses, start=1):
            w.writerow([e, repr(float(loss))])
    return EXIT_OK


def _write_cnn_reports(reports, out: Path, baseline_reports=(), title="Mean accuracy vs epoch"):
    out.mkdir(parents=True, exist_ok=True)
    evaluation.write_accuracy_csv(list(reports) + list(baseline_reports), out / "accuracy.csv")
    summary = evaluation.build_summary(reports, baseline_reports)
    evaluation.write_summary_json(summary, out / "summary.json")
    if reports:
        curves = {r.variant: (r.mean_per_epoch(), r.stderr_per_epoch()) for r in reports}
        (out / "accuracy.svg").write_text(render.accuracy_chart_svg(curves, title), encoding="utf-8")


def _write_baseline_table(reports, out: Path):
    with open(out / "baseline_table.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject"] + [r.method for r in reports])
        for i, s in enumerate(reports[0].subjects):
            w.writerow([s] + [f"{100 * r.accuracy[i]:.2f}" for r in reports])
        w.writerow(["average"] + [f"{100 * r.mean:.2f}" for r in reports])


def cmd_eval(args) -> int:
    data = load_dataset(args.data)
    out = Path(args.out)
    if args.method == "cnn":
        cfg = _variant(args.variant)
        report = evaluation.run_cnn_experiment(
            data, cfg, _train_cfg(args), repeats=args.repeats, master_seed=args.seed, jobs=args.jobs
        )
        _write_cnn_reports([report], out)
    else:
        report = evaluation.run_baseline_experiment(data, args.method)
        out.mkdir(parents=True, exist_ok=True)
        _write_cnn_reports([], out, [report])
        _write_baseline_table([report], out)
    return EXIT_OK


def cmd_baseline(args) -> int:
    data = load_dataset(args.data)
    feats = baselines.feature_matrix(data.values)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in baselines.CLASSIFIERS:
            raise UsageError(f"unknown method {m!r}")
    reports = [evaluation.run_baseline_experiment(data, m, feats) for m in methods]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_cnn_reports([], out, reports)
    _write_baseline_table(reports, out)
    return EXIT_OK


def cmd_ablate(args) -> int:
    data = load_dataset(args.data)
    variants = [_variant(v) for v in args.variants.split(",") if v.strip()]
    reports = evaluation.run_ablations(
        data, variants, _train_cfg(args), repeats=args.repeats, master_seed=args.seed, jobs=args.jobs
    )
    _write_cnn_reports(list(reports.values()), Path(args.out), title="Ablations: mean accuracy vs epoch")
    return EXIT_OK


def cmd_explain(args) -> int:
    data = load_dataset(args.data)
    params, cfg = mdl.load_checkpoint(args.ckpt)
    idx = data.subject_index().get(args.subject)
    if idx is None:
        raise DataError(f"subject {args.subject} is not in {args.data}")
    if not 0 <= args.sample < len(idx):
        raise DataError(f"subject {args.subject} has {len(idx)} samples; --sample {args.sample} is out of range")
    bundle = data.values[idx]
    exp = cam.explain(args.sample, bundle, params, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"subject{args.subject}_sample{args.sample}"
    signal = bundle[args.sample]
    render.write_explanation_csv(out / f"{stem}.csv", signal, exp.heatmaps, exp.probs, exp.band_powers)
    predicted = int(np.argmax(exp.probs))
    title = f"subject {args.subject}, label {int(data.labels[idx[args.sample]])}:"
    svg = render.explanation_svg(signal, exp.heatmaps[predicted], exp.probs, exp.band_powers, title)
    (out / f"{stem}.svg").write_text(svg, encoding="utf-8")
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = synth.SynthSpec(
        n_subjects=args.subjects,
        samples_per_class=args.per_class,
        drowsy_events=tuple(args.drowsy_events.split(",")),
        alert_events=tuple(args.alert_events.split(",")),
        seed=args.seed,
    )
    data = synth.synth_generate(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    container.save_edd(data, out / "synth.edd")
    synth.write_annotations(data, out / "synth_events.csv")
    return EXIT_OK


def cmd_bands(args) -> int:
    data = load_dataset(args.data)
    feats = baselines.feature_matrix(data.values)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject_id", "label", *baselines.BAND_NAMES])
        for s, lab, row in zip(data.subjects, data.labels, feats):
            w.writerow([int(s), int(lab)] + [repr(float(v)) for v in row])
    return EXIT_OK


def cmd_convert(args) -> int:
    save_dataset(load_dataset(args.input), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="somno", description="Compact interpretable CNN for single-channel EEG drowsiness detection.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def training_flags(sp, epochs=50):
        sp.add_argument("--epochs", type=int, default=epochs)
        sp.add_argument("--batch", type=int, default=50)
        sp.add_argument("--lr", type=float, default=0.01)
        sp.add_argument("--seed", type=int, default=None, help="default: $SOMNO_SEED or 0")

    sp = sub.add_parser("train", help="train one model on a dataset")
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True, help="checkpoint path; loss CSV is written beside it")
    sp.add_argument("--variant", default="Full")
    training_flags(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="leave-one-subject-out evaluation")
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--method", default="cnn", choices=["cnn", *baselines.CLASSIFIERS])
    sp.add_argument("--variant", default="Full")
    sp.add_argument("--repeats", type=int, default=10)
    sp.add_argument("--jobs", type=int, default=1)
    training_flags(sp)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("baseline", help="band-power classifiers under LOSO")
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--methods", default="lda,lr,gnb,knn")
    sp.set_defaults(func=cmd_baseline)

    sp = sub.add_parser("ablate", help="compare model variants under LOSO")
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--variants", default="Full,NoActiv,NoBatchNorm,AvgPool40,AvgPool80")
    sp.add_argument("--repeats", type=int, default=10)
    sp.add_argument("--jobs", type=int, default=1)
    training_flags(sp)
    sp.set_defaults(func=cmd_ablate)

    sp = sub.add_parser("explain", help="class activation heatmaps for one sample")
    sp.add_argument("--data", required=True)
    sp.add_argument("--ckpt", required=True)
    sp.add_argument("--subject", type=int, required=True)
    sp.add_argument("--sample", type=int, required=True, help="0-based index within the subject")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_explain)

    sp = sub.add_parser("synth", help="generate a synthetic dataset with event annotations")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--subjects", type=int, default=8)
    sp.add_argument("--per-class", type=int, default=100)
    sp.add_argument("--drowsy-events", default="spindle,theta")
    sp.add_argument("--alert-events", default="emg,drift")
    sp.add_argument("--seed", type=int, default=None)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("bands", help="dump relative band-power features")
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_bands)

    sp = sub.add_parser("convert", help="convert between CSV and EDD")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_convert)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "seed", 0) is None:
            args.seed = default_seed()
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"somno: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        print(f"somno: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
