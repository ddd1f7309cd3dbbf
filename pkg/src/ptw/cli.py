"""``ptw`` command line: train, encode, scan, synth, report.

Settings resolve as command-line flag, then ``--config`` file (key=value),
then the built-in defaults below. Failures print one line,
``ptw: error: <CODE>: <message>``, to stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Any, Callable, Sequence

import numpy as np

from . import synth
from .atypicality import (
    LOG_STAR_C0,
    DeltaTrace,
    ScanConfig,
    flag_segments,
    scan,
    segments_to_jsonl,
    typical_conditionals,
)
from .ingest import IngestError, read_config, read_series, write_series, write_text
from .pattern_tree import PatternTree, train

DEFAULTS: dict[str, Any] = {
    "depth": 3,
    "predictor": "ss",
    "floor": None,
    "floor_rel": 1e-8,
    "format": "auto",
    "tau": 40.0,
    "depths": (1, 2, 3, 4),
    "max_len": 400,
    "stride": 1,
    "min_len": None,
    "workers": 1,
    "c0": LOG_STAR_C0,
    "seed": 0,
    "n": 1000,
    "mean": 0.0,
    "var": 1.0,
    "weights": (0.9, 0.1),
    "means": (800.0, 400.0),
    "variances": (900.0, 400.0),
    "background": 4.0,
    "low_var": 1.0,
    "amplitude": 2.0,
    "period": 50.0,
    "phase": 0.0,
    "gap": 2000,
    "episode": 400,
}


class CLIError(Exception):
    def __init__(self, code: str, message: str) -> None:
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # one line, no usage dump
        raise CLIError("E_USAGE", message)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in str(text).split(",") if v.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in str(text).split(",") if v.strip())


def _optional_float(text: str) -> float | None:
    return None if str(text).lower() in ("", "none", "auto") else float(text)


def _optional_int(text: str) -> int | None:
    return None if str(text).lower() in ("", "none", "auto") else int(text)


CONVERTERS: dict[str, Callable[[str], Any]] = {
    "depth": int,
    "predictor": str,
    "floor": _optional_float,
    "floor_rel": float,
    "format": str,
    "tau": float,
    "depths": _ints,
    "max_len": int,
    "stride": int,
    "min_len": _optional_int,
    "workers": int,
    "c0": float,
    "seed": int,
    "n": int,
    "mean": float,
    "var": float,
    "weights": _floats,
    "means": _floats,
    "variances": _floats,
    "background": float,
    "low_var": float,
    "amplitude": float,
    "period": float,
    "phase": float,
    "gap": int,
    "episode": int,
}


def _settings(args: argparse.Namespace, keys: Sequence[str]) -> dict[str, Any]:
    """Merge flag > config file > defaults for ``keys``."""
    config = read_config(args.config) if getattr(args, "config", None) else {}
    unknown = set(config) - set(CONVERTERS)
    if unknown:
        raise CLIError("E_CONFIG", f"unknown config key(s): {', '.join(sorted(unknown))}")
    out: dict[str, Any] = {}
    for key in keys:
        flag = getattr(args, key, None)
        if flag is not None:
            out[key] = flag
        elif key in config:
            try:
                out[key] = CONVERTERS[key](config[key])
            except ValueError:
                raise CLIError("E_CONFIG", f"bad value for {key}: {config[key]!r}") from None
        else:
            out[key] = DEFAULTS[key]
    return out


def _add(p: argparse.ArgumentParser, *names: str) -> None:
    for key in names:
        flag = "--" + key.replace("_", "-")
        conv = CONVERTERS[key]
        if key == "predictor":
            p.add_argument(flag, choices=("ss", "op"), default=None)
        elif key == "format":
            p.add_argument(flag, choices=("auto", "single", "time-value"), default=None)
        else:
            p.add_argument(flag, type=conv, default=None)


def _floor_for(values: np.ndarray, floor: float | None, floor_rel: float) -> float:
    if floor is not None:
        return float(floor)
    var = float(np.var(values)) if len(values) > 1 else 0.0
    return floor_rel * var if var > 0 else floor_rel


def _load_model(path: str) -> PatternTree:
    try:
        return PatternTree.load(path)
    except OSError as exc:
        raise CLIError("E_IO", f"cannot read model {path}: {exc.strerror}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise CLIError("E_MODEL", f"invalid model {path}: {exc}") from None


def _emit(obj: dict) -> None:
    print(json.dumps(obj, sort_keys=True))


# -- subcommands ----------------------------------------------------------


def cmd_train(args: argparse.Namespace) -> int:
    s = _settings(args, ("depth", "predictor", "floor", "floor_rel", "format"))
    series = read_series(args.input, s["format"]).values
    if len(series) < s["depth"] + 2:
        raise CLIError("E_SHORT", f"training needs at least depth + 2 = {s['depth'] + 2} samples, got {len(series)}")
    floor = _floor_for(series, s["floor"], s["floor_rel"])
    model = train(series.tolist(), s["depth"], s["predictor"], floor, freeze=True)
    model.save(args.output)
    _emit({"model": args.output, "depth": model.depth, "predictor": model.predictor,
           "floor": model.floor, "samples": len(series), "train_bits": model.codelength})
    return 0


def cmd_encode(args: argparse.Namespace) -> int:
    s = _settings(args, ("format",))
    model = _load_model(args.model)
    if not model.frozen:
        raise CLIError("E_MODEL", "model is not frozen")
    series = read_series(args.input, s["format"]).values
    bits = typical_conditionals(model, series.tolist())
    if args.per_sample:
        lines = ["index,bits\n"] + [f"{i},{b!r}\n" for i, b in enumerate(bits.tolist())]
        write_text(args.per_sample, "".join(lines))
    total = 0.0
    for b in bits.tolist():
        total += b
    _emit({"samples": len(series), "total_bits": total, "bits_per_sample": total / len(series)})
    return 0


def cmd_scan(args: argparse.Namespace) -> int:
    s = _settings(args, ("format", "tau", "depths", "max_len", "stride", "floor",
                         "predictor", "c0", "min_len", "workers"))
    model = _load_model(args.model)
    if not model.frozen:
        raise CLIError("E_MODEL", "model is not frozen")
    series = read_series(args.input, s["format"]).values
    cfg = ScanConfig(tau=s["tau"], depths=s["depths"], max_len=s["max_len"], stride=s["stride"],
                     floor=s["floor"], predictor=s["predictor"], c0=s["c0"],
                     min_len=s["min_len"], workers=s["workers"])
    trace, segments = scan(series, model, cfg)
    write_text(args.trace, trace.to_csv())
    write_text(args.segments, segments_to_jsonl(segments))
    _emit({"starts": len(trace), "segments": len(segments), "trace": args.trace,
           "segments_file": args.segments,
           "min_delta_L_bits": float(trace.delta.min()) if len(trace) else None})
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    keys = ("seed", "n", "mean", "var", "weights", "means", "variances", "background",
            "low_var", "amplitude", "period", "phase", "gap", "episode")
    s = _settings(args, keys)
    sidecar: dict[str, Any] = {"kind": args.kind, "seed": s["seed"]}
    if args.kind == "gaussian":
        values = synth.gen_gaussian(s["n"], s["mean"], s["var"], s["seed"])
        sidecar.update(mean=s["mean"], var=s["var"], labels=[])
    elif args.kind == "mixture":
        spec = synth.MixtureSpec(s["weights"], s["means"], s["variances"])
        values, z = synth.gen_mixture(s["n"], spec, s["seed"])
        sidecar.update(weights=list(spec.weights), means=list(spec.means),
                       variances=list(spec.variances), states=z.tolist(), labels=[])
    else:
        values, labels = synth.two_anomaly_stream(
            s["seed"], background=s["background"], low_var=s["low_var"], amplitude=s["amplitude"],
            period=s["period"], phase=s["phase"], gap=s["gap"], episode=s["episode"])
        sidecar.update({k: s[k] for k in ("background", "low_var", "amplitude", "period", "phase",
                                          "gap", "episode")})
        sidecar["labels"] = [lab.to_dict() for lab in labels]
    write_series(args.output, values)
    labels_path = args.labels or args.output + ".labels.json"
    write_text(labels_path, json.dumps(sidecar) + "\n")
    _emit({"series": args.output, "labels": labels_path, "samples": len(values)})
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    s = _settings(args, ("tau",))
    try:
        with open(args.trace, encoding="utf-8") as fh:
            trace = DeltaTrace.from_csv(fh.read())
    except OSError as exc:
        raise CLIError("E_IO", f"cannot read trace {args.trace}: {exc.strerror}") from None
    except (ValueError, IndexError) as exc:
        raise CLIError("E_PARSE", f"invalid trace {args.trace}: {exc}") from None
    if not len(trace):
        raise CLIError("E_EMPTY", "trace has no rows")
    d = trace.delta
    i = int(np.argmin(d))
    segments = flag_segments(trace, s["tau"])
    depths, counts = np.unique(trace.best_depth, return_counts=True)
    _emit({
        "starts": len(trace),
        "first_start": int(trace.starts[0]),
        "last_start": int(trace.starts[-1]),
        "tau": s["tau"],
        "delta_L_min": float(d[i]),
        "delta_L_min_start": int(trace.starts[i]),
        "delta_L_median": float(np.median(d)),
        "delta_L_mean": float(np.mean(d)),
        "delta_L_max": float(np.max(d)),
        "starts_below_tau": int(np.count_nonzero(d < -s["tau"])),
        "fraction_below_tau": float(np.mean(d < -s["tau"])),
        "segments": [{"start": g.start, "length": g.length, "score_bits": g.score} for g in segments],
        "best_depth_counts": {str(int(k)): int(c) for k, c in zip(depths, counts)},
    })
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ptw", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train and freeze a typical coder")
    t.add_argument("input")
    t.add_argument("-o", "--output", required=True, help="model file")
    t.add_argument("--config")
    _add(t, "depth", "predictor", "floor", "floor_rel", "format")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("encode", help="codelength of a series under a frozen model")
    e.add_argument("model")
    e.add_argument("input")
    e.add_argument("--per-sample", help="write index,bits CSV")
    e.add_argument("--config")
    _add(e, "format")
    e.set_defaults(func=cmd_encode)

    s = sub.add_parser("scan", help="atypicality scan against a frozen model")
    s.add_argument("model")
    s.add_argument("input")
    s.add_argument("--trace", default="trace.csv")
    s.add_argument("--segments", default="segments.jsonl")
    s.add_argument("--config")
    _add(s, "format", "tau", "depths", "max_len", "stride", "floor", "predictor", "c0",
         "min_len", "workers")
    s.set_defaults(func=cmd_scan)

    g = sub.add_parser("synth", help="write a synthetic series and label sidecar")
    g.add_argument("kind", choices=("gaussian", "mixture", "composite"))
    g.add_argument("-o", "--output", required=True)
    g.add_argument("--labels", help="label sidecar path (default: <output>.labels.json)")
    g.add_argument("--config")
    _add(g, "seed", "n", "mean", "var", "weights", "means", "variances", "background",
         "low_var", "amplitude", "period", "phase", "gap", "episode")
    g.set_defaults(func=cmd_synth)

    r = sub.add_parser("report", help="summary statistics of a trace")
    r.add_argument("trace")
    r.add_argument("--config")
    _add(r, "tau")
    r.set_defaults(func=cmd_report)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except CLIError as exc:
        code, msg = exc.code, str(exc)
    except IngestError as exc:
        code, msg = exc.code, str(exc)
    except OSError as exc:
        code, msg = "E_IO", f"{exc.filename or ''}: {exc.strerror or exc}"
    except ValueError as exc:
        code, msg = "E_VALUE", str(exc)
    print(f"ptw: error: {code}: {' '.join(msg.split())}", file=sys.stderr)
    return 2 if code == "E_USAGE" else 1


if __name__ == "__main__":
    sys.exit(main())
