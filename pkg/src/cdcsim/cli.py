"""Command-line front end: single runs, sweep tables, and golden fixtures.

Configuration comes from an optional JSON file plus flag overrides (flags
win).  Presets are embedded in this module so fixture bytes cannot drift.
Exit codes: 0 success, 2 configuration error, 3 verification failure,
4 unsupported parameter combination.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

from . import analytics, engine
from .codec import IncompleteShuffleError
from .engine import UnsupportedCombinationError, dump_json
from .gf2 import BitVec
from .placement import JobSpec, make_placement, placement_to_json
from .workloads import (
    CodedLinearTransformWorkload,
    CountOverflowError,
    LinearTransformWorkload,
    SyntheticRankWorkload,
    ingest_string,
    ingest_text,
    lintrans_from_file,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VERIFY = 3
EXIT_UNSUPPORTED = 4

PAPER_WORDCOUNT_TEXT = "1212231 2111121 2312131 3112132 1131414 1141231"

PRESETS: dict[str, dict] = {
    "paper-wordcount": {
        "K": 4, "N": 6, "Q": 4, "r": 2, "s": 1, "T": 6,
        "scheme": "cdc",
        "workload": {"kind": "wordcount", "text": PAPER_WORDCOUNT_TEXT, "tokenizer": "char"},
    },
    "fig2": {
        "sweep": {"kind": "fig2", "K": 16, "Q": 16, "N": 128, "m": 2048, "q": 2},
    },
    "fig3": {
        "sweep": {
            "kind": "fig3", "K": 4, "N": 6, "Q": 4, "r": 2, "s": 1,
            "T_values": list(range(2, 41, 2)), "rho": 2,
        },
    },
    "fig4": {
        "sweep": {
            "kind": "fig4", "K": 10, "N": 2520, "Q": 360, "T": 64, "s": 1,
            "r_values": list(range(1, 10)), "rho": "full-rank",
        },
    },
}


def threads_cap() -> int:
    try:
        return max(1, int(os.environ.get("CDC_SIM_THREADS", "1")))
    except ValueError:
        return 1


def _fr(x: Fraction | None) -> str | None:
    return None if x is None else f"{x.numerator}/{x.denominator}"


def _merge_config(args: argparse.Namespace) -> dict:
    config: dict = {}
    if args.preset:
        if args.preset not in PRESETS:
            raise ValueError(f"unknown preset {args.preset!r}; available: {sorted(PRESETS)}")
        config = copy.deepcopy(PRESETS[args.preset])
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            file_cfg = json.load(fh)
        config.update(file_cfg)
    for name in ("K", "N", "Q", "r", "s", "T"):
        value = getattr(args, name)
        if value is not None:
            config[name] = value
    if args.scheme is not None:
        config["scheme"] = args.scheme
    if args.workload is not None:
        config.setdefault("workload", {})["kind"] = args.workload
    if args.input is not None:
        config.setdefault("workload", {})["input"] = args.input
    if args.seed is not None:
        config.setdefault("workload", {})["seed"] = args.seed
    if args.rho is not None:
        config.setdefault("sweep", {})["rho"] = args.rho
    config["out_dir"] = args.out_dir
    return config


def _build_spec(config: dict) -> JobSpec:
    missing = [name for name in ("K", "N", "Q", "r", "s", "T") if name not in config]
    if missing:
        raise ValueError(f"missing job parameters: {', '.join(missing)} "
                         "(provide via flags, --config, or --preset)")
    return JobSpec(K=config["K"], N=config["N"], Q=config["Q"],
                   r=config["r"], s=config["s"], T=config["T"])


def build_workload(desc: dict, spec: JobSpec):
    kind = desc.get("kind", "synthetic")
    if kind == "wordcount":
        tokenizer = desc.get("tokenizer", "word")
        if "input" in desc:  # an explicit corpus path beats embedded text
            workload, _report = ingest_text(desc["input"], spec.Q, spec.N, tokenizer=tokenizer)
        elif "text" in desc:
            workload, _report = ingest_string(desc["text"], spec.Q, spec.N, tokenizer=tokenizer)
        else:
            raise ValueError("wordcount workload needs 'text' or 'input'")
        return workload
    if kind in ("lintrans", "coded-lintrans"):
        if "input" in desc:
            base = lintrans_from_file(desc["input"])
        else:
            m = desc.get("m", spec.Q * spec.T)
            n = desc.get("n", 32)
            base = LinearTransformWorkload.random(m, n, spec.N, desc.get("seed", 0))
        return CodedLinearTransformWorkload(base) if kind == "coded-lintrans" else base
    if kind == "synthetic":
        return SyntheticRankWorkload(seed=desc.get("seed", 0),
                                     duplicate_prob=desc.get("duplicate_prob", 0.0))
    raise ValueError(f"unknown workload kind {kind!r}")


def _serialize_output(value) -> str:
    if isinstance(value, BitVec):
        return f"{value.nbits}:{value.to_hex()}"
    return str(value)


def result_to_json(result: engine.RunResult, report: analytics.LoadReport) -> dict:
    doc = {
        "spec": result.spec.as_dict(),
        "scheme": result.scheme,
        "b_k": {str(k): v for k, v in sorted(result.bits_by_node.items())},
        "load_empirical": _fr(report.load_empirical),
        "load_analytic": _fr(report.load_analytic),
        "deviation": _fr(report.deviation),
        "verification": result.verification,
    }
    if report.load_analytic_alt is not None:
        doc["load_analytic_alt"] = _fr(report.load_analytic_alt)
        doc["deviation_alt"] = _fr(report.deviation_alt)
    if report.notes:
        doc["notes"] = report.notes
    if result.rho is not None:
        doc["rho"] = {f"{k}:{ell}": v for (k, ell), v in sorted(result.rho.items())}
        doc["rho_avg"] = {str(ell): _fr(v) for ell, v in sorted(report.rho_by_ell.items())}
    if result.outputs is not None:
        doc["outputs"] = {
            str(k): {str(q): _serialize_output(v) for q, v in sorted(out.items())}
            for k, out in sorted(result.outputs.items())
        }
    return doc


def _write_csv(path: str, header: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def cmd_run(args: argparse.Namespace) -> int:
    try:
        config = _merge_config(args)
        spec = _build_spec(config)
        workload = build_workload(config.get("workload", {}), spec)
        scheme = config.get("scheme", "cdc")
        if scheme not in engine.SCHEMES:
            raise ValueError(f"unknown scheme {scheme!r}, expected one of {engine.SCHEMES}")
    except (KeyError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        result = engine.run(spec, workload, scheme)
    except UnsupportedCombinationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except (CountOverflowError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    report = analytics.build_load_report(result)
    out_dir = config["out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    _write_csv(
        os.path.join(out_dir, "loads.csv"),
        ["scheme", "r", "s", "L_empirical", "L_analytic", "deviation"],
        [[result.scheme, str(spec.r), str(spec.s),
          analytics.fmt12(report.load_empirical),
          analytics.fmt12(report.load_analytic),
          analytics.fmt12(report.deviation)]],
    )
    with open(os.path.join(out_dir, "result.json"), "w", encoding="utf-8") as fh:
        fh.write(dump_json(result_to_json(result, report)))

    total = sum(result.bits_by_node.values())
    print(f"scheme={result.scheme} bits={total} load={report.load_empirical} "
          f"verification={result.verification}")
    if result.verification == "fail":
        return EXIT_VERIFY
    return EXIT_OK


def _sweep_fig2(sweep: dict, out_dir: str) -> None:
    rows = analytics.fig2_table(sweep["K"], sweep["Q"], sweep["N"], sweep["m"], sweep["q"])
    _write_csv(
        os.path.join(out_dir, "fig2.csv"),
        ["r", "msg_len_bits", "count_paper", "count_alt"],
        [[str(row.r), analytics.fmt12(row.msg_len_bits),
          str(row.count_paper), str(row.count_alt)] for row in rows],
    )
    meta = {k: sweep[k] for k in ("K", "Q", "N", "m", "q")}
    with open(os.path.join(out_dir, "fig2.meta.json"), "w", encoding="utf-8") as fh:
        fh.write(dump_json(meta))


def _sweep_fig3(sweep: dict, out_dir: str) -> None:
    rho = sweep.get("rho", 2)
    rows = analytics.load_vs_t_sweep(sweep["K"], sweep["Q"], sweep["N"], sweep["r"],
                                     sweep["T_values"], s=sweep.get("s", 1), rho_model=rho)
    _write_csv(
        os.path.join(out_dir, "fig3.csv"),
        ["T", "L_cdc", "L_cdc_ld"],
        [[str(row.T), analytics.fmt12(row.l_cdc), analytics.fmt12(row.l_cdc_ld)]
         for row in rows],
    )
    meta = {k: sweep[k] for k in ("K", "Q", "N", "r")}
    meta["rho_model"] = rows[0].rho_label if rows else str(rho)
    with open(os.path.join(out_dir, "fig3.meta.json"), "w", encoding="utf-8") as fh:
        fh.write(dump_json(meta))


def _sweep_fig4(sweep: dict, out_dir: str) -> None:
    rho = sweep.get("rho", "full-rank")
    r_values = sweep["r_values"]
    workers = threads_cap()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = pool.map(
                lambda r: analytics.tradeoff_sweep(sweep["K"], sweep["Q"], sweep["N"],
                                                   sweep["T"], [r], s=sweep.get("s", 1),
                                                   rho_model=rho),
                r_values,
            )
        rows = sorted((row for chunk in chunks for row in chunk), key=lambda row: row.r)
    else:
        rows = analytics.tradeoff_sweep(sweep["K"], sweep["Q"], sweep["N"], sweep["T"],
                                        r_values, s=sweep.get("s", 1), rho_model=rho)
    _write_csv(
        os.path.join(out_dir, "fig4.csv"),
        ["r", "L_uncoded", "L_cdc", "L_cdc_ld"],
        [[str(row.r), analytics.fmt12(row.l_uncoded), analytics.fmt12(row.l_cdc),
          analytics.fmt12(row.l_cdc_ld)] for row in rows],
    )
    meta = {k: sweep[k] for k in ("K", "Q", "N", "T")}
    meta["rho_model"] = rows[0].rho_label if rows else str(rho)
    with open(os.path.join(out_dir, "fig4.meta.json"), "w", encoding="utf-8") as fh:
        fh.write(dump_json(meta))


def cmd_sweep(args: argparse.Namespace) -> int:
    try:
        config = _merge_config(args)
        sweep = config.get("sweep")
        if not sweep:
            raise ValueError("no sweep definition (use --preset fig2/fig3/fig4 or a config file)")
        kind = sweep.get("kind")
        out_dir = config["out_dir"]
        os.makedirs(out_dir, exist_ok=True)
        if kind == "fig2":
            _sweep_fig2(sweep, out_dir)
        elif kind == "fig3":
            _sweep_fig3(sweep, out_dir)
        elif kind == "fig4":
            _sweep_fig4(sweep, out_dir)
        else:
            raise ValueError(f"unknown sweep kind {kind!r}")
    except (KeyError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"wrote {kind} table to {out_dir}")
    return EXIT_OK


def fixture_to_json(result: engine.RunResult, workload_desc: dict) -> dict:
    return {
        "workload": workload_desc,
        "transcript": engine.transcript_to_json(result.transcript),
    }


def replay_fixture(doc: dict) -> str:
    """Decode a serialized transcript against its workload; returns the verdict."""
    transcript = engine.transcript_from_json(doc["transcript"])
    spec = transcript.spec
    workload = build_workload(doc["workload"], spec)
    placement = make_placement(spec)
    store = workload.build_store(spec)
    try:
        _outputs, _reference, _recovered, verification = engine.decode_and_verify(
            spec, placement, store, transcript, workload)
    except IncompleteShuffleError:
        return "fail"
    return verification


def cmd_fixture(args: argparse.Namespace) -> int:
    if args.input:
        try:
            with open(args.input, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
            verdict = replay_fixture(doc)
        except (KeyError, ValueError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"fixture {args.input}: {verdict}")
        return EXIT_OK if verdict == "pass" else EXIT_VERIFY

    try:
        config = _merge_config(args)
        if "workload" not in config:
            config = copy.deepcopy(PRESETS["paper-wordcount"]) | {"out_dir": args.out_dir}
        spec = _build_spec(config)
        workload_desc = config["workload"]
        workload = build_workload(workload_desc, spec)
        out_dir = config["out_dir"]
        os.makedirs(out_dir, exist_ok=True)
    except (KeyError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    with open(os.path.join(out_dir, "placement.json"), "w", encoding="utf-8") as fh:
        fh.write(dump_json(placement_to_json(make_placement(spec))))
    verdicts = []
    for scheme in engine.SCHEMES:
        result = engine.run(spec, workload, scheme)
        doc = fixture_to_json(result, workload_desc)
        path = os.path.join(out_dir, f"fixture-{scheme}.json")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(dump_json(doc))
        verdicts.append(result.verification)
        print(f"wrote {path} ({result.verification})")
    return EXIT_OK if all(v == "pass" for v in verdicts) else EXIT_VERIFY


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cdcsim",
        description="Deterministic simulator for coded distributed computing shuffles",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("run", cmd_run), ("sweep", cmd_sweep), ("fixture", cmd_fixture)):
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--preset", help=f"embedded preset, one of {sorted(PRESETS)}")
        p.add_argument("--scheme", choices=engine.SCHEMES)
        p.add_argument("--K", type=int)
        p.add_argument("--N", type=int)
        p.add_argument("--Q", type=int)
        p.add_argument("--r", type=int)
        p.add_argument("--s", type=int)
        p.add_argument("--T", type=int)
        p.add_argument("--workload", choices=("wordcount", "lintrans", "coded-lintrans", "synthetic"))
        p.add_argument("--input", help="workload input file (or fixture to replay)")
        p.add_argument("--seed", type=int)
        p.add_argument("--rho", type=int, help="constant rank model for sweeps")
        p.add_argument("--out-dir", default=".")
        p.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
