"""Command-line entry point for batch compression, evaluation, and reports.

Exit codes: 0 success, 1 user error, 2 internal failure.  Errors are
emitted as one JSON object on stderr.  Config precedence: flags beat the
--config file, which beats built-in defaults.  MODELZIP_SIDECAR supplies
the default bridge endpoint for `--model bridge`.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import corpus as corpus_mod
from . import harness, temporal
from .archive import Archive, decode_stream, encode_stream
from .bridge import Session, open_session
from .coder import CoderConfig
from .models import ModelError, get_model
from .protocol import ProtocolError

__all__ = ["main", "run"]

ENDPOINT_PREFIXES = ("mock:", "run:", "tcp:")


class UserError(ValueError):
    pass


def _atomic_write_bytes(path, data: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_text(path, text: str):
    _atomic_write_bytes(path, text.encode("utf-8"))


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UserError(f"cannot read config file {path}: {exc}")
    if not isinstance(data, dict):
        raise UserError(f"config file {path} must hold a JSON object")
    return data


def _setting(args, config_file: dict, name: str, default):
    value = getattr(args, name, None)
    if value is not None:
        return value
    if name in config_file:
        return config_file[name]
    return default


def _cmd_compress(args) -> int:
    cfgf = _load_config_file(args.config)
    context = int(_setting(args, cfgf, "context", 2048))
    precision = int(_setting(args, cfgf, "precision", 16))
    model = get_model(args.model)
    data = Path(args.input).read_bytes()
    if not data:
        raise UserError(f"{args.input} is empty; nothing to compress")
    archive = encode_stream(
        np.frombuffer(data, dtype=np.uint8).astype(np.int64), model, context,
        CoderConfig(freq_bits=precision),
    )
    _atomic_write_bytes(args.output, archive.to_bytes())
    rate = archive.payload_bytes / len(data)
    print(json.dumps({
        "raw_bytes": len(data),
        "payload_bytes": archive.payload_bytes,
        "rate": rate,
        "chunks": len(archive.chunks),
        "model": model.model_id,
    }, sort_keys=True))
    return 0


def _cmd_decompress(args) -> int:
    archive = Archive.load(args.input)
    model = get_model(args.model or archive.model_id)
    symbols = decode_stream(archive, model)
    if symbols.shape[0] != archive.symbol_count:
        raise UserError("decoded symbol count does not match the archive header")
    _atomic_write_bytes(args.output, symbols.astype(np.uint8).tobytes())
    print(json.dumps({"symbols": int(symbols.shape[0]), "model": model.model_id},
                     sort_keys=True))
    return 0


def _resolve_provider(model_arg: str):
    """Returns (provider, bos_policy string, is_session)."""
    if model_arg == "bridge":
        endpoint = os.environ.get("MODELZIP_SIDECAR")
        if not endpoint:
            raise UserError("--model bridge requires the MODELZIP_SIDECAR env var")
        model_arg = endpoint
    if model_arg.startswith(ENDPOINT_PREFIXES):
        session = open_session(model_arg)
        return session, session.info.bos_policy, True
    return get_model(model_arg), "none", False


def _deflate_row_metrics(doc):
    """Classical-compressor baseline: rate from the raw deflate stream."""
    from .baselines import deflate_len
    from .harness import compute_metrics

    data = doc.data
    payload = deflate_len(data)
    n_chars = len(doc.text) if doc.text is not None else len(data)
    return compute_metrics(8.0 * payload, len(data), n_chars, len(data),
                           payload_bytes=payload)


def _eval_one_document(model_id, doc, config):
    model = get_model(model_id)
    doc_config = config
    if doc.modality == "bytes" and config.domain != "bytes":
        doc_config = harness.EvalConfig(
            context_size=config.context_size, mode=config.mode, step=config.step,
            domain="bytes", freq_bits=config.freq_bits,
            physical_compression=config.physical_compression,
        )
    return harness.evaluate_document(doc, model, doc_config)


def _cmd_eval(args) -> int:
    cfgf = _load_config_file(args.config)
    mode = _setting(args, cfgf, "mode", "chunked")
    context = int(_setting(args, cfgf, "context", 2048))
    step = _setting(args, cfgf, "step", None)
    physical = bool(_setting(args, cfgf, "physical", False) or args.physical)
    domain = _setting(args, cfgf, "domain", "text_tokens")
    jobs = int(_setting(args, cfgf, "jobs", 1))

    config = harness.EvalConfig(
        context_size=context, mode=mode,
        step=int(step) if step is not None else None,
        domain=domain, physical_compression=physical,
    )
    manifest = corpus_mod.CorpusManifest.load(args.manifest)
    root = Path(args.root) if args.root else Path(args.manifest).parent
    months = args.months or manifest.months()

    if args.model == "deflate":
        provider, bos_policy, is_session = None, "none", False
        model_label = "deflate"
    else:
        provider, bos_policy, is_session = _resolve_provider(args.model)
        model_label = (provider.info.model_name if is_session
                       else provider.model_id)

    rows: list[harness.ReportRow] = []
    meta_common = dict(
        model=model_label, dataset=manifest.dataset, mode=config.mode,
        context_size=config.context_size, step=config.effective_step,
        bos_policy=bos_policy,
    )
    try:
        for month in months:
            documents = corpus_mod.load_bucket(manifest, month, root)
            pending = []
            for doc in documents:
                meta = dict(meta_common, scope="document", doc_id=doc.doc_id,
                            year_month=month)
                try:
                    if args.model == "deflate":
                        rows.append(harness.ReportRow.from_metrics(
                            _deflate_row_metrics(doc), **meta))
                    elif is_session:
                        doc_config = config
                        if doc.modality == "bytes" and config.domain != "bytes":
                            doc_config = harness.EvalConfig(
                                context_size=config.context_size, mode=config.mode,
                                step=config.step, domain="bytes",
                                physical_compression=config.physical_compression,
                            )
                        metrics = harness.evaluate_document(doc, provider, doc_config)
                        rows.append(harness.ReportRow.from_metrics(metrics, **meta))
                    elif jobs > 1:
                        pending.append((doc, meta))
                    else:
                        metrics = _eval_one_document(args.model, doc, config)
                        rows.append(harness.ReportRow.from_metrics(metrics, **meta))
                except (harness.TokenizeRoundTripError, ProtocolError) as exc:
                    rows.append(harness.ReportRow(
                        **meta, status="skipped", detail=str(exc),
                    ))
            if pending:
                with ProcessPoolExecutor(max_workers=jobs) as pool:
                    futures = [
                        (meta, pool.submit(_eval_one_document, args.model, doc, config))
                        for doc, meta in pending
                    ]
                    for meta, future in futures:
                        rows.append(harness.ReportRow.from_metrics(future.result(), **meta))
    finally:
        if is_session:
            provider.close()

    rows.sort(key=lambda r: (r.year_month, r.doc_id))
    rows.extend(harness.aggregate_rows(rows))

    out_path = Path(args.out)
    buf = []
    for row in rows:
        buf.append(json.dumps(row.to_dict(), sort_keys=True))
    _atomic_write_text(out_path, "\n".join(buf) + "\n")
    if args.csv:
        import io

        sink = io.StringIO()
        harness.write_rows_csv(rows, sink)
        _atomic_write_text(args.csv, sink.getvalue())
    ok_docs = sum(1 for r in rows if r.scope == "document" and r.status == "ok")
    skipped = sum(1 for r in rows if r.status == "skipped")
    print(json.dumps({
        "rows": len(rows), "documents": ok_docs, "skipped": skipped,
        "months": len(months), "out": str(out_path),
    }, sort_keys=True))
    return 0


def _cmd_report(args) -> int:
    path = Path(args.rows)
    if not path.exists():
        raise UserError(f"rows file {path} does not exist")
    with open(path) as fh:
        if path.suffix == ".csv":
            rows = harness.read_rows_csv(fh)
        else:
            rows = harness.read_rows_jsonl(fh)
    month_rows = [r for r in rows if r.scope == "month"]
    if not month_rows:
        month_rows = harness.aggregate_rows(rows)
    series = temporal.series_from_rows(month_rows)
    if not series:
        raise UserError("no month-level rows found; run `modelzip eval` first")
    summaries = [temporal.summarize(s, args.cutoff) for s in series]
    written = temporal.emit_report(summaries, args.out, series=series)
    header = f"{'model':<24} {'dataset':<16} {'avg':>8} {'test':>8} {'gap':>7} {'future':>8}"
    print(header)
    for s in sorted(summaries, key=lambda s: (s.model, s.dataset)):
        print(f"{s.model:<24} {s.dataset:<16} {s.rate_avg:>8.3f} {s.rate_test:>8.3f} "
              f"{temporal.format_gap_signed(s.gap):>7} {s.rate_future_estimate:>8.3f}")
    print(json.dumps({"files": [str(p) for p in written]}, sort_keys=True))
    return 0


def _cmd_ingest(args) -> int:
    manifest = corpus_mod.ingest(args.directory, dataset=args.dataset)
    _atomic_write_text(
        args.out, json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n"
    )
    print(json.dumps({
        "dataset": manifest.dataset,
        "documents": len(manifest.entries),
        "months": len(manifest.months()),
        "out": str(args.out),
    }, sort_keys=True))
    return 0


def _cmd_selftest(args) -> int:
    from .selftest import run_selftest

    result = run_selftest(seed=args.seed, n_cases=args.cases)
    for line in result.lines:
        print(line)
    if not result.ok:
        raise RuntimeError("selftest failed")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modelzip",
        description="Arithmetic-coding compression with pluggable probability "
                    "models, plus compression-based model evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compress", help="compress a file under a built-in model")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--model", required=True)
    p.add_argument("--context", type=int, default=None)
    p.add_argument("--precision", type=int, default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=_cmd_compress)

    p = sub.add_parser("decompress", help="invert `compress`")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--model", default=None,
                   help="defaults to the model id recorded in the archive")
    p.set_defaults(func=_cmd_decompress)

    p = sub.add_parser("eval", help="score a corpus and emit metric rows")
    p.add_argument("--manifest", required=True)
    p.add_argument("--root", default=None,
                   help="corpus root; defaults to the manifest's directory")
    p.add_argument("--model", required=True,
                   help="model id, endpoint (mock:/run:/tcp:), or `bridge`")
    p.add_argument("--mode", choices=("chunked", "sliding"), default=None)
    p.add_argument("--context", type=int, default=None)
    p.add_argument("--step", type=int, default=None)
    p.add_argument("--physical", action="store_true")
    p.add_argument("--domain", choices=("text_tokens", "bytes"), default=None)
    p.add_argument("--months", nargs="*", default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--csv", default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("report", help="temporal generalization/robustness summary")
    p.add_argument("--rows", required=True)
    p.add_argument("--cutoff", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("ingest", help="index a dataset/YYYY-MM/doc tree")
    p.add_argument("directory")
    p.add_argument("--out", required=True)
    p.add_argument("--dataset", default=None)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("selftest", help="rational-oracle and protocol conformance suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cases", type=int, default=100)
    p.set_defaults(func=_cmd_selftest)

    return parser


USER_ERRORS = (
    UserError, ModelError, ProtocolError, corpus_mod.CorpusError,
    temporal.TemporalError, harness.HarnessError, FileNotFoundError,
)


def run(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except USER_ERRORS as exc:
        print(json.dumps({"error": {"kind": type(exc).__name__, "detail": str(exc)}}),
              file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - boundary
        print(json.dumps({"error": {"kind": type(exc).__name__, "detail": str(exc),
                                    "internal": True}}), file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
