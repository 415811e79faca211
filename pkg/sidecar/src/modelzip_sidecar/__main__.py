"""Command line: serve the protocol on stdio, or run the scoring self-check.

    modelzip-sidecar serve --mock uniform
    modelzip-sidecar serve --model /path/to/checkpoint [--byte-model] \
        [--bos none|prepend_per_chunk] [--context-limit N] [--device cpu] \
        [--dtype float64]
    modelzip-sidecar selfcheck --model /path --byte-model --input FILE \
        [--context N]
"""

from __future__ import annotations

import argparse
import json
import sys

from .mock_models import AdaptiveMock, UniformMock
from .server import SidecarConfig, attach_byte_tokenizer, serve

MOCKS = {"uniform": UniformMock, "adaptive0": AdaptiveMock}


def _build_backend(args):
    if args.mock:
        return attach_byte_tokenizer(MOCKS[args.mock]())
    if not args.model:
        raise SystemExit("either --mock or --model is required")
    from .hf_backend import TransformerBackend

    return TransformerBackend(
        args.model, byte_model=args.byte_model, device=args.device,
        dtype=args.dtype, bos_policy=args.bos,
    )


def _cmd_serve(args) -> int:
    backend = _build_backend(args)
    config = SidecarConfig(context_limit=args.context_limit, bos_policy=args.bos)
    return serve(sys.stdin, sys.stdout, backend, config)


def _cmd_selfcheck(args) -> int:
    from .hf_backend import TransformerBackend

    backend = TransformerBackend(
        args.model, byte_model=args.byte_model, device=args.device,
        dtype=args.dtype, bos_policy=args.bos,
    )
    data = open(args.input, "rb").read()
    if args.byte_model:
        ids = list(data)
    else:
        ids = backend.tokenize(data.decode("utf-8"))
    bpt, count = backend.mean_nll_bits(ids, args.context)
    print(json.dumps({"bpt": bpt, "n_tokens": count, "context": args.context,
                      "bos_policy": args.bos}, sort_keys=True))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="modelzip-sidecar")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve")
    p.add_argument("--mock", choices=sorted(MOCKS), default=None)
    p.add_argument("--model", default=None)
    p.add_argument("--byte-model", action="store_true")
    p.add_argument("--device", default="cpu")
    p.add_argument("--dtype", default="float64")
    p.add_argument("--bos", choices=("none", "prepend_per_chunk"), default="none")
    p.add_argument("--context-limit", type=int, default=4096)
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("selfcheck")
    p.add_argument("--model", required=True)
    p.add_argument("--byte-model", action="store_true")
    p.add_argument("--input", required=True)
    p.add_argument("--context", type=int, default=2048)
    p.add_argument("--device", default="cpu")
    p.add_argument("--dtype", default="float64")
    p.add_argument("--bos", choices=("none", "prepend_per_chunk"), default="none")
    p.set_defaults(func=_cmd_selfcheck)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
