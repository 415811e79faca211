"""Deliberately deviant sidecar servers for client-behavior tests.

Run as a script:  python tests/fake_sidecars.py <variant>
"""

import sys

from modelzip.mock_sidecar import _Server
from modelzip.protocol import canonical_dumps


class NullByteMapServer(_Server):
    """Advertises no reserved byte tokens (byte-domain work must be refused)."""

    def session_info(self):
        info = super().session_info()
        info["byte_token_map"] = None
        info["model_name"] = "fake-nullmap"
        return info


class LossyTokenizerServer(_Server):
    """Breaks detokenize(tokenize(text)) == text by lowercasing."""

    def handle_line(self, line):
        response, keep = super().handle_line(line)
        if response.get("type") == "detokenize" and "text" in response:
            response = dict(response, text=response["text"].lower())
        return response, keep


VARIANTS = {
    "nullmap": NullByteMapServer,
    "lossy": LossyTokenizerServer,
}


def main() -> int:
    variant = sys.argv[1] if len(sys.argv) > 1 else "nullmap"
    server = VARIANTS[variant]("uniform")
    for line in sys.stdin:
        if not line.strip():
            continue
        response, keep_running = server.handle_line(line)
        sys.stdout.write(canonical_dumps(response) + "\n")
        sys.stdout.flush()
        if not keep_running:
            return 0 if response.get("type") == "bye" else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
