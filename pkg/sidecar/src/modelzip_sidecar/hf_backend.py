"""Causal-transformer backend: teacher-forced scoring behind the protocol.

Loads any local/hub causal LM checkpoint.  Scoring runs the whole chunk in
one forward pass; with bos_policy "none" the first position is scored
against the uniform distribution (a causal LM has no conditional for it),
with "prepend_per_chunk" every position is scored after a BOS token.
Determinism: eval mode, fixed dtype, no sampling, single forward pass.
"""

from __future__ import annotations

import math

__all__ = ["TransformerBackend"]

_BYTE_TOKEN_FORMS = ("<0x{:02X}>", "<0x{:02x}>")


class TransformerBackend:
    def __init__(self, model_path: str, byte_model: bool = False, device: str = "cpu",
                 dtype: str = "float64", bos_policy: str = "none"):
        import torch
        from transformers import AutoModelForCausalLM

        self._torch = torch
        torch.use_deterministic_algorithms(True)
        self.dtype = getattr(torch, dtype)
        self.model = AutoModelForCausalLM.from_pretrained(model_path,
                                                          torch_dtype=self.dtype)
        self.model.to(device)
        self.model.eval()
        self.device = device
        self.vocab_size = int(self.model.config.vocab_size)
        self.name = f"hf:{model_path}"
        self.byte_model = byte_model
        self.bos_policy = bos_policy

        if byte_model:
            if self.vocab_size < 256:
                raise ValueError("byte models need at least 256 vocabulary entries")
            self.byte_map = list(range(256))
            self.tokenizer = None
            self.bos_id = getattr(self.model.config, "bos_token_id", None)
        else:
            from transformers import AutoTokenizer

            self.tokenizer = AutoTokenizer.from_pretrained(model_path)
            self.byte_map = self._detect_byte_tokens()
            self.bos_id = self.tokenizer.bos_token_id
        if bos_policy == "prepend_per_chunk" and self.bos_id is None:
            raise ValueError("model has no BOS token; use bos_policy none")

    def _detect_byte_tokens(self):
        """Reserved byte tokens, by the <0xNN> vocabulary convention."""
        vocab = self.tokenizer.get_vocab()
        mapping = []
        for value in range(256):
            token_id = None
            for form in _BYTE_TOKEN_FORMS:
                token_id = vocab.get(form.format(value))
                if token_id is not None:
                    break
            if token_id is None:
                return None
            mapping.append(int(token_id))
        return mapping

    def tokenize(self, text: str) -> list[int]:
        if self.byte_model:
            return list(text.encode("utf-8"))
        return self.tokenizer.encode(text, add_special_tokens=False)

    def detokenize(self, ids: list[int]) -> str:
        if self.byte_model:
            return bytes(ids).decode("utf-8")
        return self.tokenizer.decode(ids)

    def _log_probs(self, ids: list[int]):
        """(k, vocab) log2 probabilities, row j conditioning on ids[:j]."""
        torch = self._torch
        with torch.no_grad():
            if self.bos_policy == "prepend_per_chunk":
                inputs = torch.tensor([[self.bos_id] + ids], device=self.device)
                logits = self.model(inputs).logits[0].to(self.dtype)
                rows = torch.log_softmax(logits, dim=-1)[: len(ids)]
            else:
                uniform = torch.full((1, self.vocab_size), -math.log(self.vocab_size),
                                     dtype=self.dtype, device=self.device)
                if len(ids) == 1:
                    rows = uniform
                else:
                    inputs = torch.tensor([ids], device=self.device)
                    logits = self.model(inputs).logits[0].to(self.dtype)
                    rows = torch.cat(
                        [uniform, torch.log_softmax(logits, dim=-1)[: len(ids) - 1]]
                    )
        return rows / math.log(2)

    def score_ids(self, ids: list[int]) -> list[float]:
        rows = self._log_probs(ids)
        idx = self._torch.tensor(ids, device=self.device)
        picked = rows.gather(1, idx.unsqueeze(1)).squeeze(1)
        return [float(x) for x in picked]

    def pmf_rows(self, ids: list[int], freq_bits: int) -> list[list[int]]:
        from .quantize import quantize_probs

        rows = self._log_probs(ids)
        probs = self._torch.exp2(rows)
        return [quantize_probs([float(p) for p in row], freq_bits) for row in probs]

    def mean_nll_bits(self, ids: list[int], chunk_size: int) -> tuple[float, int]:
        """Self-check: chunked mean NLL in bits per token, via cross entropy."""
        torch = self._torch
        total_nats = 0.0
        count = 0
        for start in range(0, len(ids), chunk_size):
            piece = ids[start: start + chunk_size]
            rows = self._log_probs(piece) * math.log(2)  # back to nats
            targets = torch.tensor(piece, device=self.device)
            nll = torch.nn.functional.nll_loss(rows, targets, reduction="sum")
            total_nats += float(nll)
            count += len(piece)
        return total_nats / count / math.log(2), count
