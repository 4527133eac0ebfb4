"""Text encoders producing per-token vectors plus a leading summary vector.

Two interchangeable backends sit behind :func:`get_encoder`:

* ``mock`` — deterministic hashed token vectors for tests and desk-scale
  training.  Each token maps to a seeded pseudorandom unit vector that
  depends only on (token string, position parity, seed); the summary row
  is the renormalized mean of the token rows.  All rows have unit L2 norm.
* ``pretrained`` — adapter over a transformers masked-LM encoder; row 0 is
  the [CLS] vector and separator/special tokens are dropped from the
  content rows.

Encoder instances are read-only after construction and safe to call
concurrently.  Both towers (questions and verbalized facts) share one
encoder instance.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import EncoderBackendError, InputError, ShapeError

_PARITY_SCALE = 0.1


@dataclass
class TokenMatrix:
    """Contextual vectors for one text: row 0 is the summary vector."""

    vectors: np.ndarray  # ((n+1), d_txt) float64
    tokens: list[str]

    def __post_init__(self):
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.tokens) + 1:
            raise ShapeError(
                f"vector rows ({self.vectors.shape}) must be token count + 1 ({len(self.tokens)})"
            )
        if not np.isfinite(self.vectors).all():
            raise InputError("token matrix contains non-finite entries")

    @property
    def summary(self) -> np.ndarray:
        return self.vectors[0]

    @property
    def token_rows(self) -> np.ndarray:
        return self.vectors[1:]

    @property
    def d_txt(self) -> int:
        return self.vectors.shape[1]


class MockEncoder:
    """Deterministic hash-based encoder.

    Token vector = unit(gauss(hash(seed, token, position parity))) plus a
    small parity positional component, renormalized; summary = renormalized
    mean of token rows.  Frozen property: two calls on the same text (same
    instance or same (d_txt, seed)) give identical matrices.
    """

    name = "mock"

    def __init__(self, d_txt: int = 64, seed: int = 0):
        if d_txt < 2:
            raise InputError(f"d_txt must be >= 2, got {d_txt}")
        self.d_txt = d_txt
        self.seed = seed
        self._parity = np.stack([
            self._unit_vector(f"<pos:{parity}>") for parity in (0, 1)
        ])
        self._cache: dict[str, np.ndarray] = {}

    def _unit_vector(self, key: str) -> np.ndarray:
        digest = hashlib.blake2b(
            f"{self.seed}|{key}".encode(), digest_size=8
        ).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "little"))
        v = rng.standard_normal(self.d_txt)
        return v / np.linalg.norm(v)

    def _token_vector(self, token: str, position: int) -> np.ndarray:
        parity = position % 2
        key = f"{token}|{parity}"
        cached = self._cache.get(key)
        if cached is None:
            v = self._unit_vector(f"tok:{token}") + _PARITY_SCALE * self._parity[parity]
            cached = v / np.linalg.norm(v)
            self._cache[key] = cached
        return cached

    def encode(self, text: str) -> TokenMatrix:
        if not text or not text.strip():
            raise InputError("cannot encode empty text")
        tokens = text.split()
        rows = np.empty((len(tokens) + 1, self.d_txt))
        for i, tok in enumerate(tokens):
            rows[i + 1] = self._token_vector(tok, i)
        summary = rows[1:].mean(axis=0)
        norm = np.linalg.norm(summary)
        if norm < 1e-12:
            # token vectors cancelled exactly; fall back to a fixed direction
            summary = self._unit_vector("<empty-summary>")
            norm = 1.0
        rows[0] = summary / norm
        return TokenMatrix(rows, tokens)

    def encode_batch(self, texts: list[str]) -> list[TokenMatrix]:
        return _encode_batch(self, texts)


class PretrainedEncoder:
    """Adapter over a transformers encoder (e.g. ``bert-base-uncased``).

    Loads lazily-imported transformers/torch at construction and fails with
    EncoderBackendError when the backend cannot be set up (missing package,
    unreachable weights).  Content rows exclude all special tokens; row 0
    is the [CLS] vector.
    """

    name = "pretrained"

    def __init__(self, model_id: str = "bert-base-uncased"):
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer
        except Exception as exc:  # pragma: no cover - depends on env
            raise EncoderBackendError(f"transformers backend unavailable: {exc}") from exc
        try:
            self._tokenizer = AutoTokenizer.from_pretrained(model_id)
            self._model = AutoModel.from_pretrained(model_id)
        except Exception as exc:
            raise EncoderBackendError(f"cannot load pretrained encoder {model_id!r}: {exc}") from exc
        self._model.eval()
        self._torch = torch
        self.model_id = model_id
        self.d_txt = int(self._model.config.hidden_size)

    def encode(self, text: str) -> TokenMatrix:
        if not text or not text.strip():
            raise InputError("cannot encode empty text")
        enc = self._tokenizer(text, return_tensors="pt")
        with self._torch.no_grad():
            hidden = self._model(**enc).last_hidden_state[0].double().numpy()
        ids = enc["input_ids"][0].tolist()
        special = set(self._tokenizer.all_special_ids)
        keep = [i for i, tok_id in enumerate(ids) if tok_id not in special]
        tokens = self._tokenizer.convert_ids_to_tokens([ids[i] for i in keep])
        rows = np.vstack([hidden[:1], hidden[keep]]) if keep else hidden[:1]
        return TokenMatrix(rows, list(tokens))

    def encode_batch(self, texts: list[str]) -> list[TokenMatrix]:
        return _encode_batch(self, texts)


def _encode_batch(encoder, texts: list[str]) -> list[TokenMatrix]:
    """Elementwise encode, order preserved; element errors name the index."""
    out = []
    for i, text in enumerate(texts):
        try:
            out.append(encoder.encode(text))
        except InputError as exc:
            raise InputError(f"batch element {i}: {exc}") from exc
    return out


def get_encoder(backend: str = "mock", d_txt: int = 64, seed: int = 0,
                model_id: str = "bert-base-uncased"):
    """Construct an encoder by backend name ("mock" | "pretrained")."""
    if backend == "mock":
        return MockEncoder(d_txt=d_txt, seed=seed)
    if backend == "pretrained":
        return PretrainedEncoder(model_id=model_id)
    raise InputError(f"unknown encoder backend {backend!r}")
