"""Hashed bag-of-ngrams text encoder.

Lowercased whitespace unigrams and adjacent bigrams are counted into a
fixed number of hash buckets (FNV-1a 64, fixed offset basis), then a
two-layer tanh MLP produces a pre-normalization embedding.  The
classifier head branches off that embedding; the contrastive losses see
its unit-normalized form.
"""

from __future__ import annotations

import base64
import binascii
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError, DataError
from .hashing import FNV64_OFFSET, fnv1a64

CHECKPOINT_FORMAT = "fewtext-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class FeatureVector:
    dim: int
    values: np.ndarray  # float64 counts, shape (dim,)


def featurize(text: str, features: int, max_tokens: int | None = None) -> FeatureVector:
    """Count hashed unigram and bigram buckets for one text.

    ``max_tokens`` truncates the token sequence before hashing.  The
    empty text maps to the all-zero vector.  Bucketing is total: any
    string featurizes.
    """
    if features < 2:
        raise ContractError(f"features must be >= 2, got {features}")
    values = np.zeros(features, dtype=np.float64)
    tokens = text.lower().split()
    if max_tokens is not None:
        tokens = tokens[:max_tokens]
    for tok in tokens:
        values[fnv1a64(tok) % features] += 1.0
    for a, b in zip(tokens, tokens[1:]):
        # Tokens never contain spaces, so "a b" cannot collide with a unigram.
        values[fnv1a64(a + " " + b) % features] += 1.0
    return FeatureVector(dim=features, values=values)


@dataclass
class EncoderParams:
    """All trainable tensors plus the dims that fix their shapes."""

    features: int
    hidden: int
    embedding_dim: int
    classes: int
    w1: Tensor  # (hidden, features)
    b1: Tensor  # (hidden,)
    w2: Tensor  # (embedding_dim, hidden)
    b2: Tensor  # (embedding_dim,)
    wc: Tensor  # (classes, embedding_dim)
    bc: Tensor  # (classes,)
    max_length: int | None = None
    label_names: tuple[str, ...] | None = None

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return [
            ("w1", self.w1),
            ("b1", self.b1),
            ("w2", self.w2),
            ("b2", self.b2),
            ("wc", self.wc),
            ("bc", self.bc),
        ]

    def zero_grads(self) -> None:
        for _, t in self.named_parameters():
            t.zero_grad_()

    def copy(self) -> "EncoderParams":
        dup = {name: Tensor(t.data.copy(), requires_grad=True) for name, t in self.named_parameters()}
        return EncoderParams(
            features=self.features,
            hidden=self.hidden,
            embedding_dim=self.embedding_dim,
            classes=self.classes,
            max_length=self.max_length,
            label_names=self.label_names,
            **dup,
        )


def _xavier(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def init_params(
    seed: int,
    features: int = 4096,
    hidden: int = 128,
    embedding_dim: int = 32,
    classes: int = 2,
    max_length: int | None = None,
    label_names: tuple[str, ...] | None = None,
) -> EncoderParams:
    """Xavier-uniform weights, zero biases, deterministic per seed."""
    for name, v in (("features", features), ("hidden", hidden), ("embedding_dim", embedding_dim)):
        if v < 2:
            raise ContractError(f"{name} must be >= 2, got {v}")
    if classes < 2:
        raise ContractError(f"classes must be >= 2, got {classes}")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed % 2**64, 0x1B17])))
    return EncoderParams(
        features=features,
        hidden=hidden,
        embedding_dim=embedding_dim,
        classes=classes,
        w1=Tensor(_xavier(rng, hidden, features), requires_grad=True),
        b1=Tensor(np.zeros(hidden), requires_grad=True),
        w2=Tensor(_xavier(rng, embedding_dim, hidden), requires_grad=True),
        b2=Tensor(np.zeros(embedding_dim), requires_grad=True),
        wc=Tensor(_xavier(rng, classes, embedding_dim), requires_grad=True),
        bc=Tensor(np.zeros(classes), requires_grad=True),
        max_length=max_length,
        label_names=label_names,
    )


def encode(params: EncoderParams, fv: FeatureVector) -> tuple[Tensor, Tensor]:
    """Map a feature vector to (unit embedding z, class logits).

    Logits branch off the pre-normalization embedding.  Normalization
    uses the NORM_EPS floor, so even an all-zero input encodes without
    error.
    """
    if fv.dim != params.features:
        raise ContractError(f"feature dim {fv.dim} does not match encoder ({params.features})")
    x = Tensor(fv.values)
    h = ad.tanh(ad.matmul(params.w1, x) + params.b1)
    emb = ad.matmul(params.w2, h) + params.b2
    logits = ad.matmul(params.wc, emb) + params.bc
    z = ad.l2_normalize(emb, floor=ad.NORM_EPS)
    return z, logits


def featurize_example(params: EncoderParams, text: str) -> FeatureVector:
    """Featurize with the encoder's own dims and truncation setting."""
    return featurize(text, params.features, params.max_length)


# -- checkpoints ---------------------------------------------------------------


def _encode_array(a: np.ndarray) -> dict:
    return {
        "shape": list(a.shape),
        "data": base64.b64encode(np.ascontiguousarray(a, dtype="<f8").tobytes()).decode("ascii"),
    }


def _decode_array(spec: dict) -> np.ndarray:
    raw = base64.b64decode(spec["data"])
    return np.frombuffer(raw, dtype="<f8").reshape(spec["shape"]).astype(np.float64)


def save_checkpoint(params: EncoderParams, path: str | Path) -> None:
    """Versioned JSON container; float64 arrays round-trip bitwise."""
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "hash": {"name": "fnv1a64", "offset_basis": FNV64_OFFSET},
        "dims": {
            "features": params.features,
            "hidden": params.hidden,
            "embedding_dim": params.embedding_dim,
            "classes": params.classes,
        },
        "max_length": params.max_length,
        "label_names": list(params.label_names) if params.label_names else None,
        "params": {name: _encode_array(t.data) for name, t in params.named_parameters()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n")


def load_checkpoint(path: str | Path) -> EncoderParams:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid checkpoint JSON ({exc.msg})") from None
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise DataError(f"{path}: not a {CHECKPOINT_FORMAT} file")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {doc.get('version')!r}")
    try:
        dims = doc["dims"]
        arrays = {name: _decode_array(spec) for name, spec in doc["params"].items()}
        expected = {
            "w1": (dims["hidden"], dims["features"]),
            "b1": (dims["hidden"],),
            "w2": (dims["embedding_dim"], dims["hidden"]),
            "b2": (dims["embedding_dim"],),
            "wc": (dims["classes"], dims["embedding_dim"]),
            "bc": (dims["classes"],),
        }
    except (KeyError, TypeError, ValueError, binascii.Error) as exc:
        raise DataError(f"{path}: corrupt checkpoint payload ({exc})") from None
    for name, shape in expected.items():
        if name not in arrays:
            raise DataError(f"{path}: checkpoint is missing array {name!r}")
        if tuple(arrays[name].shape) != shape:
            raise DataError(f"{path}: array {name!r} has shape {arrays[name].shape}, expected {shape}")
    label_names = doc.get("label_names")
    return EncoderParams(
        features=dims["features"],
        hidden=dims["hidden"],
        embedding_dim=dims["embedding_dim"],
        classes=dims["classes"],
        max_length=doc.get("max_length"),
        label_names=tuple(label_names) if label_names else None,
        **{name: Tensor(arr, requires_grad=True) for name, arr in arrays.items()},
    )
