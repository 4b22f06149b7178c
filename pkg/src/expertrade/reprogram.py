"""Time-series reprogramming: patch embedding plus multi-head cross-attention
against a bank of text prototypes (forward pass only).

All projection matrices are fixed seeded random constants.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class DegenerateConfig(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class InvalidSize(ValueError):
    pass


@dataclass(frozen=True)
class PatchConfig:
    n_vars: int = 5
    window: int = 20
    patch_len: int = 5
    stride: int = 5
    d_model: int = 64
    n_heads: int = 4
    d_llm: int = 128

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads

    @property
    def n_patches(self) -> int:
        return (self.window - self.patch_len) // self.stride + 1

    def validate(self) -> None:
        if min(self.n_vars, self.window, self.patch_len, self.stride, self.d_model, self.n_heads, self.d_llm) < 1:
            raise DegenerateConfig(f"all sizes must be positive: {self}")
        if self.patch_len > self.window:
            raise DegenerateConfig(f"patch length {self.patch_len} exceeds window {self.window}")
        if self.n_patches < 1:
            raise DegenerateConfig("configuration yields no patches")
        if self.d_model % self.n_heads:
            raise DegenerateConfig(f"d_model={self.d_model} is not divisible by n_heads={self.n_heads}")


@dataclass(frozen=True, eq=False)
class PrototypeBank:
    prototypes: np.ndarray  # (V', D)
    probe: np.ndarray  # (V', V)
    vocab_size: int

    def __post_init__(self) -> None:
        v_prime = self.prototypes.shape[0]
        if self.probe.shape != (v_prime, self.vocab_size):
            raise DimensionMismatch(f"probe shape {self.probe.shape} != ({v_prime}, {self.vocab_size})")
        if not v_prime < self.vocab_size:
            raise InvalidSize(f"V'={v_prime} must be smaller than V={self.vocab_size}")
        if not np.isfinite(self.prototypes).all():
            raise ValueError("prototype rows must be finite")

    @property
    def size(self) -> int:
        return self.prototypes.shape[0]

    @property
    def dim(self) -> int:
        return self.prototypes.shape[1]

    @classmethod
    def from_probe(cls, vocab_embedding: np.ndarray, probe: np.ndarray) -> PrototypeBank:
        vocab_embedding = np.asarray(vocab_embedding, dtype=float)
        probe = np.asarray(probe, dtype=float)
        return cls(probe @ vocab_embedding, probe, vocab_embedding.shape[0])


def build_prototype_bank(vocab_embedding: np.ndarray, v_prime: int, seed: int) -> PrototypeBank:
    """E' = probe @ E with a seeded non-negative probe whose rows sum to 1."""
    vocab_embedding = np.asarray(vocab_embedding, dtype=float)
    v = vocab_embedding.shape[0]
    if not 1 <= v_prime < v:
        raise InvalidSize(f"need 1 <= V' < V, got V'={v_prime}, V={v}")
    rng = np.random.default_rng(seed)
    probe = rng.random((v_prime, v))
    probe /= probe.sum(axis=1, keepdims=True)
    return PrototypeBank.from_probe(vocab_embedding, probe)


def fixture_vocab(seed: int, size: int = 1000, dim: int = 64) -> np.ndarray:
    """Stand-in word-embedding matrix (V x D) drawn from a seeded normal."""
    return np.random.default_rng(seed).standard_normal((size, dim)) / np.sqrt(dim)


@dataclass(frozen=True, eq=False)
class ReprogramWeights:
    patch_proj: np.ndarray  # (patch_len, d_model)
    w_q: np.ndarray  # (d_model, n_heads * d_head)
    w_k: np.ndarray  # (D, n_heads * d_head)
    w_v: np.ndarray  # (D, n_heads * d_head)
    w_out: np.ndarray  # (n_heads * d_head, d_llm)

    @classmethod
    def seeded(cls, cfg: PatchConfig, prototype_dim: int, seed: int) -> ReprogramWeights:
        cfg.validate()
        rng = np.random.default_rng(seed)
        hk = cfg.n_heads * cfg.d_head

        def glorot(fan_in: int, fan_out: int) -> np.ndarray:
            return rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / (fan_in + fan_out))

        return cls(
            patch_proj=glorot(cfg.patch_len, cfg.d_model),
            w_q=glorot(cfg.d_model, hk),
            w_k=glorot(prototype_dim, hk),
            w_v=glorot(prototype_dim, hk),
            w_out=glorot(hk, cfg.d_llm),
        )


@dataclass(frozen=True, eq=False)
class ReprogrammedEmbedding:
    output: np.ndarray  # (N, L_P, d_llm)
    attention: np.ndarray  # (heads, N, L_P, V')

    def reference(self) -> str:
        """Short content hash used to refer to the tensor from a text prompt."""
        digest = hashlib.sha256(np.ascontiguousarray(self.output).tobytes()).hexdigest()[:16]
        n, lp, d = self.output.shape
        return f"[reprogrammed-ohlcv {n}x{lp}x{d} #{digest}]"


def instance_normalize(window: np.ndarray) -> np.ndarray:
    """Per-variable zero mean / unit variance over time; constant rows become zeros."""
    x = np.asarray(window, dtype=float)
    mean = x.mean(axis=1, keepdims=True)
    std = x.std(axis=1, keepdims=True)
    centered = x - mean
    safe = np.where(std > 0, std, 1.0)
    out = centered / safe
    out[(std == 0).ravel()] = 0.0
    return out


def make_patches(normalized: np.ndarray, cfg: PatchConfig) -> np.ndarray:
    """(N, T) -> (N, L_P, patch_len)."""
    starts = [p * cfg.stride for p in range(cfg.n_patches)]
    return np.stack([normalized[:, s : s + cfg.patch_len] for s in starts], axis=1)


def patchify(window: np.ndarray, cfg: PatchConfig, seed: int, weights: ReprogramWeights | None = None) -> np.ndarray:
    """Normalize, slice and linearly embed an (N, T) window into (N, L_P, d_model)."""
    window = np.asarray(window, dtype=float)
    cfg.validate()
    if window.shape != (cfg.n_vars, cfg.window):
        raise DimensionMismatch(f"window shape {window.shape} != ({cfg.n_vars}, {cfg.window})")
    if not np.isfinite(window).all():
        raise ValueError("window must be finite")
    if weights is None:
        weights = ReprogramWeights.seeded(cfg, 1, seed)
    patches = make_patches(instance_normalize(window), cfg)
    return patches @ weights.patch_proj


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def reprogram(
    patches: np.ndarray,
    bank: PrototypeBank,
    cfg: PatchConfig,
    seed: int = 0,
    weights: ReprogramWeights | None = None,
) -> ReprogrammedEmbedding:
    """Cross-attend patches (queries) to prototypes (keys/values), all heads fused."""
    patches = np.asarray(patches, dtype=float)
    cfg.validate()
    if patches.ndim != 3 or patches.shape[2] != cfg.d_model:
        raise DimensionMismatch(f"patches shape {patches.shape} incompatible with d_model={cfg.d_model}")
    if weights is None:
        weights = ReprogramWeights.seeded(cfg, bank.dim, seed)
    if weights.w_k.shape[0] != bank.dim:
        raise DimensionMismatch(f"key projection expects D={weights.w_k.shape[0]}, bank has D={bank.dim}")
    n, lp, _ = patches.shape
    h, dk = cfg.n_heads, cfg.d_head
    q = (patches @ weights.w_q).reshape(n, lp, h, dk).transpose(2, 0, 1, 3)  # (h, n, lp, dk)
    k = (bank.prototypes @ weights.w_k).reshape(bank.size, h, dk).transpose(1, 0, 2)  # (h, V', dk)
    v = (bank.prototypes @ weights.w_v).reshape(bank.size, h, dk).transpose(1, 0, 2)
    scores = np.einsum("hnld,hvd->hnlv", q, k) / np.sqrt(dk)
    attn = _softmax(scores)
    z = np.einsum("hnlv,hvd->hnld", attn, v)  # (h, n, lp, dk)
    concat = z.transpose(1, 2, 0, 3).reshape(n, lp, h * dk)
    return ReprogrammedEmbedding(concat @ weights.w_out, attn)


class Reprogrammer:
    """Fixed weights and prototype bank bundled for repeated window encoding."""

    def __init__(self, cfg: PatchConfig, bank: PrototypeBank, seed: int):
        cfg.validate()
        self.cfg = cfg
        self.bank = bank
        self.weights = ReprogramWeights.seeded(cfg, bank.dim, seed)

    @classmethod
    def default(cls, seed: int, cfg: PatchConfig | None = None, v_prime: int = 32) -> Reprogrammer:
        from .rng import substream_seed

        cfg = cfg or PatchConfig()
        vocab = fixture_vocab(substream_seed(seed, "vocab"))
        bank = build_prototype_bank(vocab, v_prime, substream_seed(seed, "probe"))
        return cls(cfg, bank, substream_seed(seed, "reprogram"))

    def encode(self, window: np.ndarray) -> ReprogrammedEmbedding:
        patches = patchify(window, self.cfg, 0, weights=self.weights)
        return reprogram(patches, self.bank, self.cfg, weights=self.weights)


def write_embedding_csv(emb: ReprogrammedEmbedding, path: str | Path) -> None:
    """Shape header ``N,L_P,D_llm`` then one row of D_llm values per (variable, patch)."""
    n, lp, d = emb.output.shape
    lines = [f"{n},{lp},{d}"]
    for row in emb.output.reshape(n * lp, d):
        lines.append(",".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_embedding_csv(path: str | Path) -> np.ndarray:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    n, lp, d = (int(x) for x in lines[0].split(","))
    data = np.array([[float(x) for x in line.split(",")] for line in lines[1:]])
    if data.shape != (n * lp, d):
        raise DimensionMismatch(f"embedding body {data.shape} does not match header {(n, lp, d)}")
    return data.reshape(n, lp, d)
