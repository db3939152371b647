import io
import json
import struct
import zipfile
from dataclasses import asdict, dataclass
from typing import BinaryIO, Dict, List, NamedTuple, Tuple

import numpy as np

from attention import conf
from attention.code_model import label_vocabulary
from attention.exceptions import ConfigurationError, DataError
from attention.reward import PATTERN_CLASSES, POSITION_CLASSES

MODEL_MAGIC = b"GZAT"
MODEL_FORMAT_VERSION = 1
MASKED_SCORE = -1e9


@dataclass(frozen=True)
class ModelConfig:
    embed_dim: int = 64
    attention_heads: int = 4
    attention_layers: int = 1
    ffn_dim: int = 128
    max_seq_len: int = 256
    vocab_size: int = 8
    pattern_classes: int = PATTERN_CLASSES
    position_classes: int = POSITION_CLASSES
    init_scale: float = 0.1
    seed: int = 42

    def __post_init__(self):
        if self.embed_dim % self.attention_heads:
            raise ConfigurationError(f"embed_dim {self.embed_dim} is not divisible by attention_heads {self.attention_heads}")
        if (self.pattern_classes, self.position_classes) != (PATTERN_CLASSES, POSITION_CLASSES):
            raise ConfigurationError(f"class counts are fixed at {PATTERN_CLASSES}/{POSITION_CLASSES}")
        if min(self.attention_layers, self.max_seq_len, self.ffn_dim, self.vocab_size) < 1:
            raise ConfigurationError("layer count, sequence length, ffn width and vocabulary must be positive")

    @classmethod
    def from_settings(cls, **overrides) -> "ModelConfig":
        values = dict(embed_dim=conf.get('EMBED_DIM'), attention_heads=conf.get('ATTENTION_HEADS'),
                      attention_layers=conf.get('ATTENTION_LAYERS'), ffn_dim=conf.get('FFN_DIM'),
                      max_seq_len=conf.get('MAX_SEQ_LEN'), vocab_size=len(label_vocabulary()) + 1,
                      init_scale=conf.get('INIT_SCALE'), seed=conf.get('SEED'))
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


class LayerCache(NamedTuple):
    x_in: np.ndarray
    q: np.ndarray
    k: np.ndarray
    v: np.ndarray
    attn: np.ndarray
    ctx: np.ndarray
    x_mid: np.ndarray
    hidden: np.ndarray


class ForwardCache(NamedTuple):
    ids: np.ndarray
    output: np.ndarray
    layers: List[LayerCache]
    pattern_logits: np.ndarray
    position_logits: np.ndarray


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax_backward(probs: np.ndarray, d_probs: np.ndarray) -> np.ndarray:
    return probs * (d_probs - (d_probs * probs).sum(axis=-1, keepdims=True))


class MiniLabeler:
    """Label embedding + learned positions, residual self-attention/tanh blocks, and two softmax heads."""

    def __init__(self, config: ModelConfig, params: Dict[str, np.ndarray] = None):
        self.config = config
        self.params = params if params is not None else self._init_params()

    def parameter_shapes(self) -> List[Tuple[str, Tuple[int, ...], bool]]:
        """(name, shape, is_bias) in creation order."""
        c = self.config
        d = c.embed_dim
        shapes = [("embed", (c.vocab_size, d), False), ("pos", (c.max_seq_len, d), False)]
        for l in range(c.attention_layers):
            shapes += [(f"attn{l}.{n}", (d, d), False) for n in "qkvo"]
            shapes += [(f"attn{l}.o_bias", (d,), True),
                       (f"ffn{l}.w1", (d, c.ffn_dim), False), (f"ffn{l}.b1", (c.ffn_dim,), True),
                       (f"ffn{l}.w2", (c.ffn_dim, d), False), (f"ffn{l}.b2", (d,), True)]
        shapes += [("pattern.w", (d, c.pattern_classes), False), ("pattern.b", (c.pattern_classes,), True),
                   ("position.w", (d, c.position_classes), False), ("position.b", (c.position_classes,), True)]
        return shapes

    def _init_params(self) -> Dict[str, np.ndarray]:
        rng = np.random.default_rng([self.config.seed, 0])
        return {name: np.zeros(shape) if is_bias else rng.normal(0.0, self.config.init_scale, size=shape)
                for name, shape, is_bias in self.parameter_shapes()}

    def zero_heads(self):
        for name in ("pattern.w", "pattern.b", "position.w", "position.b"):
            self.params[name][...] = 0.0

    def copy(self) -> "MiniLabeler":
        return MiniLabeler(self.config, {name: value.copy() for name, value in self.params.items()})

    def _split(self, x: np.ndarray) -> np.ndarray:
        b, t, _ = x.shape
        h = self.config.attention_heads
        return x.reshape(b, t, h, -1).transpose(0, 2, 1, 3)

    @staticmethod
    def _merge(x: np.ndarray) -> np.ndarray:
        b, h, t, dh = x.shape
        return x.transpose(0, 2, 1, 3).reshape(b, t, h * dh)

    def forward(self, ids: np.ndarray, mask: np.ndarray) -> Tuple[np.ndarray, np.ndarray, ForwardCache]:
        """Per-token class probabilities for the pattern and position heads."""
        if ids.ndim != 2 or ids.shape != mask.shape:
            raise DataError(f"ids {ids.shape} and mask {mask.shape} must be matching 2-d arrays")
        if ids.shape[1] > self.config.max_seq_len:
            raise DataError(f"sequence length {ids.shape[1]} exceeds max_seq_len {self.config.max_seq_len}")
        if ids.size and (ids.min() < 0 or ids.max() >= self.config.vocab_size):
            raise DataError("input ids fall outside the label vocabulary")
        p = self.params
        scale = 1.0 / np.sqrt(self.config.embed_dim // self.config.attention_heads)
        key_bias = np.where(mask, 0.0, MASKED_SCORE)[:, None, None, :]

        x = p["embed"][ids] + p["pos"][:ids.shape[1]][None]
        layers = []
        for l in range(self.config.attention_layers):
            q, k, v = (self._split(x @ p[f"attn{l}.{n}"]) for n in "qkv")
            attn = softmax(q @ k.transpose(0, 1, 3, 2) * scale + key_bias)
            ctx = self._merge(attn @ v)
            x_mid = x + ctx @ p[f"attn{l}.o"] + p[f"attn{l}.o_bias"]
            hidden_pre = x_mid @ p[f"ffn{l}.w1"] + p[f"ffn{l}.b1"]
            hidden = np.tanh(hidden_pre)
            layers.append(LayerCache(x, q, k, v, attn, ctx, x_mid, hidden))
            x = x_mid + hidden @ p[f"ffn{l}.w2"] + p[f"ffn{l}.b2"]

        pattern_logits = x @ p["pattern.w"] + p["pattern.b"]
        position_logits = x @ p["position.w"] + p["position.b"]
        cache = ForwardCache(ids, x, layers, pattern_logits, position_logits)
        return softmax(pattern_logits), softmax(position_logits), cache

    def backward(self, cache: ForwardCache, d_pattern_logits: np.ndarray, d_position_logits: np.ndarray) -> Dict[str, np.ndarray]:
        p = self.params
        g = {name: np.zeros_like(value) for name, value in p.items()}
        scale = 1.0 / np.sqrt(self.config.embed_dim // self.config.attention_heads)

        x = cache.output
        for head, dz in (("pattern", d_pattern_logits), ("position", d_position_logits)):
            g[f"{head}.w"] = np.einsum("btd,btc->dc", x, dz)
            g[f"{head}.b"] = dz.sum(axis=(0, 1))
        dx = d_pattern_logits @ p["pattern.w"].T + d_position_logits @ p["position.w"].T

        for l in reversed(range(self.config.attention_layers)):
            lc = cache.layers[l]
            g[f"ffn{l}.w2"] = np.einsum("btf,btd->fd", lc.hidden, dx)
            g[f"ffn{l}.b2"] = dx.sum(axis=(0, 1))
            d_hidden = (dx @ p[f"ffn{l}.w2"].T) * (1.0 - lc.hidden ** 2)
            g[f"ffn{l}.w1"] = np.einsum("btd,btf->df", lc.x_mid, d_hidden)
            g[f"ffn{l}.b1"] = d_hidden.sum(axis=(0, 1))
            d_mid = dx + d_hidden @ p[f"ffn{l}.w1"].T

            g[f"attn{l}.o"] = np.einsum("bti,btj->ij", lc.ctx, d_mid)
            g[f"attn{l}.o_bias"] = d_mid.sum(axis=(0, 1))
            d_ctx = self._split(d_mid @ p[f"attn{l}.o"].T)
            d_attn = d_ctx @ lc.v.transpose(0, 1, 3, 2)
            d_v = lc.attn.transpose(0, 1, 3, 2) @ d_ctx
            d_scores = softmax_backward(lc.attn, d_attn)
            d_q = (d_scores @ lc.k) * scale
            d_k = (d_scores.transpose(0, 1, 3, 2) @ lc.q) * scale

            dx = d_mid
            for n, d_part in (("q", d_q), ("k", d_k), ("v", d_v)):
                d_part = self._merge(d_part)
                g[f"attn{l}.{n}"] = np.einsum("bti,btj->ij", lc.x_in, d_part)
                dx = dx + d_part @ p[f"attn{l}.{n}"].T

        np.add.at(g["embed"], cache.ids, dx)
        g["pos"][:cache.ids.shape[1]] = dx.sum(axis=0)
        return g


def save_model(model: MiniLabeler, stream: BinaryIO):
    header = json.dumps(asdict(model.config), sort_keys=True).encode("utf-8")
    payload = io.BytesIO()
    # fixed member timestamps keep the file byte-identical across runs
    with zipfile.ZipFile(payload, "w", zipfile.ZIP_STORED) as archive:
        for name in sorted(model.params):
            with archive.open(zipfile.ZipInfo(f"{name}.npy", date_time=(1980, 1, 1, 0, 0, 0)), "w") as member:
                np.lib.format.write_array(member, np.ascontiguousarray(model.params[name]), allow_pickle=False)
    stream.write(MODEL_MAGIC + struct.pack("<II", MODEL_FORMAT_VERSION, len(header)) + header + payload.getvalue())


def load_model(stream: BinaryIO) -> MiniLabeler:
    blob = stream.read()
    if blob[:4] != MODEL_MAGIC or len(blob) < 12:
        raise DataError("not a model file (bad magic)")
    version, header_len = struct.unpack("<II", blob[4:12])
    if version != MODEL_FORMAT_VERSION:
        raise DataError(f"unsupported model format version {version}")
    try:
        config = ModelConfig(**json.loads(blob[12:12 + header_len].decode("utf-8")))
        with np.load(io.BytesIO(blob[12 + header_len:])) as archive:
            params = {name: archive[name].astype(np.float64) for name in archive.files}
    except (ValueError, TypeError, KeyError, EOFError, OSError, zipfile.BadZipFile, ConfigurationError) as exc:
        raise DataError(f"corrupt model file: {exc}") from exc
    model = MiniLabeler(config, params)
    expected = {name: shape for name, shape, _ in model.parameter_shapes()}
    if {name: value.shape for name, value in params.items()} != expected:
        raise DataError("model parameters do not match the embedded configuration")
    return model
