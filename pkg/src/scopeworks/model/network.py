"""A small transformer token classifier built on numpy.

Forward pass: token embeddings plus learned positional embeddings, a
stack of post-norm encoder blocks (multi-head self-attention with pad
keys masked out, then a ReLU feed-forward, each wrapped in residual +
layer norm), and a linear head ``Y = W*X + b`` followed by a softmax
per token.  Every layer also implements its backward pass, so training
needs nothing beyond numpy.

All arithmetic is float64; with a fixed seed the whole forward pass is
bitwise reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, InputError
from ..tokenization import ProbTable

NEG_INF = -1e9
LOG_CLAMP = 1e-12


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


@dataclass(frozen=True)
class ClassifierConfig:
    """Architecture of the token classifier.

    ``class_order`` fixes how label values map to probability-vector
    indices; ``num_classes`` must match it, and ``n_hidden`` must be
    divisible by ``attention_heads``.
    """

    vocab_size: int
    num_classes: int
    class_order: tuple[int, ...]
    max_len: int = 128
    n_hidden: int = 64
    encoder_layers: int = 2
    attention_heads: int = 4
    ffn_width: int = 128
    dropout: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "class_order", tuple(int(c) for c in self.class_order))
        if self.num_classes != len(self.class_order):
            raise ConfigError(
                f"num_classes {self.num_classes} != len(class_order) {len(self.class_order)}"
            )
        if self.n_hidden % self.attention_heads != 0:
            raise ConfigError(
                f"n_hidden {self.n_hidden} not divisible by attention_heads "
                f"{self.attention_heads}"
            )
        for name in ("vocab_size", "num_classes", "max_len", "n_hidden",
                     "encoder_layers", "attention_heads", "ffn_width"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")

    def to_json_obj(self) -> dict:
        obj = self.__dict__.copy()
        obj["class_order"] = list(self.class_order)
        return obj

    @classmethod
    def from_json_obj(cls, obj: dict) -> "ClassifierConfig":
        obj = dict(obj)
        obj["class_order"] = tuple(obj["class_order"])
        return cls(**obj)


class Dense:
    def __init__(self, rng, n_in, n_out, init_std=0.02):
        self.W = rng.normal(0.0, init_std, size=(n_in, n_out))
        self.b = np.zeros(n_out)
        self.dW = np.zeros_like(self.W)
        self.db = np.zeros_like(self.b)
        self._x = None

    def forward(self, x):
        self._x = x
        return x @ self.W + self.b

    def backward(self, dy):
        x = self._x
        xf = x.reshape(-1, x.shape[-1])
        dyf = dy.reshape(-1, dy.shape[-1])
        self.dW[...] = xf.T @ dyf
        self.db[...] = dyf.sum(axis=0)
        return (dyf @ self.W.T).reshape(x.shape)

    def params(self):
        return {"W": self.W, "b": self.b}

    def grads(self):
        return {"W": self.dW, "b": self.db}


class LayerNorm:
    def __init__(self, dim, eps=1e-5):
        self.eps = eps
        self.gamma = np.ones(dim)
        self.beta = np.zeros(dim)
        self.dgamma = np.zeros_like(self.gamma)
        self.dbeta = np.zeros_like(self.beta)
        self._xhat = None
        self._inv = None

    def forward(self, x):
        mu = x.mean(axis=-1, keepdims=True)
        var = x.var(axis=-1, keepdims=True)
        self._inv = 1.0 / np.sqrt(var + self.eps)
        self._xhat = (x - mu) * self._inv
        return self.gamma * self._xhat + self.beta

    def backward(self, dy):
        xhat, inv = self._xhat, self._inv
        dim = xhat.shape[-1]
        self.dgamma[...] = (dy * xhat).reshape(-1, dim).sum(axis=0)
        self.dbeta[...] = dy.reshape(-1, dim).sum(axis=0)
        dxhat = dy * self.gamma
        return inv * (
            dxhat
            - dxhat.mean(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        )

    def params(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def grads(self):
        return {"gamma": self.dgamma, "beta": self.dbeta}


class Dropout:
    def __init__(self, p):
        self.p = float(p)
        self._mask = None

    def forward(self, x, train, rng):
        if not train or self.p <= 0.0:
            self._mask = None
            return x
        keep = 1.0 - self.p
        self._mask = (rng.random(x.shape) < keep) / keep
        return x * self._mask

    def backward(self, dy):
        return dy if self._mask is None else dy * self._mask


class MultiHeadSelfAttention:
    def __init__(self, rng, n_hidden, n_heads):
        self.n_heads = n_heads
        self.d_head = n_hidden // n_heads
        self.scale = float(np.sqrt(self.d_head))
        self.wq = Dense(rng, n_hidden, n_hidden)
        self.wk = Dense(rng, n_hidden, n_hidden)
        self.wv = Dense(rng, n_hidden, n_hidden)
        self.wo = Dense(rng, n_hidden, n_hidden)
        self._cache = None

    def _split(self, x):
        b, t, h = x.shape
        return x.reshape(b, t, self.n_heads, self.d_head).transpose(0, 2, 1, 3)

    def _merge(self, x):
        b, nh, t, dh = x.shape
        return x.transpose(0, 2, 1, 3).reshape(b, t, nh * dh)

    def forward(self, x, key_mask):
        q = self._split(self.wq.forward(x))
        k = self._split(self.wk.forward(x))
        v = self._split(self.wv.forward(x))
        scores = q @ k.transpose(0, 1, 3, 2) / self.scale
        # Dropping pad keys keeps pad content from ever reaching real tokens.
        scores = scores + np.where(key_mask, 0.0, NEG_INF)[:, None, None, :]
        attn = softmax(scores, axis=-1)
        ctx = attn @ v
        self._cache = (q, k, v, attn)
        return self.wo.forward(self._merge(ctx))

    def backward(self, dy):
        q, k, v, attn = self._cache
        dctx = self._split(self.wo.backward(dy))
        dattn = dctx @ v.transpose(0, 1, 3, 2)
        dv = attn.transpose(0, 1, 3, 2) @ dctx
        dscores = attn * (dattn - (dattn * attn).sum(axis=-1, keepdims=True))
        dscores /= self.scale
        dq = dscores @ k
        dk = dscores.transpose(0, 1, 3, 2) @ q
        dx = self.wq.backward(self._merge(dq))
        dx = dx + self.wk.backward(self._merge(dk))
        dx = dx + self.wv.backward(self._merge(dv))
        return dx

    def modules(self):
        return [("wq", self.wq), ("wk", self.wk), ("wv", self.wv), ("wo", self.wo)]


class FeedForward:
    def __init__(self, rng, n_hidden, n_ff):
        self.w1 = Dense(rng, n_hidden, n_ff)
        self.w2 = Dense(rng, n_ff, n_hidden)
        self._active = None

    def forward(self, x):
        h = self.w1.forward(x)
        self._active = h > 0
        return self.w2.forward(np.maximum(h, 0.0))

    def backward(self, dy):
        dh = self.w2.backward(dy) * self._active
        return self.w1.backward(dh)

    def modules(self):
        return [("w1", self.w1), ("w2", self.w2)]


class EncoderBlock:
    def __init__(self, rng, n_hidden, n_heads, n_ff, dropout):
        self.attn = MultiHeadSelfAttention(rng, n_hidden, n_heads)
        self.drop1 = Dropout(dropout)
        self.ln1 = LayerNorm(n_hidden)
        self.ffn = FeedForward(rng, n_hidden, n_ff)
        self.drop2 = Dropout(dropout)
        self.ln2 = LayerNorm(n_hidden)

    def forward(self, x, key_mask, train, rng):
        a = self.drop1.forward(self.attn.forward(x, key_mask), train, rng)
        x = self.ln1.forward(x + a)
        f = self.drop2.forward(self.ffn.forward(x), train, rng)
        return self.ln2.forward(x + f)

    def backward(self, dy):
        d = self.ln2.backward(dy)
        df = self.ffn.backward(self.drop2.backward(d))
        d = d + df
        d2 = self.ln1.backward(d)
        da = self.attn.backward(self.drop1.backward(d2))
        return d2 + da

    def modules(self):
        out = [(f"attn.{n}", m) for n, m in self.attn.modules()]
        out.append(("ln1", self.ln1))
        out.extend((f"ffn.{n}", m) for n, m in self.ffn.modules())
        out.append(("ln2", self.ln2))
        return out


class TokenClassifier:
    """Transformer encoder plus linear head over a fixed class order."""

    def __init__(self, config: ClassifierConfig, seed: int = 0):
        self.config = config
        rng = np.random.default_rng(seed)
        self.tok_emb = rng.normal(0.0, 0.02, size=(config.vocab_size, config.n_hidden))
        self.pos_emb = rng.normal(0.0, 0.02, size=(config.max_len, config.n_hidden))
        self.d_tok_emb = np.zeros_like(self.tok_emb)
        self.d_pos_emb = np.zeros_like(self.pos_emb)
        self.emb_drop = Dropout(config.dropout)
        self.blocks = [
            EncoderBlock(rng, config.n_hidden, config.attention_heads,
                         config.ffn_width, config.dropout)
            for _ in range(config.encoder_layers)
        ]
        self.head = Dense(rng, config.n_hidden, config.num_classes)
        self._ids = None

    # -- forward / backward -------------------------------------------------

    def _check_inputs(self, ids, pad_mask):
        if ids.shape != pad_mask.shape or ids.ndim != 2:
            raise InputError(
                f"token ids {ids.shape} and pad mask {pad_mask.shape} must both be "
                f"(batch, {self.config.max_len})"
            )
        if ids.shape[1] != self.config.max_len:
            raise InputError(
                f"sequence length {ids.shape[1]} != model max_len {self.config.max_len}"
            )
        if ids.size and int(ids.max()) >= self.config.vocab_size:
            raise InputError(
                f"token id {int(ids.max())} >= vocab_size {self.config.vocab_size}"
            )
        if ids.size and int(ids.min()) < 0:
            raise InputError("negative token id")

    def encode(self, ids, pad_mask, train=False, rng=None):
        """Per-token representations X, shape (batch, max_len, n_hidden)."""
        ids = np.asarray(ids, dtype=np.int64)
        pad_mask = np.asarray(pad_mask, dtype=bool)
        self._check_inputs(ids, pad_mask)
        self._ids = ids
        x = self.tok_emb[ids] + self.pos_emb[None, :]
        x = self.emb_drop.forward(x, train, rng)
        for block in self.blocks:
            x = block.forward(x, pad_mask, train, rng)
        return x

    def forward_batch(self, ids, pad_mask, train=False, rng=None):
        """Softmax probabilities, shape (batch, max_len, num_classes)."""
        x = self.encode(ids, pad_mask, train=train, rng=rng)
        return softmax(self.head.forward(x), axis=-1)

    def backward_batch(self, dlogits):
        dx = self.head.backward(dlogits)
        for block in reversed(self.blocks):
            dx = block.backward(dx)
        dx = self.emb_drop.backward(dx)
        self.d_tok_emb[...] = 0.0
        np.add.at(self.d_tok_emb, self._ids.reshape(-1), dx.reshape(-1, dx.shape[-1]))
        self.d_pos_emb[...] = dx.sum(axis=0)

    def forward(self, token_ids, pad_mask) -> ProbTable:
        """Probability table for a single instance (evaluation mode)."""
        probs = self.forward_batch(
            np.asarray(token_ids, dtype=np.int64)[None, :],
            np.asarray(pad_mask, dtype=bool)[None, :],
        )
        return ProbTable(probs[0], self.config.class_order)

    def predict_probs(self, instances, batch_size: int = 64) -> list[ProbTable]:
        """Probability tables for tokenized instances, in input order."""
        out = []
        for lo in range(0, len(instances), batch_size):
            chunk = instances[lo:lo + batch_size]
            ids = np.stack([ti.token_ids for ti in chunk])
            mask = np.stack([ti.pad_mask for ti in chunk])
            probs = self.forward_batch(ids, mask)
            out.extend(ProbTable(p, self.config.class_order) for p in probs)
        return out

    # -- parameter access ----------------------------------------------------

    def _modules(self):
        mods = []
        for i, block in enumerate(self.blocks):
            mods.extend((f"blocks.{i}.{name}", m) for name, m in block.modules())
        mods.append(("head", self.head))
        return mods

    def parameters(self) -> dict[str, np.ndarray]:
        """Live parameter arrays by name (mutating them updates the model)."""
        out = {"tok_emb": self.tok_emb, "pos_emb": self.pos_emb}
        for prefix, mod in self._modules():
            for name, arr in mod.params().items():
                out[f"{prefix}.{name}"] = arr
        return out

    def gradients(self) -> dict[str, np.ndarray]:
        out = {"tok_emb": self.d_tok_emb, "pos_emb": self.d_pos_emb}
        for prefix, mod in self._modules():
            for name, arr in mod.grads().items():
                out[f"{prefix}.{name}"] = arr
        return out

    def get_state(self) -> dict[str, np.ndarray]:
        return {name: arr.copy() for name, arr in self.parameters().items()}

    def set_state(self, state: dict) -> None:
        params = self.parameters()
        missing = set(params) - set(state)
        if missing:
            raise InputError(f"state is missing parameters: {sorted(missing)}")
        for name, arr in params.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != arr.shape:
                raise InputError(
                    f"parameter {name!r}: shape {value.shape} != expected {arr.shape}"
                )
            arr[...] = value


# ---------------------------------------------------------------------------
# Weighted categorical cross entropy
# ---------------------------------------------------------------------------

def labels_to_indices(labels, class_order) -> np.ndarray:
    """Map label values onto probability-vector indices."""
    labels = np.asarray(labels, dtype=np.int64)
    lookup = {int(c): i for i, c in enumerate(class_order)}
    bad = sorted(set(int(v) for v in labels.ravel()) - set(lookup))
    if bad:
        raise InputError(f"labels {bad} outside class order {list(class_order)}")
    idx = np.vectorize(lookup.__getitem__, otypes=[np.int64])(labels) if labels.size else labels
    return idx.astype(np.int64)


def ce_loss_and_dlogits(probs, label_idx, weights, mask):
    """Weighted cross entropy over selected positions, plus d(loss)/d(logits).

    A position contributes only when its pad mask is set and its label's
    weight is positive; everything else is skipped outright, never
    multiplied by zero, so perturbing skipped rows cannot move the loss.
    The sum is normalized by the applied weights, keeping the scale
    independent of the pad ratio.
    """
    probs = np.asarray(probs, dtype=np.float64)
    label_idx = np.asarray(label_idx, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if np.any(weights < 0):
        raise InputError("class weights must be nonnegative")

    applied = np.where(mask, weights[label_idx], 0.0)
    selected = applied > 0.0
    denom = float(applied[selected].sum())
    dlogits = np.zeros_like(probs)
    if denom == 0.0:
        return 0.0, dlogits

    gold = np.take_along_axis(probs, label_idx[..., None], axis=-1)[..., 0]
    losses = -np.log(np.maximum(gold[selected], LOG_CLAMP))
    loss = float((applied[selected] * losses).sum() / denom)

    scale = np.where(selected, applied / denom, 0.0)
    dlogits[selected] = probs[selected]
    np.put_along_axis(
        dlogits, label_idx[..., None],
        np.take_along_axis(dlogits, label_idx[..., None], axis=-1) - selected[..., None],
        axis=-1,
    )
    dlogits *= scale[..., None]
    return loss, dlogits


def weighted_ce_loss(table: ProbTable, token_labels, class_weights, pad_mask) -> float:
    """Weighted cross entropy of one instance's probability table."""
    if len(class_weights) != len(table.class_order):
        raise InputError(
            f"{len(class_weights)} class weights for {len(table.class_order)} classes"
        )
    label_idx = labels_to_indices(token_labels, table.class_order)
    loss, _ = ce_loss_and_dlogits(table.probs, label_idx, class_weights, pad_mask)
    return loss
