"""Alternating training loop for the two modality networks and the codes.

One outer iteration does three things, in order:

1. image pass: the training points are visited once in a seeded random
   permutation, mini-batch by mini-batch.  Each batch is forwarded, its
   columns overwrite the cached output matrix F, the loss gradient at those
   columns is chained through the network, and one SGD step updates the
   image net.  Columns outside the batch keep their cached (stale) values
   until their point is next sampled.
2. text pass: the mirror procedure for the text net and cache G, with an
   independently drawn permutation.
3. code update: B <- sign(gamma * (F + G)), the exact minimizer of the loss
   over the binary codes with both networks fixed.

Gradients are raw sums (no 1/n or 1/batch normalization); the learning rate
is the only scale knob.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .mathops import NumericError, as_matrix, sign_matrix
from .net import FeedForwardNet, backward, forward, net_from_dict, net_to_dict, sgd_step
from .objective import (
    Hyperparams,
    grad_image_outputs,
    grad_text_outputs,
    loss_terms,
    optimal_codes,
)

CHECKPOINT_FORMAT = "crossmodal-hash-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class IterationStats:
    """Loss breakdown logged once per outer iteration (iteration 0 = before training)."""

    iteration: int
    total: float
    likelihood: float
    quantization: float
    balance: float
    seconds: float


@dataclass
class TrainState:
    """Everything the optimizer owns: both nets, caches, codes, knobs, rng."""

    net_image: FeedForwardNet
    net_text: FeedForwardNet
    image_outputs: np.ndarray   # F, c x n
    text_outputs: np.ndarray    # G, c x n
    codes: np.ndarray           # B, c x n int8 in {-1,+1}
    hyper: Hyperparams
    rng: np.random.Generator


def _modality_pass(net, features, cache, grad_fn, hyper, rng):
    n = features.shape[1]
    order = rng.permutation(n)
    for start in range(0, n, hyper.batch_size):
        batch = order[start : start + hyper.batch_size]
        outputs, trace = forward(net, features[:, batch])
        cache[:, batch] = outputs
        output_grad = grad_fn(batch)
        sgd_step(net, backward(net, trace, output_grad), hyper.lr)


def train(
    image_features,
    text_features,
    similarity,
    net_image: FeedForwardNet,
    net_text: FeedForwardNet,
    hyper: Hyperparams,
    rng: np.random.Generator,
    on_iteration: Callable[[IterationStats], None] | None = None,
) -> TrainState:
    """Run ``hyper.outer_iters`` alternating rounds and return the final state.

    ``similarity`` must be the square n x n binary matrix over the paired
    training points.  ``on_iteration`` (when given) receives an
    :class:`IterationStats` for iteration 0 (the pre-training loss) and for
    every completed outer iteration.  A non-finite loss aborts with
    :class:`NumericError` naming the iteration.
    """
    X = as_matrix(image_features, "image features")
    Y = as_matrix(text_features, "text features")
    n = X.shape[1]
    if Y.shape[1] != n:
        raise ValueError(f"image/text column counts differ: {n} vs {Y.shape[1]}")
    S = np.asarray(similarity, dtype=np.float64)
    if S.shape != (n, n):
        raise ValueError(f"similarity must be {n}x{n}, got {S.shape}")
    if net_image.output_dim != hyper.code_length or net_text.output_dim != hyper.code_length:
        raise ValueError(
            f"network output dims ({net_image.output_dim}, {net_text.output_dim}) "
            f"must equal code_length {hyper.code_length}"
        )
    if net_image.layers[-1].activation != "identity" or net_text.layers[-1].activation != "identity":
        raise ValueError("modality networks must end in an identity layer")
    if net_image.input_dim != X.shape[0]:
        raise ValueError(f"image net expects {net_image.input_dim} features, data has {X.shape[0]}")
    if net_text.input_dim != Y.shape[0]:
        raise ValueError(f"text net expects {net_text.input_dim} features, data has {Y.shape[0]}")

    F, _ = forward(net_image, X)
    G, _ = forward(net_text, Y)
    F = F.copy()
    G = G.copy()
    B = sign_matrix(F + G)

    if on_iteration is not None:
        first = loss_terms(F, G, B, S, hyper)
        on_iteration(IterationStats(0, first.total, first.likelihood,
                                    first.quantization, first.balance, 0.0))

    for iteration in range(1, hyper.outer_iters + 1):
        started = time.perf_counter()
        try:
            _modality_pass(
                net_image, X, F,
                lambda batch: grad_image_outputs(batch, F, G, B, S, hyper),
                hyper, rng,
            )
            _modality_pass(
                net_text, Y, G,
                lambda batch: grad_text_outputs(batch, F, G, B, S, hyper),
                hyper, rng,
            )
            B = optimal_codes(F, G, hyper)
            terms = loss_terms(F, G, B, S, hyper)
        except (NumericError, FloatingPointError, ValueError) as exc:
            raise NumericError(f"training diverged at outer iteration {iteration}: {exc}") from exc
        if not np.isfinite(terms.total):
            raise NumericError(f"non-finite loss at outer iteration {iteration}")
        if on_iteration is not None:
            on_iteration(IterationStats(iteration, terms.total, terms.likelihood,
                                        terms.quantization, terms.balance,
                                        time.perf_counter() - started))

    return TrainState(net_image, net_text, F, G, B, hyper, rng)


def encode(net: FeedForwardNet, features) -> np.ndarray:
    """Hash unseen points: sign of the network output, {-1,+1} int8.

    Accepts a single feature vector (returns a length-c code) or a
    d x m matrix (returns c x m, one code column per point).
    """
    arr = np.asarray(features, dtype=np.float64)
    single = arr.ndim == 1
    cols = arr[:, None] if single else arr
    outputs, _ = forward(net, cols)
    codes = sign_matrix(outputs)
    return codes[:, 0] if single else codes


def encode_image(net_image: FeedForwardNet, features) -> np.ndarray:
    """Hash image-modality features with the image network."""
    return encode(net_image, features)


def encode_text(net_text: FeedForwardNet, features) -> np.ndarray:
    """Hash text-modality features with the text network."""
    return encode(net_text, features)


@dataclass
class Checkpoint:
    net_image: FeedForwardNet
    net_text: FeedForwardNet
    codes: np.ndarray
    hyper: Hyperparams
    seed: int
    extra: dict


def save_checkpoint(
    path: str | os.PathLike,
    state: TrainState,
    seed: int,
    extra: dict | None = None,
) -> None:
    """Versioned JSON container: both nets, the learned codes, knobs, seed."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "seed": int(seed),
        "hyper": asdict(state.hyper),
        "net_image": net_to_dict(state.net_image),
        "net_text": net_to_dict(state.net_text),
        "codes": state.codes.astype(int).tolist(),
        "extra": extra or {},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_checkpoint(path: str | os.PathLike) -> Checkpoint:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"not a {CHECKPOINT_FORMAT} container: format={payload.get('format')!r}")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')!r}")
    codes = np.array(payload["codes"], dtype=np.int8)
    if codes.size and not np.all(np.isin(codes, (-1, 1))):
        raise ValueError("stored codes contain entries outside {-1,+1}")
    return Checkpoint(
        net_image=net_from_dict(payload["net_image"]),
        net_text=net_from_dict(payload["net_text"]),
        codes=codes,
        hyper=Hyperparams(**payload["hyper"]),
        seed=int(payload["seed"]),
        extra=dict(payload.get("extra", {})),
    )
