"""The similarity-preserving hashing loss, its analytic gradients, and the
closed-form binary-code update.

With image-side network outputs F (c x n, column per point), text-side
outputs G, binary codes B in {-1,+1}^{c x n}, and a binary cross-modal
similarity matrix S, the loss is

    J = sum_ij [ softplus(L_ij) - S_ij * L_ij ]           (pairwise likelihood)
      + gamma * ( ||B - F||_F^2 + ||B - G||_F^2 )         (quantization pull)
      + eta   * ( ||F 1||^2 + ||G 1||^2 )                 (bit balance)

where L_ij = 0.5 * F_*i . G_*j are the pairwise logits.  The likelihood
term pushes the inner product of paired columns up when S_ij = 1 and down
when S_ij = 0; the quantization term drags the continuous outputs toward
their codes; the balance term drives every bit toward an even +1/-1 split
over the training set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mathops import as_matrix, sigmoid, sign_matrix, softplus


@dataclass(frozen=True)
class Hyperparams:
    """Knobs of the hashing objective and its training loop."""

    code_length: int = 16
    gamma: float = 1.0
    eta: float = 1.0
    batch_size: int = 128
    outer_iters: int = 500
    lr: float = 0.01

    def __post_init__(self):
        if self.code_length < 1:
            raise ValueError("code_length must be >= 1")
        if self.gamma < 0 or self.eta < 0:
            raise ValueError("gamma and eta must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.outer_iters < 1:
            raise ValueError("outer_iters must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be > 0")


@dataclass(frozen=True)
class LossTerms:
    likelihood: float
    quantization: float
    balance: float

    @property
    def total(self) -> float:
        return self.likelihood + self.quantization + self.balance


def pair_logits(image_outputs, text_outputs) -> np.ndarray:
    """Pairwise logits 0.5 * F^T G; entry (i, j) couples image i with text j."""
    f = as_matrix(image_outputs, "image outputs")
    g = as_matrix(text_outputs, "text outputs")
    if f.shape[0] != g.shape[0]:
        raise ValueError(f"code-length rows differ: {f.shape[0]} vs {g.shape[0]}")
    return 0.5 * (f.T @ g)


def _check_square_instance(F, G, B, S):
    F = as_matrix(F, "F")
    G = as_matrix(G, "G")
    B = np.asarray(B)
    S = np.asarray(S, dtype=np.float64)
    if F.shape != G.shape or F.shape != B.shape:
        raise ValueError(f"F {F.shape}, G {G.shape}, B {B.shape} must share one c x n shape")
    n = F.shape[1]
    if S.shape != (n, n):
        raise ValueError(f"S must be {n}x{n} to match the paired training set, got {S.shape}")
    return F, G, B.astype(np.float64), S


def loss_terms(F, G, B, S, hyper: Hyperparams) -> LossTerms:
    """The three loss terms evaluated on full cached output matrices."""
    F, G, B, S = _check_square_instance(F, G, B, S)
    logits = 0.5 * (F.T @ G)
    likelihood = float(np.sum(softplus(logits) - S * logits))
    quantization = float(hyper.gamma * (np.sum((B - F) ** 2) + np.sum((B - G) ** 2)))
    balance = float(hyper.eta * (np.sum(F.sum(axis=1) ** 2) + np.sum(G.sum(axis=1) ** 2)))
    return LossTerms(likelihood, quantization, balance)


def loss_value(F, G, B, S, hyper: Hyperparams) -> float:
    return loss_terms(F, G, B, S, hyper).total


def _likelihood_grad_image(indices, F, G, S) -> np.ndarray:
    logits = 0.5 * (F[:, indices].T @ G)                  # (b, n)
    return 0.5 * (G @ (sigmoid(logits) - S[indices, :]).T)


def _likelihood_grad_text(indices, F, G, S) -> np.ndarray:
    logits = 0.5 * (F.T @ G[:, indices])                  # (n, b)
    return 0.5 * (F @ (sigmoid(logits) - S[:, indices]))


def _quantization_grad(outputs_cols, codes_cols, gamma) -> np.ndarray:
    return 2.0 * gamma * (outputs_cols - codes_cols)


def _balance_grad(outputs, eta, n_cols) -> np.ndarray:
    # Row sums of the FULL cached matrix; identical for every column in a batch.
    row_sums = 2.0 * eta * outputs.sum(axis=1)
    return np.repeat(row_sums[:, None], n_cols, axis=1)


def grad_image_outputs(indices, F, G, B, S, hyper: Hyperparams) -> np.ndarray:
    """d(loss)/d(F_*i) for each i in ``indices``, as a c x b column block."""
    F, G, B, S = _check_square_instance(F, G, B, S)
    idx = _check_indices(indices, F.shape[1])
    return (
        _likelihood_grad_image(idx, F, G, S)
        + _quantization_grad(F[:, idx], B[:, idx], hyper.gamma)
        + _balance_grad(F, hyper.eta, len(idx))
    )


def grad_text_outputs(indices, F, G, B, S, hyper: Hyperparams) -> np.ndarray:
    """d(loss)/d(G_*j) for each j in ``indices``, as a c x b column block."""
    F, G, B, S = _check_square_instance(F, G, B, S)
    idx = _check_indices(indices, G.shape[1])
    return (
        _likelihood_grad_text(idx, F, G, S)
        + _quantization_grad(G[:, idx], B[:, idx], hyper.gamma)
        + _balance_grad(G, hyper.eta, len(idx))
    )


def grad_image_output(i: int, F, G, B, S, hyper: Hyperparams) -> np.ndarray:
    """Single-column form of :func:`grad_image_outputs`; returns a length-c vector."""
    return grad_image_outputs([i], F, G, B, S, hyper)[:, 0]


def grad_text_output(j: int, F, G, B, S, hyper: Hyperparams) -> np.ndarray:
    """Single-column form of :func:`grad_text_outputs`; returns a length-c vector."""
    return grad_text_outputs([j], F, G, B, S, hyper)[:, 0]


def _check_indices(indices, n: int) -> np.ndarray:
    idx = np.atleast_1d(np.asarray(indices, dtype=np.int64))
    if idx.ndim != 1:
        raise ValueError("indices must be a scalar or 1-D")
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise ValueError(f"column index out of range [0, {n})")
    return idx


def optimal_codes(F, G, hyper: Hyperparams) -> np.ndarray:
    """Closed-form code update B = sign(gamma * (F + G)).

    With the networks fixed, the loss is minimized over {-1,+1}^{c x n} by
    maximizing tr(B^T V) for V = gamma * (F + G), which is achieved entrywise
    by matching signs.  Ties at V_ij = 0 go to +1, the sign convention.
    """
    F = as_matrix(F, "F")
    G = as_matrix(G, "G")
    if F.shape != G.shape:
        raise ValueError(f"F {F.shape} and G {G.shape} must have the same shape")
    return sign_matrix(hyper.gamma * (F + G))
