"""Pure numpy versions of the recurrence kernels.

Same contract as the compiled ``_kernels`` module; selected automatically
when the extension is not built or when ``RNNCAP_PURE_PYTHON=1``.
"""

import numpy as np

RELU = 0
TANH = 1


def forward_batch(U, W, X, kind):
    """Hidden states for a batch.

    ``X`` has shape (n, t, d_x); returns ``H`` of shape (n, t, d_h) holding
    h_1..h_t with h_0 = 0.
    """
    n, t, _ = X.shape
    d_h = U.shape[0]
    H = np.empty((n, t, d_h))
    h = np.zeros((n, d_h))
    # x @ W.T per step; batch rows are independent
    XW = X @ W.T
    for tau in range(t):
        a = h @ U.T + XW[:, tau, :]
        if kind == RELU:
            h = np.maximum(a, 0.0)
        else:
            h = np.tanh(a)
        H[:, tau, :] = h
    return H


def backward_batch(U, W, V, X, H, dY, kind):
    """Reverse accumulation through the unrolled recurrence.

    ``dY`` holds the objective's gradient with respect to every output
    y_tau, shape (n, t, d_y).  Returns (dU, dW, dV) summed over the batch.
    """
    n, t, _ = X.shape
    d_h = U.shape[0]
    dU = np.zeros_like(U)
    dW = np.zeros_like(W)
    dV = np.einsum("ntk,nth->kh", dY, H)
    carry = np.zeros((n, d_h))
    for tau in range(t - 1, -1, -1):
        h = H[:, tau, :]
        dh = dY[:, tau, :] @ V + carry
        if kind == RELU:
            da = dh * (h > 0.0)
        else:
            da = dh * (1.0 - h * h)
        if tau > 0:
            dU += da.T @ H[:, tau - 1, :]
        dW += da.T @ X[:, tau, :]
        carry = da @ U
    return dU, dW, dV
