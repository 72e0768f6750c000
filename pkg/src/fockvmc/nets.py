"""Small feed-forward networks with analytic derivative machinery.

Hidden layers use tanh (twice continuously differentiable, required by the
Laplacian estimator); the output layer is linear. Parameters live in a flat
float64 vector with a documented layout so checkpoints are portable:

    for each layer l (input to output order):
        W_l, shape (fan_in, fan_out), flattened row-major
        b_l, shape (fan_out,)

Three evaluation modes are provided:

* ``forward``          -- plain value,
* ``jet``              -- value plus first and second directional derivatives
                          with respect to the inputs, propagated layer by layer
                          (one direction per requested coordinate),
* ``backprop``         -- parameter gradients via reverse accumulation, either
                          per sample or weighted-summed over a batch.

Finite differences are used only by the tests as an independent oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Mlp:
    """Architecture of a fully-connected network; weights live elsewhere.

    widths = (input_dim, hidden..., output_dim). ``activation`` applies to
    hidden layers only and must be smooth ("tanh"); "identity" exists for
    tests of the linear special case.
    """

    widths: tuple[int, ...]
    activation: str = "tanh"

    def __post_init__(self):
        if len(self.widths) < 2:
            raise ValueError("an Mlp needs at least an input and an output width")
        if any(w < 1 for w in self.widths):
            raise ValueError(f"all layer widths must be >= 1, got {self.widths}")
        if self.activation not in ("tanh", "identity"):
            raise ValueError(f"unsupported activation {self.activation!r}")

    @property
    def input_dim(self) -> int:
        return self.widths[0]

    @property
    def output_dim(self) -> int:
        return self.widths[-1]

    @property
    def n_layers(self) -> int:
        return len(self.widths) - 1

    @property
    def n_params(self) -> int:
        return sum(i * o + o for i, o in zip(self.widths[:-1], self.widths[1:]))

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        """Uniform(-sqrt(6/(fan_in+fan_out)), +...) weights, zero biases."""
        parts = []
        for fan_in, fan_out in zip(self.widths[:-1], self.widths[1:]):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            parts.append(rng.uniform(-bound, bound, size=fan_in * fan_out))
            parts.append(np.zeros(fan_out))
        return np.concatenate(parts)

    def unpack(self, params: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        """Zero-copy views (W, b) per layer from the flat vector."""
        params = np.asarray(params)
        if params.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got shape {params.shape}")
        layers = []
        k = 0
        for fan_in, fan_out in zip(self.widths[:-1], self.widths[1:]):
            w = params[k : k + fan_in * fan_out].reshape(fan_in, fan_out)
            k += fan_in * fan_out
            b = params[k : k + fan_out]
            k += fan_out
            layers.append((w, b))
        return layers

    # -- evaluation ---------------------------------------------------------

    def forward(self, params: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Evaluate the network on x of shape (..., input_dim)."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.input_dim:
            raise ValueError(f"input dim {x.shape[-1]} != network input dim {self.input_dim}")
        layers = self.unpack(params)
        h = x
        for li, (w, b) in enumerate(layers):
            h = h @ w + b
            if li < self.n_layers - 1 and self.activation == "tanh":
                h = np.tanh(h)
        return h

    def _forward_cached(self, params, x):
        """Forward pass retaining post-activation values per layer."""
        layers = self.unpack(params)
        acts = [x]
        h = x
        for li, (w, b) in enumerate(layers):
            h = h @ w + b
            if li < self.n_layers - 1 and self.activation == "tanh":
                h = np.tanh(h)
            acts.append(h)
        return acts

    def jet(self, params, x, dx, d2x):
        """Propagate second-order directional jets through the network.

        x:   (N, input_dim) evaluation points,
        dx:  (N, K, input_dim) first derivatives of the inputs along K curves,
        d2x: (N, K, input_dim) second derivatives along the same curves.

        Returns (y, dy, d2y) with shapes (N, output_dim), (N, K, output_dim),
        (N, K, output_dim): the value and the first/second derivatives of the
        outputs along each curve.
        """
        h, dh, d2h = np.asarray(x, dtype=np.float64), dx, d2x
        layers = self.unpack(params)
        for li, (w, b) in enumerate(layers):
            z = h @ w + b
            dz = dh @ w
            d2z = d2h @ w
            if li < self.n_layers - 1 and self.activation == "tanh":
                t = np.tanh(z)
                g = 1.0 - t * t
                tv = t[:, None, :]
                gv = g[:, None, :]
                h = t
                d2h = gv * d2z - 2.0 * tv * gv * dz * dz
                dh = gv * dz
            else:
                h, dh, d2h = z, dz, d2z
        return h, dh, d2h

    def backprop(self, params, x, cot):
        """Reverse-mode parameter gradients contracted against output cotangents.

        x:   (N, input_dim)
        cot: (N, K, output_dim) cotangent vectors; the returned gradient
             column k equals sum_s d(cot[s,k] . y_s)/d(theta).

        Returns (grads, in_cot): grads of shape (n_params, K) and the
        matching input cotangents of shape (N, K, input_dim).
        """
        x = np.asarray(x, dtype=np.float64)
        cot = np.asarray(cot, dtype=np.float64)
        acts = self._forward_cached(params, x)
        layers = self.unpack(params)
        grads = np.empty((self.n_params, cot.shape[1]))
        offsets = []
        k = 0
        for fan_in, fan_out in zip(self.widths[:-1], self.widths[1:]):
            offsets.append((k, k + fan_in * fan_out, k + fan_in * fan_out + fan_out))
            k = offsets[-1][2]

        delta = cot  # d(objective)/d(pre-activation of output layer)
        for li in range(self.n_layers - 1, -1, -1):
            w, _ = layers[li]
            a_in = acts[li]
            w0, w1, w2 = offsets[li]
            gw = np.einsum("ni,nko->iok", a_in, delta, optimize=True)
            grads[w0:w1] = gw.reshape(w.size, -1)
            grads[w1:w2] = delta.sum(axis=0).T
            if li > 0:
                back = np.einsum("nko,io->nki", delta, w, optimize=True)
                if self.activation == "tanh":
                    delta = back * (1.0 - a_in * a_in)[:, None, :]
                else:
                    delta = back
            else:
                in_cot = np.einsum("nko,io->nki", delta, w, optimize=True)
        return grads, in_cot

    def backprop_per_sample(self, params, x, cot):
        """Per-sample parameter gradients for scalar-output contractions.

        cot: (N, output_dim). Returns (grads (N, n_params), in_cot (N, input_dim)).
        """
        x = np.asarray(x, dtype=np.float64)
        cot = np.asarray(cot, dtype=np.float64)
        acts = self._forward_cached(params, x)
        layers = self.unpack(params)
        n = x.shape[0]
        grads = np.empty((n, self.n_params))
        k = self.n_params
        delta = cot
        for li in range(self.n_layers - 1, -1, -1):
            w, _ = layers[li]
            a_in = acts[li]
            grads[:, k - w.shape[1] : k] = delta
            k -= w.shape[1]
            gw = a_in[:, :, None] * delta[:, None, :]
            grads[:, k - w.size : k] = gw.reshape(n, w.size)
            k -= w.size
            back = delta @ w.T
            if li > 0:
                if self.activation == "tanh":
                    delta = back * (1.0 - a_in * a_in)
                else:
                    delta = back
            else:
                in_cot = back
        return grads, in_cot


# -- spec-level convenience wrappers (single input vector, scalar output) ----


def mlp_forward(net: Mlp, params: np.ndarray, x) -> float:
    """Scalar output of a single-output network on one input vector."""
    if net.output_dim != 1:
        raise ValueError("mlp_forward expects an output_dim-1 network")
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    return float(net.forward(params, x)[0, 0])


def mlp_param_gradient(net: Mlp, params: np.ndarray, x) -> np.ndarray:
    """d(output)/d(theta) for every parameter, reverse accumulation."""
    if net.output_dim != 1:
        raise ValueError("mlp_param_gradient expects an output_dim-1 network")
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    grads, _ = net.backprop_per_sample(params, x, np.ones((1, 1)))
    return grads[0]

def mlp_input_derivatives(net: Mlp, params: np.ndarray, x):
    """(value, d(out)/dx_i, d2(out)/dx_i^2) per input coordinate.

    Only the diagonal of the input Hessian is produced; that is what the
    Laplacian assembly needs, because coordinates enter through per-coordinate
    scalar chains.
    """
    if net.output_dim != 1:
        raise ValueError("mlp_input_derivatives expects an output_dim-1 network")
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    d = x.shape[1]
    dx = np.eye(d)[None, :, :]
    d2x = np.zeros((1, d, d))
    y, dy, d2y = net.jet(params, x, dx, d2x)
    return float(y[0, 0]), dy[0, :, 0].copy(), d2y[0, :, 0].copy()
