import logging
import sys
from pathlib import Path
from typing import Literal

if sys.version_info >= (3, 11):
    from typing import Self
else:
    from typing_extensions import Self

import numpy as np
from scipy.special import expit, logit

from app.core.exceptions import SchemaError
from app.models.config import PROBABILITY_CLAMP
from app.models.pem import LOC_Z, SALIENT_DIM, MlpSpec, ModelFile
from app.services.storage.writers import read_json, write_json

logger = logging.getLogger(__name__)

Reduction = Literal["mean", "sum"]


def clamp_probability(p: np.ndarray | float) -> np.ndarray:
    return np.clip(p, PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP)


def layer_shapes(input_dim: int, widths: tuple[int, ...]) -> list[tuple[int, int]]:
    shapes = []
    fan_in = input_dim
    for width in widths:
        shapes.append((fan_in, width))
        fan_in = width
    return shapes


class FeedForwardScorer:
    """Fully connected network with a sigmoid output, parameters held flat.

    Inputs are standardized with fixed per-feature constants before the first
    layer. Output probabilities are clamped to [eps, 1 - eps].
    """

    kind: Literal["pem", "proposal"] = "pem"

    def __init__(
        self,
        spec: MlpSpec,
        input_dim: int,
        params: np.ndarray | None = None,
        input_mean: np.ndarray | None = None,
        input_scale: np.ndarray | None = None,
    ):
        if input_dim < 1:
            raise SchemaError("input dimension must be positive")
        self.spec = spec
        self.input_dim = input_dim
        self.shapes = layer_shapes(input_dim, spec.widths)
        self.n_params = sum(n_in * n_out + n_out for n_in, n_out in self.shapes)
        self.params = (
            np.zeros(self.n_params)
            if params is None
            else np.asarray(params, dtype=float)
        )
        if self.params.shape != (self.n_params,):
            raise SchemaError(
                f"expected {self.n_params} parameters, got {self.params.shape}"
            )
        self.input_mean = (
            np.zeros(input_dim) if input_mean is None else np.asarray(input_mean, float)
        )
        self.input_scale = (
            np.ones(input_dim)
            if input_scale is None
            else np.asarray(input_scale, float)
        )

    def with_params(self, params: np.ndarray) -> Self:
        return type(self)(
            self.spec, self.input_dim, params, self.input_mean, self.input_scale
        )

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        gain = 2.0 if self.spec.activation == "relu" else 1.0
        chunks = []
        for index, (fan_in, fan_out) in enumerate(self.shapes):
            std = np.sqrt(gain / fan_in)
            if index == len(self.shapes) - 1:
                std *= 0.1
            chunks.append(rng.normal(0.0, std, size=fan_in * fan_out))
            chunks.append(np.zeros(fan_out))
        return np.concatenate(chunks)

    def unpack(self, params: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        layers = []
        offset = 0
        for fan_in, fan_out in self.shapes:
            size = fan_in * fan_out
            weights = params[offset : offset + size].reshape(fan_in, fan_out)
            offset += size
            bias = params[offset : offset + fan_out]
            offset += fan_out
            layers.append((weights, bias))
        return layers

    def output_bias_index(self) -> int:
        return self.n_params - 1

    def standardize(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[-1] != self.input_dim:
            raise SchemaError(
                f"expected {self.input_dim} input features, got {X.shape[-1]}"
            )
        return (X - self.input_mean) / self.input_scale

    def _activate(self, z: np.ndarray) -> np.ndarray:
        if self.spec.activation == "relu":
            return np.maximum(z, 0.0)
        return np.tanh(z)

    def _activation_grad(self, z: np.ndarray, a: np.ndarray) -> np.ndarray:
        if self.spec.activation == "relu":
            return (z > 0).astype(float)
        return 1.0 - a**2

    def _forward(self, X: np.ndarray, params: np.ndarray):
        layers = self.unpack(params)
        activations = [self.standardize(X)]
        pre_activations = []
        for index, (weights, bias) in enumerate(layers):
            z = activations[-1] @ weights + bias
            pre_activations.append(z)
            if index < len(layers) - 1:
                activations.append(self._activate(z))
        return pre_activations[-1][:, 0], activations, pre_activations, layers

    def logits(self, X: np.ndarray, params: np.ndarray | None = None) -> np.ndarray:
        logits, *_ = self._forward(X, self.params if params is None else params)
        return logits

    def predict(self, X: np.ndarray, params: np.ndarray | None = None) -> np.ndarray:
        return clamp_probability(expit(self.logits(X, params)))

    def loss_and_gradient(
        self,
        params: np.ndarray,
        X: np.ndarray,
        y: np.ndarray,
        sample_weight: np.ndarray | None = None,
        reduction: Reduction = "mean",
    ) -> tuple[float, np.ndarray]:
        """Weighted binary cross-entropy and its gradient by backpropagation.

        Labels may be soft (in [0, 1]). Inside the clamp band the gradient of
        the loss with respect to the output logit is p - y; outside it is 0.
        """
        y = np.asarray(y, dtype=float)
        weight = (
            np.ones_like(y)
            if sample_weight is None
            else np.asarray(sample_weight, float)
        )
        logits, activations, pre_activations, layers = self._forward(X, params)

        raw = expit(logits)
        p = clamp_probability(raw)
        per_sample = -(y * np.log(p) + (1.0 - y) * np.log1p(-p))
        norm = float(np.sum(weight)) if reduction == "mean" else 1.0
        if norm <= 0:
            norm = 1.0
        loss = float(np.sum(weight * per_sample) / norm)

        inside = (raw > PROBABILITY_CLAMP) & (raw < 1.0 - PROBABILITY_CLAMP)
        delta = ((raw - y) * weight * inside / norm)[:, None]

        grads: list[np.ndarray] = []
        for index in range(len(layers) - 1, -1, -1):
            weights, _ = layers[index]
            grads.append(delta.sum(axis=0))
            grads.append((activations[index].T @ delta).ravel())
            if index > 0:
                upstream = delta @ weights.T
                delta = upstream * self._activation_grad(
                    pre_activations[index - 1], activations[index]
                )
        return loss, np.concatenate(grads[::-1])

    def to_model_file(self) -> ModelFile:
        return ModelFile(
            kind=self.kind,
            spec=self.spec,
            input_dim=self.input_dim,
            shapes=self.shapes,
            params=self.params.tolist(),
            input_mean=self.input_mean.tolist(),
            input_scale=self.input_scale.tolist(),
        )

    @classmethod
    def from_model_file(cls, model_file: ModelFile) -> Self:
        scorer = cls(
            model_file.spec,
            model_file.input_dim,
            np.asarray(model_file.params),
            np.asarray(model_file.input_mean),
            np.asarray(model_file.input_scale),
        )
        if [tuple(s) for s in model_file.shapes] != scorer.shapes:
            raise SchemaError("model file layer shapes do not match its widths")
        return scorer

    def save(self, path: str | Path) -> Path:
        return write_json(path, self.to_model_file())

    @classmethod
    def load(cls, path: str | Path) -> Self:
        model_file = ModelFile.model_validate(read_json(path))
        if model_file.kind != cls.kind:
            raise SchemaError(
                f"{path} holds a {model_file.kind} model, not a {cls.kind}"
            )
        return cls.from_model_file(model_file)


class PemModel(FeedForwardScorer):
    """Surrogate detection model over salient vectors."""

    kind = "pem"

    def evaluate(self, salient: np.ndarray) -> float:
        return float(self.predict(np.asarray(salient, dtype=float)[None, :])[0])

    @classmethod
    def constant(cls, probability: float, input_dim: int = SALIENT_DIM) -> "PemModel":
        """A logistic model that ignores its input: sigmoid(logit(p))."""
        model = cls(MlpSpec.logistic(), input_dim)
        model.params[model.output_bias_index()] = logit(clamp_probability(probability))
        return model

    @classmethod
    def gap_logistic(cls, gap_weight: float, bias: float) -> "PemModel":
        """Detection probability sigmoid(gap_weight * z + bias) on the z distance."""
        model = cls(MlpSpec.logistic(), SALIENT_DIM)
        model.params[LOC_Z] = gap_weight
        model.params[model.output_bias_index()] = bias
        return model
