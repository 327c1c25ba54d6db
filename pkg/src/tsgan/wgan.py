"""MLP generator/critic pair, the gradient-penalty Wasserstein loss,
the training loop, sampling, and checkpoint persistence.

The critic sees pixels scaled to [-1, 1] (p / 127.5 - 1); the generator
ends in a tanh head so its samples land in the same range and decode
without clipping surprises.  Training is bit-deterministic for a fixed
seed: parameter init, latent noise, interpolation coefficients, and
batch shuffling each consume a dedicated child stream of the seed.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Graph, Tensor
from .errors import FormatError, NumericError, ParameterError
from .raster import QuantizationSpec, RasterImage, round_half_away

CHECKPOINT_MAGIC = b"TSG1"
CHECKPOINT_VERSION = 1

HIDDEN_ACTIVATIONS = ("relu", "leaky_relu", "tanh")
OUTPUT_ACTIVATIONS = ("tanh", "identity")


@dataclass(frozen=True)
class NetworkConfig:
    """Fully-connected network: sizes of every layer, input first."""

    layer_sizes: tuple[int, ...]
    hidden_activation: str = "relu"
    output_activation: str = "identity"
    leaky_slope: float = 0.2

    def __post_init__(self) -> None:
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))
        if len(self.layer_sizes) < 2:
            raise ParameterError("a network needs at least input and output sizes")
        if any(s < 1 for s in self.layer_sizes):
            raise ParameterError(f"layer sizes must be positive: {self.layer_sizes}")
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ParameterError(f"unknown hidden activation {self.hidden_activation!r}")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ParameterError(f"unknown output activation {self.output_activation!r}")

    @property
    def input_size(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_size(self) -> int:
        return self.layer_sizes[-1]


@dataclass(frozen=True)
class TrainConfig:
    """Everything a training run depends on besides the dataset itself."""

    latent_dim: int = 64
    gp_lambda: float = 10.0
    n_critic: int = 5
    adam_lr: float = 1e-4
    adam_beta1: float = 0.0
    adam_beta2: float = 0.9
    epochs: int = 10
    batch_size: int = 32
    seed: int = 0
    width: int = 16
    height: int = 16

    def __post_init__(self) -> None:
        if self.latent_dim < 1 or self.n_critic < 1 or self.batch_size < 1:
            raise ParameterError("latent_dim, n_critic, and batch_size must be positive")
        if self.epochs < 0:
            raise ParameterError(f"epochs must be non-negative, got {self.epochs}")
        if self.gp_lambda < 0:
            raise ParameterError(f"gp_lambda must be non-negative, got {self.gp_lambda}")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ParameterError("Adam betas must lie in [0, 1)")
        if self.width < 1 or self.height < 1:
            raise ParameterError(f"bad image dims {self.width}x{self.height}")


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    critic_loss: float
    gp_term: float
    w1_estimate: float


@dataclass
class TrainingTrace:
    """Per-critic-iteration loss record of a training run."""

    records: list[TraceRecord] = field(default_factory=list)

    def append(self, record: TraceRecord) -> None:
        if self.records and record.iteration <= self.records[-1].iteration:
            raise ParameterError("trace iterations must be strictly increasing")
        for value in (record.critic_loss, record.gp_term, record.w1_estimate):
            if not np.isfinite(value):
                raise NumericError(
                    f"non-finite trace entry at iteration {record.iteration}"
                )
        self.records.append(record)

    def w1_estimates(self) -> np.ndarray:
        return np.array([r.w1_estimate for r in self.records], dtype=np.float64)

    def __len__(self) -> int:
        return len(self.records)


@dataclass
class Checkpoint:
    """Serialized state of a trained (or freshly initialized) GAN."""

    gen_config: NetworkConfig
    critic_config: NetworkConfig
    gen_params: list[np.ndarray]
    critic_params: list[np.ndarray]
    train_config: TrainConfig
    quant_spec: QuantizationSpec
    iteration: int
    version: int = CHECKPOINT_VERSION


class Mlp:
    """A fully-connected network over autodiff tensors.

    ``params`` alternates weight matrices (fan_in, fan_out) and bias rows
    (1, fan_out); they may be graph variables (trainable) or constants.
    """

    def __init__(self, config: NetworkConfig, params: list[Tensor]):
        expected = 2 * (len(config.layer_sizes) - 1)
        if len(params) != expected:
            raise ParameterError(f"expected {expected} parameter tensors, got {len(params)}")
        self.config = config
        self.params = params

    @property
    def graph(self) -> Graph | None:
        for p in self.params:
            if p.graph is not None:
                return p.graph
        return None

    def __call__(self, x) -> Tensor:
        h = ad.as_tensor(x)
        n_layers = len(self.config.layer_sizes) - 1
        for i in range(n_layers):
            h = ad.affine(h, self.params[2 * i], self.params[2 * i + 1])
            if i < n_layers - 1:
                if self.config.hidden_activation == "relu":
                    h = ad.relu(h)
                elif self.config.hidden_activation == "leaky_relu":
                    h = ad.leaky_relu(h, self.config.leaky_slope)
                else:
                    h = ad.tanh(h)
            elif self.config.output_activation == "tanh":
                h = ad.tanh(h)
        return h


def init_params(config: NetworkConfig, rng: np.random.Generator) -> list[np.ndarray]:
    """Weights uniform in +-sqrt(6/(fan_in+fan_out)), biases zero."""
    params: list[np.ndarray] = []
    for fan_in, fan_out in zip(config.layer_sizes, config.layer_sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        params.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        params.append(np.zeros((1, fan_out)))
    return params


def param_names(prefix: str, config: NetworkConfig) -> list[str]:
    names = []
    for i in range(len(config.layer_sizes) - 1):
        names.append(f"{prefix}.w{i}")
        names.append(f"{prefix}.b{i}")
    return names


def _as_batch(values) -> np.ndarray:
    batch = np.asarray(values, dtype=np.float64)
    if batch.ndim != 2:
        raise ParameterError(f"expected a (batch, features) array, got shape {batch.shape}")
    return batch


def gradient_penalty(
    critic: Mlp,
    real_batch,
    fake_batch,
    eps: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Mean over the batch of (||grad_xhat D(xhat)||_2 - 1)^2.

    xhat interpolates real and fake samples with per-sample uniform
    coefficients (drawn from ``rng`` unless ``eps`` is given explicitly,
    which tests use to pin the interpolation points).  The result is a
    graph tensor, differentiable with respect to the critic parameters.
    """
    real = _as_batch(real_batch)
    fake = _as_batch(fake_batch)
    if real.shape != fake.shape:
        raise ParameterError(f"batch shapes differ: {real.shape} vs {fake.shape}")
    if eps is None:
        if rng is None:
            raise ParameterError("gradient_penalty needs either eps or rng")
        eps = rng.uniform(size=(real.shape[0], 1))
    eps = np.asarray(eps, dtype=np.float64).reshape(real.shape[0], 1)

    graph = critic.graph or Graph()
    xhat = graph.variable(eps * real + (1.0 - eps) * fake)
    scores = critic(xhat)
    grads = ad.grad(ad.tsum(scores), [xhat], create_graph=True)[0]
    norms = ad.l2_norm(grads, axis=1)
    return ad.mean(ad.square(ad.sub(norms, 1.0)))


def critic_loss(
    critic: Mlp,
    real_batch,
    fake_batch,
    gp_lambda: float,
    eps: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """mean D(fake) - mean D(real) + lambda * gradient_penalty."""
    loss, _, _ = critic_terms(critic, real_batch, fake_batch, gp_lambda, eps=eps, rng=rng)
    return loss


def critic_terms(
    critic: Mlp,
    real_batch,
    fake_batch,
    gp_lambda: float,
    eps: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[Tensor, Tensor, float]:
    """Critic loss plus its pieces: (loss, penalty, w1_estimate)."""
    real = _as_batch(real_batch)
    fake = _as_batch(fake_batch)
    d_real = ad.mean(critic(real))
    d_fake = ad.mean(critic(fake))
    penalty = gradient_penalty(critic, real, fake, eps=eps, rng=rng)
    loss = ad.add(ad.sub(d_fake, d_real), ad.mul(gp_lambda, penalty))
    w1_estimate = d_real.item() - d_fake.item()
    return loss, penalty, w1_estimate


def generator_loss(critic: Mlp, fake_batch) -> Tensor:
    """-mean D(fake); fake_batch should stay attached to the generator graph."""
    return ad.neg(ad.mean(critic(fake_batch)))


class Adam:
    """Adam with bias correction; state arrays mirror the parameter list."""

    def __init__(self, shapes, lr: float, beta1: float, beta2: float, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for i, (p, g) in enumerate(zip(params, grads)):
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * g * g
            m_hat = self.m[i] / (1 - b1**self.t)
            v_hat = self.v[i] / (1 - b2**self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class _Batcher:
    """Cycles through shuffled dataset indices, reshuffling on wrap."""

    def __init__(self, n: int, batch_size: int, rng: np.random.Generator):
        self.n = n
        self.batch_size = batch_size
        self.rng = rng
        self.order = rng.permutation(n)
        self.pos = 0

    def next_indices(self) -> np.ndarray:
        if self.pos + self.batch_size > self.n:
            self.order = self.rng.permutation(self.n)
            self.pos = 0
        idx = self.order[self.pos : self.pos + self.batch_size]
        self.pos += self.batch_size
        return idx


def pixels_to_unit_range(pixels: np.ndarray) -> np.ndarray:
    """Map uint8 pixels onto the [-1, 1] domain the networks work in."""
    return pixels.astype(np.float64) / 127.5 - 1.0


def _dataset_matrix(dataset: list[RasterImage], cfg: TrainConfig) -> np.ndarray:
    if not dataset:
        raise ParameterError("dataset is empty")
    spec = dataset[0].spec
    for img in dataset:
        if (img.width, img.height) != (cfg.width, cfg.height):
            raise ParameterError(
                f"image dims {img.width}x{img.height} != configured "
                f"{cfg.width}x{cfg.height}"
            )
        if img.spec != spec:
            raise ParameterError("dataset images carry differing quantization specs")
    if len(dataset) < cfg.batch_size:
        raise ParameterError(
            f"dataset size {len(dataset)} smaller than batch_size {cfg.batch_size}"
        )
    return np.stack([pixels_to_unit_range(img.pixels) for img in dataset])


def train(
    dataset: list[RasterImage],
    gen_config: NetworkConfig,
    critic_config: NetworkConfig,
    train_config: TrainConfig,
) -> tuple[Checkpoint, TrainingTrace]:
    """Train a WGAN-GP on rasterised windows.

    Every generator step is preceded by ``n_critic`` critic steps; each
    epoch runs floor(len(dataset)/batch_size) generator steps.  The trace
    records every critic iteration.  A non-finite loss aborts with a
    NumericError naming the iteration rather than skipping it, so traces
    stay reproducible.
    """
    pixel_dim = train_config.width * train_config.height
    if gen_config.output_size != pixel_dim:
        raise ParameterError(
            f"generator output size {gen_config.output_size} != pixel count {pixel_dim}"
        )
    if gen_config.input_size != train_config.latent_dim:
        raise ParameterError(
            f"generator input size {gen_config.input_size} != latent_dim "
            f"{train_config.latent_dim}"
        )
    if critic_config.input_size != pixel_dim or critic_config.output_size != 1:
        raise ParameterError(
            f"critic must map {pixel_dim} -> 1, got {critic_config.layer_sizes}"
        )

    data = _dataset_matrix(dataset, train_config)
    quant_spec = dataset[0].spec

    init_ss, latent_ss, eps_ss, shuffle_ss = np.random.SeedSequence(
        train_config.seed
    ).spawn(4)
    init_rng = np.random.default_rng(init_ss)
    latent_rng = np.random.default_rng(latent_ss)
    eps_rng = np.random.default_rng(eps_ss)
    shuffle_rng = np.random.default_rng(shuffle_ss)

    gen_params = init_params(gen_config, init_rng)
    critic_params = init_params(critic_config, init_rng)

    gen_opt = Adam(
        [p.shape for p in gen_params],
        train_config.adam_lr,
        train_config.adam_beta1,
        train_config.adam_beta2,
    )
    critic_opt = Adam(
        [p.shape for p in critic_params],
        train_config.adam_lr,
        train_config.adam_beta1,
        train_config.adam_beta2,
    )

    batcher = _Batcher(len(dataset), train_config.batch_size, shuffle_rng)
    trace = TrainingTrace()
    iteration = 0
    steps_per_epoch = len(dataset) // train_config.batch_size

    def sample_fake(batch_size: int) -> np.ndarray:
        z = latent_rng.standard_normal((batch_size, train_config.latent_dim))
        frozen = Mlp(gen_config, [Tensor(p) for p in gen_params])
        return frozen(z).data

    for _epoch in range(train_config.epochs):
        for _step in range(steps_per_epoch):
            for _ in range(train_config.n_critic):
                iteration += 1
                real = data[batcher.next_indices()]
                fake = sample_fake(real.shape[0])

                graph = Graph()
                critic = Mlp(
                    critic_config, [graph.variable(p) for p in critic_params]
                )
                loss, penalty, w1_estimate = critic_terms(
                    critic, real, fake, train_config.gp_lambda, rng=eps_rng
                )
                if not np.isfinite(loss.data):
                    raise NumericError(
                        f"non-finite critic loss at iteration {iteration}"
                    )
                grads = ad.grad(loss, critic.params)
                critic_opt.step(critic_params, [g.data for g in grads])
                trace.append(
                    TraceRecord(iteration, loss.item(), penalty.item(), w1_estimate)
                )

            z = latent_rng.standard_normal(
                (train_config.batch_size, train_config.latent_dim)
            )
            graph = Graph()
            generator = Mlp(gen_config, [graph.variable(p) for p in gen_params])
            critic = Mlp(critic_config, [Tensor(p) for p in critic_params])
            loss = generator_loss(critic, generator(z))
            if not np.isfinite(loss.data):
                raise NumericError(
                    f"non-finite generator loss after critic iteration {iteration}"
                )
            grads = ad.grad(loss, generator.params)
            gen_opt.step(gen_params, [g.data for g in grads])

    checkpoint = Checkpoint(
        gen_config=gen_config,
        critic_config=critic_config,
        gen_params=gen_params,
        critic_params=critic_params,
        train_config=train_config,
        quant_spec=quant_spec,
        iteration=iteration,
    )
    return checkpoint, trace


def generate(checkpoint: Checkpoint, count: int, seed: int) -> list[RasterImage]:
    """Sample images from a checkpoint; a pure function of its arguments.

    Latents are standard normal; tanh outputs y map to pixels via
    round((y + 1) * 127.5), clamped to [0, 255].
    """
    if count < 1:
        raise ParameterError(f"count must be positive, got {count}")
    cfg = checkpoint.train_config
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((count, cfg.latent_dim))
    generator = Mlp(checkpoint.gen_config, [Tensor(p) for p in checkpoint.gen_params])
    outputs = generator(z).data
    pixels = np.clip(round_half_away((outputs + 1.0) * 127.5), 0, 255).astype(np.uint8)
    return [
        RasterImage(cfg.width, cfg.height, row, checkpoint.quant_spec)
        for row in pixels
    ]


# ---------------------------------------------------------------------------
# Checkpoint file format: magic "TSG1", little-endian u32 header length,
# UTF-8 JSON header, then raw little-endian float64 parameter payloads in
# header order.


def _config_to_dict(config: NetworkConfig) -> dict:
    return {
        "layer_sizes": list(config.layer_sizes),
        "hidden_activation": config.hidden_activation,
        "output_activation": config.output_activation,
        "leaky_slope": config.leaky_slope,
    }


def _config_from_dict(d: dict) -> NetworkConfig:
    return NetworkConfig(
        layer_sizes=tuple(d["layer_sizes"]),
        hidden_activation=d["hidden_activation"],
        output_activation=d["output_activation"],
        leaky_slope=d["leaky_slope"],
    )


def save_checkpoint(checkpoint: Checkpoint, path: str | Path) -> None:
    names = param_names("generator", checkpoint.gen_config) + param_names(
        "critic", checkpoint.critic_config
    )
    tensors = checkpoint.gen_params + checkpoint.critic_params
    header = {
        "version": checkpoint.version,
        "generator": _config_to_dict(checkpoint.gen_config),
        "critic": _config_to_dict(checkpoint.critic_config),
        "train": {
            "latent_dim": checkpoint.train_config.latent_dim,
            "gp_lambda": checkpoint.train_config.gp_lambda,
            "n_critic": checkpoint.train_config.n_critic,
            "adam_lr": checkpoint.train_config.adam_lr,
            "adam_beta1": checkpoint.train_config.adam_beta1,
            "adam_beta2": checkpoint.train_config.adam_beta2,
            "epochs": checkpoint.train_config.epochs,
            "batch_size": checkpoint.train_config.batch_size,
            "seed": checkpoint.train_config.seed,
            "width": checkpoint.train_config.width,
            "height": checkpoint.train_config.height,
        },
        "quant_spec": {
            "lo": checkpoint.quant_spec.lo,
            "hi": checkpoint.quant_spec.hi,
            "levels": checkpoint.quant_spec.levels,
        },
        "iteration": checkpoint.iteration,
        "params": [
            {"name": name, "shape": list(t.shape)} for name, t in zip(names, tensors)
        ],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for t in tensors:
            fh.write(np.ascontiguousarray(t, dtype="<f8").tobytes())


def load_checkpoint(path: str | Path) -> Checkpoint:
    data = Path(path).read_bytes()
    if data[:4] != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r}")
    if len(data) < 8:
        raise FormatError(f"{path}: truncated header")
    (header_len,) = struct.unpack("<I", data[4:8])
    header_end = 8 + header_len
    if len(data) < header_end:
        raise FormatError(f"{path}: truncated header")
    try:
        header = json.loads(data[8:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: unreadable header: {exc}") from None
    if header.get("version") != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported version {header.get('version')!r}")

    shapes = [tuple(entry["shape"]) for entry in header["params"]]
    expected = sum(int(np.prod(s)) for s in shapes) * 8
    payload = data[header_end:]
    if len(payload) != expected:
        raise FormatError(
            f"{path}: expected {expected} payload bytes, got {len(payload)}"
        )

    tensors = []
    offset = 0
    for shape in shapes:
        n = int(np.prod(shape))
        arr = np.frombuffer(payload, dtype="<f8", count=n, offset=offset)
        tensors.append(arr.astype(np.float64).reshape(shape))
        offset += n * 8

    gen_config = _config_from_dict(header["generator"])
    critic_config = _config_from_dict(header["critic"])
    n_gen = 2 * (len(gen_config.layer_sizes) - 1)
    train_config = TrainConfig(**header["train"])
    quant = header["quant_spec"]
    return Checkpoint(
        gen_config=gen_config,
        critic_config=critic_config,
        gen_params=tensors[:n_gen],
        critic_params=tensors[n_gen:],
        train_config=train_config,
        quant_spec=QuantizationSpec(quant["lo"], quant["hi"], quant["levels"]),
        iteration=header["iteration"],
    )
