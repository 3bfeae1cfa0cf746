"""Per-component feature extraction and a small sigmoid MLP trained with Adam.

For every lightpath traversing a component the feature vector holds the
six-tuple ``(l1, p1, p1', l2, p2, p2')``: the hop distance to the nearest
deployed OPM before the component and its pre/post-failure readings, then the
same for the nearest deployed OPM after it.  Hop distances count components.
Lightpath slots are ordered by lightpath id and zero-padded to ``l_max``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, DimensionMismatch, NonFiniteLoss, Untraversed
from .monitoring import Deployment, MonitorSnapshot, read_json, write_json
from .provisioning import Lightpath

LOGIT_CLAMP = 30.0
TUPLE = 6
LEVEL_SCALE_DB = 100.0
TRANSFORMS = ("delta", "none")


class FeatureIndex:
    """Gather plan mapping flattened snapshots to per-component features.

    Built once per (lightpaths, deployment); :meth:`features` is then a few
    vectorized gathers.
    """

    def __init__(self, lightpaths: list[Lightpath], deployment: Deployment, l_max: int):
        self.l_max = l_max
        self.lightpaths = lightpaths
        offsets = np.cumsum([0] + [lp.length for lp in lightpaths])
        slots: dict[int, list[tuple[int, int, int, int, int]]] = {}
        deployed = deployment.deployed
        for l, lp in sorted(enumerate(lightpaths), key=lambda e: e[1].id):
            have = [s in deployed for s in lp.slots]  # reading j+1 sits after component j+1
            last_before = -1
            before = []
            for pos in range(lp.length):
                before.append(last_before)
                if pos < len(have) and have[pos]:
                    last_before = pos
            next_after = -1
            after = [-1] * lp.length
            for pos in range(lp.length - 1, -1, -1):
                if pos < len(have) and have[pos]:
                    next_after = pos
                after[pos] = next_after
            for pos, cid in enumerate(lp.components):
                j1, j2 = before[pos], after[pos]
                slots.setdefault(cid, []).append(
                    (
                        pos - j1 if j1 >= 0 else 0,
                        int(offsets[l]) + j1 if j1 >= 0 else -1,
                        j2 - pos + 1 if j2 >= 0 else 0,
                        int(offsets[l]) + j2 if j2 >= 0 else -1,
                        lp.id,
                    )
                )
        self._slots = slots
        over = [c for c, s in slots.items() if len(s) > l_max]
        if over:
            raise DimensionMismatch(
                f"component {over[0]} is traversed by {len(slots[over[0]])} lightpaths, l_max is {l_max}"
            )

    @property
    def traversed(self) -> list[int]:
        return sorted(self._slots)

    def plan(self, components) -> tuple[np.ndarray, ...]:
        rows, ks, l1, i1, l2, i2 = [], [], [], [], [], []
        for r, c in enumerate(components):
            entries = self._slots.get(c)
            if entries is None:
                raise Untraversed(f"component {c} is not traversed by any lightpath")
            for k, (a, ia, b, ib, _) in enumerate(entries):
                rows.append(r)
                ks.append(k)
                l1.append(a)
                i1.append(ia)
                l2.append(b)
                i2.append(ib)
        return tuple(np.array(v, dtype=np.int64) for v in (rows, ks, l1, i1, l2, i2))

    def features(self, components, pre: MonitorSnapshot, post: MonitorSnapshot, plan=None) -> np.ndarray:
        """Feature matrix of shape (len(components), 6 * l_max)."""
        rows, ks, l1, i1, l2, i2 = plan if plan is not None else self.plan(components)
        x_pre, x_post = pre.flat(), post.flat()
        out = np.zeros((len(components), self.l_max, TUPLE))
        has1, has2 = i1 >= 0, i2 >= 0
        out[rows, ks, 0] = l1
        out[rows, ks, 1] = np.where(has1, x_pre[i1], 0.0)
        out[rows, ks, 2] = np.where(has1, x_post[i1], 0.0)
        out[rows, ks, 3] = l2
        out[rows, ks, 4] = np.where(has2, x_pre[i2], 0.0)
        out[rows, ks, 5] = np.where(has2, x_post[i2], 0.0)
        return out.reshape(len(components), self.l_max * TUPLE)


def extract_features(
    component: int,
    lightpaths: list[Lightpath],
    deployment: Deployment,
    pre: MonitorSnapshot,
    post: MonitorSnapshot,
    l_max: int,
) -> np.ndarray:
    return FeatureIndex(lightpaths, deployment, l_max).features([component], pre, post)[0]


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    epochs: int = 100
    batch_size: int = 32  # 0 means full batch
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    hidden: int = 64
    # "delta" feeds (l1, p1/100, p1'-p1, l2, p2/100, p2'-p2) to the first
    # layer: a fixed reparametrisation that keeps few-dB changes visible next
    # to absolute levels of hundreds of dB.  "none" feeds the raw tuple.
    input_transform: str = "delta"

    def __post_init__(self):
        if self.input_transform not in TRANSFORMS:
            raise ConfigError(f"input_transform must be one of {TRANSFORMS}")


@dataclass
class MlpModel:
    w1: np.ndarray  # (hidden, inputs)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden,)
    b2: float
    l_max: int
    config: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def inputs(self) -> int:
        return self.w1.shape[1]

    @classmethod
    def init(cls, inputs: int, l_max: int, config: TrainConfig | None = None, seed: int = 0) -> "MlpModel":
        config = config or TrainConfig()
        rng = np.random.default_rng(seed)
        a1 = 1.0 / np.sqrt(inputs)
        a2 = 1.0 / np.sqrt(config.hidden)
        return cls(
            w1=rng.uniform(-a1, a1, (config.hidden, inputs)),
            b1=rng.uniform(-a1, a1, config.hidden),
            w2=rng.uniform(-a2, a2, config.hidden),
            b2=float(rng.uniform(-a2, a2)),
            l_max=l_max,
            config=config,
            seed=seed,
        )

    def params(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, np.array([self.b2])]

    def set_params(self, params) -> None:
        self.w1, self.b1, self.w2 = params[0], params[1], params[2]
        self.b2 = float(params[3][0])

    def to_dict(self) -> dict:
        return {
            "format": "roadm-rinn-mlp/1",
            "dims": [self.inputs, self.w1.shape[0], 1],
            "l_max": self.l_max,
            "seed": self.seed,
            "hyperparams": asdict(self.config),
            "w1": self.w1.ravel().tolist(),
            "b1": self.b1.tolist(),
            "w2": self.w2.tolist(),
            "b2": self.b2,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, doc) -> "MlpModel":
        n_in, hidden, _ = doc["dims"]
        return cls(
            w1=np.array(doc["w1"], dtype=float).reshape(hidden, n_in),
            b1=np.array(doc["b1"], dtype=float),
            w2=np.array(doc["w2"], dtype=float),
            b2=float(doc["b2"]),
            l_max=doc["l_max"],
            config=TrainConfig(**doc["hyperparams"]),
            seed=doc["seed"],
            meta=doc.get("meta", {}),
        )


def save_model(model: MlpModel, path) -> None:
    write_json(path, model.to_dict())


def load_model(path) -> MlpModel:
    return MlpModel.from_dict(read_json(path, "model"))


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def transform_inputs(x: np.ndarray, kind: str) -> np.ndarray:
    if kind == "none":
        return x
    z = x.reshape(x.shape[0], -1, TUPLE).copy()
    z[..., 2] -= z[..., 1]
    z[..., 5] -= z[..., 4]
    z[..., 1] /= LEVEL_SCALE_DB
    z[..., 4] /= LEVEL_SCALE_DB
    return z.reshape(x.shape)


def prepare(model: MlpModel, x) -> np.ndarray:
    """Validate feature rows and apply the model's input transform."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != model.inputs:
        raise DimensionMismatch(f"features have length {x.shape[1]}, model expects {model.inputs}")
    return transform_inputs(x, model.config.input_transform)


def _logits(model: MlpModel, z: np.ndarray) -> np.ndarray:
    return _sigmoid(z @ model.w1.T + model.b1) @ model.w2 + model.b2


def logits(model: MlpModel, x) -> np.ndarray:
    return _logits(model, prepare(model, x))


def forward(model: MlpModel, x) -> np.ndarray:
    """Probability of the faulty class for each row of ``x``."""
    return _sigmoid(logits(model, x))


def classify(model: MlpModel, x) -> np.ndarray:
    return forward(model, x) >= 0.5


def bce(logit, y) -> np.ndarray:
    """Binary cross-entropy on a clamped logit, per example."""
    z = np.clip(logit, -LOGIT_CLAMP, LOGIT_CLAMP)
    # -y log s(z) - (1 - y) log(1 - s(z)) == softplus(z) - y z
    return np.logaddexp(0.0, z) - y * z


def _loss_and_grads(model: MlpModel, x: np.ndarray, y: np.ndarray):
    n = x.shape[0]
    h = _sigmoid(x @ model.w1.T + model.b1)
    z = h @ model.w2 + model.b2
    loss = float(bce(z, y).mean())
    dz = (_sigmoid(np.clip(z, -LOGIT_CLAMP, LOGIT_CLAMP)) - y) * (np.abs(z) < LOGIT_CLAMP) / n
    g_w2 = h.T @ dz
    g_b2 = np.array([dz.sum()])
    dh = np.outer(dz, model.w2) * h * (1.0 - h)
    return loss, [dh.T @ x, dh.sum(axis=0), g_w2, g_b2]


def loss_and_grads(model: MlpModel, x, y) -> tuple[float, list[np.ndarray]]:
    """Mean loss and its gradients w.r.t. (w1, b1, w2, b2)."""
    return _loss_and_grads(model, prepare(model, x), np.asarray(y, dtype=float))


@dataclass
class TrainReport:
    epoch_losses: list[float]
    seed: int

    @property
    def final_loss(self) -> float:
        return self.epoch_losses[-1] if self.epoch_losses else float("nan")


def train(
    model: MlpModel,
    x,
    y,
    config: TrainConfig | None = None,
    seed: int = 0,
) -> tuple[MlpModel, TrainReport]:
    """Adam on mean binary cross-entropy.  Mutates and returns ``model``.

    Minibatches are drawn from a seeded permutation each epoch; the epoch
    loss is the example-weighted mean of the batch losses seen during it.
    """
    config = config or model.config
    model.config = config
    x = prepare(model, x)
    y = np.asarray(y, dtype=float)
    if x.shape[0] == 0:
        raise DimensionMismatch("no training pairs")
    if x.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"{x.shape[0]} feature rows but {y.shape[0]} labels")
    rng = np.random.default_rng(seed)
    n = x.shape[0]
    batch = n if config.batch_size <= 0 else min(config.batch_size, n)
    params = model.params()
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    b1, b2, lr, eps = config.beta1, config.beta2, config.learning_rate, config.adam_eps
    step = 0
    losses = []
    for epoch in range(config.epochs):
        order = rng.permutation(n) if batch < n else np.arange(n)
        total = 0.0
        for start in range(0, n, batch):
            idx = order[start : start + batch]
            loss, grads = _loss_and_grads(model, x[idx], y[idx])
            if not np.isfinite(loss) or not all(np.isfinite(g).all() for g in grads):
                raise NonFiniteLoss(f"non-finite loss {loss} at epoch {epoch + 1}, step {step + 1}")
            total += loss * len(idx)
            step += 1
            for k, g in enumerate(grads):
                m[k] = b1 * m[k] + (1 - b1) * g
                v[k] = b2 * v[k] + (1 - b2) * g * g
                m_hat = m[k] / (1 - b1**step)
                v_hat = v[k] / (1 - b2**step)
                params[k] = params[k] - lr * m_hat / (np.sqrt(v_hat) + eps)
            model.set_params(params)
        losses.append(total / n)
    model.seed = seed
    return model, TrainReport(losses, seed)
