"""Projection-head + prototype training loop.

The upstream feature extractor is frozen as the identity over precomputed
embeddings; only the MLP head and the prototype bank are optimized, with
plain SGD under a cosine learning-rate schedule. Everything runs in float64
and is bitwise deterministic for a fixed spec and seed.
"""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .data import EmbeddingDataset, _rng
from .losses import (
    SinkhornSpec,
    Temperatures,
    prototype_probs,
    sinkhorn_codes,
    softmax_backward,
    sup_con_loss,
    swapped_prediction_loss,
)
from .views import ViewSpec, make_view_batch

CHECKPOINT_MAGIC = b"GCDH"
CHECKPOINT_VERSION = 1

# Hidden-bias init scale; with unit-norm inputs the preactivations are O(1),
# so unit-scale biases shift a useful fraction of units without saturating.
INIT_BIAS_SCALE = 1.0


class TrainingDiverged(RuntimeError):
    def __init__(self, step: int):
        super().__init__(f"non-finite loss at step {step}")
        self.step = step


@dataclass
class ProjectionHead:
    """One-hidden-layer tanh MLP whose output rows are L2-normalized."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    @property
    def dim_in(self) -> int:
        return self.w1.shape[0]

    @property
    def dim_out(self) -> int:
        return self.w2.shape[1]

    def forward(self, x: np.ndarray) -> np.ndarray:
        z, _ = self.forward_cached(x)
        return z

    def forward_cached(self, x: np.ndarray):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[1] != self.dim_in:
            raise ValueError(f"head expects dim {self.dim_in}, got {x.shape[1]}")
        # Consume inputs direction-only so the head is scale-free in the
        # upstream feature magnitude.
        x = x / np.maximum(np.linalg.norm(x, axis=1, keepdims=True), 1e-300)
        h = np.tanh(x @ self.w1 + self.b1)
        a = h @ self.w2 + self.b2
        norms = np.linalg.norm(a, axis=1, keepdims=True)
        z = a / norms
        return z, (x, h, z, norms)

    def backward(self, cache, grad_z: np.ndarray) -> dict[str, np.ndarray]:
        x, h, z, norms = cache
        grad_a = (grad_z - z * (z * grad_z).sum(axis=1, keepdims=True)) / norms
        grad_h = grad_a @ self.w2.T
        grad_pre = grad_h * (1.0 - h * h)
        return {
            "w1": x.T @ grad_pre,
            "b1": grad_pre.sum(axis=0),
            "w2": h.T @ grad_a,
            "b2": grad_a.sum(axis=0),
        }

    def copy(self) -> "ProjectionHead":
        return ProjectionHead(
            self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy()
        )


@dataclass
class PrototypeBank:
    """K learnable soft cluster centers, renormalized after every step."""

    vectors: np.ndarray

    @property
    def k(self) -> int:
        return self.vectors.shape[0]

    def renormalize(self) -> None:
        self.vectors /= np.linalg.norm(self.vectors, axis=1, keepdims=True)

    def copy(self) -> "PrototypeBank":
        return PrototypeBank(self.vectors.copy())


@dataclass(frozen=True)
class TrainSpec:
    alpha: float = 0.3
    temps: Temperatures = field(default_factory=Temperatures)
    sinkhorn: SinkhornSpec = field(default_factory=SinkhornSpec)
    view: ViewSpec = field(default_factory=ViewSpec)
    batch_size: int = 256
    epochs: int = 30
    learning_rate: float = 0.1
    k_proto: int = 100
    hidden_dim: int = 64
    out_dim: int = 8
    seed: int = 0
    # Loss-term switches for ablation runs: a disabled term is still
    # evaluated and recorded but contributes zero gradient.
    enable_sup: bool = True
    enable_js: bool = True
    enable_swapped: bool = True

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.k_proto < 2:
            raise ValueError("k_proto must be >= 2")
        if self.hidden_dim < 1 or self.out_dim < 2:
            raise ValueError("hidden_dim must be >= 1 and out_dim >= 2")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    total: float
    sup: float
    js: float
    swap: float
    lr: float


def init_model(dim_in: int, spec: TrainSpec) -> tuple[ProjectionHead, PrototypeBank]:
    """Seeded head and prototype initialization."""
    rng = _rng(spec.seed, 0x4e17)
    # Inputs are unit-norm inside the head, so unit-variance first-layer
    # weights give O(1) preactivations.
    head = ProjectionHead(
        w1=rng.standard_normal((dim_in, spec.hidden_dim)),
        b1=rng.standard_normal(spec.hidden_dim) * INIT_BIAS_SCALE,
        w2=rng.standard_normal((spec.hidden_dim, spec.out_dim))
        / math.sqrt(spec.hidden_dim),
        b2=np.zeros(spec.out_dim),
    )
    protos = PrototypeBank(rng.standard_normal((spec.k_proto, spec.out_dim)))
    protos.renormalize()
    return head, protos


@dataclass
class BatchResult:
    sup: float
    js: float
    swap: float
    total: float
    grads: dict[str, np.ndarray]
    grad_protos: np.ndarray
    codes_w: np.ndarray
    codes_s: np.ndarray


def _js_batch(p: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean JS divergence between softmax rows and constant target rows."""
    mid = 0.5 * (p + targets)

    def ent(rows):
        safe = np.where(rows > 0, rows, 1.0)
        return -(rows * np.log(safe)).sum(axis=1)

    vals = ent(mid) - 0.5 * (ent(p) + ent(targets))
    with np.errstate(divide="ignore", invalid="ignore"):
        grad = 0.5 * np.log(p / mid)
    grad[~np.isfinite(grad)] = 0.0
    b = p.shape[0]
    return float(vals.mean()), grad / b


def batch_terms(
    head: ProjectionHead,
    protos: PrototypeBank,
    x_weak: np.ndarray,
    x_strong: np.ndarray,
    labels: np.ndarray,
    spec: TrainSpec,
    codes: tuple[np.ndarray, np.ndarray] | None = None,
) -> BatchResult:
    """Loss terms and parameter gradients for one mixed batch.

    The Sinkhorn codes are computed once from the current scores and then
    treated as constants; pass `codes` to pin them across repeated calls
    (finite-difference checks rely on this).
    """
    b = x_weak.shape[0]
    z_all, cache = head.forward_cached(np.vstack([x_weak, x_strong]))
    z_w, z_s = z_all[:b], z_all[b:]
    c = protos.vectors
    tau_u = spec.temps.tau_u
    p_w = prototype_probs(z_w, c, tau_u)
    p_s = prototype_probs(z_s, c, tau_u)
    if codes is None:
        q_w = sinkhorn_codes((z_w @ c.T).T, spec.sinkhorn)
        q_s = sinkhorn_codes((z_s @ c.T).T, spec.sinkhorn)
    else:
        q_w, q_s = codes

    w_sup = 1.0 if spec.enable_sup else 0.0
    w_js = spec.alpha if spec.enable_js else 0.0
    w_swap = (1.0 - spec.alpha) if spec.enable_swapped else 0.0

    js_val, js_grad_p = _js_batch(p_w, q_w.T * b)
    swap_val, swap_gpw, swap_gps = swapped_prediction_loss(p_w, p_s, q_w, q_s)

    grad_pw = w_js * js_grad_p + w_swap * swap_gpw
    grad_ps = w_swap * swap_gps
    grad_scores_w = softmax_backward(p_w, grad_pw) / tau_u
    grad_scores_s = softmax_backward(p_s, grad_ps) / tau_u
    grad_zw = grad_scores_w @ c
    grad_zs = grad_scores_s @ c
    grad_protos = grad_scores_w.T @ z_w + grad_scores_s.T @ z_s

    sup_val = 0.0
    labeled = labels >= 0
    n_lab = int(labeled.sum())
    if n_lab >= 2:
        z_sup = np.vstack([z_w[labeled], z_s[labeled]])
        lab2 = np.concatenate([labels[labeled], labels[labeled]])
        sup_val, sup_grad = sup_con_loss(z_sup, lab2, spec.temps.tau_sup)
        grad_zw[labeled] += w_sup * sup_grad[:n_lab]
        grad_zs[labeled] += w_sup * sup_grad[n_lab:]

    grads = head.backward(cache, np.vstack([grad_zw, grad_zs]))
    total = w_sup * sup_val + w_js * js_val + w_swap * swap_val
    return BatchResult(
        sup=sup_val,
        js=js_val,
        swap=swap_val,
        total=total,
        grads=grads,
        grad_protos=grad_protos,
        codes_w=q_w,
        codes_s=q_s,
    )


def train(
    dataset: EmbeddingDataset, spec: TrainSpec
) -> tuple[ProjectionHead, PrototypeBank, list[EpochStats]]:
    """Optimize head and prototypes on a split dataset.

    Per step: draw a shuffled mixed batch, build weak/strong views, compute
    the weighted loss, take one SGD step on the head and prototypes, then
    renormalize the prototype rows. History records the per-epoch mean of
    each raw loss term. Raises TrainingDiverged when the loss goes
    non-finite.
    """
    head, protos = init_model(dataset.dim, spec)
    history: list[EpochStats] = []
    n = dataset.n
    batch = min(spec.batch_size, n)
    steps_per_epoch = max(1, n // batch)
    total_steps = spec.epochs * steps_per_epoch
    shuffle_rng = _rng(spec.seed, 0xba7c)
    features = dataset.features
    labels = dataset.labels
    step = 0
    for epoch in range(spec.epochs):
        perm = shuffle_rng.permutation(n)
        sums = np.zeros(4)  # total, sup, js, swap
        lr_epoch = 0.0
        for k in range(steps_per_epoch):
            idx = perm[k * batch : (k + 1) * batch]
            lr = spec.learning_rate * 0.5 * (1.0 + math.cos(math.pi * step / total_steps))
            x_w, x_s = make_view_batch(features[idx], idx, spec.view, step)
            res = batch_terms(head, protos, x_w, x_s, labels[idx], spec)
            if not math.isfinite(res.total):
                raise TrainingDiverged(step)
            head.w1 -= lr * res.grads["w1"]
            head.b1 -= lr * res.grads["b1"]
            head.w2 -= lr * res.grads["w2"]
            head.b2 -= lr * res.grads["b2"]
            protos.vectors -= lr * res.grad_protos
            protos.renormalize()
            for arr in (head.w1, head.b1, head.w2, head.b2, protos.vectors):
                if not np.isfinite(arr).all():
                    raise TrainingDiverged(step)
            sums += (res.total, res.sup, res.js, res.swap)
            lr_epoch = lr
            step += 1
        sums /= steps_per_epoch
        history.append(
            EpochStats(
                epoch=epoch, total=sums[0], sup=sums[1], js=sums[2], swap=sums[3], lr=lr_epoch
            )
        )
    return head, protos, history


def embed(dataset: EmbeddingDataset, head: ProjectionHead) -> np.ndarray:
    """Unit-norm projected embeddings for every instance, in row order."""
    return head.forward(dataset.features)


# ---------------------------------------------------------------------------
# Checkpoints: "GCDH" magic, version, spec echo, float64 parameter arrays in
# declaration order (w1, b1, w2, b2, prototypes). Loads are bit-exact.
# ---------------------------------------------------------------------------


def _spec_to_kv(spec: TrainSpec, dim_in: int) -> str:
    pairs = [
        ("dim_in", dim_in),
        ("alpha", spec.alpha),
        ("tau_sup", spec.temps.tau_sup),
        ("tau_u", spec.temps.tau_u),
        ("sinkhorn_epsilon", spec.sinkhorn.epsilon),
        ("sinkhorn_iters", spec.sinkhorn.n_iters),
        ("weak_noise_sigma", spec.view.weak_noise_sigma),
        ("strong_noise_sigma", spec.view.strong_noise_sigma),
        ("strong_mask_fraction", spec.view.strong_mask_fraction),
        ("view_seed", spec.view.seed),
        ("batch_size", spec.batch_size),
        ("epochs", spec.epochs),
        ("learning_rate", spec.learning_rate),
        ("k_proto", spec.k_proto),
        ("hidden_dim", spec.hidden_dim),
        ("out_dim", spec.out_dim),
        ("seed", spec.seed),
        ("enable_sup", int(spec.enable_sup)),
        ("enable_js", int(spec.enable_js)),
        ("enable_swapped", int(spec.enable_swapped)),
    ]
    return "".join(f"{k}={v!r}\n" for k, v in pairs)


def _spec_from_kv(text: str) -> tuple[TrainSpec, int]:
    import ast

    kv = {}
    for line in text.splitlines():
        key, _, value = line.partition("=")
        kv[key] = ast.literal_eval(value)
    spec = TrainSpec(
        alpha=kv["alpha"],
        temps=Temperatures(tau_sup=kv["tau_sup"], tau_u=kv["tau_u"]),
        sinkhorn=SinkhornSpec(epsilon=kv["sinkhorn_epsilon"], n_iters=kv["sinkhorn_iters"]),
        view=ViewSpec(
            weak_noise_sigma=kv["weak_noise_sigma"],
            strong_noise_sigma=kv["strong_noise_sigma"],
            strong_mask_fraction=kv["strong_mask_fraction"],
            seed=kv["view_seed"],
        ),
        batch_size=kv["batch_size"],
        epochs=kv["epochs"],
        learning_rate=kv["learning_rate"],
        k_proto=kv["k_proto"],
        hidden_dim=kv["hidden_dim"],
        out_dim=kv["out_dim"],
        seed=kv["seed"],
        enable_sup=bool(kv["enable_sup"]),
        enable_js=bool(kv["enable_js"]),
        enable_swapped=bool(kv["enable_swapped"]),
    )
    return spec, kv["dim_in"]


def save_checkpoint(
    path, head: ProjectionHead, protos: PrototypeBank, spec: TrainSpec
) -> None:
    kv = _spec_to_kv(spec, head.dim_in).encode("utf-8")
    out = io.BytesIO()
    out.write(CHECKPOINT_MAGIC)
    out.write(struct.pack("<II", CHECKPOINT_VERSION, len(kv)))
    out.write(kv)
    for arr in (head.w1, head.b1, head.w2, head.b2, protos.vectors):
        out.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(out.getvalue())


def load_checkpoint(path) -> tuple[ProjectionHead, PrototypeBank, TrainSpec]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file (bad magic)")
    version, kv_len = struct.unpack_from("<II", raw, 4)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    spec, dim_in = _spec_from_kv(raw[12 : 12 + kv_len].decode("utf-8"))
    off = 12 + kv_len
    shapes = [
        (dim_in, spec.hidden_dim),
        (spec.hidden_dim,),
        (spec.hidden_dim, spec.out_dim),
        (spec.out_dim,),
        (spec.k_proto, spec.out_dim),
    ]
    arrays = []
    for shape in shapes:
        count = int(np.prod(shape))
        arrays.append(
            np.frombuffer(raw, dtype="<f8", count=count, offset=off)
            .reshape(shape)
            .astype(np.float64)
        )
        off += count * 8
    if off != len(raw):
        raise ValueError(f"{path}: trailing bytes after parameter arrays")
    head = ProjectionHead(w1=arrays[0], b1=arrays[1], w2=arrays[2], b2=arrays[3])
    return head, PrototypeBank(arrays[4]), spec
