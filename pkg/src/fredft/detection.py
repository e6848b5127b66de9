"""Desk-scale detection surface: synthetic dual-modality data, a toy dual
backbone and dense head, the composite loss (CIoU box term, varifocal-weighted
objectness and classification), an SGD trainer with warmup + cosine schedule,
and recall-based evaluation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .autodiff import backward
from .fusion import FDFAM, FreDFTBlock, FreDFTConfig
from .layers import Conv2d, ConvBlock, Module
from .tensor import ModalityPair, Tensor, no_grad

BOX_BASE_CELLS = 2.0  # decoded size at tw=0, in units of one grid cell
VFL_ALPHA = 0.75
VFL_GAMMA = 2.0
_P_EPS = 1e-12


class DegenerateBoxError(ValueError):
    pass


class TrainingDiverged(RuntimeError):
    def __init__(self, step: int, last: "LossBreakdown | None"):
        self.step = step
        self.last = last
        super().__init__(f"non-finite loss at step {step}; last finite: {last}")


@dataclass
class Box:
    cx: float
    cy: float
    w: float
    h: float
    class_id: int = 0
    score: float = 1.0

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise DegenerateBoxError(f"box with non-positive size: {self.w}x{self.h}")

    def as_array(self) -> np.ndarray:
        return np.array([self.cx, self.cy, self.w, self.h])


@dataclass
class LossBreakdown:
    l_box: float
    l_cls: float
    l_obj: float
    total: float

    def __post_init__(self):
        assert self.total == self.l_box + self.l_cls + self.l_obj


@dataclass
class SyntheticSample:
    rgb: np.ndarray  # (3, S, S)
    ir: np.ndarray  # (1, S, S)
    boxes: list[Box]
    visibility: list[str]  # per box: both / rgb_only / ir_only


@dataclass
class TrainConfig:
    lr0: float = 1e-2
    momentum: float = 0.937
    weight_decay: float = 5e-4
    warmup_steps: int = 100
    epochs: int = 25
    batch_size: int = 2
    seed: int = 0


@dataclass
class DataConfig:
    count: int = 160
    eval_count: int = 64
    image_size: int = 64
    num_classes: int = 2
    mix: tuple[float, float, float] = (0.4, 0.3, 0.3)
    noise_sigma: float = 0.05


# ---------------------------------------------------------------------------
# Box geometry
# ---------------------------------------------------------------------------


def iou_xywh(a, b) -> float:
    """Plain IoU of two (cx, cy, w, h) arrays."""
    ax1, ay1 = a[0] - a[2] / 2, a[1] - a[3] / 2
    ax2, ay2 = a[0] + a[2] / 2, a[1] + a[3] / 2
    bx1, by1 = b[0] - b[2] / 2, b[1] - b[3] / 2
    bx2, by2 = b[0] + b[2] / 2, b[1] + b[3] / 2
    iw = max(0.0, min(ax2, bx2) - max(ax1, bx1))
    ih = max(0.0, min(ay2, by2) - max(ay1, by1))
    inter = iw * ih
    union = a[2] * a[3] + b[2] * b[3] - inter
    return inter / union if union > 0 else 0.0


def _scalar(v: float) -> Tensor:
    return Tensor(np.array([v]))


def ciou_terms(pred4: Tensor, target: np.ndarray) -> tuple[Tensor, Tensor]:
    """CIoU loss and IoU of a differentiable (cx,cy,w,h) vector against a
    constant target box. The aspect-term weight alpha enters as a constant."""
    if target[2] <= 0 or target[3] <= 0:
        raise DegenerateBoxError(f"degenerate target box {target}")
    if pred4.data[2] <= 0 or pred4.data[3] <= 0:
        raise DegenerateBoxError(f"degenerate predicted box {pred4.data}")
    pcx, pcy, pw, ph = (T.vslice(pred4, i, i + 1) for i in range(4))
    tcx, tcy, tw, th = (float(v) for v in target)
    half = _scalar(0.5)
    px1, px2 = pcx - T.mul(half, pw), pcx + T.mul(half, pw)
    py1, py2 = pcy - T.mul(half, ph), pcy + T.mul(half, ph)
    tx1, tx2 = tcx - tw / 2, tcx + tw / 2
    ty1, ty2 = tcy - th / 2, tcy + th / 2

    zero = _scalar(0.0)
    iw = T.maximum(T.minimum(px2, _scalar(tx2)) - T.maximum(px1, _scalar(tx1)), zero)
    ih = T.maximum(T.minimum(py2, _scalar(ty2)) - T.maximum(py1, _scalar(ty1)), zero)
    inter = T.mul(iw, ih)
    union = T.mul(pw, ph) + (tw * th) - inter
    iou = T.div(inter, union)

    rho2 = T.power(pcx - tcx, 2.0) + T.power(pcy - tcy, 2.0)
    cw = T.maximum(px2, _scalar(tx2)) - T.minimum(px1, _scalar(tx1))
    ch = T.maximum(py2, _scalar(ty2)) - T.minimum(py1, _scalar(ty1))
    c2 = T.power(cw, 2.0) + T.power(ch, 2.0)

    coef = 4.0 / math.pi**2
    v = T.mul(_scalar(coef), T.power(T.arctan(_scalar(tw / th)) - T.arctan(T.div(pw, ph)), 2.0))
    v_val = v.data[0]
    denom = (1.0 - iou.data[0]) + v_val
    alpha = v_val / denom if denom > 1e-12 else 0.0

    ciou = _scalar(1.0) - iou + T.div(rho2, c2) + T.mul(_scalar(alpha), v)
    return ciou, iou


def ciou_loss(pred: Box, target: Box) -> float:
    loss, _ = ciou_terms(Tensor(pred.as_array()), target.as_array())
    return loss.item()


def varifocal_term(p: Tensor, q, alpha: float = VFL_ALPHA, gamma: float = VFL_GAMMA) -> Tensor:
    """Varifocal loss on clamped probabilities. `q` > 0 selects the
    quality-weighted positive branch (q may be a Tensor); q == 0 the
    down-weighted negative branch."""
    p = T.clamp(p, _P_EPS, 1.0 - _P_EPS)
    if isinstance(q, Tensor):
        one = Tensor(np.ones_like(q.data))
        ce = T.mul(q, T.log(p)) + T.mul(one - q, T.log(one - p))
        return T.neg(T.mul(q, ce))
    if q == 0.0:
        one = Tensor(np.ones_like(p.data))
        return T.mul(_coerce_like(alpha, p), T.mul(T.power(p, gamma), T.neg(T.log(one - p))))
    qv = Tensor(np.full_like(p.data, q))
    one = Tensor(np.ones_like(p.data))
    ce = T.mul(qv, T.log(p)) + T.mul(one - qv, T.log(one - p))
    return T.neg(T.mul(qv, ce))


def _coerce_like(v: float, ref: Tensor) -> Tensor:
    return Tensor(np.full_like(ref.data, v))


def varifocal_loss(p: float, q: float, alpha: float = VFL_ALPHA, gamma: float = VFL_GAMMA) -> float:
    out = varifocal_term(_scalar(p), q if q > 0 else 0.0, alpha, gamma)
    return out.item()


# ---------------------------------------------------------------------------
# Dense-head loss with center-cell assignment
# ---------------------------------------------------------------------------


def _cell_of(box: Box, hg: int, wg: int) -> tuple[int, int]:
    gy = min(int(box.cy * hg), hg - 1)
    gx = min(int(box.cx * wg), wg - 1)
    return gy, gx


def decode_box_tensors(raw4: Tensor, gy: int, gx: int, hg: int, wg: int):
    """Differentiable decode: sigmoid center offsets within the cell plus
    exponential size in cell units."""
    tx, ty, tw, th = (T.vslice(raw4, i, i + 1) for i in range(4))
    cx = T.mul(T.sigmoid(tx) + float(gx), _scalar(1.0 / wg))
    cy = T.mul(T.sigmoid(ty) + float(gy), _scalar(1.0 / hg))
    w = T.mul(T.exp(tw), _scalar(BOX_BASE_CELLS / wg))
    h = T.mul(T.exp(th), _scalar(BOX_BASE_CELLS / hg))
    return T.concat([cx, cy, w, h], axis=0)


def encode_box(box: Box, hg: int, wg: int) -> np.ndarray:
    """Inverse of decode for a box whose center lies strictly inside a cell."""
    gy, gx = _cell_of(box, hg, wg)
    fx = box.cx * wg - gx
    fy = box.cy * hg - gy
    if not (0.0 < fx < 1.0 and 0.0 < fy < 1.0):
        raise ValueError("box center must fall strictly inside a cell")
    logit = lambda u: math.log(u / (1.0 - u))
    return np.array(
        [
            logit(fx),
            logit(fy),
            math.log(box.w * wg / BOX_BASE_CELLS),
            math.log(box.h * hg / BOX_BASE_CELLS),
        ]
    )


def decode_predictions(
    preds: np.ndarray, num_classes: int, score_thresh: float = 0.5
) -> list[list[Box]]:
    """Non-differentiable decode of a dense head map into score-filtered,
    image-clamped boxes."""

    def sig(v):
        return 1.0 / (1.0 + np.exp(-v))

    b, ch, hg, wg = preds.shape
    out: list[list[Box]] = []
    for n in range(b):
        boxes = []
        for gy in range(hg):
            for gx in range(wg):
                score = sig(preds[n, 4, gy, gx])
                if score < score_thresh:
                    continue
                cx = (gx + sig(preds[n, 0, gy, gx])) / wg
                cy = (gy + sig(preds[n, 1, gy, gx])) / hg
                w = BOX_BASE_CELLS / wg * math.exp(min(preds[n, 2, gy, gx], 8.0))
                h = BOX_BASE_CELLS / hg * math.exp(min(preds[n, 3, gy, gx], 8.0))
                x1 = max(0.0, cx - w / 2)
                y1 = max(0.0, cy - h / 2)
                x2 = min(1.0, cx + w / 2)
                y2 = min(1.0, cy + h / 2)
                if x2 <= x1 or y2 <= y1:
                    continue
                cls = int(np.argmax(preds[n, 5 : 5 + num_classes, gy, gx])) if num_classes else 0
                boxes.append(
                    Box((x1 + x2) / 2, (y1 + y2) / 2, x2 - x1, y2 - y1, cls, score)
                )
        out.append(boxes)
    return out


def detection_loss(
    preds: Tensor, truths: list[list[Box]], num_classes: int
) -> tuple[LossBreakdown, Tensor]:
    """Composite loss over a dense head map with one positive cell per truth
    box (the cell containing its center)."""
    b, ch, hg, wg = preds.shape
    if ch != 5 + num_classes:
        raise T.ShapeError(f"head map has {ch} channels, expected {5 + num_classes}")
    pos_mask = np.zeros((b, 1, hg, wg))
    box_terms: list[Tensor] = []
    cls_terms: list[Tensor] = []
    obj_pos_terms: list[Tensor] = []
    for n, boxes in enumerate(truths):
        for box in boxes:
            gy, gx = _cell_of(box, hg, wg)
            if pos_mask[n, 0, gy, gx]:
                continue  # one positive per cell; extra boxes in a cell are dropped
            pos_mask[n, 0, gy, gx] = 1.0
            cell = T.select_cell(preds, n, gy, gx)
            raw_box = T.vslice(cell, 0, 4)
            pred4 = decode_box_tensors(raw_box, gy, gx, hg, wg)
            ciou, iou = ciou_terms(pred4, box.as_array())
            box_terms.append(ciou)
            q = T.clamp(iou, 0.0, 1.0)
            p_obj = T.sigmoid(T.vslice(cell, 4, 5))
            obj_pos_terms.append(varifocal_term(p_obj, q))
            if num_classes > 0:
                p_cls = T.sigmoid(T.vslice(cell, 5, 5 + num_classes))
                for c in range(num_classes):
                    pc = T.vslice(p_cls, c, c + 1)
                    if c == box.class_id:
                        cls_terms.append(varifocal_term(pc, q))
                    else:
                        cls_terms.append(varifocal_term(pc, 0.0))

    n_pos = len(box_terms)
    total_cells = b * hg * wg
    zero = _scalar(0.0)
    l_box = _mean_terms(box_terms) if n_pos else zero
    # normalized by cell count (like l_obj): keeps the quality-target gradient
    # of the varifocal weighting subordinate to the box loss
    l_cls = (
        T.mul(_sum_terms(cls_terms), _scalar(1.0 / total_cells)) if cls_terms else zero
    )
    obj_map = T.sigmoid(T.split_channels(preds, [4, 1, num_classes])[1])
    neg_map = varifocal_term(obj_map, 0.0)
    neg_masked = T.mul(neg_map, Tensor(1.0 - pos_mask))
    obj_sum = T.tsum(neg_masked)
    for term in obj_pos_terms:
        obj_sum = obj_sum + T.tsum(term)
    l_obj = T.mul(obj_sum, Tensor(np.asarray(1.0 / total_cells)))

    l_box_s = T.tsum(l_box)
    l_cls_s = T.tsum(l_cls)
    total = l_box_s + l_cls_s + l_obj
    lb, lc, lo = l_box_s.item(), l_cls_s.item(), l_obj.item()
    return LossBreakdown(lb, lc, lo, lb + lc + lo), total


def _sum_terms(terms: list[Tensor]) -> Tensor:
    acc = terms[0]
    for t in terms[1:]:
        acc = acc + t
    return acc


def _mean_terms(terms: list[Tensor]) -> Tensor:
    return T.mul(_sum_terms(terms), _scalar(1.0 / len(terms)))


# ---------------------------------------------------------------------------
# Synthetic dual-modality dataset
# ---------------------------------------------------------------------------


def _draw_rgb_object(img: np.ndarray, box: Box, rng) -> None:
    s = img.shape[1]
    x1 = max(0, int((box.cx - box.w / 2) * s))
    x2 = min(s, int((box.cx + box.w / 2) * s))
    y1 = max(0, int((box.cy - box.h / 2) * s))
    y2 = min(s, int((box.cy + box.h / 2) * s))
    gain = 0.85 + 0.15 * rng.random()
    if box.class_id == 0:
        color = np.array([0.95, 0.55, 0.25]) * gain
        img[:, y1:y2, x1:x2] = color[:, None, None]
    else:
        rows = np.arange(y1, y2)
        stripe = (rows // 3 % 2).astype(np.float64)
        base = np.array([0.25, 0.65, 0.95]) * gain
        patch = base[:, None, None] * (0.45 + 0.55 * stripe[None, :, None])
        img[:, y1:y2, x1:x2] = patch


def _draw_ir_object(img: np.ndarray, box: Box, rng) -> None:
    s = img.shape[1]
    yy = (np.arange(s) + 0.5) / s
    xx = (np.arange(s) + 0.5) / s
    sx = box.w / 4.0
    sy = box.h / 4.0
    gy = np.exp(-((yy - box.cy) ** 2) / (2 * sy * sy))
    gx = np.exp(-((xx - box.cx) ** 2) / (2 * sx * sx))
    blob = np.outer(gy, gx)
    amp = 0.9 + 0.1 * rng.random()
    if box.class_id == 1:
        core = np.outer(
            np.exp(-((yy - box.cy) ** 2) / (2 * (sy / 3) ** 2)),
            np.exp(-((xx - box.cx) ** 2) / (2 * (sx / 3) ** 2)),
        )
        blob = blob * (1.0 - 0.65 * core)
    img[0] += amp * blob


def generate_synthetic(
    count: int,
    seed: int,
    mix: tuple[float, float, float] = (0.4, 0.3, 0.3),
    image_size: int = 64,
    num_classes: int = 2,
    noise_sigma: float = 0.05,
) -> list[SyntheticSample]:
    """Reproducible textured-rectangle (RGB) / Gaussian-blob (IR) scenes with
    per-object visibility drawn from `mix` (both, rgb_only, ir_only)."""
    if abs(sum(mix) - 1.0) > 1e-9:
        raise ValueError(f"mix fractions must sum to 1, got {mix}")
    if image_size % 8:
        raise ValueError("image_size must be divisible by 8")
    cum = np.cumsum(mix)
    samples = []
    for idx in range(count):
        rng = np.random.default_rng((seed, idx))
        s = image_size
        rgb = np.clip(rng.normal(0.0, noise_sigma, (3, s, s)), -3 * noise_sigma, 3 * noise_sigma)
        ir = np.clip(rng.normal(0.0, noise_sigma, (1, s, s)), -3 * noise_sigma, 3 * noise_sigma)
        n_obj = int(rng.integers(1, 4))
        boxes: list[Box] = []
        visibility: list[str] = []
        for _ in range(n_obj):
            for _attempt in range(50):
                cx = rng.uniform(0.16, 0.84)
                cy = rng.uniform(0.16, 0.84)
                w = rng.uniform(0.18, 0.36)
                h = rng.uniform(0.18, 0.36)
                if all(
                    abs(cx - b.cx) + abs(cy - b.cy) > 0.34 for b in boxes
                ):
                    break
            else:
                continue
            cls = int(rng.integers(num_classes))
            box = Box(cx, cy, w, h, cls)
            u = rng.random()
            vis = "both" if u < cum[0] else ("rgb_only" if u < cum[1] else "ir_only")
            if vis in ("both", "rgb_only"):
                _draw_rgb_object(rgb, box, rng)
            if vis in ("both", "ir_only"):
                _draw_ir_object(ir, box, rng)
            boxes.append(box)
            visibility.append(vis)
        samples.append(SyntheticSample(rgb, ir, boxes, visibility))
    return samples


# ---------------------------------------------------------------------------
# Toy model
# ---------------------------------------------------------------------------


class ToyBackbone(Module):
    """Three pool->conv+BN+SiLU stages, overall stride 8."""

    def __init__(self, in_channels: int, channels=(16, 24, 32), *, rng):
        super().__init__()
        chain = []
        prev = in_channels
        for c in channels:
            chain.append(ConvBlock(prev, c, 3, rng=rng))
            prev = c
        self.stages = chain
        self.out_channels = prev

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[2] % 8 or x.shape[3] % 8:
            raise T.ShapeError(f"image dims must be divisible by 8, got {x.shape}")
        for stage in self.stages:
            x = stage(T.avg_pool2(x))
        return x


class ToyHead(Module):
    """1x1 conv emitting (4 box + 1 obj + K class) channels per cell."""

    def __init__(self, in_channels: int, num_classes: int, *, rng):
        super().__init__()
        self.num_classes = num_classes
        self.proj = Conv2d(in_channels, 5 + num_classes, 1, rng=rng)
        # start objectness biased negative so early training is stable
        self.proj.bias.data[4] = -2.0

    def forward(self, x: Tensor) -> Tensor:
        return self.proj(x)


VARIANTS = (
    "rgb_only",
    "ir_only",
    "baseline_add",
    "fdfam",
    "lfem_fdfam",
    "cgmm_fdfam",
    "full",
    "msda_full",
    "mlp_full",
)

_ALIASES = {"fused_fredft": "full"}


def _fusion_cfg(variant: str, base: FreDFTConfig) -> FreDFTConfig:
    flags = {
        "fdfam": (False, False, "mfda", "fdffl"),
        "lfem_fdfam": (True, False, "mfda", "fdffl"),
        "cgmm_fdfam": (False, True, "mfda", "fdffl"),
        "full": (True, True, "mfda", "fdffl"),
        "msda_full": (True, True, "msda", "fdffl"),
        "mlp_full": (True, True, "mfda", "mlp"),
    }[variant]
    return FreDFTConfig(
        channels=base.channels,
        height=base.height,
        width=base.width,
        conjugate_key=base.conjugate_key,
        cross_qk=base.cross_qk,
        dilation=base.dilation,
        deformable=base.deformable,
        attention=flags[2],
        ffl=flags[3],
        use_lfem=flags[0],
        use_cgmm=flags[1],
    )


class DetectionModel(Module):
    """Dual (or single) toy backbone plus fusion and dense head."""

    def __init__(
        self,
        variant: str,
        num_classes: int = 2,
        fusion_cfg: FreDFTConfig | None = None,
        *,
        rng,
    ):
        super().__init__()
        variant = _ALIASES.get(variant, variant)
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}; pick from {VARIANTS}")
        self.variant = variant
        self.num_classes = num_classes
        base = fusion_cfg or FreDFTConfig()
        c = base.channels
        if variant == "rgb_only":
            self.backbone_rgb = ToyBackbone(3, (16, 24, c), rng=rng)
        elif variant == "ir_only":
            self.backbone_ir = ToyBackbone(1, (16, 24, c), rng=rng)
        else:
            self.backbone_rgb = ToyBackbone(3, (16, 24, c), rng=rng)
            self.backbone_ir = ToyBackbone(1, (16, 24, c), rng=rng)
            if variant != "baseline_add":
                self.block = FreDFTBlock(_fusion_cfg(variant, base), rng=rng)
        self.head = ToyHead(c, num_classes, rng=rng)

    def fuse_features(self, rgb: Tensor | None, ir: Tensor | None, return_stages=False):
        stages = {}
        if self.variant == "rgb_only":
            fused = self.backbone_rgb(rgb)
            stages["backbone"] = ModalityPair(fused, fused)
        elif self.variant == "ir_only":
            fused = self.backbone_ir(ir)
            stages["backbone"] = ModalityPair(fused, fused)
        else:
            f_rgb = self.backbone_rgb(rgb)
            f_ir = self.backbone_ir(ir)
            pair = ModalityPair(f_rgb, f_ir)
            stages["backbone"] = pair
            if self.variant == "baseline_add":
                fused = f_rgb + f_ir
            else:
                fused, block_stages = self.block(pair, return_stages=True)
                stages.update(block_stages)
        stages["fused"] = fused
        return (fused, stages) if return_stages else fused

    def forward(self, rgb: Tensor | None, ir: Tensor | None) -> Tensor:
        return self.head(self.fuse_features(rgb, ir))


# ---------------------------------------------------------------------------
# Trainer
# ---------------------------------------------------------------------------


def lr_at(step: int, total_steps: int, cfg: TrainConfig) -> float:
    """Linear warmup to lr0 then cosine decay to lr0/100 at the final step."""
    warmup = min(cfg.warmup_steps, total_steps)
    if step < warmup:
        return cfg.lr0 * (step + 1) / warmup
    lr_min = cfg.lr0 / 100.0
    span = max(1, total_steps - 1 - warmup)
    t = min(1.0, (step - warmup) / span)
    return lr_min + 0.5 * (cfg.lr0 - lr_min) * (1.0 + math.cos(math.pi * t))


class SGD:
    """SGD with momentum and coupled weight decay."""

    def __init__(self, params: list[Tensor], momentum: float, weight_decay: float):
        self.params = params
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity = [np.zeros_like(p.data) for p in params]

    def step(self, lr: float) -> None:
        for p, v in zip(self.params, self.velocity):
            if p.grad is None:
                continue
            g = p.grad + self.weight_decay * p.data
            v *= self.momentum
            v += g
            p.data = p.data - lr * v

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


@dataclass
class TrainResult:
    model: DetectionModel
    history: list[tuple[int, float, LossBreakdown]] = field(default_factory=list)

    def moving_average(self, window: int = 100) -> float:
        tail = [b.total for _, _, b in self.history[-window:]]
        return float(np.mean(tail))

    def log_lines(self) -> list[str]:
        return [
            f"{step} {lr:.8f} {b.l_box:.8f} {b.l_cls:.8f} {b.l_obj:.8f} {b.total:.8f}"
            for step, lr, b in self.history
        ]


def _batched(dataset, order, batch_size):
    for lo in range(0, len(order), batch_size):
        yield [dataset[i] for i in order[lo : lo + batch_size]]


def train(
    variant: str,
    train_cfg: TrainConfig,
    data_cfg: DataConfig,
    fusion_cfg: FreDFTConfig | None = None,
    dataset: list[SyntheticSample] | None = None,
    max_steps: int | None = None,
    log_path=None,
) -> TrainResult:
    """Run the SGD loop; deterministic for a fixed seed in single-threaded
    mode. Raises TrainingDiverged on a non-finite loss."""
    if dataset is None:
        dataset = generate_synthetic(
            data_cfg.count,
            train_cfg.seed,
            data_cfg.mix,
            data_cfg.image_size,
            data_cfg.num_classes,
            data_cfg.noise_sigma,
        )
    rng = np.random.default_rng((train_cfg.seed, 101))
    model = DetectionModel(variant, data_cfg.num_classes, fusion_cfg, rng=rng)
    order_rng = np.random.default_rng((train_cfg.seed, 202))
    opt = SGD(model.parameters(), train_cfg.momentum, train_cfg.weight_decay)

    steps_per_epoch = math.ceil(len(dataset) / train_cfg.batch_size)
    total_steps = train_cfg.epochs * steps_per_epoch
    if max_steps is not None:
        total_steps = min(total_steps, max_steps)

    result = TrainResult(model=model)
    last_finite: LossBreakdown | None = None
    step = 0
    model.train()
    done = False
    for _epoch in range(train_cfg.epochs):
        if done:
            break
        order = order_rng.permutation(len(dataset))
        for batch in _batched(dataset, order, train_cfg.batch_size):
            if step >= total_steps:
                done = True
                break
            rgb = Tensor(np.stack([s.rgb for s in batch]))
            ir = Tensor(np.stack([s.ir for s in batch]))
            preds = model(rgb, ir)
            # targets are all annotated boxes; monomodal models simply cannot
            # see some of them
            truths = [s.boxes for s in batch]
            breakdown, total = detection_loss(preds, truths, data_cfg.num_classes)
            if not math.isfinite(breakdown.total):
                raise TrainingDiverged(step, last_finite)
            last_finite = breakdown
            lr = lr_at(step, total_steps, train_cfg)
            opt.zero_grad()
            backward(total)
            opt.step(lr)
            result.history.append((step, lr, breakdown))
            step += 1
    if log_path is not None:
        with open(log_path, "w") as fh:
            fh.write("\n".join(result.log_lines()) + "\n")
    return result


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


@dataclass
class EvalResult:
    recall: float
    mean_iou: float
    per_visibility: dict[str, float]
    matched: int
    total: int


def evaluate(
    model: DetectionModel,
    samples: list[SyntheticSample],
    score_thresh: float = 0.5,
    iou_thresh: float = 0.5,
    batch_size: int = 8,
) -> EvalResult:
    """Greedy one-to-one matching of score-filtered predictions to truth."""
    was_training = model.training
    model.eval()
    matched = 0
    total = 0
    iou_sum = 0.0
    vis_matched: dict[str, int] = {}
    vis_total: dict[str, int] = {}
    with no_grad():
        for lo in range(0, len(samples), batch_size):
            batch = samples[lo : lo + batch_size]
            rgb = Tensor(np.stack([s.rgb for s in batch]))
            ir = Tensor(np.stack([s.ir for s in batch]))
            preds = model(rgb, ir).data
            detections = decode_predictions(preds, model.num_classes, score_thresh)
            for s, dets in zip(batch, detections):
                dets = sorted(dets, key=lambda b: -b.score)
                taken = [False] * len(s.boxes)
                for det in dets:
                    best, best_iou = -1, iou_thresh
                    for i, tb in enumerate(s.boxes):
                        if taken[i]:
                            continue
                        iou = iou_xywh(det.as_array(), tb.as_array())
                        if iou >= best_iou:
                            best, best_iou = i, iou
                    if best >= 0:
                        taken[best] = True
                        matched += 1
                        iou_sum += best_iou
                        vis_matched[s.visibility[best]] = (
                            vis_matched.get(s.visibility[best], 0) + 1
                        )
                for vis in s.visibility:
                    vis_total[vis] = vis_total.get(vis, 0) + 1
                total += len(s.boxes)
    if was_training:
        model.train()
    per_vis = {
        k: vis_matched.get(k, 0) / v for k, v in sorted(vis_total.items())
    }
    return EvalResult(
        recall=matched / total if total else 0.0,
        mean_iou=iou_sum / matched if matched else 0.0,
        per_visibility=per_vis,
        matched=matched,
        total=total,
    )
