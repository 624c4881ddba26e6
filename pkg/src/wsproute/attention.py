"""Attention encoder-decoder sequencing policy trained with REINFORCE.

The encoder is a transformer-style stack (multi-head attention + feed-forward,
skip connections, batch norm); the decoder is a single MHA glimpse over a
context of [graph mean | last chosen | first chosen] followed by tanh-clipped
single-head scores. Training uses a greedy rollout baseline refreshed by a
one-sided paired t-test.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import diffcore as dc
from .decompose import RoutingInstance
from .diffcore import BatchNorm, Tensor, no_grad
from .pattern import route_sequence

NEG_INF = -1e9
LOGIT_CLIP = 10.0


@dataclass(frozen=True)
class TrainHyper:
    epochs: int = 100
    batches_per_epoch: int = 20
    batch_size: int = 5
    lr: float = 1e-4
    alpha: float = 0.05
    seed: int = 0
    d: int = 64
    heads: int = 8
    layers: int = 2
    d_ff: int = 256

    def __post_init__(self):
        if not (0 < self.alpha < 1):
            raise ValueError("alpha must be in (0,1)")
        if self.d % self.heads != 0:
            raise ValueError("heads must divide d")


class TrainingDiverged(RuntimeError):
    pass


class Policy:
    """All encoder/decoder weights plus architecture dimensions."""

    def __init__(self, d: int = 64, heads: int = 8, layers: int = 2,
                 d_ff: int = 256, seed: int = 0):
        if d % heads != 0:
            raise ValueError("heads must divide d")
        self.d, self.heads, self.layers, self.d_ff = d, heads, layers, d_ff
        rng = np.random.default_rng(seed)
        s = 1.0 / math.sqrt(d)

        def p(*shape):
            return Tensor(rng.uniform(-s, s, size=shape), requires_grad=True)

        self.params: dict[str, Tensor] = {}
        self.bns: dict[str, BatchNorm] = {}

        def reg(name, t):
            self.params[name] = t
            return t

        reg("embed_w", p(7, d))
        reg("embed_b", p(d))
        for l in range(layers):
            for w in ("wq", "wk", "wv", "wo"):
                reg(f"enc{l}_{w}", p(d, d))
            reg(f"enc{l}_ff_w1", p(d, d_ff))
            reg(f"enc{l}_ff_b1", p(d_ff))
            reg(f"enc{l}_ff_w2", p(d_ff, d))
            reg(f"enc{l}_ff_b2", p(d))
            for bn_name in (f"enc{l}_bn1", f"enc{l}_bn2"):
                bn = BatchNorm(d)
                self.bns[bn_name] = bn
                reg(f"{bn_name}_gamma", bn.gamma)
                reg(f"{bn_name}_beta", bn.beta)
        reg("dec_ctx_w", p(3 * d, d))
        for w in ("wq", "wk", "wv", "wo"):
            reg(f"dec_glimpse_{w}", p(d, d))
        reg("dec_out_k", p(d, d))
        reg("dec_v_last", p(d))
        reg("dec_v_first", p(d))

    def clone(self) -> "Policy":
        other = Policy(self.d, self.heads, self.layers, self.d_ff)
        other.load_state(self.state_dict())
        return other

    def state_dict(self) -> dict[str, np.ndarray]:
        out = {k: v.data.copy() for k, v in self.params.items()}
        for name, bn in self.bns.items():
            out[f"{name}_rmean"] = bn.running_mean.copy()
            out[f"{name}_rvar"] = bn.running_var.copy()
        out["_meta"] = np.array([self.d, self.heads, self.layers, self.d_ff], dtype=float)
        return out

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for k, t in self.params.items():
            t.data = state[k].copy()
        for name, bn in self.bns.items():
            bn.running_mean = state[f"{name}_rmean"].copy()
            bn.running_var = state[f"{name}_rvar"].copy()

    # -- forward passes -------------------------------------------------

    def _mha(self, h: Tensor, mask: np.ndarray, prefix: str) -> Tensor:
        n = h.shape[0]
        d, H = self.d, self.heads
        dh = d // H
        scale = 1.0 / math.sqrt(dh)

        def heads_of(t):  # (n,d) -> (H,n,dh)
            return dc.transpose(dc.reshape(t, (n, H, dh)), (1, 0, 2))

        q = heads_of(h @ self.params[f"{prefix}_wq"])
        k = heads_of(h @ self.params[f"{prefix}_wk"])
        v = heads_of(h @ self.params[f"{prefix}_wv"])
        scores = dc.mul(q @ dc.transpose(k, (0, 2, 1)), scale)  # (H,n,n)
        key_mask = np.broadcast_to(~mask, (H, n, n))
        scores = dc.masked_fill(scores, key_mask, NEG_INF)
        attn = dc.softmax(scores, axis=-1)
        out = attn @ v  # (H,n,dh)
        out = dc.reshape(dc.transpose(out, (1, 0, 2)), (n, d))
        return out @ self.params[f"{prefix}_wo"]

    def encode(self, features01: np.ndarray, mask: np.ndarray, training: bool) -> Tensor:
        """Project 7-dim nodes to d and run the attention layers."""
        h = Tensor(features01) @ self.params["embed_w"] + self.params["embed_b"]
        for l in range(self.layers):
            h = self.bns[f"enc{l}_bn1"](h + self._mha(h, mask, f"enc{l}"), training)
            ff = dc.relu(h @ self.params[f"enc{l}_ff_w1"] + self.params[f"enc{l}_ff_b1"])
            ff = ff @ self.params[f"enc{l}_ff_w2"] + self.params[f"enc{l}_ff_b2"]
            h = self.bns[f"enc{l}_bn2"](h + ff, training)
        return h

    def decode_step(self, emb: Tensor, mask: np.ndarray, visited: np.ndarray,
                    last: int | None, first: int | None) -> Tensor:
        """Probability vector over all n_max slots for the next pair."""
        n = emb.shape[0]
        selectable = mask & ~visited
        if not selectable.any():
            raise ValueError("decode_step: no selectable node")
        d, H = self.d, self.heads
        dh = d // H

        weights = (mask / mask.sum()).astype(np.float64)
        graph_mean = dc.reshape(Tensor(weights) @ emb, (1, d))
        h_last = (dc.index_rows(emb, [last]) if last is not None
                  else dc.reshape(self.params["dec_v_last"], (1, d)))
        h_first = (dc.index_rows(emb, [first]) if first is not None
                   else dc.reshape(self.params["dec_v_first"], (1, d)))
        context = dc.concat([graph_mean, h_last, h_first], axis=1) @ self.params["dec_ctx_w"]

        def heads_of(t, rows):  # (rows,d) -> (H,rows,dh)
            return dc.transpose(dc.reshape(t, (rows, H, dh)), (1, 0, 2))

        q = heads_of(context @ self.params["dec_glimpse_wq"], 1)
        k = heads_of(emb @ self.params["dec_glimpse_wk"], n)
        v = heads_of(emb @ self.params["dec_glimpse_wv"], n)
        scores = dc.mul(q @ dc.transpose(k, (0, 2, 1)), 1.0 / math.sqrt(dh))  # (H,1,n)
        scores = dc.masked_fill(scores, np.broadcast_to(~selectable, (H, 1, n)), NEG_INF)
        glimpse = dc.reshape(dc.transpose(dc.softmax(scores, axis=-1) @ v, (1, 0, 2)), (1, d))
        query = glimpse @ self.params["dec_glimpse_wo"]  # (1,d)

        keys = emb @ self.params["dec_out_k"]  # (n,d)
        logits = dc.reshape(keys @ dc.reshape(query, (d,)), (n,)) * (1.0 / math.sqrt(d))
        logits = dc.mul(dc.tanh(logits), LOGIT_CLIP)
        logits = dc.masked_fill(logits, ~selectable, NEG_INF)
        return dc.softmax(logits, axis=-1)


def featurize(inst: RoutingInstance) -> tuple[np.ndarray, np.ndarray]:
    """Scale raw node features into [0,1]: x by width, y by height, net index
    by the net count."""
    p = inst.problem
    f = inst.features.astype(np.float64).copy()
    f[:, [0, 1, 3, 4]] /= max(p.wsp.width, 1)
    f[:, [2, 5]] /= max(p.wsp.height, 1)
    f[:, 6] /= max(len(p.nets), 1)
    return f, inst.mask.copy()


@dataclass
class Rollout:
    order: list[int]
    log_prob: float
    cost: int
    log_prob_tensor: Tensor | None = None
    step_probs: list[np.ndarray] = field(default_factory=list)


def _decode_loop(policy: Policy, inst: RoutingInstance, emb: Tensor,
                 mask: np.ndarray, choose, with_grad: bool) -> Rollout:
    n_real = inst.n_real
    visited = np.zeros(inst.n_max, dtype=bool)
    order: list[int] = []
    step_probs: list[np.ndarray] = []
    logp_terms: list[Tensor] = []
    last = first = None
    for _ in range(n_real):
        probs = policy.decode_step(emb, mask, visited, last, first)
        a = choose(probs.data)
        step_probs.append(probs.data.copy())
        if with_grad:
            logp_terms.append(dc.log(dc.index_rows(probs, [a])))
        order.append(int(a))
        visited[a] = True
        last = int(a)
        if first is None:
            first = int(a)
    cost = route_sequence(inst, order).cost
    if with_grad:
        lp_tensor = dc.sum_(dc.concat(logp_terms, axis=0))
        lp = lp_tensor.item()
    else:
        lp_tensor = None
        lp = float(sum(math.log(sp[a]) for sp, a in zip(step_probs, order)))
    return Rollout(order=order, log_prob=lp, cost=cost,
                   log_prob_tensor=lp_tensor, step_probs=step_probs)


def sample_rollout(policy: Policy, inst: RoutingInstance, rng: np.random.Generator,
                   with_grad: bool = True, training: bool = True) -> Rollout:
    features, mask = featurize(inst)

    def choose(p):
        return int(rng.choice(len(p), p=p / p.sum()))

    if with_grad:
        emb = policy.encode(features, mask, training)
        return _decode_loop(policy, inst, emb, mask, choose, True)
    with no_grad():
        emb = policy.encode(features, mask, training)
        return _decode_loop(policy, inst, emb, mask, choose, False)


def greedy_rollout(policy: Policy, inst: RoutingInstance) -> Rollout:
    """Deterministic argmax decode in eval mode (frozen batch-norm stats)."""
    features, mask = featurize(inst)
    with no_grad():
        emb = policy.encode(features, mask, training=False)
        return _decode_loop(policy, inst, emb, mask, lambda p: int(np.argmax(p)), False)


def order_log_prob(policy: Policy, inst: RoutingInstance, order,
                   training: bool = True) -> Tensor:
    """log p(order) as a differentiable scalar; used by gradient checks."""
    features, mask = featurize(inst)
    emb = policy.encode(features, mask, training)
    visited = np.zeros(inst.n_max, dtype=bool)
    terms = []
    last = first = None
    for a in order:
        probs = policy.decode_step(emb, mask, visited, last, first)
        terms.append(dc.log(dc.index_rows(probs, [a])))
        visited[a] = True
        last = int(a)
        if first is None:
            first = int(a)
    return dc.sum_(dc.concat(terms, axis=0))


def save_policy(path, policy: Policy, n_max: int) -> None:
    state = policy.state_dict()
    state["_meta_n_max"] = np.array(float(n_max))
    dc.save_arrays(path, state)


def load_policy(path) -> tuple[Policy, int]:
    state = dc.load_arrays(path)
    d, heads, layers, d_ff = (int(v) for v in state["_meta"])
    policy = Policy(d, heads, layers, d_ff)
    policy.load_state(state)
    return policy, int(state["_meta_n_max"])


def paired_ttest(costs_a, costs_b) -> float:
    """One-sided paired t-test, H1: mean(a - b) < 0."""
    a = np.asarray(costs_a, dtype=float)
    b = np.asarray(costs_b, dtype=float)
    if a.shape != b.shape or a.size < 2:
        raise ValueError("paired t-test needs two equal-length samples, n >= 2")
    diff = a - b
    sd = diff.std(ddof=1)
    if sd == 0.0:
        return 0.0 if diff.mean() < 0 else 1.0
    t = diff.mean() / (sd / math.sqrt(diff.size))
    return float(stats.t.cdf(t, df=diff.size - 1))


@dataclass
class CurveRow:
    epoch: int
    train_mean_cost: float
    val_mean_cost: float
    baseline_refreshed: bool


def reinforce_train(train_insts: list[RoutingInstance],
                    val_insts: list[RoutingInstance],
                    hyper: TrainHyper,
                    progress=None) -> tuple[Policy, list[CurveRow]]:
    """Full training loop; returns the best-validation policy snapshot."""
    if not train_insts:
        raise ValueError("empty training set")
    rng = np.random.default_rng(hyper.seed)
    policy = Policy(hyper.d, hyper.heads, hyper.layers, hyper.d_ff,
                    seed=hyper.seed)
    baseline = policy.clone()
    opt = dc.AdamState(policy.params, lr=hyper.lr)
    curve: list[CurveRow] = []
    best_val = None
    best_state = policy.state_dict()

    for epoch in range(1, hyper.epochs + 1):
        epoch_costs: list[float] = []
        for _batch in range(hyper.batches_per_epoch):
            batch = [train_insts[int(rng.integers(len(train_insts)))]
                     for _ in range(hyper.batch_size)]
            terms = []
            for inst in batch:
                ro = sample_rollout(policy, inst, rng, with_grad=True, training=True)
                bl = greedy_rollout(baseline, inst)
                adv = float(ro.cost - bl.cost)
                terms.append(dc.mul(ro.log_prob_tensor, adv))
                epoch_costs.append(ro.cost)
            loss = dc.mul(dc.sum_(dc.concat([dc.reshape(t, (1,)) for t in terms], axis=0)),
                          1.0 / hyper.batch_size)
            if not np.isfinite(loss.data):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}")
            dc.backward(loss)
            opt.step()

        val_costs = [greedy_rollout(policy, inst).cost for inst in val_insts]
        bl_costs = [greedy_rollout(baseline, inst).cost for inst in val_insts]
        val_mean = float(np.mean(val_costs)) if val_costs else float("nan")
        refreshed = False
        if len(val_costs) >= 2 and paired_ttest(val_costs, bl_costs) <= hyper.alpha:
            baseline = policy.clone()
            refreshed = True
        if val_costs and (best_val is None or val_mean < best_val):
            best_val = val_mean
            best_state = policy.state_dict()
        curve.append(CurveRow(epoch, float(np.mean(epoch_costs)), val_mean, refreshed))
        if progress is not None:
            progress(curve[-1])

    best = Policy(hyper.d, hyper.heads, hyper.layers, hyper.d_ff)
    best.load_state(best_state)
    return best, curve
