import math

import numpy as np
import pytest
from scipy import stats

import wsproute as w
from wsproute import diffcore as dc
from wsproute.attention import (
    Policy,
    TrainHyper,
    featurize,
    greedy_rollout,
    load_policy,
    order_log_prob,
    paired_ttest,
    reinforce_train,
    sample_rollout,
    save_policy,
)

SMALL = dict(d=16, heads=2, layers=1, d_ff=32)


def small_policy(seed=0):
    return Policy(seed=seed, **SMALL)


def padded(inst, n_max):
    return w.build_instance(inst.problem, n_max=n_max)


# -- hyper / policy construction ----------------------------------------


def test_hyper_defaults_and_validation():
    h = TrainHyper()
    assert (h.epochs, h.batches_per_epoch, h.batch_size) == (100, 20, 5)
    with pytest.raises(ValueError):
        TrainHyper(alpha=0.0)
    with pytest.raises(ValueError):
        TrainHyper(d=10, heads=4)
    with pytest.raises(ValueError):
        Policy(d=10, heads=4)


def test_policy_init_deterministic():
    a, b = small_policy(3), small_policy(3)
    for k in a.params:
        assert np.array_equal(a.params[k].data, b.params[k].data)


def test_clone_is_independent_copy(sensitive_inst):
    a = small_policy()
    b = a.clone()
    assert greedy_rollout(a, sensitive_inst).order == greedy_rollout(b, sensitive_inst).order
    b.params["embed_w"].data += 1.0
    assert not np.array_equal(a.params["embed_w"].data, b.params["embed_w"].data)


# -- decoding ------------------------------------------------------------


def test_decode_probs_valid_distribution(sensitive_inst):
    inst = padded(sensitive_inst, 6)
    pol = small_policy()
    features, mask = featurize(inst)
    with dc.no_grad():
        emb = pol.encode(features, mask, training=False)
        visited = np.zeros(inst.n_max, dtype=bool)
        visited[0] = True
        probs = pol.decode_step(emb, mask, visited, last=0, first=0).data
    assert probs.shape == (6,)
    assert probs.sum() == pytest.approx(1.0)
    assert np.all(probs >= 0)
    assert probs[0] == pytest.approx(0.0)  # visited
    assert np.allclose(probs[3:], 0.0)  # padded slots


def test_decode_raises_when_nothing_selectable(sensitive_inst):
    pol = small_policy()
    features, mask = featurize(sensitive_inst)
    with dc.no_grad():
        emb = pol.encode(features, mask, training=False)
        with pytest.raises(ValueError):
            pol.decode_step(emb, mask, np.ones(sensitive_inst.n_max, dtype=bool),
                            None, None)


def test_greedy_rollout_valid_and_deterministic(congested_4pair_inst):
    inst = congested_4pair_inst
    pol = small_policy()
    a = greedy_rollout(pol, inst)
    b = greedy_rollout(pol, inst)
    assert a.order == b.order
    assert sorted(a.order) == list(range(inst.n_real))
    assert a.cost == w.route_sequence(inst, a.order).cost


def test_sample_rollout_deterministic_per_seed(sensitive_inst):
    pol = small_policy()
    a = sample_rollout(pol, sensitive_inst, np.random.default_rng(4), with_grad=False,
                       training=False)
    b = sample_rollout(pol, sensitive_inst, np.random.default_rng(4), with_grad=False,
                       training=False)
    assert a.order == b.order and a.cost == b.cost
    assert a.log_prob == pytest.approx(b.log_prob)


def test_sample_log_prob_matches_step_probs(sensitive_inst):
    pol = small_policy()
    ro = sample_rollout(pol, sensitive_inst, np.random.default_rng(0), with_grad=True,
                        training=False)
    manual = sum(math.log(sp[a]) for sp, a in zip(ro.step_probs, ro.order))
    assert ro.log_prob == pytest.approx(manual)
    assert ro.log_prob_tensor.item() == pytest.approx(manual)


def test_sampling_frequencies_match_probs(congested_4pair_inst):
    """First-step action frequencies over 1000 draws stay within 3 sigma of
    the policy's step-1 distribution."""
    inst = congested_4pair_inst
    pol = small_policy(seed=1)
    features, mask = featurize(inst)
    with dc.no_grad():
        emb = pol.encode(features, mask, training=False)
        probs = pol.decode_step(emb, mask, np.zeros(inst.n_max, dtype=bool),
                                None, None).data
    rng = np.random.default_rng(123)
    n = 1000
    counts = np.zeros(inst.n_max)
    for _ in range(n):
        ro = sample_rollout(pol, inst, rng, with_grad=False, training=False)
        counts[ro.order[0]] += 1
    for i in range(inst.n_max):
        sigma = math.sqrt(n * probs[i] * (1 - probs[i]))
        assert abs(counts[i] - n * probs[i]) <= 3 * sigma + 1e-9


def test_order_log_prob_matches_rollout(sensitive_inst):
    pol = small_policy()
    ro = sample_rollout(pol, sensitive_inst, np.random.default_rng(7), with_grad=True,
                        training=False)
    lp = order_log_prob(pol, sensitive_inst, ro.order, training=False)
    assert lp.item() == pytest.approx(ro.log_prob)


def test_policy_gradient_finite_difference(sensitive_inst):
    """Analytic gradient of log p(order) through the whole network agrees with
    central differences on selected weight matrices."""
    inst = sensitive_inst
    pol = Policy(d=8, heads=2, layers=1, d_ff=8, seed=0)
    order = greedy_rollout(pol, inst).order
    names = ["embed_w", "dec_out_k", "enc0_wq", "dec_ctx_w"]

    def f(xs):
        for name, x in zip(names, xs):
            pol.params[name] = x
            if name.endswith("_gamma") or name.endswith("_beta"):
                pass
        return order_log_prob(pol, inst, order, training=False)

    pts = [pol.params[n].data.copy() for n in names]
    assert dc.grad_check(f, pts) < 1e-4


# -- persistence ---------------------------------------------------------


def test_save_load_policy_roundtrip(tmp_path, congested_4pair_inst):
    pol = small_policy(seed=9)
    path = tmp_path / "policy.bin"
    save_policy(path, pol, n_max=7)
    loaded, n_max = load_policy(path)
    assert n_max == 7
    assert (loaded.d, loaded.heads, loaded.layers, loaded.d_ff) == (
        pol.d, pol.heads, pol.layers, pol.d_ff)
    a = greedy_rollout(pol, congested_4pair_inst)
    b = greedy_rollout(loaded, congested_4pair_inst)
    assert a.order == b.order and a.cost == b.cost


# -- paired t-test -------------------------------------------------------


def numeric_t_cdf(t, df):
    from scipy.integrate import trapezoid

    xs = np.linspace(-60.0, t, 400_001)
    return float(trapezoid(stats.t.pdf(xs, df=df), xs))


def test_paired_ttest_matches_numeric_integration():
    rng = np.random.default_rng(0)
    for _ in range(5):
        a = rng.normal(10, 2, size=8)
        b = a + rng.normal(0.5, 1.0, size=8)
        p = paired_ttest(a, b)
        diff = a - b
        t = diff.mean() / (diff.std(ddof=1) / math.sqrt(len(diff)))
        assert p == pytest.approx(numeric_t_cdf(t, df=len(diff) - 1), abs=1e-6)


def test_paired_ttest_directionality():
    better = [1.0, 2.0, 1.5, 1.2]
    worse = [5.0, 6.0, 5.5, 5.2]
    assert paired_ttest(better, worse) < 0.05
    assert paired_ttest(worse, better) > 0.95


def test_paired_ttest_zero_variance():
    assert paired_ttest([1.0, 1.0], [2.0, 2.0]) == 0.0
    assert paired_ttest([2.0, 2.0], [2.0, 2.0]) == 1.0
    assert paired_ttest([3.0, 3.0], [2.0, 2.0]) == 1.0


def test_paired_ttest_validates_input():
    with pytest.raises(ValueError):
        paired_ttest([1.0], [2.0])
    with pytest.raises(ValueError):
        paired_ttest([1.0, 2.0], [1.0, 2.0, 3.0])


# -- REINFORCE -----------------------------------------------------------


def _tiny_hyper(**kw):
    base = dict(epochs=2, batches_per_epoch=2, batch_size=2, lr=1e-3,
                seed=0, **SMALL)
    base.update(kw)
    return TrainHyper(**base)


def test_reinforce_lr_zero_keeps_params(sensitive_inst):
    h = _tiny_hyper(lr=0.0)
    trained, curve = reinforce_train([sensitive_inst], [sensitive_inst], h)
    fresh = Policy(h.d, h.heads, h.layers, h.d_ff, seed=h.seed)
    for k in fresh.params:
        assert np.allclose(trained.params[k].data, fresh.params[k].data)
    assert len(curve) == 2


def test_reinforce_curve_shape(sensitive_inst, congested_4pair_inst):
    h = _tiny_hyper(epochs=3)
    seen = []
    _, curve = reinforce_train([sensitive_inst], [sensitive_inst], h,
                               progress=seen.append)
    assert [r.epoch for r in curve] == [1, 2, 3]
    assert seen == curve
    for row in curve:
        assert np.isfinite(row.train_mean_cost) and np.isfinite(row.val_mean_cost)


def test_reinforce_deterministic(sensitive_inst):
    h = _tiny_hyper()
    a_pol, a_curve = reinforce_train([sensitive_inst], [sensitive_inst], h)
    b_pol, b_curve = reinforce_train([sensitive_inst], [sensitive_inst], h)
    assert a_curve == b_curve
    for k in a_pol.params:
        assert np.array_equal(a_pol.params[k].data, b_pol.params[k].data)


def test_reinforce_learns_order_sensitive_instance(sensitive_inst):
    """Sanity property: training on one 3-pair instance drives the greedy
    decode to the exhaustive optimum with high step probabilities."""
    inst = sensitive_inst
    _, opt = w.oracle_sequence(inst)
    h = _tiny_hyper(epochs=40, batches_per_epoch=10, batch_size=2, lr=1e-2)
    trained, curve = reinforce_train([inst], [inst], h)
    ro = greedy_rollout(trained, inst)
    assert ro.cost == opt.cost == 15
    # several orders are co-optimal, so the mass spreads over them; what must
    # be high is the probability of sampling *an* optimal sequence
    rng = np.random.default_rng(0)
    hits = sum(
        sample_rollout(trained, inst, rng, with_grad=False, training=False).cost == 15
        for _ in range(50)
    )
    assert hits / 50 > 0.9
    assert curve[-1].val_mean_cost <= curve[0].val_mean_cost
