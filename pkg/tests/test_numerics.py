import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedsemrec.errors import ShapeError, StateError
from fedsemrec.numerics import (
    Adam,
    AdamState,
    Embedding,
    LayerNorm,
    Linear,
    Mlp2,
    MultiHeadSelfAttention,
    Parameter,
    Rng,
    Tensor,
    adam_step,
    backward,
    cross_entropy,
    grad_check,
    matmul,
    mean,
    mul,
    relu,
    sigmoid,
    softmax,
    softplus,
    tanh,
    tensor_sum,
)


def naive_matmul(a, b):
    """Triple-loop product oracle."""
    out = np.zeros((a.shape[0], b.shape[1]), dtype=np.float64)
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            for k in range(a.shape[1]):
                out[i, j] += float(a[i, k]) * float(b[k, j])
    return out


class TestMatmul:
    def test_identity(self):
        m = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32)
        out = matmul(Tensor(np.eye(2, dtype=np.float32)), Tensor(m))
        assert np.array_equal(out.value, m)

    def test_hand_arithmetic(self):
        out = matmul(Tensor([[1.0, 2.0]]), Tensor([[3.0], [4.0]]))
        assert out.value.shape == (1, 1)
        assert out.value[0, 0] == pytest.approx(11.0)

    def test_against_naive_oracle(self):
        rng = Rng(11)
        a, b = rng.normal((5, 7)), rng.normal((7, 3))
        out = matmul(Tensor(a), Tensor(b)).value
        assert np.allclose(out, naive_matmul(a, b), atol=1e-6)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            matmul(Tensor(np.zeros((2, 3), dtype=np.float32)), Tensor(np.zeros((2, 3), dtype=np.float32)))


class TestGradCheck:
    def test_quadratic_exact(self):
        x = Parameter(np.array([[3.0]], dtype=np.float32))
        err = grad_check(lambda: tensor_sum(mul(x, x)), [x], h=1e-3)
        assert err < 1e-6
        backward(tensor_sum(mul(x, x)))
        assert x.grad[0, 0] == pytest.approx(6.0, abs=1e-4)

    def test_softmax_row_sum_is_constant(self):
        x = Parameter(Rng(3).normal((2, 6)))
        err = grad_check(lambda: tensor_sum(softmax(x)), [x], h=1e-3)
        assert err < 1e-5

    def test_rejects_bad_step(self):
        x = Parameter(np.ones((1, 1), dtype=np.float32))
        with pytest.raises(ValueError):
            grad_check(lambda: tensor_sum(x), [x], h=0.0)


def _layer_case(name):
    rng = Rng(17)
    if name == "linear":
        lin = Linear(4, 3, rng)
        x = Tensor(rng.normal((5, 4)))
        return lambda: tensor_sum(mul(lin(x), lin(x))), lin.parameters()
    if name == "embedding":
        emb = Embedding(6, 4, rng)
        idx = np.array([[1, 2, 5], [0, 3, 3]])
        return lambda: tensor_sum(mul(emb(idx), emb(idx))), emb.parameters()
    if name == "layer_norm":
        ln = LayerNorm(5)
        x = Parameter(rng.normal((3, 5)))
        return lambda: tensor_sum(mul(ln(x), ln(x))), [x] + ln.parameters()
    if name == "softmax":
        x = Parameter(rng.normal((3, 5)))
        w = Tensor(rng.normal((3, 5)))
        return lambda: tensor_sum(mul(softmax(x), w)), [x]
    if name == "attention":
        att = MultiHeadSelfAttention(8, 2, rng)
        x = Parameter(rng.normal((2, 4, 8)))
        causal = np.triu(np.full((4, 4), -1e9, dtype=np.float32), k=1)[None, None]
        return lambda: tensor_sum(mul(att(x, causal), att(x, causal))), [x] + att.parameters()
    if name == "mean_pool":
        x = Parameter(rng.normal((3, 4, 5)))
        return lambda: tensor_sum(mul(mean(x, axis=1), mean(x, axis=1))), [x]
    if name == "sigmoid":
        x = Parameter(rng.normal((4, 4)))
        return lambda: tensor_sum(sigmoid(x)), [x]
    if name == "tanh":
        x = Parameter(rng.normal((4, 4)))
        return lambda: tensor_sum(tanh(x)), [x]
    if name == "softplus":
        x = Parameter(rng.normal((4, 4)))
        return lambda: tensor_sum(softplus(x)), [x]
    if name == "relu":
        x = Parameter(rng.normal((4, 4)))
        return lambda: tensor_sum(mul(relu(x), relu(x))), [x]
    if name == "mlp":
        mlp = Mlp2(4, 6, 3, rng, activation="tanh")
        x = Tensor(rng.normal((5, 4)))
        return lambda: tensor_sum(mul(mlp(x), mlp(x))), mlp.parameters()
    if name == "cross_entropy":
        x = Parameter(rng.normal((3, 4, 7)))
        targets = np.array([[1, 2, 0, 6], [3, 3, 1, 0], [5, 4, 2, 2]])
        mask = np.array([[1, 1, 0, 1], [1, 0, 1, 1], [1, 1, 1, 0]])
        return lambda: cross_entropy(x, targets, mask), [x]
    raise AssertionError(name)


@pytest.mark.parametrize(
    "layer",
    [
        "linear",
        "embedding",
        "layer_norm",
        "softmax",
        "attention",
        "mean_pool",
        "sigmoid",
        "tanh",
        "softplus",
        "relu",
        "mlp",
        "cross_entropy",
    ],
)
def test_layer_gradients(layer):
    f, params = _layer_case(layer)
    assert grad_check(f, params, h=1e-3) < 1e-4


class TestSoftmaxProperties:
    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.integers(1, 6), st.integers(1, 9))
    def test_rows_are_distributions(self, seed, rows, cols):
        x = Rng(seed).normal((rows, cols), std=3.0)
        out = softmax(Tensor(x)).value
        assert (out >= 0).all()
        assert np.allclose(out.sum(axis=-1), 1.0, atol=1e-6)

    def test_log_softmax_oracle(self):
        rng = Rng(5)
        logits = rng.normal((4, 9))
        targets = np.array([0, 3, 8, 2])
        got = cross_entropy(Tensor(logits), targets, reduction="sum").item()
        x64 = logits.astype(np.float64)
        logp = x64 - np.log(np.exp(x64 - x64.max(-1, keepdims=True)).sum(-1, keepdims=True)) - x64.max(-1, keepdims=True)
        want = -logp[np.arange(4), targets].sum()
        assert got == pytest.approx(want, rel=1e-5)


class TestAdam:
    def test_zero_grad_means_no_change(self):
        p = Parameter(np.array([1.0, 2.0], dtype=np.float32))
        state = AdamState.for_param(p, lr=0.1)
        before = p.value.copy()
        adam_step(p, state)
        assert np.array_equal(p.value, before)

    def test_first_step_magnitude_is_lr(self):
        p = Parameter(np.array([0.0], dtype=np.float32))
        p.grad[...] = 1.0
        state = AdamState.for_param(p, lr=0.1)
        adam_step(p, state)
        assert p.value[0] == pytest.approx(-0.1, rel=1e-4)

    def test_quadratic_descent_is_monotone(self):
        p = Parameter(np.array([1.0], dtype=np.float32))
        opt = Adam([p], lr=0.05)
        prev = abs(float(p.value[0]))
        for _ in range(10):
            opt.zero_grad()
            loss = mul(p, p)
            backward(tensor_sum(loss))
            opt.step()
            cur = abs(float(p.value[0]))
            assert cur < prev
            prev = cur

    def test_frozen_param_rejected_and_untouched(self):
        p = Parameter(np.array([1.0], dtype=np.float32))
        p.freeze()
        state = AdamState.for_param(p)
        with pytest.raises(StateError):
            adam_step(p, state)
        opt = Adam([p], lr=0.5)
        opt.step()
        assert p.value[0] == 1.0

    def test_state_shape_mismatch(self):
        p = Parameter(np.ones(3, dtype=np.float32))
        q = Parameter(np.ones(2, dtype=np.float32))
        state = AdamState.for_param(q)
        with pytest.raises(StateError):
            adam_step(p, state)

    def test_step_count_increments(self):
        p = Parameter(np.ones(2, dtype=np.float32))
        state = AdamState.for_param(p)
        for expected in (1, 2, 3):
            adam_step(p, state)
            assert state.step_count == expected


class TestDeterminism:
    def _train(self, seed):
        rng = Rng(seed)
        lin = Linear(4, 2, rng.derive("init"))
        data = rng.derive("data").normal((8, 4))
        opt = Adam(lin.parameters(), lr=1e-2)
        for _ in range(5):
            opt.zero_grad()
            out = lin(Tensor(data))
            backward(tensor_sum(mul(out, out)))
            opt.step()
        return [p.value.copy() for p in lin.parameters()]

    def test_same_seed_bitwise_identical(self):
        a, b = self._train(99), self._train(99)
        for x, y in zip(a, b):
            assert np.array_equal(x, y)

    def test_different_seed_differs(self):
        a, b = self._train(99), self._train(100)
        assert any(not np.array_equal(x, y) for x, y in zip(a, b))


class TestParameterContract:
    def test_zero_grad_resets(self):
        p = Parameter(np.ones((2, 2), dtype=np.float32))
        backward(tensor_sum(mul(p, p)))
        assert np.abs(p.grad).sum() > 0
        p.zero_grad()
        assert np.array_equal(p.grad, np.zeros((2, 2), dtype=np.float32))

    def test_frozen_params_record_no_graph(self):
        p = Parameter(np.ones((2, 2), dtype=np.float32))
        p.freeze()
        out = mul(p, p)
        assert not out.requires_grad

    def test_all_values_finite_after_ops(self):
        rng = Rng(1)
        x = Tensor(rng.normal((6, 6), std=10.0))
        for op in (softmax, sigmoid, tanh, softplus, relu):
            assert np.isfinite(op(x).value).all()
