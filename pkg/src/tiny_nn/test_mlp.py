import numpy as np
import pytest

from src.errors import ShapeError
from src.tiny_nn.mlp import Mlp, backward, flatten, forward, mlp_init, soft_update, unflatten


def _single_layer(activation="identity"):
    return Mlp((1, 1), [np.array([[2.0]])], [np.array([1.0])], activation)


def _two_layer():
    w0 = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    w1 = np.array([[2.0, 3.0, 4.0]])
    return Mlp((2, 3, 1), [w0, w1], [np.zeros(3), np.array([0.5])], "identity")


def test_forward_affine():
    assert forward(_single_layer(), np.array([3.0])) == pytest.approx([7.0])


def test_forward_tanh_head():
    assert forward(_single_layer("tanh"), np.array([3.0])) == pytest.approx([np.tanh(7.0)])


def test_forward_batch_matches_rows():
    mlp = mlp_init((3, 5, 4, 2), "tanh", seed=1)
    x = np.random.default_rng(2).standard_normal((6, 3))
    batch = forward(mlp, x)
    assert batch.shape == (6, 2)
    for row, expected in zip(x, batch):
        assert forward(mlp, row) == pytest.approx(expected, rel=1e-14)


def test_forward_rejects_wrong_input_size():
    with pytest.raises(ShapeError):
        forward(mlp_init((3, 4, 1), seed=0), np.zeros(2))


def test_backward_single_layer_closed_form():
    grads, dx = backward(_single_layer(), np.array([3.0]), np.array([0.5]))
    #dW = u x, db = u, dx = W u
    assert grads == pytest.approx([1.5, 0.5])
    assert dx == pytest.approx([1.0])


def test_backward_two_layer_by_hand():
    mlp = _two_layer()
    x = np.array([1.0, -2.0])
    assert forward(mlp, x) == pytest.approx([2.5])
    grads, dx = backward(mlp, x, np.array([1.0]))
    expected = np.concatenate((
        [2.0, -4.0, 0.0, 0.0, 0.0, 0.0],  # W0
        [2.0, 0.0, 0.0],  # b0
        [1.0, 0.0, 0.0],  # W1
        [1.0],  # b1
    ))
    assert grads == pytest.approx(expected)
    assert dx == pytest.approx([2.0, 0.0])


def test_backward_sums_batch_rows():
    mlp = mlp_init((2, 6, 1), "tanh", seed=3)
    x = np.random.default_rng(4).standard_normal((5, 2))
    u = np.random.default_rng(5).standard_normal((5, 1))
    grads, dx = backward(mlp, x, u)
    total = sum(backward(mlp, row, u_row)[0] for row, u_row in zip(x, u))
    assert grads == pytest.approx(total, rel=1e-12, abs=1e-15)
    assert dx.shape == (5, 2)
    assert dx[2] == pytest.approx(backward(mlp, x[2], u[2])[1], rel=1e-12)


def test_backward_rejects_bad_upstream():
    mlp = mlp_init((2, 3, 1), seed=0)
    with pytest.raises(ShapeError):
        backward(mlp, np.zeros((4, 2)), np.zeros((3, 1)))


def test_init_shapes_and_scales():
    mlp = mlp_init((2, 20, 20, 1), "tanh", seed=0)
    assert [w.shape for w in mlp.weights] == [(20, 2), (20, 20), (1, 20)]
    assert all(not b.any() for b in mlp.biases)
    assert np.max(np.abs(mlp.weights[0])) <= 1.0 / np.sqrt(2)
    assert np.max(np.abs(mlp.weights[-1])) <= 3e-3
    assert mlp.n_params == 2 * 20 + 20 + 20 * 20 + 20 + 20 + 1


def test_init_is_seeded():
    a = mlp_init((3, 100, 75, 1), seed=7)
    b = mlp_init((3, 100, 75, 1), seed=7)
    assert np.array_equal(flatten(a), flatten(b))
    assert not np.array_equal(flatten(a), flatten(mlp_init((3, 100, 75, 1), seed=8)))


@pytest.mark.parametrize("sizes", [(3, 1), (3,), (3, 0, 1)])
def test_init_rejects_bad_sizes(sizes):
    with pytest.raises(ShapeError):
        mlp_init(sizes)


def test_init_rejects_unknown_activation():
    with pytest.raises(ValueError):
        mlp_init((2, 3, 1), "sigmoid")


def test_flatten_order_and_unflatten():
    mlp = _two_layer()
    vector = flatten(mlp)
    assert vector[:6] == pytest.approx(mlp.weights[0].ravel())
    assert vector[-1] == 0.5
    rebuilt = unflatten(mlp, vector * 2.0)
    assert rebuilt.weights[1] == pytest.approx(mlp.weights[1] * 2.0)
    assert mlp.weights[1][0, 0] == 2.0
    with pytest.raises(ShapeError):
        unflatten(mlp, vector[:-1])


def test_soft_update_endpoints():
    target = mlp_init((2, 4, 1), seed=1)
    source = mlp_init((2, 4, 1), seed=2)
    assert np.array_equal(flatten(soft_update(target, source, 0.0)), flatten(target))
    assert np.array_equal(flatten(soft_update(target, source, 1.0)), flatten(source))


def test_soft_update_geometric_identity():
    tau = 1e-3
    target = mlp_init((2, 20, 20, 1), seed=1)
    source = mlp_init((2, 20, 20, 1), seed=2)
    start = flatten(target) - flatten(source)
    for _ in range(1000):
        target = soft_update(target, source, tau)
    assert flatten(target) - flatten(source) == pytest.approx((1.0 - tau) ** 1000 * start, rel=1e-9, abs=1e-12)


def test_soft_update_validation():
    target = mlp_init((2, 4, 1), seed=1)
    with pytest.raises(ValueError):
        soft_update(target, target, 1.5)
    with pytest.raises(ShapeError):
        soft_update(target, mlp_init((2, 5, 1), seed=1), 0.1)
