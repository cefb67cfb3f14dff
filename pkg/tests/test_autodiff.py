import time

import numpy as np
import pytest

from wdmtwin import autodiff as ad
from wdmtwin.edfa import amplify, init_model
from wdmtwin.errors import ContractViolation, DomainError
from wdmtwin.fiber import FiberSpan, SpanState
from wdmtwin.grid import ChannelGrid, dbm_to_mw
from wdmtwin.link import Amp, LinkPath, Span, Toggles, snr_db_graph
from wdmtwin.optimize import smooth_min
from wdmtwin.trx import fit_trx


def test_product_rule():
    tape = ad.Tape()
    x, y = tape.var(2.0), tape.var(3.0)
    g = tape.backward(x * y)
    assert (g[x], g[y]) == (3.0, 2.0)


@pytest.mark.parametrize("op,at,expected", [(ad.log, 1.0, 1.0), (ad.asinh, 0.0, 1.0)])
def test_elementary_derivatives(op, at, expected):
    _, g = ad.grad(op, at)
    assert g == pytest.approx(expected, abs=1e-15)


def test_sum_and_square():
    tape = ad.Tape()
    leaves = [tape.var(float(i)) for i in range(5)]
    root = leaves[0]
    for v in leaves[1:]:
        root = root + v
    g = tape.backward(root)
    assert [g[v] for v in leaves] == [1.0] * 5
    _, g = ad.grad(lambda x: x * x, 3.0)
    assert g == 6.0


def test_backward_is_idempotent():
    tape = ad.Tape()
    x = tape.var(np.array([0.3, -1.2, 2.0]))
    y = ad.sum_(ad.tanh(x) * x + ad.exp(x))
    g1 = tape.backward(y)[x].copy()
    g2 = tape.backward(y)[x]
    assert np.array_equal(g1, g2)


def test_non_scalar_root_is_a_contract_violation():
    tape = ad.Tape()
    x = tape.var(np.ones(3))
    with pytest.raises(ContractViolation):
        tape.backward(x * 2.0)


def test_domain_errors_carry_op_tag():
    tape = ad.Tape()
    with pytest.raises(DomainError) as e:
        ad.log(tape.var(-1.0))
    assert e.value.op == "ln"
    with pytest.raises(DomainError) as e:
        ad.div(tape.var(1.0), 0.0)
    assert e.value.op == "div"


def test_gradcheck_examples():
    ok, _, _ = ad.gradcheck(lambda x: x[0] * x[1], [2.0, 3.0], tol=1e-6)
    assert ok
    ok, worst, err = ad.gradcheck(lambda x: ad.log(x[0]), [1e-12], tol=1e-6)
    assert not ok and worst == 0 and err > 1e-6


# (op, input sampler) pairs with inputs kept away from domain boundaries
OPS = {
    "add": (lambda x: ad.add(x, x * 0.5), lambda r, n: r.uniform(-5, 5, n)),
    "sub": (lambda x: ad.sub(x * 3.0, x * x), lambda r, n: r.uniform(-5, 5, n)),
    "mul": (lambda x: ad.mul(x, x), lambda r, n: r.uniform(-5, 5, n)),
    "div": (lambda x: ad.div(1.0, x), lambda r, n: r.choice([-1, 1], n) * r.uniform(0.1, 5, n)),
    "exp": (ad.exp, lambda r, n: r.uniform(-5, 3, n)),
    "ln": (ad.log, lambda r, n: r.uniform(1e-3 + 0.05, 50, n)),
    "pow10": (ad.pow10, lambda r, n: r.uniform(-3, 2, n)),
    "log10": (ad.log10, lambda r, n: r.uniform(0.05, 50, n)),
    "tanh": (ad.tanh, lambda r, n: r.uniform(-4, 4, n)),
    "sigmoid": (ad.sigmoid, lambda r, n: r.uniform(-8, 8, n)),
    "asinh": (ad.asinh, lambda r, n: r.uniform(-20, 20, n)),
    "max": (lambda x: ad.maximum(x, 0.2), lambda r, n: 0.2 + r.choice([-1, 1], n) * r.uniform(1e-3, 3, n)),
    "power": (lambda x: ad.power(x, 2.5), lambda r, n: r.uniform(0.1, 4, n)),
}


@pytest.mark.parametrize("name", sorted(OPS))
def test_every_op_passes_gradcheck_on_random_inputs(name):
    op, sample = OPS[name]
    x = sample(np.random.default_rng(7), 1000)
    # sum of an elementwise op: the gradient component i only depends on x_i
    ok, worst, err = ad.gradcheck(lambda v: ad.sum_(op(v)), x, tol=1e-6)
    assert ok, (name, x[worst], err)


def test_dot_and_matmul_gradients(rng):
    a = rng.normal(size=(3, 4))
    b = rng.normal(size=4)
    ok, _, _ = ad.gradcheck(lambda v: ad.dot(v, b), rng.normal(size=4))
    assert ok
    ok, _, _ = ad.gradcheck(lambda v: ad.sum_(ad.tanh(ad.matmul(a, v))), rng.normal(size=4))
    assert ok
    # gradient w.r.t. the matrix operand
    ok, _, _ = ad.gradcheck(lambda m: ad.sum_(ad.tanh(ad.matmul(m, b))), a)
    assert ok


def test_broadcast_gradients_are_summed():
    tape = ad.Tape()
    x = tape.var(np.array([1.0, 2.0]))
    s = tape.var(3.0)
    y = ad.sum_(x * s + s)
    g = tape.backward(y)
    assert np.allclose(g[x], [3.0, 3.0])
    assert g[s] == pytest.approx(1.0 + 2.0 + 2.0)


def test_shared_subexpression_accumulates():
    _, g = ad.grad(lambda x: (lambda u: u * u + u)(ad.exp(x)), 0.5)
    e = np.exp(0.5)
    assert g == pytest.approx(2 * e * e + e, rel=1e-14)


def test_randomized_edfa_forward_gradcheck(rng):
    grid = ChannelGrid.uniform(n_ch=8)
    model = init_model(grid, seed=3)
    params = {k: rng.normal(scale=0.3, size=v.shape) for k, v in model.params().items()}
    model = model.with_params(params)
    p0 = dbm_to_mw(rng.uniform(-12, -4, grid.n_ch))
    weights = rng.normal(size=grid.n_ch)

    def f(p):
        out = amplify(model, SpanState.launch(p), 15.0, grid)
        return ad.dot(10.0 * ad.log10(out.signal + out.ase), weights)

    ok, _, err = ad.gradcheck(f, p0, tol=1e-4)
    assert ok, err


def test_gradients_are_deterministic(rng):
    x = rng.normal(size=20)

    def f(v):
        return ad.sum_(ad.tanh(v) * ad.exp(v * 0.1)) / 3.0

    assert np.array_equal(ad.grad(f, x)[1], ad.grad(f, x)[1])


def test_six_span_cascade_backward_is_fast():
    grid = ChannelGrid.uniform()
    model = init_model(grid)
    els = []
    for _ in range(6):
        els += [Span(FiberSpan(75.0)), Amp(18.0, model)]
    path = LinkPath("six", grid, tuple(els))
    trx = fit_trx([(1525.0, 18.0), (1570.0, 17.0)])
    best = np.inf
    for _ in range(3):
        tape = ad.Tape()
        x = tape.var(dbm_to_mw(np.full(48, 1.2)))
        t0 = time.perf_counter()
        cost = -smooth_min(snr_db_graph(path, x, trx, Toggles()), 4.0)
        tape.backward(cost)
        best = min(best, time.perf_counter() - t0)
    assert best < 0.1
