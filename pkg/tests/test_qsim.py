import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grovernoise.circuit import Circuit, gate_matrix, transpile_to_basis, u3_matrix
from grovernoise.errors import CapacityError, ValidationError
from grovernoise.noise import compile_program, depolarizing_channel
from grovernoise.qsim import (
    Op,
    RandomStream,
    apply_kraus,
    apply_unitary,
    init_state,
    measure,
    partial_trace,
    probabilities,
    reset_qubits,
    run_density,
    run_pure,
    run_trajectories,
)

H = gate_matrix("h")
X = gate_matrix("x")
CX = gate_matrix("cx")


def _bell(backend):
    s = apply_unitary(init_state(2, backend), H, (0,))
    return apply_unitary(s, CX, (0, 1))


def test_init_state_and_capacity():
    s = init_state(3, "vector")
    assert s.data[0] == 1 and s.data.shape == (8,)
    rho = init_state(2, "density")
    assert rho.data.shape == (4, 4) and rho.data[0, 0] == 1
    with pytest.raises(CapacityError):
        init_state(11, "density")
    with pytest.raises(CapacityError):
        init_state(15, "vector")


@pytest.mark.parametrize("backend", ["vector", "density"])
def test_bell_state_probabilities(backend):
    p = probabilities(_bell(backend))
    assert np.allclose(p, [0.5, 0, 0, 0.5])


def test_apply_unitary_validation():
    s = init_state(2, "vector")
    with pytest.raises(ValidationError):
        apply_unitary(s, np.array([[1, 1], [0, 1]]), (0,))
    with pytest.raises(ValidationError):
        apply_unitary(s, CX, (1, 1))
    with pytest.raises(ValidationError):
        apply_unitary(s, H, (2,))


@settings(max_examples=40, deadline=None)
@given(st.floats(-math.pi, math.pi), st.floats(-math.pi, math.pi), st.floats(-math.pi, math.pi),
       st.integers(0, 2), st.sampled_from(["vector", "density"]))
def test_unitary_preserves_invariants(th, ph, la, q, backend):
    s = apply_unitary(init_state(3, backend), H, (0,))
    s = apply_unitary(s, u3_matrix(th, ph, la), (q,))
    s = apply_unitary(s, CX, ((q + 1) % 3, q))
    s.check(1e-10)


def test_kraus_completeness_is_checked():
    with pytest.raises(ValidationError):
        apply_kraus(init_state(1, "density"), [np.eye(2), np.eye(2)], (0,))


def test_kraus_on_density_matches_mixture():
    rho = apply_unitary(init_state(1, "density"), H, (0,))
    out = apply_kraus(rho, depolarizing_channel(0.3), (0,))
    expected = 0.7 * rho.data + 0.3 * np.eye(2) / 2
    assert np.allclose(out.data, expected, atol=1e-12)


def test_kraus_on_vector_needs_rng_and_samples_one_branch():
    psi = init_state(1, "vector")
    with pytest.raises(ValidationError):
        apply_kraus(psi, depolarizing_channel(0.3), (0,))
    out = apply_kraus(psi, depolarizing_channel(0.3), (0,), RandomStream(1))
    out.check()


def test_measure_collapses_and_reports_probability():
    record, post = measure(_bell("vector"), (0,), RandomStream(5))
    assert record.probability == pytest.approx(0.5)
    bit = record.outcome_bits[0]
    assert probabilities(post)[3 * bit] == pytest.approx(1.0)


def test_measure_is_deterministic_given_seed():
    a = measure(_bell("density"), (0, 1), RandomStream(11, 2))[0]
    b = measure(_bell("density"), (0, 1), RandomStream(11, 2))[0]
    assert a == b


@pytest.mark.parametrize("backend", ["vector", "density"])
def test_reset_returns_to_zero(backend):
    s = apply_unitary(init_state(2, backend), X, (1,))
    s = reset_qubits(s, (1,), RandomStream(0))
    assert probabilities(s)[0] == pytest.approx(1.0)


def test_partial_trace_of_bell_is_mixed():
    red = partial_trace(_bell("density").data, [0], 2)
    assert np.allclose(red, np.eye(2) / 2)
    rho = apply_unitary(init_state(2, "density"), X, (1,)).data
    assert np.allclose(partial_trace(rho, [1], 2), np.diag([0, 1]))


def _ghz_program(n=3, measure_mid=False):
    c = Circuit(n, num_clbits=n)
    c.h(0)
    for q in range(n - 1):
        c.cx(q, q + 1)
    if measure_mid:
        c.measure(0, 0)
        c.h(0)
        c.measure(0, 1)
        c.measure(2, 2)
    else:
        for q in range(n):
            c.measure(q, q)
    return transpile_to_basis(c)


def test_density_matches_pure_without_noise():
    circ = _ghz_program()
    ops = compile_program(circ)
    a = run_density(ops, 3, 3)
    b = run_pure(ops, 3, 3)
    assert np.allclose(a, b, atol=1e-12)
    assert a[0] == pytest.approx(0.5) and a[7] == pytest.approx(0.5)


def test_mid_circuit_measurement_branches():
    circ = _ghz_program(measure_mid=True)
    ops = compile_program(circ)
    p = run_density(ops, 3, 3)
    assert np.allclose(p, run_pure(ops, 3, 3), atol=1e-12)
    # bit0 and bit2 agree, bit1 is uniform
    for idx in range(8):
        agree = (idx & 1) == ((idx >> 2) & 1)
        assert p[idx] == pytest.approx(0.25 if agree else 0.0)


def test_trajectories_are_deterministic_and_converge():
    circ = _ghz_program()
    ops = compile_program(circ)
    a = run_trajectories(ops, 3, 3, 4000, seed=9)
    b = run_trajectories(ops, 3, 3, 4000, seed=9)
    assert np.array_equal(a, b) and a.sum() == 4000
    assert abs(a[0] / 4000 - 0.5) < 0.05


def test_trajectory_noise_matches_density():
    ops = [Op("unitary", (0,), (H,)), Op("kraus", (0,), depolarizing_channel(0.4).operators),
           Op("unitary", (0,), (H,)), Op("measure", (0,), clbit=0)]
    exact = run_density(ops, 1, 1)
    counts = run_trajectories(ops, 1, 1, 20000, seed=3)
    assert exact[1] == pytest.approx(0.2)
    assert abs(counts[1] / 20000 - exact[1]) < 0.02


def test_trajectory_input_validation():
    with pytest.raises(ValidationError):
        run_trajectories([], 1, 1, 0, seed=0)
    with pytest.raises(CapacityError):
        run_density([], 11, 0)
