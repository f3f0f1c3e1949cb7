import json
import math
from functools import partial

import numpy as np
import pytest
from hypothesis import given, strategies as st

from coherent_collapse import fock, oscillator as osc
from coherent_collapse.sde_engine import (DiffusionModel, IntegratorBlowup,
                                          TrajectoryRecord, TruncationLeakageError,
                                          observable_recorder, run_ensemble,
                                          run_trajectory, step_count, step_linear,
                                          step_physical, step_physical_raw,
                                          weak_order_check)

P = osc.OscillatorParams(omega=1.0, lam=1.0, n_max=24)


def superposition(n_max=24, alpha=2.0):
    return osc.branch_superposition((0, alpha), (1, 1), n_max)


def test_model_needs_a_channel():
    with pytest.raises(ValueError):
        DiffusionModel((3,), lambda v: v, ())


def test_vacuum_step_only_picks_up_a_phase():
    model = osc.build_model(P)
    vac = fock.vacuum(24)
    out = step_physical(vac, model, 0.01, [0.3])
    assert abs(out.amplitudes[0]) == pytest.approx(1, abs=1e-15)
    assert np.all(out.amplitudes[1:] == 0)
    assert np.angle(out.amplitudes[0]) == pytest.approx(-0.5 * 0.01)


def test_zero_step_is_identity():
    psi = superposition()
    assert step_physical(psi, osc.build_model(P), 0.0, [1.0]) is psi


@pytest.mark.parametrize("scheme", ["exponential", "euler"])
def test_renormalized_steps_stay_unit_norm(scheme):
    model = osc.build_model(P)
    v = superposition().amplitudes
    rng = np.random.default_rng(0)
    for _ in range(200):
        v = step_physical_raw(v, model, 0.01, rng.normal(0, 0.1, 1), scheme)
        assert abs(np.linalg.norm(v) - 1) < 1e-12


def test_exponential_scheme_keeps_coherent_states_coherent():
    p = osc.OscillatorParams(omega=1.0, lam=0.5, n_max=40)
    psi = fock.coherent_state(1.5 + 0.5j, 40)
    out = step_physical(psi, osc.build_model(p), 0.01, [0.2])
    alpha, fid = osc.fit_coherent(out)
    assert 1 - fid < 1e-12
    assert alpha == pytest.approx(osc.evolved_alpha(1.5 + 0.5j, p, 0.01), abs=1e-9)


def test_euler_one_step_coherent_closure_is_second_order():
    # infidelity / dt^2 stays bounded as dt shrinks
    p = osc.OscillatorParams(omega=1.0, lam=0.5, n_max=40)
    psi = fock.coherent_state(1.5, 40)
    ratios = []
    for dt in (0.02, 0.01, 0.005):
        out = step_physical(psi, osc.build_model(p), dt, [math.sqrt(dt)], scheme="euler")
        ratios.append((1 - osc.fit_coherent(out)[1]) / dt ** 2)
    assert max(ratios) < 10
    assert ratios[-1] <= ratios[0]


def _gauss_hermite_norm_change(model, v, dt, scheme):
    # exact expectation of ||psi'||^2 - 1 over dB ~ N(0, dt): the integrand is quadratic in dB
    x, w = np.polynomial.hermite_e.hermegauss(6)
    vals = [np.linalg.norm(step_physical_raw(v, model, dt, np.array([math.sqrt(dt) * xi]),
                                             scheme, renormalize=False)) ** 2 - 1 for xi in x]
    return float(np.dot(w, vals) / w.sum())


@pytest.mark.parametrize("scheme", ["exponential", "euler"])
def test_unnormalized_norm_change_has_zero_mean_at_first_order(scheme):
    model = osc.build_model(P)
    v = superposition().amplitudes
    d1 = _gauss_hermite_norm_change(model, v, 0.004, scheme)
    d2 = _gauss_hermite_norm_change(model, v, 0.002, scheme)
    assert abs(d1) < 0.05 * 0.004
    assert d1 / d2 == pytest.approx(4, rel=0.1)      # O(dt^2)


def test_linear_vacuum_weight_is_constant():
    model = osc.build_linear_model(P)
    rec = run_trajectory(fock.vacuum(24), model, 1.0, 0.01, 3, form="linear")
    np.testing.assert_allclose(rec.weights, 1.0, atol=1e-14)


def test_schroedinger_limit_weight_drifts_at_second_order():
    p = osc.OscillatorParams(omega=1.0, lam=0.0, n_max=24)
    model = osc.build_linear_model(p)
    phi = superposition()
    drifts = []
    for dt in (0.01, 0.005):
        _, w = step_linear(phi, model, dt, [0.0], scheme="euler")
        drifts.append(w - 1)
    assert drifts[0] / drifts[1] == pytest.approx(4, rel=1e-3)


def test_q_weight_is_a_martingale():
    # the weight has volatility 2 l Re<a>; keep it moderate so the SE is trustworthy
    model = osc.build_linear_model(osc.OscillatorParams(1.0, 0.5, 24))
    psi = superposition(alpha=1.0)
    ens = run_ensemble(psi, model, 0.5, 0.01, 5, 1000, None, form="linear")
    W = np.vstack([r.weights for r in ens])
    mean = W.mean(axis=0)
    se = W.std(axis=0, ddof=1) / math.sqrt(len(W))
    assert np.all(np.abs(mean - 1) <= 3 * se + 1e-12)


def test_girsanov_reweighted_q_mean_matches_p_mean():
    rec = observable_recorder({"P0": partial(osc.projection, n=0), "N": osc.number})
    p = osc.OscillatorParams(1.0, 0.5, 24)
    psi = superposition(alpha=1.0)
    T, dt, n = 0.5, 0.01, 1500
    pe = run_ensemble(psi, osc.build_model(p), T, dt, 21, n, rec)
    qe = run_ensemble(psi, osc.build_linear_model(p), T, dt, 22, n, rec, form="linear")
    for name in ("P0", "N"):
        p_vals = np.array([r[name][-1] for r in pe])
        w = np.array([r.weights[-1] for r in qe])
        q_vals = w * np.array([r[name][-1] for r in qe])
        se = math.hypot(p_vals.std(ddof=1), q_vals.std(ddof=1)) / math.sqrt(n)
        assert abs(p_vals.mean() - q_vals.mean()) <= 3 * se


def test_run_trajectory_vacuum_records_zero_number():
    rec = run_trajectory(fock.vacuum(24), osc.build_model(P), 1.0, 0.01, 1,
                         observable_recorder({"N": osc.number}))
    assert np.all(rec["N"] == 0)
    assert rec.n_steps == 100 and len(rec.times) == 101


def test_same_seed_is_bit_identical_and_seed_matters():
    rec = observable_recorder({"N": osc.number, "a": osc.annihilation_mean})
    a = run_trajectory(superposition(), osc.build_model(P), 0.5, 0.01, 9, rec)
    b = run_trajectory(superposition(), osc.build_model(P), 0.5, 0.01, 9, rec)
    c = run_trajectory(superposition(), osc.build_model(P), 0.5, 0.01, 10, rec)
    assert a.to_csv() == b.to_csv()
    assert a.final_state.amplitudes.tobytes() == b.final_state.amplitudes.tobytes()
    assert a.to_csv() != c.to_csv()


def test_ensemble_is_worker_count_independent():
    rec = observable_recorder({"N": osc.number})
    e1 = run_ensemble(superposition(), osc.build_model(P), 0.2, 0.01, 4, 6, rec, workers=1)
    e3 = run_ensemble(superposition(), osc.build_model(P), 0.2, 0.01, 4, 6, rec, workers=3)
    assert [r.to_csv() for r in e1] == [r.to_csv() for r in e3]


def test_time_grid_must_divide():
    with pytest.raises(ValueError):
        step_count(1.0, 0.3)
    with pytest.raises(ValueError):
        step_count(1.0, 2.0)
    assert step_count(1.0, 0.1) == 10


def test_leakage_abort_reports_step():
    # coherent state near the truncation edge, driven upward by a strong rotation-free pump
    p = osc.OscillatorParams(omega=1.0, lam=0.5, n_max=16)
    psi = fock.StateVector(fock.coherent_amplitudes(2.5, 16), (16,)).normalized()
    with pytest.raises(TruncationLeakageError) as info:
        run_trajectory(psi, osc.build_model(p), 1.0, 0.01, 1, leakage_threshold=1e-9)
    assert info.value.step == 0


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_blowup_carries_step_index():
    def explode(v):
        return np.full_like(v, np.inf)

    model = DiffusionModel((3,), explode, (lambda v: 0 * v,))
    with pytest.raises(IntegratorBlowup) as info:
        run_trajectory(fock.vacuum(3), model, 0.1, 0.01, 1)
    assert info.value.step == 1


def test_record_lengths_and_serialization(tmp_path):
    rec = run_trajectory(superposition(), osc.build_model(P), 0.1, 0.01, 2,
                         observable_recorder({"H": osc.energy, "a": osc.annihilation_mean}))
    text = rec.to_csv(tmp_path / "r.csv")
    lines = text.splitlines()
    assert lines[0] == "t,H,a.re,a.im"
    assert len(lines) == 12
    back = TrajectoryRecord.from_json_dict(json.loads(rec.to_json()), (24,))
    np.testing.assert_array_equal(back["a"], rec["a"])
    assert back.metadata["seed"] == 2
    with pytest.raises(ValueError):
        TrajectoryRecord(np.arange(3.0), {"x": np.zeros(2)}, rec.final_state, np.zeros(3))


def test_weak_order_preconditions():
    model = osc.build_model(P)
    with pytest.raises(ValueError):
        weak_order_check(model, superposition(), osc.energy, 1.0, 1, 10, [0.1])
    with pytest.raises(ValueError):
        weak_order_check(model, superposition(), osc.energy, 1.0, 1, 10, [0.1, 0.03, 0.01])


def test_unitary_euler_error_is_first_order():
    p = osc.OscillatorParams(omega=1.0, lam=0.0, n_max=24)
    alpha, T = 1.0, 1.0
    x_op = fock.make_algebra(24).quadrature()
    exact = 2 * (alpha * np.exp(-1j * T)).real

    def x(s):
        return fock.expect(s, x_op).real

    rep = weak_order_check(osc.build_model(p), fock.coherent_state(alpha, 24), x, T, 1, 2,
                           [0.02, 0.01, 0.005, 0.0025], reference=exact, scheme="euler")
    assert 0.9 <= rep.exponent <= 1.1
    assert rep.within(0.7, 1.3)


def test_weak_order_flags_unresolved_errors_as_inconclusive():
    # the exponential scheme is exact on coherent states, so all level differences vanish
    p = osc.OscillatorParams(omega=1.0, lam=0.5, n_max=24)
    rep = weak_order_check(osc.build_model(p), fock.coherent_state(1.0, 24), osc.energy,
                           0.2, 1, 4, [0.02, 0.01, 0.005])
    assert rep.inconclusive
    assert not rep.within(0.7, 1.3)


@given(st.integers(0, 10_000))
def test_increments_override_reproduces_seeded_run(seed):
    from coherent_collapse.noise import NoisePath
    model = osc.build_model(P)
    inc = NoisePath(seed, 3, 1, 0.05).increments(4)
    a = run_trajectory(superposition(), model, 0.2, 0.05, seed, trajectory=3)
    b = run_trajectory(superposition(), model, 0.2, 0.05, 0, increments=inc)
    assert a.final_state.amplitudes.tobytes() == b.final_state.amplitudes.tobytes()
