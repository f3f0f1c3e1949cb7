import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coherent_collapse import fermion_induced as fi
from coherent_collapse import field_lattice as fl
from coherent_collapse import fock

# unit Gaussian pulse (center 1.5, width 0.5, window [0, 3]) at w = 1, high-precision value
GAUSSIAN_ALPHA = 0.78029907314229410994 - 0.055334787281389801883j

ONE_MODE = fl.LatticeConfig(L=2, mass=1.0, lam=0.0, n_max=24, modes=(0,))
TWO_MODES = fl.LatticeConfig(L=2, mass=1.0, lam=0.0, n_max=12, modes=(0, 1))


def riemann_alpha(pulse, mode, t, omega, n=400_000):
    u = (np.arange(n) + 0.5) * (t / n)
    j = np.array([pulse(mode, x) for x in u[:: n // 4000]])   # coarse probe for shape
    env = np.exp(-0.5 * ((u - pulse.center) / pulse.width) ** 2) * pulse.amplitude
    assert np.allclose(j, env[:: n // 4000] * pulse.profile[mode])
    s = np.sum(env * pulse.profile[mode] * np.exp(1j * omega * u)) * (t / n)
    return -1j * s / math.sqrt(2 * omega)


def target_pulse(alpha_abs, config=ONE_MODE, **kw):
    base = fi.CurrentPulse(**kw)
    a = abs(fi.alpha_of(base, 0, base.t_end, config.omegas[0]))
    return base.scaled(alpha_abs / a)


def test_zero_pulse_gives_zero_alpha_and_vacuum():
    p = fi.CurrentPulse(amplitude=0.0)
    assert fi.alpha_of(p, 0, 3.0, 1.0) == 0
    out = fi.evolve_with_current(p, ONE_MODE, 3.0, 0.01)
    assert fock.fidelity(out, fock.vacuum(ONE_MODE.dims)) == 1.0


def test_constant_current_over_a_period_cancels():
    w = 1.3
    p = fi.CurrentPulse(envelope="constant", t_end=2 * math.pi / w)
    assert abs(fi.alpha_of(p, 0, p.t_end, w)) < 1e-10


def test_gaussian_alpha_matches_oracles():
    p = fi.CurrentPulse()
    a = fi.alpha_of(p, 0, 3.0, 1.0)
    assert abs(a - GAUSSIAN_ALPHA) < 1e-8
    assert abs(a - riemann_alpha(p, 0, 3.0, 1.0)) < 1e-8


def test_alpha_validation():
    p = fi.CurrentPulse()
    with pytest.raises(ValueError):
        fi.alpha_of(p, 0, -1.0, 1.0)
    with pytest.raises(ValueError):
        fi.alpha_of(p, 0, 1.0, 0.0)
    with pytest.raises(ValueError):
        fi.CurrentPulse(envelope="square")
    with pytest.raises(ValueError):
        fi.CurrentPulse(width=0.0)


@given(st.floats(0.1, 2.9), st.floats(0.5, 3.0))
@settings(max_examples=25)
def test_alpha_is_additive_over_windows(t1, w):
    p = fi.CurrentPulse(envelope="sine2", center=1.2, width=0.8)
    whole = fi.alpha_of(p, 0, 3.0, w)
    a1 = fi.alpha_of(p, 0, t1, w)
    rest = whole - a1
    # second window computed directly by shifting the pulse
    shifted = fi.CurrentPulse(envelope="sine2", center=1.2 - t1, width=0.8, t_end=3.0 - t1)
    direct = fi.alpha_of(shifted, 0, 3.0 - t1, w) * np.exp(1j * w * t1)
    assert abs(rest - direct) < 1e-9


def test_hermiticity_of_profiles():
    c = fl.LatticeConfig(L=4, modes=(1, 3), n_max=4)
    assert fi.hermiticity_violation(fi.CurrentPulse(profile=(1 + 1j, 1 - 1j)), c) == 0
    assert fi.hermiticity_violation(fi.CurrentPulse(profile=(1 + 1j, 1 + 1j)), c) == pytest.approx(2)
    assert math.isfinite(fi.CurrentPulse().l2_norm(0))


def test_pulse_displaces_vacuum_into_coherent_state():
    p = target_pulse(1.5)
    alpha = fi.alpha_of(p, 0, p.t_end, ONE_MODE.omegas[0])
    assert abs(alpha) == pytest.approx(1.5)
    out = fi.evolve_with_current(p, ONE_MODE, p.t_end, 0.01)
    assert fi.coherence_residual(out, ONE_MODE, 0, alpha) < 1e-3
    assert fock.fidelity(out, fock.coherent_state(alpha, 24)) > 1 - 1e-4


def test_untouched_mode_stays_vacuum():
    p = fi.CurrentPulse(profile=(1.0, 0.0))
    out = fi.evolve_with_current(p, TWO_MODES, p.t_end, 0.01)
    amp = out.amplitudes.reshape(TWO_MODES.dims)
    assert np.sum(np.abs(amp[:, 1:]) ** 2) < 1e-28
    assert np.sum(np.abs(amp[1:, 0]) ** 2) > 0.1


def test_segments_compose():
    p = target_pulse(1.2)
    whole = fi.evolve_with_current(p, ONE_MODE, 3.0, 0.01)
    first = fi.evolve_with_current(p, ONE_MODE, 1.3, 0.01)
    both = fi.evolve_with_current(p, ONE_MODE, 1.7, 0.01, first, t0=1.3)
    assert fock.fidelity(whole, both) >= 1 - 1e-6


def test_guard_refuses_large_displacement():
    with pytest.raises(fock.TruncationRiskError):
        fi.evolve_with_current(target_pulse(4.0), ONE_MODE, 3.0, 0.01)


def test_state_dims_must_match():
    with pytest.raises(ValueError):
        fi.evolve_with_current(fi.CurrentPulse(), ONE_MODE, 3.0, 0.01, fock.vacuum((4,)))


def pulses(target=2.0):
    a = target_pulse(target)
    return a, a.scaled(-1.0)


def demo_config(lam=1.0):
    return fl.LatticeConfig(L=2, mass=1.0, lam=lam, n_max=32, modes=(0,))


def test_single_branch_always_wins():
    a, b = pulses()
    res = fi.induced_reduction_demo(a, b, (1, 0), 1.0, demo_config(), 1.0, 0.01, 8, 3)
    np.testing.assert_array_equal(res.counts, [8, 0])
    assert res.matches_born()


def test_no_coupling_leaves_superposition_unreduced():
    a, b = pulses()
    res = fi.induced_reduction_demo(a, b, (1, 1), 0.0, demo_config(0.0), 1.0, 0.01, 4, 3)
    assert res.unreduced == 4
    assert res.classifications == [fi.UNREDUCED] * 4
    assert not res.matches_born()


def test_indistinguishable_branches_are_refused():
    a = target_pulse(0.1)
    with pytest.raises(fi.IndistinguishableBranches):
        fi.induced_reduction_demo(a, a.scaled(-1.0), (1, 1), 1.0, demo_config(), 1.0, 0.01, 4, 1)
    with pytest.raises(ValueError):
        fi.induced_reduction_demo(*pulses(), (0, 0), 1.0, demo_config(), 1.0, 0.01, 4, 1)


def test_decayed_alphas_rate():
    c = demo_config(2.0)
    out = fi.decayed_alphas(np.array([1.0]), c, 1.0)
    assert abs(out[0]) == pytest.approx(math.exp(-1.0 / c.omegas[0]))


def test_equal_weights_follow_born_rule():
    a, b = pulses()
    res = fi.induced_reduction_demo(a, b, (1, 1), 1.0, demo_config(), 4.0, 0.01, 100, 17,
                                    workers=4)
    assert res.unreduced == 0
    assert res.matches_born(), res.to_dict()
