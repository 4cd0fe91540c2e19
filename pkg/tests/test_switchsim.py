import io

import numpy as np
import pytest

from koopman_clf.analysis import analyze_family
from koopman_clf.certificate import CommonLyapunovFunction
from koopman_clf.multiindex import build_basis
from koopman_clf.switchsim import (
    SwitchingSignal,
    _segment_steps,
    audit_certificate,
    export_run_csv,
    integrate_switched,
    random_signal,
    sample_initial_points,
    thread_count,
)
from koopman_clf.vectorfield import PolyVectorField, SwitchedFamily


def contraction_family(rates=(-1.0, -2.0)):
    fields = [
        PolyVectorField([{(1, 0): r}, {(0, 1): r}]) for r in rates
    ]
    return SwitchedFamily(fields)


def linear_nonnormal_family():
    A1 = np.array([[-1.0, 0.6], [0.0, -1.0]])
    A2 = np.diag([-1.0, -1.5])
    return SwitchedFamily([PolyVectorField.from_linear(A) for A in (A1, A2)])


# signals --------------------------------------------------------------------


def test_signal_validation_and_boundaries():
    sig = SwitchingSignal((0.25, 0.5, 0.25), (0, 1, 0), 1.0)
    assert len(sig) == 3
    assert np.allclose(sig.boundaries, [0.25, 0.75, 1.0])
    assert sig.boundaries[-1] == 1.0
    with pytest.raises(ValueError):
        SwitchingSignal((0.5,), (0, 1), 1.0)
    with pytest.raises(ValueError):
        SwitchingSignal((0.5, 0.0), (0, 1), 0.5)


def test_random_signal_is_seed_reproducible():
    a = random_signal(3, 20.0, seed=7)
    b = random_signal(3, 20.0, seed=7)
    assert a.durations == b.durations
    assert a.subsystems == b.subsystems
    c = random_signal(3, 20.0, seed=8)
    assert a.durations != c.durations or a.subsystems != c.subsystems


def test_random_signal_respects_dwell_bounds():
    for seed in range(25):
        sig = random_signal(2, 20.0, min_dwell=0.05, max_dwell=1.0, seed=seed)
        assert abs(sum(sig.durations) - 20.0) < 1e-9
        assert all(0 <= s < 2 for s in sig.subsystems)
        assert all(d >= 0.05 - 1e-12 for d in sig.durations)
        assert all(d <= 1.0 + 1e-12 for d in sig.durations[:-1])
        # final segment may only exceed max_dwell in degenerate configs
        assert sig.durations[-1] <= 1.0 + 1e-9


def test_random_signal_edge_cases():
    assert len(random_signal(2, 0.0)) == 0
    with pytest.raises(ValueError):
        random_signal(0, 1.0)
    with pytest.raises(ValueError):
        random_signal(2, 1.0, min_dwell=0.0)
    with pytest.raises(ValueError):
        random_signal(2, 1.0, min_dwell=0.5, max_dwell=0.4)
    with pytest.raises(ValueError):
        random_signal(2, -1.0)


def test_segment_step_planning():
    assert _segment_steps(0.25, 0.1) == (2, pytest.approx(0.05))
    n, rem = _segment_steps(0.3, 0.1)
    assert n == 3 and rem == 0.0
    n, rem = _segment_steps(0.05, 0.1)
    assert n == 0 and rem == pytest.approx(0.05)


# integration ----------------------------------------------------------------


def test_constant_signal_matches_exponential_decay():
    fam = contraction_family()
    sig = SwitchingSignal((2.0,), (0,), 2.0)
    run = integrate_switched(fam, sig, np.array([0.5, -0.25]), dt=1e-3)
    assert np.max(np.abs(run.final_state - np.exp(-2.0) * np.array([0.5, -0.25]))) < 1e-9
    assert run.times[-1] == 2.0
    assert not run.escaped


def test_switch_instants_are_sampled_exactly():
    fam = contraction_family()
    sig = SwitchingSignal((0.123, 0.456, 0.421), (0, 1, 0), 1.0)
    run = integrate_switched(fam, sig, np.array([0.4, 0.1]), dt=0.01)
    for b in sig.boundaries:
        assert np.min(np.abs(run.times - b)) == 0.0
    # active subsystem recorded at every sample
    assert run.active[0] == 0
    assert run.active[-1] == 0
    assert set(run.active.tolist()) == {0, 1}


def test_cross_segment_decay_against_closed_form():
    fam = contraction_family(rates=(-1.0, -2.0))
    sig = SwitchingSignal((0.5, 0.5), (0, 1), 1.0)
    run = integrate_switched(fam, sig, np.array([0.8, 0.2]), dt=1e-3)
    factor = np.exp(-0.5) * np.exp(-1.0)
    assert np.max(np.abs(run.final_state - factor * np.array([0.8, 0.2]))) < 1e-9


def test_dt_larger_than_segment_still_lands_on_switch():
    fam = contraction_family()
    sig = SwitchingSignal((0.03, 0.07), (0, 1), 0.1)
    run = integrate_switched(fam, sig, np.array([0.5, 0.5]), dt=0.05)
    assert 0.03 in run.times.tolist()
    assert run.times[-1] == pytest.approx(0.1)


def test_certificate_values_recorded_and_monotone_for_contraction():
    fam = contraction_family()
    basis = build_basis(2, 3)
    clf = CommonLyapunovFunction(
        np.ones(basis.size), np.eye(2, dtype=complex), basis
    )
    sig = SwitchingSignal((0.5, 0.5), (0, 1), 1.0)
    run = integrate_switched(fam, sig, np.array([0.4, -0.2]), dt=0.01, clf=clf)
    assert run.v_values is not None
    assert len(run.v_values) == len(run.times)
    assert run.max_v_increase == 0.0
    assert all(b < a for a, b in zip(run.v_values, run.v_values[1:]))


def test_escape_is_flagged_not_raised():
    fam = SwitchedFamily(
        [PolyVectorField([{(1, 0): 1.0}, {(0, 1): 1.0}])]
    )
    sig = SwitchingSignal((0.2,), (0,), 0.2)
    run = integrate_switched(fam, sig, np.array([0.9, 0.0]), dt=1e-3)
    assert run.escaped
    assert 0.09 < run.escape_time < 0.13  # exp growth from 0.9 crosses 1
    assert run.times[-1] == pytest.approx(0.2)  # integration continues


def test_integrate_switched_validates_arguments():
    fam = contraction_family()
    sig = SwitchingSignal((1.0,), (0,), 1.0)
    with pytest.raises(ValueError):
        integrate_switched(fam, sig, np.array([0.1, 0.1]), dt=0.0)
    with pytest.raises(ValueError):
        integrate_switched(fam, sig, np.array([0.1, 0.1, 0.1]))


def test_run_csv_layout():
    fam = contraction_family()
    sig = SwitchingSignal((0.1,), (0,), 0.1)
    run = integrate_switched(fam, sig, np.array([0.3, 0.2]), dt=0.05)
    buf = io.StringIO()
    export_run_csv(run, buf)
    lines = buf.getvalue().strip().split("\n")
    assert lines[0] == "t,re_z1,im_z1,re_z2,im_z2,V,active_subsystem"
    assert len(lines) == len(run.times) + 1
    first = lines[1].split(",")
    assert float(first[0]) == 0.0
    assert first[5] == ""  # no certificate attached
    assert first[6] == "0"


# initial points -------------------------------------------------------------


def test_sample_points_deterministic_and_inside_radius():
    a = sample_initial_points(2, 0.9, 12, seed=3)
    b = sample_initial_points(2, 0.9, 12, seed=3)
    assert np.array_equal(a, b)
    c = sample_initial_points(2, 0.9, 12, seed=4)
    assert not np.array_equal(a, c)
    assert np.all(np.abs(a) <= 0.9 + 1e-12)
    # first half is purely real, second half carries phases
    assert np.all(a[:6].imag == 0.0)
    assert np.any(np.abs(a[6:].imag) > 0)


def test_sample_points_validation_and_small_counts():
    with pytest.raises(ValueError):
        sample_initial_points(2, 0.5, 0, seed=0)
    one = sample_initial_points(3, 0.5, 1, seed=0)
    assert one.shape == (1, 3)
    assert np.all(one.imag == 0.0)


# audit ----------------------------------------------------------------------


def certified_linear_report():
    fam = linear_nonnormal_family()
    rep = analyze_family(fam, 4, scheme_kind="polynomial")
    assert rep.certified
    return fam, rep


def test_audit_passes_and_is_deterministic():
    fam, rep = certified_linear_report()
    kw = dict(signals=4, points=6, seed=11, dt=0.01, horizon=3.0)
    s1 = audit_certificate(fam, rep, **kw)
    s2 = audit_certificate(fam, rep, **kw)
    assert s1.passed
    assert s1.max_v_increase == 0.0
    assert s1.escapes == 0
    assert s1.to_json_dict() == s2.to_json_dict()


def test_audit_threaded_reduction_matches_sequential():
    fam, rep = certified_linear_report()
    kw = dict(signals=6, points=4, seed=2, dt=0.01, horizon=2.0)
    seq = audit_certificate(fam, rep, threads=1, **kw)
    par = audit_certificate(fam, rep, threads=3, **kw)
    assert seq.to_json_dict() == par.to_json_dict()


def test_audit_flags_weight_tampering():
    fam, rep = certified_linear_report()
    basis = build_basis(2, 4)
    rep.epsilon = rep.epsilon.copy()
    rep.epsilon[basis.index_of((0, 1)) - 1] = 1e-12
    bad = audit_certificate(
        fam, rep, signals=4, points=6, seed=11, dt=0.01, horizon=3.0
    )
    assert not bad.passed
    assert bad.max_v_increase > 1e-9


def test_audit_validates_inputs():
    fam, rep = certified_linear_report()
    with pytest.raises(ValueError):
        audit_certificate(fam, rep, signals=0)
    rep.epsilon = None
    with pytest.raises(ValueError):
        audit_certificate(fam, rep)


def test_thread_count_env_parsing(monkeypatch):
    monkeypatch.delenv("KOOPMAN_CLF_THREADS", raising=False)
    assert thread_count() == 1
    monkeypatch.setenv("KOOPMAN_CLF_THREADS", "4")
    assert thread_count() == 4
    monkeypatch.setenv("KOOPMAN_CLF_THREADS", "0")
    assert thread_count() == 1
    monkeypatch.setenv("KOOPMAN_CLF_THREADS", "junk")
    assert thread_count() == 1
