import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st

from auocs import bench
from auocs.bench import (
    REPORT_HEADER,
    HarnessError,
    SweepConfig,
    rho_terms,
    run_profile,
    run_sweep,
)
from auocs.conic import NumericalFailure, Status
from auocs.model import InstanceConfig, gen_instance, make_rng
from auocs.recovery import RecoveryMethod, recover


def test_rho_terms_examples():
    assert rho_terms([0, 4], [0, 4]) == (0, 0)
    assert rho_terms([2], [0, 4]) == (1, 2)
    assert rho_terms([], [0, 4]) == (0, 2)
    assert rho_terms([0, 1, 2, 3], []) == (4, 0)


def test_rho_terms_rejects_out_of_range():
    with pytest.raises(IndexError):
        rho_terms([5], [0], N=5)


@given(st.sets(st.integers(0, 19)), st.sets(st.integers(0, 19)))
def test_rho_terms_bounds_and_symmetry(est, true):
    fa, miss = rho_terms(est, true, N=20)
    assert fa + miss == len(est ^ true)
    assert 0 <= fa + miss <= 20
    assert rho_terms(true, est) == (miss, fa)


def _sweep(**kw):
    base = kw.pop("base", InstanceConfig(12, 6, 2, 0.3))
    args = dict(sweep_variable="K", sweep_values=(1, 2), methods=(RecoveryMethod.bp(), RecoveryMethod.auo(0.3)),
                trials=4, master_seed=5)
    args.update(kw)
    return SweepConfig(base=base, **args)


def test_exact_recovery_gives_zero_rho():
    cfg = _sweep(base=InstanceConfig(10, 10, 3, 0.0), sweep_values=(3,), methods=(RecoveryMethod.bp(),), trials=1)
    row = run_sweep(cfg).rows[0]
    assert (row.rho_mean, row.fa_mean, row.miss_mean, row.failures) == (0.0, 0.0, 0.0, 0)
    assert row.rho_std == 0.0


def test_report_shape_and_additivity():
    report = run_sweep(_sweep(methods=(RecoveryMethod.bp(), RecoveryMethod.auo(0.3), RecoveryMethod.omp())))
    assert len(report.rows) == 6
    for row in report.rows:
        assert row.rho_mean == pytest.approx(row.fa_mean + row.miss_mean)
        assert 0 <= row.rho_mean <= row.N
        assert row.miss_mean <= row.K
    lines = report.to_csv().splitlines()
    assert lines[0] == ",".join(REPORT_HEADER)
    assert len(lines) == 7


def test_sweep_is_paired_across_methods():
    one = run_sweep(_sweep(methods=(RecoveryMethod.bp(),)))
    both = run_sweep(_sweep())
    for row in one.rows:
        assert both.get("bp", row.sweep_value) == row


def test_sweep_independent_of_worker_count():
    cfg = _sweep(sweep_variable="M", sweep_values=(4, 6))
    assert run_sweep(cfg, workers=1).to_csv() == run_sweep(cfg, workers=2).to_csv()


def test_sweep_seed_changes_results():
    cfg = _sweep(trials=6)
    a = run_sweep(cfg).to_csv()
    b = run_sweep(SweepConfig(**{**cfg.__dict__, "master_seed": 6})).to_csv()
    assert a != b


def _flaky_recover(fail_every):
    count = {"n": 0}

    def fake(B, y, method, settings=None, tau=0.5, trace_path=None):
        count["n"] += 1
        if count["n"] % fail_every == 0:
            raise NumericalFailure("forced")
        return recover(B, y, method, settings, tau)

    return fake


def test_failures_counted(monkeypatch):
    monkeypatch.setattr(bench, "recover", _flaky_recover(20))
    report = run_sweep(_sweep(methods=(RecoveryMethod.bp(),), sweep_values=(2,), trials=20))
    assert report.rows[0].failures == 1


def test_too_many_failures_abort(monkeypatch):
    monkeypatch.setattr(bench, "recover", _flaky_recover(2))
    with pytest.raises(HarnessError):
        run_sweep(_sweep(methods=(RecoveryMethod.bp(),), sweep_values=(2,), trials=10))


def test_non_optimal_status_is_a_failure(monkeypatch):
    def fake(B, y, method, settings=None, tau=0.5, trace_path=None):
        res = recover(B, y, method, settings, tau)
        return res.__class__(**{**res.__dict__, "solver_status": Status.MAX_ITERS})

    monkeypatch.setattr(bench, "recover", fake)
    with pytest.raises(HarnessError):
        run_sweep(_sweep(methods=(RecoveryMethod.bp(),), sweep_values=(2,), trials=3))


def test_profile_determined_noiseless_matches_truth():
    base = InstanceConfig(8, 8, 3, 0.0)
    prof = run_profile(base, [RecoveryMethod.bp()], trials=3, master_seed=2)
    np.testing.assert_allclose(prof.columns["bp"], prof.true, atol=1e-6)
    assert prof.true.max() == 1.0


def test_profile_single_trial_equals_one_recovery():
    base = InstanceConfig(20, 12, 2, 0.1)
    method = RecoveryMethod.auo(0.1)
    prof = run_profile(base, [method], trials=1, master_seed=3, normalization="l2")
    # rebuild the one trial by hand
    truth = bench.gen_sparse_signal(20, 2, make_rng(3))
    rng = make_rng(3, bench._PROFILE_STREAM, 0)
    A = bench.gen_measurement_matrix(12, 20, rng)
    V = bench.gen_perturbation(12, 20, 0.1, rng)
    mags = np.abs(recover(A + V, A @ truth, method).theta_hat)
    assert mags.max() > 1e-3
    np.testing.assert_allclose(prof.true, truth / np.linalg.norm(truth))
    np.testing.assert_allclose(prof.columns["auo"], mags / np.linalg.norm(mags))


def test_profile_csv_columns():
    prof = run_profile(InstanceConfig(10, 5, 2, 0.2), [RecoveryMethod.bp(), RecoveryMethod.omp(2)], trials=2)
    lines = prof.to_csv().splitlines()
    assert lines[0].split(",")[:2] == ["index", "true"]
    assert len(lines[0].split(",")) == 4
    assert len(lines) == 11


def test_profile_rejects_zero_trials():
    with pytest.raises(ValueError):
        run_profile(InstanceConfig(10, 5, 2, 0.2), [RecoveryMethod.bp()], trials=0)
