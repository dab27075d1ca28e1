import numpy as np
import pytest

from qndprobe.gaussian import (
    JXY,
    JY,
    JZ,
    M,
    CouplingParams,
    PulseSchedule,
    ScheduleEntry,
    apply_decoherence,
    apply_pulse,
    init_css,
    run_schedule,
    single_atom_mixed_variances,
    state_from_atomic_moments,
)


def make_params(**kw):
    base = dict(g1=1e-3, g2=1e-3, photons_per_pulse=100.0, num_pulses=2,
                atom_number=1000.0, f=1.0)
    base.update(kw)
    return CouplingParams(**base)


# ---------------------------------------------------------------- parameters

def test_params_validation():
    with pytest.raises(ValueError):
        make_params(g1=float("nan"))
    with pytest.raises(ValueError):
        make_params(photons_per_pulse=0)
    with pytest.raises(ValueError):
        make_params(atom_number=-5)
    with pytest.raises(ValueError):
        make_params(scattering_eps=1.5)
    with pytest.raises(ValueError):
        make_params(num_pulses=0)
    with pytest.raises(ValueError):
        make_params(f=0.7)


# ----------------------------------------------------------------- schedules

def test_naive_schedule_structure():
    sched = PulseSchedule.naive(4)
    assert len(sched) == 4
    assert all(e.sx_sign == 1 and e.meter_sign == 1 for e in sched.entries)
    assert sched.describe() == "naive"


def test_decoupled_schedule_structure():
    sched = PulseSchedule.decoupled(3)
    assert len(sched) == 6
    assert [e.sx_sign for e in sched.entries] == [1, -1, 1, -1, 1, -1]
    # meter sign is (-1)^(i+1) for 1-based pulse index i
    assert [e.meter_sign for e in sched.entries] == [(-1) ** (i + 1) for i in range(1, 7)]
    assert sched.describe() == "decoupled(p=3)"


def test_schedule_rejects_inconsistent_entries():
    with pytest.raises(ValueError):
        PulseSchedule((ScheduleEntry(-1, 1),), "naive")
    with pytest.raises(ValueError):
        PulseSchedule((ScheduleEntry(1, 1), ScheduleEntry(1, -1)), "decoupled", 1)
    with pytest.raises(ValueError):
        PulseSchedule.decoupled(0)


# ------------------------------------------------------------------ init_css

def test_init_css_projection_noise():
    st = init_css(make_params(atom_number=1e6))
    assert st.cov[JZ, JZ] == pytest.approx(2.5e5)
    assert st.cov[JY, JY] == pytest.approx(2.5e5)
    assert st.jx_mean == pytest.approx(5e5)
    assert np.all(st.mean == 0.0)

    tiny = init_css(make_params(atom_number=2.0))
    assert tiny.cov[JZ, JZ] == pytest.approx(0.5)


def test_init_css_f1_jxy_mirrors_jz():
    st = init_css(make_params(atom_number=1e6, f=1.0))
    assert st.cov[JXY, JXY] == st.cov[JZ, JZ]
    assert st.cov[JXY, JZ] == st.cov[JZ, JZ]
    st.check_psd()


def test_init_css_f_half_jxy_vanishes():
    st = init_css(make_params(atom_number=100.0, f=0.5))
    assert st.cov[JXY, JXY] == 0.0
    assert st.cov[JXY, JZ] == 0.0


# --------------------------------------------------------------- apply_pulse

def test_pulse_meter_gain_pure_qnd():
    # g2 = 0: the meter mean picks up g1 * (nL/2) * <Jz>, var(Jz) untouched
    params = make_params(g2=0.0, num_pulses=1)
    state = state_from_atomic_moments(0.0, 30.0, 0.0, np.diag([5.0, 7.0, 3.0]), 500.0)
    out = apply_pulse(state, ScheduleEntry(1, 1), params)
    assert out.mean[M] == pytest.approx(params.g1 * 50.0 * 30.0)
    assert out.cov[JZ, JZ] == pytest.approx(7.0)
    assert out.mean[JZ] == pytest.approx(30.0)


def test_pulse_free_propagation_adds_shot_noise_only():
    params = make_params(g1=0.0, g2=0.0, num_pulses=1)
    state = init_css(params)
    out = apply_pulse(state, ScheduleEntry(1, 1), params)
    assert np.allclose(out.mean, state.mean)
    assert np.allclose(out.cov[:3, :3], state.cov[:3, :3])
    assert out.cov[M, M] == pytest.approx(params.photons_per_pulse / 4)


def test_pulse_naive_jz_variance_gain_matches_affine_transport():
    # independent oracle: var'(Jz) = var(Jz) + g2^2 Sx^2 var(Jy) + 2 g2 Sx cov(Jz, Jy)
    params = make_params(g1=0.0, g2=2e-3, num_pulses=1)
    cov = np.array([[9.0, 1.5, 0.0], [1.5, 4.0, 0.0], [0.0, 0.0, 2.0]])
    state = state_from_atomic_moments(0.0, 0.0, 0.0, cov, 500.0)
    sx = params.photons_per_pulse / 2
    expected = 4.0 + params.g2 ** 2 * sx ** 2 * 9.0 + 2 * params.g2 * sx * 1.5
    out = apply_pulse(state, ScheduleEntry(1, 1), params)
    assert out.cov[JZ, JZ] == pytest.approx(expected, rel=1e-12)


def test_pulse_dropped_terms_feed_jz_and_meter():
    params_on = make_params(g2=1e-3, num_pulses=1, include_dropped_terms=True)
    params_off = make_params(g2=1e-3, num_pulses=1, include_dropped_terms=False)
    state = init_css(params_on)
    on = apply_pulse(state, ScheduleEntry(1, 1), params_on)
    off = apply_pulse(state, ScheduleEntry(1, 1), params_off)
    shot = params_on.photons_per_pulse / 4
    jx = state.jx_mean
    # -g2 Sy_in Jx adds g2^2 var(Sy) jx^2 to var(Jz), correlated with the meter shot noise
    assert on.cov[JZ, JZ] - off.cov[JZ, JZ] == pytest.approx(params_on.g2 ** 2 * shot * jx ** 2)
    assert on.cov[JZ, M] - off.cov[JZ, M] == pytest.approx(-params_on.g2 * shot * jx)
    # -g2 Sz_in Jy adds g2^2 var(Sz) (var(Jy) + mean(Jy)^2) to var(M)
    assert on.cov[M, M] - off.cov[M, M] == pytest.approx(
        params_on.g2 ** 2 * shot * state.cov[JY, JY]
    )


# ----------------------------------------------------------------- decoherence

def test_decoherence_identity_at_zero():
    params = make_params()
    state = init_css(params)
    out = apply_decoherence(state, 0.0, params)
    assert out is state


def test_decoherence_complete_depolarization():
    params = make_params(atom_number=1e4, f=1.0)
    state = init_css(params)
    out = apply_decoherence(state, 1.0, params)
    kappa_y, kappa_z, kappa_xy = single_atom_mixed_variances(1.0)
    assert out.jx_mean == 0.0
    assert out.cov[JY, JY] == pytest.approx(1e4 * kappa_y)
    assert out.cov[JZ, JZ] == pytest.approx(1e4 * kappa_z)
    assert out.cov[JXY, JXY] == pytest.approx(1e4 * kappa_xy)
    # f = 1 isotropic single-atom variance f(f+1)/3 scaled by the 1/2 in jz
    assert kappa_z == pytest.approx(1.0 * 2.0 / 12.0)


def test_decoherence_jx_decay_example():
    params = make_params(atom_number=1e6)
    out = apply_decoherence(init_css(params), 0.01, params)
    assert out.jx_mean == pytest.approx(4.95e5)


def test_decoherence_rejects_bad_eps():
    params = make_params()
    with pytest.raises(ValueError):
        apply_decoherence(init_css(params), 1.2, params)


# ---------------------------------------------------------------- run_schedule

def test_decoupled_pair_conserves_mean_jz():
    params = make_params(g2=5e-3, num_pulses=2)
    result = run_schedule(params, PulseSchedule.decoupled(1))
    assert result.final_state.mean[JZ] == pytest.approx(0.0, abs=1e-15)


def test_decoupled_meter_noise_closed_form():
    # g2 = 0: 4 var(M)/NL = 1 + g1^2 NL var(Jz)
    params = make_params(g2=0.0, num_pulses=10, photons_per_pulse=1e5, atom_number=1e5)
    result = run_schedule(params, PulseSchedule.decoupled(5))
    nl_total = params.total_photons
    lhs = 4 * result.meter_var / nl_total
    rhs = 1 + params.g1 ** 2 * nl_total * params.atom_number / 4
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_naive_meter_pure_shot_noise_when_g1_zero():
    params = make_params(g1=0.0, g2=3e-3, num_pulses=4)
    result = run_schedule(params, PulseSchedule.naive(4))
    assert result.meter_var == pytest.approx(params.total_photons / 4, rel=1e-12)
    assert result.meter_mean == 0.0


def test_run_schedule_rejects_length_mismatch():
    params = make_params(num_pulses=2)
    with pytest.raises(ValueError):
        run_schedule(params, PulseSchedule.naive(3))


# ------------------------------------------------------------------ invariants

def paper_params(mode, p=5, na=1.0e6, **kw):
    from qndprobe.experiment import paper_scale_params
    return paper_scale_params(mode=mode, p=p, na=na, **kw)


@pytest.mark.parametrize("mode,p", [("decoupled", 5), ("naive", 5), ("decoupled", 1)])
def test_covariance_stays_psd_through_schedule(mode, p):
    params, sched = paper_params(mode, p=p)
    run_schedule(params, sched, check_psd=True)  # raises on violation


def test_qnd_conservation_residual_shrinks_with_p():
    residuals = []
    for p in (1, 2, 4, 8, 16, 32, 64):
        params, sched = paper_params("decoupled", p=p)
        result = run_schedule(params, sched)
        var0 = init_css(params).cov[JZ, JZ]
        residuals.append(abs(result.final_state.cov[JZ, JZ] - var0) / var0)
        assert abs(result.final_state.mean[JZ]) < 1e-12
    assert all(b < a for a, b in zip(residuals, residuals[1:]))


def test_meter_gain_independent_of_p():
    # mean(M) = g1 (NL/2) mean(Jz_in); the g2 correction enters through the
    # initial <Jxy> and falls off as 1/p, anchored at the empirical p = 64 value
    from qndprobe.experiment import G1_REFERENCE, NL_REFERENCE, g2_from_impact
    jz0 = 1234.0
    na = 1.0e6
    ideal = G1_REFERENCE * (NL_REFERENCE / 2) * jz0

    def meter_mean(p, mean_jxy):
        sched = PulseSchedule.decoupled(p)
        params = CouplingParams(
            g1=G1_REFERENCE, g2=g2_from_impact(), atom_number=na, f=1.0,
            photons_per_pulse=NL_REFERENCE / len(sched), num_pulses=len(sched),
        )
        cov = np.full((3, 3), 0.0)
        np.fill_diagonal(cov, na / 4)
        initial = state_from_atomic_moments(0.0, jz0, mean_jxy, cov, na / 2)
        return run_schedule(params, sched, initial=initial).meter_mean

    # with <Jxy> = 0 the identity is exact at every order
    for p in (1, 4, 16):
        assert meter_mean(p, 0.0) == pytest.approx(ideal, rel=1e-12)

    # with <Jxy> = jz0 (the f=1 CSS identification) the residual scales ~ 1/p
    r64 = abs(meter_mean(64, jz0) - ideal)
    for p in (1, 2, 8, 32):
        assert abs(meter_mean(p, jz0) - ideal) <= r64 * (64 / p) * 1.05


@pytest.mark.parametrize("mode", ["naive", "decoupled"])
def test_backaction_growth_identical_in_both_modes(mode):
    # cov(Jy,Jy) grows by g1^2 var(Sz_in) jx^2 per pulse, never suppressed
    params, sched = paper_params(mode, p=5, g2=0.0)
    result = run_schedule(params, sched)
    per_pulse = params.g1 ** 2 * (params.photons_per_pulse / 4) * (params.atom_number / 2) ** 2
    expected = params.atom_number / 4 + params.num_pulses * per_pulse
    assert result.final_state.cov[JY, JY] == pytest.approx(expected, rel=1e-12)


def test_naive_quadratic_exceeds_decoupled_tenfold():
    from qndprobe.experiment import DEFAULT_NA_GRID, fit_linear_quadratic, sweep_atom_number
    na_grid = list(DEFAULT_NA_GRID)
    params_n, sched_n = paper_params("naive", p=5)
    params_d, sched_d = paper_params("decoupled", p=5)
    c2_naive = fit_linear_quadratic(sweep_atom_number(params_n, na_grid, sched_n)).c2
    c2_dec = fit_linear_quadratic(sweep_atom_number(params_d, na_grid, sched_d)).c2
    assert c2_naive > 0
    assert c2_naive >= 10 * c2_dec
